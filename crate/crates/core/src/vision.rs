//! Lamp classification and the color → engine command mapping.

use thiserror::Error;

use crate::signals::{ImagePatch, Phase, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LightColor {
    Red,
    Yellow,
    Green,
}

impl From<Phase> for LightColor {
    fn from(phase: Phase) -> Self {
        match phase {
            Phase::Red => LightColor::Red,
            Phase::Yellow => LightColor::Yellow,
            Phase::Green => LightColor::Green,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineCommand {
    StopEngine,
    ActivateEngine,
    MoveEngine,
}

/// Minimum lead of the winning region over the runner-up, intensity units.
pub const MARGIN: f64 = 10.0;
/// Minimum absolute score of the winning region.
pub const FLOOR: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("no glowing lamp (best score {best:.1}, runner-up {runner_up:.1})")]
pub struct NoGlowingLamp {
    pub best: f64,
    pub runner_up: f64,
}

/// Mean intensity of each region in the channel its lamp emits:
/// red for the top, (red + green) / 2 for the middle, green for the bottom.
pub fn region_scores(patch: &ImagePatch) -> [f64; 3] {
    Region::ALL.map(|region| {
        let pixels = patch.region(region);
        let sum: u64 = pixels
            .iter()
            .map(|&[r, g, _]| match region {
                Region::Top => 2 * r as u64,
                Region::Middle => r as u64 + g as u64,
                Region::Bottom => 2 * g as u64,
            })
            .sum();
        sum as f64 / (2.0 * pixels.len() as f64)
    })
}

pub fn classify(patch: &ImagePatch) -> Result<LightColor, NoGlowingLamp> {
    let scores = region_scores(patch);
    let mut order = [0usize, 1, 2];
    // stable: on exact ties the upper lamp sorts first, but ties never pass the margin
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (best, runner_up) = (scores[order[0]], scores[order[1]]);
    if best - runner_up < MARGIN || best <= FLOOR {
        return Err(NoGlowingLamp { best, runner_up });
    }
    Ok(Region::ALL[order[0]].lamp().into())
}

pub fn color_to_command(color: LightColor) -> EngineCommand {
    match color {
        LightColor::Red => EngineCommand::StopEngine,
        LightColor::Yellow => EngineCommand::ActivateEngine,
        LightColor::Green => EngineCommand::MoveEngine,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{render_patch, TrafficLight, DARK, LIT};
    use proptest::prelude::*;

    fn light(phase: Phase) -> TrafficLight {
        TrafficLight {
            light_id: 0,
            lane: 0,
            position: 0.0,
            phase,
            remaining: 1.0,
        }
    }

    #[test]
    fn noise_free_round_trip() {
        for phase in Phase::ALL {
            assert_eq!(classify(&render_patch(&light(phase), 0.0, 0)), Ok(phase.into()));
        }
    }

    #[test]
    fn dark_patch_has_no_lamp() {
        let patch = ImagePatch::filled(24, 72, [DARK; 3]).unwrap();
        assert!(classify(&patch).is_err());
    }

    #[test]
    fn washed_out_patch_has_no_lamp() {
        let patch = ImagePatch::filled(24, 72, [255; 3]).unwrap();
        assert!(classify(&patch).is_err());
    }

    #[test]
    fn two_lit_lamps_are_ambiguous() {
        let mut patch = ImagePatch::filled(24, 72, [DARK; 3]).unwrap();
        patch.region_mut(Region::Top).fill([LIT, DARK, DARK]);
        patch.region_mut(Region::Bottom).fill([DARK, LIT, DARK]);
        assert!(classify(&patch).is_err());
    }

    #[test]
    fn dim_lamp_below_floor() {
        let mut patch = ImagePatch::filled(24, 72, [0; 3]).unwrap();
        patch.region_mut(Region::Bottom).fill([0, 55, 0]);
        assert!(classify(&patch).is_err());
    }

    #[test]
    fn signal_selection() {
        assert_eq!(color_to_command(LightColor::Red), EngineCommand::StopEngine);
        assert_eq!(color_to_command(LightColor::Yellow), EngineCommand::ActivateEngine);
        assert_eq!(color_to_command(LightColor::Green), EngineCommand::MoveEngine);
    }

    fn accuracy(phase: Phase, sigma: f64, seeds: std::ops::Range<u64>) -> f64 {
        let n = seeds.end - seeds.start;
        let hits = seeds
            .filter(|&k| classify(&render_patch(&light(phase), sigma, k)) == Ok(phase.into()))
            .count();
        hits as f64 / n as f64
    }

    #[test]
    fn accuracy_degrades_monotonically_with_noise() {
        for phase in Phase::ALL {
            let accs: Vec<f64> = [0.0, 0.05, 0.2, 0.5]
                .iter()
                .map(|&s| accuracy(phase, s, 0..200))
                .collect();
            assert!(accs.windows(2).all(|w| w[0] >= w[1]), "{phase:?}: {accs:?}");
        }
    }

    proptest! {
        #[test]
        fn shuffling_within_regions_is_invisible(
            seed in any::<u64>(),
            sigma in 0.0f64..0.6,
            phase_idx in 0usize..3,
            swaps in prop::collection::vec((0usize..576, 0usize..576, 0usize..3), 0..64),
        ) {
            let patch = render_patch(&light(Phase::ALL[phase_idx]), sigma, seed);
            let mut shuffled = patch.clone();
            for (a, b, r) in swaps {
                shuffled.region_mut(Region::ALL[r]).swap(a, b);
            }
            prop_assert_eq!(classify(&patch), classify(&shuffled));
        }
    }
}
