//! Batch runs, parameter sweeps and CSV output.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::avoidance::Decision;
use crate::config::WorldConfig;
use crate::error::{Error, Result};
use crate::scenario::{self, ScenarioSpec};
use crate::world::World;

/// Preset for the accuracy sweeps: short noisy range sensors, a radio that
/// reaches well past them, and a lossy channel whose beacons are only trusted
/// within the step they were sent. Four comms rounds per step; the rounds
/// sweep overrides this per point.
pub fn degraded_sensing() -> WorldConfig {
    WorldConfig {
        decision_rounds: 4,
        sensor_noise_sigma: 0.2,
        sensor_range: 30.0,
        comms_radius: 150.0,
        p_loss: 0.5,
        beacon_ttl: 0.05,
        ..WorldConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub run_id: String,
    pub seed: u64,
    pub car_count: usize,
    pub decision_rounds: u32,
    pub steps: u64,
    /// One per car per step.
    pub epochs: u64,
    /// Epochs where the onboard decision matched the oracle.
    pub agreements: u64,
    /// `agreements / epochs`, or 1.0 for a run with no epochs; check `epochs`.
    pub accuracy: f64,
    /// Executed non-`Hold` decisions.
    pub decisions: u64,
    /// Executed non-`Hold` decisions per step, indexed by step.
    pub decisions_per_interval: Vec<(u64, u64)>,
    pub collisions: u64,
    pub near_misses: u64,
}

pub fn run_scenario(cfg: &WorldConfig, scenario: &ScenarioSpec, steps: u64) -> Result<MetricsReport> {
    let mut world = World::new(cfg.clone(), scenario)?;
    let mut epochs = 0;
    let mut agreements = 0;
    let mut per_step = Vec::with_capacity(steps as usize);
    let mut collisions = 0;
    let mut near_misses = 0;
    for _ in 0..steps {
        let report = world.step();
        epochs += report.decisions.len() as u64;
        agreements += report.decisions.iter().filter(|d| d.onboard == d.oracle).count() as u64;
        let active = report
            .decisions
            .iter()
            .filter(|d| d.executed != Decision::Hold)
            .count() as u64;
        per_step.push((report.step_index, active));
        collisions += report.collisions.len() as u64;
        near_misses += report.near_misses as u64;
    }
    Ok(MetricsReport {
        run_id: format!("s{}-n{}-r{}", cfg.rng_seed, scenario.cars.len(), cfg.decision_rounds),
        seed: cfg.rng_seed,
        car_count: scenario.cars.len(),
        decision_rounds: cfg.decision_rounds,
        steps,
        epochs,
        agreements,
        accuracy: if epochs == 0 {
            1.0
        } else {
            agreements as f64 / epochs as f64
        },
        decisions: per_step.iter().map(|(_, n)| n).sum(),
        decisions_per_interval: per_step,
        collisions,
        near_misses,
    })
}

/// Re-buckets a report's per-step decision counts into `interval`-second bins.
pub fn bucket_decisions(report: &MetricsReport, time_step: f64, interval: f64) -> Result<Vec<(u64, u64)>> {
    if !(interval.is_finite() && interval >= time_step * (1.0 - 1e-9)) {
        return Err(Error::InvalidArgument(format!(
            "interval {interval} must be at least the time step {time_step}"
        )));
    }
    let bucket_of = |step: u64| ((step as f64 * time_step) / interval + 1e-9).floor() as u64;
    let n = report
        .decisions_per_interval
        .last()
        .map_or(0, |&(step, _)| bucket_of(step) + 1);
    let mut buckets: Vec<(u64, u64)> = (0..n).map(|b| (b, 0)).collect();
    for &(step, count) in &report.decisions_per_interval {
        buckets[bucket_of(step) as usize].1 += count;
    }
    Ok(buckets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub report: MetricsReport,
    pub interval: f64,
    pub buckets: Vec<(u64, u64)>,
}

pub fn decisions_timeline(cfg: &WorldConfig, scenario: &ScenarioSpec, steps: u64, interval: f64) -> Result<Timeline> {
    // validate before spending the run
    bucket_decisions(
        &MetricsReport {
            decisions_per_interval: vec![],
            ..empty_report()
        },
        cfg.time_step,
        interval,
    )?;
    let report = run_scenario(cfg, scenario, steps)?;
    let buckets = bucket_decisions(&report, cfg.time_step, interval)?;
    Ok(Timeline {
        report,
        interval,
        buckets,
    })
}

fn empty_report() -> MetricsReport {
    MetricsReport {
        run_id: String::new(),
        seed: 0,
        car_count: 0,
        decision_rounds: 0,
        steps: 0,
        epochs: 0,
        agreements: 0,
        accuracy: 1.0,
        decisions: 0,
        decisions_per_interval: vec![],
        collisions: 0,
        near_misses: 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub x: u64,
    pub mean_accuracy: f64,
    /// One run per seed, in seed-vector order.
    pub runs: Vec<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Column name of the swept parameter.
    pub axis: &'static str,
    pub config_hash: String,
    /// Identical at every grid point.
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x as f64).collect()
    }

    pub fn mean_accuracies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_accuracy).collect()
    }

    pub fn spearman(&self) -> f64 {
        spearman(&self.xs(), &self.mean_accuracies())
    }
}

/// `base, base + 1, ..`: the paired seed vector shared by every grid point.
pub fn seed_vector(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

fn check_grid(name: &str, grid: &[u64], seeds: &[u64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} list is empty")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!("{name} list must be strictly ascending")));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    Ok(())
}

fn assemble(axis: &'static str, cfg: &WorldConfig, grid: &[u64], seeds: &[u64], runs: Vec<MetricsReport>) -> Sweep {
    let points = grid
        .iter()
        .zip(runs.chunks(seeds.len()))
        .map(|(&x, runs)| SweepPoint {
            x,
            mean_accuracy: runs.iter().map(|r| r.accuracy).sum::<f64>() / runs.len() as f64,
            runs: runs.to_vec(),
        })
        .collect();
    Sweep {
        axis,
        config_hash: cfg.hash_hex(),
        seeds: seeds.to_vec(),
        points,
    }
}

/// Accuracy against comms rounds per step, everything else fixed.
pub fn sweep_decision_time(
    cfg: &WorldConfig,
    scenario: &ScenarioSpec,
    rounds: &[u64],
    seeds: &[u64],
    steps: u64,
) -> Result<Sweep> {
    check_grid("rounds", rounds, seeds)?;
    if rounds[0] == 0 || rounds[rounds.len() - 1] > u32::MAX as u64 {
        return Err(Error::InvalidArgument("rounds must be in 1..=u32::MAX".into()));
    }
    let jobs: Vec<(u64, u64)> = rounds
        .iter()
        .flat_map(|&r| seeds.iter().map(move |&s| (r, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(r, seed)| {
            let run_cfg = WorldConfig {
                decision_rounds: r as u32,
                rng_seed: seed,
                ..cfg.clone()
            };
            run_scenario(&run_cfg, scenario, steps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble("rounds", cfg, rounds, seeds, runs))
}

/// Accuracy against fleet size; each (count, seed) gets a generated scenario.
pub fn sweep_car_count(
    cfg: &WorldConfig,
    counts: &[u64],
    seeds: &[u64],
    steps: u64,
    with_lights: bool,
) -> Result<Sweep> {
    check_grid("counts", counts, seeds)?;
    let jobs: Vec<(u64, u64)> = counts
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let run_cfg = WorldConfig {
                rng_seed: seed,
                ..cfg.clone()
            };
            let scenario = scenario::generate(&run_cfg, n as usize, seed, with_lights)?;
            run_scenario(&run_cfg, &scenario, steps)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble("car_count", cfg, counts, seeds, runs))
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. NaN when either
/// side has no variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn seeds_field(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

pub const REPORT_HEADER: &str =
    "run_id,seed,car_count,decision_rounds,steps,epochs,agreements,accuracy,decisions,collisions,near_misses";

pub fn report_csv(cfg: &WorldConfig, reports: &[MetricsReport]) -> String {
    let seeds: Vec<u64> = reports.iter().map(|r| r.seed).collect();
    let mut out = format!("# icsim run config_hash={} seeds={}\n{REPORT_HEADER}\n", cfg.hash_hex(), seeds_field(&seeds));
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6},{},{},{}",
            r.run_id,
            r.seed,
            r.car_count,
            r.decision_rounds,
            r.steps,
            r.epochs,
            r.agreements,
            r.accuracy,
            r.decisions,
            r.collisions,
            r.near_misses
        );
    }
    out
}

/// Per-seed rows followed by one `mean` row per grid point.
pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut out = format!(
        "# icsim sweep axis={} config_hash={} seeds={} paired=true\n",
        sweep.axis,
        sweep.config_hash,
        seeds_field(&sweep.seeds)
    );
    let _ = writeln!(
        out,
        "kind,{},seed,accuracy,epochs,decisions,collisions,near_misses",
        sweep.axis
    );
    for p in &sweep.points {
        for r in &p.runs {
            let _ = writeln!(
                out,
                "seed,{},{},{:.6},{},{},{},{}",
                p.x, r.seed, r.accuracy, r.epochs, r.decisions, r.collisions, r.near_misses
            );
        }
    }
    for p in &sweep.points {
        let sum = |f: fn(&MetricsReport) -> u64| p.runs.iter().map(f).sum::<u64>();
        let _ = writeln!(
            out,
            "mean,{},all,{:.6},{},{},{},{}",
            p.x,
            p.mean_accuracy,
            sum(|r| r.epochs),
            sum(|r| r.decisions),
            sum(|r| r.collisions),
            sum(|r| r.near_misses)
        );
    }
    out
}

pub fn timeline_csv(cfg: &WorldConfig, timeline: &Timeline) -> String {
    let mut out = format!(
        "# icsim timeline config_hash={} seeds={} interval={} total_decisions={}\ninterval,start_time,decision_count\n",
        cfg.hash_hex(),
        timeline.report.seed,
        timeline.interval,
        timeline.report.decisions
    );
    for &(b, n) in &timeline.buckets {
        let _ = writeln!(out, "{},{},{}", b, b as f64 * timeline.interval, n);
    }
    out
}
