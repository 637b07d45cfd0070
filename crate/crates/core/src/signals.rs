//! Traffic-light phase cycling and the synthetic camera.

use rand_distr::{Distribution, StandardNormal};

use crate::config::LightDurations;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Green,
    Yellow,
    Red,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Red, Phase::Yellow, Phase::Green];

    /// Green → Yellow → Red → Green.
    pub fn next(self) -> Phase {
        match self {
            Phase::Green => Phase::Yellow,
            Phase::Yellow => Phase::Red,
            Phase::Red => Phase::Green,
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "green" | "g" => Ok(Phase::Green),
            "yellow" | "y" => Ok(Phase::Yellow),
            "red" | "r" => Ok(Phase::Red),
            _ => Err(format!("unknown light phase {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficLight {
    pub light_id: u64,
    pub lane: usize,
    pub position: f64,
    pub phase: Phase,
    /// Seconds left in the current phase, always in `(0, duration(phase)]`.
    pub remaining: f64,
}

impl TrafficLight {
    pub fn new(light_id: u64, lane: usize, position: f64, phase: Phase, durations: &LightDurations) -> Self {
        Self {
            light_id,
            lane,
            position,
            phase,
            remaining: durations.of(phase),
        }
    }
}

/// Advances a light by `dt`, rolling over as many phase boundaries as the
/// step covers. Overshoot carries into the next phase.
pub fn light_step(light: &TrafficLight, dt: f64, durations: &LightDurations) -> TrafficLight {
    debug_assert!(dt > 0.0);
    let mut next = *light;
    next.remaining -= dt;
    while next.remaining <= 0.0 {
        next.phase = next.phase.next();
        next.remaining += durations.of(next.phase);
    }
    next
}

pub const PATCH_WIDTH: usize = 24;
pub const PATCH_HEIGHT: usize = 72;
pub const LIT: u8 = 230;
pub const DARK: u8 = 20;

/// Pre-cropped view of a three-lamp signal head: red on top, yellow in the
/// middle, green at the bottom, each a third of the height.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePatch {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB.
    pub pixels: Vec<[u8; 3]>,
}

/// Lamp regions, top to bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Top,
    Middle,
    Bottom,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Top, Region::Middle, Region::Bottom];

    pub fn lamp(self) -> Phase {
        match self {
            Region::Top => Phase::Red,
            Region::Middle => Phase::Yellow,
            Region::Bottom => Phase::Green,
        }
    }

    pub fn of_lamp(phase: Phase) -> Region {
        match phase {
            Phase::Red => Region::Top,
            Phase::Yellow => Region::Middle,
            Phase::Green => Region::Bottom,
        }
    }
}

fn lit_color(phase: Phase) -> [u8; 3] {
    match phase {
        Phase::Red => [LIT, DARK, DARK],
        Phase::Yellow => [LIT, LIT, DARK],
        Phase::Green => [DARK, LIT, DARK],
    }
}

impl ImagePatch {
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        if width == 0 || height == 0 || !height.is_multiple_of(3) {
            return Err(Error::InvalidArgument(format!(
                "patch must be non-empty with height divisible by 3, got {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels: vec![rgb; width * height],
        })
    }

    pub fn region_height(&self) -> usize {
        self.height / 3
    }

    pub fn region_of_row(&self, row: usize) -> Region {
        Region::ALL[row / self.region_height()]
    }

    /// Pixels of one lamp region, row-major.
    pub fn region(&self, region: Region) -> &[[u8; 3]] {
        let idx = Region::ALL.iter().position(|r| *r == region).unwrap();
        let rows = self.region_height();
        let start = idx * rows * self.width;
        &self.pixels[start..start + rows * self.width]
    }

    pub fn region_mut(&mut self, region: Region) -> &mut [[u8; 3]] {
        let idx = Region::ALL.iter().position(|r| *r == region).unwrap();
        let rows = self.region_height();
        let start = idx * rows * self.width;
        &mut self.pixels[start..start + rows * self.width]
    }

    /// Binary PPM (`P6`): ASCII width, height and max value 255, then raw RGB.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for px in &self.pixels {
            out.extend_from_slice(px);
        }
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("ppm: {msg}"));
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header not ascii"))?);
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        if fields[0] != "P6" {
            return Err(bad("missing P6 magic"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("non-integer header field"));
        let (width, height, max) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if max != 255 {
            return Err(bad("max value must be 255"));
        }
        let raster = bytes.get(pos..).ok_or_else(|| bad("missing raster"))?;
        if raster.len() != width * height * 3 {
            return Err(bad("raster size does not match header"));
        }
        let pixels = raster.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        if width == 0 || height == 0 || height % 3 != 0 {
            return Err(bad("height must be a non-zero multiple of 3"));
        }
        Ok(Self { width, height, pixels })
    }
}

/// Renders what the camera sees of `light`: the active lamp lit, the others
/// dark, plus per-channel Gaussian noise of std `sigma * 255`.
pub fn render_patch(light: &TrafficLight, sigma: f64, noise_key: u64) -> ImagePatch {
    let mut patch = ImagePatch::filled(PATCH_WIDTH, PATCH_HEIGHT, [DARK; 3]).expect("default patch dims");
    patch
        .region_mut(Region::of_lamp(light.phase))
        .fill(lit_color(light.phase));
    if sigma > 0.0 {
        let std = sigma * 255.0;
        let mut rng = rng::substream(noise_key, &[]);
        for px in &mut patch.pixels {
            for ch in px.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *ch = (*ch as f64 + z * std).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    patch
}
