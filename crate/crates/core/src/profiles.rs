//! Named field recipes and the seeded smooth-field generator.
//!
//! Profiles give the CLI, the browser demo, and the verify suite one
//! vocabulary for initial fields. The random recipes draw a handful of
//! low-frequency sine modes and shift them positive, so the same sample is
//! admissible for every built-in constraint.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// A field recipe that can be realized on any grid.
///
/// Textual form (as accepted by [`Profile::parse`]):
/// `constant:C`, `affine:A,B` (`A*x + B`), `sine:A,K,B`
/// (`A*sin(2*pi*K*x/length) + B`), `random` (seeded smooth positive field).
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    Constant(f64),
    Affine { a: f64, b: f64 },
    Sine { amp: f64, freq: u32, offset: f64 },
    Random,
}

impl Profile {
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BadProfile {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (kind, rest) = match spec.split_once(':') {
            Some((k, r)) => (k, r),
            None => (spec, ""),
        };
        let nums: Vec<f64> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("expected comma-separated numbers after `:`"))?
        };
        match (kind, nums.as_slice()) {
            ("constant", [c]) => Ok(Profile::Constant(*c)),
            ("affine", [a, b]) => Ok(Profile::Affine { a: *a, b: *b }),
            ("sine", [amp, freq, offset]) => {
                if *freq < 1.0 || freq.fract() != 0.0 {
                    return Err(bad("sine frequency must be a positive integer"));
                }
                Ok(Profile::Sine {
                    amp: *amp,
                    freq: *freq as u32,
                    offset: *offset,
                })
            }
            ("random", []) => Ok(Profile::Random),
            ("constant", _) => Err(bad("constant takes one parameter: constant:C")),
            ("affine", _) => Err(bad("affine takes two parameters: affine:A,B")),
            ("sine", _) => Err(bad("sine takes three parameters: sine:A,K,B")),
            ("random", _) => Err(bad("random takes no parameters")),
            _ => Err(bad("known profiles: constant, affine, sine, random")),
        }
    }

    /// Pointwise value of an analytic recipe; `None` for [`Profile::Random`],
    /// which is only defined through grid sampling. `length` sets the sine
    /// period, matching [`Profile::realize`] on a grid of that length.
    pub fn eval_at(&self, x: f64, length: f64) -> Option<f64> {
        match *self {
            Profile::Constant(c) => Some(c),
            Profile::Affine { a, b } => Some(a * x + b),
            Profile::Sine { amp, freq, offset } => {
                Some(amp * (2.0 * PI * freq as f64 / length * x).sin() + offset)
            }
            Profile::Random => None,
        }
    }

    /// Samples the recipe on a grid. `seed` is only consulted by
    /// [`Profile::Random`].
    pub fn realize(&self, grid: &Grid, seed: u64) -> Result<Field> {
        match *self {
            Profile::Constant(c) => Field::constant(grid, c),
            Profile::Affine { a, b } => Field::from_fn(grid, |x| a * x + b),
            Profile::Sine { amp, freq, offset } => {
                let w = 2.0 * PI * freq as f64 / grid.length();
                Field::from_fn(grid, |x| amp * (w * x).sin() + offset)
            }
            Profile::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                smooth_positive(grid, &mut rng)
            }
        }
    }
}

impl std::fmt::Display for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "constant:{c}"),
            Profile::Affine { a, b } => write!(f, "affine:{a},{b}"),
            Profile::Sine { amp, freq, offset } => write!(f, "sine:{amp},{freq},{offset}"),
            Profile::Random => write!(f, "random"),
        }
    }
}

/// Smooth strictly positive sample: up to three sine modes plus a constant
/// exceeding the sum of their amplitudes by at least 0.5.
pub fn smooth_positive(grid: &Grid, rng: &mut impl Rng) -> Result<Field> {
    let modes = sample_modes(rng);
    let amp_sum: f64 = modes.iter().map(|(a, _, _)| a.abs()).sum();
    let offset = amp_sum + rng.random_range(0.5..1.5);
    realize_modes(grid, &modes, offset)
}

/// Smooth signed sample with a modest constant component; used as a change
/// direction, not as a field the constraints evaluate.
pub fn smooth_direction(grid: &Grid, rng: &mut impl Rng) -> Result<Field> {
    let modes = sample_modes(rng);
    let offset = rng.random_range(-0.5..0.5);
    realize_modes(grid, &modes, offset)
}

fn sample_modes(rng: &mut impl Rng) -> Vec<(f64, u32, f64)> {
    let count = rng.random_range(1..=3);
    (0..count)
        .map(|i| {
            let amp = rng.random_range(0.1..0.5);
            let freq = i as u32 + 1;
            let phase = rng.random_range(0.0..2.0 * PI);
            (amp, freq, phase)
        })
        .collect()
}

fn realize_modes(grid: &Grid, modes: &[(f64, u32, f64)], offset: f64) -> Result<Field> {
    let length = grid.length();
    Field::from_fn(grid, |x| {
        offset
            + modes
                .iter()
                .map(|(a, k, p)| a * (2.0 * PI * *k as f64 * x / length + p).sin())
                .sum::<f64>()
    })
}
