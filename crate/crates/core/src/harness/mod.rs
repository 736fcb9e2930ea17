//! Synthetic soundings: test profiles, discretization, noise and the
//! experiment drivers built on them.

mod experiments;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{InstrumentSetup, LayeredEarthModel, SoundingData, SoundingKernel};

pub use crate::solver::relative_error;
pub use experiments::{
    cell_truth, fig2_singular_values, run_cells, run_table, Cell, CellSummary, Overrides, Preset, RealizationRecord,
    Report, SpectrumSummary, DEFAULT_BROYDEN_REFRESH, DEFAULT_NOISE_LEVEL, DEFAULT_REALIZATIONS, DEFAULT_SEED,
    FIG2_HEIGHTS, FIG2_LAYERS, FIG2_SAMPLES, FIG2_SIGMA_MAX, FIG56_HEIGHTS, FIG56_LAYERS,
};

/// Depth covered by the test profiles and their discretization, m.
pub const PROFILE_DEPTH: f64 = 2.0;

/// Largest height used by the table presets, m.
pub const PRESET_MAX_HEIGHT: f64 = 1.9;

/// Smallest height step considered reliable, m.
pub const MIN_HEIGHT_STEP: f64 = 0.1;

/// Slack on the closed support of the step profile, so that grid points
/// computed as `(j−1)·d̄` land inside when they should.
const STEP_EDGE_TOLERANCE: f64 = 1e-12;

/// Nodes of the piecewise-linear profile, `(z, σ)`.
const F2_NODES: [(f64, f64); 5] = [(0.0, 0.0), (0.5, 1.0), (1.0, 1.0), (1.5, 0.0), (2.0, 0.0)];

/// Center of the step profile, m.
const F3_CENTER: f64 = 1.0;

/// Conductivity profiles `σ(z)`, S/m, on `[0, 2]` m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TestProfile {
    /// `e^{−(z−1)²}`.
    F1,
    /// Trapezoid rising on `[0, 0.5]`, flat to 1, falling on `[1, 1.5]`.
    F2,
    /// Unit step of width `xi` m centered at 1 m.
    F3 { xi: f64 },
}

impl TestProfile {
    pub const DEFAULT_XI: f64 = 1.0;

    pub fn f3(xi: f64) -> Result<Self> {
        if !(xi.is_finite() && xi > 0.0) {
            return Err(Error::InvalidInput(format!("step width must be positive, got {xi}")));
        }
        Ok(TestProfile::F3 { xi })
    }

    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            TestProfile::F1 => (-(z - 1.0).powi(2)).exp(),
            TestProfile::F2 => piecewise_linear(&F2_NODES, z),
            TestProfile::F3 { xi } => {
                if (z - F3_CENTER).abs() <= xi / 2.0 + STEP_EDGE_TOLERANCE {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Name in the form accepted by `FromStr`.
    pub fn label(&self) -> String {
        match self {
            TestProfile::F1 => "f1".into(),
            TestProfile::F2 => "f2".into(),
            TestProfile::F3 { xi } => format!("f3:{xi}"),
        }
    }
}

impl fmt::Display for TestProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for TestProfile {
    type Err = Error;

    /// `f1`, `f2`, `f3` or `f3:<xi>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "f1" => Ok(TestProfile::F1),
            "f2" => Ok(TestProfile::F2),
            "f3" => TestProfile::f3(TestProfile::DEFAULT_XI),
            _ => match s.strip_prefix("f3:") {
                Some(xi) => {
                    let xi: f64 = xi.parse().map_err(|_| Error::Parse(format!("bad step width in {s:?}")))?;
                    TestProfile::f3(xi)
                }
                None => Err(Error::Parse(format!("unknown profile {s:?}; expected f1, f2, f3 or f3:<xi>"))),
            },
        }
    }
}

fn piecewise_linear(nodes: &[(f64, f64)], z: f64) -> f64 {
    let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
    if z <= first.0 {
        return first.1;
    }
    if z >= last.0 {
        return last.1;
    }
    let k = nodes.partition_point(|&(x, _)| x <= z);
    let ((x0, y0), (x1, y1)) = (nodes[k - 1], nodes[k]);
    y0 + (y1 - y0) * (z - x0) / (x1 - x0)
}

/// `z_j = (j−1)·d̄` with `d̄ = 2/(n−1)`, `j = 1..n`.
pub fn layer_depths(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least two layers, got {n}")));
    }
    let d = PROFILE_DEPTH / (n - 1) as f64;
    Ok((0..n).map(|j| j as f64 * d).collect())
}

/// Samples `profile` at the tops of `n` equispaced layers over 2 m.
pub fn discretize(profile: &TestProfile, n: usize) -> Result<LayeredEarthModel> {
    let sigma = layer_depths(n)?.into_iter().map(|z| profile.eval(z)).collect();
    LayeredEarthModel::equispaced(sigma, PROFILE_DEPTH)
}

/// `h_i = (i−1)·h̄`, `i = 1..m`.
pub fn make_heights(m: usize, step: f64) -> Result<Vec<f64>> {
    if m < 1 {
        return Err(Error::InvalidInput("need at least one height".into()));
    }
    if !(step.is_finite() && step >= 0.0) {
        return Err(Error::InvalidInput(format!("height step must be ≥ 0, got {step}")));
    }
    // the tolerance keeps 1.9/19 from tripping the warning through rounding
    if m > 1 && step < MIN_HEIGHT_STEP * (1.0 - 1e-12) {
        log::warn!("height step {step} m is below {MIN_HEIGHT_STEP} m");
    }
    Ok((0..m).map(|i| i as f64 * step).collect())
}

/// `m` equispaced heights from 0 to 1.9 m.
pub fn preset_heights(m: usize) -> Result<Vec<f64>> {
    let step = if m > 1 { PRESET_MAX_HEIGHT / (m - 1) as f64 } else { 0.0 };
    make_heights(m, step)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Relative noise level `τ`. Distinct from the stopping tolerance.
    pub level: f64,
    pub seed: u64,
    pub realizations: usize,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.level.is_finite() && self.level >= 0.0) {
            return Err(Error::InvalidInput(format!("noise level must be ≥ 0, got {}", self.level)));
        }
        if self.realizations < 1 {
            return Err(Error::InvalidInput("need at least one realization".into()));
        }
        Ok(())
    }
}

/// One synthetic sounding with its noise-free counterpart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synthetic {
    pub model: LayeredEarthModel,
    pub exact: Vec<f64>,
    /// Noisy data; `noise_estimate` holds `τ‖b̂‖`.
    pub data: SoundingData,
    /// Realized `‖b − b̂‖`.
    pub noise_norm: f64,
}

/// `b = b̂ + w‖b̂‖τ/√len(b)` with `w` standard normal, drawn from `seed`.
pub fn add_noise(exact: &[f64], level: f64, seed: u64) -> Vec<f64> {
    let norm = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = norm * level / (exact.len().max(1) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    exact
        .iter()
        .map(|&v| {
            let w: f64 = rng.sample(StandardNormal);
            v + scale * w
        })
        .collect()
}

/// Discretizes `profile`, evaluates the exact data and perturbs them.
pub fn synthesize(profile: &TestProfile, n: usize, setup: &InstrumentSetup, level: f64, seed: u64) -> Result<Synthetic> {
    synthesize_with(&SoundingKernel::new(setup)?, profile, n, level, seed)
}

pub(crate) fn synthesize_with(
    kernel: &SoundingKernel,
    profile: &TestProfile,
    n: usize,
    level: f64,
    seed: u64,
) -> Result<Synthetic> {
    if !(level.is_finite() && level >= 0.0) {
        return Err(Error::InvalidInput(format!("noise level must be ≥ 0, got {level}")));
    }
    let model = discretize(profile, n)?;
    let exact = kernel.predict(&model)?;
    let b = if level == 0.0 { exact.clone() } else { add_noise(&exact, level, seed) };
    let exact_norm = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    let noise_norm = b.iter().zip(&exact).map(|(a, e)| (a - e) * (a - e)).sum::<f64>().sqrt();
    Ok(Synthetic {
        model,
        exact,
        data: SoundingData { b, noise_estimate: Some(level * exact_norm) },
        noise_norm,
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of one noise draw, mixed from the master seed, a key identifying the
/// data-generating setup and the realization index.
pub fn job_seed(master: u64, key: u64, realization: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ key) ^ realization)
}

/// Stable 64-bit FNV-1a hash of `text`.
pub(crate) fn stable_hash(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}
