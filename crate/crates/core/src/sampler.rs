//! Monte Carlo simulation of the Boolean model on a periodic square
//! window: Poisson grain counts, power-cosine orientation sampling, and
//! batched replication with per-replicate random substreams.
//!
//! Reproducibility contract: a batch is a pure function of (parameters,
//! window side, replicate count, seed, tensor rank bound). Replicate k
//! always draws from its own stream derived from (seed, k), so results do
//! not depend on thread count or scheduling, and individual replicates
//! can be re-simulated in isolation.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{ModelParams, Orientation};
use crate::geom2d::{union_on_torus, GeomError, TorusWindow, Vec2};
use crate::minkowski::measure;
use crate::tensor::SymTensor2;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("invalid distribution parameter: {0}")]
    Distribution(String),
}

/// SplitMix64 step, used only to expand a (seed, replicate) pair into a
/// 256-bit stream key.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-replicate generator: the replicate index is folded
/// into the seed and expanded through SplitMix64 into a ChaCha key.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut state = seed ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Draws one rotation angle from the power-cosine density
/// c(a) |cos t|^a by the Beta(1/2, (a+1)/2) transform: with
/// B from that Beta law, arcsin(sqrt(B)) has the quarter-turn restriction
/// of the density, and a uniform fourfold reflection recovers the full
/// turn. The aligned case returns zero.
pub fn sample_orientation<R: Rng + ?Sized>(
    alpha: Orientation,
    rng: &mut R,
) -> Result<f64, SimulationError> {
    let a = match alpha {
        Orientation::Aligned => return Ok(0.0),
        Orientation::Finite(a) => a,
    };
    let beta = Beta::new(0.5, (a + 1.0) / 2.0)
        .map_err(|e| SimulationError::Distribution(format!("Beta(1/2, {}): {e}", (a + 1.0) / 2.0)))?;
    let b: f64 = beta.sample(rng);
    let base = b.sqrt().min(1.0).asin();
    Ok(match rng.gen_range(0u8..4) {
        0 => base,
        1 => PI - base,
        2 => PI + base,
        _ => TAU - base,
    })
}

/// Scalar and tensor summaries of one simulated realization, all already
/// normalized by the window area.
#[derive(Debug, Clone)]
pub struct RealizationSummary {
    pub rep: usize,
    pub grain_count: usize,
    pub volume_fraction: f64,
    pub v1_density: f64,
    pub euler_density: f64,
    /// Surface tensor densities of rank s = 0..=s_max, index = s.
    pub surface_tensor_densities: Vec<SymTensor2>,
}

/// Batch description: model parameters, periodic window side, replicate
/// count, base seed, and the largest tensor rank measured per replicate.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub params: ModelParams,
    pub window_side: f64,
    pub reps: usize,
    pub seed: u64,
    pub s_max: usize,
}

/// All finished replicates of a batch (in replicate order) together with
/// the failures, recorded as (replicate index, message).
#[derive(Debug)]
pub struct BatchResult {
    pub summaries: Vec<RealizationSummary>,
    pub failures: Vec<(usize, String)>,
}

/// Samples one realization of the union set on the periodic window: a
/// Poisson number of grains, each an independently rotated copy of the
/// discretized base grain at a uniform center, fused by the periodic
/// union. The returned region carries its traversable boundary for any
/// downstream measurement.
pub fn sample_region<R: Rng + ?Sized>(
    params: &ModelParams,
    window: TorusWindow,
    rng: &mut R,
) -> Result<crate::geom2d::PolyconvexRegion, SimulationError> {
    let poly = params.grain.discretize()?;
    window.admits(poly.circumradius())?;
    let lambda = params.gamma * window.area();
    let poisson = Poisson::new(lambda)
        .map_err(|e| SimulationError::Distribution(format!("Poisson({lambda}): {e}")))?;
    let count = poisson.sample(rng) as usize;
    let mut grains = Vec::with_capacity(count);
    for _ in 0..count {
        let theta = sample_orientation(params.alpha, rng)?;
        let cx = rng.gen::<f64>() * window.side;
        let cy = rng.gen::<f64>() * window.side;
        grains.push(poly.rotated(theta).translated(Vec2::new(cx, cy)));
    }
    Ok(union_on_torus(grains, window)?)
}

/// Samples one realization and measures its density summaries.
pub fn sample_realization<R: Rng + ?Sized>(
    params: &ModelParams,
    window: TorusWindow,
    s_max: usize,
    rng: &mut R,
) -> Result<RealizationSummary, SimulationError> {
    let region = sample_region(params, window, rng)?;
    let f = measure(&region, s_max);
    Ok(RealizationSummary {
        rep: 0,
        grain_count: region.grains().len(),
        volume_fraction: f.volume_fraction(),
        v1_density: f.v1_density(),
        euler_density: f.euler_density(),
        surface_tensor_densities: (0..=s_max).map(|s| f.surface_tensor_density(s)).collect(),
    })
}

/// Runs the batch, one independent substream per replicate, in parallel.
/// Successful replicates come back in replicate order; failed replicates
/// are collected separately instead of aborting the batch.
pub fn simulate_batch(config: &SimulationConfig) -> Result<BatchResult, SimulationError> {
    let window = TorusWindow::new(config.window_side)?;
    let outcomes: Vec<(usize, Result<RealizationSummary, SimulationError>)> = (0..config.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(config.seed, rep as u64);
            let r = sample_realization(&config.params, window, config.s_max, &mut rng)
                .map(|mut s| {
                    s.rep = rep;
                    s
                });
            (rep, r)
        })
        .collect();
    let mut summaries = Vec::with_capacity(config.reps);
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes {
        match outcome {
            Ok(s) => summaries.push(s),
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    Ok(BatchResult { summaries, failures })
}
