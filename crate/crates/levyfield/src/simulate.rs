//! Grid simulation of kernel-integral fields.
//!
//! Each grid cell receives an independent increment of the random measure:
//! drift, a Gaussian term, compound-Poisson jumps of absolute size above a
//! cutoff epsilon compensated over epsilon < |r| <= 1 (the same truncation
//! window as the cumulant), and optionally a Gaussian substitute for the
//! removed small jumps with variance int_{|r| <= eps} r^2 F(dr, cell).
//! Field values are the kernel-weighted sums of cell increments with the
//! kernel frozen at cell centers.
//!
//! Randomness contract: draws come from ChaCha8 keyed by the configured
//! seed. Replicate k uses stream k; within a replicate, cell j starts at
//! word position j * 2^36, so replicates and cells never overlap no matter
//! how many draws a cell consumes (a cell is budgeted well below 2^36
//! words). Scheduling replicates across threads cannot change any output.
//! Draw order inside a cell: Gaussian term, then per jump component in
//! ascending order its Poisson count followed by that many jump sizes,
//! then the small-jump substitute. Terms with zero rate or zero variance
//! consume no draws.

use std::hash::{Hash, Hasher};
use std::io;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{
    lk_term, BasisError, CharacteristicTriplet, JumpDensity, JumpRegion, LevyMeasure1D, Window,
};
use crate::kernels::{integrability_check, Kernel, KernelError, NotIntegrableReason};
use crate::quad::QuadConfig;

/// Hard cap on grid size, matching the 2^36-word cell blocks inside the
/// 2^68-word ChaCha counter space.
pub const MAX_CELLS: usize = 1 << 20;

/// Minimum tail probability of a compound density before rejection
/// sampling against the cutoff is declared hopeless.
const MIN_TAIL_PROB: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("epsilon must lie in (0, 1], got {0}")]
    BadEpsilon(f64),
    #[error("replicates must be at least 1")]
    ZeroReplicates,
    #[error("grid: {0}")]
    BadGrid(String),
    #[error("grid has {cells} cells, the maximum is {max}")]
    TooManyCells { cells: usize, max: usize },
    #[error(
        "jump component {component}: cutoff epsilon leaves tail probability {tail_prob:.3e}, \
         too small to sample by rejection"
    )]
    CutoffTooSmall { component: usize, tail_prob: f64 },
    #[error("field is not integrable against the measure: {detail}")]
    NotIntegrable { detail: String },
    #[error("jump component {component}: rejection sampler failed to accept")]
    RejectionStalled { component: usize },
    #[error("quadrature did not converge: value {value}, error estimate {error:.3e}")]
    QuadratureDiverged { value: Complex64, error: f64 },
}

/// What to do with jumps of absolute size at most epsilon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallJumpMode {
    /// Remove them entirely.
    Drop,
    /// Replace them by a centered Gaussian with the matching variance.
    GaussianSubstitute,
}

/// Uniform partition of the window into axis-aligned cells, ordered
/// lexicographically with the last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDiscretization {
    window: Window,
    cells_per_dim: Vec<usize>,
}

impl GridDiscretization {
    pub fn new(window: Window, cells_per_dim: Vec<usize>) -> Result<Self, SimulateError> {
        if cells_per_dim.len() != window.dim() {
            return Err(SimulateError::BadGrid(format!(
                "cells_per_dim has {} entries, window dimension is {}",
                cells_per_dim.len(),
                window.dim()
            )));
        }
        if cells_per_dim.contains(&0) {
            return Err(SimulateError::BadGrid("cells_per_dim entries must be positive".into()));
        }
        let cells: usize = cells_per_dim.iter().product();
        if cells > MAX_CELLS {
            return Err(SimulateError::TooManyCells { cells, max: MAX_CELLS });
        }
        Ok(GridDiscretization { window, cells_per_dim })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn cells_per_dim(&self) -> &[usize] {
        &self.cells_per_dim
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_dim.iter().product()
    }

    /// Axis boundaries; the final boundary is the window edge exactly, so
    /// cells always pass the containment check.
    fn boundaries(&self, axis: usize) -> Vec<f64> {
        let lo = self.window.lower()[axis];
        let hi = self.window.upper()[axis];
        let n = self.cells_per_dim[axis];
        (0..=n)
            .map(|i| if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 })
            .collect()
    }

    pub fn cells(&self) -> Result<Vec<Window>, SimulateError> {
        let d = self.window.dim();
        let bounds: Vec<Vec<f64>> = (0..d).map(|k| self.boundaries(k)).collect();
        let mut out = Vec::with_capacity(self.cell_count());
        let mut idx = vec![0usize; d];
        loop {
            let lower: Vec<f64> = (0..d).map(|k| bounds[k][idx[k]]).collect();
            let upper: Vec<f64> = (0..d).map(|k| bounds[k][idx[k] + 1]).collect();
            out.push(
                Window::new(lower, upper)
                    .map_err(|e| SimulateError::BadGrid(format!("degenerate cell: {e}")))?,
            );
            let mut k = d;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.cells_per_dim[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// Simulation parameters; `cells_per_dim` is applied to the triplet's
/// window when a run starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub epsilon: f64,
    pub small_jump_mode: SmallJumpMode,
    pub replicates: u64,
    pub seed: u64,
    pub cells_per_dim: Vec<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            epsilon: 1e-3,
            small_jump_mode: SmallJumpMode::GaussianSubstitute,
            replicates: 1000,
            seed: 1,
            cells_per_dim: vec![8],
        }
    }
}

impl SimulationConfig {
    fn validate(&self) -> Result<(), SimulateError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(SimulateError::BadEpsilon(self.epsilon));
        }
        if self.replicates == 0 {
            return Err(SimulateError::ZeroReplicates);
        }
        Ok(())
    }
}

/// One simulated replicate of the field at every requested point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub replicate_index: u64,
    /// Hash of the generating configuration; equal fingerprints mean
    /// comparable samples.
    pub fingerprint: u64,
}

// ---------------------------------------------------------------------------
// substream derivation

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 keyed by a splitmix expansion of the seed, on stream
/// `replicate`. Distinct replicates get distinct streams by construction.
fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate);
    rng
}

/// Words reserved per cell inside a replicate stream.
const CELL_WORD_BLOCK: u128 = 1 << 36;

// ---------------------------------------------------------------------------
// jump-size samplers

/// Draws from the normalized restriction of a jump measure to |r| > eps.
/// Exact samplers: discrete atoms by cumulative rates, the gamma-type tail
/// by composition-rejection under a two-piece envelope, compound densities
/// by rejection against the cutoff.
enum TailSampler {
    Discrete {
        sizes: Vec<f64>,
        cumulative: Vec<f64>,
        total: f64,
    },
    GammaTail {
        beta: f64,
        eps: f64,
        /// Envelope split point max(eps, 1/beta).
        split: f64,
        /// Envelope mass e^{-beta eps} ln(split/eps) of the 1/r piece.
        log_mass: f64,
        /// Envelope mass e^{-beta split}/(beta split) of the exponential piece.
        exp_mass: f64,
        component: usize,
    },
    Compound {
        base: BaseDraw,
        eps: f64,
        component: usize,
    },
}

enum BaseDraw {
    Uniform(rand_distr::Uniform<f64>),
    Normal(rand_distr::Normal<f64>),
    Exp(rand_distr::Exp<f64>),
}

impl BaseDraw {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            BaseDraw::Uniform(d) => d.sample(rng),
            BaseDraw::Normal(d) => d.sample(rng),
            BaseDraw::Exp(d) => d.sample(rng),
        }
    }
}

impl TailSampler {
    fn build(
        nu: &LevyMeasure1D,
        eps: f64,
        tail_mass: f64,
        component: usize,
    ) -> Result<Option<Self>, SimulateError> {
        if tail_mass <= 0.0 {
            return Ok(None);
        }
        match nu {
            LevyMeasure1D::DiscreteJumps { jumps } => {
                let mut sizes = Vec::new();
                let mut cumulative = Vec::new();
                let mut running = 0.0;
                for j in jumps {
                    if j.size.abs() > eps {
                        running += j.rate;
                        sizes.push(j.size);
                        cumulative.push(running);
                    }
                }
                Ok(Some(TailSampler::Discrete { sizes, cumulative, total: running }))
            }
            LevyMeasure1D::GammaType { beta, .. } => {
                let split = eps.max(1.0 / beta);
                let log_mass = (-beta * eps).exp() * (split / eps).ln();
                let exp_mass = (-beta * split).exp() / (beta * split);
                Ok(Some(TailSampler::GammaTail {
                    beta: *beta,
                    eps,
                    split,
                    log_mass,
                    exp_mass,
                    component,
                }))
            }
            LevyMeasure1D::CompoundDensity { rate, density } => {
                let tail_prob = tail_mass / rate;
                if tail_prob < MIN_TAIL_PROB {
                    return Err(SimulateError::CutoffTooSmall { component, tail_prob });
                }
                let base = match density {
                    JumpDensity::Uniform { lo, hi } => {
                        BaseDraw::Uniform(rand_distr::Uniform::new(*lo, *hi))
                    }
                    JumpDensity::Normal { mean, sd } => BaseDraw::Normal(
                        rand_distr::Normal::new(*mean, *sd).expect("validated parameters"),
                    ),
                    JumpDensity::Exponential { rate } => {
                        BaseDraw::Exp(rand_distr::Exp::new(*rate).expect("validated parameters"))
                    }
                };
                Ok(Some(TailSampler::Compound { base, eps, component }))
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<f64, SimulateError> {
        match self {
            TailSampler::Discrete { sizes, cumulative, total } => {
                let u: f64 = rng.gen::<f64>() * total;
                let k = cumulative.partition_point(|c| *c < u).min(sizes.len() - 1);
                Ok(sizes[k])
            }
            TailSampler::GammaTail { beta, eps, split, log_mass, exp_mass, component } => {
                // target density proportional to e^{-beta r}/r on (eps, inf);
                // envelope: e^{-beta eps}/r on (eps, split], e^{-beta r}/split
                // beyond. Acceptance stays of order one uniformly in eps.
                let p_log = log_mass / (log_mass + exp_mass);
                for _ in 0..100_000 {
                    if rng.gen::<f64>() < p_log {
                        let r = eps * (split / eps).powf(rng.gen::<f64>());
                        if rng.gen::<f64>() < (-beta * (r - eps)).exp() {
                            return Ok(r);
                        }
                    } else {
                        let e: f64 = Exp1.sample(rng);
                        let r = split + e / beta;
                        if rng.gen::<f64>() < split / r {
                            return Ok(r);
                        }
                    }
                }
                Err(SimulateError::RejectionStalled { component: *component })
            }
            TailSampler::Compound { base, eps, component } => {
                for _ in 0..10_000_000 {
                    let r = base.sample(rng);
                    if r.abs() > *eps {
                        return Ok(r);
                    }
                }
                Err(SimulateError::RejectionStalled { component: *component })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// per-cell plan

struct CellPlan {
    drift: f64,
    gauss_sd: f64,
    substitute_sd: f64,
    compensator: f64,
    /// (component index, Poisson law of the tail count), rate > 0 only.
    counts: Vec<(usize, Poisson<f64>)>,
}

struct SimPlan {
    cells: Vec<CellPlan>,
    samplers: Vec<Option<TailSampler>>,
    mode: SmallJumpMode,
}

/// Unit-intensity quantities of one jump measure at cutoff eps.
struct UnitQuantities {
    tail_mass: f64,
    compensator: f64,
    small_variance: f64,
}

fn unit_quantities(
    nu: &LevyMeasure1D,
    eps: f64,
    cfg: &QuadConfig,
) -> Result<UnitQuantities, SimulateError> {
    let real = |est: crate::quad::Estimate| -> Result<f64, SimulateError> {
        if !est.converged(cfg) {
            return Err(SimulateError::QuadratureDiverged { value: est.value, error: est.error });
        }
        Ok(est.value.re)
    };
    let tail_mass = real(nu.mass_where(JumpRegion::Tail(eps), cfg))?;
    let compensator = real(nu.integrate_where(
        |r| Complex64::new(r, 0.0),
        JumpRegion::Band { lo: eps, hi: crate::basis::TRUNCATION_RADIUS },
        cfg,
    ))?;
    let small_variance = real(nu.integrate_where(
        |r| Complex64::new(r * r, 0.0),
        JumpRegion::SmallJumps(eps),
        cfg,
    ))?;
    Ok(UnitQuantities { tail_mass, compensator, small_variance })
}

fn build_plan(
    triplet: &CharacteristicTriplet,
    cells: &[Window],
    epsilon: f64,
    mode: SmallJumpMode,
    cfg: &QuadConfig,
) -> Result<SimPlan, SimulateError> {
    let units: Vec<UnitQuantities> = triplet
        .jumps()
        .iter()
        .map(|comp| unit_quantities(&comp.levy, epsilon, cfg))
        .collect::<Result<_, _>>()?;
    let samplers: Vec<Option<TailSampler>> = triplet
        .jumps()
        .iter()
        .zip(&units)
        .enumerate()
        .map(|(i, (comp, unit))| TailSampler::build(&comp.levy, epsilon, unit.tail_mass, i))
        .collect::<Result<_, _>>()?;
    let mut plans = Vec::with_capacity(cells.len());
    for cell in cells {
        let drift = triplet.drift_of_set(cell)?;
        let gauss = triplet.gaussian_of_set(cell)?;
        let mut compensator = 0.0;
        let mut small_var = 0.0;
        let mut counts = Vec::new();
        for (i, (comp, unit)) in triplet.jumps().iter().zip(&units).enumerate() {
            let mass = comp.intensity.integral_over(cell);
            if mass <= 0.0 {
                continue;
            }
            compensator += mass * unit.compensator;
            small_var += mass * unit.small_variance;
            let rate = mass * unit.tail_mass;
            if rate > 0.0 {
                counts.push((i, Poisson::new(rate).expect("positive rate")));
            }
        }
        let substitute_sd = match mode {
            SmallJumpMode::GaussianSubstitute => small_var.max(0.0).sqrt(),
            SmallJumpMode::Drop => 0.0,
        };
        plans.push(CellPlan {
            drift,
            gauss_sd: gauss.max(0.0).sqrt(),
            substitute_sd,
            compensator,
            counts,
        });
    }
    Ok(SimPlan { cells: plans, samplers, mode })
}

fn draw_cell_increment(
    plan: &CellPlan,
    samplers: &[Option<TailSampler>],
    mode: SmallJumpMode,
    rng: &mut ChaCha8Rng,
) -> Result<f64, SimulateError> {
    let mut x = plan.drift - plan.compensator;
    if plan.gauss_sd > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        x += plan.gauss_sd * z;
    }
    for (component, poisson) in &plan.counts {
        let sampler = samplers[*component]
            .as_ref()
            .expect("a positive rate implies a sampler");
        let n = poisson.sample(rng) as u64;
        for _ in 0..n {
            x += sampler.draw(rng)?;
        }
    }
    if mode == SmallJumpMode::GaussianSubstitute && plan.substitute_sd > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        x += plan.substitute_sd * z;
    }
    Ok(x)
}

/// One increment of the measure of `cell`: drift + Gaussian + compensated
/// jumps above the cutoff + optional small-jump substitute. Draws come
/// from `rng` in the documented order.
pub fn sample_cell_increment(
    triplet: &CharacteristicTriplet,
    cell: &Window,
    epsilon: f64,
    mode: SmallJumpMode,
    rng: &mut ChaCha8Rng,
    cfg: &QuadConfig,
) -> Result<f64, SimulateError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(SimulateError::BadEpsilon(epsilon));
    }
    if !triplet.window().contains(cell) {
        return Err(SimulateError::Basis(BasisError::CellOutsideWindow {
            cell: cell.to_string(),
            window: triplet.window().to_string(),
        }));
    }
    let plan = build_plan(triplet, std::slice::from_ref(cell), epsilon, mode, cfg)?;
    draw_cell_increment(&plan.cells[0], &plan.samplers, mode, rng)
}

/// Variance of the removed small jumps: int_{|r| <= eps} r^2 F(dr, cell).
pub fn small_jump_sigma(
    triplet: &CharacteristicTriplet,
    cell: &Window,
    epsilon: f64,
    cfg: &QuadConfig,
) -> Result<f64, SimulateError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(SimulateError::BadEpsilon(epsilon));
    }
    if !triplet.window().contains(cell) {
        return Err(SimulateError::Basis(BasisError::CellOutsideWindow {
            cell: cell.to_string(),
            window: triplet.window().to_string(),
        }));
    }
    let mut total = 0.0;
    for comp in triplet.jumps() {
        let mass = comp.intensity.integral_over(cell);
        if mass <= 0.0 {
            continue;
        }
        let est = comp.levy.integrate_where(
            |r| Complex64::new(r * r, 0.0),
            JumpRegion::SmallJumps(epsilon),
            cfg,
        );
        if !est.converged(cfg) {
            return Err(SimulateError::QuadratureDiverged { value: est.value, error: est.error });
        }
        total += mass * est.value.re;
    }
    Ok(total.max(0.0))
}

fn config_fingerprint(
    triplet_window: &Window,
    points: &[Vec<f64>],
    config: &SimulationConfig,
    fold: u64,
) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for v in triplet_window.lower().iter().chain(triplet_window.upper()) {
        v.to_bits().hash(&mut h);
    }
    for p in points {
        for v in p {
            v.to_bits().hash(&mut h);
        }
    }
    config.epsilon.to_bits().hash(&mut h);
    config.small_jump_mode.hash(&mut h);
    config.seed.hash(&mut h);
    config.cells_per_dim.hash(&mut h);
    fold.hash(&mut h);
    h.finish()
}

fn simulate_fold(
    triplet: &CharacteristicTriplet,
    kernel: &Kernel,
    points: &[Vec<f64>],
    config: &SimulationConfig,
    cfg: &QuadConfig,
    fold: u64,
) -> Result<Vec<FieldSample>, SimulateError> {
    config.validate()?;
    if points.is_empty() {
        return Err(SimulateError::Kernel(KernelError::Empty));
    }
    kernel.validate(triplet.window().dim(), points[0].len())?;
    if let crate::kernels::Integrability::NotIntegrable(reason) =
        integrability_check(kernel, triplet, cfg)
    {
        let detail = match reason {
            NotIntegrableReason::UnboundedKernel { bound } => {
                format!("kernel bound {bound} is not finite")
            }
            NotIntegrableReason::InfiniteControlMeasure { detail } => detail,
        };
        return Err(SimulateError::NotIntegrable { detail });
    }
    let grid = GridDiscretization::new(triplet.window().clone(), config.cells_per_dim.clone())?;
    let cells = grid.cells()?;
    // the measure actually simulated: the fold-scaled triplet
    let scaled = if fold == 1 {
        triplet.clone()
    } else {
        triplet.scale(1.0 / fold as f64)?
    };
    let plan = build_plan(&scaled, &cells, config.epsilon, config.small_jump_mode, cfg)?;
    // kernel weights frozen at cell centers: values = W * increments
    let weights: Vec<Vec<f64>> = points
        .iter()
        .map(|t| cells.iter().map(|cell| kernel.eval(t, &cell.center())).collect())
        .collect();
    let fingerprint = config_fingerprint(triplet.window(), points, config, fold);
    (0..config.replicates)
        .into_par_iter()
        .map(|replicate| {
            let mut values = vec![0.0; points.len()];
            for copy in 0..fold {
                let mut rng = replicate_rng(config.seed, replicate * fold + copy);
                for (j, cell_plan) in plan.cells.iter().enumerate() {
                    let base = j as u128 * CELL_WORD_BLOCK;
                    rng.set_word_pos(base);
                    let inc =
                        draw_cell_increment(cell_plan, &plan.samplers, plan.mode, &mut rng)?;
                    debug_assert!(rng.get_word_pos() - base < CELL_WORD_BLOCK);
                    for (value, w_row) in values.iter_mut().zip(&weights) {
                        *value += w_row[j] * inc;
                    }
                }
            }
            Ok(FieldSample { values, replicate_index: replicate, fingerprint })
        })
        .collect()
}

/// Simulate `config.replicates` independent copies of the field at the
/// given points. Identical (seed, config) inputs give identical outputs.
pub fn simulate_field(
    triplet: &CharacteristicTriplet,
    kernel: &Kernel,
    points: &[Vec<f64>],
    config: &SimulationConfig,
    cfg: &QuadConfig,
) -> Result<Vec<FieldSample>, SimulateError> {
    simulate_fold(triplet, kernel, points, config, cfg, 1)
}

/// Simulate the m-fold sum of independent copies under scale(T, 1/m).
/// If the field is infinitely divisible this reproduces the law of
/// [`simulate_field`]; with m = 1 the two are identical draw for draw.
pub fn simulate_id_sum(
    triplet: &CharacteristicTriplet,
    kernel: &Kernel,
    points: &[Vec<f64>],
    m: u64,
    config: &SimulationConfig,
    cfg: &QuadConfig,
) -> Result<Vec<FieldSample>, SimulateError> {
    if m == 0 {
        return Err(SimulateError::BadGrid("fold count m must be at least 1".into()));
    }
    simulate_fold(triplet, kernel, points, config, cfg, m)
}

/// Exact cumulant of one simulated cell increment at argument u: the
/// epsilon-truncated Levy exponent plus the substitute Gaussian when that
/// mode is active. Converges to `cumulant_marginal` as epsilon drops.
pub fn truncated_increment_cumulant(
    triplet: &CharacteristicTriplet,
    cell: &Window,
    epsilon: f64,
    mode: SmallJumpMode,
    u: f64,
    cfg: &QuadConfig,
) -> Result<Complex64, SimulateError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(SimulateError::BadEpsilon(epsilon));
    }
    let a = triplet.drift_of_set(cell)?;
    let b = triplet.gaussian_of_set(cell)?;
    let sub_var = match mode {
        SmallJumpMode::GaussianSubstitute => small_jump_sigma(triplet, cell, epsilon, cfg)?,
        SmallJumpMode::Drop => 0.0,
    };
    let mut out = Complex64::new(-0.5 * u * u * (b + sub_var), u * a);
    for comp in triplet.jumps() {
        let mass = comp.intensity.integral_over(cell);
        if mass <= 0.0 {
            continue;
        }
        let est = comp.levy.integrate_where(|r| lk_term(u, r), JumpRegion::Tail(epsilon), cfg);
        if !est.converged(cfg) {
            return Err(SimulateError::QuadratureDiverged { value: est.value, error: est.error });
        }
        out += est.value * mass;
    }
    Ok(out)
}

/// Exact cumulant of the discretized field sum_cells u_cell Lambda(cell)
/// with the kernel frozen at cell centers. This is the law the simulator
/// actually draws from, up to the epsilon truncation.
pub fn discretized_cumulant(
    triplet: &CharacteristicTriplet,
    kernel: &Kernel,
    points: &[Vec<f64>],
    cells_per_dim: &[usize],
    weights: &[f64],
    cfg: &QuadConfig,
) -> Result<Complex64, SimulateError> {
    let grid = GridDiscretization::new(triplet.window().clone(), cells_per_dim.to_vec())?;
    let mut out = Complex64::new(0.0, 0.0);
    for cell in grid.cells()? {
        let center = cell.center();
        let u_cell: f64 = points
            .iter()
            .zip(weights)
            .map(|(t, w)| w * kernel.eval(t, &center))
            .sum();
        let est = triplet.cumulant_marginal(&cell, u_cell, cfg)?;
        out += est.value;
    }
    Ok(out)
}

/// CSV rows `replicate,t_index,value` with 17 significant digits, enough
/// to round-trip every f64 exactly.
pub fn write_samples_csv<W: io::Write>(samples: &[FieldSample], out: &mut W) -> io::Result<()> {
    writeln!(out, "replicate,t_index,value")?;
    for s in samples {
        for (j, v) in s.values.iter().enumerate() {
            writeln!(out, "{},{},{:.16e}", s.replicate_index, j, v)?;
        }
    }
    Ok(())
}
