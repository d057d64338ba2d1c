//! Characteristic triplets (a, b, F) of independently scattered, infinitely
//! divisible random measures on a rectangular window.
//!
//! The drift a and Gaussian variance b are absolutely continuous with
//! spatial densities; the jump part F is a finite sum of products
//! `nu(dr) x g(x) dx` of a one-dimensional jump-size measure and a
//! nonnegative spatial intensity. The cumulant of the measure of a cell A is
//!
//! ```text
//! C(u; A) = i u a(A) - u^2 b(A) / 2
//!           + integral of (e^{iur} - 1 - iu tau(r)) F(dr, A)
//! ```
//!
//! with the truncation tau(r) = r on [-1, 1] and 0 outside, fixed once for
//! the whole crate as [`TRUNCATION_RADIUS`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{self, Estimate, QuadConfig};

/// Radius of the truncation function tau(r) = r * 1[|r| <= 1].
///
/// Every compensator, control-measure and cumulant computation in the crate
/// uses this same constant; changing it changes the drift convention.
pub const TRUNCATION_RADIUS: f64 = 1.0;

/// Largest supported window dimension (corner scans are 2^d).
pub const MAX_DIM: usize = 16;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("window bounds must be finite with lower < upper on every axis, dimension 1..={MAX_DIM}")]
    BadWindow,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cell {cell} is not contained in the window {window}")]
    CellOutsideWindow { cell: String, window: String },
    #[error("scale factor must be positive and finite, got {0}")]
    NonPositiveScale(f64),
    #[error("{component}: {reason}")]
    InvalidComponent { component: String, reason: String },
    #[error("gaussian intensity must be nonnegative on the window")]
    NegativeGaussianIntensity,
    #[error("jump component {index}: intensity must be nonnegative on the window")]
    NegativeJumpIntensity { index: usize },
    #[error("quadrature did not converge: value {value}, error estimate {error:.3e}")]
    QuadratureDiverged { value: Complex64, error: f64 },
    #[error("control measure diverged for component {component}")]
    ControlDiverged { component: String },
}

// ---------------------------------------------------------------------------
// window

/// Axis-aligned box in R^d. Doubles as the domain of a triplet and as the
/// cells measured by it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub struct Window {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawWindow {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawWindow> for Window {
    type Error = String;
    fn try_from(raw: RawWindow) -> Result<Self, String> {
        Window::new(raw.lower, raw.upper).map_err(|e| e.to_string())
    }
}

impl From<Window> for RawWindow {
    fn from(w: Window) -> RawWindow {
        RawWindow { lower: w.lower, upper: w.upper }
    }
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BasisError> {
        let d = lower.len();
        let ok = (1..=MAX_DIM).contains(&d)
            && upper.len() == d
            && lower.iter().all(|v| v.is_finite())
            && upper.iter().all(|v| v.is_finite())
            && lower.iter().zip(&upper).all(|(lo, hi)| lo < hi);
        if !ok {
            return Err(BasisError::BadWindow);
        }
        Ok(Window { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Set inclusion with boundary allowed.
    pub fn contains(&self, cell: &Window) -> bool {
        self.dim() == cell.dim()
            && self
                .lower
                .iter()
                .zip(&cell.lower)
                .all(|(outer, inner)| outer <= inner)
            && self
                .upper
                .iter()
                .zip(&cell.upper)
                .all(|(outer, inner)| inner <= outer)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(k, v)| self.lower[k] <= *v && *v <= self.upper[k])
    }

    /// Corner points, 2^d of them.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| if mask >> k & 1 == 1 { self.upper[k] } else { self.lower[k] })
                    .collect()
            })
            .collect()
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for k in 0..self.dim() {
            if k > 0 {
                write!(f, " x ")?;
            }
            write!(f, "[{}, {}]", self.lower[k], self.upper[k])?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// spatial intensities

/// Scalar density over the window. All variants integrate in closed form
/// over boxes and attain their extrema at box corners, which keeps the set
/// functions of a triplet exact and fast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpatialIntensity {
    Constant { value: f64 },
    /// g(x) = intercept + slope . x
    Linear { intercept: f64, slope: Vec<f64> },
    /// g(x) = amplitude * exp(-rate . x)
    ExpDecay { amplitude: f64, rate: Vec<f64> },
}

impl SpatialIntensity {
    pub fn constant(value: f64) -> Self {
        SpatialIntensity::Constant { value }
    }

    pub fn validate(&self, dim: usize) -> Result<(), String> {
        match self {
            SpatialIntensity::Constant { value } => {
                if !value.is_finite() {
                    return Err("constant intensity must be finite".into());
                }
            }
            SpatialIntensity::Linear { intercept, slope } => {
                if !intercept.is_finite() || slope.iter().any(|s| !s.is_finite()) {
                    return Err("linear intensity coefficients must be finite".into());
                }
                if slope.len() != dim {
                    return Err(format!("slope has {} entries, window dimension is {dim}", slope.len()));
                }
            }
            SpatialIntensity::ExpDecay { amplitude, rate } => {
                if !amplitude.is_finite() || rate.iter().any(|r| !r.is_finite()) {
                    return Err("exp_decay intensity parameters must be finite".into());
                }
                if rate.len() != dim {
                    return Err(format!("rate has {} entries, window dimension is {dim}", rate.len()));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SpatialIntensity::Constant { value } => *value,
            SpatialIntensity::Linear { intercept, slope } => {
                intercept + slope.iter().zip(x).map(|(s, v)| s * v).sum::<f64>()
            }
            SpatialIntensity::ExpDecay { amplitude, rate } => {
                amplitude * (-rate.iter().zip(x).map(|(r, v)| r * v).sum::<f64>()).exp()
            }
        }
    }

    /// Exact integral over a box.
    pub fn integral_over(&self, cell: &Window) -> f64 {
        match self {
            SpatialIntensity::Constant { value } => value * cell.volume(),
            SpatialIntensity::Linear { .. } => cell.volume() * self.eval(&cell.center()),
            SpatialIntensity::ExpDecay { amplitude, rate } => {
                let mut out = *amplitude;
                for (&kappa, (&lo, &hi)) in rate.iter().zip(cell.lower.iter().zip(&cell.upper)) {
                    // (e^{-k lo} - e^{-k hi})/k, stable through k -> 0
                    out *= if kappa == 0.0 {
                        hi - lo
                    } else {
                        (-kappa * lo).exp() * (-(-kappa * (hi - lo)).exp_m1()) / kappa
                    };
                }
                out
            }
        }
    }

    /// Minimum over a box; exact because every variant is monotone or
    /// affine per axis, so extrema sit at corners.
    pub fn min_on(&self, cell: &Window) -> f64 {
        cell.corners()
            .iter()
            .map(|c| self.eval(c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_on(&self, cell: &Window) -> f64 {
        cell.corners()
            .iter()
            .map(|c| self.eval(c))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn nonnegative_on(&self, cell: &Window) -> bool {
        self.min_on(cell) >= 0.0
    }

    /// Integral of |g| over a box: closed form when the sign is constant,
    /// quadrature across the sign change otherwise.
    pub fn abs_integral_over(&self, cell: &Window, cfg: &QuadConfig) -> Result<f64, BasisError> {
        if self.min_on(cell) >= 0.0 {
            return Ok(self.integral_over(cell));
        }
        if self.max_on(cell) <= 0.0 {
            return Ok(-self.integral_over(cell));
        }
        let est = quad::integrate_box(
            &|x: &[f64]| Complex64::new(self.eval(x).abs(), 0.0),
            cell.lower(),
            cell.upper(),
            cfg,
        );
        if !est.converged(cfg) {
            return Err(BasisError::QuadratureDiverged { value: est.value, error: est.error });
        }
        Ok(est.value.re)
    }

    /// Same density scaled by a constant factor.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            SpatialIntensity::Constant { value } => SpatialIntensity::Constant { value: value * factor },
            SpatialIntensity::Linear { intercept, slope } => SpatialIntensity::Linear {
                intercept: intercept * factor,
                slope: slope.iter().map(|s| s * factor).collect(),
            },
            SpatialIntensity::ExpDecay { amplitude, rate } => SpatialIntensity::ExpDecay {
                amplitude: amplitude * factor,
                rate: rate.clone(),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// one-dimensional jump-size measures

/// One atom of a discrete jump measure: `rate` expected jumps of size
/// `size` per unit of spatial intensity mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub size: f64,
    pub rate: f64,
}

/// Normalized jump-size density of a compound component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpDensity {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    /// Density rate * e^{-rate r} on r > 0.
    Exponential { rate: f64 },
}

impl JumpDensity {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            JumpDensity::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err("uniform jump density needs finite lo < hi".into());
                }
            }
            JumpDensity::Normal { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && *sd > 0.0) {
                    return Err("normal jump density needs finite mean and sd > 0".into());
                }
            }
            JumpDensity::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err("exponential jump density needs rate > 0".into());
                }
            }
        }
        Ok(())
    }

    pub fn pdf(&self, r: f64) -> f64 {
        match self {
            JumpDensity::Uniform { lo, hi } => {
                if r >= *lo && r <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            JumpDensity::Normal { mean, sd } => {
                let z = (r - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            JumpDensity::Exponential { rate } => {
                if r > 0.0 {
                    rate * (-rate * r).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Interval outside which the density carries negligible mass
    /// (< 1e-18 of the total), used to truncate quadrature.
    pub fn hull(&self) -> (f64, f64) {
        match self {
            JumpDensity::Uniform { lo, hi } => (*lo, *hi),
            JumpDensity::Normal { mean, sd } => (mean - 10.0 * sd, mean + 10.0 * sd),
            JumpDensity::Exponential { rate } => (0.0, 45.0 / rate),
        }
    }
}

/// One-dimensional jump-size measure nu(dr). The product of one of these
/// with a spatial intensity is a component of the jump part F.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LevyMeasure1D {
    /// Finitely many atoms away from 0.
    DiscreteJumps { jumps: Vec<Jump> },
    /// Density c * e^{-beta r} / r on r > 0: infinite activity, finite
    /// variation, the jump measure of a gamma subordinator.
    GammaType { c: f64, beta: f64 },
    /// Finite total rate times a normalized jump-size density.
    CompoundDensity { rate: f64, density: JumpDensity },
}

/// Restriction of a jump-size measure by absolute size. Bands take the
/// half-open convention lo < |r| <= hi so that splitting at a cutoff never
/// counts an atom twice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum JumpRegion {
    All,
    /// |r| <= eps
    SmallJumps(f64),
    /// |r| > eps
    Tail(f64),
    /// lo < |r| <= hi
    Band { lo: f64, hi: f64 },
}

impl JumpRegion {
    fn contains(&self, r: f64) -> bool {
        let a = r.abs();
        match *self {
            JumpRegion::All => true,
            JumpRegion::SmallJumps(eps) => a <= eps,
            JumpRegion::Tail(eps) => a > eps,
            JumpRegion::Band { lo, hi } => a > lo && a <= hi,
        }
    }

    fn intervals(&self) -> Vec<(f64, f64)> {
        match *self {
            JumpRegion::All => vec![(f64::NEG_INFINITY, f64::INFINITY)],
            JumpRegion::SmallJumps(eps) => vec![(-eps, eps)],
            JumpRegion::Tail(eps) => {
                vec![(f64::NEG_INFINITY, -eps), (eps, f64::INFINITY)]
            }
            JumpRegion::Band { lo, hi } => vec![(-hi, -lo), (lo, hi)],
        }
    }
}

impl LevyMeasure1D {
    pub fn discrete(jumps: Vec<Jump>) -> Self {
        LevyMeasure1D::DiscreteJumps { jumps }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            LevyMeasure1D::DiscreteJumps { jumps } => {
                if jumps.is_empty() {
                    return Err("discrete jump list must not be empty".into());
                }
                for (k, j) in jumps.iter().enumerate() {
                    if !(j.size.is_finite() && j.size != 0.0) {
                        return Err(format!("jump {k}: size must be finite and nonzero"));
                    }
                    if !(j.rate.is_finite() && j.rate > 0.0) {
                        return Err(format!("jump {k}: rate must be positive"));
                    }
                }
            }
            LevyMeasure1D::GammaType { c, beta } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err("gamma_type needs c > 0".into());
                }
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err("gamma_type needs beta > 0".into());
                }
            }
            LevyMeasure1D::CompoundDensity { rate, density } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err("compound_density needs rate > 0".into());
                }
                density.validate()?;
            }
        }
        Ok(())
    }

    /// Same measure with all rates multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            LevyMeasure1D::DiscreteJumps { jumps } => LevyMeasure1D::DiscreteJumps {
                jumps: jumps
                    .iter()
                    .map(|j| Jump { size: j.size, rate: j.rate * factor })
                    .collect(),
            },
            LevyMeasure1D::GammaType { c, beta } => {
                LevyMeasure1D::GammaType { c: c * factor, beta: *beta }
            }
            LevyMeasure1D::CompoundDensity { rate, density } => {
                LevyMeasure1D::CompoundDensity { rate: rate * factor, density: *density }
            }
        }
    }

    /// Lebesgue density of the continuous variants; zero off support.
    pub(crate) fn density_at(&self, r: f64) -> f64 {
        match self {
            LevyMeasure1D::DiscreteJumps { .. } => 0.0,
            LevyMeasure1D::GammaType { c, beta } => {
                if r > 0.0 {
                    c * (-beta * r).exp() / r
                } else {
                    0.0
                }
            }
            LevyMeasure1D::CompoundDensity { rate, density } => rate * density.pdf(r),
        }
    }

    /// Finite interval carrying all but a negligible sliver of the
    /// continuous mass. The gamma-type left end is an open 0: quadrature
    /// nodes are interior, and admissible integrands vanish fast enough
    /// there for the product h(r)/r to stay integrable.
    fn hull(&self) -> Option<(f64, f64)> {
        match self {
            LevyMeasure1D::DiscreteJumps { .. } => None,
            LevyMeasure1D::GammaType { c, beta } => {
                let reach = (42.0 + c.max(1.0).ln()) / beta;
                Some((0.0, reach.max(2.0)))
            }
            LevyMeasure1D::CompoundDensity { density, .. } => Some(density.hull()),
        }
    }

    /// Integral of h against the restriction of nu to `region`.
    ///
    /// Discrete parts sum exactly. Continuous parts integrate per region
    /// interval, pre-split at |r| = TRUNCATION_RADIUS where the
    /// Levy-Khintchine integrand kinks.
    pub fn integrate_where<F>(&self, h: F, region: JumpRegion, cfg: &QuadConfig) -> Estimate
    where
        F: Fn(f64) -> Complex64,
    {
        match self {
            LevyMeasure1D::DiscreteJumps { jumps } => {
                let mut sum = Complex64::new(0.0, 0.0);
                for j in jumps {
                    if region.contains(j.size) {
                        sum += h(j.size) * j.rate;
                    }
                }
                Estimate::exact(sum)
            }
            _ => {
                let (hull_lo, hull_hi) = self.hull().expect("continuous measure has a hull");
                let mut total = Estimate::zero();
                for (lo, hi) in region.intervals() {
                    let a = lo.max(hull_lo);
                    let b = hi.min(hull_hi);
                    if a >= b {
                        continue;
                    }
                    for (s0, s1) in split_at_truncation(a, b) {
                        total.accumulate(quad::integrate_interval(
                            &|r| h(r) * self.density_at(r),
                            s0,
                            s1,
                            cfg,
                        ));
                    }
                }
                total
            }
        }
    }

    /// Total mass of the region (finite for tails and bands away from 0).
    pub fn mass_where(&self, region: JumpRegion, cfg: &QuadConfig) -> Estimate {
        self.integrate_where(|_| Complex64::new(1.0, 0.0), region, cfg)
    }

    /// Integral of min(1, r^2): finite for every admissible measure.
    pub fn min_one_r2(&self, cfg: &QuadConfig) -> Estimate {
        self.integrate_where(
            |r| Complex64::new((r * r).min(1.0), 0.0),
            JumpRegion::All,
            cfg,
        )
    }

    /// Jump part of the Levy-Khintchine exponent at argument u:
    /// the integral of e^{iur} - 1 - iu tau(r) against nu.
    pub fn lk_integral(&self, u: f64, cfg: &QuadConfig) -> Estimate {
        self.integrate_where(|r| lk_term(u, r), JumpRegion::All, cfg)
    }
}

fn split_at_truncation(a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![a];
    for t in [-TRUNCATION_RADIUS, TRUNCATION_RADIUS] {
        if t > a && t < b {
            cuts.push(t);
        }
    }
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cut"));
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

// ---------------------------------------------------------------------------
// stable Levy-Khintchine integrand

/// e^{iw} - 1 without cancellation: the real part is -2 sin^2(w/2).
pub(crate) fn cis_minus_one(w: f64) -> Complex64 {
    let s = (0.5 * w).sin();
    Complex64::new(-2.0 * s * s, w.sin())
}

/// e^{iw} - 1 - iw, by power series for small |w| where the direct form
/// loses every significant digit.
pub(crate) fn cis_minus_one_minus_iw(w: f64) -> Complex64 {
    if w.abs() <= 0.5 {
        let iw = Complex64::new(0.0, w);
        let mut term = iw * iw * 0.5;
        let mut sum = term;
        let mut k = 3.0;
        loop {
            term = term * iw / k;
            let next = sum + term;
            if next == sum {
                return sum;
            }
            sum = next;
            k += 1.0;
        }
    } else {
        cis_minus_one(w) - Complex64::new(0.0, w)
    }
}

/// Integrand of the jump cumulant: e^{iur} - 1 - iu tau(r).
///
/// Near r = 0 this behaves like -u^2 r^2 / 2, which is what makes the
/// gamma-type 1/r singularity integrable; the series branch preserves that
/// decay numerically.
pub fn lk_term(u: f64, r: f64) -> Complex64 {
    let w = u * r;
    if r.abs() <= TRUNCATION_RADIUS {
        cis_minus_one_minus_iw(w)
    } else {
        cis_minus_one(w)
    }
}

// ---------------------------------------------------------------------------
// the triplet

/// One product component nu(dr) x g(x) dx of the jump measure F.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpComponent {
    pub levy: LevyMeasure1D,
    pub intensity: SpatialIntensity,
}

/// Characteristic triplet of an infinitely divisible random measure:
/// drift density, Gaussian variance density, and jump components, all
/// living on one window. Deserialization passes through [`Self::new`],
/// so a parsed triplet is always a valid one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTriplet", into = "RawTriplet")]
pub struct CharacteristicTriplet {
    window: Window,
    drift: SpatialIntensity,
    gaussian: SpatialIntensity,
    jumps: Vec<JumpComponent>,
}

#[derive(Serialize, Deserialize)]
struct RawTriplet {
    window: Window,
    drift: SpatialIntensity,
    gaussian: SpatialIntensity,
    #[serde(default)]
    jumps: Vec<JumpComponent>,
}

impl TryFrom<RawTriplet> for CharacteristicTriplet {
    type Error = BasisError;

    fn try_from(raw: RawTriplet) -> Result<Self, BasisError> {
        CharacteristicTriplet::new(raw.window, raw.drift, raw.gaussian, raw.jumps)
    }
}

impl From<CharacteristicTriplet> for RawTriplet {
    fn from(t: CharacteristicTriplet) -> RawTriplet {
        RawTriplet { window: t.window, drift: t.drift, gaussian: t.gaussian, jumps: t.jumps }
    }
}

impl CharacteristicTriplet {
    pub fn new(
        window: Window,
        drift: SpatialIntensity,
        gaussian: SpatialIntensity,
        jumps: Vec<JumpComponent>,
    ) -> Result<Self, BasisError> {
        let d = window.dim();
        drift
            .validate(d)
            .map_err(|reason| BasisError::InvalidComponent { component: "drift".into(), reason })?;
        gaussian
            .validate(d)
            .map_err(|reason| BasisError::InvalidComponent { component: "gaussian".into(), reason })?;
        if !gaussian.nonnegative_on(&window) {
            return Err(BasisError::NegativeGaussianIntensity);
        }
        for (index, comp) in jumps.iter().enumerate() {
            comp.levy.validate().map_err(|reason| BasisError::InvalidComponent {
                component: format!("jump component {index}"),
                reason,
            })?;
            comp.intensity.validate(d).map_err(|reason| BasisError::InvalidComponent {
                component: format!("jump component {index} intensity"),
                reason,
            })?;
            if !comp.intensity.nonnegative_on(&window) {
                return Err(BasisError::NegativeJumpIntensity { index });
            }
        }
        Ok(CharacteristicTriplet { window, drift, gaussian, jumps })
    }

    /// Triplet of the almost surely zero measure.
    pub fn zero(window: Window) -> Self {
        CharacteristicTriplet {
            window,
            drift: SpatialIntensity::constant(0.0),
            gaussian: SpatialIntensity::constant(0.0),
            jumps: Vec::new(),
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn drift(&self) -> &SpatialIntensity {
        &self.drift
    }

    pub fn gaussian(&self) -> &SpatialIntensity {
        &self.gaussian
    }

    pub fn jumps(&self) -> &[JumpComponent] {
        &self.jumps
    }

    fn check_cell(&self, cell: &Window) -> Result<(), BasisError> {
        if !self.window.contains(cell) {
            return Err(BasisError::CellOutsideWindow {
                cell: cell.to_string(),
                window: self.window.to_string(),
            });
        }
        Ok(())
    }

    /// Drift a(A) of a cell; additive in A because it is an integral.
    pub fn drift_of_set(&self, cell: &Window) -> Result<f64, BasisError> {
        self.check_cell(cell)?;
        Ok(self.drift.integral_over(cell))
    }

    /// Gaussian variance b(A) of a cell.
    pub fn gaussian_of_set(&self, cell: &Window) -> Result<f64, BasisError> {
        self.check_cell(cell)?;
        Ok(self.gaussian.integral_over(cell))
    }

    /// Jump measure of a cell: each component's rates scaled by the
    /// intensity mass of the cell. Components with zero mass drop out.
    pub fn levy_of_set(&self, cell: &Window) -> Result<Vec<LevyMeasure1D>, BasisError> {
        self.check_cell(cell)?;
        let mut out = Vec::with_capacity(self.jumps.len());
        for comp in &self.jumps {
            let mass = comp.intensity.integral_over(cell);
            if mass > 0.0 {
                out.push(comp.levy.scaled(mass));
            }
        }
        Ok(out)
    }

    /// Control measure |a|(A) + b(A) + integral of min(1, r^2) F(dr, A).
    /// Finite exactly when the triplet is admissible on A.
    pub fn control_measure(&self, cell: &Window, cfg: &QuadConfig) -> Result<f64, BasisError> {
        self.check_cell(cell)?;
        let mut total = self.drift.abs_integral_over(cell, cfg)?;
        total += self.gaussian.integral_over(cell);
        for (index, comp) in self.jumps.iter().enumerate() {
            let mass = comp.intensity.integral_over(cell);
            if mass == 0.0 {
                continue;
            }
            let est = comp.levy.min_one_r2(cfg);
            let part = mass * est.value.re;
            if !part.is_finite() {
                return Err(BasisError::ControlDiverged {
                    component: format!("jump component {index}"),
                });
            }
            total += part;
        }
        if !total.is_finite() {
            return Err(BasisError::ControlDiverged { component: "triplet".into() });
        }
        Ok(total)
    }

    /// Triplet of the gamma-power: (gamma a, gamma b, gamma F).
    pub fn scale(&self, gamma: f64) -> Result<Self, BasisError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(BasisError::NonPositiveScale(gamma));
        }
        Ok(CharacteristicTriplet {
            window: self.window.clone(),
            drift: self.drift.scaled(gamma),
            gaussian: self.gaussian.scaled(gamma),
            jumps: self
                .jumps
                .iter()
                .map(|comp| JumpComponent {
                    levy: comp.levy.scaled(gamma),
                    intensity: comp.intensity.clone(),
                })
                .collect(),
        })
    }

    /// Levy-Khintchine cumulant of the measure of one cell at argument u:
    /// log E exp(i u Lambda(A)).
    pub fn cumulant_marginal(
        &self,
        cell: &Window,
        u: f64,
        cfg: &QuadConfig,
    ) -> Result<Estimate, BasisError> {
        self.check_cell(cell)?;
        let a = self.drift.integral_over(cell);
        let b = self.gaussian.integral_over(cell);
        let mut total = Estimate::exact(Complex64::new(-0.5 * u * u * b, u * a));
        for comp in &self.jumps {
            let mass = comp.intensity.integral_over(cell);
            if mass == 0.0 {
                continue;
            }
            let est = comp.levy.lk_integral(u, cfg);
            if !est.converged(cfg) {
                return Err(BasisError::QuadratureDiverged { value: est.value, error: est.error });
            }
            total.accumulate(est.scaled(mass));
        }
        Ok(total)
    }
}

/// Integral of h against nu over the whole line, with an error estimate.
/// This is the shared integration backend for cumulants, compensators and
/// small-jump variances.
pub fn levy_integral<F>(
    nu: &LevyMeasure1D,
    h: F,
    cfg: &QuadConfig,
) -> Result<Estimate, BasisError>
where
    F: Fn(f64) -> Complex64,
{
    let est = nu.integrate_where(h, JumpRegion::All, cfg);
    if !est.converged(cfg) {
        return Err(BasisError::QuadratureDiverged { value: est.value, error: est.error });
    }
    Ok(est)
}
