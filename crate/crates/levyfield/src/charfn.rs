//! Exact joint characteristic functions of kernel-integral fields.
//!
//! For field points t_1..t_n and an argument vector x, the joint CF of
//! (X(t_1), ..., X(t_n)) is exp of
//!
//! ```text
//! C(x) = i * int u(s) a(ds)
//!        - 1/2 * int u(s)^2 b(ds)
//!        + int int (e^{i u(s) y} - 1 - i u(s) tau(y)) F(dy, ds)
//! ```
//!
//! where u(s) = sum_j x_j f_{t_j}(s) is the weighted kernel combination.
//! The double integral runs space outside, jump size inside. Powers of the
//! CF are always taken as exp(gamma * C), never by exponentiating CF
//! values, so fractional powers stay on the right branch.

use std::cell::Cell;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisError, CharacteristicTriplet};
use crate::kernels::{
    integrability_check, Integrability, Kernel, KernelError, NotIntegrableReason,
    WeightedCombination,
};
use crate::quad::{self, Estimate, QuadConfig};

/// Numerical slack on the exact bound |cf| <= 1.
pub const CF_MODULUS_TOL: f64 = 1e-8;
/// Numerical slack on the exact bound Re(cumulant) <= 0.
pub const CUMULANT_RE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CharfnError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("kernel fails the integrability check: {0:?}")]
    NotIntegrable(NotIntegrableReason),
    #[error("argument {index} has {got} weights, expected {expected}")]
    WeightCount { index: usize, expected: usize, got: usize },
    #[error("quadrature did not converge: value {value}, error estimate {error:.3e}")]
    QuadratureDiverged { value: Complex64, error: f64 },
    #[error("cumulant real part {re:.3e} is positive beyond tolerance")]
    PositiveRealPart { re: f64 },
    #[error("characteristic value modulus {modulus} exceeds 1 beyond tolerance")]
    ModulusExceedsOne { modulus: f64 },
    #[error("power exponent must be positive and finite, got {0}")]
    BadGamma(f64),
}

/// Everything needed to evaluate the joint cumulant: the triplet, the
/// kernel family with its field points, and the quadrature budget.
/// Construction runs the integrability check.
#[derive(Clone, Debug)]
pub struct CumulantRequest {
    triplet: CharacteristicTriplet,
    kernel: Kernel,
    points: Vec<Vec<f64>>,
    quad: QuadConfig,
}

impl CumulantRequest {
    pub fn new(
        triplet: CharacteristicTriplet,
        kernel: Kernel,
        points: Vec<Vec<f64>>,
        quad: QuadConfig,
    ) -> Result<Self, CharfnError> {
        if points.is_empty() {
            return Err(CharfnError::Kernel(KernelError::Empty));
        }
        let q = points[0].len();
        for p in &points {
            if p.len() != q {
                return Err(CharfnError::Kernel(KernelError::DimensionMismatch {
                    expected: q,
                    got: p.len(),
                }));
            }
        }
        kernel.validate(triplet.window().dim(), q)?;
        match integrability_check(&kernel, &triplet, &quad) {
            Integrability::Integrable { .. } => {}
            Integrability::NotIntegrable(reason) => {
                return Err(CharfnError::NotIntegrable(reason));
            }
        }
        Ok(CumulantRequest { triplet, kernel, points, quad })
    }

    pub fn triplet(&self) -> &CharacteristicTriplet {
        &self.triplet
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn quad(&self) -> &QuadConfig {
        &self.quad
    }

    /// Same request over the gamma-scaled triplet.
    pub fn scaled(&self, gamma: f64) -> Result<Self, CharfnError> {
        Ok(CumulantRequest {
            triplet: self.triplet.scale(gamma)?,
            kernel: self.kernel.clone(),
            points: self.points.clone(),
            quad: self.quad.clone(),
        })
    }

    fn check_weights(&self, weights: &[f64], index: usize) -> Result<(), CharfnError> {
        if weights.len() != self.points.len() {
            return Err(CharfnError::WeightCount {
                index,
                expected: self.points.len(),
                got: weights.len(),
            });
        }
        Ok(())
    }

    fn combination(&self, weights: &[f64]) -> WeightedCombination {
        WeightedCombination::new(self.points.clone(), weights.to_vec(), self.kernel.clone())
            .expect("lengths checked at request construction")
    }

    /// Window split along every kernel support boundary of every point, so
    /// each sub-box sees a smooth integrand. The split depends only on the
    /// geometry, never on weights, which keeps quadrature nodes shared
    /// between arguments and between gamma-scaled triplets.
    fn spatial_boxes(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let w = self.triplet.window();
        let d = w.dim();
        let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); d];
        for t in &self.points {
            for (axis, cut_list) in cuts.iter_mut().enumerate() {
                cut_list.extend(self.kernel.axis_cuts(t, axis, d));
            }
        }
        quad::split_box(w.lower(), w.upper(), &cuts)
    }

    /// Inner jump integrals run a notch tighter than the outer rule so
    /// their residual noise stays below the outer convergence test.
    fn inner_quad(&self) -> QuadConfig {
        QuadConfig {
            abs_tol: self.quad.abs_tol * 0.1,
            rel_tol: self.quad.rel_tol * 0.1,
            ..self.quad.clone()
        }
    }
}

/// int u(s) a(ds): the drift paired with the combination.
pub fn combined_drift(req: &CumulantRequest, weights: &[f64]) -> Result<Estimate, CharfnError> {
    req.check_weights(weights, 0)?;
    let combo = req.combination(weights);
    let drift = req.triplet().drift().clone();
    let est = quad::integrate_boxes(
        &|s: &[f64]| Complex64::new(combo.eval(s) * drift.eval(s), 0.0),
        &req.spatial_boxes(),
        &req.quad,
    );
    if !est.converged(&req.quad) {
        return Err(CharfnError::QuadratureDiverged { value: est.value, error: est.error });
    }
    Ok(est)
}

/// int u(s)^2 b(ds): nonnegative because the integrand is and the rule
/// weights are positive.
pub fn combined_gaussian(req: &CumulantRequest, weights: &[f64]) -> Result<Estimate, CharfnError> {
    req.check_weights(weights, 0)?;
    let combo = req.combination(weights);
    let gauss = req.triplet().gaussian().clone();
    let est = quad::integrate_boxes(
        &|s: &[f64]| {
            let u = combo.eval(s);
            Complex64::new(u * u * gauss.eval(s), 0.0)
        },
        &req.spatial_boxes(),
        &req.quad,
    );
    if !est.converged(&req.quad) {
        return Err(CharfnError::QuadratureDiverged { value: est.value, error: est.error });
    }
    Ok(est)
}

/// The double jump integral, iterated with space outside and jump size
/// inside: for each spatial node s the inner Levy integral runs at
/// argument u(s).
pub fn jump_cumulant(req: &CumulantRequest, weights: &[f64]) -> Result<Estimate, CharfnError> {
    req.check_weights(weights, 0)?;
    let combo = req.combination(weights);
    let boxes = req.spatial_boxes();
    let inner_cfg = req.inner_quad();
    let mut total = Estimate::zero();
    for comp in req.triplet().jumps() {
        let intensity = comp.intensity.clone();
        let inner_err = Cell::new(0.0f64);
        let est = quad::integrate_boxes(
            &|s: &[f64]| {
                let u = combo.eval(s);
                let inner = comp.levy.lk_integral(u, &inner_cfg);
                inner_err.set(inner_err.get().max(inner.error));
                inner.value * intensity.eval(s)
            },
            &boxes,
            &req.quad,
        );
        // inner quadrature noise is invisible to the outer pair estimate;
        // bound it by the worst inner error times the intensity mass
        let mass = intensity.integral_over(req.triplet().window());
        let mut est = est;
        est.error += inner_err.get() * mass.abs();
        if !est.converged(&req.quad) {
            return Err(CharfnError::QuadratureDiverged { value: est.value, error: est.error });
        }
        total.accumulate(est);
    }
    Ok(total)
}

/// Joint cumulant C(x) = i * drift - gaussian / 2 + jump part.
pub fn cumulant_joint(req: &CumulantRequest, weights: &[f64]) -> Result<Estimate, CharfnError> {
    let a = combined_drift(req, weights)?;
    let b = combined_gaussian(req, weights)?;
    let jump = jump_cumulant(req, weights)?;
    let value = Complex64::new(-0.5 * b.value.re + jump.value.re, a.value.re + jump.value.im);
    let error = a.error + 0.5 * b.error + jump.error;
    if value.re > CUMULANT_RE_TOL {
        return Err(CharfnError::PositiveRealPart { re: value.re });
    }
    Ok(Estimate { value, error })
}

/// Joint CF values, cumulants and error estimates over a grid of argument
/// vectors. `cf_values[i]` is exp(cumulants[i]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfReport {
    pub arguments: Vec<Vec<f64>>,
    pub cumulants: Vec<Complex64>,
    pub cf_values: Vec<Complex64>,
    pub error_estimates: Vec<f64>,
}

impl CfReport {
    fn from_cumulants(
        arguments: Vec<Vec<f64>>,
        ests: Vec<Estimate>,
        gamma: f64,
    ) -> Result<Self, CharfnError> {
        let mut cumulants = Vec::with_capacity(ests.len());
        let mut cf_values = Vec::with_capacity(ests.len());
        let mut error_estimates = Vec::with_capacity(ests.len());
        for est in ests {
            let c = est.value * gamma;
            let cf = c.exp();
            if cf.norm() > 1.0 + CF_MODULUS_TOL {
                return Err(CharfnError::ModulusExceedsOne { modulus: cf.norm() });
            }
            cumulants.push(c);
            cf_values.push(cf);
            error_estimates.push(cf.norm() * est.error * gamma);
        }
        Ok(CfReport { arguments, cumulants, cf_values, error_estimates })
    }
}

/// Exact joint CF on a grid of argument vectors. The per-argument
/// evaluations are independent and run in parallel.
pub fn cf_joint(req: &CumulantRequest, arguments: &[Vec<f64>]) -> Result<CfReport, CharfnError> {
    cf_pow(req, arguments, 1.0)
}

/// gamma-th power of the CF as exp(gamma * cumulant).
pub fn cf_pow(
    req: &CumulantRequest,
    arguments: &[Vec<f64>],
    gamma: f64,
) -> Result<CfReport, CharfnError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(CharfnError::BadGamma(gamma));
    }
    for (index, arg) in arguments.iter().enumerate() {
        if arg.len() != req.points.len() {
            return Err(CharfnError::WeightCount {
                index,
                expected: req.points.len(),
                got: arg.len(),
            });
        }
    }
    let ests: Vec<Estimate> = arguments
        .par_iter()
        .map(|arg| cumulant_joint(req, arg))
        .collect::<Result<Vec<_>, _>>()?;
    CfReport::from_cumulants(arguments.to_vec(), ests, gamma)
}

/// Single CF value exp(gamma * C(x)); the workhorse for positive
/// semidefiniteness scans.
pub fn cf_value(req: &CumulantRequest, weights: &[f64], gamma: f64) -> Result<Complex64, CharfnError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(CharfnError::BadGamma(gamma));
    }
    let est = cumulant_joint(req, weights)?;
    Ok((est.value * gamma).exp())
}
