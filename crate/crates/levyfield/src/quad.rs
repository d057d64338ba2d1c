//! Adaptive Gauss-Legendre quadrature over axis-aligned boxes.
//!
//! Every integral in this crate funnels through [`integrate_box`] or its
//! multi-box wrapper. The scheme is a tensor-product Gauss-Legendre pair:
//! the same box is integrated at `order` and `order + ORDER_STEP` points per
//! axis, the difference serves as the error estimate, and boxes that miss
//! the tolerance are bisected along their widest axis up to `max_depth`.
//! Refinement decisions compare the error against `abs_tol` and against
//! `rel_tol` times the local magnitude, so scaling an integrand by a
//! constant leaves the subdivision tree unchanged.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Gap between the low and high orders of the embedded pair.
pub const ORDER_STEP: usize = 8;

/// An integral value together with a conservative absolute error estimate.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

impl Estimate {
    pub fn zero() -> Self {
        Estimate { value: Complex64::new(0.0, 0.0), error: 0.0 }
    }

    pub fn exact(value: Complex64) -> Self {
        Estimate { value, error: 0.0 }
    }

    /// Accumulate another estimate; errors add in the worst case.
    pub fn accumulate(&mut self, other: Estimate) {
        self.value += other.value;
        self.error += other.error;
    }

    pub fn scaled(self, factor: f64) -> Self {
        Estimate { value: self.value * factor, error: self.error * factor.abs() }
    }

    /// Whether the estimate meets the configured tolerances with slack.
    ///
    /// The slack factor exists because summed sub-box errors legitimately
    /// exceed the per-box target; anything past it is non-convergence.
    pub fn converged(&self, cfg: &QuadConfig) -> bool {
        self.error.is_finite()
            && self.error <= CONVERGENCE_SLACK * (cfg.abs_tol + cfg.rel_tol * self.value.norm())
    }
}

/// Multiplier on the configured tolerances past which an integral is
/// reported as failed rather than merely loose.
pub const CONVERGENCE_SLACK: f64 = 100.0;

/// Tolerances and budget for one adaptive integration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadConfig {
    /// Points per axis of the low rule; the high rule adds [`ORDER_STEP`].
    pub order: usize,
    /// Absolute error target per box.
    pub abs_tol: f64,
    /// Relative error target per box.
    pub rel_tol: f64,
    /// Bisection depth limit; past it the high-rule value is accepted
    /// with its error recorded.
    pub max_depth: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { order: 16, abs_tol: 1e-10, rel_tol: 1e-8, max_depth: 12 }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.order < 2 || self.order > 64 {
            return Err(format!("quadrature order {} outside [2, 64]", self.order));
        }
        let bad = |v: f64| v.is_nan() || v <= 0.0;
        if bad(self.abs_tol) || bad(self.rel_tol) {
            return Err("quadrature tolerances must be positive".into());
        }
        if self.max_depth > 40 {
            return Err(format!("quadrature max_depth {} exceeds 40", self.max_depth));
        }
        Ok(())
    }
}

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Newton iteration on the Legendre polynomial; nodes come out symmetric
/// and the weights sum to 2.
fn legendre_rule(n: usize) -> GlRule {
    assert!(n >= 1, "rule order must be at least 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 1..=m {
        let mut z = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i - 1] = -z;
        nodes[n - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i - 1] = w;
        weights[n - i] = w;
    }
    GlRule { nodes, weights }
}

/// Shared cache: rule construction is cheap but happens in inner loops.
pub fn gl_rule(n: usize) -> Arc<GlRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("rule cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(legendre_rule(n))).clone()
}

/// Tensor-product rule applied to one box; exact for per-axis polynomials
/// of degree < 2n.
fn tensor_gl<F>(f: &F, lower: &[f64], upper: &[f64], rule: &GlRule) -> Complex64
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let d = lower.len();
    let n = rule.nodes.len();
    let mut scale = 1.0;
    for k in 0..d {
        scale *= 0.5 * (upper[k] - lower[k]);
    }
    if scale == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut sum = Complex64::new(0.0, 0.0);
    loop {
        let mut w = 1.0;
        for k in 0..d {
            let t = rule.nodes[idx[k]];
            x[k] = 0.5 * (lower[k] + upper[k]) + 0.5 * (upper[k] - lower[k]) * t;
            w *= rule.weights[idx[k]];
        }
        sum += f(&x) * w;
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return sum * scale;
            }
        }
    }
}

fn adapt<F>(f: &F, lower: &[f64], upper: &[f64], cfg: &QuadConfig, depth: usize) -> Estimate
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let low = gl_rule(cfg.order);
    let high = gl_rule(cfg.order + ORDER_STEP);
    let coarse = tensor_gl(f, lower, upper, &low);
    let fine = tensor_gl(f, lower, upper, &high);
    let err = (coarse - fine).norm();
    if err <= cfg.abs_tol.max(cfg.rel_tol * fine.norm()) || depth >= cfg.max_depth {
        return Estimate { value: fine, error: err };
    }
    let mut widest = 0;
    for k in 1..lower.len() {
        if upper[k] - lower[k] > upper[widest] - lower[widest] {
            widest = k;
        }
    }
    let mid = 0.5 * (lower[widest] + upper[widest]);
    let mut up_left = upper.to_vec();
    up_left[widest] = mid;
    let mut lo_right = lower.to_vec();
    lo_right[widest] = mid;
    let mut total = adapt(f, lower, &up_left, cfg, depth + 1);
    total.accumulate(adapt(f, &lo_right, upper, cfg, depth + 1));
    total
}

/// Integrate `f` over the box `[lower, upper]`.
pub fn integrate_box<F>(f: &F, lower: &[f64], upper: &[f64], cfg: &QuadConfig) -> Estimate
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    assert_eq!(lower.len(), upper.len(), "box bounds must share a dimension");
    assert!(!lower.is_empty(), "box must have at least one dimension");
    adapt(f, lower, upper, cfg, 0)
}

/// Integrate over a list of boxes, accumulating values and errors.
pub fn integrate_boxes<F>(f: &F, boxes: &[(Vec<f64>, Vec<f64>)], cfg: &QuadConfig) -> Estimate
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let mut total = Estimate::zero();
    for (lo, hi) in boxes {
        total.accumulate(integrate_box(f, lo, hi, cfg));
    }
    total
}

/// One-dimensional convenience wrapper.
pub fn integrate_interval<F>(f: &F, a: f64, b: f64, cfg: &QuadConfig) -> Estimate
where
    F: Fn(f64) -> Complex64 + ?Sized,
{
    if a >= b {
        return Estimate::zero();
    }
    integrate_box(&|x: &[f64]| f(x[0]), &[a], &[b], cfg)
}

/// Cartesian product of per-axis segment lists into sub-boxes.
///
/// `cuts[k]` holds interior breakpoints for axis k; points outside the box
/// or duplicating an endpoint are dropped. Used to pre-split along kernel
/// support boundaries so each sub-box sees a smooth integrand.
pub fn split_box(
    lower: &[f64],
    upper: &[f64],
    cuts: &[Vec<f64>],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = lower.len();
    assert_eq!(cuts.len(), d, "one cut list per axis");
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut pts: Vec<f64> = cuts[k]
            .iter()
            .copied()
            .filter(|&c| c > lower[k] && c < upper[k])
            .collect();
        pts.push(lower[k]);
        pts.push(upper[k]);
        pts.sort_by(|a, b| a.partial_cmp(b).expect("non-finite breakpoint"));
        pts.dedup();
        axes.push(pts);
    }
    let mut boxes = vec![(Vec::new(), Vec::new())];
    for axis in &axes {
        let mut next = Vec::with_capacity(boxes.len() * (axis.len() - 1));
        for (lo, hi) in &boxes {
            for seg in axis.windows(2) {
                let mut lo2 = lo.clone();
                let mut hi2 = hi.clone();
                lo2.push(seg[0]);
                hi2.push(seg[1]);
                next.push((lo2, hi2));
            }
        }
        boxes = next;
    }
    boxes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [2, 5, 16, 24, 33] {
            let rule = gl_rule(n);
            let sum: f64 = rule.weights.iter().sum();
            assert_relative_eq!(sum, 2.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn nodes_symmetric_and_interior() {
        let rule = gl_rule(16);
        for i in 0..16 {
            assert!(rule.nodes[i].abs() < 1.0);
            assert_relative_eq!(rule.nodes[i], -rule.nodes[15 - i], max_relative = 1e-14);
        }
    }

    #[test]
    fn rule_exact_for_low_degree_polynomials() {
        // order n integrates degree 2n-1 exactly: check x^8 with n = 5
        let rule = gl_rule(5);
        let mut sum = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            sum += w * x.powi(8);
        }
        assert_relative_eq!(sum, 2.0 / 9.0, max_relative = 1e-13);
    }

    #[test]
    fn linear_integral_on_unit_interval() {
        let cfg = QuadConfig::default();
        let est = integrate_interval(&|x| c(x), 0.0, 1.0, &cfg);
        assert_relative_eq!(est.value.re, 0.5, max_relative = 1e-14);
        assert_eq!(est.value.im, 0.0);
        assert!(est.converged(&cfg));
    }

    #[test]
    fn exponential_integral_on_unit_interval() {
        let cfg = QuadConfig::default();
        let est = integrate_interval(&|x| c((-x).exp()), 0.0, 1.0, &cfg);
        assert_relative_eq!(est.value.re, 1.0 - (-1.0f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn two_dimensional_product_integral() {
        let cfg = QuadConfig::default();
        let est = integrate_box(&|x: &[f64]| c(x[0] * x[1]), &[0.0, 0.0], &[1.0, 1.0], &cfg);
        assert_relative_eq!(est.value.re, 0.25, max_relative = 1e-13);
    }

    #[test]
    fn oscillatory_integrand_converges_adaptively() {
        let cfg = QuadConfig::default();
        let est = integrate_interval(&|x| c((50.0 * x).sin()), 0.0, 1.0, &cfg);
        let exact = (1.0 - (50.0f64).cos()) / 50.0;
        assert_relative_eq!(est.value.re, exact, max_relative = 1e-10);
        assert!(est.converged(&cfg));
    }

    #[test]
    fn kinked_integrand_needs_subdivision() {
        let cfg = QuadConfig::default();
        let est = integrate_interval(&|x| c((x - 1.0 / 3.0).abs()), 0.0, 1.0, &cfg);
        assert_relative_eq!(est.value.re, 5.0 / 18.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_box_integrates_to_zero() {
        let cfg = QuadConfig::default();
        let est = integrate_box(&|_: &[f64]| c(1.0), &[0.5, 0.0], &[0.5, 1.0], &cfg);
        assert_eq!(est.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn split_box_respects_cuts_and_bounds() {
        let boxes = split_box(&[0.0, 0.0], &[1.0, 2.0], &[vec![0.25, 2.0], vec![]]);
        assert_eq!(boxes.len(), 2);
        let total: f64 = boxes
            .iter()
            .map(|(lo, hi)| (hi[0] - lo[0]) * (hi[1] - lo[1]))
            .sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn scaling_the_integrand_scales_the_estimate_exactly_in_structure() {
        // same subdivision tree for f and 3f: values stay proportional
        let cfg = QuadConfig { max_depth: 6, ..QuadConfig::default() };
        let f = |x: f64| c((10.0 * x).sin() / (0.1 + x));
        let a = integrate_interval(&|x| f(x), 0.0, 1.0, &cfg);
        let b = integrate_interval(&|x| f(x) * 3.0, 0.0, 1.0, &cfg);
        assert_relative_eq!(b.value.re, 3.0 * a.value.re, max_relative = 1e-13);
    }

    proptest::proptest! {
        // a rule of order n is exact on polynomials of degree 2n-1, so any
        // cubic over any interval must come back at machine precision
        #[test]
        fn random_cubics_integrate_exactly(
            coef in proptest::collection::vec(-5.0f64..5.0, 4),
            lo in -3.0f64..3.0,
            width in 0.1f64..4.0,
        ) {
            let hi = lo + width;
            let cfg = QuadConfig::default();
            let est = integrate_interval(
                &|x: f64| c(coef[0] + x * (coef[1] + x * (coef[2] + x * coef[3]))),
                lo,
                hi,
                &cfg,
            );
            let anti = |x: f64| {
                x * (coef[0] + x * (coef[1] / 2.0 + x * (coef[2] / 3.0 + x * coef[3] / 4.0)))
            };
            let exact = anti(hi) - anti(lo);
            let scale = coef.iter().map(|v| v.abs()).sum::<f64>() * (1.0 + hi.abs().powi(4));
            proptest::prop_assert!(
                (est.value.re - exact).abs() <= 1e-11 * (1.0 + scale),
                "got {} want {exact}", est.value.re
            );
            proptest::prop_assert!(est.value.im == 0.0);
        }

        #[test]
        fn box_estimates_match_iterated_intervals(
            ax in -2.0f64..2.0,
            aw in 0.1f64..3.0,
            bx in -2.0f64..2.0,
            bw in 0.1f64..3.0,
        ) {
            // separable integrand: the 2-d box equals the product of 1-d runs
            let cfg = QuadConfig::default();
            let f2 = |x: &[f64]| c((x[0] - 0.3) * (x[0] + 1.0) * (2.0 * x[1] + 0.5));
            let plane = integrate_box(&f2, &[ax, bx], &[ax + aw, bx + bw], &cfg);
            let first = integrate_interval(&|x: f64| c((x - 0.3) * (x + 1.0)), ax, ax + aw, &cfg);
            let second = integrate_interval(&|y: f64| c(2.0 * y + 0.5), bx, bx + bw, &cfg);
            let product = first.value.re * second.value.re;
            proptest::prop_assert!(
                (plane.value.re - product).abs() <= 1e-10 * (1.0 + product.abs()),
                "got {} want {product}", plane.value.re
            );
        }
    }
}
