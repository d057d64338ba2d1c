//! Kernel families f_t(x) = phi(x - P t) and finite weighted combinations
//! sum_j x_j f_{t_j}, the integrands that turn a random measure into a
//! random field.
//!
//! P is a fixed linear embedding of the index space into the window space;
//! the default is the identity, so points and window share a dimension.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{CharacteristicTriplet, Window};
use crate::quad::QuadConfig;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel: {0}")]
    BadParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("combination has {points} points but {weights} weights")]
    LengthMismatch { points: usize, weights: usize },
    #[error("combination must contain at least one point")]
    Empty,
}

/// Linear map P sending index points into the window space.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Embedding {
    #[default]
    Identity,
    /// Row-major d x q matrix.
    Matrix(Vec<Vec<f64>>),
}

impl Embedding {
    pub fn is_identity(&self) -> bool {
        matches!(self, Embedding::Identity)
    }

    /// P t for a point t of the index space.
    pub fn apply(&self, t: &[f64], dim: usize) -> Vec<f64> {
        match self {
            Embedding::Identity => {
                assert_eq!(t.len(), dim, "identity embedding needs a point of the window dimension");
                t.to_vec()
            }
            Embedding::Matrix(rows) => {
                assert_eq!(rows.len(), dim, "embedding rows must match the window dimension");
                rows.iter()
                    .map(|row| {
                        assert_eq!(row.len(), t.len(), "embedding columns must match the point dimension");
                        row.iter().zip(t).map(|(p, v)| p * v).sum()
                    })
                    .collect()
            }
        }
    }

    fn validate(&self, dim: usize, point_dim: usize) -> Result<(), String> {
        match self {
            Embedding::Identity => {
                if point_dim != dim {
                    return Err(format!(
                        "identity embedding: points have dimension {point_dim}, window has {dim}"
                    ));
                }
            }
            Embedding::Matrix(rows) => {
                if rows.len() != dim {
                    return Err(format!("embedding has {} rows, window dimension is {dim}", rows.len()));
                }
                for row in rows {
                    if row.len() != point_dim {
                        return Err(format!(
                            "embedding row has {} columns, points have dimension {point_dim}",
                            row.len()
                        ));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err("embedding entries must be finite".into());
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parametric shape phi of a kernel family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelShape {
    /// amplitude on the box |y_k - center_k| <= halfwidth_k, zero outside.
    /// An empty center means the origin.
    Box {
        halfwidth: Vec<f64>,
        amplitude: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// amplitude * exp(-|y|^2 / (2 bandwidth^2))
    GaussianBump { bandwidth: f64, amplitude: f64 },
    /// amplitude * exp(-rate |y|)
    ExpDecay { rate: f64, amplitude: f64 },
    /// Values on a regular grid over `domain`, multilinear interpolation
    /// inside, zero outside. `shape[k]` grid points per axis, row-major
    /// with the last axis contiguous.
    Tabulated { domain: Window, shape: Vec<usize>, values: Vec<f64> },
}

/// A kernel family: shape plus the embedding of index points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    #[serde(flatten)]
    pub shape: KernelShape,
    #[serde(default, skip_serializing_if = "Embedding::is_identity")]
    pub embedding: Embedding,
}

impl Kernel {
    pub fn new(shape: KernelShape) -> Self {
        Kernel { shape, embedding: Embedding::Identity }
    }

    pub fn validate(&self, dim: usize, point_dim: usize) -> Result<(), KernelError> {
        self.embedding
            .validate(dim, point_dim)
            .map_err(KernelError::BadParameter)?;
        match &self.shape {
            KernelShape::Box { halfwidth, amplitude, center } => {
                if halfwidth.len() != dim {
                    return Err(KernelError::DimensionMismatch { expected: dim, got: halfwidth.len() });
                }
                if halfwidth.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                    return Err(KernelError::BadParameter("box halfwidths must be positive".into()));
                }
                if !center.is_empty() && center.len() != dim {
                    return Err(KernelError::DimensionMismatch { expected: dim, got: center.len() });
                }
                if !amplitude.is_finite() {
                    return Err(KernelError::BadParameter("box amplitude must be finite".into()));
                }
            }
            KernelShape::GaussianBump { bandwidth, amplitude } => {
                if !(bandwidth.is_finite() && *bandwidth > 0.0) {
                    return Err(KernelError::BadParameter("gaussian bandwidth must be positive".into()));
                }
                if !amplitude.is_finite() {
                    return Err(KernelError::BadParameter("gaussian amplitude must be finite".into()));
                }
            }
            KernelShape::ExpDecay { rate, amplitude } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(KernelError::BadParameter("exp_decay rate must be positive".into()));
                }
                if !amplitude.is_finite() {
                    return Err(KernelError::BadParameter("exp_decay amplitude must be finite".into()));
                }
            }
            KernelShape::Tabulated { domain, shape, values } => {
                if domain.dim() != dim {
                    return Err(KernelError::DimensionMismatch { expected: dim, got: domain.dim() });
                }
                if shape.len() != dim || shape.iter().any(|n| *n < 2) {
                    return Err(KernelError::BadParameter(
                        "tabulated shape needs at least 2 grid points per axis".into(),
                    ));
                }
                let count: usize = shape.iter().product();
                if values.len() != count {
                    return Err(KernelError::BadParameter(format!(
                        "tabulated values has length {}, grid shape wants {count}",
                        values.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// f_t(x) = phi(x - P t).
    pub fn eval(&self, t: &[f64], x: &[f64]) -> f64 {
        let shift = self.embedding.apply(t, x.len());
        let y: Vec<f64> = x.iter().zip(&shift).map(|(xv, sv)| xv - sv).collect();
        self.base_eval(&y)
    }

    /// phi(y) itself.
    pub fn base_eval(&self, y: &[f64]) -> f64 {
        match &self.shape {
            KernelShape::Box { halfwidth, amplitude, center } => {
                for k in 0..y.len() {
                    let c = center.get(k).copied().unwrap_or(0.0);
                    if (y[k] - c).abs() > halfwidth[k] {
                        return 0.0;
                    }
                }
                *amplitude
            }
            KernelShape::GaussianBump { bandwidth, amplitude } => {
                let q: f64 = y.iter().map(|v| v * v).sum();
                amplitude * (-0.5 * q / (bandwidth * bandwidth)).exp()
            }
            KernelShape::ExpDecay { rate, amplitude } => {
                let n: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                amplitude * (-rate * n).exp()
            }
            KernelShape::Tabulated { domain, shape, values } => {
                if !domain.contains_point(y) {
                    return 0.0;
                }
                multilinear(domain, shape, values, y)
            }
        }
    }

    /// Declared bound sup |f_t|; non-finite for tabulated values containing
    /// non-finite entries, which integrability_check reports.
    pub fn bound(&self) -> f64 {
        match &self.shape {
            KernelShape::Box { amplitude, .. } => amplitude.abs(),
            KernelShape::GaussianBump { amplitude, .. } => amplitude.abs(),
            KernelShape::ExpDecay { amplitude, .. } => amplitude.abs(),
            KernelShape::Tabulated { values, .. } => values
                .iter()
                .map(|v| v.abs())
                .fold(0.0, |acc, v| if v.is_nan() { f64::INFINITY } else { acc.max(v) }),
        }
    }

    /// Axis positions where f_t is non-smooth, used to pre-split spatial
    /// quadrature boxes. Smooth shapes contribute nothing.
    pub fn axis_cuts(&self, t: &[f64], axis: usize, dim: usize) -> Vec<f64> {
        let shift = self.embedding.apply(t, dim);
        match &self.shape {
            KernelShape::Box { halfwidth, center, .. } => {
                let c = center.get(axis).copied().unwrap_or(0.0);
                vec![
                    shift[axis] + c - halfwidth[axis],
                    shift[axis] + c + halfwidth[axis],
                ]
            }
            KernelShape::GaussianBump { .. } => vec![],
            KernelShape::ExpDecay { .. } => vec![shift[axis]],
            KernelShape::Tabulated { domain, shape, .. } => {
                let lo = domain.lower()[axis];
                let hi = domain.upper()[axis];
                let n = shape[axis];
                (0..n)
                    .map(|i| shift[axis] + lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
    }
}

fn multilinear(domain: &Window, shape: &[usize], values: &[f64], y: &[f64]) -> f64 {
    let d = y.len();
    let mut idx = vec![0usize; d];
    let mut frac = vec![0.0f64; d];
    for k in 0..d {
        let n = shape[k];
        let lo = domain.lower()[k];
        let hi = domain.upper()[k];
        let pos = (y[k] - lo) / (hi - lo) * (n - 1) as f64;
        let cell = (pos.floor() as usize).min(n - 2);
        idx[k] = cell;
        frac[k] = pos - cell as f64;
    }
    // strides, last axis contiguous
    let mut strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    let mut out = 0.0;
    for corner in 0..1usize << d {
        let mut w = 1.0;
        let mut offset = 0usize;
        for k in 0..d {
            if corner >> k & 1 == 1 {
                w *= frac[k];
                offset += (idx[k] + 1) * strides[k];
            } else {
                w *= 1.0 - frac[k];
                offset += idx[k] * strides[k];
            }
        }
        out += w * values[offset];
    }
    out
}

/// Finite combination sum_j weights[j] * f_{points[j]}; evaluation sums in
/// ascending index order so results are reproducible bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedCombination {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    kernel: Kernel,
}

impl WeightedCombination {
    pub fn new(
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
        kernel: Kernel,
    ) -> Result<Self, KernelError> {
        if points.is_empty() {
            return Err(KernelError::Empty);
        }
        if points.len() != weights.len() {
            return Err(KernelError::LengthMismatch { points: points.len(), weights: weights.len() });
        }
        let q = points[0].len();
        for p in &points {
            if p.len() != q {
                return Err(KernelError::DimensionMismatch { expected: q, got: p.len() });
            }
        }
        Ok(WeightedCombination { points, weights, kernel })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            sum += w * self.kernel.eval(p, s);
        }
        sum
    }
}

/// Whether kernel integrals against the random measure are well defined:
/// a finite kernel bound plus a finite control measure of the window.
#[derive(Clone, Debug, PartialEq)]
pub enum Integrability {
    Integrable { kernel_bound: f64, control_mass: f64 },
    NotIntegrable(NotIntegrableReason),
}

#[derive(Clone, Debug, PartialEq)]
pub enum NotIntegrableReason {
    UnboundedKernel { bound: f64 },
    InfiniteControlMeasure { detail: String },
}

impl Integrability {
    pub fn is_integrable(&self) -> bool {
        matches!(self, Integrability::Integrable { .. })
    }
}

/// The check itself; failure is a value, not an error.
pub fn integrability_check(
    kernel: &Kernel,
    triplet: &CharacteristicTriplet,
    cfg: &QuadConfig,
) -> Integrability {
    let bound = kernel.bound();
    if !bound.is_finite() {
        return Integrability::NotIntegrable(NotIntegrableReason::UnboundedKernel { bound });
    }
    match triplet.control_measure(triplet.window(), cfg) {
        Ok(control_mass) if control_mass.is_finite() => {
            Integrability::Integrable { kernel_bound: bound, control_mass }
        }
        Ok(control_mass) => Integrability::NotIntegrable(NotIntegrableReason::InfiniteControlMeasure {
            detail: format!("control measure evaluated to {control_mass}"),
        }),
        Err(err) => Integrability::NotIntegrable(NotIntegrableReason::InfiniteControlMeasure {
            detail: err.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Jump, JumpComponent, LevyMeasure1D, SpatialIntensity};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn unit_window() -> Window {
        Window::new(vec![0.0], vec![1.0]).unwrap()
    }

    fn box_kernel(halfwidth: f64) -> Kernel {
        Kernel::new(KernelShape::Box { halfwidth: vec![halfwidth], amplitude: 1.0, center: vec![] })
    }

    #[test]
    fn box_kernel_is_an_indicator() {
        let k = box_kernel(0.5);
        assert_eq!(k.eval(&[0.5], &[0.5]), 1.0);
        assert_eq!(k.eval(&[0.5], &[0.999]), 1.0);
        assert_eq!(k.eval(&[0.5], &[1.0]), 1.0); // closed boundary
        assert_eq!(k.eval(&[0.5], &[1.001]), 0.0);
    }

    #[test]
    fn gaussian_bump_value_one_bandwidth_out() {
        let k = Kernel::new(KernelShape::GaussianBump { bandwidth: 0.2, amplitude: 2.0 });
        // at distance sigma the bump is amplitude * e^{-1/2}
        let v = k.eval(&[0.0], &[0.2]);
        assert_relative_eq!(v, 2.0 * 0.6065306597126334, max_relative = 1e-14);
    }

    #[test]
    fn exp_decay_value_at_unit_scaled_distance() {
        let k = Kernel::new(KernelShape::ExpDecay { rate: 3.0, amplitude: 1.0 });
        let v = k.eval(&[0.0], &[1.0 / 3.0]);
        assert_relative_eq!(v, (-1.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn translation_shifts_exactly() {
        let k = Kernel::new(KernelShape::GaussianBump { bandwidth: 0.3, amplitude: 1.4 });
        for (t, x) in [(0.3, 0.9), (-1.2, 0.4), (2.0, 2.5)] {
            assert_eq!(k.eval(&[t], &[x]), k.eval(&[0.0], &[x - t]));
        }
    }

    #[test]
    fn tabulated_reproduces_affine_functions() {
        // 2-D grid of g(x, y) = 1 + 2x - y: multilinear interpolation is exact
        let domain = Window::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let (nx, ny) = (5, 4);
        let mut values = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                let x = i as f64 / (nx - 1) as f64;
                let y = 2.0 * j as f64 / (ny - 1) as f64;
                values.push(1.0 + 2.0 * x - y);
            }
        }
        let k = Kernel::new(KernelShape::Tabulated { domain, shape: vec![nx, ny], values });
        for (x, y) in [(0.0, 0.0), (0.31, 1.7), (1.0, 2.0), (0.62, 0.05)] {
            assert_abs_diff_eq!(k.eval(&[0.0, 0.0], &[x, y]), 1.0 + 2.0 * x - y, epsilon = 1e-12);
        }
        assert_eq!(k.eval(&[0.0, 0.0], &[1.5, 0.5]), 0.0); // outside
    }

    #[test]
    fn embedding_matrix_maps_scalar_points_into_the_plane() {
        let k = Kernel {
            shape: KernelShape::GaussianBump { bandwidth: 1.0, amplitude: 1.0 },
            embedding: Embedding::Matrix(vec![vec![1.0], vec![0.0]]),
        };
        // t = 0.5 embeds to (0.5, 0); evaluate at x = (0.5, 1.0)
        let v = k.eval(&[0.5], &[0.5, 1.0]);
        assert_relative_eq!(v, (-0.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn combination_evaluates_linearly() {
        let k = box_kernel(0.25);
        let points = vec![vec![0.25], vec![0.75]];
        let a = WeightedCombination::new(points.clone(), vec![1.0, 2.0], k.clone()).unwrap();
        let b = WeightedCombination::new(points.clone(), vec![-0.5, 1.0], k.clone()).unwrap();
        for lambda in [0.0, 0.7, -2.0] {
            let mixed: Vec<f64> = a
                .weights()
                .iter()
                .zip(b.weights())
                .map(|(wa, wb)| wa + lambda * wb)
                .collect();
            let m = WeightedCombination::new(points.clone(), mixed, k.clone()).unwrap();
            for s in [0.1, 0.25, 0.5, 0.8, 1.0] {
                assert_abs_diff_eq!(
                    m.eval(&[s]),
                    a.eval(&[s]) + lambda * b.eval(&[s]),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn combination_with_zero_weights_vanishes() {
        let k = box_kernel(0.5);
        let combo =
            WeightedCombination::new(vec![vec![0.3], vec![0.6]], vec![0.0, 0.0], k).unwrap();
        assert_eq!(combo.eval(&[0.4]), 0.0);
    }

    #[test]
    fn opposite_weights_at_one_point_cancel_exactly() {
        let k = Kernel::new(KernelShape::GaussianBump { bandwidth: 0.4, amplitude: 1.0 });
        let combo = WeightedCombination::new(
            vec![vec![0.5], vec![0.5]],
            vec![1.5, -1.5],
            k,
        )
        .unwrap();
        assert_eq!(combo.eval(&[0.77]), 0.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let k = box_kernel(0.5);
        assert!(matches!(
            WeightedCombination::new(vec![vec![0.1]], vec![1.0, 2.0], k.clone()),
            Err(KernelError::LengthMismatch { .. })
        ));
        assert!(matches!(
            WeightedCombination::new(vec![], vec![], k),
            Err(KernelError::Empty)
        ));
    }

    #[test]
    fn integrability_passes_for_a_bounded_kernel_and_finite_control() {
        let t = CharacteristicTriplet::new(
            unit_window(),
            SpatialIntensity::constant(0.1),
            SpatialIntensity::constant(1.0),
            vec![JumpComponent {
                levy: LevyMeasure1D::discrete(vec![Jump { size: 2.0, rate: 1.0 }]),
                intensity: SpatialIntensity::constant(1.0),
            }],
        )
        .unwrap();
        let verdict = integrability_check(&box_kernel(0.5), &t, &QuadConfig::default());
        match verdict {
            Integrability::Integrable { kernel_bound, control_mass } => {
                assert_eq!(kernel_bound, 1.0);
                assert_relative_eq!(control_mass, 0.1 + 1.0 + 1.0, max_relative = 1e-12);
            }
            other => panic!("expected integrable, got {other:?}"),
        }
    }

    #[test]
    fn integrability_fails_for_unbounded_tabulated_kernel() {
        let domain = unit_window();
        let k = Kernel::new(KernelShape::Tabulated {
            domain,
            shape: vec![2],
            values: vec![1.0, f64::INFINITY],
        });
        let t = CharacteristicTriplet::zero(unit_window());
        let verdict = integrability_check(&k, &t, &QuadConfig::default());
        assert!(matches!(
            verdict,
            Integrability::NotIntegrable(NotIntegrableReason::UnboundedKernel { .. })
        ));
        assert!(!verdict.is_integrable());
    }

    #[test]
    fn kernel_validation_catches_bad_parameters() {
        let bad = Kernel::new(KernelShape::GaussianBump { bandwidth: 0.0, amplitude: 1.0 });
        assert!(bad.validate(1, 1).is_err());
        let bad_box = Kernel::new(KernelShape::Box {
            halfwidth: vec![0.5, 0.5],
            amplitude: 1.0,
            center: vec![],
        });
        assert!(bad_box.validate(1, 1).is_err());
    }
}
