//! Statistical checks that simulated fields follow the law the cumulant
//! machinery predicts, and that the law is infinitely divisible.
//!
//! Three instruments:
//! - empirical characteristic functions compared against exact values,
//! - two-sample Kolmogorov-Smirnov tests between a directly simulated
//!   field and an m-fold sum of scaled copies,
//! - positive semidefiniteness of Bochner matrices built from fractional
//!   powers of the characteristic function, which is the finite-sample
//!   shadow of infinite divisibility.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::CharacteristicTriplet;
use crate::charfn::{cf_pow, CfReport, CharfnError, CumulantRequest};
use crate::kernels::Kernel;
use crate::quad::QuadConfig;
use crate::simulate::{simulate_field, simulate_id_sum, FieldSample, SimulateError, SimulationConfig};

/// Largest Bochner matrix the eigenvalue pass will accept.
pub const MAX_PSD_POINTS: usize = 25;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Charfn(#[from] CharfnError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error("no samples to work with")]
    Empty,
    #[error("sample has {got} values, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{got} eigenvalue points exceed the maximum {max}")]
    TooManyPoints { got: usize, max: usize },
    #[error("matrix is not square")]
    NotSquare,
    #[error("significance level must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("m_list must contain at least one positive fold count")]
    BadFoldList,
}

// ---------------------------------------------------------------------------
// empirical characteristic function

/// (1/n) sum exp(i <x, values>). Exactly 1 at x = 0; nudged back onto the
/// closed unit disk when roundoff pushes the modulus past 1.
pub fn empirical_cf(samples: &[FieldSample], x: &[f64]) -> Result<Complex64, VerifyError> {
    if samples.is_empty() {
        return Err(VerifyError::Empty);
    }
    if x.iter().all(|v| *v == 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for s in samples {
        if s.values.len() != x.len() {
            return Err(VerifyError::LengthMismatch { expected: x.len(), got: s.values.len() });
        }
        let dot: f64 = x.iter().zip(&s.values).map(|(a, b)| a * b).sum();
        sum += Complex64::new(dot.cos(), dot.sin());
    }
    let mut z = sum / samples.len() as f64;
    let n = z.norm();
    if n > 1.0 {
        z /= n;
    }
    Ok(z)
}

/// Largest gap between the empirical characteristic function of the
/// samples and the exact values in the report, over its argument grid.
pub fn max_cf_distance(samples: &[FieldSample], report: &CfReport) -> Result<f64, VerifyError> {
    let mut worst = 0.0f64;
    for (x, exact) in report.arguments.iter().zip(&report.cf_values) {
        let emp = empirical_cf(samples, x)?;
        worst = worst.max((emp - exact).norm());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

#[derive(Clone, Copy, Debug, Serialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Two-sample KS test. The threshold is the large-sample rejection bound
/// c(alpha) sqrt((n + m)/(n m)) with c(alpha) = sqrt(-ln(alpha/2)/2);
/// ties are handled by advancing both samples through equal values before
/// the gap is measured.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsOutcome, VerifyError> {
    if a.is_empty() || b.is_empty() {
        return Err(VerifyError::Empty);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(VerifyError::BadAlpha(alpha));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let threshold = c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt();
    Ok(KsOutcome { statistic: d, threshold, pass: d <= threshold })
}

// ---------------------------------------------------------------------------
// positive semidefiniteness

/// Smallest eigenvalue of a Hermitian matrix, via the real symmetric
/// embedding [[Re, -Im], [Im, Re]] whose spectrum doubles the original.
/// The input is Hermitized first, so tiny asymmetries from quadrature
/// noise cannot poison the eigensolve.
pub fn min_eigenvalue_hermitian(matrix: &[Vec<Complex64>]) -> Result<f64, VerifyError> {
    let k = matrix.len();
    if k == 0 {
        return Err(VerifyError::Empty);
    }
    if matrix.iter().any(|row| row.len() != k) {
        return Err(VerifyError::NotSquare);
    }
    if k > MAX_PSD_POINTS {
        return Err(VerifyError::TooManyPoints { got: k, max: MAX_PSD_POINTS });
    }
    let mut h = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    for i in 0..k {
        for j in 0..k {
            h[i][j] = 0.5 * (matrix[i][j] + matrix[j][i].conj());
        }
    }
    let embedded = DMatrix::from_fn(2 * k, 2 * k, |r, c| {
        let (i, j) = (r % k, c % k);
        match (r < k, c < k) {
            (true, true) | (false, false) => h[i][j].re,
            (true, false) => -h[i][j].im,
            (false, true) => h[i][j].im,
        }
    });
    let eigen = embedded.symmetric_eigen();
    Ok(eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Bochner matrix M[j][k] = phi(u_j - u_k) of a scalar function on a
/// point set, then its smallest eigenvalue. Genuine characteristic
/// functions give a nonnegative result for every point set.
pub fn bochner_min_eigenvalue<E>(
    phi: impl Fn(f64) -> Result<Complex64, E>,
    points: &[f64],
) -> Result<f64, VerifyError>
where
    VerifyError: From<E>,
{
    if points.is_empty() {
        return Err(VerifyError::Empty);
    }
    if points.len() > MAX_PSD_POINTS {
        return Err(VerifyError::TooManyPoints { got: points.len(), max: MAX_PSD_POINTS });
    }
    let k = points.len();
    let mut m = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    for i in 0..k {
        for j in 0..k {
            m[i][j] = phi(points[i] - points[j])?;
        }
    }
    min_eigenvalue_hermitian(&m)
}

// ---------------------------------------------------------------------------
// the full divisibility verdict

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerificationConfig {
    /// Fold counts m for the m-fold sum comparison.
    pub m_list: Vec<u64>,
    /// Significance level of each KS test.
    pub ks_alpha: f64,
    /// Largest acceptable gap between empirical and exact CF values.
    pub cf_distance_max: f64,
    /// Number of grid points per Bochner matrix.
    pub psd_points: usize,
    /// The PSD grid spans [-psd_limit, psd_limit].
    pub psd_limit: f64,
    /// Fractional powers checked in addition to 1/m for every listed m.
    pub psd_gammas: Vec<f64>,
    /// Eigenvalues above -psd_tol count as nonnegative.
    pub psd_tol: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            m_list: vec![2, 5],
            ks_alpha: 0.01,
            cf_distance_max: 0.03,
            psd_points: 15,
            psd_limit: 3.0,
            psd_gammas: vec![0.5, 2.0],
            psd_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KsRecord {
    pub m: u64,
    pub point_index: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CfDistanceRecord {
    pub label: String,
    pub max_distance: f64,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PsdRecord {
    pub gamma: f64,
    pub point_index: usize,
    pub min_eigenvalue: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub ks: Vec<KsRecord>,
    pub cf_distances: Vec<CfDistanceRecord>,
    pub psd: Vec<PsdRecord>,
    /// Worst numbers across the record tables, for one-glance reading.
    pub worst_ks_statistic: Option<f64>,
    pub worst_cf_distance: Option<f64>,
    pub min_psd_eigenvalue: Option<f64>,
    pub replicates: u64,
    pub cf_grid_size: usize,
    pub passed: bool,
}

/// Round to 9 significant digits before rank comparisons. Simulated laws
/// can carry atoms, and the field and the m-fold sum reach the same atom
/// location along different floating-point routes (for instance m
/// repeated additions of a compensator fifth versus one product); the
/// 1-ulp gap would otherwise register as the whole atom mass in a KS
/// statistic. Nine digits is far below statistical resolution at any
/// realistic replicate count, so genuine distributional gaps survive.
fn quantize(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let exp = v.abs().log10().floor() as i32;
    // two scale factors so neither power overflows at extreme magnitudes
    let k1 = (8 - exp).clamp(-300, 300);
    let k2 = 8 - exp - k1;
    let (s1, s2) = (10f64.powi(k1), 10f64.powi(k2));
    (v * s1 * s2).round() / s2 / s1
}

fn sorted_dedup_gammas(ver: &VerificationConfig) -> Vec<f64> {
    let mut gammas: Vec<f64> = ver
        .m_list
        .iter()
        .filter(|m| **m > 0)
        .map(|m| 1.0 / *m as f64)
        .chain(ver.psd_gammas.iter().copied())
        .collect();
    gammas.sort_by(|a, b| a.total_cmp(b));
    gammas.dedup_by(|a, b| a.to_bits() == b.to_bits());
    gammas
}

/// Check that the field over this triplet behaves as an infinitely
/// divisible law: each m-fold sum of scale(T, 1/m) copies matches the
/// direct simulation marginally (KS) and jointly (CF distance), the
/// direct simulation matches the exact CF, and every fractional power of
/// the CF stays positive semidefinite on a Bochner grid per field point.
pub fn verify_infinite_divisibility(
    triplet: &CharacteristicTriplet,
    kernel: &Kernel,
    points: &[Vec<f64>],
    cf_args: &[Vec<f64>],
    sim: &SimulationConfig,
    ver: &VerificationConfig,
    quad: &QuadConfig,
) -> Result<VerificationReport, VerifyError> {
    if ver.m_list.is_empty() || ver.m_list.contains(&0) {
        return Err(VerifyError::BadFoldList);
    }
    let request = CumulantRequest::new(
        triplet.clone(),
        kernel.clone(),
        points.to_vec(),
        quad.clone(),
    )?;
    let exact = cf_pow(&request, cf_args, 1.0)?;

    let field = simulate_field(triplet, kernel, points, sim, quad)?;
    let mut cf_distances = Vec::new();
    let d_field = max_cf_distance(&field, &exact)?;
    cf_distances.push(CfDistanceRecord {
        label: "field".into(),
        max_distance: d_field,
        limit: ver.cf_distance_max,
        pass: d_field <= ver.cf_distance_max,
    });

    let mut ks = Vec::new();
    for &m in &ver.m_list {
        let folded = simulate_id_sum(triplet, kernel, points, m, sim, quad)?;
        for j in 0..points.len() {
            let a: Vec<f64> = field.iter().map(|s| quantize(s.values[j])).collect();
            let b: Vec<f64> = folded.iter().map(|s| quantize(s.values[j])).collect();
            let outcome = ks_two_sample(&a, &b, ver.ks_alpha)?;
            ks.push(KsRecord {
                m,
                point_index: j,
                statistic: outcome.statistic,
                threshold: outcome.threshold,
                pass: outcome.pass,
            });
        }
        let d = max_cf_distance(&folded, &exact)?;
        cf_distances.push(CfDistanceRecord {
            label: format!("id_sum_m={m}"),
            max_distance: d,
            limit: ver.cf_distance_max,
            pass: d <= ver.cf_distance_max,
        });
    }

    // Bochner grids: uniform points make the matrix Toeplitz, so each
    // (gamma, field point) needs only the 2k-1 distinct differences.
    let mut psd = Vec::new();
    if ver.psd_points > 0 {
        if ver.psd_points > MAX_PSD_POINTS {
            return Err(VerifyError::TooManyPoints {
                got: ver.psd_points,
                max: MAX_PSD_POINTS,
            });
        }
        let k = ver.psd_points;
        let grid: Vec<f64> = if k == 1 {
            vec![0.0]
        } else {
            (0..k)
                .map(|i| -ver.psd_limit + 2.0 * ver.psd_limit * i as f64 / (k - 1) as f64)
                .collect()
        };
        for gamma in sorted_dedup_gammas(ver) {
            for j in 0..points.len() {
                let mut diffs: Vec<f64> = Vec::with_capacity(k * k);
                for a in &grid {
                    for b in &grid {
                        diffs.push(a - b);
                    }
                }
                diffs.sort_by(|a, b| a.total_cmp(b));
                diffs.dedup_by(|a, b| a.to_bits() == b.to_bits());
                let args: Vec<Vec<f64>> = diffs
                    .iter()
                    .map(|&u| {
                        let mut x = vec![0.0; points.len()];
                        x[j] = u;
                        x
                    })
                    .collect();
                let report = cf_pow(&request, &args, gamma)?;
                let lookup = |u: f64| -> Complex64 {
                    let idx = diffs.partition_point(|d| d.total_cmp(&u) == std::cmp::Ordering::Less);
                    report.cf_values[idx]
                };
                let min_eig = bochner_min_eigenvalue::<VerifyError>(
                    |u| Ok(lookup(u)),
                    &grid,
                )?;
                psd.push(PsdRecord {
                    gamma,
                    point_index: j,
                    min_eigenvalue: min_eig,
                    pass: min_eig >= -ver.psd_tol,
                });
            }
        }
    }

    let passed = ks.iter().all(|r| r.pass)
        && cf_distances.iter().all(|r| r.pass)
        && psd.iter().all(|r| r.pass);
    let worst_ks_statistic = ks.iter().map(|r| r.statistic).fold(None, fold_max);
    let worst_cf_distance = cf_distances.iter().map(|r| r.max_distance).fold(None, fold_max);
    let min_psd_eigenvalue = psd
        .iter()
        .map(|r| r.min_eigenvalue)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    Ok(VerificationReport {
        ks,
        cf_distances,
        psd,
        worst_ks_statistic,
        worst_cf_distance,
        min_psd_eigenvalue,
        replicates: sim.replicates,
        cf_grid_size: cf_args.len(),
        passed,
    })
}

fn fold_max(acc: Option<f64>, v: f64) -> Option<f64> {
    Some(acc.map_or(v, |a| a.max(v)))
}
