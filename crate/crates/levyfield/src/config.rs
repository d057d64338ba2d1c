//! JSON model configuration: one document describing the triplet, the
//! kernel, the field points, and every numeric knob. Parsing validates
//! structure; [`ModelConfig::validate`] checks the cross-field rules and
//! names the offending field in its error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::CharacteristicTriplet;
use crate::kernels::Kernel;
use crate::quad::QuadConfig;
use crate::simulate::{SimulationConfig, MAX_CELLS};
use crate::verify::{VerificationConfig, MAX_PSD_POINTS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("could not parse configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("configuration field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

/// Where to evaluate the exact characteristic function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CfGrid {
    /// Use these argument vectors verbatim, one weight per field point.
    Explicit { arguments: Vec<Vec<f64>> },
    /// For each field point, `count` evenly spaced scalar weights in
    /// [-limit, limit] applied to that point alone. The zero argument is
    /// kept once.
    Axis { limit: f64, count: usize },
    /// Deterministic pseudo-random directions on the sphere of the given
    /// radius in weight space.
    Sphere { radius: f64, count: usize },
}

impl Default for CfGrid {
    fn default() -> Self {
        CfGrid::Axis { limit: 3.0, count: 11 }
    }
}

impl CfGrid {
    fn validate(&self, num_points: usize) -> Result<(), ConfigError> {
        match self {
            CfGrid::Explicit { arguments } => {
                if arguments.is_empty() {
                    return Err(invalid("cf_grid.arguments", "must not be empty"));
                }
                for (i, arg) in arguments.iter().enumerate() {
                    if arg.len() != num_points {
                        return Err(invalid(
                            "cf_grid.arguments",
                            format!(
                                "argument {i} has {} weights, the field has {num_points} points",
                                arg.len()
                            ),
                        ));
                    }
                    if arg.iter().any(|v| !v.is_finite()) {
                        return Err(invalid("cf_grid.arguments", format!("argument {i} is not finite")));
                    }
                }
                Ok(())
            }
            CfGrid::Axis { limit, count } => {
                if !(limit.is_finite() && *limit > 0.0) {
                    return Err(invalid("cf_grid.limit", "must be positive and finite"));
                }
                if *count == 0 {
                    return Err(invalid("cf_grid.count", "must be at least 1"));
                }
                Ok(())
            }
            CfGrid::Sphere { radius, count } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(invalid("cf_grid.radius", "must be positive and finite"));
                }
                if *count == 0 {
                    return Err(invalid("cf_grid.count", "must be at least 1"));
                }
                Ok(())
            }
        }
    }

    /// Expand into concrete argument vectors for a field with
    /// `num_points` points. Deterministic: the sphere variant draws its
    /// directions from a fixed stream.
    pub fn arguments(&self, num_points: usize) -> Vec<Vec<f64>> {
        match self {
            CfGrid::Explicit { arguments } => arguments.clone(),
            CfGrid::Axis { limit, count } => {
                let scalars: Vec<f64> = if *count == 1 {
                    vec![0.0]
                } else {
                    (0..*count)
                        .map(|i| -limit + 2.0 * limit * i as f64 / (*count - 1) as f64)
                        .collect()
                };
                let mut out = Vec::new();
                let mut zero_seen = false;
                for j in 0..num_points {
                    for &u in &scalars {
                        if u == 0.0 {
                            if zero_seen {
                                continue;
                            }
                            zero_seen = true;
                        }
                        let mut x = vec![0.0; num_points];
                        x[j] = u;
                        out.push(x);
                    }
                }
                out
            }
            CfGrid::Sphere { radius, count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_D14E);
                let mut out = Vec::with_capacity(*count);
                while out.len() < *count {
                    let v: Vec<f64> =
                        (0..num_points).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    if norm < 1e-12 {
                        continue;
                    }
                    out.push(v.iter().map(|a| a * radius / norm).collect());
                }
                out
            }
        }
    }
}

/// The full model document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub triplet: CharacteristicTriplet,
    pub kernel: Kernel,
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub cf_grid: CfGrid,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub quadrature: QuadConfig,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ModelConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let dim = self.triplet.window().dim();
        if self.points.is_empty() {
            return Err(invalid("points", "must contain at least one field point"));
        }
        let point_dim = self.points[0].len();
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != point_dim {
                return Err(invalid(
                    "points",
                    format!("point {i} has {} coordinates, point 0 has {point_dim}", p.len()),
                ));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(invalid("points", format!("point {i} is not finite")));
            }
        }
        self.kernel
            .validate(dim, point_dim)
            .map_err(|e| invalid("kernel", e.to_string()))?;
        self.cf_grid.validate(self.points.len())?;

        if !(self.simulation.epsilon > 0.0 && self.simulation.epsilon <= 1.0) {
            return Err(invalid("simulation.epsilon", "must lie in (0, 1]"));
        }
        if self.simulation.replicates == 0 {
            return Err(invalid("simulation.replicates", "must be at least 1"));
        }
        if self.simulation.cells_per_dim.len() != dim {
            return Err(invalid(
                "simulation.cells_per_dim",
                format!(
                    "has {} entries, the window dimension is {dim}",
                    self.simulation.cells_per_dim.len()
                ),
            ));
        }
        if self.simulation.cells_per_dim.contains(&0) {
            return Err(invalid("simulation.cells_per_dim", "entries must be positive"));
        }
        let cells: usize = self.simulation.cells_per_dim.iter().product();
        if cells > MAX_CELLS {
            return Err(invalid(
                "simulation.cells_per_dim",
                format!("{cells} cells exceed the maximum {MAX_CELLS}"),
            ));
        }

        self.quadrature.validate().map_err(|reason| invalid("quadrature", reason))?;

        let ver = &self.verification;
        if ver.m_list.is_empty() {
            return Err(invalid("verification.m_list", "must contain at least one fold count"));
        }
        if ver.m_list.contains(&0) {
            return Err(invalid("verification.m_list", "fold counts must be at least 1"));
        }
        if !(ver.ks_alpha > 0.0 && ver.ks_alpha < 1.0) {
            return Err(invalid("verification.ks_alpha", "must lie in (0, 1)"));
        }
        if ver.cf_distance_max.is_nan() || ver.cf_distance_max <= 0.0 {
            return Err(invalid("verification.cf_distance_max", "must be positive"));
        }
        if ver.psd_points == 0 || ver.psd_points > MAX_PSD_POINTS {
            return Err(invalid(
                "verification.psd_points",
                format!("must lie in 1..={MAX_PSD_POINTS}"),
            ));
        }
        if !(ver.psd_limit.is_finite() && ver.psd_limit > 0.0) {
            return Err(invalid("verification.psd_limit", "must be positive and finite"));
        }
        if ver.psd_gammas.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(invalid("verification.psd_gammas", "powers must be positive and finite"));
        }
        if ver.psd_tol.is_nan() || ver.psd_tol < 0.0 {
            return Err(invalid("verification.psd_tol", "must be nonnegative"));
        }
        Ok(())
    }

    /// The concrete characteristic-function argument grid.
    pub fn cf_arguments(&self) -> Vec<Vec<f64>> {
        self.cf_grid.arguments(self.points.len())
    }
}
