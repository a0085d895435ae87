use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::feynman_kac::{CostPair, Running, Sampling, Terminal};
use crate::functionals::{MollifierFamily, SausageFunctional};
use crate::occupation::{OccupationMeasure, TimeGrid};

/// Every violated constraint of a configuration.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration: {}", .violations.join("; "))]
pub struct ConfigError {
    pub violations: Vec<String>,
}

/// Cost specification of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// `f = running`, `g = terminal`
    Constant { running: f64, terminal: f64 },
    /// `g(x) = lambda . x`
    Linear { lambda: Vec<f64> },
    /// `g = <mu, phi>` with `phi` a plateau bump
    Cylindrical {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
        amplitude: f64,
    },
    /// `g = g_l` with the mollifier settings of the config
    Sausage,
    /// `g = -m(S)` of the path polylines
    ExactSausage { radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub level: u32,
    pub cutoff_inner: f64,
    pub cutoff_outer: f64,
    pub quad_step: f64,
    /// cell size for exact sausage volumes
    pub grid_h: f64,
}

impl Default for MollifierSpec {
    fn default() -> Self {
        Self {
            level: 4,
            cutoff_inner: 2.0,
            cutoff_outer: 4.0,
            quad_step: 0.05,
            grid_h: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub n_samples: usize,
    pub n_inner: usize,
    pub n_traj: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    /// JSON-lines result log
    pub log: Option<PathBuf>,
    /// optional CSV projection
    pub csv: Option<PathBuf>,
}

/// One experiment, serialised as a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_particles: usize,
    pub dim: usize,
    pub horizon: f64,
    pub dt: f64,
    /// start time of value and drift queries
    #[serde(default)]
    pub t: f64,
    /// starting point (flat `n * d`); the origin when absent
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    /// base measure as `[[point, weight], ..]`; empty when absent
    #[serde(default)]
    pub base: Vec<(Vec<f64>, f64)>,
    pub cost: CostSpec,
    #[serde(default)]
    pub mollifier: MollifierSpec,
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// SHA-256 of the JSON serialisation of `value`, hex encoded.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("serialisable value");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl ExperimentConfig {
    /// Checks positivity, dimensions and that `dt` divides the horizon.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        if self.n_particles == 0 {
            v.push("n_particles must be positive".to_string());
        }
        if self.dim == 0 {
            v.push("dim must be positive".to_string());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            v.push("horizon must be positive".to_string());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            v.push("dt must be positive".to_string());
        } else if !(self.t >= 0.0 && self.t <= self.horizon) {
            v.push("t must lie in [0, horizon]".to_string());
        } else if TimeGrid::uniform(self.horizon, self.dt).is_err()
            || TimeGrid::uniform(self.horizon - self.t, self.dt).is_err()
        {
            v.push("dt must divide horizon and horizon - t".to_string());
        }
        if let Some(x) = &self.start {
            if x.len() != self.n_particles * self.dim {
                v.push(format!("start has {} coordinates, expected n * d = {}", x.len(), self.n_particles * self.dim));
            }
        }
        if self.base.iter().any(|(p, w)| p.len() != self.dim || *w < 0.0) {
            v.push("base atoms need dimension d and nonnegative weight".to_string());
        }
        if self.sampling.n_samples == 0 {
            v.push("n_samples must be positive".to_string());
        }
        let m = &self.mollifier;
        if m.level == 0 {
            v.push("mollifier level must be positive".to_string());
        }
        if !(m.cutoff_inner > 1.0 && m.cutoff_outer > m.cutoff_inner) {
            v.push("mollifier cutoffs must satisfy 1 < inner < outer".to_string());
        }
        if !(m.quad_step > 0.0) {
            v.push("quad_step must be positive".to_string());
        }
        if !(m.grid_h > 0.0) {
            v.push("grid_h must be positive".to_string());
        }
        match &self.cost {
            CostSpec::Linear { lambda } if lambda.len() != self.n_particles * self.dim => {
                v.push("lambda needs n * d coefficients".to_string())
            }
            CostSpec::Cylindrical { center, inner, outer, .. }
                if center.len() != self.dim || !(*inner >= 0.0 && outer > inner) =>
            {
                v.push("cylindrical bump needs a d-dimensional center and 0 <= inner < outer".to_string())
            }
            CostSpec::ExactSausage { radius } if !(*radius > 0.0) => {
                v.push("sausage radius must be positive".to_string())
            }
            _ => {}
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations: v })
        }
    }

    /// SHA-256 of the canonical JSON serialisation, hex encoded.
    pub fn config_hash(&self) -> String {
        content_hash(self)
    }

    pub fn start_point(&self) -> Vec<f64> {
        self.start
            .clone()
            .unwrap_or_else(|| vec![0.0; self.n_particles * self.dim])
    }

    pub fn base_measure(&self) -> OccupationMeasure<f64> {
        OccupationMeasure::from_atoms(self.dim, self.base.clone()).expect("validated base measure")
    }

    pub fn sausage(&self) -> SausageFunctional<f64> {
        let m = &self.mollifier;
        let fam = MollifierFamily::new(m.level, m.cutoff_inner, m.cutoff_outer).expect("validated mollifier");
        SausageFunctional::new(fam, m.quad_step).expect("validated quadrature step")
    }

    pub fn costs(&self) -> CostPair<f64> {
        let terminal = match &self.cost {
            CostSpec::Constant { running, terminal } => {
                return CostPair::new(Running::Constant(*running), Terminal::Constant(*terminal))
            }
            CostSpec::Linear { lambda } => Terminal::Linear(lambda.clone()),
            CostSpec::Cylindrical {
                center,
                inner,
                outer,
                amplitude,
            } => {
                let phi = crate::functionals::Plateau::new(center.clone(), *inner, *outer, *amplitude);
                Terminal::Cylindrical(crate::functionals::CylindricalFunctional::linear(std::sync::Arc::new(phi)))
            }
            CostSpec::Sausage => Terminal::Sausage(self.sausage()),
            CostSpec::ExactSausage { radius } => Terminal::ExactSausage {
                radius: *radius,
                grid_h: self.mollifier.grid_h,
            },
        };
        CostPair::terminal_only(terminal)
    }

    pub fn sampling(&self) -> Sampling<f64> {
        Sampling {
            n_samples: self.sampling.n_samples,
            dt: self.dt,
            seed: self.sampling.seed,
        }
    }
}
