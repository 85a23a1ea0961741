//! Experiment configuration: JSON file with CLI flag overrides, flags win.
//! The run id is a short hash of the experiment-relevant fields (storage
//! locations do not change the science, so they are excluded).

use hetheat_core::{Medium, MediumError, QuadratureSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// a1, a2, rho1, rho2
    pub medium: [f64; 4],
    pub t: f64,
    /// Horizon T with t in (0, T].
    pub t_horizon: f64,
    pub n_list: Vec<usize>,
    pub m_replicas: usize,
    /// Dyadic level K for the almost-sure CLT experiment.
    pub dyadic_level: u32,
    pub n_paths: usize,
    pub seed: u64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub time_substitution: bool,
    pub output_dir: String,
    pub cache_dir: String,
    pub emit_svg: bool,
    /// kernel-table slice parameters
    pub kernel_u: f64,
    pub kernel_x: f64,
    /// "lo:hi:step"
    pub z_range: String,
    /// noise-grid oracle discretization
    pub oracle_ds: f64,
    pub oracle_dy: f64,
    pub oracle_half_width: f64,
    pub oracle_replicas: usize,
    /// replicas exported by the `sample` subcommand
    pub sample_rows: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            medium: [1.0, 4.0, 1.0, 2.0],
            t: 1.0,
            t_horizon: 2.0,
            n_list: vec![16, 32, 64, 128, 256, 512],
            m_replicas: 10_000,
            dyadic_level: 12,
            n_paths: 8,
            seed: 7,
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2048,
            time_substitution: true,
            output_dir: "output".into(),
            cache_dir: "cache".into(),
            emit_svg: true,
            kernel_u: 0.5,
            kernel_x: 0.0,
            z_range: "-3:3:0.1".into(),
            oracle_ds: 4e-4,
            oracle_dy: 8e-3,
            oracle_half_width: 6.0,
            oracle_replicas: 2000,
            sample_rows: 64,
        }
    }
}

impl ExperimentConfig {
    pub fn medium(&self) -> Result<Medium, MediumError> {
        Medium::new(
            self.medium[0],
            self.medium[1],
            self.medium[2],
            self.medium[3],
        )
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_subdivisions: self.max_subdivisions,
            time_substitution: self.time_substitution,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.medium().map_err(|e| CliError::Config {
            field: "medium",
            message: e.to_string(),
        })?;
        if !(self.t > 0.0 && self.t <= self.t_horizon) {
            return Err(CliError::Config {
                field: "t",
                message: format!("t must lie in (0, {}], got {}", self.t_horizon, self.t),
            });
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config {
                field: "n_list",
                message: format!(
                    "grid sizes must be nonempty and strictly increasing, got {:?}",
                    self.n_list
                ),
            });
        }
        if self.dyadic_level == 0 || self.dyadic_level > 13 {
            return Err(CliError::Config {
                field: "dyadic_level",
                message: format!("dyadic level must be in 1..=13, got {}", self.dyadic_level),
            });
        }
        if self.m_replicas < 1000 {
            return Err(CliError::Config {
                field: "m_replicas",
                message: format!("need at least 1000 replicas, got {}", self.m_replicas),
            });
        }
        if self.n_paths == 0 {
            return Err(CliError::Config {
                field: "n_paths",
                message: "need at least one path".into(),
            });
        }
        self.quadrature_spec()
            .validate()
            .map_err(|e| CliError::Config {
                field: "rel_tol/abs_tol/max_subdivisions",
                message: e.to_string(),
            })?;
        self.parse_z_range()?;
        if !(self.oracle_ds > 0.0 && self.oracle_dy > 0.0 && self.oracle_half_width > 0.0) {
            return Err(CliError::Config {
                field: "oracle_ds/oracle_dy/oracle_half_width",
                message: "oracle discretization steps must be positive".into(),
            });
        }
        Ok(())
    }

    /// Parse "lo:hi:step" into a z grid.
    pub fn parse_z_range(&self) -> Result<Vec<f64>, CliError> {
        let parts: Vec<&str> = self.z_range.split(':').collect();
        let bad = |message: String| CliError::Config {
            field: "z_range",
            message,
        };
        if parts.len() != 3 {
            return Err(bad(format!("expected lo:hi:step, got {:?}", self.z_range)));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("{e} in {:?}", self.z_range)))?;
        let (lo, hi, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0 && hi >= lo) {
            return Err(bad(format!(
                "need hi >= lo and step > 0, got {:?}",
                self.z_range
            )));
        }
        let count = ((hi - lo) / step).round() as usize + 1;
        Ok((0..count).map(|i| lo + step * i as f64).collect())
    }

    /// Short hash of the experiment-relevant configuration (storage paths
    /// and plotting toggles excluded).
    pub fn run_id(&self) -> String {
        let mut normalized = serde_json::to_value(self).expect("config serializes");
        let obj = normalized.as_object_mut().unwrap();
        obj.remove("output_dir");
        obj.remove("cache_dir");
        obj.remove("emit_svg");
        let canonical = serde_json::to_string(&normalized).expect("canonical json");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(4).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        PathBuf::from(&self.output_dir).join(self.run_id())
    }
}

/// Flag-level overrides; every provided flag wins over the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// JSON config file to start from.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Medium coefficients a1,a2,rho1,rho2.
    #[arg(long, value_delimiter = ',', global = true)]
    pub medium: Option<Vec<f64>>,
    /// Fixed time of the spatial slice.
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Grid sizes, comma separated.
    #[arg(long, value_delimiter = ',', global = true)]
    pub n: Option<Vec<usize>>,
    /// Replica count for Monte Carlo experiments.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Dyadic level K.
    #[arg(long, global = true)]
    pub k: Option<u32>,
    /// Number of independent paths for the ASCLT run.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true)]
    pub abs_tol: Option<f64>,
    /// Output directory (artifacts land in <out>/<run-id>/).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Gram cache directory (HETHEAT_CACHE_DIR overrides the config too).
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Skip SVG plots.
    #[arg(long, global = true)]
    pub no_svg: bool,
    /// kernel-table: time argument of the slice.
    #[arg(long, global = true)]
    pub u: Option<f64>,
    /// kernel-table: source position.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x: Option<f64>,
    /// kernel-table: z sweep as lo:hi:step.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub z_range: Option<String>,
}

/// Resolve the effective config: defaults <- file <- environment <- flags.
pub fn resolve(overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut config = match &overrides.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
                field: "config",
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| CliError::Config {
                field: "config",
                message: format!("invalid config {}: {e}", path.display()),
            })?
        }
        None => ExperimentConfig::default(),
    };
    if let Ok(dir) = std::env::var("HETHEAT_CACHE_DIR") {
        if !dir.is_empty() {
            config.cache_dir = dir;
        }
    }
    if let Some(m) = &overrides.medium {
        if m.len() != 4 {
            return Err(CliError::Config {
                field: "medium",
                message: format!("expected a1,a2,rho1,rho2 (4 values), got {}", m.len()),
            });
        }
        config.medium = [m[0], m[1], m[2], m[3]];
    }
    if let Some(t) = overrides.t {
        config.t = t;
        if config.t_horizon < t {
            config.t_horizon = t;
        }
    }
    if let Some(n) = &overrides.n {
        config.n_list = n.clone();
    }
    if let Some(m) = overrides.m {
        config.m_replicas = m;
    }
    if let Some(k) = overrides.k {
        config.dyadic_level = k;
    }
    if let Some(p) = overrides.paths {
        config.n_paths = p;
    }
    if let Some(s) = overrides.seed {
        config.seed = s;
    }
    if let Some(v) = overrides.rel_tol {
        config.rel_tol = v;
    }
    if let Some(v) = overrides.abs_tol {
        config.abs_tol = v;
    }
    if let Some(dir) = &overrides.out {
        config.output_dir = dir.display().to_string();
    }
    if let Some(dir) = &overrides.cache {
        config.cache_dir = dir.display().to_string();
    }
    if overrides.no_svg {
        config.emit_svg = false;
    }
    if let Some(u) = overrides.u {
        config.kernel_u = u;
    }
    if let Some(x) = overrides.x {
        config.kernel_x = x;
    }
    if let Some(z) = &overrides.z_range {
        config.z_range = z.clone();
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_id_ignores_storage_locations() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            output_dir: "elsewhere".into(),
            cache_dir: "other-cache".into(),
            emit_svg: false,
            ..Default::default()
        };
        assert_eq!(a.run_id(), b.run_id());
        let c = ExperimentConfig {
            seed: 8,
            ..Default::default()
        };
        assert_ne!(a.run_id(), c.run_id());
    }

    #[test]
    fn validation_names_the_field() {
        let c = ExperimentConfig {
            medium: [1.0, -1.0, 1.0, 1.0],
            ..Default::default()
        };
        match c.validate() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "medium"),
            other => panic!("{other:?}"),
        }
        let c = ExperimentConfig {
            n_list: vec![16, 16],
            ..Default::default()
        };
        assert!(matches!(
            c.validate(),
            Err(CliError::Config {
                field: "n_list",
                ..
            })
        ));
        // t above the default horizon 2.0
        let c = ExperimentConfig {
            t: 5.0,
            ..Default::default()
        };
        assert!(matches!(
            c.validate(),
            Err(CliError::Config { field: "t", .. })
        ));
    }

    #[test]
    fn z_range_parses() {
        let mut c = ExperimentConfig {
            z_range: "-1:1:0.5".into(),
            ..Default::default()
        };
        let grid = c.parse_z_range().unwrap();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], -1.0);
        assert_eq!(grid[4], 1.0);
        c.z_range = "oops".into();
        assert!(c.parse_z_range().is_err());
    }
}
