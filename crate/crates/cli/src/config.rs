//! Run configuration: a TOML file with `[model]`, `[kernel]`, `[sim]` and
//! `[numeric]` tables.
//!
//! ```toml
//! [model]
//! family = "gamma"
//! params = { shape = 2.0, rate = 1.0 }
//!
//! [kernel]
//! family = "exponential"
//! params = { alpha = 0.5, beta = 1.0 }
//!
//! [sim]
//! horizon = 100.0
//! ```
//!
//! Everything in `[sim]` except `horizon`, and all of `[numeric]`, has a
//! default. Unknown keys are rejected.

use std::fmt;

use rhp_core::{KernelSpec, ModelSpec, RhpError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// How full realizations are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    Cluster,
    Thinning,
    /// Cluster construction with equilibrium-delayed immigrants.
    Stationary,
}

impl SimMethod {
    pub fn name(self) -> &'static str {
        match self {
            SimMethod::Cluster => "cluster",
            SimMethod::Thinning => "thinning",
            SimMethod::Stationary => "stationary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Whether the origin counts as an immigrant event.
    #[serde(default = "default_true")]
    pub count_origin: bool,
    #[serde(default = "default_method")]
    pub method: SimMethod,
}

fn default_reps() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_method() -> SimMethod {
    SimMethod::Cluster
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    /// Grid spacing of the renewal-function table.
    pub renewal_step: f64,
    /// Stopping tolerance of the cluster p.g.fl. iteration.
    pub pgfl_tol: f64,
    /// Solver grid spacing; defaults to a thousandth of the support.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pgfl_grid_step: Option<f64>,
    /// Replicates for Monte Carlo p.g.fl. estimates.
    pub pgfl_reps: usize,
    /// Largest renewal count in the truncated renewal p.g.fl.
    pub n_max: usize,
    pub tail_tolerance: f64,
    /// Order of the stationary expansion.
    pub k_max: usize,
    /// Significance level of the diagnostics.
    pub level: f64,
    /// Number of equal windows for the cross-simulator comparison.
    pub windows: usize,
    /// Shifts and window length of the stationarity check.
    pub shifts: Vec<f64>,
    pub window: f64,
    /// Clusters simulated by `cluster-stats`.
    pub clusters: usize,
    pub max_generation: u32,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            renewal_step: 0.01,
            pgfl_tol: 1e-10,
            pgfl_grid_step: None,
            pgfl_reps: 10_000,
            n_max: 100,
            tail_tolerance: 1e-5,
            k_max: 3,
            level: 0.01,
            windows: 4,
            shifts: vec![25.0, 50.0, 100.0, 150.0, 200.0],
            window: 10.0,
            clusters: 100_000,
            max_generation: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub kernel: KernelSpec,
    pub sim: SimConfig,
    #[serde(default)]
    pub numeric: NumericConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// All problems found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub errors: Vec<FieldError>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.errors {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn field_of(prefix: &str, err: &RhpError) -> String {
    match err {
        RhpError::InvalidParameter { name, .. } => format!("{prefix}.params.{name}"),
        RhpError::Supercritical { .. } => format!("{prefix}.params.alpha"),
        _ => format!("{prefix}.params"),
    }
}

/// Parses and validates; every violated constraint is reported.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let field = e
            .span()
            .map(|s| {
                let line = text[..s.start.min(text.len())].lines().count().max(1);
                format!("line {line}")
            })
            .unwrap_or_else(|| "config".into());
        ConfigError {
            errors: vec![FieldError {
                field,
                message: e.message().to_string(),
            }],
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        let mut push = |field: &str, message: String| {
            errors.push(FieldError {
                field: field.into(),
                message,
            })
        };
        if let Err(e) = self.model.build() {
            push(&field_of("model", &e), e.to_string());
        }
        match self.kernel.build() {
            Err(e) => push(&field_of("kernel", &e), e.to_string()),
            Ok(k) => {
                if let Err(e) = k.kernel_mass() {
                    let field = match self.kernel {
                        KernelSpec::Exponential { .. } => "kernel.params.alpha",
                        KernelSpec::Tabulated { .. } => "kernel.params.values",
                    };
                    push(field, e.to_string());
                }
            }
        }
        let s = &self.sim;
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            push("sim.horizon", format!("must be positive and finite, got {}", s.horizon));
        }
        if s.reps == 0 {
            push("sim.reps", "must be at least 1".into());
        }
        let n = &self.numeric;
        for (name, v) in [
            ("numeric.renewal_step", n.renewal_step),
            ("numeric.pgfl_tol", n.pgfl_tol),
            ("numeric.tail_tolerance", n.tail_tolerance),
            ("numeric.window", n.window),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                push(name, format!("must be positive and finite, got {v}"));
            }
        }
        if let Some(g) = n.pgfl_grid_step {
            if !(g > 0.0 && g.is_finite()) {
                push("numeric.pgfl_grid_step", format!("must be positive and finite, got {g}"));
            }
        }
        if !(n.level > 0.0 && n.level < 1.0) {
            push("numeric.level", format!("must lie in (0, 1), got {}", n.level));
        }
        if n.pgfl_reps < 100 {
            push("numeric.pgfl_reps", format!("must be at least 100, got {}", n.pgfl_reps));
        }
        if n.k_max == 0 || n.k_max > 50 {
            push("numeric.k_max", format!("must lie in 1..=50, got {}", n.k_max));
        }
        if n.windows == 0 {
            push("numeric.windows", "must be at least 1".into());
        }
        if n.clusters == 0 {
            push("numeric.clusters", "must be at least 1".into());
        }
        if n.shifts.len() < 2 || !n.shifts.windows(2).all(|w| w[1] > w[0]) || n.shifts[0] < 0.0 {
            push("numeric.shifts", "need at least two increasing nonnegative shifts".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { errors })
        }
    }

    /// Canonical TOML text with every default filled in.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

/// `serialize(parse(text))`: the canonical form of a configuration text.
pub fn normalize(text: &str) -> Result<String, ConfigError> {
    parse_config(text).map(|c| c.to_toml())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
family = "gamma"
params = { shape = 2.0, rate = 1.0 }

[kernel]
family = "exponential"
params = { alpha = 0.5, beta = 1.0 }

[sim]
horizon = 100.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.sim.seed, 0);
        assert!(c.sim.count_origin);
        assert_eq!(c.sim.reps, 1);
        assert_eq!(c.sim.method, SimMethod::Cluster);
        assert_eq!(c.numeric, NumericConfig::default());
    }

    #[test]
    fn round_trip_is_lossless() {
        let c = parse_config(MINIMAL).unwrap();
        let text = c.to_toml();
        assert_eq!(parse_config(&text).unwrap(), c);
        assert_eq!(normalize(&text).unwrap(), text);
        assert_eq!(c.hash(), parse_config(&text).unwrap().hash());
        let tab = MINIMAL.replace(
            r#"family = "gamma"
params = { shape = 2.0, rate = 1.0 }"#,
            r#"family = "tabulated"
params = { grid = [0.0, 1.0, 2.0], values = [0.5, 1.0, 0.0], tail_index = 2.5 }"#,
        );
        let c = parse_config(&tab).unwrap();
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn supercritical_alpha_is_rejected_by_field() {
        let bad = MINIMAL.replace("alpha = 0.5", "alpha = 1.2");
        let e = parse_config(&bad).unwrap_err();
        assert_eq!(e.errors.len(), 1);
        assert_eq!(e.errors[0].field, "kernel.params.alpha");
        assert!(e.errors[0].message.contains("subcriticality"));
    }

    #[test]
    fn all_violations_are_listed() {
        let bad = MINIMAL
            .replace("shape = 2.0", "shape = -1.0")
            .replace("horizon = 100.0", "horizon = -5.0\nreps = 0");
        let e = parse_config(&bad).unwrap_err();
        let fields: Vec<&str> = e.errors.iter().map(|e| e.field.as_str()).collect();
        assert_eq!(fields, vec!["model.params.shape", "sim.horizon", "sim.reps"]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        for bad in [
            MINIMAL.replace("horizon = 100.0", "horizon = 100.0\nhorizn = 3"),
            MINIMAL.replace("beta = 1.0", "beta = 1.0, gamma = 2.0"),
            format!("{MINIMAL}\n[extra]\nx = 1\n"),
            MINIMAL.replace(r#"family = "gamma""#, r#"family = "pareto""#),
        ] {
            let e = parse_config(&bad).unwrap_err();
            assert_eq!(e.errors.len(), 1, "{bad}");
        }
        let e = parse_config(&MINIMAL.replace("beta = 1.0", "beta = 1.0, gamma = 2.0")).unwrap_err();
        assert!(e.errors[0].message.contains("gamma"), "{}", e.errors[0].message);
    }
}
