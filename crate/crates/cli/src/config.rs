//! Experiment configuration, read from a flat TOML file of `key = value`
//! lines.

use std::path::{Path, PathBuf};

use prising_core::audit::MAX_EXHAUSTIVE_N;
use prising_core::estimator::{DEFAULT_BETA_MAX, DEFAULT_TOL};
use prising_core::ising::DEFAULT_SWEEPS;
use prising_core::{PrivacyBudget, SolverSettings};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFamily {
    ErdosRenyi,
    Regular,
    EdgeList,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    ScaledAdjacency,
    NormalizedLaplacian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRuleName {
    OneOverN,
}

/// `delta = "one_over_n"` or `delta = 0.001`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DeltaRule {
    Fixed(f64),
    Named(DeltaRuleName),
}

impl DeltaRule {
    pub fn delta(&self, n: usize) -> f64 {
        match *self {
            DeltaRule::Fixed(d) => d,
            DeltaRule::Named(DeltaRuleName::OneOverN) => 1.0 / n.max(1) as f64,
        }
    }
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::Named(DeltaRuleName::OneOverN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditModeName {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_family")]
    pub graph_family: GraphFamily,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingKind,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    /// Edge probability; takes precedence over `p_exponent`.
    pub p: Option<f64>,
    /// `alpha` in `p = n^-alpha`.
    pub p_exponent: Option<f64>,
    /// Densities swept by `mse-density`.
    #[serde(default)]
    pub p_exponent_grid: Vec<f64>,
    /// Degree of regular graphs.
    pub degree: Option<usize>,
    /// Divisor of the adjacency matrix. Defaults to `n p` for Erdos-Renyi,
    /// the degree for regular graphs and the mean degree for edge lists.
    pub scale: Option<f64>,
    pub edge_list: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    /// Nodes with at least this many neighbours are removed before use.
    pub prune_max_degree: Option<usize>,
    #[serde(default)]
    pub drop_isolated: bool,
    #[serde(default)]
    pub beta_grid: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    #[serde(default)]
    pub delta: DeltaRule,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta_max")]
    pub beta_max: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// One graph per grid point instead of one per replicate.
    #[serde(default)]
    pub fix_graph: bool,

    #[serde(default = "default_audit_instances")]
    pub audit_instances: usize,
    #[serde(default = "default_audit_n")]
    pub audit_n: usize,
    #[serde(default = "default_audit_p")]
    pub audit_p: f64,
    #[serde(default = "default_audit_mode")]
    pub audit_mode: AuditModeName,
    #[serde(default = "default_audit_samples")]
    pub audit_samples: usize,
    #[serde(default = "default_audit_grid")]
    pub audit_grid: Vec<f64>,
    /// Replaces the calibrated `Delta` in the Jacobian audit (negative
    /// controls).
    pub audit_delta_cap: Option<f64>,
    #[serde(default)]
    pub include_zero_coupling: bool,
}

fn default_family() -> GraphFamily {
    GraphFamily::ErdosRenyi
}
fn default_coupling() -> CouplingKind {
    CouplingKind::ScaledAdjacency
}
fn default_replicates() -> usize {
    500
}
fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}
fn default_beta_max() -> f64 {
    DEFAULT_BETA_MAX
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_audit_instances() -> usize {
    10
}
fn default_audit_n() -> usize {
    8
}
fn default_audit_p() -> f64 {
    0.5
}
fn default_audit_mode() -> AuditModeName {
    AuditModeName::Exhaustive
}
fn default_audit_samples() -> usize {
    10_000
}
fn default_audit_grid() -> Vec<f64> {
    (0..=12).map(|k| k as f64 * 0.25).collect()
}

/// Which subcommand the config is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    BetaSweep,
    MseN,
    MseDensity,
    RealData,
    Audit,
}

impl Study {
    pub fn id(self) -> &'static str {
        match self {
            Study::BetaSweep => "beta_sweep",
            Study::MseN => "mse_n",
            Study::MseDensity => "mse_density",
            Study::RealData => "real_data",
            Study::Audit => "audit",
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// `base` with the keys of `overrides` replaced or added.
    pub fn from_toml_with(base: &str, overrides: &str) -> Result<Self> {
        let parse = |text: &str| {
            text.parse::<toml::Table>()
                .map_err(|e| config_err(e.to_string()))
        };
        let mut table = parse(base)?;
        table.extend(parse(overrides)?);
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| config_err(e.to_string()))
    }

    /// Reads a config file. Relative data paths in it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            config_err(format!("cannot read {}: {e}", path.display()))
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.edge_list, &mut cfg.outcomes].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn settings(&self) -> Result<SolverSettings> {
        Ok(SolverSettings::new(self.beta_max, self.tol)?)
    }

    pub fn budget(&self, epsilon: f64, n: usize) -> Result<PrivacyBudget> {
        Ok(PrivacyBudget::new(epsilon, self.delta.delta(n))?)
    }

    /// Edge probability for an Erdos-Renyi graph on `n` nodes.
    pub fn edge_probability(&self, n: usize) -> Result<f64> {
        match (self.p, self.p_exponent) {
            (Some(p), _) => Ok(p),
            (None, Some(alpha)) => Ok((n as f64).powf(-alpha)),
            (None, None) => Err(config_err("erdos_renyi needs `p` or `p_exponent`")),
        }
    }

    /// Checks everything the given study reads. Semantic checks of numeric
    /// ranges that the core library performs are left to it.
    pub fn validate(&self, study: Study) -> Result<()> {
        if self.epsilon_grid.is_empty() {
            return Err(config_err("epsilon_grid must not be empty"));
        }
        if self.epsilon_grid.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(config_err("epsilon_grid entries must be positive and finite"));
        }
        if let DeltaRule::Fixed(d) = self.delta {
            if !(0.0..1.0).contains(&d) {
                return Err(config_err(format!("delta must lie in [0, 1), got {d}")));
            }
        }
        if self.replicates == 0 {
            return Err(config_err("replicates must be at least 1"));
        }
        self.settings()?;
        match study {
            Study::BetaSweep | Study::MseN | Study::MseDensity => self.validate_simulation(study),
            Study::RealData => {
                if self.edge_list.is_none() || self.outcomes.is_none() {
                    return Err(config_err("real-data needs `edge_list` and `outcomes`"));
                }
                Ok(())
            }
            Study::Audit => self.validate_audit(),
        }
    }

    fn validate_simulation(&self, study: Study) -> Result<()> {
        if self.beta_grid.is_empty() {
            return Err(config_err("beta_grid must not be empty"));
        }
        if self.beta_grid.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
            return Err(config_err("beta_grid entries must be non-negative and finite"));
        }
        if self.sweeps == 0 {
            return Err(config_err("sweeps must be at least 1"));
        }
        match self.graph_family {
            GraphFamily::EdgeList => {
                if self.edge_list.is_none() {
                    return Err(config_err("graph_family = \"edge_list\" needs `edge_list`"));
                }
                if study != Study::BetaSweep {
                    return Err(config_err(format!(
                        "{} varies the graph and cannot use a fixed edge list",
                        study.id()
                    )));
                }
                return Ok(());
            }
            GraphFamily::Regular => {
                if self.degree.is_none() {
                    return Err(config_err("graph_family = \"regular\" needs `degree`"));
                }
                if study == Study::MseDensity {
                    return Err(config_err("mse-density sweeps Erdos-Renyi edge densities"));
                }
            }
            GraphFamily::ErdosRenyi => {
                if study != Study::MseDensity && self.p.is_none() && self.p_exponent.is_none() {
                    return Err(config_err("erdos_renyi needs `p` or `p_exponent`"));
                }
            }
        }
        if self.n_grid.is_empty() {
            return Err(config_err("n_grid must not be empty"));
        }
        if self.n_grid.contains(&0) {
            return Err(config_err("n_grid entries must be positive"));
        }
        match study {
            Study::MseN if self.n_grid.len() < 2 => {
                Err(config_err("mse-n needs at least two entries in n_grid"))
            }
            Study::MseDensity if self.p_exponent_grid.is_empty() => {
                Err(config_err("mse-density needs a non-empty p_exponent_grid"))
            }
            _ => Ok(()),
        }
    }

    fn validate_audit(&self) -> Result<()> {
        if self.audit_grid.is_empty() {
            return Err(config_err("audit_grid must not be empty"));
        }
        if self.audit_n == 0 {
            return Err(config_err("audit_n must be positive"));
        }
        match self.audit_mode {
            AuditModeName::Exhaustive if self.audit_n > MAX_EXHAUSTIVE_N => Err(config_err(
                format!("exhaustive audits need audit_n <= {MAX_EXHAUSTIVE_N}"),
            )),
            AuditModeName::Sampled if self.audit_samples == 0 => {
                Err(config_err("audit_samples must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        n_grid = [50]
        p_exponent = 0.3333
        beta_grid = [0.5, 1.5]
        epsilon_grid = [5.0]
    "#;

    #[test]
    fn defaults_follow_the_experiments() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.replicates, 500);
        assert_eq!(cfg.sweeps, 1000);
        assert_eq!(cfg.graph_family, GraphFamily::ErdosRenyi);
        assert_eq!(cfg.delta, DeltaRule::Named(DeltaRuleName::OneOverN));
        assert!(!cfg.fix_graph);
        cfg.validate(Study::BetaSweep).unwrap();
    }

    #[test]
    fn delta_rule_parses_both_forms() {
        let fixed = ExperimentConfig::from_toml(&format!("{MINIMAL}\ndelta = 0.01")).unwrap();
        assert_eq!(fixed.delta.delta(100), 0.01);
        let rule =
            ExperimentConfig::from_toml(&format!("{MINIMAL}\ndelta = \"one_over_n\"")).unwrap();
        assert_eq!(rule.delta.delta(250), 1.0 / 250.0);
        assert!(ExperimentConfig::from_toml(&format!("{MINIMAL}\ndelta = \"half\"")).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml(&format!("{MINIMAL}\nbeta = 1.0")).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn empty_grids_and_zero_replicates_fail_validation() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.beta_grid.clear();
        assert!(cfg.validate(Study::BetaSweep).is_err());

        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.replicates = 0;
        assert!(cfg.validate(Study::BetaSweep).is_err());

        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert!(cfg.validate(Study::MseN).is_err(), "single n");
        assert!(cfg.validate(Study::MseDensity).is_err(), "no alpha grid");
        assert!(cfg.validate(Study::RealData).is_err(), "no files");
    }

    #[test]
    fn edge_probability_prefers_explicit_p() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert!((cfg.edge_probability(1000).unwrap() - 0.1).abs() < 1e-3);
        cfg.p = Some(0.25);
        assert_eq!(cfg.edge_probability(1000).unwrap(), 0.25);
    }

    #[test]
    fn data_paths_resolve_against_the_config_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("real.toml");
        std::fs::write(
            &path,
            "edge_list = \"g.txt\"\noutcomes = \"/abs/s.txt\"\nepsilon_grid = [1.0]",
        )
        .unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.edge_list.unwrap(), dir.path().join("g.txt"));
        assert_eq!(cfg.outcomes.unwrap(), PathBuf::from("/abs/s.txt"));
    }

    #[test]
    fn exhaustive_audit_size_is_capped() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.validate(Study::Audit).unwrap();
        cfg.audit_n = MAX_EXHAUSTIVE_N + 1;
        assert!(cfg.validate(Study::Audit).is_err());
        cfg.audit_mode = AuditModeName::Sampled;
        cfg.validate(Study::Audit).unwrap();
    }
}
