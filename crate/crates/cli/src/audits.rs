//! Batch runs of the privacy audits over random instances.

use prising_core::audit::{
    audit_density_ratio, audit_jacobian_ratio, audit_sensitivity, AuditMode, SensitivityReport,
};
use prising_core::graph::{generate_erdos_renyi, generate_regular};
use prising_core::rng::derive_seed;
use prising_core::CouplingMatrix;

use crate::config::{AuditModeName, ExperimentConfig, GraphFamily, Study};
use crate::error::{CliError, Result};
use crate::rows::AuditRow;
use crate::simulate::{build_coupling, load_network, mean_degree};

const AUDIT_STREAM: u64 = 5;

fn instances(cfg: &ExperimentConfig) -> Result<Vec<CouplingMatrix>> {
    let mut out = Vec::new();
    match cfg.graph_family {
        GraphFamily::EdgeList => {
            let network = load_network(cfg)?.network;
            out.push(build_coupling(cfg, &network, mean_degree(&network))?);
        }
        GraphFamily::ErdosRenyi => {
            for i in 0..cfg.audit_instances {
                let seed = derive_seed(cfg.seed, &[AUDIT_STREAM, i as u64]);
                let g = generate_erdos_renyi(cfg.audit_n, cfg.audit_p, seed)?;
                out.push(build_coupling(cfg, &g, cfg.audit_n as f64 * cfg.audit_p)?);
            }
        }
        GraphFamily::Regular => {
            let d = cfg
                .degree
                .ok_or_else(|| CliError::Config("graph_family = \"regular\" needs `degree`".into()))?;
            for i in 0..cfg.audit_instances {
                let seed = derive_seed(cfg.seed, &[AUDIT_STREAM, i as u64]);
                let g = generate_regular(cfg.audit_n, d, seed)?;
                out.push(build_coupling(cfg, &g, d as f64)?);
            }
        }
    }
    if cfg.include_zero_coupling {
        out.push(CouplingMatrix::zeros(cfg.audit_n));
    }
    Ok(out)
}

fn row(
    instance: usize,
    name: &str,
    n: usize,
    budget: Option<(f64, f64)>,
    report: &SensitivityReport,
) -> AuditRow {
    AuditRow {
        instance,
        audit_name: name.to_string(),
        n,
        epsilon: budget.map(|b| b.0),
        delta: budget.map(|b| b.1),
        checked: report.checked,
        worst_gap: report.worst_gap,
        bound: report.bound,
        violations: report.violations,
        excluded: report.excluded,
        excluded_exceeding: report.excluded_exceeding,
        pass: report.pass,
    }
}

/// Sensitivity audit per instance, then Jacobian-ratio and density-ratio
/// audits per instance and budget.
pub fn run_audits(cfg: &ExperimentConfig) -> Result<Vec<AuditRow>> {
    cfg.validate(Study::Audit)?;
    let mode = match cfg.audit_mode {
        AuditModeName::Exhaustive => AuditMode::Exhaustive,
        AuditModeName::Sampled => AuditMode::Sampled {
            samples: cfg.audit_samples,
        },
    };
    let grid = &cfg.audit_grid;
    let mut rows = Vec::new();
    for (i, coupling) in instances(cfg)?.iter().enumerate() {
        let n = coupling.n();
        let key = |audit: u64, e: u64| derive_seed(cfg.seed, &[AUDIT_STREAM, i as u64, audit, e]);
        let report = audit_sensitivity(coupling, grid, mode, key(0, 0))?;
        rows.push(row(i, "sensitivity", n, None, &report));
        for (e, &epsilon) in cfg.epsilon_grid.iter().enumerate() {
            let budget = cfg.budget(epsilon, n)?;
            let pair = Some((epsilon, budget.delta()));
            let report = audit_jacobian_ratio(
                coupling,
                budget,
                cfg.audit_delta_cap,
                grid,
                mode,
                key(1, e as u64),
            )?;
            rows.push(row(i, "jacobian_ratio", n, pair, &report));
            let report = audit_density_ratio(coupling, budget, grid, mode, key(2, e as u64))?;
            rows.push(row(i, "density_ratio", n, pair, &report));
        }
    }
    Ok(rows)
}

/// One line per row, for the terminal.
pub fn format_report(rows: &[AuditRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let budget = match (r.epsilon, r.delta) {
            (Some(e), Some(d)) => format!(" eps={e} delta={d:.3e}"),
            _ => String::new(),
        };
        out.push_str(&format!(
            "{} instance {} {} n={}{}: worst {:.6e} vs bound {:.6e} over {} checks, {} violation(s)\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.instance,
            r.audit_name,
            r.n,
            budget,
            r.worst_gap,
            r.bound,
            r.checked,
            r.violations,
        ));
    }
    out
}
