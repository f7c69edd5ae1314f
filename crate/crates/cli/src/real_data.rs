//! Estimation on an observed network with observed outcomes.

use std::fs::File;
use std::io::BufReader;

use log::info;
use prising_core::estimator::{mple_from, solve_perturbed, EstimateReport};
use prising_core::rng::derive_seed;
use prising_core::{calibrate, sample_noise, PseudoLikelihood, SpinConfiguration};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Study};
use crate::error::{CliError, Result};
use crate::rows::{Moments, RealDataRow};
use crate::simulate::{
    build_coupling, load_network, mean_degree, Loaded, NOISE_STREAM,
};

#[derive(Debug, Clone)]
pub struct RealDataOutput {
    pub n: usize,
    pub edges: usize,
    pub nonprivate: EstimateReport,
    /// One row per budget.
    pub rows: Vec<RealDataRow>,
}

fn load_outcomes(cfg: &ExperimentConfig, kept: &[usize], n_file: usize) -> Result<SpinConfiguration> {
    let path = cfg
        .outcomes
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `outcomes`".into()))?;
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let all = SpinConfiguration::read_outcomes(BufReader::new(file))?;
    if all.len() != n_file {
        return Err(CliError::Data(format!(
            "{} has {} outcomes but the network has {} nodes",
            path.display(),
            all.len(),
            n_file
        )));
    }
    Ok(SpinConfiguration::new(
        kept.iter().map(|&i| all.as_slice()[i]).collect(),
    )?)
}

/// Computes the MPLE once, then for each privacy budget runs the private
/// estimator `replicates` times on the same data and reports the Monte
/// Carlo mean squared deviation from the MPLE.
pub fn run_real_data(cfg: &ExperimentConfig) -> Result<RealDataOutput> {
    cfg.validate(Study::RealData)?;
    let settings = cfg.settings()?;
    let Loaded {
        network,
        kept,
        original_n,
    } = load_network(cfg)?;
    let sigma = load_outcomes(cfg, &kept, original_n)?;
    let coupling = build_coupling(cfg, &network, mean_degree(&network))?;
    let score = PseudoLikelihood::new(&coupling, &sigma)?;
    let nonprivate = mple_from(&score, &settings);
    let n = network.n();
    info!(
        "real data: n = {n}, {} edges, MPLE = {:.6}",
        network.edge_count(),
        nonprivate.beta_hat
    );

    let mut rows = Vec::with_capacity(cfg.epsilon_grid.len());
    for (e, &epsilon) in cfg.epsilon_grid.iter().enumerate() {
        let budget = cfg.budget(epsilon, n)?;
        let calibration = calibrate(&coupling, budget);
        let reports: Vec<EstimateReport> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(cfg.seed, &[NOISE_STREAM, e as u64, rep as u64]);
                let b = sample_noise(&calibration, seed);
                solve_perturbed(&score, calibration.delta_cap, b, &settings)
            })
            .collect();
        let estimates: Vec<f64> = reports.iter().map(|r| r.beta_hat).collect();
        let moments = Moments::of(&estimates, nonprivate.beta_hat);
        rows.push(RealDataRow {
            study: Study::RealData.id().to_string(),
            n,
            edges: network.edge_count(),
            epsilon,
            delta: budget.delta(),
            replicates: cfg.replicates,
            beta_hat_nonprivate: nonprivate.beta_hat,
            cost_of_privacy: moments.mse,
            mean_private: moments.mean,
            sd_private: moments.sd,
            private_saturated_low: reports.iter().filter(|r| r.saturated_low()).count(),
            private_saturated_high: reports.iter().filter(|r| r.saturated_high()).count(),
        });
    }
    Ok(RealDataOutput {
        n,
        edges: network.edge_count(),
        nonprivate,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(text.as_bytes())
            .unwrap();
        path
    }

    fn config(edges: &std::path::Path, outcomes: &std::path::Path, extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "edge_list = {:?}\noutcomes = {:?}\nepsilon_grid = [0.5, 5.0, 50.0]\n\
             delta = 0.0\nreplicates = 200\nseed = 3\n{extra}",
            edges, outcomes
        ))
        .unwrap()
    }

    #[test]
    fn weighted_path_recovers_hand_root() {
        // J(0,1) = J(1,2) = 1, J(2,3) = 1/2 and sigma = (+, +, +, -) give
        // fields (1, 2, 1/2, 1/2), so the score vanishes where
        // tanh x + 2 tanh 2x + tanh(x/2) = 3.
        let dir = tempfile::tempdir().unwrap();
        let edges = write(&dir, "g.txt", "0 1\n1 2\n2 3 0.5\n");
        let outcomes = write(&dir, "s.txt", "1\n1\n+1\n-1\n");
        let out = run_real_data(&config(&edges, &outcomes, "scale = 1.0")).unwrap();
        assert_eq!(out.n, 4);
        assert_eq!(out.rows.len(), 3);
        assert!(out.rows.iter().all(|r| r.replicates == 200));
        let x = out.nonprivate.beta_hat;
        let g = x.tanh() + 2.0 * (2.0 * x).tanh() + (0.5 * x).tanh() - 3.0;
        assert!(out.nonprivate.is_interior());
        assert!(g.abs() < 1e-7, "residual {g} at {x}");
    }

    #[test]
    fn cost_of_privacy_falls_with_epsilon() {
        let dir = tempfile::tempdir().unwrap();
        let edges = write(&dir, "g.txt", "0 1\n1 2\n2 3\n3 0\n0 2\n");
        let outcomes = write(&dir, "s.txt", "+1\n1\n1\n-1\n");
        let out = run_real_data(&config(&edges, &outcomes, "")).unwrap();
        let cost: Vec<f64> = out.rows.iter().map(|r| r.cost_of_privacy).collect();
        assert!(cost[0] > cost[1] && cost[1] > cost[2], "{cost:?}");
    }

    #[test]
    fn pruning_keeps_outcomes_aligned() {
        let dir = tempfile::tempdir().unwrap();
        // Node 0 is a hub of degree 3, node 4 is isolated.
        let edges = write(&dir, "g.txt", "n 5\n0 1\n0 2\n0 3\n1 2\n");
        let outcomes = write(&dir, "s.txt", "-1\n1\n1\n-1\n1\n");
        let cfg = config(&edges, &outcomes, "prune_max_degree = 3\ndrop_isolated = true");
        let out = run_real_data(&cfg).unwrap();
        // Node 0 goes, then 3 and 4 are isolated: the 1-2 edge remains.
        assert_eq!((out.n, out.edges), (2, 1));
        // Agreeing outcomes on the remaining edge push the MPLE to the cap;
        // the outcomes of nodes 0 and 1 would push it to zero instead.
        assert!(out.nonprivate.saturated_high());
    }

    #[test]
    fn outcome_length_mismatch_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let edges = write(&dir, "g.txt", "0 1\n1 2\n");
        let outcomes = write(&dir, "s.txt", "1\n-1\n");
        let err = run_real_data(&config(&edges, &outcomes, "")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let missing = config(&edges, &dir.path().join("nope.txt"), "");
        assert_eq!(run_real_data(&missing).unwrap_err().exit_code(), 2);
    }
}
