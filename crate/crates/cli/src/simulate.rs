//! Simulation studies: sample outcomes from an Ising model on a random or
//! given graph, then estimate the inverse temperature with and without
//! privacy.

use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use log::info;
use prising_core::graph::{
    coupling_normalized_laplacian, coupling_scaled_adjacency, generate_erdos_renyi,
    generate_regular, load_edge_list,
};
use prising_core::ising::sample_glauber;
use prising_core::rng::derive_seed;
use prising_core::{
    estimator::{mple_from, solve_perturbed},
    calibrate, sample_noise, CouplingMatrix, IsingModel, Network, PseudoLikelihood,
};
use rayon::prelude::*;

use crate::config::{CouplingKind, ExperimentConfig, GraphFamily, Study};
use crate::error::{CliError, Result};
use crate::rows::ResultRow;

// Stream tags, one per kind of randomness.
pub(crate) const GRAPH_STREAM: u64 = 1;
pub(crate) const SPIN_STREAM: u64 = 2;
pub(crate) const NOISE_STREAM: u64 = 3;

/// One graph model at one size.
#[derive(Debug, Clone)]
struct Scenario {
    n: usize,
    /// Edge probability (Erdos-Renyi) or density.
    p: f64,
    p_exponent: Option<f64>,
    source: Source,
}

#[derive(Debug, Clone)]
enum Source {
    ErdosRenyi,
    Regular(usize),
    Fixed(CouplingMatrix),
}

/// Coupling for `network` under the configured normalisation.
pub(crate) fn build_coupling(
    cfg: &ExperimentConfig,
    network: &Network,
    default_scale: f64,
) -> Result<CouplingMatrix> {
    let coupling = match cfg.coupling {
        CouplingKind::ScaledAdjacency => {
            let scale = cfg.scale.unwrap_or(default_scale);
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(CliError::Data(format!(
                    "adjacency scale must be positive, got {scale}; set `scale` explicitly"
                )));
            }
            coupling_scaled_adjacency(network, scale)?
        }
        CouplingKind::NormalizedLaplacian => coupling_normalized_laplacian(network)?,
    };
    Ok(coupling)
}

pub(crate) fn mean_degree(network: &Network) -> f64 {
    2.0 * network.edge_count() as f64 / network.n().max(1) as f64
}

pub(crate) fn edge_density(network: &Network) -> f64 {
    let n = network.n() as f64;
    if n < 2.0 {
        0.0
    } else {
        2.0 * network.edge_count() as f64 / (n * (n - 1.0))
    }
}

pub(crate) struct Loaded {
    pub network: Network,
    /// Original id of each remaining node.
    pub kept: Vec<usize>,
    /// Node count before pruning.
    pub original_n: usize,
}

/// Loads an edge list, applying the configured pruning.
pub(crate) fn load_network(cfg: &ExperimentConfig) -> Result<Loaded> {
    let path = cfg
        .edge_list
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `edge_list`".into()))?;
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let network = load_edge_list(BufReader::new(file))?;
    let original_n = network.n();
    if cfg.prune_max_degree.is_none() && !cfg.drop_isolated {
        return Ok(Loaded {
            kept: (0..original_n).collect(),
            network,
            original_n,
        });
    }
    let pruned = network.prune(cfg.prune_max_degree, cfg.drop_isolated);
    info!(
        "pruned {} of {} nodes from {}",
        network.n() - pruned.network.n(),
        network.n(),
        path.display()
    );
    Ok(Loaded {
        network: pruned.network,
        kept: pruned.kept,
        original_n,
    })
}

fn scenarios(cfg: &ExperimentConfig, study: Study) -> Result<Vec<Scenario>> {
    if cfg.graph_family == GraphFamily::EdgeList {
        let network = load_network(cfg)?.network;
        let coupling = build_coupling(cfg, &network, mean_degree(&network))?;
        return Ok(vec![Scenario {
            n: network.n(),
            p: edge_density(&network),
            p_exponent: None,
            source: Source::Fixed(coupling),
        }]);
    }
    let mut out = Vec::new();
    if study == Study::MseDensity {
        for &n in &cfg.n_grid {
            for &alpha in &cfg.p_exponent_grid {
                out.push(Scenario {
                    n,
                    p: (n as f64).powf(-alpha),
                    p_exponent: Some(alpha),
                    source: Source::ErdosRenyi,
                });
            }
        }
        return Ok(out);
    }
    for &n in &cfg.n_grid {
        let scenario = match cfg.graph_family {
            GraphFamily::ErdosRenyi => Scenario {
                n,
                p: cfg.edge_probability(n)?,
                p_exponent: cfg.p.is_none().then_some(cfg.p_exponent).flatten(),
                source: Source::ErdosRenyi,
            },
            GraphFamily::Regular => {
                let d = cfg.degree.expect("validated");
                Scenario {
                    n,
                    p: if n > 1 { d as f64 / (n - 1) as f64 } else { 0.0 },
                    p_exponent: None,
                    source: Source::Regular(d),
                }
            }
            GraphFamily::EdgeList => unreachable!(),
        };
        out.push(scenario);
    }
    Ok(out)
}

impl Scenario {
    fn coupling(&self, cfg: &ExperimentConfig, seed: u64) -> Result<CouplingMatrix> {
        match &self.source {
            Source::ErdosRenyi => {
                let g = generate_erdos_renyi(self.n, self.p, seed)?;
                build_coupling(cfg, &g, self.n as f64 * self.p)
            }
            Source::Regular(d) => {
                let g = generate_regular(self.n, *d, seed)?;
                build_coupling(cfg, &g, *d as f64)
            }
            Source::Fixed(coupling) => Ok(coupling.clone()),
        }
    }
}

fn graph_seed(cfg: &ExperimentConfig, scenario: usize, rep: usize) -> u64 {
    let rep = if cfg.fix_graph { 0 } else { rep as u64 };
    derive_seed(cfg.seed, &[GRAPH_STREAM, scenario as u64, rep])
}

/// Runs a simulation study and returns one row per (grid point,
/// replicate), ordered by scenario, beta, epsilon and replicate.
///
/// `timings` fills the `wall_time` column.
pub fn run_simulation(
    cfg: &ExperimentConfig,
    study: Study,
    timings: bool,
) -> Result<Vec<ResultRow>> {
    cfg.validate(study)?;
    let settings = cfg.settings()?;
    let scenarios = scenarios(cfg, study)?;
    for s in &scenarios {
        for &eps in &cfg.epsilon_grid {
            cfg.budget(eps, s.n)?;
        }
    }

    let tasks: Vec<(usize, usize, usize)> = (0..scenarios.len())
        .flat_map(|s| {
            (0..cfg.beta_grid.len())
                .flat_map(move |b| (0..cfg.replicates).map(move |r| (s, b, r)))
        })
        .collect();
    info!(
        "{}: {} scenario(s), {} task(s)",
        study.id(),
        scenarios.len(),
        tasks.len()
    );

    let blocks: Vec<Vec<((usize, usize, usize, usize), ResultRow)>> = tasks
        .par_iter()
        .map(|&(s, b, rep)| -> Result<_> {
            let start = Instant::now();
            let scenario = &scenarios[s];
            let beta = cfg.beta_grid[b];
            let coupling = scenario.coupling(cfg, graph_seed(cfg, s, rep))?;
            let model = IsingModel::new(&coupling, beta)?;
            let spin_seed = derive_seed(cfg.seed, &[SPIN_STREAM, s as u64, b as u64, rep as u64]);
            let sigma = sample_glauber(&model, cfg.sweeps, spin_seed, None)?;
            let score = PseudoLikelihood::new(&coupling, &sigma)?;
            let nonprivate = mple_from(&score, &settings);

            let mut rows = Vec::with_capacity(cfg.epsilon_grid.len());
            for (e, &epsilon) in cfg.epsilon_grid.iter().enumerate() {
                let budget = cfg.budget(epsilon, scenario.n)?;
                let calibration = calibrate(&coupling, budget);
                let noise_seed = derive_seed(
                    cfg.seed,
                    &[NOISE_STREAM, s as u64, b as u64, e as u64, rep as u64],
                );
                let noise = sample_noise(&calibration, noise_seed);
                let private = solve_perturbed(&score, calibration.delta_cap, noise, &settings);
                let row = ResultRow {
                    study: study.id().to_string(),
                    n: scenario.n,
                    p: scenario.p,
                    p_exponent: scenario.p_exponent,
                    beta_true: beta,
                    epsilon,
                    delta: budget.delta(),
                    replicate: rep,
                    beta_hat_nonprivate: nonprivate.beta_hat,
                    beta_hat_private: private.beta_hat,
                    nonprivate_saturated_low: nonprivate.saturated_low(),
                    nonprivate_saturated_high: nonprivate.saturated_high(),
                    private_saturated_low: private.saturated_low(),
                    private_saturated_high: private.saturated_high(),
                    noise_draw: noise,
                    wall_time: None,
                };
                rows.push(((s, b, e, rep), row));
            }
            if timings {
                let elapsed = start.elapsed().as_secs_f64();
                for (_, row) in &mut rows {
                    row.wall_time = Some(elapsed);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut keyed: Vec<_> = blocks.into_iter().flatten().collect();
    keyed.sort_by_key(|(key, _)| *key);
    Ok(keyed.into_iter().map(|(_, row)| row).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rows::summarise;

    const BASE: &str = r#"
        n_grid = [30]
        p = 0.3
        beta_grid = [0.0, 0.5, 1.5]
        epsilon_grid = [5.0]
        replicates = 2
        sweeps = 50
        seed = 11
    "#;

    fn config(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_with(BASE, extra).unwrap()
    }

    #[test]
    fn beta_sweep_row_count() {
        let rows = run_simulation(&config(""), Study::BetaSweep, false).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.wall_time.is_none()));
        assert_eq!(rows[0].beta_true, 0.0);
        assert_eq!(rows[5].beta_true, 1.5);
        assert!(rows.iter().all(|r| r.delta == 1.0 / 30.0));
    }

    #[test]
    fn rows_are_ordered_with_replicates_innermost() {
        let cfg = config("epsilon_grid = [1.0, 5.0]\nbeta_grid = [0.5]");
        let rows = run_simulation(&cfg, Study::BetaSweep, false).unwrap();
        let keys: Vec<(f64, usize)> = rows.iter().map(|r| (r.epsilon, r.replicate)).collect();
        assert_eq!(keys, vec![(1.0, 0), (1.0, 1), (5.0, 0), (5.0, 1)]);
        // Both budgets share the outcome sample, hence the non-private estimate.
        assert_eq!(rows[0].beta_hat_nonprivate, rows[2].beta_hat_nonprivate);
        assert_ne!(rows[0].beta_hat_nonprivate, rows[1].beta_hat_nonprivate);
    }

    #[test]
    fn timings_only_touch_wall_time() {
        let cfg = config("");
        let plain = run_simulation(&cfg, Study::BetaSweep, false).unwrap();
        let timed = run_simulation(&cfg, Study::BetaSweep, true).unwrap();
        assert!(timed.iter().all(|r| r.wall_time.unwrap() >= 0.0));
        for (a, mut b) in plain.into_iter().zip(timed) {
            b.wall_time = None;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fix_graph_reuses_one_graph_seed() {
        let fresh = config("");
        assert_ne!(graph_seed(&fresh, 0, 0), graph_seed(&fresh, 0, 1));
        let fixed = config("fix_graph = true");
        assert_eq!(graph_seed(&fixed, 0, 0), graph_seed(&fixed, 0, 1));
        assert_ne!(graph_seed(&fixed, 0, 0), graph_seed(&fixed, 1, 0));
        assert_eq!(run_simulation(&fixed, Study::BetaSweep, false).unwrap().len(), 6);
    }

    #[test]
    fn mse_density_row_count_is_alpha_by_epsilon() {
        let cfg = config(
            "p_exponent_grid = [0.2, 0.4, 0.6]\nepsilon_grid = [1.0, 5.0]\nbeta_grid = [0.5]",
        );
        let rows = run_simulation(&cfg, Study::MseDensity, false).unwrap();
        let summary = summarise(&rows);
        assert_eq!(summary.len(), 3 * 2);
        assert!(summary.iter().all(|s| s.replicates == 2));
        assert_eq!(summary[0].p_exponent, Some(0.2));
        assert!((summary[0].p - 30f64.powf(-0.2)).abs() < 1e-12);
    }

    #[test]
    fn regular_family_uses_degree_scale() {
        let cfg = config("graph_family = \"regular\"\ndegree = 4\nbeta_grid = [0.5]");
        let rows = run_simulation(&cfg, Study::BetaSweep, false).unwrap();
        assert!((rows[0].p - 4.0 / 29.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_on_graph_with_isolated_node_is_a_data_error() {
        let cfg = config("coupling = \"normalized_laplacian\"\np = 0.001\nbeta_grid = [0.5]");
        let err = run_simulation(&cfg, Study::BetaSweep, false).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
