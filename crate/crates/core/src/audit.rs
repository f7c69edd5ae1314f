//! Executable checks of the privacy argument.
//!
//! Three pointwise bounds hold for every pair of configurations differing in
//! one spin `j`:
//!
//! - flip sensitivity: `|L_sigma(beta) - L_sigma'(beta)| <= 8 d_j / n^2`;
//! - Jacobian ratio: `|b'(alpha; sigma) / b'(alpha; sigma')| <= e^{eps/2}` for
//!   `b(alpha; tau) = -(n L_tau(alpha) + Delta alpha)`;
//! - noise density ratio: `nu(b(alpha; sigma)) / nu(b(alpha; sigma')) <= e^{eps/2}`,
//!   unconditionally for Laplace noise and on
//!   `|b| <= gamma sqrt(2 log(2/delta))` for Gaussian noise.
//!
//! The audits evaluate these on a finite grid, either over every
//! configuration (`n <= 12`) or over sampled `(sigma, j, point)` triples.
//! [`mc_privacy_smoke`] compares output histograms of the full mechanism on
//! a neighbouring pair; it is advisory only.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{
    calibrate, solve_perturbed, Calibration, NoiseDistribution, PrivacyBudget, PseudoLikelihood,
    SolverSettings,
};
use crate::graph::CouplingMatrix;
use crate::ising::SpinConfiguration;
use crate::rng;

pub const MAX_EXHAUSTIVE_N: usize = 12;
/// Absolute slack on every audited inequality.
pub const AUDIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditMode {
    /// Every configuration, every flip, every grid point.
    Exhaustive,
    /// `samples` uniformly random `(configuration, flip, grid point)` triples.
    Sampled { samples: usize },
}

/// Where the tightest margin was observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub flip: usize,
    pub point: f64,
    /// [`SpinConfiguration::index`] in exhaustive mode, the sample number in
    /// sampled mode.
    pub configuration: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    /// Audited quantity at the tightest triple (largest `gap - bound`).
    pub worst_gap: f64,
    /// Bound at the tightest triple.
    pub bound: f64,
    pub argmax: Option<Witness>,
    pub pass: bool,
    pub checked: usize,
    pub violations: usize,
    /// Triples outside the region where the bound is claimed (Gaussian
    /// density audit only); never counted as violations.
    pub excluded: usize,
    /// Excluded triples whose ratio exceeded the bound anyway.
    pub excluded_exceeding: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    best: Option<(f64, f64, Witness)>,
    checked: usize,
    violations: usize,
    excluded: usize,
    excluded_exceeding: usize,
}

/// Result of one audited triple.
enum Check {
    Bounded { value: f64, bound: f64 },
    Excluded { exceeds: bool },
}

impl Acc {
    fn record(&mut self, check: Check, witness: Witness) {
        match check {
            Check::Bounded { value, bound } => {
                self.checked += 1;
                if value > bound + AUDIT_TOLERANCE {
                    self.violations += 1;
                }
                let tighter = match self.best {
                    None => true,
                    Some((v, b, _)) => value - bound > v - b,
                };
                if tighter {
                    self.best = Some((value, bound, witness));
                }
            }
            Check::Excluded { exceeds } => {
                self.excluded += 1;
                self.excluded_exceeding += usize::from(exceeds);
            }
        }
    }

    fn merge(mut self, other: Acc) -> Acc {
        if let Some((v, b, w)) = other.best {
            let tighter = match self.best {
                None => true,
                Some((sv, sb, _)) => v - b > sv - sb,
            };
            if tighter {
                self.best = Some((v, b, w));
            }
        }
        self.checked += other.checked;
        self.violations += other.violations;
        self.excluded += other.excluded;
        self.excluded_exceeding += other.excluded_exceeding;
        self
    }

    fn into_report(self) -> SensitivityReport {
        let (worst_gap, bound, argmax) = match self.best {
            Some((v, b, w)) => (v, b, Some(w)),
            None => (0.0, 0.0, None),
        };
        SensitivityReport {
            worst_gap,
            bound,
            argmax,
            pass: self.violations == 0,
            checked: self.checked,
            violations: self.violations,
            excluded: self.excluded,
            excluded_exceeding: self.excluded_exceeding,
        }
    }
}

/// Runs `check(score_sigma, score_flipped, flip, point)` over the audited
/// triples and reduces in a fixed order.
fn run_audit<F>(
    coupling: &CouplingMatrix,
    grid: &[f64],
    mode: AuditMode,
    seed: u64,
    check: F,
) -> Result<SensitivityReport>
where
    F: Fn(&PseudoLikelihood, &PseudoLikelihood, usize, f64) -> Check + Sync,
{
    let n = coupling.n();
    if grid.is_empty() {
        return Err(Error::InvalidParameter("audit grid is empty".into()));
    }
    if n == 0 {
        return Ok(Acc::default().into_report());
    }
    let acc = match mode {
        AuditMode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_N {
                return Err(Error::TooLarge {
                    n,
                    max: MAX_EXHAUSTIVE_N,
                });
            }
            let partials: Vec<Acc> = (0..1u64 << n)
                .into_par_iter()
                .map(|idx| {
                    let sigma = SpinConfiguration::from_index(n, idx);
                    let score = PseudoLikelihood::new(coupling, &sigma).expect("dimensions match");
                    let mut acc = Acc::default();
                    for j in 0..n {
                        let flipped = PseudoLikelihood::new(coupling, &sigma.flipped(j))
                            .expect("dimensions match");
                        for &x in grid {
                            let witness = Witness {
                                flip: j,
                                point: x,
                                configuration: idx,
                            };
                            acc.record(check(&score, &flipped, j, x), witness);
                        }
                    }
                    acc
                })
                .collect();
            partials.into_iter().fold(Acc::default(), Acc::merge)
        }
        AuditMode::Sampled { samples } => {
            let mut rng = rng::stream(seed, &[0x4155]);
            let triples: Vec<(SpinConfiguration, usize, f64)> = (0..samples)
                .map(|_| {
                    let sigma = SpinConfiguration::random(n, &mut rng);
                    let j = rng.random_range(0..n);
                    let x = grid[rng.random_range(0..grid.len())];
                    (sigma, j, x)
                })
                .collect();
            let partials: Vec<Acc> = triples
                .par_iter()
                .enumerate()
                .map(|(k, (sigma, j, x))| {
                    let score = PseudoLikelihood::new(coupling, sigma).expect("dimensions match");
                    let flipped = PseudoLikelihood::new(coupling, &sigma.flipped(*j))
                        .expect("dimensions match");
                    let mut acc = Acc::default();
                    let witness = Witness {
                        flip: *j,
                        point: *x,
                        configuration: k as u64,
                    };
                    acc.record(check(&score, &flipped, *j, *x), witness);
                    acc
                })
                .collect();
            partials.into_iter().fold(Acc::default(), Acc::merge)
        }
    };
    Ok(acc.into_report())
}

/// Checks `|L_sigma(beta) - L_sigma^(j)(beta)| <= 8 d_j / n^2`.
pub fn audit_sensitivity(
    coupling: &CouplingMatrix,
    beta_grid: &[f64],
    mode: AuditMode,
    seed: u64,
) -> Result<SensitivityReport> {
    let n = coupling.n() as f64;
    // d_j / n^2 = (row sum j) / n.
    let bounds: Vec<f64> = coupling.row_sums().iter().map(|r| 8.0 * r / n).collect();
    run_audit(coupling, beta_grid, mode, seed, |a, b, j, x| Check::Bounded {
        value: (a.value(x) - b.value(x)).abs(),
        bound: bounds[j],
    })
}

/// `|b'(alpha; sigma)| / |b'(alpha; sigma')|` with `b' = n L' + Delta`. Both
/// sides zero counts as ratio 1.
pub fn jacobian_ratio(
    sigma: &PseudoLikelihood,
    other: &PseudoLikelihood,
    delta_cap: f64,
    alpha: f64,
) -> f64 {
    let n = sigma.n() as f64;
    let num = (n * sigma.slope(alpha) + delta_cap).abs();
    let den = (n * other.slope(alpha) + delta_cap).abs();
    if num == den {
        1.0
    } else {
        num / den
    }
}

/// `b(alpha; tau) = -(n L_tau(alpha) + Delta alpha)`: the noise value that
/// makes `alpha` the private estimate on `tau`.
pub fn implied_noise(score: &PseudoLikelihood, delta_cap: f64, alpha: f64) -> f64 {
    -(score.n() as f64 * score.value(alpha) + delta_cap * alpha)
}

/// `nu(b(alpha; sigma)) / nu(b(alpha; sigma'))`; equal arguments give 1.
pub fn density_ratio(
    noise: &NoiseDistribution,
    sigma: &PseudoLikelihood,
    other: &PseudoLikelihood,
    delta_cap: f64,
    alpha: f64,
) -> f64 {
    let b = implied_noise(sigma, delta_cap, alpha);
    let b_other = implied_noise(other, delta_cap, alpha);
    if b == b_other {
        1.0
    } else {
        (noise.log_kernel(b) - noise.log_kernel(b_other)).exp()
    }
}

/// Checks the Jacobian-ratio bound `e^{eps/2}`. `delta_cap` overrides the
/// calibrated smallest admissible value when given.
pub fn audit_jacobian_ratio(
    coupling: &CouplingMatrix,
    budget: PrivacyBudget,
    delta_cap: Option<f64>,
    alpha_grid: &[f64],
    mode: AuditMode,
    seed: u64,
) -> Result<SensitivityReport> {
    let cal = calibrate(coupling, budget);
    let delta_cap = delta_cap.unwrap_or(cal.delta_cap);
    let bound = (budget.epsilon() / 2.0).exp();
    run_audit(coupling, alpha_grid, mode, seed, |a, b, _, x| Check::Bounded {
        value: jacobian_ratio(a, b, delta_cap, x),
        bound,
    })
}

/// Half-width of the set on which the Gaussian density-ratio bound is
/// claimed: `gamma sqrt(2 log(2/delta))`. Infinite for Laplace noise.
pub fn density_audit_radius(calibration: &Calibration) -> f64 {
    match calibration.noise {
        NoiseDistribution::Gaussian { sigma } => {
            sigma * (2.0 * (2.0 / calibration.budget.delta()).ln()).sqrt()
        }
        NoiseDistribution::Laplace { .. } => f64::INFINITY,
    }
}

/// Checks the noise-density-ratio bound `e^{eps/2}`, using the calibrated
/// `Delta` and noise law.
pub fn audit_density_ratio(
    coupling: &CouplingMatrix,
    budget: PrivacyBudget,
    alpha_grid: &[f64],
    mode: AuditMode,
    seed: u64,
) -> Result<SensitivityReport> {
    let cal = calibrate(coupling, budget);
    let bound = (budget.epsilon() / 2.0).exp();
    let radius = density_audit_radius(&cal);
    run_audit(coupling, alpha_grid, mode, seed, |a, b, _, x| {
        let value = density_ratio(&cal.noise, a, b, cal.delta_cap, x);
        if implied_noise(a, cal.delta_cap, x).abs() <= radius {
            Check::Bounded { value, bound }
        } else {
            Check::Excluded {
                exceeds: value > bound + AUDIT_TOLERANCE,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmokeOptions {
    pub settings: SolverSettings,
    /// Multiplicative slack on `e^eps`.
    pub slack: f64,
    /// Bins where either side has fewer draws are left out of the log-ratio.
    pub count_floor: usize,
}

impl Default for SmokeOptions {
    fn default() -> Self {
        Self {
            settings: SolverSettings::default(),
            slack: 0.2,
            count_floor: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmokeReport {
    /// Largest `|log(p_sigma / p_sigma')|` over bins above the count floor.
    pub worst_log_ratio: f64,
    /// `e^eps (1 + slack)`.
    pub ratio_threshold: f64,
    /// Every bin satisfies `p <= threshold * p' + delta` both ways.
    pub pass: bool,
    pub bins_compared: usize,
    pub counts: Vec<usize>,
    pub counts_neighbour: Vec<usize>,
}

/// Monte Carlo comparison of the private estimator on `sigma` and on
/// `sigma` with spin `flip` flipped (`None` compares `sigma` with itself).
///
/// Each side runs `draws` independent estimates; outputs are histogrammed
/// into `bins` equal-width bins over `[0, beta_max]`.
#[allow(clippy::too_many_arguments)]
pub fn mc_privacy_smoke(
    coupling: &CouplingMatrix,
    sigma: &SpinConfiguration,
    flip: Option<usize>,
    budget: PrivacyBudget,
    draws: usize,
    bins: usize,
    seed: u64,
    options: &SmokeOptions,
) -> Result<SmokeReport> {
    if draws < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "smoke test needs at least 10^4 draws, got {draws}"
        )));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be positive".into()));
    }
    if let Some(j) = flip {
        if j >= sigma.len() {
            return Err(Error::InvalidParameter(format!("flip index {j} out of range")));
        }
    }
    let neighbour = match flip {
        Some(j) => sigma.flipped(j),
        None => sigma.clone(),
    };
    let cal = calibrate(coupling, budget);
    let beta_max = options.settings.beta_max;
    let histogram = |config: &SpinConfiguration, side: u64| -> Result<Vec<usize>> {
        let score = PseudoLikelihood::new(coupling, config)?;
        let estimates: Vec<f64> = (0..draws as u64)
            .into_par_iter()
            .map(|k| {
                let b = cal.noise.sample(&mut rng::stream(seed, &[side, k]));
                solve_perturbed(&score, cal.delta_cap, b, &options.settings).beta_hat
            })
            .collect();
        let mut counts = vec![0usize; bins];
        for x in estimates {
            let k = ((x / beta_max) * bins as f64) as usize;
            counts[k.min(bins - 1)] += 1;
        }
        Ok(counts)
    };
    let counts = histogram(sigma, 0)?;
    let counts_neighbour = histogram(&neighbour, 1)?;

    let ratio_threshold = budget.epsilon().exp() * (1.0 + options.slack);
    let total = draws as f64;
    let mut worst_log_ratio: f64 = 0.0;
    let mut bins_compared = 0;
    let mut pass = true;
    for (&a, &b) in counts.iter().zip(&counts_neighbour) {
        let (pa, pb) = (a as f64 / total, b as f64 / total);
        if pa > ratio_threshold * pb + budget.delta() || pb > ratio_threshold * pa + budget.delta() {
            pass = false;
        }
        if a >= options.count_floor && b >= options.count_floor {
            bins_compared += 1;
            worst_log_ratio = worst_log_ratio.max((pa / pb).ln().abs());
        }
    }
    Ok(SmokeReport {
        worst_log_ratio,
        ratio_threshold,
        pass,
        bins_compared,
        counts,
        counts_neighbour,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{coupling_scaled_adjacency, generate_erdos_renyi, Network};

    fn k2_half() -> CouplingMatrix {
        coupling_scaled_adjacency(&Network::complete(2), 2.0).unwrap()
    }

    fn k3_half() -> CouplingMatrix {
        coupling_scaled_adjacency(&Network::complete(3), 2.0).unwrap()
    }

    #[test]
    fn sensitivity_zero_coupling() {
        let r = audit_sensitivity(&CouplingMatrix::zeros(5), &[0.0, 1.0], AuditMode::Exhaustive, 0)
            .unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_gap, 0.0);
        assert_eq!(r.bound, 0.0);
        assert_eq!(r.checked, 32 * 5 * 2);
    }

    #[test]
    fn sensitivity_k2_exhaustive() {
        let r = audit_sensitivity(&k2_half(), &[0.0, 1.0, 2.0], AuditMode::Exhaustive, 0).unwrap();
        assert!(r.pass);
        assert_eq!(r.checked, 4 * 2 * 3);
        // 8 d_j / n^2 with d_j = 2 * 1/2 = 1 and n = 2.
        assert_eq!(r.bound, 2.0);
        assert!(r.worst_gap <= 2.0);
    }

    #[test]
    fn sensitivity_sampled_er() {
        let g = generate_erdos_renyi(10, 0.4, 17).unwrap();
        let j = coupling_scaled_adjacency(&g, 4.0).unwrap();
        let grid: Vec<f64> = (0..=12).map(|k| k as f64 * 0.25).collect();
        let r = audit_sensitivity(&j, &grid, AuditMode::Sampled { samples: 1000 }, 3).unwrap();
        assert!(r.pass);
        assert_eq!(r.checked, 1000);
    }

    #[test]
    fn exhaustive_mode_size_limit() {
        let big = CouplingMatrix::zeros(13);
        assert!(matches!(
            audit_sensitivity(&big, &[1.0], AuditMode::Exhaustive, 0),
            Err(Error::TooLarge { .. })
        ));
        assert!(audit_sensitivity(&big, &[1.0], AuditMode::Sampled { samples: 10 }, 0).is_ok());
        assert!(audit_sensitivity(&k2_half(), &[], AuditMode::Exhaustive, 0).is_err());
    }

    #[test]
    fn jacobian_zero_coupling_is_one() {
        let budget = PrivacyBudget::new(1.0, 0.0).unwrap();
        let r = audit_jacobian_ratio(&CouplingMatrix::zeros(3), budget, None, &[0.0, 1.0], AuditMode::Exhaustive, 0)
            .unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_gap, 1.0);
    }

    #[test]
    fn jacobian_k3_exhaustive() {
        let budget = PrivacyBudget::new(1.0, 0.0).unwrap();
        let r = audit_jacobian_ratio(&k3_half(), budget, None, &[0.0, 0.5, 1.0, 2.0], AuditMode::Exhaustive, 0)
            .unwrap();
        assert!(r.pass);
        assert!(r.worst_gap <= 0.5f64.exp());
        assert!(r.worst_gap > 1.0);
    }

    #[test]
    fn jacobian_undersized_delta_fails() {
        // All-up K3 has n L'(0) = 3; flipping one spin leaves 1.
        let budget = PrivacyBudget::new(1.0, 0.0).unwrap();
        let r = audit_jacobian_ratio(&k3_half(), budget, Some(0.01), &[0.0, 0.5], AuditMode::Exhaustive, 0)
            .unwrap();
        assert!(!r.pass);
        assert!(r.violations > 0);
        assert!(r.worst_gap > 2.5);
    }

    #[test]
    fn ratios_on_identical_inputs_are_one() {
        let g = generate_erdos_renyi(12, 0.5, 2).unwrap();
        let j = coupling_scaled_adjacency(&g, 6.0).unwrap();
        let s = SpinConfiguration::random(12, &mut rng::stream(0, &[]));
        let score = PseudoLikelihood::new(&j, &s).unwrap();
        let cal = calibrate(&j, PrivacyBudget::new(1.0, 0.1).unwrap());
        for a in [0.0, 0.7, 3.0] {
            assert_eq!(jacobian_ratio(&score, &score, cal.delta_cap, a), 1.0);
            assert_eq!(jacobian_ratio(&score, &score, 0.0, a), 1.0);
            assert_eq!(density_ratio(&cal.noise, &score, &score, cal.delta_cap, a), 1.0);
        }
    }

    #[test]
    fn density_laplace_k2() {
        let budget = PrivacyBudget::new(1.0, 0.0).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let r = audit_density_ratio(&k2_half(), budget, &grid, AuditMode::Exhaustive, 0).unwrap();
        assert!(r.pass);
        assert_eq!(r.excluded, 0);
        assert!(r.worst_gap <= 0.5f64.exp() + AUDIT_TOLERANCE);
    }

    #[test]
    fn density_gaussian_excludes_far_points() {
        let budget = PrivacyBudget::new(1.0, 0.05).unwrap();
        let cal = calibrate(&k2_half(), budget);
        let radius = density_audit_radius(&cal);
        // Delta alpha alone pushes |b| beyond the radius at the last point.
        let far = 4.0 * radius / cal.delta_cap;
        let r = audit_density_ratio(&k2_half(), budget, &[0.0, 0.5, 1.0, far], AuditMode::Exhaustive, 0)
            .unwrap();
        assert!(r.pass);
        assert!(r.excluded > 0);
        assert!(r.excluded_exceeding > 0);
        assert!(r.worst_gap <= 0.5f64.exp());
    }

    #[test]
    fn smoke_identical_inputs() {
        let j = k3_half();
        let s = SpinConfiguration::all_up(3);
        let budget = PrivacyBudget::new(1.0, 0.1).unwrap();
        let opts = SmokeOptions {
            count_floor: 500,
            ..SmokeOptions::default()
        };
        let r = mc_privacy_smoke(&j, &s, None, budget, 20_000, 20, 1, &opts).unwrap();
        assert!(r.pass);
        assert!(r.bins_compared > 0);
        // sd of a log count ratio at 500 draws per side is about 0.063.
        assert!(r.worst_log_ratio < 0.3, "{}", r.worst_log_ratio);

        let z = CouplingMatrix::zeros(3);
        let r = mc_privacy_smoke(&z, &s, Some(0), budget, 10_000, 20, 1, &opts).unwrap();
        assert_eq!(r.worst_log_ratio, 0.0);
        assert!(r.pass);

        assert!(mc_privacy_smoke(&j, &s, Some(0), budget, 100, 20, 1, &opts).is_err());
        assert!(mc_privacy_smoke(&j, &s, Some(3), budget, 10_000, 20, 1, &opts).is_err());
    }
}
