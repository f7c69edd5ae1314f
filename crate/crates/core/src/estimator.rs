//! Pseudo-likelihood estimation of the inverse temperature, private and not.
//!
//! The score `L(x) = -(1/n) sum_i m_i (sigma_i - tanh(x m_i))` is
//! non-decreasing in `x`, so the MPLE is the left end of its zero set on
//! `[0, inf)`. The private estimator perturbs the score into
//! `G(x) = L(x) + Delta x / n + b / n`, with `b` drawn from a Gaussian
//! (`delta > 0`) or Laplace (`delta = 0`) law scaled to the flip sensitivity
//! of `L`, and `Delta` large enough to bound the Jacobian of the map
//! `b -> root`. Both equations are solved by bisection on `[0, beta_max]`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::CouplingMatrix;
use crate::ising::{local_fields, SpinConfiguration};
use crate::rng;

pub const DEFAULT_BETA_MAX: f64 = 50.0;
pub const DEFAULT_TOL: f64 = 1e-8;
const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    /// Requires `epsilon > 0` and `0 <= delta < 1`.
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in [0, 1), got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Law of the perturbation `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseDistribution {
    Gaussian { sigma: f64 },
    Laplace { scale: f64 },
}

impl NoiseDistribution {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Self::Gaussian { sigma } if sigma > 0.0 => Normal::new(0.0, sigma)
                .expect("finite positive standard deviation")
                .sample(rng),
            Self::Laplace { scale } if scale > 0.0 => {
                // Inverse CDF; u in [-1/2, 1/2) and 1 - 2|u| in (0, 1].
                let u: f64 = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            _ => 0.0,
        }
    }

    /// Log density at `b` up to the normalising constant, which cancels in
    /// density ratios.
    pub fn log_kernel(&self, b: f64) -> f64 {
        match *self {
            Self::Gaussian { sigma } => -b * b / (2.0 * sigma * sigma),
            Self::Laplace { scale } => -b.abs() / scale,
        }
    }
}

/// Noise and regularisation constants for one `(J, budget)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub budget: PrivacyBudget,
    /// `d_i = n sum_j J(i, j)`.
    pub d: Vec<f64>,
    /// `zeta = 8 max_j d_j / n`.
    pub zeta: f64,
    /// Smallest admissible `Delta`: `max_j 24/(eps n) sum_i d_i J(i, j)`.
    pub delta_cap: f64,
    pub noise: NoiseDistribution,
}

impl Calibration {
    pub fn gaussian_sigma(&self) -> Option<f64> {
        match self.noise {
            NoiseDistribution::Gaussian { sigma } => Some(sigma),
            NoiseDistribution::Laplace { .. } => None,
        }
    }

    pub fn laplace_scale(&self) -> Option<f64> {
        match self.noise {
            NoiseDistribution::Laplace { scale } => Some(scale),
            NoiseDistribution::Gaussian { .. } => None,
        }
    }
}

pub fn calibrate(coupling: &CouplingMatrix, budget: PrivacyBudget) -> Calibration {
    let n = coupling.n();
    let nf = n as f64;
    let eps = budget.epsilon();
    let d: Vec<f64> = coupling.row_sums().iter().map(|r| nf * r).collect();
    let zeta = if n == 0 {
        0.0
    } else {
        8.0 * d.iter().copied().fold(0.0, f64::max) / nf
    };
    // sum_i d_i J(i, j) walks row j thanks to symmetry.
    let delta_cap = (0..n)
        .map(|j| 24.0 / (eps * nf) * coupling.row(j).map(|(i, w)| d[i] * w).sum::<f64>())
        .fold(0.0, f64::max);
    let noise = if budget.delta() > 0.0 {
        NoiseDistribution::Gaussian {
            sigma: zeta * (8.0 * (2.0 / budget.delta()).ln() + 4.0 * eps).sqrt() / eps,
        }
    } else {
        NoiseDistribution::Laplace {
            scale: 2.0 * zeta / eps,
        }
    };
    Calibration {
        budget,
        d,
        zeta,
        delta_cap,
        noise,
    }
}

/// Draws `b` from the calibrated law. Deterministic in `seed`.
pub fn sample_noise(calibration: &Calibration, seed: u64) -> f64 {
    calibration.noise.sample(&mut rng::stream(seed, &[0x4E4F]))
}

/// `1 - tanh(w) = 2 / (1 + e^{2w})`, written to avoid cancellation for
/// large `w`.
fn one_minus_tanh(w: f64) -> f64 {
    if w > 0.0 {
        let e = (-2.0 * w).exp();
        2.0 * e / (1.0 + e)
    } else {
        2.0 / (1.0 + (2.0 * w).exp())
    }
}

/// `sech^2(z) = 4 e^{-2|z|} / (1 + e^{-2|z|})^2`.
fn sech_squared(z: f64) -> f64 {
    let e = (-2.0 * z.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// The pseudo-likelihood score of one observed configuration, with local
/// fields precomputed so each evaluation is `O(n)`.
#[derive(Debug, Clone)]
pub struct PseudoLikelihood {
    fields: Vec<f64>,
    spins: Vec<f64>,
}

impl PseudoLikelihood {
    pub fn new(coupling: &CouplingMatrix, sigma: &SpinConfiguration) -> Result<Self> {
        Ok(Self {
            fields: local_fields(coupling, sigma)?,
            spins: sigma.as_slice().iter().map(|&s| f64::from(s)).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    /// `L(x)`.
    pub fn value(&self, x: f64) -> f64 {
        if self.spins.is_empty() {
            return 0.0;
        }
        // s - tanh(z) = s (1 - tanh(s z)) for s = ±1, and 1 - tanh keeps its
        // tiny positive tail where tanh itself has rounded to 1.
        let s: f64 = self
            .fields
            .iter()
            .zip(&self.spins)
            .map(|(&m, &s)| m * s * one_minus_tanh(s * x * m))
            .sum();
        -s / self.n() as f64
    }

    /// `L'(x) = (1/n) sum_i m_i^2 sech^2(x m_i)`.
    pub fn slope(&self, x: f64) -> f64 {
        if self.spins.is_empty() {
            return 0.0;
        }
        let s: f64 = self
            .fields
            .iter()
            .map(|&m| m * m * sech_squared(x * m))
            .sum();
        s / self.n() as f64
    }
}

pub fn pseudo_likelihood_value(
    coupling: &CouplingMatrix,
    sigma: &SpinConfiguration,
    x: f64,
) -> Result<f64> {
    Ok(PseudoLikelihood::new(coupling, sigma)?.value(x))
}

pub fn pseudo_likelihood_slope(
    coupling: &CouplingMatrix,
    sigma: &SpinConfiguration,
    x: f64,
) -> Result<f64> {
    Ok(PseudoLikelihood::new(coupling, sigma)?.slope(x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub beta_max: f64,
    pub tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            beta_max: DEFAULT_BETA_MAX,
            tol: DEFAULT_TOL,
        }
    }
}

impl SolverSettings {
    pub fn new(beta_max: f64, tol: f64) -> Result<Self> {
        if !(beta_max.is_finite() && beta_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta_max must be positive and finite, got {beta_max}"
            )));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive and finite, got {tol}"
            )));
        }
        Ok(Self { beta_max, tol })
    }
}

/// How the score equation was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// A root was bracketed inside `[0, beta_max]`.
    Interior,
    /// The score is already positive at zero; the estimate is clamped to 0.
    SaturatedLow,
    /// The score is still negative at `beta_max` (an infinite estimate);
    /// clamped to `beta_max`.
    SaturatedHigh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub beta_hat: f64,
    pub outcome: Outcome,
    /// The perturbation `b`; `None` for the non-private estimator.
    pub noise_draw: Option<f64>,
    pub iterations: usize,
    /// Final bisection bracket; the left end has negative score, the right
    /// end non-negative.
    pub bracket: (f64, f64),
}

impl EstimateReport {
    pub fn saturated_low(&self) -> bool {
        self.outcome == Outcome::SaturatedLow
    }

    pub fn saturated_high(&self) -> bool {
        self.outcome == Outcome::SaturatedHigh
    }

    pub fn is_interior(&self) -> bool {
        self.outcome == Outcome::Interior
    }
}

/// Smallest root of a non-decreasing function on `[0, beta_max]`.
fn solve_monotone(f: impl Fn(f64) -> f64, settings: &SolverSettings) -> EstimateReport {
    let report = |beta_hat, outcome, iterations, bracket| EstimateReport {
        beta_hat,
        outcome,
        noise_draw: None,
        iterations,
        bracket,
    };
    let f0 = f(0.0);
    if f0 > 0.0 {
        return report(0.0, Outcome::SaturatedLow, 0, (0.0, 0.0));
    }
    if f0 == 0.0 {
        return report(0.0, Outcome::Interior, 0, (0.0, 0.0));
    }
    let hi_value = f(settings.beta_max);
    if hi_value < 0.0 {
        return report(
            settings.beta_max,
            Outcome::SaturatedHigh,
            0,
            (settings.beta_max, settings.beta_max),
        );
    }
    let (mut lo, mut hi) = (0.0, settings.beta_max);
    let mut iterations = 0;
    while hi - lo > settings.tol && iterations < MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    report(0.5 * (lo + hi), Outcome::Interior, iterations, (lo, hi))
}

/// MPLE from a precomputed score.
pub fn mple_from(score: &PseudoLikelihood, settings: &SolverSettings) -> EstimateReport {
    solve_monotone(|x| score.value(x), settings)
}

/// Root of `L(x) + delta_cap x / n + b / n` from a precomputed score.
pub fn solve_perturbed(
    score: &PseudoLikelihood,
    delta_cap: f64,
    b: f64,
    settings: &SolverSettings,
) -> EstimateReport {
    let n = score.n().max(1) as f64;
    let mut report = solve_monotone(|x| score.value(x) + delta_cap * x / n + b / n, settings);
    report.noise_draw = Some(b);
    report
}

/// Non-private maximum pseudo-likelihood estimate.
pub fn mple(
    coupling: &CouplingMatrix,
    sigma: &SpinConfiguration,
    settings: &SolverSettings,
) -> Result<EstimateReport> {
    Ok(mple_from(&PseudoLikelihood::new(coupling, sigma)?, settings))
}

/// Replaces calibrated quantities, for ablations and tests.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub delta_cap: Option<f64>,
    pub noise: Option<f64>,
}

/// Objective-perturbation estimate with the smallest admissible `Delta`.
pub fn prising(
    coupling: &CouplingMatrix,
    sigma: &SpinConfiguration,
    budget: PrivacyBudget,
    settings: &SolverSettings,
    seed: u64,
) -> Result<EstimateReport> {
    prising_with(coupling, sigma, budget, settings, Overrides::default(), seed)
}

pub fn prising_with(
    coupling: &CouplingMatrix,
    sigma: &SpinConfiguration,
    budget: PrivacyBudget,
    settings: &SolverSettings,
    overrides: Overrides,
    seed: u64,
) -> Result<EstimateReport> {
    let score = PseudoLikelihood::new(coupling, sigma)?;
    let calibration = calibrate(coupling, budget);
    let delta_cap = overrides.delta_cap.unwrap_or(calibration.delta_cap);
    let b = overrides
        .noise
        .unwrap_or_else(|| sample_noise(&calibration, seed));
    Ok(solve_perturbed(&score, delta_cap, b, settings))
}
