//! The one-parameter Ising model on a coupling matrix.
//!
//! `P_beta(sigma) = 2^-n exp(beta H(sigma) / 2 - F(beta))` with
//! `H(sigma) = sigma^T J sigma`. Small instances are handled exactly by
//! enumerating all `2^n` configurations in Gray-code order; large ones are
//! sampled with single-site heat-bath (Glauber) dynamics.

use std::io::BufRead;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::CouplingMatrix;
use crate::rng;

/// Largest `n` accepted by [`log_partition_exact`].
pub const MAX_ENUMERATION_N: usize = 24;
/// Largest `n` accepted by [`ExactDistribution`] and [`sample_exact`].
pub const MAX_EXACT_SAMPLING_N: usize = 20;
/// Burn-in used by the experiment harness when none is configured.
pub const DEFAULT_SWEEPS: usize = 1000;

/// A vector of `±1` spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration(Vec<i8>);

impl SpinConfiguration {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(i) = values.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter(format!(
                "spin {i} is {}, expected -1 or +1",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Configuration whose spin `i` is `+1` iff bit `i` of `index` is set.
    pub fn from_index(n: usize, index: u64) -> Self {
        Self((0..n).map(|i| if index >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    /// Inverse of [`SpinConfiguration::from_index`]; requires `len() <= 64`.
    pub fn index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s == 1)
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }

    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        Self((0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    pub fn flip(&mut self, j: usize) {
        self.0[j] = -self.0[j];
    }

    /// Copy with spin `j` flipped: the adjacent configuration `sigma^(j)`.
    pub fn flipped(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.flip(j);
        out
    }

    /// Reads the outcomes format: one `+1`, `1` or `-1` per line. Blank lines
    /// and `#` comments are skipped.
    pub fn read_outcomes(reader: impl BufRead) -> Result<Self> {
        let mut values = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let s = match line {
                "+1" | "1" => 1,
                "-1" => -1,
                other => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("invalid outcome `{other}`"),
                    })
                }
            };
            values.push(s);
        }
        Ok(Self(values))
    }

    pub fn write_outcomes(&self, mut out: impl std::io::Write) -> std::io::Result<()> {
        for &s in &self.0 {
            writeln!(out, "{}", if s == 1 { "+1" } else { "-1" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IsingModel<'a> {
    coupling: &'a CouplingMatrix,
    beta: f64,
}

impl<'a> IsingModel<'a> {
    pub fn new(coupling: &'a CouplingMatrix, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and non-negative, got {beta}"
            )));
        }
        Ok(Self { coupling, beta })
    }

    pub fn coupling(&self) -> &'a CouplingMatrix {
        self.coupling
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

fn check_dims(coupling: &CouplingMatrix, sigma: &SpinConfiguration) -> Result<()> {
    if coupling.n() != sigma.len() {
        return Err(Error::DimensionMismatch {
            expected: coupling.n(),
            actual: sigma.len(),
        });
    }
    Ok(())
}

fn local_field(coupling: &CouplingMatrix, spins: &[i8], i: usize) -> f64 {
    coupling.row(i).map(|(j, w)| w * f64::from(spins[j])).sum()
}

/// `m_i = sum_j J(i, j) sigma_j`.
pub fn local_fields(coupling: &CouplingMatrix, sigma: &SpinConfiguration) -> Result<Vec<f64>> {
    check_dims(coupling, sigma)?;
    Ok((0..coupling.n())
        .map(|i| local_field(coupling, sigma.as_slice(), i))
        .collect())
}

/// `H = sum_{i,j} J(i, j) sigma_i sigma_j`, both orientations of each pair
/// counted.
pub fn hamiltonian(coupling: &CouplingMatrix, sigma: &SpinConfiguration) -> Result<f64> {
    Ok(local_fields(coupling, sigma)?
        .iter()
        .zip(sigma.as_slice())
        .map(|(m, &s)| m * f64::from(s))
        .sum())
}

/// Visits every configuration index together with its Hamiltonian, in Gray
/// code order, updating `H` and the local fields incrementally per flip.
fn for_each_energy(coupling: &CouplingMatrix, mut visit: impl FnMut(u64, f64)) {
    let n = coupling.n();
    let mut spins = vec![-1i8; n];
    let mut fields: Vec<f64> = coupling.row_sums().iter().map(|r| -r).collect();
    let mut h: f64 = coupling.row_sums().iter().sum();
    let mut index = 0u64;
    visit(index, h);
    for step in 1u64..(1u64 << n) {
        let b = step.trailing_zeros() as usize;
        let old = f64::from(spins[b]);
        h -= 4.0 * old * fields[b];
        for (k, w) in coupling.row(b) {
            fields[k] -= 2.0 * old * w;
        }
        spins[b] = -spins[b];
        index ^= 1 << b;
        visit(index, h);
    }
}

/// `F(beta) = log( 2^-n sum_tau exp(beta H(tau) / 2) )` by enumeration.
pub fn log_partition_exact(coupling: &CouplingMatrix, beta: f64) -> Result<f64> {
    let n = coupling.n();
    if n > MAX_ENUMERATION_N {
        return Err(Error::TooLarge {
            n,
            max: MAX_ENUMERATION_N,
        });
    }
    // Streaming log-sum-exp.
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for_each_energy(coupling, |_, h| {
        let x = 0.5 * beta * h;
        if x > max {
            sum = sum * (max - x).exp() + 1.0;
            max = x;
        } else {
            sum += (x - max).exp();
        }
    });
    Ok(max + sum.ln() - n as f64 * std::f64::consts::LN_2)
}

/// The full probability table of a small model.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    n: usize,
    probabilities: Vec<f64>,
    energies: Vec<f64>,
    cumulative: Vec<f64>,
    log_partition: f64,
}

impl ExactDistribution {
    pub fn new(model: &IsingModel<'_>) -> Result<Self> {
        let n = model.coupling.n();
        if n > MAX_EXACT_SAMPLING_N {
            return Err(Error::TooLarge {
                n,
                max: MAX_EXACT_SAMPLING_N,
            });
        }
        let size = 1usize << n;
        let mut energies = vec![0.0; size];
        for_each_energy(model.coupling, |idx, h| energies[idx as usize] = h);
        let log_w: Vec<f64> = energies.iter().map(|h| 0.5 * model.beta * h).collect();
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_w.iter().map(|x| (x - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            n,
            probabilities,
            energies,
            cumulative,
            log_partition: max + total.ln() - n as f64 * std::f64::consts::LN_2,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Probabilities indexed by [`SpinConfiguration::index`].
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Hamiltonians indexed by [`SpinConfiguration::index`].
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn expected_hamiltonian(&self) -> f64 {
        self.probabilities
            .iter()
            .zip(&self.energies)
            .map(|(p, h)| p * h)
            .sum()
    }

    pub fn hamiltonian_variance(&self) -> f64 {
        let mean = self.expected_hamiltonian();
        self.probabilities
            .iter()
            .zip(&self.energies)
            .map(|(p, h)| p * (h - mean) * (h - mean))
            .sum()
    }

    /// `E[sigma_i]` for every site.
    pub fn magnetization(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.probabilities
                    .iter()
                    .enumerate()
                    .map(|(idx, p)| if idx >> i & 1 == 1 { *p } else { -*p })
                    .sum()
            })
            .collect()
    }

    /// Inverse-CDF draw over the enumerated table.
    pub fn sample(&self, rng: &mut impl Rng) -> SpinConfiguration {
        let total = *self.cumulative.last().expect("non-empty table");
        let u = rng.random::<f64>() * total;
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        SpinConfiguration::from_index(self.n, idx as u64)
    }
}

/// One exact draw from the model (`n <= 20`).
pub fn sample_exact(model: &IsingModel<'_>, seed: u64) -> Result<SpinConfiguration> {
    let dist = ExactDistribution::new(model)?;
    Ok(dist.sample(&mut rng::stream(seed, &[0x4558])))
}

/// Runs `sweeps` sequential heat-bath passes over the sites in place.
pub fn glauber_sweeps(
    model: &IsingModel<'_>,
    sigma: &mut SpinConfiguration,
    sweeps: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    check_dims(model.coupling, sigma)?;
    let n = sigma.len();
    for _ in 0..sweeps {
        for i in 0..n {
            let m = local_field(model.coupling, &sigma.0, i);
            // P(sigma_i = +1 | rest) = e^{bm} / (e^{bm} + e^{-bm}).
            let p_up = 1.0 / (1.0 + (-2.0 * model.beta * m).exp());
            sigma.0[i] = if rng.random::<f64>() < p_up { 1 } else { -1 };
        }
    }
    Ok(())
}

/// Glauber chain started from `init`, or from a uniform configuration drawn
/// from the same stream when `init` is `None`.
pub fn sample_glauber(
    model: &IsingModel<'_>,
    sweeps: usize,
    seed: u64,
    init: Option<&SpinConfiguration>,
) -> Result<SpinConfiguration> {
    if sweeps == 0 {
        return Err(Error::InvalidParameter("sweeps must be at least 1".into()));
    }
    let mut rng = rng::stream(seed, &[0x474C]);
    let mut sigma = match init {
        Some(s) => s.clone(),
        None => SpinConfiguration::random(model.coupling.n(), &mut rng),
    };
    glauber_sweeps(model, &mut sigma, sweeps, &mut rng)?;
    Ok(sigma)
}
