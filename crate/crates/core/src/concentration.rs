//! Concentration of the partial symmetric sign projection.
//!
//! With `R = (r_ij / sqrt(N))` and a unit vector `alpha`, the statistics
//! `Q_j = r_j . alpha` satisfy `E Q_j = 0`, `E Q_j^2 = 1/N`, and
//! `S = sum_j Q_j^2` concentrates around `n/N`. This module computes the
//! relevant expectations exactly by enumerating sign patterns on tiny
//! instances, and estimates tail frequencies by seeded Monte Carlo.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{symmetric_sign_prefix, MeasurementMatrix, SymmetricSignMatrix};
use crate::error::{Error, Result};
use crate::linalg::{dot, matvec_into, norm2};
use crate::rng::{derive_seed, SplitMix64};

/// Largest `N` for enumeration over whole symmetric matrices
/// (`2^(N(N+1)/2)` patterns).
pub const MAX_FULL_ENUM_DIM: usize = 4;
/// Largest `N` for enumeration over a single row (`2^N` patterns).
pub const MAX_ROW_ENUM_DIM: usize = 16;

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QStatistics {
    pub values: Vec<f64>,
    pub source_dim: usize,
    pub direction: Vec<f64>,
}

impl QStatistics {
    /// `S = sum_j Q_j^2`.
    pub fn s(&self) -> f64 {
        self.values.iter().map(|q| q * q).sum()
    }
}

fn check_unit(alpha: &[f64]) -> Result<()> {
    let norm = norm2(alpha);
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidInput(format!("direction must be a unit vector (norm {norm})")));
    }
    Ok(())
}

fn check_alpha(big_n: usize, alpha: &[f64]) -> Result<()> {
    if alpha.len() != big_n {
        return Err(Error::DimensionMismatch {
            expected: big_n,
            got: alpha.len(),
        });
    }
    check_unit(alpha)
}

pub fn q_statistics(full: &SymmetricSignMatrix, alpha: &[f64], n: usize) -> Result<QStatistics> {
    let big_n = full.dim();
    check_alpha(big_n, alpha)?;
    if n == 0 || n > big_n {
        return Err(Error::InvalidDimension(format!("need 1 <= n <= N, got n={n}, N={big_n}")));
    }
    let inv_sqrt_n = 1.0 / (big_n as f64).sqrt();
    let values = (0..n)
        .map(|j| {
            full.row(j)
                .iter()
                .zip(alpha)
                .map(|(&r, a)| r as f64 * a)
                .sum::<f64>()
                * inv_sqrt_n
        })
        .collect();
    Ok(QStatistics {
        values,
        source_dim: big_n,
        direction: alpha.to_vec(),
    })
}

/// Exact `E prod_{j<n} exp(h Q_j^2)` over every symmetric sign matrix of
/// dimension `N <= 4`, uniformly weighted.
pub fn mgf_lhs_exact(big_n: usize, n: usize, alpha: &[f64], h: f64) -> Result<f64> {
    if big_n > MAX_FULL_ENUM_DIM {
        return Err(Error::TooLarge(format!(
            "full-matrix enumeration needs N <= {MAX_FULL_ENUM_DIM}, got {big_n}"
        )));
    }
    if big_n == 0 || n == 0 || n > big_n {
        return Err(Error::InvalidDimension(format!("need 1 <= n <= N, got n={n}, N={big_n}")));
    }
    check_alpha(big_n, alpha)?;

    let upper: Vec<(usize, usize)> = (0..big_n)
        .flat_map(|i| (i..big_n).map(move |j| (i, j)))
        .collect();
    let patterns = 1u64 << upper.len();
    let inv_n = 1.0 / big_n as f64;
    let mut entries = vec![0.0f64; big_n * big_n];
    let mut total = 0.0;
    for bits in 0..patterns {
        for (b, &(i, j)) in upper.iter().enumerate() {
            let s = if bits >> b & 1 == 1 { -1.0 } else { 1.0 };
            entries[i * big_n + j] = s;
            entries[j * big_n + i] = s;
        }
        let s_stat: f64 = (0..n)
            .map(|j| {
                let q = dot(&entries[j * big_n..(j + 1) * big_n], alpha);
                q * q * inv_n
            })
            .sum();
        total += (h * s_stat).exp();
    }
    Ok(total / patterns as f64)
}

fn row_enumeration<F: Fn(f64) -> f64>(big_n: usize, alpha: &[f64], f: F) -> Result<f64> {
    if big_n > MAX_ROW_ENUM_DIM {
        return Err(Error::TooLarge(format!(
            "row enumeration needs N <= {MAX_ROW_ENUM_DIM}, got {big_n}"
        )));
    }
    if big_n == 0 {
        return Err(Error::InvalidDimension("N must be >= 1".into()));
    }
    check_alpha(big_n, alpha)?;
    let patterns = 1u64 << big_n;
    let inv_sqrt_n = 1.0 / (big_n as f64).sqrt();
    let mut total = 0.0;
    for bits in 0..patterns {
        let q: f64 = alpha
            .iter()
            .enumerate()
            .map(|(k, a)| if bits >> k & 1 == 1 { -a } else { *a })
            .sum::<f64>()
            * inv_sqrt_n;
        total += f(q);
    }
    Ok(total / patterns as f64)
}

/// Exact `E exp(h Q_1^2)` over the `2^N` first-row sign patterns.
pub fn mgf_single_exact(big_n: usize, alpha: &[f64], h: f64) -> Result<f64> {
    row_enumeration(big_n, alpha, |q| (h * q * q).exp())
}

/// Exact `(E exp(h Q_1^2))^n`.
pub fn mgf_rhs_exact(big_n: usize, alpha: &[f64], h: f64, n: usize) -> Result<f64> {
    let single = mgf_single_exact(big_n, alpha, h)?;
    Ok(single.powi(n as i32))
}

/// Exact `E Q_1^4`.
pub fn moment4_exact(big_n: usize, alpha: &[f64]) -> Result<f64> {
    row_enumeration(big_n, alpha, |q| q.powi(4))
}

/// Upper bound `(1 - 2h/N)^(-1/2)` on `E exp(h Q_1^2)`, valid for
/// `0 <= h < N/2`.
pub fn mgf_bound(big_n: usize, h: f64) -> Result<f64> {
    let half = big_n as f64 / 2.0;
    if !(h >= 0.0 && h < half) {
        return Err(Error::InvalidInput(format!("h must lie in [0, {half}), got {h}")));
    }
    Ok(1.0 / (1.0 - 2.0 * h / big_n as f64).sqrt())
}

/// Upper bound `3 / N^2` on `E Q_1^4`.
pub fn moment4_bound(big_n: usize) -> f64 {
    3.0 / (big_n * big_n) as f64
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// `exp(-(n/2)(eps^2/2 - eps^3/3))`, bounding each tail of `S`.
pub fn tail_bound(eps: f64, n: usize) -> Result<f64> {
    check_epsilon(eps)?;
    Ok((-(n as f64) / 2.0 * tail_exponent(eps)).exp())
}

fn tail_exponent(eps: f64) -> f64 {
    eps * eps / 2.0 - eps * eps * eps / 3.0
}

/// Standard-normal vector scaled to unit norm; a zero draw is redrawn with
/// sub-seed `derive_seed(seed, [attempt])`.
pub fn random_unit_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut attempt = 0u64;
    let mut rng = SplitMix64::new(seed);
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
        let norm = norm2(&v);
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
        attempt += 1;
        rng = SplitMix64::new(derive_seed(seed, &[attempt]));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheckReport {
    pub epsilon: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub trials: usize,
    pub upper_freq: f64,
    pub lower_freq: f64,
    pub bound: f64,
    pub seed: u64,
    /// Three binomial standard errors at the bound.
    pub slack: f64,
    pub mean_s: f64,
    pub mean_s_stderr: f64,
}

impl TailCheckReport {
    pub fn within_bound(&self) -> bool {
        self.upper_freq <= self.bound + self.slack && self.lower_freq <= self.bound + self.slack
    }
}

/// `S` for one Monte Carlo trial: fresh matrix (sub-seed 0) and fresh unit
/// direction (sub-seed 1).
fn sampled_s(n: usize, big_n: usize, trial_seed: u64) -> f64 {
    let rows = symmetric_sign_prefix(n, big_n, derive_seed(trial_seed, &[0]));
    let alpha = random_unit_vector(big_n, derive_seed(trial_seed, &[1]));
    let inv_n = 1.0 / big_n as f64;
    (0..n)
        .map(|j| {
            let q = dot(&rows[j * big_n..(j + 1) * big_n], &alpha);
            q * q * inv_n
        })
        .sum()
}

/// Empirical frequencies of `S > (1+eps) n/N` and `S < (1-eps) n/N`.
///
/// Trial `t` uses seed `derive_seed(master_seed, [t])`; samples are collected
/// in trial order before reduction, so the report is independent of the
/// thread count.
pub fn empirical_tail(
    big_n: usize,
    n: usize,
    eps: f64,
    trials: usize,
    master_seed: u64,
) -> Result<TailCheckReport> {
    check_epsilon(eps)?;
    if n == 0 || n > big_n {
        return Err(Error::InvalidDimension(format!("need 1 <= n <= N, got n={n}, N={big_n}")));
    }
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let samples: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| sampled_s(n, big_n, derive_seed(master_seed, &[t])))
        .collect();
    let center = n as f64 / big_n as f64;
    let upper = samples.iter().filter(|&&s| s > (1.0 + eps) * center).count();
    let lower = samples.iter().filter(|&&s| s < (1.0 - eps) * center).count();
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    let bound = tail_bound(eps, n)?;
    Ok(TailCheckReport {
        epsilon: eps,
        n,
        big_n,
        trials,
        upper_freq: upper as f64 / trials as f64,
        lower_freq: lower as f64 / trials as f64,
        bound,
        seed: master_seed,
        slack: 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt(),
        mean_s: mean,
        mean_s_stderr: (var / trials as f64).sqrt(),
    })
}

/// Empirical `Pr[ | ||Phi x||^2 - 1 | >= eps ]` for `Phi = n^(-1/2) R` and
/// random unit `x`; seeds as in [`empirical_tail`].
pub fn empirical_deviation(
    big_n: usize,
    n: usize,
    eps: f64,
    trials: usize,
    master_seed: u64,
) -> Result<f64> {
    check_epsilon(eps)?;
    if n == 0 || n > big_n || trials == 0 {
        return Err(Error::InvalidDimension(format!(
            "need 1 <= n <= N and trials >= 1 (n={n}, N={big_n}, trials={trials})"
        )));
    }
    let scale = big_n as f64 / n as f64;
    let hits: usize = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let energy = sampled_s(n, big_n, derive_seed(master_seed, &[t])) * scale;
            ((energy - 1.0).abs() >= eps) as usize
        })
        .sum();
    Ok(hits as f64 / trials as f64)
}

/// Pre-ceiling value `(4 + 2 beta) / (eps^2/2 - eps^3/3) * ln m`.
pub fn jl_min_measurements_real(eps: f64, beta: f64, m: usize) -> Result<f64> {
    check_epsilon(eps)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if m < 2 {
        return Err(Error::InvalidInput(format!("need at least two points, got m={m}")));
    }
    Ok((4.0 + 2.0 * beta) / tail_exponent(eps) * (m as f64).ln())
}

/// Smallest `n` for which all pairwise distances among `m` points are kept
/// within `1 +- eps` with probability at least `1 - m^(-beta)`.
pub fn jl_min_measurements(eps: f64, beta: f64, m: usize) -> Result<usize> {
    Ok(jl_min_measurements_real(eps, beta, m)?.ceil() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub argmin_pair: (usize, usize),
    pub argmax_pair: (usize, usize),
    pub pairs_checked: usize,
    /// Pairs with `u == v`, excluded from the ratios.
    pub skipped_pairs: Vec<(usize, usize)>,
}

impl DistortionReport {
    pub fn within(&self, eps: f64) -> bool {
        self.pairs_checked > 0 && self.min_ratio >= 1.0 - eps && self.max_ratio <= 1.0 + eps
    }
}

/// Worst-case `||f(u - v)||^2 / ||u - v||^2` over all column pairs, with
/// `f = phi` (for the symmetric ensemble `phi x = sqrt(N/n) (Q_1..Q_n)`).
pub fn pairwise_distortion(columns: &[Vec<f64>], phi: &MeasurementMatrix) -> Result<DistortionReport> {
    if columns.len() < 2 {
        return Err(Error::InvalidInput("need at least two columns".into()));
    }
    if let Some(c) = columns.iter().find(|c| c.len() != phi.cols()) {
        return Err(Error::DimensionMismatch {
            expected: phi.cols(),
            got: c.len(),
        });
    }
    // f is linear, so project each column once
    let projected: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mut out = vec![0.0; phi.rows()];
            matvec_into(phi, c, &mut out);
            out
        })
        .collect();
    let mut report = DistortionReport {
        min_ratio: f64::INFINITY,
        max_ratio: f64::NEG_INFINITY,
        argmin_pair: (0, 0),
        argmax_pair: (0, 0),
        pairs_checked: 0,
        skipped_pairs: Vec::new(),
    };
    for a in 0..columns.len() {
        for b in a + 1..columns.len() {
            let diff: Vec<f64> = columns[a].iter().zip(&columns[b]).map(|(u, v)| u - v).collect();
            let denom = dot(&diff, &diff);
            if denom == 0.0 {
                report.skipped_pairs.push((a, b));
                continue;
            }
            let pdiff: Vec<f64> = projected[a]
                .iter()
                .zip(&projected[b])
                .map(|(u, v)| u - v)
                .collect();
            let ratio = dot(&pdiff, &pdiff) / denom;
            report.pairs_checked += 1;
            if ratio < report.min_ratio {
                report.min_ratio = ratio;
                report.argmin_pair = (a, b);
            }
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.argmax_pair = (a, b);
            }
        }
    }
    Ok(report)
}
