//! Brute-force restricted isometry constants for small matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::MeasurementMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, sym_eigen_extremes, SymmetricDenseMatrix};

/// Largest number of supports `delta_k_bruteforce` will visit.
pub const MAX_SUPPORTS: u128 = 1_000_000;

const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    #[serde(rename = "k")]
    pub order: usize,
    pub delta: f64,
    #[serde(rename = "support")]
    pub argmax_support: Vec<usize>,
    pub supports_checked: u64,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Column-major copy used for support Gram matrices. Sign ensembles keep
/// their signs so inner products are formed exactly as `integer / n`.
struct Columns {
    rows: usize,
    data: Vec<f64>,
    signs: Option<Vec<i32>>,
}

impl Columns {
    fn new(m: &MeasurementMatrix) -> Self {
        let (rows, cols) = (m.rows(), m.cols());
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            for (j, &v) in m.row(i).iter().enumerate() {
                data[j * rows + i] = v;
            }
        }
        let signs = m
            .ensemble()
            .is_sign()
            .then(|| data.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect());
        Columns { rows, data, signs }
    }

    fn inner(&self, a: usize, b: usize) -> f64 {
        let r = self.rows;
        match &self.signs {
            Some(s) => {
                let acc: i32 = s[a * r..(a + 1) * r]
                    .iter()
                    .zip(&s[b * r..(b + 1) * r])
                    .map(|(x, y)| x * y)
                    .sum();
                acc as f64 / r as f64
            }
            None => dot(&self.data[a * r..(a + 1) * r], &self.data[b * r..(b + 1) * r]),
        }
    }

    fn gram(&self, support: &[usize]) -> SymmetricDenseMatrix {
        let k = support.len();
        let mut g = vec![0.0; k * k];
        for a in 0..k {
            for b in a..k {
                let v = self.inner(support[a], support[b]);
                g[a * k + b] = v;
                g[b * k + a] = v;
            }
        }
        SymmetricDenseMatrix::new(k, g).expect("gram matrix is symmetric by construction")
    }
}

/// Advances `c` to the next k-combination of `0..n` in lexicographic order.
pub fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn support_delta(cols: &Columns, support: &[usize], tol: f64) -> Result<f64> {
    let (lo, hi) = sym_eigen_extremes(&cols.gram(support), tol)?;
    Ok((hi - 1.0).max(1.0 - lo).max(0.0))
}

/// `delta_k = max_T max(lambda_max(G_T) - 1, 1 - lambda_min(G_T))` over all
/// size-`k` supports, visited lexicographically; ties keep the first
/// support.
pub fn delta_k_bruteforce(phi: &MeasurementMatrix, k: usize, tol: f64) -> Result<RipEstimate> {
    let big_n = phi.cols();
    if k == 0 || k > big_n {
        return Err(Error::InvalidDimension(format!("need 1 <= k <= N, got k={k}, N={big_n}")));
    }
    let total = binomial(big_n, k);
    if total > MAX_SUPPORTS {
        return Err(Error::TooLarge(format!(
            "C({big_n}, {k}) = {total} supports exceeds the {MAX_SUPPORTS} limit"
        )));
    }
    let cols = Columns::new(phi);
    let mut best = RipEstimate {
        order: k,
        delta: f64::NEG_INFINITY,
        argmax_support: Vec::new(),
        supports_checked: 0,
    };
    let mut current: Vec<usize> = (0..k).collect();
    let mut more = true;
    while more {
        let mut batch = Vec::with_capacity(CHUNK);
        while more && batch.len() < CHUNK {
            batch.push(current.clone());
            more = next_combination(&mut current, big_n);
        }
        let deltas: Vec<f64> = batch
            .par_iter()
            .map(|s| support_delta(&cols, s, tol))
            .collect::<Result<_>>()?;
        for (support, d) in batch.into_iter().zip(deltas) {
            best.supports_checked += 1;
            if d > best.delta {
                best.delta = d;
                best.argmax_support = support;
            }
        }
    }
    Ok(best)
}

/// Mutual coherence `max_{i<j} |<col_i, col_j>|`; equals `delta_2` for
/// unit-column matrices.
pub fn delta2_coherence(phi: &MeasurementMatrix) -> Result<f64> {
    let big_n = phi.cols();
    if big_n < 2 {
        return Err(Error::InvalidDimension("coherence needs at least two columns".into()));
    }
    let cols = Columns::new(phi);
    let mut best: f64 = 0.0;
    for a in 0..big_n {
        for b in a + 1..big_n {
            best = best.max(cols.inner(a, b).abs());
        }
    }
    Ok(best)
}

/// `delta_2k < sqrt(2) - 1`, the condition under which l1 minimisation
/// recovers every k-sparse vector exactly.
pub fn recovery_condition(delta_2k: f64) -> Result<bool> {
    if !(delta_2k >= 0.0) {
        return Err(Error::InvalidInput(format!("isometry constant must be >= 0, got {delta_2k}")));
    }
    Ok(delta_2k < std::f64::consts::SQRT_2 - 1.0)
}

/// Pre-ceiling `(k / c1) ln(N / k)`.
pub fn min_measurements_heuristic_real(k: usize, big_n: usize, c1: f64) -> Result<f64> {
    if k == 0 || k >= big_n {
        return Err(Error::InvalidInput(format!("need 1 <= k < N, got k={k}, N={big_n}")));
    }
    if !(c1 > 0.0) {
        return Err(Error::InvalidInput(format!("c1 must be positive, got {c1}")));
    }
    Ok(k as f64 / c1 * (big_n as f64 / k as f64).ln())
}

/// `ceil((k / c1) ln(N / k))`; `c1` has no canonical value and must be
/// supplied.
pub fn min_measurements_heuristic(k: usize, big_n: usize, c1: f64) -> Result<usize> {
    Ok(min_measurements_heuristic_real(k, big_n, c1)?.ceil() as usize)
}
