//! Seeded measurement-matrix ensembles.
//!
//! Every generator is a pure function of its parameters and a 64-bit seed.
//! Stream consumption order is part of the contract:
//!
//! * symmetric sign: one sign per upper-triangle entry, row-major over
//!   `i <= j` (so the first `n` rows only need a prefix of the stream).
//! * iid Bernoulli / Gaussian: one variate per entry, row-major.
//! * Toeplitz / circulant: the first two rows of the Gaussian matrix drawn
//!   with the same seed (row-major, so again a stream prefix).
//!
//! All five compressed-sensing ensembles are scaled entrywise by `n^(-1/2)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    PartialSymmetricBernoulli,
    IidBernoulli,
    Gaussian,
    Toeplitz,
    Circulant,
    /// Hand-built matrix; cannot be regenerated from a seed.
    Explicit,
}

impl Ensemble {
    /// The five ensembles compared in the recovery experiments.
    pub const ALL: [Ensemble; 5] = [
        Ensemble::PartialSymmetricBernoulli,
        Ensemble::IidBernoulli,
        Ensemble::Gaussian,
        Ensemble::Toeplitz,
        Ensemble::Circulant,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Ensemble::PartialSymmetricBernoulli => "partial-symmetric-bernoulli",
            Ensemble::IidBernoulli => "iid-bernoulli",
            Ensemble::Gaussian => "gaussian",
            Ensemble::Toeplitz => "toeplitz",
            Ensemble::Circulant => "circulant",
            Ensemble::Explicit => "explicit",
        }
    }

    pub fn is_sign(&self) -> bool {
        matches!(
            self,
            Ensemble::PartialSymmetricBernoulli | Ensemble::IidBernoulli
        )
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ensemble::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown ensemble '{s}'")))
    }
}

/// Full `N x N` symmetric matrix with entries in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricSignMatrix {
    dim: usize,
    entries: Vec<i8>,
    seed: Option<u64>,
}

impl SymmetricSignMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `None` when the matrix was built from an adjacency matrix.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    /// Inverse of [`from_adjacency`]: `(S + J) / 2`.
    pub fn to_adjacency(&self) -> BinarySymmetricMatrix {
        BinarySymmetricMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|&s| ((s + 1) / 2) as u8).collect(),
        }
    }
}

/// Symmetric 0/1 adjacency matrix; self-loops allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySymmetricMatrix {
    dim: usize,
    entries: Vec<u8>,
}

impl BinarySymmetricMatrix {
    pub fn new(dim: usize, entries: Vec<u8>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("adjacency dimension must be >= 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if let Some(bad) = entries.iter().find(|&&a| a > 1) {
            return Err(Error::InvalidInput(format!("adjacency entry {bad} not in {{0, 1}}")));
        }
        for i in 0..dim {
            for j in i + 1..dim {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::InvalidInput(format!(
                        "adjacency matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(BinarySymmetricMatrix { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.dim + j]
    }
}

/// Dense row-major `n x N` measurement matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    ensemble: Ensemble,
    scale: f64,
    seed: u64,
}

impl MeasurementMatrix {
    /// Wraps explicit row-major data with unit scale.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(format!("{rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(MeasurementMatrix {
            rows,
            cols,
            data,
            ensemble: Ensemble::Explicit,
            scale: 1.0,
            seed: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Submatrix made of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> MeasurementMatrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        MeasurementMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
            ensemble: Ensemble::Explicit,
            scale: self.scale,
            seed: self.seed,
        }
    }

    /// Submatrix made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> MeasurementMatrix {
        let data = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        MeasurementMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
            ensemble: Ensemble::Explicit,
            scale: self.scale,
            seed: self.seed,
        }
    }

    pub fn descriptor(&self) -> MatrixDescriptor {
        MatrixDescriptor {
            ensemble: self.ensemble,
            n: self.rows,
            big_n: self.cols,
            seed: self.seed,
            scale: self.scale,
        }
    }

    /// Raw dump: one line per row, comma-separated, shortest round-trip
    /// decimal representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut data = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("line {}: {e}", lineno + 1)))?;
            match cols {
                None => cols = Some(values.len()),
                Some(c) if c != values.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: c,
                        got: values.len(),
                    })
                }
                _ => {}
            }
            data.extend(values);
            rows += 1;
        }
        MeasurementMatrix::from_rows(rows, cols.unwrap_or(0), data)
    }
}

/// JSON descriptor; entries are regenerated from it, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDescriptor {
    pub ensemble: Ensemble,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub seed: u64,
    pub scale: f64,
}

impl MatrixDescriptor {
    pub fn regenerate(&self) -> Result<MeasurementMatrix> {
        let m = generate(self.ensemble, self.n, self.big_n, self.seed)?;
        if (m.scale - self.scale).abs() > 1e-15 * m.scale {
            return Err(Error::InvalidInput(format!(
                "descriptor scale {} does not match ensemble scale {}",
                self.scale, m.scale
            )));
        }
        Ok(m)
    }
}

fn check_dims(n: usize, big_n: usize) -> Result<()> {
    if n == 0 || big_n == 0 {
        return Err(Error::InvalidDimension(format!(
            "n and N must be >= 1 (got n={n}, N={big_n})"
        )));
    }
    Ok(())
}

pub fn gen_symmetric_sign_matrix(big_n: usize, seed: u64) -> Result<SymmetricSignMatrix> {
    if big_n == 0 {
        return Err(Error::InvalidDimension("N must be >= 1".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let mut entries = vec![0i8; big_n * big_n];
    for i in 0..big_n {
        for j in i..big_n {
            let s = rng.next_sign() as i8;
            entries[i * big_n + j] = s;
            entries[j * big_n + i] = s;
        }
    }
    Ok(SymmetricSignMatrix {
        dim: big_n,
        entries,
        seed: Some(seed),
    })
}

/// Random graph with edge probability 1/2, self-loops included; uses the
/// same stream as [`gen_symmetric_sign_matrix`] (edge iff the sign is `+1`).
pub fn gen_random_graph(big_n: usize, seed: u64) -> Result<BinarySymmetricMatrix> {
    Ok(gen_symmetric_sign_matrix(big_n, seed)?.to_adjacency())
}

/// `2A - J`.
pub fn from_adjacency(adj: &BinarySymmetricMatrix) -> SymmetricSignMatrix {
    SymmetricSignMatrix {
        dim: adj.dim,
        entries: adj.entries.iter().map(|&a| 2 * a as i8 - 1).collect(),
        seed: None,
    }
}

/// First `n` rows of `full`, scaled by `n^(-1/2)`.
pub fn partial_rows(full: &SymmetricSignMatrix, n: usize) -> Result<MeasurementMatrix> {
    if n == 0 || n > full.dim {
        return Err(Error::InvalidDimension(format!(
            "row count n={n} must satisfy 1 <= n <= N={}",
            full.dim
        )));
    }
    let indices: Vec<usize> = (0..n).collect();
    partial_rows_indexed(full, &indices)
}

/// Rows of `full` at explicit (distinct) indices, scaled by `len^(-1/2)`.
pub fn partial_rows_indexed(
    full: &SymmetricSignMatrix,
    indices: &[usize],
) -> Result<MeasurementMatrix> {
    let n = indices.len();
    if n == 0 || n > full.dim {
        return Err(Error::InvalidDimension(format!(
            "row count n={n} must satisfy 1 <= n <= N={}",
            full.dim
        )));
    }
    let mut seen = vec![false; full.dim];
    for &i in indices {
        if i >= full.dim || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidInput(format!(
                "row index {i} out of range or repeated"
            )));
        }
    }
    let scale = 1.0 / (n as f64).sqrt();
    let data = indices
        .iter()
        .flat_map(|&i| full.row(i).iter().map(move |&s| s as f64 * scale))
        .collect();
    Ok(MeasurementMatrix {
        rows: n,
        cols: full.dim,
        data,
        ensemble: Ensemble::PartialSymmetricBernoulli,
        scale,
        seed: full.seed.unwrap_or(0),
    })
}

/// Unscaled first `n` rows of the symmetric sign matrix for `(N, seed)`,
/// without materialising the remaining `N - n` rows.
pub(crate) fn symmetric_sign_prefix(n: usize, big_n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut data = vec![0.0; n * big_n];
    for i in 0..n {
        for j in i..big_n {
            let s = rng.next_sign();
            data[i * big_n + j] = s;
            if j < n {
                data[j * big_n + i] = s;
            }
        }
    }
    data
}

pub fn gen_iid_ensemble(kind: Ensemble, n: usize, big_n: usize, seed: u64) -> Result<MeasurementMatrix> {
    check_dims(n, big_n)?;
    let scale = 1.0 / (n as f64).sqrt();
    let mut rng = SplitMix64::new(seed);
    let data: Vec<f64> = match kind {
        Ensemble::IidBernoulli => (0..n * big_n).map(|_| rng.next_sign() * scale).collect(),
        Ensemble::Gaussian => (0..n * big_n).map(|_| rng.next_normal() * scale).collect(),
        other => {
            return Err(Error::InvalidInput(format!("{other} is not an iid ensemble")));
        }
    };
    Ok(MeasurementMatrix {
        rows: n,
        cols: big_n,
        data,
        ensemble: kind,
        scale,
        seed,
    })
}

pub fn gen_structured(kind: Ensemble, n: usize, big_n: usize, seed: u64) -> Result<MeasurementMatrix> {
    check_dims(n, big_n)?;
    let scale = 1.0 / (n as f64).sqrt();
    // First two rows of the Gaussian matrix with the same seed.
    let mut rng = SplitMix64::new(seed);
    let source_rows = n.min(2);
    let gauss: Vec<f64> = (0..source_rows * big_n).map(|_| rng.next_normal()).collect();
    let first = &gauss[..big_n];
    let mut data = vec![0.0; n * big_n];
    match kind {
        Ensemble::Circulant => {
            for i in 0..n {
                for j in 0..big_n {
                    data[i * big_n + j] = first[(j + big_n - i % big_n) % big_n] * scale;
                }
            }
        }
        Ensemble::Toeplitz => {
            if n > big_n {
                return Err(Error::InvalidDimension(format!(
                    "toeplitz needs n <= N for its first column (n={n}, N={big_n})"
                )));
            }
            let second = &gauss[big_n.min(gauss.len())..];
            for i in 0..n {
                for j in 0..big_n {
                    let v = if j >= i { first[j - i] } else { second[i - j] };
                    data[i * big_n + j] = v * scale;
                }
            }
        }
        other => {
            return Err(Error::InvalidInput(format!("{other} is not a structured ensemble")));
        }
    }
    Ok(MeasurementMatrix {
        rows: n,
        cols: big_n,
        data,
        ensemble: kind,
        scale,
        seed,
    })
}

/// Any of the five ensembles by tag.
pub fn generate(kind: Ensemble, n: usize, big_n: usize, seed: u64) -> Result<MeasurementMatrix> {
    match kind {
        Ensemble::PartialSymmetricBernoulli => {
            check_dims(n, big_n)?;
            if n > big_n {
                return Err(Error::InvalidDimension(format!(
                    "row count n={n} must satisfy n <= N={big_n}"
                )));
            }
            let scale = 1.0 / (n as f64).sqrt();
            let mut data = symmetric_sign_prefix(n, big_n, seed);
            data.iter_mut().for_each(|v| *v *= scale);
            Ok(MeasurementMatrix {
                rows: n,
                cols: big_n,
                data,
                ensemble: kind,
                scale,
                seed,
            })
        }
        Ensemble::IidBernoulli | Ensemble::Gaussian => gen_iid_ensemble(kind, n, big_n, seed),
        Ensemble::Toeplitz | Ensemble::Circulant => gen_structured(kind, n, big_n, seed),
        Ensemble::Explicit => Err(Error::InvalidInput(
            "explicit matrices cannot be generated from a seed".into(),
        )),
    }
}
