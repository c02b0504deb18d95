//! Exhaustive oracles for tiny instances.

use serde::{Deserialize, Serialize};

use crate::ensembles::MeasurementMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot, gram_on_support, lu_solve, matvec, norm2, solve_spd, Cholesky};
use crate::rip::next_combination;

pub const L1_ORACLE_MAX_COLS: usize = 10;
pub const L1_ORACLE_MAX_ROWS: usize = 6;
pub const L0_ORACLE_MAX_COLS: usize = 12;

const VERTEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1OracleSolution {
    /// Lexicographically smallest optimal vertex.
    pub solution: Vec<f64>,
    pub objective: f64,
    /// Distinct optimal vertices found by the scan.
    pub optimal_vertices: usize,
    pub unique: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L0Solution {
    pub solution: Vec<f64>,
    pub support: Vec<usize>,
}

impl L0Solution {
    pub fn cardinality(&self) -> usize {
        self.support.len()
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Exact `min ||x||_1 s.t. Phi x = y` by enumerating the basic feasible
/// solutions of `[Phi, -Phi] (u, v) = y`, `u, v >= 0`.
pub fn l1_oracle_small(phi: &MeasurementMatrix, y: &[f64]) -> Result<L1OracleSolution> {
    let (n, big_n) = (phi.rows(), phi.cols());
    if big_n > L1_ORACLE_MAX_COLS || n > L1_ORACLE_MAX_ROWS {
        return Err(Error::TooLarge(format!(
            "l1 oracle needs N <= {L1_ORACLE_MAX_COLS}, n <= {L1_ORACLE_MAX_ROWS}; got N={big_n}, n={n}"
        )));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let scale = norm2(y).max(1.0);

    // keep a maximal independent row set and check the rest is implied
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            gram[i * n + j] = dot(phi.row(i), phi.row(j));
        }
    }
    let (_, kept): (Cholesky, Vec<usize>) = Cholesky::factor_independent(n, &gram, 1e-10);
    let r = kept.len();
    let rows = phi.select_rows(&kept);
    let b: Vec<f64> = kept.iter().map(|&i| y[i]).collect();

    let column = |c: usize| -> Vec<f64> {
        let (j, sign) = if c < big_n { (c, 1.0) } else { (c - big_n, -1.0) };
        (0..r).map(|i| sign * rows.get(i, j)).collect()
    };

    let mut best: Option<f64> = None;
    let mut optimal: Vec<Vec<f64>> = Vec::new();
    if r == 0 {
        if norm2(y) > 1e-9 * scale {
            return Err(Error::Infeasible("y is not in the range of Phi".into()));
        }
        best = Some(0.0);
        optimal.push(vec![0.0; big_n]);
    } else {
        let mut basis: Vec<usize> = (0..r).collect();
        let mut a = vec![0.0; r * r];
        loop {
            // skip bases pairing u_j with v_j; they are always singular
            let paired = basis.iter().any(|&c| c < big_n && basis.contains(&(c + big_n)));
            if !paired {
                for (k, &c) in basis.iter().enumerate() {
                    for (i, v) in column(c).into_iter().enumerate() {
                        a[i * r + k] = v;
                    }
                }
                if let Some(xb) = lu_solve(r, &a, &b) {
                    if xb.iter().all(|&v| v >= -VERTEX_TOL * scale) {
                        let mut x = vec![0.0; big_n];
                        for (k, &c) in basis.iter().enumerate() {
                            let v = xb[k].max(0.0);
                            if c < big_n {
                                x[c] += v;
                            } else {
                                x[c - big_n] -= v;
                            }
                        }
                        let obj: f64 = x.iter().map(|v| v.abs()).sum();
                        let tol = VERTEX_TOL * scale;
                        match best {
                            Some(bv) if obj > bv + tol => {}
                            Some(bv) if obj >= bv - tol => {
                                if !optimal.iter().any(|o| o.iter().zip(&x).all(|(p, q)| (p - q).abs() <= tol)) {
                                    optimal.push(x);
                                }
                                best = Some(bv.min(obj));
                            }
                            _ => {
                                best = Some(obj);
                                optimal.clear();
                                optimal.push(x);
                            }
                        }
                    }
                }
            }
            if !next_combination(&mut basis, 2 * big_n) {
                break;
            }
        }
    }

    let objective = best.ok_or_else(|| Error::Infeasible("no basic feasible solution".into()))?;
    let solution = optimal
        .iter()
        .fold(None::<&Vec<f64>>, |acc, x| match acc {
            Some(s) if !lex_less(x, s) => Some(s),
            _ => Some(x),
        })
        .cloned()
        .expect("at least one optimal vertex");

    // dropped rows must agree with the kept ones
    let px = matvec(phi, &solution, false)?;
    let res = px.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    if res > 1e-8 * scale {
        return Err(Error::Infeasible("y is not in the range of Phi".into()));
    }
    Ok(L1OracleSolution {
        objective,
        optimal_vertices: optimal.len(),
        unique: optimal.len() == 1,
        solution,
    })
}

/// Sparsest `x` with `||Phi x - y|| <= feas_tol * max(1, ||y||)`, scanning
/// supports by cardinality and lexicographically within a cardinality.
pub fn l0_oracle_small(phi: &MeasurementMatrix, y: &[f64], feas_tol: f64) -> Result<L0Solution> {
    let (n, big_n) = (phi.rows(), phi.cols());
    if big_n > L0_ORACLE_MAX_COLS {
        return Err(Error::TooLarge(format!(
            "l0 oracle needs N <= {L0_ORACLE_MAX_COLS}, got N={big_n}"
        )));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if !(feas_tol >= 0.0) {
        return Err(Error::InvalidInput(format!("feas_tol must be >= 0, got {feas_tol}")));
    }
    let limit = feas_tol * norm2(y).max(1.0);
    if norm2(y) <= limit {
        return Ok(L0Solution {
            solution: vec![0.0; big_n],
            support: Vec::new(),
        });
    }
    for k in 1..=n.min(big_n) {
        let mut support: Vec<usize> = (0..k).collect();
        loop {
            if let Some(sol) = fit_support(phi, y, &support, limit) {
                return Ok(sol);
            }
            if !next_combination(&mut support, big_n) {
                break;
            }
        }
    }
    Err(Error::Infeasible(format!("no support of size <= {n} fits y")))
}

fn fit_support(phi: &MeasurementMatrix, y: &[f64], support: &[usize], limit: f64) -> Option<L0Solution> {
    let gram = gram_on_support(phi, support).ok()?;
    let rhs: Vec<f64> = support
        .iter()
        .map(|&j| (0..phi.rows()).map(|i| phi.get(i, j) * y[i]).sum())
        .collect();
    let coef = solve_spd(&gram, &rhs, 1e-12).ok()?;
    let mut x = vec![0.0; phi.cols()];
    for (&j, &c) in support.iter().zip(&coef) {
        x[j] = c;
    }
    let px = matvec(phi, &x, false).ok()?;
    let res = px.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    (res <= limit).then(|| L0Solution {
        solution: x,
        support: support.to_vec(),
    })
}
