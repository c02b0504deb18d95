//! ADMM for basis pursuit and basis pursuit denoising.
//!
//! Both solvers work on the problem rescaled to `||y||_2 = 1` (the l1
//! problems are positively homogeneous in `y`), so the penalty and the
//! tolerances are dimensionless.
//!
//! Basis pursuit splits `min ||z||_1 + I{Phi x = b}(x)` with `x = z`:
//!
//! ```text
//! x <- P(z - u)          affine projection via a cached Cholesky of Phi Phi^T
//! z <- shrink(x + u, 1/rho)
//! u <- u + x - z
//! ```
//!
//! At a fixed point `rho u` is a subgradient of `||z||_1` lying in the range
//! of `Phi^T`. Whenever the support of `z` settles, the iterate is polished
//! by least squares on that support and checked against a dual certificate
//! `w` with `Phi_T^T w = sign(x_T)` and `|Phi^T w| <= 1` off the support; a
//! certified point is optimal and returned immediately.
//!
//! The penalty starts at `cfg.penalty` and is adapted by residual balancing
//! during the first iterations, then frozen.

use std::borrow::Cow;

use super::{check_problem, SolveStatus, SolverConfig, SolverResult};
use crate::ensembles::MeasurementMatrix;
use crate::error::Result;
use crate::linalg::{axpy, dot, matvec_into, matvec_t_into, norm1, norm2, shrink, Cholesky};

/// Relative pivot threshold for discarding linearly dependent rows.
const ROW_RANK_TOL: f64 = 1e-10;
/// Iterations with an unchanged support before a polish attempt.
const STABLE_SUPPORT_ITERS: usize = 10;
const CERTIFICATE_SLACK: f64 = 1e-9;
/// Off-support indices tried one at a time when widening a polish support.
const SINGLE_AUGMENT_CANDIDATES: usize = 8;
const PENALTY_BALANCE: f64 = 10.0;
const PENALTY_STEP: f64 = 2.0;
/// The penalty is frozen afterwards so the usual ADMM convergence applies.
const PENALTY_ADAPT_ITERS: usize = 500;

/// Orthogonal projection onto `{x : Phi_K x = b_K}` for a maximal set `K` of
/// independent rows.
struct AffineProjector<'a> {
    phi: Cow<'a, MeasurementMatrix>,
    chol: Cholesky,
    b: Vec<f64>,
}

enum Projector<'a> {
    Ready(AffineProjector<'a>),
    /// `y` lies outside the range of `Phi`; carries the least-squares point.
    Inconsistent(Vec<f64>),
}

fn row_gram(phi: &MeasurementMatrix) -> Vec<f64> {
    let n = phi.rows();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = dot(phi.row(i), phi.row(j));
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

impl<'a> AffineProjector<'a> {
    fn build(phi: &'a MeasurementMatrix, b: &[f64], feas_tol: f64) -> Projector<'a> {
        let n = phi.rows();
        let gram = row_gram(phi);
        let (chol, kept) = Cholesky::factor_independent(n, &gram, ROW_RANK_TOL);
        let proj = if kept.len() == n {
            AffineProjector {
                phi: Cow::Borrowed(phi),
                chol,
                b: b.to_vec(),
            }
        } else {
            AffineProjector {
                phi: Cow::Owned(phi.select_rows(&kept)),
                chol,
                b: kept.iter().map(|&i| b[i]).collect(),
            }
        };
        if kept.len() < n {
            // dropped rows must be implied by the kept ones
            let mut x0 = vec![0.0; phi.cols()];
            let mut scratch = vec![0.0; kept.len()];
            proj.project(&vec![0.0; phi.cols()], &mut x0, &mut scratch);
            let mut px = vec![0.0; n];
            matvec_into(phi, &x0, &mut px);
            let res = px.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
            if res > feas_tol {
                return Projector::Inconsistent(x0);
            }
        }
        Projector::Ready(proj)
    }

    fn rows(&self) -> usize {
        self.phi.rows()
    }

    /// `out = v - Phi^T (Phi Phi^T)^-1 (Phi v - b)`
    fn project(&self, v: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        matvec_into(&self.phi, v, scratch);
        for (s, bi) in scratch.iter_mut().zip(&self.b) {
            *s -= bi;
        }
        self.chol.solve_in_place(scratch);
        matvec_t_into(&self.phi, scratch, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi - *o;
        }
    }
}

struct Polished {
    x: Vec<f64>,
    certified: bool,
}

/// Polishes on the support of `z`, then on that support widened by the
/// off-support indices whose dual entries are closest to saturation (these
/// carry degenerate optima whose small entries ADMM approaches slowly).
/// Returns the first certified candidate, else the first feasible one.
fn polish(proj: &AffineProjector, z: &[f64], u: &[f64], rho: f64, feas_tol: f64) -> Option<Polished> {
    let mut support: Vec<usize> = (0..z.len()).filter(|&i| z[i] != 0.0).collect();
    let mut signs: Vec<f64> = support.iter().map(|&j| z[j].signum()).collect();
    let mut fallback = None;
    match polish_on(proj, &support, &signs, z.len(), u, rho, feas_tol) {
        Some(p) if p.certified => return Some(p),
        p => fallback = fallback.or(p),
    }
    // dual ranking uses rho u projected onto range(Phi^T)
    let scaled: Vec<f64> = u.iter().map(|ui| rho * ui).collect();
    let mut w = vec![0.0; proj.rows()];
    matvec_into(&proj.phi, &scaled, &mut w);
    proj.chol.solve_in_place(&mut w);
    let mut g = vec![0.0; z.len()];
    matvec_t_into(&proj.phi, &w, &mut g);
    let mut off: Vec<usize> = (0..z.len()).filter(|&i| z[i] == 0.0 && g[i] != 0.0).collect();
    off.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
    let room = proj.rows().saturating_sub(support.len()).min(off.len());
    if room > 0 {
        for &j in off.iter().take(SINGLE_AUGMENT_CANDIDATES) {
            let pos = support.partition_point(|&i| i < j);
            let mut widened = support.clone();
            let mut widened_signs = signs.clone();
            widened.insert(pos, j);
            widened_signs.insert(pos, g[j].signum());
            match polish_on(proj, &widened, &widened_signs, z.len(), u, rho, feas_tol) {
                Some(p) if p.certified => return Some(p),
                p => fallback = fallback.or(p),
            }
        }
    }
    let mut added = 0;
    let mut step = 1;
    while added < room {
        let next = (added + step).min(room);
        for &j in &off[added..next] {
            support.push(j);
            signs.push(g[j].signum());
        }
        added = next;
        step *= 2;
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by_key(|&a| support[a]);
        let sorted: Vec<usize> = order.iter().map(|&a| support[a]).collect();
        let sorted_signs: Vec<f64> = order.iter().map(|&a| signs[a]).collect();
        match polish_on(proj, &sorted, &sorted_signs, z.len(), u, rho, feas_tol) {
            Some(p) if p.certified => return Some(p),
            p => fallback = fallback.or(p),
        }
    }
    fallback
}

/// Least squares on `support`; returns the point when it is feasible and
/// its signs agree with `signs` (zeros allowed), flagged `certified` when a
/// dual certificate proves optimality.
fn polish_on(
    proj: &AffineProjector,
    support: &[usize],
    signs: &[f64],
    big_n: usize,
    u: &[f64],
    rho: f64,
    feas_tol: f64,
) -> Option<Polished> {
    let t = support.len();
    let m = proj.rows();
    if t == 0 || t > m {
        return None;
    }
    // columns of Phi_K on the support, one contiguous slice each
    let mut cols = vec![0.0; t * m];
    for i in 0..m {
        let row = proj.phi.row(i);
        for (a, &j) in support.iter().enumerate() {
            cols[a * m + i] = row[j];
        }
    }
    let col = |a: usize| &cols[a * m..(a + 1) * m];
    let mut gram = vec![0.0; t * t];
    for a in 0..t {
        for c in 0..=a {
            let v = dot(col(a), col(c));
            gram[a * t + c] = v;
            gram[c * t + a] = v;
        }
    }
    let chol_t = Cholesky::factor_raw(t, &gram).ok()?;
    let rhs: Vec<f64> = (0..t).map(|a| dot(col(a), &proj.b)).collect();
    let coef = chol_t.solve(&rhs);

    let mut fitted = vec![0.0; m];
    for (a, &c) in coef.iter().enumerate() {
        axpy(c, col(a), &mut fitted);
    }
    let res = fitted.iter().zip(&proj.b).map(|(f, b)| (f - b) * (f - b)).sum::<f64>().sqrt();
    if res > feas_tol {
        return None;
    }
    if coef.iter().zip(signs).any(|(c, s)| c * s < 0.0) {
        return None;
    }

    let mut x = vec![0.0; big_n];
    for (a, &j) in support.iter().enumerate() {
        x[j] = coef[a];
    }

    // Candidate multipliers: the ADMM dual mapped into range(Phi^T), then the
    // minimum-norm choice; each is corrected so that Phi_T^T w = sign(x_T).
    let mut on_support = vec![false; big_n];
    support.iter().for_each(|&j| on_support[j] = true);
    let certify = |mut w: Vec<f64>| -> bool {
        let gap: Vec<f64> = (0..t).map(|a| signs[a] - dot(col(a), &w)).collect();
        let delta = chol_t.solve(&gap);
        for (a, &d) in delta.iter().enumerate() {
            axpy(d, col(a), &mut w);
        }
        let mut g = vec![0.0; big_n];
        matvec_t_into(&proj.phi, &w, &mut g);
        g.iter()
            .zip(&on_support)
            .all(|(gi, &on)| on || gi.abs() <= 1.0 + CERTIFICATE_SLACK)
    };
    let scaled_dual: Vec<f64> = u.iter().map(|ui| rho * ui).collect();
    let mut w = vec![0.0; m];
    matvec_into(&proj.phi, &scaled_dual, &mut w);
    proj.chol.solve_in_place(&mut w);
    let certified = certify(w) || certify(vec![0.0; m]);
    Some(Polished { x, certified })
}

/// Residual balancing for the penalty. Neither x update depends on rho, so
/// a change only rescales the scaled duals.
fn penalty_factor(it: usize, primal: f64, dual: f64) -> f64 {
    if it > PENALTY_ADAPT_ITERS {
        1.0
    } else if primal > PENALTY_BALANCE * dual {
        PENALTY_STEP
    } else if dual > PENALTY_BALANCE * primal {
        1.0 / PENALTY_STEP
    } else {
        1.0
    }
}

fn rescale(mut x: Vec<f64>, s: f64) -> Vec<f64> {
    x.iter_mut().for_each(|v| *v *= s);
    x
}

/// Basis pursuit `min ||x||_1 s.t. Phi x = y`.
pub fn basis_pursuit(phi: &MeasurementMatrix, y: &[f64], cfg: &SolverConfig) -> Result<SolverResult> {
    check_problem(phi, y, cfg)?;
    let big_n = phi.cols();
    let y_norm = norm2(y);
    if y_norm == 0.0 {
        return Ok(SolverResult::new(phi, y, vec![0.0; big_n], SolveStatus::Converged, 0, true));
    }
    let b: Vec<f64> = y.iter().map(|v| v / y_norm).collect();
    let proj = match AffineProjector::build(phi, &b, cfg.feas_tol) {
        Projector::Ready(p) => p,
        Projector::Inconsistent(x0) => {
            return Ok(SolverResult::new(
                phi,
                y,
                rescale(x0, y_norm),
                SolveStatus::InfeasibleDetected,
                0,
                false,
            ));
        }
    };

    let mut rho = cfg.penalty;
    let mut x = vec![0.0; big_n];
    let mut z = vec![0.0; big_n];
    let mut u = vec![0.0; big_n];
    let mut v = vec![0.0; big_n];
    let mut scratch = vec![0.0; proj.rows()];
    let mut stable = 0usize;
    let mut attempted_at_stable = false;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iterations {
        iterations = it;
        for i in 0..big_n {
            v[i] = z[i] - u[i];
        }
        proj.project(&v, &mut x, &mut scratch);
        let mut r2 = 0.0;
        let mut dz2 = 0.0;
        let mut support_changed = false;
        let tau = 1.0 / rho;
        for i in 0..big_n {
            let zi = shrink(x[i] + u[i], tau);
            let dz = zi - z[i];
            support_changed |= (zi == 0.0) != (z[i] == 0.0);
            z[i] = zi;
            let r = x[i] - zi;
            u[i] += r;
            r2 += r * r;
            dz2 += dz * dz;
        }
        if r2.sqrt() <= cfg.primal_tol && rho * dz2.sqrt() <= cfg.dual_tol {
            converged = true;
            break;
        }
        let factor = penalty_factor(it, r2.sqrt(), rho * dz2.sqrt());
        if factor != 1.0 {
            rho *= factor;
            u.iter_mut().for_each(|v| *v /= factor);
        }
        if support_changed {
            stable = 0;
            attempted_at_stable = false;
        } else {
            stable += 1;
        }
        if stable >= STABLE_SUPPORT_ITERS && !attempted_at_stable {
            attempted_at_stable = true;
            if let Some(p) = polish(&proj, &z, &u, rho, cfg.feas_tol) {
                if p.certified {
                    return Ok(SolverResult::new(
                        phi,
                        y,
                        rescale(p.x, y_norm),
                        SolveStatus::Converged,
                        it,
                        true,
                    ));
                }
            }
        }
    }

    // x is feasible to rounding; prefer the polished point when it is at
    // least as good.
    let mut best = x;
    let mut certified = false;
    if let Some(p) = polish(&proj, &z, &u, rho, cfg.feas_tol) {
        let bound = norm1(&best) + 1e-9 * norm1(&best).max(1.0);
        if p.certified || norm1(&p.x) <= bound {
            certified = p.certified;
            best = p.x;
        }
    }
    let status = if converged || certified {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    Ok(SolverResult::new(phi, y, rescale(best, y_norm), status, iterations, certified))
}

/// Basis pursuit denoising `min ||x||_1 s.t. ||y - Phi x||_2 <= eps`.
///
/// ADMM with the splitting `z1 = x`, `z2 = Phi x`; the `x` update solves
/// `(I + Phi^T Phi) x = q` through a cached Cholesky of `I + Phi Phi^T`.
/// `eps == 0` defers to [`basis_pursuit`].
pub fn bpdn(phi: &MeasurementMatrix, y: &[f64], eps: f64, cfg: &SolverConfig) -> Result<SolverResult> {
    check_problem(phi, y, cfg)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(crate::Error::InvalidInput(format!("eps must be >= 0, got {eps}")));
    }
    if eps == 0.0 {
        return basis_pursuit(phi, y, cfg);
    }
    let (n, big_n) = (phi.rows(), phi.cols());
    let y_norm = norm2(y);
    if eps >= y_norm {
        return Ok(SolverResult::new(phi, y, vec![0.0; big_n], SolveStatus::Converged, 0, true));
    }
    let b: Vec<f64> = y.iter().map(|v| v / y_norm).collect();
    let radius = eps / y_norm;

    let mut gram = row_gram(phi);
    for i in 0..n {
        gram[i * n + i] += 1.0;
    }
    let chol = Cholesky::factor_raw(n, &gram)?;

    let mut rho = cfg.penalty;
    let mut x = vec![0.0; big_n];
    let mut q = vec![0.0; big_n];
    let mut z1 = vec![0.0; big_n];
    let mut u1 = vec![0.0; big_n];
    let mut z2 = b.clone();
    let mut u2 = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut pz = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iterations {
        iterations = it;
        // q = z1 - u1 + Phi^T (z2 - u2)
        for i in 0..n {
            t[i] = z2[i] - u2[i];
        }
        matvec_t_into(phi, &t, &mut q);
        for i in 0..big_n {
            q[i] += z1[i] - u1[i];
        }
        // w = (I + Phi Phi^T)^-1 Phi q; then x = q - Phi^T w and Phi x = w
        matvec_into(phi, &q, &mut w);
        chol.solve_in_place(&mut w);
        matvec_t_into(phi, &w, &mut x);
        for i in 0..big_n {
            x[i] = q[i] - x[i];
        }

        let mut r2 = 0.0;
        let mut dz2 = 0.0;
        let tau = 1.0 / rho;
        for i in 0..big_n {
            let zi = shrink(x[i] + u1[i], tau);
            let r = x[i] - zi;
            dz2 += (zi - z1[i]) * (zi - z1[i]);
            z1[i] = zi;
            u1[i] += r;
            r2 += r * r;
        }
        // z2 = projection of Phi x + u2 onto the ball around b
        for i in 0..n {
            t[i] = w[i] + u2[i] - b[i];
        }
        let dist = norm2(&t);
        let shrink_to = if dist > radius { radius / dist } else { 1.0 };
        for i in 0..n {
            let zi = b[i] + t[i] * shrink_to;
            let r = w[i] - zi;
            dz2 += (zi - z2[i]) * (zi - z2[i]);
            z2[i] = zi;
            u2[i] += r;
            r2 += r * r;
        }

        if r2.sqrt() <= cfg.primal_tol && rho * dz2.sqrt() <= cfg.dual_tol {
            matvec_into(phi, &z1, &mut pz);
            let res = pz.iter().zip(&b).map(|(p, bi)| (p - bi) * (p - bi)).sum::<f64>().sqrt();
            if res <= radius + cfg.feas_tol {
                converged = true;
                break;
            }
        }
        let factor = penalty_factor(it, r2.sqrt(), rho * dz2.sqrt());
        if factor != 1.0 {
            rho *= factor;
            u1.iter_mut().for_each(|v| *v /= factor);
            u2.iter_mut().for_each(|v| *v /= factor);
        }
    }
    let status = if converged {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    Ok(SolverResult::new(phi, y, rescale(z1, y_norm), status, iterations, false))
}
