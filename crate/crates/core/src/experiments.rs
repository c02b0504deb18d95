//! Planted-signal recovery experiments: single trials, parameter sweeps,
//! recovery metrics and CSV/JSON emission.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ensembles::{generate, Ensemble};
use crate::error::{Error, Result};
use crate::linalg::{matvec, norm2};
use crate::rng::{derive_seed, SplitMix64};
use crate::solver::{basis_pursuit, bpdn, SolveStatus, SolverConfig};

/// Relative error at or below which a reconstruction counts as exact.
pub const EXACT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalMode {
    #[default]
    PmOne,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    pub values: Vec<f64>,
    /// Sorted ascending.
    pub support: Vec<usize>,
}

impl SparseSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }
}

/// Plants a `k`-sparse signal of length `big_n`. The support is a uniform
/// `k`-subset (partial Fisher-Yates on the seeded stream); values are drawn
/// afterwards in ascending support order.
pub fn plant_signal(big_n: usize, k: usize, seed: u64, mode: SignalMode) -> Result<SparseSignal> {
    if k > big_n {
        return Err(Error::InvalidDimension(format!("sparsity {k} exceeds length {big_n}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut idx: Vec<usize> = (0..big_n).collect();
    for i in 0..k {
        let j = i + rng.next_below((big_n - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut support = idx[..k].to_vec();
    support.sort_unstable();
    let mut values = vec![0.0; big_n];
    for &j in &support {
        values[j] = match mode {
            SignalMode::PmOne => rng.next_sign(),
            SignalMode::Gaussian => {
                // a zero draw would shrink the support
                let mut v = rng.next_normal();
                while v == 0.0 {
                    v = rng.next_normal();
                }
                v
            }
        };
    }
    Ok(SparseSignal { values, support })
}

/// `(relErr <= tol, relErr)` with `relErr = ||x* - x|| / ||x||`, or `||x*||`
/// for the zero signal.
pub fn success(x: &SparseSignal, x_star: &[f64], tol: f64) -> Result<(bool, f64)> {
    if x_star.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x_star.len(),
        });
    }
    let diff = x_star
        .iter()
        .zip(&x.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let rel = if x.sparsity() == 0 { diff } else { diff / norm2(&x.values) };
    Ok((rel <= tol, rel))
}

fn frobenius_parts(x: &[f64], m: &[f64]) -> Result<(f64, f64)> {
    if x.len() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: m.len(),
            got: x.len(),
        });
    }
    let m_norm = norm2(m);
    if m_norm == 0.0 {
        return Err(Error::UndefinedMetric("reference has zero Frobenius norm".into()));
    }
    let diff = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok((diff, m_norm))
}

/// `||X - M||_F / ||M||_F` over row-major pixel or entry arrays.
pub fn mse(x: &[f64], m: &[f64]) -> Result<f64> {
    let (diff, m_norm) = frobenius_parts(x, m)?;
    Ok(diff / m_norm)
}

/// Signal-to-noise ratio in decibels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Finite(f64),
    /// Reconstruction error at or below [`EXACT_REL_TOL`].
    Exact,
}

impl Snr {
    pub fn finite(self) -> Option<f64> {
        match self {
            Snr::Finite(v) => Some(v),
            Snr::Exact => None,
        }
    }

    pub fn is_exact(self) -> bool {
        self == Snr::Exact
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Finite(v) => write!(f, "{v:?}"),
            Snr::Exact => f.write_str("exact"),
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Finite(v) => s.serialize_f64(*v),
            Snr::Exact => s.serialize_str("exact"),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Tag(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Snr::Finite(v)),
            Repr::Tag(t) if t == "exact" => Ok(Snr::Exact),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("unknown SNR marker {t:?}"))),
        }
    }
}

/// `20 log10(||M||_F / ||X - M||_F)`.
pub fn snr_db(x: &[f64], m: &[f64]) -> Result<Snr> {
    let (diff, m_norm) = frobenius_parts(x, m)?;
    if diff <= EXACT_REL_TOL * m_norm {
        return Ok(Snr::Exact);
    }
    Ok(Snr::Finite(20.0 * (m_norm / diff).log10()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub ensemble: Ensemble,
    pub axis_value: f64,
    pub trial_index: usize,
    pub success: bool,
    /// Infinite when the solver failed.
    pub rel_err: f64,
    pub iterations: usize,
    pub seed: u64,
    /// `None` when the solver returned an error.
    pub status: Option<SolveStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// `None` for the zero signal.
    pub snr_db: Option<Snr>,
}

impl TrialOutcome {
    pub fn at(mut self, axis_value: f64, trial_index: usize) -> Self {
        self.axis_value = axis_value;
        self.trial_index = trial_index;
        self
    }
}

/// One planted recovery. Sub-seeds of `seed`: `[0]` matrix, `[1]` signal,
/// `[2]` noise. Noise-free trials use basis pursuit, noisy ones BPDN with
/// `eps = ||z||`. The returned outcome has `axis_value` 0 and
/// `trial_index` 0; [`sweep`] fills them in.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    ensemble: Ensemble,
    big_n: usize,
    n: usize,
    k: usize,
    sigma: f64,
    seed: u64,
    cfg: &SolverConfig,
    success_tol: f64,
) -> Result<TrialOutcome> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let phi = generate(ensemble, n, big_n, derive_seed(seed, &[0]))?;
    let x = plant_signal(big_n, k, derive_seed(seed, &[1]), SignalMode::PmOne)?;
    let mut y = matvec(&phi, &x.values, false)?;
    let mut noise_rng = SplitMix64::new(derive_seed(seed, &[2]));
    let z: Vec<f64> = (0..n)
        .map(|_| if sigma > 0.0 { sigma * noise_rng.next_normal() } else { 0.0 })
        .collect();
    y.iter_mut().zip(&z).for_each(|(yi, zi)| *yi += zi);

    let solved = if sigma == 0.0 {
        basis_pursuit(&phi, &y, cfg)
    } else {
        bpdn(&phi, &y, norm2(&z), cfg)
    };
    let base = TrialOutcome {
        ensemble,
        axis_value: 0.0,
        trial_index: 0,
        success: false,
        rel_err: f64::INFINITY,
        iterations: 0,
        seed,
        status: None,
        error: None,
        snr_db: None,
    };
    Ok(match solved {
        Ok(r) => {
            let (ok, rel_err) = success(&x, &r.solution, success_tol)?;
            TrialOutcome {
                success: ok,
                rel_err,
                iterations: r.iterations,
                status: Some(r.status),
                snr_db: snr_db(&r.solution, &x.values).ok(),
                ..base
            }
        }
        Err(e) => TrialOutcome {
            error: Some(e.to_string()),
            ..base
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Sparsity,
    Measurements,
    Noise,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Sparsity => "sparsity",
            Axis::Measurements => "measurements",
            Axis::Noise => "noise",
        }
    }

    fn is_integral(self) -> bool {
        self != Axis::Noise
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Axis::Sparsity, Axis::Measurements, Axis::Noise]
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown axis {s:?}")))
    }
}

/// Parameters held fixed while the sweep axis varies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

fn default_success_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ExperimentSpec {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub axis: Axis,
    pub axis_values: Vec<f64>,
    #[serde(default)]
    pub fixed: FixedParams,
    pub trials: usize,
    pub ensemble_list: Vec<Ensemble>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_success_tol")]
    pub success_tol: f64,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// `(n, k, sigma)` of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointParams {
    pub n: usize,
    pub k: usize,
    pub sigma: f64,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidInput(m));
        if self.big_n == 0 {
            return invalid("N must be >= 1".into());
        }
        if self.trials == 0 {
            return invalid("trials must be >= 1".into());
        }
        if self.axis_values.is_empty() {
            return invalid("axisValues must be nonempty".into());
        }
        if self.axis_values.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("axisValues must be strictly increasing".into());
        }
        for &v in &self.axis_values {
            if !v.is_finite() || v < 0.0 || (self.axis.is_integral() && v.fract() != 0.0) {
                return invalid(format!("axis value {v} is not valid for the {} axis", self.axis));
            }
        }
        if self.ensemble_list.is_empty() {
            return invalid("ensembleList must be nonempty".into());
        }
        for (i, e) in self.ensemble_list.iter().enumerate() {
            if *e == Ensemble::Explicit {
                return invalid("the explicit ensemble cannot be sampled".into());
            }
            if self.ensemble_list[..i].contains(e) {
                return invalid(format!("ensemble {e} listed twice"));
            }
        }
        if !(self.success_tol > 0.0 && self.success_tol.is_finite()) {
            return invalid(format!("successTol must be positive, got {}", self.success_tol));
        }
        self.solver.validate()?;
        let need = |name: &str, v: Option<usize>| {
            v.ok_or_else(|| Error::InvalidInput(format!("fixed.{name} is required for the {} axis", self.axis)))
        };
        let stray = |name: &str, present: bool| {
            if present {
                Err(Error::InvalidInput(format!("fixed.{name} conflicts with the {} axis", self.axis)))
            } else {
                Ok(())
            }
        };
        match self.axis {
            Axis::Sparsity => {
                need("n", self.fixed.n)?;
                stray("k", self.fixed.k.is_some())?;
            }
            Axis::Measurements => {
                need("k", self.fixed.k)?;
                stray("n", self.fixed.n.is_some())?;
            }
            Axis::Noise => {
                need("n", self.fixed.n)?;
                need("k", self.fixed.k)?;
                stray("sigma", self.fixed.sigma.is_some())?;
            }
        }
        if let Some(s) = self.fixed.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return invalid(format!("fixed.sigma must be >= 0, got {s}"));
            }
        }
        for i in 0..self.axis_values.len() {
            let p = self.point(i);
            if p.n == 0 || p.n > self.big_n {
                return invalid(format!("measurement count {} must be in 1..={}", p.n, self.big_n));
            }
            if p.k > self.big_n {
                return invalid(format!("sparsity {} exceeds N = {}", p.k, self.big_n));
            }
        }
        Ok(())
    }

    /// Parameters at axis index `i`; assumes a validated spec.
    pub fn point(&self, i: usize) -> PointParams {
        let v = self.axis_values[i];
        let mut p = PointParams {
            n: self.fixed.n.unwrap_or(0),
            k: self.fixed.k.unwrap_or(0),
            sigma: self.fixed.sigma.unwrap_or(0.0),
        };
        match self.axis {
            Axis::Sparsity => p.k = v as usize,
            Axis::Measurements => p.n = v as usize,
            Axis::Noise => p.sigma = v,
        }
        p
    }

    pub fn trial_seed(&self, ensemble_idx: usize, axis_idx: usize, trial: usize) -> u64 {
        derive_seed(self.master_seed, &[ensemble_idx as u64, axis_idx as u64, trial as u64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ensemble: Ensemble,
    pub axis: Axis,
    pub axis_value: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_rel_err: f64,
    pub mean_iterations: f64,
    /// Mean SNR over trials with a finite value.
    #[serde(default)]
    pub mean_snr_db: Option<f64>,
    /// Standard error of `mean_snr_db`.
    #[serde(default)]
    pub snr_stderr: Option<f64>,
    /// Trials whose reconstruction was exact.
    #[serde(default)]
    pub exact_snr: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: ExperimentSpec,
    pub rows: Vec<SweepRow>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn aggregate(ensemble: Ensemble, axis: Axis, axis_value: f64, outcomes: &[TrialOutcome]) -> SweepRow {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.success).count();
    let mean = |it: Vec<f64>| compensated_sum(it.iter().copied()) / it.len() as f64;
    let finite_snr: Vec<f64> = outcomes.iter().filter_map(|o| o.snr_db.and_then(Snr::finite)).collect();
    let (mean_snr_db, snr_stderr) = match finite_snr.len() {
        0 => (None, None),
        1 => (Some(finite_snr[0]), None),
        m => {
            let mu = mean(finite_snr.clone());
            let var = compensated_sum(finite_snr.iter().map(|v| (v - mu) * (v - mu))) / (m - 1) as f64;
            (Some(mu), Some((var / m as f64).sqrt()))
        }
    };
    SweepRow {
        ensemble,
        axis,
        axis_value,
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        mean_rel_err: mean(outcomes.iter().map(|o| o.rel_err).collect()),
        mean_iterations: mean(outcomes.iter().map(|o| o.iterations as f64).collect()),
        mean_snr_db,
        snr_stderr,
        exact_snr: outcomes.iter().filter(|o| o.snr_db.is_some_and(Snr::is_exact)).count(),
    }
}

/// Runs every `(ensemble, axis value, trial)` of the spec on the current
/// rayon pool. Results do not depend on the pool size.
pub fn sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    sweep_with_progress(spec, |_, _| {})
}

/// As [`sweep`], calling `progress(done, total)` after each finished trial.
pub fn sweep_with_progress<F>(spec: &ExperimentSpec, progress: F) -> Result<SweepResult>
where
    F: Fn(usize, usize) + Sync,
{
    spec.validate()?;
    let (ne, na, nt) = (spec.ensemble_list.len(), spec.axis_values.len(), spec.trials);
    let total = ne * na * nt;
    let done = AtomicUsize::new(0);
    let outcomes: Vec<TrialOutcome> = (0..total)
        .into_par_iter()
        .map(|task| {
            let (e, a, t) = (task / (na * nt), (task / nt) % na, task % nt);
            let p = spec.point(a);
            let ensemble = spec.ensemble_list[e];
            let seed = spec.trial_seed(e, a, t);
            let outcome = run_trial(ensemble, spec.big_n, p.n, p.k, p.sigma, seed, &spec.solver, spec.success_tol)
                .unwrap_or_else(|err| TrialOutcome {
                    ensemble,
                    axis_value: 0.0,
                    trial_index: 0,
                    success: false,
                    rel_err: f64::INFINITY,
                    iterations: 0,
                    seed,
                    status: None,
                    error: Some(err.to_string()),
                    snr_db: None,
                });
            progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
            outcome.at(spec.axis_values[a], t)
        })
        .collect();
    let rows = outcomes
        .chunks(nt)
        .enumerate()
        .map(|(i, chunk)| {
            let (e, a) = (i / na, i % na);
            aggregate(spec.ensemble_list[e], spec.axis, spec.axis_values[a], chunk)
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
        outcomes,
    })
}

pub const CSV_HEADER: &str = "ensemble,axis,axis_value,trials,successes,success_rate,mean_rel_err,mean_iterations";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

fn format_axis_value(axis: Axis, v: f64) -> String {
    if axis.is_integral() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

/// Canonical CSV rendering of sweep rows.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:?},{:?},{:?}\n",
            r.ensemble,
            r.axis,
            format_axis_value(r.axis, r.axis_value),
            r.trials,
            r.successes,
            r.success_rate,
            r.mean_rel_err,
            r.mean_iterations
        ));
    }
    out
}

/// Parses the CSV written by [`rows_to_csv`]; SNR fields come back empty.
pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    let mut offset = 0;
    match lines.next() {
        Some(h) if h == CSV_HEADER => offset += h.len() + 1,
        _ => {
            return Err(Error::Parse {
                offset: 0,
                msg: "missing or unexpected CSV header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        let bad = |msg: String| Error::Parse { offset, msg };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(format!("expected 8 fields, found {}", f.len())));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| bad(format!("field {}: {e}", i + 1)));
        let int = |i: usize| f[i].parse::<usize>().map_err(|e| bad(format!("field {}: {e}", i + 1)));
        rows.push(SweepRow {
            ensemble: f[0].parse().map_err(|e: Error| bad(e.to_string()))?,
            axis: f[1].parse().map_err(|e: Error| bad(e.to_string()))?,
            axis_value: num(2)?,
            trials: int(3)?,
            successes: int(4)?,
            success_rate: num(5)?,
            mean_rel_err: num(6)?,
            mean_iterations: num(7)?,
            mean_snr_db: None,
            snr_stderr: None,
            exact_snr: 0,
        });
        offset += line.len() + 1;
    }
    Ok(rows)
}

pub fn render_results(result: &SweepResult, format: OutputFormat) -> Result<String> {
    Ok(match format {
        OutputFormat::Csv => rows_to_csv(&result.rows),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(result)?;
            s.push('\n');
            s
        }
    })
}

pub fn write_results(result: &SweepResult, format: OutputFormat, path: &Path) -> Result<()> {
    let text = render_results(result, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
