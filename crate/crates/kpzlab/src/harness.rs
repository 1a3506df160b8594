//! Experiment orchestration and statistics.
//!
//! The building blocks are
//!
//! * statistics: one- and two-sample Kolmogorov–Smirnov distances,
//!   log-log exponent fits and batch jackknife standard errors;
//! * [`ExperimentConfig`], the JSON configuration shared by the CLI
//!   subcommands, and [`Report`], the per-run JSON record;
//! * experiment runners: exact identity checks, KPZ scaling of the
//!   fluctuations, the rescaled height distribution against Baik–Rains,
//!   the six-vertex → ASEP degeneration and the ferroelectric mapping checks.
//!
//! Every runner is deterministic given its configuration and seed: samples are
//! drawn from per-sample streams (see [`crate::rng`]), so reports do not depend
//! on the number of worker threads. Only the wall-clock fields vary between
//! runs.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airy::{baik_rains_cdf, AiryError};
use crate::asep::{characteristic_site, degeneration_check, sample_currents, AsepError};
use crate::contour::{
    fredholm_v, place_contours_asep, place_contours_vertex, q_moment_integral, ContourError, GFunction, QMomentParams,
};
use crate::params::{
    derive_six_vertex, ferro_to_stochastic, free_energy, scaling_constants_vertex, stochastic_to_ferro,
    translation_invariant_b2, AsepParams, FerroWeights, ParamError, ScalingConstants, SixVertexParams,
};
use crate::qseries::QParam;
use crate::rng::{derive_seed, sample_rng};
use crate::vertex_model::{
    exact_fredholm_lhs, exact_weighted_q_moment, fredholm_observable, sample_entrance_profile, sample_heights,
    BoundarySpec, HeightDistribution, VertexError,
};
use crate::{Cplx, Real};

/// Errors from the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    /// A statistic was requested on an empty sample.
    #[error("empty sample")]
    Empty,
    /// Invalid input or configuration.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Parameter validation failed.
    #[error(transparent)]
    Param(#[from] ParamError),
    /// Vertex-model engine failure.
    #[error(transparent)]
    Vertex(#[from] VertexError),
    /// ASEP sampler failure.
    #[error(transparent)]
    Asep(#[from] AsepError),
    /// Contour / determinant failure.
    #[error(transparent)]
    Contour(#[from] ContourError),
    /// Airy / Baik–Rains failure.
    #[error(transparent)]
    Airy(#[from] AiryError),
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

fn sorted(samples: &[Real]) -> Result<Vec<Real>, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::Empty);
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(HarnessError::Invalid("NaN sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    Ok(s)
}

/// Kolmogorov–Smirnov distance `sup_x |F_n(x) - F(x)|` between the empirical
/// CDF of `samples` and a continuous `cdf`.
///
/// Ties are handled exactly: at an atom `x` the empirical CDF jumps from
/// `#{< x}/n` to `#{≤ x}/n` and both one-sided limits are compared with
/// `F(x)`. The `cdf` is evaluated once per distinct sample value.
pub fn ks_distance<F: Fn(Real) -> Real>(samples: &[Real], cdf: F) -> Result<Real, HarnessError> {
    let s = sorted(samples)?;
    let n = s.len() as Real;
    let mut d: Real = 0.0;
    let mut i = 0;
    while i < s.len() {
        let x = s[i];
        let mut j = i;
        while j < s.len() && s[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((f - i as Real / n).abs()).max((j as Real / n - f).abs());
        i = j;
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[Real], b: &[Real]) -> Result<Real, HarnessError> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as Real, b.len() as Real);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: Real = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as Real / na - j as Real / nb).abs());
    }
    Ok(d)
}

/// Least-squares slope of `log(stat)` against `log(T)`.
pub fn fit_exponent(t: &[Real], stat: &[Real]) -> Result<Real, HarnessError> {
    if t.len() != stat.len() {
        return Err(HarnessError::Invalid(format!("{} times but {} statistics", t.len(), stat.len())));
    }
    if t.len() < 3 {
        return Err(HarnessError::Invalid("an exponent fit needs at least 3 points".into()));
    }
    if t.iter().chain(stat).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(HarnessError::Invalid("exponent fit needs positive finite entries".into()));
    }
    let lx: Vec<Real> = t.iter().map(|v| v.ln()).collect();
    let ly: Vec<Real> = stat.iter().map(|v| v.ln()).collect();
    let n = lx.len() as Real;
    let mx = lx.iter().sum::<Real>() / n;
    let my = ly.iter().sum::<Real>() / n;
    let sxy: Real = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: Real = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Invalid("all times are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Number of batches used for jackknife standard errors.
pub const JACKKNIFE_BATCHES: usize = 16;

/// A statistic with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Value on the full sample.
    pub value: Real,
    /// Standard error.
    pub se: Real,
}

/// Batch jackknife: the sample is split into `batches` contiguous batches and
/// the statistic is recomputed with each batch left out;
/// `se² = (B-1)/B Σ (θ_i - θ̄)²`.
pub fn jackknife<T: Clone, F: Fn(&[T]) -> Real>(samples: &[T], batches: usize, stat: F) -> Result<Estimate, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::Empty);
    }
    if batches < 2 || samples.len() < batches {
        return Err(HarnessError::Invalid(format!(
            "jackknife needs 2 <= batches <= n (batches = {batches}, n = {})",
            samples.len()
        )));
    }
    let n = samples.len();
    let bounds: Vec<usize> = (0..=batches).map(|b| b * n / batches).collect();
    let theta: Vec<Real> = (0..batches)
        .map(|b| {
            let mut rest = Vec::with_capacity(n);
            rest.extend_from_slice(&samples[..bounds[b]]);
            rest.extend_from_slice(&samples[bounds[b + 1]..]);
            stat(&rest)
        })
        .collect();
    let bf = batches as Real;
    let mean = theta.iter().sum::<Real>() / bf;
    let var = theta.iter().map(|t| (t - mean).powi(2)).sum::<Real>() * (bf - 1.0) / bf;
    Ok(Estimate { value: stat(samples), se: var.sqrt() })
}

/// Sample mean.
pub fn mean(v: &[Real]) -> Real {
    v.iter().sum::<Real>() / v.len() as Real
}

/// Unbiased sample variance.
pub fn variance(v: &[Real]) -> Real {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<Real>() / (v.len() as Real - 1.0)
}

/// Sample standard deviation.
pub fn std_dev(v: &[Real]) -> Real {
    variance(v).sqrt()
}

fn to_real(v: &[i64]) -> Vec<Real> {
    v.iter().map(|&x| x as Real).collect()
}

// ---------------------------------------------------------------------------
// Configuration and reports
// ---------------------------------------------------------------------------

/// Which model an experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    /// Stochastic six-vertex model.
    Vertex,
    /// ASEP.
    Asep,
}

/// JSON experiment configuration.
///
/// Every key is optional; runners fall back to documented defaults. `seed`,
/// `x`, `eps` and `p` are additions to the core key set (`model`, `delta1`,
/// `delta2`, `b1`, `b2`, `L`, `R`, `b`, `c`, `T_list`, `samples`,
/// `tolerances`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Model to run.
    #[serde(default)]
    pub model: Option<ModelName>,
    /// Six-vertex `delta1`.
    #[serde(default)]
    pub delta1: Option<Real>,
    /// Six-vertex `delta2`.
    #[serde(default)]
    pub delta2: Option<Real>,
    /// Density on the y-axis / on sites `≤ 0`.
    #[serde(default)]
    pub b1: Option<Real>,
    /// Density on the x-axis / on sites `> 0`.
    #[serde(default)]
    pub b2: Option<Real>,
    /// ASEP left jump rate.
    #[serde(default, rename = "L")]
    pub l: Option<Real>,
    /// ASEP right jump rate.
    #[serde(default, rename = "R")]
    pub r: Option<Real>,
    /// Stationary density (sets `b1 = b2 = b` for the ASEP).
    #[serde(default)]
    pub b: Option<Real>,
    /// Characteristic offset `c`.
    #[serde(default)]
    pub c: Option<Real>,
    /// Times.
    #[serde(default, rename = "T_list")]
    pub t_list: Option<Vec<Real>>,
    /// Samples per time.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Named tolerances overriding the defaults of each runner.
    #[serde(default)]
    pub tolerances: BTreeMap<String, Real>,
    /// Base seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Observation site (ASEP) / column offset.
    #[serde(default)]
    pub x: Option<i64>,
    /// Degeneration parameter `ε`.
    #[serde(default)]
    pub eps: Option<Real>,
    /// Exponent `p` of `ζ = -q^p`.
    #[serde(default)]
    pub p: Option<Real>,
}

/// Default base seed.
pub const DEFAULT_SEED: u64 = 20_240_917;

impl ExperimentConfig {
    /// Tolerance `name`, or `default` when not configured.
    pub fn tolerance(&self, name: &str, default: Real) -> Real {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// Base seed.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Samples per time, or `default`.
    pub fn samples_or(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }

    /// Times, or `default`.
    pub fn times_or(&self, default: &[Real]) -> Vec<Real> {
        self.t_list.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Six-vertex parameters; `b2` defaults to the translation-invariant
    /// partner of `b1`. Defaults: `delta1 = 0.25`, `delta2 = 0.5`, `b1 = 0.5`.
    pub fn vertex_params(&self) -> Result<SixVertexParams, HarnessError> {
        let d1 = self.delta1.unwrap_or(0.25);
        let d2 = self.delta2.unwrap_or(0.5);
        let b1 = self.b1.or(self.b).unwrap_or(0.5);
        let b2 = match self.b2 {
            Some(b2) => b2,
            None => translation_invariant_b2(d1, d2, b1)?,
        };
        Ok(derive_six_vertex(d1, d2, b1, b2)?)
    }

    /// ASEP parameters; `b` (if present) sets `b1 = b2 = b`. Defaults:
    /// `L = 0.25`, `R = 1`, `b = 0.5`.
    pub fn asep_params(&self) -> Result<AsepParams, HarnessError> {
        let l = self.l.unwrap_or(0.25);
        let r = self.r.unwrap_or(1.0);
        let (b1, b2) = match self.b {
            Some(b) => (b, b),
            None => (self.b1.unwrap_or(0.5), self.b2.unwrap_or(self.b1.unwrap_or(0.5))),
        };
        Ok(AsepParams::new(l, r, b1, b2)?)
    }
}

/// How a record's pass/fail was decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    /// `|value - reference| ≤ tol`.
    Absolute(Real),
    /// `value ≤ bound`.
    AtMost(Real),
    /// `lo ≤ value ≤ hi`.
    Range {
        /// Lower end.
        lo: Real,
        /// Upper end.
        hi: Real,
    },
    /// `|value - reference| ≤ k · se`.
    StandardErrors {
        /// Number of standard errors.
        k: Real,
        /// Standard error.
        se: Real,
    },
}

/// One line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// What was measured.
    pub name: String,
    /// Inputs of this measurement.
    pub inputs: BTreeMap<String, Real>,
    /// Computed value.
    pub value: Real,
    /// Reference value, if any.
    pub reference: Option<Real>,
    /// `|value - reference|`, if a reference exists.
    pub discrepancy: Option<Real>,
    /// Tolerance used for the verdict.
    pub tolerance: Option<Tolerance>,
    /// Verdict (absent for plain measurements).
    pub pass: Option<bool>,
    /// Wall-clock time spent on this record in seconds.
    pub wall_time_s: Real,
}

fn inputs(pairs: &[(&str, Real)]) -> BTreeMap<String, Real> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

impl Record {
    /// A measurement without a verdict.
    pub fn measurement(name: &str, inputs: BTreeMap<String, Real>, value: Real) -> Self {
        Self { name: name.into(), inputs, value, reference: None, discrepancy: None, tolerance: None, pass: None, wall_time_s: 0.0 }
    }

    /// Compares `value` to `reference` under `tolerance`.
    pub fn compare(name: &str, inputs: BTreeMap<String, Real>, value: Real, reference: Real, tolerance: Tolerance) -> Self {
        let disc = (value - reference).abs();
        let pass = match tolerance {
            Tolerance::Absolute(t) => disc <= t,
            Tolerance::StandardErrors { k, se } => disc <= k * se,
            Tolerance::AtMost(b) => value <= b,
            Tolerance::Range { lo, hi } => (lo..=hi).contains(&value),
        };
        Self {
            name: name.into(),
            inputs,
            value,
            reference: Some(reference),
            discrepancy: Some(disc),
            tolerance: Some(tolerance),
            pass: Some(pass && value.is_finite()),
            wall_time_s: 0.0,
        }
    }

    /// Checks `value` against a one-sided bound or a range.
    pub fn check(name: &str, inputs: BTreeMap<String, Real>, value: Real, tolerance: Tolerance) -> Self {
        let pass = match tolerance {
            Tolerance::AtMost(b) => value <= b,
            Tolerance::Range { lo, hi } => (lo..=hi).contains(&value),
            Tolerance::Absolute(t) => value.abs() <= t,
            Tolerance::StandardErrors { k, se } => value.abs() <= k * se,
        };
        Self {
            name: name.into(),
            inputs,
            value,
            reference: None,
            discrepancy: None,
            tolerance: Some(tolerance),
            pass: Some(pass && value.is_finite()),
            wall_time_s: 0.0,
        }
    }

    /// Sets the wall-clock time.
    pub fn timed(mut self, seconds: Real) -> Self {
        self.wall_time_s = seconds;
        self
    }
}

/// Report of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Experiment name.
    pub experiment: String,
    /// Configuration the run used.
    pub config: ExperimentConfig,
    /// Records.
    pub records: Vec<Record>,
    /// Total wall-clock time in seconds.
    pub wall_time_s: Real,
}

impl Report {
    /// Empty report.
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        Self { experiment: experiment.into(), config: config.clone(), records: Vec::new(), wall_time_s: 0.0 }
    }

    /// `true` when every record with a verdict passed.
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass != Some(false))
    }

    /// Records carrying a verdict.
    pub fn verdicts(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.pass.is_some())
    }

    /// The record with the given name, if any.
    pub fn record(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Report with the wall-clock fields zeroed (for reproducibility
    /// comparisons).
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.wall_time_s = 0.0;
        for rec in &mut r.records {
            rec.wall_time_s = 0.0;
        }
        r
    }
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

/// Monte Carlo samples of one model at one time.
///
/// Sample `i` was drawn from stream `i` of `base_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    /// Model.
    pub model: ModelName,
    /// Macroscopic time `T`.
    pub t: Real,
    /// Observation column (vertex) or site (ASEP).
    pub x: i64,
    /// Observation row (vertex only).
    pub y: Option<i64>,
    /// Base seed.
    pub base_seed: u64,
    /// Heights / currents.
    pub values: Vec<i64>,
}

impl SampleRun {
    /// The first `n` samples (identical to a run with `n` samples).
    pub fn truncated(&self, n: usize) -> Self {
        let mut r = self.clone();
        r.values.truncate(n);
        r
    }
}

/// Seed used for time `t` of a run with base seed `seed`.
pub fn seed_for_time(seed: u64, t: Real) -> u64 {
    derive_seed(seed, t.to_bits())
}

/// Observation point `(X, Y)` of the vertex model at time `T` and offset `c`:
/// `X = x_coef (T + ς c T^{2/3})`, `Y = y_coef T`, rounded.
pub fn vertex_observation_point(sc: &ScalingConstants, t: Real, c: Real) -> Result<(usize, usize), HarnessError> {
    let (xc, yc, vs) = match (sc.x_coef, sc.y_coef, sc.varsigma) {
        (Some(a), Some(b), Some(v)) => (a, b, v),
        _ => return Err(HarnessError::Invalid("vertex scaling constants required".into())),
    };
    let x = (xc * (t + vs * c * t.powf(2.0 / 3.0))).round();
    let y = (yc * t).round();
    if !(x >= 1.0 && y >= 1.0) {
        return Err(HarnessError::Invalid(format!("observation point ({x}, {y}) outside the quadrant")));
    }
    Ok((x as usize, y as usize))
}

/// Samples `ℌ` at the observation point of each time in `times`.
pub fn vertex_runs(p: &SixVertexParams, times: &[Real], c: Real, n: usize, seed: u64) -> Result<Vec<SampleRun>, HarnessError> {
    let sc = scaling_constants_vertex(p)?;
    let boundary = BoundarySpec::double_bernoulli(p.b1, p.b2);
    times
        .iter()
        .map(|&t| {
            let (x, y) = vertex_observation_point(&sc, t, c)?;
            let s = seed_for_time(seed, t);
            let values = sample_heights(&p.rates(), x, y, &boundary, s, n)?;
            Ok(SampleRun { model: ModelName::Vertex, t, x: x as i64, y: Some(y as i64), base_seed: s, values })
        })
        .collect()
}

/// Samples `J_T` at the characteristic site of each time in `times`.
pub fn asep_runs(p: &AsepParams, times: &[Real], n: usize, seed: u64) -> Result<Vec<SampleRun>, HarnessError> {
    times
        .iter()
        .map(|&t| {
            let x = characteristic_site(p, t);
            let s = seed_for_time(seed, t);
            let values = sample_currents(p, x, t, s, n)?;
            Ok(SampleRun { model: ModelName::Asep, t, x, y: None, base_seed: s, values })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Scaling experiment
// ---------------------------------------------------------------------------

/// Default exponent window for the standard deviation of the six-vertex
/// height (`T^{1/3}`).
pub const VERTEX_EXPONENT_BAND: (Real, Real) = (0.23, 0.43);
/// Default exponent window for the variance of the ASEP current (`T^{2/3}`).
pub const ASEP_EXPONENT_BAND: (Real, Real) = (0.5, 0.85);

/// Fits the growth exponent of the fluctuations: the standard deviation for
/// the vertex model, the variance for the ASEP. Records the statistic (with
/// jackknife errors) per time and the fitted exponent against `band`.
pub fn scaling_report(config: &ExperimentConfig, runs: &[SampleRun], band: (Real, Real)) -> Result<Report, HarnessError> {
    let start = Instant::now();
    let mut report = Report::new("scaling", config);
    let mut ts = Vec::new();
    let mut stats = Vec::new();
    for run in runs {
        let v = to_real(&run.values);
        let (name, est) = match run.model {
            ModelName::Vertex => ("std", jackknife(&v, JACKKNIFE_BATCHES, std_dev)?),
            ModelName::Asep => ("variance", jackknife(&v, JACKKNIFE_BATCHES, variance)?),
        };
        let inp = inputs(&[("T", run.t), ("x", run.x as Real), ("samples", v.len() as Real)]);
        report.records.push(Record::measurement(name, inp.clone(), est.value));
        report.records.push(Record::measurement(&format!("{name}_se"), inp.clone(), est.se));
        report.records.push(Record::measurement("mean", inp, mean(&v)));
        ts.push(run.t);
        stats.push(est.value);
    }
    let exponent = fit_exponent(&ts, &stats)?;
    report.records.push(
        Record::check("exponent", inputs(&[("points", ts.len() as Real)]), exponent, Tolerance::Range { lo: band.0, hi: band.1 })
            .timed(start.elapsed().as_secs_f64()),
    );
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs the scaling experiment described by `config` (model defaults to the
/// vertex model; times default to 250, 1000, 4000 (vertex) or 50, 200, 800
/// (ASEP); 2000 samples per time).
pub fn run_scaling_experiment(config: &ExperimentConfig) -> Result<(Report, Vec<SampleRun>), HarnessError> {
    let start = Instant::now();
    let n = config.samples_or(2000);
    let (runs, band) = match config.model.unwrap_or(ModelName::Vertex) {
        ModelName::Vertex => {
            let p = config.vertex_params()?;
            let t = config.times_or(&[250.0, 1000.0, 4000.0]);
            let band = (
                config.tolerance("exponent_lo", VERTEX_EXPONENT_BAND.0),
                config.tolerance("exponent_hi", VERTEX_EXPONENT_BAND.1),
            );
            (vertex_runs(&p, &t, config.c.unwrap_or(0.0), n, config.seed())?, band)
        }
        ModelName::Asep => {
            let p = config.asep_params()?;
            let t = config.times_or(&[50.0, 200.0, 800.0]);
            let band = (
                config.tolerance("exponent_lo", ASEP_EXPONENT_BAND.0),
                config.tolerance("exponent_hi", ASEP_EXPONENT_BAND.1),
            );
            (asep_runs(&p, &t, n, config.seed())?, band)
        }
    };
    let mut report = scaling_report(config, &runs, band)?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((report, runs))
}

// ---------------------------------------------------------------------------
// Rescaled distribution
// ---------------------------------------------------------------------------

/// Centering of `ℌ` at time `T` and offset `c`:
/// `b1 b2 (δ2 - δ1) T - b1 (1 - δ2) ς c T^{2/3}`.
pub fn vertex_centering(p: &SixVertexParams, sc: &ScalingConstants, t: Real, c: Real) -> Real {
    let growth = sc.growth.unwrap_or(p.b1 * p.b2 * (p.delta2 - p.delta1));
    growth * t - p.b1 * (1.0 - p.delta2) * sc.varsigma.unwrap_or(0.0) * c * t.powf(2.0 / 3.0)
}

/// Rescales heights to Baik–Rains units, `s = (centering - ℌ) / (𝓕 T^{1/3})`,
/// so that `P[s ≤ σ] = P[ℌ ≥ centering - 𝓕 σ T^{1/3}] ≈ F_{BR;c}(σ)`.
pub fn rescale_heights(p: &SixVertexParams, t: Real, c: Real, heights: &[i64]) -> Result<Vec<Real>, HarnessError> {
    let sc = scaling_constants_vertex(p)?;
    let f = sc.f_xy.ok_or_else(|| HarnessError::Invalid("missing 𝓕".into()))?;
    let centre = vertex_centering(p, &sc, t, c);
    let scale = f * t.cbrt();
    Ok(heights.iter().map(|&h| (centre - h as Real) / scale).collect())
}

/// Left end below which `F_{BR;c}` is treated as 0.
pub const BR_LOWER: Real = -8.0;
/// Right end above which `F_{BR;c}` is treated as 1.
pub const BR_UPPER: Real = 15.0;

/// `F_{BR;c}` at every distinct value of `points` (clamped to 0 below
/// [`BR_LOWER`] and 1 above [`BR_UPPER`]), evaluated in parallel.
pub fn baik_rains_at(c: Real, points: &[Real]) -> Result<HashMap<u64, Real>, HarnessError> {
    let mut distinct: Vec<Real> = points.to_vec();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    let vals: Result<Vec<(u64, Real)>, AiryError> = distinct
        .par_iter()
        .map(|&s| {
            let f = if s < BR_LOWER {
                0.0
            } else if s > BR_UPPER {
                1.0
            } else {
                baik_rains_cdf(c, s)?
            };
            Ok((s.to_bits(), f))
        })
        .collect();
    Ok(vals?.into_iter().collect())
}

/// Compares the rescaled heights of each run with `F_{BR;c}`: KS distance
/// (with jackknife error; checked against `ks_tol` at the largest time only),
/// and the centering sanity check
/// `|mean ℌ - centering| ≤ 4 SE`.
pub fn distribution_report(
    config: &ExperimentConfig,
    p: &SixVertexParams,
    c: Real,
    runs: &[SampleRun],
    ks_tol: Real,
) -> Result<Report, HarnessError> {
    let start = Instant::now();
    let sc = scaling_constants_vertex(p)?;
    let mut report = Report::new("distribution", config);
    let t_max = runs.iter().map(|r| r.t).fold(Real::NEG_INFINITY, Real::max);
    for run in runs {
        let t0 = Instant::now();
        let s = rescale_heights(p, run.t, c, &run.values)?;
        let table = baik_rains_at(c, &s)?;
        let cdf = |v: Real| table[&v.to_bits()];
        let ks = jackknife(&s, JACKKNIFE_BATCHES, |xs| ks_distance(xs, cdf).unwrap_or(Real::NAN))?;
        let inp = inputs(&[("T", run.t), ("c", c), ("X", run.x as Real), ("Y", run.y.unwrap_or(0) as Real), ("samples", s.len() as Real)]);
        report.records.push(Record::measurement("ks_se", inp.clone(), ks.se));
        // the tolerance targets the largest time; smaller times document the trend
        let ks_rec = if run.t >= t_max {
            Record::check("ks", inp.clone(), ks.value, Tolerance::AtMost(ks_tol))
        } else {
            Record::measurement("ks", inp.clone(), ks.value)
        };
        report.records.push(ks_rec.timed(t0.elapsed().as_secs_f64()));
        let h = to_real(&run.values);
        let se = (variance(&h) / h.len() as Real).sqrt();
        let centre = vertex_centering(p, &sc, run.t, c);
        report.records.push(Record::compare("centering", inp, mean(&h), centre, Tolerance::StandardErrors { k: 4.0, se }));
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Rescaled-distribution experiment on the translation-invariant six-vertex
/// model (defaults: δ1 = 0.25, δ2 = 0.5, b1 = 0.5, c = 0, T = 250, 1000,
/// 4000, 4000 samples, KS tolerance 0.08).
pub fn run_rescaled_distribution_experiment(config: &ExperimentConfig) -> Result<(Report, Vec<SampleRun>), HarnessError> {
    let start = Instant::now();
    let p = config.vertex_params()?;
    let c = config.c.unwrap_or(0.0);
    let t = config.times_or(&[250.0, 1000.0, 4000.0]);
    let runs = vertex_runs(&p, &t, c, config.samples_or(4000), config.seed())?;
    let mut report = distribution_report(config, &p, c, &runs, config.tolerance("ks", 0.08))?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((report, runs))
}

// ---------------------------------------------------------------------------
// Degeneration
// ---------------------------------------------------------------------------

/// Six-vertex → ASEP degeneration: two-sample KS distance between
/// `ℌ(x + ⌊T/ε⌋, ⌊T/ε⌋)` at `δ1 = εL`, `δ2 = εR` and `J_T(x)` (defaults:
/// L = 0, R = 1, b1 = b2 = 0.3, T = 2, x = 0, ε = 0.01, 20000 samples, KS
/// tolerance 0.05).
pub fn run_degeneration_check(config: &ExperimentConfig) -> Result<(Report, Vec<SampleRun>), HarnessError> {
    let start = Instant::now();
    let mut cfg = config.clone();
    cfg.l = Some(config.l.unwrap_or(0.0));
    if config.b.is_none() && config.b1.is_none() {
        cfg.b = Some(0.3);
    }
    let p = cfg.asep_params()?;
    let eps = config.eps.unwrap_or(0.01);
    let t = config.times_or(&[2.0])[0];
    let x = config.x.unwrap_or(0);
    let n = config.samples_or(20_000);
    let seed = config.seed();
    let d = degeneration_check(&p, eps, x, t, n, seed)?;
    let mut report = Report::new("degeneration", &cfg);
    let inp = inputs(&[("eps", eps), ("T", t), ("x", x as Real), ("samples", n as Real), ("X", d.x_vertex as Real), ("Y", d.y_vertex as Real)]);
    let (hv, ja) = (to_real(&d.vertex), to_real(&d.asep));
    report.records.push(Record::measurement("vertex_mean", inp.clone(), mean(&hv)));
    report.records.push(Record::measurement("asep_mean", inp.clone(), mean(&ja)));
    report.records.push(Record::measurement("vertex_variance", inp.clone(), variance(&hv)));
    report.records.push(Record::measurement("asep_variance", inp.clone(), variance(&ja)));
    report.records.push(
        Record::check("two_sample_ks", inp, d.ks, Tolerance::AtMost(config.tolerance("ks", 0.05))).timed(start.elapsed().as_secs_f64()),
    );
    report.wall_time_s = start.elapsed().as_secs_f64();
    let runs = vec![
        SampleRun { model: ModelName::Vertex, t, x: d.x_vertex as i64, y: Some(d.y_vertex as i64), base_seed: d.vertex_seed, values: d.vertex },
        SampleRun { model: ModelName::Asep, t, x, y: None, base_seed: d.asep_seed, values: d.asep },
    ];
    Ok((report, runs))
}

// ---------------------------------------------------------------------------
// Ferroelectric mapping and stationarity
// ---------------------------------------------------------------------------

/// Pearson correlation of two indicator columns.
fn correlation(a: &[Real], b: &[Real]) -> Real {
    let (ma, mb) = (mean(a), mean(b));
    let cov: Real = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: Real = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: Real = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Mapping checks: the stochastic ↔ ferroelectric round trips (tolerance
/// 1e-12), `free_energy(h = v) = -log a` exactly, and the stationarity of the
/// translation-invariant model: the arrows entering the quadrant
/// `{x > 4, y > 4}` (4 along each edge) are Bernoulli(b2) vertically and
/// Bernoulli(b1) horizontally (means within 4 SE) and pairwise uncorrelated
/// (`|ρ| < 4/√n`); default `n = 10^5`.
pub fn run_mapping_check(config: &ExperimentConfig) -> Result<Report, HarnessError> {
    let start = Instant::now();
    let mut report = Report::new("mapping", config);
    let tol = config.tolerance("round_trip", 1e-12);
    // stochastic -> ferro -> stochastic
    let mut worst: Real = 0.0;
    for i in 1..20 {
        for j in (i + 1)..20 {
            let (d1, d2) = (i as Real / 20.0, j as Real / 20.0);
            let w = stochastic_to_ferro(d1, d2)?;
            let (e1, e2) = ferro_to_stochastic(&w)?;
            worst = worst.max((e1 - d1).abs()).max((e2 - d2).abs());
        }
    }
    report.records.push(Record::check("round_trip_stochastic", inputs(&[("grid", 20.0)]), worst, Tolerance::Absolute(tol)));
    // ferro -> stochastic -> ferro (up to the normalisation a = 1)
    let mut worst: Real = 0.0;
    for (a, b, c) in [(2.0, 1.0, 0.5), (1.0, 0.3, 0.4), (3.0, 0.5, 1.2), (1.5, 1.0, 0.2)] {
        let w = FerroWeights::new(a, b, c)?;
        let (d1, d2) = ferro_to_stochastic(&w)?;
        let back = stochastic_to_ferro(d1, d2)?;
        worst = worst.max((back.b * a - b).abs()).max((back.c * a - c).abs()).max((back.a * a - a).abs());
    }
    report.records.push(Record::check("round_trip_ferro", inputs(&[("points", 4.0)]), worst, Tolerance::Absolute(tol)));
    // free energy on the diagonal
    for (a, b, c, h) in [(2.0, 1.0, 0.5, 0.4), (1.0, 0.3, 0.4, 0.7), (3.0, 0.5, 1.2, 0.1)] {
        let w = FerroWeights::new(a, b, c)?;
        let f = free_energy(&w, h, h)?;
        report.records.push(Record::compare(
            "free_energy_diagonal",
            inputs(&[("a", a), ("b", b), ("c", c), ("h", h)]),
            f,
            -(a as Real).ln(),
            Tolerance::Absolute(0.0),
        ));
    }
    // stationarity of the entrance profile
    let p = config.vertex_params()?;
    let n = config.samples_or(100_000);
    let (x0, y0, w, h) = (4usize, 4usize, 4usize, 4usize);
    let seed = config.seed();
    let profiles: Vec<Vec<Real>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let e = sample_entrance_profile(&p, x0, y0, w, h, &mut sample_rng(seed, i as u64));
            e.vertical.iter().chain(&e.horizontal).map(|&b| b as u8 as Real).collect()
        })
        .collect();
    let cols: Vec<Vec<Real>> = (0..(w + h)).map(|k| profiles.iter().map(|r| r[k]).collect()).collect();
    for (k, col) in cols.iter().enumerate() {
        let (name, b, pos) = if k < w { ("vertical_marginal", p.b2, k) } else { ("horizontal_marginal", p.b1, k - w) };
        let se = (b * (1.0 - b) / n as Real).sqrt();
        report.records.push(Record::compare(
            name,
            inputs(&[("index", pos as Real), ("samples", n as Real)]),
            mean(col),
            b,
            Tolerance::StandardErrors { k: 4.0, se },
        ));
    }
    let mut worst: Real = 0.0;
    for i in 0..cols.len() {
        for j in (i + 1)..cols.len() {
            worst = worst.max(correlation(&cols[i], &cols[j]).abs());
        }
    }
    let bound = 4.0 / (n as Real).sqrt();
    report.records.push(Record::check("max_pair_correlation", inputs(&[("samples", n as Real)]), worst, Tolerance::AtMost(bound)));
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

// ---------------------------------------------------------------------------
// Exact identities
// ---------------------------------------------------------------------------

/// Node-doubling tolerance of the Fredholm evaluations in the identity checks.
pub const FREDHOLM_DOUBLING_TOL: Real = 1e-8;

/// q-moment identity: the nested contour integral against the exactly
/// enumerated weighted expectation, for every `(x, t, k, J)` in the grid.
pub fn q_moment_identity_records(
    p: &SixVertexParams,
    xs: &[usize],
    ts: &[usize],
    ks: &[u32],
    js: &[u32],
    tol: Real,
) -> Result<Vec<Record>, HarnessError> {
    let mut out = Vec::new();
    for &x in xs {
        for &t in ts {
            for &k in ks {
                for &j in js {
                    let t0 = Instant::now();
                    let lhs = exact_weighted_q_moment(p, x, t, k, j)?;
                    let qp = QMomentParams::from_vertex(p, j);
                    let rhs = q_moment_integral(&qp, x as i32 - 1, t as i32, k as usize, 200)?;
                    let inp = inputs(&[("x", x as Real), ("t", t as Real), ("k", k as Real), ("J", j as Real), ("imag", rhs.im)]);
                    out.push(Record::compare("q_moment", inp, rhs.re, lhs, Tolerance::Absolute(tol)).timed(t0.elapsed().as_secs_f64()));
                }
            }
        }
    }
    Ok(out)
}

/// Six-vertex Fredholm identity: `exact_fredholm_lhs` against
/// `det(Id + V_ζ)` with `ζ = -q^p`, for every `(x, t, p)` in the grid. The
/// recorded value is `|lhs - det|` (real and imaginary parts together).
pub fn fredholm_identity_records(
    p: &SixVertexParams,
    xs: &[usize],
    ts: &[usize],
    powers: &[Real],
    tol: Real,
) -> Result<Vec<Record>, HarnessError> {
    let circles = place_contours_vertex(p)?;
    let mut out = Vec::new();
    for &x in xs {
        for &t in ts {
            let g = GFunction::six_vertex(p, x as i32, t as i32);
            for &pw in powers {
                let t0 = Instant::now();
                let zeta = Cplx::new(-p.q.powf(pw), 0.0);
                let lhs = exact_fredholm_lhs(p, x, t, zeta)?;
                let rhs = fredholm_v(&g, pw, &circles, 64, FREDHOLM_DOUBLING_TOL)?;
                let inp = inputs(&[
                    ("x", x as Real),
                    ("t", t as Real),
                    ("p", pw),
                    ("delta1", p.delta1),
                    ("delta2", p.delta2),
                    ("b1", p.b1),
                    ("b2", p.b2),
                    ("lhs", lhs.re),
                    ("det", rhs.value.re),
                ]);
                out.push(
                    Record::check("fredholm_vertex", inp, (lhs - rhs.value).norm(), Tolerance::Absolute(tol))
                        .timed(t0.elapsed().as_secs_f64()),
                );
            }
        }
    }
    Ok(out)
}

/// Identity check on the vertex model described by `config` (defaults
/// δ1 = 0.25, δ2 = 0.5, b1 = 0.5, b2 = 0.3 for the Fredholm identity and
/// b2 = 0.04 for the q-moments): q-moments on `x, t ∈ {2, 3, 4}`,
/// `k, J ∈ {1, 2}` (tolerance 1e-8), Fredholm identity on `x, t ∈ 1..=6`,
/// `p ∈ {1, 3, 5}` (tolerance 1e-6).
pub fn run_identity_check(config: &ExperimentConfig) -> Result<Report, HarnessError> {
    let start = Instant::now();
    let mut report = Report::new("identity-check", config);
    let mut cfg = config.clone();
    cfg.b2 = Some(config.b2.unwrap_or(0.04));
    let pm = cfg.vertex_params()?;
    report.records.extend(q_moment_identity_records(&pm, &[2, 3, 4], &[2, 3, 4], &[1, 2], &[1, 2], config.tolerance("q_moment", 1e-8))?);
    cfg.b2 = Some(config.b2.unwrap_or(0.3));
    let pf = cfg.vertex_params()?;
    let grid: Vec<usize> = (1..=6).collect();
    report.records.extend(fredholm_identity_records(&pf, &grid, &grid, &[1.0, 3.0, 5.0], config.tolerance("fredholm", 1e-6))?);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

// ---------------------------------------------------------------------------
// ASEP Fredholm identity (statistical)
// ---------------------------------------------------------------------------

/// `(ω; q)_∞ Σ_M ω^M/(q;q)_M · 1/(ζ q^{J - M}; q)_∞` for a single current
/// value `J`, with `ω = β2/β1`; its expectation is the left side of the ASEP
/// Fredholm identity.
pub fn asep_fredholm_term(p: &AsepParams, j: i64, zeta: Cplx) -> Result<Real, HarnessError> {
    let (b1, b2) = p.betas();
    let q = QParam::new(p.q).map_err(|e| HarnessError::Invalid(e.to_string()))?;
    let point = HeightDistribution { x: 0, y: 0, pmf: [(j, 1.0)].into_iter().collect() };
    Ok(fredholm_observable(&point, b2 / b1, q, zeta)?.re)
}

/// Monte Carlo check of the ASEP Fredholm identity at `(x, T)` with
/// `ζ = -q^p`: jackknife estimate of the left side from `n` samples against
/// `det(Id + A_ζ)`, passing when they agree within `k_se` standard errors.
pub fn asep_fredholm_record(p: &AsepParams, x: i64, t: Real, pw: Real, n: usize, seed: u64, k_se: Real) -> Result<Record, HarnessError> {
    let start = Instant::now();
    let zeta = Cplx::new(-p.q.powf(pw), 0.0);
    let circles = place_contours_asep(p)?;
    let det = fredholm_v(&GFunction::asep(p, x as i32, t), pw, &circles, 64, FREDHOLM_DOUBLING_TOL)?;
    let js = sample_currents(p, x, t, seed, n)?;
    let mut cache: BTreeMap<i64, Real> = BTreeMap::new();
    for &j in &js {
        if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(j) {
            e.insert(asep_fredholm_term(p, j, zeta)?);
        }
    }
    let phi: Vec<Real> = js.iter().map(|j| cache[j]).collect();
    let est = jackknife(&phi, JACKKNIFE_BATCHES, mean)?;
    let inp = inputs(&[("x", x as Real), ("T", t), ("p", pw), ("samples", n as Real), ("det_imag", det.value.im)]);
    Ok(Record::compare("fredholm_asep", inp, est.value, det.value.re, Tolerance::StandardErrors { k: k_se, se: est.se })
        .timed(start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ks_of_samples_from_the_cdf_is_small() {
        let mut rng = sample_rng(3, 0);
        let s: Vec<Real> = (0..10_000).map(|_| rng.gen::<Real>()).collect();
        let d = ks_distance(&s, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 0.02, "{d}");
    }

    #[test]
    fn ks_trivial_cases() {
        let uniform = |x: Real| ((x + 1.0) / 2.0).clamp(0.0, 1.0);
        assert_eq!(ks_distance(&[0.0], uniform).unwrap(), 0.5);
        assert!((ks_distance(&[100.0, 200.0], |x| (x / 10.0).clamp(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(ks_distance(&[], uniform), Err(HarnessError::Empty));
    }

    #[test]
    fn two_sample_ks() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!((ks_two_sample(&[0.0, 1.0, 2.0, 3.0], &[1.0, 2.0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exponent_fits() {
        let t = [10.0, 100.0, 1000.0, 5000.0];
        assert!((fit_exponent(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        let s: Vec<Real> = t.iter().map(|x: &Real| x.powf(2.0 / 3.0)).collect();
        assert!((fit_exponent(&t, &s).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let mut rng = sample_rng(5, 0);
        let t = [250.0, 1000.0, 4000.0];
        for _ in 0..200 {
            let s: Vec<Real> = t.iter().map(|x: &Real| x.cbrt() * (1.0 + 0.1 * (2.0 * rng.gen::<Real>() - 1.0))).collect();
            let e = fit_exponent(&t, &s).unwrap();
            assert!((0.23..=0.43).contains(&e), "{e}");
        }
        assert!(fit_exponent(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_exponent(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn jackknife_of_the_mean_matches_the_standard_error() {
        let mut rng = sample_rng(9, 0);
        let v: Vec<Real> = (0..16_000).map(|_| rng.gen::<Real>()).collect();
        let est = jackknife(&v, JACKKNIFE_BATCHES, mean).unwrap();
        let se = (variance(&v) / v.len() as Real).sqrt();
        assert!((est.value - mean(&v)).abs() < 1e-15);
        assert!(est.se > 0.4 * se && est.se < 1.6 * se, "{} vs {se}", est.se);
        assert!(jackknife(&v[..3], 16, mean).is_err());
    }

    #[test]
    fn config_parses_documented_keys() {
        let json = r#"{"model": "asep", "delta1": 0.25, "delta2": 0.5, "b1": 0.5, "b2": 0.4,
            "L": 0.25, "R": 1.0, "b": 0.5, "c": 0.0, "T_list": [50, 200], "samples": 100,
            "tolerances": {"ks": 0.1}}"#;
        let c: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.model, Some(ModelName::Asep));
        assert_eq!(c.l, Some(0.25));
        assert_eq!(c.t_list, Some(vec![50.0, 200.0]));
        assert_eq!(c.tolerance("ks", 1.0), 0.1);
        assert_eq!(c.tolerance("other", 1.0), 1.0);
        let p = c.asep_params().unwrap();
        assert_eq!((p.b1, p.b2), (0.5, 0.5));
        let empty: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert!(empty.vertex_params().unwrap().translation_invariant);
    }

    #[test]
    fn record_verdicts() {
        let r = Record::compare("a", BTreeMap::new(), 1.0, 1.05, Tolerance::Absolute(0.1));
        assert_eq!(r.pass, Some(true));
        let r = Record::compare("a", BTreeMap::new(), 1.0, 1.5, Tolerance::StandardErrors { k: 4.0, se: 0.1 });
        assert_eq!(r.pass, Some(false));
        let r = Record::check("a", BTreeMap::new(), 0.3, Tolerance::Range { lo: 0.23, hi: 0.43 });
        assert_eq!(r.pass, Some(true));
        let r = Record::check("a", BTreeMap::new(), Real::NAN, Tolerance::AtMost(1.0));
        assert_eq!(r.pass, Some(false));
    }

    #[test]
    fn reports_are_reproducible_and_round_trip() {
        let cfg = ExperimentConfig { t_list: Some(vec![10.0, 20.0, 40.0]), samples: Some(64), seed: Some(4), ..Default::default() };
        let (a, ra) = run_scaling_experiment(&cfg).unwrap();
        let (b, rb) = run_scaling_experiment(&cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.without_timing(), b.without_timing());
        let json = serde_json::to_string(&a).unwrap();
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn truncated_runs_match_shorter_runs() {
        let p = ExperimentConfig::default().vertex_params().unwrap();
        let long = vertex_runs(&p, &[30.0], 0.0, 40, 1).unwrap();
        let short = vertex_runs(&p, &[30.0], 0.0, 25, 1).unwrap();
        assert_eq!(long[0].truncated(25), short[0]);
    }

    #[test]
    fn rescaling_inverts_the_centering() {
        let p = ExperimentConfig::default().vertex_params().unwrap();
        let sc = scaling_constants_vertex(&p).unwrap();
        let t = 1000.0;
        let centre = vertex_centering(&p, &sc, t, 0.0);
        assert!((centre - 0.05 * t).abs() < 1e-12);
        let s = rescale_heights(&p, t, 0.0, &[50, 40]).unwrap();
        assert!(s[0].abs() < 1e-12);
        assert!(s[1] > 0.0);
    }

    #[test]
    fn asep_fredholm_term_for_point_masses() {
        // ω = 0 (b2 = 0) leaves only 1/(ζ q^J; q)_∞
        let p = AsepParams::new(0.25, 1.0, 0.6, 0.0).unwrap();
        let zeta = Cplx::new(-0.25, 0.0);
        let v = asep_fredholm_term(&p, 0, zeta).unwrap();
        let direct: Real = (0..200).map(|k| 1.0 / (1.0 + 0.25 * 0.25f64.powi(k))).product();
        assert!((v - direct).abs() < 1e-14, "{v} vs {direct}");
    }

    #[test]
    fn mapping_check_passes_at_reduced_size() {
        let cfg = ExperimentConfig { samples: Some(20_000), seed: Some(8), ..Default::default() };
        let r = run_mapping_check(&cfg).unwrap();
        for rec in r.verdicts() {
            assert_eq!(rec.pass, Some(true), "{rec:?}");
        }
    }
}
