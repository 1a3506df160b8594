//! Continuous-time ASEP with double-sided `(b1, b2)`-Bernoulli initial data
//! (density `b1` on sites `≤ 0`, `b2` on sites `> 0`) and its current
//!
//! ```text
//! J_T(x) = #{particles starting ≤ 0 that are > x at time T}
//!        - #{particles starting > 0 that are ≤ x at time T}.
//! ```
//!
//! Since particles keep their order, `J_T(x) = J_0(x) + (net number of jumps
//! across the bond (x, x+1) during [0, T])`, which is how both samplers
//! evaluate it.
//!
//! Both samplers use the graphical (Harris) construction: every bond
//! `(i, i+1)` carries a Poisson clock of rate `R + L`; at a ring the bond
//! attempts a right jump `i → i+1` with probability `R/(R+L)` and a left
//! jump `i+1 → i` otherwise. Superposing the clocks of all bonds next to a
//! particle reproduces the particle clocks of rates `R` and `L`.
//!
//! * [`simulate_current`] generates the clocks backward in time from the
//!   measured bond, keeping only the bonds that can influence it (the
//!   backward light cone grows by one site whenever a clock rings on its
//!   boundary). It is exact and needs no spatial truncation.
//! * [`simulate_current_window`] runs the clocks forward on a finite window
//!   and tracks how far the missing outside randomness could have spread
//!   ("contamination fronts"). If a front reaches the measured bond, the
//!   run reports [`AsepError::WindowOverflow`] instead of a value.

use rand::{Rng, RngCore};
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{AsepParams, VertexRates};
use crate::rng::{derive_seed, sample_rng};
use crate::vertex_model::{sample_heights, BoundarySpec, VertexError};
use crate::Real;

/// Errors from the ASEP samplers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsepError {
    /// Randomness from outside the simulated window reached the measurement.
    #[error("window overflow: outside influence reached site {site} before time {time}; rerun with a larger window")]
    WindowOverflow {
        /// Site reached.
        site: i64,
        /// Time at which it was reached.
        time: Real,
    },
    /// The backward light cone exceeded the size cap.
    #[error("light cone wider than the cap of {0} sites")]
    ConeTooWide(usize),
    /// Invalid input.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// The six-vertex sampler failed (degeneration check).
    #[error(transparent)]
    Vertex(#[from] VertexError),
}

/// Largest backward light cone accepted by [`simulate_current`].
pub const MAX_CONE: usize = 1 << 24;

/// `J_0(x) = -#{occupied sites in (0, x]}` for `x ≥ 0` and
/// `#{occupied sites in (x, 0]}` for `x < 0`; `occ(i)` gives occupation.
fn initial_current<F: Fn(i64) -> bool>(x: i64, occ: F) -> i64 {
    if x >= 0 {
        -((1..=x).filter(|&i| occ(i)).count() as i64)
    } else {
        ((x + 1)..=0).filter(|&i| occ(i)).count() as i64
    }
}

fn check(params: &AsepParams, t: Real) -> Result<(), AsepError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(AsepError::Invalid(format!("time must be finite and nonnegative (got {t})")));
    }
    if !(params.r > params.l && params.l >= 0.0) {
        return Err(AsepError::Invalid("need R > L >= 0".into()));
    }
    Ok(())
}

/// What to read off at the end of a light-cone run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    /// The current across bond `(x, x+1)`.
    Current(i64),
    /// The occupation of a site.
    Site(i64),
}

/// Reusable buffers for the light-cone sampler.
#[derive(Debug, Default)]
struct ConeBuffers {
    bonds: Vec<i64>,
    right: Vec<bool>,
    occ: Vec<bool>,
}

fn run_cone<R: RngCore>(params: &AsepParams, t: Real, target: Target, rng: &mut R, buf: &mut ConeBuffers) -> Result<i64, AsepError> {
    check(params, t)?;
    let rate = params.r + params.l;
    let p_right = params.r / rate;
    let (mut a, mut b) = match target {
        Target::Current(x) => (x, x + 1),
        Target::Site(s) => (s, s),
    };
    buf.bonds.clear();
    buf.right.clear();
    // backward in time: the cone [a, b] is affected by the b - a + 2 bonds
    // (i, i+1) with a - 1 ≤ i ≤ b
    let mut s = 0.0;
    loop {
        let nb = (b - a + 2) as Real;
        let e: Real = rng.sample(Exp1);
        s += e / (nb * rate);
        if s > t {
            break;
        }
        let k = (rng.gen::<Real>() * nb) as i64;
        let i = a - 1 + k.min(b - a + 1);
        if i == a - 1 {
            a -= 1;
        } else if i == b {
            b += 1;
        }
        if (b - a) as usize > MAX_CONE {
            return Err(AsepError::ConeTooWide(MAX_CONE));
        }
        buf.bonds.push(i);
        buf.right.push(rng.gen::<Real>() < p_right);
    }
    // initial data on the cone and on the sites needed for J_0(x)
    let (lo, hi) = match target {
        Target::Current(x) => (a.min(x + 1).min(1), b.max(x).max(0)),
        Target::Site(_) => (a, b),
    };
    buf.occ.clear();
    for i in lo..=hi {
        let dens = if i <= 0 { params.b1 } else { params.b2 };
        buf.occ.push(rng.gen::<Real>() < dens);
    }
    let occ = &mut buf.occ;
    let idx = |i: i64| (i - lo) as usize;
    let mut j = match target {
        Target::Current(x) => initial_current(x, |i| occ[idx(i)]),
        Target::Site(_) => 0,
    };
    let flux_bond = match target {
        Target::Current(x) => Some(x),
        Target::Site(_) => None,
    };
    for (&i, &right) in buf.bonds.iter().zip(&buf.right).rev() {
        let (u, v) = (idx(i), idx(i + 1));
        if right {
            if occ[u] && !occ[v] {
                occ[u] = false;
                occ[v] = true;
                if flux_bond == Some(i) {
                    j += 1;
                }
            }
        } else if occ[v] && !occ[u] {
            occ[v] = false;
            occ[u] = true;
            if flux_bond == Some(i) {
                j -= 1;
            }
        }
    }
    Ok(match target {
        Target::Current(_) => j,
        Target::Site(s0) => occ[idx(s0)] as i64,
    })
}

/// `J_T(x)` by the exact backward light-cone construction, drawing from `rng`.
pub fn simulate_current_with_rng<R: RngCore>(params: &AsepParams, x: i64, t: Real, rng: &mut R) -> Result<i64, AsepError> {
    run_cone(params, t, Target::Current(x), rng, &mut ConeBuffers::default())
}

/// `J_T(x)` for sample stream `seed` (see [`crate::rng::sample_rng`]).
pub fn simulate_current(params: &AsepParams, x: i64, t: Real, seed: u64) -> Result<i64, AsepError> {
    simulate_current_with_rng(params, x, t, &mut sample_rng(seed, 0))
}

/// Occupation (0 or 1) of `site` at time `t`.
pub fn simulate_occupation<R: RngCore>(params: &AsepParams, site: i64, t: Real, rng: &mut R) -> Result<i64, AsepError> {
    run_cone(params, t, Target::Site(site), rng, &mut ConeBuffers::default())
}

/// `n` independent samples of `J_T(x)`; sample `i` uses stream
/// `sample_rng(base_seed, i)`, so the result does not depend on the thread
/// count.
pub fn sample_currents(params: &AsepParams, x: i64, t: Real, base_seed: u64, n: usize) -> Result<Vec<i64>, AsepError> {
    (0..n)
        .into_par_iter()
        .map_init(ConeBuffers::default, |buf, i| {
            run_cone(params, t, Target::Current(x), &mut sample_rng(base_seed, i as u64), buf)
        })
        .collect()
}

/// The window half-width `|x| + ⌈3(R + L)T⌉ + 20`.
pub fn default_window(params: &AsepParams, x: i64, t: Real) -> usize {
    x.unsigned_abs() as usize + (3.0 * (params.r + params.l) * t).ceil() as usize + 20
}

/// `J_T(x)` by forward simulation of the graphical construction on the
/// window `[-W, W]` (default [`default_window`]), with contamination fronts.
pub fn simulate_current_window<R: RngCore>(
    params: &AsepParams,
    x: i64,
    t: Real,
    window: Option<usize>,
    rng: &mut R,
) -> Result<i64, AsepError> {
    check(params, t)?;
    let w = window.unwrap_or_else(|| default_window(params, x, t)) as i64;
    if x < -w || x + 1 > w {
        return Err(AsepError::Invalid(format!("bond ({x}, {}) outside the window [-{w}, {w}]", x + 1)));
    }
    let mut occ: Vec<bool> =
        (-w..=w).map(|i| rng.gen::<Real>() < if i <= 0 { params.b1 } else { params.b2 }).collect();
    let idx = |i: i64| (i + w) as usize;
    let mut j = initial_current(x, |i| occ[idx(i)]);
    // sites ≤ lf and ≥ rf may differ from the infinite system
    let (mut lf, mut rf) = (-w - 1, w + 1);
    let rate = params.r + params.l;
    let p_right = params.r / rate;
    // bonds (i, i+1) for -w-1 ≤ i ≤ w; the two outermost only contaminate
    let nb = (2 * w + 2) as Real;
    let mut time = 0.0;
    loop {
        let e: Real = rng.sample(Exp1);
        time += e / (nb * rate);
        if time > t {
            break;
        }
        let i = -w - 1 + ((rng.gen::<Real>() * nb) as i64).min(2 * w + 1);
        let right = rng.gen::<Real>() < p_right;
        if i <= lf {
            lf = lf.max(i + 1);
        }
        if i + 1 >= rf {
            rf = rf.min(i);
        }
        if lf >= x || rf <= x + 1 {
            return Err(AsepError::WindowOverflow { site: if lf >= x { lf } else { rf }, time });
        }
        if i < -w || i + 1 > w {
            continue;
        }
        let (u, v) = (idx(i), idx(i + 1));
        if right {
            if occ[u] && !occ[v] {
                occ[u] = false;
                occ[v] = true;
                if i == x {
                    j += 1;
                }
            }
        } else if occ[v] && !occ[u] {
            occ[v] = false;
            occ[u] = true;
            if i == x {
                j -= 1;
            }
        }
    }
    Ok(j)
}

/// The characteristic position `⌊(1 - 2b)(R - L)T⌉` (nearest integer).
pub fn characteristic_site(params: &AsepParams, t: Real) -> i64 {
    ((1.0 - 2.0 * params.b1) * (params.r - params.l) * t).round() as i64
}

/// Sample mean and variance of the current with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentMoments {
    /// Time.
    pub t: Real,
    /// Observation site.
    pub x: i64,
    /// Sample mean.
    pub mean: Real,
    /// Standard error of the mean.
    pub mean_se: Real,
    /// Sample variance.
    pub variance: Real,
    /// Standard error of the variance (normal-theory plus kurtosis term).
    pub variance_se: Real,
    /// The samples.
    pub samples: Vec<i64>,
}

impl CurrentMoments {
    /// Moments of a sample vector.
    pub fn from_samples(t: Real, x: i64, samples: Vec<i64>) -> Self {
        let n = samples.len() as Real;
        let mean = samples.iter().map(|&v| v as Real).sum::<Real>() / n;
        let m2 = samples.iter().map(|&v| (v as Real - mean).powi(2)).sum::<Real>() / n;
        let m4 = samples.iter().map(|&v| (v as Real - mean).powi(4)).sum::<Real>() / n;
        let variance = m2 * n / (n - 1.0);
        Self {
            t,
            x,
            mean,
            mean_se: (variance / n).sqrt(),
            variance,
            variance_se: ((m4 - m2 * m2) / n).max(0.0).sqrt(),
            samples,
        }
    }
}

/// Monte Carlo moments of the stationary current at the characteristic site.
pub fn stationary_current_moments(params: &AsepParams, t: Real, n: usize, seed: u64) -> Result<CurrentMoments, AsepError> {
    if (params.b1 - params.b2).abs() > 1e-15 || !(params.b1 > 0.0 && params.b1 < 1.0) {
        return Err(AsepError::Invalid("stationary data needs b1 = b2 in (0, 1)".into()));
    }
    let x = characteristic_site(params, t);
    let s = sample_currents(params, x, t, seed, n)?;
    Ok(CurrentMoments::from_samples(t, x, s))
}

/// Output of [`degeneration_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerationResult {
    /// Two-sample Kolmogorov–Smirnov distance between the two laws.
    pub ks: Real,
    /// Column `x + ⌊T/ε⌋` of the six-vertex observation.
    pub x_vertex: usize,
    /// Row `⌊T/ε⌋` of the six-vertex observation.
    pub y_vertex: usize,
    /// Base seed of the six-vertex samples.
    pub vertex_seed: u64,
    /// Base seed of the ASEP samples.
    pub asep_seed: u64,
    /// Six-vertex heights.
    pub vertex: Vec<i64>,
    /// ASEP currents.
    pub asep: Vec<i64>,
}

/// Compares the six-vertex height `ℌ(x + ⌊T/ε⌋, ⌊T/ε⌋)` at `δ1 = εL`,
/// `δ2 = εR` with the ASEP current `J_T(x)`, both with the same `(b1, b2)`
/// double-sided Bernoulli data, by the two-sample KS distance of `n` samples
/// each.
///
/// In the vertex model each row is one time step of length `ε`: a path moves
/// one column to the right per row unless it stays (probability `εL`, a left
/// jump in the moving frame) or runs on (probability about `εR`, a right
/// jump), so the frame `x + y` carries an ASEP as `ε → 0`.
pub fn degeneration_check(params: &AsepParams, eps: Real, x: i64, t: Real, n: usize, seed: u64) -> Result<DegenerationResult, AsepError> {
    if !(eps > 0.0 && t > 0.0 && n > 0) {
        return Err(AsepError::Invalid(format!("need eps > 0, T > 0, n > 0 (got {eps}, {t}, {n})")));
    }
    let rates = VertexRates::new(eps * params.l, eps * params.r)
        .map_err(|e| AsepError::Invalid(format!("eps L and eps R must be probabilities: {e}")))?;
    let rows = (t / eps).floor() as i64;
    let cols = x + rows;
    if rows < 1 || cols < 1 {
        return Err(AsepError::Invalid(format!("observation point ({cols}, {rows}) outside the quadrant")));
    }
    let boundary = BoundarySpec::double_bernoulli(params.b1, params.b2);
    let vertex_seed = derive_seed(seed, 1);
    let asep_seed = derive_seed(seed, 2);
    let vertex = sample_heights(&rates, cols as usize, rows as usize, &boundary, vertex_seed, n)?;
    let asep = sample_currents(params, x, t, asep_seed, n)?;
    let to_real = |v: &[i64]| v.iter().map(|&h| h as Real).collect::<Vec<_>>();
    let ks = crate::harness::ks_two_sample(&to_real(&vertex), &to_real(&asep))
        .map_err(|e| AsepError::Invalid(e.to_string()))?;
    Ok(DegenerationResult { ks, x_vertex: cols as usize, y_vertex: rows as usize, vertex_seed, asep_seed, vertex, asep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_rng;

    fn p(b1: Real, b2: Real) -> AsepParams {
        AsepParams::new(0.25, 1.0, b1, b2).unwrap()
    }

    #[test]
    fn trivial_initial_data() {
        let mut rng = sample_rng(1, 0);
        for x in [-3, 0, 4] {
            assert_eq!(simulate_current_with_rng(&p(0.0, 0.0), x, 5.0, &mut rng).unwrap(), 0);
            // a packed lattice cannot move, so the current keeps its initial value
            let packed = -x.max(0) - x.min(0);
            assert_eq!(simulate_current_with_rng(&p(1.0, 1.0), x, 5.0, &mut rng).unwrap(), packed);
            assert_eq!(simulate_current_window(&p(1.0, 1.0), x, 5.0, None, &mut rng).unwrap(), packed);
        }
        // at T = 0 the current is minus the number of particles in (0, x]
        assert_eq!(simulate_current_with_rng(&p(0.5, 1.0), 7, 0.0, &mut rng).unwrap(), -7);
        assert_eq!(simulate_current_with_rng(&p(1.0, 0.0), -4, 0.0, &mut rng).unwrap(), 4);
    }

    #[test]
    fn step_data_single_particle() {
        // one particle at 0 (b1 applies to sites ≤ 0 only, so use b1 = 1 with
        // a wall of packed sites: the front particle is the only mobile one)
        // J_T(0) = 1 iff the front particle has jumped right at least once net;
        // for small T this is ≈ R T
        let params = p(1.0, 0.0);
        let t = 0.01;
        let n = 200_000;
        let s = sample_currents(&params, 0, t, 3, n).unwrap();
        let frac = s.iter().filter(|&&v| v == 1).count() as Real / n as Real;
        let want = 1.0 - (-params.r * t).exp();
        assert!((frac - want).abs() < 4.0 * (want / n as Real).sqrt() + 1e-4, "{frac} vs {want}");
    }

    #[test]
    fn cone_and_window_samplers_agree_in_law() {
        let params = p(0.6, 0.3);
        let n = 20_000;
        let a: Vec<i64> = sample_currents(&params, 1, 3.0, 11, n).unwrap();
        let b: Vec<i64> =
            (0..n).map(|i| simulate_current_window(&params, 1, 3.0, None, &mut sample_rng(12, i as u64)).unwrap()).collect();
        let ma = CurrentMoments::from_samples(3.0, 1, a);
        let mb = CurrentMoments::from_samples(3.0, 1, b);
        let se = (ma.mean_se.powi(2) + mb.mean_se.powi(2)).sqrt();
        assert!((ma.mean - mb.mean).abs() < 4.0 * se, "{} vs {}", ma.mean, mb.mean);
        let sev = (ma.variance_se.powi(2) + mb.variance_se.powi(2)).sqrt();
        assert!((ma.variance - mb.variance).abs() < 4.0 * sev);
    }

    #[test]
    fn small_window_overflows() {
        let params = p(0.5, 0.5);
        let r = simulate_current_window(&params, 0, 50.0, Some(5), &mut sample_rng(5, 0));
        assert!(matches!(r, Err(AsepError::WindowOverflow { .. })));
    }

    #[test]
    fn stationary_mean_and_occupation() {
        let b = 0.4;
        let params = p(b, b);
        let t = 20.0;
        let m = stationary_current_moments(&params, t, 4000, 9).unwrap();
        // stationary flux b(1-b)(R-L) across a bond moving at speed (1-2b)(R-L)
        // with density b: E J = b(1-b)(R-L)T - b x
        let want = b * (1.0 - b) * (params.r - params.l) * t - b * m.x as Real;
        assert!((m.mean - want).abs() < 4.0 * m.mean_se, "{} vs {want}", m.mean);
        assert!(m.variance > 0.0);
        let n = 20_000;
        let occ: i64 = (0..n).map(|i| simulate_occupation(&params, 0, 5.0, &mut sample_rng(4, i)).unwrap()).sum();
        let frac = occ as Real / n as Real;
        assert!((frac - b).abs() < 4.0 * (b * (1.0 - b) / n as Real).sqrt());
    }

    #[test]
    fn reproducible() {
        let params = p(0.3, 0.3);
        assert_eq!(sample_currents(&params, 0, 4.0, 8, 50).unwrap(), sample_currents(&params, 0, 4.0, 8, 50).unwrap());
        assert!(simulate_current(&params, 0, -1.0, 1).is_err());
    }
}
