//! Stochastic six-vertex model: Monte Carlo sampling of the height function
//! and an exact transfer-matrix engine for its law on small windows.
//!
//! Coordinates: columns `1..=X`, rows `1..=Y`. Paths enter from the x-axis
//! (below row 1, one possible entrance per column, "red" paths) and from the
//! y-axis (left of column 1, one possible entrance per row, "blue" paths).
//!
//! The height is
//!
//! ```text
//! H(X, Y) = #{blue paths crossing y = Y + 1/2 right of X}
//!         - #{red paths crossing y = Y + 1/2 at or left of X}
//!         = #{horizontal arrows crossing from column X to X + 1 in rows 1..=Y}
//!         - #{x-axis entrances in columns 1..=X},
//! ```
//!
//! the second form following from arrow conservation in `[1, X] x [1, Y]`.
//! Both forms are implemented; [`brute_force_color_height`] tracks colours
//! literally and serves as the oracle for the crossing-count form.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{SixVertexParams, VertexRates};
use crate::qseries::{poch_finite_re, poch_inf_re, q_laplace_term, QParam};
use crate::rng::{derive_seed, sample_rng};
use crate::{Cplx, Real};

/// Errors from the vertex-model engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VertexError {
    /// The exact engine was asked for a window that is too large.
    #[error("window {x} x {y} exceeds the exact-engine limit {max} x {max}")]
    WindowTooLarge {
        /// Requested width.
        x: usize,
        /// Requested height.
        y: usize,
        /// Limit on each dimension.
        max: usize,
    },
    /// An explicit boundary does not match the window.
    #[error("explicit boundary of length {got} does not match window dimension {want}")]
    BoundaryMismatch {
        /// Length supplied.
        got: usize,
        /// Length required.
        want: usize,
    },
    /// The Fredholm observable is only defined for `kappa beta2 < beta1`.
    #[error("identity domain violated: kappa*beta2 = {lhs} must be < beta1 = {rhs}")]
    IdentityDomain {
        /// `kappa beta2`.
        lhs: Real,
        /// `beta1`.
        rhs: Real,
    },
    /// A q-series evaluation failed.
    #[error("q-series error: {0}")]
    QSeries(#[from] crate::qseries::QSeriesError),
    /// A boundary weight could not be evaluated.
    #[error("weight error: {0}")]
    Weight(#[from] crate::weights::WeightError),
}

/// Arrow configuration `(i1, j1; i2, j2)` at a vertex: `i` counts vertical
/// arrows (in from below, out to the top), `j` horizontal arrows (in from the
/// left, out to the right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArrowConfig {
    /// Incoming vertical arrows.
    pub i1: u32,
    /// Incoming horizontal arrows.
    pub j1: u32,
    /// Outgoing vertical arrows.
    pub i2: u32,
    /// Outgoing horizontal arrows.
    pub j2: u32,
}

impl ArrowConfig {
    /// Arrow conservation `i1 + j1 = i2 + j2`.
    pub fn is_conserving(&self) -> bool {
        self.i1 + self.j1 == self.i2 + self.j2
    }
}

/// Entrance data along one boundary axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AxisSpec {
    /// Independent entrances with the given probability.
    Bernoulli(Real),
    /// A fixed entrance pattern (index 0 is column/row 1).
    Explicit(Vec<bool>),
}

/// Boundary data of the model on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    /// Entrances through the x-axis (columns `1..=X`).
    pub x_axis: AxisSpec,
    /// Entrances through the y-axis (rows `1..=Y`).
    pub y_axis: AxisSpec,
}

impl BoundarySpec {
    /// Step data: every y-axis site emits a path, no x-axis site does.
    pub fn step() -> Self {
        Self { x_axis: AxisSpec::Bernoulli(0.0), y_axis: AxisSpec::Bernoulli(1.0) }
    }

    /// No entrances at all.
    pub fn empty() -> Self {
        Self { x_axis: AxisSpec::Bernoulli(0.0), y_axis: AxisSpec::Bernoulli(0.0) }
    }

    /// Double-sided Bernoulli data: density `b1` on the y-axis and `b2` on the
    /// x-axis.
    pub fn double_bernoulli(b1: Real, b2: Real) -> Self {
        Self { x_axis: AxisSpec::Bernoulli(b2), y_axis: AxisSpec::Bernoulli(b1) }
    }

    /// Fixed entrance patterns on both axes.
    pub fn explicit(x_bits: Vec<bool>, y_bits: Vec<bool>) -> Self {
        Self { x_axis: AxisSpec::Explicit(x_bits), y_axis: AxisSpec::Explicit(y_bits) }
    }

    fn check(&self, x: usize, y: usize) -> Result<(), VertexError> {
        for (axis, want) in [(&self.x_axis, x), (&self.y_axis, y)] {
            if let AxisSpec::Explicit(b) = axis {
                if b.len() < want {
                    return Err(VertexError::BoundaryMismatch { got: b.len(), want });
                }
            }
        }
        Ok(())
    }
}

/// Probability threshold on a uniform `u64`: `u < threshold(p)` has
/// probability `p` (to resolution `2^-64`).
#[inline]
fn threshold(p: Real) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        u64::MAX
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

/// Single stochastic vertex update: given the inputs `(i1, j1)` and a uniform
/// `u` in `[0, 1)`, returns the outputs `(i2, j2)`.
///
/// `(0,0)` and `(1,1)` pass through; `(1,0)` stays `(1,0)` with probability
/// `delta1` and turns to `(0,1)` otherwise; `(0,1)` stays `(0,1)` with
/// probability `delta2` and turns to `(1,0)` otherwise.
pub fn vertex_update(i1: u8, j1: u8, rates: &VertexRates, u: Real) -> (u8, u8) {
    match (i1, j1) {
        (1, 0) => {
            if u < rates.delta1 {
                (1, 0)
            } else {
                (0, 1)
            }
        }
        (0, 1) => {
            if u < rates.delta2 {
                (0, 1)
            } else {
                (1, 0)
            }
        }
        _ => (i1, j1),
    }
}

/// Source of the per-vertex randomness used by the samplers.
///
/// The stream implementation ignores coordinates (fast path); the keyed
/// implementation gives every vertex its own value so that different sweep
/// orders see identical randomness.
pub trait VertexCoins {
    /// Uniform `u64` for vertex `(x, y)`.
    fn coin(&mut self, x: usize, y: usize) -> u64;
}

struct StreamCoins<'a, R: RngCore>(&'a mut R);

impl<R: RngCore> VertexCoins for StreamCoins<'_, R> {
    #[inline(always)]
    fn coin(&mut self, _x: usize, _y: usize) -> u64 {
        self.0.next_u64()
    }
}

/// Coordinate-keyed coins (a SplitMix-style hash of `(key, x, y)`).
#[derive(Debug, Clone, Copy)]
pub struct KeyedCoins(pub u64);

impl VertexCoins for KeyedCoins {
    fn coin(&mut self, x: usize, y: usize) -> u64 {
        derive_seed(derive_seed(self.0, x as u64), y as u64 ^ 0x5bd1_e995)
    }
}

/// Samples the boundary entrances, first the x-axis (columns 1..=X) then the
/// y-axis (rows 1..=Y), one uniform per random site.
fn sample_boundary<R: RngCore>(
    boundary: &BoundarySpec,
    x: usize,
    y: usize,
    rng: &mut R,
) -> (Vec<u8>, Vec<u8>) {
    let mut draw = |axis: &AxisSpec, n: usize| -> Vec<u8> {
        match axis {
            AxisSpec::Explicit(b) => b[..n].iter().map(|&v| v as u8).collect(),
            AxisSpec::Bernoulli(p) => {
                let t = threshold(*p);
                if *p <= 0.0 {
                    vec![0; n]
                } else if *p >= 1.0 {
                    vec![1; n]
                } else {
                    (0..n).map(|_| (rng.next_u64() < t) as u8).collect()
                }
            }
        }
    };
    let xb = draw(&boundary.x_axis, x);
    let yb = draw(&boundary.y_axis, y);
    (xb, yb)
}

/// Row-by-row sweep with explicit boundary data; returns the height.
fn sweep_height<C: VertexCoins>(rates: &VertexRates, x_bits: &[u8], y_bits: &[u8], coins: &mut C) -> i64 {
    let t1 = threshold(rates.delta1);
    let t2 = threshold(rates.delta2);
    let mut v: Vec<u8> = x_bits.to_vec();
    let entries: i64 = v.iter().map(|&b| b as i64).sum();
    let mut crossings = 0i64;
    for (row, &yb) in y_bits.iter().enumerate() {
        let mut h = yb;
        for (col, cell) in v.iter_mut().enumerate() {
            let i = *cell;
            if i != h {
                let u = coins.coin(col, row);
                if i == 1 {
                    if u >= t1 {
                        *cell = 0;
                        h = 1;
                    }
                } else if u >= t2 {
                    *cell = 1;
                    h = 0;
                }
            }
            debug_assert!(*cell <= 1 && h <= 1);
        }
        crossings += h as i64;
    }
    crossings - entries
}

/// Samples `H(X, Y)` with the given random generator.
pub fn simulate_height_with_rng<R: RngCore>(
    rates: &VertexRates,
    x: usize,
    y: usize,
    boundary: &BoundarySpec,
    rng: &mut R,
) -> Result<i64, VertexError> {
    boundary.check(x, y)?;
    let (xb, yb) = sample_boundary(boundary, x, y, rng);
    Ok(sweep_height(rates, &xb, &yb, &mut StreamCoins(rng)))
}

/// Samples `H(X, Y)` deterministically from `seed`.
pub fn simulate_height(
    rates: &VertexRates,
    x: usize,
    y: usize,
    boundary: &BoundarySpec,
    seed: u64,
) -> Result<i64, VertexError> {
    simulate_height_with_rng(rates, x, y, boundary, &mut sample_rng(seed, 0))
}

/// Draws `n` independent heights; sample `i` uses stream `i` of `base_seed`,
/// so the result does not depend on the thread count.
pub fn sample_heights(
    rates: &VertexRates,
    x: usize,
    y: usize,
    boundary: &BoundarySpec,
    base_seed: u64,
    n: usize,
) -> Result<Vec<i64>, VertexError> {
    boundary.check(x, y)?;
    (0..n)
        .into_par_iter()
        .map(|i| simulate_height_with_rng(rates, x, y, boundary, &mut sample_rng(base_seed, i as u64)))
        .collect()
}

/// Colour of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Colour {
    None,
    Red,
    Blue,
}

/// Height computed by literal colour tracking, consuming the random stream
/// exactly like [`simulate_height_with_rng`].
///
/// When a red and a blue path meet at a `(1,1)` vertex the blue path exits
/// upwards, so that blue paths stay weakly up-left of red paths.
pub fn brute_force_color_height_with_rng<R: RngCore>(
    rates: &VertexRates,
    x: usize,
    y: usize,
    boundary: &BoundarySpec,
    rng: &mut R,
) -> Result<i64, VertexError> {
    boundary.check(x, y)?;
    let (xb, yb) = sample_boundary(boundary, x, y, rng);
    Ok(color_sweep(rates, &xb, &yb, &mut StreamCoins(rng)))
}

fn color_sweep<C: VertexCoins>(rates: &VertexRates, x_bits: &[u8], y_bits: &[u8], coins: &mut C) -> i64 {
    let x = x_bits.len();
    let mut v: Vec<Colour> = x_bits.iter().map(|&b| if b == 1 { Colour::Red } else { Colour::None }).collect();
    let mut blue_right = 0i64;
    for (row, &yb) in y_bits.iter().enumerate() {
        let mut h = if yb == 1 { Colour::Blue } else { Colour::None };
        for col in 0..x {
            let vin = v[col];
            let (i, j) = ((vin != Colour::None) as u8, (h != Colour::None) as u8);
            let cfg = ArrowConfig { i1: i as u32, j1: j as u32, i2: 0, j2: 0 };
            let (i2, j2) = match (i, j) {
                (1, 1) => {
                    // blue exits upwards when the colours differ
                    if h == Colour::Blue || vin == Colour::Blue {
                        let other = if h == Colour::Blue { vin } else { h };
                        v[col] = Colour::Blue;
                        h = other;
                    }
                    (1, 1)
                }
                (0, 0) => (0, 0),
                _ => {
                    let u = coins.coin(col, row);
                    let t = if i == 1 { threshold(rates.delta1) } else { threshold(rates.delta2) };
                    let stay = u < t;
                    let colour = if i == 1 { vin } else { h };
                    let out = if stay { (i, j) } else { (j, i) };
                    v[col] = if out.0 == 1 { colour } else { Colour::None };
                    h = if out.1 == 1 { colour } else { Colour::None };
                    out
                }
            };
            debug_assert!(ArrowConfig { i2: i2 as u32, j2: j2 as u32, ..cfg }.is_conserving());
        }
        if h == Colour::Blue {
            blue_right += 1;
        }
    }
    let red_left = v.iter().filter(|&&c| c == Colour::Red).count() as i64;
    blue_right - red_left
}

/// [`brute_force_color_height_with_rng`] seeded like [`simulate_height`].
pub fn brute_force_color_height(
    rates: &VertexRates,
    x: usize,
    y: usize,
    boundary: &BoundarySpec,
    seed: u64,
) -> Result<i64, VertexError> {
    brute_force_color_height_with_rng(rates, x, y, boundary, &mut sample_rng(seed, 0))
}

/// Reference sampler that updates vertices along anti-diagonals `x + y = n`
/// (the order in which the model is defined) with coordinate-keyed coins.
/// With the same key it agrees pathwise with [`row_sweep_keyed`].
pub fn diagonal_sweep_keyed(rates: &VertexRates, x_bits: &[u8], y_bits: &[u8], key: u64) -> i64 {
    let (x, y) = (x_bits.len(), y_bits.len());
    let mut coins = KeyedCoins(key);
    // vertical output of (col,row) stored in vo[row][col], horizontal in ho[row][col]
    let mut vo = vec![vec![0u8; x]; y];
    let mut ho = vec![vec![0u8; x]; y];
    let (t1, t2) = (threshold(rates.delta1), threshold(rates.delta2));
    for n in 0..(x + y).saturating_sub(1) {
        for row in 0..y {
            if n < row || n - row >= x {
                continue;
            }
            let col = n - row;
            let i = if row == 0 { x_bits[col] } else { vo[row - 1][col] };
            let j = if col == 0 { y_bits[row] } else { ho[row][col - 1] };
            let (mut i2, mut j2) = (i, j);
            if i != j {
                let u = coins.coin(col, row);
                let stay = if i == 1 { u < t1 } else { u < t2 };
                if !stay {
                    i2 = j;
                    j2 = i;
                }
            }
            vo[row][col] = i2;
            ho[row][col] = j2;
        }
    }
    let crossings: i64 = (0..y).map(|r| if x == 0 { y_bits[r] as i64 } else { ho[r][x - 1] as i64 }).sum();
    crossings - x_bits.iter().map(|&b| b as i64).sum::<i64>()
}

/// Row sweep with coordinate-keyed coins (companion of
/// [`diagonal_sweep_keyed`]).
pub fn row_sweep_keyed(rates: &VertexRates, x_bits: &[u8], y_bits: &[u8], key: u64) -> i64 {
    sweep_height(rates, x_bits, y_bits, &mut KeyedCoins(key))
}

/// Entrance profile of the sub-lattice `{x > x0, y > y0}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntranceProfile {
    /// Vertical arrows entering row `y0 + 1` at columns `x0+1 ..= x0+w`.
    pub vertical: Vec<bool>,
    /// Horizontal arrows entering column `x0 + 1` at rows `y0+1 ..= y0+h`.
    pub horizontal: Vec<bool>,
}

/// Samples the arrows entering the quadrant `{x > x0, y > y0}` through its
/// bottom edge (`w` columns) and left edge (`h` rows).
pub fn sample_entrance_profile<R: RngCore>(
    params: &SixVertexParams,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    rng: &mut R,
) -> EntranceProfile {
    let rates = params.rates();
    let (t1, t2) = (threshold(rates.delta1), threshold(rates.delta2));
    let (tb1, tb2) = (threshold(params.b1), threshold(params.b2));
    let width = x0 + w;
    let mut v: Vec<u8> = (0..width).map(|_| (rng.next_u64() < tb2) as u8).collect();
    let mut horizontal = Vec::with_capacity(h);
    let mut vertical: Vec<bool> = if y0 == 0 { v[x0..].iter().map(|&b| b == 1).collect() } else { Vec::new() };
    for row in 0..(y0 + h) {
        let mut hc = (rng.next_u64() < tb1) as u8;
        for (col, cell) in v.iter_mut().enumerate() {
            if row >= y0 && col == x0 {
                horizontal.push(hc == 1);
            }
            let i = *cell;
            if i != hc {
                let u = rng.next_u64();
                let stay = if i == 1 { u < t1 } else { u < t2 };
                if !stay {
                    *cell = hc;
                    hc = i;
                }
            }
        }
        if row + 1 == y0 {
            // vertical arrows leaving row y0 enter row y0 + 1
            vertical = v[x0..].iter().map(|&b| b == 1).collect();
        }
    }
    EntranceProfile { vertical, horizontal }
}

/// Exact law of `H(X, Y)` on a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightDistribution {
    /// Window width.
    pub x: usize,
    /// Window height.
    pub y: usize,
    /// Probability of each height value (support within `[-X, Y]`).
    pub pmf: std::collections::BTreeMap<i64, Real>,
}

impl HeightDistribution {
    /// Sum of all probabilities.
    pub fn total(&self) -> Real {
        self.pmf.values().sum()
    }

    /// `E[f(H)]`.
    pub fn expect<F: Fn(i64) -> Real>(&self, f: F) -> Real {
        self.pmf.iter().map(|(&h, &p)| p * f(h)).sum()
    }

    /// `E[f(H)]` for complex-valued `f`.
    pub fn expect_c<F: Fn(i64) -> Cplx>(&self, f: F) -> Cplx {
        self.pmf.iter().map(|(&h, &p)| f(h) * p).sum()
    }
}

/// Largest window dimension accepted by the exact engine.
pub const EXACT_MAX: usize = 12;

/// Exact law of `H(X, Y)` by a dynamic program over (vertical occupation of
/// columns `1..=X`, partial height), folding in the boundary randomness
/// exactly.
///
/// Only columns `1..=X` and rows `1..=Y` influence `H(X, Y)`: arrows never move
/// left or down, so vertices outside the window cannot affect it.
pub fn exact_height_distribution(
    rates: &VertexRates,
    x: usize,
    y: usize,
    boundary: &BoundarySpec,
) -> Result<HeightDistribution, VertexError> {
    if x > EXACT_MAX || y > EXACT_MAX {
        return Err(VertexError::WindowTooLarge { x, y, max: EXACT_MAX });
    }
    boundary.check(x, y)?;
    let nmask = 1usize << x;
    let nh = x + y + 1; // heights -x..=y, offset by x
    let idx = |mask: usize, h: usize| h * nmask + mask;
    let mut cur = vec![0.0; nmask * nh];
    // initial distribution of the x-axis entrances
    for mask in 0..nmask {
        let mut p = 1.0;
        for col in 0..x {
            let bit = (mask >> col) & 1 == 1;
            p *= match &boundary.x_axis {
                AxisSpec::Bernoulli(b) => {
                    if bit {
                        *b
                    } else {
                        1.0 - *b
                    }
                }
                AxisSpec::Explicit(bits) => (bits[col] == bit) as u8 as Real,
            };
        }
        if p > 0.0 {
            let h0 = x - mask.count_ones() as usize;
            cur[idx(mask, h0)] += p;
        }
    }
    let (d1, d2) = (rates.delta1, rates.delta2);
    // partial-row buffers indexed by (carry, mask, h)
    let mut part = [vec![0.0; nmask * nh], vec![0.0; nmask * nh]];
    let mut nxt = [vec![0.0; nmask * nh], vec![0.0; nmask * nh]];
    for row in 0..y {
        let p_in = match &boundary.y_axis {
            AxisSpec::Bernoulli(b) => *b,
            AxisSpec::Explicit(bits) => bits[row] as u8 as Real,
        };
        for k in 0..nmask * nh {
            part[0][k] = cur[k] * (1.0 - p_in);
            part[1][k] = cur[k] * p_in;
        }
        for col in 0..x {
            nxt[0].iter_mut().for_each(|v| *v = 0.0);
            nxt[1].iter_mut().for_each(|v| *v = 0.0);
            let bit = 1usize << col;
            for carry in 0..2usize {
                for k in 0..nmask * nh {
                    let p = part[carry][k];
                    if p == 0.0 {
                        continue;
                    }
                    let mask = k % nmask;
                    let i = (mask & bit != 0) as usize;
                    if i == carry {
                        nxt[carry][k] += p;
                    } else if i == 1 {
                        // (1,0): stays w.p. delta1, else turns right
                        nxt[0][k] += p * d1;
                        nxt[1][k - bit] += p * (1.0 - d1);
                    } else {
                        // (0,1): stays w.p. delta2, else turns up
                        nxt[1][k] += p * d2;
                        nxt[0][k + bit] += p * (1.0 - d2);
                    }
                }
            }
            std::mem::swap(&mut part, &mut nxt);
        }
        // a carry leaving column X is a crossing: height + 1
        cur.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..nmask * nh {
            cur[k] += part[0][k];
            if part[1][k] != 0.0 {
                cur[k + nmask] += part[1][k];
            }
        }
    }
    let mut pmf = std::collections::BTreeMap::new();
    for hh in 0..nh {
        let s: Real = cur[hh * nmask..(hh + 1) * nmask].iter().sum();
        if s > 0.0 {
            pmf.insert(hh as i64 - x as i64, s);
        }
    }
    Ok(HeightDistribution { x, y, pmf })
}

/// `E[q^{k H(X, Y)}]` computed exactly.
pub fn exact_q_moment(
    params: &SixVertexParams,
    x: usize,
    y: usize,
    k: u32,
    boundary: &BoundarySpec,
) -> Result<Real, VertexError> {
    let d = exact_height_distribution(&params.rates(), x, y, boundary)?;
    Ok(d.expect(|h| params.q.powi(k as i32 * h as i32)))
}

/// Exact value of
/// `(w; q)_inf sum_{M >= 0} w^M / (q; q)_M E[1 / (zeta q^{H(x,t) - M}; q)_inf]`
/// with `w = kappa beta2 / beta1`, under double-sided Bernoulli data.
///
/// The `M`-sum is truncated once a term falls below `1e-16` relative to the
/// partial sum.
pub fn exact_fredholm_lhs(params: &SixVertexParams, x: usize, t: usize, zeta: Cplx) -> Result<Cplx, VertexError> {
    let omega = params.kappa * params.beta2 / params.beta1;
    if omega >= 1.0 {
        return Err(VertexError::IdentityDomain { lhs: params.kappa * params.beta2, rhs: params.beta1 });
    }
    let q = QParam::new(params.q)?;
    let dist = exact_height_distribution(&params.rates(), x, t, &BoundarySpec::double_bernoulli(params.b1, params.b2))?;
    fredholm_observable(&dist, omega, q, zeta)
}

/// `(w; q)_inf sum_M w^M/(q;q)_M E[1/(zeta q^{H - M}; q)_inf]` for a given law
/// of `H`.
pub fn fredholm_observable(dist: &HeightDistribution, omega: Real, q: QParam, zeta: Cplx) -> Result<Cplx, VertexError> {
    let qq = q.get();
    let mut sum = Cplx::new(0.0, 0.0);
    let mut m = 0i64;
    loop {
        let coef = omega.powi(m as i32) / poch_finite_re(qq, qq, m as usize);
        let mut e = Cplx::new(0.0, 0.0);
        for (&h, &p) in &dist.pmf {
            e += q_laplace_term(zeta, h - m, q)? * p;
        }
        let term = e * coef;
        sum += term;
        m += 1;
        if term.norm() <= 1e-16 * sum.norm() || coef == 0.0 || m > 2000 {
            break;
        }
    }
    Ok(sum * poch_inf_re(omega, q))
}

/// Exact value of the boundary-weighted q-moment
///
/// ```text
/// sum_{M=0}^{J} Ŵ(M) sum_{ν} prod_{j=2}^{x} W(M + Σ_{2≤i<j} m_i; m_j) E_ν[q^{k(H(x-1, t) - M)}]
/// ```
///
/// where `ϑ = q^{-J}`, `ν` ranges over sets of distinct parts in `2..=x`
/// (part `j` present means an x-axis entrance in column `j - 1`), and `E_ν`
/// is the law of the height with those x-axis entrances and Bernoulli(b1)
/// y-axis entrances. Weights with `m_j > 1` vanish, so subsets suffice.
pub fn exact_weighted_q_moment(params: &SixVertexParams, x: usize, t: usize, k: u32, j: u32) -> Result<Real, VertexError> {
    use crate::weights::{weight_w, weight_w_hat, SpecializationParams};
    if x < 2 {
        return Err(VertexError::BoundaryMismatch { got: x, want: 2 });
    }
    let sp = SpecializationParams::with_j(params.q, params.kappa, params.b1, params.b2, j);
    let q = params.q;
    let cols = x - 1;
    let rates = params.rates();
    let mut total = 0.0;
    for mask in 0..(1usize << cols) {
        let bits: Vec<bool> = (0..cols).map(|c| (mask >> c) & 1 == 1).collect();
        let dist = exact_height_distribution(&rates, cols, t, &BoundarySpec { x_axis: AxisSpec::Explicit(bits.clone()), y_axis: AxisSpec::Bernoulli(params.b1) })?;
        for m in 0..=j as usize {
            let mut w = weight_w_hat(m, &sp)?;
            let mut cnt = m as u64;
            for &b in &bits {
                w *= weight_w(cnt, b as usize, sp.theta, q, params.b2);
                cnt += b as u64;
            }
            if w == 0.0 {
                continue;
            }
            total += w * dist.expect(|h| q.powi(k as i32 * (h as i32 - m as i32)));
        }
    }
    Ok(total)
}

/// Empirical histogram helper used by tests: counts of each value.
pub fn histogram(samples: &[i64]) -> HashMap<i64, usize> {
    let mut m = HashMap::new();
    for &s in samples {
        *m.entry(s).or_insert(0) += 1;
    }
    m
}

/// Draws `n` independent uniform coins from `rng`; exposed for tests of
/// [`vertex_update`].
pub fn uniforms<R: Rng>(rng: &mut R, n: usize) -> Vec<Real> {
    (0..n).map(|_| rng.gen::<Real>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates() -> VertexRates {
        VertexRates::new(0.25, 0.5).unwrap()
    }

    #[test]
    fn vertex_update_rules() {
        let r = rates();
        assert_eq!(vertex_update(0, 0, &r, 0.9), (0, 0));
        assert_eq!(vertex_update(1, 1, &r, 0.1), (1, 1));
        assert_eq!(vertex_update(1, 0, &r, 0.2), (1, 0));
        assert_eq!(vertex_update(1, 0, &r, 0.3), (0, 1));
        assert_eq!(vertex_update(0, 1, &r, 0.4), (0, 1));
        assert_eq!(vertex_update(0, 1, &r, 0.6), (1, 0));
    }

    #[test]
    fn single_vertex_step_law() {
        // step data on a 1x1 window: H = 1 exactly when the horizontal path
        // continues to the right
        let d = exact_height_distribution(&rates(), 1, 1, &BoundarySpec::step()).unwrap();
        assert!((d.pmf[&1] - 0.5).abs() < 1e-15);
        assert!((d.pmf[&0] - 0.5).abs() < 1e-15);
        let p = SixVertexParams::new(0.25, 0.5, 0.5, 0.5).unwrap();
        let m = exact_q_moment(&p, 1, 1, 1, &BoundarySpec::step()).unwrap();
        assert!((m - (0.5 * p.q + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn empty_boundary_is_zero() {
        let d = exact_height_distribution(&rates(), 5, 4, &BoundarySpec::empty()).unwrap();
        assert_eq!(d.pmf.len(), 1);
        assert_eq!(d.pmf[&0], 1.0);
        assert_eq!(simulate_height(&rates(), 30, 30, &BoundarySpec::empty(), 3).unwrap(), 0);
    }

    #[test]
    fn exact_pmf_normalised_and_supported() {
        let d = exact_height_distribution(&rates(), 7, 6, &BoundarySpec::double_bernoulli(0.4, 0.3)).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-13);
        assert!(d.pmf.keys().all(|&h| (-7..=6).contains(&h)));
        assert!(exact_height_distribution(&rates(), 13, 2, &BoundarySpec::step()).is_err());
    }

    #[test]
    fn stationary_mean_is_linear() {
        let p = SixVertexParams::new(0.25, 0.5, 0.5, 0.4).unwrap();
        let b2 = crate::params::translation_invariant_b2(0.25, 0.5, 0.5).unwrap();
        let d = exact_height_distribution(&p.rates(), 6, 5, &BoundarySpec::double_bernoulli(0.5, b2)).unwrap();
        let mean = d.expect(|h| h as Real);
        // y-axis density b1 per row minus x-axis density b2 per column
        assert!((mean - (5.0 * 0.5 - 6.0 * b2)).abs() < 1e-12, "{mean}");
    }

    #[test]
    fn colour_tracking_matches_crossing_count() {
        let r = rates();
        let bd = BoundarySpec::double_bernoulli(0.6, 0.45);
        for seed in 0..300 {
            let a = simulate_height(&r, 9, 11, &bd, seed).unwrap();
            let b = brute_force_color_height(&r, 9, 11, &bd, seed).unwrap();
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn diagonal_and_row_sweeps_agree_pathwise() {
        let r = rates();
        let mut rng = sample_rng(11, 0);
        for key in 0..1000u64 {
            let (xb, yb) = sample_boundary(&BoundarySpec::double_bernoulli(0.5, 0.35), 8, 7, &mut rng);
            assert_eq!(diagonal_sweep_keyed(&r, &xb, &yb, key), row_sweep_keyed(&r, &xb, &yb, key));
        }
    }

    #[test]
    fn monte_carlo_matches_exact_pmf() {
        let r = rates();
        let bd = BoundarySpec::double_bernoulli(0.5, 0.3);
        let d = exact_height_distribution(&r, 5, 5, &bd).unwrap();
        let n = 40_000;
        let s = sample_heights(&r, 5, 5, &bd, 99, n).unwrap();
        let hist = histogram(&s);
        for (&h, &p) in &d.pmf {
            let emp = *hist.get(&h).unwrap_or(&0) as Real / n as Real;
            let se = (p * (1.0 - p) / n as Real).sqrt();
            assert!((emp - p).abs() <= 5.0 * se + 1e-12, "h={h}: {emp} vs {p}");
        }
    }

    #[test]
    fn sampling_is_thread_count_independent() {
        let r = rates();
        let bd = BoundarySpec::double_bernoulli(0.5, 0.3);
        let a = sample_heights(&r, 20, 20, &bd, 5, 64).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| sample_heights(&r, 20, 20, &bd, 5, 64).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn fredholm_lhs_is_finite_and_stable() {
        let p = SixVertexParams::new(0.25, 0.5, 0.5, 0.3).unwrap();
        let v = exact_fredholm_lhs(&p, 3, 3, Cplx::new(-0.125, 0.0)).unwrap();
        assert!(v.re.is_finite() && v.im.abs() < 1e-14);
        // zeta = 0 collapses the observable to (w;q)_inf sum_M w^M/(q;q)_M = 1
        let one = exact_fredholm_lhs(&p, 3, 3, Cplx::new(0.0, 0.0)).unwrap();
        assert!((one.re - 1.0).abs() < 1e-13);
    }
}
