//! The Airy function, the Airy kernel, and the Baik–Rains distribution
//! `F_{BR;c}(s) = ∂_s [g(c, s) det(Id - K_{Ai; c²+s})_{L²(0,∞)}]`.
//!
//! `Ai` and `Ai'` are evaluated from a table of Taylor expansions (centres
//! spaced by 1/4 on `[-40.25, 40.25]`) whose coefficients follow from the
//! Airy equation `Ai'' = x Ai`; the values at the centres come from the
//! steepest-descent contour integral `Ai(x) = (1/2πi) ∫ exp(z³/3 - xz) dz`.
//!
//! Baik–Rains building blocks: the resolvent and determinant live on
//! `L²(0, M)` in the shifted variable (`x ↦ x + s`), discretised by panel
//! Gauss–Legendre; half-line integrals of `Ai` are computed on the same kind
//! of panels, truncated where `Ai` is below `1e-40`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::{gauss_legendre, Contour, ContourKind};
use crate::{Cplx, Real};

/// Errors from Airy and Baik–Rains evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AiryError {
    /// Argument outside the supported range.
    #[error("argument {0} outside the supported range")]
    Range(Real),
    /// The discretised resolvent is nearly singular.
    #[error("ill-conditioned resolvent (condition estimate {0:e})")]
    IllConditioned(Real),
    /// Grid refinement did not stabilise.
    #[error("grid refinement did not converge: {0} vs {1}")]
    NotConverged(Real, Real),
}

/// Largest `|x|` accepted by [`airy`].
pub const AIRY_RANGE: Real = 40.0;

const TABLE_LO: Real = -40.25;
const TABLE_STEP: Real = 0.25;
const TABLE_LEN: usize = 323;
const TAYLOR_TERMS: usize = 28;

/// `(Ai(x), Ai'(x))` from the contour integral through the saddle point(s):
/// for `x ≥ 0` a wedge with corner `√x` and arms at `±π/3`; for `x < 0` the
/// vertical segment `[-i√|x|, i√|x|]` with arms at `±π/3` from its ends.
pub fn airy_contour(x: Real) -> (Real, Real) {
    let f = |z: Cplx| (z * z * z / 3.0 - x * z).exp();
    let arm = 7.0;
    let n = 24;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    if x >= 0.0 {
        let c = Contour::new(
            ContourKind::Wedge { vertex: Cplx::new(x.sqrt(), 0.0), arm, angle_in: -PI / 3.0, angle_out: PI / 3.0 },
            n,
        );
        nodes = c.nodes;
        weights = c.weights;
    } else {
        let s = (-x).sqrt();
        let lo = Cplx::new(0.0, -s);
        let hi = Cplx::new(0.0, s);
        let rule = gauss_legendre(n);
        let mut seg = |a: Cplx, b: Cplx, panels: usize| {
            for k in 0..panels {
                let pa = a + (b - a) * (k as Real / panels as Real);
                let pb = a + (b - a) * ((k + 1) as Real / panels as Real);
                let mid = (pa + pb) * 0.5;
                let half = (pb - pa) * 0.5;
                for (t, w) in rule.0.iter().zip(&rule.1) {
                    nodes.push(mid + half * *t);
                    weights.push(half * *w);
                }
            }
        };
        seg(lo + Cplx::from_polar(arm, -PI / 3.0), lo, 7);
        // phase speed along the segment is at most 3|x|; keep ≤ 4 rad per panel
        let panels = ((2.0 * s * 3.0 * (-x)) / 4.0).ceil().max(1.0) as usize;
        seg(lo, hi, panels);
        seg(hi, hi + Cplx::from_polar(arm, PI / 3.0), 7);
    }
    let mut ai = Cplx::new(0.0, 0.0);
    let mut aip = Cplx::new(0.0, 0.0);
    for (z, w) in nodes.iter().zip(&weights) {
        let v = f(*z) * w;
        ai += v;
        aip -= z * v;
    }
    let d = Cplx::new(0.0, 2.0 * PI);
    ((ai / d).re, (aip / d).re)
}

fn table() -> &'static Vec<[Real; TAYLOR_TERMS]> {
    static TABLE: OnceLock<Vec<[Real; TAYLOR_TERMS]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..TABLE_LEN)
            .into_par_iter()
            .map(|k| {
                let x0 = TABLE_LO + TABLE_STEP * k as Real;
                let (a0, a1) = airy_contour(x0);
                let mut a = [0.0; TAYLOR_TERMS];
                a[0] = a0;
                a[1] = a1;
                a[2] = x0 * a0 / 2.0;
                for n in 1..TAYLOR_TERMS - 2 {
                    a[n + 2] = (x0 * a[n] + a[n - 1]) / (((n + 2) * (n + 1)) as Real);
                }
                a
            })
            .collect()
    })
}

/// `(Ai(x), Ai'(x))` for `|x| ≤ 40`.
pub fn airy_pair(x: Real) -> Result<(Real, Real), AiryError> {
    if !(x.abs() <= AIRY_RANGE) {
        return Err(AiryError::Range(x));
    }
    let t = table();
    let k = (((x - TABLE_LO) / TABLE_STEP).round() as usize).min(TABLE_LEN - 1);
    let h = x - (TABLE_LO + TABLE_STEP * k as Real);
    let a = &t[k];
    let mut v = 0.0;
    let mut d = 0.0;
    for n in (0..TAYLOR_TERMS).rev() {
        v = v * h + a[n];
        if n >= 1 {
            d = d * h + n as Real * a[n];
        }
    }
    Ok((v, d))
}

/// `Ai(x)` for `|x| ≤ 40`.
pub fn airy(x: Real) -> Result<Real, AiryError> {
    airy_pair(x).map(|p| p.0)
}

/// `Ai(x)` for any real `x`: zero above the table (where `Ai < 1e-73`).
fn ai_ext(x: Real) -> Real {
    if x > AIRY_RANGE {
        0.0
    } else {
        airy_pair(x).expect("argument within range").0
    }
}

fn ai_pair_ext(x: Real) -> (Real, Real) {
    if x > AIRY_RANGE {
        (0.0, 0.0)
    } else {
        airy_pair(x).expect("argument within range")
    }
}

/// Airy kernel by the closed form
/// `(Ai(x)Ai'(y) - Ai'(x)Ai(y))/(x - y)` (diagonal `Ai'(x)² - x Ai(x)²`).
pub fn airy_kernel(x: Real, y: Real) -> Result<Real, AiryError> {
    if x < -AIRY_RANGE || y < -AIRY_RANGE {
        return Err(AiryError::Range(x.min(y)));
    }
    let (ax, dx) = ai_pair_ext(x);
    if x == y {
        return Ok(dx * dx - x * ax * ax);
    }
    let (ay, dy) = ai_pair_ext(y);
    Ok((ax * dy - dx * ay) / (x - y))
}

/// Upper integration limit such that `Ai(a + λ)` is negligible beyond it.
fn tail_limit(a: Real) -> Real {
    (30.0 - a).max(1.0)
}

/// Panel Gauss–Legendre nodes/weights on `[a, b]` with panels of length
/// `≤ h` and `n` nodes each.
fn panel_rule(a: Real, b: Real, h: Real, n: usize) -> (Vec<Real>, Vec<Real>) {
    let panels = ((b - a) / h).ceil().max(1.0) as usize;
    let rule = gauss_legendre(n);
    let mut xs = Vec::with_capacity(panels * n);
    let mut ws = Vec::with_capacity(panels * n);
    for k in 0..panels {
        let pa = a + (b - a) * k as Real / panels as Real;
        let pb = a + (b - a) * (k + 1) as Real / panels as Real;
        let (mid, half) = (0.5 * (pa + pb), 0.5 * (pb - pa));
        for (t, w) in rule.0.iter().zip(&rule.1) {
            xs.push(mid + half * t);
            ws.push(half * w);
        }
    }
    (xs, ws)
}

/// Airy kernel by the λ-integral `∫_0^∞ Ai(x + λ) Ai(y + λ) dλ`.
pub fn airy_kernel_integral(x: Real, y: Real) -> Result<Real, AiryError> {
    if x < -10.0 || y < -10.0 {
        return Err(AiryError::Range(x.min(y)));
    }
    let (ls, ws) = panel_rule(0.0, tail_limit(x.min(y)), 0.5, 20);
    Ok(ls.iter().zip(&ws).map(|(l, w)| w * ai_ext(x + l) * ai_ext(y + l)).sum())
}

/// Airy kernel by the double contour integral
/// `(2πi)^{-2} ∫∫ exp(w³/3 - xw - v³/3 + yv) dw dv / (w - v)`, with `w` on a
/// wedge through `1` with arms at `±π/3` and `v` on a wedge through `-1` with
/// arms at `±2π/3` (both oriented upward).
pub fn airy_kernel_contour(x: Real, y: Real) -> Real {
    let wc = Contour::new(ContourKind::Wedge { vertex: Cplx::new(1.0, 0.0), arm: 7.0, angle_in: -PI / 3.0, angle_out: PI / 3.0 }, 24);
    let vc = Contour::new(
        ContourKind::Wedge { vertex: Cplx::new(-1.0, 0.0), arm: 7.0, angle_in: -2.0 * PI / 3.0, angle_out: 2.0 * PI / 3.0 },
        24,
    );
    let fw: Vec<Cplx> = wc.nodes.iter().zip(&wc.weights).map(|(w, d)| (w * w * w / 3.0 - x * w).exp() * d).collect();
    let fv: Vec<Cplx> = vc.nodes.iter().zip(&vc.weights).map(|(v, d)| (-v * v * v / 3.0 + y * v).exp() * d).collect();
    let mut s = Cplx::new(0.0, 0.0);
    for (w, a) in wc.nodes.iter().zip(&fw) {
        for (v, b) in vc.nodes.iter().zip(&fv) {
            s += a * b / (w - v);
        }
    }
    (s / Cplx::new(0.0, 2.0 * PI).powi(2)).re
}

// ---------------------------------------------------------------------------
// Baik–Rains
// ---------------------------------------------------------------------------

/// Discretisation of `(0, M)` used for the shifted-kernel determinant and
/// resolvent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiryGrid {
    /// Left endpoint `s` of the unshifted interval `[s, s + M]`.
    pub s: Real,
    /// Truncation length.
    pub m: Real,
    /// Panel length.
    pub panel: Real,
    /// Gauss–Legendre nodes per panel.
    pub per_panel: usize,
    /// Nodes in `(0, M)`.
    pub nodes: Vec<Real>,
    /// Weights.
    pub weights: Vec<Real>,
}

impl AiryGrid {
    /// Grid on `(0, m)` with panels of length `panel` and `per_panel` nodes.
    pub fn new(s: Real, m: Real, panel: Real, per_panel: usize) -> Self {
        let (nodes, weights) = panel_rule(0.0, m, panel, per_panel);
        Self { s, m, panel, per_panel, nodes, weights }
    }

    /// Default grid for `(c, s)`: `M = max(20, 16 - s - c²)`, unit panels with
    /// 14 nodes.
    pub fn default_for(c: Real, s: Real) -> Self {
        Self::new(s, default_m(c, s), 1.0, 14)
    }

    /// The grid with twice as many nodes per panel.
    pub fn doubled(&self) -> Self {
        Self::new(self.s, self.m, self.panel, 2 * self.per_panel)
    }

    /// The same nodes relative to a different left endpoint.
    pub fn at(&self, s: Real) -> Self {
        Self { s, ..self.clone() }
    }

    /// Bound on the kernel mass beyond the truncation point:
    /// `K_Ai(a + M, a + M)` with `a = c² + s`.
    pub fn tail_bound(&self, c: Real) -> Real {
        airy_kernel(c * c + self.s + self.m, c * c + self.s + self.m).unwrap_or(0.0).abs()
    }
}

fn default_m(c: Real, s: Real) -> Real {
    (16.0 - s - c * c).max(20.0).ceil()
}

/// Tail integrals `T(z) = ∫_z^∞ e^{-cv} Ai(v) dv`, tabulated at the integers
/// and completed by one Gauss–Legendre panel from `z` to the next integer.
struct AiTail {
    c: Real,
    start: i64,
    tails: Vec<Real>,
}

impl AiTail {
    const START: i64 = -12;
    const END: i64 = 40;

    fn new(c: Real) -> Self {
        let n = (Self::END - Self::START) as usize;
        let piece = |a: Real, b: Real| -> Real {
            let (xs, ws) = panel_rule(a, b, 1.0, 24);
            xs.iter().zip(&ws).map(|(v, w)| w * (-c * v).exp() * ai_ext(*v)).sum()
        };
        let pieces: Vec<Real> = (0..n).map(|k| piece((Self::START + k as i64) as Real, (Self::START + k as i64 + 1) as Real)).collect();
        let mut tails = vec![0.0; n + 1];
        for k in (0..n).rev() {
            tails[k] = tails[k + 1] + pieces[k];
        }
        Self { c, start: Self::START, tails }
    }

    fn eval(&self, z: Real) -> Real {
        if z >= Self::END as Real {
            return 0.0;
        }
        assert!(z >= self.start as Real, "tail integral below the tabulated range");
        let k = z.ceil();
        let (xs, ws) = panel_rule(z, k.max(z + 1e-300), 1.0, 24);
        let head: Real = if k > z { xs.iter().zip(&ws).map(|(v, w)| w * (-self.c * v).exp() * ai_ext(*v)).sum() } else { 0.0 };
        head + self.tails[(k as i64 - self.start) as usize]
    }

    /// `∫_0^∞ e^{-cu} Ai(u + a) du = e^{ca} T(a)`.
    fn laplace(&self, a: Real) -> Real {
        (self.c * a).exp() * self.eval(a)
    }
}

/// `ℛ`, `Φ(x + s)` and `Ψ(x + s)` at the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaikRainsComponents {
    /// `ℛ_{c,s}`.
    pub r: Real,
    /// `Φ(x_k + s)`.
    pub phi: Vec<Real>,
    /// `Ψ(x_k + s)`.
    pub psi: Vec<Real>,
}

/// `ℛ = s + e^{-2c³/3} ∫_s^∞ (u - s) e^{-cu} Ai(u + c²) du` (the double
/// integral collapses along `u = x + y`).
pub fn baik_rains_r(c: Real, s: Real) -> Real {
    let a = c * c;
    let hi = tail_limit(a) + 10.0;
    let (us, ws) = panel_rule(s, hi.max(s + 1.0), 1.0, 20);
    let integral: Real = us.iter().zip(&ws).map(|(u, w)| w * (u - s) * (-c * u).exp() * ai_ext(u + a)).sum();
    s + (-2.0 * c * c * c / 3.0).exp() * integral
}

/// `Φ_{c,s}(x) = e^{-2c³/3} ∫_0^∞ Ai(x + c² + λ) B(λ) dλ - ∫_0^∞ e^{cy} Ai(x + y + c²) dy`,
/// `B(λ) = ∫_s^∞ e^{-cy} Ai(y + c² + λ) dy`, at the given points.
pub fn baik_rains_phi(c: Real, s: Real, xs: &[Real]) -> Vec<Real> {
    let a = c * c;
    let (ls, lw) = panel_rule(0.0, tail_limit(a + s.min(0.0)) + 2.0, 1.0, 20);
    let (tp, tm) = (AiTail::new(c), AiTail::new(-c));
    let b: Vec<Real> = ls.iter().map(|l| (-c * s).exp() * tp.laplace(s + a + l)).collect();
    let e = (-2.0 * c * c * c / 3.0).exp();
    xs.par_iter()
        .map(|x| {
            let double: Real = ls.iter().zip(&lw).zip(&b).map(|((l, w), bl)| w * ai_ext(x + a + l) * bl).sum();
            e * double - tm.laplace(x + a)
        })
        .collect()
}

/// `Ψ_{c,s}(y) = e^{2c³/3 + cy} - ∫_0^∞ e^{-cx} Ai(x + y + c²) dx` at the given
/// points.
pub fn baik_rains_psi(c: Real, xs: &[Real]) -> Vec<Real> {
    let a = c * c;
    let tp = AiTail::new(c);
    xs.iter().map(|y| (2.0 * c * c * c / 3.0 + c * y).exp() - tp.laplace(y + a)).collect()
}

/// All three components on the grid (evaluated at `x_k + s`).
pub fn baik_rains_components(c: Real, grid: &AiryGrid) -> BaikRainsComponents {
    let shifted: Vec<Real> = grid.nodes.iter().map(|x| x + grid.s).collect();
    BaikRainsComponents {
        r: baik_rains_r(c, grid.s),
        phi: baik_rains_phi(c, grid.s, &shifted),
        psi: baik_rains_psi(c, &shifted),
    }
}

/// The symmetrised Nyström matrix `√w_i K_{Ai; c²+s}(x_i, x_j) √w_j`.
fn shifted_kernel_matrix(c: Real, grid: &AiryGrid) -> DMatrix<Real> {
    let a = c * c + grid.s;
    let n = grid.nodes.len();
    let sw: Vec<Real> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let pairs: Vec<(Real, Real)> = grid.nodes.iter().map(|x| ai_pair_ext(x + a)).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let (xi, xj) = (grid.nodes[i] + a, grid.nodes[j] + a);
        let (ai, di) = pairs[i];
        let k = if i == j {
            di * di - xi * ai * ai
        } else {
            let (aj, dj) = pairs[j];
            (ai * dj - di * aj) / (xi - xj)
        };
        sw[i] * k * sw[j]
    })
}

/// `det(Id - K_{Ai; c²+s})` on `L²(0, M)` on the given grid.
pub fn tw_like_det_on(c: Real, grid: &AiryGrid) -> Real {
    let n = grid.nodes.len();
    (DMatrix::identity(n, n) - shifted_kernel_matrix(c, grid)).determinant()
}

/// `det(Id - K_{Ai; c²+s})_{L²(0,∞)}` with grid doubling until two values
/// agree to `1e-12`.
pub fn tw_like_det(c: Real, s: Real) -> Result<Real, AiryError> {
    if s < -8.0 {
        return Err(AiryError::Range(s));
    }
    let g = AiryGrid::default_for(c, s);
    let a = tw_like_det_on(c, &g);
    let b = tw_like_det_on(c, &g.doubled());
    if (a - b).abs() > 1e-9 {
        return Err(AiryError::NotConverged(a, b));
    }
    Ok(b)
}

/// `g(c, s)` and `det(Id - K_{Ai; c²+s})` on a given grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GDet {
    /// `g(c, s)`.
    pub g: Real,
    /// The determinant.
    pub det: Real,
    /// `ℛ`.
    pub r: Real,
    /// Condition-number estimate of `Id - K` (ratio of extreme singular values).
    pub condition: Real,
}

/// `g(c, s) = ℛ - ⟨(Id - K)^{-1} P_s Φ, P_s Ψ⟩` and the determinant, with the
/// resolvent on the shifted grid.
pub fn g_and_det_on(c: Real, grid: &AiryGrid) -> Result<GDet, AiryError> {
    let n = grid.nodes.len();
    let comp = baik_rains_components(c, grid);
    let m = DMatrix::identity(n, n) - shifted_kernel_matrix(c, grid);
    let sw: Vec<Real> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let rhs = DVector::from_fn(n, |i, _| comp.phi[i] * sw[i]);
    // Id - K is symmetric: the condition number is the ratio of extreme |eigenvalues|
    let ev = m.clone().symmetric_eigenvalues();
    let condition = ev.iter().fold(0.0, |a: Real, v| a.max(v.abs())) / ev.iter().fold(Real::INFINITY, |a: Real, v| a.min(v.abs()));
    if !(condition < 1e8) {
        return Err(AiryError::IllConditioned(condition));
    }
    let lu = m.lu();
    let det = lu.determinant();
    let f = lu.solve(&rhs).ok_or(AiryError::IllConditioned(Real::INFINITY))?;
    let inner: Real = (0..n).map(|i| f[i] * sw[i] * comp.psi[i]).sum();
    Ok(GDet { g: comp.r - inner, det, r: comp.r, condition })
}

/// `g(c, s)` on the default grid.
pub fn g_of_cs(c: Real, s: Real) -> Result<Real, AiryError> {
    check_domain(c, s)?;
    Ok(g_and_det_on(c, &AiryGrid::default_for(c, s))?.g)
}

fn check_domain(c: Real, s: Real) -> Result<(), AiryError> {
    if s < -8.0 || !s.is_finite() {
        return Err(AiryError::Range(s));
    }
    if c.abs() > 2.0 || !c.is_finite() {
        return Err(AiryError::Range(c));
    }
    Ok(())
}

/// Finite-difference step of the `s`-derivative.
pub const BR_STEP: Real = 1e-3;

/// `F_{BR;c}(s)` on grids derived from `template` (only the node layout is
/// used; the left endpoint follows `s`): central differences with steps
/// `h` and `h/2` combined by one Richardson extrapolation.
pub fn baik_rains_cdf_on(c: Real, s: Real, template: &AiryGrid) -> Result<Real, AiryError> {
    let h = BR_STEP;
    let gd = |x: Real| -> Result<Real, AiryError> {
        let v = g_and_det_on(c, &template.at(x))?;
        Ok(v.g * v.det)
    };
    let d1 = (gd(s + h)? - gd(s - h)?) / (2.0 * h);
    let d2 = (gd(s + h / 2.0)? - gd(s - h / 2.0)?) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// `F_{BR;c}(s)` on the default grid.
pub fn baik_rains_cdf(c: Real, s: Real) -> Result<Real, AiryError> {
    check_domain(c, s)?;
    baik_rains_cdf_on(c, s, &AiryGrid::default_for(c, s))
}

/// One row of a Baik–Rains table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaikRainsRow {
    /// `c`.
    pub c: Real,
    /// `s`.
    pub s: Real,
    /// `g(c, s)`.
    pub g: Real,
    /// `det(Id - K_{Ai; c²+s})`.
    pub det: Real,
    /// `F_{BR;c}(s)`.
    pub f_br: Real,
}

/// Tabulates `g`, the determinant and `F_{BR;c}` at the given points (in
/// parallel).
pub fn baik_rains_table(c: Real, s_values: &[Real]) -> Result<Vec<BaikRainsRow>, AiryError> {
    s_values
        .par_iter()
        .map(|&s| {
            check_domain(c, s)?;
            let grid = AiryGrid::default_for(c, s);
            let v = g_and_det_on(c, &grid)?;
            let f = baik_rains_cdf_on(c, s, &grid)?;
            Ok(BaikRainsRow { c, s, g: v.g, det: v.det, f_br: f })
        })
        .collect()
}

/// A tabulated distribution function, linearly interpolated and clamped to
/// `[0, 1]`, with `0` left of the table and `1` right of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedCdf {
    /// Abscissae (increasing).
    pub s: Vec<Real>,
    /// Values.
    pub f: Vec<Real>,
}

impl TabulatedCdf {
    /// `F_{BR;c}` on an equispaced grid over `[lo, hi]` with `n` points.
    pub fn baik_rains(c: Real, lo: Real, hi: Real, n: usize) -> Result<Self, AiryError> {
        let s: Vec<Real> = (0..n).map(|i| lo + (hi - lo) * i as Real / (n - 1) as Real).collect();
        let rows = baik_rains_table(c, &s)?;
        Ok(Self { s, f: rows.iter().map(|r| r.f_br).collect() })
    }

    /// Interpolated value.
    pub fn eval(&self, x: Real) -> Real {
        let n = self.s.len();
        if n == 0 || x < self.s[0] {
            return 0.0;
        }
        if x >= self.s[n - 1] {
            return 1.0;
        }
        let k = self.s.partition_point(|&v| v <= x) - 1;
        let t = (x - self.s[k]) / (self.s[k + 1] - self.s[k]);
        (self.f[k] + t * (self.f[k + 1] - self.f[k])).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maclaurin(x: Real) -> (Real, Real) {
        // Ai = c1 f - c2 g with the standard power series
        let c1 = 0.355_028_053_887_817_2;
        let c2 = 0.258_819_403_792_806_8;
        let (mut f, mut g) = (0.0, 0.0);
        let (mut tf, mut tg) = (1.0, x);
        let (mut fp, mut gp) = (0.0, 1.0);
        for k in 0..50 {
            f += tf;
            g += tg;
            let k3 = 3.0 * k as Real;
            // derivative terms
            if k > 0 {
                fp += tf * k3 / x;
                gp += tg * (k3 + 1.0) / x;
            }
            tf *= x * x * x / ((k3 + 2.0) * (k3 + 3.0));
            tg *= x * x * x / ((k3 + 3.0) * (k3 + 4.0));
        }
        (c1 * f - c2 * g, c1 * fp - c2 * gp)
    }

    #[test]
    fn airy_matches_maclaurin() {
        assert!((airy(0.0).unwrap() - 0.355_028_053_887_817_2).abs() < 1e-14);
        for &x in &[-3.0, -1.7, -0.4, 0.3, 1.1, 2.5] {
            let (a, d) = airy_pair(x).unwrap();
            let (ma, md) = maclaurin(x);
            assert!((a - ma).abs() < 1e-13, "{x}: {a} vs {ma}");
            assert!((d - md).abs() < 1e-12, "{x}: {d} vs {md}");
        }
    }

    #[test]
    fn airy_known_values() {
        let known: [(Real, Real); 5] = [
            (1.0, 0.135_292_416_312_881_4),
            (2.0, 0.034_924_130_423_274_38),
            (-1.0, 0.535_560_883_292_352_1),
            (-5.0, 0.350_761_009_024_114_2),
            (5.0, 1.083_444_281_360_744e-4),
        ];
        for (x, v) in known {
            assert!((airy(x).unwrap() - v).abs() < 1e-13, "{x}");
        }
        assert!(airy(41.0).is_err());
    }

    #[test]
    fn airy_satisfies_ode_and_table_is_continuous() {
        let h = 1e-4;
        for k in 0..20 {
            let x = -9.0 + 0.9 * k as Real;
            let d2 = (airy(x + h).unwrap() - 2.0 * airy(x).unwrap() + airy(x - h).unwrap()) / (h * h);
            assert!((d2 - x * airy(x).unwrap()).abs() < 1e-6, "{x}: {d2} vs {}", x * airy(x).unwrap());
        }
        // contour reference against the table away from the centres
        for &x in &[-33.1, -12.37, 7.61, 22.2] {
            let (a, d) = airy_pair(x).unwrap();
            let (ra, rd) = airy_contour(x);
            assert!((a - ra).abs() < 1e-13 && (d - rd).abs() < 1e-12, "{x}");
        }
        let mut prev = Real::INFINITY;
        for k in 0..100 {
            let v = airy(0.3 * k as Real).unwrap();
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn kernel_forms_agree() {
        for &(x, y) in &[(0.0, 0.0), (-1.5, 0.7), (2.0, -0.3), (1.0, 1.0), (-2.0, -2.5)] {
            let a = airy_kernel(x, y).unwrap();
            let b = airy_kernel_integral(x, y).unwrap();
            assert!((a - b).abs() < 1e-12, "{x},{y}: {a} vs {b}");
            assert!((airy_kernel(y, x).unwrap() - a).abs() < 1e-14);
        }
        assert!(airy_kernel_integral(15.0, 0.0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn tracy_widom_at_zero() {
        let f2 = tw_like_det(0.0, 0.0).unwrap();
        // independent coarse discretisation: longer panels, shorter cutoff
        let coarse = tw_like_det_on(0.0, &AiryGrid::new(0.0, 14.0, 2.0, 18));
        assert!((f2 - coarse).abs() < 1e-6, "{f2} vs {coarse}");
        assert!((f2 - 0.969_372_828_355).abs() < 1e-9, "{f2}");
        assert!((tw_like_det(0.0, 10.0).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn components_at_c_zero() {
        let s = -1.0;
        // Ψ(y) = 1 - ∫_0^∞ Ai(x + y) dx
        let ys = [0.5, 2.0];
        let psi = baik_rains_psi(0.0, &ys);
        for (y, p) in ys.iter().zip(&psi) {
            let (ls, ws) = panel_rule(0.0, 40.0, 0.25, 20);
            let direct: Real = ls.iter().zip(&ws).map(|(l, w)| w * ai_ext(l + y)).sum();
            assert!((p - (1.0 - direct)).abs() < 1e-12);
        }
        // ℛ by a direct two-dimensional quadrature
        let (xs, xw) = panel_rule(s, 30.0, 0.5, 16);
        let (ys2, yw) = panel_rule(0.0, 40.0, 0.5, 16);
        let mut direct = 0.0;
        for (x, wx) in xs.iter().zip(&xw) {
            for (y, wy) in ys2.iter().zip(&yw) {
                direct += wx * wy * ai_ext(x + y);
            }
        }
        assert!((baik_rains_r(0.0, s) - (s + direct)).abs() < 1e-8);
        let phi = baik_rains_phi(0.0, s, &[s + 20.0, s + 25.0]);
        assert!(phi.iter().all(|v| v.abs() < 1e-8));
    }
}
