//! Contour quadrature, the Fredholm kernels `V_ζ` (six-vertex), `A_ζ` (ASEP)
//! and the D-contour kernel `K_ζ`, Fredholm determinant evaluation, the nested
//! q-moment integrals and the moment-to-determinant generating series.
//!
//! Conventions: every contour carries complex quadrature weights `dz`, so
//! `∮ f(z) dz ≈ Σ_i f(z_i) w_i`. Fredholm determinants on `L²(C)` use the
//! normalisation `det(Id + K)` with measure `dz / (2πi)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{AsepParams, SixVertexParams};
use crate::qseries::{poch_finite_re, poch_inf, QParam};
use crate::{Cplx, Real};

const I: Cplx = Cplx::new(0.0, 1.0);
const TWO_PI_I: Cplx = Cplx::new(0.0, 2.0 * PI);

/// Errors from quadrature, placement and determinant evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContourError {
    /// Refinement did not stabilise.
    #[error("quadrature did not converge: last two values {0} and {1}")]
    NotConverged(Cplx, Cplx),
    /// No contour satisfies the membership constraints.
    #[error("contour placement infeasible: {0}")]
    Placement(String),
    /// A singular value was hit on the node set.
    #[error("singular integrand: {0}")]
    Singular(String),
    /// Fredholm series terms do not decay.
    #[error("Fredholm series diverges: {0}")]
    Divergent(String),
    /// Invalid input.
    #[error("invalid input: {0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
// Gauss–Legendre rules
// ---------------------------------------------------------------------------

type Rule = Arc<(Vec<Real>, Vec<Real>)>;

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Golub–Welsch: eigenvalues of
/// the Jacobi matrix of the Legendre recurrence). Rules are cached.
pub fn gauss_legendre(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("rule cache poisoned").get(&n) {
        return r.clone();
    }
    let mut jac = DMatrix::<Real>::zeros(n, n);
    for k in 1..n {
        let kf = k as Real;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(Real, Real)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    // symmetrise to remove eigen-solver asymmetry
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let rule: Rule = Arc::new((pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect()));
    cache.lock().expect("rule cache poisoned").insert(n, rule.clone());
    rule
}

/// Gauss–Legendre nodes/weights on the segment `[a, b]` of the complex plane
/// split into `panels` equal panels with `n` nodes each; weights are `dz`.
fn segment_rule(a: Cplx, b: Cplx, panels: usize, n: usize, nodes: &mut Vec<Cplx>, weights: &mut Vec<Cplx>) {
    let rule = gauss_legendre(n);
    let (xs, ws) = (&rule.0, &rule.1);
    for k in 0..panels {
        let pa = a + (b - a) * (k as Real / panels as Real);
        let pb = a + (b - a) * ((k + 1) as Real / panels as Real);
        let mid = (pa + pb) * 0.5;
        let half = (pb - pa) * 0.5;
        for (x, w) in xs.iter().zip(ws) {
            nodes.push(mid + half * *x);
            weights.push(half * *w);
        }
    }
}

// ---------------------------------------------------------------------------
// Contours
// ---------------------------------------------------------------------------

/// Geometric description of a contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContourKind {
    /// Positively oriented circle; trapezoid rule on equispaced angles
    /// (shifted by half a step when `half_offset`).
    Circle {
        /// Centre.
        center: Cplx,
        /// Radius.
        radius: Real,
        /// Shift the angular grid by half a step.
        half_offset: bool,
    },
    /// Two rays joined at `vertex`: in along angle `angle_in`, out along
    /// `angle_out`, each of length `arm`; Gauss–Legendre on unit panels.
    Wedge {
        /// Corner point.
        vertex: Cplx,
        /// Arm length.
        arm: Real,
        /// Direction of the incoming arm (the path starts at
        /// `vertex + arm e^{i angle_in}`).
        angle_in: Real,
        /// Direction of the outgoing arm.
        angle_out: Real,
    },
    /// The contour `R - i∞ → R - id → δ - id → δ + id → R + id → R + i∞`,
    /// truncated at `|Im r| ≤ im_cutoff`; Gauss–Legendre on unit panels.
    DContour {
        /// Abscissa `R` of the vertical rays.
        r: Real,
        /// Half-height `d` of the detour.
        d: Real,
        /// Abscissa `δ` of the detour.
        delta: Real,
        /// Truncation height.
        im_cutoff: Real,
    },
    /// Union of contours (quadratures concatenated).
    Union(Vec<ContourKind>),
}

/// A discretised contour.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    /// Geometry.
    pub kind: ContourKind,
    /// Resolution parameter (nodes per circle, or per unit panel).
    pub n: usize,
    /// Quadrature points.
    pub nodes: Vec<Cplx>,
    /// Complex quadrature weights `dz`.
    pub weights: Vec<Cplx>,
}

impl Contour {
    /// Discretises `kind` at resolution `n`.
    pub fn new(kind: ContourKind, n: usize) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        Self::fill(&kind, n, &mut nodes, &mut weights);
        Self { kind, n, nodes, weights }
    }

    /// Circle with `n` equispaced nodes.
    pub fn circle(center: Cplx, radius: Real, n: usize) -> Self {
        Self::new(ContourKind::Circle { center, radius, half_offset: false }, n)
    }

    fn fill(kind: &ContourKind, n: usize, nodes: &mut Vec<Cplx>, weights: &mut Vec<Cplx>) {
        match kind {
            ContourKind::Circle { center, radius, half_offset } => {
                let shift = if *half_offset { 0.5 } else { 0.0 };
                for k in 0..n {
                    let th = 2.0 * PI * (k as Real + shift) / n as Real;
                    let e = Cplx::from_polar(1.0, th);
                    nodes.push(center + e * *radius);
                    weights.push(I * e * *radius * (2.0 * PI / n as Real));
                }
            }
            ContourKind::Wedge { vertex, arm, angle_in, angle_out } => {
                let panels = arm.ceil().max(1.0) as usize;
                let start = vertex + Cplx::from_polar(*arm, *angle_in);
                let end = vertex + Cplx::from_polar(*arm, *angle_out);
                segment_rule(start, *vertex, panels, n, nodes, weights);
                segment_rule(*vertex, end, panels, n, nodes, weights);
            }
            ContourKind::DContour { r, d, delta, im_cutoff } => {
                let rr = Cplx::new(*r, 0.0);
                let dl = Cplx::new(*delta, 0.0);
                let ray = ((im_cutoff - d).ceil().max(1.0)) as usize;
                let hor = ((r - delta).ceil().max(1.0)) as usize;
                let ver = ((2.0 * d).ceil().max(1.0)) as usize;
                segment_rule(rr - I * *im_cutoff, rr - I * *d, ray, n, nodes, weights);
                segment_rule(rr - I * *d, dl - I * *d, hor, n, nodes, weights);
                segment_rule(dl - I * *d, dl + I * *d, ver, n, nodes, weights);
                segment_rule(dl + I * *d, rr + I * *d, hor, n, nodes, weights);
                segment_rule(rr + I * *d, rr + I * *im_cutoff, ray, n, nodes, weights);
            }
            ContourKind::Union(parts) => {
                for p in parts {
                    Self::fill(p, n, nodes, weights);
                }
            }
        }
    }

    /// The same contour at twice the resolution.
    pub fn refine(&self) -> Self {
        Self::new(self.kind.clone(), 2 * self.n)
    }

    /// The same contour at resolution `n`.
    pub fn with_n(&self, n: usize) -> Self {
        Self::new(self.kind.clone(), n)
    }

    /// Number of quadrature points.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Whether the contour has no nodes.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ f(z_i) w_i` at the current resolution.
    pub fn sum<F: Fn(Cplx) -> Cplx>(&self, f: F) -> Cplx {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| f(*z) * w).sum()
    }
}

/// `∮_c f(z) dz` with resolution doubling until two successive values differ
/// by less than `tol · max(1, |I|)`.
pub fn integrate<F: Fn(Cplx) -> Cplx>(f: F, c: &Contour, tol: Real) -> Result<Cplx, ContourError> {
    let mut cur = c.clone();
    let mut prev = cur.sum(&f);
    for _ in 0..8 {
        cur = cur.refine();
        let next = cur.sum(&f);
        if !next.re.is_finite() || !next.im.is_finite() {
            return Err(ContourError::Singular("non-finite quadrature sum".into()));
        }
        if (next - prev).norm() <= tol * next.norm().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(ContourError::NotConverged(prev, cur.sum(&f)))
}

// ---------------------------------------------------------------------------
// Placement
// ---------------------------------------------------------------------------

/// Membership requirements for a circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourPlacement {
    /// Points that must lie inside.
    pub inside: Vec<Cplx>,
    /// Points that must lie outside.
    pub outside: Vec<Cplx>,
    /// Required separation factor (`≥ 1`).
    pub margin: Real,
}

impl ContourPlacement {
    /// Smallest ratio by which the circle `(center, radius)` satisfies the
    /// membership constraints (`> 1` means all satisfied).
    pub fn circle_margin(&self, center: Cplx, radius: Real) -> Real {
        let mut m = Real::INFINITY;
        for z in &self.inside {
            m = m.min(radius / (z - center).norm().max(1e-300));
        }
        for z in &self.outside {
            m = m.min((z - center).norm() / radius);
        }
        m
    }

    /// Verifies the circle, reporting the first violated constraint.
    pub fn verify(&self, center: Cplx, radius: Real) -> Result<(), ContourError> {
        for z in &self.inside {
            if radius / (z - center).norm().max(1e-300) < self.margin {
                return Err(ContourError::Placement(format!("{z} not inside circle({center}, {radius}) with margin {}", self.margin)));
            }
        }
        for z in &self.outside {
            if (z - center).norm() / radius < self.margin {
                return Err(ContourError::Placement(format!("{z} not outside circle({center}, {radius}) with margin {}", self.margin)));
            }
        }
        Ok(())
    }
}

/// A pair of nested circles `(Γ, C)` as required by the determinant
/// identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NestedCircles {
    /// Centre of `Γ` (real).
    pub gamma_center: Real,
    /// Radius of `Γ`.
    pub gamma_radius: Real,
    /// Centre of `C` (real).
    pub c_center: Real,
    /// Radius of `C`.
    pub c_radius: Real,
    /// Smallest constraint ratio achieved.
    pub margin: Real,
}

impl NestedCircles {
    /// The two circles, discretised with `n` nodes each; `C` uses a
    /// half-offset grid.
    pub fn contours(&self, n: usize) -> (Contour, Contour) {
        (
            Contour::circle(Cplx::new(self.gamma_center, 0.0), self.gamma_radius, n),
            Contour::new(
                ContourKind::Circle { center: Cplx::new(self.c_center, 0.0), radius: self.c_radius, half_offset: true },
                n,
            ),
        )
    }

    /// Both radii scaled by `factor` (for deformation-invariance checks).
    pub fn scaled(&self, factor: Real) -> Self {
        Self { gamma_radius: self.gamma_radius * factor, c_radius: self.c_radius * factor, ..*self }
    }
}

/// All constraint ratios of a nested pair:
/// `Γ ∋ gamma_in`, `Γ ∌ gamma_out`, `C ∋ c_in`, `C ∌ c_out`, `Γ ⊂ C`,
/// `C ⊂ q^{-1} Γ`.
#[allow(clippy::too_many_arguments)]
fn nested_margin(
    cg: Real,
    rg: Real,
    cc: Real,
    rc: Real,
    q: Real,
    gamma: &ContourPlacement,
    c: &ContourPlacement,
) -> Real {
    let mut m = gamma.circle_margin(Cplx::new(cg, 0.0), rg).min(c.circle_margin(Cplx::new(cc, 0.0), rc));
    m = m.min(rc / ((cc - cg).abs() + rg));
    m = m.min((rg / q) / ((cc - cg / q).abs() + rc));
    m
}

/// Searches circle centres/radii on the real axis maximising the smallest
/// constraint ratio, then refines locally by pattern search.
pub fn place_nested_circles(
    q: Real,
    gamma: &ContourPlacement,
    c: &ContourPlacement,
    required_margin: Real,
) -> Result<NestedCircles, ContourError> {
    let pts: Vec<Real> = gamma.inside.iter().chain(&gamma.outside).chain(&c.inside).chain(&c.outside).map(|z| z.re).collect();
    let lo = pts.iter().cloned().fold(Real::INFINITY, Real::min);
    let hi = pts.iter().cloned().fold(Real::NEG_INFINITY, Real::max);
    let span = (hi - lo).max(1e-3);
    let g = 40usize;
    let mut best = (Real::NEG_INFINITY, 0.0, 0.0, 0.0, 0.0);
    for a in 0..=g {
        let cg = lo + span * a as Real / g as Real;
        for b in 1..=g {
            let rg = span * b as Real / g as Real;
            if gamma.circle_margin(Cplx::new(cg, 0.0), rg) <= best.0 {
                continue;
            }
            for cidx in 0..=g {
                let cc = lo + span * cidx as Real / g as Real;
                for d in 1..=g {
                    let rc = 1.5 * span * d as Real / g as Real;
                    let m = nested_margin(cg, rg, cc, rc, q, gamma, c);
                    if m > best.0 {
                        best = (m, cg, rg, cc, rc);
                    }
                }
            }
        }
    }
    // pattern search refinement
    let (mut m, mut x) = (best.0, [best.1, best.2, best.3, best.4]);
    let mut step = span / g as Real;
    while step > 1e-7 * span {
        let mut improved = false;
        for k in 0..4 {
            for sgn in [-1.0, 1.0] {
                let mut y = x;
                y[k] += sgn * step;
                if y[1] <= 0.0 || y[3] <= 0.0 {
                    continue;
                }
                let my = nested_margin(y[0], y[1], y[2], y[3], q, gamma, c);
                if my > m {
                    m = my;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    if m < required_margin {
        return Err(ContourError::Placement(format!(
            "best achievable separation ratio {m:.4} is below the required {required_margin}"
        )));
    }
    Ok(NestedCircles { gamma_center: x[0], gamma_radius: x[1], c_center: x[2], c_radius: x[3], margin: m })
}

/// Required separation ratio for automatically placed contours.
pub const PLACEMENT_MARGIN: Real = 1.05;

/// Contours for the six-vertex identity: `Γ_V ∋ 0, qκβ2`, `Γ_V ∌ -qκ, qβ1`;
/// `C_V ∋ 0, -q, qκβ2`, `C_V ⊃ Γ_V`, `C_V ∌ qβ1`, `C_V ⊂ q^{-1}Γ_V`.
pub fn place_contours_vertex(p: &SixVertexParams) -> Result<NestedCircles, ContourError> {
    if p.kappa * p.beta2 >= p.beta1 {
        return Err(ContourError::Placement(format!(
            "kappa*beta2 = {} must be < beta1 = {}",
            p.kappa * p.beta2,
            p.beta1
        )));
    }
    let (q, k) = (p.q, p.kappa);
    let r = |x: Real| Cplx::new(x, 0.0);
    let gamma = ContourPlacement {
        inside: vec![r(0.0), r(q * k * p.beta2)],
        outside: vec![r(-q * k), r(q * p.beta1)],
        margin: PLACEMENT_MARGIN,
    };
    let c = ContourPlacement {
        inside: vec![r(0.0), r(-q), r(q * k * p.beta2)],
        outside: vec![r(q * p.beta1)],
        margin: PLACEMENT_MARGIN,
    };
    place_nested_circles(q, &gamma, &c, PLACEMENT_MARGIN)
}

/// Contours for the ASEP identity: as [`place_contours_vertex`] with `κ = 1`.
pub fn place_contours_asep(p: &AsepParams) -> Result<NestedCircles, ContourError> {
    let (b1, b2) = p.betas();
    if !(p.q > 0.0 && b2 < b1) {
        return Err(ContourError::Placement("need q > 0 and b2 < b1".into()));
    }
    let q = p.q;
    let r = |x: Real| Cplx::new(x, 0.0);
    let gamma = ContourPlacement { inside: vec![r(0.0), r(q * b2)], outside: vec![r(-q), r(q * b1)], margin: PLACEMENT_MARGIN };
    let c = ContourPlacement { inside: vec![r(0.0), r(-q), r(q * b2)], outside: vec![r(q * b1)], margin: PLACEMENT_MARGIN };
    place_nested_circles(q, &gamma, &c, PLACEMENT_MARGIN)
}

// ---------------------------------------------------------------------------
// The functions g_V, g_A
// ---------------------------------------------------------------------------

/// The meromorphic functions entering the kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GFunction {
    /// `g_V(z) = (z/κ + q)^x (qβ2κ/z; q)_∞ / ((z + q)^t (z/(qβ1); q)_∞)`.
    SixVertex {
        /// `q`.
        q: Real,
        /// `κ`.
        kappa: Real,
        /// `β1`.
        beta1: Real,
        /// `β2`.
        beta2: Real,
        /// Column.
        x: i32,
        /// Row.
        t: i32,
    },
    /// `g_A(z) = (z + q)^x exp(tq(R - L)/(z + q)) (qβ2/z; q)_∞ / (z/(qβ1); q)_∞`.
    Asep {
        /// `q = L/R`.
        q: Real,
        /// `R - L`.
        drift: Real,
        /// `β1`.
        beta1: Real,
        /// `β2`.
        beta2: Real,
        /// Site.
        x: i32,
        /// Time.
        t: Real,
    },
}

impl GFunction {
    /// `g_V` for the six-vertex model at `(x, t)`.
    pub fn six_vertex(p: &SixVertexParams, x: i32, t: i32) -> Self {
        Self::SixVertex { q: p.q, kappa: p.kappa, beta1: p.beta1, beta2: p.beta2, x, t }
    }

    /// `g_A` for the ASEP at `(x, T)`.
    pub fn asep(p: &AsepParams, x: i32, t: Real) -> Self {
        let (beta1, beta2) = p.betas();
        Self::Asep { q: p.q, drift: p.r - p.l, beta1, beta2, x, t }
    }

    /// The base `q`.
    pub fn q(&self) -> Real {
        match self {
            Self::SixVertex { q, .. } | Self::Asep { q, .. } => *q,
        }
    }

    /// `g(z)`.
    pub fn eval(&self, z: Cplx) -> Cplx {
        match *self {
            Self::SixVertex { q, kappa, beta1, beta2, x, t } => {
                let qp = QParam::new(q).expect("validated q");
                let num = (z / kappa + q).powi(x) * poch_inf(q * beta2 * kappa / z, qp);
                num / ((z + q).powi(t) * poch_inf(z / (q * beta1), qp))
            }
            Self::Asep { q, drift, beta1, beta2, x, t } => {
                let qp = QParam::new(q).expect("validated q");
                (z + q).powi(x) * (t * q * drift / (z + q)).exp() * poch_inf(q * beta2 / z, qp) / poch_inf(z / (q * beta1), qp)
            }
        }
    }

    /// `f(z) = g(z) / g(qz)` in closed form.
    pub fn f_ratio(&self, z: Cplx) -> Cplx {
        match *self {
            Self::SixVertex { q, kappa, beta1, beta2, x, t } => {
                ((1.0 + z / (q * kappa)) / (1.0 + z / kappa)).powi(x) * ((1.0 + z) / (1.0 + z / q)).powi(t)
                    / (1.0 - kappa * beta2 / z)
                    / (1.0 - z / (q * beta1))
            }
            Self::Asep { q, drift, beta1, beta2, x, t } => {
                ((z + q) / (q * z + q)).powi(x) * (t * q * drift * (1.0 / (z + q) - 1.0 / (q * z + q))).exp()
                    / (1.0 - beta2 / z)
                    / (1.0 - z / (q * beta1))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Angle of the branch cut of the logarithm used in the kernels.
pub const LOG_CUT_ANGLE: Real = -PI / 2.0 + 0.1;

/// Logarithm with the branch cut along `arg z = LOG_CUT_ANGLE`, i.e. with
/// argument in `(LOG_CUT_ANGLE, LOG_CUT_ANGLE + 2π]`.
pub fn log_rotated(z: Cplx) -> Cplx {
    let mut a = z.arg();
    while a <= LOG_CUT_ANGLE {
        a += 2.0 * PI;
    }
    while a > LOG_CUT_ANGLE + 2.0 * PI {
        a -= 2.0 * PI;
    }
    Cplx::new(z.norm().ln(), a)
}

/// `1 / sin(z)`, evaluated without overflow for large `|Im z|`.
pub fn inv_sin(z: Cplx) -> Cplx {
    if z.im >= 0.0 {
        // 1/sin z = 2i e^{iz} / (e^{2iz} - 1)
        let e = (I * z).exp();
        2.0 * I * e / (e * e - 1.0)
    } else {
        let e = (-I * z).exp();
        -2.0 * I * e / (e * e - 1.0)
    }
}

/// Maximal `|j|` in the kernel `j`-sums.
pub const J_SUM_MAX: i32 = 30;

/// `Σ_j 1/sin((π/log q)(log v - log w + 2πij))`, summed outward from `j = 0`
/// until the terms fall below `1e-17` relative (at most `|j| ≤ 30`).
pub fn j_sum(lv_minus_lw: Cplx, q: Real) -> Cplx {
    let lq = q.ln();
    let a = PI / lq;
    let mut s = inv_sin(a * lv_minus_lw);
    for j in 1..=J_SUM_MAX {
        let tp = inv_sin(a * (lv_minus_lw + TWO_PI_I * j as Real));
        let tm = inv_sin(a * (lv_minus_lw - TWO_PI_I * j as Real));
        s += tp + tm;
        if tp.norm() + tm.norm() <= 1e-17 * s.norm() {
            break;
        }
    }
    s
}

/// The kernel `V_ζ(w, w')` (or `A_ζ` for [`GFunction::Asep`]) with
/// `ζ = -q^p`, integrating `v` over `gamma`.
pub fn kernel_v(w: Cplx, wp: Cplx, g: &GFunction, p: Real, gamma: &Contour) -> Cplx {
    let q = g.q();
    let lw = log_rotated(w);
    let gw = g.eval(w);
    let mut s = Cplx::new(0.0, 0.0);
    for (v, dv) in gamma.nodes.iter().zip(&gamma.weights) {
        let lv = log_rotated(*v);
        let pw = ((p - 1.0) * lv - p * lw).exp();
        s += pw * j_sum(lv - lw, q) * gw / g.eval(*v) * dv / (wp - v);
    }
    s / (2.0 * I * q.ln())
}

/// Default D-contour parameters `(R, d, δ, im_cutoff)`.
pub const D_DEFAULT: (Real, Real, Real, Real) = (2.0, 0.5, 0.5, 12.0);

/// The D-contour kernel
/// `K_ζ(w, w') = (1/2i) ∫_D g(w)/g(q^r w) (-ζ)^r dr / (sin(πr)(q^r w - w'))`.
pub fn kernel_d(w: Cplx, wp: Cplx, g: &GFunction, zeta: Cplx, d: &Contour) -> Cplx {
    let q = g.q();
    let lz = (-zeta).ln();
    let gw = g.eval(w);
    let mut s = Cplx::new(0.0, 0.0);
    for (r, dr) in d.nodes.iter().zip(&d.weights) {
        let qr = (r * q.ln()).exp();
        s += gw / g.eval(qr * w) * (r * lz).exp() * inv_sin(PI * r) / (qr * w - wp) * dr;
    }
    s / (2.0 * I)
}

/// A kernel sampled on the nodes of a contour (`values[(i, j)] = K(z_i, z_j)`).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    /// The contour whose nodes index the matrix.
    pub contour: Contour,
    /// Kernel values at node pairs.
    pub values: DMatrix<Cplx>,
}

impl KernelMatrix {
    /// The Nyström matrix `K(z_i, z_j) w_j / (2πi)`.
    pub fn nystrom(&self) -> DMatrix<Cplx> {
        let mut m = self.values.clone();
        for (j, w) in self.contour.weights.iter().enumerate() {
            let s = w / TWO_PI_I;
            m.column_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        m
    }
}

/// Samples `V_ζ` (or `A_ζ`) on `c × c`, integrating over `gamma`, using the
/// factorisation `V(w_i, w_k) = Σ_l A[i, l] / (w_k - v_l)`.
pub fn kernel_v_matrix(g: &GFunction, p: Real, gamma: &Contour, c: &Contour) -> KernelMatrix {
    let q = g.q();
    let (nw, nv) = (c.len(), gamma.len());
    let lq2i = 2.0 * I * q.ln();
    let gv: Vec<Cplx> = gamma.nodes.iter().map(|v| g.eval(*v)).collect();
    let lv: Vec<Cplx> = gamma.nodes.iter().map(|v| log_rotated(*v)).collect();
    let rows: Vec<Vec<Cplx>> = c
        .nodes
        .par_iter()
        .map(|w| {
            let lw = log_rotated(*w);
            let gw = g.eval(*w);
            (0..nv)
                .map(|l| {
                    let pw = ((p - 1.0) * lv[l] - p * lw).exp();
                    pw * j_sum(lv[l] - lw, q) * gw / gv[l] * gamma.weights[l] / lq2i
                })
                .collect()
        })
        .collect();
    let a = DMatrix::from_fn(nw, nv, |i, l| rows[i][l]);
    let b = DMatrix::from_fn(nv, nw, |l, k| 1.0 / (c.nodes[k] - gamma.nodes[l]));
    KernelMatrix { contour: c.clone(), values: complex_matmul(&a, &b) }
}

/// Complex matrix product `a · b` through the blocked `zgemm` kernel of
/// `matrixmultiply` (the generic nalgebra product is several times slower for
/// complex entries).
pub fn complex_matmul(a: &DMatrix<Cplx>, b: &DMatrix<Cplx>) -> DMatrix<Cplx> {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = DMatrix::<Cplx>::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: `Complex<f64>` is `#[repr(C)]` with fields `re, im`, so it has
    // the layout of `[f64; 2]`; the matrices are dense column-major with the
    // stated dimensions, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// Samples the D-contour kernel on `c × c`.
pub fn kernel_d_matrix(g: &GFunction, zeta: Cplx, d: &Contour, c: &Contour) -> KernelMatrix {
    let q = g.q();
    let lz = (-zeta).ln();
    let nw = c.len();
    let qr: Vec<Cplx> = d.nodes.iter().map(|r| (r * q.ln()).exp()).collect();
    let pref: Vec<Cplx> = d
        .nodes
        .iter()
        .zip(&d.weights)
        .map(|(r, dr)| (r * lz).exp() * inv_sin(PI * r) * dr / (2.0 * I))
        .collect();
    let rows: Vec<Vec<Cplx>> = c
        .nodes
        .par_iter()
        .map(|w| {
            let gw = g.eval(*w);
            let a: Vec<Cplx> = (0..qr.len()).map(|l| gw / g.eval(qr[l] * w) * pref[l]).collect();
            c.nodes
                .iter()
                .map(|wp| (0..qr.len()).map(|l| a[l] / (qr[l] * w - wp)).sum())
                .collect()
        })
        .collect();
    KernelMatrix { contour: c.clone(), values: DMatrix::from_fn(nw, nw, |i, k| rows[i][k]) }
}

// ---------------------------------------------------------------------------
// Fredholm determinants
// ---------------------------------------------------------------------------

/// A reported determinant value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantRecord {
    /// Method used (`"nystrom"` or `"series"`).
    pub method: String,
    /// Determinant value.
    pub value: Cplx,
    /// Number of quadrature nodes on the integration contour.
    pub nodes: usize,
    /// Difference to the previous refinement level (Nyström) or size of the
    /// last series term (series).
    pub error_estimate: Real,
}

/// `det(Id + K)` of a sampled kernel by LU factorisation of the Nyström
/// matrix.
pub fn nystrom_det(k: &KernelMatrix) -> Cplx {
    let n = k.values.nrows();
    (DMatrix::identity(n, n) + k.nystrom()).determinant()
}

/// Nyström determinant with resolution doubling (starting at the resolution
/// of `c`) until successive values agree to `tol`; `builder` samples the
/// kernel on a given contour.
pub fn fredholm_det_nystrom<B>(builder: B, c: &Contour, tol: Real, max_n: usize) -> Result<DeterminantRecord, ContourError>
where
    B: Fn(&Contour) -> KernelMatrix,
{
    let mut cur = c.clone();
    let mut prev = nystrom_det(&builder(&cur));
    loop {
        if 2 * cur.n > max_n {
            return Err(ContourError::NotConverged(prev, prev));
        }
        cur = cur.refine();
        let next = nystrom_det(&builder(&cur));
        if !next.re.is_finite() || !next.im.is_finite() {
            return Err(ContourError::Singular("non-finite determinant".into()));
        }
        let err = (next - prev).norm();
        if err <= tol * next.norm().max(1.0) {
            return Ok(DeterminantRecord { method: "nystrom".into(), value: next, nodes: cur.len(), error_estimate: err });
        }
        prev = next;
    }
}

/// `1 + Σ_{k≥1} (1/((2πi)^k k!)) ∮…∮ det[K(z_i, z_j)] dz_1…dz_k` under the
/// quadrature of the kernel's contour.
///
/// The tensorised `k`-fold quadrature of the `k`-th term equals the `k`-th
/// elementary symmetric function of the eigenvalues of the Nyström matrix,
/// computed here from the power traces `tr(M^m)` by Newton's identities. The
/// series stops once `|term_k| < tol · |partial sum|`.
pub fn fredholm_det_series(k: &KernelMatrix, k_max: usize, tol: Real) -> Result<DeterminantRecord, ContourError> {
    let m = k.nystrom();
    let mut power = m.clone();
    let mut traces = vec![Cplx::new(0.0, 0.0); k_max + 1];
    let mut e = vec![Cplx::new(1.0, 0.0)];
    let mut sum = Cplx::new(1.0, 0.0);
    let mut growth = 0;
    let mut last = Real::INFINITY;
    for kk in 1..=k_max {
        traces[kk] = power.trace();
        if kk < k_max {
            power = complex_matmul(&power, &m);
        }
        let mut ek = Cplx::new(0.0, 0.0);
        for i in 1..=kk {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            ek += e[kk - i] * traces[i] * sign;
        }
        ek /= kk as Real;
        e.push(ek);
        sum += ek;
        let mag = ek.norm();
        if mag <= tol * sum.norm() {
            return Ok(DeterminantRecord { method: "series".into(), value: sum, nodes: m.nrows(), error_estimate: mag });
        }
        if mag > last {
            growth += 1;
            if growth >= 3 {
                return Err(ContourError::Divergent(format!("term {kk} has magnitude {mag}")));
            }
        }
        last = mag;
    }
    Err(ContourError::Divergent(format!("no convergence within {k_max} terms (last term {last})")))
}

/// Kernel sampler for `V_ζ` / `A_ζ` whose `Γ` resolution follows that of `C`.
pub fn v_builder<'a>(g: &'a GFunction, p: Real, circles: &'a NestedCircles) -> impl Fn(&Contour) -> KernelMatrix + 'a {
    move |c: &Contour| {
        let (gamma, _) = circles.contours(c.n);
        kernel_v_matrix(g, p, &gamma, c)
    }
}

/// `det(Id + V_ζ)` (or `det(Id + A_ζ)`) on automatically refined contours.
pub fn fredholm_v(g: &GFunction, p: Real, circles: &NestedCircles, n0: usize, tol: Real) -> Result<DeterminantRecord, ContourError> {
    let (_, c) = circles.contours(n0);
    fredholm_det_nystrom(v_builder(g, p, circles), &c, tol, 1024)
}

// ---------------------------------------------------------------------------
// Nested q-moment integrals
// ---------------------------------------------------------------------------

/// Parameters of the nested q-moment integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QMomentParams {
    /// `q`.
    pub q: Real,
    /// `κ`.
    pub kappa: Real,
    /// `β1`.
    pub beta1: Real,
    /// `β2` (may be negative).
    pub beta2: Real,
    /// `ϑ`.
    pub theta: Real,
}

impl QMomentParams {
    /// From six-vertex parameters and `ϑ = q^{-J}`.
    pub fn from_vertex(p: &SixVertexParams, j: u32) -> Self {
        Self { q: p.q, kappa: p.kappa, beta1: p.beta1, beta2: p.beta2, theta: p.q.powi(-(j as i32)) }
    }

    /// The integrand factor
    /// `((1+y)/(1+y/q))^t ((1+y/(qκ))/(1+y/κ))^x (1 - ϑκβ2/y)/(1 - κβ2/y)/(1 - y/(qβ1))`.
    pub fn f(&self, y: Cplx, x: i32, t: i32) -> Cplx {
        let (q, k) = (self.q, self.kappa);
        ((1.0 + y) / (1.0 + y / q)).powi(t) * ((1.0 + y / (q * k)) / (1.0 + y / k)).powi(x) / (1.0 - y / (q * self.beta1))
            * (1.0 - self.theta * k * self.beta2 / y)
            / (1.0 - k * self.beta2 / y)
    }
}

/// The contours `γ_1, …, γ_k` of the nested integral: each is the union of a
/// circle of radius `r_* = q(1-q)/(2(1+q))` around `-q` and a circle around
/// `0` of radius `r_i`, with `r_1 = 1.3|κβ2|` and `r_{i+1} = 1.15 r_i / q`.
pub fn q_moment_contours(p: &QMomentParams, k: usize, n: usize) -> Result<Vec<Contour>, ContourError> {
    let q = p.q;
    let r_small = 0.5 * q * (1.0 - q) / (1.0 + q);
    let a = (p.kappa * p.beta2).abs();
    let mut r = (1.3 * a).max(1e-3);
    let lim = (q * q - q * r_small).min(q * p.beta1 / 1.05).min(p.kappa / 1.05);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        if r >= lim {
            return Err(ContourError::Placement(format!("nested radius {r} exceeds the admissible bound {lim}")));
        }
        out.push(Contour::new(
            ContourKind::Union(vec![
                ContourKind::Circle { center: Cplx::new(-q, 0.0), radius: r_small, half_offset: false },
                ContourKind::Circle { center: Cplx::new(0.0, 0.0), radius: r, half_offset: false },
            ]),
            n,
        ));
        r = r / q * 1.15;
    }
    Ok(out)
}

/// `(q^{C(k,2)}/(2πi)^k) ∮…∮ ∏_{i<j} (y_i - y_j)/(y_i - q y_j) ∏_i f(y_i) dy_i/y_i`
/// with `y_i ∈ γ_i`, by tensor quadrature (`k ≤ 3`).
pub fn nested_integral<F: Fn(Cplx) -> Cplx>(f: F, q: Real, contours: &[Contour]) -> Result<Cplx, ContourError> {
    let k = contours.len();
    if k == 0 {
        return Ok(Cplx::new(1.0, 0.0));
    }
    if k > 3 {
        return Err(ContourError::Invalid("nested integrals are implemented for k <= 3".into()));
    }
    let vals: Vec<Vec<Cplx>> = contours
        .iter()
        .map(|c| c.nodes.iter().zip(&c.weights).map(|(y, w)| f(*y) / y * w).collect())
        .collect();
    let cross = |a: usize, b: usize| -> DMatrix<Cplx> {
        let (ca, cb) = (&contours[a], &contours[b]);
        DMatrix::from_fn(ca.len(), cb.len(), |i, j| {
            let (yi, yj) = (ca.nodes[i], cb.nodes[j]);
            (yi - yj) / (yi - q * yj)
        })
    };
    let total = match k {
        1 => vals[0].iter().sum(),
        2 => {
            let c12 = cross(0, 1);
            let v1 = DVector::from_vec(vals[0].clone());
            let v2 = DVector::from_vec(vals[1].clone());
            (v1.transpose() * c12 * v2)[(0, 0)]
        }
        _ => {
            let (c12, c13, c23) = (cross(0, 1), cross(0, 2), cross(1, 2));
            let n1 = vals[0].len();
            (0..n1)
                .into_par_iter()
                .map(|i| {
                    let mut s = Cplx::new(0.0, 0.0);
                    for (j, vj) in vals[1].iter().enumerate() {
                        let a = vals[0][i] * vj * c12[(i, j)];
                        let mut inner = Cplx::new(0.0, 0.0);
                        for (l, vl) in vals[2].iter().enumerate() {
                            inner += vl * c13[(i, l)] * c23[(j, l)];
                        }
                        s += a * inner;
                    }
                    s
                })
                .sum()
        }
    };
    let pref = q.powi((k * (k - 1) / 2) as i32) / TWO_PI_I.powi(k as i32);
    Ok(total * pref)
}

/// The nested contour integral for `E`-weighted q-moments: the integrand
/// `f` of [`QMomentParams::f`] at column exponent `x` and row exponent `t`.
pub fn q_moment_integral(p: &QMomentParams, x: i32, t: i32, k: usize, n: usize) -> Result<Cplx, ContourError> {
    let contours = q_moment_contours(p, k, n)?;
    nested_integral(|y| p.f(y, x, t), p.q, &contours)
}

// ---------------------------------------------------------------------------
// Partition sums and the generating series
// ---------------------------------------------------------------------------

/// All partitions of `k` (parts in nonincreasing order).
pub fn partitions(k: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=rem.min(max)).rev() {
            cur.push(p);
            rec(rem - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

fn small_det(mut a: Vec<Vec<Cplx>>) -> Cplx {
    let n = a.len();
    let mut det = Cplx::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).expect("finite")).expect("nonempty");
        if a[piv][col].norm() == 0.0 {
            return Cplx::new(0.0, 0.0);
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let fct = a[r][col] / a[col][col];
            for c2 in col..n {
                let v = a[col][c2];
                a[r][c2] -= fct * v;
            }
        }
    }
    det
}

/// `F_n(w) = ∏_{j<n} f(q^j w)` for `n = 0..=n_max` at every node.
fn f_products<F: Fn(Cplx) -> Cplx>(f: &F, q: Real, nodes: &[Cplx], n_max: usize) -> Vec<Vec<Cplx>> {
    nodes
        .iter()
        .map(|w| {
            let mut out = Vec::with_capacity(n_max + 1);
            let mut acc = Cplx::new(1.0, 0.0);
            out.push(acc);
            for j in 0..n_max {
                acc *= f(w * q.powi(j as i32));
                out.push(acc);
            }
            out
        })
        .collect()
}

/// The partition-sum form of the `k`-th moment:
/// `(q;q)_k Σ_{|λ|=k} 1/((2πi)^ℓ ∏ m_j!) ∮…∮ det[1/(w_i - q^{λ_j} w_j)] ∏ dw_i ∏_{j<λ_i} f(q^j w_i)`,
/// all `w_i` on `c`, by direct tensor quadrature (`k ≤ 4`).
pub fn moment_via_partitions<F: Fn(Cplx) -> Cplx>(f: F, q: Real, c: &Contour, k: usize) -> Result<Cplx, ContourError> {
    if k == 0 {
        return Ok(Cplx::new(1.0, 0.0));
    }
    if k > 4 {
        return Err(ContourError::Invalid("direct partition sums are limited to k <= 4".into()));
    }
    let fp = f_products(&f, q, &c.nodes, k);
    let n = c.len();
    let mut total = Cplx::new(0.0, 0.0);
    for lam in partitions(k) {
        let l = lam.len();
        let mut mult = 1.0;
        let mut run = 1usize;
        for i in 1..=l {
            if i < l && lam[i] == lam[i - 1] {
                run += 1;
            } else {
                mult *= (1..=run).product::<usize>() as Real;
                run = 1;
            }
        }
        let mut idx = vec![0usize; l];
        let mut s = Cplx::new(0.0, 0.0);
        'outer: loop {
            let ws: Vec<Cplx> = idx.iter().map(|&i| c.nodes[i]).collect();
            let m: Vec<Vec<Cplx>> = (0..l)
                .map(|i| (0..l).map(|j| 1.0 / (ws[i] - q.powi(lam[j] as i32) * ws[j])).collect())
                .collect();
            let mut term = small_det(m);
            for (i, &ii) in idx.iter().enumerate() {
                term *= fp[ii][lam[i]] * c.weights[ii];
            }
            s += term;
            for d in 0..l {
                idx[d] += 1;
                if idx[d] < n {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
        total += s / (TWO_PI_I.powi(l as i32) * mult);
    }
    Ok(total * poch_finite_re(q, q, k))
}

/// Moments `m_0, …, m_K` of the partition-sum form for all `k ≤ K` at once.
///
/// The partition sum is the Taylor expansion in `ζ` of `det(Id + Σ_n ζ^n A_n)`
/// with `(A_n)_{ij} = F_n(w_j)/(w_i - q^n w_j) · dw_j/(2πi)`; its coefficients
/// `c_k` satisfy `m_k = (q;q)_k c_k`. They are computed from
/// `log det(Id + P) = Σ_m (-1)^{m+1} tr(P^m)/m` with truncated
/// matrix-polynomial powers, followed by series exponentiation.
pub fn moments_via_partitions_series<F: Fn(Cplx) -> Cplx>(f: F, q: Real, c: &Contour, k_max: usize) -> Vec<Cplx> {
    let n = c.len();
    let fp = f_products(&f, q, &c.nodes, k_max);
    let a: Vec<DMatrix<Cplx>> = (0..=k_max)
        .map(|deg| {
            if deg == 0 {
                DMatrix::zeros(n, n)
            } else {
                let qn = q.powi(deg as i32);
                DMatrix::from_fn(n, n, |i, j| fp[j][deg] / (c.nodes[i] - qn * c.nodes[j]) * c.weights[j] / TWO_PI_I)
            }
        })
        .collect();
    // log-det coefficients
    let mut logc = vec![Cplx::new(0.0, 0.0); k_max + 1];
    let mut power: Vec<DMatrix<Cplx>> = a.clone(); // P^1
    for m in 1..=k_max {
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        for deg in m..=k_max {
            logc[deg] += power[deg].trace() * (sign / m as Real);
        }
        if m == k_max {
            break;
        }
        let mut next = vec![DMatrix::zeros(n, n); k_max + 1];
        for (deg, slot) in next.iter_mut().enumerate().skip(m + 1) {
            let mut acc = DMatrix::zeros(n, n);
            for b in 1..=(deg - m) {
                let lo = deg - b;
                if lo >= m {
                    acc += &power[lo] * &a[b];
                }
            }
            *slot = acc;
        }
        power = next;
    }
    // exponentiate: k c_k = Σ_{j=1}^k j L_j c_{k-j}
    let mut coef = vec![Cplx::new(0.0, 0.0); k_max + 1];
    coef[0] = Cplx::new(1.0, 0.0);
    for k in 1..=k_max {
        let mut s = Cplx::new(0.0, 0.0);
        for j in 1..=k {
            s += logc[j] * coef[k - j] * j as Real;
        }
        coef[k] = s / k as Real;
    }
    coef.iter().enumerate().map(|(k, ck)| ck * poch_finite_re(q, q, k)).collect()
}

/// Both sides of the generating-series identity
/// `Σ_k m_k ζ^k/(q;q)_k = det(Id + K_ζ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingSeriesCheck {
    /// Left side (moment series).
    pub lhs: Cplx,
    /// Right side (D-contour Fredholm determinant).
    pub rhs: Cplx,
    /// Change of the left side when the series is truncated two orders
    /// earlier.
    pub lhs_tail: Real,
    /// The moments `m_k`.
    pub moments: Vec<Cplx>,
}

/// Evaluates both sides of the generating-series identity for `g` on `c`.
pub fn generating_series_check(
    g: &GFunction,
    c: &Contour,
    zeta: Cplx,
    k_max: usize,
    d: &Contour,
) -> Result<GeneratingSeriesCheck, ContourError> {
    if zeta.im == 0.0 && zeta.re > 0.0 {
        return Err(ContourError::Invalid("zeta must be off the nonnegative real axis".into()));
    }
    let q = g.q();
    let moments = moments_via_partitions_series(|z| g.f_ratio(z), q, c, k_max);
    let series = |kk: usize| -> Cplx {
        (0..=kk).map(|k| moments[k] * zeta.powi(k as i32) / poch_finite_re(q, q, k)).sum()
    };
    let lhs = series(k_max);
    let lhs_tail = (lhs - series(k_max.saturating_sub(2))).norm();
    let rhs = nystrom_det(&kernel_d_matrix(g, zeta, d, c));
    Ok(GeneratingSeriesCheck { lhs, rhs, lhs_tail, moments })
}
