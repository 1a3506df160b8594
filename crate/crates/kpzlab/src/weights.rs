//! Signatures, the double-sided boundary weights `W`, `Ŵ`, `𝒲_x`, `𝒲̄^(M)`,
//! and the principal specializations of the inhomogeneous symmetric rational
//! functions `F_λ`, `G_λ` together with a brute-force path-ensemble oracle.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qseries::{poch_finite_re, poch_inf_re, QParam};
use crate::{Cplx, Real};

/// Errors from the weight evaluators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    /// Parts are not nonincreasing.
    #[error("signature parts must be nonincreasing: {0:?}")]
    NotSignature(Vec<u32>),
    /// A denominator of a product formula vanished.
    #[error("singular product formula: {0}")]
    Singular(String),
    /// Brute-force enumeration requested beyond its size limits.
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    /// Bad parameters.
    #[error("bad parameters: {0}")]
    Params(String),
}

/// A nonnegative signature `λ_1 ≥ λ_2 ≥ … ≥ λ_n ≥ 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    parts: Vec<u32>,
}

impl Signature {
    /// Validates that `parts` is nonincreasing.
    pub fn new(parts: Vec<u32>) -> Result<Self, WeightError> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(WeightError::NotSignature(parts));
        }
        Ok(Self { parts })
    }

    /// Builds a signature from parts in any order.
    pub fn from_unsorted(mut parts: Vec<u32>) -> Self {
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self { parts }
    }

    /// The empty signature.
    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    /// The parts, largest first.
    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// Length `ℓ(λ)` (number of parts, zeros included).
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    /// Whether there are no parts.
    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// `|λ|`.
    pub fn size(&self) -> u64 {
        self.parts.iter().map(|&p| p as u64).sum()
    }

    /// Largest part (0 for the empty signature).
    pub fn first(&self) -> u32 {
        self.parts.first().copied().unwrap_or(0)
    }

    /// Multiplicity `m_j(λ)`.
    pub fn multiplicity(&self, j: u32) -> usize {
        self.parts.iter().filter(|&&p| p == j).count()
    }

    /// `e_i(λ)`: the number of parts strictly greater than `i`.
    pub fn e(&self, i: u32) -> usize {
        self.parts.iter().filter(|&&p| p > i).count()
    }

    /// Whether some part equals zero.
    pub fn contains_zero(&self) -> bool {
        self.parts.last() == Some(&0)
    }
}

/// All signatures of length `n` with parts in `[min_part, max_part]`.
pub fn signatures(n: usize, min_part: u32, max_part: u32) -> Vec<Signature> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(n: usize, lo: u32, hi: u32, cur: &mut Vec<u32>, out: &mut Vec<Signature>) {
        if cur.len() == n {
            out.push(Signature { parts: cur.clone() });
            return;
        }
        for p in (lo..=hi).rev() {
            cur.push(p);
            rec(n, lo, p, cur, out);
            cur.pop();
        }
    }
    if min_part <= max_part || n == 0 {
        rec(n, min_part, max_part, &mut cur, &mut out);
    }
    out
}

/// Parameters of the boundary weights and of the specialization that
/// reproduces them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecializationParams {
    /// `q = delta1 / delta2`.
    pub q: Real,
    /// `kappa = (1 - delta1) / (1 - delta2)`.
    pub kappa: Real,
    /// Density on the y-axis.
    pub b1: Real,
    /// Density on the x-axis (may be continued to negative values).
    pub b2: Real,
    /// The deformation parameter `ϑ`.
    pub theta: Real,
    /// When set, `theta = q^{-J}` exactly.
    pub j: Option<u32>,
}

impl SpecializationParams {
    /// Parameters with a free `theta`.
    pub fn new(q: Real, kappa: Real, b1: Real, b2: Real, theta: Real) -> Self {
        Self { q, kappa, b1, b2, theta, j: None }
    }

    /// Parameters with `theta = q^{-J}`.
    pub fn with_j(q: Real, kappa: Real, b1: Real, b2: Real, j: u32) -> Self {
        Self { q, kappa, b1, b2, theta: q.powi(-(j as i32)), j: Some(j) }
    }

    /// `b1 / (1 - b1)`.
    pub fn beta1(&self) -> Real {
        self.b1 / (1.0 - self.b1)
    }

    /// `b2 / (1 - b2)`.
    pub fn beta2(&self) -> Real {
        self.b2 / (1.0 - self.b2)
    }

    /// `omega = kappa beta2 / beta1`.
    pub fn omega(&self) -> Real {
        self.kappa * self.beta2() / self.beta1()
    }

    /// `s = q^{-1/2}`.
    pub fn s(&self) -> Real {
        self.q.powf(-0.5)
    }

    /// `u = kappa s`.
    pub fn u(&self) -> Real {
        self.kappa * self.s()
    }

    /// `v = -1 / (beta2 s)`.
    pub fn v(&self) -> Real {
        -1.0 / (self.beta2() * self.s())
    }

    /// `xi = -beta1 / (a u)` for the deformation parameter `a`.
    pub fn xi(&self, a: Real) -> Real {
        -self.beta1() / (a * self.u())
    }

    fn qparam(&self) -> Result<QParam, WeightError> {
        QParam::new(self.q).map_err(|e| WeightError::Params(e.to_string()))
    }
}

/// `W(j; i)`: `1 - b2 + q^j ϑ b2` for `i = 0`, `b2 - q^j ϑ b2` for `i = 1`,
/// and `0` for `i ≥ 2`.
pub fn weight_w(j: u64, i: usize, theta: Real, q: Real, b2: Real) -> Real {
    let qj = q.powi(j.min(i32::MAX as u64) as i32);
    match i {
        0 => 1.0 - b2 + qj * theta * b2,
        1 => b2 - qj * theta * b2,
        _ => 0.0,
    }
}

/// `Ŵ(m) = (ω;q)_∞/(ϑω;q)_∞ · ω^m (ϑ;q)_m/(q;q)_m` with `ω = κβ2/β1`.
pub fn weight_w_hat(m: usize, p: &SpecializationParams) -> Result<Real, WeightError> {
    let qp = p.qparam()?;
    let om = p.omega();
    let den = poch_inf_re(p.theta * om, qp);
    if den == 0.0 {
        return Err(WeightError::Singular("(theta omega; q)_inf = 0".into()));
    }
    Ok(poch_inf_re(om, qp) / den * om.powi(m as i32) * poch_finite_re(p.theta, p.q, m) / poch_finite_re(p.q, p.q, m))
}

/// `𝒲_x(λ) = 1{0 ∉ λ} 1{λ_1 ≤ x} Ŵ(m_1) ∏_{j=2}^x W(Σ_{i<j} m_i; m_j)`.
pub fn weight_script_w(lambda: &Signature, x: u32, p: &SpecializationParams) -> Result<Real, WeightError> {
    if lambda.contains_zero() || lambda.first() > x {
        return Ok(0.0);
    }
    let m1 = lambda.multiplicity(1);
    Ok(weight_w_hat(m1, p)? * column_product(lambda, x, m1 as u64, p))
}

/// `𝒲̄^(M)(λ) = 1{0 ∉ λ} 1{λ_1 ≤ x} ∏_{j=2}^x W(M + Σ_{i=2}^{j-1} m_i; m_j)`.
pub fn weight_w_bar(lambda: &Signature, x: u32, m: u64, p: &SpecializationParams) -> Real {
    if lambda.contains_zero() || lambda.first() > x {
        return 0.0;
    }
    column_product(lambda, x, m, p)
}

fn column_product(lambda: &Signature, x: u32, start: u64, p: &SpecializationParams) -> Real {
    let mut acc = start;
    let mut r = 1.0;
    for j in 2..=x {
        let mj = lambda.multiplicity(j);
        r *= weight_w(acc, mj, p.theta, p.q, p.b2);
        acc += mj as u64;
    }
    r
}

/// A parameter sequence `(z_0, z_1, z_2, …)` given by explicit leading
/// values followed by a constant tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    /// `z_0, …, z_{k-1}`.
    pub head: Vec<Cplx>,
    /// `z_i` for `i ≥ k`.
    pub tail: Cplx,
}

impl Sequence {
    /// Constant sequence.
    pub fn constant(z: Cplx) -> Self {
        Self { head: Vec::new(), tail: z }
    }

    /// Element `i`.
    pub fn get(&self, i: usize) -> Cplx {
        self.head.get(i).copied().unwrap_or(self.tail)
    }
}

fn nonzero(d: Cplx, what: &str) -> Result<Cplx, WeightError> {
    if d.norm() < 1e-300 {
        Err(WeightError::Singular(what.into()))
    } else {
        Ok(d)
    }
}

/// `F_λ(u, qu, …, q^{J-1}u | Ξ, S)` by the closed product formula
/// `(q;q)_J ∏_k (1 - s_{λ_k} ξ_{λ_k} q^{k-1} u)^{-1}
///  ∏_{h<λ_k} (ξ_h q^{k-1} u - s_h)/(1 - s_h ξ_h q^{k-1} u)`.
pub fn f_principal(lambda: &Signature, u: Cplx, q: Real, xi: &Sequence, s: &Sequence) -> Result<Cplx, WeightError> {
    let jlen = lambda.len();
    let mut f = Cplx::new(poch_finite_re(q, q, jlen), 0.0);
    for (k, &lk) in lambda.parts().iter().enumerate() {
        let w = u * q.powi(k as i32);
        let lk = lk as usize;
        f /= nonzero(1.0 - s.get(lk) * xi.get(lk) * w, "1 - s xi u")?;
        for h in 0..lk {
            f *= (xi.get(h) * w - s.get(h)) / nonzero(1.0 - s.get(h) * xi.get(h) * w, "1 - s xi u")?;
        }
    }
    Ok(f)
}

/// `G_λ(ρ | Ξ^{-1}, S)`: zero when `λ_n = 0`, else
/// `(s_0²;q)_n (-s_0)^{-n} ∏_{i≥1} (-s_i)^{e_i(λ)}`.
pub fn g_principal(lambda: &Signature, q: Real, s: &Sequence) -> Cplx {
    if lambda.contains_zero() {
        return Cplx::new(0.0, 0.0);
    }
    let n = lambda.len();
    let s0 = s.get(0);
    let mut g = crate::qseries::poch_finite(s0 * s0, q, n) / (-s0).powi(n as i32);
    for i in 1..=lambda.first() {
        g *= (-s.get(i as usize)).powi(lambda.e(i) as i32);
    }
    g
}

/// `F_{λ/μ}(u_1, …, u_N | Ξ, S)` by summing the weights of all admissible
/// directed-path ensembles in `[0, λ_1] × [1, N]`.
///
/// Rows are processed bottom to top; the state is the vector of vertical
/// arrow counts on columns `0..=λ_1`. Each row receives exactly one path from
/// the left and may not emit a path to the right of column `λ_1`; the final
/// vertical counts must equal the multiplicities of `λ`.
pub fn brute_force_f(
    lambda: &Signature,
    mu: &Signature,
    u_list: &[Cplx],
    q: Real,
    xi: &Sequence,
    s: &Sequence,
) -> Result<Cplx, WeightError> {
    let n = u_list.len();
    if lambda.first() > 4 || n > 2 || mu.len() > 2 {
        return Err(WeightError::TooLarge(format!(
            "lambda_1 = {}, N = {n}, M = {} (limits 4, 2, 2)",
            lambda.first(),
            mu.len()
        )));
    }
    if lambda.len() != mu.len() + n {
        return Ok(Cplx::new(0.0, 0.0));
    }
    let width = lambda.first() as usize + 1;
    if mu.first() as usize >= width {
        return Ok(Cplx::new(0.0, 0.0));
    }
    let mut start = vec![0u32; width];
    for &p in mu.parts() {
        start[p as usize] += 1;
    }
    let mut states: HashMap<Vec<u32>, Cplx> = HashMap::new();
    states.insert(start, Cplx::new(1.0, 0.0));
    for &u in u_list {
        let mut next: HashMap<Vec<u32>, Cplx> = HashMap::new();
        for (st, wt) in &states {
            row_transfer(st, *wt, u, q, xi, s, &mut next)?;
        }
        states = next;
    }
    let mut target = vec![0u32; width];
    for &p in lambda.parts() {
        target[p as usize] += 1;
    }
    Ok(states.get(&target).copied().unwrap_or(Cplx::new(0.0, 0.0)))
}

/// Sums over all arrow configurations of one row with one path entering from
/// the left and none leaving on the right.
fn row_transfer(
    below: &[u32],
    weight: Cplx,
    u: Cplx,
    q: Real,
    xi: &Sequence,
    s: &Sequence,
    out: &mut HashMap<Vec<u32>, Cplx>,
) -> Result<(), WeightError> {
    // partial states: (vertical outputs so far, horizontal carry) -> weight
    let mut partial: Vec<(Vec<u32>, u32, Cplx)> = vec![(Vec::with_capacity(below.len()), 1, weight)];
    for (x, &k) in below.iter().enumerate() {
        let (sx, xx) = (s.get(x), xi.get(x));
        let den = nonzero(1.0 - sx * xx * u, "1 - s xi u")?;
        let qk = q.powi(k as i32);
        let mut next = Vec::with_capacity(partial.len() * 2);
        for (tops, carry, wt) in partial {
            let mut push = |top: u32, c: u32, w: Cplx| {
                if w != Cplx::new(0.0, 0.0) {
                    let mut t = tops.clone();
                    t.push(top);
                    next.push((t, c, wt * w));
                }
            };
            if carry == 0 {
                push(k, 0, (1.0 - qk * sx * xx * u) / den);
                if k > 0 {
                    let qk1 = q.powi(k as i32 - 1);
                    push(k - 1, 1, (1.0 - qk1 * sx * sx) * xx * u / den);
                }
            } else {
                push(k + 1, 0, Cplx::new(1.0 - qk * q, 0.0) / den);
                push(k, 1, (xx * u - qk * sx) / den);
            }
        }
        partial = next;
    }
    for (tops, carry, wt) in partial {
        if carry == 0 {
            *out.entry(tops).or_insert(Cplx::new(0.0, 0.0)) += wt;
        }
    }
    Ok(())
}

/// `(S, Ξ)` sequences of the specialization with deformation parameter `a`:
/// `s_0 = s, s_1 = a, s_i = s` and `ξ_0 = 1, ξ_1 = ξ(a), ξ_i = 1`.
pub fn specialization_sequences(p: &SpecializationParams, a: Real) -> (Sequence, Sequence) {
    let s = Cplx::new(p.s(), 0.0);
    let one = Cplx::new(1.0, 0.0);
    (
        Sequence { head: vec![s, Cplx::new(a, 0.0)], tail: s },
        Sequence { head: vec![one, Cplx::new(p.xi(a), 0.0)], tail: one },
    )
}

/// `c_S(λ) = ∏_{i≥1} (s_i²;q)_{m_i} / (q;q)_{m_i}`.
fn c_s(lambda: &Signature, q: Real, s: &Sequence) -> Cplx {
    let mut c = Cplx::new(1.0, 0.0);
    for i in 1..=lambda.first() {
        let m = lambda.multiplicity(i);
        let si = s.get(i as usize);
        c *= crate::qseries::poch_finite(si * si, q, m) / poch_finite_re(q, q, m);
    }
    c
}

/// `Z = s^{-n} (q;q)_n ∏_{i<n} (s - q^i v)/(1 - s q^i v)`.
fn partition_z(n: usize, p: &SpecializationParams) -> Real {
    let (s, v, q) = (p.s(), p.v(), p.q);
    let mut z = s.powi(-(n as i32)) * poch_finite_re(q, q, n);
    for i in 0..n {
        let w = q.powi(i as i32) * v;
        z *= (s - w) / (1.0 - s * w);
    }
    z
}

/// The signature measure at deformation parameter `a > 0`:
/// `F_λ(v, qv, … | Ξ, S) · G^c · c_S(λ) / Z` with
/// `G^c = (q;q)_n (-s_0)^{-n} ∏_{i≥1}(-s_i)^{e_i(λ)}` (zero when `λ_n = 0`).
pub fn ms_weight_deformed(lambda: &Signature, p: &SpecializationParams, a: Real) -> Result<Real, WeightError> {
    if lambda.contains_zero() || lambda.is_empty() {
        return Ok(0.0);
    }
    let (s_seq, xi_seq) = specialization_sequences(p, a);
    let n = lambda.len();
    let f = f_principal(lambda, Cplx::new(p.v(), 0.0), p.q, &xi_seq, &s_seq)?;
    let mut g = Cplx::new(poch_finite_re(p.q, p.q, n) / (-p.s()).powi(n as i32), 0.0);
    for i in 1..=lambda.first() {
        g *= (-s_seq.get(i as usize)).powi(lambda.e(i) as i32);
    }
    let z = partition_z(n, p);
    Ok((f * g * c_s(lambda, p.q, &s_seq) / z).re)
}

/// The `a → 0` limit of [`ms_weight_deformed`] for `λ ∈ Sign_J^+` with
/// `ϑ = q^{-J}`, evaluated in closed form, restricted to `λ_1 ≤ x`.
///
/// In the limit each factor `(ξ_1 w - s_1)/(1 - s_1 ξ_1 w)` (with
/// `w = q^{k-1} v`) pairs with one factor `-s_1 = -a` of `G^c` to give
/// `β1 w/u / (1 + β1 w/u)`, and `(s_1²;q)_{m_1} → 1`. The result vanishes when
/// `λ_J = 0` or when some `m_i(λ) > 1` with `i > 1`, because
/// `(s²;q)_m = (q^{-1};q)_m = 0` for `m ≥ 2`.
pub fn ms_weight(lambda: &Signature, x: u32, p: &SpecializationParams) -> Result<Real, WeightError> {
    if lambda.contains_zero() || lambda.is_empty() || lambda.first() > x {
        return Ok(0.0);
    }
    if (2..=lambda.first()).any(|i| lambda.multiplicity(i) > 1) {
        return Ok(0.0);
    }
    let (q, s, v, u, b1) = (p.q, p.s(), p.v(), p.u(), p.beta1());
    let n = lambda.len();
    let mut f = poch_finite_re(q, q, n);
    for (k, &lk) in lambda.parts().iter().enumerate() {
        let w = q.powi(k as i32) * v;
        let r = b1 * w / u;
        if lk == 1 {
            f /= 1.0 + r;
        } else {
            // column 0 factor, column 1 factor paired with (-a), columns 2..lk
            f /= 1.0 - s * w;
            f *= (w - s) / (1.0 - s * w);
            f *= r / (1.0 + r);
            f *= ((w - s) / (1.0 - s * w)).powi(lk as i32 - 2);
        }
        if lk == 1 {
            f *= (w - s) / (1.0 - s * w);
        }
    }
    let mut g = poch_finite_re(q, q, n) / (-s).powi(n as i32);
    for i in 2..=lambda.first() {
        g *= (-s).powi(lambda.e(i) as i32);
    }
    let mut c = 1.0 / poch_finite_re(q, q, lambda.multiplicity(1));
    for i in 2..=lambda.first() {
        let m = lambda.multiplicity(i);
        c *= poch_finite_re(s * s, q, m) / poch_finite_re(q, q, m);
    }
    Ok(f * g * c / partition_z(n, p))
}
