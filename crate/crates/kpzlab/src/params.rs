//! Model parameters, derived constants, KPZ scaling constants and the mapping
//! between ferroelectric symmetric six-vertex weights and stochastic
//! six-vertex probabilities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

/// Parameter-domain errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    /// A required inequality between parameters is violated.
    #[error("parameter domain violated: {0}")]
    Domain(String),
    /// The scaling constants were requested at a non-stationary point.
    #[error("parameters are not stationary: {0}")]
    NotStationary(String),
    /// The ferroelectric mapping was requested outside its domain.
    #[error("ferroelectric mapping domain violated: {0}")]
    Mapping(String),
}

fn check_open_unit(name: &str, v: Real) -> Result<(), ParamError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(ParamError::Domain(format!("0 < {name} < 1 (got {name} = {v})")))
    }
}

/// Relative tolerance used by [`SixVertexParams::validate`].
const VALIDATE_TOL: Real = 1e-12;

/// Parameters of the stochastic six-vertex model with double-sided
/// `(b1, b2)`-Bernoulli boundary data, together with the derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixVertexParams {
    /// Probability that a vertical path continues vertically.
    pub delta1: Real,
    /// Probability that a horizontal path continues horizontally.
    pub delta2: Real,
    /// Entrance density along the y-axis.
    pub b1: Real,
    /// Entrance density along the x-axis.
    pub b2: Real,
    /// `delta1 / delta2`.
    pub q: Real,
    /// `(1 - delta1) / (1 - delta2)`.
    pub kappa: Real,
    /// `b1 / (1 - b1)`.
    pub beta1: Real,
    /// `b2 / (1 - b2)`.
    pub beta2: Real,
    /// Whether `beta1 = kappa * beta2` (to relative tolerance `1e-12`).
    pub translation_invariant: bool,
}

impl SixVertexParams {
    /// Validates the inputs and populates all derived fields.
    pub fn new(delta1: Real, delta2: Real, b1: Real, b2: Real) -> Result<Self, ParamError> {
        check_open_unit("delta1", delta1)?;
        check_open_unit("delta2", delta2)?;
        if delta1 >= delta2 {
            return Err(ParamError::Domain(format!(
                "delta1 < delta2 (got delta1 = {delta1}, delta2 = {delta2})"
            )));
        }
        check_open_unit("b1", b1)?;
        check_open_unit("b2", b2)?;
        let q = delta1 / delta2;
        let kappa = (1.0 - delta1) / (1.0 - delta2);
        let beta1 = b1 / (1.0 - b1);
        let beta2 = b2 / (1.0 - b2);
        let translation_invariant = (beta1 - kappa * beta2).abs() <= 1e-12 * beta1;
        Ok(Self { delta1, delta2, b1, b2, q, kappa, beta1, beta2, translation_invariant })
    }

    /// Re-derives every stored field and compares with tolerance `1e-12`.
    pub fn validate(&self) -> Result<(), ParamError> {
        let fresh = Self::new(self.delta1, self.delta2, self.b1, self.b2)?;
        let close = |a: Real, b: Real| (a - b).abs() <= VALIDATE_TOL * a.abs().max(b.abs()).max(1.0);
        let ok = close(fresh.q, self.q)
            && close(fresh.kappa, self.kappa)
            && close(fresh.beta1, self.beta1)
            && close(fresh.beta2, self.beta2)
            && fresh.translation_invariant == self.translation_invariant;
        if !ok {
            return Err(ParamError::Domain("stored derived fields are inconsistent".into()));
        }
        if !(self.q < 1.0 && self.kappa > 1.0) {
            return Err(ParamError::Domain("q < 1 < kappa".into()));
        }
        Ok(())
    }

    /// The vertex transition rates of this parameter point.
    pub fn rates(&self) -> VertexRates {
        VertexRates { delta1: self.delta1, delta2: self.delta2 }
    }
}

/// Validates inputs and returns the full parameter record.
pub fn derive_six_vertex(delta1: Real, delta2: Real, b1: Real, b2: Real) -> Result<SixVertexParams, ParamError> {
    SixVertexParams::new(delta1, delta2, b1, b2)
}

/// The pair of stochastic six-vertex transition probabilities.
///
/// Unlike [`SixVertexParams`] this allows `delta1 = 0`, which is the
/// degenerate point reached when the model approximates a totally asymmetric
/// exclusion process (`L = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexRates {
    /// Probability that a vertical path continues vertically.
    pub delta1: Real,
    /// Probability that a horizontal path continues horizontally.
    pub delta2: Real,
}

impl VertexRates {
    /// Requires `0 <= delta1 < delta2 < 1`.
    pub fn new(delta1: Real, delta2: Real) -> Result<Self, ParamError> {
        if !(delta1 >= 0.0 && delta1 < delta2 && delta2 < 1.0) {
            return Err(ParamError::Domain(format!(
                "0 <= delta1 < delta2 < 1 (got delta1 = {delta1}, delta2 = {delta2})"
            )));
        }
        Ok(Self { delta1, delta2 })
    }
}

/// Returns the `b2` for which `beta2 = beta1 / kappa`, i.e. the
/// translation-invariant partner of `b1`.
pub fn translation_invariant_b2(delta1: Real, delta2: Real, b1: Real) -> Result<Real, ParamError> {
    check_open_unit("delta1", delta1)?;
    check_open_unit("delta2", delta2)?;
    check_open_unit("b1", b1)?;
    if delta1 > delta2 {
        return Err(ParamError::Domain(format!(
            "delta1 <= delta2 (got delta1 = {delta1}, delta2 = {delta2})"
        )));
    }
    let kappa = (1.0 - delta1) / (1.0 - delta2);
    let beta1 = b1 / (1.0 - b1);
    Ok(beta1 / (kappa + beta1))
}

/// Parameters of the ASEP with left rate `l`, right rate `r` and
/// double-sided `(b1, b2)`-Bernoulli initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsepParams {
    /// Left jump rate.
    pub l: Real,
    /// Right jump rate.
    pub r: Real,
    /// Density on sites `<= 0`.
    pub b1: Real,
    /// Density on sites `> 0`.
    pub b2: Real,
    /// `l / r`.
    pub q: Real,
}

impl AsepParams {
    /// Requires `r > l >= 0` and densities in `[0, 1]`.
    pub fn new(l: Real, r: Real, b1: Real, b2: Real) -> Result<Self, ParamError> {
        if !(l >= 0.0 && r > l) {
            return Err(ParamError::Domain(format!("R > L >= 0 (got L = {l}, R = {r})")));
        }
        for (name, b) in [("b1", b1), ("b2", b2)] {
            if !(0.0..=1.0).contains(&b) {
                return Err(ParamError::Domain(format!("0 <= {name} <= 1 (got {b})")));
            }
        }
        Ok(Self { l, r, b1, b2, q: l / r })
    }

    /// `beta_i = b_i / (1 - b_i)`; requires `b_i < 1`.
    pub fn betas(&self) -> (Real, Real) {
        (self.b1 / (1.0 - self.b1), self.b2 / (1.0 - self.b2))
    }
}

/// Which model a set of scaling constants belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Asymmetric simple exclusion process.
    Asep,
    /// Stochastic six-vertex model.
    Vertex,
}

/// Constants that describe the KPZ scaling of the stationary current/height.
///
/// The `c`-dependent characteristic direction and current density are
/// available through [`ScalingConstants::eta_at`] and
/// [`ScalingConstants::m_at`]; the stored `eta` and `m` are their `c = 0`
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    /// Model tag.
    pub model: ModelKind,
    /// Fluctuation scale in the `(eta, m)` parametrisation.
    pub f: Real,
    /// Characteristic direction at `c = 0`.
    pub eta: Real,
    /// Current density at `c = 0`.
    pub m: Real,
    /// `b (1 - b)` (for the vertex model, `b = b1`).
    pub chi: Real,
    /// Vertex model: `b + kappa (1 - b)`.
    pub lambda: Option<Real>,
    /// Vertex model: `lambda^2 / kappa`.
    pub theta: Option<Real>,
    /// Vertex model: transversal scale `rho`.
    pub rho: Option<Real>,
    /// Vertex model: `b1 + kappa (1 - b1)`.
    pub lambda1: Option<Real>,
    /// Vertex model: `b2 + (1 - b2) / kappa`.
    pub lambda2: Option<Real>,
    /// Vertex model: x-coordinate of the characteristic per unit `T`,
    /// `lambda1 (1 - delta2)`.
    pub x_coef: Option<Real>,
    /// Vertex model: y-coordinate of the characteristic per unit `T`,
    /// `lambda2 (1 - delta1)`.
    pub y_coef: Option<Real>,
    /// Vertex model: transversal coefficient `varsigma`.
    pub varsigma: Option<Real>,
    /// Vertex model: fluctuation scale in the `(x T, y T)` parametrisation,
    /// `(delta2 - delta1)^{1/3} (chi1 chi2)^{1/3}`.
    pub f_xy: Option<Real>,
    /// Vertex model: height growth rate along the characteristic,
    /// `b1 b2 (delta2 - delta1)`.
    pub growth: Option<Real>,
    /// ASEP: drift `R - L`.
    pub drift: Option<Real>,
}

impl ScalingConstants {
    /// Characteristic direction with transversal shift `c` at time `t`.
    pub fn eta_at(&self, c: Real, t: Real) -> Real {
        let s = c / t.cbrt();
        match self.model {
            ModelKind::Asep => self.eta + 2.0 * s * self.chi.cbrt(),
            ModelKind::Vertex => {
                let lam = self.lambda.expect("vertex constants carry lambda");
                self.eta + 2.0 * self.rho.expect("vertex constants carry rho") * lam * s
            }
        }
    }

    /// Current density with transversal shift `c` at time `t`.
    pub fn m_at(&self, c: Real, t: Real) -> Real {
        let s = c / t.cbrt();
        match self.model {
            ModelKind::Asep => self.m - 2.0 * self.asep_b() * self.chi.cbrt() * s,
            ModelKind::Vertex => {
                self.m - 2.0 * self.rho.expect("vertex constants carry rho") * self.vertex_b() * s
            }
        }
    }

    fn asep_b(&self) -> Real {
        // eta = 1 - 2b
        0.5 * (1.0 - self.eta)
    }

    fn vertex_b(&self) -> Real {
        // m = b^2 (1 - 1/kappa) and lambda = b + kappa (1 - b)
        let lam = self.lambda.expect("vertex constants carry lambda");
        let theta = self.theta.expect("vertex constants carry theta");
        let kappa = lam * lam / theta;
        (kappa - lam) / (kappa - 1.0)
    }
}

/// Scaling constants of the stationary ASEP at density `b` (`b1 = b2 = b`).
pub fn scaling_constants_asep(p: &AsepParams) -> Result<ScalingConstants, ParamError> {
    if (p.b1 - p.b2).abs() > 1e-12 {
        return Err(ParamError::NotStationary(format!("b1 = b2 required (got {} and {})", p.b1, p.b2)));
    }
    let b = p.b1;
    if !(b > 0.0 && b < 1.0) {
        return Err(ParamError::Domain(format!("0 < b < 1 (got {b})")));
    }
    let chi = b * (1.0 - b);
    Ok(ScalingConstants {
        model: ModelKind::Asep,
        f: chi.powf(2.0 / 3.0),
        eta: 1.0 - 2.0 * b,
        m: b * b,
        chi,
        lambda: None,
        theta: None,
        rho: None,
        lambda1: None,
        lambda2: None,
        x_coef: None,
        y_coef: None,
        varsigma: None,
        f_xy: None,
        growth: None,
        drift: Some(p.r - p.l),
    })
}

/// Scaling constants of the translation-invariant stochastic six-vertex model
/// (`beta1 = kappa beta2`), with `b = b1`.
pub fn scaling_constants_vertex(p: &SixVertexParams) -> Result<ScalingConstants, ParamError> {
    if !p.translation_invariant {
        return Err(ParamError::NotStationary(format!(
            "beta1 = kappa beta2 required (beta1 = {}, kappa beta2 = {})",
            p.beta1,
            p.kappa * p.beta2
        )));
    }
    let (d1, d2, kappa) = (p.delta1, p.delta2, p.kappa);
    let b = p.b1;
    let chi = b * (1.0 - b);
    let chi2 = p.b2 * (1.0 - p.b2);
    let lambda = b + kappa * (1.0 - b);
    let theta = lambda * lambda / kappa;
    let rho = (1.0 - 1.0 / kappa).powf(2.0 / 3.0) * kappa.powf(-1.0 / 3.0) * chi.cbrt() * lambda.cbrt();
    let f = lambda.powf(-1.0 / 3.0) * (kappa - 1.0).cbrt() * chi.powf(2.0 / 3.0);
    let lambda1 = lambda;
    let lambda2 = p.b2 + (1.0 - p.b2) / kappa;
    let varsigma = 2.0 * (d2 - d1).powf(2.0 / 3.0) * (chi * chi2).powf(1.0 / 6.0) / ((1.0 - d1) * (1.0 - d2)).sqrt();
    let f_xy = (d2 - d1).cbrt() * (chi * chi2).cbrt();
    Ok(ScalingConstants {
        model: ModelKind::Vertex,
        f,
        eta: theta,
        m: b * b * (1.0 - 1.0 / kappa),
        chi,
        lambda: Some(lambda),
        theta: Some(theta),
        rho: Some(rho),
        lambda1: Some(lambda1),
        lambda2: Some(lambda2),
        x_coef: Some(lambda1 * (1.0 - d2)),
        y_coef: Some(lambda2 * (1.0 - d1)),
        varsigma: Some(varsigma),
        f_xy: Some(f_xy),
        growth: Some(p.b1 * p.b2 * (d2 - d1)),
        drift: None,
    })
}

/// Characteristic point `x(T)` with both the rounded and unrounded variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicPoint {
    /// Unrounded value `eta T`.
    pub exact: Real,
    /// `floor(eta T)`.
    pub rounded: i64,
}

impl CharacteristicPoint {
    /// Builds both variants from the real value.
    pub fn new(exact: Real) -> Self {
        Self { exact, rounded: exact.floor() as i64 }
    }
}

/// Symmetric six-vertex weights `(a, b, c)` in the ferroelectric phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FerroWeights {
    /// Weight of the two "straight-through" configurations.
    pub a: Real,
    /// Weight of the two "crossing" configurations.
    pub b: Real,
    /// Weight of the two "turning" configurations.
    pub c: Real,
}

impl FerroWeights {
    /// Builds the weights; all must be positive.
    pub fn new(a: Real, b: Real, c: Real) -> Result<Self, ParamError> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(ParamError::Mapping(format!("weights must be positive (got a={a}, b={b}, c={c})")));
        }
        Ok(Self { a, b, c })
    }

    /// Anisotropy parameter `(a^2 + b^2 - c^2) / (2ab)`.
    pub fn delta(&self) -> Real {
        (self.a * self.a + self.b * self.b - self.c * self.c) / (2.0 * self.a * self.b)
    }

    fn check_ferro(&self) -> Result<Real, ParamError> {
        let d = self.delta();
        if !(d > 1.0) {
            return Err(ParamError::Mapping(format!("Delta > 1 required (got {d})")));
        }
        if !(self.a > self.b) {
            return Err(ParamError::Mapping(format!("a > b required (got a={}, b={})", self.a, self.b)));
        }
        Ok(d)
    }
}

/// Maps ferroelectric weights to the stochastic probabilities
/// `delta1 = (b/a)(Delta - sqrt(Delta^2 - 1))`,
/// `delta2 = (b/a)(Delta + sqrt(Delta^2 - 1))`.
pub fn ferro_to_stochastic(w: &FerroWeights) -> Result<(Real, Real), ParamError> {
    let d = w.check_ferro()?;
    let root = (d * d - 1.0).sqrt();
    let r = w.b / w.a;
    // (Delta - root) is evaluated as 1/(Delta + root) to avoid cancellation.
    Ok((r / (d + root), r * (d + root)))
}

/// Inverse of [`ferro_to_stochastic`] normalised to `a = 1`:
/// `b = sqrt(delta1 delta2)`, `c = sqrt(1 + delta1 delta2 - delta1 - delta2)`.
pub fn stochastic_to_ferro(delta1: Real, delta2: Real) -> Result<FerroWeights, ParamError> {
    if !(delta1 > 0.0 && delta1 < delta2 && delta2 < 1.0) {
        return Err(ParamError::Mapping(format!(
            "0 < delta1 < delta2 < 1 required (got delta1 = {delta1}, delta2 = {delta2})"
        )));
    }
    let c2 = (1.0 - delta1) * (1.0 - delta2);
    if !(c2 > 0.0) {
        return Err(ParamError::Mapping(format!("c^2 must be positive (got {c2})")));
    }
    FerroWeights::new(1.0, (delta1 * delta2).sqrt(), c2.sqrt())
}

/// Free energy per site `(h - v) log(Delta - sqrt(Delta^2 - 1)) - log a` of the
/// translation-invariant measure with slopes `(h, v)`.
pub fn free_energy(w: &FerroWeights, h: Real, v: Real) -> Result<Real, ParamError> {
    let d = w.check_ferro()?;
    for (name, s) in [("h", h), ("v", v)] {
        if !(s > 0.0 && s < 1.0) {
            return Err(ParamError::Mapping(format!("slope {name} must lie in (0,1) (got {s})")));
        }
    }
    let lower = 1.0 / (d + (d * d - 1.0).sqrt());
    Ok((h - v) * lower.ln() - w.a.ln())
}
