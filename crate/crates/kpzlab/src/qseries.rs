//! q-Pochhammer symbols and the q-Laplace observable.

use thiserror::Error;

use crate::{Cplx, Real};

/// Errors from q-series evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QSeriesError {
    /// `q` outside `(0, 1)`.
    #[error("q must lie in (0,1), got {0}")]
    BadQ(Real),
    /// The q-Laplace variable lies on the nonnegative real axis.
    #[error("zeta must not lie on the nonnegative real axis, got {0}")]
    ZetaOnCut(Cplx),
}

/// A base `q` with `0 < q < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParam(Real);

impl QParam {
    /// Validates `0 < q < 1`.
    pub fn new(q: Real) -> Result<Self, QSeriesError> {
        if q > 0.0 && q < 1.0 {
            Ok(Self(q))
        } else {
            Err(QSeriesError::BadQ(q))
        }
    }

    /// The raw value.
    #[inline]
    pub fn get(self) -> Real {
        self.0
    }
}

/// Factors with `|a q^n|` below this are dropped from infinite products.
const INF_PRODUCT_CUTOFF: Real = 1e-17;

/// Finite product `(a; q)_n = prod_{j<n} (1 - a q^j)` for any real `q`.
pub fn poch_finite(a: Cplx, q: Real, n: usize) -> Cplx {
    let mut p = Cplx::new(1.0, 0.0);
    let mut aq = a;
    for _ in 0..n {
        p *= 1.0 - aq;
        aq *= q;
    }
    p
}

/// Real-argument convenience wrapper around [`poch_finite`].
pub fn poch_finite_re(a: Real, q: Real, n: usize) -> Real {
    let mut p = 1.0;
    let mut aq = a;
    for _ in 0..n {
        p *= 1.0 - aq;
        aq *= q;
    }
    p
}

/// Infinite product `(a; q)_infinity`, truncated once `|a q^n| < 1e-17`.
///
/// The neglected tail `prod (1 - a q^n)` differs from 1 by at most
/// `2 |a q^N| / (1 - q)`, which is below `1e-14` relative for `q <= 0.99`.
/// Factors are accumulated in blocks of 64 with a log-domain fallback so that
/// products with many large factors neither overflow nor underflow.
pub fn poch_inf(a: Cplx, q: QParam) -> Cplx {
    let q = q.get();
    let mut aq = a;
    let mut block = Cplx::new(1.0, 0.0);
    let mut log_acc = Cplx::new(0.0, 0.0);
    let mut count = 0usize;
    while aq.norm() >= INF_PRODUCT_CUTOFF {
        block *= 1.0 - aq;
        aq *= q;
        count += 1;
        if count % 64 == 0 {
            if block == Cplx::new(0.0, 0.0) {
                return block;
            }
            log_acc += block.ln();
            block = Cplx::new(1.0, 0.0);
        }
    }
    if block == Cplx::new(0.0, 0.0) {
        return block;
    }
    if log_acc == Cplx::new(0.0, 0.0) {
        block
    } else {
        (log_acc + block.ln()).exp()
    }
}

/// Real-argument convenience wrapper around [`poch_inf`].
pub fn poch_inf_re(a: Real, q: QParam) -> Real {
    poch_inf(Cplx::new(a, 0.0), q).re
}

/// `1 / (zeta q^m; q)_infinity` for `zeta` off the nonnegative reals and any
/// integer `m`.
///
/// For negative `m` the factors `1 - zeta q^{m+j}`, `0 <= j < -m`, are peeled
/// off in the log domain, which keeps the evaluation stable for `|m|` in the
/// hundreds.
pub fn q_laplace_term(zeta: Cplx, m: i64, q: QParam) -> Result<Cplx, QSeriesError> {
    if zeta.im == 0.0 && zeta.re >= 0.0 && zeta.re != 0.0 {
        return Err(QSeriesError::ZetaOnCut(zeta));
    }
    if zeta == Cplx::new(0.0, 0.0) {
        return Ok(Cplx::new(1.0, 0.0));
    }
    let qq = q.get();
    if m >= 0 {
        let z = zeta * qq.powi(m.min(i32::MAX as i64) as i32);
        return Ok(1.0 / poch_inf(z, q));
    }
    let mut log_peel = Cplx::new(0.0, 0.0);
    let mut z = zeta * qq.powi(m as i32);
    for _ in 0..(-m) {
        log_peel += (1.0 - z).ln();
        z *= qq;
    }
    Ok((-log_peel).exp() / poch_inf(zeta, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cz(re: Real, im: Real) -> Cplx {
        Cplx::new(re, im)
    }

    #[test]
    fn finite_examples() {
        assert_eq!(poch_finite(cz(0.3, 0.2), 0.5, 0), cz(1.0, 0.0));
        assert!((poch_finite(cz(0.5, 0.0), 0.5, 2) - cz(0.375, 0.0)).norm() < 1e-16);
        for n in 1..6 {
            assert_eq!(poch_finite(cz(1.0, 0.0), 0.3, n), cz(0.0, 0.0));
        }
    }

    #[test]
    fn infinite_examples() {
        let q = QParam::new(0.5).unwrap();
        assert_eq!(poch_inf(cz(0.0, 0.0), q), cz(1.0, 0.0));
        // 200-factor truncated product oracle
        let oracle: Real = (0..200).map(|j| 1.0 - 0.5 * 0.5f64.powi(j)).product();
        assert!((poch_inf_re(0.5, q) - oracle).abs() < 1e-15);
        assert!((oracle - 0.2887880951).abs() < 1e-10);
    }

    #[test]
    fn infinite_shift_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let q = QParam::new(rng.gen_range(0.05..0.95)).unwrap();
            let a = cz(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let lhs = poch_inf(a, q);
            let rhs = (1.0 - a) * poch_inf(a * q.get(), q);
            assert!((lhs - rhs).norm() <= 1e-13 * lhs.norm().max(1.0), "{lhs} {rhs}");
        }
    }

    #[test]
    fn finite_concatenation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let q = rng.gen_range(0.05..0.95);
            let a = cz(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let n = rng.gen_range(0..=20);
            let m = rng.gen_range(0..=20);
            let lhs = poch_finite(a, q, n + m);
            let rhs = poch_finite(a, q, n) * poch_finite(a * q.powi(n as i32), q, m);
            assert!((lhs - rhs).norm() <= 1e-13 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn q_binomial_theorem() {
        // sum_m z^m (theta;q)_m/(q;q)_m = (theta z;q)_inf/(z;q)_inf
        let pts: [(Real, Real, Real); 5] = [(0.5, 0.3, 0.4), (0.3, -0.7, 0.8), (0.8, 2.0, 0.1), (0.6, 0.0, -0.5), (0.25, 16.0, 0.05)];
        for &(q, theta, z) in &pts {
            let qp = QParam::new(q).unwrap();
            let mut sum = 0.0;
            for m in 0..400 {
                sum += z.powi(m) * poch_finite_re(theta, q, m as usize) / poch_finite_re(q, q, m as usize);
            }
            let rhs = poch_inf_re(theta * z, qp) / poch_inf_re(z, qp);
            assert!((sum - rhs).abs() < 1e-10, "{q} {theta} {z}: {sum} vs {rhs}");
        }
    }

    #[test]
    fn q_laplace_examples() {
        let q = QParam::new(0.5).unwrap();
        assert_eq!(q_laplace_term(cz(0.0, 0.0), 5, q).unwrap(), cz(1.0, 0.0));
        assert!(q_laplace_term(cz(0.5, 0.0), 0, q).is_err());
        let big = q_laplace_term(cz(-1.0, 0.0), 60, q).unwrap();
        assert!((big - cz(1.0, 0.0)).norm() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let zeta = cz(rng.gen_range(-3.0..0.0), rng.gen_range(-1.0..1.0));
            let m = rng.gen_range(-40..40);
            let qq = QParam::new(rng.gen_range(0.2..0.8)).unwrap();
            let a = q_laplace_term(zeta, m, qq).unwrap();
            let b = q_laplace_term(zeta, m - 1, qq).unwrap();
            let rhs = (1.0 - zeta * qq.get().powi((m - 1) as i32)) * b;
            assert!((a - rhs).norm() <= 1e-12 * a.norm().max(1e-300), "{a} {rhs}");
        }
    }
}
