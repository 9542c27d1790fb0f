use nalgebra::DMatrix;

use super::{QMatrix, TransitionMatrix};
use crate::error::{Error, Result};

/// Degree of the Taylor core.
const TAYLOR_DEGREE: usize = 13;
/// Scaled norm bound before the Taylor core is applied.
const SCALED_NORM: f64 = 0.5;

/// `exp(tQ)` by scaling and squaring.
///
/// The generator is shifted by its largest exit rate `lambda` so that
/// `t (Q + lambda I)` is entrywise non-negative; the Taylor terms then never
/// cancel and every entry of the result is non-negative by construction.
pub fn expm(q: &QMatrix, t: f64) -> Result<TransitionMatrix> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("expm time must be finite and >= 0, got {t}")));
    }
    let s = q.size();
    let lambda = (0..s).map(|i| -q.rate(i, i)).fold(0.0, f64::max);
    if t == 0.0 || lambda == 0.0 {
        return Ok(TransitionMatrix::identity(s));
    }
    let norm = lambda * t;
    let mut squarings = 0u32;
    while norm / 2f64.powi(squarings as i32) > SCALED_NORM {
        squarings += 1;
    }
    let h = t / 2f64.powi(squarings as i32);

    let mut b = q.matrix().clone();
    for i in 0..s {
        b[(i, i)] += lambda;
    }
    b *= h;
    for v in b.iter_mut() {
        // shift leaves tiny negative diagonal residue on the max-rate row
        if *v < 0.0 {
            *v = 0.0;
        }
    }

    let mut sum = DMatrix::<f64>::identity(s, s);
    let mut term = DMatrix::<f64>::identity(s, s);
    for k in 1..=TAYLOR_DEGREE {
        term = &term * &b / k as f64;
        sum += &term;
    }
    sum *= (-lambda * h).exp();
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    Ok(TransitionMatrix::from_matrix_unchecked(sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactchain::counterexample_generator;

    #[test]
    fn identity_at_zero() {
        let q = counterexample_generator();
        let p = expm(&q, 0.0).unwrap();
        assert_eq!(p.matrix(), &DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn rejects_negative_time() {
        let q = counterexample_generator();
        assert!(expm(&q, -1.0).is_err());
        assert!(expm(&q, f64::NAN).is_err());
    }

    #[test]
    fn two_state_closed_form() {
        // rates alpha (0->1), beta (1->0)
        let (alpha, beta) = (0.7, 1.9);
        let q = QMatrix::new(vec![vec![-alpha, alpha], vec![beta, -beta]], None).unwrap();
        for &t in &[0.01, 0.5, 3.0, 40.0] {
            let p = expm(&q, t).unwrap();
            let r = alpha + beta;
            let e = (-r * t).exp();
            let p00 = beta / r + alpha / r * e;
            let p11 = alpha / r + beta / r * e;
            assert!((p.get(0, 0) - p00).abs() < 1e-13, "t={t}");
            assert!((p.get(1, 1) - p11).abs() < 1e-13, "t={t}");
        }
    }
}
