//! Special functions behind the transition laws.

use statrs::function::gamma::ln_gamma;

const MAX_ITER: usize = 100_000;
const EPS: f64 = 1e-16;

/// Standard normal CDF, through `erfc(|z|/sqrt 2) = Q(1/2, z^2/2)`.
pub fn normal_cdf(z: f64) -> f64 {
    let tail = 0.5 * gamma_q(0.5, 0.5 * z * z);
    if z < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
///
/// Series below `x < a + 1`, Lentz continued fraction for the upper
/// function otherwise.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_fraction(a, x)
    }
}

fn log_prefactor(a: f64, x: f64) -> f64 {
    a * x.ln() - x - ln_gamma(a)
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum * log_prefactor(a, x).exp()).min(1.0)
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (log_prefactor(a, x).exp() * h).clamp(0.0, 1.0)
}

/// `x^a e^{-x} / Gamma(a + 1)`, the gap `P(a, x) - P(a + 1, x)`.
fn gamma_gap(a: f64, x: f64) -> f64 {
    (a * x.ln() - x - ln_gamma(a + 1.0)).exp()
}

/// Cumulative Poisson weight at which the mixture series is truncated.
pub const NCX2_TAIL: f64 = 1e-12;

/// CDF of the noncentral chi-square law with `df` degrees of freedom and
/// noncentrality `ncp`, evaluated at `z`.
///
/// Poisson mixture of central chi-square CDFs. Summation starts at the
/// Poisson mode and walks both ways, stepping the incomplete gamma values
/// with `P(a + 1, x) = P(a, x) - x^a e^{-x} / Gamma(a + 1)` so only one
/// incomplete gamma is evaluated per call. The result is accurate to about
/// [`NCX2_TAIL`].
pub fn noncentral_chi2_cdf(z: f64, df: f64, ncp: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let x = 0.5 * z;
    let a0 = 0.5 * df;
    let h = 0.5 * ncp;
    if h <= 0.0 {
        return gamma_p(a0, x);
    }

    let mode = h.floor();
    let k = mode as usize;
    let w_mode = (-h + mode * h.ln() - ln_gamma(mode + 1.0)).exp();
    let p_mode = gamma_p(a0 + mode, x);
    let g_mode = gamma_gap(a0 + mode, x);

    let mut total = w_mode * p_mode;
    let mut weight = w_mode;

    // Downward from the mode. Weights shrink geometrically once away from it.
    let (mut w, mut p, mut g) = (w_mode, p_mode, g_mode);
    let mut j = k;
    while j > 0 {
        let a_j = a0 + (j - 1) as f64;
        // g(a) = g(a + 1) (a + 1) / x
        g = g * (a_j + 1.0) / x;
        p += g;
        w *= j as f64 / h;
        j -= 1;
        total += w * p.min(1.0);
        weight += w;
        if w < 1e-20 {
            break;
        }
    }

    // Upward until the Poisson mass is exhausted.
    let (mut w, mut p, mut g) = (w_mode, p_mode, g_mode);
    let mut j = k;
    let cap = k + 200 + (40.0 * h.sqrt()) as usize;
    while weight < 1.0 - NCX2_TAIL && j < cap {
        p = (p - g).max(0.0);
        j += 1;
        let a_j = a0 + j as f64;
        g = g * x / (a_j);
        w *= h / j as f64;
        total += w * p;
        weight += w;
    }
    // The omitted terms have weights summing to `1 - weight` and incomplete
    // gamma values at most `p`.
    total += (1.0 - weight).max(0.0) * p;

    total.clamp(0.0, 1.0)
}
