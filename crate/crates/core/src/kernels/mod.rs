//! One-dimensional stochastically monotone semigroups on the compactified
//! line: transition CDFs, quantile functions and `P_t tanh`.
//!
//! The points `-inf` and `+inf` are absorbing: `P_t(+inf, .) = delta_{+inf}`
//! and symmetrically at `-inf`. Every operation resolves them before any
//! numerical code runs.

pub mod quadrature;
pub mod special;

use crate::error::{Error, Result};
use crate::exactchain::ChainModel;
use crate::extended::ExtendedReal;

use special::{noncentral_chi2_cdf, normal_cdf, NCX2_TAIL};

/// Square-root diffusion `dX = a (b - X) dt + sigma sqrt(X) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirParams {
    a: f64,
    b: f64,
    sigma2: f64,
}

/// Per-time constants of the CIR transition law: `P_t(x, .)` is the law of
/// `Z / (2c)` with `Z` noncentral chi-square.
#[derive(Debug, Clone, Copy)]
pub struct CirTransition {
    pub c: f64,
    pub df: f64,
    pub decay: f64,
}

impl CirParams {
    pub fn new(a: f64, b: f64, sigma2: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("sigma2", sigma2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if 2.0 * a * b < sigma2 {
            return Err(Error::Parameter(format!(
                "Feller condition 2ab >= sigma2 fails: 2*{a}*{b} < {sigma2}"
            )));
        }
        Ok(Self { a, b, sigma2 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn transition(&self, t: f64) -> CirTransition {
        let decay = (-self.a * t).exp();
        CirTransition {
            c: 2.0 * self.a / ((-(-self.a * t).exp_m1()) * self.sigma2),
            df: 4.0 * self.a * self.b / self.sigma2,
            decay,
        }
    }

    /// Mean of `P_t(x, .)`.
    pub fn mean(&self, x: f64, t: f64) -> f64 {
        self.b + (x - self.b) * (-self.a * t).exp()
    }

    fn cdf(&self, x: f64, t: f64, y: f64) -> f64 {
        let tr = self.transition(t);
        let ncp = 2.0 * tr.c * x * tr.decay;
        noncentral_chi2_cdf(2.0 * tr.c * y, tr.df, ncp)
    }
}

/// Brownian motion with drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianParams {
    drift: f64,
    vol: f64,
}

impl BrownianParams {
    pub fn new(drift: f64, vol: f64) -> Result<Self> {
        if !drift.is_finite() {
            return Err(Error::Parameter(format!("drift must be finite, got {drift}")));
        }
        if !(vol.is_finite() && vol > 0.0) {
            return Err(Error::Parameter(format!("vol must be positive, got {vol}")));
        }
        Ok(Self { drift, vol })
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn vol(&self) -> f64 {
        self.vol
    }

    fn cdf(&self, x: f64, t: f64, y: f64) -> f64 {
        normal_cdf((y - x - self.drift * t) / (self.vol * t.sqrt()))
    }
}

/// A stochastically monotone semigroup on the real line.
#[derive(Debug, Clone)]
pub enum SemigroupModel {
    Cir(CirParams),
    Brownian(BrownianParams),
    Chain(ChainModel),
    /// The identity kernel at every time.
    Deterministic,
}

impl SemigroupModel {
    pub fn name(&self) -> &'static str {
        match self {
            SemigroupModel::Cir(_) => "cir",
            SemigroupModel::Brownian(_) => "brownian",
            SemigroupModel::Chain(_) => "chain",
            SemigroupModel::Deterministic => "deterministic",
        }
    }

    /// `true` when every transition law `P_t(x, .)` at finite `x` is atomless.
    pub fn is_continuous(&self) -> bool {
        matches!(self, SemigroupModel::Cir(_) | SemigroupModel::Brownian(_))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive and finite, got {t}")))
    }
}

fn check_finite_state(model: &SemigroupModel, x: f64) -> Result<()> {
    if let SemigroupModel::Cir(_) = model {
        if x < 0.0 {
            return Err(Error::Domain(format!("CIR state must be non-negative, got {x}")));
        }
    }
    Ok(())
}

/// `P_t(x, (-inf, y])`.
pub fn transition_cdf(model: &SemigroupModel, x: ExtendedReal, t: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    if y.is_nan() {
        return Err(Error::Domain("CDF argument is NaN".into()));
    }
    let x = match x {
        ExtendedReal::NegInf => return Ok(1.0),
        ExtendedReal::PosInf => return Ok(0.0),
        ExtendedReal::Finite(x) => x,
    };
    check_finite_state(model, x)?;
    Ok(match model {
        SemigroupModel::Cir(p) => p.cdf(x, t, y),
        SemigroupModel::Brownian(p) => p.cdf(x, t, y),
        SemigroupModel::Chain(chain) => {
            let row = chain.transition_row(x, t)?;
            chain
                .labels()
                .iter()
                .zip(&row)
                .filter(|(l, _)| **l <= y)
                .map(|(_, p)| p)
                .sum::<f64>()
                .min(1.0)
        }
        SemigroupModel::Deterministic => {
            if y >= x {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// `P_t(x, (-inf, y))`, the left limit of [`transition_cdf`].
pub fn transition_cdf_left(model: &SemigroupModel, x: ExtendedReal, t: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    match (model, x) {
        (SemigroupModel::Chain(chain), ExtendedReal::Finite(xv)) => {
            let row = chain.transition_row(xv, t)?;
            Ok(chain
                .labels()
                .iter()
                .zip(&row)
                .filter(|(l, _)| **l < y)
                .map(|(_, p)| p)
                .sum::<f64>()
                .min(1.0))
        }
        (SemigroupModel::Deterministic, ExtendedReal::Finite(xv)) => {
            Ok(if y > xv { 1.0 } else { 0.0 })
        }
        _ => transition_cdf(model, x, t, y),
    }
}

/// Relative bracket width at which quantile bisection stops.
pub const QUANTILE_TOL: f64 = 1e-10;

/// `F^{-1}_{x,t}(u) = inf { y : P_t(x, (-inf, y]) >= u }`.
pub fn quantile(model: &SemigroupModel, x: ExtendedReal, t: f64, u: f64) -> Result<ExtendedReal> {
    check_time(t)?;
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0,1), got {u}")));
    }
    let xv = match x {
        ExtendedReal::Finite(v) => v,
        inf => return Ok(inf),
    };
    check_finite_state(model, xv)?;
    let y = match model {
        SemigroupModel::Deterministic => xv,
        SemigroupModel::Chain(chain) => {
            let row = chain.transition_row(xv, t)?;
            let labels = chain.labels();
            let mut acc = 0.0;
            let mut out = labels[labels.len() - 1];
            for (l, p) in labels.iter().zip(&row) {
                acc += p;
                if acc >= u {
                    out = *l;
                    break;
                }
            }
            out
        }
        SemigroupModel::Cir(p) => {
            let tr = p.transition(t);
            let ncp = 2.0 * tr.c * xv * tr.decay;
            let cdf = |y: f64| noncentral_chi2_cdf(2.0 * tr.c * y, tr.df, ncp);
            let hi = p.b + xv.abs() + 20.0 * (p.sigma2 * t).sqrt() * (1.0 + xv.sqrt());
            // Levels above the series resolution are not separable from 1.
            bisect(cdf, u.min(1.0 - NCX2_TAIL), 0.0, hi, false)?
        }
        SemigroupModel::Brownian(p) => {
            let centre = xv + p.drift * t;
            let spread = 20.0 * p.vol * t.sqrt();
            bisect(|y| p.cdf(xv, t, y), u, centre - spread, centre + spread, true)?
        }
    };
    Ok(ExtendedReal::Finite(y))
}

/// Smallest `y` (to tolerance) with `cdf(y) >= u`. The bracket is widened
/// geometrically until `cdf(lo) < u <= cdf(hi)`; `lo` is only moved when
/// `expand_low` is set.
fn bisect(cdf: impl Fn(f64) -> f64, u: f64, mut lo: f64, mut hi: f64, expand_low: bool) -> Result<f64> {
    let mut width = hi - lo;
    let mut tries = 0;
    while cdf(hi) < u {
        lo = hi;
        width *= 2.0;
        hi += width;
        tries += 1;
        if tries > 200 {
            return Err(Error::Numeric { what: "quantile bracket (upper)", achieved: hi });
        }
    }
    if expand_low {
        tries = 0;
        while cdf(lo) >= u {
            hi = lo;
            width *= 2.0;
            lo -= width;
            tries += 1;
            if tries > 200 {
                return Err(Error::Numeric { what: "quantile bracket (lower)", achieved: lo });
            }
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= QUANTILE_TOL * (1.0 + mid.abs()) || mid <= lo || mid >= hi {
            return Ok(hi);
        }
        if cdf(mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numeric { what: "quantile bisection", achieved: hi - lo })
}

/// Endpoint clipping of the unit interval for quantile quadrature.
pub const QUADRATURE_CLIP: f64 = 1e-9;
/// Acceptance threshold between the 256- and 512-node rules.
pub const QUADRATURE_TOL: f64 = 1e-7;
/// `-Phi^{-1}(QUADRATURE_CLIP)`.
const PROBIT_CLIP: f64 = 5.997_807_015_007_687;

/// `int_0^1 g(F^{-1}_{x,t}(u)) du` over the clipped interval, with a
/// 256 -> 512 node doubling check.
///
/// The Gauss-Legendre rule runs in the probit variable `u = Phi(s)`,
/// `s` in `[-PROBIT_CLIP, PROBIT_CLIP]`, so that nodes follow the tails of
/// the law instead of crowding at the middle of `(0, 1)`.
pub fn quantile_integral(
    model: &SemigroupModel,
    x: ExtendedReal,
    t: f64,
    g: impl Fn(ExtendedReal) -> f64,
) -> Result<f64> {
    let coarse = gl_quantile_integral(model, x, t, &g, 256)?;
    let fine = gl_quantile_integral(model, x, t, &g, 512)?;
    let delta = (fine - coarse).abs();
    if delta > QUADRATURE_TOL {
        return Err(Error::Numeric { what: "quantile quadrature", achieved: delta });
    }
    Ok(fine)
}

fn gl_quantile_integral(
    model: &SemigroupModel,
    x: ExtendedReal,
    t: f64,
    g: &impl Fn(ExtendedReal) -> f64,
    n: usize,
) -> Result<f64> {
    let (nodes, weights) = quadrature::rule(n);
    let density_scale = (2.0 * std::f64::consts::PI).sqrt().recip();
    let mut acc = 0.0;
    for (z, w) in nodes.iter().zip(weights) {
        let s = PROBIT_CLIP * z;
        let u = if s < 0.0 { normal_cdf(s) } else { 1.0 - normal_cdf(-s) };
        let density = density_scale * (-0.5 * s * s).exp();
        acc += w * density * g(quantile(model, x, t, u)?);
    }
    Ok(acc * PROBIT_CLIP)
}

/// `P_t tanh(x)`, the expected value of `phi` under the transition law.
pub fn expected_phi(model: &SemigroupModel, x: ExtendedReal, t: f64) -> Result<f64> {
    check_time(t)?;
    let xv = match x {
        ExtendedReal::Finite(v) => v,
        inf => return Ok(inf.phi()),
    };
    check_finite_state(model, xv)?;
    match model {
        SemigroupModel::Deterministic => Ok(xv.tanh()),
        SemigroupModel::Chain(chain) => {
            let row = chain.transition_row(xv, t)?;
            Ok(chain.labels().iter().zip(&row).map(|(l, p)| p * l.tanh()).sum())
        }
        _ => quantile_integral(model, x, t, ExtendedReal::phi),
    }
}

/// A one-dimensional law given through its CDF and left limits.
pub trait Cdf {
    fn cdf(&self, y: f64) -> f64;

    fn cdf_left(&self, y: f64) -> f64 {
        self.cdf(y)
    }

    fn mass_at_neg_inf(&self) -> f64 {
        0.0
    }

    fn mass_at_pos_inf(&self) -> f64 {
        0.0
    }
}

/// `P_t(x, .)` viewed as a [`Cdf`].
#[derive(Debug, Clone)]
pub struct TransitionLaw<'a> {
    pub model: &'a SemigroupModel,
    pub x: ExtendedReal,
    pub t: f64,
}

impl<'a> TransitionLaw<'a> {
    pub fn new(model: &'a SemigroupModel, x: ExtendedReal, t: f64) -> Result<Self> {
        check_time(t)?;
        if let ExtendedReal::Finite(v) = x {
            check_finite_state(model, v)?;
        }
        Ok(Self { model, x, t })
    }
}

impl Cdf for TransitionLaw<'_> {
    fn cdf(&self, y: f64) -> f64 {
        transition_cdf(self.model, self.x, self.t, y).expect("validated at construction")
    }

    fn cdf_left(&self, y: f64) -> f64 {
        transition_cdf_left(self.model, self.x, self.t, y).expect("validated at construction")
    }

    fn mass_at_neg_inf(&self) -> f64 {
        if self.x == ExtendedReal::NegInf {
            1.0
        } else {
            0.0
        }
    }

    fn mass_at_pos_inf(&self) -> f64 {
        if self.x == ExtendedReal::PosInf {
            1.0
        } else {
            0.0
        }
    }
}

/// A continuous law given by a plain CDF closure.
pub struct ContinuousCdf<F>(pub F);

impl<F: Fn(f64) -> f64> Cdf for ContinuousCdf<F> {
    fn cdf(&self, y: f64) -> f64 {
        (self.0)(y)
    }
}
