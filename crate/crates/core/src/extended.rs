//! Points of the compactified line `[-inf, +inf]`.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// A point of the extended real line.
///
/// The two symbols are kept apart from finite values so series code never
/// sees floating-point infinities. Finite values are never NaN and `-0.0`
/// is normalised to `0.0`.
#[derive(Debug, Clone, Copy)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    /// Maps `f64` infinities onto the symbols. NaN is rejected.
    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() {
            Err(Error::Domain("NaN is not a point of the extended line".into()))
        } else if v == f64::INFINITY {
            Ok(ExtendedReal::PosInf)
        } else if v == f64::NEG_INFINITY {
            Ok(ExtendedReal::NegInf)
        } else if v == 0.0 {
            Ok(ExtendedReal::Finite(0.0))
        } else {
            Ok(ExtendedReal::Finite(v))
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    /// `f64` view, with the symbols mapped to IEEE infinities.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtendedReal::NegInf => f64::NEG_INFINITY,
            ExtendedReal::Finite(v) => v,
            ExtendedReal::PosInf => f64::INFINITY,
        }
    }

    /// The compactifying map `tanh`, sending the symbols to exactly `-1` and `+1`.
    pub fn phi(self) -> f64 {
        match self {
            ExtendedReal::NegInf => -1.0,
            ExtendedReal::Finite(v) => v.tanh(),
            ExtendedReal::PosInf => 1.0,
        }
    }

    /// Distance `|phi(other) - phi(self)|` on the compactified line.
    pub fn phi_distance(self, other: ExtendedReal) -> f64 {
        (other.phi() - self.phi()).abs()
    }

    fn rank(self) -> u8 {
        match self {
            ExtendedReal::NegInf => 0,
            ExtendedReal::Finite(_) => 1,
            ExtendedReal::PosInf => 2,
        }
    }
}

impl From<f64> for ExtendedReal {
    /// Panics on NaN; use [`ExtendedReal::new`] for untrusted input.
    fn from(v: f64) -> Self {
        ExtendedReal::new(v).expect("NaN passed to ExtendedReal::from")
    }
}

impl PartialEq for ExtendedReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExtendedReal {}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.total_cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::NegInf => f.write_str("-inf"),
            ExtendedReal::Finite(v) => write!(f, "{v}"),
            ExtendedReal::PosInf => f.write_str("inf"),
        }
    }
}

/// `d_n(x, y) = sum_i |phi(y_i) - phi(x_i)|` on the compactified product.
pub fn phi_dist(x: &[ExtendedReal], y: &[ExtendedReal]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(x.iter().zip(y).map(|(a, b)| a.phi_distance(*b)).sum())
}

/// `true` when `values` respects every coordinate ordering of `starts`:
/// `starts[i] <= starts[j]` implies `values[i] <= values[j]`, with equality
/// carried over to equality.
pub fn order_compatible(starts: &[ExtendedReal], values: &[ExtendedReal]) -> bool {
    if starts.len() != values.len() {
        return false;
    }
    for i in 0..starts.len() {
        for j in 0..starts.len() {
            match starts[i].cmp(&starts[j]) {
                Ordering::Less => {
                    if values[i] > values[j] {
                        return false;
                    }
                }
                Ordering::Equal => {
                    if values[i] != values[j] {
                        return false;
                    }
                }
                Ordering::Greater => {}
            }
        }
    }
    true
}
