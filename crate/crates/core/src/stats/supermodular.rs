//! Bounded supermodular test functions.
//!
//! Each function acts on a pair of points through `phi = tanh`, so the
//! symbols `-inf`/`+inf` are ordinary arguments. On vectors the pairwise
//! function is summed over all coordinate pairs `i < j`, which keeps it
//! supermodular on the product lattice.

use crate::extended::ExtendedReal;

#[derive(Clone, Copy)]
pub struct SupermodularFn {
    pub name: &'static str,
    pair: fn(f64, f64) -> f64,
}

impl std::fmt::Debug for SupermodularFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SupermodularFn").field("name", &self.name).finish()
    }
}

impl SupermodularFn {
    pub const fn new(name: &'static str, pair: fn(f64, f64) -> f64) -> Self {
        Self { name, pair }
    }

    pub fn pair(&self, x: ExtendedReal, y: ExtendedReal) -> f64 {
        (self.pair)(x.phi(), y.phi())
    }

    pub fn vector(&self, v: &[ExtendedReal]) -> f64 {
        let phis: Vec<f64> = v.iter().map(|x| x.phi()).collect();
        let mut acc = 0.0;
        for i in 0..phis.len() {
            for j in i + 1..phis.len() {
                acc += (self.pair)(phis[i], phis[j]);
            }
        }
        acc
    }
}

fn tanh_product(p: f64, q: f64) -> f64 {
    p * q
}

fn phi_min(p: f64, q: f64) -> f64 {
    p.min(q)
}

fn neg_phi_gap(p: f64, q: f64) -> f64 {
    -(p - q).abs()
}

fn upper_clipped_product(p: f64, q: f64) -> f64 {
    p.max(0.0) * q.max(0.0)
}

fn lower_clipped_product(p: f64, q: f64) -> f64 {
    p.min(0.0) * q.min(0.0)
}

fn neg_squared_gap(p: f64, q: f64) -> f64 {
    -(p - q) * (p - q)
}

fn neg_gap_excess(p: f64, q: f64) -> f64 {
    -((p - q).abs() - 0.25).max(0.0)
}

fn shifted_min(p: f64, q: f64) -> f64 {
    p.min(q + 0.2)
}

fn hinge_sum(p: f64, q: f64) -> f64 {
    (p + q).max(0.0)
}

fn joint_exceedance(p: f64, q: f64) -> f64 {
    if p > 0.5 && q > 0.5 {
        1.0
    } else {
        0.0
    }
}

/// The bundled library of ten test functions.
pub fn library() -> Vec<SupermodularFn> {
    vec![
        SupermodularFn::new("tanh_product", tanh_product),
        SupermodularFn::new("phi_min", phi_min),
        SupermodularFn::new("neg_phi_gap", neg_phi_gap),
        SupermodularFn::new("upper_clipped_product", upper_clipped_product),
        SupermodularFn::new("lower_clipped_product", lower_clipped_product),
        SupermodularFn::new("neg_squared_gap", neg_squared_gap),
        SupermodularFn::new("neg_gap_excess", neg_gap_excess),
        SupermodularFn::new("shifted_min", shifted_min),
        SupermodularFn::new("hinge_sum", hinge_sum),
        SupermodularFn::new("joint_exceedance", joint_exceedance),
    ]
}

/// `f(x v y) + f(x ^ y) >= f(x) + f(y)` for two points of the plane.
pub fn lattice_inequality_holds(f: &SupermodularFn, x: (ExtendedReal, ExtendedReal), y: (ExtendedReal, ExtendedReal), tol: f64) -> bool {
    let join = (x.0.max(y.0), x.1.max(y.1));
    let meet = (x.0.min(y.0), x.1.min(y.1));
    f.pair(join.0, join.1) + f.pair(meet.0, meet.1) + tol >= f.pair(x.0, x.1) + f.pair(y.0, y.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_named_functions() {
        let lib = library();
        assert_eq!(lib.len(), 10);
        let mut names: Vec<_> = lib.iter().map(|f| f.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 10);
    }

    #[test]
    fn vector_sums_pairs() {
        let f = library()[0];
        let v = [ExtendedReal::PosInf, ExtendedReal::NegInf, ExtendedReal::PosInf];
        // (1)(-1) + (1)(1) + (-1)(1)
        assert_eq!(f.vector(&v), -1.0);
        assert_eq!(f.vector(&v[..1]), 0.0);
    }

    #[test]
    fn modular_function_is_flagged_as_equality() {
        let f = SupermodularFn::new("sum", |p, q| p + q);
        let a = (ExtendedReal::Finite(0.0), ExtendedReal::Finite(1.0));
        let b = (ExtendedReal::Finite(1.0), ExtendedReal::Finite(0.0));
        assert!(lattice_inequality_holds(&f, a, b, 0.0));
        let sub = SupermodularFn::new("neg_product", |p, q| -p * q);
        assert!(!lattice_inequality_holds(&sub, a, b, 0.0));
    }
}
