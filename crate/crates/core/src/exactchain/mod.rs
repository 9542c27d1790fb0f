//! Exact computations on finite, totally ordered state chains.
//!
//! Everything here is closed-form or linear algebra on small dense
//! matrices; no sampling is involved. States are indices `0..s` embedded in
//! the real line through strictly increasing labels.

mod expm;
mod parse;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::extended::ExtendedReal;

pub use expm::expm;
pub use parse::parse_qmatrix;

/// Row-sum tolerance of a valid generator.
pub const GENERATOR_TOL: f64 = 1e-12;
/// Row-sum tolerance of a valid transition matrix.
pub const STOCHASTIC_TOL: f64 = 1e-10;
/// Slack accepted on each ordered-cut inequality.
pub const CUT_SLACK: f64 = 1e-12;

/// Generator of a continuous-time chain on labelled, ordered states.
#[derive(Debug, Clone, PartialEq)]
pub struct QMatrix {
    rates: DMatrix<f64>,
    labels: Vec<f64>,
}

impl QMatrix {
    /// Labels default to `0, 1, ..., s - 1`.
    pub fn new(entries: Vec<Vec<f64>>, labels: Option<Vec<f64>>) -> Result<Self> {
        let s = entries.len();
        if s < 2 {
            return Err(Error::Validation(format!("need at least 2 states, got {s}")));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != s {
                return Err(Error::Validation(format!(
                    "row {i} has {} entries, expected {s}",
                    row.len()
                )));
            }
        }
        let rates = DMatrix::from_fn(s, s, |i, j| entries[i][j]);
        Self::from_matrix(rates, labels)
    }

    pub fn from_matrix(rates: DMatrix<f64>, labels: Option<Vec<f64>>) -> Result<Self> {
        let s = rates.nrows();
        if s < 2 || rates.ncols() != s {
            return Err(Error::Validation(format!(
                "generator must be square with at least 2 states, got {}x{}",
                rates.nrows(),
                rates.ncols()
            )));
        }
        for i in 0..s {
            let mut sum = 0.0;
            let mut scale: f64 = 1.0;
            for j in 0..s {
                let v = rates[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Validation(format!("entry ({i},{j}) is not finite")));
                }
                if i != j && v < 0.0 {
                    return Err(Error::Validation(format!(
                        "off-diagonal entry ({i},{j}) = {v} is negative"
                    )));
                }
                sum += v;
                scale = scale.max(v.abs());
            }
            if sum.abs() > GENERATOR_TOL * scale {
                return Err(Error::Validation(format!("row {i} sums to {sum:e}, not 0")));
            }
        }
        let labels = labels.unwrap_or_else(|| (0..s).map(|i| i as f64).collect());
        validate_labels(&labels, s)?;
        Ok(Self { rates, labels })
    }

    /// Builds a generator from its off-diagonal rates; diagonal entries
    /// are ignored and replaced by minus the row's exit rate.
    pub fn from_off_diagonal(entries: Vec<Vec<f64>>, labels: Option<Vec<f64>>) -> Result<Self> {
        let s = entries.len();
        let mut entries = entries;
        for (i, row) in entries.iter_mut().enumerate() {
            if row.len() != s {
                return Err(Error::Validation(format!("row {i} has wrong length")));
            }
            row[i] = 0.0;
            let exit: f64 = row.iter().sum();
            row[i] = -exit;
        }
        Self::new(entries, labels)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }
}

fn validate_labels(labels: &[f64], s: usize) -> Result<()> {
    if labels.len() != s {
        return Err(Error::Shape { expected: s, got: labels.len() });
    }
    if labels.iter().any(|l| !l.is_finite()) || labels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("labels must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// The generator used for the bridge counterexample on `a < b < c`.
pub fn counterexample_generator() -> QMatrix {
    QMatrix::new(
        vec![
            vec![-2.5, 1.75, 0.75],
            vec![1.5, -2.5, 1.0],
            vec![0.5, 0.0, -0.5],
        ],
        None,
    )
    .expect("hard-coded generator is valid")
}

/// Row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    probs: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        let s = probs.nrows();
        if probs.ncols() != s || s == 0 {
            return Err(Error::Validation("transition matrix must be square".into()));
        }
        for i in 0..s {
            let row = probs.row(i);
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Validation(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Validation(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(Self { probs })
    }

    pub(crate) fn from_matrix_unchecked(probs: DMatrix<f64>) -> Self {
        Self { probs }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let s = rows.len();
        if rows.iter().any(|r| r.len() != s) {
            return Err(Error::Validation("transition matrix must be square".into()));
        }
        Self::new(DMatrix::from_fn(s, s, |i, j| rows[i][j]))
    }

    pub fn identity(s: usize) -> Self {
        Self { probs: DMatrix::identity(s, s) }
    }

    pub fn size(&self) -> usize {
        self.probs.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.probs.row(i).iter().copied().collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.probs
    }

    /// Kernel composition `self` then `other`.
    pub fn compose(&self, other: &TransitionMatrix) -> TransitionMatrix {
        Self { probs: &self.probs * &other.probs }
    }

    pub fn pow(&self, k: u32) -> TransitionMatrix {
        let mut out = Self::identity(self.size());
        for _ in 0..k {
            out = out.compose(self);
        }
        out
    }

    /// `x <= y` implies `P(x, .)` is dominated by `P(y, .)`, checked on
    /// consecutive rows with slack `tol`.
    pub fn is_stochastically_monotone(&self, tol: f64) -> bool {
        let s = self.size();
        (0..s - 1).all(|x| {
            let fx = cumulative(&self.row(x));
            let fy = cumulative(&self.row(x + 1));
            fx.iter().zip(&fy).all(|(a, b)| *a + tol >= *b)
        })
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// A chain viewed as a semigroup on the real line: a finite state `x`
/// sits at the largest label `<= x` (the first state when `x` is below
/// every label).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    generator: QMatrix,
}

impl ChainModel {
    pub fn new(generator: QMatrix) -> Self {
        Self { generator }
    }

    pub fn generator(&self) -> &QMatrix {
        &self.generator
    }

    pub fn labels(&self) -> &[f64] {
        self.generator.labels()
    }

    pub fn state_of(&self, x: f64) -> usize {
        self.labels().iter().rposition(|l| *l <= x).unwrap_or(0)
    }

    pub fn transition(&self, t: f64) -> Result<TransitionMatrix> {
        expm(&self.generator, t)
    }

    pub fn transition_row(&self, x: f64, t: f64) -> Result<Vec<f64>> {
        Ok(self.transition(t)?.row(self.state_of(x)))
    }
}

/// Which side of the ordered-cut criterion failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutSide {
    /// `sum_{l >= k} Q(i,l) <= sum_{l >= k} Q(j,l)` for `k > j`.
    Upper,
    /// `sum_{l <= k} Q(i,l) >= sum_{l <= k} Q(j,l)` for `k < i`.
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutViolation {
    pub lower_state: usize,
    pub upper_state: usize,
    pub threshold: usize,
    pub side: CutSide,
    pub lower_sum: f64,
    pub upper_sum: f64,
}

impl std::fmt::Display for CutViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (i, j, k) = (self.lower_state, self.upper_state, self.threshold);
        match self.side {
            CutSide::Upper => write!(
                f,
                "cut k={k} above ({i},{j}): sum_{{l>=k}} Q({i},l) = {} > sum_{{l>=k}} Q({j},l) = {}",
                self.lower_sum, self.upper_sum
            ),
            CutSide::Lower => write!(
                f,
                "cut k={k} below ({i},{j}): sum_{{l<=k}} Q({i},l) = {} < sum_{{l<=k}} Q({j},l) = {}",
                self.lower_sum, self.upper_sum
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneVerdict {
    pub monotone: bool,
    pub violations: Vec<CutViolation>,
}

/// Ordered-cut (Kirstein) criterion for stochastic monotonicity of the
/// semigroup generated by `q`. Checked on adjacent state pairs, which is
/// enough by transitivity. On three states it reduces to
/// `Q(a,c) <= Q(b,c)` and `Q(b,a) >= Q(c,a)`.
pub fn kirstein_monotone(q: &QMatrix) -> MonotoneVerdict {
    let s = q.size();
    let mut violations = Vec::new();
    for i in 0..s - 1 {
        let j = i + 1;
        for k in (j + 1)..s {
            let lo: f64 = (k..s).map(|l| q.rate(i, l)).sum();
            let hi: f64 = (k..s).map(|l| q.rate(j, l)).sum();
            if lo > hi + CUT_SLACK {
                violations.push(CutViolation {
                    lower_state: i,
                    upper_state: j,
                    threshold: k,
                    side: CutSide::Upper,
                    lower_sum: lo,
                    upper_sum: hi,
                });
            }
        }
        for k in 0..i {
            let lo: f64 = (0..=k).map(|l| q.rate(i, l)).sum();
            let hi: f64 = (0..=k).map(|l| q.rate(j, l)).sum();
            if lo + CUT_SLACK < hi {
                violations.push(CutViolation {
                    lower_state: i,
                    upper_state: j,
                    threshold: k,
                    side: CutSide::Lower,
                    lower_sum: lo,
                    upper_sum: hi,
                });
            }
        }
    }
    MonotoneVerdict { monotone: violations.is_empty(), violations }
}

fn check_state(s: usize, x: usize) -> Result<()> {
    if x < s {
        Ok(())
    } else {
        Err(Error::Domain(format!("state {x} out of range for {s} states")))
    }
}

/// `P(X_1 = mid | X_0 = x0, X_2 = x2)` for a chain with one-step matrix `p`.
pub fn bridge_prob(p: &TransitionMatrix, x0: usize, mid: usize, x2: usize) -> Result<f64> {
    let s = p.size();
    for x in [x0, mid, x2] {
        check_state(s, x)?;
    }
    let denom: f64 = (0..s).map(|y| p.get(x0, y) * p.get(y, x2)).sum();
    if denom <= 0.0 {
        return Err(Error::BridgeUndefined { from: x0, to: x2 });
    }
    Ok(p.get(x0, mid) * p.get(mid, x2) / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub time: f64,
    pub monotone: bool,
    pub violations: Vec<CutViolation>,
    /// `P(X_1 <= a | X_0 = a, X_2 = a)`; `None` when the check was skipped.
    pub p_lower_from_a: Option<f64>,
    /// `P(Y_1 <= a | Y_0 = b, Y_2 = b)`.
    pub p_lower_from_b: Option<f64>,
    /// Bridge domination fails: `p_lower_from_a < p_lower_from_b`.
    pub violation: bool,
}

/// Checks that a monotone generator can still produce bridges started and
/// ended at `a` that are not dominated by bridges started and ended at
/// `b > a`. Bridges run over times `0, t, 2t`; `a` and `b` are the two
/// lowest states.
pub fn counterexample_report(q: &QMatrix, t: f64) -> Result<CounterexampleReport> {
    let verdict = kirstein_monotone(q);
    if !verdict.monotone {
        return Ok(CounterexampleReport {
            time: t,
            monotone: false,
            violations: verdict.violations,
            p_lower_from_a: None,
            p_lower_from_b: None,
            violation: false,
        });
    }
    let p = expm(q, t)?;
    let (a, b) = (0, 1);
    let pa = bridge_prob(&p, a, a, a)?;
    let pb = bridge_prob(&p, b, a, b)?;
    Ok(CounterexampleReport {
        time: t,
        monotone: true,
        violations: Vec::new(),
        p_lower_from_a: Some(pa),
        p_lower_from_b: Some(pb),
        violation: pa < pb,
    })
}

/// Law of a pair of states.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    mass: DMatrix<f64>,
}

impl JointDist {
    pub fn new(mass: DMatrix<f64>) -> Result<Self> {
        if mass.nrows() != mass.ncols() {
            return Err(Error::Shape { expected: mass.nrows(), got: mass.ncols() });
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Validation("joint mass must be non-negative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Validation(format!("joint mass sums to {total}")));
        }
        Ok(Self { mass })
    }

    pub fn point_mass(s: usize, x: usize, y: usize) -> Self {
        let mut mass = DMatrix::zeros(s, s);
        mass[(x, y)] = 1.0;
        Self { mass }
    }

    pub fn size(&self) -> usize {
        self.mass.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mass[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn first_marginal(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.mass.row(i).sum()).collect()
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        (0..self.size()).map(|j| self.mass.column(j).sum()).collect()
    }

    /// Pairs carrying positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let s = self.size();
        (0..s)
            .flat_map(move |i| (0..s).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, self.mass[(i, j)]))
            .filter(|(_, _, m)| *m > 0.0)
    }

    /// Total variation distance to another joint law.
    pub fn tv_distance(&self, other: &JointDist) -> f64 {
        0.5 * (&self.mass - &other.mass).iter().map(|d| d.abs()).sum::<f64>()
    }
}

/// The comonotone (north-west corner) coupling of rows `x` and `y` of `p`:
/// the law of `(F_x^{-1}(U), F_y^{-1}(U))` for a single uniform `U`.
pub fn discrete_comonotone_step(p: &TransitionMatrix, x: usize, y: usize) -> Result<JointDist> {
    let s = p.size();
    check_state(s, x)?;
    check_state(s, y)?;
    Ok(comonotone_rows(&p.row(x), &p.row(y)))
}

pub(crate) fn comonotone_rows(px: &[f64], py: &[f64]) -> JointDist {
    let s = px.len();
    let fx = cumulative(px);
    let fy = cumulative(py);
    let mut mass = DMatrix::zeros(s, s);
    for i in 0..s {
        let fx_prev = if i == 0 { 0.0 } else { fx[i - 1] };
        for j in 0..s {
            let fy_prev = if j == 0 { 0.0 } else { fy[j - 1] };
            let m = fx[i].min(fy[j]) - fx_prev.max(fy_prev);
            if m > 0.0 {
                mass[(i, j)] = m;
            }
        }
    }
    JointDist { mass }
}

/// Product coupling of rows `x` and `y`.
pub fn independent_joint(p: &TransitionMatrix, x: usize, y: usize) -> Result<JointDist> {
    let s = p.size();
    check_state(s, x)?;
    check_state(s, y)?;
    Ok(JointDist { mass: DMatrix::from_fn(s, s, |i, j| p.get(x, i) * p.get(y, j)) })
}

/// Pushes a pair law through one step of a pair kernel.
pub fn push_joint(
    j: &JointDist,
    kernel: impl Fn(usize, usize) -> JointDist,
) -> JointDist {
    let s = j.size();
    let mut mass = DMatrix::zeros(s, s);
    for (a, b, w) in j.support() {
        mass += kernel(a, b).mass * w;
    }
    JointDist { mass }
}

/// Exact law after `k` composed comonotone steps of `p_step` from `(x, y)`.
pub fn iterate_joint_exact(p_step: &TransitionMatrix, x: usize, y: usize, k: u32) -> Result<JointDist> {
    if k == 0 {
        return Err(Error::Domain("iterate count must be at least 1".into()));
    }
    let s = p_step.size();
    check_state(s, x)?;
    check_state(s, y)?;
    let rows: Vec<Vec<f64>> = (0..s).map(|i| p_step.row(i)).collect();
    let table: Vec<JointDist> = (0..s * s)
        .map(|ij| comonotone_rows(&rows[ij / s], &rows[ij % s]))
        .collect();
    let mut joint = table[x * s + y].clone();
    for _ in 1..k {
        joint = push_joint(&joint, |a, b| table[a * s + b].clone());
    }
    Ok(joint)
}

/// Generator of the Doeblin coupling on pairs: coordinates jump
/// independently until they meet, then move together. Pair `(i, j)` is
/// indexed `i * s + j`.
pub fn doeblin_generator(q: &QMatrix) -> QMatrix {
    let s = q.size();
    let n = s * s;
    let mut rates = DMatrix::zeros(n, n);
    for i in 0..s {
        for j in 0..s {
            let from = i * s + j;
            if i == j {
                for k in (0..s).filter(|k| *k != i) {
                    rates[(from, k * s + k)] += q.rate(i, k);
                }
            } else {
                for k in (0..s).filter(|k| *k != i) {
                    rates[(from, k * s + j)] += q.rate(i, k);
                }
                for k in (0..s).filter(|k| *k != j) {
                    rates[(from, i * s + k)] += q.rate(j, k);
                }
            }
            let exit: f64 = rates.row(from).sum();
            rates[(from, from)] = -exit;
        }
    }
    QMatrix::from_matrix(rates, None).expect("pair generator inherits validity")
}

/// Law at time `t` of the Doeblin coupling started at `(x, y)`.
pub fn doeblin_joint(q: &QMatrix, x: usize, y: usize, t: f64) -> Result<JointDist> {
    let s = q.size();
    check_state(s, x)?;
    check_state(s, y)?;
    let p = expm(&doeblin_generator(q), t)?;
    let row = p.row(x * s + y);
    Ok(JointDist { mass: DMatrix::from_fn(s, s, |i, j| row[i * s + j]) })
}

/// Wasserstein-1 distance between two laws on the labelled chain under the
/// metric `|tanh(l) - tanh(l')|`: the area between the two CDFs.
pub fn exact_w1(p: &[f64], q: &[f64], labels: &[f64]) -> Result<f64> {
    let s = labels.len();
    for len in [p.len(), q.len()] {
        if len != s {
            return Err(Error::Shape { expected: s, got: len });
        }
    }
    let (mut fp, mut fq, mut w) = (0.0, 0.0, 0.0);
    for i in 0..s - 1 {
        fp += p[i];
        fq += q[i];
        w += (fp - fq).abs() * (labels[i + 1].tanh() - labels[i].tanh());
    }
    Ok(w)
}

/// `sup_x W1(a(x, .), b(x, .))` over the rows of two kernels.
pub fn kernel_w1_distance(a: &TransitionMatrix, b: &TransitionMatrix, labels: &[f64]) -> Result<f64> {
    if a.size() != b.size() {
        return Err(Error::Shape { expected: a.size(), got: b.size() });
    }
    (0..a.size()).try_fold(0.0f64, |acc, x| Ok(acc.max(exact_w1(&a.row(x), &b.row(x), labels)?)))
}

/// `E_J[f(label_i, label_j)]`.
pub fn supermodular_expect(j: &JointDist, f: impl Fn(ExtendedReal, ExtendedReal) -> f64, labels: &[f64]) -> Result<f64> {
    if labels.len() != j.size() {
        return Err(Error::Shape { expected: j.size(), got: labels.len() });
    }
    Ok(j.support()
        .map(|(a, b, w)| w * f(ExtendedReal::Finite(labels[a]), ExtendedReal::Finite(labels[b])))
        .sum())
}
