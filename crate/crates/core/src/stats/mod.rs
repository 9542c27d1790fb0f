//! Empirical diagnostics on sample batches.

pub mod supermodular;

use std::ops::RangeInclusive;

use crate::coupling::{sample_batch, CouplingConfig, DyadicTime, SampleBatch, MAX_DIM};
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::kernels::{expected_phi, Cdf, SemigroupModel, TransitionLaw};

pub use supermodular::{library, SupermodularFn};

/// Standard errors allowed on one-sided Monte Carlo verdicts.
pub const Z_GATE: f64 = 3.0;
/// Largest refinement level accepted by the convergence sweep.
pub const MAX_LEVEL: u32 = 12;

/// Sorted sample of a law on the extended line.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    values: Vec<ExtendedReal>,
}

impl EmpiricalMeasure {
    pub fn new(mut values: Vec<ExtendedReal>) -> Self {
        values.sort();
        Self { values }
    }

    pub fn values(&self) -> &[ExtendedReal] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// W1 between two equal-size empirical laws under the `tanh` metric: the
/// mean gap between matched order statistics.
pub fn empirical_w1(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape { expected: a.len(), got: b.len() });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x.phi_distance(*y)).sum();
    Ok(sum / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `sqrt(ln(2 / alpha) / (2N))`.
pub fn dkw_bound(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Kolmogorov-Smirnov distance to an analytic law, judged against the DKW
/// band at level `alpha`. Atoms of the analytic law are handled through
/// [`Cdf::cdf_left`]; masses at `-inf`/`+inf` through
/// [`Cdf::mass_at_neg_inf`]/[`Cdf::mass_at_pos_inf`].
pub fn ks_dkw(sample: &EmpiricalMeasure, law: &impl Cdf, alpha: f64) -> Result<KsResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let n = sample.len();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {n}")));
    }
    let nf = n as f64;
    let vals = sample.values();
    let c_neg = vals.iter().take_while(|v| **v == ExtendedReal::NegInf).count();
    let c_pos = vals.iter().rev().take_while(|v| **v == ExtendedReal::PosInf).count();

    let mut d = ((c_neg as f64) / nf - law.mass_at_neg_inf())
        .abs()
        .max(((c_pos as f64) / nf - law.mass_at_pos_inf()).abs());

    let finite = &vals[c_neg..n - c_pos];
    let mut i = 0;
    while i < finite.len() {
        let v = finite[i].to_f64();
        let mut j = i;
        while j < finite.len() && finite[j].to_f64() == v {
            j += 1;
        }
        let below = (c_neg + i) as f64 / nf;
        let at = (c_neg + j) as f64 / nf;
        d = d.max((below - law.cdf_left(v)).abs()).max((at - law.cdf(v)).abs());
        i = j;
    }
    let bound = dkw_bound(n, alpha);
    Ok(KsResult { statistic: d, bound, pass: d <= bound })
}

/// Fraction of rows that are order-compatible with the batch's starts.
pub fn order_fraction(batch: &SampleBatch) -> f64 {
    if batch.is_empty() {
        return 1.0;
    }
    let ok = (0..batch.len()).filter(|r| batch.is_order_compatible(*r)).count();
    ok as f64 / batch.len() as f64
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquicontinuityReport {
    /// Monte Carlo mean of `sum_i |phi(Y_i) - phi(X_i)|`.
    pub estimate: f64,
    pub std_error: f64,
    /// `sum_i |P_t phi(y_i) - P_t phi(x_i)|`.
    pub rhs: f64,
    pub pass: bool,
}

/// Runs the joint level-`level` iterate from the concatenated start
/// `(x, y)` and compares the expected coordinate-wise `phi`-displacement
/// with the bound built from `P_t phi`.
pub fn equicontinuity_check(
    model: &SemigroupModel,
    x: &[ExtendedReal],
    y: &[ExtendedReal],
    time: DyadicTime,
    level: u32,
    n_samples: usize,
    seed: u64,
) -> Result<EquicontinuityReport> {
    if x.len() != y.len() {
        return Err(Error::Shape { expected: x.len(), got: y.len() });
    }
    let n = x.len();
    if 2 * n > MAX_DIM {
        return Err(Error::Config(format!("2n = {} exceeds {MAX_DIM}", 2 * n)));
    }
    let config = CouplingConfig {
        model: model.clone(),
        starts: x.iter().chain(y).copied().collect(),
        time,
        level,
        n_samples,
        seed,
    };
    let batch = sample_batch(&config)?;
    let disp: Vec<f64> = batch
        .values
        .iter()
        .map(|row| (0..n).map(|i| row[i].phi_distance(row[n + i])).sum())
        .collect();
    let (estimate, std_error) = mean_and_se(&disp);

    let t = time.value();
    let mut rhs = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        rhs += (expected_phi(model, *yi, t)? - expected_phi(model, *xi, t)?).abs();
    }
    Ok(EquicontinuityReport {
        estimate,
        std_error,
        rhs,
        pass: estimate <= rhs + Z_GATE * std_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceEntry {
    pub name: &'static str,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Mean of the paired differences `f(A_r) - f(B_r)`.
    pub difference: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceResult {
    pub entries: Vec<DominanceEntry>,
    pub pass: bool,
}

/// Checks `E_A[f] <= E_B[f]` for every test function, allowing
/// [`Z_GATE`] paired standard errors.
pub fn dominance_mc(a: &SampleBatch, b: &SampleBatch, fns: &[SupermodularFn]) -> Result<DominanceResult> {
    if a.dim() != b.dim() {
        return Err(Error::Config(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    if a.len() != b.len() {
        return Err(Error::Config(format!("sample size mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.starts != b.starts {
        return Err(Error::Config("batches start from different points".into()));
    }
    if a.time() != b.time() {
        return Err(Error::Config(format!("time mismatch: {} vs {}", a.time(), b.time())));
    }
    let n = a.len() as f64;
    let entries: Vec<DominanceEntry> = fns
        .iter()
        .map(|f| {
            let fa: Vec<f64> = a.values.iter().map(|r| f.vector(r)).collect();
            let fb: Vec<f64> = b.values.iter().map(|r| f.vector(r)).collect();
            let diffs: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x - y).collect();
            let (difference, std_error) = mean_and_se(&diffs);
            DominanceEntry {
                name: f.name,
                mean_a: fa.iter().sum::<f64>() / n,
                mean_b: fb.iter().sum::<f64>() / n,
                difference,
                std_error,
                pass: difference <= Z_GATE * std_error,
            }
        })
        .collect();
    let pass = entries.iter().all(|e| e.pass);
    Ok(DominanceResult { entries, pass })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[ExtendedReal]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*a].cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks. NaN when either column
/// is constant.
pub fn spearman(a: &[ExtendedReal], b: &[ExtendedReal]) -> f64 {
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    sab / (saa * sbb).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairStat {
    pub i: usize,
    pub j: usize,
    /// `E[phi(X_i) phi(X_j)]`.
    pub phi_product: f64,
    pub spearman: f64,
    /// Absolute change from the previous level, if any.
    pub delta_phi_product: Option<f64>,
    pub delta_spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: u32,
    pub pairs: Vec<PairStat>,
    pub ks: Vec<KsResult>,
    pub order_fraction: f64,
}

/// Statistics of the level-`m` iterate for each `m` in `levels`, with
/// successive differences and per-coordinate marginal KS checks.
pub fn convergence_diag(
    model: &SemigroupModel,
    starts: &[ExtendedReal],
    time: DyadicTime,
    levels: RangeInclusive<u32>,
    n_samples: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<ConvergenceRow>> {
    if levels.is_empty() || *levels.start() < time.m0() || *levels.end() > MAX_LEVEL {
        return Err(Error::Config(format!(
            "level range {}..={} must lie within [{}, {MAX_LEVEL}]",
            levels.start(),
            levels.end(),
            time.m0()
        )));
    }
    let t = time.value();
    let laws: Vec<TransitionLaw> = starts
        .iter()
        .map(|x| TransitionLaw::new(model, *x, t))
        .collect::<Result<_>>()?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for level in levels {
        let batch = sample_batch(&CouplingConfig {
            model: model.clone(),
            starts: starts.to_vec(),
            time,
            level,
            n_samples,
            seed,
        })?;
        rows.push(diagnose_batch(&batch, level, &laws, alpha, rows.last())?);
    }
    Ok(rows)
}

/// Statistics of one batch; `previous` supplies the deltas.
pub fn diagnose_batch(
    batch: &SampleBatch,
    level: u32,
    laws: &[TransitionLaw],
    alpha: f64,
    previous: Option<&ConvergenceRow>,
) -> Result<ConvergenceRow> {
    let n = batch.dim();
    if laws.len() != n {
        return Err(Error::Shape { expected: n, got: laws.len() });
    }
    let cols: Vec<Vec<ExtendedReal>> = (0..n).map(|i| batch.column(i)).collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let prods: Vec<f64> = cols[i].iter().zip(&cols[j]).map(|(a, b)| a.phi() * b.phi()).collect();
            let phi_product = prods.iter().sum::<f64>() / prods.len() as f64;
            let rho = spearman(&cols[i], &cols[j]);
            let prev = previous.and_then(|p| p.pairs.iter().find(|s| s.i == i && s.j == j));
            pairs.push(PairStat {
                i,
                j,
                phi_product,
                spearman: rho,
                delta_phi_product: prev.map(|p| (phi_product - p.phi_product).abs()),
                delta_spearman: prev.map(|p| (rho - p.spearman).abs()),
            });
        }
    }
    let ks = cols
        .iter()
        .zip(laws)
        .map(|(c, law)| ks_dkw(&EmpiricalMeasure::new(c.clone()), law, alpha))
        .collect::<Result<_>>()?;
    Ok(ConvergenceRow { level, pairs, ks, order_fraction: order_fraction(batch) })
}
