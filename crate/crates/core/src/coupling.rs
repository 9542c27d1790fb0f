//! Monte Carlo construction of the comonotone coupling kernel, its dyadic
//! iterates and the reference couplings.
//!
//! One comonotone step at time `t` sends `x = (x_1, ..., x_n)` to
//! `(F^{-1}_{x_1,t}(U), ..., F^{-1}_{x_n,t}(U))` with a single uniform `U`.
//! The level-`m` iterate at dyadic time `t = k 2^{-m0}` composes
//! `k 2^{m - m0}` such steps of size `2^{-m}`, each with a fresh uniform.
//!
//! Replicate `r` of a batch draws from its own ChaCha stream
//! `(seed, stream = r)`, so batches are bit-identical whatever the thread
//! count or evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extended::{order_compatible, ExtendedReal};
use crate::kernels::{quantile, SemigroupModel};

/// Largest number of coordinates a batch may carry.
pub const MAX_DIM: usize = 64;

/// `t = k 2^{-m0}` with `m0` minimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicTime {
    k: u64,
    m0: u32,
}

impl DyadicTime {
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn m0(&self) -> u32 {
        self.m0
    }

    pub fn value(&self) -> f64 {
        self.k as f64 / 2f64.powi(self.m0 as i32)
    }

    /// Number of composed steps at `level`: `k 2^{level - m0}`.
    pub fn steps_at(&self, level: u32) -> Result<u64> {
        if level < self.m0 {
            return Err(Error::Config(format!("level {level} is below m0 = {}", self.m0)));
        }
        let shift = level - self.m0;
        if shift >= 63 || self.k.leading_zeros() <= shift {
            return Err(Error::Config(format!("level {level} overflows the step count")));
        }
        Ok(self.k << shift)
    }

    /// Step size `2^{-level}`.
    pub fn step_at(level: u32) -> f64 {
        2f64.powi(-(level as i32))
    }
}

impl std::fmt::Display for DyadicTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/2^{}", self.k, self.m0)
    }
}

/// Reduces `numerator / 2^log2_denominator` to lowest dyadic terms.
pub fn dyadic_decompose(numerator: i64, log2_denominator: i64) -> Result<DyadicTime> {
    if numerator < 1 {
        return Err(Error::Domain(format!("dyadic numerator must be >= 1, got {numerator}")));
    }
    if !(0..=62).contains(&log2_denominator) {
        return Err(Error::Domain(format!(
            "log2 denominator must lie in 0..=62, got {log2_denominator}"
        )));
    }
    let mut k = numerator as u64;
    let mut m0 = log2_denominator as u32;
    while m0 > 0 && k.is_multiple_of(2) {
        k /= 2;
        m0 -= 1;
    }
    Ok(DyadicTime { k, m0 })
}

#[derive(Debug, Clone)]
pub struct CouplingConfig {
    pub model: SemigroupModel,
    pub starts: Vec<ExtendedReal>,
    pub time: DyadicTime,
    pub level: u32,
    pub n_samples: usize,
    pub seed: u64,
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        check_starts(&self.starts)?;
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        self.time.steps_at(self.level)?;
        Ok(())
    }
}

fn check_starts(starts: &[ExtendedReal]) -> Result<()> {
    if starts.is_empty() || starts.len() > MAX_DIM {
        return Err(Error::Config(format!(
            "need between 1 and {MAX_DIM} starting points, got {}",
            starts.len()
        )));
    }
    Ok(())
}

/// How a batch was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchKind {
    /// Level-`level` comonotone iterate at a dyadic time.
    Iterate { time: DyadicTime, level: u32 },
    /// A single comonotone step.
    OneStep { t: f64 },
    /// Independent coordinates.
    Independent { t: f64 },
    /// Shared Brownian increment.
    Parallel { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchMeta {
    pub model: &'static str,
    pub kind: BatchKind,
}

/// `N` replicates of an `n`-dimensional coupled draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub starts: Vec<ExtendedReal>,
    pub values: Vec<Vec<ExtendedReal>>,
    pub seed: u64,
    pub meta: BatchMeta,
}

impl SampleBatch {
    pub fn dim(&self) -> usize {
        self.starts.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn column(&self, i: usize) -> Vec<ExtendedReal> {
        self.values.iter().map(|row| row[i]).collect()
    }

    /// Nominal time horizon of the batch.
    pub fn time(&self) -> f64 {
        match &self.meta.kind {
            BatchKind::Iterate { time, .. } => time.value(),
            BatchKind::OneStep { t } | BatchKind::Independent { t } | BatchKind::Parallel { t } => *t,
        }
    }

    pub fn is_order_compatible(&self, row: usize) -> bool {
        order_compatible(&self.starts, &self.values[row])
    }
}

/// Counter-derived substream for replicate `replicate`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

const U_MIN: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53

/// A uniform on the open unit interval, clamped to `[2^-53, 1 - 2^-53]`.
pub fn open_uniform(rng: &mut impl RngCore) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * U_MIN;
    u.clamp(U_MIN, 1.0 - U_MIN)
}

/// One comonotone step: every coordinate is pushed through its own
/// quantile function at the shared level `u`.
pub fn comonotone_step(
    model: &SemigroupModel,
    starts: &[ExtendedReal],
    t: f64,
    u: f64,
) -> Result<Vec<ExtendedReal>> {
    let mut out: Vec<ExtendedReal> = Vec::with_capacity(starts.len());
    for (i, x) in starts.iter().enumerate() {
        // equal starts share one evaluation
        let v = match starts[..i].iter().position(|p| p == x) {
            Some(j) => out[j],
            None => quantile(model, *x, t, u)?,
        };
        out.push(v);
    }
    // Quantiles are only resolved to the bisection tolerance; a running
    // maximum along the order of the starts keeps near-ties from crossing.
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|a, b| starts[*a].cmp(&starts[*b]));
    for w in 1..order.len() {
        let (prev, cur) = (order[w - 1], order[w]);
        if out[cur] < out[prev] {
            out[cur] = out[prev];
        }
    }
    Ok(out)
}

fn compose_steps(
    model: &SemigroupModel,
    starts: &[ExtendedReal],
    step: f64,
    count: u64,
    rng: &mut impl RngCore,
) -> Result<Vec<ExtendedReal>> {
    let mut state = starts.to_vec();
    for _ in 0..count {
        let u = open_uniform(rng);
        state = comonotone_step(model, &state, step, u)?;
    }
    Ok(state)
}

/// One draw from the level-`config.level` iterate.
pub fn iterate_sample(config: &CouplingConfig, rng: &mut impl RngCore) -> Result<Vec<ExtendedReal>> {
    check_starts(&config.starts)?;
    let count = config.time.steps_at(config.level)?;
    compose_steps(&config.model, &config.starts, DyadicTime::step_at(config.level), count, rng)
}

fn run_replicates(
    n: usize,
    seed: u64,
    draw: impl Fn(&mut ChaCha8Rng) -> Result<Vec<ExtendedReal>> + Sync,
) -> Result<Vec<Vec<ExtendedReal>>> {
    (0..n as u64)
        .into_par_iter()
        .map(|r| draw(&mut replicate_rng(seed, r)))
        .collect()
}

/// `N` independent replicates of [`iterate_sample`].
pub fn sample_batch(config: &CouplingConfig) -> Result<SampleBatch> {
    config.validate()?;
    let values = run_replicates(config.n_samples, config.seed, |rng| iterate_sample(config, rng))?;
    Ok(SampleBatch {
        starts: config.starts.clone(),
        values,
        seed: config.seed,
        meta: BatchMeta {
            model: config.model.name(),
            kind: BatchKind::Iterate { time: config.time, level: config.level },
        },
    })
}

fn check_batch_args(starts: &[ExtendedReal], t: f64, n: usize) -> Result<()> {
    check_starts(starts)?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if n == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    Ok(())
}

/// `N` draws of a single comonotone step at time `t`.
pub fn one_step_batch(
    model: &SemigroupModel,
    starts: &[ExtendedReal],
    t: f64,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_batch_args(starts, t, n)?;
    let values = run_replicates(n, seed, |rng| compose_steps(model, starts, t, 1, rng))?;
    Ok(SampleBatch {
        starts: starts.to_vec(),
        values,
        seed,
        meta: BatchMeta { model: model.name(), kind: BatchKind::OneStep { t } },
    })
}

/// `N` draws of the product coupling: each coordinate uses its own uniform.
pub fn independent_batch(
    model: &SemigroupModel,
    starts: &[ExtendedReal],
    t: f64,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    check_batch_args(starts, t, n)?;
    let values = run_replicates(n, seed, |rng| {
        starts
            .iter()
            .map(|x| quantile(model, *x, t, open_uniform(rng)))
            .collect()
    })?;
    Ok(SampleBatch {
        starts: starts.to_vec(),
        values,
        seed,
        meta: BatchMeta { model: model.name(), kind: BatchKind::Independent { t } },
    })
}

/// `N` draws of the parallel coupling `X^x_t = x + X^0_t` for Brownian
/// motion: every coordinate receives the same increment.
pub fn parallel_batch(
    model: &SemigroupModel,
    starts: &[ExtendedReal],
    t: f64,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if !matches!(model, SemigroupModel::Brownian(_)) {
        return Err(Error::UnsupportedModel(format!(
            "parallel coupling needs a Brownian model, got {}",
            model.name()
        )));
    }
    check_batch_args(starts, t, n)?;
    let values = run_replicates(n, seed, |rng| {
        let inc = quantile(model, ExtendedReal::ZERO, t, open_uniform(rng))?
            .finite()
            .expect("finite start has finite quantile");
        Ok(starts
            .iter()
            .map(|x| match x {
                ExtendedReal::Finite(v) => ExtendedReal::Finite(v + inc),
                inf => *inf,
            })
            .collect())
    })?;
    Ok(SampleBatch {
        starts: starts.to_vec(),
        values,
        seed,
        meta: BatchMeta { model: model.name(), kind: BatchKind::Parallel { t } },
    })
}
