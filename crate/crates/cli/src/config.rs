//! Run configuration: command-line flags layered over an optional JSON file.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use comonoflow::exactchain::parse_qmatrix;
use comonoflow::stats::MAX_LEVEL;
use comonoflow::{dyadic_decompose, BrownianParams, ChainModel, CirParams, DyadicTime, ExtendedReal, SemigroupModel};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cir,
    Brownian,
    Chain,
}

/// Flags shared by the Monte Carlo subcommands. Every field is optional so
/// that unset flags fall through to the `--config` file, then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// CIR mean-reversion speed.
    #[arg(long)]
    pub a: Option<f64>,
    /// CIR long-run mean.
    #[arg(long)]
    pub b: Option<f64>,
    /// CIR squared volatility.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Brownian drift.
    #[arg(long, allow_hyphen_values = true)]
    pub drift: Option<f64>,
    /// Brownian volatility.
    #[arg(long)]
    pub vol: Option<f64>,
    /// Generator file for `--model chain`.
    #[arg(long)]
    pub qmatrix: Option<PathBuf>,
    /// Comma-separated starting points; `inf` and `-inf` are allowed.
    #[arg(long, allow_hyphen_values = true)]
    pub starts: Option<String>,
    /// Rejected: times must be dyadic. Prints the nearest dyadic pair.
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Numerator k of the dyadic time k / 2^m0.
    #[arg(long, allow_hyphen_values = true)]
    pub t_num: Option<i64>,
    /// Exponent m0 of the dyadic time k / 2^m0.
    #[arg(long, allow_hyphen_values = true)]
    pub t_log2den: Option<i64>,
    /// A single refinement level.
    #[arg(long)]
    pub m: Option<u32>,
    /// An inclusive range of levels, `LO:HI`.
    #[arg(long)]
    pub m_range: Option<String>,
    /// Replicates per level.
    #[arg(long)]
    pub n: Option<usize>,
    /// Base seed; replicate r draws from stream r of this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// DKW significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output directory for `simulate`, output file for `converge` and `dominance`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON object whose keys mirror the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub model: Option<ModelKind>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub sigma2: Option<f64>,
    pub drift: Option<f64>,
    pub vol: Option<f64>,
    pub qmatrix: Option<PathBuf>,
    pub starts: Option<Starts>,
    pub t: Option<f64>,
    pub t_num: Option<i64>,
    pub t_log2den: Option<i64>,
    pub m: Option<u32>,
    pub m_range: Option<String>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub out: Option<PathBuf>,
}

/// Starting points in a config file: a JSON array or the flag syntax.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Starts {
    Numbers(Vec<f64>),
    Text(String),
}

/// Defaults reproduce the CIR experiment: `a = 3`, `b = 2`, `sigma^2 = 8`,
/// starts `0.5, 2`, `t = 1/2`, `N = 5000`, `m = 1..=6`.
pub mod defaults {
    pub const A: f64 = 3.0;
    pub const B: f64 = 2.0;
    pub const SIGMA2: f64 = 8.0;
    pub const DRIFT: f64 = 0.0;
    pub const VOL: f64 = 1.0;
    pub const STARTS: &str = "0.5,2";
    pub const T_NUM: i64 = 1;
    pub const T_LOG2DEN: i64 = 1;
    pub const M_RANGE: (u32, u32) = (1, 6);
    pub const N: usize = 5000;
    pub const SEED: u64 = 20_240_601;
    pub const ALPHA: f64 = 0.01;
}

/// A fully resolved and validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: SemigroupModel,
    pub starts: Vec<ExtendedReal>,
    pub time: DyadicTime,
    pub levels: RangeInclusive<u32>,
    pub n: usize,
    pub seed: u64,
    pub alpha: f64,
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Layers flags over the config file over defaults and validates.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => load_config(path)?,
            None => ConfigFile::default(),
        };
        let base_dir = self.config.as_deref().and_then(Path::parent).map(Path::to_path_buf);

        if let Some(t) = self.t.or(file.t) {
            return Err(CliError::Input(non_dyadic_message(t)));
        }

        let kind = self.model.or(file.model).unwrap_or(ModelKind::Cir);
        let model = match kind {
            ModelKind::Cir => SemigroupModel::Cir(CirParams::new(
                self.a.or(file.a).unwrap_or(defaults::A),
                self.b.or(file.b).unwrap_or(defaults::B),
                self.sigma2.or(file.sigma2).unwrap_or(defaults::SIGMA2),
            )?),
            ModelKind::Brownian => SemigroupModel::Brownian(BrownianParams::new(
                self.drift.or(file.drift).unwrap_or(defaults::DRIFT),
                self.vol.or(file.vol).unwrap_or(defaults::VOL),
            )?),
            ModelKind::Chain => {
                let path = match (&self.qmatrix, &file.qmatrix) {
                    (Some(p), _) => p.clone(),
                    (None, Some(p)) => relative_to(base_dir.as_deref(), p),
                    (None, None) => return Err(CliError::Input("--model chain needs --qmatrix PATH".into())),
                };
                SemigroupModel::Chain(ChainModel::new(read_qmatrix(&path)?))
            }
        };

        let starts = match (&self.starts, &file.starts) {
            (Some(s), _) => parse_starts(s)?,
            (None, Some(Starts::Text(s))) => parse_starts(s)?,
            (None, Some(Starts::Numbers(v))) => v
                .iter()
                .map(|x| ExtendedReal::new(*x).map_err(CliError::from))
                .collect::<Result<_, _>>()?,
            (None, None) => parse_starts(defaults::STARTS)?,
        };

        let time = dyadic_decompose(
            self.t_num.or(file.t_num).unwrap_or(defaults::T_NUM),
            self.t_log2den.or(file.t_log2den).unwrap_or(defaults::T_LOG2DEN),
        )?;

        let levels = resolve_levels(
            self.m.or(file.m),
            self.m_range.as_deref().or(file.m_range.as_deref()),
        )?;
        if *levels.start() < time.m0() {
            return Err(CliError::Input(format!(
                "level {} is coarser than the time {time}: levels must be at least {}",
                levels.start(),
                time.m0()
            )));
        }

        let n = self.n.or(file.n).unwrap_or(defaults::N);
        if n == 0 {
            return Err(CliError::Input("--n must be at least 1".into()));
        }
        let alpha = self.alpha.or(file.alpha).unwrap_or(defaults::ALPHA);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::Input(format!("--alpha must lie in (0,1), got {alpha}")));
        }
        let out = match (&self.out, &file.out) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(p)) => Some(relative_to(base_dir.as_deref(), p)),
            (None, None) => None,
        };

        Ok(RunConfig {
            model,
            starts,
            time,
            levels,
            n,
            seed: self.seed.or(file.seed).unwrap_or(defaults::SEED),
            alpha,
            out,
        })
    }
}

fn relative_to(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_qmatrix(path: &Path) -> Result<comonoflow::QMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_qmatrix(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Parses `v1,v2,...`; `inf`, `+inf` and `-inf` denote the added points.
pub fn parse_starts(text: &str) -> Result<Vec<ExtendedReal>, CliError> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| CliError::Input(format!("cannot parse starting point {tok:?}")))?;
            Ok(ExtendedReal::new(v)?)
        })
        .collect()
}

fn resolve_levels(m: Option<u32>, range: Option<&str>) -> Result<RangeInclusive<u32>, CliError> {
    let levels = match (m, range) {
        (Some(_), Some(_)) => return Err(CliError::Input("give either --m or --m-range, not both".into())),
        (Some(m), None) => m..=m,
        (None, Some(r)) => {
            let bad = || CliError::Input(format!("--m-range expects LO:HI, got {r:?}"));
            let (lo, hi) = r.split_once(':').ok_or_else(bad)?;
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            lo..=hi
        }
        (None, None) => defaults::M_RANGE.0..=defaults::M_RANGE.1,
    };
    if *levels.end() > MAX_LEVEL {
        return Err(CliError::Input(format!("levels above {MAX_LEVEL} are not supported")));
    }
    Ok(levels)
}

/// Explains why a decimal time is refused and names the closest dyadic
/// time with denominator at most `2^MAX_LEVEL`.
pub fn non_dyadic_message(t: f64) -> String {
    let scale = 2f64.powi(MAX_LEVEL as i32);
    if !(t.is_finite() && t > 0.0) {
        return format!("time must be a positive dyadic number k/2^m0, got {t}");
    }
    let k = ((t * scale).round() as i64).max(1);
    match dyadic_decompose(k, MAX_LEVEL as i64) {
        Ok(d) => {
            let exact = if d.value() == t { "equals" } else { "is not dyadic; the nearest dyadic time is" };
            format!(
                "times are given as dyadic pairs, not decimals: {t} {exact} {} = {}; pass --t-num {} --t-log2den {}",
                d,
                d.value(),
                d.k(),
                d.m0()
            )
        }
        Err(e) => format!("time {t} cannot be expressed as a dyadic pair: {e}"),
    }
}
