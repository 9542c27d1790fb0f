//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use comonoflow::exactchain::{
    discrete_comonotone_step, expm, independent_joint, iterate_joint_exact, kernel_w1_distance, kirstein_monotone,
    supermodular_expect,
};
use comonoflow::stats::{convergence_diag, equicontinuity_check, library};
use comonoflow::{
    dyadic_decompose, quantile, transition_cdf, BrownianParams, CirParams, ExtendedReal, QMatrix, SemigroupModel,
    TransitionMatrix,
};
use comonoflow_cli::commands::cmd_counterexample;
use comonoflow_cli::{Outcome, RunArgs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn fin(v: f64) -> ExtendedReal {
    ExtendedReal::Finite(v)
}

fn cir() -> SemigroupModel {
    SemigroupModel::Cir(CirParams::new(3.0, 2.0, 8.0).unwrap())
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: f64, detail: String) -> Verdict {
    check(elapsed.as_secs_f64() < limit, format!("{detail}; {:.2} s (limit {limit} s)", elapsed.as_secs_f64()))
}

fn random_stochastic(rng: &mut impl Rng, s: usize) -> TransitionMatrix {
    let rows = (0..s)
        .map(|_| {
            let raw: Vec<f64> = (0..s).map(|_| rng.gen::<f64>().powi(2)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|v| v / total).collect()
        })
        .collect();
    TransitionMatrix::from_rows(rows).unwrap()
}

/// Counterexample reproduction through the subcommand.
fn counterexample() -> Verdict {
    let start = Instant::now();
    let mut buf: Vec<u8> = Vec::new();
    let outcome = cmd_counterexample(1.0, None, &mut buf).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let text = String::from_utf8(buf).unwrap();
    let value = |prefix: &str| -> Option<f64> {
        text.lines().find_map(|l| l.strip_prefix(prefix)).and_then(|v| v.trim().parse().ok())
    };
    let pa = value("P(X1 <= a | X0 = a, X2 = a) = ").ok_or("missing P(a->a)")?;
    let pb = value("P(Y1 <= a | Y0 = b, Y2 = b) = ").ok_or("missing P(b->b)")?;
    let summary = "monotone: true; P(a→a)=0.362; P(b→b)=0.374; violation: true";
    let ok = (pa - 0.362).abs() <= 0.0005
        && (pb - 0.374).abs() <= 0.0005
        && text.contains(summary)
        && text.contains("VIOLATION CONFIRMED")
        && outcome == Outcome::Success;
    if !ok {
        return Err(format!("unexpected report:\n{text}"));
    }
    within(elapsed, 1.0, format!("P(a→a) = {pa:.6}, P(b→b) = {pb:.6}, Kirstein monotone, violation flagged"))
}

/// Five-state monotone chain: nearest-neighbour rates plus jumps of two.
fn five_state_generator() -> QMatrix {
    let up = [1.0, 0.8, 1.2, 0.6];
    let down = [0.7, 0.9, 0.5, 1.1];
    let mut rows = vec![vec![0.0; 5]; 5];
    for i in 0..4 {
        rows[i][i + 1] = up[i];
        rows[i + 1][i] = down[i];
    }
    for i in 0..3 {
        rows[i][i + 2] = 0.2;
        rows[i + 2][i] = 0.15;
    }
    QMatrix::from_off_diagonal(rows, Some(vec![-1.0, -0.5, 0.0, 0.5, 1.0])).unwrap()
}

/// `E_indep <= E_iterate(m) <= E_one-step` exactly on a finite chain.
fn exact_dominance_chain() -> Verdict {
    let start = Instant::now();
    let q = five_state_generator();
    if !kirstein_monotone(&q).monotone {
        return Err("test chain is not monotone".into());
    }
    let labels = q.labels().to_vec();
    let fns = library();
    let t = 0.5;
    let p = expm(&q, t).map_err(|e| e.to_string())?;
    let steps: Vec<TransitionMatrix> = (1..=4).map(|m| expm(&q, t / 2f64.powi(m)).unwrap()).collect();
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for x in 0..5 {
        for y in 0..5 {
            let indep = independent_joint(&p, x, y).unwrap();
            let one = discrete_comonotone_step(&p, x, y).unwrap();
            for (m, step) in (1..=4u32).zip(&steps) {
                let it = iterate_joint_exact(step, x, y, 1 << m).unwrap();
                for f in &fns {
                    let e = |j| supermodular_expect(j, |a, b| f.pair(a, b), &labels).unwrap();
                    let (ei, eit, eo) = (e(&indep), e(&it), e(&one));
                    worst = worst.min(eit - ei).min(eo - eit);
                    checked += 2;
                }
            }
        }
    }
    if worst < -1e-10 {
        return Err(format!("worst slack {worst:e} over {checked} inequalities"));
    }
    within(start.elapsed(), 5.0, format!("{checked} inequalities, worst slack {worst:e}"))
}

/// `sup_x W1(KL(x,.), KM(x,.)) <= sup_x W1(L(x,.), M(x,.))`.
fn contraction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let s = rng.gen_range(3..=6);
        let mut labels: Vec<f64> = (0..s).map(|_| rng.gen_range(-2.0..2.0)).collect();
        labels.sort_by(f64::total_cmp);
        let (k, l, m) = (random_stochastic(&mut rng, s), random_stochastic(&mut rng, s), random_stochastic(&mut rng, s));
        let lhs = kernel_w1_distance(&k.compose(&l), &k.compose(&m), &labels).unwrap();
        let rhs = kernel_w1_distance(&l, &m, &labels).unwrap();
        worst = worst.max(lhs - rhs);
    }
    check(worst <= 1e-10, format!("100 triples, max(lhs - rhs) = {worst:e}"))
}

/// Order compatibility, marginal KS and shrinking deltas for the CIR run.
fn cir_simulation() -> Verdict {
    let start = Instant::now();
    let cfg = RunArgs::default().resolve().map_err(|e| e.to_string())?;
    let rows = convergence_diag(&cfg.model, &cfg.starts, cfg.time, cfg.levels.clone(), cfg.n, cfg.seed, 0.01)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let levels: Vec<u32> = rows.iter().map(|r| r.level).collect();
    if levels != [1, 2, 3, 4, 5, 6] || cfg.n != 5000 || cfg.time.value() != 0.5 {
        return Err(format!("unexpected defaults: levels {levels:?}, n {}", cfg.n));
    }
    let orders_ok = rows.iter().all(|r| r.order_fraction == 1.0);
    let ks_ok = rows.iter().all(|r| r.ks.iter().all(|k| k.pass));
    let worst_ks = rows.iter().flat_map(|r| r.ks.iter().map(|k| k.statistic)).fold(0.0, f64::max);
    let d12 = rows[1].pairs[0].delta_phi_product.unwrap();
    let d56 = rows[5].pairs[0].delta_phi_product.unwrap();
    let detail = format!(
        "order fraction 1.0 at all m: {orders_ok}; KS max D = {worst_ks:.4} vs bound {:.4}; |Δ(1→2)| = {d12:.3e}, |Δ(5→6)| = {d56:.3e}",
        rows[0].ks[0].bound
    );
    if !(orders_ok && ks_ok && d56 < d12) {
        return Err(detail);
    }
    within(elapsed, 60.0, detail)
}

fn equicontinuity() -> Verdict {
    let rep = equicontinuity_check(
        &cir(),
        &[fin(0.5), fin(2.0)],
        &[fin(1.0), fin(3.0)],
        dyadic_decompose(1, 1).unwrap(),
        4,
        5000,
        20_240_601,
    )
    .map_err(|e| e.to_string())?;
    check(
        rep.pass,
        format!("estimate {:.5} <= bound {:.5} + 3 x SE {:.5}", rep.estimate, rep.rhs, rep.std_error),
    )
}

fn quantile_round_trip() -> Verdict {
    let models = [cir(), SemigroupModel::Brownian(BrownianParams::new(0.0, 1.0).unwrap())];
    let mut worst: f64 = 0.0;
    for model in &models {
        for &t in &[0.25, 0.5, 1.0] {
            for &x in &[0.5, 2.0] {
                for k in 1..=99 {
                    let u = k as f64 / 100.0;
                    let y = quantile(model, fin(x), t, u).map_err(|e| e.to_string())?;
                    let back = transition_cdf(model, fin(x), t, y.to_f64()).map_err(|e| e.to_string())?;
                    worst = worst.max((back - u).abs());
                }
            }
        }
    }
    check(worst <= 1e-8, format!("max |F(F^-1(u)) - u| = {worst:e} over 1188 points"))
}

/// Joint law of `(F_x^{-1}(u), F_y^{-1}(u))` over the midpoint grid.
fn ugrid_oracle(px: &[f64], py: &[f64], n: usize) -> Vec<Vec<f64>> {
    let s = px.len();
    let cum = |p: &[f64]| p.iter().scan(0.0, |a, v| { *a += v; Some(*a) }).collect::<Vec<f64>>();
    let (fx, fy) = (cum(px), cum(py));
    let inv = |f: &[f64], u: f64| f.iter().position(|c| u <= *c).unwrap_or(s - 1);
    let mut mass = vec![vec![0.0; s]; s];
    for k in 0..n {
        let u = (k as f64 + 0.5) / n as f64;
        mass[inv(&fx, u)][inv(&fy, u)] += 1.0;
    }
    mass.iter().map(|r| r.iter().map(|c| c / n as f64).collect()).collect()
}

fn comonotone_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s = rng.gen_range(4..=6);
        let p = random_stochastic(&mut rng, s);
        let (x, y) = (rng.gen_range(0..s), rng.gen_range(0..s));
        let exact = discrete_comonotone_step(&p, x, y).unwrap();
        let grid = ugrid_oracle(&p.row(x), &p.row(y), 1_000_000);
        let tv: f64 = (0..s)
            .flat_map(|i| (0..s).map(move |j| (i, j)))
            .map(|(i, j)| (exact.get(i, j) - grid[i][j]).abs())
            .sum::<f64>()
            / 2.0;
        worst = worst.max(tv);
    }
    check(worst <= 1e-5, format!("50 row pairs, max TV = {worst:e}"))
}

fn simulate_csvs(dir: &Path, threads: Option<&str>) -> Result<Vec<Vec<u8>>, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_comonoflow"));
    if let Some(t) = threads {
        cmd.args(["--threads", t]);
    }
    let out = cmd
        .args(["simulate", "--n", "1000", "--seed", "77", "--out"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    (1..=6)
        .map(|m| std::fs::read(dir.join(format!("simulate_m{m}.csv"))).map_err(|e| e.to_string()))
        .collect()
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [("default pool", None), ("1 thread", Some("1")), ("4 threads", Some("4")), ("repeat", None)];
    let mut outputs = Vec::new();
    for (i, (_, threads)) in runs.iter().enumerate() {
        outputs.push(simulate_csvs(&tmp.path().join(format!("run{i}")), *threads)?);
    }
    let identical = outputs.iter().all(|o| *o == outputs[0]);
    let bytes: usize = outputs[0].iter().map(Vec::len).sum();
    let names: Vec<&str> = runs.iter().map(|r| r.0).collect();
    check(identical, format!("6 CSVs ({bytes} bytes) identical across {}", names.join(", ")))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("counterexample reproduction", counterexample),
        ("exact dominance chain", exact_dominance_chain),
        ("contraction lemma", contraction),
        ("CIR simulation reproduction", cir_simulation),
        ("equicontinuity bound", equicontinuity),
        ("quantile round trip", quantile_round_trip),
        ("discrete comonotone oracle", comonotone_oracle),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
