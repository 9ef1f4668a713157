//! The `run`, `sweep`, `oracle` and `probe` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use autobid::oracle::{candidate_moments, metrics, solve_opt, MetricsReport, Moments, OptSolution};
use autobid::orchestrator::{run_exact_roi, run_primal_dual, RunTrace};
use autobid::policies::{BucketBanditPolicy, FixedPolicy, Policy, PolyPolicy, TreePolicy};
use autobid::probe::{default_suites, SuiteReport};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, PolicySpec};
use crate::error::{CliError, Result};
use crate::output::{fmt_num, trace_csv};

/// Benchmark for one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub horizon: usize,
    pub solution: OptSolution,
    /// Label of every candidate, indexed like `solution.mixture`.
    pub labels: Vec<String>,
}

impl Benchmark {
    pub fn opt(&self) -> f64 {
        self.solution.value
    }
}

pub fn benchmark(cfg: &ExperimentConfig, horizon: usize) -> Result<Benchmark> {
    let atoms = cfg.env.atoms_for(horizon, cfg.oracle.resolution)?;
    let cands = candidate_moments(&cfg.oracle.candidates, &atoms, cfg.rule, cfg.objective)?;
    let moments: Vec<Moments> = cands.iter().map(|c| c.1).collect();
    let solution = solve_opt(&moments, cfg.rho)?;
    Ok(Benchmark {
        horizon,
        solution,
        labels: cands.into_iter().map(|c| c.0).collect(),
    })
}

fn build_policy(cfg: &ExperimentConfig, horizon: usize) -> Result<Box<dyn Policy>> {
    Ok(match &cfg.policy {
        PolicySpec::Tree {
            lipschitz,
            depth_cap,
            cover_cap,
            restart_grid,
            goodness_check,
        } => Box::new(
            TreePolicy::new(*lipschitz, horizon, *depth_cap, *cover_cap, *restart_grid)?
                .with_goodness_check(*goodness_check),
        ),
        PolicySpec::BucketBandit { lipschitz } => {
            Box::new(BucketBanditPolicy::new(*lipschitz, horizon)?)
        }
        PolicySpec::Poly {
            lipschitz,
            restart_grid,
        } => Box::new(PolyPolicy::new(*lipschitz, horizon, *restart_grid)?),
        PolicySpec::Fixed { function } => Box::new(FixedPolicy::new(function.clone())?),
    })
}

/// One seeded run at `horizon`. Exact-ROI runs whose prefix ROI slack goes
/// negative are reported as invariant failures.
pub fn simulate(cfg: &ExperimentConfig, horizon: usize, seed: u64) -> Result<RunTrace> {
    let env = cfg.env.build(horizon)?;
    let spec = cfg.run_spec(horizon, seed);
    let mut primal = build_policy(cfg, horizon)?;
    let mut trace = if cfg.exact_roi {
        let mut slack = build_policy(cfg, horizon)?;
        run_exact_roi(&env, primal.as_mut(), slack.as_mut(), &spec)?
    } else {
        run_primal_dual(&env, primal.as_mut(), &spec)?
    };
    if cfg.exact_roi && trace.min_roi_slack() < 0.0 {
        return Err(CliError::Invariant(format!(
            "seed {seed}: prefix ROI slack reached {}",
            trace.min_roi_slack()
        )));
    }
    if let PolicySpec::Tree {
        depth_cap,
        cover_cap,
        ..
    } = cfg.policy
    {
        trace
            .metadata
            .push(("depth_cap".into(), depth_cap.to_string()));
        trace
            .metadata
            .push(("cover_cap".into(), cover_cap.to_string()));
    }
    Ok(trace)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub trace: RunTrace,
    pub metrics: MetricsReport,
    pub seconds: f64,
}

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Validation(vec![format!("threads: {e}")]))
}

/// Runs every seed of the config at its horizon.
pub fn cmd_run(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<(Benchmark, Vec<RunOutcome>)> {
    cfg.validate()?;
    let bench = benchmark(cfg, cfg.horizon)?;
    let seeds = cfg.seeds.to_vec();
    let outcomes = thread_pool(threads)?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let start = Instant::now();
                let trace = simulate(cfg, cfg.horizon, seed)?;
                let metrics = metrics(&trace, bench.opt());
                Ok(RunOutcome {
                    seed,
                    trace,
                    metrics,
                    seconds: start.elapsed().as_secs_f64(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok((bench, outcomes))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

fn describe_benchmark(out: &mut String, bench: &Benchmark, cfg: &ExperimentConfig) {
    let s = &bench.solution;
    let _ = writeln!(out, "[benchmark]");
    let _ = writeln!(out, "horizon = {}", bench.horizon);
    let _ = writeln!(out, "opt = {}", fmt_num(s.value));
    let _ = writeln!(out, "payment = {}", fmt_num(s.payment));
    let _ = writeln!(out, "roi = {}", fmt_num(s.roi));
    let _ = writeln!(out, "budget_binding = {}", s.budget_binding);
    let _ = writeln!(out, "roi_binding = {}", s.roi_binding);
    let _ = writeln!(out, "candidates = {}", bench.labels.len());
    let _ = writeln!(out, "resolution = {}", fmt_num(cfg.oracle.resolution));
    for (i, w) in &s.mixture {
        let _ = writeln!(out, "mixture.{} = {}", bench.labels[*i], fmt_num(*w));
    }
}

/// Human-readable summary of a run command.
pub fn run_summary(cfg: &ExperimentConfig, bench: &Benchmark, outcomes: &[RunOutcome]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config\n{}", cfg.render());
    describe_benchmark(&mut out, bench, cfg);
    for o in outcomes {
        let m = &o.metrics;
        let _ = writeln!(out, "\n[seed {}]", o.seed);
        let _ = writeln!(out, "cum_objective = {}", fmt_num(m.cum_objective));
        let _ = writeln!(out, "regret = {}", fmt_num(m.regret));
        let _ = writeln!(out, "min_roi_slack = {}", fmt_num(m.min_roi_slack));
        let _ = writeln!(out, "max_roi_violation = {}", fmt_num(m.max_roi_violation));
        let _ = writeln!(out, "budget = {}", fmt_num(m.budget));
        let _ = writeln!(out, "spent = {}", fmt_num(m.spent));
        let w = &m.worst_interval;
        let _ = writeln!(
            out,
            "worst_interval = {}..{} ({})",
            w.start,
            w.end,
            fmt_num(w.value)
        );
        let _ = writeln!(out, "runtime_s = {:.3}", o.seconds);
        for (k, v) in &o.trace.metadata {
            let _ = writeln!(out, "metadata.{k} = {v}");
        }
    }
    out
}

/// Writes one CSV per seed and `summary.txt` into `dir`.
pub fn write_run(
    dir: &Path,
    cfg: &ExperimentConfig,
    bench: &Benchmark,
    outcomes: &[RunOutcome],
) -> Result<()> {
    create_dir(dir)?;
    for o in outcomes {
        write_file(&trace_path(dir, o.seed), &trace_csv(&o.trace))?;
    }
    write_file(&dir.join("summary.txt"), &run_summary(cfg, bench, outcomes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub horizon: usize,
    pub seeds: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
}

/// Least-squares fit of `ln(mean regret) = intercept + slope ln T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `(horizon, seed, regret)` of every run.
    pub runs: Vec<(usize, u64, f64)>,
    pub fit: Option<SlopeFit>,
    pub notes: Vec<String>,
}

/// Fits the log-log slope, skipping horizons whose mean regret is not
/// positive.
pub fn fit_loglog(rows: &[SweepRow]) -> (Option<SlopeFit>, Vec<String>) {
    let mut notes = Vec::new();
    let mut pts = Vec::new();
    for r in rows {
        if r.mean_regret > 0.0 {
            pts.push(((r.horizon as f64).ln(), r.mean_regret.ln()));
        } else {
            notes.push(format!(
                "T={}: mean regret {} is not positive, excluded from the fit",
                r.horizon,
                fmt_num(r.mean_regret)
            ));
        }
    }
    if pts.len() < 2 {
        notes.push(format!(
            "only {} usable horizons, no slope fitted",
            pts.len()
        ));
        return (None, notes);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        notes.push("all usable horizons are equal, no slope fitted".into());
        return (None, notes);
    }
    let slope = sxy / sxx;
    let fit = SlopeFit {
        slope,
        intercept: my - slope * mx,
        points: pts.len(),
    };
    (Some(fit), notes)
}

/// Evaluates `regret(T, seed)` on every pair, in parallel, and aggregates
/// per horizon.
pub fn sweep_with<F>(
    horizons: &[usize],
    seeds: &[u64],
    threads: Option<usize>,
    regret: F,
) -> Result<SweepReport>
where
    F: Fn(usize, u64) -> Result<f64> + Sync,
{
    if horizons.len() < 2 || seeds.len() < 2 {
        return Err(CliError::Validation(vec![format!(
            "a sweep needs at least 2 horizons and 2 seeds (got {} and {})",
            horizons.len(),
            seeds.len()
        )]));
    }
    let pairs: Vec<(usize, u64)> = horizons
        .iter()
        .flat_map(|&t| seeds.iter().map(move |&s| (t, s)))
        .collect();
    let values = thread_pool(threads)?.install(|| {
        pairs
            .par_iter()
            .map(|&(t, s)| regret(t, s))
            .collect::<Result<Vec<f64>>>()
    })?;
    let runs: Vec<(usize, u64, f64)> = pairs
        .iter()
        .zip(&values)
        .map(|(&(t, s), &r)| (t, s, r))
        .collect();
    let rows: Vec<SweepRow> = horizons
        .iter()
        .map(|&t| {
            let xs: Vec<f64> = runs.iter().filter(|r| r.0 == t).map(|r| r.2).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            SweepRow {
                horizon: t,
                seeds: xs.len(),
                mean_regret: mean,
                std_regret: var.sqrt(),
            }
        })
        .collect();
    let (fit, notes) = fit_loglog(&rows);
    Ok(SweepReport {
        rows,
        runs,
        fit,
        notes,
    })
}

/// Regret against `T * OPT` over every (horizon, seed) pair.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    horizons: &[usize],
    threads: Option<usize>,
) -> Result<SweepReport> {
    cfg.validate()?;
    let benches = horizons
        .iter()
        .map(|&t| benchmark(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    sweep_with(horizons, &cfg.seeds.to_vec(), threads, |t, seed| {
        let opt = benches.iter().find(|b| b.horizon == t).unwrap().opt();
        let trace = simulate(cfg, t, seed)?;
        Ok(t as f64 * opt - trace.cum_objective())
    })
}

pub fn sweep_summary(report: &SweepReport) -> String {
    let mut out = String::new();
    for r in &report.rows {
        let _ = writeln!(
            out,
            "T={} seeds={} mean_regret={} std={}",
            r.horizon,
            r.seeds,
            fmt_num(r.mean_regret),
            fmt_num(r.std_regret)
        );
    }
    match report.fit {
        Some(f) => {
            let _ = writeln!(
                out,
                "slope = {} over {} horizons",
                fmt_num(f.slope),
                f.points
            );
        }
        None => out.push_str("slope = none\n"),
    }
    for n in &report.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

/// Writes `sweep.csv`, `sweep_runs.csv` and `sweep_summary.txt`.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    create_dir(dir)?;
    let mut table = String::from("horizon,seeds,mean_regret,std_regret\n");
    for r in &report.rows {
        let _ = writeln!(
            table,
            "{},{},{},{}",
            r.horizon,
            r.seeds,
            fmt_num(r.mean_regret),
            fmt_num(r.std_regret)
        );
    }
    write_file(&dir.join("sweep.csv"), &table)?;
    let mut runs = String::from("horizon,seed,regret\n");
    for (t, s, r) in &report.runs {
        let _ = writeln!(runs, "{t},{s},{}", fmt_num(*r));
    }
    write_file(&dir.join("sweep_runs.csv"), &runs)?;
    write_file(&dir.join("sweep_summary.txt"), &sweep_summary(report))
}

pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<Benchmark> {
    cfg.validate()?;
    benchmark(cfg, cfg.horizon)
}

pub fn oracle_summary(cfg: &ExperimentConfig, bench: &Benchmark) -> String {
    let mut out = String::new();
    describe_benchmark(&mut out, bench, cfg);
    out
}

pub fn cmd_probe(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(default_suites(seed)?)
}

pub fn probe_summary(reports: &[SuiteReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let status = if r.passed() { "pass" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{status} {} ({} checks, {} failures)",
            r.name, r.checks, r.failure_count
        );
        for f in &r.failures {
            let _ = writeln!(out, "    {f}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_stub_fits_one_half() {
        let rep = sweep_with(&[100, 400, 1600, 6400], &[1, 2, 3], Some(2), |t, _| {
            Ok(3.0 * (t as f64).sqrt())
        })
        .unwrap();
        let fit = rep.fit.unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-6);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-6);
        assert!(rep.notes.is_empty());
    }

    #[test]
    fn linear_stub_fits_one() {
        let rep = sweep_with(&[10, 20, 40], &[0, 1], None, |t, _| Ok(0.5 * t as f64)).unwrap();
        assert!((rep.fit.unwrap().slope - 1.0).abs() < 1e-9);
        assert_eq!(rep.rows[0].std_regret, 0.0);
    }

    #[test]
    fn nonpositive_means_are_excluded() {
        let rep = sweep_with(&[10, 20, 40], &[0, 1], None, |t, _| {
            Ok(if t == 10 { -1.0 } else { t as f64 })
        })
        .unwrap();
        assert_eq!(rep.fit.unwrap().points, 2);
        assert_eq!(rep.notes.len(), 1);
        assert!(sweep_with(&[10], &[0, 1], None, |_, _| Ok(1.0)).is_err());
    }

    #[test]
    fn std_is_the_sample_deviation() {
        let rep = sweep_with(&[10, 20], &[0, 1], None, |_, s| {
            Ok(if s == 0 { 1.0 } else { 3.0 })
        })
        .unwrap();
        assert_eq!(rep.rows[0].mean_regret, 2.0);
        assert!((rep.rows[0].std_regret - 2f64.sqrt()).abs() < 1e-15);
    }
}
