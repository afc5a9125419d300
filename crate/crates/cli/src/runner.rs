//! Executes an experiment configuration.

use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use mbm::decimation::{audit_decimation, decimation_match, padded_subdivision, verify_single_split};
use mbm::lab::{
    anomalous_scaling_report, check_depoissonization, check_poisson_discrepancy, concentration_from, decimation_growth,
    estimate_mean, fit_beta, random_link_compare, subadditivity_from, subadditivity_small_n, talagrand_trend,
    trial_instance, trial_seed, MeanEstimate, Mode,
};
use mbm::solve_exact;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind};
use crate::report::{manifest_path, to_stable_json, Check, Report, RunManifest, TrialRow};

const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Failing seeds listed per check.
const MAX_LISTED_SEEDS: usize = 10;

#[derive(Default)]
struct Collector {
    checks: Vec<Check>,
    instances: usize,
    trials: Vec<TrialRow>,
}

impl Collector {
    fn estimate(&mut self, dim: usize, mode: Mode, n: f64, trials: usize, seed: u64) -> mbm::Result<MeanEstimate> {
        let e = estimate_mean(dim, mode, n, trials, seed)?;
        self.record(&e);
        Ok(e)
    }

    fn record(&mut self, e: &MeanEstimate) {
        self.instances += e.trials;
        self.trials.extend(
            e.seeds
                .iter()
                .zip(&e.lengths)
                .enumerate()
                .map(|(trial, (&seed, &length))| TrialRow {
                    n: e.n,
                    dim: e.dim,
                    trial,
                    seed,
                    length,
                }),
        );
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn summary(e: &MeanEstimate) -> Value {
    json!({ "n": e.n, "mode": e.mode, "trials": e.trials, "mean": e.mean, "stderr": e.stderr })
}

fn beta_scan(cfg: &ExperimentConfig, out: &mut Collector) -> mbm::Result<Value> {
    let seed = cfg.seed();
    let mut per_dim = Vec::new();
    let mut betas = Vec::new();
    for &dim in &cfg.dims {
        let mut ests = Vec::new();
        for (i, &n) in cfg.sizes.iter().enumerate() {
            ests.push(out.estimate(dim, cfg.mode, n as f64, cfg.trials_for(i), seed)?);
        }
        let name = format!("beta_scan.d{dim}");
        let entry = match fit_beta(&ests) {
            Ok(fit) => {
                out.checks.push(Check::new(
                    format!("{name}.fit"),
                    fit.beta_hat > 0.0 && fit.beta_ci.is_finite(),
                    format!("beta_hat = {} +- {}", fit.beta_hat, fit.beta_ci),
                ));
                match (fit.spans_decade, fit.stabilizing) {
                    (true, Some(ok)) => out.checks.push(Check::new(
                        format!("{name}.stabilization"),
                        ok,
                        format!(
                            "last differences {:?}",
                            &fit.stabilization_differences[fit.stabilization_differences.len() - 2..]
                        ),
                    )),
                    _ => out.checks.push(Check::skipped(
                        format!("{name}.stabilization"),
                        "sizes span less than a decade",
                    )),
                }
                betas.push((dim, fit.beta_hat));
                json!({ "dim": dim, "estimates": ests.iter().map(summary).collect::<Vec<_>>(), "fit": to_value(&fit) })
            }
            Err(e @ (mbm::Error::FitFailure(_) | mbm::Error::InvalidArgument(_))) => {
                out.checks.push(Check::new(format!("{name}.fit"), false, e.to_string()));
                json!({ "dim": dim, "estimates": ests.iter().map(summary).collect::<Vec<_>>(), "fit_error": e.to_string() })
            }
            Err(e) => return Err(e),
        };
        per_dim.push(entry);
    }
    let mut results = json!({ "dims": per_dim });
    if betas.len() >= 3 {
        let t = talagrand_trend(&betas)?;
        out.checks.push(Check::new(
            "beta_scan.talagrand",
            t.holds,
            format!(
                "increasing {}, ratios in band {}",
                t.strictly_increasing, t.ratios_in_band
            ),
        ));
        results["talagrand"] = to_value(&t);
    } else {
        out.checks
            .push(Check::skipped("beta_scan.talagrand", "fewer than 3 fitted dimensions"));
    }
    Ok(results)
}

fn concentration(cfg: &ExperimentConfig, out: &mut Collector) -> mbm::Result<Value> {
    let grid = cfg.t_grid();
    let mut rows = Vec::new();
    for &dim in &cfg.dims {
        for (i, &n) in cfg.sizes.iter().enumerate() {
            let e = out.estimate(dim, Mode::Fixed, n as f64, cfg.trials_for(i), cfg.seed())?;
            let r = concentration_from(&e, &grid)?;
            out.checks.push(Check::new(
                format!("concentration.d{dim}.n{n}"),
                r.holds,
                format!("tails {:?} vs bounds {:?}", r.empirical_tail, r.analytic_bound),
            ));
            rows.push(to_value(&r));
        }
    }
    Ok(json!({ "reports": rows }))
}

fn subadditivity(cfg: &ExperimentConfig, out: &mut Collector) -> mbm::Result<Value> {
    let seed = cfg.seed();
    let mut sub = Vec::new();
    let mut depois = Vec::new();
    for &dim in &cfg.dims {
        for (i, &n) in cfg.sizes.iter().enumerate() {
            let trials = cfg.trials_for(i);
            let big = out.estimate(dim, Mode::Poisson, n as f64, trials, seed)?;
            for &m in &cfg.ms {
                let small = if m == 1 {
                    big.clone()
                } else {
                    out.estimate(
                        dim,
                        Mode::Poisson,
                        subadditivity_small_n(dim, n as f64, m),
                        trials,
                        seed,
                    )?
                };
                let r = subadditivity_from(&big, &small, m)?;
                out.checks.push(Check::new(
                    format!("subadditivity.d{dim}.n{n}.m{m}"),
                    r.holds,
                    format!("M(N) = {} <= {} (+ {} stderr)", r.mean_n, r.rhs, r.combined_stderr),
                ));
                sub.push(to_value(&r));
            }
            if cfg.depoissonization.unwrap_or(true) {
                let r = check_depoissonization(dim, n, trials, seed)?;
                out.instances += 2 * trials;
                out.checks.push(Check::new(
                    format!("depoissonization.d{dim}.n{n}"),
                    r.holds,
                    format!(
                        "|diff| = {} <= {}, coupling violations {}",
                        r.difference.abs(),
                        r.bound,
                        r.coupling_violations
                    ),
                ));
                depois.push(to_value(&r));
            }
        }
    }
    let mut disc = Vec::new();
    for &lambda in &cfg.lambdas {
        let r = check_poisson_discrepancy(lambda, cfg.trials, seed)?;
        out.checks.push(Check::new(
            format!("poisson_discrepancy.lambda{lambda}"),
            r.holds,
            format!("E|n1 - n2| = {} <= {}", r.mean, r.bound),
        ));
        disc.push(to_value(&r));
    }
    Ok(json!({ "subadditivity": sub, "depoissonization": depois, "poisson_discrepancy": disc }))
}

#[derive(Default, Serialize)]
struct AuditSummary {
    instances: usize,
    failures: usize,
    failing_seeds: Vec<u64>,
    mean_exact: f64,
    mean_heuristic: f64,
    mean_bound: f64,
}

impl AuditSummary {
    fn add(&mut self, ok: bool, seed: u64, exact: f64, heuristic: f64, bound: f64) {
        self.instances += 1;
        if !ok {
            self.failures += 1;
            if self.failing_seeds.len() < MAX_LISTED_SEEDS {
                self.failing_seeds.push(seed);
            }
        }
        self.mean_exact += exact;
        self.mean_heuristic += heuristic;
        self.mean_bound += bound;
    }

    fn finish(mut self) -> Self {
        let k = self.instances.max(1) as f64;
        self.mean_exact /= k;
        self.mean_heuristic /= k;
        self.mean_bound /= k;
        self
    }
}

fn decimation_audit(cfg: &ExperimentConfig, out: &mut Collector) -> mbm::Result<Value> {
    let seed = cfg.seed();
    let mut rows = Vec::new();
    for &dim in &cfg.dims {
        for (i, &n) in cfg.sizes.iter().enumerate() {
            let trials = cfg.trials_for(i);
            let nf = n as f64;
            let mut depth_summaries: Vec<AuditSummary> = cfg.depths.iter().map(|_| AuditSummary::default()).collect();
            let mut split = AuditSummary::default();
            let mut padded: Vec<AuditSummary> = cfg.ms.iter().map(|_| AuditSummary::default()).collect();
            for t in 0..trials {
                let s = trial_seed(seed, dim, nf, t);
                let (x, y) = trial_instance(dim, cfg.mode, nf, s)?;
                out.instances += 1;
                for (summary, &k) in depth_summaries.iter_mut().zip(&cfg.depths) {
                    let r = decimation_match(&x, &y, k, solve_exact)?;
                    let a = audit_decimation(&x, &y, &r)?;
                    summary.add(a.passed(), s, a.exact_length, a.heuristic_length, a.upper_bound);
                }
                let r = verify_single_split(&x, &y, 1.0)?;
                split.add(r.holds, s, r.exact_length, r.middle, r.crude);
                for (summary, &m) in padded.iter_mut().zip(&cfg.ms) {
                    let p = padded_subdivision(&x, &y, m)?;
                    summary.add(
                        p.holds,
                        s,
                        p.exact_length,
                        p.result.total_length(),
                        p.cell_sum + p.cell_bound,
                    );
                }
            }
            let mut depths = Vec::new();
            for (summary, &k) in depth_summaries.into_iter().zip(&cfg.depths) {
                let s = summary.finish();
                out.checks.push(Check::new(
                    format!("decimation.d{dim}.n{n}.k{k}"),
                    s.failures == 0,
                    format!(
                        "{} of {} instances failed, seeds {:?}",
                        s.failures, s.instances, s.failing_seeds
                    ),
                ));
                depths.push(json!({ "depth": k, "summary": to_value(&s) }));
            }
            let split = split.finish();
            out.checks.push(Check::new(
                format!("single_split.d{dim}.n{n}"),
                split.failures == 0,
                format!(
                    "{} of {} instances failed, seeds {:?}",
                    split.failures, split.instances, split.failing_seeds
                ),
            ));
            let mut pads = Vec::new();
            for (summary, &m) in padded.into_iter().zip(&cfg.ms) {
                let s = summary.finish();
                out.checks.push(Check::new(
                    format!("padded.d{dim}.n{n}.m{m}"),
                    s.failures == 0,
                    format!(
                        "{} of {} instances failed, seeds {:?}",
                        s.failures, s.instances, s.failing_seeds
                    ),
                ));
                pads.push(json!({ "m": m, "summary": to_value(&s) }));
            }
            rows.push(
                json!({ "dim": dim, "n": n, "depths": depths, "single_split": to_value(&split), "padded": pads }),
            );
        }
    }
    Ok(json!({ "audits": rows }))
}

fn anomalous(cfg: &ExperimentConfig, out: &mut Collector) -> mbm::Result<Value> {
    let trials: Vec<usize> = (0..cfg.sizes.len()).map(|i| cfg.trials_for(i)).collect();
    let per_size: usize = trials.iter().sum();
    let mut reports = Vec::new();
    let mut growth = Value::Null;
    for &dim in &cfg.dims {
        let r = anomalous_scaling_report(dim, &cfg.sizes, &trials, cfg.seed())?;
        out.instances += per_size;
        let name = format!("anomalous.d{dim}");
        match r.holds {
            Some(ok) => out.checks.push(Check::new(
                name,
                ok,
                match dim {
                    1 => format!("variance ratio {:?}", r.variance_ratio),
                    _ => format!("band ratio {:?}", r.band_ratio),
                },
            )),
            None => out.checks.push(Check::skipped(name, "sizes span less than a decade")),
        }
        reports.push(to_value(&r));
        if dim == 2 && cfg.decimation_growth.unwrap_or(false) {
            let g = decimation_growth(2, &cfg.sizes, &trials, cfg.seed())?;
            out.instances += per_size;
            out.checks.push(Check::new(
                "decimation_growth.d2",
                g.holds,
                format!(
                    "C = {}, ratios {:?}",
                    g.fitted_c,
                    g.rows.iter().map(|r| r.ratio).collect::<Vec<_>>()
                ),
            ));
            growth = to_value(&g);
        }
    }
    Ok(json!({ "reports": reports, "decimation_growth": growth }))
}

fn random_link(cfg: &ExperimentConfig, out: &mut Collector) -> mbm::Result<Value> {
    let dist = cfg.distribution.expect("validated");
    let r = random_link_compare(&cfg.sizes, dist, cfg.trials, cfg.seed())?;
    out.instances += cfg.trials * cfg.sizes.len();
    out.checks.push(Check::new(
        "random_link",
        r.holds,
        format!("increasing {}, bounded {}", r.increasing, r.bounded),
    ));
    Ok(to_value(&r))
}

/// Computes the report of a validated configuration.
pub fn execute(cfg: &ExperimentConfig) -> mbm::Result<(Report, Vec<TrialRow>)> {
    let mut out = Collector::default();
    let results = match cfg.kind {
        Kind::BetaScan => beta_scan(cfg, &mut out)?,
        Kind::Concentration => concentration(cfg, &mut out)?,
        Kind::Subadditivity => subadditivity(cfg, &mut out)?,
        Kind::DecimationAudit => decimation_audit(cfg, &mut out)?,
        Kind::AnomalousScaling => anomalous(cfg, &mut out)?,
        Kind::RandomLink => random_link(cfg, &mut out)?,
    };
    let mut echo = cfg.clone();
    echo.workers = None;
    let report = Report {
        version: VERSION.into(),
        config: echo,
        checks: out.checks,
        results,
        instances: out.instances,
    };
    Ok((report, out.trials))
}

pub fn worker_count(cfg: &ExperimentConfig) -> usize {
    cfg.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs on a pool of the configured size and writes the report, the trial
/// stream and the manifest.
pub fn run_to_files(cfg: &ExperimentConfig) -> anyhow::Result<(Report, RunManifest)> {
    let workers = worker_count(cfg);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let start = Instant::now();
    let (report, trials) = pool.install(|| execute(cfg))?;
    let wall = start.elapsed().as_secs_f64();

    write_file(&cfg.output, to_stable_json(&report)?.as_bytes())?;
    if let Some(path) = &cfg.trials_csv {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for row in &trials {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        write_file(path, &buf)?;
    }
    let manifest = RunManifest {
        version: VERSION.into(),
        config: cfg.clone(),
        workers,
        instances: report.instances,
        wall_time_seconds: wall,
        report: cfg.output.clone(),
        trials_csv: cfg.trials_csv.clone(),
        checks: report.checks.clone(),
        all_passed: report.all_passed(),
    };
    write_file(&manifest_path(&cfg.output), to_stable_json(&manifest)?.as_bytes())?;
    Ok((report, manifest))
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
