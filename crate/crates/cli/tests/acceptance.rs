//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::time::{Duration, Instant};

use mbm::decimation::{audit_decimation, decimation_match, verify_single_split};
use mbm::lab::{
    anomalous_scaling_report, check_depoissonization, check_poisson_discrepancy, concentration_from, decimation_growth,
    estimate_mean, fit_beta, subadditivity_from, subadditivity_small_n, talagrand_scale, talagrand_trend, MeanEstimate,
    Mode, ScalingEstimate, DEFAULT_T_GRID,
};
use mbm::rng::{derive_seed, stream_rng};
use mbm::{brute_force, sample_pair, solve_exact, sorted_match_1d, SampleSpec};
use mbm_cli::config::ExperimentConfig;
use mbm_cli::run_to_files;
use rand::Rng;

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail })
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn pair(seed: u64, dim: usize, n1: usize, n2: usize) -> Result<(mbm::PointCloud, mbm::PointCloud), String> {
    sample_pair(&SampleSpec::fixed(dim, n1, seed), &SampleSpec::fixed(dim, n2, seed)).map_err(err)
}

fn oracle_equivalence() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    let mut unbalanced = 0;
    for i in 0..500u64 {
        let s = derive_seed(SEED, &[1, i]);
        let mut rng = stream_rng(s, 9);
        let dim = 1 + (i % 4) as usize;
        let n1 = rng.random_range(0..=7);
        let n2 = if i % 2 == 0 { n1 } else { rng.random_range(0..=7) };
        unbalanced += (n1 != n2) as usize;
        let (x, y) = pair(s, dim, n1, n2)?;
        let a = solve_exact(&x, &y).map_err(err)?.total_length;
        let b = brute_force(&x, &y).map_err(err)?.total_length;
        worst = worst.max((a - b).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("500 instances ({unbalanced} unbalanced), max |exact - brute| = {worst:e}"),
    )
}

fn sort_law() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    for i in 0..200u64 {
        let s = derive_seed(SEED, &[2, i]);
        let n = 1 + i as usize;
        let (x, y) = pair(s, 1, n, n)?;
        let a = sorted_match_1d(&x, &y).map_err(err)?.total_length;
        let b = solve_exact(&x, &y).map_err(err)?.total_length;
        worst = worst.max((a - b).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("200 instances, N = 1..200, max |sorted - exact| = {worst:e}"),
    )
}

fn single_split_chain() -> Result<Outcome, String> {
    let mut failures = Vec::new();
    for i in 0..200u64 {
        let s = derive_seed(SEED, &[3, i]);
        let dim = 2 + (i % 2) as usize;
        let (x, y) = pair(s, dim, 32, 32)?;
        if !verify_single_split(&x, &y, 1.0).map_err(err)?.holds {
            failures.push(s);
        }
    }
    outcome(
        failures.is_empty(),
        format!("200 instances, failing seeds {failures:?}"),
    )
}

fn recursive_bound() -> Result<Outcome, String> {
    let mut failures = Vec::new();
    let mut checked = 0;
    for i in 0..300u64 {
        let s = derive_seed(SEED, &[4, i]);
        let dim = 2 + (i % 2) as usize;
        let (x, y) = pair(s, dim, 64, 64)?;
        for depth in 1..=3 {
            let r = decimation_match(&x, &y, depth, solve_exact).map_err(err)?;
            let a = audit_decimation(&x, &y, &r).map_err(err)?;
            checked += 1;
            if !(a.dominance_holds && a.upper_bound_holds && a.leftover_law_holds && a.residue_holds) {
                failures.push((s, depth));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("300 instances x K in 1..=3 = {checked} runs, failures {failures:?}"),
    )
}

fn poisson_discrepancy() -> Result<Outcome, String> {
    let mut parts = Vec::new();
    let mut pass = true;
    for lambda in [1.0, 10.0, 100.0, 1000.0] {
        let r = check_poisson_discrepancy(lambda, 10_000, SEED).map_err(err)?;
        pass &= r.holds;
        parts.push(format!(
            "lambda {lambda}: {:.4} <= {:.4} + 3*{:.4}",
            r.mean, r.bound, r.stderr
        ));
    }
    outcome(pass, parts.join("; "))
}

fn mean_subadditivity() -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut cache: Vec<MeanEstimate> = Vec::new();
    let mut estimate = |n: f64| -> Result<MeanEstimate, String> {
        if let Some(e) = cache.iter().find(|e| e.n == n) {
            return Ok(e.clone());
        }
        let e = estimate_mean(3, Mode::Poisson, n, 500, SEED).map_err(err)?;
        cache.push(e.clone());
        Ok(e)
    };
    for n in [512.0, 4096.0] {
        let big = estimate(n)?;
        for m in [2u64, 4] {
            let small = estimate(subadditivity_small_n(3, n, m))?;
            let r = subadditivity_from(&big, &small, m).map_err(err)?;
            pass &= r.holds;
            parts.push(format!(
                "N {n} m {m}: {:.3} <= {:.3} (3 se = {:.3})",
                r.mean_n,
                r.rhs,
                3.0 * r.combined_stderr
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

fn depoissonization() -> Result<Outcome, String> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (dim, n) in [(3usize, 100usize), (3, 400), (4, 256)] {
        let r = check_depoissonization(dim, n, 1000, SEED).map_err(err)?;
        pass &= r.mean_bound_holds && r.coupling_violations == 0;
        parts.push(format!(
            "d {dim} N {n}: |diff| {:.4} <= {:.2}, coupling violations {}, max ratio {:.3}",
            r.difference.abs(),
            r.bound,
            r.coupling_violations,
            r.max_coupling_ratio
        ));
    }
    outcome(pass, parts.join("; "))
}

fn ladder(dim: usize, sizes: &[usize], trials: usize) -> Result<ScalingEstimate, String> {
    let ests = sizes
        .iter()
        .map(|&n| estimate_mean(dim, Mode::Fixed, n as f64, trials, SEED).map_err(err))
        .collect::<Result<Vec<_>, _>>()?;
    fit_beta(&ests).map_err(err)
}

fn stabilization(d3: &ScalingEstimate) -> Result<Outcome, String> {
    let positive = d3.stabilization.iter().all(|&r| r > 0.0);
    let stabilizing = d3.stabilizing == Some(true);
    let ci = d3.beta_ci / d3.beta_hat;
    let shift = d3.drop_smallest_shift.unwrap_or(f64::INFINITY);
    outcome(
        positive && stabilizing && d3.beta_hat > 0.0 && ci < 0.05 && shift < 0.03,
        format!(
            "ratios {:?}, last differences decreasing {stabilizing}, beta_hat {:.4} +- {:.4} ({:.2}%), drop-smallest shift {:.2}%",
            d3.stabilization.iter().map(|r| (r * 1e4).round() / 1e4).collect::<Vec<_>>(),
            d3.beta_hat,
            d3.beta_ci,
            100.0 * ci,
            100.0 * shift
        ),
    )
}

fn concentration() -> Result<Outcome, String> {
    let e = estimate_mean(3, Mode::Fixed, 1000.0, 10_000, SEED).map_err(err)?;
    let r = concentration_from(&e, &DEFAULT_T_GRID).map_err(err)?;
    let rows: Vec<String> = r
        .t_grid
        .iter()
        .zip(&r.empirical_tail)
        .zip(&r.analytic_bound)
        .map(|((t, p), b)| format!("t {t}: {p:.4} <= {b:.3e}"))
        .collect();
    outcome(r.holds, rows.join("; "))
}

fn anomalous() -> Result<Outcome, String> {
    let line_sizes: Vec<usize> = (6..=12).map(|k| 1usize << k).collect();
    let line = anomalous_scaling_report(1, &line_sizes, &[2000], SEED).map_err(err)?;
    let plane_sizes: Vec<usize> = (7..=13).map(|k| 1usize << k).collect();
    let plane_trials = [200, 200, 100, 64, 32, 24, 16];
    let plane = anomalous_scaling_report(2, &plane_sizes, &plane_trials, SEED).map_err(err)?;
    let growth = decimation_growth(2, &plane_sizes, &plane_trials, SEED).map_err(err)?;
    let pass = line.holds == Some(true) && plane.holds == Some(true) && growth.holds;
    outcome(
        pass,
        format!(
            "d=1 Var(L/sqrt N) ratio 4096/64 = {:.3}; d=2 max/min of L/sqrt(N ln N) = {:.3}; decimation ratios {:?} under C = {:.4}",
            line.variance_ratio.unwrap_or(f64::NAN),
            plane.band_ratio.unwrap_or(f64::NAN),
            growth.rows.iter().map(|r| (r.ratio * 1e4).round() / 1e4).collect::<Vec<_>>(),
            growth.fitted_c
        ),
    )
}

fn talagrand(d3: &ScalingEstimate) -> Result<Outcome, String> {
    let d4 = ladder(4, &[100, 200, 400, 800, 1600, 3200], 200)?;
    let d5 = ladder(5, &[100, 200, 400, 800, 1600], 100)?;
    let d6 = ladder(6, &[100, 200, 400, 800, 1600], 100)?;
    let betas: Vec<(usize, f64)> = [d3, &d4, &d5, &d6].iter().map(|e| (e.dim, e.beta_hat)).collect();
    let r = talagrand_trend(&betas).map_err(err)?;
    let anchors = format!("{:.4}", talagrand_scale(3)) == "0.4191" && format!("{:.4}", talagrand_scale(6)) == "0.5927";
    outcome(
        r.strictly_increasing && r.ratios_in_band && anchors,
        format!(
            "beta_hat {:?}, ratios {:?}, band {:?}, strictly increasing {}, anchors {:.4} / {:.4}",
            r.rows
                .iter()
                .map(|x| (x.dim, (x.beta_hat * 1e4).round() / 1e4))
                .collect::<Vec<_>>(),
            r.rows.iter().map(|x| (x.ratio * 1e3).round() / 1e3).collect::<Vec<_>>(),
            r.band,
            r.strictly_increasing,
            talagrand_scale(3),
            talagrand_scale(6)
        ),
    )
}

fn determinism() -> Result<Outcome, String> {
    let configs = [
        r#"
kind = "subadditivity"
dims = [2, 3]
sizes = [40, 80]
trials = 24
seed = 9
mode = "poisson"
ms = [1, 2]
lambdas = [5.0]
output = "sub.json"
trials_csv = "sub.csv"
"#,
        r#"
kind = "decimation_audit"
dims = [2]
sizes = [32, 64]
trials = 10
seed = 9
depths = [1, 2, 3]
ms = [3]
output = "dec.json"
"#,
        r#"
kind = "concentration"
dims = [3]
sizes = [50]
trials = 40
output = "conc.json"
"#,
    ];
    let mut identical = true;
    let mut names = Vec::new();
    for text in configs {
        let mut files = Vec::new();
        for workers in [1usize, 3] {
            let dir = tempfile::tempdir().map_err(err)?;
            let mut cfg = ExperimentConfig::from_toml(text).map_err(err)?;
            cfg.output = dir.path().join(&cfg.output);
            cfg.trials_csv = cfg.trials_csv.map(|p| dir.path().join(p));
            cfg.workers = Some(workers);
            cfg.resolve_seed(None).map_err(err)?;
            cfg.validate().map_err(err)?;
            run_to_files(&cfg).map_err(err)?;
            let report = std::fs::read(&cfg.output).map_err(err)?;
            let csv = cfg.trials_csv.as_ref().map(std::fs::read).transpose().map_err(err)?;
            // the report echoes the output path; compare with the directory stripped
            let report = String::from_utf8(report)
                .map_err(err)?
                .replace(&dir.path().display().to_string(), "");
            files.push((report, csv));
        }
        identical &= files[0] == files[1];
        names.push(
            ExperimentConfig::from_toml(text)
                .map_err(err)?
                .output
                .display()
                .to_string(),
        );
    }
    outcome(
        identical,
        format!("reports {names:?} byte-identical across 1 and 3 workers: {identical}"),
    )
}

fn main() {
    type Criterion<'a> = (&'a str, Duration, Box<dyn FnOnce() -> Result<Outcome, String> + 'a>);
    // the d=3 ladder is shared by the stabilization and trend criteria
    let d3 = std::cell::OnceCell::new();
    let get_d3 = || {
        d3.get_or_init(|| ladder(3, &[100, 200, 400, 800, 1600, 3200], 200))
            .clone()
    };
    let minutes = |m: u64| Duration::from_secs(60 * m);
    let criteria: Vec<Criterion> = vec![
        (
            "oracle equivalence",
            Duration::from_secs(10),
            Box::new(oracle_equivalence),
        ),
        ("d=1 sort law", Duration::from_secs(5), Box::new(sort_law)),
        (
            "single-split chain",
            Duration::from_secs(30),
            Box::new(single_split_chain),
        ),
        ("recursive decimation bound", minutes(2), Box::new(recursive_bound)),
        (
            "Poisson discrepancy",
            Duration::from_secs(5),
            Box::new(poisson_discrepancy),
        ),
        ("mean subadditivity", minutes(10), Box::new(mean_subadditivity)),
        ("de-Poissonization", minutes(5), Box::new(depoissonization)),
        (
            "d=3 stabilization and fit",
            minutes(30),
            Box::new(|| stabilization(&get_d3()?)),
        ),
        ("concentration", minutes(20), Box::new(concentration)),
        ("anomalous scalings", minutes(45), Box::new(anomalous)),
        ("large-dimension trend", minutes(60), Box::new(|| talagrand(&get_d3()?))),
        ("determinism", minutes(5), Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !pass as usize;
        println!(
            "criterion {:02} {} {name} ({:.1} s, limit {} s): {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
