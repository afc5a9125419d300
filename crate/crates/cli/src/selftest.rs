//! Fast property suite run by `mbm selftest`.

use mbm::decimation::{audit_decimation, decimation_match, verify_single_split, Subdivision};
use mbm::lab::{fit_beta, MeanEstimate, Mode};
use mbm::rng::{derive_seed, stream_rng};
use mbm::{brute_force, sample_pair, solve_exact, sorted_match_1d, Matching, PointCloud, SampleSpec};
use rand::Rng;
use serde::Serialize;

use crate::report::Check;

#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Inflate every length returned to the decimation by 10%.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub inject_fault: bool,
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

/// Collects failing instance seeds for one check.
struct Failures {
    name: &'static str,
    total: usize,
    seeds: Vec<u64>,
    first: Option<String>,
}

impl Failures {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            total: 0,
            seeds: Vec::new(),
            first: None,
        }
    }

    fn record(&mut self, ok: bool, seed: u64, what: impl FnOnce() -> String) {
        self.total += 1;
        if !ok {
            if self.first.is_none() {
                self.first = Some(what());
            }
            self.seeds.push(seed);
        }
    }

    fn check(self) -> Check {
        if self.seeds.is_empty() {
            Check::new(self.name, true, format!("{} instances", self.total))
        } else {
            Check::new(
                self.name,
                false,
                format!(
                    "{} of {} instances failed; seeds {:?}; first: {}",
                    self.seeds.len(),
                    self.total,
                    self.seeds,
                    self.first.unwrap_or_default()
                ),
            )
        }
    }
}

fn random_pair(seed: u64, dim: usize, n1: usize, n2: usize) -> mbm::Result<(PointCloud, PointCloud)> {
    sample_pair(&SampleSpec::fixed(dim, n1, seed), &SampleSpec::fixed(dim, n2, seed))
}

/// `n` points and for each one a partner drawn in the same leaf cell of the
/// depth-`depth` dyadic grid, so every cell is balanced.
pub fn balanced_leaf_instance(seed: u64, dim: usize, n: usize, depth: u32) -> mbm::Result<(PointCloud, PointCloud)> {
    let mut rng = stream_rng(seed, 0);
    let cells = (1u64 << depth) as f64;
    let mut xs = Vec::with_capacity(n * dim);
    let mut ys = Vec::with_capacity(n * dim);
    for _ in 0..n * dim {
        let x: f64 = rng.random();
        let cell = (x * cells).floor().min(cells - 1.0);
        xs.push(x);
        ys.push(((cell + rng.random::<f64>()) / cells).min(1.0));
    }
    Ok((PointCloud::new(dim, xs)?, PointCloud::new(dim, ys)?))
}

fn oracle_equivalence(seed: u64) -> mbm::Result<Check> {
    let mut f = Failures::new("oracle_equivalence");
    for i in 0..120u64 {
        let s = derive_seed(seed, &[1, i]);
        let mut rng = stream_rng(s, 7);
        let dim = rng.random_range(1..=4);
        let (n1, n2) = (rng.random_range(0..=6), rng.random_range(0..=6));
        let (x, y) = random_pair(s, dim, n1, n2)?;
        let a = solve_exact(&x, &y)?.total_length;
        let b = brute_force(&x, &y)?.total_length;
        f.record((a - b).abs() <= 1e-9, s, || format!("d={dim} {n1}x{n2}: {a} vs {b}"));
    }
    Ok(f.check())
}

fn sort_law(seed: u64) -> mbm::Result<Check> {
    let mut f = Failures::new("sort_law_1d");
    for i in 0..60u64 {
        let s = derive_seed(seed, &[2, i]);
        let n = 1 + (i as usize * 7) % 60;
        let (x, y) = random_pair(s, 1, n, n)?;
        let a = sorted_match_1d(&x, &y)?.total_length;
        let b = solve_exact(&x, &y)?.total_length;
        f.record((a - b).abs() <= 1e-9, s, || format!("N={n}: sorted {a} vs exact {b}"));
    }
    Ok(f.check())
}

fn single_split(seed: u64) -> mbm::Result<Check> {
    let mut f = Failures::new("single_split_chain");
    for i in 0..40u64 {
        let s = derive_seed(seed, &[3, i]);
        let dim = 2 + (i % 2) as usize;
        let (x, y) = random_pair(s, dim, 16, 16)?;
        let r = verify_single_split(&x, &y, 1.0)?;
        f.record(r.holds, s, || {
            format!("{} <= {} <= {}", r.exact_length, r.middle, r.crude)
        });
    }
    Ok(f.check())
}

fn decimation_checks(seed: u64, inject_fault: bool) -> mbm::Result<Vec<Check>> {
    let solver = |x: &PointCloud, y: &PointCloud| -> mbm::Result<Matching> {
        let mut m = solve_exact(x, y)?;
        if inject_fault {
            m.total_length *= 1.1;
        }
        Ok(m)
    };
    let mut dominance = Failures::new("decimation_dominance");
    let mut upper = Failures::new("decimation_upper_bound");
    let mut leftovers = Failures::new("decimation_leftover_law");
    let mut instances = Vec::new();
    for i in 0..30u64 {
        let s = derive_seed(seed, &[4, i]);
        let dim = 2 + (i % 2) as usize;
        let (x, y) = random_pair(s, dim, 32, 28 + (i % 5) as usize)?;
        instances.push((s, x, y, 1 + (i % 3) as u32));
    }
    for i in 0..10u64 {
        let s = derive_seed(seed, &[5, i]);
        let (x, y) = balanced_leaf_instance(s, 2, 24, 2)?;
        instances.push((s, x, y, 2));
    }
    for (s, x, y, depth) in &instances {
        let r = decimation_match(x, y, *depth, solver)?;
        let a = audit_decimation(x, y, &r)?;
        dominance.record(a.dominance_holds, *s, || {
            format!("exact {} > heuristic {}", a.exact_length, a.heuristic_length)
        });
        upper.record(a.upper_bound_holds, *s, || {
            format!("heuristic {} > bound {}", a.heuristic_length, a.upper_bound)
        });
        leftovers.record(a.leftover_law_holds && a.residue_holds && a.edge_cap_holds, *s, || {
            format!(
                "leftover {} residue {} edge cap {}",
                a.leftover_law_holds, a.residue_holds, a.edge_cap_holds
            )
        });
    }
    Ok(vec![dominance.check(), upper.check(), leftovers.check()])
}

fn fit_recovery() -> mbm::Result<Check> {
    let sizes = [100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0];
    let ests = |f: &dyn Fn(f64) -> f64| -> Vec<MeanEstimate> {
        sizes
            .iter()
            .map(|&n| MeanEstimate {
                dim: 3,
                mode: Mode::Fixed,
                n,
                trials: 2,
                mean: f(n),
                stderr: 0.0,
                seeds: vec![],
                lengths: vec![],
            })
            .collect()
    };
    let pure = fit_beta(&ests(&|n| 0.7 * n.powf(2.0 / 3.0)))?.beta_hat;
    let planted = fit_beta(&ests(&|n| 0.7 * n.powf(2.0 / 3.0) * (1.0 + 2.0 * n.powf(-1.0 / 6.0))))?.beta_hat;
    Ok(Check::new(
        "fit_recovery",
        (pure - 0.7).abs() < 1e-6 && (planted - 0.7).abs() < 0.007,
        format!("pure {pure}, planted {planted}"),
    ))
}

fn subdivision_guard() -> Check {
    let ok = Subdivision::dyadic(3, 11).is_err() && Subdivision::dyadic(3, 10).is_ok();
    Check::new("depth_guard", ok, "depth * dim <= 30")
}

pub fn run_selftest(opts: SelftestOptions) -> mbm::Result<SelftestReport> {
    let mut checks = vec![
        oracle_equivalence(opts.seed)?,
        sort_law(opts.seed)?,
        single_split(opts.seed)?,
    ];
    checks.extend(decimation_checks(opts.seed, opts.inject_fault)?);
    checks.push(fit_recovery()?);
    checks.push(subdivision_guard());
    Ok(SelftestReport {
        seed: opts.seed,
        inject_fault: opts.inject_fault,
        checks,
    })
}
