//! Times the sparse exact solver: `bench_solver <dim> <n1> [n2] [reps]`.
use std::time::Instant;

use mbm::geometric::assign_points_with_stats;
use mbm::{sample_pair, SampleSpec};

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let dim = args[0];
    let n1 = args[1];
    let n2 = args.get(2).copied().unwrap_or(n1).max(n1);
    let reps = args.get(3).copied().unwrap_or(3);
    let t = Instant::now();
    for s in 0..reps as u64 {
        let (x, y) = sample_pair(&SampleSpec::fixed(dim, n1, s), &SampleSpec::fixed(dim, n2, s)).unwrap();
        let (_, st) = assign_points_with_stats(&x, &y);
        println!("{st:?}");
    }
    println!(
        "d={dim} {n1}x{n2}: {:.3} s/solve",
        t.elapsed().as_secs_f64() / reps as f64
    );
}
