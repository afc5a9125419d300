//! Summation and sample statistics with a fixed evaluation order.

/// Neumaier-compensated sum, evaluated in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    compensated_sum(values.iter().map(|v| (v - m) * (v - m))) / (values.len() - 1) as f64
}

/// Sample mean and its standard error.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    (mean(values), (variance(values) / n as f64).sqrt())
}

/// Pearson correlation; zero when either side is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let cov = compensated_sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)));
    let va = compensated_sum(a.iter().map(|x| (x - ma) * (x - ma)));
    let vb = compensated_sum(b.iter().map(|y| (y - mb) * (y - mb)));
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}
