use mbm::geometric::assign_points_with_stats;
use mbm::lap::assign_dense;
use mbm::points::distance;
use mbm::{sample_pair, PointCloud, SampleSpec};

fn dense_length(rows: &PointCloud, cols: &PointCloud) -> f64 {
    let a = assign_dense(rows.len(), cols.len(), |i, j| distance(rows.point(i), cols.point(j)));
    a.iter()
        .enumerate()
        .map(|(i, &j)| distance(rows.point(i), cols.point(j)))
        .sum()
}

fn sparse_length(rows: &PointCloud, cols: &PointCloud) -> f64 {
    let (a, _) = assign_points_with_stats(rows, cols);
    let mut seen = vec![false; cols.len()];
    for &j in &a {
        assert!(!seen[j], "column used twice");
        seen[j] = true;
    }
    a.iter()
        .enumerate()
        .map(|(i, &j)| distance(rows.point(i), cols.point(j)))
        .sum()
}

#[test]
fn sparse_solver_is_optimal_in_every_dimension() {
    for dim in 1..=6 {
        for (k, (n1, n2)) in [(150, 150), (200, 240), (300, 300), (90, 400)].into_iter().enumerate() {
            let seed = 100 * dim as u64 + k as u64;
            let (x, y) = sample_pair(&SampleSpec::fixed(dim, n1, seed), &SampleSpec::fixed(dim, n2, seed)).unwrap();
            let dense = dense_length(&x, &y);
            let sparse = sparse_length(&x, &y);
            assert!(
                (dense - sparse).abs() <= 1e-9 * dense.max(1.0),
                "d={dim} {n1}x{n2}: {dense} vs {sparse}"
            );
        }
    }
}

#[test]
fn sparse_solver_handles_separated_clusters() {
    // rows crowd one corner, columns the opposite one, plus a few near rows
    for dim in [2, 3] {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let (x0, _) = sample_pair(&SampleSpec::fixed(dim, 200, 7), &SampleSpec::fixed(dim, 1, 7)).unwrap();
        let (y0, _) = sample_pair(&SampleSpec::fixed(dim, 260, 8), &SampleSpec::fixed(dim, 1, 8)).unwrap();
        for p in x0.iter() {
            xs.extend(p.iter().map(|c| c * 0.2));
        }
        for (i, p) in y0.iter().enumerate() {
            if i % 10 == 0 {
                ys.extend(p.iter().map(|c| c * 0.2));
            } else {
                ys.extend(p.iter().map(|c| 0.8 + c * 0.2));
            }
        }
        let x = PointCloud::new(dim, xs).unwrap();
        let y = PointCloud::new(dim, ys).unwrap();
        let dense = dense_length(&x, &y);
        let sparse = sparse_length(&x, &y);
        assert!((dense - sparse).abs() <= 1e-9 * dense, "d={dim}: {dense} vs {sparse}");
    }
}
