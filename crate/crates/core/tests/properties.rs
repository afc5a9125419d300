use mbm::decimation::{audit_decimation, decimation_match};
use mbm::points::distance;
use mbm::{brute_force, solve_exact, sorted_match_1d, PointCloud};
use proptest::prelude::*;

fn cloud(dim: usize, max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(0.0f64..=1.0, 0..=max).prop_map(move |mut v| {
        v.truncate(v.len() / dim * dim);
        PointCloud::new(dim, v).unwrap()
    })
}

fn pair(max_points: usize) -> impl Strategy<Value = (PointCloud, PointCloud)> {
    (1usize..=4).prop_flat_map(move |d| (cloud(d, max_points * d), cloud(d, max_points * d)))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn length(x: &PointCloud, y: &PointCloud) -> f64 {
    solve_exact(x, y).unwrap().total_length
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matching_is_feasible((x, y) in pair(90)) {
        let m = solve_exact(&x, &y).unwrap();
        m.validate(&x, &y).unwrap();
        prop_assert_eq!(m.pairs.len(), x.len().min(y.len()));
        prop_assert_eq!(m.unmatched_x.len() + m.unmatched_y.len(), x.len().abs_diff(y.len()));
    }

    #[test]
    fn symmetric((x, y) in pair(90)) {
        prop_assert!(close(length(&x, &y), length(&y, &x)));
    }

    #[test]
    fn permutation_invariant((x, y) in pair(40), rot in 0usize..40) {
        let n = x.len();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n.max(1)).collect();
        let xp = x.subset(&order);
        let yr: Vec<usize> = (0..y.len()).rev().collect();
        prop_assert!(close(length(&x, &y), length(&xp, &y.subset(&yr))));
    }

    #[test]
    fn translation_invariant((x, y) in pair(40), shift in prop::collection::vec(0.0f64..0.5, 4)) {
        let d = x.dim();
        let move_cloud = |c: &PointCloud, s: &[f64]| {
            let coords = c.coords().chunks(d).flat_map(|p| p.iter().zip(s).map(|(v, t)| v * 0.5 + t).collect::<Vec<_>>()).collect();
            PointCloud::new(d, coords).unwrap()
        };
        let zero = vec![0.0; d];
        let base = length(&move_cloud(&x, &zero), &move_cloud(&y, &zero));
        let moved = length(&move_cloud(&x, &shift[..d]), &move_cloud(&y, &shift[..d]));
        prop_assert!(close(base, moved), "{} vs {}", base, moved);
    }

    #[test]
    fn lipschitz_in_one_point((x, y) in pair(90), target in prop::collection::vec(0.0f64..=1.0, 4), pick in any::<prop::sample::Index>()) {
        prop_assume!(!x.is_empty());
        let d = x.dim();
        let i = pick.index(x.len());
        let mut coords = x.coords().to_vec();
        coords[i * d..(i + 1) * d].copy_from_slice(&target[..d]);
        let moved = PointCloud::new(d, coords).unwrap();
        let delta = distance(x.point(i), &target[..d]);
        prop_assert!((length(&x, &y) - length(&moved, &y)).abs() <= delta + 1e-9);
    }

    #[test]
    fn one_more_point_changes_at_most_diameter((x, y) in pair(90), extra in prop::collection::vec(0.0f64..=1.0, 4)) {
        let d = x.dim();
        let mut coords = x.coords().to_vec();
        coords.extend_from_slice(&extra[..d]);
        let grown = PointCloud::new(d, coords).unwrap();
        prop_assert!((length(&x, &y) - length(&grown, &y)).abs() <= (d as f64).sqrt() + 1e-9);
    }

    #[test]
    fn diameter_bound((x, y) in pair(90)) {
        let d = x.dim() as f64;
        prop_assert!(length(&x, &y) <= d.sqrt() * x.len().min(y.len()) as f64 + 1e-9);
    }

    #[test]
    fn agrees_with_enumeration((x, y) in pair(6)) {
        prop_assert!(close(length(&x, &y), brute_force(&x, &y).unwrap().total_length));
    }

    #[test]
    fn line_is_sorting(v in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..150)) {
        let x = PointCloud::new(1, v.iter().map(|p| p.0).collect()).unwrap();
        let y = PointCloud::new(1, v.iter().map(|p| p.1).collect()).unwrap();
        prop_assert!(close(sorted_match_1d(&x, &y).unwrap().total_length, length(&x, &y)));
    }

    #[test]
    fn decimation_laws((x, y) in (2usize..=3).prop_flat_map(|d| (cloud(d, 60 * d), cloud(d, 60 * d))), depth in 0u32..=3) {
        let r = decimation_match(&x, &y, depth, solve_exact).unwrap();
        r.matching.validate(&x, &y).unwrap();
        let a = audit_decimation(&x, &y, &r).unwrap();
        prop_assert!(a.passed(), "{:?}", a);
    }
}
