//! Dense rectangular linear assignment by shortest augmenting paths.
//!
//! Rows are assigned one at a time along a shortest path in reduced costs
//! (Dijkstra over columns, O(cols) per step). Column potentials start at zero
//! and only ever decrease on matched columns, so the columns left free at the
//! end keep the largest potential and the assignment is optimal for the
//! rectangular problem as well as the square one.

/// Assigns every row to a distinct column at minimum total cost.
///
/// Requires `rows <= cols`. Returns `row -> column`.
pub fn assign_dense<F>(rows: usize, cols: usize, cost: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    assert!(rows <= cols, "assign_dense needs rows <= cols ({rows} > {cols})");
    if rows == 0 {
        return Vec::new();
    }
    // 1-based with column 0 as the virtual source, as in the classic layout
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![0.0f64; cols + 1];
    let mut used = vec![false; cols + 1];

    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; rows];
    for j in 1..=cols {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}
