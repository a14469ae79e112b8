//! Dense two-phase simplex for equality-form linear programs
//! `min c'x  s.t.  Ax = b, x >= 0`, with Bland's rule for anti-cycling.
//!
//! Sized for desk-scale polytope problems (tens of rows and columns); the
//! tableau keeps the artificial block so phase-1 duals can be read off for
//! infeasibility certificates.

const PIVOT_EPS: f64 = 1e-10;
pub const FEAS_EPS: f64 = 1e-9;

#[derive(Debug)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        objective: f64,
    },
    /// Phase 1 ended with positive infeasibility; `dual` is a vector `y`
    /// with `y'A_j <= 0` for every structural column and `y'b > 0`.
    Infeasible {
        infeasibility: f64,
        dual: Vec<f64>,
    },
    Unbounded,
}

/// Solve `min c'x, Ax = b, x >= 0`. `a` is row-major `m x n`.
pub fn solve(a: &[f64], m: usize, n: usize, b: &[f64], c: &[f64]) -> LpOutcome {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);

    // tableau: n structural + m artificial columns + rhs
    let width = n + m + 1;
    let mut t = vec![0.0; m * width];
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i * width + j] = flip * a[i * n + j];
        }
        t[i * width + n + i] = 1.0;
        t[i * width + n + m] = flip * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // phase 1: minimize the sum of artificials
    let mut cost1 = vec![0.0; n + m];
    for j in n..n + m {
        cost1[j] = 1.0;
    }
    if !run_phase(&mut t, m, width, &mut basis, &cost1, n + m) {
        unreachable!("phase 1 of a feasibility LP cannot be unbounded");
    }
    let infeasibility: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &j)| j >= n)
        .map(|(i, _)| t[i * width + n + m])
        .sum();
    if infeasibility > FEAS_EPS {
        // y_i = 1 - reduced cost of artificial i at the phase-1 optimum,
        // with the sign flip applied when the row was negated.
        let reduced = reduced_costs(&t, m, width, &basis, &cost1, n + m);
        let mut dual = vec![0.0; m];
        for i in 0..m {
            let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
            dual[i] = flip * (1.0 - reduced[n + i]);
        }
        return LpOutcome::Infeasible {
            infeasibility,
            dual,
        };
    }

    // drive basic artificials (at zero) out of the basis where possible
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i * width + j].abs() > PIVOT_EPS) {
                pivot(&mut t, m, width, i, j);
                basis[i] = j;
            }
            // otherwise the row is redundant; the artificial stays at zero
        }
    }

    // phase 2 on the original objective, artificials barred from entering
    let mut cost2 = vec![0.0; n + m];
    cost2[..n].copy_from_slice(c);
    if !run_phase(&mut t, m, width, &mut basis, &cost2, n) {
        return LpOutcome::Unbounded;
    }

    let mut x = vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = t[i * width + n + m];
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal { x, objective }
}

fn reduced_costs(
    t: &[f64],
    m: usize,
    width: usize,
    basis: &[usize],
    cost: &[f64],
    n_cols: usize,
) -> Vec<f64> {
    let mut rc = vec![0.0; n_cols];
    for j in 0..n_cols {
        let mut zj = 0.0;
        for i in 0..m {
            zj += cost[basis[i]] * t[i * width + j];
        }
        rc[j] = cost[j] - zj;
    }
    rc
}

/// Returns false when unbounded. `enter_limit` caps which columns may enter.
fn run_phase(
    t: &mut [f64],
    m: usize,
    width: usize,
    basis: &mut [usize],
    cost: &[f64],
    enter_limit: usize,
) -> bool {
    loop {
        let rc = reduced_costs(t, m, width, basis, cost, enter_limit);
        // Bland: smallest-index column with negative reduced cost
        let entering = match (0..enter_limit).find(|&j| rc[j] < -PIVOT_EPS && !basis.contains(&j)) {
            Some(j) => j,
            None => return true,
        };
        // ratio test, Bland tie-break on smallest basis index
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = t[i * width + entering];
            if aij > PIVOT_EPS {
                let ratio = t[i * width + width - 1] / aij;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - PIVOT_EPS
                            || (ratio < lr + PIVOT_EPS && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (row, _) = match leave {
            Some(v) => v,
            None => return false,
        };
        pivot(t, m, width, row, entering);
        basis[row] = entering;
    }
}

fn pivot(t: &mut [f64], m: usize, width: usize, row: usize, col: usize) {
    let p = t[row * width + col];
    for j in 0..width {
        t[row * width + j] /= p;
    }
    for i in 0..m {
        if i == row {
            continue;
        }
        let f = t[i * width + col];
        if f == 0.0 {
            continue;
        }
        for j in 0..width {
            t[i * width + j] -= f * t[row * width + j];
        }
    }
}
