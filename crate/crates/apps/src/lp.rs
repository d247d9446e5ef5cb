//! Tiny linear programs over nonnegative variables, solved by enumerating
//! basic solutions. Meant for a handful of variables and constraints.

const PIVOT_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-10;

/// A constraint `row · x >= rhs` (or `== rhs` when used as an equality).
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub row: Vec<f64>,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(row: Vec<f64>, rhs: f64) -> Self {
        Self { row, rhs }
    }

    fn lhs(&self, x: &[f64]) -> f64 {
        self.row.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Solves `A x = b` for square `A` by Gaussian elimination with partial
/// pivoting; `None` when `A` is (numerically) singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < PIVOT_TOL {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Minimizes `cost · x` over `x >= 0` subject to `ge` and `eq`.
///
/// Returns the first optimal basic solution in enumeration order, or
/// `None` when no basic solution is feasible. The objective must be
/// bounded below on the feasible set.
pub fn minimize(cost: &[f64], ge: &[Constraint], eq: &[Constraint]) -> Option<Vec<f64>> {
    let n = cost.len();
    if eq.len() > n {
        return None;
    }
    let mut rows: Vec<Constraint> = ge.to_vec();
    for k in 0..n {
        let mut row = vec![0.0; n];
        row[k] = 1.0;
        rows.push(Constraint::new(row, 0.0));
    }
    let feasible = |x: &[f64]| {
        x.iter().all(|&v| v >= -FEAS_TOL)
            && ge.iter().all(|c| c.lhs(x) >= c.rhs - FEAS_TOL)
            && eq.iter().all(|c| (c.lhs(x) - c.rhs).abs() <= FEAS_TOL)
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for active in combinations(rows.len(), n - eq.len()) {
        let mut a: Vec<Vec<f64>> = eq.iter().map(|c| c.row.clone()).collect();
        let mut b: Vec<f64> = eq.iter().map(|c| c.rhs).collect();
        for &r in &active {
            a.push(rows[r].row.clone());
            b.push(rows[r].rhs);
        }
        let Some(mut x) = solve_square(a, b) else { continue };
        if !feasible(&x) {
            continue;
        }
        x.iter_mut().for_each(|v| {
            if v.abs() < FEAS_TOL {
                *v = 0.0
            }
        });
        let obj: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o - FEAS_TOL) {
            best = Some((obj, x));
        }
    }
    best.map(|(_, x)| x)
}
