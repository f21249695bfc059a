//! Recursive partitioning solver for separable convex isotonic fitting on the
//! grid order DAG.
//!
//! Each active vertex carries a convex cost `w_abs*|t - y| + w_sq*(t - y)^2`.
//! A group is split by solving a max-weight closure problem with gains taken
//! from one-sided derivatives at the group minimizer; if neither an upper set
//! nor a lower set improves, the whole group sits at the minimizer. Inactive
//! grid vertices participate in cuts as zero-gain pass-throughs, which
//! enforces exactly the order relations induced on the active subset.

use crate::grid::GridSpec;
use crate::projection::flow::ClosureSolver;

#[derive(Debug, Clone, Copy)]
pub struct VertexCost {
    pub y: f64,
    pub w_abs: f64,
    pub w_sq: f64,
}

impl VertexCost {
    fn right_deriv(&self, t: f64) -> f64 {
        let s = if t >= self.y { 1.0 } else { -1.0 };
        self.w_abs * s + 2.0 * self.w_sq * (t - self.y)
    }

    fn left_deriv(&self, t: f64) -> f64 {
        let s = if t > self.y { 1.0 } else { -1.0 };
        self.w_abs * s + 2.0 * self.w_sq * (t - self.y)
    }
}

pub struct PartitionSolver {
    grid: GridSpec,
    closure: ClosureSolver,
    gains: Vec<f64>,
}

impl PartitionSolver {
    pub fn new(grid: GridSpec) -> Self {
        let m = grid.num_blocks();
        let mut order_edges = Vec::with_capacity(m * grid.dim());
        for off in 0..m {
            for succ in grid.axis_successors(off) {
                order_edges.push((off, succ));
            }
        }
        PartitionSolver {
            grid,
            closure: ClosureSolver::new(m, &order_edges),
            gains: vec![0.0; m],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Solves min sum of costs over `active` subject to the order constraints
    /// induced on `active`; writes fitted values into `out` at active offsets.
    /// `costs` is indexed by flat grid offset. Every active group must have
    /// positive total quadratic weight unless it carries absolute weight.
    pub fn solve(&mut self, active: &[usize], costs: &[VertexCost], out: &mut [f64]) {
        if active.is_empty() {
            return;
        }
        let mut stack: Vec<Vec<usize>> = vec![active.to_vec()];
        while let Some(group) = stack.pop() {
            let t = group_minimizer(&group, costs);
            if group.len() == 1 {
                out[group[0]] = t;
                continue;
            }
            if let Some((up, down)) = self.try_split(&group, costs, t) {
                stack.push(up);
                stack.push(down);
            } else {
                for &v in &group {
                    out[v] = t;
                }
            }
        }
    }

    /// Attempts an improving split at level `t`. Returns (upper, lower) parts.
    fn try_split(&mut self, group: &[usize], costs: &[VertexCost], t: f64) -> Option<(Vec<usize>, Vec<usize>)> {
        let mut scale: f64 = 0.0;
        for &v in group {
            let c = &costs[v];
            scale = scale.max(c.w_abs + 2.0 * c.w_sq * (t - c.y).abs());
        }
        let tol = 1e-12 * scale.max(1.0);

        // upward move: gains are negative right derivatives
        self.gains.iter_mut().for_each(|g| *g = 0.0);
        let mut has_kink = false;
        for &v in group {
            let c = &costs[v];
            self.gains[v] = -c.right_deriv(t);
            if c.w_abs > 0.0 && c.y == t {
                has_kink = true;
            }
        }
        let (w_up, sel) = self.closure.max_closure(&self.gains);
        if w_up > tol {
            let split = partition_by(group, |v| sel[v]);
            if let Some(parts) = split {
                return Some(parts);
            }
        }

        // downward move: only distinguishable from the upward test when a
        // kink sits exactly at t
        if has_kink {
            self.gains.iter_mut().for_each(|g| *g = 0.0);
            for &v in group {
                // best lower set with gains c'(t-) equals the complement of
                // the best upper set with the negated gains
                self.gains[v] = -costs[v].left_deriv(t);
            }
            let total_gl: f64 = group.iter().map(|&v| -self.gains[v]).sum();
            let (w, sel) = self.closure.max_closure(&self.gains);
            // w maximizes sum_U(-gl) over upper sets; the best lower set is
            // the complement, with weight total_gl + w.
            let best_lower = total_gl + w;
            if best_lower > tol {
                let split = partition_by(group, |v| sel[v]);
                if let Some((up, down)) = split {
                    return Some((up, down));
                }
            }
        }
        None
    }
}

/// Splits a group by a predicate marking the upper part; None if improper.
fn partition_by(group: &[usize], upper: impl Fn(usize) -> bool) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut up = Vec::new();
    let mut down = Vec::new();
    for &v in group {
        if upper(v) {
            up.push(v);
        } else {
            down.push(v);
        }
    }
    if up.is_empty() || down.is_empty() {
        None
    } else {
        Some((up, down))
    }
}

/// Exact minimizer of the summed piecewise-quadratic convex cost of a group.
pub fn group_minimizer(group: &[usize], costs: &[VertexCost]) -> f64 {
    let mut pts: Vec<(f64, f64, f64)> = group
        .iter()
        .map(|&v| (costs[v].y, costs[v].w_abs, costs[v].w_sq))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let total_abs: f64 = pts.iter().map(|p| p.1).sum();
    let total_sq: f64 = pts.iter().map(|p| p.2).sum();
    let total_sq_y: f64 = pts.iter().map(|p| p.2 * p.0).sum();

    if total_sq <= 0.0 {
        // pure L1: weighted median of breakpoints
        return weighted_median(&pts, total_abs);
    }

    // derivative on the interval left of pts[g]:
    //   D(t) = (abs_left - abs_right) + 2*total_sq*t - 2*total_sq_y
    let mut abs_left = 0.0;
    let mut g = 0;
    let m = pts.len();
    loop {
        let abs_right = total_abs - abs_left;
        let root = (2.0 * total_sq_y - (abs_left - abs_right)) / (2.0 * total_sq);
        let lo = if g == 0 { f64::NEG_INFINITY } else { pts[g - 1].0 };
        let hi = if g == m { f64::INFINITY } else { pts[g].0 };
        if root <= hi {
            return root.max(lo);
        }
        if g == m {
            return root;
        }
        abs_left += pts[g].1;
        g += 1;
    }
}

fn weighted_median(sorted_pts: &[(f64, f64, f64)], total_abs: f64) -> f64 {
    let half = total_abs / 2.0;
    let mut acc = 0.0;
    for p in sorted_pts {
        acc += p.1;
        if acc >= half {
            return p.0;
        }
    }
    sorted_pts.last().map(|p| p.0).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn cost_sq(y: f64, w: f64) -> VertexCost {
        VertexCost { y, w_abs: 0.0, w_sq: w }
    }

    #[test]
    fn minimizer_is_weighted_mean_for_quadratic() {
        let costs = vec![cost_sq(1.0, 1.0), cost_sq(3.0, 3.0)];
        let t = group_minimizer(&[0, 1], &costs);
        assert!((t - 2.5).abs() < 1e-12);
    }

    #[test]
    fn minimizer_handles_flat_l1_interval() {
        // |t-1| + |t-2| flat on [1,2]; tiny quadratic picks the midpoint
        let costs = vec![
            VertexCost { y: 2.0, w_abs: 1.0, w_sq: 1e-9 },
            VertexCost { y: 1.0, w_abs: 1.0, w_sq: 1e-9 },
        ];
        let t = group_minimizer(&[0, 1], &costs);
        assert!((t - 1.5).abs() < 1e-9, "t = {t}");
    }

    #[test]
    fn minimizer_lands_on_kink() {
        // |t-1| + 2|t| has its minimum at 0
        let costs = vec![
            VertexCost { y: 1.0, w_abs: 1.0, w_sq: 1e-9 },
            VertexCost { y: 0.0, w_abs: 2.0, w_sq: 1e-9 },
        ];
        let t = group_minimizer(&[0, 1], &costs);
        assert!(t.abs() < 1e-9, "t = {t}");
    }

    #[test]
    fn chain_quadratic_matches_pava_by_hand() {
        let grid = GridSpec::new(1, 2).unwrap();
        let mut solver = PartitionSolver::new(grid);
        let costs = vec![cost_sq(2.0, 1.0), cost_sq(1.0, 1.0)];
        let mut out = vec![0.0; 2];
        solver.solve(&[0, 1], &costs, &mut out);
        assert!((out[0] - 1.5).abs() < 1e-12);
        assert!((out[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn monotone_input_left_unchanged() {
        let grid = GridSpec::new(1, 3).unwrap();
        let mut solver = PartitionSolver::new(grid);
        let costs = vec![cost_sq(1.0, 1.0), cost_sq(2.0, 0.5), cost_sq(3.0, 2.0)];
        let mut out = vec![0.0; 3];
        solver.solve(&[0, 1, 2], &costs, &mut out);
        assert_eq!(out, vec![1.0, 2.0, 3.0]);
    }
}
