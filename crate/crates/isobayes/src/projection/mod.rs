//! Weighted L1/L2 projection onto the monotone cone over the grid order.
//!
//! The workhorse is a recursive partitioning solver driven by max-closure
//! cuts ([`partition`]); L2 on one axis takes the weighted
//! pool-adjacent-violators fast path. The L1 projection is tie-broken to the
//! minimizer closest to the input in unweighted L2 distance, obtained by a
//! vanishing quadratic regularization of the objective.

mod brute;
mod flow;
mod partition;
mod pava;

pub use brute::brute_force_project;
pub use partition::{PartitionSolver, VertexCost};
pub use pava::pava_l2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{is_monotone, GridSpec, StepFunction};

/// Absolute tolerance for cone feasibility checks.
pub const CONE_TOL: f64 = 1e-9;

/// Block weights G*(I_j): empirical N_j/n, Lebesgue J^{-d}, or explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("weights must be finite and nonnegative".into()));
        }
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::Config("weights must not all be zero".into()));
        }
        Ok(WeightVector { w })
    }

    pub fn uniform(grid: &GridSpec) -> Self {
        WeightVector { w: vec![1.0 / grid.num_blocks() as f64; grid.num_blocks()] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    fn check_len(&self, grid: &GridSpec) -> Result<()> {
        if self.w.len() != grid.num_blocks() {
            return Err(Error::Config(format!(
                "weight vector length {} does not match block count {}",
                self.w.len(),
                grid.num_blocks()
            )));
        }
        Ok(())
    }
}

/// Weighted L2 projection onto the monotone cone.
///
/// Zero-weight blocks do not enter the objective; they are filled with the
/// cone-feasible values nearest (L2) to the input once the positive-weight
/// blocks are fixed.
pub fn project_l2(f: &StepFunction, w: &WeightVector) -> Result<StepFunction> {
    w.check_len(&f.grid)?;
    if is_monotone(f) {
        return Ok(f.clone());
    }
    let m = f.grid.num_blocks();
    let support: Vec<usize> = (0..m).filter(|&v| w.w[v] > 0.0).collect();

    let mut theta = f.theta.clone();
    if f.grid.dim() == 1 && support.len() == m {
        theta = pava_l2(&f.theta, &w.w);
    } else {
        let mut solver = PartitionSolver::new(f.grid);
        let costs: Vec<VertexCost> = (0..m)
            .map(|v| VertexCost { y: f.theta[v], w_abs: 0.0, w_sq: w.w[v] })
            .collect();
        solver.solve(&support, &costs, &mut theta);
        fill_free_blocks(&mut solver, f, &support, &mut theta);
    }
    repair_monotone(&f.grid, &mut theta);
    StepFunction::new(f.grid, theta)
}

/// Weighted L1 projection onto the monotone cone; among the convex set of
/// minimizers, returns the one closest to the input in unweighted L2.
pub fn project_l1(f: &StepFunction, w: &WeightVector) -> Result<StepFunction> {
    w.check_len(&f.grid)?;
    if is_monotone(f) {
        return Ok(f.clone());
    }
    let m = f.grid.num_blocks();
    let max_w = w.w.iter().cloned().fold(0.0f64, f64::max);
    let eps = 1e-11 * max_w;
    let mut solver = PartitionSolver::new(f.grid);
    let costs: Vec<VertexCost> = (0..m)
        .map(|v| VertexCost { y: f.theta[v], w_abs: w.w[v], w_sq: eps })
        .collect();
    let active: Vec<usize> = (0..m).collect();
    let mut theta = f.theta.clone();
    solver.solve(&active, &costs, &mut theta);
    repair_monotone(&f.grid, &mut theta);
    StepFunction::new(f.grid, theta)
}

/// Lp distance (weighted) from a step function to the monotone cone.
pub fn distance_to_cone(f: &StepFunction, w: &WeightVector, p: u8) -> Result<f64> {
    let proj = match p {
        1 => project_l1(f, w)?,
        2 => project_l2(f, w)?,
        _ => return Err(Error::Domain(format!("p must be 1 or 2, got {p}"))),
    };
    Ok(weighted_lp(&f.theta, &proj.theta, w.as_slice(), p))
}

/// (sum_j w_j |a_j - b_j|^p)^(1/p)
pub fn weighted_lp(a: &[f64], b: &[f64], w: &[f64], p: u8) -> f64 {
    let acc: f64 = a
        .iter()
        .zip(b)
        .zip(w)
        .map(|((&x, &y), &wj)| {
            let d = (x - y).abs();
            wj * if p == 1 { d } else { d * d }
        })
        .sum();
    if p == 1 {
        acc
    } else {
        acc.sqrt()
    }
}

/// Assigns zero-weight blocks: unit-weight isotonic fit on the free subgraph,
/// clamped to the bounds forced by the fixed positive-weight blocks.
fn fill_free_blocks(solver: &mut PartitionSolver, f: &StepFunction, support: &[usize], theta: &mut [f64]) {
    let m = f.grid.num_blocks();
    if support.len() == m {
        return;
    }
    let in_support = {
        let mut mask = vec![false; m];
        for &v in support {
            mask[v] = true;
        }
        mask
    };
    let free: Vec<usize> = (0..m).filter(|&v| !in_support[v]).collect();
    let costs: Vec<VertexCost> = (0..m)
        .map(|v| VertexCost { y: f.theta[v], w_abs: 0.0, w_sq: 1.0 })
        .collect();
    solver.solve(&free, &costs, theta);

    // clamp each free block into the interval allowed by fixed blocks
    let idx: Vec<_> = (0..m).map(|v| f.grid.multi_index(v)).collect();
    for &z in &free {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for &s in support {
            if idx[s].precedes(&idx[z]) {
                lo = lo.max(theta[s]);
            }
            if idx[z].precedes(&idx[s]) {
                hi = hi.min(theta[s]);
            }
        }
        theta[z] = theta[z].clamp(lo.min(hi), hi.max(lo));
    }
}

/// Forward sweep turning sub-tolerance float violations into exact
/// monotonicity; offsets are processed in row-major (topological) order.
fn repair_monotone(grid: &GridSpec, theta: &mut [f64]) {
    for off in 0..grid.num_blocks() {
        for succ in grid.axis_successors(off) {
            if theta[succ] < theta[off] {
                theta[succ] = theta[off];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{is_monotone, GridSpec, StepFunction};

    fn step(d: usize, j: usize, theta: Vec<f64>) -> StepFunction {
        StepFunction::new(GridSpec::new(d, j).unwrap(), theta).unwrap()
    }

    fn wv(w: Vec<f64>) -> WeightVector {
        WeightVector::new(w).unwrap()
    }

    #[test]
    fn l2_identity_on_monotone() {
        let f = step(1, 3, vec![1.0, 2.0, 3.0]);
        let p = project_l2(&f, &wv(vec![1.0, 1.0, 1.0])).unwrap();
        assert_eq!(p.theta, f.theta);
    }

    #[test]
    fn l2_pools_pair() {
        let f = step(1, 2, vec![2.0, 1.0]);
        let p = project_l2(&f, &wv(vec![1.0, 1.0])).unwrap();
        assert_eq!(p.theta, vec![1.5, 1.5]);
    }

    #[test]
    fn l2_weighted_pool() {
        let f = step(1, 2, vec![3.0, 1.0]);
        let p = project_l2(&f, &wv(vec![1.0, 3.0])).unwrap();
        assert_eq!(p.theta, vec![1.5, 1.5]);
    }

    #[test]
    fn l1_pair_tie_break_midpoint() {
        let f = step(1, 2, vec![2.0, 1.0]);
        let p = project_l1(&f, &wv(vec![1.0, 1.0])).unwrap();
        assert!((p.theta[0] - 1.5).abs() < 1e-6, "{:?}", p.theta);
        assert!((p.theta[1] - 1.5).abs() < 1e-6);
    }

    #[test]
    fn l1_two_by_two_example() {
        // theta_(1,1)=1, theta_(1,2)=0, theta_(2,1)=0, theta_(2,2)=1
        let f = step(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let p = project_l1(&f, &wv(vec![1.0; 4])).unwrap();
        let expect = [0.0, 0.0, 0.0, 1.0];
        for (a, b) in p.theta.iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{:?}", p.theta);
        }
        let cost = weighted_lp(&f.theta, &p.theta, &[1.0; 4], 1);
        assert!((cost - 1.0).abs() < 1e-6);
    }

    #[test]
    fn distance_examples() {
        let f = step(1, 2, vec![2.0, 1.0]);
        let d = distance_to_cone(&f, &wv(vec![0.5, 0.5]), 1).unwrap();
        assert!((d - 0.5).abs() < 1e-6);

        let g = step(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let d = distance_to_cone(&g, &wv(vec![0.25; 4]), 1).unwrap();
        assert!((d - 0.25).abs() < 1e-6);

        let mono = step(1, 3, vec![0.0, 0.5, 1.0]);
        assert_eq!(distance_to_cone(&mono, &wv(vec![1.0; 3]), 2).unwrap(), 0.0);
    }

    #[test]
    fn zero_weight_blocks_get_feasible_fill() {
        let f = step(1, 3, vec![5.0, -4.0, 1.0]);
        let p = project_l2(&f, &wv(vec![1.0, 0.0, 1.0])).unwrap();
        assert!(is_monotone(&p));
        // blocks 0 and 2 stay ordered through the zero-weight block, so the
        // violating pair pools to 3; the free block is pinned between them
        for &v in &p.theta {
            assert!((v - 3.0).abs() < 1e-9, "{:?}", p.theta);
        }
    }

    #[test]
    fn oracle_agreement_small_grids() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(77, 0);
        let shapes: Vec<(usize, usize)> = vec![(1, 4), (1, 8), (2, 2), (3, 2)];
        for &(d, j) in &shapes {
            let grid = GridSpec::new(d, j).unwrap();
            let m = grid.num_blocks();
            for trial in 0..100 {
                let theta: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let w: Vec<f64> = (0..m)
                    .map(|_| if trial % 5 == 0 && rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.05..1.5) })
                    .collect();
                if w.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let f = StepFunction::new(grid, theta).unwrap();
                let wv = WeightVector::new(w.clone()).unwrap();
                for p in [1u8, 2u8] {
                    let got = if p == 1 { project_l1(&f, &wv).unwrap() } else { project_l2(&f, &wv).unwrap() };
                    let oracle = brute_force_project(&f, &wv, p).unwrap();
                    let c_got = weighted_lp(&f.theta, &got.theta, &w, p);
                    let c_oracle = weighted_lp(&f.theta, &oracle.theta, &w, p);
                    assert!(
                        (c_got - c_oracle).abs() < 1e-9,
                        "p={p} d={d} j={j} got={c_got} oracle={c_oracle}\ninput={theta:?}\nw={w:?}",
                        theta = f.theta
                    );
                }
            }
        }
    }

    #[test]
    fn projections_outputs_monotone_random() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(21, 0);
        for _ in 0..200 {
            let d = rng.gen_range(1..=3usize);
            let j = rng.gen_range(1..=3usize);
            let grid = GridSpec::new(d, j).unwrap();
            let theta: Vec<f64> = (0..grid.num_blocks()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..grid.num_blocks())
                .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.1..1.0) })
                .collect();
            if w.iter().all(|&x| x == 0.0) {
                continue;
            }
            let f = StepFunction::new(grid, theta).unwrap();
            let wv = WeightVector::new(w).unwrap();
            for p in [project_l1(&f, &wv).unwrap(), project_l2(&f, &wv).unwrap()] {
                assert!(is_monotone(&p));
                let lo = f.theta.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = f.theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for &v in &p.theta {
                    assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
                }
            }
        }
    }
}
