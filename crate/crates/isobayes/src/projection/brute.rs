//! Exhaustive projection oracle for small instances.
//!
//! For p=2, enumerates subsets of the covering relations of the induced order
//! on positive-weight blocks; each subset pins equality classes whose optimal
//! value is the weighted mean, and the best feasible candidate is the exact
//! projection (the true active set is among the subsets). For p=1, exploits
//! that an optimal solution takes values from the input value set and
//! enumerates monotone assignments with pruning.

use crate::error::{Error, Result};
use crate::grid::{MultiIndex, StepFunction};
use crate::projection::WeightVector;

const MAX_BLOCKS: usize = 12;

pub fn brute_force_project(f: &StepFunction, w: &WeightVector, p: u8) -> Result<StepFunction> {
    let m = f.grid.num_blocks();
    if m > MAX_BLOCKS {
        return Err(Error::Guard(format!("brute force limited to {MAX_BLOCKS} blocks, got {m}")));
    }
    if !(p == 1 || p == 2) {
        return Err(Error::Domain(format!("p must be 1 or 2, got {p}")));
    }
    let ws = w.as_slice();
    if ws.len() != m {
        return Err(Error::Config("weight vector does not conform to the grid".into()));
    }
    let idx: Vec<MultiIndex> = (0..m).map(|v| f.grid.multi_index(v)).collect();
    let support: Vec<usize> = (0..m).filter(|&v| ws[v] > 0.0).collect();

    // strict comparable pairs within the support, in support-local indices
    let k = support.len();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a != b && idx[support[a]].precedes(&idx[support[b]]) {
                pairs.push((a, b));
            }
        }
    }

    let y: Vec<f64> = support.iter().map(|&v| f.theta[v]).collect();
    let wt: Vec<f64> = support.iter().map(|&v| ws[v]).collect();

    let best = if p == 2 {
        solve_l2(&y, &wt, &pairs)?
    } else {
        solve_l1(&y, &wt, &pairs)
    };

    // assemble the full function: forward clamp fill for zero-weight blocks
    let mut theta = f.theta.clone();
    let mut fixed = vec![false; m];
    for (si, &v) in support.iter().enumerate() {
        theta[v] = best[si];
        fixed[v] = true;
    }
    for z in 0..m {
        if fixed[z] {
            continue;
        }
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for s in 0..m {
            if s == z {
                continue;
            }
            // predecessors (fixed or already filled earlier in offset order)
            if idx[s].precedes(&idx[z]) && (fixed[s] || s < z) {
                lo = lo.max(theta[s]);
            }
            if fixed[s] && idx[z].precedes(&idx[s]) {
                hi = hi.min(theta[s]);
            }
        }
        theta[z] = theta[z].clamp(lo.min(hi), hi.max(lo));
    }
    StepFunction::new(f.grid, theta)
}

/// Exact weighted L2 projection by active-constraint-subset enumeration.
fn solve_l2(y: &[f64], w: &[f64], pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let k = y.len();
    // covering relations only: drop pairs implied through a third vertex
    let comparable = |a: usize, b: usize| pairs.contains(&(a, b));
    let covers: Vec<(usize, usize)> = pairs
        .iter()
        .copied()
        .filter(|&(a, b)| !(0..k).any(|c| c != a && c != b && comparable(a, c) && comparable(c, b)))
        .collect();
    if covers.len() > 24 {
        return Err(Error::Guard(format!("too many covering relations: {}", covers.len())));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u64..(1u64 << covers.len()) {
        // union-find over forced equalities
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(parent: &mut Vec<usize>, v: usize) -> usize {
            if parent[v] != v {
                let r = find(parent, parent[v]);
                parent[v] = r;
            }
            parent[v]
        }
        for (e, &(a, b)) in covers.iter().enumerate() {
            if mask & (1 << e) != 0 {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, b);
                parent[ra] = rb;
            }
        }
        let mut num = vec![0.0f64; k];
        let mut den = vec![0.0f64; k];
        for v in 0..k {
            let r = find(&mut parent, v);
            num[r] += w[v] * y[v];
            den[r] += w[v];
        }
        let vals: Vec<f64> = (0..k)
            .map(|v| {
                let r = find(&mut parent, v);
                num[r] / den[r]
            })
            .collect();
        if pairs.iter().any(|&(a, b)| vals[a] > vals[b] + 1e-12) {
            continue;
        }
        let obj: f64 = (0..k).map(|v| w[v] * (vals[v] - y[v]).powi(2)).sum();
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, vals));
        }
    }
    Ok(best.expect("the all-pooled candidate is always feasible").1)
}

/// Exact weighted L1 projection over assignments from the input value set,
/// tie-broken toward the enumerated minimizer closest in unweighted L2.
fn solve_l1(y: &[f64], w: &[f64], pairs: &[(usize, usize)]) -> Vec<f64> {
    let k = y.len();
    let mut candidates: Vec<f64> = y.to_vec();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();

    // offset order is topological for the grid order, so a < b here
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(a, b) in pairs {
        debug_assert!(a < b);
        preds[b].push(a);
    }

    let mut assign = vec![0.0f64; k];
    let mut best_cost = f64::INFINITY;
    let mut best_tie = f64::INFINITY;
    let mut best = y.to_vec();

    fn dfs(
        v: usize,
        k: usize,
        cost: f64,
        candidates: &[f64],
        y: &[f64],
        w: &[f64],
        preds: &[Vec<usize>],
        assign: &mut Vec<f64>,
        best_cost: &mut f64,
        best_tie: &mut f64,
        best: &mut Vec<f64>,
    ) {
        if cost > *best_cost + 1e-12 {
            return;
        }
        if v == k {
            let tie: f64 = (0..k).map(|i| (assign[i] - y[i]).powi(2)).sum();
            if cost < *best_cost - 1e-12 || (cost <= *best_cost + 1e-12 && tie < *best_tie) {
                *best_cost = cost.min(*best_cost);
                *best_tie = tie;
                *best = assign.clone();
            }
            return;
        }
        let lb = preds[v].iter().map(|&p| assign[p]).fold(f64::NEG_INFINITY, f64::max);
        for &c in candidates {
            if c < lb {
                continue;
            }
            assign[v] = c;
            dfs(v + 1, k, cost + w[v] * (c - y[v]).abs(), candidates, y, w, preds, assign, best_cost, best_tie, best);
        }
    }

    dfs(0, k, 0.0, &candidates, y, w, &preds, &mut assign, &mut best_cost, &mut best_tie, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::projection::weighted_lp;

    fn step(d: usize, j: usize, theta: Vec<f64>) -> StepFunction {
        StepFunction::new(GridSpec::new(d, j).unwrap(), theta).unwrap()
    }

    #[test]
    fn single_element_identity() {
        let f = step(1, 1, vec![7.0]);
        let w = WeightVector::new(vec![1.0]).unwrap();
        for p in [1, 2] {
            assert_eq!(brute_force_project(&f, &w, p).unwrap().theta, vec![7.0]);
        }
    }

    #[test]
    fn guard_on_large_instances() {
        let f = step(2, 4, vec![0.0; 16]);
        let w = WeightVector::new(vec![1.0; 16]).unwrap();
        assert!(matches!(brute_force_project(&f, &w, 2), Err(Error::Guard(_))));
    }

    #[test]
    fn l2_matches_pava_on_chains() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(31, 0);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6usize);
            let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            let f = step(1, n, theta.clone());
            let wv = WeightVector::new(w.clone()).unwrap();
            let b = brute_force_project(&f, &wv, 2).unwrap();
            let pava = crate::projection::pava_l2(&theta, &w);
            for (a, c) in b.theta.iter().zip(pava) {
                assert!((a - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn l1_two_by_two_exhaustive() {
        let f = step(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let w = WeightVector::new(vec![1.0; 4]).unwrap();
        let b = brute_force_project(&f, &w, 1).unwrap();
        let cost = weighted_lp(&f.theta, &b.theta, w.as_slice(), 1);
        assert!((cost - 1.0).abs() < 1e-12);
    }
}
