//! The d-dimensional block partition of `[0,1]^d`, data binning, and the
//! coordinatewise partial order on block indices.
//!
//! Block `(1,...,1)` is the closed cell `[0,1/J]^d`; every other block is the
//! half-open product of `((j_k-1)/J, j_k/J]`, so the cells partition the cube.
//!
//! Flat storage is row-major over axes `1..d`: the last axis varies fastest.
//! `offset(j) = sum_k (j_k - 1) * J^(d-1-k)` for zero-based axis `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension and per-axis resolution of the block partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    d: usize,
    j: usize,
}

impl GridSpec {
    pub fn new(d: usize, j: usize) -> Result<Self> {
        if d == 0 || j == 0 {
            return Err(Error::Config(format!("grid requires d >= 1, J >= 1; got d={d}, J={j}")));
        }
        // J^d must fit in usize.
        let mut total: usize = 1;
        for _ in 0..d {
            total = total
                .checked_mul(j)
                .ok_or_else(|| Error::Config(format!("block count {j}^{d} overflows index type")))?;
        }
        Ok(GridSpec { d, j })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> usize {
        self.j
    }

    /// Total number of blocks `J^d`.
    pub fn num_blocks(&self) -> usize {
        self.j.pow(self.d as u32)
    }

    /// Row-major flat offset of a multi-index (1-based coordinates).
    pub fn offset(&self, idx: &MultiIndex) -> usize {
        debug_assert_eq!(idx.coords.len(), self.d);
        let mut off = 0;
        for &c in &idx.coords {
            debug_assert!(c >= 1 && c <= self.j);
            off = off * self.j + (c - 1);
        }
        off
    }

    /// Inverse of [`GridSpec::offset`].
    pub fn multi_index(&self, mut off: usize) -> MultiIndex {
        let mut coords = vec![1usize; self.d];
        for k in (0..self.d).rev() {
            coords[k] = off % self.j + 1;
            off /= self.j;
        }
        MultiIndex { coords }
    }

    /// Iterates all flat offsets paired with their multi-indices.
    pub fn indices(&self) -> impl Iterator<Item = (usize, MultiIndex)> + '_ {
        (0..self.num_blocks()).map(move |off| (off, self.multi_index(off)))
    }

    /// Immediate successors of `off` in the partial order: one step along each
    /// axis. Checking only these suffices for monotonicity, by transitivity.
    pub fn axis_successors(&self, off: usize) -> Vec<usize> {
        let idx = self.multi_index(off);
        let mut out = Vec::with_capacity(self.d);
        let mut stride = 1;
        for k in (0..self.d).rev() {
            if idx.coords[k] < self.j {
                out.push(off + stride);
            }
            stride *= self.j;
        }
        out
    }
}

/// A block index: length-d coordinates, each in `[1, J]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub coords: Vec<usize>,
}

impl MultiIndex {
    /// Componentwise partial order: `self` precedes `other` iff every
    /// coordinate is `<=`.
    pub fn precedes(&self, other: &MultiIndex) -> bool {
        self.coords.len() == other.coords.len()
            && self.coords.iter().zip(&other.coords).all(|(a, b)| a <= b)
    }
}

/// Observed data: an `n x d` design in `[0,1]^d` and responses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Parse("dataset must contain at least one observation".into()));
        }
        if x.len() != y.len() {
            return Err(Error::Parse(format!(
                "design has {} rows but response has {} entries",
                x.len(),
                y.len()
            )));
        }
        let d = x[0].len();
        if d == 0 {
            return Err(Error::Parse("dataset must have at least one predictor".into()));
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Parse(format!("row {}: expected {} predictors, found {}", i + 1, d, row.len())));
            }
            for (k, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                    return Err(Error::Parse(format!("row {}: x{} = {} outside [0,1]", i + 1, k + 1, v)));
                }
            }
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Parse(format!("row {}: non-finite response {}", i + 1, v)));
            }
        }
        Ok(Dataset { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

/// Per-block counts and response means from binned data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockStats {
    pub grid: GridSpec,
    /// N_j per block; sums to n.
    pub counts: Vec<usize>,
    /// Mean response per block; 0 for empty blocks. The zero is a storage
    /// placeholder only: posterior formulas weight every use by N_j.
    pub means: Vec<f64>,
    /// Total sum of squared responses over all observations.
    pub sum_sq: f64,
}

impl BlockStats {
    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Empirical block weights N_j / n.
    pub fn empirical_weights(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Maps a point to the unique block containing it.
///
/// Coordinate `x_k` maps to `max(1, ceil(x_k * J))`; zeros land in block 1.
pub fn block_index(x: &[f64], grid: &GridSpec) -> Result<MultiIndex> {
    if x.len() != grid.dim() {
        return Err(Error::Domain(format!("point has {} coordinates, grid expects {}", x.len(), grid.dim())));
    }
    let j = grid.resolution() as f64;
    let mut coords = Vec::with_capacity(x.len());
    for (k, &v) in x.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("coordinate x{} = {} outside [0,1]", k + 1, v)));
        }
        let c = (v * j).ceil() as usize;
        coords.push(c.max(1));
    }
    Ok(MultiIndex { coords })
}

/// Bins a dataset into per-block counts and means.
pub fn bin(data: &Dataset, grid: &GridSpec) -> Result<BlockStats> {
    if data.dim() != grid.dim() {
        return Err(Error::Config(format!("dataset dimension {} does not match grid dimension {}", data.dim(), grid.dim())));
    }
    let m = grid.num_blocks();
    let mut counts = vec![0usize; m];
    let mut sums = vec![0.0f64; m];
    let mut sum_sq = 0.0;
    for (row, &y) in data.x().iter().zip(data.y()) {
        let off = grid.offset(&block_index(row, grid)?);
        counts[off] += 1;
        sums[off] += y;
        sum_sq += y * y;
    }
    let means = counts
        .iter()
        .zip(&sums)
        .map(|(&c, &s)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    Ok(BlockStats { grid: *grid, counts, means, sum_sq })
}

/// A block-constant function: a flat row-major coefficient array over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub grid: GridSpec,
    pub theta: Vec<f64>,
}

impl StepFunction {
    pub fn new(grid: GridSpec, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != grid.num_blocks() {
            return Err(Error::Config(format!(
                "theta length {} does not match block count {}",
                theta.len(),
                grid.num_blocks()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("theta contains non-finite values".into()));
        }
        Ok(StepFunction { grid, theta })
    }

    /// Evaluates the step function at a point of `[0,1]^d`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let idx = block_index(x, &self.grid)?;
        Ok(self.theta[self.grid.offset(&idx)])
    }
}

/// True iff the coefficient array respects the coordinatewise partial order.
/// Only immediate axis successors are compared, which is equivalent to the
/// all-pairs condition by transitivity.
pub fn is_monotone(f: &StepFunction) -> bool {
    for off in 0..f.grid.num_blocks() {
        for succ in f.grid.axis_successors(off) {
            if f.theta[off] > f.theta[succ] {
                return false;
            }
        }
    }
    true
}
