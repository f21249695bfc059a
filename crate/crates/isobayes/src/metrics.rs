//! Distances between step functions under empirical, Lebesgue, and Hellinger
//! geometries, plus quadrature against a smooth reference function.

use crate::error::{Error, Result};
use crate::grid::{BlockStats, GridSpec, StepFunction};
use crate::projection::WeightVector;

/// Default midpoint-quadrature nodes per axis per cell.
pub const DEFAULT_QUAD_PER_CELL: usize = 8;

/// The measure weighting each block of a grid.
#[derive(Debug, Clone)]
pub enum Measure {
    /// Block weights N_j / n from binned data.
    Empirical(BlockStats),
    /// Uniform weights J^{-d}.
    Lebesgue,
    /// Arbitrary nonnegative weights summing to 1 (within 1e-9).
    Explicit(WeightVector),
}

impl Measure {
    /// Block weights for `grid`, validating compatibility.
    pub fn weights(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        match self {
            Measure::Empirical(stats) => {
                if stats.grid != *grid {
                    return Err(Error::Domain("measure and function grids differ".into()));
                }
                Ok(stats.empirical_weights())
            }
            Measure::Lebesgue => {
                let w = 1.0 / grid.num_blocks() as f64;
                Ok(vec![w; grid.num_blocks()])
            }
            Measure::Explicit(w) => {
                if w.as_slice().len() != grid.num_blocks() {
                    return Err(Error::Domain("measure weight length does not match the grid".into()));
                }
                let total: f64 = w.as_slice().iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!(
                        "explicit measure weights sum to {total}, expected 1"
                    )));
                }
                Ok(w.as_slice().to_vec())
            }
        }
    }
}

fn check_grids(f: &StepFunction, g: &StepFunction) -> Result<()> {
    if f.grid != g.grid {
        return Err(Error::Domain("step functions live on different grids".into()));
    }
    Ok(())
}

/// Lp(mu) distance between two step functions on a shared grid.
pub fn lp_distance(f: &StepFunction, g: &StepFunction, mu: &Measure, p: f64) -> Result<f64> {
    check_grids(f, g)?;
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be >= 1, got {p}")));
    }
    let w = mu.weights(&f.grid)?;
    let sum: f64 = f
        .theta
        .iter()
        .zip(&g.theta)
        .zip(&w)
        .map(|((a, b), wj)| wj * (a - b).abs().powf(p))
        .sum();
    Ok(sum.powf(1.0 / p))
}

/// Lp(Lebesgue) distance from a step function to an arbitrary reference,
/// by the midpoint rule with `quad_per_cell^d` nodes per block. The error is
/// O(1/quad_per_cell) for monotone references.
pub fn lp_distance_to_function(
    f: &StepFunction,
    f0: &dyn Fn(&[f64]) -> f64,
    p: f64,
    quad_per_cell: usize,
) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be >= 1, got {p}")));
    }
    if quad_per_cell == 0 {
        return Err(Error::Domain("quad_per_cell must be at least 1".into()));
    }
    let d = f.grid.dim();
    let j = f.grid.resolution();
    let nodes_per_cell = quad_per_cell.pow(d as u32);
    let cell_w = 1.0 / (f.grid.num_blocks() * nodes_per_cell) as f64;
    let mut x = vec![0.0f64; d];
    let mut sum = 0.0;
    for (off, idx) in f.grid.indices() {
        let theta = f.theta[off];
        // midpoint nodes of the cell, odometer over d axes
        let mut node = vec![0usize; d];
        loop {
            for k in 0..d {
                let lo = (idx.coords[k] - 1) as f64 / j as f64;
                x[k] = lo + (node[k] as f64 + 0.5) / (quad_per_cell * j) as f64;
            }
            sum += cell_w * (theta - f0(&x)).abs().powf(p);
            let mut k = d;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                node[k] += 1;
                if node[k] < quad_per_cell {
                    break;
                }
                node[k] = 0;
            }
            if node.iter().all(|&v| v == 0) {
                break;
            }
        }
    }
    Ok(sum.powf(1.0 / p))
}

/// Hellinger distance between the Gaussian regression models induced by two
/// step functions with common noise level `sigma`:
/// `sqrt(2 (1 - sum_j w_j exp(-(f_j - g_j)^2 / (8 sigma^2))))`.
pub fn hellinger_distance(f: &StepFunction, g: &StepFunction, sigma: f64, mu: &Measure) -> Result<f64> {
    check_grids(f, g)?;
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let w = mu.weights(&f.grid)?;
    let affinity: f64 = f
        .theta
        .iter()
        .zip(&g.theta)
        .zip(&w)
        .map(|((a, b), wj)| {
            let d = a - b;
            wj * (-d * d / (8.0 * sigma * sigma)).exp()
        })
        .sum();
    Ok((2.0 * (1.0 - affinity).max(0.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{bin, Dataset};
    use rand::Rng;

    fn step(d: usize, j: usize, theta: Vec<f64>) -> StepFunction {
        StepFunction::new(GridSpec::new(d, j).unwrap(), theta).unwrap()
    }

    #[test]
    fn identical_functions_are_at_distance_zero() {
        let f = step(1, 2, vec![1.0, 2.0]);
        assert_eq!(lp_distance(&f, &f, &Measure::Lebesgue, 1.0).unwrap(), 0.0);
        assert_eq!(hellinger_distance(&f, &f, 0.3, &Measure::Lebesgue).unwrap(), 0.0);
    }

    #[test]
    fn lebesgue_l1_hand_value() {
        let f = step(1, 2, vec![0.0, 0.0]);
        let g = step(1, 2, vec![1.0, 3.0]);
        let d = lp_distance(&f, &g, &Measure::Lebesgue, 1.0).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_error() {
        let f = step(1, 2, vec![0.0, 0.0]);
        let g = step(1, 3, vec![0.0, 0.0, 0.0]);
        assert!(lp_distance(&f, &g, &Measure::Lebesgue, 1.0).is_err());
    }

    #[test]
    fn explicit_weights_must_sum_to_one() {
        let f = step(1, 2, vec![0.0, 0.0]);
        let w = WeightVector::new(vec![0.7, 0.7]).unwrap();
        assert!(lp_distance(&f, &f, &Measure::Explicit(w), 1.0).is_err());
    }

    #[test]
    fn empirical_weights_come_from_counts() {
        let data = Dataset::new(vec![vec![0.1], vec![0.2], vec![0.9]], vec![0.0; 3]).unwrap();
        let stats = bin(&data, &GridSpec::new(1, 2).unwrap()).unwrap();
        let f = step(1, 2, vec![0.0, 0.0]);
        let g = step(1, 2, vec![3.0, 3.0]);
        let d = lp_distance(&f, &g, &Measure::Empirical(stats), 1.0).unwrap();
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_inequality_random_triples() {
        let mut rng = crate::rng::stream_rng(5, 0);
        for _ in 0..1000 {
            let grid = GridSpec::new(2, 2).unwrap();
            let rand_step = |rng: &mut rand_chacha::ChaCha8Rng| {
                StepFunction::new(grid, (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
            };
            let (f, g, h) = (rand_step(&mut rng), rand_step(&mut rng), rand_step(&mut rng));
            for p in [1.0, 2.0] {
                let fg = lp_distance(&f, &g, &Measure::Lebesgue, p).unwrap();
                let fh = lp_distance(&f, &h, &Measure::Lebesgue, p).unwrap();
                let hg = lp_distance(&h, &g, &Measure::Lebesgue, p).unwrap();
                assert!(fg <= fh + hg + 1e-12);
            }
            let fg = hellinger_distance(&f, &g, 0.5, &Measure::Lebesgue).unwrap();
            let fh = hellinger_distance(&f, &h, 0.5, &Measure::Lebesgue).unwrap();
            let hg = hellinger_distance(&h, &g, 0.5, &Measure::Lebesgue).unwrap();
            assert!(fg <= fh + hg + 1e-12, "{fg} > {fh} + {hg}");
        }
    }

    #[test]
    fn quadrature_constant_is_exact() {
        let f = step(2, 3, vec![4.0; 9]);
        let d = lp_distance_to_function(&f, &|_| 4.0, 1.0, 4).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn quadrature_identity_midpoint_step() {
        // f0(x) = x, J=2 cell-midpoint step: integral of |x - midpoint| is
        // 2 * (1/4)^2 / 4 per cell... total 1/8
        let f = step(1, 2, vec![0.25, 0.75]);
        let d = lp_distance_to_function(&f, &|x| x[0], 1.0, 2000).unwrap();
        assert!((d - 0.125).abs() < 1e-6, "{d}");
    }

    #[test]
    fn quadrature_error_shrinks_with_resolution() {
        // best-J step approximations of f0(x)=x halve the distance as J doubles
        let mut prev = f64::INFINITY;
        for j in [2usize, 4, 8] {
            let theta: Vec<f64> = (0..j).map(|k| (k as f64 + 0.5) / j as f64).collect();
            let f = step(1, j, theta);
            let d = lp_distance_to_function(&f, &|x| x[0], 1.0, 500).unwrap();
            assert!(d < prev * 0.6, "J={j}: {d} vs {prev}");
            prev = d;
        }
    }

    #[test]
    fn hellinger_constant_gap_closed_form() {
        let f = step(2, 2, vec![0.0; 4]);
        let g = step(2, 2, vec![0.7; 4]);
        let sigma = 0.25;
        let d = hellinger_distance(&f, &g, sigma, &Measure::Lebesgue).unwrap();
        let expect = (2.0 * (1.0 - (-0.49f64 / (8.0 * sigma * sigma)).exp())).sqrt();
        assert!((d - expect).abs() < 1e-12);
    }

    #[test]
    fn hellinger_bounded_and_monotone_in_gap() {
        let f = step(1, 1, vec![0.0]);
        let mut prev = 0.0;
        for gap in [0.1, 0.5, 1.0, 5.0, 50.0] {
            let g = step(1, 1, vec![gap]);
            let d = hellinger_distance(&f, &g, 0.3, &Measure::Lebesgue).unwrap();
            assert!(d > prev && d <= 2.0f64.sqrt() + 1e-15);
            prev = d;
        }
    }

    #[test]
    fn empirical_tracks_lebesgue_on_uniform_designs() {
        let mut rng = crate::rng::stream_rng(5, 1);
        let n = 20000;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let data = Dataset::new(x, vec![0.0; n]).unwrap();
        let grid = GridSpec::new(2, 2).unwrap();
        let stats = bin(&data, &grid).unwrap();
        let f = StepFunction::new(grid, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let g = StepFunction::new(grid, vec![1.0, 0.0, 3.0, 2.0]).unwrap();
        let emp = lp_distance(&f, &g, &Measure::Empirical(stats), 1.0).unwrap();
        let leb = lp_distance(&f, &g, &Measure::Lebesgue, 1.0).unwrap();
        assert!((emp - leb).abs() < 0.05, "{emp} vs {leb}");
    }
}
