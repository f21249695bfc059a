//! Bayesian monotonicity tests: the fixed-resolution L1 test, the adaptive
//! Hellinger test that draws J from its posterior, and the calibration of the
//! threshold constant M_n.
//!
//! Both tests estimate `Pi(distance(f, monotone cone) <= threshold | data)` by
//! Monte Carlo over posterior draws and reject when that probability falls
//! below `gamma`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bin, Dataset, GridSpec, StepFunction};
use crate::metrics::{hellinger_distance, Measure};
use crate::posterior::{
    default_j_max, posterior_over_j, posterior_params, resolve_sigma, sample_j, sample_one,
    PosteriorParams, PriorConfig, ResolvedSigma, SigmaMode,
};
use crate::projection::{distance_to_cone, project_l1, WeightVector};
use crate::rng::{stream_rng, subseed};

/// How the grid resolution J is chosen from the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JRule {
    /// J = ceil(n^{1/4})
    CeilN14,
    /// J = ceil(n^{1/4} log10 n)
    CeilN14Log,
    Fixed(usize),
    /// J = ceil(n^{1/(2+d)})
    OptimalRate,
}

impl JRule {
    pub fn resolve(&self, n: usize, d: usize) -> usize {
        let nf = n as f64;
        let j = match self {
            JRule::CeilN14 => nf.powf(0.25).ceil(),
            JRule::CeilN14Log => (nf.powf(0.25) * nf.log10()).ceil(),
            JRule::Fixed(j) => return (*j).max(1),
            JRule::OptimalRate => nf.powf(1.0 / (2.0 + d as f64)).ceil(),
        };
        (j as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Rejection cutoff on the posterior probability.
    pub gamma: f64,
    /// M_n = a (log n)^b.
    pub a: f64,
    pub b: f64,
    /// Threshold constant of the adaptive test.
    pub m0: f64,
    pub j_rule: JRule,
    /// Posterior sample count for the Monte Carlo probability.
    pub m_draws: usize,
    pub sigma_mode: SigmaMode,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            gamma: 0.5,
            a: 0.237,
            b: 0.234,
            m0: 1.0,
            j_rule: JRule::CeilN14,
            m_draws: 200,
            sigma_mode: SigmaMode::PlugInMmle,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        if !(self.a > 0.0 && self.m0 > 0.0) {
            return Err(Error::Config("a and M0 must be positive".into()));
        }
        if self.m_draws == 0 {
            return Err(Error::Config("m_draws must be at least 1".into()));
        }
        self.sigma_mode.validate()
    }

    /// M_n = a (log n)^b.
    pub fn mn(&self, n: usize) -> f64 {
        self.a * (n as f64).ln().powf(self.b)
    }
}

/// Resolution actually used by a test run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JUsed {
    Fixed(usize),
    /// Mean of the J values drawn by the adaptive test.
    PosteriorMean(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub reject: bool,
    pub posterior_prob: f64,
    pub threshold: f64,
    #[serde(rename = "J_used")]
    pub j_used: JUsed,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Per-draw distances, kept out of the serialized record.
    #[serde(skip)]
    pub distances: Vec<f64>,
}

/// Per-draw posterior distances to the cone under the empirical L1 measure,
/// at a fixed resolution. Shared by the fixed-J test and the calibration.
fn fixed_j_distances(
    params: &PosteriorParams,
    sigma: &ResolvedSigma,
    weights: &WeightVector,
    seed: u64,
    m_draws: usize,
) -> Result<Vec<f64>> {
    (0..m_draws)
        .into_par_iter()
        .map(|i| {
            let draw = sample_one(params, sigma, seed, i as u64)?;
            distance_to_cone(&draw.f, weights, 1)
        })
        .collect()
}

/// Fixed-resolution test: reject monotonicity when the posterior probability
/// of the empirical-L1 ball of radius `M_n n^{-1/(d+2)}` around the cone is
/// below gamma.
pub fn test_fixed_j(data: &Dataset, prior: &PriorConfig, cfg: &TestConfig, seed: u64) -> Result<TestResult> {
    cfg.validate()?;
    let (n, d) = (data.len(), data.dim());
    let j = cfg.j_rule.resolve(n, d);
    let grid = GridSpec::new(d, j)?;
    let stats = bin(data, &grid)?;
    let params = posterior_params(&stats, prior)?;
    let sigma = resolve_sigma(&cfg.sigma_mode, &stats, prior)?;
    let weights = WeightVector::new(stats.empirical_weights())?;
    let distances = fixed_j_distances(&params, &sigma, &weights, seed, cfg.m_draws)?;
    let threshold = cfg.mn(n) * (n as f64).powf(-1.0 / (d as f64 + 2.0));
    let posterior_prob =
        distances.iter().filter(|&&r| r <= threshold).count() as f64 / cfg.m_draws as f64;
    Ok(TestResult {
        reject: posterior_prob < cfg.gamma,
        posterior_prob,
        threshold,
        j_used: JUsed::Fixed(j),
        n,
        d,
        seed,
        distances,
    })
}

/// Adaptive test: J is drawn from its posterior per sample, the distance is
/// the Lebesgue Hellinger distance to the draw's L1-projection, and the
/// threshold scales as `M0 sqrt(J^d log n / n)`. Requires known sigma.
pub fn test_adaptive(data: &Dataset, prior: &PriorConfig, cfg: &TestConfig, seed: u64) -> Result<TestResult> {
    cfg.validate()?;
    let sigma = match cfg.sigma_mode {
        SigmaMode::Known(s) => s,
        _ => return Err(Error::Config("the adaptive test requires a known sigma".into())),
    };
    let (n, d) = (data.len(), data.dim());
    let j_max = default_j_max(n, d);
    let probs = posterior_over_j(data, prior, sigma, j_max)?;
    // posterior parameters at every candidate resolution, computed once
    let per_j: Vec<(PosteriorParams, WeightVector)> = (1..=j_max)
        .map(|j| {
            let grid = GridSpec::new(d, j)?;
            let stats = bin(data, &grid)?;
            Ok((posterior_params(&stats, prior)?, WeightVector::uniform(&grid)))
        })
        .collect::<Result<_>>()?;
    let log_n = (n as f64).ln();
    let draws: Vec<(f64, f64, usize)> = (0..cfg.m_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let j = sample_j(&probs, &mut rng);
            let (params, weights) = &per_j[j - 1];
            let theta: Vec<f64> = params
                .mean
                .iter()
                .zip(&params.var_scale)
                .map(|(&mu, &vs)| {
                    let z: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
                    mu + sigma * vs.sqrt() * z
                })
                .collect();
            let f = StepFunction::new(params.grid, theta)?;
            let proj = project_l1(&f, weights)?;
            let rho = hellinger_distance(&f, &proj, sigma, &Measure::Lebesgue)?;
            let thr = cfg.m0 * ((j as f64).powi(d as i32) * log_n / n as f64).sqrt();
            Ok((rho, thr, j))
        })
        .collect::<Result<_>>()?;
    let posterior_prob =
        draws.iter().filter(|(rho, thr, _)| rho <= thr).count() as f64 / cfg.m_draws as f64;
    let threshold = draws.iter().map(|(_, t, _)| t).sum::<f64>() / cfg.m_draws as f64;
    let j_mean = draws.iter().map(|(_, _, j)| *j as f64).sum::<f64>() / cfg.m_draws as f64;
    Ok(TestResult {
        reject: posterior_prob < cfg.gamma,
        posterior_prob,
        threshold,
        j_used: JUsed::PosteriorMean(j_mean),
        n,
        d,
        seed,
        distances: draws.into_iter().map(|(rho, _, _)| rho).collect(),
    })
}

/// Least-squares fit of `log(rho * n^{1/4}) = log a + b log log n` to pooled
/// `(n, rho)` pairs. Zero distances are dropped; a degenerate design (fewer
/// than two distinct n, or nothing left after filtering) is an error.
pub fn fit_mn(pairs: &[(usize, f64)]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(_, rho)| *rho > 0.0)
        .map(|&(n, rho)| {
            let nf = n as f64;
            (nf.ln().ln(), (rho * nf.powf(0.25)).ln())
        })
        .collect();
    if pts.is_empty() {
        return Err(Error::Calibration("no positive distances to fit".into()));
    }
    let m = pts.len() as f64;
    let xbar = pts.iter().map(|(x, _)| x).sum::<f64>() / m;
    let ybar = pts.iter().map(|(_, y)| y).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|(x, _)| (x - xbar) * (x - xbar)).sum();
    if sxx < 1e-12 {
        return Err(Error::Calibration(
            "log log n is constant across the pooled samples; need multiple sample sizes".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let b = sxy / sxx;
    let a = (ybar - b * xbar).exp();
    Ok((a, b))
}

/// Calibrates (a, b) of `M_n = a (log n)^b` by pooling posterior distance
/// samples across a function suite and a grid of sample sizes, as one would
/// before fixing the constants of the fixed-J test.
///
/// Each suite entry is a regression function on `[0,1]^d`; one dataset per
/// (function, n) pair is generated with uniform X and N(0, noise_sd^2) noise.
pub fn calibrate_mn(
    suite: &[&(dyn Fn(&[f64]) -> f64 + Sync)],
    d: usize,
    noise_sd: f64,
    n_grid: &[usize],
    prior: &PriorConfig,
    cfg: &TestConfig,
    seed: u64,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    if suite.is_empty() || n_grid.is_empty() {
        return Err(Error::Calibration("empty function suite or n grid".into()));
    }
    if !(noise_sd > 0.0) {
        return Err(Error::Config(format!("noise_sd must be positive, got {noise_sd}")));
    }
    let mut pairs = Vec::new();
    for (fi, f) in suite.iter().enumerate() {
        for (ni, &n) in n_grid.iter().enumerate() {
            let cell = subseed(seed, (fi * n_grid.len() + ni) as u64);
            let mut rng = stream_rng(cell, 0);
            let data = synth_dataset(f, d, noise_sd, n, &mut rng)?;
            let j = cfg.j_rule.resolve(n, d);
            let grid = GridSpec::new(d, j)?;
            let stats = bin(&data, &grid)?;
            let params = posterior_params(&stats, prior)?;
            let sigma = resolve_sigma(&cfg.sigma_mode, &stats, prior)?;
            let weights = WeightVector::new(stats.empirical_weights())?;
            let dists = fixed_j_distances(&params, &sigma, &weights, subseed(cell, 1), cfg.m_draws)?;
            pairs.extend(dists.into_iter().map(|rho| (n, rho)));
        }
    }
    fit_mn(&pairs)
}

fn synth_dataset(
    f: &dyn Fn(&[f64]) -> f64,
    d: usize,
    noise_sd: f64,
    n: usize,
    rng: &mut impl rand::Rng,
) -> Result<Dataset> {
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let eps: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
        y.push(f(&xi) + noise_sd * eps);
        x.push(xi);
    }
    Dataset::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TestConfig {
        TestConfig::default()
    }

    fn synth(f: impl Fn(&[f64]) -> f64, d: usize, n: usize, sd: f64, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, 0);
        synth_dataset(&f, d, sd, n, &mut rng).unwrap()
    }

    #[test]
    fn j_rules_match_hand_values() {
        assert_eq!(JRule::CeilN14.resolve(200, 2), 4);
        assert_eq!(JRule::CeilN14Log.resolve(100, 2), 7);
        assert_eq!(JRule::CeilN14Log.resolve(1000, 2), 17);
        assert_eq!(JRule::Fixed(3).resolve(10_000, 2), 3);
        assert_eq!(JRule::OptimalRate.resolve(500, 2), 5);
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad = TestConfig { gamma: 0.0, ..cfg() };
        assert!(bad.validate().is_err());
        let bad = TestConfig { m_draws: 0, ..cfg() };
        assert!(bad.validate().is_err());
        let bad = TestConfig { sigma_mode: SigmaMode::Known(-1.0), ..cfg() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn monotone_data_accepts() {
        // f6-style constant truth with mild noise
        let data = synth(|_| 0.0, 2, 300, 0.1, 11);
        let res = test_fixed_j(&data, &PriorConfig::default(), &cfg(), 3).unwrap();
        assert!(!res.reject, "prob={} thr={}", res.posterior_prob, res.threshold);
        assert_eq!(res.reject, res.posterior_prob < cfg().gamma);
    }

    #[test]
    fn decreasing_direction_rejects() {
        // f11(x) = x1 - x2 is monotone decreasing in x2
        let data = synth(|x| x[0] - x[1], 2, 200, 0.1, 12);
        let res = test_fixed_j(&data, &PriorConfig::default(), &cfg(), 4).unwrap();
        assert!(res.reject, "prob={} thr={}", res.posterior_prob, res.threshold);
    }

    #[test]
    fn single_monotone_draw_accepts() {
        // near-noiseless increasing data with tiny known sigma: the one draw
        // is monotone, so the posterior probability is 1
        let data = synth(|x| x[0], 1, 100, 1e-6, 13);
        let c = TestConfig { m_draws: 1, sigma_mode: SigmaMode::Known(1e-6), ..cfg() };
        let res = test_fixed_j(&data, &PriorConfig::default(), &c, 5).unwrap();
        assert_eq!(res.posterior_prob, 1.0);
        assert!(!res.reject);
    }

    #[test]
    fn results_are_seed_deterministic() {
        let data = synth(|x| x[0] + x[1], 2, 150, 0.1, 14);
        let a = test_fixed_j(&data, &PriorConfig::default(), &cfg(), 42).unwrap();
        let b = test_fixed_j(&data, &PriorConfig::default(), &cfg(), 42).unwrap();
        assert_eq!(a.distances, b.distances);
        assert_eq!(a.posterior_prob, b.posterior_prob);
        let c = TestConfig { sigma_mode: SigmaMode::Known(0.1), ..cfg() };
        let x = test_adaptive(&data, &PriorConfig::default(), &c, 42).unwrap();
        let y = test_adaptive(&data, &PriorConfig::default(), &c, 42).unwrap();
        assert_eq!(x.distances, y.distances);
    }

    #[test]
    fn posterior_prob_monotone_in_threshold() {
        let data = synth(|x| x[0] + x[1], 2, 150, 0.1, 15);
        let mut prev = -1.0;
        let mut flips = 0;
        let mut last_reject = None;
        for scale in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let c = TestConfig { a: 0.237 * scale, ..cfg() };
            let res = test_fixed_j(&data, &PriorConfig::default(), &c, 7).unwrap();
            assert!(res.posterior_prob >= prev);
            prev = res.posterior_prob;
            if let Some(lr) = last_reject {
                if lr != res.reject {
                    flips += 1;
                }
            }
            last_reject = Some(res.reject);
        }
        assert!(flips <= 1);
    }

    #[test]
    fn adaptive_requires_known_sigma() {
        let data = synth(|x| x[0] + x[1], 2, 100, 0.1, 16);
        let err = test_adaptive(&data, &PriorConfig::default(), &cfg(), 1);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn adaptive_accepts_monotone_truth() {
        let data = synth(|x| x[0] + x[1], 2, 500, 0.1, 17);
        let c = TestConfig { m0: 5.0, sigma_mode: SigmaMode::Known(0.1), ..cfg() };
        let res = test_adaptive(&data, &PriorConfig::default(), &c, 9).unwrap();
        assert!(!res.reject, "prob={} thr={}", res.posterior_prob, res.threshold);
    }

    #[test]
    fn adaptive_rejects_sine() {
        let data = synth(|x| ((x[0] + x[1]) * std::f64::consts::PI).sin(), 2, 500, 0.1, 18);
        let c = TestConfig { sigma_mode: SigmaMode::Known(0.1), ..cfg() };
        let res = test_adaptive(&data, &PriorConfig::default(), &c, 10).unwrap();
        assert!(res.reject, "prob={} thr={}", res.posterior_prob, res.threshold);
    }

    #[test]
    fn fit_mn_recovers_synthetic_law() {
        // rho = n^{-1/4} exp(0.3 log log n) -> a=1, b=0.3
        let pairs: Vec<(usize, f64)> = [50usize, 100, 400, 1000, 5000]
            .iter()
            .map(|&n| {
                let nf = n as f64;
                (n, nf.powf(-0.25) * (0.3 * nf.ln().ln()).exp())
            })
            .collect();
        let (a, b) = fit_mn(&pairs).unwrap();
        assert!((a - 1.0).abs() < 1e-6, "a={a}");
        assert!((b - 0.3).abs() < 1e-6, "b={b}");
    }

    #[test]
    fn fit_mn_degenerate_cases_error() {
        assert!(fit_mn(&[(100, 0.0), (200, 0.0)]).is_err());
        // single n: log log n constant
        assert!(fit_mn(&[(100, 0.5), (100, 0.4), (100, 0.3)]).is_err());
    }

    #[test]
    fn calibrate_runs_on_small_suite() {
        let inc = |x: &[f64]| x[0] + x[1];
        let dec = |x: &[f64]| x[0] - x[1];
        let suite: Vec<&(dyn Fn(&[f64]) -> f64 + Sync)> = vec![&inc, &dec];
        let c = TestConfig { m_draws: 50, ..cfg() };
        let (a, b) = calibrate_mn(&suite, 2, 0.1, &[100, 200], &PriorConfig::default(), &c, 21).unwrap();
        assert!(a > 0.0 && a.is_finite() && b.is_finite());
    }
}
