//! Conjugate posterior over block heights, error-variance handling, and the
//! posterior over the resolution J used by the adaptive test.
//!
//! Given binned data, block heights are a posteriori independent normal:
//! mean `(N_j*Ybar_j + zeta_j/lambda_j^2) / (N_j + 1/lambda_j^2)` and
//! variance `sigma^2 / (N_j + 1/lambda_j^2)`. The error variance is either
//! known, replaced by its marginal MLE, or integrated under an inverse-gamma
//! prior, which stays conjugate.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{block_index, BlockStats, Dataset, GridSpec, StepFunction};
use crate::rng::stream_rng;

/// Numerical floor for the marginal MLE of sigma^2.
pub const SIGMA_SQ_FLOOR: f64 = 1e-12;

/// A scalar broadcast or one value per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Hyper {
    Scalar(f64),
    PerBlock(Vec<f64>),
}

impl Hyper {
    pub fn at(&self, off: usize) -> f64 {
        match self {
            Hyper::Scalar(v) => *v,
            Hyper::PerBlock(v) => v[off],
        }
    }

    fn check(&self, grid: &GridSpec, name: &str, pred: impl Fn(f64) -> bool) -> Result<()> {
        let ok = match self {
            Hyper::Scalar(v) => v.is_finite() && pred(*v),
            Hyper::PerBlock(v) => {
                if v.len() != grid.num_blocks() {
                    return Err(Error::Config(format!(
                        "{name} has {} entries but the grid has {} blocks",
                        v.len(),
                        grid.num_blocks()
                    )));
                }
                v.iter().all(|x| x.is_finite() && pred(*x))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid value in {name}")))
        }
    }
}

/// Hyperparameters of the conjugate prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    /// Prior block-height centers.
    #[serde(default = "PriorConfig::default_zeta")]
    pub zeta: Hyper,
    /// Prior block-height variance factors (times sigma^2).
    #[serde(default = "PriorConfig::default_lambda_sq")]
    pub lambda_sq: Hyper,
    /// Inverse-gamma shape for sigma^2.
    #[serde(default = "PriorConfig::one")]
    pub beta1: f64,
    /// Inverse-gamma scale for sigma^2.
    #[serde(default = "PriorConfig::one")]
    pub beta2: f64,
    /// Decay rate of the prior on J: pi(J) proportional to exp(-b_J J^d log J).
    #[serde(rename = "b_J", default = "PriorConfig::one")]
    pub b_j: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            zeta: Self::default_zeta(),
            lambda_sq: Self::default_lambda_sq(),
            beta1: 1.0,
            beta2: 1.0,
            b_j: 1.0,
        }
    }
}

impl PriorConfig {
    fn default_zeta() -> Hyper {
        Hyper::Scalar(0.0)
    }

    fn default_lambda_sq() -> Hyper {
        Hyper::Scalar(1.0)
    }

    fn one() -> f64 {
        1.0
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        self.zeta.check(grid, "zeta", |_| true)?;
        self.lambda_sq.check(grid, "lambda_sq", |v| v > 0.0)?;
        if !(self.beta1 > 0.0 && self.beta2 > 0.0 && self.b_j > 0.0) {
            return Err(Error::Config("beta1, beta2, b_J must be positive".into()));
        }
        Ok(())
    }
}

/// Posterior mean and variance factor (variance divided by sigma^2) per block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorParams {
    pub grid: GridSpec,
    pub mean: Vec<f64>,
    pub var_scale: Vec<f64>,
}

/// One sample from the unrestricted posterior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub f: StepFunction,
    /// The sigma used for this draw.
    pub sigma: f64,
}

/// How the error variance enters posterior sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaMode {
    Known(f64),
    PlugInMmle,
    InverseGamma,
}

impl SigmaMode {
    pub fn validate(&self) -> Result<()> {
        if let SigmaMode::Known(s) = self {
            if !(*s > 0.0) {
                return Err(Error::Config(format!("known sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// A sigma mode resolved against the data: either a fixed value or the
/// conjugate inverse-gamma posterior to draw from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedSigma {
    Fixed(f64),
    InverseGamma { shape: f64, scale: f64 },
}

/// Marginal MLE of sigma^2 with its clamp indicator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SigmaSqEstimate {
    pub value: f64,
    /// True when the closed form came out nonpositive and was floored.
    pub clamped: bool,
}

/// Posterior parameters of the block heights. Empty blocks reduce to the
/// prior `(zeta_j, lambda_j^2)`.
pub fn posterior_params(stats: &BlockStats, prior: &PriorConfig) -> Result<PosteriorParams> {
    prior.validate(&stats.grid)?;
    let m = stats.grid.num_blocks();
    let mut mean = Vec::with_capacity(m);
    let mut var_scale = Vec::with_capacity(m);
    for off in 0..m {
        let n_j = stats.counts[off] as f64;
        let zeta = prior.zeta.at(off);
        let lam_inv = 1.0 / prior.lambda_sq.at(off);
        mean.push((n_j * stats.means[off] + zeta * lam_inv) / (n_j + lam_inv));
        var_scale.push(1.0 / (n_j + lam_inv));
    }
    Ok(PosteriorParams { grid: stats.grid, mean, var_scale })
}

/// Closed-form marginal MLE of sigma^2, floored at [`SIGMA_SQ_FLOOR`].
pub fn sigma_mmle(stats: &BlockStats, prior: &PriorConfig) -> Result<SigmaSqEstimate> {
    prior.validate(&stats.grid)?;
    let n = stats.n() as f64;
    // sum_i (Y_i - zeta_{j(i)})^2 expanded through the block sums
    let mut centered_sq = stats.sum_sq;
    let mut shrink = 0.0;
    for off in 0..stats.grid.num_blocks() {
        let n_j = stats.counts[off] as f64;
        if n_j == 0.0 {
            continue;
        }
        let zeta = prior.zeta.at(off);
        let lam_inv = 1.0 / prior.lambda_sq.at(off);
        centered_sq += n_j * zeta * zeta - 2.0 * zeta * n_j * stats.means[off];
        let dev = stats.means[off] - zeta;
        shrink += n_j * n_j * dev * dev / (n_j + lam_inv);
    }
    let raw = (centered_sq - shrink) / n;
    if raw < SIGMA_SQ_FLOOR {
        Ok(SigmaSqEstimate { value: SIGMA_SQ_FLOOR, clamped: true })
    } else {
        Ok(SigmaSqEstimate { value: raw, clamped: false })
    }
}

/// Inverse-gamma posterior parameters for sigma^2:
/// `(beta1 + n/2, beta2 + n*sigma_hat^2/2)`.
pub fn sigma_posterior(stats: &BlockStats, prior: &PriorConfig) -> Result<(f64, f64)> {
    let est = sigma_mmle(stats, prior)?;
    let n = stats.n() as f64;
    Ok((prior.beta1 + n / 2.0, prior.beta2 + n * est.value / 2.0))
}

/// Resolves a sigma mode against binned data.
pub fn resolve_sigma(mode: &SigmaMode, stats: &BlockStats, prior: &PriorConfig) -> Result<ResolvedSigma> {
    mode.validate()?;
    match mode {
        SigmaMode::Known(s) => Ok(ResolvedSigma::Fixed(*s)),
        SigmaMode::PlugInMmle => {
            let est = sigma_mmle(stats, prior)?;
            Ok(ResolvedSigma::Fixed(est.value.sqrt()))
        }
        SigmaMode::InverseGamma => {
            let (shape, scale) = sigma_posterior(stats, prior)?;
            Ok(ResolvedSigma::InverseGamma { shape, scale })
        }
    }
}

/// Draws `m` independent samples from the unrestricted posterior.
///
/// Each draw uses its own generator derived from `(seed, draw index)`, so the
/// output is identical however the draws are later parallelized.
pub fn sample_unrestricted(
    params: &PosteriorParams,
    sigma: &ResolvedSigma,
    seed: u64,
    m: usize,
) -> Result<Vec<PosteriorDraw>> {
    if m == 0 {
        return Err(Error::Config("draw count must be at least 1".into()));
    }
    (0..m).map(|i| sample_one(params, sigma, seed, i as u64)).collect()
}

/// Draws the sample with index `draw` from the stream defined by `seed`.
pub fn sample_one(params: &PosteriorParams, sigma: &ResolvedSigma, seed: u64, draw: u64) -> Result<PosteriorDraw> {
    let mut rng = stream_rng(seed, draw);
    let sigma_sq = match *sigma {
        ResolvedSigma::Fixed(s) => s * s,
        ResolvedSigma::InverseGamma { shape, scale } => {
            let gamma = Gamma::new(shape, 1.0)
                .map_err(|e| Error::Config(format!("invalid inverse-gamma parameters: {e}")))?;
            scale / gamma.sample(&mut rng)
        }
    };
    let theta: Vec<f64> = params
        .mean
        .iter()
        .zip(&params.var_scale)
        .map(|(&mu, &vs)| {
            let z: f64 = rng.sample(StandardNormal);
            mu + (sigma_sq * vs).sqrt() * z
        })
        .collect();
    Ok(PosteriorDraw { f: StepFunction::new(params.grid, theta)?, sigma: sigma_sq.sqrt() })
}

/// Log marginal likelihood of the data for a given resolution J, with theta
/// integrated out blockwise and sigma known.
pub fn log_marginal_likelihood_j(
    data: &Dataset,
    grid: &GridSpec,
    prior: &PriorConfig,
    sigma: f64,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    prior.validate(grid)?;
    let sigma_sq = sigma * sigma;
    let m = grid.num_blocks();
    let mut counts = vec![0usize; m];
    let mut sums = vec![0.0f64; m];
    let mut sq = vec![0.0f64; m];
    for (row, &y) in data.x().iter().zip(data.y()) {
        let off = grid.offset(&block_index(row, grid)?);
        counts[off] += 1;
        sums[off] += y;
        sq[off] += y * y;
    }
    let mut total = 0.0;
    for off in 0..m {
        let n_j = counts[off] as f64;
        if n_j == 0.0 {
            continue;
        }
        let zeta = prior.zeta.at(off);
        let lam_sq = prior.lambda_sq.at(off);
        let ybar = sums[off] / n_j;
        // sum over the block of (Y_i - zeta)^2
        let centered = sq[off] - 2.0 * zeta * sums[off] + n_j * zeta * zeta;
        let dev = ybar - zeta;
        let quad = centered - n_j * n_j * lam_sq * dev * dev / (1.0 + n_j * lam_sq);
        total += -0.5 * n_j * (2.0 * std::f64::consts::PI * sigma_sq).ln()
            - 0.5 * (1.0 + n_j * lam_sq).ln()
            - quad / (2.0 * sigma_sq);
    }
    Ok(total)
}

/// Default truncation point for the posterior over J.
pub fn default_j_max(n: usize, d: usize) -> usize {
    (n as f64).powf(1.0 / (1.0 + d as f64)).ceil() as usize + 5
}

/// Normalized posterior over J in `1..=j_max` under the truncated prior
/// `pi(J) ~ exp(-b_J J^d log J)`.
pub fn posterior_over_j(
    data: &Dataset,
    prior: &PriorConfig,
    sigma: f64,
    j_max: usize,
) -> Result<Vec<f64>> {
    if j_max == 0 {
        return Err(Error::Config("J_max must be at least 1".into()));
    }
    let d = data.dim();
    let mut log_post = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let grid = GridSpec::new(d, j)?;
        let log_prior = -prior.b_j * (j as f64).powi(d as i32) * (j as f64).ln();
        log_post.push(log_prior + log_marginal_likelihood_j(data, &grid, prior, sigma)?);
    }
    let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_post.iter().map(|lp| (lp - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    Ok(probs)
}

/// Draws one J from a posterior-over-J probability vector.
pub fn sample_j(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u <= acc {
            return i + 1;
        }
    }
    probs.len()
}
