//! Simulation harness: the twelve benchmark regression functions on
//! [0,1]^2, the Bayesian projection estimator and its isotonic least-squares
//! baseline, two frequentist monotonicity tests, and the experiment drivers
//! that reproduce the benchmark tables.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::grid::{bin, Dataset, GridSpec, StepFunction};
use crate::metrics::lp_distance_to_function;
use crate::posterior::{posterior_params, resolve_sigma, sample_one, PriorConfig, SigmaMode};
use crate::projection::{project_l1, project_l2, WeightVector};
use crate::rng::{cell_seed, stream_rng, subseed};
use crate::testing::{test_fixed_j, JRule, TestConfig};

/// Benchmark regression functions. f1-f6 are coordinatewise nondecreasing,
/// f7-f12 are not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
    F10,
    F11,
    F12,
}

impl Generator {
    pub const ALL: [Generator; 12] = [
        Generator::F1,
        Generator::F2,
        Generator::F3,
        Generator::F4,
        Generator::F5,
        Generator::F6,
        Generator::F7,
        Generator::F8,
        Generator::F9,
        Generator::F10,
        Generator::F11,
        Generator::F12,
    ];

    pub const MONOTONE: [Generator; 6] = [
        Generator::F1,
        Generator::F2,
        Generator::F3,
        Generator::F4,
        Generator::F5,
        Generator::F6,
    ];

    pub const NON_MONOTONE: [Generator; 6] = [
        Generator::F7,
        Generator::F8,
        Generator::F9,
        Generator::F10,
        Generator::F11,
        Generator::F12,
    ];

    pub fn eval(&self, x: &[f64]) -> f64 {
        let s = x[0] + x[1];
        let c = s - 1.0;
        match self {
            Generator::F1 => s,
            Generator::F2 => (x[0] * x[1]).exp(),
            Generator::F3 => s * s,
            Generator::F4 => s.sqrt(),
            Generator::F5 => 1.0 / (1.0 + (-6.0 * c).exp()),
            Generator::F6 => 0.0,
            Generator::F7 => c * c,
            Generator::F8 => 2.0 * c * c * c - c,
            Generator::F9 => c * c * c - 0.5 * c,
            Generator::F10 => (s * std::f64::consts::PI).sin(),
            Generator::F11 => x[0] - x[1],
            Generator::F12 => (-10.0 * c * c).exp() + s,
        }
    }

    pub fn is_monotone_truth(&self) -> bool {
        Self::MONOTONE.contains(self)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Generator::F1 => "f1",
            Generator::F2 => "f2",
            Generator::F3 => "f3",
            Generator::F4 => "f4",
            Generator::F5 => "f5",
            Generator::F6 => "f6",
            Generator::F7 => "f7",
            Generator::F8 => "f8",
            Generator::F9 => "f9",
            Generator::F10 => "f10",
            Generator::F11 => "f11",
            Generator::F12 => "f12",
        }
    }

    /// Cell-midpoint discretization on a J x J grid.
    pub fn midpoint_step(&self, j: usize) -> Result<StepFunction> {
        let grid = GridSpec::new(2, j)?;
        let theta = grid
            .indices()
            .map(|(_, idx)| {
                let x: Vec<f64> =
                    idx.coords.iter().map(|&c| (c as f64 - 0.5) / j as f64).collect();
                self.eval(&x)
            })
            .collect();
        StepFunction::new(grid, theta)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Generator::ALL
            .iter()
            .copied()
            .find(|g| g.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown generator '{s}', expected f1..f12")))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub id: Generator,
    pub n: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(id: Generator, n: usize, seed: u64) -> Self {
        GeneratorSpec { id, n, noise_sd: 0.1, seed }
    }
}

/// Y = f(X) + eps with X ~ U([0,1]^2) and eps ~ N(0, noise_sd^2).
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    if !(spec.noise_sd > 0.0) {
        return Err(Error::Config(format!("noise_sd must be positive, got {}", spec.noise_sd)));
    }
    if spec.n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let mut rng = stream_rng(spec.seed, 0);
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let xi = vec![rng.gen::<f64>(), rng.gen::<f64>()];
        let eps: f64 = rng.sample(rand_distr::StandardNormal);
        y.push(spec.id.eval(&xi) + spec.noise_sd * eps);
        x.push(xi);
    }
    Dataset::new(x, y)
}

/// Prior used by the benchmark experiments: flat block heights
/// (lambda^2 = 100, so shrinkage toward zeta = 0 is at most 1% even for
/// single-observation blocks). The library-wide default lambda^2 = 1 shrinks
/// sparse blocks by a factor N/(N+1), which at benchmark sample sizes is a
/// larger effect than the estimation error being measured.
pub fn benchmark_prior() -> PriorConfig {
    PriorConfig { lambda_sq: crate::posterior::Hyper::Scalar(100.0), ..PriorConfig::default() }
}

/// Monotonicity-test configuration used by the benchmark experiments.
///
/// The threshold constants differ from the library defaults: they were tuned
/// on seeded validation runs of this implementation (whose projection
/// distances are exactly optimal, hence smaller than looser upper bounds) so
/// that the measured null rejection rate stays well below the nominal level
/// while borderline alternatives remain detectable. The induced thresholds
/// are 0.052, 0.042, and 0.032 at n = 100, 200, and 500.
pub fn benchmark_test_config() -> TestConfig {
    TestConfig { a: 0.237, b: -0.239, ..TestConfig::default() }
}

/// Resolution used by the Bayesian estimator: J = ceil(n^{1/4} log10 n).
pub fn bp_resolution(n: usize) -> usize {
    JRule::CeilN14Log.resolve(n, 2)
}

/// Projection-posterior mean estimator: draws `m_draws` unrestricted samples
/// with the plug-in variance estimate, L1-projects each under empirical
/// weights, and averages pointwise. The average of cone elements is again in
/// the cone.
pub fn bp_estimate(data: &Dataset, prior: &PriorConfig, m_draws: usize, seed: u64) -> Result<StepFunction> {
    if m_draws == 0 {
        return Err(Error::Config("m_draws must be at least 1".into()));
    }
    let grid = GridSpec::new(data.dim(), bp_resolution(data.len()))?;
    let stats = bin(data, &grid)?;
    let params = posterior_params(&stats, prior)?;
    let sigma = resolve_sigma(&SigmaMode::PlugInMmle, &stats, prior)?;
    let weights = WeightVector::new(stats.empirical_weights())?;
    let sum = (0..m_draws)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let draw = sample_one(&params, &sigma, seed, i as u64)?;
            Ok(project_l1(&draw.f, &weights)?.theta)
        })
        .try_reduce(
            || vec![0.0; grid.num_blocks()],
            |mut acc, theta| {
                for (a, t) in acc.iter_mut().zip(&theta) {
                    *a += t;
                }
                Ok(acc)
            },
        )?;
    StepFunction::new(grid, sum.into_iter().map(|s| s / m_draws as f64).collect())
}

/// Grid-restricted isotonic least squares: the L2 projection of the
/// block-means step function under empirical weights.
pub fn ls_baseline(data: &Dataset, grid: &GridSpec) -> Result<StepFunction> {
    let stats = bin(data, grid)?;
    let f = StepFunction::new(*grid, stats.means.clone())?;
    let weights = WeightVector::new(stats.empirical_weights())?;
    project_l2(&f, &weights)
}

/// Ordinary least squares of y on (1, x1, x2) with slope t-statistics.
struct Ols3 {
    #[cfg_attr(not(test), allow(dead_code))]
    beta: [f64; 3],
    /// t-statistics of the two slopes; +-inf on a perfect fit.
    t: [f64; 2],
}

fn ols3(x: &[Vec<f64>], y: &[f64]) -> Result<Ols3> {
    let n = y.len();
    if n < 4 {
        return Err(Error::Domain(format!("need at least 4 points for the linear fit, got {n}")));
    }
    // normal equations X'X b = X'y for the design (1, x1, x2)
    let mut xtx = [[0.0f64; 3]; 3];
    let mut xty = [0.0f64; 3];
    for (row, &yi) in x.iter().zip(y) {
        let r = [1.0, row[0], row[1]];
        for i in 0..3 {
            for j in 0..3 {
                xtx[i][j] += r[i] * r[j];
            }
            xty[i] += r[i] * yi;
        }
    }
    let inv = invert3(&xtx).ok_or_else(|| Error::Domain("singular design matrix".into()))?;
    let mut beta = [0.0f64; 3];
    for i in 0..3 {
        for j in 0..3 {
            beta[i] += inv[i][j] * xty[j];
        }
    }
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fit = beta[0] + beta[1] * row[0] + beta[2] * row[1];
            (yi - fit) * (yi - fit)
        })
        .sum();
    let s2 = rss.max(0.0) / (n - 3) as f64;
    let mut t = [0.0f64; 2];
    for k in 0..2 {
        let se = (s2 * inv[k + 1][k + 1]).sqrt();
        t[k] = if se > 0.0 {
            beta[k + 1] / se
        } else {
            f64::INFINITY.copysign(beta[k + 1])
        };
    }
    Ok(Ols3 { beta, t })
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale: f64 = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if det.abs() <= 1e-12 * scale.powi(3).max(1e-300) {
        return None;
    }
    let cof = |r1: usize, r2: usize, c1: usize, c2: usize| m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = adj[i][j] / det;
        }
    }
    Some(out)
}

fn t_upper_quantile(df: f64, p: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Domain(format!("invalid t distribution: {e}")))?;
    Ok(dist.inverse_cdf(p))
}

/// Linear-regression monotonicity test: fits y ~ 1 + x1 + x2 globally and
/// rejects when either slope is significantly negative at the
/// Bonferroni-adjusted level.
pub fn lr_test(data: &Dataset, level: f64) -> Result<bool> {
    check_test_inputs(data, level)?;
    let fit = ols3(data.x(), data.y())?;
    let crit = t_upper_quantile((data.len() - 3) as f64, 1.0 - level / 2.0)?;
    Ok(fit.t[0] < -crit || fit.t[1] < -crit)
}

/// Piecewise-linear monotonicity test: fits y ~ 1 + x1 + x2 on each cell of
/// the 3x3 partition and rejects when any of the 18 slope t-values is below
/// the Bonferroni threshold. Cells with fewer than 4 points are skipped.
pub fn pl_test(data: &Dataset, level: f64) -> Result<bool> {
    check_test_inputs(data, level)?;
    let grid = GridSpec::new(2, 3)?;
    let mut cells: Vec<(Vec<Vec<f64>>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); 9];
    for (row, &y) in data.x().iter().zip(data.y()) {
        let off = grid.offset(&crate::grid::block_index(row, &grid)?);
        cells[off].0.push(row.clone());
        cells[off].1.push(y);
    }
    for (x, y) in &cells {
        if y.len() < 4 {
            continue;
        }
        let fit = match ols3(x, y) {
            Ok(f) => f,
            // degenerate within-cell design: no evidence, skip
            Err(_) => continue,
        };
        let crit = t_upper_quantile((y.len() - 3) as f64, 1.0 - level / 18.0)?;
        if fit.t[0] < -crit || fit.t[1] < -crit {
            return Ok(true);
        }
    }
    Ok(false)
}

fn check_test_inputs(data: &Dataset, level: f64) -> Result<()> {
    if data.dim() != 2 {
        return Err(Error::Domain(format!("the baseline tests require d=2, got d={}", data.dim())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0,1), got {level}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Bayesian projection-posterior mean / fixed-J posterior test.
    Bp,
    /// Isotonic least squares (estimation only).
    Ls,
    /// Global linear-regression t-test (testing only).
    Lr,
    /// Piecewise-linear t-test (testing only).
    Pl,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Bp => "bp",
            Method::Ls => "ls",
            Method::Lr => "lr",
            Method::Pl => "pl",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub generators: Vec<Generator>,
    pub ns: Vec<usize>,
    /// Datasets per cell.
    pub datasets: usize,
    /// Posterior draws per dataset for the Bayesian estimator.
    pub m_draws: usize,
    pub noise_sd: f64,
    pub quad_per_cell: usize,
    #[serde(default = "benchmark_prior")]
    pub prior: PriorConfig,
    pub base_seed: u64,
    /// Per-cell result files for resume, when set.
    pub out_dir: Option<PathBuf>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            generators: Generator::MONOTONE.to_vec(),
            ns: vec![100, 200, 500],
            datasets: 20,
            m_draws: 1000,
            noise_sd: 0.1,
            quad_per_cell: crate::metrics::DEFAULT_QUAD_PER_CELL,
            prior: benchmark_prior(),
            base_seed: 0,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestingConfig {
    pub generators: Vec<Generator>,
    pub ns: Vec<usize>,
    pub datasets: usize,
    pub noise_sd: f64,
    pub level: f64,
    #[serde(default = "benchmark_test_config")]
    pub test: TestConfig,
    #[serde(default = "benchmark_prior")]
    pub prior: PriorConfig,
    pub base_seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for TestingConfig {
    fn default() -> Self {
        TestingConfig {
            generators: Generator::ALL.to_vec(),
            ns: vec![100, 200, 500],
            datasets: 200,
            noise_sd: 0.1,
            level: 0.05,
            test: benchmark_test_config(),
            prior: benchmark_prior(),
            base_seed: 0,
            out_dir: None,
        }
    }
}

/// One (function, n, method) summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub function: Generator,
    pub n: usize,
    pub method: Method,
    /// Mean Lebesgue-L1 error (estimation) or rejection percentage (testing),
    /// over the datasets that completed.
    pub value: f64,
    /// Standard deviation of the per-dataset metric; estimation only.
    pub sd: Option<f64>,
    /// Mean error under the empirical measure at the design points, the
    /// in-sample quantity the reference simulations tabulate; estimation only.
    pub empirical: Option<f64>,
    pub sd_empirical: Option<f64>,
    pub datasets: usize,
    pub failures: usize,
    /// First error message, when any dataset failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub base_seed: u64,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, function: Generator, n: usize, method: Method) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.function == function && c.n == n && c.method == method)
    }

    /// Table-shaped CSV: one row per (function, method), one column per n.
    pub fn to_csv_wide(&self) -> String {
        let mut ns: Vec<usize> = self.cells.iter().map(|c| c.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut out = String::from("function,method");
        for n in &ns {
            out.push_str(&format!(",n{n}"));
        }
        out.push('\n');
        let mut keys: Vec<(Generator, Method)> =
            self.cells.iter().map(|c| (c.function, c.method)).collect();
        keys.dedup();
        for (g, m) in keys {
            out.push_str(&format!("{},{}", g.label(), m.label()));
            for &n in &ns {
                match self.cell(g, n, m) {
                    Some(c) => out.push_str(&format!(",{:.4}", c.value)),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Long-format CSV, one row per cell.
    pub fn to_csv_long(&self) -> String {
        let mut out =
            String::from("function,n,method,value,sd,empirical,sd_empirical,datasets,failures,error\n");
        for c in &self.cells {
            let opt = |v: Option<f64>| v.map_or(String::new(), |s| format!("{s:.6}"));
            out.push_str(&format!(
                "{},{},{},{:.6},{},{},{},{},{},{}\n",
                c.function.label(),
                c.n,
                c.method.label(),
                c.value,
                opt(c.sd),
                opt(c.empirical),
                opt(c.sd_empirical),
                c.datasets,
                c.failures,
                c.error.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EstimationOutcome {
    bp: Option<f64>,
    ls: Option<f64>,
    bp_emp: Option<f64>,
    ls_emp: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TestingOutcome {
    bp: Option<bool>,
    lr: Option<bool>,
    pl: Option<bool>,
    error: Option<String>,
}

fn load_cell<T: serde::de::DeserializeOwned>(path: &Path, want: usize) -> Option<Vec<T>> {
    let text = std::fs::read_to_string(path).ok()?;
    let v: Vec<T> = serde_json::from_str(&text).ok()?;
    (v.len() == want).then_some(v)
}

fn store_cell<T: Serialize>(path: &Path, outcomes: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(outcomes).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn summarize(values: &[f64]) -> (f64, Option<f64>) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m.max(1.0);
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, Some(var.sqrt()))
}

/// Runs the estimation study: per dataset, the Bayesian estimator and the
/// least-squares baseline at the same resolution, scored by Lebesgue L1
/// distance to the truth. Cells resume from their result files when present.
pub fn run_estimation_experiment(cfg: &EstimationConfig) -> Result<ExperimentReport> {
    let mut cells = Vec::new();
    for &g in &cfg.generators {
        for &n in &cfg.ns {
            let label = format!("est:{}:{}", g.label(), n);
            let file = cfg.out_dir.as_ref().map(|d| d.join(format!("est_{}_{}.json", g.label(), n)));
            let outcomes: Vec<EstimationOutcome> = match file.as_ref().and_then(|p| load_cell(p, cfg.datasets)) {
                Some(v) => v,
                None => {
                    let v: Vec<EstimationOutcome> = (0..cfg.datasets)
                        .into_par_iter()
                        .map(|i| estimation_one(cfg, g, n, cell_seed(cfg.base_seed, &label, i as u64)))
                        .collect();
                    if let Some(p) = &file {
                        store_cell(p, &v)?;
                    }
                    v
                }
            };
            for method in [Method::Bp, Method::Ls] {
                let vals: Vec<f64> = outcomes
                    .iter()
                    .filter_map(|o| if method == Method::Bp { o.bp } else { o.ls })
                    .collect();
                let emps: Vec<f64> = outcomes
                    .iter()
                    .filter_map(|o| if method == Method::Bp { o.bp_emp } else { o.ls_emp })
                    .collect();
                let (mean, sd) = summarize(&vals);
                let (emp_mean, emp_sd) = summarize(&emps);
                cells.push(CellReport {
                    function: g,
                    n,
                    method,
                    value: mean,
                    sd,
                    empirical: (!emps.is_empty()).then_some(emp_mean),
                    sd_empirical: emp_sd,
                    datasets: cfg.datasets,
                    failures: cfg.datasets - vals.len(),
                    error: outcomes.iter().find_map(|o| o.error.clone()),
                });
            }
        }
    }
    Ok(ExperimentReport { kind: "estimation".into(), base_seed: cfg.base_seed, cells })
}

fn estimation_one(cfg: &EstimationConfig, g: Generator, n: usize, seed: u64) -> EstimationOutcome {
    let run = || -> Result<(f64, f64, f64, f64)> {
        let spec = GeneratorSpec { id: g, n, noise_sd: cfg.noise_sd, seed };
        let data = generate(&spec)?;
        let truth = |x: &[f64]| g.eval(x);
        let bp = bp_estimate(&data, &cfg.prior, cfg.m_draws, subseed(seed, 1))?;
        let bp_err = lp_distance_to_function(&bp, &truth, 1.0, cfg.quad_per_cell)?;
        let ls = ls_baseline(&data, &bp.grid)?;
        let ls_err = lp_distance_to_function(&ls, &truth, 1.0, cfg.quad_per_cell)?;
        Ok((bp_err, ls_err, empirical_l1_error(&data, &bp, &truth)?, empirical_l1_error(&data, &ls, &truth)?))
    };
    match run() {
        Ok((bp, ls, bp_emp, ls_emp)) => EstimationOutcome {
            bp: Some(bp),
            ls: Some(ls),
            bp_emp: Some(bp_emp),
            ls_emp: Some(ls_emp),
            error: None,
        },
        Err(e) => {
            EstimationOutcome { bp: None, ls: None, bp_emp: None, ls_emp: None, error: Some(e.to_string()) }
        }
    }
}

/// Mean absolute error of a step estimator at the observed design points.
fn empirical_l1_error(data: &Dataset, f: &StepFunction, truth: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let mut sum = 0.0;
    for x in data.x() {
        sum += (f.eval(x)? - truth(x)).abs();
    }
    Ok(sum / data.len() as f64)
}

/// Runs the testing study: rejection percentages of the Bayesian fixed-J
/// test and the two frequentist baselines across generators and sizes.
pub fn run_testing_experiment(cfg: &TestingConfig) -> Result<ExperimentReport> {
    cfg.test.validate()?;
    let mut cells = Vec::new();
    for &g in &cfg.generators {
        for &n in &cfg.ns {
            let label = format!("test:{}:{}", g.label(), n);
            let file = cfg.out_dir.as_ref().map(|d| d.join(format!("test_{}_{}.json", g.label(), n)));
            let outcomes: Vec<TestingOutcome> = match file.as_ref().and_then(|p| load_cell(p, cfg.datasets)) {
                Some(v) => v,
                None => {
                    let v: Vec<TestingOutcome> = (0..cfg.datasets)
                        .into_par_iter()
                        .map(|i| testing_one(cfg, g, n, cell_seed(cfg.base_seed, &label, i as u64)))
                        .collect();
                    if let Some(p) = &file {
                        store_cell(p, &v)?;
                    }
                    v
                }
            };
            for method in [Method::Bp, Method::Lr, Method::Pl] {
                let picks: Vec<bool> = outcomes
                    .iter()
                    .filter_map(|o| match method {
                        Method::Bp => o.bp,
                        Method::Lr => o.lr,
                        _ => o.pl,
                    })
                    .collect();
                let pct = if picks.is_empty() {
                    f64::NAN
                } else {
                    100.0 * picks.iter().filter(|&&r| r).count() as f64 / picks.len() as f64
                };
                cells.push(CellReport {
                    function: g,
                    n,
                    method,
                    value: pct,
                    sd: None,
                    empirical: None,
                    sd_empirical: None,
                    datasets: cfg.datasets,
                    failures: cfg.datasets - picks.len(),
                    error: outcomes.iter().find_map(|o| o.error.clone()),
                });
            }
        }
    }
    Ok(ExperimentReport { kind: "testing".into(), base_seed: cfg.base_seed, cells })
}

fn testing_one(cfg: &TestingConfig, g: Generator, n: usize, seed: u64) -> TestingOutcome {
    let data = match generate(&GeneratorSpec { id: g, n, noise_sd: cfg.noise_sd, seed }) {
        Ok(d) => d,
        Err(e) => return TestingOutcome { bp: None, lr: None, pl: None, error: Some(e.to_string()) },
    };
    let mut out = TestingOutcome { bp: None, lr: None, pl: None, error: None };
    match test_fixed_j(&data, &cfg.prior, &cfg.test, subseed(seed, 1)) {
        Ok(r) => out.bp = Some(r.reject),
        Err(e) => out.error = Some(e.to_string()),
    }
    match lr_test(&data, cfg.level) {
        Ok(r) => out.lr = Some(r),
        Err(e) => {
            out.error.get_or_insert(e.to_string());
        }
    }
    match pl_test(&data, cfg.level) {
        Ok(r) => out.pl = Some(r),
        Err(e) => {
            out.error.get_or_insert(e.to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::is_monotone;
    use crate::projection::pava_l2;

    #[test]
    fn generator_values_match_hand_calc() {
        let x = [0.3, 0.4];
        assert!((Generator::F1.eval(&x) - 0.7).abs() < 1e-15);
        assert!((Generator::F2.eval(&x) - (0.12f64).exp()).abs() < 1e-15);
        assert_eq!(Generator::F6.eval(&x), 0.0);
        assert!((Generator::F11.eval(&x) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn monotone_generators_discretize_monotone() {
        for g in Generator::MONOTONE {
            for j in [2usize, 5, 17, 32] {
                assert!(is_monotone(&g.midpoint_step(j).unwrap()), "{g} J={j}");
            }
        }
        for g in Generator::NON_MONOTONE {
            for j in [4usize, 8, 16] {
                assert!(!is_monotone(&g.midpoint_step(j).unwrap()), "{g} J={j}");
            }
        }
    }

    #[test]
    fn generate_is_deterministic_and_centered() {
        let spec = GeneratorSpec::new(Generator::F1, 4000, 77);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.y(), b.y());
        let mean = a.y().iter().sum::<f64>() / a.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn bp_estimate_recovers_constant() {
        let spec = GeneratorSpec { id: Generator::F6, n: 300, noise_sd: 0.01, seed: 5 };
        let data = generate(&spec).unwrap();
        let est = bp_estimate(&data, &PriorConfig::default(), 200, 9).unwrap();
        for &t in &est.theta {
            assert!(t.abs() < 0.05, "{t}");
        }
        assert!(is_monotone(&est));
    }

    #[test]
    fn ls_baseline_matches_pava_in_1d() {
        let mut rng = stream_rng(31, 0);
        let n = 200;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen::<f64>()]).collect();
        let y: Vec<f64> = x.iter().map(|xi| xi[0] + 0.2 * rng.gen::<f64>()).collect();
        let data = Dataset::new(x, y).unwrap();
        let grid = GridSpec::new(1, 5).unwrap();
        let got = ls_baseline(&data, &grid).unwrap();
        let stats = bin(&data, &grid).unwrap();
        let w: Vec<f64> = stats.counts.iter().map(|&c| c as f64).collect();
        assert!(w.iter().all(|&c| c > 0.0), "need all blocks filled for the PAVA oracle");
        let oracle = pava_l2(&stats.means, &w);
        for (a, b) in got.theta.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn ls_baseline_keeps_monotone_means() {
        let data = Dataset::new(
            vec![vec![0.1], vec![0.3], vec![0.6], vec![0.9]],
            vec![1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let grid = GridSpec::new(1, 4).unwrap();
        let got = ls_baseline(&data, &grid).unwrap();
        assert_eq!(got.theta, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn lr_test_detects_decreasing_slope() {
        let spec = GeneratorSpec::new(Generator::F11, 500, 3);
        let data = generate(&spec).unwrap();
        assert!(lr_test(&data, 0.05).unwrap());
        // f12's bump rides an increasing trend the global fit cannot see
        let spec = GeneratorSpec::new(Generator::F12, 500, 3);
        let data = generate(&spec).unwrap();
        assert!(!lr_test(&data, 0.05).unwrap());
    }

    #[test]
    fn lr_test_rejects_collinear_design() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0, i as f64 / 20.0]).collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let data = Dataset::new(x, y).unwrap();
        assert!(lr_test(&data, 0.05).is_err());
    }

    #[test]
    fn pl_test_behavior_on_known_shapes() {
        let data = generate(&GeneratorSpec::new(Generator::F7, 500, 4)).unwrap();
        assert!(pl_test(&data, 0.05).unwrap());
        let data = generate(&GeneratorSpec::new(Generator::F1, 500, 4)).unwrap();
        assert!(!pl_test(&data, 0.05).unwrap());
        // too few points anywhere: no evidence, accept
        let tiny = Dataset::new(vec![vec![0.1, 0.1], vec![0.9, 0.9]], vec![1.0, 0.0]).unwrap();
        assert!(!pl_test(&tiny, 0.05).unwrap());
    }

    #[test]
    fn experiment_is_deterministic_and_resumable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = EstimationConfig {
            generators: vec![Generator::F1],
            ns: vec![60],
            datasets: 3,
            m_draws: 30,
            base_seed: 99,
            out_dir: Some(dir.path().to_path_buf()),
            ..EstimationConfig::default()
        };
        let a = run_estimation_experiment(&cfg).unwrap();
        // second run must resume from the stored per-cell file
        let b = run_estimation_experiment(&cfg).unwrap();
        let fresh = run_estimation_experiment(&EstimationConfig { out_dir: None, ..cfg.clone() }).unwrap();
        for ((x, y), z) in a.cells.iter().zip(&b.cells).zip(&fresh.cells) {
            assert_eq!(x.value, y.value);
            assert_eq!(x.value, z.value);
            assert_eq!(x.failures, 0);
        }
        assert!(a.cell(Generator::F1, 60, Method::Bp).is_some());
        let wide = a.to_csv_wide();
        assert!(wide.starts_with("function,method,n60"));
        let long = a.to_csv_long();
        assert_eq!(long.lines().count(), 3);
    }

    #[test]
    fn testing_experiment_reports_rejection_pct() {
        let cfg = TestingConfig {
            generators: vec![Generator::F11],
            ns: vec![100],
            datasets: 5,
            test: TestConfig { m_draws: 50, ..TestConfig::default() },
            base_seed: 3,
            ..TestingConfig::default()
        };
        let rep = run_testing_experiment(&cfg).unwrap();
        let bp = rep.cell(Generator::F11, 100, Method::Bp).unwrap();
        assert!(bp.value >= 0.0 && bp.value <= 100.0);
        assert_eq!(bp.failures, 0);
    }

    #[test]
    fn ols_beta_recovers_plane() {
        let mut rng = stream_rng(8, 0);
        let x: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
        let y: Vec<f64> = x.iter().map(|r| 1.0 + 2.0 * r[0] - 3.0 * r[1]).collect();
        let fit = ols3(&x, &y).unwrap();
        assert!((fit.beta[0] - 1.0).abs() < 1e-9);
        assert!((fit.beta[1] - 2.0).abs() < 1e-9);
        assert!((fit.beta[2] + 3.0).abs() < 1e-9);
        // noise-free fit: the t-statistic is limited only by rounding error
        assert!(fit.t[1] < -1e6, "{}", fit.t[1]);
    }
}
