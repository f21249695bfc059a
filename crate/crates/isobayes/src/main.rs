//! Command-line front end: fit the projection-posterior estimator, run the
//! monotonicity tests, drive simulation sweeps, and calibrate the test
//! threshold. All subcommands are seed-deterministic, byte for byte.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use isobayes::grid::{bin, is_monotone, GridSpec};
use isobayes::io;
use isobayes::posterior::{
    posterior_params, resolve_sigma, sample_one, sigma_mmle, PriorConfig, SigmaMode,
};
use isobayes::projection::{distance_to_cone, project_l1, WeightVector};
use isobayes::rng::subseed;
use isobayes::simbench::{
    run_estimation_experiment, run_testing_experiment, ExperimentReport, Generator, Method,
};
use isobayes::testing::{calibrate_mn, test_adaptive, test_fixed_j, JRule, TestConfig};
use isobayes::{Error, Result};

#[derive(Parser)]
#[command(name = "isobayes", version, about = "Bayesian monotone regression via the projection posterior")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the projection-posterior mean estimator to a dataset.
    Fit(FitArgs),
    /// Test monotonicity of the regression function behind a dataset.
    Test(TestArgs),
    /// Run an estimation or testing sweep from a config file.
    Simulate(SimulateArgs),
    /// Calibrate the (a, b) constants of the test threshold M_n.
    Calibrate(CalibrateArgs),
}

/// `--j-rule`: n14, n14log, opt, or an explicit integer.
#[derive(Clone, Copy)]
struct JRuleArg(JRule);

impl FromStr for JRuleArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "n14" => Ok(JRuleArg(JRule::CeilN14)),
            "n14log" => Ok(JRuleArg(JRule::CeilN14Log)),
            "opt" => Ok(JRuleArg(JRule::OptimalRate)),
            other => match other.parse::<usize>() {
                Ok(j) if j >= 1 => Ok(JRuleArg(JRule::Fixed(j))),
                _ => Err(format!("expected n14, n14log, opt, or a positive integer; got '{other}'")),
            },
        }
    }
}

/// `--sigma-mode`: mmle, ig, or a known positive value.
#[derive(Clone, Copy)]
struct SigmaArg(SigmaMode);

impl FromStr for SigmaArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mmle" => Ok(SigmaArg(SigmaMode::PlugInMmle)),
            "ig" => Ok(SigmaArg(SigmaMode::InverseGamma)),
            other => match other.parse::<f64>() {
                Ok(v) if v > 0.0 => Ok(SigmaArg(SigmaMode::Known(v))),
                _ => Err(format!("expected mmle, ig, or a positive number; got '{other}'")),
            },
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input dataset (.csv or .json).
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    m_draws: usize,
    #[arg(long, default_value = "n14log")]
    j_rule: JRuleArg,
    #[arg(long, default_value = "mmle")]
    sigma_mode: SigmaArg,
    /// Prior hyperparameters (.json or .toml); defaults otherwise.
    #[arg(long)]
    prior_file: Option<PathBuf>,
    /// Also write per-draw distances to the monotone cone.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 200)]
    m_draws: usize,
    #[arg(long, default_value = "n14")]
    j_rule: JRuleArg,
    #[arg(long, default_value = "mmle")]
    sigma_mode: SigmaArg,
    /// Threshold constants M_n = a (log n)^b of the fixed-J test.
    #[arg(long, default_value_t = 0.237)]
    a: f64,
    #[arg(long, default_value_t = 0.234)]
    b: f64,
    /// Threshold constant of the adaptive test.
    #[arg(long, default_value_t = 1.0)]
    m0: f64,
    /// Use the adaptive test (requires a known sigma).
    #[arg(long)]
    adaptive: bool,
    #[arg(long)]
    prior_file: Option<PathBuf>,
    /// A fitted estimator to report diagnostics on.
    #[arg(long)]
    estimator: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Sweep config (.json or .toml).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write an SVG summary plot.
    #[arg(long)]
    plot: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample sizes pooled into the regression.
    #[arg(long, value_delimiter = ',', default_values_t = vec![100usize, 200, 500])]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    m_draws: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_sd: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.cmd {
        Cmd::Fit(args) => cmd_fit(&args),
        Cmd::Test(args) => cmd_test(&args),
        Cmd::Simulate(args) => cmd_simulate(&args),
        Cmd::Calibrate(args) => cmd_calibrate(&args),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse(_) | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn load_prior(path: &Option<PathBuf>) -> Result<PriorConfig> {
    match path {
        Some(p) => io::read_prior(p),
        None => Ok(PriorConfig::default()),
    }
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let data = io::read_dataset(&args.data)?;
    let prior = load_prior(&args.prior_file)?;
    let (n, d) = (data.len(), data.dim());
    let j = args.j_rule.0.resolve(n, d);
    let grid = GridSpec::new(d, j)?;
    let stats = bin(&data, &grid)?;
    let params = posterior_params(&stats, &prior)?;
    let sigma = resolve_sigma(&args.sigma_mode.0, &stats, &prior)?;
    let weights = WeightVector::new(stats.empirical_weights())?;

    let mut sum = vec![0.0; grid.num_blocks()];
    let mut distances = Vec::with_capacity(args.m_draws);
    for i in 0..args.m_draws {
        let draw = sample_one(&params, &sigma, args.seed, i as u64)?;
        if args.diagnostics {
            distances.push(distance_to_cone(&draw.f, &weights, 1)?);
        }
        let proj = project_l1(&draw.f, &weights)?;
        for (s, t) in sum.iter_mut().zip(&proj.theta) {
            *s += t;
        }
    }
    let estimator = isobayes::grid::StepFunction::new(
        grid,
        sum.into_iter().map(|s| s / args.m_draws as f64).collect(),
    )?;

    let sigma_est = sigma_mmle(&stats, &prior)?;
    io::write_json(&args.out.join("estimator.json"), &estimator)?;
    io::write_json(
        &args.out.join("fit_report.json"),
        &json!({
            "config": {
                "command": "fit",
                "seed": args.seed,
                "m_draws": args.m_draws,
                "j_rule": format!("{:?}", args.j_rule.0),
                "sigma_mode": format!("{:?}", args.sigma_mode.0),
                "prior": prior,
            },
            "n": n, "d": d, "J": j,
            "sigma_sq_mmle": sigma_est.value,
            "sigma_sq_clamped": sigma_est.clamped,
            "monotone": is_monotone(&estimator),
        }),
    )?;
    if args.diagnostics {
        io::write_json(&args.out.join("fit_distances.json"), &distances)?;
    }
    println!(
        "fit: n={n} d={d} J={j} sigma_hat={:.6} -> {}",
        sigma_est.value.sqrt(),
        args.out.join("estimator.json").display()
    );
    Ok(())
}

fn cmd_test(args: &TestArgs) -> Result<()> {
    let data = io::read_dataset(&args.data)?;
    let prior = load_prior(&args.prior_file)?;
    let cfg = TestConfig {
        gamma: args.gamma,
        a: args.a,
        b: args.b,
        m0: args.m0,
        j_rule: args.j_rule.0,
        m_draws: args.m_draws,
        sigma_mode: args.sigma_mode.0,
    };
    let result = if args.adaptive {
        test_adaptive(&data, &prior, &cfg, args.seed)?
    } else {
        test_fixed_j(&data, &prior, &cfg, args.seed)?
    };
    io::write_json(&args.out.join("test_result.json"), &result)?;
    let mut report = json!({
        "config": {
            "command": "test",
            "adaptive": args.adaptive,
            "seed": args.seed,
            "test": cfg,
            "prior": prior,
        },
    });
    if let Some(path) = &args.estimator {
        let est = io::parse_step_function_json(&std::fs::read_to_string(path)?)?;
        let w = WeightVector::uniform(&est.grid);
        report["estimator_diagnostics"] = json!({
            "monotone": is_monotone(&est),
            "distance_to_cone_l1": distance_to_cone(&est, &w, 1)?,
        });
    }
    io::write_json(&args.out.join("test_report.json"), &report)?;
    println!(
        "test: reject={} posterior_prob={:.4} threshold={:.6}",
        result.reject, result.posterior_prob, result.threshold
    );
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let sweep = io::read_sweep(&args.config)?;
    let cells_dir = args.out.join("cells");
    let report: ExperimentReport = match sweep {
        io::SweepConfig::Estimation(mut cfg) => {
            if let Some(s) = args.seed {
                cfg.base_seed = s;
            }
            // record the config before pointing the cell cache at --out, so
            // identical sweeps produce identical files in any directory
            io::write_json(&args.out.join("run_config.json"), &cfg)?;
            cfg.out_dir = Some(cells_dir);
            run_estimation_experiment(&cfg)?
        }
        io::SweepConfig::Testing(mut cfg) => {
            if let Some(s) = args.seed {
                cfg.base_seed = s;
            }
            io::write_json(&args.out.join("run_config.json"), &cfg)?;
            cfg.out_dir = Some(cells_dir);
            run_testing_experiment(&cfg)?
        }
    };
    io::write_json(&args.out.join("report.json"), &report)?;
    std::fs::write(args.out.join("report_wide.csv"), report.to_csv_wide())?;
    std::fs::write(args.out.join("report_long.csv"), report.to_csv_long())?;
    if args.plot {
        std::fs::write(args.out.join("report.svg"), svg_report(&report))?;
    }
    println!("simulate: {} cells -> {}", report.cells.len(), args.out.display());
    Ok(())
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let fns: Vec<Box<dyn Fn(&[f64]) -> f64 + Sync>> = Generator::ALL
        .iter()
        .map(|g| {
            let g = *g;
            Box::new(move |x: &[f64]| g.eval(x)) as Box<dyn Fn(&[f64]) -> f64 + Sync>
        })
        .collect();
    let suite: Vec<&(dyn Fn(&[f64]) -> f64 + Sync)> = fns.iter().map(|f| f.as_ref()).collect();
    let cfg = TestConfig { m_draws: args.m_draws, ..TestConfig::default() };
    let prior = isobayes::simbench::benchmark_prior();
    let (a, b) = calibrate_mn(&suite, 2, args.noise_sd, &args.ns, &prior, &cfg, subseed(args.seed, 0))?;
    io::write_json(
        &args.out.join("calibration.json"),
        &json!({
            "a": a,
            "b": b,
            "config": {
                "command": "calibrate",
                "seed": args.seed,
                "ns": args.ns,
                "m_draws": args.m_draws,
                "noise_sd": args.noise_sd,
                "functions": Generator::ALL.iter().map(|g| g.label()).collect::<Vec<_>>(),
            },
        }),
    )?;
    println!("calibrate: a={a:.4} b={b:.4}");
    Ok(())
}

/// Minimal SVG summary: metric vs n, one polyline per (function, method).
fn svg_report(report: &ExperimentReport) -> String {
    let (w, h, ml, mb) = (640.0, 480.0, 60.0, 40.0);
    let mut ns: Vec<usize> = report.cells.iter().map(|c| c.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let vmax = report
        .cells
        .iter()
        .map(|c| c.value)
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let x = |n: usize| {
        let i = ns.iter().position(|&v| v == n).unwrap_or(0) as f64;
        ml + (w - ml - 20.0) * if ns.len() > 1 { i / (ns.len() - 1) as f64 } else { 0.5 }
    };
    let y = |v: f64| (h - mb) - (h - mb - 20.0) * (v / vmax);
    let color = |m: Method| match m {
        Method::Bp => "#1f77b4",
        Method::Ls => "#ff7f0e",
        Method::Lr => "#2ca02c",
        Method::Pl => "#d62728",
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <line x1=\"{ml}\" y1=\"20\" x2=\"{ml}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n",
        y0 = h - mb,
        x1 = w - 20.0
    );
    for &n in &ns {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{n}</text>\n",
            x(n),
            h - mb + 16.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"16\" font-size=\"11\">{} ({})</text>\n",
        ml,
        report.kind,
        if report.kind == "testing" { "% rejections" } else { "mean L1 error" }
    ));
    let mut keys: Vec<(Generator, Method)> =
        report.cells.iter().map(|c| (c.function, c.method)).collect();
    keys.dedup();
    for (g, m) in keys {
        let pts: Vec<String> = ns
            .iter()
            .filter_map(|&n| report.cell(g, n, m))
            .filter(|c| c.value.is_finite())
            .map(|c| format!("{:.1},{:.1}", x(c.n), y(c.value)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            pts.join(" "),
            color(m)
        ));
        if let Some(last) = pts.last() {
            let (px, py) = last.split_once(',').unwrap();
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{py}\" font-size=\"10\" fill=\"{}\">{} {}</text>\n",
                px.parse::<f64>().unwrap() + 4.0,
                color(m),
                g.label(),
                m.label()
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
