//! `qclt`: command-line surface for the quantile-CLT laboratory.
//!
//! Every subcommand reads a flat key=value configuration file and emits one
//! CSV (stdout, or `--out`). Exit codes: 0 success, 2 configuration error,
//! 3 numeric-domain error, 4 I/O error.

mod config;
mod csv;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{read_model, ConfigError, ConfigReader};
use csv::{fmt_f64, Csv};
use qclt_core::gauss::{hellinger_affinity_sq, tv_mvn_bound, tv_normal_bounds, tv_normal_exact, CovMatrix};
use qclt_core::marginal::MarginalSpec;
use qclt_core::mc::{
    fit_rate, limit_constant, run_joint_experiment, run_median_experiment, scaled_ks_exact,
    ExperimentPlan,
};
use qclt_core::model::{build_model, ModelConfig};
use qclt_core::sigma::{multi_bound_rhs, sigma_empirical, sigma_exact, univ_bound_rhs};

#[derive(Parser)]
#[command(
    name = "qclt",
    version,
    about = "Quantile CLT laboratory: dependent-sample simulation, rate bounds, \
             Gaussian distances, and the exact i.i.d. median oracle"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo experiment: median KS for a single level, joint rectangle
    /// probabilities for several levels
    Simulate(RunArgs),
    /// Rate-bound evaluation per sample length
    Bound(RunArgs),
    /// Indicator covariance: exact engine and Monte Carlo estimator side by side
    Sigma(RunArgs),
    /// Gaussian total-variation distances and bounds
    GaussTv(RunArgs),
    /// Exact i.i.d. median oracle: scaled KS distance and the limit constant
    Oracle(RunArgs),
    /// Log-log rate regression over a CSV produced by simulate or oracle
    Rate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the key=value configuration file
    #[arg(long)]
    config: PathBuf,
    /// Overrides experiment.seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn report(&self) -> (&str, u8) {
        match self {
            CliError::Config(m) => (m, 2),
            CliError::Numeric(m) => (m, 3),
            CliError::Io(m) => (m, 4),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<qclt_core::Error> for CliError {
    fn from(e: qclt_core::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Bound(a) => cmd_bound(a),
        Cmd::Sigma(a) => cmd_sigma(a),
        Cmd::GaussTv(a) => cmd_gauss_tv(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Rate(a) => cmd_rate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (msg, code) = e.report();
            eprintln!("qclt: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load_reader(args: &RunArgs) -> Result<ConfigReader, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", args.config.display())))?;
    Ok(ConfigReader::parse(&text)?)
}

struct ExperimentBlock {
    n_list: Vec<usize>,
    reps: usize,
    seed: u64,
}

fn read_experiment(reader: &mut ConfigReader, args: &RunArgs) -> Result<ExperimentBlock, CliError> {
    let n_list = reader.require_usize_list("experiment.n")?;
    let reps = reader.require_u64("experiment.reps")? as usize;
    let seed = reader.require_u64("experiment.seed")?;
    Ok(ExperimentBlock {
        n_list,
        reps,
        seed: args.seed.unwrap_or(seed),
    })
}

fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let mut reader = load_reader(args)?;
    let model = read_model(&mut reader)?;
    let levels = reader.require_f64_list("grid.levels")?;
    let exp = read_experiment(&mut reader, args)?;
    let x_axis = reader.optional_f64_list("experiment.x_grid")?;
    reader.finish()?;

    let plan = ExperimentPlan {
        model,
        levels: levels.clone(),
        n_list: exp.n_list,
        reps: exp.reps,
        seed: exp.seed,
        x_axis: x_axis.clone().unwrap_or_default(),
    };

    if levels.len() == 1 {
        if x_axis.is_some() {
            return Err(CliError::Config(
                "experiment.x_grid applies only to multivariate grids".into(),
            ));
        }
        let runs = run_median_experiment(&plan)?;
        let mut out = Csv::new(
            "n,reps,seed,alpha,ks_emp,sigma_used,theta_used,bound_term1,bound_term2,bound_total",
        );
        for run in &runs {
            out.row(&[
                run.n.to_string(),
                plan.reps.to_string(),
                plan.seed.to_string(),
                fmt_f64(levels[0]),
                fmt_f64(run.result.ks),
                fmt_f64(run.sigma_sq.sqrt()),
                fmt_f64(run.theta),
                fmt_f64(run.bound.term1),
                fmt_f64(run.bound.term2),
                fmt_f64(run.bound.total),
            ]);
        }
        out.write(args.out.as_deref())?;
    } else {
        let runs = run_joint_experiment(&plan)?;
        let mut out = Csv::new("n,reps,seed,point,emp_prob,gauss_prob,gauss_se,abs_gap");
        for run in &runs {
            for row in &run.rows {
                let point = row
                    .x
                    .iter()
                    .map(|v| fmt_f64(*v))
                    .collect::<Vec<_>>()
                    .join(";");
                out.row(&[
                    run.n.to_string(),
                    plan.reps.to_string(),
                    plan.seed.to_string(),
                    point,
                    fmt_f64(row.empirical),
                    fmt_f64(row.gaussian),
                    fmt_f64(row.gaussian_se),
                    fmt_f64(row.gap),
                ]);
            }
        }
        out.write(args.out.as_deref())?;
    }
    Ok(())
}

// Sigma_0 for the bound: exact when the model admits it, otherwise the Monte
// Carlo estimator with the experiment's replication budget.
fn sigma0_for(
    model: &qclt_core::model::DependencyModel,
    grid: &qclt_core::quantile::QuantileGrid,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<CovMatrix, CliError> {
    let zeros = vec![0.0; grid.len()];
    if model.dependence_range() == 0 || model.is_gaussian() {
        Ok(sigma_exact(model, grid, &zeros, n)?)
    } else {
        Ok(sigma_empirical(model, grid, &zeros, n, reps, seed)?.matrix)
    }
}

fn cmd_bound(args: &RunArgs) -> Result<(), CliError> {
    let mut reader = load_reader(args)?;
    let model_cfg = read_model(&mut reader)?;
    let levels = reader.require_f64_list("grid.levels")?;
    let exp = read_experiment(&mut reader, args)?;
    reader.finish()?;

    let model = build_model(model_cfg)?;
    let grid = model.grid(&levels)?;

    if levels.len() == 1 {
        let mut out = Csv::new("n,d1,d2,d3,a,theta,sigma_sq,term1,term2,total");
        for &n in &exp.n_list {
            let s0 = sigma0_for(&model, &grid, n, exp.reps, exp.seed)?;
            let rep = univ_bound_rhs(&model, &grid, n, s0.get(0, 0))?;
            out.row(&[
                n.to_string(),
                rep.inputs.d1.to_string(),
                rep.inputs.d2.to_string(),
                rep.inputs.d3.to_string(),
                fmt_f64(rep.inputs.bound_a),
                fmt_f64(rep.inputs.theta_min),
                fmt_f64(rep.inputs.sigma_sq.unwrap()),
                fmt_f64(rep.term1),
                fmt_f64(rep.term2),
                fmt_f64(rep.total),
            ]);
        }
        out.write(args.out.as_deref())?;
    } else {
        let mut out =
            Csv::new("n,d1,d2,d3,a,theta_min,sigma_max_sq,op_norm_inv,term1,term2,total");
        for &n in &exp.n_list {
            let s0 = sigma0_for(&model, &grid, n, exp.reps, exp.seed)?;
            let rep = multi_bound_rhs(&model, &grid, n, &s0)?;
            out.row(&[
                n.to_string(),
                rep.inputs.d1.to_string(),
                rep.inputs.d2.to_string(),
                rep.inputs.d3.to_string(),
                fmt_f64(rep.inputs.bound_a),
                fmt_f64(rep.inputs.theta_min),
                fmt_f64(rep.inputs.sigma_max_sq.unwrap()),
                fmt_f64(rep.inputs.op_norm_sigma_inv.unwrap()),
                fmt_f64(rep.term1),
                fmt_f64(rep.term2),
                fmt_f64(rep.total),
            ]);
        }
        out.write(args.out.as_deref())?;
    }
    Ok(())
}

fn cmd_sigma(args: &RunArgs) -> Result<(), CliError> {
    let mut reader = load_reader(args)?;
    let model_cfg = read_model(&mut reader)?;
    let levels = reader.require_f64_list("grid.levels")?;
    let exp = read_experiment(&mut reader, args)?;
    let x = reader.optional_f64_list("sigma.x")?;
    reader.finish()?;

    let model = build_model(model_cfg)?;
    let grid = model.grid(&levels)?;
    let x = x.unwrap_or_else(|| vec![0.0; grid.len()]);

    let mut out = Csv::new("n,row,col,exact,empirical,std_error");
    for &n in &exp.n_list {
        // The exact engine covers i.i.d. and jointly Gaussian models only;
        // the column stays empty elsewhere.
        let exact = sigma_exact(&model, &grid, &x, n).ok();
        let est = sigma_empirical(&model, &grid, &x, n, exp.reps, exp.seed)?;
        for s in 0..grid.len() {
            for t in 0..grid.len() {
                out.row(&[
                    n.to_string(),
                    s.to_string(),
                    t.to_string(),
                    exact
                        .as_ref()
                        .map(|m| fmt_f64(m.get(s, t)))
                        .unwrap_or_default(),
                    fmt_f64(est.matrix.get(s, t)),
                    fmt_f64(est.std_error(s, t)),
                ]);
            }
        }
    }
    out.write(args.out.as_deref())?;
    Ok(())
}

fn cmd_gauss_tv(args: &RunArgs) -> Result<(), CliError> {
    let mut reader = load_reader(args)?;
    let has_rho = reader.has("gauss.rho");
    let has_matrix = reader.has("gauss.matrix");
    if has_rho == has_matrix {
        return Err(CliError::Config(
            "gauss-tv needs exactly one of gauss.rho or gauss.matrix".into(),
        ));
    }
    if has_rho {
        let rho = reader.require_f64("gauss.rho")?;
        reader.finish()?;
        let exact = tv_normal_exact(rho)?;
        let (tight, simple) = tv_normal_bounds(rho)?;
        let mut out = Csv::new("rho,tv_exact,tv_tight,tv_simple");
        out.row(&[fmt_f64(rho), fmt_f64(exact), fmt_f64(tight), fmt_f64(simple)]);
        out.write(args.out.as_deref())?;
    } else {
        let rows = reader.require_matrix("gauss.matrix")?;
        reader.finish()?;
        let sigma = CovMatrix::from_rows(&rows)?;
        let bound = tv_mvn_bound(&sigma)?;
        let affinity_sq = hellinger_affinity_sq(&sigma)?;
        let mut out = Csv::new("dim,tv_eigen_bound,tv_frobenius_bound,hellinger_affinity_sq");
        out.row(&[
            sigma.dim().to_string(),
            fmt_f64(bound.eigen_bound),
            fmt_f64(bound.frobenius_bound),
            fmt_f64(affinity_sq),
        ]);
        out.write(args.out.as_deref())?;
    }
    Ok(())
}

fn cmd_oracle(args: &RunArgs) -> Result<(), CliError> {
    let mut reader = load_reader(args)?;
    let model_cfg = read_model(&mut reader)?;
    let n_list = reader.require_usize_list("experiment.n")?;
    reader.finish()?;

    let ModelConfig::Iid { marginal } = model_cfg else {
        return Err(CliError::Config(
            "oracle operates on i.i.d. models (model.kind=iid)".into(),
        ));
    };
    let spec = MarginalSpec::new(marginal, &[0.5])?;
    let limit = limit_constant(&spec)?;
    let mut out = Csv::new("n,sqrt_n_ks,limit_const");
    for &n in &n_list {
        let v = scaled_ks_exact(&spec, n)?;
        out.row(&[n.to_string(), fmt_f64(v), fmt_f64(limit)]);
    }
    out.write(args.out.as_deref())?;
    Ok(())
}

fn cmd_rate(args: &RunArgs) -> Result<(), CliError> {
    let mut reader = load_reader(args)?;
    let input = reader.require_string("rate.input")?;
    reader.finish()?;

    let text = fs::read_to_string(&input)
        .map_err(|e| CliError::Io(format!("cannot read {input}: {e}")))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Numeric(format!("{input}: empty CSV")))?;
    let cols: Vec<&str> = header.split(',').collect();
    let n_idx = cols
        .iter()
        .position(|c| *c == "n")
        .ok_or_else(|| CliError::Numeric(format!("{input}: no 'n' column")))?;
    let ks_idx = cols
        .iter()
        .position(|c| *c == "ks_emp" || *c == "sqrt_n_ks")
        .ok_or_else(|| {
            CliError::Numeric(format!("{input}: no 'ks_emp' or 'sqrt_n_ks' column"))
        })?;
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(CliError::Numeric(format!(
                "{input}: row {} has {} fields, header has {}",
                i + 2,
                fields.len(),
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>()
                .map_err(|_| CliError::Numeric(format!("{input}: malformed number '{s}'")))
        };
        points.push((parse(fields[n_idx])?, parse(fields[ks_idx])?));
    }
    let fit = fit_rate(&points)?;
    let mut out = Csv::new("slope,intercept,max_residual");
    out.row(&[
        fmt_f64(fit.slope),
        fmt_f64(fit.intercept),
        fmt_f64(fit.max_residual),
    ]);
    out.write(args.out.as_deref())?;
    Ok(())
}
