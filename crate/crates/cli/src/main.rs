//! Command-line front end: fit, predict, simulate, select and curve export
//! for factor copula-based mixed regression models.
//!
//! Exit codes: 0 on success, 1 on input or configuration errors, 2 when a
//! fit did not converge (the report is still written).

mod io;
mod report;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use copulamix::estimate::{self, FitOptions, SelectionCriterion};
use copulamix::simulate::{self, DgpId, DgpSpec, HarnessConfig, StartMode};
use copulamix::{predict, CopulaFamily, MarginKind, ModelSpec, ParamVector, QuadratureRule};
use io::fmt17;
use report::{
    estimate_entries, CandidateEntry, ClusterEntry, DataInfo, FitReport, ModelInfo, OptionsInfo,
    SelectReport,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "copulamix", version, about = "Factor copula-based mixed regression models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a clustered CSV dataset and write a JSON report.
    Fit(FitArgs),
    /// Posterior latent values and conditional predictions per data row.
    Predict(PredictArgs),
    /// Simulate a catalog dataset, or run a Monte-Carlo campaign from a
    /// TOML config.
    Simulate(SimulateArgs),
    /// Fit several copula candidates and rank them by AIC or BIC.
    Select(SelectArgs),
    /// Export link-prediction curves for a Bernoulli-margin model.
    Curves(CurvesArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Copula family: clayton, frank, gumbel, gaussian, student, independence.
    #[arg(long, default_value = "gaussian")]
    copula: String,
    /// Fixed Student-t degrees of freedom (student copula only).
    #[arg(long, default_value_t = 15.0)]
    student_df: f64,
    /// Margin family: gaussian, poisson, bernoulli.
    #[arg(long, default_value = "gaussian")]
    margin: String,
    /// Column with the cluster identifier.
    #[arg(long, default_value = "cluster")]
    cluster_col: String,
    /// Column with the response.
    #[arg(long, default_value = "y")]
    response_col: String,
    /// Comma-separated covariate columns for the margin link.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    margin_covariates: Vec<String>,
    /// Comma-separated covariate columns for the copula link.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    copula_covariates: Vec<String>,
}

impl ModelArgs {
    fn margin_covs(&self) -> Vec<String> {
        self.margin_covariates.iter().filter(|s| !s.is_empty()).cloned().collect()
    }

    fn copula_covs(&self) -> Vec<String> {
        self.copula_covariates.iter().filter(|s| !s.is_empty()).cloned().collect()
    }

    fn family(&self) -> Result<CopulaFamily> {
        if self.copula.eq_ignore_ascii_case("student") {
            Ok(CopulaFamily::student(self.student_df)?)
        } else {
            Ok(CopulaFamily::parse(&self.copula)?)
        }
    }

    fn spec(&self) -> Result<ModelSpec> {
        Ok(ModelSpec::new(
            self.family()?,
            MarginKind::parse(&self.margin)?,
            self.margin_covs().len(),
            self.copula_covs().len(),
        ))
    }

    fn model_info(&self) -> ModelInfo {
        ModelInfo {
            copula: self.copula.to_ascii_lowercase(),
            student_df: self.copula.eq_ignore_ascii_case("student").then_some(self.student_df),
            margin: self.margin.to_ascii_lowercase(),
            response_col: self.response_col.clone(),
            cluster_col: self.cluster_col.clone(),
            margin_covariates: self.margin_covs(),
            copula_covariates: self.copula_covs(),
        }
    }
}

#[derive(Args, Clone)]
struct EstimationArgs {
    /// Latent-factor quadrature nodes.
    #[arg(long, default_value_t = 100)]
    quad_nodes: usize,
    /// Starting values: "auto" or a path to a previous fit report.
    #[arg(long, default_value = "auto")]
    start: String,
    /// Kendall tau anchoring the automatic copula start.
    #[arg(long, default_value_t = 0.5)]
    start_tau: f64,
    /// Maximum optimiser iterations.
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Gradient sup-norm tolerance (default 1e-5 * sqrt(N)).
    #[arg(long)]
    tol_grad: Option<f64>,
}

impl EstimationArgs {
    fn options(&self) -> FitOptions {
        FitOptions { max_iter: self.max_iter, tol_grad: self.tol_grad, start_tau: self.start_tau }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with a header row.
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    estimation: EstimationArgs,
    /// Random seed recorded in the report (fits are deterministic).
    #[arg(long)]
    seed: Option<u64>,
    /// Output report path.
    #[arg(long, default_value = "fit.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Input CSV with a header row.
    data: PathBuf,
    /// Fit report holding the model and estimates.
    #[arg(long)]
    params: PathBuf,
    /// Quadrature nodes for the latent posterior.
    #[arg(long, default_value_t = 100)]
    quad_nodes: usize,
    /// Conditional quantiles to report (comma separated, in (0,1)).
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    quantiles: Vec<f64>,
    /// Output CSV path.
    #[arg(long, default_value = "predictions.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Catalog identifier: exp1..exp8 or dgp1..dgp12.
    #[arg(long, conflicts_with = "harness")]
    dgp: Option<String>,
    /// Number of clusters.
    #[arg(long = "K", default_value_t = 50)]
    n_clusters: usize,
    /// Cluster size (default: the catalog's value).
    #[arg(long = "n")]
    cluster_size: Option<usize>,
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Monte-Carlo campaign config (TOML); writes <out>.json and <out>.csv.
    #[arg(long)]
    harness: Option<PathBuf>,
    /// Output path (dataset CSV, or report base name with --harness).
    #[arg(long, default_value = "simulated.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    /// Input CSV with a header row.
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    estimation: EstimationArgs,
    /// Comma-separated copula candidates.
    #[arg(long, value_delimiter = ',', default_value = "clayton,frank,gumbel,gaussian,student")]
    copulas: Vec<String>,
    /// Ranking criterion: aic or bic.
    #[arg(long, default_value = "bic")]
    criterion: String,
    /// Output JSON report path.
    #[arg(long, default_value = "selection.json")]
    out: PathBuf,
}

#[derive(Args)]
struct CurvesArgs {
    /// Fit report holding the model and estimates (Bernoulli margin, one
    /// margin covariate).
    #[arg(long, conflicts_with = "theta")]
    params: Option<PathBuf>,
    /// Explicit parameter vector (comma separated, report order) used with
    /// the model flags instead of --params.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    theta: Vec<f64>,
    #[command(flatten)]
    model: ModelArgs,
    /// Latent values for the curves.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9")]
    v: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    x_min: f64,
    #[arg(long, default_value_t = 1.0)]
    x_max: f64,
    #[arg(long, default_value_t = 101)]
    x_steps: usize,
    /// Output CSV path.
    #[arg(long, default_value = "curves.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Curves(args) => cmd_curves(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_start(path_or_auto: &str, spec: &ModelSpec) -> Result<Option<ParamVector>> {
    if path_or_auto == "auto" {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path_or_auto)
        .with_context(|| format!("cannot read start file {path_or_auto}"))?;
    // either a previous fit report or a plain JSON array of numbers
    let values: Vec<f64> = if let Ok(report) = serde_json::from_str::<FitReport>(&text) {
        report.theta()
    } else {
        serde_json::from_str(&text).context("start file must be a fit report or a JSON array")?
    };
    Ok(Some(ParamVector::new(spec, values)?))
}

fn cmd_fit(args: &FitArgs) -> Result<ExitCode> {
    let spec = args.model.spec()?;
    let loaded = io::read_dataset(
        &args.data,
        &args.model.cluster_col,
        &args.model.response_col,
        &args.model.margin_covs(),
        &args.model.copula_covs(),
    )?;
    let rule = QuadratureRule::latent_default(args.estimation.quad_nodes);
    let start = load_start(&args.estimation.start, &spec)?;
    let options = args.estimation.options();
    let fit = estimate::fit(&spec, &loaded.dataset, &rule, start, &options)?;
    let names = spec.param_names(loaded.dataset.margin_names(), loaded.dataset.copula_names())?;
    let posteriors = predict::latent_posteriors(&spec, &fit.theta, &loaded.dataset, &rule)?;
    let report = FitReport {
        model: args.model.model_info(),
        options: OptionsInfo {
            quad_nodes: args.estimation.quad_nodes,
            max_iter: options.max_iter,
            tol_grad: options.tol_grad,
            start_tau: options.start_tau,
            start: args.estimation.start.clone(),
            seed: args.seed,
        },
        data: DataInfo {
            n_obs: fit.n_obs,
            n_clusters: fit.n_clusters,
            lambda_k: fit.lambda_k,
            rows_rejected: loaded.rows_rejected,
        },
        estimates: estimate_entries(&names, &fit),
        loglik: fit.loglik,
        aic: fit.aic,
        bic: fit.bic,
        grad_norm: fit.grad_norm,
        converged: fit.converged,
        iterations: fit.iterations,
        nan_encountered: fit.nan_encountered,
        cov_flag: fit.cov_flag,
        clusters: posteriors
            .iter()
            .map(|p| ClusterEntry {
                id: p.label.clone(),
                n: loaded.dataset.cluster_range(p.cluster).len(),
                v_median: p.median,
                v_mean: p.mean,
            })
            .collect(),
    };
    write_json(&args.out, &report)?;
    eprintln!(
        "fit: loglik {:.6}, aic {:.6}, bic {:.6}, converged {}",
        fit.loglik, fit.aic, fit.bic, fit.converged
    );
    Ok(if fit.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_predict(args: &PredictArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.params)
        .with_context(|| format!("cannot read {}", args.params.display()))?;
    let fit_report: FitReport = serde_json::from_str(&text).context("invalid fit report")?;
    let spec = fit_report.model.to_spec()?;
    let theta = ParamVector::new(&spec, fit_report.theta())?;
    for &q in &args.quantiles {
        if !(q > 0.0 && q < 1.0) {
            bail!("quantile {q} outside (0,1)");
        }
    }
    let loaded = io::read_dataset(
        &args.data,
        &fit_report.model.cluster_col,
        &fit_report.model.response_col,
        &fit_report.model.margin_covariates,
        &fit_report.model.copula_covariates,
    )?;
    let rule = QuadratureRule::latent_default(args.quad_nodes);
    let posteriors = predict::latent_posteriors(&spec, &theta, &loaded.dataset, &rule)?;
    let mut writer = csv::Writer::from_path(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    let mut header = vec![
        "cluster".to_string(),
        "row".to_string(),
        "v_median".to_string(),
        "v_mean".to_string(),
        "predicted_mean".to_string(),
    ];
    header.extend(args.quantiles.iter().map(|q| format!("q{q}")));
    writer.write_record(&header)?;
    let data = &loaded.dataset;
    for (k, post) in posteriors.iter().enumerate() {
        let v = post.median.clamp(1e-9, 1.0 - 1e-9);
        for i in data.cluster_range(k) {
            let xm = data.x_margin_row(i);
            let xc = data.x_copula_row(i);
            let mean = predict::cond_mean(&spec, &theta, xm, xc, v)?;
            let mut rec = vec![
                data.cluster_label(k).to_string(),
                i.to_string(),
                fmt17(post.median),
                fmt17(post.mean),
                fmt17(mean),
            ];
            for &q in &args.quantiles {
                rec.push(fmt17(predict::cond_quantile(&spec, &theta, q, xm, xc, v)?));
            }
            writer.write_record(&rec)?;
        }
    }
    writer.flush()?;
    Ok(ExitCode::SUCCESS)
}

/// TOML schema for Monte-Carlo campaigns.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct HarnessToml {
    dgp: String,
    clusters: usize,
    cluster_size: Option<usize>,
    replications: usize,
    seed: u64,
    quad_nodes: Option<usize>,
    start: Option<String>,
    start_tau: Option<f64>,
    candidates: Option<Vec<String>>,
    criterion: Option<String>,
    predict_new: Option<usize>,
    max_iter: Option<usize>,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode> {
    if let Some(config_path) = &args.harness {
        let text = std::fs::read_to_string(config_path)
            .with_context(|| format!("cannot read {}", config_path.display()))?;
        let toml_cfg: HarnessToml = toml::from_str(&text).context("invalid harness config")?;
        let id = DgpId::parse(&toml_cfg.dgp)?;
        let dims = DgpSpec::new(
            id,
            toml_cfg.clusters,
            toml_cfg.cluster_size.unwrap_or_else(|| id.default_cluster_size()),
        );
        let mut config = HarnessConfig::new(dims, toml_cfg.replications, toml_cfg.seed);
        if let Some(q) = toml_cfg.quad_nodes {
            config.quad_nodes = q;
        }
        config.start = match toml_cfg.start.as_deref() {
            None | Some("auto") => StartMode::Auto,
            Some("truth") => StartMode::Truth,
            Some(other) => bail!("unknown start mode '{other}'"),
        };
        if let Some(t) = toml_cfg.start_tau {
            config.fit_options.start_tau = t;
        }
        if let Some(m) = toml_cfg.max_iter {
            config.fit_options.max_iter = m;
        }
        if let Some(c) = toml_cfg.candidates {
            config.candidates = c;
        }
        if let Some(c) = toml_cfg.criterion.as_deref() {
            config.criterion = SelectionCriterion::parse(c)?;
        }
        if let Some(p) = toml_cfg.predict_new {
            config.predict_new = p;
        }
        let report = simulate::run_harness(&config)?;
        let json_path = args.out.with_extension("json");
        let csv_path = args.out.with_extension("csv");
        write_json(&json_path, &report)?;
        write_harness_csv(&csv_path, &report)?;
        eprintln!(
            "harness: {} replications of {}, {} failures -> {} / {}",
            report.replications,
            report.dgp,
            report.failures,
            json_path.display(),
            csv_path.display()
        );
        return Ok(ExitCode::SUCCESS);
    }
    let Some(dgp_name) = &args.dgp else {
        bail!("simulate needs either --dgp or --harness");
    };
    let id = DgpId::parse(dgp_name)?;
    let dims = DgpSpec::new(
        id,
        args.n_clusters,
        args.cluster_size.unwrap_or_else(|| id.default_cluster_size()),
    );
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(args.seed);
    let sim = simulate::dgp(&dims, &mut rng)?;
    io::write_dataset_csv(&args.out, &sim)?;
    eprintln!(
        "simulated {}: {} clusters x {} -> {} (true parameters: {})",
        id.name(),
        dims.n_clusters,
        dims.cluster_size,
        args.out.display(),
        sim.param_names
            .iter()
            .zip(sim.true_theta.values())
            .map(|(n, v)| format!("{n}={v:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(ExitCode::SUCCESS)
}

fn write_harness_csv(path: &Path, report: &simulate::HarnessReport) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    writer.write_record(["section", "name", "value", "extra"])?;
    for (name, rmse) in report.param_names.iter().zip(&report.param_rmse) {
        writer.write_record(["param_rmse", name, &fmt17(*rmse), ""])?;
    }
    for (name, pct) in &report.selection_pct {
        writer.write_record(["selection_pct", name, &fmt17(*pct), ""])?;
    }
    for (name, m) in &report.prediction_summary {
        writer.write_record(["prediction_rmse", name, &fmt17(m.rmse), &fmt17(m.rmse95)])?;
    }
    writer.write_record(["failures", "", &report.failures.to_string(), ""])?;
    writer.flush()?;
    Ok(())
}

fn cmd_select(args: &SelectArgs) -> Result<ExitCode> {
    let margin = MarginKind::parse(&args.model.margin)?;
    let loaded = io::read_dataset(
        &args.data,
        &args.model.cluster_col,
        &args.model.response_col,
        &args.model.margin_covs(),
        &args.model.copula_covs(),
    )?;
    let criterion = SelectionCriterion::parse(&args.criterion)?;
    let candidates: Vec<(String, ModelSpec)> = args
        .copulas
        .iter()
        .map(|name| -> Result<(String, ModelSpec)> {
            let family = if name == "student" {
                CopulaFamily::student(args.model.student_df)?
            } else {
                CopulaFamily::parse(name)?
            };
            Ok((
                name.clone(),
                ModelSpec::new(
                    family,
                    margin,
                    args.model.margin_covs().len(),
                    args.model.copula_covs().len(),
                ),
            ))
        })
        .collect::<Result<_>>()?;
    let rule = QuadratureRule::latent_default(args.estimation.quad_nodes);
    let ranked =
        estimate::select(&candidates, &loaded.dataset, &rule, criterion, &args.estimation.options())?;
    let all_converged = ranked.iter().all(|r| r.fit.converged);
    let report = SelectReport {
        criterion: args.criterion.to_ascii_lowercase(),
        data: DataInfo {
            n_obs: loaded.dataset.n_obs(),
            n_clusters: loaded.dataset.n_clusters(),
            lambda_k: loaded.dataset.lambda_k(),
            rows_rejected: loaded.rows_rejected,
        },
        candidates: ranked
            .iter()
            .map(|r| CandidateEntry {
                rank: r.rank,
                label: r.label.clone(),
                copula: r.spec.copula.name().to_string(),
                margin: r.spec.margin.name().to_string(),
                n_params: r.spec.param_count(),
                loglik: r.fit.loglik,
                aic: r.fit.aic,
                bic: r.fit.bic,
                converged: r.fit.converged,
                criterion_value: r.criterion_value,
                chosen: r.chosen,
            })
            .collect(),
    };
    write_json(&args.out, &report)?;
    eprintln!(
        "select: best by {} is '{}'",
        report.criterion,
        report.candidates.first().map(|c| c.label.as_str()).unwrap_or("?")
    );
    Ok(if all_converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_curves(args: &CurvesArgs) -> Result<ExitCode> {
    let (spec, theta) = if let Some(params) = &args.params {
        let text = std::fs::read_to_string(params)
            .with_context(|| format!("cannot read {}", params.display()))?;
        let fit_report: FitReport = serde_json::from_str(&text).context("invalid fit report")?;
        let spec = fit_report.model.to_spec()?;
        let theta = ParamVector::new(&spec, fit_report.theta())?;
        (spec, theta)
    } else {
        if args.theta.is_empty() {
            bail!("curves needs either --params or --theta");
        }
        let spec = args.model.spec()?;
        let theta = ParamVector::new(&spec, args.theta.clone())?;
        (spec, theta)
    };
    if args.x_steps < 2 {
        bail!("--x-steps must be at least 2");
    }
    let grid: Vec<f64> = (0..args.x_steps)
        .map(|i| args.x_min + (args.x_max - args.x_min) * i as f64 / (args.x_steps - 1) as f64)
        .collect();
    let points = predict::link_curve(&spec, &theta, &grid, &args.v)?;
    let mut writer = csv::Writer::from_path(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    writer.write_record(["x", "v", "curve"])?;
    for p in &points {
        writer.write_record([fmt17(p.x), fmt17(p.v), fmt17(p.curve)])?;
    }
    writer.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serialisation failed")?;
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
