//! Batch command-line driver. Every subcommand writes its outputs plus a
//! `manifest.json` into `--out`; `replay` re-executes a manifest.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::basis::BasisKind;
use crate::detect::{detect_with, expected_tensor, impute, score_detection, ImputeMode};
use crate::error::{Result, ZitsError};
use crate::eval::{ari, kmeans, pca_project, rel_error, slice_features};
use crate::fit::{fit_pipeline, ClusterSolution, FitConfig, ModelKind, PipelineSpec};
use crate::init::InitKind;
use crate::io::{self, fmt_real, Bundle};
use crate::model::{build_links, lambda_p_of, ModelParams};
use crate::sim::{simulate, NoiseWidth, SimConfig, SimTruth};
use crate::tensor::{CountTensor, DenseTensor3};
use crate::zip::{
    bayes_false_zero, orlicz_psi1, posterior_false_zero, zip_mean_var, zip_to_hurdle, ZeroKind,
    ZipParams,
};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "zits",
    version,
    about = "Zero-inflated Poisson tensor model with smoothing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic count tensor and its ground truth.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the model and extract cell clusters.
    Fit {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flag observed zeros that are likely dropouts.
    Detect {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long)]
        params: PathBuf,
        /// Also write the posterior false-zero probabilities.
        #[arg(long)]
        posterior: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace flagged zeros by fitted values.
    Impute {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        flags: PathBuf,
        #[arg(long, default_value_t = ImputeMode::Expected)]
        mode: ImputeMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a fit against simulated ground truth.
    Eval {
        #[command(flatten)]
        input: DataArgs,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long, default_value_t = ImputeMode::Expected)]
        mode: ImputeMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, fit, detect, impute and evaluate over replicate seeds.
    Pipeline {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, default_value_t = ImputeMode::Expected)]
        mode: ImputeMode,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Seed of the first replicate; replicate r uses seed + r.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate ZIP moments, hurdle form, Bayes decision and ψ₁-norm on a grid.
    DistTable {
        /// Comma-separated zero-inflation probabilities.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9")]
        p: Vec<f64>,
        /// Comma-separated Poisson intensities.
        #[arg(long, value_delimiter = ',', default_value = "0.5,2,10")]
        lambda: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        /// Write to this directory instead of the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Count tensor file.
    #[arg(long)]
    pub data: PathBuf,
    /// Indices in the data file are 1-based.
    #[arg(long)]
    pub ingest_1based: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long = "L")]
    pub l: usize,
    #[arg(long = "R", default_value_t = 1)]
    pub r: usize,
    #[arg(long, default_value_t = 0.5)]
    pub mu_alpha: f64,
    #[arg(long, default_value_t = 5.0)]
    pub mu_beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu_xi: f64,
    /// Defaults to sqrt(mu_alpha / 4).
    #[arg(long)]
    pub sigma_alpha: Option<f64>,
    #[arg(long)]
    pub sigma_beta: Option<f64>,
    #[arg(long)]
    pub sigma_xi: Option<f64>,
    /// Uniform noise width: `sigma` (width σ) or `variance` (variance σ²).
    #[arg(long, default_value_t = NoiseWidth::Sigma)]
    pub noise: NoiseWidth,
}

impl SimArgs {
    fn config(&self, seed: u64) -> SimConfig {
        let mut c = SimConfig::standard(self.n, self.k, self.l, self.r, self.mu_xi, seed);
        c.mu_alpha = self.mu_alpha;
        c.mu_beta = self.mu_beta;
        c.sigma_alpha = self.sigma_alpha.unwrap_or((self.mu_alpha / 4.0).sqrt());
        c.sigma_beta = self.sigma_beta.unwrap_or((self.mu_beta / 4.0).sqrt());
        c.sigma_xi = self.sigma_xi.unwrap_or((self.mu_xi / 4.0).sqrt());
        c.noise = self.noise;
        c
    }
}

fn sim_json(c: &SimConfig) -> Value {
    json!({
        "N": c.n, "K": c.k, "L": c.l, "R": c.r,
        "mu_alpha": c.mu_alpha, "sigma_alpha": c.sigma_alpha,
        "mu_beta": c.mu_beta, "sigma_beta": c.sigma_beta,
        "mu_xi": c.mu_xi, "sigma_xi": c.sigma_xi,
        "noise": c.noise.to_string(), "seed": c.seed,
    })
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    /// Embedding dimension per cluster.
    #[arg(long = "Lhat")]
    pub lhat: usize,
    /// Number of cell clusters (the fit uses rank R * Lhat). Defaults to the
    /// simulated R in `pipeline` and to 1 in `fit`.
    #[arg(long = "Rhat")]
    pub rhat: Option<usize>,
    /// Basis size; defaults to N.
    #[arg(long = "Q")]
    pub q: Option<usize>,
    #[arg(long, default_value_t = BasisKind::CubicBspline)]
    pub basis: BasisKind,
    #[arg(long, default_value_t = InitKind::EigenB)]
    pub init: InitKind,
    #[arg(long, default_value_t = ModelKind::Zip)]
    pub model: ModelKind,
    /// Threshold counts to 0/1 for the binary model.
    #[arg(long)]
    pub binarize: bool,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 50.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 50.0)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 0)]
    pub exclude_diag_band: usize,
}

impl FitArgs {
    fn resolve(&self, n: usize, default_r: usize, seed: u64) -> (PipelineSpec, FitConfig) {
        let spec = PipelineSpec {
            r: self.rhat.unwrap_or(default_r),
            l: self.lhat,
            q: self.q.unwrap_or(n),
            basis: self.basis,
            scheme: self.init,
        };
        let cfg = FitConfig {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            beta_max: self.beta_max,
            xi_max: self.xi_max,
            seed,
            exclude_diag_band: self.exclude_diag_band,
            model: self.model,
            binarize: self.binarize,
            ..FitConfig::default()
        };
        (spec, cfg)
    }
}

fn fit_json(spec: &PipelineSpec, cfg: &FitConfig) -> Value {
    json!({
        "R": spec.r, "Lhat": spec.l, "Q": spec.q,
        "basis": spec.basis.to_string(), "init": spec.scheme.to_string(),
        "model": cfg.model.to_string(), "binarize": cfg.binarize,
        "max_iters": cfg.max_iters, "rel_tol": cfg.rel_tol,
        "armijo_c1": cfg.armijo_c1, "backtrack": cfg.backtrack,
        "initial_step": cfg.initial_step, "max_step": cfg.max_step, "step_growth": cfg.step_growth,
        "beta_max": cfg.beta_max, "xi_max": cfg.xi_max,
        "exclude_diag_band": cfg.exclude_diag_band, "seed": cfg.seed,
    })
}

/// Maps a library error onto the documented exit codes.
pub fn exit_code(e: &ZitsError) -> i32 {
    match e {
        ZitsError::InvalidParameter(_) => EXIT_USAGE,
        ZitsError::DimensionMismatch(_)
        | ZitsError::InvalidData(_)
        | ZitsError::Parse { .. }
        | ZitsError::Io(_) => EXIT_DATA,
        ZitsError::NonRepresentable { .. }
        | ZitsError::NonFinite { .. }
        | ZitsError::Numerical(_)
        | ZitsError::Clustering(_) => EXIT_NUMERIC,
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let recorded: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(cli.command, &recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Manifest {
    subcommand: &'static str,
    args: Vec<String>,
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Manifest {
    fn write(&self, dir: &Path, started: Instant) -> Result<()> {
        let paths = |v: &[PathBuf]| {
            v.iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
        };
        let m = json!({
            "subcommand": self.subcommand,
            "args": self.args,
            "config": self.config,
            "inputs": paths(&self.inputs),
            "outputs": paths(&self.outputs),
            "wall_time_secs": started.elapsed().as_secs_f64(),
            "version": env!("CARGO_PKG_VERSION"),
        });
        let text =
            serde_json::to_string_pretty(&m).map_err(|e| ZitsError::InvalidData(e.to_string()))?;
        io::write_text(&dir.join("manifest.json"), &(text + "\n"))?;
        Ok(())
    }
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| io::with_path(e, out))
}

fn read_params(path: &Path) -> Result<ModelParams> {
    io::params_from_bundle(&Bundle::read(path)?)
}

fn execute(cmd: Command, args: &[String]) -> Result<()> {
    let started = Instant::now();
    match cmd {
        Command::Simulate { sim, seed, out } => {
            let cfg = sim.config(seed);
            cfg.validate()?;
            create_dir(&out)?;
            let (data, truth) = simulate(&cfg)?;
            let files = [out.join("data.tsr"), out.join("truth.txt")];
            io::write_tensor(&files[0], &data)?;
            io::truth_bundle(&truth).write(&files[1])?;
            Manifest {
                subcommand: "simulate",
                args: args.to_vec(),
                config: sim_json(&cfg),
                inputs: vec![],
                outputs: files.to_vec(),
            }
            .write(&out, started)
        }
        Command::Fit {
            input,
            fit,
            seed,
            out,
        } => {
            let data = io::read_tensor(&input.data, input.ingest_1based)?;
            let (spec, cfg) = fit.resolve(data.n_loci(), 1, seed);
            create_dir(&out)?;
            let outputs = run_fit(&data, &spec, &cfg, &out)?;
            Manifest {
                subcommand: "fit",
                args: args.to_vec(),
                config: fit_json(&spec, &cfg),
                inputs: vec![input.data],
                outputs,
            }
            .write(&out, started)
        }
        Command::Detect {
            input,
            params,
            posterior,
            out,
        } => {
            let data = io::read_tensor(&input.data, input.ingest_1based)?;
            let m = read_params(&params)?;
            create_dir(&out)?;
            let res = detect_with(&data, &m, posterior)?;
            let mut outputs = vec![out.join("flags.tsr"), out.join("detect_summary.txt")];
            io::write_tensor(&outputs[0], &res.to_mask(data.n_loci(), data.n_cells())?)?;
            let mut s = format!(
                "zeros_scanned = {}\nflagged = {}\n",
                res.zeros_scanned,
                res.n_flagged()
            );
            if let Some(post) = &res.posterior {
                let mean = if res.zeros_scanned > 0 {
                    // symmetric storage: sum the upper triangle only
                    let (n, _, k) = post.dims();
                    let mut total = 0.0;
                    for kk in 0..k {
                        for i in 0..n {
                            for j in i..n {
                                total += post.get(i, j, kk);
                            }
                        }
                    }
                    total / res.zeros_scanned as f64
                } else {
                    0.0
                };
                let _ = writeln!(s, "posterior_mean = {}", fmt_real(mean));
                let p = out.join("posterior.rtsr");
                io::write_rtensor(&p, post)?;
                outputs.push(p);
            }
            io::write_text(&outputs[1], &s)?;
            Manifest {
                subcommand: "detect",
                args: args.to_vec(),
                config: json!({ "posterior": posterior, "ingest_1based": input.ingest_1based }),
                inputs: vec![input.data, params],
                outputs,
            }
            .write(&out, started)
        }
        Command::Impute {
            input,
            params,
            flags,
            mode,
            out,
        } => {
            let data = io::read_tensor(&input.data, input.ingest_1based)?;
            let m = read_params(&params)?;
            let mask = io::read_tensor(&flags, false)?;
            let cells: Vec<_> = mask.iter_upper().map(|(i, j, k, _)| (i, j, k)).collect();
            create_dir(&out)?;
            let imputed = impute(&data, &m, &cells, mode)?;
            let path = out.join("imputed.rtsr");
            io::write_rtensor(&path, &imputed)?;
            Manifest {
                subcommand: "impute",
                args: args.to_vec(),
                config: json!({ "mode": mode.to_string() }),
                inputs: vec![input.data, params, flags],
                outputs: vec![path],
            }
            .write(&out, started)
        }
        Command::Eval {
            input,
            params,
            truth,
            clusters,
            mode,
            seed,
            out,
        } => {
            let truth_path = truth.ok_or_else(|| {
                ZitsError::InvalidData("eval needs --truth with the simulated ground truth".into())
            })?;
            let data = io::read_tensor(&input.data, input.ingest_1based)?;
            let m = read_params(&params)?;
            let t = io::truth_from_bundle(&Bundle::read(&truth_path)?)?;
            let cl = clusters
                .as_ref()
                .map(|p| Bundle::read(p).and_then(|b| io::clusters_from_bundle(&b)))
                .transpose()?;
            create_dir(&out)?;
            let metrics = evaluate(&data, &m, cl.as_ref(), &t, mode, seed)?;
            let path = out.join("metrics.txt");
            io::write_text(&path, &metrics_text(&metrics))?;
            let mut inputs = vec![input.data, params, truth_path];
            inputs.extend(clusters);
            Manifest {
                subcommand: "eval",
                args: args.to_vec(),
                config: json!({ "mode": mode.to_string(), "seed": seed }),
                inputs,
                outputs: vec![path],
            }
            .write(&out, started)
        }
        Command::Pipeline {
            sim,
            fit,
            mode,
            reps,
            seed,
            out,
        } => {
            if reps == 0 {
                return Err(ZitsError::InvalidParameter(
                    "--reps must be at least 1".into(),
                ));
            }
            sim.config(seed).validate()?;
            create_dir(&out)?;
            let results: Vec<Result<Vec<(String, f64)>>> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let rep_seed = seed + rep as u64;
                    let dir = out.join(format!("rep_{rep:03}"));
                    run_replicate(&sim, &fit, mode, rep_seed, &dir)
                })
                .collect();
            let results: Vec<Vec<(String, f64)>> = results.into_iter().collect::<Result<_>>()?;
            let path = out.join("summary.csv");
            io::write_text(&path, &summary_csv(&results, seed))?;
            let (spec, cfg) = fit.resolve(sim.n, sim.r, seed);
            Manifest {
                subcommand: "pipeline",
                args: args.to_vec(),
                config: json!({
                    "sim": sim_json(&sim.config(seed)),
                    "fit": fit_json(&spec, &cfg),
                    "mode": mode.to_string(),
                    "reps": reps,
                }),
                inputs: vec![],
                outputs: vec![path],
            }
            .write(&out, started)
        }
        Command::DistTable { p, lambda, out } => {
            create_dir(&out)?;
            let path = out.join("dist_table.csv");
            io::write_text(&path, &dist_table(&p, &lambda)?)?;
            Manifest {
                subcommand: "dist-table",
                args: args.to_vec(),
                config: json!({ "p": p, "lambda": lambda }),
                inputs: vec![],
                outputs: vec![path],
            }
            .write(&out, started)
        }
        Command::Replay { manifest, out } => replay(&manifest, out.as_deref()),
    }
}

fn run_fit(
    data: &CountTensor,
    spec: &PipelineSpec,
    cfg: &FitConfig,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let (fitted, clusters, report) = fit_pipeline(data, spec, cfg)?;
    let structured = clusters.structured_params(&fitted)?;
    let files = [
        out.join("params.txt"),
        out.join("structured_params.txt"),
        out.join("clusters.txt"),
        out.join("report.txt"),
    ];
    io::params_bundle(&fitted).write(&files[0])?;
    io::params_bundle(&structured).write(&files[1])?;
    io::clusters_bundle(&clusters).write(&files[2])?;
    io::write_text(&files[3], &io::report_text(&report))?;
    Ok(files.to_vec())
}

fn run_replicate(
    sim: &SimArgs,
    fit: &FitArgs,
    mode: ImputeMode,
    seed: u64,
    dir: &Path,
) -> Result<Vec<(String, f64)>> {
    create_dir(dir)?;
    let started = Instant::now();
    let cfg = sim.config(seed);
    let (data, truth) = simulate(&cfg)?;
    io::write_tensor(&dir.join("data.tsr"), &data)?;
    io::truth_bundle(&truth).write(&dir.join("truth.txt"))?;
    let (spec, fcfg) = fit.resolve(sim.n, sim.r, seed);
    let mut outputs = vec![dir.join("data.tsr"), dir.join("truth.txt")];
    outputs.extend(run_fit(&data, &spec, &fcfg, dir)?);
    let fitted = read_params(&dir.join("params.txt"))?;
    let clusters = io::clusters_from_bundle(&Bundle::read(&dir.join("clusters.txt"))?)?;
    let metrics = evaluate(&data, &fitted, Some(&clusters), &truth, mode, seed)?;
    let (converged, trace) = io::parse_report(&io::read_text(&dir.join("report.txt"))?)?;
    let mut all = metrics;
    all.push(("converged".into(), f64::from(u8::from(converged))));
    all.push(("iterations".into(), (trace.len() - 1) as f64));
    io::write_text(&dir.join("metrics.txt"), &metrics_text(&all))?;
    outputs.push(dir.join("metrics.txt"));
    Manifest {
        subcommand: "pipeline-replicate",
        args: vec![],
        config: json!({ "sim": sim_json(&cfg), "fit": fit_json(&spec, &fcfg), "mode": mode.to_string() }),
        inputs: vec![],
        outputs,
    }
    .write(dir, started)?;
    Ok(all)
}

fn cluster_ari(t: &DenseTensor3, r: usize, seed: u64, truth: &[usize]) -> Result<f64> {
    let features = slice_features(t);
    let scores = pca_project(&features, 20)?;
    let scores = if scores.ncols() == 0 {
        features
    } else {
        scores
    };
    ari(&kmeans(&scores, r, seed)?, truth)
}

/// Relative errors, detection scores and clustering agreement for one fit.
pub fn evaluate(
    data: &CountTensor,
    fitted: &ModelParams,
    clusters: Option<&ClusterSolution>,
    truth: &SimTruth,
    mode: ImputeMode,
    seed: u64,
) -> Result<Vec<(String, f64)>> {
    fitted.check_data(data)?;
    if truth.lambda.dims() != (data.n_loci(), data.n_loci(), data.n_cells()) {
        return Err(ZitsError::DimensionMismatch(
            "truth does not match the data dimensions".into(),
        ));
    }
    let mut out: Vec<(String, f64)> = Vec::new();
    let (lam, p) = lambda_p_of(&build_links(fitted)?);
    out.push(("rel_error_lambda".into(), rel_error(&lam, &truth.lambda)?));
    out.push(("rel_error_p".into(), rel_error(&p, &truth.p)?));
    if let Some(cl) = clusters {
        let (ls, ps) = lambda_p_of(&build_links(&cl.structured_params(fitted)?)?);
        out.push((
            "rel_error_lambda_structured".into(),
            rel_error(&ls, &truth.lambda)?,
        ));
        out.push(("rel_error_p_structured".into(), rel_error(&ps, &truth.p)?));
    }

    let det = detect_with(data, fitted, false)?;
    let sc = score_detection(data, &det, truth)?;
    out.push(("detection_accuracy".into(), sc.accuracy));
    out.push(("detection_precision".into(), sc.precision));
    out.push(("detection_recall".into(), sc.recall));
    out.push(("zeros_scanned".into(), det.zeros_scanned as f64));
    out.push(("zeros_flagged".into(), det.n_flagged() as f64));

    let r = truth.labels.iter().max().map_or(1, |m| m + 1);
    let imputed = impute(data, fitted, &det.flags, mode)?;
    out.push((
        "ari_raw".into(),
        cluster_ari(&data.to_dense(), r, seed, &truth.labels)?,
    ));
    out.push((
        "ari_imputed".into(),
        cluster_ari(&imputed, r, seed, &truth.labels)?,
    ));
    out.push((
        "ari_expected".into(),
        cluster_ari(&expected_tensor(fitted)?, r, seed, &truth.labels)?,
    ));
    out.push((
        "ari_lambda".into(),
        cluster_ari(&lam, r, seed, &truth.labels)?,
    ));
    out.push(("ari_p".into(), cluster_ari(&p, r, seed, &truth.labels)?));
    out.push((
        "ari_beta".into(),
        ari(&kmeans(&fitted.w_beta, r, seed)?, &truth.labels)?,
    ));
    out.push((
        "ari_xi".into(),
        ari(&kmeans(&fitted.w_xi, r, seed)?, &truth.labels)?,
    ));
    if let Some(cl) = clusters {
        out.push(("ari_clusters".into(), ari(&cl.labels, &truth.labels)?));
    }
    Ok(out)
}

pub fn metrics_text(m: &[(String, f64)]) -> String {
    m.iter()
        .map(|(k, v)| format!("{k} = {}\n", fmt_metric(*v)))
        .collect()
}

// counts print as integers, everything else in round-trip exponent form
fn fmt_metric(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v}")
    } else {
        fmt_real(v)
    }
}

/// Parses `key = value` lines written by [`metrics_text`].
pub fn parse_metrics(text: &str) -> Result<Vec<(String, f64)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (k, v) = l.split_once(" = ").ok_or_else(|| ZitsError::Parse {
                line: i + 1,
                msg: "expected 'key = value'".into(),
            })?;
            let v = v.trim().parse().map_err(|_| ZitsError::Parse {
                line: i + 1,
                msg: format!("cannot parse '{v}'"),
            })?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summary_csv(results: &[Vec<(String, f64)>], seed: u64) -> String {
    let keys: Vec<&str> = results[0].iter().map(|(k, _)| k.as_str()).collect();
    let mut s = format!("rep,seed,{}\n", keys.join(","));
    for (rep, row) in results.iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|(_, v)| fmt_metric(*v)).collect();
        let _ = writeln!(s, "{rep},{},{}", seed + rep as u64, vals.join(","));
    }
    let med: Vec<String> = (0..keys.len())
        .map(|c| fmt_metric(median(results.iter().map(|r| r[c].1).collect())))
        .collect();
    let _ = writeln!(s, "median,,{}", med.join(","));
    s
}

fn dist_table(ps: &[f64], lambdas: &[f64]) -> Result<String> {
    let mut s = String::from("p,lambda,mean,variance,zero_mass,hurdle_pi0,posterior_false_zero,bayes_decision,psi1_norm\n");
    for &p in ps {
        for &l in lambdas {
            let z = ZipParams::new(p, l)?;
            let (mean, var) = zip_mean_var(&z);
            let decision = match bayes_false_zero(&z) {
                ZeroKind::FalseZero => "false_zero",
                ZeroKind::TrueZero => "true_zero",
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                fmt_real(p),
                fmt_real(l),
                fmt_real(mean),
                fmt_real(var),
                fmt_real(z.zero_mass()),
                fmt_real(zip_to_hurdle(&z).pi0()),
                fmt_real(posterior_false_zero(&z)),
                decision,
                fmt_real(orlicz_psi1(&z))
            );
        }
    }
    Ok(s)
}

fn replay(manifest: &Path, out: Option<&Path>) -> Result<()> {
    let text = io::read_text(manifest)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| ZitsError::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    let mut args: Vec<String> = v["args"]
        .as_array()
        .filter(|a| !a.is_empty())
        .ok_or_else(|| ZitsError::InvalidData("manifest has no recorded arguments".into()))?
        .iter()
        .map(|a| {
            a.as_str()
                .map(str::to_string)
                .ok_or_else(|| ZitsError::InvalidData("non-string argument".into()))
        })
        .collect::<Result<_>>()?;
    if args[0] == "replay" {
        return Err(ZitsError::InvalidData(
            "refusing to replay a replay manifest".into(),
        ));
    }
    if let Some(dir) = out {
        let pos = args
            .iter()
            .position(|a| a == "--out")
            .ok_or_else(|| ZitsError::InvalidData("recorded command has no --out".into()))?;
        args[pos + 1] = dir.display().to_string();
    }
    let cli = Cli::try_parse_from(std::iter::once("zits".to_string()).chain(args.iter().cloned()))
        .map_err(|e| {
            ZitsError::InvalidParameter(format!("recorded arguments no longer parse: {e}"))
        })?;
    execute(cli.command, &args)
}
