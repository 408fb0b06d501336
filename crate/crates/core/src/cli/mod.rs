//! The `delmix` command line: simulate, fit dispersions, train, evaluate,
//! screen and compare model arms from one configuration file.
//!
//! Exit codes: 0 success, 1 a comparison arm failed, 2 configuration or
//! usage error, 3 I/O or malformed input, 4 numerical failure.

pub mod config;
pub mod pipeline;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::countmodel::{CountModelError, DispersionConfig};
use crate::datapipeline::{read_split, select, write_split, DataError};
use crate::evaluation::{evaluate_test_set, format_ranked, screen, screen_metrics, EvalError};
use crate::library::LibraryError;
use crate::predictors::checkpoint::Checkpoint;
use crate::predictors::PredictorError;
use crate::simulator::{read_external, simulate, write_outputs, SimError};
pub use config::RunConfig;
use pipeline::{Data, Dispersions, DISPERSION};

pub const CHECKPOINT: &str = "checkpoint.txt";
pub const METRICS_LOG: &str = "metrics.log";
pub const SPLIT: &str = "split.tsv";
pub const CONFIG_ECHO: &str = "config.toml";
pub const METRICS: &str = "metrics.tsv";
pub const RANKED_HITS: &str = "ranked_hits.tsv";
pub const COMPARISON: &str = "comparison.tsv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{0} comparison arm(s) failed")]
    ArmsFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ArmsFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Input(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<LibraryError> for CliError {
    fn from(e: LibraryError) -> Self {
        match e {
            LibraryError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::ConfigInvalid { .. } => CliError::Config(e.to_string()),
            SimError::Io { .. } => CliError::Io(e.to_string()),
            SimError::Library(e) => e.into(),
            SimError::Parse { .. } => CliError::Input(e.to_string()),
        }
    }
}

impl From<PredictorError> for CliError {
    fn from(e: PredictorError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CountModelError> for CliError {
    fn from(e: CountModelError) -> Self {
        match e {
            CountModelError::NaNLoss { .. } | CountModelError::NonConvergence { .. } | CountModelError::Diff(_) => {
                CliError::Numeric(e.to_string())
            }
            CountModelError::InvalidConfig(_) | CountModelError::AdjustMissing | CountModelError::InvalidParams { .. } => {
                CliError::Config(e.to_string())
            }
            CountModelError::Library(e) => e.into(),
            CountModelError::Predictor(e) => e.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Library(e) => e.into(),
            DataError::Parse { .. } | DataError::Graph(_) => CliError::Input(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(e) => e.into(),
            EvalError::Predictor(e) => e.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "delmix", version, about = "Yield-aware count models for DNA-encoded library selections")]
pub struct Cli {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "DELMIX_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a selection with known ground truth.
    Simulate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the negative-binomial dispersions of both channels.
    FitDispersion {
        #[arg(long)]
        data: PathBuf,
        /// Output file; defaults to `dispersion.tsv` in the data directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model and write a checkpoint and metrics log.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Score a trained model on its held-out tags and the external set.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Defaults to the model directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank external molecules by predicted target enrichment.
    Screen {
        #[arg(long)]
        model: PathBuf,
        /// Molecule file; defaults to the configured external set.
        #[arg(long)]
        molecules: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and score every arm of the comparison grid.
    Compare {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fit dispersions here instead of reading `dispersion.tsv`.
        #[arg(long)]
        fit_dispersion: bool,
    },
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    /// Fit dispersions before training instead of reading `dispersion.tsv`.
    #[arg(long)]
    pub fit_dispersion: bool,
    /// Keep the covariate weights at their regression values.
    #[arg(long)]
    pub freeze_betas: bool,
    /// full, tri_only or di_only.
    #[arg(long)]
    pub arm: Option<String>,
    /// lab_fixed, lab_plus_learned_adjust or flat(p).
    #[arg(long)]
    pub proportions: Option<String>,
    /// Link for the adjusted proportions: sigmoid or softplus.
    #[arg(long)]
    pub adjust_sigma: Option<String>,
    /// Replace every laboratory proportion with this value.
    #[arg(long)]
    pub flat_proportion: Option<f64>,
    /// embed or mpnn.
    #[arg(long)]
    pub predictor: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

impl ModelFlags {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if self.freeze_betas {
            cfg.train.freeze_betas = true;
        }
        if let Some(a) = &self.arm {
            cfg.model.arm = a.clone();
        }
        if let Some(p) = &self.proportions {
            cfg.model.proportion_mode = p.clone();
        }
        if let Some(s) = &self.adjust_sigma {
            cfg.model.adjust_link = s.clone();
        }
        if self.flat_proportion.is_some() {
            cfg.model.flat_proportion = self.flat_proportion;
        }
        if let Some(p) = &self.predictor {
            cfg.model.predictor = match p.as_str() {
                "embed" => config::PredictorKind::Embed,
                "mpnn" => config::PredictorKind::Mpnn,
                _ => return Err(CliError::Config(format!("`--predictor`: unknown predictor `{p}` (expected embed or mpnn)"))),
            };
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        cfg.validate()
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes through a temporary sibling so readers never see a partial file.
fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    write_file(&tmp, text)?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn echo_config(dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    write_file(&dir.join(CONFIG_ECHO), &cfg.to_toml())
}

fn dispersion_config(cfg: &RunConfig) -> Result<DispersionConfig, CliError> {
    Ok(DispersionConfig { covariates: cfg.model_choice()?.covariates, ..DispersionConfig::default() })
}

fn dispersions(cfg: &RunConfig, data_dir: &Path, data: &Data, fit: bool) -> Result<Dispersions, CliError> {
    if fit {
        return pipeline::fit_dispersions(&data.tags, &dispersion_config(cfg)?);
    }
    let path = data_dir.join(DISPERSION);
    if !path.exists() {
        return Err(CliError::Config(format!(
            "{} not found; run `delmix fit-dispersion` first or pass `--fit-dispersion`",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    pipeline::parse_dispersions(&text, &path.display().to_string())
}

fn read_checkpoint(dir: &Path) -> Result<Checkpoint, CliError> {
    let path = dir.join(CHECKPOINT);
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    Ok(Checkpoint::from_text(&text)?)
}

/// The explicit `--config`, else the one echoed next to a trained model.
fn model_config(explicit: Option<&Path>, model_dir: &Path) -> Result<RunConfig, CliError> {
    let echoed = model_dir.join(CONFIG_ECHO);
    match explicit {
        Some(p) => RunConfig::load(Some(p)),
        None if echoed.exists() => RunConfig::load(Some(&echoed)),
        None => Ok(RunConfig::default()),
    }
}

fn external_path(cfg: &RunConfig, data_dir: &Path) -> PathBuf {
    cfg.eval.external.clone().unwrap_or_else(|| data_dir.join(crate::simulator::EXTERNAL))
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let sim = simulate(&cfg.sim_config())?;
    write_outputs(out, &sim)?;
    echo_config(out, cfg)
}

pub fn cmd_fit_dispersion(cfg: &RunConfig, data_dir: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let data = Data::load(data_dir, Some(&external_path(cfg, data_dir)))?;
    let d = pipeline::fit_dispersions(&data.tags, &dispersion_config(cfg)?)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| data_dir.join(DISPERSION));
    write_file(&path, &pipeline::format_dispersions(&d))
}

pub fn cmd_train(cfg: &RunConfig, data_dir: &Path, out: &Path, fit: bool) -> Result<pipeline::RunOutcome, CliError> {
    let data = Data::load(data_dir, Some(&external_path(cfg, data_dir)))?;
    let disp = dispersions(cfg, data_dir, &data, fit)?;
    create_dir(out)?;
    echo_config(out, cfg)?;
    if fit {
        write_file(&out.join(DISPERSION), &pipeline::format_dispersions(&disp))?;
    }
    let flat = cfg.model_choice()?.flat;
    let mut log = String::from("# epoch\ttrain_loss\ttest_loss\tr2_target\tr2_ntc\n");
    let log_path = out.join(METRICS_LOG);
    write_file(&log_path, &log)?;
    let outcome = pipeline::run(cfg, &data, &disp, |line, pred, params| {
        writeln!(log, "{}", line.format()).unwrap();
        write_file(&log_path, &log)?;
        write_atomic(&out.join(CHECKPOINT), &pipeline::model_checkpoint(pred, params, flat).to_text())
    })?;
    write_split(&out.join(SPLIT), &outcome.split)?;
    Ok(outcome)
}

fn format_metrics(m: &[(&str, f64)]) -> String {
    m.iter().map(|(k, v)| format!("{k}\t{v}\n")).collect()
}

pub fn cmd_evaluate(cfg: &RunConfig, data_dir: &Path, model_dir: &Path, out: &Path) -> Result<(), CliError> {
    let data = Data::load(data_dir, Some(&external_path(cfg, data_dir)))?;
    let (predictor, params, flat) = pipeline::load_model(&read_checkpoint(model_dir)?)?;
    let sp = read_split(&model_dir.join(SPLIT))?;
    let ds = pipeline::dataset(cfg, &data)?;
    let choice = config::ModelChoice { arm: params.arm, mode: params.proportion_mode, flat, covariates: params.covariates };
    let test = pipeline::examples(&data.library, select(&ds, &sp.test), &choice, predictor.needs_graphs())?;
    let tm = evaluate_test_set(&predictor, &params, &test)?;
    let mut rows = vec![("test_loss", tm.loss), ("r2_target", tm.r2_target), ("r2_ntc", tm.r2_ntc), ("n_test_tags", tm.n_tags as f64)];
    let hit_key = format!("hit_rate_at_{}", cfg.eval.k);
    if let Some(mols) = data.external.filter(|m| !m.is_empty()) {
        let sm = screen_metrics(&screen(&mols, &predictor)?, cfg.eval.k)?;
        rows.push(("auc", sm.auc));
        rows.push((&hit_key, sm.hit_rate));
    }
    create_dir(out)?;
    echo_config(out, cfg)?;
    write_file(&out.join(METRICS), &format_metrics(&rows))
}

pub fn cmd_screen(cfg: &RunConfig, model_dir: &Path, molecules: &Path, out: &Path) -> Result<(), CliError> {
    let (predictor, _, _) = pipeline::load_model(&read_checkpoint(model_dir)?)?;
    let mols = read_external(molecules)?;
    let hits = screen(&mols, &predictor)?;
    create_dir(out)?;
    echo_config(out, cfg)?;
    write_file(&out.join(RANKED_HITS), &format_ranked(&hits))
}

pub const COMPARISON_HEADER: &str = "arm\tstatus\tloss\tr2_target\tr2_ntc\tauc\thit_at_k";

pub fn cmd_compare(cfg: &RunConfig, data_dir: &Path, out: &Path, fit: bool) -> Result<(), CliError> {
    let data = Data::load(data_dir, Some(&external_path(cfg, data_dir)))?;
    let disp = dispersions(cfg, data_dir, &data, fit)?;
    create_dir(out)?;
    echo_config(out, cfg)?;
    let mut table = format!("{COMPARISON_HEADER}\n");
    let mut failed = 0;
    for v in pipeline::comparison_grid() {
        let c = v.apply(cfg);
        match pipeline::run(&c, &data, &disp, |_, _, _| Ok(())) {
            Ok(o) => {
                let (auc, hit) = o.screen.map_or((f64::NAN, f64::NAN), |s| (s.auc, s.hit_rate));
                writeln!(table, "{}\tok\t{}\t{}\t{}\t{auc}\t{hit}", v.name, o.test.loss, o.test.r2_target, o.test.r2_ntc).unwrap();
            }
            Err(e) => {
                failed += 1;
                eprintln!("arm {} failed: {e}", v.name);
                writeln!(table, "{}\tfailed\tNaN\tNaN\tNaN\tNaN\tNaN", v.name).unwrap();
            }
        }
    }
    write_file(&out.join(COMPARISON), &table)?;
    if failed > 0 {
        return Err(CliError::ArmsFailed(failed));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("`--threads` must be positive".into()));
        }
        // A pool may already exist when called repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Simulate { out } => cmd_simulate(&RunConfig::load(cfg_path)?, &out),
        Command::FitDispersion { data, out } => cmd_fit_dispersion(&RunConfig::load(cfg_path)?, &data, out.as_deref()),
        Command::Train { data, out, model } => {
            let mut cfg = RunConfig::load(cfg_path)?;
            model.apply(&mut cfg)?;
            cmd_train(&cfg, &data, &out, model.fit_dispersion).map(|_| ())
        }
        Command::Evaluate { data, model, out } => {
            let cfg = model_config(cfg_path, &model)?;
            cmd_evaluate(&cfg, &data, &model, out.as_deref().unwrap_or(&model))
        }
        Command::Screen { model, molecules, out } => {
            let cfg = model_config(cfg_path, &model)?;
            let mols = molecules.or_else(|| cfg.eval.external.clone()).ok_or_else(|| {
                CliError::Config("no molecule file: pass `--molecules` or set `eval.external`".into())
            })?;
            cmd_screen(&cfg, &model, &mols, &out)
        }
        Command::Compare { data, out, fit_dispersion } => cmd_compare(&RunConfig::load(cfg_path)?, &data, &out, fit_dispersion),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
