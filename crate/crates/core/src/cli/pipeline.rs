//! The train/evaluate pipeline shared by the commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ModelChoice, PredictorKind, RunConfig};
use super::CliError;
use crate::countmodel::{
    fit_dispersion, train, Channel, CountModelParams, DispersionConfig, DispersionFit, ProportionMode, TagExample, TrainConfig,
    TrainedModel,
};
use crate::datapipeline::{augment_negatives, build_examples, paper_ratio, select, split, Dataset, DatasetSplit};
use crate::diffengine::{AdamConfig, Matrix};
use crate::evaluation::{evaluate_test_set, screen, screen_metrics, ExternalMolecule, ScreenMetrics, TestMetrics};
use crate::library::{read_fragments, read_tags, CountRecord, Library, LibraryTag};
use crate::predictors::checkpoint::Checkpoint;
use crate::predictors::{EmbedConfig, EmbedPredictor, MpnnConfig, MpnnPredictor, Predictor, PredictorError};
use crate::simulator::{derive_seed, read_external, EXTERNAL, FRAGMENTS, TAGS};

pub const DISPERSION: &str = "dispersion.tsv";

/// A simulated (or real) selection as read from a data directory.
#[derive(Clone, Debug)]
pub struct Data {
    pub library: Library,
    pub tags: Vec<LibraryTag>,
    pub external: Option<Vec<ExternalMolecule>>,
}

impl Data {
    pub fn load(dir: &Path, external: Option<&Path>) -> Result<Self, CliError> {
        let library = read_fragments(&dir.join(FRAGMENTS))?;
        let tags = read_tags(&dir.join(TAGS))?;
        let ext_path: PathBuf = external.map(Path::to_path_buf).unwrap_or_else(|| dir.join(EXTERNAL));
        let external = if ext_path.exists() { Some(read_external(&ext_path)?) } else { None };
        Ok(Self { library, tags, external })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dispersions {
    pub target: DispersionFit,
    pub ntc: DispersionFit,
}

pub fn fit_dispersions(tags: &[LibraryTag], cfg: &DispersionConfig) -> Result<Dispersions, CliError> {
    let counts: Vec<CountRecord> = tags.iter().map(|t| t.counts.clone()).collect();
    Ok(Dispersions { target: fit_dispersion(&counts, Channel::Target, cfg)?, ntc: fit_dispersion(&counts, Channel::Ntc, cfg)? })
}

pub fn format_dispersions(d: &Dispersions) -> String {
    let mut out = String::from("# channel\talpha\tbeta_dls\tbeta_prom\tbeta_c\tnll\titerations\n");
    for (ch, f) in [(Channel::Target, &d.target), (Channel::Ntc, &d.ntc)] {
        writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}", ch.name(), f.alpha, f.beta[0], f.beta[1], f.beta[2], f.nll, f.iterations).unwrap();
    }
    out
}

pub fn parse_dispersions(text: &str, source: &str) -> Result<Dispersions, CliError> {
    let bad = |line: usize, msg: &str| CliError::Input(format!("{source}:{line}: {msg}"));
    let (mut target, mut ntc) = (None, None);
    for (i, l) in text.lines().enumerate() {
        if l.starts_with('#') || l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 7 {
            return Err(bad(i + 1, "expected 7 tab-separated fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
        let fit = DispersionFit {
            alpha: num(f[1])?,
            beta: [num(f[2])?, num(f[3])?, num(f[4])?],
            nll: num(f[5])?,
            iterations: f[6].parse().map_err(|_| bad(i + 1, "bad iteration count"))?,
        };
        if !(fit.alpha > 0.0 && fit.alpha.is_finite()) {
            return Err(bad(i + 1, "alpha must be positive"));
        }
        match f[0] {
            "target" => target = Some(fit),
            "ntc" => ntc = Some(fit),
            _ => return Err(bad(i + 1, "channel must be `target` or `ntc`")),
        }
    }
    match (target, ntc) {
        (Some(target), Some(ntc)) => Ok(Dispersions { target, ntc }),
        _ => Err(bad(0, "needs one `target` and one `ntc` row")),
    }
}

/// Initial count-model parameters: dispersions and covariate weights from
/// the regression fits, `β_ntc` at zero.
pub fn initial_params(cfg: &RunConfig, choice: &ModelChoice, d: &Dispersions) -> CountModelParams {
    let t = &d.target.beta;
    CountModelParams {
        beta_target: [0.0, t[0], t[1], t[2]],
        beta_ntc: d.ntc.beta,
        alpha_target: d.target.alpha,
        alpha_ntc: d.ntc.alpha,
        gamma: cfg.model.gamma,
        proportion_mode: choice.mode,
        arm: choice.arm,
        covariates: choice.covariates,
    }
}

pub fn new_predictor(cfg: &RunConfig, choice: &ModelChoice, library: &Library) -> Predictor {
    let m = &cfg.model;
    let seed = derive_seed(cfg.seed, "init");
    let adjust_head = choice.mode.needs_adjust();
    match m.predictor {
        PredictorKind::Embed => {
            let vocab = library.blocks().iter().map(|b| b.id.clone()).collect();
            Predictor::Embed(EmbedPredictor::new(EmbedConfig { dim: m.embed_dim, head_hidden: m.head_hidden, adjust_head, seed }, vocab))
        }
        PredictorKind::Mpnn => Predictor::Mpnn(MpnnPredictor::new(MpnnConfig {
            hidden_dim: m.hidden_dim,
            message_steps: m.message_steps,
            readout_dim: m.readout_dim,
            head_hidden: m.head_hidden,
            adjust_head,
            seed,
        })),
    }
}

/// Examples for `tags` under the configured arm, with laboratory
/// proportions replaced when a flat value is set.
pub fn examples<'a>(
    library: &Library,
    tags: impl IntoIterator<Item = &'a LibraryTag>,
    choice: &ModelChoice,
    with_graphs: bool,
) -> Result<Vec<TagExample>, CliError> {
    let mut ex = build_examples(library, tags, choice.arm, with_graphs)?;
    let flat = match (choice.flat, choice.mode) {
        (Some(p), _) | (None, ProportionMode::Flat(p)) => Some(p),
        _ => None,
    };
    if let Some(p) = flat {
        for e in &mut ex {
            e.p_lab.iter_mut().for_each(|x| *x = p);
        }
    }
    Ok(ex)
}

pub fn dataset(cfg: &RunConfig, data: &Data) -> Result<Dataset, CliError> {
    let observed = Dataset::observed(data.tags.clone());
    if !cfg.train.augment_negatives {
        return Ok(observed);
    }
    let (n_ntc, n_unseq) = paper_ratio(observed.len());
    Ok(augment_negatives(&observed, &data.library, n_ntc, n_unseq, derive_seed(cfg.seed, "negatives"))?)
}

/// Everything a training run produces.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub model: TrainedModel,
    pub split: DatasetSplit,
    pub test: TestMetrics,
    pub screen: Option<ScreenMetrics>,
}

/// One line of the per-epoch metrics log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLine {
    pub epoch: usize,
    pub train_loss: f64,
    pub test: TestMetrics,
}

impl EpochLine {
    pub fn format(&self) -> String {
        format!("{}\t{}\t{}\t{}\t{}", self.epoch, self.train_loss, self.test.loss, self.test.r2_target, self.test.r2_ntc)
    }
}

/// Splits, trains and evaluates one model. `on_epoch` sees every epoch's
/// metrics and the model state after it.
pub fn run<F>(cfg: &RunConfig, data: &Data, disp: &Dispersions, mut on_epoch: F) -> Result<RunOutcome, CliError>
where
    F: FnMut(&EpochLine, &Predictor, &CountModelParams) -> Result<(), CliError>,
{
    let choice = cfg.model_choice()?;
    let ds = dataset(cfg, data)?;
    let sp = split(&ds, cfg.train.holdout_fraction, derive_seed(cfg.seed, "split"))?;
    let predictor = new_predictor(cfg, &choice, &data.library);
    let graphs = predictor.needs_graphs();
    let train_ex = examples(&data.library, select(&ds, &sp.train), &choice, graphs)?;
    let test_ex = examples(&data.library, select(&ds, &sp.test), &choice, graphs)?;
    let params = initial_params(cfg, &choice, disp);
    let tc = TrainConfig {
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        adam: AdamConfig { lr: cfg.train.lr, ..AdamConfig::default() },
        seed: derive_seed(cfg.seed, "train"),
        freeze_betas: cfg.train.freeze_betas,
    };
    let mut callback_err = None;
    let model = train(&train_ex, predictor, params, &tc, |r, pred, params| {
        if callback_err.is_some() {
            return;
        }
        let res = evaluate_test_set(pred, params, &test_ex)
            .map_err(CliError::from)
            .and_then(|test| on_epoch(&EpochLine { epoch: r.epoch, train_loss: r.train_loss, test }, pred, params));
        if let Err(e) = res {
            callback_err = Some(e);
        }
    })?;
    if let Some(e) = callback_err {
        return Err(e);
    }
    let test = evaluate_test_set(&model.predictor, &model.params, &test_ex)?;
    let screen = match &data.external {
        Some(mols) if !mols.is_empty() => Some(screen_metrics(&screen(mols, &model.predictor)?, cfg.eval.k)?),
        _ => None,
    };
    Ok(RunOutcome { model, split: sp, test, screen })
}

pub fn model_checkpoint(predictor: &Predictor, params: &CountModelParams, flat: Option<f64>) -> Checkpoint {
    let mut ck = Checkpoint::default();
    predictor.to_checkpoint(&mut ck);
    ck.set("model.alpha_target", params.alpha_target);
    ck.set("model.alpha_ntc", params.alpha_ntc);
    ck.set("model.gamma", params.gamma);
    ck.set("model.arm", params.arm);
    ck.set("model.proportion_mode", params.proportion_mode);
    if let crate::countmodel::ProportionMode::LabPlusLearnedAdjust(link) = params.proportion_mode {
        ck.set("model.adjust_link", link.name());
    }
    ck.set("model.covariates", params.covariates.name());
    if let Some(p) = flat {
        ck.set("model.flat_proportion", p);
    }
    ck.params.push("model.beta_target", Matrix::column(params.beta_target.to_vec()));
    ck.params.push("model.beta_ntc", Matrix::column(params.beta_ntc.to_vec()));
    ck
}

pub fn load_model(ck: &Checkpoint) -> Result<(Predictor, CountModelParams, Option<f64>), CliError> {
    let predictor = Predictor::from_checkpoint(ck)?;
    let bad = |m: String| CliError::Input(format!("checkpoint: {m}"));
    let mut mode: ProportionMode = ck.require("model.proportion_mode")?.parse().map_err(bad)?;
    if let (ProportionMode::LabPlusLearnedAdjust(_), Some(l)) = (mode, ck.meta("model.adjust_link")) {
        mode = ProportionMode::LabPlusLearnedAdjust(l.parse().map_err(bad)?);
    }
    let beta = |name: &str| -> Result<Vec<f64>, CliError> {
        let m = ck.params.by_name(name).ok_or_else(|| PredictorError::Checkpoint(format!("missing parameter `{name}`")))?;
        Ok(m.as_slice().to_vec())
    };
    let (bt, bn) = (beta("model.beta_target")?, beta("model.beta_ntc")?);
    if bt.len() != 4 || bn.len() != 3 {
        return Err(bad("regression weights have the wrong length".into()));
    }
    let params = CountModelParams {
        beta_target: [bt[0], bt[1], bt[2], bt[3]],
        beta_ntc: [bn[0], bn[1], bn[2]],
        alpha_target: ck.parse_meta("model.alpha_target")?,
        alpha_ntc: ck.parse_meta("model.alpha_ntc")?,
        gamma: ck.parse_meta("model.gamma")?,
        proportion_mode: mode,
        arm: ck.require("model.arm")?.parse().map_err(bad)?,
        covariates: ck.require("model.covariates")?.parse().map_err(bad)?,
    };
    let flat = match ck.meta("model.flat_proportion") {
        Some(_) => Some(ck.parse_meta("model.flat_proportion")?),
        None => None,
    };
    Ok((predictor, params, flat))
}

/// One row of the comparison grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmVariant {
    pub name: String,
    pub arm: &'static str,
    pub adjust: bool,
    pub flat: Option<f64>,
}

pub const FLAT_PROPORTION: f64 = 0.147;

/// `{full, tri_only, di_only, flat(0.147)} × {fixed, learned-adjust}`.
pub fn comparison_grid() -> Vec<ArmVariant> {
    let mut out = Vec::new();
    for (arm, flat) in [("full", None), ("tri_only", None), ("di_only", None), ("full", Some(FLAT_PROPORTION))] {
        for adjust in [false, true] {
            let base = match flat {
                Some(p) => format!("flat({p})"),
                None => arm.to_string(),
            };
            let name = format!("{base}/{}", if adjust { "learned_adjust" } else { "fixed" });
            out.push(ArmVariant { name, arm, adjust, flat });
        }
    }
    out
}

impl ArmVariant {
    pub fn apply(&self, cfg: &RunConfig) -> RunConfig {
        let mut c = cfg.clone();
        c.model.arm = self.arm.into();
        c.model.flat_proportion = self.flat;
        c.model.proportion_mode = if self.adjust { "lab_plus_learned_adjust".into() } else { "lab_fixed".into() };
        c
    }
}
