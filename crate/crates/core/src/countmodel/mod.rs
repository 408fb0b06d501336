//! Mixture-of-enrichments count model with negative-binomial likelihoods.
//!
//! A tag's observed counts arise from every product sharing its barcode:
//!
//! ```text
//! b_target = Σ_k p_k R_target,k            b_ntc = Σ_k p_k R_ntc,k
//! μ_target = softplus(b_target + β_ntc b_ntc + β_dls x_dls + β_prom x_prom + β_c)
//! μ_ntc    = softplus(b_ntc + β'_dls x_dls + β'_prom x_prom + β'_c)
//! loss     = NLL(c_target | μ_target, α_target) + NLL(c_ntc | μ_ntc, α_ntc)
//!            + γ Σ_k (R_target,k² + R_ntc,k²)
//! ```

mod dispersion;
pub mod nb;
mod train;

use std::fmt;
use std::str::FromStr;

use crate::diffengine::{sigmoid, softplus, DiffError, Matrix, NodeId, Tape};
use crate::library::{CountRecord, LibraryError, ProductKind, ProductMixture};
use crate::predictors::{Predictor, PredictorError, PredictorOutput, ProductInput};

pub use dispersion::{fit_dispersion, Channel, DispersionConfig, DispersionFit};
pub use nb::{nb_ln_pmf, nb_nll, nb_nll_dalpha, nb_nll_dmu};
pub use train::{train, EpochReport, TrainConfig, TrainedModel};

#[derive(Debug, thiserror::Error)]
pub enum CountModelError {
    #[error("invalid negative-binomial parameters: c={c}, mu={mu}, alpha={alpha}")]
    InvalidParams { c: f64, mu: f64, alpha: f64 },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("proportion mode needs an adjust head but the predictor has none")]
    AdjustMissing,
    #[error("arm `{arm}` needs a `{missing}` product that the mixture lacks")]
    ArmMismatch { arm: Arm, missing: ProductKind },
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NaNLoss { epoch: usize, batch: usize, detail: String },
    #[error("dispersion fit did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },
    #[error("dispersion fit needs at least {needed} tags, got {found}")]
    TooFewTags { needed: usize, found: usize },
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// Which products contribute to a tag's enrichment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arm {
    Full,
    TriOnly,
    DiOnly,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Full, Arm::TriOnly, Arm::DiOnly];

    pub fn kinds(self) -> &'static [ProductKind] {
        const FULL: [ProductKind; 4] = [ProductKind::Tri, ProductKind::Di12, ProductKind::Di13, ProductKind::Di23];
        match self {
            Arm::Full => &FULL,
            Arm::TriOnly => &FULL[..1],
            Arm::DiOnly => &FULL[1..],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arm::Full => "full",
            Arm::TriOnly => "tri_only",
            Arm::DiOnly => "di_only",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Arm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown arm `{s}` (expected full, tri_only or di_only)"))
    }
}

/// Squashing function applied to `p_adjust + p_lab`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjustLink {
    Sigmoid,
    Softplus,
}

impl AdjustLink {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            AdjustLink::Sigmoid => sigmoid(x),
            AdjustLink::Softplus => softplus(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AdjustLink::Sigmoid => "sigmoid",
            AdjustLink::Softplus => "softplus",
        }
    }
}

impl FromStr for AdjustLink {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sigmoid" => Ok(AdjustLink::Sigmoid),
            "softplus" => Ok(AdjustLink::Softplus),
            _ => Err(format!("unknown adjust link `{s}` (expected sigmoid or softplus)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProportionMode {
    LabFixed,
    LabPlusLearnedAdjust(AdjustLink),
    /// Every product gets the same proportion, ignoring yields.
    Flat(f64),
}

impl ProportionMode {
    pub fn needs_adjust(self) -> bool {
        matches!(self, ProportionMode::LabPlusLearnedAdjust(_))
    }
}

impl fmt::Display for ProportionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProportionMode::LabFixed => f.write_str("lab_fixed"),
            ProportionMode::LabPlusLearnedAdjust(_) => f.write_str("lab_plus_learned_adjust"),
            ProportionMode::Flat(p) => write!(f, "flat({p})"),
        }
    }
}

impl FromStr for ProportionMode {
    type Err = String;

    /// Parses `lab_fixed`, `lab_plus_learned_adjust` or `flat(p)`; the
    /// adjusted mode defaults to the sigmoid link.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lab_fixed" => Ok(ProportionMode::LabFixed),
            "lab_plus_learned_adjust" => Ok(ProportionMode::LabPlusLearnedAdjust(AdjustLink::Sigmoid)),
            _ => {
                let inner = s
                    .strip_prefix("flat(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| format!("unknown proportion mode `{s}`"))?;
                let p: f64 = inner.trim().parse().map_err(|_| format!("bad flat proportion `{inner}`"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("flat proportion {p} is outside [0, 1]"));
                }
                Ok(ProportionMode::Flat(p))
            }
        }
    }
}

/// How raw nuisance counts enter the mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Covariates {
    Identity,
    Log1p,
}

impl Covariates {
    /// `[x_dls, x_prom]`
    pub fn transform(self, counts: &CountRecord) -> [f64; 2] {
        let (d, p) = (counts.c_dls as f64, counts.c_promiscuity);
        match self {
            Covariates::Identity => [d, p],
            Covariates::Log1p => [d.ln_1p(), p.ln_1p()],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Covariates::Identity => "identity",
            Covariates::Log1p => "log1p",
        }
    }
}

impl FromStr for Covariates {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Covariates::Identity),
            "log1p" => Ok(Covariates::Log1p),
            _ => Err(format!("unknown covariate transform `{s}` (expected identity or log1p)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountModelParams {
    /// `[β_ntc, β_dls, β_prom, β_c]`
    pub beta_target: [f64; 4],
    /// `[β'_dls, β'_prom, β'_c]`
    pub beta_ntc: [f64; 3],
    pub alpha_target: f64,
    pub alpha_ntc: f64,
    pub gamma: f64,
    pub proportion_mode: ProportionMode,
    pub arm: Arm,
    pub covariates: Covariates,
}

impl Default for CountModelParams {
    fn default() -> Self {
        Self {
            beta_target: [0.0; 4],
            beta_ntc: [0.0; 3],
            alpha_target: 1.0,
            alpha_ntc: 1.0,
            gamma: 0.0,
            proportion_mode: ProportionMode::LabFixed,
            arm: Arm::Full,
            covariates: Covariates::Log1p,
        }
    }
}

impl CountModelParams {
    pub fn validate(&self) -> Result<(), CountModelError> {
        let bad = |m: String| Err(CountModelError::InvalidConfig(m));
        if !(self.alpha_target > 0.0 && self.alpha_target.is_finite() && self.alpha_ntc > 0.0 && self.alpha_ntc.is_finite()) {
            return bad(format!("dispersions must be positive (got {}, {})", self.alpha_target, self.alpha_ntc));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative (got {})", self.gamma));
        }
        if let ProportionMode::Flat(p) = self.proportion_mode {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("flat proportion {p} is outside [0, 1]"));
            }
        }
        if self.beta_target.iter().chain(&self.beta_ntc).any(|b| !b.is_finite()) {
            return bad("non-finite regression weight".into());
        }
        Ok(())
    }
}

/// Per-tag quantities of the mixture model.
#[derive(Clone, Debug, PartialEq)]
pub struct TagPrediction {
    pub b_target: f64,
    pub b_ntc: f64,
    pub mu_target: f64,
    pub mu_ntc: f64,
    /// Effective proportion of each product used, in mixture order.
    pub proportions: Vec<f64>,
}

pub fn effective_proportion(p_lab: f64, p_adjust: Option<f64>, mode: ProportionMode) -> Result<f64, CountModelError> {
    match mode {
        ProportionMode::LabFixed => Ok(p_lab),
        ProportionMode::Flat(p) => Ok(p),
        ProportionMode::LabPlusLearnedAdjust(link) => {
            let adj = p_adjust.ok_or(CountModelError::AdjustMissing)?;
            Ok(link.apply(adj + p_lab))
        }
    }
}

/// Positions within `kinds` of the products the arm uses, in arm order.
fn arm_positions(kinds: &[ProductKind], arm: Arm) -> Result<Vec<usize>, CountModelError> {
    arm.kinds()
        .iter()
        .map(|&k| kinds.iter().position(|&x| x == k).ok_or(CountModelError::ArmMismatch { arm, missing: k }))
        .collect()
}

/// Proportion-weighted enrichment sums `(b_target, b_ntc)` and the
/// proportions used. Products outside the arm are ignored.
pub fn compose_b(
    products: &ProductMixture,
    outputs: &[PredictorOutput],
    arm: Arm,
    mode: ProportionMode,
) -> Result<(f64, f64, Vec<f64>), CountModelError> {
    assert_eq!(products.products.len(), outputs.len(), "outputs must align with products");
    let kinds: Vec<ProductKind> = products.products.iter().map(|p| p.kind).collect();
    let p_lab: Vec<f64> = products.products.iter().map(|p| p.p_lab).collect();
    compose_parts(&kinds, &p_lab, outputs, arm, mode)
}

fn compose_parts(
    kinds: &[ProductKind],
    p_lab: &[f64],
    outputs: &[PredictorOutput],
    arm: Arm,
    mode: ProportionMode,
) -> Result<(f64, f64, Vec<f64>), CountModelError> {
    let mut bt = 0.0;
    let mut bn = 0.0;
    let mut props = Vec::new();
    for i in arm_positions(kinds, arm)? {
        let p = effective_proportion(p_lab[i], outputs[i].p_adjust, mode)?;
        bt += p * outputs[i].r_target;
        bn += p * outputs[i].r_ntc;
        props.push(p);
    }
    Ok((bt, bn, props))
}

pub fn mu_target(b_target: f64, b_ntc: f64, counts: &CountRecord, params: &CountModelParams) -> f64 {
    let [x_dls, x_prom] = params.covariates.transform(counts);
    let [b_n, b_d, b_p, b_c] = params.beta_target;
    softplus(b_target + b_n * b_ntc + b_d * x_dls + b_p * x_prom + b_c)
}

pub fn mu_ntc(b_ntc: f64, counts: &CountRecord, params: &CountModelParams) -> f64 {
    let [x_dls, x_prom] = params.covariates.transform(counts);
    let [b_d, b_p, b_c] = params.beta_ntc;
    softplus(b_ntc + b_d * x_dls + b_p * x_prom + b_c)
}

pub fn predict_tag(
    products: &ProductMixture,
    outputs: &[PredictorOutput],
    counts: &CountRecord,
    params: &CountModelParams,
) -> Result<TagPrediction, CountModelError> {
    let (b_target, b_ntc, proportions) = compose_b(products, outputs, params.arm, params.proportion_mode)?;
    Ok(TagPrediction {
        b_target,
        b_ntc,
        mu_target: mu_target(b_target, b_ntc, counts, params),
        mu_ntc: mu_ntc(b_ntc, counts, params),
        proportions,
    })
}

/// Pure likelihood part of the loss: both channels' NLL.
pub fn tag_nll(counts: &CountRecord, pred: &TagPrediction, params: &CountModelParams) -> Result<f64, CountModelError> {
    Ok(nb_nll(counts.c_target as f64, pred.mu_target, params.alpha_target)?
        + nb_nll(counts.c_ntc as f64, pred.mu_ntc, params.alpha_ntc)?)
}

/// Full per-tag loss including the enrichment penalty over the arm's products.
pub fn tag_loss(
    products: &ProductMixture,
    outputs: &[PredictorOutput],
    counts: &CountRecord,
    params: &CountModelParams,
) -> Result<f64, CountModelError> {
    let pred = predict_tag(products, outputs, counts, params)?;
    let kinds: Vec<ProductKind> = products.products.iter().map(|p| p.kind).collect();
    let reg: f64 = arm_positions(&kinds, params.arm)?
        .into_iter()
        .map(|i| outputs[i].r_target.powi(2) + outputs[i].r_ntc.powi(2))
        .sum();
    Ok(tag_nll(counts, &pred, params)? + params.gamma * reg)
}

/// A tag ready for the model: counts plus the products its arm needs.
#[derive(Clone, Debug)]
pub struct TagExample {
    pub tag_id: String,
    pub counts: CountRecord,
    pub products: Vec<ProductInput>,
    pub p_lab: Vec<f64>,
}

impl TagExample {
    pub fn kinds(&self) -> Vec<ProductKind> {
        self.products.iter().map(|p| p.kind).collect()
    }
}

/// Tape nodes of one recorded minibatch.
#[derive(Clone, Copy, Debug)]
pub struct BatchNodes {
    /// Mean loss including the penalty.
    pub loss: NodeId,
    /// Mean NLL without the penalty.
    pub nll: NodeId,
    pub mu_target: NodeId,
    pub mu_ntc: NodeId,
}

/// Leaves for the regression weights: `beta_target` (4×1), `beta_ntc` (3×1).
#[derive(Clone, Copy, Debug)]
pub struct BetaLeaves {
    pub target: NodeId,
    pub ntc: NodeId,
}

impl BetaLeaves {
    pub fn record(tape: &mut Tape, params: &CountModelParams) -> Self {
        Self {
            target: tape.leaf(Matrix::column(params.beta_target.to_vec())),
            ntc: tape.leaf(Matrix::column(params.beta_ntc.to_vec())),
        }
    }
}

/// Records the mean batch loss on `tape`.
pub fn record_batch(
    tape: &mut Tape,
    predictor: &Predictor,
    pred_leaves: &[NodeId],
    betas: BetaLeaves,
    batch: &[&TagExample],
    params: &CountModelParams,
) -> Result<BatchNodes, CountModelError> {
    let n = batch.len();
    assert!(n > 0, "empty batch");
    let mut inputs = Vec::new();
    let mut owner = Vec::new();
    let mut p_lab = Vec::new();
    for (t, ex) in batch.iter().enumerate() {
        for i in arm_positions(&ex.kinds(), params.arm)? {
            inputs.push(&ex.products[i]);
            owner.push(t);
            p_lab.push(ex.p_lab[i]);
        }
    }
    let out = predictor.forward(tape, pred_leaves, &inputs)?;
    let r = tape.slice_cols(out, 0, 2);
    let p = match params.proportion_mode {
        ProportionMode::LabFixed => tape.leaf(Matrix::column(p_lab)),
        ProportionMode::Flat(v) => tape.leaf(Matrix::filled(inputs.len(), 1, v)),
        ProportionMode::LabPlusLearnedAdjust(link) => {
            if tape.value(out).cols() < 3 {
                return Err(CountModelError::AdjustMissing);
            }
            let adj = tape.slice_cols(out, 2, 1);
            let lab = tape.leaf(Matrix::column(p_lab));
            let s = tape.add(adj, lab);
            match link {
                AdjustLink::Sigmoid => tape.sigmoid(s),
                AdjustLink::Softplus => tape.softplus(s),
            }
        }
    };
    let weighted = tape.mul_col(r, p);
    let b = tape.segment_sum(weighted, owner, n);
    let b_t = tape.slice_cols(b, 0, 1);
    let b_n = tape.slice_cols(b, 1, 1);

    let mut x = Matrix::zeros(n, 3);
    for (t, ex) in batch.iter().enumerate() {
        let [d, pr] = params.covariates.transform(&ex.counts);
        x.row_mut(t).copy_from_slice(&[d, pr, 1.0]);
    }
    let x = tape.leaf(x);
    let xt = tape.concat_cols(&[b_n, x]);
    let lin_t = tape.matmul(xt, betas.target);
    let pre_t = tape.add(b_t, lin_t);
    let lin_n = tape.matmul(x, betas.ntc);
    let pre_n = tape.add(b_n, lin_n);
    let mu_t = tape.softplus(pre_t);
    let mu_n = tape.softplus(pre_n);

    let c_t = batch.iter().map(|e| e.counts.c_target as f64).collect();
    let c_n = batch.iter().map(|e| e.counts.c_ntc as f64).collect();
    let nll_t = tape.nb_nll(mu_t, c_t, params.alpha_target);
    let nll_n = tape.nb_nll(mu_n, c_n, params.alpha_ntc);
    let st = tape.sum_all(nll_t);
    let sn = tape.sum_all(nll_n);
    let total = tape.add(st, sn);
    let nll = tape.affine(total, 1.0 / n as f64, 0.0);
    let sq = tape.square(r);
    let reg = tape.sum_all(sq);
    let reg = tape.affine(reg, params.gamma / n as f64, 0.0);
    let loss = tape.add(nll, reg);
    Ok(BatchNodes { loss, nll, mu_target: mu_t, mu_ntc: mu_n })
}

/// Predictions for many tags without recording gradients.
pub fn predict_examples(
    predictor: &Predictor,
    examples: &[TagExample],
    params: &CountModelParams,
) -> Result<Vec<TagPrediction>, CountModelError> {
    const CHUNK: usize = 256;
    let mut preds = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(CHUNK) {
        let mut inputs = Vec::new();
        let mut spans = Vec::with_capacity(chunk.len());
        for ex in chunk {
            let pos = arm_positions(&ex.kinds(), params.arm)?;
            spans.push(pos.clone());
            inputs.extend(pos.iter().map(|&i| &ex.products[i]));
        }
        let outs = predictor.predict(&inputs)?;
        let mut off = 0;
        for (ex, pos) in chunk.iter().zip(spans) {
            let kinds: Vec<ProductKind> = pos.iter().map(|&i| ex.products[i].kind).collect();
            let labs: Vec<f64> = pos.iter().map(|&i| ex.p_lab[i]).collect();
            let o = &outs[off..off + pos.len()];
            off += pos.len();
            let (b_target, b_ntc, proportions) = compose_parts(&kinds, &labs, o, params.arm, params.proportion_mode)?;
            preds.push(TagPrediction {
                b_target,
                b_ntc,
                mu_target: mu_target(b_target, b_ntc, &ex.counts, params),
                mu_ntc: mu_ntc(b_ntc, &ex.counts, params),
                proportions,
            });
        }
    }
    Ok(preds)
}
