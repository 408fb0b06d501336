//! Held-out metrics and screening.

use std::fmt::Write as _;

use crate::countmodel::{predict_examples, tag_nll, CountModelError, CountModelParams, TagExample};
use crate::library::ProductKind;
use crate::molgraph::MolGraph;
use crate::predictors::{Predictor, PredictorError, ProductInput};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("observed values have zero variance")]
    DegenerateVariance,
    #[error("need at least two values, got {0}")]
    TooFew(usize),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("k = {k} exceeds the {n} scored molecules")]
    KTooLarge { k: usize, n: usize },
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("molecule `{0}` still carries attachment atoms")]
    UnassembledGraph(String),
    #[error(transparent)]
    Model(#[from] CountModelError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

/// A molecule outside the library with a laboratory binder label.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalMolecule {
    pub id: String,
    pub graph: MolGraph,
    /// Building blocks in cycle order, when the molecule is built from known ones.
    pub bb_ids: Option<Vec<String>>,
    pub is_binder: bool,
}

/// `1 − SS_res / SS_tot`.
pub fn r_squared(observed: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    assert_eq!(observed.len(), predicted.len(), "length mismatch");
    if observed.len() < 2 {
        return Err(EvalError::TooFew(observed.len()));
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::DegenerateVariance);
    }
    let ss_res: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mann–Whitney AUC from average ranks; tied scores count one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), labels.len(), "length mismatch");
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * avg;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Indices sorted by descending score; ties keep input order.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

pub fn hit_rate_at_k(scores: &[f64], labels: &[bool], k: usize) -> Result<f64, EvalError> {
    assert_eq!(scores.len(), labels.len(), "length mismatch");
    if k > scores.len() || k == 0 {
        return Err(EvalError::KTooLarge { k, n: scores.len() });
    }
    let hits = rank_descending(scores).into_iter().take(k).filter(|&i| labels[i]).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedHit {
    pub rank: usize,
    pub id: String,
    pub score: f64,
    pub is_binder: bool,
}

/// Scores each molecule as a trisynthon with the target head and ranks
/// them by descending score.
pub fn screen(molecules: &[ExternalMolecule], predictor: &Predictor) -> Result<Vec<RankedHit>, EvalError> {
    let mut inputs = Vec::with_capacity(molecules.len());
    for m in molecules {
        if m.graph.has_attachment_atoms() {
            return Err(EvalError::UnassembledGraph(m.id.clone()));
        }
        let graph = if predictor.needs_graphs() { Some(&m.graph) } else { None };
        let bb_ids = m.bb_ids.clone().unwrap_or_default();
        inputs.push(ProductInput::new(ProductKind::Tri, bb_ids, graph).map_err(PredictorError::from)?);
    }
    let refs: Vec<&ProductInput> = inputs.iter().collect();
    let scores: Vec<f64> = predictor.predict(&refs)?.into_iter().map(|o| o.r_target).collect();
    Ok(rank_descending(&scores)
        .into_iter()
        .enumerate()
        .map(|(r, i)| RankedHit { rank: r + 1, id: molecules[i].id.clone(), score: scores[i], is_binder: molecules[i].is_binder })
        .collect())
}

pub fn format_ranked(hits: &[RankedHit]) -> String {
    let mut out = String::new();
    for h in hits {
        writeln!(out, "{}\t{}\t{}", h.rank, h.id, h.score).unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreenMetrics {
    pub auc: f64,
    pub hit_rate: f64,
}

pub fn screen_metrics(hits: &[RankedHit], k: usize) -> Result<ScreenMetrics, EvalError> {
    let scores: Vec<f64> = hits.iter().map(|h| h.score).collect();
    let labels: Vec<bool> = hits.iter().map(|h| h.is_binder).collect();
    Ok(ScreenMetrics { auc: roc_auc(&scores, &labels)?, hit_rate: hit_rate_at_k(&scores, &labels, k.min(hits.len()))? })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestMetrics {
    /// Mean NLL per tag over both channels, without the penalty.
    pub loss: f64,
    pub r2_target: f64,
    pub r2_ntc: f64,
    pub n_tags: usize,
}

pub fn evaluate_test_set(predictor: &Predictor, params: &CountModelParams, test: &[TagExample]) -> Result<TestMetrics, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let preds = predict_examples(predictor, test, params)?;
    let mut loss = 0.0;
    for (ex, p) in test.iter().zip(&preds) {
        loss += tag_nll(&ex.counts, p, params)?;
    }
    let obs_t: Vec<f64> = test.iter().map(|e| e.counts.c_target as f64).collect();
    let obs_n: Vec<f64> = test.iter().map(|e| e.counts.c_ntc as f64).collect();
    let mu_t: Vec<f64> = preds.iter().map(|p| p.mu_target).collect();
    let mu_n: Vec<f64> = preds.iter().map(|p| p.mu_ntc).collect();
    let r2 = |o: &[f64], p: &[f64]| r_squared(o, p).unwrap_or(f64::NAN);
    Ok(TestMetrics { loss: loss / test.len() as f64, r2_target: r2(&obs_t, &mu_t), r2_ntc: r2(&obs_n, &mu_n), n_tags: test.len() })
}

#[cfg(test)]
mod tests;
