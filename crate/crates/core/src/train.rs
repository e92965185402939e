//! Full-batch training and held-out evaluation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::decoder::Triple;
use crate::encoder::GraphContext;
use crate::error::{Result, TipError};
use crate::graph::{negative_rng, sample_negatives, DrugPair, SplitGraph};
use crate::metrics::{ap_at_k, auprc, auroc};
use crate::model::{GraphShape, ModelConfig, TipModel};
use crate::optim::{AdamConfig, AdamState};
use crate::tensor::Tensor;

/// Lower clamp applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// Cutoff for AP@k in reports.
pub const AP_K: usize = 50;

/// `−mean(ln p_pos) − mean(ln(1 − p_neg))`, with both logs clamped at
/// [`LOG_FLOOR`]. An empty negative set contributes nothing.
pub fn bce_loss(tape: &mut Tape, pos: Var, neg: Var) -> Result<Var> {
    if tape.value(pos).is_empty() {
        return Err(TipError::Contract(
            "cross-entropy needs at least one positive".into(),
        ));
    }
    let log_pos = tape.log_clamped(pos, LOG_FLOOR)?;
    let pos_term = tape.mean(log_pos)?;
    let mut total = tape.affine(pos_term, -1.0, 0.0)?;
    if !tape.value(neg).is_empty() {
        let one_minus = tape.affine(neg, -1.0, 1.0)?;
        let log_neg = tape.log_clamped(one_minus, LOG_FLOOR)?;
        let neg_term = tape.mean(log_neg)?;
        let neg_term = tape.affine(neg_term, -1.0, 0.0)?;
        total = tape.add(total, neg_term)?;
    }
    Ok(total)
}

/// Plain-value version of [`bce_loss`].
pub fn bce_loss_value(pos: &[f64], neg: &[f64]) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.constant(Tensor::vector(pos.to_vec()));
    let n = tape.constant(Tensor::vector(neg.to_vec()));
    let l = bce_loss(&mut tape, p, n)?;
    tape.value(l).item()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub lr: f64,
    pub init_seed: u64,
    pub negative_seed: u64,
    /// Draw fresh training negatives every epoch. When off, the negatives of
    /// the first epoch are reused, so the objective is a fixed function of
    /// the parameters.
    pub resample_negatives: bool,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        TrainConfig {
            model,
            epochs: 100,
            lr: 0.01,
            init_seed: 0,
            negative_seed: 2,
            resample_negatives: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TipError::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TipModel,
    /// Loss of each epoch, measured before that epoch's update.
    pub losses: Vec<f64>,
}

pub(crate) fn triples_of(pairs_by_relation: &[Vec<DrugPair>]) -> Vec<Triple> {
    pairs_by_relation
        .iter()
        .enumerate()
        .flat_map(|(r, pairs)| pairs.iter().map(move |&(a, b)| Triple::new(a, r, b)))
        .collect()
}

/// One forward pass: the loss on `tape` for the given positives and negatives.
pub fn loss_on_tape(
    model: &TipModel,
    ctx: &GraphContext,
    tape: &mut Tape,
    positives: &[Triple],
    negatives: &[Triple],
) -> Result<Var> {
    let z = model.encode(tape, ctx)?;
    let pos = model.score(tape, z, positives)?;
    let neg = model.score(tape, z, negatives)?;
    bce_loss(tape, pos, neg)
}

pub fn train(split: &SplitGraph, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(split, config, |_, _| {})
}

/// Trains with a per-epoch callback receiving `(epoch, loss)`.
///
/// Each epoch resamples training negatives (stream `epoch + 1` of the
/// negative seed) unless disabled, runs the full forward pass on the training graph, and takes
/// one Adam step.
pub fn train_with(
    split: &SplitGraph,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    let ctx = GraphContext::new(&split.train)?;
    let mut model = TipModel::new(
        config.model.clone(),
        GraphShape::from(&ctx),
        config.init_seed,
    )?;
    let adam_config = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_config, model.params());
    let positives_by_rel = split.train.dd_edges_all();
    let positives = triples_of(positives_by_rel);
    let mut losses = Vec::with_capacity(config.epochs);
    let mut negatives = Vec::new();

    for epoch in 0..config.epochs {
        if epoch == 0 || config.resample_negatives {
            let mut rng = negative_rng(config.negative_seed, epoch as u64 + 1);
            let negs = sample_negatives(
                positives_by_rel,
                positives_by_rel,
                split.train.num_drugs(),
                &mut rng,
            )?;
            negatives = triples_of(&negs.by_relation);
        }

        let mut tape = Tape::new();
        let loss = loss_on_tape(&model, &ctx, &mut tape, &positives, &negatives)?;
        let value = tape.value(loss).item()?;
        if !value.is_finite() {
            return Err(TipError::NonFiniteLoss { epoch });
        }
        tape.backward(loss, model.params_mut())?;
        adam.step(model.params_mut())?;
        losses.push(value);
        on_epoch(epoch, value);
    }
    Ok(TrainOutcome { model, losses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub relation: usize,
    pub relation_id: String,
    pub auprc: f64,
    pub auroc: f64,
    pub ap50: f64,
    pub positives: usize,
    pub negatives: usize,
    /// Fewer than 50 test pairs were available for AP@50.
    pub ap50_truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub relations: usize,
    pub auprc: f64,
    pub auroc: f64,
    pub ap50: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub relations: Vec<RelationMetrics>,
    /// Relations skipped because their test set is empty.
    pub excluded: Vec<usize>,
    /// Unweighted means over `relations`; `None` when no relation was scored.
    pub summary: Option<MacroMetrics>,
}

impl EvalReport {
    pub fn from_relations(relations: Vec<RelationMetrics>, excluded: Vec<usize>) -> Self {
        let summary = if relations.is_empty() {
            None
        } else {
            let n = relations.len() as f64;
            let mean = |f: fn(&RelationMetrics) -> f64| relations.iter().map(f).sum::<f64>() / n;
            Some(MacroMetrics {
                relations: relations.len(),
                auprc: mean(|m| m.auprc),
                auroc: mean(|m| m.auroc),
                ap50: mean(|m| m.ap50),
            })
        };
        EvalReport {
            relations,
            excluded,
            summary,
        }
    }

    /// One JSON object per relation, newline-delimited.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for m in &self.relations {
            serde_json::to_writer(&mut w, m)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "summary": self.summary,
            "excluded": self.excluded,
        })
    }
}

/// Scores the frozen test positives and negatives of every relation with
/// precomputed embeddings `z`.
pub fn evaluate_embeddings(model: &TipModel, z: &Tensor, split: &SplitGraph) -> Result<EvalReport> {
    let pos = model.score_with_embeddings(z, &triples_of(&split.test_positives))?;
    let neg = model.score_with_embeddings(z, &triples_of(&split.test_negatives))?;
    let (mut pi, mut ni) = (0, 0);
    let mut relations = Vec::new();
    let mut excluded = Vec::new();
    for r in 0..split.num_relations() {
        let (np, nn) = (split.test_positives[r].len(), split.test_negatives[r].len());
        let (ps, ns) = (&pos[pi..pi + np], &neg[ni..ni + nn]);
        pi += np;
        ni += nn;
        if np == 0 || nn == 0 {
            excluded.push(r);
            continue;
        }
        let ap = ap_at_k(ps, ns, AP_K)?;
        relations.push(RelationMetrics {
            relation: r,
            relation_id: split.train.relations().name(r).to_string(),
            auprc: auprc(ps, ns)?,
            auroc: auroc(ps, ns)?,
            ap50: ap.value,
            positives: np,
            negatives: nn,
            ap50_truncated: ap.truncated,
        });
    }
    Ok(EvalReport::from_relations(relations, excluded))
}

/// Encodes on the training graph of `split` and evaluates.
pub fn evaluate(model: &TipModel, split: &SplitGraph) -> Result<EvalReport> {
    let ctx = GraphContext::new(&split.train)?;
    let z = model.embeddings(&ctx)?;
    evaluate_embeddings(model, &z, split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// Highest AUPRC first.
    pub best: Vec<RelationMetrics>,
    /// Lowest AUPRC first.
    pub worst: Vec<RelationMetrics>,
    /// Fewer than `2n` relations were available; `best` holds the upper half
    /// and `worst` the rest.
    pub truncated: bool,
}

/// The `n` best and `n` worst relations by AUPRC, ties broken by relation index.
pub fn report_extremes(report: &EvalReport, n: usize) -> RankingReport {
    let mut sorted = report.relations.clone();
    sorted.sort_by(|a, b| {
        b.auprc
            .total_cmp(&a.auprc)
            .then(a.relation.cmp(&b.relation))
    });
    let truncated = sorted.len() < 2 * n;
    let n_best = if truncated {
        sorted.len().div_ceil(2)
    } else {
        n
    };
    let n_worst = if truncated { sorted.len() - n_best } else { n };
    let best = sorted[..n_best].to_vec();
    let mut worst = sorted[sorted.len() - n_worst..].to_vec();
    worst.sort_by(|a, b| {
        a.auprc
            .total_cmp(&b.auprc)
            .then(a.relation.cmp(&b.relation))
    });
    RankingReport {
        best,
        worst,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bce_examples() {
        let l = bce_loss_value(&[0.5, 0.5], &[0.5, 0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(l, 2.0 * std::f64::consts::LN_2, epsilon = 1e-15);
        let l = bce_loss_value(&[0.9], &[0.2]).unwrap();
        assert_abs_diff_eq!(l, -(0.9f64.ln()) - 0.8f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(l, 0.328_504_066_972_036_3, epsilon = 1e-12);
        let l = bce_loss_value(&[1.0 - 1e-15], &[1e-15]).unwrap();
        assert!(l < 1e-12);
    }

    #[test]
    fn bce_clamps_and_requires_positives() {
        let l = bce_loss_value(&[0.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(l, -2.0 * LOG_FLOOR.ln(), epsilon = 1e-9);
        assert!(l.is_finite());
        assert!(matches!(
            bce_loss_value(&[], &[0.3]),
            Err(TipError::Contract(_))
        ));
    }

    fn metric(r: usize, auprc: f64) -> RelationMetrics {
        RelationMetrics {
            relation: r,
            relation_id: format!("R{r}"),
            auprc,
            auroc: 0.5,
            ap50: 0.5,
            positives: 1,
            negatives: 1,
            ap50_truncated: true,
        }
    }

    #[test]
    fn empty_report() {
        let rep = EvalReport::from_relations(vec![], vec![]);
        assert!(rep.summary.is_none());
        let ext = report_extremes(&rep, 20);
        assert!(ext.best.is_empty() && ext.worst.is_empty());
    }

    #[test]
    fn macro_of_identical_values() {
        let rep = EvalReport::from_relations((0..7).map(|r| metric(r, 0.37)).collect(), vec![]);
        let s = rep.summary.unwrap();
        assert_abs_diff_eq!(s.auprc, 0.37, epsilon = 1e-15);
        assert_eq!(s.relations, 7);
    }

    #[test]
    fn extremes_of_forty() {
        let rep = EvalReport::from_relations(
            (0..40)
                .map(|r| metric(r, (r * 7 % 40) as f64 / 40.0))
                .collect(),
            vec![],
        );
        let ext = report_extremes(&rep, 20);
        assert!(!ext.truncated);
        assert_eq!(ext.best.len(), 20);
        assert_eq!(ext.worst.len(), 20);
        for b in &ext.best {
            assert!(ext.worst.iter().all(|w| w.relation != b.relation));
        }
        assert!(ext.best.windows(2).all(|w| w[0].auprc >= w[1].auprc));
        assert!(ext.worst.windows(2).all(|w| w[0].auprc <= w[1].auprc));
    }

    #[test]
    fn extremes_ties_follow_relation_index() {
        let rep = EvalReport::from_relations((0..6).map(|r| metric(r, 0.5)).collect(), vec![]);
        let ext = report_extremes(&rep, 2);
        let ids: Vec<_> = ext.best.iter().map(|m| m.relation).collect();
        assert_eq!(ids, vec![0, 1]);
        let ids: Vec<_> = ext.worst.iter().map(|m| m.relation).collect();
        assert_eq!(ids, vec![4, 5]);
    }

    #[test]
    fn extremes_truncated_when_small() {
        let rep = EvalReport::from_relations((0..5).map(|r| metric(r, r as f64)).collect(), vec![]);
        let ext = report_extremes(&rep, 20);
        assert!(ext.truncated);
        assert_eq!(ext.best.len() + ext.worst.len(), 5);
    }
}
