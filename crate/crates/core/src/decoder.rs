//! Side-effect scoring of drug pairs: DistMult factorization and a two-layer
//! multi-label network. Neither has bias terms.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Tape, Var};
use crate::error::{Result, TipError};
use crate::init::xavier_uniform_with;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// A `(head drug, relation, tail drug)` query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistMultParams {
    /// Diagonals of the relation matrices `M_r`, shape `num_relations × d_z`.
    pub relations: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnDecoderParams {
    /// `2·d_z × hidden`.
    pub w1: ParamId,
    /// `hidden × num_relations`.
    pub w2: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    DistMult(DistMultParams),
    NeuralNet(NnDecoderParams),
}

impl Decoder {
    pub fn init_distmult<R: Rng>(
        store: &mut ParamStore,
        num_relations: usize,
        embed_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let relations = store.add(
            "decoder.distmult",
            xavier_uniform_with(&[num_relations, embed_dim], rng),
        )?;
        Ok(Decoder::DistMult(DistMultParams { relations }))
    }

    pub fn init_nn<R: Rng>(
        store: &mut ParamStore,
        num_relations: usize,
        embed_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w1 = store.add(
            "decoder.nn.w1",
            xavier_uniform_with(&[2 * embed_dim, hidden], rng),
        )?;
        let w2 = store.add(
            "decoder.nn.w2",
            xavier_uniform_with(&[hidden, num_relations], rng),
        )?;
        Ok(Decoder::NeuralNet(NnDecoderParams { w1, w2 }))
    }
}

/// Raw DistMult score `Σ_k m_r[k]·(z_i[k]·z_j[k])`.
pub fn df_logit(z_i: &[f64], z_j: &[f64], relation: usize, rel_vectors: &Tensor) -> Result<f64> {
    if relation >= rel_vectors.rows() {
        return Err(TipError::Index {
            what: "relation",
            index: relation,
            len: rel_vectors.rows(),
        });
    }
    let m = rel_vectors.row(relation);
    if z_i.len() != m.len() || z_j.len() != m.len() {
        return Err(TipError::shape(
            "df_score",
            format!(
                "embeddings {}/{} vs relation width {}",
                z_i.len(),
                z_j.len(),
                m.len()
            ),
        ));
    }
    // `m·(a·b)` keeps the score bitwise symmetric in its two drugs.
    Ok(z_i
        .iter()
        .zip(z_j)
        .zip(m)
        .map(|((a, b), w)| w * (a * b))
        .sum())
}

/// `σ(z_iᵀ M_r z_j)` for one pair.
pub fn df_score(z_i: &[f64], z_j: &[f64], relation: usize, rel_vectors: &Tensor) -> Result<f64> {
    df_logit(z_i, z_j, relation, rel_vectors).map(sigmoid)
}

/// All relation probabilities for one pair, averaged over both input orders.
pub fn nn_score(z_i: &[f64], z_j: &[f64], w1: &Tensor, w2: &Tensor) -> Result<Vec<f64>> {
    let one_order = |a: &[f64], b: &[f64]| -> Result<Vec<f64>> {
        let x = Tensor::new(vec![1, a.len() + b.len()], [a, b].concat())?;
        let hidden = x.matmul(w1)?;
        let hidden = Tensor::new(
            hidden.shape().to_vec(),
            hidden.data().iter().map(|v| v.max(0.0)).collect(),
        )?;
        Ok(hidden
            .matmul(w2)?
            .into_data()
            .into_iter()
            .map(sigmoid)
            .collect())
    };
    let fwd = one_order(z_i, z_j)?;
    let rev = one_order(z_j, z_i)?;
    Ok(fwd.iter().zip(&rev).map(|(a, b)| 0.5 * (a + b)).collect())
}

/// Probabilities for every triple, in input order, recorded on `tape`.
pub fn score_batch(
    tape: &mut Tape,
    store: &ParamStore,
    decoder: &Decoder,
    z: Var,
    triples: &[Triple],
) -> Result<Var> {
    match decoder {
        Decoder::DistMult(p) => {
            let heads: Arc<[usize]> = triples.iter().map(|t| t.head).collect();
            let tails: Arc<[usize]> = triples.iter().map(|t| t.tail).collect();
            let rels: Arc<[usize]> = triples.iter().map(|t| t.relation).collect();
            let m = tape.param(store, p.relations);
            let zi = tape.gather_rows(z, heads)?;
            let zj = tape.gather_rows(z, tails)?;
            let mr = tape.gather_rows(m, rels)?;
            let pair = tape.mul(zi, zj)?;
            let prod = tape.mul(mr, pair)?;
            let logits = tape.row_sum(prod)?;
            tape.sigmoid(logits)
        }
        Decoder::NeuralNet(p) => {
            // Score each unordered pair once, then pick the queried relation.
            let mut slot_of: HashMap<(usize, usize), usize> = HashMap::new();
            let mut heads = Vec::new();
            let mut tails = Vec::new();
            let mut rows = Vec::with_capacity(triples.len());
            for t in triples {
                let key = (t.head.min(t.tail), t.head.max(t.tail));
                let slot = *slot_of.entry(key).or_insert_with(|| {
                    heads.push(key.0);
                    tails.push(key.1);
                    heads.len() - 1
                });
                rows.push(slot);
            }
            let zi = tape.gather_rows(z, heads.into())?;
            let zj = tape.gather_rows(z, tails.into())?;
            let w1 = tape.param(store, p.w1);
            let w2 = tape.param(store, p.w2);
            let mut halves = Vec::with_capacity(2);
            for (a, b) in [(zi, zj), (zj, zi)] {
                let x = tape.concat_cols(a, b)?;
                let h = tape.matmul(x, w1)?;
                let h = tape.relu(h)?;
                let o = tape.matmul(h, w2)?;
                halves.push(tape.sigmoid(o)?);
            }
            let both = tape.add(halves[0], halves[1])?;
            let probs = tape.affine(both, 0.5, 0.0)?;
            let cols: Arc<[usize]> = triples.iter().map(|t| t.relation).collect();
            tape.pick(probs, rows.into(), cols)
        }
    }
}
