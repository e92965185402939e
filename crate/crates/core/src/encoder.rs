//! Protein → drug → drug-drug information propagation.
//!
//! Three stages, each a message-passing layer stack:
//!
//! * protein graph layers: `h' = ReLU(mean_{j∈N(i)} h_j·W + residual(h_i))`
//! * graph-to-graph unit: `h^H = ReLU(mean_{p→d} h_p·W_h)`, `h^D = ReLU(v_d·W_d)`,
//!   combined by concatenation or sum
//! * relational drug layers: `h' = ReLU(Σ_r mean_{j∈N_r(i)} h_j·W_r + h_i·W_o)`
//!   with `W_r = Σ_b a_rb V_b`
//!
//! Weights use the row-vector convention (`h·W`, `W` is `d_in × d_out`).
//! One-hot node features are never materialized: `one_hot(i)·W` is row `i`
//! of `W`, so the whole one-hot input matrix times `W` is just `W`.

use std::sync::Arc;

use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Result, TipError};
use crate::graph::MultiModalGraph;
use crate::init::xavier_uniform_with;
use crate::params::{ParamId, ParamStore};
use crate::sparse::{Adjacency, RelationalAdjacency};
use crate::tensor::Tensor;

/// Node features entering a layer.
#[derive(Debug, Clone, Copy)]
pub enum NodeInput {
    /// Implicit `n × n` identity.
    OneHot(usize),
    Dense(Var),
}

impl NodeInput {
    fn width(&self, tape: &Tape) -> usize {
        match self {
            NodeInput::OneHot(n) => *n,
            NodeInput::Dense(v) => tape.value(*v).cols(),
        }
    }

    fn rows(&self, tape: &Tape) -> usize {
        match self {
            NodeInput::OneHot(n) => *n,
            NodeInput::Dense(v) => tape.value(*v).rows(),
        }
    }

    /// `X · W`.
    fn project(&self, tape: &mut Tape, w: Var) -> Result<Var> {
        match *self {
            NodeInput::OneHot(n) => {
                let rows = tape.value(w).rows();
                if rows != n {
                    return Err(TipError::shape(
                        "one-hot projection",
                        format!("{n} one-hot nodes but weight has {rows} rows"),
                    ));
                }
                Ok(w)
            }
            NodeInput::Dense(x) => tape.matmul(x, w),
        }
    }
}

/// Adjacency structures for the three subgraphs, built once per graph.
#[derive(Debug, Clone)]
pub struct GraphContext {
    pub num_proteins: usize,
    pub num_drugs: usize,
    pub num_relations: usize,
    /// Protein → protein, both orientations.
    pub pp: Arc<Adjacency>,
    /// Protein → drug.
    pub pd: Arc<Adjacency>,
    /// Drug → drug per relation, both orientations.
    pub dd: Arc<RelationalAdjacency>,
}

impl GraphContext {
    pub fn new(g: &MultiModalGraph) -> Result<Self> {
        let (np, nd) = (g.num_proteins(), g.num_drugs());
        Ok(GraphContext {
            num_proteins: np,
            num_drugs: nd,
            num_relations: g.num_relations(),
            pp: Arc::new(Adjacency::from_edges(np, np, g.pp_directed())?),
            pd: Arc::new(Adjacency::from_edges(np, nd, g.pd_edges().iter().copied())?),
            dd: Arc::new(RelationalAdjacency::from_edges(nd, &g.dd_directed())?),
        })
    }
}

/// How a protein layer carries the node's own state into its output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Residual {
    /// No self term. Used when the input is one-hot and cannot be added to
    /// the lower-dimensional output.
    None,
    /// `+ h_i`, requires equal input and output width.
    Identity,
    /// `+ h_i·P` through a learned projection when widths differ.
    Projection(ParamId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpmLayer {
    pub weight: ParamId,
    pub residual: Residual,
}

impl PpmLayer {
    /// Registers a layer mapping `d_in → d_out`. `one_hot_input` marks the
    /// first layer over implicit identity features.
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_out: usize,
        one_hot_input: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add(
            format!("{prefix}.weight"),
            xavier_uniform_with(&[d_in, d_out], rng),
        )?;
        let residual = if one_hot_input {
            Residual::None
        } else if d_in == d_out {
            Residual::Identity
        } else {
            Residual::Projection(store.add(
                format!("{prefix}.residual"),
                xavier_uniform_with(&[d_in, d_out], rng),
            )?)
        };
        Ok(PpmLayer { weight, residual })
    }
}

/// Protein graph embedding over `adj` (protein → protein).
pub fn ppm_forward(
    tape: &mut Tape,
    store: &ParamStore,
    adj: &Arc<Adjacency>,
    input: NodeInput,
    layers: &[PpmLayer],
) -> Result<Var> {
    let mut h = input;
    for (k, layer) in layers.iter().enumerate() {
        let w = tape.param(store, layer.weight);
        if tape.value(w).rows() != h.width(tape) {
            return Err(TipError::Config(format!(
                "protein layer {k} expects width {}, input has {}",
                tape.value(w).rows(),
                h.width(tape)
            )));
        }
        let messages = h.project(tape, w)?;
        let agg = tape.mean_aggregate(messages, adj.clone())?;
        let pre = match (layer.residual, h) {
            (Residual::None, _) => agg,
            (Residual::Identity, NodeInput::Dense(x)) => tape.add(agg, x)?,
            (Residual::Projection(p), _) => {
                let pw = tape.param(store, p);
                let own = h.project(tape, pw)?;
                tape.add(agg, own)?
            }
            (Residual::Identity, NodeInput::OneHot(_)) => {
                return Err(TipError::Config(
                    "identity residual cannot be applied to one-hot input".into(),
                ))
            }
        };
        h = NodeInput::Dense(tape.relu(pre)?);
    }
    match h {
        NodeInput::Dense(v) => Ok(v),
        NodeInput::OneHot(_) => Err(TipError::Config("protein module has no layers".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GgmMode {
    Cat,
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GgmUnit {
    /// `W_h`: protein embedding width → protein-derived drug width.
    pub protein_weight: ParamId,
    /// `W_d`: drug feature width → drug feature block width.
    pub drug_weight: ParamId,
    pub mode: GgmMode,
}

impl GgmUnit {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        protein_in: usize,
        drug_in: usize,
        protein_out: usize,
        drug_out: usize,
        mode: GgmMode,
        rng: &mut R,
    ) -> Result<Self> {
        if mode == GgmMode::Sum && protein_out != drug_out {
            return Err(TipError::Config(format!(
                "sum mode needs equal widths, got {protein_out} and {drug_out}"
            )));
        }
        let protein_weight = store.add(
            "ggm.protein",
            xavier_uniform_with(&[protein_in, protein_out], rng),
        )?;
        let drug_weight = store.add("ggm.drug", xavier_uniform_with(&[drug_in, drug_out], rng))?;
        Ok(GgmUnit {
            protein_weight,
            drug_weight,
            mode,
        })
    }
}

/// Drug-feature reduction unit alone: `ReLU(X_d · W_d)`.
pub fn drug_feature_forward(
    tape: &mut Tape,
    store: &ParamStore,
    drug_input: NodeInput,
    weight: ParamId,
) -> Result<Var> {
    let w = tape.param(store, weight);
    let lin = drug_input.project(tape, w)?;
    tape.relu(lin)
}

/// Graph-to-graph unit over `adj` (protein → drug).
pub fn ggm_forward(
    tape: &mut Tape,
    store: &ParamStore,
    adj: &Arc<Adjacency>,
    protein_emb: Var,
    drug_input: NodeInput,
    unit: &GgmUnit,
) -> Result<Var> {
    let wh = tape.param(store, unit.protein_weight);
    let (emb_w, wh_rows) = (tape.value(protein_emb).cols(), tape.value(wh).rows());
    if emb_w != wh_rows {
        return Err(TipError::Config(format!(
            "protein embedding width {emb_w} does not match W_h input {wh_rows}"
        )));
    }
    if drug_input.rows(tape) != adj.num_targets() {
        return Err(TipError::Config(format!(
            "{} drug feature rows for {} drugs",
            drug_input.rows(tape),
            adj.num_targets()
        )));
    }
    let messages = tape.matmul(protein_emb, wh)?;
    let agg = tape.mean_aggregate(messages, adj.clone())?;
    let from_proteins = tape.relu(agg)?;
    let from_drugs = drug_feature_forward(tape, store, drug_input, unit.drug_weight)?;
    match unit.mode {
        GgmMode::Cat => tape.concat_cols(from_proteins, from_drugs),
        GgmMode::Sum => tape.add(from_proteins, from_drugs).map_err(|e| match e {
            TipError::Shape { detail, .. } => TipError::Config(format!("sum mode: {detail}")),
            other => other,
        }),
    }
}

/// One relational layer with basis-decomposed relation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DdmLayer {
    /// Bases stacked as `d_in × B × d_out`: `V_b = bases[:, b, :]`.
    pub bases: ParamId,
    /// `a_rb`, shape `num_relations × B`.
    pub coeffs: ParamId,
    /// `W_o`, shape `d_in × d_out`.
    pub self_weight: ParamId,
    pub num_bases: usize,
}

impl DdmLayer {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_out: usize,
        num_relations: usize,
        num_bases: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if num_bases == 0 {
            return Err(TipError::Config("number of bases must be positive".into()));
        }
        let bases = store.add(
            format!("{prefix}.bases"),
            xavier_uniform_with(&[d_in, num_bases, d_out], rng),
        )?;
        let coeffs = store.add(
            format!("{prefix}.coeffs"),
            xavier_uniform_with(&[num_relations, num_bases], rng),
        )?;
        let self_weight = store.add(
            format!("{prefix}.self"),
            xavier_uniform_with(&[d_in, d_out], rng),
        )?;
        Ok(DdmLayer {
            bases,
            coeffs,
            self_weight,
            num_bases,
        })
    }
}

/// Relational drug embedding over the training drug-drug edges in `adj`.
pub fn ddm_forward(
    tape: &mut Tape,
    store: &ParamStore,
    adj: &Arc<RelationalAdjacency>,
    input: NodeInput,
    layers: &[DdmLayer],
) -> Result<Var> {
    let mut h = input;
    for (k, layer) in layers.iter().enumerate() {
        let bases = tape.param(store, layer.bases);
        let shape = tape.value(bases).shape().to_vec();
        let (d_in, nb, d_out) = (shape[0], shape[1], shape[2]);
        if d_in != h.width(tape) {
            return Err(TipError::Config(format!(
                "relational layer {k} expects width {d_in}, input has {}",
                h.width(tape)
            )));
        }
        let flat = tape.reshape(bases, vec![d_in, nb * d_out])?;
        let messages = h.project(tape, flat)?;
        let coeffs = tape.param(store, layer.coeffs);
        let agg = tape.relational_basis_aggregate(messages, coeffs, adj.clone(), nb)?;
        let wo = tape.param(store, layer.self_weight);
        let own = h.project(tape, wo)?;
        let pre = tape.add(agg, own)?;
        h = NodeInput::Dense(tape.relu(pre)?);
    }
    match h {
        NodeInput::Dense(v) => Ok(v),
        NodeInput::OneHot(_) => Err(TipError::Config("relational module has no layers".into())),
    }
}

/// Effective relation weight `W_r = Σ_b a_rb V_b` (`d_in × d_out`), for
/// inspection and export.
pub fn relation_weight(store: &ParamStore, layer: &DdmLayer, relation: usize) -> Result<Tensor> {
    let bases = store.get(layer.bases).value();
    let coeffs = store.get(layer.coeffs).value();
    let (d_in, nb, d_out) = (bases.shape()[0], bases.shape()[1], bases.shape()[2]);
    if relation >= coeffs.rows() {
        return Err(TipError::Index {
            what: "relation",
            index: relation,
            len: coeffs.rows(),
        });
    }
    let mut w = Tensor::zeros(&[d_in, d_out]);
    for i in 0..d_in {
        for b in 0..nb {
            let a = coeffs.get(relation, b);
            for o in 0..d_out {
                w.data_mut()[i * d_out + o] += a * bases.data()[(i * nb + b) * d_out + o];
            }
        }
    }
    Ok(w)
}
