//! Architecture variants and the assembled encoder/decoder model.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::decoder::{score_batch, Decoder, Triple};
use crate::encoder::{
    ddm_forward, drug_feature_forward, ggm_forward, ppm_forward, DdmLayer, GgmMode, GgmUnit,
    GraphContext, NodeInput, PpmLayer,
};
use crate::error::{Result, TipError};
use crate::init::xavier_uniform_with;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// The six architectures: which encoder stages run and which decoder scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// protein layers → graph-to-graph (concat) → relational layers → DistMult
    TipCat,
    /// protein layers → graph-to-graph (sum) → relational layers → DistMult
    TipSum,
    /// relational layers over one-hot drugs → DistMult
    DdmDf,
    /// relational layers over one-hot drugs → neural decoder
    DdmNn,
    /// protein layers → graph-to-graph (concat) → neural decoder
    PpmGgmNn,
    /// reduced drug features → DistMult
    Df,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::TipCat,
        Variant::TipSum,
        Variant::DdmDf,
        Variant::DdmNn,
        Variant::PpmGgmNn,
        Variant::Df,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::TipCat => "tip-cat",
            Variant::TipSum => "tip-sum",
            Variant::DdmDf => "ddm-df",
            Variant::DdmNn => "ddm-nn",
            Variant::PpmGgmNn => "ppm-ggm-nn",
            Variant::Df => "df",
        }
    }

    pub fn uses_proteins(self) -> bool {
        matches!(self, Variant::TipCat | Variant::TipSum | Variant::PpmGgmNn)
    }

    pub fn uses_relational_layers(self) -> bool {
        matches!(
            self,
            Variant::TipCat | Variant::TipSum | Variant::DdmDf | Variant::DdmNn
        )
    }

    pub fn decoder(self) -> DecoderKind {
        match self {
            Variant::DdmNn | Variant::PpmGgmNn => DecoderKind::NeuralNet,
            _ => DecoderKind::DistMult,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = TipError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                TipError::Config(format!(
                    "unknown variant `{s}` (expected one of tip-cat, tip-sum, ddm-df, ddm-nn, ppm-ggm-nn, df)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    DistMult,
    NeuralNet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub ppm_dims: Vec<usize>,
    pub ggm_mode: GgmModeName,
    pub ggm_protein_dim: usize,
    pub ggm_drug_dim: usize,
    pub ddm_dims: Vec<usize>,
    pub num_bases: usize,
    /// Width of the reduced drug features used directly by the `df` variant.
    pub df_dim: usize,
}

/// Serializable mirror of [`GgmMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GgmModeName {
    Cat,
    Sum,
}

impl From<GgmModeName> for GgmMode {
    fn from(m: GgmModeName) -> Self {
        match m {
            GgmModeName::Cat => GgmMode::Cat,
            GgmModeName::Sum => GgmMode::Sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub encoder: EncoderConfig,
    /// Hidden width of the neural decoder.
    pub nn_hidden: usize,
}

impl ModelConfig {
    /// Default layer sizes for each architecture.
    pub fn for_variant(variant: Variant) -> Self {
        let (mode, dp, dd) = match variant {
            Variant::TipSum => (GgmModeName::Sum, 64, 64),
            _ => (GgmModeName::Cat, 16, 48),
        };
        ModelConfig {
            variant,
            encoder: EncoderConfig {
                ppm_dims: vec![32, 16],
                ggm_mode: mode,
                ggm_protein_dim: dp,
                ggm_drug_dim: dd,
                ddm_dims: vec![32, 16],
                num_bases: 16,
                df_dim: 16,
            },
            nn_hidden: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.encoder;
        let v = self.variant;
        let mut dims: Vec<(&str, usize)> = vec![("nn_hidden", self.nn_hidden)];
        if v.uses_proteins() {
            if e.ppm_dims.is_empty() {
                return Err(TipError::Config(format!(
                    "{v} needs at least one protein layer"
                )));
            }
            dims.extend(e.ppm_dims.iter().map(|&d| ("ppm_dims", d)));
            dims.push(("ggm_protein_dim", e.ggm_protein_dim));
            dims.push(("ggm_drug_dim", e.ggm_drug_dim));
            if e.ggm_mode == GgmModeName::Sum && e.ggm_protein_dim != e.ggm_drug_dim {
                return Err(TipError::Config(format!(
                    "sum mode requires equal widths, got {} and {}",
                    e.ggm_protein_dim, e.ggm_drug_dim
                )));
            }
        }
        if v.uses_relational_layers() {
            if e.ddm_dims.is_empty() {
                return Err(TipError::Config(format!(
                    "{v} needs at least one relational layer"
                )));
            }
            dims.extend(e.ddm_dims.iter().map(|&d| ("ddm_dims", d)));
            dims.push(("num_bases", e.num_bases));
        }
        if v == Variant::Df {
            dims.push(("df_dim", e.df_dim));
        }
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(TipError::Config(format!("{name} must be positive")));
        }
        Ok(())
    }

    /// Width of the combined graph-to-graph output.
    pub fn ggm_output_dim(&self) -> usize {
        match self.encoder.ggm_mode {
            GgmModeName::Cat => self.encoder.ggm_protein_dim + self.encoder.ggm_drug_dim,
            GgmModeName::Sum => self.encoder.ggm_protein_dim,
        }
    }

    /// Width of the final drug embedding.
    pub fn embedding_dim(&self) -> usize {
        match self.variant {
            Variant::TipCat | Variant::TipSum | Variant::DdmDf | Variant::DdmNn => {
                *self.encoder.ddm_dims.last().unwrap_or(&0)
            }
            Variant::PpmGgmNn => self.ggm_output_dim(),
            Variant::Df => self.encoder.df_dim,
        }
    }
}

/// Node and relation counts a model is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphShape {
    pub num_proteins: usize,
    pub num_drugs: usize,
    pub num_relations: usize,
}

impl From<&GraphContext> for GraphShape {
    fn from(ctx: &GraphContext) -> Self {
        GraphShape {
            num_proteins: ctx.num_proteins,
            num_drugs: ctx.num_drugs,
            num_relations: ctx.num_relations,
        }
    }
}

/// Encoder and decoder parameters for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct TipModel {
    config: ModelConfig,
    shape: GraphShape,
    params: ParamStore,
    ppm: Vec<PpmLayer>,
    ggm: Option<GgmUnit>,
    drug_features: Option<ParamId>,
    ddm: Vec<DdmLayer>,
    decoder: Decoder,
}

impl TipModel {
    /// Builds and Xavier-initializes every parameter from one seeded stream,
    /// in a fixed order.
    pub fn new(config: ModelConfig, shape: GraphShape, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let e = &config.encoder;
        let v = config.variant;

        let mut ppm = Vec::new();
        let mut ggm = None;
        if v.uses_proteins() {
            let mut d_in = shape.num_proteins;
            for (k, &d_out) in e.ppm_dims.iter().enumerate() {
                ppm.push(PpmLayer::init(
                    &mut params,
                    &format!("ppm.{k}"),
                    d_in,
                    d_out,
                    k == 0,
                    &mut rng,
                )?);
                d_in = d_out;
            }
            ggm = Some(GgmUnit::init(
                &mut params,
                d_in,
                shape.num_drugs,
                e.ggm_protein_dim,
                e.ggm_drug_dim,
                e.ggm_mode.into(),
                &mut rng,
            )?);
        }

        let mut drug_features = None;
        if v == Variant::Df {
            drug_features = Some(params.add(
                "drug_features",
                xavier_uniform_with(&[shape.num_drugs, e.df_dim], &mut rng),
            )?);
        }

        let mut ddm = Vec::new();
        if v.uses_relational_layers() {
            let mut d_in = if v.uses_proteins() {
                config.ggm_output_dim()
            } else {
                shape.num_drugs
            };
            for (k, &d_out) in e.ddm_dims.iter().enumerate() {
                ddm.push(DdmLayer::init(
                    &mut params,
                    &format!("ddm.{k}"),
                    d_in,
                    d_out,
                    shape.num_relations,
                    e.num_bases,
                    &mut rng,
                )?);
                d_in = d_out;
            }
        }

        let z_dim = config.embedding_dim();
        let decoder = match v.decoder() {
            DecoderKind::DistMult => {
                Decoder::init_distmult(&mut params, shape.num_relations, z_dim, &mut rng)?
            }
            DecoderKind::NeuralNet => Decoder::init_nn(
                &mut params,
                shape.num_relations,
                z_dim,
                config.nn_hidden,
                &mut rng,
            )?,
        };

        Ok(TipModel {
            config,
            shape,
            params,
            ppm,
            ggm,
            drug_features,
            ddm,
            decoder,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn shape(&self) -> GraphShape {
        self.shape
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn ppm_layers(&self) -> &[PpmLayer] {
        &self.ppm
    }

    pub fn ggm_unit(&self) -> Option<&GgmUnit> {
        self.ggm.as_ref()
    }

    pub fn ddm_layers(&self) -> &[DdmLayer] {
        &self.ddm
    }

    fn check_context(&self, ctx: &GraphContext) -> Result<()> {
        if GraphShape::from(ctx) != self.shape {
            return Err(TipError::Config(format!(
                "model built for {:?}, graph is {:?}",
                self.shape,
                GraphShape::from(ctx)
            )));
        }
        Ok(())
    }

    /// Drug embeddings `Z_d` on `tape`.
    pub fn encode(&self, tape: &mut Tape, ctx: &GraphContext) -> Result<Var> {
        self.check_context(ctx)?;
        let drugs = NodeInput::OneHot(self.shape.num_drugs);
        let p = &self.params;
        match self.config.variant {
            Variant::TipCat | Variant::TipSum | Variant::PpmGgmNn => {
                let proteins = NodeInput::OneHot(self.shape.num_proteins);
                let hp = ppm_forward(tape, p, &ctx.pp, proteins, &self.ppm)?;
                let unit = self.ggm.as_ref().expect("protein variants own a GGM unit");
                let h0 = ggm_forward(tape, p, &ctx.pd, hp, drugs, unit)?;
                if self.config.variant == Variant::PpmGgmNn {
                    Ok(h0)
                } else {
                    ddm_forward(tape, p, &ctx.dd, NodeInput::Dense(h0), &self.ddm)
                }
            }
            Variant::DdmDf | Variant::DdmNn => ddm_forward(tape, p, &ctx.dd, drugs, &self.ddm),
            Variant::Df => {
                let w = self.drug_features.expect("df variant owns drug features");
                drug_feature_forward(tape, p, drugs, w)
            }
        }
    }

    /// Drug embeddings as a plain tensor.
    pub fn embeddings(&self, ctx: &GraphContext) -> Result<Tensor> {
        let mut tape = Tape::new();
        let z = self.encode(&mut tape, ctx)?;
        Ok(tape.value(z).clone())
    }

    pub fn score(&self, tape: &mut Tape, z: Var, triples: &[Triple]) -> Result<Var> {
        score_batch(tape, &self.params, &self.decoder, z, triples)
    }

    /// Probabilities for `triples` given precomputed embeddings.
    pub fn score_with_embeddings(&self, z: &Tensor, triples: &[Triple]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone());
        let out = self.score(&mut tape, zv, triples)?;
        Ok(tape.value(out).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MultiModalGraph;

    fn toy_ctx() -> GraphContext {
        let g = MultiModalGraph::from_counts(
            6,
            5,
            [(0, 1), (1, 2), (3, 4)],
            [(0, 0), (2, 1), (4, 2), (5, 3)],
            vec![vec![(0, 1), (1, 2)], vec![(2, 3), (0, 4)]],
        )
        .unwrap();
        GraphContext::new(&g).unwrap()
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!(matches!(
            "tip-max".parse::<Variant>(),
            Err(TipError::Config(_))
        ));
    }

    #[test]
    fn default_sizes() {
        let sum = ModelConfig::for_variant(Variant::TipSum);
        assert_eq!(sum.encoder.ppm_dims, vec![32, 16]);
        assert_eq!(
            (sum.encoder.ggm_protein_dim, sum.encoder.ggm_drug_dim),
            (64, 64)
        );
        assert_eq!(sum.encoder.ddm_dims, vec![32, 16]);
        assert_eq!(sum.encoder.num_bases, 16);
        assert_eq!(sum.embedding_dim(), 16);
        let cat = ModelConfig::for_variant(Variant::TipCat);
        assert_eq!(cat.ggm_output_dim(), 64);
        assert_eq!(
            ModelConfig::for_variant(Variant::PpmGgmNn).embedding_dim(),
            64
        );
    }

    #[test]
    fn every_variant_encodes_to_expected_width() {
        let ctx = toy_ctx();
        for v in Variant::ALL {
            let cfg = ModelConfig::for_variant(v);
            let dim = cfg.embedding_dim();
            let m = TipModel::new(cfg, GraphShape::from(&ctx), 1).unwrap();
            let z = m.embeddings(&ctx).unwrap();
            assert_eq!(z.shape(), &[5, dim], "{v}");
            assert!(z.is_finite());
        }
    }

    #[test]
    fn nn_decoder_width_is_relation_count() {
        let ctx = toy_ctx();
        let m = TipModel::new(
            ModelConfig::for_variant(Variant::DdmNn),
            GraphShape::from(&ctx),
            1,
        )
        .unwrap();
        let w2 = m.params().by_name("decoder.nn.w2").unwrap();
        assert_eq!(w2.value().shape(), &[16, 2]);
    }

    #[test]
    fn mismatched_graph_rejected() {
        let ctx = toy_ctx();
        let mut shape = GraphShape::from(&ctx);
        shape.num_drugs += 1;
        let m = TipModel::new(ModelConfig::for_variant(Variant::DdmDf), shape, 0).unwrap();
        assert!(m.embeddings(&ctx).is_err());
    }

    #[test]
    fn sum_mode_config_checked() {
        let mut cfg = ModelConfig::for_variant(Variant::TipSum);
        cfg.encoder.ggm_drug_dim = 48;
        assert!(matches!(cfg.validate(), Err(TipError::Config(_))));
    }
}
