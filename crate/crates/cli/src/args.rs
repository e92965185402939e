//! Command-line surface. Every flag is optional and overrides the value from
//! `--config`, which in turn overrides the built-in defaults.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tip_core::Variant;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "tip",
    version,
    about = "Drug-drug side-effect prediction over protein, drug-target and drug-drug graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter rare relations, split edges and freeze test negatives.
    Prepare(PrepareArgs),
    /// Train a model on a prepared split.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the held-out edges of a prepared split.
    Eval(EvalArgs),
    /// Write a planted-community graph as pp/pd/dd edge lists.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat TOML file with run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the per-relation train/test shuffle.
    #[arg(long)]
    pub seed_split: Option<u64>,
    /// Seed of all negative sampling; stream 0 is the frozen test set.
    #[arg(long)]
    pub seed_negative: Option<u64>,
    /// Seed of parameter initialization.
    #[arg(long)]
    pub seed_init: Option<u64>,
    /// Seed of the synthetic graph generator.
    #[arg(long)]
    pub seed_synth: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ShapeArgs {
    #[arg(long)]
    pub proteins: Option<usize>,
    #[arg(long)]
    pub drugs: Option<usize>,
    #[arg(long)]
    pub relations: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Protein-protein edges: `protein_a,protein_b`.
    #[arg(long)]
    pub pp: Option<PathBuf>,
    /// Drug-target edges: `protein,drug`.
    #[arg(long)]
    pub pd: Option<PathBuf>,
    /// Drug-drug edges: `drug_a,drug_b,relation_id`.
    #[arg(long)]
    pub dd: Option<PathBuf>,
    /// Generate the graph instead of reading edge lists.
    #[arg(long)]
    pub synth: bool,
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Relations with fewer edges are dropped.
    #[arg(long)]
    pub min_count: Option<usize>,
    /// Fraction of each relation kept for training.
    #[arg(long)]
    pub split_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// tip-cat, tip-sum, ddm-df, ddm-nn, ppm-ggm-nn or df.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Full-batch Adam steps.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Reuse the first epoch's training negatives instead of resampling.
    #[arg(long)]
    pub fixed_negatives: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Relations listed at each end of the extremes report.
    #[arg(long)]
    pub extremes: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub shape: ShapeArgs,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Common {
    /// Defaults, then the config file, then these flags.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        set(&mut c.seed_split, self.seed_split);
        set(&mut c.seed_negative, self.seed_negative);
        set(&mut c.seed_init, self.seed_init);
        set(&mut c.seed_synth, self.seed_synth);
        Ok(c)
    }
}

impl ShapeArgs {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.synth_proteins, self.proteins);
        set(&mut c.synth_drugs, self.drugs);
        set(&mut c.synth_relations, self.relations);
    }
}

impl ModelArgs {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.variant, self.variant);
        set(&mut c.epochs, self.epochs);
        set(&mut c.lr, self.lr);
        if self.fixed_negatives {
            c.resample_negatives = false;
        }
    }
}

impl PrepareArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = self.common.resolve()?;
        for (slot, v) in [
            (&mut c.pp, &self.pp),
            (&mut c.pd, &self.pd),
            (&mut c.dd, &self.dd),
        ] {
            if v.is_some() {
                *slot = v.clone();
            }
        }
        c.synth |= self.synth;
        self.shape.apply(&mut c);
        set(&mut c.min_count, self.min_count);
        set(&mut c.split_ratio, self.split_ratio);
        Ok(c)
    }
}

impl TrainArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = self.common.resolve()?;
        self.model.apply(&mut c);
        c.train_config().context("invalid training configuration")?;
        Ok(c)
    }
}

impl EvalArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = self.common.resolve()?;
        set(&mut c.extremes, self.extremes);
        Ok(c)
    }
}

impl SynthArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = self.common.resolve()?;
        self.shape.apply(&mut c);
        Ok(c)
    }
}
