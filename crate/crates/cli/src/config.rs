//! Flat key-value run configuration. Precedence: defaults, then the
//! `--config` file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tip_core::{ModelConfig, SynthConfig, TrainConfig, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pp: Option<PathBuf>,
    pub pd: Option<PathBuf>,
    pub dd: Option<PathBuf>,
    /// Generate the input graph instead of reading `pp`/`pd`/`dd`.
    pub synth: bool,
    pub synth_proteins: usize,
    pub synth_drugs: usize,
    pub synth_relations: usize,

    /// Relations with fewer undirected edges are dropped by `prepare`.
    pub min_count: usize,
    pub split_ratio: f64,

    pub seed_split: u64,
    pub seed_negative: u64,
    pub seed_init: u64,
    pub seed_synth: u64,

    pub variant: Variant,
    pub epochs: usize,
    pub lr: f64,
    pub resample_negatives: bool,

    // Architecture overrides; unset keys keep the variant's default sizes.
    pub ppm_dims: Option<Vec<usize>>,
    pub ggm_protein_dim: Option<usize>,
    pub ggm_drug_dim: Option<usize>,
    pub ddm_dims: Option<Vec<usize>>,
    pub num_bases: Option<usize>,
    pub df_dim: Option<usize>,
    pub nn_hidden: Option<usize>,

    /// Relations listed at each end of the extremes report.
    pub extremes: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pp: None,
            pd: None,
            dd: None,
            synth: false,
            synth_proteins: 200,
            synth_drugs: 50,
            synth_relations: 5,
            min_count: 500,
            split_ratio: 0.8,
            seed_split: 1,
            seed_negative: 2,
            seed_init: 0,
            seed_synth: 0,
            variant: Variant::TipCat,
            epochs: 100,
            lr: 0.01,
            resample_negatives: true,
            ppm_dims: None,
            ggm_protein_dim: None,
            ggm_drug_dim: None,
            ddm_dims: None,
            num_bases: None,
            df_dim: None,
            nn_hidden: None,
            extremes: 20,
            out: None,
        }
    }
}

/// Where `prepare` reads its graph from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        pp: PathBuf,
        pd: PathBuf,
        dd: PathBuf,
    },
    Synth(SynthConfig),
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig::with_shape(self.synth_proteins, self.synth_drugs, self.synth_relations)
    }

    /// Exactly one of the three edge-list files or `synth` must be given.
    pub fn data_source(&self) -> anyhow::Result<DataSource> {
        let files = [&self.pp, &self.pd, &self.dd];
        let given = files.iter().filter(|f| f.is_some()).count();
        match (self.synth, given) {
            (true, 0) => Ok(DataSource::Synth(self.synth_config())),
            (true, _) => bail!("choose either synthetic data or input files, not both"),
            (false, 3) => Ok(DataSource::Files {
                pp: self.pp.clone().unwrap(),
                pd: self.pd.clone().unwrap(),
                dd: self.dd.clone().unwrap(),
            }),
            (false, 0) => bail!("no input data: pass --pp, --pd and --dd, or --synth"),
            (false, _) => bail!("all three edge lists (pp, pd, dd) are required"),
        }
    }

    pub fn out_dir(&self) -> anyhow::Result<&Path> {
        self.out
            .as_deref()
            .context("no output directory: pass --out or set `out` in the config")
    }

    pub fn model_config(&self) -> anyhow::Result<ModelConfig> {
        let mut m = ModelConfig::for_variant(self.variant);
        let e = &mut m.encoder;
        if let Some(d) = &self.ppm_dims {
            e.ppm_dims = d.clone();
        }
        if let Some(d) = self.ggm_protein_dim {
            e.ggm_protein_dim = d;
        }
        if let Some(d) = self.ggm_drug_dim {
            e.ggm_drug_dim = d;
        }
        if let Some(d) = &self.ddm_dims {
            e.ddm_dims = d.clone();
        }
        if let Some(b) = self.num_bases {
            e.num_bases = b;
        }
        if let Some(d) = self.df_dim {
            e.df_dim = d;
        }
        if let Some(h) = self.nn_hidden {
            m.nn_hidden = h;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn train_config(&self) -> anyhow::Result<TrainConfig> {
        let c = TrainConfig {
            model: self.model_config()?,
            epochs: self.epochs,
            lr: self.lr,
            init_seed: self.seed_init,
            negative_seed: self.seed_negative,
            resample_negatives: self.resample_negatives,
        };
        c.validate()?;
        Ok(c)
    }
}
