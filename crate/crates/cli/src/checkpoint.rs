//! Single-file checkpoint.
//!
//! ```text
//! magic        8 bytes  "TIPCKPT\n"
//! version      u32
//! config       u64 length + UTF-8 TOML snapshot of the run configuration,
//!              without the output directory
//! graph hash   32 bytes
//! shape        3 × u64  proteins, drugs, relations
//! epochs       u64
//! final loss   f64      NaN when no epoch ran
//! tensors      u64 count, then per tensor:
//!              u64 name length + UTF-8 name, u64 rank, rank × u64 dims,
//!              product(dims) × f64
//! ```
//!
//! Integers and floats are little-endian. Loading rebuilds the architecture
//! from the config snapshot and requires the stored tensor names to match it
//! exactly.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context};
use tip_core::{GraphShape, Tensor, TipModel};

use crate::config::RunConfig;
use crate::prepared::GraphHash;

pub const MAGIC: &[u8; 8] = b"TIPCKPT\n";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub graph_hash: GraphHash,
    pub epochs: usize,
    pub final_loss: f64,
    pub model: TipModel,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        put_bytes(&mut b, self.config.to_toml().as_bytes());
        b.extend_from_slice(&self.graph_hash);
        let s = self.model.shape();
        for n in [s.num_proteins, s.num_drugs, s.num_relations, self.epochs] {
            put_u64(&mut b, n as u64);
        }
        b.extend_from_slice(&self.final_loss.to_le_bytes());
        let params = self.model.params();
        put_u64(&mut b, params.len() as u64);
        for p in params.iter() {
            put_bytes(&mut b, p.name().as_bytes());
            let t = p.value();
            put_u64(&mut b, t.shape().len() as u64);
            for &d in t.shape() {
                put_u64(&mut b, d as u64);
            }
            for v in t.data() {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> anyhow::Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        ensure!(r.take(8)? == MAGIC, "not a checkpoint file");
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        ensure!(
            version == VERSION,
            "checkpoint format version {version} is not supported (expected {VERSION})"
        );
        let text =
            std::str::from_utf8(r.bytes_prefixed()?).context("config snapshot is not UTF-8")?;
        let config = RunConfig::parse(text).context("config snapshot")?;
        let graph_hash: GraphHash = r.take(32)?.try_into().unwrap();
        let shape = GraphShape {
            num_proteins: r.usize()?,
            num_drugs: r.usize()?,
            num_relations: r.usize()?,
        };
        let epochs = r.usize()?;
        let final_loss = f64::from_le_bytes(r.take(8)?.try_into().unwrap());

        let mut model = TipModel::new(config.model_config()?, shape, config.seed_init)?;
        let count = r.usize()?;
        ensure!(
            count == model.params().len(),
            "checkpoint holds {count} tensors, the configured model has {}",
            model.params().len()
        );
        for _ in 0..count {
            let name = std::str::from_utf8(r.bytes_prefixed()?)
                .context("tensor name is not UTF-8")?
                .to_string();
            let rank = r.usize()?;
            let dims = (0..rank)
                .map(|_| r.usize())
                .collect::<anyhow::Result<Vec<_>>>()?;
            let len = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| anyhow!("tensor `{name}` is too large"))?;
            let raw = r.take(
                len.checked_mul(8)
                    .ok_or_else(|| anyhow!("tensor `{name}` is too large"))?,
            )?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let id = model.params().id(&name).ok_or_else(|| {
                anyhow!("checkpoint tensor `{name}` does not belong to the configured model")
            })?;
            model
                .params_mut()
                .set_value(id, Tensor::new(dims, data)?)
                .with_context(|| format!("tensor `{name}`"))?;
        }
        ensure!(
            r.pos == bytes.len(),
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        );
        Ok(Checkpoint {
            config,
            graph_hash,
            epochs,
            final_loss,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, self.to_bytes())
            .with_context(|| format!("writing checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let bytes =
            fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
        Self::from_bytes(&bytes).with_context(|| format!("loading checkpoint {}", path.display()))
    }
}

fn put_u64(b: &mut Vec<u8>, v: u64) {
    b.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(b: &mut Vec<u8>, data: &[u8]) {
    put_u64(b, data.len() as u64);
    b.extend_from_slice(data);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> anyhow::Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            bail!("checkpoint is truncated at byte {}", self.pos);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn usize(&mut self) -> anyhow::Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| anyhow!("length {v} does not fit in memory"))
    }

    fn bytes_prefixed(&mut self) -> anyhow::Result<&'a [u8]> {
        let n = self.usize()?;
        self.take(n)
    }
}
