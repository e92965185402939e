//! On-disk layout of a prepared split.
//!
//! All files use internal ids; `mapping.csv` translates them back.
//!
//! ```text
//! mapping.csv    kind,original_id,internal_id   (kind: protein | drug | relation)
//! pp.csv         protein_a,protein_b            (a < b)
//! pd.csv         protein,drug
//! train_dd.csv   drug_a,drug_b,relation_id      (a < b)
//! test_pos.csv   drug_a,drug_b,relation_id
//! test_neg.csv   drug_a,drug_b,relation_id      (frozen evaluation negatives)
//! summary.json   counts, informational only
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use sha2::{Digest, Sha256};
use tip_core::graph::IdMap;
use tip_core::{DrugPair, MultiModalGraph, SplitGraph};

/// Files covered by the graph hash, in hashing order.
pub const SPLIT_FILES: [&str; 6] = [
    "mapping.csv",
    "pp.csv",
    "pd.csv",
    "train_dd.csv",
    "test_pos.csv",
    "test_neg.csv",
];

pub type GraphHash = [u8; 32];

fn pairs_csv(header: &str, pairs: &[(usize, usize)]) -> String {
    let mut s = format!("# {header}\n");
    for (a, b) in pairs {
        writeln!(s, "{a},{b}").unwrap();
    }
    s
}

fn triples_csv(by_relation: &[Vec<DrugPair>]) -> String {
    let mut s = String::from("# drug_a,drug_b,relation_id\n");
    for (r, pairs) in by_relation.iter().enumerate() {
        for (a, b) in pairs {
            writeln!(s, "{a},{b},{r}").unwrap();
        }
    }
    s
}

fn mapping_csv(g: &MultiModalGraph) -> String {
    let mut s = String::from("kind,original_id,internal_id\n");
    for (kind, map) in [
        ("protein", g.proteins()),
        ("drug", g.drugs()),
        ("relation", g.relations()),
    ] {
        for (i, name) in map.names().iter().enumerate() {
            writeln!(s, "{kind},{name},{i}").unwrap();
        }
    }
    s
}

/// Renders every split file. Identical splits give identical bytes.
pub fn render(split: &SplitGraph) -> Vec<(&'static str, String)> {
    let g = &split.train;
    vec![
        ("mapping.csv", mapping_csv(g)),
        ("pp.csv", pairs_csv("protein_a,protein_b", g.pp_edges())),
        ("pd.csv", pairs_csv("protein,drug", g.pd_edges())),
        ("train_dd.csv", triples_csv(g.dd_edges_all())),
        ("test_pos.csv", triples_csv(&split.test_positives)),
        ("test_neg.csv", triples_csv(&split.test_negatives)),
    ]
}

pub fn write(dir: &Path, split: &SplitGraph, summary: &serde_json::Value) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, body) in render(split) {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    let path = dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(summary)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// SHA-256 over each split file's name, byte length and contents.
pub fn graph_hash(dir: &Path) -> anyhow::Result<GraphHash> {
    let mut h = Sha256::new();
    for name in SPLIT_FILES {
        let path = dir.join(name);
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finalize().into())
}

fn records<'a>(
    path: &Path,
    text: &'a str,
    arity: usize,
) -> impl Iterator<Item = anyhow::Result<Vec<&'a str>>> + 'a {
    let path = path.to_path_buf();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(move |(n, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != arity {
                bail!(
                    "{}:{}: expected {arity} fields, got `{line}`",
                    path.display(),
                    n + 1
                );
            }
            Ok(f)
        })
}

fn read_ids(dir: &Path, name: &str, arity: usize) -> anyhow::Result<Vec<Vec<usize>>> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    records(&path, &text, arity)
        .map(|rec| {
            rec?.iter()
                .map(|s| {
                    s.parse::<usize>()
                        .with_context(|| format!("{}: `{s}` is not an internal id", path.display()))
                })
                .collect()
        })
        .collect()
}

fn read_mapping(dir: &Path) -> anyhow::Result<(IdMap, IdMap, IdMap)> {
    let path = dir.join("mapping.csv");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut names: [Vec<String>; 3] = Default::default();
    for rec in records(&path, &text, 3).skip(1) {
        let f = rec?;
        let slot = match f[0] {
            "protein" => 0,
            "drug" => 1,
            "relation" => 2,
            other => bail!("{}: unknown node kind `{other}`", path.display()),
        };
        let id: usize = f[2]
            .parse()
            .with_context(|| format!("{}: bad id `{}`", path.display(), f[2]))?;
        if id != names[slot].len() {
            bail!(
                "{}: {} ids are not consecutive at `{}`",
                path.display(),
                f[0],
                f[1]
            );
        }
        names[slot].push(f[1].to_string());
    }
    let [p, d, r] = names;
    Ok((
        IdMap::from_names(p)?,
        IdMap::from_names(d)?,
        IdMap::from_names(r)?,
    ))
}

fn by_relation(
    rows: Vec<Vec<usize>>,
    num_relations: usize,
    what: &str,
) -> anyhow::Result<Vec<Vec<DrugPair>>> {
    let mut out = vec![Vec::new(); num_relations];
    for row in rows {
        let r = row[2];
        if r >= num_relations {
            bail!("{what}: relation id {r} out of range ({num_relations} relations)");
        }
        out[r].push((row[0], row[1]));
    }
    Ok(out)
}

/// Loads a prepared split and its graph hash.
pub fn read(dir: &Path) -> anyhow::Result<(SplitGraph, GraphHash)> {
    let (proteins, drugs, relations) = read_mapping(dir)?;
    let nr = relations.len();
    let pair = |rows: Vec<Vec<usize>>| rows.into_iter().map(|r| (r[0], r[1])).collect::<Vec<_>>();
    let pp = pair(read_ids(dir, "pp.csv", 2)?);
    let pd = pair(read_ids(dir, "pd.csv", 2)?);
    let train = by_relation(read_ids(dir, "train_dd.csv", 3)?, nr, "train_dd.csv")?;
    let test_positives = by_relation(read_ids(dir, "test_pos.csv", 3)?, nr, "test_pos.csv")?;
    let test_negatives = by_relation(read_ids(dir, "test_neg.csv", 3)?, nr, "test_neg.csv")?;
    let train = MultiModalGraph::new(proteins, drugs, relations, pp, pd, train)?;
    let split = SplitGraph {
        train,
        test_positives,
        test_negatives,
    };
    Ok((split, graph_hash(dir)?))
}
