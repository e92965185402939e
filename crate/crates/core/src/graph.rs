//! The protein/drug multimodal graph: ingestion, rare-relation filtering,
//! per-relation train/test splitting and negative sampling.
//!
//! Undirected edges (protein-protein, drug-drug) are stored once in canonical
//! `(low, high)` order; [`MultiModalGraph::pp_directed`] and friends expand
//! them to both orientations for message passing. Protein→drug edges are
//! directed and stored as `(protein, drug)`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TipError};

/// An unordered drug pair in canonical `(low, high)` order.
pub type DrugPair = (usize, usize);

pub fn canonical(a: usize, b: usize) -> DrugPair {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Bidirectional map between external string ids and dense internal ids,
/// assigned in order of first sight.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// `0..n` rendered as strings.
    pub fn sequential(n: usize) -> Self {
        let mut m = IdMap::new();
        for i in 0..n {
            m.intern(&i.to_string());
        }
        m
    }

    pub fn from_names<I: IntoIterator<Item = String>>(names: I) -> Result<Self> {
        let mut m = IdMap::new();
        for name in names {
            if m.index.contains_key(&name) {
                return Err(TipError::Contract(format!("duplicate id `{name}`")));
            }
            m.intern(&name);
        }
        Ok(m)
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Immutable container for the three subgraphs.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModalGraph {
    proteins: IdMap,
    drugs: IdMap,
    relations: IdMap,
    pp_edges: Vec<(usize, usize)>,
    pd_edges: Vec<(usize, usize)>,
    dd_edges: Vec<Vec<DrugPair>>,
}

fn check_range(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(TipError::Index { what, index, len });
    }
    Ok(())
}

impl MultiModalGraph {
    /// Validates and normalizes the edge sets: endpoints must be in range,
    /// undirected edges are canonicalized, duplicates and self-loops dropped.
    pub fn new(
        proteins: IdMap,
        drugs: IdMap,
        relations: IdMap,
        pp_edges: impl IntoIterator<Item = (usize, usize)>,
        pd_edges: impl IntoIterator<Item = (usize, usize)>,
        dd_edges: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        let (np, nd) = (proteins.len(), drugs.len());
        if dd_edges.len() != relations.len() {
            return Err(TipError::Contract(format!(
                "{} relation ids but {} drug-drug edge lists",
                relations.len(),
                dd_edges.len()
            )));
        }
        let mut pp = BTreeSet::new();
        for (a, b) in pp_edges {
            check_range("protein", a, np)?;
            check_range("protein", b, np)?;
            if a != b {
                pp.insert(canonical(a, b));
            }
        }
        let mut pd = BTreeSet::new();
        for (p, d) in pd_edges {
            check_range("protein", p, np)?;
            check_range("drug", d, nd)?;
            pd.insert((p, d));
        }
        let mut dd = Vec::with_capacity(dd_edges.len());
        for edges in dd_edges {
            let mut set = BTreeSet::new();
            for (a, b) in edges {
                check_range("drug", a, nd)?;
                check_range("drug", b, nd)?;
                if a != b {
                    set.insert(canonical(a, b));
                }
            }
            dd.push(set.into_iter().collect());
        }
        Ok(MultiModalGraph {
            proteins,
            drugs,
            relations,
            pp_edges: pp.into_iter().collect(),
            pd_edges: pd.into_iter().collect(),
            dd_edges: dd,
        })
    }

    /// Graph with sequential string ids `"0".."n-1"` for every node kind.
    pub fn from_counts(
        num_proteins: usize,
        num_drugs: usize,
        pp_edges: impl IntoIterator<Item = (usize, usize)>,
        pd_edges: impl IntoIterator<Item = (usize, usize)>,
        dd_edges: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        let relations = IdMap::sequential(dd_edges.len());
        Self::new(
            IdMap::sequential(num_proteins),
            IdMap::sequential(num_drugs),
            relations,
            pp_edges,
            pd_edges,
            dd_edges,
        )
    }

    pub fn num_proteins(&self) -> usize {
        self.proteins.len()
    }

    pub fn num_drugs(&self) -> usize {
        self.drugs.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn proteins(&self) -> &IdMap {
        &self.proteins
    }

    pub fn drugs(&self) -> &IdMap {
        &self.drugs
    }

    pub fn relations(&self) -> &IdMap {
        &self.relations
    }

    /// Undirected protein pairs, each once, canonical order.
    pub fn pp_edges(&self) -> &[(usize, usize)] {
        &self.pp_edges
    }

    /// Protein-protein edges in both orientations.
    pub fn pp_directed(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pp_edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)])
    }

    /// Directed `(protein, drug)` edges.
    pub fn pd_edges(&self) -> &[(usize, usize)] {
        &self.pd_edges
    }

    /// Undirected drug pairs of one relation.
    pub fn dd_edges(&self, relation: usize) -> &[DrugPair] {
        &self.dd_edges[relation]
    }

    pub fn dd_edges_all(&self) -> &[Vec<DrugPair>] {
        &self.dd_edges
    }

    /// Per relation, drug-drug edges in both orientations.
    pub fn dd_directed(&self) -> Vec<Vec<(usize, usize)>> {
        self.dd_edges
            .iter()
            .map(|edges| edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect())
            .collect()
    }

    pub fn num_dd_edges(&self) -> usize {
        self.dd_edges.iter().map(Vec::len).sum()
    }

    /// Same nodes and relations, different drug-drug edges.
    pub fn with_dd_edges(&self, dd_edges: Vec<Vec<DrugPair>>) -> Result<Self> {
        Self::new(
            self.proteins.clone(),
            self.drugs.clone(),
            self.relations.clone(),
            self.pp_edges.iter().copied(),
            self.pd_edges.iter().copied(),
            dd_edges,
        )
    }

    /// Drops relations with fewer than `min_count` undirected edges and
    /// reindexes the survivors in their original order. Node sets are kept.
    pub fn filter_rare_relations(&self, min_count: usize) -> MultiModalGraph {
        let mut relations = IdMap::new();
        let mut dd = Vec::new();
        for (r, edges) in self.dd_edges.iter().enumerate() {
            if edges.len() >= min_count {
                relations.intern(self.relations.name(r));
                dd.push(edges.clone());
            }
        }
        MultiModalGraph {
            proteins: self.proteins.clone(),
            drugs: self.drugs.clone(),
            relations,
            pp_edges: self.pp_edges.clone(),
            pd_edges: self.pd_edges.clone(),
            dd_edges: dd,
        }
    }
}

/// Reads the three comma-separated edge lists.
///
/// Layout: pp `protein_a,protein_b`; pd `protein,drug`; dd
/// `drug_a,drug_b,relation_id`. Blank lines and lines starting with `#` are
/// skipped. Ids are assigned on first sight, proteins and drugs in separate
/// namespaces, reading pp then pd then dd.
pub fn load_edge_lists(pp_path: &Path, pd_path: &Path, dd_path: &Path) -> Result<MultiModalGraph> {
    let mut proteins = IdMap::new();
    let mut drugs = IdMap::new();
    let mut relations = IdMap::new();

    let mut pp = Vec::new();
    for_each_record(pp_path, 2, |f| {
        pp.push((proteins.intern(f[0]), proteins.intern(f[1])));
    })?;
    let mut pd = Vec::new();
    for_each_record(pd_path, 2, |f| {
        pd.push((proteins.intern(f[0]), drugs.intern(f[1])));
    })?;
    let mut dd: Vec<Vec<(usize, usize)>> = Vec::new();
    for_each_record(dd_path, 3, |f| {
        let (a, b) = (drugs.intern(f[0]), drugs.intern(f[1]));
        let r = relations.intern(f[2]);
        if r == dd.len() {
            dd.push(Vec::new());
        }
        dd[r].push((a, b));
    })?;
    MultiModalGraph::new(proteins, drugs, relations, pp, pd, dd)
}

fn for_each_record(path: &Path, arity: usize, mut f: impl FnMut(&[&str])) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| TipError::io(path, e))?;
    let mut fields = Vec::with_capacity(arity);
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        fields.clear();
        fields.extend(line.split(',').map(str::trim));
        if fields.len() != arity || fields.iter().any(|s| s.is_empty()) {
            return Err(TipError::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: format!("expected {arity} non-empty comma-separated fields, got `{line}`"),
            });
        }
        f(&fields);
    }
    Ok(())
}

/// Training graph plus the held-out positives and frozen negatives of every
/// relation.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitGraph {
    pub train: MultiModalGraph,
    pub test_positives: Vec<Vec<DrugPair>>,
    pub test_negatives: Vec<Vec<DrugPair>>,
}

impl SplitGraph {
    pub fn num_relations(&self) -> usize {
        self.train.num_relations()
    }

    /// Train and test positives of a relation together.
    pub fn all_positives(&self, relation: usize) -> impl Iterator<Item = DrugPair> + '_ {
        self.train
            .dd_edges(relation)
            .iter()
            .chain(&self.test_positives[relation])
            .copied()
    }
}

/// Number of held-out edges for a relation of `n` edges at training ratio
/// `ratio`: `floor((1 - ratio) · n)`, tolerant to binary rounding.
pub fn test_count(n: usize, ratio: f64) -> usize {
    (((1.0 - ratio) * n as f64) + 1e-9).floor() as usize
}

/// Per-relation uniform split of undirected drug-drug edges. A held-out
/// edge leaves in both orientations since each is stored once.
///
/// Test negatives are drawn immediately from `negative_seed` (stream 0),
/// avoiding every train and test positive of the relation.
pub fn split_train_test(
    g: &MultiModalGraph,
    ratio: f64,
    split_seed: u64,
    negative_seed: u64,
) -> Result<SplitGraph> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(TipError::Config(format!(
            "split ratio {ratio} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
    let mut train = Vec::with_capacity(g.num_relations());
    let mut test = Vec::with_capacity(g.num_relations());
    for r in 0..g.num_relations() {
        let edges = g.dd_edges(r);
        if edges.len() < 2 {
            return Err(TipError::Contract(format!(
                "relation `{}` has {} edge(s); splitting needs at least 2",
                g.relations().name(r),
                edges.len()
            )));
        }
        let mut shuffled = edges.to_vec();
        shuffled.shuffle(&mut rng);
        let n_test = test_count(edges.len(), ratio);
        let mut held: Vec<_> = shuffled[..n_test].to_vec();
        let mut kept: Vec<_> = shuffled[n_test..].to_vec();
        held.sort_unstable();
        kept.sort_unstable();
        test.push(held);
        train.push(kept);
    }
    let train_graph = g.with_dd_edges(train)?;
    let mut neg_rng = negative_rng(negative_seed, 0);
    let test_negatives =
        sample_negatives(&test, g.dd_edges_all(), g.num_drugs(), &mut neg_rng)?.by_relation;
    Ok(SplitGraph {
        train: train_graph,
        test_positives: test,
        test_negatives,
    })
}

/// Deterministic negative-sampling stream. Stream 0 is reserved for frozen
/// test negatives; training epoch `e` uses stream `e + 1`.
pub fn negative_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSampleSet {
    pub by_relation: Vec<Vec<DrugPair>>,
}

const SATURATION: f64 = 0.99;
const MAX_ATTEMPTS: usize = 100_000;

/// One negative per positive in `corrupt`: one endpoint, chosen by a fair
/// coin, is replaced by a uniformly drawn drug; draws repeat until the pair
/// is neither a self-loop nor in `exclude[r]`.
pub fn sample_negatives<R: Rng>(
    corrupt: &[Vec<DrugPair>],
    exclude: &[Vec<DrugPair>],
    num_drugs: usize,
    rng: &mut R,
) -> Result<NegativeSampleSet> {
    if num_drugs < 3 {
        return Err(TipError::Contract(format!(
            "negative sampling needs at least 3 drugs, graph has {num_drugs}"
        )));
    }
    if corrupt.len() != exclude.len() {
        return Err(TipError::Contract(
            "positive and exclusion sets disagree on relation count".into(),
        ));
    }
    let total_pairs = (num_drugs * (num_drugs - 1) / 2) as f64;
    let mut by_relation = Vec::with_capacity(corrupt.len());
    for (r, (positives, excluded)) in corrupt.iter().zip(exclude).enumerate() {
        let known: HashSet<DrugPair> = excluded.iter().map(|&(a, b)| canonical(a, b)).collect();
        if known.len() as f64 >= SATURATION * total_pairs {
            return Err(TipError::Saturated {
                relation: r,
                detail: format!("{} of {} drug pairs are positive", known.len(), total_pairs),
            });
        }
        let mut out = Vec::with_capacity(positives.len());
        for &(a, b) in positives {
            let mut attempts = 0;
            let pair = loop {
                attempts += 1;
                if attempts > MAX_ATTEMPTS {
                    return Err(TipError::Saturated {
                        relation: r,
                        detail: format!("no valid corruption of ({a}, {b}) found"),
                    });
                }
                let keep = if rng.gen_bool(0.5) { a } else { b };
                let other = rng.gen_range(0..num_drugs);
                if other == keep {
                    continue;
                }
                let cand = canonical(keep, other);
                if !known.contains(&cand) {
                    break cand;
                }
            };
            out.push(pair);
        }
        by_relation.push(out);
    }
    Ok(NegativeSampleSet { by_relation })
}
