//! Planted-community generator for desk-scale experiments.
//!
//! Proteins and drugs are split into communities. Protein-protein edges are
//! dense inside a community and sparse across; each drug targets proteins of
//! its own community. Every relation owns a few community pairs, and a drug
//! pair carries that relation with probability `pair_prob` when its two
//! communities form one of those pairs (`noise_prob` otherwise). Relational
//! signal therefore travels along protein → drug → drug-drug structure.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TipError};
use crate::graph::{IdMap, MultiModalGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_proteins: usize,
    pub num_drugs: usize,
    pub num_relations: usize,
    pub num_communities: usize,
    pub pp_in_prob: f64,
    pub pp_out_prob: f64,
    pub targets_per_drug: usize,
    pub patterns_per_relation: usize,
    pub pair_prob: f64,
    pub noise_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_proteins: 200,
            num_drugs: 50,
            num_relations: 5,
            num_communities: 5,
            pp_in_prob: 0.1,
            pp_out_prob: 0.002,
            targets_per_drug: 3,
            patterns_per_relation: 2,
            pair_prob: 0.6,
            noise_prob: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn with_shape(num_proteins: usize, num_drugs: usize, num_relations: usize) -> Self {
        SynthConfig {
            num_proteins,
            num_drugs,
            num_relations,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("num_proteins", self.num_proteins),
            ("num_drugs", self.num_drugs),
            ("num_relations", self.num_relations),
            ("num_communities", self.num_communities),
            ("patterns_per_relation", self.patterns_per_relation),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TipError::Config(format!("{name} must be positive")));
            }
        }
        let k = self.num_communities;
        if self.patterns_per_relation > k * (k + 1) / 2 {
            return Err(TipError::Config(format!(
                "{} patterns requested but only {} community pairs exist",
                self.patterns_per_relation,
                k * (k + 1) / 2
            )));
        }
        for (name, p) in [
            ("pp_in_prob", self.pp_in_prob),
            ("pp_out_prob", self.pp_out_prob),
            ("pair_prob", self.pair_prob),
            ("noise_prob", self.noise_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(TipError::Config(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        Ok(())
    }
}

/// A generated graph together with the structure that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGraph {
    pub graph: MultiModalGraph,
    pub protein_community: Vec<usize>,
    pub drug_community: Vec<usize>,
    /// Per relation, the unordered community pairs `(c1 <= c2)` it links.
    pub patterns: Vec<Vec<(usize, usize)>>,
    pub config: SynthConfig,
}

impl SyntheticGraph {
    pub fn is_compatible(&self, relation: usize, a: usize, b: usize) -> bool {
        let (ca, cb) = (self.drug_community[a], self.drug_community[b]);
        let key = (ca.min(cb), ca.max(cb));
        self.patterns[relation].contains(&key)
    }

    /// Number of unordered drug pairs compatible with `relation`.
    pub fn compatible_pairs(&self, relation: usize) -> usize {
        let n = self.drug_community.len();
        (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.is_compatible(relation, a, b))
            .count()
    }

    /// Expected number of undirected drug-drug edges over all relations.
    pub fn expected_dd_edges(&self) -> f64 {
        let n = self.drug_community.len();
        let total = (n * n.saturating_sub(1) / 2) as f64;
        (0..self.patterns.len())
            .map(|r| {
                let c = self.compatible_pairs(r) as f64;
                c * self.config.pair_prob + (total - c) * self.config.noise_prob
            })
            .sum()
    }
}

fn balanced_assignment(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut c: Vec<usize> = (0..n).map(|i| i % k).collect();
    c.shuffle(rng);
    c
}

pub fn synth_graph(config: &SynthConfig, seed: u64) -> Result<SyntheticGraph> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = config.num_communities;
    let protein_community = balanced_assignment(config.num_proteins, k, &mut rng);
    let drug_community = balanced_assignment(config.num_drugs, k, &mut rng);

    let mut pp = Vec::new();
    for a in 0..config.num_proteins {
        for b in (a + 1)..config.num_proteins {
            let p = if protein_community[a] == protein_community[b] {
                config.pp_in_prob
            } else {
                config.pp_out_prob
            };
            if rng.gen_bool(p) {
                pp.push((a, b));
            }
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (p, &c) in protein_community.iter().enumerate() {
        members[c].push(p);
    }
    let mut pd = Vec::new();
    for (d, &c) in drug_community.iter().enumerate() {
        let pool = &members[c];
        for &p in pool.choose_multiple(&mut rng, config.targets_per_drug.min(pool.len())) {
            pd.push((p, d));
        }
    }

    let all_patterns: Vec<(usize, usize)> =
        (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
    let mut patterns = Vec::with_capacity(config.num_relations);
    for _ in 0..config.num_relations {
        let mut chosen: Vec<_> = all_patterns
            .choose_multiple(&mut rng, config.patterns_per_relation)
            .copied()
            .collect();
        chosen.sort_unstable();
        patterns.push(chosen);
    }

    let mut dd = vec![Vec::new(); config.num_relations];
    for (r, pats) in patterns.iter().enumerate() {
        for a in 0..config.num_drugs {
            for b in (a + 1)..config.num_drugs {
                let (ca, cb) = (drug_community[a], drug_community[b]);
                let p = if pats.contains(&(ca.min(cb), ca.max(cb))) {
                    config.pair_prob
                } else {
                    config.noise_prob
                };
                if rng.gen_bool(p) {
                    dd[r].push((a, b));
                }
            }
        }
    }

    let name = |prefix: &str, n: usize| {
        IdMap::from_names((0..n).map(|i| format!("{prefix}{i}"))).expect("unique names")
    };
    let graph = MultiModalGraph::new(
        name("P", config.num_proteins),
        name("D", config.num_drugs),
        name("SE", config.num_relations),
        pp,
        pd,
        dd,
    )?;
    Ok(SyntheticGraph {
        graph,
        protein_community,
        drug_community,
        patterns,
        config: config.clone(),
    })
}
