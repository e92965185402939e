//! Target-major sparse adjacency used by the neighborhood-mean aggregations.

use crate::error::{Result, TipError};

/// Directed edges grouped by target, with the mean normalization `1/c_i`
/// where `c_i` is the number of incoming edges of target `i`.
///
/// Targets without incoming edges have an empty neighbor range and aggregate
/// to a zero row.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    num_sources: usize,
    num_targets: usize,
    offsets: Vec<usize>,
    sources: Vec<usize>,
}

impl Adjacency {
    /// Builds the adjacency from `(source, target)` pairs. Duplicate pairs
    /// count once per occurrence.
    pub fn from_edges<I>(num_sources: usize, num_targets: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (s, t) in edges {
            if s >= num_sources {
                return Err(TipError::Index {
                    what: "edge source",
                    index: s,
                    len: num_sources,
                });
            }
            if t >= num_targets {
                return Err(TipError::Index {
                    what: "edge target",
                    index: t,
                    len: num_targets,
                });
            }
            pairs.push((t, s));
        }
        pairs.sort_unstable();
        let mut offsets = vec![0usize; num_targets + 1];
        for &(t, _) in &pairs {
            offsets[t + 1] += 1;
        }
        for i in 0..num_targets {
            offsets[i + 1] += offsets[i];
        }
        Ok(Adjacency {
            num_sources,
            num_targets,
            offsets,
            sources: pairs.into_iter().map(|(_, s)| s).collect(),
        })
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn num_targets(&self) -> usize {
        self.num_targets
    }

    pub fn num_edges(&self) -> usize {
        self.sources.len()
    }

    pub fn neighbors(&self, target: usize) -> &[usize] {
        &self.sources[self.offsets[target]..self.offsets[target + 1]]
    }

    pub fn degree(&self, target: usize) -> usize {
        self.offsets[target + 1] - self.offsets[target]
    }

    /// Row-wise neighborhood mean of `src` (`num_sources × width`, row-major).
    pub(crate) fn mean_forward(&self, src: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.num_targets * width];
        for t in 0..self.num_targets {
            let nbrs = self.neighbors(t);
            if nbrs.is_empty() {
                continue;
            }
            let w = 1.0 / nbrs.len() as f64;
            let row = &mut out[t * width..(t + 1) * width];
            for &s in nbrs {
                for (o, v) in row.iter_mut().zip(&src[s * width..(s + 1) * width]) {
                    *o += w * v;
                }
            }
        }
        out
    }

    /// Adjoint of [`Adjacency::mean_forward`]: scatters `grad_out / c_i` back
    /// to each neighbor.
    pub(crate) fn mean_backward(&self, grad_out: &[f64], width: usize, grad_src: &mut [f64]) {
        for t in 0..self.num_targets {
            let nbrs = self.neighbors(t);
            if nbrs.is_empty() {
                continue;
            }
            let w = 1.0 / nbrs.len() as f64;
            let g = &grad_out[t * width..(t + 1) * width];
            for &s in nbrs {
                for (o, v) in grad_src[s * width..(s + 1) * width].iter_mut().zip(g) {
                    *o += w * v;
                }
            }
        }
    }
}

/// One normalized message slot of a relational aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationalEntry {
    pub target: usize,
    pub source: usize,
    pub relation: usize,
    /// `1 / c_{i,r}`: inverse in-degree of `target` under `relation`.
    pub weight: f64,
}

/// Multi-relational directed edges, normalized per (target, relation).
///
/// Entries are ordered by target, then relation, then source so every
/// reduction runs in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationalAdjacency {
    num_nodes: usize,
    num_relations: usize,
    entries: Vec<RelationalEntry>,
}

impl RelationalAdjacency {
    /// `edges_by_relation[r]` lists directed `(source, target)` pairs of
    /// relation `r`.
    pub fn from_edges(num_nodes: usize, edges_by_relation: &[Vec<(usize, usize)>]) -> Result<Self> {
        let mut raw = Vec::new();
        for (r, edges) in edges_by_relation.iter().enumerate() {
            for &(s, t) in edges {
                for (what, idx) in [("edge source", s), ("edge target", t)] {
                    if idx >= num_nodes {
                        return Err(TipError::Index {
                            what,
                            index: idx,
                            len: num_nodes,
                        });
                    }
                }
                raw.push((t, r, s));
            }
        }
        raw.sort_unstable();
        let mut entries = Vec::with_capacity(raw.len());
        let mut start = 0;
        while start < raw.len() {
            let (t, r, _) = raw[start];
            let mut end = start;
            while end < raw.len() && raw[end].0 == t && raw[end].1 == r {
                end += 1;
            }
            let weight = 1.0 / (end - start) as f64;
            entries.extend(raw[start..end].iter().map(|&(target, relation, source)| {
                RelationalEntry {
                    target,
                    source,
                    relation,
                    weight,
                }
            }));
            start = end;
        }
        Ok(RelationalAdjacency {
            num_nodes,
            num_relations: edges_by_relation.len(),
            entries,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn entries(&self) -> &[RelationalEntry] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_endpoints() {
        assert!(matches!(
            Adjacency::from_edges(2, 2, [(0, 2)]),
            Err(TipError::Index { .. })
        ));
        assert!(RelationalAdjacency::from_edges(2, &[vec![(5, 0)]]).is_err());
    }

    #[test]
    fn degrees_and_neighbors() {
        let adj = Adjacency::from_edges(3, 2, [(2, 0), (0, 0), (1, 1)]).unwrap();
        assert_eq!(adj.neighbors(0), &[0, 2]);
        assert_eq!(adj.degree(1), 1);
        assert_eq!(adj.num_edges(), 3);
    }

    #[test]
    fn relational_weights_are_per_relation_in_degree() {
        let adj =
            RelationalAdjacency::from_edges(3, &[vec![(1, 0), (2, 0)], vec![(1, 0)]]).unwrap();
        let w: Vec<_> = adj
            .entries()
            .iter()
            .map(|e| (e.relation, e.weight))
            .collect();
        assert_eq!(w, vec![(0, 0.5), (0, 0.5), (1, 1.0)]);
    }
}
