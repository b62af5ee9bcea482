//! Directed flag complexes.
//!
//! A `d`-simplex is an ordered tuple `(v_0, ..., v_d)` with an edge
//! `v_i -> v_j` for every `i < j`. Simplices are enumerated by sink
//! extension: a simplex grows by appending any vertex that is a common
//! out-neighbour of all of its vertices.

use rayon::prelude::*;

use crate::digraph::DirectedGraph;

/// Fixed-width bitset over vertices.
#[derive(Clone)]
struct VertexSet {
    words: Vec<u64>,
}

impl VertexSet {
    fn from_sorted(n: usize, members: &[u32]) -> Self {
        let mut words = vec![0u64; n.div_ceil(64)];
        for &v in members {
            words[v as usize / 64] |= 1 << (v % 64);
        }
        Self { words }
    }

    fn intersect_into(&self, other: &Self, out: &mut Self) -> bool {
        let mut any = 0;
        for ((o, a), b) in out.words.iter_mut().zip(&self.words).zip(&other.words) {
            *o = a & b;
            any |= *o;
        }
        any != 0
    }

    fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros();
                w &= w - 1;
                Some((i * 64) as u32 + bit)
            })
        })
    }
}

/// The directed flag complex of a graph, truncated at `max_dim`.
///
/// Within each dimension simplices are stored flat (stride `d + 1`) in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedFlagComplex {
    graph: DirectedGraph,
    layers: Vec<Vec<u32>>,
    max_dim: usize,
    truncated: bool,
}

impl DirectedFlagComplex {
    /// Enumerates every simplex of dimension at most `max_dim`.
    pub fn build(g: &DirectedGraph, max_dim: usize) -> Self {
        let n = g.vertex_count();
        let out_sets: Vec<VertexSet> = (0..n)
            .map(|v| VertexSet::from_sorted(n, g.out_neighbors(v)))
            .collect();

        let per_root: Vec<Vec<Vec<u32>>> = (0..n)
            .into_par_iter()
            .map(|root| {
                let mut layers = vec![Vec::new(); max_dim + 1];
                let mut prefix = vec![root as u32];
                let mut scratch: Vec<VertexSet> = (0..max_dim)
                    .map(|_| VertexSet {
                        words: vec![0; n.div_ceil(64)],
                    })
                    .collect();
                layers[0].push(root as u32);
                if max_dim > 0 {
                    extend(&out_sets[root], &out_sets, &mut prefix, &mut layers, &mut scratch, 1);
                }
                layers
            })
            .collect();

        let mut layers: Vec<Vec<u32>> = vec![Vec::new(); max_dim + 1];
        for root_layers in per_root {
            for (d, chunk) in root_layers.into_iter().enumerate() {
                layers[d].extend(chunk);
            }
        }
        let truncated = !layers[max_dim].is_empty() && max_dim + 1 < n.max(1);
        Self {
            graph: g.clone(),
            layers,
            max_dim,
            truncated,
        }
    }

    /// The underlying graph.
    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    /// Highest dimension enumerated.
    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    /// Whether simplices may exist above `max_dim`. A complex whose top
    /// layer is empty is known to be complete.
    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn count(&self, dim: usize) -> usize {
        self.layers
            .get(dim)
            .map_or(0, |layer| layer.len() / (dim + 1))
    }

    /// Simplex counts for dimensions `0..=max_dim`.
    pub fn counts(&self) -> Vec<u64> {
        (0..=self.max_dim).map(|d| self.count(d) as u64).collect()
    }

    pub fn simplex(&self, dim: usize, index: usize) -> &[u32] {
        let w = dim + 1;
        &self.layers[dim][index * w..(index + 1) * w]
    }

    pub fn simplices(&self, dim: usize) -> impl Iterator<Item = &[u32]> + '_ {
        self.layers[dim].chunks_exact(dim + 1)
    }

    /// Index of `tuple` among the simplices of its dimension.
    pub fn index_of(&self, tuple: &[u32]) -> Option<usize> {
        let dim = tuple.len().checked_sub(1)?;
        let layer = self.layers.get(dim)?;
        let (mut lo, mut hi) = (0, layer.len() / tuple.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.simplex(dim, mid).cmp(tuple) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Indices of the `dim + 1` faces of a simplex; face `i` drops vertex `i`.
    pub fn faces(&self, dim: usize, index: usize) -> Vec<usize> {
        assert!(dim >= 1, "vertices have no faces");
        let s = self.simplex(dim, index);
        let mut face = Vec::with_capacity(dim);
        (0..=dim)
            .map(|i| {
                face.clear();
                face.extend(s.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v));
                self.index_of(&face).expect("flag complex is closed under faces")
            })
            .collect()
    }
}

fn extend(
    candidates: &VertexSet,
    out_sets: &[VertexSet],
    prefix: &mut Vec<u32>,
    layers: &mut [Vec<u32>],
    scratch: &mut [VertexSet],
    dim: usize,
) {
    let (here, deeper) = scratch.split_first_mut().expect("scratch per level");
    for v in candidates.iter() {
        prefix.push(v);
        layers[dim].extend_from_slice(prefix);
        if dim + 1 < layers.len() && candidates.intersect_into(&out_sets[v as usize], here) {
            extend(&*here, out_sets, prefix, layers, deeper, dim + 1);
        }
        prefix.pop();
    }
}
