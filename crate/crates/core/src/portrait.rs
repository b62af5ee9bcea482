//! Network portraits and Portrait Divergence.
//!
//! `B[l][k]` counts the vertices that have exactly `k` vertices at
//! out-distance `l`. Portrait Divergence is the base-2 Jensen-Shannon
//! divergence between the joint distributions `P(k, l) ∝ k · B[l][k]`.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digraph::{DirectedGraph, UNREACHED};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Portrait {
    n: usize,
    /// `rows[l][k]` for `l = 0..=diameter`, `k = 0..=n`.
    rows: Vec<Vec<u64>>,
}

/// Sparse row of a portrait, as emitted in JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortraitRow {
    pub l: usize,
    pub counts: BTreeMap<usize, u64>,
}

impl Portrait {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Largest finite distance; `None` for the graph on no vertices.
    pub fn diameter(&self) -> Option<usize> {
        self.rows.len().checked_sub(1)
    }

    pub fn get(&self, l: usize, k: usize) -> u64 {
        self.rows.get(l).and_then(|r| r.get(k)).copied().unwrap_or(0)
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn to_sparse(&self) -> Vec<PortraitRow> {
        self.rows
            .iter()
            .enumerate()
            .map(|(l, row)| PortraitRow {
                l,
                counts: row.iter().enumerate().filter(|(_, &c)| c > 0).map(|(k, &c)| (k, c)).collect(),
            })
            .collect()
    }

    pub fn from_sparse(n: usize, rows: &[PortraitRow]) -> Result<Self> {
        let mut dense = vec![vec![0u64; n + 1]; rows.len()];
        for (i, row) in rows.iter().enumerate() {
            if row.l != i {
                return Err(Error::BadParam(format!("portrait row {i} labelled l = {}", row.l)));
            }
            for (&k, &c) in &row.counts {
                *dense[i].get_mut(k).ok_or(Error::VertexOutOfRange { vertex: k, n })? = c;
            }
        }
        Ok(Self { n, rows: dense })
    }
}

/// Shell sizes `s^l_v` for `l = 0..=eccentricity(v)`.
fn shell_sizes(g: &DirectedGraph, v: usize, dist: &mut [u32], queue: &mut VecDeque<u32>) -> Vec<u32> {
    g.bfs_into(v, dist, queue);
    let mut shells = Vec::new();
    for &d in dist.iter().filter(|&&d| d != UNREACHED) {
        let d = d as usize;
        if shells.len() <= d {
            shells.resize(d + 1, 0);
        }
        shells[d] += 1;
    }
    shells
}

pub fn portrait(g: &DirectedGraph) -> Portrait {
    let n = g.vertex_count();
    let shells: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![UNREACHED; n], VecDeque::new()),
            |(dist, queue), v| shell_sizes(g, v, dist, queue),
        )
        .collect();
    let rows_len = shells.iter().map(Vec::len).max().unwrap_or(0);
    let mut rows = vec![vec![0u64; n + 1]; rows_len];
    for s in &shells {
        for (l, row) in rows.iter_mut().enumerate() {
            row[s.get(l).copied().unwrap_or(0) as usize] += 1;
        }
    }
    Portrait { n, rows }
}

/// A distribution over `(l, k)` cells, sparse and sorted by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    cells: Vec<((usize, usize), f64)>,
}

impl JointDistribution {
    /// Builds from `(cell, weight)` pairs, normalizing the weights.
    pub fn from_weights(mut cells: Vec<((usize, usize), f64)>) -> Result<Self> {
        cells.retain(|&(_, w)| w > 0.0);
        cells.sort_by(|a, b| a.0.cmp(&b.0));
        let total: f64 = cells.iter().map(|&(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::NotNormalized(total));
        }
        cells.iter_mut().for_each(|(_, w)| *w /= total);
        Ok(Self { cells })
    }

    /// `P(k, l)`.
    pub fn prob(&self, k: usize, l: usize) -> f64 {
        self.cells
            .binary_search_by(|&(c, _)| c.cmp(&(l, k)))
            .map_or(0.0, |i| self.cells[i].1)
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells.iter().map(|&((l, k), p)| (k, l, p))
    }
}

/// `P(k, l) = k · B[l][k] / Σ k · B[l][k]`, the probability that a uniformly
/// chosen ordered pair at finite distance `l` starts at a vertex with `k`
/// vertices at that distance.
pub fn portrait_distribution(portrait: &Portrait) -> Result<JointDistribution> {
    if portrait.n == 0 {
        return Err(Error::EmptyGraph);
    }
    let cells = portrait
        .rows
        .iter()
        .enumerate()
        .flat_map(|(l, row)| {
            row.iter()
                .enumerate()
                .map(move |(k, &count)| ((l, k), (k as u64 * count) as f64))
        })
        .collect();
    JointDistribution::from_weights(cells)
}

/// Merges two sparse distributions cell by cell.
fn aligned<'a>(p: &'a JointDistribution, q: &'a JointDistribution) -> Vec<(f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let (a, b) = (&p.cells, &q.cells);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x.0 == y.0 => {
                out.push((x.1, y.1));
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.0 < y.0 => {
                out.push((x.1, 0.0));
                i += 1;
            }
            (Some(x), None) => {
                out.push((x.1, 0.0));
                i += 1;
            }
            (_, Some(y)) => {
                out.push((0.0, y.1));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// `KL(P ‖ Q)` in bits.
pub fn kl_divergence(p: &JointDistribution, q: &JointDistribution) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in aligned(p, q) {
        if x > 0.0 {
            if y == 0.0 {
                return Err(Error::DomainMismatch);
            }
            total += x * (x / y).log2();
        }
    }
    Ok(total)
}

/// Base-2 Jensen-Shannon divergence, in `[0, 1]`.
pub fn js_divergence(p: &JointDistribution, q: &JointDistribution) -> f64 {
    let mut total = 0.0;
    for (x, y) in aligned(p, q) {
        let m = 0.5 * (x + y);
        if x > 0.0 {
            total += 0.5 * x * (x / m).log2();
        }
        if y > 0.0 {
            total += 0.5 * y * (y / m).log2();
        }
    }
    total.clamp(0.0, 1.0)
}

pub fn portrait_divergence(g1: &DirectedGraph, g2: &DirectedGraph) -> Result<f64> {
    let p = portrait_distribution(&portrait(g1))?;
    let q = portrait_distribution(&portrait(g2))?;
    Ok(js_divergence(&p, &q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::fixtures::*;
    use proptest::prelude::*;

    fn sparse(p: &Portrait, l: usize) -> Vec<(usize, u64)> {
        p.rows[l].iter().enumerate().filter(|(_, &c)| c > 0).map(|(k, &c)| (k, c)).collect()
    }

    #[test]
    fn portrait_examples() {
        let k3 = portrait(&complete(3));
        assert_eq!((k3.get(0, 1), k3.get(1, 2)), (3, 3));
        assert_eq!(k3.diameter(), Some(1));

        let path = portrait(&path3());
        assert_eq!(sparse(&path, 0), vec![(1, 3)]);
        assert_eq!(sparse(&path, 1), vec![(0, 1), (1, 2)]);
        assert_eq!(sparse(&path, 2), vec![(0, 2), (1, 1)]);

        let cyc = portrait(&cycle3());
        assert_eq!((cyc.get(0, 1), cyc.get(1, 1), cyc.get(2, 1)), (3, 3, 3));
    }

    #[test]
    fn distribution_examples() {
        let p = portrait_distribution(&portrait(&cycle3())).unwrap();
        for l in 0..3 {
            assert!((p.prob(1, l) - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = portrait_distribution(&portrait(&complete(3))).unwrap();
        assert!((p.prob(1, 0) - 3.0 / 9.0).abs() < 1e-15);
        assert!((p.prob(2, 1) - 6.0 / 9.0).abs() < 1e-15);
        assert_eq!(p.prob(0, 1), 0.0);
        assert!(matches!(
            portrait_distribution(&portrait(&DirectedGraph::empty(0))),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn divergence_hand_value() {
        // 3-cycle: P = (1/3, 1/3, 1/3) at l = 0, 1, 2 with k = 1.
        // path:    P = (1/2, 1/3, 1/6) on the same cells.
        let m = [5.0 / 12.0, 1.0 / 3.0, 1.0 / 4.0];
        let p = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let q = [0.5, 1.0 / 3.0, 1.0 / 6.0];
        let kl = |a: &[f64; 3]| -> f64 { (0..3).map(|i| a[i] * (a[i] / m[i]).log2()).sum() };
        let expected = 0.5 * kl(&p) + 0.5 * kl(&q);
        // (1/6) log2(16/15) + (1/4) log2(6/5) + (1/12) log2(2/3)
        let closed = (16.0f64 / 15.0).log2() / 6.0 + (1.2f64).log2() / 4.0 + (2.0f64 / 3.0).log2() / 12.0;
        assert!((expected - closed).abs() < 1e-15);
        let pd = portrait_divergence(&cycle3(), &path3()).unwrap();
        assert!((pd - expected).abs() < 1e-14, "{pd} vs {expected}");
    }

    #[test]
    fn js_extremes_and_kl_domain() {
        let a = JointDistribution::from_weights(vec![((0, 1), 1.0)]).unwrap();
        let b = JointDistribution::from_weights(vec![((1, 1), 1.0)]).unwrap();
        assert_eq!(js_divergence(&a, &b), 1.0);
        assert_eq!(js_divergence(&a, &a), 0.0);
        assert!(matches!(kl_divergence(&a, &b), Err(Error::DomainMismatch)));
        assert_eq!(kl_divergence(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn first_row_is_out_degree_count() {
        let g = crate::random::gen_er(20, 0.2, 3).unwrap();
        let p = portrait(&g);
        let mut counts = vec![0u64; 21];
        for v in 0..20 {
            counts[g.out_neighbors(v).len()] += 1;
        }
        assert_eq!(p.rows[1], counts);
    }

    #[test]
    fn sparse_round_trip() {
        let g = crate::random::gen_gr(15, 0.4, 1).unwrap();
        let p = portrait(&g);
        assert_eq!(Portrait::from_sparse(15, &p.to_sparse()).unwrap(), p);
    }

    proptest! {
        #[test]
        fn portrait_invariants(seed in 0u64..500, n in 1usize..25, rho in 0.0f64..0.6) {
            let g = crate::random::gen_er(n, rho, seed).unwrap();
            let p = portrait(&g);
            for row in p.rows() {
                prop_assert_eq!(row.iter().sum::<u64>(), n as u64);
            }
            prop_assert_eq!(p.get(0, 1), n as u64);
            let weight: u64 = p.rows().iter().map(|r| r.iter().enumerate().map(|(k, &c)| k as u64 * c).sum::<u64>()).sum();
            let reachable: u64 = (0..n).map(|v| g.bfs_distances(v).unwrap().iter().filter(|d| d.is_some()).count() as u64).sum();
            prop_assert_eq!(weight, reachable);

            let perm = crate::random::random_permutation(n, seed + 1);
            let edges: Vec<(usize, usize)> = g.edges().map(|(u, v)| (perm[u], perm[v])).collect();
            let h = DirectedGraph::from_edges(n, edges).unwrap();
            prop_assert_eq!(portrait(&h), p);
        }

        #[test]
        fn divergence_bounds(s in 0u64..500) {
            let g = crate::random::gen_er(12, 0.25, s).unwrap();
            let h = crate::random::gen_gr(12, 0.5, s).unwrap();
            let a = portrait_divergence(&g, &h).unwrap();
            let b = portrait_divergence(&h, &g).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert_eq!(portrait_divergence(&g, &g).unwrap(), 0.0);
        }

        #[test]
        fn strongly_connected_normalizer(n in 2usize..15) {
            // complete digraphs are strongly connected: Σ k·B = n²
            let p = portrait(&complete(n));
            let weight: u64 = p.rows().iter().map(|r| r.iter().enumerate().map(|(k, &c)| k as u64 * c).sum::<u64>()).sum();
            prop_assert_eq!(weight, (n * n) as u64);
        }
    }
}
