//! Betti numbers of directed flag complexes over F2.
//!
//! Ranks are taken from coboundary matrices (`rank δ_d = rank ∂_{d+1}`),
//! reduced column by column from dimension 0 upwards with clearing: a
//! `(d+1)`-simplex that is the pivot of a reduced column of `δ_d` has a zero
//! reduced column in `δ_{d+1}` and is skipped. Cofaces are generated from the
//! graph's adjacency bitsets, so dimension `p + 1` is never materialized.
//!
//! With a step budget `eps`, a column that would need more than `eps`
//! column additions is abandoned. Finished nonzero columns have distinct
//! pivots, so they bound the rank from below; a column that reduced to zero
//! is dependent on earlier ones, so `rank ≤ finished + abandoned`. Every
//! Betti number is then reported as an interval.

use serde::{Deserialize, Serialize};

use rustc_hash::{FxHashMap, FxHashSet};

use crate::digraph::DirectedGraph;
use crate::flag::DirectedFlagComplex;

/// Betti numbers for dimensions `0..=p`, each as a closed interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BettiResult {
    pub lower: Vec<u64>,
    pub upper: Vec<u64>,
    /// Step budget used, `None` for an exact run.
    pub eps: Option<u64>,
}

impl BettiResult {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    /// Exact values, if every interval is a single point.
    pub fn exact(&self) -> Option<&[u64]> {
        self.is_exact().then_some(&self.lower[..])
    }

    pub fn widths(&self) -> Vec<u64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    /// Interval midpoints rounded to the nearest integer (halves round up).
    pub fn midpoints(&self) -> Vec<u64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (l + u).div_ceil(2))
            .collect()
    }
}

/// Rank bounds of one boundary matrix after a (possibly budgeted) reduction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct RankBounds {
    finished: u64,
    abandoned: u64,
}

impl RankBounds {
    fn lower(self) -> u64 {
        self.finished
    }

    fn upper(self) -> u64 {
        self.finished + self.abandoned
    }
}

/// Exact Betti numbers in dimensions `0..=p`.
///
/// Only simplices up to dimension `p` are read from `complex`; cofaces in
/// dimension `p + 1` are generated from the graph on the fly.
///
/// # Panics
/// If `complex` stops below dimension `p` while simplices of dimension `p`
/// exist, or if the graph has more than 65 536 vertices.
pub fn betti_numbers(complex: &DirectedFlagComplex, p: usize) -> BettiResult {
    reduce_all(complex, p, None)
}

/// Betti intervals with every column reduction capped at `eps` additions.
/// `eps = None` is the unbounded, exact computation.
pub fn betti_numbers_approx(complex: &DirectedFlagComplex, p: usize, eps: Option<u64>) -> BettiResult {
    reduce_all(complex, p, eps)
}

fn reduce_all(complex: &DirectedFlagComplex, p: usize, eps: Option<u64>) -> BettiResult {
    let graph = complex.graph();
    assert!(
        complex.max_dim() >= p || !complex.is_truncated(),
        "Betti numbers up to dimension {p} need simplices of dimension {p}"
    );
    assert!(graph.vertex_count() <= 1 << 16, "simplex keys hold 16-bit vertices");
    let cofaces = CofaceOracle::new(graph);
    // ranks[d] bounds rank δ_d = rank ∂_{d+1}, for d in 0..=p.
    let mut ranks = vec![RankBounds::default(); p + 1];
    let mut cleared: FxHashSet<Key> = FxHashSet::default();
    for (d, rank) in ranks.iter_mut().enumerate() {
        if d > complex.max_dim() || complex.count(d) == 0 {
            break;
        }
        let (bounds, pivots) = reduce_coboundary(complex, &cofaces, d, &cleared, eps);
        *rank = bounds;
        cleared = pivots;
    }

    let mut lower = Vec::with_capacity(p + 1);
    let mut upper = Vec::with_capacity(p + 1);
    for d in 0..=p {
        let none = RankBounds::default();
        let below = if d == 0 { none } else { ranks[d - 1] };
        let here = ranks[d];
        let g = complex.count(d) as u64;
        upper.push(g - below.lower() - here.lower());
        lower.push(g.saturating_sub(below.upper() + here.upper()));
    }
    BettiResult { lower, upper, eps }
}

/// A simplex packed big-endian, 16 bits per vertex, so that numeric order is
/// lexicographic order among simplices of one dimension.
type Key = u128;

fn pack(tuple: impl IntoIterator<Item = u32>) -> Key {
    tuple.into_iter().fold(0, |acc, v| (acc << 16) | v as Key)
}

struct CofaceOracle {
    words: usize,
    out_bits: Vec<Vec<u64>>,
    in_bits: Vec<Vec<u64>>,
}

impl CofaceOracle {
    fn new(g: &DirectedGraph) -> Self {
        let n = g.vertex_count();
        let words = n.div_ceil(64).max(1);
        let mut out_bits = vec![vec![0u64; words]; n];
        let mut in_bits = vec![vec![0u64; words]; n];
        for (u, v) in g.edges() {
            out_bits[u][v / 64] |= 1 << (v % 64);
            in_bits[v][u / 64] |= 1 << (u % 64);
        }
        Self {
            words,
            out_bits,
            in_bits,
        }
    }

    /// Sorted keys of all cofaces of `simplex`.
    fn cofaces(&self, simplex: &[u32], out: &mut Vec<Key>, scratch: &mut Vec<Vec<u64>>) {
        out.clear();
        let len = simplex.len();
        // suffix[i] = ∩_{j >= i} in(σ_j), with suffix[len] = everything.
        scratch.resize(len + 1, Vec::new());
        scratch[len].clear();
        scratch[len].resize(self.words, u64::MAX);
        for i in (0..len).rev() {
            let (lo, hi) = scratch.split_at_mut(i + 1);
            let inn = &self.in_bits[simplex[i] as usize];
            lo[i].clear();
            lo[i].extend(hi[0].iter().zip(inn).map(|(a, b)| a & b));
        }
        let mut prefix = vec![u64::MAX; self.words];
        for pos in 0..=len {
            if pos > 0 {
                let outs = &self.out_bits[simplex[pos - 1] as usize];
                prefix.iter_mut().zip(outs).for_each(|(a, b)| *a &= b);
            }
            for (w, (&a, &b)) in prefix.iter().zip(&scratch[pos]).enumerate() {
                let mut word = a & b;
                while word != 0 {
                    let v = (w * 64) as u32 + word.trailing_zeros();
                    word &= word - 1;
                    let tuple = simplex[..pos]
                        .iter()
                        .copied()
                        .chain(std::iter::once(v))
                        .chain(simplex[pos..].iter().copied());
                    out.push(pack(tuple));
                }
            }
        }
        out.sort_unstable();
    }
}

/// A finished column of `δ_dim`. Columns that needed no additions are kept
/// as their simplex index and regenerated on demand.
enum Finished {
    Unreduced(u32),
    Reduced(Vec<Key>),
}

/// Reduces `δ_dim` (columns: `dim`-simplices, rows: their cofaces). Returns
/// rank bounds and the set of rows that became pivots of finished columns;
/// those `(dim+1)`-simplices have zero reduced columns in `δ_{dim+1}`.
fn reduce_coboundary(
    complex: &DirectedFlagComplex,
    cofaces: &CofaceOracle,
    dim: usize,
    cleared: &FxHashSet<Key>,
    eps: Option<u64>,
) -> (RankBounds, FxHashSet<Key>) {
    let mut pivot_owner: FxHashMap<Key, u32> = FxHashMap::default();
    let mut finished: Vec<Finished> = Vec::new();
    let mut bounds = RankBounds::default();
    let mut column: Vec<Key> = Vec::new();
    let mut merged: Vec<Key> = Vec::new();
    let mut other: Vec<Key> = Vec::new();
    let mut scratch: Vec<Vec<u64>> = Vec::new();

    for (index, simplex) in complex.simplices(dim).enumerate() {
        if !cleared.is_empty() && cleared.contains(&pack(simplex.iter().copied())) {
            continue;
        }
        cofaces.cofaces(simplex, &mut column, &mut scratch);

        let mut steps = 0u64;
        let mut abandoned = false;
        while let Some(&low) = column.last() {
            let Some(&owner) = pivot_owner.get(&low) else {
                break;
            };
            if eps.is_some_and(|budget| steps >= budget) {
                abandoned = true;
                break;
            }
            let addend = match &finished[owner as usize] {
                Finished::Reduced(col) => &col[..],
                Finished::Unreduced(i) => {
                    cofaces.cofaces(complex.simplex(dim, *i as usize), &mut other, &mut scratch);
                    &other[..]
                }
            };
            xor_sorted(&column, addend, &mut merged);
            std::mem::swap(&mut column, &mut merged);
            steps += 1;
        }

        if abandoned {
            bounds.abandoned += 1;
        } else if let Some(&low) = column.last() {
            pivot_owner.insert(low, finished.len() as u32);
            finished.push(if steps == 0 {
                Finished::Unreduced(index as u32)
            } else {
                Finished::Reduced(column.clone())
            });
            bounds.finished += 1;
        }
    }

    (bounds, pivot_owner.into_keys().collect())
}

/// Symmetric difference of two sorted lists.
fn xor_sorted<T: Ord + Copy>(a: &[T], b: &[T], out: &mut Vec<T>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::fixtures::*;
    use crate::digraph::DirectedGraph;

    fn exact(g: &DirectedGraph, p: usize) -> Vec<u64> {
        let k = DirectedFlagComplex::build(g, p + 1);
        betti_numbers(&k, p).exact().unwrap().to_vec()
    }

    /// Rank over F2 of a dense 0/1 matrix given as bit-packed rows.
    fn dense_rank(mut rows: Vec<Vec<u64>>) -> u64 {
        let width = rows.first().map_or(0, |r| r.len() * 64);
        let mut rank = 0;
        for col in 0..width {
            let (w, b) = (col / 64, col % 64);
            let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][w] >> b & 1 == 1) else {
                continue;
            };
            rows.swap(rank, pivot);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[w] >> b & 1 == 1 {
                    row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x ^= y);
                }
            }
            rank += 1;
        }
        rank as u64
    }

    #[test]
    fn fixed_points() {
        assert_eq!(exact(&cycle3(), 2), vec![1, 1, 0]);
        assert_eq!(exact(&bigon(), 1), vec![1, 1]);
        assert_eq!(exact(&transitive3(), 2), vec![1, 0, 0]);
        assert_eq!(exact(&DirectedGraph::empty(5), 2), vec![5, 0, 0]);
    }

    #[test]
    fn bigon_boundary_rank_is_one() {
        // Two edge columns, both with boundary {0, 1}.
        let rows = vec![vec![0b11u64], vec![0b11u64]];
        assert_eq!(dense_rank(rows), 1);
    }

    #[test]
    fn euler_characteristic_and_dense_oracle() {
        for seed in 0..15 {
            let g = crate::random::gen_er(8, 0.45, seed).unwrap();
            let p = 3;
            let k = DirectedFlagComplex::build(&g, p + 1);
            let betti = betti_numbers(&k, p).exact().unwrap().to_vec();

            // dense ranks of ∂_d for d = 1..=p+1
            let mut rank = vec![0u64; p + 3];
            for d in 1..=p + 1 {
                let rows_n = k.count(d - 1);
                let words = k.count(d).div_ceil(64).max(1);
                let mut rows = vec![vec![0u64; words]; rows_n];
                for j in 0..k.count(d) {
                    let s = k.simplex(d, j);
                    for i in 0..=d {
                        let face: Vec<u32> = s.iter().enumerate().filter(|&(x, _)| x != i).map(|(_, &v)| v).collect();
                        let r = k.simplices(d - 1).position(|t| t == &face[..]).unwrap();
                        rows[r][j / 64] ^= 1 << (j % 64);
                    }
                }
                rank[d] = dense_rank(rows);
            }
            for d in 0..=p {
                assert_eq!(betti[d], k.count(d) as u64 - rank[d] - rank[d + 1], "seed {seed} d {d}");
            }

            let k_full = DirectedFlagComplex::build(&g, 8);
            let full = betti_numbers(&k_full, 7).exact().unwrap().to_vec();
            let chi_gamma: i64 = k_full.counts().iter().enumerate().map(|(d, &c)| if d % 2 == 0 { c as i64 } else { -(c as i64) }).sum();
            let chi_beta: i64 = full.iter().enumerate().map(|(d, &c)| if d % 2 == 0 { c as i64 } else { -(c as i64) }).sum();
            assert_eq!(chi_gamma, chi_beta);
        }
    }

    #[test]
    fn unbounded_budget_is_exact() {
        let g = crate::random::gen_er(20, 0.35, 2).unwrap();
        let k = DirectedFlagComplex::build(&g, 4);
        let e = betti_numbers(&k, 3);
        let a = betti_numbers_approx(&k, 3, None);
        assert_eq!(e, a);
        assert!(a.is_exact());
    }

    #[test]
    fn zero_budget_still_brackets() {
        let g = crate::random::gen_er(20, 0.35, 3).unwrap();
        let k = DirectedFlagComplex::build(&g, 4);
        let e = betti_numbers(&k, 3).lower;
        let a = betti_numbers_approx(&k, 3, Some(0));
        for d in 0..=3 {
            assert!(a.lower[d] <= e[d] && e[d] <= a.upper[d]);
            assert!(a.upper[d] <= k.count(d) as u64);
        }
    }

    #[test]
    fn widths_shrink_with_budget() {
        for seed in 0..5 {
            let g = crate::random::gen_er(30, 0.3, seed).unwrap();
            let k = DirectedFlagComplex::build(&g, 5);
            let exact = betti_numbers(&k, 4).lower;
            let mut last = u64::MAX;
            for eps in [0, 1, 3, 10, 30, 100, 1000] {
                let a = betti_numbers_approx(&k, 4, Some(eps));
                for d in 0..=4 {
                    assert!(a.lower[d] <= exact[d] && exact[d] <= a.upper[d]);
                }
                let w: u64 = a.widths().iter().sum();
                assert!(w <= last, "seed {seed} eps {eps}: {w} > {last}");
                last = w;
            }
        }
    }

    #[test]
    #[should_panic(expected = "need simplices")]
    fn truncated_complex_rejected() {
        let k = DirectedFlagComplex::build(&complete(4), 1);
        betti_numbers(&k, 2);
    }
}
