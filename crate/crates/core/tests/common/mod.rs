//! Independent oracles: brute-force enumeration and dense linear algebra,
//! sharing no code with the library beyond the graph type.

#![allow(dead_code)]

use flagmetrics::pseudometrics::DistanceMatrix;
use flagmetrics::random::{Model, ModelParams};
use flagmetrics::DirectedGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small random digraph from a mix of the three models.
pub fn mixed_graph(index: u64, max_n: usize, max_rho: f64) -> DirectedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0000 + index);
    let n = rng.gen_range(3..=max_n);
    let params = match index % 3 {
        0 => ModelParams::new(Model::Er, rng.gen_range(0.05..max_rho), n),
        1 => ModelParams::new(Model::Gr, rng.gen_range(0.2..0.9), n),
        _ => ModelParams::new(Model::Pa, rng.gen_range(1..n.min(5)) as f64, n),
    };
    params.unwrap().generate(rng.gen()).unwrap()
}

/// Every ordered `(k+1)`-tuple of distinct vertices with an edge from each
/// earlier vertex to each later one, in lexicographic order.
pub fn brute_simplices(g: &DirectedGraph, k: usize) -> Vec<Vec<usize>> {
    let n = g.vertex_count();
    let mut out = Vec::new();
    let mut tuple = Vec::with_capacity(k + 1);
    fn extend(g: &DirectedGraph, n: usize, k: usize, tuple: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if tuple.len() == k + 1 {
            out.push(tuple.clone());
            return;
        }
        for v in 0..n {
            if tuple.contains(&v) {
                continue;
            }
            if tuple.iter().all(|&u| g.has_edge(u, v)) {
                tuple.push(v);
                extend(g, n, k, tuple, out);
                tuple.pop();
            }
        }
    }
    extend(g, n, k, &mut tuple, &mut out);
    out
}

pub fn brute_counts(g: &DirectedGraph, max_k: usize) -> Vec<u64> {
    (0..=max_k).map(|k| brute_simplices(g, k).len() as u64).collect()
}

/// Rank over F2 by Gaussian elimination on bit-packed rows.
pub fn f2_rank(mut rows: Vec<Vec<u64>>) -> u64 {
    let width = rows.first().map_or(0, |r| r.len() * 64);
    let mut rank = 0;
    for col in 0..width {
        let (w, b) = (col / 64, 1u64 << (col % 64));
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][w] & b != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[w] & b != 0 {
                row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x ^= y);
            }
        }
        rank += 1;
    }
    rank as u64
}

/// Rank of the boundary map from dimension `k` to `k − 1`.
fn boundary_rank(lower: &[Vec<usize>], upper: &[Vec<usize>]) -> u64 {
    if lower.is_empty() || upper.is_empty() {
        return 0;
    }
    let words = lower.len().div_ceil(64);
    let rows = upper
        .iter()
        .map(|s| {
            let mut row = vec![0u64; words];
            for drop in 0..s.len() {
                let face: Vec<usize> = s.iter().enumerate().filter(|&(i, _)| i != drop).map(|(_, &v)| v).collect();
                let j = lower.binary_search(&face).expect("faces of a simplex are simplices");
                row[j / 64] ^= 1 << (j % 64);
            }
            row
        })
        .collect();
    f2_rank(rows)
}

/// Betti numbers over F2 for dimensions `0..=max_k` from dense boundary matrices.
pub fn dense_betti(g: &DirectedGraph, max_k: usize) -> Vec<u64> {
    let simplices: Vec<Vec<Vec<usize>>> = (0..=max_k + 1).map(|k| brute_simplices(g, k)).collect();
    let ranks: Vec<u64> = (0..=max_k + 1)
        .map(|k| if k == 0 { 0 } else { boundary_rank(&simplices[k - 1], &simplices[k]) })
        .collect();
    (0..=max_k)
        .map(|k| simplices[k].len() as u64 - ranks[k] - ranks[k + 1])
        .collect()
}

/// Edges of a 3-vertex graph from a code with bits, high to low,
/// 0→1, 0→2, 1→0, 1→2, 2→0, 2→1.
pub fn triad_edges(code: u8) -> Vec<(usize, usize)> {
    const ORDER: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];
    ORDER
        .iter()
        .enumerate()
        .filter(|&(i, _)| code & (1 << (5 - i)) != 0)
        .map(|(_, &e)| e)
        .collect()
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn isomorphic(a: &[(usize, usize)], b: &[(usize, usize)]) -> bool {
    a.len() == b.len()
        && PERMS
            .iter()
            .any(|p| a.iter().all(|&(u, v)| b.contains(&(p[u], p[v]))))
}

fn automorphisms(h: &[(usize, usize)]) -> usize {
    PERMS
        .iter()
        .filter(|p| h.iter().all(|&(u, v)| h.contains(&(p[u], p[v]))))
        .count()
}

fn induced(g: &DirectedGraph, vs: [usize; 3]) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if i != j && g.has_edge(vs[i], vs[j]) {
                e.push((i, j));
            }
        }
    }
    e
}

/// Triad census by isomorphism testing of every induced 3-vertex subgraph
/// against the class representatives `codes`.
pub fn brute_census(g: &DirectedGraph, codes: &[u8]) -> Vec<u64> {
    let reps: Vec<Vec<(usize, usize)>> = codes.iter().map(|&c| triad_edges(c)).collect();
    let n = g.vertex_count();
    let mut counts = vec![0u64; codes.len()];
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let e = induced(g, [a, b, c]);
                if let Some(k) = reps.iter().position(|r| isomorphic(r, &e)) {
                    counts[k] += 1;
                }
            }
        }
    }
    counts
}

/// Orbit degrees from injective maps of each representative into `g`:
/// `table[v][orbit]`. `orbits[c][i]` is the orbit of position `i` of class `c`.
pub fn brute_orbit_table(g: &DirectedGraph, codes: &[u8], orbits: &[[usize; 3]], induced_only: bool) -> Vec<Vec<u64>> {
    let n = g.vertex_count();
    let orbit_count = orbits.iter().flatten().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; orbit_count]; n];
    for (c, &code) in codes.iter().enumerate() {
        let h = triad_edges(code);
        let aut = automorphisms(&h) as u64;
        let mut hits = vec![vec![0u64; orbit_count]; n];
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    if a == b || a == d || b == d {
                        continue;
                    }
                    let phi = [a, b, d];
                    if !h.iter().all(|&(u, v)| g.has_edge(phi[u], phi[v])) {
                        continue;
                    }
                    if induced_only && induced(g, phi).len() != h.len() {
                        continue;
                    }
                    for pos in 0..3 {
                        hits[phi[pos]][orbits[c][pos]] += 1;
                    }
                }
            }
        }
        for v in 0..n {
            for o in 0..orbit_count {
                assert_eq!(hits[v][o] % aut, 0);
                table[v][o] += hits[v][o] / aut;
            }
        }
    }
    table
}

/// Squared distance covariance as `S1 + S2 − 2 S3`, without centring.
pub fn dcov2_by_sums(a: &DistanceMatrix, b: &DistanceMatrix) -> f64 {
    let n = a.len();
    let nf = n as f64;
    let (mut s1, mut sa, mut sb, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        let (mut ra, mut rb) = (0.0, 0.0);
        for l in 0..n {
            s1 += a.get(k, l) * b.get(k, l);
            sa += a.get(k, l);
            sb += b.get(k, l);
            ra += a.get(k, l);
            rb += b.get(k, l);
        }
        s3 += ra * rb;
    }
    s1 / (nf * nf) + (sa / (nf * nf)) * (sb / (nf * nf)) - 2.0 * s3 / (nf * nf * nf)
}

pub fn dcor_by_sums(a: &DistanceMatrix, b: &DistanceMatrix) -> f64 {
    let denom = (dcov2_by_sums(a, a) * dcov2_by_sums(b, b)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        (dcov2_by_sums(a, b).max(0.0) / denom).sqrt()
    }
}

/// Distance matrix of points on a line.
pub fn line(points: &[f64]) -> DistanceMatrix {
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|a| points.iter().map(|b| (a - b).abs()).collect())
        .collect();
    DistanceMatrix::from_rows("line", &rows).unwrap()
}

/// The digraph 0↔1, 0→2, 1→2, 1→3 used for the orbit-degree worked example.
pub fn orbit_example() -> DirectedGraph {
    DirectedGraph::from_edges(4, [(0, 1), (1, 0), (0, 2), (1, 2), (1, 3)]).unwrap()
}
