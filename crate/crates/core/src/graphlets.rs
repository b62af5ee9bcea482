//! Connected 3-vertex graphlets (triads): census, profile, orbit degrees.
//!
//! A labeled triad on positions `0, 1, 2` is a 6-bit code. Bit 5 is the arc
//! `0->1`, then `0->2`, `1->0`, `1->2`, `2->0` and bit 0 is `2->1`, so the
//! numeric order of codes is the lexicographic order of the row-major
//! off-diagonal adjacency bitstring.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digraph::DirectedGraph;
use crate::error::{Error, Result};

pub const CLASS_COUNT: usize = 13;
pub const ORBIT_COUNT: usize = 30;

/// Arc `(from, to)` for each bit, most significant first.
const ARCS: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn bit(from: usize, to: usize) -> u8 {
    let i = ARCS.iter().position(|&a| a == (from, to)).expect("distinct positions");
    1 << (5 - i)
}

/// Code of the triad obtained by moving position `i` to `perm[i]`.
fn relabel(code: u8, perm: &[usize; 3]) -> u8 {
    ARCS.iter()
        .filter(|&&(a, b)| code & bit(a, b) != 0)
        .fold(0, |acc, &(a, b)| acc | bit(perm[a], perm[b]))
}

/// Three vertices are weakly connected iff at least two of their three
/// unordered pairs are adjacent.
fn is_connected(code: u8) -> bool {
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .filter(|&&(a, b)| code & (bit(a, b) | bit(b, a)) != 0)
        .count()
        >= 2
}

/// One isomorphism class of connected triads.
#[derive(Debug, Clone)]
pub struct TriadClass {
    /// Smallest code over the six relabelings.
    pub code: u8,
    pub edges: u32,
    /// Permutations fixing the canonical code.
    pub automorphisms: Vec<[usize; 3]>,
    /// Vertex orbits of the canonical triad, as global orbit ids per position.
    pub position_orbits: [usize; 3],
}

#[derive(Debug, Clone, Copy, Default)]
struct Labeled {
    class: Option<usize>,
    /// Global orbit of each position of the labeled triad.
    orbits: [usize; 3],
}

/// The 13 classes and 30 orbits, generated from all 64 labeled triads.
#[derive(Debug)]
pub struct TriadCatalog {
    classes: Vec<TriadClass>,
    labeled: [Labeled; 64],
    /// For each labeled code, the orbit occurrences of every connected
    /// subgraph on the same three positions: `(position, orbit)` pairs.
    subgraph_orbits: Vec<Vec<(u8, u8)>>,
}

impl TriadCatalog {
    fn generate() -> Self {
        let canonical = |code: u8| PERMUTATIONS.iter().map(|p| relabel(code, p)).min().unwrap();
        let mut codes: Vec<u8> = (0u8..64).filter(|&c| is_connected(c)).map(canonical).collect();
        codes.sort_by_key(|&c| (c.count_ones(), c));
        codes.dedup();

        let mut classes = Vec::with_capacity(codes.len());
        let mut next_orbit = 0;
        for &code in &codes {
            let automorphisms: Vec<[usize; 3]> =
                PERMUTATIONS.iter().copied().filter(|p| relabel(code, p) == code).collect();
            let mut position_orbits = [usize::MAX; 3];
            for v in 0..3 {
                if position_orbits[v] != usize::MAX {
                    continue;
                }
                for auto in &automorphisms {
                    position_orbits[auto[v]] = next_orbit;
                }
                next_orbit += 1;
            }
            classes.push(TriadClass {
                code,
                edges: code.count_ones(),
                automorphisms,
                position_orbits,
            });
        }

        let mut labeled = [Labeled::default(); 64];
        for code in 0u8..64 {
            if !is_connected(code) {
                continue;
            }
            let (perm, canon) = PERMUTATIONS
                .iter()
                .map(|p| (p, relabel(code, p)))
                .min_by_key(|&(_, c)| c)
                .unwrap();
            let class = classes.iter().position(|c| c.code == canon).unwrap();
            let orbits = [0, 1, 2].map(|v| classes[class].position_orbits[perm[v]]);
            labeled[code as usize] = Labeled {
                class: Some(class),
                orbits,
            };
        }

        let subgraph_orbits = (0u8..64)
            .map(|code| {
                let mut hits = Vec::new();
                // every nonempty sub-mask of `code`
                let mut sub = code;
                while sub != 0 {
                    if labeled[sub as usize].class.is_some() {
                        for (v, &o) in labeled[sub as usize].orbits.iter().enumerate() {
                            hits.push((v as u8, o as u8));
                        }
                    }
                    sub = (sub - 1) & code;
                }
                hits
            })
            .collect();

        let catalog = Self {
            classes,
            labeled,
            subgraph_orbits,
        };
        assert_eq!(catalog.classes.len(), CLASS_COUNT);
        assert_eq!(next_orbit, ORBIT_COUNT);
        catalog
    }

    pub fn classes(&self) -> &[TriadClass] {
        &self.classes
    }

    /// Class index of a labeled code, `None` if disconnected.
    pub fn class_of(&self, code: u8) -> Option<usize> {
        self.labeled[code as usize & 63].class
    }

    /// Global orbit of each position of a connected labeled code.
    pub fn orbits_of(&self, code: u8) -> Option<[usize; 3]> {
        let l = self.labeled[code as usize & 63];
        l.class.map(|_| l.orbits)
    }

    /// Class owning a global orbit id.
    pub fn class_of_orbit(&self, orbit: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.position_orbits.contains(&orbit))
    }
}

/// The shared catalog.
pub fn catalog() -> &'static TriadCatalog {
    static CATALOG: OnceLock<TriadCatalog> = OnceLock::new();
    CATALOG.get_or_init(TriadCatalog::generate)
}

/// Code of the subgraph induced on `(a, b, c)` in that position order.
pub fn triad_code(g: &DirectedGraph, vs: [usize; 3]) -> u8 {
    ARCS.iter()
        .filter(|&&(i, j)| g.has_edge(vs[i], vs[j]))
        .fold(0, |acc, &(i, j)| acc | bit(i, j))
}

/// Calls `f` once for every connected vertex triple, with its code.
///
/// Each triple is found from a center adjacent to the other two; triangles
/// have three centers and are kept only at their smallest vertex.
fn for_each_triple_at<F: FnMut([usize; 3], u8)>(g: &DirectedGraph, v: usize, nbrs: &[Vec<usize>], mut f: F) {
    let around = &nbrs[v];
    for (i, &a) in around.iter().enumerate() {
        for &b in &around[i + 1..] {
            let closed = nbrs[a].binary_search(&b).is_ok();
            if closed && (a < v || b < v) {
                continue;
            }
            let vs = [v, a, b];
            f(vs, triad_code(g, vs));
        }
    }
}

fn undirected_lists(g: &DirectedGraph) -> Vec<Vec<usize>> {
    (0..g.vertex_count())
        .map(|v| g.undirected_neighbors(v).into_iter().map(|u| u as usize).collect())
        .collect()
}

/// Induced counts per class, in catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriadCensus {
    pub counts: [u64; CLASS_COUNT],
}

impl TriadCensus {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Proportions per class; the zero vector for a triad-free graph.
    pub fn profile(&self) -> [f64; CLASS_COUNT] {
        let total = self.total();
        if total == 0 {
            return [0.0; CLASS_COUNT];
        }
        self.counts.map(|c| c as f64 / total as f64)
    }
}

pub fn triad_census(g: &DirectedGraph) -> TriadCensus {
    let cat = catalog();
    let nbrs = undirected_lists(g);
    let counts = (0..g.vertex_count())
        .into_par_iter()
        .map(|v| {
            let mut local = [0u64; CLASS_COUNT];
            for_each_triple_at(g, v, &nbrs, |_, code| {
                local[cat.class_of(code).expect("triple is connected")] += 1;
            });
            local
        })
        .reduce(
            || [0u64; CLASS_COUNT],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    TriadCensus { counts }
}

pub fn triad_profile(census: &TriadCensus) -> [f64; CLASS_COUNT] {
    census.profile()
}

/// Euclidean distance between two triad profiles.
pub fn profile_distance(a: &[f64; CLASS_COUNT], b: &[f64; CLASS_COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn triad_euclid(g1: &DirectedGraph, g2: &DirectedGraph) -> f64 {
    profile_distance(&triad_census(g1).profile(), &triad_census(g2).profile())
}

/// How a vertex's orbit occurrences are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitCounting {
    /// Every subgraph copy of the graphlet, induced or not.
    #[default]
    Subgraph,
    /// Only induced copies.
    Induced,
}

/// Orbit degrees of every vertex for all 30 orbits, `table[v][orbit]`.
pub fn orbit_degree_table(g: &DirectedGraph, counting: OrbitCounting) -> Vec<[u64; ORBIT_COUNT]> {
    let cat = catalog();
    let n = g.vertex_count();
    let nbrs = undirected_lists(g);
    (0..n)
        .into_par_iter()
        .fold(
            || vec![[0u64; ORBIT_COUNT]; n],
            |mut table, v| {
                for_each_triple_at(g, v, &nbrs, |vs, code| match counting {
                    OrbitCounting::Subgraph => {
                        for &(pos, orbit) in &cat.subgraph_orbits[code as usize] {
                            table[vs[pos as usize]][orbit as usize] += 1;
                        }
                    }
                    OrbitCounting::Induced => {
                        let orbits = cat.orbits_of(code).expect("triple is connected");
                        for (pos, orbit) in orbits.into_iter().enumerate() {
                            table[vs[pos]][orbit] += 1;
                        }
                    }
                });
                table
            },
        )
        .reduce(
            || vec![[0u64; ORBIT_COUNT]; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x.iter_mut().zip(y).for_each(|(s, t)| *s += t);
                }
                a
            },
        )
}

/// Orbit-`orbit` degree of every vertex.
pub fn orbit_degrees(g: &DirectedGraph, orbit: usize, counting: OrbitCounting) -> Result<Vec<u64>> {
    if orbit >= ORBIT_COUNT {
        return Err(Error::OrbitOutOfRange(orbit));
    }
    Ok(orbit_degree_table(g, counting).iter().map(|row| row[orbit]).collect())
}

/// A probability distribution on `0..len`, stored densely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    pub probs: Vec<f64>,
}

impl DegreeDistribution {
    /// Empirical distribution of a degree sequence.
    pub fn from_degrees(degrees: &[u64]) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let max = *degrees.iter().max().unwrap() as usize;
        let mut counts = vec![0u64; max + 1];
        for &d in degrees {
            counts[d as usize] += 1;
        }
        let n = degrees.len() as f64;
        Ok(Self {
            probs: counts.into_iter().map(|c| c as f64 / n).collect(),
        })
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    fn check(&self) -> Result<()> {
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.probs.iter().any(|&p| p < 0.0) {
            return Err(Error::NotNormalized(sum));
        }
        Ok(())
    }
}

pub fn orbit_degree_distribution(degrees: &[u64]) -> Result<DegreeDistribution> {
    DegreeDistribution::from_degrees(degrees)
}

/// All 30 orbit-degree distributions of a graph.
pub fn orbit_distributions(g: &DirectedGraph, counting: OrbitCounting) -> Result<Vec<DegreeDistribution>> {
    if g.vertex_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let table = orbit_degree_table(g, counting);
    (0..ORBIT_COUNT)
        .map(|o| {
            let degrees: Vec<u64> = table.iter().map(|row| row[o]).collect();
            DegreeDistribution::from_degrees(&degrees)
        })
        .collect()
}

/// Earth mover's distance on the integers: `Σ_x |F_P(x) − F_Q(x)|`.
pub fn emd_1d(p: &DegreeDistribution, q: &DegreeDistribution) -> Result<f64> {
    p.check()?;
    q.check()?;
    let len = p.probs.len().max(q.probs.len());
    let (mut fp, mut fq, mut total) = (0.0, 0.0, 0.0);
    for x in 0..len.saturating_sub(1) {
        fp += p.prob(x);
        fq += q.prob(x);
        total += f64::abs(fp - fq);
    }
    Ok(total)
}

/// Mean EMD over matched orbit distributions.
pub fn mean_orbit_emd(a: &[DegreeDistribution], b: &[DegreeDistribution]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    let mut sum = 0.0;
    for (p, q) in a.iter().zip(b) {
        sum += emd_1d(p, q)?;
    }
    Ok(sum / a.len() as f64)
}

pub fn triad_emd(g1: &DirectedGraph, g2: &DirectedGraph) -> Result<f64> {
    let a = orbit_distributions(g1, OrbitCounting::Subgraph)?;
    let b = orbit_distributions(g2, OrbitCounting::Subgraph)?;
    mean_orbit_emd(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::fixtures::*;
    use proptest::prelude::*;

    #[test]
    fn catalog_shape() {
        let cat = catalog();
        assert_eq!(cat.classes().len(), 13);
        let edges: Vec<u32> = cat.classes().iter().map(|c| c.edges).collect();
        assert_eq!(edges, vec![2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 6]);
        let orbit_total: usize = cat
            .classes()
            .iter()
            .map(|c| {
                let mut o = c.position_orbits.to_vec();
                o.sort();
                o.dedup();
                o.len()
            })
            .sum();
        assert_eq!(orbit_total, 30);
        let connected = (0u8..64).filter(|&c| cat.class_of(c).is_some()).count();
        // 64 labeled triads minus the empty one, 6 single arcs and 3 bigons.
        assert_eq!(connected, 54);
    }

    #[test]
    fn orbits_match_automorphisms() {
        let cat = catalog();
        for class in cat.classes() {
            let group_order = class.automorphisms.len();
            assert_eq!(6 % group_order, 0);
            for v in 0..3 {
                let orbit_size = class.position_orbits.iter().filter(|&&o| o == class.position_orbits[v]).count();
                // orbit-stabilizer
                let stabilizer = class.automorphisms.iter().filter(|a| a[v] == v).count();
                assert_eq!(orbit_size * stabilizer, group_order);
            }
        }
    }

    #[test]
    fn census_examples() {
        let cat = catalog();
        let cyc = triad_census(&cycle3());
        assert_eq!(cyc.total(), 1);
        let cyclic_class = cat.class_of(triad_code(&cycle3(), [0, 1, 2])).unwrap();
        assert_eq!(cyc.counts[cyclic_class], 1);

        let k4 = triad_census(&complete(4));
        assert_eq!(k4.total(), 4);
        assert_eq!(k4.counts[12], 4);
        assert_eq!(cat.classes()[12].code, 63);

        assert_eq!(triad_census(&DirectedGraph::empty(5)).profile(), [0.0; 13]);
    }

    #[test]
    fn euclid_three_cycle_vs_transitive() {
        assert!((triad_euclid(&cycle3(), &transitive3()) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(triad_euclid(&cycle3(), &cycle3()), 0.0);
    }

    #[test]
    fn profile_arithmetic() {
        let mut counts = [0u64; 13];
        counts[3] = 1;
        counts[0] = 3;
        let phi = TriadCensus { counts }.profile();
        assert_eq!(phi[3], 0.25);
        assert_eq!(phi[0], 0.75);
    }

    #[test]
    fn worked_orbit_example() {
        let cat = catalog();
        let g = orbit_example();
        // out-star: center at position 0 with arcs 0->1, 0->2
        let star = bit(0, 1) | bit(0, 2);
        let center = cat.orbits_of(star).unwrap()[0];
        let degrees = orbit_degrees(&g, center, OrbitCounting::Subgraph).unwrap();
        assert_eq!(degrees, vec![1, 3, 0, 0]);
        let dist = orbit_degree_distribution(&degrees).unwrap();
        assert_eq!(dist.probs, vec![0.5, 0.25, 0.0, 0.25]);

        // Induced counting sees no out-star at vertex 1 (index 0).
        let induced = orbit_degrees(&g, center, OrbitCounting::Induced).unwrap();
        assert_eq!(induced, vec![0, 1, 0, 0]);
    }

    #[test]
    fn orbit_range_checked() {
        assert!(matches!(
            orbit_degrees(&cycle3(), 30, OrbitCounting::Subgraph),
            Err(Error::OrbitOutOfRange(30))
        ));
        let zeros = orbit_degrees(&DirectedGraph::empty(4), 7, OrbitCounting::Subgraph).unwrap();
        assert_eq!(zeros, vec![0; 4]);
    }

    #[test]
    fn distribution_examples() {
        let d = orbit_degree_distribution(&[0, 1]).unwrap();
        assert_eq!(d.probs, vec![0.5, 0.5]);
        let d = orbit_degree_distribution(&[2, 2, 2]).unwrap();
        assert_eq!(d.prob(2), 1.0);
        assert!(matches!(orbit_degree_distribution(&[]), Err(Error::EmptyGraph)));
    }

    #[test]
    fn emd_examples() {
        let half = DegreeDistribution { probs: vec![0.5, 0.5] };
        let zero = DegreeDistribution { probs: vec![1.0] };
        let at4 = DegreeDistribution {
            probs: vec![0.0, 0.0, 0.0, 0.0, 1.0],
        };
        assert_eq!(emd_1d(&half, &zero).unwrap(), 0.5);
        assert_eq!(emd_1d(&zero, &at4).unwrap(), 4.0);
        assert_eq!(emd_1d(&half, &half).unwrap(), 0.0);
        let bad = DegreeDistribution { probs: vec![0.5] };
        assert!(matches!(emd_1d(&bad, &zero), Err(Error::NotNormalized(_))));
    }

    fn permuted(g: &DirectedGraph, perm: &[usize]) -> DirectedGraph {
        let edges: Vec<(usize, usize)> = g.edges().map(|(u, v)| (perm[u], perm[v])).collect();
        DirectedGraph::from_edges(g.vertex_count(), edges).unwrap()
    }

    proptest! {
        #[test]
        fn relabeling_invariance(seed in 0u64..1000, n in 3usize..12) {
            let g = crate::random::gen_er(n, 0.35, seed).unwrap();
            let perm = crate::random::random_permutation(n, seed ^ 0xabc);
            let h = permuted(&g, &perm);
            prop_assert_eq!(triad_census(&g), triad_census(&h));
            let a = orbit_distributions(&g, OrbitCounting::Subgraph).unwrap();
            let b = orbit_distributions(&h, OrbitCounting::Subgraph).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn euclid_triangle_inequality(s in 0u64..1000) {
            let g: Vec<DirectedGraph> = (0..3).map(|i| crate::random::gen_er(9, 0.3, s * 3 + i).unwrap()).collect();
            let d = |i: usize, j: usize| triad_euclid(&g[i], &g[j]);
            prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
            prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-15);
        }
    }
}
