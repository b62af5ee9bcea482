//! Finite directed graphs without self-loops.
//!
//! Vertices are the dense integers `0..n`. At most one edge exists per
//! ordered pair, but `u -> v` and `v -> u` may coexist (a bigon).

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// An immutable simple digraph (bigons allowed) with sorted out- and
/// in-adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    out_adj: Vec<Vec<u32>>,
    in_adj: Vec<Vec<u32>>,
    edge_count: usize,
}

impl DirectedGraph {
    /// The graph on `n` vertices with no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            out_adj: vec![Vec::new(); n],
            in_adj: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a graph from ordered pairs. Duplicates collapse to one edge;
    /// self-loops are rejected.
    pub fn from_edges<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut out_adj = vec![Vec::new(); n];
        for (u, v) in pairs {
            for w in [u, v] {
                if w >= n {
                    return Err(Error::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            out_adj[u].push(v as u32);
        }
        Ok(Self::from_out_lists(out_adj))
    }

    /// Builds a graph from raw out-neighbour lists that are already known to
    /// be loop-free and in range. Lists are sorted and deduplicated here.
    pub(crate) fn from_out_lists(mut out_adj: Vec<Vec<u32>>) -> Self {
        let n = out_adj.len();
        let mut in_adj = vec![Vec::new(); n];
        let mut edge_count = 0;
        for (u, outs) in out_adj.iter_mut().enumerate() {
            outs.sort_unstable();
            outs.dedup();
            debug_assert!(outs.binary_search(&(u as u32)).is_err());
            edge_count += outs.len();
            for &v in outs.iter() {
                in_adj[v as usize].push(u as u32);
            }
        }
        // Vertices were visited in increasing order, so in-lists are sorted.
        Self {
            out_adj,
            in_adj,
            edge_count,
        }
    }

    /// Maps arbitrary vertex labels to `0..n` in order of first appearance.
    /// Returns the graph and the label of each vertex.
    pub fn from_labeled_edges<'a, I>(pairs: I) -> Result<(Self, Vec<String>)>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut labels = Vec::new();
        let mut edges = Vec::new();
        for (a, b) in pairs {
            let mut id = |s: &'a str| {
                *index.entry(s).or_insert_with(|| {
                    labels.push(s.to_string());
                    labels.len() - 1
                })
            };
            let u = id(a);
            let v = id(b);
            edges.push((u, v));
        }
        let g = Self::from_edges(labels.len(), edges)?;
        Ok((g, labels))
    }

    pub fn vertex_count(&self) -> usize {
        self.out_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn out_neighbors(&self, v: usize) -> &[u32] {
        &self.out_adj[v]
    }

    pub fn in_neighbors(&self, v: usize) -> &[u32] {
        &self.in_adj[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.out_adj[u].binary_search(&(v as u32)).is_ok()
    }

    /// All edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, outs)| outs.iter().map(move |&v| (u, v as usize)))
    }

    /// Out-degree and in-degree sequences.
    pub fn degrees(&self) -> (Vec<usize>, Vec<usize>) {
        (
            self.out_adj.iter().map(Vec::len).collect(),
            self.in_adj.iter().map(Vec::len).collect(),
        )
    }

    /// Sorted, deduplicated neighbours ignoring direction.
    pub fn undirected_neighbors(&self, v: usize) -> Vec<u32> {
        let (a, b) = (&self.out_adj[v], &self.in_adj[v]);
        let mut merged = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    merged.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    merged.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&a[i..]);
        merged.extend_from_slice(&b[j..]);
        merged
    }

    /// Directed shortest-path distances from `source`; `None` marks
    /// unreachable vertices.
    pub fn bfs_distances(&self, source: usize) -> Result<Vec<Option<u32>>> {
        let n = self.vertex_count();
        if source >= n {
            return Err(Error::VertexOutOfRange { vertex: source, n });
        }
        let mut dist = vec![UNREACHED; n];
        let mut queue = VecDeque::new();
        self.bfs_into(source, &mut dist, &mut queue);
        Ok(dist
            .into_iter()
            .map(|d| (d != UNREACHED).then_some(d))
            .collect())
    }

    /// BFS writing into caller-owned buffers; `dist` must have length n.
    pub(crate) fn bfs_into(&self, source: usize, dist: &mut [u32], queue: &mut VecDeque<u32>) {
        dist.fill(UNREACHED);
        queue.clear();
        dist[source] = 0;
        queue.push_back(source as u32);
        while let Some(u) = queue.pop_front() {
            let next = dist[u as usize] + 1;
            for &v in &self.out_adj[u as usize] {
                if dist[v as usize] == UNREACHED {
                    dist[v as usize] = next;
                    queue.push_back(v);
                }
            }
        }
    }

    /// The subgraph induced on `vertices`, relabelled to `0..|S|` in
    /// increasing vertex order.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Result<Self> {
        let n = self.vertex_count();
        let mut keep: Vec<usize> = vertices.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut relabel = vec![u32::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            if old >= n {
                return Err(Error::VertexOutOfRange { vertex: old, n });
            }
            relabel[old] = new as u32;
        }
        let out_adj = keep
            .iter()
            .map(|&old| {
                self.out_adj[old]
                    .iter()
                    .map(|&v| relabel[v as usize])
                    .filter(|&v| v != u32::MAX)
                    .collect()
            })
            .collect();
        Ok(Self::from_out_lists(out_adj))
    }

    /// Parses the plain edge-list format: a first line holding `n`, then one
    /// whitespace-separated `u v` pair per line. `#` starts a comment.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse = |tok: &str| {
                tok.parse::<usize>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("`{tok}`: {e}"),
                })
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match (n, toks.as_slice()) {
                (None, [count]) => n = Some(parse(count)?),
                (None, _) => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "expected vertex count".into(),
                    })
                }
                (Some(_), [u, v]) => edges.push((parse(u)?, parse(v)?)),
                (Some(_), _) => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: "expected `u v`".into(),
                    })
                }
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 0,
            msg: "missing vertex count".into(),
        })?;
        Self::from_edges(n, edges)
    }

    /// Serializes to the edge-list format read by [`parse_edge_list`](Self::parse_edge_list).
    pub fn to_edge_list(&self) -> String {
        let mut s = String::with_capacity(8 * self.edge_count + 16);
        let _ = writeln!(s, "{}", self.vertex_count());
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }
}

pub(crate) const UNREACHED: u32 = u32::MAX;

#[cfg(test)]
pub(crate) mod fixtures {
    use super::DirectedGraph;

    pub fn cycle3() -> DirectedGraph {
        DirectedGraph::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    pub fn bigon() -> DirectedGraph {
        DirectedGraph::from_edges(2, [(0, 1), (1, 0)]).unwrap()
    }

    pub fn transitive3() -> DirectedGraph {
        DirectedGraph::from_edges(3, [(0, 1), (0, 2), (1, 2)]).unwrap()
    }

    pub fn path3() -> DirectedGraph {
        DirectedGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    pub fn complete(n: usize) -> DirectedGraph {
        let pairs = (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)));
        DirectedGraph::from_edges(n, pairs).unwrap()
    }

    /// Four vertices: 0 <-> 1, 0 -> 2, 1 -> 2, 1 -> 3.
    pub fn orbit_example() -> DirectedGraph {
        DirectedGraph::from_edges(4, [(0, 1), (1, 0), (0, 2), (1, 2), (1, 3)]).unwrap()
    }
}
