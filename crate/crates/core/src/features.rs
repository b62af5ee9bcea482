//! Per-graph features and their on-disk cache.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::digraph::DirectedGraph;
use crate::error::Result;
use crate::flag::DirectedFlagComplex;
use crate::graphlets::{self, DegreeDistribution, OrbitCounting, CLASS_COUNT};
use crate::homology::betti_numbers_approx;
use crate::portrait::{self, Portrait, PortraitRow};
use crate::random::ManifestEntry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Betti,
    SimplexCount,
}

/// `values[k] = max(0, ln x_k)` for Betti numbers or simplex counts `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
    /// False when Betti numbers came from interval midpoints.
    pub exact: bool,
}

/// `max(0, ln x)`, with `ln 0` clamped to 0.
pub fn log_clamp(x: u64) -> f64 {
    if x <= 1 {
        0.0
    } else {
        (x as f64).ln()
    }
}

/// Flag-complex counts and Betti numbers of one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyFeatures {
    pub p: usize,
    pub eps: Option<u64>,
    pub gamma: Vec<u64>,
    pub betti_lower: Vec<u64>,
    pub betti_upper: Vec<u64>,
    pub exact: bool,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl TopologyFeatures {
    pub fn compute(g: &DirectedGraph, p: usize, eps: Option<u64>) -> Self {
        let complex = DirectedFlagComplex::build(g, p);
        let betti = betti_numbers_approx(&complex, p, eps);
        let gamma = complex.counts();
        let exact = betti.is_exact();
        let b = betti.midpoints().into_iter().map(log_clamp).collect();
        let c = gamma.iter().map(|&x| log_clamp(x)).collect();
        Self {
            p,
            eps,
            gamma,
            betti_lower: betti.lower,
            betti_upper: betti.upper,
            exact,
            b,
            c,
        }
    }

    pub fn vector(&self, kind: FeatureKind) -> FeatureVector {
        match kind {
            FeatureKind::Betti => FeatureVector {
                kind,
                values: self.b.clone(),
                exact: self.exact,
            },
            FeatureKind::SimplexCount => FeatureVector {
                kind,
                values: self.c.clone(),
                exact: true,
            },
        }
    }
}

/// `b(G)` or `c(G)` up to dimension `p`; Betti intervals from a budgeted
/// reduction contribute their midpoints.
pub fn feature_vector(g: &DirectedGraph, kind: FeatureKind, p: usize, eps: Option<u64>) -> FeatureVector {
    TopologyFeatures::compute(g, p, eps).vector(kind)
}

/// Triad census, profile and the 30 orbit-degree distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphletFeatures {
    pub census: [u64; CLASS_COUNT],
    pub phi: [f64; CLASS_COUNT],
    pub counting: OrbitCounting,
    /// Sparse `degree -> probability` per orbit.
    pub orbit_distributions: Vec<BTreeMap<usize, f64>>,
}

impl GraphletFeatures {
    pub fn compute(g: &DirectedGraph, counting: OrbitCounting) -> Result<Self> {
        let census = graphlets::triad_census(g);
        let orbit_distributions = graphlets::orbit_distributions(g, counting)?
            .into_iter()
            .map(|d| {
                d.probs
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, p)| p > 0.0)
                    .collect()
            })
            .collect();
        Ok(Self {
            census: census.counts,
            phi: census.profile(),
            counting,
            orbit_distributions,
        })
    }

    pub fn dense_distributions(&self) -> Vec<DegreeDistribution> {
        self.orbit_distributions
            .iter()
            .map(|sparse| {
                let len = sparse.keys().next_back().map_or(1, |&k| k + 1);
                let mut probs = vec![0.0; len];
                for (&k, &p) in sparse {
                    probs[k] = p;
                }
                DegreeDistribution { probs }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortraitFeatures {
    pub n: usize,
    pub rows: Vec<PortraitRow>,
}

impl PortraitFeatures {
    pub fn compute(g: &DirectedGraph) -> Self {
        Self {
            n: g.vertex_count(),
            rows: portrait::portrait(g).to_sparse(),
        }
    }

    pub fn portrait(&self) -> Result<Portrait> {
        Portrait::from_sparse(self.n, &self.rows)
    }
}

/// Cached values are stored next to the manifest entry they were computed
/// from and recomputed when the entry changes.
#[derive(Serialize, Deserialize)]
struct Cached<T> {
    entry: ManifestEntry,
    value: T,
}

/// Directory of JSON feature files keyed by graph id and feature settings.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, entry: &ManifestEntry, key: &str) -> PathBuf {
        self.dir.join(format!("{}.{key}.json", entry.id))
    }

    pub fn load<T: DeserializeOwned>(&self, entry: &ManifestEntry, key: &str) -> Option<T> {
        let text = fs::read_to_string(self.path(entry, key)).ok()?;
        let cached: Cached<T> = serde_json::from_str(&text).ok()?;
        (cached.entry == *entry).then_some(cached.value)
    }

    pub fn store<T: Serialize>(&self, entry: &ManifestEntry, key: &str, value: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Borrowed<'a, T> {
            entry: &'a ManifestEntry,
            value: &'a T,
        }
        let text = serde_json::to_string(&Borrowed { entry, value })?;
        write_atomic(&self.path(entry, key), text.as_bytes())
    }

    pub fn get_or_compute<T, F>(&self, entry: &ManifestEntry, key: &str, compute: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.load(entry, key) {
            log::debug!("cache hit {} {key}", entry.id);
            return Ok(v);
        }
        let value = compute()?;
        self.store(entry, key, &value)?;
        Ok(value)
    }
}

/// Cache key for topology features.
pub fn topology_key(p: usize, eps: Option<u64>) -> String {
    match eps {
        Some(e) => format!("topology.p{p}.eps{e}"),
        None => format!("topology.p{p}.exact"),
    }
}

pub fn graphlet_key(counting: OrbitCounting) -> String {
    match counting {
        OrbitCounting::Subgraph => "graphlets".into(),
        OrbitCounting::Induced => "graphlets.induced".into(),
    }
}

pub const PORTRAIT_KEY: &str = "portrait";

/// Writes to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
