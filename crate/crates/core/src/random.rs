//! Seeded random digraph models and the two standard test collections.
//!
//! All randomness comes from ChaCha8 streams. A graph inside a collection is
//! seeded with the first eight bytes of `SHA-256(collection_seed_le || id)`,
//! so every entry can be regenerated on its own and in any order.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::digraph::DirectedGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    /// Directed Erdos-Renyi: every ordered pair independently with probability rho.
    #[serde(rename = "ER")]
    Er,
    /// Biased oriented geometric graph on the unit square with radius r.
    #[serde(rename = "GR")]
    Gr,
    /// k-out preferential attachment.
    #[serde(rename = "PA")]
    Pa,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Er, Model::Gr, Model::Pa];

    pub fn as_str(self) -> &'static str {
        match self {
            Model::Er => "ER",
            Model::Gr => "GR",
            Model::Pa => "PA",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ER" => Ok(Model::Er),
            "GR" => Ok(Model::Gr),
            "PA" => Ok(Model::Pa),
            other => Err(Error::BadParam(format!("unknown model `{other}`"))),
        }
    }
}

/// A model together with its parameter (rho, r, or k) and vertex count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: Model,
    pub param: f64,
    pub n: usize,
}

impl ModelParams {
    pub fn new(model: Model, param: f64, n: usize) -> Result<Self> {
        let p = Self { model, param, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.model {
            Model::Er => (0.0..=1.0).contains(&self.param),
            Model::Gr => (0.0..=std::f64::consts::SQRT_2).contains(&self.param),
            Model::Pa => {
                self.param.fract() == 0.0 && self.param >= 1.0 && (self.param as usize) < self.n
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::BadParam(format!(
                "{} parameter {} invalid for n = {}",
                self.model, self.param, self.n
            )))
        }
    }

    pub fn generate(&self, seed: u64) -> Result<DirectedGraph> {
        match self.model {
            Model::Er => gen_er(self.n, self.param, seed),
            Model::Gr => gen_gr(self.n, self.param, seed),
            Model::Pa => gen_pa(self.n, self.param as usize, seed),
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Directed Erdos-Renyi graph. Ordered pairs are visited lexicographically,
/// one uniform draw each.
pub fn gen_er(n: usize, rho: f64, seed: u64) -> Result<DirectedGraph> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::BadParam(format!("rho = {rho} not in [0, 1]")));
    }
    let mut rng = rng(seed);
    let mut out = vec![Vec::new(); n];
    for (u, outs) in out.iter_mut().enumerate() {
        for v in 0..n {
            if v != u && rng.gen::<f64>() < rho {
                outs.push(v as u32);
            }
        }
    }
    Ok(DirectedGraph::from_out_lists(out))
}

/// Oriented geometric graph: points uniform in the unit square, an undirected
/// edge whenever the distance is at most `r`, and each edge `uv` with `u < v`
/// oriented `u -> v` with probability 1/3, otherwise `v -> u`.
pub fn gen_gr(n: usize, r: f64, seed: u64) -> Result<DirectedGraph> {
    if !(r >= 0.0) {
        return Err(Error::BadParam(format!("radius {r} must be nonnegative")));
    }
    let mut rng = rng(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    let r2 = r * r;
    let mut out = vec![Vec::new(); n];
    for u in 0..n {
        for v in u + 1..n {
            let (dx, dy) = (pts[u].0 - pts[v].0, pts[u].1 - pts[v].1);
            if dx * dx + dy * dy <= r2 {
                if rng.gen::<f64>() < 1.0 / 3.0 {
                    out[u].push(v as u32);
                } else {
                    out[v].push(u as u32);
                }
            }
        }
    }
    Ok(DirectedGraph::from_out_lists(out))
}

/// Pre-collapse multigraph of the preferential attachment process, as
/// `(source, target)` insertions in order.
pub fn pa_insertions(n: usize, k: usize, seed: u64) -> Result<Vec<(u32, u32)>> {
    if k == 0 || k >= n {
        return Err(Error::BadParam(format!("need 1 <= k < n, got k = {k}, n = {n}")));
    }
    let mut rng = rng(seed);
    // Each vertex appears in `urn` once per unit of weight.
    let mut urn: Vec<u32> = (0..n as u32).collect();
    urn.reserve(n * k);
    let mut out_deg = vec![0usize; n];
    let mut open: Vec<u32> = (0..n as u32).collect();
    let mut insertions = Vec::with_capacity(n * k);
    while !open.is_empty() {
        let slot = rng.gen_range(0..open.len());
        let u = open[slot];
        let v = loop {
            let v = urn[rng.gen_range(0..urn.len())];
            if v != u {
                break v;
            }
        };
        insertions.push((u, v));
        urn.push(v);
        out_deg[u as usize] += 1;
        if out_deg[u as usize] == k {
            open.swap_remove(slot);
        }
    }
    Ok(insertions)
}

/// k-out preferential attachment with parallel edges collapsed afterwards,
/// so every final out-degree is at most `k`.
pub fn gen_pa(n: usize, k: usize, seed: u64) -> Result<DirectedGraph> {
    let mut out = vec![Vec::new(); n];
    for (u, v) in pa_insertions(n, k, seed)? {
        out[u as usize].push(v);
    }
    Ok(DirectedGraph::from_out_lists(out))
}

/// Stream-splitting rule: the seed of graph `id` inside a collection.
pub fn graph_seed(collection_seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(collection_seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollectionKind {
    Point,
    Interval,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub model: Model,
    pub param: f64,
    pub n: usize,
    pub seed: u64,
}

impl ManifestEntry {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            model: self.model,
            param: self.param,
            n: self.n,
        }
    }

    pub fn generate(&self) -> Result<DirectedGraph> {
        self.params().generate(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectionManifest {
    pub kind: CollectionKind,
    pub entries: Vec<ManifestEntry>,
}

impl CollectionManifest {
    pub fn new(kind: CollectionKind, entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::BadConfig(format!("duplicate graph id `{}`", w[0])));
        }
        for e in &entries {
            e.params().validate()?;
        }
        Ok(Self { kind, entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Entries of a single model, in manifest order.
    pub fn filter_model(&self, model: Model) -> Self {
        Self {
            kind: self.kind,
            entries: self.entries.iter().filter(|e| e.model == model).cloned().collect(),
        }
    }

    /// The manifest file is a bare JSON array of entries.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.entries)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<ManifestEntry> = serde_json::from_str(text)?;
        Self::new(CollectionKind::Custom, entries)
    }
}

/// Discrete parameter grid: `per_param` graphs for each listed parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointCollectionSpec {
    pub n: usize,
    pub per_param: usize,
    pub er: Vec<f64>,
    pub gr: Vec<f64>,
    pub pa: Vec<usize>,
}

impl Default for PointCollectionSpec {
    fn default() -> Self {
        Self {
            n: 500,
            per_param: 10,
            er: vec![0.03, 0.06, 0.1, 0.15, 0.2, 0.25],
            gr: vec![0.1, 0.175, 0.3],
            pa: vec![20, 40, 70],
        }
    }
}

/// `per_interval` uniform draws from each listed interval, per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntervalCollectionSpec {
    pub n: usize,
    pub per_interval: usize,
    pub er: Vec<(f64, f64)>,
    pub gr: Vec<(f64, f64)>,
    /// Integer ranges, drawn inclusively.
    pub pa: Vec<(usize, usize)>,
}

impl Default for IntervalCollectionSpec {
    fn default() -> Self {
        Self {
            n: 500,
            per_interval: 25,
            er: vec![(0.0, 0.01), (0.02, 0.03), (0.05, 0.07), (0.09, 0.1)],
            gr: vec![(0.0, 0.02), (0.04, 0.05), (0.08, 0.12), (0.15, 0.175)],
            pa: vec![(4, 7), (12, 18), (22, 25), (27, 30)],
        }
    }
}

fn entry_id(model: Model, index: usize) -> String {
    format!("{}_{:03}", model.as_str().to_ascii_lowercase(), index)
}

fn push_entry(
    entries: &mut Vec<ManifestEntry>,
    seed: u64,
    model: Model,
    index: usize,
    param: f64,
    n: usize,
) {
    let id = entry_id(model, index);
    let graph_seed = graph_seed(seed, &id);
    entries.push(ManifestEntry {
        id,
        model,
        param,
        n,
        seed: graph_seed,
    });
}

pub fn gen_point_collection(spec: &PointCollectionSpec, seed: u64) -> Result<CollectionManifest> {
    if spec.per_param == 0 {
        return Err(Error::BadConfig("per_param must be positive".into()));
    }
    let mut entries = Vec::new();
    let grids: [(Model, Vec<f64>); 3] = [
        (Model::Er, spec.er.clone()),
        (Model::Gr, spec.gr.clone()),
        (Model::Pa, spec.pa.iter().map(|&k| k as f64).collect()),
    ];
    for (model, grid) in grids {
        let mut index = 0;
        for &param in &grid {
            for _ in 0..spec.per_param {
                push_entry(&mut entries, seed, model, index, param, spec.n);
                index += 1;
            }
        }
    }
    CollectionManifest::new(CollectionKind::Point, entries)
}

pub fn gen_interval_collection(
    spec: &IntervalCollectionSpec,
    seed: u64,
) -> Result<CollectionManifest> {
    if spec.per_interval == 0 {
        return Err(Error::BadConfig("per_interval must be positive".into()));
    }
    let bad = |what: &str| Error::BadConfig(format!("empty or reversed interval in {what}"));
    let mut rng = rng(seed);
    let mut entries = Vec::new();
    for model in Model::ALL {
        let mut index = 0;
        let count = match model {
            Model::Er => spec.er.len(),
            Model::Gr => spec.gr.len(),
            Model::Pa => spec.pa.len(),
        };
        for interval in 0..count {
            for _ in 0..spec.per_interval {
                let param = match model {
                    Model::Er | Model::Gr => {
                        let (lo, hi) = if model == Model::Er {
                            spec.er[interval]
                        } else {
                            spec.gr[interval]
                        };
                        if !(lo < hi) {
                            return Err(bad(model.as_str()));
                        }
                        rng.gen_range(lo..hi)
                    }
                    Model::Pa => {
                        let (lo, hi) = spec.pa[interval];
                        if lo > hi {
                            return Err(bad("PA"));
                        }
                        rng.gen_range(lo..=hi) as f64
                    }
                };
                push_entry(&mut entries, seed, model, index, param, spec.n);
                index += 1;
            }
        }
    }
    CollectionManifest::new(CollectionKind::Interval, entries)
}

/// Uniformly random permutation of `0..n`, used by tests and controls.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng(seed));
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_extremes() {
        assert_eq!(gen_er(5, 0.0, 3).unwrap().edge_count(), 0);
        assert_eq!(gen_er(5, 1.0, 3).unwrap().edge_count(), 20);
        assert!(gen_er(5, 1.5, 3).is_err());
    }

    #[test]
    fn er_edge_count_moments() {
        let n = 500usize;
        let pairs = (n * (n - 1)) as f64;
        let seeds = 200;
        let mean = (0..seeds)
            .map(|s| gen_er(n, 0.1, s).unwrap().edge_count() as f64)
            .sum::<f64>()
            / seeds as f64;
        let sigma = (pairs * 0.1 * 0.9).sqrt();
        assert!((mean - 24_950.0).abs() <= 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn gr_extremes() {
        assert_eq!(gen_gr(30, 0.0, 1).unwrap().edge_count(), 0);
        let g = gen_gr(30, std::f64::consts::SQRT_2, 1).unwrap();
        assert_eq!(g.edge_count(), 30 * 29 / 2);
        assert!(g.edges().all(|(u, v)| !g.has_edge(v, u)));
        assert!(gen_gr(30, -0.1, 1).is_err());
    }

    #[test]
    fn gr_orientation_bias() {
        let (mut forward, mut total) = (0usize, 0usize);
        for s in 0..200 {
            let g = gen_gr(200, 0.2, s).unwrap();
            total += g.edge_count();
            forward += g.edges().filter(|(u, v)| u < v).count();
        }
        let frac = forward as f64 / total as f64;
        let sigma = (1.0 / 3.0 * 2.0 / 3.0 / total as f64).sqrt();
        assert!((frac - 1.0 / 3.0).abs() <= 3.0 * sigma, "fraction {frac}");
    }

    #[test]
    fn pa_out_degrees() {
        for seed in 0..5 {
            let ins = pa_insertions(50, 7, seed).unwrap();
            let mut pre = vec![0; 50];
            for &(u, v) in &ins {
                assert_ne!(u, v);
                pre[u as usize] += 1;
            }
            assert!(pre.iter().all(|&d| d == 7));
            let g = gen_pa(50, 7, seed).unwrap();
            assert!(g.degrees().0.iter().all(|&d| d <= 7 && d >= 1));
        }
        assert_eq!(gen_pa(2, 1, 9).unwrap().edges().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        assert!(gen_pa(5, 5, 0).is_err());
        assert!(gen_pa(5, 0, 0).is_err());
    }

    #[test]
    fn pa_in_degree_heavy_tail() {
        let heavy = (0..100)
            .filter(|&s| {
                let g = gen_pa(500, 20, s).unwrap();
                let (_, inn) = g.degrees();
                let mean = inn.iter().sum::<usize>() as f64 / 500.0;
                *inn.iter().max().unwrap() as f64 > 3.0 * mean
            })
            .count();
        assert!(heavy >= 90, "{heavy} of 100 seeds heavy-tailed");
    }

    #[test]
    fn determinism() {
        for params in [
            ModelParams::new(Model::Er, 0.2, 40).unwrap(),
            ModelParams::new(Model::Gr, 0.3, 40).unwrap(),
            ModelParams::new(Model::Pa, 5.0, 40).unwrap(),
        ] {
            assert_eq!(params.generate(11).unwrap(), params.generate(11).unwrap());
        }
        assert_eq!(graph_seed(7, "er_000"), graph_seed(7, "er_000"));
        assert_ne!(graph_seed(7, "er_000"), graph_seed(7, "er_001"));
        assert_ne!(graph_seed(7, "er_000"), graph_seed(8, "er_000"));
    }

    #[test]
    fn point_collection_counts() {
        let m = gen_point_collection(&PointCollectionSpec::default(), 1).unwrap();
        assert_eq!(m.len(), 120);
        let count = |model| m.entries.iter().filter(|e| e.model == model).count();
        assert_eq!((count(Model::Er), count(Model::Gr), count(Model::Pa)), (60, 30, 30));
        assert!(m.entries.iter().all(|e| e.n == 500));
    }

    #[test]
    fn interval_collection_counts_and_ranges() {
        let spec = IntervalCollectionSpec::default();
        let m = gen_interval_collection(&spec, 1).unwrap();
        assert_eq!(m.len(), 300);
        for model in Model::ALL {
            assert_eq!(m.filter_model(model).len(), 100);
        }
        for e in &m.entries {
            let inside = match e.model {
                Model::Er => spec.er.iter().any(|&(lo, hi)| lo <= e.param && e.param < hi),
                Model::Gr => spec.gr.iter().any(|&(lo, hi)| lo <= e.param && e.param < hi),
                Model::Pa => spec
                    .pa
                    .iter()
                    .any(|&(lo, hi)| lo as f64 <= e.param && e.param <= hi as f64),
            };
            assert!(inside, "{e:?}");
        }
        assert_eq!(m, gen_interval_collection(&spec, 1).unwrap());
    }

    #[test]
    fn manifest_json_round_trip() {
        let spec = PointCollectionSpec {
            n: 80,
            per_param: 2,
            ..Default::default()
        };
        let m = gen_point_collection(&spec, 5).unwrap();
        let back = CollectionManifest::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.entries, m.entries);
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        let first = &v.as_array().unwrap()[0];
        for key in ["id", "model", "param", "n", "seed"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let e = ManifestEntry {
            id: "x".into(),
            model: Model::Er,
            param: 0.1,
            n: 5,
            seed: 0,
        };
        assert!(matches!(
            CollectionManifest::new(CollectionKind::Custom, vec![e.clone(), e]),
            Err(Error::BadConfig(_))
        ));
    }
}
