//! Distance matrices over graph collections.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{GraphletFeatures, PortraitFeatures, TopologyFeatures};
use crate::graphlets::{mean_orbit_emd, profile_distance};
use crate::portrait::{js_divergence, portrait_distribution};
use crate::random::CollectionManifest;

/// A symmetric matrix with zero diagonal, labelled by graph ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub metric: String,
    pub labels: Vec<String>,
    /// Row-major `n × n` values.
    values: Vec<f64>,
    /// Settings the matrix was computed with (p, eps, seed, ...).
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl DistanceMatrix {
    /// Validates shape, zero diagonal, symmetry and nonnegativity.
    pub fn new(metric: impl Into<String>, labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n * n {
            return Err(Error::SizeMismatch(values.len(), n * n));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::BadParam(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if a != b || !(a >= 0.0) || !a.is_finite() {
                    return Err(Error::BadParam(format!("entry ({i}, {j}) is {a} / {b}")));
                }
            }
        }
        Ok(Self {
            metric: metric.into(),
            labels,
            values,
            provenance: BTreeMap::new(),
        })
    }

    /// Fills the upper triangle with `f(i, j)` in parallel and mirrors it.
    pub fn from_fn<F>(metric: impl Into<String>, labels: Vec<String>, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Result<f64> + Sync,
    {
        let n = labels.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let filled: Vec<f64> = pairs.par_iter().map(|&(i, j)| f(i, j)).collect::<Result<_>>()?;
        let mut values = vec![0.0; n * n];
        for (&(i, j), &d) in pairs.iter().zip(&filled) {
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
        Self::new(metric, labels, values)
    }

    /// Hand-written matrices, mostly for tests.
    pub fn from_rows(metric: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let labels = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(metric, labels, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn with_provenance(mut self, key: &str, value: impl ToString) -> Self {
        self.provenance.insert(key.into(), value.to_string());
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Relabels point `i` as `perm[i]`: entry `(perm[i], perm[j])` of the
    /// result is entry `(i, j)` here. Labels stay in place.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[perm[i] * n + perm[j]] = self.values[i * n + j];
            }
        }
        Self {
            values,
            ..self.clone()
        }
    }

    /// Restriction to the given indices, in that order.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let values = indices
            .iter()
            .flat_map(|&i| indices.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Self {
            metric: self.metric.clone(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            values,
            provenance: self.provenance.clone(),
        }
    }

    /// Provenance as `# key: value` lines, then a header row of ids and one
    /// row per graph.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# metric: {}", self.metric).unwrap();
        for (k, v) in &self.provenance {
            writeln!(out, "# {k}: {v}").unwrap();
        }
        out.push_str("id");
        for l in &self.labels {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for v in self.row(i) {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut metric = String::from("unknown");
        let mut provenance = BTreeMap::new();
        let mut labels: Option<Vec<String>> = None;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let parse_err = |msg: String| Error::Parse { line: lineno + 1, msg };
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.trim().split_once(": ") {
                    if k == "metric" {
                        metric = v.to_string();
                    } else {
                        provenance.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let first = fields.next().unwrap_or_default();
            match &labels {
                None => {
                    if first != "id" {
                        return Err(parse_err("expected header row starting with `id`".into()));
                    }
                    labels = Some(fields.map(str::to_string).collect());
                }
                Some(ls) => {
                    let row: Vec<f64> = fields
                        .map(|f| f.trim().parse::<f64>().map_err(|e| parse_err(e.to_string())))
                        .collect::<Result<_>>()?;
                    if row.len() != ls.len() {
                        return Err(parse_err(format!("{} values, expected {}", row.len(), ls.len())));
                    }
                    values.extend(row);
                }
            }
        }
        let mut m = Self::new(metric, labels.unwrap_or_default(), values)?;
        m.provenance = provenance;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Self = serde_json::from_str(text)?;
        let mut m = Self::new(raw.metric, raw.labels, raw.values)?;
        m.provenance = raw.provenance;
        Ok(m)
    }
}

/// The pseudometrics available on a collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "dbeta")]
    DBeta,
    #[serde(rename = "ddelta")]
    DDelta,
    #[serde(rename = "triad-euclid")]
    TriadEuclid,
    #[serde(rename = "triad-emd")]
    TriadEmd,
    #[serde(rename = "pd")]
    Pd,
    #[serde(rename = "dp")]
    Param,
    #[serde(rename = "random")]
    Random,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::DBeta,
        Metric::DDelta,
        Metric::TriadEuclid,
        Metric::TriadEmd,
        Metric::Pd,
        Metric::Param,
        Metric::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::DBeta => "dbeta",
            Metric::DDelta => "ddelta",
            Metric::TriadEuclid => "triad-euclid",
            Metric::TriadEmd => "triad-emd",
            Metric::Pd => "pd",
            Metric::Param => "dp",
            Metric::Random => "random",
        }
    }

    pub fn needs_topology(self) -> bool {
        matches!(self, Metric::DBeta | Metric::DDelta)
    }

    pub fn needs_graphlets(self) -> bool {
        matches!(self, Metric::TriadEuclid | Metric::TriadEmd)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::BadParam(format!("unknown metric `{s}`")))
    }
}

/// Features of one graph, as far as they were computed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphFeatures {
    pub id: String,
    pub topology: Option<TopologyFeatures>,
    pub graphlets: Option<GraphletFeatures>,
    pub portrait: Option<PortraitFeatures>,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `|param_i − param_j|` for two graphs of the same model.
pub fn parameter_distance(manifest: &CollectionManifest, i: usize, j: usize) -> Result<f64> {
    let entries = &manifest.entries;
    let len = entries.len();
    let get = |k: usize| entries.get(k).ok_or_else(|| Error::MissingGraph(format!("index {k} of {len}")));
    let (a, b) = (get(i)?, get(j)?);
    if a.model != b.model {
        return Err(Error::ModelMismatch(a.model.to_string(), b.model.to_string()));
    }
    Ok((a.param - b.param).abs())
}

/// Symmetric matrix with i.i.d. uniform(0, 1) off-diagonal entries.
pub fn random_control(labels: Vec<String>, seed: u64) -> DistanceMatrix {
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.gen();
            values[i * n + j] = u;
            values[j * n + i] = u;
        }
    }
    DistanceMatrix::new(Metric::Random.as_str(), labels, values)
        .expect("uniform entries form a valid matrix")
        .with_provenance("seed", seed)
}

fn missing(metric: Metric, id: &str, what: &str) -> Error {
    Error::MetricUnavailable(format!("{metric} needs {what} features for `{id}`"))
}

/// Pairwise distances under `metric`. `features` must follow the manifest
/// order; `seed` is only used by the random control.
pub fn distance_matrix(
    manifest: &CollectionManifest,
    features: &[GraphFeatures],
    metric: Metric,
    seed: u64,
) -> Result<DistanceMatrix> {
    let entries = &manifest.entries;
    let labels: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    if metric != Metric::Random && metric != Metric::Param {
        if features.len() != entries.len() {
            return Err(Error::SizeMismatch(features.len(), entries.len()));
        }
        if let Some((e, f)) = entries.iter().zip(features).find(|(e, f)| e.id != f.id) {
            return Err(Error::MissingGraph(format!("{} (found features for {})", e.id, f.id)));
        }
    }

    let topo = |k: usize| {
        features[k]
            .topology
            .as_ref()
            .ok_or_else(|| missing(metric, &features[k].id, "topology"))
    };
    let glets = |k: usize| {
        features[k]
            .graphlets
            .as_ref()
            .ok_or_else(|| missing(metric, &features[k].id, "graphlet"))
    };

    let matrix = match metric {
        Metric::DBeta => DistanceMatrix::from_fn(metric.as_str(), labels, |i, j| {
            Ok(euclidean(&topo(i)?.b, &topo(j)?.b))
        })?,
        Metric::DDelta => DistanceMatrix::from_fn(metric.as_str(), labels, |i, j| {
            Ok(euclidean(&topo(i)?.c, &topo(j)?.c))
        })?,
        Metric::TriadEuclid => DistanceMatrix::from_fn(metric.as_str(), labels, |i, j| {
            Ok(profile_distance(&glets(i)?.phi, &glets(j)?.phi))
        })?,
        Metric::TriadEmd => {
            let dense = (0..features.len())
                .map(|k| glets(k).map(|g| g.dense_distributions()))
                .collect::<Result<Vec<_>>>()?;
            DistanceMatrix::from_fn(metric.as_str(), labels, |i, j| mean_orbit_emd(&dense[i], &dense[j]))?
        }
        Metric::Pd => {
            let dists = features
                .iter()
                .map(|f| {
                    let p = f.portrait.as_ref().ok_or_else(|| missing(metric, &f.id, "portrait"))?;
                    portrait_distribution(&p.portrait()?)
                })
                .collect::<Result<Vec<_>>>()?;
            DistanceMatrix::from_fn(metric.as_str(), labels, |i, j| Ok(js_divergence(&dists[i], &dists[j])))?
        }
        Metric::Param => {
            if let Some(other) = entries.iter().find(|e| e.model != entries[0].model) {
                return Err(Error::MetricUnavailable(format!(
                    "dp is undefined across models ({} and {})",
                    entries[0].model, other.model
                )));
            }
            DistanceMatrix::from_fn(metric.as_str(), labels, |i, j| parameter_distance(manifest, i, j))?
        }
        Metric::Random => return Ok(random_control(labels, seed)),
    };

    let topology_settings = features.first().and_then(|f| f.topology.as_ref());
    Ok(match (metric.needs_topology(), topology_settings) {
        (true, Some(t)) => matrix.with_provenance("p", t.p).with_provenance(
            "eps",
            t.eps.map_or_else(|| "exact".to_string(), |e| e.to_string()),
        ),
        _ => matrix,
    })
}
