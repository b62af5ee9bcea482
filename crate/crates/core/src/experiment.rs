//! End-to-end experiments: collection, features, distance matrices and the
//! comparison, permutation-test and k-NN tables, driven by a TOML config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    graphlet_key, topology_key, write_atomic, FeatureCache, GraphletFeatures, PortraitFeatures,
    TopologyFeatures, PORTRAIT_KEY,
};
use crate::graphlets::OrbitCounting;
use crate::pseudometrics::{distance_matrix, DistanceMatrix, GraphFeatures, Metric};
use crate::random::{
    gen_interval_collection, gen_point_collection, graph_seed, CollectionKind, CollectionManifest,
    IntervalCollectionSpec, Model, PointCollectionSpec,
};
use crate::stats::{
    benjamini_yekutieli, bonferroni, fm_compare, knn_classify_loo, knn_regress_loo, permutation_test,
    signed_dcor, Statistic,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Commit recorded in provenance headers, taken from `FLAGMETRICS_COMMIT`
/// at build time.
pub const COMMIT: &str = match option_env!("FLAGMETRICS_COMMIT") {
    Some(c) => c,
    None => "unknown",
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CollectionConfig {
    Point(PointCollectionSpec),
    Interval(IntervalCollectionSpec),
    /// A manifest JSON written by `generate` or by hand.
    Custom { path: PathBuf },
}

impl Default for CollectionConfig {
    fn default() -> Self {
        CollectionConfig::Point(PointCollectionSpec::default())
    }
}

impl CollectionConfig {
    /// Overrides the vertex count of generated collections.
    pub fn set_n(&mut self, n: usize) {
        match self {
            CollectionConfig::Point(s) => s.n = n,
            CollectionConfig::Interval(s) => s.n = n,
            CollectionConfig::Custom { .. } => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub compare: bool,
    pub permtest: bool,
    pub knn: bool,
    pub perms: usize,
    pub alpha: f64,
    pub knn_k: usize,
    pub statistics: Vec<Statistic>,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            compare: true,
            permtest: true,
            knn: true,
            perms: 2000,
            alpha: 0.05,
            knn_k: 3,
            statistics: vec![Statistic::Dcor],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    /// Top homology dimension.
    pub p: usize,
    /// Column-addition budget of the Betti numbers behind `dbeta`; exact when absent.
    pub betti_eps: Option<u64>,
    /// Extra `dbeta` variants with approximate Betti numbers, one per budget.
    pub eps: Vec<u64>,
    pub metrics: Vec<Metric>,
    pub counting: OrbitCounting,
    pub collection: CollectionConfig,
    pub stats: StatsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            workers: None,
            p: 6,
            betti_eps: None,
            eps: Vec::new(),
            metrics: Metric::ALL.to_vec(),
            counting: OrbitCounting::Subgraph,
            collection: CollectionConfig::default(),
            stats: StatsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::BadConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; a relative custom manifest path is taken relative to
    /// the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fs::read_to_string(path)?)?;
        if let CollectionConfig::Custom { path: manifest } = &mut cfg.collection {
            if manifest.is_relative() {
                if let Some(dir) = path.parent() {
                    *manifest = dir.join(&*manifest);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::BadConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.stats.perms == 0 {
            return Err(Error::BadConfig("stats.perms must be at least 1".into()));
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(Error::BadAlpha(self.stats.alpha));
        }
        if self.stats.knn_k == 0 {
            return Err(Error::BadConfig("stats.knn_k must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::BadConfig("workers must be at least 1".into()));
        }
        if let CollectionConfig::Custom { path } = &self.collection {
            if !path.exists() {
                return Err(Error::BadConfig(format!("manifest {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    fn needs_topology(&self) -> bool {
        self.metrics.iter().any(|m| m.needs_topology()) || !self.eps.is_empty() || self.stats.knn
    }
}

/// A labelled table of numbers written as CSV with `# key: value` headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
    pub provenance: BTreeMap<String, String>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
            provenance: BTreeMap::new(),
        }
    }

    pub fn get(&self, row: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|(r, _)| r == row)?.1[c]
    }

    /// Missing cells are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.provenance {
            let _ = writeln!(s, "# {k}: {v}");
        }
        let _ = writeln!(s, "{},{}", self.name, self.columns.join(","));
        for (label, cells) in &self.rows {
            s.push_str(label);
            for c in cells {
                match c {
                    Some(x) => {
                        let _ = write!(s, ",{x}");
                    }
                    None => s.push_str(",NA"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// A named subset of the collection, by manifest index.
#[derive(Debug, Clone, PartialEq)]
pub struct Scope {
    pub name: String,
    pub model: Option<Model>,
    pub indices: Vec<usize>,
}

/// The whole collection followed by each model present in it.
pub fn model_scopes(manifest: &CollectionManifest) -> Vec<Scope> {
    let mut scopes = vec![Scope {
        name: "all".into(),
        model: None,
        indices: (0..manifest.len()).collect(),
    }];
    for model in Model::ALL {
        let indices: Vec<usize> = (0..manifest.len()).filter(|&i| manifest.entries[i].model == model).collect();
        if !indices.is_empty() {
            scopes.push(Scope {
                name: model.as_str().to_ascii_lowercase(),
                model: Some(model),
                indices,
            });
        }
    }
    scopes
}

/// One scope per `(model, parameter)` pair, in manifest order.
pub fn parameter_slices(manifest: &CollectionManifest) -> Vec<Scope> {
    let mut slices: Vec<Scope> = Vec::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        let name = format!("{}-{}", e.model.as_str().to_ascii_lowercase(), e.param);
        match slices.iter_mut().find(|s| s.name == name) {
            Some(s) => s.indices.push(i),
            None => slices.push(Scope {
                name,
                model: Some(e.model),
                indices: vec![i],
            }),
        }
    }
    slices
}

/// Row name of a `dbeta` variant with budget `eps`.
pub fn eps_row(eps: u64) -> String {
    format!("dbeta-eps{eps}")
}

/// Features of every graph, in manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionFeatures {
    pub graphs: Vec<GraphFeatures>,
    /// `variants[v][g]`: topology of graph `g` under budget `eps[v]`.
    pub variants: Vec<Vec<TopologyFeatures>>,
}

/// One entry of the permutation-test report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermtestRecord {
    pub slice: String,
    pub row: String,
    pub column: String,
    pub statistic: Statistic,
    pub value: f64,
    pub permutations: usize,
    pub p_value: f64,
    pub bonferroni: bool,
    pub benjamini_yekutieli: bool,
}

pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub manifest: CollectionManifest,
    log: Vec<String>,
}

impl Experiment {
    /// Builds or loads the manifest described by the config.
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let manifest = match &cfg.collection {
            CollectionConfig::Point(spec) => gen_point_collection(spec, cfg.seed)?,
            CollectionConfig::Interval(spec) => gen_interval_collection(spec, cfg.seed)?,
            CollectionConfig::Custom { path } => CollectionManifest::from_json(&fs::read_to_string(path)?)?,
        };
        let mut log = vec![
            format!("flagmetrics {VERSION} (commit {COMMIT})"),
            format!("collection {:?}: {} graphs, seed {}", manifest.kind, manifest.len(), cfg.seed),
        ];
        log.extend(manifest.entries.iter().map(|e| {
            format!("graph {} model {} param {} n {} seed {}", e.id, e.model, e.param, e.n, e.seed)
        }));
        Ok(Self { cfg, manifest, log })
    }

    pub fn out(&self) -> &Path {
        &self.cfg.out
    }

    fn note(&mut self, line: String) {
        log::info!("{line}");
        self.log.push(line);
    }

    fn write(&mut self, rel: &str, text: &str) -> Result<PathBuf> {
        let path = self.cfg.out.join(rel);
        write_atomic(&path, text.as_bytes())?;
        self.log.push(format!("wrote {rel}"));
        Ok(path)
    }

    fn provenance(&self) -> BTreeMap<String, String> {
        let mut p = BTreeMap::new();
        p.insert("version".into(), VERSION.into());
        p.insert("commit".into(), COMMIT.into());
        p.insert("seed".into(), self.cfg.seed.to_string());
        p.insert("p".into(), self.cfg.p.to_string());
        p.insert(
            "eps".into(),
            self.cfg.betti_eps.map_or_else(|| "exact".into(), |e| e.to_string()),
        );
        p.insert("perms".into(), self.cfg.stats.perms.to_string());
        p
    }

    /// Writes `manifest.json` and one edge list per graph.
    pub fn write_collection(&mut self) -> Result<()> {
        let json = self.manifest.to_json()?;
        self.write("manifest.json", &json)?;
        let lists = self
            .manifest
            .entries
            .par_iter()
            .map(|e| Ok((e.id.clone(), e.generate()?.to_edge_list())))
            .collect::<Result<Vec<_>>>()?;
        for (id, text) in lists {
            self.write(&format!("graphs/{id}.edges"), &text)?;
        }
        Ok(())
    }

    /// Computes (or loads from `features/`) everything the configured
    /// metrics and tables need.
    pub fn features(&mut self) -> Result<CollectionFeatures> {
        let cache = FeatureCache::new(self.cfg.out.join("features"))?;
        let cfg = &self.cfg;
        let topology = cfg.needs_topology();
        let graphlets = cfg.metrics.iter().any(|m| m.needs_graphlets());
        let portrait = cfg.metrics.contains(&Metric::Pd);
        let results = self
            .manifest
            .entries
            .par_iter()
            .map(|entry| {
                let g = entry.generate()?;
                let mut f = GraphFeatures {
                    id: entry.id.clone(),
                    ..Default::default()
                };
                if topology {
                    f.topology = Some(cache.get_or_compute(entry, &topology_key(cfg.p, cfg.betti_eps), || {
                        Ok(TopologyFeatures::compute(&g, cfg.p, cfg.betti_eps))
                    })?);
                }
                let variants = cfg
                    .eps
                    .iter()
                    .map(|&e| {
                        cache.get_or_compute(entry, &topology_key(cfg.p, Some(e)), || {
                            Ok(TopologyFeatures::compute(&g, cfg.p, Some(e)))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if graphlets {
                    f.graphlets = Some(cache.get_or_compute(entry, &graphlet_key(cfg.counting), || {
                        GraphletFeatures::compute(&g, cfg.counting)
                    })?);
                }
                if portrait {
                    f.portrait = Some(cache.get_or_compute(entry, PORTRAIT_KEY, || Ok(PortraitFeatures::compute(&g)))?);
                }
                Ok((f, variants))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut graphs = Vec::with_capacity(results.len());
        let mut variants = vec![Vec::with_capacity(results.len()); self.cfg.eps.len()];
        for (f, vs) in results {
            graphs.push(f);
            for (slot, v) in variants.iter_mut().zip(vs) {
                slot.push(v);
            }
        }
        let approximate = graphs
            .iter()
            .filter(|f| f.topology.as_ref().is_some_and(|t| !t.exact))
            .count();
        self.note(format!(
            "features: {} graphs, p {}, {} with approximate Betti numbers",
            graphs.len(),
            self.cfg.p,
            approximate
        ));
        Ok(CollectionFeatures { graphs, variants })
    }

    /// Row names of the comparison tables: configured metrics, then the
    /// approximate `dbeta` variants, with the random control last.
    pub fn row_names(&self) -> Vec<String> {
        let mut rows: Vec<String> = self
            .cfg
            .metrics
            .iter()
            .filter(|m| **m != Metric::Random)
            .map(|m| m.as_str().to_string())
            .collect();
        rows.extend(self.cfg.eps.iter().map(|&e| eps_row(e)));
        if self.cfg.metrics.contains(&Metric::Random) {
            rows.push(Metric::Random.as_str().into());
        }
        rows
    }

    /// Distance matrices over the whole collection, keyed by row name. The
    /// parameter distance is left out because it is only defined per model.
    pub fn matrices(&self, features: &CollectionFeatures) -> Result<BTreeMap<String, DistanceMatrix>> {
        let seed = graph_seed(self.cfg.seed, "random-control");
        let mut out = BTreeMap::new();
        for &metric in self.cfg.metrics.iter().filter(|&&m| m != Metric::Param) {
            let d = distance_matrix(&self.manifest, &features.graphs, metric, seed)?;
            out.insert(metric.as_str().to_string(), d);
        }
        for (&eps, topo) in self.cfg.eps.iter().zip(&features.variants) {
            let swapped: Vec<GraphFeatures> = features
                .graphs
                .iter()
                .zip(topo)
                .map(|(f, t)| GraphFeatures {
                    id: f.id.clone(),
                    topology: Some(t.clone()),
                    ..Default::default()
                })
                .collect();
            let mut d = distance_matrix(&self.manifest, &swapped, Metric::DBeta, seed)?;
            d.metric = eps_row(eps);
            out.insert(eps_row(eps), d);
        }
        Ok(out)
    }

    /// Matrices restricted to `scope`, including the parameter distance
    /// when the scope holds a single model.
    pub fn scoped(&self, all: &BTreeMap<String, DistanceMatrix>, scope: &Scope) -> Result<BTreeMap<String, DistanceMatrix>> {
        let mut out: BTreeMap<String, DistanceMatrix> =
            all.iter().map(|(k, d)| (k.clone(), d.submatrix(&scope.indices))).collect();
        if scope.model.is_some() && self.cfg.metrics.contains(&Metric::Param) {
            let sub = CollectionManifest {
                kind: self.manifest.kind,
                entries: scope.indices.iter().map(|&i| self.manifest.entries[i].clone()).collect(),
            };
            out.insert(Metric::Param.as_str().into(), distance_matrix(&sub, &[], Metric::Param, 0)?);
        }
        Ok(out)
    }

    /// FM and signed dCor of every row metric against each column metric.
    pub fn compare_table(
        &self,
        scope: &str,
        matrices: &BTreeMap<String, DistanceMatrix>,
        rows: &[String],
        cols: &[String],
    ) -> Result<Table> {
        let mut columns: Vec<String> = cols.iter().map(|c| format!("FM-{c}")).collect();
        columns.extend(cols.iter().map(|c| format!("dCor-{c}")));
        let mut table = Table::new(format!("compare-{scope}"), columns);
        table.provenance = self.provenance();
        let get = |name: &String| {
            matrices
                .get(name)
                .ok_or_else(|| Error::MetricUnavailable(format!("{name} in scope {scope}")))
        };
        let present: Vec<&String> = rows.iter().filter(|r| matrices.contains_key(*r)).collect();
        let cells = present
            .par_iter()
            .map(|&row| {
                let d = get(row)?;
                let mut cells = Vec::with_capacity(2 * cols.len());
                for c in cols {
                    cells.push(Some(fm_compare(d, get(c)?)?));
                }
                for c in cols {
                    cells.push(Some(signed_dcor(d, get(c)?)?));
                }
                Ok((row.clone(), cells))
            })
            .collect::<Result<Vec<_>>>()?;
        table.rows = cells;
        Ok(table)
    }

    /// Permutation tests of each row metric against `dbeta` and `ddelta`
    /// inside every slice, with Bonferroni per slice and statistic and
    /// Benjamini-Yekutieli over the whole report.
    pub fn permtest(
        &self,
        all: &BTreeMap<String, DistanceMatrix>,
        slices: &[Scope],
    ) -> Result<Vec<PermtestRecord>> {
        let cols: Vec<String> = [Metric::DBeta, Metric::DDelta]
            .iter()
            .map(|m| m.as_str().to_string())
            .filter(|c| all.contains_key(c))
            .collect();
        let rows = self.row_names();
        let mut jobs = Vec::new();
        for slice in slices.iter().filter(|s| s.indices.len() >= 3) {
            let scoped = self.scoped(all, slice)?;
            for &stat in &self.cfg.stats.statistics {
                for row in rows.iter().filter(|r| scoped.contains_key(*r)) {
                    for col in &cols {
                        jobs.push((slice.name.clone(), row.clone(), col.clone(), stat, scoped[row].clone(), scoped[col].clone()));
                    }
                }
            }
        }
        let perms = self.cfg.stats.perms;
        let seed = self.cfg.seed;
        let mut records = jobs
            .into_par_iter()
            .map(|(slice, row, col, stat, d1, d2)| {
                let key = format!("permtest/{slice}/{row}/{col}/{stat:?}");
                let t = permutation_test(&d1, &d2, stat, perms, graph_seed(seed, &key))?;
                Ok(PermtestRecord {
                    slice,
                    row,
                    column: col,
                    statistic: stat,
                    value: t.statistic,
                    permutations: t.permutations,
                    p_value: t.p_value,
                    bonferroni: false,
                    benjamini_yekutieli: false,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let alpha = self.cfg.stats.alpha;
        let ps: Vec<f64> = records.iter().map(|r| r.p_value).collect();
        if !ps.is_empty() {
            for (r, by) in records.iter_mut().zip(benjamini_yekutieli(&ps, alpha)?) {
                r.benjamini_yekutieli = by;
            }
        }
        let mut families: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            families.entry((r.slice.clone(), format!("{:?}", r.statistic))).or_default().push(i);
        }
        for members in families.values() {
            let ps: Vec<f64> = members.iter().map(|&i| records[i].p_value).collect();
            for (&i, b) in members.iter().zip(bonferroni(&ps, alpha)?) {
                records[i].bonferroni = b;
            }
        }
        Ok(records)
    }

    fn permtest_csv(&self, records: &[PermtestRecord]) -> String {
        let mut s = String::new();
        let mut prov = self.provenance();
        prov.insert("alpha".into(), self.cfg.stats.alpha.to_string());
        for (k, v) in prov {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s.push_str("slice,row,column,statistic,value,permutations,p_value,bonferroni,benjamini_yekutieli\n");
        for r in records {
            let stat = match r.statistic {
                Statistic::Dcor => "dcor",
                Statistic::Fm => "fm",
            };
            let _ = writeln!(
                s,
                "{},{},{},{stat},{},{},{},{},{}",
                r.slice, r.row, r.column, r.value, r.permutations, r.p_value, r.bonferroni, r.benjamini_yekutieli
            );
        }
        s
    }

    /// Leave-one-out k-NN tables: parameter and model classification for
    /// the point-drawn collection, parameter regression otherwise, and the
    /// prediction of `b(G)` and `c(G)` per model and combined.
    pub fn knn_tables(&self, all: &BTreeMap<String, DistanceMatrix>, features: &CollectionFeatures) -> Result<Vec<Table>> {
        let k = self.cfg.stats.knn_k;
        let scopes = model_scopes(&self.manifest);
        let rows = self.row_names();
        let mut tables = Vec::new();
        let mut prov = self.provenance();
        prov.insert("knn_k".into(), k.to_string());

        let entries = &self.manifest.entries;
        let per_model: Vec<&Scope> = scopes.iter().filter(|s| s.model.is_some()).collect();
        let scoped: Vec<BTreeMap<String, DistanceMatrix>> =
            scopes.iter().map(|s| self.scoped(all, s)).collect::<Result<_>>()?;
        let by_name = |name: &str| scopes.iter().position(|s| s.name == name).expect("scope exists");

        let fits = |scope: &Scope| k < scope.indices.len();
        if self.manifest.kind == CollectionKind::Point {
            let mut cols: Vec<String> = per_model.iter().map(|s| s.name.clone()).collect();
            cols.push("model".into());
            let mut t = Table::new("classify", cols);
            t.provenance = prov.clone();
            for row in &rows {
                let mut cells = Vec::new();
                for s in &per_model {
                    let d = scoped[by_name(&s.name)].get(row);
                    let labels: Vec<String> = s.indices.iter().map(|&i| entries[i].param.to_string()).collect();
                    cells.push(match d {
                        Some(d) if fits(s) => Some(knn_classify_loo(d, &labels, k)?.rate),
                        _ => None,
                    });
                }
                let labels: Vec<Model> = entries.iter().map(|e| e.model).collect();
                cells.push(match all.get(row) {
                    Some(d) if k < d.len() => Some(knn_classify_loo(d, &labels, k)?.rate),
                    _ => None,
                });
                t.rows.push((row.clone(), cells));
            }
            tables.push(t);
        } else {
            let mut t = Table::new("regress-param", per_model.iter().map(|s| s.name.clone()).collect());
            t.provenance = prov.clone();
            for row in &rows {
                let mut cells = Vec::new();
                for s in &per_model {
                    let targets: Vec<Vec<f64>> = s.indices.iter().map(|&i| vec![entries[i].param]).collect();
                    cells.push(match scoped[by_name(&s.name)].get(row) {
                        Some(d) if fits(s) => Some(knn_regress_loo(d, &targets, k)?.mse),
                        _ => None,
                    });
                }
                t.rows.push((row.clone(), cells));
            }
            tables.push(t);
        }

        let topo: Option<Vec<&TopologyFeatures>> = features.graphs.iter().map(|f| f.topology.as_ref()).collect();
        if let Some(topo) = topo {
            let mut order: Vec<&Scope> = per_model.clone();
            order.push(&scopes[0]);
            for (name, pick) in [("predict-betti", 0usize), ("predict-simplex", 1)] {
                let mut t = Table::new(name, order.iter().map(|s| s.name.clone()).collect());
                t.provenance = prov.clone();
                for row in &rows {
                    let mut cells = Vec::new();
                    for s in &order {
                        let targets: Vec<Vec<f64>> = s
                            .indices
                            .iter()
                            .map(|&i| if pick == 0 { topo[i].b.clone() } else { topo[i].c.clone() })
                            .collect();
                        cells.push(match scoped[by_name(&s.name)].get(row) {
                            Some(d) if fits(s) => Some(knn_regress_loo(d, &targets, k)?.mse),
                            _ => None,
                        });
                    }
                    t.rows.push((row.clone(), cells));
                }
                tables.push(t);
            }
        }
        Ok(tables)
    }

    /// Comparison columns present among `all`: `dbeta` and `ddelta`.
    pub fn default_columns(&self, all: &BTreeMap<String, DistanceMatrix>) -> Vec<String> {
        [Metric::DBeta, Metric::DDelta]
            .iter()
            .map(|m| m.as_str().to_string())
            .filter(|c| all.contains_key(c))
            .collect()
    }

    /// `config.toml` without the output directory and worker count, which
    /// do not affect results.
    pub fn write_config(&mut self) -> Result<()> {
        let config = ExperimentConfig {
            out: PathBuf::from("."),
            workers: None,
            ..self.cfg.clone()
        }
        .to_toml()?;
        self.write("config.toml", &config)?;
        Ok(())
    }

    /// `dist/{scope}/{metric}.csv` for every scope.
    pub fn write_distances(&mut self, all: &BTreeMap<String, DistanceMatrix>) -> Result<()> {
        for scope in model_scopes(&self.manifest) {
            for (name, d) in self.scoped(all, &scope)? {
                self.write(&format!("dist/{}/{name}.csv", scope.name), &d.to_csv())?;
            }
        }
        Ok(())
    }

    /// `tables/compare-{scope}.csv`; returns the tables written.
    pub fn write_compare(
        &mut self,
        all: &BTreeMap<String, DistanceMatrix>,
        rows: &[String],
        cols: &[String],
        scope: Option<&str>,
    ) -> Result<Vec<Table>> {
        let mut tables = Vec::new();
        for s in model_scopes(&self.manifest) {
            if scope.is_some_and(|name| name != s.name) {
                continue;
            }
            let scoped = self.scoped(all, &s)?;
            let table = self.compare_table(&s.name, &scoped, rows, cols)?;
            self.write(&format!("tables/compare-{}.csv", s.name), &table.to_csv())?;
            tables.push(table);
        }
        if tables.is_empty() {
            return Err(Error::BadParam(format!("no scope named `{}`", scope.unwrap_or_default())));
        }
        Ok(tables)
    }

    /// `tables/permtest.{csv,json}`, sliced by parameter for the
    /// point-drawn collection and by model otherwise.
    pub fn write_permtest(&mut self, all: &BTreeMap<String, DistanceMatrix>) -> Result<Vec<PermtestRecord>> {
        let slices = match self.manifest.kind {
            CollectionKind::Point => parameter_slices(&self.manifest),
            _ => model_scopes(&self.manifest),
        };
        let records = self.permtest(all, &slices)?;
        let rejected = records.iter().filter(|r| r.benjamini_yekutieli).count();
        self.note(format!(
            "permtest: {} tests, {} permutations each, {rejected} rejected by Benjamini-Yekutieli at alpha {}",
            records.len(),
            self.cfg.stats.perms,
            self.cfg.stats.alpha
        ));
        let csv = self.permtest_csv(&records);
        self.write("tables/permtest.csv", &csv)?;
        let mut json = serde_json::to_string_pretty(&records)?;
        json.push('\n');
        self.write("tables/permtest.json", &json)?;
        Ok(records)
    }

    /// `tables/knn-{name}.csv`.
    pub fn write_knn(
        &mut self,
        all: &BTreeMap<String, DistanceMatrix>,
        features: &CollectionFeatures,
    ) -> Result<Vec<Table>> {
        let tables = self.knn_tables(all, features)?;
        for table in &tables {
            self.write(&format!("tables/knn-{}.csv", table.name), &table.to_csv())?;
        }
        Ok(tables)
    }

    /// Writes `run.log` with every line noted so far.
    pub fn write_log(&self) -> Result<()> {
        let mut log = self.log.join("\n");
        log.push('\n');
        write_atomic(&self.cfg.out.join("run.log"), log.as_bytes())
    }

    /// Runs every configured stage and writes the output tree.
    pub fn run(&mut self) -> Result<()> {
        self.write_config()?;
        self.write_collection()?;
        let features = self.features()?;
        let all = self.matrices(&features)?;
        self.write_distances(&all)?;
        if self.cfg.stats.compare {
            let (rows, cols) = (self.row_names(), self.default_columns(&all));
            self.write_compare(&all, &rows, &cols, None)?;
        }
        if self.cfg.stats.permtest {
            self.write_permtest(&all)?;
        }
        if self.cfg.stats.knn {
            self.write_knn(&all, &features)?;
        }
        self.write_log()
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::BadConfig(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
