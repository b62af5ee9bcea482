//! Comparing pseudometrics: distance correlation, complete-linkage
//! clustering with silhouette selection, Fowlkes-Mallows indices,
//! permutation tests, multiple-testing corrections and leave-one-out k-NN.

use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudometrics::DistanceMatrix;

/// Distance covariances in `(-DCOV_TOLERANCE, 0)` are rounding noise.
const DCOV_TOLERANCE: f64 = 1e-12;

/// A double-centred distance matrix, `A = a − row means − column means + grand mean`.
#[derive(Debug, Clone)]
pub struct Centered {
    n: usize,
    values: Vec<f64>,
    /// `(1/n²) Σ A²`, the squared distance variance.
    dvar2: f64,
}

impl Centered {
    pub fn new(d: &DistanceMatrix) -> Self {
        let n = d.len();
        let nf = n as f64;
        let means: Vec<f64> = (0..n).map(|i| d.row(i).iter().sum::<f64>() / nf).collect();
        let grand = means.iter().sum::<f64>() / nf.max(1.0);
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = d.get(i, j) - means[i] - means[j] + grand;
            }
        }
        let dvar2 = values.iter().map(|a| a * a).sum::<f64>() / (nf * nf).max(1.0);
        Self { n, values, dvar2 }
    }

    /// `(1/n²) Σ A_kl B_{π(k)π(l)}`, with `π` the identity when `perm` is `None`.
    fn dcov2(&self, other: &Centered, perm: Option<&[usize]>) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            let row = &self.values[i * n..(i + 1) * n];
            match perm {
                None => {
                    let orow = &other.values[i * n..(i + 1) * n];
                    total += row.iter().zip(orow).map(|(a, b)| a * b).sum::<f64>();
                }
                Some(p) => {
                    let orow = &other.values[p[i] * n..(p[i] + 1) * n];
                    total += row.iter().zip(p).map(|(a, &pj)| a * orow[pj]).sum::<f64>();
                }
            }
        }
        total / (n * n).max(1) as f64
    }

    /// Distance correlation against `other`, optionally relabelled by `perm`.
    pub fn dcor_with(&self, other: &Centered, perm: Option<&[usize]>) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        let denom = (self.dvar2 * other.dvar2).sqrt();
        if denom == 0.0 {
            return Ok(0.0);
        }
        let mut dcov2 = self.dcov2(other, perm);
        if dcov2 < 0.0 {
            if dcov2 <= -DCOV_TOLERANCE {
                return Err(Error::NegativeDcov(dcov2));
            }
            dcov2 = 0.0;
        }
        Ok((dcov2 / denom).sqrt().min(1.0))
    }

    /// `sign(dcov²) · sqrt(|dcov²| / (dVar_a dVar_b))`. Equal to
    /// [`Centered::dcor_with`] whenever that succeeds, and still defined for
    /// inputs that are not of negative type (random control, PD, TriadEMD).
    pub fn signed_dcor_with(&self, other: &Centered, perm: Option<&[usize]>) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        let denom = (self.dvar2 * other.dvar2).sqrt();
        if denom == 0.0 {
            return Ok(0.0);
        }
        let mut dcov2 = self.dcov2(other, perm);
        if dcov2 < 0.0 && dcov2 > -DCOV_TOLERANCE {
            dcov2 = 0.0;
        }
        Ok(dcov2.signum() * (dcov2.abs() / denom).sqrt().min(1.0))
    }
}

fn check_same_points(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if a.labels != b.labels {
        return Err(Error::BadParam("distance matrices are labelled differently".into()));
    }
    Ok(())
}

/// Sample distance correlation; 0 when either distance variance vanishes.
pub fn dcor(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<f64> {
    check_same_points(a, b)?;
    Centered::new(a).dcor_with(&Centered::new(b), None)
}

/// Signed distance correlation; see [`Centered::signed_dcor_with`].
pub fn signed_dcor(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<f64> {
    check_same_points(a, b)?;
    Centered::new(a).signed_dcor_with(&Centered::new(b), None)
}

/// One agglomeration step. Cluster ids below `n` are points; the cluster
/// formed at step `t` has id `n + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

/// Complete-linkage agglomerative clustering. Among equally close pairs the
/// one with the smallest `(i, j)` is merged, where a cluster is indexed by
/// its smallest point.
pub fn hclust_complete(d: &DistanceMatrix) -> Result<Dendrogram> {
    let n = d.len();
    if n == 0 {
        return Err(Error::BadClustering("no points".into()));
    }
    // Slot i holds the cluster whose smallest point is i.
    let mut dist: Vec<f64> = (0..n * n).map(|k| d.get(k / n, k % n)).collect();
    let mut active: Vec<bool> = vec![true; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                let h = dist[i * n + j];
                if best.is_none_or(|(b, _, _)| h < b) {
                    best = Some((h, i, j));
                }
            }
        }
        let (height, i, j) = best.expect("two active clusters remain");
        let (lo, hi) = if id[i] < id[j] { (id[i], id[j]) } else { (id[j], id[i]) };
        merges.push(Merge {
            a: lo,
            b: hi,
            height,
            size: size[i] + size[j],
        });
        active[j] = false;
        size[i] += size[j];
        id[i] = n + step;
        for k in (0..n).filter(|&k| active[k] && k != i) {
            let h = dist[i * n + k].max(dist[j * n + k]);
            dist[i * n + k] = h;
            dist[k * n + i] = h;
        }
    }
    Ok(Dendrogram { n, merges })
}

/// Cluster assignment with ids `0..k`, all clusters nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub k: usize,
}

impl Clustering {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        for &c in &assignment {
            seen[c] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::BadClustering("cluster ids must be 0..k without gaps".into()));
        }
        Ok(Self { assignment, k })
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] == cluster).collect()
    }
}

/// The `k` clusters left after the first `n − k` merges, numbered in order
/// of their smallest point.
pub fn cut(dend: &Dendrogram, k: usize) -> Result<Clustering> {
    let n = dend.n;
    if k == 0 || k > n {
        return Err(Error::BadK { k, n });
    }
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (t, m) in dend.merges.iter().take(n - k).enumerate() {
        parent[m.a] = n + t;
        parent[m.b] = n + t;
    }
    let mut label = vec![usize::MAX; 2 * n];
    let mut next = 0;
    let assignment = (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            if label[root] == usize::MAX {
                label[root] = next;
                next += 1;
            }
            label[root]
        })
        .collect();
    Clustering::new(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Silhouette {
    pub values: Vec<f64>,
    /// Mean silhouette value.
    pub coefficient: f64,
}

/// Silhouette values `s(u) = (b − a) / max(a, b)`; points in singleton
/// clusters, and all points when there is a single cluster, get 0.
pub fn silhouette(d: &DistanceMatrix, clustering: &Clustering) -> Result<Silhouette> {
    let n = d.len();
    if clustering.len() != n {
        return Err(Error::BadClustering(format!(
            "{} assignments for {n} points",
            clustering.len()
        )));
    }
    if n == 0 {
        return Err(Error::BadClustering("no points".into()));
    }
    let sizes: Vec<usize> = (0..clustering.k).map(|c| clustering.members(c).len()).collect();
    let values: Vec<f64> = (0..n)
        .map(|u| {
            let own = clustering.assignment[u];
            if sizes[own] == 1 || clustering.k == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; clustering.k];
            for v in 0..n {
                sums[clustering.assignment[v]] += d.get(u, v);
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..clustering.k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    let coefficient = values.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { values, coefficient })
}

/// `[2, min(n − 1, 25)]`, empty for fewer than three points.
pub fn default_k_range(n: usize) -> RangeInclusive<usize> {
    2..=n.saturating_sub(1).min(25)
}

/// The `k` in `range` whose complete-linkage cut has the largest silhouette
/// coefficient; the smallest such `k` on ties.
pub fn choose_k(d: &DistanceMatrix, range: RangeInclusive<usize>) -> Result<usize> {
    if range.is_empty() {
        return Err(Error::EmptyRange);
    }
    let dend = hclust_complete(d)?;
    let mut best: Option<(f64, usize)> = None;
    for k in range {
        let sc = silhouette(d, &cut(&dend, k)?)?.coefficient;
        if best.is_none_or(|(b, _)| sc > b) {
            best = Some((sc, k));
        }
    }
    Ok(best.expect("nonempty range").1)
}

/// Pair counts: `tp` pairs together in both, `fp` only in the first,
/// `fn_` only in the second, `tn` in neither.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub fn pair_counts(a: &Clustering, b: &Clustering) -> Result<PairCounts> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    let mut c = PairCounts {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    let n = a.len();
    for i in 0..n {
        for j in i + 1..n {
            let sa = a.assignment[i] == a.assignment[j];
            let sb = b.assignment[i] == b.assignment[j];
            match (sa, sb) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

/// `FM = sqrt(TP/(TP+FP) · TP/(TP+FN))`, 0 when `TP = 0`. Two clusterings
/// without any co-clustered pair agree completely and score 1.
pub fn fowlkes_mallows(a: &Clustering, b: &Clustering) -> Result<f64> {
    let c = pair_counts(a, b)?;
    if c.tp + c.fp + c.fn_ == 0 {
        return Ok(1.0);
    }
    if c.tp == 0 {
        return Ok(0.0);
    }
    let tp = c.tp as f64;
    Ok((tp / (tp + c.fp as f64) * tp / (tp + c.fn_ as f64)).sqrt())
}

/// FM index of the two dendrograms cut at the silhouette-optimal `k` of the
/// column matrix. With fewer than three points no `k` is admissible and a
/// single cluster is used.
pub fn fm_compare(row: &DistanceMatrix, col: &DistanceMatrix) -> Result<f64> {
    check_same_points(row, col)?;
    let range = default_k_range(col.len());
    let k = if range.is_empty() { 1 } else { choose_k(col, range)? };
    fm_at_k(row, col, k)
}

/// FM index of both complete-linkage dendrograms cut at `k`.
pub fn fm_at_k(row: &DistanceMatrix, col: &DistanceMatrix, k: usize) -> Result<f64> {
    let a = cut(&hclust_complete(row)?, k)?;
    let b = cut(&hclust_complete(col)?, k)?;
    fowlkes_mallows(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Dcor,
    Fm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub permutations: usize,
    /// Permutations whose statistic reached the observed one.
    pub exceed: usize,
    pub p_value: f64,
}

/// Permutation `r` of `n` points under `seed`; each replicate has its own
/// ChaCha stream so results do not depend on scheduling.
pub fn replicate_permutation(n: usize, seed: u64, r: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

/// Relabels the points of `d2` at random `n_perm` times and reports
/// `p = (1 + #{permuted ≥ observed}) / (n_perm + 1)`. The dCor statistic is
/// the signed one, which ranks permutations exactly as dCor does on
/// negative-type inputs.
pub fn permutation_test(
    d1: &DistanceMatrix,
    d2: &DistanceMatrix,
    stat: Statistic,
    n_perm: usize,
    seed: u64,
) -> Result<TestResult> {
    check_same_points(d1, d2)?;
    if n_perm == 0 {
        return Err(Error::BadParam("at least one permutation is needed".into()));
    }
    let n = d1.len();
    let (observed, exceed) = match stat {
        Statistic::Dcor => {
            let (a, b) = (Centered::new(d1), Centered::new(d2));
            let observed = a.signed_dcor_with(&b, None)?;
            let hits = (0..n_perm)
                .into_par_iter()
                .map(|r| {
                    let perm = replicate_permutation(n, seed, r);
                    a.signed_dcor_with(&b, Some(&perm)).map(|s| (s >= observed) as usize)
                })
                .collect::<Result<Vec<_>>>()?;
            (observed, hits.into_iter().sum())
        }
        Statistic::Fm => {
            let observed = fm_compare(d1, d2)?;
            let hits = (0..n_perm)
                .into_par_iter()
                .map(|r| {
                    let perm = replicate_permutation(n, seed, r);
                    fm_compare(d1, &d2.permuted(&perm)).map(|s| (s >= observed) as usize)
                })
                .collect::<Result<Vec<_>>>()?;
            (observed, hits.into_iter().sum())
        }
    };
    Ok(TestResult {
        statistic: observed,
        permutations: n_perm,
        exceed,
        p_value: (1 + exceed) as f64 / (n_perm + 1) as f64,
    })
}

fn check_p_values(p: &[f64], alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadAlpha(alpha));
    }
    if let Some(bad) = p.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
        return Err(Error::BadParam(format!("p-value {bad} outside (0, 1]")));
    }
    Ok(())
}

/// Rejects `p_i ≤ α / N`.
pub fn bonferroni(p: &[f64], alpha: f64) -> Result<Vec<bool>> {
    check_p_values(p, alpha)?;
    let threshold = alpha / p.len() as f64;
    Ok(p.iter().map(|&x| x <= threshold).collect())
}

/// Benjamini-Yekutieli step-up: with `C(N) = Σ 1/j`, rejects the `k`
/// smallest p-values for the largest `k` with `p_(k) ≤ kα / (N C(N))`.
pub fn benjamini_yekutieli(p: &[f64], alpha: f64) -> Result<Vec<bool>> {
    check_p_values(p, alpha)?;
    let n = p.len();
    let c: f64 = (1..=n).map(|j| 1.0 / j as f64).sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let cutoff = (1..=n)
        .rev()
        .find(|&i| p[order[i - 1]] <= i as f64 * alpha / (n as f64 * c))
        .unwrap_or(0);
    let mut reject = vec![false; n];
    for &i in &order[..cutoff] {
        reject[i] = true;
    }
    Ok(reject)
}

/// The `k` nearest other points of `u`, by distance then index.
fn neighbours(d: &DistanceMatrix, u: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..d.len()).filter(|&v| v != u).collect();
    others.sort_by(|&a, &b| d.get(u, a).total_cmp(&d.get(u, b)).then(a.cmp(&b)));
    others.truncate(k);
    others
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k + 1 > n {
        return Err(Error::BadK { k, n });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification<L> {
    pub predictions: Vec<L>,
    pub rate: f64,
}

/// Leave-one-out k-NN majority vote. Tied votes go to the label of the
/// nearest neighbour among the tied labels.
pub fn knn_classify_loo<L: Clone + PartialEq + Sync + Send>(
    d: &DistanceMatrix,
    labels: &[L],
    k: usize,
) -> Result<Classification<L>> {
    let n = d.len();
    if labels.len() != n {
        return Err(Error::SizeMismatch(labels.len(), n));
    }
    check_k(k, n)?;
    let predictions: Vec<L> = (0..n)
        .into_par_iter()
        .map(|u| {
            let nb = neighbours(d, u, k);
            let votes = |l: &L| nb.iter().filter(|&&v| labels[v] == *l).count();
            let top = nb.iter().map(|&v| votes(&labels[v])).max().unwrap_or(0);
            // neighbours are sorted by distance, so the first one carrying a
            // top-voted label is the nearest
            let winner = nb.iter().find(|&&v| votes(&labels[v]) == top).unwrap();
            labels[*winner].clone()
        })
        .collect();
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(Classification {
        rate: correct as f64 / n as f64,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub predictions: Vec<Vec<f64>>,
    pub mse: f64,
}

/// Leave-one-out k-NN regression: the prediction is the mean target of the
/// `k` nearest other points; MSE is the mean squared Euclidean residual.
pub fn knn_regress_loo(d: &DistanceMatrix, targets: &[Vec<f64>], k: usize) -> Result<Regression> {
    let n = d.len();
    if targets.len() != n {
        return Err(Error::SizeMismatch(targets.len(), n));
    }
    check_k(k, n)?;
    let dim = targets[0].len();
    if let Some(t) = targets.iter().find(|t| t.len() != dim) {
        return Err(Error::SizeMismatch(t.len(), dim));
    }
    let predictions: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut mean = vec![0.0; dim];
            for v in neighbours(d, u, k) {
                mean.iter_mut().zip(&targets[v]).for_each(|(m, t)| *m += t);
            }
            mean.iter_mut().for_each(|m| *m /= k as f64);
            mean
        })
        .collect();
    let mse = mse(&predictions, targets)?;
    Ok(Regression { predictions, mse })
}

/// Mean over rows of the squared Euclidean norm of the difference.
pub fn mse(predicted: &[Vec<f64>], actual: &[Vec<f64>]) -> Result<f64> {
    if predicted.len() != actual.len() || predicted.is_empty() {
        return Err(Error::SizeMismatch(predicted.len(), actual.len()));
    }
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| p.iter().zip(a).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum();
    Ok(total / predicted.len() as f64)
}

/// One-sample Kolmogorov-Smirnov test against uniform(0, 1): the statistic
/// `D` and its asymptotic p-value.
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            f64::max((i + 1) as f64 / n - x, x - i as f64 / n)
        })
        .fold(0.0, f64::max);
    (d, kolmogorov_survival((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d))
}

/// `P(K > t)` for the Kolmogorov distribution.
fn kolmogorov_survival(t: f64) -> f64 {
    if t < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * t * t).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
