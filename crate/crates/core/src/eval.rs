//! Retrieval, zero-shot and geometry-preservation metrics, plus inference
//! latency measurement.

use std::fmt;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::baselines::{unit_rows, AsifModel};
use crate::error::{Error, Result};
use crate::network::{predict, MlpParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    AToB,
    BToA,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AToB => "a_to_b",
            Direction::BToA => "b_to_a",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// `(k, precision@k)` in the order requested.
    pub precision_at: Vec<(usize, f64)>,
    pub direction: Direction,
    pub n_queries: usize,
}

impl RetrievalResult {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.precision_at.iter().find(|(kk, _)| *kk == k).map(|(_, p)| *p)
    }
}

/// Cosine similarities between all rows of `a` and all rows of `b`; a zero
/// row has similarity 0 with everything.
pub fn cosine_similarity(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    unit_rows(a) * unit_rows(b).transpose()
}

/// 1-based rank of `target` in `scores` sorted descending, ties to the
/// smaller index.
fn rank_of(scores: impl Iterator<Item = f64> + Clone, target: usize) -> usize {
    let s_t = scores.clone().nth(target).unwrap();
    1 + scores
        .enumerate()
        .filter(|&(g, s)| s > s_t || (s == s_t && g < target))
        .count()
}

pub fn precision_at_k(
    queries: &DMatrix<f64>,
    gallery: &DMatrix<f64>,
    true_match: &[usize],
    ks: &[usize],
    direction: Direction,
) -> Result<RetrievalResult> {
    if queries.ncols() != gallery.ncols() || true_match.len() != queries.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "queries {:?}, gallery {:?}, {} true matches",
            queries.shape(),
            gallery.shape(),
            true_match.len()
        )));
    }
    if let Some(&bad) = true_match.iter().find(|&&t| t >= gallery.nrows()) {
        return Err(Error::ShapeMismatch(format!("true match {bad} outside gallery of {}", gallery.nrows())));
    }
    let sims = cosine_similarity(queries, gallery);
    let ranks: Vec<usize> = (0..queries.nrows())
        .map(|q| rank_of(sims.row(q).iter().copied(), true_match[q]))
        .collect();
    let n = queries.nrows();
    let precision_at = ks
        .iter()
        .map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / n.max(1) as f64))
        .collect();
    Ok(RetrievalResult { precision_at, direction, n_queries: n })
}

/// Mean of each class's aligned prompt embeddings, normalized.
pub fn class_prototypes(per_class: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let d = per_class.first().map(|m| m.ncols()).ok_or(Error::EmptyClass { class: 0 })?;
    let mut out = DMatrix::zeros(per_class.len(), d);
    for (c, prompts) in per_class.iter().enumerate() {
        if prompts.nrows() == 0 {
            return Err(Error::EmptyClass { class: c });
        }
        if prompts.ncols() != d {
            return Err(Error::ShapeMismatch(format!("class {c} prompts are {}-d, expected {d}", prompts.ncols())));
        }
        let mean = prompts.row_mean();
        let norm = mean.norm();
        let scale = prompts.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        if !(norm > 1e-12 * scale) {
            return Err(Error::ZeroVectorRow { row: c });
        }
        out.row_mut(c).copy_from(&(mean / norm));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotResult {
    pub top1: f64,
    /// Accuracy per class; `NaN` for classes without samples.
    pub per_class: Vec<f64>,
    pub class_counts: Vec<usize>,
    pub predictions: Vec<usize>,
}

impl ZeroShotResult {
    pub fn n_classes(&self) -> usize {
        self.per_class.len()
    }
}

pub fn zero_shot_classify(
    samples: &DMatrix<f64>,
    prototypes: &DMatrix<f64>,
    labels: &[usize],
) -> Result<ZeroShotResult> {
    let c = prototypes.nrows();
    if samples.ncols() != prototypes.ncols() || labels.len() != samples.nrows() || c == 0 {
        return Err(Error::ShapeMismatch(format!(
            "samples {:?}, prototypes {:?}, {} labels",
            samples.shape(),
            prototypes.shape(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::ShapeMismatch(format!("label {bad} outside {c} classes")));
    }
    let sims = cosine_similarity(samples, prototypes);
    let predictions: Vec<usize> = sims
        .row_iter()
        .map(|row| {
            // First maximum wins ties.
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &s)| if s > best.1 { (j, s) } else { best })
                .0
        })
        .collect();
    let mut correct = vec![0usize; c];
    let mut counts = vec![0usize; c];
    for (&p, &l) in predictions.iter().zip(labels) {
        counts[l] += 1;
        correct[l] += usize::from(p == l);
    }
    let per_class = correct
        .iter()
        .zip(&counts)
        .map(|(&k, &n)| if n == 0 { f64::NAN } else { k as f64 / n as f64 })
        .collect();
    let top1 = correct.iter().sum::<usize>() as f64 / labels.len().max(1) as f64;
    Ok(ZeroShotResult { top1, per_class, class_counts: counts, predictions })
}

fn squared_distances_from(points: &DMatrix<f64>, i: usize) -> Vec<f64> {
    (0..points.nrows())
        .map(|j| {
            (0..points.ncols())
                .map(|c| {
                    let t = points[(i, c)] - points[(j, c)];
                    t * t
                })
                .sum()
        })
        .collect()
}

/// Mean rank, in the aligned space, of each point's `k` nearest original
/// neighbors. Both spaces rank by Euclidean distance (self excluded, ties
/// to the smaller index); a perfectly preserved top-`k` scores `(k+1)/2`.
pub fn neighbor_rank_metric(original: &DMatrix<f64>, aligned: &DMatrix<f64>, k: usize) -> Result<f64> {
    let n = original.nrows();
    if aligned.nrows() != n {
        return Err(Error::ShapeMismatch(format!("{n} original vs {} aligned points", aligned.nrows())));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!("need 1 <= k < {n}, got {k}")));
    }
    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d_orig = squared_distances_from(original, i);
            let d_aligned = squared_distances_from(aligned, i);
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&x, &y| d_orig[x].total_cmp(&d_orig[y]).then(x.cmp(&y)));
            others[..k]
                .iter()
                .map(|&j| {
                    1 + (0..n)
                        .filter(|&l| l != i && l != j)
                        .filter(|&l| d_aligned[l] < d_aligned[j] || (d_aligned[l] == d_aligned[j] && l < j))
                        .count()
                })
                .sum::<usize>() as f64
        })
        .collect();
    Ok(per_point.iter().sum::<f64>() / (n * k) as f64)
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r_squared)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// A query-to-gallery retrieval pipeline whose latency can be measured.
pub trait Retriever {
    /// Index of the best gallery match for one raw query embedding.
    fn retrieve(&self, query: &[f64]) -> Result<usize>;

    fn anchor_count(&self) -> Option<usize> {
        None
    }
}

fn argmax(scores: impl Iterator<Item = f64>) -> usize {
    scores
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, s)| if s > best.1 { (j, s) } else { best })
        .0
}

/// Trained head: map the query, score against a pre-aligned gallery.
pub struct HeadRetriever {
    pub head: MlpParams,
    /// Aligned gallery rows, unit-normalized.
    pub gallery: DMatrix<f64>,
}

impl HeadRetriever {
    pub fn new(head: MlpParams, aligned_gallery: &DMatrix<f64>) -> Self {
        Self { head, gallery: unit_rows(aligned_gallery) }
    }
}

impl Retriever for HeadRetriever {
    fn retrieve(&self, query: &[f64]) -> Result<usize> {
        let z = predict(&self.head, &DMatrix::from_row_slice(1, query.len(), query))?;
        Ok(argmax((&self.gallery * z.transpose()).iter().copied()))
    }
}

/// Anchor-relative retrieval: encode the query against the anchors, score
/// against pre-encoded gallery representations.
pub struct AsifRetriever {
    pub model: AsifModel,
    pub gallery_reps: DMatrix<f64>,
}

impl AsifRetriever {
    /// Queries come from modality A, gallery rows from modality B.
    pub fn new(model: AsifModel, gallery_b: &DMatrix<f64>) -> Result<Self> {
        let gallery_reps = model.encode_b(gallery_b)?;
        Ok(Self { model, gallery_reps })
    }
}

impl Retriever for AsifRetriever {
    fn retrieve(&self, query: &[f64]) -> Result<usize> {
        let q = self.model.encode_a(&DMatrix::from_row_slice(1, query.len(), query))?;
        Ok(argmax((&self.gallery_reps * q.transpose()).iter().copied()))
    }

    fn anchor_count(&self) -> Option<usize> {
        Some(self.model.m())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub median_secs: f64,
    pub p95_secs: f64,
    pub repetitions: usize,
    pub n_queries: usize,
    pub anchors: Option<usize>,
}

/// Per-query latency: each repetition times a pass over all `queries`
/// after one untimed warm-up pass.
pub fn bench_inference(retriever: &dyn Retriever, queries: &DMatrix<f64>, repetitions: usize) -> Result<TimingReport> {
    let rows: Vec<Vec<f64>> = queries.row_iter().map(|r| r.iter().copied().collect()).collect();
    let run = || -> Result<usize> {
        let mut sink = 0;
        for q in &rows {
            sink ^= retriever.retrieve(q)?;
        }
        Ok(sink)
    };
    std::hint::black_box(run()?);
    let reps = repetitions.max(1);
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let started = Instant::now();
        std::hint::black_box(run()?);
        samples.push(started.elapsed().as_secs_f64() / rows.len().max(1) as f64);
    }
    samples.sort_by(f64::total_cmp);
    let pick = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
    Ok(TimingReport {
        median_secs: pick(0.5),
        p95_secs: pick(0.95),
        repetitions: reps,
        n_queries: rows.len(),
        anchors: retriever.anchor_count(),
    })
}

/// Tab-separated `metric<TAB>key<TAB>value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricRecords(pub Vec<(String, String, String)>);

impl MetricRecords {
    pub fn push(&mut self, metric: impl Into<String>, key: impl Into<String>, value: impl ToString) {
        self.0.push((metric.into(), key.into(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (m, k, v) in &self.0 {
            let _ = writeln!(out, "{m}\t{k}\t{v}");
        }
        out
    }

    pub fn get(&self, metric: &str, key: &str) -> Option<&str> {
        self.0.iter().find(|(m, k, _)| m == metric && k == key).map(|(_, _, v)| v.as_str())
    }
}
