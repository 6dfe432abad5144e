//! Representation analyses over a trained model: encoder summary vectors per
//! word, decoder state vectors per phoneme, PCA projection, nearest-neighbour
//! structure and a nearest-centroid separability check.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::datastore::VerbEntry;
use crate::inflector::{InflectorError, Model};
use crate::phoneme::{PhonemeSeq, SuffixTable};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("vector for {label:?} has width {found}, expected {expected}")]
    Width { label: String, expected: usize, found: usize },
    #[error("cannot project {points} points of width {width} onto {k} components")]
    Projection { points: usize, width: usize, k: usize },
    #[error(transparent)]
    Inflector(#[from] InflectorError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudPoint {
    pub label: String,
    pub class: String,
    pub vector: Vec<f64>,
}

/// Labelled vectors of a common width, labels unique.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCloud {
    pub layer: String,
    points: Vec<CloudPoint>,
}

impl EmbeddingCloud {
    pub fn new(layer: impl Into<String>, points: Vec<CloudPoint>) -> Result<Self, ProbeError> {
        let mut seen = HashSet::new();
        let width = points.first().map_or(0, |p| p.vector.len());
        for p in &points {
            if !seen.insert(p.label.as_str()) {
                return Err(ProbeError::DuplicateLabel(p.label.clone()));
            }
            if p.vector.len() != width {
                return Err(ProbeError::Width { label: p.label.clone(), expected: width, found: p.vector.len() });
            }
        }
        Ok(Self { layer: layer.into(), points })
    }

    pub fn points(&self) -> &[CloudPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn width(&self) -> usize {
        self.points.first().map_or(0, |p| p.vector.len())
    }

    pub fn to_csv(&self, provenance: &str) -> String {
        let mut s = String::from("label,class,layer");
        for i in 0..self.width() {
            let _ = write!(s, ",v{i}");
        }
        s.push_str(",provenance\n");
        for p in &self.points {
            let _ = write!(s, "{},{},{}", csv_field(&p.label), csv_field(&p.class), self.layer);
            for v in &p.vector {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{}", csv_field(provenance));
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A word to embed: display label, input phonemes and a class tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeWord {
    pub label: String,
    pub present: PhonemeSeq,
    pub class: String,
}

pub const ENCODER_LAYER: &str = "encoder.top";
pub const DECODER_LAYER: &str = "decoder.top";

/// One top-layer encoder summary per word.
pub fn encoder_cloud(model: &Model, words: &[ProbeWord]) -> Result<EmbeddingCloud, ProbeError> {
    let points = words
        .iter()
        .map(|w| Ok(CloudPoint { label: w.label.clone(), class: w.class.clone(), vector: model.encoder_summary(&w.present)? }))
        .collect::<Result<Vec<_>, ProbeError>>()?;
    EmbeddingCloud::new(ENCODER_LAYER, points)
}

/// One vector per output phoneme: the mean top-layer decoder state right
/// after the phoneme is consumed, over all teacher-forced past forms in
/// `pairs`. Phonemes are labelled by the suffix class they select;
/// phonemes that never occur are omitted.
pub fn decoder_phoneme_cloud(model: &Model, pairs: &[(PhonemeSeq, PhonemeSeq)], table: &SuffixTable) -> Result<EmbeddingCloud, ProbeError> {
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for (present, past) in pairs {
        for (tok, v) in model.decoder_states(present, past)? {
            let e = sums.entry(tok).or_insert_with(|| (vec![0.0; v.len()], 0));
            for (a, b) in e.0.iter_mut().zip(&v) {
                *a += b;
            }
            e.1 += 1;
        }
    }
    let missing: Vec<&String> = model.vocab().phonemes().iter().filter(|p| !sums.contains_key(*p)).collect();
    if !missing.is_empty() {
        log::warn!("no decoder states for phonemes {missing:?}; omitted from the cloud");
    }
    let points = sums
        .into_iter()
        .map(|(tok, (sum, n))| CloudPoint {
            class: table.class(&tok).as_str().to_string(),
            vector: sum.into_iter().map(|x| x / n as f64).collect(),
            label: tok,
        })
        .collect();
    EmbeddingCloud::new(DECODER_LAYER, points)
}

/// The same verbs with present and past reversed phoneme by phoneme.
pub fn reversed_corpus(corpus: &[VerbEntry]) -> Vec<VerbEntry> {
    corpus.iter().map(VerbEntry::reversed).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `(label, class, coordinates)` in cloud order.
    pub points: Vec<(String, String, Vec<f64>)>,
    /// Share of total variance per kept component, non-increasing.
    pub explained: Vec<f64>,
    pub requested: usize,
    /// Principal axes, one per kept component.
    pub axes: Vec<Vec<f64>>,
}

impl Projection {
    pub fn components(&self) -> usize {
        self.explained.len()
    }

    pub fn to_csv(&self, provenance: &str) -> String {
        let mut s = String::from("label,class");
        for i in 0..self.components() {
            let _ = write!(s, ",pc{}", i + 1);
        }
        s.push_str(",provenance\n");
        for (l, c, x) in &self.points {
            let _ = write!(s, "{},{}", csv_field(l), csv_field(c));
            for v in x {
                let _ = write!(s, ",{v}");
            }
            let _ = writeln!(s, ",{}", csv_field(provenance));
        }
        s
    }
}

/// Eigenvalues at or below this fraction of the largest count as zero.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

/// Project onto the top `k` principal axes of the sample covariance. Each
/// axis is signed so its largest-magnitude entry (first on ties) is
/// positive. Fewer than `k` components are returned when the covariance has
/// fewer non-zero eigenvalues.
pub fn pca_project(cloud: &EmbeddingCloud, k: usize) -> Result<Projection, ProbeError> {
    let (n, d) = (cloud.len(), cloud.width());
    if k == 0 || k > d || n < k + 1 {
        return Err(ProbeError::Projection { points: n, width: d, k });
    }
    let mut mean = vec![0.0; d];
    for p in cloud.points() {
        for (m, v) in mean.iter_mut().zip(&p.vector) {
            *m += v / n as f64;
        }
    }
    let x = DMatrix::from_fn(n, d, |i, j| cloud.points()[i].vector[j] - mean[j]);
    let cov = (x.transpose() * &x) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let top = eig.eigenvalues[order[0]].max(0.0);
    let mut axes = Vec::new();
    let mut explained = Vec::new();
    for &i in order.iter().take(k) {
        let lambda = eig.eigenvalues[i];
        if top == 0.0 || lambda <= DEGENERATE_TOLERANCE * top {
            break;
        }
        let mut axis: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let pivot = axis
            .iter()
            .enumerate()
            .fold(0, |best, (j, v)| if v.abs() > axis[best].abs() { j } else { best });
        if axis[pivot] < 0.0 {
            axis.iter_mut().for_each(|v| *v = -*v);
        }
        axes.push(axis);
        explained.push(lambda / total);
    }
    if explained.len() < k {
        log::warn!("covariance is degenerate: {} of {k} requested components kept", explained.len());
    }
    let points = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let coords = axes.iter().map(|a| (0..d).map(|j| x[(i, j)] * a[j]).sum()).collect();
            (p.label.clone(), p.class.clone(), coords)
        })
        .collect();
    Ok(Projection { points, explained, requested: k, axes })
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` nearest other points by Euclidean distance, nearest
/// first, ties to the lower index.
pub fn nearest_neighbors(vectors: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    (0..vectors.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..vectors.len()).filter(|&j| j != i).map(|j| (dist2(&vectors[i], &vectors[j]), j)).collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Share of (point, neighbour) pairs for which `same` holds, alongside the
/// share over all ordered pairs of distinct points (the chance rate for
/// neighbours drawn at random).
pub fn neighbor_agreement(vectors: &[Vec<f64>], k: usize, same: impl Fn(usize, usize) -> bool) -> (f64, f64) {
    let n = vectors.len();
    let nn = nearest_neighbors(vectors, k);
    let hits: usize = nn.iter().enumerate().map(|(i, js)| js.iter().filter(|&&j| same(i, j)).count()).sum();
    let total: usize = nn.iter().map(Vec::len).sum();
    let mut chance_hits = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && same(i, j) {
                chance_hits += 1;
            }
        }
    }
    let pairs = n * n.saturating_sub(1);
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(hits, total), ratio(chance_hits, pairs))
}

/// Resubstitution accuracy of a nearest-centroid classifier, a linear
/// separator for each pair of classes. Points whose class is in `skip` are
/// ignored.
pub fn nearest_centroid_accuracy(points: &[(String, String, Vec<f64>)], skip: &[&str]) -> f64 {
    let kept: Vec<&(String, String, Vec<f64>)> = points.iter().filter(|p| !skip.contains(&p.1.as_str())).collect();
    if kept.is_empty() {
        return 0.0;
    }
    let mut centroids: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for (_, c, x) in &kept {
        let e = centroids.entry(c.as_str()).or_insert_with(|| (vec![0.0; x.len()], 0));
        e.0.iter_mut().zip(x).for_each(|(a, b)| *a += b);
        e.1 += 1;
    }
    let centroids: Vec<(&str, Vec<f64>)> =
        centroids.into_iter().map(|(c, (s, n))| (c, s.into_iter().map(|v| v / n as f64).collect())).collect();
    let correct = kept
        .iter()
        .filter(|(_, c, x)| {
            let best = centroids.iter().min_by(|a, b| dist2(x, &a.1).total_cmp(&dist2(x, &b.1))).expect("non-empty");
            best.0 == c
        })
        .count();
    correct as f64 / kept.len() as f64
}
