//! Fit measures against human nonce-word data: Spearman and Pearson
//! correlations over pooled regular and irregular suggested forms, complete
//! recall at 5, agreement on second-ranked outputs across seeds, and
//! per-category production means.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub use crate::datastore::{Category, FormRole, NonceItem, SuggestedForm};
use crate::inflector::BeamResult;
use crate::phoneme::PhonemeSeq;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} paired values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("non-finite value in correlation input")]
    NonFinite,
    #[error("item {item}: no model score for form {form}")]
    MissingScore { item: String, form: String },
    #[error("item {item}: no human {target} for form {form}")]
    MissingHuman { item: String, form: String, target: Target },
    #[error("item {0}: no beam")]
    MissingBeam(String),
    #[error("second-place agreement needs at least two seeds, got {0}")]
    TooFewSeeds(usize),
}

pub const MIN_CORRELATION_LEN: usize = 3;

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < MIN_CORRELATION_LEN {
        return Err(EvalError::TooShort { needed: MIN_CORRELATION_LEN, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    Ok(())
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Product-moment correlation, computed on mean-centred values.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    check_pair(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(EvalError::ZeroVariance);
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with tied values sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Spearman,
    Pearson,
}

impl Measure {
    pub fn compute(self, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        match self {
            Measure::Spearman => spearman(x, y),
            Measure::Pearson => pearson(x, y),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Spearman => "spearman",
            Measure::Pearson => "pearson",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Production,
    Rating,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Production => "production",
            Target::Rating => "rating",
        }
    }

    fn of(self, form: &SuggestedForm) -> Option<f64> {
        match self {
            Target::Production => Some(form.production),
            Target::Rating => form.rating,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model score per (item id, suggested form).
pub type FormScores = BTreeMap<(String, PhonemeSeq), f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub item: String,
    pub role: FormRole,
    pub form: PhonemeSeq,
    pub model: f64,
    pub human: f64,
}

/// A correlation or `None` when it is undefined (zero variance or too few
/// pairs).
pub type Correlation = Option<f64>;

pub fn format_correlation(c: Correlation) -> String {
    c.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub measure: Measure,
    pub target: Target,
    pub regular: Correlation,
    pub irregular: Correlation,
    pub regular_pairs: Vec<PairedSample>,
    /// First and second suggested irregulars pooled.
    pub irregular_pairs: Vec<PairedSample>,
}

fn pool_correlation(measure: Measure, pairs: &[PairedSample]) -> Result<Correlation, EvalError> {
    let x: Vec<f64> = pairs.iter().map(|p| p.model).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.human).collect();
    match measure.compute(&x, &y) {
        Ok(v) => Ok(Some(v)),
        Err(EvalError::ZeroVariance | EvalError::TooShort { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Correlate model scores with a human target, regulars and irregulars as
/// separate pools.
pub fn correlate_forms(items: &[NonceItem], scores: &FormScores, measure: Measure, target: Target) -> Result<CorrelationReport, EvalError> {
    let mut regular_pairs = Vec::new();
    let mut irregular_pairs = Vec::new();
    for it in items {
        for f in &it.forms {
            let model = *scores
                .get(&(it.id.clone(), f.phonemes.clone()))
                .ok_or_else(|| EvalError::MissingScore { item: it.id.clone(), form: f.phonemes.to_string() })?;
            let human = target
                .of(f)
                .ok_or_else(|| EvalError::MissingHuman { item: it.id.clone(), form: f.phonemes.to_string(), target })?;
            let sample = PairedSample { item: it.id.clone(), role: f.role, form: f.phonemes.clone(), model, human };
            if f.role.is_regular() {
                regular_pairs.push(sample);
            } else {
                irregular_pairs.push(sample);
            }
        }
    }
    debug_assert!(regular_pairs.iter().all(|p| p.role.is_regular()) && irregular_pairs.iter().all(|p| !p.role.is_regular()));
    Ok(CorrelationReport {
        measure,
        target,
        regular: pool_correlation(measure, &regular_pairs)?,
        irregular: pool_correlation(measure, &irregular_pairs)?,
        regular_pairs,
        irregular_pairs,
    })
}

/// All four measure × target reports, skipping rating reports when any
/// suggested form lacks a rating.
pub fn correlate_all(items: &[NonceItem], scores: &FormScores) -> Result<Vec<CorrelationReport>, EvalError> {
    let has_ratings = items.iter().all(|it| it.forms.iter().all(|f| f.rating.is_some()));
    let mut out = Vec::new();
    for target in [Target::Production, Target::Rating] {
        if target == Target::Rating && !has_ratings {
            continue;
        }
        for measure in [Measure::Spearman, Measure::Pearson] {
            out.push(correlate_forms(items, scores, measure, target)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cr5Report {
    /// `(item id, all suggested forms among the top five)`.
    pub per_item: Vec<(String, bool)>,
    pub value: f64,
}

pub const CR_DEPTH: usize = 5;

/// Fraction of items whose suggested forms all appear among the top five
/// distinct beam outputs.
pub fn cr_at_5(items: &[NonceItem], beams: &BTreeMap<String, BeamResult>) -> Result<Cr5Report, EvalError> {
    let mut per_item = Vec::with_capacity(items.len());
    for it in items {
        let beam = beams.get(&it.id).ok_or_else(|| EvalError::MissingBeam(it.id.clone()))?;
        let top: BTreeSet<&PhonemeSeq> = beam.top_forms(CR_DEPTH).into_iter().collect();
        per_item.push((it.id.clone(), it.forms.iter().all(|f| top.contains(&f.phonemes))));
    }
    let value = if per_item.is_empty() {
        0.0
    } else {
        per_item.iter().filter(|(_, ok)| *ok).count() as f64 / per_item.len() as f64
    };
    Ok(Cr5Report { per_item, value })
}

/// For each (item, form) ranked second by at least one seed, how many seeds
/// ranked it second.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondPlaceHistogram {
    pub counts: BTreeMap<(String, PhonemeSeq), usize>,
    pub seeds: usize,
    pub items: usize,
}

impl SecondPlaceHistogram {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Number of distinct forms ranked second by exactly `k` seeds, per `k`.
    pub fn count_distribution(&self) -> BTreeMap<usize, usize> {
        let mut d = BTreeMap::new();
        for &c in self.counts.values() {
            *d.entry(c).or_insert(0) += 1;
        }
        d
    }
}

/// `beams[s]` holds seed `s`'s beams keyed by item id; all seeds must cover
/// the same items.
pub fn second_place_agreement(beams: &[BTreeMap<String, BeamResult>]) -> Result<SecondPlaceHistogram, EvalError> {
    if beams.len() < 2 {
        return Err(EvalError::TooFewSeeds(beams.len()));
    }
    let ids: BTreeSet<&String> = beams[0].keys().collect();
    for seed in &beams[1..] {
        if let Some(missing) = ids.iter().find(|id| !seed.contains_key(**id)) {
            return Err(EvalError::MissingBeam((*missing).clone()));
        }
    }
    let mut counts = BTreeMap::new();
    for seed in beams {
        for id in &ids {
            if let Some(second) = seed[*id].top_forms(2).get(1) {
                *counts.entry(((*id).clone(), (*second).clone())).or_insert(0) += 1;
            }
        }
    }
    Ok(SecondPlaceHistogram { counts, seeds: beams.len(), items: ids.len() })
}

/// Production shares for one item, by role.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoleShares {
    pub regular: f64,
    pub irregular1: f64,
    pub irregular2: f64,
    pub other: f64,
}

impl RoleShares {
    pub fn irregular(&self) -> f64 {
        self.irregular1 + self.irregular2
    }

    pub fn human(item: &NonceItem) -> Self {
        let share = |r| item.form(r).map_or(0.0, |f| f.production);
        Self {
            regular: share(FormRole::Regular),
            irregular1: share(FormRole::Irregular1),
            irregular2: share(FormRole::Irregular2),
            other: item.other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMeans {
    pub category: Category,
    pub items: usize,
    pub human_regular: f64,
    /// Suggested irregulars summed per item, then averaged.
    pub human_irregular: f64,
    pub model_regular: f64,
    pub model_irregular: f64,
}

/// Mean regular and suggested-irregular shares per category, for humans and
/// the model. Categories without items (or without model shares) are omitted.
pub fn category_means(items: &[NonceItem], model: &BTreeMap<String, RoleShares>) -> Vec<CategoryMeans> {
    let mut out = Vec::new();
    for category in Category::ALL {
        let members: Vec<(&NonceItem, &RoleShares)> =
            items.iter().filter(|it| it.category == category).filter_map(|it| model.get(&it.id).map(|m| (it, m))).collect();
        if members.is_empty() {
            log::warn!("category {category} has no items with model shares; omitted");
            continue;
        }
        let n = members.len() as f64;
        let mean = |f: &dyn Fn(&NonceItem, &RoleShares) -> f64| members.iter().map(|(i, m)| f(i, m)).sum::<f64>() / n;
        out.push(CategoryMeans {
            category,
            items: members.len(),
            human_regular: mean(&|i, _| RoleShares::human(i).regular),
            human_irregular: mean(&|i, _| RoleShares::human(i).irregular()),
            model_regular: mean(&|_, m| m.regular),
            model_irregular: mean(&|_, m| m.irregular()),
        });
    }
    out
}

/// CSV writers. Every row carries a caller-supplied provenance string.
pub mod csv_out {
    use super::*;

    fn finish(w: csv::Writer<Vec<u8>>) -> String {
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
    }

    pub fn correlations(reports: &[(String, CorrelationReport)], provenance: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["run", "measure", "target", "regular", "irregular", "n_regular", "n_irregular", "provenance"]).unwrap();
        for (run, r) in reports {
            w.write_record([
                run.as_str(),
                r.measure.as_str(),
                r.target.as_str(),
                &format_correlation(r.regular),
                &format_correlation(r.irregular),
                &r.regular_pairs.len().to_string(),
                &r.irregular_pairs.len().to_string(),
                provenance,
            ])
            .unwrap();
        }
        finish(w)
    }

    pub fn paired_samples(report: &CorrelationReport, provenance: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["item", "role", "form", "model", "human", "target", "provenance"]).unwrap();
        for p in report.regular_pairs.iter().chain(&report.irregular_pairs) {
            w.write_record([
                p.item.as_str(),
                p.role.as_str(),
                &p.form.to_string(),
                &p.model.to_string(),
                &p.human.to_string(),
                report.target.as_str(),
                provenance,
            ])
            .unwrap();
        }
        finish(w)
    }

    pub fn cr5(reports: &[(String, Cr5Report)], provenance: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["run", "item", "complete", "provenance"]).unwrap();
        for (run, r) in reports {
            for (item, ok) in &r.per_item {
                w.write_record([run.as_str(), item, if *ok { "1" } else { "0" }, provenance]).unwrap();
            }
            w.write_record([run.as_str(), "ALL", &format!("{:.6}", r.value), provenance]).unwrap();
        }
        finish(w)
    }

    pub fn second_place(h: &SecondPlaceHistogram, provenance: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["item", "form", "seeds_ranking_second", "provenance"]).unwrap();
        for ((item, form), c) in &h.counts {
            w.write_record([item.as_str(), &form.to_string(), &c.to_string(), provenance]).unwrap();
        }
        finish(w)
    }

    pub fn category_means(rows: &[CategoryMeans], provenance: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["category", "items", "human_regular", "model_regular", "human_irregular", "model_irregular", "provenance"])
            .unwrap();
        for r in rows {
            w.write_record([
                r.category.as_str(),
                &r.items.to_string(),
                &format!("{:.6}", r.human_regular),
                &format!("{:.6}", r.model_regular),
                &format!("{:.6}", r.human_irregular),
                &format!("{:.6}", r.model_irregular),
                provenance,
            ])
            .unwrap();
        }
        finish(w)
    }
}
