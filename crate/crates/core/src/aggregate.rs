//! Seeds as simulated participants: each trained model produces sampled
//! past-tense forms for every nonce item, the samples are sorted into the
//! suggested-form categories, and the pooled shares are compared with human
//! production data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::datastore::{Category, FormRole, NonceItem, VerbEntry};
use crate::inflector::{sample_forms, HyperParams, InflectorError, Model, Sample, Trainer, Vocabulary};
use crate::numerics::rng::{substream, Stream};
use crate::wugeval::{correlate_forms, CorrelationReport, EvalError, FormScores, Measure, RoleShares, Target};

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("no seeds given")]
    NoSeeds,
    #[error("samples per seed must be at least 1")]
    NoSamples,
    #[error("seed {0} appears more than once")]
    DuplicateSeed(u64),
    #[error("provenance: expected a model for seed {expected}, found seed {found}")]
    Provenance { expected: u64, found: u64 },
    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: InflectorError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Sample counts for one item, by category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoleCounts {
    pub regular: u64,
    pub irregular1: u64,
    pub irregular2: u64,
    pub other: u64,
}

impl RoleCounts {
    pub fn total(&self) -> u64 {
        self.regular + self.irregular1 + self.irregular2 + self.other
    }

    fn add(&mut self, o: &RoleCounts) {
        self.regular += o.regular;
        self.irregular1 += o.irregular1;
        self.irregular2 += o.irregular2;
        self.other += o.other;
    }

    fn bump(&mut self, role: Option<FormRole>) {
        match role {
            Some(FormRole::Regular) => self.regular += 1,
            Some(FormRole::Irregular1) => self.irregular1 += 1,
            Some(FormRole::Irregular2) => self.irregular2 += 1,
            None => self.other += 1,
        }
    }
}

/// Category of one sample: exact phoneme match against the suggested forms,
/// truncated samples counting as other.
pub fn categorize(item: &NonceItem, sample: &Sample) -> Option<FormRole> {
    if sample.truncated {
        return None;
    }
    item.forms.iter().find(|f| f.phonemes == sample.form).map(|f| f.role)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductionRow {
    pub item: String,
    pub category: Category,
    pub has_irregular2: bool,
    pub counts: RoleCounts,
}

impl ProductionRow {
    pub fn shares(&self) -> RoleShares {
        let n = self.counts.total() as f64;
        RoleShares {
            regular: self.counts.regular as f64 / n,
            irregular1: self.counts.irregular1 as f64 / n,
            irregular2: self.counts.irregular2 as f64 / n,
            other: self.counts.other as f64 / n,
        }
    }
}

/// Pooled sample counts, one row per nonce item in input order. Every row's
/// counts sum to `seeds.len() × samples_per_seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionTable {
    pub rows: Vec<ProductionRow>,
    /// Ascending.
    pub seeds: Vec<u64>,
    pub samples_per_seed: usize,
}

impl ProductionTable {
    pub fn row(&self, item: &str) -> Option<&ProductionRow> {
        self.rows.iter().find(|r| r.item == item)
    }

    pub fn shares(&self) -> BTreeMap<String, RoleShares> {
        self.rows.iter().map(|r| (r.item.clone(), r.shares())).collect()
    }

    /// Model share of every suggested form, keyed as the evaluation module
    /// expects.
    pub fn form_scores(&self, items: &[NonceItem]) -> FormScores {
        let mut out = FormScores::new();
        for it in items {
            let Some(row) = self.row(&it.id) else { continue };
            let s = row.shares();
            for f in &it.forms {
                let v = match f.role {
                    FormRole::Regular => s.regular,
                    FormRole::Irregular1 => s.irregular1,
                    FormRole::Irregular2 => s.irregular2,
                };
                out.insert((it.id.clone(), f.phonemes.clone()), v);
            }
        }
        out
    }

    /// CSV with one block per category: item, the four shares, raw counts
    /// and a provenance column.
    pub fn to_csv(&self, provenance: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "category", "item", "regular", "irregular1", "irregular2", "other", "n_regular", "n_irregular1", "n_irregular2", "n_other",
            "provenance",
        ])
        .unwrap();
        for category in Category::ALL {
            for r in self.rows.iter().filter(|r| r.category == category) {
                let s = r.shares();
                let irr2 = if r.has_irregular2 { format!("{:.6}", s.irregular2) } else { "NA".into() };
                w.write_record([
                    category.as_str(),
                    &r.item,
                    &format!("{:.6}", s.regular),
                    &format!("{:.6}", s.irregular1),
                    &irr2,
                    &format!("{:.6}", s.other),
                    &r.counts.regular.to_string(),
                    &r.counts.irregular1.to_string(),
                    &r.counts.irregular2.to_string(),
                    &r.counts.other.to_string(),
                    provenance,
                ])
                .unwrap();
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Counts for one participant. Item `i` draws from the model seed's sampling
/// substream `i`, so a participant's productions do not depend on which
/// other seeds run alongside it.
pub fn sample_participant(model: &Model, items: &[NonceItem], n_samples: usize) -> Result<Vec<RoleCounts>, InflectorError> {
    items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let mut rng = substream(model.seed(), Stream::Sampling, i as u64);
            let mut c = RoleCounts::default();
            for s in sample_forms(model, &it.present, n_samples, &mut rng)? {
                c.bump(categorize(it, &s));
            }
            Ok(c)
        })
        .collect()
}

/// Pool sampled productions over already trained models. Models are sorted
/// by seed before sampling, so the result does not depend on their order.
pub fn aggregate_models(models: &[&Model], items: &[NonceItem], n_samples: usize) -> Result<ProductionTable, AggregateError> {
    if models.is_empty() {
        return Err(AggregateError::NoSeeds);
    }
    if n_samples == 0 {
        return Err(AggregateError::NoSamples);
    }
    let mut sorted: Vec<&Model> = models.to_vec();
    sorted.sort_by_key(|m| m.seed());
    let mut seen = BTreeSet::new();
    for m in &sorted {
        if !seen.insert(m.seed()) {
            return Err(AggregateError::DuplicateSeed(m.seed()));
        }
    }
    let per_seed: Vec<Vec<RoleCounts>> = sorted
        .par_iter()
        .map(|m| sample_participant(m, items, n_samples).map_err(|source| AggregateError::Seed { seed: m.seed(), source }))
        .collect::<Result<_, _>>()?;
    let rows = items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let mut counts = RoleCounts::default();
            for seed in &per_seed {
                counts.add(&seed[i]);
            }
            ProductionRow { item: it.id.clone(), category: it.category, has_irregular2: it.form(FormRole::Irregular2).is_some(), counts }
        })
        .collect();
    Ok(ProductionTable { rows, seeds: sorted.iter().map(|m| m.seed()).collect(), samples_per_seed: n_samples })
}

/// Check that `models[i]` was trained from `seeds[i]`.
pub fn check_provenance(seeds: &[u64], models: &[&Model]) -> Result<(), AggregateError> {
    for (&expected, m) in seeds.iter().zip(models) {
        if m.seed() != expected {
            return Err(AggregateError::Provenance { expected, found: m.seed() });
        }
    }
    Ok(())
}

/// Train one model per seed on `stream` for `hp.epochs` epochs, then pool
/// their samples.
pub fn run_participants(
    stream: &[VerbEntry],
    vocab: &Vocabulary,
    items: &[NonceItem],
    hp: &HyperParams,
    seeds: &[u64],
    n_samples: usize,
) -> Result<ProductionTable, AggregateError> {
    if seeds.is_empty() {
        return Err(AggregateError::NoSeeds);
    }
    let models: Vec<Model> = seeds
        .par_iter()
        .map(|&seed| {
            let err = |source: InflectorError| AggregateError::Seed { seed, source };
            let mut trainer = Trainer::new(Model::new(vocab.clone(), hp.clone().with_seed(seed)).map_err(err)?);
            for _ in 0..hp.epochs {
                trainer.train_epoch(stream).map_err(err)?;
            }
            Ok::<_, AggregateError>(trainer.into_model())
        })
        .collect::<Result<_, _>>()?;
    let refs: Vec<&Model> = models.iter().collect();
    check_provenance(seeds, &refs)?;
    aggregate_models(&refs, items, n_samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceFlag {
    pub item: String,
    /// Some suggested irregular has a larger share than the regular.
    pub model_prefers_irregular: bool,
    pub human_prefers_irregular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanComparison {
    pub correlation: CorrelationReport,
    pub flags: Vec<PreferenceFlag>,
}

impl HumanComparison {
    pub fn model_irregular_preferred(&self) -> usize {
        self.flags.iter().filter(|f| f.model_prefers_irregular).count()
    }

    pub fn human_irregular_preferred(&self) -> usize {
        self.flags.iter().filter(|f| f.human_prefers_irregular).count()
    }

    pub fn divergent(&self) -> usize {
        self.flags.iter().filter(|f| f.model_prefers_irregular != f.human_prefers_irregular).count()
    }

    pub fn flags_csv(&self, provenance: &str) -> String {
        let mut s = String::from("item,model_prefers_irregular,human_prefers_irregular,provenance\n");
        for f in &self.flags {
            let _ = writeln!(s, "{},{},{},{provenance}", f.item, f.model_prefers_irregular as u8, f.human_prefers_irregular as u8);
        }
        s
    }
}

fn prefers_irregular(s: &RoleShares) -> bool {
    s.irregular1.max(s.irregular2) > s.regular
}

/// Correlate pooled model shares with human production shares, regular and
/// irregular forms as separate pools, and flag items where an irregular is
/// preferred.
pub fn compare_to_humans(table: &ProductionTable, items: &[NonceItem], measure: Measure) -> Result<HumanComparison, AggregateError> {
    let correlation = correlate_forms(items, &table.form_scores(items), measure, Target::Production)?;
    let flags = items
        .iter()
        .filter_map(|it| {
            table.row(&it.id).map(|r| PreferenceFlag {
                item: it.id.clone(),
                model_prefers_irregular: prefers_irregular(&r.shares()),
                human_prefers_irregular: prefers_irregular(&RoleShares::human(it)),
            })
        })
        .collect();
    Ok(HumanComparison { correlation, flags })
}
