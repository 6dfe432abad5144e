//! Experiment orchestration: multi-seed training, evaluation reports, the
//! aggregate-participant experiment, epoch sweeps, the rule baseline and
//! representation probes. Every command reads an [`ExperimentConfig`] and
//! writes CSV (the contract) plus SVG (for inspection) under `out_dir`.
//!
//! Seeds run on a pool of `workers` threads; per-seed results are merged in
//! seed-list order, so the worker count never changes any output.

pub mod config;
pub mod svg;

pub use config::ExperimentConfig;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::aggregate::{aggregate_models, check_provenance, compare_to_humans, AggregateError, HumanComparison, ProductionTable};
use crate::datastore::{
    epoch_stream, format_corpus, format_nonce, load_checkpoint, load_corpus, load_nonce, make_synthetic_corpus, save_checkpoint, Category,
    DataError, FreqMode, NonceItem, VerbClass, VerbEntry,
};
use crate::inflector::{beam_decode, force_score, training_accuracy, Accuracy, InflectorError, Model, Trainer, Vocabulary};
use crate::phoneme::{PhonemeSeq, SuffixTable};
use crate::probe::{
    decoder_phoneme_cloud, encoder_cloud, nearest_centroid_accuracy, neighbor_agreement, pca_project, reversed_corpus, EmbeddingCloud,
    ProbeError, ProbeWord, Projection,
};
use crate::rulebase::{induce_grammar, RuleGrammar};
use crate::wugeval::{
    category_means, correlate_all, correlate_forms, cr_at_5, csv_out, format_correlation, CategoryMeans, CorrelationReport, Cr5Report,
    EvalError, FormScores, Measure, SecondPlaceHistogram, Target,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Inflector(#[from] InflectorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error("missing checkpoints (run `train` first):\n  {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join("\n  "))]
    MissingCheckpoints(Vec<PathBuf>),
    #[error("provenance: {0}")]
    Provenance(String),
    #[error("seed {seed}: {source}")]
    Seed {
        seed: u64,
        #[source]
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    /// Bad configuration or input data, as opposed to a failure while
    /// running.
    pub fn is_validation(&self) -> bool {
        match self {
            HarnessError::Config(_) => true,
            HarnessError::Data(DataError::Parse { .. } | DataError::Validation { .. } | DataError::Spec(_)) => true,
            HarnessError::Inflector(InflectorError::UnknownPhoneme(_) | InflectorError::Config(_) | InflectorError::EmptyCorpus) => true,
            HarnessError::Seed { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    fn tag(seed: u64) -> impl Fn(HarnessError) -> HarnessError {
        move |e| HarnessError::Seed { seed, source: Box::new(e) }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<usize>,
    pub samples: Option<usize>,
    pub freq_mode: Option<FreqMode>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Apply overrides and revalidate. A shorter epoch budget drops the
    /// checkpoints beyond it.
    pub fn with_overrides(mut self, o: Overrides) -> Result<Self> {
        if let Some(s) = o.seeds {
            self.seeds = s;
        }
        if let Some(e) = o.epochs {
            self.hparams.epochs = e;
            self.epoch_checkpoints.retain(|&c| c <= e);
        }
        if let Some(n) = o.samples {
            self.samples = n;
        }
        if let Some(m) = o.freq_mode {
            self.freq_mode = m;
        }
        if let Some(d) = o.out_dir {
            self.out_dir = d;
        }
        self.validate()?;
        Ok(self)
    }
}

/// Everything a command needs from the input files.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    /// Distinct (present, past) types, used for accuracy and the rule
    /// baseline.
    pub corpus: Vec<VerbEntry>,
    /// Training stream under the configured frequency mode.
    pub stream: Vec<VerbEntry>,
    pub items: Vec<NonceItem>,
    /// Phonemes of the corpus and of every nonce present and suggested form.
    pub vocab: Vocabulary,
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let (entries, items) = match (&cfg.corpus, &cfg.nonce) {
        (Some(c), Some(n)) => (load_corpus(c, cfg.freq_mode)?, load_nonce(n)?),
        _ => {
            let d = make_synthetic_corpus(&cfg.synthetic, cfg.synthetic_seed)?;
            (d.corpus, d.nonce)
        }
    };
    if entries.is_empty() {
        return Err(InflectorError::EmptyCorpus.into());
    }
    let stream = epoch_stream(&entries, cfg.freq_mode);
    let mut seen = BTreeSet::new();
    let corpus: Vec<VerbEntry> =
        entries.into_iter().filter(|e| seen.insert((e.present.clone(), e.past.clone()))).collect();
    let mut seqs: Vec<&PhonemeSeq> = corpus.iter().flat_map(|e| [&e.present, &e.past]).collect();
    for it in &items {
        seqs.push(&it.present);
        seqs.extend(it.forms.iter().map(|f| &f.phonemes));
    }
    let vocab = Vocabulary::from_sequences(seqs);
    Ok(ExperimentData { corpus, stream, items, vocab })
}

pub fn provenance(seeds: &str, epoch: usize, cfg: &ExperimentConfig) -> String {
    format!("seed={seeds};epoch={epoch};config={}", cfg.hash())
}

fn all_seeds(cfg: &ExperimentConfig) -> String {
    cfg.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join("|")
}

pub fn checkpoint_path(cfg: &ExperimentConfig, seed: u64, epoch: usize) -> PathBuf {
    cfg.out_dir.join("checkpoints").join(format!("seed{seed}")).join(format!("epoch{epoch:04}.ckpt"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| HarnessError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

/// Run `f` for every seed on the worker pool; results in seed-list order,
/// errors tagged with their seed.
fn for_seeds<T: Send>(cfg: &ExperimentConfig, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<(u64, T)>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    pool.install(|| cfg.seeds.par_iter().map(|&s| f(s).map(|t| (s, t)).map_err(HarnessError::tag(s))).collect())
}

fn require_checkpoints(cfg: &ExperimentConfig, epochs: &[usize]) -> Result<()> {
    let missing: Vec<PathBuf> = cfg
        .seeds
        .iter()
        .flat_map(|&s| epochs.iter().map(move |&e| checkpoint_path(cfg, s, e)))
        .filter(|p| !p.exists())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::MissingCheckpoints(missing))
    }
}

/// Load a checkpoint and check it belongs to this config, seed and epoch.
pub fn load_seed_model(cfg: &ExperimentConfig, data: &ExperimentData, seed: u64, epoch: usize) -> Result<Model> {
    let path = checkpoint_path(cfg, seed, epoch);
    let model = load_checkpoint(&path)?;
    let mismatch = |what: String| Err(HarnessError::Provenance(format!("{}: {what}", path.display())));
    if model.seed() != seed {
        return mismatch(format!("trained from seed {}, expected {seed}", model.seed()));
    }
    if model.epochs_completed != epoch {
        return mismatch(format!("holds epoch {}, expected {epoch}", model.epochs_completed));
    }
    if model.hparams() != &cfg.hparams.clone().with_seed(seed) {
        return mismatch("hyperparameters differ from the config".into());
    }
    if model.vocab() != &data.vocab {
        return mismatch("vocabulary differs from the configured data".into());
    }
    Ok(model)
}

fn accuracy_cells(a: Option<&Accuracy>) -> [String; 3] {
    let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
    match a {
        Some(a) => [format!("{:.4}", a.overall), f(a.regular), f(a.irregular)],
        None => ["NA".into(), "NA".into(), "NA".into()],
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss_per_symbol: f64,
    pub accuracy: Option<Accuracy>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub logs: Vec<(u64, Vec<EpochLog>)>,
    pub checkpoints: Vec<PathBuf>,
}

/// Train every seed, saving the configured epoch checkpoints and a
/// per-epoch log.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    let data = load_data(cfg)?;
    let keep: BTreeSet<usize> = cfg.checkpoint_epochs().into_iter().collect();
    let hp = &cfg.hparams;
    let runs = for_seeds(cfg, |seed| {
        let mut trainer = Trainer::new(Model::new(data.vocab.clone(), hp.clone().with_seed(seed))?);
        let mut log = Vec::with_capacity(hp.epochs);
        let mut saved = Vec::new();
        for epoch in 1..=hp.epochs {
            let stats = trainer.train_epoch(&data.stream)?;
            let accuracy = if epoch % cfg.accuracy_every == 0 || epoch == hp.epochs {
                Some(training_accuracy(trainer.model(), &data.corpus, hp.beam_width)?)
            } else {
                None
            };
            if let Some(a) = &accuracy {
                log::info!("seed {seed} epoch {epoch}: loss {:.4}, accuracy {:.2}%", stats.loss_per_symbol, a.overall);
            }
            log.push(EpochLog { epoch, loss_per_symbol: stats.loss_per_symbol, accuracy });
            if keep.contains(&epoch) {
                let path = checkpoint_path(cfg, seed, epoch);
                save_checkpoint(trainer.model(), &path)?;
                saved.push(path);
            }
        }
        Ok((log, saved))
    })?;

    let mut logs = Vec::new();
    let mut checkpoints = Vec::new();
    for (seed, (log, saved)) in runs {
        let prov = provenance(&seed.to_string(), hp.epochs, cfg);
        let mut s = String::from("epoch,loss_per_symbol,accuracy,regular_accuracy,irregular_accuracy,provenance\n");
        for l in &log {
            let [o, r, i] = accuracy_cells(l.accuracy.as_ref());
            let _ = writeln!(s, "{},{:.6},{o},{r},{i},{prov}", l.epoch, l.loss_per_symbol);
        }
        write_file(&cfg.out_dir.join("train").join(format!("seed{seed}.csv")), &s)?;
        checkpoints.extend(saved);
        logs.push((seed, log));
    }
    let x: Vec<f64> = logs.first().map_or_else(Vec::new, |(_, l)| l.iter().map(|e| e.epoch as f64).collect());
    let series: Vec<(String, Vec<f64>)> = logs
        .iter()
        .map(|(s, l)| (format!("seed {s}"), l.iter().map(|e| e.accuracy.as_ref().map_or(f64::NAN, |a| a.overall)).collect()))
        .collect();
    let refs: Vec<(&str, Vec<f64>)> = series.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
    write_file(
        &cfg.out_dir.join("train/accuracy.svg"),
        &svg::line_chart("Training accuracy", &x, &refs, "epoch", "accuracy (%)"),
    )?;
    Ok(TrainSummary { logs, checkpoints })
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Force-scored probability of every suggested form.
pub fn model_form_scores(model: &Model, items: &[NonceItem]) -> Result<FormScores> {
    let mut out = FormScores::new();
    for it in items {
        for f in &it.forms {
            out.insert((it.id.clone(), f.phonemes.clone()), force_score(model, &it.present, &f.phonemes)?.prob());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedEvaluation {
    pub seed: u64,
    pub accuracy: Accuracy,
    /// Spearman and Pearson against production, then against ratings when
    /// every form is rated.
    pub correlations: Vec<CorrelationReport>,
    pub cr5: Cr5Report,
}

/// Mean and sample standard deviation across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(Self { mean, sd })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateReport {
    pub seeds: Vec<SeedEvaluation>,
    /// Needs at least two seeds.
    pub second_place: Option<SecondPlaceHistogram>,
    pub overall: Option<MeanSd>,
    pub regular: Option<MeanSd>,
    pub irregular: Option<MeanSd>,
}

pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<EvaluateReport> {
    let data = load_data(cfg)?;
    let epoch = cfg.hparams.epochs;
    require_checkpoints(cfg, &[epoch])?;
    let width = cfg.hparams.beam_width;
    let per_seed = for_seeds(cfg, |seed| {
        let model = load_seed_model(cfg, &data, seed, epoch)?;
        let accuracy = training_accuracy(&model, &data.corpus, width)?;
        let mut beams = BTreeMap::new();
        for it in &data.items {
            beams.insert(it.id.clone(), beam_decode(&model, &it.present, width)?);
        }
        let correlations = correlate_all(&data.items, &model_form_scores(&model, &data.items)?)?;
        let cr5 = cr_at_5(&data.items, &beams)?;
        Ok((SeedEvaluation { seed, accuracy, correlations, cr5 }, beams))
    })?;
    let (seeds, beams): (Vec<SeedEvaluation>, Vec<_>) = per_seed.into_iter().map(|(_, v)| v).unzip();
    let second_place = if beams.len() >= 2 { Some(crate::wugeval::second_place_agreement(&beams)?) } else { None };
    let collect = |f: &dyn Fn(&Accuracy) -> Option<f64>| MeanSd::of(&seeds.iter().filter_map(|s| f(&s.accuracy)).collect::<Vec<_>>());
    let report = EvaluateReport {
        overall: collect(&|a| Some(a.overall)),
        regular: collect(&|a| a.regular),
        irregular: collect(&|a| a.irregular),
        second_place,
        seeds,
    };
    write_evaluate(cfg, &report, &beams, &data.items)?;
    Ok(report)
}

fn write_evaluate(cfg: &ExperimentConfig, r: &EvaluateReport, beams: &[BTreeMap<String, crate::inflector::BeamResult>], items: &[NonceItem]) -> Result<()> {
    let dir = cfg.out_dir.join("evaluate");
    let epoch = cfg.hparams.epochs;
    let mut corr = String::new();
    let mut cr5 = String::new();
    let mut acc = String::from("seed,accuracy,regular_accuracy,irregular_accuracy,provenance\n");
    let mut pairs = String::new();
    for (k, s) in r.seeds.iter().enumerate() {
        let prov = provenance(&s.seed.to_string(), epoch, cfg);
        let run = format!("seed{}", s.seed);
        let body = csv_out::correlations(&s.correlations.iter().map(|c| (run.clone(), c.clone())).collect::<Vec<_>>(), &prov);
        corr.push_str(if k == 0 { &body } else { body.split_once('\n').map_or("", |x| x.1) });
        let body = csv_out::cr5(&[(run.clone(), s.cr5.clone())], &prov);
        cr5.push_str(if k == 0 { &body } else { body.split_once('\n').map_or("", |x| x.1) });
        let [o, re, ir] = accuracy_cells(Some(&s.accuracy));
        let _ = writeln!(acc, "{},{o},{re},{ir},{prov}", s.seed);
        if let Some(c) = s.correlations.iter().find(|c| c.measure == Measure::Spearman && c.target == Target::Production) {
            let body = csv_out::paired_samples(c, &prov);
            pairs.push_str(if k == 0 { &body } else { body.split_once('\n').map_or("", |x| x.1) });
        }
    }
    let all = provenance(&all_seeds(cfg), epoch, cfg);
    let cell = |m: Option<MeanSd>, f: fn(&MeanSd) -> Option<f64>| m.as_ref().and_then(f).map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"));
    let _ = writeln!(acc, "mean,{},{},{},{all}", cell(r.overall, |m| Some(m.mean)), cell(r.regular, |m| Some(m.mean)), cell(r.irregular, |m| Some(m.mean)));
    let _ = writeln!(acc, "sd,{},{},{},{all}", cell(r.overall, |m| m.sd), cell(r.regular, |m| m.sd), cell(r.irregular, |m| m.sd));
    write_file(&dir.join("correlations.csv"), &corr)?;
    write_file(&dir.join("cr5.csv"), &cr5)?;
    write_file(&dir.join("accuracy.csv"), &acc)?;
    write_file(&dir.join("paired_scores.csv"), &pairs)?;

    let mut b = String::from("seed,item,rank,form,probability,provenance\n");
    for (s, seed_beams) in r.seeds.iter().zip(beams) {
        let prov = provenance(&s.seed.to_string(), epoch, cfg);
        for it in items {
            for (rank, h) in seed_beams[&it.id].hypotheses.iter().take(crate::wugeval::CR_DEPTH).enumerate() {
                let _ = writeln!(b, "{},{},{},{},{:.6e},{prov}", s.seed, it.id, rank + 1, h.form, h.prob());
            }
        }
    }
    write_file(&dir.join("beams.csv"), &b)?;

    let cats: Vec<String> = r.seeds.iter().map(|s| format!("seed {}", s.seed)).collect();
    let pick = |f: fn(&CorrelationReport) -> Option<f64>| -> Vec<f64> {
        r.seeds
            .iter()
            .map(|s| {
                s.correlations
                    .iter()
                    .find(|c| c.measure == Measure::Spearman && c.target == Target::Production)
                    .and_then(f)
                    .unwrap_or(f64::NAN)
            })
            .collect()
    };
    write_file(
        &dir.join("correlations.svg"),
        &svg::bar_chart(
            "Spearman correlation with human production, per seed",
            &cats,
            &[("regular", pick(|c| c.regular)), ("irregular", pick(|c| c.irregular))],
            "rho",
        ),
    )?;
    if let Some(h) = &r.second_place {
        write_file(&dir.join("second_place.csv"), &csv_out::second_place(h, &all))?;
        let dist = h.count_distribution();
        let cats: Vec<String> = dist.keys().map(|k| format!("{k} of {}", h.seeds)).collect();
        write_file(
            &dir.join("second_place.svg"),
            &svg::bar_chart("Seeds agreeing on a second-ranked form", &cats, &[("forms", dist.values().map(|&v| v as f64).collect())], "forms"),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// aggregate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub table: ProductionTable,
    pub spearman: HumanComparison,
    pub pearson: CorrelationReport,
    pub category_means: Vec<CategoryMeans>,
}

/// Treat each seed's final checkpoint as one participant and pool
/// `n_samples` productions per item and seed.
pub fn cmd_aggregate(cfg: &ExperimentConfig, n_samples: usize) -> Result<AggregateReport> {
    let data = load_data(cfg)?;
    let epoch = cfg.hparams.epochs;
    require_checkpoints(cfg, &[epoch])?;
    let models: Vec<Model> = for_seeds(cfg, |seed| load_seed_model(cfg, &data, seed, epoch))?.into_iter().map(|(_, m)| m).collect();
    let refs: Vec<&Model> = models.iter().collect();
    check_provenance(&cfg.seeds, &refs)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let table = pool.install(|| aggregate_models(&refs, &data.items, n_samples))?;
    let spearman = compare_to_humans(&table, &data.items, Measure::Spearman)?;
    let pearson = correlate_forms(&data.items, &table.form_scores(&data.items), Measure::Pearson, Target::Production)?;
    let category_means = category_means(&data.items, &table.shares());
    let report = AggregateReport { table, spearman, pearson, category_means };

    let dir = cfg.out_dir.join("aggregate");
    let prov = format!("{};samples={n_samples}", provenance(&all_seeds(cfg), epoch, cfg));
    write_file(&dir.join("production.csv"), &report.table.to_csv(&prov))?;
    write_file(&dir.join("preferences.csv"), &report.spearman.flags_csv(&prov))?;
    write_file(
        &dir.join("correlations.csv"),
        &csv_out::correlations(&[("aggregate".into(), report.spearman.correlation.clone()), ("aggregate".into(), report.pearson.clone())], &prov),
    )?;
    write_file(&dir.join("category_means.csv"), &csv_out::category_means(&report.category_means, &prov))?;

    let ids: Vec<String> = data.items.iter().map(|i| i.id.clone()).collect();
    let shares = report.table.shares();
    let human: Vec<_> = data.items.iter().map(crate::wugeval::RoleShares::human).collect();
    let model: Vec<_> = data.items.iter().map(|i| shares[&i.id]).collect();
    write_file(
        &dir.join("production.svg"),
        &svg::bar_chart(
            "Production shares per nonce item",
            &ids,
            &[
                ("human regular", human.iter().map(|s| s.regular).collect()),
                ("model regular", model.iter().map(|s| s.regular).collect()),
                ("human irregular", human.iter().map(|s| s.irregular()).collect()),
                ("model irregular", model.iter().map(|s| s.irregular()).collect()),
            ],
            "share",
        ),
    )?;
    let cats: Vec<String> = report.category_means.iter().map(|c| c.category.to_string()).collect();
    let col = |f: fn(&CategoryMeans) -> f64| report.category_means.iter().map(f).collect::<Vec<_>>();
    write_file(
        &dir.join("category_means.svg"),
        &svg::bar_chart(
            "Mean production share per category",
            &cats,
            &[
                ("human regular", col(|c| c.human_regular)),
                ("model regular", col(|c| c.model_regular)),
                ("human irregular", col(|c| c.human_irregular)),
                ("model irregular", col(|c| c.model_irregular)),
            ],
            "share",
        ),
    )?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// epoch sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    pub epoch: usize,
    pub rho_regular: Option<f64>,
    pub rho_irregular: Option<f64>,
    /// Mean over nonce items of the top beam hypothesis' probability.
    pub mean_top_probability: f64,
    pub irregular_accuracy: Option<f64>,
}

/// Correlation with human production, top-output confidence and irregular
/// training accuracy at every saved epoch.
pub fn cmd_epoch_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let data = load_data(cfg)?;
    let epochs = cfg.checkpoint_epochs();
    require_checkpoints(cfg, &epochs)?;
    let width = cfg.hparams.beam_width;
    let rows: Vec<SweepRow> = for_seeds(cfg, |seed| {
        epochs
            .iter()
            .map(|&epoch| {
                let model = load_seed_model(cfg, &data, seed, epoch)?;
                let c = correlate_forms(&data.items, &model_form_scores(&model, &data.items)?, Measure::Spearman, Target::Production)?;
                let mut top = 0.0;
                for it in &data.items {
                    top += beam_decode(&model, &it.present, width)?.top().map_or(0.0, |h| h.prob());
                }
                let acc = training_accuracy(&model, &data.corpus, width)?;
                Ok(SweepRow {
                    seed,
                    epoch,
                    rho_regular: c.regular,
                    rho_irregular: c.irregular,
                    mean_top_probability: top / data.items.len().max(1) as f64,
                    irregular_accuracy: acc.irregular,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
    .into_iter()
    .flat_map(|(_, r)| r)
    .collect();

    let mut s = String::from("seed,epoch,rho_regular,rho_irregular,mean_top_probability,irregular_accuracy,provenance\n");
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    for r in &rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{},{}",
            r.seed,
            r.epoch,
            format_correlation(r.rho_regular),
            format_correlation(r.rho_irregular),
            r.mean_top_probability,
            opt(r.irregular_accuracy),
            provenance(&r.seed.to_string(), r.epoch, cfg)
        );
    }
    let mean = |epoch: usize, f: &dyn Fn(&SweepRow) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter(|r| r.epoch == epoch).filter_map(f).collect();
        MeanSd::of(&v).map_or(f64::NAN, |m| m.mean)
    };
    for &e in &epochs {
        let _ = writeln!(
            s,
            "mean,{e},{:.6},{:.6},{:.6},{:.6},{}",
            mean(e, &|r| r.rho_regular),
            mean(e, &|r| r.rho_irregular),
            mean(e, &|r| Some(r.mean_top_probability)),
            mean(e, &|r| r.irregular_accuracy),
            provenance(&all_seeds(cfg), e, cfg)
        );
    }
    let dir = cfg.out_dir.join("sweep");
    write_file(&dir.join("epoch_sweep.csv"), &s)?;
    let x: Vec<f64> = epochs.iter().map(|&e| e as f64).collect();
    let line = |f: &dyn Fn(&SweepRow) -> Option<f64>| epochs.iter().map(|&e| mean(e, f)).collect::<Vec<_>>();
    write_file(
        &dir.join("epoch_sweep.svg"),
        &svg::line_chart(
            "Correlation and confidence across training",
            &x,
            &[
                ("rho regular", line(&|r| r.rho_regular)),
                ("rho irregular", line(&|r| r.rho_irregular)),
                ("mean top probability", line(&|r| Some(r.mean_top_probability))),
                ("irregular accuracy / 100", line(&|r| r.irregular_accuracy.map(|a| a / 100.0))),
            ],
            "epoch",
            "value",
        ),
    )?;
    Ok(rows)
}

// ---------------------------------------------------------------------------
// rules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RulesReport {
    pub grammar: RuleGrammar,
    pub correlations: Vec<CorrelationReport>,
}

/// Induce the rule grammar from the training types and score every
/// suggested form with it; reports match the neural ones column for column.
pub fn cmd_rules(cfg: &ExperimentConfig) -> Result<RulesReport> {
    let data = load_data(cfg)?;
    let grammar = induce_grammar(&data.corpus);
    let mut scores = FormScores::new();
    for it in &data.items {
        for f in &it.forms {
            scores.insert((it.id.clone(), f.phonemes.clone()), grammar.score_form(&it.present, &f.phonemes));
        }
    }
    let correlations = correlate_all(&data.items, &scores)?;
    let dir = cfg.out_dir.join("rules");
    let prov = format!("seed=NA;epoch=NA;config={};grammar={}", cfg.hash(), &grammar.fingerprint[..16]);
    write_file(&dir.join("grammar.tsv"), &grammar.to_table())?;
    write_file(
        &dir.join("correlations.csv"),
        &csv_out::correlations(&correlations.iter().map(|c| ("rules".to_string(), c.clone())).collect::<Vec<_>>(), &prov),
    )?;
    if let Some(c) = correlations.first() {
        write_file(&dir.join("paired_scores.csv"), &csv_out::paired_samples(c, &prov))?;
    }
    Ok(RulesReport { grammar, correlations })
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

/// kNN agreement on a word's first or last input phoneme against the
/// chance rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub trailing: f64,
    pub trailing_chance: f64,
    pub leading: f64,
    pub leading_chance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub seed: u64,
    pub encoder: Agreement,
    pub encoder_projection: Projection,
    /// Same seed trained on reversed forms; positions refer to its
    /// (reversed) inputs.
    pub reversed: Agreement,
    pub phoneme_projection: Projection,
    /// Nearest-centroid accuracy of the three suffix classes in the 2-D
    /// phoneme projection.
    pub phoneme_class_accuracy: f64,
}

/// Probe words: distinct corpus presents (class of their first listed past)
/// and nonce presents not in the corpus.
pub fn probe_words(data: &ExperimentData) -> Vec<ProbeWord> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for e in &data.corpus {
        if seen.insert(e.present.clone()) {
            let class = match e.class {
                VerbClass::Regular => "regular",
                VerbClass::Irregular => "irregular",
            };
            out.push(ProbeWord { label: e.present.to_string(), present: e.present.clone(), class: class.into() });
        }
    }
    for it in &data.items {
        if seen.insert(it.present.clone()) {
            out.push(ProbeWord { label: it.present.to_string(), present: it.present.clone(), class: "nonce".into() });
        }
    }
    out
}

fn agreement(cloud: &EmbeddingCloud, words: &[ProbeWord], k: usize) -> Agreement {
    let vectors: Vec<Vec<f64>> = cloud.points().iter().map(|p| p.vector.clone()).collect();
    let (trailing, trailing_chance) = neighbor_agreement(&vectors, k, |i, j| words[i].present.last() == words[j].present.last());
    let (leading, leading_chance) = neighbor_agreement(&vectors, k, |i, j| words[i].present.first() == words[j].present.first());
    Agreement { trailing, trailing_chance, leading, leading_chance }
}

fn scatter_svg(title: &str, p: &Projection, labelled: bool) -> String {
    let pts: Vec<(f64, f64, &str, &str)> = p
        .points
        .iter()
        .map(|(l, c, x)| (x.first().copied().unwrap_or(0.0), x.get(1).copied().unwrap_or(0.0), c.as_str(), if labelled { l.as_str() } else { "" }))
        .collect();
    svg::scatter(title, &pts, "PC1", "PC2")
}

/// Encoder and decoder-phoneme clouds of the first seed's final model, PCA
/// projections, and the reversed-input control (trained here).
pub fn cmd_probe(cfg: &ExperimentConfig) -> Result<ProbeReport> {
    let data = load_data(cfg)?;
    let seed = cfg.seeds[0];
    let epoch = cfg.hparams.epochs;
    require_checkpoints(&ExperimentConfig { seeds: vec![seed], ..cfg.clone() }, &[epoch])?;
    let tag = HarnessError::tag(seed);
    let model = load_seed_model(cfg, &data, seed, epoch).map_err(&tag)?;
    let words = probe_words(&data);
    let enc = encoder_cloud(&model, &words)?;
    let encoder = agreement(&enc, &words, cfg.probe_neighbors);
    let encoder_projection = pca_project(&enc, 2)?;
    let pairs: Vec<(PhonemeSeq, PhonemeSeq)> = data.corpus.iter().map(|e| (e.present.clone(), e.past.clone())).collect();
    let phon = decoder_phoneme_cloud(&model, &pairs, &SuffixTable::bundled())?;
    let phoneme_projection = pca_project(&phon, 2)?;
    let phoneme_class_accuracy = nearest_centroid_accuracy(&phoneme_projection.points, &["unclassified"]);

    let reversed_path = cfg.out_dir.join("probe").join(format!("reversed_seed{seed}.ckpt"));
    let reversed_model = match load_checkpoint(&reversed_path) {
        Ok(m) if m.seed() == seed && m.epochs_completed == epoch && m.hparams() == &cfg.hparams.clone().with_seed(seed) && m.vocab() == &data.vocab => m,
        _ => {
            let stream = reversed_corpus(&data.stream);
            let mut t = Trainer::new(Model::new(data.vocab.clone(), cfg.hparams.clone().with_seed(seed))?);
            for _ in 0..epoch {
                t.train_epoch(&stream).map_err(|e| tag(e.into()))?;
            }
            save_checkpoint(t.model(), &reversed_path)?;
            load_checkpoint(&reversed_path)?
        }
    };
    let rev_words: Vec<ProbeWord> = words.iter().map(|w| ProbeWord { present: w.present.reversed(), ..w.clone() }).collect();
    let rev = encoder_cloud(&reversed_model, &rev_words)?;
    let reversed = agreement(&rev, &rev_words, cfg.probe_neighbors);
    let reversed_projection = pca_project(&rev, 2)?;

    let dir = cfg.out_dir.join("probe");
    let prov = provenance(&seed.to_string(), epoch, cfg);
    write_file(&dir.join("encoder_cloud.csv"), &enc.to_csv(&prov))?;
    write_file(&dir.join("encoder_pca.csv"), &encoder_projection.to_csv(&prov))?;
    write_file(&dir.join("encoder_pca.svg"), &scatter_svg("Encoder summary vectors (PCA)", &encoder_projection, false))?;
    write_file(&dir.join("reversed_encoder_pca.csv"), &reversed_projection.to_csv(&prov))?;
    write_file(&dir.join("reversed_encoder_pca.svg"), &scatter_svg("Reversed-input encoder vectors (PCA)", &reversed_projection, false))?;
    write_file(&dir.join("phoneme_cloud.csv"), &phon.to_csv(&prov))?;
    write_file(&dir.join("phoneme_pca.csv"), &phoneme_projection.to_csv(&prov))?;
    write_file(&dir.join("phoneme_pca.svg"), &scatter_svg("Decoder phoneme vectors (PCA)", &phoneme_projection, true))?;
    let mut s = String::from("model,measure,value,chance,provenance\n");
    for (name, a) in [("forward", encoder), ("reversed", reversed)] {
        let _ = writeln!(s, "{name},knn_same_last_input_phoneme,{:.6},{:.6},{prov}", a.trailing, a.trailing_chance);
        let _ = writeln!(s, "{name},knn_same_first_input_phoneme,{:.6},{:.6},{prov}", a.leading, a.leading_chance);
    }
    for (i, r) in encoder_projection.explained.iter().enumerate() {
        let _ = writeln!(s, "forward,encoder_explained_pc{},{r:.6},NA,{prov}", i + 1);
    }
    for (i, r) in phoneme_projection.explained.iter().enumerate() {
        let _ = writeln!(s, "forward,phoneme_explained_pc{},{r:.6},NA,{prov}", i + 1);
    }
    let _ = writeln!(s, "forward,phoneme_class_centroid_accuracy,{phoneme_class_accuracy:.6},NA,{prov}");
    write_file(&dir.join("summary.csv"), &s)?;
    Ok(ProbeReport { seed, encoder, encoder_projection, reversed, phoneme_projection, phoneme_class_accuracy })
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

/// Write the synthetic fixture as corpus and nonce files under
/// `out_dir/synth`.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<(PathBuf, PathBuf)> {
    let d = make_synthetic_corpus(&cfg.synthetic, cfg.synthetic_seed)?;
    let dir = cfg.out_dir.join("synth");
    let (c, n) = (dir.join("corpus.tsv"), dir.join("nonce.tsv"));
    write_file(&c, &format_corpus(&d.corpus))?;
    write_file(&n, &format_nonce(&d.nonce))?;
    let by_cat: BTreeMap<Category, usize> = d.nonce.iter().fold(BTreeMap::new(), |mut m, it| {
        *m.entry(it.category).or_insert(0) += 1;
        m
    });
    log::info!("synthetic fixture: {} verbs, nonce items per category {by_cat:?}", d.corpus.len());
    Ok((c, n))
}
