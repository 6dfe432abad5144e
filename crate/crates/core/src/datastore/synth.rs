//! Deterministic synthetic verb corpora and nonce sets.
//!
//! Regular pasts follow the final-phoneme allomorph rule of the bundled suffix
//! table. Irregular verbs come in families that share a rime and a vowel
//! change. Nonce "human" shares come from a noisy rule: each category has a
//! base irregular share, perturbed by uniform noise, with a small "other" share
//! and the regular taking the remainder.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nonce::{Category, FormRole, NonceItem, SuggestedForm};
use super::{DataError, VerbClass, VerbEntry};
use crate::numerics::rng::{self, Stream};
use crate::phoneme::{PhonemeSeq, SuffixClass, SuffixTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrregularTemplate {
    /// Rime shared by every family member's present, e.g. `I N`.
    pub present_rime: String,
    /// Rime of the past, e.g. `{ N`.
    pub past_rime: String,
    /// Second attested past rime, offered as `irr2` on nonce items.
    #[serde(default)]
    pub alt_rime: Option<String>,
}

impl IrregularTemplate {
    fn new(present: &str, past: &str, alt: Option<&str>) -> Self {
        Self { present_rime: present.into(), past_rime: past.into(), alt_rime: alt.map(Into::into) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Word onsets, each a space-separated phoneme string.
    pub onsets: Vec<String>,
    pub vowels: Vec<String>,
    /// Stem-final consonants; their suffix class comes from the bundled table.
    pub codas: Vec<String>,
    pub regular_coronal: usize,
    pub regular_voiced: usize,
    pub regular_voiceless: usize,
    /// Irregular verbs, dealt round-robin over the templates.
    pub irregulars: usize,
    pub templates: Vec<IrregularTemplate>,
    pub nonce_per_category: usize,
    /// Keep regular stems off the templates' present rimes. When false,
    /// regulars and irregulars compete inside the same rime neighbourhoods.
    pub exclude_template_rimes: bool,
    /// Half-width of the uniform noise on the irregular share.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Self {
            onsets: s(&[
                "p", "b", "t", "d", "k", "g", "f", "v", "s", "z", "S", "m", "n", "l", "r", "w", "h", "p l", "p r",
                "b l", "b r", "k l", "k r", "g l", "g r", "f l", "f r", "s p", "s t", "s k", "s m", "s n", "s l",
                "s w", "t r", "d r",
            ]),
            vowels: s(&["I", "E", "{", "A", "i:", "u:", "eI", "oU", "aI", "V"]),
            codas: s(&["t", "d", "p", "k", "f", "s", "S", "b", "g", "v", "z", "m", "n", "l", "r"]),
            regular_coronal: 50,
            regular_voiced: 80,
            regular_voiceless: 70,
            irregulars: 20,
            templates: vec![
                IrregularTemplate::new("I N", "{ N", Some("V N")),
                IrregularTemplate::new("i: d", "E d", None),
                IrregularTemplate::new("aI d", "oU d", Some("I d")),
                IrregularTemplate::new("I k", "V k", None),
                IrregularTemplate::new("i: p", "E p t", None),
                IrregularTemplate::new("aI t", "I t", None),
                IrregularTemplate::new("oU", "u:", None),
                IrregularTemplate::new("E l", "oU l d", None),
                IrregularTemplate::new("eI k", "U k", None),
                IrregularTemplate::new("i: l", "E l t", None),
            ],
            nonce_per_category: 4,
            exclude_template_rimes: false,
            noise: 0.05,
        }
    }
}

impl SyntheticSpec {
    pub fn regulars(&self) -> usize {
        self.regular_coronal + self.regular_voiced + self.regular_voiceless
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::Spec(m.to_string()));
        if self.onsets.is_empty() || self.vowels.is_empty() {
            return bad("inventory needs at least one onset and one vowel");
        }
        if self.irregulars > 0 && self.templates.is_empty() {
            return bad("irregular verbs requested without templates");
        }
        if !(0.0..=0.5).contains(&self.noise) {
            return bad("noise must lie in [0, 0.5]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub corpus: Vec<VerbEntry>,
    pub nonce: Vec<NonceItem>,
}

fn seq(parts: &[&str]) -> PhonemeSeq {
    PhonemeSeq::parse(&parts.join(" "))
}

fn spelling(s: &PhonemeSeq) -> String {
    s.iter().collect::<String>().replace(['"', ':', '{'], "")
}

/// Base share of irregular responses per category.
fn irregular_base(c: Category) -> f64 {
    match c {
        Category::IorIrregular => 0.30,
        Category::IorBoth => 0.20,
        Category::Analogy => 0.15,
        Category::BurntLike => 0.12,
        Category::IorNeither => 0.08,
        Category::IorRegular => 0.05,
    }
}

struct Builder<'a> {
    spec: &'a SyntheticSpec,
    table: SuffixTable,
    rng: rng::Rng,
    used: HashSet<PhonemeSeq>,
    template_rimes: Vec<PhonemeSeq>,
}

impl Builder<'_> {
    fn is_template_rime(&self, stem: &PhonemeSeq) -> bool {
        self.template_rimes.iter().any(|r| stem.ends_with(r.tokens()))
    }

    /// Unused stems of shape onset·vowel·coda whose suffix class is `class`,
    /// excluding template rimes, in shuffled order.
    fn stems(&mut self, class: SuffixClass, coda_filter: impl Fn(&str) -> bool) -> Vec<PhonemeSeq> {
        let mut codas: Vec<Option<&str>> =
            self.spec.codas.iter().map(|c| Some(c.as_str())).filter(|c| coda_filter(c.unwrap())).collect();
        if class == SuffixClass::Voiced && coda_filter("") {
            codas.push(None);
        }
        let mut out = Vec::new();
        for o in &self.spec.onsets {
            for v in &self.spec.vowels {
                for c in &codas {
                    let final_phoneme = c.unwrap_or(v.as_str());
                    if self.table.class(final_phoneme) != class {
                        continue;
                    }
                    let stem = match c {
                        Some(c) => seq(&[o, v, c]),
                        None => seq(&[o, v]),
                    };
                    if !self.used.contains(&stem) && !(self.spec.exclude_template_rimes && self.is_template_rime(&stem)) {
                        out.push(stem);
                    }
                }
            }
        }
        out.shuffle(&mut self.rng);
        out
    }

    fn take(&mut self, pool: &mut Vec<PhonemeSeq>, what: &str) -> Result<PhonemeSeq, DataError> {
        let s = pool.pop().ok_or_else(|| DataError::Spec(format!("inventory too small for the requested {what}")))?;
        self.used.insert(s.clone());
        Ok(s)
    }

    fn regular(&self, present: &PhonemeSeq) -> PhonemeSeq {
        self.table.regular_past(present).expect("stems end in classified phonemes")
    }

    /// Onsets not yet combined with `rime`, shuffled.
    fn onsets_for(&mut self, rime: &PhonemeSeq) -> Vec<PhonemeSeq> {
        let mut out: Vec<PhonemeSeq> = self
            .spec
            .onsets
            .iter()
            .map(|o| PhonemeSeq::parse(o))
            .filter(|o| !self.used.contains(&o.concat(rime)))
            .collect();
        out.shuffle(&mut self.rng);
        out
    }
}

/// Generate a corpus and nonce set. A pure function of `(spec, seed)`.
pub fn make_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData, DataError> {
    spec.validate()?;
    let template_rimes = spec.templates.iter().map(|t| PhonemeSeq::parse(&t.present_rime)).collect();
    let mut b = Builder {
        spec,
        table: SuffixTable::bundled(),
        rng: rng::stream(seed, Stream::Synthetic),
        used: HashSet::new(),
        template_rimes,
    };

    let mut corpus = Vec::new();
    for (class, n) in [
        (SuffixClass::CoronalStop, spec.regular_coronal),
        (SuffixClass::Voiced, spec.regular_voiced),
        (SuffixClass::Voiceless, spec.regular_voiceless),
    ] {
        let mut pool = b.stems(class, |_| true);
        for _ in 0..n {
            let present = b.take(&mut pool, "regular verbs")?;
            let past = b.regular(&present);
            corpus.push(VerbEntry {
                lemma: spelling(&present),
                present,
                past,
                class: VerbClass::Regular,
                frequency: None,
            });
        }
    }

    for k in 0..spec.irregulars {
        let t = &spec.templates[k % spec.templates.len()];
        let rime = PhonemeSeq::parse(&t.present_rime);
        let mut onsets = b.onsets_for(&rime);
        let onset = b.take(&mut onsets, "irregular families")?;
        let present = onset.concat(&rime);
        b.used.insert(present.clone());
        let past = onset.concat(&PhonemeSeq::parse(&t.past_rime));
        corpus.push(VerbEntry { lemma: spelling(&present), present, past, class: VerbClass::Irregular, frequency: None });
    }

    let mut nonce = Vec::new();
    let mut template_turn = 0usize;
    for category in Category::ALL {
        for i in 0..spec.nonce_per_category {
            let (present, mut irregulars) = match category {
                Category::IorIrregular | Category::IorBoth | Category::Analogy if !spec.templates.is_empty() => {
                    let t = spec.templates[template_turn % spec.templates.len()].clone();
                    template_turn += 1;
                    let rime = PhonemeSeq::parse(&t.present_rime);
                    let mut onsets = b.onsets_for(&rime);
                    let onset = b.take(&mut onsets, "nonce items")?;
                    let present = onset.concat(&rime);
                    b.used.insert(present.clone());
                    let mut irr = vec![onset.concat(&PhonemeSeq::parse(&t.past_rime))];
                    if let Some(alt) = &t.alt_rime {
                        irr.push(onset.concat(&PhonemeSeq::parse(alt)));
                    }
                    (present, irr)
                }
                Category::BurntLike => {
                    let sonorant = |c: &str| matches!(c, "l" | "n" | "r" | "m");
                    let mut pool = b.stems(SuffixClass::Voiced, |c| sonorant(c));
                    let present = b.take(&mut pool, "nonce items")?;
                    let burnt = present.concat(&"t".into());
                    (present, vec![burnt])
                }
                _ => {
                    let class = [SuffixClass::Voiced, SuffixClass::Voiceless, SuffixClass::CoronalStop][i % 3];
                    let mut pool = b.stems(class, |_| true);
                    let present = b.take(&mut pool, "nonce items")?;
                    (present.clone(), vec![vowel_change(&present, &spec.vowels)])
                }
            };
            let regular = b.regular(&present);
            irregulars.retain(|f| f != &regular);
            nonce.push(nonce_item(&mut b.rng, spec.noise, format!("n{:02}", nonce.len() + 1), present, category, regular, irregulars));
        }
    }

    Ok(SyntheticData { corpus, nonce })
}

/// Replace the last vowel with the next vowel in the inventory.
fn vowel_change(present: &PhonemeSeq, vowels: &[String]) -> PhonemeSeq {
    let mut toks = present.tokens().to_vec();
    if let Some(pos) = toks.iter().rposition(|t| vowels.contains(t)) {
        let k = vowels.iter().position(|v| *v == toks[pos]).expect("found above");
        toks[pos] = vowels[(k + 1) % vowels.len()].clone();
    }
    PhonemeSeq::new(toks)
}

fn nonce_item(
    rng: &mut rng::Rng,
    noise: f64,
    id: String,
    present: PhonemeSeq,
    category: Category,
    regular: PhonemeSeq,
    irregulars: Vec<PhonemeSeq>,
) -> NonceItem {
    let round4 = |x: f64| (x * 1e4).round() / 1e4;
    let other = round4(0.02 + rng.gen_range(0.0..0.06));
    let irr_total = round4((irregular_base(category) + rng.gen_range(-noise..=noise)).clamp(0.0, 1.0 - other));
    let irr_shares: Vec<f64> = match irregulars.len() {
        1 => vec![irr_total],
        _ => {
            let first = round4(irr_total * 0.7);
            vec![first, round4(irr_total - first)]
        }
    };
    let reg_share = 1.0 - other - irr_shares.iter().sum::<f64>();
    let mut rating = |p: f64| {
        let r = 1.0 + 6.0 * p.sqrt() + rng.gen_range(-0.3..0.3);
        (r.clamp(1.0, 7.0) * 100.0).round() / 100.0
    };
    let mut forms = vec![SuggestedForm {
        role: FormRole::Regular,
        orthography: Some(spelling(&regular)),
        rating: Some(rating(reg_share)),
        phonemes: regular,
        production: reg_share,
    }];
    for (k, (f, p)) in irregulars.into_iter().zip(irr_shares).enumerate() {
        forms.push(SuggestedForm {
            role: if k == 0 { FormRole::Irregular1 } else { FormRole::Irregular2 },
            orthography: Some(spelling(&f)),
            rating: Some(rating(p)),
            phonemes: f,
            production: p,
        });
    }
    NonceItem { id, present, category, forms, other }
}
