//! Minimal-generalization rule learner over literal phoneme contexts.
//!
//! A rule rewrites `A → B` between a left and a right context. Word-specific
//! rules come from factoring each (present, past) pair; one pass of pairwise
//! generalization within each change group then widens the contexts to their
//! shared material. Left contexts generalize to a variable plus a literal
//! suffix; right contexts to a literal prefix, open-ended when truncated.
//! Contexts never generalize through phonological features.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datastore::VerbEntry;
use crate::phoneme::PhonemeSeq;

/// One-sided 75% normal quantile.
pub const Z_75: f64 = 0.674_489_750_196_081_7;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Change {
    pub from: PhonemeSeq,
    pub to: PhonemeSeq,
}

impl Change {
    pub fn is_identity(&self) -> bool {
        self.from == self.to
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeftContext {
    /// Exactly this material precedes the change.
    Literal(PhonemeSeq),
    /// Anything, then this suffix.
    Variable(PhonemeSeq),
}

impl LeftContext {
    fn material(&self) -> &PhonemeSeq {
        match self {
            LeftContext::Literal(s) | LeftContext::Variable(s) => s,
        }
    }

    fn admits(&self, prefix: &[String]) -> bool {
        match self {
            LeftContext::Literal(s) => prefix == s.tokens(),
            LeftContext::Variable(s) => prefix.ends_with(s.tokens()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RightContext {
    pub literal: PhonemeSeq,
    /// Material may follow `literal`. A closed context is word-final.
    pub open: bool,
}

impl RightContext {
    pub fn closed(literal: PhonemeSeq) -> Self {
        Self { literal, open: false }
    }

    fn admits(&self, rest: &[String]) -> bool {
        if self.open {
            rest.starts_with(self.literal.tokens())
        } else {
            rest == self.literal.tokens()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub change: Change,
    pub left: LeftContext,
    pub right: RightContext,
    /// Distinct corpus presents the context matches.
    pub scope: usize,
    /// Of those, presents the change maps to an attested past.
    pub hits: usize,
    pub confidence: f64,
}

type RuleKey = (Change, LeftContext, RightContext);

impl Rule {
    fn key(&self) -> RuleKey {
        (self.change.clone(), self.left.clone(), self.right.clone())
    }

    fn unscored(change: Change, left: LeftContext, right: RightContext) -> Self {
        Self { change, left, right, scope: 0, hits: 0, confidence: 0.0 }
    }

    /// Every output of applying the rule to `word`, one per match site, deduplicated.
    pub fn apply(&self, word: &PhonemeSeq) -> Vec<PhonemeSeq> {
        let w = word.tokens();
        let a = self.change.from.tokens();
        let mut out: Vec<PhonemeSeq> = Vec::new();
        for start in 0..=w.len() {
            let end = start + a.len();
            if end > w.len() || &w[start..end] != a {
                continue;
            }
            if !self.left.admits(&w[..start]) || !self.right.admits(&w[end..]) {
                continue;
            }
            let mut t: Vec<String> = w[..start].to_vec();
            t.extend(self.change.to.iter().map(str::to_string));
            t.extend(w[end..].iter().cloned());
            let form = PhonemeSeq::new(t);
            if !out.contains(&form) {
                out.push(form);
            }
        }
        out
    }

    pub fn matches(&self, word: &PhonemeSeq) -> bool {
        !self.apply(word).is_empty()
    }

    pub fn produces(&self, present: &PhonemeSeq, candidate: &PhonemeSeq) -> bool {
        self.apply(present).contains(candidate)
    }

    pub fn reliability(&self) -> f64 {
        self.hits as f64 / self.scope as f64
    }
}

fn show(s: &PhonemeSeq) -> String {
    if s.is_empty() {
        "∅".into()
    } else {
        s.to_string()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let left = match &self.left {
            LeftContext::Literal(s) => s.to_string(),
            LeftContext::Variable(s) if s.is_empty() => "X".into(),
            LeftContext::Variable(s) => format!("X {s}"),
        };
        let right = match (self.right.literal.is_empty(), self.right.open) {
            (true, true) => "Y".to_string(),
            (true, false) => String::new(),
            (false, true) => format!("{} Y", self.right.literal),
            (false, false) => self.right.literal.to_string(),
        };
        write!(f, "{} → {} / [{left} __ {right}]", show(&self.change.from), show(&self.change.to))
    }
}

/// Factor `present = L·A·R`, `past = L·B·R` with `L` the longest common
/// prefix and `R` the longest common suffix of what remains.
pub fn word_rule(present: &PhonemeSeq, past: &PhonemeSeq) -> Rule {
    let (p, q) = (present.tokens(), past.tokens());
    let l = p.iter().zip(q).take_while(|(x, y)| x == y).count();
    let (pr, qr) = (&p[l..], &q[l..]);
    let r = pr.iter().rev().zip(qr.iter().rev()).take_while(|(x, y)| x == y).count();
    let seq = |s: &[String]| PhonemeSeq::new(s.to_vec());
    Rule {
        change: Change { from: seq(&pr[..pr.len() - r]), to: seq(&qr[..qr.len() - r]) },
        left: LeftContext::Literal(seq(&p[..l])),
        right: RightContext::closed(seq(&pr[pr.len() - r..])),
        scope: 1,
        hits: 1,
        confidence: confidence(1, 1),
    }
}

fn common_suffix(a: &PhonemeSeq, b: &PhonemeSeq) -> PhonemeSeq {
    let n = a.tokens().iter().rev().zip(b.tokens().iter().rev()).take_while(|(x, y)| x == y).count();
    PhonemeSeq::new(a.tokens()[a.len() - n..].to_vec())
}

fn common_prefix(a: &PhonemeSeq, b: &PhonemeSeq) -> PhonemeSeq {
    let n = a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count();
    PhonemeSeq::new(a.tokens()[..n].to_vec())
}

/// Shared-material generalization of two rules with the same change. The
/// returned rule is unscored; `None` when the changes differ.
pub fn generalize(r1: &Rule, r2: &Rule) -> Option<Rule> {
    if r1.change != r2.change {
        return None;
    }
    let left = if r1.left == r2.left {
        r1.left.clone()
    } else {
        LeftContext::Variable(common_suffix(r1.left.material(), r2.left.material()))
    };
    let right = if r1.right == r2.right {
        r1.right.clone()
    } else {
        RightContext { literal: common_prefix(&r1.right.literal, &r2.right.literal), open: true }
    };
    Some(Rule { scope: r1.scope, hits: r1.hits, confidence: r1.confidence, ..Rule::unscored(r1.change.clone(), left, right) })
}

/// Lower bound of the one-sided 75% Wilson score interval for `hits/scope`.
/// Never exceeds `hits/scope` and is 0 when `hits` is 0.
pub fn confidence(hits: usize, scope: usize) -> f64 {
    if scope == 0 {
        return 0.0;
    }
    let n = scope as f64;
    let p = hits as f64 / n;
    let z2 = Z_75 * Z_75;
    let centre = p + z2 / (2.0 * n);
    let spread = Z_75 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - spread) / (1.0 + z2 / n)).clamp(0.0, p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleGrammar {
    /// Sorted by change, then contexts.
    pub rules: Vec<Rule>,
    /// SHA-256 over the sorted (present, past) pairs induced from.
    pub fingerprint: String,
}

fn fingerprint(corpus: &[VerbEntry]) -> String {
    let pairs: BTreeSet<(String, String)> = corpus.iter().map(|e| (e.present.to_string(), e.past.to_string())).collect();
    let mut h = Sha256::new();
    for (p, q) in pairs {
        h.update(p.as_bytes());
        h.update([0]);
        h.update(q.as_bytes());
        h.update([1]);
    }
    hex::encode(h.finalize())
}

/// Word rules plus one pass of pairwise generalization within each change
/// group, every rule scored against the whole corpus. Independent of corpus
/// order. Scope and hits count distinct presents.
pub fn induce_grammar(corpus: &[VerbEntry]) -> RuleGrammar {
    let pairs: BTreeSet<(&PhonemeSeq, &PhonemeSeq)> = corpus.iter().map(|e| (&e.present, &e.past)).collect();
    let mut groups: BTreeMap<Change, BTreeSet<(LeftContext, RightContext)>> = BTreeMap::new();
    for &(p, q) in &pairs {
        let r = word_rule(p, q);
        groups.entry(r.change).or_default().insert((r.left, r.right));
    }

    // Scope counts verbs, so doublet pasts share their present's slot.
    let mut verbs: BTreeMap<&PhonemeSeq, Vec<&PhonemeSeq>> = BTreeMap::new();
    for &(p, q) in &pairs {
        verbs.entry(p).or_default().push(q);
    }

    let mut keys: BTreeSet<RuleKey> = BTreeSet::new();
    for (change, contexts) in &groups {
        let words: Vec<Rule> =
            contexts.iter().map(|(l, r)| Rule::unscored(change.clone(), l.clone(), r.clone())).collect();
        for (i, a) in words.iter().enumerate() {
            keys.insert(a.key());
            for b in &words[i + 1..] {
                keys.insert(generalize(a, b).expect("same change group").key());
            }
        }
    }

    let rules = keys
        .into_iter()
        .map(|(change, left, right)| {
            let mut r = Rule::unscored(change, left, right);
            for (present, pasts) in &verbs {
                let outputs = r.apply(present);
                if !outputs.is_empty() {
                    r.scope += 1;
                    if pasts.iter().any(|q| outputs.contains(q)) {
                        r.hits += 1;
                    }
                }
            }
            r.confidence = confidence(r.hits, r.scope);
            r
        })
        .collect();
    RuleGrammar { rules, fingerprint: fingerprint(corpus) }
}

impl RuleGrammar {
    /// Highest confidence among rules mapping `present` to `candidate`; 0 if none does.
    pub fn score_form(&self, present: &PhonemeSeq, candidate: &PhonemeSeq) -> f64 {
        self.best_rule(present, candidate).map_or(0.0, |r| r.confidence)
    }

    pub fn best_rule(&self, present: &PhonemeSeq, candidate: &PhonemeSeq) -> Option<&Rule> {
        self.rules
            .iter()
            .filter(|r| r.produces(present, candidate))
            .max_by(|a, b| a.confidence.total_cmp(&b.confidence))
    }

    pub fn find(&self, change: &Change, left: &LeftContext, right: &RightContext) -> Option<&Rule> {
        self.rules.iter().find(|r| &r.change == change && &r.left == left && &r.right == right)
    }

    /// Tab-separated table: rule, change, left, right, scope, hits, confidence.
    pub fn to_table(&self) -> String {
        let mut s = String::from("rule\tfrom\tto\tleft\tright\tscope\thits\tconfidence\n");
        for r in &self.rules {
            let left = match &r.left {
                LeftContext::Literal(x) => x.to_string(),
                LeftContext::Variable(x) => format!("X {x}").trim_end().to_string(),
            };
            let right = if r.right.open { format!("{} Y", r.right.literal).trim_start().to_string() } else { r.right.literal.to_string() };
            s.push_str(&format!(
                "{r}\t{}\t{}\t{left}\t{right}\t{}\t{}\t{:.6}\n",
                r.change.from, r.change.to, r.scope, r.hits, r.confidence
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::VerbClass;
    use proptest::prelude::*;

    fn p(s: &str) -> PhonemeSeq {
        PhonemeSeq::parse(s)
    }

    fn reg(present: &str, past: &str) -> VerbEntry {
        VerbEntry::new(present, present, past, VerbClass::Regular)
    }

    #[test]
    fn want_gives_a_suffix_rule() {
        let r = word_rule(&p("w \"A n t"), &p("w \"A n t @ d"));
        assert_eq!(r.change, Change { from: p(""), to: p("@ d") });
        assert_eq!(r.left, LeftContext::Literal(p("w \"A n t")));
        assert_eq!(r.right, RightContext::closed(p("")));
        assert_eq!((r.scope, r.hits), (1, 1));
    }

    #[test]
    fn hit_gives_the_identity_rule() {
        let r = word_rule(&p("h I t"), &p("h I t"));
        assert!(r.change.from.is_empty() && r.change.to.is_empty());
    }

    #[test]
    fn read_gives_a_vowel_change_between_contexts() {
        let r = word_rule(&p("r \"i: d"), &p("r \"E d"));
        assert_eq!(r.change, Change { from: p("\"i:"), to: p("\"E") });
        assert_eq!(r.left, LeftContext::Literal(p("r")));
        assert_eq!(r.right, RightContext::closed(p("d")));
    }

    #[test]
    fn want_and_start_share_a_final_t() {
        let g = generalize(&word_rule(&p("w A n t"), &p("w A n t @ d")), &word_rule(&p("s t A r t"), &p("s t A r t @ d"))).unwrap();
        assert_eq!(g.left, LeftContext::Variable(p("t")));
        assert_eq!(g.right, RightContext::closed(p("")));
        assert!(g.matches(&p("b I t")) && !g.matches(&p("b I d")));
    }

    #[test]
    fn breed_and_read_share_r_before_the_change() {
        let g = generalize(&word_rule(&p("b r i: d"), &p("b r E d")), &word_rule(&p("r i: d"), &p("r E d"))).unwrap();
        assert_eq!(g.left, LeftContext::Variable(p("r")));
        assert_eq!(g.right, RightContext::closed(p("d")));
        assert_eq!(g.apply(&p("s p r i: d")), vec![p("s p r E d")]);
    }

    #[test]
    fn generalize_is_idempotent_and_needs_equal_changes() {
        let r = word_rule(&p("r i: d"), &p("r E d"));
        let g = generalize(&r, &r).unwrap();
        assert_eq!(g.key(), r.key());
        assert!(generalize(&r, &word_rule(&p("w A n t"), &p("w A n t @ d"))).is_none());
    }

    #[test]
    fn three_t_final_verbs_give_a_general_rule_below_certainty() {
        let corpus = [reg("w A n t", "w A n t @ d"), reg("s t A r t", "s t A r t @ d"), reg("n i: d", "n i: d @ d")];
        let g = induce_grammar(&corpus);
        let general = g
            .find(&Change { from: p(""), to: p("@ d") }, &LeftContext::Variable(p("")), &RightContext::closed(p("")))
            .unwrap();
        assert_eq!((general.scope, general.hits), (3, 3));
        // Hand-evaluated Wilson bound: 1 / (1 + z²/3).
        assert!((general.confidence - 1.0 / (1.0 + Z_75 * Z_75 / 3.0)).abs() < 1e-12);
        assert!(general.confidence < 1.0);
        let t_rule = g
            .find(&Change { from: p(""), to: p("@ d") }, &LeftContext::Variable(p("t")), &RightContext::closed(p("")))
            .unwrap();
        assert_eq!((t_rule.scope, t_rule.hits), (2, 2));
    }

    #[test]
    fn single_verb_gives_one_rule() {
        let g = induce_grammar(&[reg("w A n t", "w A n t @ d")]);
        assert_eq!(g.rules.len(), 1);
        assert_eq!((g.rules[0].scope, g.rules[0].hits), (1, 1));
    }

    #[test]
    fn doublets_give_two_changes_sharing_scope() {
        let corpus = [
            VerbEntry::new("spring", "s p r I N", "s p r { N", VerbClass::Irregular),
            VerbEntry::new("spring", "s p r I N", "s p r V N", VerbClass::Irregular),
        ];
        let g = induce_grammar(&corpus);
        assert_eq!(g.rules.len(), 2);
        assert_ne!(g.rules[0].change, g.rules[1].change);
        assert!(g.rules.iter().all(|r| r.scope == 1 && r.hits == 1));
    }

    #[test]
    fn unproducible_candidate_scores_zero() {
        let g = induce_grammar(&[reg("w A n t", "w A n t @ d")]);
        assert_eq!(g.score_form(&p("w A n t"), &p("w E n t")), 0.0);
        assert_eq!(g.score_form(&p("w A n t"), &p("w A n t @ d")), g.rules[0].confidence);
    }

    #[test]
    fn island_nonce_gets_both_scores() {
        let corpus = [
            VerbEntry::new("sting", "s t I N", "s t V N", VerbClass::Irregular),
            VerbEntry::new("cling", "k l I N", "k l V N", VerbClass::Irregular),
            VerbEntry::new("fling", "f l I N", "f l V N", VerbClass::Irregular),
            reg("b l I N k", "b l I N k t"),
            reg("h { N", "h { N d"),
            reg("p l eI", "p l eI d"),
        ];
        let g = induce_grammar(&corpus);
        let irr = g.score_form(&p("s p l I N"), &p("s p l V N"));
        let regular = g.score_form(&p("s p l I N"), &p("s p l I N d"));
        assert!(irr > 0.0 && regular > 0.0, "{irr} {regular}");
    }

    #[test]
    fn table_lists_every_rule() {
        let g = induce_grammar(&[reg("w A n t", "w A n t @ d"), reg("s t A r t", "s t A r t @ d")]);
        let t = g.to_table();
        assert_eq!(t.lines().count(), 1 + g.rules.len());
        assert!(t.contains("X t"));
    }

    fn word() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "i", "t", "d", "k", "n"]).prop_map(String::from), 1..5)
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<VerbEntry>> {
        prop::collection::vec(
            (word(), prop::sample::select(vec!["suffix", "vowel", "same"])).prop_map(|(w, kind)| {
                let present = PhonemeSeq::new(w.clone());
                let past = match kind {
                    "suffix" => present.concat(&p("d")),
                    "vowel" => PhonemeSeq::new(w.iter().map(|t| if t == "i" { "a".into() } else { t.clone() }).collect()),
                    _ => present.clone(),
                };
                VerbEntry::new("x", &present.to_string(), &past.to_string(), VerbClass::Regular)
            }),
            1..8,
        )
    }

    proptest! {
        #[test]
        fn rule_invariants(corpus in corpus_strategy()) {
            let g = induce_grammar(&corpus);
            let mut keys = BTreeSet::new();
            for r in &g.rules {
                prop_assert!(keys.insert(r.key()));
                prop_assert!(r.scope >= 1 && r.hits <= r.scope);
                prop_assert!(r.confidence <= r.reliability() + 1e-15);
                prop_assert!(r.confidence >= 0.0);
                // Every hit is reproduced by applying the rule.
                let hits = corpus.iter()
                    .filter(|e| r.produces(&e.present, &e.past))
                    .map(|e| &e.present)
                    .collect::<BTreeSet<_>>()
                    .len();
                prop_assert_eq!(hits, r.hits);
            }
        }

        #[test]
        fn induction_ignores_corpus_order(corpus in corpus_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = corpus.clone();
            shuffled.shuffle(&mut crate::numerics::rng::seeded(seed));
            prop_assert_eq!(induce_grammar(&corpus), induce_grammar(&shuffled));
        }

        #[test]
        fn confidence_grows_with_agreeing_evidence(hits in 0usize..50, extra in 0usize..50) {
            let scope = hits + extra + 1;
            prop_assert!(confidence(hits + 1, scope + 1) >= confidence(hits, scope));
            prop_assert!(confidence(hits, scope) <= hits as f64 / scope as f64);
        }
    }
}
