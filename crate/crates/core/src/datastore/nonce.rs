//! Nonce-word test items with human production data.
//!
//! One item per line, tab-separated:
//!
//! ```text
//! id  present  category  (role[:orthography]  phonemes  production  rating)+  other
//! ```
//!
//! `role` is `reg`, `irr1` or `irr2`; `rating` may be empty or `NA`. Each item
//! has one regular and one or two irregulars, and the production shares plus
//! `other` sum to 1.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::phoneme::PhonemeSeq;

pub const PROBABILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    IorRegular,
    IorBoth,
    IorIrregular,
    IorNeither,
    BurntLike,
    Analogy,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::IorRegular,
        Category::IorBoth,
        Category::IorIrregular,
        Category::IorNeither,
        Category::BurntLike,
        Category::Analogy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::IorRegular => "ior-regular",
            Category::IorBoth => "ior-both",
            Category::IorIrregular => "ior-irregular",
            Category::IorNeither => "ior-neither",
            Category::BurntLike => "burnt-like",
            Category::Analogy => "analogy",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| format!("unknown nonce category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormRole {
    Regular,
    Irregular1,
    Irregular2,
}

impl FormRole {
    pub fn as_str(self) -> &'static str {
        match self {
            FormRole::Regular => "reg",
            FormRole::Irregular1 => "irr1",
            FormRole::Irregular2 => "irr2",
        }
    }

    pub fn is_regular(self) -> bool {
        self == FormRole::Regular
    }
}

impl fmt::Display for FormRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reg" => Ok(FormRole::Regular),
            "irr1" => Ok(FormRole::Irregular1),
            "irr2" => Ok(FormRole::Irregular2),
            other => Err(format!("unknown form role {other:?} (expected reg, irr1 or irr2)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestedForm {
    pub role: FormRole,
    pub orthography: Option<String>,
    pub phonemes: PhonemeSeq,
    /// Share of human participants producing this form.
    pub production: f64,
    /// Mean human acceptability rating.
    pub rating: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonceItem {
    pub id: String,
    pub present: PhonemeSeq,
    pub category: Category,
    /// Regular first, then irregulars in role order.
    pub forms: Vec<SuggestedForm>,
    /// Human share of responses matching no suggested form.
    pub other: f64,
}

impl NonceItem {
    pub fn regular(&self) -> &SuggestedForm {
        self.forms.iter().find(|f| f.role.is_regular()).expect("validated item has a regular form")
    }

    pub fn irregulars(&self) -> impl Iterator<Item = &SuggestedForm> {
        self.forms.iter().filter(|f| !f.role.is_regular())
    }

    pub fn form(&self, role: FormRole) -> Option<&SuggestedForm> {
        self.forms.iter().find(|f| f.role == role)
    }

    /// Enforce the item invariants: one regular, one or two irregulars with
    /// `irr1` present, distinct forms, shares in [0, 1] summing to 1.
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::Validation { item: self.id.clone(), message: m });
        if self.present.is_empty() {
            return bad("empty present form".into());
        }
        let regs = self.forms.iter().filter(|f| f.role.is_regular()).count();
        if regs != 1 {
            return bad(format!("expected exactly one regular form, found {regs}"));
        }
        let irrs = self.forms.len() - 1;
        if !(1..=2).contains(&irrs) || self.form(FormRole::Irregular1).is_none() {
            return bad(format!("expected irr1 and optionally irr2, found {irrs} irregular forms"));
        }
        let roles: HashSet<FormRole> = self.forms.iter().map(|f| f.role).collect();
        if roles.len() != self.forms.len() {
            return bad("repeated form role".into());
        }
        let phon: HashSet<&PhonemeSeq> = self.forms.iter().map(|f| &f.phonemes).collect();
        if phon.len() != self.forms.len() || self.forms.iter().any(|f| f.phonemes.is_empty()) {
            return bad("suggested forms must be non-empty and distinct".into());
        }
        let shares = self.forms.iter().map(|f| f.production).chain([self.other]);
        if shares.clone().any(|p| !(0.0..=1.0).contains(&p)) {
            return bad("production shares must lie in [0, 1]".into());
        }
        let total: f64 = shares.sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return bad(format!("production shares sum to {total}, not 1"));
        }
        if self.forms.iter().any(|f| f.rating.is_some_and(|r| !r.is_finite())) {
            return bad("non-finite rating".into());
        }
        Ok(())
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<NonceItem, DataError> {
    let bad = |m: String| DataError::Parse { line: line_no, message: m };
    let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
    if fields.len() < 8 || !(fields.len() - 4).is_multiple_of(4) {
        return Err(bad(format!(
            "expected id, present, category, 4 fields per suggested form and a trailing other share; found {} fields",
            fields.len()
        )));
    }
    let id = fields[0].to_string();
    if id.is_empty() {
        return Err(bad("empty item id".into()));
    }
    let present = PhonemeSeq::parse(fields[1]);
    let category: Category = fields[2].parse().map_err(|e: String| bad(format!("item {id}: {e}")))?;
    let prob = |s: &str, what: &str| -> Result<f64, DataError> {
        s.parse::<f64>().map_err(|_| bad(format!("item {id}: {what} {s:?} is not a number")))
    };
    let mut forms = Vec::new();
    for block in fields[3..fields.len() - 1].chunks(4) {
        let (role, orthography) = match block[0].split_once(':') {
            Some((r, o)) => (r, Some(o.to_string())),
            None => (block[0], None),
        };
        let role: FormRole = role.parse().map_err(|e: String| bad(format!("item {id}: {e}")))?;
        let rating = match block[3] {
            "" | "NA" => None,
            s => Some(prob(s, "rating")?),
        };
        forms.push(SuggestedForm {
            role,
            orthography,
            phonemes: PhonemeSeq::parse(block[1]),
            production: prob(block[2], "production share")?,
            rating,
        });
    }
    forms.sort_by_key(|f| f.role);
    let other = prob(fields[fields.len() - 1], "other share")?;
    let item = NonceItem { id, present, category, forms, other };
    item.validate()?;
    Ok(item)
}

pub fn parse_nonce(text: &str) -> Result<Vec<NonceItem>, DataError> {
    let mut items = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let item = parse_line(line, i + 1)?;
        if !ids.insert(item.id.clone()) {
            return Err(DataError::Validation { item: item.id, message: "duplicate item id".into() });
        }
        items.push(item);
    }
    Ok(items)
}

pub fn load_nonce(path: &Path) -> Result<Vec<NonceItem>, DataError> {
    parse_nonce(&super::read_text(path)?)
}

pub fn format_nonce(items: &[NonceItem]) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&format!("{}\t{}\t{}", it.id, it.present, it.category));
        for f in &it.forms {
            let role = match &f.orthography {
                Some(o) => format!("{}:{o}", f.role),
                None => f.role.to_string(),
            };
            let rating = f.rating.map_or_else(|| "NA".to_string(), |r| r.to_string());
            s.push_str(&format!("\t{role}\t{}\t{}\t{rating}", f.phonemes, f.production));
        }
        s.push_str(&format!("\t{}\n", it.other));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCRIDE: &str = "scride\ts k r \"aI d\tior-both\treg:scrided\ts k r \"aI d I d\t0.6\t5.1\tirr1:scrode\ts k r \"oU d\t0.25\t4.2\tirr2:scrid\ts k r \"I d\t0.1\tNA\t0.05\n";

    #[test]
    fn scride_has_one_regular_and_two_irregulars() {
        let items = parse_nonce(SCRIDE).unwrap();
        assert_eq!(items.len(), 1);
        let it = &items[0];
        assert_eq!(it.regular().orthography.as_deref(), Some("scrided"));
        assert_eq!(it.irregulars().count(), 2);
        assert_eq!(it.form(FormRole::Irregular2).unwrap().rating, None);
        assert_eq!(it.category, Category::IorBoth);
    }

    #[test]
    fn shares_summing_to_point_eight_are_rejected() {
        let text = SCRIDE.replace("\t0.05\n", "\t0.0\n").replace("\t0.6\t", "\t0.45\t");
        match parse_nonce(&text) {
            Err(DataError::Validation { item, message }) => {
                assert_eq!(item, "scride");
                assert!(message.contains("sum"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_regulars_are_rejected() {
        let text = SCRIDE.replace("irr2:scrid", "reg:scrid");
        assert!(parse_nonce(&text).is_err());
    }

    #[test]
    fn format_round_trips() {
        let items = parse_nonce(SCRIDE).unwrap();
        assert_eq!(parse_nonce(&format_nonce(&items)).unwrap(), items);
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let text = format!("# header\n{SCRIDE}x\ta\tanalogy\treg\n");
        match parse_nonce(&text) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
