//! Training corpus: one verb per line,
//!
//! ```text
//! orthography <TAB> present phonemes <TAB> past phonemes <TAB> regular|irregular [<TAB> frequency]
//! ```
//!
//! Phonemes are space-separated. Blank lines and lines starting with `#` are
//! skipped.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::phoneme::PhonemeSeq;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerbClass {
    Regular,
    Irregular,
}

impl fmt::Display for VerbClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerbClass::Regular => "regular",
            VerbClass::Irregular => "irregular",
        })
    }
}

impl FromStr for VerbClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regular" | "reg" => Ok(VerbClass::Regular),
            "irregular" | "irr" => Ok(VerbClass::Irregular),
            other => Err(format!("unknown verb class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VerbEntry {
    pub lemma: String,
    pub present: PhonemeSeq,
    pub past: PhonemeSeq,
    pub class: VerbClass,
    pub frequency: Option<u64>,
}

impl VerbEntry {
    pub fn new(lemma: &str, present: &str, past: &str, class: VerbClass) -> Self {
        Self {
            lemma: lemma.to_string(),
            present: PhonemeSeq::parse(present),
            past: PhonemeSeq::parse(past),
            class,
            frequency: None,
        }
    }

    /// Same verb with both forms reversed phoneme by phoneme.
    pub fn reversed(&self) -> Self {
        Self { present: self.present.reversed(), past: self.past.reversed(), ..self.clone() }
    }
}

/// How corpus frequencies turn into training multiplicities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FreqMode {
    /// Each distinct (present, past) type once.
    #[default]
    Type,
    /// Each entry repeated by its token frequency.
    Token,
    /// Each entry repeated `max(1, round(ln f))` times.
    LogToken,
}

impl FromStr for FreqMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "type" => Ok(FreqMode::Type),
            "token" => Ok(FreqMode::Token),
            "log-token" => Ok(FreqMode::LogToken),
            other => Err(format!("unknown frequency mode {other:?} (expected type, token or log-token)")),
        }
    }
}

impl fmt::Display for FreqMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreqMode::Type => "type",
            FreqMode::Token => "token",
            FreqMode::LogToken => "log-token",
        })
    }
}

pub fn multiplicity(frequency: Option<u64>, mode: FreqMode) -> usize {
    let f = frequency.unwrap_or(1).max(1);
    match mode {
        FreqMode::Type => 1,
        FreqMode::Token => f as usize,
        FreqMode::LogToken => ((f as f64).ln().round() as usize).max(1),
    }
}

/// Entries repeated by their multiplicity, in corpus order.
pub fn epoch_stream(entries: &[VerbEntry], mode: FreqMode) -> Vec<VerbEntry> {
    entries
        .iter()
        .flat_map(|e| std::iter::repeat_n(e.clone(), multiplicity(e.frequency, mode)))
        .collect()
}

pub fn parse_corpus(text: &str, mode: FreqMode) -> Result<Vec<VerbEntry>, DataError> {
    let mut out = Vec::new();
    let mut seen: HashSet<(PhonemeSeq, PhonemeSeq)> = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| DataError::Parse { line: line_no, message: msg };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(4..=5).contains(&fields.len()) {
            return Err(bad(format!("expected 4 or 5 tab-separated fields, found {}", fields.len())));
        }
        let present = PhonemeSeq::parse(fields[1]);
        let past = PhonemeSeq::parse(fields[2]);
        if fields[0].trim().is_empty() {
            return Err(bad("empty orthography".into()));
        }
        if present.is_empty() || past.is_empty() {
            return Err(bad("present and past must both contain phonemes".into()));
        }
        let class: VerbClass = fields[3].trim().parse().map_err(bad)?;
        let frequency = match fields.get(4).map(|s| s.trim()) {
            None | Some("") => None,
            Some(s) => {
                let f: u64 = s.parse().map_err(|_| bad(format!("frequency {s:?} is not a positive integer")))?;
                if f == 0 {
                    return Err(bad("frequency must be at least 1".into()));
                }
                Some(f)
            }
        };
        if mode == FreqMode::Type && !seen.insert((present.clone(), past.clone())) {
            continue;
        }
        out.push(VerbEntry { lemma: fields[0].trim().to_string(), present, past, class, frequency });
    }
    Ok(out)
}

pub fn load_corpus(path: &Path, mode: FreqMode) -> Result<Vec<VerbEntry>, DataError> {
    let text = super::read_text(path)?;
    parse_corpus(&text, mode)
}

pub fn format_corpus(entries: &[VerbEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        s.push_str(&format!("{}\t{}\t{}\t{}", e.lemma, e.present, e.past, e.class));
        if let Some(f) = e.frequency {
            s.push_str(&format!("\t{f}"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "want\tw \"A n t\tw \"A n t @ d\tregular\nsing\ts \"I N\ts \"{ N\tirregular\t120\n";

    #[test]
    fn two_valid_lines() {
        let c = parse_corpus(TWO, FreqMode::Type).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].frequency, Some(120));
        assert_eq!(c[1].class, VerbClass::Irregular);
    }

    #[test]
    fn duplicate_types_collapse_only_in_type_mode() {
        let text = format!("{TWO}want\tw \"A n t\tw \"A n t @ d\tregular\n");
        assert_eq!(parse_corpus(&text, FreqMode::Type).unwrap().len(), 2);
        assert_eq!(parse_corpus(&text, FreqMode::Token).unwrap().len(), 3);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{TWO}\nbroken line without tabs\n");
        match parse_corpus(&text, FreqMode::Type) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_class_is_rejected() {
        let err = parse_corpus("x\ta\tb\tstrong\n", FreqMode::Type).unwrap_err();
        assert!(err.to_string().contains("strong"));
    }

    #[test]
    fn log_token_multiplicity() {
        assert_eq!(multiplicity(Some(100), FreqMode::LogToken), 5);
        assert_eq!(multiplicity(Some(1), FreqMode::LogToken), 1);
        assert_eq!(multiplicity(Some(2), FreqMode::LogToken), 1);
        assert_eq!(multiplicity(Some(100), FreqMode::Token), 100);
        assert_eq!(multiplicity(Some(100), FreqMode::Type), 1);
        let e = VerbEntry { frequency: Some(100), ..VerbEntry::new("a", "a", "a d", VerbClass::Regular) };
        assert_eq!(epoch_stream(&[e], FreqMode::LogToken).len(), 5);
    }

    #[test]
    fn zero_frequency_is_rejected() {
        assert!(parse_corpus("x\ta\tb\tregular\t0\n", FreqMode::Token).is_err());
    }
}
