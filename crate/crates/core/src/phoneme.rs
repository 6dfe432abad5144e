//! Phoneme sequences. A phoneme is a whitespace-free token; stress marks and
//! length marks stay attached, so `"oU` and `oU` are different tokens.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct PhonemeSeq(Vec<String>);

impl PhonemeSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens.iter().all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
        Self(tokens)
    }

    /// Split on whitespace.
    pub fn parse(s: &str) -> Self {
        Self(s.split_whitespace().map(str::to_string).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn last(&self) -> Option<&str> {
        self.0.last().map(String::as_str)
    }

    pub fn first(&self) -> Option<&str> {
        self.0.first().map(String::as_str)
    }

    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().cloned().collect())
    }

    pub fn concat(&self, other: &PhonemeSeq) -> Self {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Self(v)
    }

    pub fn ends_with(&self, suffix: &[String]) -> bool {
        self.0.ends_with(suffix)
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }
}

impl FromStr for PhonemeSeq {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self::parse(s))
    }
}

impl fmt::Display for PhonemeSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join(" "))
    }
}

impl From<&str> for PhonemeSeq {
    fn from(s: &str) -> Self {
        Self::parse(s)
    }
}

impl From<Vec<String>> for PhonemeSeq {
    fn from(v: Vec<String>) -> Self {
        Self::new(v)
    }
}

impl<'a> FromIterator<&'a str> for PhonemeSeq {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        Self(iter.into_iter().map(str::to_string).collect())
    }
}

/// Regular past-tense allomorph class of a stem-final phoneme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuffixClass {
    /// /t/, /d/: takes /-Id/.
    CoronalStop,
    /// Takes /-d/.
    Voiced,
    /// Takes /-t/.
    Voiceless,
    Unclassified,
}

impl SuffixClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SuffixClass::CoronalStop => "coronal-stop",
            SuffixClass::Voiced => "voiced",
            SuffixClass::Voiceless => "voiceless",
            SuffixClass::Unclassified => "unclassified",
        }
    }

    /// The regular suffix this class selects, in the table's SAMPA spelling.
    pub fn suffix(self) -> Option<&'static [&'static str]> {
        match self {
            SuffixClass::CoronalStop => Some(&["I", "d"]),
            SuffixClass::Voiced => Some(&["d"]),
            SuffixClass::Voiceless => Some(&["t"]),
            SuffixClass::Unclassified => None,
        }
    }
}

impl fmt::Display for SuffixClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuffixClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "coronal-stop" => Ok(SuffixClass::CoronalStop),
            "voiced" => Ok(SuffixClass::Voiced),
            "voiceless" => Ok(SuffixClass::Voiceless),
            "unclassified" => Ok(SuffixClass::Unclassified),
            other => Err(format!("unknown suffix class {other:?}")),
        }
    }
}

const BUNDLED_SUFFIX_TABLE: &str = include_str!("../data/suffix_classes.tsv");
const STRESS_MARKS: &[char] = &['"', '\'', '%', 'ˈ', 'ˌ'];

/// Phoneme → suffix class lookup. Stress marks are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixTable {
    classes: std::collections::HashMap<String, SuffixClass>,
}

impl SuffixTable {
    /// `token <TAB> class` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut classes = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(tok), Some(class), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(format!("line {}: expected `token<TAB>class`", i + 1));
            };
            let class: SuffixClass = class.trim().parse().map_err(|e| format!("line {}: {e}", i + 1))?;
            if classes.insert(strip_stress(tok.trim()).to_string(), class).is_some() {
                return Err(format!("line {}: duplicate token {tok:?}", i + 1));
            }
        }
        Ok(Self { classes })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SUFFIX_TABLE).expect("bundled suffix table parses")
    }

    pub fn class(&self, phoneme: &str) -> SuffixClass {
        self.classes.get(strip_stress(phoneme)).copied().unwrap_or(SuffixClass::Unclassified)
    }

    /// Regular past of `present` under the allomorph rule, if its last phoneme is classified.
    pub fn regular_past(&self, present: &PhonemeSeq) -> Option<PhonemeSeq> {
        let suffix = self.class(present.last()?).suffix()?;
        Some(present.concat(&suffix.iter().copied().collect()))
    }
}

pub fn strip_stress(token: &str) -> &str {
    token.trim_start_matches(STRESS_MARKS)
}
