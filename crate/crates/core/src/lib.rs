//! Encoder-decoder models of English past-tense inflection, trained from
//! scratch and evaluated against wug-test data.
//!
//! `numerics` holds the tape autodiff and optimizer, `inflector` the network
//! and its decoders, `rulebase` the rule baseline, `wugeval`, `aggregate` and
//! `probe` the analyses, `datastore` the file formats, and `harness` the
//! experiment commands behind the CLI.

pub mod aggregate;
pub mod datastore;
pub mod harness;
pub mod inflector;
pub mod numerics;
pub mod phoneme;
pub mod probe;
pub mod rulebase;
pub mod wugeval;
