//! Editable word lists for the template corpora.
//!
//! A lexicon is a JSON document:
//!
//! ```json
//! {
//!   "determiner": "the",
//!   "initial_determiner": "the",
//!   "noun_pairs": [["boy", "boys"]],
//!   "name_subjects": ["alan"],
//!   "prepositions": ["near"],
//!   "verb_pairs": [["greets", "greet"]],
//!   "gender": {
//!     "male_unambiguous": ["king"], "female_unambiguous": ["queen"],
//!     "male_stereotypical": ["doctor"], "female_stereotypical": ["nurse"],
//!     "linking_verbs": ["likes"], "clause_suffix": [",", "because"],
//!     "pronouns": ["he", "she"]
//!   }
//! }
//! ```
//!
//! `initial_determiner` defaults to `determiner`; `gender` may be omitted when
//! only the agreement corpora are generated.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub determiner: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_determiner: Option<String>,
    #[serde(default)]
    pub noun_pairs: Vec<(String, String)>,
    #[serde(default)]
    pub name_subjects: Vec<String>,
    #[serde(default)]
    pub prepositions: Vec<String>,
    #[serde(default)]
    pub verb_pairs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<GenderLexicon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderLexicon {
    pub male_unambiguous: Vec<String>,
    pub female_unambiguous: Vec<String>,
    pub male_stereotypical: Vec<String>,
    pub female_stereotypical: Vec<String>,
    pub linking_verbs: Vec<String>,
    pub clause_suffix: Vec<String>,
    /// `[male, female]`.
    pub pronouns: (String, String),
}

impl Lexicon {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Lexicon(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn initial_determiner(&self) -> &str {
        self.initial_determiner.as_deref().unwrap_or(&self.determiner)
    }

    pub fn gender(&self) -> Result<&GenderLexicon> {
        self.gender
            .as_ref()
            .ok_or_else(|| Error::Lexicon("lexicon has no gender section".into()))
    }
}

/// Resolves `word` to an id, naming the lexicon entry on failure.
pub(crate) fn lookup(vocab: &Vocabulary, field: &str, word: &str) -> Result<TokenId> {
    vocab.id(word).ok_or_else(|| {
        Error::Lexicon(format!(
            "{field} entry \"{word}\" is not in the model vocabulary"
        ))
    })
}

pub(crate) fn non_empty<T>(field: &str, list: &[T]) -> Result<()> {
    if list.is_empty() {
        Err(Error::Lexicon(format!("{field} is empty")))
    } else {
        Ok(())
    }
}
