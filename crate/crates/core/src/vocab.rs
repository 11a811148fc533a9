use std::collections::HashMap;

use crate::error::{Error, Result};

pub type TokenId = usize;

/// Word-level vocabulary; a token's id is its position in the list.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    unk_id: Option<TokenId>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::Vocabulary(format!("duplicate token \"{tok}\"")));
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            unk_id: None,
        })
    }

    /// Declares `token` as the unknown-word token. It must already be present.
    pub fn with_unk(mut self, token: &str) -> Result<Self> {
        let id = self
            .id(token)
            .ok_or_else(|| Error::Vocabulary(format!("unk token \"{token}\" not in vocabulary")))?;
        self.unk_id = Some(id);
        Ok(self)
    }

    /// Parses a vocabulary file: UTF-8, one token per line, line number = id.
    pub fn from_lines(text: &str) -> Result<Self> {
        let tokens = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
            .collect();
        Self::new(tokens)
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for tok in &self.tokens {
            out.push_str(tok);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn unk_id(&self) -> Option<TokenId> {
        self.unk_id
    }

    /// Maps whitespace-separated text to ids. Unknown words are an error unless
    /// `map_unknown` is set and the vocabulary declares an unk token.
    pub fn encode(&self, text: &str, map_unknown: bool) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|w| match self.id(w) {
                Some(id) => Ok(id),
                None => match (map_unknown, self.unk_id) {
                    (true, Some(unk)) => Ok(unk),
                    _ => Err(Error::OutOfVocabulary(w.to_string())),
                },
            })
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or("<?>").to_string())
            .collect()
    }
}
