use std::collections::HashMap;

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const UNK: TokenId = 0;
pub const MASK: TokenId = 1;
pub const UNK_TOKEN: &str = "[UNK]";
pub const MASK_TOKEN: &str = "[MASK]";

/// Bijective token <-> id map with `[UNK]` = 0 and `[MASK]` = 1 reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            ids: HashMap::new(),
        };
        v.insert(UNK_TOKEN);
        v.insert(MASK_TOKEN);
        v
    }

    /// Builds a vocabulary from every word of `texts`, in first-seen order.
    pub fn build<'a, I>(texts: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut v = Vocabulary::new();
        for text in texts {
            for word in tokenize_words(text) {
                v.insert(&word);
            }
        }
        v
    }

    /// Rebuilds a vocabulary from tokens in id order, as stored in a checkpoint.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[0] != UNK_TOKEN || tokens[1] != MASK_TOKEN {
            return Err(Error::Data(
                "vocabulary must start with [UNK] and [MASK]".into(),
            ));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, ids })
    }

    pub fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_owned());
        self.ids.insert(token.to_owned(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Lowercases, splits on whitespace and punctuation, and maps words to ids.
    /// A literal `[MASK]` becomes [`MASK`]; unknown words become [`UNK`].
    pub fn tokenize(&self, text: &str) -> Vec<TokenId> {
        tokenize_words(text)
            .iter()
            .map(|w| self.id(w).unwrap_or(UNK))
            .collect()
    }
}

/// Word-level split used by [`Vocabulary::tokenize`]. `[MASK]` survives intact
/// (case-sensitive); everything else is lowercased alphanumeric runs.
pub fn tokenize_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (i, segment) in text.split(MASK_TOKEN).enumerate() {
        if i > 0 {
            out.push(MASK_TOKEN.to_owned());
        }
        let mut word = String::new();
        for ch in segment.chars() {
            if ch.is_alphanumeric() {
                word.extend(ch.to_lowercase());
            } else if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}
