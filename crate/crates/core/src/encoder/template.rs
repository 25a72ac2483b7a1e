use crate::error::{Error, Result};

use super::vocab::MASK_TOKEN;

pub const SENTENCE_SLOT: &str = "[sentence]";

/// Prompt pattern with exactly one `[MASK]` and one `[sentence]` placeholder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pattern: String,
}

impl PromptTemplate {
    pub fn new(pattern: impl Into<String>) -> Result<Self> {
        let pattern = pattern.into();
        let masks = pattern.matches(MASK_TOKEN).count();
        let slots = pattern.matches(SENTENCE_SLOT).count();
        if masks != 1 || slots != 1 {
            return Err(Error::Config(format!(
                "template needs exactly one {MASK_TOKEN} and one {SENTENCE_SLOT}, \
                 found {masks} and {slots} in {pattern:?}"
            )));
        }
        Ok(PromptTemplate { pattern })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    /// Substitutes `text` for `[sentence]`; `[MASK]` is left for the tokenizer.
    pub fn apply(&self, text: &str) -> String {
        self.pattern.replacen(SENTENCE_SLOT, text, 1)
    }

    /// The template text with the sentence slot removed.
    pub fn fixed_text(&self) -> String {
        self.apply("")
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new("This is a [MASK] news: [sentence]").expect("valid default")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn news_template() {
        let t = PromptTemplate::new("This is a [MASK] news: [sentence]").unwrap();
        assert_eq!(t.apply("x"), "This is a [MASK] news: x");
    }

    #[test]
    fn trailing_mask_template() {
        let t = PromptTemplate::new("[sentence] This topic is about [MASK].").unwrap();
        assert_eq!(t.apply("y"), "y This topic is about [MASK].");
    }

    #[test]
    fn empty_text() {
        let t = PromptTemplate::default();
        assert_eq!(t.apply(""), "This is a [MASK] news: ");
    }

    #[test]
    fn placeholder_counts_enforced() {
        assert!(PromptTemplate::new("no slots").is_err());
        assert!(PromptTemplate::new("[MASK] [MASK] [sentence]").is_err());
        assert!(PromptTemplate::new("[MASK] [sentence] [sentence]").is_err());
        assert!(PromptTemplate::new("[sentence]").is_err());
    }

    #[test]
    fn sentence_containing_placeholder_is_literal() {
        let t = PromptTemplate::default();
        assert_eq!(t.apply("[sentence]"), "This is a [MASK] news: [sentence]");
    }
}
