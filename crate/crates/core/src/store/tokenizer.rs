//! Deterministic canonical tokenizer.

/// Splits text into tokens and joins tokens back into canonical text.
///
/// Implementations must be deterministic: the same text always yields the
/// same tokens.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<String>;

    fn detokenize(&self, tokens: &[&str]) -> String;

    /// The text a round trip through this tokenizer reproduces.
    fn canonicalize(&self, text: &str) -> String {
        let tokens = self.tokenize(text);
        let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        self.detokenize(&refs)
    }
}

/// Lowercases, splits on whitespace, and makes every character that is
/// neither alphanumeric nor whitespace a token of its own. Tokens are joined
/// with single spaces, so `"Hi!"` canonicalizes to `"hi !"`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CanonicalTokenizer;

impl Tokenizer for CanonicalTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut word = String::new();
        for c in text.chars() {
            if c.is_alphanumeric() {
                word.extend(c.to_lowercase());
                continue;
            }
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
        tokens
    }

    fn detokenize(&self, tokens: &[&str]) -> String {
        tokens.join(" ")
    }
}
