use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

use super::tokenizer::Tokenizer;

/// Bijection between token strings and dense integer ids `[0, len)`,
/// bounded by a fixed capacity sigma.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    capacity: usize,
}

impl Vocabulary {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 || capacity > 1 << 32 {
            return Err(Error::invalid(format!(
                "vocabulary capacity must be in 1..=2^32, got {capacity}"
            )));
        }
        Ok(Self {
            ids: HashMap::new(),
            tokens: Vec::new(),
            capacity,
        })
    }

    /// Rebuilds a vocabulary from tokens listed in id order.
    pub fn from_tokens(capacity: usize, tokens: Vec<String>) -> Result<Self> {
        let mut vocab = Self::new(capacity)?;
        if tokens.len() > capacity {
            return Err(Error::Capacity {
                capacity,
                required: tokens.len(),
            });
        }
        for (id, tok) in tokens.iter().enumerate() {
            if vocab.ids.insert(tok.clone(), id as u32).is_some() {
                return Err(Error::invalid(format!("duplicate token {tok:?}")));
            }
        }
        vocab.tokens = tokens;
        Ok(vocab)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Bits per id: `ceil(log2 capacity)`, at least 1.
    pub fn width(&self) -> u32 {
        id_width(self.capacity)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps tokens to ids, allocating fresh ids for unseen tokens. Either
    /// every token is mapped or, on overflow, the vocabulary is unchanged.
    pub fn encode<S: AsRef<str>>(&mut self, tokens: &[S]) -> Result<Vec<u32>> {
        let mut fresh: HashSet<&str> = HashSet::new();
        for tok in tokens {
            let tok = tok.as_ref();
            if !self.ids.contains_key(tok) {
                fresh.insert(tok);
            }
        }
        let required = self.tokens.len() + fresh.len();
        if required > self.capacity {
            return Err(Error::Capacity {
                capacity: self.capacity,
                required,
            });
        }
        Ok(tokens
            .iter()
            .map(|tok| {
                let tok = tok.as_ref();
                if let Some(&id) = self.ids.get(tok) {
                    return id;
                }
                let id = self.tokens.len() as u32;
                self.ids.insert(tok.to_owned(), id);
                self.tokens.push(tok.to_owned());
                id
            })
            .collect())
    }

    pub fn tokenize(&mut self, tokenizer: &dyn Tokenizer, text: &str) -> Result<Vec<u32>> {
        self.encode(&tokenizer.tokenize(text))
    }

    pub fn decode(&self, ids: &[u32]) -> Result<Vec<&str>> {
        ids.iter()
            .map(|&id| {
                self.token(id)
                    .ok_or_else(|| Error::out_of_bounds(id as usize, self.tokens.len()))
            })
            .collect()
    }

    pub fn detokenize(&self, tokenizer: &dyn Tokenizer, ids: &[u32]) -> Result<String> {
        Ok(tokenizer.detokenize(&self.decode(ids)?))
    }
}

pub(crate) fn id_width(capacity: usize) -> u32 {
    let bits = usize::BITS - (capacity.max(2) - 1).leading_zeros();
    bits.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::tokenizer::CanonicalTokenizer;

    #[test]
    fn widths() {
        assert_eq!(id_width(1), 1);
        assert_eq!(id_width(2), 1);
        assert_eq!(id_width(3), 2);
        assert_eq!(id_width(256), 8);
        assert_eq!(id_width(257), 9);
        assert_eq!(id_width(65_536), 16);
        assert_eq!(id_width(1 << 32), 32);
    }

    #[test]
    fn tokenize_assigns_dense_ids() {
        let mut v = Vocabulary::new(16).unwrap();
        let t = CanonicalTokenizer;
        assert_eq!(v.tokenize(&t, "Hi!").unwrap(), [0, 1]);
        assert_eq!(v.tokenize(&t, "hi hi ! there").unwrap(), [0, 0, 1, 2]);
        assert_eq!(v.tokenize(&t, "Hi!").unwrap(), [0, 1]);
        assert_eq!(v.detokenize(&t, &[0, 1, 2]).unwrap(), "hi ! there");
        assert_eq!(v.id("there"), Some(2));
        assert!(v.decode(&[3]).is_err());
    }

    #[test]
    fn overflow_leaves_vocabulary_unchanged() {
        let mut v = Vocabulary::new(3).unwrap();
        v.encode(&["a", "b"]).unwrap();
        let before = v.clone();
        let err = v.encode(&["a", "c", "d", "c"]).unwrap_err();
        assert!(matches!(err, Error::Capacity { capacity: 3, required: 4 }));
        assert_eq!(v, before);
        assert_eq!(v.encode(&["c", "c", "a"]).unwrap(), [2, 2, 0]);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn from_tokens_rejects_duplicates() {
        assert!(Vocabulary::from_tokens(4, vec!["a".into(), "a".into()]).is_err());
        assert!(Vocabulary::from_tokens(1, vec!["a".into(), "b".into()]).is_err());
        let v = Vocabulary::from_tokens(4, vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(v.id("b"), Some(1));
    }
}
