//! Keyword extraction from natural-language queries.

use std::collections::HashSet;
use std::time::Duration;

use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_KEYWORDS: usize = 5;

pub const ENV_URL: &str = "HIPPO_EXTRACTOR_URL";
pub const ENV_MODEL: &str = "HIPPO_EXTRACTOR_MODEL";
pub const ENV_API_KEY: &str = "HIPPO_EXTRACTOR_API_KEY";

pub trait KeywordExtractor: Send + Sync {
    /// Up to the extractor's limit of keywords, in order of importance.
    /// An empty list is a valid answer (for example, all stopwords).
    fn extract(&self, query: &str) -> Result<Vec<String>>;
}

// English stopwords (the common NLTK list).
const STOPWORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
    "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
    "wouldn't",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

/// Lowercases, treats punctuation as separators, drops stopwords and
/// duplicates, and keeps the first `max_keywords` words in query order.
#[derive(Clone, Debug)]
pub struct StopwordExtractor {
    pub max_keywords: usize,
}

impl Default for StopwordExtractor {
    fn default() -> Self {
        Self {
            max_keywords: DEFAULT_MAX_KEYWORDS,
        }
    }
}

impl StopwordExtractor {
    fn keywords(&self, query: &str) -> Vec<String> {
        let lowered = query.to_lowercase();
        let mut seen = HashSet::new();
        lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty() && !is_stopword(w))
            .filter(|w| seen.insert(*w))
            .take(self.max_keywords)
            .map(str::to_owned)
            .collect()
    }
}

impl KeywordExtractor for StopwordExtractor {
    fn extract(&self, query: &str) -> Result<Vec<String>> {
        if query.trim().is_empty() {
            return Err(Error::invalid("empty query"));
        }
        Ok(self.keywords(query))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatCompletionConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_keywords: usize,
    pub timeout: Duration,
}

impl ChatCompletionConfig {
    /// Reads the endpoint, model and key from the environment. `None` when
    /// no endpoint is configured.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(ENV_URL).ok().filter(|s| !s.is_empty())?;
        Some(Self {
            endpoint,
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-4o-mini".into()),
            api_key: std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty()),
            max_keywords: DEFAULT_MAX_KEYWORDS,
            timeout: Duration::from_secs(5),
        })
    }
}

/// Asks an OpenAI-compatible chat-completion endpoint for keywords. Any
/// transport or parse failure is logged and answered by the stopword
/// extractor instead.
#[derive(Debug)]
pub struct ChatCompletionExtractor {
    config: ChatCompletionConfig,
    agent: ureq::Agent,
    fallback: StopwordExtractor,
}

impl ChatCompletionExtractor {
    pub fn new(config: ChatCompletionConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let fallback = StopwordExtractor {
            max_keywords: config.max_keywords,
        };
        Self {
            config,
            agent,
            fallback,
        }
    }

    fn request(&self, query: &str) -> std::result::Result<Vec<String>, String> {
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {
                    "role": "system",
                    "content": format!(
                        "Extract up to {} salient keywords from the user's question. \
                         Reply with the keywords only, comma-separated.",
                        self.config.max_keywords
                    ),
                },
                { "role": "user", "content": query },
            ],
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let reply: Value = req
            .send_json(&body)
            .map_err(|e| e.to_string())?
            .body_mut()
            .read_json()
            .map_err(|e| e.to_string())?;
        let content = reply["choices"][0]["message"]["content"]
            .as_str()
            .ok_or("reply has no message content")?;
        let keywords = parse_keyword_list(content, self.config.max_keywords);
        if keywords.is_empty() {
            return Err(format!("no keywords in reply {content:?}"));
        }
        Ok(keywords)
    }
}

impl KeywordExtractor for ChatCompletionExtractor {
    fn extract(&self, query: &str) -> Result<Vec<String>> {
        if query.trim().is_empty() {
            return Err(Error::invalid("empty query"));
        }
        match self.request(query) {
            Ok(keywords) => Ok(keywords),
            Err(e) => {
                log::warn!("keyword endpoint failed, using stopword extractor: {e}");
                self.fallback.extract(query)
            }
        }
    }
}

/// Splits a comma- or newline-separated reply into normalized keywords.
pub fn parse_keyword_list(reply: &str, max: usize) -> Vec<String> {
    let mut seen = HashSet::new();
    reply
        .split([',', '\n'])
        .map(|k| k.trim().trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|k| !k.is_empty())
        .filter(|k| seen.insert(k.clone()))
        .take(max)
        .collect()
}
