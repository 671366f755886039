//! Transcript documents: JSON with sessions of speaker turns.
//!
//! ```json
//! {"sessions": [{"session_id": "s1", "timestamp": "2024-05-01T09:00:00Z",
//!                "turns": [{"speaker": "alice", "text": "Hi!"}]}]}
//! ```

use anyhow::{bail, Context, Result};
use chrono::DateTime;
use serde::Deserialize;

use hippo_core::store::Tokenizer;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptDocument {
    pub sessions: Vec<Session>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub session_id: String,
    pub timestamp: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub speaker: String,
    pub text: String,
}

/// One turn ready for ingest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnRecord {
    pub session: String,
    pub speaker: String,
    /// Session start in microseconds plus the turn's ordinal.
    pub timestamp: i64,
    pub text: String,
}

/// Parses and validates a transcript. Errors name the line and column for
/// syntax problems and the session and turn for content problems.
pub fn parse(source: &str, tokenizer: &dyn Tokenizer) -> Result<Vec<TurnRecord>> {
    let doc: TranscriptDocument = serde_json::from_str(source).context("transcript does not parse")?;
    let mut out = Vec::new();
    for (s, session) in doc.sessions.iter().enumerate() {
        let start = DateTime::parse_from_rfc3339(&session.timestamp)
            .with_context(|| {
                format!(
                    "sessions[{s}].timestamp: {:?} is not an RFC 3339 timestamp",
                    session.timestamp
                )
            })?
            .timestamp_micros();
        for (t, turn) in session.turns.iter().enumerate() {
            if tokenizer.tokenize(&turn.text).is_empty() {
                bail!("sessions[{s}].turns[{t}].text has no tokens");
            }
            out.push(TurnRecord {
                session: session.session_id.clone(),
                speaker: turn.speaker.clone(),
                timestamp: start + t as i64,
                text: turn.text.clone(),
            });
        }
    }
    Ok(out)
}
