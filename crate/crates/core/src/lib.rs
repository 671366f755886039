//! Append-only memory for conversational agents. Entries are stored twice
//! over the same token positions: token ids in a content wavelet matrix and
//! per-token context signatures in a signature wavelet matrix. Queries
//! filter signatures by Hamming distance, locate occurrences with
//! rank/select, and read matching entries back exactly.

pub mod bitvec;
pub mod dwm;
pub mod error;
pub mod metrics;
pub mod persist;
pub mod retrieval;
pub mod signatures;
pub mod store;
pub mod verify;

pub use bitvec::DynamicBitVector;
pub use dwm::{DynamicWaveletMatrix, Symbol};
pub use error::{Error, Result};
pub use retrieval::{query, search, QueryParams, QueryPlan, RetrievedResult};
pub use signatures::{hamming, ModelParams, RandomIndexModel, Signature, SignatureMode};
pub use store::{EntryMetadata, MemoryStore, SharedStore, StoreConfig};
