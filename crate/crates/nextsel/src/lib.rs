//! Next-utterance selection for retrieval-based dialog.
//!
//! Given a partial conversation and a set of candidate responses, the models
//! in this crate rank the candidates by how well each one continues the
//! conversation. The baseline scorer encodes context and candidate with
//! shared BiLSTMs, aligns them with co-attention, and pools the enriched
//! representations into a feed-forward prediction layer. Two extensions are
//! provided:
//!
//! - a knowledge-grounded scorer that attends over an external text snippet
//!   (e.g. command documentation) alongside context and candidate, and
//! - retrieval augmentation that appends the responses of similar training
//!   dialogs to the context before scoring.
//!
//! Supporting machinery includes dataset ingestion, a small reverse-mode
//! autodiff engine, TF-IDF retrieval, candidate reduction and global-pool
//! shortlisting, ranking metrics, a training loop, and a deterministic
//! synthetic-corpus generator used by the test suite and examples.

pub mod autodiff;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod esim;
pub mod harness;
pub mod kesim;
pub mod knowledge;
pub mod tesim;
pub mod tfidf;

pub use error::{Error, Result};

/// The crate-wide deterministic RNG: every seeded code path uses ChaCha8 so
/// results are reproducible across platforms and runs.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a hash used wherever a stable token-to-seed mapping is needed.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
