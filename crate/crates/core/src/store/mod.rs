//! Persistence and dataset plumbing: JSONL record streams with schema
//! validation and atomic writes, the on-disk record schemas shared by every
//! pipeline phase, dataset statistics, training-manifest assembly, and the
//! run configuration file.

mod assemble;
mod config;
mod jsonl;
mod schema;
mod stats;

pub use assemble::{assemble, Manifests};
pub use config::{ConfigError, EndpointsConfig, EvalConfig, NarrationConfig, RunConfig};
pub use jsonl::{read_jsonl, write_jsonl, StoreError, Validate};
pub use schema::{
    AnnotationSentence, EmbeddingRecord, ManifestEntry, Modality, NarratedSubclip,
    NarrationArchiveRecord, RejectedSynthesis, VideoMeta,
};
pub use stats::{DatasetStats, Phase1Stats, Phase2Stats, Phase3Stats};
