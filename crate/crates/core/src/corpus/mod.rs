//! Parallel records, corpus files, bookkeeping operations and the synthetic
//! corpus generator.

pub mod io;
pub mod ops;
pub mod record;
pub mod synthetic;

pub use io::{read_corpus, write_jsonl, CorpusFormat, ReadReport};
pub use ops::{check_disjoint, count_by_direction, dedup_exact, downsample, reverse_directions, CorpusManifest, SplitSpec, StageCounts};
pub use record::{NoiseFlag, ParallelRecord};
pub use synthetic::{generate_synthetic_corpus, seed_sentences, Cipher, NoiseRates, SyntheticCorpus, ToyLanguageSpec};
