//! Incremental embedding of temporal graphs: per-snapshot random-walk
//! skip-gram embeddings aligned by ridge calibration on reference nodes and
//! merged by a convex combination whose weights are estimated from
//! link-prediction evidence.

pub mod calibration;
pub mod combiner;
pub mod embedding;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod graph;
pub mod pipeline;
pub mod rng;
pub mod skipgram;
pub mod synth;
pub mod walks;

pub use calibration::{CalibrationMap, ReferenceSet};
pub use combiner::{AlphaVector, CombinedEmbedding};
pub use embedding::{EmbeddingMatrix, NodeVectors};
pub use error::{IcmenError, Result};
pub use estimator::{AlphaGrid, ClassCounts, DirichletPrior, PriorStrategy};
pub use evaluation::{ClassifierConfig, ClassifierModel, EdgeSet, LinkTask};
pub use graph::{FormatSpec, NodeId, NodeRegistry, Snapshot, SnapshotMode, TemporalEdge, TemporalEdgeList};
pub use pipeline::{AlphaStrategy, BaseMethod, Dataset, RunConfig};
pub use skipgram::{TrainConfig, TrainMode};
pub use walks::{WalkConfig, WalkCorpus};
