//! Multi-view consensus spectral clustering for power-system coherency.
//!
//! Frequency responses recorded at every bus for a set of contingencies
//! ("views") are turned into per-view similarity graphs, embedded
//! spectrally, and fused by an alternating consensus optimizer into a
//! single partition of the buses into coherent regions. A linearized
//! swing-equation simulator generates synthetic multi-contingency
//! datasets with planted areas for validation.
//!
//! The pipeline, end to end:
//!
//! 1. [`dataset`]: load and validate multi-contingency traces.
//! 2. [`affinity`]: Pearson similarity, degree vector, and view matrix
//!    per contingency.
//! 3. [`spectral`]: top-k eigen-embedding, k-means, silhouette, ARI.
//! 4. [`consensus`]: alternating per-view / consensus optimization and
//!    the final labeling.
//! 5. [`gridsim`]: synthetic swing-equation scenario generation.
//! 6. [`pipeline`] and [`report`]: orchestration and CSV/SVG artifacts.

pub mod affinity;
pub mod consensus;
pub mod dataset;
pub mod eigen;
pub mod gridsim;
pub mod pipeline;
pub mod report;
pub mod spectral;

pub use affinity::{SimilarityMatrix, Transform, ViewMatrix, ViewMode};
pub use consensus::{ConsensusOptions, ConsensusResult, ConsensusState};
pub use dataset::{ContingencyRecord, Dataset, FrequencyTrace};
pub use gridsim::{GridModel, GridSpec};
pub use spectral::{Partition, SpectralEmbedding};
