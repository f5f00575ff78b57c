//! Multi-view consensus optimizer.
//!
//! Each contingency view contributes a structure matrix `L_i` and an
//! orthonormal embedding `U_i`. The joint objective
//!
//! ```text
//!   sum_i tr(U_i^T L_i U_i) + alpha * tr(U_*^T L_* U_*),
//!   L_* = sum_i U_i U_i^T
//! ```
//!
//! is maximized by alternating two closed-form stages: the consensus
//! embedding `U_*` is the top-k eigenbasis of `L_*` (stage A), and each
//! view embedding `U_i` is the top-k eigenbasis of
//! `L_i + alpha * U_* U_*^T` (stage B), since its terms collapse to
//! `tr(U_i^T (L_i + alpha U_* U_*^T) U_i)`. Both stages maximize their
//! block exactly, so the objective at fixed alpha never decreases. The
//! balance parameter alpha is refreshed each iteration from the ratio of
//! per-view to consensus trace mass, unless a fixed override is given.
//!
//! Buses are finally labeled by k-means on the rows of the converged
//! consensus embedding.

use crate::affinity::ViewMatrix;
use crate::spectral::{
    kmeans, top_k_eigvecs, EmbeddingSource, Partition, SpectralEmbedding, SpectralError,
};
use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConsensusError {
    #[error("no views provided")]
    NoViews,

    #[error("view {view} is {found} x {found}, expected {expected} x {expected}")]
    DimensionMismatch {
        view: usize,
        expected: usize,
        found: usize,
    },

    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Options for [`run_consensus`].
#[derive(Debug, Clone, Copy)]
pub struct ConsensusOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Fixed alpha for sensitivity studies; `None` uses the adaptive rule.
    pub alpha_override: Option<f64>,
}

impl Default for ConsensusOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            rel_tol: 1e-6,
            seed: 0,
            alpha_override: None,
        }
    }
}

/// Full state of the alternating optimization.
#[derive(Debug, Clone)]
pub struct ConsensusState {
    pub view_matrices: Vec<ViewMatrix>,
    pub view_embeddings: Vec<SpectralEmbedding>,
    /// `sum_i U_i U_i^T`; symmetric PSD with eigenvalues in [0, m].
    pub consensus_laplacian: Array2<f64>,
    pub consensus_embedding: SpectralEmbedding,
    pub alpha: f64,
    pub objective_history: Vec<f64>,
    pub iteration: usize,
}

impl ConsensusState {
    pub fn n(&self) -> usize {
        self.consensus_laplacian.nrows()
    }

    pub fn m(&self) -> usize {
        self.view_matrices.len()
    }

    pub fn k(&self) -> usize {
        self.consensus_embedding.k
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, Copy)]
pub struct IterationStat {
    pub iteration: usize,
    pub objective: f64,
    pub alpha: f64,
    /// `max_i || U_i U_i^T - previous ||_max`; 0 at initialization.
    pub max_subspace_change: f64,
}

/// Outcome of [`run_consensus`].
#[derive(Debug, Clone)]
pub struct ConsensusResult {
    pub partition: Partition,
    pub state: ConsensusState,
    pub converged: bool,
    pub iterations_used: usize,
    pub log: Vec<IterationStat>,
}

fn trace_quadratic(matrix: &Array2<f64>, basis: &Array2<f64>) -> f64 {
    basis.t().dot(matrix).dot(basis).diag().sum()
}

fn sum_of_projections(embeddings: &[SpectralEmbedding]) -> Array2<f64> {
    let n = embeddings[0].n();
    let mut sum = Array2::zeros((n, n));
    for embedding in embeddings {
        sum += &embedding.projection();
    }
    sum
}

/// Initialize the optimizer: per-view embeddings, the consensus matrix
/// they induce, its embedding, the adaptive alpha, and the first
/// objective value.
pub fn init_consensus(views: &[ViewMatrix], k: usize) -> Result<ConsensusState, ConsensusError> {
    if views.is_empty() {
        return Err(ConsensusError::NoViews);
    }
    let n = views[0].n();
    for (i, view) in views.iter().enumerate() {
        if view.n() != n {
            return Err(ConsensusError::DimensionMismatch {
                view: i,
                expected: n,
                found: view.n(),
            });
        }
    }
    if k == 0 || k > n {
        return Err(ConsensusError::Spectral(SpectralError::KOutOfRange {
            k,
            n,
        }));
    }

    let view_embeddings: Vec<SpectralEmbedding> = views
        .par_iter()
        .enumerate()
        .map(|(i, view)| top_k_eigvecs(&view.values, k, EmbeddingSource::View(i)))
        .collect::<Result<_, _>>()?;

    let consensus_laplacian = sum_of_projections(&view_embeddings);
    let consensus_embedding = top_k_eigvecs(&consensus_laplacian, k, EmbeddingSource::Consensus)?;

    let mut state = ConsensusState {
        view_matrices: views.to_vec(),
        view_embeddings,
        consensus_laplacian,
        consensus_embedding,
        alpha: 1.0,
        objective_history: Vec::new(),
        iteration: 0,
    };
    state.alpha = adaptive_alpha(&state);
    let initial = objective(&state);
    state.objective_history.push(initial);
    Ok(state)
}

/// Trace-balancing alpha: per-view trace mass over `m` times the
/// consensus trace, clamped to `[1e-6, 1e6]`. Falls back to 1 when the
/// consensus trace is numerically zero.
pub fn adaptive_alpha(state: &ConsensusState) -> f64 {
    let view_mass: f64 = state
        .view_matrices
        .iter()
        .zip(&state.view_embeddings)
        .map(|(view, embedding)| trace_quadratic(&view.values, &embedding.basis))
        .sum();
    let consensus_trace =
        trace_quadratic(&state.consensus_laplacian, &state.consensus_embedding.basis);
    let denominator = state.m() as f64 * consensus_trace;
    if denominator.abs() < 1e-12 {
        return 1.0;
    }
    (view_mass / denominator).clamp(1e-6, 1e6)
}

/// The joint objective at the state's current alpha.
pub fn objective(state: &ConsensusState) -> f64 {
    let view_mass: f64 = state
        .view_matrices
        .iter()
        .zip(&state.view_embeddings)
        .map(|(view, embedding)| trace_quadratic(&view.values, &embedding.basis))
        .sum();
    let consensus_trace =
        trace_quadratic(&state.consensus_laplacian, &state.consensus_embedding.basis);
    view_mass + state.alpha * consensus_trace
}

/// One alternating step at the state's current alpha, refreshing alpha
/// adaptively afterwards.
pub fn update_step(state: ConsensusState) -> Result<ConsensusState, ConsensusError> {
    step(state, None).map(|(state, _)| state)
}

/// One alternating step; `fixed_alpha` suppresses the adaptive refresh.
/// Returns the new state and the largest per-view subspace change.
pub(crate) fn step(
    mut state: ConsensusState,
    fixed_alpha: Option<f64>,
) -> Result<(ConsensusState, f64), ConsensusError> {
    let k = state.k();

    // The state invariant guarantees the consensus matrix and embedding
    // already reflect the current view embeddings (established by
    // initialization and re-established at the end of every step), so
    // the stage-A quantities are available without recomputation.

    // Stage B: each view embedding from its matrix plus the alpha-weighted
    // consensus projection.
    let alpha = state.alpha;
    let consensus_projection = state.consensus_embedding.projection();
    let new_embeddings: Vec<SpectralEmbedding> = state
        .view_matrices
        .par_iter()
        .enumerate()
        .map(|(i, view)| {
            let target = &view.values + &(alpha * &consensus_projection);
            top_k_eigvecs(&target, k, EmbeddingSource::View(i))
        })
        .collect::<Result<_, _>>()?;

    let mut max_change: f64 = 0.0;
    for (new, old) in new_embeddings.iter().zip(&state.view_embeddings) {
        let diff = new.projection() - old.projection();
        for &x in diff.iter() {
            max_change = max_change.max(x.abs());
        }
    }
    state.view_embeddings = new_embeddings;

    // Stage A: refresh the consensus matrix from the constraint
    // L_* = sum U_i U_i^T and re-embed it.
    state.consensus_laplacian = sum_of_projections(&state.view_embeddings);
    state.consensus_embedding =
        top_k_eigvecs(&state.consensus_laplacian, k, EmbeddingSource::Consensus)?;

    state.alpha = match fixed_alpha {
        Some(alpha) => alpha,
        None => adaptive_alpha(&state),
    };
    state.iteration += 1;
    state.objective_history.push(objective(&state));

    Ok((state, max_change))
}

/// Run the alternating optimization to convergence and label the buses
/// from the consensus embedding.
pub fn run_consensus(
    views: &[ViewMatrix],
    k: usize,
    options: &ConsensusOptions,
) -> Result<ConsensusResult, ConsensusError> {
    let mut state = init_consensus(views, k)?;
    if let Some(alpha) = options.alpha_override {
        state.alpha = alpha;
        let initial = objective(&state);
        state.objective_history = vec![initial];
    }

    let mut log = vec![IterationStat {
        iteration: 0,
        objective: state.objective_history[0],
        alpha: state.alpha,
        max_subspace_change: 0.0,
    }];

    let mut converged = false;
    let mut iterations_used = 0;
    for _ in 0..options.max_iter {
        let (next, max_change) = step(state, options.alpha_override)?;
        state = next;
        iterations_used += 1;

        let history = &state.objective_history;
        let current = history[history.len() - 1];
        let previous = history[history.len() - 2];
        log.push(IterationStat {
            iteration: iterations_used,
            objective: current,
            alpha: state.alpha,
            max_subspace_change: max_change,
        });

        if (current - previous).abs() / current.abs().max(1.0) < options.rel_tol {
            converged = true;
            break;
        }
    }

    let partition = kmeans(&state.consensus_embedding.basis, k, options.seed)?;

    Ok(ConsensusResult {
        partition,
        state,
        converged,
        iterations_used,
        log,
    })
}
