//! End-to-end orchestration: dataset -> per-view similarity graphs ->
//! consensus optimization -> partitions, with an optional silhouette
//! sweep over the cluster count.

use crate::affinity::{
    build_similarity, build_view, AffinityError, AffinityWarning, Transform, ViewMatrix, ViewMode,
};
use crate::consensus::{run_consensus, ConsensusError, ConsensusOptions, ConsensusResult};
use crate::dataset::{validate_dataset, Dataset, Violation};
use crate::spectral::{
    normalize_rows, silhouette, spectral_partition, KScore, Partition, SpectralError,
};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset failed validation with {} violation(s); first: {}",
            .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
    InvalidDataset(Vec<Violation>),

    #[error("sweep range [{k_min}, {k_max}] invalid for {n} buses")]
    InvalidSweepRange {
        k_min: usize,
        k_max: usize,
        n: usize,
    },

    #[error(transparent)]
    Affinity(#[from] AffinityError),

    #[error(transparent)]
    Consensus(#[from] ConsensusError),

    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// How the cluster count is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Fixed(usize),
    Sweep { k_min: usize, k_max: usize },
}

impl KChoice {
    /// The default sweep range for an N-bus dataset: 2 ..= min(15, N-1).
    pub fn default_sweep(n_buses: usize) -> Self {
        KChoice::Sweep {
            k_min: 2,
            k_max: 15.min(n_buses.saturating_sub(1)).max(2),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub transform: Transform,
    pub view_mode: ViewMode,
    pub k_choice: KChoice,
    pub alpha_override: Option<f64>,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            transform: Transform::default(),
            view_mode: ViewMode::default(),
            k_choice: KChoice::Fixed(2),
            alpha_override: None,
            max_iter: 50,
            rel_tol: 1e-6,
            seed: 0,
        }
    }
}

impl PipelineOptions {
    fn consensus_options(&self) -> ConsensusOptions {
        ConsensusOptions {
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
            seed: self.seed,
            alpha_override: self.alpha_override,
        }
    }
}

/// Everything the clustering stage produces.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub views: Vec<ViewMatrix>,
    /// Warnings per contingency id.
    pub warnings: TaggedWarnings,
    pub chosen_k: usize,
    /// Per-k silhouette table; present when a sweep ran.
    pub sweep: Option<Vec<KScore>>,
    pub consensus: ConsensusResult,
    /// Single-view partitions at the chosen k, one per contingency.
    pub per_view: Vec<Partition>,
}

/// Warnings tagged with the contingency id they came from.
pub type TaggedWarnings = Vec<(String, AffinityWarning)>;

/// Build one view matrix per contingency record.
pub fn build_views(
    dataset: &Dataset,
    transform: Transform,
    view_mode: ViewMode,
) -> Result<(Vec<ViewMatrix>, TaggedWarnings), PipelineError> {
    let per_record: Vec<(ViewMatrix, Vec<AffinityWarning>)> = dataset
        .records
        .par_iter()
        .map(|record| {
            let (similarity, mut warnings) = build_similarity(record, transform)?;
            let (view, view_warnings) = build_view(&similarity, view_mode);
            warnings.extend(view_warnings);
            Ok((view, warnings))
        })
        .collect::<Result<_, AffinityError>>()?;

    let mut views = Vec::with_capacity(per_record.len());
    let mut warnings = Vec::new();
    for ((view, view_warnings), record) in per_record.into_iter().zip(&dataset.records) {
        views.push(view);
        warnings.extend(
            view_warnings
                .into_iter()
                .map(|w| (record.contingency_id.clone(), w)),
        );
    }
    Ok((views, warnings))
}

/// L2-normalized rows of the top-`dim` eigenvector embedding of the mean
/// view matrix: the fixed geometry candidate labelings are scored in.
///
/// Per-k consensus embeddings cannot serve here: the alternating
/// optimizer sharpens whatever k it is given, so every k <= k_true scores
/// near 1 in its own embedding. The sum-of-projections consensus matrix
/// is no better, because projections flatten eigenvalues and give its
/// noise directions unit weight. The mean view matrix keeps the raw
/// operators' eigenvalue decay, so one embedding of it discriminates
/// merges and splits for every candidate k.
fn sweep_geometry(views: &[ViewMatrix], dim: usize) -> Result<ndarray::Array2<f64>, PipelineError> {
    let n = views[0].n();
    let mut mean = ndarray::Array2::<f64>::zeros((n, n));
    for view in views {
        mean += &view.values;
    }
    mean /= views.len() as f64;
    let embedding =
        crate::spectral::top_k_eigvecs(&mean, dim, crate::spectral::EmbeddingSource::Consensus)?;
    // Weight columns by eigenvalue: the mean operator's spectrum decays,
    // so this suppresses its noise directions relative to block structure.
    let mut weighted = embedding.basis.clone();
    for (col, &value) in embedding.eigenvalues.iter().enumerate() {
        let weight = value.max(0.0);
        for row in 0..weighted.nrows() {
            weighted[(row, col)] *= weight;
        }
    }
    Ok(normalize_rows(&weighted))
}

/// Run the full clustering pipeline on a validated dataset.
///
/// With a sweep, the whole consensus optimization runs once per candidate
/// k; each candidate's labeling is scored by mean silhouette in the fixed
/// [`sweep_geometry`], and the argmax wins (ties to the smallest k).
pub fn cluster_dataset(
    dataset: &Dataset,
    options: &PipelineOptions,
) -> Result<PipelineOutcome, PipelineError> {
    let violations = validate_dataset(dataset);
    if !violations.is_empty() {
        return Err(PipelineError::InvalidDataset(violations));
    }

    let (views, warnings) = build_views(dataset, options.transform, options.view_mode)?;
    let consensus_options = options.consensus_options();

    let (chosen_k, sweep, consensus) = match options.k_choice {
        KChoice::Fixed(k) => {
            let mut result = run_consensus(&views, k, &consensus_options)?;
            if k >= 2 {
                let points = normalize_rows(&result.state.consensus_embedding.basis);
                result.partition.silhouette = silhouette(&points, &result.partition).ok();
            }
            (k, None, result)
        }
        KChoice::Sweep { k_min, k_max } => {
            let n = dataset.n_buses();
            if k_min < 2 || k_min > k_max || k_max >= n {
                return Err(PipelineError::InvalidSweepRange { k_min, k_max, n });
            }
            let geometry = sweep_geometry(&views, k_max)?;
            let mut candidates: Vec<(KScore, ConsensusResult)> = (k_min..=k_max)
                .collect::<Vec<_>>()
                .par_iter()
                .map(|&k| {
                    let mut result = run_consensus(&views, k, &consensus_options)?;
                    let score = silhouette(&geometry, &result.partition)?;
                    result.partition.silhouette = Some(score);
                    Ok((
                        KScore {
                            k,
                            silhouette: score,
                        },
                        result,
                    ))
                })
                .collect::<Result<_, PipelineError>>()?;

            let mut best = 0;
            for idx in 1..candidates.len() {
                if candidates[idx].0.silhouette > candidates[best].0.silhouette {
                    best = idx;
                }
            }
            let scores: Vec<KScore> = candidates.iter().map(|(s, _)| *s).collect();
            let (score, result) = candidates.swap_remove(best);
            (score.k, Some(scores), result)
        }
    };

    let per_view: Vec<Partition> = views
        .par_iter()
        .map(|view| {
            let mut partition = spectral_partition(&view.values, chosen_k, options.seed)?;
            if chosen_k >= 2 {
                let embedding = crate::spectral::top_k_eigvecs(
                    &view.values,
                    chosen_k,
                    crate::spectral::EmbeddingSource::View(0),
                )?;
                let points = normalize_rows(&embedding.basis);
                partition.silhouette = silhouette(&points, &partition).ok();
            }
            Ok(partition)
        })
        .collect::<Result<_, SpectralError>>()?;

    Ok(PipelineOutcome {
        views,
        warnings,
        chosen_k,
        sweep,
        consensus,
        per_view,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridsim::{build_network, generate_scenario_suite, GridSpec};
    use crate::spectral::adjusted_rand_index;

    fn planted_dataset(seed: u64) -> (Dataset, Partition) {
        let spec = GridSpec {
            seed,
            ..Default::default()
        };
        let model = build_network(&spec).unwrap();
        let outages: Vec<(String, f64)> = (0..3)
            .map(|area| (model.area_buses(area)[0], 1.0))
            .map(|(bus, dp)| (model.bus_ids[bus].clone(), dp))
            .collect();
        let dataset = generate_scenario_suite(&model, &outages, 20.0, 0.01).unwrap();
        (dataset, model.planted_partition)
    }

    #[test]
    fn fixed_k_recovers_planted_areas() {
        let (dataset, truth) = planted_dataset(7);
        let options = PipelineOptions {
            k_choice: KChoice::Fixed(3),
            seed: 7,
            ..Default::default()
        };
        let outcome = cluster_dataset(&dataset, &options).unwrap();
        let ari = adjusted_rand_index(&outcome.consensus.partition, &truth).unwrap();
        assert!(ari > 0.99, "ARI = {ari}");
        assert_eq!(outcome.per_view.len(), 3);
        assert!(outcome.consensus.partition.silhouette.unwrap() > 0.5);
    }

    #[test]
    fn sweep_selects_three_areas() {
        let (dataset, _) = planted_dataset(11);
        let options = PipelineOptions {
            k_choice: KChoice::Sweep { k_min: 2, k_max: 8 },
            seed: 11,
            ..Default::default()
        };
        let outcome = cluster_dataset(&dataset, &options).unwrap();
        assert_eq!(outcome.chosen_k, 3, "sweep: {:?}", outcome.sweep);
        assert_eq!(outcome.sweep.as_ref().unwrap().len(), 7);
    }

    #[test]
    fn invalid_dataset_is_rejected() {
        let (mut dataset, _) = planted_dataset(3);
        dataset.records[0].traces[0].samples[5] = f64::NAN;
        let err = cluster_dataset(&dataset, &PipelineOptions::default()).unwrap_err();
        assert!(matches!(err, PipelineError::InvalidDataset(_)));
    }

    #[test]
    fn default_sweep_range_tracks_bus_count() {
        assert_eq!(
            KChoice::default_sweep(24),
            KChoice::Sweep {
                k_min: 2,
                k_max: 15
            }
        );
        assert_eq!(
            KChoice::default_sweep(10),
            KChoice::Sweep { k_min: 2, k_max: 9 }
        );
        assert_eq!(
            KChoice::default_sweep(3),
            KChoice::Sweep { k_min: 2, k_max: 2 }
        );
    }
}
