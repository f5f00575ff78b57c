//! Per-contingency similarity matrices and graph view matrices.
//!
//! One contingency's bus traces become a symmetric similarity matrix of
//! transformed Pearson correlations, a degree vector of its off-diagonal
//! row sums, and a view matrix: either the unnormalized graph Laplacian
//! `D - S` or the symmetrically normalized adjacency
//! `D^{-1/2} S D^{-1/2}`.

use crate::dataset::ContingencyRecord;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AffinityError {
    #[error("sequences have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least 2 samples to correlate, found {0}")]
    TooFewSamples(usize),
}

/// How a raw correlation in [-1, 1] maps to a non-negative affinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `max(r, 0)`: anti-correlated buses get zero affinity.
    #[default]
    ClipNegative,
    /// `|r|`
    Absolute,
    /// `(1 + r) / 2`
    ShiftRescale,
}

impl Transform {
    pub fn apply(self, r: f64) -> f64 {
        match self {
            Transform::ClipNegative => r.max(0.0),
            Transform::Absolute => r.abs(),
            Transform::ShiftRescale => (1.0 + r) / 2.0,
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Transform::ClipNegative => "clip-negative",
            Transform::Absolute => "absolute",
            Transform::ShiftRescale => "shift-rescale",
        };
        f.write_str(name)
    }
}

/// Which view matrix a similarity matrix turns into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewMode {
    /// `L = D - S`. Positive semidefinite with zero row sums; its *top*
    /// eigenvectors capture the least coherent directions, so this mode
    /// exists for literal runs rather than as the default.
    UnnormalizedLaplacian,
    /// `D^{-1/2} S D^{-1/2}` with the convention `d^{-1/2} = 0` for
    /// isolated buses. Eigenvalues in [-1, 1]; top eigenvectors are the
    /// standard clustering embedding.
    #[default]
    NormalizedAdjacency,
}

impl fmt::Display for ViewMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ViewMode::UnnormalizedLaplacian => "unnormalized-laplacian",
            ViewMode::NormalizedAdjacency => "normalized-adjacency",
        };
        f.write_str(name)
    }
}

/// Non-fatal conditions noticed while building affinity structures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AffinityWarning {
    /// Pearson was undefined for the pair (zero variance); 0 was used.
    DegeneratePair { bus_a: String, bus_b: String },
    /// A bus had zero degree; its normalization factor was set to 0.
    IsolatedBus { bus: String },
}

impl fmt::Display for AffinityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AffinityWarning::DegeneratePair { bus_a, bus_b } => {
                write!(
                    f,
                    "degenerate pair ({bus_a}, {bus_b}): zero-variance trace, correlation set to 0"
                )
            }
            AffinityWarning::IsolatedBus { bus } => {
                write!(
                    f,
                    "isolated bus {bus}: zero degree, normalization factor set to 0"
                )
            }
        }
    }
}

/// Symmetric non-negative similarity matrix with zero diagonal.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    pub values: Array2<f64>,
    pub transform: Transform,
    pub bus_order: Vec<String>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// The per-view structure matrix fed to spectral embedding.
#[derive(Debug, Clone)]
pub struct ViewMatrix {
    pub values: Array2<f64>,
    pub mode: ViewMode,
    pub degree: Array1<f64>,
}

impl ViewMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// Pearson correlation coefficient of two equal-length sequences.
///
/// Returns the coefficient and a degeneracy flag: when either sequence has
/// zero variance the correlation is undefined and reported as `(0.0, true)`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, bool), AffinityError> {
    if x.len() != y.len() {
        return Err(AffinityError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(AffinityError::TooFewSamples(n));
    }

    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;

    let mut dot = 0.0;
    let mut sq_x = 0.0;
    let mut sq_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        dot += dx * dy;
        sq_x += dx * dx;
        sq_y += dy * dy;
    }

    if sq_x == 0.0 || sq_y == 0.0 {
        return Ok((0.0, true));
    }
    let r = dot / (sq_x.sqrt() * sq_y.sqrt());
    Ok((r.clamp(-1.0, 1.0), false))
}

/// Build the similarity matrix of one contingency record.
///
/// Entry (i, j), i != j, is `transform(pearson(f_i, f_j))`; each unordered
/// pair is computed once, so the matrix is symmetric by construction. The
/// diagonal is zero.
pub fn build_similarity(
    record: &ContingencyRecord,
    transform: Transform,
) -> Result<(SimilarityMatrix, Vec<AffinityWarning>), AffinityError> {
    let n = record.traces.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();

    let results: Vec<Result<(usize, usize, f64, bool), AffinityError>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (r, degenerate) = pearson(&record.traces[i].samples, &record.traces[j].samples)?;
            Ok((i, j, transform.apply(r), degenerate))
        })
        .collect();

    let mut values = Array2::zeros((n, n));
    let mut warnings = Vec::new();
    for result in results {
        let (i, j, s, degenerate) = result?;
        values[(i, j)] = s;
        values[(j, i)] = s;
        if degenerate {
            warnings.push(AffinityWarning::DegeneratePair {
                bus_a: record.traces[i].bus_id.clone(),
                bus_b: record.traces[j].bus_id.clone(),
            });
        }
    }

    Ok((
        SimilarityMatrix {
            values,
            transform,
            bus_order: record.traces.iter().map(|t| t.bus_id.clone()).collect(),
        },
        warnings,
    ))
}

/// Off-diagonal row sums of a similarity matrix (the diagonal is zero).
pub fn degree_vector(similarity: &SimilarityMatrix) -> Array1<f64> {
    let n = similarity.n();
    let mut degree = Array1::zeros(n);
    for j in 0..n {
        let mut sum = 0.0;
        for k in 0..n {
            if k != j {
                sum += similarity.values[(j, k)];
            }
        }
        degree[j] = sum;
    }
    degree
}

/// Turn a similarity matrix into a view matrix.
pub fn build_view(
    similarity: &SimilarityMatrix,
    mode: ViewMode,
) -> (ViewMatrix, Vec<AffinityWarning>) {
    let n = similarity.n();
    let degree = degree_vector(similarity);
    let mut warnings = Vec::new();

    let mut values = Array2::zeros((n, n));
    match mode {
        ViewMode::UnnormalizedLaplacian => {
            for i in 0..n {
                for j in 0..n {
                    values[(i, j)] = if i == j {
                        degree[i]
                    } else {
                        -similarity.values[(i, j)]
                    };
                }
            }
        }
        ViewMode::NormalizedAdjacency => {
            let mut inv_sqrt = Array1::zeros(n);
            for (j, &d) in degree.iter().enumerate() {
                if d > 0.0 {
                    inv_sqrt[j] = 1.0 / d.sqrt();
                } else {
                    warnings.push(AffinityWarning::IsolatedBus {
                        bus: similarity.bus_order[j].clone(),
                    });
                }
            }
            for i in 0..n {
                for j in 0..n {
                    values[(i, j)] = inv_sqrt[i] * similarity.values[(i, j)] * inv_sqrt[j];
                }
            }
        }
    }

    // Symmetrize; construction is already symmetric but this pins the
    // invariant exactly for downstream eigensolvers.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (values[(i, j)] + values[(j, i)]);
            values[(i, j)] = avg;
            values[(j, i)] = avg;
        }
    }

    (
        ViewMatrix {
            values,
            mode,
            degree,
        },
        warnings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FrequencyTrace;
    use crate::eigen::symmetric_eigen;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn record_from_rows(rows: &[Vec<f64>]) -> ContingencyRecord {
        let n_samples = rows[0].len();
        let times: Arc<[f64]> = (0..n_samples).map(|i| i as f64 * 0.1).collect();
        ContingencyRecord {
            contingency_id: "test".into(),
            outage_bus: "b0".into(),
            mw_lost: 0.0,
            traces: rows
                .iter()
                .enumerate()
                .map(|(i, samples)| FrequencyTrace {
                    bus_id: format!("b{i}"),
                    samples: samples.clone(),
                    sample_times: Arc::clone(&times),
                })
                .collect(),
        }
    }

    #[test]
    fn pearson_perfect_positive() {
        let (r, degenerate) = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        assert!(!degenerate);
    }

    #[test]
    fn pearson_perfect_negative() {
        let (r, _) = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_hand_evaluated_four_points() {
        // Deviations dot to 4.0, each squared norm is 5, so r = 4/5.
        let (r, _) = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }

    #[test]
    fn pearson_zero_variance_is_degenerate_zero() {
        let (r, degenerate) = pearson(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r, 0.0);
        assert!(degenerate);
    }

    #[test]
    fn pearson_rejects_bad_inputs() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(AffinityError::LengthMismatch(2, 1))
        ));
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(AffinityError::TooFewSamples(1))
        ));
    }

    #[test]
    fn transforms_match_definitions() {
        assert_eq!(Transform::ClipNegative.apply(-0.4), 0.0);
        assert!((Transform::Absolute.apply(-0.4) - 0.4).abs() < 1e-15);
        assert!((Transform::ShiftRescale.apply(-0.4) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn identical_traces_give_unit_offdiagonal() {
        let record = record_from_rows(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]);
        let (s, warnings) = build_similarity(&record, Transform::ClipNegative).unwrap();
        assert!(warnings.is_empty());
        assert!((s.values[(0, 1)] - 1.0).abs() < 1e-15);
        assert_eq!(s.values[(0, 0)], 0.0);
        assert_eq!(s.values[(1, 1)], 0.0);
    }

    #[test]
    fn similarity_matches_double_loop_oracle() {
        let mut rng = StdRng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..20).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let record = record_from_rows(&rows);

        for transform in [
            Transform::ClipNegative,
            Transform::Absolute,
            Transform::ShiftRescale,
        ] {
            let (s, _) = build_similarity(&record, transform).unwrap();
            // Independent oracle: direct evaluation of the correlation
            // formula for every ordered pair.
            for i in 0..3 {
                for j in 0..3 {
                    let expected = if i == j {
                        0.0
                    } else {
                        let x = &rows[i];
                        let y = &rows[j];
                        let mx = x.iter().sum::<f64>() / x.len() as f64;
                        let my = y.iter().sum::<f64>() / y.len() as f64;
                        let num: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
                        let dx: f64 = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
                        let dy: f64 = y.iter().map(|&b| (b - my) * (b - my)).sum();
                        transform.apply(num / (dx.sqrt() * dy.sqrt()))
                    };
                    assert!(
                        (s.values[(i, j)] - expected).abs() < 1e-12,
                        "mismatch at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_trace_flags_warning() {
        let record = record_from_rows(&[vec![5.0, 5.0, 5.0], vec![1.0, 2.0, 3.0]]);
        let (s, warnings) = build_similarity(&record, Transform::ClipNegative).unwrap();
        assert_eq!(s.values[(0, 1)], 0.0);
        assert_eq!(warnings.len(), 1);
        assert!(
            matches!(&warnings[0], AffinityWarning::DegeneratePair { bus_a, .. } if bus_a == "b0")
        );
    }

    #[test]
    fn degree_vector_two_bus() {
        let s = SimilarityMatrix {
            values: array![[0.0, 0.5], [0.5, 0.0]],
            transform: Transform::ClipNegative,
            bus_order: vec!["a".into(), "b".into()],
        };
        let d = degree_vector(&s);
        assert_eq!(d, array![0.5, 0.5]);
    }

    #[test]
    fn degree_vector_zero_matrix() {
        let s = SimilarityMatrix {
            values: Array2::zeros((3, 3)),
            transform: Transform::ClipNegative,
            bus_order: vec!["a".into(), "b".into(), "c".into()],
        };
        assert_eq!(degree_vector(&s), Array1::<f64>::zeros(3));
    }

    #[test]
    fn degree_vector_matches_row_sum_oracle() {
        let mut rng = StdRng::seed_from_u64(9);
        let mut values = Array2::zeros((5, 5));
        for i in 0..5 {
            for j in (i + 1)..5 {
                let x = rng.random_range(0.0..1.0);
                values[(i, j)] = x;
                values[(j, i)] = x;
            }
        }
        let s = SimilarityMatrix {
            values: values.clone(),
            transform: Transform::ClipNegative,
            bus_order: (0..5).map(|i| format!("b{i}")).collect(),
        };
        let d = degree_vector(&s);
        for j in 0..5 {
            let oracle: f64 = (0..5).filter(|&k| k != j).map(|k| values[(j, k)]).sum();
            assert!((d[j] - oracle).abs() < 1e-14);
        }
    }

    #[test]
    fn unnormalized_laplacian_two_bus() {
        let s = SimilarityMatrix {
            values: array![[0.0, 0.5], [0.5, 0.0]],
            transform: Transform::ClipNegative,
            bus_order: vec!["a".into(), "b".into()],
        };
        let (view, warnings) = build_view(&s, ViewMode::UnnormalizedLaplacian);
        assert!(warnings.is_empty());
        assert_eq!(view.values, array![[0.5, -0.5], [-0.5, 0.5]]);
    }

    #[test]
    fn normalized_adjacency_two_bus() {
        // d = [0.5, 0.5]; d^{-1/2} S d^{-1/2} has off-diagonal 0.5/0.5 = 1.
        let s = SimilarityMatrix {
            values: array![[0.0, 0.5], [0.5, 0.0]],
            transform: Transform::ClipNegative,
            bus_order: vec!["a".into(), "b".into()],
        };
        let (view, _) = build_view(&s, ViewMode::NormalizedAdjacency);
        assert!((view.values[(0, 1)] - 1.0).abs() < 1e-14);
        assert!((view.values[(0, 0)]).abs() < 1e-14);
    }

    #[test]
    fn isolated_bus_flagged_and_zeroed() {
        let s = SimilarityMatrix {
            values: array![[0.0, 0.0, 0.0], [0.0, 0.0, 0.8], [0.0, 0.8, 0.0]],
            transform: Transform::ClipNegative,
            bus_order: vec!["a".into(), "b".into(), "c".into()],
        };
        let (view, warnings) = build_view(&s, ViewMode::NormalizedAdjacency);
        assert_eq!(warnings.len(), 1);
        assert!(matches!(&warnings[0], AffinityWarning::IsolatedBus { bus } if bus == "a"));
        for j in 0..3 {
            assert_eq!(view.values[(0, j)], 0.0);
        }
    }

    fn random_similarity(n: usize, rng: &mut StdRng) -> SimilarityMatrix {
        let mut values = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                let x = rng.random_range(0.0..1.0);
                values[(i, j)] = x;
                values[(j, i)] = x;
            }
        }
        SimilarityMatrix {
            values,
            transform: Transform::ClipNegative,
            bus_order: (0..n).map(|i| format!("b{i}")).collect(),
        }
    }

    #[test]
    fn laplacian_row_sums_vanish_and_psd() {
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(2..=12);
            let s = random_similarity(n, &mut rng);
            let (view, _) = build_view(&s, ViewMode::UnnormalizedLaplacian);
            for i in 0..n {
                let row_sum: f64 = view.values.row(i).sum();
                assert!(row_sum.abs() < 1e-10, "row {i} sums to {row_sum}");
            }
            let eig = symmetric_eigen(&view.values).unwrap();
            assert!(
                eig.eigenvalues.iter().all(|&l| l >= -1e-9),
                "negative eigenvalue in Laplacian"
            );
        }
    }

    #[test]
    fn normalized_adjacency_spectrum_bounded() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..20 {
            let n = rng.random_range(2..=10);
            let s = random_similarity(n, &mut rng);
            let (view, _) = build_view(&s, ViewMode::NormalizedAdjacency);
            let eig = symmetric_eigen(&view.values).unwrap();
            for &l in &eig.eigenvalues {
                assert!(
                    (-1.0 - 1e-9..=1.0 + 1e-9).contains(&l),
                    "eigenvalue {l} out of range"
                );
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = StdRng::seed_from_u64(31);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..15).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let record = record_from_rows(&rows);
        let perm = [2usize, 0, 3, 1];
        let permuted_rows: Vec<Vec<f64>> = perm.iter().map(|&p| rows[p].clone()).collect();
        let permuted = record_from_rows(&permuted_rows);

        let (s, _) = build_similarity(&record, Transform::ShiftRescale).unwrap();
        let (sp, _) = build_similarity(&permuted, Transform::ShiftRescale).unwrap();
        let d = degree_vector(&s);
        let dp = degree_vector(&sp);
        let (v, _) = build_view(&s, ViewMode::NormalizedAdjacency);
        let (vp, _) = build_view(&sp, ViewMode::NormalizedAdjacency);

        for a in 0..4 {
            assert!((dp[a] - d[perm[a]]).abs() < 1e-12);
            for b in 0..4 {
                assert!((sp.values[(a, b)] - s.values[(perm[a], perm[b])]).abs() < 1e-12);
                assert!((vp.values[(a, b)] - v.values[(perm[a], perm[b])]).abs() < 1e-12);
            }
        }
    }

    proptest! {
        /// Pearson is invariant to positive affine rescaling and flips
        /// sign under negative slope.
        #[test]
        fn prop_pearson_affine_invariance(
            xs in prop::collection::vec(-100.0f64..100.0, 3..30),
            ys in prop::collection::vec(-100.0f64..100.0, 3..30),
            a in 0.01f64..50.0,
            b in -10.0f64..10.0,
        ) {
            let n = xs.len().min(ys.len());
            let xs = &xs[..n];
            let ys = &ys[..n];
            let (r, degenerate) = pearson(xs, ys).unwrap();
            prop_assume!(!degenerate);

            let scaled: Vec<f64> = xs.iter().map(|&x| a * x + b).collect();
            let (r_scaled, _) = pearson(&scaled, ys).unwrap();
            prop_assert!((r - r_scaled).abs() < 1e-12);

            let flipped: Vec<f64> = xs.iter().map(|&x| -a * x + b).collect();
            let (r_flipped, _) = pearson(&flipped, ys).unwrap();
            prop_assert!((r + r_flipped).abs() < 1e-12);
        }

        /// Symmetry holds exactly: the same code path serves both orders.
        #[test]
        fn prop_pearson_symmetric(
            xs in prop::collection::vec(-10.0f64..10.0, 4..20),
            ys in prop::collection::vec(-10.0f64..10.0, 4..20),
        ) {
            let n = xs.len().min(ys.len());
            let (rxy, _) = pearson(&xs[..n], &ys[..n]).unwrap();
            let (ryx, _) = pearson(&ys[..n], &xs[..n]).unwrap();
            prop_assert_eq!(rxy, ryx);
        }

        /// Every similarity entry stays in [0, 1] for all transforms.
        #[test]
        fn prop_similarity_in_unit_interval(seed in 0u64..200) {
            let mut rng = StdRng::seed_from_u64(seed);
            let n = rng.random_range(2..=6);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..10).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let record = record_from_rows(&rows);
            for transform in [Transform::ClipNegative, Transform::Absolute, Transform::ShiftRescale] {
                let (s, _) = build_similarity(&record, transform).unwrap();
                for &v in s.values.iter() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
