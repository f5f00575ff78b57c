//! Spectral embedding, k-means labeling, and clustering-quality metrics.

mod kmeans;
mod quality;

pub use kmeans::{kmeans, normalize_rows};
pub use quality::{adjusted_rand_index, silhouette};

use crate::eigen::{symmetric_eigen, EigenError};
use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("k = {k} out of range for an {n} x {n} matrix")]
    KOutOfRange { k: usize, n: usize },

    #[error("matrix asymmetry {0:.3e} exceeds tolerance 1e-9")]
    NotSymmetric(f64),

    #[error("cannot cluster {n} points into {k} clusters")]
    TooFewPoints { n: usize, k: usize },

    #[error("silhouette needs at least 2 clusters, found {0}")]
    TooFewClusters(usize),

    #[error("silhouette needs at least 3 points, found {0}")]
    TooFewSilhouettePoints(usize),

    #[error("partitions have different lengths: {0} vs {1}")]
    PartitionLengthMismatch(usize, usize),

    #[error("invalid k range [{k_min}, {k_max}] for {n} points")]
    InvalidKRange {
        k_min: usize,
        k_max: usize,
        n: usize,
    },

    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Where an embedding came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    /// Embedding of a single contingency view (by index).
    View(usize),
    /// Embedding of the consensus matrix.
    Consensus,
}

/// N x k orthonormal basis, columns ordered by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub basis: Array2<f64>,
    /// Eigenvalue associated with each column, descending.
    pub eigenvalues: Vec<f64>,
    pub source: EmbeddingSource,
    pub k: usize,
}

impl SpectralEmbedding {
    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    /// The projection matrix `U U^T` onto the embedded subspace.
    pub fn projection(&self) -> Array2<f64> {
        self.basis.dot(&self.basis.t())
    }
}

/// Cluster labels for the buses, plus quality metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Cluster id in `0..k` per point.
    pub labels: Vec<usize>,
    pub k: usize,
    /// Mean silhouette score, if it has been computed.
    pub silhouette: Option<f64>,
    /// RNG seed the labeling was produced with.
    pub seed: u64,
}

impl Partition {
    /// Member count per cluster id.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &label in &self.labels {
            sizes[label] += 1;
        }
        sizes
    }

    /// Whether two partitions group the points identically, ignoring how
    /// the cluster ids are named.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        if self.labels.len() != other.labels.len() {
            return false;
        }
        let canon = |labels: &[usize]| -> Vec<usize> {
            let mut rename: Vec<Option<usize>> = vec![None; labels.len() + 1];
            let mut next = 0;
            labels
                .iter()
                .map(|&l| {
                    *rename[l].get_or_insert_with(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect()
        };
        canon(&self.labels) == canon(&other.labels)
    }
}

/// Embedding from the k largest eigenpairs of a symmetric matrix.
///
/// The input is symmetrized first and rejected if its asymmetry exceeds
/// 1e-9. Sign convention: each column's largest-magnitude entry is made
/// positive, ties broken by the lowest row index, so embeddings are
/// reproducible across runs.
pub fn top_k_eigvecs(
    matrix: &Array2<f64>,
    k: usize,
    source: EmbeddingSource,
) -> Result<SpectralEmbedding, SpectralError> {
    let n = matrix.nrows();
    if k == 0 || k > n {
        return Err(SpectralError::KOutOfRange { k, n });
    }

    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            asymmetry = asymmetry.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    if asymmetry > 1e-9 {
        return Err(SpectralError::NotSymmetric(asymmetry));
    }
    let mut symmetrized = matrix.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (symmetrized[(i, j)] + symmetrized[(j, i)]);
            symmetrized[(i, j)] = avg;
            symmetrized[(j, i)] = avg;
        }
    }

    let eig = symmetric_eigen(&symmetrized)?;
    let eigenvalues = eig.eigenvalues[..k].to_vec();
    let mut basis = Array2::zeros((n, k));
    for col in 0..k {
        // Largest-magnitude entry positive; ties to the lowest index.
        let mut pivot = 0;
        let mut best = -1.0;
        for row in 0..n {
            let mag = eig.eigenvectors[(row, col)].abs();
            if mag > best {
                best = mag;
                pivot = row;
            }
        }
        let flip = if eig.eigenvectors[(pivot, col)] < 0.0 {
            -1.0
        } else {
            1.0
        };
        for row in 0..n {
            basis[(row, col)] = flip * eig.eigenvectors[(row, col)];
        }
    }

    Ok(SpectralEmbedding {
        basis,
        eigenvalues,
        source,
        k,
    })
}

/// Base spectral clustering of one symmetric structure matrix: embed the
/// top-k eigenvectors and run k-means on their rows.
pub fn spectral_partition(
    matrix: &Array2<f64>,
    k: usize,
    seed: u64,
) -> Result<Partition, SpectralError> {
    let embedding = top_k_eigvecs(matrix, k, EmbeddingSource::View(0))?;
    kmeans(&embedding.basis, k, seed)
}

/// One row of the per-k sweep table.
#[derive(Debug, Clone, Copy)]
pub struct KScore {
    pub k: usize,
    pub silhouette: f64,
}

/// Result of a silhouette sweep over candidate cluster counts.
#[derive(Debug, Clone)]
pub struct KSelection {
    pub chosen_k: usize,
    pub scores: Vec<KScore>,
}

/// Sweep k over `[k_min, k_max]`, scoring each k-means labeling by mean
/// silhouette, and pick the argmax (ties go to the smallest k).
///
/// Rows are L2-normalized once and both k-means and the silhouette are
/// evaluated in that normalized space.
pub fn select_k(
    points: &Array2<f64>,
    k_min: usize,
    k_max: usize,
    seed: u64,
) -> Result<KSelection, SpectralError> {
    let n = points.nrows();
    if k_min < 2 || k_min > k_max || k_max > n.saturating_sub(1) {
        return Err(SpectralError::InvalidKRange { k_min, k_max, n });
    }

    let normalized = normalize_rows(points);
    let scores: Vec<KScore> = (k_min..=k_max)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| {
            let partition = kmeans(&normalized, k, seed)?;
            let silhouette = quality::silhouette(&normalized, &partition)?;
            Ok(KScore { k, silhouette })
        })
        .collect::<Result<_, SpectralError>>()?;

    let mut chosen = scores[0];
    for &score in &scores[1..] {
        if score.silhouette > chosen.silhouette {
            chosen = score;
        }
    }

    Ok(KSelection {
        chosen_k: chosen.k,
        scores,
    })
}

/// Random-matrix helpers shared by test suites across the crate.
#[cfg(test)]
pub(crate) mod test_support {
    use ndarray::Array2;
    use rand::rngs::StdRng;
    use rand::Rng;

    pub(crate) fn random_symmetric(n: usize, rng: &mut StdRng) -> Array2<f64> {
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let x = rng.random_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    /// Random N x k matrix with orthonormal columns, via Gram-Schmidt.
    pub(crate) fn random_orthonormal(n: usize, k: usize, rng: &mut StdRng) -> Array2<f64> {
        let mut q = Array2::zeros((n, k));
        for j in 0..k {
            let mut col: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for prev in 0..j {
                let dot: f64 = (0..n).map(|i| q[(i, prev)] * col[i]).sum();
                for i in 0..n {
                    col[i] -= dot * q[(i, prev)];
                }
            }
            let norm: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            for i in 0..n {
                q[(i, j)] = col[i] / norm;
            }
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::{random_orthonormal, random_symmetric};
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn trace_quadratic(m: &Array2<f64>, u: &Array2<f64>) -> f64 {
        u.t().dot(m).dot(u).diag().sum()
    }

    #[test]
    fn identity_matrix_gives_orthonormal_pair() {
        let m = Array2::<f64>::eye(3);
        let u = top_k_eigvecs(&m, 2, EmbeddingSource::Consensus).unwrap();
        let gram = u.basis.t().dot(&u.basis);
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expected).abs() < 1e-10);
            }
        }
        assert!((trace_quadratic(&m, &u.basis) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn exchange_matrix_top_eigvec() {
        let m = array![[0.0, 1.0], [1.0, 0.0]];
        let u = top_k_eigvecs(&m, 1, EmbeddingSource::View(0)).unwrap();
        let expected = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u.basis[(0, 0)] - expected).abs() < 1e-12);
        assert!((u.basis[(1, 0)] - expected).abs() < 1e-12);
        assert!((trace_quadratic(&m, &u.basis) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beats_random_orthonormal_competitors() {
        let mut rng = StdRng::seed_from_u64(5);
        let m = random_symmetric(6, &mut rng);
        let u = top_k_eigvecs(&m, 3, EmbeddingSource::Consensus).unwrap();
        let best = trace_quadratic(&m, &u.basis);
        for _ in 0..100 {
            let v = random_orthonormal(6, 3, &mut rng);
            assert!(best >= trace_quadratic(&m, &v) - 1e-9);
        }
    }

    #[test]
    fn rayleigh_trace_matches_eigenvalue_sum() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.random_range(2..=12);
            let k = rng.random_range(1..=n);
            let m = random_symmetric(n, &mut rng);
            let u = top_k_eigvecs(&m, k, EmbeddingSource::Consensus).unwrap();
            let eig = crate::eigen::symmetric_eigen(&m).unwrap();
            let expected: f64 = eig.eigenvalues[..k].iter().sum();
            assert!((trace_quadratic(&m, &u.basis) - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_k_out_of_range() {
        let m = Array2::<f64>::eye(3);
        assert!(matches!(
            top_k_eigvecs(&m, 0, EmbeddingSource::Consensus),
            Err(SpectralError::KOutOfRange { .. })
        ));
        assert!(matches!(
            top_k_eigvecs(&m, 4, EmbeddingSource::Consensus),
            Err(SpectralError::KOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        let m = array![[0.0, 1.0], [0.5, 0.0]];
        assert!(matches!(
            top_k_eigvecs(&m, 1, EmbeddingSource::Consensus),
            Err(SpectralError::NotSymmetric(_))
        ));
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let mut rng = StdRng::seed_from_u64(13);
        let m = random_symmetric(7, &mut rng);
        let a = top_k_eigvecs(&m, 4, EmbeddingSource::Consensus).unwrap();
        let b = top_k_eigvecs(&m, 4, EmbeddingSource::Consensus).unwrap();
        assert_eq!(a.basis, b.basis);
        for col in 0..4 {
            let pivot = (0..7)
                .max_by(|&p, &q| a.basis[(p, col)].abs().total_cmp(&a.basis[(q, col)].abs()))
                .unwrap();
            assert!(a.basis[(pivot, col)] > 0.0);
        }
    }

    fn planted_blobs(
        centers: &[[f64; 2]],
        per_blob: usize,
        spread: f64,
        rng: &mut StdRng,
    ) -> (Array2<f64>, Vec<usize>) {
        let n = centers.len() * per_blob;
        let mut points = Array2::zeros((n, 2));
        let mut truth = Vec::with_capacity(n);
        for (b, c) in centers.iter().enumerate() {
            for p in 0..per_blob {
                let row = b * per_blob + p;
                points[(row, 0)] = c[0] + rng.random_range(-spread..spread);
                points[(row, 1)] = c[1] + rng.random_range(-spread..spread);
                truth.push(b);
            }
        }
        (points, truth)
    }

    #[test]
    fn select_k_finds_three_blobs() {
        // Blobs sit at distinct angles so they stay separated after the
        // row normalization applied by the k-means path.
        let mut rng = StdRng::seed_from_u64(21);
        let centers = [[10.0, 0.0], [0.0, 10.0], [-7.0, -7.0]];
        let (points, _) = planted_blobs(&centers, 6, 0.2, &mut rng);
        let selection = select_k(&points, 2, 8, 42).unwrap();
        assert_eq!(selection.chosen_k, 3);
        assert_eq!(selection.scores.len(), 7);
    }

    #[test]
    fn select_k_finds_two_blobs() {
        let mut rng = StdRng::seed_from_u64(22);
        let centers = [[10.0, 0.0], [-3.0, 9.0]];
        let (points, _) = planted_blobs(&centers, 8, 0.2, &mut rng);
        let selection = select_k(&points, 2, 4, 7).unwrap();
        assert_eq!(selection.chosen_k, 2);
    }

    #[test]
    fn select_k_rejects_bad_range() {
        let points = Array2::<f64>::zeros((5, 2));
        assert!(matches!(
            select_k(&points, 1, 3, 0),
            Err(SpectralError::InvalidKRange { .. })
        ));
        assert!(matches!(
            select_k(&points, 2, 5, 0),
            Err(SpectralError::InvalidKRange { .. })
        ));
    }

    #[test]
    fn same_grouping_ignores_label_names() {
        let a = Partition {
            labels: vec![0, 0, 1, 2],
            k: 3,
            silhouette: None,
            seed: 0,
        };
        let b = Partition {
            labels: vec![2, 2, 0, 1],
            k: 3,
            silhouette: None,
            seed: 9,
        };
        let c = Partition {
            labels: vec![0, 1, 1, 2],
            k: 3,
            silhouette: None,
            seed: 0,
        };
        assert!(a.same_grouping(&b));
        assert!(!a.same_grouping(&c));
    }

    proptest! {
        /// Orthonormality of the produced basis, for any symmetric input.
        #[test]
        fn prop_embedding_orthonormal(seed in 0u64..300) {
            let mut rng = StdRng::seed_from_u64(seed);
            let n = rng.random_range(2..=10);
            let k = rng.random_range(1..=n);
            let m = random_symmetric(n, &mut rng);
            let u = top_k_eigvecs(&m, k, EmbeddingSource::Consensus).unwrap();
            let gram = u.basis.t().dot(&u.basis);
            for i in 0..k {
                for j in 0..k {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((gram[(i, j)] - expected).abs() < 1e-10);
                }
            }
        }
    }
}
