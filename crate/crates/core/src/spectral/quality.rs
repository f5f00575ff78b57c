//! Clustering-quality metrics: silhouette score and adjusted Rand index.

use super::{Partition, SpectralError};
use ndarray::Array2;

/// Mean silhouette score of a labeling, with Euclidean distances.
///
/// Per point: `(b - a) / max(a, b)` where `a` is the mean distance to the
/// point's own cluster and `b` the smallest mean distance to any other
/// cluster. Singleton clusters contribute 0 per point, as does the
/// degenerate case `a = b = 0`.
pub fn silhouette(points: &Array2<f64>, partition: &Partition) -> Result<f64, SpectralError> {
    let n = points.nrows();
    if n < 3 {
        return Err(SpectralError::TooFewSilhouettePoints(n));
    }
    if partition.k < 2 {
        return Err(SpectralError::TooFewClusters(partition.k));
    }
    let sizes = partition.cluster_sizes();
    let populated = sizes.iter().filter(|&&s| s > 0).count();
    if populated < 2 {
        return Err(SpectralError::TooFewClusters(populated));
    }

    let dist = |i: usize, j: usize| -> f64 {
        let mut sum = 0.0;
        for d in 0..points.ncols() {
            let diff = points[(i, d)] - points[(j, d)];
            sum += diff * diff;
        }
        sum.sqrt()
    };

    let mut total = 0.0;
    for i in 0..n {
        let own = partition.labels[i];
        if sizes[own] == 1 {
            continue; // contributes 0
        }

        // Mean distance per cluster in one pass.
        let mut dist_sums = vec![0.0; partition.k];
        for j in 0..n {
            if j != i {
                dist_sums[partition.labels[j]] += dist(i, j);
            }
        }

        let a = dist_sums[own] / (sizes[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for cluster in 0..partition.k {
            if cluster != own && sizes[cluster] > 0 {
                b = b.min(dist_sums[cluster] / sizes[cluster] as f64);
            }
        }

        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }

    Ok(total / n as f64)
}

/// Adjusted Rand index between two labelings of the same points.
///
/// 1 for identical groupings, about 0 for independent ones; can be
/// negative for systematic disagreement. Invariant to renaming clusters.
pub fn adjusted_rand_index(a: &Partition, b: &Partition) -> Result<f64, SpectralError> {
    if a.labels.len() != b.labels.len() {
        return Err(SpectralError::PartitionLengthMismatch(
            a.labels.len(),
            b.labels.len(),
        ));
    }
    let n = a.labels.len();
    let choose2 = |x: usize| -> f64 { (x as f64) * (x as f64 - 1.0) / 2.0 };

    let mut table = vec![vec![0usize; b.k]; a.k];
    let mut row_sums = vec![0usize; a.k];
    let mut col_sums = vec![0usize; b.k];
    for i in 0..n {
        table[a.labels[i]][b.labels[i]] += 1;
        row_sums[a.labels[i]] += 1;
        col_sums[b.labels[i]] += 1;
    }

    let index: f64 = table
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| choose2(c))
        .sum();
    let sum_rows: f64 = row_sums.iter().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = col_sums.iter().map(|&c| choose2(c)).sum();
    let total_pairs = choose2(n);

    let expected = sum_rows * sum_cols / total_pairs;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denom = max_index - expected;
    if denom.abs() < 1e-15 {
        // Both partitions are trivial (all singletons or one cluster);
        // they agree by construction.
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn partition(labels: Vec<usize>, k: usize) -> Partition {
        Partition {
            labels,
            k,
            silhouette: None,
            seed: 0,
        }
    }

    #[test]
    fn two_tight_far_pairs_score_high() {
        let points = array![[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]];
        let p = partition(vec![0, 0, 1, 1], 2);
        let score = silhouette(&points, &p).unwrap();
        assert!(score > 0.9, "score = {score}");
    }

    #[test]
    fn coincident_points_score_zero() {
        let points = Array2::<f64>::zeros((4, 2));
        let p = partition(vec![0, 0, 1, 1], 2);
        let score = silhouette(&points, &p).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn random_labels_on_one_blob_score_near_zero() {
        let mut rng = StdRng::seed_from_u64(2);
        let mut points = Array2::zeros((30, 2));
        for i in 0..30 {
            points[(i, 0)] = rng.random_range(-1.0..1.0);
            points[(i, 1)] = rng.random_range(-1.0..1.0);
        }
        let labels: Vec<usize> = (0..30).map(|_| rng.random_range(0..2)).collect();
        let p = partition(labels, 2);
        let score = silhouette(&points, &p).unwrap();
        assert!(score.abs() < 0.2, "score = {score}");
    }

    #[test]
    fn silhouette_matches_brute_force_oracle() {
        let mut rng = StdRng::seed_from_u64(3);
        for trial in 0..20 {
            let n = rng.random_range(4..=12);
            let k = rng.random_range(2..=3);
            let mut points = Array2::zeros((n, 2));
            for i in 0..n {
                points[(i, 0)] = rng.random_range(-2.0..2.0);
                points[(i, 1)] = rng.random_range(-2.0..2.0);
            }
            // Ensure at least two populated clusters.
            let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
            for label in labels.iter_mut() {
                if rng.random_range(0.0..1.0) < 0.3 {
                    *label = rng.random_range(0..k);
                }
            }
            let populated: std::collections::HashSet<_> = labels.iter().collect();
            if populated.len() < 2 {
                continue;
            }
            let p = partition(labels.clone(), k);

            // Independent per-point evaluation straight from the formula.
            let dist = |i: usize, j: usize| -> f64 {
                (0..2usize)
                    .map(|d| {
                        let diff: f64 = points[(i, d)] - points[(j, d)];
                        diff * diff
                    })
                    .sum::<f64>()
                    .sqrt()
            };
            let mut expected = 0.0;
            for i in 0..n {
                let own = labels[i];
                let own_others: Vec<usize> =
                    (0..n).filter(|&j| j != i && labels[j] == own).collect();
                if own_others.is_empty() {
                    continue;
                }
                let a =
                    own_others.iter().map(|&j| dist(i, j)).sum::<f64>() / own_others.len() as f64;
                let mut b = f64::INFINITY;
                for c in 0..k {
                    if c == own {
                        continue;
                    }
                    let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                    if members.is_empty() {
                        continue;
                    }
                    b = b.min(
                        members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64,
                    );
                }
                if a.max(b) > 0.0 {
                    expected += (b - a) / a.max(b);
                }
            }
            expected /= n as f64;

            let got = silhouette(&points, &p).unwrap();
            assert!(
                (got - expected).abs() < 1e-12,
                "trial {trial}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn per_point_scores_bounded() {
        // Mean of values in [-1, 1] stays in [-1, 1]; sample a few layouts.
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.random_range(4..=15);
            let mut points = Array2::zeros((n, 3));
            for i in 0..n {
                for d in 0..3 {
                    points[(i, d)] = rng.random_range(-5.0..5.0);
                }
            }
            let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let score = silhouette(&points, &partition(labels, 3)).unwrap();
            assert!((-1.0..=1.0).contains(&score));
        }
    }

    #[test]
    fn silhouette_rejects_single_cluster() {
        let points = Array2::<f64>::zeros((4, 2));
        assert!(matches!(
            silhouette(&points, &partition(vec![0, 0, 0, 0], 1)),
            Err(SpectralError::TooFewClusters(1))
        ));
    }

    #[test]
    fn ari_identical_partitions() {
        let a = partition(vec![0, 0, 1, 1, 2], 3);
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ari_invariant_to_renaming() {
        let a = partition(vec![0, 0, 1, 1, 2, 2], 3);
        let b = partition(vec![2, 2, 0, 0, 1, 1], 3);
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn ari_hand_evaluated_cross_partition() {
        // 2x2 contingency table of all ones gives ARI = -0.5.
        let a = partition(vec![0, 0, 1, 1], 2);
        let b = partition(vec![0, 1, 0, 1], 2);
        let ari = adjusted_rand_index(&a, &b).unwrap();
        assert!((ari + 0.5).abs() < 1e-14, "ari = {ari}");
    }

    #[test]
    fn ari_rejects_length_mismatch() {
        let a = partition(vec![0, 1], 2);
        let b = partition(vec![0, 1, 0], 2);
        assert!(matches!(
            adjusted_rand_index(&a, &b),
            Err(SpectralError::PartitionLengthMismatch(2, 3))
        ));
    }

    #[test]
    fn ari_matches_contingency_oracle() {
        // Independent recomputation straight from pair counts.
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.random_range(4..=20);
            let ka = rng.random_range(2..=4);
            let kb = rng.random_range(2..=4);
            let la: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
            let lb: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();

            // Count agreeing/disagreeing pairs directly.
            let mut same_same = 0.0f64;
            let mut same_a = 0.0f64;
            let mut same_b = 0.0f64;
            let mut pairs = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs += 1.0;
                    let sa = la[i] == la[j];
                    let sb = lb[i] == lb[j];
                    if sa {
                        same_a += 1.0;
                    }
                    if sb {
                        same_b += 1.0;
                    }
                    if sa && sb {
                        same_same += 1.0;
                    }
                }
            }
            let expected_index = same_a * same_b / pairs;
            let max_index = 0.5 * (same_a + same_b);
            if (max_index - expected_index).abs() < 1e-15 {
                continue;
            }
            let oracle = (same_same - expected_index) / (max_index - expected_index);

            let got = adjusted_rand_index(&partition(la, ka), &partition(lb, kb)).unwrap();
            assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
        }
    }

    proptest! {
        /// ARI is 1 under any relabeling of the same grouping.
        #[test]
        fn prop_ari_relabeling_invariance(
            labels in prop::collection::vec(0usize..4, 4..30),
            shift in 1usize..4,
        ) {
            let k = 4;
            let relabeled: Vec<usize> = labels.iter().map(|&l| (l + shift) % k).collect();
            let a = partition(labels, k);
            let b = partition(relabeled, k);
            let ari = adjusted_rand_index(&a, &b).unwrap();
            prop_assert!((ari - 1.0).abs() < 1e-12);
        }
    }
}
