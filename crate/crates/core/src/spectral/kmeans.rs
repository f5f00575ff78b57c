//! Lloyd's k-means with k-means++ seeding on L2-normalized rows.

use super::{Partition, SpectralError};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N_RESTARTS: usize = 10;
const MAX_ITERATIONS: usize = 300;

/// L2-normalize each row; zero rows are left as zero.
pub fn normalize_rows(points: &Array2<f64>) -> Array2<f64> {
    let mut out = points.clone();
    for mut row in out.rows_mut() {
        let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|x| x / norm);
        }
    }
    out
}

/// Derive an independent, portable RNG stream for one (seed, k, restart)
/// triple. SplitMix64 mixing keeps nearby seeds uncorrelated.
fn restart_rng(seed: u64, k: usize, restart: usize) -> ChaCha8Rng {
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(1 + k as u64))
        .wrapping_add(0xbf58_476d_1ce4_e5b9u64.wrapping_mul(1 + restart as u64));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Cluster the rows of `points` into `k` groups.
///
/// Rows are L2-normalized first (zero rows stay zero). Runs 10 restarts of
/// k-means++ seeding followed by Lloyd iteration (at most 300 per restart),
/// keeps the labeling with the lowest within-cluster sum of squares, and
/// repairs empty clusters by moving in the point farthest from its
/// centroid. Deterministic for a fixed seed.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64) -> Result<Partition, SpectralError> {
    let n = points.nrows();
    if k == 0 || n < k {
        return Err(SpectralError::TooFewPoints { n, k });
    }

    let data = normalize_rows(points);
    let rows: Vec<&[f64]> = (0..n)
        .map(|i| data.row(i).to_slice().expect("standard layout"))
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..N_RESTARTS {
        let mut rng = restart_rng(seed, k, restart);
        let (labels, wcss) = lloyd(&rows, k, &mut rng);
        let better = match &best {
            None => true,
            Some((best_wcss, _)) => wcss < *best_wcss,
        };
        if better {
            best = Some((wcss, labels));
        }
    }

    let (_, labels) = best.expect("at least one restart");
    Ok(Partition {
        labels,
        k,
        silhouette: None,
        seed,
    })
}

fn lloyd(rows: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = rows.len();
    let dim = rows[0].len();

    let mut centroids = plus_plus_init(rows, k, rng);
    let mut labels = vec![0usize; n];

    for _ in 0..MAX_ITERATIONS {
        // Assignment step.
        let mut changed = false;
        for (i, row) in rows.iter().enumerate() {
            let mut best_cluster = 0;
            let mut best_dist = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let dist = squared_distance(row, centroid);
                if dist < best_dist {
                    best_dist = dist;
                    best_cluster = c;
                }
            }
            if labels[i] != best_cluster {
                labels[i] = best_cluster;
                changed = true;
            }
        }

        // Update step.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, row) in rows.iter().enumerate() {
            counts[labels[i]] += 1;
            for (d, &x) in row.iter().enumerate() {
                sums[labels[i]][d] += x;
            }
        }

        // Repair empty clusters: hand each one the point currently
        // farthest from its centroid (ties to the lowest index).
        for cluster in 0..k {
            if counts[cluster] > 0 {
                continue;
            }
            let mut farthest = usize::MAX;
            let mut farthest_dist = -1.0;
            for (i, row) in rows.iter().enumerate() {
                if counts[labels[i]] <= 1 {
                    continue;
                }
                let dist = squared_distance(row, &centroids[labels[i]]);
                if dist > farthest_dist {
                    farthest_dist = dist;
                    farthest = i;
                }
            }
            if farthest == usize::MAX {
                continue;
            }
            let old = labels[farthest];
            counts[old] -= 1;
            for (d, &x) in rows[farthest].iter().enumerate() {
                sums[old][d] -= x;
            }
            labels[farthest] = cluster;
            counts[cluster] = 1;
            sums[cluster].copy_from_slice(rows[farthest]);
            changed = true;
        }

        for cluster in 0..k {
            if counts[cluster] > 0 {
                for d in 0..dim {
                    centroids[cluster][d] = sums[cluster][d] / counts[cluster] as f64;
                }
            }
        }

        if !changed {
            break;
        }
    }

    let wcss = rows
        .iter()
        .enumerate()
        .map(|(i, row)| squared_distance(row, &centroids[labels[i]]))
        .sum();
    (labels, wcss)
}

/// k-means++ seeding: first centroid uniform, later ones sampled with
/// probability proportional to the squared distance to the nearest chosen
/// centroid.
fn plus_plus_init(rows: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(rows[rng.random_range(0..n)].to_vec());

    let mut min_dist: Vec<f64> = rows
        .iter()
        .map(|row| squared_distance(row, &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = min_dist.iter().sum();
        let next = if total > 0.0 {
            let threshold = rng.random_range(0.0..1.0) * total;
            let mut cumulative = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in min_dist.iter().enumerate() {
                cumulative += d;
                if cumulative >= threshold {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with a centroid; any choice is as good.
            rng.random_range(0..n)
        };
        centroids.push(rows[next].to_vec());
        for (i, row) in rows.iter().enumerate() {
            let d = squared_distance(row, centroids.last().unwrap());
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }
    centroids
}
