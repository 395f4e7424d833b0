//! Quality evaluation: DTW distance, the average-similarity protocol,
//! k-medoids exemplar selection, and nearest-sample matching.

use rand::Rng;

use crate::data::write_text_atomic;
use crate::error::{Error, Result};
use crate::series::Series;

/// Outcome of a DTW alignment.
///
/// `path` is the optimal warping path as 1-based index pairs from `(1, 1)`
/// to `(n, m)`, monotone with unit steps. `distance` is the square root of
/// the summed squared differences along the path (the root is applied once,
/// to the total).
#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub distance: f64,
    pub path: Vec<(usize, usize)>,
}

/// Unconstrained DTW distance between two series.
pub fn dtw_distance(q: &[f64], c: &[f64]) -> Result<DtwResult> {
    dtw_distance_banded(q, c, None)
}

/// DTW with an optional Sakoe-Chiba band half-width (`None` = unconstrained,
/// the default everywhere in this crate).
pub fn dtw_distance_banded(q: &[f64], c: &[f64], band: Option<usize>) -> Result<DtwResult> {
    if q.is_empty() || c.is_empty() {
        return Err(Error::InvalidArgument(
            "DTW requires non-empty series".into(),
        ));
    }
    let n = q.len();
    let m = c.len();
    let width = m + 1;
    let mut cum = vec![f64::INFINITY; (n + 1) * width];
    cum[0] = 0.0;

    for i in 1..=n {
        let (j_lo, j_hi) = match band {
            Some(w) => {
                // Keep |i - j| <= w after scaling for unequal lengths.
                let center = (i * m).div_ceil(n);
                (center.saturating_sub(w).max(1), (center + w).min(m))
            }
            None => (1, m),
        };
        for j in j_lo..=j_hi {
            let diff = q[i - 1] - c[j - 1];
            let cost = diff * diff;
            let best = cum[(i - 1) * width + j - 1]
                .min(cum[(i - 1) * width + j])
                .min(cum[i * width + j - 1]);
            cum[i * width + j] = cost + best;
        }
    }

    let total = cum[n * width + m];
    if !total.is_finite() {
        return Err(Error::InvalidArgument(
            "DTW band too narrow: no admissible warping path".into(),
        ));
    }

    // Backtrack, preferring the diagonal on ties.
    let mut path = Vec::with_capacity(n + m);
    let mut i = n;
    let mut j = m;
    path.push((i, j));
    while i > 1 || j > 1 {
        let diag = if i > 1 && j > 1 {
            cum[(i - 1) * width + j - 1]
        } else {
            f64::INFINITY
        };
        let up = if i > 1 { cum[(i - 1) * width + j] } else { f64::INFINITY };
        let left = if j > 1 { cum[i * width + j - 1] } else { f64::INFINITY };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();

    Ok(DtwResult {
        distance: total.sqrt(),
        path,
    })
}

/// Plain Euclidean distance between equal-length series.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean and spread of pairwise DTW distances under the evaluation protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub mean: f64,
    /// Population standard deviation of the pairwise distances.
    pub std_dev: f64,
    pub pair_count: usize,
}

/// Average similarity under the brute-force protocol: sample `n` series per
/// group, then evaluate all `n(n-1)/2` within-group pairs (one group) or all
/// `n*n` cross-group pairs (two groups).
pub fn average_similarity(
    group_a: &[Series],
    group_b: Option<&[Series]>,
    n: usize,
    rng: &mut impl Rng,
) -> Result<SimilarityReport> {
    let sample = |group: &[Series], n: usize, rng: &mut dyn rand::RngCore| -> Result<Vec<usize>> {
        if n > group.len() {
            return Err(Error::InvalidArgument(format!(
                "requested {n} samples from a group of {}",
                group.len()
            )));
        }
        let mut indices: Vec<usize> = (0..group.len()).collect();
        // Partial Fisher-Yates: the first n entries are a uniform subset.
        for i in 0..n {
            let j = rng.gen_range(i..indices.len());
            indices.swap(i, j);
        }
        indices.truncate(n);
        Ok(indices)
    };

    let mut distances = Vec::new();
    match group_b {
        None => {
            if n < 2 {
                return Err(Error::InvalidArgument(
                    "within-group similarity needs n >= 2".into(),
                ));
            }
            let idx = sample(group_a, n, rng)?;
            for a in 0..n {
                for b in (a + 1)..n {
                    distances.push(
                        dtw_distance(&group_a[idx[a]].values, &group_a[idx[b]].values)?.distance,
                    );
                }
            }
        }
        Some(group_b) => {
            if n == 0 {
                return Err(Error::InvalidArgument(
                    "cross-group similarity needs n >= 1".into(),
                ));
            }
            let idx_a = sample(group_a, n, rng)?;
            let idx_b = sample(group_b, n, rng)?;
            for &a in &idx_a {
                for &b in &idx_b {
                    distances.push(
                        dtw_distance(&group_a[a].values, &group_b[b].values)?.distance,
                    );
                }
            }
        }
    }

    let count = distances.len();
    let mean = distances.iter().sum::<f64>() / count as f64;
    let var = distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / count as f64;
    Ok(SimilarityReport {
        mean,
        std_dev: var.sqrt(),
        pair_count: count,
    })
}

/// One labeled line of a similarity table.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRow {
    pub group_a: String,
    pub group_b: String,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
}

/// CSV with columns `group_a,group_b,n,mean,std`.
pub fn similarity_csv(rows: &[SimilarityRow]) -> String {
    let mut out = String::from("group_a,group_b,n,mean,std\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.group_a, r.group_b, r.n, r.mean, r.std_dev
        ));
    }
    out
}

pub fn write_similarity_csv(path: &std::path::Path, rows: &[SimilarityRow]) -> Result<()> {
    write_text_atomic(path, &similarity_csv(rows))
}

/// Distance used by [`k_medoids`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Dtw,
    Euclidean,
}

/// Clustering outcome: medoid indices into the input set, a cluster index
/// per input point, and the summed point-to-medoid distance.
#[derive(Debug, Clone, PartialEq)]
pub struct KMedoidsResult {
    pub medoids: Vec<usize>,
    pub assignments: Vec<usize>,
    pub total_cost: f64,
}

/// PAM-style k-medoids: greedy BUILD initialization, then alternate
/// (assign, swap each medoid to the member minimizing within-cluster cost)
/// until no improving swap. Deterministic; ties break toward lower indices.
pub fn k_medoids(set: &[Series], k: usize, distance: DistanceKind) -> Result<KMedoidsResult> {
    let n = set.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k={k} outside 1..={n}"
        )));
    }
    let metric = |a: &Series, b: &Series| -> Result<f64> {
        Ok(match distance {
            DistanceKind::Dtw => dtw_distance(&a.values, &b.values)?.distance,
            DistanceKind::Euclidean => {
                if a.len() != b.len() {
                    return Err(Error::shape(
                        "k_medoids euclidean",
                        format!("length {}", a.len()),
                        format!("{}", b.len()),
                    ));
                }
                euclidean_distance(&a.values, &b.values)
            }
        })
    };

    // Pairwise distance matrix (symmetric, zero diagonal).
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric(&set[i], &set[j])?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    // BUILD: start from the most central point, then greedily add the point
    // that lowers the total assignment cost the most.
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let first = (0..n)
        .min_by(|&a, &b| {
            let ca: f64 = (0..n).map(|j| dist[a * n + j]).sum();
            let cb: f64 = (0..n).map(|j| dist[b * n + j]).sum();
            ca.partial_cmp(&cb).unwrap()
        })
        .unwrap();
    medoids.push(first);
    let mut nearest: Vec<f64> = (0..n).map(|j| dist[first * n + j]).collect();
    while medoids.len() < k {
        let candidate = (0..n)
            .filter(|i| !medoids.contains(i))
            .min_by(|&a, &b| {
                let ca: f64 = (0..n).map(|j| nearest[j].min(dist[a * n + j])).sum();
                let cb: f64 = (0..n).map(|j| nearest[j].min(dist[b * n + j])).sum();
                ca.partial_cmp(&cb).unwrap()
            })
            .unwrap();
        for j in 0..n {
            nearest[j] = nearest[j].min(dist[candidate * n + j]);
        }
        medoids.push(candidate);
    }
    medoids.sort_unstable();

    let assign = |medoids: &[usize]| -> (Vec<usize>, f64) {
        let mut assignment = vec![0usize; n];
        let mut cost = 0.0;
        for j in 0..n {
            let mut best = 0usize;
            let mut best_d = dist[medoids[0] * n + j];
            for (ci, &m) in medoids.iter().enumerate().skip(1) {
                let d = dist[m * n + j];
                if d < best_d {
                    best_d = d;
                    best = ci;
                }
            }
            assignment[j] = best;
            cost += best_d;
        }
        (assignment, cost)
    };

    let (mut assignments, mut total_cost) = assign(&medoids);
    loop {
        let mut changed = false;
        for ci in 0..k {
            let members: Vec<usize> = (0..n).filter(|&j| assignments[j] == ci).collect();
            if members.is_empty() {
                continue;
            }
            let best = members
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let ca: f64 = members.iter().map(|&j| dist[a * n + j]).sum();
                    let cb: f64 = members.iter().map(|&j| dist[b * n + j]).sum();
                    ca.partial_cmp(&cb).unwrap()
                })
                .unwrap();
            if best != medoids[ci] {
                let mut trial = medoids.clone();
                trial[ci] = best;
                let (_, trial_cost) = assign(&trial);
                if trial_cost < total_cost {
                    medoids = trial;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        let (a, c) = assign(&medoids);
        debug_assert!(c <= total_cost + 1e-12);
        assignments = a;
        total_cost = c;
    }

    Ok(KMedoidsResult {
        medoids,
        assignments,
        total_cost,
    })
}

/// Index of the DTW-closest member of `generated`; ties break toward the
/// lowest index.
pub fn nearest_generated(example: &[f64], generated: &[Series]) -> Result<usize> {
    if generated.is_empty() {
        return Err(Error::InvalidArgument(
            "nearest_generated on an empty set".into(),
        ));
    }
    let mut best = 0usize;
    let mut best_d = dtw_distance(example, &generated[0].values)?.distance;
    for (i, s) in generated.iter().enumerate().skip(1) {
        let d = dtw_distance(example, &s.values)?.distance;
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}
