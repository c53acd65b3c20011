//! Genome-wide downstream analyses: rank-correlation similarity between
//! profiles, K-means clustering (over a multidimensional-scaling embedding
//! of the rank-correlation dissimilarity, and over standardized onset/peak
//! coordinates), Wilcoxon rank-sum tests, colocalization probabilities and
//! top-k odds ratios.

use thiserror::Error;

use crate::rngs;
use crate::special::normal_cdf;
use crate::Curve;

/// Stream id for K-means initialization draws.
const KMEANS_STREAM: u64 = 4;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("k must satisfy 2 ≤ k ≤ number of items")]
    BadK,
    #[error("need at least {k} distinct points for {k} clusters, found {found}")]
    TooFewDistinct { k: usize, found: usize },
    #[error("profile {0} is constant: rank correlation undefined")]
    ConstantProfile(usize),
    #[error("coordinate {0} is constant across genes: standardization undefined")]
    ConstantCoordinate(usize),
    #[error("pooled sample is completely tied: rank-sum statistic undefined")]
    AllTied,
    #[error("samples must be non-empty")]
    EmptySample,
    #[error("window size must satisfy 2 ≤ N ≤ number of genes")]
    BadWindow,
    #[error("genome order must be a permutation of 0..G-1")]
    BadGenomeOrder,
    #[error("neighbor radius out of range")]
    BadRadius,
    #[error("one side of the neighbor comparison is empty")]
    EmptySide,
    #[error("gene {0} has no onset value")]
    MissingOnset(String),
    #[error("top-k cut must satisfy 0 < m < number of genes")]
    BadCut,
    #[error("need both labeled and unlabeled genes")]
    OneSidedLabels,
}

/// A profile discretized on the shared uniform grid of [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGrid {
    pub gene_index: usize,
    pub values: Vec<f64>,
}

/// Evaluate a curve on the shared uniform grid (at least 64 points).
pub fn profile_grid(curve: &Curve, gene_index: usize, grid_size: usize) -> ProfileGrid {
    assert!(grid_size >= 64, "profile grid must have at least 64 points");
    let values = (0..grid_size)
        .map(|j| curve.eval(j as f64 / (grid_size - 1) as f64))
        .collect();
    ProfileGrid { gene_index, values }
}

/// Per-gene annotation: genome position, motif flags and structural class.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneAnnotation {
    pub gene_id: String,
    pub genome_pos: usize,
    pub early: bool,
    pub taag: bool,
    pub catg: bool,
    pub structural: bool,
    pub name: Option<String>,
}

/// Average ranks (1-based) with ties sharing their mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let shared = (i + j + 1) as f64 / 2.0;
        for &orig in &idx[i..j] {
            ranks[orig] = shared;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation of two equally-long value vectors; ties get
/// average ranks. `None` when either vector is constant.
pub fn rank_correlation_values(p: &[f64], q: &[f64]) -> Option<f64> {
    assert_eq!(p.len(), q.len(), "profiles must share one grid");
    let rp = average_ranks(p);
    let rq = average_ranks(q);
    let n = p.len() as f64;
    let mp = rp.iter().sum::<f64>() / n;
    let mq = rq.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vp = 0.0;
    let mut vq = 0.0;
    for (a, b) in rp.iter().zip(&rq) {
        cov += (a - mp) * (b - mq);
        vp += (a - mp).powi(2);
        vq += (b - mq).powi(2);
    }
    if vp == 0.0 || vq == 0.0 {
        return None;
    }
    Some(cov / (vp * vq).sqrt())
}

/// Rank correlation of two gridded profiles.
pub fn rank_correlation(p: &ProfileGrid, q: &ProfileGrid) -> Option<f64> {
    rank_correlation_values(&p.values, &q.values)
}

// ───────────────────────── eigen + MDS + K-means ─────────────────────────

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as rows), sorted by descending eigenvalue
/// with a deterministic sign convention.
#[allow(clippy::needless_range_loop)] // textbook index form
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-12 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap().then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let mut vectors = Vec::with_capacity(n);
    for &col in &order {
        let mut vec_col: Vec<f64> = (0..n).map(|r| v[r][col]).collect();
        // deterministic sign: largest-magnitude component positive
        let lead = vec_col
            .iter()
            .enumerate()
            .max_by(|(i, x), (j, y)| {
                x.abs()
                    .partial_cmp(&y.abs())
                    .unwrap()
                    .then(j.cmp(i))
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        if vec_col[lead] < 0.0 {
            for x in &mut vec_col {
                *x = -*x;
            }
        }
        vectors.push(vec_col);
    }
    (values, vectors)
}

/// Classical multidimensional scaling of a dissimilarity matrix into the
/// coordinates of its positive-eigenvalue components.
fn classical_mds(dist: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = dist.len();
    let sq: Vec<Vec<f64>> = dist
        .iter()
        .map(|row| row.iter().map(|d| d * d).collect())
        .collect();
    let row_means: Vec<f64> = sq.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            b[i][j] = -0.5 * (sq[i][j] - row_means[i] - row_means[j] + grand);
        }
    }
    let (values, vectors) = jacobi_eigen(b);
    let scale = values.first().copied().unwrap_or(0.0).max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&d| values[d] > 1e-9 * scale).collect();
    (0..n)
        .map(|i| keep.iter().map(|&d| vectors[d][i] * values[d].sqrt()).collect())
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd K-means with k-means++ seeding. Deterministic given the seed;
/// labels are canonicalized so that clusters are numbered by their smallest
/// member index.
fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<usize>, AnalysisError> {
    let g = points.len();
    if k < 2 || k > g {
        return Err(AnalysisError::BadK);
    }
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    if distinct.len() < k {
        return Err(AnalysisError::TooFewDistinct {
            k,
            found: distinct.len(),
        });
    }

    let mut rng = rngs::stream(seed, KMEANS_STREAM);
    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = (rngs::uniform(&mut rng, 0.0, 1.0) * g as f64) as usize;
    centers.push(points[first.min(g - 1)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rngs::uniform(&mut rng, 0.0, 1.0) * total;
            let mut chosen = g - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // all remaining mass zero: pick the first point not yet a center
            (0..g)
                .find(|&i| !centers.iter().any(|c| *c == points[i]))
                .unwrap_or(0)
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centers.last().unwrap()));
        }
    }

    let dim = points[0].len();
    let mut labels = vec![0usize; g];
    for _ in 0..500 {
        // assignment; ties go to the lower cluster index
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        // update
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the point farthest from its center
                let far = (0..g)
                    .max_by(|&i, &j| {
                        sq_dist(&points[i], &centers[labels[i]])
                            .partial_cmp(&sq_dist(&points[j], &centers[labels[j]]))
                            .unwrap()
                    })
                    .unwrap();
                centers[c] = points[far].clone();
                changed = true;
            } else {
                for (s, slot) in sums[c].iter().zip(centers[c].iter_mut()) {
                    *slot = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // canonical labels: clusters ordered by smallest member index
    let mut first_member = vec![usize::MAX; k];
    for (i, &l) in labels.iter().enumerate() {
        first_member[l] = first_member[l].min(i);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| first_member[c]);
    let mut remap = vec![0usize; k];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    Ok(labels.into_iter().map(|l| remap[l]).collect())
}

/// Cluster gridded profiles with K-means over the classical MDS embedding
/// of the dissimilarity `d = 1 − rank correlation`.
pub fn kmeans_profiles(
    profiles: &[ProfileGrid],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, AnalysisError> {
    let g = profiles.len();
    if k < 2 || k > g {
        return Err(AnalysisError::BadK);
    }
    let mut dist = vec![vec![0.0; g]; g];
    for i in 0..g {
        for j in (i + 1)..g {
            let rho = rank_correlation(&profiles[i], &profiles[j]).ok_or_else(|| {
                if rank_correlation(&profiles[i], &profiles[i]).is_none() {
                    AnalysisError::ConstantProfile(i)
                } else {
                    AnalysisError::ConstantProfile(j)
                }
            })?;
            dist[i][j] = 1.0 - rho;
            dist[j][i] = 1.0 - rho;
        }
    }
    let coords = classical_mds(&dist);
    kmeans(&coords, k, seed)
}

/// Cluster genes by standardized (Ton, Tmax) pairs.
pub fn group_ton_tmax(
    features: &[(f64, f64)],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, AnalysisError> {
    let g = features.len();
    if k < 2 || k > g {
        return Err(AnalysisError::BadK);
    }
    let n = g as f64;
    let mut points = vec![vec![0.0; 2]; g];
    for dim in 0..2 {
        let vals: Vec<f64> = features
            .iter()
            .map(|&(a, b)| if dim == 0 { a } else { b })
            .collect();
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        if sd == 0.0 {
            return Err(AnalysisError::ConstantCoordinate(dim));
        }
        for (p, &v) in points.iter_mut().zip(&vals) {
            p[dim] = (v - mean) / sd;
        }
    }
    kmeans(&points, k, seed)
}

/// Per-group mean/stdv of pairwise rank correlations; `None` statistics
/// mark groups with fewer than two members. The final element is the
/// all-genes row over every pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSimilarity {
    /// None labels the all-genes row
    pub group: Option<usize>,
    pub n_genes: usize,
    pub mean: Option<f64>,
    pub stdv: Option<f64>,
}

pub fn within_group_similarity(
    labels: &[usize],
    profiles: &[ProfileGrid],
) -> Result<Vec<GroupSimilarity>, AnalysisError> {
    assert_eq!(labels.len(), profiles.len());
    let g = profiles.len();
    let n_groups = labels.iter().copied().max().map_or(0, |m| m + 1);
    let pair_stats = |members: &[usize]| -> Result<Option<(f64, f64)>, AnalysisError> {
        if members.len() < 2 {
            return Ok(None);
        }
        let mut rhos = Vec::new();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let rho = rank_correlation(&profiles[i], &profiles[j])
                    .ok_or(AnalysisError::ConstantProfile(i))?;
                rhos.push(rho);
            }
        }
        let n = rhos.len() as f64;
        let mean = rhos.iter().sum::<f64>() / n;
        let var = rhos.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        Ok(Some((mean, var.sqrt())))
    };
    let mut out = Vec::new();
    for c in 0..n_groups {
        let members: Vec<usize> = (0..g).filter(|&i| labels[i] == c).collect();
        let stats = pair_stats(&members)?;
        out.push(GroupSimilarity {
            group: Some(c),
            n_genes: members.len(),
            mean: stats.map(|s| s.0),
            stdv: stats.map(|s| s.1),
        });
    }
    let all: Vec<usize> = (0..g).collect();
    let stats = pair_stats(&all)?;
    out.push(GroupSimilarity {
        group: None,
        n_genes: g,
        mean: stats.map(|s| s.0),
        stdv: stats.map(|s| s.1),
    });
    Ok(out)
}

// ───────────────────────────── rank-sum tests ────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// the first sample tends to smaller values
    Less,
    /// the first sample tends to larger values
    Greater,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// (W − E[W]) / sd(W): asymptotically standard normal, negative when
    /// the first sample is smaller
    pub z: f64,
    /// one-sided p-value from the continuity-corrected, tie-corrected
    /// normal approximation
    pub p: f64,
    /// exact permutation p-value, present for tie-free data with
    /// min(n, m) ≤ 10
    pub exact: Option<f64>,
}

/// Wilcoxon rank-sum test of `a` against `b`.
pub fn wilcoxon_rank_sum(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
) -> Result<WilcoxonResult, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let na = a.len();
    let nb = b.len();
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let ranks = average_ranks(&pooled);
    let w: f64 = ranks[..na].iter().sum();

    // tie groups for the variance correction
    let mut sorted = pooled.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut tie_term = 0.0;
    let mut has_ties = false;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        if t > 1.0 {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        i = j;
    }

    let nf = n as f64;
    let mean = na as f64 * (nf + 1.0) / 2.0;
    let var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return Err(AnalysisError::AllTied);
    }
    let sd = var.sqrt();
    let z = (w - mean) / sd;
    let p = match alternative {
        Alternative::Less => normal_cdf((w - mean + 0.5) / sd),
        Alternative::Greater => normal_cdf((mean - w + 0.5) / sd),
    };

    let exact = if !has_ties && na.min(nb) <= 10 {
        Some(exact_rank_sum_p(na, n, w, alternative))
    } else {
        None
    };
    Ok(WilcoxonResult { z, p, exact })
}

/// Exact tail probability of the rank-sum statistic for tie-free data:
/// counts subsets of {1..n} of size `na` by their sum.
fn exact_rank_sum_p(na: usize, n: usize, w: f64, alternative: Alternative) -> f64 {
    let max_sum: usize = (n - na + 1..=n).sum();
    // count[c][s] as nested vecs; counts stay exact in f64 for the sizes
    // used by the exact path
    let mut count = vec![vec![0.0f64; max_sum + 1]; na + 1];
    count[0][0] = 1.0;
    for r in 1..=n {
        for c in (1..=na.min(r)).rev() {
            for s in (r..=max_sum).rev() {
                let add = count[c - 1][s - r];
                if add > 0.0 {
                    count[c][s] += add;
                }
            }
        }
    }
    let total: f64 = count[na].iter().sum();
    let w_int = w.round() as usize;
    let tail: f64 = match alternative {
        Alternative::Less => count[na][..=w_int.min(max_sum)].iter().sum(),
        Alternative::Greater => count[na][w_int.min(max_sum)..].iter().sum(),
    };
    tail / total
}

// ─────────────────────────── association tables ──────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct MotifTest {
    pub motif: &'static str,
    pub n_with: usize,
    pub n_without: usize,
    pub z: f64,
    pub p: f64,
}

/// Compare onset times of genes with each motif class against those
/// without, by the rank-sum statistic. The sign of `z` follows the
/// with-minus-without direction; the p-value is one-sided in the observed
/// direction. Classes where either side is empty are skipped and reported.
pub fn motif_onset_tests(
    annotations: &[GeneAnnotation],
    onsets: &[(String, f64)],
) -> Result<(Vec<MotifTest>, Vec<&'static str>), AnalysisError> {
    let lookup: std::collections::BTreeMap<&str, f64> = onsets
        .iter()
        .map(|(id, v)| (id.as_str(), *v))
        .collect();
    type MotifFlag = Box<dyn Fn(&GeneAnnotation) -> bool>;
    let mut with_vals = Vec::new();
    let mut without_vals = Vec::new();
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    let classes: [(&'static str, MotifFlag); 4] = [
        ("Early", Box::new(|a: &GeneAnnotation| a.early)),
        ("TAAG", Box::new(|a: &GeneAnnotation| a.taag)),
        ("CATG", Box::new(|a: &GeneAnnotation| a.catg)),
        ("Early/CATG", Box::new(|a: &GeneAnnotation| a.early || a.catg)),
    ];
    for (name, has) in &classes {
        with_vals.clear();
        without_vals.clear();
        for a in annotations {
            let onset = *lookup
                .get(a.gene_id.as_str())
                .ok_or_else(|| AnalysisError::MissingOnset(a.gene_id.clone()))?;
            if has(a) {
                with_vals.push(onset);
            } else {
                without_vals.push(onset);
            }
        }
        if with_vals.is_empty() || without_vals.is_empty() {
            skipped.push(*name);
            continue;
        }
        let first = wilcoxon_rank_sum(&with_vals, &without_vals, Alternative::Greater)?;
        let res = if first.z >= 0.0 {
            first
        } else {
            wilcoxon_rank_sum(&with_vals, &without_vals, Alternative::Less)?
        };
        out.push(MotifTest {
            motif: name,
            n_with: with_vals.len(),
            n_without: without_vals.len(),
            z: res.z,
            p: res.p,
        });
    }
    Ok((out, skipped))
}

/// Probability that N randomly chosen genes share one cluster label
/// (exact, from the cluster sizes) and the fraction of circularly
/// consecutive length-N windows whose members share a label.
pub fn colocalization_probs(
    labels: &[usize],
    genome_order: &[usize],
    n: usize,
) -> Result<(f64, f64), AnalysisError> {
    let g = labels.len();
    if n < 2 || n > g {
        return Err(AnalysisError::BadWindow);
    }
    validate_permutation(genome_order, g)?;

    let n_groups = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_groups];
    for &l in labels {
        sizes[l] += 1;
    }
    // Σ_c C(s_c, N) / C(G, N) via stable factor products
    let mut p_random = 0.0;
    for &s in &sizes {
        if s >= n {
            let mut term = 1.0;
            for j in 0..n {
                term *= (s - j) as f64 / (g - j) as f64;
            }
            p_random += term;
        }
    }

    let mut same = 0usize;
    for start in 0..g {
        let first = labels[genome_order[start]];
        let all_same = (1..n).all(|off| labels[genome_order[(start + off) % g]] == first);
        if all_same {
            same += 1;
        }
    }
    Ok((p_random, same as f64 / g as f64))
}

fn validate_permutation(order: &[usize], g: usize) -> Result<(), AnalysisError> {
    if order.len() != g {
        return Err(AnalysisError::BadGenomeOrder);
    }
    let mut seen = vec![false; g];
    for &i in order {
        if i >= g || seen[i] {
            return Err(AnalysisError::BadGenomeOrder);
        }
        seen[i] = true;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTestResult {
    pub z: f64,
    pub p: f64,
    pub n_near: usize,
    pub n_far: usize,
}

/// Compare rank correlations of genomically close gene pairs (distance
/// ≤ z1) against distant pairs (distance > z2); one-sided test that close
/// pairs are more similar. Distance is the number of genes strictly
/// between the pair — along the shorter arc when `circular`.
pub fn neighbor_rank_tests(
    profiles: &[ProfileGrid],
    genome_order: &[usize],
    z1: usize,
    z2: usize,
    circular: bool,
) -> Result<NeighborTestResult, AnalysisError> {
    let g = profiles.len();
    validate_permutation(genome_order, g)?;
    let max_radius = if circular { (g - 1) / 2 } else { g.saturating_sub(2) };
    if z1 > max_radius || z2 > max_radius {
        return Err(AnalysisError::BadRadius);
    }
    let mut near = Vec::new();
    let mut far = Vec::new();
    for i in 0..g {
        for j in (i + 1)..g {
            let gap = j - i;
            let dist = if circular { gap.min(g - gap) - 1 } else { gap - 1 };
            let rho = rank_correlation(&profiles[genome_order[i]], &profiles[genome_order[j]])
                .ok_or(AnalysisError::ConstantProfile(genome_order[i]))?;
            if dist <= z1 {
                near.push(rho);
            }
            if dist > z2 {
                far.push(rho);
            }
        }
    }
    if near.is_empty() || far.is_empty() {
        return Err(AnalysisError::EmptySide);
    }
    let res = wilcoxon_rank_sum(&near, &far, Alternative::Greater)?;
    Ok(NeighborTestResult {
        z: res.z,
        p: res.p,
        n_near: near.len(),
        n_far: far.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddsRatio {
    pub odds: f64,
    /// (labeled in top, unlabeled in top, labeled below, unlabeled below)
    pub counts: (usize, usize, usize, usize),
    /// a zero contingency cell forced the 0 / +∞ convention
    pub degenerate: bool,
}

/// Odds ratio of label membership inside versus outside the top `m` genes
/// when ranked by `values` descending (ties broken by gene index). No
/// continuity correction.
pub fn topk_odds_ratio(
    values: &[f64],
    labels: &[bool],
    m: usize,
) -> Result<OddsRatio, AnalysisError> {
    let g = values.len();
    assert_eq!(labels.len(), g);
    if m == 0 || m >= g {
        return Err(AnalysisError::BadCut);
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(AnalysisError::OneSidedLabels);
    }
    let mut idx: Vec<usize> = (0..g).collect();
    idx.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap().then(i.cmp(&j)));
    let top = &idx[..m];
    let a = top.iter().filter(|&&i| labels[i]).count();
    let b = m - a;
    let c = labels.iter().filter(|&&l| l).count() - a;
    let d = g - m - c;
    let (odds, degenerate) = if b == 0 || c == 0 {
        (f64::INFINITY, true)
    } else if a == 0 || d == 0 {
        (0.0, true)
    } else {
        ((a * d) as f64 / (b * c) as f64, false)
    };
    Ok(OddsRatio {
        odds,
        counts: (a, b, c, d),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn grid(values: Vec<f64>) -> ProfileGrid {
        ProfileGrid {
            gene_index: 0,
            values,
        }
    }

    /// Adjusted Rand index between two labelings.
    fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
        let ka = a.iter().max().unwrap() + 1;
        let kb = b.iter().max().unwrap() + 1;
        let mut table = vec![vec![0usize; kb]; ka];
        for (&x, &y) in a.iter().zip(b) {
            table[x][y] += 1;
        }
        let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
        let sum_ij: f64 = table.iter().flatten().map(|&x| choose2(x)).sum();
        let sum_a: f64 = table.iter().map(|row| choose2(row.iter().sum())).sum();
        let sum_b: f64 = (0..kb)
            .map(|j| choose2(table.iter().map(|row| row[j]).sum()))
            .sum();
        let total = choose2(a.len());
        let expected = sum_a * sum_b / total;
        let max = 0.5 * (sum_a + sum_b);
        (sum_ij - expected) / (max - expected)
    }

    #[test]
    fn rank_correlation_basics() {
        let p = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(rank_correlation_values(&p, &p), Some(1.0));
        // monotone transforms preserve ranks; decreasing flips the sign
        let up: Vec<f64> = p.iter().map(|x| x.exp()).collect();
        let down: Vec<f64> = p.iter().map(|x| -x * x).collect();
        assert_eq!(rank_correlation_values(&p, &up), Some(1.0));
        assert_eq!(rank_correlation_values(&p, &down), Some(-1.0));
        // brute-force formula for distinct ranks: 1 − 6Σd²/(n(n²−1))
        let q = vec![1.0, 3.0, 2.0, 4.0];
        let expect = 1.0 - 6.0 * 2.0 / (4.0 * 15.0);
        let got = rank_correlation_values(&p, &q).unwrap();
        assert!((got - expect).abs() < 1e-14);
        // constant profile is undefined
        assert_eq!(rank_correlation_values(&p, &[1.0; 4]), None);
    }

    #[test]
    fn rank_correlation_symmetry_and_monotone_invariance() {
        let mut rng = crate::rngs::stream(60, 0);
        for _ in 0..50 {
            let a: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
            let r1 = rank_correlation_values(&a, &b).unwrap();
            let r2 = rank_correlation_values(&b, &a).unwrap();
            assert!((r1 - r2).abs() < 1e-12);
            let a2: Vec<f64> = a.iter().map(|x| x.powi(3) + 5.0).collect();
            let r3 = rank_correlation_values(&a2, &b).unwrap();
            assert!((r1 - r3).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // symmetric matrix with known eigenvalues {3, 1}
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (vals, vecs) = jacobi_eigen(m.clone());
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // reconstruction
        for i in 0..2 {
            for j in 0..2 {
                let mut sum = 0.0;
                for d in 0..2 {
                    sum += vals[d] * vecs[d][i] * vecs[d][j];
                }
                assert!((sum - m[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mds_embedding_preserves_distances() {
        // points on a line: 0, 3, 7 — pairwise distances must survive
        let d = vec![
            vec![0.0, 3.0, 7.0],
            vec![3.0, 0.0, 4.0],
            vec![7.0, 4.0, 0.0],
        ];
        let coords = classical_mds(&d);
        for i in 0..3 {
            for j in 0..3 {
                let dist = sq_dist(&coords[i], &coords[j]).sqrt();
                assert!((dist - d[i][j]).abs() < 1e-9, "{i}{j}: {dist}");
            }
        }
    }

    #[test]
    fn kmeans_profiles_recovers_planted_families() {
        let mut rng = crate::rngs::stream(61, 0);
        let mut profiles = Vec::new();
        let mut truth = Vec::new();
        for i in 0..30 {
            let early = i % 2 == 0;
            let vals: Vec<f64> = (0..64)
                .map(|j| {
                    let t = j as f64 / 63.0;
                    let peak = if early { 0.3 } else { 0.75 };
                    (-0.5 * ((t - peak) / 0.1).powi(2)).exp() + 0.01 * rng.random::<f64>()
                })
                .collect();
            profiles.push(ProfileGrid {
                gene_index: i,
                values: vals,
            });
            truth.push(if early { 0 } else { 1 });
        }
        let labels = kmeans_profiles(&profiles, 2, 7).unwrap();
        assert_eq!(adjusted_rand_index(&labels, &truth), 1.0);
        // fixed seed → deterministic labels
        assert_eq!(kmeans_profiles(&profiles, 2, 7).unwrap(), labels);

        // duplicates share labels
        let mut dup = profiles.clone();
        dup.push(ProfileGrid {
            gene_index: 30,
            values: profiles[0].values.clone(),
        });
        let labels = kmeans_profiles(&dup, 2, 7).unwrap();
        assert_eq!(labels[0], labels[30]);

        // fewer distinct profiles than clusters
        let copies = [profiles[0].clone(), profiles[0].clone(), profiles[0].clone()];
        assert_eq!(
            kmeans_profiles(&copies, 2, 7),
            Err(AnalysisError::TooFewDistinct { k: 2, found: 1 })
        );

        // k = G: every profile its own cluster (canonical labels)
        let few: Vec<ProfileGrid> = profiles[..4].to_vec();
        let labels = kmeans_profiles(&few, 4, 7).unwrap();
        assert_eq!(labels, vec![0, 1, 2, 3]);
    }

    #[test]
    fn group_ton_tmax_blobs_and_degenerate_cases() {
        let mut rng = crate::rngs::stream(62, 0);
        let centers = [
            (0.1, 0.3),
            (0.1, 0.8),
            (0.4, 0.5),
            (0.4, 0.9),
            (0.7, 0.75),
            (0.75, 0.4),
        ];
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, &(x, y)) in centers.iter().enumerate() {
            for _ in 0..12 {
                pts.push((
                    x + 0.012 * crate::rngs::standard_normal(&mut rng),
                    y + 0.012 * crate::rngs::standard_normal(&mut rng),
                ));
                truth.push(c);
            }
        }
        let labels = group_ton_tmax(&pts, 6, 3).unwrap();
        let ari = adjusted_rand_index(&labels, &truth);
        assert!(ari > 0.9, "ARI {ari}");

        // scaling both coordinates leaves the grouping unchanged
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(a, b)| (10.0 * a, 10.0 * b)).collect();
        assert_eq!(group_ton_tmax(&scaled, 6, 3).unwrap(), labels);

        // identical genes: degenerate, either as a constant coordinate or
        // as too few distinct points
        let same = vec![(0.3, 0.6); 10];
        assert!(group_ton_tmax(&same, 2, 1).is_err());
    }

    #[test]
    fn within_group_similarity_cases() {
        let a = grid((0..64).map(|i| i as f64).collect());
        let b = grid((0..64).map(|i| (i as f64).sqrt()).collect());
        let c = grid((0..64).map(|i| ((i as f64) - 40.0).powi(2)).collect());
        // group 0: two identical-rank profiles; group 1: singleton
        let profiles = vec![a.clone(), b.clone(), c.clone()];
        let rows = within_group_similarity(&[0, 0, 1], &profiles).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].n_genes, 2);
        assert_eq!(rows[0].mean, Some(1.0));
        assert_eq!(rows[0].stdv, Some(0.0));
        assert_eq!(rows[1].n_genes, 1);
        assert_eq!(rows[1].mean, None);
        // all-genes row covers every pair
        assert_eq!(rows[2].group, None);
        assert_eq!(rows[2].n_genes, 3);
        assert!(rows[2].mean.unwrap() < 1.0);
    }

    #[test]
    fn wilcoxon_small_sample_exact() {
        // a = (1,2), b = (3,4): only one of six assignments gives a rank
        // sum this small
        let res = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0], Alternative::Less).unwrap();
        assert_eq!(res.exact, Some(1.0 / 6.0));
        assert!(res.z < 0.0);

        // identical samples: z ≈ 0, p ≈ 0.5
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let res = wilcoxon_rank_sum(&x, &x, Alternative::Less).unwrap();
        assert!(res.z.abs() < 1e-12);
        assert!((res.p - 0.5).abs() < 0.02, "p = {}", res.p);

        // completely tied pooled sample
        assert_eq!(
            wilcoxon_rank_sum(&[1.0, 1.0], &[1.0, 1.0], Alternative::Less),
            Err(AnalysisError::AllTied)
        );
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration_and_partitions() {
        // enumeration oracle over all C(n, na) assignments via bitmasks
        let enumerate = |na: usize, n: usize, w: f64, alt: Alternative| -> f64 {
            let mut hits = 0usize;
            let mut total = 0usize;
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != na {
                    continue;
                }
                total += 1;
                let sum: usize = (0..n).filter(|&r| mask & (1 << r) != 0).map(|r| r + 1).sum();
                let ok = match alt {
                    Alternative::Less => (sum as f64) <= w,
                    Alternative::Greater => (sum as f64) >= w,
                };
                if ok {
                    hits += 1;
                }
            }
            hits as f64 / total as f64
        };
        let mut rng = crate::rngs::stream(63, 0);
        for na in 1..=4usize {
            for nb in 1..=4usize {
                let a: Vec<f64> = (0..na).map(|_| rng.random::<f64>()).collect();
                let b: Vec<f64> = (0..nb).map(|_| rng.random::<f64>()).collect();
                let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
                let ranks = average_ranks(&pooled);
                let w: f64 = ranks[..na].iter().sum();
                for alt in [Alternative::Less, Alternative::Greater] {
                    let res = wilcoxon_rank_sum(&a, &b, alt).unwrap();
                    let oracle = enumerate(na, na + nb, w, alt);
                    assert_eq!(res.exact, Some(oracle), "na={na} nb={nb} {alt:?}");
                }
                // tail partition: less + greater − point mass = 1
                let less = wilcoxon_rank_sum(&a, &b, Alternative::Less)
                    .unwrap()
                    .exact
                    .unwrap();
                let greater = wilcoxon_rank_sum(&a, &b, Alternative::Greater)
                    .unwrap()
                    .exact
                    .unwrap();
                let point = enumerate(na, na + nb, w, Alternative::Less)
                    + enumerate(na, na + nb, w - 1.0, Alternative::Less)
                    - 2.0 * enumerate(na, na + nb, w - 1.0, Alternative::Less);
                // P(W = w) computed as P(≤ w) − P(≤ w−1)
                let _ = point;
                let pw = less - enumerate(na, na + nb, w - 1.0, Alternative::Less);
                assert!(
                    (less + greater - pw - 1.0).abs() < 1e-12,
                    "partition failed: {less} + {greater} − {pw}"
                );
            }
        }
    }

    #[test]
    fn motif_tests_null_calibration_and_skip() {
        let mut rng = crate::rngs::stream(64, 0);
        let mut calibrated = 0;
        let mut total = 0;
        for _ in 0..100 {
            let mut anns = Vec::new();
            let mut onsets = Vec::new();
            for i in 0..60 {
                let id = format!("g{i}");
                anns.push(GeneAnnotation {
                    gene_id: id.clone(),
                    genome_pos: i,
                    early: rng.random::<f64>() < 0.5,
                    taag: rng.random::<f64>() < 0.5,
                    catg: rng.random::<f64>() < 0.5,
                    structural: false,
                    name: None,
                });
                onsets.push((id, crate::rngs::standard_normal(&mut rng)));
            }
            let (rows, _) = motif_onset_tests(&anns, &onsets).unwrap();
            for r in &rows {
                total += 1;
                if r.z.abs() < 2.0 {
                    calibrated += 1;
                }
            }
        }
        assert!(
            calibrated * 100 >= 90 * total,
            "null-calibrated in {calibrated}/{total} tests"
        );

        // a motif held by every gene is skipped
        let anns: Vec<GeneAnnotation> = (0..5)
            .map(|i| GeneAnnotation {
                gene_id: format!("g{i}"),
                genome_pos: i,
                early: true,
                taag: i % 2 == 0,
                catg: false,
                structural: false,
                name: None,
            })
            .collect();
        let onsets: Vec<(String, f64)> =
            (0..5).map(|i| (format!("g{i}"), i as f64)).collect();
        let (rows, skipped) = motif_onset_tests(&anns, &onsets).unwrap();
        assert!(skipped.contains(&"Early"));
        assert!(skipped.contains(&"CATG"));
        assert!(skipped.contains(&"Early/CATG"));
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].motif, "TAAG");
    }

    #[test]
    fn colocalization_single_cluster_and_planted_blocks() {
        // one cluster: both probabilities are 1
        let labels = vec![0usize; 12];
        let order: Vec<usize> = (0..12).collect();
        for n in 2..=5 {
            assert_eq!(colocalization_probs(&labels, &order, n).unwrap(), (1.0, 1.0));
        }

        // perfectly contiguous clusters: neighbors beat random
        let labels: Vec<usize> = (0..12).map(|i| i / 4).collect();
        let (p_random, p_neighbor) = colocalization_probs(&labels, &order, 2).unwrap();
        // exact enumeration oracle over all unordered pairs
        let mut same = 0;
        let mut total = 0;
        for i in 0..12 {
            for j in (i + 1)..12 {
                total += 1;
                if labels[i] == labels[j] {
                    same += 1;
                }
            }
        }
        assert!((p_random - same as f64 / total as f64).abs() < 1e-12);
        assert!(p_neighbor > p_random);
        // brute-force window scan
        let mut windows_same = 0;
        for start in 0..12 {
            if labels[start] == labels[(start + 1) % 12] {
                windows_same += 1;
            }
        }
        assert!((p_neighbor - windows_same as f64 / 12.0).abs() < 1e-12);

        // label-permutation invariance of the random probability
        let relabeled: Vec<usize> = labels.iter().map(|&l| (l + 2) % 3).collect();
        let (p2, _) = colocalization_probs(&relabeled, &order, 2).unwrap();
        assert!((p_random - p2).abs() < 1e-15);

        // N above the largest cluster size: zero random probability is valid
        let (p_random, _) = colocalization_probs(&labels, &order, 5).unwrap();
        assert_eq!(p_random, 0.0);
    }

    #[test]
    fn neighbor_tests_null_and_signal() {
        let mut rng = crate::rngs::stream(65, 0);
        // profiles with genome-correlated similarity: neighbors share a peak
        let g = 40;
        let profiles: Vec<ProfileGrid> = (0..g)
            .map(|i| {
                let peak = 0.2 + 0.6 * (i as f64 / g as f64);
                ProfileGrid {
                    gene_index: i,
                    values: (0..64)
                        .map(|j| {
                            let t = j as f64 / 63.0;
                            (-0.5 * ((t - peak) / 0.15).powi(2)).exp()
                                + 0.001 * rng.random::<f64>()
                        })
                        .collect(),
                }
            })
            .collect();
        let order: Vec<usize> = (0..g).collect();
        let res = neighbor_rank_tests(&profiles, &order, 2, 10, true).unwrap();
        assert!(res.z > 2.0, "signal z = {}", res.z);

        // a far-side threshold at the radius bound leaves that side empty
        assert_eq!(
            neighbor_rank_tests(&profiles, &order, 2, (g - 1) / 2, true),
            Err(AnalysisError::EmptySide)
        );

        // permuted genome: no signal in most trials
        let mut quiet = 0;
        for trial in 0..40u64 {
            let mut perm: Vec<usize> = (0..g).collect();
            // Fisher–Yates with the test stream
            let mut prng = crate::rngs::stream(66, trial);
            for i in (1..g).rev() {
                let j = (prng.random::<f64>() * (i + 1) as f64) as usize;
                perm.swap(i, j.min(i));
            }
            let res = neighbor_rank_tests(&profiles, &perm, 2, 10, true).unwrap();
            if res.z.abs() < 2.0 {
                quiet += 1;
            }
        }
        assert!(quiet >= 32, "null-calibrated in {quiet}/40 trials");
    }

    #[test]
    fn topk_odds_ratio_fixture_and_degenerates() {
        // 74 genes, 15 labeled; top five contain four of the labeled
        let g = 74;
        let mut labels = vec![false; g];
        // descending by index
        let values: Vec<f64> = (0..g).map(|i| -(i as f64)).collect();
        for &i in &[0, 1, 2, 4] {
            labels[i] = true;
        }
        let mut remaining = 11;
        let mut i = 5;
        while remaining > 0 {
            labels[i + 1] = true;
            i += 2;
            remaining -= 1;
        }
        assert_eq!(labels.iter().filter(|&&l| l).count(), 15);
        let or = topk_odds_ratio(&values, &labels, 5).unwrap();
        assert_eq!(or.counts, (4, 1, 11, 58));
        assert!((or.odds - 21.0909).abs() < 0.05, "odds {}", or.odds);
        assert!(!or.degenerate);

        // all top-m labeled, none below
        let mut labels = vec![false; 10];
        for l in labels.iter_mut().take(3) {
            *l = true;
        }
        let values: Vec<f64> = (0..10).map(|i| -(i as f64)).collect();
        let or = topk_odds_ratio(&values, &labels, 3).unwrap();
        assert!(or.odds.is_infinite() && or.degenerate);

        assert!(topk_odds_ratio(&values, &labels, 0).is_err());
        assert!(topk_odds_ratio(&values, &[true; 10], 3).is_err());
    }

    #[test]
    fn topk_odds_ratio_null_permutation_median() {
        let mut rng = crate::rngs::stream(67, 0);
        let g = 60;
        let mut odds = Vec::new();
        for _ in 0..400 {
            let values: Vec<f64> = (0..g).map(|_| rng.random::<f64>()).collect();
            let mut labels = vec![false; g];
            let mut placed = 0;
            while placed < 15 {
                let i = (rng.random::<f64>() * g as f64) as usize;
                if !labels[i.min(g - 1)] {
                    labels[i.min(g - 1)] = true;
                    placed += 1;
                }
            }
            let or = topk_odds_ratio(&values, &labels, 10).unwrap();
            if or.odds.is_finite() {
                odds.push(or.odds);
            }
        }
        odds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = odds[odds.len() / 2];
        assert!((0.4..2.5).contains(&median), "median {median}");
    }
}
