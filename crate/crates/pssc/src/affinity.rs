//! Affinity-matrix construction from the self-expression coefficients
//! (truncated SVD recipe) and normalized spectral clustering.

use crate::error::{PsscError, Result};
use crate::graph::{normalized_laplacian, similarity_from_coeff, DEGREE_EPS};
use crate::linalg::{eigh_sym, svd, Mat, SeededRng};

#[derive(Debug, Clone)]
pub struct AffinityConfig {
    /// Cluster count.
    pub k: usize,
    /// Assumed per-cluster subspace dimension; sets m = k·q + 1.
    pub q: usize,
    /// Elementwise exponent applied to |ZZᵀ|.
    pub alpha_exp: f64,
    pub kmeans_restarts: usize,
    pub seed: u64,
    /// Scale rows of the truncated factor to unit norm before the outer
    /// product (zero rows left as zero).
    pub normalize_rows: bool,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        AffinityConfig {
            k: 2,
            q: 1,
            alpha_exp: 1.0,
            kmeans_restarts: 10,
            seed: 0,
            normalize_rows: true,
        }
    }
}

impl AffinityConfig {
    pub fn truncation(&self) -> usize {
        self.k * self.q + 1
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k < 2 {
            return Err(PsscError::config("cluster count k must be at least 2"));
        }
        if self.q < 1 {
            return Err(PsscError::config("subspace dimension q must be at least 1"));
        }
        if self.alpha_exp <= 0.0 {
            return Err(PsscError::config("affinity exponent must be positive"));
        }
        if self.truncation() > n {
            return Err(PsscError::config(format!(
                "truncation m = k·q + 1 = {} exceeds n = {n}",
                self.truncation()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub affinity: Mat,
    /// k-means objective of the chosen restart.
    pub inertia: f64,
}

/// S = ½(|C|+|C|ᵀ); truncated SVD S = UΣVᵀ; rows of U_mΣ_m^{1/2} scaled to
/// unit norm; A = |ZZᵀ|^α symmetrized by averaging with its transpose.
pub fn build_affinity(c: &Mat, cfg: &AffinityConfig) -> Result<Mat> {
    let n = c.rows();
    cfg.validate(n)?;
    let s = similarity_from_coeff(c)?;
    let (u, sigma, _) = svd(&s)?;
    let m = cfg.truncation();

    let mut z = Mat::zeros(n, m);
    for j in 0..m {
        let root = sigma[j].max(0.0).sqrt();
        for i in 0..n {
            z.set(i, j, u.get(i, j) * root);
        }
    }
    if cfg.normalize_rows {
        for i in 0..n {
            let norm: f64 = z.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for j in 0..m {
                    z.set(i, j, z.get(i, j) / norm);
                }
            }
        }
    }

    let zz = z.matmul(&z.transpose());
    let raw = zz.map(|v| v.abs().powf(cfg.alpha_exp));
    Ok(raw.add(&raw.transpose()).scale(0.5))
}

/// Normalized spectral clustering: Laplacian eigenvectors of the k smallest
/// eigenvalues, row-normalized, then restarted k-means.
pub fn spectral_cluster(
    a: &Mat,
    k: usize,
    restarts: usize,
    rng: &SeededRng,
) -> Result<ClusterResult> {
    if !a.is_square() {
        return Err(PsscError::contract("spectral_cluster: A must be square"));
    }
    let n = a.rows();
    if k > n {
        return Err(PsscError::config(format!(
            "spectral_cluster: k = {k} exceeds n = {n}"
        )));
    }
    let graph = normalized_laplacian(a, DEGREE_EPS)?;
    let (_, vecs) = eigh_sym(&graph.laplacian)?;

    let mut embedding = Mat::zeros(n, k);
    for j in 0..k {
        // resolve the sign ambiguity: largest-magnitude entry non-negative
        let mut pivot = 0usize;
        for i in 0..n {
            if vecs.get(i, j).abs() > vecs.get(pivot, j).abs() {
                pivot = i;
            }
        }
        let flip = if vecs.get(pivot, j) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            embedding.set(i, j, flip * vecs.get(i, j));
        }
    }
    for i in 0..n {
        let norm: f64 = embedding.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for j in 0..k {
                embedding.set(i, j, embedding.get(i, j) / norm);
            }
        }
    }

    let (labels, inertia) = kmeans_restarts(&embedding, k, restarts, rng);
    Ok(ClusterResult {
        labels,
        affinity: a.clone(),
        inertia,
    })
}

fn kmeans_restarts(points: &Mat, k: usize, restarts: usize, rng: &SeededRng) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..restarts.max(1) {
        let mut local_rng = rng.split(restart as u64);
        let (labels, inertia) = kmeans_once(points, k, &mut local_rng);
        let better = match &best {
            None => true,
            Some((_, bi)) => inertia < *bi,
        };
        if better {
            best = Some((labels, inertia));
        }
    }
    best.unwrap()
}

/// Lloyd's iterations with seeded greedy farthest-point initialization.
fn kmeans_once(points: &Mat, k: usize, rng: &mut SeededRng) -> (Vec<usize>, f64) {
    let n = points.rows();
    let dim = points.cols();
    let mut centers = Mat::zeros(k, dim);

    // farthest-point init: random first center, then maximize the distance
    // to the nearest chosen center (ties -> lowest index)
    let first = rng.index(n);
    for j in 0..dim {
        centers.set(0, j, points.get(first, j));
    }
    let mut min_dist: Vec<f64> = (0..n).map(|i| dist2(points, i, &centers, 0)).collect();
    for c in 1..k {
        let mut far = 0usize;
        for i in 1..n {
            if min_dist[i] > min_dist[far] {
                far = i;
            }
        }
        for j in 0..dim {
            centers.set(c, j, points.get(far, j));
        }
        for i in 0..n {
            min_dist[i] = min_dist[i].min(dist2(points, i, &centers, c));
        }
    }

    let mut labels = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    for _ in 0..300 {
        for i in 0..n {
            let mut best_c = 0usize;
            let mut best_d = dist2(points, i, &centers, 0);
            for c in 1..k {
                let d = dist2(points, i, &centers, c);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            labels[i] = best_c;
        }
        let mut counts = vec![0usize; k];
        let mut sums = Mat::zeros(k, dim);
        for i in 0..n {
            counts[labels[i]] += 1;
            for j in 0..dim {
                sums.add_at(labels[i], j, points.get(i, j));
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..dim {
                    centers.set(c, j, sums.get(c, j) / counts[c] as f64);
                }
            }
            // empty clusters keep their previous center
        }
        let new_inertia: f64 = (0..n).map(|i| dist2(points, i, &centers, labels[i])).sum();
        if (inertia - new_inertia).abs() <= 1e-9 * inertia.abs().max(1e-30) {
            inertia = new_inertia;
            break;
        }
        inertia = new_inertia;
    }
    (labels, inertia)
}

fn dist2(points: &Mat, i: usize, centers: &Mat, c: usize) -> f64 {
    let mut d = 0.0;
    for j in 0..points.cols() {
        let diff = points.get(i, j) - centers.get(c, j);
        d += diff * diff;
    }
    d
}
