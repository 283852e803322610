//! Synthetic union-of-subspaces data with labels known by construction.

use crate::error::{PsscError, Result};
use crate::linalg::{Mat, SeededRng};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub k: usize,
    pub q: usize,
    pub d: usize,
    pub per_cluster: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            k: 3,
            q: 4,
            d: 30,
            per_cluster: 60,
            sigma: 0.01,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.per_cluster < 1 {
            return Err(PsscError::config("k and per_cluster must be at least 1"));
        }
        if self.q < 1 || self.q > self.d {
            return Err(PsscError::config(format!(
                "subspace dimension q = {} must lie in 1..=d = {}",
                self.q, self.d
            )));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(PsscError::config("sigma must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Random orthonormal basis of a q-dimensional subspace of ℝ^d:
/// Gaussian columns, Gram-Schmidt, redraw on near-degeneracy.
fn random_basis(d: usize, q: usize, rng: &mut SeededRng) -> Mat {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(q);
    while cols.len() < q {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        for u in &cols {
            let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= proj * ui;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        for vi in &mut v {
            *vi /= norm;
        }
        cols.push(v);
    }
    Mat::from_fn(d, q, |i, j| cols[j][i])
}

/// Points grouped by cluster: column j of the result belongs to cluster
/// j / per_cluster. Each point is basis·coeffs (coeffs ~ N(0,1)) plus
/// isotropic N(0, σ²) noise.
pub fn generate(spec: &SynthSpec, rng: &mut SeededRng) -> Result<(Mat, Vec<usize>)> {
    spec.validate()?;
    let n = spec.k * spec.per_cluster;
    let mut x = Mat::zeros(spec.d, n);
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..spec.k {
        let basis = random_basis(spec.d, spec.q, rng);
        for s in 0..spec.per_cluster {
            let j = cluster * spec.per_cluster + s;
            let coeffs: Vec<f64> = (0..spec.q).map(|_| rng.normal()).collect();
            for i in 0..spec.d {
                let mut v = 0.0;
                for (l, &c) in coeffs.iter().enumerate() {
                    v += basis.get(i, l) * c;
                }
                if spec.sigma > 0.0 {
                    v += spec.sigma * rng.normal();
                }
                x.set(i, j, v);
            }
            labels.push(cluster);
        }
    }
    Ok((x, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;

    #[test]
    fn noiseless_lines_contain_their_points() {
        // two 1-D subspaces in ℝ³, σ = 0: every point is on its line, i.e.
        // projecting onto the line reproduces it
        let spec = SynthSpec {
            k: 2,
            q: 1,
            d: 3,
            per_cluster: 5,
            sigma: 0.0,
            seed: 7,
        };
        let mut rng = SeededRng::new(spec.seed);
        let (x, labels) = generate(&spec, &mut rng).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        for cluster in 0..2 {
            let cols: Vec<usize> = (0..10).filter(|&j| labels[j] == cluster).collect();
            // direction from the first sample of the cluster
            let p0 = x.col(cols[0]);
            let norm0 = p0.iter().map(|a| a * a).sum::<f64>().sqrt();
            let dir: Vec<f64> = p0.iter().map(|a| a / norm0).collect();
            for &j in &cols {
                let p = x.col(j);
                let t: f64 = p.iter().zip(&dir).map(|(a, b)| a * b).sum();
                for i in 0..3 {
                    assert!((p[i] - t * dir[i]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn noiseless_cluster_rank_equals_q() {
        let spec = SynthSpec {
            k: 3,
            q: 2,
            d: 6,
            per_cluster: 8,
            sigma: 0.0,
            seed: 1,
        };
        let mut rng = SeededRng::new(spec.seed);
        let (x, labels) = generate(&spec, &mut rng).unwrap();
        for cluster in 0..3 {
            let cols: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == cluster).collect();
            let block = Mat::from_fn(6, cols.len(), |i, j| x.get(i, cols[j]));
            let (_, sv, _) = svd(&block).unwrap();
            let rank = sv.iter().filter(|&&s| s > 1e-8).count();
            assert_eq!(rank, 2);
        }
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let spec = SynthSpec::default();
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        let (xa, la) = generate(&spec, &mut a).unwrap();
        let (xb, lb) = generate(&spec, &mut b).unwrap();
        assert_eq!(xa, xb);
        assert_eq!(la, lb);
    }

    #[test]
    fn rejects_q_above_d() {
        let spec = SynthSpec {
            q: 5,
            d: 3,
            ..SynthSpec::default()
        };
        let mut rng = SeededRng::new(0);
        assert!(matches!(
            generate(&spec, &mut rng),
            Err(PsscError::Config(_))
        ));
    }
}
