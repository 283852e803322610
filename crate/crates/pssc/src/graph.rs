//! Similarity, degree, and normalized-Laplacian construction from the
//! self-expression coefficients, plus the locality quadratic form.

use crate::error::{PsscError, Result};
use crate::linalg::Mat;

/// Degree guard added before the inverse square root; self-expression starts
/// near zero so near-zero degrees occur at epoch 0.
pub const DEGREE_EPS: f64 = 1e-8;

/// Similarity graph derived from a symmetric non-negative S.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    /// Raw similarity, symmetric, non-negative, zero diagonal.
    pub s: Mat,
    /// D^{-1/2} S D^{-1/2}.
    pub s_norm: Mat,
    /// Normalized Laplacian D^{-1/2}(D - S)D^{-1/2}; eigenvalues in [0, 2].
    pub laplacian: Mat,
    pub degrees: Vec<f64>,
    /// 1/sqrt(d_i + eps) per vertex.
    pub inv_sqrt_deg: Vec<f64>,
    pub eps: f64,
}

/// S = ½(|C| + |C|ᵀ) with the diagonal forced to zero.
pub fn similarity_from_coeff(c: &Mat) -> Result<Mat> {
    if !c.is_square() {
        return Err(PsscError::contract(
            "similarity_from_coeff: C must be square",
        ));
    }
    let n = c.rows();
    let mut s = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            s.set(i, j, 0.5 * (c.get(i, j).abs() + c.get(j, i).abs()));
        }
    }
    Ok(s)
}

/// Degrees, normalized similarity, and normalized Laplacian of S.
pub fn normalized_laplacian(s: &Mat, eps: f64) -> Result<SimilarityGraph> {
    if !s.is_square() {
        return Err(PsscError::contract("normalized_laplacian: S must be square"));
    }
    let n = s.rows();
    for i in 0..n {
        for j in 0..n {
            if s.get(i, j) < 0.0 {
                return Err(PsscError::contract(format!(
                    "normalized_laplacian: negative similarity at ({i},{j})"
                )));
            }
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| s.row(i).iter().sum()).collect();
    let inv_sqrt_deg: Vec<f64> = degrees.iter().map(|d| 1.0 / (d + eps).sqrt()).collect();

    let mut s_norm = Mat::zeros(n, n);
    let mut laplacian = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let sn = s.get(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
            s_norm.set(i, j, sn);
            if i == j {
                // d_i / (d_i + eps) - S_ii e_i², which is 1 - S_ii e_i² up to the guard
                laplacian.set(i, j, degrees[i] * inv_sqrt_deg[i] * inv_sqrt_deg[i] - sn);
            } else {
                laplacian.set(i, j, -sn);
            }
        }
    }
    Ok(SimilarityGraph {
        s: s.clone(),
        s_norm,
        laplacian,
        degrees,
        inv_sqrt_deg,
        eps,
    })
}

impl SimilarityGraph {
    /// Normalized similarity rescaled into [0,1] by its max entry, for use as
    /// a probability-like contrastive target. Returns the rescaled matrix, the
    /// (row-major first) argmax position, and the max value; all zeros when
    /// the graph is empty.
    pub fn contrastive_target(&self) -> (Mat, Option<(usize, usize)>, f64) {
        let n = self.s_norm.rows();
        let mut best = 0.0f64;
        let mut arg = None;
        for i in 0..n {
            for j in 0..n {
                let v = self.s_norm.get(i, j);
                if v > best {
                    best = v;
                    arg = Some((i, j));
                }
            }
        }
        if best <= 0.0 {
            return (Mat::zeros(n, n), None, 0.0);
        }
        (self.s_norm.scale(1.0 / best), arg, best)
    }
}

/// Tr[(X−X̂)ᵀD(X−X̂)] + 2Tr(XᵀL(X̂)) with D, L built from the *unnormalized*
/// degrees of S; equals Σ_ij S_ij‖X_i − X̂_j‖² for symmetric S.
pub fn weighted_recon_quadform(x: &Mat, xhat: &Mat, s: &Mat) -> Result<f64> {
    if x.rows() != xhat.rows() || x.cols() != xhat.cols() {
        return Err(PsscError::contract(
            "weighted_recon_quadform: X and X̂ shapes differ",
        ));
    }
    if !s.is_square() || s.rows() != x.cols() {
        return Err(PsscError::contract(
            "weighted_recon_quadform: S must be n×n with n = columns of X",
        ));
    }
    let n = x.cols();
    let degrees: Vec<f64> = (0..n).map(|i| s.row(i).iter().sum()).collect();

    // Tr[(X−X̂) D (X−X̂)ᵀ] over sample columns.
    let diff = x.sub(xhat);
    let mut term1 = 0.0;
    for j in 0..n {
        let mut norm2 = 0.0;
        for i in 0..x.rows() {
            norm2 += diff.get(i, j) * diff.get(i, j);
        }
        term1 += degrees[j] * norm2;
    }

    // 2 Tr(X L X̂ᵀ) = 2 Σ_ij L_ij ⟨X_i, X̂_j⟩.
    let gram = x.transpose().matmul(xhat); // n×n, gram[i][j] = ⟨X_i, X̂_j⟩
    let mut term2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let l = if i == j { degrees[i] - s.get(i, j) } else { -s.get(i, j) };
            term2 += l * gram.get(i, j);
        }
    }
    Ok(term1 + 2.0 * term2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh_sym, SeededRng};

    fn brute_force_double_sum(x: &Mat, xhat: &Mat, s: &Mat) -> f64 {
        let n = x.cols();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut d2 = 0.0;
                for r in 0..x.rows() {
                    let d = x.get(r, i) - xhat.get(r, j);
                    d2 += d * d;
                }
                total += s.get(i, j) * d2;
            }
        }
        total
    }

    fn random_symmetric_nonneg(n: usize, rng: &mut SeededRng) -> Mat {
        let mut s = Mat::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.uniform(0.0, 1.0);
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        s
    }

    #[test]
    fn similarity_zero_and_sign() {
        let s = similarity_from_coeff(&Mat::zeros(3, 3)).unwrap();
        assert_eq!(s.max_abs(), 0.0);

        let c = Mat::from_vec(2, 2, vec![0.0, 2.0, -2.0, 0.0]);
        let s = similarity_from_coeff(&c).unwrap();
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(1, 0), 2.0);
        assert_eq!(s.get(0, 0), 0.0);
    }

    #[test]
    fn similarity_elementwise_oracle() {
        let mut rng = SeededRng::new(2);
        let c = Mat::from_fn(6, 6, |_, _| rng.uniform(-1.0, 1.0));
        let s = similarity_from_coeff(&c).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j {
                    0.0
                } else {
                    0.5 * (c.get(i, j).abs() + c.get(j, i).abs())
                };
                assert!((s.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn similarity_invariant_under_transpose_and_sign_flips() {
        let mut rng = SeededRng::new(8);
        let c = Mat::from_fn(5, 5, |_, _| rng.uniform(-1.0, 1.0));
        let s = similarity_from_coeff(&c).unwrap();
        let st = similarity_from_coeff(&c.transpose()).unwrap();
        assert!(s.sub(&st).max_abs() < 1e-15);
        let flipped = c.map(|v| -v);
        let sf = similarity_from_coeff(&flipped).unwrap();
        assert!(s.sub(&sf).max_abs() < 1e-15);
    }

    #[test]
    fn similarity_rejects_nonsquare() {
        assert!(matches!(
            similarity_from_coeff(&Mat::zeros(2, 3)),
            Err(PsscError::Contract(_))
        ));
    }

    #[test]
    fn laplacian_unit_degrees() {
        let s = Mat::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let g = normalized_laplacian(&s, DEGREE_EPS).unwrap();
        assert!((g.laplacian.get(0, 0) - 1.0).abs() < 1e-7);
        assert!((g.laplacian.get(0, 1) + 1.0).abs() < 1e-7);
        assert!((g.laplacian.get(1, 1) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn laplacian_isolated_vertex() {
        let mut s = Mat::zeros(3, 3);
        s.set(0, 1, 1.0);
        s.set(1, 0, 1.0);
        let g = normalized_laplacian(&s, DEGREE_EPS).unwrap();
        for j in 0..3 {
            assert_eq!(g.laplacian.get(2, j), 0.0);
            assert_eq!(g.laplacian.get(j, 2), 0.0);
        }
        assert!(g.laplacian.is_finite());
    }

    #[test]
    fn laplacian_eigenvalues_in_range() {
        let mut rng = SeededRng::new(4);
        for _ in 0..10 {
            let s = random_symmetric_nonneg(8, &mut rng);
            let g = normalized_laplacian(&s, DEGREE_EPS).unwrap();
            let (vals, _) = eigh_sym(&g.laplacian).unwrap();
            for v in vals {
                assert!(v >= -1e-8 && v <= 2.0 + 1e-8, "eigenvalue {v} out of range");
            }
        }
    }

    #[test]
    fn laplacian_rejects_negative_entries() {
        let mut s = Mat::zeros(2, 2);
        s.set(0, 1, -0.5);
        assert!(matches!(
            normalized_laplacian(&s, DEGREE_EPS),
            Err(PsscError::Contract(_))
        ));
    }

    #[test]
    fn laplacian_positive_semidefinite_unnormalized() {
        let mut rng = SeededRng::new(13);
        for _ in 0..20 {
            let s = random_symmetric_nonneg(6, &mut rng);
            let degrees: Vec<f64> = (0..6).map(|i| s.row(i).iter().sum()).collect();
            let x: Vec<f64> = (0..6).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let mut quad = 0.0;
            for i in 0..6 {
                quad += degrees[i] * x[i] * x[i];
                for j in 0..6 {
                    quad -= s.get(i, j) * x[i] * x[j];
                }
            }
            assert!(quad >= -1e-10);
        }
    }

    #[test]
    fn quadform_zero_similarity() {
        let mut rng = SeededRng::new(6);
        let x = Mat::from_fn(4, 5, |_, _| rng.uniform(-1.0, 1.0));
        let xhat = Mat::from_fn(4, 5, |_, _| rng.uniform(-1.0, 1.0));
        let v = weighted_recon_quadform(&x, &xhat, &Mat::zeros(5, 5)).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn quadform_self_reconstruction() {
        let mut rng = SeededRng::new(7);
        let x = Mat::from_fn(3, 6, |_, _| rng.uniform(-1.0, 1.0));
        let s = random_symmetric_nonneg(6, &mut rng);
        let got = weighted_recon_quadform(&x, &x, &s).unwrap();
        let want = brute_force_double_sum(&x, &x, &s);
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1e-12));
    }

    #[test]
    fn quadform_matches_double_sum() {
        let mut rng = SeededRng::new(9);
        for _ in 0..50 {
            let x = Mat::from_fn(4, 7, |_, _| rng.uniform(-1.0, 1.0));
            let xhat = Mat::from_fn(4, 7, |_, _| rng.uniform(-1.0, 1.0));
            let s = random_symmetric_nonneg(7, &mut rng);
            let got = weighted_recon_quadform(&x, &xhat, &s).unwrap();
            let want = brute_force_double_sum(&x, &xhat, &s);
            assert!(
                (got - want).abs() <= 1e-8 * want.abs().max(1.0),
                "quadform {got} vs double sum {want}"
            );
        }
    }

    #[test]
    fn quadform_rejects_shape_mismatch() {
        let x = Mat::zeros(3, 4);
        let xhat = Mat::zeros(3, 5);
        assert!(matches!(
            weighted_recon_quadform(&x, &xhat, &Mat::zeros(4, 4)),
            Err(PsscError::Contract(_))
        ));
    }

    #[test]
    fn contrastive_target_scales_to_unit_max() {
        let mut rng = SeededRng::new(10);
        let s = random_symmetric_nonneg(5, &mut rng);
        let g = normalized_laplacian(&s, DEGREE_EPS).unwrap();
        let (target, arg, max) = g.contrastive_target();
        assert!(max > 0.0);
        let (i, j) = arg.unwrap();
        assert!((target.get(i, j) - 1.0).abs() < 1e-15);
        assert!(target.data().iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }
}
