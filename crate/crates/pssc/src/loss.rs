//! The four loss components, the unified objective, and exact reverse-mode
//! gradients for every parameter including the self-expression coefficients.
//!
//! The gradient of the locality and pseudo-graph terms flows through the
//! similarity S, its degrees, and the normalized Laplacian back into C
//! (subgradient of |c| at 0 taken as 0). The finite-difference tests below
//! are the authority on every chain rule in this file.

use crate::error::{PsscError, Result};
use crate::graph::{normalized_laplacian, similarity_from_coeff, SimilarityGraph, DEGREE_EPS};
use crate::linalg::Mat;
use crate::model::{forward, ForwardCache, ForwardMode, Grads, LayerParams, PseudoLabels, PsscParams};

/// Clamp applied inside the pseudo-label logarithm.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub margin: f64,
    /// Divide L_graph by the pair count and L_label by the confident count.
    pub normalize_pair_losses: bool,
    /// Treat S_n and L_n as constants of the current epoch.
    pub freeze_laplacian: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma1: 1.0,
            gamma2: 0.1,
            gamma3: 0.1,
            margin: 1.0,
            normalize_pair_losses: true,
            freeze_laplacian: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LossBreakdown {
    /// ‖X−X̂‖²_F
    pub recon: f64,
    /// 2Tr(X L_n X̂ᵀ)
    pub locality: f64,
    /// ‖Z−ZC‖²_F
    pub selfexpr: f64,
    pub graph: f64,
    pub label: f64,
    /// recon + locality + γ1·selfexpr + γ2·graph + γ3·label
    pub total: f64,
}

/// ‖X−X̂‖²_F + 2Tr(X L_n X̂ᵀ), the normalized-degree form of the weighted
/// reconstruction loss.
pub fn loss_locality(x: &Mat, xhat: &Mat, ln: &Mat) -> Result<f64> {
    if x.rows() != xhat.rows() || x.cols() != xhat.cols() {
        return Err(PsscError::contract("loss_locality: X and X̂ shapes differ"));
    }
    if !ln.is_square() || ln.rows() != x.cols() {
        return Err(PsscError::contract(
            "loss_locality: L_n must be n×n with n = columns of X",
        ));
    }
    let scale = ln.max_abs().max(1.0);
    for i in 0..ln.rows() {
        for j in i + 1..ln.cols() {
            if (ln.get(i, j) - ln.get(j, i)).abs() > 1e-8 * scale {
                return Err(PsscError::contract("loss_locality: L_n is not symmetric"));
            }
        }
    }
    let diff = x.sub(xhat);
    let recon = diff.dot(&diff);
    Ok(recon + locality_trace(x, xhat, ln))
}

/// 2Tr(X L_n X̂ᵀ) = 2 Σ_ij L_ij ⟨X_i, X̂_j⟩.
fn locality_trace(x: &Mat, xhat: &Mat, ln: &Mat) -> f64 {
    let gram = x.transpose().matmul(xhat);
    2.0 * gram.dot(ln)
}

/// ‖Z − ZC‖²_F with the trivial-solution guard diag(C) = 0 enforced.
pub fn loss_selfexpr(z: &Mat, c: &Mat) -> Result<f64> {
    if !c.is_square() || c.rows() != z.cols() {
        return Err(PsscError::contract(
            "loss_selfexpr: C must be n×n with n = columns of Z",
        ));
    }
    for i in 0..c.rows() {
        if c.get(i, i) != 0.0 {
            return Err(PsscError::contract(format!(
                "loss_selfexpr: diag(C) must be zero, found {} at {i}",
                c.get(i, i)
            )));
        }
    }
    let r = z.sub(&z.matmul(c));
    Ok(r.dot(&r))
}

/// Soft-weighted contrastive pair loss over classifier rows: similar pairs
/// (by S̄) are pulled together, dissimilar pairs pushed past the margin.
pub fn loss_graph(f: &Mat, sbar: &Mat, margin: f64, normalize: bool) -> Result<f64> {
    let n = f.rows();
    if !sbar.is_square() || sbar.rows() != n {
        return Err(PsscError::contract("loss_graph: S̄ must be n×n"));
    }
    for i in 0..n {
        if sbar.get(i, i) != 0.0 {
            return Err(PsscError::contract("loss_graph: S̄ diagonal must be zero"));
        }
        for j in 0..n {
            let v = sbar.get(i, j);
            if !(0.0..=1.0).contains(&v) {
                return Err(PsscError::contract(format!(
                    "loss_graph: S̄ entry {v} at ({i},{j}) outside [0,1]"
                )));
            }
        }
    }
    let pairs = n * (n - 1) / 2;
    let norm = if normalize && pairs > 0 { pairs as f64 } else { 1.0 };
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = (0..f.cols())
                .map(|k| {
                    let u = f.get(i, k) - f.get(j, k);
                    u * u
                })
                .sum();
            let d = d2.sqrt();
            let s = sbar.get(i, j);
            let h = (margin - d).max(0.0);
            total += s * d2 + (1.0 - s) * h * h;
        }
    }
    Ok(total / norm)
}

/// Confidence-masked cross-entropy against the pseudo-labels.
pub fn loss_label(f: &Mat, labels: &PseudoLabels, normalize: bool) -> f64 {
    let confident = labels.confident_count();
    let norm = if normalize { confident.max(1) as f64 } else { 1.0 };
    let mut total = 0.0;
    for i in 0..f.rows() {
        if labels.v[i] {
            total += -(f.get(i, labels.y[i]).max(LOG_CLAMP)).ln();
        }
    }
    total / norm
}

/// Unified objective and exact gradients. Pseudo-label targets are constants;
/// the diagonal of ∂L/∂C is masked to zero.
pub fn total_loss_and_grads(
    params: &PsscParams,
    x: &Mat,
    cfg: &LossConfig,
    labels: &PseudoLabels,
) -> Result<(LossBreakdown, Grads)> {
    let cache = forward(params, x, ForwardMode::Full)?;
    loss_and_grads_with_cache(params, x, &cache, cfg, labels)
}

/// Same as [`total_loss_and_grads`] but reusing an existing forward pass
/// (the trainer snapshots pseudo-labels from the same pass).
pub fn loss_and_grads_with_cache(
    params: &PsscParams,
    x: &Mat,
    cache: &ForwardCache,
    cfg: &LossConfig,
    labels: &PseudoLabels,
) -> Result<(LossBreakdown, Grads)> {
    let n = params.n();
    let graph_mats = {
        let s = similarity_from_coeff(&params.c)?;
        normalized_laplacian(&s, DEGREE_EPS)?
    };
    let (sbar, sbar_argmax, sbar_max) = graph_mats.contrastive_target();

    let diff = cache.xhat.sub(x);
    let recon = diff.dot(&diff);
    let locality = locality_trace(x, &cache.xhat, &graph_mats.laplacian);
    let selfexpr = loss_selfexpr(&cache.z, &params.c)?;
    let graph_loss = loss_graph(&cache.f, &sbar, cfg.margin, cfg.normalize_pair_losses)?;
    let label_loss = loss_label(&cache.f, labels, cfg.normalize_pair_losses);

    let breakdown = LossBreakdown {
        recon,
        locality,
        selfexpr,
        graph: graph_loss,
        label: label_loss,
        total: recon
            + locality
            + cfg.gamma1 * selfexpr
            + cfg.gamma2 * graph_loss
            + cfg.gamma3 * label_loss,
    };
    for (name, v) in [
        ("recon", recon),
        ("locality", locality),
        ("selfexpr", selfexpr),
        ("graph", graph_loss),
        ("label", label_loss),
    ] {
        if !v.is_finite() {
            return Err(PsscError::Divergence {
                epoch: 0,
                term: name.to_string(),
            });
        }
    }

    let mut grads = params.zeros_like();

    // --- reconstruction + locality, via X̂ ---
    // d/dX̂ [‖X̂−X‖² + 2Σ L_ij⟨X_i,X̂_j⟩] = 2(X̂−X) + 2 X L_n
    let mut d_xhat = diff.scale(2.0);
    d_xhat.add_assign(&x.matmul(&graph_mats.laplacian).scale(2.0));

    let (dec_grads, d_zc) = backprop_stack(
        &params.decoder,
        &cache.dec_inputs,
        &cache.dec_pre,
        d_xhat,
    );
    grads.decoder = dec_grads;

    // decoder path into C and Z
    grads.c.add_assign(&cache.z.transpose().matmul(&d_zc));
    let mut d_z = d_zc.matmul(&params.c.transpose());

    // --- self-expression term ---
    let r = cache.z.sub(&cache.zc);
    d_z.add_assign(&r.scale(2.0 * cfg.gamma1));
    d_z.add_assign(&r.matmul(&params.c.transpose()).scale(-2.0 * cfg.gamma1));
    grads
        .c
        .add_assign(&cache.z.transpose().matmul(&r).scale(-2.0 * cfg.gamma1));

    // --- pseudo-graph + pseudo-label terms, via F ---
    let k = cache.f.cols();
    let pairs = n * (n - 1) / 2;
    let pair_norm = if cfg.normalize_pair_losses && pairs > 0 {
        pairs as f64
    } else {
        1.0
    };
    let mut d_f = Mat::zeros(n, k);
    // grad of L_graph w.r.t. S̄ entries (upper triangle), γ2 and 1/P folded in
    let mut g_sbar = Mat::zeros(n, n);
    if cfg.gamma2 != 0.0 {
        let scale = cfg.gamma2 / pair_norm;
        for i in 0..n {
            for j in i + 1..n {
                let mut d2 = 0.0;
                for t in 0..k {
                    let u = cache.f.get(i, t) - cache.f.get(j, t);
                    d2 += u * u;
                }
                let d = d2.sqrt();
                let s = sbar.get(i, j);
                let h = (cfg.margin - d).max(0.0);
                g_sbar.set(i, j, scale * (d2 - h * h));
                // pull term 2s·u, push term −2(1−s)·h·u/d
                let coef_pull = 2.0 * s * scale;
                let coef_push = if d > 1e-300 {
                    -2.0 * (1.0 - s) * h / d * scale
                } else {
                    0.0
                };
                for t in 0..k {
                    let u = cache.f.get(i, t) - cache.f.get(j, t);
                    let g = (coef_pull + coef_push) * u;
                    d_f.add_at(i, t, g);
                    d_f.add_at(j, t, -g);
                }
            }
        }
    }
    if cfg.gamma3 != 0.0 {
        let confident = labels.confident_count();
        let norm = if cfg.normalize_pair_losses {
            confident.max(1) as f64
        } else {
            1.0
        };
        for i in 0..n {
            if labels.v[i] {
                let fy = cache.f.get(i, labels.y[i]);
                if fy > LOG_CLAMP {
                    d_f.add_at(i, labels.y[i], -cfg.gamma3 / (norm * fy));
                }
            }
        }
    }

    // softmax backprop per sample row, then the affine classifier head
    let mut d_logits = Mat::zeros(k, n);
    for i in 0..n {
        let f_row = cache.f.row(i);
        let g_row = d_f.row(i);
        let gf: f64 = f_row.iter().zip(g_row).map(|(a, b)| a * b).sum();
        for t in 0..k {
            d_logits.set(t, i, f_row[t] * (g_row[t] - gf));
        }
    }
    grads.classifier.w = d_logits.matmul(&cache.z.transpose());
    for t in 0..k {
        grads.classifier.b[t] = d_logits.row(t).iter().sum();
    }
    d_z.add_assign(&params.classifier.w.transpose().matmul(&d_logits));

    // --- encoder ---
    let (enc_grads, _) = backprop_stack(&params.encoder, &cache.enc_inputs, &cache.enc_pre, d_z);
    grads.encoder = enc_grads;

    // --- gradient through S_n, L_n, degrees into C ---
    if !cfg.freeze_laplacian {
        let d_s = similarity_chain(
            x,
            &cache.xhat,
            &graph_mats,
            &g_sbar,
            sbar_argmax,
            sbar_max,
        );
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let sign = sign_or_zero(params.c.get(a, b));
                grads
                    .c
                    .add_at(a, b, 0.5 * sign * (d_s.get(a, b) + d_s.get(b, a)));
            }
        }
    }

    for i in 0..n {
        grads.c.set(i, i, 0.0);
    }

    Ok((breakdown, grads))
}

fn sign_or_zero(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// dL/dS treating S's n² entries as independent. Upstream gradients arrive
/// through L_n (locality) and through the rescaled contrastive target S̄.
fn similarity_chain(
    x: &Mat,
    xhat: &Mat,
    graph: &SimilarityGraph,
    g_sbar: &Mat,
    sbar_argmax: Option<(usize, usize)>,
    sbar_max: f64,
) -> Mat {
    let n = graph.s.rows();
    let e = &graph.inv_sqrt_deg;
    let eps = graph.eps;

    // Gl_ij = dL/dL_n_ij = 2⟨X_i, X̂_j⟩
    let gl = x.transpose().matmul(xhat).scale(2.0);

    // Gn = dL/dS_n: the S̄ rescale contributes Gb/M everywhere plus the
    // max-entry correction −Σ(Gb∘S_n)/M² at the argmax (assigned to one
    // entry; its symmetric twin is the same function of C).
    let mut gn = Mat::zeros(n, n);
    if let Some((pi, pj)) = sbar_argmax {
        let mut dot = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let gb = g_sbar.get(i, j);
                if gb != 0.0 {
                    gn.set(i, j, gb / sbar_max);
                    dot += gb * graph.s_norm.get(i, j);
                }
            }
        }
        gn.add_at(pi, pj, -dot / (sbar_max * sbar_max));
    }

    // H = Gl − Gn; dS_pq = −e_p e_q H_pq + eps e_p⁴ Gl_pp + ½e_p³(r_p + c_p)
    // with r_p = Σ_j H_pj S_pj e_j and c_p = Σ_i H_ip S_ip e_i (degree chain).
    let h = gl.sub(&gn);
    let mut row_term = vec![0.0; n];
    let mut col_term = vec![0.0; n];
    for p in 0..n {
        for j in 0..n {
            row_term[p] += h.get(p, j) * graph.s.get(p, j) * e[j];
            col_term[p] += h.get(j, p) * graph.s.get(j, p) * e[j];
        }
    }
    let mut d_s = Mat::zeros(n, n);
    for p in 0..n {
        let e3 = e[p] * e[p] * e[p];
        let deg_part = gl.get(p, p) * eps * e3 * e[p] + 0.5 * e3 * (row_term[p] + col_term[p]);
        for q in 0..n {
            d_s.set(p, q, -e[p] * e[q] * h.get(p, q) + deg_part);
        }
    }
    d_s
}

/// Plain-AE reconstruction loss and gradients (pretraining): C and the
/// classifier are untouched.
pub fn recon_loss_and_grads(params: &PsscParams, x: &Mat) -> Result<(f64, Grads)> {
    let cache = forward(params, x, ForwardMode::Pretrain)?;
    let diff = cache.xhat.sub(x);
    let recon = diff.dot(&diff);
    let mut grads = params.zeros_like();
    let d_xhat = diff.scale(2.0);
    let (dec_grads, d_z) = backprop_stack(
        &params.decoder,
        &cache.dec_inputs,
        &cache.dec_pre,
        d_xhat,
    );
    grads.decoder = dec_grads;
    let (enc_grads, _) = backprop_stack(&params.encoder, &cache.enc_inputs, &cache.enc_pre, d_z);
    grads.encoder = enc_grads;
    Ok((recon, grads))
}

/// Reverse pass through a fully-connected stack (ReLU hidden, linear final).
/// Returns per-layer gradients and the gradient w.r.t. the stack input.
fn backprop_stack(
    layers: &[LayerParams],
    inputs: &[Mat],
    pres: &[Mat],
    d_out: Mat,
) -> (Vec<LayerParams>, Mat) {
    let depth = layers.len();
    let mut grads: Vec<LayerParams> = layers
        .iter()
        .map(|l| LayerParams::zeros(l.w.rows(), l.w.cols()))
        .collect();
    let mut d_act = d_out;
    for idx in (0..depth).rev() {
        let d_pre = if idx + 1 == depth {
            d_act
        } else {
            let pre = &pres[idx];
            let mut masked = d_act;
            for i in 0..masked.rows() {
                for j in 0..masked.cols() {
                    if pre.get(i, j) <= 0.0 {
                        masked.set(i, j, 0.0);
                    }
                }
            }
            masked
        };
        grads[idx].w = d_pre.matmul(&inputs[idx].transpose());
        for i in 0..d_pre.rows() {
            grads[idx].b[i] = d_pre.row(i).iter().sum();
        }
        d_act = layers[idx].w.transpose().matmul(&d_pre);
    }
    (grads, d_act)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SeededRng;
    use crate::model::{init_params, pseudo_labels};

    fn random_instance(
        seed: u64,
        n: usize,
        d: usize,
        k: usize,
        latent: usize,
    ) -> (PsscParams, Mat, PseudoLabels) {
        let mut rng = SeededRng::new(seed);
        let mut params = init_params(&[d, d.max(3) - 1, latent], n, k, &mut rng);
        // keep |C| entries away from the kink at 0 so central differences are valid
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let mag = rng.uniform(0.05, 0.4);
                    let sign = if rng.uniform(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
                    params.c.set(i, j, sign * mag);
                }
            }
        }
        let x = Mat::from_fn(d, n, |_, _| rng.uniform(-1.0, 1.0));
        let cache = forward(&params, &x, ForwardMode::Full).unwrap();
        // moderate threshold so some samples are confident
        let labels = pseudo_labels(&cache.f, 0.3);
        (params, x, labels)
    }

    fn total_of(params: &PsscParams, x: &Mat, cfg: &LossConfig, labels: &PseudoLabels) -> f64 {
        total_loss_and_grads(params, x, cfg, labels).unwrap().0.total
    }

    /// Central finite differences over every free coordinate (the constrained
    /// C diagonal is skipped; its gradient is masked to zero by contract).
    pub(crate) fn check_gradients(
        params: &PsscParams,
        x: &Mat,
        cfg: &LossConfig,
        labels: &PseudoLabels,
        rel_tol: f64,
        abs_floor: f64,
    ) -> (usize, f64) {
        let (_, grads) = total_loss_and_grads(params, x, cfg, labels).unwrap();
        let analytic = grads.flat();

        let mut diag_mask = params.zeros_like();
        for i in 0..diag_mask.c.rows() {
            diag_mask.c.set(i, i, 1.0);
        }
        let mask = diag_mask.flat();

        let h = 1e-5;
        let mut checked = 0;
        let mut worst = 0.0f64;
        let count = analytic.len();
        for idx in 0..count {
            if mask[idx] != 0.0 {
                continue;
            }
            let mut p_plus = params.clone();
            *p_plus.flat_mut()[idx] += h;
            let mut p_minus = params.clone();
            *p_minus.flat_mut()[idx] -= h;
            let fd = (total_of(&p_plus, x, cfg, labels) - total_of(&p_minus, x, cfg, labels))
                / (2.0 * h);
            let err = (fd - analytic[idx]).abs();
            let rel = err / analytic[idx].abs().max(fd.abs()).max(abs_floor / rel_tol);
            worst = worst.max(rel);
            assert!(
                rel <= rel_tol || err <= abs_floor,
                "coordinate {idx}: analytic {} vs finite difference {fd} (rel {rel:.3e})",
                analytic[idx]
            );
            checked += 1;
        }
        (checked, worst)
    }

    #[test]
    fn locality_degenerate_cases() {
        let mut rng = SeededRng::new(1);
        let x = Mat::from_fn(3, 4, |_, _| rng.uniform(-1.0, 1.0));
        let ln = Mat::zeros(4, 4);
        assert_eq!(loss_locality(&x, &x, &ln).unwrap(), 0.0);

        // L_n = 0 reduces to the plain reconstruction loss
        let xhat = Mat::from_fn(3, 4, |_, _| rng.uniform(-1.0, 1.0));
        let diff = x.sub(&xhat);
        let want = diff.dot(&diff);
        assert!((loss_locality(&x, &xhat, &ln).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn locality_agrees_with_quadform_on_unit_degrees() {
        // with unit degrees (ring of two), L_n equals D − S exactly up to eps,
        // so the quadform route and the normalized route agree
        use crate::graph::weighted_recon_quadform;
        let mut rng = SeededRng::new(2);
        let x = Mat::from_fn(3, 2, |_, _| rng.uniform(-1.0, 1.0));
        let xhat = Mat::from_fn(3, 2, |_, _| rng.uniform(-1.0, 1.0));
        let s = Mat::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        let g = normalized_laplacian(&s, 0.0).unwrap();
        let via_ln = loss_locality(&x, &xhat, &g.laplacian).unwrap();
        let diff = x.sub(&xhat);
        let recon = diff.dot(&diff);
        let quad = weighted_recon_quadform(&x, &xhat, &s).unwrap();
        // quadform = Tr[(X−X̂)D(X−X̂)ᵀ] + 2Tr(X L X̂ᵀ); with D = I both routes
        // carry the same trace term
        let trace_term = quad - recon;
        assert!((via_ln - (recon + trace_term)).abs() < 1e-10);
    }

    #[test]
    fn selfexpr_zero_and_duplicate_columns() {
        let mut rng = SeededRng::new(3);
        let z = Mat::from_fn(3, 4, |_, _| rng.uniform(-1.0, 1.0));
        let c = Mat::zeros(4, 4);
        let want = z.dot(&z);
        assert!((loss_selfexpr(&z, &c).unwrap() - want).abs() < 1e-12);

        // two identical columns expressing each other exactly
        let mut z2 = Mat::zeros(3, 2);
        for i in 0..3 {
            let v = rng.uniform(-1.0, 1.0);
            z2.set(i, 0, v);
            z2.set(i, 1, v);
        }
        let c2 = Mat::from_vec(2, 2, vec![0.0, 1.0, 1.0, 0.0]);
        assert!(loss_selfexpr(&z2, &c2).unwrap() < 1e-24);
    }

    #[test]
    fn selfexpr_columnwise_oracle() {
        let mut rng = SeededRng::new(4);
        let z = Mat::from_fn(3, 5, |_, _| rng.uniform(-1.0, 1.0));
        let mut c = Mat::from_fn(5, 5, |_, _| rng.uniform(-0.5, 0.5));
        for i in 0..5 {
            c.set(i, i, 0.0);
        }
        let got = loss_selfexpr(&z, &c).unwrap();
        let mut want = 0.0;
        for i in 0..5 {
            for r in 0..3 {
                let mut recon = 0.0;
                for j in 0..5 {
                    recon += c.get(j, i) * z.get(r, j);
                }
                let diff = z.get(r, i) - recon;
                want += diff * diff;
            }
        }
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn selfexpr_rejects_nonzero_diagonal() {
        let z = Mat::zeros(2, 3);
        let mut c = Mat::zeros(3, 3);
        c.set(1, 1, 0.5);
        assert!(matches!(loss_selfexpr(&z, &c), Err(PsscError::Contract(_))));
    }

    #[test]
    fn graph_loss_trivial_cases() {
        // identical rows, fully similar: zero loss
        let f = Mat::from_vec(3, 2, vec![0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
        let mut sbar = Mat::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        assert!(loss_graph(&f, &sbar, 1.0, true).unwrap() < 1e-24);

        // fully dissimilar and separated past the margin: zero loss
        let f2 = Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        sbar = Mat::zeros(2, 2);
        assert!(loss_graph(&f2, &sbar, 1.0, true).unwrap() < 1e-24);
    }

    #[test]
    fn graph_loss_hand_instance() {
        let f = Mat::from_vec(3, 2, vec![1.0, 0.0, 0.6, 0.4, 0.0, 1.0]);
        let mut sbar = Mat::zeros(3, 3);
        sbar.set(0, 1, 0.8);
        sbar.set(1, 0, 0.8);
        sbar.set(0, 2, 0.1);
        sbar.set(2, 0, 0.1);
        sbar.set(1, 2, 0.5);
        sbar.set(2, 1, 0.5);
        let margin = 1.0;
        // pair (0,1): d² = 0.32; pair (0,2): d² = 2; pair (1,2): d² = 0.72
        let d01 = 0.32f64;
        let d02 = 2.0f64;
        let d12 = 0.72f64;
        let manual = (0.8 * d01 + 0.2 * (margin - d01.sqrt()).max(0.0).powi(2))
            + (0.1 * d02 + 0.9 * (margin - d02.sqrt()).max(0.0).powi(2))
            + (0.5 * d12 + 0.5 * (margin - d12.sqrt()).max(0.0).powi(2));
        let got = loss_graph(&f, &sbar, margin, true).unwrap();
        assert!((got - manual / 3.0).abs() < 1e-12);
    }

    #[test]
    fn graph_loss_rejects_out_of_range() {
        let f = Mat::zeros(2, 2);
        let mut sbar = Mat::zeros(2, 2);
        sbar.set(0, 1, 1.5);
        sbar.set(1, 0, 1.5);
        assert!(matches!(
            loss_graph(&f, &sbar, 1.0, true),
            Err(PsscError::Contract(_))
        ));
    }

    #[test]
    fn label_loss_cases() {
        // one-hot at the pseudo-label: zero loss
        let f = Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let labels = pseudo_labels(&f, 0.8);
        assert_eq!(loss_label(&f, &labels, true), 0.0);

        // no confident samples: zero loss
        let f2 = Mat::from_vec(2, 2, vec![0.5, 0.5, 0.5, 0.5]);
        let labels2 = pseudo_labels(&f2, 0.8);
        assert_eq!(loss_label(&f2, &labels2, true), 0.0);

        // single confident sample at probability 0.5 → ln 2
        let f3 = Mat::from_vec(1, 2, vec![0.5, 0.5]);
        let labels3 = PseudoLabels {
            y: vec![0],
            p: vec![0.5],
            v: vec![true],
            thres: 0.4,
        };
        assert!((loss_label(&f3, &labels3, true) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn total_reduces_to_plain_ae() {
        // γ2 = γ3 = 0 and C = 0: gradient equals the plain AE gradient except
        // for the locality trace, which is still driven by S = 0 → L_n = 0
        let mut rng = SeededRng::new(5);
        let mut params = init_params(&[4, 3], 5, 2, &mut rng);
        params.c = Mat::zeros(5, 5);
        let x = Mat::from_fn(4, 5, |_, _| rng.uniform(-1.0, 1.0));
        let cfg = LossConfig {
            gamma1: 0.0,
            gamma2: 0.0,
            gamma3: 0.0,
            ..LossConfig::default()
        };
        let labels = PseudoLabels::empty(5, 0.8);
        let (bd, grads) = total_loss_and_grads(&params, &x, &cfg, &labels).unwrap();
        assert!(bd.locality.abs() < 1e-20);

        // compare decoder/encoder grads against a pretrain pass on the same
        // params but with the decoder fed ZC = Z·0 = 0 — instead check the
        // analytic reduction directly: with C = 0 the decoder input is 0, so
        // recon is ‖X − dec(0)‖² and encoder gradients flow only through the
        // classifier (γ3 = 0 ⇒ zero) and self-expression (γ1 = 0 ⇒ zero).
        for layer in &grads.encoder {
            assert!(layer.w.max_abs() < 1e-20);
        }
        assert!(bd.recon > 0.0);
    }

    #[test]
    fn gradcheck_full_objective() {
        let cfg = LossConfig {
            gamma1: 0.7,
            gamma2: 0.3,
            gamma3: 0.4,
            margin: 1.0,
            normalize_pair_losses: true,
            freeze_laplacian: false,
        };
        for seed in 0..3 {
            let (params, x, labels) = random_instance(100 + seed, 6, 4, 3, 3);
            check_gradients(&params, &x, &cfg, &labels, 1e-4, 1e-7);
        }
    }

    #[test]
    fn gradcheck_each_term_in_isolation() {
        let configs = [
            // recon + locality only
            LossConfig {
                gamma1: 0.0,
                gamma2: 0.0,
                gamma3: 0.0,
                ..LossConfig::default()
            },
            // self-expression
            LossConfig {
                gamma1: 1.0,
                gamma2: 0.0,
                gamma3: 0.0,
                ..LossConfig::default()
            },
            // pseudo-graph
            LossConfig {
                gamma1: 0.0,
                gamma2: 1.0,
                gamma3: 0.0,
                ..LossConfig::default()
            },
            // pseudo-label
            LossConfig {
                gamma1: 0.0,
                gamma2: 0.0,
                gamma3: 1.0,
                ..LossConfig::default()
            },
        ];
        for (ci, cfg) in configs.iter().enumerate() {
            let (params, x, labels) = random_instance(200 + ci as u64, 6, 4, 3, 3);
            check_gradients(&params, &x, cfg, &labels, 1e-4, 1e-7);
        }
    }

    #[test]
    fn gradcheck_frozen_laplacian_consistency() {
        // with the Laplacian frozen, the C gradient keeps only the decoder
        // and self-expression paths; spot-check it differs from the full one
        let (params, x, labels) = random_instance(300, 6, 4, 3, 3);
        let full = LossConfig::default();
        let frozen = LossConfig {
            freeze_laplacian: true,
            ..full
        };
        let (_, g_full) = total_loss_and_grads(&params, &x, &full, &labels).unwrap();
        let (_, g_frozen) = total_loss_and_grads(&params, &x, &frozen, &labels).unwrap();
        assert!(g_full.c.sub(&g_frozen.c).max_abs() > 1e-10);
    }

    #[test]
    fn doubling_gamma1_doubles_selfexpr_share_of_c_gradient() {
        let (params, x, labels) = random_instance(400, 6, 4, 3, 3);
        let base = LossConfig {
            gamma1: 0.0,
            gamma2: 0.2,
            gamma3: 0.2,
            ..LossConfig::default()
        };
        let one = LossConfig { gamma1: 1.0, ..base };
        let two = LossConfig { gamma1: 2.0, ..base };
        let (_, g0) = total_loss_and_grads(&params, &x, &base, &labels).unwrap();
        let (_, g1) = total_loss_and_grads(&params, &x, &one, &labels).unwrap();
        let (_, g2) = total_loss_and_grads(&params, &x, &two, &labels).unwrap();
        let share1 = g1.c.sub(&g0.c);
        let share2 = g2.c.sub(&g0.c);
        assert!(share2.sub(&share1.scale(2.0)).max_abs() < 1e-10);
    }

    #[test]
    fn total_invariant_under_column_permutation() {
        let (params, x, labels) = random_instance(500, 5, 4, 3, 3);
        let cfg = LossConfig::default();
        let (bd, _) = total_loss_and_grads(&params, &x, &cfg, &labels).unwrap();

        // permute samples: columns of X, conjugate C, labels
        let perm = [2usize, 0, 4, 1, 3];
        let xp = Mat::from_fn(x.rows(), 5, |i, j| x.get(i, perm[j]));
        let mut pp = params.clone();
        pp.c = Mat::from_fn(5, 5, |i, j| params.c.get(perm[i], perm[j]));
        let lp = PseudoLabels {
            y: perm.iter().map(|&i| labels.y[i]).collect(),
            p: perm.iter().map(|&i| labels.p[i]).collect(),
            v: perm.iter().map(|&i| labels.v[i]).collect(),
            thres: labels.thres,
        };
        let (bdp, _) = total_loss_and_grads(&pp, &xp, &cfg, &lp).unwrap();
        assert!((bd.total - bdp.total).abs() < 1e-9 * bd.total.abs().max(1.0));
    }

    #[test]
    fn component_losses_nonnegative() {
        let (params, x, labels) = random_instance(600, 7, 4, 3, 3);
        let (bd, _) = total_loss_and_grads(&params, &x, &LossConfig::default(), &labels).unwrap();
        assert!(bd.recon >= 0.0);
        assert!(bd.selfexpr >= 0.0);
        assert!(bd.graph >= 0.0);
        assert!(bd.label >= 0.0);
    }
}
