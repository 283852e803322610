//! Clustering quality metrics (ACC via optimal assignment, NMI, purity) and
//! reconstruction PSNR.

use crate::error::{PsscError, Result};
use crate::linalg::Mat;

pub const PSNR_CAP: f64 = 99.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct MetricReport {
    pub acc: f64,
    pub nmi: f64,
    pub purity: f64,
    pub psnr: Option<f64>,
}

impl MetricReport {
    pub fn compute(true_labels: &[usize], pred_labels: &[usize]) -> Result<MetricReport> {
        Ok(MetricReport {
            acc: acc(true_labels, pred_labels)?,
            nmi: nmi(true_labels, pred_labels)?,
            purity: purity(true_labels, pred_labels)?,
            psnr: None,
        })
    }
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(PsscError::contract(format!(
            "label vectors have different lengths: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(PsscError::contract("label vectors must be non-empty"));
    }
    Ok(())
}

fn contingency(true_labels: &[usize], pred_labels: &[usize]) -> (Vec<Vec<usize>>, usize) {
    let k = true_labels
        .iter()
        .chain(pred_labels)
        .max()
        .map(|&m| m + 1)
        .unwrap_or(1);
    let mut table = vec![vec![0usize; k]; k];
    for (&t, &p) in true_labels.iter().zip(pred_labels) {
        table[t][p] += 1;
    }
    (table, k)
}

/// Best label-bijection match rate, via optimal assignment on the k×k
/// contingency matrix.
pub fn acc(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    check_lengths(true_labels, pred_labels)?;
    let n = true_labels.len();
    let (table, k) = contingency(true_labels, pred_labels);
    // maximize matches = minimize (max_count − count)
    let max_count = n as i64;
    let cost: Vec<Vec<i64>> = (0..k)
        .map(|t| (0..k).map(|p| max_count - table[t][p] as i64).collect())
        .collect();
    let assignment = hungarian_min(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .map(|(t, &p)| table[t][p])
        .sum();
    Ok(matched as f64 / n as f64)
}

/// Minimum-cost perfect assignment on a square matrix; returns the column
/// assigned to each row. Standard O(k³) potentials method.
fn hungarian_min(cost: &[Vec<i64>]) -> Vec<usize> {
    let k = cost.len();
    let inf = i64::MAX / 4;
    // 1-based arrays with a virtual row/column 0
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut way = vec![0usize; k + 1];
    let mut match_col = vec![0usize; k + 1]; // match_col[j] = row matched to column j

    for i in 1..=k {
        match_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = match_col[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; k];
    for j in 1..=k {
        if match_col[j] > 0 {
            assignment[match_col[j] - 1] = j - 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmiNorm {
    /// Arithmetic mean of the two entropies.
    Arithmetic,
    /// Geometric mean, for comparison with results that normalize this way.
    Geometric,
}

pub fn nmi(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    nmi_with(true_labels, pred_labels, NmiNorm::Arithmetic)
}

pub fn nmi_with(true_labels: &[usize], pred_labels: &[usize], norm: NmiNorm) -> Result<f64> {
    check_lengths(true_labels, pred_labels)?;
    let n = true_labels.len() as f64;
    let (table, k) = contingency(true_labels, pred_labels);
    let row_sums: Vec<f64> = (0..k).map(|t| table[t].iter().sum::<usize>() as f64).collect();
    let col_sums: Vec<f64> = (0..k).map(|p| (0..k).map(|t| table[t][p]).sum::<usize>() as f64).collect();

    let entropy = |sums: &[f64]| -> f64 {
        sums.iter()
            .filter(|&&s| s > 0.0)
            .map(|&s| {
                let q = s / n;
                -q * q.ln()
            })
            .sum()
    };
    let h_true = entropy(&row_sums);
    let h_pred = entropy(&col_sums);

    let mut mi = 0.0;
    for t in 0..k {
        for p in 0..k {
            let joint = table[t][p] as f64;
            if joint > 0.0 {
                mi += joint / n * ((joint * n) / (row_sums[t] * col_sums[p])).ln();
            }
        }
    }

    let denom = match norm {
        NmiNorm::Arithmetic => 0.5 * (h_true + h_pred),
        NmiNorm::Geometric => (h_true * h_pred).sqrt(),
    };
    if denom <= 0.0 {
        // both partitions trivial: identical by definition
        return Ok(if h_true == 0.0 && h_pred == 0.0 { 1.0 } else { 0.0 });
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Fraction of samples belonging to their cluster's majority class.
pub fn purity(true_labels: &[usize], pred_labels: &[usize]) -> Result<f64> {
    check_lengths(true_labels, pred_labels)?;
    let n = true_labels.len();
    let (table, k) = contingency(true_labels, pred_labels);
    let mut majority_total = 0usize;
    for p in 0..k {
        majority_total += (0..k).map(|t| table[t][p]).max().unwrap_or(0);
    }
    Ok(majority_total as f64 / n as f64)
}

/// 10·log₁₀(peak²/MSE), capped at 99 for exact reconstructions.
pub fn psnr(x: &Mat, xhat: &Mat, peak: f64) -> Result<f64> {
    if x.rows() != xhat.rows() || x.cols() != xhat.cols() {
        return Err(PsscError::contract("psnr: shapes differ"));
    }
    if peak <= 0.0 {
        return Err(PsscError::contract("psnr: peak must be positive"));
    }
    let diff = x.sub(xhat);
    let mse = diff.dot(&diff) / (x.rows() * x.cols()) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SeededRng;

    fn brute_force_acc(true_labels: &[usize], pred_labels: &[usize]) -> f64 {
        let k = true_labels
            .iter()
            .chain(pred_labels)
            .max()
            .map(|&m| m + 1)
            .unwrap();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0usize;
        permute(&mut perm, 0, &mut |p| {
            let matched = true_labels
                .iter()
                .zip(pred_labels)
                .filter(|(&t, &q)| p[q] == t)
                .count();
            best = best.max(matched);
        });
        best as f64 / true_labels.len() as f64
    }

    fn permute(perm: &mut Vec<usize>, i: usize, visit: &mut impl FnMut(&[usize])) {
        if i == perm.len() {
            visit(perm);
            return;
        }
        for j in i..perm.len() {
            perm.swap(i, j);
            permute(perm, i + 1, visit);
            perm.swap(i, j);
        }
    }

    #[test]
    fn acc_permutation_invariance() {
        let t = [0usize, 0, 1, 1];
        let p = [1usize, 1, 0, 0];
        assert_eq!(acc(&t, &p).unwrap(), 1.0);
        assert_eq!(acc(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn acc_matches_exhaustive_permutations() {
        let mut rng = SeededRng::new(1);
        for _ in 0..100 {
            let k = 2 + rng.index(4); // k ≤ 5
            let n = 2 + rng.index(7); // n ≤ 8
            let t: Vec<usize> = (0..n).map(|_| rng.index(k)).collect();
            let p: Vec<usize> = (0..n).map(|_| rng.index(k)).collect();
            let fast = acc(&t, &p).unwrap();
            let slow = brute_force_acc(&t, &p);
            assert_eq!(fast, slow, "t={t:?} p={p:?}");
        }
    }

    #[test]
    fn acc_rejects_length_mismatch() {
        assert!(matches!(acc(&[0, 1], &[0]), Err(PsscError::Contract(_))));
    }

    #[test]
    fn nmi_identical_partitions() {
        let t = [0usize, 1, 2, 0, 1, 2];
        assert!((nmi(&t, &t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nmi_constant_prediction() {
        let t = [0usize, 0, 1, 1];
        let p = [0usize, 0, 0, 0];
        assert_eq!(nmi(&t, &p).unwrap(), 0.0);
    }

    #[test]
    fn nmi_independent_labelings_near_zero() {
        let mut rng = SeededRng::new(2);
        let n = 10_000;
        let t: Vec<usize> = (0..n).map(|_| rng.index(2)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.index(2)).collect();
        assert!(nmi(&t, &p).unwrap() < 0.01);
    }

    #[test]
    fn nmi_both_trivial_is_one() {
        let t = [0usize, 0, 0];
        assert_eq!(nmi(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn nmi_geometric_variant_on_identical_partitions() {
        let t = [0usize, 1, 0, 1];
        assert!((nmi_with(&t, &t, NmiNorm::Geometric).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purity_cases() {
        let t = [0usize, 1, 0, 1];
        assert_eq!(purity(&t, &t).unwrap(), 1.0);
        // single predicted cluster over two balanced classes
        let p = [0usize, 0, 0, 0];
        assert_eq!(purity(&t, &p).unwrap(), 0.5);
    }

    #[test]
    fn purity_hand_instance() {
        // clusters {a,a,b} and {b,b,c}: majorities 2 + 2 out of 6
        let t = [0usize, 0, 1, 1, 1, 2];
        let p = [0usize, 0, 0, 1, 1, 1];
        assert!((purity(&t, &p).unwrap() - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_invariant_under_relabeling() {
        let mut rng = SeededRng::new(3);
        let n = 30;
        let t: Vec<usize> = (0..n).map(|_| rng.index(3)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.index(3)).collect();
        let relabel = [2usize, 0, 1];
        let p2: Vec<usize> = p.iter().map(|&v| relabel[v]).collect();
        assert_eq!(acc(&t, &p).unwrap(), acc(&t, &p2).unwrap());
        assert!((nmi(&t, &p).unwrap() - nmi(&t, &p2).unwrap()).abs() < 1e-12);
        assert_eq!(purity(&t, &p).unwrap(), purity(&t, &p2).unwrap());
    }

    #[test]
    fn purity_is_one_when_acc_is_one() {
        let mut rng = SeededRng::new(4);
        let n = 20;
        let t: Vec<usize> = (0..n).map(|_| rng.index(4)).collect();
        let relabel = [3usize, 1, 0, 2];
        let p: Vec<usize> = t.iter().map(|&v| relabel[v]).collect();
        assert_eq!(acc(&t, &p).unwrap(), 1.0);
        assert_eq!(purity(&t, &p).unwrap(), 1.0);
    }

    #[test]
    fn psnr_cases() {
        let x = Mat::from_vec(2, 2, vec![0.1, 0.4, 0.9, 0.3]);
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), PSNR_CAP);

        // peak 1, MSE 0.01 → 20 dB
        let xhat = x.map(|v| v + 0.1);
        assert!((psnr(&x, &xhat, 1.0).unwrap() - 20.0).abs() < 1e-10);

        // invert the formula: MSE 0.0279 gives ≈ 15.54 dB
        let mse: f64 = 0.0279;
        let shift = mse.sqrt();
        let xhat2 = x.map(|v| v + shift);
        assert!((psnr(&x, &xhat2, 1.0).unwrap() - 15.544).abs() < 0.01);
    }

    #[test]
    fn psnr_rejects_bad_input() {
        let x = Mat::zeros(2, 2);
        assert!(psnr(&x, &Mat::zeros(2, 3), 1.0).is_err());
        assert!(psnr(&x, &x, 0.0).is_err());
    }
}
