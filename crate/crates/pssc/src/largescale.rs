//! Out-of-sample path: train on a random subsample, cluster it, and label the
//! remainder by nearest-neighbor search in the learned latent space.

use crate::affinity::{build_affinity, spectral_cluster, AffinityConfig, ClusterResult};
use crate::error::{PsscError, Result};
use crate::linalg::{Mat, SeededRng};
use crate::model::{forward, init_params, ForwardMode};
use crate::train::{finetune, pretrain, TrainConfig};

/// Core/rest split of the sample columns.
#[derive(Debug, Clone)]
pub struct SplitPlan {
    pub core_indices: Vec<usize>,
    pub rest_indices: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn sample(n: usize, m: usize, rng: &mut SeededRng) -> Result<SplitPlan> {
        if m > n {
            return Err(PsscError::config(format!(
                "subsample size m = {m} exceeds n = {n}"
            )));
        }
        let core_indices = rng.sample_indices(n, m);
        let mut in_core = vec![false; n];
        for &i in &core_indices {
            in_core[i] = true;
        }
        let rest_indices = (0..n).filter(|&i| !in_core[i]).collect();
        Ok(SplitPlan {
            core_indices,
            rest_indices,
            seed: rng.seed(),
        })
    }
}

/// Majority vote among the nearest core columns (Euclidean distance).
/// Vote ties break to the smallest label, distance ties to the smallest
/// core index.
pub fn knn_predict(
    z_core: &Mat,
    y_core: &[usize],
    z_query: &Mat,
    neighbors: usize,
) -> Result<Vec<usize>> {
    if z_core.cols() == 0 {
        return Err(PsscError::contract("knn_predict: core set is empty"));
    }
    if z_core.rows() != z_query.rows() {
        return Err(PsscError::contract(
            "knn_predict: core and query dimensions differ",
        ));
    }
    if y_core.len() != z_core.cols() {
        return Err(PsscError::contract(
            "knn_predict: core labels do not match core columns",
        ));
    }
    let neighbors = neighbors.max(1).min(z_core.cols());
    let mut out = Vec::with_capacity(z_query.cols());
    for q in 0..z_query.cols() {
        let mut dists: Vec<(f64, usize)> = (0..z_core.cols())
            .map(|c| {
                let mut d = 0.0;
                for r in 0..z_core.rows() {
                    let diff = z_core.get(r, c) - z_query.get(r, q);
                    d += diff * diff;
                }
                (d, c)
            })
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut votes = std::collections::BTreeMap::new();
        for &(_, c) in dists.iter().take(neighbors) {
            *votes.entry(y_core[c]).or_insert(0usize) += 1;
        }
        // BTreeMap iterates labels ascending, so > keeps the smallest on ties
        let mut best_label = 0usize;
        let mut best_count = 0usize;
        for (&label, &count) in &votes {
            if count > best_count {
                best_count = count;
                best_label = label;
            }
        }
        out.push(best_label);
    }
    Ok(out)
}

/// Full out-of-sample pipeline: subsample m columns, train PSSC on the core,
/// spectral-cluster its affinity, then 1-NN the rest in latent space. Labels
/// come back in the original column order.
pub fn run_largescale(
    x: &Mat,
    widths: &[usize],
    k: usize,
    m: usize,
    train_cfg: &TrainConfig,
    aff_cfg: &AffinityConfig,
    rng: &SeededRng,
) -> Result<ClusterResult> {
    let n = x.cols();
    if m < k {
        return Err(PsscError::config(format!(
            "subsample size m = {m} is below the cluster count k = {k}"
        )));
    }
    let mut split_rng = rng.split(1);
    let plan = SplitPlan::sample(n, m, &mut split_rng)?;

    let x_core = Mat::from_fn(x.rows(), m, |i, j| x.get(i, plan.core_indices[j]));

    let mut init_rng = rng.split(2);
    let params = init_params(widths, m, k, &mut init_rng);
    let (params, _) = pretrain(&x_core, params, train_cfg)?;
    let (params, _) = finetune(&x_core, params, train_cfg)?;

    let affinity = build_affinity(&params.c, aff_cfg)?;
    let core_result = spectral_cluster(&affinity, k, aff_cfg.kmeans_restarts, &rng.split(3))?;

    // encoder-only pass over everything; the self-expression layer never
    // sees out-of-sample points
    let z_all = forward(&params, x, ForwardMode::Pretrain)?.z;
    let z_core = Mat::from_fn(z_all.rows(), m, |i, j| z_all.get(i, plan.core_indices[j]));
    let z_rest = Mat::from_fn(z_all.rows(), plan.rest_indices.len(), |i, j| {
        z_all.get(i, plan.rest_indices[j])
    });
    let rest_labels = if plan.rest_indices.is_empty() {
        Vec::new()
    } else {
        knn_predict(&z_core, &core_result.labels, &z_rest, 1)?
    };

    let mut labels = vec![0usize; n];
    for (j, &i) in plan.core_indices.iter().enumerate() {
        labels[i] = core_result.labels[j];
    }
    for (j, &i) in plan.rest_indices.iter().enumerate() {
        labels[i] = rest_labels[j];
    }

    Ok(ClusterResult {
        labels,
        affinity: core_result.affinity,
        inertia: core_result.inertia,
    })
}
