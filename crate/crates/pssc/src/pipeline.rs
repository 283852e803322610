//! Command implementations behind the CLI: dataset loading, the full
//! training/clustering pipeline, the out-of-sample variant, evaluation of
//! stored label files, and the synthetic generator.

use crate::affinity::{build_affinity, spectral_cluster};
use crate::config::{DataFormat, RunConfig};
use crate::error::{PsscError, Result};
use crate::io;
use crate::largescale::run_largescale;
use crate::linalg::{Mat, SeededRng};
use crate::metrics::MetricReport;
use crate::model::init_params;
use crate::synth;
use crate::train::{finetune, pretrain, TrainTrace};
use std::path::{Path, PathBuf};
use std::time::Instant;

const TRACE_HEADER: &str = "epoch,recon,locality,selfexpr,graph,label,total,confident_count";

/// Everything a pipeline run leaves behind, beyond the files on disk.
#[derive(Debug)]
pub struct RunArtifacts {
    pub labels: Vec<usize>,
    pub metrics: Option<MetricReport>,
    pub pretrain_trace: TrainTrace,
    pub finetune_trace: TrainTrace,
    pub report: Vec<(String, String)>,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<(Mat, Option<Vec<usize>>)> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| PsscError::config("config is missing 'dataset'"))?;
    match cfg.format {
        DataFormat::Csv => io::read_csv_dataset(path, cfg.labels_col),
        DataFormat::Idx => {
            let x = io::read_idx_images(path)?;
            let labels = match &cfg.labels_path {
                Some(lp) => {
                    let y = io::read_idx_labels(lp)?;
                    if y.len() != x.cols() {
                        return Err(PsscError::config(format!(
                            "label file has {} entries for {} images",
                            y.len(),
                            x.cols()
                        )));
                    }
                    Some(y)
                }
                None => None,
            };
            Ok((x, labels))
        }
        DataFormat::Matbin => {
            let x = io::read_matbin(path)?;
            let labels = match &cfg.labels_path {
                Some(lp) => Some(io::read_labels_csv(lp)?),
                None => None,
            };
            Ok((x, labels))
        }
    }
}

fn write_trace(path: &Path, traces: &[&TrainTrace]) -> Result<()> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    let mut epoch = 0usize;
    for trace in traces {
        for (bd, confident) in trace.epochs.iter().zip(&trace.confident_counts) {
            out.push_str(&format!(
                "{epoch},{},{},{},{},{},{},{confident}\n",
                bd.recon, bd.locality, bd.selfexpr, bd.graph, bd.label, bd.total
            ));
            epoch += 1;
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_report(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn push_metrics(report: &mut Vec<(String, String)>, metrics: &MetricReport) {
    report.push(("acc".into(), format!("{:.6}", metrics.acc)));
    report.push(("nmi".into(), format!("{:.6}", metrics.nmi)));
    report.push(("purity".into(), format!("{:.6}", metrics.purity)));
}

fn echo_config(report: &mut Vec<(String, String)>, cfg: &RunConfig) {
    for (k, v) in cfg.echo() {
        report.push((format!("config.{k}"), v));
    }
    report.push(("seed".into(), cfg.seed.to_string()));
}

/// Generate the synthetic union-of-subspaces dataset and write it as a
/// labeled CSV; returns the dataset path.
pub fn cmd_synth(cfg: &RunConfig, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let mut rng = SeededRng::new(cfg.seed);
    let (x, labels) = synth::generate(&cfg.synth, &mut rng)?;
    let path = out_dir.join("dataset.csv");
    io::write_csv_dataset(&path, &x, Some(&labels))?;
    Ok(path)
}

/// The full pipeline: pretrain → finetune → affinity → spectral clustering,
/// plus evaluation when true labels are available.
pub fn cmd_run(cfg: &RunConfig, out_dir: &Path, dump_affinity: bool) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let (x, true_labels) = load_dataset(cfg)?;
    let n = x.cols();
    let d = x.rows();

    let aff_cfg = cfg.affinity_config();
    aff_cfg.validate(n)?;

    let mut widths = vec![d];
    widths.extend_from_slice(&cfg.hidden);

    let root = SeededRng::new(cfg.seed);
    let mut init_rng = root.split(1);
    let params = init_params(&widths, n, cfg.k, &mut init_rng);

    let t = Instant::now();
    let (params, pretrain_trace) = pretrain(&x, params, &cfg.train)?;
    let secs_pretrain = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (params, finetune_trace) = finetune(&x, params, &cfg.train)?;
    let secs_finetune = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let affinity = build_affinity(&params.c, &aff_cfg)?;
    let result = spectral_cluster(&affinity, cfg.k, aff_cfg.kmeans_restarts, &root.split(2))?;
    let secs_cluster = t.elapsed().as_secs_f64();

    let metrics = match &true_labels {
        Some(y) => Some(MetricReport::compute(y, &result.labels)?),
        None => None,
    };

    let mut report: Vec<(String, String)> = vec![
        ("command".into(), "run".into()),
        ("n".into(), n.to_string()),
        ("d".into(), d.to_string()),
    ];
    echo_config(&mut report, cfg);
    report.push(("epochs.pretrain".into(), pretrain_trace.len().to_string()));
    report.push(("epochs.finetune".into(), finetune_trace.len().to_string()));
    report.push(("seconds.pretrain".into(), format!("{secs_pretrain:.3}")));
    report.push(("seconds.finetune".into(), format!("{secs_finetune:.3}")));
    report.push(("seconds.cluster".into(), format!("{secs_cluster:.3}")));
    report.push(("inertia".into(), format!("{:.6}", result.inertia)));
    if let Some(m) = &metrics {
        push_metrics(&mut report, m);
    }

    io::write_labels_csv(&out_dir.join("labels.csv"), &result.labels)?;
    write_trace(&out_dir.join("trace.csv"), &[&pretrain_trace, &finetune_trace])?;
    write_report(&out_dir.join("report.txt"), &report)?;
    io::write_checkpoint(&out_dir.join("checkpoint.matbin"), &params)?;
    if dump_affinity {
        io::write_matbin(&out_dir.join("affinity.matbin"), &affinity)?;
    }

    Ok(RunArtifacts {
        labels: result.labels,
        metrics,
        pretrain_trace,
        finetune_trace,
        report,
    })
}

/// Out-of-sample pipeline: train on a core subsample, propagate labels to the
/// rest, evaluate over all n when true labels exist.
pub fn cmd_largescale(cfg: &RunConfig, out_dir: &Path, dump_affinity: bool) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let (x, true_labels) = load_dataset(cfg)?;
    let n = x.cols();
    let d = x.rows();
    let m = cfg.subsample_size(n);

    let aff_cfg = cfg.affinity_config();
    aff_cfg.validate(m)?;

    let mut widths = vec![d];
    widths.extend_from_slice(&cfg.hidden);

    let root = SeededRng::new(cfg.seed);
    let t = Instant::now();
    let result = run_largescale(&x, &widths, cfg.k, m, &cfg.train, &aff_cfg, &root)?;
    let secs_total = t.elapsed().as_secs_f64();

    let metrics = match &true_labels {
        Some(y) => Some(MetricReport::compute(y, &result.labels)?),
        None => None,
    };

    let mut report: Vec<(String, String)> = vec![
        ("command".into(), "largescale".into()),
        ("n".into(), n.to_string()),
        ("d".into(), d.to_string()),
        ("m".into(), m.to_string()),
    ];
    echo_config(&mut report, cfg);
    report.push(("seconds.total".into(), format!("{secs_total:.3}")));
    report.push(("inertia".into(), format!("{:.6}", result.inertia)));
    if let Some(mr) = &metrics {
        push_metrics(&mut report, mr);
    }

    io::write_labels_csv(&out_dir.join("labels.csv"), &result.labels)?;
    write_trace(&out_dir.join("trace.csv"), &[])?;
    write_report(&out_dir.join("report.txt"), &report)?;
    if dump_affinity {
        io::write_matbin(&out_dir.join("affinity.matbin"), &result.affinity)?;
    }

    Ok(RunArtifacts {
        labels: result.labels,
        metrics,
        pretrain_trace: TrainTrace::default(),
        finetune_trace: TrainTrace::default(),
        report,
    })
}

/// Score a predicted label CSV against a reference one.
pub fn cmd_eval(pred: &Path, truth: &Path, out_dir: Option<&Path>) -> Result<MetricReport> {
    let pred_labels = io::read_labels_csv(pred)?;
    let true_labels = io::read_labels_csv(truth)?;
    if pred_labels.len() != true_labels.len() {
        return Err(PsscError::config(format!(
            "label files disagree on length: {} vs {}",
            pred_labels.len(),
            true_labels.len()
        )));
    }
    let metrics = MetricReport::compute(&true_labels, &pred_labels)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut report: Vec<(String, String)> = vec![
            ("command".into(), "eval".into()),
            ("pred".into(), pred.display().to_string()),
            ("truth".into(), truth.display().to_string()),
            ("n".into(), pred_labels.len().to_string()),
        ];
        push_metrics(&mut report, &metrics);
        write_report(&dir.join("report.txt"), &report)?;
    }
    Ok(metrics)
}
