//! Flat key/value run configuration (`key = value` per line, `#` comments).

use crate::affinity::AffinityConfig;
use crate::error::{PsscError, Result};
use crate::synth::SynthSpec;
use crate::train::TrainConfig;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "format",
    "labels",
    "labels_col",
    "hidden",
    "k",
    "q",
    "alpha",
    "normalize_rows",
    "kmeans_restarts",
    "gamma1",
    "gamma2",
    "gamma3",
    "lr_pretrain",
    "lr_finetune",
    "epochs_pretrain",
    "epochs_finetune",
    "thres",
    "margin",
    "warmup_epochs",
    "freeze_laplacian",
    "normalize_pair_losses",
    "seed",
    "m",
    "d",
    "per_cluster",
    "sigma",
];

/// Parsed key/value file with typed accessors.
#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    map: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<KvConfig> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PsscError::config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(PsscError::config(format!(
                    "line {}: unknown key '{key}'",
                    lineno + 1
                )));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(KvConfig { map })
    }

    pub fn from_file(path: &Path) -> Result<KvConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PsscError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    fn typed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.map.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| PsscError::config(format!("bad value for '{key}': '{raw}'"))),
        }
    }

    fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.map.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse()
                        .map_err(|_| PsscError::config(format!("bad value for '{key}': '{raw}'")))
                })
                .collect(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Idx,
    Matbin,
}

impl std::str::FromStr for DataFormat {
    type Err = PsscError;

    fn from_str(s: &str) -> Result<DataFormat> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "idx" => Ok(DataFormat::Idx),
            "matbin" => Ok(DataFormat::Matbin),
            other => Err(PsscError::config(format!(
                "format must be csv, idx, or matbin, got '{other}'"
            ))),
        }
    }
}

/// Everything the `run` and `largescale` pipelines need, plus the synthetic
/// generator parameters so one file can drive `synth` and then `run`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub format: DataFormat,
    /// Separate label file (IDX label format) when present.
    pub labels_path: Option<PathBuf>,
    /// CSV rows carry the true label in their final column.
    pub labels_col: bool,
    /// Encoder widths after the input layer; the last entry is the latent
    /// dimension. The decoder mirrors them.
    pub hidden: Vec<usize>,
    pub k: usize,
    pub q: usize,
    pub alpha: f64,
    pub normalize_rows: bool,
    pub kmeans_restarts: usize,
    pub train: TrainConfig,
    pub seed: u64,
    /// Core subsample size for the out-of-sample pipeline; 0 means
    /// min(n, 5000).
    pub m: usize,
    pub synth: SynthSpec,
    kv: KvConfig,
}

impl RunConfig {
    pub fn from_kv(kv: KvConfig) -> Result<RunConfig> {
        let defaults = TrainConfig::default();
        let synth_defaults = SynthSpec::default();
        let seed = kv.typed("seed", 0u64)?;
        let k = kv.typed("k", 3usize)?;
        let q = kv.typed("q", 4usize)?;
        let train = TrainConfig {
            gamma1: kv.typed("gamma1", defaults.gamma1)?,
            gamma2: kv.typed("gamma2", defaults.gamma2)?,
            gamma3: kv.typed("gamma3", defaults.gamma3)?,
            lr_pretrain: kv.typed("lr_pretrain", defaults.lr_pretrain)?,
            // the CLI ships a faster fine-tune rate than the library default:
            // at desk scale (n in the hundreds) 1e-4 leaves C half-formed
            // within any reasonable epoch budget
            lr_finetune: kv.typed("lr_finetune", 1e-3)?,
            epochs_pretrain: kv.typed("epochs_pretrain", defaults.epochs_pretrain)?,
            epochs_finetune: kv.typed("epochs_finetune", defaults.epochs_finetune)?,
            thres: kv.typed("thres", defaults.thres)?,
            margin: kv.typed("margin", defaults.margin)?,
            warmup_epochs: kv.typed("warmup_epochs", defaults.warmup_epochs)?,
            seed,
            freeze_laplacian: kv.typed("freeze_laplacian", defaults.freeze_laplacian)?,
            normalize_pair_losses: kv.typed(
                "normalize_pair_losses",
                defaults.normalize_pair_losses,
            )?,
        };
        train.validate()?;
        let cfg = RunConfig {
            dataset: kv.raw("dataset").map(PathBuf::from),
            format: kv.typed("format", DataFormat::Csv)?,
            labels_path: kv.raw("labels").map(PathBuf::from),
            labels_col: kv.typed("labels_col", false)?,
            // a single linear encoder layer; plenty for desk-scale data and
            // the latent must hold k·q + 1 affinity directions
            hidden: kv.usize_list("hidden", &[20])?,
            k,
            q,
            alpha: kv.typed("alpha", 1.0f64)?,
            normalize_rows: kv.typed("normalize_rows", true)?,
            kmeans_restarts: kv.typed("kmeans_restarts", 10usize)?,
            train,
            seed,
            m: kv.typed("m", 0usize)?,
            synth: SynthSpec {
                k,
                q,
                d: kv.typed("d", synth_defaults.d)?,
                per_cluster: kv.typed("per_cluster", synth_defaults.per_cluster)?,
                sigma: kv.typed("sigma", synth_defaults.sigma)?,
                seed,
            },
            kv,
        };
        if cfg.hidden.is_empty() || cfg.hidden.iter().any(|&w| w == 0) {
            return Err(PsscError::config("hidden widths must be positive"));
        }
        if cfg.k < 2 {
            return Err(PsscError::config("cluster count k must be at least 2"));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        RunConfig::from_kv(KvConfig::from_file(path)?)
    }

    /// CLI flags win over file values; re-parse so every derived field agrees.
    pub fn with_overrides(mut self, seed: Option<u64>, labels_col: bool) -> Result<RunConfig> {
        if let Some(seed) = seed {
            self.kv.set("seed", seed);
        }
        if labels_col {
            self.kv.set("labels_col", true);
        }
        RunConfig::from_kv(self.kv)
    }

    pub fn affinity_config(&self) -> AffinityConfig {
        AffinityConfig {
            k: self.k,
            q: self.q,
            alpha_exp: self.alpha,
            kmeans_restarts: self.kmeans_restarts,
            seed: self.seed,
            normalize_rows: self.normalize_rows,
        }
    }

    pub fn subsample_size(&self, n: usize) -> usize {
        if self.m == 0 {
            n.min(5000)
        } else {
            self.m
        }
    }

    /// Key/value echo for the run report; re-runnable as a config file.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.kv
            .entries()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}
