//! End-to-end experiment runs driven by a key-value config file.
//!
//! ```text
//! # comments start with '#'
//! dataset = pa          # pa | er | file
//! n = 500
//! seed = 7
//! k = 50
//! dynamics = deletions  # deletions | batch
//! deletions = 50
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connectivity::{label_top_k, labels_to_string};
use crate::datasets::{sha256_hex, DatasetManifest, DatasetSpec};
use crate::error::{Result, ShsError};
use crate::features::build_features;
use crate::harness::{
    make_batch_update, make_deletion_sequence, run_bench, Baseline, BenchOptions, BenchReport,
    SnapshotSequence,
};
use crate::model::{train, TrainConfig, TrainLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsMode {
    Deletions,
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub mode: DynamicsMode,
    pub deletions: usize,
    pub insertions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub k: usize,
    pub train: TrainConfig,
    pub dynamics: DynamicsConfig,
    pub bench: BenchOptions,
    pub root_seed: u64,
    pub out: PathBuf,
}

/// Independent seeds for each stage, drawn in a fixed order from the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub dataset: u64,
    pub train: u64,
    pub dynamics: u64,
}

impl StageSeeds {
    pub fn derive(root: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(root);
        StageSeeds {
            dataset: rng.next_u64(),
            train: rng.next_u64(),
            dynamics: rng.next_u64(),
        }
    }
}

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| ShsError::config(format!("bad value {v:?} for {key}: {e}")))
        })
        .transpose()
}

fn require<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    get(map, key)?.ok_or_else(|| ShsError::config(format!("missing required key {key}")))
}

pub const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "n",
    "p",
    "path",
    "seed",
    "k",
    "epochs",
    "lr",
    "weight_decay",
    "hidden",
    "dynamics",
    "deletions",
    "insertions",
    "repetitions",
    "baseline",
    "out",
];

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ShsError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: format!("expected key = value, got {line:?}"),
        })?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ShsError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("unknown key {key:?}"),
            });
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

impl ExperimentConfig {
    /// Parses `key = value` lines. Relative dataset paths resolve against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        ExperimentConfig::from_map(&parse_key_values(text, base_dir)?, base_dir)
    }

    /// Builds a config from already-parsed keys (see [`parse_key_values`]).
    pub fn from_map(map: &BTreeMap<String, String>, base_dir: &Path) -> Result<Self> {
        if let Some(key) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(ShsError::config(format!("unknown key {key:?}")));
        }
        let root_seed: u64 = get(map, "seed")?.unwrap_or(0);
        let seeds = StageSeeds::derive(root_seed);
        let kind: String = require(map, "dataset")?;
        let dataset = match kind.as_str() {
            "pa" => DatasetSpec::Pa {
                n: require(map, "n")?,
                seed: seeds.dataset,
            },
            "er" => DatasetSpec::Er {
                n: require(map, "n")?,
                p: require(map, "p")?,
                seed: seeds.dataset,
            },
            "file" => {
                let p: PathBuf = require(map, "path")?;
                DatasetSpec::File {
                    path: if p.is_absolute() { p } else { base_dir.join(p) },
                }
            }
            other => return Err(ShsError::config(format!("unknown dataset kind {other:?}"))),
        };
        dataset.validate()?;

        let defaults = TrainConfig::default();
        let train = TrainConfig {
            epochs: get(map, "epochs")?.unwrap_or(defaults.epochs),
            learning_rate: get(map, "lr")?.unwrap_or(defaults.learning_rate),
            weight_decay: get(map, "weight_decay")?.unwrap_or(defaults.weight_decay),
            hidden: get(map, "hidden")?.unwrap_or(defaults.hidden),
            seed: seeds.train,
            ..defaults
        };
        train.validate()?;

        let mode = match get::<String>(map, "dynamics")?
            .as_deref()
            .unwrap_or("deletions")
        {
            "deletions" => DynamicsMode::Deletions,
            "batch" => DynamicsMode::Batch,
            other => return Err(ShsError::config(format!("unknown dynamics mode {other:?}"))),
        };
        let dynamics = match mode {
            DynamicsMode::Deletions => DynamicsConfig {
                mode,
                deletions: get(map, "deletions")?.unwrap_or(50),
                insertions: 0,
            },
            DynamicsMode::Batch => DynamicsConfig {
                mode,
                deletions: get(map, "deletions")?.unwrap_or(5),
                insertions: get(map, "insertions")?.unwrap_or(5),
            },
        };

        let k: usize = require(map, "k")?;
        if k == 0 {
            return Err(ShsError::InvalidK { k, n: 0 });
        }
        let baseline = match get::<String>(map, "baseline")?
            .as_deref()
            .unwrap_or("greedy")
        {
            "greedy" => Baseline::Greedy,
            "one-shot" => Baseline::OneShot,
            other => return Err(ShsError::config(format!("unknown baseline {other:?}"))),
        };
        let bench = BenchOptions {
            k,
            repetitions: get(map, "repetitions")?.unwrap_or(3),
            baseline,
        };
        let out = get::<PathBuf>(map, "out")?.unwrap_or_else(|| PathBuf::from("experiment-out"));

        Ok(ExperimentConfig {
            dataset,
            k,
            train,
            dynamics,
            bench,
            root_seed,
            out,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ShsError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::parse(&text, base)
    }

    /// Like [`ExperimentConfig::load`], with `overrides` replacing file keys.
    pub fn load_with(path: &Path, overrides: &BTreeMap<String, String>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ShsError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut map = parse_key_values(&text, path)?;
        map.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
        ExperimentConfig::from_map(&map, base)
    }
}

/// Reproducibility record written next to the artifacts. Holds no timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub root_seed: u64,
    pub seeds: StageSeeds,
    pub config: ExperimentConfig,
    pub dataset: DatasetManifest,
    /// SHA-256 of each deterministic artifact, keyed by file name.
    pub checksums: BTreeMap<String, String>,
    pub test_accuracy: f64,
    pub test_f1: f64,
    pub snapshot_accuracy: Vec<f64>,
}

pub struct ExperimentOutputs {
    pub manifest: RunManifest,
    pub report: BenchReport,
    pub log: TrainLog,
}

/// One line per snapshot: `<snapshot> <predicted spanners...>`.
pub fn predictions_to_string(report: &BenchReport) -> String {
    let mut out = String::new();
    for r in &report.records {
        let ids: Vec<String> = r.predicted_spanners.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{} {}", r.snapshot, ids.join(" "));
    }
    out
}

pub fn build_sequence(
    g: &crate::graph::Graph,
    dynamics: &DynamicsConfig,
    seed: u64,
) -> Result<SnapshotSequence> {
    match dynamics.mode {
        DynamicsMode::Deletions => make_deletion_sequence(g, dynamics.deletions, seed),
        DynamicsMode::Batch => make_batch_update(g, dynamics.deletions, dynamics.insertions, seed),
    }
}

fn write(
    dir: &Path,
    name: &str,
    contents: &str,
    sums: Option<&mut BTreeMap<String, String>>,
) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| ShsError::io(&path, e))?;
    if let Some(sums) = sums {
        sums.insert(name.to_string(), sha256_hex(contents.as_bytes()));
    }
    Ok(())
}

/// generate -> label -> train -> bench, writing every artifact to `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutputs> {
    let dir = &cfg.out;
    std::fs::create_dir_all(dir).map_err(|e| ShsError::io(dir, e))?;
    let seeds = StageSeeds::derive(cfg.root_seed);
    let mut sums = BTreeMap::new();

    let g = cfg.dataset.build()?;
    let dataset = DatasetManifest::describe(&cfg.dataset, &g);
    write(dir, "graph.txt", &g.to_edge_list(), Some(&mut sums))?;
    log::info!(
        "{}: n={} m={}",
        dataset.name,
        g.node_count(),
        g.edge_count()
    );

    let truth = label_top_k(&g, cfg.k)?;
    let labels = truth.labels(g.node_count());
    write(
        dir,
        "labels.txt",
        &labels_to_string(&labels),
        Some(&mut sums),
    )?;

    let fm = build_features(&g);
    let outcome = train(&g, &fm, &labels, &cfg.train)?;
    write(
        dir,
        "model.json",
        &outcome.model.to_json()?,
        Some(&mut sums),
    )?;
    write(dir, "train_log.csv", &outcome.log.to_csv(), Some(&mut sums))?;
    log::info!(
        "trained: test accuracy {:.4}, test F1 {:.4}",
        outcome.test.accuracy,
        outcome.test.f1
    );

    let seq = build_sequence(&g, &cfg.dynamics, seeds.dynamics)?;
    let report = run_bench(&dataset.name, &seq, &outcome.model, &cfg.bench)?;
    write(
        dir,
        "predictions.txt",
        &predictions_to_string(&report),
        Some(&mut sums),
    )?;
    write(dir, "bench.json", &report.to_json()?, None)?;
    write(dir, "bench.csv", &report.to_csv(), None)?;

    let manifest = RunManifest {
        root_seed: cfg.root_seed,
        seeds,
        config: cfg.clone(),
        dataset,
        checksums: sums,
        test_accuracy: outcome.test.accuracy,
        test_f1: outcome.test.f1,
        snapshot_accuracy: report.records.iter().map(|r| r.accuracy).collect(),
    };
    write(
        dir,
        "manifest.json",
        &serde_json::to_string_pretty(&manifest)?,
        None,
    )?;
    Ok(ExperimentOutputs {
        manifest,
        report,
        log: outcome.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_config_with_defaults() {
        let text = "dataset = pa\nn = 120 # nodes\nseed = 7\nk = 10\ndeletions = 4\n";
        let cfg = ExperimentConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.k, 10);
        assert_eq!(cfg.train.epochs, 200);
        assert_eq!(cfg.dynamics.deletions, 4);
        assert_eq!(cfg.dynamics.mode, DynamicsMode::Deletions);
        let seeds = StageSeeds::derive(7);
        assert_eq!(cfg.train.seed, seeds.train);
        assert!(matches!(cfg.dataset, DatasetSpec::Pa { n: 120, seed } if seed == seeds.dataset));
    }

    #[test]
    fn rejects_bad_configs() {
        let base = Path::new(".");
        assert!(ExperimentConfig::parse("dataset = pa\nk = 3\n", base).is_err());
        assert!(ExperimentConfig::parse("dataset = pa\nn = 10\nk = 0\n", base).is_err());
        assert!(ExperimentConfig::parse("dataset = pa\nn = 10\nk = 1\nbogus = 1\n", base).is_err());
        assert!(ExperimentConfig::parse("dataset = er\nn = 10\np = 2\nk = 1\n", base).is_err());
        assert!(ExperimentConfig::parse("just words\n", base).is_err());
    }

    #[test]
    fn stage_seeds_differ() {
        let s = StageSeeds::derive(1);
        assert_ne!(s.dataset, s.train);
        assert_ne!(s.train, s.dynamics);
        assert_eq!(s, StageSeeds::derive(1));
    }
}
