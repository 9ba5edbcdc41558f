//! Experiment configuration: a flat INI-style key-value format with
//! sections, validated up front against the module invariants.
//!
//! ```text
//! seed = 1
//!
//! [data]
//! format = idx
//! images = data/mnist/train-images-idx3-ubyte
//! labels = data/mnist/train-labels-idx1-ubyte
//! images2 = data/mnist/t10k-images-idx3-ubyte   ; optional, pooled
//! labels2 = data/mnist/t10k-labels-idx1-ubyte
//!
//! [split]
//! n_train = 10000
//! n_valid = 10000
//! n_test = 50000
//! shuffle = true
//!
//! [ae]
//! variant = mae
//! hidden = 8
//! lambda_m = 0.4
//!
//! [train]
//! batch_size = 100
//! learning_rate = 0.1
//! max_epochs = 100
//! patience = 10
//!
//! [classifier]
//! batch_size = 100
//! learning_rate = 0.5
//! max_epochs = 200
//!
//! [output]
//! dir = out/mnist_mae
//! ```
//!
//! Comments start with `#` or `;`. Unknown keys are rejected so typos fail
//! loudly instead of silently using defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{self, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{AEConfig, MMode, Sparsity, Variant};
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Idx {
        images: PathBuf,
        labels: PathBuf,
        /// Optional second pair pooled into the same dataset (e.g. the
        /// train and test halves of MNIST pooled before a fresh split).
        images2: Option<PathBuf>,
        labels2: Option<PathBuf>,
    },
    Amat {
        path: PathBuf,
        path2: Option<PathBuf>,
    },
    Csv {
        path: PathBuf,
        label_column: usize,
        header: bool,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub source: DataSource,
    /// Min-max normalize features after loading.
    pub normalize: bool,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub shuffle_split: bool,
    pub ae: AEConfig,
    pub hidden: usize,
    pub train: TrainConfig,
    pub classifier: TrainConfig,
    pub out_dir: PathBuf,
}

/// Raw parsed INI: section -> key -> value, with consumption tracking so
/// unknown keys can be reported.
struct Ini {
    values: BTreeMap<String, BTreeMap<String, String>>,
}

impl Ini {
    fn parse(text: &str) -> Result<Ini> {
        let mut values: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find(['#', ';']) {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {}: unterminated section header", lineno + 1))
                })?;
                section = name.trim().to_string();
                values.entry(section.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let prev = values
                .entry(section.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
            if prev.is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{}'",
                    lineno + 1,
                    key.trim()
                )));
            }
        }
        Ok(Ini { values })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.values.get_mut(section).and_then(|s| s.remove(key))
    }

    fn require(&mut self, section: &str, key: &str) -> Result<String> {
        self.take(section, key).ok_or_else(|| {
            Error::Config(format!("missing key '{}' in section [{}]", key, section))
        })
    }

    fn parse_value<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T> {
        raw.parse().map_err(|_| {
            Error::Config(format!(
                "key '{}' in section [{}]: cannot parse '{}'",
                key, section, raw
            ))
        })
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str) -> Result<T> {
        let raw = self.require(section, key)?;
        Self::parse_value(section, key, &raw)
    }

    fn get_or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T> {
        match self.take(section, key) {
            Some(raw) => Self::parse_value(section, key, &raw),
            None => Ok(default),
        }
    }

    fn finish(self) -> Result<()> {
        for (section, keys) in &self.values {
            if let Some(key) = keys.keys().next() {
                return Err(Error::Config(format!(
                    "unknown key '{}' in section [{}]",
                    key, section
                )));
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {}", path.display(), e))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut ini = Ini::parse(text)?;

        let seed: u64 = ini.get_or("", "seed", 1)?;

        let format: String = ini.require("data", "format")?;
        let source = match format.as_str() {
            "idx" => DataSource::Idx {
                images: PathBuf::from(ini.require("data", "images")?),
                labels: PathBuf::from(ini.require("data", "labels")?),
                images2: ini.take("data", "images2").map(PathBuf::from),
                labels2: ini.take("data", "labels2").map(PathBuf::from),
            },
            "amat" => DataSource::Amat {
                path: PathBuf::from(ini.require("data", "path")?),
                path2: ini.take("data", "path2").map(PathBuf::from),
            },
            "csv" => DataSource::Csv {
                path: PathBuf::from(ini.require("data", "path")?),
                label_column: ini.get_or("data", "label_column", 0)?,
                header: ini.get_or("data", "header", false)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown data format '{}' (expected idx, amat, or csv)",
                    other
                )))
            }
        };
        if let DataSource::Idx {
            images2, labels2, ..
        } = &source
        {
            if images2.is_some() != labels2.is_some() {
                return Err(Error::Config(
                    "images2 and labels2 must be given together".into(),
                ));
            }
        }
        let normalize = ini.get_or("data", "normalize", false)?;

        let n_train: usize = ini.get("split", "n_train")?;
        let n_valid: usize = ini.get("split", "n_valid")?;
        let n_test: usize = ini.get("split", "n_test")?;
        let shuffle_split: bool = ini.get_or("split", "shuffle", true)?;

        let variant = Variant::parse(&ini.require("ae", "variant")?)?;
        let hidden: usize = ini.get("ae", "hidden")?;
        if hidden < 1 {
            return Err(Error::Config("hidden must be at least 1".into()));
        }
        let sparsity = match ini
            .take("ae", "sparsity")
            .unwrap_or_else(|| "weight_decay".into())
            .as_str()
        {
            "weight_decay" => {
                // A stray rho would silently do nothing; reject it.
                if ini.take("ae", "rho").is_some() {
                    return Err(Error::Config(
                        "rho is only meaningful with sparsity = kl".into(),
                    ));
                }
                Sparsity::WeightDecay
            }
            "kl" => Sparsity::Kl {
                rho: ini.get_or("ae", "rho", 0.1)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown sparsity '{}' (expected weight_decay or kl)",
                    other
                )))
            }
        };
        let ae = AEConfig {
            variant,
            lambda_m: ini.get_or("ae", "lambda_m", 0.0)?,
            lambda_c: ini.get_or("ae", "lambda_c", 0.0)?,
            lambda_s: ini.get_or("ae", "lambda_s", 0.0)?,
            alpha: ini.get_or("ae", "alpha", 0.0)?,
            m_mode: MMode::parse(
                &ini.take("ae", "m_mode").unwrap_or_else(|| "invnorm".into()),
            )?,
            sparsity,
        };
        ae.validate()?;

        let read_train = |section: &str, ini: &mut Ini| -> Result<TrainConfig> {
            let cfg = TrainConfig {
                batch_size: ini.get(section, "batch_size")?,
                learning_rate: ini.get(section, "learning_rate")?,
                max_epochs: ini.get(section, "max_epochs")?,
                patience: ini.get_or(section, "patience", 0)?,
                seed: 0, // derived from the experiment seed at run time
                shuffle_each_epoch: ini.get_or(section, "shuffle_each_epoch", true)?,
            };
            cfg.validate()?;
            Ok(cfg)
        };
        let train = read_train("train", &mut ini)?;
        let classifier = read_train("classifier", &mut ini)?;

        let out_dir = PathBuf::from(
            ini.take("output", "dir").unwrap_or_else(|| "out".into()),
        );

        ini.finish()?;
        Ok(ExperimentConfig {
            seed,
            source,
            normalize,
            n_train,
            n_valid,
            n_test,
            shuffle_split,
            ae,
            hidden,
            train,
            classifier,
            out_dir,
        })
    }

    /// Load (and optionally pool) the configured dataset.
    pub fn load_data(&self) -> Result<Dataset> {
        let loaded = match &self.source {
            DataSource::Idx {
                images,
                labels,
                images2,
                labels2,
            } => {
                let first = data::load_idx(images, labels)?;
                match (images2, labels2) {
                    (Some(i2), Some(l2)) => first.concat(&data::load_idx(i2, l2)?)?,
                    _ => first,
                }
            }
            DataSource::Amat { path, path2 } => {
                let first = data::load_amat(path)?;
                match path2 {
                    Some(p2) => first.concat(&data::load_amat(p2)?)?,
                    None => first,
                }
            }
            DataSource::Csv {
                path,
                label_column,
                header,
            } => data::load_csv(path, *label_column, *header)?,
        };
        Ok(if self.normalize {
            data::normalize(&loaded)
        } else {
            loaded
        })
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            n_train: self.n_train,
            n_valid: self.n_valid,
            n_test: self.n_test,
            seed: self.seed,
            shuffle: self.shuffle_split,
        }
    }

    /// Load the data and carve it according to the configured split.
    pub fn load_splits(&self) -> Result<(Dataset, Dataset, Dataset)> {
        let all = self.load_data()?;
        data::split(&all, &self.split_spec())
    }
}
