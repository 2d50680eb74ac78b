//! Experiment configuration.
//!
//! The file format is a flat `key = value` list split into `[section]`s. `#`
//! starts a comment, lists are comma separated, and keys before the first
//! section header belong to the unnamed root section.
//!
//! | section       | key              | default                              |
//! |---------------|------------------|--------------------------------------|
//! | `model`       | `token_count`    | 16                                   |
//! |               | `channel_dim`    | 8                                    |
//! |               | `hidden_dim`     | 32                                   |
//! |               | `num_blocks`     | 4                                    |
//! |               | `num_heads`      | 4                                    |
//! |               | `cond_dim`       | 16                                   |
//! |               | `weight_seed`    | 42                                   |
//! |               | `weights_path`   | unset (weights drawn from the seed)  |
//! | `schedule`    | `steps`          | 30                                   |
//! |               | `beta_start`     | 0.0001                               |
//! |               | `beta_end`       | 0.02                                 |
//! | `policy`      | `delta`          | 0.1                                  |
//! |               | `mode`           | `modulated_input`                    |
//! |               | `rescaler_path`  | unset (identity rescaler)            |
//! | `run`         | `seeds`          | 0, 1, ..., 9                         |
//! |               | `output_dir`     | `out`                                |
//! |               | `uniform_interval` | unset (no uniform row)             |
//! |               | `reduced_steps`  | unset (no reduced-timestep row)      |
//! | `calibration` | `order`          | 4                                    |
//! |               | `seeds`          | 0, 1, ..., 7                         |
//! | `sweep`       | `deltas`         | 0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3   |
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::calibration::DEFAULT_ORDER;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::policy::IndicatorMode;
use crate::sampler::{linear_beta_schedule, NoiseSchedule};

#[derive(Debug, Clone, Default)]
pub struct Section {
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn required(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing key {key:?}"),
        })
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|e| Error::Config {
                line: *line,
                message: format!("{key}: {e}"),
            }),
        }
    }

    fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| Error::Config {
                line: *line,
                message: format!("{key}: {e}"),
            }),
        }
    }

    fn list_or<T: std::str::FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(default),
            Some((v, line)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|e| Error::Config {
                        line: *line,
                        message: format!("{key}: {s:?}: {e}"),
                    })
                })
                .collect(),
        }
    }

    fn keys(&self) -> impl Iterator<Item = (&String, usize)> {
        self.entries.iter().map(|(k, (_, l))| (k, *l))
    }
}

#[derive(Debug, Clone, Default)]
pub struct KeyValueDoc {
    sections: BTreeMap<String, Section>,
}

impl KeyValueDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KeyValueDoc::default();
        let mut current = String::new();
        doc.sections.entry(current.clone()).or_default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| Error::Config {
                    line: line_no,
                    message: format!("unterminated section header {line:?}"),
                })?;
                current = name.trim().to_string();
                doc.sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Config {
                    line: line_no,
                    message: "empty key".into(),
                });
            }
            let section = doc.sections.get_mut(&current).expect("inserted above");
            if section
                .entries
                .insert(key.to_string(), (v.trim().to_string(), line_no))
                .is_some()
            {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Section {
        self.sections.get(name).cloned().unwrap_or_default()
    }

    fn check_known(&self, known: &[(&str, &[&str])]) -> Result<()> {
        for (name, section) in &self.sections {
            let allowed = known
                .iter()
                .find(|(s, _)| s == name)
                .map(|(_, keys)| *keys)
                .ok_or_else(|| Error::Config {
                    line: section.keys().map(|(_, l)| l).min().unwrap_or(0),
                    message: format!("unknown section [{name}]"),
                })?;
            if let Some((key, line)) = section.keys().find(|(k, _)| !allowed.contains(&k.as_str()))
            {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key {key:?} in [{name}]"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule> {
        linear_beta_schedule(self.steps, self.beta_start, self.beta_end)
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: 30,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub weights_path: Option<PathBuf>,
    pub schedule: ScheduleConfig,
    pub delta: f64,
    pub mode: IndicatorMode,
    pub rescaler_path: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub uniform_interval: Option<usize>,
    pub reduced_steps: Option<usize>,
    pub calibration_order: usize,
    pub calibration_seeds: Vec<u64>,
    pub sweep_deltas: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::reference(),
            weights_path: None,
            schedule: ScheduleConfig::default(),
            delta: 0.1,
            mode: IndicatorMode::ModulatedInput,
            rescaler_path: None,
            seeds: (0..10).collect(),
            output_dir: PathBuf::from("out"),
            uniform_interval: None,
            reduced_steps: None,
            calibration_order: DEFAULT_ORDER,
            calibration_seeds: (0..8).collect(),
            sweep_deltas: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
        }
    }
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("", &[]),
    (
        "model",
        &[
            "token_count",
            "channel_dim",
            "hidden_dim",
            "num_blocks",
            "num_heads",
            "cond_dim",
            "weight_seed",
            "weights_path",
        ],
    ),
    ("schedule", &["steps", "beta_start", "beta_end"]),
    ("policy", &["delta", "mode", "rescaler_path"]),
    (
        "run",
        &["seeds", "output_dir", "uniform_interval", "reduced_steps"],
    ),
    ("calibration", &["order", "seeds"]),
    ("sweep", &["deltas"]),
];

impl ExperimentConfig {
    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let doc = KeyValueDoc::parse(text)?;
        doc.check_known(KNOWN_KEYS)?;
        let d = Self::default();
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };

        let m = doc.section("model");
        let model = ModelConfig {
            token_count: m.parse_or("token_count", d.model.token_count)?,
            channel_dim: m.parse_or("channel_dim", d.model.channel_dim)?,
            hidden_dim: m.parse_or("hidden_dim", d.model.hidden_dim)?,
            num_blocks: m.parse_or("num_blocks", d.model.num_blocks)?,
            num_heads: m.parse_or("num_heads", d.model.num_heads)?,
            cond_dim: m.parse_or("cond_dim", d.model.cond_dim)?,
            weight_seed: m.parse_or("weight_seed", d.model.weight_seed)?,
        };
        let s = doc.section("schedule");
        let schedule = ScheduleConfig {
            steps: s.parse_or("steps", d.schedule.steps)?,
            beta_start: s.parse_or("beta_start", d.schedule.beta_start)?,
            beta_end: s.parse_or("beta_end", d.schedule.beta_end)?,
        };
        let p = doc.section("policy");
        let r = doc.section("run");
        let c = doc.section("calibration");
        let config = Self {
            model,
            weights_path: m.parse_opt::<String>("weights_path")?.map(resolve),
            schedule,
            delta: p.parse_or("delta", d.delta)?,
            mode: p.parse_or("mode", d.mode)?,
            rescaler_path: p.parse_opt::<String>("rescaler_path")?.map(resolve),
            seeds: r.list_or("seeds", d.seeds)?,
            output_dir: resolve(r.parse_or("output_dir", "out".to_string())?),
            uniform_interval: r.parse_opt("uniform_interval")?,
            reduced_steps: r.parse_opt("reduced_steps")?,
            calibration_order: c.parse_or("order", d.calibration_order)?,
            calibration_seeds: c.list_or("seeds", d.calibration_seeds)?,
            sweep_deltas: doc.section("sweep").list_or("deltas", d.sweep_deltas)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |message: String| Error::Config { line: 0, message };
        self.model.validate()?;
        self.schedule.build()?;
        if self.seeds.is_empty() {
            return Err(err("run.seeds must be nonempty".into()));
        }
        if self.calibration_seeds.is_empty() {
            return Err(err("calibration.seeds must be nonempty".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(err(format!(
                "policy.delta must be >= 0, got {}",
                self.delta
            )));
        }
        if self.sweep_deltas.is_empty() {
            return Err(err("sweep.deltas must be nonempty".into()));
        }
        if self.sweep_deltas.iter().any(|d| !(*d >= 0.0)) {
            return Err(err("sweep.deltas entries must be >= 0".into()));
        }
        if self.sweep_deltas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(err("sweep.deltas must be strictly increasing".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_text() {
        let c = ExperimentConfig::parse("", Path::new("/base")).unwrap();
        assert_eq!(c.model, ModelConfig::reference());
        assert_eq!(c.output_dir, PathBuf::from("/base/out"));
        assert_eq!(c.seeds.len(), 10);
        assert_eq!(c.calibration_order, 4);
    }

    #[test]
    fn full_file() {
        let text = "\
# reference
[model]
weight_seed = 7   # trailing comment
[schedule]
steps = 20
beta_end = 0.03
[policy]
delta = 0.2
mode = timestep_embedding
rescaler_path = cal/rescaler.txt
[run]
seeds = 3, 4,5
uniform_interval = 2
[sweep]
deltas = 0, 0.1
";
        let c = ExperimentConfig::parse(text, Path::new("/x")).unwrap();
        assert_eq!(c.model.weight_seed, 7);
        assert_eq!(c.schedule.steps, 20);
        assert_eq!(c.schedule.beta_end, 0.03);
        assert_eq!(c.mode, IndicatorMode::TimestepEmbedding);
        assert_eq!(c.rescaler_path, Some(PathBuf::from("/x/cal/rescaler.txt")));
        assert_eq!(c.seeds, vec![3, 4, 5]);
        assert_eq!(c.uniform_interval, Some(2));
        assert_eq!(c.sweep_deltas, vec![0.0, 0.1]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e =
            ExperimentConfig::parse("[model]\nhidden_dim = lots\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
        let e = ExperimentConfig::parse("[model]\nbogus = 1\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        assert!(ExperimentConfig::parse("[oops]\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("[run\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("just words\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("[policy]\ndelta=1\ndelta=2\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("[sweep]\ndeltas = 0.1, 0.1\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("[run]\nseeds =\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("[policy]\ndelta = -1\n", Path::new(".")).is_err());
    }
}
