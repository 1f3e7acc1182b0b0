//! Experiment selection and parameters: built-in defaults per
//! experiment, overlaid by an optional key=value file, overlaid by
//! command-line flags.

use crate::CliError;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    FbcsNoise,
    FbcsKsweep,
    SparseKsweep,
    SparseNoise,
    ObdNsweep,
    ObdKsweep,
    ObdNoise,
    Comparative,
}

pub const EXPERIMENT_NAMES: [(&str, ExperimentKind); 8] = [
    ("fbcs-noise", ExperimentKind::FbcsNoise),
    ("fbcs-ksweep", ExperimentKind::FbcsKsweep),
    ("sparse-ksweep", ExperimentKind::SparseKsweep),
    ("sparse-noise", ExperimentKind::SparseNoise),
    ("obd-nsweep", ExperimentKind::ObdNsweep),
    ("obd-ksweep", ExperimentKind::ObdKsweep),
    ("obd-noise", ExperimentKind::ObdNoise),
    ("comparative", ExperimentKind::Comparative),
];

impl ExperimentKind {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        EXPERIMENT_NAMES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| {
                let known: Vec<&str> = EXPERIMENT_NAMES.iter().map(|(n, _)| *n).collect();
                CliError::ConfigInvalid(format!(
                    "unknown experiment `{name}`; expected one of {}",
                    known.join(", ")
                ))
            })
    }

    pub fn name(self) -> &'static str {
        EXPERIMENT_NAMES
            .iter()
            .find(|(_, k)| *k == self)
            .map(|(n, _)| *n)
            .expect("every kind is named")
    }

    /// Stable discriminant used in per-trial seed derivation.
    pub fn stream_id(self) -> u64 {
        EXPERIMENT_NAMES
            .iter()
            .position(|(_, k)| *k == self)
            .expect("every kind is listed") as u64
    }
}

/// Fully resolved run parameters. Sweeps are expressed as lists; scalar
/// experiments carry single-element lists.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Signal dimension (columns of the measurement matrix).
    pub m: usize,
    /// Measurement dimension (rows).
    pub n: usize,
    /// Number of orthogonal blocks in the measurement union.
    pub l: usize,
    pub k_list: Vec<usize>,
    /// Base-dictionary sparsity of the planted basis columns.
    pub k_p: usize,
    pub signals_list: Vec<usize>,
    pub snr_list: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub jobs: usize,
    pub output_dir: PathBuf,
}

/// Values given on the command line; they win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub snr: Option<String>,
    pub k: Option<usize>,
    pub signals: Option<usize>,
    pub trials: Option<usize>,
}

fn defaults(kind: ExperimentKind) -> ExperimentConfig {
    use ExperimentKind::*;
    let noise_sweep = vec![f64::INFINITY, 30.0, 25.0, 20.0, 15.0, 10.0];
    let base = ExperimentConfig {
        experiment: kind,
        m: 64,
        n: 32,
        l: 2,
        k_list: vec![6],
        k_p: 6,
        signals_list: vec![100],
        snr_list: vec![f64::INFINITY],
        trials: 20,
        seed: 1,
        jobs: 1,
        output_dir: PathBuf::from("out"),
    };
    match kind {
        FbcsNoise => ExperimentConfig {
            snr_list: noise_sweep,
            ..base
        },
        FbcsKsweep => ExperimentConfig {
            k_list: (1..=8).collect(),
            ..base
        },
        SparseKsweep => ExperimentConfig {
            m: 256,
            n: 128,
            k_list: (1..=10).collect(),
            ..base
        },
        SparseNoise => ExperimentConfig {
            m: 256,
            n: 128,
            k_list: vec![3],
            snr_list: noise_sweep,
            ..base
        },
        ObdNsweep => ExperimentConfig {
            k_list: vec![4],
            signals_list: vec![100, 150, 250, 500, 800, 1500, 2500],
            ..base
        },
        ObdKsweep => ExperimentConfig {
            k_list: vec![1, 2, 3],
            signals_list: vec![800],
            ..base
        },
        ObdNoise => ExperimentConfig {
            k_list: vec![4],
            signals_list: vec![800],
            snr_list: noise_sweep,
            ..base
        },
        Comparative => ExperimentConfig {
            m: 128,
            n: 64,
            // each column of the planted rotation basis has two nonzero
            // entries over the identity dictionary
            k_p: 2,
            signals_list: vec![2000],
            trials: 1,
            ..base
        },
    }
}

fn parse_usize(key: &str, value: &str) -> Result<usize, CliError> {
    value
        .parse()
        .map_err(|_| CliError::ConfigInvalid(format!("{key}: `{value}` is not a positive integer")))
}

fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>, CliError> {
    value
        .split(',')
        .map(|p| parse_usize(key, p.trim()))
        .collect()
}

pub fn parse_snr_list(value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|p| {
            let p = p.trim();
            if p.eq_ignore_ascii_case("inf") {
                return Ok(f64::INFINITY);
            }
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::ConfigInvalid(format!("snr: `{p}` is not a number or `inf`"))
                })
        })
        .collect()
}

fn apply_file(cfg: &mut ExperimentConfig, path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected key=value, got `{line}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "m" => cfg.m = parse_usize(key, value)?,
            "n" => cfg.n = parse_usize(key, value)?,
            "l" => cfg.l = parse_usize(key, value)?,
            "k" => cfg.k_list = parse_usize_list(key, value)?,
            "k_p" => cfg.k_p = parse_usize(key, value)?,
            "signals" => cfg.signals_list = parse_usize_list(key, value)?,
            "snr" => cfg.snr_list = parse_snr_list(value)?,
            "trials" => cfg.trials = parse_usize(key, value)?,
            "seed" => {
                cfg.seed = value.parse().map_err(|_| {
                    CliError::ConfigInvalid(format!("seed: `{value}` is not a u64"))
                })?
            }
            "jobs" => cfg.jobs = parse_usize(key, value)?,
            "out" => cfg.output_dir = PathBuf::from(value),
            _ => {
                return Err(CliError::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn build(
        kind: ExperimentKind,
        file: Option<&Path>,
        over: &Overrides,
    ) -> Result<Self, CliError> {
        let mut cfg = defaults(kind);
        if let Some(path) = file {
            apply_file(&mut cfg, path)?;
        }
        if let Some(seed) = over.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = over.jobs {
            cfg.jobs = jobs;
        }
        if let Some(out) = &over.out {
            cfg.output_dir = out.clone();
        }
        if let Some(snr) = &over.snr {
            cfg.snr_list = parse_snr_list(snr)?;
        }
        if let Some(k) = over.k {
            cfg.k_list = vec![k];
        }
        if let Some(signals) = over.signals {
            cfg.signals_list = vec![signals];
        }
        if let Some(trials) = over.trials {
            cfg.trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::ConfigInvalid(msg));
        if self.m == 0 || self.n == 0 || self.trials == 0 || self.jobs == 0 {
            return fail("m, n, trials and jobs must be positive".into());
        }
        if self.k_list.is_empty() || self.signals_list.is_empty() || self.snr_list.is_empty() {
            return fail("k, signals and snr lists cannot be empty".into());
        }
        if let Some(k) = self.k_list.iter().find(|&&k| k == 0 || k > self.m) {
            return fail(format!("sparsity {k} out of range for dimension {}", self.m));
        }
        if self.signals_list.contains(&0) {
            return fail("signal counts must be positive".into());
        }
        if self.snr_list.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return fail("snr values must be finite or inf".into());
        }
        use ExperimentKind::*;
        match self.experiment {
            FbcsNoise | FbcsKsweep | Comparative => {
                if !self.m.is_power_of_two() {
                    return fail(format!(
                        "the wavelet catalog needs a power-of-two dimension, got {}",
                        self.m
                    ));
                }
            }
            SparseKsweep | SparseNoise => {
                if self.k_p == 0 {
                    return fail("k_p must be positive".into());
                }
            }
            ObdNsweep | ObdKsweep | ObdNoise => {}
        }
        if matches!(self.experiment, ObdNsweep | ObdKsweep | ObdNoise | Comparative) {
            if self.l == 0 || self.n % 2 != 0 || self.m != self.n * self.l {
                return fail(format!(
                    "block structure needs even n and m = n*l, got m={} n={} l={}",
                    self.m, self.n, self.l
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_differ_per_experiment() {
        let f = defaults(ExperimentKind::FbcsNoise);
        assert_eq!(f.m, 64);
        assert_eq!(f.snr_list.len(), 6);
        let c = defaults(ExperimentKind::Comparative);
        assert_eq!((c.m, c.n, c.l, c.trials), (128, 64, 2, 1));
        for (name, kind) in EXPERIMENT_NAMES {
            assert_eq!(ExperimentKind::parse(name).unwrap(), kind);
            defaults(kind).validate().unwrap();
        }
    }

    #[test]
    fn file_and_flags_layer_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nseed = 9\nk = 2,3\nsnr = inf,20\n").unwrap();
        let over = Overrides {
            seed: Some(4),
            ..Overrides::default()
        };
        let cfg = ExperimentConfig::build(ExperimentKind::FbcsNoise, Some(&path), &over).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.k_list, vec![2, 3]);
        assert_eq!(cfg.snr_list[0], f64::INFINITY);
        assert_eq!(cfg.snr_list[1], 20.0);
    }

    #[test]
    fn bad_keys_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "seed = 1\nwat = 2\n").unwrap();
        let err =
            ExperimentConfig::build(ExperimentKind::FbcsNoise, Some(&path), &Overrides::default())
                .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2"), "{msg}");
        assert!(msg.contains("wat"), "{msg}");
    }

    #[test]
    fn structural_validation_rejects_mismatches() {
        let mut cfg = defaults(ExperimentKind::ObdNoise);
        cfg.m = 60;
        assert!(cfg.validate().is_err());
        let mut cfg = defaults(ExperimentKind::FbcsNoise);
        cfg.m = 48;
        assert!(cfg.validate().is_err());
        let err = ExperimentKind::parse("nope").unwrap_err();
        assert!(err.to_string().contains("fbcs-noise"));
    }
}
