//! Experiment configuration: JSON file, command-line flags, environment.
//!
//! Precedence, lowest first: built-in defaults, `--config` file, flags, and
//! `HYPLAB_THREADS` for the worker count.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use hyplab::{CutFunction, Overrides};
use serde::{Deserialize, Serialize};

/// The cut function to run with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Linear,
    /// φ(t) = (1 - t^α)^{1/α}.
    Sym { alpha: f64 },
    /// φ(t) = (1 - t^α)^{α'}.
    Power { alpha: f64, alpha_prime: f64 },
}

impl MapSpec {
    pub fn build(&self) -> hyplab::Result<CutFunction> {
        match *self {
            MapSpec::Linear => Ok(CutFunction::linear()),
            MapSpec::Sym { alpha } => CutFunction::symmetric_power(alpha),
            MapSpec::Power { alpha, alpha_prime } => CutFunction::power_family(alpha, alpha_prime),
        }
    }

    /// Parse `linear`, `sym:<alpha>` or `power:<alpha>:<alpha'>`. A missing
    /// alpha may come from `--alpha`.
    pub fn parse(text: &str, alpha: Option<f64>) -> anyhow::Result<MapSpec> {
        let mut parts = text.split(':');
        let kind = parts.next().unwrap_or_default();
        let mut num = |name: &str| -> anyhow::Result<Option<f64>> {
            parts
                .next()
                .map(|s| s.parse::<f64>().with_context(|| format!("--map: {name} `{s}` is not a number")))
                .transpose()
        };
        let spec = match kind {
            "linear" => MapSpec::Linear,
            "sym" | "symmetric" => {
                let a = num("alpha")?.or(alpha).context("--map sym needs an alpha (sym:<alpha> or --alpha)")?;
                MapSpec::Sym { alpha: a }
            }
            "power" => {
                let a = num("alpha")?.or(alpha).context("--map power needs an alpha")?;
                let ap = num("alpha'")?.context("--map power needs alpha' (power:<alpha>:<alpha'>)")?;
                MapSpec::Power { alpha: a, alpha_prime: ap }
            }
            other => bail!("--map: unknown kind `{other}` (expected linear, sym or power)"),
        };
        if parts.next().is_some() {
            bail!("--map: too many fields in `{text}`");
        }
        Ok(spec)
    }

    fn set_alpha(&mut self, a: f64) {
        match self {
            MapSpec::Linear => {}
            MapSpec::Sym { alpha } | MapSpec::Power { alpha, .. } => *alpha = a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub seed: u64,
    pub n_samples: Option<usize>,
    /// 0 means all available cores.
    pub workers: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            seed: 1,
            n_samples: None,
            workers: 0,
        }
    }
}

/// The JSON configuration file. Schema: docs/config.schema.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub n_max: Option<u64>,
    #[serde(default)]
    pub n_grid: Option<Vec<u64>>,
    #[serde(default)]
    pub fit_range: Option<(u64, u64)>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Starting point for single-orbit experiments.
    #[serde(default)]
    pub x0: Option<f64>,
}

fn default_b() -> f64 {
    hyplab::hyptimes::DEFAULT_B
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            map: MapSpec::Linear,
            b: default_b(),
            overrides: Overrides::default(),
            sampling: Sampling::default(),
            n_max: None,
            n_grid: None,
            fit_range: None,
            epsilon: None,
            x0: None,
        }
    }
}

/// A configuration problem; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Cut function: linear, sym:<alpha> or power:<alpha>:<alpha'>.
    #[arg(long)]
    pub map: Option<String>,
    /// Tangency exponent; fills in or replaces the alpha of --map.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Distance exponent b of the hyperbolic-time predicate, in (0, 1/4).
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of samples; accepts forms like 1e6.
    #[arg(long, value_parser = parse_count)]
    pub samples: Option<usize>,
    /// Worker threads (HYPLAB_THREADS takes precedence).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Orbit horizon or series length, depending on the subcommand.
    #[arg(long = "n-max", value_parser = parse_count_u64)]
    pub n_max: Option<u64>,
    #[arg(long = "fit-lo", value_parser = parse_count_u64)]
    pub fit_lo: Option<u64>,
    #[arg(long = "fit-hi", value_parser = parse_count_u64)]
    pub fit_hi: Option<u64>,
    /// Drift margin in [0, 1) for choosing k0 (0 gives the minimal k0).
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Write CSV and meta.json into this directory instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_count(s: &str) -> Result<usize, String> {
    parse_count_u64(s).map(|v| v as usize)
}

fn parse_count_u64(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 {
        Ok(v as u64)
    } else {
        Err(format!("`{s}` is not a non-negative integer"))
    }
}

impl CommonArgs {
    /// Merge file, flags and environment into one configuration.
    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => load(p)?,
            None => ExperimentConfig::default(),
        };
        let invalid = |e: anyhow::Error| anyhow::Error::new(ConfigError(format!("{e:#}")));
        if let Some(m) = &self.map {
            cfg.map = MapSpec::parse(m, self.alpha).map_err(invalid)?;
        } else if let Some(a) = self.alpha {
            cfg.map.set_alpha(a);
        }
        if let Some(b) = self.b {
            cfg.b = b;
        }
        if let Some(s) = self.seed {
            cfg.sampling.seed = s;
        }
        if let Some(n) = self.samples {
            cfg.sampling.n_samples = Some(n);
        }
        if let Some(w) = self.workers {
            cfg.sampling.workers = w;
        }
        if let Ok(v) = std::env::var("HYPLAB_THREADS") {
            cfg.sampling.workers = v
                .trim()
                .parse()
                .map_err(|_| ConfigError(format!("HYPLAB_THREADS: `{v}` is not a thread count")))?;
        }
        if let Some(n) = self.n_max {
            cfg.n_max = Some(n);
        }
        match (self.fit_lo, self.fit_hi, cfg.fit_range) {
            (None, None, _) => {}
            (Some(lo), Some(hi), _) => cfg.fit_range = Some((lo, hi)),
            (Some(lo), None, Some((_, hi))) | (None, Some(hi), Some((lo, _))) => cfg.fit_range = Some((lo, hi)),
            _ => return Err(ConfigError("--fit-lo and --fit-hi must be given together".into()).into()),
        }
        if let Some(d) = self.drift {
            cfg.overrides.drift = Some(d);
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = Some(e);
        }
        if let Some((lo, hi)) = cfg.fit_range {
            if lo < 1 || hi <= lo {
                return Err(ConfigError(format!("fit_range: ({lo}, {hi}) must satisfy 1 ≤ lo < hi")).into());
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_specs() {
        assert_eq!(MapSpec::parse("linear", None).unwrap(), MapSpec::Linear);
        assert_eq!(MapSpec::parse("sym:0.5", None).unwrap(), MapSpec::Sym { alpha: 0.5 });
        assert_eq!(MapSpec::parse("sym", Some(0.25)).unwrap(), MapSpec::Sym { alpha: 0.25 });
        assert!(MapSpec::parse("sym", None).is_err());
        assert!(MapSpec::parse("cubic", None).is_err());
        assert_eq!(
            MapSpec::parse("power:0.5:0.3", None).unwrap(),
            MapSpec::Power {
                alpha: 0.5,
                alpha_prime: 0.3
            }
        );
    }

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("250"), Ok(250));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn config_missing_alpha_names_the_field() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"map": {"kind": "sym"}}"#).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
        assert!(err.line() >= 1);
    }

    #[test]
    fn config_roundtrip() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"map": {"kind": "power", "alpha": 0.5, "alpha_prime": 0.25},
                "overrides": {"drift": 0.5}, "sampling": {"seed": 9, "n_samples": 1000}}"#,
        )
        .unwrap();
        assert_eq!(cfg.b, 0.2);
        assert_eq!(cfg.overrides.drift, Some(0.5));
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
