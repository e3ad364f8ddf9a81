use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assessment::DEFAULT_THRESHOLD;
use crate::error::{read_to_string, Error, Result};
use crate::extraction::{Modality, PriceTable};
use crate::model::{load_class_config, ClassSchema};
use crate::orchestrator::{EngineSettings, RetryPolicy, StageLimits};
use crate::rules::{load_rules, RuleSpec};

fn default_true() -> bool {
    true
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_timeout() -> f64 {
    120.0
}

fn default_concurrency() -> usize {
    4
}

/// The engine configuration file. Paths are relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub classes: PathBuf,
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub prices: Option<PathBuf>,
    /// Job store used by `serve`.
    #[serde(default)]
    pub store_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub hitl_enabled: bool,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub stage_limits: StageLimits,
    #[serde(default)]
    pub modality: Modality,
    #[serde(default)]
    pub few_shot: bool,
    #[serde(default = "default_concurrency")]
    pub classify_concurrency: usize,
    /// Per-request timeout for remote backends.
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: f64,
}

impl EngineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("engine config: {e}")))
    }

    /// Applies `IDP_*` overrides from `vars`.
    ///
    /// | variable | field |
    /// |---|---|
    /// | `IDP_HITL_ENABLED` | `hitl_enabled` (`true`/`false`/`1`/`0`) |
    /// | `IDP_THRESHOLD` | `threshold` |
    /// | `IDP_MAX_ATTEMPTS` | `retry.max_attempts` |
    /// | `IDP_BASE_DELAY_SECS` | `retry.base_delay_secs` |
    /// | `IDP_BACKOFF_FACTOR` | `retry.factor` |
    /// | `IDP_JITTER` | `retry.jitter` |
    /// | `IDP_STAGE_LIMITS` | `stage_limits`, e.g. `extract=2,classify=1` |
    /// | `IDP_MODALITY` | `modality` |
    /// | `IDP_FEW_SHOT` | `few_shot` |
    /// | `IDP_REQUEST_TIMEOUT_SECS` | `request_timeout_secs` |
    pub fn apply_overrides<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::Validation(format!("{key}: cannot parse {v:?}")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v.trim().to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => Ok(true),
                "0" | "false" | "no" | "off" => Ok(false),
                _ => Err(Error::Validation(format!(
                    "{key}: expected a boolean, got {v:?}"
                ))),
            }
        }
        for (k, v) in vars {
            let (k, v) = (k.as_ref(), v.as_ref());
            match k {
                "IDP_HITL_ENABLED" => self.hitl_enabled = flag(k, v)?,
                "IDP_THRESHOLD" => self.threshold = num(k, v)?,
                "IDP_MAX_ATTEMPTS" => self.retry.max_attempts = num(k, v)?,
                "IDP_BASE_DELAY_SECS" => self.retry.base_delay_secs = num(k, v)?,
                "IDP_BACKOFF_FACTOR" => self.retry.factor = num(k, v)?,
                "IDP_JITTER" => self.retry.jitter = num(k, v)?,
                "IDP_MODALITY" => self.modality = v.parse()?,
                "IDP_FEW_SHOT" => self.few_shot = flag(k, v)?,
                "IDP_REQUEST_TIMEOUT_SECS" => self.request_timeout_secs = num(k, v)?,
                "IDP_STAGE_LIMITS" => {
                    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                        let (stage, n) = part.split_once('=').ok_or_else(|| {
                            Error::Validation(format!("{k}: expected stage=limit, got {part:?}"))
                        })?;
                        let n: usize = num(k, n)?;
                        let slot = match stage.trim() {
                            "classify" => &mut self.stage_limits.classify,
                            "split" => &mut self.stage_limits.split,
                            "extract" => &mut self.stage_limits.extract,
                            "assess" => &mut self.stage_limits.assess,
                            "validate" => &mut self.stage_limits.validate,
                            other => {
                                return Err(Error::Validation(format!(
                                    "{k}: unknown stage {other:?}"
                                )))
                            }
                        };
                        *slot = n;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn settings(&self) -> EngineSettings {
        EngineSettings {
            hitl_enabled: self.hitl_enabled,
            threshold: self.threshold,
            retry: self.retry.clone(),
            stage_limits: self.stage_limits,
            modality: self.modality,
            few_shot: self.few_shot,
            classify_concurrency: self.classify_concurrency,
        }
    }
}

/// An engine config with its referenced files loaded.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub config: EngineConfig,
    pub classes: Vec<ClassSchema>,
    pub rules: Vec<RuleSpec>,
    pub prices: PriceTable,
}

impl LoadedConfig {
    /// Loads the config at `path`, applies `IDP_*` variables from the process
    /// environment, and loads classes, rules and prices.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with(path, std::env::vars())
    }

    pub fn load_with<I, K, V>(path: impl AsRef<Path>, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let path = path.as_ref();
        let mut config = EngineConfig::parse(&read_to_string(path)?)?;
        config.apply_overrides(vars)?;
        config.settings().validate()?;
        if !(config.request_timeout_secs.is_finite() && config.request_timeout_secs > 0.0) {
            return Err(Error::Validation(
                "request_timeout_secs: must be positive".into(),
            ));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        config.classes = resolve(&config.classes);
        config.rules = config.rules.as_deref().map(resolve);
        config.prices = config.prices.as_deref().map(resolve);
        config.store_dir = config.store_dir.as_deref().map(resolve);

        let classes = load_class_config(&config.classes)?;
        let rules = match &config.rules {
            Some(p) => load_rules(p, Some(&classes))?,
            None => Vec::new(),
        };
        let prices = match &config.prices {
            Some(p) => PriceTable::load(p)?,
            None => PriceTable::default(),
        };
        Ok(LoadedConfig {
            path: path.to_path_buf(),
            config,
            classes,
            rules,
            prices,
        })
    }
}
