//! Run configuration: one TOML file, validated against a closed key schema.
//!
//! Precedence: built-in defaults < file keys < command-line flags. Unknown
//! keys anywhere in the file are rejected. The API credential is read from
//! the environment variable named by `classifier.api_key_env` and is never
//! written to any output.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use netrev::backtest::BacktestConfig;
use netrev::relation::{
    ClassifierClient, ClassifyOptions, HttpClient, MockClient, SectionBudgets,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataPaths,
    #[serde(default)]
    pub backtest: BacktestConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub snippets: SectionBudgets,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub returns: PathBuf,
    pub membership: PathBuf,
    pub embeddings: PathBuf,
    /// Root of `filings/<year>/<stock>.txt`; required when filtering is on
    /// and the cache is incomplete.
    pub filings: Option<PathBuf>,
    /// `sic.csv`, required for the industry graph mode.
    pub sic: Option<PathBuf>,
    /// `factors.csv` for the factor regression block of the summary.
    pub factors: Option<PathBuf>,
    /// `truth.csv` fixture map for the `fixture` classifier kind.
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    /// Deterministic map from `data.truth`; no network.
    Fixture,
    /// Live endpoint speaking the plain-text prompt protocol.
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub url: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    /// Retries after the first attempt (capped at 3).
    pub retries: u32,
    pub retry_backoff_ms: u64,
    pub parallelism: usize,
    /// Hard cap on classifier call attempts per run.
    pub call_budget: Option<usize>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Fixture,
            url: None,
            api_key_env: None,
            timeout_secs: 30,
            retries: 3,
            retry_backoff_ms: 250,
            parallelism: 1,
            call_budget: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub cache: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            cache: PathBuf::from("cache/classifications.jsonl"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Paths in the file are relative to the file's directory.
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        config.backtest.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.data.returns);
        fix(&mut self.data.membership);
        fix(&mut self.data.embeddings);
        for opt in [
            &mut self.data.filings,
            &mut self.data.sic,
            &mut self.data.factors,
            &mut self.data.truth,
        ] {
            if let Some(p) = opt {
                fix(p);
            }
        }
        fix(&mut self.output.dir);
        fix(&mut self.output.cache);
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            parallelism: self.classifier.parallelism.max(1),
            max_retries: self.classifier.retries.min(3),
            retry_backoff: Duration::from_millis(self.classifier.retry_backoff_ms),
        }
    }

    /// Build the configured classifier client. `fixture` requires
    /// `data.truth`; `http` requires `classifier.url`.
    pub fn build_client(&self) -> Result<Box<dyn ClassifierClient>, CliError> {
        match self.classifier.kind {
            ClassifierKind::Fixture => {
                let truth = self.data.truth.as_ref().ok_or_else(|| {
                    CliError::Config(
                        "classifier.kind = \"fixture\" requires data.truth".into(),
                    )
                })?;
                let client = MockClient::from_truth_csv(truth)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Box::new(client))
            }
            ClassifierKind::Http => {
                let url = self.classifier.url.clone().ok_or_else(|| {
                    CliError::Config("classifier.kind = \"http\" requires classifier.url".into())
                })?;
                let api_key = self
                    .classifier
                    .api_key_env
                    .as_ref()
                    .and_then(|var| std::env::var(var).ok());
                let client = HttpClient::new(
                    url,
                    api_key,
                    Duration::from_secs(self.classifier.timeout_secs),
                )
                .map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Box::new(client))
            }
        }
    }

    /// A client for runs that never classify (filtering disabled).
    pub fn null_client() -> Box<dyn ClassifierClient> {
        Box::new(MockClient::new(HashMap::new()))
    }
}
