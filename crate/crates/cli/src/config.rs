//! Run configuration: TOML file, command-line overrides, defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stylenet_core::article_sim::Metric;
use stylenet_core::corpus::BiasScale;
use stylenet_core::matching::MatchParams;
use stylenet_core::providers::{HttpProviderConfig, DEFAULT_BATCH_CAP, MIN_TOY_DIM};
use stylenet_core::sweep::SweepGrid;

use crate::error::CliError;

/// Overrides the provider with `http:<value>`.
pub const PROVIDER_URL_ENV: &str = "STYLENET_PROVIDER_URL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSpec {
    File { path: PathBuf },
    Http { url: String },
    Toy { dim: usize, seed: u64 },
}

impl FromStr for ProviderSpec {
    type Err = String;

    /// `file:<path>`, `http:<url>` (or a bare http(s) URL), `toy:<dim>,<seed>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(ProviderSpec::Http { url: s.to_string() });
        }
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("provider {s:?} has no kind prefix"))?;
        match kind {
            "file" if !rest.is_empty() => Ok(ProviderSpec::File { path: PathBuf::from(rest) }),
            "http" if !rest.is_empty() => Ok(ProviderSpec::Http { url: rest.to_string() }),
            "toy" => {
                let (dim, seed) = rest.split_once(',').ok_or("toy provider needs <dim>,<seed>")?;
                let dim: usize = dim.trim().parse().map_err(|_| format!("bad toy dim {dim:?}"))?;
                let seed: u64 = seed.trim().parse().map_err(|_| format!("bad toy seed {seed:?}"))?;
                if dim < MIN_TOY_DIM {
                    return Err(format!("toy dim must be at least {MIN_TOY_DIM}"));
                }
                Ok(ProviderSpec::Toy { dim, seed })
            }
            _ => Err(format!("unknown provider {s:?} (expected file:, http: or toy:)")),
        }
    }
}

/// Sections of the config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub provider: ProviderSection,
    #[serde(default)]
    pub sentiment: SentimentSection,
    #[serde(default)]
    pub matching: MatchingSection,
    #[serde(default)]
    pub clustering: ClusteringSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub path: Option<PathBuf>,
    pub bias_levels: Option<Vec<String>>,
    pub junk_patterns: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    pub spec: Option<String>,
    pub timeout_secs: Option<u64>,
    pub batch_cap: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentSection {
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingSection {
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub metric: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringSection {
    pub resolution: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub tau1_values: Option<Vec<f64>>,
    pub tau2_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub suite: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub pronouns: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

impl FileConfig {
    /// Relative paths in the file are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        fix(&mut config.corpus.path);
        fix(&mut config.corpus.junk_patterns);
        fix(&mut config.corpus.abbreviations);
        fix(&mut config.sentiment.lexicon);
        fix(&mut config.bench.suite);
        fix(&mut config.bench.stopwords);
        fix(&mut config.bench.pronouns);
        fix(&mut config.output.dir);
        if let Some(spec) = &config.provider.spec {
            if let Some(rest) = spec.strip_prefix("file:") {
                if Path::new(rest).is_relative() {
                    config.provider.spec = Some(format!("file:{}", base.join(rest).display()));
                }
            }
        }
        Ok(config)
    }
}

/// Values given on the command line; `None` defers to the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub corpus: Option<PathBuf>,
    pub provider: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub metric: Option<String>,
    pub resolution: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub suite: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub corpus_path: Option<PathBuf>,
    pub bias_scale: BiasScale,
    pub junk_patterns: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub provider: ProviderSpec,
    pub provider_timeout_secs: u64,
    pub batch_cap: usize,
    pub lexicon_path: Option<PathBuf>,
    pub params: MatchParams,
    pub metric: Metric,
    pub resolution: f64,
    pub seed: u64,
    pub grid: SweepGrid,
    pub suite_path: Option<PathBuf>,
    pub stopwords_path: Option<PathBuf>,
    pub pronouns_path: Option<PathBuf>,
    pub output_dir: PathBuf,
}

pub const DEFAULT_PROVIDER: &str = "toy:256,0";
pub const DEFAULT_OUTPUT_DIR: &str = "runs/default";

impl RunConfig {
    /// Precedence: flag, then `STYLENET_PROVIDER_URL` (provider only), then
    /// config file, then built-in default.
    pub fn resolve(file: FileConfig, flags: Overrides, env_url: Option<String>) -> Result<Self, CliError> {
        let provider_text = flags
            .provider
            .or(env_url.filter(|u| !u.is_empty()).map(|u| format!("http:{u}")))
            .or(file.provider.spec)
            .unwrap_or_else(|| DEFAULT_PROVIDER.to_string());
        let provider = provider_text.parse::<ProviderSpec>().map_err(CliError::usage)?;

        let tau1 = flags.tau1.or(file.matching.tau1).unwrap_or(MatchParams::default().tau1());
        let tau2 = flags.tau2.or(file.matching.tau2).unwrap_or(MatchParams::default().tau2());
        let params = MatchParams::new(tau1, tau2).map_err(|e| CliError::usage(e.to_string()))?;
        let metric = match flags.metric.or(file.matching.metric) {
            Some(m) => m.parse::<Metric>().map_err(CliError::usage)?,
            None => Metric::default(),
        };
        let resolution = flags.resolution.or(file.clustering.resolution).unwrap_or(1.0);
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(CliError::usage(format!("resolution must be positive, got {resolution}")));
        }
        let default_grid = SweepGrid::default();
        let grid = SweepGrid::new(
            file.sweep.tau1_values.unwrap_or_else(|| default_grid.tau1_values().to_vec()),
            file.sweep.tau2_values.unwrap_or_else(|| default_grid.tau2_values().to_vec()),
        )
        .map_err(|e| CliError::usage(e.to_string()))?;
        let bias_scale = match file.corpus.bias_levels {
            Some(levels) => BiasScale::new(levels).map_err(|e| CliError::usage(e.to_string()))?,
            None => BiasScale::default(),
        };
        let batch_cap = file.provider.batch_cap.unwrap_or(DEFAULT_BATCH_CAP);
        if batch_cap == 0 {
            return Err(CliError::usage("batch_cap must be positive"));
        }
        Ok(Self {
            corpus_path: flags.corpus.or(file.corpus.path),
            bias_scale,
            junk_patterns: file.corpus.junk_patterns,
            abbreviations: file.corpus.abbreviations,
            provider,
            provider_timeout_secs: file.provider.timeout_secs.unwrap_or(60),
            batch_cap,
            lexicon_path: flags.lexicon.or(file.sentiment.lexicon),
            params,
            metric,
            resolution,
            seed: flags.seed.or(file.clustering.seed).unwrap_or(0),
            grid,
            suite_path: flags.suite.or(file.bench.suite),
            stopwords_path: file.bench.stopwords,
            pronouns_path: file.bench.pronouns,
            output_dir: flags
                .output_dir
                .or(file.output.dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        })
    }

    pub fn corpus_path(&self) -> Result<&Path, CliError> {
        self.corpus_path
            .as_deref()
            .ok_or_else(|| CliError::usage("no corpus given (--corpus or [corpus] path)"))
    }

    pub fn http_config(&self, url: &str) -> HttpProviderConfig {
        HttpProviderConfig {
            base_url: url.to_string(),
            timeout: Duration::from_secs(self.provider_timeout_secs),
            batch_cap: self.batch_cap,
        }
    }

    /// Hex SHA-256 of the resolved configuration, output directory excluded.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}
