//! Run configuration: one TOML file with `${VAR}` interpolation, then
//! environment overrides, then command-line flags.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use spagent_core::detector::SceneConfig;
use spagent_core::planner::PlannerConfig;
use spagent_core::provider::RemoteConfig;

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Scripted,
    #[default]
    NgramLocal,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    /// Scripted-provider fixture (JSON).
    pub fixture: Option<PathBuf>,
    pub remote: Option<RemoteConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Knowledge base (JSONL); the bundled one when unset.
    pub knowledge: Option<PathBuf>,
    /// Directory of `.slpm` predictor models.
    pub models: Option<PathBuf>,
    /// Text corpus; the bundled one when unset.
    pub corpus: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self { knowledge: None, models: None, corpus: None, output: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub budget: usize,
    pub n_init: usize,
    pub f: f64,
    pub cr: f64,
    pub alpha: f64,
    /// Independent runs per method; run `r` uses seed `seed + r`.
    pub runs: usize,
    pub sa_t0: f64,
    pub sa_cooling: f64,
    /// Dimension of the sphere and rastrigin benchmarks.
    pub dim: usize,
    /// Box half-width of the benchmarks; `None` keeps each one's default.
    pub half_width: Option<f64>,
    /// Scene for the detection objective.
    pub scene: SceneConfig,
    pub train_frac: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            budget: 100,
            n_init: 8,
            f: 0.8,
            cr: 0.9,
            alpha: 10.0,
            runs: 20,
            sa_t0: 1.0,
            sa_cooling: 0.95,
            dim: 3,
            half_width: None,
            scene: SceneConfig { scr_db: -15.0, ..SceneConfig::default() },
            train_frac: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecSection {
    /// Predictor used for compression; else the first model in `paths.models`.
    pub model: Option<PathBuf>,
    pub context_lengths: Vec<usize>,
    pub order: usize,
    pub merges: usize,
    pub smoothing: f64,
    /// Share of the corpus used for predictor training.
    pub train_frac: f64,
    /// Bytes of the training split used to learn the vocabulary.
    pub vocab_sample_bytes: usize,
    pub sentences_per_block: usize,
}

impl Default for CodecSection {
    fn default() -> Self {
        Self {
            model: None,
            context_lengths: vec![1, 2],
            order: 2,
            merges: 256,
            smoothing: 0.01,
            train_frac: 0.5,
            vocab_sample_bytes: 100_000,
            sentences_per_block: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub scene: SceneConfig,
    /// Dataset manifest to use instead of a synthetic scene.
    pub manifest: Option<PathBuf>,
    pub train_frac: f64,
    /// Feature parameters `[theta1, theta2, theta3]`.
    pub theta: [f64; 3],
    /// Knowledge passages placed in few-shot prompts.
    pub knowledge_docs: usize,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self { scene: SceneConfig::default(), manifest: None, train_frac: 0.7, theta: [0.2, 0.1, 16.0], knowledge_docs: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub provider: ProviderSection,
    pub paths: PathsSection,
    pub planner: PlannerConfig,
    pub optimizer: OptimizerSection,
    pub codec: CodecSection,
    pub detector: DetectorSection,
}

/// Values that may come from flags or environment variables.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub provider: Option<ProviderKind>,
    pub output: Option<PathBuf>,
    pub budget: Option<usize>,
}

pub const ENV_SEED: &str = "SPAGENT_SEED";
pub const ENV_PROVIDER: &str = "SPAGENT_PROVIDER";
pub const ENV_OUTPUT: &str = "SPAGENT_OUTPUT";
pub const ENV_BUDGET: &str = "SPAGENT_BUDGET";

fn var_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap())
}

/// Replaces every `${NAME}` outside comment lines with the variable's value;
/// unset names are errors.
pub fn interpolate(text: &str, lookup: impl Fn(&str) -> Option<String>) -> CliResult<String> {
    let mut missing = Vec::new();
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        if line.trim_start().starts_with('#') {
            out.push_str(line);
            continue;
        }
        let replaced = var_re().replace_all(line, |c: &regex::Captures<'_>| {
            lookup(&c[1]).unwrap_or_else(|| {
                missing.push(c[1].to_owned());
                String::new()
            })
        });
        out.push_str(&replaced);
    }
    if !missing.is_empty() {
        return Err(config_err(format!("unset environment variable(s): {}", missing.join(", "))));
    }
    Ok(out)
}

fn env_overrides(lookup: &impl Fn(&str) -> Option<String>) -> CliResult<Overrides> {
    let parse_num = |name: &str| -> CliResult<Option<u64>> {
        lookup(name)
            .map(|v| v.trim().parse::<u64>().map_err(|_| config_err(format!("{name}={v:?} is not a number"))))
            .transpose()
    };
    let provider = lookup(ENV_PROVIDER)
        .map(|v| {
            <ProviderKind as clap::ValueEnum>::from_str(v.trim(), true)
                .map_err(|_| config_err(format!("{ENV_PROVIDER}={v:?} is not a provider kind")))
        })
        .transpose()?;
    Ok(Overrides {
        seed: parse_num(ENV_SEED)?,
        provider,
        output: lookup(ENV_OUTPUT).map(PathBuf::from),
        budget: parse_num(ENV_BUDGET)?.map(|b| b as usize),
    })
}

impl RunConfig {
    /// Parses, interpolates and resolves relative paths against `base`.
    pub fn from_toml(text: &str, base: &Path, lookup: impl Fn(&str) -> Option<String>) -> CliResult<Self> {
        let text = interpolate(text, &lookup)?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| config_err(e.to_string()))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, flags: &Overrides) -> CliResult<Self> {
        let lookup = |k: &str| std::env::var(k).ok();
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Self::from_toml(&text, &base, lookup)?
            }
            None => RunConfig::default(),
        };
        cfg.apply(&env_overrides(&lookup)?);
        cfg.apply(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = o.provider {
            self.provider.kind = p;
        }
        if let Some(out) = &o.output {
            self.paths.output = out.clone();
        }
        if let Some(b) = o.budget {
            self.optimizer.budget = b;
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            self.paths.knowledge.as_mut(),
            self.paths.models.as_mut(),
            self.paths.corpus.as_mut(),
            Some(&mut self.paths.output),
            self.provider.fixture.as_mut(),
            self.codec.model.as_mut(),
            self.detector.manifest.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Checks that every configured input path exists.
    pub fn validate(&self) -> CliResult<()> {
        let inputs = [
            ("paths.knowledge", &self.paths.knowledge),
            ("paths.models", &self.paths.models),
            ("paths.corpus", &self.paths.corpus),
            ("provider.fixture", &self.provider.fixture),
            ("codec.model", &self.codec.model),
            ("detector.manifest", &self.detector.manifest),
        ];
        for (name, path) in inputs {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(config_err(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        match self.provider.kind {
            ProviderKind::Scripted if self.provider.fixture.is_none() => {
                Err(config_err("provider.kind = \"scripted\" needs provider.fixture"))
            }
            ProviderKind::Remote if self.provider.remote.is_none() => {
                Err(config_err("provider.kind = \"remote\" needs a [provider.remote] table"))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &'static [(&'static str, &'static str)]) -> impl Fn(&str) -> Option<String> {
        move |k| pairs.iter().find(|(n, _)| *n == k).map(|(_, v)| v.to_string())
    }

    #[test]
    fn interpolation() {
        assert_eq!(interpolate("a = \"${X}\"", env(&[("X", "1")])).unwrap(), "a = \"1\"");
        assert!(interpolate("${MISSING}", env(&[])).is_err());
        assert_eq!(interpolate("plain $X", env(&[])).unwrap(), "plain $X");
        assert_eq!(interpolate("# ${UNSET}\nb = 1\n", env(&[])).unwrap(), "# ${UNSET}\nb = 1\n");
    }

    #[test]
    fn precedence_flag_env_file() {
        let mut cfg = RunConfig::from_toml("seed = 1\n[optimizer]\nbudget = 50\n", Path::new("/base"), env(&[])).unwrap();
        assert_eq!((cfg.seed, cfg.optimizer.budget), (1, 50));
        assert_eq!(cfg.paths.output, PathBuf::from("/base/out"));
        cfg.apply(&env_overrides(&env(&[(ENV_SEED, "2"), (ENV_BUDGET, "60")])).unwrap());
        assert_eq!((cfg.seed, cfg.optimizer.budget), (2, 60));
        cfg.apply(&Overrides { seed: Some(3), ..Default::default() });
        assert_eq!((cfg.seed, cfg.optimizer.budget), (3, 60));
    }

    #[test]
    fn rejects_unknown_keys_and_missing_paths() {
        assert!(RunConfig::from_toml("sed = 1", Path::new("."), env(&[])).is_err());
        let cfg = RunConfig::from_toml("[paths]\nknowledge = \"nope.jsonl\"\n", Path::new("/nonexistent"), env(&[])).unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn example_config_parses() {
        let text = include_str!("../../../spagent.example.toml");
        let cfg = RunConfig::from_toml(text, Path::new("."), env(&[])).unwrap();
        assert_eq!(cfg.optimizer.budget, 100);
    }
}
