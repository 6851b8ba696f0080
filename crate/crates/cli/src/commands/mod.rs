pub mod codec;
pub mod detect;
pub mod gen_data;
pub mod optimize;
pub mod plan;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use spagent_core::assets;
use spagent_core::provider::{
    ChatProvider, HashingEmbedder, NgramModel, OfflineResponder, PredictorRegistry, RemoteProvider,
    ScriptedProvider, ScriptedProviderFixture, TokenPredictor,
};
use spagent_core::retrieval::{read_knowledge_jsonl, KnowledgeRecord, VectorIndex};

use crate::config::{ProviderKind, RunConfig};
use crate::error::{config_err, CliError, CliResult};

/// Chat provider for this run. `salt` varies the offline responder's seed
/// between independent runs.
pub fn build_provider(cfg: &RunConfig, salt: u64) -> CliResult<Box<dyn ChatProvider>> {
    Ok(match cfg.provider.kind {
        ProviderKind::NgramLocal => Box::new(OfflineResponder::new(cfg.seed.wrapping_add(salt))),
        ProviderKind::Scripted => {
            let path = cfg.provider.fixture.as_ref().ok_or_else(|| config_err("scripted provider needs a fixture"))?;
            let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            let fixture: ScriptedProviderFixture =
                serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            Box::new(ScriptedProvider::new(fixture))
        }
        ProviderKind::Remote => {
            let remote = cfg.provider.remote.clone().ok_or_else(|| config_err("remote provider needs [provider.remote]"))?;
            Box::new(RemoteProvider::new(remote).map_err(|e| config_err(e.to_string()))?)
        }
    })
}

pub fn knowledge_records(cfg: &RunConfig) -> CliResult<Vec<KnowledgeRecord>> {
    match &cfg.paths.knowledge {
        None => Ok(assets::knowledge_records()),
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            read_knowledge_jsonl(std::io::BufReader::new(file))
                .map_err(|e| config_err(format!("{}: {e}", path.display())))
        }
    }
}

pub fn build_index(cfg: &RunConfig) -> CliResult<VectorIndex> {
    VectorIndex::from_records(Arc::new(HashingEmbedder::default()), knowledge_records(cfg)?)
        .map_err(|e| config_err(format!("knowledge base: {e}")))
}

pub fn corpus_text(cfg: &RunConfig) -> CliResult<String> {
    match &cfg.paths.corpus {
        None => Ok(assets::CORPUS.to_owned()),
        Some(p) => fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display()))),
    }
}

fn slpm_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| config_err(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "slpm"))
        .collect();
    files.sort();
    Ok(files)
}

/// The predictor used for compression.
pub fn compression_model(cfg: &RunConfig) -> CliResult<NgramModel> {
    let path = match (&cfg.codec.model, &cfg.paths.models) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => slpm_files(dir)?
            .into_iter()
            .next()
            .ok_or_else(|| config_err(format!("no .slpm model in {}", dir.display())))?,
        (None, None) => {
            return Err(config_err("no predictor configured; set codec.model or paths.models (see gen-data)"))
        }
    };
    NgramModel::load(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Every model from `paths.models` plus `codec.model`.
pub fn predictor_registry(cfg: &RunConfig) -> CliResult<PredictorRegistry> {
    let mut registry = match &cfg.paths.models {
        Some(dir) => PredictorRegistry::load_dir(dir).map_err(|e| config_err(format!("{}: {e}", dir.display())))?,
        None => PredictorRegistry::new(),
    };
    if let Some(p) = &cfg.codec.model {
        let model = NgramModel::load(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
        registry.insert(Arc::new(model) as Arc<dyn TokenPredictor>);
    }
    Ok(registry)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display())).map_err(CliError::from)
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
