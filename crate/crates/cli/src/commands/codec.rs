use std::path::{Path, PathBuf};

use serde_json::json;
use spagent_core::codec::{
    self, compression_efficiency, huffman_baseline_size, sentence_blocks, split_at_line, CodecError, CompressedBlob,
};
use spagent_core::provider::{NgramModel, TokenPredictor};

use super::{compression_model, corpus_text, mean_std, predictor_registry, write_file};
use crate::config::RunConfig;
use crate::error::{config_err, CliError, CliResult};
use crate::report::{ExperimentKind, ExperimentReport};

pub fn codec_error(e: CodecError) -> CliError {
    match e {
        CodecError::PredictorMissing(id) => config_err(format!("no predictor with model id {id} is available")),
        CodecError::InvalidContextLength(_) => config_err(e.to_string()),
        e if e.is_integrity() => CliError::Integrity(e.to_string()),
        e => CliError::Runtime(e.into()),
    }
}

fn ce_or_none(original: usize, compressed: usize) -> Option<f64> {
    if original == 0 {
        None
    } else {
        compression_efficiency(original, compressed).ok()
    }
}

fn load_model(cfg: &RunConfig, model: Option<&Path>) -> CliResult<NgramModel> {
    match model {
        Some(p) => NgramModel::load(p).map_err(|e| config_err(format!("{}: {e}", p.display()))),
        None => compression_model(cfg),
    }
}

/// Compresses one file into an `.slrc` container.
pub fn compress_file(
    cfg: &RunConfig,
    input: &Path,
    output: &Path,
    model: Option<&Path>,
    k: usize,
) -> CliResult<ExperimentReport> {
    let predictor = load_model(cfg, model)?;
    let data = std::fs::read(input).map_err(|e| config_err(format!("{}: {e}", input.display())))?;
    let blob = codec::encode(&data, k, &predictor).map_err(codec_error)?;
    let bytes = blob.to_bytes();
    write_file(output, &bytes)?;
    let mut report = ExperimentReport::new(ExperimentKind::Compress, cfg);
    report.metric("compress.original_bytes", data.len() as f64);
    report.metric("compress.compressed_bytes", bytes.len() as f64);
    report.metric("compress.ce", ce_or_none(data.len(), bytes.len()));
    report.artifacts.push(output.to_path_buf());
    report.details = json!({ "model_id": predictor.model_id(), "context_len": k, "tokens": blob.header.token_count });
    Ok(report)
}

/// Encodes every sentence block of the evaluation split for each configured
/// context length and verifies each round trip.
pub fn sweep(cfg: &RunConfig, input: Option<&Path>, model: Option<&Path>) -> CliResult<ExperimentReport> {
    let predictor = load_model(cfg, model)?;
    let text = match input {
        Some(p) => std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?,
        None => {
            let corpus = corpus_text(cfg)?;
            split_at_line(&corpus, cfg.codec.train_frac).1.to_owned()
        }
    };
    let per_block = cfg.codec.sentences_per_block.max(1);
    let blocks: Vec<&str> = sentence_blocks(&text, per_block).into_iter().filter(|b| !b.is_empty()).collect();
    let mut report = ExperimentReport::new(ExperimentKind::Compress, cfg);
    report.metric("compress.blocks", blocks.len() as f64);

    let huffman: Vec<f64> = blocks
        .iter()
        .map(|b| b.len() as f64 / huffman_baseline_size(b.as_bytes()) as f64)
        .collect();
    let (huff_mean, huff_std) = mean_std(&huffman);
    let mut table = vec![vec!["K".to_owned(), "mean CE".into(), "std".into(), "total CE".into(), "verified".into()]];
    let mut per_k = Vec::new();
    for &k in &cfg.codec.context_lengths {
        let mut ces = Vec::with_capacity(blocks.len());
        let (mut orig, mut comp, mut verified) = (0usize, 0usize, 0usize);
        for b in &blocks {
            let blob = codec::encode(b.as_bytes(), k, &predictor).map_err(codec_error)?;
            let bytes = blob.to_bytes();
            let back = CompressedBlob::from_bytes(&bytes).and_then(|c| codec::decode_with(&c, &predictor));
            match back {
                Ok(d) if d == b.as_bytes() => verified += 1,
                Ok(_) => return Err(CliError::Integrity(format!("K={k}: round trip changed a block"))),
                Err(e) => return Err(codec_error(e)),
            }
            ces.push(b.len() as f64 / bytes.len() as f64);
            orig += b.len();
            comp += bytes.len();
        }
        let (mean, std) = if ces.is_empty() { (None, None) } else { let (m, s) = mean_std(&ces); (Some(m), Some(s)) };
        let total = ce_or_none(orig, comp);
        report.metric(&format!("compress.k{k}.ce_mean"), mean);
        report.metric(&format!("compress.k{k}.ce_total"), total);
        report.metric(&format!("compress.k{k}.verified"), verified as f64);
        let fmt = |v: Option<f64>| v.map_or("n/a".to_owned(), |x| format!("{x:.3}"));
        table.push(vec![k.to_string(), fmt(mean), fmt(std), fmt(total), format!("{verified}/{}", blocks.len())]);
        per_k.push(json!({ "k": k, "ce": ces }));
    }
    let opt = |v: f64| if v.is_finite() { Some(v) } else { None };
    report.metric("compress.huffman.ce_mean", opt(huff_mean));
    let fmt = |v: f64| if v.is_finite() { format!("{v:.3}") } else { "n/a".into() };
    table.push(vec!["huffman".into(), fmt(huff_mean), fmt(huff_std), "-".into(), "-".into()]);
    report.table = table;
    report.details = json!({ "model_id": predictor.model_id(), "per_k": per_k, "huffman_ce": huffman });
    Ok(report)
}

pub fn decompress_file(cfg: &RunConfig, input: &Path, output: &Path, model_dir: Option<PathBuf>) -> CliResult<()> {
    let bytes = std::fs::read(input).map_err(|e| config_err(format!("{}: {e}", input.display())))?;
    let blob = CompressedBlob::from_bytes(&bytes).map_err(codec_error)?;
    let mut cfg = cfg.clone();
    if let Some(dir) = model_dir {
        cfg.paths.models = Some(dir);
    }
    let registry = predictor_registry(&cfg)?;
    let text = codec::decode(&blob, &registry).map_err(codec_error)?;
    write_file(output, &text)
}
