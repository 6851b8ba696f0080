use serde_json::json;
use spagent_core::codec::{split_at_line, train_text_predictor, PredictorRecipe};
use spagent_core::detector::{
    evaluate, feature_set, stratified_split, synth_scene, train_linear, write_scene, Label, LabeledFrame, Theta,
};
use spagent_core::provider::TokenPredictor;
use spagent_core::retrieval::write_knowledge_jsonl;

use super::{corpus_text, knowledge_records, write_file};
use crate::config::RunConfig;
use crate::error::{config_err, CliError, CliResult};
use crate::report::{ExperimentKind, ExperimentReport};

/// Allowed gap between the configured and the measured SCR.
pub const SCR_TOLERANCE_DB: f64 = 3.0;

/// SCR estimated from the mean power of target and clutter frames.
pub fn measured_scr_db(frames: &[LabeledFrame]) -> Option<f64> {
    let mean_power = |label| {
        let (sum, n) = frames.iter().filter(|f| f.label == label).fold((0.0, 0usize), |(s, n), f| {
            let p = f.frame.samples().iter().map(|z| z.norm_sqr()).sum::<f64>() / f.frame.len() as f64;
            (s + p, n + 1)
        });
        (n > 0).then(|| sum / n as f64)
    };
    let ratio = mean_power(Label::Target)? / mean_power(Label::Clutter)? - 1.0;
    (ratio > 0.0).then(|| 10.0 * ratio.log10())
}

pub fn run(cfg: &RunConfig) -> CliResult<ExperimentReport> {
    let out = &cfg.paths.output;
    let runtime = |e: spagent_core::detector::DetectorError| CliError::Runtime(e.into());
    let mut report = ExperimentReport::new(ExperimentKind::GenData, cfg);

    let scene = &cfg.detector.scene;
    let frames = synth_scene(scene).map_err(|e| config_err(format!("detector.scene: {e}")))?;
    let manifest = write_scene(&out.join("scenes").join("detector"), &frames).map_err(runtime)?;
    report.artifacts.push(manifest);

    let corpus = corpus_text(cfg)?;
    let corpus_path = out.join("corpus.txt");
    write_file(&corpus_path, corpus.as_bytes())?;
    report.artifacts.push(corpus_path);

    let c = &cfg.codec;
    let recipe = PredictorRecipe {
        merges: c.merges,
        vocab_sample_bytes: c.vocab_sample_bytes,
        order: c.order,
        smoothing: c.smoothing,
    };
    let (train_text, _) = split_at_line(&corpus, c.train_frac);
    let model = train_text_predictor(train_text, &recipe).map_err(|e| config_err(format!("codec: {e}")))?;
    let model_path = out.join("models").join(format!("ngram{}.slpm", c.order));
    write_file(&model_path, &model.to_bytes())?;
    report.artifacts.push(model_path);

    let kb_path = out.join("knowledge.jsonl");
    write_file(&kb_path, write_knowledge_jsonl(&knowledge_records(cfg)?).as_bytes())?;
    report.artifacts.push(kb_path);

    let measured = measured_scr_db(&frames);
    let scr_ok = measured.is_some_and(|m| (m - scene.scr_db).abs() <= SCR_TOLERANCE_DB);
    let theta = Theta::from_slice(&cfg.detector.theta).map_err(|e| config_err(format!("detector.theta: {e}")))?;
    let (train, test) = stratified_split(&frames, |f| f.label, cfg.detector.train_frac, cfg.seed);
    let detector = train_linear(&feature_set(&train, &theta).map_err(runtime)?).map_err(runtime)?;
    let metrics = evaluate(&detector, &feature_set(&test, &theta).map_err(runtime)?);
    report.metric("gen-data.scene.frames", frames.len() as f64);
    report.metric("gen-data.scene.scr_db", scene.scr_db);
    report.metric("gen-data.scene.measured_scr_db", measured);
    report.metric("gen-data.scene.supervised_f1", metrics.f1);
    if !scr_ok {
        report.status = "completed with warnings".into();
        tracing::warn!(configured = scene.scr_db, ?measured, "measured SCR is off the configured value");
    }
    report.details = json!({
        "model_id": model.model_id(),
        "vocabulary": model.vocabulary().len(),
        "scr_check": if scr_ok { "pass" } else { "fail" },
    });
    Ok(report)
}
