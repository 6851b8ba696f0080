use serde_json::json;
use spagent_core::detector::fewshot::{FewShotConfig, FEWSHOT_TASK};
use spagent_core::detector::{
    evaluate, feature_set, load_manifest, run_fewshot, stratified_split, synth_scene, train_linear, FewShotExemplars,
    Label, LabeledFrame, Metrics, Theta,
};
use spagent_core::retrieval::Retriever;

use super::{build_index, build_provider};
use crate::config::RunConfig;
use crate::error::{config_err, CliError, CliResult};
use crate::report::{ExperimentKind, ExperimentReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DetectMode {
    Supervised,
    Fewshot,
}

pub const KNOWLEDGE_QUERY: &str = "sea clutter target detection Doppler spectrum entropy";

fn frames(cfg: &RunConfig) -> CliResult<Vec<LabeledFrame>> {
    match &cfg.detector.manifest {
        Some(p) => load_manifest(p).map_err(|e| config_err(format!("{}: {e}", p.display()))),
        None => synth_scene(&cfg.detector.scene).map_err(|e| config_err(format!("detector.scene: {e}"))),
    }
}

fn put_metrics(report: &mut ExperimentReport, prefix: &str, m: &Metrics) {
    for (name, v) in [("acc", m.acc), ("f1", m.f1), ("precision", m.precision), ("pd", m.pd), ("pfa", m.pfa)] {
        report.metric(&format!("{prefix}.{name}"), v);
    }
}

pub fn run(cfg: &RunConfig, mode: DetectMode) -> CliResult<ExperimentReport> {
    let all = frames(cfg)?;
    let (train, test) = stratified_split(&all, |f| f.label, cfg.detector.train_frac, cfg.seed);
    let runtime = |e: spagent_core::detector::DetectorError| CliError::Runtime(e.into());
    let mut report = ExperimentReport::new(ExperimentKind::Detect, cfg);
    report.metric("detect.train_frames", train.len() as f64);
    report.metric("detect.test_frames", test.len() as f64);
    let metrics = match mode {
        DetectMode::Supervised => {
            let theta = Theta::from_slice(&cfg.detector.theta).map_err(|e| config_err(format!("detector.theta: {e}")))?;
            let model = train_linear(&feature_set(&train, &theta).map_err(runtime)?).map_err(runtime)?;
            let m = evaluate(&model, &feature_set(&test, &theta).map_err(runtime)?);
            put_metrics(&mut report, "detect.supervised", &m);
            report.details = json!({ "mode": "supervised", "theta": theta, "model": model, "metrics": m });
            m
        }
        DetectMode::Fewshot => {
            let pick = |label| train.iter().find(|f| f.label == label).map(|f| f.frame.clone());
            let (Some(target), Some(clutter)) = (pick(Label::Target), pick(Label::Clutter)) else {
                return Err(config_err("few-shot mode needs one training frame of each class"));
            };
            let knowledge: Vec<String> = if cfg.detector.knowledge_docs == 0 {
                Vec::new()
            } else {
                let index = build_index(cfg)?;
                report.ledger.insert(format!("retrieve.{FEWSHOT_TASK}"), 1);
                index
                    .retrieve(KNOWLEDGE_QUERY, cfg.detector.knowledge_docs)
                    .map_err(|e| CliError::Runtime(e.into()))?
                    .into_iter()
                    .map(|r| r.text)
                    .collect()
            };
            let provider = build_provider(cfg, 0)?;
            let exemplars = FewShotExemplars { target, clutter };
            let outcome = run_fewshot(provider.as_ref(), &exemplars, &test, &knowledge, &FewShotConfig::default())
                .map_err(runtime)?;
            report.ledger.insert(format!("chat.{FEWSHOT_TASK}"), test.len());
            put_metrics(&mut report, "detect.fewshot", &outcome.metrics);
            report.metric("detect.fewshot.unparsed", outcome.unparsed as f64);
            report.details = json!({ "mode": "fewshot", "knowledge": knowledge, "outcome": outcome });
            outcome.metrics
        }
    };
    let c = &metrics.confusion;
    report.table = vec![
        vec!["".into(), "pred target".into(), "pred clutter".into()],
        vec!["target".into(), c.tp.to_string(), c.fn_.to_string()],
        vec!["clutter".into(), c.fp.to_string(), c.tn.to_string()],
    ];
    Ok(report)
}
