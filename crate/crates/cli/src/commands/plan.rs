use std::path::Path;

use serde_json::json;
use spagent_core::planner::{AgentMemory, Planner, SpRequest};

use super::{build_index, build_provider};
use crate::config::RunConfig;
use crate::error::{config_err, CliError, CliResult};
use crate::report::{ExperimentKind, ExperimentReport};

/// Runs the planning pipeline. An aborted run still writes its partial
/// report before failing with a runtime error.
pub fn run(cfg: &RunConfig, request_path: &Path) -> CliResult<ExperimentReport> {
    let text = std::fs::read_to_string(request_path)
        .map_err(|e| config_err(format!("{}: {e}", request_path.display())))?;
    let request: SpRequest =
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", request_path.display())))?;
    let provider = build_provider(cfg, 0)?;
    let index = build_index(cfg)?;
    let planner = Planner::new(cfg.planner.clone(), provider.as_ref(), &index);
    let run = planner
        .run_pipeline(&request, &AgentMemory::seeded())
        .map_err(|e| config_err(format!("request: {e}")))?;

    let mut report = ExperimentReport::new(ExperimentKind::Plan, cfg);
    report.ledger = run.ledger.clone();
    report.metric("plan.subtasks", run.chain.len() as f64);
    let mut table = vec![vec!["id".to_owned(), "tier".into(), "paradigm".into(), "evidence".into()]];
    for s in &run.chain.subtasks {
        let rec = s.solution.as_ref();
        table.push(vec![
            s.id.clone(),
            s.complexity.map_or("-".into(), |t| format!("{t:?}").to_lowercase()),
            rec.map_or("-".into(), |r| r.paradigm.name().to_owned()),
            rec.map_or(0, |r| r.evidence.len()).to_string(),
        ]);
    }
    report.table = table;
    report.details = json!({ "run": run });
    if !run.is_complete() {
        report.status = "aborted".into();
    }
    let path = report.default_path();
    report.artifacts.push(path.clone());
    report.write(Some(&path))?;
    if !run.is_complete() {
        return Err(CliError::Runtime(
            anyhow::anyhow!("planning aborted: {:?}", run.outcome).context(format!("partial report at {}", path.display())),
        ));
    }
    Ok(report)
}
