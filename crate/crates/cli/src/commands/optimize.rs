use serde_json::json;
use spagent_core::detector::{detection_space, stratified_split, synth_scene, DetectionObjective, Theta};
use spagent_core::optimizer::{
    builtin_objective, run_de, run_hybrid, run_sa, DeParams, HybridConfig, Objective, OptimizationReport,
    ParamSpace, Provenance, ProposalPrompt, SaParams,
};

use super::{build_provider, mean_std};
use crate::config::RunConfig;
use crate::error::{config_err, CliError, CliResult};
use crate::report::{ExperimentKind, ExperimentReport};

pub const METHODS: [&str; 3] = ["hybrid", "de", "sa"];

fn objective(cfg: &RunConfig, name: &str) -> CliResult<(Box<dyn Objective>, ParamSpace, String)> {
    let o = &cfg.optimizer;
    match name {
        "detection" => {
            let frames = synth_scene(&o.scene).map_err(|e| config_err(format!("optimizer.scene: {e}")))?;
            let (train, val) = stratified_split(&frames, |f| f.label, o.train_frac, cfg.seed);
            let obj = DetectionObjective::new(&train, &val, o.alpha).map_err(|e| config_err(e.to_string()))?;
            let task = format!(
                "Tune the feature parameters (FPAR band start, STFT neighborhood ratio, histogram intervals) of a \
                 radar target detector. The score is Pd + {} * (1 - Pfa).",
                o.alpha
            );
            Ok((Box::new(obj), detection_space(), task))
        }
        other => {
            let (obj, mut space) = builtin_objective(other, o.dim).map_err(|e| config_err(e.to_string()))?;
            if let Some(h) = o.half_width {
                space = ParamSpace::cube(o.dim, -h, h).map_err(|e| config_err(e.to_string()))?;
            }
            Ok((obj, space, format!("Maximize the negated {other} function.")))
        }
    }
}

pub fn run(cfg: &RunConfig, name: &str) -> CliResult<ExperimentReport> {
    let o = &cfg.optimizer;
    if o.budget < o.n_init {
        return Err(config_err(format!("optimizer.budget {} is below optimizer.n_init {}", o.budget, o.n_init)));
    }
    if o.runs == 0 {
        return Err(config_err("optimizer.runs must be positive"));
    }
    let (obj, space, task) = objective(cfg, name)?;
    let de = DeParams { f: o.f, cr: o.cr };
    let sa = SaParams { t0: o.sa_t0, cooling: o.sa_cooling, ..SaParams::default() };
    let runtime = |e: spagent_core::optimizer::OptimizerError| CliError::Runtime(e.into());

    let mut runs: Vec<Vec<OptimizationReport>> = vec![Vec::new(); METHODS.len()];
    for r in 0..o.runs {
        let seed = cfg.seed.wrapping_add(r as u64);
        let provider = build_provider(cfg, r as u64)?;
        let hybrid = HybridConfig {
            budget: o.budget,
            n_init: o.n_init,
            de,
            seed,
            prompt: ProposalPrompt { task_description: task.clone(), ..ProposalPrompt::default() },
        };
        runs[0].push(run_hybrid(obj.as_ref(), &space, provider.as_ref(), &hybrid).map_err(runtime)?);
        runs[1].push(run_de(obj.as_ref(), &space, o.budget, seed, de).map_err(runtime)?);
        runs[2].push(run_sa(obj.as_ref(), &space, o.budget, seed, sa).map_err(runtime)?);
        tracing::info!(run = r, "optimizer run finished");
    }

    let mut report = ExperimentReport::new(ExperimentKind::Optimize, cfg);
    let mut table = vec![vec!["method".to_owned(), "mean best".into(), "std".into(), "best".into(), "runs".into()]];
    for (method, reps) in METHODS.iter().zip(&runs) {
        let best: Vec<f64> = reps.iter().map(|r| r.best_score).collect();
        let (mean, std) = mean_std(&best);
        let top = best.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        report.metric(&format!("optimize.{method}.best_mean"), mean);
        report.metric(&format!("optimize.{method}.best_std"), std);
        table.push(vec![method.to_string(), format!("{mean:.6}"), format!("{std:.6}"), format!("{top:.6}"), reps.len().to_string()]);
    }
    let fallbacks: usize = runs[0].iter().map(|r| r.llm_fallbacks).sum();
    report.metric("optimize.hybrid.llm_fallbacks", fallbacks as f64);
    let accepted = runs[0].iter().flat_map(|r| r.provenance()).filter(|p| *p == Provenance::Llm).count();
    report.metric("optimize.hybrid.llm_proposals", accepted as f64);
    report.table = table;

    let overall = runs.iter().flatten().max_by(|a, b| a.best_score.total_cmp(&b.best_score)).expect("runs > 0");
    let mut best = json!({ "method": overall.method, "seed": overall.seed, "theta": overall.best_theta, "score": overall.best_score });
    if name == "detection" {
        if let Ok(t) = Theta::from_slice(&overall.best_theta) {
            best["theta_named"] = json!({ "band_start": t.band_start, "neighborhood": t.neighborhood, "intervals": t.intervals });
        }
    }
    report.details = json!({
        "objective": name,
        "best": best,
        "runs": METHODS.iter().zip(&runs).map(|(m, r)| (m.to_string(), json!(r))).collect::<serde_json::Map<_, _>>(),
    });
    Ok(report)
}
