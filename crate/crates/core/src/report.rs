//! CSV traces and JSON summaries of experiments.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{Experiment, ScenarioConfig};

/// Column order of every trace CSV.
pub const CSV_HEADER: [&str; 10] = [
    "policy",
    "rep",
    "round",
    "range",
    "charger_energy",
    "charges_round",
    "charges_cum",
    "working",
    "adequate",
    "alive",
];

/// Writes the averaged trace of every experiment (`rep` = `mean`), followed
/// by the individual repetitions when `per_rep` is set.
pub fn write_trace_csv<W: Write>(out: W, experiments: &[Experiment], per_rep: bool) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for exp in experiments {
        for m in &exp.mean {
            w.write_record([
                exp.policy.clone(),
                "mean".to_string(),
                m.round.to_string(),
                m.range_used.to_string(),
                m.charger_energy.to_string(),
                m.charges_this_round.to_string(),
                m.charges_cumulative.to_string(),
                m.working_agents.to_string(),
                m.adequate_agents.to_string(),
                m.alive_agents.to_string(),
            ])?;
        }
        if per_rep {
            for run in &exp.runs {
                for m in &run.trace {
                    w.write_record([
                        exp.policy.clone(),
                        run.repetition.to_string(),
                        m.round.to_string(),
                        m.range_used.to_string(),
                        m.charger_energy.to_string(),
                        m.charges_this_round.to_string(),
                        m.charges_cumulative.to_string(),
                        m.working_agents.to_string(),
                        m.adequate_agents.to_string(),
                        m.alive_agents.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub repetitions: usize,
    pub mean_lifetime: f64,
    pub mean_total_charges: f64,
    /// Mean first depletion round, counting "never" as `horizon + 1`.
    pub mean_depletion_round: f64,
    pub depleted_runs: usize,
    pub mean_total_delivered: f64,
    pub histogram_bucket: u32,
    /// Mean number of agents whose charge count falls in each bucket.
    pub charge_histogram: Vec<f64>,
    /// How many repetitions ran under each mobility scenario.
    pub scenarios: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub horizon: u32,
    pub master_seed: u64,
    pub policies: Vec<PolicySummary>,
}

pub fn summarize(cfg: &ScenarioConfig, experiments: &[Experiment]) -> Summary {
    let policies = experiments
        .iter()
        .map(|exp| {
            let mut scenarios = BTreeMap::new();
            for run in &exp.runs {
                *scenarios.entry(run.scenario.label().to_string()).or_insert(0) += 1;
            }
            let reps = exp.runs.len().max(1) as f64;
            PolicySummary {
                policy: exp.policy.clone(),
                repetitions: exp.runs.len(),
                mean_lifetime: exp.mean_lifetime(),
                mean_total_charges: exp.mean_total_charges(),
                mean_depletion_round: exp.mean_depletion_round(),
                depleted_runs: exp.runs.iter().filter(|r| r.depletion_round.is_some()).count(),
                mean_total_delivered: exp.runs.iter().map(|r| r.total_delivered).sum::<f64>() / reps,
                histogram_bucket: cfg.histogram_bucket,
                charge_histogram: exp.charge_histogram(cfg.histogram_bucket),
                scenarios,
            }
        })
        .collect();
    Summary {
        n: cfg.n,
        horizon: cfg.horizon,
        master_seed: cfg.master_seed,
        policies,
    }
}

pub fn write_summary_json<W: Write>(mut out: W, summary: &Summary) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")
}
