//! CSV and JSON renderings of evaluation results.

use serde::Serialize;
use trienc_core::eval::{AdditivityRow, PlanningResult, SeqEvalResult};

pub fn seq_csv(result: &SeqEvalResult) -> String {
    let mut out = String::from("depth,avg_rank,avg_norm_rank,n_items\n");
    for d in &result.per_depth {
        out.push_str(&format!("{},{:.6},{:.6},{}\n", d.depth, d.avg_rank, d.avg_norm_rank, d.n_items));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct SeqSummary<'a> {
    pub scorer: &'a str,
    pub n_items: usize,
    pub macro_avg_rank: f64,
    pub macro_avg_norm_rank: f64,
    pub total_pairs_scored: usize,
    pub pairs_materialized: usize,
}

impl<'a> SeqSummary<'a> {
    pub fn new(scorer: &'a str, result: &SeqEvalResult) -> Self {
        Self {
            scorer,
            n_items: result.items.len(),
            macro_avg_rank: result.macro_avg_rank,
            macro_avg_norm_rank: result.macro_avg_norm_rank,
            total_pairs_scored: result.total_pairs_scored,
            pairs_materialized: result.pairs_materialized,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PlanningSummary<'a> {
    pub planner: &'a str,
    pub history_len: usize,
    pub goal_distance: usize,
    pub n_items: usize,
    pub skipped: usize,
    pub hits: Vec<HitsEntry>,
}

#[derive(Debug, Serialize)]
pub struct HitsEntry {
    pub k: usize,
    pub hits: f64,
}

impl<'a> PlanningSummary<'a> {
    pub fn new(planner: &'a str, history_len: usize, goal_distance: usize, result: &PlanningResult) -> Self {
        Self {
            planner,
            history_len,
            goal_distance,
            n_items: result.ranks.len(),
            skipped: result.skipped,
            hits: result.hits.iter().map(|&(k, hits)| HitsEntry { k, hits }).collect(),
        }
    }
}

pub fn additivity_csv(rows: &[AdditivityRow]) -> String {
    let mut out = String::from("position,correct,random,gap,n_contexts\n");
    for r in rows {
        out.push_str(&format!("{},{:.6},{:.6},{:.6},{}\n", r.position, r.correct, r.random, r.gap, r.n_contexts));
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summaries serialise") + "\n"
}
