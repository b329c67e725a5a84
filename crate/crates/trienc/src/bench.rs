//! Per-turn cost of the incremental triple state.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trienc_core::inference::{CandidateSet, DialogState};
use trienc_core::Vector;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub turn: usize,
    /// Pairs added by this turn.
    pub relative_growth: usize,
    /// Pairs held after this turn.
    pub total_states: usize,
    pub wall_time_us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub turns: usize,
    pub dim: usize,
    pub candidates: usize,
    pub seed: u64,
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    Vector::new((0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()).expect("finite and non-empty")
}

/// Pushes `turns` random utterances through one dialog state, timing each push.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cands: Vec<Vector> = (0..cfg.candidates.max(1)).map(|_| random_vector(&mut rng, cfg.dim)).collect();
    let set = CandidateSet::from_vectors(&cands)?;
    let mut state = DialogState::new(&set, false);
    let mut rows = Vec::with_capacity(cfg.turns);
    for turn in 1..=cfg.turns {
        let b1 = random_vector(&mut rng, cfg.dim);
        let b2 = random_vector(&mut rng, cfg.dim);
        let start = Instant::now();
        state.push_utterance(b1.into(), b2.into(), &set)?;
        let elapsed = start.elapsed();
        rows.push(BenchRow {
            turn,
            relative_growth: state.last_new_pairs(),
            total_states: state.total_pairs(),
            wall_time_us: elapsed.as_secs_f64() * 1e6,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("turn,relative_growth,total_states,wall_time_us\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:.3}\n", r.turn, r.relative_growth, r.total_states, r.wall_time_us));
    }
    out
}
