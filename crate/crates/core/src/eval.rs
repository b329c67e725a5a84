//! Ranking evaluation: next-utterance selection per context depth, short-term
//! planning with Hits@k, ordered-pair disambiguation and the per-position
//! additivity table.
//!
//! Ties are ranked by mid-rank: a true candidate tied with `t` others gets
//! rank `1 + greater + t / 2`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::corpus::UttId;
use crate::encoder::{Parity, SubspaceKey, Tag};
use crate::error::{Error, Result};
use crate::geometry::{cosine, mean_pool, Matrix, Vector};
use crate::inference::{
    pair_scores, score_bi, score_maxsim, score_planning_bi, score_planning_triple, triangle_sum,
    CandidateSet, DialogState, Encoded,
};
use crate::rng::stream_rng;
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingResult {
    pub rank: f64,
    pub pool_size: usize,
    pub depth: usize,
    pub normalized_rank: f64,
}

impl RankingResult {
    pub fn new(rank: f64, pool_size: usize, depth: usize) -> Self {
        let normalized_rank = if pool_size > 1 {
            (rank - 1.0) / (pool_size - 1) as f64
        } else {
            0.0
        };
        Self {
            rank,
            pool_size,
            depth,
            normalized_rank,
        }
    }
}

/// Mid-rank of `scores[true_index]`.
pub fn rank_true(scores: &[f64], true_index: usize) -> Result<f64> {
    let s = *scores.get(true_index).ok_or(Error::IndexOutOfRange {
        index: true_index,
        len: scores.len(),
    })?;
    let mut greater = 0usize;
    let mut ties = 0usize;
    for (j, &x) in scores.iter().enumerate() {
        if x > s {
            greater += 1;
        } else if x == s && j != true_index {
            ties += 1;
        }
    }
    Ok(1.0 + greater as f64 + ties as f64 / 2.0)
}

/// Fraction of ranks `<= k`.
pub fn hits_at(ranks: &[f64], k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / ranks.len() as f64
}

/// Two-sided exact sign test p-value for `wins` against `losses` (ties dropped).
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.min(losses);
    let ln_choose = |n: usize, i: usize| {
        libm::lgamma(n as f64 + 1.0) - libm::lgamma(i as f64 + 1.0) - libm::lgamma((n - i) as f64 + 1.0)
    };
    let half = -(n as f64) * core::f64::consts::LN_2;
    let tail: f64 = (0..=k).map(|i| libm::exp(ln_choose(n, i) + half)).sum();
    (2.0 * tail).min(1.0)
}

/// Inference-time scorers over the before-space subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentScorer {
    /// Mean of `[B1] u_i` and `[B2] u_j` for every `i < j`.
    Triple,
    /// `Triple` plus `[B2]` bi-encoder terms.
    TriplePlusBiB2,
    /// Only adjacent pairs `j = i + 1`.
    DirectNeighbors,
    /// `[B1]` and `[B2]` bi-encoder terms.
    BiB1PlusBiB2,
    /// Pairs mixed from `[B2]` on both sides.
    MeanB2Only,
    /// `[B2]` bi-encoder terms.
    BiB2,
    /// Pairs mixed from `[B1]` on both sides.
    MeanB1Only,
}

impl ComponentScorer {
    pub const ALL: [ComponentScorer; 7] = [
        ComponentScorer::Triple,
        ComponentScorer::TriplePlusBiB2,
        ComponentScorer::DirectNeighbors,
        ComponentScorer::BiB1PlusBiB2,
        ComponentScorer::MeanB2Only,
        ComponentScorer::BiB2,
        ComponentScorer::MeanB1Only,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentScorer::Triple => "triple",
            ComponentScorer::TriplePlusBiB2 => "triple-plus-bi-b2",
            ComponentScorer::DirectNeighbors => "direct-neighbors",
            ComponentScorer::BiB1PlusBiB2 => "bi-b1-plus-bi-b2",
            ComponentScorer::MeanB2Only => "mean-b2-only",
            ComponentScorer::BiB2 => "bi-b2",
            ComponentScorer::MeanB1Only => "mean-b1-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    fn min_context(self) -> usize {
        match self {
            ComponentScorer::BiB1PlusBiB2 | ComponentScorer::BiB2 => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqScorer {
    Bi { tag: Tag },
    TripleAvg,
    TripleLastL { l: usize },
    MaxSim,
    Component(ComponentScorer),
}

impl SeqScorer {
    pub fn min_context(self) -> usize {
        match self {
            SeqScorer::Bi { .. } => 1,
            SeqScorer::Component(c) => c.min_context(),
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqEvalConfig {
    pub scorer: SeqScorer,
    /// Drops context utterances farther than this from the candidate position.
    pub max_distance: Option<usize>,
    /// Shallowest context length evaluated; raised to what the scorer needs.
    pub min_depth: usize,
}

impl SeqEvalConfig {
    pub fn new(scorer: SeqScorer) -> Self {
        Self {
            scorer,
            max_distance: None,
            min_depth: 2,
        }
    }

    fn validate(&self) -> Result<()> {
        if let SeqScorer::TripleLastL { l: 0 } = self.scorer {
            return Err(Error::InvalidConfig("l must be at least 1"));
        }
        if self.max_distance == Some(0) {
            return Err(Error::InvalidConfig("max distance must be at least 1"));
        }
        Ok(())
    }
}

/// Whether the store carries even/odd before-space tables.
pub fn store_has_parity(store: &EmbeddingStore) -> bool {
    store.tables().any(|(k, _)| k.parity.is_some())
}

/// Before-space encoding of one utterance, split by parity when the store is.
pub fn encode(store: &EmbeddingStore, tag: Tag, utt: UttId) -> Result<Encoded> {
    let split = store
        .tables()
        .any(|(k, _)| k == SubspaceKey::new(tag, Some(Parity::Even)));
    if split {
        Ok(Encoded::ByParity {
            even: store.vector(utt, tag, Parity::Even)?,
            odd: store.vector(utt, tag, Parity::Odd)?,
        })
    } else {
        Ok(Encoded::Plain(store.vector(utt, tag, Parity::Even)?))
    }
}

/// `tag` vectors of `context` (positions `1..=n`) resolved for a target at `target_pos`.
pub fn resolved_history(store: &EmbeddingStore, tag: Tag, context: &[UttId], target_pos: usize) -> Result<Vec<Vector>> {
    context
        .iter()
        .enumerate()
        .map(|(idx, &u)| store.vector(u, tag, Parity::of_distance(target_pos - (idx + 1))))
        .collect()
}

/// `[A]` vectors of `ids` as a candidate set labelled by id.
pub fn candidate_set(store: &EmbeddingStore, ids: &[UttId]) -> Result<CandidateSet> {
    let rows: Vec<Vector> = ids
        .iter()
        .map(|&u| store.vector(u, Tag::A, Parity::Even))
        .collect::<Result<_>>()?;
    let matrix = Matrix::from_rows(store.dim(), &rows)?;
    CandidateSet::new(matrix, ids.to_vec())
}

fn add_into(acc: &mut [f64], xs: &[f64]) {
    for (a, x) in acc.iter_mut().zip(xs) {
        *a += x;
    }
}

/// From-scratch scores of `candidates` after `context`, and the number of
/// context vectors or pairs that contributed.
pub fn score_context(
    store: &EmbeddingStore,
    context: &[UttId],
    candidates: &CandidateSet,
    scorer: SeqScorer,
    max_distance: Option<usize>,
) -> Result<(Vec<f64>, usize)> {
    let n = context.len();
    if n < scorer.min_context() {
        return Err(Error::InsufficientContext {
            turn: n,
            required: scorer.min_context(),
        });
    }
    let f = n + 1;
    let near = |i: usize| max_distance.is_none_or(|m| f - i <= m);
    let bi = |tag: Tag| -> Result<(Vec<f64>, usize)> {
        let hist = resolved_history(store, tag, context, f)?;
        let kept: Vec<Vector> = hist
            .into_iter()
            .enumerate()
            .filter(|(idx, _)| near(idx + 1))
            .map(|(_, v)| v)
            .collect();
        if kept.is_empty() {
            return Ok((vec![0.0; candidates.len()], 0));
        }
        let count = kept.len();
        Ok((score_bi(&kept, candidates)?, count))
    };
    let b1 = || resolved_history(store, Tag::B1, context, f);
    let b2 = || resolved_history(store, Tag::B2, context, f);
    match scorer {
        SeqScorer::Bi { tag } => bi(tag),
        SeqScorer::TripleAvg | SeqScorer::Component(ComponentScorer::Triple) => {
            triangle_sum(&b1()?, &b2()?, candidates, |i, _| near(i))
        }
        SeqScorer::TripleLastL { l } => {
            if l == 0 {
                return Err(Error::InvalidConfig("l must be at least 1"));
            }
            triangle_sum(&b1()?, &b2()?, candidates, |i, j| j + l > n && near(i))
        }
        SeqScorer::MaxSim => {
            let (scores, index) = pair_scores(&b1()?, &b2()?, candidates, |i, _| near(i))?;
            let count = index.len();
            Ok((score_maxsim(&scores, &index)?, count))
        }
        SeqScorer::Component(c) => match c {
            ComponentScorer::Triple => unreachable!("handled with TripleAvg"),
            ComponentScorer::TriplePlusBiB2 => {
                let (mut s, p) = triangle_sum(&b1()?, &b2()?, candidates, |i, _| near(i))?;
                let (extra, q) = bi(Tag::B2)?;
                add_into(&mut s, &extra);
                Ok((s, p + q))
            }
            ComponentScorer::DirectNeighbors => {
                triangle_sum(&b1()?, &b2()?, candidates, |i, j| j == i + 1 && near(i))
            }
            ComponentScorer::BiB1PlusBiB2 => {
                let (mut s, p) = bi(Tag::B2)?;
                let (extra, q) = bi(Tag::B1)?;
                add_into(&mut s, &extra);
                Ok((s, p + q))
            }
            ComponentScorer::MeanB2Only => {
                let h = b2()?;
                triangle_sum(&h, &h, candidates, |i, _| near(i))
            }
            ComponentScorer::BiB2 => bi(Tag::B2),
            ComponentScorer::MeanB1Only => {
                let h = b1()?;
                triangle_sum(&h, &h, candidates, |i, _| near(i))
            }
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqItem {
    pub dialog: usize,
    pub ranking: RankingResult,
    /// Context vectors or pairs read to score this item.
    pub pairs_scored: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSummary {
    pub depth: usize,
    pub avg_rank: f64,
    pub avg_norm_rank: f64,
    pub n_items: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqEvalResult {
    pub items: Vec<SeqItem>,
    pub per_depth: Vec<DepthSummary>,
    /// Mean over depths of the per-depth averages.
    pub macro_avg_rank: f64,
    pub macro_avg_norm_rank: f64,
    pub total_pairs_scored: usize,
    /// Pairs materialised by the incremental state (full-triangle scorer only).
    pub pairs_materialized: usize,
}

/// Depth pools: the distinct utterances found at position `k + 1` of any dialog.
pub fn depth_pools(dialogs: &[Vec<UttId>]) -> BTreeMap<usize, Vec<UttId>> {
    let mut pools: BTreeMap<usize, Vec<UttId>> = BTreeMap::new();
    for d in dialogs {
        for (idx, &u) in d.iter().enumerate().skip(1) {
            pools.entry(idx).or_default().push(u);
        }
    }
    for pool in pools.values_mut() {
        pool.sort_unstable();
        pool.dedup();
    }
    pools
}

/// Ranks every true next utterance among its depth pool.
pub fn eval_sequence_modeling(
    dialogs: &[Vec<UttId>],
    store: &EmbeddingStore,
    cfg: &SeqEvalConfig,
) -> Result<SeqEvalResult> {
    cfg.validate()?;
    if dialogs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let min_depth = cfg.min_depth.max(cfg.scorer.min_context());
    let pools: BTreeMap<usize, Vec<UttId>> = depth_pools(dialogs).into_iter().filter(|(k, _)| *k >= min_depth).collect();
    let mut union: Vec<UttId> = pools.values().flatten().copied().collect();
    union.sort_unstable();
    union.dedup();
    let mut items = Vec::new();
    let mut materialized = 0;
    if union.is_empty() {
        return Ok(summarise(items, 0));
    }
    let candidates = candidate_set(store, &union)?;
    let position: BTreeMap<UttId, usize> = union.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let pool_index: BTreeMap<usize, Vec<usize>> = pools
        .iter()
        .map(|(&k, p)| (k, p.iter().map(|u| position[u]).collect()))
        .collect();
    let incremental = cfg.scorer == SeqScorer::TripleAvg && cfg.max_distance.is_none();
    let parity = store_has_parity(store);
    for (d, dialog) in dialogs.iter().enumerate() {
        let mut state = incremental.then(|| DialogState::new(&candidates, parity));
        for k in 1..dialog.len() {
            if let Some(st) = state.as_mut() {
                let u = dialog[k - 1];
                st.push_utterance(encode(store, Tag::B1, u)?, encode(store, Tag::B2, u)?, &candidates)?;
                materialized += st.last_new_pairs();
            }
            let Some(pool) = pool_index.get(&k) else { continue };
            let (scores, pairs) = match state.as_ref() {
                Some(st) => (st.score_triple_avg()?.to_vec(), st.total_pairs()),
                None => score_context(store, &dialog[..k], &candidates, cfg.scorer, cfg.max_distance)?,
            };
            let pool_scores: Vec<f64> = pool.iter().map(|&c| scores[c]).collect();
            let truth = position[&dialog[k]];
            let t = pool.iter().position(|&c| c == truth).expect("pool holds every true utterance");
            let rank = rank_true(&pool_scores, t)?;
            items.push(SeqItem {
                dialog: d,
                ranking: RankingResult::new(rank, pool.len(), k),
                pairs_scored: pairs,
            });
        }
    }
    Ok(summarise(items, materialized))
}

fn summarise(items: Vec<SeqItem>, materialized: usize) -> SeqEvalResult {
    let mut by_depth: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for it in &items {
        let e = by_depth.entry(it.ranking.depth).or_insert((0.0, 0.0, 0));
        e.0 += it.ranking.rank;
        e.1 += it.ranking.normalized_rank;
        e.2 += 1;
    }
    let per_depth: Vec<DepthSummary> = by_depth
        .into_iter()
        .map(|(depth, (r, nr, n))| DepthSummary {
            depth,
            avg_rank: r / n as f64,
            avg_norm_rank: nr / n as f64,
            n_items: n,
        })
        .collect();
    let m = per_depth.len().max(1) as f64;
    SeqEvalResult {
        macro_avg_rank: per_depth.iter().map(|d| d.avg_rank).sum::<f64>() / m,
        macro_avg_norm_rank: per_depth.iter().map(|d| d.avg_norm_rank).sum::<f64>() / m,
        total_pairs_scored: items.iter().map(|i| i.pairs_scored).sum(),
        pairs_materialized: materialized,
        items,
        per_depth,
    }
}

/// A context whose true continuation competes with one alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct DisambiguationItem {
    pub context: Vec<UttId>,
    pub truth: UttId,
    pub alternative: UttId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisambiguationResult {
    /// Wins plus half the ties, over all items.
    pub accuracy: f64,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

/// Scores within this distance count as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

pub fn eval_disambiguation(
    store: &EmbeddingStore,
    items: &[DisambiguationItem],
    scorer: SeqScorer,
) -> Result<DisambiguationResult> {
    if items.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (mut wins, mut ties, mut losses) = (0, 0, 0);
    for it in items {
        let cands = candidate_set(store, &[it.truth, it.alternative])?;
        let (s, _) = score_context(store, &it.context, &cands, scorer, None)?;
        let delta = s[0] - s[1];
        if delta.abs() <= TIE_TOLERANCE {
            ties += 1;
        } else if delta > 0.0 {
            wins += 1;
        } else {
            losses += 1;
        }
    }
    Ok(DisambiguationResult {
        accuracy: (wins as f64 + ties as f64 / 2.0) / items.len() as f64,
        wins,
        ties,
        losses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planner {
    /// `cos([B] c, [A] g)`.
    Bi,
    /// Candidate score plus its mean with each `[B1]` context utterance.
    Triple,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningConfig {
    pub history_len: usize,
    pub goal_distance: usize,
    pub planner: Planner,
    pub distractors: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningResult {
    /// `(k, Hits@k)` for k in 5, 10, 25, 50.
    pub hits: Vec<(usize, f64)>,
    pub ranks: Vec<f64>,
    /// Dialogs too short for the history and goal.
    pub skipped: usize,
}

pub const HITS_KS: [usize; 4] = [5, 10, 25, 50];

/// Ranks the true utterance `u_{h+1}` among distractors by how well each
/// candidate leads to the goal `u_{h+1+goal_distance}`. Distractors are drawn
/// uniformly with replacement from `pool` minus the true utterance, unless
/// `provided` lists them for the dialog index.
pub fn eval_planning(
    dialogs: &[Vec<UttId>],
    store: &EmbeddingStore,
    pool: &[UttId],
    cfg: &PlanningConfig,
    provided: Option<&BTreeMap<usize, Vec<UttId>>>,
) -> Result<PlanningResult> {
    if cfg.history_len == 0 || cfg.goal_distance == 0 {
        return Err(Error::InvalidConfig("history length and goal distance must be positive"));
    }
    if dialogs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let h = cfg.history_len;
    let mut ranks = Vec::new();
    let mut skipped = 0;
    for (d, dialog) in dialogs.iter().enumerate() {
        if dialog.len() < h + 1 + cfg.goal_distance {
            skipped += 1;
            continue;
        }
        let truth = dialog[h];
        let goal_pos = h + 1 + cfg.goal_distance;
        let mut cands = vec![truth];
        match provided.and_then(|m| m.get(&d)) {
            Some(list) => cands.extend_from_slice(list),
            None => {
                if !pool.iter().any(|&u| u != truth) {
                    return Err(Error::PoolTooSmall);
                }
                let mut rng = stream_rng(cfg.seed, d as u64);
                while cands.len() < cfg.distractors + 1 {
                    let u = pool[rng.random_range(0..pool.len())];
                    if u != truth {
                        cands.push(u);
                    }
                }
            }
        }
        let goal = store.vector(dialog[goal_pos - 1], Tag::A, Parity::Even)?;
        let cand_parity = Parity::of_distance(cfg.goal_distance);
        let scores: Vec<f64> = match cfg.planner {
            Planner::Bi => cands
                .iter()
                .map(|&c| score_planning_bi(&store.vector(c, Tag::B, cand_parity)?, &goal))
                .collect::<Result<_>>()?,
            Planner::Triple => {
                let ctx = resolved_history(store, Tag::B1, &dialog[..h], goal_pos)?;
                cands
                    .iter()
                    .map(|&c| score_planning_triple(&store.vector(c, Tag::B2, cand_parity)?, &ctx, &goal))
                    .collect::<Result<_>>()?
            }
        };
        ranks.push(rank_true(&scores, 0)?);
    }
    Ok(PlanningResult {
        hits: HITS_KS.iter().map(|&k| (k, hits_at(&ranks, k))).collect(),
        ranks,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdditivityMode {
    /// Each context utterance alone in the given before space.
    Bi { tag: Tag },
    /// Each context utterance through the mean of its `n - 1` pair mixtures.
    Triple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdditivityConfig {
    pub context_len: usize,
    pub mode: AdditivityMode,
    /// Random utterances sampled per context.
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditivityRow {
    /// 1-based context position.
    pub position: usize,
    pub correct: f64,
    pub random: f64,
    pub gap: f64,
    pub n_contexts: usize,
}

/// For contexts `u_1..u_n` followed by a true `u_{n+1}`, the similarity each
/// context position contributes to the true continuation minus its mean
/// similarity to random utterances from `pool`.
pub fn additivity_analysis(
    dialogs: &[Vec<UttId>],
    store: &EmbeddingStore,
    pool: &[UttId],
    cfg: &AdditivityConfig,
) -> Result<Vec<AdditivityRow>> {
    let n = cfg.context_len;
    if n == 0 || cfg.samples == 0 {
        return Err(Error::InvalidConfig("context length and samples must be positive"));
    }
    if cfg.mode == AdditivityMode::Triple && n < 2 {
        return Err(Error::InsufficientContext { turn: n, required: 2 });
    }
    let mut correct = vec![0.0; n];
    let mut random = vec![0.0; n];
    let mut contexts = 0usize;
    for (d, dialog) in dialogs.iter().enumerate() {
        if dialog.len() <= n {
            continue;
        }
        let truth = dialog[n];
        if !pool.iter().any(|&u| u != truth) {
            return Err(Error::PoolTooSmall);
        }
        let mut rng = stream_rng(cfg.seed, d as u64);
        let mut others = Vec::with_capacity(cfg.samples);
        while others.len() < cfg.samples {
            let u = pool[rng.random_range(0..pool.len())];
            if u != truth {
                others.push(store.vector(u, Tag::A, Parity::Even)?);
            }
        }
        let target = store.vector(truth, Tag::A, Parity::Even)?;
        let ctx = &dialog[..n];
        // per position: the vectors that stand for it
        let reps: Vec<Vec<Vector>> = match cfg.mode {
            AdditivityMode::Bi { tag } => resolved_history(store, tag, ctx, n + 1)?
                .into_iter()
                .map(|v| vec![v])
                .collect(),
            AdditivityMode::Triple => {
                let b1 = resolved_history(store, Tag::B1, ctx, n + 1)?;
                let b2 = resolved_history(store, Tag::B2, ctx, n + 1)?;
                (1..=n)
                    .map(|p| {
                        (1..=n)
                            .filter(|&q| q != p)
                            .map(|q| {
                                let (i, j) = if p < q { (p, q) } else { (q, p) };
                                mean_pool(&b1[i - 1], &b2[j - 1])
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<_>>()?
            }
        };
        for (p, vs) in reps.iter().enumerate() {
            let mut c = 0.0;
            let mut r = 0.0;
            for v in vs {
                c += cosine(v, &target)?;
                let mut s = 0.0;
                for o in &others {
                    s += cosine(v, o)?;
                }
                r += s / others.len() as f64;
            }
            correct[p] += c / vs.len() as f64;
            random[p] += r / vs.len() as f64;
        }
        contexts += 1;
    }
    if contexts == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok((0..n)
        .map(|p| {
            let c = correct[p] / contexts as f64;
            let r = random[p] / contexts as f64;
            AdditivityRow {
                position: p + 1,
                correct: c,
                random: r,
                gap: c - r,
                n_contexts: contexts,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::ToyEncoderParams;
    use alloc::format;
    use alloc::string::String;
    use proptest::{prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i}")).collect()
    }

    fn random_store(n: usize, d: usize, parity: bool, seed: u64) -> EmbeddingStore {
        ToyEncoderParams::init(vocab(n), d, &Tag::ALL, parity, seed)
            .unwrap()
            .to_store()
            .unwrap()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_true(&[0.9, 0.5, 0.7], 2).unwrap(), 2.0);
        assert_eq!(rank_true(&[0.5, 0.5, 0.3], 0).unwrap(), 1.5);
        assert!(matches!(rank_true(&[0.1], 1), Err(Error::IndexOutOfRange { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scores: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let best = (0..100).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        assert_eq!(rank_true(&scores, best).unwrap(), 1.0);
        // sort oracle
        for t in 0..100 {
            let mut sorted = scores.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let pos = sorted.iter().position(|&x| x == scores[t]).unwrap();
            assert_eq!(rank_true(&scores, t).unwrap(), pos as f64 + 1.0);
        }
    }

    proptest! {
        #[test]
        fn rank_is_invariant_under_monotone_transforms(
            scores in proptest::collection::vec(-5.0f64..5.0, 1..40),
            pick in 0usize..40,
            a in 0.1f64..10.0,
            b in -3.0f64..3.0,
        ) {
            let t = pick % scores.len();
            let r = rank_true(&scores, t).unwrap();
            let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
            let cubed: Vec<f64> = scores.iter().map(|s| s * s * s + s).collect();
            let exp: Vec<f64> = scores.iter().map(|s| libm::exp(*s)).collect();
            prop_assert_eq!(rank_true(&affine, t).unwrap(), r);
            prop_assert_eq!(rank_true(&cubed, t).unwrap(), r);
            prop_assert_eq!(rank_true(&exp, t).unwrap(), r);
            let res = RankingResult::new(r, scores.len(), 1);
            prop_assert!(res.rank >= 1.0 && res.rank <= scores.len() as f64);
            prop_assert!((0.0..=1.0).contains(&res.normalized_rank));
        }

        #[test]
        fn hits_monotone_in_k(ranks in proptest::collection::vec(1.0f64..101.0, 1..60)) {
            let mut prev = 0.0;
            for k in 1..=101 {
                let h = hits_at(&ranks, k);
                prop_assert!(h >= prev);
                prev = h;
            }
            prop_assert_eq!(hits_at(&ranks, 101), 1.0);
        }
    }

    #[test]
    fn single_dialog_ranks_first_everywhere() {
        let store = random_store(5, 4, true, 1);
        let dialogs = vec![vec![0, 1, 2, 3, 4]];
        for scorer in [SeqScorer::TripleAvg, SeqScorer::Bi { tag: Tag::B }, SeqScorer::MaxSim] {
            let r = eval_sequence_modeling(&dialogs, &store, &SeqEvalConfig::new(scorer)).unwrap();
            assert!(r.items.iter().all(|i| i.ranking.rank == 1.0 && i.ranking.pool_size == 1));
            assert_eq!(r.per_depth.len(), 3);
        }
        assert_eq!(
            eval_sequence_modeling(&[], &store, &SeqEvalConfig::new(SeqScorer::TripleAvg)),
            Err(Error::EmptyCorpus)
        );
    }

    #[test]
    fn incremental_and_from_scratch_paths_agree() {
        let store = random_store(12, 8, true, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dialogs: Vec<Vec<UttId>> = (0..10)
            .map(|_| (0..rng.random_range(3..9)).map(|_| rng.random_range(0..12)).collect())
            .collect();
        let inc = eval_sequence_modeling(&dialogs, &store, &SeqEvalConfig::new(SeqScorer::TripleAvg)).unwrap();
        let scratch = eval_sequence_modeling(
            &dialogs,
            &store,
            &SeqEvalConfig {
                max_distance: Some(100),
                ..SeqEvalConfig::new(SeqScorer::TripleAvg)
            },
        )
        .unwrap();
        assert_eq!(inc.items.len(), scratch.items.len());
        for (a, b) in inc.items.iter().zip(&scratch.items) {
            assert_eq!(a.ranking.depth, b.ranking.depth);
            assert_eq!(a.pairs_scored, b.pairs_scored);
            assert!((a.ranking.rank - b.ranking.rank).abs() <= 0.5);
        }
        let again = eval_sequence_modeling(&dialogs, &store, &SeqEvalConfig::new(SeqScorer::TripleAvg)).unwrap();
        assert_eq!(inc, again);
    }

    #[test]
    fn last_row_counts_one_row_per_turn() {
        let store = random_store(9, 4, false, 5);
        let dialogs = vec![vec![0, 1, 2, 3, 4, 5], vec![6, 7, 8, 0]];
        let r = eval_sequence_modeling(&dialogs, &store, &SeqEvalConfig::new(SeqScorer::TripleLastL { l: 1 })).unwrap();
        for it in &r.items {
            assert_eq!(it.pairs_scored, it.ranking.depth - 1);
        }
    }

    #[test]
    fn pools_are_scorer_independent() {
        let store = random_store(10, 4, true, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dialogs: Vec<Vec<UttId>> = (0..8)
            .map(|_| (0..6).map(|_| rng.random_range(0..10)).collect())
            .collect();
        let sizes = |s| {
            eval_sequence_modeling(&dialogs, &store, &SeqEvalConfig::new(s))
                .unwrap()
                .items
                .iter()
                .map(|i| (i.dialog, i.ranking.depth, i.ranking.pool_size))
                .collect::<Vec<_>>()
        };
        let base = sizes(SeqScorer::TripleAvg);
        for c in ComponentScorer::ALL {
            assert_eq!(sizes(SeqScorer::Component(c)), base, "{}", c.as_str());
        }
        assert_eq!(sizes(SeqScorer::MaxSim), base);
        assert_eq!(sizes(SeqScorer::Bi { tag: Tag::B2 }), base);
    }

    #[test]
    fn component_scorers_match_direct_formulas() {
        let store = random_store(6, 5, false, 8);
        let ctx = [0usize, 1, 2, 3];
        let cands = candidate_set(&store, &[4, 5]).unwrap();
        let v = |u, t| store.vector(u, t, Parity::Even).unwrap();
        for (ci, &c) in [4usize, 5].iter().enumerate() {
            let a = v(c, Tag::A);
            let cos = |x: &Vector| cosine(x, &a).unwrap();
            let mix = |t1, t2, i: usize, j: usize| cos(&mean_pool(&v(ctx[i], t1), &v(ctx[j], t2)).unwrap());
            let mut tri = 0.0;
            let mut b2b2 = 0.0;
            let mut b1b1 = 0.0;
            for j in 1..4 {
                for i in 0..j {
                    tri += mix(Tag::B1, Tag::B2, i, j);
                    b2b2 += mix(Tag::B2, Tag::B2, i, j);
                    b1b1 += mix(Tag::B1, Tag::B1, i, j);
                }
            }
            let bi2: f64 = ctx.iter().map(|&u| cos(&v(u, Tag::B2))).sum();
            let bi1: f64 = ctx.iter().map(|&u| cos(&v(u, Tag::B1))).sum();
            let nb: f64 = (0..3).map(|i| mix(Tag::B1, Tag::B2, i, i + 1)).sum();
            let want = [
                (ComponentScorer::Triple, tri),
                (ComponentScorer::TriplePlusBiB2, tri + bi2),
                (ComponentScorer::DirectNeighbors, nb),
                (ComponentScorer::BiB1PlusBiB2, bi1 + bi2),
                (ComponentScorer::MeanB2Only, b2b2),
                (ComponentScorer::BiB2, bi2),
                (ComponentScorer::MeanB1Only, b1b1),
            ];
            for (comp, w) in want {
                let (s, _) = score_context(&store, &ctx, &cands, SeqScorer::Component(comp), None).unwrap();
                assert!((s[ci] - w).abs() < 1e-6, "{}", comp.as_str());
            }
        }
        assert_eq!(ComponentScorer::parse("mean-b1-only"), Some(ComponentScorer::MeanB1Only));
    }

    #[test]
    fn max_distance_drops_far_context() {
        let store = random_store(6, 5, false, 2);
        let ctx = [0usize, 1, 2, 3];
        let cands = candidate_set(&store, &[4, 5]).unwrap();
        // candidate position 5; distance <= 2 keeps only positions 3 and 4
        let (_, n) = score_context(&store, &ctx, &cands, SeqScorer::TripleAvg, Some(2)).unwrap();
        assert_eq!(n, 1);
        let (_, n) = score_context(&store, &ctx, &cands, SeqScorer::Bi { tag: Tag::B }, Some(2)).unwrap();
        assert_eq!(n, 2);
    }

    fn planning_store() -> EmbeddingStore {
        // row 0 goal, row 1 true candidate (collinear), rows 2.. orthogonal distractors
        let n = 6;
        let mut s = EmbeddingStore::new(3, vocab(n)).unwrap();
        let mut data = Vec::new();
        for u in 0..n {
            data.extend_from_slice(match u {
                0 | 1 => &[1.0f32, 0.0, 0.0],
                _ => &[0.0, 1.0, 0.0],
            });
        }
        for tag in Tag::ALL {
            s.insert_table(SubspaceKey::new(tag, None), Matrix::from_flat(n, 3, data.clone()).unwrap())
                .unwrap();
        }
        s
    }

    #[test]
    fn planning_ranks_collinear_candidate_first() {
        let store = planning_store();
        // history u2 u3, true u1, goal u0 one turn later
        let dialogs = vec![vec![2, 3, 1, 0], vec![2, 1]];
        let cfg = PlanningConfig {
            history_len: 2,
            goal_distance: 1,
            planner: Planner::Bi,
            distractors: 100,
            seed: 0,
        };
        let r = eval_planning(&dialogs, &store, &[2, 3, 4, 5], &cfg, None).unwrap();
        assert_eq!(r.hits[0], (5, 1.0));
        assert_eq!(r.skipped, 1);
        let t = PlanningConfig { planner: Planner::Triple, ..cfg.clone() };
        assert_eq!(eval_planning(&dialogs, &store, &[2, 3, 4, 5], &t, None).unwrap().hits[0], (5, 1.0));
        let mut provided = BTreeMap::new();
        provided.insert(0, vec![2, 3]);
        let p = eval_planning(&dialogs, &store, &[], &cfg, Some(&provided)).unwrap();
        assert_eq!(p.ranks, vec![1.0]);
    }

    #[test]
    fn random_hits_at_ten_is_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ranks: Vec<f64> = (0..4000)
            .map(|_| {
                let s: Vec<f64> = (0..101).map(|_| rng.random::<f64>()).collect();
                rank_true(&s, 0).unwrap()
            })
            .collect();
        assert!((hits_at(&ranks, 10) - 10.0 / 101.0).abs() < 0.05);
    }

    #[test]
    fn identical_vectors_give_zero_gap() {
        let n = 5;
        let mut s = EmbeddingStore::new(2, vocab(n)).unwrap();
        for tag in Tag::ALL {
            s.insert_table(SubspaceKey::new(tag, None), Matrix::from_flat(n, 2, vec![0.3, 0.7].repeat(n)).unwrap())
                .unwrap();
        }
        let dialogs = vec![vec![0, 1, 2, 3], vec![1, 2, 3, 4]];
        for mode in [AdditivityMode::Triple, AdditivityMode::Bi { tag: Tag::B2 }] {
            let cfg = AdditivityConfig { context_len: 3, mode, samples: 5, seed: 1 };
            let rows = additivity_analysis(&dialogs, &s, &[0, 1, 2, 3, 4], &cfg).unwrap();
            assert_eq!(rows.len(), 3);
            assert!(rows.iter().all(|r| r.gap.abs() < 1e-9 && r.n_contexts == 2));
        }
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test(5, 5) - 1.0).abs() < 1e-12);
        // 10 of 10: 2 / 1024
        assert!((sign_test(10, 0) - 2.0 / 1024.0).abs() < 1e-12);
        assert!(sign_test(300, 200) < 0.001);
    }

    #[test]
    fn disambiguation_counts_ties_as_half() {
        let store = planning_store();
        // candidates 2 and 3 share a vector: always a tie
        let items = vec![DisambiguationItem { context: vec![0, 1], truth: 2, alternative: 3 }];
        let r = eval_disambiguation(&store, &items, SeqScorer::TripleAvg).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.ties, 1);
    }
}
