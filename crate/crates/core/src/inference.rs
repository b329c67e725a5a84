//! Candidate scoring for a dialog context.
//!
//! The triple-encoder score of a candidate is the sum of its cosines with the
//! mean of every ordered context pair `([B1] u_i, [B2] u_j)`, `i < j`. When a
//! new utterance arrives only the row of pairs ending in it is new, so
//! [`DialogState`] materialises `turn - 1` pairs per push and adds their
//! scores to a running per-candidate total.
//!
//! Positions are 1-based. Histories passed to the free functions are already
//! resolved for the candidate position `n + 1` (parity variants chosen).

use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::Parity;
use crate::error::{Error, Result};
use crate::geometry::{
    batch_pair_candidate_scores, cosine, cosine_slices, mean_pool, mean_pool_slices, Matrix,
    ScoreMatrix, Vector,
};

/// A before-space encoding, optionally split by speaker parity.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoded {
    Plain(Vector),
    ByParity { even: Vector, odd: Vector },
}

impl Encoded {
    pub fn get(&self, parity: Parity) -> &Vector {
        match self {
            Encoded::Plain(v) => v,
            Encoded::ByParity { even, .. } if parity == Parity::Even => even,
            Encoded::ByParity { odd, .. } => odd,
        }
    }

    pub fn dim(&self) -> usize {
        self.get(Parity::Even).dim()
    }
}

impl From<Vector> for Encoded {
    fn from(v: Vector) -> Self {
        Encoded::Plain(v)
    }
}

/// After-space candidate vectors with caller-defined labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    matrix: Matrix,
    labels: Vec<usize>,
}

impl CandidateSet {
    pub fn new(matrix: Matrix, labels: Vec<usize>) -> Result<Self> {
        if matrix.rows() != labels.len() {
            return Err(Error::DimMismatch {
                expected: matrix.rows(),
                found: labels.len(),
            });
        }
        Ok(Self { matrix, labels })
    }

    /// Labels default to `0..vectors.len()`.
    pub fn from_vectors(vectors: &[Vector]) -> Result<Self> {
        let dim = vectors.first().ok_or(Error::EmptyState)?.dim();
        let matrix = Matrix::from_rows(dim, vectors)?;
        Self::new(matrix, (0..vectors.len()).collect())
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

/// Scoring procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Bi,
    TripleAvg,
    /// Only pairs whose later member is among the last `l` turns.
    TripleLastL { l: usize },
    MaxSim,
}

impl Variant {
    /// Minimum context length the variant can score.
    pub fn min_context(self) -> usize {
        match self {
            Variant::Bi => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScorerConfig {
    pub variant: Variant,
    pub parity_enabled: bool,
}

impl ScorerConfig {
    pub fn new(variant: Variant, parity_enabled: bool) -> Result<Self> {
        if let Variant::TripleLastL { l: 0 } = variant {
            return Err(Error::InvalidConfig("l must be at least 1"));
        }
        Ok(Self {
            variant,
            parity_enabled,
        })
    }
}

/// Parity tag of position `pos` as seen from a future position with parity `future`.
#[inline]
fn tag_parity(future: usize, pos: usize) -> Parity {
    Parity::of_distance((future + pos) % 2)
}

/// Incremental triangular pair state for one ongoing dialog.
///
/// With parity enabled the distance parity of every context utterance flips
/// each turn, so the state keeps one accumulator per parity of the next
/// candidate position; scoring reads the one matching `turn + 1`.
#[derive(Debug, Clone)]
pub struct DialogState {
    n_candidates: usize,
    parity: bool,
    dim: Option<usize>,
    b1_history: Vec<Encoded>,
    b2_history: Vec<Encoded>,
    /// `rows[j - 1][q]`: per-candidate sum over `i < j` for future parity `q`.
    rows: Vec<Vec<Vec<f64>>>,
    accumulated: Vec<Vec<f64>>,
    pair_index: Vec<(usize, usize)>,
    last_new_pairs: usize,
}

impl DialogState {
    pub fn new(candidates: &CandidateSet, parity: bool) -> Self {
        let n_variants = if parity { 2 } else { 1 };
        Self {
            n_candidates: candidates.len(),
            parity,
            dim: None,
            b1_history: Vec::new(),
            b2_history: Vec::new(),
            rows: Vec::new(),
            accumulated: vec![vec![0.0; candidates.len()]; n_variants],
            pair_index: Vec::new(),
            last_new_pairs: 0,
        }
    }

    fn n_variants(&self) -> usize {
        self.accumulated.len()
    }

    /// Number of utterances with a `[B2]` encoding.
    pub fn turn(&self) -> usize {
        self.b2_history.len()
    }

    pub fn pair_index(&self) -> &[(usize, usize)] {
        &self.pair_index
    }

    /// Pairs materialised by the most recent push.
    pub fn last_new_pairs(&self) -> usize {
        self.last_new_pairs
    }

    pub fn total_pairs(&self) -> usize {
        self.pair_index.len()
    }

    pub fn has_pending_b1(&self) -> bool {
        self.b1_history.len() < self.b2_history.len()
    }

    fn check_dim(&mut self, dim: usize) -> Result<()> {
        match self.dim {
            Some(d) if d != dim => Err(Error::DimMismatch {
                expected: d,
                found: dim,
            }),
            _ => {
                self.dim = Some(dim);
                Ok(())
            }
        }
    }

    /// First phase of a turn: scores the new row of pairs
    /// `([B1] u_i, [B2] u_t)` for all `i < t` and adds it to the totals.
    pub fn push_b2(&mut self, b2: Encoded, candidates: &CandidateSet) -> Result<()> {
        if self.has_pending_b1() {
            return Err(Error::PendingB1);
        }
        if candidates.len() != self.n_candidates {
            return Err(Error::CandidateCountMismatch {
                expected: self.n_candidates,
                found: candidates.len(),
            });
        }
        self.check_dim(b2.dim())?;
        if candidates.dim() != b2.dim() {
            return Err(Error::DimMismatch {
                expected: b2.dim(),
                found: candidates.dim(),
            });
        }
        let t = self.b2_history.len() + 1;
        let mut row = vec![vec![0.0; self.n_candidates]; self.n_variants()];
        if t > 1 {
            for (q, row_q) in row.iter_mut().enumerate() {
                let future = if self.parity { q } else { 0 };
                let new = b2.get(tag_parity(future, t)).as_slice();
                let mut data = Vec::with_capacity((t - 1) * new.len());
                for (idx, b1) in self.b1_history.iter().enumerate() {
                    data.extend(mean_pool_slices(b1.get(tag_parity(future, idx + 1)).as_slice(), new));
                }
                let pairs = Matrix::from_flat(t - 1, new.len(), data)?;
                let scores = batch_pair_candidate_scores(&pairs, candidates.matrix())?;
                for p in 0..scores.rows() {
                    for (acc, s) in row_q.iter_mut().zip(scores.row(p)) {
                        *acc += s;
                    }
                }
            }
        }
        for (acc, r) in self.accumulated.iter_mut().zip(&row) {
            for (a, s) in acc.iter_mut().zip(r) {
                *a += s;
            }
        }
        self.pair_index.extend((1..t).map(|i| (i, t)));
        self.last_new_pairs = t - 1;
        self.rows.push(row);
        self.b2_history.push(b2);
        Ok(())
    }

    /// Second phase of a turn: stores the `[B1]` encoding of the newest
    /// utterance, needed only from the next turn on.
    pub fn finalize_b1(&mut self, b1: Encoded) -> Result<()> {
        if !self.has_pending_b1() {
            return Err(Error::NothingToFinalize);
        }
        self.check_dim(b1.dim())?;
        self.b1_history.push(b1);
        Ok(())
    }

    pub fn push_utterance(&mut self, b1: Encoded, b2: Encoded, candidates: &CandidateSet) -> Result<()> {
        self.push_b2(b2, candidates)?;
        self.finalize_b1(b1)
    }

    fn current_variant(&self) -> usize {
        if self.parity {
            (self.turn() + 1) % 2
        } else {
            0
        }
    }

    fn require(&self, required: usize) -> Result<()> {
        if self.turn() < required {
            return Err(Error::InsufficientContext {
                turn: self.turn(),
                required,
            });
        }
        Ok(())
    }

    /// Sum over the full triangle of pair-candidate cosines.
    pub fn score_triple_avg(&self) -> Result<&[f64]> {
        self.require(2)?;
        Ok(&self.accumulated[self.current_variant()])
    }

    /// Sum over the last `l` rows of the triangle.
    pub fn score_triple_last_l(&self, l: usize) -> Result<Vec<f64>> {
        if l == 0 {
            return Err(Error::InvalidConfig("l must be at least 1"));
        }
        self.require(2)?;
        let q = self.current_variant();
        let n = self.turn();
        let first = n - l.min(n - 1);
        let mut out = vec![0.0; self.n_candidates];
        for row in &self.rows[first..] {
            for (o, s) in out.iter_mut().zip(&row[q]) {
                *o += s;
            }
        }
        Ok(out)
    }

    /// `[B1]` history resolved for the next candidate position.
    pub fn b1_resolved(&self) -> Vec<Vector> {
        let q = self.current_variant();
        self.b1_history
            .iter()
            .enumerate()
            .map(|(idx, e)| e.get(tag_parity(q, idx + 1)).clone())
            .collect()
    }

    /// `[B2]` history resolved for the next candidate position.
    pub fn b2_resolved(&self) -> Vec<Vector> {
        let q = self.current_variant();
        self.b2_history
            .iter()
            .enumerate()
            .map(|(idx, e)| e.get(tag_parity(q, idx + 1)).clone())
            .collect()
    }
}

fn check_histories(b1: &[Vector], b2: &[Vector], candidates: &CandidateSet) -> Result<usize> {
    let n = b2.len();
    if n < 2 {
        return Err(Error::InsufficientContext { turn: n, required: 2 });
    }
    if b1.len() + 1 < n {
        return Err(Error::DimMismatch {
            expected: n - 1,
            found: b1.len(),
        });
    }
    for v in b1.iter().chain(b2) {
        if v.dim() != candidates.dim() {
            return Err(Error::DimMismatch {
                expected: candidates.dim(),
                found: v.dim(),
            });
        }
    }
    Ok(n)
}

/// Row-by-row triangle sum over the pairs accepted by `keep(i, j)`.
/// Returns the per-candidate scores and the number of pairs scored.
pub fn triangle_sum<F>(
    b1: &[Vector],
    b2: &[Vector],
    candidates: &CandidateSet,
    mut keep: F,
) -> Result<(Vec<f64>, usize)>
where
    F: FnMut(usize, usize) -> bool,
{
    let n = check_histories(b1, b2, candidates)?;
    let mut total = vec![0.0; candidates.len()];
    let mut count = 0;
    for j in 2..=n {
        let mut data = Vec::new();
        let mut rows = 0;
        for i in 1..j {
            if keep(i, j) {
                data.extend(mean_pool_slices(b1[i - 1].as_slice(), b2[j - 1].as_slice()));
                rows += 1;
            }
        }
        let mut row_sum = vec![0.0; candidates.len()];
        if rows > 0 {
            let pairs = Matrix::from_flat(rows, candidates.dim(), data)?;
            let scores = batch_pair_candidate_scores(&pairs, candidates.matrix())?;
            for p in 0..rows {
                for (acc, s) in row_sum.iter_mut().zip(scores.row(p)) {
                    *acc += s;
                }
            }
        }
        for (t, s) in total.iter_mut().zip(&row_sum) {
            *t += s;
        }
        count += rows;
    }
    Ok((total, count))
}

/// From-scratch full-triangle score.
pub fn score_triple_full(b1: &[Vector], b2: &[Vector], candidates: &CandidateSet) -> Result<Vec<f64>> {
    triangle_sum(b1, b2, candidates, |_, _| true).map(|(s, _)| s)
}

/// Pairs `(i, j)` with `j` among the last `min(l, n - 1)` turns and `i < j`.
pub fn score_triple_last_l(
    b1: &[Vector],
    b2: &[Vector],
    l: usize,
    candidates: &CandidateSet,
) -> Result<Vec<f64>> {
    if l == 0 {
        return Err(Error::InvalidConfig("l must be at least 1"));
    }
    let n = b2.len();
    triangle_sum(b1, b2, candidates, |_, j| j + l > n).map(|(s, _)| s)
}

/// Sum of context-candidate cosines.
pub fn score_bi(history: &[Vector], candidates: &CandidateSet) -> Result<Vec<f64>> {
    if history.is_empty() {
        return Err(Error::InsufficientContext { turn: 0, required: 1 });
    }
    let dim = candidates.dim();
    let ctx = Matrix::from_rows(dim, history)?;
    let scores = batch_pair_candidate_scores(&ctx, candidates.matrix())?;
    let mut out = vec![0.0; candidates.len()];
    for r in 0..scores.rows() {
        for (o, s) in out.iter_mut().zip(scores.row(r)) {
            *o += s;
        }
    }
    Ok(out)
}

/// Pair-by-candidate cosine table over the accepted pairs, with the
/// 1-based `(i, j)` of each row.
pub fn pair_scores<F>(
    b1: &[Vector],
    b2: &[Vector],
    candidates: &CandidateSet,
    mut keep: F,
) -> Result<(ScoreMatrix, Vec<(usize, usize)>)>
where
    F: FnMut(usize, usize) -> bool,
{
    let n = check_histories(b1, b2, candidates)?;
    let mut data = Vec::new();
    let mut index = Vec::new();
    for j in 2..=n {
        for i in 1..j {
            if keep(i, j) {
                data.extend(mean_pool_slices(b1[i - 1].as_slice(), b2[j - 1].as_slice()));
                index.push((i, j));
            }
        }
    }
    if index.is_empty() {
        return Err(Error::EmptyState);
    }
    let pairs = Matrix::from_flat(index.len(), candidates.dim(), data)?;
    Ok((batch_pair_candidate_scores(&pairs, candidates.matrix())?, index))
}

/// Greedy coverage aggregation for one candidate: visit pairs by descending
/// score (ties by pair order), admit a pair when either member is still
/// unused, mark both members used. Returns the mean admitted score and the
/// number admitted.
pub fn maxsim_column(scores: &[f64], pair_index: &[(usize, usize)]) -> Result<(f64, usize)> {
    if scores.is_empty() {
        return Err(Error::EmptyState);
    }
    if scores.len() != pair_index.len() {
        return Err(Error::DimMismatch {
            expected: pair_index.len(),
            found: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let max_id = pair_index.iter().map(|&(i, j)| i.max(j)).max().unwrap_or(0);
    let mut used = vec![false; max_id + 1];
    let mut sum = 0.0;
    let mut admitted = 0;
    for p in order {
        let (i, j) = pair_index[p];
        if !used[i] || !used[j] {
            sum += scores[p];
            admitted += 1;
            used[i] = true;
            used[j] = true;
        }
    }
    Ok((sum / admitted as f64, admitted))
}

/// MaxSim aggregation for every candidate column of `pair_scores`.
pub fn score_maxsim(pair_scores: &ScoreMatrix, pair_index: &[(usize, usize)]) -> Result<Vec<f64>> {
    if pair_scores.rows() == 0 {
        return Err(Error::EmptyState);
    }
    (0..pair_scores.cols())
        .map(|c| maxsim_column(&pair_scores.column(c), pair_index).map(|(s, _)| s))
        .collect()
}

/// Bi-encoder planning score: `cos([B] c, [A] g)`.
pub fn score_planning_bi(candidate_b: &Vector, goal_a: &Vector) -> Result<f64> {
    cosine(candidate_b, goal_a)
}

/// Contextualised planning score:
/// `cos([B2] c, [A] g) + (1/n) * sum_i cos(mean([B1] u_i, [B2] c), [A] g)`.
pub fn score_planning_triple(candidate_b2: &Vector, context_b1: &[Vector], goal_a: &Vector) -> Result<f64> {
    if context_b1.is_empty() {
        return Err(Error::EmptyContext);
    }
    let own = cosine(candidate_b2, goal_a)?;
    let mut mixed = 0.0;
    for u in context_b1 {
        mixed += cosine(&mean_pool(u, candidate_b2)?, goal_a)?;
    }
    Ok(own + mixed / context_b1.len() as f64)
}

/// Cosine of every history vector against one after-space vector.
pub fn cosines_to(history: &[Vector], target: &Vector) -> Result<Vec<f64>> {
    history
        .iter()
        .map(|h| cosine_slices(h.as_slice(), target.as_slice()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(values: &[f32]) -> Vector {
        Vector::new(values.to_vec()).unwrap()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vector {
        v(&(0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect::<Vec<_>>())
    }

    /// Scalar double-loop oracle over resolved histories.
    fn brute_triangle(b1: &[Vector], b2: &[Vector], cands: &[Vector], keep: impl Fn(usize, usize) -> bool) -> Vec<f64> {
        cands
            .iter()
            .map(|c| {
                let mut s = 0.0;
                for j in 2..=b2.len() {
                    for i in 1..j {
                        if keep(i, j) {
                            let m = mean_pool(&b1[i - 1], &b2[j - 1]).unwrap();
                            s += cosine(&m, c).unwrap();
                        }
                    }
                }
                s
            })
            .collect()
    }

    #[test]
    fn pair_growth_follows_triangle() {
        let cands = CandidateSet::from_vectors(&[v(&[1.0, 0.0])]).unwrap();
        let mut st = DialogState::new(&cands, false);
        let mut growth = Vec::new();
        for _ in 0..5 {
            st.push_utterance(v(&[1.0, 1.0]).into(), v(&[0.5, 1.0]).into(), &cands).unwrap();
            growth.push(st.last_new_pairs());
        }
        assert_eq!(growth, vec![0, 1, 2, 3, 4]);
        assert_eq!(st.total_pairs(), 10);
        assert_eq!(st.pair_index()[..3], [(1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn triple_avg_examples() {
        let e = v(&[1.0, 0.0, 0.0]);
        let cands = CandidateSet::from_vectors(&[e.clone()]).unwrap();
        let mut st = DialogState::new(&cands, false);
        st.push_utterance(e.clone().into(), e.clone().into(), &cands).unwrap();
        assert_eq!(
            st.score_triple_avg(),
            Err(Error::InsufficientContext { turn: 1, required: 2 })
        );
        st.push_utterance(e.clone().into(), e.clone().into(), &cands).unwrap();
        assert!((st.score_triple_avg().unwrap()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incremental_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &d in &[4usize, 16] {
            for &nc in &[1usize, 50] {
                let cands: Vec<Vector> = (0..nc).map(|_| rand_vec(&mut rng, d)).collect();
                let set = CandidateSet::from_vectors(&cands).unwrap();
                let mut st = DialogState::new(&set, false);
                let mut b1 = Vec::new();
                let mut b2 = Vec::new();
                for _ in 0..12 {
                    b1.push(rand_vec(&mut rng, d));
                    b2.push(rand_vec(&mut rng, d));
                    st.push_utterance(b1.last().unwrap().clone().into(), b2.last().unwrap().clone().into(), &set)
                        .unwrap();
                    if b2.len() >= 2 {
                        let oracle = brute_triangle(&b1, &b2, &cands, |_, _| true);
                        for (a, b) in st.score_triple_avg().unwrap().iter().zip(&oracle) {
                            assert!((a - b).abs() < 1e-6);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn parity_state_matches_resolved_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 6;
        let cands: Vec<Vector> = (0..7).map(|_| rand_vec(&mut rng, d)).collect();
        let set = CandidateSet::from_vectors(&cands).unwrap();
        let mut st = DialogState::new(&set, true);
        let mut raw1 = Vec::new();
        let mut raw2 = Vec::new();
        for t in 1..=9usize {
            let e1 = [rand_vec(&mut rng, d), rand_vec(&mut rng, d)];
            let e2 = [rand_vec(&mut rng, d), rand_vec(&mut rng, d)];
            raw1.push(e1.clone());
            raw2.push(e2.clone());
            st.push_utterance(
                Encoded::ByParity { even: e1[0].clone(), odd: e1[1].clone() },
                Encoded::ByParity { even: e2[0].clone(), odd: e2[1].clone() },
                &set,
            )
            .unwrap();
            if t >= 2 {
                // resolve against candidate position t + 1 by hand
                let pick = |e: &[Vector; 2], pos: usize| e[(t + 1 - pos) % 2].clone();
                let b1: Vec<Vector> = raw1.iter().enumerate().map(|(i, e)| pick(e, i + 1)).collect();
                let b2: Vec<Vector> = raw2.iter().enumerate().map(|(i, e)| pick(e, i + 1)).collect();
                assert_eq!(st.b1_resolved(), b1);
                let oracle = brute_triangle(&b1, &b2, &cands, |_, _| true);
                for (a, b) in st.score_triple_avg().unwrap().iter().zip(&oracle) {
                    assert!((a - b).abs() < 1e-6);
                }
                let last2 = brute_triangle(&b1, &b2, &cands, |_, j| j + 2 > t);
                for (a, b) in st.score_triple_last_l(2).unwrap().iter().zip(&last2) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn two_phase_push_matches_single_push() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cands: Vec<Vector> = (0..5).map(|_| rand_vec(&mut rng, 8)).collect();
        let set = CandidateSet::from_vectors(&cands).unwrap();
        let mut a = DialogState::new(&set, false);
        let mut b = DialogState::new(&set, false);
        for _ in 0..6 {
            let (x, y) = (rand_vec(&mut rng, 8), rand_vec(&mut rng, 8));
            a.push_utterance(x.clone().into(), y.clone().into(), &set).unwrap();
            b.push_b2(y.into(), &set).unwrap();
            assert_eq!(b.push_b2(rand_vec(&mut rng, 8).into(), &set), Err(Error::PendingB1));
            b.finalize_b1(x.into()).unwrap();
        }
        assert_eq!(a.score_triple_avg().unwrap(), b.score_triple_avg().unwrap());
        assert_eq!(b.finalize_b1(rand_vec(&mut rng, 8).into()), Err(Error::NothingToFinalize));
    }

    #[test]
    fn push_validates_shapes() {
        let set = CandidateSet::from_vectors(&[v(&[1.0, 0.0])]).unwrap();
        let other = CandidateSet::from_vectors(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let mut st = DialogState::new(&set, false);
        assert!(matches!(
            st.push_utterance(v(&[1.0]).into(), v(&[1.0]).into(), &set),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            st.push_utterance(v(&[1.0, 0.0]).into(), v(&[1.0, 0.0]).into(), &other),
            Err(Error::CandidateCountMismatch { .. })
        ));
    }

    #[test]
    fn last_l_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 5;
        let cands: Vec<Vector> = (0..4).map(|_| rand_vec(&mut rng, d)).collect();
        let set = CandidateSet::from_vectors(&cands).unwrap();
        let b1: Vec<Vector> = (0..6).map(|_| rand_vec(&mut rng, d)).collect();
        let b2: Vec<Vector> = (0..6).map(|_| rand_vec(&mut rng, d)).collect();

        // l >= n - 1 degenerates to the full triangle
        let full = score_triple_full(&b1[..5], &b2[..5], &set).unwrap();
        for l in [4, 5, 9] {
            let s = score_triple_last_l(&b1[..5], &b2[..5], l, &set).unwrap();
            for (a, b) in s.iter().zip(&full) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        // n = 5, l = 1: exactly the 4 pairs of the last row
        let (_, count) = triangle_sum(&b1[..5], &b2[..5], &set, |_, j| j + 1 > 5).unwrap();
        assert_eq!(count, 4);
        // n = 6, l = 2
        let s = score_triple_last_l(&b1, &b2, 2, &set).unwrap();
        let oracle = brute_triangle(&b1, &b2, &cands, |_, j| j >= 5);
        for (a, b) in s.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(matches!(
            score_triple_last_l(&b1[..1], &b2[..1], 1, &set),
            Err(Error::InsufficientContext { .. })
        ));
    }

    #[test]
    fn bi_examples() {
        let e = [v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0]), v(&[0.0, 0.0, 1.0])];
        let set = CandidateSet::from_vectors(&[e[0].clone()]).unwrap();
        assert!((score_bi(&e[..1], &set).unwrap()[0] - 1.0).abs() < 1e-12);
        assert!((score_bi(&e, &set).unwrap()[0] - 1.0).abs() < 1e-12);
        assert!(matches!(score_bi(&[], &set), Err(Error::InsufficientContext { .. })));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let hist: Vec<Vector> = (0..4).map(|_| rand_vec(&mut rng, 8)).collect();
            let cands: Vec<Vector> = (0..6).map(|_| rand_vec(&mut rng, 8)).collect();
            let s = score_bi(&hist, &CandidateSet::from_vectors(&cands).unwrap()).unwrap();
            for (c, got) in cands.iter().zip(&s) {
                let want: f64 = hist.iter().map(|h| cosine(h, c).unwrap()).sum();
                assert!((got - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn maxsim_examples() {
        let idx = [(1, 2), (1, 3), (2, 3)];
        let (s, admitted) = maxsim_column(&[0.9, 0.8, 0.4], &idx).unwrap();
        assert!((s - 0.85).abs() < 1e-12);
        assert_eq!(admitted, 2);
        assert_eq!(maxsim_column(&[0.3], &[(1, 2)]).unwrap(), (0.3, 1));
        let (s, _) = maxsim_column(&[0.5; 3], &idx).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        assert_eq!(maxsim_column(&[], &[]), Err(Error::EmptyState));
    }

    #[test]
    fn planning_examples() {
        let e1 = v(&[1.0, 0.0]);
        let e2 = v(&[0.0, 1.0]);
        let s = score_planning_triple(&e1, &[e2.clone()], &e1).unwrap();
        assert!((s - (1.0 + core::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-6);
        let z = v(&[0.0, 0.0, 1.0]);
        let x = v(&[1.0, 0.0, 0.0]);
        let y = v(&[0.0, 1.0, 0.0]);
        assert!(score_planning_triple(&x, &[y.clone()], &z).unwrap().abs() < 1e-12);
        assert_eq!(score_planning_triple(&x, &[], &z), Err(Error::EmptyContext));
        assert!((score_planning_bi(&v(&[1.0, 2.0]), &v(&[2.0, 1.0])).unwrap() - 0.8).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = rand_vec(&mut rng, 6);
        let g = rand_vec(&mut rng, 6);
        let ctx: Vec<Vector> = (0..3).map(|_| rand_vec(&mut rng, 6)).collect();
        let mut oracle = cosine(&c, &g).unwrap();
        let mut mix = 0.0;
        for u in &ctx {
            let m: Vec<f32> = u.as_slice().iter().zip(c.as_slice()).map(|(a, b)| (a + b) / 2.0).collect();
            mix += cosine(&v(&m), &g).unwrap();
        }
        oracle += mix / 3.0;
        assert!((score_planning_triple(&c, &ctx, &g).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn scorer_config_rejects_zero_l() {
        assert!(ScorerConfig::new(Variant::TripleLastL { l: 0 }, true).is_err());
        assert!(ScorerConfig::new(Variant::TripleLastL { l: 2 }, true).is_ok());
    }
}
