//! Curved similarity targets and training example generation.
//!
//! Turn indices are 1-based positions within a dialog. A bi-encoder pair
//! `(i, k)` targets `1 - (k - i) / w`; a context pair `(i, j)` against `k`
//! targets the min-max normalised sum of its two bi-encoder targets.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::corpus::UttId;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Training window and sampling seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub w: usize,
    pub rng_seed: u64,
}

impl WindowConfig {
    pub fn new(w: usize, rng_seed: u64) -> Result<Self> {
        if w < 3 {
            return Err(Error::InvalidWindow(w));
        }
        Ok(Self { w, rng_seed })
    }
}

/// How positive targets are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetMode {
    /// Linearly decaying curved targets.
    #[default]
    Curved,
    /// Every positive targets 1.0 (no curvature).
    HardPositive,
}

impl TargetMode {
    pub fn apply(self, curved: f64) -> f64 {
        match self {
            TargetMode::Curved => curved,
            TargetMode::HardPositive => 1.0,
        }
    }
}

fn check_window(i: usize, k: usize, w: usize) -> Result<()> {
    let distance = k as i64 - i as i64;
    if distance <= 0 || distance >= w as i64 {
        return Err(Error::OutOfWindow { distance, w });
    }
    Ok(())
}

/// `1 - (k - i) / w` for `0 < k - i < w`.
pub fn ccl_target(i: usize, k: usize, w: usize) -> Result<f64> {
    check_window(i, k, w)?;
    Ok(1.0 - (k - i) as f64 / w as f64)
}

/// Unnormalised pair target `2 - (2k - (i + j)) / w`.
pub fn c3l_raw(i: usize, j: usize, k: usize, w: usize) -> Result<f64> {
    if !(i < j && j < k) {
        return Err(Error::OrderViolation { i, j, k });
    }
    check_window(i, k, w)?;
    Ok(2.0 - (2 * k - (i + j)) as f64 / w as f64)
}

/// Linear map of `[1/w, 2 - 3/w]` onto `[1/w, 1]`.
pub fn c3l_normalize(raw: f64, w: usize) -> f64 {
    let w = w as f64;
    let lo = 1.0 / w;
    let hi = 2.0 - 3.0 / w;
    lo + (raw - lo) * (1.0 - lo) / (hi - lo)
}

/// Curved target for the mean of `[B1] u_i` and `[B2] u_j` against `[A] u_k`.
pub fn c3l_target(i: usize, j: usize, k: usize, w: usize) -> Result<f64> {
    Ok(c3l_normalize(c3l_raw(i, j, k, w)?, w))
}

/// Role of a bi-encoder pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Positive,
    /// `[B] u_i` against a random `[A] u_r`.
    Random { after: UttId },
    /// `[B] u_k` against `[A] u_i` (time reversed).
    Directional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairExample {
    pub i: usize,
    pub k: usize,
    pub target: f64,
    pub kind: PairKind,
}

impl PairExample {
    pub fn is_negative(&self) -> bool {
        self.kind != PairKind::Positive
    }

    /// `i<TAB>-<TAB>k<TAB>target<TAB>pattern`
    pub fn to_line(&self) -> String {
        let pattern = match self.kind {
            PairKind::Positive => "pos",
            PairKind::Random { .. } => "rand",
            PairKind::Directional => "dir",
        };
        format!("{}\t-\t{}\t{}\t{}", self.i, self.k, self.target, pattern)
    }
}

/// Which context slots of a triple were replaced by random utterances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegPattern {
    Positive,
    /// `(u_i, u_r)`
    SecondReplaced,
    /// `(u_r, u_j)`
    FirstReplaced,
    /// `(u_r, u_r')`
    BothReplaced,
}

impl NegPattern {
    pub fn as_str(self) -> &'static str {
        match self {
            NegPattern::Positive => "pos",
            NegPattern::SecondReplaced => "i-r",
            NegPattern::FirstReplaced => "r-j",
            NegPattern::BothReplaced => "r-r",
        }
    }
}

impl fmt::Display for NegPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletExample {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub subst_i: Option<UttId>,
    pub subst_j: Option<UttId>,
    pub target: f64,
}

impl TripletExample {
    pub fn is_negative(&self) -> bool {
        self.subst_i.is_some() || self.subst_j.is_some()
    }

    pub fn pattern(&self) -> NegPattern {
        match (self.subst_i, self.subst_j) {
            (None, None) => NegPattern::Positive,
            (None, Some(_)) => NegPattern::SecondReplaced,
            (Some(_), None) => NegPattern::FirstReplaced,
            (Some(_), Some(_)) => NegPattern::BothReplaced,
        }
    }

    /// `i<TAB>j<TAB>k<TAB>target<TAB>pattern`
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.i,
            self.j,
            self.k,
            self.target,
            self.pattern()
        )
    }
}

/// All `(i, j, k)` with `1 <= i < j < k <= n` and `k - i < w`, in
/// lexicographic order.
pub fn gen_positive_triples(n: usize, cfg: &WindowConfig) -> Vec<TripletExample> {
    let mut out = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            for k in j + 1..=n {
                if k - i >= cfg.w {
                    break;
                }
                let target = c3l_target(i, j, k, cfg.w).expect("indices satisfy the window");
                out.push(TripletExample {
                    i,
                    j,
                    k,
                    subst_i: None,
                    subst_j: None,
                    target,
                });
            }
        }
    }
    out
}

fn check_pool(pool: &[UttId]) -> Result<()> {
    let first = pool.first().ok_or(Error::PoolTooSmall)?;
    if pool.iter().all(|u| u == first) {
        return Err(Error::PoolTooSmall);
    }
    Ok(())
}

fn draw_other<R: Rng>(rng: &mut R, pool: &[UttId], avoid: UttId) -> UttId {
    loop {
        let u = pool[rng.random_range(0..pool.len())];
        if u != avoid {
            return u;
        }
    }
}

fn utterance_at(dialog: &[UttId], pos: usize) -> Result<UttId> {
    pos.checked_sub(1)
        .and_then(|p| dialog.get(p))
        .copied()
        .ok_or(Error::IndexOutOfRange {
            index: pos,
            len: dialog.len(),
        })
}

/// Three co-occurrence negatives per positive: `(u_i, u_r)`, `(u_r, u_j)` and
/// `(u_r, u_r')`, all with target 0. Each sampled utterance differs from the
/// one it replaces. Sampling uses the stream `(cfg.rng_seed, dialog_index)`.
pub fn gen_hard_negatives(
    dialog: &[UttId],
    dialog_index: u64,
    positives: &[TripletExample],
    pool: &[UttId],
    cfg: &WindowConfig,
) -> Result<Vec<TripletExample>> {
    if positives.is_empty() {
        return Ok(Vec::new());
    }
    check_pool(pool)?;
    let mut rng = stream_rng(cfg.rng_seed, dialog_index);
    let mut out = Vec::with_capacity(positives.len() * 3);
    for p in positives {
        let ui = utterance_at(dialog, p.i)?;
        let uj = utterance_at(dialog, p.j)?;
        let neg = |subst_i, subst_j| TripletExample {
            subst_i,
            subst_j,
            target: 0.0,
            ..*p
        };
        out.push(neg(None, Some(draw_other(&mut rng, pool, uj))));
        out.push(neg(Some(draw_other(&mut rng, pool, ui)), None));
        let r = draw_other(&mut rng, pool, ui);
        let r2 = draw_other(&mut rng, pool, uj);
        out.push(neg(Some(r), Some(r2)));
    }
    Ok(out)
}

/// In-window bi-encoder positives `(i, k)` with `0 < k - i < w`, each followed
/// by one random negative (after utterance replaced) and one directional
/// negative (roles swapped).
pub fn gen_bi_pairs(
    dialog: &[UttId],
    dialog_index: u64,
    pool: &[UttId],
    cfg: &WindowConfig,
) -> Result<Vec<PairExample>> {
    let n = dialog.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    check_pool(pool)?;
    let mut rng = stream_rng(cfg.rng_seed, dialog_index);
    let mut out = Vec::new();
    for i in 1..=n {
        for k in i + 1..=n {
            if k - i >= cfg.w {
                break;
            }
            let target = ccl_target(i, k, cfg.w)?;
            out.push(PairExample {
                i,
                k,
                target,
                kind: PairKind::Positive,
            });
            let after = draw_other(&mut rng, pool, dialog[k - 1]);
            out.push(PairExample {
                i,
                k,
                target: 0.0,
                kind: PairKind::Random { after },
            });
            out.push(PairExample {
                i,
                k,
                target: 0.0,
                kind: PairKind::Directional,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg(w: usize) -> WindowConfig {
        WindowConfig::new(w, 42).unwrap()
    }

    #[test]
    fn ccl_examples() {
        assert!((ccl_target(1, 2, 5).unwrap() - 0.8).abs() < 1e-12);
        assert!((ccl_target(1, 5, 5).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(ccl_target(3, 3, 5), Err(Error::OutOfWindow { distance: 0, w: 5 }));
        assert_eq!(ccl_target(1, 6, 5), Err(Error::OutOfWindow { distance: 5, w: 5 }));
        assert!(ccl_target(4, 2, 5).is_err());
    }

    #[test]
    fn c3l_examples() {
        for k in 3..10 {
            assert_eq!(c3l_target(k - 2, k - 1, k, 5).unwrap(), 1.0);
        }
        assert!((c3l_raw(2, 4, 5, 5).unwrap() - 1.2).abs() < 1e-12);
        assert!((c3l_target(2, 4, 5, 5).unwrap() - 0.866_666_7).abs() < 1e-4);
        assert!((c3l_raw(1, 2, 5, 5).unwrap() - 0.6).abs() < 1e-12);
        assert!((c3l_target(1, 2, 5, 5).unwrap() - 0.466_666_7).abs() < 1e-4);
    }

    #[test]
    fn c3l_errors() {
        assert_eq!(
            c3l_target(2, 2, 4, 5),
            Err(Error::OrderViolation { i: 2, j: 2, k: 4 })
        );
        assert!(matches!(c3l_target(1, 2, 6, 5), Err(Error::OutOfWindow { .. })));
        assert_eq!(WindowConfig::new(2, 0), Err(Error::InvalidWindow(2)));
    }

    #[test]
    fn triple_generation_examples() {
        let t = gen_positive_triples(3, &cfg(5));
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].i, t[0].j, t[0].k), (1, 2, 3));
        assert_eq!(gen_positive_triples(5, &cfg(5)).len(), 10);
        assert!(gen_positive_triples(2, &cfg(5)).is_empty());
        let lex: Vec<_> = gen_positive_triples(5, &cfg(5))
            .iter()
            .map(|t| (t.i, t.j, t.k))
            .collect();
        let mut sorted = lex.clone();
        sorted.sort();
        assert_eq!(lex, sorted);
    }

    #[test]
    fn triple_count_matches_brute_force() {
        for &w in &[3usize, 4, 5, 8] {
            for n in 0..=12 {
                let mut expected = 0;
                for i in 1..=n {
                    for j in 1..=n {
                        for k in 1..=n {
                            if i < j && j < k && k - i < w {
                                expected += 1;
                            }
                        }
                    }
                }
                assert_eq!(gen_positive_triples(n, &cfg(w)).len(), expected, "n={n} w={w}");
            }
        }
    }

    #[test]
    fn hard_negative_counts_and_substitutions() {
        let dialog: Vec<UttId> = (0..6).collect();
        let pool: Vec<UttId> = (0..20).collect();
        let pos = gen_positive_triples(3, &cfg(5));
        let neg = gen_hard_negatives(&dialog, 0, &pos, &pool, &cfg(5)).unwrap();
        assert_eq!(neg.len(), 3);
        assert_eq!(neg[0].pattern(), NegPattern::SecondReplaced);
        assert_eq!(neg[1].pattern(), NegPattern::FirstReplaced);
        assert_eq!(neg[2].pattern(), NegPattern::BothReplaced);

        let pos10 = gen_positive_triples(5, &cfg(5));
        let neg = gen_hard_negatives(&dialog, 3, &pos10, &pool, &cfg(5)).unwrap();
        assert_eq!(neg.len(), 30);
        for n in &neg {
            assert_eq!(n.target, 0.0);
            assert!(n.is_negative());
            if let Some(r) = n.subst_i {
                assert_ne!(r, dialog[n.i - 1]);
            }
            if let Some(r) = n.subst_j {
                assert_ne!(r, dialog[n.j - 1]);
            }
        }
        // seeded by (seed, dialog index)
        let again = gen_hard_negatives(&dialog, 3, &pos10, &pool, &cfg(5)).unwrap();
        assert_eq!(neg, again);
    }

    #[test]
    fn hard_negatives_need_two_distinct_pool_entries() {
        let pos = gen_positive_triples(3, &cfg(5));
        assert_eq!(
            gen_hard_negatives(&[0, 1, 2], 0, &pos, &[7], &cfg(5)),
            Err(Error::PoolTooSmall)
        );
        assert_eq!(
            gen_hard_negatives(&[0, 1, 2], 0, &pos, &[7, 7, 7], &cfg(5)),
            Err(Error::PoolTooSmall)
        );
    }

    #[test]
    fn bi_pair_examples() {
        let pool: Vec<UttId> = (0..10).collect();
        let positives = |n: usize, w: usize| -> Vec<(usize, usize)> {
            let dialog: Vec<UttId> = (0..n).collect();
            gen_bi_pairs(&dialog, 0, &pool, &cfg(w))
                .unwrap()
                .into_iter()
                .filter(|p| !p.is_negative())
                .map(|p| (p.i, p.k))
                .collect()
        };
        assert_eq!(positives(3, 5), vec![(1, 2), (1, 3), (2, 3)]);
        assert!(positives(1, 5).is_empty());
        let p = positives(5, 3);
        for excluded in [(1, 4), (1, 5), (2, 5)] {
            assert!(!p.contains(&excluded));
        }
        assert_eq!(p.len(), 7);

        let all = gen_bi_pairs(&[0, 1, 2], 0, &pool, &cfg(5)).unwrap();
        assert_eq!(all.len(), 9);
        for chunk in all.chunks(3) {
            assert_eq!(chunk[0].kind, PairKind::Positive);
            assert!(matches!(chunk[1].kind, PairKind::Random { after } if after != chunk[1].k - 1));
            assert_eq!(chunk[2].kind, PairKind::Directional);
        }
    }

    #[test]
    fn line_format() {
        let t = gen_positive_triples(3, &cfg(5))[0];
        assert_eq!(t.to_line(), "1\t2\t3\t1\tpos");
        let p = PairExample {
            i: 1,
            k: 2,
            target: 0.8,
            kind: PairKind::Directional,
        };
        assert_eq!(p.to_line(), "1\t-\t2\t0.8\tdir");
    }

    #[test]
    fn monotonicity_on_exhaustive_enumeration() {
        for &w in &[3usize, 4, 5, 8, 10] {
            for k in 3..=12 {
                // strictly increasing in i + j for fixed k
                let mut by_sum: Vec<(usize, f64)> = Vec::new();
                for i in 1..k {
                    for j in i + 1..k {
                        if let Ok(t) = c3l_target(i, j, k, w) {
                            assert!((0.0..=1.0).contains(&t));
                            by_sum.push((i + j, t));
                        }
                    }
                }
                for a in &by_sum {
                    for b in &by_sum {
                        if a.0 < b.0 {
                            assert!(a.1 < b.1);
                        }
                    }
                }
            }
            // raw decays by 2/w per step of k with i = j - 1 fixed
            for j in 2..8 {
                let i = j - 1;
                let mut prev = c3l_raw(i, j, j + 1, w).unwrap();
                for k in j + 2..i + w {
                    let cur = c3l_raw(i, j, k, w).unwrap();
                    assert!((prev - cur - 2.0 / w as f64).abs() < 1e-12);
                    assert!(c3l_target(i, j, k, w).unwrap() < c3l_target(i, j, k - 1, w).unwrap());
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn hard_positive_mode() {
        assert_eq!(TargetMode::HardPositive.apply(0.4), 1.0);
        assert_eq!(TargetMode::Curved.apply(0.4), 0.4);
    }
}
