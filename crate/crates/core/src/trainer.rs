//! Lookup-table training with the curved MSE objectives.
//!
//! Every example compares a before-space vector (a single `[B]` row, or the
//! mean of a `[B1]` and a `[B2]` row) with an `[A]` row through cosine
//! similarity and penalises `(cos - target)^2`. Gradients are derived by hand
//! and checked against central finite differences in the tests.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, UttId};
use crate::encoder::{Parity, SubspaceKey, Tag, ToyEncoderParams};
use crate::error::{Error, Result};
use crate::rng::mix_seed;
use crate::targets::{
    gen_bi_pairs, gen_hard_negatives, gen_positive_triples, PairExample, PairKind, TargetMode,
    TripletExample, WindowConfig,
};

/// Which objectives run, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Bi-encoder pairs only.
    CclPretrain,
    /// Bi-encoder pretraining, then `[B1]`/`[B2]` copied from `[B]` and
    /// trained on context triples.
    C3l,
    /// Context triples from a random initialisation.
    C3lFromScratch,
}

impl Stage {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ccl-pretrain" => Some(Stage::CclPretrain),
            "c3l" => Some(Stage::C3l),
            "c3l-from-scratch" => Some(Stage::C3lFromScratch),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::CclPretrain => "ccl-pretrain",
            Stage::C3l => "c3l",
            Stage::C3lFromScratch => "c3l-from-scratch",
        }
    }

    fn tags(self) -> &'static [Tag] {
        match self {
            Stage::CclPretrain => &[Tag::B, Tag::A],
            Stage::C3l => &[Tag::B, Tag::B1, Tag::B2, Tag::A],
            Stage::C3lFromScratch => &[Tag::B1, Tag::B2, Tag::A],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub w: usize,
    pub learning_rate: f64,
    /// Epochs per phase; the `C3l` stage runs this many of each.
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub stage: Stage,
    pub target_mode: TargetMode,
    pub parity: bool,
    pub optimizer: Optimizer,
    /// In the triple phase, use `[B2]` bi-encoder positives alongside the
    /// triple negatives instead of triple positives.
    pub bi_pos_triple_neg: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            w: 5,
            learning_rate: 0.05,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            stage: Stage::C3l,
            target_mode: TargetMode::Curved,
            parity: true,
            optimizer: Optimizer::Sgd,
            bi_pos_triple_neg: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive"));
        }
        WindowConfig::new(self.w, self.seed)?;
        Ok(())
    }
}

/// A generated example tied to the dialog it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Example {
    Pair { dialog: usize, pair: PairExample, tag: Tag },
    Triple { dialog: usize, triple: TripletExample },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Lhs {
    Single(SubspaceKey, UttId),
    Mean(SubspaceKey, UttId, SubspaceKey, UttId),
}

/// An example reduced to table rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    lhs: Lhs,
    after: UttId,
    target: f64,
}

fn at(dialog: &[UttId], pos: usize) -> Result<UttId> {
    pos.checked_sub(1)
        .and_then(|p| dialog.get(p))
        .copied()
        .ok_or(Error::IndexOutOfRange {
            index: pos,
            len: dialog.len(),
        })
}

impl Example {
    pub fn target(&self) -> f64 {
        match self {
            Example::Pair { pair, .. } => pair.target,
            Example::Triple { triple, .. } => triple.target,
        }
    }

    pub fn resolve(&self, dialogs: &[Vec<UttId>], params: &ToyEncoderParams) -> Result<Resolved> {
        let r = match *self {
            Example::Pair { dialog, pair, tag } => {
                let d = dialogs.get(dialog).ok_or(Error::IndexOutOfRange {
                    index: dialog,
                    len: dialogs.len(),
                })?;
                let key = params.key(tag, Parity::of_distance(pair.k - pair.i));
                let (before, after) = match pair.kind {
                    PairKind::Positive => (at(d, pair.i)?, at(d, pair.k)?),
                    PairKind::Random { after } => (at(d, pair.i)?, after),
                    PairKind::Directional => (at(d, pair.k)?, at(d, pair.i)?),
                };
                Resolved {
                    lhs: Lhs::Single(key, before),
                    after,
                    target: pair.target,
                }
            }
            Example::Triple { dialog, triple: t } => {
                let d = dialogs.get(dialog).ok_or(Error::IndexOutOfRange {
                    index: dialog,
                    len: dialogs.len(),
                })?;
                let ui = match t.subst_i {
                    Some(u) => u,
                    None => at(d, t.i)?,
                };
                let uj = match t.subst_j {
                    Some(u) => u,
                    None => at(d, t.j)?,
                };
                Resolved {
                    lhs: Lhs::Mean(
                        params.key(Tag::B1, Parity::of_distance(t.k - t.i)),
                        ui,
                        params.key(Tag::B2, Parity::of_distance(t.k - t.j)),
                        uj,
                    ),
                    after: at(d, t.k)?,
                    target: t.target,
                }
            }
        };
        for (key, u) in r.rows() {
            params.row(key, u)?;
        }
        Ok(r)
    }
}

impl Resolved {
    pub fn target(&self) -> f64 {
        self.target
    }

    fn rows(&self) -> impl Iterator<Item = (SubspaceKey, UttId)> {
        let after = (SubspaceKey::new(Tag::A, None), self.after);
        let lhs: [Option<(SubspaceKey, UttId)>; 2] = match self.lhs {
            Lhs::Single(k, u) => [Some((k, u)), None],
            Lhs::Mean(k1, u1, k2, u2) => [Some((k1, u1)), Some((k2, u2))],
        };
        lhs.into_iter().flatten().chain(core::iter::once(after))
    }
}

fn resolve_all(batch: &[Example], dialogs: &[Vec<UttId>], params: &ToyEncoderParams) -> Result<Vec<Resolved>> {
    batch.iter().map(|e| e.resolve(dialogs, params)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Before-space vector of an example.
fn lhs_vector(params: &ToyEncoderParams, lhs: &Lhs) -> Result<Vec<f64>> {
    match *lhs {
        Lhs::Single(k, u) => Ok(params.row(k, u)?.to_vec()),
        Lhs::Mean(k1, u1, k2, u2) => {
            let a = params.row(k1, u1)?;
            let b = params.row(k2, u2)?;
            Ok(a.iter().zip(b).map(|(x, y)| (x + y) * 0.5).collect())
        }
    }
}

/// Cosine of an example and the norms it was computed from.
fn example_cosine(params: &ToyEncoderParams, r: &Resolved) -> Result<(Vec<f64>, f64, f64, f64)> {
    let x = lhs_vector(params, &r.lhs)?;
    let y = params.row(SubspaceKey::new(Tag::A, None), r.after)?;
    let nx = libm::sqrt(dot(&x, &x));
    let ny = libm::sqrt(dot(y, y));
    if nx == 0.0 {
        return Err(Error::ZeroNorm { what: "before vector", row: None });
    }
    if ny == 0.0 {
        return Err(Error::ZeroNorm { what: "after vector", row: Some(r.after) });
    }
    let c = dot(&x, y) / (nx * ny);
    Ok((x, c, nx, ny))
}

fn resolved_loss(params: &ToyEncoderParams, batch: &[Resolved]) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for r in batch {
        let (_, c, _, _) = example_cosine(params, r)?;
        sum += (c - r.target) * (c - r.target);
    }
    Ok(sum / batch.len() as f64)
}

/// Mean squared error between cosine and target over the batch.
pub fn loss(params: &ToyEncoderParams, batch: &[Example], dialogs: &[Vec<UttId>]) -> Result<f64> {
    resolved_loss(params, &resolve_all(batch, dialogs, params)?)
}

/// Sparse gradient: one row per touched `(key, utterance)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    rows: BTreeMap<(SubspaceKey, UttId), Vec<f64>>,
}

impl Gradient {
    pub fn get(&self, key: SubspaceKey, utt: UttId) -> Option<&[f64]> {
        self.rows.get(&(key, utt)).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubspaceKey, UttId, &[f64])> {
        self.rows.iter().map(|(&(k, u), v)| (k, u, v.as_slice()))
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.rows.values().map(|v| dot(v, v)).sum())
    }

    fn add(&mut self, key: SubspaceKey, utt: UttId, scale: f64, v: &[f64]) {
        let row = self.rows.entry((key, utt)).or_insert_with(|| vec![0.0; v.len()]);
        for (r, x) in row.iter_mut().zip(v) {
            *r += scale * x;
        }
    }

    /// `|a - b| / max(|a|, |b|, floor)` over the whole gradient.
    pub fn relative_error(&self, other: &Gradient, floor: f64) -> f64 {
        let mut diff = 0.0;
        let keys: alloc::collections::BTreeSet<_> = self.rows.keys().chain(other.rows.keys()).collect();
        for key in keys {
            let a = self.rows.get(key);
            let b = other.rows.get(key);
            let len = a.or(b).map_or(0, Vec::len);
            for c in 0..len {
                let x = a.map_or(0.0, |v| v[c]);
                let y = b.map_or(0.0, |v| v[c]);
                diff += (x - y) * (x - y);
            }
        }
        libm::sqrt(diff) / self.norm().max(other.norm()).max(floor)
    }
}

fn resolved_grad(params: &ToyEncoderParams, batch: &[Resolved]) -> Result<Gradient> {
    let mut g = Gradient::default();
    if batch.is_empty() {
        return Ok(g);
    }
    let n = batch.len() as f64;
    let after_key = SubspaceKey::new(Tag::A, None);
    for r in batch {
        let (x, c, nx, ny) = example_cosine(params, r)?;
        let y = params.row(after_key, r.after)?;
        let dl = 2.0 * (c - r.target) / n;
        // d cos / dx = y / (|x||y|) - c x / |x|^2, symmetrically for y
        let gx: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| dl * (yi / (nx * ny) - c * xi / (nx * nx)))
            .collect();
        let gy: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| dl * (xi / (nx * ny) - c * yi / (ny * ny)))
            .collect();
        match r.lhs {
            Lhs::Single(k, u) => g.add(k, u, 1.0, &gx),
            Lhs::Mean(k1, u1, k2, u2) => {
                g.add(k1, u1, 0.5, &gx);
                g.add(k2, u2, 0.5, &gx);
            }
        }
        g.add(after_key, r.after, 1.0, &gy);
    }
    Ok(g)
}

/// Analytic gradient of [`loss`].
pub fn grad(params: &ToyEncoderParams, batch: &[Example], dialogs: &[Vec<UttId>]) -> Result<Gradient> {
    resolved_grad(params, &resolve_all(batch, dialogs, params)?)
}

/// Central differences of [`loss`] over every weight; rows whose difference
/// is zero everywhere are omitted.
pub fn finite_diff_grad(
    params: &ToyEncoderParams,
    batch: &[Example],
    dialogs: &[Vec<UttId>],
    epsilon: f64,
) -> Result<Gradient> {
    let resolved = resolve_all(batch, dialogs, params)?;
    let mut p = params.clone();
    let mut g = Gradient::default();
    let dim = params.dim();
    let keys: Vec<SubspaceKey> = params.keys().collect();
    for key in keys {
        for u in 0..params.vocab().len() {
            let mut row = vec![0.0; dim];
            for (c, slot) in row.iter_mut().enumerate() {
                let orig = p.row(key, u)?[c];
                p.row_mut(key, u)?[c] = orig + epsilon;
                let plus = resolved_loss(&p, &resolved)?;
                p.row_mut(key, u)?[c] = orig - epsilon;
                let minus = resolved_loss(&p, &resolved)?;
                p.row_mut(key, u)?[c] = orig;
                *slot = (plus - minus) / (2.0 * epsilon);
            }
            if row.iter().any(|&v| v != 0.0) {
                g.rows.insert((key, u), row);
            }
        }
    }
    Ok(g)
}

/// Objective of one training phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Bi,
    Triple,
}

/// Examples of one epoch. Negatives are resampled per epoch from the
/// `(seed, epoch)` stream of each dialog.
pub fn epoch_examples(
    dialogs: &[Vec<UttId>],
    pool: &[UttId],
    cfg: &TrainConfig,
    phase: Phase,
    epoch: u64,
) -> Result<Vec<Example>> {
    let window = WindowConfig::new(cfg.w, mix_seed(cfg.seed, epoch))?;
    let mut out = Vec::new();
    for (d, dialog) in dialogs.iter().enumerate() {
        if dialog.len() < 2 {
            continue;
        }
        match phase {
            Phase::Bi => {
                for mut pair in gen_bi_pairs(dialog, d as u64, pool, &window)? {
                    if pair.kind == PairKind::Positive {
                        pair.target = cfg.target_mode.apply(pair.target);
                    }
                    out.push(Example::Pair { dialog: d, pair, tag: Tag::B });
                }
            }
            Phase::Triple => {
                let positives = gen_positive_triples(dialog.len(), &window);
                let negatives = gen_hard_negatives(dialog, d as u64, &positives, pool, &window)?;
                if cfg.bi_pos_triple_neg {
                    for mut pair in gen_bi_pairs(dialog, d as u64, pool, &window)? {
                        if pair.kind == PairKind::Positive {
                            pair.target = cfg.target_mode.apply(pair.target);
                            out.push(Example::Pair { dialog: d, pair, tag: Tag::B2 });
                        }
                    }
                } else {
                    for mut triple in positives {
                        triple.target = cfg.target_mode.apply(triple.target);
                        out.push(Example::Triple { dialog: d, triple });
                    }
                }
                out.extend(negatives.into_iter().map(|triple| Example::Triple { dialog: d, triple }));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub phase: Phase,
    pub epoch: usize,
    /// Mean batch loss seen during the epoch, before each update.
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ToyEncoderParams,
    pub trace: Vec<EpochStats>,
    /// Index into `trace` of the selected epoch when validating.
    pub best_epoch: Option<usize>,
}

struct Adam {
    m: BTreeMap<(SubspaceKey, UttId), Vec<f64>>,
    v: BTreeMap<(SubspaceKey, UttId), Vec<f64>>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new() -> Self {
        Self {
            m: BTreeMap::new(),
            v: BTreeMap::new(),
            t: 0,
        }
    }
}

fn apply(params: &mut ToyEncoderParams, g: &Gradient, lr: f64, adam: Option<&mut Adam>) -> Result<()> {
    match adam {
        None => {
            for (key, u, row) in g.iter() {
                for (w, d) in params.row_mut(key, u)?.iter_mut().zip(row) {
                    *w -= lr * d;
                }
            }
        }
        Some(opt) => {
            opt.t += 1;
            let c1 = 1.0 - libm::pow(Adam::B1, f64::from(opt.t));
            let c2 = 1.0 - libm::pow(Adam::B2, f64::from(opt.t));
            for (key, u, row) in g.iter() {
                let m = opt.m.entry((key, u)).or_insert_with(|| vec![0.0; row.len()]);
                let v = opt.v.entry((key, u)).or_insert_with(|| vec![0.0; row.len()]);
                let w = params.row_mut(key, u)?;
                for c in 0..row.len() {
                    m[c] = Adam::B1 * m[c] + (1.0 - Adam::B1) * row[c];
                    v[c] = Adam::B2 * v[c] + (1.0 - Adam::B2) * row[c] * row[c];
                    w[c] -= lr * (m[c] / c1) / (libm::sqrt(v[c] / c2) + Adam::EPS);
                }
            }
        }
    }
    Ok(())
}

fn run_phase(
    params: &mut ToyEncoderParams,
    dialogs: &[Vec<UttId>],
    pool: &[UttId],
    valid: Option<(&[Vec<UttId>], &[UttId])>,
    cfg: &TrainConfig,
    phase: Phase,
    trace: &mut Vec<EpochStats>,
) -> Result<Option<(f64, ToyEncoderParams, usize)>> {
    let salt = match phase {
        Phase::Bi => 0,
        Phase::Triple => 1 << 32,
    };
    let valid_items = match valid {
        Some((vd, vpool)) => {
            let examples = epoch_examples(vd, vpool, cfg, phase, salt)?;
            Some(resolve_all(&examples, vd, params)?)
        }
        None => None,
    };
    let mut adam = (cfg.optimizer == Optimizer::Adam).then(Adam::new);
    let mut best: Option<(f64, ToyEncoderParams, usize)> = None;
    for epoch in 0..cfg.epochs {
        let e = salt + epoch as u64;
        let examples = epoch_examples(dialogs, pool, cfg, phase, e)?;
        let mut items = resolve_all(&examples, dialogs, params)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed ^ 0x5eed, e));
        items.shuffle(&mut rng);
        let mut seen = 0.0;
        for batch in items.chunks(cfg.batch_size) {
            seen += resolved_loss(params, batch)? * batch.len() as f64;
            let g = resolved_grad(params, batch)?;
            apply(params, &g, cfg.learning_rate, adam.as_mut())?;
        }
        let train_loss = if items.is_empty() { 0.0 } else { seen / items.len() as f64 };
        let valid_loss = match &valid_items {
            Some(v) => Some(resolved_loss(params, v)?),
            None => None,
        };
        trace.push(EpochStats {
            phase,
            epoch,
            train_loss,
            valid_loss,
        });
        if let Some(vl) = valid_loss {
            if best.as_ref().is_none_or(|(b, _, _)| vl < *b) {
                best = Some((vl, params.clone(), trace.len() - 1));
            }
        }
    }
    Ok(best)
}

/// Trains the configured stage on `corpus`. When `valid` dialogs (ids into
/// the same vocabulary) are given, each phase keeps the epoch with the lowest
/// validation loss. Weights are rounded to `f32` at the end.
pub fn train(corpus: &Corpus, valid: Option<&[Vec<UttId>]>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let dialogs = corpus.dialogs();
    let pool = corpus.used_ids();
    let valid_pool: Vec<UttId> = match valid {
        Some(v) => {
            let mut ids: Vec<UttId> = v.iter().flatten().copied().collect();
            ids.sort_unstable();
            ids.dedup();
            if let Some(&bad) = ids.iter().find(|&&u| u >= corpus.vocab().len()) {
                return Err(Error::UnknownUtterance(bad));
            }
            ids
        }
        None => Vec::new(),
    };
    let valid = valid.map(|v| (v, valid_pool.as_slice()));
    let mut params = ToyEncoderParams::init(
        corpus.vocab().to_vec(),
        cfg.dim,
        cfg.stage.tags(),
        cfg.parity,
        cfg.seed,
    )?;
    let mut trace = Vec::new();
    let mut best_epoch = None;
    let phases: &[Phase] = match cfg.stage {
        Stage::CclPretrain => &[Phase::Bi],
        Stage::C3l => &[Phase::Bi, Phase::Triple],
        Stage::C3lFromScratch => &[Phase::Triple],
    };
    for &phase in phases {
        if phase == Phase::Triple && cfg.stage == Stage::C3l {
            params.copy_tag(Tag::B, Tag::B1)?;
            params.copy_tag(Tag::B, Tag::B2)?;
        }
        if let Some((_, p, idx)) = run_phase(&mut params, dialogs, &pool, valid, cfg, phase, &mut trace)? {
            params = p;
            best_epoch = Some(idx);
        }
    }
    params.snap_to_f32();
    Ok(TrainOutcome {
        params,
        trace,
        best_epoch,
    })
}

/// Mean loss of `params` on one epoch of examples drawn from `dialogs`.
pub fn eval_loss(
    params: &ToyEncoderParams,
    dialogs: &[Vec<UttId>],
    pool: &[UttId],
    cfg: &TrainConfig,
    phase: Phase,
) -> Result<f64> {
    let examples = epoch_examples(dialogs, pool, cfg, phase, 0)?;
    loss(params, &examples, dialogs)
}
