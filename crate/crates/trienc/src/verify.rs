//! Runtime oracle checks behind `trienc verify`. Each check recomputes a
//! library result with a plain scalar implementation.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trienc_core::geometry::{batch_pair_candidate_scores, Matrix};
use trienc_core::inference::{maxsim_column, score_triple_last_l, CandidateSet, DialogState};
use trienc_core::targets::{c3l_normalize, ccl_target};
use trienc_core::trainer::{finite_diff_grad, grad, Example};
use trienc_core::{Tag, ToyEncoderParams, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("max error {worst:.3e} (tolerance {tol:.0e})"),
    }
}

fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    Vector::new((0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect()).expect("finite")
}

fn cos64(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn widen(v: &Vector) -> Vec<f64> {
    v.as_slice().iter().map(|&x| f64::from(x)).collect()
}

fn mix(a: &Vector, b: &Vector) -> Vec<f64> {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| f64::from((x + y) * 0.5))
        .collect()
}

fn brute_triangle(b1: &[Vector], b2: &[Vector], cands: &[Vector], keep: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    cands
        .iter()
        .map(|c| {
            let c = widen(c);
            let mut s = 0.0;
            for j in 2..=b2.len() {
                for i in 1..j {
                    if keep(i, j) {
                        s += cos64(&mix(&b1[i - 1], &b2[j - 1]), &c);
                    }
                }
            }
            s
        })
        .collect()
}

fn batch_scores(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for &d in &[2usize, 16, 64] {
        for _ in 0..20 {
            let p: Vec<Vector> = (0..3).map(|_| rand_vec(rng, d)).collect();
            let c: Vec<Vector> = (0..4).map(|_| rand_vec(rng, d)).collect();
            let s = batch_pair_candidate_scores(
                &Matrix::from_rows(d, &p).expect("shape"),
                &Matrix::from_rows(d, &c).expect("shape"),
            )
            .expect("non-zero rows");
            for (i, pv) in p.iter().enumerate() {
                for (j, cv) in c.iter().enumerate() {
                    worst = worst.max((s.get(i, j) - cos64(&widen(pv), &widen(cv))).abs());
                }
            }
        }
    }
    check("batched cosine equals scalar loop", worst, 1e-6)
}

fn incremental_state(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = if rng.random_bool(0.5) { 4 } else { 16 };
        let n = rng.random_range(2..=12);
        let cands: Vec<Vector> = (0..rng.random_range(1..=50)).map(|_| rand_vec(rng, d)).collect();
        let set = CandidateSet::from_vectors(&cands).expect("candidates");
        let mut state = DialogState::new(&set, false);
        let (mut b1, mut b2) = (Vec::new(), Vec::new());
        for _ in 0..n {
            b1.push(rand_vec(rng, d));
            b2.push(rand_vec(rng, d));
            state
                .push_utterance(b1[b1.len() - 1].clone().into(), b2[b2.len() - 1].clone().into(), &set)
                .expect("push");
        }
        let want = brute_triangle(&b1, &b2, &cands, |_, _| true);
        for (a, b) in state.score_triple_avg().expect("n >= 2").iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
        let l = rng.random_range(1..=n);
        let last = score_triple_last_l(&b1, &b2, l, &set).expect("n >= 2");
        let want = brute_triangle(&b1, &b2, &cands, |_, j| j + l > n);
        for (a, b) in last.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    check("incremental and last-l scores equal brute force", worst, 1e-6)
}

/// Greedy coverage written against a hash set of used positions.
fn greedy(scores: &[f64], index: &[(usize, usize)]) -> f64 {
    let mut order: Vec<(f64, usize)> = scores.iter().copied().zip(0..).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite").then(a.1.cmp(&b.1)));
    let mut used = HashSet::new();
    let (mut sum, mut count) = (0.0, 0);
    for (s, p) in order {
        let (i, j) = index[p];
        if !used.contains(&i) || !used.contains(&j) {
            sum += s;
            count += 1;
            used.insert(i);
            used.insert(j);
        }
    }
    sum / f64::from(count)
}

fn maxsim(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let index: Vec<(usize, usize)> = (2..=n).flat_map(|j| (1..j).map(move |i| (i, j))).collect();
        // coarse values force ties
        let scores: Vec<f64> = index.iter().map(|_| f64::from(rng.random_range(-4i32..=4)) / 4.0).collect();
        let (got, _) = maxsim_column(&scores, &index).expect("non-empty");
        worst = worst.max((got - greedy(&scores, &index)).abs());
    }
    check("max-similarity aggregation equals greedy re-implementation", worst, 1e-12)
}

fn gradients(rng: &mut ChaCha8Rng) -> Check {
    let vocab: Vec<String> = (0..5).map(|i| format!("u{i}")).collect();
    let mut worst = 0.0f64;
    for draw in 0..20u64 {
        let d = [2, 8, 16][draw as usize % 3];
        let params = ToyEncoderParams::init(vocab.clone(), d, &Tag::ALL, true, draw).expect("init");
        let dialogs = vec![(0..4).map(|_| rng.random_range(0..5)).collect::<Vec<_>>()];
        let example = Example::Triple {
            dialog: 0,
            triple: trienc_core::targets::TripletExample {
                i: 1,
                j: rng.random_range(2..=3),
                k: 4,
                subst_i: None,
                subst_j: rng.random_bool(0.5).then(|| rng.random_range(0..5)),
                target: rng.random_range(0.0..1.0),
            },
        };
        let a = grad(&params, &[example], &dialogs).expect("grad");
        let f = finite_diff_grad(&params, &[example], &dialogs, 1e-4).expect("finite differences");
        worst = worst.max(a.relative_error(&f, 1e-6));
    }
    check("analytic gradient equals central differences", worst, 1e-4)
}

fn targets() -> Check {
    let mut worst = 0.0f64;
    for w in [3usize, 4, 5, 8, 10] {
        let hi = 2.0 - 3.0 / w as f64;
        worst = worst.max((c3l_normalize(hi, w) - 1.0).abs());
        for dist in 1..w {
            let t = ccl_target(1, 1 + dist, w).expect("in window");
            worst = worst.max((t - (1.0 - dist as f64 / w as f64)).abs());
        }
    }
    check("curved targets hit their closed forms", worst, 1e-12)
}

fn growth() -> Check {
    let set = CandidateSet::from_vectors(&[Vector::new(vec![1.0, 0.0]).expect("finite")]).expect("candidates");
    let mut state = DialogState::new(&set, false);
    let mut bad = 0.0f64;
    for t in 1..=20usize {
        let v = Vector::new(vec![1.0, t as f32]).expect("finite");
        state.push_utterance(v.clone().into(), v.into(), &set).expect("push");
        if state.last_new_pairs() != t - 1 || state.total_pairs() != t * (t - 1) / 2 {
            bad = 1.0;
        }
    }
    check("pair count grows by t - 1 per turn", bad, 0.0)
}

pub fn run_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        targets(),
        batch_scores(&mut rng),
        incremental_state(&mut rng),
        maxsim(&mut rng),
        gradients(&mut rng),
        growth(),
    ]
}
