//! Seeded synthetic dialog corpora.
//!
//! `Markov` samples a sparse first-order chain. `XorCooccurrence` builds
//! episodes `[X, F, Y, Z]` from groups of four utterances `a_g, b_g, c_g, d_g`:
//! `(a_g, F, b_g)` continues with `c_g` and `(b_g, F, a_g)` with `d_g`, with a
//! random filler `F` in between. Each of `a_g` and `b_g` occurs in both
//! contexts at an odd distance from the continuation, so neither one alone
//! (nor their sum) tells `c_g` from `d_g`; only their order does.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    Markov,
    XorCooccurrence,
}

impl Structure {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "markov" => Some(Structure::Markov),
            "xor-cooccurrence" | "xor" => Some(Structure::XorCooccurrence),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticCorpusConfig {
    pub vocab_size: usize,
    pub dialog_count: usize,
    /// For the xor structure, rounded down to whole episodes (at least one).
    pub dialog_len: usize,
    pub structure: Structure,
    pub seed: u64,
}

/// Utterance-group layout of the xor structure for a vocabulary size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XorLayout {
    pub groups: usize,
    pub fillers: usize,
}

impl XorLayout {
    pub fn new(vocab_size: usize) -> Result<Self> {
        if vocab_size < 4 {
            return Err(Error::InvalidConfig("xor corpus needs at least 4 utterances"));
        }
        let groups = (vocab_size / 5).max(1);
        Ok(Self {
            groups,
            fillers: vocab_size - 4 * groups,
        })
    }

    pub fn episode_len(&self) -> usize {
        if self.fillers > 0 {
            4
        } else {
            3
        }
    }
}

/// Name of the continuation that the mirrored context order would produce.
pub fn xor_mirror(text: &str) -> Option<String> {
    let (head, group) = text.split_at(1.min(text.len()));
    group.parse::<usize>().ok()?;
    match head {
        "c" => Some(format!("d{group}")),
        "d" => Some(format!("c{group}")),
        _ => None,
    }
}

pub fn gen_synthetic_corpus(cfg: &SyntheticCorpusConfig) -> Result<Corpus> {
    match cfg.structure {
        Structure::Markov => markov(cfg),
        Structure::XorCooccurrence => xor(cfg),
    }
}

fn markov(cfg: &SyntheticCorpusConfig) -> Result<Corpus> {
    if cfg.vocab_size < 2 {
        return Err(Error::InvalidConfig("markov corpus needs at least 2 utterances"));
    }
    let mut corpus = Corpus::new();
    if cfg.dialog_count == 0 {
        return Ok(corpus);
    }
    if cfg.dialog_len == 0 {
        return Err(Error::InvalidConfig("dialog length must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.vocab_size;
    // two successors per state, the first more likely
    let chain: Vec<(usize, usize, f64)> = (0..n)
        .map(|_| {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n);
            while b == a {
                b = rng.random_range(0..n);
            }
            (a, b, rng.random_range(0.6..0.9))
        })
        .collect();
    let names: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
    for _ in 0..cfg.dialog_count {
        let mut state = rng.random_range(0..n);
        let mut dialog = Vec::with_capacity(cfg.dialog_len);
        for _ in 0..cfg.dialog_len {
            dialog.push(names[state].as_str());
            let (a, b, p) = chain[state];
            state = if rng.random_bool(p) { a } else { b };
        }
        corpus.push_dialog(&dialog)?;
    }
    Ok(corpus)
}

fn xor(cfg: &SyntheticCorpusConfig) -> Result<Corpus> {
    let layout = XorLayout::new(cfg.vocab_size)?;
    let mut corpus = Corpus::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let episodes = (cfg.dialog_len / layout.episode_len()).max(1);
    let mut counter = 0usize;
    for _ in 0..cfg.dialog_count {
        let mut dialog: Vec<String> = Vec::new();
        for _ in 0..episodes {
            // alternate order, then cycle groups, so every (group, order) is balanced
            let order = counter % 2;
            let g = (counter / 2) % layout.groups;
            counter += 1;
            let (x, y, z) = if order == 0 {
                (format!("a{g}"), format!("b{g}"), format!("c{g}"))
            } else {
                (format!("b{g}"), format!("a{g}"), format!("d{g}"))
            };
            dialog.push(x);
            if layout.fillers > 0 {
                dialog.push(format!("f{}", rng.random_range(0..layout.fillers)));
            }
            dialog.push(y);
            dialog.push(z);
        }
        corpus.push_dialog(&dialog)?;
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg(structure: Structure, count: usize, seed: u64) -> SyntheticCorpusConfig {
        SyntheticCorpusConfig {
            vocab_size: 20,
            dialog_count: count,
            dialog_len: 4,
            structure,
            seed,
        }
    }

    #[test]
    fn zero_dialogs_gives_empty_corpus() {
        assert!(gen_synthetic_corpus(&cfg(Structure::Markov, 0, 1)).unwrap().is_empty());
        assert!(gen_synthetic_corpus(&cfg(Structure::XorCooccurrence, 0, 1)).unwrap().is_empty());
    }

    #[test]
    fn markov_is_reproducible() {
        let a = gen_synthetic_corpus(&cfg(Structure::Markov, 30, 7)).unwrap();
        let b = gen_synthetic_corpus(&cfg(Structure::Markov, 30, 7)).unwrap();
        let c = gen_synthetic_corpus(&cfg(Structure::Markov, 30, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn xor_marginals_are_balanced() {
        let corpus = gen_synthetic_corpus(&cfg(Structure::XorCooccurrence, 500, 3)).unwrap();
        assert_eq!(XorLayout::new(20).unwrap(), XorLayout { groups: 4, fillers: 4 });
        // count continuations of every dialog containing a0 anywhere in its context
        let (mut c, mut d) = (0, 0);
        for i in 0..corpus.len() {
            let t = corpus.dialog_texts(i);
            assert_eq!(t.len(), 4);
            if t[..3].contains(&"a0") {
                match t[3] {
                    "c0" => c += 1,
                    "d0" => d += 1,
                    other => panic!("unexpected continuation {other}"),
                }
            }
        }
        assert!(c > 0);
        assert_eq!(c, d);
    }

    #[test]
    fn xor_without_fillers_and_with_chained_episodes() {
        let small = SyntheticCorpusConfig {
            vocab_size: 4,
            dialog_count: 2,
            dialog_len: 3,
            structure: Structure::XorCooccurrence,
            seed: 0,
        };
        let c = gen_synthetic_corpus(&small).unwrap();
        assert_eq!(c.dialog_texts(0), vec!["a0", "b0", "c0"]);
        assert_eq!(c.dialog_texts(1), vec!["b0", "a0", "d0"]);
        let long = SyntheticCorpusConfig { dialog_len: 7, ..small };
        assert_eq!(gen_synthetic_corpus(&long).unwrap().dialogs()[0].len(), 6);
        assert!(XorLayout::new(3).is_err());
    }

    #[test]
    fn mirror_names() {
        assert_eq!(xor_mirror("c3").as_deref(), Some("d3"));
        assert_eq!(xor_mirror("d12").as_deref(), Some("c12"));
        assert_eq!(xor_mirror("a1"), None);
        assert_eq!(xor_mirror("c"), None);
        assert_eq!(xor_mirror(""), None);
    }
}
