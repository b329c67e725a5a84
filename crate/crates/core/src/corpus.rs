use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Index into a corpus vocabulary.
pub type UttId = usize;

/// Dialogs as sequences of vocabulary ids. The vocabulary holds each distinct
/// utterance string once, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    vocab: Vec<String>,
    index: BTreeMap<String, UttId>,
    dialogs: Vec<Vec<UttId>>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_dialogs<D, S>(dialogs: D) -> Result<Self>
    where
        D: IntoIterator,
        D::Item: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut corpus = Self::new();
        for dialog in dialogs {
            corpus.push_dialog(dialog.as_ref())?;
        }
        Ok(corpus)
    }

    pub fn push_dialog<S: AsRef<str>>(&mut self, utterances: &[S]) -> Result<()> {
        if utterances.is_empty() {
            return Err(Error::EmptyDialog);
        }
        let ids = utterances.iter().map(|u| self.intern(u.as_ref())).collect();
        self.dialogs.push(ids);
        Ok(())
    }

    fn intern(&mut self, text: &str) -> UttId {
        if let Some(&id) = self.index.get(text) {
            return id;
        }
        let id = self.vocab.len();
        self.vocab.push(text.to_string());
        self.index.insert(text.to_string(), id);
        id
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn dialogs(&self) -> &[Vec<UttId>] {
        &self.dialogs
    }

    pub fn id(&self, text: &str) -> Option<UttId> {
        self.index.get(text).copied()
    }

    pub fn text(&self, id: UttId) -> Option<&str> {
        self.vocab.get(id).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.dialogs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.dialogs.len()
    }

    /// Removes and returns the dialogs from index `at` on; the vocabulary is kept.
    pub fn split_off(&mut self, at: usize) -> Vec<Vec<UttId>> {
        self.dialogs.split_off(at.min(self.dialogs.len()))
    }

    /// Dialog `d` as utterance strings.
    pub fn dialog_texts(&self, d: usize) -> Vec<&str> {
        self.dialogs[d].iter().map(|&u| self.vocab[u].as_str()).collect()
    }

    /// Distinct utterance ids occurring in any dialog, ascending.
    pub fn used_ids(&self) -> Vec<UttId> {
        let mut seen = alloc::vec![false; self.vocab.len()];
        for d in &self.dialogs {
            for &u in d {
                seen[u] = true;
            }
        }
        (0..self.vocab.len()).filter(|&u| seen[u]).collect()
    }
}
