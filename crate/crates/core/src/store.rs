use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::encoder::{Parity, SubspaceKey, Tag};
use crate::error::{Error, Result};
use crate::geometry::{Matrix, Vector};

/// Immutable `f32` embedding tables keyed by `(tag, parity)`, sharing one
/// utterance index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vocab: Vec<String>,
    index: BTreeMap<String, usize>,
    tables: BTreeMap<SubspaceKey, Matrix>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, vocab: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive"));
        }
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect::<BTreeMap<_, _>>();
        if index.len() != vocab.len() {
            return Err(Error::InvalidConfig("duplicate utterance in store index"));
        }
        Ok(Self {
            dim,
            vocab,
            index,
            tables: BTreeMap::new(),
        })
    }

    pub fn insert_table(&mut self, key: SubspaceKey, table: Matrix) -> Result<()> {
        if table.cols() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: table.cols(),
            });
        }
        if table.rows() != self.vocab.len() {
            return Err(Error::DimMismatch {
                expected: self.vocab.len(),
                found: table.rows(),
            });
        }
        self.tables.insert(key, table);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn id(&self, text: &str) -> Option<usize> {
        self.index.get(text).copied()
    }

    pub fn tables(&self) -> impl Iterator<Item = (SubspaceKey, &Matrix)> {
        self.tables.iter().map(|(k, m)| (*k, m))
    }

    pub fn has_tag(&self, tag: Tag) -> bool {
        self.tables.keys().any(|k| k.tag == tag)
    }

    /// Table for `tag` at `parity`; falls back to the unsplit table when the
    /// store carries no parity variants for that tag.
    pub fn table(&self, tag: Tag, parity: Parity) -> Result<&Matrix> {
        self.tables
            .get(&SubspaceKey::new(tag, Some(parity)))
            .or_else(|| self.tables.get(&SubspaceKey::new(tag, None)))
            .ok_or(Error::MissingSubspace {
                tag,
                parity: Some(parity),
            })
    }

    pub fn row(&self, row: usize, tag: Tag, parity: Parity) -> Result<&[f32]> {
        if row >= self.vocab.len() {
            return Err(Error::UnknownUtterance(row));
        }
        Ok(self.table(tag, parity)?.row(row))
    }

    pub fn vector(&self, row: usize, tag: Tag, parity: Parity) -> Result<Vector> {
        Vector::new(self.row(row, tag, parity)?.to_vec())
    }
}
