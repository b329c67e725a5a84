//! Subspace keys and the lookup-table toy encoder.
//!
//! Each utterance has one learnable vector per subspace key. Before-space tags
//! (`B`, `B1`, `B2`) split into even/odd variants when speaker parity is on;
//! the after space `A` never does.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::UttId;
use crate::error::{Error, Result};
use crate::geometry::Matrix;
use crate::store::EmbeddingStore;

/// Subspace selected by the special prefix token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tag {
    /// Bi-encoder before space.
    B,
    /// Earlier member of a context pair.
    B1,
    /// Later member of a context pair.
    B2,
    /// After (candidate) space.
    A,
}

impl Tag {
    pub const ALL: [Tag; 4] = [Tag::B, Tag::B1, Tag::B2, Tag::A];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::B => "B",
            Tag::B1 => "B1",
            Tag::B2 => "B2",
            Tag::A => "A",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Tag::ALL.into_iter().find(|t| t.as_str().eq_ignore_ascii_case(s))
    }

    pub fn is_before(self) -> bool {
        self != Tag::A
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Odd/even turn distance between a before-space utterance and its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_distance(d: usize) -> Self {
        if d % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "even" => Some(Parity::Even),
            "odd" => Some(Parity::Odd),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// `(tag, parity)` naming one embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubspaceKey {
    pub tag: Tag,
    pub parity: Option<Parity>,
}

impl SubspaceKey {
    pub fn new(tag: Tag, parity: Option<Parity>) -> Self {
        Self { tag, parity }
    }

    /// Keys of one tag under the given parity setting.
    pub fn variants(tag: Tag, parity: bool) -> Vec<SubspaceKey> {
        if parity && tag.is_before() {
            alloc::vec![
                Self::new(tag, Some(Parity::Even)),
                Self::new(tag, Some(Parity::Odd)),
            ]
        } else {
            alloc::vec![Self::new(tag, None)]
        }
    }
}

impl fmt::Display for SubspaceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parity {
            Some(p) => write!(f, "{}_{}", self.tag, p.as_str()),
            None => write!(f, "{}", self.tag),
        }
    }
}

/// Learnable per-utterance vectors, one table per subspace key.
///
/// Master weights are `f64`; [`ToyEncoderParams::to_store`] rounds to the
/// `f32` storage format.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoderParams {
    dim: usize,
    vocab: Vec<String>,
    parity: bool,
    tables: BTreeMap<SubspaceKey, Vec<f64>>,
}

impl ToyEncoderParams {
    /// Uniform `[-0.5, 0.5] / sqrt(dim)` initialisation, drawn table by table
    /// in key order.
    pub fn init(vocab: Vec<String>, dim: usize, tags: &[Tag], parity: bool, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / libm::sqrt(dim as f64);
        let mut keys: Vec<SubspaceKey> = tags
            .iter()
            .flat_map(|&t| SubspaceKey::variants(t, parity))
            .collect();
        keys.sort();
        keys.dedup();
        let mut tables = BTreeMap::new();
        for key in keys {
            let table = (0..vocab.len() * dim)
                .map(|_| rng.random_range(-0.5..=0.5) * scale)
                .collect();
            tables.insert(key, table);
        }
        Ok(Self {
            dim,
            vocab,
            parity,
            tables,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn parity(&self) -> bool {
        self.parity
    }

    pub fn keys(&self) -> impl Iterator<Item = SubspaceKey> + '_ {
        self.tables.keys().copied()
    }

    pub fn has_tag(&self, tag: Tag) -> bool {
        self.tables.keys().any(|k| k.tag == tag)
    }

    /// Table key used for `tag` at the given turn distance parity.
    pub fn key(&self, tag: Tag, parity: Parity) -> SubspaceKey {
        if self.parity && tag.is_before() {
            SubspaceKey::new(tag, Some(parity))
        } else {
            SubspaceKey::new(tag, None)
        }
    }

    pub fn table(&self, key: SubspaceKey) -> Option<&[f64]> {
        self.tables.get(&key).map(Vec::as_slice)
    }

    pub fn table_mut(&mut self, key: SubspaceKey) -> Option<&mut [f64]> {
        self.tables.get_mut(&key).map(Vec::as_mut_slice)
    }

    pub fn row(&self, key: SubspaceKey, utt: UttId) -> Result<&[f64]> {
        if utt >= self.vocab.len() {
            return Err(Error::UnknownUtterance(utt));
        }
        let table = self.tables.get(&key).ok_or(Error::MissingSubspace {
            tag: key.tag,
            parity: key.parity,
        })?;
        Ok(&table[utt * self.dim..(utt + 1) * self.dim])
    }

    pub fn row_mut(&mut self, key: SubspaceKey, utt: UttId) -> Result<&mut [f64]> {
        if utt >= self.vocab.len() {
            return Err(Error::UnknownUtterance(utt));
        }
        let dim = self.dim;
        let table = self.tables.get_mut(&key).ok_or(Error::MissingSubspace {
            tag: key.tag,
            parity: key.parity,
        })?;
        Ok(&mut table[utt * dim..(utt + 1) * dim])
    }

    /// Overwrites every table of `dst` with the matching-parity table of `src`.
    pub fn copy_tag(&mut self, src: Tag, dst: Tag) -> Result<()> {
        for key in SubspaceKey::variants(dst, self.parity) {
            let from = SubspaceKey::new(src, key.parity);
            let data = self
                .tables
                .get(&from)
                .ok_or(Error::MissingSubspace {
                    tag: src,
                    parity: key.parity,
                })?
                .clone();
            self.tables.insert(key, data);
        }
        Ok(())
    }

    /// Rounds every weight to the nearest `f32` so that a store round trip is lossless.
    pub fn snap_to_f32(&mut self) {
        for table in self.tables.values_mut() {
            for v in table.iter_mut() {
                *v = f64::from(*v as f32);
            }
        }
    }

    pub fn to_store(&self) -> Result<EmbeddingStore> {
        let mut store = EmbeddingStore::new(self.dim, self.vocab.clone())?;
        for (key, table) in &self.tables {
            let data = table.iter().map(|&v| v as f32).collect();
            store.insert_table(*key, Matrix::from_flat(self.vocab.len(), self.dim, data)?)?;
        }
        Ok(store)
    }

    pub fn from_store(store: &EmbeddingStore) -> Self {
        let tables: BTreeMap<SubspaceKey, Vec<f64>> = store
            .tables()
            .map(|(k, m)| (k, m.as_slice().iter().map(|&v| f64::from(v)).collect()))
            .collect();
        let parity = tables.keys().any(|k| k.parity.is_some());
        Self {
            dim: store.dim(),
            vocab: store.vocab().to_vec(),
            parity,
            tables,
        }
    }

    /// Total number of scalar weights.
    pub fn len(&self) -> usize {
        self.tables.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn vocab(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("u{i}")).collect()
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = ToyEncoderParams::init(vocab(5), 16, &Tag::ALL, true, 3).unwrap();
        let b = ToyEncoderParams::init(vocab(5), 16, &Tag::ALL, true, 3).unwrap();
        let c = ToyEncoderParams::init(vocab(5), 16, &Tag::ALL, true, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // B, B1, B2 split by parity; A does not
        assert_eq!(a.keys().count(), 7);
        let bound = 0.5 / 4.0;
        for key in a.keys().collect::<Vec<_>>() {
            assert!(a.table(key).unwrap().iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn parity_off_uses_plain_keys() {
        let p = ToyEncoderParams::init(vocab(3), 4, &[Tag::B, Tag::A], false, 0).unwrap();
        assert_eq!(p.key(Tag::B, Parity::Odd), SubspaceKey::new(Tag::B, None));
        assert_eq!(p.keys().count(), 2);
        assert!(matches!(
            p.row(SubspaceKey::new(Tag::B1, None), 0),
            Err(Error::MissingSubspace { .. })
        ));
        assert_eq!(p.row(SubspaceKey::new(Tag::B, None), 3), Err(Error::UnknownUtterance(3)));
    }

    #[test]
    fn store_round_trip_after_snap() {
        let mut p = ToyEncoderParams::init(vocab(4), 8, &Tag::ALL, true, 9).unwrap();
        p.snap_to_f32();
        let back = ToyEncoderParams::from_store(&p.to_store().unwrap());
        assert_eq!(back, p);
    }

    #[test]
    fn tag_and_parity_names() {
        assert_eq!(Tag::parse("b2"), Some(Tag::B2));
        assert_eq!(SubspaceKey::new(Tag::B1, Some(Parity::Odd)).to_string(), "B1_odd");
        assert_eq!(Parity::of_distance(3), Parity::Odd);
        assert_eq!(Parity::of_distance(2), Parity::Even);
    }
}
