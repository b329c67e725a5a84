//! Embedding store directory: `manifest.json`, one raw little-endian `f32`
//! file per subspace, and an utterance index with one utterance per line.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use trienc_core::{EmbeddingStore, Matrix, Parity, SubspaceKey, Tag};

use crate::error::{io_err, IoError, Result};

pub const MAGIC: &str = "CCLE";
pub const VERSION: u32 = 1;
pub const DTYPE: &str = "f32le";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "utterances.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceEntry {
    pub tag: String,
    pub parity: Option<String>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub magic: String,
    pub version: u32,
    pub dim: usize,
    pub row_count: usize,
    pub dtype: String,
    pub subspaces: Vec<SubspaceEntry>,
    pub index_file: String,
}

pub fn table_file_name(key: SubspaceKey) -> String {
    format!("{key}.f32")
}

pub fn save_store(store: &EmbeddingStore, dir: &Path) -> Result<()> {
    if let Some(index) = store.vocab().iter().position(|u| u.contains('\n') || u.contains('\r')) {
        return Err(IoError::UnindexableUtterance { index });
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut subspaces = Vec::new();
    for (key, table) in store.tables() {
        let file = table_file_name(key);
        let bytes: Vec<u8> = table.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        subspaces.push(SubspaceEntry {
            tag: key.tag.as_str().to_owned(),
            parity: key.parity.map(|p| p.as_str().to_owned()),
            file,
        });
    }
    let mut index = String::new();
    for u in store.vocab() {
        index.push_str(u);
        index.push('\n');
    }
    let path = dir.join(INDEX_FILE);
    fs::write(&path, index).map_err(io_err(&path))?;
    let manifest = Manifest {
        magic: MAGIC.to_owned(),
        version: VERSION,
        dim: store.dim(),
        row_count: store.len(),
        dtype: DTYPE.to_owned(),
        subspaces,
        index_file: INDEX_FILE.to_owned(),
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, json + "\n").map_err(io_err(&path))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    let magic = value.get("magic").and_then(|m| m.as_str()).unwrap_or_default();
    if magic != MAGIC {
        return Err(IoError::BadMagic { found: magic.to_owned() });
    }
    let manifest: Manifest = serde_json::from_value(value).map_err(|e| IoError::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    if manifest.version != VERSION {
        return Err(IoError::UnsupportedVersion(manifest.version));
    }
    if manifest.dtype != DTYPE {
        return Err(IoError::ManifestMismatch(format!("dtype {:?}", manifest.dtype)));
    }
    Ok(manifest)
}

fn parse_key(entry: &SubspaceEntry) -> Result<SubspaceKey> {
    let tag = Tag::parse(&entry.tag).ok_or_else(|| IoError::ManifestMismatch(format!("unknown tag {:?}", entry.tag)))?;
    let parity = match &entry.parity {
        None => None,
        Some(p) => Some(Parity::parse(p).ok_or_else(|| IoError::ManifestMismatch(format!("unknown parity {p:?}")))?),
    };
    Ok(SubspaceKey::new(tag, parity))
}

pub fn load_store(dir: &Path) -> Result<EmbeddingStore> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(&manifest.index_file);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let vocab: Vec<String> = if manifest.row_count == 0 && text.is_empty() {
        Vec::new()
    } else {
        text.strip_suffix('\n').unwrap_or(&text).split('\n').map(str::to_owned).collect()
    };
    if vocab.len() != manifest.row_count {
        return Err(IoError::ManifestMismatch(format!(
            "index has {} lines, manifest row_count is {}",
            vocab.len(),
            manifest.row_count
        )));
    }
    let mut store = EmbeddingStore::new(manifest.dim, vocab)?;
    let expected = manifest.row_count * manifest.dim * 4;
    for entry in &manifest.subspaces {
        let key = parse_key(entry)?;
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if bytes.len() != expected {
            return Err(IoError::ManifestMismatch(format!(
                "{} has {} bytes, expected {expected}",
                entry.file,
                bytes.len()
            )));
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        store.insert_table(key, Matrix::from_flat(manifest.row_count, manifest.dim, data)?)?;
    }
    Ok(store)
}
