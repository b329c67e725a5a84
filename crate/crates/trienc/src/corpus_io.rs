//! Line-delimited JSON dialogs: one `{"dialog": [...]}` object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use trienc_core::{Corpus, EmbeddingStore, UttId};

use crate::error::{io_err, IoError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    dialog: Vec<String>,
}

/// Dialogs as strings; blank lines are skipped.
pub fn read_dialogs<R: BufRead>(reader: R) -> Result<Vec<Vec<String>>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IoError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| IoError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if record.dialog.is_empty() {
            return Err(IoError::EmptyDialog { line: line_no });
        }
        out.push(record.dialog);
    }
    Ok(out)
}

pub fn read_dialogs_file(path: &Path) -> Result<Vec<Vec<String>>> {
    let file = File::open(path).map_err(io_err(path))?;
    read_dialogs(BufReader::new(file))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    Ok(Corpus::from_dialogs(read_dialogs_file(path)?)?)
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    for d in 0..corpus.len() {
        let record = Record {
            dialog: corpus.dialog_texts(d).into_iter().map(str::to_owned).collect(),
        };
        let line = serde_json::to_string(&record).expect("string records serialise");
        writeln!(writer, "{line}").map_err(io_err("<output>"))?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_corpus(corpus, &mut w)?;
    w.flush().map_err(io_err(path))
}

/// Maps string dialogs onto store rows.
pub fn dialogs_to_ids(dialogs: &[Vec<String>], store: &EmbeddingStore) -> Result<Vec<Vec<UttId>>> {
    dialogs
        .iter()
        .map(|d| {
            d.iter()
                .map(|u| store.id(u).ok_or_else(|| IoError::UnknownUtterance(u.clone())))
                .collect()
        })
        .collect()
}
