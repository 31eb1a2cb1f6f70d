//! JSON-lines corpus files: one trajectory per line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Line {
        path: String,
        line: usize,
        source: TrajectoryError,
    },
}

pub fn write_corpus(path: &Path, corpus: &[Trajectory]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for t in corpus {
        writeln!(w, "{}", t.to_json_line()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Read a corpus, checking every line against the grammar. Blank lines are
/// skipped; line numbers in errors are 1-based.
pub fn read_corpus(path: &Path) -> Result<Vec<Trajectory>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let t = Trajectory::from_json_line(&line).map_err(|source| CorpusError::Line {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(t);
    }
    Ok(out)
}
