//! Line-oriented DAG text format: one hex-encoded canonical block per line,
//! genesis first, in a topological order. Blank lines and lines starting with
//! `#` are ignored.

use std::fmt::Write as _;

use thiserror::Error;

use crate::block::{genesis_id, Block};
use crate::dag::{SDag, TieBreak, Violation};
use crate::params::Params;
use crate::tx::CodecError;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: bad hex: {source}")]
    Hex { line: usize, source: hex::FromHexError },
    #[error("line {line}: {source}")]
    Codec { line: usize, source: CodecError },
    #[error("line {line}: first block is not genesis")]
    NoGenesis { line: usize },
    #[error("line {line}: {source}")]
    Rejected { line: usize, source: Violation },
    #[error("no blocks")]
    Empty,
}

pub fn dump(sdag: &SDag) -> String {
    let mut s = String::new();
    for (id, b) in sdag.blocks() {
        let _ = writeln!(s, "# {id}");
        let _ = writeln!(s, "{}", hex::encode(b.encode().expect("stored blocks encode")));
    }
    s
}

pub fn parse(text: &str) -> Result<Vec<Block>, DumpError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bytes = hex::decode(line).map_err(|source| DumpError::Hex { line: i + 1, source })?;
        let b = Block::decode(&bytes).map_err(|source| DumpError::Codec { line: i + 1, source })?;
        if out.is_empty() && b.id() != genesis_id() {
            return Err(DumpError::NoGenesis { line: i + 1 });
        }
        out.push(b);
    }
    if out.is_empty() {
        return Err(DumpError::Empty);
    }
    Ok(out)
}

/// Rebuild an SDag from its dump, re-checking every block.
pub fn load(text: &str, params: Params, tie: TieBreak) -> Result<SDag, DumpError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if !(l.is_empty() || l.starts_with('#')) {
            lines.push(i + 1);
        }
    }
    let blocks = parse(text)?;
    let mut dag = SDag::with_tie_break(params, tie);
    for (b, line) in blocks.into_iter().zip(lines).skip(1) {
        dag.insert(b).map_err(|source| DumpError::Rejected { line, source })?;
    }
    Ok(dag)
}
