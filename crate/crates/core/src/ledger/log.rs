//! Append-only block log and chain verification.
//!
//! The log is a sequence of entries, each a big-endian `u32` length followed
//! by one canonically encoded [`LedgerBlock`]. There is no header.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::types::LedgerBlock;
use crate::codec::{Canonical, Reader, Writer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub ok: bool,
    pub first_bad_block: Option<u64>,
}

impl VerificationReport {
    pub fn ok() -> Self {
        Self {
            ok: true,
            first_bad_block: None,
        }
    }

    pub fn bad(at: u64) -> Self {
        Self {
            ok: false,
            first_bad_block: Some(at),
        }
    }
}

/// Checks sequence numbering, digests, chain links and every transaction signature.
pub fn verify_blocks(network_id: &str, blocks: &[LedgerBlock]) -> VerificationReport {
    let mut prev = [0u8; 32];
    for (i, block) in blocks.iter().enumerate() {
        let position = i as u64 + 1;
        let sound = block.sequence == position
            && block.prev_hash == prev
            && block.compute_digest(network_id) == block.block_digest
            && block.txs.iter().all(|stx| stx.verify(network_id));
        if !sound {
            return VerificationReport::bad(position);
        }
        prev = block.block_digest;
    }
    VerificationReport::ok()
}

pub fn encode_entry(block: &LedgerBlock, out: &mut Vec<u8>) {
    let body = block.to_canonical_bytes();
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
}

/// Serializes blocks exactly as the on-disk log stores them.
pub fn encode_log(blocks: &[LedgerBlock]) -> Vec<u8> {
    let mut out = Vec::new();
    for b in blocks {
        encode_entry(b, &mut out);
    }
    out
}

/// Result of parsing raw log bytes.
#[derive(Debug)]
pub struct ParsedLog {
    pub blocks: Vec<LedgerBlock>,
    /// Byte length of the well-formed prefix.
    pub valid_len: usize,
    /// True when bytes past `valid_len` could not be parsed.
    pub damaged_tail: bool,
    /// True when the damage is a final entry cut short, as a crash mid-append leaves it.
    pub torn: bool,
}

pub fn parse_log(bytes: &[u8]) -> ParsedLog {
    let mut r = Reader::new(bytes);
    let mut blocks = Vec::new();
    let mut valid_len = 0;
    let mut torn = false;
    while r.remaining() > 0 {
        let Ok(body) = r.bytes() else {
            // A cut-off append leaves a body that cannot decode. A whole block
            // behind an oversized length means the length itself is damaged.
            let rest = bytes.get(valid_len + 4..).unwrap_or_default();
            torn = LedgerBlock::decode(&mut Reader::new(rest)).is_err();
            break;
        };
        let Ok(block) = LedgerBlock::from_canonical_bytes(&body) else {
            break;
        };
        blocks.push(block);
        valid_len = r.position();
    }
    ParsedLog {
        blocks,
        valid_len,
        damaged_tail: valid_len != bytes.len(),
        torn,
    }
}

/// Verifies a serialized log. An unparseable entry counts as a bad block.
pub fn verify_log_bytes(network_id: &str, bytes: &[u8]) -> VerificationReport {
    let parsed = parse_log(bytes);
    let report = verify_blocks(network_id, &parsed.blocks);
    if !report.ok {
        return report;
    }
    if parsed.damaged_tail {
        return VerificationReport::bad(parsed.blocks.len() as u64 + 1);
    }
    report
}

#[derive(Debug)]
pub struct BlockLog {
    path: PathBuf,
    file: File,
}

impl BlockLog {
    /// Opens (creating if needed) a log and returns the blocks it holds.
    /// A torn final entry is truncated away; any other damage is an error.
    pub fn open(path: impl AsRef<Path>) -> io::Result<(Self, Vec<LedgerBlock>)> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let parsed = parse_log(&bytes);
        if parsed.damaged_tail && !parsed.torn {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("block log entry {} is corrupt", parsed.blocks.len() + 1),
            ));
        }
        if parsed.torn {
            tracing::warn!(
                path = %path.display(),
                dropped = bytes.len() - parsed.valid_len,
                "truncating damaged block log tail"
            );
            file.set_len(parsed.valid_len as u64)?;
            file.seek(SeekFrom::End(0))?;
        }
        Ok((Self { path, file }, parsed.blocks))
    }

    pub fn append(&mut self, block: &LedgerBlock) -> io::Result<()> {
        let mut w = Writer::new();
        w.bytes(&block.to_canonical_bytes());
        self.file.write_all(&w.into_bytes())?;
        self.file.sync_data()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
