//! Single-file append-only journal.
//!
//! Layout: an 8-byte header (`b"CCJRNL"` magic, big-endian `u16` version)
//! followed by records of `u32 length ‖ JSON payload ‖ SHA-256(payload)`.
//! Replay stops at the first record that is short or fails its checksum and
//! truncates the file there, so what survives is always a prefix of the
//! acknowledged appends.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::crypto::{digest256, DIGEST_LEN};

pub const MAGIC: &[u8; 6] = b"CCJRNL";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 8;

fn header() -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..6].copy_from_slice(MAGIC);
    h[6..].copy_from_slice(&VERSION.to_be_bytes());
    h
}

pub fn encode_record<T: Serialize>(entry: &T) -> io::Result<Vec<u8>> {
    let payload = serde_json::to_vec(entry)?;
    let mut out = Vec::with_capacity(4 + payload.len() + DIGEST_LEN);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&digest256(&payload));
    Ok(out)
}

/// Decodes the valid prefix of a journal body (bytes after the header).
/// Returns the entries and the byte length they occupy.
pub fn decode_records<T: DeserializeOwned>(body: &[u8]) -> (Vec<T>, usize) {
    let mut entries = Vec::new();
    let mut pos = 0;
    while body.len() - pos >= 4 {
        let len = u32::from_be_bytes(body[pos..pos + 4].try_into().unwrap()) as usize;
        let end = match (pos + 4).checked_add(len).and_then(|e| e.checked_add(DIGEST_LEN)) {
            Some(end) if end <= body.len() => end,
            _ => break,
        };
        let payload = &body[pos + 4..pos + 4 + len];
        if digest256(payload)[..] != body[pos + 4 + len..end] {
            break;
        }
        let Ok(entry) = serde_json::from_slice(payload) else {
            break;
        };
        entries.push(entry);
        pos = end;
    }
    (entries, pos)
}

#[derive(Debug)]
pub struct Journal<T> {
    path: PathBuf,
    file: File,
    sync: bool,
    appended: usize,
    _entry: PhantomData<fn(T)>,
}

impl<T: Serialize + DeserializeOwned> Journal<T> {
    /// Opens or creates the journal and returns its surviving entries.
    pub fn open(path: impl AsRef<Path>, sync: bool) -> io::Result<(Self, Vec<T>)> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let entries = if bytes.len() < HEADER_LEN {
            // Fresh file, or a crash while writing the header.
            file.set_len(0)?;
            file.write_all(&header())?;
            file.sync_data()?;
            Vec::new()
        } else {
            if bytes[..6] != MAGIC[..] {
                return Err(io::Error::new(io::ErrorKind::InvalidData, "not a journal file"));
            }
            let version = u16::from_be_bytes([bytes[6], bytes[7]]);
            if version != VERSION {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("unsupported journal version {version}"),
                ));
            }
            let (entries, used) = decode_records(&bytes[HEADER_LEN..]);
            let valid = HEADER_LEN + used;
            if valid < bytes.len() {
                tracing::warn!(
                    path = %path.display(),
                    dropped = bytes.len() - valid,
                    "truncating journal after last intact record"
                );
                file.set_len(valid as u64)?;
            }
            entries
        };
        Ok((
            Self {
                path,
                file,
                sync,
                appended: 0,
                _entry: PhantomData,
            },
            entries,
        ))
    }

    pub fn append(&mut self, entry: &T) -> io::Result<()> {
        self.file.write_all(&encode_record(entry)?)?;
        if self.sync {
            self.file.sync_data()?;
        }
        self.appended += 1;
        Ok(())
    }

    /// Entries appended since open or the last rewrite.
    pub fn appended(&self) -> usize {
        self.appended
    }

    /// Atomically replaces the journal with one holding only `entries`.
    pub fn rewrite(&mut self, entries: &[T]) -> io::Result<()> {
        let tmp = self.path.with_extension("compact");
        {
            let mut out = File::create(&tmp)?;
            out.write_all(&header())?;
            for e in entries {
                out.write_all(&encode_record(e)?)?;
            }
            out.sync_all()?;
        }
        fs::rename(&tmp, &self.path)?;
        self.file = OpenOptions::new().read(true).append(true).open(&self.path)?;
        self.appended = 0;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
