//! The "OODE" matrix container.
//!
//! ```text
//! offset  size     field
//! 0       4        magic "OODE"
//! 4       2        version (u16 = 1)
//! 6       2        flags (u16): content kind, 0 embeddings, 1 logits, 2 log-likelihoods
//! 8       8        n, rows (u64)
//! 16      8        d, columns (u64)
//! 24      1        dtype (u8): 1 = little-endian f32
//! 25      1        label presence (u8): 0 or 1
//! 26      4*n*d    row-major values
//! ...     4*n      labels (u32), only when present
//! ```
//!
//! Values are held as `f64` in memory and narrowed to `f32` on disk, so a
//! write-read-write cycle reproduces the file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{EmbeddingSet, Role};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const CONTAINER_MAGIC: &[u8; 4] = b"OODE";
pub const CONTAINER_VERSION: u16 = 1;
pub const DTYPE_F32_LE: u8 = 1;
pub const HEADER_LEN: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentKind {
    Embeddings,
    Logits,
    LogLikelihoods,
}

impl ContentKind {
    fn flags(self) -> u16 {
        match self {
            ContentKind::Embeddings => 0,
            ContentKind::Logits => 1,
            ContentKind::LogLikelihoods => 2,
        }
    }

    fn from_flags(flags: u16) -> Option<Self> {
        match flags {
            0 => Some(ContentKind::Embeddings),
            1 => Some(ContentKind::Logits),
            2 => Some(ContentKind::LogLikelihoods),
            _ => None,
        }
    }
}

/// Decoded file contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ContentKind,
    pub matrix: Matrix,
    pub labels: Option<Vec<u32>>,
}

pub fn encode_container(
    matrix: &Matrix,
    labels: Option<&[u32]>,
    kind: ContentKind,
) -> Result<Vec<u8>> {
    let (n, d) = (matrix.rows(), matrix.cols());
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: l.len() });
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * d + labels.map_or(0, |_| 4 * n));
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&kind.flags().to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.push(DTYPE_F32_LE);
    out.push(u8::from(labels.is_some()));
    for (i, &v) in matrix.as_slice().iter().enumerate() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(Error::data(format!(
                "value {v} at row {}, column {} does not fit in f32",
                i / d.max(1),
                i % d.max(1)
            )));
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    if let Some(l) = labels {
        for &c in l {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_container(bytes: &[u8]) -> Result<Container> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    if &bytes[..4] != CONTAINER_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"OODE\""));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CONTAINER_VERSION {
        return Err(Error::format(4, format!("unsupported container version {version}")));
    }
    let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
    let kind = ContentKind::from_flags(flags)
        .ok_or_else(|| Error::format(6, format!("unknown content flags {flags:#06x}")))?;
    let n = read_u64(bytes, 8)?;
    let d = read_u64(bytes, 16)?;
    if bytes[24] != DTYPE_F32_LE {
        return Err(Error::format(24, format!("unsupported dtype {}", bytes[24])));
    }
    let has_labels = match bytes[25] {
        0 => false,
        1 => true,
        other => return Err(Error::format(25, format!("label flag must be 0 or 1, got {other}"))),
    };

    let values = n.checked_mul(d).ok_or_else(|| Error::format(8, "n * d overflows"))?;
    let payload = values
        .checked_add(if has_labels { n } else { 0 })
        .and_then(|w| w.checked_mul(4))
        .ok_or_else(|| Error::format(8, "payload size overflows"))?;
    let available = bytes.len() - HEADER_LEN;
    if available < payload {
        // offset of the first incomplete element
        let short_at = HEADER_LEN + available / 4 * 4;
        return Err(Error::format(short_at as u64, "truncated payload"));
    }
    if available > payload {
        return Err(Error::format((HEADER_LEN + payload) as u64, "trailing bytes after payload"));
    }

    let mut data = Vec::with_capacity(values);
    for i in 0..values {
        let at = HEADER_LEN + 4 * i;
        let v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(at as u64, "non-finite value"));
        }
        data.push(f64::from(v));
    }
    let labels = has_labels.then(|| {
        let base = HEADER_LEN + 4 * values;
        (0..n)
            .map(|i| u32::from_le_bytes(bytes[base + 4 * i..base + 4 * i + 4].try_into().unwrap()))
            .collect()
    });
    Ok(Container { kind, matrix: Matrix::new(n, d, data)?, labels })
}

fn read_u64(bytes: &[u8], at: usize) -> Result<usize> {
    let v = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    usize::try_from(v).map_err(|_| Error::format(at as u64, "length overflows usize"))
}

/// Text sidecar carrying what the binary header does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarMeta {
    pub role: Role,
    pub source: String,
    pub kind: ContentKind,
}

/// `train.oode` -> `train.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

pub fn read_container(path: &Path) -> Result<Container> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    decode_container(&bytes).map_err(|e| match e {
        Error::Format { offset, message } => {
            Error::Format { offset, message: format!("{}: {message}", path.display()) }
        }
        other => other,
    })
}

pub fn write_container(
    path: &Path,
    matrix: &Matrix,
    labels: Option<&[u32]>,
    kind: ContentKind,
) -> Result<()> {
    let bytes = encode_container(matrix, labels, kind)?;
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

/// Writes the container and its `.meta.json` sidecar.
pub fn write_embeddings(path: &Path, set: &EmbeddingSet) -> Result<()> {
    write_set(path, set, ContentKind::Embeddings)
}

pub fn write_set(path: &Path, set: &EmbeddingSet, kind: ContentKind) -> Result<()> {
    write_container(path, &set.matrix, set.labels.as_deref(), kind)?;
    let meta = SidecarMeta { role: set.role, source: set.source.clone(), kind };
    let side = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&side, text).map_err(|e| Error::file(&side, e))
}

/// Reads a container whose role comes from its sidecar.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::file(&side, e))?;
    let meta: SidecarMeta = serde_json::from_str(&text)?;
    let c = read_container(path)?;
    EmbeddingSet::new(c.matrix, c.labels, meta.role, meta.source)
}

/// Reads a container with an explicit role; the sidecar is optional and only
/// supplies the provenance string.
pub fn read_embeddings_as(path: &Path, role: Role) -> Result<EmbeddingSet> {
    let source = fs::read_to_string(sidecar_path(path))
        .ok()
        .and_then(|t| serde_json::from_str::<SidecarMeta>(&t).ok())
        .map_or_else(|| path.display().to_string(), |m| m.source);
    let c = read_container(path)?;
    let labels = if role.is_ood() { None } else { c.labels };
    EmbeddingSet::new(c.matrix, labels, role, source)
}
