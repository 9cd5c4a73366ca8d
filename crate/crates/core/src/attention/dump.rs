//! YATD1 attention dumps: attention vectors exported from a real model.
//!
//! All integers are little-endian. Layout:
//!
//! ```text
//! magic        5 bytes   "YATD1"
//! version      u16       1
//! tokenizer    u16 len + UTF-8 bytes
//! layer        u8 kind (0 = last, 1 = index, 2 = mean over layers) + u32 index
//! heads        u32
//! records      u32 count, then per record:
//!   digest     32 bytes  SHA-256 of the ids as LE u32
//!   pass       u8        0 = ctx, 1 = ctx+query
//!   ids        u32 count + count × u32
//!   values     u32 count + count × f32   (attention vector, one per id)
//! ```
//!
//! The file must end exactly after the last record.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{sequence_digest, AttentionProvider, AttnVec, LayerSelector, Pass, ProviderError};
use crate::tokenization::TokenizerId;

pub const DUMP_MAGIC: &[u8; 5] = b"YATD1";
pub const DUMP_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a YATD1 dump (bad magic)")]
    BadMagic,
    #[error("unsupported dump version {0}")]
    Version(u16),
    #[error("dump is truncated")]
    Truncated,
    #[error("{0} unexpected bytes after the last record")]
    TrailingBytes(usize),
    #[error("record {0}: digest does not match its token ids")]
    DigestMismatch(usize),
    #[error("record {index}: {values} values for {ids} ids")]
    LengthMismatch { index: usize, ids: usize, values: usize },
    #[error("record {0}: duplicate (digest, pass)")]
    Duplicate(usize),
    #[error("record {index}: unknown pass tag {tag}")]
    BadPass { index: usize, tag: u8 },
    #[error("unknown layer selector kind {0}")]
    BadLayer(u8),
    #[error("header: {0}")]
    Header(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpHeader {
    pub tokenizer: TokenizerId,
    pub layer: LayerSelector,
    pub heads: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DumpRecord {
    pub digest: [u8; 32],
    pub pass: Pass,
    pub ids: Vec<u32>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionDump {
    pub header: DumpHeader,
    pub records: Vec<DumpRecord>,
}

impl AttentionDump {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), DumpError> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&DUMP_VERSION.to_le_bytes())?;
        let name = self.header.tokenizer.as_str().as_bytes();
        let name_len = u16::try_from(name.len()).map_err(|_| DumpError::Header("tokenizer id too long".into()))?;
        out.write_all(&name_len.to_le_bytes())?;
        out.write_all(name)?;
        let (kind, index) = match self.header.layer {
            LayerSelector::Last => (0u8, 0u32),
            LayerSelector::Index(i) => (1, i),
            LayerSelector::MeanOverLayers => (2, 0),
        };
        out.write_all(&[kind])?;
        out.write_all(&index.to_le_bytes())?;
        out.write_all(&self.header.heads.to_le_bytes())?;
        out.write_all(&len_u32(self.records.len())?.to_le_bytes())?;
        for record in &self.records {
            out.write_all(&record.digest)?;
            out.write_all(&[record.pass.tag()])?;
            out.write_all(&len_u32(record.ids.len())?.to_le_bytes())?;
            for id in &record.ids {
                out.write_all(&id.to_le_bytes())?;
            }
            out.write_all(&len_u32(record.values.len())?.to_le_bytes())?;
            for v in &record.values {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self, DumpError> {
        let mut r = Reader(input);
        let mut magic = [0u8; 5];
        r.exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(DumpError::BadMagic);
        }
        let version = r.u16()?;
        if version != DUMP_VERSION {
            return Err(DumpError::Version(version));
        }
        let name_len = r.u16()? as usize;
        let mut name = vec![0u8; name_len];
        r.exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| DumpError::Header(e.to_string()))?;
        let tokenizer = TokenizerId::new(name).map_err(|e| DumpError::Header(e.to_string()))?;
        let kind = r.u8()?;
        let index = r.u32()?;
        let layer = match kind {
            0 => LayerSelector::Last,
            1 => LayerSelector::Index(index),
            2 => LayerSelector::MeanOverLayers,
            other => return Err(DumpError::BadLayer(other)),
        };
        let heads = r.u32()?;
        let count = r.u32()? as usize;

        let mut records = Vec::with_capacity(count.min(1 << 16));
        for index in 0..count {
            let mut digest = [0u8; 32];
            r.exact(&mut digest)?;
            let tag = r.u8()?;
            let pass = Pass::from_tag(tag).ok_or(DumpError::BadPass { index, tag })?;
            let n_ids = r.u32()? as usize;
            let ids = (0..n_ids).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
            let n_vals = r.u32()? as usize;
            let values = (0..n_vals)
                .map(|_| r.u32().map(f32::from_bits))
                .collect::<Result<Vec<_>, _>>()?;
            records.push(DumpRecord { digest, pass, ids, values });
        }
        let mut rest = Vec::new();
        r.0.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(DumpError::TrailingBytes(rest.len()));
        }
        Ok(Self {
            header: DumpHeader { tokenizer, layer, heads },
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DumpError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, DumpError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn len_u32(n: usize) -> Result<u32, DumpError> {
    u32::try_from(n).map_err(|_| DumpError::Header(format!("length {n} exceeds u32")))
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn exact(&mut self, buf: &mut [u8]) -> Result<(), DumpError> {
        self.0.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => DumpError::Truncated,
            _ => DumpError::Io(e),
        })
    }

    fn u8(&mut self) -> Result<u8, DumpError> {
        let mut b = [0u8; 1];
        self.exact(&mut b)?;
        Ok(b[0])
    }

    fn u16(&mut self) -> Result<u16, DumpError> {
        let mut b = [0u8; 2];
        self.exact(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self) -> Result<u32, DumpError> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
}

/// Serves attention vectors recorded in a dump.
#[derive(Debug, Clone)]
pub struct DumpProvider {
    id: String,
    header: DumpHeader,
    vectors: HashMap<([u8; 32], Pass), Vec<f32>>,
    /// Ids of every ctx+query record, for error reporting.
    with_query: Vec<Vec<u32>>,
}

impl DumpProvider {
    /// Validates records and indexes them by (digest, pass).
    pub fn new(dump: AttentionDump) -> Result<Self, DumpError> {
        let mut vectors = HashMap::with_capacity(dump.records.len());
        let mut with_query = Vec::new();
        for (index, record) in dump.records.into_iter().enumerate() {
            if sequence_digest(&record.ids) != record.digest {
                return Err(DumpError::DigestMismatch(index));
            }
            if record.ids.len() != record.values.len() {
                return Err(DumpError::LengthMismatch {
                    index,
                    ids: record.ids.len(),
                    values: record.values.len(),
                });
            }
            if record.pass == Pass::ContextQuery {
                with_query.push(record.ids);
            }
            if vectors.insert((record.digest, record.pass), record.values).is_some() {
                return Err(DumpError::Duplicate(index));
            }
        }
        Ok(Self {
            id: format!("dump:{}", dump.header.tokenizer),
            header: dump.header,
            vectors,
            with_query,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DumpError> {
        Self::new(AttentionDump::load(path)?)
    }

    pub fn header(&self) -> &DumpHeader {
        &self.header
    }

    /// Whether the dump covers the other half of a pass pair that `ids` would
    /// belong to: a ctx record that prefixes a requested ctx+query sequence,
    /// or a ctx+query record that extends a requested ctx sequence.
    fn has_other_pass(&self, ids: &[u32], pass: Pass) -> bool {
        match pass {
            Pass::ContextQuery => {
                (1..=ids.len()).any(|k| self.vectors.contains_key(&(sequence_digest(&ids[..k]), Pass::Context)))
            }
            Pass::Context => self.with_query.iter().any(|w| w.starts_with(ids)),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl AttentionProvider for DumpProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn attn_vec(&self, ids: &[u32], pass: Pass) -> Result<AttnVec, ProviderError> {
        let digest = sequence_digest(ids);
        match self.vectors.get(&(digest, pass)) {
            Some(values) => Ok(AttnVec {
                values: values.iter().map(|&v| v as f64).collect(),
                provenance: format!("{};layer={}", self.id, self.header.layer),
            }),
            None => {
                let digest = hex::encode(digest);
                if self.has_other_pass(ids, pass) {
                    Err(ProviderError::MissingPass { digest, pass })
                } else {
                    Err(ProviderError::UnknownSequence { digest })
                }
            }
        }
    }
}
