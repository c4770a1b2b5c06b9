//! Binary checkpoint format.
//!
//! ```text
//! magic        8 bytes  b"RPCKPT01"
//! header_len   u64 LE
//! header       JSON, header_len bytes
//! blocks       f64 LE, row-major, in header order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingStore, ModelKind, ParamBlock};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RPCKPT01";

#[derive(Debug, Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: ModelKind,
    rank: usize,
    entities: usize,
    relations: usize,
    pair_seed: u64,
    blocks: Vec<BlockHeader>,
    pairs: Vec<(usize, usize)>,
}

pub fn write<W: Write>(store: &EmbeddingStore, mut w: W) -> Result<()> {
    let header = Header {
        kind: store.kind(),
        rank: store.rank(),
        entities: store.entity_count(),
        relations: store.relation_count(),
        pair_seed: store.pair_seed(),
        blocks: store
            .blocks()
            .iter()
            .map(|b| BlockHeader { name: b.name.clone(), rows: b.rows, cols: b.cols })
            .collect(),
        pairs: store.pair_keys().to_vec(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for b in store.blocks() {
        for v in &b.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read<R: Read>(mut r: R) -> Result<EmbeddingStore> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::invalid("not a checkpoint file"));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 30 {
        return Err(Error::invalid("checkpoint header too large"));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    let mut blocks = Vec::with_capacity(header.blocks.len());
    let mut buf = [0u8; 8];
    for bh in header.blocks {
        let n = bh.rows.checked_mul(bh.cols).ok_or_else(|| Error::invalid("block size overflow"))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        blocks.push(ParamBlock { name: bh.name, rows: bh.rows, cols: bh.cols, data });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::invalid("trailing bytes after checkpoint"));
    }
    EmbeddingStore::from_parts(
        header.kind,
        header.rank,
        header.entities,
        header.relations,
        blocks,
        header.pairs,
        header.pair_seed,
    )
}

pub fn save(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    write(store, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    read(BufReader::new(File::open(path)?))
}
