//! Binary files for trained weights and embeddings.
//!
//! A file is one line of JSON (the header), a `\n`, then the float64
//! blocks listed in the header, each row-major and little-endian, back to
//! back with no padding. See `docs/formats.md`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::embedding::{Embedder, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::gcn::{GcnModel, TrainConfig, Weights};
use crate::graph::Graph;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub kind: String,
    pub blocks: Vec<BlockShape>,
    /// Kind-specific metadata.
    pub meta: Value,
}

pub fn write_blocks(path: &Path, kind: &str, meta: Value, blocks: &[(&str, &Array2<f64>)]) -> Result<()> {
    let header = Header {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        blocks: blocks
            .iter()
            .map(|(name, b)| BlockShape {
                name: name.to_string(),
                rows: b.nrows(),
                cols: b.ncols(),
            })
            .collect(),
        meta,
    };
    let mut bytes = serde_json::to_vec(&header).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    for (_, b) in blocks {
        for x in b.iter() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_blocks(path: &Path, kind: &str) -> Result<(Header, Vec<Array2<f64>>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Input(format!("{}: {msg}", path.display()));
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..split]).map_err(|e| Error::json(path, e))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {}", header.format_version)));
    }
    if header.kind != kind {
        return Err(bad(format!("expected a `{kind}` file, found `{}`", header.kind)));
    }
    let mut body = &bytes[split + 1..];
    let expected: usize = header.blocks.iter().map(|b| b.rows * b.cols * 8).sum();
    if body.len() != expected {
        return Err(bad(format!("body has {} bytes, header implies {expected}", body.len())));
    }
    let mut blocks = Vec::with_capacity(header.blocks.len());
    for shape in &header.blocks {
        let (chunk, rest) = body.split_at(shape.rows * shape.cols * 8);
        body = rest;
        let values = chunk
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let block = Array2::from_shape_vec((shape.rows, shape.cols), values)
            .map_err(|e| bad(format!("block `{}`: {e}", shape.name)))?;
        blocks.push(block);
    }
    Ok((header, blocks))
}

const GCN_KIND: &str = "gcn";
const EMBEDDING_KIND: &str = "embedding";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnCheckpointMeta {
    pub n_features: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub config: TrainConfig,
    pub seed: u64,
}

pub fn save_gcn(path: &Path, model: &GcnModel, config: &TrainConfig, seed: u64) -> Result<()> {
    let w = &model.weights;
    let meta = GcnCheckpointMeta {
        n_features: w.n_features(),
        hidden_dim: w.hidden_dim(),
        n_classes: w.n_classes(),
        config: config.clone(),
        seed,
    };
    let meta = serde_json::to_value(meta).map_err(|e| Error::json(path, e))?;
    write_blocks(path, GCN_KIND, meta, &[("w0", &w.w0), ("w1", &w.w1)])
}

pub fn load_gcn(path: &Path) -> Result<(GcnModel, GcnCheckpointMeta)> {
    let (header, mut blocks) = read_blocks(path, GCN_KIND)?;
    let meta: GcnCheckpointMeta = serde_json::from_value(header.meta).map_err(|e| Error::json(path, e))?;
    if blocks.len() != 2 {
        return Err(Error::Input(format!("{}: expected 2 weight blocks", path.display())));
    }
    let w1 = blocks.pop().expect("two blocks");
    let w0 = blocks.pop().expect("two blocks");
    let weights = Weights::new(w0, w1)?;
    Ok((GcnModel { weights }, meta))
}

/// Identifies the embedding a cache file holds. Two computations with equal
/// keys produce identical embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingKey {
    pub n_nodes: usize,
    pub dim: usize,
    pub embedder: Embedder,
    pub seed: u64,
    /// Embedder hyperparameters.
    pub config: Value,
    /// [`graph_fingerprint`] of the graph the embedding was computed on.
    pub graph: String,
}

pub fn save_embedding(path: &Path, key: &EmbeddingKey, emb: &EmbeddingMatrix) -> Result<()> {
    if emb.dim() != (key.n_nodes, key.dim) {
        return Err(Error::Dimension(format!(
            "embedding is {:?}, key says ({}, {})",
            emb.dim(),
            key.n_nodes,
            key.dim
        )));
    }
    let meta = serde_json::to_value(key).map_err(|e| Error::json(path, e))?;
    write_blocks(path, EMBEDDING_KIND, meta, &[("embedding", emb.as_array())])
}

pub fn load_embedding(path: &Path) -> Result<(EmbeddingKey, EmbeddingMatrix)> {
    let (header, mut blocks) = read_blocks(path, EMBEDDING_KIND)?;
    let key: EmbeddingKey = serde_json::from_value(header.meta).map_err(|e| Error::json(path, e))?;
    let block = blocks
        .pop()
        .filter(|_| blocks.is_empty())
        .ok_or_else(|| Error::Input(format!("{}: expected one embedding block", path.display())))?;
    if block.dim() != (key.n_nodes, key.dim) {
        return Err(Error::Input(format!("{}: block shape disagrees with header", path.display())));
    }
    Ok((key, EmbeddingMatrix::new(block)?))
}

/// Hex FNV-1a hash of the node count and sorted edge list.
pub fn graph_fingerprint(g: &Graph) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut feed = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(PRIME);
        }
    };
    feed(g.n_nodes() as u64);
    for (u, v) in g.edges() {
        feed(u as u64);
        feed(v as u64);
    }
    format!("{h:016x}")
}
