//! Citation dataset ingestion (`.content` / `.cites` text files) and the
//! canonical on-disk bundle written by `prepare-data`.
//!
//! Bundle layout:
//!
//! ```text
//! <dir>/edges.tsv      header `source\ttarget`, one undirected edge per line, u < v, sorted
//! <dir>/features.tsv   header `node\tfeature\tvalue`, nonzero entries in row-major order
//! <dir>/labels.tsv     header `node\tlabel`, one line per node
//! <dir>/meta.json      counts plus the id and label-name maps
//! ```

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.tsv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const META_FILE: &str = "meta.json";
pub const BUNDLE_FILES: [&str; 4] = [EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE];

const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Dense index ↔ original identifier maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMap {
    /// `node_ids[i]` is the file identifier of node `i`.
    pub node_ids: Vec<String>,
    /// `label_names[c]` is the class name of class index `c`, in first-appearance order.
    pub label_names: Vec<String>,
}

/// Counts of citation lines that did not become edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub dangling_citations: usize,
    pub duplicate_edges: usize,
    pub self_loops: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelVector,
    pub id_map: IdMap,
    pub stats: LoadStats,
}

impl Dataset {
    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l)))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads a `.content` file (`<id> <f_1> … <f_F> <label>` per row) and a
/// `.cites` file (`<id_cited> <id_citing>` per row). Citations are treated
/// as undirected edges; ones that mention unknown ids are dropped.
pub fn load_dataset(content_path: &Path, cites_path: &Path) -> Result<Dataset> {
    let mut node_ids = Vec::new();
    let mut index_of: HashMap<String, usize> = HashMap::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut entries = Vec::new();
    let mut width: Option<usize> = None;

    for (line_no, line) in open_lines(content_path)? {
        let line = line.map_err(|e| Error::io(content_path, e))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 2 {
            return Err(parse_err(content_path, line_no, "expected `<id> <features…> <label>`"));
        }
        let n_feat = tokens.len() - 2;
        match width {
            None => width = Some(n_feat),
            Some(w) if w != n_feat => {
                return Err(Error::Input(format!(
                    "{}:{line_no}: row has {n_feat} features, expected {w}",
                    content_path.display()
                )))
            }
            Some(_) => {}
        }
        let id = tokens[0].to_string();
        if index_of.contains_key(&id) {
            return Err(parse_err(content_path, line_no, format!("duplicate node id `{id}`")));
        }
        let node = node_ids.len();
        for (j, tok) in tokens[1..=n_feat].iter().enumerate() {
            let x: f64 = tok.parse().map_err(|_| {
                parse_err(content_path, line_no, format!("feature {j} is not a number: `{tok}`"))
            })?;
            if !x.is_finite() {
                return Err(parse_err(content_path, line_no, format!("feature {j} is not finite")));
            }
            if x != 0.0 {
                entries.push((node, j, x));
            }
        }
        let label = tokens[n_feat + 1];
        let class = *label_index.entry(label.to_string()).or_insert_with(|| {
            label_names.push(label.to_string());
            label_names.len() - 1
        });
        labels.push(class);
        index_of.insert(id.clone(), node);
        node_ids.push(id);
    }

    let n = node_ids.len();
    let n_features = width.unwrap_or(0);
    let mut stats = LoadStats::default();
    let mut pairs = Vec::new();
    for (line_no, line) in open_lines(cites_path)? {
        let line = line.map_err(|e| Error::io(cites_path, e))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 2 {
            return Err(parse_err(cites_path, line_no, "expected `<id_cited> <id_citing>`"));
        }
        match (index_of.get(tokens[0]), index_of.get(tokens[1])) {
            (Some(&u), Some(&v)) => pairs.push((u, v)),
            _ => stats.dangling_citations += 1,
        }
    }
    let (graph, build) = Graph::from_edges(n, &pairs)?;
    stats.duplicate_edges = build.duplicates_dropped;
    stats.self_loops = build.self_loops_dropped;
    if stats.dangling_citations > 0 {
        log::warn!(
            "{}: dropped {} citations referencing unknown ids",
            cites_path.display(),
            stats.dangling_citations
        );
    }
    if build.duplicates_dropped + build.self_loops_dropped > 0 {
        log::warn!(
            "{}: dropped {} duplicate and {} self-citing pairs",
            cites_path.display(),
            build.duplicates_dropped,
            build.self_loops_dropped
        );
    }

    let n_classes = label_names.len();
    Ok(Dataset {
        graph,
        features: FeatureMatrix::from_triplets(n, n_features, entries)?,
        labels: LabelVector::new(labels, n_classes)?,
        id_map: IdMap {
            node_ids,
            label_names,
        },
        stats,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format_version: u32,
    pub n_nodes: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub n_edges: usize,
    pub dropped: LoadStats,
    pub node_ids: Vec<String>,
    pub label_names: Vec<String>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes the canonical bundle. Output bytes depend only on the dataset.
pub fn write_bundle(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let io = |path: &PathBuf| {
        let path = path.clone();
        move |e| Error::io(path, e)
    };

    let path = dir.join(EDGES_FILE);
    let mut w = create(&path)?;
    (|| {
        writeln!(w, "source\ttarget")?;
        for (u, v) in ds.graph.edges() {
            writeln!(w, "{u}\t{v}")?;
        }
        w.flush()
    })()
    .map_err(io(&path))?;

    let path = dir.join(FEATURES_FILE);
    let mut w = create(&path)?;
    (|| {
        writeln!(w, "node\tfeature\tvalue")?;
        for i in 0..ds.features.n_nodes() {
            let (cols, vals) = ds.features.row(i);
            for (j, x) in cols.iter().zip(vals) {
                writeln!(w, "{i}\t{j}\t{x}")?;
            }
        }
        w.flush()
    })()
    .map_err(io(&path))?;

    let path = dir.join(LABELS_FILE);
    let mut w = create(&path)?;
    (|| {
        writeln!(w, "node\tlabel")?;
        for (i, c) in ds.labels.as_slice().iter().enumerate() {
            writeln!(w, "{i}\t{c}")?;
        }
        w.flush()
    })()
    .map_err(io(&path))?;

    let meta = BundleMeta {
        format_version: BUNDLE_FORMAT_VERSION,
        n_nodes: ds.n_nodes(),
        n_features: ds.features.n_features(),
        n_classes: ds.labels.n_classes(),
        n_edges: ds.graph.n_edges(),
        dropped: ds.stats,
        node_ids: ds.id_map.node_ids.clone(),
        label_names: ds.id_map.label_names.clone(),
    };
    let path = dir.join(META_FILE);
    let mut text = serde_json::to_string_pretty(&meta).map_err(|e| Error::json(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn read_tsv(path: &Path, columns: usize, mut f: impl FnMut(usize, &[&str]) -> Result<()>) -> Result<()> {
    let mut header_seen = false;
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns {
            return Err(parse_err(path, line_no, format!("expected {columns} tab-separated fields")));
        }
        f(line_no, &fields)?;
    }
    Ok(())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse `{s}`")))
}

pub fn read_bundle_meta(dir: &Path) -> Result<BundleMeta> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: BundleMeta = serde_json::from_str(&text).map_err(|e| Error::json(&path, e))?;
    if meta.format_version != BUNDLE_FORMAT_VERSION {
        return Err(Error::Input(format!(
            "{}: unsupported bundle format {}",
            path.display(),
            meta.format_version
        )));
    }
    Ok(meta)
}

/// Reads a bundle written by [`write_bundle`].
pub fn read_bundle(dir: &Path) -> Result<Dataset> {
    let meta = read_bundle_meta(dir)?;
    let n = meta.n_nodes;

    let path = dir.join(EDGES_FILE);
    let mut pairs = Vec::with_capacity(meta.n_edges);
    read_tsv(&path, 2, |line, f| {
        pairs.push((field(&path, line, f[0])?, field(&path, line, f[1])?));
        Ok(())
    })?;
    let (graph, _) = Graph::from_edges(n, &pairs)?;

    let path = dir.join(FEATURES_FILE);
    let mut entries = Vec::new();
    read_tsv(&path, 3, |line, f| {
        entries.push((
            field(&path, line, f[0])?,
            field(&path, line, f[1])?,
            field(&path, line, f[2])?,
        ));
        Ok(())
    })?;
    let features = FeatureMatrix::from_triplets(n, meta.n_features, entries)?;

    let path = dir.join(LABELS_FILE);
    let mut labels = vec![usize::MAX; n];
    read_tsv(&path, 2, |line, f| {
        let node: usize = field(&path, line, f[0])?;
        if node >= n {
            return Err(parse_err(&path, line, format!("node {node} out of range")));
        }
        labels[node] = field(&path, line, f[1])?;
        Ok(())
    })?;
    if let Some(v) = labels.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Input(format!("{}: node {v} has no label", path.display())));
    }

    Ok(Dataset {
        graph,
        features,
        labels: LabelVector::new(labels, meta.n_classes)?,
        id_map: IdMap {
            node_ids: meta.node_ids,
            label_names: meta.label_names,
        },
        stats: meta.dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn two_node_toy() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(dir.path(), "toy.content", "a 1 0 1 X\nb 0 0 1 Y\n");
        let cites = write(dir.path(), "toy.cites", "a b\nb a\nb zz\n");
        let ds = load_dataset(&content, &cites).unwrap();
        assert_eq!(ds.n_nodes(), 2);
        assert_eq!(ds.features.n_features(), 3);
        assert_eq!(ds.graph.n_edges(), 1);
        assert_eq!(ds.labels.as_slice(), &[0, 1]);
        assert_eq!(ds.id_map.label_names, vec!["X", "Y"]);
        assert_eq!(ds.stats.dangling_citations, 1);
        assert_eq!(ds.stats.duplicate_edges, 1);
    }

    #[test]
    fn malformed_rows_report_line() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(dir.path(), "c", "a 1 0 X\nb 1 q Y\n");
        let cites = write(dir.path(), "e", "");
        match load_dataset(&content, &cites) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let content = write(dir.path(), "c2", "a 1 0 X\nb 1 Y\n");
        assert!(matches!(load_dataset(&content, &cites), Err(Error::Input(_))));

        let content = write(dir.path(), "c3", "a 1 0 X\n");
        let cites = write(dir.path(), "e3", "a b c\n");
        match load_dataset(&content, &cites) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_dataset(Path::new("/nope/x.content"), Path::new("/nope/x.cites")).unwrap_err();
        assert!(err.to_string().contains("/nope/x.content"));
    }

    #[test]
    fn bundle_round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(dir.path(), "t.content", "p 0 2.5 A\nq 1 0 B\nr 0 0 A\n");
        let cites = write(dir.path(), "t.cites", "p q\nr q\n");
        let ds = load_dataset(&content, &cites).unwrap();
        let out1 = dir.path().join("b1");
        let out2 = dir.path().join("b2");
        write_bundle(&ds, &out1).unwrap();
        let back = read_bundle(&out1).unwrap();
        assert_eq!(back.graph, ds.graph);
        assert_eq!(back.features, ds.features);
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.id_map, ds.id_map);
        write_bundle(&back, &out2).unwrap();
        for f in BUNDLE_FILES {
            assert_eq!(fs::read(out1.join(f)).unwrap(), fs::read(out2.join(f)).unwrap(), "{f}");
        }
    }
}
