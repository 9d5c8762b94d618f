//! File formats: snapshot edge lists, timestamped event streams, run
//! configurations, checkpoints and CSV outputs.
//!
//! Snapshot files are UTF-8 lines `t i j` with 1-based timesteps and
//! 0-based node ids. `#` starts a comment. Three optional header
//! directives are understood: `# n_nodes N`, `# timesteps T` and
//! `# directed` / `# undirected`; the writer always emits them so that
//! isolated trailing nodes and empty snapshots survive a round trip.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParameterStore, Tensor};
use crate::error::{Error, Result};
use crate::eval::{AucReport, CommunityAssignment};
use crate::inference::{Embeddings, InferenceNetwork, TrainConfig};
use crate::model::{flatten_interaction_matrix, Hyperparams, LatentTrajectory, SnapshotSequence};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// A parsed snapshot file plus the number of self-loops that were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSnapshots {
    pub snapshots: SnapshotSequence,
    pub self_loops: usize,
}

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses snapshot text. `directed` overrides any header directive; when
/// neither is present the network is undirected.
///
/// Without a `# timesteps` header the timesteps seen must be exactly
/// `1..=T`; with it, any `t` in `1..=T` is accepted and unseen timesteps
/// are empty snapshots.
pub fn parse_snapshots(text: &str, directed: Option<bool>, source: &str) -> Result<ParsedSnapshots> {
    let mut header_nodes = None;
    let mut header_steps = None;
    let mut header_directed = None;
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut self_loops = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            match words.as_slice() {
                ["n_nodes", n] => {
                    header_nodes = Some(n.parse::<usize>().map_err(|_| parse_err(source, line_no, "bad n_nodes"))?)
                }
                ["timesteps", t] => {
                    header_steps = Some(t.parse::<usize>().map_err(|_| parse_err(source, line_no, "bad timesteps"))?)
                }
                ["directed"] => header_directed = Some(true),
                ["undirected"] => header_directed = Some(false),
                _ => {}
            }
            continue;
        }
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(source, line_no, format!("expected `t i j`, got `{line}`")));
        }
        let num = |s: &str, what: &str| -> Result<i64> {
            s.parse::<i64>()
                .map_err(|_| parse_err(source, line_no, format!("{what} `{s}` is not an integer")))
        };
        let (t, i, j) = (num(fields[0], "timestep")?, num(fields[1], "node id")?, num(fields[2], "node id")?);
        if t < 1 {
            return Err(parse_err(source, line_no, format!("timestep {t} must be >= 1")));
        }
        if i < 0 || j < 0 {
            return Err(parse_err(source, line_no, format!("negative node id in `{line}`")));
        }
        if i == j {
            self_loops += 1;
            continue;
        }
        edges.push((t as usize, i as usize, j as usize));
    }

    let directed = directed.or(header_directed).unwrap_or(false);
    let max_node = edges.iter().map(|&(_, i, j)| i.max(j) + 1).max().unwrap_or(0);
    let n_nodes = match header_nodes {
        Some(n) if n < max_node => {
            return Err(parse_err(source, 0, format!("node id {} exceeds declared n_nodes {n}", max_node - 1)))
        }
        Some(n) => n,
        None => max_node,
    };
    let max_t = edges.iter().map(|e| e.0).max().unwrap_or(0);
    let horizon = match header_steps {
        Some(t) if t < max_t => {
            return Err(parse_err(source, 0, format!("timestep {max_t} exceeds declared timesteps {t}")))
        }
        Some(t) => t,
        None => {
            let mut seen = vec![false; max_t + 1];
            for e in &edges {
                seen[e.0] = true;
            }
            if let Some(missing) = (1..=max_t).find(|&t| !seen[t]) {
                return Err(parse_err(
                    source,
                    0,
                    format!("timesteps are not contiguous: {missing} is missing below {max_t}"),
                ));
            }
            max_t
        }
    };
    let mut mats = vec![DMatrix::<u8>::zeros(n_nodes, n_nodes); horizon];
    for (t, i, j) in edges {
        mats[t - 1][(i, j)] = 1;
        if !directed {
            mats[t - 1][(j, i)] = 1;
        }
    }
    Ok(ParsedSnapshots {
        snapshots: SnapshotSequence::new(n_nodes, directed, mats)?,
        self_loops,
    })
}

pub fn read_snapshots(path: &Path, directed: Option<bool>) -> Result<ParsedSnapshots> {
    parse_snapshots(&read_text(path)?, directed, &path.display().to_string())
}

/// Serialises snapshots with header directives; undirected edges are
/// written once as `i < j`.
pub fn format_snapshots(seq: &SnapshotSequence) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# n_nodes {}", seq.n_nodes());
    let _ = writeln!(out, "# timesteps {}", seq.horizon());
    let _ = writeln!(out, "# {}", if seq.directed() { "directed" } else { "undirected" });
    for (t, a) in seq.snapshots().iter().enumerate() {
        for i in 0..seq.n_nodes() {
            for j in 0..seq.n_nodes() {
                if a[(i, j)] == 1 && (seq.directed() || i < j) {
                    let _ = writeln!(out, "{} {i} {j}", t + 1);
                }
            }
        }
    }
    out
}

pub fn write_snapshots(path: &Path, seq: &SnapshotSequence) -> Result<()> {
    write_text(path, &format_snapshots(seq))
}

/// Maps external node labels to a dense `0..N` index in order of first
/// appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeDictionary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "label"])?;
        for (i, l) in self.labels.iter().enumerate() {
            w.write_record([i.to_string().as_str(), l])?;
        }
        csv_string(w)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut dict = NodeDictionary::new();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let idx: usize = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err("node dictionary", row + 2, "bad index"))?;
            let label = rec.get(1).ok_or_else(|| parse_err("node dictionary", row + 2, "missing label"))?;
            if idx != dict.len() || dict.get(label).is_some() {
                return Err(parse_err("node dictionary", row + 2, "indices must be dense and labels unique"));
            }
            dict.intern(label);
        }
        Ok(dict)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One timestamped interaction between dense node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEvent {
    pub timestamp: f64,
    pub source: usize,
    pub target: usize,
}

/// Parses `timestamp source target` lines (whitespace or comma separated,
/// `#` comments), interning node labels into `dict`.
pub fn parse_events(text: &str, dict: &mut NodeDictionary, source: &str) -> Result<Vec<EdgeEvent>> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 3 {
            return Err(parse_err(source, idx + 1, format!("expected `timestamp source target`, got `{line}`")));
        }
        let timestamp: f64 = fields[0]
            .parse()
            .map_err(|_| parse_err(source, idx + 1, format!("bad timestamp `{}`", fields[0])))?;
        if !timestamp.is_finite() {
            return Err(parse_err(source, idx + 1, "timestamp must be finite"));
        }
        events.push(EdgeEvent {
            timestamp,
            source: dict.intern(fields[1]),
            target: dict.intern(fields[2]),
        });
    }
    Ok(events)
}

/// Window settings for [`aggregate_windows`]. `n_windows = None` covers the
/// latest event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub start: f64,
    pub width: f64,
    pub n_windows: Option<usize>,
}

/// Bins events into half-open windows `[start + w*width, start + (w+1)*width)`
/// and binarises each window into a snapshot. Events outside the windows and
/// self-loops are dropped.
pub fn aggregate_windows(
    events: &[EdgeEvent],
    n_nodes: usize,
    directed: bool,
    spec: WindowSpec,
) -> Result<SnapshotSequence> {
    if !(spec.width > 0.0 && spec.width.is_finite()) {
        return Err(Error::InvalidConfig(format!("window width must be positive, got {}", spec.width)));
    }
    let window_of = |tau: f64| ((tau - spec.start) / spec.width).floor();
    let n_windows = match spec.n_windows {
        Some(n) => n,
        None => events
            .iter()
            .map(|e| window_of(e.timestamp))
            .filter(|&w| w >= 0.0)
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.max(w))))
            .map_or(0, |w| w as usize + 1),
    };
    let mut mats = vec![DMatrix::<u8>::zeros(n_nodes, n_nodes); n_windows];
    let mut kept = 0;
    for e in events {
        if e.source >= n_nodes || e.target >= n_nodes {
            return Err(Error::DimensionMismatch(format!(
                "event {} -> {} outside 0..{n_nodes}",
                e.source, e.target
            )));
        }
        let w = window_of(e.timestamp);
        if w < 0.0 || w >= n_windows as f64 || e.source == e.target {
            continue;
        }
        let a = &mut mats[w as usize];
        a[(e.source, e.target)] = 1;
        if !directed {
            a[(e.target, e.source)] = 1;
        }
        kept += 1;
    }
    if kept == 0 {
        return Err(Error::EmptyAggregation);
    }
    SnapshotSequence::new(n_nodes, directed, mats)
}

/// Everything needed to reproduce a run. Scales are standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub k: usize,
    pub s_theta: f64,
    pub s_psi: f64,
    pub sigma_theta: f64,
    pub sigma_psi: f64,
    pub directed: bool,
    pub lr: f64,
    pub n_batches: usize,
    /// 0 selects `min(N, 256)`.
    pub batch_size: usize,
    pub seed: u64,
    /// First and last timesteps (1-based) to forecast in a rolling run.
    pub first: Option<usize>,
    pub last: Option<usize>,
    pub clusters: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 32,
            s_theta: 0.1,
            s_psi: 0.1,
            sigma_theta: 10.0,
            sigma_psi: 10.0,
            directed: false,
            lr: 0.01,
            n_batches: 1000,
            batch_size: 0,
            seed: 0,
            first: None,
            last: None,
            clusters: 2,
            input: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn hyperparams(&self) -> Result<Hyperparams> {
        Hyperparams::from_scales(self.k, self.s_theta, self.s_psi, self.sigma_theta, self.sigma_psi, self.directed)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            n_batches: self.n_batches,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub shape: [usize; 2],
    /// Row-major.
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn from_tensor(t: &Tensor) -> Self {
        NamedArray {
            shape: [t.nrows(), t.ncols()],
            data: t.transpose().iter().copied().collect(),
        }
    }

    pub fn to_tensor(&self, name: &str) -> Result<Tensor> {
        let [r, c] = self.shape;
        if self.data.len() != r * c {
            return Err(Error::ShapeMismatch {
                name: name.to_string(),
                expected: (r, c),
                found: (self.data.len(), 1),
            });
        }
        Ok(Tensor::from_row_slice(r, c, &self.data))
    }
}

/// A trained network with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: RunConfig,
    pub n_nodes: usize,
    /// Number of snapshots the network was fitted to.
    pub trained_horizon: usize,
    pub params: BTreeMap<String, NamedArray>,
}

impl Checkpoint {
    pub fn new(config: &RunConfig, net: &InferenceNetwork, trained_horizon: usize) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config: config.clone(),
            n_nodes: net.n_nodes(),
            trained_horizon,
            params: net
                .store()
                .iter()
                .map(|(n, t)| (n.clone(), NamedArray::from_tensor(t)))
                .collect(),
        }
    }

    pub fn network(&self) -> Result<InferenceNetwork> {
        let mut store = ParameterStore::new();
        for (name, arr) in &self.params {
            store.insert(name.clone(), arr.to_tensor(name)?)?;
        }
        InferenceNetwork::from_store(store, self.n_nodes, self.config.k, self.config.directed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != CHECKPOINT_VERSION {
            return Err(Error::FormatVersion {
                found,
                expected: CHECKPOINT_VERSION,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }
}

/// Nine significant digits.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.8e}")
}

/// Plain numeric CSV, one matrix row per line, no header.
pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_value(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err("matrix csv", i + 1, e.to_string()))?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// `timestep,node,z_1..z_K` with `N` rows per timestep block.
pub fn format_embeddings_csv(e: &Embeddings) -> Result<String> {
    let k = e.z.first().map_or(0, |z| z.ncols());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["timestep".to_string(), "node".to_string()];
    header.extend((1..=k).map(|i| format!("z_{i}")));
    w.write_record(&header)?;
    for (t, z) in e.z.iter().enumerate() {
        for (n, row) in z.row_iter().enumerate() {
            let mut rec = vec![(t + 1).to_string(), n.to_string()];
            rec.extend(row.iter().map(|&v| fmt_value(v)));
            w.write_record(&rec)?;
        }
    }
    csv_string(w)
}

/// `timestep,attribute,theta_00,theta_01,theta_10,theta_11`.
pub fn format_interactions_csv(e: &Embeddings) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestep", "attribute", "theta_00", "theta_01", "theta_10", "theta_11"])?;
    for (t, thetas) in e.theta.iter().enumerate() {
        for (k, m) in thetas.iter().enumerate() {
            w.write_record([
                (t + 1).to_string(),
                k.to_string(),
                fmt_value(m[(0, 0)]),
                fmt_value(m[(0, 1)]),
                fmt_value(m[(1, 0)]),
                fmt_value(m[(1, 1)]),
            ])?;
        }
    }
    csv_string(w)
}

/// Reads [`format_embeddings_csv`] output back into per-timestep `N x K`
/// attribute matrices.
pub fn parse_embeddings_csv(text: &str) -> Result<Vec<DMatrix<f64>>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut blocks: BTreeMap<usize, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || parse_err("embeddings csv", i + 2, "malformed row");
        let t: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let n: usize = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let vals = rec
            .iter()
            .skip(2)
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        blocks.entry(t).or_default().insert(n, vals);
    }
    blocks
        .into_values()
        .map(|rows| {
            let k = rows.values().next().map_or(0, Vec::len);
            let n = rows.len();
            if rows.keys().copied().ne(0..n) || rows.values().any(|r| r.len() != k) {
                return Err(Error::DimensionMismatch("embedding block is not a dense N x K table".into()));
            }
            let rows: Vec<Vec<f64>> = rows.into_values().collect();
            Ok(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
        })
        .collect()
}

/// Generating trajectory as two tables: `timestep,node,psi_1..psi_K` and
/// `timestep,attribute,theta_..` in the flattened layout.
pub fn format_latents_csv(traj: &LatentTrajectory) -> Result<(String, String)> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let k = traj.psi.first().map_or(0, |p| p.ncols());
    let mut header = vec!["timestep".to_string(), "node".to_string()];
    header.extend((1..=k).map(|i| format!("psi_{i}")));
    w.write_record(&header)?;
    for (t, psi) in traj.psi.iter().enumerate() {
        for (n, row) in psi.row_iter().enumerate() {
            let mut rec = vec![(t + 1).to_string(), n.to_string()];
            rec.extend(row.iter().map(|&v| fmt_value(v)));
            w.write_record(&rec)?;
        }
    }
    let psi = csv_string(w)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let names: &[&str] = if traj.directed {
        &["theta_00", "theta_01", "theta_10", "theta_11"]
    } else {
        &["theta_00", "theta_01", "theta_11"]
    };
    let mut header = vec!["timestep", "attribute"];
    header.extend_from_slice(names);
    w.write_record(&header)?;
    for t in 0..traj.theta_bar.len() {
        for (k, m) in traj.interaction_matrices(t).iter().enumerate() {
            let mut rec = vec![(t + 1).to_string(), k.to_string()];
            rec.extend(flatten_interaction_matrix(m, traj.directed).into_iter().map(fmt_value));
            w.write_record(&rec)?;
        }
    }
    Ok((psi, csv_string(w)?))
}

/// `timestep,auc` rows followed by a `mean,<value>` row.
pub fn format_auc_report(report: &AucReport) -> String {
    let mut out = String::from("timestep,auc\n");
    for &(t, a) in &report.rows {
        let _ = writeln!(out, "{t},{}", fmt_value(a));
    }
    let _ = writeln!(out, "mean,{}", fmt_value(report.mean()));
    out
}

pub fn parse_auc_report(text: &str) -> Result<AucReport> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() || line.starts_with("mean,") {
            continue;
        }
        let (t, a) = line
            .split_once(',')
            .ok_or_else(|| parse_err("auc report", i + 1, "expected `timestep,auc`"))?;
        let t = t.parse().map_err(|_| parse_err("auc report", i + 1, "bad timestep"))?;
        let a = a.parse().map_err(|_| parse_err("auc report", i + 1, "bad auc"))?;
        rows.push((t, a));
    }
    Ok(AucReport { rows })
}

/// `node,label,community`; `label` comes from the dictionary when given,
/// otherwise it repeats the index.
pub fn format_communities_csv(a: &CommunityAssignment, dict: Option<&NodeDictionary>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestep", "node", "label", "community"])?;
    for (n, &c) in a.labels.iter().enumerate() {
        let label = dict
            .and_then(|d| d.label(n))
            .map_or_else(|| n.to_string(), str::to_string);
        w.write_record([a.timestep.to_string(), n.to_string(), label, c.to_string()])?;
    }
    csv_string(w)
}
