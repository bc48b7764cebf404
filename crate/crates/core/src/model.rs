//! Versioned, self-contained model files.
//!
//! A file starts with a short text header (magic line, then `key: value`
//! lines, then an empty line) followed by binary sections. Each section is
//! a 4-byte tag, a little-endian `u64` payload length, the payload and the
//! SHA-256 digest of the payload.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::{DsnaConfig, ForestConfig, NeighborRadius};
use crate::data::{Dataset, Label, Sample, Scaler, TaskKind};
use crate::error::{Error, Result};
use crate::forest::{CostSensitiveForest, DecisionTree, TreeNode, FOREST_FORMAT_VERSION};
use crate::solvers::LinearModel;

pub const MODEL_MAGIC: &str = "DSNA-MODEL";
pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const SUPPORTED_VERSIONS: &[u32] = &[MODEL_FORMAT_VERSION];

const SECTIONS: [&[u8; 4]; 4] = [b"CONF", b"SCAL", b"DATA", b"TREE"];
const DIGEST_LEN: usize = 32;

/// Everything needed to predict: the trained forest (with its scaler and
/// standardized training set) and the DSNA settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub format_version: u32,
    pub forest: CostSensitiveForest,
    pub dsna: DsnaConfig,
}

impl ModelFile {
    pub fn new(forest: CostSensitiveForest, dsna: DsnaConfig) -> ModelFile {
        ModelFile { format_version: MODEL_FORMAT_VERSION, forest, dsna }
    }

    pub fn task(&self) -> TaskKind {
        self.forest.task
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn bool(&mut self, v: bool) {
        self.u8(u8::from(v));
    }
    fn f64s(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|x| self.f64(*x));
    }
    fn usizes(&mut self, v: &[usize]) {
        self.usize(v.len());
        v.iter().for_each(|x| self.usize(*x));
    }
    fn label(&mut self, l: Label) {
        match l {
            Label::Class(c) => {
                self.u8(0);
                self.u32(c);
            }
            Label::Numeric(v) => {
                self.u8(1);
                self.f64(v);
            }
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::Integrity(format!("section {} ends early", self.section)));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| self.bad("length out of range"))
    }
    /// A length prefix for `width`-byte items, checked against the bytes left.
    fn len(&mut self, width: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.checked_mul(width).is_none_or(|b| b > self.bytes.len() - self.at) {
            return Err(self.bad("length prefix exceeds section"));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(self.bad("invalid boolean")),
        }
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.usize()).collect()
    }
    fn label(&mut self) -> Result<Label> {
        match self.u8()? {
            0 => Ok(Label::Class(self.u32()?)),
            1 => Ok(Label::Numeric(self.f64()?)),
            _ => Err(self.bad("invalid label tag")),
        }
    }
    fn bad(&self, what: &str) -> Error {
        Error::Integrity(format!("section {}: {what}", self.section))
    }
    fn finish(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(self.bad("trailing bytes"));
        }
        Ok(())
    }
}

fn encode_configs(model: &ModelFile) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    let f = &model.forest.config;
    w.usize(f.tree_count);
    w.usize(f.max_depth);
    w.usize(f.min_node_size);
    w.f64(f.min_gain);
    w.f64(f.svm_cost);
    w.f64(f.svr_margin);
    w.usize(f.regression_cost_bins);
    w.usize(f.candidate_feature_factor);
    w.u64(f.seed);
    w.bool(f.cost_sensitive);
    let d = &model.dsna;
    w.usize(d.cluster_count);
    w.f64(d.overlap_slack);
    w.f64(d.lambda);
    w.f64(d.gamma);
    w.f64(d.tau);
    w.f64(d.decay);
    match d.neighbor_radius {
        NeighborRadius::Adaptive => w.u8(0),
        NeighborRadius::Fixed(r) => {
            w.u8(1);
            w.f64(r);
        }
    }
    w.f64(d.hull_tolerance);
    w.f64(d.vote_threshold_fraction);
    w.usize(d.max_outer_iters);
    w.f64(d.label_tol);
    w.f64(d.eps_guard);
    w.usize(d.max_inner_iters);
    w.f64(d.affine_anchor);
    w.0
}

fn decode_configs(r: &mut Reader) -> Result<(ForestConfig, DsnaConfig)> {
    let forest = ForestConfig {
        tree_count: r.usize()?,
        max_depth: r.usize()?,
        min_node_size: r.usize()?,
        min_gain: r.f64()?,
        svm_cost: r.f64()?,
        svr_margin: r.f64()?,
        regression_cost_bins: r.usize()?,
        candidate_feature_factor: r.usize()?,
        seed: r.u64()?,
        cost_sensitive: r.bool()?,
    };
    let dsna = DsnaConfig {
        cluster_count: r.usize()?,
        overlap_slack: r.f64()?,
        lambda: r.f64()?,
        gamma: r.f64()?,
        tau: r.f64()?,
        decay: r.f64()?,
        neighbor_radius: match r.u8()? {
            0 => NeighborRadius::Adaptive,
            1 => NeighborRadius::Fixed(r.f64()?),
            _ => return Err(r.bad("invalid radius tag")),
        },
        hull_tolerance: r.f64()?,
        vote_threshold_fraction: r.f64()?,
        max_outer_iters: r.usize()?,
        label_tol: r.f64()?,
        eps_guard: r.f64()?,
        max_inner_iters: r.usize()?,
        affine_anchor: r.f64()?,
    };
    Ok((forest, dsna))
}

fn encode_data(data: &Dataset) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.usize(data.len());
    w.usize(data.dimension());
    for s in data.samples() {
        w.usize(s.index);
        s.features.iter().for_each(|x| w.f64(*x));
        w.label(s.label);
    }
    w.0
}

fn decode_data(r: &mut Reader, task: TaskKind) -> Result<Dataset> {
    let n = r.len(1)?;
    let d = r.len(8)?;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let index = r.usize()?;
        let features = (0..d).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?;
        let label = r.label()?;
        samples.push(Sample { index, features, label });
    }
    Dataset::new(samples, task).map_err(|e| r.bad(&e.to_string()))
}

fn encode_trees(trees: &[DecisionTree]) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.usize(trees.len());
    for t in trees {
        w.usizes(&t.bootstrap);
        w.usize(t.nodes.len());
        for node in &t.nodes {
            match node {
                TreeNode::Leaf { samples } => {
                    w.u8(0);
                    w.usizes(samples);
                }
                TreeNode::Internal { features, split, threshold, left, right } => {
                    w.u8(1);
                    w.usizes(features);
                    w.f64s(&split.weights);
                    w.f64(split.bias);
                    w.f64(*threshold);
                    w.usize(*left);
                    w.usize(*right);
                }
            }
        }
    }
    w.0
}

fn decode_trees(r: &mut Reader, samples: usize, dimension: usize) -> Result<Vec<DecisionTree>> {
    let count = r.len(1)?;
    let mut trees = Vec::with_capacity(count);
    for _ in 0..count {
        let bootstrap = r.usizes()?;
        let n = r.len(1)?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let node = match r.u8()? {
                0 => TreeNode::Leaf { samples: r.usizes()? },
                1 => TreeNode::Internal {
                    features: r.usizes()?,
                    split: LinearModel { weights: r.f64s()?, bias: r.f64()? },
                    threshold: r.f64()?,
                    left: r.usize()?,
                    right: r.usize()?,
                },
                _ => return Err(r.bad("invalid node tag")),
            };
            nodes.push(node);
        }
        for node in &nodes {
            let ok = match node {
                TreeNode::Leaf { samples: s } => !s.is_empty() && s.iter().all(|p| *p < samples),
                TreeNode::Internal { features, split, left, right, .. } => {
                    features.len() == split.weights.len()
                        && features.iter().all(|f| *f < dimension)
                        && *left < n
                        && *right < n
                }
            };
            if !ok {
                return Err(r.bad("tree node refers outside the model"));
            }
        }
        if nodes.is_empty() || bootstrap.iter().any(|p| *p >= samples) {
            return Err(r.bad("malformed tree"));
        }
        trees.push(DecisionTree { nodes, bootstrap });
    }
    Ok(trees)
}

fn header(model: &ModelFile) -> String {
    let f = &model.forest;
    format!(
        "{MODEL_MAGIC}\nformat_version: {}\ntask: {}\ndimension: {}\nsamples: {}\ntrees: {}\nsections: {}\n\n",
        model.format_version,
        f.task,
        f.dimension(),
        f.train.len(),
        f.trees.len(),
        SECTIONS.len()
    )
}

/// Serializes a model into its file representation.
pub fn model_to_bytes(model: &ModelFile) -> Vec<u8> {
    let mut out = header(model).into_bytes();
    let mut scaler = Writer(Vec::new());
    scaler.f64s(&model.forest.scaler.mean);
    scaler.f64s(&model.forest.scaler.scale);
    let payloads =
        [encode_configs(model), scaler.0, encode_data(&model.forest.train), encode_trees(&model.forest.trees)];
    for (tag, payload) in SECTIONS.iter().zip(payloads) {
        out.extend_from_slice(*tag);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&Sha256::digest(&payload));
    }
    out
}

fn header_field<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Integrity(format!("header lacks '{key}'")))
}

fn header_number<T: std::str::FromStr>(fields: &[(String, String)], key: &str) -> Result<T> {
    header_field(fields, key)?.parse().map_err(|_| Error::Integrity(format!("header field '{key}' is malformed")))
}

/// Parses a model file, checking the version, every section length and
/// checksum, and the consistency of the decoded model.
pub fn model_from_bytes(bytes: &[u8]) -> Result<ModelFile> {
    let end = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::Integrity("header is not terminated".into()))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Integrity("header is not UTF-8".into()))?;
    let mut lines = text.lines();
    if lines.next() != Some(MODEL_MAGIC) {
        return Err(Error::Integrity("not a model file".into()));
    }
    let fields: Vec<(String, String)> =
        lines.filter_map(|l| l.split_once(':').map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))).collect();
    let version: u32 = header_number(&fields, "format_version")?;
    if !SUPPORTED_VERSIONS.contains(&version) {
        return Err(Error::Version { found: version, supported: SUPPORTED_VERSIONS.to_vec() });
    }
    let task: TaskKind =
        header_field(&fields, "task")?.parse().map_err(|_| Error::Integrity("header task is malformed".into()))?;
    let dimension: usize = header_number(&fields, "dimension")?;
    let sample_count: usize = header_number(&fields, "samples")?;
    let tree_count: usize = header_number(&fields, "trees")?;
    let section_count: usize = header_number(&fields, "sections")?;
    if section_count != SECTIONS.len() {
        return Err(Error::Integrity(format!("expected {} sections, header says {section_count}", SECTIONS.len())));
    }

    let mut at = end + 2;
    let mut payloads: Vec<&[u8]> = Vec::with_capacity(SECTIONS.len());
    for tag in SECTIONS {
        let name = std::str::from_utf8(tag).expect("ASCII tag");
        if bytes.len() - at < 12 {
            return Err(Error::Integrity(format!("file ends before section {name}")));
        }
        if &bytes[at..at + 4] != tag {
            return Err(Error::Integrity(format!("expected section {name}")));
        }
        let len = u64::from_le_bytes(bytes[at + 4..at + 12].try_into().expect("8 bytes"));
        at += 12;
        let len = usize::try_from(len).map_err(|_| Error::Integrity(format!("section {name} is too long")))?;
        if len.checked_add(DIGEST_LEN).is_none_or(|need| bytes.len() - at < need) {
            return Err(Error::Integrity(format!("section {name} is truncated")));
        }
        let payload = &bytes[at..at + len];
        if Sha256::digest(payload).as_slice() != &bytes[at + len..at + len + DIGEST_LEN] {
            return Err(Error::Integrity(format!("checksum mismatch in section {name}")));
        }
        payloads.push(payload);
        at += len + DIGEST_LEN;
    }
    if at != bytes.len() {
        return Err(Error::Integrity("trailing bytes after the last section".into()));
    }

    let mut r = Reader { bytes: payloads[0], at: 0, section: "CONF" };
    let (config, dsna) = decode_configs(&mut r)?;
    r.finish()?;
    let mut r = Reader { bytes: payloads[1], at: 0, section: "SCAL" };
    let scaler = Scaler { mean: r.f64s()?, scale: r.f64s()? };
    r.finish()?;
    let mut r = Reader { bytes: payloads[2], at: 0, section: "DATA" };
    let train = decode_data(&mut r, task)?;
    r.finish()?;
    let mut r = Reader { bytes: payloads[3], at: 0, section: "TREE" };
    let trees = decode_trees(&mut r, train.len(), dimension)?;
    r.finish()?;

    if train.dimension() != dimension
        || train.len() != sample_count
        || trees.len() != tree_count
        || scaler.dimension() != dimension
        || scaler.scale.len() != dimension
    {
        return Err(Error::Integrity("sections disagree with the header".into()));
    }
    config.validate().map_err(|e| Error::Integrity(e.to_string()))?;
    dsna.validate().map_err(|e| Error::Integrity(e.to_string()))?;
    let forest = CostSensitiveForest { version: FOREST_FORMAT_VERSION, task, config, scaler, train, trees };
    Ok(ModelFile { format_version: version, forest, dsna })
}

pub fn save_model(model: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    model_from_bytes(&fs::read(path)?)
}
