//! Model files: magic, one-byte model tag, then the model body.

use std::path::Path;

use super::exact_sum::ExactSum;
use super::forest::{ForestParams, RandomForestModel};
use super::naive_bayes::{ClassStats, GaussianNbModel};
use super::tree::{DecisionTree, Node};
use super::Classifier;
use crate::codec::{read_file, write_file, ByteReader, ByteWriter};
use crate::error::Result;

const MODEL_MAGIC: &[u8; 8] = b"P2VMODL1";
const TAG_FOREST: u8 = 1;
const TAG_GNB: u8 = 2;
const NODE_LEAF: u8 = 0;
const NODE_SPLIT: u8 = 1;

fn put_opt(w: &mut ByteWriter, v: Option<usize>) {
    match v {
        Some(v) => w.u8(1).u64(v as u64),
        None => w.u8(0).u64(0),
    };
}

fn get_opt(r: &mut ByteReader) -> Result<Option<usize>> {
    let flag = r.u8()?;
    let v = r.u64()?;
    match flag {
        0 if v == 0 => Ok(None),
        1 => usize::try_from(v)
            .map(Some)
            .map_err(|_| r.error("value overflows usize")),
        _ => Err(r.error(format!("bad optional flag {flag}"))),
    }
}

pub fn model_to_bytes(model: &Classifier) -> Vec<u8> {
    let mut w = ByteWriter::with_capacity(1024);
    w.bytes(MODEL_MAGIC);
    match model {
        Classifier::RandomForest(m) => {
            let p = m.params();
            w.u8(TAG_FOREST);
            w.u64(p.n_est_per_file as u64);
            put_opt(&mut w, p.max_depth);
            w.u64(p.min_samples_leaf as u64);
            put_opt(&mut w, p.max_features);
            w.u64(p.seed);
            put_opt(&mut w, m.n_features());
            w.u64(m.files_fitted());
            w.u64(m.trees().len() as u64);
            for t in m.trees() {
                w.u64(t.nodes().len() as u64);
                for node in t.nodes() {
                    match *node {
                        Node::Leaf { p1 } => w.u8(NODE_LEAF).f64(p1),
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => w
                            .u8(NODE_SPLIT)
                            .u32(feature)
                            .f32(threshold)
                            .u32(left)
                            .u32(right),
                    };
                }
            }
        }
        Classifier::GaussianNb(m) => {
            w.u8(TAG_GNB);
            put_opt(&mut w, m.n_features());
            for c in m.classes() {
                w.u64(c.count);
                for s in &c.sums {
                    for limb in s.limbs() {
                        w.i64(limb);
                    }
                }
                for v in &c.m2 {
                    w.f64(*v);
                }
            }
        }
    }
    w.into_inner()
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Classifier> {
    let mut r = ByteReader::new(bytes, "model file");
    r.magic(MODEL_MAGIC)?;
    let model = match r.u8()? {
        TAG_FOREST => Classifier::RandomForest(read_forest(&mut r)?),
        TAG_GNB => Classifier::GaussianNb(read_gnb(&mut r)?),
        tag => return Err(r.error(format!("unknown model tag {tag}"))),
    };
    r.finish()?;
    Ok(model)
}

fn read_forest(r: &mut ByteReader) -> Result<RandomForestModel> {
    let n_est_per_file =
        usize::try_from(r.u64()?).map_err(|_| r.error("n_est_per_file overflows"))?;
    let max_depth = get_opt(r)?;
    let min_samples_leaf =
        usize::try_from(r.u64()?).map_err(|_| r.error("min_samples_leaf overflows"))?;
    let max_features = get_opt(r)?;
    let seed = r.u64()?;
    let params = ForestParams {
        n_est_per_file,
        max_depth,
        min_samples_leaf,
        max_features,
        seed,
    };
    params
        .validate()
        .map_err(|e| r.error(format!("invalid forest parameters: {e}")))?;
    let n_features = get_opt(r)?;
    let files_fitted = r.u64()?;
    // A leaf is the smallest node at 9 bytes, and a tree has at least one.
    let n_trees = r.len_prefix_u64(8 + 9)?;
    if n_trees > 0 && n_features.is_none_or(|d| d == 0) {
        return Err(r.error("forest has trees but no feature count"));
    }
    let d = n_features.unwrap_or(0);
    let mut trees = Vec::with_capacity(n_trees);
    for i in 0..n_trees {
        let n_nodes = r.len_prefix_u64(9)?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            nodes.push(match r.u8()? {
                NODE_LEAF => Node::Leaf { p1: r.f64()? },
                NODE_SPLIT => Node::Split {
                    feature: r.u32()?,
                    threshold: r.f32()?,
                    left: r.u32()?,
                    right: r.u32()?,
                },
                k => return Err(r.error(format!("unknown node kind {k}"))),
            });
        }
        let tree = DecisionTree::from_nodes(nodes, d)
            .ok_or_else(|| r.error(format!("tree {i} is malformed")))?;
        trees.push(tree);
    }
    Ok(RandomForestModel::from_parts(
        params,
        n_features,
        trees,
        files_fitted,
    ))
}

fn read_gnb(r: &mut ByteReader) -> Result<GaussianNbModel> {
    let n_features = get_opt(r)?;
    let d = n_features.unwrap_or(0);
    let per_class = 8 * (ExactSum::LIMB_COUNT + 1);
    r.check_fits(d, 2 * per_class)?;
    let read_class = |r: &mut ByteReader| -> Result<ClassStats> {
        let count = r.u64()?;
        let mut sums = Vec::with_capacity(d);
        for _ in 0..d {
            let mut limbs = [0i64; ExactSum::LIMB_COUNT];
            for l in limbs.iter_mut() {
                *l = r.i64()?;
            }
            sums.push(ExactSum::from_limbs(limbs).ok_or_else(|| r.error("unnormalized sum"))?);
        }
        let mut m2 = Vec::with_capacity(d);
        for _ in 0..d {
            let v = r.f64()?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(r.error(format!("invalid squared deviation {v}")));
            }
            m2.push(v);
        }
        if count == 0 && (m2.iter().any(|v| *v != 0.0) || sums.iter().any(|s| s.value() != 0.0)) {
            return Err(r.error("statistics present for an empty class"));
        }
        Ok(ClassStats { count, sums, m2 })
    };
    let c0 = read_class(r)?;
    let c1 = read_class(r)?;
    if n_features.is_none() && c0.count + c1.count > 0 {
        return Err(r.error("samples recorded without a feature count"));
    }
    Ok(GaussianNbModel::from_parts(n_features, [c0, c1]))
}

pub fn save_model(model: &Classifier, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &model_to_bytes(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Classifier> {
    model_from_bytes(&read_file(path.as_ref())?)
}
