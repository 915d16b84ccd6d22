//! Versioned structured-text serialization of boosted models.
//!
//! Layout (v1): magic+version line, config, label map, schema, per-class
//! base scores, then every tree as an explicit node array. Floats use
//! shortest round-trip formatting, so `load ∘ save` reproduces predictions
//! bit-exactly.

use std::fs;
use std::path::Path;

use crate::dataio::VigilanceState;
use crate::error::{Error, Result};
use crate::features::FeatureSchema;
use crate::textio::TextReader;

use super::{ClassTree, GbtConfig, GbtModel, TreeNode};

const MAGIC: &str = "vigil-gbt";
const VERSION: &str = "v1";

#[derive(Debug, Clone)]
enum FlatNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
        gain: f64,
        cover: f64,
    },
    Leaf {
        weight: f64,
        cover: f64,
    },
}

fn flatten(node: &TreeNode, out: &mut Vec<FlatNode>) -> usize {
    let idx = out.len();
    match node {
        TreeNode::Leaf { weight, cover } => {
            out.push(FlatNode::Leaf {
                weight: *weight,
                cover: *cover,
            });
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            default_left,
            gain,
            cover,
        } => {
            out.push(FlatNode::Leaf { weight: 0.0, cover: 0.0 }); // placeholder
            let left_idx = flatten(left, out);
            let right_idx = flatten(right, out);
            out[idx] = FlatNode::Split {
                feature: *feature,
                threshold: *threshold,
                left: left_idx,
                right: right_idx,
                default_left: *default_left,
                gain: *gain,
                cover: *cover,
            };
        }
    }
    idx
}

fn rebuild(nodes: &[FlatNode], idx: usize, visited: &mut [bool]) -> Result<TreeNode> {
    let node = nodes.get(idx).ok_or_else(|| {
        Error::Parse(format!("node {idx}: index out of range ({} nodes)", nodes.len()))
    })?;
    if visited[idx] {
        return Err(Error::Parse(format!("node {idx} referenced twice")));
    }
    visited[idx] = true;
    Ok(match node {
        FlatNode::Leaf { weight, cover } => TreeNode::Leaf {
            weight: *weight,
            cover: *cover,
        },
        FlatNode::Split {
            feature,
            threshold,
            left,
            right,
            default_left,
            gain,
            cover,
        } => TreeNode::Split {
            feature: *feature,
            threshold: *threshold,
            left: Box::new(rebuild(nodes, *left, visited)?),
            right: Box::new(rebuild(nodes, *right, visited)?),
            default_left: *default_left,
            gain: *gain,
            cover: *cover,
        },
    })
}

/// Serializes a model to its text form.
pub fn model_to_string(model: &GbtModel) -> String {
    let c = &model.config;
    let mut out = String::new();
    out.push_str(&format!("{MAGIC} {VERSION}\n"));
    out.push_str(&format!(
        "config eta={} rounds={} max_depth={} subsample={} colsample={} min_split_loss={} l2={} min_child_weight={} seed={} n_classes={}\n",
        c.eta, c.n_rounds, c.max_depth, c.subsample, c.colsample, c.min_split_loss, c.l2,
        c.min_child_weight, c.seed, c.n_classes
    ));
    let labels = model
        .label_map()
        .iter()
        .map(|(name, code)| format!("{name}={code}"))
        .collect::<Vec<_>>()
        .join(" ");
    out.push_str(&format!("labels {labels}\n"));
    out.push_str(&format!("schema {} {}\n", model.schema.id(), model.schema.len()));
    for name in model.schema.names() {
        out.push_str(&format!("feature {name}\n"));
    }
    let base = model
        .base_score
        .iter()
        .map(|b| b.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    out.push_str(&format!("base {base}\n"));
    out.push_str(&format!("trees {}\n", model.trees.len()));
    for tree in &model.trees {
        let mut nodes = Vec::new();
        flatten(&tree.root, &mut nodes);
        out.push_str(&format!(
            "tree {} class {} nodes {}\n",
            tree.round,
            tree.class,
            nodes.len()
        ));
        for (i, node) in nodes.iter().enumerate() {
            match node {
                FlatNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    default_left,
                    gain,
                    cover,
                } => out.push_str(&format!(
                    "node {i} split feature={feature} threshold={threshold} left={left} right={right} default={} gain={gain} cover={cover}\n",
                    if *default_left { "left" } else { "right" }
                )),
                FlatNode::Leaf { weight, cover } => {
                    out.push_str(&format!("node {i} leaf weight={weight} cover={cover}\n"))
                }
            }
        }
    }
    out.push_str("end\n");
    out
}

/// Saves the model, logging its one-line summary.
pub fn save_model(model: &GbtModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_string(model))?;
    log::info!("{}", model.summary());
    Ok(())
}

fn kv<'a>(field: &'a str, key: &str, reader: &TextReader) -> Result<&'a str> {
    field
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| {
            Error::Parse(format!(
                "{}: expected `{key}=...`, got `{field}`",
                reader.describe()
            ))
        })
}

/// Parses a model from its text form.
pub fn model_from_string(text: &str) -> Result<GbtModel> {
    let mut r = TextReader::new(text);
    let first = r.next_line()?;
    let [magic, version] = r.parse_fields(first)?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "not a {MAGIC} model file (starts with `{magic}`)"
        )));
    }
    if version != VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            supported: VERSION.to_string(),
        });
    }

    let config_line = r.expect("config")?;
    let [eta, rounds, max_depth, subsample, colsample, min_split_loss, l2, mcw, seed, n_classes] =
        r.parse_fields(config_line)?;
    let config = GbtConfig {
        eta: r.parse_f64(kv(eta, "eta", &r)?)?,
        n_rounds: r.parse_usize(kv(rounds, "rounds", &r)?)?,
        max_depth: r.parse_usize(kv(max_depth, "max_depth", &r)?)?,
        subsample: r.parse_f64(kv(subsample, "subsample", &r)?)?,
        colsample: r.parse_f64(kv(colsample, "colsample", &r)?)?,
        min_split_loss: r.parse_f64(kv(min_split_loss, "min_split_loss", &r)?)?,
        l2: r.parse_f64(kv(l2, "l2", &r)?)?,
        min_child_weight: r.parse_f64(kv(mcw, "min_child_weight", &r)?)?,
        seed: r.parse_u64(kv(seed, "seed", &r)?)?,
        n_classes: r.parse_usize(kv(n_classes, "n_classes", &r)?)?,
    };

    let labels_line = r.expect("labels")?;
    for token in labels_line.split_whitespace() {
        let (name, code) = token.split_once('=').ok_or_else(|| {
            Error::Parse(format!("label entry `{token}` is not name=code"))
        })?;
        let state = VigilanceState::parse(name)?;
        let code: usize = r.parse_usize(code)?;
        if state.code() != code {
            return Err(Error::Parse(format!(
                "label map assigns {name}={code}, but this build fixes {name}={}",
                state.code()
            )));
        }
    }

    let schema_line = r.expect("schema")?;
    let [schema_id, schema_len] = r.parse_fields(schema_line)?;
    let schema_len = r.parse_usize(schema_len)?;
    let mut names = Vec::with_capacity(schema_len);
    for _ in 0..schema_len {
        names.push(r.expect("feature")?.to_string());
    }
    let schema = FeatureSchema::from_names(names)?;
    if schema.id() != schema_id {
        return Err(Error::Parse(format!(
            "schema id `{schema_id}` does not match its feature list (`{}`)",
            schema.id()
        )));
    }

    let base_line = r.expect("base")?;
    let base_score: Vec<f64> = base_line
        .split_whitespace()
        .map(|f| r.parse_f64(f))
        .collect::<Result<_>>()?;

    let trees_line = r.expect("trees")?;
    let n_trees = r.parse_usize(trees_line)?;
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        r.set_context(format!("tree {t}"));
        let tree_line = r.expect("tree")?;
        let [round, class_kw, class, nodes_kw, n_nodes] = r.parse_fields(tree_line)?;
        if class_kw != "class" || nodes_kw != "nodes" {
            return Err(Error::Parse(format!(
                "tree {t}: malformed header `tree {tree_line}`"
            )));
        }
        let round = r.parse_usize(round)?;
        let class = r.parse_usize(class)?;
        let n_nodes = r.parse_usize(n_nodes)?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            r.set_context(format!("tree {t} node {i}"));
            let node_line = r.expect("node")?;
            let mut fields = node_line.split_whitespace();
            let idx = r.parse_usize(fields.next().unwrap_or_default())?;
            if idx != i {
                return Err(Error::Parse(format!(
                    "tree {t}: node index {idx} out of order (expected {i})"
                )));
            }
            let kind = fields.next().unwrap_or_default();
            let rest: Vec<&str> = fields.collect();
            let node = match kind {
                "split" => {
                    if rest.len() != 7 {
                        return Err(Error::Parse(format!(
                            "tree {t} node {i}: split node needs 7 fields, got {}",
                            rest.len()
                        )));
                    }
                    FlatNode::Split {
                        feature: r.parse_usize(kv(rest[0], "feature", &r)?)?,
                        threshold: r.parse_f64(kv(rest[1], "threshold", &r)?)?,
                        left: r.parse_usize(kv(rest[2], "left", &r)?)?,
                        right: r.parse_usize(kv(rest[3], "right", &r)?)?,
                        default_left: match kv(rest[4], "default", &r)? {
                            "left" => true,
                            "right" => false,
                            other => {
                                return Err(Error::Parse(format!(
                                    "tree {t} node {i}: default must be left/right, got {other}"
                                )))
                            }
                        },
                        gain: r.parse_f64(kv(rest[5], "gain", &r)?)?,
                        cover: r.parse_f64(kv(rest[6], "cover", &r)?)?,
                    }
                }
                "leaf" => {
                    if rest.len() != 2 {
                        return Err(Error::Parse(format!(
                            "tree {t} node {i}: leaf node needs 2 fields, got {}",
                            rest.len()
                        )));
                    }
                    FlatNode::Leaf {
                        weight: r.parse_f64(kv(rest[0], "weight", &r)?)?,
                        cover: r.parse_f64(kv(rest[1], "cover", &r)?)?,
                    }
                }
                other => {
                    return Err(Error::Parse(format!(
                        "tree {t} node {i}: unknown node kind `{other}`"
                    )))
                }
            };
            nodes.push(node);
        }
        let mut visited = vec![false; nodes.len()];
        let root = rebuild(&nodes, 0, &mut visited)
            .map_err(|e| Error::Parse(format!("tree {t}: {e}")))?;
        trees.push(ClassTree { round, class, root });
    }
    r.set_context("trailer");
    r.expect("end")?;

    GbtModel::from_parts(config, base_score, schema, trees)
}

/// Loads a model saved by [`save_model`].
pub fn load_model(path: impl AsRef<Path>) -> Result<GbtModel> {
    let text = fs::read_to_string(path)?;
    model_from_string(&text)
}
