//! JSON tree file format.
//!
//! ```json
//! {
//!   "leaf_weights": [0.125, 0.125, 0.25, 0.5],
//!   "structure": [2, 2, 0, 0, 2, 0, 0],
//!   "measures": [1.0, 0.25, 0.125, 0.125, 0.75, 0.25, 0.5]
//! }
//! ```
//!
//! `structure` lists the number of children of every node in depth-first
//! preorder (children in stored order, 0 for a leaf). The nested form, where a
//! node is the array of its children and a leaf is `[]`, is accepted as well:
//! the example above is `[[[], []], [[], []]]`. `leaf_weights` follow the
//! canonical leaf order. `measures` is optional and, when present, lists one
//! measure per node in the same preorder; it is checked against the leaf
//! weights unless [`MeasurePolicy::Trust`] is requested.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DyadicTree, TreeError, MAX_LEAVES};
use crate::scalar::Real;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryPolicy {
    /// Merge single-child cubes into their child.
    #[default]
    Collapse,
    /// Fail on the first single-child cube.
    Reject,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurePolicy {
    /// Explicit measures must agree with the leaf weights.
    #[default]
    Verify,
    /// Keep explicit measures as given; structural checks report problems.
    Trust,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    #[serde(default)]
    pub unary: UnaryPolicy,
    #[serde(default)]
    pub measures: MeasurePolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Structure {
    Counts(Vec<usize>),
    Nested(Nested),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Nested(pub Vec<Nested>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub leaf_weights: Vec<f64>,
    pub structure: Structure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measures: Option<Vec<f64>>,
}

impl TreeFile {
    pub fn from_tree<T: Real>(tree: &DyadicTree<T>) -> Self {
        Self {
            leaf_weights: tree.leaf_measures().iter().map(|w| w.as_f64()).collect(),
            structure: Structure::Counts(tree.child_counts()),
            measures: None,
        }
    }

    pub fn into_tree<T: Real>(self, options: LoadOptions) -> Result<DyadicTree<T>, TreeError> {
        if self.leaf_weights.len() > MAX_LEAVES {
            return Err(TreeError::TooLarge {
                leaves: self.leaf_weights.len() as u128,
                limit: MAX_LEAVES,
            });
        }
        let children = match &self.structure {
            Structure::Counts(counts) => counts_to_children(counts)?,
            Structure::Nested(root) => nested_to_children(root),
        };
        let weights: Vec<T> = self.leaf_weights.iter().map(|&w| T::lit(w)).collect();
        let explicit: Option<Vec<T>> = self
            .measures
            .as_ref()
            .map(|m| m.iter().map(|&x| T::lit(x)).collect());
        DyadicTree::assemble(
            &children,
            &weights,
            explicit.as_deref(),
            options.unary,
            options.measures,
        )
    }
}

fn counts_to_children(counts: &[usize]) -> Result<Vec<Vec<usize>>, TreeError> {
    if counts.is_empty() {
        return Err(TreeError::Structure("empty structure".into()));
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
    // (node, children still to attach)
    let mut open: Vec<(usize, usize)> = Vec::new();
    for (v, &c) in counts.iter().enumerate() {
        if v > 0 {
            let Some(top) = open.last_mut() else {
                return Err(TreeError::Structure(format!(
                    "node {v} lies outside the root's subtree"
                )));
            };
            children[top.0].push(v);
            top.1 -= 1;
            if top.1 == 0 {
                open.pop();
            }
        }
        if c > 0 {
            open.push((v, c));
        }
        // Pop any parents completed by a leaf.
        while matches!(open.last(), Some(&(_, 0))) {
            open.pop();
        }
    }
    if let Some(&(v, missing)) = open.last() {
        return Err(TreeError::Structure(format!(
            "node {v} is missing {missing} children"
        )));
    }
    Ok(children)
}

fn nested_to_children(root: &Nested) -> Vec<Vec<usize>> {
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<(&Nested, Option<usize>)> = vec![(root, None)];
    while let Some((node, parent)) = stack.pop() {
        let id = children.len();
        children.push(Vec::new());
        if let Some(p) = parent {
            children[p].push(id);
        }
        for child in node.0.iter().rev() {
            stack.push((child, Some(id)));
        }
    }
    children
}

pub fn load_tree<T: Real>(path: &Path, options: LoadOptions) -> Result<DyadicTree<T>, TreeError> {
    let text = fs::read_to_string(path)?;
    let file: TreeFile = serde_json::from_str(&text)?;
    file.into_tree(options)
}

pub fn save_tree<T: Real>(tree: &DyadicTree<T>, path: &Path) -> Result<(), TreeError> {
    let text = serde_json::to_string_pretty(&TreeFile::from_tree(tree))?;
    fs::write(path, text + "\n")?;
    Ok(())
}
