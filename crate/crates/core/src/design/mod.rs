//! Kernel structure (loops, arrays) and directive configurations.
//!
//! A kernel is described by a small JSON document rather than parsed from
//! C/C++ source: the loop forest with trip counts, the arrays with their
//! dimension sizes, and which array dimensions each loop body touches.

mod config;
mod tcl;

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    config_hash, encode_feature_vector, ArrayDirective, ArrayRecord, DirectiveConfig, FeatureRecord, LoopDirective,
    LoopRecord, PartitionType,
};
pub use tcl::{emit_tcl, project_settings_default, ProjectSettings};

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("design parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid design: {0}")]
    Invalid(String),
    #[error("unknown {kind} `{name}`")]
    UnknownSite { kind: &'static str, name: String },
    #[error("invalid feature record for `{name}`: {reason}")]
    BadRecord { name: String, reason: String },
}

/// One loop of the loop forest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopInfo {
    pub name: String,
    pub trip_count: u64,
    /// Only the innermost loop has content, no inter-loop logic, constant bounds.
    #[serde(default = "default_true")]
    pub is_perfect: bool,
    /// `(array name, 1-based dimension index)` pairs accessed by this loop's body.
    #[serde(default)]
    pub accessed_arrays: Vec<(String, usize)>,
    #[serde(default)]
    pub children: Vec<LoopInfo>,
}

fn default_true() -> bool {
    true
}

impl LoopInfo {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Number of loop levels in the subtree rooted here (a leaf has height 1).
    pub fn height(&self) -> usize {
        1 + self.children.iter().map(LoopInfo::height).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub name: String,
    pub dims: Vec<u64>,
}

impl ArrayInfo {
    /// Size of the 1-based dimension `dim`.
    pub fn dim_size(&self, dim: usize) -> Option<u64> {
        dim.checked_sub(1).and_then(|i| self.dims.get(i)).copied()
    }
}

/// Structural metadata of an HLS kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HlsDesign {
    #[serde(rename = "kernel")]
    pub kernel_name: String,
    pub loops: Vec<LoopInfo>,
    pub arrays: Vec<ArrayInfo>,
    #[serde(rename = "source", default, skip_serializing_if = "Option::is_none")]
    pub source_path: Option<PathBuf>,
}

/// A loop visited in declaration (pre-order) order with its nesting context.
#[derive(Debug, Clone, Copy)]
pub struct LoopNode<'a> {
    pub info: &'a LoopInfo,
    /// Index of the parent in the pre-order listing.
    pub parent: Option<usize>,
    /// 1 for a root loop.
    pub depth: usize,
}

impl HlsDesign {
    /// Parses and validates a design document.
    pub fn from_json(text: &str) -> Result<Self, DesignError> {
        let design: HlsDesign = serde_json::from_str(text)?;
        design.validate()?;
        Ok(design)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let invalid = |msg: String| Err(DesignError::Invalid(msg));
        if self.kernel_name.trim().is_empty() {
            return invalid("kernel name is empty".into());
        }
        if self.loops.is_empty() {
            return invalid("design has no loops".into());
        }
        let mut array_names = HashSet::new();
        for array in &self.arrays {
            if !array_names.insert(array.name.as_str()) {
                return invalid(format!("duplicate array name `{}`", array.name));
            }
            if array.dims.is_empty() {
                return invalid(format!("array `{}` has no dimensions", array.name));
            }
            if array.dims.contains(&0) {
                return invalid(format!("array `{}` has a zero-sized dimension", array.name));
            }
        }
        let mut loop_names = HashSet::new();
        for node in self.loop_nodes() {
            let l = node.info;
            if !loop_names.insert(l.name.as_str()) {
                return invalid(format!("duplicate loop name `{}`", l.name));
            }
            if l.trip_count == 0 {
                return invalid(format!("loop `{}` has trip_count 0", l.name));
            }
            if l.is_perfect && l.children.len() > 1 {
                return invalid(format!("loop `{}` is marked perfect but has {} sub-loops", l.name, l.children.len()));
            }
            for (array, dim) in &l.accessed_arrays {
                let Some(info) = self.array(array) else {
                    return invalid(format!("loop `{}` accesses unknown array `{array}`", l.name));
                };
                if info.dim_size(*dim).is_none() {
                    return invalid(format!(
                        "loop `{}` accesses dimension {dim} of `{array}`, which has {} dimensions",
                        l.name,
                        info.dims.len()
                    ));
                }
            }
        }
        Ok(())
    }

    /// All loops in declaration order (pre-order traversal of the forest).
    pub fn loop_nodes(&self) -> Vec<LoopNode<'_>> {
        fn walk<'a>(l: &'a LoopInfo, parent: Option<usize>, depth: usize, out: &mut Vec<LoopNode<'a>>) {
            let idx = out.len();
            out.push(LoopNode { info: l, parent, depth });
            for c in &l.children {
                walk(c, Some(idx), depth + 1, out);
            }
        }
        let mut out = Vec::new();
        for l in &self.loops {
            walk(l, None, 1, &mut out);
        }
        out
    }

    pub fn find_loop(&self, name: &str) -> Option<&LoopInfo> {
        fn find<'a>(ls: &'a [LoopInfo], name: &str) -> Option<&'a LoopInfo> {
            ls.iter().find_map(|l| if l.name == name { Some(l) } else { find(&l.children, name) })
        }
        find(&self.loops, name)
    }

    pub fn array(&self, name: &str) -> Option<&ArrayInfo> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Ancestors of `name` from the root down, excluding the loop itself.
    pub fn loop_path(&self, name: &str) -> Option<Vec<&LoopInfo>> {
        let nodes = self.loop_nodes();
        let idx = nodes.iter().position(|n| n.info.name == name)?;
        let mut path = Vec::new();
        let mut cur = nodes[idx].parent;
        while let Some(p) = cur {
            path.push(nodes[p].info);
            cur = nodes[p].parent;
        }
        path.reverse();
        Some(path)
    }

    pub fn loop_count(&self) -> usize {
        self.loop_nodes().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_loops_rejected() {
        let err = HlsDesign::from_json(r#"{"kernel":"k","loops":[],"arrays":[]}"#).unwrap_err();
        assert!(matches!(err, DesignError::Invalid(_)));
    }

    #[test]
    fn missing_field_is_named() {
        let err = HlsDesign::from_json(r#"{"kernel":"k","loops":[{"name":"l"}],"arrays":[]}"#).unwrap_err();
        assert!(err.to_string().contains("trip_count"), "{err}");
    }

    #[test]
    fn duplicate_loop_names_rejected() {
        let doc = r#"{"kernel":"k","loops":[
            {"name":"a","trip_count":4,"children":[{"name":"a","trip_count":2}]}],"arrays":[]}"#;
        let err = HlsDesign::from_json(doc).unwrap_err();
        assert!(err.to_string().contains("duplicate loop"), "{err}");
    }

    #[test]
    fn duplicate_array_names_rejected() {
        let doc = r#"{"kernel":"k","loops":[{"name":"a","trip_count":4}],
            "arrays":[{"name":"X","dims":[4]},{"name":"X","dims":[2]}]}"#;
        assert!(HlsDesign::from_json(doc).is_err());
    }

    #[test]
    fn zero_trip_and_bad_access_rejected() {
        let zero = r#"{"kernel":"k","loops":[{"name":"a","trip_count":0}],"arrays":[]}"#;
        assert!(HlsDesign::from_json(zero).is_err());
        let bad_dim = r#"{"kernel":"k","loops":[{"name":"a","trip_count":4,
            "accessed_arrays":[["X",2]]}],"arrays":[{"name":"X","dims":[4]}]}"#;
        assert!(HlsDesign::from_json(bad_dim).is_err());
    }

    #[test]
    fn perfect_loop_with_two_children_rejected() {
        let doc = r#"{"kernel":"k","loops":[{"name":"o","trip_count":4,"is_perfect":true,
            "children":[{"name":"a","trip_count":2},{"name":"b","trip_count":2}]}],"arrays":[]}"#;
        assert!(HlsDesign::from_json(doc).is_err());
    }

    #[test]
    fn loop_path_and_height() {
        let d = crate::fixtures::gemm();
        let path: Vec<_> = d.loop_path("k").unwrap().iter().map(|l| l.name.clone()).collect();
        assert_eq!(path, ["i", "j"]);
        assert_eq!(d.loops[0].height(), 3);
        let depths: Vec<_> = d.loop_nodes().iter().map(|n| n.depth).collect();
        assert_eq!(depths, [1, 2, 3]);
    }
}
