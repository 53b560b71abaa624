use std::collections::{BTreeMap, HashSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    DemandKind, Line, ModelError, ObjectiveSpec, PiecewiseLinear, RadialInstance, User,
    VoltageBounds,
};

pub const FORMAT_VERSION: u32 = 1;

/// On-disk form of a [`RadialInstance`].
///
/// Node ids must be `0..=m` with node `0` the feeder bus, user ids `0..n`. Missing
/// capacities (`null`) are unconstrained. The canonical form lists nodes, edges (by
/// child) and users in id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    pub nodes: Vec<NodeRecord>,
    pub v0: f64,
    pub edges: Vec<EdgeRecord>,
    pub users: Vec<UserRecord>,
    pub objective: ObjectiveRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    /// Squared voltage bounds; absent at the feeder bus, whose voltage is `v0`.
    #[serde(default)]
    pub v_min: Option<f64>,
    #[serde(default)]
    pub v_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    pub z_re: f64,
    pub z_im: f64,
    #[serde(default)]
    pub s_cap: Option<f64>,
    #[serde(default)]
    pub l_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRecord {
    pub id: usize,
    pub node: usize,
    pub s_re: f64,
    pub s_im: f64,
    #[serde(default)]
    pub utility: f64,
    pub kind: DemandKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveRecord {
    /// Generation term, through the origin.
    pub f0: PiecewiseLinear,
    /// Weight per elastic user id.
    #[serde(default)]
    pub f1: BTreeMap<usize, f64>,
    #[serde(default)]
    pub m_shift: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub generation_angle: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// One problem with an instance document, located by a JSON path.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FileIssue {
    /// Malformed structure, unknown or missing fields, bad ids, non-finite numbers.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    /// The nodes and edges do not form a tree hanging off a single feeder edge.
    #[error("tree error at {path}: {message}")]
    Tree { path: String, message: String },
    /// A quantity that must be non-negative (or positive) is not.
    #[error("sign error at {path}: {message}")]
    Sign { path: String, message: String },
}

impl FileIssue {
    pub fn path(&self) -> &str {
        match self {
            Self::Schema { path, .. } | Self::Tree { path, .. } | Self::Sign { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid instance document: {}", join(.issues))]
pub struct ParseError {
    pub issues: Vec<FileIssue>,
}

fn join(issues: &[FileIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> FileIssue {
    FileIssue::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn tree(path: impl Into<String>, message: impl Into<String>) -> FileIssue {
    FileIssue::Tree {
        path: path.into(),
        message: message.into(),
    }
}

fn sign(path: impl Into<String>, message: impl Into<String>) -> FileIssue {
    FileIssue::Sign {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses and validates a JSON instance document.
pub fn parse_instance(doc: &str) -> Result<RadialInstance, ParseError> {
    let de = &mut serde_json::Deserializer::from_str(doc);
    let file: InstanceFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ParseError {
            issues: vec![schema(path, e.into_inner().to_string())],
        }
    })?;
    file.to_instance()
}

/// Canonical JSON text of an instance.
pub fn emit_instance(inst: &RadialInstance) -> String {
    let mut out = serde_json::to_string_pretty(&InstanceFile::from_instance(inst))
        .expect("instance files always serialize");
    out.push('\n');
    out
}

/// `emit(parse(doc))`.
pub fn canonicalize(doc: &str) -> Result<String, ParseError> {
    parse_instance(doc).map(|inst| emit_instance(&inst))
}

fn finite(v: f64, path: &str, issues: &mut Vec<FileIssue>) -> bool {
    if v.is_finite() {
        true
    } else {
        issues.push(schema(path, "value is not finite"));
        false
    }
}

fn capacity(cap: Option<f64>, path: &str, issues: &mut Vec<FileIssue>) -> f64 {
    match cap {
        None => f64::INFINITY,
        Some(c) if finite(c, path, issues) => {
            if c < 0.0 {
                issues.push(sign(path, format!("capacity {c} is negative")));
            }
            c
        }
        Some(_) => f64::INFINITY,
    }
}

impl InstanceFile {
    pub fn from_instance(inst: &RadialInstance) -> Self {
        let m = inst.m();
        let cap = |c: f64| c.is_finite().then_some(c);
        let mut nodes = vec![NodeRecord {
            id: 0,
            parent: None,
            v_min: None,
            v_max: None,
        }];
        nodes.extend((1..=m).map(|j| NodeRecord {
            id: j,
            parent: inst.topology().parent(j),
            v_min: Some(inst.bounds[j - 1].min),
            v_max: Some(inst.bounds[j - 1].max),
        }));
        let edges = inst
            .lines
            .iter()
            .enumerate()
            .map(|(e, line)| EdgeRecord {
                from: inst.tail(e),
                to: e + 1,
                z_re: line.z.re,
                z_im: line.z.im,
                s_cap: cap(line.s_cap),
                l_cap: cap(line.l_cap),
            })
            .collect();
        let users = inst
            .users
            .iter()
            .enumerate()
            .map(|(k, u)| UserRecord {
                id: k,
                node: u.node,
                s_re: u.demand.re,
                s_im: u.demand.im,
                utility: u.utility,
                kind: u.kind,
            })
            .collect();
        Self {
            version: FORMAT_VERSION,
            nodes,
            v0: inst.v0,
            edges,
            users,
            objective: ObjectiveRecord {
                f0: inst.objective.generation.clone(),
                f1: inst.objective.elastic_weights.clone(),
                m_shift: inst.objective.m_shift,
                generation_angle: inst.objective.generation_angle,
            },
        }
    }

    /// Validates the document, collecting every issue found before giving up.
    pub fn to_instance(&self) -> Result<RadialInstance, ParseError> {
        let mut issues = Vec::new();
        if self.version != FORMAT_VERSION {
            issues.push(schema(
                "version",
                format!("unsupported version {}, expected {FORMAT_VERSION}", self.version),
            ));
        }
        if finite(self.v0, "v0", &mut issues) && self.v0 <= 0.0 {
            issues.push(sign("v0", "feeder voltage must be positive"));
        }

        // nodes
        let count = self.nodes.len();
        let mut slot: Vec<Option<usize>> = vec![None; count];
        for (i, node) in self.nodes.iter().enumerate() {
            let path = format!("nodes[{i}].id");
            if node.id >= count {
                issues.push(schema(path, format!("node id {} outside 0..{count}", node.id)));
            } else if slot[node.id].is_some() {
                issues.push(schema(path, format!("duplicate node id {}", node.id)));
            } else {
                slot[node.id] = Some(i);
            }
        }
        if count < 2 {
            issues.push(tree("nodes", "need the feeder bus and at least one more node"));
        }
        let mut parents = vec![0usize; count.saturating_sub(1)];
        let mut bounds = vec![VoltageBounds::nominal(); count.saturating_sub(1)];
        for (i, node) in self.nodes.iter().enumerate() {
            let at = |field: &str| format!("nodes[{i}].{field}");
            match (node.id, node.parent) {
                (0, None) => {}
                (0, Some(_)) => issues.push(tree(at("parent"), "node 0 is the root")),
                (_, None) => issues.push(tree(at("parent"), "only node 0 may lack a parent")),
                (id, Some(p)) if p >= count || p == id => {
                    issues.push(tree(at("parent"), format!("invalid parent {p}")))
                }
                (id, Some(p)) if id < count => parents[id - 1] = p,
                _ => {}
            }
            if node.id == 0 {
                if node.v_min.is_some() || node.v_max.is_some() {
                    issues.push(schema(at("v_min"), "the feeder voltage is fixed by v0"));
                }
                continue;
            }
            let (Some(lo), Some(hi)) = (node.v_min, node.v_max) else {
                issues.push(schema(at("v_min"), "non-root nodes need v_min and v_max"));
                continue;
            };
            let ok = finite(lo, &at("v_min"), &mut issues) & finite(hi, &at("v_max"), &mut issues);
            if ok {
                if lo < 0.0 {
                    issues.push(sign(at("v_min"), "squared voltage bound is negative"));
                }
                if lo > hi {
                    issues.push(schema(at("v_max"), "v_max is below v_min"));
                }
            }
            if node.id < count {
                bounds[node.id - 1] = VoltageBounds::new(lo, hi);
            }
        }

        // edges
        let mut lines = vec![None; count.saturating_sub(1)];
        for (i, edge) in self.edges.iter().enumerate() {
            let at = |field: &str| format!("edges[{i}].{field}");
            let mut z = Complex64::new(0.0, 0.0);
            if finite(edge.z_re, &at("z_re"), &mut issues) {
                if edge.z_re < 0.0 {
                    issues.push(sign(at("z_re"), "resistance is negative"));
                }
                z.re = edge.z_re;
            }
            if finite(edge.z_im, &at("z_im"), &mut issues) {
                z.im = edge.z_im;
            }
            let s_cap = capacity(edge.s_cap, &at("s_cap"), &mut issues);
            let l_cap = capacity(edge.l_cap, &at("l_cap"), &mut issues);
            if edge.to == 0 || edge.to >= count {
                issues.push(tree(at("to"), format!("edge must end at a non-root node, got {}", edge.to)));
                continue;
            }
            if lines[edge.to - 1].is_some() {
                issues.push(tree(at("to"), format!("node {} has two incoming edges", edge.to)));
                continue;
            }
            if self.nodes.get(slot[edge.to].unwrap_or(usize::MAX)).and_then(|n| n.parent)
                != Some(edge.from)
            {
                issues.push(tree(
                    at("from"),
                    format!("edge into node {} must start at its parent", edge.to),
                ));
            }
            lines[edge.to - 1] = Some(Line::new(z, s_cap, l_cap));
        }
        for (e, line) in lines.iter().enumerate() {
            if line.is_none() && slot.get(e + 1).is_some_and(Option::is_some) {
                issues.push(tree("edges", format!("node {} has no incoming edge", e + 1)));
            }
        }

        // users
        let n = self.users.len();
        let mut seen = HashSet::new();
        let mut users = vec![User::elastic(1, Complex64::new(0.0, 0.0)); n];
        for (i, rec) in self.users.iter().enumerate() {
            let at = |field: &str| format!("users[{i}].{field}");
            if rec.id >= n {
                issues.push(schema(at("id"), format!("user id {} outside 0..{n}", rec.id)));
            } else if !seen.insert(rec.id) {
                issues.push(schema(at("id"), format!("duplicate user id {}", rec.id)));
            }
            if rec.node == 0 || rec.node >= count {
                issues.push(tree(at("node"), format!("users attach to non-root nodes, got {}", rec.node)));
            }
            let ok = finite(rec.s_re, &at("s_re"), &mut issues)
                & finite(rec.s_im, &at("s_im"), &mut issues)
                & finite(rec.utility, &at("utility"), &mut issues);
            if ok && rec.utility < 0.0 {
                issues.push(sign(at("utility"), "utility is negative"));
            }
            if rec.id < n {
                users[rec.id] = User {
                    node: rec.node,
                    demand: Complex64::new(rec.s_re, rec.s_im),
                    utility: rec.utility,
                    kind: rec.kind,
                };
            }
        }

        // objective
        let obj = &self.objective;
        if !obj.f0.is_well_formed() {
            issues.push(schema(
                "objective.f0",
                "need one more slope than breakpoints, increasing finite breakpoints and finite slopes",
            ));
        }
        for (&k, &w) in &obj.f1 {
            let path = format!("objective.f1.{k}");
            if self.users.iter().find(|u| u.id == k).map(|u| u.kind) != Some(DemandKind::Elastic) {
                issues.push(schema(path, format!("user {k} is not an elastic user")));
            } else if finite(w, &path, &mut issues) && w < 0.0 {
                issues.push(sign(path, "elastic weight is negative"));
            }
        }
        finite(obj.m_shift, "objective.m_shift", &mut issues);
        finite(obj.generation_angle, "objective.generation_angle", &mut issues);

        if !issues.is_empty() {
            return Err(ParseError { issues });
        }
        let objective = ObjectiveSpec {
            generation: obj.f0.clone(),
            elastic_weights: obj.f1.clone(),
            m_shift: obj.m_shift,
            generation_angle: obj.generation_angle,
        };
        let lines = lines.into_iter().map(|l| l.expect("checked above")).collect();
        RadialInstance::new(self.v0, &parents, lines, bounds, users, objective).map_err(|e| {
            let issue = match &e {
                ModelError::MissingFeeder
                | ModelError::FeederFanout(_)
                | ModelError::ParentOutOfRange { .. }
                | ModelError::Cycle { .. } => tree("nodes", e.to_string()),
                ModelError::Negative { .. } => sign("$", e.to_string()),
                ModelError::Objective(_) => schema("objective", e.to_string()),
                _ => schema("$", e.to_string()),
            };
            ParseError { issues: vec![issue] }
        })
    }
}
