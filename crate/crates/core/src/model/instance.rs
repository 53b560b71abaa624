use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::objective::ObjectiveSpec;
use super::ModelError;

/// Complex per-unit quantity (impedance, demand, branch power).
pub type ComplexQuantity = Complex64;

/// Distribution line feeding node `e + 1` (edges are indexed by their child node minus one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub z: ComplexQuantity,
    /// Apparent power cap; `f64::INFINITY` means unconstrained.
    pub s_cap: f64,
    /// Squared current cap; `f64::INFINITY` means unconstrained.
    pub l_cap: f64,
}

impl Line {
    pub fn new(z: ComplexQuantity, s_cap: f64, l_cap: f64) -> Self {
        Self { z, s_cap, l_cap }
    }

    pub fn uncapped(z: ComplexQuantity) -> Self {
        Self::new(z, f64::INFINITY, f64::INFINITY)
    }
}

/// Squared voltage magnitude bounds at a non-root node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageBounds {
    pub min: f64,
    pub max: f64,
}

impl VoltageBounds {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    /// The customary ±5% band around a 1 p.u. feeder voltage.
    pub const fn nominal() -> Self {
        Self::new(0.9025, 1.1025)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandKind {
    /// Served fully or not at all.
    Inelastic,
    /// Any fraction in `[0, 1]` may be served.
    Elastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct User {
    /// Attachment node, in `1..=m`.
    pub node: usize,
    pub demand: ComplexQuantity,
    pub utility: f64,
    pub kind: DemandKind,
}

impl User {
    pub fn inelastic(node: usize, demand: ComplexQuantity, utility: f64) -> Self {
        Self {
            node,
            demand,
            utility,
            kind: DemandKind::Inelastic,
        }
    }

    pub fn elastic(node: usize, demand: ComplexQuantity) -> Self {
        Self {
            node,
            demand,
            utility: 0.0,
            kind: DemandKind::Elastic,
        }
    }

    pub fn is_inelastic(&self) -> bool {
        self.kind == DemandKind::Inelastic
    }
}

/// Rooted tree structure with breadth-first numbering, computed once per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    bfs: Vec<usize>,
    /// Nodes on the path from node 1 down to each node (inclusive); the edges of
    /// that path are exactly the edges into these nodes.
    paths: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds the topology from the parents of nodes `1..=m`.
    pub fn from_parents(parents: &[usize]) -> Result<Self, ModelError> {
        let m = parents.len();
        if m == 0 {
            return Err(ModelError::MissingFeeder);
        }
        let mut parent = vec![None; m + 1];
        let mut children = vec![Vec::new(); m + 1];
        for (i, &p) in parents.iter().enumerate() {
            let node = i + 1;
            if p > m {
                return Err(ModelError::ParentOutOfRange { node, parent: p });
            }
            if p == node {
                return Err(ModelError::Cycle { node });
            }
            parent[node] = Some(p);
            children[p].push(node);
        }
        match children[0].as_slice() {
            [1] => {}
            [] => return Err(ModelError::MissingFeeder),
            [_] => return Err(ModelError::MissingFeeder),
            many => return Err(ModelError::FeederFanout(many.len())),
        }
        for c in children.iter_mut() {
            c.sort_unstable();
        }

        let mut bfs = Vec::with_capacity(m + 1);
        let mut seen = vec![false; m + 1];
        bfs.push(0);
        seen[0] = true;
        let mut head = 0;
        while head < bfs.len() {
            let node = bfs[head];
            head += 1;
            for &c in &children[node] {
                if !seen[c] {
                    seen[c] = true;
                    bfs.push(c);
                }
            }
        }
        if let Some(node) = seen.iter().position(|s| !s) {
            // unreachable from the root, so the parent chain must loop
            return Err(ModelError::Cycle { node });
        }

        let mut paths = vec![Vec::new(); m + 1];
        for &node in bfs.iter().skip(1) {
            let p = parent[node].expect("non-root has a parent");
            let mut path = paths[p].clone();
            path.push(node);
            paths[node] = path;
        }

        Ok(Self {
            parent,
            children,
            bfs,
            paths,
        })
    }

    pub fn line(m: usize) -> Self {
        let parents: Vec<usize> = (0..m).collect();
        Self::from_parents(&parents).expect("a line is a valid tree")
    }

    /// Number of non-root nodes (equal to the number of edges).
    pub fn m(&self) -> usize {
        self.parent.len() - 1
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Breadth-first order starting at the root; siblings in index order.
    pub fn bfs_order(&self) -> &[usize] {
        &self.bfs
    }

    /// Non-root nodes on the root path of `node`, outermost first.
    pub fn path(&self, node: usize) -> &[usize] {
        &self.paths[node]
    }

    /// Whether `node` lies in the subtree rooted at `ancestor` (inclusive).
    pub fn in_subtree(&self, node: usize, ancestor: usize) -> bool {
        ancestor == 0 || node == ancestor || self.paths[node].contains(&ancestor)
    }

    /// Nodes shared by the root paths of `a` and `b`, i.e. edges of `P_a ∩ P_b`.
    pub fn common_path(&self, a: usize, b: usize) -> &[usize] {
        let (pa, pb) = (&self.paths[a], &self.paths[b]);
        let len = pa.iter().zip(pb).take_while(|(x, y)| x == y).count();
        &pa[..len]
    }

    pub fn is_line(&self) -> bool {
        self.children.iter().all(|c| c.len() <= 1)
    }

    pub fn leaves(&self) -> Vec<usize> {
        (1..=self.m())
            .filter(|&j| self.children[j].is_empty())
            .collect()
    }

    pub fn parents(&self) -> Vec<usize> {
        self.parent[1..]
            .iter()
            .map(|p| p.expect("non-root has a parent"))
            .collect()
    }
}

/// A radial distribution network with users and an objective.
///
/// Node `0` is the feeder bus; edge `e` connects `parent(e + 1)` to `e + 1`.
/// `lines` and `bounds` are indexed by edge (equivalently, child node minus one).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialInstance {
    pub v0: f64,
    pub lines: Vec<Line>,
    pub bounds: Vec<VoltageBounds>,
    pub users: Vec<User>,
    pub objective: ObjectiveSpec,
    topology: Topology,
}

impl RadialInstance {
    pub fn new(
        v0: f64,
        parents: &[usize],
        lines: Vec<Line>,
        bounds: Vec<VoltageBounds>,
        users: Vec<User>,
        objective: ObjectiveSpec,
    ) -> Result<Self, ModelError> {
        let topology = Topology::from_parents(parents)?;
        let inst = Self {
            v0,
            lines,
            bounds,
            users,
            objective,
            topology,
        };
        inst.check_structure()?;
        Ok(inst)
    }

    /// Line network `0 - 1 - ... - m`.
    pub fn line(
        v0: f64,
        lines: Vec<Line>,
        bounds: Vec<VoltageBounds>,
        users: Vec<User>,
        objective: ObjectiveSpec,
    ) -> Result<Self, ModelError> {
        let parents: Vec<usize> = (0..lines.len()).collect();
        Self::new(v0, &parents, lines, bounds, users, objective)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn m(&self) -> usize {
        self.topology.m()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn inelastic(&self) -> impl Iterator<Item = usize> + '_ {
        self.users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.is_inelastic())
            .map(|(k, _)| k)
    }

    pub fn elastic(&self) -> impl Iterator<Item = usize> + '_ {
        self.users
            .iter()
            .enumerate()
            .filter(|(_, u)| !u.is_inelastic())
            .map(|(k, _)| k)
    }

    /// Parent node of edge `e`.
    pub fn tail(&self, e: usize) -> usize {
        self.topology.parent(e + 1).expect("edge has a tail")
    }

    /// Users attached to each node.
    pub fn users_at(&self) -> Vec<Vec<usize>> {
        let mut at = vec![Vec::new(); self.m() + 1];
        for (k, u) in self.users.iter().enumerate() {
            at[u.node].push(k);
        }
        at
    }

    /// Structural checks: dimensions, ranges, finiteness and signs that the model
    /// cannot do without. Assumption checks live in [`super::validate_instance`].
    pub fn check_structure(&self) -> Result<(), ModelError> {
        let m = self.m();
        if self.lines.len() != m {
            return Err(ModelError::DimensionMismatch {
                what: "lines",
                expected: m,
                found: self.lines.len(),
            });
        }
        if self.bounds.len() != m {
            return Err(ModelError::DimensionMismatch {
                what: "voltage bounds",
                expected: m,
                found: self.bounds.len(),
            });
        }
        if !(self.v0.is_finite() && self.v0 > 0.0) {
            return Err(ModelError::Negative {
                what: "v0".into(),
            });
        }
        for (e, line) in self.lines.iter().enumerate() {
            if !(line.z.re.is_finite() && line.z.im.is_finite()) {
                return Err(ModelError::NonFinite {
                    what: format!("impedance of edge {e}"),
                });
            }
            if line.s_cap.is_nan() || line.s_cap < 0.0 {
                return Err(ModelError::Negative {
                    what: format!("apparent power cap of edge {e}"),
                });
            }
            if line.l_cap.is_nan() || line.l_cap < 0.0 {
                return Err(ModelError::Negative {
                    what: format!("current cap of edge {e}"),
                });
            }
        }
        for (e, b) in self.bounds.iter().enumerate() {
            if !(b.min.is_finite() && b.max.is_finite()) {
                return Err(ModelError::NonFinite {
                    what: format!("voltage bounds of node {}", e + 1),
                });
            }
        }
        for (k, u) in self.users.iter().enumerate() {
            if u.node == 0 || u.node > m {
                return Err(ModelError::UserNode {
                    user: k,
                    node: u.node,
                });
            }
            if !(u.demand.re.is_finite() && u.demand.im.is_finite() && u.utility.is_finite()) {
                return Err(ModelError::NonFinite {
                    what: format!("user {k}"),
                });
            }
            if u.utility < 0.0 {
                return Err(ModelError::Negative {
                    what: format!("utility of user {k}"),
                });
            }
        }
        self.objective.check(self.users.len())?;
        Ok(())
    }
}
