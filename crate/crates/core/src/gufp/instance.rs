use serde::{Deserialize, Serialize};

use super::GufpError;

/// Direction in which a dimension's demands and capacities are non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Non-decreasing from the root edge outwards.
    Forward,
    /// Non-decreasing from the last edge back towards the root.
    Reversed,
}

/// Shared base functions and the capacity of one dimension.
///
/// Everything is indexed by *position* in the dimension's own order, so position `0`
/// is edge `0` for [`Orientation::Forward`] and the last edge for
/// [`Orientation::Reversed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub orientation: Orientation,
    /// `bases[t][pos]`, each non-negative and non-decreasing in `pos`.
    pub bases: Vec<Vec<f64>>,
    /// Non-negative and non-decreasing in `pos`.
    pub capacity: Vec<f64>,
}

impl Dimension {
    pub fn terms(&self) -> usize {
        self.bases.len()
    }
}

/// `f(pos) = Σ_t a_t · b_t(clamp(pos))`: zero before `start`, following the bases up
/// to `saturation` and constant afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableStepFunction {
    pub coefficients: Vec<f64>,
    pub start: usize,
    pub saturation: usize,
}

impl SeparableStepFunction {
    pub fn value(&self, bases: &[Vec<f64>], pos: usize) -> f64 {
        if pos < self.start {
            return 0.0;
        }
        let at = pos.min(self.saturation);
        self.coefficients
            .iter()
            .zip(bases)
            .map(|(a, b)| a * b[at])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GufpUser {
    pub utility: f64,
    /// One demand function per dimension.
    pub demands: Vec<SeparableStepFunction>,
}

/// A d-dimensional packing instance on a line of `edges` edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GufpInstance {
    pub edges: usize,
    pub dims: Vec<Dimension>,
    pub users: Vec<GufpUser>,
    /// The `n` in the utility filter `u_k ≥ ε u_max / n` and the level count. Equals
    /// the user count unless the instance was derived from a larger problem.
    pub population: usize,
}

impl GufpInstance {
    pub fn new(
        edges: usize,
        dims: Vec<Dimension>,
        users: Vec<GufpUser>,
    ) -> Result<Self, GufpError> {
        let population = users.len();
        let g = Self {
            edges,
            dims,
            users,
            population,
        };
        g.check()?;
        Ok(g)
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// Position of edge `e` in the order of dimension `r`.
    pub fn position(&self, r: usize, e: usize) -> usize {
        match self.dims[r].orientation {
            Orientation::Forward => e,
            Orientation::Reversed => self.edges - 1 - e,
        }
    }

    /// Edge at position `pos` in the order of dimension `r`.
    pub fn edge(&self, r: usize, pos: usize) -> usize {
        self.position(r, pos)
    }

    /// `f_k^r` at position `pos` of dimension `r`.
    pub fn demand(&self, k: usize, r: usize, pos: usize) -> f64 {
        self.users[k].demands[r].value(&self.dims[r].bases, pos)
    }

    /// `f_k^r(e)` for edge index `e`.
    pub fn evaluate_demand(&self, k: usize, r: usize, e: usize) -> f64 {
        self.demand(k, r, self.position(r, e))
    }

    /// `max_e f_k^r(e)`, attained at the last position.
    pub fn peak(&self, k: usize, r: usize) -> f64 {
        self.demand(k, r, self.edges - 1)
    }

    /// `Σ_k f_k^r(pos) x_k` for every position of dimension `r`.
    pub fn load(&self, r: usize, x: &[f64]) -> Vec<f64> {
        (0..self.edges)
            .map(|pos| {
                x.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(k, &v)| self.demand(k, r, pos) * v)
                    .sum()
            })
            .collect()
    }

    pub fn utility(&self, x: &[f64]) -> f64 {
        self.users.iter().zip(x).map(|(u, v)| u.utility * v).sum()
    }

    pub fn check(&self) -> Result<(), GufpError> {
        let n = self.edges;
        if n == 0 {
            return Err(GufpError::Shape("a GUFP instance needs at least one edge".into()));
        }
        for (r, dim) in self.dims.iter().enumerate() {
            if dim.capacity.len() != n || dim.bases.iter().any(|b| b.len() != n) {
                return Err(GufpError::Shape(format!("dimension {r}: series length differs from {n} edges")));
            }
            if dim.bases.is_empty() {
                return Err(GufpError::Shape(format!("dimension {r} has no base functions")));
            }
            for (t, b) in dim.bases.iter().enumerate() {
                check_series(b, &format!("base {t} of dimension {r}"))?;
            }
            check_series(&dim.capacity, &format!("capacity of dimension {r}"))?;
        }
        for (k, u) in self.users.iter().enumerate() {
            if !(u.utility.is_finite() && u.utility >= 0.0) {
                return Err(GufpError::Negative(format!("utility of user {k}")));
            }
            if u.demands.len() != self.d() {
                return Err(GufpError::Shape(format!("user {k} has {} demand functions", u.demands.len())));
            }
            for (r, f) in u.demands.iter().enumerate() {
                if f.coefficients.len() != self.dims[r].terms() {
                    return Err(GufpError::Shape(format!("user {k}, dimension {r}: coefficient count")));
                }
                if f.coefficients.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                    return Err(GufpError::Negative(format!("coefficient of user {k} in dimension {r}")));
                }
                if f.start > f.saturation || f.saturation >= n {
                    return Err(GufpError::Shape(format!(
                        "user {k}, dimension {r}: need start ≤ saturation < {n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_series(v: &[f64], what: &str) -> Result<(), GufpError> {
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(GufpError::Negative(what.to_string()));
    }
    if v.windows(2).any(|w| w[1] < w[0]) {
        return Err(GufpError::NotMonotone(what.to_string()));
    }
    Ok(())
}

/// Absolute slack allowed on a capacity `c`: `1e−9 · (1 + |c|)`.
pub fn capacity_slack(c: f64) -> f64 {
    1e-9 * (1.0 + c.abs())
}

/// Whether `Σ_k f_k^r(e) x_k ≤ c^r(e)` holds on every edge and dimension, up to
/// [`capacity_slack`].
pub fn check_gufp_feasible(g: &GufpInstance, x: &[f64]) -> bool {
    (0..g.d()).all(|r| {
        g.load(r, x)
            .iter()
            .zip(&g.dims[r].capacity)
            .all(|(l, c)| *l <= c + capacity_slack(*c))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim(bases: Vec<Vec<f64>>, capacity: Vec<f64>) -> Dimension {
        Dimension {
            orientation: Orientation::Forward,
            bases,
            capacity,
        }
    }

    fn user(utility: f64, a: Vec<f64>, start: usize, saturation: usize) -> GufpUser {
        GufpUser {
            utility,
            demands: vec![SeparableStepFunction {
                coefficients: a,
                start,
                saturation,
            }],
        }
    }

    #[test]
    fn three_piece_evaluation() {
        let dim = one_dim(
            vec![vec![0.5, 1.0, 2.0, 3.0], vec![0.25, 0.5, 0.5, 1.0]],
            vec![10.0; 4],
        );
        let g = GufpInstance::new(4, vec![dim], vec![user(1.0, vec![2.0, 3.0], 1, 2)]).unwrap();
        assert_eq!(g.demand(0, 0, 0), 0.0);
        assert_eq!(g.demand(0, 0, 1), 2.0 * 1.0 + 3.0 * 0.5);
        assert_eq!(g.demand(0, 0, 2), 2.0 * 2.0 + 3.0 * 0.5);
        assert_eq!(g.demand(0, 0, 3), g.demand(0, 0, 2));
    }

    #[test]
    fn reversed_positions() {
        let dim = Dimension {
            orientation: Orientation::Reversed,
            bases: vec![vec![1.0; 3]],
            capacity: vec![1.0; 3],
        };
        let g = GufpInstance::new(3, vec![dim], vec![user(1.0, vec![1.0], 1, 1)]).unwrap();
        assert_eq!(g.position(0, 0), 2);
        assert_eq!(g.evaluate_demand(0, 0, 2), 0.0);
        assert_eq!(g.evaluate_demand(0, 0, 1), 1.0);
        assert_eq!(g.evaluate_demand(0, 0, 0), 1.0);
    }

    #[test]
    fn rejects_decreasing_capacity() {
        let dim = one_dim(vec![vec![1.0, 1.0]], vec![2.0, 1.0]);
        assert!(matches!(
            GufpInstance::new(2, vec![dim], vec![]),
            Err(GufpError::NotMonotone(_))
        ));
    }

    #[test]
    fn feasibility_verdicts() {
        let dim = one_dim(vec![vec![1.0, 2.0]], vec![1.0, 1.5]);
        let g = GufpInstance::new(2, vec![dim], vec![user(1.0, vec![1.0], 0, 1)]).unwrap();
        assert!(check_gufp_feasible(&g, &[0.0]));
        assert!(!check_gufp_feasible(&g, &[1.0]));
    }
}
