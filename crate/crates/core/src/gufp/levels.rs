use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EdgePartition, GufpInstance, IntervalDemands};

/// `1/⌈1/ε⌉`: the largest reciprocal of an integer not above `ε`.
pub fn reciprocal_eps(eps: f64) -> f64 {
    assert!(eps > 0.0 && eps < 1.0, "ε must lie in (0, 1)");
    1.0 / (1.0 / eps - 1e-9).ceil()
}

/// Number of lattice steps `1/ε` when `ε` is the reciprocal of an integer.
pub fn lattice_steps(eps: f64) -> Option<u32> {
    let s = (1.0 / eps).round();
    ((s * eps - 1.0).abs() <= 1e-9 && s >= 1.0).then_some(s as u32)
}

/// Discrete peak levels `{0} ∪ {(1+ε)^l f̲^r}` per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelGrid {
    /// `levels[r][0] == 0` stands for the `−∞` level; the rest ascend.
    pub levels: Vec<Vec<f64>>,
}

impl LevelGrid {
    /// Levels from `f̲^r` (smallest positive demand of `users`) up to at least
    /// `population · f̄^r`.
    pub fn new(g: &GufpInstance, users: &[usize], eps: f64) -> Self {
        let n = g.population.max(1) as f64;
        let levels = (0..g.d())
            .map(|r| {
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                for &k in users {
                    hi = hi.max(g.peak(k, r));
                    if let Some(v) = (0..g.edges).map(|pos| g.demand(k, r, pos)).find(|&v| v > 0.0) {
                        lo = lo.min(v);
                    }
                }
                let mut grid = vec![0.0];
                if lo.is_finite() {
                    let top = ((n * hi / lo).ln() / (1.0 + eps).ln()).ceil().max(0.0) as i32;
                    grid.extend((0..=top).map(|l| (1.0 + eps).powi(l) * lo));
                }
                grid
            })
            .collect();
        Self { levels }
    }

    pub fn len(&self, r: usize) -> usize {
        self.levels[r].len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(|l| l.len() <= 1)
    }

    /// Index of the smallest level `≥ value`, if any.
    pub fn ceil_index(&self, r: usize, value: f64) -> Option<usize> {
        let lv = &self.levels[r];
        let i = lv.partition_point(|&l| l < value);
        (i < lv.len()).then_some(i)
    }
}

/// Dyadic class of a utility-to-coefficient ratio; `None` when the coefficient is zero.
pub type ClassIndex = Option<i32>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    /// Class per `(r, t)`, flattened dimension-major.
    pub key: Vec<ClassIndex>,
    pub users: Vec<usize>,
    /// `H^{q,p,r}` as `weights[r][p]`.
    pub weights: Vec<Vec<f64>>,
    /// Membership in `H^q`: dimensions with `H^{q,P_r,r} > 0`.
    pub active: Vec<bool>,
    /// `Σ_r P_r / Σ_{r∈H^q} P_r`; infinite when `H^q` is empty.
    pub alpha: f64,
}

impl Group {
    pub fn is_degenerate(&self) -> bool {
        !self.active.iter().any(|&a| a)
    }

    /// `max_{r∈H^q} 2(2C_r + α P_r)`, or `0` for a degenerate group.
    pub fn beta(&self, part: &EdgePartition) -> f64 {
        part.dims
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(dp, _)| 2.0 * (2.0 * dp.growth + self.alpha * dp.count() as f64))
            .fold(0.0, f64::max)
    }
}

/// Users surviving the utility filter, split into classes of similar
/// utility-to-coefficient ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    pub eps: f64,
    pub u_max: f64,
    /// `Î = {k : u_k ≥ ε u_max / n}`; empty when every utility is zero.
    pub survivors: Vec<usize>,
    /// `L_r = ε u_max / (n ā^r)`; infinite when no survivor has a positive coefficient.
    pub scale: Vec<f64>,
    pub groups: Vec<Group>,
    /// `group_of[k]` for every user of the instance.
    pub group_of: Vec<Option<usize>>,
}

impl Grouping {
    /// `max` of [`Group::beta`] over all groups.
    pub fn beta(&self, part: &EdgePartition) -> f64 {
        self.groups.iter().map(|q| q.beta(part)).fold(0.0, f64::max)
    }
}

/// Smallest `q` with `2^{q−1} L ≤ ratio < 2^q L`.
fn dyadic_class(ratio: f64, scale: f64) -> i32 {
    let mut q = (ratio / scale).log2().floor() as i32 + 1;
    while q > i32::MIN + 1 && 2f64.powi(q - 1) * scale > ratio {
        q -= 1;
    }
    while 2f64.powi(q) * scale <= ratio {
        q += 1;
    }
    q
}

pub fn group_users(g: &GufpInstance, part: &EdgePartition, eps: f64) -> Grouping {
    let n = g.population.max(1) as f64;
    let u_max = g.users.iter().map(|u| u.utility).fold(0.0, f64::max);
    let survivors: Vec<usize> = if u_max > 0.0 {
        (0..g.user_count())
            .filter(|&k| g.users[k].utility >= eps * u_max / n)
            .collect()
    } else {
        Vec::new()
    };

    let scale: Vec<f64> = (0..g.d())
        .map(|r| {
            let a_max = survivors
                .iter()
                .flat_map(|&k| g.users[k].demands[r].coefficients.iter().copied())
                .fold(0.0, f64::max);
            if a_max > 0.0 {
                eps * u_max / (n * a_max)
            } else {
                f64::INFINITY
            }
        })
        .collect();

    let mut by_key: BTreeMap<Vec<ClassIndex>, Vec<usize>> = BTreeMap::new();
    for &k in &survivors {
        let u = g.users[k].utility;
        let key: Vec<ClassIndex> = (0..g.d())
            .flat_map(|r| {
                let l = scale[r];
                g.users[k].demands[r]
                    .coefficients
                    .iter()
                    .map(move |&a| (a > 0.0).then(|| dyadic_class(u / a, l)))
            })
            .collect();
        by_key.entry(key).or_default().push(k);
    }

    let total_p: usize = part.total();
    let mut group_of = vec![None; g.user_count()];
    let groups: Vec<Group> = by_key
        .into_iter()
        .enumerate()
        .map(|(qi, (key, users))| {
            for &k in &users {
                group_of[k] = Some(qi);
            }
            let mut offset = 0;
            let weights: Vec<Vec<f64>> = (0..g.d())
                .map(|r| {
                    let dim = &g.dims[r];
                    let classes = &key[offset..offset + dim.terms()];
                    offset += dim.terms();
                    let dp = &part.dims[r];
                    (0..dp.count())
                        .map(|p| {
                            let last = dp.last(p);
                            classes
                                .iter()
                                .zip(&dim.bases)
                                .filter_map(|(c, b)| c.map(|q| b[last] / (2f64.powi(q) * scale[r])))
                                .sum()
                        })
                        .collect()
                })
                .collect();
            let active: Vec<bool> = weights
                .iter()
                .map(|w| w.last().is_some_and(|&h| h > 0.0))
                .collect();
            let active_p: usize = part
                .dims
                .iter()
                .zip(&active)
                .filter(|(_, &a)| a)
                .map(|(dp, _)| dp.count())
                .sum();
            let alpha = if active_p > 0 {
                total_p as f64 / active_p as f64
            } else {
                f64::INFINITY
            };
            Group {
                key,
                users,
                weights,
                active,
                alpha,
            }
        })
        .collect();

    Grouping {
        eps,
        u_max,
        survivors,
        scale,
        groups,
        group_of,
    }
}

/// `f̲_k^{p,r}` is at most `bound[r][p]` on every interval and dimension.
pub fn is_small(demands: &IntervalDemands, k: usize, bound: &[Vec<f64>]) -> bool {
    demands.lower[k]
        .iter()
        .zip(bound)
        .all(|(lo, b)| lo.iter().zip(b).all(|(l, b)| l <= b))
}
