use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::GufpInstance;

/// Consecutive intervals covering the positions of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimPartition {
    /// First position of each interval; `starts[0] == 0`.
    pub starts: Vec<usize>,
    pub edges: usize,
    pub growth: f64,
}

impl DimPartition {
    pub fn count(&self) -> usize {
        self.starts.len()
    }

    pub fn first(&self, p: usize) -> usize {
        self.starts[p]
    }

    pub fn last(&self, p: usize) -> usize {
        self.starts.get(p + 1).map_or(self.edges - 1, |s| s - 1)
    }

    pub fn range(&self, p: usize) -> RangeInclusive<usize> {
        self.first(p)..=self.last(p)
    }

    pub fn interval_of(&self, pos: usize) -> usize {
        self.starts.partition_point(|&s| s <= pos) - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePartition {
    pub dims: Vec<DimPartition>,
}

impl EdgePartition {
    pub fn count(&self, r: usize) -> usize {
        self.dims[r].count()
    }

    /// `Σ_r P_r`.
    pub fn total(&self) -> usize {
        self.dims.iter().map(DimPartition::count).sum()
    }
}

/// Splits every dimension so that each base function grows by at most `growth[r]`
/// inside an interval.
///
/// For each base `b_t` the cut points are its first positive position and then,
/// repeatedly, the first position whose value exceeds `growth` times the value at the
/// previous cut. The all-zero prefix before the first positive value of any base is
/// merged into the first interval.
pub fn build_partition(g: &GufpInstance, growth: &[f64]) -> EdgePartition {
    assert_eq!(growth.len(), g.d(), "one growth constant per dimension");
    let dims = g
        .dims
        .iter()
        .zip(growth)
        .map(|(dim, &c)| {
            assert!(c > 1.0, "growth constant must exceed 1");
            let mut cuts = BTreeSet::new();
            let mut first_positive = usize::MAX;
            for b in &dim.bases {
                let Some(mut prev) = b.iter().position(|&v| v > 0.0) else {
                    continue;
                };
                first_positive = first_positive.min(prev);
                cuts.insert(prev);
                while let Some(next) = (prev + 1..g.edges).find(|&i| b[i] > c * b[prev]) {
                    cuts.insert(next);
                    prev = next;
                }
            }
            cuts.remove(&first_positive);
            cuts.insert(0);
            DimPartition {
                starts: cuts.into_iter().collect(),
                edges: g.edges,
                growth: c,
            }
        })
        .collect();
    EdgePartition { dims }
}

/// `f̲_k^{p,r}` and `f̄_k^{p,r}` for every user, dimension and interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalDemands {
    /// `lower[k][r][p]`: smallest positive value of `f_k^r` on interval `p`, or `0`
    /// when the demand vanishes there.
    pub lower: Vec<Vec<Vec<f64>>>,
    /// `upper[k][r][p]`: value at the interval's last position.
    pub upper: Vec<Vec<Vec<f64>>>,
}

impl IntervalDemands {
    pub fn new(g: &GufpInstance, part: &EdgePartition) -> Self {
        let mut lower = Vec::with_capacity(g.user_count());
        let mut upper = Vec::with_capacity(g.user_count());
        for k in 0..g.user_count() {
            let mut lo = Vec::with_capacity(g.d());
            let mut up = Vec::with_capacity(g.d());
            for (r, dp) in part.dims.iter().enumerate() {
                lo.push(
                    (0..dp.count())
                        .map(|p| {
                            dp.range(p)
                                .map(|pos| g.demand(k, r, pos))
                                .find(|&v| v > 0.0)
                                .unwrap_or(0.0)
                        })
                        .collect(),
                );
                up.push(
                    (0..dp.count())
                        .map(|p| g.demand(k, r, dp.last(p)))
                        .collect(),
                );
            }
            lower.push(lo);
            upper.push(up);
        }
        Self { lower, upper }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gufp::{Dimension, GufpUser, Orientation, SeparableStepFunction};

    fn single_base(b: Vec<f64>) -> GufpInstance {
        let n = b.len();
        let dim = Dimension {
            orientation: Orientation::Forward,
            bases: vec![b],
            capacity: vec![1.0; n],
        };
        let user = GufpUser {
            utility: 1.0,
            demands: vec![SeparableStepFunction {
                coefficients: vec![1.0],
                start: 0,
                saturation: n - 1,
            }],
        };
        GufpInstance::new(n, vec![dim], vec![user]).unwrap()
    }

    #[test]
    fn constant_base_is_one_interval() {
        let part = build_partition(&single_base(vec![3.0; 5]), &[2.0]);
        assert_eq!(part.dims[0].starts, vec![0]);
    }

    #[test]
    fn jump_rule_by_hand() {
        let g = single_base(vec![1.0, 1.5, 4.0, 9.0]);
        let dp = &build_partition(&g, &[2.0]).dims[0];
        assert_eq!(dp.starts, vec![0, 2, 3]);
        assert_eq!(dp.range(0), 0..=1);
        assert_eq!(dp.range(2), 3..=3);
        assert_eq!(dp.interval_of(1), 0);
        assert_eq!(dp.interval_of(3), 2);
    }

    #[test]
    fn zero_prefix_is_merged() {
        let g = single_base(vec![0.0, 0.0, 1.0, 1.5]);
        assert_eq!(build_partition(&g, &[2.0]).dims[0].starts, vec![0]);
    }
}
