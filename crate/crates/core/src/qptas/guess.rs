use serde::{Deserialize, Serialize};

use super::QptasPlan;
use crate::gufp::is_small;

/// Large set, peak levels and the derived small set of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupGuess {
    /// Packing indices pinned to `1`.
    pub large: Vec<usize>,
    /// Level index of `h^{q,p,r}` as `levels[r][p]`, non-decreasing in `p`.
    pub levels: Vec<Vec<usize>>,
    /// `h^{q,p,r}` as `peaks[r][p]`.
    pub peaks: Vec<Vec<f64>>,
    /// `B^{q,p,r} = ε² (h^{q,p,r} + Σ_{k∈L^q} f̄_k^{p,r})`.
    pub thresholds: Vec<Vec<f64>>,
    /// Users of the group outside `large` whose demands stay below the thresholds.
    pub small: Vec<usize>,
}

/// One guess `(L, h)` over all groups, in group order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GuessConfig {
    pub groups: Vec<GroupGuess>,
}

impl GroupGuess {
    pub fn new(plan: &QptasPlan, q: usize, large: Vec<usize>, levels: Vec<Vec<usize>>) -> Self {
        let eps = plan.eps;
        let peaks: Vec<Vec<f64>> = levels
            .iter()
            .enumerate()
            .map(|(r, ls)| ls.iter().map(|&i| plan.grid.levels[r][i]).collect())
            .collect();
        let thresholds: Vec<Vec<f64>> = peaks
            .iter()
            .enumerate()
            .map(|(r, hs)| {
                hs.iter()
                    .enumerate()
                    .map(|(p, &h)| {
                        let big: f64 = large.iter().map(|&k| plan.demands.upper[k][r][p]).sum();
                        eps * eps * (h + big)
                    })
                    .collect()
            })
            .collect();
        let small = plan.grouping.groups[q]
            .users
            .iter()
            .copied()
            .filter(|k| !large.contains(k) && is_small(&plan.demands, *k, &thresholds))
            .collect();
        Self {
            large,
            levels,
            peaks,
            thresholds,
            small,
        }
    }
}

/// Largest allowed large set: `⌊Σ_r P_r / ε²⌋`.
pub fn max_large(plan: &QptasPlan) -> usize {
    let bound = plan.partition.total() as f64 / (plan.eps * plan.eps);
    bound.floor().min(usize::MAX as f64) as usize
}

fn log10_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k)
        .map(|i| ((n - k + i) as f64).log10() - (i as f64).log10())
        .sum()
}

fn log10_sum(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (1.0 + 10f64.powf(lo - hi)).log10()
}

/// `log10` of the number of guesses the full enumeration would visit.
pub fn guess_count_log10(plan: &QptasPlan) -> f64 {
    let cap = max_large(plan);
    plan.grouping
        .groups
        .iter()
        .map(|group| {
            let n = group.users.len();
            let subsets = (0..=n.min(cap))
                .map(|s| log10_binomial(n, s))
                .fold(f64::NEG_INFINITY, log10_sum);
            // non-decreasing level sequences of length P_r over |F^r| levels
            let levels: f64 = (0..plan.partition.dims.len())
                .map(|r| {
                    let f = plan.grid.len(r);
                    let p = plan.partition.count(r);
                    log10_binomial(f + p - 1, p)
                })
                .sum();
            subsets + levels
        })
        .sum()
}

/// Up to `limit` choices `(L^q, level indices)` for group `q`, ordered by subset size,
/// then lexicographically by subset, then lexicographically by level sequences with
/// dimension 0 most significant.
fn group_choices(plan: &QptasPlan, q: usize, limit: usize) -> Vec<(Vec<usize>, Vec<Vec<usize>>)> {
    let users = &plan.grouping.groups[q].users;
    let d = plan.partition.dims.len();
    let mut level_vectors: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for r in 0..d {
        let mut seqs = Vec::new();
        nondecreasing(plan.grid.len(r), plan.partition.count(r), &mut Vec::new(), &mut seqs, limit);
        let mut next = Vec::new();
        'fill: for prefix in &level_vectors {
            for s in &seqs {
                if next.len() >= limit {
                    break 'fill;
                }
                let mut v = prefix.clone();
                v.push(s.clone());
                next.push(v);
            }
        }
        level_vectors = next;
    }

    let mut out = Vec::new();
    for size in 0..=users.len().min(max_large(plan)) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let subset: Vec<usize> = idx.iter().map(|&i| users[i]).collect();
            for levels in &level_vectors {
                if out.len() >= limit {
                    return out;
                }
                out.push((subset.clone(), levels.clone()));
            }
            if !next_combination(&mut idx, users.len()) {
                break;
            }
        }
    }
    out
}

fn nondecreasing(levels: usize, len: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, limit: usize) {
    if out.len() >= limit {
        return;
    }
    if cur.len() == len {
        out.push(cur.clone());
        return;
    }
    let from = cur.last().copied().unwrap_or(0);
    for i in from..levels {
        cur.push(i);
        nondecreasing(levels, len, cur, out, limit);
        cur.pop();
        if out.len() >= limit {
            return;
        }
    }
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The first `limit` guesses in enumeration order: groups form an odometer with
/// group 0 most significant, each group running through its own ordered choices.
/// Without groups there is exactly one (empty) guess.
pub fn enumerate_guesses(plan: &QptasPlan, limit: usize) -> Vec<GuessConfig> {
    let per_group: Vec<Vec<(Vec<usize>, Vec<Vec<usize>>)>> = (0..plan.grouping.groups.len())
        .map(|q| group_choices(plan, q, limit))
        .collect();
    let mut out = Vec::new();
    if limit == 0 || per_group.iter().any(Vec::is_empty) {
        return out;
    }
    let mut idx = vec![0usize; per_group.len()];
    loop {
        out.push(GuessConfig {
            groups: idx
                .iter()
                .enumerate()
                .map(|(q, &i)| {
                    let (large, levels) = per_group[q][i].clone();
                    GroupGuess::new(plan, q, large, levels)
                })
                .collect(),
        });
        if out.len() >= limit {
            return out;
        }
        let mut q = per_group.len();
        loop {
            if q == 0 {
                return out;
            }
            q -= 1;
            idx[q] += 1;
            if idx[q] < per_group[q].len() {
                break;
            }
            idx[q] = 0;
        }
    }
}

/// Packing users selected by an instance assignment (entries at or above one half).
fn selected(plan: &QptasPlan, hint: &[f64]) -> Vec<bool> {
    plan.reduction
        .users
        .iter()
        .map(|&k| hint[k] >= 0.5)
        .collect()
}

/// `(h*)^{q,p,r}`: peak of the selected users of group `q` on every interval.
pub fn reference_peaks(plan: &QptasPlan, q: usize, hint: &[f64]) -> Vec<Vec<f64>> {
    let chosen = selected(plan, hint);
    (0..plan.partition.dims.len())
        .map(|r| {
            (0..plan.partition.count(r))
                .map(|p| {
                    plan.grouping.groups[q]
                        .users
                        .iter()
                        .filter(|&&k| chosen[k])
                        .map(|&k| plan.demands.upper[k][r][p])
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// The guess a reference assignment induces: its large users per group and, on each
/// interval, the smallest level covering the peak of its remaining selected users.
pub fn oracle_guess(plan: &QptasPlan, hint: &[f64]) -> GuessConfig {
    let chosen = selected(plan, hint);
    let eps2 = plan.eps * plan.eps;
    let groups = (0..plan.grouping.groups.len())
        .map(|q| {
            let h_star = reference_peaks(plan, q, hint);
            let large: Vec<usize> = plan.grouping.groups[q]
                .users
                .iter()
                .copied()
                .filter(|&k| {
                    chosen[k]
                        && h_star.iter().enumerate().any(|(r, hs)| {
                            hs.iter()
                                .enumerate()
                                .any(|(p, &h)| plan.demands.lower[k][r][p] > eps2 * h)
                        })
                })
                .collect();
            let levels = h_star
                .iter()
                .enumerate()
                .map(|(r, hs)| {
                    hs.iter()
                        .enumerate()
                        .map(|(p, &h)| {
                            let big: f64 = large.iter().map(|&k| plan.demands.upper[k][r][p]).sum();
                            let rest = h - big;
                            if rest <= 1e-12 * (1.0 + h) {
                                0
                            } else {
                                let target = rest - 1e-12 * (1.0 + rest);
                                plan.grid
                                    .ceil_index(r, target)
                                    .unwrap_or(plan.grid.len(r) - 1)
                            }
                        })
                        .collect()
                })
                .collect();
            GroupGuess::new(plan, q, large, levels)
        })
        .collect();
    GuessConfig { groups }
}

/// Whether `h/(1+ε) + Σ_L f̄ ≤ h* ≤ h + Σ_L f̄` holds on every group, dimension and
/// interval, up to a relative `1e−9`.
pub fn sandwich_holds(plan: &QptasPlan, guess: &GuessConfig, hint: &[f64]) -> bool {
    guess.groups.iter().enumerate().all(|(q, gg)| {
        let h_star = reference_peaks(plan, q, hint);
        h_star.iter().enumerate().all(|(r, hs)| {
            hs.iter().enumerate().all(|(p, &hstar)| {
                let big: f64 = gg.large.iter().map(|&k| plan.demands.upper[k][r][p]).sum();
                let h = gg.peaks[r][p];
                let tol = 1e-9 * (1.0 + hstar);
                h / (1.0 + plan.eps) + big <= hstar + tol && hstar <= h + big + tol
            })
        })
    })
}
