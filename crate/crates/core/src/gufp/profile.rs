use serde::{Deserialize, Serialize};

use super::{lattice_steps, EdgePartition, GufpError, GufpInstance};

/// Capacity envelope whose values are multiples `l ε h^{p,r}` with `l ≤ 1/ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedProfile {
    /// `values[r][pos]`.
    pub values: Vec<Vec<f64>>,
}

impl RestrictedProfile {
    pub fn zero(g: &GufpInstance) -> Self {
        Self {
            values: vec![vec![0.0; g.edges]; g.d()],
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.windows(2).all(|w| w[0] <= w[1]))
    }

    /// Whether every value is `l ε h^{p,r}` for some `p` and `l ∈ {0, …, 1/ε}`.
    pub fn on_lattice(&self, peaks: &[Vec<f64>], eps: f64) -> bool {
        let Some(steps) = lattice_steps(eps) else {
            return false;
        };
        self.values.iter().zip(peaks).all(|(vals, hs)| {
            vals.iter().all(|&v| {
                v == 0.0
                    || hs.iter().any(|&h| {
                        (0..=steps).any(|l| lattice_value(l, eps, h) == v)
                    })
            })
        })
    }

    /// One packing row per maximal run of constant value: `(r, last position)`.
    /// Loads are monotone, so these rows imply the capacity on every edge.
    pub fn rows(&self) -> Vec<(usize, usize)> {
        let mut rows = Vec::new();
        for (r, v) in self.values.iter().enumerate() {
            for pos in 0..v.len() {
                if pos + 1 == v.len() || v[pos + 1] != v[pos] {
                    rows.push((r, pos));
                }
            }
        }
        rows
    }
}

fn lattice_value(l: u32, eps: f64, h: f64) -> f64 {
    f64::from(l) * (eps * h)
}

/// Largest `l ε h` with `l ≤ 1/ε` not above `v`.
fn floor_to_lattice(v: f64, h: f64, eps: f64, steps: u32) -> f64 {
    if h <= 0.0 || v <= 0.0 {
        return 0.0;
    }
    let mut l = ((v / (eps * h)).floor() as u32).min(steps);
    while l > 0 && lattice_value(l, eps, h) > v {
        l -= 1;
    }
    lattice_value(l, eps, h)
}

/// Rounds the fractional profile `Σ_{k∈users} f_k^r x_k` down to the lattice.
///
/// At every position the value is the largest lattice point `l ε h^{p',r}` (over all
/// intervals `p'`) not above the fractional profile, which keeps the result monotone.
/// Where the fractional profile is at most `(1+ε) h^{p,r}` on interval `p`, the gap to
/// the profile is below `ε h^{p,r}`.
pub fn restricted_profile_from_fractional(
    g: &GufpInstance,
    part: &EdgePartition,
    peaks: &[Vec<f64>],
    eps: f64,
    users: &[usize],
    x: &[f64],
) -> Result<RestrictedProfile, GufpError> {
    let steps = lattice_steps(eps).ok_or(GufpError::NotReciprocal(eps))?;
    let values = (0..g.d())
        .map(|r| {
            let hs = &peaks[r];
            debug_assert_eq!(hs.len(), part.count(r));
            (0..g.edges)
                .map(|pos| {
                    let frac: f64 = users
                        .iter()
                        .zip(x)
                        .map(|(&k, &v)| g.demand(k, r, pos) * v)
                        .sum();
                    hs.iter()
                        .map(|&h| floor_to_lattice(frac, h, eps, steps))
                        .fold(0.0, f64::max)
                })
                .collect()
        })
        .collect();
    Ok(RestrictedProfile { values })
}

/// Every monotone profile over `peaks`' lattice that stays below `ceiling`, in
/// lexicographic order of lattice indices, stopping after `limit` profiles.
pub fn enumerate_profiles(
    peaks: &[Vec<f64>],
    eps: f64,
    ceiling: &[Vec<f64>],
    limit: usize,
) -> Result<Vec<RestrictedProfile>, GufpError> {
    let steps = lattice_steps(eps).ok_or(GufpError::NotReciprocal(eps))?;
    let per_dim: Vec<Vec<Vec<f64>>> = peaks
        .iter()
        .zip(ceiling)
        .map(|(hs, cap)| {
            let mut lattice: Vec<f64> = hs
                .iter()
                .flat_map(|&h| (0..=steps).map(move |l| lattice_value(l, eps, h)))
                .collect();
            lattice.sort_by(f64::total_cmp);
            lattice.dedup();
            let mut out = Vec::new();
            let mut current = Vec::with_capacity(cap.len());
            monotone_below(&lattice, cap, 0, &mut current, &mut out, limit);
            out
        })
        .collect();
    let mut profiles = Vec::new();
    let mut idx = vec![0usize; per_dim.len()];
    if per_dim.iter().any(Vec::is_empty) {
        return Ok(profiles);
    }
    'outer: while profiles.len() < limit {
        profiles.push(RestrictedProfile {
            values: idx.iter().zip(&per_dim).map(|(&i, d)| d[i].clone()).collect(),
        });
        for (i, d) in idx.iter_mut().zip(&per_dim) {
            *i += 1;
            if *i < d.len() {
                continue 'outer;
            }
            *i = 0;
        }
        break;
    }
    Ok(profiles)
}

fn monotone_below(
    lattice: &[f64],
    cap: &[f64],
    from: usize,
    current: &mut Vec<f64>,
    out: &mut Vec<Vec<f64>>,
    limit: usize,
) {
    if out.len() >= limit {
        return;
    }
    let pos = current.len();
    if pos == cap.len() {
        out.push(current.clone());
        return;
    }
    for (i, &v) in lattice.iter().enumerate().skip(from) {
        if v > cap[pos] {
            break;
        }
        current.push(v);
        monotone_below(lattice, cap, i, current, out, limit);
        current.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gufp::{build_partition, Dimension, GufpUser, Orientation, SeparableStepFunction};

    fn flat(n: usize, a: f64) -> GufpInstance {
        let dim = Dimension {
            orientation: Orientation::Forward,
            bases: vec![vec![1.0; n]],
            capacity: vec![10.0; n],
        };
        let user = GufpUser {
            utility: 1.0,
            demands: vec![SeparableStepFunction {
                coefficients: vec![a],
                start: 0,
                saturation: n - 1,
            }],
        };
        GufpInstance::new(n, vec![dim], vec![user]).unwrap()
    }

    #[test]
    fn zero_assignment_gives_zero_profile() {
        let g = flat(3, 1.0);
        let part = build_partition(&g, &[2.0]);
        let p = restricted_profile_from_fractional(&g, &part, &[vec![1.0]], 0.25, &[0], &[0.0]).unwrap();
        assert_eq!(p, RestrictedProfile::zero(&g));
    }

    #[test]
    fn lattice_points_are_kept_and_others_floored() {
        let g = flat(2, 1.0);
        let part = build_partition(&g, &[2.0]);
        let on = restricted_profile_from_fractional(&g, &part, &[vec![1.0]], 0.25, &[0], &[0.5]).unwrap();
        assert_eq!(on.values[0], vec![0.5, 0.5]);
        let off = restricted_profile_from_fractional(&g, &part, &[vec![1.0]], 0.25, &[0], &[0.37]).unwrap();
        assert_eq!(off.values[0], vec![0.25, 0.25]);
        assert!(off.on_lattice(&[vec![1.0]], 0.25));
        assert_eq!(off.rows(), vec![(0, 1)]);
    }

    #[test]
    fn non_reciprocal_eps_is_rejected() {
        let g = flat(2, 1.0);
        let part = build_partition(&g, &[2.0]);
        assert!(matches!(
            restricted_profile_from_fractional(&g, &part, &[vec![1.0]], 0.3, &[0], &[0.5]),
            Err(GufpError::NotReciprocal(_))
        ));
    }

    #[test]
    fn enumeration_counts_monotone_profiles() {
        // lattice {0, 0.5, 1}, two positions, monotone: 6 sequences
        let all = enumerate_profiles(&[vec![1.0]], 0.5, &[vec![1.0, 1.0]], 100).unwrap();
        assert_eq!(all.len(), 6);
        assert!(all.iter().all(RestrictedProfile::is_monotone));
        let capped = enumerate_profiles(&[vec![1.0]], 0.5, &[vec![0.5, 1.0]], 100).unwrap();
        assert_eq!(capped.len(), 5);
    }
}
