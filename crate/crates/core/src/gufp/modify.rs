use serde::{Deserialize, Serialize};

use super::{
    fractional_support, restricted_profile_from_fractional, to_bfs, EdgePartition, Group,
    GufpError, GufpInstance, PackingLp, RestrictedProfile,
};

/// Output of [`modify`]. All vectors are indexed like the `users` slice passed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifyOutcome {
    pub x_hat: Vec<f64>,
    /// After the greedy removals.
    pub x_removed: Vec<f64>,
    /// Vertex of the packing LP under `profile`.
    pub x_vertex: Vec<f64>,
    pub profile: RestrictedProfile,
    /// Packing rows of the LP (one per constant run of the profile).
    pub rows: usize,
    pub fractional_support: usize,
    /// Users dropped after rounding because floating-point error left a row a hair
    /// over its capacity. Zero in exact arithmetic.
    pub repaired: usize,
}

/// Rounds the fractional assignment `x` of the small users `users` of one group to an
/// integral one packed under an `(h, ε)`-restricted profile.
///
/// The profile is built from `x` itself. For every dimension and interval the
/// left-most users are removed until `ε h^{p,r}` of fractional mass measured at the
/// current edge is cleared (lowest user index first on each edge, never leaving the
/// interval). Removed users are then raised back as far as the profile allows, the
/// result is moved to a vertex of the packing LP under the profile, and the fractional
/// entries are rounded down.
pub fn modify(
    g: &GufpInstance,
    part: &EdgePartition,
    users: &[usize],
    x: &[f64],
    peaks: &[Vec<f64>],
    eps: f64,
) -> Result<ModifyOutcome, GufpError> {
    let profile = restricted_profile_from_fractional(g, part, peaks, eps, users, x)?;
    Ok(modify_with_profile(g, part, users, x, peaks, eps, profile))
}

/// [`modify`] against a given profile.
pub fn modify_with_profile(
    g: &GufpInstance,
    part: &EdgePartition,
    users: &[usize],
    x: &[f64],
    peaks: &[Vec<f64>],
    eps: f64,
    profile: RestrictedProfile,
) -> ModifyOutcome {
    assert_eq!(users.len(), x.len());
    let mut bar = x.to_vec();
    let mut removed = vec![false; users.len()];
    for (r, dp) in part.dims.iter().enumerate() {
        for p in 0..dp.count() {
            let target = eps * peaks[r][p];
            let mut cleared = 0.0;
            let mut pos = dp.first(p);
            while cleared < target && pos <= dp.last(p) {
                let pick = (0..users.len())
                    .find(|&i| !removed[i] && x[i] * g.demand(users[i], r, pos) > 0.0);
                match pick {
                    Some(i) => {
                        removed[i] = true;
                        bar[i] = 0.0;
                        cleared += x[i] * g.demand(users[i], r, pos);
                    }
                    None => pos += 1,
                }
            }
        }
    }

    let keys = profile.rows();
    let lp = PackingLp {
        rows: keys
            .iter()
            .map(|&(r, pos)| users.iter().map(|&k| g.demand(k, r, pos)).collect())
            .collect(),
        caps: keys.iter().map(|&(r, pos)| profile.values[r][pos]).collect(),
    };
    let utilities: Vec<f64> = users.iter().map(|&k| g.users[k].utility).collect();
    let mut start = bar.clone();
    refill(&lp, &mut start, x, &removed);
    let vertex = to_bfs(&lp, &start, &utilities);
    let support = fractional_support(&vertex);

    let mut hat: Vec<f64> = vertex.iter().map(|&v| if v >= 1.0 { 1.0 } else { 0.0 }).collect();
    let mut repaired = 0;
    while let Some((r, pos)) = first_violation(g, users, &hat, &profile) {
        let drop = (0..users.len())
            .filter(|&i| hat[i] == 1.0 && g.demand(users[i], r, pos) > 0.0)
            .min_by(|&a, &b| utilities[a].total_cmp(&utilities[b]))
            .expect("an overloaded row has a contributing user");
        hat[drop] = 0.0;
        repaired += 1;
    }

    ModifyOutcome {
        x_hat: hat,
        x_removed: bar,
        x_vertex: vertex,
        profile,
        rows: keys.len(),
        fractional_support: support,
        repaired,
    }
}

/// Raises removed users back towards their fractional value, lowest index first, as
/// far as the rows allow. Only adds utility.
fn refill(lp: &PackingLp, y: &mut [f64], x: &[f64], removed: &[bool]) {
    for i in (0..y.len()).filter(|&i| removed[i]) {
        let mut room = x[i];
        for (row, cap) in lp.rows.iter().zip(&lp.caps) {
            if row[i] > 0.0 {
                let used: f64 = row.iter().zip(y.iter()).map(|(a, v)| a * v).sum();
                room = room.min(((cap - used) / row[i]).max(0.0));
            }
        }
        y[i] = room;
    }
}

fn first_violation(
    g: &GufpInstance,
    users: &[usize],
    x: &[f64],
    profile: &RestrictedProfile,
) -> Option<(usize, usize)> {
    for (r, vals) in profile.values.iter().enumerate() {
        for (pos, &cap) in vals.iter().enumerate() {
            let load: f64 = users
                .iter()
                .zip(x)
                .map(|(&k, &v)| g.demand(k, r, pos) * v)
                .sum();
            if load > cap {
                return Some((r, pos));
            }
        }
    }
    None
}

/// The utility loss allowed by the rounding lemma for one group:
/// `Σ_{r∈H^q} ( Σ_p C_r/H^{q,p,r} (ε h^{q,p,r} + B^{q,p,r}) + α P_r B^{q,P_r,r} / (ε H^{q,P_r,r}) )`.
///
/// Intervals with `H^{q,p,r} = 0` contribute nothing: no user of the group has a
/// positive demand there, so nothing is removed on them.
pub fn modify_loss_bound(
    group: &Group,
    part: &EdgePartition,
    peaks: &[Vec<f64>],
    smallness: &[Vec<f64>],
    eps: f64,
) -> f64 {
    let mut total = 0.0;
    for (r, dp) in part.dims.iter().enumerate() {
        if !group.active[r] {
            continue;
        }
        let h = &group.weights[r];
        for p in 0..dp.count() {
            if h[p] > 0.0 {
                total += dp.growth / h[p] * (eps * peaks[r][p] + smallness[r][p]);
            }
        }
        let last = dp.count() - 1;
        total += group.alpha * dp.count() as f64 * smallness[r][last] / (eps * h[last]);
    }
    total
}
