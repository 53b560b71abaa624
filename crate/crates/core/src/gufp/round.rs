use serde::{Deserialize, Serialize};

use super::{
    build_partition, capacity_slack, check_gufp_feasible, group_users, modify, reciprocal_eps,
    EdgePartition, GufpError, GufpInstance, IntervalDemands, LevelGrid,
};
use crate::conic::{ipm, Affine, ConeProgram, IpmSettings, IpmStatus};

/// Result of [`gufp_round`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GufpRounding {
    pub x: Vec<f64>,
    pub value: f64,
    /// Optimal value of the LP relaxation.
    pub lp_value: f64,
    /// The LP solution that was rounded.
    pub lp_x: Vec<f64>,
    pub eps: f64,
    pub groups: usize,
    pub partition: EdgePartition,
}

/// Optimal solution of the LP relaxation `max u·x` s.t. `Σ_k f_k^r(e) x_k ≤ c^r(e)`,
/// `0 ≤ x ≤ 1`.
pub fn solve_gufp_lp(g: &GufpInstance, settings: &IpmSettings) -> Result<(Vec<f64>, f64), GufpError> {
    let n = g.user_count();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let mut prog = ConeProgram::new();
    let vars: Vec<usize> = (0..n).map(|_| prog.add_var()).collect();
    for &v in &vars {
        prog.le(Affine::constant(0.0), Affine::var(v));
        prog.le(Affine::var(v), Affine::constant(1.0));
    }
    for r in 0..g.d() {
        for pos in 0..g.edges {
            let mut lhs = Affine::default();
            for (k, &v) in vars.iter().enumerate() {
                let a = g.demand(k, r, pos);
                if a > 0.0 {
                    lhs = lhs.add(v, a);
                }
            }
            if !lhs.terms.is_empty() {
                prog.le(lhs, Affine::constant(g.dims[r].capacity[pos]));
            }
        }
    }
    let mut obj = Affine::default();
    for (k, &v) in vars.iter().enumerate() {
        obj = obj.add(v, -g.users[k].utility);
    }
    prog.objective = obj;
    let sol = ipm::solve(&prog, settings);
    if sol.status != IpmStatus::Optimal {
        return Err(GufpError::Lp(format!("{:?}", sol.status)));
    }
    let x: Vec<f64> = vars.iter().map(|&v| sol.x[v].clamp(0.0, 1.0)).collect();
    let value = g.utility(&x);
    Ok((x, value))
}

/// LP-rounding for a standalone instance: solve the relaxation, group the users, and
/// round each group with [`modify`] under peaks read off the LP solution.
///
/// Every group's rounded load stays below its fractional load, so the union is
/// feasible. Users filtered out by the utility threshold are dropped.
pub fn gufp_round(g: &GufpInstance, eps: f64) -> Result<GufpRounding, GufpError> {
    let eps = reciprocal_eps(eps);
    let (lp_x, lp_value) = solve_gufp_lp(g, &IpmSettings::default())?;
    let part = build_partition(g, &vec![2.0; g.d()]);
    let grouping = group_users(g, &part, eps);
    let demands = IntervalDemands::new(g, &part);
    let grid = LevelGrid::new(g, &grouping.survivors, eps);

    let mut x = vec![0.0; g.user_count()];
    for group in &grouping.groups {
        if group.is_degenerate() {
            for &k in &group.users {
                x[k] = 1.0;
            }
            continue;
        }
        let peaks: Vec<Vec<f64>> = (0..g.d())
            .map(|r| {
                (0..part.count(r))
                    .map(|p| {
                        let mass: f64 = group
                            .users
                            .iter()
                            .map(|&k| demands.upper[k][r][p] * lp_x[k])
                            .sum();
                        let idx = grid
                            .ceil_index(r, mass / (1.0 + eps))
                            .unwrap_or(grid.len(r) - 1);
                        grid.levels[r][idx]
                    })
                    .collect()
            })
            .collect();
        let xt: Vec<f64> = group.users.iter().map(|&k| lp_x[k]).collect();
        let out = modify(g, &part, &group.users, &xt, &peaks, eps)?;
        for (&k, &v) in group.users.iter().zip(&out.x_hat) {
            x[k] = v;
        }
    }
    drop_until_feasible(g, &mut x);
    Ok(GufpRounding {
        value: g.utility(&x),
        x,
        lp_value,
        lp_x,
        eps,
        groups: grouping.groups.len(),
        partition: part,
    })
}

/// Drops the lowest-utility contributing user while some capacity is exceeded. Only
/// triggers on floating-point noise.
fn drop_until_feasible(g: &GufpInstance, x: &mut [f64]) {
    while !check_gufp_feasible(g, x) {
        let (r, pos) = (0..g.d())
            .flat_map(|r| (0..g.edges).map(move |pos| (r, pos)))
            .find(|&(r, pos)| {
                let load: f64 = (0..x.len()).map(|k| g.demand(k, r, pos) * x[k]).sum();
                let c = g.dims[r].capacity[pos];
                load > c + capacity_slack(c)
            })
            .expect("infeasible assignment has a violated row");
        let k = (0..x.len())
            .filter(|&k| x[k] > 0.0 && g.demand(k, r, pos) > 0.0)
            .min_by(|&a, &b| g.users[a].utility.total_cmp(&g.users[b].utility))
            .expect("violated row has a contributing user");
        x[k] = 0.0;
    }
}
