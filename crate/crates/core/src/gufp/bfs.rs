use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Entries this close to `0` or `1` are treated as sitting on the bound.
pub const BOUND_TOL: f64 = 1e-12;
const ROW_TOL: f64 = 1e-11;
const RANK_TOL: f64 = 1e-10;

/// `max u·x` subject to `rows · x ≤ caps`, `0 ≤ x ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingLp {
    pub rows: Vec<Vec<f64>>,
    pub caps: Vec<f64>,
}

impl PackingLp {
    pub fn slack(&self, i: usize, x: &[f64]) -> f64 {
        self.caps[i] - dot(&self.rows[i], x)
    }

    pub fn is_tight(&self, i: usize, x: &[f64]) -> bool {
        self.slack(i, x) <= ROW_TOL * (1.0 + self.caps[i].abs())
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.iter().all(|&v| (-tol..=1.0 + tol).contains(&v))
            && (0..self.rows.len()).all(|i| self.slack(i, x) >= -tol * (1.0 + self.caps[i].abs()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn snap(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < BOUND_TOL {
            *v = 0.0;
        } else if *v > 1.0 - BOUND_TOL {
            *v = 1.0;
        }
    }
}

/// Entries strictly between the bounds.
pub fn fractional_support(x: &[f64]) -> usize {
    x.iter()
        .filter(|&&v| v >= BOUND_TOL && v <= 1.0 - BOUND_TOL)
        .count()
}

/// Moves a feasible `start` to a vertex of the packing polytope without lowering
/// `u·x`.
///
/// While the tight rows restricted to the fractional entries have a non-trivial null
/// space, steps along a null-space direction (oriented to not decrease utility) until
/// another bound or row becomes tight. At the end the fractional entries are pinned
/// down by linearly independent tight rows, so there are at most as many of them as
/// rows.
pub fn to_bfs(lp: &PackingLp, start: &[f64], utilities: &[f64]) -> Vec<f64> {
    let n = start.len();
    let mut x: Vec<f64> = start.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let max_steps = 4 * (n + lp.rows.len()) + 8;
    for _ in 0..max_steps {
        snap(&mut x);
        let frac: Vec<usize> = (0..n).filter(|&i| x[i] > 0.0 && x[i] < 1.0).collect();
        if frac.is_empty() {
            break;
        }
        let tight: Vec<usize> = (0..lp.rows.len()).filter(|&i| lp.is_tight(i, &x)).collect();
        let f = frac.len();
        let mut m = DMatrix::<f64>::zeros(tight.len().max(f), f);
        for (a, &i) in tight.iter().enumerate() {
            for (b, &j) in frac.iter().enumerate() {
                m[(a, b)] = lp.rows[i][j];
            }
        }
        let svd = m.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let sv = &svd.singular_values;
        let (jmin, smin) = sv
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        let smax = sv.iter().copied().fold(0.0, f64::max);
        if smin > RANK_TOL * smax.max(1.0) {
            break;
        }
        let mut d: Vec<f64> = v_t.row(jmin).iter().copied().collect();
        let gain: f64 = frac.iter().zip(&d).map(|(&j, dj)| utilities[j] * dj).sum();
        if gain < 0.0 {
            d.iter_mut().for_each(|v| *v = -*v);
        }

        let mut alpha = f64::INFINITY;
        for (&j, &dj) in frac.iter().zip(&d) {
            if dj > 0.0 {
                alpha = alpha.min((1.0 - x[j]) / dj);
            } else if dj < 0.0 {
                alpha = alpha.min(-x[j] / dj);
            }
        }
        for i in 0..lp.rows.len() {
            if tight.contains(&i) {
                continue;
            }
            let rate: f64 = frac.iter().zip(&d).map(|(&j, dj)| lp.rows[i][j] * dj).sum();
            if rate > 0.0 {
                alpha = alpha.min(lp.slack(i, &x).max(0.0) / rate);
            }
        }
        if !alpha.is_finite() {
            break;
        }
        for (&j, &dj) in frac.iter().zip(&d) {
            x[j] += alpha * dj;
        }
    }
    snap(&mut x);
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    x
}

/// Rank of the tight rows restricted to the fractional entries of `x`.
pub fn tight_rank(lp: &PackingLp, x: &[f64]) -> usize {
    let frac: Vec<usize> = (0..x.len())
        .filter(|&i| x[i] >= BOUND_TOL && x[i] <= 1.0 - BOUND_TOL)
        .collect();
    let tight: Vec<usize> = (0..lp.rows.len()).filter(|&i| lp.is_tight(i, x)).collect();
    if frac.is_empty() || tight.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(tight.len(), frac.len(), |a, b| lp.rows[tight[a]][frac[b]]);
    m.rank(RANK_TOL * m.amax().max(1.0))
}
