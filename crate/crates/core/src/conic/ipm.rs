//! Primal-dual interior-point method for second-order cone programs.
//!
//! Homogeneous self-dual embedding with Nesterov-Todd scaling and Mehrotra
//! predictor-corrector steps. The KKT system is reduced to the normal-equation form
//! `[Gᵀ W⁻² G, Aᵀ; A, 0]` and solved with a dense LU factorization followed by
//! iterative refinement on the full system. Sized for programs with at most a few
//! hundred variables.

use nalgebra::{DMatrix, DVector, LU};

use super::cones::{ConeSpec, Scaling};
use super::program::ConeProgram;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmSettings {
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
    /// Tolerance accepted (and flagged) when the method stalls before reaching the targets.
    pub reduced_tol: f64,
    /// Certificate residual below which infeasibility is declared.
    pub infeasibility_tol: f64,
    pub max_iter: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            feastol: 1e-9,
            abstol: 1e-9,
            reltol: 1e-9,
            reduced_tol: 1e-7,
            infeasibility_tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct IpmSolution {
    pub status: IpmStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub pres: f64,
    pub dres: f64,
    pub gap: f64,
    /// Converged only to `reduced_tol`.
    pub reduced_accuracy: bool,
}

struct Dense {
    c: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    cones: ConeSpec,
    offset: f64,
}

fn densify(prog: &ConeProgram) -> Dense {
    let n = prog.num_vars;
    let mut c = DVector::zeros(n);
    for &(v, coef) in &prog.objective.terms {
        c[v] += coef;
    }
    let p = prog.equalities.len();
    let mut a = DMatrix::zeros(p, n);
    let mut b = DVector::zeros(p);
    for (i, e) in prog.equalities.iter().enumerate() {
        for &(v, coef) in &e.terms {
            a[(i, v)] += coef;
        }
        b[i] = -e.constant;
    }
    let cones = prog.cones();
    let q = cones.dim();
    let mut g = DMatrix::zeros(q, n);
    let mut h = DVector::zeros(q);
    for (i, e) in prog.cone_rows().enumerate() {
        for &(v, coef) in &e.terms {
            g[(i, v)] -= coef;
        }
        h[i] = e.constant;
    }
    Dense {
        c,
        a,
        b,
        g,
        h,
        cones,
        offset: prog.objective.constant,
    }
}

/// Factored KKT operator for one scaling (`None` is the identity).
struct Kkt<'a> {
    d: &'a Dense,
    w: Option<&'a Scaling>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl<'a> Kkt<'a> {
    fn factor(d: &'a Dense, w: Option<&'a Scaling>) -> Option<Self> {
        let (n, p) = (d.a.ncols(), d.a.nrows());
        let mut m = d.g.clone();
        if let Some(w) = w {
            for j in 0..n {
                let col = w.apply_inv(&m.column(j).into_owned());
                m.set_column(j, &col);
            }
        }
        let hmat = m.transpose() * &m;
        let scale = hmat.diagonal().amax().max(1.0);
        // static regularisation only when the plain system is singular
        for delta in [0.0, 1e-12 * scale] {
            let mut k = DMatrix::zeros(n + p, n + p);
            k.view_mut((0, 0), (n, n)).copy_from(&hmat);
            k.view_mut((0, n), (n, p)).copy_from(&d.a.transpose());
            k.view_mut((n, 0), (p, n)).copy_from(&d.a);
            for i in 0..n {
                k[(i, i)] += delta;
            }
            for i in 0..p {
                k[(n + i, n + i)] = -delta;
            }
            let lu = k.lu();
            if lu.is_invertible() {
                return Some(Self { d, w, lu });
            }
        }
        None
    }

    fn winv2(&self, u: &DVector<f64>) -> DVector<f64> {
        match self.w {
            Some(w) => w.apply_inv(&w.apply_inv(u)),
            None => u.clone(),
        }
    }

    fn w2(&self, u: &DVector<f64>) -> DVector<f64> {
        match self.w {
            Some(w) => w.apply(&w.apply(u)),
            None => u.clone(),
        }
    }

    fn solve_once(
        &self,
        rx: &DVector<f64>,
        ry: &DVector<f64>,
        rz: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (n, p) = (self.d.a.ncols(), self.d.a.nrows());
        let mut rhs = DVector::zeros(n + p);
        rhs.rows_mut(0, n)
            .copy_from(&(rx + self.d.g.transpose() * self.winv2(rz)));
        rhs.rows_mut(n, p).copy_from(ry);
        let sol = self.lu.solve(&rhs)?;
        let x = sol.rows(0, n).into_owned();
        let y = sol.rows(n, p).into_owned();
        let z = self.winv2(&(&self.d.g * &x - rz));
        Some((x, y, z))
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −W²] (x, y, z) = (rx, ry, rz)`.
    fn solve(
        &self,
        rx: &DVector<f64>,
        ry: &DVector<f64>,
        rz: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (mut x, mut y, mut z) = self.solve_once(rx, ry, rz)?;
        for _ in 0..3 {
            let ex = rx - (self.d.a.transpose() * &y + self.d.g.transpose() * &z);
            let ey = ry - &self.d.a * &x;
            let ez = rz - (&self.d.g * &x - self.w2(&z));
            let err = ex.amax().max(ey.amax()).max(ez.amax());
            if err <= 1e-15 * (1.0 + rx.amax().max(ry.amax()).max(rz.amax())) {
                break;
            }
            let (dx, dy, dz) = self.solve_once(&ex, &ey, &ez)?;
            x += dx;
            y += dy;
            z += dz;
        }
        Some((x, y, z))
    }
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

#[derive(Clone, Copy)]
struct Measures {
    pres: f64,
    dres: f64,
    gap: f64,
    relgap: f64,
    pcost: f64,
    dcost: f64,
    pinfres: f64,
    dinfres: f64,
}

fn norm_or_zero(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.norm()
    }
}

fn measures(d: &Dense, it: &Iterate) -> Measures {
    let resx0 = norm_or_zero(&d.c).max(1.0);
    let resy0 = norm_or_zero(&d.b).max(1.0);
    let resz0 = norm_or_zero(&d.h).max(1.0);
    let hrx = d.a.transpose() * &it.y + d.g.transpose() * &it.z;
    let hry = &d.a * &it.x;
    let hrz = &it.s + &d.g * &it.x;
    let rx = &hrx + &d.c * it.tau;
    let ry = &hry - &d.b * it.tau;
    let rz = &hrz - &d.h * it.tau;
    let cx = d.c.dot(&it.x);
    let by = d.b.dot(&it.y);
    let hz = d.h.dot(&it.z);
    let pcost = cx / it.tau;
    let dcost = -(by + hz) / it.tau;
    let gap = it.s.dot(&it.z) / (it.tau * it.tau);
    let relgap = if pcost < 0.0 {
        gap / -pcost
    } else if dcost > 0.0 {
        gap / dcost
    } else {
        f64::INFINITY
    };
    let pres = (norm_or_zero(&ry) / resy0).max(norm_or_zero(&rz) / resz0) / it.tau;
    let dres = norm_or_zero(&rx) / resx0 / it.tau;
    let pinfres = if hz + by < 0.0 {
        norm_or_zero(&hrx) / resx0 / -(hz + by)
    } else {
        f64::INFINITY
    };
    let dinfres = if cx < 0.0 {
        (norm_or_zero(&hry) / resy0).max(norm_or_zero(&hrz) / resz0) / -cx
    } else {
        f64::INFINITY
    };
    Measures {
        pres,
        dres,
        gap,
        relgap,
        pcost,
        dcost,
        pinfres,
        dinfres,
    }
}

fn converged(m: &Measures, feastol: f64, abstol: f64, reltol: f64) -> bool {
    m.pres <= feastol && m.dres <= feastol && (m.gap <= abstol || m.relgap <= reltol)
}

fn finish(
    d: &Dense,
    it: &Iterate,
    m: &Measures,
    status: IpmStatus,
    iterations: usize,
    reduced: bool,
) -> IpmSolution {
    let scale = if status == IpmStatus::Optimal {
        1.0 / it.tau
    } else {
        1.0
    };
    IpmSolution {
        status,
        x: (&it.x * scale).as_slice().to_vec(),
        y: (&it.y * scale).as_slice().to_vec(),
        z: (&it.z * scale).as_slice().to_vec(),
        s: (&it.s * scale).as_slice().to_vec(),
        primal_objective: m.pcost + d.offset,
        dual_objective: m.dcost + d.offset,
        iterations,
        pres: m.pres,
        dres: m.dres,
        gap: m.gap,
        reduced_accuracy: reduced,
    }
}

fn failure(d: &Dense, iterations: usize) -> IpmSolution {
    IpmSolution {
        status: IpmStatus::NumericalFailure,
        x: vec![f64::NAN; d.a.ncols()],
        y: vec![f64::NAN; d.a.nrows()],
        z: vec![f64::NAN; d.h.len()],
        s: vec![f64::NAN; d.h.len()],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        iterations,
        pres: f64::INFINITY,
        dres: f64::INFINITY,
        gap: f64::INFINITY,
        reduced_accuracy: false,
    }
}

fn max_step_all(
    cones: &ConeSpec,
    it: &Iterate,
    ds: &DVector<f64>,
    dz: &DVector<f64>,
    dtau: f64,
    dkappa: f64,
) -> f64 {
    let mut a = cones.max_step(&it.s, ds).min(cones.max_step(&it.z, dz));
    if dtau < 0.0 {
        a = a.min(-it.tau / dtau);
    }
    if dkappa < 0.0 {
        a = a.min(-it.kappa / dkappa);
    }
    a
}

pub fn solve(prog: &ConeProgram, settings: &IpmSettings) -> IpmSolution {
    let d = densify(prog);
    let cones = d.cones.clone();
    let nu = cones.degree() as f64;
    let e = cones.unit();

    let Some(kkt0) = Kkt::factor(&d, None) else {
        return failure(&d, 0);
    };
    let zeros_n = DVector::zeros(d.c.len());
    let zeros_p = DVector::zeros(d.b.len());
    let zeros_q = DVector::zeros(d.h.len());
    let Some((x, _, zt)) = kkt0.solve(&zeros_n, &d.b, &d.h) else {
        return failure(&d, 0);
    };
    let Some((_, y, z)) = kkt0.solve(&(-&d.c), &zeros_p, &zeros_q) else {
        return failure(&d, 0);
    };
    let mut s = -zt;
    let mut z = z;
    for u in [&mut s, &mut z] {
        let t = cones.boundary_shift(u);
        if u.is_empty() {
            continue;
        }
        if t >= -1e-8 * u.norm().max(1.0) {
            *u += &e * (1.0 + t);
        }
    }
    let mut it = Iterate {
        x,
        y,
        z,
        s,
        tau: 1.0,
        kappa: 1.0,
    };

    let mut best_reduced: Option<(IpmSolution, f64)> = None;
    let mut stalls = 0;
    for iter in 0..=settings.max_iter {
        let m = measures(&d, &it);
        if converged(&m, settings.feastol, settings.abstol, settings.reltol) {
            return finish(&d, &it, &m, IpmStatus::Optimal, iter, false);
        }
        if m.pinfres <= settings.infeasibility_tol {
            return finish(&d, &it, &m, IpmStatus::PrimalInfeasible, iter, false);
        }
        if m.dinfres <= settings.infeasibility_tol {
            return finish(&d, &it, &m, IpmStatus::DualInfeasible, iter, false);
        }
        let r = settings.reduced_tol;
        if converged(&m, r, r, r) {
            let quality = m.pres.max(m.dres).max(m.gap.min(m.relgap));
            if best_reduced.as_ref().is_none_or(|(_, q)| quality < *q) {
                best_reduced = Some((finish(&d, &it, &m, IpmStatus::Optimal, iter, true), quality));
            }
        }
        if iter == settings.max_iter || stalls >= 3 {
            break;
        }

        let Some(w) = Scaling::new(&cones, &it.s, &it.z) else {
            break;
        };
        let Some(kkt) = Kkt::factor(&d, Some(&w)) else {
            break;
        };
        let lambda = &w.lambda;
        let rx = d.a.transpose() * &it.y + d.g.transpose() * &it.z + &d.c * it.tau;
        let ry = &d.a * &it.x - &d.b * it.tau;
        let rz = &it.s + &d.g * &it.x - &d.h * it.tau;
        let rt = it.kappa + d.c.dot(&it.x) + d.b.dot(&it.y) + d.h.dot(&it.z);
        let Some((x1, y1, z1)) = kkt.solve(&(-&d.c), &d.b, &d.h) else {
            break;
        };
        let wz1 = w.apply(&z1).norm_squared();
        let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (nu + 1.0);
        let lam_sq = cones.jordan(lambda, lambda);

        let direction = |rho: f64, ds_target: &DVector<f64>, dk_target: f64| {
            let ds_prime = cones.jordan_div(lambda, ds_target);
            let (x2, y2, z2) = kkt.solve(
                &(&rx * -rho),
                &(&ry * -rho),
                &(&rz * -rho - w.apply(&ds_prime)),
            )?;
            let dtau = (rho * rt
                + dk_target / it.tau
                + d.c.dot(&x2)
                + d.b.dot(&y2)
                + d.h.dot(&z2))
                / (wz1 + it.kappa / it.tau);
            let dx = x2 + &x1 * dtau;
            let dy = y2 + &y1 * dtau;
            let dz = z2 + &z1 * dtau;
            let ds = w.apply(&(ds_prime - w.apply(&dz)));
            let dkappa = (dk_target - it.kappa * dtau) / it.tau;
            Some((dx, dy, dz, ds, dtau, dkappa))
        };

        let Some((_, _, dza, dsa, dtaua, dkappaa)) =
            direction(1.0, &(-&lam_sq), -it.tau * it.kappa)
        else {
            break;
        };
        let alpha_a = max_step_all(&cones, &it, &dsa, &dza, dtaua, dkappaa).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3);

        let corr = cones.jordan(&w.apply_inv(&dsa), &w.apply(&dza));
        let ds_target = -&lam_sq - corr + &e * (sigma * mu);
        let dk_target = -it.tau * it.kappa - dtaua * dkappaa + sigma * mu;
        let Some((dx, dy, dz, ds, dtau, dkappa)) = direction(1.0 - sigma, &ds_target, dk_target)
        else {
            break;
        };
        let alpha = (0.99 * max_step_all(&cones, &it, &ds, &dz, dtau, dkappa)).min(1.0);
        if !(alpha.is_finite()) {
            break;
        }
        if alpha < 1e-10 {
            stalls += 1;
        } else {
            stalls = 0;
        }
        it.x += dx * alpha;
        it.y += dy * alpha;
        it.z += dz * alpha;
        it.s += ds * alpha;
        it.tau += dtau * alpha;
        it.kappa += dkappa * alpha;
        if !(it.tau > 0.0 && it.kappa > 0.0) {
            break;
        }
    }
    match best_reduced {
        Some((sol, _)) => sol,
        None => {
            let m = measures(&d, &it);
            if m.pinfres <= settings.infeasibility_tol * 100.0 {
                finish(&d, &it, &m, IpmStatus::PrimalInfeasible, settings.max_iter, true)
            } else {
                failure(&d, settings.max_iter)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::program::Affine;

    #[test]
    fn feasibility_only_program() {
        let mut p = ConeProgram::new();
        let x = p.add_var();
        p.eq(Affine::var(x).shift(-2.0));
        let sol = solve(&p, &IpmSettings::default());
        assert_eq!(sol.status, IpmStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rotated_cone_boundary() {
        // min ℓ  s.t.  ℓ · 1 ≥ 1²
        let mut p = ConeProgram::new();
        let l = p.add_var();
        p.objective = Affine::var(l);
        p.soc(vec![
            Affine::var(l).shift(1.0),
            Affine::var(l).shift(-1.0),
            Affine::constant(2.0),
        ]);
        let sol = solve(&p, &IpmSettings::default());
        assert_eq!(sol.status, IpmStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-7, "{}", sol.x[0]);
    }

    #[test]
    fn small_lp() {
        // max x + y  s.t.  x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0  → (1.6, 1.2)
        let mut p = ConeProgram::new();
        let x = p.add_var();
        let y = p.add_var();
        p.objective = Affine::term(x, -1.0).add(y, -1.0);
        p.le(Affine::var(x).add(y, 2.0), Affine::constant(4.0));
        p.le(Affine::term(x, 3.0).add(y, 1.0), Affine::constant(6.0));
        p.le(Affine::constant(0.0), Affine::var(x));
        p.le(Affine::constant(0.0), Affine::var(y));
        let sol = solve(&p, &IpmSettings::default());
        assert_eq!(sol.status, IpmStatus::Optimal);
        assert!((sol.x[0] - 1.6).abs() < 1e-7 && (sol.x[1] - 1.2).abs() < 1e-7);
        assert!((sol.primal_objective + 2.8).abs() < 1e-8);
    }

    #[test]
    fn detects_infeasibility() {
        let mut p = ConeProgram::new();
        let x = p.add_var();
        p.le(Affine::var(x), Affine::constant(1.0));
        p.le(Affine::constant(2.0), Affine::var(x));
        let sol = solve(&p, &IpmSettings::default());
        assert_eq!(sol.status, IpmStatus::PrimalInfeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let mut p = ConeProgram::new();
        let x = p.add_var();
        p.objective = Affine::term(x, -1.0);
        p.le(Affine::constant(0.0), Affine::var(x));
        let sol = solve(&p, &IpmSettings::default());
        assert_eq!(sol.status, IpmStatus::DualInfeasible);
    }

    #[test]
    fn norm_minimisation() {
        // min t  s.t.  ‖(x − 1, y − 2)‖ ≤ t,  x + y = 0  → t = 3/√2
        let mut p = ConeProgram::new();
        let t = p.add_var();
        let x = p.add_var();
        let y = p.add_var();
        p.objective = Affine::var(t);
        p.eq(Affine::var(x).add(y, 1.0));
        p.soc(vec![
            Affine::var(t),
            Affine::var(x).shift(-1.0),
            Affine::var(y).shift(-2.0),
        ]);
        let sol = solve(&p, &IpmSettings::default());
        assert_eq!(sol.status, IpmStatus::Optimal);
        assert!((sol.x[0] - 3.0 / 2f64.sqrt()).abs() < 1e-8);
    }
}
