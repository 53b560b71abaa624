//! Translation of a radial instance into a cone program and back.

use num_complex::Complex64;

use super::program::{Affine, ConeProgram};
use super::{Relaxation, SolveStatus};
use crate::model::{PowerFlowState, RadialInstance};

/// Absolute slack on the objective floor of the loss-minimisation program.
pub const FLOOR_SLACK: f64 = 1e-9;

/// How user `k` enters the program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Assignment {
    Free,
    Fixed(f64),
}

pub struct OpfProgram {
    pub program: ConeProgram,
    p: Vec<usize>,
    q: Vec<usize>,
    l: Vec<usize>,
    /// Node `j` maps to `v[j - 1]`.
    v: Vec<usize>,
    x: Vec<Result<usize, f64>>,
}

impl OpfProgram {
    pub fn build(inst: &RadialInstance, relaxation: &Relaxation) -> Result<Self, String> {
        let m = inst.m();
        let assignments = assignments(inst, relaxation)?;

        let mut prog = ConeProgram::new();
        let mut p = Vec::with_capacity(m);
        let mut q = Vec::with_capacity(m);
        let mut l = Vec::with_capacity(m);
        for _ in 0..m {
            p.push(prog.add_var());
            q.push(prog.add_var());
            l.push(prog.add_var());
        }
        let v: Vec<usize> = (0..m).map(|_| prog.add_var()).collect();
        let x: Vec<Result<usize, f64>> = assignments
            .iter()
            .map(|a| match a {
                Assignment::Free => Ok(prog.add_var()),
                Assignment::Fixed(val) => Err(*val),
            })
            .collect();

        let volt = |node: usize| {
            if node == 0 {
                Affine::constant(inst.v0)
            } else {
                Affine::var(v[node - 1])
            }
        };
        let xk = |k: usize| match x[k] {
            Ok(var) => Affine::var(var),
            Err(val) => Affine::constant(val),
        };

        let topo = inst.topology();
        let at = inst.users_at();
        for j in 1..=m {
            let e = j - 1;
            let line = &inst.lines[e];
            let z = line.z;
            let i = inst.tail(e);

            let mut re = Affine::var(p[e]).add(l[e], -z.re);
            let mut im = Affine::var(q[e]).add(l[e], -z.im);
            for &k in &at[j] {
                let s = inst.users[k].demand;
                re = re.plus(&xk(k), -s.re);
                im = im.plus(&xk(k), -s.im);
            }
            for &c in topo.children(j) {
                re = re.add(p[c - 1], -1.0);
                im = im.add(q[c - 1], -1.0);
            }
            prog.eq(re);
            prog.eq(im);

            prog.eq(Affine::var(v[e])
                .plus(&volt(i), -1.0)
                .add(l[e], -z.norm_sqr())
                .add(p[e], 2.0 * z.re)
                .add(q[e], 2.0 * z.im));

            let b = inst.bounds[e];
            prog.le(Affine::constant(b.min), Affine::var(v[e]));
            prog.le(Affine::var(v[e]), Affine::constant(b.max));
            if line.l_cap.is_finite() {
                prog.le(Affine::var(l[e]), Affine::constant(line.l_cap));
            }

            prog.soc(vec![
                Affine::var(l[e]).plus(&volt(i), 1.0),
                Affine::var(l[e]).plus(&volt(i), -1.0),
                Affine::term(p[e], 2.0),
                Affine::term(q[e], 2.0),
            ]);
            if line.s_cap.is_finite() {
                prog.soc(vec![
                    Affine::constant(line.s_cap),
                    Affine::var(p[e]),
                    Affine::var(q[e]),
                ]);
                prog.soc(vec![
                    Affine::constant(line.s_cap),
                    Affine::term(l[e], z.re).add(p[e], -1.0),
                    Affine::term(l[e], z.im).add(q[e], -1.0),
                ]);
            }
        }
        for var in x.iter().flatten() {
            prog.le(Affine::constant(0.0), Affine::var(*var));
            prog.le(Affine::var(*var), Affine::constant(1.0));
        }

        if let Relaxation::RcopfRestricted(r) = relaxation {
            for row in &r.packing {
                let mut lhs = Affine::default();
                for &(k, coef) in &row.coefficients {
                    lhs = lhs.plus(&xk(k), coef);
                }
                prog.le(lhs, Affine::constant(row.bound));
            }
        }

        // objective f = m_shift + f0(y) + Σ coef_k x_k with y = Re(s0 e^{-iφ}), s0 = −S_01
        let obj = &inst.objective;
        let frame = obj.frame();
        let y = Affine::term(p[0], -frame.re).add(q[0], frame.im);
        let mut f = Affine::constant(obj.m_shift);
        let pieces = obj.generation.affine_pieces();
        if pieces.len() == 1 {
            let (a, b0) = pieces[0];
            f = f.plus(&y, a).shift(b0);
        } else {
            let t = prog.add_var();
            for &(a, b0) in &pieces {
                prog.le(Affine::var(t), y.clone().scaled(a).shift(b0));
            }
            f = f.add(t, 1.0);
        }
        for (k, u) in inst.users.iter().enumerate() {
            let c = obj.user_coefficient(k, u);
            if c != 0.0 {
                f = f.plus(&xk(k), c);
            }
        }

        prog.objective = match relaxation {
            Relaxation::LossMin { floor, .. } => {
                prog.le(Affine::constant(floor - FLOOR_SLACK), f);
                let mut loss = Affine::default();
                for &le in &l {
                    loss = loss.add(le, 1.0);
                }
                loss
            }
            _ => f.scaled(-1.0),
        };
        Ok(Self {
            program: prog,
            p,
            q,
            l,
            v,
            x,
        })
    }

    pub fn extract(&self, inst: &RadialInstance, sol: &[f64]) -> PowerFlowState {
        let m = inst.m();
        let s: Vec<Complex64> = (0..m)
            .map(|e| Complex64::new(sol[self.p[e]], sol[self.q[e]]))
            .collect();
        let mut v = vec![inst.v0; m + 1];
        for j in 1..=m {
            v[j] = sol[self.v[j - 1]];
        }
        PowerFlowState {
            s0: -s[0],
            x: self
                .x
                .iter()
                .map(|a| match a {
                    Ok(var) => sol[*var],
                    Err(val) => *val,
                })
                .collect(),
            v,
            l: self.l.iter().map(|&i| sol[i]).collect(),
            s,
        }
    }
}

fn assignments(inst: &RadialInstance, relaxation: &Relaxation) -> Result<Vec<Assignment>, String> {
    let n = inst.user_count();
    let check = |x: &[f64]| {
        if x.len() != n {
            Err(format!("assignment has {} entries, instance has {n} users", x.len()))
        } else if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            Err("assignment entries must lie in [0, 1]".to_string())
        } else {
            Ok(())
        }
    };
    Ok(match relaxation {
        Relaxation::Rcopf => vec![Assignment::Free; n],
        Relaxation::CopfFixed(x) | Relaxation::LossMin { x, .. } => {
            check(x)?;
            x.iter().map(|&v| Assignment::Fixed(v)).collect()
        }
        Relaxation::CopfInelastic(x) => {
            check(x)?;
            inst.users
                .iter()
                .zip(x)
                .map(|(u, &v)| {
                    if u.is_inelastic() {
                        Assignment::Fixed(v)
                    } else {
                        Assignment::Free
                    }
                })
                .collect()
        }
        Relaxation::RcopfRestricted(r) => {
            if r.fixed.len() != n {
                return Err(format!(
                    "restriction covers {} users, instance has {n}",
                    r.fixed.len()
                ));
            }
            r.fixed
                .iter()
                .map(|f| match f {
                    Some(v) => Assignment::Fixed(*v),
                    None => Assignment::Free,
                })
                .collect()
        }
    })
}

pub(crate) fn status_from(status: super::ipm::IpmStatus) -> SolveStatus {
    use super::ipm::IpmStatus::*;
    match status {
        Optimal => SolveStatus::Optimal,
        PrimalInfeasible => SolveStatus::Infeasible,
        DualInfeasible | NumericalFailure => SolveStatus::NumericalFailure,
    }
}
