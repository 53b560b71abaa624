//! Cone algebra for products of a non-negative orthant and second-order cones.

use nalgebra::DVector;

/// `K = R^nonneg_+ × Q^{soc[0]} × Q^{soc[1]} × ...`, laid out in that order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConeSpec {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    /// `(offset, len)` of each second-order cone block.
    pub fn soc_blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut off = self.nonneg;
        self.soc.iter().map(move |&d| {
            let o = off;
            off += d;
            (o, d)
        })
    }

    pub fn unit(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim());
        for i in 0..self.nonneg {
            e[i] = 1.0;
        }
        for (o, _) in self.soc_blocks() {
            e[o] = 1.0;
        }
        e
    }

    /// Smallest `t` such that `u + t e` is in the cone (negative when `u` is interior).
    pub fn boundary_shift(&self, u: &DVector<f64>) -> f64 {
        let mut t = f64::NEG_INFINITY;
        for i in 0..self.nonneg {
            t = t.max(-u[i]);
        }
        for (o, d) in self.soc_blocks() {
            t = t.max(u.rows(o + 1, d - 1).norm() - u[o]);
        }
        t
    }

    /// Largest `α ≥ 0` with `u + α du` in the cone; `u` must be interior.
    pub fn max_step(&self, u: &DVector<f64>, du: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..self.nonneg {
            if du[i] < 0.0 {
                alpha = alpha.min(-u[i] / du[i]);
            }
        }
        for (o, d) in self.soc_blocks() {
            alpha = alpha.min(soc_max_step(
                u[o],
                &u.as_slice()[o + 1..o + d],
                du[o],
                &du.as_slice()[o + 1..o + d],
            ));
        }
        alpha
    }

    /// Jordan product `u ∘ v`.
    pub fn jordan(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(u.len());
        for i in 0..self.nonneg {
            r[i] = u[i] * v[i];
        }
        for (o, d) in self.soc_blocks() {
            r[o] = u.rows(o, d).dot(&v.rows(o, d));
            for i in 1..d {
                r[o + i] = u[o] * v[o + i] + v[o] * u[o + i];
            }
        }
        r
    }

    /// Solves `λ ∘ x = r` for `x`, with `λ` interior.
    pub fn jordan_div(&self, lambda: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(r.len());
        for i in 0..self.nonneg {
            x[i] = r[i] / lambda[i];
        }
        for (o, d) in self.soc_blocks() {
            let l0 = lambda[o];
            let l1 = lambda.rows(o + 1, d - 1);
            let r1 = r.rows(o + 1, d - 1);
            let det = soc_det(l0, &lambda.as_slice()[o + 1..o + d]);
            let x0 = (l0 * r[o] - l1.dot(&r1)) / det;
            x[o] = x0;
            for i in 1..d {
                x[o + i] = (r[o + i] - x0 * lambda[o + i]) / l0;
            }
        }
        x
    }
}

/// `u0² − ‖u1‖²` computed without cancellation.
fn soc_det(u0: f64, u1: &[f64]) -> f64 {
    let n = u1.iter().map(|v| v * v).sum::<f64>().sqrt();
    (u0 - n) * (u0 + n)
}

fn soc_max_step(u0: f64, u1: &[f64], d0: f64, d1: &[f64]) -> f64 {
    // (u0 + α d0)² − ‖u1 + α d1‖² = a α² + 2 b α + c
    let a = soc_det(d0, d1);
    let b = u0 * d0 - u1.iter().zip(d1).map(|(x, y)| x * y).sum::<f64>();
    let c = soc_det(u0, u1);
    let scale = d0 * d0 + d1.iter().map(|v| v * v).sum::<f64>();
    if scale == 0.0 {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    if a.abs() <= 1e-14 * scale {
        if b < 0.0 {
            best = -c / (2.0 * b);
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let q = -(b + b.signum() * disc.sqrt());
            for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                if root > 0.0 {
                    best = best.min(root);
                }
            }
        }
    }
    // the leading component must stay non-negative as well
    if d0 < 0.0 {
        best = best.min(-u0 / d0);
    }
    best
}

/// Nesterov-Todd scaling `W` with `W z = W⁻¹ s = λ`.
///
/// On the orthant `W = diag(√(s/z))`; on a second-order cone
/// `W = η (2 v vᵀ − J)` with `J = diag(1, −1, …, −1)`.
#[derive(Debug, Clone)]
pub struct Scaling {
    diag: Vec<f64>,
    socs: Vec<(usize, usize, f64, DVector<f64>)>,
    pub lambda: DVector<f64>,
}

impl Scaling {
    /// Returns `None` unless both points are strictly interior.
    pub fn new(cones: &ConeSpec, s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let mut diag = Vec::with_capacity(cones.nonneg);
        for i in 0..cones.nonneg {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            diag.push((s[i] / z[i]).sqrt());
        }
        let mut socs = Vec::with_capacity(cones.soc.len());
        for (o, d) in cones.soc_blocks() {
            let sb = s.rows(o, d);
            let zb = z.rows(o, d);
            let sdet = soc_det(s[o], &s.as_slice()[o + 1..o + d]);
            let zdet = soc_det(z[o], &z.as_slice()[o + 1..o + d]);
            if !(sb[0] > 0.0 && zb[0] > 0.0 && sdet > 0.0 && zdet > 0.0) {
                return None;
            }
            let (sn, zn) = (sdet.sqrt(), zdet.sqrt());
            let sbar = sb / sn;
            let zbar = zb / zn;
            let gamma = ((1.0 + sbar.dot(&zbar)) / 2.0).sqrt();
            let mut w = DVector::zeros(d);
            w[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            for i in 1..d {
                w[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
            }
            let mut v = w;
            v[0] += 1.0;
            let norm = (2.0 * (v[0])).sqrt();
            v /= norm;
            socs.push((o, d, (sn / zn).sqrt(), v));
        }
        let mut sc = Self {
            diag,
            socs,
            lambda: DVector::zeros(0),
        };
        sc.lambda = sc.apply(z);
        Some(sc)
    }

    /// `W u`.
    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut r = u.clone();
        for (i, d) in self.diag.iter().enumerate() {
            r[i] *= d;
        }
        for (o, d, eta, v) in &self.socs {
            let ub = u.rows(*o, *d);
            let vu = v.dot(&ub);
            for i in 0..*d {
                let ju = if i == 0 { ub[0] } else { -ub[i] };
                r[o + i] = eta * (2.0 * v[i] * vu - ju);
            }
        }
        r
    }

    /// `W⁻¹ u`, using `W⁻¹ = η⁻¹ (2 J v vᵀ J − J)` on each cone.
    pub fn apply_inv(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut r = u.clone();
        for (i, d) in self.diag.iter().enumerate() {
            r[i] /= d;
        }
        for (o, d, eta, v) in &self.socs {
            let ub = u.rows(*o, *d);
            let mut vju = v[0] * ub[0];
            for i in 1..*d {
                vju -= v[i] * ub[i];
            }
            for i in 0..*d {
                let (jv, ju) = if i == 0 { (v[0], ub[0]) } else { (-v[i], -ub[i]) };
                r[o + i] = (2.0 * jv * vju - ju) / eta;
            }
        }
        r
    }
}
