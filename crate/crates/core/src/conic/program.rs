//! Sparse description of a conic program
//! `min cᵀx  s.t.  A x = b,  h − G x ∈ K`.

use super::cones::ConeSpec;

/// Affine expression `constant + Σ coef · x[var]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: usize, coef: f64) -> Self {
        Self {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn add(mut self, v: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn plus(mut self, other: &Affine, scale: f64) -> Self {
        for &(v, c) in &other.terms {
            self.terms.push((v, c * scale));
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn shift(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub objective: Affine,
    /// Each expression must equal zero.
    pub equalities: Vec<Affine>,
    /// Each expression must be non-negative.
    pub nonneg: Vec<Affine>,
    /// Each group `(t, u_1, …)` must satisfy `t ≥ ‖u‖`.
    pub socs: Vec<Vec<Affine>>,
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn eq(&mut self, e: Affine) {
        self.equalities.push(e);
    }

    /// `lhs ≤ rhs`.
    pub fn le(&mut self, lhs: Affine, rhs: Affine) {
        self.nonneg.push(rhs.plus(&lhs, -1.0));
    }

    pub fn soc(&mut self, parts: Vec<Affine>) {
        assert!(parts.len() >= 2, "a second-order cone needs at least two components");
        self.socs.push(parts);
    }

    pub fn cones(&self) -> ConeSpec {
        ConeSpec {
            nonneg: self.nonneg.len(),
            soc: self.socs.iter().map(|s| s.len()).collect(),
        }
    }

    /// Conic rows in solver order (orthant first), as `(G row, h)` with `h − G x ∈ K`.
    pub fn cone_rows(&self) -> impl Iterator<Item = &Affine> {
        self.nonneg.iter().chain(self.socs.iter().flatten())
    }

    /// Largest violation of any constraint at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for e in &self.equalities {
            worst = worst.max(e.eval(x).abs());
        }
        for e in &self.nonneg {
            worst = worst.max(-e.eval(x));
        }
        for s in &self.socs {
            let t = s[0].eval(x);
            let n = s[1..].iter().map(|u| u.eval(x).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(n - t);
        }
        worst
    }
}
