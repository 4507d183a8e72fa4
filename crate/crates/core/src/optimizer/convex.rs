//! Smooth convex functions assembled from a few structurally convex atoms,
//! and the problem descriptions handed to the interior-point solver.

use nalgebra::{DMatrix, DVector};

/// Sparse affine form `Σ w_i x_i + offset`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub offset: f64,
}

impl Affine {
    pub fn new(terms: Vec<(usize, f64)>, offset: f64) -> Self {
        Self { terms, offset }
    }

    pub fn var(i: usize) -> Self {
        Self { terms: vec![(i, 1.0)], offset: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, w)| w * x[i]).sum::<f64>() + self.offset
    }
}

/// `Σ linear + Σ c (affine)² + Σ c / x_i - Σ c ln(affine)` with every `c >= 0`.
///
/// Each atom is convex on its domain, so every sum is convex by construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexFn {
    pub linear: Affine,
    pub squares: Vec<(f64, Affine)>,
    pub reciprocals: Vec<(f64, usize)>,
    pub neg_logs: Vec<(f64, Affine)>,
}

/// Value, gradient and Hessian of a function at one point.
#[derive(Debug, Clone)]
pub struct Eval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl ConvexFn {
    pub fn affine(terms: Vec<(usize, f64)>, offset: f64) -> Self {
        Self { linear: Affine::new(terms, offset), ..Default::default() }
    }

    pub fn add_linear(&mut self, i: usize, w: f64) -> &mut Self {
        self.linear.terms.push((i, w));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.linear.offset += c;
        self
    }

    pub fn add_square(&mut self, coef: f64, form: Affine) -> &mut Self {
        debug_assert!(coef >= 0.0, "negative square coefficient breaks convexity");
        if coef != 0.0 {
            self.squares.push((coef, form));
        }
        self
    }

    pub fn add_reciprocal(&mut self, coef: f64, i: usize) -> &mut Self {
        debug_assert!(coef >= 0.0);
        if coef != 0.0 {
            self.reciprocals.push((coef, i));
        }
        self
    }

    pub fn add_neg_log(&mut self, coef: f64, arg: Affine) -> &mut Self {
        debug_assert!(coef >= 0.0);
        if coef != 0.0 {
            self.neg_logs.push((coef, arg));
        }
        self
    }

    /// Function value, or `None` outside the domain.
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.linear.eval(x);
        for (c, f) in &self.squares {
            v += c * f.eval(x).powi(2);
        }
        for &(c, i) in &self.reciprocals {
            if x[i] <= 0.0 {
                return None;
            }
            v += c / x[i];
        }
        for (c, f) in &self.neg_logs {
            let arg = f.eval(x);
            if arg <= 0.0 {
                return None;
            }
            v -= c * arg.ln();
        }
        v.is_finite().then_some(v)
    }

    pub fn eval(&self, x: &[f64]) -> Option<Eval> {
        let n = x.len();
        let value = self.value(x)?;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for &(i, w) in &self.linear.terms {
            grad[i] += w;
        }
        for (c, f) in &self.squares {
            let r = f.eval(x);
            for &(i, wi) in &f.terms {
                grad[i] += 2.0 * c * r * wi;
                for &(j, wj) in &f.terms {
                    hess[(i, j)] += 2.0 * c * wi * wj;
                }
            }
        }
        for &(c, i) in &self.reciprocals {
            grad[i] -= c / (x[i] * x[i]);
            hess[(i, i)] += 2.0 * c / x[i].powi(3);
        }
        for (c, f) in &self.neg_logs {
            let arg = f.eval(x);
            for &(i, wi) in &f.terms {
                grad[i] -= c * wi / arg;
                for &(j, wj) in &f.terms {
                    hess[(i, j)] += c * wi * wj / (arg * arg);
                }
            }
        }
        Some(Eval { value, grad, hess })
    }
}

/// Objective of a subproblem.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Plain(ConvexFn),
    /// `(1/K) Σ exp(g_k(x))`, convex because `exp` is convex and increasing.
    MeanExp(Vec<ConvexFn>),
}

impl Objective {
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        match self {
            Objective::Plain(f) => f.value(x),
            Objective::MeanExp(fs) => {
                let mut s = 0.0;
                for f in fs {
                    s += f.value(x)?.exp();
                }
                let v = s / fs.len() as f64;
                v.is_finite().then_some(v)
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Option<Eval> {
        match self {
            Objective::Plain(f) => f.eval(x),
            Objective::MeanExp(fs) => {
                let n = x.len();
                let w = 1.0 / fs.len() as f64;
                let mut out = Eval { value: 0.0, grad: DVector::zeros(n), hess: DMatrix::zeros(n, n) };
                for f in fs {
                    let e = f.eval(x)?;
                    let s = e.value.exp() * w;
                    out.value += s;
                    out.grad.axpy(s, &e.grad, 1.0);
                    out.hess += (&e.hess + &e.grad * e.grad.transpose()) * s;
                }
                out.value.is_finite().then_some(out)
            }
        }
    }
}

/// `min f0(x)` subject to labelled `f_i(x) <= 0` and `A x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProblem {
    pub n_vars: usize,
    pub objective: Objective,
    pub constraints: Vec<(String, ConvexFn)>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

impl ConvexProblem {
    pub fn new(n_vars: usize, objective: Objective) -> Self {
        Self {
            n_vars,
            objective,
            constraints: Vec::new(),
            eq_matrix: DMatrix::zeros(0, n_vars),
            eq_rhs: DVector::zeros(0),
        }
    }

    pub fn constrain(&mut self, label: impl Into<String>, f: ConvexFn) {
        self.constraints.push((label.into(), f));
    }

    /// `lo <= x_i`.
    pub fn lower_bound(&mut self, label: impl Into<String>, i: usize, lo: f64) {
        self.constrain(label, ConvexFn::affine(vec![(i, -1.0)], lo));
    }

    /// `x_i <= hi`.
    pub fn upper_bound(&mut self, label: impl Into<String>, i: usize, hi: f64) {
        self.constrain(label, ConvexFn::affine(vec![(i, 1.0)], -hi));
    }

    pub fn add_equality(&mut self, row: &[(usize, f64)], rhs: f64) {
        let m = self.eq_matrix.nrows();
        let mut a = self.eq_matrix.clone().insert_row(m, 0.0);
        for &(i, w) in row {
            a[(m, i)] = w;
        }
        self.eq_matrix = a;
        self.eq_rhs = self.eq_rhs.clone().insert_row(m, rhs);
    }

    /// Largest constraint value (positive means violated), `+inf` outside a domain.
    pub fn max_violation(&self, x: &[f64]) -> (f64, Option<&str>) {
        let mut worst = (f64::NEG_INFINITY, None);
        for (label, f) in &self.constraints {
            let v = f.value(x).unwrap_or(f64::INFINITY);
            if v > worst.0 {
                worst = (v, Some(label.as_str()));
            }
        }
        let eq = &self.eq_matrix * DVector::from_column_slice(x) - &self.eq_rhs;
        let eq_max = eq.amax();
        if eq_max > worst.0 {
            worst = (eq_max, Some("equality"));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConvexFn {
        let mut f = ConvexFn::affine(vec![(0, 0.3), (2, -1.0)], 0.5);
        f.add_square(0.7, Affine::new(vec![(0, 1.0), (1, -2.0)], 0.1))
            .add_reciprocal(0.4, 1)
            .add_neg_log(1.3, Affine::new(vec![(2, 2.0), (0, 1.0)], 1.0));
        f
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = sample();
        let x = [0.4, 0.8, 0.3];
        let e = f.eval(&x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let g = (f.value(&xp).unwrap() - f.value(&xm).unwrap()) / (2.0 * h);
            assert!((g - e.grad[i]).abs() < 1e-6);
            let ep = f.eval(&xp).unwrap();
            let em = f.eval(&xm).unwrap();
            for j in 0..3 {
                assert!(((ep.grad[j] - em.grad[j]) / (2.0 * h) - e.hess[(i, j)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn mean_exp_derivatives() {
        let obj = Objective::MeanExp(vec![sample(), ConvexFn::affine(vec![(1, 0.5)], -0.2)]);
        let x = [0.4, 0.8, 0.3];
        let e = obj.eval(&x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let g = (obj.value(&xp).unwrap() - obj.value(&xm).unwrap()) / (2.0 * h);
            assert!((g - e.grad[i]).abs() < 1e-6 * (1.0 + g.abs()));
        }
        assert!(e.hess.clone().symmetric_eigenvalues().min() >= -1e-12);
    }

    #[test]
    fn domain_violations_are_reported() {
        let f = sample();
        assert!(f.value(&[0.4, -0.1, 0.3]).is_none());
        assert!(f.value(&[-5.0, 0.8, 0.3]).is_none());
    }
}
