//! Log-barrier interior-point method for small smooth convex programs.

use nalgebra::{DMatrix, DVector};

use super::convex::{Affine, ConvexFn, ConvexProblem, Eval, Objective};
use crate::error::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    /// Target duality gap `m/t`.
    pub tol: f64,
    /// Allowed equality residual.
    pub feas_tol: f64,
    /// Budget of Newton steps over all centerings.
    pub max_iter: usize,
    /// Barrier growth factor.
    pub mu: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { tol: 1e-8, feas_tol: 1e-10, max_iter: 1000, mu: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Infinity norm of (stationarity, duality gap, primal feasibility).
    pub kkt_residual: f64,
}

const LS_ALPHA: f64 = 0.01;
const LS_BETA: f64 = 0.5;
const UNBOUNDED_NORM: f64 = 1e10;

/// Solves `problem` from `x0`, running a phase-one search first when `x0` is not strictly feasible.
pub fn solve_convex_subproblem(problem: &ConvexProblem, x0: &[f64], opts: &IpmOptions) -> Result<IpmSolution, SolverError> {
    let x0 = project_onto_equalities(problem, x0);
    let start = if strictly_feasible(problem, &x0) { x0 } else { phase_one(problem, &x0, opts)? };
    barrier(problem, &start, opts)
}

/// Least-squares correction of `x0` onto `A x = b`.
fn project_onto_equalities(problem: &ConvexProblem, x0: &[f64]) -> Vec<f64> {
    let a = &problem.eq_matrix;
    let x = DVector::from_column_slice(x0);
    if a.nrows() == 0 {
        return x0.to_vec();
    }
    let r = a * &x - &problem.eq_rhs;
    if r.amax() == 0.0 {
        return x0.to_vec();
    }
    match (a * a.transpose()).pseudo_inverse(1e-12) {
        Ok(g) => (x - a.transpose() * (g * r)).as_slice().to_vec(),
        Err(_) => x0.to_vec(),
    }
}

fn strictly_feasible(problem: &ConvexProblem, x: &[f64]) -> bool {
    let eq = &problem.eq_matrix * DVector::from_column_slice(x) - &problem.eq_rhs;
    problem.objective.value(x).is_some()
        && eq.iter().all(|r| r.abs() <= 1e-11)
        && problem.constraints.iter().all(|(_, f)| f.value(x).is_some_and(|v| v < -INTERIOR_MARGIN))
}

/// `min s + (ε/2)|x - x0|²` subject to `f_i(x) <= s`, `s >= -1`, `A x = b`.
///
/// A strictly feasible point exists iff the optimum has `s < 0`; the small
/// proximal term keeps the barrier bounded along recession directions of the
/// feasible set.
fn phase_one(problem: &ConvexProblem, x0: &[f64], opts: &IpmOptions) -> Result<Vec<f64>, SolverError> {
    const PROXIMAL: f64 = 1e-6;
    let n = problem.n_vars;
    let mut worst = f64::NEG_INFINITY;
    for (_, f) in &problem.constraints {
        worst = worst.max(f.value(x0).ok_or(SolverError::Domain)?);
    }
    let mut objective = ConvexFn::affine(vec![(n, 1.0)], 0.0);
    for (i, &v) in x0.iter().enumerate() {
        objective.add_square(PROXIMAL / 2.0, Affine::new(vec![(i, 1.0)], -v));
    }
    let mut aux = ConvexProblem::new(n + 1, Objective::Plain(objective));
    for (label, f) in &problem.constraints {
        let mut g = f.clone();
        g.add_linear(n, -1.0);
        aux.constrain(label.clone(), g);
    }
    aux.lower_bound("phase-one floor", n, -1.0);
    aux.eq_matrix = problem.eq_matrix.clone().insert_column(n, 0.0);
    aux.eq_rhs = problem.eq_rhs.clone();
    let mut start = x0.to_vec();
    start.push(worst.max(-0.5) + 1.0);
    // Stop as soon as duality certifies `s* > 0`.
    let certified = |x: &[f64], gap: f64| x[n] - gap > 0.0;
    let sol = barrier_with_stop(&aux, &start, opts, Some(&certified))?;
    let s = sol.x[n];
    let x = sol.x[..n].to_vec();
    let mut worst = (f64::NEG_INFINITY, "");
    for (label, f) in &problem.constraints {
        let v = f.value(&x).unwrap_or(f64::INFINITY);
        if v > worst.0 {
            worst = (v, label.as_str());
        }
    }
    if s >= 0.0 || worst.0 >= 0.0 {
        return Err(SolverError::Infeasible { min_violation: s.max(worst.0), worst: worst.1.to_string() });
    }
    if problem.objective.value(&x).is_none() {
        return Err(SolverError::Domain);
    }
    Ok(x)
}

struct Point {
    obj: Eval,
    cons: Vec<Eval>,
}

fn evaluate(problem: &ConvexProblem, x: &[f64]) -> Option<Point> {
    let obj = problem.objective.eval(x)?;
    let mut cons = Vec::with_capacity(problem.constraints.len());
    for (_, c) in &problem.constraints {
        let e = c.eval(x)?;
        if e.value >= 0.0 {
            return None;
        }
        cons.push(e);
    }
    Some(Point { obj, cons })
}

/// `t f0(x) - Σ ln(-f_i(x))`, or `None` outside the strict interior.
fn barrier_value(problem: &ConvexProblem, x: &[f64], t: f64) -> Option<f64> {
    let mut v = t * problem.objective.value(x)?;
    for (_, c) in &problem.constraints {
        let fi = c.value(x)?;
        if fi >= 0.0 {
            return None;
        }
        v -= (-fi).ln();
    }
    v.is_finite().then_some(v)
}

const MAX_CENTERING_STEPS: usize = 200;
const T_INIT: f64 = 1.0;
const CENTERING_TOL: f64 = 1e-10;
/// Newton decrement below which the full step is taken without a value test.
const QUADRATIC_REGION: f64 = 1e-3;
/// Starts closer than this to a constraint boundary go through phase one.
const INTERIOR_MARGIN: f64 = 1e-9;

/// Log-barrier method: Newton centering on `t f0 - Σ ln(-f_i)` for increasing `t`.
fn barrier(problem: &ConvexProblem, x0: &[f64], opts: &IpmOptions) -> Result<IpmSolution, SolverError> {
    barrier_with_stop(problem, x0, opts, None)
}

type StopRule<'a> = &'a dyn Fn(&[f64], f64) -> bool;

fn barrier_with_stop(
    problem: &ConvexProblem,
    x0: &[f64],
    opts: &IpmOptions,
    stop: Option<StopRule>,
) -> Result<IpmSolution, SolverError> {
    let n = problem.n_vars;
    let m = problem.constraints.len();
    let p_eq = problem.eq_matrix.nrows();
    let mut x = DVector::from_column_slice(x0);
    if evaluate(problem, x.as_slice()).is_none() {
        return Err(SolverError::Domain);
    }
    let mut t = T_INIT;
    let mut total_steps = 0;
    let mut nu = DVector::zeros(p_eq);
    let mut last_dx = DVector::zeros(n);
    loop {
        // Centering.
        let mut centered = false;
        for _ in 0..MAX_CENTERING_STEPS {
            let point = evaluate(problem, x.as_slice()).ok_or(SolverError::Domain)?;
            let mut grad = &point.obj.grad * t;
            let mut hess = &point.obj.hess * t;
            for e in &point.cons {
                let inv = -1.0 / e.value;
                grad.axpy(inv, &e.grad, 1.0);
                hess += &e.hess * inv;
                hess += (&e.grad * e.grad.transpose()) * (inv * inv);
            }
            let r_pri = &problem.eq_matrix * &x - &problem.eq_rhs;
            let mut kkt = DMatrix::zeros(n + p_eq, n + p_eq);
            kkt.view_mut((0, 0), (n, n)).copy_from(&hess);
            kkt.view_mut((0, n), (n, p_eq)).copy_from(&problem.eq_matrix.transpose());
            kkt.view_mut((n, 0), (p_eq, n)).copy_from(&problem.eq_matrix);
            let mut rhs = DVector::zeros(n + p_eq);
            rhs.rows_mut(0, n).copy_from(&(-&grad));
            rhs.rows_mut(n, p_eq).copy_from(&(-&r_pri));
            let step = solve_kkt(kkt, &rhs).ok_or(SolverError::Singular)?;
            let dx = step.rows(0, n).into_owned();
            nu = step.rows(n, p_eq).into_owned() / t;
            let decrement = -grad.dot(&dx);
            last_dx = dx.clone();
            total_steps += 1;
            let phi = barrier_value(problem, x.as_slice(), t).ok_or(SolverError::Domain)?;
            // Stop once the decrease is below a few ulps of the barrier value, or once the
            // off-center error `λ²/2t` in the objective is negligible next to the target gap.
            let enough = CENTERING_TOL.max(16.0 * f64::EPSILON * phi.abs()).max(1e-3 * t * opts.tol);
            if decrement / 2.0 <= enough && r_pri.amax() <= opts.feas_tol {
                centered = true;
                break;
            }
            if decrement < QUADRATIC_REGION && r_pri.amax() <= opts.feas_tol {
                let xn = &x + &dx;
                if evaluate(problem, xn.as_slice()).is_some() {
                    x = xn;
                    continue;
                }
            }
            let mut s = 1.0;
            let mut moved = false;
            while s > 1e-14 {
                let xn = &x + &dx * s;
                if let Some(v) = barrier_value(problem, xn.as_slice(), t) {
                    // Armijo test; while the equality residual is open any interior step is taken.
                    if v <= phi - LS_ALPHA * s * decrement || r_pri.amax() > opts.feas_tol {
                        x = xn;
                        moved = true;
                        break;
                    }
                }
                s *= LS_BETA;
            }
            if !moved {
                // Nothing representable improves the barrier: centered to working precision.
                centered = r_pri.amax() <= opts.feas_tol && decrement <= 1e-6 * (1.0 + phi.abs());
                break;
            }
            if x.amax() > UNBOUNDED_NORM {
                return Err(SolverError::Unbounded(UNBOUNDED_NORM));
            }
        }
        let point = evaluate(problem, x.as_slice()).ok_or(SolverError::Domain)?;
        // Dual estimate linearized along the last Newton step.
        let lambda = DVector::from_iterator(
            m,
            point.cons.iter().map(|e| {
                let corr = 1.0 + e.grad.dot(&last_dx) / -e.value;
                (-corr.max(0.0) / (t * e.value)).max(0.0)
            }),
        );
        let mut r_dual = point.obj.grad.clone();
        for (e, &l) in point.cons.iter().zip(lambda.iter()) {
            r_dual.axpy(l, &e.grad, 1.0);
        }
        r_dual += problem.eq_matrix.transpose() * &nu;
        let r_pri = &problem.eq_matrix * &x - &problem.eq_rhs;
        let gap = m as f64 / t;
        let residual = r_dual.amax().max(r_pri.amax()).max(gap);
        if !centered {
            return Err(SolverError::Stalled { iterations: total_steps, residual });
        }
        if gap > opts.tol && total_steps >= opts.max_iter {
            return Err(SolverError::Stalled { iterations: total_steps, residual });
        }
        if gap <= opts.tol || stop.is_some_and(|f| f(x.as_slice(), gap)) {
            return Ok(IpmSolution {
                objective: point.obj.value,
                x: x.as_slice().to_vec(),
                duals: lambda.as_slice().to_vec(),
                iterations: total_steps,
                kkt_residual: residual,
            });
        }
        t *= opts.mu;
    }
}

fn solve_kkt(kkt: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(sol) = kkt.clone().lu().solve(rhs) {
        if sol.iter().all(|v| v.is_finite()) {
            return Some(sol);
        }
    }
    let n = kkt.nrows();
    let reg = 1e-12 * (1.0 + kkt.amax());
    let shifted = kkt + DMatrix::identity(n, n) * reg;
    shifted.lu().solve(rhs).filter(|s| s.iter().all(|v| v.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_quadratic() {
        // (x0 - 1)^2 + 2 (x0 + x1 - 3)^2  ->  x = (1, 2)
        let mut f = ConvexFn::default();
        f.add_square(1.0, Affine::new(vec![(0, 1.0)], -1.0)).add_square(2.0, Affine::new(vec![(0, 1.0), (1, 1.0)], -3.0));
        let p = ConvexProblem::new(2, Objective::Plain(f));
        let s = solve_convex_subproblem(&p, &[5.0, -4.0], &IpmOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-8 && (s.x[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn linear_objective_over_box_hits_a_vertex() {
        let p = {
            let mut p = ConvexProblem::new(3, Objective::Plain(ConvexFn::affine(vec![(0, 1.0), (1, -2.0), (2, 0.5)], 0.0)));
            for i in 0..3 {
                p.lower_bound(format!("lo{i}"), i, -1.0);
                p.upper_bound(format!("hi{i}"), i, 2.0);
            }
            p
        };
        let s = solve_convex_subproblem(&p, &[0.0; 3], &IpmOptions::default()).unwrap();
        let expect = [-1.0, 2.0, -1.0];
        assert!(s.x.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-7), "{:?}", s.x);
        assert!((s.objective + 5.5).abs() < 1e-7);
    }

    #[test]
    fn equality_constrained_from_infeasible_start() {
        // min x0^2 + x1^2 s.t. x0 + x1 = 1, x0 >= 0.7
        let mut f = ConvexFn::default();
        f.add_square(1.0, Affine::var(0)).add_square(1.0, Affine::var(1));
        let mut p = ConvexProblem::new(2, Objective::Plain(f));
        p.add_equality(&[(0, 1.0), (1, 1.0)], 1.0);
        p.lower_bound("x0>=0.7", 0, 0.7);
        let s = solve_convex_subproblem(&p, &[0.0, 0.0], &IpmOptions::default()).unwrap();
        assert!((s.x[0] - 0.7).abs() < 1e-7 && (s.x[1] - 0.3).abs() < 1e-7);
    }

    #[test]
    fn reports_infeasibility() {
        let mut p = ConvexProblem::new(1, Objective::Plain(ConvexFn::affine(vec![(0, 1.0)], 0.0)));
        p.lower_bound("x>=2", 0, 2.0);
        p.upper_bound("x<=1", 0, 1.0);
        let err = solve_convex_subproblem(&p, &[0.0], &IpmOptions::default()).unwrap_err();
        assert!(matches!(err, SolverError::Infeasible { .. }), "{err:?}");
    }

    #[test]
    fn nonlinear_constraints_and_mean_exp() {
        // min mean(exp(x0), exp(x1)) s.t. -ln(x0 + x1) <= -ln 2 (x0 + x1 >= 2), x1 >= 0.2 + 1/x0 - 1
        let obj = Objective::MeanExp(vec![ConvexFn::affine(vec![(0, 1.0)], 0.0), ConvexFn::affine(vec![(1, 1.0)], 0.0)]);
        let mut p = ConvexProblem::new(2, obj);
        let mut c = ConvexFn::affine(vec![], 2f64.ln());
        c.add_neg_log(1.0, Affine::new(vec![(0, 1.0), (1, 1.0)], 0.0));
        p.constrain("sum", c);
        p.lower_bound("x0>0", 0, 0.1);
        let s = solve_convex_subproblem(&p, &[3.0, 3.0], &IpmOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-6 && (s.x[1] - 1.0).abs() < 1e-6, "{:?}", s.x);
        assert!(s.kkt_residual < 1e-7, "{}", s.kkt_residual);
    }
}

