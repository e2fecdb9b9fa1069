//! Dense constrained nonlinear programming: minimize a smooth objective
//! subject to equality constraints, inequality constraints, and box bounds.
//!
//! The solver is an augmented Lagrangian method with a projected-BFGS inner
//! loop, sized for the small dense problems this crate produces (a few dozen
//! variables, a handful of constraints). Derivatives come from central finite
//! differences unless the caller differentiates by hand inside the callbacks.
//!
//! A solution is reported converged only when the projected first-order
//! (KKT) residual and the exact constraint violations, re-evaluated at the
//! final point, pass the configured tolerances. Everything is deterministic:
//! identical inputs give bit-identical outputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Problem statement: callbacks plus box bounds.
///
/// Equality constraints are satisfied at zero; inequality constraints are
/// feasible when `>= 0`. Callbacks must be deterministic functions of `x`
/// and may be evaluated slightly outside the box (by one finite-difference
/// step) while derivatives are probed.
pub struct NlpProblem<'a> {
    dim: usize,
    objective: Box<dyn Fn(&[f64]) -> f64 + 'a>,
    equality: Option<Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>>,
    inequality: Option<Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<'a> NlpProblem<'a> {
    /// Unbounded problem with the given objective.
    pub fn new(dim: usize, objective: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        Self {
            dim,
            objective: Box::new(objective),
            equality: None,
            inequality: None,
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    /// Equality constraints: feasible when every component is zero.
    pub fn with_equality(mut self, c: impl Fn(&[f64]) -> Vec<f64> + 'a) -> Self {
        self.equality = Some(Box::new(c));
        self
    }

    /// Inequality constraints: feasible when every component is `>= 0`.
    pub fn with_inequality(mut self, g: impl Fn(&[f64]) -> Vec<f64> + 'a) -> Self {
        self.inequality = Some(Box::new(g));
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn validate(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "initial point".into(),
                expected: self.dim,
                actual: x0.len(),
            });
        }
        if self.lower.len() != self.dim || self.upper.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "bounds".into(),
                expected: self.dim,
                actual: self.lower.len().min(self.upper.len()),
            });
        }
        for i in 0..self.dim {
            if self.lower[i] > self.upper[i] {
                return Err(Error::InvalidParameter {
                    name: "bounds",
                    reason: format!(
                        "lower[{i}] = {} exceeds upper[{i}] = {}",
                        self.lower[i], self.upper[i]
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Solver knobs. `max_iterations` counts major (multiplier update)
/// iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct NlpConfig {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    pub constraint_tolerance: f64,
    pub finite_difference_step: f64,
}

impl Default for NlpConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            kkt_tolerance: 1e-8,
            constraint_tolerance: 1e-8,
            finite_difference_step: 1e-6,
        }
    }
}

impl NlpConfig {
    fn validate(&self) -> Result<()> {
        let all_pos = self.max_iterations > 0
            && self.kkt_tolerance > 0.0
            && self.constraint_tolerance > 0.0
            && self.finite_difference_step > 0.0;
        if !all_pos {
            return Err(Error::InvalidParameter {
                name: "NlpConfig",
                reason: "all fields must be positive".into(),
            });
        }
        Ok(())
    }
}

/// Result of one solve. Violations are exact re-evaluations at `x_star`.
#[derive(Debug, Clone, PartialEq)]
pub struct NlpSolution {
    pub x_star: Vec<f64>,
    pub objective_value: f64,
    pub max_equality_violation: f64,
    pub max_inequality_violation: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Central-difference gradient `(f(x + h e_k) - f(x - h e_k)) / (2h)`.
pub fn finite_diff_gradient(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("must be > 0, got {h}"),
        });
    }
    let mut xp = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for k in 0..x.len() {
        let orig = xp[k];
        xp[k] = orig + h;
        let fp = f(&xp);
        xp[k] = orig - h;
        let fm = f(&xp);
        xp[k] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite {
                what: format!("objective near component {k}"),
            });
        }
        g[k] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

struct Evaluation {
    f: f64,
    ceq: Vec<f64>,
    cineq: Vec<f64>,
}

struct Workspace<'p, 'a> {
    problem: &'p NlpProblem<'a>,
}

impl Workspace<'_, '_> {
    fn eval(&self, x: &[f64]) -> Evaluation {
        let f = (self.problem.objective)(x);
        let ceq = self.problem.equality.as_ref().map_or(Vec::new(), |c| c(x));
        let cineq = self
            .problem
            .inequality
            .as_ref()
            .map_or(Vec::new(), |g| g(x));
        Evaluation { f, ceq, cineq }
    }

    /// One central-difference sweep giving the objective gradient and both
    /// constraint Jacobians at once.
    fn fd_derivatives(
        &self,
        x: &[f64],
        h: f64,
        n_eq: usize,
        n_ineq: usize,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let dim = x.len();
        let mut grad = DVector::zeros(dim);
        let mut jeq = DMatrix::zeros(n_eq, dim);
        let mut jineq = DMatrix::zeros(n_ineq, dim);
        let mut xp = x.to_vec();
        for k in 0..dim {
            let orig = xp[k];
            xp[k] = orig + h;
            let plus = self.eval(&xp);
            xp[k] = orig - h;
            let minus = self.eval(&xp);
            xp[k] = orig;
            if !plus.f.is_finite() || !minus.f.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("objective near component {k}"),
                });
            }
            grad[k] = (plus.f - minus.f) / (2.0 * h);
            for i in 0..n_eq {
                jeq[(i, k)] = (plus.ceq[i] - minus.ceq[i]) / (2.0 * h);
            }
            for i in 0..n_ineq {
                jineq[(i, k)] = (plus.cineq[i] - minus.cineq[i]) / (2.0 * h);
            }
        }
        Ok((grad, jeq, jineq))
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

fn augmented_value(ev: &Evaluation, nu: &[f64], lam: &[f64], rho: f64) -> f64 {
    let mut phi = ev.f;
    for (i, &c) in ev.ceq.iter().enumerate() {
        phi += -nu[i] * c + 0.5 * rho * c * c;
    }
    for (i, &g) in ev.cineq.iter().enumerate() {
        let t = (lam[i] - rho * g).max(0.0);
        phi += (t * t - lam[i] * lam[i]) / (2.0 * rho);
    }
    phi
}

/// Gradient of the augmented Lagrangian assembled from component
/// derivatives; equals the Lagrangian gradient at the first-order multiplier
/// estimates.
fn augmented_gradient(
    grad_f: &DVector<f64>,
    jeq: &DMatrix<f64>,
    jineq: &DMatrix<f64>,
    ev: &Evaluation,
    nu: &[f64],
    lam: &[f64],
    rho: f64,
) -> DVector<f64> {
    let mut g = grad_f.clone();
    for i in 0..ev.ceq.len() {
        let coeff = rho * ev.ceq[i] - nu[i];
        for k in 0..g.len() {
            g[k] += coeff * jeq[(i, k)];
        }
    }
    for i in 0..ev.cineq.len() {
        let t = (lam[i] - rho * ev.cineq[i]).max(0.0);
        if t > 0.0 {
            for k in 0..g.len() {
                g[k] -= t * jineq[(i, k)];
            }
        }
    }
    g
}

/// Infinity norm of the projected gradient step `P(x - g) - x`.
fn projected_residual(x: &[f64], g: &DVector<f64>, lower: &[f64], upper: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..x.len() {
        let step = (x[i] - g[i]).clamp(lower[i], upper[i]) - x[i];
        r = r.max(step.abs());
    }
    r
}

fn violations(ev: &Evaluation) -> (f64, f64) {
    let eq = ev.ceq.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let ineq = ev.cineq.iter().fold(0.0f64, |m, g| m.max((-g).max(0.0)));
    (eq, ineq)
}

#[derive(Clone)]
struct BestIterate {
    x: Vec<f64>,
    f: f64,
    viol: f64,
}

impl BestIterate {
    fn consider(&mut self, x: &[f64], f: f64, viol: f64, tol: f64) {
        let self_feasible = self.viol <= tol;
        let other_feasible = viol <= tol;
        let better = match (self_feasible, other_feasible) {
            (true, true) => f < self.f,
            (true, false) => false,
            (false, true) => true,
            (false, false) => viol < self.viol,
        };
        if better {
            self.x = x.to_vec();
            self.f = f;
            self.viol = viol;
        }
    }
}

/// Minimizes `problem` starting from `x0` (projected onto the box first).
///
/// Converged means: projected KKT residual at the first-order multiplier
/// estimates within `kkt_tolerance`, and every constraint within
/// `constraint_tolerance`, both re-checked at `x_star`. A non-converged run
/// returns the most feasible, lowest-objective iterate seen.
pub fn minimize(problem: &NlpProblem, x0: &[f64], config: &NlpConfig) -> Result<NlpSolution> {
    problem.validate(x0)?;
    config.validate()?;
    let ws = Workspace { problem };
    let dim = problem.dim;
    let h = config.finite_difference_step;

    let mut x = x0.to_vec();
    project(&mut x, &problem.lower, &problem.upper);
    let ev0 = ws.eval(&x);
    if !ev0.f.is_finite() {
        return Err(Error::NonFinite {
            what: "objective at x0".into(),
        });
    }
    let n_eq = ev0.ceq.len();
    let n_ineq = ev0.cineq.len();

    let (eq0, ineq0) = violations(&ev0);
    let mut best = BestIterate {
        x: x.clone(),
        f: ev0.f,
        viol: eq0.max(ineq0),
    };

    let mut nu = vec![0.0; n_eq];
    let mut lam = vec![0.0; n_ineq];
    let mut rho = 10.0;
    let unconstrained = n_eq == 0 && n_ineq == 0;
    let mut omega = if unconstrained {
        config.kkt_tolerance
    } else {
        1e-3
    };
    let mut eta = 1e-3f64;
    let inner_cap = 120 + 60 * dim;

    let mut majors = 0;
    let mut converged = false;
    while majors < config.max_iterations {
        majors += 1;
        let ev = inner_minimize(
            &ws, &mut x, &nu, &lam, rho, omega.max(config.kkt_tolerance), h, inner_cap, n_eq,
            n_ineq,
        )?;

        let (eq_v, ineq_v) = violations(&ev);
        best.consider(&x, ev.f, eq_v.max(ineq_v), config.constraint_tolerance);

        // Feasibility measure including complementarity for inequalities.
        let mut feas = eq_v;
        for (i, &g) in ev.cineq.iter().enumerate() {
            feas = feas.max(g.min(lam[i] / rho).abs());
        }

        // Exact convergence check at the current point.
        if eq_v <= config.constraint_tolerance && ineq_v <= config.constraint_tolerance {
            let (grad_f, jeq, jineq) = ws.fd_derivatives(&x, h, n_eq, n_ineq)?;
            let g_al = augmented_gradient(&grad_f, &jeq, &jineq, &ev, &nu, &lam, rho);
            let kkt = projected_residual(&x, &g_al, &problem.lower, &problem.upper);
            if kkt <= config.kkt_tolerance {
                converged = true;
                best.consider(&x, ev.f, eq_v.max(ineq_v), config.constraint_tolerance);
                break;
            }
        }
        if unconstrained {
            // Inner solve already ran to the KKT tolerance; the residual is
            // as small as the line search can make it.
            converged = {
                let (grad_f, jeq, jineq) = ws.fd_derivatives(&x, h, n_eq, n_ineq)?;
                let g_al = augmented_gradient(&grad_f, &jeq, &jineq, &ev, &nu, &lam, rho);
                projected_residual(&x, &g_al, &problem.lower, &problem.upper)
                    <= config.kkt_tolerance
            };
            break;
        }

        if feas <= eta {
            for (i, &c) in ev.ceq.iter().enumerate() {
                nu[i] -= rho * c;
            }
            for (i, &g) in ev.cineq.iter().enumerate() {
                lam[i] = (lam[i] - rho * g).max(0.0);
            }
            omega = (omega * 0.1).max(config.kkt_tolerance);
            eta = (eta * 0.2).max(0.1 * config.constraint_tolerance);
        } else {
            rho = (rho * 10.0).min(1e12);
            omega = (omega * 0.5).max(config.kkt_tolerance);
        }
    }

    let x_star = if converged { x } else { best.x.clone() };
    let ev = ws.eval(&x_star);
    let (eq_v, ineq_v) = violations(&ev);
    Ok(NlpSolution {
        x_star,
        objective_value: ev.f,
        max_equality_violation: eq_v,
        max_inequality_violation: ineq_v,
        converged,
        iterations: majors,
    })
}

/// Projected-BFGS descent on the augmented Lagrangian for fixed multipliers.
/// Returns the evaluation at the final `x`.
#[allow(clippy::too_many_arguments)]
fn inner_minimize(
    ws: &Workspace,
    x: &mut Vec<f64>,
    nu: &[f64],
    lam: &[f64],
    rho: f64,
    omega: f64,
    h: f64,
    inner_cap: usize,
    n_eq: usize,
    n_ineq: usize,
) -> Result<Evaluation> {
    let dim = x.len();
    let lower = &ws.problem.lower;
    let upper = &ws.problem.upper;
    let mut ev = ws.eval(x);
    let mut phi = augmented_value(&ev, nu, lam, rho);
    let mut hinv = DMatrix::<f64>::identity(dim, dim);
    let (grad_f, jeq, jineq) = ws.fd_derivatives(x, h, n_eq, n_ineq)?;
    let mut g = augmented_gradient(&grad_f, &jeq, &jineq, &ev, nu, lam, rho);

    for _ in 0..inner_cap {
        if projected_residual(x, &g, lower, upper) <= omega {
            break;
        }
        let mut d = -(&hinv * &g);
        zero_blocked_directions(x, &mut d, lower, upper);
        if d.dot(&g) >= -1e-14 * g.norm() * d.norm().max(1e-300) {
            hinv = DMatrix::identity(dim, dim);
            d = -g.clone();
            zero_blocked_directions(x, &mut d, lower, upper);
            if d.norm() == 0.0 {
                break;
            }
        }

        // Projected backtracking line search with an Armijo test on the
        // actual displacement.
        let mut alpha = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut ev_new = ev;
        let mut phi_new = phi;
        for _ in 0..60 {
            for i in 0..dim {
                x_new[i] = (x[i] + alpha * d[i]).clamp(lower[i], upper[i]);
            }
            let step_dot: f64 = (0..dim).map(|i| g[i] * (x_new[i] - x[i])).sum();
            let trial = ws.eval(&x_new);
            let trial_phi = augmented_value(&trial, nu, lam, rho);
            if trial_phi.is_finite() && trial_phi <= phi + 1e-4 * step_dot {
                ev_new = trial;
                phi_new = trial_phi;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        ev = ev_new;
        if !accepted {
            break;
        }

        let (grad_f, jeq, jineq) = ws.fd_derivatives(&x_new, h, n_eq, n_ineq)?;
        let g_new = augmented_gradient(&grad_f, &jeq, &jineq, &ev, nu, lam, rho);
        let s = DVector::from_iterator(dim, (0..dim).map(|i| x_new[i] - x[i]));
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho_b = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // Sherman-Morrison form of the inverse BFGS update.
            let coeff = (1.0 + rho_b * yhy) * rho_b;
            hinv += coeff * (&s * s.transpose());
            hinv -= rho_b * (&hy * s.transpose() + &s * hy.transpose());
        }
        *x = x_new;
        phi = phi_new;
        g = g_new;
    }
    Ok(ev)
}

/// Zeroes direction components that push an active bound further out.
fn zero_blocked_directions(
    x: &[f64],
    d: &mut DVector<f64>,
    lower: &[f64],
    upper: &[f64],
) {
    for i in 0..x.len() {
        let at_lower =
            lower[i].is_finite() && x[i] - lower[i] <= 1e-12 * (1.0 + lower[i].abs());
        let at_upper =
            upper[i].is_finite() && upper[i] - x[i] <= 1e-12 * (1.0 + upper[i].abs());
        if (at_lower && d[i] < 0.0) || (at_upper && d[i] > 0.0) {
            d[i] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gradient_of_square() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert_relative_eq!(g[0], 6.0, epsilon = 1e-6);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = finite_diff_gradient(|_| 4.2, &[1.0, -2.0, 0.3], 1e-6).unwrap();
        for v in g {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn gradient_matches_analytic_partials() {
        // f = sin(x1) + x1 x2 at (0.5, 2.0): (cos 0.5 + 2, 0.5).
        let g =
            finite_diff_gradient(|x| x[0].sin() + x[0] * x[1], &[0.5, 2.0], 1e-6).unwrap();
        assert_relative_eq!(g[0], 0.5f64.cos() + 2.0, epsilon = 1e-6);
        assert_relative_eq!(g[1], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn gradient_rejects_bad_step() {
        assert!(finite_diff_gradient(|x| x[0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn gradient_rejects_non_finite() {
        assert!(finite_diff_gradient(|x| (x[0] - 1.0).ln(), &[1.0], 1e-6).is_err());
    }

    #[test]
    fn minimize_active_inequality() {
        // min (x-1)^2 s.t. x >= 2, from x0 = 5: lands on the constraint.
        let p = NlpProblem::new(1, |x| (x[0] - 1.0).powi(2))
            .with_inequality(|x| vec![x[0] - 2.0]);
        let sol = minimize(&p, &[5.0], &NlpConfig::default()).unwrap();
        assert!(sol.converged);
        assert_relative_eq!(sol.x_star[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(sol.objective_value, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn minimize_symmetric_equality() {
        let p = NlpProblem::new(2, |x| x[0] * x[0] + x[1] * x[1])
            .with_equality(|x| vec![x[0] + x[1] - 1.0]);
        let sol = minimize(&p, &[1.0, 0.0], &NlpConfig::default()).unwrap();
        assert!(sol.converged);
        assert_relative_eq!(sol.x_star[0], 0.5, epsilon = 1e-6);
        assert_relative_eq!(sol.x_star[1], 0.5, epsilon = 1e-6);
        assert!(sol.max_equality_violation <= 1e-8);
    }

    #[test]
    fn minimize_rosenbrock_in_box() {
        let p = NlpProblem::new(2, |x| {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        })
        .with_bounds(vec![-2.0, -2.0], vec![2.0, 2.0]);
        let sol = minimize(&p, &[-1.2, 1.0], &NlpConfig::default()).unwrap();
        assert!(sol.converged);
        assert_relative_eq!(sol.x_star[0], 1.0, epsilon = 1e-4);
        assert_relative_eq!(sol.x_star[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn minimize_is_deterministic() {
        let solve = || {
            let p = NlpProblem::new(2, |x| {
                (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
            })
            .with_equality(|x| vec![x[0] - x[1]]);
            minimize(&p, &[-1.2, 1.0], &NlpConfig::default()).unwrap()
        };
        let a = solve();
        let b = solve();
        assert_eq!(a.x_star, b.x_star);
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn minimize_projects_infeasible_start() {
        let p = NlpProblem::new(1, |x| x[0] * x[0]).with_bounds(vec![1.0], vec![3.0]);
        let sol = minimize(&p, &[-10.0], &NlpConfig::default()).unwrap();
        assert!(sol.converged);
        assert_relative_eq!(sol.x_star[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn minimize_descends_from_feasible_start() {
        let p = NlpProblem::new(2, |x| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2));
        let x0 = [0.0, 0.0];
        let f0 = (x0[0] - 3.0f64).powi(2) + (x0[1] + 1.0f64).powi(2);
        let sol = minimize(&p, &x0, &NlpConfig::default()).unwrap();
        assert!(sol.objective_value <= f0);
    }

    #[test]
    fn minimize_rejects_dimension_mismatch() {
        let p = NlpProblem::new(2, |x| x[0] + x[1]);
        assert!(minimize(&p, &[0.0], &NlpConfig::default()).is_err());
    }

    #[test]
    fn minimize_rejects_non_finite_start() {
        let p = NlpProblem::new(1, |x| if x[0] == 0.0 { f64::NAN } else { x[0] });
        assert!(minimize(&p, &[0.0], &NlpConfig::default()).is_err());
    }

    #[test]
    fn converged_solutions_respect_constraints_on_reevaluation() {
        // Nonlinear equality and inequality together with a box.
        let p = NlpProblem::new(2, |x| (x[0] - 2.0).powi(2) + (x[1] - 0.5).powi(2))
            .with_equality(|x| vec![x[0] * x[0] + x[1] * x[1] - 1.0])
            .with_inequality(|x| vec![x[1]])
            .with_bounds(vec![-2.0, -2.0], vec![2.0, 2.0]);
        let sol = minimize(&p, &[0.5, 0.5], &NlpConfig::default()).unwrap();
        assert!(sol.converged);
        let c = sol.x_star[0] * sol.x_star[0] + sol.x_star[1] * sol.x_star[1] - 1.0;
        assert!(c.abs() <= 1e-8);
        assert!(sol.x_star[1] >= -1e-8);
        assert!(sol.max_equality_violation <= 1e-8);
        assert!(sol.max_inequality_violation <= 1e-8);
    }
}
