//! Shape estimation from tendon displacements: the dimensionless statics
//! problem, its friction-free baseline, and friction/stretch calibration.
//!
//! The estimator searches for joint angles `q` (plus one relative tension
//! per additional taut tendon) minimizing the mismatch between the
//! normalized bending moments and the normalized joint angles,
//!
//! ```text
//! cost(q, lambda) = || m/max(|m|, eps) - q/max(|q|, eps) ||^2
//! ```
//!
//! subject to one tendon-displacement equality constraint per actuated
//! tendon, joint-angle limits, and `lambda >= 0`. With uniform bending
//! stiffness the equilibrium shape satisfies `q` proportional to `m`, so the
//! normalized vectors must agree; the tension scale drops out entirely,
//! which is what makes the model dimensionless.
//!
//! Sign conventions for actuation: a positive commanded displacement pulls
//! (shortens the free length, tendon slides toward the actuator, Capstan
//! exponent `gamma = -1`); a negative one pays out (`gamma = +1`). A tendon
//! commanded to exactly zero keeps its natural free length: it stays slack
//! and carries no tension, but its length constraint still holds.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::geometry::{
    chain_frames, chain_frames_raw, tendon_length, tendon_waypoints_from_frames, JointState,
    RobotGeometry, Vec3,
};
use crate::nlp::{minimize, NlpConfig, NlpProblem, NlpSolution};
use crate::tendon::{accumulate_tendon_moments, propagate_tension, FrictionParams};

/// Per-tendon commanded displacements plus the set of actuated tendons.
///
/// Positive displacement = commanded shortening of the free length.
/// Non-actuated tendons must have zero displacement; an actuated tendon may
/// be held at zero (slack, but still constraining its length).
#[derive(Debug, Clone, PartialEq)]
pub struct ActuationCommand {
    displacements: Vec<f64>,
    actuated: Vec<usize>,
}

impl ActuationCommand {
    /// Actuates exactly the tendons with nonzero commanded displacement.
    pub fn from_displacements(displacements: Vec<f64>) -> Result<Self> {
        let actuated = displacements
            .iter()
            .enumerate()
            .filter(|(_, d)| **d != 0.0)
            .map(|(i, _)| i)
            .collect();
        Self::new(displacements, actuated)
    }

    /// Explicit actuated set. Indices must be valid, sorted ascending after
    /// deduplication; non-actuated tendons must carry zero displacement.
    pub fn new(displacements: Vec<f64>, mut actuated: Vec<usize>) -> Result<Self> {
        if displacements.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite {
                what: "commanded displacements".into(),
            });
        }
        actuated.sort_unstable();
        actuated.dedup();
        for &i in &actuated {
            if i >= displacements.len() {
                return Err(Error::IndexOutOfRange {
                    what: "actuated tendon",
                    index: i,
                    count: displacements.len(),
                });
            }
        }
        for (i, &d) in displacements.iter().enumerate() {
            if d != 0.0 && !actuated.contains(&i) {
                return Err(Error::InvalidParameter {
                    name: "displacements",
                    reason: format!("tendon {i} has displacement {d} but is not actuated"),
                });
            }
        }
        Ok(Self {
            displacements,
            actuated,
        })
    }

    pub fn displacements(&self) -> &[f64] {
        &self.displacements
    }

    pub fn actuated(&self) -> &[usize] {
        &self.actuated
    }
}

/// Solver configuration: initial guess, cost normalization, physical
/// parameters, and the NLP knobs underneath.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Warm start. When set, the solver runs exactly once from here; when
    /// unset it tries a small deterministic family of starts bent toward
    /// the commanded moment direction and keeps the best converged result.
    pub q0: Option<JointState>,
    /// Epsilon of the normalized cost. Defaults to `2n * 1e-9`.
    pub normalization_epsilon: Option<f64>,
    /// Capstan friction coefficient.
    pub mu: f64,
    /// Tendon stretch per unit base tension, meters. The effective geometric
    /// shortening of a command `d` at base tension `F` is `d - c * F`.
    pub stretch_compliance: f64,
    pub nlp: NlpConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            q0: None,
            normalization_epsilon: None,
            mu: 0.0,
            stretch_compliance: 0.0,
            nlp: NlpConfig::default(),
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("must be >= 0, got {}", self.mu),
            });
        }
        if !(self.stretch_compliance.is_finite() && self.stretch_compliance >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "stretch_compliance",
                reason: format!("must be >= 0, got {}", self.stretch_compliance),
            });
        }
        if let Some(eps) = self.normalization_epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "normalization_epsilon",
                    reason: format!("must be > 0, got {eps}"),
                });
            }
        }
        Ok(())
    }

    fn epsilon(&self, geom: &RobotGeometry) -> f64 {
        self.normalization_epsilon
            .unwrap_or(2.0 * geom.n() as f64 * 1e-9)
    }
}

/// Converged joint state, relative tensions, and solve diagnostics.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub q_star: JointState,
    /// One entry per taut tendon beyond the first (reference) one.
    pub relative_tensions: Vec<f64>,
    pub cost: f64,
    /// Displacement constraint residuals in meters, one per actuated tendon.
    pub displacement_residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl SolveResult {
    pub fn max_residual(&self) -> f64 {
        self.displacement_residuals
            .iter()
            .fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// `|| m/max(|m|, eps) - q/max(|q|, eps) ||^2` over matching-length slices.
///
/// Dividing by `max(norm, eps)` rather than `norm + eps` keeps the cost
/// exactly invariant under a common scaling of the moments whenever
/// `|m| >= eps`, which is what makes the model dimensionless; `eps` only
/// guards the singularity at zero.
pub fn normalized_alignment_cost(m: &[f64], q: &[f64], eps: f64) -> f64 {
    let nm = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(eps);
    let nq = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(eps);
    m.iter()
        .zip(q.iter())
        .map(|(mi, qi)| {
            let d = mi / nm - qi / nq;
            d * d
        })
        .sum()
}

/// A taut (tension-carrying) tendon: position in the actuated list, routing
/// index, and Capstan direction.
#[derive(Debug, Clone, Copy)]
struct TautTendon {
    actuated_pos: usize,
    tendon: usize,
    friction: FrictionParams,
}

struct EvalData {
    cost: f64,
    residuals_m: Vec<f64>,
    moments: Vec<f64>,
}

/// The statics program over the packed decision vector
/// `z = (q_1..q_2n, lambda_2..lambda_K)`.
struct StaticsProblem<'g> {
    geom: &'g RobotGeometry,
    command: ActuationCommand,
    taut: Vec<TautTendon>,
    rest_lengths: Vec<f64>,
    stretch: f64,
    eps: f64,
    length_scale: f64,
}

impl<'g> StaticsProblem<'g> {
    fn build(
        geom: &'g RobotGeometry,
        command: &ActuationCommand,
        config: &SolverConfig,
    ) -> Result<Self> {
        if command.displacements.len() != geom.tendon_count() {
            return Err(Error::DimensionMismatch {
                what: "commanded displacements".into(),
                expected: geom.tendon_count(),
                actual: command.displacements.len(),
            });
        }
        let taut = command
            .actuated
            .iter()
            .enumerate()
            .filter(|(_, &t)| command.displacements[t] != 0.0)
            .map(|(pos, &t)| {
                let gamma = if command.displacements[t] > 0.0 { -1 } else { 1 };
                Ok(TautTendon {
                    actuated_pos: pos,
                    tendon: t,
                    friction: FrictionParams::new(config.mu, gamma)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let straight = chain_frames_raw(geom, &vec![0.0; 2 * geom.n()])?;
        let rest_lengths = command
            .actuated
            .iter()
            .map(|&t| {
                let wps = tendon_waypoints_from_frames(geom, &straight, t)?;
                tendon_length(&wps)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geom,
            command: command.clone(),
            taut,
            rest_lengths,
            stretch: config.stretch_compliance,
            eps: config.epsilon(geom),
            length_scale: geom.total_length(),
        })
    }

    fn dim(&self) -> usize {
        2 * self.geom.n() + self.taut.len().saturating_sub(1)
    }

    /// Base tension of the k-th taut tendon given the lambda block.
    fn taut_tension(&self, k: usize, lambdas: &[f64]) -> f64 {
        if k == 0 {
            1.0
        } else {
            lambdas[k - 1]
        }
    }

    fn evaluate(&self, z: &[f64]) -> Result<EvalData> {
        let n2 = 2 * self.geom.n();
        let (q, lambdas) = z.split_at(n2);
        let frames = chain_frames_raw(self.geom, q)?;
        let mut residuals_m = Vec::with_capacity(self.command.actuated.len());
        let mut moments = vec![0.0; n2];

        // Base tension per actuated tendon (0 for slack ones), for the
        // stretch correction of the displacement constraint.
        let mut base_tensions = vec![0.0; self.command.actuated.len()];
        for (k, taut) in self.taut.iter().enumerate() {
            base_tensions[taut.actuated_pos] = self.taut_tension(k, lambdas);
        }

        let mut world_cache = Vec::with_capacity(self.command.actuated.len());
        for (pos, &t) in self.command.actuated.iter().enumerate() {
            let wps = tendon_waypoints_from_frames(self.geom, &frames, t)?;
            let len = tendon_length(&wps)?;
            let d = self.command.displacements[t];
            let effective = d - self.stretch * base_tensions[pos];
            residuals_m.push((self.rest_lengths[pos] - len) - effective);
            world_cache.push(wps);
        }

        for (k, taut) in self.taut.iter().enumerate() {
            let tension = self.taut_tension(k, lambdas);
            if tension == 0.0 {
                continue;
            }
            let path = propagate_tension(&world_cache[taut.actuated_pos], &taut.friction, 1.0)?;
            let anchored = self.geom.tendons()[taut.tendon].terminal_anchored;
            accumulate_tendon_moments(self.geom, &frames, &path, anchored, tension, &mut moments)?;
        }

        let cost = normalized_alignment_cost(&moments, q, self.eps);
        Ok(EvalData {
            cost,
            residuals_m,
            moments,
        })
    }
}

fn validate_command(geom: &RobotGeometry, command: &ActuationCommand) -> Result<()> {
    if command.displacements.len() != geom.tendon_count() {
        return Err(Error::DimensionMismatch {
            what: "commanded displacements".into(),
            expected: geom.tendon_count(),
            actual: command.displacements.len(),
        });
    }
    Ok(())
}

/// The alignment cost for an explicit state and tension assignment.
///
/// `relative_tensions` holds one value per taut (nonzero-displacement)
/// actuated tendon beyond the first, which is the unit-tension reference.
/// Uses the default normalization epsilon `2n * 1e-9`.
pub fn shape_cost(
    geom: &RobotGeometry,
    q: &JointState,
    actuation: &ActuationCommand,
    mu: f64,
    relative_tensions: &[f64],
) -> Result<f64> {
    let config = SolverConfig {
        mu,
        ..SolverConfig::default()
    };
    config.validate()?;
    validate_command(geom, actuation)?;
    let problem = StaticsProblem::build(geom, actuation, &config)?;
    check_tensions(&problem, relative_tensions)?;
    let z = pack(q.as_slice(), relative_tensions);
    Ok(problem.evaluate(&z)?.cost)
}

/// Displacement constraint residuals in meters at an explicit state:
/// `(L(0) - L(q)) - (d - stretch * F_base)` per actuated tendon.
///
/// `tension_estimates` holds the base tension of each actuated tendon in
/// order (1 or lambda for taut ones, 0 for slack ones).
pub fn displacement_residual(
    geom: &RobotGeometry,
    q: &JointState,
    actuation: &ActuationCommand,
    tension_estimates: &[f64],
    stretch_compliance: f64,
) -> Result<Vec<f64>> {
    if actuation.actuated.is_empty() {
        return Err(Error::EmptyInput {
            what: "actuated tendons",
        });
    }
    validate_command(geom, actuation)?;
    if tension_estimates.len() != actuation.actuated.len() {
        return Err(Error::DimensionMismatch {
            what: "tension estimates".into(),
            expected: actuation.actuated.len(),
            actual: tension_estimates.len(),
        });
    }
    let straight = chain_frames_raw(geom, &vec![0.0; 2 * geom.n()])?;
    let frames = chain_frames(geom, q)?;
    let mut out = Vec::with_capacity(actuation.actuated.len());
    for (pos, &t) in actuation.actuated.iter().enumerate() {
        let rest = tendon_length(&tendon_waypoints_from_frames(geom, &straight, t)?)?;
        let len = tendon_length(&tendon_waypoints_from_frames(geom, &frames, t)?)?;
        let effective = actuation.displacements[t] - stretch_compliance * tension_estimates[pos];
        out.push((rest - len) - effective);
    }
    Ok(out)
}

fn check_tensions(problem: &StaticsProblem, relative_tensions: &[f64]) -> Result<()> {
    let expected = problem.taut.len().saturating_sub(1);
    if relative_tensions.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "relative tensions".into(),
            expected,
            actual: relative_tensions.len(),
        });
    }
    for &l in relative_tensions {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "relative_tensions",
                reason: format!("must be >= 0, got {l}"),
            });
        }
    }
    Ok(())
}

fn pack(q: &[f64], lambdas: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(q.len() + lambdas.len());
    z.extend_from_slice(q);
    z.extend_from_slice(lambdas);
    z
}

/// Estimates the robot state for an actuation command.
///
/// Decision variables are the joint angles plus one relative tension per
/// taut tendon beyond the first; the objective is [`shape_cost`], the
/// equality constraints are the displacement residuals, and joint limits /
/// non-negative tensions enter as bounds. A failed solve returns
/// `converged = false` with the most feasible iterate rather than an error.
pub fn solve_statics(
    geom: &RobotGeometry,
    actuation: &ActuationCommand,
    config: &SolverConfig,
) -> Result<SolveResult> {
    config.validate()?;
    validate_command(geom, actuation)?;
    if actuation.actuated.is_empty() {
        return Err(Error::EmptyInput {
            what: "actuated tendons",
        });
    }
    let problem = StaticsProblem::build(geom, actuation, config)?;
    let n2 = 2 * geom.n();

    if problem.taut.is_empty() {
        // Every actuated tendon is held at zero displacement: the straight
        // state meets every length constraint exactly and no tendon carries
        // tension, so the cost is exactly zero, its global minimum.
        let z0 = vec![0.0; n2];
        let ev = problem.evaluate(&z0)?;
        return Ok(SolveResult {
            q_star: JointState::zero(geom),
            relative_tensions: Vec::new(),
            cost: ev.cost,
            displacement_residuals: ev.residuals_m,
            converged: true,
            iterations: 0,
        });
    }

    let dim = problem.dim();
    let scale = problem.length_scale;
    let n_eq = actuation.actuated.len();
    let cache: RefCell<Option<(Vec<f64>, f64, Vec<f64>)>> = RefCell::new(None);
    let eval_cached = |z: &[f64]| -> (f64, Vec<f64>) {
        if let Some((zc, cost, res)) = cache.borrow().as_ref() {
            if zc.as_slice() == z {
                return (*cost, res.clone());
            }
        }
        let (cost, res) = match problem.evaluate(z) {
            Ok(ev) => {
                let scaled = ev.residuals_m.iter().map(|r| r / scale).collect();
                (ev.cost, scaled)
            }
            // Degenerate geometry probed far from any solution: poison the
            // point so the line search backs off.
            Err(_) => (f64::INFINITY, vec![1e3; n_eq]),
        };
        *cache.borrow_mut() = Some((z.to_vec(), cost, res.clone()));
        (cost, res)
    };

    let mut lower = vec![-geom.joint_limit(); n2];
    let mut upper = vec![geom.joint_limit(); n2];
    lower.extend(vec![0.0; dim - n2]);
    upper.extend(vec![f64::INFINITY; dim - n2]);

    let nlp = NlpProblem::new(dim, |z: &[f64]| eval_cached(z).0)
        .with_equality(|z: &[f64]| eval_cached(z).1)
        .with_bounds(lower, upper);

    let starts = initial_guesses(geom, &problem, config);
    let mut best: Option<NlpSolution> = None;
    for start in &starts {
        let sol = minimize(&nlp, start, &config.nlp)?;
        let replace = match &best {
            None => true,
            Some(b) => match (sol.converged, b.converged) {
                (true, true) => sol.objective_value < b.objective_value,
                (true, false) => true,
                (false, true) => false,
                (false, false) => sol.max_equality_violation < b.max_equality_violation,
            },
        };
        if replace {
            best = Some(sol);
        }
    }
    let sol = best.expect("at least one start");

    let ev = problem.evaluate(&sol.x_star)?;
    let q_star = JointState::new(geom, sol.x_star[..n2].to_vec())?;
    Ok(SolveResult {
        q_star,
        relative_tensions: sol.x_star[n2..].to_vec(),
        cost: ev.cost,
        displacement_residuals: ev.residuals_m,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

/// [`solve_statics`] with friction forced off; the comparison baseline.
pub fn solve_baseline_frictionless(
    geom: &RobotGeometry,
    actuation: &ActuationCommand,
    config: &SolverConfig,
) -> Result<SolveResult> {
    let mut cfg = config.clone();
    cfg.mu = 0.0;
    solve_statics(geom, actuation, &cfg)
}

/// Deterministic family of starts: a caller-supplied warm start wins
/// outright; otherwise bend toward the straight-state moment direction at a
/// few magnitudes (the tiny first entry is the documented default guess).
fn initial_guesses(
    geom: &RobotGeometry,
    problem: &StaticsProblem,
    config: &SolverConfig,
) -> Vec<Vec<f64>> {
    let n2 = 2 * geom.n();
    let n_lambda = problem.dim() - n2;
    let lambdas = vec![1.0; n_lambda];
    if let Some(q0) = &config.q0 {
        return vec![pack(q0.as_slice(), &lambdas)];
    }
    let z_straight = pack(&vec![0.0; n2], &lambdas);
    let direction = match problem.evaluate(&z_straight) {
        Ok(ev) => {
            let max = ev.moments.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max > 1e-30 {
                ev.moments.iter().map(|v| v / max).collect()
            } else {
                vec![1.0; n2]
            }
        }
        Err(_) => vec![1.0; n2],
    };
    [1e-3, 0.35 * geom.joint_limit(), 0.7 * geom.joint_limit()]
        .iter()
        .map(|s| {
            let q: Vec<f64> = direction.iter().map(|d| s * d).collect();
            pack(&q, &lambdas)
        })
        .collect()
}

/// One calibration observation: a command and the measured centerline
/// positions it produced (tip last).
#[derive(Debug, Clone)]
pub struct CalibrationSample {
    pub command: ActuationCommand,
    pub truth: Vec<Vec3>,
}

/// Search ranges and resolutions for [`calibrate`]. The final answer lands
/// on the lattice `min + k * step` of each axis.
#[derive(Debug, Clone)]
pub struct CalibrationGrid {
    pub mu_range: (f64, f64),
    pub mu_step: f64,
    pub stretch_range: (f64, f64),
    pub stretch_step: f64,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        Self {
            mu_range: (0.0, 0.4),
            mu_step: 0.01,
            stretch_range: (0.0, 0.001),
            stretch_step: 5e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub mu: f64,
    pub stretch_compliance: f64,
    pub mean_tip_error: f64,
    pub per_sample_errors: Vec<f64>,
}

fn lattice(range: (f64, f64), step: f64) -> Vec<f64> {
    let mut vals = Vec::new();
    let mut k = 0usize;
    loop {
        let v = range.0 + step * k as f64;
        if v > range.1 + 1e-12 {
            break;
        }
        vals.push(v);
        k += 1;
    }
    if vals.is_empty() {
        vals.push(range.0);
    }
    vals
}

/// Grid-calibrates friction and stretch against ground-truth shapes by
/// minimizing the mean tip error, coarse-to-fine, ties broken toward the
/// lowest grid point. Deterministic.
pub fn calibrate(
    geom: &RobotGeometry,
    dataset: &[CalibrationSample],
    grid: &CalibrationGrid,
    template: &SolverConfig,
) -> Result<CalibrationResult> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput {
            what: "calibration dataset",
        });
    }
    for (i, s) in dataset.iter().enumerate() {
        validate_command(geom, &s.command)?;
        if s.truth.is_empty() {
            return Err(Error::EmptyInput {
                what: "ground-truth shape",
            });
        }
        if s.command.actuated().is_empty() {
            return Err(Error::InvalidParameter {
                name: "dataset",
                reason: format!("sample {i} actuates no tendon"),
            });
        }
    }
    if !(grid.mu_step > 0.0 && grid.stretch_step > 0.0)
        || grid.mu_range.0 > grid.mu_range.1
        || grid.stretch_range.0 > grid.stretch_range.1
        || grid.mu_range.0 < 0.0
        || grid.stretch_range.0 < 0.0
    {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "ranges must be ordered, non-negative, steps positive".into(),
        });
    }

    let mut warm: Vec<Option<JointState>> = vec![None; dataset.len()];
    let evaluate_point = |mu: f64, stretch: f64, warm: &mut Vec<Option<JointState>>| {
        let mut errors = Vec::with_capacity(dataset.len());
        for (i, sample) in dataset.iter().enumerate() {
            let mut cfg = template.clone();
            cfg.mu = mu;
            cfg.stretch_compliance = stretch;
            cfg.q0 = warm[i].clone();
            let mut solved = solve_statics(geom, &sample.command, &cfg);
            if let Ok(res) = &solved {
                if !res.converged && warm[i].is_some() {
                    // Warm start led nowhere; retry with the default policy.
                    cfg.q0 = None;
                    solved = solve_statics(geom, &sample.command, &cfg);
                }
            }
            match solved {
                Ok(res) if res.converged => {
                    let frames = chain_frames(geom, &res.q_star).expect("dims fixed");
                    let tip = frames.tip();
                    let truth_tip = *sample.truth.last().expect("validated non-empty");
                    errors.push((tip - truth_tip).norm());
                    warm[i] = Some(res.q_star);
                }
                _ => {
                    errors.push(f64::INFINITY);
                    warm[i] = None;
                }
            }
        }
        let mean = errors.iter().sum::<f64>() / errors.len() as f64;
        (mean, errors)
    };

    // Coarse pass at 5x the requested resolution, then a fine pass on the
    // exact lattice around the coarse winner.
    let coarse_mu = lattice(grid.mu_range, 5.0 * grid.mu_step);
    let coarse_st = lattice(grid.stretch_range, 5.0 * grid.stretch_step);
    let mut best = (f64::INFINITY, grid.mu_range.0, grid.stretch_range.0, Vec::new());
    for &mu in &coarse_mu {
        for &st in &coarse_st {
            let (mean, errs) = evaluate_point(mu, st, &mut warm);
            if mean < best.0 {
                best = (mean, mu, st, errs);
            }
        }
    }

    let window = |center: f64, range: (f64, f64), step: f64| -> (f64, f64) {
        let lo = (center - 5.0 * step).max(range.0);
        let hi = (center + 5.0 * step).min(range.1);
        // Snap to the global lattice anchored at range.0.
        let k_lo = ((lo - range.0) / step).ceil() as usize;
        (range.0 + k_lo as f64 * step, hi)
    };
    let (mu_lo, mu_hi) = window(best.1, grid.mu_range, grid.mu_step);
    let (st_lo, st_hi) = window(best.2, grid.stretch_range, grid.stretch_step);
    for &mu in &lattice((mu_lo, mu_hi), grid.mu_step) {
        for &st in &lattice((st_lo, st_hi), grid.stretch_step) {
            let (mean, errs) = evaluate_point(mu, st, &mut warm);
            if mean < best.0 {
                best = (mean, mu, st, errs);
            }
        }
    }

    Ok(CalibrationResult {
        mu: best.1,
        stretch_compliance: best.2,
        mean_tip_error: best.0,
        per_sample_errors: best.3,
    })
}
