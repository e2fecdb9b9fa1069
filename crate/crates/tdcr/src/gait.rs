//! Helical configurations and rolling-gait generation.
//!
//! A gait step bends the robot into a helix. The helix starts at the robot
//! base tangent to the rest direction (+z) and its axis tilts away from +z
//! by the pitch angle, so the planner's shapes are always rooted where the
//! real chain is. `pitch_angle` is measured from the helix axis to the
//! tangent: near 0 the shape degenerates to a straight line, near `pi/2` to
//! a planar circular arc. `phase` rolls the bending plane about the base
//! z-axis; sweeping it through a full turn while replaying the inverse
//! tendon displacements produces the rolling gait.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{
    chain_frames, chain_frames_raw, joint_transform, tendon_length, tendon_waypoints_from_frames,
    JointState, Pose, RobotGeometry, Vec3,
};
use crate::nlp::{minimize, NlpConfig, NlpProblem};
use crate::statics::ActuationCommand;

/// Winding sense of the helix, looking along its axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    fn sign(self) -> f64 {
        match self {
            Handedness::Right => 1.0,
            Handedness::Left => -1.0,
        }
    }
}

/// Target helix for a bent configuration.
#[derive(Debug, Clone, Copy)]
pub struct HelixSpec {
    /// Helix radius, meters.
    pub radius: f64,
    /// Angle between the helix tangent and its axis, in the open interval
    /// `(0, pi/2)`: 0 degenerates to a straight line, `pi/2` to a planar
    /// circle.
    pub pitch_angle: f64,
    pub handedness: Handedness,
    /// Roll of the bending plane about the straight-chain axis, radians.
    /// Phase 0 bends the base of the robot toward +x.
    pub phase: f64,
}

impl HelixSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("must be > 0, got {}", self.radius),
            });
        }
        if !(self.pitch_angle.is_finite()
            && self.pitch_angle > 0.0
            && self.pitch_angle < PI / 2.0)
        {
            return Err(Error::InvalidParameter {
                name: "pitch_angle",
                reason: format!("must be in (0, pi/2), got {}", self.pitch_angle),
            });
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidParameter {
                name: "phase",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// Curvature of the ideal helix, `sin^2(pitch) / radius`.
    pub fn curvature(&self) -> f64 {
        self.pitch_angle.sin().powi(2) / self.radius
    }
}

/// Arc-length parameterization of the target helix in the robot base frame:
/// `point(0)` is the base origin and the tangent there is +z.
struct HelixCurve {
    /// Orthonormal triad: u (from axis toward the start point, negated
    /// bending direction), v, w (axis direction).
    u: Vec3,
    v: Vec3,
    w: Vec3,
    radius: f64,
    /// Angular rate d(theta)/ds = sin(pitch)/radius.
    omega: f64,
    axial: f64,
    hand: f64,
}

impl HelixCurve {
    fn new(spec: &HelixSpec) -> Self {
        let (s, c) = spec.pitch_angle.sin_cos();
        let h = spec.handedness.sign();
        let rot = Matrix3::new(
            spec.phase.cos(),
            -spec.phase.sin(),
            0.0,
            spec.phase.sin(),
            spec.phase.cos(),
            0.0,
            0.0,
            0.0,
            1.0,
        );
        // Canonical triad for phase 0, bending toward +x; see module tests
        // for the limit checks this satisfies.
        let u = rot * Vec3::new(-1.0, 0.0, 0.0);
        let v = rot * Vec3::new(0.0, -c, h * s);
        let w = rot * Vec3::new(0.0, h * s, c);
        Self {
            u,
            v,
            w,
            radius: spec.radius,
            omega: s / spec.radius,
            axial: c,
            hand: h,
        }
    }

    fn point(&self, s: f64) -> Vec3 {
        let theta = self.omega * s;
        self.radius * (theta.cos() - 1.0) * self.u
            + self.radius * self.hand * theta.sin() * self.v
            + s * self.axial * self.w
    }

    fn tangent(&self, s: f64) -> Vec3 {
        let theta = self.omega * s;
        let circ = self.radius * self.omega;
        -circ * theta.sin() * self.u
            + circ * self.hand * theta.cos() * self.v
            + self.axial * self.w
    }

    fn second_derivative(&self, s: f64) -> Vec3 {
        let theta = self.omega * s;
        let a = self.radius * self.omega * self.omega;
        -a * theta.cos() * self.u - a * self.hand * theta.sin() * self.v
    }

    /// Distance from `p` to the curve, found by Newton iteration on the
    /// stationarity of `|p - H(s)|^2` from the axial estimate of `s`.
    fn distance(&self, p: &Vec3) -> f64 {
        let mut s = p.dot(&self.w) / self.axial;
        for _ in 0..30 {
            let diff = p - self.point(s);
            let g = diff.dot(&self.tangent(s));
            let gp = -1.0 + diff.dot(&self.second_derivative(s));
            if gp.abs() < 1e-30 {
                break;
            }
            let step = g / gp;
            s -= step;
            if step.abs() < 1e-14 * (1.0 + s.abs()) {
                break;
            }
        }
        (p - self.point(s)).norm()
    }

    /// Arc parameter whose chord from `point(s0)` has length `chord`, found
    /// by bisection on the monotone stretch past `s0`.
    fn march_chord(&self, s0: f64, chord: f64, joint: usize, limit: f64) -> Result<f64> {
        let err = || Error::UnrealizableHelix {
            joint,
            required: chord * self.omega * self.omega * self.radius,
            limit,
        };
        let mut hi = 1.2 * chord / self.axial;
        if self.omega > 0.0 {
            hi = hi.min(PI / self.omega);
        }
        let p0 = self.point(s0);
        if (self.point(s0 + hi) - p0).norm() < chord {
            return Err(err());
        }
        let mut lo = 0.0;
        let mut span = hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + span);
            if (self.point(s0 + mid) - p0).norm() < chord {
                lo = mid;
            } else {
                span = mid;
            }
        }
        Ok(s0 + 0.5 * (lo + span))
    }
}

/// A fitted helical configuration.
#[derive(Debug, Clone)]
pub struct HelixFit {
    pub joint_state: JointState,
    /// Root-mean-square distance of the frame origins from the ideal helix.
    pub rms: f64,
}

/// Joint angles bending the chain onto the target helix.
///
/// Construction marches chords of the ideal curve (placing every joint
/// center on the helix), extracts the universal-joint angles, then polishes
/// them with a small bound-constrained fit minimizing the summed squared
/// curve distance of the frame origins. Curvature beyond what the joint
/// limits allow is a domain error naming the limiting joint.
pub fn helix_joint_angles(geom: &RobotGeometry, spec: &HelixSpec) -> Result<HelixFit> {
    spec.validate()?;
    let limit = geom.joint_limit();
    let kappa = spec.curvature();
    let (max_joint, max_len) = geom
        .link_lengths()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("geometry has links");
    if kappa * max_len > 2.0 * limit {
        return Err(Error::UnrealizableHelix {
            joint: max_joint,
            required: kappa * max_len / 2.0,
            limit,
        });
    }

    let curve = HelixCurve::new(spec);
    let n = geom.n();
    let mut q_seed = vec![0.0; 2 * n];
    let mut s = 0.0;
    let mut rotation = Matrix3::<f64>::identity();
    for j in 0..n {
        let len = geom.link_lengths()[j];
        let p0 = curve.point(s);
        let s_next = curve.march_chord(s, len, j, limit)?;
        let dir = (curve.point(s_next) - p0) / len;
        let local = rotation.transpose() * dir;
        let beta = local.x.clamp(-1.0, 1.0).asin();
        let alpha = (-local.y).atan2(local.z);
        if alpha.abs() > limit + 1e-9 || beta.abs() > limit + 1e-9 {
            return Err(Error::UnrealizableHelix {
                joint: j,
                required: alpha.abs().max(beta.abs()),
                limit,
            });
        }
        q_seed[2 * j] = alpha.clamp(-limit, limit);
        q_seed[2 * j + 1] = beta.clamp(-limit, limit);
        let link = joint_transform(alpha, beta, len)?;
        rotation *= link.rotation;
        s = s_next;
    }

    // Polish: minimize the true curve-distance residual over the joint box.
    let objective = |z: &[f64]| -> f64 {
        match chain_frames_raw(geom, z) {
            Ok(frames) => frames
                .poses
                .iter()
                .skip(1)
                .map(|p: &Pose| curve.distance(&p.translation).powi(2))
                .sum(),
            Err(_) => f64::INFINITY,
        }
    };
    let problem = NlpProblem::new(2 * n, objective)
        .with_bounds(vec![-limit; 2 * n], vec![limit; 2 * n]);
    let nlp_config = NlpConfig {
        max_iterations: 50,
        kkt_tolerance: 1e-10,
        ..NlpConfig::default()
    };
    let sol = minimize(&problem, &q_seed, &nlp_config)?;
    let q_final = if sol.objective_value <= objective(&q_seed) {
        sol.x_star
    } else {
        q_seed
    };

    let frames = chain_frames_raw(geom, &q_final)?;
    let sum_sq: f64 = frames
        .poses
        .iter()
        .map(|p| curve.distance(&p.translation).powi(2))
        .sum();
    let rms = (sum_sq / frames.poses.len() as f64).sqrt();
    Ok(HelixFit {
        joint_state: JointState::new(geom, q_final)?,
        rms,
    })
}

/// Inverse tendon kinematics: `L(0) - L(q)` per tendon; positive values
/// mean the tendon must be pulled to realize `q`.
pub fn tendon_displacements_for_state(geom: &RobotGeometry, q: &JointState) -> Result<Vec<f64>> {
    let straight = chain_frames_raw(geom, &vec![0.0; 2 * geom.n()])?;
    let frames = chain_frames(geom, q)?;
    (0..geom.tendon_count())
        .map(|t| {
            let rest = tendon_length(&tendon_waypoints_from_frames(geom, &straight, t)?)?;
            let bent = tendon_length(&tendon_waypoints_from_frames(geom, &frames, t)?)?;
            Ok(rest - bent)
        })
        .collect()
}

/// Timing hint attached to generated gaits, hertz.
pub const DEFAULT_GAIT_FREQUENCY_HZ: f64 = 0.33;

/// Cyclic tendon-displacement sequence realizing a helical rolling gait.
#[derive(Debug, Clone)]
pub struct GaitSequence {
    pub steps: Vec<ActuationCommand>,
    pub period_steps: usize,
    /// Suggested playback rate; metadata only.
    pub frequency_hint_hz: f64,
}

/// The fitted helix states of one gait cycle, phase advancing by
/// `2 pi / steps` per step.
pub fn gait_states(
    geom: &RobotGeometry,
    spec: &HelixSpec,
    steps_per_cycle: usize,
) -> Result<Vec<HelixFit>> {
    if steps_per_cycle < 3 {
        return Err(Error::InvalidParameter {
            name: "steps_per_cycle",
            reason: format!("need at least 3 steps, got {steps_per_cycle}"),
        });
    }
    (0..steps_per_cycle)
        .map(|k| {
            let mut stepped = *spec;
            stepped.phase = spec.phase + 2.0 * PI * k as f64 / steps_per_cycle as f64;
            helix_joint_angles(geom, &stepped)
        })
        .collect()
}

/// Generates one rolling-gait cycle: per step, fit the phase-advanced helix
/// and convert it to tendon displacement commands. The sequence is cyclic;
/// step `steps_per_cycle` would reproduce step 0.
pub fn rolling_gait(
    geom: &RobotGeometry,
    spec: &HelixSpec,
    steps_per_cycle: usize,
) -> Result<GaitSequence> {
    if geom.tendon_count() < 3 {
        return Err(Error::InvalidParameter {
            name: "tendons",
            reason: format!(
                "rolling gait needs at least 3 tendons, geometry has {}",
                geom.tendon_count()
            ),
        });
    }
    let states = gait_states(geom, spec, steps_per_cycle)?;
    let steps = states
        .iter()
        .map(|fit| {
            let d = tendon_displacements_for_state(geom, &fit.joint_state)?;
            ActuationCommand::from_displacements(d)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaitSequence {
        steps,
        period_steps: steps_per_cycle,
        frequency_hint_hz: DEFAULT_GAIT_FREQUENCY_HZ,
    })
}

/// Tube-clearance report for a gait: the swept envelope of the frame
/// origins around each step's helix axis, against the tube bore.
#[derive(Debug, Clone)]
pub struct TubeClearance {
    /// Largest distance of any frame origin from its step's helix axis.
    pub max_axis_distance: f64,
    /// `max_axis_distance + body_diameter / 2`.
    pub occupied_radius: f64,
    /// `tube_inner_diameter / 2`.
    pub tube_radius: f64,
    pub ok: bool,
}

/// Checks that every frame origin of every gait step stays within the tube
/// bore when the robot body diameter is accounted for.
pub fn tube_clearance(
    geom: &RobotGeometry,
    spec: &HelixSpec,
    steps_per_cycle: usize,
    body_diameter: f64,
    tube_inner_diameter: f64,
) -> Result<TubeClearance> {
    if !(body_diameter.is_finite() && body_diameter >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "body_diameter",
            reason: format!("must be >= 0, got {body_diameter}"),
        });
    }
    if !(tube_inner_diameter.is_finite() && tube_inner_diameter > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tube_inner_diameter",
            reason: format!("must be > 0, got {tube_inner_diameter}"),
        });
    }
    let states = gait_states(geom, spec, steps_per_cycle)?;
    let mut max_axis_distance: f64 = 0.0;
    for (k, fit) in states.iter().enumerate() {
        let mut stepped = *spec;
        stepped.phase = spec.phase + 2.0 * PI * k as f64 / steps_per_cycle as f64;
        let curve = HelixCurve::new(&stepped);
        // Axis passes through the helix center offset R*u from the start.
        let center = curve.radius * -1.0 * curve.u;
        let frames = chain_frames(geom, &fit.joint_state)?;
        for pose in &frames.poses {
            let rel = pose.translation - center;
            let radial = rel - rel.dot(&curve.w) * curve.w;
            max_axis_distance = max_axis_distance.max(radial.norm());
        }
    }
    let occupied_radius = max_axis_distance + 0.5 * body_diameter;
    let tube_radius = 0.5 * tube_inner_diameter;
    Ok(TubeClearance {
        max_axis_distance,
        occupied_radius,
        tube_radius,
        ok: occupied_radius <= tube_radius,
    })
}
