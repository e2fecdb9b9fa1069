//! Tendon mechanics: wrap angles, Capstan tension propagation, and the
//! bending moments tendons exert at each joint.
//!
//! Tension between way points follows the Capstan relation
//! `F_i / F_{i-1} = exp(gamma * mu * theta)` with wrap angle `theta` at the
//! intervening way point and `gamma = -1` when the tendon slides toward the
//! actuator (pulling) or `+1` when it is paid out.
//!
//! Each way point where the tendon changes direction pushes on the robot
//! with the vector difference of the outgoing and incoming tension vectors;
//! an anchored terminal way point takes the full remaining pull. The moment
//! about a joint is the static-equilibrium sum over every way point distal
//! to that joint of `r x f`, with `r` measured from the joint center,
//! projected onto the joint's two hinge axes at the current configuration.
//! The base way point sits on the actuator side of joint 1 and exerts no
//! moment on the chain.

use crate::error::{Error, Result};
use crate::geometry::{
    chain_frames, tendon_waypoints_from_frames, ChainFrames, JointState, RobotGeometry, Vec3,
};

/// Coulomb friction coefficient and tendon motion direction for the Capstan
/// model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionParams {
    pub mu: f64,
    /// +1 or -1: sign of the exponent in the Capstan relation.
    pub gamma: i8,
}

impl FrictionParams {
    pub fn new(mu: f64, gamma: i8) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("must be >= 0 and finite, got {mu}"),
            });
        }
        if gamma != 1 && gamma != -1 {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be +1 or -1, got {gamma}"),
            });
        }
        Ok(Self { mu, gamma })
    }

    pub fn frictionless() -> Self {
        Self { mu: 0.0, gamma: -1 }
    }
}

/// One tendon's world-frame geometry and per-segment tension at one state.
#[derive(Debug, Clone)]
pub struct TendonPath {
    pub world_waypoints: Vec<Vec3>,
    /// Tension in each straight segment between consecutive way points.
    pub segment_tensions: Vec<f64>,
    /// Wrap angle at each interior way point, in `[0, pi]`.
    pub wrap_angles: Vec<f64>,
    pub base_tension: f64,
}

const DEGENERATE_SEGMENT: f64 = 1e-12;

/// Angle between the incoming and outgoing tendon directions at `cur`.
/// Zero for a collinear continuation, in `[0, pi]` always.
pub fn wrap_angle(prev: &Vec3, cur: &Vec3, next: &Vec3) -> Result<f64> {
    let u = cur - prev;
    let v = next - cur;
    let nu = u.norm();
    let nv = v.norm();
    if nu <= DEGENERATE_SEGMENT || nv <= DEGENERATE_SEGMENT {
        return Err(Error::DegenerateSegment { index: 0 });
    }
    // atan2 form is stable near 0 and pi.
    Ok(u.cross(&v).norm().atan2(u.dot(&v)))
}

/// Propagates tension along a way point sequence with the Capstan relation.
/// Segment 0 carries `base_tension`; each later segment is scaled by
/// `exp(gamma * mu * theta)` at the intervening way point.
pub fn propagate_tension(
    world_waypoints: &[Vec3],
    friction: &FrictionParams,
    base_tension: f64,
) -> Result<TendonPath> {
    if world_waypoints.len() < 2 {
        return Err(Error::DimensionMismatch {
            what: "tendon way points".into(),
            expected: 2,
            actual: world_waypoints.len(),
        });
    }
    if !(base_tension.is_finite() && base_tension > 0.0) {
        return Err(Error::InvalidParameter {
            name: "base_tension",
            reason: format!("must be > 0, got {base_tension}"),
        });
    }
    let n_seg = world_waypoints.len() - 1;
    let mut tensions = Vec::with_capacity(n_seg);
    let mut wraps = Vec::with_capacity(n_seg.saturating_sub(1));
    tensions.push(base_tension);
    for k in 1..n_seg {
        let theta = wrap_angle(
            &world_waypoints[k - 1],
            &world_waypoints[k],
            &world_waypoints[k + 1],
        )
        .map_err(|_| Error::DegenerateSegment { index: k })?;
        wraps.push(theta);
        let ratio = (f64::from(friction.gamma) * friction.mu * theta).exp();
        tensions.push(tensions[k - 1] * ratio);
    }
    Ok(TendonPath {
        world_waypoints: world_waypoints.to_vec(),
        segment_tensions: tensions,
        wrap_angles: wraps,
        base_tension,
    })
}

/// Net force the tendon exerts on the robot at one way point.
///
/// Interior way points feel the redirection force
/// `F_out * u_out - F_in * u_in`; the terminal way point (anchored) feels the
/// full remaining pull `-F_last * u_in`. The base way point grounds through
/// the actuator and is rejected.
pub fn waypoint_net_force(path: &TendonPath, index: usize) -> Result<Vec3> {
    let last = path.world_waypoints.len() - 1;
    if index == 0 {
        return Err(Error::IndexOutOfRange {
            what: "way point (base way point exerts no force on the robot)",
            index: 0,
            count: last + 1,
        });
    }
    if index > last {
        return Err(Error::IndexOutOfRange {
            what: "way point",
            index,
            count: last + 1,
        });
    }
    let incoming = path.world_waypoints[index] - path.world_waypoints[index - 1];
    let n_in = incoming.norm();
    if n_in <= DEGENERATE_SEGMENT {
        return Err(Error::DegenerateSegment { index });
    }
    let u_in = incoming / n_in;
    let f_in = path.segment_tensions[index - 1];
    if index == last {
        return Ok(-f_in * u_in);
    }
    let outgoing = path.world_waypoints[index + 1] - path.world_waypoints[index];
    let n_out = outgoing.norm();
    if n_out <= DEGENERATE_SEGMENT {
        return Err(Error::DegenerateSegment { index: index + 1 });
    }
    let u_out = outgoing / n_out;
    let f_out = path.segment_tensions[index];
    Ok(f_out * u_out - f_in * u_in)
}

/// Moment components about every joint axis, ordered like the joint state:
/// `(about alpha_1, about beta_1, ..., about alpha_n, about beta_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMoments {
    pub m: Vec<f64>,
}

impl JointMoments {
    pub fn zeros(n: usize) -> Self {
        Self { m: vec![0.0; 2 * n] }
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// One actuated tendon for moment computation: routing index, friction
/// parameters, and base tension (1 for the reference tendon, the relative
/// tension otherwise). A zero base tension marks a slack tendon and
/// contributes nothing.
pub type ActuatedTendon = (usize, FrictionParams, f64);

/// Bending moments all actuated tendons apply at each joint of the chain in
/// state `q`.
pub fn joint_moments(
    geom: &RobotGeometry,
    q: &JointState,
    actuated: &[ActuatedTendon],
) -> Result<JointMoments> {
    let frames = chain_frames(geom, q)?;
    joint_moments_from_frames(geom, &frames, actuated)
}

/// Same as [`joint_moments`] but reuses precomputed chain frames.
pub fn joint_moments_from_frames(
    geom: &RobotGeometry,
    frames: &ChainFrames,
    actuated: &[ActuatedTendon],
) -> Result<JointMoments> {
    let n = geom.n();
    let mut moments = JointMoments::zeros(n);
    for &(tendon_index, friction, base_tension) in actuated {
        if tendon_index >= geom.tendon_count() {
            return Err(Error::IndexOutOfRange {
                what: "tendon",
                index: tendon_index,
                count: geom.tendon_count(),
            });
        }
        if !(base_tension.is_finite() && base_tension >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "base_tension",
                reason: format!("relative tension must be >= 0, got {base_tension}"),
            });
        }
        if base_tension == 0.0 {
            continue;
        }
        let wps = tendon_waypoints_from_frames(geom, frames, tendon_index)?;
        // Moments are linear in the base tension: propagate at unit tension
        // and scale the contribution.
        let path = propagate_tension(&wps, &friction, 1.0)?;
        let anchored = geom.tendons()[tendon_index].terminal_anchored;
        accumulate_tendon_moments(geom, frames, &path, anchored, base_tension, &mut moments.m)?;
    }
    Ok(moments)
}

/// Tip-to-base pass: carry the running force/moment resultant of everything
/// distal to the current joint and project it onto the joint axes. The
/// contribution is multiplied by `scale` (tension relative to the unit base
/// the path was propagated with).
pub(crate) fn accumulate_tendon_moments(
    geom: &RobotGeometry,
    frames: &ChainFrames,
    path: &TendonPath,
    anchored: bool,
    scale: f64,
    m: &mut [f64],
) -> Result<()> {
    let n = geom.n();
    let last = path.world_waypoints.len() - 1;
    let mut force_sum = Vec3::zeros();
    let mut moment_sum = Vec3::zeros(); // about the current joint center
    for j in (1..=n).rev() {
        let center = frames.joint_center(j - 1);
        if j < n {
            let next_center = frames.joint_center(j);
            moment_sum += (next_center - center).cross(&force_sum);
        }
        // Way points 2j-1 and 2j live on link j, distal to joint j.
        for k in [2 * j - 1, 2 * j] {
            if k == last && !anchored {
                continue;
            }
            let f = waypoint_net_force(path, k)?;
            moment_sum += (path.world_waypoints[k] - center).cross(&f);
            force_sum += f;
        }
        m[2 * (j - 1)] += scale * moment_sum.dot(&frames.joint_axes[j - 1][0]);
        m[2 * (j - 1) + 1] += scale * moment_sum.dot(&frames.joint_axes[j - 1][1]);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{tendon_waypoints_world, TendonRouting};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn robot(n: usize, len: f64, tendons: Vec<TendonRouting>) -> RobotGeometry {
        RobotGeometry::new(vec![len; n], PI / 4.0, tendons).unwrap()
    }

    #[test]
    fn wrap_angle_collinear() {
        let a = wrap_angle(
            &Vec3::new(0.0, 0.0, 0.0),
            &Vec3::new(0.0, 0.0, 1.0),
            &Vec3::new(0.0, 0.0, 2.0),
        )
        .unwrap();
        assert_relative_eq!(a, 0.0);
    }

    #[test]
    fn wrap_angle_right_angle() {
        let a = wrap_angle(
            &Vec3::new(0.0, 0.0, 0.0),
            &Vec3::new(0.0, 0.0, 1.0),
            &Vec3::new(0.0, 1.0, 1.0),
        )
        .unwrap();
        assert_relative_eq!(a, FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn wrap_angle_known_bend() {
        // Oracle: arccos of the dot product, evaluated independently.
        let a = wrap_angle(
            &Vec3::new(0.0, 0.0, 0.0),
            &Vec3::new(0.0, 0.0, 1.0),
            &Vec3::new(0.0, 0.3f64.sin(), 1.0 + 0.3f64.cos()),
        )
        .unwrap();
        assert_relative_eq!(a, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn wrap_angle_degenerate() {
        let p = Vec3::new(0.0, 0.0, 1.0);
        assert!(wrap_angle(&p, &p, &Vec3::new(0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn frictionless_tension_is_uniform() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.1, 1.0),
            Vec3::new(0.3, 0.0, 2.0),
            Vec3::new(0.0, 0.0, 2.5),
        ];
        let path = propagate_tension(&pts, &FrictionParams::frictionless(), 2.5).unwrap();
        for t in &path.segment_tensions {
            assert_relative_eq!(*t, 2.5);
        }
    }

    #[test]
    fn capstan_single_wrap() {
        // Fold-back through pi with mu = 0.2, gamma = +1: e^{0.2 pi}.
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 0.5),
        ];
        let friction = FrictionParams::new(0.2, 1).unwrap();
        let path = propagate_tension(&pts, &friction, 1.0).unwrap();
        assert_relative_eq!(path.wrap_angles[0], PI, epsilon = 1e-12);
        assert_relative_eq!(
            path.segment_tensions[1],
            1.8744560875853382,
            epsilon = 1e-12
        );
    }

    #[test]
    fn capstan_product_over_two_wraps() {
        // Two quarter-turn wraps with gamma = -1 multiply to e^{-0.2 pi};
        // only the total wrap matters, not how it is split.
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let friction = FrictionParams::new(0.2, -1).unwrap();
        let path = propagate_tension(&pts, &friction, 1.0).unwrap();
        assert_relative_eq!(path.wrap_angles[0], FRAC_PI_2, epsilon = 1e-12);
        assert_relative_eq!(path.wrap_angles[1], FRAC_PI_2, epsilon = 1e-12);
        assert_relative_eq!(
            path.segment_tensions[2],
            (-0.2 * PI).exp(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn net_force_straight_pass_through() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 2.0),
        ];
        let path = propagate_tension(&pts, &FrictionParams::frictionless(), 1.0).unwrap();
        let f = waypoint_net_force(&path, 1).unwrap();
        assert_relative_eq!(f.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn net_force_right_angle_bisector() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
        ];
        let path = propagate_tension(&pts, &FrictionParams::frictionless(), 1.0).unwrap();
        let f = waypoint_net_force(&path, 1).unwrap();
        assert_relative_eq!(f.norm(), 2.0f64.sqrt(), epsilon = 1e-15);
        // Inside of the bend: +y (toward next) and -z (back toward previous).
        assert_relative_eq!(f, Vec3::new(0.0, 1.0, -1.0), epsilon = 1e-15);
    }

    #[test]
    fn net_force_terminal_anchor() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        let path = propagate_tension(&pts, &FrictionParams::frictionless(), 2.0).unwrap();
        let f = waypoint_net_force(&path, 1).unwrap();
        assert_relative_eq!(f, Vec3::new(0.0, 0.0, -2.0), epsilon = 1e-15);
    }

    #[test]
    fn net_force_rejects_base_waypoint() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
        let path = propagate_tension(&pts, &FrictionParams::frictionless(), 1.0).unwrap();
        assert!(waypoint_net_force(&path, 0).is_err());
    }

    #[test]
    fn no_actuation_means_zero_moments() {
        let lengths = vec![0.02; 4];
        let geom = robot(
            4,
            0.02,
            vec![TendonRouting::parallel(&lengths, 0.005, 0.0, 0.25)],
        );
        let q = JointState::new(&geom, vec![0.1, -0.1, 0.2, 0.0, 0.1, 0.1, 0.0, 0.2]).unwrap();
        let m = joint_moments(&geom, &q, &[]).unwrap();
        assert_eq!(m.max_abs(), 0.0);
    }

    #[test]
    fn straight_parallel_tendon_transmits_anchor_moment_to_every_joint() {
        // On a straight chain the interior way points are collinear and
        // force-free; only the anchor pull (offset d along +x, direction -z)
        // loads the chain, with moment d about each beta axis.
        let n = 5;
        let d = 0.005;
        let lengths = vec![0.02; n];
        let geom = robot(n, 0.02, vec![TendonRouting::parallel(&lengths, d, 0.0, 0.25)]);
        let q = JointState::zero(&geom);
        let m = joint_moments(&geom, &q, &[(0, FrictionParams::frictionless(), 1.0)]).unwrap();
        for j in 0..n {
            assert_relative_eq!(m.m[2 * j], 0.0, epsilon = 1e-15);
            assert_relative_eq!(m.m[2 * j + 1], d, epsilon = 1e-15);
        }
    }

    #[test]
    fn opposite_tendon_pair_cancels() {
        let n = 6;
        let lengths = vec![0.02; n];
        let t_pos = TendonRouting::parallel(&lengths, 0.005, 0.0, 0.25);
        let t_neg = TendonRouting::parallel(&lengths, 0.005, PI, 0.25);
        let geom = robot(n, 0.02, vec![t_pos, t_neg]);
        let q = JointState::zero(&geom);
        let m = joint_moments(
            &geom,
            &q,
            &[
                (0, FrictionParams::frictionless(), 1.0),
                (1, FrictionParams::frictionless(), 1.0),
            ],
        )
        .unwrap();
        assert!(m.max_abs() <= 1e-12);
    }

    #[test]
    fn moments_match_bruteforce_distal_sum() {
        // Oracle: direct double loop over (joint, distal way point) built
        // from the public force/frame API.
        let n = 4;
        let lengths = vec![0.025; n];
        let geom = robot(
            n,
            0.025,
            vec![TendonRouting::helical(&lengths, 0.004, 0.4, 1.0, 0.25)],
        );
        let q = JointState::new(&geom, vec![0.15, -0.1, 0.2, 0.05, -0.1, 0.12, 0.3, -0.2]).unwrap();
        let friction = FrictionParams::new(0.25, -1).unwrap();
        let m = joint_moments(&geom, &q, &[(0, friction, 1.3)]).unwrap();

        let frames = chain_frames(&geom, &q).unwrap();
        let wps = tendon_waypoints_from_frames(&geom, &frames, 0).unwrap();
        let path = propagate_tension(&wps, &friction, 1.3).unwrap();
        for j in 1..=n {
            let center = frames.joint_center(j - 1);
            let mut total = Vec3::zeros();
            for k in (2 * j - 1)..wps.len() {
                let f = waypoint_net_force(&path, k).unwrap();
                total += (wps[k] - center).cross(&f);
            }
            assert_relative_eq!(
                m.m[2 * (j - 1)],
                total.dot(&frames.joint_axes[j - 1][0]),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                m.m[2 * (j - 1) + 1],
                total.dot(&frames.joint_axes[j - 1][1]),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn proximal_waypoints_do_not_load_distal_joints() {
        // Only way points distal to a joint enter its moment: moving a
        // link-1 groove along a straight tendon (its force stays zero, the
        // distal geometry is untouched) must leave joints 2..n unchanged.
        let n = 3;
        let lengths = vec![0.02; n];
        let mut routing_a = TendonRouting::parallel(&lengths, 0.005, 0.0, 0.25);
        let mut routing_b = routing_a.clone();
        routing_a.relative_waypoints[1].z = 0.004;
        routing_b.relative_waypoints[1].z = 0.008;
        let geom_a = robot(n, 0.02, vec![routing_a]);
        let geom_b = robot(n, 0.02, vec![routing_b]);
        let q = JointState::zero(&geom_a);
        let m_a = joint_moments(&geom_a, &q, &[(0, FrictionParams::frictionless(), 1.0)]).unwrap();
        let m_b = joint_moments(&geom_b, &q, &[(0, FrictionParams::frictionless(), 1.0)]).unwrap();
        for k in 2..2 * n {
            assert_relative_eq!(m_a.m[k], m_b.m[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn slack_tendon_contributes_nothing() {
        let lengths = vec![0.02; 3];
        let geom = robot(
            3,
            0.02,
            vec![TendonRouting::parallel(&lengths, 0.005, 0.0, 0.25)],
        );
        let q = JointState::new(&geom, vec![0.1, 0.0, 0.1, 0.0, 0.1, 0.0]).unwrap();
        let m = joint_moments(&geom, &q, &[(0, FrictionParams::frictionless(), 0.0)]).unwrap();
        assert_eq!(m.max_abs(), 0.0);
    }

    #[test]
    fn capstan_monotone_in_mu() {
        let lengths = vec![0.02; 8];
        let geom = robot(
            8,
            0.02,
            vec![TendonRouting::helical(&lengths, 0.004, 0.0, 1.5, 0.25)],
        );
        let q = JointState::new(&geom, vec![0.2; 16]).unwrap();
        let wps = tendon_waypoints_world(&geom, &q, 0).unwrap();
        let mut prev_tip_tension = f64::INFINITY;
        for mu in [0.0, 0.1, 0.2, 0.4] {
            let friction = FrictionParams::new(mu, -1).unwrap();
            let path = propagate_tension(&wps, &friction, 1.0).unwrap();
            let tip = *path.segment_tensions.last().unwrap();
            assert!(tip <= prev_tip_tension);
            prev_tip_tension = tip;
            // Exact per-way-point Capstan ratio.
            for (k, theta) in path.wrap_angles.iter().enumerate() {
                let ratio = path.segment_tensions[k + 1] / path.segment_tensions[k];
                assert_relative_eq!(ratio, (-mu * theta).exp(), epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn moments_linear_in_base_tension(
            scale in 0.1f64..10.0,
            qa in -0.5f64..0.5,
            qb in -0.5f64..0.5,
        ) {
            let lengths = vec![0.02; 3];
            let geom = robot(
                3,
                0.02,
                vec![TendonRouting::helical(&lengths, 0.004, 0.2, 0.75, 0.25)],
            );
            let q = JointState::new(&geom, vec![qa, qb, -qa, 0.5 * qb, qb, -0.5 * qa]).unwrap();
            let friction = FrictionParams::new(0.2, -1).unwrap();
            let m1 = joint_moments(&geom, &q, &[(0, friction, 1.0)]).unwrap();
            let ms = joint_moments(&geom, &q, &[(0, friction, scale)]).unwrap();
            for (a, b) in m1.m.iter().zip(ms.m.iter()) {
                prop_assert!((scale * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }
}
