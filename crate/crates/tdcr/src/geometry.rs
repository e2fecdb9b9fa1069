//! Rigid-link chain geometry: universal-joint forward kinematics and
//! world-frame tendon way points.
//!
//! # Conventions
//!
//! Each universal joint rotates first about its local x-axis by `alpha`, then
//! about the resulting y-axis by `beta` (right-handed). Links extend along the
//! local +z axis. With all angles zero the chain points straight up +z.
//!
//! Frames: pose 0 is the base frame (identity); pose `j` is the frame after
//! joint `j` and link `j`, so its origin sits at the center of joint `j+1`
//! (or at the tip for `j = n`). Joint `j`'s center is therefore the origin of
//! pose `j-1`. Way points are expressed relative to the *link frame* of their
//! link: origin at the proximal joint center, axes aligned with the link.
//!
//! Positive `alpha` tilts the link toward -y; positive `beta` tilts it
//! toward +x.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// 3D point or vector, meters, robot base frame unless stated otherwise.
pub type Vec3 = Vector3<f64>;

/// Rigid transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// `self * other`: apply `other` in the frame defined by `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Max-norm of `R^T R - I`, used to check the orthonormality invariant.
    pub fn orthonormality_residual(&self) -> f64 {
        let d = self.rotation.transpose() * self.rotation - Matrix3::identity();
        d.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Tendon routing: one relative way point per groove the tendon passes.
///
/// A robot with `n` joints routes each tendon through exactly `2n + 1` way
/// points: one base way point (index 0, in the base frame) and two per link
/// (indices `2j-1` and `2j` in link `j`'s frame, measured from joint `j`'s
/// center).
#[derive(Debug, Clone, PartialEq)]
pub struct TendonRouting {
    pub relative_waypoints: Vec<Vec3>,
    /// Whether the tendon is fixed to the robot at its last way point. An
    /// anchored tendon pulls on that point with its full remaining tension.
    pub terminal_anchored: bool,
}

impl TendonRouting {
    pub fn new(relative_waypoints: Vec<Vec3>, terminal_anchored: bool) -> Self {
        Self {
            relative_waypoints,
            terminal_anchored,
        }
    }

    /// Straight routing at constant radial offset.
    ///
    /// `offset_azimuth` picks the direction of the offset in the section
    /// plane (0 = +x, pi/2 = +y). Way points sit `inset_fraction * length`
    /// from each link end; the base way point mirrors the pattern below
    /// joint 1.
    pub fn parallel(
        link_lengths: &[f64],
        radial_offset: f64,
        offset_azimuth: f64,
        inset_fraction: f64,
    ) -> Self {
        let dir = Vec3::new(offset_azimuth.cos(), offset_azimuth.sin(), 0.0);
        let mut pts = Vec::with_capacity(2 * link_lengths.len() + 1);
        let g0 = inset_fraction * link_lengths[0];
        pts.push(radial_offset * dir - Vec3::new(0.0, 0.0, g0));
        for &len in link_lengths {
            let g = inset_fraction * len;
            pts.push(radial_offset * dir + Vec3::new(0.0, 0.0, g));
            pts.push(radial_offset * dir + Vec3::new(0.0, 0.0, len - g));
        }
        Self::new(pts, true)
    }

    /// Helical routing: the radial offset direction advances linearly with
    /// arc length, completing `turns` full revolutions over the robot.
    pub fn helical(
        link_lengths: &[f64],
        radial_offset: f64,
        start_azimuth: f64,
        turns: f64,
        inset_fraction: f64,
    ) -> Self {
        let total: f64 = link_lengths.iter().sum();
        let rate = 2.0 * std::f64::consts::PI * turns / total;
        let at = |s_abs: f64, z_rel: f64| {
            let az = start_azimuth + rate * s_abs;
            Vec3::new(radial_offset * az.cos(), radial_offset * az.sin(), z_rel)
        };
        let mut pts = Vec::with_capacity(2 * link_lengths.len() + 1);
        let g0 = inset_fraction * link_lengths[0];
        pts.push(at(-g0, -g0));
        let mut s = 0.0;
        for &len in link_lengths {
            let g = inset_fraction * len;
            pts.push(at(s + g, g));
            pts.push(at(s + len - g, len - g));
            s += len;
        }
        Self::new(pts, true)
    }
}

/// The discretized robot: joint count, link lengths, joint limit, tendons.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotGeometry {
    link_lengths: Vec<f64>,
    joint_limit: f64,
    tendons: Vec<TendonRouting>,
}

impl RobotGeometry {
    /// Validates all construction invariants: at least one link, positive
    /// link lengths, joint limit in (0, pi/2], at least one tendon, and
    /// exactly `2n + 1` way points per tendon.
    pub fn new(
        link_lengths: Vec<f64>,
        joint_limit: f64,
        tendons: Vec<TendonRouting>,
    ) -> Result<Self> {
        if link_lengths.is_empty() {
            return Err(Error::EmptyInput {
                what: "link_lengths",
            });
        }
        for (i, &len) in link_lengths.iter().enumerate() {
            if !(len.is_finite() && len > 0.0) {
                return Err(Error::InvalidGeometry(format!(
                    "link length {i} must be positive and finite, got {len}"
                )));
            }
        }
        if !(joint_limit.is_finite()
            && joint_limit > 0.0
            && joint_limit <= std::f64::consts::FRAC_PI_2)
        {
            return Err(Error::InvalidGeometry(format!(
                "joint limit must be in (0, pi/2], got {joint_limit}"
            )));
        }
        if tendons.is_empty() {
            return Err(Error::EmptyInput { what: "tendons" });
        }
        let expected = 2 * link_lengths.len() + 1;
        for (i, t) in tendons.iter().enumerate() {
            if t.relative_waypoints.len() != expected {
                return Err(Error::DimensionMismatch {
                    what: format!("tendon {i} way points"),
                    expected,
                    actual: t.relative_waypoints.len(),
                });
            }
            if t.relative_waypoints
                .iter()
                .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
            {
                return Err(Error::NonFinite {
                    what: format!("tendon {i} way points"),
                });
            }
        }
        Ok(Self {
            link_lengths,
            joint_limit,
            tendons,
        })
    }

    /// Number of joints (= number of links).
    pub fn n(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn joint_limit(&self) -> f64 {
        self.joint_limit
    }

    pub fn tendons(&self) -> &[TendonRouting] {
        &self.tendons
    }

    pub fn tendon_count(&self) -> usize {
        self.tendons.len()
    }

    pub fn total_length(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    /// Way points per tendon, `2n + 1`.
    pub fn waypoints_per_tendon(&self) -> usize {
        2 * self.n() + 1
    }
}

/// Joint angles `(alpha_1, beta_1, ..., alpha_n, beta_n)`, radians.
///
/// The state has exactly `2n` components: the chain is torsionally rigid, so
/// no roll angle exists.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    q: Vec<f64>,
}

impl JointState {
    /// Validates length (`2n`) and joint limits against `geom`.
    pub fn new(geom: &RobotGeometry, q: Vec<f64>) -> Result<Self> {
        if q.len() != 2 * geom.n() {
            return Err(Error::DimensionMismatch {
                what: "joint state".into(),
                expected: 2 * geom.n(),
                actual: q.len(),
            });
        }
        let limit = geom.joint_limit();
        for (k, &v) in q.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("joint angle {k}"),
                });
            }
            // Tiny slack so box-constrained optimizer output at the bound
            // round-trips through validation.
            if v.abs() > limit + 1e-9 {
                return Err(Error::AngleOutOfRange {
                    value: v,
                    limit,
                    index: k,
                });
            }
        }
        Ok(Self { q })
    }

    pub fn zero(geom: &RobotGeometry) -> Self {
        Self {
            q: vec![0.0; 2 * geom.n()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn alpha(&self, joint: usize) -> f64 {
        self.q[2 * joint]
    }

    pub fn beta(&self, joint: usize) -> f64 {
        self.q[2 * joint + 1]
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(b: f64) -> Matrix3<f64> {
    let (s, c) = b.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Transform across one joint and its link: rotate about local x by `alpha`,
/// about the resulting y by `beta`, then translate `link_length` along the
/// resulting z-axis (the link direction).
pub fn joint_transform(alpha: f64, beta: f64, link_length: f64) -> Result<Pose> {
    for (i, v) in [alpha, beta].into_iter().enumerate() {
        if !v.is_finite() || v.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::AngleOutOfRange {
                value: v,
                limit: std::f64::consts::FRAC_PI_2,
                index: i,
            });
        }
    }
    if !(link_length.is_finite() && link_length > 0.0) {
        return Err(Error::InvalidParameter {
            name: "link_length",
            reason: format!("must be positive and finite, got {link_length}"),
        });
    }
    let rotation = rot_x(alpha) * rot_y(beta);
    let translation = rotation * Vec3::new(0.0, 0.0, link_length);
    Ok(Pose {
        rotation,
        translation,
    })
}

/// All frames of the chain at state `q`.
#[derive(Debug, Clone)]
pub struct ChainFrames {
    /// `n + 1` poses: pose 0 is the base (identity), pose `j` follows joint
    /// `j` and link `j`; the last pose is the tip.
    pub poses: Vec<Pose>,
    /// `n` link frames: origin at joint `j`'s center, axes aligned with
    /// link `j` (rotation applied, translation not yet).
    pub link_frames: Vec<Pose>,
    /// Physical hinge axes of each joint at this state: the x-axis of the
    /// previous frame (alpha) and the y-axis after the alpha rotation (beta).
    pub joint_axes: Vec<[Vec3; 2]>,
}

impl ChainFrames {
    /// World position of joint `j`'s center (1-based joint, 0-based index).
    pub fn joint_center(&self, joint: usize) -> Vec3 {
        self.link_frames[joint].translation
    }

    pub fn tip(&self) -> Vec3 {
        self.poses[self.poses.len() - 1].translation
    }

    pub fn frame_origins(&self) -> Vec<Vec3> {
        self.poses.iter().map(|p| p.translation).collect()
    }
}

/// Computes every frame of the chain in one pass.
pub fn chain_frames(geom: &RobotGeometry, q: &JointState) -> Result<ChainFrames> {
    chain_frames_raw(geom, q.as_slice())
}

/// Frame computation on a raw angle slice; used by the solver, whose
/// finite-difference probes step just past the validated joint range.
pub(crate) fn chain_frames_raw(geom: &RobotGeometry, q: &[f64]) -> Result<ChainFrames> {
    let n = geom.n();
    if q.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            what: "joint state".into(),
            expected: 2 * n,
            actual: q.len(),
        });
    }
    let mut poses = Vec::with_capacity(n + 1);
    let mut link_frames = Vec::with_capacity(n);
    let mut joint_axes = Vec::with_capacity(n);
    poses.push(Pose::identity());
    for j in 0..n {
        let prev = poses[j];
        let alpha = q[2 * j];
        let beta = q[2 * j + 1];
        let axis_alpha = prev.rotation * Vec3::x();
        let after_alpha = prev.rotation * rot_x(alpha);
        let axis_beta = after_alpha * Vec3::y();
        joint_axes.push([axis_alpha, axis_beta]);
        let link_rot = after_alpha * rot_y(beta);
        let link_frame = Pose {
            rotation: link_rot,
            translation: prev.translation,
        };
        link_frames.push(link_frame);
        poses.push(Pose {
            rotation: link_rot,
            translation: prev.translation
                + link_rot * Vec3::new(0.0, 0.0, geom.link_lengths()[j]),
        });
    }
    Ok(ChainFrames {
        poses,
        link_frames,
        joint_axes,
    })
}

/// Forward kinematics: the `n + 1` frames of the chain (base first, tip
/// last). With `q = 0` the tip translation is `(0, 0, sum of link lengths)`.
pub fn forward_kinematics(geom: &RobotGeometry, q: &JointState) -> Result<Vec<Pose>> {
    Ok(chain_frames(geom, q)?.poses)
}

/// World-frame way points of one tendon at state `q`.
///
/// The base way point is transformed by the base frame; way points `2j-1`
/// and `2j` by link `j`'s frame (origin at joint `j`'s center).
pub fn tendon_waypoints_world(
    geom: &RobotGeometry,
    q: &JointState,
    tendon_index: usize,
) -> Result<Vec<Vec3>> {
    let frames = chain_frames(geom, q)?;
    tendon_waypoints_from_frames(geom, &frames, tendon_index)
}

/// Same as [`tendon_waypoints_world`] but reuses precomputed frames.
pub fn tendon_waypoints_from_frames(
    geom: &RobotGeometry,
    frames: &ChainFrames,
    tendon_index: usize,
) -> Result<Vec<Vec3>> {
    let routing = geom
        .tendons()
        .get(tendon_index)
        .ok_or(Error::IndexOutOfRange {
            what: "tendon",
            index: tendon_index,
            count: geom.tendon_count(),
        })?;
    let mut world = Vec::with_capacity(routing.relative_waypoints.len());
    world.push(routing.relative_waypoints[0]);
    for j in 0..geom.n() {
        let frame = &frames.link_frames[j];
        world.push(frame.transform_point(&routing.relative_waypoints[2 * j + 1]));
        world.push(frame.transform_point(&routing.relative_waypoints[2 * j + 2]));
    }
    Ok(world)
}

/// Polyline length of a way point sequence: sum of straight segment lengths.
pub fn tendon_length(waypoints: &[Vec3]) -> Result<f64> {
    if waypoints.len() < 2 {
        return Err(Error::DimensionMismatch {
            what: "tendon length way points".into(),
            expected: 2,
            actual: waypoints.len(),
        });
    }
    Ok(waypoints
        .windows(2)
        .map(|w| (w[1] - w[0]).norm())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn single_tendon_robot(n: usize, len: f64) -> RobotGeometry {
        let lengths = vec![len; n];
        let tendon = TendonRouting::parallel(&lengths, 0.005, 0.0, 0.25);
        RobotGeometry::new(lengths, PI / 4.0, vec![tendon]).unwrap()
    }

    #[test]
    fn joint_transform_zero_angles() {
        let p = joint_transform(0.0, 0.0, 0.017).unwrap();
        assert_eq!(p.rotation, Matrix3::identity());
        assert_relative_eq!(p.translation, Vec3::new(0.0, 0.0, 0.017));
    }

    #[test]
    fn joint_transform_quarter_turn_maps_z_to_minus_y() {
        let p = joint_transform(FRAC_PI_2, 0.0, 1.0).unwrap();
        let z_image = p.rotation * Vec3::z();
        assert_relative_eq!(z_image, Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(p.translation, Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn joint_transform_composed_rotations() {
        // Oracle: direct 3x3 rotation products, computed independently.
        let p = joint_transform(0.1, 0.2, 0.05).unwrap();
        let expected = Vec3::new(
            0.0099334665397530619,
            -0.0048921697503627858,
            0.048758516360090799,
        );
        assert_relative_eq!(p.translation, expected, epsilon = 1e-15);
    }

    #[test]
    fn joint_transform_rejects_out_of_range() {
        assert!(joint_transform(1.6, 0.0, 1.0).is_err());
        assert!(joint_transform(0.0, -1.8, 1.0).is_err());
        assert!(joint_transform(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn fk_straight_chain_tip() {
        let geom = single_tendon_robot(10, 0.017);
        let q = JointState::zero(&geom);
        let poses = forward_kinematics(&geom, &q).unwrap();
        assert_eq!(poses.len(), 11);
        assert_relative_eq!(
            poses[10].translation,
            Vec3::new(0.0, 0.0, 0.170),
            epsilon = 1e-15
        );
    }

    #[test]
    fn fk_single_quarter_turn() {
        let geom = {
            let lengths = vec![1.0];
            let tendon = TendonRouting::parallel(&lengths, 0.1, 0.0, 0.25);
            RobotGeometry::new(lengths, FRAC_PI_2, vec![tendon]).unwrap()
        };
        let q = JointState::new(&geom, vec![FRAC_PI_2, 0.0]).unwrap();
        let poses = forward_kinematics(&geom, &q).unwrap();
        assert_relative_eq!(
            poses[1].translation,
            Vec3::new(0.0, -1.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn fk_two_link_planar_arc() {
        // Oracle: manual composition of two elementary transforms.
        let geom = single_tendon_robot(2, 1.0);
        let q = JointState::new(&geom, vec![0.1, 0.0, 0.1, 0.0]).unwrap();
        let poses = forward_kinematics(&geom, &q).unwrap();
        let expected = Vec3::new(0.0, -0.29850274744188943, 1.9750707431192676);
        assert_relative_eq!(poses[2].translation, expected, epsilon = 1e-14);
        // Planar: x stays zero along the whole chain.
        for p in &poses {
            assert!(p.translation.x.abs() < 1e-15);
        }
    }

    #[test]
    fn fk_dimension_mismatch() {
        let geom = single_tendon_robot(3, 0.02);
        let err = chain_frames(
            &geom,
            &JointState {
                q: vec![0.0; 4], // wrong length, bypasses validation on purpose
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn waypoints_straight_chain_keep_offset() {
        let geom = single_tendon_robot(5, 0.02);
        let q = JointState::zero(&geom);
        let wps = tendon_waypoints_world(&geom, &q, 0).unwrap();
        assert_eq!(wps.len(), 11);
        for w in &wps {
            assert_relative_eq!(w.x, 0.005, epsilon = 1e-15);
            assert!(w.y.abs() < 1e-15);
        }
        for pair in wps.windows(2) {
            assert!(pair[1].z > pair[0].z);
        }
    }

    #[test]
    fn waypoints_single_joint_rotation() {
        let lengths = vec![1.0];
        let tendon = TendonRouting::parallel(&lengths, 0.1, 0.0, 0.25);
        let geom = RobotGeometry::new(lengths, FRAC_PI_2, vec![tendon]).unwrap();
        let q = JointState::new(&geom, vec![FRAC_PI_2, 0.0]).unwrap();
        let wps = tendon_waypoints_world(&geom, &q, 0).unwrap();
        // Distal way point (0.1, 0, 0.75) maps under x-rotation by pi/2:
        // (x, y, z) -> (x, -z, y).
        assert_relative_eq!(wps[2], Vec3::new(0.1, -0.75, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn waypoints_helical_at_zero_match_relative() {
        // With q = 0 every link frame is a pure z-translation, so the world
        // way points are the relative ones shifted by the joint center.
        let lengths = vec![0.02; 6];
        let tendon = TendonRouting::helical(&lengths, 0.004, 0.3, 1.0, 0.25);
        let geom = RobotGeometry::new(lengths.clone(), PI / 4.0, vec![tendon.clone()]).unwrap();
        let q = JointState::zero(&geom);
        let wps = tendon_waypoints_world(&geom, &q, 0).unwrap();
        let mut base_z = 0.0;
        for j in 0..6 {
            for k in 0..2 {
                let rel = tendon.relative_waypoints[2 * j + 1 + k];
                let expect = rel + Vec3::new(0.0, 0.0, base_z);
                assert_relative_eq!(wps[2 * j + 1 + k], expect, epsilon = 1e-15);
            }
            base_z += lengths[j];
        }
    }

    #[test]
    fn tendon_length_collinear() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 2.0),
        ];
        assert_relative_eq!(tendon_length(&pts).unwrap(), 2.0);
    }

    #[test]
    fn tendon_length_right_angle() {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        assert_relative_eq!(tendon_length(&pts).unwrap(), 2.0);
    }

    #[test]
    fn tendon_length_helix_chords_below_arc() {
        // 21 samples of a unit-radius, unit-pitch helix. Chord sum frozen
        // from direct summation; it must stay below the smooth arc length.
        let pts: Vec<Vec3> = (0..21)
            .map(|i| {
                let t = 2.0 * PI * (i as f64) / 20.0;
                Vec3::new(t.cos(), t.sin(), t / (2.0 * PI))
            })
            .collect();
        let len = tendon_length(&pts).unwrap();
        assert_relative_eq!(len, 6.3367804888505592, epsilon = 1e-12);
        let arc = 2.0 * PI * (1.0f64 + 1.0 / (2.0 * PI).powi(2)).sqrt();
        assert!(len < arc);
    }

    #[test]
    fn tendon_length_needs_two_points() {
        assert!(tendon_length(&[Vec3::zeros()]).is_err());
    }

    #[test]
    fn tendon_length_allows_coincident_points() {
        let pts = [Vec3::zeros(), Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0)];
        assert_relative_eq!(tendon_length(&pts).unwrap(), 1.0);
    }

    #[test]
    fn state_dimension_is_two_n() {
        let geom = single_tendon_robot(7, 0.01);
        assert_eq!(JointState::zero(&geom).len(), 14);
        assert!(JointState::new(&geom, vec![0.0; 15]).is_err());
    }

    #[test]
    fn joint_state_enforces_limits() {
        let geom = single_tendon_robot(2, 0.01);
        assert!(JointState::new(&geom, vec![0.0, 0.9, 0.0, 0.0]).is_err());
        assert!(JointState::new(&geom, vec![0.1, -0.2, 0.3, 0.0]).is_ok());
    }

    #[test]
    fn geometry_validation() {
        let lengths = vec![0.02; 3];
        let good = TendonRouting::parallel(&lengths, 0.005, 0.0, 0.25);
        assert!(RobotGeometry::new(vec![], 0.5, vec![good.clone()]).is_err());
        assert!(RobotGeometry::new(vec![0.02, -0.01, 0.02], 0.5, vec![good.clone()]).is_err());
        assert!(RobotGeometry::new(lengths.clone(), 2.0, vec![good.clone()]).is_err());
        assert!(RobotGeometry::new(lengths.clone(), 0.5, vec![]).is_err());
        let mut short = good.clone();
        short.relative_waypoints.pop();
        assert!(matches!(
            RobotGeometry::new(lengths.clone(), 0.5, vec![short]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(RobotGeometry::new(lengths, 0.5, vec![good]).is_ok());
    }

    #[test]
    fn planarity_alpha_only_stays_in_yz_plane() {
        let geom = single_tendon_robot(4, 0.02);
        let q = JointState::new(&geom, vec![0.3, 0.0, -0.2, 0.0, 0.1, 0.0, 0.25, 0.0]).unwrap();
        let poses = forward_kinematics(&geom, &q).unwrap();
        for p in &poses {
            assert!(p.translation.x.abs() < 1e-15);
        }
        // Positive alpha tilts toward -y per the axis convention.
        let q_pos = JointState::new(&geom, vec![0.3, 0.0, 0.3, 0.0, 0.3, 0.0, 0.3, 0.0]).unwrap();
        let tip = forward_kinematics(&geom, &q_pos).unwrap()[4].translation;
        assert!(tip.y < 0.0);
    }

    proptest! {
        #[test]
        fn frames_stay_orthonormal(
            seed in proptest::collection::vec(-0.7f64..0.7, 20)
        ) {
            let geom = single_tendon_robot(10, 0.017);
            let q = JointState::new(&geom, seed).unwrap();
            for p in forward_kinematics(&geom, &q).unwrap() {
                prop_assert!(p.orthonormality_residual() <= 1e-9);
            }
        }

        #[test]
        fn same_link_waypoint_distance_rigid(
            prox in -0.7f64..0.7,
            distal in -0.7f64..0.7,
        ) {
            // Distance between the two way points of link 2 must not depend
            // on angles elsewhere in the chain.
            let geom = single_tendon_robot(4, 0.02);
            let base = JointState::new(&geom, vec![0.1, -0.1, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
            let wps0 = tendon_waypoints_world(&geom, &base, 0).unwrap();
            let d0 = (wps0[4] - wps0[3]).norm();
            let other = JointState::new(
                &geom,
                vec![prox, 0.3 * prox, 0.2, 0.1, distal, -0.2 * distal, 0.5 * distal, 0.1],
            )
            .unwrap();
            let wps1 = tendon_waypoints_world(&geom, &other, 0).unwrap();
            let d1 = (wps1[4] - wps1[3]).norm();
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn tendon_length_rigid_motion_invariant(
            angle in -3.0f64..3.0,
            tx in -5.0f64..5.0,
            ty in -5.0f64..5.0,
            tz in -5.0f64..5.0,
        ) {
            let pts = [
                Vec3::new(0.1, 0.2, 0.0),
                Vec3::new(0.4, -0.3, 0.5),
                Vec3::new(-0.2, 0.1, 1.0),
                Vec3::new(0.0, 0.0, 1.7),
            ];
            let rot = rot_x(0.4) * rot_y(angle.clamp(-1.5, 1.5));
            let t = Vec3::new(tx, ty, tz);
            let moved: Vec<Vec3> = pts.iter().map(|p| rot * p + t).collect();
            let l0 = tendon_length(&pts).unwrap();
            let l1 = tendon_length(&moved).unwrap();
            prop_assert!((l0 - l1).abs() < 1e-12);
        }
    }
}
