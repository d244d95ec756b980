//! Spherical image features.
//!
//! Target points come in as normalized image coordinates and are lifted to
//! the unit sphere. The arm is represented by virtual points rigidly attached
//! near the end effector; their ranges are known from kinematics, so their
//! centroid carries an interaction gain `L_t`.

use nalgebra::{Matrix3, Matrix3x6, Point3, Rotation3, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::FeatureError;
use crate::kinematics::{arm_forward_kinematics, skew, virtual_plane_rotation, EulerZyx, KinematicModel};
use crate::scalar::{lit, to_f64, Real};

/// Ranges below this are treated as degenerate.
pub const MIN_RANGE: f64 = 1e-6;

/// A target point on the normalized image plane and its spherical lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint<T: Real> {
    pub q: Vector2<T>,
    pub s: Vector3<T>,
}

/// `s = (x, y, 1) / |(x, y, 1)|`.
pub fn project_to_sphere<T: Real>(q: &Vector2<T>) -> FeaturePoint<T> {
    let s = Vector3::new(q.x, q.y, T::one()).normalize();
    FeaturePoint { q: *q, s }
}

/// `I − s sᵀ`.
pub fn tangent_projector<T: Real>(s: &Vector3<T>) -> Matrix3<T> {
    Matrix3::identity() - s * s.transpose()
}

/// Spherical centroid `h` and, when ranges are known, its gain `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidFeature<T: Real> {
    pub h: Vector3<T>,
    pub l: Option<Matrix3<T>>,
}

/// Centroid of measured target points. Depth is unknown, so `l` is `None`.
pub fn target_centroid<T: Real>(points: &[FeaturePoint<T>]) -> Result<CentroidFeature<T>, FeatureError> {
    if points.len() < 2 {
        return Err(FeatureError::InsufficientFeatures(points.len()));
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.s);
    Ok(CentroidFeature { h: sum / lit::<T>(points.len() as f64), l: None })
}

/// Centroid and gain of Cartesian points given in the camera frame.
///
/// Used for the virtual points and, in simulation, for the ground-truth
/// target gain `L_o`.
pub fn centroid_from_points<T: Real>(points: &[Vector3<T>]) -> Result<CentroidFeature<T>, FeatureError> {
    if points.len() < 2 {
        return Err(FeatureError::InsufficientFeatures(points.len()));
    }
    let mut h = Vector3::zeros();
    let mut l = Matrix3::zeros();
    for (index, p) in points.iter().enumerate() {
        let r = p.norm();
        if !(r >= lit(MIN_RANGE)) {
            return Err(FeatureError::DegenerateRange { index, range: to_f64(r) });
        }
        let s = p / r;
        h += s;
        l += tangent_projector(&s) / r;
    }
    let m: T = lit(points.len() as f64);
    Ok(CentroidFeature { h: h / m, l: Some(l / m) })
}

/// How the virtual point offsets are attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OffsetFrame {
    /// Offsets are constant in the camera frame, so they translate with the
    /// end effector but do not rotate with it.
    #[default]
    Camera,
    /// Offsets are fixed in the end-effector frame.
    EndEffector,
}

/// Virtual points `Q_ti = O_e + Δρ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualPointSet<T: Real> {
    pub offsets: Vec<Vector3<T>>,
    pub frame: OffsetFrame,
}

impl<T: Real> VirtualPointSet<T> {
    /// Four points at `±d` along the end-effector `x` and `y` axes.
    pub fn end_effector_cross(d: T) -> Self {
        let z = T::zero();
        Self {
            offsets: vec![Vector3::new(d, z, z), Vector3::new(-d, z, z), Vector3::new(z, d, z), Vector3::new(z, -d, z)],
            frame: OffsetFrame::EndEffector,
        }
    }

    /// Camera-frame offsets that reproduce a set of target marker offsets
    /// given in the yaw-only (level) camera frame.
    pub fn matching_markers(model: &KinematicModel<T>, yaw: T, marker_offsets_world: &[Vector3<T>]) -> Self {
        let r_ic = crate::kinematics::axis_rotation_z(yaw) * model.camera_rotation;
        Self { offsets: marker_offsets_world.iter().map(|d| r_ic.inverse() * d).collect(), frame: OffsetFrame::Camera }
    }
}

/// Everything the servo and the observer need from the arm-side feature.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualFeature<T: Real> {
    pub h: Vector3<T>,
    pub l: Matrix3<T>,
    /// `J_t`, the mean of the per-point maps `J_ti` from end-effector twist (in `S`) to `Q̇_ti`.
    pub j_t: Matrix3x6<T>,
    pub j_ti: Vec<Matrix3x6<T>>,
    /// `c'R_c`.
    pub r_virtual: Rotation3<T>,
    /// Virtual points `Q'_ti` in camera coordinates.
    pub points: Vec<Vector3<T>>,
    /// End-effector origin `O_e` in the camera frame (actual, not remapped).
    pub o_e: Vector3<T>,
}

impl<T: Real> VirtualFeature<T> {
    pub fn centroid(&self) -> CentroidFeature<T> {
        CentroidFeature { h: self.h, l: Some(self.l) }
    }

    /// `L_t c'R_cᵀ J_t J_e`: arm joint rates to centroid rate.
    pub fn arm_feature_map(&self, j_e: &nalgebra::Matrix6<T>) -> Matrix3x6<T> {
        self.l * self.r_virtual.inverse().matrix() * self.j_t * j_e
    }

    /// Per-point sum `(1/m) Σ π_i / r_i · c'R_cᵀ J_ti J_e`. Equals
    /// [`Self::arm_feature_map`] when every `J_ti` is the same.
    pub fn arm_feature_map_exact(&self, j_e: &nalgebra::Matrix6<T>) -> Matrix3x6<T> {
        let rt = self.r_virtual.inverse();
        let mut a = Matrix3x6::zeros();
        for (p, j) in self.points.iter().zip(&self.j_ti) {
            let r = p.norm();
            a += tangent_projector(&(p / r)) / r * rt.matrix() * j * j_e;
        }
        a / lit::<T>(self.points.len() as f64)
    }
}

/// Builds the virtual centroid for arm angles `q_arm` and base attitude.
pub fn virtual_centroid<T: Real>(
    model: &KinematicModel<T>,
    points: &VirtualPointSet<T>,
    q_arm: &Vector6<T>,
    orientation: &EulerZyx<T>,
) -> Result<VirtualFeature<T>, FeatureError> {
    if points.offsets.len() < 2 {
        return Err(FeatureError::InsufficientFeatures(points.offsets.len()));
    }
    let r_virtual = virtual_plane_rotation(orientation, &model.camera_rotation)
        .map_err(|_| FeatureError::DegenerateRange { index: 0, range: f64::NAN })?;
    let ee = arm_forward_kinematics(&model.arm, q_arm);
    let ee_in_camera = model.camera_pose().inverse() * model.arm_mount_pose() * ee;
    let o_e = ee_in_camera * Point3::origin();
    let r_cs = model.arm_in_camera_rotation();
    let r_se = ee.rotation.to_rotation_matrix();
    let r_ce = ee_in_camera.rotation.to_rotation_matrix();

    let mut q_virtual = Vec::with_capacity(points.offsets.len());
    let mut j_ti = Vec::with_capacity(points.offsets.len());
    let mut j_t = Matrix3x6::zeros();
    for d in &points.offsets {
        let (q, lever) = match points.frame {
            OffsetFrame::Camera => (o_e.coords + d, Vector3::zeros()),
            OffsetFrame::EndEffector => (o_e.coords + r_ce * d, r_se * d),
        };
        let mut j = Matrix3x6::zeros();
        j.fixed_view_mut::<3, 3>(0, 0).copy_from(r_cs.matrix());
        j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-(r_cs.matrix() * skew(&lever))));
        j_t += j;
        j_ti.push(j);
        q_virtual.push(r_virtual.inverse() * q);
    }
    j_t /= lit::<T>(points.offsets.len() as f64);
    let c = centroid_from_points(&q_virtual)?;
    Ok(VirtualFeature {
        h: c.h,
        l: c.l.expect("ranges are known"),
        j_t,
        j_ti,
        r_virtual,
        points: q_virtual,
        o_e: o_e.coords,
    })
}

/// `e = h_o − h_t`.
pub fn visual_error<T: Real>(h_o: &Vector3<T>, h_t: &Vector3<T>) -> Vector3<T> {
    h_o - h_t
}

/// `ḣ_o = −[Ω]× h_o − L_o (v_c − v_T)`, all in the camera frame.
pub fn target_centroid_rate<T: Real>(
    h_o: &Vector3<T>,
    l_o: &Matrix3<T>,
    omega_c: &Vector3<T>,
    v_c: &Vector3<T>,
    v_t: &Vector3<T>,
) -> Vector3<T> {
    -omega_c.cross(h_o) - l_o * (v_c - v_t)
}

/// `ḣ_t = −[Ω]× h_t + L_t c'R_cᵀ J_t J_e q̇_arm`.
pub fn virtual_centroid_rate<T: Real>(
    feature: &VirtualFeature<T>,
    omega_c: &Vector3<T>,
    j_e: &nalgebra::Matrix6<T>,
    qd_arm: &Vector6<T>,
) -> Vector3<T> {
    -omega_c.cross(&feature.h) + feature.arm_feature_map(j_e) * qd_arm
}

/// Analytic visual error rate
/// `ė = −[Ω]× e − L_o (v_c − v_T) − L_t c'R_cᵀ J_t J_e q̇_arm`.
///
/// Needs the true `L_o`, so it is only usable against simulated ground truth.
#[allow(clippy::too_many_arguments)]
pub fn error_rate_oracle<T: Real>(
    e: &Vector3<T>,
    omega_c: &Vector3<T>,
    v_c: &Vector3<T>,
    v_t: &Vector3<T>,
    l_o: &Matrix3<T>,
    l_t: &Matrix3<T>,
    r_virtual: &Rotation3<T>,
    j_t: &Matrix3x6<T>,
    j_e: &nalgebra::Matrix6<T>,
    qd_arm: &Vector6<T>,
) -> Vector3<T> {
    -omega_c.cross(e) - l_o * (v_c - v_t) - l_t * r_virtual.inverse().matrix() * j_t * j_e * qd_arm
}
