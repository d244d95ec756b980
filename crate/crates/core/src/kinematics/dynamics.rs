//! Floating-base dynamics of the trunk with the arm attached.
//!
//! Velocities are the base twist in body coordinates `[ω_B; v_B]` followed by
//! the six arm joint rates. Spatial algebra follows the usual motion/force
//! duality with `[angular; linear]` ordering.

use nalgebra::{Cholesky, Isometry3, Matrix3, Matrix6, SMatrix, SVector, Vector3, Vector6};

use super::arm::arm_link_frames;
use super::model::KinematicModel;
use super::{skew, RobotState};
use crate::error::KinematicsError;
use crate::scalar::{all_finite, lit, Real};

type Matrix12<T> = SMatrix<T, 12, 12>;
type Vector12<T> = SVector<T, 12>;

fn block<T: Real>(a: &Matrix3<T>, b: &Matrix3<T>, c: &Matrix3<T>, d: &Matrix3<T>) -> Matrix6<T> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(b);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(c);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(d);
    m
}

fn split<T: Real>(v: &Vector6<T>) -> (Vector3<T>, Vector3<T>) {
    (v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
}

fn join<T: Real>(a: &Vector3<T>, b: &Vector3<T>) -> Vector6<T> {
    Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// `v ×m m`.
fn cross_motion<T: Real>(v: &Vector6<T>, m: &Vector6<T>) -> Vector6<T> {
    let (w, vl) = split(v);
    let (mw, ml) = split(m);
    join(&w.cross(&mw), &(w.cross(&ml) + vl.cross(&mw)))
}

/// `v ×f f`.
fn cross_force<T: Real>(v: &Vector6<T>, f: &Vector6<T>) -> Vector6<T> {
    let (w, vl) = split(v);
    let (n, fl) = split(f);
    join(&(w.cross(&n) + vl.cross(&fl)), &w.cross(&fl))
}

/// Motion transform into a child frame whose pose in the parent is `pose`.
fn motion_transform<T: Real>(pose: &Isometry3<T>) -> Matrix6<T> {
    let rt = pose.rotation.to_rotation_matrix().into_inner().transpose();
    let p = pose.translation.vector;
    block(&rt, &Matrix3::zeros(), &(-rt * skew(&p)), &rt)
}

fn spatial_inertia<T: Real>(mass: T, com: &Vector3<T>, inertia: &Matrix3<T>) -> Matrix6<T> {
    let c = skew(com);
    block(&(inertia + c * c.transpose() * mass), &(c * mass), &(c.transpose() * mass), &(Matrix3::identity() * mass))
}

struct Links<T: Real> {
    /// Pose of each arm link frame in the base frame.
    poses: [Isometry3<T>; 6],
    /// Joint motion subspace in the link's own frame.
    axes: [Vector6<T>; 6],
    inertias: [Matrix6<T>; 6],
}

fn links<T: Real>(model: &KinematicModel<T>, q_arm: &Vector6<T>) -> Links<T> {
    let mount = model.arm_mount_pose();
    let (frames, _) = arm_link_frames(&model.arm, q_arm);
    let mut poses = [Isometry3::identity(); 6];
    let mut axes = [Vector6::zeros(); 6];
    let mut inertias = [Matrix6::zeros(); 6];
    for (i, joint) in model.arm.joints.iter().enumerate() {
        poses[i] = mount * frames[i];
        axes[i] = join(&joint.axis.into_inner(), &Vector3::zeros());
        inertias[i] = spatial_inertia(joint.mass, &joint.com, &joint.inertia);
    }
    Links { poses, axes, inertias }
}

fn base_inertia<T: Real>(model: &KinematicModel<T>) -> Matrix6<T> {
    spatial_inertia(model.base_mass, &Vector3::zeros(), &model.base_inertia)
}

/// 12×12 joint-space inertia of base + arm, assembled as the sum over bodies
/// of `Jᵢᵀ Iᵢ Jᵢ` where `Jᵢ` maps `[ν_B; q̇_arm]` to the body twist.
pub fn floating_base_mass_matrix<T: Real>(model: &KinematicModel<T>, q_arm: &Vector6<T>) -> Matrix12<T> {
    let l = links(model, q_arm);
    let mut m = Matrix12::zeros();
    m.fixed_view_mut::<6, 6>(0, 0).copy_from(&base_inertia(model));
    for i in 0..6 {
        let x_ib = motion_transform(&l.poses[i]);
        let mut j = SMatrix::<T, 6, 12>::zeros();
        j.fixed_view_mut::<6, 6>(0, 0).copy_from(&x_ib);
        for k in 0..=i {
            // motion transform from link k to link i
            let x_ik = motion_transform(&(l.poses[k].inverse() * l.poses[i]));
            j.fixed_view_mut::<6, 1>(0, 6 + k).copy_from(&(x_ik * l.axes[k]));
        }
        m += j.transpose() * l.inertias[i] * j;
    }
    m
}

/// Center of mass of base + arm in the base frame.
pub fn composite_com<T: Real>(model: &KinematicModel<T>, q_arm: &Vector6<T>) -> Vector3<T> {
    // the angular/linear coupling block of the spatial inertia is m·[c]×
    let m = floating_base_mass_matrix(model, q_arm);
    let b = m.fixed_view::<3, 3>(0, 3);
    Vector3::new(b[(2, 1)], b[(0, 2)], b[(1, 0)]) / m[(3, 3)]
}

/// Inverse dynamics of the floating base + arm system.
///
/// Returns the base wrench (body coordinates) and the arm joint torques
/// needed to realize `base_accel` (body-frame twist derivative) and
/// `qdd_arm`, with gravity `gravity_body` (the gravity acceleration vector
/// expressed in the base frame).
pub fn rnea_floating<T: Real>(
    model: &KinematicModel<T>,
    q_arm: &Vector6<T>,
    base_twist: &Vector6<T>,
    qd_arm: &Vector6<T>,
    base_accel: &Vector6<T>,
    qdd_arm: &Vector6<T>,
    gravity_body: &Vector3<T>,
) -> (Vector6<T>, Vector6<T>) {
    let l = links(model, q_arm);
    let i0 = base_inertia(model);
    let v0 = *base_twist;
    let a0 = base_accel - join(&Vector3::zeros(), gravity_body);

    let mut v = [Vector6::zeros(); 6];
    let mut a = [Vector6::zeros(); 6];
    let mut f = [Vector6::zeros(); 6];
    let mut x_parent = [Matrix6::zeros(); 6];
    for i in 0..6 {
        let rel = if i == 0 { l.poses[0] } else { l.poses[i - 1].inverse() * l.poses[i] };
        x_parent[i] = motion_transform(&rel);
        let (vp, ap) = if i == 0 { (v0, a0) } else { (v[i - 1], a[i - 1]) };
        let vj = l.axes[i] * qd_arm[i];
        v[i] = x_parent[i] * vp + vj;
        a[i] = x_parent[i] * ap + l.axes[i] * qdd_arm[i] + cross_motion(&v[i], &vj);
        f[i] = l.inertias[i] * a[i] + cross_force(&v[i], &(l.inertias[i] * v[i]));
    }
    let mut tau = Vector6::zeros();
    for i in (0..6).rev() {
        tau[i] = l.axes[i].dot(&f[i]);
        let back = x_parent[i].transpose() * f[i];
        if i > 0 {
            f[i - 1] += back;
        } else {
            let f0 = i0 * a0 + cross_force(&v0, &(i0 * v0)) + back;
            return (f0, tau);
        }
    }
    unreachable!()
}

/// Velocity-product and gravity terms `[n_B; n_arm]`.
pub fn floating_base_bias<T: Real>(
    model: &KinematicModel<T>,
    q_arm: &Vector6<T>,
    base_twist: &Vector6<T>,
    qd_arm: &Vector6<T>,
    gravity_body: &Vector3<T>,
) -> Vector12<T> {
    let (nb, na) = rnea_floating(model, q_arm, base_twist, qd_arm, &Vector6::zeros(), &Vector6::zeros(), gravity_body);
    let mut n = Vector12::zeros();
    n.fixed_rows_mut::<6>(0).copy_from(&nb);
    n.fixed_rows_mut::<6>(6).copy_from(&na);
    n
}

/// Arm dynamics with the base acceleration eliminated:
/// `M_fl q̈ + n_fl = τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledArmDynamics<T: Real> {
    pub m_fl: Matrix6<T>,
    pub n_fl: Vector6<T>,
    /// Composite inertia of the base with the arm attached at its current posture.
    pub m_b: Matrix6<T>,
    /// Base-to-arm coupling block `F`.
    pub f: Matrix6<T>,
    pub m_arm: Matrix6<T>,
    pub n_b: Vector6<T>,
    pub n_arm: Vector6<T>,
    /// Base wrench that holds the composite body static against gravity.
    pub support_wrench: Vector6<T>,
}

/// `M_fl = M_arm − Fᵀ M_B⁻¹ F`, `n_fl = n_arm − Fᵀ M_B⁻¹ (n_B − w_s)`.
///
/// The base is free for inertial coupling but carried by the legs: `w_s`
/// is the static support wrench, the base-row gravity load of the composite
/// body at rest. With it, the gravity part of `n_fl` is the arm's gravity
/// load on a held base, and the full floating-base solve with base wrench
/// `w_s` reproduces `M_fl q̈ + n_fl = τ` exactly.
///
/// `gravity` is the magnitude of gravity along `-z` of the inertial frame.
pub fn coupled_arm_dynamics<T: Real>(
    model: &KinematicModel<T>,
    state: &RobotState<T>,
    gravity: T,
) -> Result<CoupledArmDynamics<T>, KinematicsError> {
    let r = state.rotation()?;
    let g_body = r.inverse() * Vector3::new(T::zero(), T::zero(), -gravity);
    let q = state.q_arm();
    let m = floating_base_mass_matrix(model, &q);
    let n = floating_base_bias(model, &q, &state.base_twist_body()?, &state.qd_arm(), &g_body);

    let m_b: Matrix6<T> = m.fixed_view::<6, 6>(0, 0).into_owned();
    let f: Matrix6<T> = m.fixed_view::<6, 6>(0, 6).into_owned();
    let m_arm: Matrix6<T> = m.fixed_view::<6, 6>(6, 6).into_owned();
    let n_b: Vector6<T> = n.fixed_rows::<6>(0).into_owned();
    let n_arm: Vector6<T> = n.fixed_rows::<6>(6).into_owned();

    let chol = Cholesky::new(m_b)
        .ok_or_else(|| KinematicsError::ModelParameter("base inertia block is not positive definite".into()))?;
    let mut m_fl = m_arm - f.transpose() * chol.solve(&f);
    m_fl = (m_fl + m_fl.transpose()) * lit::<T>(0.5);
    let z6 = Vector6::zeros();
    let (support_wrench, _) = rnea_floating(model, &q, &z6, &z6, &z6, &z6, &g_body);
    let n_fl = n_arm - f.transpose() * chol.solve(&(n_b - support_wrench));
    if !all_finite(&m_fl) || !all_finite(&n_fl) || Cholesky::new(m_fl).is_none() {
        return Err(KinematicsError::ModelParameter("reduced arm inertia is not positive definite".into()));
    }
    Ok(CoupledArmDynamics { m_fl, n_fl, m_b, f, m_arm, n_b, n_arm, support_wrench })
}
