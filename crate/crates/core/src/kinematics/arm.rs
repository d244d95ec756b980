use nalgebra::{Isometry3, Matrix6, Translation3, UnitQuaternion, Vector6};

use super::model::ArmModel;
use crate::scalar::Real;

/// Pose of every joint frame in `S`, plus the end-effector pose.
pub fn arm_link_frames<T: Real>(arm: &ArmModel<T>, q: &Vector6<T>) -> ([Isometry3<T>; 6], Isometry3<T>) {
    let mut pose = Isometry3::identity();
    let mut frames = [Isometry3::identity(); 6];
    for (i, joint) in arm.joints.iter().enumerate() {
        let step = Isometry3::from_parts(
            Translation3::from(joint.offset),
            UnitQuaternion::from_axis_angle(&joint.axis, q[i]),
        );
        pose *= step;
        frames[i] = pose;
    }
    let ee = pose * Isometry3::translation(arm.tool.x, arm.tool.y, arm.tool.z);
    (frames, ee)
}

/// Pose of the end-effector frame `E` in the arm base frame `S`.
pub fn arm_forward_kinematics<T: Real>(arm: &ArmModel<T>, q: &Vector6<T>) -> Isometry3<T> {
    arm_link_frames(arm, q).1
}

/// Geometric Jacobian of `E` in `S`: rows 0..3 map joint rates to the
/// end-effector origin velocity, rows 3..6 to its angular velocity.
pub fn arm_jacobian<T: Real>(arm: &ArmModel<T>, q: &Vector6<T>) -> Matrix6<T> {
    let (frames, ee) = arm_link_frames(arm, q);
    let p_e = ee.translation.vector;
    let mut j = Matrix6::zeros();
    for (i, (frame, joint)) in frames.iter().zip(arm.joints.iter()).enumerate() {
        let axis = frame.rotation * joint.axis.into_inner();
        let lin = axis.cross(&(p_e - frame.translation.vector));
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&axis);
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::model::KinematicModel;
    use nalgebra::{Matrix3, Matrix4, Vector3};
    use proptest::prelude::*;

    fn arm() -> ArmModel<f64> {
        KinematicModel::default().arm
    }

    // Independent chain evaluation with homogeneous 4×4 matrices and
    // Rodrigues' formula.
    fn chain_oracle(arm: &ArmModel<f64>, q: &Vector6<f64>) -> Matrix4<f64> {
        let mut t = Matrix4::<f64>::identity();
        for (i, j) in arm.joints.iter().enumerate() {
            let mut tr = Matrix4::identity();
            tr[(0, 3)] = j.offset.x;
            tr[(1, 3)] = j.offset.y;
            tr[(2, 3)] = j.offset.z;
            let k = j.axis.into_inner();
            let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
            let r = Matrix3::identity() + kx * q[i].sin() + kx * kx * (1.0 - q[i].cos());
            let mut rot = Matrix4::identity();
            rot.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
            t = t * tr * rot;
        }
        let mut tool = Matrix4::identity();
        tool[(0, 3)] = arm.tool.x;
        tool[(1, 3)] = arm.tool.y;
        tool[(2, 3)] = arm.tool.z;
        t * tool
    }

    #[test]
    fn zero_configuration_home_pose() {
        // hand-multiplied: all offsets stack along z then x with identity rotations
        let ee = arm_forward_kinematics(&arm(), &Vector6::zeros());
        let p = ee.translation.vector;
        assert!((p - Vector3::new(0.35 + 0.15 + 0.15 + 0.05 + 0.08, 0.0, 0.15)).norm() < 1e-12);
        assert!(ee.rotation.angle() < 1e-12);
    }

    #[test]
    fn first_joint_rotation_preserves_axis_distance() {
        let a = arm();
        let q = Vector6::new(0.3, 0.4, 0.9, -0.2, 0.5, 0.1);
        let mut q2 = q;
        q2[0] += std::f64::consts::PI;
        let d = |p: Vector3<f64>| (p.x * p.x + p.y * p.y).sqrt();
        let p1 = arm_forward_kinematics(&a, &q).translation.vector;
        let p2 = arm_forward_kinematics(&a, &q2).translation.vector;
        assert!((d(p1) - d(p2)).abs() < 1e-12);
        assert!((p1.z - p2.z).abs() < 1e-12);
    }

    #[test]
    fn zero_rates_zero_twist() {
        let j = arm_jacobian(&arm(), &Vector6::new(0.1, 0.2, 0.3, 0.4, 0.5, 0.6));
        assert_eq!(j * Vector6::zeros(), Vector6::zeros());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn position_matches_chain_oracle(q in prop::array::uniform6(-3.0f64..3.0)) {
            let a = arm();
            let q = Vector6::from(q);
            let t = chain_oracle(&a, &q);
            let ee = arm_forward_kinematics(&a, &q).to_homogeneous();
            prop_assert!((t - ee).abs().max() < 1e-12);
        }

        #[test]
        fn jacobian_matches_finite_differences(q in prop::array::uniform6(-3.0f64..3.0)) {
            let a = arm();
            let q = Vector6::from(q);
            let j = arm_jacobian(&a, &q);
            let h = 1e-6;
            for i in 0..6 {
                let mut qp = q;
                let mut qm = q;
                qp[i] += h;
                qm[i] -= h;
                let tp = arm_forward_kinematics(&a, &qp);
                let tm = arm_forward_kinematics(&a, &qm);
                let lin = (tp.translation.vector - tm.translation.vector) / (2.0 * h);
                let ang = (tp.rotation * tm.rotation.inverse()).scaled_axis() / (2.0 * h);
                prop_assert!((lin - j.fixed_view::<3, 1>(0, i)).abs().max() < 1e-6);
                prop_assert!((ang - j.fixed_view::<3, 1>(3, i)).abs().max() < 1e-6);
            }
        }
    }
}
