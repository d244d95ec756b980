//! Single-rigid-body MPC for ground reaction forces.
//!
//! State (13): roll, pitch, yaw, position, world angular velocity, linear
//! velocity, and a constant gravity entry. The rotational kinematics are
//! linearized about the current yaw, the model is Euler-discretized, and the
//! states are condensed out so the QP is over stance-foot forces only.

use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::MpcError;
use crate::kinematics::{axis_rotation_z, composite_com, floating_base_mass_matrix, skew, EulerZyx, KinematicModel, LEG_COUNT};
use crate::qp::{kkt_residual, solve_qp, QpProblem, QpSettings};
use crate::scalar::{lit, Real};

pub const STATE_DIM: usize = 13;
pub type SrbVector<T> = SVector<T, STATE_DIM>;

/// Lumped body used by the MPC and by the dynamic plant.
///
/// The reference point is the composite center of mass of the trunk and the
/// arm at its home posture; the inertia is taken about that point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrbModel<T: Real> {
    pub mass: T,
    /// Center of mass in the base frame, m.
    pub com: Vector3<T>,
    /// Body-frame rotational inertia about `com`, kg·m².
    pub inertia: Matrix3<T>,
    pub gravity: T,
    pub mu: T,
}

impl<T: Real> SrbModel<T> {
    pub fn from_kinematic_model(model: &KinematicModel<T>, gravity: T, mu: T) -> Self {
        let m = floating_base_mass_matrix(model, &model.arm_home);
        let mass = m[(3, 3)];
        let com = composite_com(model, &model.arm_home);
        // parallel axis: I_o = I_c + m [c]× [c]×ᵀ
        let c = skew(&com);
        let i_o = m.fixed_view::<3, 3>(0, 0).into_owned();
        let inertia = i_o - c * c.transpose() * mass;
        Self { mass, com, inertia: (inertia + inertia.transpose()) * lit::<T>(0.5), gravity, mu }
    }

    pub fn weight(&self) -> T {
        self.mass * self.gravity
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrbState<T: Real> {
    pub orientation: EulerZyx<T>,
    pub position: Vector3<T>,
    /// Angular velocity in the inertial frame.
    pub omega: Vector3<T>,
    pub velocity: Vector3<T>,
}

impl<T: Real> SrbState<T> {
    pub fn to_vector(&self, gravity: T) -> SrbVector<T> {
        let o = &self.orientation;
        let mut x = SrbVector::zeros();
        x[0] = o.roll;
        x[1] = o.pitch;
        x[2] = o.yaw;
        x.fixed_rows_mut::<3>(3).copy_from(&self.position);
        x.fixed_rows_mut::<3>(6).copy_from(&self.omega);
        x.fixed_rows_mut::<3>(9).copy_from(&self.velocity);
        x[12] = gravity;
        x
    }
}

/// What the force regularizer pulls toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForceReference {
    /// Zero force: plain `‖f‖²_R`.
    Zero,
    /// Per step, the weight spread over the stance feet with the least
    /// roll and pitch moment about the reference point; see [`equilibrium_forces`].
    #[default]
    Gravity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig<T: Real> {
    pub horizon: usize,
    pub dt: T,
    pub f_min: T,
    /// Max normal force per foot as a multiple of the total weight.
    pub f_max_weight_ratio: T,
    /// Diagonal state weights.
    pub q: [T; STATE_DIM],
    /// Force weight per component.
    pub r: T,
    pub force_reference: ForceReference,
    pub max_iterations: usize,
}

impl<T: Real> Default for MpcConfig<T> {
    fn default() -> Self {
        let q = [5.0, 5.0, 10.0, 20.0, 20.0, 50.0, 0.5, 0.5, 0.5, 5.0, 5.0, 1.0, 0.0];
        Self {
            horizon: 10,
            dt: lit(0.03),
            f_min: T::zero(),
            f_max_weight_ratio: lit(2.0),
            q: q.map(lit),
            r: lit(1e-5),
            force_reference: ForceReference::Gravity,
            max_iterations: 1000,
        }
    }
}

/// Everything the MPC needs for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcInput<T: Real> {
    pub state: SrbState<T>,
    /// Reference for steps `1..=N`.
    pub reference: Vec<SrbState<T>>,
    /// Contact flags for steps `0..N`.
    pub contacts: Vec<[bool; LEG_COUNT]>,
    /// Foot positions relative to the reference point, inertial axes, for steps `0..N`.
    pub feet: Vec<[Vector3<T>; LEG_COUNT]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpcStatus {
    Solved,
    /// Previous solution shifted by one step because the solver failed.
    Stale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution<T: Real> {
    /// Ground reaction forces on each foot, inertial frame, per horizon step.
    pub forces: Vec<[Vector3<T>; LEG_COUNT]>,
    pub status: MpcStatus,
    pub iterations: usize,
    pub objective: T,
    pub kkt_residual: T,
    pub constraint_residual: T,
}

impl<T: Real> MpcSolution<T> {
    pub fn first(&self) -> [Vector3<T>; LEG_COUNT] {
        self.forces.first().copied().unwrap_or([Vector3::zeros(); LEG_COUNT])
    }

    /// Drops the first step and repeats the last one.
    pub fn shifted(&self) -> Self {
        let mut forces = self.forces.clone();
        if forces.len() > 1 {
            forces.remove(0);
            forces.push(*forces.last().unwrap());
        }
        Self { forces, status: MpcStatus::Stale, ..self.clone() }
    }
}

/// Maps QP variables back to (step, leg).
#[derive(Debug, Clone, PartialEq)]
pub struct ForceLayout {
    pub slots: Vec<(usize, usize)>,
}

/// `x_{k+1} = A x_k + B_k u_k` with all four feet in `u_k`.
pub fn discrete_dynamics<T: Real>(
    model: &SrbModel<T>,
    yaw: T,
    feet: &[Vector3<T>; LEG_COUNT],
    dt: T,
) -> (SMatrix<T, STATE_DIM, STATE_DIM>, SMatrix<T, STATE_DIM, 12>) {
    let rz = axis_rotation_z(yaw);
    let mut a = SMatrix::<T, STATE_DIM, STATE_DIM>::identity();
    a.fixed_view_mut::<3, 3>(0, 6).copy_from(&(rz.matrix().transpose() * dt));
    a.fixed_view_mut::<3, 3>(3, 9).copy_from(&(Matrix3::identity() * dt));
    a[(11, 12)] = -dt;
    let i_world = rz.matrix() * model.inertia * rz.matrix().transpose();
    let i_inv = i_world.try_inverse().unwrap_or_else(Matrix3::identity);
    let mut b = SMatrix::<T, STATE_DIM, 12>::zeros();
    for (leg, r) in feet.iter().enumerate() {
        b.fixed_view_mut::<3, 3>(6, 3 * leg).copy_from(&(i_inv * skew(r) * dt));
        b.fixed_view_mut::<3, 3>(9, 3 * leg).copy_from(&(Matrix3::identity() * (dt / model.mass)));
    }
    (a, b)
}

/// Vertical stance forces that carry `weight` exactly and, as far as the
/// stance allows, leave no roll or pitch moment about the reference point.
/// Among those, the closest to equal shares. `feet` are relative to the
/// reference point; the result is laid out `[f_x, f_y, f_z]` per foot.
pub fn equilibrium_forces<T: Real>(feet: &[Vector3<T>], weight: T) -> DVector<T> {
    let n = feet.len();
    let inv_n = T::one() / lit(n as f64);
    let f0 = DVector::from_element(n, weight * inv_n);
    // moment of vertical forces about x and y, and the projector onto
    // load changes that sum to zero
    let m = DMatrix::from_fn(2, n, |row, i| if row == 0 { feet[i].y } else { -feet[i].x });
    let p = DMatrix::<T>::identity(n, n) - DMatrix::from_element(n, n, inv_n);
    let fz = match (&m * &p).pseudo_inverse(lit(1e-9)) {
        Ok(pinv) => &f0 - &p * (pinv * (&m * &f0)),
        Err(_) => f0,
    };
    DVector::from_fn(3 * n, |i, _| if i % 3 == 2 { fz[i / 3] } else { T::zero() })
}

/// Builds the condensed QP. Variables are the forces of stance feet only.
pub fn build_mpc_qp<T: Real>(
    model: &SrbModel<T>,
    config: &MpcConfig<T>,
    input: &MpcInput<T>,
) -> Result<(QpProblem<T>, ForceLayout), MpcError> {
    let n = config.horizon;
    if input.reference.len() < n || input.contacts.len() < n || input.feet.len() < n {
        return Err(MpcError::Qp(crate::error::QpError::Dimension(format!(
            "horizon {n}, reference {}, contacts {}, feet {}",
            input.reference.len(),
            input.contacts.len(),
            input.feet.len()
        ))));
    }
    let mut slots = Vec::new();
    for k in 0..n {
        for leg in 0..LEG_COUNT {
            if input.contacts[k][leg] {
                slots.push((k, leg));
            }
        }
    }
    if slots.is_empty() {
        return Err(MpcError::NoStance);
    }
    let nv = 3 * slots.len();
    let ns = STATE_DIM * n;
    let yaw = input.state.orientation.yaw;

    // Prediction X = Sx x0 + Su U, built step by step.
    let mut su = DMatrix::<T>::zeros(ns, nv);
    let mut x_free = DVector::<T>::zeros(ns);
    let mut x = input.state.to_vector(model.gravity);
    let mut b_steps = Vec::with_capacity(n);
    let mut a_mat = SMatrix::<T, STATE_DIM, STATE_DIM>::identity();
    for k in 0..n {
        let (a, b) = discrete_dynamics(model, yaw, &input.feet[k], config.dt);
        a_mat = a;
        x = a * x;
        x_free.rows_mut(STATE_DIM * k, STATE_DIM).copy_from(&x);
        b_steps.push(b);
    }
    // A is the same for every step (yaw held), so A^j is shared.
    let mut pow = vec![SMatrix::<T, STATE_DIM, STATE_DIM>::identity(); n];
    for j in 1..n {
        pow[j] = a_mat * pow[j - 1];
    }
    for (col, &(k, leg)) in slots.iter().enumerate() {
        let b = b_steps[k].fixed_view::<STATE_DIM, 3>(0, 3 * leg).into_owned();
        for row in k..n {
            let blk = pow[row - k] * b;
            su.view_mut((STATE_DIM * row, 3 * col), (STATE_DIM, 3)).copy_from(&blk);
        }
    }

    let mut x_ref = DVector::<T>::zeros(ns);
    for k in 0..n {
        x_ref.rows_mut(STATE_DIM * k, STATE_DIM).copy_from(&input.reference[k].to_vector(model.gravity));
    }
    let q_diag = DVector::from_fn(ns, |i, _| config.q[i % STATE_DIM]);
    let weighted_su = DMatrix::from_fn(ns, nv, |i, j| su[(i, j)] * q_diag[i]);
    let two: T = lit(2.0);
    let mut h = su.tr_mul(&weighted_su) * two;
    for i in 0..nv {
        h[(i, i)] += two * config.r;
    }
    let mut f_ref = DVector::<T>::zeros(nv);
    if config.force_reference == ForceReference::Gravity {
        let mut col = 0;
        for k in 0..n {
            let feet: Vec<Vector3<T>> = (0..LEG_COUNT).filter(|&l| input.contacts[k][l]).map(|l| input.feet[k][l]).collect();
            if feet.is_empty() {
                continue;
            }
            f_ref.rows_mut(3 * col, 3 * feet.len()).copy_from(&equilibrium_forces(&feet, model.weight()));
            col += feet.len();
        }
    }
    let g = weighted_su.tr_mul(&(x_free - x_ref)) * two - f_ref * (two * config.r);

    // Friction pyramid and normal force bounds: 6 rows per stance foot.
    let f_max = model.weight() * config.f_max_weight_ratio;
    let mut a_in = DMatrix::<T>::zeros(nv, 6 * slots.len());
    let mut b_in = DVector::<T>::zeros(6 * slots.len());
    let mu = model.mu;
    for s in 0..slots.len() {
        let (fx, fy, fz, c) = (3 * s, 3 * s + 1, 3 * s + 2, 6 * s);
        a_in[(fx, c)] = -T::one();
        a_in[(fz, c)] = mu;
        a_in[(fx, c + 1)] = T::one();
        a_in[(fz, c + 1)] = mu;
        a_in[(fy, c + 2)] = -T::one();
        a_in[(fz, c + 2)] = mu;
        a_in[(fy, c + 3)] = T::one();
        a_in[(fz, c + 3)] = mu;
        a_in[(fz, c + 4)] = T::one();
        b_in[c + 4] = config.f_min;
        a_in[(fz, c + 5)] = -T::one();
        b_in[c + 5] = -f_max;
    }
    let qp = QpProblem::new((h.clone() + h.transpose()) * lit::<T>(0.5), g).with_inequalities(a_in, b_in);
    Ok((qp, ForceLayout { slots }))
}

/// Solves one MPC problem.
pub fn srb_mpc<T: Real>(
    model: &SrbModel<T>,
    config: &MpcConfig<T>,
    input: &MpcInput<T>,
) -> Result<MpcSolution<T>, MpcError> {
    let n = config.horizon;
    if input.contacts.iter().take(n).all(|c| c.iter().all(|x| !x)) {
        return Ok(MpcSolution {
            forces: vec![[Vector3::zeros(); LEG_COUNT]; n],
            status: MpcStatus::Solved,
            iterations: 0,
            objective: T::zero(),
            kkt_residual: T::zero(),
            constraint_residual: T::zero(),
        });
    }
    let (qp, layout) = build_mpc_qp(model, config, input)?;
    let sol = solve_qp(&qp, &QpSettings { max_iterations: config.max_iterations })?;
    let res = kkt_residual(&qp, &sol);
    let mut forces = vec![[Vector3::zeros(); LEG_COUNT]; n];
    for (col, &(k, leg)) in layout.slots.iter().enumerate() {
        forces[k][leg] = Vector3::new(sol.x[3 * col], sol.x[3 * col + 1], sol.x[3 * col + 2]);
    }
    Ok(MpcSolution {
        forces,
        status: MpcStatus::Solved,
        iterations: sol.iterations,
        objective: sol.objective,
        kkt_residual: res.kkt(),
        constraint_residual: res.constraint(),
    })
}

/// Solves, or falls back to the previous solution shifted by one step.
pub fn srb_mpc_with_fallback<T: Real>(
    model: &SrbModel<T>,
    config: &MpcConfig<T>,
    input: &MpcInput<T>,
    previous: Option<&MpcSolution<T>>,
) -> Result<MpcSolution<T>, MpcError> {
    match srb_mpc(model, config, input) {
        Ok(s) => Ok(s),
        Err(e) => match previous {
            Some(p) => Ok(p.shifted()),
            None => Err(e),
        },
    }
}

/// Latest-complete-solution exchange between the MPC and the torque loop.
///
/// Writers publish whole solutions; readers get a shared snapshot and never
/// see a partially written one.
#[derive(Debug, Default)]
pub struct SolutionSlot<T: Real> {
    inner: RwLock<Option<Arc<MpcSolution<T>>>>,
}

impl<T: Real> SolutionSlot<T> {
    pub fn new() -> Self {
        Self { inner: RwLock::new(None) }
    }

    pub fn publish(&self, solution: MpcSolution<T>) {
        let fresh = Arc::new(solution);
        *self.inner.write().unwrap_or_else(|e| e.into_inner()) = Some(fresh);
    }

    pub fn latest(&self) -> Option<Arc<MpcSolution<T>>> {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}
