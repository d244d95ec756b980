//! Dense strictly convex QP solver (Goldfarb–Idnani dual active set).
//!
//! Solves
//!
//! ```text
//! min ½ xᵀ G x + gᵀ x   s.t.   Aeqᵀ x = beq,   Ainᵀ x ≥ bin
//! ```
//!
//! Constraints are stored column-wise. The solver starts from the
//! unconstrained minimum and adds violated constraints one at a time,
//! keeping the factorization `J = L⁻ᵀ Q` and the triangular `R` updated with
//! Givens rotations.

use nalgebra::{DMatrix, DVector};

use crate::error::QpError;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T: Real> {
    pub hessian: DMatrix<T>,
    pub gradient: DVector<T>,
    pub eq_matrix: DMatrix<T>,
    pub eq_rhs: DVector<T>,
    pub ineq_matrix: DMatrix<T>,
    pub ineq_rhs: DVector<T>,
}

impl<T: Real> QpProblem<T> {
    pub fn new(hessian: DMatrix<T>, gradient: DVector<T>) -> Self {
        let n = gradient.len();
        Self {
            hessian,
            gradient,
            eq_matrix: DMatrix::zeros(n, 0),
            eq_rhs: DVector::zeros(0),
            ineq_matrix: DMatrix::zeros(n, 0),
            ineq_rhs: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<T>, b: DVector<T>) -> Self {
        self.eq_matrix = a;
        self.eq_rhs = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<T>, b: DVector<T>) -> Self {
        self.ineq_matrix = a;
        self.ineq_rhs = b;
        self
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn objective(&self, x: &DVector<T>) -> T {
        (x.transpose() * &self.hessian * x)[(0, 0)] * lit(0.5) + self.gradient.dot(x)
    }

    fn check(&self) -> Result<(), QpError> {
        let n = self.dim();
        let ok = self.hessian.shape() == (n, n)
            && self.eq_matrix.nrows() == n
            && self.eq_matrix.ncols() == self.eq_rhs.len()
            && self.ineq_matrix.nrows() == n
            && self.ineq_matrix.ncols() == self.ineq_rhs.len();
        if ok {
            Ok(())
        } else {
            Err(QpError::Dimension(format!(
                "n={n}, G={:?}, Aeq={:?}/{}, Ain={:?}/{}",
                self.hessian.shape(),
                self.eq_matrix.shape(),
                self.eq_rhs.len(),
                self.ineq_matrix.shape(),
                self.ineq_rhs.len()
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T: Real> {
    pub x: DVector<T>,
    pub eq_multipliers: DVector<T>,
    /// One per inequality; zero for inactive constraints.
    pub ineq_multipliers: DVector<T>,
    pub objective: T,
    pub iterations: usize,
}

/// Worst-case violations of the optimality conditions, max-norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual<T> {
    pub stationarity: T,
    pub equality: T,
    pub inequality: T,
    pub complementarity: T,
    pub dual: T,
}

impl<T: Real> KktResidual<T> {
    /// Primal feasibility: max of the equality and inequality violations.
    pub fn constraint(&self) -> T {
        self.equality.max(self.inequality)
    }

    /// Max over stationarity, complementarity and dual sign.
    pub fn kkt(&self) -> T {
        self.stationarity.max(self.complementarity).max(self.dual)
    }
}

pub fn kkt_residual<T: Real>(problem: &QpProblem<T>, sol: &QpSolution<T>) -> KktResidual<T> {
    let x = &sol.x;
    let grad = &problem.hessian * x + &problem.gradient
        - &problem.eq_matrix * &sol.eq_multipliers
        - &problem.ineq_matrix * &sol.ineq_multipliers;
    let eq = problem.eq_matrix.tr_mul(x) - &problem.eq_rhs;
    let slack = problem.ineq_matrix.tr_mul(x) - &problem.ineq_rhs;
    let amax = |v: &DVector<T>| v.iter().fold(T::zero(), |m, e| m.max(e.abs()));
    let mut ineq = T::zero();
    let mut comp = T::zero();
    let mut dual = T::zero();
    for i in 0..slack.len() {
        ineq = ineq.max(-slack[i]);
        comp = comp.max((sol.ineq_multipliers[i] * slack[i]).abs());
        dual = dual.max(-sol.ineq_multipliers[i]);
    }
    KktResidual { stationarity: amax(&grad), equality: amax(&eq), inequality: ineq, complementarity: comp, dual }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub max_iterations: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self { max_iterations: 1000 }
    }
}

struct Factor<T: Real> {
    n: usize,
    j: DMatrix<T>,
    r: DMatrix<T>,
    r_norm: T,
    iq: usize,
}

impl<T: Real> Factor<T> {
    fn z_step(&self, d: &DVector<T>) -> DVector<T> {
        let mut z = DVector::zeros(self.n);
        for k in self.iq..self.n {
            z.axpy(d[k], &self.j.column(k), T::one());
        }
        z
    }

    fn r_step(&self, d: &DVector<T>) -> DVector<T> {
        let mut r = DVector::zeros(self.iq);
        for i in (0..self.iq).rev() {
            let mut s = d[i];
            for k in i + 1..self.iq {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
        r
    }

    fn add(&mut self, d: &mut DVector<T>) -> bool {
        let n = self.n;
        for jj in (self.iq + 1..n).rev() {
            let (mut cc, mut ss) = (d[jj - 1], d[jj]);
            let h = cc.hypot(ss);
            if h == T::zero() {
                continue;
            }
            d[jj] = T::zero();
            ss /= h;
            cc /= h;
            if cc < T::zero() {
                cc = -cc;
                ss = -ss;
                d[jj - 1] = -h;
            } else {
                d[jj - 1] = h;
            }
            let xny = ss / (T::one() + cc);
            for k in 0..n {
                let t1 = self.j[(k, jj - 1)];
                let t2 = self.j[(k, jj)];
                let a = t1 * cc + t2 * ss;
                self.j[(k, jj - 1)] = a;
                self.j[(k, jj)] = xny * (t1 + a) - t2;
            }
        }
        self.iq += 1;
        for i in 0..self.iq {
            self.r[(i, self.iq - 1)] = d[i];
        }
        let diag = d[self.iq - 1].abs();
        if diag <= T::default_epsilon() * self.r_norm {
            return false;
        }
        self.r_norm = self.r_norm.max(diag);
        true
    }

    /// Removes active entry `pos` from `R`, `J`, and the active lists.
    fn delete(&mut self, pos: usize, active: &mut Vec<usize>, u: &mut Vec<T>) {
        let n = self.n;
        active.remove(pos);
        u.remove(pos);
        for i in pos..self.iq - 1 {
            for k in 0..n {
                self.r[(k, i)] = self.r[(k, i + 1)];
            }
        }
        for k in 0..n {
            self.r[(k, self.iq - 1)] = T::zero();
        }
        self.iq -= 1;
        if self.iq == 0 {
            return;
        }
        for jj in pos..self.iq {
            let (mut cc, mut ss) = (self.r[(jj, jj)], self.r[(jj + 1, jj)]);
            let h = cc.hypot(ss);
            if h == T::zero() {
                continue;
            }
            cc /= h;
            ss /= h;
            self.r[(jj + 1, jj)] = T::zero();
            if cc < T::zero() {
                self.r[(jj, jj)] = -h;
                cc = -cc;
                ss = -ss;
            } else {
                self.r[(jj, jj)] = h;
            }
            let xny = ss / (T::one() + cc);
            for k in jj + 1..self.iq {
                let t1 = self.r[(jj, k)];
                let t2 = self.r[(jj + 1, k)];
                let a = t1 * cc + t2 * ss;
                self.r[(jj, k)] = a;
                self.r[(jj + 1, k)] = xny * (t1 + a) - t2;
            }
            for k in 0..n {
                let t1 = self.j[(k, jj)];
                let t2 = self.j[(k, jj + 1)];
                let a = t1 * cc + t2 * ss;
                self.j[(k, jj)] = a;
                self.j[(k, jj + 1)] = xny * (a + t1) - t2;
            }
        }
    }
}

/// Solves the QP. Fails if the Hessian is not positive definite, the
/// constraints are infeasible, or the iteration cap is hit.
pub fn solve_qp<T: Real>(problem: &QpProblem<T>, settings: &QpSettings) -> Result<QpSolution<T>, QpError> {
    problem.check()?;
    let n = problem.dim();
    let p = problem.eq_rhs.len();
    let m = problem.ineq_rhs.len();
    let inf = T::max_value().unwrap();

    let chol = problem.hessian.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let l_inv = chol.l().try_inverse().ok_or(QpError::NotPositiveDefinite)?;
    let mut f = Factor { n, j: l_inv.transpose(), r: DMatrix::zeros(n, n + 1), r_norm: T::one(), iq: 0 };
    let c1 = problem.hessian.trace();
    let c2 = f.j.trace();

    let mut x = -chol.solve(&problem.gradient);
    let mut active: Vec<usize> = Vec::with_capacity(n);
    let mut u: Vec<T> = Vec::with_capacity(n + 1);
    let ncol = |a: &DMatrix<T>, i: usize| -> DVector<T> { a.column(i).into_owned() };

    // Equalities, written as nᵀx − b = 0 and enforced one by one.
    for i in 0..p {
        let np = ncol(&problem.eq_matrix, i);
        let mut d = f.j.tr_mul(&np);
        let z = f.z_step(&d);
        let r = f.r_step(&d);
        let zn = z.dot(&np);
        let t2 = if z.norm() > T::default_epsilon() { (problem.eq_rhs[i] - np.dot(&x)) / zn } else { T::zero() };
        x.axpy(t2, &z, T::one());
        for k in 0..f.iq {
            u[k] -= t2 * r[k];
        }
        u.push(t2);
        active.push(usize::MAX - i);
        if !f.add(&mut d) {
            return Err(QpError::Infeasible { constraint: i });
        }
    }

    let slack = |x: &DVector<T>, i: usize| problem.ineq_matrix.column(i).dot(x) - problem.ineq_rhs[i];
    let is_active = |active: &[usize], i: usize| active[p..].contains(&i);
    let tol = lit::<T>(100.0) * lit::<T>(m.max(1) as f64) * T::default_epsilon() * c1 * c2;
    let mut iterations = 0;
    let mut excluded = vec![false; m];

    'outer: loop {
        iterations += 1;
        if iterations > settings.max_iterations {
            return Err(QpError::MaxIterations(settings.max_iterations));
        }
        let mut psi = T::zero();
        let mut s = DVector::zeros(m);
        for i in 0..m {
            s[i] = slack(&x, i);
            psi += s[i].min(T::zero());
        }
        excluded.iter_mut().for_each(|e| *e = false);
        if psi.abs() <= tol {
            break;
        }
        let (u_old, active_old, x_old, iq_old) = (u.clone(), active.clone(), x.clone(), f.iq);
        let _ = iq_old;

        'choose: loop {
            let mut ss = T::zero();
            let mut ip = usize::MAX;
            for i in 0..m {
                if s[i] < ss && !excluded[i] && !is_active(&active, i) {
                    ss = s[i];
                    ip = i;
                }
            }
            if ip == usize::MAX {
                break 'outer;
            }
            let np = ncol(&problem.ineq_matrix, ip);
            u.push(T::zero());

            loop {
                iterations += 1;
                if iterations > settings.max_iterations {
                    return Err(QpError::MaxIterations(settings.max_iterations));
                }
                let mut d = f.j.tr_mul(&np);
                let z = f.z_step(&d);
                let r = f.r_step(&d);
                // partial step: first active inequality whose multiplier hits zero
                let mut t1 = inf;
                let mut drop = usize::MAX;
                for k in p..f.iq {
                    if r[k] > T::zero() {
                        let ratio = u[k] / r[k];
                        if ratio < t1 {
                            t1 = ratio;
                            drop = k;
                        }
                    }
                }
                let zn = z.dot(&np);
                let t2 = if z.norm() > T::default_epsilon() && zn > T::zero() { -s[ip] / zn } else { inf };
                let t2 = if t2 < T::zero() { inf } else { t2 };
                let t = t1.min(t2);
                if t >= inf {
                    return Err(QpError::Infeasible { constraint: ip });
                }
                if t2 >= inf {
                    for k in 0..f.iq {
                        u[k] -= t * r[k];
                    }
                    u[f.iq] += t;
                    f.delete(drop, &mut active, &mut u);
                    continue;
                }
                x.axpy(t, &z, T::one());
                for k in 0..f.iq {
                    u[k] -= t * r[k];
                }
                u[f.iq] += t;
                if t == t2 {
                    active.push(ip);
                    if !f.add(&mut d) {
                        // dependent with the active set: drop it and restore
                        excluded[ip] = true;
                        let pos = active.len() - 1;
                        f.delete(pos, &mut active, &mut u);
                        u.pop();
                        active = active_old.clone();
                        u = u_old.clone();
                        x = x_old.clone();
                        f = refactor(problem, &chol, &active, p)?;
                        continue 'choose;
                    }
                    continue 'outer;
                }
                f.delete(drop, &mut active, &mut u);
                s[ip] = slack(&x, ip);
            }
        }
    }

    let mut eq_mult = DVector::zeros(p);
    let mut in_mult = DVector::zeros(m);
    for (k, &a) in active.iter().enumerate() {
        if k < p {
            eq_mult[usize::MAX - a] = u[k];
        } else {
            in_mult[a] = u[k];
        }
    }
    let objective = problem.objective(&x);
    Ok(QpSolution { x, eq_multipliers: eq_mult, ineq_multipliers: in_mult, objective, iterations })
}

/// Rebuilds `J`, `R` for a given active list (used after a degenerate add).
fn refactor<T: Real>(
    problem: &QpProblem<T>,
    chol: &nalgebra::Cholesky<T, nalgebra::Dyn>,
    active: &[usize],
    p: usize,
) -> Result<Factor<T>, QpError> {
    let n = problem.dim();
    let l_inv = chol.l().try_inverse().ok_or(QpError::NotPositiveDefinite)?;
    let mut f = Factor { n, j: l_inv.transpose(), r: DMatrix::zeros(n, n + 1), r_norm: T::one(), iq: 0 };
    for (k, &a) in active.iter().enumerate() {
        let col = if k < p { problem.eq_matrix.column(usize::MAX - a).into_owned() } else { problem.ineq_matrix.column(a).into_owned() };
        let mut d = f.j.tr_mul(&col);
        if !f.add(&mut d) {
            return Err(QpError::Infeasible { constraint: a });
        }
    }
    Ok(f)
}

/// Reference solver: tries every candidate active set from `candidates`,
/// solves the equality-constrained problem on it, and keeps the best
/// primal-feasible point. Exponential; only for small test problems.
pub fn solve_by_enumeration<T: Real>(
    problem: &QpProblem<T>,
    candidates: impl Iterator<Item = Vec<usize>>,
    feas_tol: T,
) -> Option<(DVector<T>, T)> {
    let n = problem.dim();
    let p = problem.eq_rhs.len();
    let mut best: Option<(DVector<T>, T)> = None;
    for set in candidates {
        let k = p + set.len();
        if k > n {
            continue;
        }
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&problem.hessian);
        rhs.rows_mut(0, n).copy_from(&(-&problem.gradient));
        for c in 0..k {
            let (col, b) = if c < p {
                (problem.eq_matrix.column(c).into_owned(), problem.eq_rhs[c])
            } else {
                (problem.ineq_matrix.column(set[c - p]).into_owned(), problem.ineq_rhs[set[c - p]])
            };
            kkt.view_mut((0, n + c), (n, 1)).copy_from(&(-&col));
            kkt.view_mut((n + c, 0), (1, n)).copy_from(&col.transpose());
            rhs[n + c] = b;
        }
        let Some(sol) = kkt.clone().lu().solve(&rhs) else { continue };
        if !((&kkt * &sol - &rhs).amax() <= feas_tol) {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let eq_ok = (problem.eq_matrix.tr_mul(&x) - &problem.eq_rhs).amax() <= feas_tol;
        let in_ok = (problem.ineq_matrix.tr_mul(&x) - &problem.ineq_rhs).iter().all(|s| *s >= -feas_tol);
        if eq_ok && in_ok {
            let obj = problem.objective(&x);
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((x, obj));
            }
        }
    }
    best
}

/// All subsets of `0..m` with at most `max_size` elements.
pub fn subsets_up_to(m: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for i in 0..m {
        let mut more = Vec::new();
        for s in &out {
            if s.len() < max_size {
                let mut t = s.clone();
                t.push(i);
                more.push(t);
            }
        }
        out.extend(more);
    }
    out
}
