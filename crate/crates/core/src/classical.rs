//! Hamiltonian flow, phase-space action, the linearized (A, B) system and
//! the anisotropy matrices built from it.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianModel, Scalar};
use crate::linalg::{inverse, BranchLog, CMat, RMat, I};
use crate::types::PhasePoint;

pub const DEFAULT_DT: f64 = 1e-3;

/// Determinants below this are treated as caustics.
pub const CAUSTIC_TOL: f64 = 1e-12;

/// Samples of an orbit and its actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t_samples: Vec<f64>,
    pub points: Vec<PhasePoint>,
    /// A(t) = int (p . dq/dt - H) dt
    pub action: Vec<f64>,
    /// A_w(t) = int (JX . dX/dt / 2 - H) dt
    pub sym_action: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn final_point(&self) -> &PhasePoint {
        self.points
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .t_samples
            .last()
            .expect("trajectory has at least one sample")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub t: f64,
    pub a: CMat,
    pub b: CMat,
    /// continuous log det A
    pub log_det_a: C64,
    /// continuous log det(A - iB)
    pub log_det_a_minus_ib: C64,
    pub caustic: bool,
}

impl VariationalState {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// (det A)^(-1/2) on the tracked branch.
    pub fn amplitude(&self) -> C64 {
        BranchLog::from_log(self.log_det_a).inv_sqrt()
    }

    /// (det(A - iB) / 2^d)^(-1/2) on the tracked branch.
    pub fn kernel_prefactor(&self) -> C64 {
        let shift = self.dim() as f64 * std::f64::consts::LN_2;
        BranchLog::from_log(self.log_det_a_minus_ib - shift).inv_sqrt()
    }
}

/// Everything a propagator needs from one orbit, at its final time.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitEndpoint {
    pub t: f64,
    pub start: PhasePoint,
    pub point: PhasePoint,
    pub action: f64,
    pub sym_action: f64,
    /// real linearized flow dX_t/dX_0
    pub flow_matrix: RMat,
    pub variational: VariationalState,
}

/// Orbit continued to complex initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOrbit {
    pub point: Vec<C64>,
    pub action: C64,
    pub sym_action: C64,
    pub flow_matrix: CMat,
}

pub(crate) fn check_step(t_final: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !t_final.is_finite() {
        return Err(Error::Config(format!(
            "final time must be finite, got {t_final}"
        )));
    }
    Ok(())
}

/// Number of equal steps of size at most dt covering |t|.
pub(crate) fn step_count(t: f64, dt: f64) -> usize {
    if t == 0.0 {
        0
    } else {
        ((t.abs() / dt) - 1e-9).ceil().max(1.0) as usize
    }
}

fn all_finite<T: Scalar>(y: &[T]) -> bool {
    y.iter().all(|v| {
        let c = v.to_c64();
        c.re.is_finite() && c.im.is_finite()
    })
}

/// Classical RK4 with equal steps reaching `t_final` exactly (either sign).
/// `observe` sees the state at t=0 and after every step; returning false
/// stops early.
pub(crate) fn rk4<T: Scalar>(
    y0: Vec<T>,
    t_final: f64,
    dt: f64,
    rhs: impl Fn(&[T]) -> Vec<T>,
    mut observe: impl FnMut(f64, &[T]) -> Result<bool>,
) -> Result<Vec<T>> {
    let n = step_count(t_final, dt);
    let h = if n == 0 { 0.0 } else { t_final / n as f64 };
    let mut y = y0;
    if !observe(0.0, &y)? {
        return Ok(y);
    }
    let axpy = |y: &[T], k: &[T], s: f64| -> Vec<T> {
        y.iter()
            .zip(k)
            .map(|(a, b)| *a + *b * T::lift(s))
            .collect::<Vec<T>>()
    };
    for step in 0..n {
        let k1 = rhs(&y);
        let k2 = rhs(&axpy(&y, &k1, h / 2.0));
        let k3 = rhs(&axpy(&y, &k2, h / 2.0));
        let k4 = rhs(&axpy(&y, &k3, h));
        let next: Vec<T> = (0..y.len())
            .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * T::lift(2.0) + k4[i]) * T::lift(h / 6.0))
            .collect();
        let t = (step + 1) as f64 * h;
        if !all_finite(&next) {
            return Err(Error::Divergence { t: t - h });
        }
        y = next;
        if !observe(t, &y)? {
            break;
        }
    }
    Ok(y)
}

// State layout: X (2d), A, A_w, then optionally the flow matrix (row-major).
pub(crate) struct FlowSystem<'a> {
    pub model: &'a HamiltonianModel,
    pub d: usize,
    pub jacobian: bool,
}

impl<'a> FlowSystem<'a> {
    pub fn new(model: &'a HamiltonianModel, jacobian: bool) -> Self {
        FlowSystem {
            model,
            d: model.dim(),
            jacobian,
        }
    }

    pub fn initial<T: Scalar>(&self, x0: &[T]) -> Vec<T> {
        let n = 2 * self.d;
        let mut y = x0.to_vec();
        y.push(T::zero());
        y.push(T::zero());
        if self.jacobian {
            for r in 0..n {
                for c in 0..n {
                    y.push(if r == c { T::one() } else { T::zero() });
                }
            }
        }
        y
    }

    pub fn rhs<T: Scalar>(&self, y: &[T]) -> Vec<T> {
        let d = self.d;
        let n = 2 * d;
        let x = &y[..n];
        let g = T::gradient(self.model, x);
        let h = T::value(self.model, x);
        let mut out = Vec::with_capacity(y.len());
        // dq/dt = dH/dp, dp/dt = -dH/dq
        out.extend_from_slice(&g[d..]);
        out.extend(g[..d].iter().map(|v| -*v));
        let mut pq = T::zero();
        let mut qp = T::zero();
        for k in 0..d {
            pq += x[d + k] * g[d + k];
            qp += x[k] * g[k];
        }
        out.push(pq - h);
        // (p . qdot - q . pdot)/2 with pdot = -dH/dq
        out.push((pq + qp) * T::lift(0.5) - h);
        if self.jacobian {
            let hess = T::hessian(self.model, x);
            let m = &y[n + 2..];
            // dM/dt = J H M; rows of J H are (H_p rows, -H_q rows)
            for r in 0..n {
                let (src, sign) = if r < d { (r + d, 1.0) } else { (r - d, -1.0) };
                for c in 0..n {
                    let mut acc = T::zero();
                    for k in 0..n {
                        acc += hess[(src, k)] * m[k * n + c];
                    }
                    out.push(acc * T::lift(sign));
                }
            }
        }
        out
    }

    pub fn point<'b, T: Scalar>(&self, y: &'b [T]) -> &'b [T] {
        &y[..2 * self.d]
    }

    pub fn action<T: Scalar>(&self, y: &[T]) -> (T, T) {
        (y[2 * self.d], y[2 * self.d + 1])
    }

    pub fn flow_matrix<T: Scalar>(&self, y: &[T]) -> DMatrix<T> {
        let n = 2 * self.d;
        DMatrix::from_row_slice(n, n, &y[n + 2..n + 2 + n * n])
    }
}

/// (A; B) = M (I; iI) for a flow matrix M.
pub(crate) fn ab_from_flow<T: Scalar>(m: &DMatrix<T>) -> (CMat, CMat) {
    let n = m.nrows();
    let d = n / 2;
    let mc = m.map(|v| v.to_c64());
    let a = mc.view((0, 0), (d, d)) + mc.view((0, d), (d, d)) * I;
    let b = mc.view((d, 0), (d, d)) + mc.view((d, d), (d, d)) * I;
    (a.into_owned(), b.into_owned())
}

// Tracks det A and det(A - iB) along an orbit.
struct DetTracker {
    det_a: Option<BranchLog>,
    det_aib: Option<BranchLog>,
    caustic: bool,
}

impl DetTracker {
    fn new() -> Self {
        DetTracker {
            det_a: None,
            det_aib: None,
            caustic: false,
        }
    }

    fn observe(&mut self, t: f64, a: &CMat, b: &CMat) -> Result<()> {
        let da = a.determinant();
        let daib = (a - b * I).determinant();
        if daib.norm() < CAUSTIC_TOL {
            return Err(Error::Invariant(format!("det(A - iB) vanished at t={t}")));
        }
        match &mut self.det_aib {
            None => self.det_aib = Some(BranchLog::new(daib)),
            Some(b) => b.update(daib, t)?,
        }
        if da.norm() < CAUSTIC_TOL {
            // arg of a vanishing det carries no information; keep the branch
            self.caustic = true;
        } else {
            match &mut self.det_a {
                None => self.det_a = Some(BranchLog::new(da)),
                Some(b) => b.update(da, t)?,
            }
        }
        Ok(())
    }

    fn state(&self, t: f64, a: CMat, b: CMat) -> VariationalState {
        VariationalState {
            t,
            a,
            b,
            log_det_a: self
                .det_a
                .map(|l| l.log())
                .unwrap_or(C64::new(f64::NEG_INFINITY, 0.0)),
            log_det_a_minus_ib: self.det_aib.expect("observed at least once").log(),
            caustic: self.caustic,
        }
    }
}

fn check_point(model: &HamiltonianModel, x0: &PhasePoint) -> Result<()> {
    if x0.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "initial point has dimension {}, model has {}",
            x0.dim(),
            model.dim()
        )));
    }
    Ok(())
}

/// RK4 orbit with the action and symmetrized action, one sample per step.
pub fn integrate_flow(
    model: &HamiltonianModel,
    x0: &PhasePoint,
    t_final: f64,
    dt: f64,
) -> Result<TrajectoryRecord> {
    check_step(t_final, dt)?;
    if t_final < 0.0 {
        return Err(Error::Config(format!(
            "t_final must be non-negative, got {t_final}"
        )));
    }
    check_point(model, x0)?;
    let sys = FlowSystem::new(model, false);
    let mut rec = TrajectoryRecord {
        t_samples: vec![],
        points: vec![],
        action: vec![],
        sym_action: vec![],
    };
    rk4(
        sys.initial(&x0.stacked()),
        t_final,
        dt,
        |y| sys.rhs(y),
        |t, y| {
            rec.t_samples.push(t);
            rec.points.push(PhasePoint::from_stacked(sys.point(y)));
            let (a, aw) = sys.action(y);
            rec.action.push(a);
            rec.sym_action.push(aw);
            Ok(true)
        },
    )?;
    Ok(rec)
}

/// (A, B) along the orbit, one state per step, with A(0)=I, B(0)=iI.
pub fn integrate_variational(
    model: &HamiltonianModel,
    x0: &PhasePoint,
    t_final: f64,
    dt: f64,
) -> Result<Vec<VariationalState>> {
    check_step(t_final, dt)?;
    if t_final < 0.0 {
        return Err(Error::Config(format!(
            "t_final must be non-negative, got {t_final}"
        )));
    }
    check_point(model, x0)?;
    let sys = FlowSystem::new(model, true);
    let mut tracker = DetTracker::new();
    let mut out = Vec::new();
    rk4(
        sys.initial(&x0.stacked()),
        t_final,
        dt,
        |y| sys.rhs(y),
        |t, y| {
            let (a, b) = ab_from_flow(&sys.flow_matrix(y));
            tracker.observe(t, &a, &b)?;
            out.push(tracker.state(t, a, b));
            Ok(true)
        },
    )?;
    Ok(out)
}

/// Final-time orbit data without storing intermediate samples.
pub fn integrate_orbit(
    model: &HamiltonianModel,
    x0: &PhasePoint,
    t: f64,
    dt: f64,
) -> Result<OrbitEndpoint> {
    check_step(t, dt)?;
    check_point(model, x0)?;
    let sys = FlowSystem::new(model, true);
    let mut tracker = DetTracker::new();
    let y = rk4(
        sys.initial(&x0.stacked()),
        t,
        dt,
        |y| sys.rhs(y),
        |t, y| {
            let (a, b) = ab_from_flow(&sys.flow_matrix(y));
            tracker.observe(t, &a, &b)?;
            Ok(true)
        },
    )?;
    let m = sys.flow_matrix(&y);
    let (a, b) = ab_from_flow(&m);
    let (action, sym_action) = sys.action(&y);
    Ok(OrbitEndpoint {
        t,
        start: x0.clone(),
        point: PhasePoint::from_stacked(sys.point(&y)),
        action,
        sym_action,
        flow_matrix: m,
        variational: tracker.state(t, a, b),
    })
}

/// Orbit from complex initial data (analytic continuation of the flow).
pub fn integrate_orbit_complex(
    model: &HamiltonianModel,
    y0: &[C64],
    t: f64,
    dt: f64,
) -> Result<ComplexOrbit> {
    check_step(t, dt)?;
    if y0.len() != 2 * model.dim() {
        return Err(Error::Dimension(format!(
            "complex point has length {}",
            y0.len()
        )));
    }
    let sys = FlowSystem::new(model, true);
    let y = rk4(sys.initial(y0), t, dt, |y| sys.rhs(y), |_, _| Ok(true))?;
    let (action, sym_action) = sys.action(&y);
    Ok(ComplexOrbit {
        point: sys.point(&y).to_vec(),
        action,
        sym_action,
        flow_matrix: sys.flow_matrix(&y),
    })
}

/// Z = B A^{-1}.
pub fn anisotropy_z(state: &VariationalState) -> Result<CMat> {
    let det = state.a.determinant();
    if state.caustic && det.norm() < CAUSTIC_TOL || det.norm() < CAUSTIC_TOL {
        return Err(Error::Caustic {
            t: state.t,
            det: det.norm(),
        });
    }
    Ok(&state.b * inverse(&state.a, "A")?)
}

/// Double phase space anisotropy
/// Q = [[iI - iW, I/2 - W], [I/2 - W, iW]] with W = (I - iZ)^{-1}.
pub fn anisotropy_q(z: &CMat) -> Result<CMat> {
    let d = z.nrows();
    let id = CMat::identity(d, d);
    let w = (&id - z * I).try_inverse().ok_or_else(|| {
        Error::Invariant("I - iZ is singular; Z is not in the Siegel half-space".into())
    })?;
    let half = &id * C64::new(0.5, 0.0);
    let off = &half - &w;
    let mut q = CMat::zeros(2 * d, 2 * d);
    q.view_mut((0, 0), (d, d)).copy_from(&((&id - &w) * I));
    q.view_mut((0, d), (d, d)).copy_from(&off);
    q.view_mut((d, 0), (d, d)).copy_from(&off);
    q.view_mut((d, d), (d, d)).copy_from(&(&w * I));
    Ok(q)
}

/// Result of the Ehrenfest diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EhrenfestTime {
    At(f64),
    ExceedsHorizon,
}

impl EhrenfestTime {
    pub fn time(&self) -> Option<f64> {
        match self {
            EhrenfestTime::At(t) => Some(*t),
            EhrenfestTime::ExceedsHorizon => None,
        }
    }
}

pub fn spectral_norm(m: &RMat) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// First time the spectral norm of the linearized flow reaches hbar^{-1/2}.
pub fn ehrenfest_time(
    model: &HamiltonianModel,
    x0: &PhasePoint,
    hbar: f64,
    horizon: f64,
    dt: f64,
) -> Result<EhrenfestTime> {
    if !(hbar > 0.0) {
        return Err(Error::Config(format!("hbar must be positive, got {hbar}")));
    }
    check_step(horizon, dt)?;
    check_point(model, x0)?;
    let threshold = hbar.powf(-0.5);
    let sys = FlowSystem::new(model, true);
    let mut prev = (0.0, 1.0);
    let mut found = None;
    let mut tracker = DetTracker::new();
    rk4(
        sys.initial(&x0.stacked()),
        horizon,
        dt,
        |y| sys.rhs(y),
        |t, y| {
            let m = sys.flow_matrix(y);
            let (a, b) = ab_from_flow(&m);
            tracker.observe(t, &a, &b)?;
            let norm = spectral_norm(&m);
            if norm >= threshold {
                let (t0, n0) = prev;
                let tc = if norm > n0 {
                    t0 + (threshold - n0) / (norm - n0) * (t - t0)
                } else {
                    t
                };
                found = Some(tc);
                return Ok(false);
            }
            prev = (t, norm);
            Ok(true)
        },
    )?;
    Ok(found.map_or(EhrenfestTime::ExceedsHorizon, EhrenfestTime::At))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{check_scaled_symplectic, check_siegel};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pt(q: f64, p: f64) -> PhasePoint {
        PhasePoint::new1(q, p)
    }

    #[test]
    fn flow_endpoints() {
        let r = integrate_flow(&HamiltonianModel::free(), &pt(1.0, 1.0), 0.5, DEFAULT_DT).unwrap();
        assert_relative_eq!(r.final_point().q[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.final_point().p[0], 1.0, epsilon = 1e-12);
        let r = integrate_flow(
            &HamiltonianModel::linear_field(),
            &pt(0.0, 1.0),
            1.0,
            DEFAULT_DT,
        )
        .unwrap();
        assert_relative_eq!(r.final_point().q[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.final_point().p[0], 0.0, epsilon = 1e-12);
        let r = integrate_flow(
            &HamiltonianModel::harmonic(),
            &pt(1.0, 0.0),
            PI / 4.0,
            DEFAULT_DT,
        )
        .unwrap();
        assert_relative_eq!(r.final_point().q[0], 0.0, epsilon = 1e-10);
        assert_relative_eq!(r.final_point().p[0], -1.0, epsilon = 1e-10);
    }

    #[test]
    fn actions() {
        let r = integrate_flow(&HamiltonianModel::free(), &pt(0.0, 1.0), 1.0, DEFAULT_DT).unwrap();
        assert_relative_eq!(*r.action.last().unwrap(), 1.0, epsilon = 1e-12);
        let r = integrate_flow(
            &HamiltonianModel::linear_field(),
            &pt(0.0, 1.0),
            1.0,
            DEFAULT_DT,
        )
        .unwrap();
        assert_relative_eq!(*r.action.last().unwrap(), -1.0 / 3.0, epsilon = 1e-12);
        let r = integrate_flow(
            &HamiltonianModel::harmonic(),
            &pt(1.0, 0.0),
            PI / 8.0,
            DEFAULT_DT,
        )
        .unwrap();
        assert_relative_eq!(*r.action.last().unwrap(), -0.25, epsilon = 1e-10);
    }

    #[test]
    fn record_starts_at_initial_point() {
        let x0 = pt(0.3, -0.2);
        let r = integrate_flow(&HamiltonianModel::harmonic(), &x0, 0.25, DEFAULT_DT).unwrap();
        assert_eq!(r.points[0], x0);
        assert_eq!(r.action[0], 0.0);
        assert_eq!(r.sym_action[0], 0.0);
        assert_eq!(r.t_samples.len(), 251);
        assert_eq!(r.final_time(), 0.25);
    }

    #[test]
    fn rejects_bad_step() {
        let m = HamiltonianModel::free();
        assert!(integrate_flow(&m, &pt(0.0, 0.0), 1.0, 0.0).is_err());
        assert!(integrate_flow(&m, &pt(0.0, 0.0), -1.0, 1e-3).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        // V = -q^4 blows up in finite time
        let m = HamiltonianModel::polynomial(vec![0.0, 0.0, 0.0, 0.0, -1.0], 1).unwrap();
        let err = integrate_flow(&m, &pt(3.0, 3.0), 5.0, 1e-2).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn free_variational_closed_form() {
        let states =
            integrate_variational(&HamiltonianModel::free(), &pt(0.4, -0.3), 1.0, DEFAULT_DT)
                .unwrap();
        assert_eq!(states[0].a, CMat::identity(1, 1));
        assert_eq!(states[0].b, CMat::identity(1, 1) * I);
        for s in states.iter().step_by(100) {
            assert_relative_eq!(
                (s.a[(0, 0)] - c(1.0, 2.0 * s.t)).norm(),
                0.0,
                epsilon = 1e-12
            );
            assert_relative_eq!((s.b[(0, 0)] - I).norm(), 0.0, epsilon = 1e-12);
            assert_relative_eq!(
                (s.log_det_a_minus_ib.exp() - c(2.0, 2.0 * s.t)).norm(),
                0.0,
                epsilon = 1e-8
            );
            let pref = s.kernel_prefactor();
            assert_relative_eq!(
                (pref - (c(1.0, 0.0) / c(1.0, s.t)).sqrt()).norm(),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn harmonic_variational_closed_form() {
        let states = integrate_variational(
            &HamiltonianModel::harmonic(),
            &pt(1.0, 0.5),
            3.0,
            DEFAULT_DT,
        )
        .unwrap();
        for s in states.iter().step_by(250) {
            let e = C64::from_polar(1.0, 2.0 * s.t);
            assert_relative_eq!((s.a[(0, 0)] - e).norm(), 0.0, epsilon = 1e-10);
            assert_relative_eq!((s.b[(0, 0)] - I * e).norm(), 0.0, epsilon = 1e-10);
            // continuous branch: log det A = 2it beyond pi
            assert_relative_eq!(s.log_det_a.im, 2.0 * s.t, epsilon = 1e-9);
            assert_relative_eq!(
                (anisotropy_z(s).unwrap()[(0, 0)] - I).norm(),
                0.0,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn z_examples() {
        let m = HamiltonianModel::free();
        let s = integrate_orbit(&m, &pt(0.0, 0.0), 0.5, DEFAULT_DT)
            .unwrap()
            .variational;
        assert_relative_eq!(
            (anisotropy_z(&s).unwrap()[(0, 0)] - c(0.5, 0.5)).norm(),
            0.0,
            epsilon = 1e-12
        );
        let s = integrate_orbit(&m, &pt(0.0, 0.0), 1.0, DEFAULT_DT)
            .unwrap()
            .variational;
        assert_relative_eq!(
            (anisotropy_z(&s).unwrap()[(0, 0)] - c(0.4, 0.2)).norm(),
            0.0,
            epsilon = 1e-12
        );
        let s = integrate_orbit(
            &HamiltonianModel::linear_field(),
            &pt(1.0, 2.0),
            0.5,
            DEFAULT_DT,
        )
        .unwrap();
        assert_relative_eq!(
            (anisotropy_z(&s.variational).unwrap()[(0, 0)] - c(0.5, 0.5)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn caustic_is_an_error_for_z() {
        let s = VariationalState {
            t: 1.0,
            a: CMat::zeros(1, 1),
            b: CMat::identity(1, 1),
            log_det_a: c(0.0, 0.0),
            log_det_a_minus_ib: c(0.0, 0.0),
            caustic: true,
        };
        assert!(matches!(anisotropy_z(&s), Err(Error::Caustic { .. })));
    }

    #[test]
    fn q_examples() {
        let t = 1.0;
        let z = CMat::from_element(1, 1, I / c(1.0, 2.0 * t));
        let q = anisotropy_q(&z).unwrap();
        let pre = I / (2.0 * c(1.0, 1.0));
        let expect = CMat::from_row_slice(2, 2, &[pre, -pre, -pre, pre * c(1.0, 2.0)]);
        assert_relative_eq!(crate::linalg::max_abs(&(q - expect)), 0.0, epsilon = 1e-14);
        let q = anisotropy_q(&CMat::from_element(1, 1, I)).unwrap();
        assert_relative_eq!(
            crate::linalg::max_abs(&(&q - CMat::identity(2, 2) * c(0.0, 0.5))),
            0.0,
            epsilon = 1e-15
        );
        assert!(check_scaled_symplectic(&q).unwrap());
        assert!(anisotropy_q(&CMat::from_element(1, 1, -I)).is_err());
    }

    #[test]
    fn hamiltonian_conserved() {
        for m in [
            HamiltonianModel::free(),
            HamiltonianModel::linear_field(),
            HamiltonianModel::harmonic(),
        ] {
            let x0 = pt(0.7, -1.1);
            let r = integrate_flow(&m, &x0, 1.0, DEFAULT_DT).unwrap();
            let h0 = m.value(&x0.stacked());
            for p in &r.points {
                assert!((m.value(&p.stacked()) - h0).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn symmetrized_action_identity() {
        for m in [
            HamiltonianModel::free(),
            HamiltonianModel::linear_field(),
            HamiltonianModel::harmonic(),
            HamiltonianModel::polynomial(vec![0.0, 0.3, 0.5, 0.0, 0.1], 1).unwrap(),
        ] {
            let x0 = pt(0.9, 0.4);
            let r = integrate_flow(&m, &x0, 1.0, DEFAULT_DT).unwrap();
            for k in (0..r.points.len()).step_by(50) {
                let xt = &r.points[k];
                let expect = r.action[k] - (xt.p[0] * xt.q[0] - x0.p[0] * x0.q[0]) / 2.0;
                assert!((r.sym_action[k] - expect).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn riccati_residual() {
        let m = HamiltonianModel::polynomial(vec![0.0, 0.2, 0.5, 0.0, 0.1], 1).unwrap();
        let x0 = pt(0.5, 0.3);
        let states = integrate_variational(&m, &x0, 1.0, DEFAULT_DT).unwrap();
        let traj = integrate_flow(&m, &x0, 1.0, DEFAULT_DT).unwrap();
        let zs: Vec<C64> = states
            .iter()
            .map(|s| anisotropy_z(s).unwrap()[(0, 0)])
            .collect();
        let h = states[1].t - states[0].t;
        for k in (2..zs.len() - 2).step_by(37) {
            let dz = (zs[k - 2] - 8.0 * zs[k - 1] + 8.0 * zs[k + 1] - zs[k + 2]) / (12.0 * h);
            let hs = m.hessian(&traj.points[k].stacked());
            let z = zs[k];
            let res = dz + z * hs[(1, 1)] * z + 2.0 * hs[(1, 0)] * z + hs[(0, 0)];
            assert!(res.norm() <= 1e-6, "residual {res} at k={k}");
        }
    }

    #[test]
    fn free_det_a_minus_ib() {
        let s = integrate_orbit(&HamiltonianModel::free(), &pt(0.0, 2.0), 0.8, DEFAULT_DT).unwrap();
        assert_relative_eq!(
            (s.variational.log_det_a_minus_ib.exp() - c(2.0, 1.6)).norm(),
            0.0,
            epsilon = 1e-8
        );
    }

    #[test]
    fn backward_orbit_inverts_forward() {
        let m = HamiltonianModel::polynomial(vec![0.0, 0.1, 0.5, 0.2], 1).unwrap();
        let x0 = pt(0.3, 0.8);
        let fwd = integrate_orbit(&m, &x0, 0.7, DEFAULT_DT).unwrap();
        let back = integrate_orbit(&m, &fwd.point, -0.7, DEFAULT_DT).unwrap();
        assert!(back.point.distance(&x0) < 1e-10);
    }

    #[test]
    fn complex_orbit_matches_real_on_real_data() {
        let m = HamiltonianModel::polynomial(vec![0.0, 0.1, 0.5, 0.2], 1).unwrap();
        let x0 = pt(0.3, 0.8);
        let real = integrate_orbit(&m, &x0, 0.6, DEFAULT_DT).unwrap();
        let cplx = integrate_orbit_complex(&m, &x0.stacked_complex(), 0.6, DEFAULT_DT).unwrap();
        assert_relative_eq!(
            (cplx.point[0] - real.point.q[0]).norm(),
            0.0,
            epsilon = 1e-14
        );
        assert_relative_eq!((cplx.action - real.action).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ehrenfest_examples() {
        let harm = HamiltonianModel::harmonic();
        let r = ehrenfest_time(&harm, &pt(1.0, 0.0), 0.01, 100.0, DEFAULT_DT).unwrap();
        assert_eq!(r, EhrenfestTime::ExceedsHorizon);
        let free = HamiltonianModel::free();
        let te = ehrenfest_time(&free, &pt(0.0, 1.0), 0.01, 100.0, DEFAULT_DT)
            .unwrap()
            .time()
            .unwrap();
        // norm of [[1, 2t], [0, 1]] is s when 2t = s - 1/s
        let s = 10.0;
        assert_relative_eq!(te, (s - 1.0 / s) / 2.0, epsilon = 1e-5);
        let te4 = ehrenfest_time(&free, &pt(0.0, 1.0), 0.0025, 100.0, DEFAULT_DT)
            .unwrap()
            .time()
            .unwrap();
        assert!((1.8..=2.2).contains(&(te4 / te)));
    }

    proptest! {
        #[test]
        fn q_is_siegel_and_symplectic(re in -3.0f64..3.0, im in 0.05f64..4.0) {
            let z = CMat::from_element(1, 1, c(re, im));
            let q = anisotropy_q(&z).unwrap();
            prop_assert!(check_siegel(&q).unwrap().ok);
            prop_assert!(check_scaled_symplectic(&q).unwrap());
        }

        #[test]
        fn q_is_siegel_in_two_dims(a in -2.0f64..2.0, b in -1.0f64..1.0, c0 in -2.0f64..2.0, s in 0.1f64..2.0, u in 0.1f64..2.0, v in -0.5f64..0.5) {
            // Z = X + iY with Y = L L^T positive definite
            let y = RMat::from_row_slice(2, 2, &[s * s, s * v, s * v, v * v + u * u]);
            let x = RMat::from_row_slice(2, 2, &[a, b, b, c0]);
            let z = x.map(|e| c(e, 0.0)) + y.map(|e| c(0.0, e));
            let q = anisotropy_q(&z).unwrap();
            prop_assert!(check_siegel(&q).unwrap().ok);
            prop_assert!(check_scaled_symplectic(&q).unwrap());
        }
    }
}
