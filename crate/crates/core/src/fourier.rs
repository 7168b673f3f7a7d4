//! Fourier-integral representation of evolved WKB data: the complex phase
//! F(X, Y, t), its complex stationary point, quadrature of the integral and
//! the leading term on the transported manifold.

use rayon::prelude::*;

use num_complex::Complex64 as C64;

use crate::classical::{ab_from_flow, integrate_orbit, integrate_orbit_complex, OrbitEndpoint};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::linalg::{BranchLog, CMat, I};
use crate::propagator::{anisotropy_q_from_ab, compact, KernelKind, SourceCache};
use crate::quadrature::{check_tail, PhaseSpaceQuadrature};
use crate::types::{ComplexField, GridSpec, Method, PhasePoint};
use crate::wavepacket::{theta0_full, WkbInitialData};

/// Everything the phase F depends on besides the two points.
#[derive(Clone, Copy)]
pub struct FourierProblem<'a> {
    pub model: &'a HamiltonianModel,
    pub data: &'a dyn WkbInitialData,
    pub t: f64,
    pub hbar: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierPhaseEval {
    pub value: C64,
    /// dF/dY
    pub grad_y: Vec<C64>,
    /// d^2F/dY^2
    pub hess_y: CMat,
}

const GRAD_STEP: f64 = 1e-5;
const HESS_STEP: f64 = 1e-3;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX: usize = 50;
/// |Im Z| bound defining the tubular neighbourhood.
pub const TUBE_IMAG_BOUND: f64 = 0.5;

impl<'a> FourierProblem<'a> {
    pub fn new(
        model: &'a HamiltonianModel,
        data: &'a dyn WkbInitialData,
        t: f64,
        hbar: f64,
        dt: f64,
    ) -> Result<Self> {
        if model.dim() != data.dim() {
            return Err(Error::Dimension(format!(
                "model is {}-d, data is {}-d",
                model.dim(),
                data.dim()
            )));
        }
        if !(hbar > 0.0) {
            return Err(Error::Config(format!("hbar must be positive, got {hbar}")));
        }
        if !(t >= 0.0) {
            return Err(Error::Config(format!("t must be non-negative, got {t}")));
        }
        Ok(FourierProblem {
            model,
            data,
            t,
            hbar,
            dt,
        })
    }

    fn d(&self) -> usize {
        self.model.dim()
    }

    /// F minus theta_0: A + (xi.eta - xi_t.eta_t)/2 + X.J Y_t/2 + Delta.Q Delta/2,
    /// continued to complex Y along the complexified flow up to time s.
    fn flow_part(&self, x: &PhasePoint, y: &[C64], s: f64) -> Result<C64> {
        let d = self.d();
        let orbit = integrate_orbit_complex(self.model, y, s, self.dt)?;
        let yt = &orbit.point;
        let (a, b) = ab_from_flow(&orbit.flow_matrix);
        let q = anisotropy_q_from_ab(&a, &b)?;
        let mut v = orbit.action;
        for k in 0..d {
            v += 0.5 * (y[d + k] * y[k] - yt[d + k] * yt[k]);
            v += 0.5 * (x.q[k] * yt[d + k] - x.p[k] * yt[k]);
        }
        let delta: Vec<C64> = (0..2 * d)
            .map(|k| C64::new(x.stacked()[k], 0.0) - yt[k])
            .collect();
        let qd = &q * nalgebra::DVector::from_column_slice(&delta);
        v += 0.5 * (0..2 * d).map(|k| delta[k] * qd[k]).sum::<C64>();
        Ok(v)
    }

    fn flow_gradient(&self, x: &PhasePoint, y: &[C64], s: f64) -> Result<Vec<C64>> {
        let n = y.len();
        let mut g = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let diff = |h: f64| -> Result<C64> {
                let mut yp = y.to_vec();
                let mut ym = y.to_vec();
                yp[k] += h;
                ym[k] -= h;
                Ok((self.flow_part(x, &yp, s)? - self.flow_part(x, &ym, s)?) / (2.0 * h))
            };
            g[k] = (4.0 * diff(GRAD_STEP / 2.0)? - diff(GRAD_STEP)?) / 3.0;
        }
        Ok(g)
    }

    fn flow_hessian(&self, x: &PhasePoint, y: &[C64], s: f64) -> Result<CMat> {
        let n = y.len();
        let f0 = self.flow_part(x, y, s)?;
        let at = |shifts: &[(usize, f64)]| -> Result<C64> {
            let mut z = y.to_vec();
            for &(k, h) in shifts {
                z[k] += h;
            }
            self.flow_part(x, &z, s)
        };
        let second = |i: usize, j: usize, h: f64| -> Result<C64> {
            if i == j {
                Ok((at(&[(i, h)])? - 2.0 * f0 + at(&[(i, -h)])?) / (h * h))
            } else {
                Ok(
                    (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                        + at(&[(i, -h), (j, -h)])?)
                        / (4.0 * h * h),
                )
            }
        };
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = (4.0 * second(i, j, HESS_STEP / 2.0)? - second(i, j, HESS_STEP)?) / 3.0;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    fn phase_at(
        &self,
        x: &PhasePoint,
        y: &[C64],
        s: f64,
        derivatives: bool,
    ) -> Result<FourierPhaseEval> {
        let th = theta0_full(self.data, y, self.hbar)?;
        let value = th.value + self.flow_part(x, y, s)?;
        if !derivatives {
            return Ok(FourierPhaseEval {
                value,
                grad_y: vec![],
                hess_y: CMat::zeros(0, 0),
            });
        }
        let fg = self.flow_gradient(x, y, s)?;
        let grad_y = th.gradient.iter().zip(&fg).map(|(a, b)| a + b).collect();
        let hess_y = th.hessian + self.flow_hessian(x, y, s)?;
        Ok(FourierPhaseEval {
            value,
            grad_y,
            hess_y,
        })
    }
}

/// F(X, Y, t) with its Y-gradient and Y-Hessian at a real source with a cached orbit.
pub fn fourier_phase(
    problem: &FourierProblem,
    target: &PhasePoint,
    source: &PhasePoint,
    cache: &OrbitEndpoint,
) -> Result<FourierPhaseEval> {
    if (cache.t - problem.t).abs() > 1e-12 || cache.start != *source {
        return Err(Error::Stale(format!(
            "orbit cache is for {:?} at t={}, asked for {:?} at t={}",
            cache.start, cache.t, source, problem.t
        )));
    }
    problem.phase_at(target, &source.stacked_complex(), problem.t, true)
}

/// Complex solution Z of dF/dY (X, Z, t) = 0 by Newton from `guess`.
pub fn solve_stationary_point(
    problem: &FourierProblem,
    target: &PhasePoint,
    guess: &PhasePoint,
) -> Result<Vec<C64>> {
    let mut z = guess.stacked_complex();
    for _ in 0..NEWTON_MAX {
        let e = problem.phase_at(target, &z, problem.t, true)?;
        let g = nalgebra::DVector::from_vec(e.grad_y);
        let step =
            e.hess_y.lu().solve(&g).ok_or_else(|| {
                Error::DegeneratePhase(format!("singular phase Hessian at {z:?}"))
            })?;
        let scale = z.iter().map(|v| v.norm()).fold(1.0, f64::max);
        for k in 0..z.len() {
            z[k] -= step[k];
        }
        if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            break;
        }
        if step.iter().map(|s| s.norm()).fold(0.0, f64::max) <= NEWTON_TOL * scale {
            let im = z.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
            if im >= TUBE_IMAG_BOUND {
                return Err(Error::OutsideTube(format!(
                    "|Im Z| = {im:.3} at target {target:?}"
                )));
            }
            return Ok(z);
        }
    }
    Err(Error::OutsideTube(format!(
        "stationary point iteration did not converge for target {target:?}"
    )))
}

/// g_{-t} X, the natural starting guess for the stationary point.
pub fn backward_source(problem: &FourierProblem, target: &PhasePoint) -> Result<PhasePoint> {
    Ok(integrate_orbit(problem.model, target, -problem.t, problem.dt)?.point)
}

/// Leading stationary-phase term chi_0 (det(A-iB)/2^d)^(-1/2) e^{iF/hbar} / sqrt(det(-i F''))
/// at a target on the transported manifold. The square root of the product of
/// the two determinants is continued along the orbit from s=0.
pub fn leading_term_on_manifold(problem: &FourierProblem, target: &PhasePoint) -> Result<C64> {
    let d = problem.d();
    let y = backward_source(problem, target)?;
    let yc = y.stacked_complex();
    let slope = problem.data.s0_gradient(&yc[..d]);
    let off = (0..d)
        .map(|k| (y.p[k] - slope[k].re).abs())
        .fold(0.0, f64::max);
    let scale = y.stacked().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if off > 1e-8 * scale {
        return Err(Error::Domain(format!(
            "target {target:?} is off the manifold by {off:.3e}"
        )));
    }
    let n = ((problem.t / 0.05).ceil() as usize).max(8);
    let mut branch: Option<BranchLog> = None;
    let mut last = None;
    for k in 0..=n {
        let s = problem.t * k as f64 / n as f64;
        let orbit = integrate_orbit(problem.model, &y, s, problem.dt)?;
        let x_s = if k == n {
            target.clone()
        } else {
            orbit.point.clone()
        };
        let var = &orbit.variational;
        let det_aib = (&var.a - &var.b * I).determinant() / 2f64.powi(d as i32);
        let e = problem.phase_at(&x_s, &yc, s, true)?;
        let det_h = (e.hess_y * (-I)).determinant();
        if det_h.norm() < 1e-14 {
            return Err(Error::DegeneratePhase(format!(
                "det(-i F'') = {det_h} at s={s}"
            )));
        }
        let prod = det_aib * det_h;
        match &mut branch {
            None => branch = Some(BranchLog::new(prod)),
            Some(b) => b.update(prod, s)?,
        }
        last = Some(e.value);
    }
    let th = theta0_full(problem.data, &yc, problem.hbar)?;
    let f = last.expect("at least one step");
    Ok(th.chi0 * branch.expect("tracked").inv_sqrt() * (I * f / problem.hbar).exp())
}

/// Quadrature of (2 pi hbar)^(-d) int phi e^{iF/hbar} dY over real sources.
pub fn eval_fourier_integral(
    problem: &FourierProblem,
    targets: &GridSpec,
    quad: &PhaseSpaceQuadrature,
) -> Result<ComplexField> {
    targets.validate()?;
    let hbar = problem.hbar;
    let grid = quad.grid(hbar)?;
    let theta: Vec<(C64, C64)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = grid.point(k);
            let th = theta0_full(problem.data, &[C64::new(q, 0.0), C64::new(p, 0.0)], hbar)?;
            Ok((th.value, th.chi0))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<C64> = theta
        .iter()
        .map(|(th, chi)| chi * (I * th / hbar).exp())
        .collect();
    let abs2: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
    check_tail(quad, &grid, &abs2)?;
    let cache =
        SourceCache::from_samples(grid, values, problem.t, problem.model, hbar, problem.dt)?;
    let comp = cache
        .entries
        .iter()
        .map(|e| compact(e, KernelKind::Aga, hbar))
        .collect::<Result<Vec<_>>>()?;
    let out: Vec<C64> = (0..targets.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = targets.point(k);
            let mut acc = C64::new(0.0, 0.0);
            for (c, e) in comp.iter().zip(&cache.entries) {
                if let Some(phase) = c.phase(q, p, hbar) {
                    let (th, chi) = theta[e.index];
                    acc += c.amp * chi * (I * (th + phase) / hbar).exp();
                }
            }
            acc
        })
        .collect();
    ComplexField::new(*targets, out, hbar, problem.t, Method::Fourier)
}
