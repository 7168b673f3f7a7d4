//! Gaussian wave packets, the wave packet transform and its inverse, the
//! Fock-Bargmann constraint, and stationary-phase WKB initial data.

use std::f64::consts::PI;

use rayon::prelude::*;

use num_complex::Complex64 as C64;

use crate::classical::{anisotropy_z, TrajectoryRecord, VariationalState};
use crate::error::{Error, Result};
use crate::linalg::{bilinear, CMat, I};
use crate::quadrature::{composite_gauss_legendre, PhaseSpaceQuadrature, PANEL_ORDER};
use crate::stencil::{self, Axis};
use crate::types::{ComplexField, GridSpec, Method, PhasePoint};

/// (pi hbar)^(-d/4)
pub(crate) fn packet_norm(hbar: f64, d: usize) -> f64 {
    (PI * hbar).powf(-(d as f64) / 4.0)
}

/// Isotropic packet G_X(x) = (pi hbar)^(-d/4) exp{(i/hbar)(p.q/2 + p.(x-q) + (i/2)|x-q|^2)}.
pub fn eval_isotropic_packet(x0: &PhasePoint, x: &[f64], hbar: f64) -> C64 {
    let mut phase = 0.0;
    let mut gauss = 0.0;
    for k in 0..x0.dim() {
        let dx = x[k] - x0.q[k];
        phase += x0.p[k] * x0.q[k] / 2.0 + x0.p[k] * dx;
        gauss += dx * dx;
    }
    packet_norm(hbar, x0.dim()) * C64::new(-gauss / (2.0 * hbar), phase / hbar).exp()
}

/// Packet transported along the orbit of `x0` with anisotropy Z = B A^{-1}.
pub fn eval_anisotropic_packet(
    x0: &PhasePoint,
    traj: &TrajectoryRecord,
    var: &VariationalState,
    x: &[f64],
    hbar: f64,
) -> Result<C64> {
    let t = traj.final_time();
    if (t - var.t).abs() > 1e-12 || traj.points[0] != *x0 {
        return Err(Error::Stale(format!(
            "trajectory (t={t}) and variational state (t={}) do not describe the same orbit",
            var.t
        )));
    }
    let z = anisotropy_z(var)?;
    let xt = traj.final_point();
    let d = x0.dim();
    let dx: Vec<C64> = (0..d).map(|k| C64::new(x[k] - xt.q[k], 0.0)).collect();
    let mut phase = C64::new(*traj.action.last().unwrap(), 0.0);
    for k in 0..d {
        phase += x0.p[k] * x0.q[k] / 2.0 + xt.p[k] * dx[k].re;
    }
    phase += 0.5 * bilinear(&z, &dx, &dx);
    Ok(packet_norm(hbar, d) * var.amplitude() * (I * phase / hbar).exp())
}

/// Integration box and local momentum bound for a configuration-space state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformQuadrature {
    pub xmin: f64,
    pub xmax: f64,
    /// bound on |dS/dx| of the state inside the box
    pub max_momentum: f64,
}

impl TransformQuadrature {
    pub fn for_wkb(data: &dyn WkbInitialData) -> Self {
        let r = data.support_radius();
        let edge = [C64::new(r, 0.0)];
        let slope = data.s0_gradient(&edge)[0]
            .norm()
            .max(data.s0_gradient(&[-edge[0]])[0].norm());
        TransformQuadrature {
            xmin: -r,
            xmax: r,
            max_momentum: slope,
        }
    }
}

/// Window half-width around q, in units of sqrt(hbar).
pub const WINDOW_SQRT_HBAR: f64 = 7.0;

fn mass(psi: &(dyn Fn(f64) -> C64 + Sync), a: f64, b: f64) -> f64 {
    composite_gauss_legendre(a, b, 256)
        .iter()
        .map(|(x, w)| w * psi(*x).norm_sqr())
        .sum()
}

/// Psi(q,p) = (2 pi hbar)^(-1/2) int conj(G_(q,p)(x)) psi(x) dx (one dimension).
pub fn wave_packet_transform(
    psi: &(dyn Fn(f64) -> C64 + Sync),
    grid: &GridSpec,
    hbar: f64,
    quad: &TransformQuadrature,
) -> Result<ComplexField> {
    grid.validate()?;
    if !(quad.xmax > quad.xmin) {
        return Err(Error::Config("transform box must have xmax > xmin".into()));
    }
    let (c, r) = ((quad.xmin + quad.xmax) / 2.0, (quad.xmax - quad.xmin) / 2.0);
    let inner = mass(psi, quad.xmin, quad.xmax);
    let outer = mass(psi, c - 1.5 * r, c + 1.5 * r);
    let tail = if outer > 0.0 {
        (outer - inner) / outer
    } else {
        0.0
    };
    if tail > 1e-8 {
        return Err(Error::TailMass {
            tail,
            suggested: vec![c - 1.5 * r, c + 1.5 * r],
        });
    }
    let sh = hbar.sqrt();
    let w = WINDOW_SQRT_HBAR * sh;
    let pref = (2.0 * PI * hbar).powf(-0.5) * packet_norm(hbar, 1);
    let values: Vec<C64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = grid.point(k);
            let (a, b) = ((q - w).max(quad.xmin), (q + w).min(quad.xmax));
            if b <= a {
                return C64::new(0.0, 0.0);
            }
            let wavelength = 2.0 * PI * hbar / (p.abs() + quad.max_momentum + sh);
            let panel = (2.0 * sh).min(1.5 * wavelength);
            let panels = ((b - a) / panel).ceil().max(1.0) as usize;
            let mut acc = C64::new(0.0, 0.0);
            for (x, wt) in composite_gauss_legendre(a, b, panels) {
                let dx = x - q;
                let g = C64::new(-dx * dx / (2.0 * hbar), -(p * q / 2.0 + p * dx) / hbar).exp();
                acc += wt * g * psi(x);
            }
            pref * acc
        })
        .collect();
    ComplexField::new(*grid, values, hbar, 0.0, Method::Transform)
}

/// Nodes per unit length actually used by [`wave_packet_transform`] at momentum p.
pub fn transform_nodes_per_wavelength(hbar: f64, p: f64, quad: &TransformQuadrature) -> f64 {
    let sh = hbar.sqrt();
    let wavelength = 2.0 * PI * hbar / (p.abs() + quad.max_momentum + sh);
    let panel = (2.0 * sh).min(1.5 * wavelength);
    PANEL_ORDER as f64 * wavelength / panel
}

/// psi(x) = (2 pi hbar)^(-1/2) int G_(q,p)(x) Psi(q,p) dq dp (one dimension).
pub fn inverse_wave_packet_transform(
    big_psi: &(dyn Fn(f64, f64) -> C64 + Sync),
    x: f64,
    hbar: f64,
    quad: &PhaseSpaceQuadrature,
) -> Result<C64> {
    let grid = quad.grid(hbar)?;
    let acc: C64 = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = grid.point(k);
            grid.trapezoid_weight(k)
                * eval_isotropic_packet(&PhasePoint::new1(q, p), &[x], hbar)
                * big_psi(q, p)
        })
        .sum();
    Ok((2.0 * PI * hbar).powf(-0.5) * acc)
}

/// Relative L2 norm of ((q/2 - i hbar d/dp) - i(p/2 + i hbar d/dq)) Psi over the
/// interior (two points dropped at every edge).
pub fn fock_bargmann_residual(field: &ComplexField) -> Result<f64> {
    let g = &field.grid;
    let hbar = field.hbar;
    let reach = [g.qmin, g.qmax, g.pmin, g.pmax]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let limit = PI * hbar / reach;
    if g.dq() > limit || g.dp() > limit {
        return Err(Error::Resolution(format!(
            "spacing ({:.3e}, {:.3e}) exceeds {:.3e} (4 points per oscillation)",
            g.dq(),
            g.dp(),
            limit
        )));
    }
    let pts = stencil::interior(field)?;
    let (num, den) = pts
        .par_iter()
        .map(|&(i, j)| {
            let (q, p) = (g.q(i), g.p(j));
            let v = field.get(i, j);
            let r = 0.5 * C64::new(q, -p) * v - I * hbar * stencil::first(field, Axis::P, i, j)
                + hbar * stencil::first(field, Axis::Q, i, j);
            (r.norm_sqr(), v.norm_sqr())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    if den == 0.0 {
        return Err(Error::Domain("field vanishes on the interior".into()));
    }
    Ok((num / den).sqrt())
}

/// Analytic WKB data psi_0 = R_0 exp(i S_0 / hbar) with entire continuations.
pub trait WkbInitialData: Send + Sync {
    fn dim(&self) -> usize;
    fn s0(&self, x: &[C64]) -> C64;
    fn s0_gradient(&self, x: &[C64]) -> Vec<C64>;
    fn s0_hessian(&self, x: &[C64]) -> CMat;
    fn r0(&self, x: &[C64]) -> C64;
    /// radius outside which R_0 is negligible
    fn support_radius(&self) -> f64;

    fn psi0(&self, x: &[f64], hbar: f64) -> C64 {
        let z: Vec<C64> = x.iter().map(|v| C64::new(*v, 0.0)).collect();
        self.r0(&z) * (I * self.s0(&z).re / hbar).exp()
    }
}

/// S_0 = k|x|^2/2 and R_0 = (pi w^2)^(-d/4) exp(-|x|^2/(2w^2)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianWkb {
    pub dim: usize,
    pub curvature: f64,
    pub width: f64,
}

impl GaussianWkb {
    /// S_0 = x^2/2, R_0 = pi^(-1/4) exp(-x^2/2).
    pub fn scenario() -> Self {
        GaussianWkb {
            dim: 1,
            curvature: 1.0,
            width: 1.0,
        }
    }
}

impl WkbInitialData for GaussianWkb {
    fn dim(&self) -> usize {
        self.dim
    }

    fn s0(&self, x: &[C64]) -> C64 {
        0.5 * self.curvature * x.iter().map(|v| v * v).sum::<C64>()
    }

    fn s0_gradient(&self, x: &[C64]) -> Vec<C64> {
        x.iter().map(|v| self.curvature * v).collect()
    }

    fn s0_hessian(&self, x: &[C64]) -> CMat {
        CMat::identity(x.len(), x.len()) * C64::new(self.curvature, 0.0)
    }

    fn r0(&self, x: &[C64]) -> C64 {
        let w2 = self.width * self.width;
        let r2: C64 = x.iter().map(|v| v * v).sum();
        (PI * w2).powf(-(self.dim as f64) / 4.0) * (-r2 / (2.0 * w2)).exp()
    }

    fn support_radius(&self) -> f64 {
        self.width * (2.0 * 1e8f64.ln()).sqrt()
    }
}

/// Checks the normalization of R_0 and that S_0'' is non-degenerate on the support.
pub fn validate_wkb(data: &dyn WkbInitialData) -> Result<()> {
    if data.dim() != 1 {
        return Err(Error::Unsupported(
            "WKB validation by quadrature is one-dimensional".into(),
        ));
    }
    let r = data.support_radius();
    let nodes = composite_gauss_legendre(-r, r, 128);
    let norm: f64 = nodes
        .iter()
        .map(|(x, w)| w * data.r0(&[C64::new(*x, 0.0)]).norm_sqr())
        .sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Invariant(format!(
            "int R_0^2 dx = {norm}, expected 1"
        )));
    }
    for (x, _) in nodes {
        if data.s0_hessian(&[C64::new(x, 0.0)]).determinant().norm() < 1e-12 {
            return Err(Error::DegeneratePhase(format!(
                "det S_0'' vanishes at x={x}"
            )));
        }
    }
    Ok(())
}

/// Stationary-phase data at one phase-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct WkbEvaluation {
    /// chi_0 exp(i theta_0 / hbar)
    pub value: C64,
    /// complex stationary point of the transform integrand
    pub z: Vec<C64>,
    pub theta0: C64,
    pub chi0: C64,
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX: usize = 50;

fn newton_z(data: &dyn WkbInitialData, q: &[C64], p: &[C64], guess: Vec<C64>) -> Option<Vec<C64>> {
    let d = q.len();
    let mut z = guess;
    for _ in 0..NEWTON_MAX {
        let g = data.s0_gradient(&z);
        let f: Vec<C64> = (0..d).map(|k| g[k] - p[k] + I * (z[k] - q[k])).collect();
        let jac = data.s0_hessian(&z) + CMat::identity(d, d) * I;
        let step = jac.lu().solve(&nalgebra::DVector::from_vec(f))?;
        let scale = z.iter().map(|v| v.norm()).fold(1.0, f64::max);
        for k in 0..d {
            z[k] -= step[k];
        }
        if step.iter().all(|s| s.norm() <= NEWTON_TOL * scale) {
            return Some(z);
        }
        if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return None;
        }
    }
    None
}

/// Complex solution z of dS_0/dz - p + i(z - q) = 0; (q, p) may be complex.
pub(crate) fn stationary_z(data: &dyn WkbInitialData, x: &[C64]) -> Result<Vec<C64>> {
    let d = data.dim();
    if x.len() != 2 * d {
        return Err(Error::Dimension(format!(
            "phase point of length {} for {d}-d data",
            x.len()
        )));
    }
    let (q, p) = x.split_at(d);
    if let Some(z) = newton_z(data, q, p, q.to_vec()) {
        return Ok(z);
    }
    // first-order guess z = q - i (I - i S0''(q))^{-1} (p - S0'(q))
    let g = data.s0_gradient(q);
    let m = CMat::identity(d, d) - data.s0_hessian(q) * I;
    let rhs = nalgebra::DVector::from_iterator(d, (0..d).map(|k| p[k] - g[k]));
    let corr = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegeneratePhase("I - i S0''(q) singular".into()))?;
    let guess: Vec<C64> = (0..d).map(|k| q[k] - I * corr[k]).collect();
    newton_z(data, q, p, guess)
        .ok_or_else(|| Error::Stationary(format!("Newton did not converge at {x:?}")))
}

/// theta_0, its X-gradient and X-Hessian, and chi_0 at a (possibly complex) X.
#[derive(Debug, Clone)]
pub(crate) struct Theta0 {
    pub z: Vec<C64>,
    pub value: C64,
    pub gradient: Vec<C64>,
    pub hessian: CMat,
    pub chi0: C64,
}

pub(crate) fn theta0_full(data: &dyn WkbInitialData, x: &[C64], hbar: f64) -> Result<Theta0> {
    let d = data.dim();
    let z = stationary_z(data, x)?;
    let (q, p) = x.split_at(d);
    let mut value = data.s0(&z);
    let mut gradient = vec![C64::new(0.0, 0.0); 2 * d];
    for k in 0..d {
        let dz = z[k] - q[k];
        value += -p[k] * dz + 0.5 * I * dz * dz - 0.5 * p[k] * q[k];
        gradient[k] = 0.5 * p[k] - I * dz;
        gradient[d + k] = -dz - 0.5 * q[k];
    }
    let s2 = data.s0_hessian(&z);
    let id = CMat::identity(d, d);
    let det = (&id - &s2 * I).determinant();
    if det.norm() < 1e-12 {
        return Err(Error::DegeneratePhase(format!(
            "det(I - i S0'') = {det} at z={z:?}"
        )));
    }
    // dz/dq = iK, dz/dp = K with K = (S0'' + iI)^{-1}
    let k = (&s2 + &id * I)
        .try_inverse()
        .ok_or_else(|| Error::DegeneratePhase("S0'' + iI singular".into()))?;
    let half = &id * C64::new(0.5, 0.0);
    let mut hessian = CMat::zeros(2 * d, 2 * d);
    hessian.view_mut((0, 0), (d, d)).copy_from(&(&k + &id * I));
    let mixed = &half - &k * I;
    hessian.view_mut((0, d), (d, d)).copy_from(&mixed);
    hessian
        .view_mut((d, 0), (d, d))
        .copy_from(&mixed.transpose());
    hessian.view_mut((d, d), (d, d)).copy_from(&(-&k));
    let chi0 = packet_norm(hbar, d) * data.r0(&z) / det.sqrt();
    Ok(Theta0 {
        z,
        value,
        gradient,
        hessian,
        chi0,
    })
}

/// Stationary-phase evaluation of the transform of WKB data at X.
pub fn prepare_wkb_initial(
    data: &dyn WkbInitialData,
    x: &PhasePoint,
    hbar: f64,
) -> Result<WkbEvaluation> {
    let th = theta0_full(data, &x.stacked_complex(), hbar)?;
    Ok(WkbEvaluation {
        value: th.chi0 * (I * th.value / hbar).exp(),
        z: th.z,
        theta0: th.value,
        chi0: th.chi0,
    })
}

/// Hessian of theta_0 in X = (q, p) at a real point.
pub fn theta0_hessian(data: &dyn WkbInitialData, x: &PhasePoint) -> Result<CMat> {
    Ok(theta0_full(data, &x.stacked_complex(), 1.0)?.hessian)
}
