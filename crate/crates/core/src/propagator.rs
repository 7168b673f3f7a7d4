//! Phase-space propagator kernels and their superposition over initial data.

use std::f64::consts::PI;

use rayon::prelude::*;

use num_complex::Complex64 as C64;

use crate::classical::{integrate_orbit, OrbitEndpoint};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::linalg::{bilinear, check_siegel, inverse, CMat, I};
use crate::quadrature::{
    check_tail, edge_mass_fraction, PhaseSpaceQuadrature, PRUNE_TOL, TAIL_TOL,
};
use crate::stencil::{self, Axis};
use crate::types::{ComplexField, GridSpec, Method, PhasePoint};

/// b(X, Y) = (2 pi hbar)^(-d) exp{(i/2hbar)(q.xi - p.eta) - |X - Y|^2/(4 hbar)}.
pub fn bergmann_kernel(target: &PhasePoint, source: &PhasePoint, hbar: f64) -> C64 {
    let d = target.dim();
    let mut phase = 0.0;
    let mut dist = 0.0;
    for k in 0..d {
        phase += target.q[k] * source.p[k] - target.p[k] * source.q[k];
        dist += (target.q[k] - source.q[k]).powi(2) + (target.p[k] - source.p[k]).powi(2);
    }
    (2.0 * PI * hbar).powi(-(d as i32)) * C64::new(-dist / (4.0 * hbar), phase / (2.0 * hbar)).exp()
}

/// One evaluation of the propagator kernel, with its phase split into pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEvaluation {
    pub value: C64,
    /// (det(A - iB)/2^d)^(-1/2) on the tracked branch
    pub prefactor_branch: C64,
    /// A + (xi.eta - xi_t.eta_t)/2
    pub action_term: f64,
    /// (1/2) X . J Y_t
    pub midpoint_term: f64,
    /// (1/2) Delta . Q Delta
    pub quadratic_term: C64,
}

/// Double phase space anisotropy from (A, B): W = (I - iZ)^{-1} = A (A - iB)^{-1},
/// which stays finite when A is singular.
pub fn anisotropy_q_from_ab(a: &CMat, b: &CMat) -> Result<CMat> {
    let d = a.nrows();
    let w = a * inverse(&(a - b * I), "A - iB")?;
    let id = CMat::identity(d, d);
    let half = &id * C64::new(0.5, 0.0);
    let off = &half - &w;
    let mut q = CMat::zeros(2 * d, 2 * d);
    q.view_mut((0, 0), (d, d)).copy_from(&((&id - &w) * I));
    q.view_mut((0, d), (d, d)).copy_from(&off);
    q.view_mut((d, 0), (d, d)).copy_from(&off);
    q.view_mut((d, d), (d, d)).copy_from(&(&w * I));
    Ok(q)
}

fn check_cache(source: &PhasePoint, t: f64, cache: &OrbitEndpoint) -> Result<()> {
    if (cache.t - t).abs() > 1e-12 || cache.start != *source {
        return Err(Error::Stale(format!(
            "orbit cache is for {:?} at t={}, asked for {:?} at t={t}",
            cache.start, cache.t, source
        )));
    }
    Ok(())
}

fn action_term(source: &PhasePoint, cache: &OrbitEndpoint) -> f64 {
    let y = source;
    let yt = &cache.point;
    let mut s = cache.action;
    for k in 0..y.dim() {
        s += 0.5 * (y.p[k] * y.q[k] - yt.p[k] * yt.q[k]);
    }
    s
}

fn midpoint_term(target: &PhasePoint, yt: &PhasePoint) -> f64 {
    (0..target.dim())
        .map(|k| 0.5 * (target.q[k] * yt.p[k] - target.p[k] * yt.q[k]))
        .sum()
}

fn delta(target: &PhasePoint, yt: &PhasePoint) -> Vec<C64> {
    target
        .q
        .iter()
        .zip(&yt.q)
        .chain(target.p.iter().zip(&yt.p))
        .map(|(a, b)| C64::new(a - b, 0.0))
        .collect()
}

/// Anisotropic Gaussian kernel K^Z(X, Y, t) from a cached orbit of the source Y.
pub fn kernel_kz(
    target: &PhasePoint,
    source: &PhasePoint,
    t: f64,
    hbar: f64,
    cache: &OrbitEndpoint,
) -> Result<KernelEvaluation> {
    check_cache(source, t, cache)?;
    let d = source.dim();
    let var = &cache.variational;
    let q = anisotropy_q_from_ab(&var.a, &var.b)?;
    let pref = var.kernel_prefactor();
    let act = action_term(source, cache);
    let mid = midpoint_term(target, &cache.point);
    let dx = delta(target, &cache.point);
    let quad = 0.5 * bilinear(&q, &dx, &dx);
    let value = (2.0 * PI * hbar).powi(-(d as i32)) * pref * (I * (act + mid + quad) / hbar).exp();
    Ok(KernelEvaluation {
        value,
        prefactor_branch: pref,
        action_term: act,
        midpoint_term: mid,
        quadratic_term: quad,
    })
}

/// Frozen Gaussian kernel e^{(i/hbar)(A + (xi.eta - xi_t.eta_t)/2)} b(X, g_t Y).
pub fn kernel_frozen(
    target: &PhasePoint,
    source: &PhasePoint,
    t: f64,
    hbar: f64,
    cache: &OrbitEndpoint,
) -> Result<KernelEvaluation> {
    check_cache(source, t, cache)?;
    let act = action_term(source, cache);
    let b = bergmann_kernel(target, &cache.point, hbar);
    let mid = midpoint_term(target, &cache.point);
    let dx = delta(target, &cache.point);
    let quad = I * 0.25 * dx.iter().map(|v| v * v).sum::<C64>();
    Ok(KernelEvaluation {
        value: (I * act / hbar).exp() * b,
        prefactor_branch: C64::new(1.0, 0.0),
        action_term: act,
        midpoint_term: mid,
        quadratic_term: quad,
    })
}

/// Root-mean-square spread of |K(., Y, t)|^2 about Y_t; sqrt(2 hbar) at t=0 in d=1.
pub fn kernel_width(cache: &OrbitEndpoint, hbar: f64) -> Result<f64> {
    let q = anisotropy_q_from_ab(&cache.variational.a, &cache.variational.b)?;
    let im = q.map(|z| z.im);
    let inv = im
        .try_inverse()
        .ok_or_else(|| Error::Invariant("Im Q is singular".into()))?;
    Ok((0.5 * hbar * inv.trace()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Aga,
    Frozen,
}

/// A quadrature node of the initial data with its orbit.
#[derive(Debug, Clone)]
pub struct SourceEntry {
    /// index of the node in the source grid
    pub index: usize,
    pub source: PhasePoint,
    pub weight: f64,
    pub value: C64,
    pub orbit: OrbitEndpoint,
}

/// Orbits of all non-negligible source nodes, integrated once per (t, grid).
#[derive(Debug, Clone)]
pub struct SourceCache {
    pub t: f64,
    pub hbar: f64,
    pub grid: GridSpec,
    pub entries: Vec<SourceEntry>,
    pub pruned: usize,
    pub edge_fraction: f64,
}

impl SourceCache {
    /// Samples a callable initial field on the quadrature grid.
    pub fn build(
        initial: &(dyn Fn(f64, f64) -> C64 + Sync),
        quad: &PhaseSpaceQuadrature,
        t: f64,
        model: &HamiltonianModel,
        hbar: f64,
        dt: f64,
    ) -> Result<Self> {
        let grid = quad.grid(hbar)?;
        let values: Vec<C64> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (q, p) = grid.point(k);
                initial(q, p)
            })
            .collect();
        let abs2: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
        check_tail(quad, &grid, &abs2)?;
        Self::from_samples(grid, values, t, model, hbar, dt)
    }

    /// Uses the samples of a field directly as trapezoid nodes.
    pub fn from_field(
        field: &ComplexField,
        t: f64,
        model: &HamiltonianModel,
        dt: f64,
    ) -> Result<Self> {
        let abs2: Vec<f64> = field.values.iter().map(|v| v.norm_sqr()).collect();
        let tail = edge_mass_fraction(&field.grid, &abs2);
        if tail > TAIL_TOL {
            let g = &field.grid;
            let quad = PhaseSpaceQuadrature::new(g.qmin, g.qmax, g.pmin, g.pmax, None);
            return Err(Error::TailMass {
                tail,
                suggested: quad.expanded(1.5),
            });
        }
        Self::from_samples(field.grid, field.values.clone(), t, model, field.hbar, dt)
    }

    pub(crate) fn from_samples(
        grid: GridSpec,
        values: Vec<C64>,
        t: f64,
        model: &HamiltonianModel,
        hbar: f64,
        dt: f64,
    ) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::Unsupported(
                "grid propagation is one-dimensional".into(),
            ));
        }
        if !(hbar > 0.0) {
            return Err(Error::Config(format!("hbar must be positive, got {hbar}")));
        }
        let abs2: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
        let edge_fraction = edge_mass_fraction(&grid, &abs2);
        let weighted: Vec<f64> = (0..grid.len())
            .map(|k| values[k].norm() * grid.trapezoid_weight(k))
            .collect();
        let top = weighted.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..grid.len())
            .filter(|&k| weighted[k] > PRUNE_TOL * top)
            .collect();
        let entries = keep
            .par_iter()
            .map(|&k| {
                let (q, p) = grid.point(k);
                let source = PhasePoint::new1(q, p);
                let orbit = integrate_orbit(model, &source, t, dt)?;
                Ok(SourceEntry {
                    index: k,
                    source,
                    weight: grid.trapezoid_weight(k),
                    value: values[k],
                    orbit,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SourceCache {
            t,
            hbar,
            grid,
            pruned: grid.len() - entries.len(),
            entries,
            edge_fraction,
        })
    }
}

// Scalar form of one source's kernel for d=1:
// amp exp{(i/hbar)[c0 + (q pt - p qt)/2 + (q11 dq^2 + 2 q12 dq dp + q22 dp^2)/2]}
pub(crate) struct Compact {
    pub qt: f64,
    pub pt: f64,
    pub c0: f64,
    pub q11: C64,
    pub q12: C64,
    pub q22: C64,
    /// prefactor * weight / (2 pi hbar), without the initial value
    pub amp: C64,
    pub lam: f64,
}

impl Compact {
    /// Phase of the kernel at (q, p), or None when the kernel is negligible there.
    pub fn phase(&self, q: f64, p: f64, hbar: f64) -> Option<C64> {
        let (dq, dp) = (q - self.qt, p - self.pt);
        if self.lam * (dq * dq + dp * dp) > 2.0 * hbar * SKIP_EXPONENT {
            return None;
        }
        let quad = 0.5 * (self.q11 * dq * dq + 2.0 * self.q12 * dq * dp + self.q22 * dp * dp);
        Some(quad + (self.c0 + 0.5 * (q * self.pt - p * self.qt)))
    }
}

pub(crate) fn compact(entry: &SourceEntry, kind: KernelKind, hbar: f64) -> Result<Compact> {
    let o = &entry.orbit;
    let (q, pref) = match kind {
        KernelKind::Aga => (
            anisotropy_q_from_ab(&o.variational.a, &o.variational.b)?,
            o.variational.kernel_prefactor(),
        ),
        KernelKind::Frozen => (CMat::identity(2, 2) * (0.5 * I), C64::new(1.0, 0.0)),
    };
    let lam = check_siegel(&q)?.min_imag_eigenvalue;
    if !(lam > 0.0) {
        return Err(Error::Invariant(format!(
            "Im Q not positive definite at source {:?}",
            entry.source
        )));
    }
    Ok(Compact {
        qt: o.point.q[0],
        pt: o.point.p[0],
        c0: action_term(&entry.source, o),
        q11: q[(0, 0)],
        q12: q[(0, 1)],
        q22: q[(1, 1)],
        amp: pref * entry.weight / (2.0 * PI * hbar),
        lam,
    })
}

/// Kernel contributions below e^-40 of the prefactor are skipped.
const SKIP_EXPONENT: f64 = 40.0;

/// Psi(X, t) = sum_Y w_Y K(X, Y, t) Psi_0(Y) over a built cache.
pub fn superpose(
    cache: &SourceCache,
    targets: &GridSpec,
    kind: KernelKind,
) -> Result<ComplexField> {
    targets.validate()?;
    let hbar = cache.hbar;
    let comp = cache
        .entries
        .iter()
        .map(|e| compact(e, kind, hbar))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<C64> = (0..targets.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = targets.point(k);
            let mut acc = C64::new(0.0, 0.0);
            for (c, e) in comp.iter().zip(&cache.entries) {
                if let Some(phase) = c.phase(q, p, hbar) {
                    acc += c.amp * e.value * (I * phase / hbar).exp();
                }
            }
            acc
        })
        .collect();
    let method = match kind {
        KernelKind::Aga => Method::Aga,
        KernelKind::Frozen => Method::Frozen,
    };
    ComplexField::new(*targets, values, hbar, cache.t, method)
}

/// Anisotropic Gaussian propagation of initial data Psi_0(eta, xi).
pub fn propagate_aga(
    initial: &(dyn Fn(f64, f64) -> C64 + Sync),
    targets: &GridSpec,
    t: f64,
    model: &HamiltonianModel,
    hbar: f64,
    quad: &PhaseSpaceQuadrature,
    dt: f64,
) -> Result<ComplexField> {
    let cache = SourceCache::build(initial, quad, t, model, hbar, dt)?;
    superpose(&cache, targets, KernelKind::Aga)
}

/// Frozen (rigid isotropic) Gaussian propagation.
pub fn propagate_frozen(
    initial: &(dyn Fn(f64, f64) -> C64 + Sync),
    targets: &GridSpec,
    t: f64,
    model: &HamiltonianModel,
    hbar: f64,
    quad: &PhaseSpaceQuadrature,
    dt: f64,
) -> Result<ComplexField> {
    let cache = SourceCache::build(initial, quad, t, model, hbar, dt)?;
    superpose(&cache, targets, KernelKind::Frozen)
}

/// H Psi for H = |p|^2 + V(q) with deg V <= 2, using the Bopp shifts
/// p -> p/2 - i hbar d/dq and q -> q/2 + i hbar d/dp. Two points are trimmed
/// from every edge.
pub fn apply_phase_space_hamiltonian(
    field: &ComplexField,
    model: &HamiltonianModel,
) -> Result<ComplexField> {
    let coeffs = match (model.polynomial_degree(), model.potential_coefficients()) {
        (Some(deg), Some(c)) if deg <= 2 => c,
        _ => {
            return Err(Error::Unsupported(
                "the phase-space Hamiltonian is a differential operator only for potentials of degree <= 2".into(),
            ))
        }
    };
    if model.dim() != 1 {
        return Err(Error::Unsupported(
            "grid operators are one-dimensional".into(),
        ));
    }
    let g = &field.grid;
    let hbar = field.hbar;
    let limit = 2.0 * PI * hbar / 8.0;
    if g.dq() > limit || g.dp() > limit {
        return Err(Error::Resolution(format!(
            "spacing ({:.3e}, {:.3e}) exceeds 2 pi hbar / 8 = {limit:.3e}",
            g.dq(),
            g.dp()
        )));
    }
    let c = |k: usize| coeffs.get(k).copied().unwrap_or(0.0);
    let pts = stencil::interior(field)?;
    let values: Vec<C64> = pts
        .par_iter()
        .map(|&(i, j)| {
            let (q, p) = (g.q(i), g.p(j));
            let v = field.get(i, j);
            let (fq, fp) = (
                stencil::first(field, Axis::Q, i, j),
                stencil::first(field, Axis::P, i, j),
            );
            let (fqq, fpp) = (
                stencil::second(field, Axis::Q, i, j),
                stencil::second(field, Axis::P, i, j),
            );
            let kinetic = 0.25 * p * p * v - I * hbar * p * fq - hbar * hbar * fqq;
            let qhat = 0.5 * q * v + I * hbar * fp;
            let qhat2 = 0.25 * q * q * v + I * hbar * q * fp - hbar * hbar * fpp;
            kinetic + c(0) * v + c(1) * qhat + c(2) * qhat2
        })
        .collect();
    ComplexField::new(g.trimmed(2)?, values, hbar, field.time, field.method)
}
