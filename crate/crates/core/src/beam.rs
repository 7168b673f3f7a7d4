//! Narrow beam asymptotics: the transported Lagrangian manifold, the (C, D)
//! variational system, the beam anisotropy D C^{-1}, nearest-point projection
//! onto the manifold, and the complex phase and amplitude built from them.
//!
//! One-dimensional configuration space only; the integrator works on fixed
//! 2x2 / 4x4 blocks.

use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4};
use rayon::prelude::*;

use num_complex::Complex64 as C64;

use crate::classical::{check_step, step_count};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::linalg::{BranchLog, CMat, I};
use crate::types::{ComplexField, GridSpec, Method, PhasePoint};
use crate::wavepacket::{theta0_full, WkbInitialData};

/// Chart alpha -> (alpha, dS_0/dx(alpha)) of the initial manifold.
#[derive(Clone)]
pub struct LagrangianChart {
    pub data: Arc<dyn WkbInitialData>,
    pub alpha_box: (f64, f64),
}

impl std::fmt::Debug for LagrangianChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianChart")
            .field("alpha_box", &self.alpha_box)
            .finish()
    }
}

impl LagrangianChart {
    pub fn new(data: Arc<dyn WkbInitialData>, alpha_box: (f64, f64)) -> Result<Self> {
        if data.dim() != 1 {
            return Err(Error::Unsupported(
                "narrow beams are implemented for d = 1".into(),
            ));
        }
        if !(alpha_box.1 > alpha_box.0) {
            return Err(Error::Config(format!("alpha box {alpha_box:?} is empty")));
        }
        Ok(LagrangianChart { data, alpha_box })
    }

    /// Box covering the effective support of R_0.
    pub fn over_support(data: Arc<dyn WkbInitialData>) -> Result<Self> {
        let r = data.support_radius();
        Self::new(data, (-r, r))
    }

    pub fn parametrize(&self, alpha: f64) -> PhasePoint {
        PhasePoint::new1(alpha, self.data.s0_gradient(&[C64::new(alpha, 0.0)])[0].re)
    }

    /// dX_0/dalpha = (1, S_0''(alpha)).
    pub fn tangent(&self, alpha: f64) -> [f64; 2] {
        [
            1.0,
            self.data.s0_hessian(&[C64::new(alpha, 0.0)])[(0, 0)].re,
        ]
    }
}

// Beam state: X (2), A_w, M (2x2 row-major), fundamental matrix of the
// (C, D) system (4x4 row-major).
const NS: usize = 23;
const NR: usize = 7;

fn beam_rhs(model: &HamiltonianModel, y: &[f64; NS], full: bool) -> [f64; NS] {
    let x = [y[0], y[1]];
    let g = model.gradient(&x);
    let h = model.hessian(&x);
    let hm = Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
    let j = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let mut out = [0.0; NS];
    out[0] = g[1];
    out[1] = -g[0];
    out[2] = 0.5 * (x[1] * g[1] + x[0] * g[0]) - model.value(&x);
    let m = Matrix2::new(y[3], y[4], y[5], y[6]);
    let dm = j * hm * m;
    out[3..7].copy_from_slice(&[dm[(0, 0)], dm[(0, 1)], dm[(1, 0)], dm[(1, 1)]]);
    if full {
        let jh = j * hm;
        let mut k = Matrix4::zeros();
        k.fixed_view_mut::<2, 2>(0, 0).copy_from(&(0.5 * jh));
        k.fixed_view_mut::<2, 2>(0, 2).copy_from(&(-(jh * j)));
        k.fixed_view_mut::<2, 2>(2, 0).copy_from(&(-0.25 * hm));
        k.fixed_view_mut::<2, 2>(2, 2).copy_from(&(0.5 * hm * j));
        let phi = Matrix4::from_row_slice(&y[7..]);
        let dphi = k * phi;
        for r in 0..4 {
            for c in 0..4 {
                out[7 + 4 * r + c] = dphi[(r, c)];
            }
        }
    }
    out
}

fn integrate_beam(
    model: &HamiltonianModel,
    x0: &PhasePoint,
    t: f64,
    dt: f64,
    full: bool,
    mut observe: impl FnMut(f64, &[f64; NS]) -> Result<()>,
) -> Result<[f64; NS]> {
    check_step(t, dt)?;
    let mut y = [0.0; NS];
    y[0] = x0.q[0];
    y[1] = x0.p[0];
    y[3] = 1.0;
    y[6] = 1.0;
    for k in 0..4 {
        y[7 + 5 * k] = 1.0;
    }
    let len = if full { NS } else { NR };
    let n = step_count(t, dt);
    let h = if n == 0 { 0.0 } else { t / n as f64 };
    observe(0.0, &y)?;
    let axpy = |y: &[f64; NS], k: &[f64; NS], s: f64| {
        let mut o = *y;
        for i in 0..len {
            o[i] += s * k[i];
        }
        o
    };
    for step in 0..n {
        let k1 = beam_rhs(model, &y, full);
        let k2 = beam_rhs(model, &axpy(&y, &k1, h / 2.0), full);
        let k3 = beam_rhs(model, &axpy(&y, &k2, h / 2.0), full);
        let k4 = beam_rhs(model, &axpy(&y, &k3, h), full);
        for i in 0..len {
            y[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        let tn = (step + 1) as f64 * h;
        if y[..len].iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t: tn - h });
        }
        observe(tn, &y)?;
    }
    Ok(y)
}

fn cd_from(y: &[f64; NS], d0: &Matrix2<C64>) -> (Matrix2<C64>, Matrix2<C64>) {
    let phi = Matrix4::from_row_slice(&y[7..]).map(|v| C64::new(v, 0.0));
    let b = |r: usize, c: usize| phi.fixed_view::<2, 2>(r, c).into_owned();
    (b(0, 0) + b(0, 2) * d0, b(2, 0) + b(2, 2) * d0)
}

fn to_cmat(m: &Matrix2<C64>) -> CMat {
    CMat::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]])
}

fn half_j() -> Matrix2<C64> {
    Matrix2::new(0.0, 0.5, -0.5, 0.0).map(|v| C64::new(v, 0.0))
}

/// One transported beam.
#[derive(Debug, Clone)]
pub struct BeamRecord {
    pub alpha: f64,
    pub x0: PhasePoint,
    pub xt: PhasePoint,
    /// P_t = (1/2) J X_t, enforced rather than integrated
    pub pt: [f64; 2],
    pub a_w: f64,
    pub theta0: C64,
    pub c: CMat,
    pub d: CMat,
    /// D C^{-1}
    pub q: CMat,
    /// continuous log det C
    pub log_det_c: C64,
    /// dX_t/dalpha
    pub tangent: [f64; 2],
    /// max |(D - JC/2)(t) - (D - JC/2)(0)| along the beam
    pub drift: f64,
    /// numerical rank of Im D C^{-1}
    pub im_rank: usize,
}

fn rank2(m: &CMat) -> usize {
    let im = m.map(|z| z.im);
    let sv = im.svd(false, false).singular_values;
    let top = sv.max().max(1e-300);
    sv.iter().filter(|s| **s > 1e-10 * top.max(1.0)).count()
}

/// Beams over a sample of chart parameters, integrated to one time.
#[derive(Debug, Clone)]
pub struct BeamCache {
    pub chart: LagrangianChart,
    pub model: HamiltonianModel,
    pub t: f64,
    pub dt: f64,
    pub tube_radius: f64,
    pub records: Vec<BeamRecord>,
    /// rank of Im d^2 theta_0/dX^2 on the initial manifold
    pub initial_im_rank: usize,
    /// smallest rank of Im D C^{-1} over the sampled beams
    pub min_im_rank: usize,
}

pub const DEFAULT_SAMPLES: usize = 512;
pub const DEFAULT_TUBE_RADIUS: f64 = 0.5;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX: usize = 50;

/// Integrates one beam (flow, A_w, C, D) from X_0(alpha).
pub fn integrate_beam_record(
    chart: &LagrangianChart,
    model: &HamiltonianModel,
    alpha: f64,
    t: f64,
    dt: f64,
) -> Result<BeamRecord> {
    if model.dim() != 1 {
        return Err(Error::Unsupported(
            "narrow beams are implemented for d = 1".into(),
        ));
    }
    let x0 = chart.parametrize(alpha);
    let th = theta0_full(chart.data.as_ref(), &x0.stacked_complex(), 1.0)?;
    let d0 = Matrix2::new(
        th.hessian[(0, 0)],
        th.hessian[(0, 1)],
        th.hessian[(1, 0)],
        th.hessian[(1, 1)],
    );
    let inv0 = d0 - half_j();
    let mut branch: Option<BranchLog> = None;
    let mut drift = 0.0f64;
    let y = integrate_beam(model, &x0, t, dt, true, |s, y| {
        let (c, d) = cd_from(y, &d0);
        let det = c.determinant();
        if det.norm() < 1e-12 {
            return Err(Error::Chart(format!(
                "det C vanished at t={s} for alpha={alpha}"
            )));
        }
        match &mut branch {
            None => branch = Some(BranchLog::new(det)),
            Some(b) => b.update(det, s)?,
        }
        let inv = d - half_j() * c;
        drift = drift.max((inv - inv0).iter().map(|v| v.norm()).fold(0.0, f64::max));
        Ok(())
    })?;
    let (c, d) = cd_from(&y, &d0);
    let cinv = c
        .try_inverse()
        .ok_or_else(|| Error::Chart(format!("C singular for alpha={alpha}")))?;
    let q = to_cmat(&(d * cinv));
    let m = Matrix2::new(y[3], y[4], y[5], y[6]);
    let t0 = chart.tangent(alpha);
    let tan = m * nalgebra::Vector2::new(t0[0], t0[1]);
    Ok(BeamRecord {
        alpha,
        xt: PhasePoint::new1(y[0], y[1]),
        pt: [0.5 * y[1], -0.5 * y[0]],
        x0,
        a_w: y[2],
        theta0: th.value,
        im_rank: rank2(&q),
        c: to_cmat(&c),
        d: to_cmat(&d),
        q,
        log_det_c: branch.expect("observed at t=0").log(),
        tangent: [tan[0], tan[1]],
        drift,
    })
}

// X_t(alpha) and dX_t/dalpha without the (C, D) system.
fn transport(
    chart: &LagrangianChart,
    model: &HamiltonianModel,
    alpha: f64,
    t: f64,
    dt: f64,
) -> Result<([f64; 2], [f64; 2])> {
    let y = integrate_beam(
        model,
        &chart.parametrize(alpha),
        t,
        dt,
        false,
        |_, _| Ok(()),
    )?;
    let t0 = chart.tangent(alpha);
    Ok((
        [y[0], y[1]],
        [y[3] * t0[0] + y[4] * t0[1], y[5] * t0[0] + y[6] * t0[1]],
    ))
}

/// Full double phase space system dX/dt = dH~/dP, dP/dt = -dH~/dX with
/// H~(X, P) = H(X/2 - JP), for checking that the plane P = JX/2 is invariant.
pub fn integrate_double_phase(
    model: &HamiltonianModel,
    x0: [f64; 2],
    p0: [f64; 2],
    t: f64,
    dt: f64,
) -> Result<([f64; 2], [f64; 2])> {
    check_step(t, dt)?;
    let rhs = |y: &[f64; 4]| {
        // X/2 - JP with J(P1, P2) = (P2, -P1)
        let arg = [0.5 * y[0] - y[3], 0.5 * y[1] + y[2]];
        let g = model.gradient(&arg);
        [g[1], -g[0], -0.5 * g[0], -0.5 * g[1]]
    };
    let n = step_count(t, dt);
    let h = if n == 0 { 0.0 } else { t / n as f64 };
    let mut y = [x0[0], x0[1], p0[0], p0[1]];
    let add = |y: &[f64; 4], k: &[f64; 4], s: f64| {
        [
            y[0] + s * k[0],
            y[1] + s * k[1],
            y[2] + s * k[2],
            y[3] + s * k[3],
        ]
    };
    for _ in 0..n {
        let k1 = rhs(&y);
        let k2 = rhs(&add(&y, &k1, h / 2.0));
        let k3 = rhs(&add(&y, &k2, h / 2.0));
        let k4 = rhs(&add(&y, &k3, h));
        for i in 0..4 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }
    Ok(([y[0], y[1]], [y[2], y[3]]))
}

/// Integrates `samples` beams spread evenly over the chart box.
pub fn build_beam_cache(
    chart: &LagrangianChart,
    samples: usize,
    t: f64,
    dt: f64,
    model: &HamiltonianModel,
) -> Result<BeamCache> {
    if samples < 3 {
        return Err(Error::Config("need at least 3 beam samples".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Config(format!("t must be non-negative, got {t}")));
    }
    let (lo, hi) = chart.alpha_box;
    let alphas: Vec<f64> = (0..samples)
        .map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64)
        .collect();
    let records = alphas
        .par_iter()
        .map(|&a| integrate_beam_record(chart, model, a, t, dt))
        .collect::<Result<Vec<_>>>()?;
    let th = theta0_full(
        chart.data.as_ref(),
        &chart.parametrize(0.5 * (lo + hi)).stacked_complex(),
        1.0,
    )?;
    let min_im_rank = records.iter().map(|r| r.im_rank).min().unwrap_or(0);
    Ok(BeamCache {
        min_im_rank,
        chart: chart.clone(),
        model: model.clone(),
        t,
        dt,
        tube_radius: DEFAULT_TUBE_RADIUS,
        records,
        initial_im_rank: rank2(&th.hessian),
    })
}

/// Projection of a point onto the transported manifold.
#[derive(Debug, Clone)]
pub struct NearestPoint {
    pub alpha: f64,
    pub epsilon: f64,
    pub record: BeamRecord,
}

impl BeamCache {
    fn check_time(&self, t: f64) -> Result<()> {
        if (t - self.t).abs() > 1e-12 {
            return Err(Error::Stale(format!(
                "beam cache is at t={}, asked for t={t}",
                self.t
            )));
        }
        Ok(())
    }

    pub fn record_at(&self, alpha: f64) -> Result<BeamRecord> {
        integrate_beam_record(&self.chart, &self.model, alpha, self.t, self.dt)
    }

    // d^2 X_t / dalpha^2 near sample k, from neighbouring tangents
    fn curvature(&self, k: usize) -> [f64; 2] {
        let n = self.records.len();
        let (a, b) = if k == 0 {
            (0, 1)
        } else if k + 1 == n {
            (n - 2, n - 1)
        } else {
            (k - 1, k + 1)
        };
        let h = self.records[b].alpha - self.records[a].alpha;
        let (ta, tb) = (self.records[a].tangent, self.records[b].tangent);
        [(tb[0] - ta[0]) / h, (tb[1] - ta[1]) / h]
    }

    /// Seed index from the samples, refusing ambiguous projections.
    fn seed(&self, x: &PhasePoint) -> Result<usize> {
        let dist: Vec<f64> = self.records.iter().map(|r| r.xt.distance(x)).collect();
        let best = (0..dist.len())
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
            .expect("non-empty");
        let n = dist.len();
        for k in 0..n {
            let left = k == 0 || dist[k] <= dist[k - 1];
            let right = k + 1 == n || dist[k] <= dist[k + 1];
            if left && right && k.abs_diff(best) > 2 && (dist[k] - dist[best]).abs() <= 1e-6 {
                return Err(Error::OutsideTube(format!(
                    "two closest points (alpha={} and {}) for {x:?}",
                    self.records[best].alpha, self.records[k].alpha
                )));
            }
        }
        Ok(best)
    }
}

/// alpha* solving (X - X_t(alpha)) . dX_t/dalpha = 0, and epsilon = |X - X_t(alpha*)|.
pub fn nearest_point(cache: &BeamCache, x: &PhasePoint, t: f64) -> Result<NearestPoint> {
    cache.check_time(t)?;
    let k = cache.seed(x)?;
    let kappa = cache.curvature(k);
    let mut alpha = cache.records[k].alpha;
    let target = [x.q[0], x.p[0]];
    let mut converged = false;
    for _ in 0..NEWTON_MAX {
        let (xt, tan) = transport(&cache.chart, &cache.model, alpha, cache.t, cache.dt)?;
        let r = [xt[0] - target[0], xt[1] - target[1]];
        let g = tan[0] * r[0] + tan[1] * r[1];
        let dg = tan[0] * tan[0] + tan[1] * tan[1] + kappa[0] * r[0] + kappa[1] * r[1];
        if !(dg > 0.0) {
            return Err(Error::OutsideTube(format!(
                "projection is not a minimum for {x:?}"
            )));
        }
        let step = g / dg;
        alpha -= step;
        if step.abs() <= NEWTON_TOL * alpha.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::OutsideTube(format!(
            "projection did not converge for {x:?}"
        )));
    }
    let record = cache.record_at(alpha)?;
    let epsilon = record.xt.distance(x);
    if epsilon > cache.tube_radius {
        return Err(Error::OutsideTube(format!(
            "{x:?} is {epsilon:.3} from the manifold"
        )));
    }
    Ok(NearestPoint {
        alpha,
        epsilon,
        record,
    })
}

/// D C^{-1} for the beam through X_0(alpha).
pub fn beam_q(cache: &BeamCache, alpha: f64, t: f64) -> Result<CMat> {
    cache.check_time(t)?;
    Ok(cache.record_at(alpha)?.q)
}

fn phase_from(record: &BeamRecord, x: &PhasePoint) -> C64 {
    let (dq, dp) = (x.q[0] - record.xt.q[0], x.p[0] - record.xt.p[0]);
    let q = &record.q;
    let quad = 0.5 * (q[(0, 0)] * dq * dq + 2.0 * q[(0, 1)] * dq * dp + q[(1, 1)] * dp * dp);
    record.theta0 + 0.5 * (record.xt.p[0] * dq - record.xt.q[0] * dp) + record.a_w + quad
}

fn amplitude_from(cache: &BeamCache, record: &BeamRecord, hbar: f64) -> Result<C64> {
    let th = theta0_full(
        cache.chart.data.as_ref(),
        &record.x0.stacked_complex(),
        hbar,
    )?;
    Ok(th.chi0 * BranchLog::from_log(record.log_det_c).inv_sqrt())
}

/// Phi = theta_0(X_0) + JX_t.(X - X_t)/2 + A_w + (X - X_t).Q(X - X_t)/2 at the nearest beam.
pub fn beam_phase(cache: &BeamCache, x: &PhasePoint, t: f64) -> Result<C64> {
    let np = nearest_point(cache, x, t)?;
    Ok(phase_from(&np.record, x))
}

/// chi = chi_0(X_0(alpha*)) / sqrt(det C).
pub fn beam_amplitude(cache: &BeamCache, x: &PhasePoint, t: f64, hbar: f64) -> Result<C64> {
    let np = nearest_point(cache, x, t)?;
    amplitude_from(cache, &np.record, hbar)
}

/// chi e^{i Phi / hbar} at one point.
pub fn beam_value(cache: &BeamCache, x: &PhasePoint, t: f64, hbar: f64) -> Result<C64> {
    let np = nearest_point(cache, x, t)?;
    Ok(amplitude_from(cache, &np.record, hbar)? * (I * phase_from(&np.record, x) / hbar).exp())
}

/// A beam field with its tube mask.
#[derive(Debug, Clone)]
pub struct BeamField {
    pub field: ComplexField,
    /// true where the target lies in the tube
    pub mask: Vec<bool>,
    /// fraction of targets in the tube
    pub coverage: f64,
}

/// Psi_B = chi e^{i Phi / hbar} on a grid; targets outside the tube are set to 0.
pub fn beam_field(cache: &BeamCache, targets: &GridSpec, t: f64, hbar: f64) -> Result<BeamField> {
    targets.validate()?;
    cache.check_time(t)?;
    let vals = (0..targets.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = targets.point(k);
            match beam_value(cache, &PhasePoint::new1(q, p), t, hbar) {
                Ok(v) => Ok(Some(v)),
                Err(Error::OutsideTube(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mask: Vec<bool> = vals.iter().map(|v| v.is_some()).collect();
    let coverage = mask.iter().filter(|m| **m).count() as f64 / mask.len() as f64;
    let values = vals
        .into_iter()
        .map(|v| v.unwrap_or(C64::new(0.0, 0.0)))
        .collect();
    Ok(BeamField {
        field: ComplexField::new(*targets, values, hbar, t, Method::Beam)?,
        mask,
        coverage,
    })
}

/// Phase and amplitude restricted to the manifold over a configuration point.
#[derive(Debug, Clone)]
pub struct ManifoldRestriction {
    pub alpha: f64,
    pub point: PhasePoint,
    /// S = Phi on the manifold (real)
    pub s: f64,
    /// R = chi on the manifold
    pub r: C64,
}

/// (S, R) at the point of the transported manifold above q.
pub fn on_manifold_restriction(
    cache: &BeamCache,
    q: f64,
    t: f64,
    hbar: f64,
) -> Result<ManifoldRestriction> {
    cache.check_time(t)?;
    let f: Vec<f64> = cache.records.iter().map(|r| r.xt.q[0] - q).collect();
    let crossings: Vec<usize> = (0..f.len() - 1)
        .filter(|&k| f[k] == 0.0 || f[k] * f[k + 1] < 0.0)
        .collect();
    match crossings.len() {
        0 => {
            return Err(Error::Chart(format!(
                "q={q} is outside the projection of the sampled manifold"
            )))
        }
        1 => {}
        n => {
            return Err(Error::Chart(format!(
                "projection above q={q} has {n} sheets"
            )))
        }
    }
    let k = crossings[0];
    let mut alpha = cache.records[k].alpha - f[k] / cache.records[k].tangent[0];
    let mut converged = false;
    for _ in 0..NEWTON_MAX {
        let (xt, tan) = transport(&cache.chart, &cache.model, alpha, cache.t, cache.dt)?;
        if tan[0].abs() < 1e-14 {
            return Err(Error::Chart(format!(
                "caustic of the q-projection at alpha={alpha}"
            )));
        }
        let step = (xt[0] - q) / tan[0];
        alpha -= step;
        if step.abs() <= NEWTON_TOL * alpha.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Chart(format!("no manifold point found above q={q}")));
    }
    let record = cache.record_at(alpha)?;
    let s = phase_from(&record, &record.xt);
    if s.im.abs() > 1e-10 {
        return Err(Error::Invariant(format!("Im S = {} on the manifold", s.im)));
    }
    Ok(ManifoldRestriction {
        alpha,
        point: record.xt.clone(),
        s: s.re,
        r: amplitude_from(cache, &record, hbar)?,
    })
}

/// max |arg(Psi_B / Psi)| over manifold points X_t(alpha), against a reference field.
pub fn manifold_phase_discrepancy(
    cache: &BeamCache,
    reference: &(dyn Fn(f64, f64) -> C64 + Sync),
    alphas: &[f64],
    hbar: f64,
) -> Result<f64> {
    let errs = alphas
        .par_iter()
        .map(|&a| {
            let rec = cache.record_at(a)?;
            let v =
                amplitude_from(cache, &rec, hbar)? * (I * phase_from(&rec, &rec.xt) / hbar).exp();
            Ok((v / reference(rec.xt.q[0], rec.xt.p[0])).arg().abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::DEFAULT_DT;
    use crate::exact::{ScenarioKind, ScenarioOracle};
    use crate::linalg::max_abs;
    use crate::wavepacket::GaussianWkb;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn chart() -> LagrangianChart {
        LagrangianChart::new(Arc::new(GaussianWkb::scenario()), (-4.0, 4.0)).unwrap()
    }

    fn cache(kind: ScenarioKind, t: f64, samples: usize) -> BeamCache {
        build_beam_cache(&chart(), samples, t, DEFAULT_DT, &kind.model()).unwrap()
    }

    fn n_matrix() -> Matrix2<C64> {
        Matrix2::new(c(0.5, 0.5), c(0.0, -0.5), c(0.0, -0.5), c(-0.5, 0.5))
    }

    #[test]
    fn free_cd_is_linear_in_t() {
        let t = 0.7;
        let rec =
            integrate_beam_record(&chart(), &HamiltonianModel::free(), 0.3, t, DEFAULT_DT).unwrap();
        let h = Matrix2::new(0.0, 0.0, 0.0, 2.0).map(|v| c(v, 0.0));
        let j = Matrix2::new(0.0, 1.0, -1.0, 0.0).map(|v| c(v, 0.0));
        let n = n_matrix();
        let half = c(0.5, 0.0);
        let cm = Matrix2::identity() + (j * h * half - j * h * j * n) * c(t, 0.0);
        let dm = n + (-h * c(0.25, 0.0) + h * j * n * half) * c(t, 0.0);
        assert!(max_abs(&(rec.c.clone() - to_cmat(&cm))) < 1e-8);
        assert!(max_abs(&(rec.d.clone() - to_cmat(&dm))) < 1e-8);
    }

    #[test]
    fn beam_q_closed_forms() {
        for kind in ScenarioKind::ALL {
            let o = ScenarioOracle::new(kind);
            for t in [0.0, 0.3, 0.7, 1.0] {
                let rec =
                    integrate_beam_record(&chart(), &kind.model(), -0.4, t, DEFAULT_DT).unwrap();
                assert!(
                    max_abs(&(rec.q.clone() - o.beam_q(t))) < 1e-8,
                    "{kind:?} t={t}"
                );
                assert!(max_abs(&(rec.q.clone() - rec.q.transpose())) < 1e-10);
                assert!(rec.drift < 1e-8);
            }
        }
    }

    #[test]
    fn harmonic_det_c() {
        let t = 0.4;
        let rec =
            integrate_beam_record(&chart(), &HamiltonianModel::harmonic(), 0.2, t, DEFAULT_DT)
                .unwrap();
        assert!((rec.log_det_c.exp() - (2.0 * I * t).exp()).norm() < 1e-8);
    }

    #[test]
    fn plane_is_invariant() {
        for kind in ScenarioKind::ALL {
            let x0 = [0.4, -0.9];
            let p0 = [0.5 * x0[1], -0.5 * x0[0]];
            let (x, p) = integrate_double_phase(&kind.model(), x0, p0, 1.0, DEFAULT_DT).unwrap();
            assert!((p[0] - 0.5 * x[1]).abs() < 1e-10 && (p[1] + 0.5 * x[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn nearest_point_closed_forms() {
        for kind in ScenarioKind::ALL {
            let t = 0.5;
            let cache = cache(kind, t, 128);
            let o = ScenarioOracle::new(kind);
            for (a, dq, dp) in [(0.3, 0.1, -0.2), (-0.5, -0.1, 0.05), (1.2, 0.2, 0.2)] {
                let (mq, mp) = o.manifold(a, t);
                let (q, p) = (mq + dq, mp + dp);
                let np = nearest_point(&cache, &PhasePoint::new1(q, p), t).unwrap();
                assert!((np.alpha - o.alpha_star(q, p, t)).abs() < 1e-9, "{kind:?}");
                assert!((np.epsilon - o.epsilon(q, p, t)).abs() < 1e-9);
            }
            let (mq, mp) = o.manifold(0.8, t);
            let np = nearest_point(&cache, &PhasePoint::new1(mq, mp), t).unwrap();
            assert!(np.epsilon < 1e-9 && (np.alpha - 0.8).abs() < 1e-9);
        }
    }

    #[test]
    fn outside_tube_and_stale() {
        let cache = cache(ScenarioKind::Free, 0.5, 64);
        let far = PhasePoint::new1(-2.0, 2.0);
        assert!(matches!(
            nearest_point(&cache, &far, 0.5),
            Err(Error::OutsideTube(_))
        ));
        assert!(matches!(
            nearest_point(&cache, &far, 0.4),
            Err(Error::Stale(_))
        ));
    }

    #[test]
    fn phase_and_amplitude_closed_forms() {
        let h = 0.1;
        for kind in ScenarioKind::ALL {
            let t = 0.5;
            let cache = cache(kind, t, 128);
            let o = ScenarioOracle::new(kind);
            for (a, dq, dp) in [
                (0.3, 0.1, -0.2),
                (-0.5, -0.1, 0.05),
                (1.2, 0.2, 0.2),
                (0.0, 0.0, 0.0),
            ] {
                let (mq, mp) = o.manifold(a, t);
                let (q, p) = (mq + dq, mp + dp);
                let x = PhasePoint::new1(q, p);
                let phi = beam_phase(&cache, &x, t).unwrap();
                assert!(
                    (phi - o.phi(q, p, t)).norm() < 1e-8,
                    "{kind:?} {phi} {}",
                    o.phi(q, p, t)
                );
                let chi = beam_amplitude(&cache, &x, t, h).unwrap();
                assert!(
                    (chi - o.chi(q, p, t, h)).norm() < 1e-8 * o.chi(q, p, t, h).norm().max(1e-3),
                    "{kind:?}"
                );
            }
        }
    }

    #[test]
    fn restriction_examples() {
        let h = 0.1;
        let c0 = cache(ScenarioKind::Free, 0.0, 64);
        let r = on_manifold_restriction(&c0, 0.8, 0.0, h).unwrap();
        assert!((r.s - (0.8 * 0.8 / 2.0 - 0.8 * r.point.p[0] / 2.0)).abs() < 1e-12);
        let want =
            (PI * h).powf(-0.25) * PI.powf(-0.25) * (-0.32f64).exp() / C64::new(1.0, -1.0).sqrt();
        assert!((r.r - want).norm() < 1e-12);
        let c1 = cache(ScenarioKind::Free, 0.5, 64);
        let r = on_manifold_restriction(&c1, 0.9, 0.5, h).unwrap();
        assert!(r.s.abs() < 1e-10);
        assert!((r.point.p[0] - 0.9 / 2.0).abs() < 1e-10);
        assert!(matches!(
            on_manifold_restriction(&c1, 50.0, 0.5, h),
            Err(Error::Chart(_))
        ));
    }

    #[test]
    fn field_masks_outside() {
        let cache = cache(ScenarioKind::Harmonic, 0.3, 128);
        let g = GridSpec::square(-3.0, 3.0, 13).unwrap();
        let f = beam_field(&cache, &g, 0.3, 0.1).unwrap();
        assert!(f.coverage > 0.0 && f.coverage < 1.0);
        for (k, m) in f.mask.iter().enumerate() {
            if !m {
                assert_eq!(f.field.values[k], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn initial_rank() {
        let cache = cache(ScenarioKind::Free, 0.2, 16);
        assert_eq!(cache.initial_im_rank, 1);
        assert!(cache.min_im_rank >= 1);
    }

    #[test]
    fn riccati_residual() {
        let j = Matrix2::new(0.0, 1.0, -1.0, 0.0).map(|v| c(v, 0.0));
        let to2 = |m: &CMat| Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let model = HamiltonianModel::polynomial(vec![0.0, 0.3, 1.0, 0.0, 0.2], 1).unwrap();
        let (alpha, t, dt) = (0.6, 0.5, 1e-4);
        let at = |s: f64| integrate_beam_record(&chart(), &model, alpha, s, 1e-4).unwrap();
        let (m, rec, p) = (at(t - dt), at(t), at(t + dt));
        let dq = (to2(&p.q) - to2(&m.q)) / c(2.0 * dt, 0.0);
        let h = model.hessian(&rec.xt.stacked()).map(|v| c(v, 0.0));
        let h = Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
        let q = to2(&rec.q);
        let half = c(0.5, 0.0);
        let rhs = -h * c(0.25, 0.0) + h * j * q * half - q * j * h * half + q * j * h * j * q;
        let res = (dq - rhs).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(res < 1e-6, "{res}");
    }

    #[test]
    fn phase_hessian_on_manifold_is_q() {
        for kind in ScenarioKind::ALL {
            let t = 0.5;
            let cache = cache(kind, t, 128);
            let (q, p) = ScenarioOracle::new(kind).manifold(0.7, t);
            let phi = |dq: f64, dp: f64| {
                beam_phase(&cache, &PhasePoint::new1(q + dq, p + dp), t).unwrap()
            };
            let h = 1e-3;
            let f0 = phi(0.0, 0.0);
            let hqq = (phi(h, 0.0) - 2.0 * f0 + phi(-h, 0.0)) / (h * h);
            let hpp = (phi(0.0, h) - 2.0 * f0 + phi(0.0, -h)) / (h * h);
            let hqp = (phi(h, h) - phi(h, -h) - phi(-h, h) + phi(-h, -h)) / (4.0 * h * h);
            let qt = beam_q(
                &cache,
                nearest_point(&cache, &PhasePoint::new1(q, p), t)
                    .unwrap()
                    .alpha,
                t,
            )
            .unwrap();
            let err = [(hqq, qt[(0, 0)]), (hpp, qt[(1, 1)]), (hqp, qt[(0, 1)])]
                .iter()
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-5, "{kind:?} {err}");
        }
    }
}
