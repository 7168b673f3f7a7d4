//! Closed-form solutions for free motion, a linear field and the harmonic
//! oscillator with initial state pi^(-1/4) exp(-x^2/2) exp(i x^2 / 2 hbar),
//! plus an independent Gaussian-state oracle and field error norms.

use std::f64::consts::PI;

use rayon::prelude::*;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianModel, ModelKind};
use crate::linalg::{CMat, I};
use crate::quadrature::composite_gauss_legendre;
use crate::types::{ComplexField, GridSpec, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Free,
    LinearField,
    Harmonic,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::Free,
        ScenarioKind::LinearField,
        ScenarioKind::Harmonic,
    ];

    pub fn model(&self) -> HamiltonianModel {
        match self {
            ScenarioKind::Free => HamiltonianModel::free(),
            ScenarioKind::LinearField => HamiltonianModel::linear_field(),
            ScenarioKind::Harmonic => HamiltonianModel::harmonic(),
        }
    }

    pub fn from_model(model: &HamiltonianModel) -> Option<Self> {
        if model.dim() != 1 {
            return None;
        }
        match model.kind() {
            ModelKind::Free => Some(ScenarioKind::Free),
            ModelKind::LinearField => Some(ScenarioKind::LinearField),
            ModelKind::Harmonic => Some(ScenarioKind::Harmonic),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Free => "free",
            ScenarioKind::LinearField => "linear_field",
            ScenarioKind::Harmonic => "harmonic",
        }
    }
}

fn sqrt_checked(z: C64, what: &str) -> Result<C64> {
    // the principal branch is continuous in t while the radicand stays in Re > 0
    if z.re <= 0.0 {
        return Err(Error::Domain(format!(
            "{what}: radicand {z} left the right half-plane"
        )));
    }
    Ok(z.sqrt())
}

fn norm_const(hbar: f64) -> f64 {
    PI.powf(-0.25) * (PI * hbar).powf(-0.25)
}

fn base_phase(q: f64, p: f64) -> C64 {
    C64::new(p * q / 2.0, 0.0) + 0.5 * I * q * q
}

/// Exact phase-space solution Psi(q, p, t; hbar).
pub fn exact_value_checked(kind: ScenarioKind, q: f64, p: f64, t: f64, hbar: f64) -> Result<C64> {
    let h = hbar;
    let ih = I * h;
    let w = C64::new(q, -p);
    let w2 = w * w;
    let (pref, expo) = match kind {
        ScenarioKind::Free => {
            let den = 1.0 - I + h + 2.0 * (1.0 + ih) * t;
            let e = -0.5 * I * (1.0 + 2.0 * (1.0 + ih) * t) / den * w2;
            (1.0 / sqrt_checked(den, "free solution")?, e)
        }
        ScenarioKind::LinearField => {
            let den = 1.0 - I + 2.0 * t + (1.0 + 2.0 * I * t) * h;
            let k = -1.0 - I - ih + 2.0 * (h - I) * t;
            let poly = t * t * (0.5 + (1.0 + I + ih) / 3.0 * t + (I - h) / 6.0 * t * t)
                + t * (I + (I - h) * t) * w
                - 0.5 * (1.0 + 2.0 * t + 2.0 * ih * t) * w2;
            (1.0 / sqrt_checked(den, "linear field solution")?, poly / k)
        }
        ScenarioKind::Harmonic => {
            let (s, c) = (2.0 * t).sin_cos();
            let ratio = ((1.0 + ih) * s + c) / ((1.0 + I + ih) * (I * s + c));
            (
                1.0 / (1.0 - I + h).sqrt() * (-I * t).exp(),
                ratio * w2 / 2.0,
            )
        }
    };
    Ok(norm_const(h) * pref * (I * (base_phase(q, p) + expo) / h).exp())
}

/// Exact value; t must keep the square-root radicands in Re > 0 (t >= 0 suffices).
pub fn exact_value(kind: ScenarioKind, q: f64, p: f64, t: f64, hbar: f64) -> C64 {
    exact_value_checked(kind, q, p, t, hbar).expect("time outside the continuous branch")
}

/// Exact configuration-space solution psi(x, t; hbar).
pub fn exact_psi(kind: ScenarioKind, x: f64, t: f64, hbar: f64) -> Result<C64> {
    Ok(GaussianState::scenario_initial(hbar)
        .evolve(kind, t)?
        .value(x, hbar))
}

/// Samples the exact solution on a grid.
pub fn exact_field(
    kind: ScenarioKind,
    targets: &GridSpec,
    t: f64,
    hbar: f64,
) -> Result<ComplexField> {
    targets.validate()?;
    if !(hbar > 0.0) {
        return Err(Error::Config(format!("hbar must be positive, got {hbar}")));
    }
    exact_value_checked(kind, 0.0, 0.0, t, hbar)?;
    let values: Vec<C64> = (0..targets.len())
        .into_par_iter()
        .map(|k| {
            let (q, p) = targets.point(k);
            exact_value(kind, q, p, t, hbar)
        })
        .collect();
    ComplexField::new(*targets, values, hbar, t, Method::Exact)
}

/// psi(x) = amp exp{(i/hbar)(a x^2/2 + b x + c)} with Im a > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub amp: C64,
    pub a: C64,
    pub b: C64,
    pub c: C64,
}

impl GaussianState {
    pub fn scenario_initial(hbar: f64) -> Self {
        GaussianState {
            amp: C64::new(PI.powf(-0.25), 0.0),
            a: C64::new(1.0, hbar),
            b: C64::new(0.0, 0.0),
            c: C64::new(0.0, 0.0),
        }
    }

    pub fn value(&self, x: f64, hbar: f64) -> C64 {
        self.amp * (I / hbar * (self.a * x * x / 2.0 + self.b * x + self.c)).exp()
    }

    /// Wave packet transform in closed form (Gaussian integral).
    pub fn transform(&self, q: f64, p: f64, hbar: f64) -> C64 {
        let alpha = self.a + I;
        let beta = self.b - p - I * q;
        let gamma = self.c + p * q / 2.0 + I * q * q / 2.0;
        let gauss = (2.0 * PI * hbar / (-I * alpha)).sqrt();
        (2.0 * PI * hbar).powf(-0.5)
            * (PI * hbar).powf(-0.25)
            * self.amp
            * gauss
            * (I / hbar * (gamma - beta * beta / (2.0 * alpha))).exp()
    }

    /// Exact evolution under the scenario Hamiltonian (b must start at 0 for
    /// the harmonic case, which the scenario satisfies).
    pub fn evolve(&self, kind: ScenarioKind, t: f64) -> Result<GaussianState> {
        let a0 = self.a;
        match kind {
            ScenarioKind::Free | ScenarioKind::LinearField => {
                if self.b != C64::new(0.0, 0.0) {
                    return Err(Error::Unsupported(
                        "evolution implemented for b(0) = 0".into(),
                    ));
                }
                let u = 1.0 + 2.0 * a0 * t;
                let a = a0 / u;
                let mut out = GaussianState {
                    amp: self.amp / sqrt_checked(u, "1 + 2 a0 t")?,
                    a,
                    b: 0.0.into(),
                    c: self.c,
                };
                if kind == ScenarioKind::LinearField {
                    let b = |s: f64| -(s + a0 * s * s) / (1.0 + 2.0 * a0 * s);
                    out.b = b(t);
                    // dc/dt = -b^2
                    let integral: C64 = if t == 0.0 {
                        C64::new(0.0, 0.0)
                    } else {
                        composite_gauss_legendre(0.0, t, 4)
                            .iter()
                            .map(|(s, w)| *w * b(*s) * b(*s))
                            .sum()
                    };
                    out.c = self.c - integral;
                }
                Ok(out)
            }
            ScenarioKind::Harmonic => {
                if self.b != C64::new(0.0, 0.0) {
                    return Err(Error::Unsupported(
                        "evolution implemented for b(0) = 0".into(),
                    ));
                }
                let (s, c) = (2.0 * t).sin_cos();
                let u = c + a0 * s;
                // continue sqrt(u) in t from u(0) = 1
                let n = (t.abs() / 0.01).ceil().max(1.0) as usize;
                let mut root = C64::new(1.0, 0.0);
                for k in 1..=n {
                    let tk = t * k as f64 / n as f64;
                    let (sk, ck) = (2.0 * tk).sin_cos();
                    let r = (ck + a0 * sk).sqrt();
                    root = if (r - root).norm() <= (r + root).norm() {
                        r
                    } else {
                        -r
                    };
                }
                Ok(GaussianState {
                    amp: self.amp / root,
                    a: (a0 * c - s) / u,
                    b: 0.0.into(),
                    c: self.c,
                })
            }
        }
    }
}

/// Closed forms of the classical and narrow beam data for the scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOracle {
    pub kind: ScenarioKind,
}

impl ScenarioOracle {
    pub fn new(kind: ScenarioKind) -> Self {
        ScenarioOracle { kind }
    }

    pub fn flow(&self, q: f64, p: f64, t: f64) -> (f64, f64) {
        match self.kind {
            ScenarioKind::Free => (q + 2.0 * t * p, p),
            ScenarioKind::LinearField => (q + 2.0 * t * p - t * t, p - t),
            ScenarioKind::Harmonic => {
                let (s, c) = (2.0 * t).sin_cos();
                (c * q + s * p, -s * q + c * p)
            }
        }
    }

    pub fn action(&self, q: f64, p: f64, t: f64) -> f64 {
        match self.kind {
            ScenarioKind::Free => p * p * t,
            ScenarioKind::LinearField => (p * p - q) * t - 2.0 * p * t * t + 2.0 / 3.0 * t.powi(3),
            ScenarioKind::Harmonic => {
                0.25 * (p * p - q * q) * (4.0 * t).sin() + 0.5 * p * q * ((4.0 * t).cos() - 1.0)
            }
        }
    }

    /// A_w = A - (p_t q_t - p q)/2.
    pub fn sym_action(&self, q: f64, p: f64, t: f64) -> f64 {
        let (qt, pt) = self.flow(q, p, t);
        self.action(q, p, t) - 0.5 * (pt * qt - p * q)
    }

    /// Lambda_t(alpha) = g_t(alpha, alpha).
    pub fn manifold(&self, alpha: f64, t: f64) -> (f64, f64) {
        self.flow(alpha, alpha, t)
    }

    // every Lambda_t here is a straight line: offset + alpha * direction
    fn line(&self, t: f64) -> ((f64, f64), (f64, f64)) {
        let o = self.manifold(0.0, t);
        let one = self.manifold(1.0, t);
        (o, (one.0 - o.0, one.1 - o.1))
    }

    pub fn alpha_star(&self, q: f64, p: f64, t: f64) -> f64 {
        let (o, v) = self.line(t);
        ((q - o.0) * v.0 + (p - o.1) * v.1) / (v.0 * v.0 + v.1 * v.1)
    }

    pub fn epsilon(&self, q: f64, p: f64, t: f64) -> f64 {
        let (mq, mp) = self.manifold(self.alpha_star(q, p, t), t);
        ((q - mq).powi(2) + (p - mp).powi(2)).sqrt()
    }

    /// Narrow beam anisotropy D C^{-1}.
    pub fn beam_q(&self, t: f64) -> CMat {
        let c = |re: f64, im: f64| C64::new(re, im);
        match self.kind {
            ScenarioKind::Free | ScenarioKind::LinearField => {
                let f = 0.5 / (1.0 + (1.0 + I) * t);
                let off = -I - (1.0 + I) * t;
                CMat::from_row_slice(
                    2,
                    2,
                    &[
                        f * c(1.0, 1.0),
                        f * off,
                        f * off,
                        -f * (1.0 - I) * (1.0 + 2.0 * t),
                    ],
                )
            }
            ScenarioKind::Harmonic => {
                let e = (-4.0 * I * t).exp();
                CMat::from_row_slice(
                    2,
                    2,
                    &[0.5 * (I + e), -0.5 * I * e, -0.5 * I * e, 0.5 * (I - e)],
                )
            }
        }
    }

    /// Narrow beam phase.
    pub fn phi(&self, q: f64, p: f64, t: f64) -> C64 {
        let w = C64::new(q, -p);
        match self.kind {
            ScenarioKind::Free => {
                -(1.0 + I) / 4.0 * (p - q + 2.0 * t * p) / (1.0 + (1.0 + I) * t) * w
            }
            ScenarioKind::Harmonic => 0.25 * (I * (p * p + q * q) + (-4.0 * I * t).exp() * w * w),
            ScenarioKind::LinearField => {
                let alpha = self.alpha_star(q, p, t);
                let (qt, pt) = self.manifold(alpha, t);
                let (dq, dp) = (q - qt, p - pt);
                let m = self.beam_q(t);
                let quad =
                    0.5 * (m[(0, 0)] * dq * dq + 2.0 * m[(0, 1)] * dq * dp + m[(1, 1)] * dp * dp);
                // theta_0 vanishes on the initial manifold
                C64::new(
                    0.5 * (pt * dq - qt * dp) + self.sym_action(alpha, alpha, t),
                    0.0,
                ) + quad
            }
        }
    }

    /// Narrow beam amplitude.
    pub fn chi(&self, q: f64, p: f64, t: f64, hbar: f64) -> C64 {
        let alpha = self.alpha_star(q, p, t);
        let g = norm_const(hbar) * (-alpha * alpha / 2.0).exp();
        match self.kind {
            ScenarioKind::Free | ScenarioKind::LinearField => g / (1.0 - I + 2.0 * t).sqrt(),
            ScenarioKind::Harmonic => g * (-I * t).exp() / (1.0 - I).sqrt(),
        }
    }
}

/// Error measures of `a` against the reference `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// ||a - b|| / ||b|| with trapezoid weights
    pub rel_l2: f64,
    /// max |a - b|
    pub sup: f64,
    /// max |a - b| / max |b|
    pub rel_sup: f64,
    /// max |arg a - arg b| (mod 2 pi) where both exceed 1e-3 of their maxima
    pub phase_sup: f64,
}

pub fn error_norms(a: &ComplexField, b: &ComplexField) -> Result<ErrorNorms> {
    if a.grid != b.grid {
        return Err(Error::Dimension(format!(
            "grids differ: {:?} vs {:?}",
            a.grid, b.grid
        )));
    }
    if (a.hbar - b.hbar).abs() > 1e-15 * b.hbar || (a.time - b.time).abs() > 1e-12 {
        return Err(Error::Dimension(format!(
            "fields at (hbar, t) = ({}, {}) and ({}, {})",
            a.hbar, a.time, b.hbar, b.time
        )));
    }
    let (ma, mb) = (a.max_abs(), b.max_abs());
    let mut num = 0.0;
    let mut den = 0.0;
    let mut sup = 0.0f64;
    let mut phase = 0.0f64;
    for k in 0..a.values.len() {
        let (x, y) = (a.values[k], b.values[k]);
        let w = a.grid.trapezoid_weight(k);
        num += w * (x - y).norm_sqr();
        den += w * y.norm_sqr();
        sup = sup.max((x - y).norm());
        if x.norm() > 1e-3 * ma && y.norm() > 1e-3 * mb {
            phase = phase.max((x / y).arg().abs());
        }
    }
    let rel_l2 = if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let rel_sup = if mb > 0.0 {
        sup / mb
    } else if sup == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ErrorNorms {
        rel_l2,
        sup,
        rel_sup,
        phase_sup: phase,
    })
}
