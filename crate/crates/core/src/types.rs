//! Shared domain types.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{canonical_j, check_siegel, CMat, SiegelCheck, SYMMETRY_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiclassicalConfig {
    pub hbar: f64,
    pub dim: usize,
}

impl SemiclassicalConfig {
    pub fn new(hbar: f64, dim: usize) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Config(format!("hbar must be positive, got {hbar}")));
        }
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        Ok(SemiclassicalConfig { hbar, dim })
    }
}

/// A point (q, p) of phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() || q.is_empty() {
            return Err(Error::Dimension(format!(
                "q has length {}, p has length {}",
                q.len(),
                p.len()
            )));
        }
        if q.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("phase point has non-finite entries".into()));
        }
        Ok(PhasePoint { q, p })
    }

    /// One-dimensional shorthand.
    pub fn new1(q: f64, p: f64) -> Self {
        PhasePoint {
            q: vec![q],
            p: vec![p],
        }
    }

    /// From the stacked vector X = (q, p).
    pub fn from_stacked(x: &[f64]) -> Self {
        let d = x.len() / 2;
        PhasePoint {
            q: x[..d].to_vec(),
            p: x[d..].to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut x = self.q.clone();
        x.extend_from_slice(&self.p);
        x
    }

    pub fn stacked_complex(&self) -> Vec<C64> {
        self.stacked()
            .into_iter()
            .map(|v| C64::new(v, 0.0))
            .collect()
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.stacked()
            .iter()
            .zip(other.stacked())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// A point (X, P) of double phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublePhasePoint {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl DoublePhasePoint {
    /// The point (X, JX/2) on the invariant plane.
    pub fn on_plane(x: Vec<f64>) -> Self {
        let p = half_j_times(&x);
        DoublePhasePoint { x, p }
    }

    pub fn is_on_plane(&self) -> bool {
        half_j_times(&self.x) == self.p
    }
}

/// JX/2 for a stacked X = (q, p): (p/2, -q/2).
pub fn half_j_times(x: &[f64]) -> Vec<f64> {
    let d = x.len() / 2;
    let j = canonical_j(d);
    (0..2 * d)
        .map(|r| 0.5 * (0..2 * d).map(|c| j[(r, c)] * x[c]).sum::<f64>())
        .collect()
}

/// Complex symmetric matrix, checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSymMatrix(CMat);

impl ComplexSymMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        let check = check_siegel(&m)?;
        if !check.symmetric {
            return Err(Error::Invariant(format!(
                "matrix not symmetric (defect {:e} > {:e})",
                check.asymmetry, SYMMETRY_TOL
            )));
        }
        Ok(ComplexSymMatrix(m))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn siegel(&self) -> SiegelCheck {
        check_siegel(&self.0).expect("square by construction")
    }
}

/// Rectangular (q, p) sampling grid, q-major ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub qmin: f64,
    pub qmax: f64,
    pub pmin: f64,
    pub pmax: f64,
    pub nq: usize,
    pub np: usize,
}

impl GridSpec {
    pub fn new(qmin: f64, qmax: f64, pmin: f64, pmax: f64, nq: usize, np: usize) -> Result<Self> {
        let g = GridSpec {
            qmin,
            qmax,
            pmin,
            pmax,
            nq,
            np,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square grid [lo, hi]^2 with n points per axis.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        GridSpec::new(lo, hi, lo, hi, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nq < 2 || self.np < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points per axis, got {}x{}",
                self.nq, self.np
            )));
        }
        let finite = [self.qmin, self.qmax, self.pmin, self.pmax]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.qmax <= self.qmin || self.pmax <= self.pmin {
            return Err(Error::Config(format!(
                "grid bounds must satisfy min < max: q [{}, {}], p [{}, {}]",
                self.qmin, self.qmax, self.pmin, self.pmax
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nq * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dq(&self) -> f64 {
        (self.qmax - self.qmin) / (self.nq - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.pmax - self.pmin) / (self.np - 1) as f64
    }

    pub fn q(&self, i: usize) -> f64 {
        if i == self.nq - 1 {
            self.qmax
        } else {
            self.qmin + i as f64 * self.dq()
        }
    }

    pub fn p(&self, j: usize) -> f64 {
        if j == self.np - 1 {
            self.pmax
        } else {
            self.pmin + j as f64 * self.dp()
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.np + j
    }

    /// (q, p) of the flat index k.
    pub fn point(&self, k: usize) -> (f64, f64) {
        (self.q(k / self.np), self.p(k % self.np))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(move |k| self.point(k))
    }

    /// Trapezoid weight of the flat index k.
    pub fn trapezoid_weight(&self, k: usize) -> f64 {
        let (i, j) = (k / self.np, k % self.np);
        let wq = if i == 0 || i == self.nq - 1 { 0.5 } else { 1.0 };
        let wp = if j == 0 || j == self.np - 1 { 0.5 } else { 1.0 };
        wq * wp * self.dq() * self.dp()
    }

    /// Grid with `k` points removed from each edge.
    pub fn trimmed(&self, k: usize) -> Result<GridSpec> {
        if self.nq <= 2 * k + 1 || self.np <= 2 * k + 1 {
            return Err(Error::Resolution(format!(
                "grid {}x{} too small to trim {k}",
                self.nq, self.np
            )));
        }
        GridSpec::new(
            self.q(k),
            self.q(self.nq - 1 - k),
            self.p(k),
            self.p(self.np - 1 - k),
            self.nq - 2 * k,
            self.np - 2 * k,
        )
    }
}

/// Which computation produced a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    Aga,
    Frozen,
    Fourier,
    Beam,
    Transform,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Exact,
        Method::Aga,
        Method::Frozen,
        Method::Fourier,
        Method::Beam,
        Method::Transform,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Aga => "aga",
            Method::Frozen => "frozen",
            Method::Fourier => "fourier",
            Method::Beam => "beam",
            Method::Transform => "transform",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Samples of a phase-space wavefunction on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub values: Vec<C64>,
    pub hbar: f64,
    pub time: f64,
    pub method: Method,
}

impl ComplexField {
    pub fn new(
        grid: GridSpec,
        values: Vec<C64>,
        hbar: f64,
        time: f64,
        method: Method,
    ) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "field has {} values for a {}x{} grid",
                values.len(),
                grid.nq,
                grid.np
            )));
        }
        if let Some(k) = values
            .iter()
            .position(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            let (q, p) = grid.point(k);
            return Err(Error::Invariant(format!(
                "non-finite field value at (q,p)=({q},{p})"
            )));
        }
        Ok(ComplexField {
            grid,
            values,
            hbar,
            time,
            method,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.values[self.grid.index(i, j)]
    }

    /// L2 norm over dq dp with trapezoid weights.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| v.norm_sqr() * self.grid.trapezoid_weight(k))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Field restricted to the grid with `k` edge points dropped.
    pub fn trimmed(&self, k: usize) -> Result<ComplexField> {
        let grid = self.grid.trimmed(k)?;
        let mut values = Vec::with_capacity(grid.len());
        for i in k..self.grid.nq - k {
            for j in k..self.grid.np - k {
                values.push(self.get(i, j));
            }
        }
        Ok(ComplexField {
            grid,
            values,
            hbar: self.hbar,
            time: self.time,
            method: self.method,
        })
    }
}
