//! Small dense complex linear algebra: the symplectic form, Siegel and
//! symplectic predicates, and continuous logarithms of determinants.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Block matrix [[0, I], [-I, 0]] of size 2d.
pub fn canonical_j(dim: usize) -> RMat {
    assert!(dim >= 1, "dim must be positive");
    let mut j = RMat::zeros(2 * dim, 2 * dim);
    for k in 0..dim {
        j[(k, dim + k)] = 1.0;
        j[(dim + k, k)] = -1.0;
    }
    j
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Diagnostics from [`check_siegel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiegelCheck {
    pub ok: bool,
    pub symmetric: bool,
    pub asymmetry: f64,
    pub min_imag_eigenvalue: f64,
}

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const POSDEF_TOL: f64 = 1e-12;

/// Symmetric within 1e-12 (relative) and Im M positive definite.
pub fn check_siegel(m: &CMat) -> Result<SiegelCheck> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "check_siegel needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = max_abs(&(m - m.transpose()));
    let symmetric = asym <= SYMMETRY_TOL * max_abs(m).max(1.0);
    let im = m.map(|z| z.im);
    let sym_im = (&im + im.transpose()) * 0.5;
    let min_eig = SymmetricEigen::new(sym_im)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(SiegelCheck {
        ok: symmetric && min_eig > POSDEF_TOL,
        symmetric,
        asymmetry: asym,
        min_imag_eigenvalue: min_eig,
    })
}

/// ((2/i)M)^T J ((2/i)M) = J within 1e-10.
pub fn check_scaled_symplectic(m: &CMat) -> Result<bool> {
    Ok(symplectic_defect(m)? <= 1e-10)
}

/// max |((2/i)M)^T J ((2/i)M) - J|
pub fn symplectic_defect(m: &CMat) -> Result<f64> {
    let n = m.nrows();
    if !m.is_square() || n % 2 != 0 {
        return Err(Error::Dimension(format!(
            "scaled symplectic check needs an even square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    let s = m * C64::new(0.0, -2.0);
    let j = to_complex(&canonical_j(n / 2));
    Ok(max_abs(&(s.transpose() * &j * &s - j)))
}

/// Symmetric part (M + M^T)/2.
pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.transpose()) * C64::new(0.5, 0.0)
}

pub fn inverse(m: &CMat, what: &str) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Invariant(format!("{what} is singular")))
}

/// x^T M y for row-major data.
pub fn bilinear(m: &CMat, x: &[C64], y: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (r, xr) in x.iter().enumerate() {
        for (c, yc) in y.iter().enumerate() {
            acc += xr * m[(r, c)] * yc;
        }
    }
    acc
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI
    } else if r <= -PI {
        r += 2.0 * PI
    }
    r
}

/// Complex logarithm continued along a sequence of samples.
///
/// Starts on the principal branch; each update must move the argument by
/// less than pi/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchLog {
    log: C64,
}

impl BranchLog {
    pub fn new(z: C64) -> Self {
        BranchLog { log: z.ln() }
    }

    pub fn from_log(log: C64) -> Self {
        BranchLog { log }
    }

    /// Advance to the next sample; `t` is only used in the error.
    pub fn update(&mut self, z: C64, t: f64) -> Result<()> {
        let jump = wrap_angle(z.arg() - self.log.im);
        if jump.abs() >= FRAC_PI_2 {
            return Err(Error::StepSize { t, jump });
        }
        self.log = C64::new(z.norm().ln(), self.log.im + jump);
        Ok(())
    }

    pub fn log(&self) -> C64 {
        self.log
    }

    /// z^(-1/2) on the tracked branch.
    pub fn inv_sqrt(&self) -> C64 {
        (-0.5 * self.log).exp()
    }
}
