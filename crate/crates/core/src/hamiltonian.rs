//! Hamiltonians H(q, p) = |p|^2 + V(q) and user-supplied models.

use std::fmt;
use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, RMat};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Free,
    LinearField,
    Harmonic,
    /// V(x) = sum_k c_k x^k applied to every coordinate
    Polynomial(Vec<f64>),
    Custom,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Free => "free",
            ModelKind::LinearField => "linear_field",
            ModelKind::Harmonic => "harmonic",
            ModelKind::Polynomial(_) => "polynomial",
            ModelKind::Custom => "custom",
        }
    }
}

/// Evaluators a user model must provide. Complex derivatives default to
/// central differences of `value_complex` along real directions.
pub trait CustomHamiltonian: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> RMat;
    fn value_complex(&self, z: &[C64]) -> C64;

    fn gradient_complex(&self, z: &[C64]) -> Vec<C64> {
        (0..z.len())
            .map(|k| holomorphic_partial(|w| self.value_complex(w), z, k))
            .collect()
    }

    fn hessian_complex(&self, z: &[C64]) -> CMat {
        let n = z.len();
        let mut h = CMat::zeros(n, n);
        for c in 0..n {
            let col = |w: &[C64]| self.gradient_complex(w);
            for r in 0..n {
                h[(r, c)] = holomorphic_partial(|w| col(w)[r], z, c);
            }
        }
        (&h + h.transpose()) * C64::new(0.5, 0.0)
    }

    fn polynomial_degree(&self) -> Option<u32> {
        None
    }
}

// Richardson-extrapolated central difference of a holomorphic function.
fn holomorphic_partial(f: impl Fn(&[C64]) -> C64, z: &[C64], k: usize) -> C64 {
    let step = 1e-3 * z[k].norm().max(1.0);
    let diff = |h: f64| {
        let mut a = z.to_vec();
        let mut b = z.to_vec();
        a[k] += h;
        b[k] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    };
    (4.0 * diff(step / 2.0) - diff(step)) / 3.0
}

#[derive(Clone)]
pub struct HamiltonianModel {
    kind: ModelKind,
    dim: usize,
    // trimmed potential coefficients, empty for custom
    potential: Vec<f64>,
    custom: Option<Arc<dyn CustomHamiltonian>>,
}

impl fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianModel")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("potential", &self.potential)
            .finish()
    }
}

fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.last() == Some(&0.0) {
        c.pop();
    }
    c
}

impl HamiltonianModel {
    /// Built-in models: free (p^2), linear_field (p^2 + q), harmonic (p^2 + q^2).
    pub fn builtin(kind: ModelKind, dim: usize) -> Result<Self> {
        let potential = match kind {
            ModelKind::Free => vec![],
            ModelKind::LinearField => vec![0.0, 1.0],
            ModelKind::Harmonic => vec![0.0, 0.0, 1.0],
            ref other => {
                return Err(Error::Config(format!(
                    "'{}' is not a builtin model",
                    other.name()
                )))
            }
        };
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        Ok(HamiltonianModel {
            kind,
            dim,
            potential,
            custom: None,
        })
    }

    pub fn free() -> Self {
        Self::builtin(ModelKind::Free, 1).unwrap()
    }

    pub fn linear_field() -> Self {
        Self::builtin(ModelKind::LinearField, 1).unwrap()
    }

    pub fn harmonic() -> Self {
        Self::builtin(ModelKind::Harmonic, 1).unwrap()
    }

    /// H = |p|^2 + sum_j sum_k c_k q_j^k.
    pub fn polynomial(coefficients: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config(
                "polynomial coefficients must be finite".into(),
            ));
        }
        let potential = trim(coefficients.clone());
        Ok(HamiltonianModel {
            kind: ModelKind::Polynomial(coefficients),
            dim,
            potential,
            custom: None,
        })
    }

    pub fn custom(dim: usize, model: Arc<dyn CustomHamiltonian>) -> Self {
        HamiltonianModel {
            kind: ModelKind::Custom,
            dim,
            potential: vec![],
            custom: Some(model),
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Potential coefficients c_0, c_1, ... when the model is polynomial.
    pub fn potential_coefficients(&self) -> Option<&[f64]> {
        if self.custom.is_some() {
            None
        } else {
            Some(&self.potential)
        }
    }

    /// Total degree in (q, p); None for non-polynomial models.
    pub fn polynomial_degree(&self) -> Option<u32> {
        match &self.custom {
            Some(c) => c.polynomial_degree(),
            None => Some(self.potential.len().saturating_sub(1).max(2) as u32),
        }
    }

    fn check_len(&self, n: usize) {
        assert_eq!(
            n,
            2 * self.dim,
            "phase point has wrong length for a {}-d model",
            self.dim
        );
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        <f64 as Scalar>::value(self, x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        <f64 as Scalar>::gradient(self, x)
    }

    pub fn hessian(&self, x: &[f64]) -> RMat {
        <f64 as Scalar>::hessian(self, x)
    }

    pub fn value_complex(&self, z: &[C64]) -> C64 {
        <C64 as Scalar>::value(self, z)
    }

    pub fn gradient_complex(&self, z: &[C64]) -> Vec<C64> {
        <C64 as Scalar>::gradient(self, z)
    }

    pub fn hessian_complex(&self, z: &[C64]) -> CMat {
        <C64 as Scalar>::hessian(self, z)
    }

    fn poly_value<T: Scalar>(&self, x: &[T]) -> T {
        let d = self.dim;
        let mut h = T::zero();
        for k in 0..d {
            h += x[d + k] * x[d + k] + horner(&self.potential, x[k]);
        }
        h
    }

    fn poly_gradient<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let d = self.dim;
        let dv = derivative(&self.potential);
        let mut g = vec![T::zero(); 2 * d];
        for k in 0..d {
            g[k] = horner(&dv, x[k]);
            g[d + k] = x[d + k] * T::lift(2.0);
        }
        g
    }

    fn poly_hessian<T: Scalar>(&self, x: &[T]) -> DMatrix<T> {
        let d = self.dim;
        let d2v = derivative(&derivative(&self.potential));
        let mut h = DMatrix::from_element(2 * d, 2 * d, T::zero());
        for k in 0..d {
            h[(k, k)] = horner(&d2v, x[k]);
            h[(d + k, d + k)] = T::lift(2.0);
        }
        h
    }
}

fn horner<T: Scalar>(c: &[f64], x: T) -> T {
    c.iter()
        .rev()
        .fold(T::zero(), |acc, &ck| acc * x + T::lift(ck))
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, ck)| k as f64 * ck)
        .collect()
}

/// Real or complex scalars the flow can be integrated over.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Send + Sync {
    fn lift(v: f64) -> Self;
    fn to_c64(self) -> C64;
    fn value(model: &HamiltonianModel, x: &[Self]) -> Self;
    fn gradient(model: &HamiltonianModel, x: &[Self]) -> Vec<Self>;
    fn hessian(model: &HamiltonianModel, x: &[Self]) -> DMatrix<Self>;
}

impl Scalar for f64 {
    fn lift(v: f64) -> Self {
        v
    }

    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }

    fn value(model: &HamiltonianModel, x: &[f64]) -> f64 {
        model.check_len(x.len());
        match &model.custom {
            Some(c) => c.value(x),
            None => model.poly_value(x),
        }
    }

    fn gradient(model: &HamiltonianModel, x: &[f64]) -> Vec<f64> {
        model.check_len(x.len());
        match &model.custom {
            Some(c) => c.gradient(x),
            None => model.poly_gradient(x),
        }
    }

    fn hessian(model: &HamiltonianModel, x: &[f64]) -> RMat {
        model.check_len(x.len());
        match &model.custom {
            Some(c) => c.hessian(x),
            None => model.poly_hessian(x),
        }
    }
}

impl Scalar for C64 {
    fn lift(v: f64) -> Self {
        C64::new(v, 0.0)
    }

    fn to_c64(self) -> C64 {
        self
    }

    fn value(model: &HamiltonianModel, x: &[C64]) -> C64 {
        model.check_len(x.len());
        match &model.custom {
            Some(c) => c.value_complex(x),
            None => model.poly_value(x),
        }
    }

    fn gradient(model: &HamiltonianModel, x: &[C64]) -> Vec<C64> {
        model.check_len(x.len());
        match &model.custom {
            Some(c) => c.gradient_complex(x),
            None => model.poly_gradient(x),
        }
    }

    fn hessian(model: &HamiltonianModel, x: &[C64]) -> CMat {
        model.check_len(x.len());
        match &model.custom {
            Some(c) => c.hessian_complex(x),
            None => model.poly_hessian(x),
        }
    }
}

/// Double phase space symbol H(X/2 - JP).
pub fn double_phase_symbol(model: &HamiltonianModel, x: &[f64], p: &[f64]) -> f64 {
    let d = model.dim();
    assert!(
        x.len() == 2 * d && p.len() == 2 * d,
        "double phase point has wrong length"
    );
    // JP = (P_p, -P_q)
    let arg: Vec<f64> = (0..d)
        .map(|k| x[k] / 2.0 - p[d + k])
        .chain((0..d).map(|k| x[d + k] / 2.0 + p[k]))
        .collect();
    model.value(&arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::half_j_times;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    struct Quartic;

    impl CustomHamiltonian for Quartic {
        fn value(&self, x: &[f64]) -> f64 {
            x[1] * x[1] + x[0].powi(4)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![4.0 * x[0].powi(3), 2.0 * x[1]]
        }
        fn hessian(&self, x: &[f64]) -> RMat {
            RMat::from_row_slice(2, 2, &[12.0 * x[0] * x[0], 0.0, 0.0, 2.0])
        }
        fn value_complex(&self, z: &[C64]) -> C64 {
            z[1] * z[1] + z[0] * z[0] * z[0] * z[0]
        }
    }

    #[test]
    fn builtin_values() {
        let free = HamiltonianModel::free();
        assert_eq!(free.value(&[1.0, 2.0]), 4.0);
        assert_eq!(free.gradient(&[1.0, 2.0])[1], 4.0);
        assert_eq!(
            free.hessian(&[1.0, 2.0]),
            RMat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0])
        );
        assert_eq!(HamiltonianModel::linear_field().value(&[3.0, 0.0]), 3.0);
        let h = HamiltonianModel::harmonic();
        assert_eq!(h.value(&[1.0, 1.0]), 2.0);
        assert_eq!(h.hessian(&[0.3, -0.2]), RMat::identity(2, 2) * 2.0);
    }

    #[test]
    fn builtin_rejects_other_kinds() {
        assert!(HamiltonianModel::builtin(ModelKind::Custom, 1).is_err());
        assert!(HamiltonianModel::builtin(ModelKind::Polynomial(vec![1.0]), 1).is_err());
    }

    #[test]
    fn degrees() {
        assert_eq!(HamiltonianModel::free().polynomial_degree(), Some(2));
        assert_eq!(
            HamiltonianModel::linear_field().polynomial_degree(),
            Some(2)
        );
        let quartic = HamiltonianModel::polynomial(vec![0.0, 0.0, 1.0, 0.0, 0.5, 0.0], 1).unwrap();
        assert_eq!(quartic.polynomial_degree(), Some(4));
        assert_eq!(
            HamiltonianModel::custom(1, Arc::new(Quartic)).polynomial_degree(),
            None
        );
    }

    #[test]
    fn double_phase_examples() {
        let free = HamiltonianModel::free();
        assert_eq!(double_phase_symbol(&free, &[1.0, 1.0], &[0.5, -0.5]), 1.0);
        assert_eq!(double_phase_symbol(&free, &[0.0, 0.0], &[0.0, 1.0]), 0.0);
        let harm = HamiltonianModel::harmonic();
        assert_eq!(double_phase_symbol(&harm, &[2.0, 0.0], &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn custom_complex_derivatives_by_differences() {
        let m = HamiltonianModel::custom(1, Arc::new(Quartic));
        let z = [C64::new(0.7, 0.2), C64::new(-0.3, 0.4)];
        let g = m.gradient_complex(&z);
        assert_relative_eq!((g[0] - 4.0 * z[0].powi(3)).norm(), 0.0, epsilon = 1e-9);
        assert_relative_eq!((g[1] - 2.0 * z[1]).norm(), 0.0, epsilon = 1e-9);
        let h = m.hessian_complex(&z);
        assert_relative_eq!((h[(0, 0)] - 12.0 * z[0] * z[0]).norm(), 0.0, epsilon = 1e-7);
        assert_relative_eq!(h[(0, 1)].norm(), 0.0, epsilon = 1e-7);
    }

    fn models() -> Vec<HamiltonianModel> {
        vec![
            HamiltonianModel::free(),
            HamiltonianModel::linear_field(),
            HamiltonianModel::harmonic(),
            HamiltonianModel::polynomial(vec![0.1, -0.4, 0.3, 0.2, 0.05], 1).unwrap(),
            HamiltonianModel::polynomial(vec![0.0, 1.0, 0.5], 2).unwrap(),
            HamiltonianModel::custom(1, Arc::new(Quartic)),
        ]
    }

    proptest! {
        #[test]
        fn gradient_matches_differences(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, e in -2.0f64..2.0) {
            for m in models() {
                let x: Vec<f64> = [a, b, c, e][..2 * m.dim()].to_vec();
                let g = m.gradient(&x);
                let hs = m.hessian(&x);
                for k in 0..x.len() {
                    let h = 1e-5;
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (m.value(&xp) - m.value(&xm)) / (2.0 * h);
                    prop_assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0));
                    let gp = m.gradient(&xp);
                    let gm = m.gradient(&xm);
                    for r in 0..x.len() {
                        let fd2 = (gp[r] - gm[r]) / (2.0 * h);
                        prop_assert!((fd2 - hs[(r, k)]).abs() <= 1e-5 * hs[(r, k)].abs().max(1.0));
                    }
                }
                prop_assert_eq!(hs.clone(), hs.transpose());
            }
        }

        #[test]
        fn complex_evaluator_agrees_on_reals(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, e in -3.0f64..3.0) {
            for m in models() {
                let x: Vec<f64> = [a, b, c, e][..2 * m.dim()].to_vec();
                let z: Vec<C64> = x.iter().map(|v| C64::new(*v, 0.0)).collect();
                let v = m.value_complex(&z);
                prop_assert!((v.re - m.value(&x)).abs() <= 1e-14 * m.value(&x).abs().max(1.0));
                prop_assert_eq!(v.im, 0.0);
                if m.potential_coefficients().is_some() {
                    prop_assert_eq!(v.re, m.value(&x));
                }
            }
        }

        #[test]
        fn symbol_on_plane_is_h(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            for m in models().into_iter().filter(|m| m.dim() == 1) {
                let x = vec![a, b];
                let p = half_j_times(&x);
                let v = double_phase_symbol(&m, &x, &p);
                prop_assert!((v - m.value(&x)).abs() <= 1e-14 * m.value(&x).abs().max(1.0));
            }
        }
    }
}
