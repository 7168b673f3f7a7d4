//! Quadrature rules: composite Gauss-Legendre on intervals and trapezoid
//! tensor grids over phase-space boxes.

use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::types::GridSpec;

pub(crate) const PANEL_ORDER: usize = 16;

fn panel_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(PANEL_ORDER)
            .expect("order >= 2")
            .as_node_weight_pairs()
            .to_vec()
    })
}

/// Nodes and weights of `panels` equal Gauss-Legendre panels on [a, b].
pub(crate) fn composite_gauss_legendre(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let rule = panel_rule();
    let len = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.len());
    for k in 0..panels {
        let lo = a + k as f64 * len;
        for &(x, w) in rule {
            out.push((lo + 0.5 * len * (x + 1.0), 0.5 * len * w));
        }
    }
    out
}

/// Trapezoid source grid over a phase-space box.
///
/// The integrands (Gaussian kernels times initial data concentrated near a
/// Lagrangian manifold) are smooth and negligible at the box edge, where the
/// trapezoid rule converges geometrically in the node spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceQuadrature {
    pub qmin: f64,
    pub qmax: f64,
    pub pmin: f64,
    pub pmax: f64,
    /// None picks a spacing of 0.45 sqrt(hbar)
    pub nodes_per_axis: Option<usize>,
}

pub const AUTO_SPACING: f64 = 0.45;

/// Sources whose weighted value is below this fraction of the largest are dropped.
pub const PRUNE_TOL: f64 = 1e-14;

/// Edge mass fraction above which a source box is reported too small.
pub const TAIL_TOL: f64 = 1e-8;

impl PhaseSpaceQuadrature {
    pub fn new(qmin: f64, qmax: f64, pmin: f64, pmax: f64, nodes_per_axis: Option<usize>) -> Self {
        PhaseSpaceQuadrature {
            qmin,
            qmax,
            pmin,
            pmax,
            nodes_per_axis,
        }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, lo, hi, None)
    }

    pub fn with_nodes(mut self, n: usize) -> Self {
        self.nodes_per_axis = Some(n);
        self
    }

    /// The node grid for a given hbar.
    pub fn grid(&self, hbar: f64) -> Result<GridSpec> {
        let (nq, np) = match self.nodes_per_axis {
            Some(n) => (n, n),
            None => {
                let h = AUTO_SPACING * hbar.sqrt();
                let n = |lo: f64, hi: f64| ((hi - lo) / h).ceil() as usize + 1;
                (n(self.qmin, self.qmax), n(self.pmin, self.pmax))
            }
        };
        GridSpec::new(self.qmin, self.qmax, self.pmin, self.pmax, nq, np)
    }

    /// Box grown by `factor` about its centre.
    pub fn expanded(&self, factor: f64) -> Vec<f64> {
        let grow = |lo: f64, hi: f64| {
            let (c, r) = ((lo + hi) / 2.0, (hi - lo) / 2.0 * factor);
            [c - r, c + r]
        };
        let mut v = grow(self.qmin, self.qmax).to_vec();
        v.extend(grow(self.pmin, self.pmax));
        v
    }
}

/// Fraction of |f|^2 mass (trapezoid) carried by the two outermost rings.
pub(crate) fn edge_mass_fraction(grid: &GridSpec, abs2: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut edge = 0.0;
    for (k, v) in abs2.iter().enumerate() {
        let (i, j) = (k / grid.np, k % grid.np);
        let m = v * grid.trapezoid_weight(k);
        total += m;
        if i < 2 || j < 2 || i + 2 >= grid.nq || j + 2 >= grid.np {
            edge += m;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

pub(crate) fn check_tail(quad: &PhaseSpaceQuadrature, grid: &GridSpec, abs2: &[f64]) -> Result<()> {
    let tail = edge_mass_fraction(grid, abs2);
    if tail > TAIL_TOL {
        return Err(Error::TailMass {
            tail,
            suggested: quad.expanded(1.5),
        });
    }
    Ok(())
}
