//! Scenario configuration (TOML).

use std::path::{Path, PathBuf};

use psdyn::{GridSpec, HamiltonianModel, Method, ModelKind, PhaseSpaceQuadrature, ScenarioKind};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub potential: PotentialConfig,
    pub hbar: f64,
    #[serde(default = "one")]
    pub dim: usize,
    pub times: Vec<f64>,
    pub grid: GridConfig,
    pub methods: Vec<String>,
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub beam: BeamConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: String,
    /// V(q) = sum_k c_k q^k, polynomial kind only
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub qmin: f64,
    pub qmax: f64,
    pub pmin: f64,
    pub pmax: f64,
    pub nq: usize,
    pub np: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    /// [qmin, qmax, pmin, pmax]
    #[serde(rename = "box")]
    pub bounds: [f64; 4],
    /// omitted means a spacing of 0.45 sqrt(hbar)
    pub nodes_per_axis: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: psdyn::DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub samples: usize,
    /// chart parameters sampled for the beam cache; omitted means the support of R_0
    pub alpha_box: Option<[f64; 2]>,
    /// chart parameters on which the sweep measures the phase discrepancy
    pub sweep_alphas: [f64; 2],
    pub sweep_points: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            samples: psdyn::beam::DEFAULT_SAMPLES,
            alpha_box: None,
            sweep_alphas: [-2.0, 2.0],
            sweep_points: 41,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into()],
        }
    }
}

/// A checked configuration with the library objects built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: HamiltonianModel,
    pub oracle: Option<ScenarioKind>,
    pub grid: GridSpec,
    pub quadrature: PhaseSpaceQuadrature,
    pub methods: Vec<Method>,
    pub binary: bool,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(self) -> Result<Scenario, CliError> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(invalid(
                "hbar",
                format!("must be positive, got {}", self.hbar),
            ));
        }
        if self.dim != 1 {
            return Err(invalid(
                "dim",
                format!("only 1 is supported, got {}", self.dim),
            ));
        }
        if self.times.is_empty() {
            return Err(invalid("times", "must not be empty"));
        }
        for (k, t) in self.times.iter().enumerate() {
            if !(*t >= 0.0 && t.is_finite()) {
                return Err(invalid(
                    &format!("times[{k}]"),
                    format!("must be non-negative, got {t}"),
                ));
            }
            if k > 0 && *t < self.times[k - 1] {
                return Err(invalid(&format!("times[{k}]"), "times must be sorted"));
            }
        }
        let p = &self.potential;
        let kind = match p.kind.as_str() {
            "free" => ModelKind::Free,
            "linear_field" => ModelKind::LinearField,
            "harmonic" => ModelKind::Harmonic,
            "polynomial" => ModelKind::Polynomial(p.coefficients.clone()),
            other => return Err(invalid("potential.kind", format!("unknown kind '{other}'"))),
        };
        let model = match kind {
            ModelKind::Polynomial(c) => HamiltonianModel::polynomial(c, self.dim),
            _ if !p.coefficients.is_empty() => {
                return Err(invalid(
                    "potential.coefficients",
                    "only allowed for the polynomial kind",
                ))
            }
            k => HamiltonianModel::builtin(k, self.dim),
        }
        .map_err(|e| invalid("potential", e))?;
        let g = self.grid;
        let grid = GridSpec::new(g.qmin, g.qmax, g.pmin, g.pmax, g.nq, g.np)
            .map_err(|e| invalid("grid", e))?;
        let b = self.quadrature.bounds;
        if !(b[1] > b[0] && b[3] > b[2]) || b.iter().any(|v| !v.is_finite()) {
            return Err(invalid("quadrature.box", format!("{b:?} is not a box")));
        }
        if matches!(self.quadrature.nodes_per_axis, Some(n) if n < 2) {
            return Err(invalid("quadrature.nodes_per_axis", "need at least 2"));
        }
        let quadrature =
            PhaseSpaceQuadrature::new(b[0], b[1], b[2], b[3], self.quadrature.nodes_per_axis);
        if !(self.integrator.dt > 0.0 && self.integrator.dt.is_finite()) {
            return Err(invalid(
                "integrator.dt",
                format!("must be positive, got {}", self.integrator.dt),
            ));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "must not be empty"));
        }
        let mut methods = Vec::new();
        for (k, m) in self.methods.iter().enumerate() {
            let m: Method = m
                .parse()
                .map_err(|e| invalid(&format!("methods[{k}]"), e))?;
            if methods.contains(&m) {
                return Err(invalid(
                    &format!("methods[{k}]"),
                    format!("'{}' listed twice", m.as_str()),
                ));
            }
            methods.push(m);
        }
        let oracle = ScenarioKind::from_model(&model);
        if oracle.is_none() && methods.contains(&Method::Exact) {
            return Err(invalid(
                "methods",
                "exact needs the free, linear_field or harmonic potential",
            ));
        }
        if self.beam.samples < 3 {
            return Err(invalid("beam.samples", "need at least 3"));
        }
        if matches!(self.beam.alpha_box, Some(a) if !(a[1] > a[0])) {
            return Err(invalid("beam.alpha_box", "must be an increasing pair"));
        }
        if !(self.beam.sweep_alphas[1] > self.beam.sweep_alphas[0]) || self.beam.sweep_points < 2 {
            return Err(invalid(
                "beam.sweep_alphas",
                "need an increasing pair and at least 2 points",
            ));
        }
        let mut binary = false;
        for (k, f) in self.output.formats.iter().enumerate() {
            match f.as_str() {
                "csv" => {}
                "bin" => binary = true,
                other => {
                    return Err(invalid(
                        &format!("output.formats[{k}]"),
                        format!("unknown format '{other}'"),
                    ))
                }
            }
        }
        Ok(Scenario {
            model,
            oracle,
            grid,
            quadrature,
            methods,
            binary,
            config: self,
        })
    }
}
