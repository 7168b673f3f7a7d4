//! Method dispatch, comparison reports and the hbar sweep.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use psdyn::beam::{beam_field, build_beam_cache, manifold_phase_discrepancy, LagrangianChart};
use psdyn::exact::GaussianState;
use psdyn::{
    error_norms, eval_fourier_integral, exact_field, exact_value, propagate_aga, propagate_frozen,
    wave_packet_transform, ComplexField, Error, FourierProblem, GaussianWkb, Method,
    TransformQuadrature, WkbInitialData,
};
use serde::Serialize;

use crate::config::Scenario;
use crate::fieldio::{write_binary, write_csv};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FieldRecord {
    pub method: String,
    pub t: f64,
    pub runtime_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// fraction of grid points inside the beam tube
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    /// smallest rank of Im D C^{-1} over the beam samples
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub method_a: String,
    pub method_b: String,
    pub t: f64,
    pub rel_l2: f64,
    pub sup: f64,
    pub phase_sup: f64,
    /// runtime of method_a
    pub runtime_ms: f64,
    /// compared on the beam tube only
    pub masked: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub potential: String,
    pub hbar: f64,
    pub fields: Vec<FieldRecord>,
    pub comparisons: Vec<Comparison>,
}

impl RunSummary {
    /// The first recorded method failure, if any.
    pub fn failure(&self) -> Option<&str> {
        self.fields.iter().find_map(|f| f.error.as_deref())
    }
}

struct Computed {
    field: ComplexField,
    mask: Option<Vec<bool>>,
    coverage: Option<f64>,
    im_rank: Option<usize>,
}

fn initial_data() -> GaussianWkb {
    GaussianWkb::scenario()
}

fn compute(s: &Scenario, method: Method, t: f64) -> psdyn::Result<Computed> {
    let cfg = &s.config;
    let (hbar, dt) = (cfg.hbar, cfg.integrator.dt);
    let data = initial_data();
    let plain = |field| Computed {
        field,
        mask: None,
        coverage: None,
        im_rank: None,
    };
    // transform of psi_0 in closed form (a Gaussian)
    let psi0 = |q: f64, p: f64| exact_value(psdyn::ScenarioKind::Free, q, p, 0.0, hbar);
    match method {
        Method::Exact => {
            let kind = s
                .oracle
                .ok_or_else(|| Error::Unsupported("no closed form for this potential".into()))?;
            exact_field(kind, &s.grid, t, hbar).map(plain)
        }
        Method::Aga => {
            propagate_aga(&psi0, &s.grid, t, &s.model, hbar, &s.quadrature, dt).map(plain)
        }
        Method::Frozen => {
            propagate_frozen(&psi0, &s.grid, t, &s.model, hbar, &s.quadrature, dt).map(plain)
        }
        Method::Fourier => {
            let problem = FourierProblem::new(&s.model, &data, t, hbar, dt)?;
            eval_fourier_integral(&problem, &s.grid, &s.quadrature).map(plain)
        }
        Method::Beam => {
            let data: Arc<dyn WkbInitialData> = Arc::new(data);
            let chart = match cfg.beam.alpha_box {
                Some([a, b]) => LagrangianChart::new(data, (a, b))?,
                None => LagrangianChart::over_support(data)?,
            };
            let cache = build_beam_cache(&chart, cfg.beam.samples, t, dt, &s.model)?;
            let b = beam_field(&cache, &s.grid, t, hbar)?;
            Ok(Computed {
                field: b.field,
                mask: Some(b.mask),
                coverage: Some(b.coverage),
                im_rank: Some(cache.min_im_rank),
            })
        }
        Method::Transform => {
            let mut f = if t == 0.0 {
                let psi = |x: f64| data.psi0(&[x], hbar);
                wave_packet_transform(&psi, &s.grid, hbar, &TransformQuadrature::for_wkb(&data))?
            } else {
                let kind = s.oracle.ok_or_else(|| {
                    Error::Unsupported(
                        "transform at t > 0 needs the closed-form state of a built-in potential"
                            .into(),
                    )
                })?;
                let b = s.quadrature;
                let mut quad = TransformQuadrature {
                    xmin: b.qmin,
                    xmax: b.qmax,
                    max_momentum: b.pmin.abs().max(b.pmax.abs()),
                };
                let state = GaussianState::scenario_initial(hbar).evolve(kind, t)?;
                let psi = |x: f64| state.value(x, hbar);
                // the evolved state spreads; grow the box as the tail check suggests
                let mut attempt = 0;
                loop {
                    match wave_packet_transform(&psi, &s.grid, hbar, &quad) {
                        Err(Error::TailMass { suggested, .. }) if attempt < 3 => {
                            quad.xmin = suggested[0];
                            quad.xmax = suggested[1];
                            attempt += 1;
                        }
                        other => break other?,
                    }
                }
            };
            f.time = t;
            Ok(plain(f))
        }
    }
}

fn file_stem(method: Method, t: f64) -> String {
    format!("{}_t{t}", method.as_str())
}

fn masked(field: &ComplexField, mask: &[bool]) -> ComplexField {
    let mut out = field.clone();
    for (v, m) in out.values.iter_mut().zip(mask) {
        if !m {
            *v = psdyn::Complex64::new(0.0, 0.0);
        }
    }
    out
}

/// Runs every (method, time) pair, writes field files and `report.toml` into `out_dir`.
pub fn run(s: &Scenario, out_dir: &Path) -> Result<RunSummary, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let cfg = &s.config;
    let mut fields = Vec::new();
    let mut comparisons = Vec::new();
    for &t in &cfg.times {
        let reference = match s.oracle {
            Some(kind) => Some(exact_field(kind, &s.grid, t, cfg.hbar)?),
            None => None,
        };
        for &method in &s.methods {
            let start = Instant::now();
            let result = compute(s, method, t);
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let mut record = FieldRecord {
                method: method.as_str().into(),
                t,
                runtime_ms,
                file: None,
                coverage: None,
                im_rank: None,
                error: None,
            };
            match result {
                Err(e) => record.error = Some(e.to_string()),
                Ok(c) => {
                    let stem = file_stem(method, t);
                    let csv = PathBuf::from(format!("{stem}.csv"));
                    write_csv(&c.field, &out_dir.join(&csv))?;
                    if s.binary {
                        write_binary(&c.field, &out_dir.join(format!("{stem}.bin")))?;
                    }
                    record.file = Some(csv.display().to_string());
                    record.coverage = c.coverage;
                    record.im_rank = c.im_rank;
                    if let (Some(ex), true) = (&reference, method != Method::Exact) {
                        let ex = match &c.mask {
                            Some(m) => masked(ex, m),
                            None => ex.clone(),
                        };
                        let e = error_norms(&c.field, &ex)?;
                        comparisons.push(Comparison {
                            method_a: method.as_str().into(),
                            method_b: Method::Exact.as_str().into(),
                            t,
                            rel_l2: e.rel_l2,
                            sup: e.sup,
                            phase_sup: e.phase_sup,
                            runtime_ms,
                            masked: c.mask.is_some(),
                        });
                    }
                }
            }
            fields.push(record);
        }
    }
    let summary = RunSummary {
        potential: cfg.potential.kind.clone(),
        hbar: cfg.hbar,
        fields,
        comparisons,
    };
    std::fs::write(
        out_dir.join("report.toml"),
        toml::to_string(&summary).map_err(|e| CliError::Numerical(e.to_string()))?,
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub hbar: f64,
    pub discrepancy: f64,
    /// D(hbar) / D(2 hbar); absent for the largest hbar
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub potential: String,
    pub pass: bool,
    pub rows: Vec<SweepRow>,
}

pub const RATIO_BAND: (f64, f64) = (0.35, 0.65);

/// On-manifold beam phase discrepancy for each hbar (descending, halving) and time > 0.
pub fn sweep_hbar(s: &Scenario, hbars: &[f64], out_dir: &Path) -> Result<SweepReport, CliError> {
    if hbars.len() < 2 {
        return Err(CliError::Validation(
            "hbars: need at least two values".into(),
        ));
    }
    for (k, w) in hbars.windows(2).enumerate() {
        if !(w[1] > 0.0) || ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(CliError::Validation(format!(
                "hbars[{}]: consecutive values must halve",
                k + 1
            )));
        }
    }
    let kind = s.oracle.ok_or_else(|| {
        CliError::Validation("potential: no exact oracle for this potential".into())
    })?;
    std::fs::create_dir_all(out_dir)?;
    let cfg = &s.config;
    let data: Arc<dyn WkbInitialData> = Arc::new(initial_data());
    let chart = match cfg.beam.alpha_box {
        Some([a, b]) => LagrangianChart::new(data, (a, b))?,
        None => LagrangianChart::over_support(data)?,
    };
    let [lo, hi] = cfg.beam.sweep_alphas;
    let n = cfg.beam.sweep_points;
    let alphas: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    let mut rows = Vec::new();
    let mut pass = true;
    for &t in cfg.times.iter().filter(|t| **t > 0.0) {
        let cache = build_beam_cache(&chart, cfg.beam.samples, t, cfg.integrator.dt, &s.model)?;
        let mut prev: Option<f64> = None;
        for &hbar in hbars {
            let exact = move |q: f64, p: f64| exact_value(kind, q, p, t, hbar);
            let d = manifold_phase_discrepancy(&cache, &exact, &alphas, hbar)?;
            let ratio = prev.map(|p| d / p);
            if let Some(r) = ratio {
                pass &= (RATIO_BAND.0..=RATIO_BAND.1).contains(&r);
            }
            rows.push(SweepRow {
                t,
                hbar,
                discrepancy: d,
                ratio,
            });
            prev = Some(d);
        }
    }
    if rows.is_empty() {
        return Err(CliError::Validation(
            "times: the sweep needs a time > 0".into(),
        ));
    }
    let report = SweepReport {
        potential: cfg.potential.kind.clone(),
        pass,
        rows,
    };
    std::fs::write(
        out_dir.join("sweep.toml"),
        toml::to_string(&report).map_err(|e| CliError::Numerical(e.to_string()))?,
    )?;
    Ok(report)
}
