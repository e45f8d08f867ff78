//! Parameter sweeps over `(k, λ)`, landmark extraction, and the paired
//! quantum/classical comparison report.
//!
//! A sweep fills quantum and classical metric columns from selectable
//! engines, attaches scalar curvature computed by finite differences on
//! the same grid, and serializes everything to a fixed-schema CSV. Slices
//! with a single value on one axis get an internal nine-point band on
//! that axis so curvature stencils have full-order support at the output
//! point; the k axis is split at `k = 0` because the two sides are
//! structurally different and masked points must not leak across.
//! Curvature is reported only where every nested stencil is full-order —
//! two nodes in from every grid edge — because the metric determinant is
//! a near-cancellation over much of the plane and lower-order edge
//! stencils amplify into garbage there.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cpt::{cmt_series, Branch, CmtSeries};
use crate::fock::{build_operators, converged_spectrum, SolveOptions};
use crate::geometry::{
    find_extrema, scalar_curvature, ExtremumKind, MetricField, ParamGrid, DET_FLOOR,
};
use crate::model::{SystemParams, Well};
use crate::orbit::{cmt_numeric, orbit_fourier};
use crate::qmt::{qmt_sum, transition_elements, MetricValue};
use crate::tables::{self, ActionMode, SeriesTables};
use crate::{Error, Result};

/// Step used for internal curvature bands around fixed axis values.
pub const DEFAULT_BAND_STEP: f64 = 0.005;
/// Threshold above which a truncation/convergence tail sets `tail_warn`.
pub const TAIL_WARN: f64 = 1e-6;
/// Exact column schema of the sweep CSV.
pub const CSV_HEADER: &str =
    "k,lambda,g11_q,g12_q,g22_q,det_q,R_q,g11_cl,g12_cl,g22_cl,det_cl,R_cl,tail_q,tail_cl,flags";

/// Sweep topology; must agree with which axes carry ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    KSweep,
    LambdaSweep,
    Grid,
}

/// One axis of a sweep: either a fixed value or a `min/max/step` range.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl AxisConfig {
    /// A single-value axis.
    pub fn fixed(v: f64) -> Self {
        AxisConfig { fixed: Some(v), ..Default::default() }
    }

    /// A uniformly stepped axis.
    pub fn range(min: f64, max: f64, step: f64) -> Self {
        AxisConfig { fixed: None, min: Some(min), max: Some(max), step: Some(step) }
    }

    /// True when the axis carries a range rather than a fixed value.
    pub fn is_range(&self) -> bool {
        self.fixed.is_none()
    }

    fn values(&self, name: &str) -> Result<Vec<f64>> {
        if let Some(v) = self.fixed {
            if self.min.is_some() || self.max.is_some() || self.step.is_some() {
                return Err(Error::Usage(format!(
                    "{name} axis: fixed value and range fields are mutually exclusive"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Usage(format!("{name} axis: fixed value must be finite")));
            }
            return Ok(vec![v]);
        }
        let (min, max, step) = match (self.min, self.max, self.step) {
            (Some(a), Some(b), Some(h)) => (a, b, h),
            _ => {
                return Err(Error::Usage(format!(
                    "{name} axis needs either a fixed value or min/max/step"
                )))
            }
        };
        if !(min.is_finite() && max.is_finite() && step.is_finite() && step > 0.0) {
            return Err(Error::Usage(format!("{name} axis: step must be positive and finite")));
        }
        if max < min {
            return Err(Error::Usage(format!("{name} axis range [{min}, {max}] is empty")));
        }
        let n = ((max - min) / step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| min + step * i as f64).collect())
    }
}

/// Engine filling the quantum metric columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantumEngine {
    /// Spectral sum over a converged oscillator basis.
    #[default]
    Numeric,
    /// Pinned perturbative series (`k > 0` only; other points are masked).
    Series,
    /// Leave the quantum columns empty.
    Off,
}

/// Engine filling the classical metric columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassicalEngine {
    /// Pinned perturbative series.
    #[default]
    Series,
    /// Orbit integration plus Fourier analysis (requires a literal action).
    Numeric,
    /// Canonical perturbation expansion collected at runtime.
    Cpt,
    /// Leave the classical columns empty.
    Off,
}

fn default_hbar() -> f64 {
    1.0
}
fn default_action() -> ActionMode {
    ActionMode::Quantized
}
fn default_m_max() -> usize {
    crate::qmt::DEFAULT_M_MAX
}
fn default_orbit_m_max() -> usize {
    crate::orbit::DEFAULT_M_MAX
}
fn default_log2_samples() -> u32 {
    crate::orbit::DEFAULT_LOG2_SAMPLES
}
fn default_basis_start() -> usize {
    120
}
fn default_basis_max() -> usize {
    500
}
fn default_tolerance() -> f64 {
    1e-9
}
fn default_band_step() -> f64 {
    DEFAULT_BAND_STEP
}

/// Full description of a sweep; deserializable from a JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: SweepMode,
    pub k: AxisConfig,
    pub lambda: AxisConfig,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default)]
    pub quantum: QuantumEngine,
    #[serde(default)]
    pub classical: ClassicalEngine,
    /// Action handling for the classical engines.
    #[serde(default = "default_action")]
    pub action: ActionMode,
    /// Number of transition terms kept in the quantum spectral sum.
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    /// Number of Fourier harmonics kept by the classical numeric engine.
    #[serde(default = "default_orbit_m_max")]
    pub orbit_m_max: usize,
    #[serde(default = "default_log2_samples")]
    pub log2_samples: u32,
    /// Expansion order for the cpt engine; `None` uses the branch default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default = "default_basis_start")]
    pub basis_start: usize,
    #[serde(default = "default_basis_max")]
    pub basis_max: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Step of internal curvature bands around fixed axes.
    #[serde(default = "default_band_step")]
    pub band_step: f64,
    /// Optional output path hint for drivers; unused by the library.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl SweepConfig {
    /// Minimal config for the given mode with library defaults elsewhere.
    pub fn new(mode: SweepMode, k: AxisConfig, lambda: AxisConfig) -> Self {
        SweepConfig {
            mode,
            k,
            lambda,
            hbar: default_hbar(),
            quantum: QuantumEngine::default(),
            classical: ClassicalEngine::default(),
            action: default_action(),
            m_max: default_m_max(),
            orbit_m_max: default_orbit_m_max(),
            log2_samples: default_log2_samples(),
            order: None,
            basis_start: default_basis_start(),
            basis_max: default_basis_max(),
            tolerance: default_tolerance(),
            band_step: default_band_step(),
            output: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let want = |axis: &AxisConfig, range: bool, name: &str| -> Result<()> {
            if axis.is_range() != range {
                let shape = if range { "a min/max/step range" } else { "a fixed value" };
                return Err(Error::Usage(format!(
                    "{:?} mode requires the {name} axis to be {shape}",
                    self.mode
                )));
            }
            Ok(())
        };
        match self.mode {
            SweepMode::KSweep => {
                want(&self.k, true, "k")?;
                want(&self.lambda, false, "lambda")?;
            }
            SweepMode::LambdaSweep => {
                want(&self.k, false, "k")?;
                want(&self.lambda, true, "lambda")?;
            }
            SweepMode::Grid => {
                want(&self.k, true, "k")?;
                want(&self.lambda, true, "lambda")?;
            }
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::Usage(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.band_step.is_finite() && self.band_step > 0.0) {
            return Err(Error::Usage(format!(
                "band_step must be positive, got {}",
                self.band_step
            )));
        }
        if self.m_max == 0 {
            return Err(Error::Usage("m_max must be at least 1".into()));
        }
        if self.classical == ClassicalEngine::Numeric
            && !matches!(self.action, ActionMode::Literal(_))
        {
            return Err(Error::Usage(
                "the classical numeric engine needs a literal action (e.g. \"action\": {\"literal\": 0.5})"
                    .into(),
            ));
        }
        if let ActionMode::Literal(a) = self.action {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Usage(format!("literal action must be positive, got {a}")));
            }
        }
        Ok(())
    }
}

/// One CSV row of a sweep. `None` fields serialize as empty.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub k: f64,
    pub lambda: f64,
    pub g11_q: Option<f64>,
    pub g12_q: Option<f64>,
    pub g22_q: Option<f64>,
    pub det_q: Option<f64>,
    pub r_q: Option<f64>,
    pub g11_cl: Option<f64>,
    pub g12_cl: Option<f64>,
    pub g22_cl: Option<f64>,
    pub det_cl: Option<f64>,
    pub r_cl: Option<f64>,
    pub tail_q: Option<f64>,
    pub tail_cl: Option<f64>,
    pub flags: Vec<String>,
}

/// Result of a sweep in output-row order (k outer, λ inner).
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub mode: SweepMode,
    pub k_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

fn fmt_field(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.11e}"),
        None => String::new(),
    }
}

/// Serializes a sweep to the fixed CSV schema; 12 significant digits per
/// value so identical configs produce byte-identical files.
pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 + result.rows.len() * 220);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let fields = [
            fmt_field(Some(row.k)),
            fmt_field(Some(row.lambda)),
            fmt_field(row.g11_q),
            fmt_field(row.g12_q),
            fmt_field(row.g22_q),
            fmt_field(row.det_q),
            fmt_field(row.r_q),
            fmt_field(row.g11_cl),
            fmt_field(row.g12_cl),
            fmt_field(row.g22_cl),
            fmt_field(row.det_cl),
            fmt_field(row.r_cl),
            fmt_field(row.tail_q),
            fmt_field(row.tail_cl),
            row.flags.join(";"),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Extends a single-point axis to a nine-point centered band so both the
/// inner metric derivatives and the outer bracket derivatives of the
/// curvature are full-order at the original point (the metric determinant
/// is a near-cancellation over much of the parameter plane, which
/// amplifies stencil error by orders of magnitude; edge stencils anywhere
/// inside the nested differentiation are not good enough). The step is
/// shrunk near `center = 0` so the band never changes sign. Returns
/// `(axis values, index of the original point)`.
fn band_axis(center: f64, h: f64) -> (Vec<f64>, usize) {
    if center == 0.0 {
        return (vec![center], 0);
    }
    let h = h.min(center.abs() / 8.0);
    ((0..9).map(|i| center + h * (i as f64 - 4.0)).collect(), 4)
}

/// Per-engine metric evaluation at one parameter point. `Ok(None)` masks
/// the point (outside the engine's domain); hard failures propagate.
struct Engines<'a> {
    config: &'a SweepConfig,
    tables: &'static SeriesTables,
    /// Warm-start size for the spectral engine.
    basis_hint: usize,
    /// Collected expansions for the cpt engine, per branch.
    cpt_single: Option<CmtSeries>,
    cpt_double: Option<CmtSeries>,
}

impl<'a> Engines<'a> {
    fn new(config: &'a SweepConfig, ks: &[f64]) -> Result<Self> {
        let mut cpt_single = None;
        let mut cpt_double = None;
        if config.classical == ClassicalEngine::Cpt {
            if ks.iter().any(|&k| k > 0.0) {
                let order = config.order.unwrap_or(Branch::SingleWell.default_order());
                cpt_single = Some(cmt_series(Branch::SingleWell, order)?);
            }
            if ks.iter().any(|&k| k < 0.0) {
                let order = config.order.unwrap_or(Branch::DoubleWell.default_order());
                cpt_double = Some(cmt_series(Branch::DoubleWell, order)?);
            }
        }
        Ok(Engines {
            config,
            tables: tables::builtin(),
            basis_hint: config.basis_start,
            cpt_single,
            cpt_double,
        })
    }

    fn params(&self, k: f64, lambda: f64) -> Result<SystemParams> {
        SystemParams::with_hbar(k, lambda, self.config.hbar)
    }

    fn quantum(&mut self, k: f64, lambda: f64) -> Result<Option<(MetricValue, f64)>> {
        match self.config.quantum {
            QuantumEngine::Off => Ok(None),
            QuantumEngine::Series => {
                if k <= 0.0 {
                    return Ok(None);
                }
                let params = self.params(k, lambda)?;
                let s = tables::qmt_metric_series(&params, self.tables)?;
                Ok(Some((s.metric, s.tail())))
            }
            QuantumEngine::Numeric => {
                let params = self.params(k, lambda)?;
                let opts = SolveOptions {
                    tolerance: self.config.tolerance,
                    requested: self.config.m_max + 1,
                };
                let (basis, spectrum) =
                    converged_spectrum(&params, self.basis_hint, self.config.basis_max, &opts)?;
                self.basis_hint = basis.size;
                let ops = build_operators(&basis, &params);
                let data = transition_elements(&spectrum, &ops, self.config.m_max)?;
                let report = qmt_sum(&data);
                Ok(Some((report.metric, report.tail)))
            }
        }
    }

    fn classical(&mut self, k: f64, lambda: f64) -> Result<Option<(MetricValue, f64)>> {
        let masked = |r: Result<(MetricValue, f64)>| match r {
            Ok(v) => Ok(Some(v)),
            // Outside the engine's domain (wrong sign of k, action beyond
            // the well capacity, failed orbit): mask the point.
            Err(Error::Domain(_)) | Err(Error::Convergence(_)) => Ok(None),
            Err(e) => Err(e),
        };
        match self.config.classical {
            ClassicalEngine::Off => Ok(None),
            ClassicalEngine::Series => {
                let params = self.params(k, lambda)?;
                masked(
                    tables::cmt_metric_series(&params, self.config.action, self.tables)
                        .map(|s| (s.metric, s.tail())),
                )
            }
            ClassicalEngine::Cpt => {
                let series = if k > 0.0 {
                    self.cpt_single.as_ref()
                } else if k < 0.0 {
                    self.cpt_double.as_ref()
                } else {
                    None
                };
                let Some(series) = series else { return Ok(None) };
                let params = self.params(k, lambda)?;
                masked(
                    tables::eval_with_tail(series, &params, self.config.action, &self.tables.f)
                        .map(|s| (s.metric, s.tail())),
                )
            }
            ClassicalEngine::Numeric => {
                let ActionMode::Literal(action) = self.config.action else {
                    return Err(Error::Usage("numeric classical engine needs a literal action".into()));
                };
                let params = self.params(k, lambda)?;
                let well = if k < 0.0 { Some(Well::Right) } else { None };
                masked(
                    orbit_fourier(
                        &params,
                        action,
                        well,
                        self.config.orbit_m_max,
                        self.config.log2_samples,
                    )
                    .map(|(_, fd)| {
                        let report = cmt_numeric(&fd);
                        (report.metric, report.tail)
                    }),
                )
            }
        }
    }
}

/// Curvature of a metric field, split into maximal same-sign runs of the
/// k axis (a `k = 0` node joins the non-positive run). Runs shorter than
/// five nodes stay masked, as do the two nodes nearest every grid edge:
/// the edge stencils are lower-order and the metric determinant is a
/// near-cancellation over much of the plane, which amplifies their error
/// past the point of usefulness. `None` marks nodes without trustworthy
/// curvature.
fn curvature_values(field: &MetricField) -> Vec<Option<f64>> {
    let grid = &field.grid;
    let n = grid.len();
    let mut out = vec![None; n];
    // Both nested derivative passes must run on full-order centered stencils:
    // the determinant cancellation near the harmonic limit amplifies one-sided
    // stencil error by ~2 orders of magnitude. That needs 4 nodes of margin on
    // every side, so axes shorter than 9 nodes yield no reportable curvature.
    if grid.nk() < 9 || grid.nl() < 9 {
        return out;
    }
    let ks = grid.k_values();
    let runs: Vec<(usize, usize)> = if ks[0] < 0.0 && ks[ks.len() - 1] > 0.0 {
        let split = ks.partition_point(|&k| k <= 0.0);
        vec![(0, split), (split, ks.len())]
    } else {
        vec![(0, ks.len())]
    };
    for (lo, hi) in runs {
        if hi - lo < 9 {
            continue;
        }
        let sub_grid = match ParamGrid::new(ks[lo..hi].to_vec(), grid.lambda_values().to_vec()) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let mut sub = MetricField {
            grid: sub_grid,
            g11: Vec::with_capacity((hi - lo) * grid.nl()),
            g12: Vec::with_capacity((hi - lo) * grid.nl()),
            g22: Vec::with_capacity((hi - lo) * grid.nl()),
            mask: Vec::with_capacity((hi - lo) * grid.nl()),
        };
        for i in lo..hi {
            for j in 0..grid.nl() {
                let idx = grid.idx(i, j);
                sub.g11.push(field.g11[idx]);
                sub.g12.push(field.g12[idx]);
                sub.g22.push(field.g22[idx]);
                sub.mask.push(field.mask[idx]);
            }
        }
        let Ok(curv) = scalar_curvature(&sub, DET_FLOOR) else { continue };
        for i in lo + 4..hi - 4 {
            for j in 4..grid.nl() - 4 {
                let sub_idx = sub.grid.idx(i - lo, j);
                if !curv.mask[sub_idx] {
                    out[grid.idx(i, j)] = Some(curv.r[sub_idx]);
                }
            }
        }
    }
    out
}

/// Runs a sweep. Classical engines are masked point-by-point outside their
/// domain; a failure of the quantum spectral engine aborts the sweep with
/// the underlying convergence error.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let ks_out = config.k.values("k")?;
    let ls_out = config.lambda.values("lambda")?;
    if let Some(&l) = ls_out.iter().find(|&&l| l <= 0.0) {
        return Err(Error::Usage(format!("lambda must be positive, got {l}")));
    }

    // Support axes: single-point axes grow a curvature band.
    let (ks_sup, k_out_base) = if ks_out.len() == 1 {
        band_axis(ks_out[0], config.band_step)
    } else {
        (ks_out.clone(), 0)
    };
    let (ls_sup, l_out_base) = if ls_out.len() == 1 {
        band_axis(ls_out[0], config.band_step)
    } else {
        (ls_out.clone(), 0)
    };

    let grid = ParamGrid::new(ks_sup.clone(), ls_sup.clone())?;
    let mut engines = Engines::new(config, &ks_sup)?;

    let n = grid.len();
    let mut tail_q = vec![None; n];
    let mut tail_cl = vec![None; n];

    // Quantum field over the support grid.
    let mut q_err = None;
    let q_field = if config.quantum != QuantumEngine::Off {
        let mut idx = 0usize;
        let field = MetricField::evaluate(grid.clone(), |k, l| {
            let slot = idx;
            idx += 1;
            if q_err.is_some() {
                return None;
            }
            match engines.quantum(k, l) {
                Ok(Some((m, t))) => {
                    tail_q[slot] = Some(t);
                    Some(m)
                }
                Ok(None) => None,
                Err(e) => {
                    q_err = Some(e);
                    None
                }
            }
        });
        if let Some(e) = q_err {
            return Err(e);
        }
        Some(field)
    } else {
        None
    };

    let mut c_err = None;
    let c_field = if config.classical != ClassicalEngine::Off {
        let mut idx = 0usize;
        let field = MetricField::evaluate(grid.clone(), |k, l| {
            let slot = idx;
            idx += 1;
            if c_err.is_some() {
                return None;
            }
            match engines.classical(k, l) {
                Ok(Some((m, t))) => {
                    tail_cl[slot] = Some(t);
                    Some(m)
                }
                Ok(None) => None,
                Err(e) => {
                    c_err = Some(e);
                    None
                }
            }
        });
        if let Some(e) = c_err {
            return Err(e);
        }
        Some(field)
    } else {
        None
    };

    let r_q = q_field.as_ref().map(curvature_values);
    let r_cl = c_field.as_ref().map(curvature_values);

    // Step used by the near_k0 flag.
    let near_step = if ks_out.len() > 1 {
        ks_out[1] - ks_out[0]
    } else if ks_sup.len() > 1 {
        ks_sup[1] - ks_sup[0]
    } else {
        config.band_step
    };

    let mut rows = Vec::with_capacity(ks_out.len() * ls_out.len());
    for (i_out, &k) in ks_out.iter().enumerate() {
        for (j_out, &lambda) in ls_out.iter().enumerate() {
            let i = k_out_base + if ks_out.len() == 1 { 0 } else { i_out };
            let j = l_out_base + if ls_out.len() == 1 { 0 } else { j_out };
            let idx = grid.idx(i, j);

            let qm = q_field.as_ref().and_then(|f| f.value(i, j));
            let cm = c_field.as_ref().and_then(|f| f.value(i, j));
            let rq = r_q.as_ref().and_then(|r| r[idx]);
            let rc = r_cl.as_ref().and_then(|r| r[idx]);

            let mut flags = Vec::new();
            if k.abs() < 2.0 * near_step {
                flags.push("near_k0".to_string());
            }
            let tq = tail_q[idx];
            let tc = tail_cl[idx];
            if tq.is_some_and(|t| t > TAIL_WARN) || tc.is_some_and(|t| t > TAIL_WARN) {
                flags.push("tail_warn".to_string());
            }
            let q_active = config.quantum != QuantumEngine::Off;
            let c_active = config.classical != ClassicalEngine::Off;
            if (q_active && rq.is_none()) || (c_active && rc.is_none()) {
                flags.push("masked_curvature".to_string());
            }

            rows.push(SweepRow {
                k,
                lambda,
                g11_q: qm.map(|m| m.g11),
                g12_q: qm.map(|m| m.g12),
                g22_q: qm.map(|m| m.g22),
                det_q: qm.map(|m| m.det()),
                r_q: rq,
                g11_cl: cm.map(|m| m.g11),
                g12_cl: cm.map(|m| m.g12),
                g22_cl: cm.map(|m| m.g22),
                det_cl: cm.map(|m| m.det()),
                r_cl: rc,
                tail_q: if qm.is_some() { tq } else { None },
                tail_cl: if cm.is_some() { tc } else { None },
                flags,
            });
        }
    }

    Ok(SweepResult { mode: config.mode, k_values: ks_out, lambda_values: ls_out, rows })
}

/// A labeled extremum of one sweep column.
#[derive(Debug, Clone, Serialize)]
pub struct Landmark {
    pub column: String,
    pub kind: ExtremumKind,
    pub location: f64,
    pub value: f64,
    pub step: f64,
}

fn column_getter(name: &str) -> Result<fn(&SweepRow) -> Option<f64>> {
    Ok(match name {
        "g11_q" => |r: &SweepRow| r.g11_q,
        "g12_q" => |r: &SweepRow| r.g12_q,
        "g22_q" => |r: &SweepRow| r.g22_q,
        "det_q" => |r: &SweepRow| r.det_q,
        "R_q" => |r: &SweepRow| r.r_q,
        "g11_cl" => |r: &SweepRow| r.g11_cl,
        "g12_cl" => |r: &SweepRow| r.g12_cl,
        "g22_cl" => |r: &SweepRow| r.g22_cl,
        "det_cl" => |r: &SweepRow| r.det_cl,
        "R_cl" => |r: &SweepRow| r.r_cl,
        other => {
            return Err(Error::Usage(format!(
                "unknown landmark column {other:?}; valid: g11_q g12_q g22_q det_q R_q \
                 g11_cl g12_cl g22_cl det_cl R_cl"
            )))
        }
    })
}

/// Finds interior extrema of the named columns along a 1-D sweep.
pub fn landmarks(result: &SweepResult, columns: &[String]) -> Result<Vec<Landmark>> {
    let xs: &[f64] = match result.mode {
        SweepMode::KSweep => &result.k_values,
        SweepMode::LambdaSweep => &result.lambda_values,
        SweepMode::Grid => {
            return Err(Error::Usage("landmarks need a 1-D sweep, not a grid".into()))
        }
    };
    if xs.len() < 3 {
        return Err(Error::Usage(format!(
            "landmark detection needs at least 3 points, sweep has {}",
            xs.len()
        )));
    }
    if xs.len() != result.rows.len() {
        return Err(Error::Usage("sweep rows do not form a single slice".into()));
    }
    let step = xs[1] - xs[0];

    let mut out = Vec::new();
    for column in columns {
        let get = column_getter(column)?;
        let ys: Vec<f64> = result.rows.iter().map(|r| get(r).unwrap_or(f64::NAN)).collect();
        let mask: Vec<bool> = result.rows.iter().map(|r| get(r).is_none()).collect();
        for ex in find_extrema(xs, &ys, Some(&mask)) {
            out.push(Landmark {
                column: column.clone(),
                kind: ex.kind,
                location: ex.location,
                value: ex.value,
                step,
            });
        }
    }
    Ok(out)
}

/// Options for the paired quantum/classical comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareOptions {
    /// Number of paired rows to emit.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Classical action; defaults to the ground-state identification
    /// `f₁·ħ = ħ/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<f64>,
    #[serde(default = "default_basis_start")]
    pub basis_start: usize,
    #[serde(default = "default_basis_max")]
    pub basis_max: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_log2_samples")]
    pub log2_samples: u32,
}

fn default_pairs() -> usize {
    10
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            pairs: default_pairs(),
            action: None,
            basis_start: default_basis_start(),
            basis_max: default_basis_max(),
            tolerance: default_tolerance(),
            log2_samples: default_log2_samples(),
        }
    }
}

/// One paired row: quantum transition data for level `m` next to classical
/// Fourier data for harmonic `m'`. β′ components carry the √2
/// normalization that makes `Σ Re β′_iβ′_j*/(m'ω)²` the classical metric.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub m: usize,
    pub m_prime: usize,
    /// `E_m − E_0`.
    pub gap: f64,
    /// `m'·ω` at the comparison action.
    pub classical_gap: f64,
    pub b1: f64,
    pub b2: f64,
    pub beta1p_re: f64,
    pub beta1p_im: f64,
    pub beta2p_re: f64,
    pub beta2p_im: f64,
    /// Quantum per-level metric terms `B_iB_j/(E_m−E_0)²`.
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    /// Classical per-harmonic metric terms `Re[β′_iβ′_j*]/(m'ω)²`.
    pub cg11: f64,
    pub cg12: f64,
    pub cg22: f64,
}

/// Paired comparison between the spectral sum and the orbit Fourier data.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub k: f64,
    pub lambda: f64,
    pub hbar: f64,
    pub action: f64,
    pub omega: f64,
    /// True when the `m → m/2` double-well pairing was applied.
    pub doublet_paired: bool,
    pub rows: Vec<CompareRow>,
}

/// Builds the comparison report. For `k < 0` the quantum spectrum must be
/// doublet-structured (the ground splitting below `10⁻⁶` of the first
/// gap); quantum levels `m = 2j` then pair with classical harmonics
/// `m' = j`. For `k > 0` the pairing is the identity on even indices.
pub fn compare(params: &SystemParams, opts: &CompareOptions) -> Result<CompareReport> {
    if opts.pairs == 0 {
        return Err(Error::Usage("compare needs at least one pair".into()));
    }
    let action = match opts.action {
        Some(a) if a.is_finite() && a > 0.0 => a,
        Some(a) => return Err(Error::Usage(format!("action must be positive, got {a}"))),
        None => tables::builtin().f[1] * params.hbar,
    };
    let double = params.k < 0.0;
    let m_max = 2 * opts.pairs;

    let solve = SolveOptions { tolerance: opts.tolerance, requested: m_max + 1 };
    let (basis, spectrum) =
        converged_spectrum(params, opts.basis_start, opts.basis_max, &solve)?;
    let ops = build_operators(&basis, params);
    let data = transition_elements(&spectrum, &ops, m_max)?;

    if double {
        let first_gap = spectrum.energies[2] - spectrum.energies[0];
        let splitting = spectrum.energies[1] - spectrum.energies[0];
        if !(first_gap > 0.0) || splitting > 1e-6 * first_gap {
            return Err(Error::Domain(format!(
                "spectrum is not doublet-structured: ground splitting {splitting:.3e} \
                 vs first gap {first_gap:.3e}"
            )));
        }
    }

    let orbit_m_max = if double { opts.pairs } else { m_max };
    let well = if double { Some(Well::Right) } else { None };
    let (_, fourier) =
        orbit_fourier(params, action, well, orbit_m_max, opts.log2_samples)?;
    let omega = fourier.omega;

    let sqrt2 = 2.0_f64.sqrt();
    let mut rows = Vec::with_capacity(opts.pairs);
    for j in 1..=opts.pairs {
        let m = 2 * j;
        let m_prime = if double { j } else { m };
        let gap = data.gaps[m - 1];
        let b1 = data.b1[m - 1];
        let b2 = data.b2[m - 1];
        let beta1p: Complex64 = fourier.beta1[m_prime] * sqrt2;
        let beta2p: Complex64 = fourier.beta2[m_prime] * sqrt2;
        let cg_denom = (m_prime as f64 * omega).powi(2);
        rows.push(CompareRow {
            m,
            m_prime,
            gap,
            classical_gap: m_prime as f64 * omega,
            b1,
            b2,
            beta1p_re: beta1p.re,
            beta1p_im: beta1p.im,
            beta2p_re: beta2p.re,
            beta2p_im: beta2p.im,
            g11: b1 * b1 / (gap * gap),
            g12: b1 * b2 / (gap * gap),
            g22: b2 * b2 / (gap * gap),
            cg11: (beta1p * beta1p.conj()).re / cg_denom,
            cg12: (beta1p * beta2p.conj()).re / cg_denom,
            cg22: (beta2p * beta2p.conj()).re / cg_denom,
        });
    }

    Ok(CompareReport {
        k: params.k,
        lambda: params.lambda,
        hbar: params.hbar,
        action,
        omega,
        doublet_paired: double,
        rows,
    })
}

/// CSV form of a comparison report (stable column order, 12 significant
/// digits).
pub fn compare_to_csv(report: &CompareReport) -> String {
    let mut out = String::from(
        "m,m_prime,gap,classical_gap,B1,B2,beta1p_re,beta1p_im,beta2p_re,beta2p_im,\
         G11,G12,G22,cG11,cG12,cG22\n",
    );
    for r in &report.rows {
        let fields = [
            r.m.to_string(),
            r.m_prime.to_string(),
            fmt_field(Some(r.gap)),
            fmt_field(Some(r.classical_gap)),
            fmt_field(Some(r.b1)),
            fmt_field(Some(r.b2)),
            fmt_field(Some(r.beta1p_re)),
            fmt_field(Some(r.beta1p_im)),
            fmt_field(Some(r.beta2p_re)),
            fmt_field(Some(r.beta2p_im)),
            fmt_field(Some(r.g11)),
            fmt_field(Some(r.g12)),
            fmt_field(Some(r.g22)),
            fmt_field(Some(r.cg11)),
            fmt_field(Some(r.cg12)),
            fmt_field(Some(r.cg22)),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
