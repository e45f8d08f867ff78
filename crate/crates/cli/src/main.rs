//! Command-line driver: single-point evaluations, parameter sweeps,
//! landmark detection, and quantum/classical comparison reports.
//!
//! Exit codes: 0 success, 1 usage error, 2 convergence failure, 3 domain
//! or grid error.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use oscgeom::cpt::{cmt_series, Branch, Expansion};
use oscgeom::fock::{
    build_operators, converged_spectrum, density_maxima, ground_density, well_extent, Parity,
    SolveOptions,
};
use oscgeom::model::{SystemParams, Well};
use oscgeom::orbit::{cmt_numeric, orbit_fourier};
use oscgeom::qmt::{qmt_sum, transition_elements};
use oscgeom::sweep::{
    compare, compare_to_csv, landmarks, run_sweep, to_csv, AxisConfig, ClassicalEngine,
    CompareOptions, QuantumEngine, SweepConfig, SweepMode,
};
use oscgeom::tables::{self, fit_f_ladder, ActionMode, CurvatureFamily};
use oscgeom::{Error, Result};

#[derive(Parser)]
#[command(
    name = "oscgeom",
    version,
    about = "Metric tensors and parameter-space curvature of the quartic/double-well oscillator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Parameter point shared by the single-point subcommands.
#[derive(Args)]
struct PointArgs {
    /// Quadratic coefficient k (either sign).
    #[arg(long, allow_hyphen_values = true)]
    k: f64,
    /// Quartic coefficient λ (> 0).
    #[arg(long)]
    lambda: f64,
    /// Value of ħ.
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
}

impl PointArgs {
    fn params(&self) -> Result<SystemParams> {
        SystemParams::with_hbar(self.k, self.lambda, self.hbar)
    }
}

/// Eigensolver knobs shared by the spectral subcommands.
#[derive(Args)]
struct BasisArgs {
    /// Starting basis size for the adaptive eigensolver.
    #[arg(long = "basis-size", default_value_t = 120)]
    basis_size: usize,
    /// Cap on basis growth.
    #[arg(long = "basis-max", default_value_t = 500)]
    basis_max: usize,
    /// Relative eigenvalue stability tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

impl BasisArgs {
    fn options(&self, requested: usize) -> SolveOptions {
        SolveOptions { tolerance: self.tolerance, requested }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WellArg {
    Left,
    Right,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Quantum,
    Classical,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    KSweep,
    LambdaSweep,
    Grid,
}

impl From<ModeArg> for SweepMode {
    fn from(m: ModeArg) -> SweepMode {
        match m {
            ModeArg::KSweep => SweepMode::KSweep,
            ModeArg::LambdaSweep => SweepMode::LambdaSweep,
            ModeArg::Grid => SweepMode::Grid,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Low-lying spectrum: energies, gaps to the ground state, parities.
    Spectrum {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        basis: BasisArgs,
        /// Number of levels to report.
        #[arg(long, default_value_t = 12)]
        levels: usize,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        output: Option<String>,
    },
    /// Ground-state probability density sampled on a position grid (CSV).
    Density {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        basis: BasisArgs,
        /// Number of grid points.
        #[arg(long = "grid-points", default_value_t = 801)]
        grid_points: usize,
        /// Half-width of the grid; default covers the occupied wells.
        #[arg(long = "q-max")]
        q_max: Option<f64>,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        output: Option<String>,
    },
    /// Quantum metric at one point from the spectral transition sum.
    Qmt {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        basis: BasisArgs,
        /// Number of transition terms kept in the sum.
        #[arg(long = "m-max", default_value_t = 60)]
        m_max: usize,
        #[arg(long)]
        output: Option<String>,
    },
    /// Classical metric at one point from numeric orbit Fourier data.
    CmtNumeric {
        #[command(flatten)]
        point: PointArgs,
        /// Orbit action; defaults to the ground ladder value f₁·ħ.
        #[arg(long)]
        action: Option<f64>,
        /// Well selection for k < 0; default right.
        #[arg(long, value_enum)]
        well: Option<WellArg>,
        /// Number of Fourier harmonics kept.
        #[arg(long = "m-max", default_value_t = 32)]
        m_max: usize,
        /// log2 of the number of orbit samples.
        #[arg(long = "log2-samples", default_value_t = 12)]
        log2_samples: u32,
        #[arg(long)]
        output: Option<String>,
    },
    /// Classical metric at one point from the pinned coefficient tables.
    CmtSeries {
        #[command(flatten)]
        point: PointArgs,
        /// Evaluate at this literal action instead of ladder-quantized
        /// powers.
        #[arg(long, conflicts_with = "quantized")]
        action: Option<f64>,
        /// Replace each action power p by (f_p·ħ)^p (the default).
        #[arg(long)]
        quantized: bool,
        #[arg(long)]
        output: Option<String>,
    },
    /// Dump the canonical-transformation series and the metric rows it
    /// generates.
    CptDump {
        /// Sign of k selects the branch; magnitude is irrelevant.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        k: f64,
        /// Expansion order; default depends on the branch.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        output: Option<String>,
    },
    /// Scalar curvature of the chosen metric family from the pinned series.
    Curvature {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum, default_value_t = FamilyArg::Quantum)]
        family: FamilyArg,
        #[arg(long)]
        output: Option<String>,
    },
    /// Metric and curvature sweep over parameter ranges (CSV).
    Sweep(SweepArgs),
    /// Extrema of sweep columns along a 1-D sweep (JSON).
    Landmarks {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Comma-separated column names, e.g. g11_q,R_q,det_cl.
        #[arg(long, value_delimiter = ',', required = true)]
        columns: Vec<String>,
    },
    /// Per-level quantum vs classical pairing report (JSON, CSV with
    /// --output).
    Compare {
        #[command(flatten)]
        point: PointArgs,
        /// Number of paired rows.
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        /// Comparison action; defaults to the ground ladder value f₁·ħ.
        #[arg(long)]
        action: Option<f64>,
        #[command(flatten)]
        basis: BasisArgs,
        #[arg(long = "log2-samples", default_value_t = 12)]
        log2_samples: u32,
        /// Also write the report as CSV to this path.
        #[arg(long)]
        output: Option<String>,
    },
    /// Refit the action-identification ladder from the coefficient tables.
    FitF {
        /// Regenerate the classical rows at this expansion order first.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        output: Option<String>,
    },
}

/// Sweep configuration: JSON file and/or flag overrides.
#[derive(Args)]
struct SweepArgs {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Fixed k for lambda-sweep mode.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[arg(long = "k-min", allow_hyphen_values = true)]
    k_min: Option<f64>,
    #[arg(long = "k-max", allow_hyphen_values = true)]
    k_max: Option<f64>,
    #[arg(long = "k-step")]
    k_step: Option<f64>,
    /// Fixed λ for k-sweep mode.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "lambda-min")]
    lambda_min: Option<f64>,
    #[arg(long = "lambda-max")]
    lambda_max: Option<f64>,
    #[arg(long = "lambda-step")]
    lambda_step: Option<f64>,
    #[arg(long)]
    hbar: Option<f64>,
    /// Comma-separated engines: quantum-numeric, quantum-series,
    /// classical-numeric, classical-series, cpt. Families not named are
    /// disabled.
    #[arg(long, value_delimiter = ',')]
    engines: Option<Vec<String>>,
    /// Literal classical action (default: ladder-quantized powers).
    #[arg(long)]
    action: Option<f64>,
    #[arg(long = "m-max")]
    m_max: Option<usize>,
    /// Expansion order for the cpt engine.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long = "basis-size")]
    basis_size: Option<usize>,
    #[arg(long = "basis-max")]
    basis_max: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Step of the internal curvature bands around fixed axes.
    #[arg(long = "band-step")]
    band_step: Option<f64>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    output: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version land here too; those exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Usage(_) => 1,
                Error::Convergence(_) => 2,
                Error::Domain(_) | Error::Grid(_) => 3,
            })
        }
    }
}

/// Writes to the path when given, stdout otherwise.
fn emit(output: Option<&str>, content: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, content)
            .map_err(|e| Error::Usage(format!("cannot write {path}: {e}"))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn emit_json(output: Option<&str>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Usage(format!("serialization failed: {e}")))?;
    text.push('\n');
    emit(output, &text)
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Spectrum { point, basis, levels, output } => {
            let params = point.params()?;
            let (fock, result) = converged_spectrum(
                &params,
                basis.basis_size,
                basis.basis_max,
                &basis.options(levels),
            )?;
            let shown = levels.min(result.energies.len());
            let rows: Vec<_> = (0..shown)
                .map(|m| {
                    json!({
                        "m": m,
                        "energy": result.energies[m],
                        "gap": result.energies[m] - result.energies[0],
                        "parity": match result.parities[m] {
                            Parity::Even => "even",
                            Parity::Odd => "odd",
                        },
                    })
                })
                .collect();
            emit_json(
                output.as_deref(),
                &json!({
                    "k": params.k,
                    "lambda": params.lambda,
                    "hbar": params.hbar,
                    "basis_size": fock.size,
                    "n_converged": result.n_converged,
                    "levels": rows,
                }),
            )
        }
        Cmd::Density { point, basis, grid_points, q_max, output } => {
            let params = point.params()?;
            if grid_points < 2 {
                return Err(Error::Usage("density needs at least two grid points".into()));
            }
            let (fock, result) = converged_spectrum(
                &params,
                basis.basis_size,
                basis.basis_max,
                &basis.options(1),
            )?;
            let half = match q_max {
                Some(q) if q > 0.0 => q,
                Some(q) => return Err(Error::Usage(format!("q-max must be positive, got {q}"))),
                None => well_extent(&params, &fock),
            };
            let step = 2.0 * half / (grid_points - 1) as f64;
            let q_grid: Vec<f64> =
                (0..grid_points).map(|i| -half + i as f64 * step).collect();
            let density = ground_density(&result, &fock, &params, &q_grid)?;
            let maxima = density_maxima(&q_grid, &density);
            let mut csv = String::with_capacity(grid_points * 32);
            csv.push_str("q,density\n");
            for (q, d) in q_grid.iter().zip(&density) {
                csv.push_str(&format!("{q:.11e},{d:.11e}\n"));
            }
            eprintln!(
                "density maxima at {}",
                maxima.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(", ")
            );
            emit(output.as_deref(), &csv)
        }
        Cmd::Qmt { point, basis, m_max, output } => {
            let params = point.params()?;
            let (fock, result) = converged_spectrum(
                &params,
                basis.basis_size,
                basis.basis_max,
                &basis.options(m_max + 1),
            )?;
            let ops = build_operators(&fock, &params);
            let data = transition_elements(&result, &ops, m_max)?;
            let report = qmt_sum(&data);
            emit_json(
                output.as_deref(),
                &json!({
                    "k": params.k,
                    "lambda": params.lambda,
                    "hbar": params.hbar,
                    "basis_size": fock.size,
                    "m_max": m_max,
                    "g11": report.metric.g11,
                    "g12": report.metric.g12,
                    "g22": report.metric.g22,
                    "det": report.metric.det(),
                    "tail": report.tail,
                }),
            )
        }
        Cmd::CmtNumeric { point, action, well, m_max, log2_samples, output } => {
            let params = point.params()?;
            let action = action.unwrap_or(tables::builtin().f[1] * params.hbar);
            let well = match well {
                Some(WellArg::Left) => Some(Well::Left),
                Some(WellArg::Right) => Some(Well::Right),
                None if params.k < 0.0 => Some(Well::Right),
                None => None,
            };
            let (_, fd) = orbit_fourier(&params, action, well, m_max, log2_samples)?;
            let report = cmt_numeric(&fd);
            emit_json(
                output.as_deref(),
                &json!({
                    "k": params.k,
                    "lambda": params.lambda,
                    "hbar": params.hbar,
                    "action": action,
                    "well": well.map(|w| match w {
                        Well::Left => "left",
                        Well::Right => "right",
                    }),
                    "energy": fd.energy,
                    "omega": fd.omega,
                    "g11": report.metric.g11,
                    "g12": report.metric.g12,
                    "g22": report.metric.g22,
                    "det": report.metric.det(),
                    "tail": report.tail,
                }),
            )
        }
        Cmd::CmtSeries { point, action, quantized: _, output } => {
            let params = point.params()?;
            let mode = match action {
                Some(a) => ActionMode::Literal(a),
                None => ActionMode::Quantized,
            };
            let s = tables::cmt_metric_series(&params, mode, tables::builtin())?;
            emit_json(
                output.as_deref(),
                &json!({
                    "k": params.k,
                    "lambda": params.lambda,
                    "hbar": params.hbar,
                    "action_mode": match mode {
                        ActionMode::Literal(_) => "literal",
                        ActionMode::Quantized => "quantized",
                    },
                    "action": action,
                    "g11": s.metric.g11,
                    "g12": s.metric.g12,
                    "g22": s.metric.g22,
                    "det": s.metric.det(),
                    "tail": s.tail(),
                }),
            )
        }
        Cmd::CptDump { k, order, output } => {
            let branch = Branch::for_k(k)?;
            let order = order.unwrap_or(branch.default_order());
            let expansion = Expansion::new(branch, order)?;
            let series = cmt_series(branch, order)?;
            let mut text = expansion.dump();
            text.push_str(&format!(
                "metric rows (ascending action-power index, trusted through alpha = {}):\n",
                series.trusted_alpha
            ));
            for (label, row) in
                [("g11", &series.c11), ("g12", &series.c12), ("g22", &series.c22)]
            {
                let cells: Vec<String> = row.iter().map(|c| format!("{c:.12e}")).collect();
                text.push_str(&format!("{label}: [{}]\n", cells.join(", ")));
            }
            emit(output.as_deref(), &text)
        }
        Cmd::Curvature { point, family, output } => {
            let params = point.params()?;
            let t = tables::builtin();
            let fam = match family {
                FamilyArg::Quantum => CurvatureFamily::Quantum,
                FamilyArg::Classical => CurvatureFamily::Classical,
            };
            let s = tables::curvature_series(&params, fam, t)?;
            let mut report = json!({
                "k": params.k,
                "lambda": params.lambda,
                "hbar": params.hbar,
                "family": match fam {
                    CurvatureFamily::Quantum => "quantum",
                    CurvatureFamily::Classical => "classical",
                },
                "value": s.value,
                "last_term": s.last_term,
            });
            let obj = report.as_object_mut().expect("object");
            if params.k > 0.0 {
                let lead = match fam {
                    CurvatureFamily::Quantum => t.d[0],
                    CurvatureFamily::Classical => t.h[0],
                };
                obj.insert("large_k_limit".into(), json!(-lead));
                if matches!(fam, CurvatureFamily::Classical) {
                    // The tabulated leading coefficient is 21.1866; the
                    // alternating series evaluates its large-|k| limit as
                    // the negative of that. Both are surfaced so either
                    // convention can be cross-checked.
                    obj.insert("large_k_limit_alternate_sign".into(), json!(lead));
                }
            } else {
                obj.insert("small_lambda_limit".into(), json!(t.l[0]));
            }
            emit_json(output.as_deref(), &report)
        }
        Cmd::Sweep(args) => {
            let config = build_sweep_config(&args)?;
            let result = run_sweep(&config)?;
            emit(config.output.as_deref(), &to_csv(&result))
        }
        Cmd::Landmarks { sweep, columns } => {
            let mut config = build_sweep_config(&sweep)?;
            let output = config.output.take();
            let result = run_sweep(&config)?;
            let marks = landmarks(&result, &columns)?;
            emit_json(output.as_deref(), &serde_json::to_value(&marks).unwrap())
        }
        Cmd::Compare { point, pairs, action, basis, log2_samples, output } => {
            let params = point.params()?;
            let opts = CompareOptions {
                pairs,
                action,
                basis_start: basis.basis_size,
                basis_max: basis.basis_max,
                tolerance: basis.tolerance,
                log2_samples,
            };
            let report = compare(&params, &opts)?;
            if let Some(path) = output.as_deref() {
                emit(Some(path), &compare_to_csv(&report))?;
            }
            emit_json(None, &serde_json::to_value(&report).unwrap())
        }
        Cmd::FitF { order, output } => {
            let pinned = tables::builtin();
            let mut working = pinned.clone();
            if let Some(order) = order {
                let fresh = cmt_series(Branch::SingleWell, order)?;
                let alpha = fresh.trusted_alpha;
                working.b = [
                    fresh.c11[..=alpha.min(fresh.c11.len() - 1)].to_vec(),
                    fresh.c12[..=alpha.min(fresh.c12.len() - 1)].to_vec(),
                    fresh.c22[..=alpha.min(fresh.c22.len() - 1)].to_vec(),
                ];
            }
            let fitted = fit_f_ladder(&working);
            let max_rel_dev = fitted
                .iter()
                .zip(&pinned.f)
                .skip(1)
                .filter(|(f, p)| **f > 0.0 && **p > 0.0)
                .map(|(f, p)| ((f - p) / p).abs())
                .fold(0.0_f64, f64::max);
            emit_json(
                output.as_deref(),
                &json!({
                    "order": order,
                    "f": &fitted[1..],
                    "pinned": &pinned.f[1..],
                    "max_rel_dev": max_rel_dev,
                }),
            )
        }
    }
}

/// Builds a sweep config from the optional JSON file plus flag overrides.
fn build_sweep_config(args: &SweepArgs) -> Result<SweepConfig> {
    let mut base: Option<SweepConfig> = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Usage(format!("cannot read {path}: {e}")))?;
            Some(
                serde_json::from_str(&text)
                    .map_err(|e| Error::Usage(format!("bad config {path}: {e}")))?,
            )
        }
        None => None,
    };

    let k_axis = merge_axis(
        base.as_ref().map(|c| c.k.clone()),
        args.k,
        args.k_min,
        args.k_max,
        args.k_step,
        "k",
    )?;
    let lambda_axis = merge_axis(
        base.as_ref().map(|c| c.lambda.clone()),
        args.lambda,
        args.lambda_min,
        args.lambda_max,
        args.lambda_step,
        "lambda",
    )?;

    let mode = match (args.mode, base.as_ref()) {
        (Some(m), _) => SweepMode::from(m),
        (None, Some(c)) => c.mode,
        (None, None) => infer_mode(&k_axis, &lambda_axis)?,
    };

    let mut config = match base.take() {
        Some(mut c) => {
            c.mode = mode;
            c.k = k_axis;
            c.lambda = lambda_axis;
            c
        }
        None => SweepConfig::new(mode, k_axis, lambda_axis),
    };

    if let Some(engines) = &args.engines {
        let (quantum, classical) = parse_engines(engines)?;
        config.quantum = quantum;
        config.classical = classical;
    }
    if let Some(action) = args.action {
        config.action = ActionMode::Literal(action);
    }
    if let Some(hbar) = args.hbar {
        config.hbar = hbar;
    }
    if let Some(m_max) = args.m_max {
        config.m_max = m_max;
    }
    if args.order.is_some() {
        config.order = args.order;
    }
    if let Some(n) = args.basis_size {
        config.basis_start = n;
    }
    if let Some(n) = args.basis_max {
        config.basis_max = n;
    }
    if let Some(t) = args.tolerance {
        config.tolerance = t;
    }
    if let Some(h) = args.band_step {
        config.band_step = h;
    }
    if args.output.is_some() {
        config.output = args.output.clone();
    }
    Ok(config)
}

/// Combines an axis from the config file with flag overrides. A fixed-value
/// flag replaces the axis outright; range parts merge onto an existing
/// range.
fn merge_axis(
    existing: Option<AxisConfig>,
    fixed: Option<f64>,
    min: Option<f64>,
    max: Option<f64>,
    step: Option<f64>,
    name: &str,
) -> Result<AxisConfig> {
    let any_range = min.is_some() || max.is_some() || step.is_some();
    if fixed.is_some() && any_range {
        return Err(Error::Usage(format!(
            "--{name} conflicts with --{name}-min/--{name}-max/--{name}-step"
        )));
    }
    if let Some(v) = fixed {
        return Ok(AxisConfig::fixed(v));
    }
    if any_range {
        let prior = existing.unwrap_or_default();
        let min = min.or(prior.min);
        let max = max.or(prior.max);
        let step = step.or(prior.step);
        let (Some(min), Some(max), Some(step)) = (min, max, step) else {
            return Err(Error::Usage(format!(
                "a {name} range needs --{name}-min, --{name}-max and --{name}-step"
            )));
        };
        return Ok(AxisConfig::range(min, max, step));
    }
    existing.ok_or_else(|| {
        Error::Usage(format!("no {name} axis: pass --{name} or a --{name}-min/max/step range"))
    })
}

fn infer_mode(k: &AxisConfig, lambda: &AxisConfig) -> Result<SweepMode> {
    match (k.is_range(), lambda.is_range()) {
        (true, false) => Ok(SweepMode::KSweep),
        (false, true) => Ok(SweepMode::LambdaSweep),
        (true, true) => Ok(SweepMode::Grid),
        (false, false) => Err(Error::Usage(
            "both axes are fixed values; a sweep needs at least one range".into(),
        )),
    }
}

/// `--engines` lists the engines to enable; each family may appear once
/// and an unnamed family is disabled.
fn parse_engines(tokens: &[String]) -> Result<(QuantumEngine, ClassicalEngine)> {
    let mut quantum: Option<QuantumEngine> = None;
    let mut classical: Option<ClassicalEngine> = None;
    for token in tokens {
        let claim_q = |slot: &mut Option<QuantumEngine>, e| -> Result<()> {
            if slot.replace(e).is_some() {
                return Err(Error::Usage(format!(
                    "duplicate quantum engine in --engines at {token:?}"
                )));
            }
            Ok(())
        };
        let claim_c = |slot: &mut Option<ClassicalEngine>, e| -> Result<()> {
            if slot.replace(e).is_some() {
                return Err(Error::Usage(format!(
                    "duplicate classical engine in --engines at {token:?}"
                )));
            }
            Ok(())
        };
        match token.as_str() {
            "quantum-numeric" => claim_q(&mut quantum, QuantumEngine::Numeric)?,
            "quantum-series" => claim_q(&mut quantum, QuantumEngine::Series)?,
            "classical-numeric" => claim_c(&mut classical, ClassicalEngine::Numeric)?,
            "classical-series" => claim_c(&mut classical, ClassicalEngine::Series)?,
            "cpt" => claim_c(&mut classical, ClassicalEngine::Cpt)?,
            other => {
                return Err(Error::Usage(format!(
                    "unknown engine {other:?}; valid: quantum-numeric quantum-series \
                     classical-numeric classical-series cpt"
                )))
            }
        }
    }
    Ok((quantum.unwrap_or(QuantumEngine::Off), classical.unwrap_or(ClassicalEngine::Off)))
}
