//! One function per subcommand. Each writes its artifacts, the canonical
//! `config.json` and a `manifest.json` into the output directory.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use condgauss::analysis::{
    fit_tail, hill_from_top, ldp_empirical, moment_scaling_exponent, AnalysisError, Binning, HillEstimate, LdpOptions,
    LogHistogram, MomentCurve, ScalingFit, TailClass, TailInput, TailReport,
};
use condgauss::integrate::{
    ensemble_expectation, record_hidden_path, simulate_stream, HiddenPathRecord, MomentAccumulator, Moments,
    RunSummary, SampleStats, SimConfig, Sink, StorageMode, TailReservoir, TraceWindow,
};
use condgauss::io::{SampleHeader, SampleWriter};
use condgauss::model::{
    contraction_certificate, damping_profile, surrogate_damping, ContractionCertificate, DampingSpec, DriftSpec,
    Interval, ModelSpec, ScalarModel, StartU,
};
use condgauss::theory::{check_am, classify, classify_matrix, theta_feynman_kac, TailPrediction, ThetaOptions};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{sha256_hex, ExperimentConfig};
use crate::error::CliError;
use crate::figures::{self, agrees, Scale, Variant};
use crate::output::{Manifest, OutputDir, Table};

/// Box half-width, in stationary standard deviations, for certificates.
pub const BOX_WIDTH: f64 = 6.0;
pub const GRID_POINTS: usize = 2001;
pub const HIST_BINS: usize = 200;
/// Fraction of samples above the log-density plotting range.
pub const HIST_CLIP: f64 = 1e-4;
/// Fraction of samples used by the Hill estimate.
pub const HILL_FRACTION: f64 = 1e-3;

#[derive(Debug)]
pub struct Outcome {
    pub manifest: Manifest,
    pub exit_code: i32,
    pub message: String,
}

fn seal<C: Serialize>(
    mut out: OutputDir,
    command: &str,
    seed: u64,
    config: &C,
    exit_code: i32,
    message: String,
) -> Result<Outcome, CliError> {
    let canonical = condgauss::io::canonical_json(config)?;
    out.write_bytes("config.json", canonical.as_bytes())?;
    let manifest = out.finish(command, seed, &sha256_hex(canonical.as_bytes()))?;
    Ok(Outcome {
        manifest,
        exit_code,
        message,
    })
}

fn seal_experiment(
    out: OutputDir,
    command: &str,
    cfg: &ExperimentConfig,
    message: String,
) -> Result<Outcome, CliError> {
    seal_experiment_with(out, command, cfg, 0, message)
}

fn seal_experiment_with(
    out: OutputDir,
    command: &str,
    cfg: &ExperimentConfig,
    exit_code: i32,
    message: String,
) -> Result<Outcome, CliError> {
    let mut c = cfg.clone();
    c.out = None;
    seal(out, command, cfg.seed, &c, exit_code, message)
}

/// Histogram of the first coordinate, signed.
struct SignedHistogram(LogHistogram);

impl Sink for SignedHistogram {
    fn observe(&mut self, _t: f64, x: &[f64], _norm: f64) {
        self.0.push(x[0]);
    }
}

fn emitted_samples(sim: &SimConfig) -> u64 {
    (sim.n_steps - sim.burn_in).div_ceil(sim.thinning)
}

/// Reservoir large enough for the tail fit and the Hill estimate.
fn reservoir_for(sim: &SimConfig, tail_quantile: f64) -> (TailReservoir, usize) {
    let n = emitted_samples(sim);
    let hill_k = (n as f64 * HILL_FRACTION) as usize;
    let tail = ((1.0 - tail_quantile) * n as f64).floor() as usize;
    (TailReservoir::new(tail.max(hill_k) + 2), hill_k)
}

fn hill(top: &[f64], n: u64, k: usize) -> Option<HillEstimate> {
    hill_from_top(top, n, k).ok()
}

/// Symmetric plotting range that leaves out the most extreme samples.
fn plot_range(top: &[f64], n: u64) -> f64 {
    if top.is_empty() {
        return 1.0;
    }
    let i = ((n as f64 * HIST_CLIP) as usize).min(top.len() - 1);
    if top[i] > 0.0 {
        top[i]
    } else {
        1.0
    }
}

fn density_table(h: &LogHistogram) -> Table {
    let mut t = Table::new(&["x", "count", "log_density"]);
    for r in h.rows() {
        t.push(vec![r.bin_center, r.count as f64, r.log_density]);
    }
    t
}

/// Log-density of the Gaussian with the sample mean and variance.
fn gaussian_table(h: &LogHistogram, m: &Moments) -> Table {
    let mut t = Table::new(&["x", "log_density"]);
    let var = m.variance;
    for c in h.binning().centers() {
        let z = c - m.mean;
        t.push(vec![
            c,
            -0.5 * (2.0 * std::f64::consts::PI * var).ln() - z * z / (2.0 * var),
        ]);
    }
    t
}

#[derive(Clone, Debug, Serialize)]
pub struct HistogramInfo {
    pub binning: Binning,
    pub total: u64,
    pub underflow: u64,
    pub overflow: u64,
}

impl HistogramInfo {
    fn of(h: &LogHistogram) -> Self {
        Self {
            binning: *h.binning(),
            total: h.total(),
            underflow: h.underflow(),
            overflow: h.overflow(),
        }
    }
}

// ---------------------------------------------------------------- reproduce

#[derive(Clone, Debug, Serialize)]
pub struct ReproduceConfig {
    pub figure: u8,
    pub scale: Scale,
    pub t_final: f64,
    pub dt: f64,
    pub gamma: f64,
    pub sigma_x: f64,
    pub seed: u64,
    pub tail_quantile: f64,
    pub window: [f64; 2],
    pub dampings: Vec<DampingSpec>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VariantSummary {
    pub name: String,
    pub label: String,
    pub damping: DampingSpec,
    pub run: RunSummary,
    pub moments: Moments,
    pub hill: Option<HillEstimate>,
    pub histogram: HistogramInfo,
    pub gaussian_reference: bool,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonEntry {
    pub name: String,
    pub label: String,
    pub predicted: TailClass,
    pub empirical: TailClass,
    pub agree: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub figure: u8,
    pub scale: Scale,
    pub seed: u64,
    pub agreeing: usize,
    pub variants: Vec<ComparisonEntry>,
}

struct VariantOutput {
    summary: VariantSummary,
    prediction: TailPrediction,
    report: TailReport,
    trajectory: Table,
    density: Table,
    gaussian: Option<Table>,
}

pub fn reproduce(figure_id: u8, scale: Scale, seed: u64, tail_quantile: f64, out: &Path) -> Result<Outcome, CliError> {
    let variants = figures::figure(figure_id)
        .ok_or_else(|| CliError::Config(format!("figure must be 1, 2, 3 or 4, got {figure_id}")))?;
    if !(tail_quantile > 0.0 && tail_quantile < 1.0) {
        return Err(CliError::Config(format!(
            "tail quantile {tail_quantile} outside (0, 1)"
        )));
    }
    let config = ReproduceConfig {
        figure: figure_id,
        scale,
        t_final: scale.horizon(),
        dt: figures::DT,
        gamma: figures::GAMMA,
        sigma_x: figures::SIGMA_X,
        seed,
        tail_quantile,
        window: [figures::WINDOW.0, figures::WINDOW.1],
        dampings: variants.iter().map(|v| v.damping.clone()).collect(),
    };
    let drift = DriftSpec::ou(figures::GAMMA);
    let sim = SimConfig::for_horizon(figures::DT, scale.horizon(), seed);
    let shared = record_hidden_path(&drift, &StartU::Stationary, &sim, StorageMode::Values)?;
    // The excerpt needs u along the window; the prefix of the same stream
    // gives it without storing the whole path at full scale.
    let window_steps = ((figures::WINDOW.1 / figures::DT).round() as u64).min(sim.n_steps);
    let prefix = SimConfig {
        n_steps: window_steps,
        ..sim.clone()
    };
    let window_path = record_hidden_path(&drift, &StartU::Stationary, &prefix, StorageMode::Values)?.values();
    let cert = contraction_certificate(&drift)?;
    let outputs: Vec<VariantOutput> = variants
        .par_iter()
        .map(|v| {
            run_variant(v, &drift, &sim, &shared, &window_path, &cert, tail_quantile)
                .map_err(|e| e.context(&format!("{} ({})", v.name, v.damping.label())))
        })
        .collect::<Result<_, _>>()?;

    let mut dir = OutputDir::create(out)?;
    let mut entries = Vec::new();
    for o in &outputs {
        let name = &o.summary.name;
        dir.write_csv(&format!("{name}/trajectory.csv"), &o.trajectory)?;
        dir.write_csv(&format!("{name}/log_density.csv"), &o.density)?;
        if let Some(g) = &o.gaussian {
            dir.write_csv(&format!("{name}/gaussian_reference.csv"), g)?;
        }
        dir.write_json(&format!("{name}/tail_report.json"), &o.report)?;
        dir.write_json(&format!("{name}/prediction.json"), &o.prediction)?;
        dir.write_json(&format!("{name}/summary.json"), &o.summary)?;
        entries.push(ComparisonEntry {
            name: name.clone(),
            label: o.summary.label.clone(),
            predicted: o.prediction.class,
            empirical: o.report.class,
            agree: agrees(o.prediction.class, o.report.class),
        });
    }
    let agreeing = entries.iter().filter(|e| e.agree).count();
    let message = format!(
        "figure {figure_id}: {agreeing}/{} variants agree ({})",
        entries.len(),
        entries
            .iter()
            .map(|e| format!("{} predicted {}, fitted {}", e.label, e.predicted, e.empirical))
            .collect::<Vec<_>>()
            .join("; ")
    );
    dir.write_json(
        "comparison.json",
        &Comparison {
            figure: figure_id,
            scale,
            seed,
            agreeing,
            variants: entries,
        },
    )?;
    seal(dir, "reproduce", seed, &config, 0, message)
}

fn run_variant(
    v: &Variant,
    drift: &DriftSpec,
    sim: &SimConfig,
    shared: &HiddenPathRecord,
    window_path: &[f64],
    cert: &ContractionCertificate,
    tail_quantile: f64,
) -> Result<VariantOutput, CliError> {
    let model = ModelSpec::Scalar(ScalarModel::new(v.damping.clone(), drift.clone(), figures::SIGMA_X));
    let profile = damping_profile(&v.damping, drift, Interval::stationary_box(drift, 0, BOX_WIDTH))?;
    let prediction = classify(&profile, Some(cert))?;

    let mut stats = SampleStats::new();
    let (mut reservoir, hill_k) = reservoir_for(sim, tail_quantile);
    let mut trace = TraceWindow::new(figures::WINDOW.0, figures::WINDOW.1);
    let run = simulate_stream(&model, sim, &mut [&mut stats, &mut reservoir, &mut trace], Some(shared))?;
    let top = reservoir.top_descending();
    let report = fit_tail(
        TailInput::Top {
            top_desc: &top,
            n_total: run.samples_seen,
        },
        tail_quantile,
    )?;

    let range = plot_range(&top, run.samples_seen);
    let mut hist = SignedHistogram(LogHistogram::new(Binning::Linear {
        lo: -range,
        hi: range,
        bins: HIST_BINS,
    })?);
    simulate_stream(&model, sim, &mut [&mut hist], Some(shared))?;
    let hist = hist.0;

    let mut trajectory = Table::new(&["t", "x", "u", "b"]);
    for p in &trace.points {
        let n = (p.t / sim.dt).round() as usize;
        let u = window_path.get(n).copied().unwrap_or(f64::NAN);
        trajectory.push(vec![p.t, p.x, u, v.damping.eval(u)]);
    }
    let moments = stats.moments();
    let mut notes = Vec::new();
    let gaussian = if prediction.variance_infinite {
        notes.push("gaussian reference suppressed: stationary variance is infinite".into());
        None
    } else if !(moments.variance.is_finite() && moments.variance > 0.0) {
        notes.push("gaussian reference suppressed: sample variance not finite".into());
        None
    } else {
        Some(gaussian_table(&hist, &moments))
    };
    Ok(VariantOutput {
        summary: VariantSummary {
            name: v.name.clone(),
            label: v.damping.label(),
            damping: v.damping.clone(),
            run,
            moments,
            hill: hill(&top, reservoir.seen(), hill_k),
            histogram: HistogramInfo::of(&hist),
            gaussian_reference: gaussian.is_some(),
            notes,
        },
        prediction,
        report,
        trajectory,
        density: density_table(&hist),
        gaussian,
    })
}

// ----------------------------------------------------------------- classify

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub prediction: TailPrediction,
    pub tail_report: Option<TailReport>,
}

/// The configured certificate, or the derived one when the drift admits it.
fn optional_certificate(cfg: &ExperimentConfig) -> Result<Option<ContractionCertificate>, CliError> {
    if cfg.certificate.is_some() {
        return cfg.certificate().map(Some);
    }
    Ok(contraction_certificate(cfg.model.drift()).ok())
}

fn hidden_coordinate(model: &ModelSpec) -> usize {
    match model {
        ModelSpec::Scalar(m) => m.damping.coordinate(),
        ModelSpec::Matrix(m) => m.terms()[0].damping.coordinate(),
    }
}

fn verification_box(cfg: &ExperimentConfig) -> Interval {
    let drift = cfg.model.drift();
    Interval::stationary_box(
        drift,
        hidden_coordinate(&cfg.model),
        cfg.run.box_width.unwrap_or(BOX_WIDTH),
    )
}

pub fn predict(cfg: &ExperimentConfig) -> Result<TailPrediction, CliError> {
    let cert = optional_certificate(cfg)?;
    let bx = verification_box(cfg);
    Ok(match &cfg.model {
        ModelSpec::Scalar(m) => classify(&damping_profile(&m.damping, &m.drift, bx)?, cert.as_ref())?,
        ModelSpec::Matrix(m) => classify_matrix(m, cert.as_ref(), bx, cfg.run.grid_points.unwrap_or(GRID_POINTS))?,
    })
}

pub fn cmd_classify(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let prediction = predict(cfg)?;
    let tail_report = if cfg.run.simulate {
        Some(empirical_tail(cfg)?.0)
    } else {
        None
    };
    let mut dir = OutputDir::create(out)?;
    let not_classifiable = prediction.class == TailClass::NotClassifiable;
    let message = if not_classifiable {
        format!("not classifiable: {}", prediction.notes.join("; "))
    } else {
        let mut m = format!("predicted {}", prediction.class);
        if let Some(q0) = prediction.q0 {
            m.push_str(&format!(", q0 = {q0}"));
        }
        if let Some(r) = &tail_report {
            m.push_str(&format!(", fitted {}", r.class));
        }
        m
    };
    dir.write_json(
        "classification.json",
        &Classification {
            prediction,
            tail_report,
        },
    )?;
    let code = if not_classifiable { 2 } else { 0 };
    seal_experiment_with(dir, "classify", cfg, code, message)
}

/// One long run: tail fit from the top order statistics, plus the run
/// summary, sample moments and Hill estimate.
fn empirical_tail(cfg: &ExperimentConfig) -> Result<(TailReport, RunSummary, Moments, Option<HillEstimate>), CliError> {
    let sim = cfg.sim_config()?;
    let mut stats = SampleStats::new();
    let (mut reservoir, hill_k) = reservoir_for(&sim, cfg.analysis.tail_quantile);
    let run = simulate_stream(&cfg.model, &sim, &mut [&mut stats, &mut reservoir], None)?;
    let top = reservoir.top_descending();
    let report = fit_tail(
        TailInput::Top {
            top_desc: &top,
            n_total: run.samples_seen,
        },
        cfg.analysis.tail_quantile,
    )?;
    let h = hill(&top, run.samples_seen, hill_k);
    Ok((report, run, stats.moments(), h))
}

// ----------------------------------------------------------------- simulate

#[derive(Clone, Debug, Serialize)]
pub struct StreamSummary {
    pub run: RunSummary,
    pub moments: Moments,
    pub hill: Option<HillEstimate>,
    pub tail_class: Option<TailClass>,
    pub scaling: Option<ScalingFit>,
    pub histogram: HistogramInfo,
    pub samples_file: Option<String>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub n_traj: u64,
    pub t_final: f64,
    pub curve: MomentCurve,
    pub scaling: Option<ScalingFit>,
}

fn moment_table(curve: &MomentCurve) -> Table {
    let mut t = Table::new(&["p", "log_moment", "log_std_error"]);
    for i in 0..curve.p.len() {
        t.push(vec![curve.p[i], curve.log_moments[i], curve.log_std_errors[i]]);
    }
    t
}

fn scaling_of(curve: &MomentCurve, notes: &mut Vec<String>) -> Option<ScalingFit> {
    match moment_scaling_exponent(curve) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("moment scaling unavailable: {e}"));
            None
        }
    }
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let sim = cfg.sim_config()?;
    let p_grid = &cfg.analysis.p_grid;
    let mut dir = OutputDir::create(out)?;
    if let Some(n_traj) = cfg.run.n_traj {
        let curve = ensemble_expectation(&cfg.model, &sim, p_grid, cfg.sim.t_final, n_traj)?;
        let scaling = scaling_of(&curve, &mut Vec::new());
        dir.write_csv("moments.csv", &moment_table(&curve))?;
        let message = match &scaling {
            Some(s) => format!(
                "ensemble of {n_traj}: scaling exponent {:.4} ± {:.4}",
                s.slope, s.std_error
            ),
            None => format!("ensemble of {n_traj} done"),
        };
        dir.write_json(
            "summary.json",
            &EnsembleSummary {
                n_traj,
                t_final: cfg.sim.t_final,
                curve,
                scaling,
            },
        )?;
        return seal_experiment(dir, "simulate", cfg, message);
    }

    let mut stats = SampleStats::new();
    let (mut reservoir, hill_k) = reservoir_for(&sim, cfg.analysis.tail_quantile);
    let mut acc = MomentAccumulator::new(p_grid);
    let run = if cfg.run.spill {
        let path = dir.path_for("samples.bin")?;
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let header = SampleHeader {
            dim: cfg.model.dim_x() as u32,
            dt: sim.dt,
            thinning: sim.thinning,
            seed: sim.seed,
        };
        let mut writer = SampleWriter::new(BufWriter::new(file), header)?;
        let run = simulate_stream(
            &cfg.model,
            &sim,
            &mut [&mut stats, &mut reservoir, &mut acc, &mut writer],
            None,
        )?;
        writer.finish()?;
        dir.register("samples.bin")?;
        run
    } else {
        simulate_stream(&cfg.model, &sim, &mut [&mut stats, &mut reservoir, &mut acc], None)?
    };
    let mut notes = Vec::new();
    let top = reservoir.top_descending();
    let report = match fit_tail(
        TailInput::Top {
            top_desc: &top,
            n_total: run.samples_seen,
        },
        cfg.analysis.tail_quantile,
    ) {
        Ok(r) => Some(r),
        Err(e @ AnalysisError::InsufficientTail { .. }) => {
            notes.push(format!("no tail fit: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    let curve = MomentCurve::from_accumulator(&acc);
    let scaling = scaling_of(&curve, &mut notes);

    let range = plot_range(&top, run.samples_seen);
    let mut hist = SignedHistogram(LogHistogram::new(Binning::Linear {
        lo: -range,
        hi: range,
        bins: HIST_BINS,
    })?);
    simulate_stream(&cfg.model, &sim, &mut [&mut hist], None)?;
    let hist = hist.0;

    dir.write_csv("moments.csv", &moment_table(&curve))?;
    dir.write_csv("log_density.csv", &density_table(&hist))?;
    if let Some(r) = &report {
        dir.write_json("tail_report.json", r)?;
    }
    let moments = stats.moments();
    let message = format!(
        "{} samples: variance {:.6}, excess kurtosis {:.4}{}",
        run.samples_seen,
        moments.variance,
        moments.excess_kurtosis,
        report
            .as_ref()
            .map(|r| format!(", tail {}", r.class))
            .unwrap_or_default()
    );
    dir.write_json(
        "summary.json",
        &StreamSummary {
            hill: hill(&top, run.samples_seen, hill_k),
            run,
            moments,
            tail_class: report.map(|r| r.class),
            scaling,
            histogram: HistogramInfo::of(&hist),
            samples_file: cfg.run.spill.then(|| "samples.bin".to_string()),
            notes,
        },
    )?;
    seal_experiment(dir, "simulate", cfg, message)
}

// --------------------------------------------------------- scalar commands

fn scalar(cfg: &ExperimentConfig, what: &str) -> Result<ScalarModel, CliError> {
    match &cfg.model {
        ModelSpec::Scalar(m) => Ok(m.clone()),
        ModelSpec::Matrix(_) => Err(CliError::Config(format!("{what} needs a scalar model"))),
    }
}

pub fn cmd_ldp(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let m = scalar(cfg, "ldp")?;
    let cert = cfg.certificate()?;
    let t_grid = cfg.run.t_grid.clone().unwrap_or_else(|| vec![5.0, 10.0, 20.0]);
    let c_grid = cfg.run.c_grid.clone().unwrap_or_else(|| vec![0.5, 1.0]);
    let n_traj = cfg.run.n_traj.unwrap_or(2000);
    let opts = LdpOptions {
        dt: cfg.sim.dt,
        seed: cfg.seed,
        ..LdpOptions::default()
    };
    let report = ldp_empirical(&m.drift, &m.damping, &t_grid, &c_grid, n_traj, &cert, &opts)?;
    let mut table = Table::new(&[
        "t",
        "c",
        "exceedances",
        "n_traj",
        "log_probability",
        "censored",
        "bound_exponent",
    ]);
    for c in &report.cells {
        table.push(vec![
            c.t,
            c.c,
            c.exceedances as f64,
            c.n_traj as f64,
            c.log_probability,
            if c.censored { 1.0 } else { 0.0 },
            c.bound_exponent,
        ]);
    }
    let message = format!("D_M = {}, {} cells", report.d_m, report.cells.len());
    let mut dir = OutputDir::create(out)?;
    dir.write_csv("ldp.csv", &table)?;
    dir.write_json("ldp.json", &report)?;
    seal_experiment(dir, "ldp", cfg, message)
}

pub fn cmd_theta(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let m = scalar(cfg, "theta")?;
    let cert = cfg.certificate()?;
    let u_grid = cfg
        .run
        .u_grid
        .clone()
        .unwrap_or_else(|| vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    let n = cfg.run.n_samples.unwrap_or(4000) as usize;
    let opts = ThetaOptions {
        dt: cfg.sim.dt,
        tolerance: cfg.run.tolerance.unwrap_or(ThetaOptions::default().tolerance),
        ..ThetaOptions::default()
    };
    let est = theta_feynman_kac(&m.damping, &m.drift, &u_grid, n, cfg.seed, Some(&cert), &opts)?;
    let mut table = Table::new(&["u", "theta", "std_error"]);
    for i in 0..est.u_grid.len() {
        table.push(vec![est.u_grid[i], est.theta[i], est.std_errors[i]]);
    }
    let message = format!(
        "θ on {} points, Lipschitz {:.6} (bound {:.6})",
        est.u_grid.len(),
        est.lipschitz_empirical,
        est.lipschitz_bound
    );
    let mut dir = OutputDir::create(out)?;
    dir.write_csv("theta.csv", &table)?;
    dir.write_json("theta.json", &est)?;
    seal_experiment(dir, "theta", cfg, message)
}

pub fn cmd_am_check(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let m = scalar(cfg, "am-check")?;
    let level = cfg.run.m.unwrap_or(1);
    let grid = verification_box(cfg).grid(cfg.run.grid_points.unwrap_or(GRID_POINTS));
    let cert = check_am(&m.damping, &m.drift, level, &grid, cfg.run.p_probe.unwrap_or(2.0))?;
    let failed: Vec<&str> = cert
        .conditions
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    let message = if cert.member {
        format!("member of 𝒜_{level}")
    } else {
        format!("not a member of 𝒜_{level}; failing: {}", failed.join(", "))
    };
    let mut dir = OutputDir::create(out)?;
    dir.write_json("am_certificate.json", &cert)?;
    seal_experiment(dir, "am-check", cfg, message)
}

pub fn cmd_surrogate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let grid = verification_box(cfg).grid(cfg.run.grid_points.unwrap_or(GRID_POINTS));
    let coord = hidden_coordinate(&cfg.model);
    let drift = cfg.model.drift();
    let mut u = vec![drift.typical_scale(coord).0; drift.dim()];
    let table = match &cfg.model {
        ModelSpec::Scalar(m) => {
            let mut t = Table::new(&["u", "b", "b_bar", "b_under"]);
            for &g in &grid {
                let b = m.damping.eval(g);
                t.push(vec![g, b, b, b]);
            }
            t
        }
        ModelSpec::Matrix(m) => {
            let names: Vec<String> = (1..=m.terms().len()).map(|i| format!("b{i}")).collect();
            let mut header = vec!["u"];
            header.extend(names.iter().map(String::as_str));
            header.extend(["b_bar", "b_under"]);
            let mut t = Table::new(&header);
            for &g in &grid {
                u[coord] = g;
                let s = surrogate_damping(m, &u);
                let mut row = vec![g];
                row.extend(
                    m.terms()
                        .iter()
                        .map(|term| term.damping.eval(u[term.damping.coordinate()])),
                );
                row.extend([s.b_bar, s.b_under]);
                t.push(row);
            }
            t
        }
    };
    let mut dir = OutputDir::create(out)?;
    dir.write_csv("surrogate.csv", &table)?;
    seal_experiment(dir, "surrogate", cfg, format!("{} grid points", grid.len()))
}
