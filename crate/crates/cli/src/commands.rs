use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sqisw_core::dynamics::{mhz_to_rad_per_ns, theory_amplitude};
use sqisw_core::experiment::{
    calibrate_readout, classify_elements, run_qpt, tomography_run, CalibrationReport,
};
use sqisw_core::measurement::{ShotRecord, SimulatedReadout};
use sqisw_core::tomography::{
    chi_theory, density_to_json, extract_kappa, extract_t2, flag_elements, FlaggedElement,
    MatrixJson,
};
use sqisw_core::{ChiMatrix, DensityMatrix, Gate, InputState, MeasurementModel, SwapScan};

use crate::config::{RunConfig, ShotsSpec};
use crate::CliError;

/// Where a command's output goes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Stdout,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub dest: Destination,
    pub contents: String,
}

fn json_artifact<T: Serialize>(cfg: &RunConfig, value: &T) -> Artifact {
    let mut contents = serde_json::to_string_pretty(value).expect("report serializes");
    contents.push('\n');
    Artifact {
        dest: cfg
            .output
            .clone()
            .map_or(Destination::Stdout, Destination::File),
        contents,
    }
}

/// Interaction-time grid "start:stop:step" in ns, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl TfRange {
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("expected start:stop:step, got '{s}'"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        Ok(Self {
            start: num(a)?,
            stop: num(b)?,
            step: num(c)?,
        })
    }

    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let ok = self.start >= 0.0
            && self.stop >= self.start
            && self.step > 0.0
            && self.stop.is_finite();
        if !ok {
            return Err(CliError::config(format!(
                "empty or invalid t_f range {}:{}:{}",
                self.start, self.stop, self.step
            )));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        if n > 1_000_000 {
            return Err(CliError::config("t_f grid exceeds one million points"));
        }
        Ok((0..=n).map(|k| self.start + k as f64 * self.step).collect())
    }
}

impl Default for TfRange {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 400.0,
            step: 0.25,
        }
    }
}

/// Detuning list used when none is given: the on/off sweep up to Δ_off.
pub fn default_deltas(cfg: &RunConfig) -> Vec<f64> {
    vec![0.0, 5.0, 11.0, 25.0, 50.0, 100.0, cfg.device.delta_off_mhz]
}

fn summary_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_summary.csv"))
}

/// Swap scan CSV plus the per-detuning amplitude summary.
pub fn swap_scan(
    cfg: &RunConfig,
    tf: TfRange,
    deltas_mhz: Option<Vec<f64>>,
) -> Result<Vec<Artifact>, CliError> {
    let exp = cfg.resolve()?;
    let deltas_mhz = deltas_mhz.unwrap_or_else(|| default_deltas(cfg));
    if deltas_mhz.is_empty() {
        return Err(CliError::config("detuning list is empty"));
    }
    let tf_grid = tf.grid()?;
    let scan = SwapScan {
        tf_grid: tf_grid.clone(),
        delta_grid: deltas_mhz.iter().map(|&d| mhz_to_rad_per_ns(d)).collect(),
        mode: exp.mode,
        readout: cfg.measurement.is_some().then_some(exp.readout),
        shots: exp.shots,
        seed: exp.seed,
    };
    let points = scan.run(&exp.params, &exp.noise)?;

    let mut csv = String::from("delta_mhz,tf_ns,p00,p01,p10,p11\n");
    let mut summary = String::from("delta_mhz,peak_to_peak,theory\n");
    for (row, chunk) in points.chunks(tf_grid.len()).enumerate() {
        let d = deltas_mhz[row];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in chunk {
            let [p00, p01, p10, p11] = p.probs.0;
            writeln!(csv, "{d},{},{p00},{p01},{p10},{p11}", p.tf).unwrap();
            lo = lo.min(p01);
            hi = hi.max(p01);
        }
        let theory = theory_amplitude(exp.params.g, mhz_to_rad_per_ns(d));
        writeln!(summary, "{d},{},{theory}", hi - lo).unwrap();
    }
    let main_path = cfg
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("swap_scan.csv"));
    Ok(vec![
        Artifact {
            dest: Destination::File(summary_path(&main_path)),
            contents: summary,
        },
        Artifact {
            dest: Destination::File(main_path),
            contents: csv,
        },
    ])
}

#[derive(Serialize)]
struct QstReport {
    input: String,
    gate: &'static str,
    calibrated: bool,
    rho: MatrixJson,
    ideal: MatrixJson,
    state_fidelity: f64,
    trace_distance: f64,
    min_eigenvalue: f64,
    negative_corrected: bool,
    shot_records: Vec<ShotRecord>,
}

pub fn qst(cfg: &RunConfig, input: &str, gate: &str) -> Result<Artifact, CliError> {
    let exp = cfg.resolve()?;
    let input = InputState::parse(input)?;
    let gate = Gate::parse(gate)?;
    let run = tomography_run(&gate, input, &exp, 0)?;
    let rho = run.output(cfg.flags.calibrate);
    let ideal_ket = gate.target().matvec(&input.ket());
    let ideal = DensityMatrix::from_pure(&ideal_ket)?;
    Ok(json_artifact(
        cfg,
        &QstReport {
            input: input.label(),
            gate: gate.name(),
            calibrated: cfg.flags.calibrate,
            rho: density_to_json(rho),
            ideal: density_to_json(&ideal),
            state_fidelity: rho.fidelity_with_pure(&ideal_ket),
            trace_distance: rho.trace_distance(&ideal)?,
            min_eigenvalue: rho.min_eigenvalue()?,
            negative_corrected: run.negative_corrected,
            shot_records: run.records.clone(),
        },
    ))
}

#[derive(Serialize)]
struct ChiSummary {
    chi: MatrixJson,
    process_fidelity: f64,
    fit_residual: f64,
    trace_preservation_residual: f64,
}

#[derive(Serialize)]
struct QptOutput {
    gate: &'static str,
    shots: ShotsSpec,
    seed: u64,
    theory: MatrixJson,
    calibrated: ChiSummary,
    uncalibrated: ChiSummary,
}

pub fn qpt(cfg: &RunConfig, gate: &str) -> Result<Artifact, CliError> {
    let exp = cfg.resolve()?;
    let gate = Gate::parse(gate)?;
    let r = run_qpt(&gate, &exp)?;
    let summary = |fit: &sqisw_core::tomography::QptFit, f: f64| ChiSummary {
        chi: fit.chi.to_json(),
        process_fidelity: f,
        fit_residual: fit.residual,
        trace_preservation_residual: fit.chi.trace_preservation_residual(),
    };
    Ok(json_artifact(
        cfg,
        &QptOutput {
            gate: gate.name(),
            shots: cfg.shots.clone(),
            seed: cfg.seed,
            theory: r.theory.to_json(),
            calibrated: summary(&r.calibrated, r.fidelity_calibrated),
            uncalibrated: summary(&r.uncalibrated, r.fidelity_uncalibrated),
        },
    ))
}

#[derive(Serialize)]
struct CalibrateOutput {
    planted: MeasurementModel,
    shots: ShotsSpec,
    seed: u64,
    estimate: CalibrationReport,
    model: MeasurementModel,
}

pub fn calibrate(cfg: &RunConfig) -> Result<Artifact, CliError> {
    let exp = cfg.resolve()?;
    let mut runner = SimulatedReadout::new(exp.readout, exp.shots, exp.seed);
    let estimate = calibrate_readout(&mut runner, None)?;
    Ok(json_artifact(
        cfg,
        &CalibrateOutput {
            planted: exp.readout,
            shots: cfg.shots.clone(),
            seed: cfg.seed,
            model: estimate.model()?,
            estimate,
        },
    ))
}

/// Options of the `analyze` command.
#[derive(Debug, Clone)]
pub struct AnalyzeArgs {
    pub chi: PathBuf,
    pub g_mhz: Option<f64>,
    pub gate: String,
    pub threshold: f64,
    pub classify: bool,
}

#[derive(Serialize)]
struct AnalyzeOutput {
    t2_ns: f64,
    kappa: f64,
    trace_preservation_residual: f64,
    flagged_elements: Vec<FlaggedElement>,
}

pub fn analyze(cfg: &RunConfig, args: &AnalyzeArgs) -> Result<Artifact, CliError> {
    let exp = cfg.resolve()?;
    let text = std::fs::read_to_string(&args.chi)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", args.chi.display())))?;
    let chi = ChiMatrix::from_json_str(&text).map_err(|e| CliError::config(e.to_string()))?;
    let g_mhz = args.g_mhz.unwrap_or(cfg.device.g_mhz);
    if !(g_mhz.is_finite() && g_mhz > 0.0) {
        return Err(CliError::config(format!(
            "g_mhz must be positive, got {g_mhz}"
        )));
    }
    if args.threshold.is_nan() || args.threshold < 0.0 {
        return Err(CliError::config("threshold must be non-negative"));
    }
    let gate = Gate::parse(&args.gate)?;
    let theory = chi_theory(&gate.target())?.convert(chi.basis());
    let t2_ns = extract_t2(&chi, mhz_to_rad_per_ns(g_mhz))?;
    let kappa = extract_kappa(&chi)?;
    let mut flagged = flag_elements(&chi, &theory, args.threshold)?;
    if args.classify {
        classify_elements(&gate, &exp, &mut flagged, 1e-9)?;
    }
    Ok(json_artifact(
        cfg,
        &AnalyzeOutput {
            t2_ns,
            kappa,
            trace_preservation_residual: chi.trace_preservation_residual(),
            flagged_elements: flagged,
        },
    ))
}
