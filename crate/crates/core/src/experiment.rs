//! Simulated tomography experiments: preparation, gate, pre-rotations,
//! readout, optional calibration inversion, reconstruction.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    cnot, evolve_events, iswap, sqisw, DeviceParams, NoiseModel, PulseEvent, PulseMode, Qubit,
};
use crate::error::{Error, Result};
use crate::measurement::{
    apply_model, crosstalk_consistency_solve, derive_seed, estimate_crosstalk_pair,
    estimate_fidelities, invert_model, sample, CrosstalkEstimate, Denominator, MeasurementModel,
    ProbVector, ReadoutExperiment, ShotRecord, Shots, T1Correction,
};
use crate::numkernel::ComplexMatrix;
use crate::state::DensityMatrix;
use crate::tomography::{
    chi_theory, flag_elements, process_fidelity, project_physical, qpt_inputs, qpt_reconstruct,
    qst_reconstruct, qst_settings, ChiMatrix, DecoherenceClass, FlaggedElement, InputState, QptFit,
};

/// Gate under test.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Identity,
    Sqisw,
    Iswap,
    /// CNOT (control A) built from two √iSWAPs and single-qubit rotations.
    Cnot,
    /// Arbitrary pulse sequence with the unitary it ideally implements.
    Custom {
        events: Vec<PulseEvent>,
        target: ComplexMatrix,
    },
}

impl Gate {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "identity" | "i" => Ok(Gate::Identity),
            "sqisw" => Ok(Gate::Sqisw),
            "iswap" => Ok(Gate::Iswap),
            "cnot" => Ok(Gate::Cnot),
            other => Err(Error::invalid(format!("unknown gate '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::Identity => "identity",
            Gate::Sqisw => "sqisw",
            Gate::Iswap => "iswap",
            Gate::Cnot => "cnot",
            Gate::Custom { .. } => "custom",
        }
    }

    /// Ideal unitary the gate aims for.
    pub fn target(&self) -> ComplexMatrix {
        match self {
            Gate::Identity => ComplexMatrix::identity(4),
            Gate::Sqisw => sqisw(),
            Gate::Iswap => iswap(),
            Gate::Cnot => cnot(),
            Gate::Custom { target, .. } => target.clone(),
        }
    }

    pub fn events(&self, params: &DeviceParams) -> Vec<PulseEvent> {
        let interact = |gt: f64| PulseEvent::Detune {
            delta: 0.0,
            duration: gt / params.g,
        };
        match self {
            Gate::Identity => Vec::new(),
            Gate::Sqisw => vec![interact(FRAC_PI_2)],
            Gate::Iswap => vec![interact(PI)],
            Gate::Cnot => vec![
                PulseEvent::rot_y(Qubit::A, FRAC_PI_2),
                interact(FRAC_PI_2),
                PulseEvent::rot_x(Qubit::A, PI),
                interact(FRAC_PI_2),
                PulseEvent::rot_x(Qubit::A, FRAC_PI_2),
                PulseEvent::rot_x(Qubit::B, -FRAC_PI_2),
                PulseEvent::rot_y(Qubit::A, -FRAC_PI_2),
            ],
            Gate::Custom { events, .. } => events.clone(),
        }
    }
}

/// Everything that defines one simulated tomography run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub params: DeviceParams,
    pub noise: NoiseModel,
    pub readout: MeasurementModel,
    pub shots: Shots,
    pub seed: u64,
    pub mode: PulseMode,
    pub project_physical: bool,
}

impl Experiment {
    /// Noiseless device, ideal readout, exact probabilities.
    pub fn ideal(params: DeviceParams) -> Self {
        Self {
            params,
            noise: NoiseModel::noiseless(),
            readout: MeasurementModel::ideal(),
            shots: Shots::Exact,
            seed: 0,
            mode: PulseMode::Instantaneous,
            project_physical: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.noise.validate()?;
        self.readout.validate()
    }

    /// Events with empty microwave layers replaced by idles, so that in finite
    /// mode every input and setting spends the same time before readout.
    fn padded(&self, events: Vec<PulseEvent>) -> Vec<PulseEvent> {
        match self.mode {
            PulseMode::Finite { duration } if events.is_empty() => {
                vec![PulseEvent::Idle { duration }]
            }
            _ => events,
        }
    }

    fn outcome(&self, rho: &DensityMatrix, seed: u64) -> Result<(ProbVector, Option<ShotRecord>)> {
        let measured = apply_model(
            &self.readout,
            &ProbVector::from_populations(rho.populations())?,
        );
        match self.shots {
            Shots::Exact => Ok((measured, None)),
            Shots::Count(n) => {
                let rec = sample(&measured, n, seed)?;
                Ok((rec.frequencies(), Some(rec)))
            }
        }
    }
}

/// One state-tomography run on a prepared, gated input.
#[derive(Debug, Clone)]
pub struct TomographyRun {
    pub input: InputState,
    /// Measured outcome frequencies per setting, in `qst_settings` order.
    pub measured: Vec<ProbVector>,
    /// Raw counts per setting when sampling.
    pub records: Vec<ShotRecord>,
    pub uncalibrated: DensityMatrix,
    pub calibrated: DensityMatrix,
    /// Some calibration-corrected distribution carried a negative entry.
    pub negative_corrected: bool,
}

impl TomographyRun {
    pub fn output(&self, calibrated: bool) -> &DensityMatrix {
        if calibrated {
            &self.calibrated
        } else {
            &self.uncalibrated
        }
    }
}

/// State just before the tomography pulses: preparation then gate.
pub fn gate_output(gate: &Gate, input: InputState, exp: &Experiment) -> Result<DensityMatrix> {
    let mut events = exp.padded(input.preparation());
    events.extend(gate.events(&exp.params));
    evolve_events(
        &DensityMatrix::ground(),
        &events,
        &exp.params,
        &exp.noise,
        exp.mode,
    )
}

/// Prepares `input`, applies `gate`, measures all nine settings and reconstructs
/// both with and without readout-calibration inversion. `stream` selects the
/// block of derived seeds used for sampling.
pub fn tomography_run(
    gate: &Gate,
    input: InputState,
    exp: &Experiment,
    stream: u64,
) -> Result<TomographyRun> {
    exp.validate()?;
    let out = gate_output(gate, input, exp)?;
    let mut measured = Vec::with_capacity(9);
    let mut records = Vec::new();
    let mut corrected = Vec::with_capacity(9);
    let mut negative = false;
    for (k, setting) in qst_settings().iter().enumerate() {
        let rho = evolve_events(
            &out,
            &exp.padded(setting.events()),
            &exp.params,
            &exp.noise,
            exp.mode,
        )?;
        let seed = derive_seed(exp.seed, stream * 9 + k as u64);
        let (p, rec) = exp.outcome(&rho, seed)?;
        if let Some(r) = rec {
            records.push(r.with_setting(format!("{}|{}", input.label(), setting.label())));
        }
        let c = invert_model(&exp.readout, &p)?;
        negative |= c.negative;
        corrected.push(c.probs);
        measured.push(p);
    }
    let finish = |rho: DensityMatrix| -> Result<DensityMatrix> {
        if exp.project_physical {
            project_physical(&rho)
        } else {
            Ok(rho)
        }
    };
    Ok(TomographyRun {
        input,
        uncalibrated: finish(qst_reconstruct(&measured)?)?,
        calibrated: finish(qst_reconstruct(&corrected)?)?,
        measured,
        records,
        negative_corrected: negative,
    })
}

/// Reconstructed output state for one input, calibrated or not.
pub fn qpt_run(
    gate: &Gate,
    input: InputState,
    exp: &Experiment,
    calibrate: bool,
) -> Result<DensityMatrix> {
    let stream = qpt_inputs().iter().position(|i| *i == input).unwrap_or(0) as u64;
    Ok(tomography_run(gate, input, exp, stream)?
        .output(calibrate)
        .clone())
}

/// Full 16-input process tomography.
#[derive(Debug, Clone)]
pub struct QptReport {
    pub theory: ChiMatrix,
    pub calibrated: QptFit,
    pub uncalibrated: QptFit,
    pub fidelity_calibrated: f64,
    pub fidelity_uncalibrated: f64,
    pub runs: Vec<TomographyRun>,
}

/// Runs the 16 inputs (in parallel, ordered) and fits χ from the same measured
/// data with and without calibration inversion.
pub fn run_qpt(gate: &Gate, exp: &Experiment) -> Result<QptReport> {
    exp.validate()?;
    let runs: Vec<TomographyRun> = qpt_inputs()
        .into_par_iter()
        .enumerate()
        .map(|(k, input)| tomography_run(gate, input, exp, k as u64))
        .collect::<Result<_>>()?;
    let fit = |calibrated: bool| {
        let pairs: Vec<(DensityMatrix, DensityMatrix)> = runs
            .iter()
            .map(|r| (r.input.density(), r.output(calibrated).clone()))
            .collect();
        qpt_reconstruct(&pairs)
    };
    let calibrated = fit(true)?;
    let uncalibrated = fit(false)?;
    let theory = chi_theory(&gate.target())?;
    Ok(QptReport {
        fidelity_calibrated: process_fidelity(&theory, &calibrated.chi)?,
        fidelity_uncalibrated: process_fidelity(&theory, &uncalibrated.chi)?,
        theory,
        calibrated,
        uncalibrated,
        runs,
    })
}

/// Relative rate step used by [`classify_elements`].
pub const SENSITIVITY_STEP: f64 = 0.1;

/// Attributes flagged χ elements to relaxation or dephasing by finite
/// differences: both rates are scaled by 1 + step in turn, the exact-probability
/// calibrated χ is refitted, and each element is assigned to whichever
/// perturbation moves it more. Elements that move by less than `floor` under
/// both are left unattributed.
pub fn classify_elements(
    gate: &Gate,
    exp: &Experiment,
    flagged: &mut [FlaggedElement],
    floor: f64,
) -> Result<()> {
    let base = Experiment {
        shots: Shots::Exact,
        ..exp.clone()
    };
    let chi_for = |noise: NoiseModel| -> Result<ChiMatrix> {
        Ok(run_qpt(
            gate,
            &Experiment {
                noise,
                ..base.clone()
            },
        )?
        .calibrated
        .chi)
    };
    let chi0 = chi_for(base.noise)?;
    let chi_rel = chi_for(base.noise.with_rates_scaled(1.0 + SENSITIVITY_STEP, 1.0)?)?;
    let chi_deph = chi_for(base.noise.with_rates_scaled(1.0, 1.0 + SENSITIVITY_STEP)?)?;
    for f in flagged.iter_mut() {
        let (m, n) = (f.row, f.col);
        let d_rel = (chi_rel.element(m, n) - chi0.element(m, n)).norm();
        let d_deph = (chi_deph.element(m, n) - chi0.element(m, n)).norm();
        f.class = Some(if d_rel.max(d_deph) < floor {
            DecoherenceClass::Unattributed
        } else if d_rel >= d_deph {
            DecoherenceClass::Relaxation
        } else {
            DecoherenceClass::Dephasing
        });
    }
    Ok(())
}

/// Flags elements of the calibrated χ deviating from theory and classifies them.
pub fn flagged_report(
    gate: &Gate,
    exp: &Experiment,
    report: &QptReport,
    threshold: f64,
) -> Result<Vec<FlaggedElement>> {
    let mut flagged = flag_elements(&report.calibrated.chi, &report.theory, threshold)?;
    classify_elements(gate, exp, &mut flagged, 1e-9)?;
    Ok(flagged)
}

/// Estimated readout model from the simulated calibration experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub f0a: f64,
    pub f1a: f64,
    pub f0b: f64,
    pub f1b: f64,
    /// Ratio estimator, denominator neglected.
    pub crosstalk_approximate: CrosstalkEstimate,
    /// Ratio estimator with the full denominator, solved jointly.
    pub crosstalk_exact: CrosstalkEstimate,
    /// x_AB from the |00⟩ run alone, with k = x_BA/x_AB from the exact ratio estimate.
    /// `None` when the ratio estimate of x_AB is not positive, leaving k undefined.
    pub crosstalk_consistency_xab: Option<f64>,
}

impl CalibrationReport {
    pub fn model(&self) -> Result<MeasurementModel> {
        MeasurementModel::new(
            self.f0a,
            self.f1a,
            self.f0b,
            self.f1b,
            self.crosstalk_exact.xab,
            self.crosstalk_exact.xba,
        )
    }
}

/// Runs the single-qubit fidelity and joint crosstalk experiments.
pub fn calibrate_readout(
    runner: &mut dyn ReadoutExperiment,
    t1_correction: Option<T1Correction>,
) -> Result<CalibrationReport> {
    let (f0a, f1a) = estimate_fidelities(runner, Qubit::A, t1_correction)?;
    let (f0b, f1b) = estimate_fidelities(runner, Qubit::B, t1_correction)?;
    let p00 = runner.joint_probabilities(false, false)?;
    let p01 = runner.joint_probabilities(false, true)?;
    let p10 = runner.joint_probabilities(true, false)?;
    let approx = estimate_crosstalk_pair(&p00, &p01, &p10, f0a, f0b, Denominator::Approximate)?;
    let exact = estimate_crosstalk_pair(&p00, &p01, &p10, f0a, f0b, Denominator::Exact)?;
    let consistency = if exact.xab > 0.0 {
        Some(crosstalk_consistency_solve(&p00, exact.xba / exact.xab)?)
    } else {
        None
    };
    Ok(CalibrationReport {
        f0a,
        f1a,
        f0b,
        f1b,
        crosstalk_approximate: approx,
        crosstalk_exact: exact,
        crosstalk_consistency_xab: consistency,
    })
}
