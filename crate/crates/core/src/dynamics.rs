//! Rotating-frame model of two capacitively coupled qubits.
//!
//! The frame co-rotates with qubit A, so detuning appears only as a σz term
//! on qubit B:
//!
//! ```text
//! H/ħ = (g/4)(σx⊗σx + σy⊗σy) − (Δ/2)(I⊗σz)
//! ```
//!
//! Internally frequencies are angular, in rad/ns, and times are in ns. Public
//! constructors that take MHz values convert with `ω = 2π·f·1e-3`.
//!
//! Open-system evolution uses the Lindblad equation with relaxation and
//! (local plus common) dephasing channels, propagated exactly per
//! piecewise-constant segment by exponentiating the 16×16 Liouvillian.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{apply_model, derive_seed, sample, MeasurementModel, ProbVector, Shots};
use crate::numkernel::{c, pauli, ComplexMatrix, ONE};
use crate::state::DensityMatrix;

pub const NOMINAL_COUPLING_MHZ: f64 = 11.0;
pub const NOMINAL_DETUNING_OFF_MHZ: f64 = 200.0;
pub const NOMINAL_QUBIT_FREQ_MHZ: f64 = 5500.0;
pub const NOMINAL_T1_NS: f64 = 400.0;
pub const NOMINAL_T2_NS: f64 = 120.0;
pub const NOMINAL_PI_PULSE_NS: f64 = 16.0;

/// f [MHz] → ω [rad/ns]
pub fn mhz_to_rad_per_ns(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz * 1e-3
}

pub fn rad_per_ns_to_mhz(w: f64) -> f64 {
    w / (2.0 * PI * 1e-3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qubit {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn pauli(self) -> ComplexMatrix {
        match self {
            Axis::X => pauli::x(),
            Axis::Y => pauli::y(),
            Axis::Z => pauli::z(),
        }
    }
}

/// Embeds a single-qubit operator on `qubit`, identity on the other.
pub fn embed(qubit: Qubit, op: &ComplexMatrix) -> ComplexMatrix {
    match qubit {
        Qubit::A => op.kron(&pauli::id()),
        Qubit::B => pauli::id().kron(op),
    }
}

/// Coupling g = (C_c / C)·ω₁₀. Units of the result follow `omega10`.
pub fn coupling_from_capacitance(cc: f64, c_qubit: f64, omega10: f64) -> Result<f64> {
    if !(cc > 0.0) || !(c_qubit > 0.0) {
        return Err(Error::invalid("capacitances must be positive"));
    }
    if cc >= c_qubit {
        return Err(Error::invalid(
            "coupling capacitance must be smaller than the qubit capacitance",
        ));
    }
    if !(omega10 > 0.0) || !omega10.is_finite() {
        return Err(Error::invalid("qubit frequency must be positive"));
    }
    Ok(cc / c_qubit * omega10)
}

/// Coupling, detuning and nominal qubit frequency, all in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    pub g: f64,
    pub delta: f64,
    pub omega10: f64,
}

impl DeviceParams {
    pub fn new(g: f64, delta: f64, omega10: f64) -> Result<Self> {
        let p = Self { g, delta, omega10 };
        p.validate()?;
        Ok(p)
    }

    /// From g/2π and Δ/2π in MHz, with the nominal 5.5 GHz qubit frequency.
    pub fn from_mhz(g_mhz: f64, delta_mhz: f64) -> Result<Self> {
        Self::new(
            mhz_to_rad_per_ns(g_mhz),
            mhz_to_rad_per_ns(delta_mhz),
            mhz_to_rad_per_ns(NOMINAL_QUBIT_FREQ_MHZ),
        )
    }

    /// g/2π = 11 MHz, on resonance.
    pub fn nominal() -> Self {
        Self::from_mhz(NOMINAL_COUPLING_MHZ, 0.0).expect("nominal parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::invalid(format!(
                "coupling g must be positive, got {}",
                self.g
            )));
        }
        if !self.delta.is_finite() || self.delta.abs() >= 2.0 * PI {
            return Err(Error::invalid(format!(
                "detuning {} rad/ns outside |Δ| < 2π·1 GHz",
                self.delta
            )));
        }
        if !(self.omega10 > 0.0) || !self.omega10.is_finite() {
            return Err(Error::invalid("qubit frequency must be positive"));
        }
        Ok(())
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..*self }
    }

    /// Interaction time of a full swap, gt = π.
    pub fn swap_time(&self) -> f64 {
        PI / self.g
    }

    /// Interaction time of the square-root swap, gt = π/2.
    pub fn sqisw_time(&self) -> f64 {
        FRAC_PI_2 / self.g
    }
}

/// Relaxation and dephasing times in ns; `corr` is the fraction of each qubit's
/// pure-dephasing rate carried by a channel common to both qubits.
///
/// Infinite times switch the corresponding channel off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub t1a: f64,
    pub t1b: f64,
    pub t2a: f64,
    pub t2b: f64,
    pub corr: f64,
}

impl NoiseModel {
    pub fn new(t1a: f64, t1b: f64, t2a: f64, t2b: f64, corr: f64) -> Result<Self> {
        let n = Self {
            t1a,
            t1b,
            t2a,
            t2b,
            corr,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn symmetric(t1: f64, t2: f64, corr: f64) -> Result<Self> {
        Self::new(t1, t1, t2, t2, corr)
    }

    pub fn noiseless() -> Self {
        Self {
            t1a: f64::INFINITY,
            t1b: f64::INFINITY,
            t2a: f64::INFINITY,
            t2b: f64::INFINITY,
            corr: 0.0,
        }
    }

    /// T1 = 400 ns, T2 = 120 ns on both qubits, uncorrelated.
    pub fn nominal() -> Self {
        Self::symmetric(NOMINAL_T1_NS, NOMINAL_T2_NS, 0.0).expect("nominal noise is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("t1a", self.t1a),
            ("t1b", self.t1b),
            ("t2a", self.t2a),
            ("t2b", self.t2b),
        ] {
            if !(t > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {t}")));
            }
        }
        for (q, t1, t2) in [("A", self.t1a, self.t2a), ("B", self.t1b, self.t2b)] {
            if t2 > 2.0 * t1 * (1.0 + 1e-12) {
                return Err(Error::invalid(format!(
                    "qubit {q}: T2 = {t2} exceeds 2·T1 = {}",
                    2.0 * t1
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.corr) {
            return Err(Error::invalid(format!(
                "corr must lie in [0, 1], got {}",
                self.corr
            )));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.relaxation_rate(Qubit::A) == 0.0
            && self.relaxation_rate(Qubit::B) == 0.0
            && self.dephasing_rate(Qubit::A) == 0.0
            && self.dephasing_rate(Qubit::B) == 0.0
    }

    pub fn relaxation_rate(&self, q: Qubit) -> f64 {
        1.0 / match q {
            Qubit::A => self.t1a,
            Qubit::B => self.t1b,
        }
    }

    /// Pure dephasing rate 1/Tφ = 1/T2 − 1/(2T1).
    pub fn dephasing_rate(&self, q: Qubit) -> f64 {
        let (t1, t2) = match q {
            Qubit::A => (self.t1a, self.t2a),
            Qubit::B => (self.t1b, self.t2b),
        };
        (1.0 / t2 - 0.5 / t1).max(0.0)
    }

    /// Lindblad operators: σ⁻ relaxation and local σz dephasing per qubit, plus one
    /// common σz_A + σz_B channel.
    ///
    /// With D[√γ σz] dephasing coherences at 2γ, the local channel takes
    /// γ = (1 − corr)/(2Tφ) and the common one γ = corr/(2Tφ̄), so for equal
    /// qubits each coherence still decays at 1/T2 for every value of corr.
    /// The common channel uses the mean of the two pure-dephasing rates.
    pub fn collapse_operators(&self) -> Vec<ComplexMatrix> {
        let mut ops = Vec::with_capacity(5);
        let z = pauli::z();
        for q in [Qubit::A, Qubit::B] {
            let g1 = self.relaxation_rate(q);
            if g1 > 0.0 {
                ops.push(embed(q, &pauli::lowering()).scale_re(g1.sqrt()));
            }
            let gphi = (1.0 - self.corr) * self.dephasing_rate(q) / 2.0;
            if gphi > 0.0 {
                ops.push(embed(q, &z).scale_re(gphi.sqrt()));
            }
        }
        let mean_phi = 0.5 * (self.dephasing_rate(Qubit::A) + self.dephasing_rate(Qubit::B));
        let gcommon = self.corr * mean_phi / 2.0;
        if gcommon > 0.0 {
            let zz = &embed(Qubit::A, &z) + &embed(Qubit::B, &z);
            ops.push(zz.scale_re(gcommon.sqrt()));
        }
        ops
    }

    /// Same model with every relaxation and pure-dephasing rate multiplied by the given factors.
    pub fn with_rates_scaled(&self, relaxation: f64, dephasing: f64) -> Result<Self> {
        let mut out = *self;
        for q in [Qubit::A, Qubit::B] {
            let g1 = self.relaxation_rate(q) * relaxation;
            let gphi = self.dephasing_rate(q) * dephasing;
            let t1 = 1.0 / g1;
            let t2 = 1.0 / (gphi + 0.5 * g1);
            match q {
                Qubit::A => {
                    out.t1a = t1;
                    out.t2a = t2;
                }
                Qubit::B => {
                    out.t1b = t1;
                    out.t2b = t2;
                }
            }
        }
        out.validate()?;
        Ok(out)
    }
}

/// H/ħ in rad/ns.
pub fn hamiltonian(params: &DeviceParams) -> ComplexMatrix {
    let exchange = &pauli::x().kron(&pauli::x()) + &pauli::y().kron(&pauli::y());
    let detuning = embed(Qubit::B, &pauli::z());
    &exchange.scale_re(params.g / 4.0) - &detuning.scale_re(params.delta / 2.0)
}

/// exp(−iHt)
pub fn ideal_unitary(params: &DeviceParams, t: f64) -> Result<ComplexMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!(
            "evolution time must be non-negative, got {t}"
        )));
    }
    Ok(hamiltonian(params).scale(c(0.0, -t)).expm())
}

/// Closed-form on-resonance interaction unitary with cos(gt/2), −i·sin(gt/2) entries.
pub fn interaction_unitary(gt: f64) -> ComplexMatrix {
    let (s, co) = (gt / 2.0).sin_cos();
    let mut u = ComplexMatrix::identity(4);
    u[(1, 1)] = c(co, 0.0);
    u[(2, 2)] = c(co, 0.0);
    u[(1, 2)] = c(0.0, -s);
    u[(2, 1)] = c(0.0, -s);
    u
}

/// The square-root of iSWAP: on-resonance interaction for gt = π/2.
pub fn sqisw() -> ComplexMatrix {
    interaction_unitary(FRAC_PI_2)
}

/// Full swap with −i phases, gt = π.
pub fn iswap() -> ComplexMatrix {
    interaction_unitary(PI)
}

/// exp(−i·angle·σ_axis/2) on one qubit.
pub fn rotation(qubit: Qubit, axis: Axis, angle: f64) -> ComplexMatrix {
    let (s, co) = (angle / 2.0).sin_cos();
    let single = &pauli::id().scale_re(co) + &axis.pauli().scale(c(0.0, -s));
    embed(qubit, &single)
}

/// CNOT with qubit A as control.
pub fn cnot() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

/// CNOT = R_y^A(−90°)·[R_x^A(90°) ⊗ R_x^B(−90°)]·SQiSW·R_x^A(180°)·SQiSW·R_y^A(90°),
/// rightmost factor applied first. Equal to [`cnot`] up to a global phase.
pub fn cnot_from_sqisw() -> ComplexMatrix {
    let s = sqisw();
    let steps = [
        rotation(Qubit::A, Axis::Y, FRAC_PI_2),
        s.clone(),
        rotation(Qubit::A, Axis::X, PI),
        s,
        rotation(Qubit::B, Axis::X, -FRAC_PI_2),
        rotation(Qubit::A, Axis::X, FRAC_PI_2),
        rotation(Qubit::A, Axis::Y, -FRAC_PI_2),
    ];
    steps
        .iter()
        .fold(ComplexMatrix::identity(4), |acc, u| u * &acc)
}

/// Column-stacked Liouvillian: vec(dρ/dt) = L·vec(ρ).
///
/// Uses vec(AXB) = (Bᵀ ⊗ A)·vec(X).
pub fn liouvillian(h: &ComplexMatrix, collapse: &[ComplexMatrix]) -> ComplexMatrix {
    let n = h.dim();
    let id = ComplexMatrix::identity(n);
    let mut l = (&id.kron(h) - &h.transpose().kron(&id)).scale(c(0.0, -1.0));
    for op in collapse {
        let ldl = &op.adjoint() * op;
        l = &l + &op.conj().kron(op);
        l.add_scaled(c(-0.5, 0.0), &id.kron(&ldl));
        l.add_scaled(c(-0.5, 0.0), &ldl.transpose().kron(&id));
    }
    l
}

/// Superoperator exp(L·t) for a constant Hamiltonian.
pub fn propagator(h: &ComplexMatrix, noise: &NoiseModel, t: f64) -> Result<ComplexMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!(
            "evolution time must be non-negative, got {t}"
        )));
    }
    noise.validate()?;
    let l = liouvillian(h, &noise.collapse_operators());
    Ok(l.scale_re(t).expm())
}

pub fn apply_superoperator(s: &ComplexMatrix, rho: &DensityMatrix) -> DensityMatrix {
    let v = s.matvec(&rho.matrix().vectorize());
    let m = ComplexMatrix::unvectorize(&v).expect("superoperator of square dimension");
    DensityMatrix::from_matrix_unchecked(m)
}

/// dρ/dt = −i[H, ρ] + Σ D[L_k]ρ for time `t` at fixed parameters.
pub fn lindblad_evolve(
    rho: &DensityMatrix,
    params: &DeviceParams,
    noise: &NoiseModel,
    t: f64,
) -> Result<DensityMatrix> {
    params.validate()?;
    evolve_with(rho, &hamiltonian(params), noise, t)
}

/// Evolution with decoherence only (no Hamiltonian), used for pulse and idle windows.
pub fn decohere(rho: &DensityMatrix, noise: &NoiseModel, t: f64) -> Result<DensityMatrix> {
    evolve_with(rho, &ComplexMatrix::zeros(4), noise, t)
}

fn evolve_with(
    rho: &DensityMatrix,
    h: &ComplexMatrix,
    noise: &NoiseModel,
    t: f64,
) -> Result<DensityMatrix> {
    if t == 0.0 {
        noise.validate()?;
        return Ok(rho.clone());
    }
    let s = propagator(h, noise, t)?;
    Ok(apply_superoperator(&s, rho))
}

/// One control event. Angles in radians, detunings in rad/ns, durations in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseEvent {
    Rotation {
        qubit: Qubit,
        axis: Axis,
        angle: f64,
    },
    /// Qubit B brought to detuning `delta` from A for `duration`; coupling active.
    Detune { delta: f64, duration: f64 },
    /// Both qubits parked far apart; only decoherence acts.
    Idle { duration: f64 },
}

impl PulseEvent {
    pub fn rot_x(qubit: Qubit, angle: f64) -> Self {
        PulseEvent::Rotation {
            qubit,
            axis: Axis::X,
            angle,
        }
    }

    pub fn rot_y(qubit: Qubit, angle: f64) -> Self {
        PulseEvent::Rotation {
            qubit,
            axis: Axis::Y,
            angle,
        }
    }

    pub fn rot_z(qubit: Qubit, angle: f64) -> Self {
        PulseEvent::Rotation {
            qubit,
            axis: Axis::Z,
            angle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PulseEvent::Rotation { angle, .. } if !angle.is_finite() => {
                Err(Error::invalid("rotation angle must be finite"))
            }
            PulseEvent::Detune { delta, duration } => {
                if !delta.is_finite() || delta.abs() >= 2.0 * PI {
                    return Err(Error::invalid(format!(
                        "detuning {delta} rad/ns out of range"
                    )));
                }
                check_duration(duration)
            }
            PulseEvent::Idle { duration } => check_duration(duration),
            _ => Ok(()),
        }
    }

    /// Microwave rotation (x or y axis), which occupies a pulse window in finite mode.
    fn is_microwave(&self) -> bool {
        matches!(
            self,
            PulseEvent::Rotation {
                axis: Axis::X | Axis::Y,
                ..
            }
        )
    }
}

fn check_duration(d: f64) -> Result<()> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::invalid(format!(
            "duration must be finite and non-negative, got {d}"
        )));
    }
    Ok(())
}

/// How microwave rotations are timed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PulseMode {
    /// Ideal, zero-duration rotations.
    #[default]
    Instantaneous,
    /// Each layer of simultaneous x/y rotations occupies `duration` ns of
    /// decoherence-only evolution, with the ideal rotation applied at its midpoint.
    /// z rotations stay instantaneous (fast bias pulses).
    Finite { duration: f64 },
}

impl PulseMode {
    pub fn window(&self) -> f64 {
        match *self {
            PulseMode::Instantaneous => 0.0,
            PulseMode::Finite { duration } => duration,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSequence {
    pub events: Vec<PulseEvent>,
    /// Seed for any shot sampling performed on this sequence's outcome.
    pub seed: u64,
}

impl PulseSequence {
    pub fn new(events: Vec<PulseEvent>) -> Self {
        Self { events, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn total_duration(&self, mode: PulseMode) -> f64 {
        let mut total = 0.0;
        for layer in layers(&self.events, mode) {
            total += match layer {
                Layer::Pulses(_) => mode.window(),
                Layer::Single(PulseEvent::Detune { duration, .. })
                | Layer::Single(PulseEvent::Idle { duration }) => duration,
                Layer::Single(_) => 0.0,
            };
        }
        total
    }
}

enum Layer {
    /// Simultaneous microwave rotations, at most one per qubit.
    Pulses(Vec<PulseEvent>),
    Single(PulseEvent),
}

fn layers(events: &[PulseEvent], mode: PulseMode) -> Vec<Layer> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let ev = events[i];
        if ev.is_microwave() && matches!(mode, PulseMode::Finite { .. }) {
            let mut group = vec![ev];
            let mut used = vec![qubit_of(&ev)];
            let mut j = i + 1;
            while j < events.len()
                && events[j].is_microwave()
                && !used.contains(&qubit_of(&events[j]))
            {
                used.push(qubit_of(&events[j]));
                group.push(events[j]);
                j += 1;
            }
            out.push(Layer::Pulses(group));
            i = j;
        } else {
            out.push(Layer::Single(ev));
            i += 1;
        }
    }
    out
}

fn qubit_of(ev: &PulseEvent) -> Qubit {
    match ev {
        PulseEvent::Rotation { qubit, .. } => *qubit,
        _ => unreachable!("only rotations carry a qubit"),
    }
}

fn event_unitary(ev: &PulseEvent) -> ComplexMatrix {
    match *ev {
        PulseEvent::Rotation { qubit, axis, angle } => rotation(qubit, axis, angle),
        _ => unreachable!("only rotations are instantaneous unitaries"),
    }
}

/// Applies `events` to `rho` in order.
pub fn evolve_events(
    rho: &DensityMatrix,
    events: &[PulseEvent],
    params: &DeviceParams,
    noise: &NoiseModel,
    mode: PulseMode,
) -> Result<DensityMatrix> {
    params.validate()?;
    noise.validate()?;
    if let PulseMode::Finite { duration } = mode {
        check_duration(duration)?;
    }
    for ev in events {
        ev.validate()?;
    }
    let mut state = rho.clone();
    for layer in layers(events, mode) {
        state = match layer {
            Layer::Pulses(group) => {
                let u = group.iter().fold(ComplexMatrix::identity(4), |acc, ev| {
                    &event_unitary(ev) * &acc
                });
                let half = mode.window() / 2.0;
                let s = decohere(&state, noise, half)?;
                decohere(&s.evolve_unitary(&u), noise, half)?
            }
            Layer::Single(ev @ PulseEvent::Rotation { .. }) => {
                state.evolve_unitary(&event_unitary(&ev))
            }
            Layer::Single(PulseEvent::Detune { delta, duration }) => {
                lindblad_evolve(&state, &params.with_delta(delta), noise, duration)?
            }
            Layer::Single(PulseEvent::Idle { duration }) => decohere(&state, noise, duration)?,
        };
    }
    Ok(state)
}

/// Runs a sequence from |00⟩⟨00|.
pub fn run_sequence(
    seq: &PulseSequence,
    params: &DeviceParams,
    noise: &NoiseModel,
    mode: PulseMode,
) -> Result<DensityMatrix> {
    evolve_events(&DensityMatrix::ground(), &seq.events, params, noise, mode)
}

/// The gate itself as a pulse sequence: on-resonance interaction for gt = π/2.
pub fn sqisw_events(params: &DeviceParams) -> Vec<PulseEvent> {
    vec![PulseEvent::Detune {
        delta: 0.0,
        duration: params.sqisw_time(),
    }]
}

/// Swap-oscillation experiment over a (Δ, t_f) grid.
#[derive(Debug, Clone)]
pub struct SwapScan {
    /// Interaction times in ns.
    pub tf_grid: Vec<f64>,
    /// Detunings in rad/ns.
    pub delta_grid: Vec<f64>,
    pub mode: PulseMode,
    pub readout: Option<MeasurementModel>,
    pub shots: Shots,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub delta: f64,
    pub tf: f64,
    pub probs: ProbVector,
}

impl SwapScan {
    pub fn exact(tf_grid: Vec<f64>, delta_grid: Vec<f64>) -> Self {
        Self {
            tf_grid,
            delta_grid,
            mode: PulseMode::Instantaneous,
            readout: None,
            shots: Shots::Exact,
            seed: 0,
        }
    }

    /// Prepares |10⟩ with a π pulse on A, evolves at each detuning for each t_f,
    /// and records the outcome distribution. Rows are Δ-major in grid order.
    pub fn run(&self, params: &DeviceParams, noise: &NoiseModel) -> Result<Vec<ScanPoint>> {
        if self.tf_grid.is_empty() || self.delta_grid.is_empty() {
            return Err(Error::invalid("scan grids must be non-empty"));
        }
        for &t in &self.tf_grid {
            check_duration(t)?;
        }
        let prep = evolve_events(
            &DensityMatrix::ground(),
            &[PulseEvent::rot_x(Qubit::A, PI)],
            params,
            noise,
            self.mode,
        )?;
        let ntf = self.tf_grid.len();
        let rows: Vec<Result<Vec<ScanPoint>>> = self
            .delta_grid
            .par_iter()
            .enumerate()
            .map(|(row, &delta)| {
                let p = params.with_delta(delta);
                p.validate()?;
                let states = evolve_on_grid(&prep, &hamiltonian(&p), noise, &self.tf_grid)?;
                states
                    .into_iter()
                    .enumerate()
                    .map(|(k, rho)| {
                        let probs = self
                            .readout_probs(&rho, derive_seed(self.seed, (row * ntf + k) as u64))?;
                        Ok(ScanPoint {
                            delta,
                            tf: self.tf_grid[k],
                            probs,
                        })
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(ntf * self.delta_grid.len());
        for r in rows {
            out.extend(r?);
        }
        Ok(out)
    }

    fn readout_probs(&self, rho: &DensityMatrix, seed: u64) -> Result<ProbVector> {
        let mut p = ProbVector::from_populations(rho.populations())?;
        if let Some(m) = &self.readout {
            p = apply_model(m, &p);
        }
        match self.shots {
            Shots::Exact => Ok(p),
            Shots::Count(n) => Ok(sample(&p, n, seed)?.frequencies()),
        }
    }
}

/// States ρ(t) for every t in `times`, propagating between sorted times and
/// reusing propagators for repeated steps.
fn evolve_on_grid(
    rho0: &DensityMatrix,
    h: &ComplexMatrix,
    noise: &NoiseModel,
    times: &[f64],
) -> Result<Vec<DensityMatrix>> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut cache: HashMap<u64, ComplexMatrix> = HashMap::new();
    let mut out = vec![rho0.clone(); times.len()];
    let mut current = rho0.clone();
    let mut t_now = 0.0;
    for idx in order {
        let dt = times[idx] - t_now;
        if dt > 0.0 {
            let s = match cache.get(&dt.to_bits()) {
                Some(s) => s,
                None => {
                    let s = propagator(h, noise, dt)?;
                    cache.entry(dt.to_bits()).or_insert(s)
                }
            };
            current = apply_superoperator(s, &current);
            t_now = times[idx];
        }
        out[idx] = current.clone();
    }
    Ok(out)
}

/// Peak-to-peak swing of P₀₁ for each detuning row, in grid order.
pub fn swap_amplitudes(points: &[ScanPoint]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    for p in points {
        let v = p.probs.p01();
        match out.iter_mut().find(|(d, _, _)| *d == p.delta) {
            Some((_, lo, hi)) => {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
            None => out.push((p.delta, v, v)),
        }
    }
    out.into_iter().map(|(d, lo, hi)| (d, hi - lo)).collect()
}

/// Swap amplitude g²/(g² + Δ²) of the detuned two-level exchange.
pub fn theory_amplitude(g: f64, delta: f64) -> f64 {
    g * g / (g * g + delta * delta)
}

/// Oscillation period from the mean spacing of upward mean-level crossings,
/// with linear interpolation between samples.
pub fn estimate_period(times: &[f64], values: &[f64]) -> Option<f64> {
    if times.len() != values.len() || times.len() < 3 {
        return None;
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let level = 0.5 * (lo + hi);
    let mut crossings = Vec::new();
    for k in 1..values.len() {
        let (a, b) = (values[k - 1] - level, values[k] - level);
        if a < 0.0 && b >= 0.0 {
            let frac = a / (a - b);
            crossings.push(times[k - 1] + frac * (times[k] - times[k - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    Some((crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}
