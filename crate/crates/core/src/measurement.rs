//! Two-qubit readout: identification fidelity, measurement crosstalk, shot
//! sampling, and the calibration estimators that recover those parameters.
//!
//! Probability vectors are ordered (P₀₀, P₀₁, P₁₀, P₁₁) with qubit A as the
//! first label. Measured and intrinsic probabilities are related by
//! `P_m = X·F·P_i`, fidelity errors acting before crosstalk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Qubit;
use crate::error::{Error, Result};
use crate::numkernel::{c, ComplexMatrix};

pub const PROB_SUM_TOL: f64 = 1e-9;

/// Identification fidelities f₀A = f₁A = 0.95.
pub const NOMINAL_FIDELITY_A: f64 = 0.95;
/// Identification fidelities f₀B = f₁B = 0.93.
pub const NOMINAL_FIDELITY_B: f64 = 0.93;
/// x_AB = x_BA = 0.117.
pub const NOMINAL_CROSSTALK: f64 = 0.117;

/// Outcome distribution (P₀₀, P₀₁, P₁₀, P₁₁).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(pub [f64; 4]);

impl ProbVector {
    /// Checks finiteness and unit sum. Negative entries are allowed (see [`ProbVector::is_physical`]).
    pub fn new(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Unphysical("non-finite probability".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Unphysical(format!("probabilities sum to {sum}")));
        }
        Ok(Self(p))
    }

    /// From density-matrix populations, absorbing round-off of order 1e-12.
    pub fn from_populations(p: [f64; 4]) -> Result<Self> {
        Self::new(p)
    }

    pub fn basis(index: usize) -> Self {
        let mut p = [0.0; 4];
        p[index] = 1.0;
        Self(p)
    }

    pub fn p00(&self) -> f64 {
        self.0[0]
    }
    pub fn p01(&self) -> f64 {
        self.0[1]
    }
    pub fn p10(&self) -> f64 {
        self.0[2]
    }
    pub fn p11(&self) -> f64 {
        self.0[3]
    }

    pub fn has_negative(&self) -> bool {
        self.0.iter().any(|&x| x < 0.0)
    }

    pub fn is_physical(&self) -> bool {
        !self.has_negative() && self.0.iter().all(|&x| x <= 1.0 + PROB_SUM_TOL)
    }

    fn apply(&self, m: &ComplexMatrix) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|j| m[(i, j)].re * self.0[j]).sum();
        }
        out
    }
}

/// Readout imperfections of the two qubits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementModel {
    pub f0a: f64,
    pub f1a: f64,
    pub f0b: f64,
    pub f1b: f64,
    /// Probability that |1⟩ on A excites a 0→1 transition on B.
    pub xab: f64,
    /// Probability that |1⟩ on B excites a 0→1 transition on A.
    pub xba: f64,
}

impl MeasurementModel {
    pub fn new(f0a: f64, f1a: f64, f0b: f64, f1b: f64, xab: f64, xba: f64) -> Result<Self> {
        let m = Self {
            f0a,
            f1a,
            f0b,
            f1b,
            xab,
            xba,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn ideal() -> Self {
        Self {
            f0a: 1.0,
            f1a: 1.0,
            f0b: 1.0,
            f1b: 1.0,
            xab: 0.0,
            xba: 0.0,
        }
    }

    pub fn nominal() -> Self {
        Self::new(
            NOMINAL_FIDELITY_A,
            NOMINAL_FIDELITY_A,
            NOMINAL_FIDELITY_B,
            NOMINAL_FIDELITY_B,
            NOMINAL_CROSSTALK,
            NOMINAL_CROSSTALK,
        )
        .expect("nominal readout model is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("f0a", self.f0a),
            ("f1a", self.f1a),
            ("f0b", self.f0b),
            ("f1b", self.f1b),
            ("xab", self.xab),
            ("xba", self.xba),
        ];
        for (name, v) in fields {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn single_fidelity(f0: f64, f1: f64) -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[f0, 1.0 - f1], &[1.0 - f0, f1]])
}

/// F = F_A ⊗ F_B with F_q = [[f₀, 1−f₁], [1−f₀, f₁]].
pub fn fidelity_matrix(m: &MeasurementModel) -> ComplexMatrix {
    single_fidelity(m.f0a, m.f1a).kron(&single_fidelity(m.f0b, m.f1b))
}

/// Crosstalk matrix: |01⟩ leaks into |11⟩ with x_BA, |10⟩ with x_AB.
pub fn crosstalk_matrix(m: &MeasurementModel) -> ComplexMatrix {
    let mut x = ComplexMatrix::identity(4);
    x[(1, 1)] = c(1.0 - m.xba, 0.0);
    x[(2, 2)] = c(1.0 - m.xab, 0.0);
    x[(3, 1)] = c(m.xba, 0.0);
    x[(3, 2)] = c(m.xab, 0.0);
    x
}

/// P_m = X·F·P_i
pub fn apply_model(m: &MeasurementModel, p: &ProbVector) -> ProbVector {
    let f = ProbVector(p.apply(&fidelity_matrix(m)));
    ProbVector(f.apply(&crosstalk_matrix(m)))
}

/// Calibration-corrected probabilities. Entries may be slightly negative from
/// statistical fluctuation; they are reported, not clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corrected {
    pub probs: ProbVector,
    pub negative: bool,
}

/// P_i = F⁻¹·X⁻¹·P_m
pub fn invert_model(m: &MeasurementModel, p: &ProbVector) -> Result<Corrected> {
    let x_inv = crosstalk_matrix(m).inverse()?;
    let f_inv = fidelity_matrix(m).inverse()?;
    let probs = ProbVector::new(ProbVector(p.apply(&x_inv)).apply(&f_inv))?;
    Ok(Corrected {
        probs,
        negative: probs.has_negative(),
    })
}

/// Exact probabilities or a finite number of single-shot repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shots {
    #[default]
    Exact,
    Count(u32),
}

/// Histogram of single-shot outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
    pub shots: u64,
    #[serde(default)]
    pub setting: Option<String>,
}

impl ShotRecord {
    pub fn counts(&self) -> [u64; 4] {
        [self.n00, self.n01, self.n10, self.n11]
    }

    pub fn frequencies(&self) -> ProbVector {
        let n = self.shots as f64;
        ProbVector(self.counts().map(|k| k as f64 / n))
    }

    pub fn with_setting(mut self, setting: impl Into<String>) -> Self {
        self.setting = Some(setting.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 || self.counts().iter().sum::<u64>() != self.shots {
            return Err(Error::invalid("shot counts do not sum to the shot total"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("shot record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s).map_err(|e| Error::invalid(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }
}

/// Independent stream seed for grid cell `index` (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Multinomial draw of `shots` outcomes from `p`, deterministic in `seed`.
pub fn sample(p: &ProbVector, shots: u32, seed: u64) -> Result<ShotRecord> {
    if shots == 0 {
        return Err(Error::invalid("shot count must be positive"));
    }
    if p.0.iter().any(|&x| x < -PROB_SUM_TOL) {
        return Err(Error::Unphysical(format!("cannot sample from {:?}", p.0)));
    }
    let weights = p.0.map(|x| x.max(0.0));
    let total: f64 = weights.iter().sum();
    let mut cumulative = [0.0; 4];
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w / total;
        cumulative[k] = acc;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0u64; 4];
    for _ in 0..shots {
        let u: f64 = rng.gen();
        let k = cumulative
            .iter()
            .position(|&cdf| u < cdf)
            .unwrap_or_else(|| {
                // u landed on the rounding gap above the last cumulative value
                weights.iter().rposition(|&w| w > 0.0).unwrap_or(3)
            });
        counts[k] += 1;
    }
    Ok(ShotRecord {
        n00: counts[0],
        n01: counts[1],
        n10: counts[2],
        n11: counts[3],
        shots: shots as u64,
        setting: None,
    })
}

/// Single-qubit |1⟩ marginals (P₁A, P₁B) = (P₁₀ + P₁₁, P₀₁ + P₁₁).
pub fn trace_out(p: &ProbVector) -> (f64, f64) {
    (p.p10() + p.p11(), p.p01() + p.p11())
}

/// Source of calibration data: a device (real or simulated) that can prepare
/// basis states and report outcome probabilities.
pub trait ReadoutExperiment {
    /// Tunneling probability of `qubit` with only that qubit operated, prepared
    /// in |0⟩ or (via a π pulse) in |1⟩.
    fn single_qubit_p1(&mut self, qubit: Qubit, excited: bool) -> Result<f64>;

    /// Joint outcome distribution after preparing |a b⟩ on both qubits.
    fn joint_probabilities(&mut self, a: bool, b: bool) -> Result<ProbVector>;
}

/// Decay of the π-pulsed state before readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T1Correction {
    pub t1: f64,
    /// Delay between the π pulse and the measurement, ns.
    pub delay: f64,
}

impl T1Correction {
    pub fn survival(&self) -> f64 {
        (-self.delay / self.t1).exp()
    }
}

/// Readout model driven simulation of the calibration experiments.
#[derive(Debug, Clone)]
pub struct SimulatedReadout {
    pub model: MeasurementModel,
    /// Population decay of prepared |1⟩ states before readout.
    pub preparation_decay: Option<T1Correction>,
    pub shots: Shots,
    pub seed: u64,
    calls: u64,
}

impl SimulatedReadout {
    pub fn new(model: MeasurementModel, shots: Shots, seed: u64) -> Self {
        Self {
            model,
            preparation_decay: None,
            shots,
            seed,
            calls: 0,
        }
    }

    pub fn with_preparation_decay(mut self, decay: T1Correction) -> Self {
        self.preparation_decay = Some(decay);
        self
    }

    fn excited_population(&self) -> f64 {
        self.preparation_decay.map_or(1.0, |d| d.survival())
    }

    fn next_seed(&mut self) -> u64 {
        self.calls += 1;
        derive_seed(self.seed, self.calls)
    }

    fn draw(&mut self, p: ProbVector) -> Result<ProbVector> {
        match self.shots {
            Shots::Exact => Ok(p),
            Shots::Count(n) => {
                let seed = self.next_seed();
                Ok(sample(&p, n, seed)?.frequencies())
            }
        }
    }
}

impl ReadoutExperiment for SimulatedReadout {
    fn single_qubit_p1(&mut self, qubit: Qubit, excited: bool) -> Result<f64> {
        let (f0, f1) = match qubit {
            Qubit::A => (self.model.f0a, self.model.f1a),
            Qubit::B => (self.model.f0b, self.model.f1b),
        };
        let pop = if excited {
            self.excited_population()
        } else {
            0.0
        };
        let p1 = f1 * pop + (1.0 - f0) * (1.0 - pop);
        // reuse the two-outcome slots of a ProbVector for sampling
        let p = self.draw(ProbVector([1.0 - p1, p1, 0.0, 0.0]))?;
        Ok(p.p01())
    }

    fn joint_probabilities(&mut self, a: bool, b: bool) -> Result<ProbVector> {
        let pop = self.excited_population();
        let qa = if a { [1.0 - pop, pop] } else { [1.0, 0.0] };
        let qb = if b { [1.0 - pop, pop] } else { [1.0, 0.0] };
        let intrinsic = ProbVector([qa[0] * qb[0], qa[0] * qb[1], qa[1] * qb[0], qa[1] * qb[1]]);
        let measured = apply_model(&self.model, &intrinsic);
        self.draw(measured)
    }
}

/// (f₀, f₁) of one qubit from single-qubit tunneling probabilities.
///
/// f₀ = 1 − P(1 | |0⟩) and f₁ = P(1 | π pulse). With a T1 correction, the
/// decayed fraction (read as |0⟩, so tunneling with 1 − f₀) is subtracted and
/// the survival probability divided out.
pub fn estimate_fidelities(
    runner: &mut dyn ReadoutExperiment,
    qubit: Qubit,
    t1_correction: Option<T1Correction>,
) -> Result<(f64, f64)> {
    let p_dark = runner.single_qubit_p1(qubit, false)?;
    let p_bright = runner.single_qubit_p1(qubit, true)?;
    let f0 = 1.0 - p_dark;
    let f1 = match t1_correction {
        None => p_bright,
        Some(corr) => {
            let s = corr.survival();
            if !(s > 0.0) {
                return Err(Error::invalid(
                    "T1 correction leaves no surviving population",
                ));
            }
            (p_bright - p_dark * (1.0 - s)) / s
        }
    };
    Ok((f0, f1))
}

/// Below this change in the reference marginal the ratio estimate is rejected.
pub const MIN_RATIO_DENOMINATOR: f64 = 0.1;

fn ratio(numerator: f64, denominator: f64) -> Result<f64> {
    if denominator.abs() < MIN_RATIO_DENOMINATOR {
        return Err(Error::UnreliableEstimate {
            denominator,
            threshold: MIN_RATIO_DENOMINATOR,
        });
    }
    Ok(numerator / denominator)
}

/// x_BA from runs prepared in |00⟩ and |01⟩, using
/// [P₁A(01) − P₁A(00)] / [P₁B(01) − P₁B(00)] ≅ f₀A·x_BA.
pub fn estimate_crosstalk_ratio(
    p00_run: &ProbVector,
    p01_run: &ProbVector,
    f0a: f64,
) -> Result<f64> {
    let (a00, b00) = trace_out(p00_run);
    let (a01, b01) = trace_out(p01_run);
    Ok(ratio(a01 - a00, b01 - b00)? / f0a)
}

/// x_AB from runs prepared in |00⟩ and |10⟩; mirror image of [`estimate_crosstalk_ratio`].
pub fn estimate_crosstalk_ratio_ab(
    p00_run: &ProbVector,
    p10_run: &ProbVector,
    f0b: f64,
) -> Result<f64> {
    let (a00, b00) = trace_out(p00_run);
    let (a10, b10) = trace_out(p10_run);
    Ok(ratio(b10 - b00, a10 - a00)? / f0b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Denominator {
    /// Treat the ratio as exactly f₀A·x_BA.
    Approximate,
    /// Keep the 1 − (1 − f₀A)·x_AB denominator and solve both crosstalks jointly.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrosstalkEstimate {
    pub xab: f64,
    pub xba: f64,
}

/// Both crosstalk parameters from |00⟩, |01⟩ and |10⟩ runs.
///
/// The exact variant solves the linear pair
/// `f₀A·x_BA + r_BA(1 − f₀A)·x_AB = r_BA`, `f₀B·x_AB + r_AB(1 − f₀B)·x_BA = r_AB`
/// where r are the raw probability-change ratios.
pub fn estimate_crosstalk_pair(
    p00_run: &ProbVector,
    p01_run: &ProbVector,
    p10_run: &ProbVector,
    f0a: f64,
    f0b: f64,
    denominator: Denominator,
) -> Result<CrosstalkEstimate> {
    let r_ba = estimate_crosstalk_ratio(p00_run, p01_run, 1.0)?;
    let r_ab = estimate_crosstalk_ratio_ab(p00_run, p10_run, 1.0)?;
    match denominator {
        Denominator::Approximate => Ok(CrosstalkEstimate {
            xab: r_ab / f0b,
            xba: r_ba / f0a,
        }),
        Denominator::Exact => {
            // [f0a, r_ba(1-f0a)] [xba]   [r_ba]
            // [r_ab(1-f0b), f0b] [xab] = [r_ab]
            let (a, b) = (f0a, r_ba * (1.0 - f0a));
            let (cc, d) = (r_ab * (1.0 - f0b), f0b);
            let det = a * d - b * cc;
            if det.abs() < 1e-12 {
                return Err(Error::Singular);
            }
            let xba = (r_ba * d - b * r_ab) / det;
            let xab = (a * r_ab - cc * r_ba) / det;
            Ok(CrosstalkEstimate { xab, xba })
        }
    }
}

/// x_AB from a single |00⟩ measurement, assuming x_BA = k·x_AB.
///
/// Closed-form root of the quadratic obtained by eliminating f₀A and f₀B:
///
/// ```text
/// x_AB = [P₀₀ + kP₀₀ − k + kP₁₀ + P₀₁ − 1 ± √D] / [2k(P₀₀ − 1)]
/// D    = ((1 − P₀₀ − P₀₁) − k(1 − P₀₀ − P₁₀))² + 4kP₁₀P₀₁/P₀₀
/// ```
///
/// The 4kP₁₀P₀₁/P₀₀ term sits inside the radical. Because the denominator is
/// negative, the physical root (x in [0, 1]) is the `+√D` branch; the other
/// branch exceeds 1 for realistic readout. Both are evaluated and the one
/// giving probabilities in [0, 1] for both crosstalks is returned.
pub fn crosstalk_consistency_solve(p_measured_00: &ProbVector, k: f64) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!(
            "crosstalk ratio k must be positive, got {k}"
        )));
    }
    let (p00, p01, p10) = (
        p_measured_00.p00(),
        p_measured_00.p01(),
        p_measured_00.p10(),
    );
    if !(p00 > 0.0) {
        return Err(Error::invalid("P00 must be positive"));
    }
    let denom = 2.0 * k * (p00 - 1.0);
    if denom.abs() < 1e-14 {
        // perfect |0⟩ identification: crosstalk never fires and is unobservable
        return Err(Error::NoSolution { discriminant: 0.0 });
    }
    let disc = ((1.0 - p00 - p01) - k * (1.0 - p00 - p10)).powi(2) + 4.0 * k * p10 * p01 / p00;
    if disc < 0.0 {
        return Err(Error::NoSolution { discriminant: disc });
    }
    let lead = p00 + k * p00 - k + k * p10 + p01 - 1.0;
    let roots = [(lead + disc.sqrt()) / denom, (lead - disc.sqrt()) / denom];
    let tol = 1e-12;
    roots
        .into_iter()
        .find(|&x| x >= -tol && x <= 1.0 + tol && k * x <= 1.0 + tol)
        .map(|x| x.max(0.0))
        .ok_or(Error::NoSolution { discriminant: disc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn column_sums(m: &ComplexMatrix) -> Vec<f64> {
        (0..4).map(|j| (0..4).map(|i| m[(i, j)].re).sum()).collect()
    }

    #[test]
    fn fidelity_matrix_examples() {
        assert_eq!(
            fidelity_matrix(&MeasurementModel::ideal()),
            ComplexMatrix::identity(4)
        );
        let f = fidelity_matrix(&MeasurementModel::nominal());
        assert!(close(f[(0, 0)].re, 0.95 * 0.93, 1e-15));
        assert!(close(f[(0, 0)].re, 0.8835, 1e-12));
        // spot-check the expanded form: row 1, col 2 is (1−f1A)(1−f0B)
        assert!(close(f[(1, 2)].re, 0.05 * 0.07, 1e-15));
        for s in column_sums(&f) {
            assert!(close(s, 1.0, 1e-15));
        }
    }

    #[test]
    fn crosstalk_matrix_examples() {
        assert_eq!(
            crosstalk_matrix(&MeasurementModel::ideal()),
            ComplexMatrix::identity(4)
        );
        let x = crosstalk_matrix(&MeasurementModel::nominal());
        assert!(close(x[(3, 1)].re, 0.117, 0.0));
        assert!(close(x[(1, 1)].re, 0.883, 1e-15));
        for s in column_sums(&x) {
            assert!(close(s, 1.0, 1e-15));
        }
    }

    #[test]
    fn apply_model_single_column() {
        let m = MeasurementModel::new(1.0, 1.0, 1.0, 1.0, 0.0, 0.117).unwrap();
        let p = apply_model(&m, &ProbVector::basis(1));
        for (a, b) in p.0.iter().zip([0.0, 0.883, 0.0, 0.117]) {
            assert!(close(*a, b, 1e-15));
        }
        let q = ProbVector([0.1, 0.2, 0.3, 0.4]);
        assert_eq!(apply_model(&MeasurementModel::ideal(), &q), q);
    }

    #[test]
    fn invert_flags_negative_entries() {
        let m = MeasurementModel::nominal();
        // a measured vector with fewer |01⟩ counts than readout errors alone produce
        let c = invert_model(&m, &ProbVector([0.99, 0.0, 0.01, 0.0])).unwrap();
        assert!(c.negative);
        assert!(close(c.probs.0.iter().sum::<f64>(), 1.0, 1e-12));
    }

    #[test]
    fn invert_singular_model() {
        let m = MeasurementModel::new(0.5, 0.5, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(
            invert_model(&m, &ProbVector::basis(0)).unwrap_err(),
            Error::Singular
        );
    }

    #[test]
    fn model_validation() {
        assert!(MeasurementModel::new(1.1, 1.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(MeasurementModel::new(1.0, 1.0, 1.0, 1.0, -0.1, 0.0).is_err());
    }

    #[test]
    fn trace_out_examples() {
        assert_eq!(trace_out(&ProbVector::basis(3)), (1.0, 1.0));
        assert_eq!(trace_out(&ProbVector([0.25; 4])), (0.5, 0.5));
        let (a, b) = trace_out(&ProbVector([0.0, 0.883, 0.0, 0.117]));
        assert!(close(a, 0.117, 1e-15) && close(b, 1.0, 1e-15));
    }

    #[test]
    fn sampling() {
        let r = sample(&ProbVector::basis(0), 500, 3).unwrap();
        assert_eq!(r.n00, 500);
        let r = sample(&ProbVector([0.25; 4]), 1200, 17).unwrap();
        let sigma = (1200.0f64 * 0.25 * 0.75).sqrt();
        for n in r.counts() {
            assert!((n as f64 - 300.0).abs() < 5.0 * sigma);
        }
        assert_eq!(r, sample(&ProbVector([0.25; 4]), 1200, 17).unwrap());
        assert_ne!(r, sample(&ProbVector([0.25; 4]), 1200, 18).unwrap());
        assert!(sample(&ProbVector([1.5, -0.5, 0.0, 0.0]), 10, 0).is_err());
        assert!(sample(&ProbVector::basis(0), 0, 0).is_err());
    }

    #[test]
    fn shot_record_json() {
        let r = sample(&ProbVector([0.1, 0.2, 0.3, 0.4]), 100, 5)
            .unwrap()
            .with_setting("X/2,I");
        let s = r.to_json();
        assert!(s.starts_with("{\"n00\":"));
        assert!(s.contains("\"setting\":\"X/2,I\""));
        assert_eq!(ShotRecord::from_json(&s).unwrap(), r);
        assert!(ShotRecord::from_json(r#"{"n00":1,"n01":0,"n10":0,"n11":0,"shots":2}"#).is_err());
    }

    #[test]
    fn fidelity_estimation_exact() {
        let mut dev = SimulatedReadout::new(MeasurementModel::ideal(), Shots::Exact, 0);
        assert_eq!(
            estimate_fidelities(&mut dev, Qubit::A, None).unwrap(),
            (1.0, 1.0)
        );
        let m = MeasurementModel::new(0.95, 0.95, 0.93, 0.93, 0.0, 0.0).unwrap();
        let mut dev = SimulatedReadout::new(m, Shots::Exact, 0);
        let (f0, f1) = estimate_fidelities(&mut dev, Qubit::A, None).unwrap();
        assert!(close(f0, 0.95, 1e-12) && close(f1, 0.95, 1e-12));
    }

    #[test]
    fn fidelity_estimation_with_t1_correction() {
        let decay = T1Correction {
            t1: 400.0,
            delay: 8.0,
        };
        let m = MeasurementModel::nominal();
        let mut dev = SimulatedReadout::new(m, Shots::Exact, 0).with_preparation_decay(decay);
        let (_, f1_raw) = estimate_fidelities(&mut dev, Qubit::B, None).unwrap();
        assert!(f1_raw < 0.93 - 1e-3);
        let (f0, f1) = estimate_fidelities(&mut dev, Qubit::B, Some(decay)).unwrap();
        assert!(close(f0, 0.93, 1e-12) && close(f1, 0.93, 1e-12));
    }

    #[test]
    fn fidelity_estimation_sampled() {
        let shots = 100_000;
        let m = MeasurementModel::nominal();
        let mut dev = SimulatedReadout::new(m, Shots::Count(shots), 99);
        let (f0, f1) = estimate_fidelities(&mut dev, Qubit::A, None).unwrap();
        let sigma = (0.95f64 * 0.05 / shots as f64).sqrt();
        assert!((f0 - 0.95).abs() < 3.0 * sigma && (f1 - 0.95).abs() < 3.0 * sigma);
    }

    fn crosstalk_runs(m: &MeasurementModel) -> (ProbVector, ProbVector, ProbVector) {
        let mut dev = SimulatedReadout::new(*m, Shots::Exact, 0);
        (
            dev.joint_probabilities(false, false).unwrap(),
            dev.joint_probabilities(false, true).unwrap(),
            dev.joint_probabilities(true, false).unwrap(),
        )
    }

    #[test]
    fn crosstalk_ratio_examples() {
        let m = MeasurementModel::new(1.0, 1.0, 1.0, 1.0, 0.117, 0.117).unwrap();
        let (p00, p01, _) = crosstalk_runs(&m);
        assert!(close(
            estimate_crosstalk_ratio(&p00, &p01, 1.0).unwrap(),
            0.117,
            1e-10
        ));

        let m = MeasurementModel::new(0.95, 0.95, 0.93, 0.93, 0.0, 0.0).unwrap();
        let (p00, p01, _) = crosstalk_runs(&m);
        assert!(close(
            estimate_crosstalk_ratio(&p00, &p01, 0.95).unwrap(),
            0.0,
            1e-15
        ));

        // no change in P1B: rejected
        let err = estimate_crosstalk_ratio(&p00, &p00, 0.95).unwrap_err();
        assert!(matches!(err, Error::UnreliableEstimate { .. }));
    }

    #[test]
    fn crosstalk_ratio_tolerates_imperfect_preparation() {
        let m = MeasurementModel::nominal();
        let (p00, p01, _) = crosstalk_runs(&m);
        let perfect = estimate_crosstalk_ratio(&p00, &p01, m.f0a).unwrap();
        let decay = T1Correction {
            t1: 400.0,
            delay: 16.0,
        };
        let mut dev = SimulatedReadout::new(m, Shots::Exact, 0).with_preparation_decay(decay);
        let q00 = dev.joint_probabilities(false, false).unwrap();
        let q01 = dev.joint_probabilities(false, true).unwrap();
        let depleted = estimate_crosstalk_ratio(&q00, &q01, m.f0a).unwrap();
        assert!((perfect - depleted).abs() < 1e-3);
    }

    #[test]
    fn exact_denominator_recovers_nominal_crosstalk() {
        let m = MeasurementModel::nominal();
        let (p00, p01, p10) = crosstalk_runs(&m);
        let approx =
            estimate_crosstalk_pair(&p00, &p01, &p10, m.f0a, m.f0b, Denominator::Approximate)
                .unwrap();
        assert!((approx.xba - 0.117).abs() > 1e-4);
        let exact =
            estimate_crosstalk_pair(&p00, &p01, &p10, m.f0a, m.f0b, Denominator::Exact).unwrap();
        assert!(close(exact.xba, 0.117, 1e-12) && close(exact.xab, 0.117, 1e-12));
    }

    #[test]
    fn consistency_solver() {
        let m = MeasurementModel::nominal();
        let p = apply_model(&m, &ProbVector::basis(0));
        assert!(close(
            crosstalk_consistency_solve(&p, 1.0).unwrap(),
            0.117,
            1e-9
        ));

        let m0 = MeasurementModel::new(0.95, 0.95, 0.93, 0.93, 0.0, 0.0).unwrap();
        let p = apply_model(&m0, &ProbVector::basis(0));
        assert!(close(
            crosstalk_consistency_solve(&p, 1.0).unwrap(),
            0.0,
            1e-12
        ));

        let m2 = MeasurementModel::new(0.9, 0.95, 0.97, 0.9, 0.05, 0.1).unwrap();
        let p = apply_model(&m2, &ProbVector::basis(0));
        assert!(close(
            crosstalk_consistency_solve(&p, 2.0).unwrap(),
            0.05,
            1e-9
        ));

        // perfect |0⟩ identification leaves crosstalk unobservable
        let p = apply_model(
            &MeasurementModel::new(1.0, 0.9, 1.0, 0.9, 0.1, 0.1).unwrap(),
            &ProbVector::basis(0),
        );
        assert!(matches!(
            crosstalk_consistency_solve(&p, 1.0),
            Err(Error::NoSolution { .. })
        ));
        assert!(crosstalk_consistency_solve(&p, 0.0).is_err());
    }

    #[test]
    fn consistency_agrees_with_ratio_estimator() {
        let m = MeasurementModel::nominal();
        let (p00, p01, p10) = crosstalk_runs(&m);
        let exact =
            estimate_crosstalk_pair(&p00, &p01, &p10, m.f0a, m.f0b, Denominator::Exact).unwrap();
        let cons = crosstalk_consistency_solve(&p00, 1.0).unwrap();
        assert!(close(exact.xab, cons, 1e-6));
    }

    fn arb_prob() -> impl Strategy<Value = ProbVector> {
        prop::array::uniform4(0.0f64..1.0).prop_filter_map("nonzero", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| ProbVector(w.map(|x| x / s)))
        })
    }

    fn arb_model() -> impl Strategy<Value = MeasurementModel> {
        (
            0.6f64..=1.0,
            0.6f64..=1.0,
            0.6f64..=1.0,
            0.6f64..=1.0,
            0.0f64..0.5,
            0.0f64..0.5,
        )
            .prop_map(|(a, b, cc, d, e, f)| MeasurementModel::new(a, b, cc, d, e, f).unwrap())
    }

    proptest! {
        #[test]
        fn model_maps_simplex_into_itself(m in arb_model(), p in arb_prob()) {
            let q = apply_model(&m, &p);
            prop_assert!(q.0.iter().all(|&x| x >= -1e-15));
            prop_assert!((q.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for s in column_sums(&fidelity_matrix(&m)).into_iter().chain(column_sums(&crosstalk_matrix(&m))) {
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn invert_undoes_apply(m in arb_model(), p in arb_prob()) {
            let back = invert_model(&m, &apply_model(&m, &p)).unwrap();
            for (a, b) in back.probs.0.iter().zip(p.0) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
