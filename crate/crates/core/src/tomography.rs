//! State and process tomography by linear inversion.
//!
//! # Conventions
//!
//! * Basis order {|00⟩, |01⟩, |10⟩, |11⟩}, qubit A is the left tensor factor.
//! * State tomography pre-rotations: none (measures σz), a +π/2 rotation about
//!   x (measures +σy), or a −π/2 rotation about y (measures +σx). The signs are
//!   chosen so each Bloch component lands on +σz before the z measurement.
//! * Input preparations from |0⟩: |1⟩ by a π rotation about x, |0⟩+|1⟩ by
//!   +π/2 about y, |0⟩+i|1⟩ by −π/2 about x.
//! * Process matrices use E_m = B_a ⊗ B_b, B = (I, σx, −iσy, σz), m = 4a + b,
//!   with ρ → Σ χ_mn E_m ρ E_n†. So "IZ" is index 3 (I on A, σz on B) and
//!   "ZI" is index 12.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::{rotation, PulseEvent, Qubit};
use crate::error::{Error, Result};
use crate::measurement::ProbVector;
use crate::numkernel::{c, lstsq, pauli, ComplexMatrix, RectMatrix, C64, ONE, ZERO};
use crate::state::product_ket;
pub use crate::state::DensityMatrix;

/// Index of the I⊗σz element.
pub const IZ: usize = 3;
/// Index of the σz⊗I element.
pub const ZI: usize = 12;

/// Below this, Re χ[IZ,IZ] is treated as zero and the extraction formulas are undefined.
pub const EXTRACTION_THRESHOLD: f64 = 1e-4;

/// Operator basis a χ matrix is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisTag {
    /// (I, σx, −iσy, σz) on each qubit.
    MinusIY,
    /// (I, σx, σy, σz) on each qubit.
    Pauli,
}

impl BasisTag {
    pub fn label(&self) -> &'static str {
        match self {
            BasisTag::MinusIY => "I,X,-iY,Z ⊗ I,X,-iY,Z",
            BasisTag::Pauli => "I,X,Y,Z ⊗ I,X,Y,Z",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        match s {
            "I,X,-iY,Z ⊗ I,X,-iY,Z" => Ok(BasisTag::MinusIY),
            "I,X,Y,Z ⊗ I,X,Y,Z" => Ok(BasisTag::Pauli),
            other => Err(Error::invalid(format!("unknown operator basis '{other}'"))),
        }
    }

    /// Phase of each single-qubit element relative to the plain Pauli matrix.
    fn single_phases(&self) -> [C64; 4] {
        match self {
            BasisTag::MinusIY => [ONE, ONE, c(0.0, -1.0), ONE],
            BasisTag::Pauli => [ONE; 4],
        }
    }

    fn phase(&self, m: usize) -> C64 {
        let p = self.single_phases();
        p[m / 4] * p[m % 4]
    }
}

impl fmt::Display for BasisTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The 16 two-qubit operators E_m, m = 4a + b.
pub fn operator_basis(tag: BasisTag) -> Vec<ComplexMatrix> {
    let single: Vec<ComplexMatrix> = (0..4)
        .map(|k| pauli::by_index(k).scale(tag.single_phases()[k]))
        .collect();
    let mut out = Vec::with_capacity(16);
    for a in &single {
        for b in &single {
            out.push(a.kron(b));
        }
    }
    out
}

/// Two-letter label such as "IZ" for basis index m.
pub fn element_label(m: usize) -> String {
    const L: [char; 4] = ['I', 'X', 'Y', 'Z'];
    format!("{}{}", L[m / 4], L[m % 4])
}

pub fn element_index(label: &str) -> Option<usize> {
    let idx = |ch: char| "IXYZ".find(ch);
    let mut it = label.chars();
    let (a, b) = (it.next()?, it.next()?);
    if it.next().is_some() {
        return None;
    }
    Some(4 * idx(a)? + idx(b)?)
}

/// 16×16 process matrix with its basis tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    matrix: ComplexMatrix,
    basis: BasisTag,
}

impl ChiMatrix {
    pub fn new(matrix: ComplexMatrix, basis: BasisTag) -> Result<Self> {
        if matrix.dim() != 16 {
            return Err(Error::DimensionMismatch {
                expected: 16,
                found: matrix.dim(),
            });
        }
        if !matrix.is_finite() {
            return Err(Error::invalid("non-finite chi entries"));
        }
        Ok(Self { matrix, basis })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    pub fn element(&self, m: usize, n: usize) -> C64 {
        self.matrix[(m, n)]
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Re-expresses the same process in another basis: χ'_mn = φ_m φ_n* χ_mn
    /// where E_m = φ_m E'_m.
    pub fn convert(&self, target: BasisTag) -> Self {
        let m = ComplexMatrix::from_fn(16, |i, j| {
            let phase_i = self.basis.phase(i) * target.phase(i).conj();
            let phase_j = self.basis.phase(j) * target.phase(j).conj();
            phase_i * self.matrix[(i, j)] * phase_j.conj()
        });
        Self {
            matrix: m,
            basis: target,
        }
    }

    /// Σ χ_mn E_m ρ E_n†
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let basis = operator_basis(self.basis);
        let left: Vec<ComplexMatrix> = basis.iter().map(|e| e * rho).collect();
        let right: Vec<ComplexMatrix> = basis.iter().map(|e| e.adjoint()).collect();
        let mut out = ComplexMatrix::zeros(4);
        for m in 0..16 {
            for n in 0..16 {
                let x = self.matrix[(m, n)];
                if x != ZERO {
                    out.add_scaled(x, &(&left[m] * &right[n]));
                }
            }
        }
        out
    }

    /// max |Σ χ_mn E_n† E_m − I|; zero for a trace-preserving process.
    pub fn trace_preservation_residual(&self) -> f64 {
        let basis = operator_basis(self.basis);
        let mut sum = ComplexMatrix::zeros(4);
        for m in 0..16 {
            for n in 0..16 {
                let x = self.matrix[(m, n)];
                if x != ZERO {
                    sum.add_scaled(x, &(&basis[n].adjoint() * &basis[m]));
                }
            }
        }
        sum.max_abs_diff(&ComplexMatrix::identity(4))
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(&self.matrix, self.basis.label())
    }

    pub fn from_json(j: &MatrixJson) -> Result<Self> {
        if j.dim != 16 {
            return Err(Error::DimensionMismatch {
                expected: 16,
                found: j.dim,
            });
        }
        Self::new(j.to_matrix()?, BasisTag::from_label(&j.basis)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("chi serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: MatrixJson = serde_json::from_str(s).map_err(|e| Error::invalid(e.to_string()))?;
        Self::from_json(&j)
    }
}

/// Basis label used when serializing density matrices.
pub const COMPUTATIONAL_BASIS: &str = "|00>,|01>,|10>,|11>";

/// Wire format for ρ and χ: real and imaginary parts as nested row arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub dim: usize,
    pub basis: String,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix, basis: &str) -> Self {
        let n = m.dim();
        Self {
            dim: n,
            basis: basis.to_string(),
            re: (0..n)
                .map(|i| (0..n).map(|j| m[(i, j)].re).collect())
                .collect(),
            im: (0..n)
                .map(|i| (0..n).map(|j| m[(i, j)].im).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.dim;
        let shape_ok = self.re.len() == n
            && self.im.len() == n
            && self.re.iter().chain(&self.im).all(|row| row.len() == n);
        if n == 0 || !shape_ok {
            return Err(Error::invalid(format!(
                "matrix JSON rows do not match dim {n}"
            )));
        }
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(c(self.re[i][j], self.im[i][j]));
            }
        }
        ComplexMatrix::from_vec(entries)
    }
}

pub fn density_to_json(rho: &DensityMatrix) -> MatrixJson {
    MatrixJson::from_matrix(rho.matrix(), COMPUTATIONAL_BASIS)
}

pub fn density_from_json(j: &MatrixJson) -> Result<DensityMatrix> {
    if j.basis != COMPUTATIONAL_BASIS {
        return Err(Error::BasisMismatch {
            left: j.basis.clone(),
            right: COMPUTATIONAL_BASIS.to_string(),
        });
    }
    DensityMatrix::new(j.to_matrix()?)
}

/// Single-qubit rotation applied before the z measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreRotation {
    /// No rotation: measures σz.
    Identity,
    /// +π/2 about x: measures σy.
    XHalf,
    /// −π/2 about y: measures σx.
    YHalf,
}

impl PreRotation {
    pub const ALL: [PreRotation; 3] = [
        PreRotation::Identity,
        PreRotation::XHalf,
        PreRotation::YHalf,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            PreRotation::Identity => "I",
            PreRotation::XHalf => "X/2",
            PreRotation::YHalf => "Y/2",
        }
    }

    pub fn event(&self, qubit: Qubit) -> Option<PulseEvent> {
        match self {
            PreRotation::Identity => None,
            PreRotation::XHalf => Some(PulseEvent::rot_x(qubit, FRAC_PI_2)),
            PreRotation::YHalf => Some(PulseEvent::rot_y(qubit, -FRAC_PI_2)),
        }
    }

    fn single_unitary(&self) -> ComplexMatrix {
        // rotation() embeds on a qubit; build the 2×2 by hand here
        let (axis, angle) = match self {
            PreRotation::Identity => return pauli::id(),
            PreRotation::XHalf => (pauli::x(), FRAC_PI_2),
            PreRotation::YHalf => (pauli::y(), -FRAC_PI_2),
        };
        let (s, co) = (angle / 2.0).sin_cos();
        &pauli::id().scale_re(co) + &axis.scale(c(0.0, -s))
    }

    /// Pauli index (1..=3) and sign σ such that R†σzR = sign·σ.
    pub fn measured_pauli(&self) -> (usize, f64) {
        let r = self.single_unitary();
        let heis = &(&r.adjoint() * &pauli::z()) * &r;
        for k in 1..4 {
            let overlap = (&pauli::by_index(k) * &heis).trace().re / 2.0;
            if (overlap.abs() - 1.0).abs() < 1e-9 {
                return (k, overlap.signum());
            }
        }
        unreachable!("pre-rotations map σz onto a signed Pauli");
    }
}

/// Pre-rotations for qubits A and B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TomoSetting {
    pub a: PreRotation,
    pub b: PreRotation,
}

impl TomoSetting {
    pub fn label(&self) -> String {
        format!("{},{}", self.a.label(), self.b.label())
    }

    pub fn events(&self) -> Vec<PulseEvent> {
        self.a
            .event(Qubit::A)
            .into_iter()
            .chain(self.b.event(Qubit::B))
            .collect()
    }

    pub fn unitary(&self) -> ComplexMatrix {
        self.a.single_unitary().kron(&self.b.single_unitary())
    }
}

/// The nine settings {I, X/2, Y/2} × {I, X/2, Y/2}, A-major.
pub fn qst_settings() -> Vec<TomoSetting> {
    let mut out = Vec::with_capacity(9);
    for a in PreRotation::ALL {
        for b in PreRotation::ALL {
            out.push(TomoSetting { a, b });
        }
    }
    out
}

/// Born-rule outcome distribution of `rho` under `setting`.
pub fn born_probabilities(rho: &DensityMatrix, setting: &TomoSetting) -> Result<ProbVector> {
    ProbVector::new(rho.evolve_unitary(&setting.unitary()).populations())
}

/// Outcome distributions for all nine settings, in [`qst_settings`] order.
pub fn qst_forward(rho: &DensityMatrix) -> Result<Vec<ProbVector>> {
    qst_settings()
        .iter()
        .map(|s| born_probabilities(rho, s))
        .collect()
}

/// Linear-inversion state estimate from the nine settings in [`qst_settings`] order.
pub fn qst_reconstruct(outcomes: &[ProbVector]) -> Result<DensityMatrix> {
    if outcomes.len() != 9 {
        return Err(Error::DimensionMismatch {
            expected: 9,
            found: outcomes.len(),
        });
    }
    qst_reconstruct_with(&qst_settings(), outcomes)
}

/// Linear inversion for an arbitrary list of settings covering all nine
/// (σ_i, σ_j) pairs. Correlators measured more than once, and the single-qubit
/// expectations (seen in three settings each), are averaged.
pub fn qst_reconstruct_with(
    settings: &[TomoSetting],
    outcomes: &[ProbVector],
) -> Result<DensityMatrix> {
    if settings.len() != outcomes.len() {
        return Err(Error::DimensionMismatch {
            expected: settings.len(),
            found: outcomes.len(),
        });
    }
    let mut sums = [[0.0f64; 4]; 4];
    let mut counts = [[0usize; 4]; 4];
    for (s, p) in settings.iter().zip(outcomes) {
        let (ia, sa) = s.a.measured_pauli();
        let (ib, sb) = s.b.measured_pauli();
        let [p00, p01, p10, p11] = p.0;
        let zz = p00 - p01 - p10 + p11;
        let za = p00 + p01 - p10 - p11;
        let zb = p00 - p01 + p10 - p11;
        sums[ia][ib] += sa * sb * zz;
        counts[ia][ib] += 1;
        sums[ia][0] += sa * za;
        counts[ia][0] += 1;
        sums[0][ib] += sb * zb;
        counts[0][ib] += 1;
    }
    let mut rho = ComplexMatrix::identity(4).scale_re(0.25);
    for i in 0..4 {
        for j in 0..4 {
            if i == 0 && j == 0 {
                continue;
            }
            if counts[i][j] == 0 {
                return Err(Error::invalid(format!(
                    "settings never measure {}",
                    element_label(4 * i + j)
                )));
            }
            let ev = sums[i][j] / counts[i][j] as f64;
            rho.add_scaled(
                c(0.25 * ev, 0.0),
                &pauli::by_index(i).kron(&pauli::by_index(j)),
            );
        }
    }
    // Hermitian and unit trace by construction
    DensityMatrix::new(rho)
}

/// Clips negative eigenvalues and renormalizes the spectrum.
pub fn project_physical(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let e = rho.matrix().eigh()?;
    let clipped: Vec<f64> = e.values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Unphysical(
            "density matrix has no positive spectrum".into(),
        ));
    }
    let normalized: Vec<f64> = clipped.iter().map(|v| v / total).collect();
    let m = e.reconstruct_with(&normalized);
    // restore exact Hermiticity lost to rounding
    let m = (&m + &m.adjoint()).scale_re(0.5);
    DensityMatrix::new(m)
}

/// Per-qubit input state label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputLabel {
    Zero,
    One,
    /// (|0⟩ + |1⟩)/√2
    Plus,
    /// (|0⟩ + i|1⟩)/√2
    PlusI,
}

impl InputLabel {
    pub const ALL: [InputLabel; 4] = [
        InputLabel::Zero,
        InputLabel::One,
        InputLabel::Plus,
        InputLabel::PlusI,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            InputLabel::Zero => "0",
            InputLabel::One => "1",
            InputLabel::Plus => "0+1",
            InputLabel::PlusI => "0+i1",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "0" => Ok(InputLabel::Zero),
            "1" => Ok(InputLabel::One),
            "0+1" => Ok(InputLabel::Plus),
            "0+i1" => Ok(InputLabel::PlusI),
            other => Err(Error::invalid(format!("unknown input state '{other}'"))),
        }
    }

    pub fn ket(&self) -> Vec<C64> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            InputLabel::Zero => vec![ONE, ZERO],
            InputLabel::One => vec![ZERO, ONE],
            InputLabel::Plus => vec![c(r, 0.0), c(r, 0.0)],
            InputLabel::PlusI => vec![c(r, 0.0), c(0.0, r)],
        }
    }

    /// Preparation from |0⟩; see the module conventions.
    pub fn preparation(&self, qubit: Qubit) -> Option<PulseEvent> {
        match self {
            InputLabel::Zero => None,
            InputLabel::One => Some(PulseEvent::rot_x(qubit, PI)),
            InputLabel::Plus => Some(PulseEvent::rot_y(qubit, FRAC_PI_2)),
            InputLabel::PlusI => Some(PulseEvent::rot_x(qubit, -FRAC_PI_2)),
        }
    }
}

/// Two-qubit product input state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InputState {
    pub a: InputLabel,
    pub b: InputLabel,
}

impl InputState {
    pub fn new(a: InputLabel, b: InputLabel) -> Self {
        Self { a, b }
    }

    /// Accepts "01" (two basis digits) or "0+i1,0+1" (comma-separated labels).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once(',') {
            return Ok(Self::new(InputLabel::parse(a)?, InputLabel::parse(b)?));
        }
        let chars: Vec<char> = s.chars().collect();
        if chars.len() == 2 && chars.iter().all(|ch| *ch == '0' || *ch == '1') {
            return Ok(Self::new(
                InputLabel::parse(&chars[0].to_string())?,
                InputLabel::parse(&chars[1].to_string())?,
            ));
        }
        Err(Error::invalid(format!("cannot parse input state '{s}'")))
    }

    pub fn label(&self) -> String {
        format!("{},{}", self.a.label(), self.b.label())
    }

    pub fn ket(&self) -> Vec<C64> {
        product_ket(&self.a.ket(), &self.b.ket())
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(&self.ket()).expect("input kets are normalized")
    }

    pub fn preparation(&self) -> Vec<PulseEvent> {
        self.a
            .preparation(Qubit::A)
            .into_iter()
            .chain(self.b.preparation(Qubit::B))
            .collect()
    }

    /// Unitary of the ideal preparation pulses.
    pub fn preparation_unitary(&self) -> ComplexMatrix {
        self.preparation()
            .iter()
            .fold(ComplexMatrix::identity(4), |acc, ev| match *ev {
                PulseEvent::Rotation { qubit, axis, angle } => &rotation(qubit, axis, angle) * &acc,
                _ => acc,
            })
    }
}

/// The 16 inputs {0, 1, 0+1, 0+i1}², A-major.
pub fn qpt_inputs() -> Vec<InputState> {
    let mut out = Vec::with_capacity(16);
    for a in InputLabel::ALL {
        for b in InputLabel::ALL {
            out.push(InputState::new(a, b));
        }
    }
    out
}

/// Result of [`qpt_reconstruct`].
#[derive(Debug, Clone)]
pub struct QptFit {
    pub chi: ChiMatrix,
    /// ‖Aθ − b‖₂ of the least-squares fit over all output entries.
    pub residual: f64,
}

/// Hermitian χ from input/output pairs by least squares.
///
/// χ is parameterized by 256 real numbers (diagonal entries, and real and
/// imaginary parts above the diagonal). Each output entry's real and
/// imaginary parts give one real equation.
pub fn qpt_reconstruct(pairs: &[(DensityMatrix, DensityMatrix)]) -> Result<QptFit> {
    if pairs.len() < 16 {
        return Err(Error::RankDeficient {
            column: pairs.len(),
            pivot: 0.0,
        });
    }
    check_input_span(pairs)?;

    let basis = operator_basis(BasisTag::MinusIY);
    let adj: Vec<ComplexMatrix> = basis.iter().map(|e| e.adjoint()).collect();

    // E_m ρ_i E_n† for every input, flattened row-major
    let sandwiches: Vec<Vec<Vec<C64>>> = pairs
        .iter()
        .map(|(rho_in, _)| {
            let left: Vec<ComplexMatrix> = basis.iter().map(|e| e * rho_in.matrix()).collect();
            let mut flat = Vec::with_capacity(256);
            for l in &left {
                for r in &adj {
                    flat.push((l * r).as_slice().to_vec());
                }
            }
            flat
        })
        .collect();

    let params = hermitian_parameters();
    let rows = pairs.len() * 32;
    let mut design = RectMatrix::zeros(rows, params.len());
    let mut rhs = vec![ZERO; rows];
    for (i, (_, rho_out)) in pairs.iter().enumerate() {
        let s = &sandwiches[i];
        for entry in 0..16 {
            let r_re = i * 32 + 2 * entry;
            let r_im = r_re + 1;
            let out = rho_out.matrix().as_slice()[entry];
            rhs[r_re] = c(out.re, 0.0);
            rhs[r_im] = c(out.im, 0.0);
            for (k, p) in params.iter().enumerate() {
                let v = match *p {
                    HermitianParam::Diag(m) => s[m * 16 + m][entry],
                    HermitianParam::Re(m, n) => s[m * 16 + n][entry] + s[n * 16 + m][entry],
                    HermitianParam::Im(m, n) => {
                        (s[m * 16 + n][entry] - s[n * 16 + m][entry]) * c(0.0, 1.0)
                    }
                };
                design[(r_re, k)] = c(v.re, 0.0);
                design[(r_im, k)] = c(v.im, 0.0);
            }
        }
    }
    let theta = lstsq(&design, &rhs)?;
    let fitted = design.matvec(&theta);
    let residual = fitted
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();

    let mut chi = ComplexMatrix::zeros(16);
    for (p, t) in params.iter().zip(&theta) {
        let t = t.re;
        match *p {
            HermitianParam::Diag(m) => chi[(m, m)] += t,
            HermitianParam::Re(m, n) => {
                chi[(m, n)] += t;
                chi[(n, m)] += t;
            }
            HermitianParam::Im(m, n) => {
                chi[(m, n)] += c(0.0, t);
                chi[(n, m)] += c(0.0, -t);
            }
        }
    }
    Ok(QptFit {
        chi: ChiMatrix::new(chi, BasisTag::MinusIY)?,
        residual,
    })
}

#[derive(Debug, Clone, Copy)]
enum HermitianParam {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

fn hermitian_parameters() -> Vec<HermitianParam> {
    let mut out = Vec::with_capacity(256);
    for m in 0..16 {
        out.push(HermitianParam::Diag(m));
        for n in (m + 1)..16 {
            out.push(HermitianParam::Re(m, n));
            out.push(HermitianParam::Im(m, n));
        }
    }
    out
}

/// The inputs must span the 16-dimensional operator space: Gram matrix Tr(ρ_i ρ_j) of rank 16.
fn check_input_span(pairs: &[(DensityMatrix, DensityMatrix)]) -> Result<()> {
    let n = pairs.len();
    let mut gram = RectMatrix::zeros(n, 16);
    for (i, (rho, _)) in pairs.iter().enumerate() {
        // coordinates in the orthogonal Pauli basis
        for (k, e) in operator_basis(BasisTag::Pauli).iter().enumerate() {
            gram[(i, k)] = (e * rho.matrix()).trace();
        }
    }
    let g = gram.gram();
    let e = g.eigh()?;
    let max = e.values.last().copied().unwrap_or(0.0);
    let min = e.values[0];
    if !(min > 1e-10 * max) {
        return Err(Error::RankDeficient {
            column: 0,
            pivot: min,
        });
    }
    Ok(())
}

/// χ = a·a† with a_m = Tr(E_m† U)/4.
pub fn chi_theory(u: &ComplexMatrix) -> Result<ChiMatrix> {
    if u.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: u.dim(),
        });
    }
    let dev = u.unitary_deviation();
    if dev > 1e-9 {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let a: Vec<C64> = operator_basis(BasisTag::MinusIY)
        .iter()
        .map(|e| (&e.adjoint() * u).trace() / 4.0)
        .collect();
    ChiMatrix::new(ComplexMatrix::outer(&a, &a), BasisTag::MinusIY)
}

/// Re Tr(χ_t χ_e).
pub fn process_fidelity(chi_t: &ChiMatrix, chi_e: &ChiMatrix) -> Result<f64> {
    if chi_t.basis != chi_e.basis {
        return Err(Error::BasisMismatch {
            left: chi_t.basis.label().into(),
            right: chi_e.basis.label().into(),
        });
    }
    let tr = (&chi_t.matrix * &chi_e.matrix).trace();
    if tr.im.abs() > 1e-6 {
        return Err(Error::NotHermitian {
            deviation: tr.im.abs(),
        });
    }
    Ok(tr.re)
}

fn iz_element(chi: &ChiMatrix) -> Result<f64> {
    let el = chi.element(IZ, IZ).re;
    if !(el >= EXTRACTION_THRESHOLD) {
        return Err(Error::ExtractionUndefined {
            element: el,
            threshold: EXTRACTION_THRESHOLD,
        });
    }
    Ok(el)
}

/// Dephasing time T2 = (3π + 2) / (16·g·Re χ[IZ,IZ]), g in rad/ns, result in ns.
pub fn extract_t2(chi_e: &ChiMatrix, g: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::invalid("coupling must be positive"));
    }
    let el = iz_element(chi_e)?;
    Ok((3.0 * PI + 2.0) / (16.0 * g * el))
}

/// Dephasing correlation κ ≈ Re χ[IZ,ZI] / Re χ[IZ,IZ] − (π − 2)/(3π + 2).
pub fn extract_kappa(chi_e: &ChiMatrix) -> Result<f64> {
    let el = iz_element(chi_e)?;
    Ok(chi_e.element(IZ, ZI).re / el - (PI - 2.0) / (3.0 * PI + 2.0))
}

/// Which decoherence channel an element responds to most strongly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoherenceClass {
    Relaxation,
    Dephasing,
    Unattributed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedElement {
    pub row: usize,
    pub col: usize,
    pub label: String,
    pub re: f64,
    pub im: f64,
    /// |χ_e − χ_t| at this element.
    pub deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<DecoherenceClass>,
}

/// Upper-triangle elements where the measured χ departs from theory by more than `threshold`,
/// largest first.
pub fn flag_elements(
    chi_e: &ChiMatrix,
    chi_t: &ChiMatrix,
    threshold: f64,
) -> Result<Vec<FlaggedElement>> {
    if chi_t.basis != chi_e.basis {
        return Err(Error::BasisMismatch {
            left: chi_t.basis.label().into(),
            right: chi_e.basis.label().into(),
        });
    }
    let mut out = Vec::new();
    for m in 0..16 {
        for n in m..16 {
            let e = chi_e.element(m, n);
            let dev = (e - chi_t.element(m, n)).norm();
            if dev > threshold {
                out.push(FlaggedElement {
                    row: m,
                    col: n,
                    label: format!("{},{}", element_label(m), element_label(n)),
                    re: e.re,
                    im: e.im,
                    deviation: dev,
                    class: None,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        b.deviation
            .total_cmp(&a.deviation)
            .then((a.row, a.col).cmp(&(b.row, b.col)))
    });
    Ok(out)
}
