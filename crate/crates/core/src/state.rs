use crate::error::{Error, Result};
use crate::numkernel::{c, ComplexMatrix, C64, ONE, ZERO};

/// Tolerance for Hermiticity and unit trace of a two-qubit density matrix.
pub const STATE_TOL: f64 = 1e-9;

/// Two-qubit density matrix in the {|00⟩, |01⟩, |10⟩, |11⟩} basis, qubit A on the left.
///
/// Construction checks Hermiticity and unit trace only. Positivity is not
/// enforced because linear-inversion reconstructions may carry small negative
/// eigenvalues; use [`DensityMatrix::min_eigenvalue`] to flag them.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: m.dim(),
            });
        }
        if !m.is_finite() {
            return Err(Error::Unphysical(
                "non-finite density matrix entries".into(),
            ));
        }
        let dev = m.hermitian_deviation();
        if dev > STATE_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = m.trace();
        if (tr - ONE).norm() > STATE_TOL {
            return Err(Error::Unphysical(format!("trace {tr} differs from 1")));
        }
        Ok(Self(m))
    }

    /// Wraps without validation. For propagator output whose trace drifts at the 1e-13 level.
    pub(crate) fn from_matrix_unchecked(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        if psi.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: psi.len(),
            });
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Unphysical("zero state vector".into()));
        }
        let v: Vec<C64> = psi.iter().map(|z| z / norm).collect();
        Ok(Self(ComplexMatrix::outer(&v, &v)))
    }

    /// Computational basis state |index⟩⟨index|, index = 2a + b.
    pub fn basis(index: usize) -> Self {
        assert!(index < 4);
        let mut m = ComplexMatrix::zeros(4);
        m[(index, index)] = ONE;
        Self(m)
    }

    pub fn ground() -> Self {
        Self::basis(0)
    }

    pub fn product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Self> {
        Self::new(a.kron(b))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// Diagonal (P₀₀, P₀₁, P₁₀, P₁₁).
    pub fn populations(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|i| self.0[(i, i)].re)
    }

    pub fn evolve_unitary(&self, u: &ComplexMatrix) -> Self {
        Self(self.0.conjugate_by(u))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.0.eigh()?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn is_physical(&self, eps: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -eps)
    }

    /// ½‖ρ − σ‖₁
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        let diff = &self.0 - &other.0;
        let e = diff.eigh()?;
        Ok(0.5 * e.values.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// ⟨ψ|ρ|ψ⟩ for a normalized pure target.
    pub fn fidelity_with_pure(&self, psi: &[C64]) -> f64 {
        let v = self.0.matvec(psi);
        psi.iter()
            .zip(&v)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .re
    }

    /// Uhlmann fidelity when one side is pure, otherwise Tr(ρσ) (exact for a pure argument).
    pub fn overlap(&self, other: &Self) -> f64 {
        (&self.0 * &other.0).trace().re
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        (&self.0 * op).trace()
    }
}

/// Two-qubit product ket |a⟩ ⊗ |b⟩.
pub fn product_ket(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut v = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            v.push(x * y);
        }
    }
    v
}

pub fn basis_ket(index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; 4];
    v[index] = c(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(DensityMatrix::new(ComplexMatrix::identity(4).scale_re(0.25)).is_ok());
        assert!(matches!(
            DensityMatrix::new(ComplexMatrix::identity(4)),
            Err(Error::Unphysical(_))
        ));
        let mut m = ComplexMatrix::identity(4).scale_re(0.25);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(
            DensityMatrix::new(m),
            Err(Error::NotHermitian { .. })
        ));
        assert!(matches!(
            DensityMatrix::new(ComplexMatrix::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn trace_distance_between_orthogonal_states() {
        let d = DensityMatrix::basis(0)
            .trace_distance(&DensityMatrix::basis(3))
            .unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }
}
