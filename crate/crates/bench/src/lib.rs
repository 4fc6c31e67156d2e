//! Shared inputs for the benchmarks.

use sqisw_core::dynamics::{hamiltonian, liouvillian, sqisw};
use sqisw_core::tomography::qpt_inputs;
use sqisw_core::{ComplexMatrix, DensityMatrix, DeviceParams, Experiment, NoiseModel, PulseMode};

/// 16×16 Liouvillian of the resonant device with the reference noise.
pub fn reference_liouvillian() -> ComplexMatrix {
    let noise = NoiseModel::nominal();
    liouvillian(
        &hamiltonian(&DeviceParams::nominal()),
        &noise.collapse_operators(),
    )
}

/// Dense Hermitian 16×16 test matrix.
pub fn hermitian16() -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(16, |i, j| {
        sqisw_core::numkernel::c(
            ((i * 7 + j * 3) % 11) as f64 - 5.0,
            ((i + 2 * j) % 5) as f64 - 2.0,
        )
    });
    (&a + &a.adjoint()).scale_re(0.5)
}

/// Input/output pairs of the ideal √iSWAP channel.
pub fn sqisw_pairs() -> Vec<(DensityMatrix, DensityMatrix)> {
    qpt_inputs()
        .iter()
        .map(|i| (i.density(), i.density().evolve_unitary(&sqisw())))
        .collect()
}

/// Reference noise, reference readout, finite pulses, exact probabilities.
pub fn noisy_experiment() -> Experiment {
    Experiment {
        noise: NoiseModel::nominal(),
        readout: sqisw_core::MeasurementModel::nominal(),
        mode: PulseMode::Finite { duration: 16.0 },
        ..Experiment::ideal(DeviceParams::nominal())
    }
}
