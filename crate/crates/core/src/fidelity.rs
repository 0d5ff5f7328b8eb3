//! Propagators and state-transfer fidelities.

use alloc::vec::Vec;

use crate::engine::TransferEngine;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::spin::HyperfineConfig;

/// Unitary evolution over one pulse.
#[derive(Clone, Debug)]
pub struct Propagator {
    matrix: CMatrix,
    duration_us: f64,
}

impl Propagator {
    pub fn new(matrix: CMatrix, duration_us: f64) -> Self {
        Self {
            matrix,
            duration_us,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn duration_us(&self) -> f64 {
        self.duration_us
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// The 2x2 block of transition `k`.
    pub fn block(&self, k: usize) -> CMatrix {
        self.matrix.diagonal_block(2 * k, 2)
    }

    pub fn unitarity_defect(&self) -> Result<f64> {
        self.matrix.unitarity_defect()
    }
}

/// Allowed deviation of a state's squared norm from one.
pub const NORM_TOLERANCE: f64 = 1e-9;

fn check_state(name: &'static str, psi: &[C64], dim: usize) -> Result<()> {
    if psi.len() != dim {
        return Err(Error::invalid(
            name,
            alloc::format!("state has {} entries, propagator is {dim}-dimensional", psi.len()),
        ));
    }
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::invalid(name, alloc::format!("state must be normalized, |psi|^2 = {norm}")));
    }
    Ok(())
}

/// `|⟨ψ_f|U|ψ_i⟩|²`.
pub fn state_transfer_fidelity(u: &Propagator, initial: &[C64], target: &[C64]) -> Result<f64> {
    check_state("initial state", initial, u.dim())?;
    check_state("target state", target, u.dim())?;
    let evolved = u.matrix.apply(initial);
    let overlap: C64 = target.iter().zip(&evolved).map(|(t, e)| t.conj() * e).sum();
    Ok(overlap.norm_sqr())
}

/// Per-transition `|0⟩_k → |−1⟩_k` probabilities of a full propagator.
pub fn transition_fidelities(u: &Propagator, config: &HyperfineConfig) -> Result<Vec<f64>> {
    if u.dim() != config.dim() {
        return Err(Error::invalid("propagator", "dimension does not match hyperfine config"));
    }
    (0..config.levels())
        .map(|k| {
            state_transfer_fidelity(
                u,
                &crate::spin::ground_state(config, k),
                &crate::spin::target_state(config, k),
            )
        })
        .collect()
}

/// Mean `|0⟩_k → |−1⟩_k` probability over the `K` hyperfine transitions.
///
/// With `K = 1` this is the plain two-level transfer probability.
pub fn multi_level_average_fidelity<E: TransferEngine>(
    engine: &E,
    prepared: &E::Prepared,
    detuning_mhz: f64,
    alpha: f64,
    config: &HyperfineConfig,
) -> Result<f64> {
    let mut sum = 0.0;
    for det in config.transition_detunings(detuning_mhz) {
        sum += engine.transfer(prepared, det, alpha)?;
    }
    Ok(sum / config.levels() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ONE, ZERO};
    use alloc::vec;

    #[test]
    fn identity_keeps_population() {
        let u = Propagator::new(CMatrix::identity(2), 1.0);
        let f = state_transfer_fidelity(&u, &[ONE, ZERO], &[ZERO, ONE]).unwrap();
        assert_eq!(f, 0.0);
        let f = state_transfer_fidelity(&u, &[ONE, ZERO], &[ONE, ZERO]).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn rejects_unnormalized_states() {
        let u = Propagator::new(CMatrix::identity(2), 1.0);
        let r = state_transfer_fidelity(&u, &[ONE, ONE], &[ZERO, ONE]);
        assert!(matches!(r, Err(Error::InvalidInput { field: "initial state", .. })));
        let r = state_transfer_fidelity(&u, &vec![ONE], &[ZERO, ONE]);
        assert!(r.is_err());
    }
}
