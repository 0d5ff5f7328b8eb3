//! Interchangeable propagation engines for single two-level transitions.
//!
//! The ensemble objective needs the transfer probability `|⟨−1|U|0⟩|²` of a
//! single transition (and its gradient) at many detunings for one pulse.
//! Engines split that into a per-pulse [`TransferEngine::prepare`] step and
//! cheap per-member evaluations.

use alloc::vec;

use crate::error::{Error, Result};
use crate::floquet::{solve_block, BlockComponents, BlockSolution, Truncation};
use crate::magnus::{MagnusEngine, MagnusPrepared};
use crate::pulse::PulseCoefficients;

pub trait TransferEngine: Sync {
    type Prepared: Sync;

    fn prepare(&self, pulse: &PulseCoefficients) -> Result<Self::Prepared>;

    /// Transfer probability of one transition at `detuning_mhz` with relative amplitude `alpha`.
    fn transfer(&self, prepared: &Self::Prepared, detuning_mhz: f64, alpha: f64) -> Result<f64>;

    /// As [`Self::transfer`], also adding `weight · ∂P/∂a` into `grad`
    /// (layout `[a_1x … a_Nx, a_1y … a_Ny]`).
    fn transfer_with_gradient(
        &self,
        prepared: &Self::Prepared,
        detuning_mhz: f64,
        alpha: f64,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64>;
}

/// Floquet-matrix engine.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FloquetEngine {
    pub truncation: Truncation,
}

impl TransferEngine for FloquetEngine {
    type Prepared = PulseCoefficients;

    fn prepare(&self, pulse: &PulseCoefficients) -> Result<PulseCoefficients> {
        Ok(pulse.clone())
    }

    fn transfer(&self, pulse: &PulseCoefficients, detuning_mhz: f64, alpha: f64) -> Result<f64> {
        let block = BlockComponents::from_pulse(pulse, detuning_mhz, alpha);
        let out = solve_block(&block, pulse.duration_us(), self.truncation)?;
        Ok(out.propagator[(1, 0)].norm_sqr())
    }

    fn transfer_with_gradient(
        &self,
        pulse: &PulseCoefficients,
        detuning_mhz: f64,
        alpha: f64,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        let nf = pulse.harmonics();
        if grad.len() != 2 * nf {
            return Err(Error::invalid("gradient", "buffer length must be 2 N_f"));
        }
        let block = BlockComponents::from_pulse(pulse, detuning_mhz, alpha);
        let out = solve_block(&block, pulse.duration_us(), self.truncation)?;
        let solution = BlockSolution::solve(&block, out.harmonics, pulse.duration_us())?;
        let (amp, damp) = solution.transfer_amplitude_gradient(alpha, nf);
        for (g, d) in grad.iter_mut().zip(damp) {
            *g += weight * 2.0 * (amp.conj() * d).re;
        }
        Ok(amp.norm_sqr())
    }
}

/// Runtime-selectable engine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Engine {
    Floquet(FloquetEngine),
    Magnus(MagnusEngine),
}

impl Default for Engine {
    fn default() -> Self {
        Engine::Magnus(MagnusEngine::default())
    }
}

pub enum EnginePrepared {
    Floquet(PulseCoefficients),
    Magnus(MagnusPrepared),
}

fn mismatch() -> Error {
    Error::invalid("engine", "prepared pulse belongs to a different engine")
}

impl TransferEngine for Engine {
    type Prepared = EnginePrepared;

    fn prepare(&self, pulse: &PulseCoefficients) -> Result<EnginePrepared> {
        Ok(match self {
            Engine::Floquet(e) => EnginePrepared::Floquet(e.prepare(pulse)?),
            Engine::Magnus(e) => EnginePrepared::Magnus(e.prepare(pulse)?),
        })
    }

    fn transfer(&self, prepared: &EnginePrepared, detuning_mhz: f64, alpha: f64) -> Result<f64> {
        match (self, prepared) {
            (Engine::Floquet(e), EnginePrepared::Floquet(p)) => e.transfer(p, detuning_mhz, alpha),
            (Engine::Magnus(e), EnginePrepared::Magnus(p)) => e.transfer(p, detuning_mhz, alpha),
            _ => Err(mismatch()),
        }
    }

    fn transfer_with_gradient(
        &self,
        prepared: &EnginePrepared,
        detuning_mhz: f64,
        alpha: f64,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        match (self, prepared) {
            (Engine::Floquet(e), EnginePrepared::Floquet(p)) => {
                e.transfer_with_gradient(p, detuning_mhz, alpha, weight, grad)
            }
            (Engine::Magnus(e), EnginePrepared::Magnus(p)) => {
                e.transfer_with_gradient(p, detuning_mhz, alpha, weight, grad)
            }
            _ => Err(mismatch()),
        }
    }
}

/// Convenience: transfer probability gradient of one member as a fresh vector.
pub fn transfer_gradient<E: TransferEngine>(
    engine: &E,
    pulse: &PulseCoefficients,
    detuning_mhz: f64,
    alpha: f64,
) -> Result<(f64, alloc::vec::Vec<f64>)> {
    let prep = engine.prepare(pulse)?;
    let mut grad = vec![0.0; 2 * pulse.harmonics()];
    let f = engine.transfer_with_gradient(&prep, detuning_mhz, alpha, 1.0, &mut grad)?;
    Ok((f, grad))
}
