//! Piecewise-constant time-stepping propagator.
//!
//! Independent of the Floquet machinery: the Hamiltonian is sampled at step
//! midpoints and each step is exponentiated with a general dense matrix
//! exponential. Used to verify Floquet propagators and to simulate drives that
//! are not periodic in the pulse duration (multi-tone flat pulses).

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{require_positive, Error, Result};
use crate::fidelity::Propagator;
use crate::hamiltonian::{hamiltonian_at, EnsembleMember};
use crate::linalg::{expm, expm_hermitian_2x2, CMatrix, C64};
use crate::pulse::PulseCoefficients;
use crate::spin::HyperfineConfig;

/// Minimum number of steps across the drive.
pub const MIN_STEPS: usize = 1000;

/// A control envelope `(I(t), Q(t))` in rad/µs over `[0, duration]`.
pub trait Envelope {
    fn envelope(&self, t_us: f64) -> (f64, f64);
    fn duration_us(&self) -> f64;
    /// Largest frequency (MHz) present in the drive: spectral content or Rabi magnitude.
    fn frequency_scale_mhz(&self) -> f64;
}

impl Envelope for PulseCoefficients {
    fn envelope(&self, t_us: f64) -> (f64, f64) {
        PulseCoefficients::envelope(self, t_us)
    }

    fn duration_us(&self) -> f64 {
        PulseCoefficients::duration_us(self)
    }

    fn frequency_scale_mhz(&self) -> f64 {
        let spectral = self.harmonics() as f64 / (2.0 * PulseCoefficients::duration_us(self));
        spectral.max(self.max_rabi())
    }
}

/// Steps must resolve this many periods of the fastest frequency in the problem.
pub const STEPS_PER_PERIOD: f64 = 100.0;

fn step_count(duration_us: f64, dt_us: f64, frequency_scale_mhz: f64) -> Result<usize> {
    require_positive("dt", dt_us)?;
    if dt_us * frequency_scale_mhz * STEPS_PER_PERIOD > 1.0 {
        return Err(Error::invalid(
            "dt",
            alloc::format!(
                "step {dt_us} us under-resolves the {frequency_scale_mhz} MHz frequency scale"
            ),
        ));
    }
    if dt_us > duration_us / MIN_STEPS as f64 {
        return Err(Error::invalid(
            "dt",
            alloc::format!(
                "step {dt_us} us exceeds duration/{MIN_STEPS} = {} us",
                duration_us / MIN_STEPS as f64
            ),
        ));
    }
    Ok((duration_us / dt_us).ceil() as usize)
}

/// Full `2K x 2K` propagator. The step is shortened slightly so that an
/// integer number of steps spans the drive exactly.
pub fn oracle_propagator<D: Envelope + ?Sized>(
    drive: &D,
    member: &EnsembleMember,
    config: &HyperfineConfig,
    dt_us: f64,
) -> Result<Propagator> {
    let duration = drive.duration_us();
    let detuning_scale = config
        .transition_detunings(member.detuning_mhz)
        .fold(0.0, |m: f64, d| m.max(d.abs()));
    let scale = (member.alpha * drive.frequency_scale_mhz()).max(detuning_scale);
    let steps = step_count(duration, dt_us, scale)?;
    let h = duration / steps as f64;
    let mut u = CMatrix::identity(config.dim());
    for n in 0..steps {
        let t = (n as f64 + 0.5) * h;
        let ham = hamiltonian_at(drive.envelope(t), member, config);
        let step = expm(&ham.scale(C64::new(0.0, -h)));
        u = step.matmul(&u);
    }
    Ok(Propagator::new(u, duration))
}

/// 2x2 propagator of a single transition at `detuning_mhz`, same scheme as
/// [`oracle_propagator`] with closed-form step exponentials.
pub fn oracle_block<D: Envelope + ?Sized>(
    drive: &D,
    detuning_mhz: f64,
    alpha: f64,
    dt_us: f64,
) -> Result<CMatrix> {
    let duration = drive.duration_us();
    let scale = (alpha * drive.frequency_scale_mhz()).max(detuning_mhz.abs());
    let steps = step_count(duration, dt_us, scale)?;
    let h = duration / steps as f64;
    let member = EnsembleMember {
        detuning_mhz,
        alpha,
        weight: 1.0,
    };
    let single = HyperfineConfig::single();
    let mut u = CMatrix::identity(2);
    for n in 0..steps {
        let t = (n as f64 + 0.5) * h;
        let ham = hamiltonian_at(drive.envelope(t), &member, &single);
        u = expm_hermitian_2x2(&ham, h).matmul(&u);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_bad_steps() {
        let p = PulseCoefficients::zeros(2, 1.0).unwrap();
        let cfg = HyperfineConfig::single();
        let m = EnsembleMember::nominal();
        assert!(matches!(
            oracle_propagator(&p, &m, &cfg, 0.0),
            Err(Error::InvalidInput { field: "dt", .. })
        ));
        assert!(oracle_propagator(&p, &m, &cfg, -1e-4).is_err());
        assert!(oracle_propagator(&p, &m, &cfg, 1e-2).is_err());
    }

    #[test]
    fn block_stepper_matches_full_stepper() {
        let p = PulseCoefficients::new(vec![1.0, -0.5], vec![0.2, 0.7], 1.5, 0.0).unwrap();
        let cfg = HyperfineConfig::nitrogen14();
        let m = EnsembleMember::new(0.3, 1.02, 1.0).unwrap();
        let full = oracle_propagator(&p, &m, &cfg, 1.5e-3).unwrap();
        for (k, det) in cfg.transition_detunings(0.3).enumerate() {
            let b = oracle_block(&p, det, 1.02, 1.5e-3).unwrap();
            assert!(b.max_abs_diff(&full.block(k)) < 1e-12);
        }
        assert_eq!(full.matrix()[(0, 2)], C64::new(0.0, 0.0));
    }

    #[test]
    fn rejects_steps_that_underresolve_detuning() {
        let p = PulseCoefficients::zeros(2, 1.0).unwrap();
        assert!(oracle_block(&p, 1.0, 1.0, 5e-4).is_ok());
        assert!(matches!(
            oracle_block(&p, 30.0, 1.0, 5e-4),
            Err(Error::InvalidInput { field: "dt", .. })
        ));
    }

    #[test]
    fn midpoint_stepping_is_second_order() {
        let p = PulseCoefficients::new(vec![0.6, -0.3, 0.2], vec![0.1, 0.4, -0.2], 1.2, 0.0).unwrap();
        let cfg = HyperfineConfig::nitrogen14();
        let m = EnsembleMember::new(0.4, 0.95, 1.0).unwrap();
        let u = |dt: f64| oracle_propagator(&p, &m, &cfg, dt).unwrap();
        let (a, b, c) = (u(1.2e-3), u(6e-4), u(3e-4));
        let d1 = a.matrix().max_abs_diff(b.matrix());
        let d2 = b.matrix().max_abs_diff(c.matrix());
        let ratio = d1 / d2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}
