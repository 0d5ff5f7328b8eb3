//! Rotating-frame Hamiltonian of one ensemble member.
//!
//! `H(t) = Σ_k π(Δ + w_k δ) σ_z,k + α (I(t)/2 σ_x,k + Q(t)/2 σ_y,k)` in rad/µs.

use alloc::vec::Vec;

use crate::error::{require_finite, require_positive, Result};
use crate::linalg::{CMatrix, C64};
use crate::pulse::PulseCoefficients;
use crate::spin::{build_spin_matrices, HyperfineConfig};
use crate::TWO_PI;
use core::f64::consts::PI;

/// One point of the inhomogeneous ensemble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleMember {
    /// Detuning of the central transition from the drive, MHz.
    pub detuning_mhz: f64,
    /// Relative drive amplitude (1 is nominal).
    pub alpha: f64,
    /// Statistical weight; weights of an ensemble sum to one.
    pub weight: f64,
}

impl EnsembleMember {
    pub fn new(detuning_mhz: f64, alpha: f64, weight: f64) -> Result<Self> {
        require_finite("detuning", detuning_mhz)?;
        require_positive("alpha", alpha)?;
        require_finite("weight", weight)?;
        Ok(Self {
            detuning_mhz,
            alpha,
            weight,
        })
    }

    pub fn nominal() -> Self {
        Self {
            detuning_mhz: 0.0,
            alpha: 1.0,
            weight: 1.0,
        }
    }
}

/// Fourier components `H_n`, `n = −N_f..=N_f`, of the periodic Hamiltonian.
#[derive(Clone, Debug)]
pub struct FourierComponents {
    max_harmonic: usize,
    components: Vec<CMatrix>,
}

impl FourierComponents {
    pub fn max_harmonic(&self) -> usize {
        self.max_harmonic
    }

    pub fn dim(&self) -> usize {
        self.components[0].rows()
    }

    /// `H_n`, or `None` outside the band `|n| ≤ N_f`.
    pub fn get(&self, n: isize) -> Option<&CMatrix> {
        let idx = n + self.max_harmonic as isize;
        if idx < 0 {
            return None;
        }
        self.components.get(idx as usize)
    }

    /// Components restricted to the 2x2 block of transition `k`.
    pub fn block(&self, k: usize) -> FourierComponents {
        FourierComponents {
            max_harmonic: self.max_harmonic,
            components: self
                .components
                .iter()
                .map(|m| m.diagonal_block(2 * k, 2))
                .collect(),
        }
    }

    /// Evaluates `Σ_n H_n e^{inΩt}`.
    pub fn evaluate(&self, fundamental: f64, t_us: f64) -> CMatrix {
        let mut h = CMatrix::zeros(self.dim(), self.dim());
        for (idx, m) in self.components.iter().enumerate() {
            let n = idx as isize - self.max_harmonic as isize;
            h = h + m.scale(C64::from_polar(1.0, n as f64 * fundamental * t_us));
        }
        h
    }
}

pub fn hamiltonian_fourier_components(
    pulse: &PulseCoefficients,
    member: &EnsembleMember,
    config: &HyperfineConfig,
) -> FourierComponents {
    let spins = build_spin_matrices(config);
    let dim = config.dim();
    let nf = pulse.harmonics();
    let mut components = Vec::with_capacity(2 * nf + 1);
    for _ in 0..2 * nf + 1 {
        components.push(CMatrix::zeros(dim, dim));
    }
    let mut h0 = CMatrix::zeros(dim, dim);
    for (k, det) in config.transition_detunings(member.detuning_mhz).enumerate() {
        h0 = h0 + spins.z[k].scale(C64::new(PI * det, 0.0));
    }
    components[nf] = h0;
    // sin(x) = (e^{ix} − e^{−ix}) / 2i, so H_{+j} = α(a_jx σx + a_jy σy)/(2i) and H_{−j} = −H_{+j}.
    let coeff = C64::new(0.0, -0.5 * member.alpha);
    for j in 0..nf {
        let (ax, ay) = (TWO_PI * pulse.ax()[j], TWO_PI * pulse.ay()[j]);
        let mut hj = CMatrix::zeros(dim, dim);
        for k in 0..config.levels() {
            hj = hj + spins.x[k].scale(C64::new(ax, 0.0)) + spins.y[k].scale(C64::new(ay, 0.0));
        }
        let hj = hj.scale(coeff);
        components[nf - j - 1] = hj.scale(C64::new(-1.0, 0.0));
        components[nf + j + 1] = hj;
    }
    FourierComponents {
        max_harmonic: nf,
        components,
    }
}

/// `H(t)` for arbitrary envelope values `(I, Q)` in rad/µs.
pub fn hamiltonian_at(
    envelope: (f64, f64),
    member: &EnsembleMember,
    config: &HyperfineConfig,
) -> CMatrix {
    let dim = config.dim();
    let mut h = CMatrix::zeros(dim, dim);
    let (i, q) = envelope;
    let drive = 0.5 * member.alpha;
    for (k, det) in config.transition_detunings(member.detuning_mhz).enumerate() {
        let (r0, r1) = (2 * k, 2 * k + 1);
        h[(r0, r0)] = C64::new(PI * det, 0.0);
        h[(r1, r1)] = C64::new(-PI * det, 0.0);
        // σx I + σy Q has upper off-diagonal I − iQ.
        h[(r0, r1)] = C64::new(drive * i, -drive * q);
        h[(r1, r0)] = C64::new(drive * i, drive * q);
    }
    h
}

#[cfg(test)]
fn is_zero(m: &CMatrix) -> bool {
    m.as_slice().iter().all(|&z| z == crate::linalg::ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sample_pulse() -> PulseCoefficients {
        PulseCoefficients::new(vec![0.4, -0.2, 0.9], vec![-0.3, 0.6, 0.1], 1.85, 0.0).unwrap()
    }

    #[test]
    fn zero_order_component_is_pure_drift() {
        let member = EnsembleMember::new(0.3, 1.05, 1.0).unwrap();
        let cfg = HyperfineConfig::nitrogen14();
        let comps = hamiltonian_fourier_components(&sample_pulse(), &member, &cfg);
        let h0 = comps.get(0).unwrap();
        for (k, det) in cfg.transition_detunings(0.3).enumerate() {
            assert!((h0[(2 * k, 2 * k)].re - PI * det).abs() < 1e-14);
            assert!((h0[(2 * k + 1, 2 * k + 1)].re + PI * det).abs() < 1e-14);
        }
        assert!(comps.get(4).is_none() && comps.get(-4).is_none());
    }

    #[test]
    fn components_satisfy_hermitian_pairing() {
        let member = EnsembleMember::new(-0.7, 0.93, 1.0).unwrap();
        let comps = hamiltonian_fourier_components(&sample_pulse(), &member, &HyperfineConfig::nitrogen14());
        for n in 0..=3isize {
            let plus = comps.get(n).unwrap();
            let minus = comps.get(-n).unwrap();
            assert!(plus.adjoint().max_abs_diff(minus) < 1e-15);
        }
    }

    #[test]
    fn fourier_sum_reproduces_time_domain_hamiltonian() {
        let pulse = sample_pulse();
        let member = EnsembleMember::new(0.25, 1.1, 1.0).unwrap();
        let cfg = HyperfineConfig::nitrogen14();
        let comps = hamiltonian_fourier_components(&pulse, &member, &cfg);
        for t in [0.0, 0.3, 0.9, 1.6, 2.7] {
            let a = comps.evaluate(pulse.fundamental(), t);
            let b = hamiltonian_at(pulse.envelope(t), &member, &cfg);
            assert!(a.max_abs_diff(&b) < 1e-13, "t={t}");
            assert!(b.is_hermitian(1e-15));
        }
    }

    #[test]
    fn zero_pulse_has_only_drift() {
        let pulse = PulseCoefficients::zeros(4, 1.0).unwrap();
        let comps = hamiltonian_fourier_components(&pulse, &EnsembleMember::nominal(), &HyperfineConfig::single());
        for n in 1..=4isize {
            assert!(is_zero(comps.get(n).unwrap()));
        }
    }
}
