//! Sine-series pulse envelopes.
//!
//! The in-phase and quadrature envelopes are
//! `I(t) = 2π Σ_j 2 a_jx sin(jΩt)` and `Q(t) = 2π Σ_j 2 a_jy sin(jΩt)` with
//! `Ω = π / t_p`. Amplitudes `a_jk` are in MHz (Rabi-frequency units) and
//! the envelopes in rad/µs, so both vanish at `t = 0` and `t = t_p`. The envelope is
//! periodic with period `2 t_p`, which is what makes a Floquet treatment exact.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{require_finite, require_positive, Error, Result};
use crate::TWO_PI;

/// Sample density used by [`PulseCoefficients::max_rabi`], per harmonic over `[0, t_p]`.
pub const RABI_SAMPLES_PER_HARMONIC: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct PulseCoefficients {
    ax: Vec<f64>,
    ay: Vec<f64>,
    duration_us: f64,
    carrier_mhz: f64,
}

impl PulseCoefficients {
    /// Amplitudes in MHz for harmonics `j = 1..=N_f`.
    pub fn new(ax: Vec<f64>, ay: Vec<f64>, duration_us: f64, carrier_mhz: f64) -> Result<Self> {
        if ax.is_empty() || ax.len() != ay.len() {
            return Err(Error::invalid(
                "coefficients",
                alloc::format!(
                    "x and y amplitude lists must be non-empty and equal length ({} vs {})",
                    ax.len(),
                    ay.len()
                ),
            ));
        }
        if ax.iter().chain(&ay).any(|a| !a.is_finite()) {
            return Err(Error::invalid("coefficients", "amplitudes must be finite"));
        }
        require_positive("duration", duration_us)?;
        require_finite("carrier", carrier_mhz)?;
        Ok(Self {
            ax,
            ay,
            duration_us,
            carrier_mhz,
        })
    }

    pub fn zeros(harmonics: usize, duration_us: f64) -> Result<Self> {
        Self::new(vec![0.0; harmonics], vec![0.0; harmonics], duration_us, 0.0)
    }

    /// Rebuilds a pulse from the flat parameter layout of [`Self::params`].
    pub fn from_params(params: &[f64], duration_us: f64, carrier_mhz: f64) -> Result<Self> {
        if params.len() % 2 != 0 {
            return Err(Error::invalid("coefficients", "parameter vector length must be even"));
        }
        let n = params.len() / 2;
        Self::new(params[..n].to_vec(), params[n..].to_vec(), duration_us, carrier_mhz)
    }

    /// Flat parameter vector `[a_1x … a_Nx, a_1y … a_Ny]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.ax.clone();
        p.extend_from_slice(&self.ay);
        p
    }

    pub fn harmonics(&self) -> usize {
        self.ax.len()
    }

    pub fn ax(&self) -> &[f64] {
        &self.ax
    }

    pub fn ay(&self) -> &[f64] {
        &self.ay
    }

    pub fn duration_us(&self) -> f64 {
        self.duration_us
    }

    /// Carrier frequency. Metadata for export; it never enters the rotating-frame dynamics.
    pub fn carrier_mhz(&self) -> f64 {
        self.carrier_mhz
    }

    pub fn with_carrier(mut self, carrier_mhz: f64) -> Self {
        self.carrier_mhz = carrier_mhz;
        self
    }

    /// Fundamental angular frequency `π / t_p` in rad/µs.
    pub fn fundamental(&self) -> f64 {
        core::f64::consts::PI / self.duration_us
    }

    /// `Σ_j (a_jx² + a_jy²)`.
    pub fn sum_of_squares(&self) -> f64 {
        self.ax.iter().chain(&self.ay).map(|a| a * a).sum()
    }

    /// `(I(t), Q(t))` in rad/µs.
    pub fn envelope(&self, t_us: f64) -> (f64, f64) {
        let w = self.fundamental();
        let mut i = 0.0;
        let mut q = 0.0;
        for (j, (ax, ay)) in self.ax.iter().zip(&self.ay).enumerate() {
            let s = ((j + 1) as f64 * w * t_us).sin();
            i += 2.0 * TWO_PI * ax * s;
            q += 2.0 * TWO_PI * ay * s;
        }
        (i, q)
    }

    /// Instantaneous Rabi frequency `√(I² + Q²) / 2π` in MHz.
    pub fn rabi_mhz(&self, t_us: f64) -> f64 {
        let (i, q) = self.envelope(t_us);
        i.hypot(q) / TWO_PI
    }

    /// Peak Rabi frequency in MHz over `[0, t_p]`, sampled on a uniform grid.
    pub fn max_rabi(&self) -> f64 {
        let n = RABI_SAMPLES_PER_HARMONIC * self.harmonics();
        (0..=n)
            .map(|s| self.rabi_mhz(self.duration_us * s as f64 / n as f64))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            ax: self.ax.iter().map(|a| a * factor).collect(),
            ay: self.ay.iter().map(|a| a * factor).collect(),
            duration_us: self.duration_us,
            carrier_mhz: self.carrier_mhz,
        }
    }
}
