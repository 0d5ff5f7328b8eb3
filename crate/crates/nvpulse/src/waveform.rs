//! Sampled IQ envelopes for an arbitrary waveform generator.

use nvpulse_core::pulse::PulseCoefficients;
use nvpulse_core::TWO_PI;

use crate::error::{CliError, CliResult};
use crate::io::{Header, Table};

/// Required ratio of sample rate to the highest envelope frequency.
pub const OVERSAMPLING: f64 = 10.0;

/// Allowed relative gap between the sampled and analytic peak Rabi frequency.
pub const PEAK_TOLERANCE: f64 = 5e-3;

pub const COLUMNS: [&str; 3] = ["t_s", "I_norm", "Q_norm"];

#[derive(Clone, Debug, PartialEq)]
pub struct WaveformExport {
    /// Requested sample rate, Hz.
    pub sample_rate_hz: f64,
    pub times_s: Vec<f64>,
    pub i_norm: Vec<f64>,
    pub q_norm: Vec<f64>,
    /// Rabi frequency (MHz) of a full-scale `√(I² + Q²) = 1` sample.
    pub full_scale_mhz: f64,
    pub duration_us: f64,
    pub carrier_mhz: f64,
}

/// Highest frequency present in the envelopes, Hz.
pub fn envelope_bandwidth_hz(pulse: &PulseCoefficients) -> f64 {
    pulse.harmonics() as f64 * pulse.fundamental() / TWO_PI * 1e6
}

/// Samples `ceil(t_p · f_s)` points spread evenly over `[0, t_p]`, both ends included.
pub fn export_waveform(pulse: &PulseCoefficients, sample_rate_hz: f64) -> CliResult<WaveformExport> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(CliError::config("waveform.sample_rate_msps", "must be finite and > 0"));
    }
    let needed = OVERSAMPLING * envelope_bandwidth_hz(pulse);
    if sample_rate_hz < needed {
        return Err(CliError::config(
            "waveform.sample_rate_msps",
            format!(
                "{:.3} MS/s is below {OVERSAMPLING}x the {:.3} MHz envelope bandwidth ({:.3} MS/s)",
                sample_rate_hz * 1e-6,
                envelope_bandwidth_hz(pulse) * 1e-6,
                needed * 1e-6
            ),
        ));
    }
    let tp_us = pulse.duration_us();
    let n = ((tp_us * 1e-6 * sample_rate_hz).ceil() as usize).max(2);
    let full_scale = pulse.max_rabi();
    let scale = if full_scale > 0.0 { 1.0 / (TWO_PI * full_scale) } else { 0.0 };
    let mut out = WaveformExport {
        sample_rate_hz,
        times_s: Vec::with_capacity(n),
        i_norm: Vec::with_capacity(n),
        q_norm: Vec::with_capacity(n),
        full_scale_mhz: full_scale,
        duration_us: tp_us,
        carrier_mhz: pulse.carrier_mhz(),
    };
    for k in 0..n {
        let t_us = tp_us * k as f64 / (n - 1) as f64;
        let (i, q) = pulse.envelope(t_us);
        out.times_s.push(t_us * 1e-6);
        out.i_norm.push(i * scale);
        out.q_norm.push(q * scale);
    }
    let sampled = out.sampled_peak_mhz();
    if full_scale > 0.0 && (sampled - full_scale).abs() > PEAK_TOLERANCE * full_scale {
        return Err(CliError::config(
            "waveform.sample_rate_msps",
            format!("samples reach {sampled:.5} MHz of the {full_scale:.5} MHz peak; raise the sample rate"),
        ));
    }
    Ok(out)
}

impl WaveformExport {
    /// Peak Rabi frequency reconstructed from the samples, MHz.
    pub fn sampled_peak_mhz(&self) -> f64 {
        let peak = self
            .i_norm
            .iter()
            .zip(&self.q_norm)
            .map(|(i, q)| i.hypot(*q))
            .fold(0.0, f64::max);
        peak * self.full_scale_mhz
    }

    pub fn to_table(&self, mut header: Header) -> Table {
        header
            .push_f64("sample_rate_hz", self.sample_rate_hz)
            .push("samples", self.times_s.len())
            .push_f64("duration_us", self.duration_us)
            .push_f64("carrier_mhz", self.carrier_mhz)
            .push_f64("full_scale_rabi_mhz", self.full_scale_mhz);
        let mut t = Table::new(header, &COLUMNS);
        for k in 0..self.times_s.len() {
            t.push_row(vec![self.times_s[k], self.i_norm[k], self.q_norm[k]]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_harmonic(ax: f64, ay: f64) -> PulseCoefficients {
        let mut x = vec![0.0; 10];
        let mut y = vec![0.0; 10];
        x[0] = ax;
        y[0] = ay;
        PulseCoefficients::new(x, y, 1.85, 0.0).unwrap()
    }

    #[test]
    fn zero_pulse_gives_zero_columns() {
        let w = export_waveform(&PulseCoefficients::zeros(10, 1.85).unwrap(), 50e6).unwrap();
        assert!(w.i_norm.iter().chain(&w.q_norm).all(|&v| v == 0.0));
        assert_eq!(w.full_scale_mhz, 0.0);
    }

    #[test]
    fn single_in_phase_harmonic_is_a_half_sine_arch() {
        let w = export_waveform(&first_harmonic(0.7, 0.0), 50e6).unwrap();
        let n = w.times_s.len();
        assert_eq!(n, 93);
        assert_eq!(w.times_s[0], 0.0);
        assert!((w.times_s[n - 1] - 1.85e-6).abs() < 1e-18);
        for (t, i) in w.times_s.iter().zip(&w.i_norm) {
            let arch = (std::f64::consts::PI * t / 1.85e-6).sin();
            assert!((i - arch).abs() < 1e-12, "{t} {i}");
        }
        assert!(w.q_norm.iter().all(|&q| q == 0.0));
        assert!((w.full_scale_mhz - 1.4).abs() < 1e-12);
    }

    #[test]
    fn sampled_peak_matches_analytic_peak() {
        let p = PulseCoefficients::new(
            vec![0.3, -0.2, 0.1, 0.05, 0.0, 0.02, 0.0, 0.0, 0.01, 0.0],
            vec![0.1, 0.25, -0.05, 0.0, 0.03, 0.0, 0.0, 0.02, 0.0, 0.0],
            1.85,
            0.0,
        )
        .unwrap();
        let w = export_waveform(&p, 50e6).unwrap();
        assert!((w.sampled_peak_mhz() / p.max_rabi() - 1.0).abs() < PEAK_TOLERANCE);
        assert!(w.i_norm.iter().chain(&w.q_norm).all(|v| v.abs() <= 1.0 + 1e-9));
        assert_eq!((w.i_norm[0], w.q_norm[0]), (0.0, 0.0));
    }

    #[test]
    fn sub_nyquist_rates_are_rejected() {
        let p = first_harmonic(0.35, 0.0);
        let bw = envelope_bandwidth_hz(&p);
        assert!((bw - 10.0 / (2.0 * 1.85e-6)).abs() < 1e-6);
        let err = export_waveform(&p, 0.9 * OVERSAMPLING * bw).unwrap_err();
        assert!(err.to_string().contains("sample_rate"), "{err}");
        assert!(export_waveform(&p, OVERSAMPLING * bw).is_ok());
    }

    #[test]
    fn table_reloads_losslessly() {
        let w = export_waveform(&first_harmonic(0.2, -0.1), 50e6).unwrap();
        let table = w.to_table(Header::provenance("x", 3));
        let back = Table::parse(&table.render()).unwrap();
        assert_eq!(back.column("t_s").unwrap(), w.times_s);
        assert_eq!(back.column("I_norm").unwrap(), w.i_norm);
        assert_eq!(back.column("Q_norm").unwrap(), w.q_norm);
        assert_eq!(back.header.get_f64("full_scale_rabi_mhz").unwrap(), w.full_scale_mhz);
    }
}
