//! Fidelity maps, flat-pulse baselines, simulated ODMR sweeps and the
//! shot-noise sensitivity estimate.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::TransferEngine;
use crate::ensemble::RepresentativeEnsemble;
use crate::error::{require_finite, require_positive, Error, Result};
use crate::exec::MemberMap;
use crate::oracle::{oracle_block, Envelope, STEPS_PER_PERIOD};
use crate::pulse::PulseCoefficients;
use crate::spin::HyperfineConfig;
use crate::TWO_PI;

/// Transfer probability `|0⟩ → |−1⟩` of a lone two-level transition under a fixed drive.
pub trait TransitionModel: Sync {
    fn transfer(&self, detuning_mhz: f64, alpha: f64) -> Result<f64>;
}

/// A sine-series pulse bound to a propagation engine.
pub struct ShapedDrive<'a, E: TransferEngine> {
    engine: &'a E,
    prepared: E::Prepared,
}

impl<'a, E: TransferEngine> ShapedDrive<'a, E> {
    pub fn new(engine: &'a E, pulse: &PulseCoefficients) -> Result<Self> {
        Ok(Self {
            engine,
            prepared: engine.prepare(pulse)?,
        })
    }
}

impl<E: TransferEngine> TransitionModel for ShapedDrive<'_, E> {
    fn transfer(&self, detuning_mhz: f64, alpha: f64) -> Result<f64> {
        self.engine.transfer(&self.prepared, detuning_mhz, alpha)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tone {
    /// Offset of the tone from the carrier, MHz.
    pub offset_mhz: f64,
    pub phase: f64,
}

/// Constant-amplitude drive made of one or more equal-strength tones.
///
/// Tone `n` contributes `I = 2πR cos(2π f_n t + φ_n)`, `Q = 2πR sin(2π f_n t + φ_n)`,
/// which is resonant with a transition detuned by `+f_n`. Each tone on its
/// own has Rabi frequency `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatDrive {
    rabi_mhz: f64,
    duration_us: f64,
    tones: Vec<Tone>,
}

/// Minimum time steps used when propagating a flat drive.
pub const FLAT_DRIVE_STEPS: usize = 2000;

impl FlatDrive {
    pub fn new(rabi_mhz: f64, duration_us: f64, tones: Vec<Tone>) -> Result<Self> {
        require_positive("rabi", rabi_mhz)?;
        require_positive("duration", duration_us)?;
        if tones.is_empty() {
            return Err(Error::invalid("tones", "a flat drive needs at least one tone"));
        }
        for t in &tones {
            require_finite("tone offset", t.offset_mhz)?;
            require_finite("tone phase", t.phase)?;
        }
        Ok(Self {
            rabi_mhz,
            duration_us,
            tones,
        })
    }

    pub fn rabi_mhz(&self) -> f64 {
        self.rabi_mhz
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    pub fn with_duration(&self, duration_us: f64) -> Result<Self> {
        Self::new(self.rabi_mhz, duration_us, self.tones.clone())
    }

    fn time_step(&self, detuning_mhz: f64, alpha: f64) -> f64 {
        let scale = (alpha * self.frequency_scale_mhz()).max(detuning_mhz.abs());
        let resolved = 0.999 / (STEPS_PER_PERIOD * scale);
        resolved.min(self.duration_us / FLAT_DRIVE_STEPS as f64)
    }
}

impl Envelope for FlatDrive {
    fn envelope(&self, t_us: f64) -> (f64, f64) {
        let amp = TWO_PI * self.rabi_mhz;
        self.tones.iter().fold((0.0, 0.0), |(i, q), tone| {
            let theta = TWO_PI * tone.offset_mhz * t_us + tone.phase;
            (i + amp * theta.cos(), q + amp * theta.sin())
        })
    }

    fn duration_us(&self) -> f64 {
        self.duration_us
    }

    fn frequency_scale_mhz(&self) -> f64 {
        let spectral = self.tones.iter().fold(0.0, |m: f64, t| m.max(t.offset_mhz.abs()));
        spectral.max(self.rabi_mhz * self.tones.len() as f64)
    }
}

impl TransitionModel for FlatDrive {
    fn transfer(&self, detuning_mhz: f64, alpha: f64) -> Result<f64> {
        let u = oracle_block(self, detuning_mhz, alpha, self.time_step(detuning_mhz, alpha))?;
        Ok(u[(1, 0)].norm_sqr())
    }
}

/// Flat π-pulse of duration `1/(2R)` with one tone at the carrier or three
/// tones at `{−δ_l, 0, +δ_l}`. `phases` gives one phase per tone.
pub fn flat_pi_pulse(rabi_mhz: f64, n_tones: usize, splitting_mhz: f64, phases: &[f64]) -> Result<FlatDrive> {
    require_positive("rabi", rabi_mhz)?;
    let offsets: &[f64] = match n_tones {
        1 => &[0.0],
        3 => &[-1.0, 0.0, 1.0],
        n => {
            return Err(Error::invalid(
                "tones",
                alloc::format!("flat pulses use 1 or 3 tones, got {n}"),
            ))
        }
    };
    if phases.len() != n_tones {
        return Err(Error::invalid(
            "phases",
            alloc::format!("expected {n_tones} phases, got {}", phases.len()),
        ));
    }
    let tones = offsets
        .iter()
        .zip(phases)
        .map(|(&o, &phase)| Tone {
            offset_mhz: o * splitting_mhz,
            phase,
        })
        .collect();
    FlatDrive::new(rabi_mhz, 0.5 / rabi_mhz, tones)
}

/// `n` phases drawn uniformly from `[0, 2π)`, reproducible from `seed`.
pub fn random_phases(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.0..TWO_PI)).collect()
}

/// Mean transfer probability over the hyperfine transitions at `Δ + w_k δ_l`.
pub fn hyperfine_average<M: TransitionModel + ?Sized>(
    model: &M,
    detuning_mhz: f64,
    alpha: f64,
    hyperfine: &HyperfineConfig,
) -> Result<f64> {
    let mut sum = 0.0;
    for det in hyperfine.transition_detunings(detuning_mhz) {
        sum += model.transfer(det, alpha)?;
    }
    Ok(sum / hyperfine.levels() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapMode {
    /// One transition at `Δ`.
    SingleTransition,
    /// Mean over the hyperfine transitions at `Δ + w_k δ_l`.
    HyperfineAveraged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityGrid {
    pub detuning_axis_mhz: Vec<f64>,
    pub amplitude_axis: Vec<f64>,
    /// Detuning-major: `values[i * n_alpha + j]` is at `(Δ_i, α_j)`.
    pub values: Vec<f64>,
    pub mode: MapMode,
}

impl FidelityGrid {
    pub fn get(&self, detuning_index: usize, amplitude_index: usize) -> f64 {
        self.values[detuning_index * self.amplitude_axis.len() + amplitude_index]
    }
}

fn check_axis(name: &'static str, axis: &[f64], min_len: usize) -> Result<()> {
    if axis.len() < min_len {
        return Err(Error::invalid(name, alloc::format!("need at least {min_len} points")));
    }
    if axis.iter().any(|x| !x.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(name, "axis must be finite and strictly increasing"));
    }
    Ok(())
}

pub fn fidelity_map<M: TransitionModel + ?Sized, X: MemberMap>(
    model: &M,
    detuning_axis_mhz: &[f64],
    amplitude_axis: &[f64],
    mode: MapMode,
    hyperfine: &HyperfineConfig,
    exec: &X,
) -> Result<FidelityGrid> {
    check_axis("detuning axis", detuning_axis_mhz, 1)?;
    check_axis("amplitude axis", amplitude_axis, 1)?;
    let na = amplitude_axis.len();
    let values = exec.map(detuning_axis_mhz.len() * na, |idx| {
        let det = detuning_axis_mhz[idx / na];
        let alpha = amplitude_axis[idx % na];
        match mode {
            MapMode::SingleTransition => model.transfer(det, alpha),
            MapMode::HyperfineAveraged => hyperfine_average(model, det, alpha, hyperfine),
        }
    })?;
    Ok(FidelityGrid {
        detuning_axis_mhz: detuning_axis_mhz.to_vec(),
        amplitude_axis: amplitude_axis.to_vec(),
        values,
        mode,
    })
}

/// `n` points evenly spaced over `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    require_finite("range", lo)?;
    require_finite("range", hi)?;
    match n {
        0 => Err(Error::invalid("points", "need at least one point")),
        1 => Ok(alloc::vec![lo]),
        _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
    }
}

/// Symmetric sweep `[−half_width, +half_width]` with approximately `step` spacing.
pub fn uniform_sweep(half_width_mhz: f64, step_mhz: f64) -> Result<Vec<f64>> {
    require_positive("sweep width", half_width_mhz)?;
    require_positive("sweep step", step_mhz)?;
    let n = (2.0 * half_width_mhz / step_mhz).round() as usize + 1;
    linspace(-half_width_mhz, half_width_mhz, n.max(3))
}

/// Central differences in the interior, one-sided differences at the ends.
pub fn numerical_derivative(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::invalid("curve", "x and y lengths differ"));
    }
    check_axis("curve axis", x, 3)?;
    let n = x.len();
    Ok((0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (y[b] - y[a]) / (x[b] - x[a])
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdmrCurve {
    /// Drive frequency relative to the central transition, MHz.
    pub offsets_mhz: Vec<f64>,
    /// Contrast on the transfer-fidelity scale.
    pub contrast: Vec<f64>,
    /// Derivative of contrast with respect to offset, 1/MHz.
    pub slope_per_mhz: Vec<f64>,
}

impl OdmrCurve {
    pub fn from_contrast(offsets_mhz: Vec<f64>, contrast: Vec<f64>) -> Result<Self> {
        let slope_per_mhz = numerical_derivative(&offsets_mhz, &contrast)?;
        Ok(Self {
            offsets_mhz,
            contrast,
            slope_per_mhz,
        })
    }

    pub fn max_contrast(&self) -> f64 {
        self.contrast.iter().copied().fold(f64::MIN, f64::max)
    }
}

/// Ensemble contrast while sweeping the drive frequency.
///
/// At offset `o` every member's transitions sit at `Δ_i − o + w_k δ_l`.
pub fn simulate_odmr<M: TransitionModel + ?Sized, X: MemberMap>(
    model: &M,
    ensemble: &RepresentativeEnsemble,
    hyperfine: &HyperfineConfig,
    offsets_mhz: &[f64],
    exec: &X,
) -> Result<OdmrCurve> {
    check_axis("sweep", offsets_mhz, 3)?;
    let contrast = exec.map(offsets_mhz.len(), |i| {
        let o = offsets_mhz[i];
        let mut c = 0.0;
        for m in ensemble.members() {
            c += m.weight * hyperfine_average(model, m.detuning_mhz - o, m.alpha, hyperfine)?;
        }
        Ok(c)
    })?;
    OdmrCurve::from_contrast(offsets_mhz.to_vec(), contrast)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeExtremum {
    /// Largest `|dC/df|`, 1/MHz.
    pub magnitude_per_mhz: f64,
    pub offset_mhz: f64,
}

pub fn contrast_slope(curve: &OdmrCurve) -> Result<SlopeExtremum> {
    if curve.offsets_mhz.len() < 3 || curve.slope_per_mhz.len() != curve.offsets_mhz.len() {
        return Err(Error::invalid("curve", "slope extraction needs at least 3 points"));
    }
    let (i, s) = curve
        .slope_per_mhz
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bs), (i, s)| if s.abs() > bs { (i, s.abs()) } else { (bi, bs) });
    Ok(SlopeExtremum {
        magnitude_per_mhz: s,
        offset_mhz: curve.offsets_mhz[i],
    })
}

/// Inputs to the pulsed-readout shot-noise estimate, SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensitivityInputs {
    /// `C′`, 1/Hz.
    pub contrast_slope_per_hz: f64,
    /// `t_R`, s.
    pub readout_s: f64,
    /// `t_I`, s.
    pub reinit_s: f64,
    /// `τ_R`, s.
    pub decay_s: f64,
    /// `R_0`, photons/s at the modulation peak.
    pub photon_rate_per_s: f64,
    /// `γ_e`, Hz/T.
    pub gyromagnetic_hz_per_t: f64,
}

/// Electron gyromagnetic ratio, Hz/T.
pub const ELECTRON_GYROMAGNETIC_HZ_PER_T: f64 = 2.8025e10;

impl SensitivityInputs {
    pub fn validate(&self) -> Result<()> {
        require_positive("contrast slope", self.contrast_slope_per_hz)?;
        require_positive("readout time", self.readout_s)?;
        require_positive("reinitialization time", self.reinit_s)?;
        require_positive("decay constant", self.decay_s)?;
        require_positive("photon rate", self.photon_rate_per_s)?;
        require_positive("gyromagnetic ratio", self.gyromagnetic_hz_per_t)?;
        Ok(())
    }
}

/// Mean fraction of contrast retained over a readout of length `t_R`:
/// `τ_R (1 − e^{−t_R/τ_R}) / t_R`.
pub fn information_factor(readout_s: f64, decay_s: f64) -> f64 {
    -decay_s * (-readout_s / decay_s).exp_m1() / readout_s
}

const PLANCK_J_S: f64 = 6.626_070_15e-34;
const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Photons per second carried by `power_w` of light at `wavelength_m`.
pub fn photon_rate_from_power(power_w: f64, wavelength_m: f64) -> Result<f64> {
    require_positive("optical power", power_w)?;
    require_positive("wavelength", wavelength_m)?;
    Ok(power_w * wavelength_m / (PLANCK_J_S * SPEED_OF_LIGHT_M_PER_S))
}

/// `η = √(2 t_R t_I) / (γ_e C′ τ_R (1 − e^{−t_R/τ_R}) √R_0)` in T/√Hz.
pub fn sensitivity(inputs: &SensitivityInputs) -> Result<f64> {
    inputs.validate()?;
    let i = inputs;
    let retained = -i.decay_s * (-i.readout_s / i.decay_s).exp_m1();
    Ok((2.0 * i.readout_s * i.reinit_s).sqrt()
        / (i.gyromagnetic_hz_per_t * i.contrast_slope_per_hz * retained * i.photon_rate_per_s.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::hamiltonian::EnsembleMember;

    fn rabi_formula(rabi: f64, det: f64, t: f64) -> f64 {
        let w = (rabi * rabi + det * det).sqrt();
        let s = (core::f64::consts::PI * w * t).sin();
        rabi * rabi / (w * w) * s * s
    }

    #[test]
    fn flat_pi_pulse_shapes() {
        let p = flat_pi_pulse(1.4, 1, 2.16, &[0.0]).unwrap();
        assert!((p.duration_us() - 0.357_142_857_142_857_1).abs() < 1e-15);
        assert_eq!(p.tones()[0].offset_mhz, 0.0);
        let p3 = flat_pi_pulse(1.4, 3, 2.16, &[0.0; 3]).unwrap();
        let offs: Vec<f64> = p3.tones().iter().map(|t| t.offset_mhz).collect();
        assert_eq!(offs, [-2.16, 0.0, 2.16]);
        assert!(matches!(flat_pi_pulse(1.4, 2, 2.16, &[0.0; 2]), Err(Error::InvalidInput { field: "tones", .. })));
        assert!(flat_pi_pulse(1.4, 3, 2.16, &[0.0]).is_err());
        assert!(flat_pi_pulse(0.0, 1, 2.16, &[0.0]).is_err());
    }

    #[test]
    fn detuned_flat_pulse_follows_rabi_formula() {
        for (r, d) in [(1.4, 2.16), (1.4, 0.0), (0.8, -1.3), (2.5, 0.7)] {
            let p = flat_pi_pulse(r, 1, 2.16, &[0.9]).unwrap();
            let got = p.transfer(d, 1.0).unwrap();
            assert!((got - rabi_formula(r, d, 0.5 / r)).abs() < 1e-10, "R={r} Δ={d}");
        }
        let p = flat_pi_pulse(1.4, 1, 2.16, &[0.0]).unwrap();
        assert!((p.transfer(2.16, 1.0).unwrap() - 0.019).abs() < 5e-4);
    }

    #[test]
    fn flat_hyperfine_average_at_centre() {
        let p = flat_pi_pulse(1.4, 1, 2.16, &[0.0]).unwrap();
        let hf = HyperfineConfig::nitrogen14();
        let f = hyperfine_average(&p, 0.0, 1.0, &hf).unwrap();
        let expected = (1.0 + 2.0 * rabi_formula(1.4, 2.16, 0.5 / 1.4)) / 3.0;
        assert!((f - expected).abs() < 1e-10);
        assert!((f - 0.346).abs() < 1e-3);
    }

    #[test]
    fn three_tone_drive_inverts_every_hyperfine_line_when_weak() {
        let p = flat_pi_pulse(0.2, 3, 5.0, &[0.0; 3]).unwrap();
        for det in [-5.0, 0.0, 5.0] {
            assert!(p.transfer(det, 1.0).unwrap() > 0.95, "det {det}");
        }
    }

    #[test]
    fn averaged_grid_is_mean_of_shifted_single_grids() {
        let p = flat_pi_pulse(1.4, 3, 2.16, &random_phases(7, 3)).unwrap();
        let hf = HyperfineConfig::nitrogen14();
        let dets = [-1.0, -0.25, 0.5];
        let alphas = [0.9, 1.1];
        let avg = fidelity_map(&p, &dets, &alphas, MapMode::HyperfineAveraged, &hf, &Sequential).unwrap();
        let shifted: Vec<FidelityGrid> = [-2.16, 0.0, 2.16]
            .iter()
            .map(|s| {
                let d: Vec<f64> = dets.iter().map(|d| d + s).collect();
                fidelity_map(&p, &d, &alphas, MapMode::SingleTransition, &hf, &Sequential).unwrap()
            })
            .collect();
        for (k, v) in avg.values.iter().enumerate() {
            let mean = shifted.iter().map(|g| g.values[k]).sum::<f64>() / 3.0;
            assert!((v - mean).abs() < 1e-12);
            assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn single_tone_map_is_symmetric_in_detuning() {
        let p = flat_pi_pulse(1.4, 1, 2.16, &[0.3]).unwrap();
        let hf = HyperfineConfig::single();
        let dets = linspace(-2.0, 2.0, 9).unwrap();
        let g = fidelity_map(&p, &dets, &[0.95], MapMode::SingleTransition, &hf, &Sequential).unwrap();
        for i in 0..9 {
            assert!((g.get(i, 0) - g.get(8 - i, 0)).abs() < 1e-12);
        }
        assert!(fidelity_map(&p, &[0.0, 0.0], &[1.0], MapMode::SingleTransition, &hf, &Sequential).is_err());
    }

    #[test]
    fn odmr_is_symmetric_and_vanishes_far_away() {
        let p = flat_pi_pulse(1.4, 1, 2.16, &[0.0]).unwrap();
        let hf = HyperfineConfig::nitrogen14();
        let e = crate::ensemble::sample_representative_ensemble(1.0, 0.1, 4, 2).unwrap();
        let sweep = linspace(-6.0, 6.0, 25).unwrap();
        let c = simulate_odmr(&p, &e, &hf, &sweep, &Sequential).unwrap();
        let n = sweep.len();
        for i in 0..n {
            assert!((c.contrast[i] - c.contrast[n - 1 - i]).abs() < 1e-10);
            assert!((c.slope_per_mhz[i] + c.slope_per_mhz[n - 1 - i]).abs() < 1e-9);
        }
        let far = simulate_odmr(&p, &e, &hf, &[40.0, 41.0, 42.0], &Sequential).unwrap();
        assert!(far.max_contrast() < 2e-3);
    }

    #[test]
    fn odmr_contrast_ignores_member_order() {
        let p = flat_pi_pulse(1.4, 1, 2.16, &[0.0]).unwrap();
        let hf = HyperfineConfig::nitrogen14();
        let e = crate::ensemble::sample_representative_ensemble(1.0, 0.1, 3, 2).unwrap();
        let mut rev: Vec<EnsembleMember> = e.members().to_vec();
        rev.reverse();
        let r = RepresentativeEnsemble::from_members(rev).unwrap();
        let sweep = [-1.0, 0.3, 2.0];
        let a = simulate_odmr(&p, &e, &hf, &sweep, &Sequential).unwrap();
        let b = simulate_odmr(&p, &r, &hf, &sweep, &Sequential).unwrap();
        for (x, y) in a.contrast.iter().zip(&b.contrast) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn slope_of_synthetic_curves() {
        let x = linspace(-3.0, 3.0, 61).unwrap();
        let lin = OdmrCurve::from_contrast(x.clone(), x.iter().map(|v| 0.4 * v).collect()).unwrap();
        assert!(lin.slope_per_mhz.iter().all(|s| (s - 0.4).abs() < 1e-12));
        let flat = OdmrCurve::from_contrast(x.clone(), alloc::vec![0.2; 61]).unwrap();
        assert_eq!(contrast_slope(&flat).unwrap().magnitude_per_mhz, 0.0);

        // Gaussian of depth d and FWHM w: steepest slope d √(8 ln 2 / e) / w.
        let (d, w) = (0.7, 1.3);
        let x = linspace(-4.0, 4.0, 2001).unwrap();
        let y = x.iter().map(|v| d * (-4.0 * core::f64::consts::LN_2 * v * v / (w * w)).exp()).collect();
        let g = contrast_slope(&OdmrCurve::from_contrast(x, y).unwrap()).unwrap();
        let expected = d * (8.0 * core::f64::consts::LN_2 / core::f64::consts::E).sqrt() / w;
        assert!((g.magnitude_per_mhz - expected).abs() < 0.05 * expected);
        let short = OdmrCurve {
            offsets_mhz: alloc::vec![0.0, 1.0],
            contrast: alloc::vec![0.0, 1.0],
            slope_per_mhz: alloc::vec![1.0, 1.0],
        };
        assert!(contrast_slope(&short).is_err());
    }

    fn inputs() -> SensitivityInputs {
        SensitivityInputs {
            contrast_slope_per_hz: 2e-9,
            readout_s: 3e-3,
            reinit_s: 3e-3,
            decay_s: 1.4e-3,
            photon_rate_per_s: 3e13,
            gyromagnetic_hz_per_t: ELECTRON_GYROMAGNETIC_HZ_PER_T,
        }
    }

    #[test]
    fn sensitivity_short_readout_limit() {
        let mut i = inputs();
        i.readout_s = i.decay_s / 1000.0;
        let eta = sensitivity(&i).unwrap();
        let limit = (2.0 * i.reinit_s / i.readout_s).sqrt()
            / (i.gyromagnetic_hz_per_t * i.contrast_slope_per_hz * i.photon_rate_per_s.sqrt());
        assert!((eta / limit - 1.0).abs() < 0.01);
    }

    #[test]
    fn information_factor_at_one_decay_constant() {
        let f = information_factor(1.4e-3, 1.4e-3);
        assert!((f - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn sensitivity_monotonicity_and_validation() {
        let base = sensitivity(&inputs()).unwrap();
        let scaled = |f: &dyn Fn(&mut SensitivityInputs)| {
            let mut i = inputs();
            f(&mut i);
            sensitivity(&i).unwrap()
        };
        assert!(scaled(&|i| i.contrast_slope_per_hz *= 1.5) < base);
        assert!(scaled(&|i| i.photon_rate_per_s *= 1.5) < base);
        assert!(scaled(&|i| i.decay_s *= 1.5) < base);
        assert!(scaled(&|i| i.reinit_s *= 1.5) > base);
        let mut bad = inputs();
        bad.readout_s = 0.0;
        assert!(matches!(sensitivity(&bad), Err(Error::InvalidInput { field: "readout time", .. })));
    }
}
