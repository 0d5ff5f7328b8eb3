//! Run configuration: one TOML document per run, with units spelled out in
//! every field name.
//!
//! Sections are optional in the file; each command asks for the ones it needs
//! and reports a missing section by name. `--set section.key=value` overrides
//! are applied to the parsed document before it is checked against the schema,
//! so an override is validated exactly like a value written in the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nvpulse_core::analysis::{
    flat_pi_pulse, photon_rate_from_power, random_phases, FlatDrive, MapMode, SensitivityInputs,
    ELECTRON_GYROMAGNETIC_HZ_PER_T,
};
use nvpulse_core::engine::{Engine, FloquetEngine};
use nvpulse_core::ensemble::{sample_representative_ensemble, RepresentativeEnsemble};
use nvpulse_core::floquet::Truncation;
use nvpulse_core::magnus::MagnusEngine;
use nvpulse_core::optimize::OptimizerConfig;
use nvpulse_core::photophysics::{
    PulseTrainSpec, RadialGrid, RateConstants, RateModelConfig, RecoverySpec, DEFAULT_CENTER_PUMP_PER_US,
};
use nvpulse_core::spin::HyperfineConfig;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub pulse: Option<PulseSection>,
    pub hyperfine: Option<HyperfineSection>,
    pub ensemble: Option<EnsembleSection>,
    pub optimizer: Option<OptimizerSection>,
    pub engine: Option<EngineSection>,
    pub drive: Option<DriveSection>,
    pub map: Option<MapSection>,
    pub odmr: Option<OdmrSection>,
    pub photophysics: Option<PhotophysicsSection>,
    pub sensitivity: Option<SensitivitySection>,
    pub waveform: Option<WaveformSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub duration_us: f64,
    pub harmonics: usize,
    pub carrier_mhz: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            duration_us: 1.85,
            harmonics: 10,
            carrier_mhz: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineSection {
    pub levels: usize,
    pub splitting_mhz: Option<f64>,
}

impl HyperfineSection {
    pub fn build(&self) -> CliResult<HyperfineConfig> {
        let splitting = match (self.levels, self.splitting_mhz) {
            (1, s) => s.unwrap_or(0.0),
            (_, Some(s)) => s,
            (k, None) => {
                return Err(CliError::config(
                    "hyperfine.splitting_mhz",
                    format!("splitting is required when levels = {k}"),
                ))
            }
        };
        Ok(HyperfineConfig::new(self.levels, splitting)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub detuning_half_width_mhz: f64,
    pub amplitude_spread: f64,
    pub detuning_points: usize,
    pub amplitude_points: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            detuning_half_width_mhz: 1.0,
            amplitude_spread: 0.1,
            detuning_points: 12,
            amplitude_points: 12,
        }
    }
}

impl EnsembleSection {
    pub fn build(&self) -> CliResult<RepresentativeEnsemble> {
        Ok(sample_representative_ensemble(
            self.detuning_half_width_mhz,
            self.amplitude_spread,
            self.detuning_points,
            self.amplitude_points,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub rabi_limit_mhz: f64,
    pub steps: usize,
    pub fixed_step: f64,
    pub fixed_steps: usize,
    pub penalty_initial: f64,
    pub penalty_step: f64,
    pub init_overshoot: f64,
    pub line_search_iterations: usize,
    pub line_search_tolerance: f64,
    pub rabi_tolerance: f64,
    pub convergence_threshold: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            rabi_limit_mhz: d.rabi_limit_mhz,
            steps: d.steps,
            fixed_step: d.fixed_step,
            fixed_steps: d.fixed_steps,
            penalty_initial: d.penalty_initial,
            penalty_step: d.penalty_step,
            init_overshoot: d.init_overshoot,
            line_search_iterations: d.line_search_iterations,
            line_search_tolerance: d.line_search_tolerance,
            rabi_tolerance: d.rabi_tolerance,
            convergence_threshold: d.convergence_threshold,
        }
    }
}

impl OptimizerSection {
    pub fn build(&self, pulse: &PulseSection, seed: u64) -> CliResult<OptimizerConfig> {
        let cfg = OptimizerConfig {
            rabi_limit_mhz: self.rabi_limit_mhz,
            duration_us: pulse.duration_us,
            harmonics: pulse.harmonics,
            carrier_mhz: pulse.carrier_mhz,
            steps: self.steps,
            fixed_step: self.fixed_step,
            fixed_steps: self.fixed_steps,
            penalty_initial: self.penalty_initial,
            penalty_step: self.penalty_step,
            init_overshoot: self.init_overshoot,
            seed,
            line_search_iterations: self.line_search_iterations,
            line_search_tolerance: self.line_search_tolerance,
            rabi_tolerance: self.rabi_tolerance,
            convergence_threshold: self.convergence_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Magnus,
    Floquet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub kind: EngineKind,
    pub magnus_steps: usize,
    pub floquet_tolerance: f64,
    pub floquet_max_harmonics: usize,
    /// Re-evaluate the optimized pulse with the adaptive Floquet engine.
    pub certify: bool,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self {
            kind: EngineKind::Magnus,
            magnus_steps: MagnusEngine::default().steps,
            floquet_tolerance: 1e-9,
            floquet_max_harmonics: 160,
            certify: false,
        }
    }
}

impl EngineSection {
    pub fn floquet(&self) -> FloquetEngine {
        FloquetEngine {
            truncation: Truncation::Adaptive {
                initial: None,
                tolerance: self.floquet_tolerance,
                max_harmonics: self.floquet_max_harmonics,
            },
        }
    }

    pub fn build(&self) -> CliResult<Engine> {
        Ok(match self.kind {
            EngineKind::Magnus => Engine::Magnus(MagnusEngine::new(self.magnus_steps)?),
            EngineKind::Floquet => Engine::Floquet(self.floquet()),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    #[default]
    Zero,
    /// Uniform phases drawn from the run seed.
    Random,
}

/// What is driven in `map` and `odmr`: an optimized pulse from a coefficient
/// file, or a constant-amplitude π-pulse with one or three tones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriveSection {
    Pulse {
        pulse_file: PathBuf,
    },
    Flat {
        rabi_mhz: f64,
        tones: usize,
        #[serde(default)]
        phases: PhaseMode,
    },
}

impl DriveSection {
    pub fn flat(&self, hyperfine: &HyperfineConfig, seed: u64) -> CliResult<Option<FlatDrive>> {
        let DriveSection::Flat { rabi_mhz, tones, phases } = self else {
            return Ok(None);
        };
        let phases = match phases {
            PhaseMode::Zero => vec![0.0; *tones],
            PhaseMode::Random => random_phases(seed, *tones),
        };
        Ok(Some(flat_pi_pulse(*rabi_mhz, *tones, hyperfine.splitting_mhz(), &phases)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapModeSetting {
    Single,
    Averaged,
}

impl From<MapModeSetting> for MapMode {
    fn from(m: MapModeSetting) -> Self {
        match m {
            MapModeSetting::Single => MapMode::SingleTransition,
            MapModeSetting::Averaged => MapMode::HyperfineAveraged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub mode: MapModeSetting,
    pub detuning_min_mhz: f64,
    pub detuning_max_mhz: f64,
    pub detuning_points: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_points: usize,
}

impl Default for MapSection {
    fn default() -> Self {
        Self {
            mode: MapModeSetting::Averaged,
            detuning_min_mhz: -2.0,
            detuning_max_mhz: 2.0,
            detuning_points: 41,
            alpha_min: 0.8,
            alpha_max: 1.2,
            alpha_points: 21,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdmrSection {
    pub half_width_mhz: f64,
    pub step_mhz: f64,
}

impl Default for OdmrSection {
    fn default() -> Self {
        Self {
            half_width_mhz: 6.0,
            step_mhz: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotophysicsSection {
    pub radiative_per_us: f64,
    pub singlet_from_e0_per_us: f64,
    pub singlet_from_e1_per_us: f64,
    pub singlet_to_g0_per_us: f64,
    pub singlet_to_g1_per_us: f64,
    pub t1_us: f64,
    pub center_pump_per_us: f64,
    /// When set, the centre pump rate is recalibrated to this aggregate recovery constant.
    pub calibrate_tau_us: Option<f64>,
    pub annuli: usize,
    /// Outer grid radius in beam radii.
    pub extent: f64,
    pub laser_us: f64,
    pub gap_us: f64,
    pub cycles: usize,
    pub window_start_us: f64,
    pub window_end_us: f64,
    pub transfer_fraction: f64,
    pub sample_us: f64,
    pub sweep_laser_us: Vec<f64>,
    pub recovery_window_us: f64,
    pub recovery_samples: usize,
}

impl Default for PhotophysicsSection {
    fn default() -> Self {
        let r = RateConstants::default();
        let train = PulseTrainSpec::default();
        let rec = RecoverySpec::default();
        let grid = RadialGrid::default();
        Self {
            radiative_per_us: r.radiative,
            singlet_from_e0_per_us: r.singlet_from_e0,
            singlet_from_e1_per_us: r.singlet_from_e1,
            singlet_to_g0_per_us: r.singlet_to_g0,
            singlet_to_g1_per_us: r.singlet_to_g1,
            t1_us: r.t1_us,
            center_pump_per_us: DEFAULT_CENTER_PUMP_PER_US,
            calibrate_tau_us: None,
            annuli: grid.annuli().len(),
            extent: grid.extent(),
            laser_us: train.laser_us,
            gap_us: train.gap_us,
            cycles: train.cycles,
            window_start_us: train.window_start_us,
            window_end_us: train.window_end_us,
            transfer_fraction: train.transfer_fraction,
            sample_us: train.sample_us,
            sweep_laser_us: vec![1000.0, 2000.0, 3000.0, 5000.0, 10_000.0, 20_000.0, 40_000.0],
            recovery_window_us: rec.window_us,
            recovery_samples: rec.samples,
        }
    }
}

impl PhotophysicsSection {
    pub fn model(&self) -> CliResult<RateModelConfig> {
        let cfg = RateModelConfig {
            rates: RateConstants {
                radiative: self.radiative_per_us,
                singlet_from_e0: self.singlet_from_e0_per_us,
                singlet_from_e1: self.singlet_from_e1_per_us,
                singlet_to_g0: self.singlet_to_g0_per_us,
                singlet_to_g1: self.singlet_to_g1_per_us,
                t1_us: self.t1_us,
            },
            center_pump_per_us: self.center_pump_per_us,
            grid: RadialGrid::uniform(self.annuli, self.extent)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train(&self) -> CliResult<PulseTrainSpec> {
        let spec = PulseTrainSpec {
            laser_us: self.laser_us,
            gap_us: self.gap_us,
            cycles: self.cycles,
            window_start_us: self.window_start_us,
            window_end_us: self.window_end_us,
            transfer_fraction: self.transfer_fraction,
            sample_us: self.sample_us,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn recovery(&self) -> RecoverySpec {
        RecoverySpec {
            window_us: self.recovery_window_us,
            samples: self.recovery_samples,
            gap_us: self.gap_us,
        }
    }
}

/// Inputs of the shot-noise estimate. The contrast slope is the simulated
/// ODMR slope (1/MHz on the transfer-fidelity scale) times the fluorescence
/// contrast reached at unit transfer fidelity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySection {
    pub contrast_slope_per_mhz: f64,
    #[serde(default = "default_contrast_scale")]
    pub contrast_scale: f64,
    pub readout_us: f64,
    pub reinit_us: f64,
    pub decay_us: f64,
    pub photon_rate_per_s: Option<f64>,
    pub optical_power_w: Option<f64>,
    pub wavelength_nm: Option<f64>,
    #[serde(default = "default_gyromagnetic")]
    pub gyromagnetic_hz_per_t: f64,
}

fn default_contrast_scale() -> f64 {
    1.0
}

fn default_gyromagnetic() -> f64 {
    ELECTRON_GYROMAGNETIC_HZ_PER_T
}

impl SensitivitySection {
    pub fn inputs(&self) -> CliResult<SensitivityInputs> {
        let photon_rate = match (self.photon_rate_per_s, self.optical_power_w, self.wavelength_nm) {
            (Some(r), None, None) => r,
            (None, Some(p), Some(w)) => photon_rate_from_power(p, w * 1e-9)?,
            _ => {
                return Err(CliError::config(
                    "sensitivity.photon_rate_per_s",
                    "give either photon_rate_per_s or both optical_power_w and wavelength_nm",
                ))
            }
        };
        let inputs = SensitivityInputs {
            contrast_slope_per_hz: self.contrast_slope_per_mhz * self.contrast_scale * 1e-6,
            readout_s: self.readout_us * 1e-6,
            reinit_s: self.reinit_us * 1e-6,
            decay_s: self.decay_us * 1e-6,
            photon_rate_per_s: photon_rate,
            gyromagnetic_hz_per_t: self.gyromagnetic_hz_per_t,
        };
        inputs.validate()?;
        Ok(inputs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSection {
    pub pulse_file: PathBuf,
    pub sample_rate_msps: f64,
}

/// A parsed configuration plus what is needed to stamp and locate artifacts.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub seed: u64,
    /// SHA-256 of the effective document, after overrides and seed.
    pub sha256: String,
    /// Directory that relative paths in the document are resolved against.
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> CliResult<Self> {
        let text = crate::io::read_text(path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, overrides, seed, base_dir)
    }

    pub fn from_str(text: &str, overrides: &[String], seed: Option<u64>, base_dir: PathBuf) -> CliResult<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| CliError::parse("config", e.message()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        if let Some(s) = seed {
            let s = i64::try_from(s).map_err(|_| CliError::config("seed", "must fit in a signed 64-bit integer"))?;
            doc.insert("seed".into(), toml::Value::Integer(s));
        }
        let canonical = toml::to_string(&doc).map_err(|e| CliError::parse("config", e))?;
        let sha256 = hex::encode(Sha256::digest(canonical.as_bytes()));
        let config: RunConfig = toml::from_str(&canonical).map_err(|e| CliError::parse("config", e))?;
        Ok(Self {
            seed: config.seed.unwrap_or(0),
            config,
            sha256,
            base_dir,
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn header(&self) -> crate::io::Header {
        crate::io::Header::provenance(&self.sha256, self.seed)
    }
}

/// Returns a required section or a config error naming it.
pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| CliError::config(name, "section missing from config"))
}

/// Sets `a.b.c = value`, creating intermediate tables. The value is parsed as
/// a TOML literal and falls back to a bare string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::parse("--set", format!("expected key=value, got {assignment:?}")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::parse("--set", format!("malformed key {key:?}")));
    }
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for p in path {
        let entry = table
            .entry((*p).to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(key, format!("{p} is not a table")))?;
    }
    table.insert((*last).to_owned(), value);
    Ok(())
}
