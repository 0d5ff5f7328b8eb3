//! One pipeline per subcommand. Each writes its artifacts into the output
//! directory and returns a [`Summary`] for the console.

use std::path::{Path, PathBuf};

use nvpulse_core::analysis::{
    contrast_slope, fidelity_map, hyperfine_average, information_factor, linspace,
    sensitivity as shot_noise_sensitivity, simulate_odmr, uniform_sweep, MapMode, ShapedDrive, TransitionModel,
};
use nvpulse_core::exec::MemberMap;
use nvpulse_core::optimize::{optimize as run_optimizer, EnsembleObjective};
use nvpulse_core::photophysics::{
    aggregate_recovery_trace, calibrate_center_pump, contrast_vs_laser_duration, fit_exponential_recovery,
    pulse_train, reinit_time,
};
use nvpulse_core::pulse::PulseCoefficients;
use nvpulse_core::spin::HyperfineConfig;

use crate::config::{require, DriveSection, EngineKind, LoadedConfig};
use crate::error::CliResult;
use crate::io::{pulse_table, read_pulse, write_table, Table};
use crate::waveform::export_waveform;

/// Headline numbers of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub command: &'static str,
    pub objective_name: &'static str,
    pub objective: f64,
    pub max_rabi_mhz: Option<f64>,
    pub outputs: Vec<PathBuf>,
}

pub fn optimize<X: MemberMap>(cfg: &LoadedConfig, out: &Path, exec: &X) -> CliResult<Summary> {
    let c = &cfg.config;
    let pulse_cfg = c.pulse.clone().unwrap_or_default();
    let opt = c.optimizer.clone().unwrap_or_default().build(&pulse_cfg, cfg.seed)?;
    let hyperfine = require(&c.hyperfine, "hyperfine")?.build()?;
    let ensemble = c.ensemble.clone().unwrap_or_default().build()?;
    let engine_cfg = c.engine.clone().unwrap_or_default();
    let engine = engine_cfg.build()?;

    let objective = EnsembleObjective::new(&ensemble, &hyperfine, &engine, exec);
    let outcome = run_optimizer(&opt, &objective)?;
    let best = &outcome.trace.records[outcome.best_step];

    let mut header = cfg.header();
    header
        .push_f64("rabi_limit_mhz", opt.rabi_limit_mhz)
        .push("engine", engine_name(engine_cfg.kind))
        .push("best_step", outcome.best_step)
        .push("feasible", outcome.feasible)
        .push("converged", outcome.converged)
        .push_f64("f_st", best.f_st);
    if engine_cfg.certify {
        let floquet = engine_cfg.floquet();
        let check = EnsembleObjective::new(&ensemble, &hyperfine, &floquet, exec);
        header.push_f64("f_st_floquet", check.value(&outcome.pulse)?);
    }
    let coeffs = pulse_table(&outcome.pulse, header);

    let mut trace = Table::new(
        cfg.header(),
        &["step", "f_st", "f_pen", "f_tot_start", "penalty", "max_rabi_mhz", "beta", "line_search"],
    );
    for r in &outcome.trace.records {
        trace.push_row(vec![
            r.step as f64,
            r.f_st,
            r.f_pen,
            r.f_tot_start,
            r.penalty,
            r.max_rabi_mhz,
            r.beta,
            f64::from(u8::from(r.line_search)),
        ]);
    }
    Ok(Summary {
        command: "optimize",
        objective_name: "F_st",
        objective: best.f_st,
        max_rabi_mhz: Some(outcome.pulse.max_rabi()),
        outputs: vec![
            write_table(out, "pulse.csv", &coeffs)?,
            write_table(out, "trace.csv", &trace)?,
        ],
    })
}

fn engine_name(kind: EngineKind) -> &'static str {
    match kind {
        EngineKind::Magnus => "magnus",
        EngineKind::Floquet => "floquet",
    }
}

/// The configured drive as a transition model plus its peak Rabi frequency.
fn with_drive<R>(
    cfg: &LoadedConfig,
    hyperfine: &HyperfineConfig,
    f: impl FnOnce(&dyn TransitionModel, f64) -> CliResult<R>,
) -> CliResult<R> {
    let c = &cfg.config;
    let drive = require(&c.drive, "drive")?;
    if let Some(flat) = drive.flat(hyperfine, cfg.seed)? {
        let peak = flat.rabi_mhz() * flat.tones().len() as f64;
        return f(&flat, peak);
    }
    let DriveSection::Pulse { pulse_file } = drive else {
        unreachable!("flat drives returned above");
    };
    let (pulse, _) = read_pulse(&cfg.resolve(pulse_file))?;
    let engine = c.engine.clone().unwrap_or_default().build()?;
    let model = ShapedDrive::new(&engine, &pulse)?;
    f(&model, pulse.max_rabi())
}

pub fn map<X: MemberMap>(cfg: &LoadedConfig, out: &Path, exec: &X) -> CliResult<Summary> {
    let c = &cfg.config;
    let hyperfine = require(&c.hyperfine, "hyperfine")?.build()?;
    let m = c.map.clone().unwrap_or_default();
    let detunings = linspace(m.detuning_min_mhz, m.detuning_max_mhz, m.detuning_points)?;
    let alphas = linspace(m.alpha_min, m.alpha_max, m.alpha_points)?;
    let mode = MapMode::from(m.mode);
    let (grid, centre, peak) = with_drive(cfg, &hyperfine, |model, peak| {
        let grid = fidelity_map(model, &detunings, &alphas, mode, &hyperfine, exec)?;
        let centre = match mode {
            MapMode::SingleTransition => model.transfer(0.0, 1.0)?,
            MapMode::HyperfineAveraged => hyperfine_average(model, 0.0, 1.0, &hyperfine)?,
        };
        Ok((grid, centre, peak))
    })?;
    let mut header = cfg.header();
    header.push("mode", format!("{mode:?}")).push_f64("centre_fidelity", centre);
    let mut table = Table::new(header, &["detuning_mhz", "alpha", "fidelity"]);
    for (i, d) in grid.detuning_axis_mhz.iter().enumerate() {
        for (j, a) in grid.amplitude_axis.iter().enumerate() {
            table.push_row(vec![*d, *a, grid.get(i, j)]);
        }
    }
    Ok(Summary {
        command: "map",
        objective_name: "centre fidelity",
        objective: centre,
        max_rabi_mhz: Some(peak),
        outputs: vec![write_table(out, "map.csv", &table)?],
    })
}

pub fn odmr<X: MemberMap>(cfg: &LoadedConfig, out: &Path, exec: &X) -> CliResult<Summary> {
    let c = &cfg.config;
    let hyperfine = require(&c.hyperfine, "hyperfine")?.build()?;
    let ensemble = c.ensemble.clone().unwrap_or_default().build()?;
    let o = c.odmr.clone().unwrap_or_default();
    let sweep = uniform_sweep(o.half_width_mhz, o.step_mhz)?;
    let (curve, peak) = with_drive(cfg, &hyperfine, |model, peak| {
        Ok((simulate_odmr(model, &ensemble, &hyperfine, &sweep, exec)?, peak))
    })?;
    let slope = contrast_slope(&curve)?;
    let mut header = cfg.header();
    header
        .push_f64("max_contrast", curve.max_contrast())
        .push_f64("max_abs_slope_per_mhz", slope.magnitude_per_mhz)
        .push_f64("max_abs_slope_offset_mhz", slope.offset_mhz);
    let mut table = Table::new(header, &["offset_mhz", "contrast", "slope_per_mhz"]);
    for k in 0..curve.offsets_mhz.len() {
        table.push_row(vec![curve.offsets_mhz[k], curve.contrast[k], curve.slope_per_mhz[k]]);
    }
    Ok(Summary {
        command: "odmr",
        objective_name: "max |slope| (1/MHz)",
        objective: slope.magnitude_per_mhz,
        max_rabi_mhz: Some(peak),
        outputs: vec![write_table(out, "odmr.csv", &table)?],
    })
}

/// Writes every artifact it can; a recovery trace that is not single
/// exponential is reported after the files are on disk.
pub fn photophysics<X: MemberMap>(cfg: &LoadedConfig, out: &Path, exec: &X) -> CliResult<Summary> {
    let section = cfg.config.photophysics.clone().unwrap_or_default();
    let mut model = section.model()?;
    let recovery = section.recovery();
    if let Some(target) = section.calibrate_tau_us {
        let k = calibrate_center_pump(&model, target, &recovery, exec)?;
        model = model.with_center_pump(k);
    }
    let train_spec = section.train()?;
    let mut outputs = Vec::new();
    let stamp = || {
        let mut h = cfg.header();
        h.push_f64("center_pump_per_us", model.center_pump_per_us);
        h
    };

    let mut reinit = Table::new(stamp(), &["radius", "weight", "tau_us", "r_squared"]);
    let annuli = model.grid.annuli();
    let fits = exec.map(annuli.len(), |i| reinit_time(annuli[i].radius, &model, &recovery))?;
    for (a, fit) in annuli.iter().zip(&fits) {
        reinit.push_row(vec![a.radius, a.weight, fit.tau_us, fit.r_squared]);
    }
    outputs.push(write_table(out, "reinit.csv", &reinit)?);

    let sweep = contrast_vs_laser_duration(&section.sweep_laser_us, &train_spec, &model, exec)?;
    let mut curve = Table::new(stamp(), &["laser_us", "contrast", "mean_fluorescence", "end_fluorescence"]);
    for s in &sweep {
        curve.push_row(vec![s.laser_us, s.contrast, s.mean_fluorescence, s.end_fluorescence]);
    }
    outputs.push(write_table(out, "laser_sweep.csv", &curve)?);

    let train = pulse_train(&train_spec, &model, exec)?;
    let mut cycles = Table::new(
        stamp(),
        &["cycle", "contrast", "signal_window", "reference_window", "mean_fluorescence"],
    );
    for (n, r) in train.cycles.iter().enumerate() {
        cycles.push_row(vec![n as f64, r.contrast, r.signal_window, r.reference_window, r.mean_fluorescence]);
    }
    outputs.push(write_table(out, "pulse_train.csv", &cycles)?);
    if let Some(last) = train.cycles.last() {
        let mut trace = Table::new(stamp(), &["time_us", "signal", "reference"]);
        for (k, t) in train.sample_times_us.iter().enumerate() {
            trace.push_row(vec![*t, last.signal_trace[k], last.reference_trace[k]]);
        }
        outputs.push(write_table(out, "last_cycle.csv", &trace)?);
    }

    let times = recovery.times();
    let fluorescence = aggregate_recovery_trace(&model, &recovery, exec)?;
    let fit = fit_exponential_recovery(&times, &fluorescence);
    let mut header = stamp();
    if let Ok(f) = &fit {
        header.push_f64("tau_us", f.tau_us).push_f64("r_squared", f.r_squared);
    }
    let mut rec = Table::new(header, &["time_us", "fluorescence"]);
    for (t, y) in times.iter().zip(&fluorescence) {
        rec.push_row(vec![*t, *y]);
    }
    outputs.push(write_table(out, "recovery.csv", &rec)?);

    Ok(Summary {
        command: "photophysics",
        objective_name: "recovery tau (us)",
        objective: fit?.tau_us,
        max_rabi_mhz: None,
        outputs,
    })
}

pub fn sensitivity(cfg: &LoadedConfig, out: &Path) -> CliResult<Summary> {
    let inputs = require(&cfg.config.sensitivity, "sensitivity")?.inputs()?;
    let eta = shot_noise_sensitivity(&inputs)?;
    let mut table = Table::new(
        cfg.header(),
        &[
            "contrast_slope_per_hz",
            "readout_s",
            "reinit_s",
            "decay_s",
            "photon_rate_per_s",
            "gyromagnetic_hz_per_t",
            "information_factor",
            "eta_t_per_sqrt_hz",
        ],
    );
    table.push_row(vec![
        inputs.contrast_slope_per_hz,
        inputs.readout_s,
        inputs.reinit_s,
        inputs.decay_s,
        inputs.photon_rate_per_s,
        inputs.gyromagnetic_hz_per_t,
        information_factor(inputs.readout_s, inputs.decay_s),
        eta,
    ]);
    Ok(Summary {
        command: "sensitivity",
        objective_name: "eta (T/sqrt(Hz))",
        objective: eta,
        max_rabi_mhz: None,
        outputs: vec![write_table(out, "sensitivity.csv", &table)?],
    })
}

pub fn export(cfg: &LoadedConfig, out: &Path) -> CliResult<Summary> {
    let w = require(&cfg.config.waveform, "waveform")?;
    let (pulse, source): (PulseCoefficients, _) = read_pulse(&cfg.resolve(&w.pulse_file))?;
    let export = export_waveform(&pulse, w.sample_rate_msps * 1e6)?;
    let mut header = cfg.header();
    if let Some(limit) = source.get("rabi_limit_mhz") {
        header.push("rabi_limit_mhz", limit);
    }
    let table = export.to_table(header);
    Ok(Summary {
        command: "export-waveform",
        objective_name: "sampled peak rabi (MHz)",
        objective: export.sampled_peak_mhz(),
        max_rabi_mhz: Some(export.full_scale_mhz),
        outputs: vec![write_table(out, "waveform.csv", &table)?],
    })
}
