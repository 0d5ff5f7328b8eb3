//! Five-level optical pumping model of a defect ensemble under a Gaussian beam.
//!
//! Levels are ordered `[g0, g1, e0, e1, S]`: ground `m_s = 0`, ground
//! `m_s = −1`, their spin-conserving excited states and one shelving singlet.
//! Rates are in 1/µs and times in µs. The ensemble is a uniform-density disc
//! cut into annuli; every annulus sees the pump rate of its radius and evolves
//! independently, and fluorescence is the area-weighted sum of `k_r (e0 + e1)`.
//!
//! Each laser segment is linear with constant coefficients, so segments are
//! propagated with matrix exponentials and window integrals with an augmented
//! exponential. [`rate_evolve`] is a fixed-step RK4 integrator kept for
//! cross-checking.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{require_finite, require_positive, Error, Result};
use crate::exec::MemberMap;
use crate::linalg::{expm_real, rapply, rmatmul, solve_real, RMatrix};

pub const LEVELS: usize = 5;
pub const GROUND_0: usize = 0;
pub const GROUND_1: usize = 1;
pub const EXCITED_0: usize = 2;
pub const EXCITED_1: usize = 3;
pub const SINGLET: usize = 4;

type Mat = RMatrix<LEVELS>;
type Vec5 = [f64; LEVELS];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateConstants {
    /// `e → g`, spin conserving.
    pub radiative: f64,
    pub singlet_from_e0: f64,
    pub singlet_from_e1: f64,
    pub singlet_to_g0: f64,
    pub singlet_to_g1: f64,
    /// Ground-state spin relaxation time; each direction relaxes at `1/(2 T1)`.
    pub t1_us: f64,
}

impl Default for RateConstants {
    fn default() -> Self {
        Self {
            radiative: 65.0,
            singlet_from_e0: 11.0,
            singlet_from_e1: 80.0,
            singlet_to_g0: 3.0,
            singlet_to_g1: 2.6,
            t1_us: 7100.0,
        }
    }
}

impl RateConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radiative rate", self.radiative),
            ("singlet rate", self.singlet_from_e0),
            ("singlet rate", self.singlet_from_e1),
            ("singlet rate", self.singlet_to_g0),
            ("singlet rate", self.singlet_to_g1),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, alloc::format!("must be finite and >= 0, got {v}")));
            }
        }
        require_positive("T1", self.t1_us)
    }

    fn relaxation(&self) -> f64 {
        0.5 / self.t1_us
    }

    /// Largest total outflow rate of any level at pump rate `pump`.
    pub fn fastest_rate(&self, pump: f64) -> f64 {
        [
            pump + self.relaxation(),
            self.radiative + self.singlet_from_e0,
            self.radiative + self.singlet_from_e1,
            self.singlet_to_g0 + self.singlet_to_g1,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Generator `G` of `dp/dt = G p` at pump rate `pump` (1/µs). Columns sum to zero.
pub fn rate_generator(rates: &RateConstants, pump: f64) -> Mat {
    let mut g = [[0.0; LEVELS]; LEVELS];
    let mut flow = |from: usize, to: usize, k: f64| {
        g[to][from] += k;
        g[from][from] -= k;
    };
    let gamma = rates.relaxation();
    flow(GROUND_0, EXCITED_0, pump);
    flow(GROUND_1, EXCITED_1, pump);
    flow(GROUND_0, GROUND_1, gamma);
    flow(GROUND_1, GROUND_0, gamma);
    flow(EXCITED_0, GROUND_0, rates.radiative);
    flow(EXCITED_1, GROUND_1, rates.radiative);
    flow(EXCITED_0, SINGLET, rates.singlet_from_e0);
    flow(EXCITED_1, SINGLET, rates.singlet_from_e1);
    flow(SINGLET, GROUND_0, rates.singlet_to_g0);
    flow(SINGLET, GROUND_1, rates.singlet_to_g1);
    g
}

/// `I_0 exp(−2 r² / r_0²)`: `r_0` is the 1/e² radius.
pub fn beam_intensity(r: f64, r0: f64, i0: f64) -> f64 {
    i0 * (-2.0 * r * r / (r0 * r0)).exp()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Annulus {
    /// Mid radius in units of `r_0`.
    pub radius: f64,
    /// Fraction of the modelled disc's area.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    annuli: Vec<Annulus>,
    extent: f64,
}

impl RadialGrid {
    /// `count` annuli of equal width over `[0, extent · r_0]`, weighted by area.
    pub fn uniform(count: usize, extent: f64) -> Result<Self> {
        require_positive("beam extent", extent)?;
        if count == 0 {
            return Err(Error::invalid("annuli", "need at least one annulus"));
        }
        let n = count as f64;
        let annuli = (0..count)
            .map(|i| {
                let (a, b) = (i as f64 / n, (i + 1) as f64 / n);
                Annulus {
                    radius: 0.5 * (a + b) * extent,
                    weight: b * b - a * a,
                }
            })
            .collect();
        Ok(Self { annuli, extent })
    }

    pub fn annuli(&self) -> &[Annulus] {
        &self.annuli
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }
}

impl Default for RadialGrid {
    fn default() -> Self {
        Self::uniform(50, 1.5).expect("static grid")
    }
}

/// Centre pump rate (1/µs) that gives a 1.4 ms aggregate fluorescence
/// recovery with the default rates and grid; see [`calibrate_center_pump`].
pub const DEFAULT_CENTER_PUMP_PER_US: f64 = 3.485_959e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct RateModelConfig {
    pub rates: RateConstants,
    /// Pump rate `g → e` at the beam centre, 1/µs.
    pub center_pump_per_us: f64,
    pub grid: RadialGrid,
}

impl Default for RateModelConfig {
    fn default() -> Self {
        Self {
            rates: RateConstants::default(),
            center_pump_per_us: DEFAULT_CENTER_PUMP_PER_US,
            grid: RadialGrid::default(),
        }
    }
}

impl RateModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        require_positive("center pump", self.center_pump_per_us)
    }

    pub fn pump_at(&self, radius: f64) -> f64 {
        beam_intensity(radius, 1.0, self.center_pump_per_us)
    }

    pub fn with_center_pump(&self, center_pump_per_us: f64) -> Self {
        Self {
            center_pump_per_us,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateModelState {
    pub populations: Vec5,
    pub time_us: f64,
}

/// Allowed deviation of the total population from one.
pub const POPULATION_TOLERANCE: f64 = 1e-9;

impl RateModelState {
    pub fn new(populations: Vec5, time_us: f64) -> Result<Self> {
        let sum: f64 = populations.iter().sum();
        if populations.iter().any(|p| !p.is_finite() || *p < -POPULATION_TOLERANCE)
            || (sum - 1.0).abs() > POPULATION_TOLERANCE
        {
            return Err(Error::invalid(
                "populations",
                alloc::format!("must be non-negative and sum to 1, got {populations:?}"),
            ));
        }
        Ok(Self { populations, time_us })
    }

    /// Equal ground-state spin populations.
    pub fn thermal() -> Self {
        Self {
            populations: [0.5, 0.5, 0.0, 0.0, 0.0],
            time_us: 0.0,
        }
    }

    pub fn polarized() -> Self {
        Self {
            populations: [1.0, 0.0, 0.0, 0.0, 0.0],
            time_us: 0.0,
        }
    }

    pub fn ground0(&self) -> f64 {
        self.populations[GROUND_0]
    }

    pub fn total(&self) -> f64 {
        self.populations.iter().sum()
    }

    pub fn fluorescence(&self, rates: &RateConstants) -> f64 {
        emission(&self.populations, rates)
    }
}

fn emission(p: &Vec5, rates: &RateConstants) -> f64 {
    rates.radiative * (p[EXCITED_0] + p[EXCITED_1])
}

/// Instantaneous swap of the ground spin populations.
pub fn apply_ideal_pi(state: &RateModelState) -> RateModelState {
    let mut out = *state;
    out.populations.swap(GROUND_0, GROUND_1);
    out
}

/// Moves `fraction` of each ground spin population into the other; 1 is an ideal π-pulse.
pub fn apply_partial_pi(state: &RateModelState, fraction: f64) -> Result<RateModelState> {
    check_fraction(fraction)?;
    let mut out = *state;
    out.populations = transfer(&state.populations, fraction);
    Ok(out)
}

fn check_fraction(fraction: f64) -> Result<()> {
    if (0.0..=1.0).contains(&fraction) {
        Ok(())
    } else {
        Err(Error::invalid("transfer fraction", alloc::format!("must lie in [0, 1], got {fraction}")))
    }
}

fn transfer(p: &Vec5, f: f64) -> Vec5 {
    let mut out = *p;
    out[GROUND_0] = (1.0 - f) * p[GROUND_0] + f * p[GROUND_1];
    out[GROUND_1] = f * p[GROUND_0] + (1.0 - f) * p[GROUND_1];
    out
}

/// Steps must satisfy `dt · (fastest rate) ≤` this.
pub const MAX_STEP_RATE_PRODUCT: f64 = 0.1;
/// Step-halving acceptance tolerance on the final populations.
pub const STEP_HALVING_TOLERANCE: f64 = 1e-9;

fn rk4_run(g: &Mat, mut p: Vec5, steps: usize, h: f64, mut visit: impl FnMut(usize, &Vec5)) -> Vec5 {
    let add = |a: &Vec5, b: &Vec5, s: f64| -> Vec5 { core::array::from_fn(|i| a[i] + s * b[i]) };
    visit(0, &p);
    for n in 1..=steps {
        let k1 = rapply(g, &p);
        let k2 = rapply(g, &add(&p, &k1, 0.5 * h));
        let k3 = rapply(g, &add(&p, &k2, 0.5 * h));
        let k4 = rapply(g, &add(&p, &k3, h));
        p = core::array::from_fn(|i| p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        visit(n, &p);
    }
    p
}

/// RK4 trajectory under constant pump, one state per step including the start.
///
/// The final state is re-integrated with half the step; a change above
/// [`STEP_HALVING_TOLERANCE`] is reported as an error.
pub fn rate_evolve(
    state: &RateModelState,
    rates: &RateConstants,
    pump: f64,
    duration_us: f64,
    dt_us: f64,
) -> Result<Vec<RateModelState>> {
    rates.validate()?;
    require_finite("pump", pump)?;
    require_positive("duration", duration_us)?;
    require_positive("dt", dt_us)?;
    let fastest = rates.fastest_rate(pump);
    if dt_us * fastest > MAX_STEP_RATE_PRODUCT {
        return Err(Error::invalid(
            "dt",
            alloc::format!("step {dt_us} us is unstable for rate {fastest} /us"),
        ));
    }
    let g = rate_generator(rates, pump);
    let steps = (duration_us / dt_us).ceil() as usize;
    let h = duration_us / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let end = rk4_run(&g, state.populations, steps, h, |n, p| {
        out.push(RateModelState {
            populations: *p,
            time_us: state.time_us + n as f64 * h,
        })
    });
    let fine = rk4_run(&g, state.populations, 2 * steps, 0.5 * h, |_, _| {});
    let change = end.iter().zip(&fine).map(|(a, b)| (a - b).abs()).sum::<f64>();
    if change > STEP_HALVING_TOLERANCE {
        return Err(Error::Integration {
            change,
            tolerance: STEP_HALVING_TOLERANCE,
        });
    }
    Ok(out)
}

/// Exact propagation under constant pump.
pub fn evolve_exact(state: &RateModelState, rates: &RateConstants, pump: f64, duration_us: f64) -> RateModelState {
    let e = propagator(&rate_generator(rates, pump), duration_us);
    RateModelState {
        populations: rapply(&e, &state.populations),
        time_us: state.time_us + duration_us,
    }
}

fn scaled(g: &Mat, t: f64) -> Mat {
    let mut m = *g;
    m.iter_mut().flatten().for_each(|x| *x *= t);
    m
}

/// `e^{Gt}` by scaling and squaring with every column renormalized to unit
/// sum after each squaring, which stops round-off in the total population from
/// doubling at every step over long stiff intervals.
fn propagator(g: &Mat, t: f64) -> Mat {
    let norm = (0..LEVELS)
        .map(|c| (0..LEVELS).map(|r| g[r][c].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * t.abs();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let mut e = expm_real(&scaled(g, t * 0.5f64.powi(squarings)));
    for _ in 0..squarings {
        e = rmatmul(&e, &e);
        for c in 0..LEVELS {
            let sum: f64 = (0..LEVELS).map(|r| e[r][c]).sum();
            (0..LEVELS).for_each(|r| e[r][c] /= sum);
        }
    }
    e
}

/// `∫_0^t e^{Gs} ds`, the upper-right block of `exp([[G, I], [0, 0]] t)`.
fn propagator_integral(g: &Mat, t: f64) -> Mat {
    let mut aug: RMatrix<{ 2 * LEVELS }> = [[0.0; 2 * LEVELS]; 2 * LEVELS];
    for r in 0..LEVELS {
        for c in 0..LEVELS {
            aug[r][c] = g[r][c] * t;
        }
        aug[r][LEVELS + r] = t;
    }
    let e = expm_real(&aug);
    core::array::from_fn(|r| core::array::from_fn(|c| e[r][LEVELS + c]))
}

/// Row functional `v ↦ k_r (e0 + e1)` of `m v`.
fn emission_row(m: &Mat, rates: &RateConstants) -> Vec5 {
    core::array::from_fn(|c| rates.radiative * (m[EXCITED_0][c] + m[EXCITED_1][c]))
}

fn dot(a: &Vec5, b: &Vec5) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stationary populations under constant pump.
pub fn steady_state(rates: &RateConstants, pump: f64) -> Result<RateModelState> {
    let mut a = rate_generator(rates, pump);
    a[0] = [1.0; LEVELS];
    let mut b = [0.0; LEVELS];
    b[0] = 1.0;
    let p = solve_real(&a, &b)?;
    RateModelState::new(p, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseTrainSpec {
    /// Laser pulse length `t_l`.
    pub laser_us: f64,
    /// Dark interval holding the microwave pulse; the transfer happens at its end.
    pub gap_us: f64,
    pub cycles: usize,
    /// Contrast integration window within the laser pulse.
    pub window_start_us: f64,
    pub window_end_us: f64,
    /// Population fraction swapped by the microwave pulse (1 = ideal π).
    pub transfer_fraction: f64,
    /// Spacing of the recorded fluorescence traces.
    pub sample_us: f64,
}

impl Default for PulseTrainSpec {
    fn default() -> Self {
        Self {
            laser_us: 3000.0,
            gap_us: 2.0,
            cycles: 110,
            window_start_us: 300.0,
            window_end_us: 2700.0,
            transfer_fraction: 1.0,
            sample_us: 10.0,
        }
    }
}

impl PulseTrainSpec {
    pub fn validate(&self) -> Result<()> {
        require_positive("laser duration", self.laser_us)?;
        require_positive("sample spacing", self.sample_us)?;
        if !(self.gap_us >= 0.0 && self.gap_us.is_finite()) {
            return Err(Error::invalid("gap", "must be finite and >= 0"));
        }
        if self.cycles == 0 {
            return Err(Error::invalid("cycles", "need at least one cycle"));
        }
        if !(0.0 <= self.window_start_us
            && self.window_start_us < self.window_end_us
            && self.window_end_us <= self.laser_us)
        {
            return Err(Error::invalid(
                "window",
                alloc::format!(
                    "[{}, {}] us must be a non-empty sub-interval of the {} us laser pulse",
                    self.window_start_us,
                    self.window_end_us,
                    self.laser_us
                ),
            ));
        }
        check_fraction(self.transfer_fraction)
    }

    /// Same sequence with laser length `laser_us`, the window end clipped to it.
    /// A window start at or beyond the clipped end moves to `0.1 · laser_us`.
    pub fn with_laser(&self, laser_us: f64) -> Self {
        let window_end_us = self.window_end_us.min(laser_us);
        let window_start_us = if self.window_start_us < window_end_us {
            self.window_start_us
        } else {
            0.1 * laser_us
        };
        Self {
            laser_us,
            window_start_us,
            window_end_us,
            ..*self
        }
    }

    fn sample_count(&self) -> usize {
        (self.laser_us / self.sample_us).floor() as usize + 1
    }
}

/// Precomputed linear maps of one annulus for one sequence.
struct AnnulusMaps {
    laser: Mat,
    dark: Mat,
    sample_step: Mat,
    /// Fluorescence integrated over the contrast window.
    window: Vec5,
    /// Fluorescence integrated over the whole laser pulse.
    whole: Vec5,
    /// Fluorescence at the end of the laser pulse.
    end: Vec5,
}

impl AnnulusMaps {
    fn new(spec: &PulseTrainSpec, rates: &RateConstants, pump: f64) -> Self {
        let on = rate_generator(rates, pump);
        let laser = propagator(&on, spec.laser_us);
        let whole = propagator_integral(&on, spec.laser_us);
        let window_int = propagator_integral(&on, spec.window_end_us - spec.window_start_us);
        let to_window = propagator(&on, spec.window_start_us);
        Self {
            laser,
            dark: propagator(&rate_generator(rates, 0.0), spec.gap_us),
            sample_step: propagator(&on, spec.sample_us),
            window: emission_row(&rmatmul(&window_int, &to_window), rates),
            whole: emission_row(&whole, rates),
            end: emission_row(&laser, rates),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleRecord {
    /// `(reference − signal) / reference` over the contrast window.
    pub contrast: f64,
    pub signal_window: f64,
    pub reference_window: f64,
    /// Signal fluorescence averaged over the laser pulse.
    pub mean_fluorescence: f64,
    /// Aggregate signal fluorescence at the trace sample times.
    pub signal_trace: Vec<f64>,
    /// Aggregate fluorescence of the same cycle without the microwave pulse.
    pub reference_trace: Vec<f64>,
    /// `m_s = 0` ground population per annulus at the end of the laser pulse.
    pub ground0_end: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulseTrain {
    /// Times within each laser pulse at which traces are sampled.
    pub sample_times_us: Vec<f64>,
    pub cycles: Vec<CycleRecord>,
}

struct AnnulusCycle {
    signal_window: f64,
    reference_window: f64,
    whole: f64,
    signal_trace: Vec<f64>,
    reference_trace: Vec<f64>,
    ground0_end: f64,
}

fn trace(maps: &AnnulusMaps, start: &Vec5, samples: usize, rates: &RateConstants) -> Vec<f64> {
    let mut p = *start;
    let mut out = Vec::with_capacity(samples);
    for k in 0..samples {
        if k > 0 {
            p = rapply(&maps.sample_step, &p);
        }
        out.push(emission(&p, rates));
    }
    out
}

/// Repeated sequences of dark gap, microwave transfer and laser readout.
///
/// The ensemble starts with equal ground spin populations and receives one
/// initialising laser pulse before the first cycle. Each cycle's reference is
/// the same cycle with the microwave pulse skipped.
pub fn pulse_train<X: MemberMap>(spec: &PulseTrainSpec, config: &RateModelConfig, exec: &X) -> Result<PulseTrain> {
    spec.validate()?;
    config.validate()?;
    let rates = &config.rates;
    let samples = spec.sample_count();
    let annuli = config.grid.annuli();
    let per_annulus = exec.map(annuli.len(), |i| {
        let maps = AnnulusMaps::new(spec, rates, config.pump_at(annuli[i].radius));
        let mut p = rapply(&maps.laser, &RateModelState::thermal().populations);
        let mut cycles = Vec::with_capacity(spec.cycles);
        for _ in 0..spec.cycles {
            let reference = rapply(&maps.dark, &p);
            let signal = transfer(&reference, spec.transfer_fraction);
            p = rapply(&maps.laser, &signal);
            cycles.push(AnnulusCycle {
                signal_window: dot(&maps.window, &signal),
                reference_window: dot(&maps.window, &reference),
                whole: dot(&maps.whole, &signal),
                signal_trace: trace(&maps, &signal, samples, rates),
                reference_trace: trace(&maps, &reference, samples, rates),
                ground0_end: p[GROUND_0],
            });
        }
        Ok(cycles)
    })?;

    let sample_times_us = (0..samples).map(|k| k as f64 * spec.sample_us).collect();
    let cycles = (0..spec.cycles)
        .map(|c| {
            let mut rec = CycleRecord {
                contrast: 0.0,
                signal_window: 0.0,
                reference_window: 0.0,
                mean_fluorescence: 0.0,
                signal_trace: vec![0.0; samples],
                reference_trace: vec![0.0; samples],
                ground0_end: Vec::with_capacity(annuli.len()),
            };
            for (a, cycles) in annuli.iter().zip(&per_annulus) {
                let x = &cycles[c];
                rec.signal_window += a.weight * x.signal_window;
                rec.reference_window += a.weight * x.reference_window;
                rec.mean_fluorescence += a.weight * x.whole / spec.laser_us;
                for (acc, v) in rec.signal_trace.iter_mut().zip(&x.signal_trace) {
                    *acc += a.weight * v;
                }
                for (acc, v) in rec.reference_trace.iter_mut().zip(&x.reference_trace) {
                    *acc += a.weight * v;
                }
                rec.ground0_end.push(x.ground0_end);
            }
            rec.contrast = (rec.reference_window - rec.signal_window) / rec.reference_window;
            rec
        })
        .collect();
    Ok(PulseTrain {
        sample_times_us,
        cycles,
    })
}

/// Contrast and fluorescence once the cycle-to-cycle state has become periodic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyCycle {
    pub laser_us: f64,
    pub contrast: f64,
    /// Aggregate fluorescence averaged over the laser pulse.
    pub mean_fluorescence: f64,
    /// Aggregate fluorescence at the end of the laser pulse.
    pub end_fluorescence: f64,
}

/// Fixed point of the one-cycle map `laser ∘ transfer ∘ dark`.
fn periodic_state(maps: &AnnulusMaps, fraction: f64) -> Result<Vec5> {
    let mut pi = [[0.0; LEVELS]; LEVELS];
    for c in 0..LEVELS {
        let mut e = [0.0; LEVELS];
        e[c] = 1.0;
        let col = transfer(&e, fraction);
        for r in 0..LEVELS {
            pi[r][c] = col[r];
        }
    }
    let cycle = rmatmul(&maps.laser, &rmatmul(&pi, &maps.dark));
    let mut a = cycle;
    for (r, row) in a.iter_mut().enumerate() {
        row[r] -= 1.0;
    }
    a[0] = [1.0; LEVELS];
    let mut b = [0.0; LEVELS];
    b[0] = 1.0;
    solve_real(&a, &b)
}

pub fn steady_cycle<X: MemberMap>(spec: &PulseTrainSpec, config: &RateModelConfig, exec: &X) -> Result<SteadyCycle> {
    spec.validate()?;
    config.validate()?;
    let annuli = config.grid.annuli();
    let parts = exec.map(annuli.len(), |i| {
        let maps = AnnulusMaps::new(spec, &config.rates, config.pump_at(annuli[i].radius));
        let p = periodic_state(&maps, spec.transfer_fraction)?;
        let reference = rapply(&maps.dark, &p);
        let signal = transfer(&reference, spec.transfer_fraction);
        Ok([
            dot(&maps.window, &signal),
            dot(&maps.window, &reference),
            dot(&maps.whole, &signal),
            dot(&maps.end, &signal),
        ])
    })?;
    let mut sums = [0.0; 4];
    for (a, x) in annuli.iter().zip(&parts) {
        for (s, v) in sums.iter_mut().zip(x) {
            *s += a.weight * v;
        }
    }
    Ok(SteadyCycle {
        laser_us: spec.laser_us,
        contrast: (sums[1] - sums[0]) / sums[1],
        mean_fluorescence: sums[2] / spec.laser_us,
        end_fluorescence: sums[3],
    })
}

/// Steady-cycle contrast for each laser length.
///
/// Every point uses the same contrast window: `base`'s window clipped to the
/// shortest pulse by [`PulseTrainSpec::with_laser`]. Only the reinitialization
/// then differs between points.
pub fn contrast_vs_laser_duration<X: MemberMap>(
    laser_us: &[f64],
    base: &PulseTrainSpec,
    config: &RateModelConfig,
    exec: &X,
) -> Result<Vec<SteadyCycle>> {
    let shortest = laser_us.iter().copied().fold(f64::INFINITY, f64::min);
    if laser_us.is_empty() || !(shortest > 0.0) {
        return Err(Error::invalid("laser durations", "need at least one positive duration"));
    }
    let window = base.with_laser(shortest);
    laser_us
        .iter()
        .map(|&laser_us| {
            let spec = PulseTrainSpec { laser_us, ..window };
            steady_cycle(&spec, config, exec)
        })
        .collect()
}

/// `y ≈ asymptote − depth · e^{−t/τ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialFit {
    pub asymptote: f64,
    pub depth: f64,
    pub tau_us: f64,
    pub r_squared: f64,
}

/// Minimum coefficient of determination accepted by [`fit_exponential_recovery`].
pub const MIN_R_SQUARED: f64 = 0.99;

/// Linear least squares for `(A, D)` at fixed `τ`; returns `(A, D, residual sum of squares)`.
fn project(t: &[f64], y: &[f64], tau: f64) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let e = (-ti / tau).exp();
        se += e;
        see += e * e;
        sy += yi;
        sey += e * yi;
    }
    let det = n * see - se * se;
    if det.abs() < 1e-300 {
        let a = sy / n;
        let rss = y.iter().map(|v| (v - a) * (v - a)).sum();
        return (a, 0.0, rss);
    }
    let a = (see * sy - se * sey) / det;
    let b = (n * sey - se * sy) / det;
    let rss = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let r = yi - a - b * (-ti / tau).exp();
            r * r
        })
        .sum();
    (a, -b, rss)
}

/// Fits a single-exponential approach to an asymptote by variable projection.
///
/// `log τ` is scanned over `[log(Δt_min / 10), log(100 · span)]` and the best
/// bracket refined by golden-section search.
pub fn fit_exponential_recovery(t: &[f64], y: &[f64]) -> Result<ExponentialFit> {
    let fit = best_exponential(t, y)?;
    if !(fit.r_squared >= MIN_R_SQUARED) {
        return Err(Error::PoorFit {
            tau: fit.tau_us,
            r_squared: fit.r_squared,
        });
    }
    Ok(fit)
}

/// Least-squares exponential without the quality gate.
fn best_exponential(t: &[f64], y: &[f64]) -> Result<ExponentialFit> {
    if t.len() != y.len() || t.len() < 4 {
        return Err(Error::invalid("samples", "need at least 4 paired samples"));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("samples", "times must increase and values be finite"));
    }
    let span = t[t.len() - 1] - t[0];
    let min_dt = t.windows(2).map(|w| w[1] - w[0]).fold(f64::MAX, f64::min);
    let (lo, hi) = ((0.1 * min_dt).ln(), (100.0 * span).ln());
    const GRID: usize = 400;
    let at = |i: usize| lo + (hi - lo) * i as f64 / GRID as f64;
    let rss = |log_tau: f64| project(t, y, log_tau.exp()).2;
    let best = (0..=GRID)
        .min_by(|&a, &b| rss(at(a)).total_cmp(&rss(at(b))))
        .unwrap_or(0);
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(GRID)));
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (rss(x1), rss(x2));
    for _ in 0..100 {
        if b - a < 1e-12 {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = rss(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = rss(x2);
        }
    }
    let tau = (0.5 * (a + b)).exp();
    let (asymptote, depth, res) = project(t, y, tau);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let total: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r_squared = if total > 0.0 { 1.0 - res / total } else { 0.0 };
    Ok(ExponentialFit {
        asymptote,
        depth,
        tau_us: tau,
        r_squared,
    })
}

/// Sampling of a recovery curve after a π-pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoverySpec {
    pub window_us: f64,
    pub samples: usize,
    /// Dark interval before the transfer, letting excited and shelving levels drain.
    pub gap_us: f64,
}

impl Default for RecoverySpec {
    fn default() -> Self {
        Self {
            window_us: 20_000.0,
            samples: 2000,
            gap_us: 2.0,
        }
    }
}

impl RecoverySpec {
    fn validate(&self) -> Result<()> {
        require_positive("recovery window", self.window_us)?;
        if self.samples < 4 {
            return Err(Error::invalid("samples", "need at least 4 samples"));
        }
        if !(self.gap_us >= 0.0 && self.gap_us.is_finite()) {
            return Err(Error::invalid("gap", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Sample times after the π-pulse, µs.
    pub fn times(&self) -> Vec<f64> {
        (1..=self.samples)
            .map(|k| self.window_us * k as f64 / self.samples as f64)
            .collect()
    }
}

/// Populations sampled over the recovery window, starting from the pumped
/// steady state at `pump`, a dark gap and an ideal π-pulse.
fn recovery_samples(rates: &RateConstants, pump: f64, spec: &RecoverySpec) -> Result<Vec<Vec5>> {
    let start = steady_state(rates, pump)?;
    let dark = evolve_exact(&start, rates, 0.0, spec.gap_us);
    let mut p = apply_ideal_pi(&dark).populations;
    let step = propagator(&rate_generator(rates, pump), spec.window_us / spec.samples as f64);
    Ok((0..spec.samples)
        .map(|_| {
            p = rapply(&step, &p);
            p
        })
        .collect())
}

/// Time constant of the `m_s = 0` ground population's recovery at radius `r/r_0`.
pub fn reinit_time(radius: f64, config: &RateModelConfig, spec: &RecoverySpec) -> Result<ExponentialFit> {
    config.validate()?;
    spec.validate()?;
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", "must be finite and >= 0"));
    }
    let g0: Vec<f64> = recovery_samples(&config.rates, config.pump_at(radius), spec)?
        .iter()
        .map(|p| p[GROUND_0])
        .collect();
    fit_exponential_recovery(&spec.times(), &g0)
}

/// Time constant of the ensemble-aggregate fluorescence recovery.
pub fn aggregate_recovery<X: MemberMap>(
    config: &RateModelConfig,
    spec: &RecoverySpec,
    exec: &X,
) -> Result<ExponentialFit> {
    fit_exponential_recovery(&spec.times(), &aggregate_recovery_trace(config, spec, exec)?)
}

/// Aggregate fluorescence at [`RecoverySpec`]'s sample times after the π-pulse.
pub fn aggregate_recovery_trace<X: MemberMap>(
    config: &RateModelConfig,
    spec: &RecoverySpec,
    exec: &X,
) -> Result<Vec<f64>> {
    config.validate()?;
    spec.validate()?;
    let annuli = config.grid.annuli();
    let traces = exec.map(annuli.len(), |i| {
        let s = recovery_samples(&config.rates, config.pump_at(annuli[i].radius), spec)?;
        Ok(s.iter().map(|p| emission(p, &config.rates)).collect::<Vec<f64>>())
    })?;
    let mut total = vec![0.0; spec.samples];
    for (a, tr) in annuli.iter().zip(&traces) {
        for (acc, v) in total.iter_mut().zip(tr) {
            *acc += a.weight * v;
        }
    }
    Ok(total)
}

/// Centre pump rate whose aggregate recovery constant equals `target_tau_us`,
/// by bisection in `log k` over `[1e-5, 0.05]` 1/µs.
///
/// Intermediate fits are not quality gated; the returned rate's fit is.
pub fn calibrate_center_pump<X: MemberMap>(
    config: &RateModelConfig,
    target_tau_us: f64,
    spec: &RecoverySpec,
    exec: &X,
) -> Result<f64> {
    require_positive("target time constant", target_tau_us)?;
    let times = spec.times();
    let tau = |k: f64| -> Result<f64> {
        let trace = aggregate_recovery_trace(&config.with_center_pump(k), spec, exec)?;
        Ok(best_exponential(&times, &trace)?.tau_us)
    };
    let (mut lo, mut hi) = (1e-5f64.ln(), 0.05f64.ln());
    if tau(lo.exp())? < target_tau_us || tau(hi.exp())? > target_tau_us {
        return Err(Error::invalid(
            "target time constant",
            alloc::format!("{target_tau_us} us is outside the reachable range"),
        ));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tau(mid.exp())? > target_tau_us {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = (0.5 * (lo + hi)).exp();
    aggregate_recovery(&config.with_center_pump(k), spec, exec)?;
    Ok(k)
}
