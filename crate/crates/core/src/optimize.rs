//! Penalised gradient ascent of the weighted ensemble fidelity.
//!
//! The objective is `F_tot = F_st + F_pen` where `F_st` is the weighted mean
//! over ensemble members of the hyperfine-averaged transfer probability and
//! `F_pen = −p t_p Σ a²` discourages large amplitudes. After every update the
//! penalty constant `p` moves by `Δp` towards enforcing the Rabi limit.
//!
//! The loop takes a fixed number of constant-step updates followed by updates
//! whose step length comes from a golden-section line search.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::TransferEngine;
use crate::ensemble::RepresentativeEnsemble;
use crate::error::{require_positive, Error, Result};
use crate::exec::MemberMap;
use crate::pulse::PulseCoefficients;
use crate::spin::HyperfineConfig;

/// Weighted ensemble transfer objective for one engine and executor.
pub struct EnsembleObjective<'a, E, X> {
    pub ensemble: &'a RepresentativeEnsemble,
    pub hyperfine: &'a HyperfineConfig,
    pub engine: &'a E,
    pub exec: &'a X,
}

impl<'a, E: TransferEngine, X: MemberMap> EnsembleObjective<'a, E, X> {
    pub fn new(
        ensemble: &'a RepresentativeEnsemble,
        hyperfine: &'a HyperfineConfig,
        engine: &'a E,
        exec: &'a X,
    ) -> Self {
        Self {
            ensemble,
            hyperfine,
            engine,
            exec,
        }
    }

    /// Hyperfine-averaged transfer probability of every member, in member order.
    pub fn member_fidelities(&self, pulse: &PulseCoefficients) -> Result<Vec<f64>> {
        let prepared = self.engine.prepare(pulse)?;
        let members = self.ensemble.members();
        let k = self.hyperfine.levels() as f64;
        self.exec.map(members.len(), |i| {
            let m = &members[i];
            let mut sum = 0.0;
            for det in self.hyperfine.transition_detunings(m.detuning_mhz) {
                sum += self.engine.transfer(&prepared, det, m.alpha)?;
            }
            Ok(sum / k)
        })
    }

    /// `F_st` and the per-member fidelities it averages.
    pub fn evaluate(&self, pulse: &PulseCoefficients) -> Result<(f64, Vec<f64>)> {
        let per_member = self.member_fidelities(pulse)?;
        let f = self
            .ensemble
            .members()
            .iter()
            .zip(&per_member)
            .map(|(m, f)| m.weight * f)
            .sum();
        Ok((f, per_member))
    }

    pub fn value(&self, pulse: &PulseCoefficients) -> Result<f64> {
        Ok(self.evaluate(pulse)?.0)
    }

    /// `F_st` and `∂F_st/∂a` in the layout `[a_1x … a_Nx, a_1y … a_Ny]`.
    pub fn value_and_gradient(&self, pulse: &PulseCoefficients) -> Result<(f64, Vec<f64>)> {
        let prepared = self.engine.prepare(pulse)?;
        let members = self.ensemble.members();
        let n_params = 2 * pulse.harmonics();
        let k = self.hyperfine.levels() as f64;
        let parts = self.exec.map(members.len(), |i| {
            let m = &members[i];
            let mut grad = vec![0.0; n_params];
            let mut sum = 0.0;
            for det in self.hyperfine.transition_detunings(m.detuning_mhz) {
                sum += self
                    .engine
                    .transfer_with_gradient(&prepared, det, m.alpha, m.weight / k, &mut grad)?;
            }
            Ok((m.weight * sum / k, grad))
        })?;
        let mut total = 0.0;
        let mut grad = vec![0.0; n_params];
        for (f, g) in parts {
            total += f;
            for (acc, x) in grad.iter_mut().zip(g) {
                *acc += x;
            }
        }
        Ok((total, grad))
    }
}

/// `F_pen = −p t_p Σ a²`.
pub fn penalty(pulse: &PulseCoefficients, p: f64) -> f64 {
    -p * pulse.duration_us() * pulse.sum_of_squares()
}

/// `∂F_pen/∂a = −2 p t_p a`.
pub fn penalty_gradient(pulse: &PulseCoefficients, p: f64) -> Vec<f64> {
    let scale = -2.0 * p * pulse.duration_us();
    pulse.params().into_iter().map(|a| scale * a).collect()
}

/// `∂(F_st + F_pen)/∂a`.
pub fn objective_gradient<E: TransferEngine, X: MemberMap>(
    objective: &EnsembleObjective<'_, E, X>,
    pulse: &PulseCoefficients,
    p: f64,
) -> Result<Vec<f64>> {
    let (_, mut grad) = objective.value_and_gradient(pulse)?;
    for (g, pg) in grad.iter_mut().zip(penalty_gradient(pulse, p)) {
        *g += pg;
    }
    Ok(grad)
}

/// Raises `p` by `step` while the pulse exceeds the limit, otherwise lowers it, never below zero.
pub fn update_penalty(p: f64, max_rabi_mhz: f64, rabi_limit_mhz: f64, step: f64) -> f64 {
    if max_rabi_mhz > rabi_limit_mhz {
        p + step
    } else {
        (p - step).max(0.0)
    }
}

/// Uniform draw from `[−1, 1]` per amplitude, rescaled so the peak Rabi
/// frequency is `overshoot × rabi_limit_mhz`.
pub fn init_amplitudes(
    seed: u64,
    rabi_limit_mhz: f64,
    harmonics: usize,
    duration_us: f64,
    overshoot: f64,
) -> Result<PulseCoefficients> {
    require_positive("rabi limit", rabi_limit_mhz)?;
    require_positive("overshoot", overshoot)?;
    if harmonics == 0 {
        return Err(Error::invalid("harmonics", "need at least one harmonic"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<f64> = (0..2 * harmonics).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let raw = PulseCoefficients::from_params(&params, duration_us, 0.0)?;
    let peak = raw.max_rabi();
    require_positive("initial amplitudes", peak)?;
    Ok(raw.scaled(overshoot * rabi_limit_mhz / peak))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchSettings {
    /// Upper end of the first bracket.
    pub initial_upper: f64,
    /// Cap on golden-section reductions (and on bracket shrinking).
    pub max_iterations: usize,
    /// Cap on bracket expansions.
    pub max_expansions: usize,
    /// Stop when the bracket is narrower than this fraction of its upper end.
    pub tolerance: f64,
}

impl Default for LineSearchSettings {
    fn default() -> Self {
        Self {
            initial_upper: 0.07,
            max_iterations: 30,
            max_expansions: 20,
            tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchOutcome {
    /// Accepted step; zero when no evaluated step improved on the start.
    pub step: f64,
    /// Objective at the accepted step.
    pub value: f64,
    /// Whether some positive step strictly improved the objective.
    pub improved: bool,
    pub evaluations: usize,
}

/// Maximises `phi(β)` for `β ≥ 0` by bracketing and golden-section search.
///
/// `phi_zero` is `phi(0)`. The returned value is never below `phi_zero`.
pub fn golden_section_search<F>(mut phi: F, phi_zero: f64, settings: &LineSearchSettings) -> Result<LineSearchOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    require_positive("line search bracket", settings.initial_upper)?;
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    const INV_PHI2: f64 = 1.0 - INV_PHI;
    let mut evaluations = 0;
    let mut best = (0.0, phi_zero);
    let mut eval = |x: f64, best: &mut (f64, f64)| -> Result<f64> {
        evaluations += 1;
        let v = phi(x)?;
        if v > best.1 {
            *best = (x, v);
        }
        Ok(v)
    };

    let mut a = 0.0;
    let mut c = settings.initial_upper;
    let mut b = INV_PHI2 * c;
    let mut fb = eval(b, &mut best)?;
    let mut iterations = 0;
    // Shrink towards zero until an interior point beats the start.
    while fb <= phi_zero {
        iterations += 1;
        if iterations > settings.max_iterations {
            return Ok(finish(best, phi_zero, evaluations));
        }
        c = b;
        b = INV_PHI2 * c;
        fb = eval(b, &mut best)?;
    }
    let mut fc = eval(c, &mut best)?;
    // Expand while the objective is still rising at the upper end.
    let mut expansions = 0;
    while fc >= fb && expansions < settings.max_expansions {
        expansions += 1;
        let next = c + (c - b) / INV_PHI;
        a = b;
        b = c;
        fb = fc;
        c = next;
        fc = eval(c, &mut best)?;
    }
    while iterations < settings.max_iterations && (c - a) > settings.tolerance * c {
        iterations += 1;
        let x = if c - b > b - a {
            b + INV_PHI2 * (c - b)
        } else {
            b - INV_PHI2 * (b - a)
        };
        let fx = eval(x, &mut best)?;
        if fx > fb {
            if x > b {
                a = b;
            } else {
                c = b;
            }
            b = x;
            fb = fx;
        } else if x > b {
            c = x;
        } else {
            a = x;
        }
    }
    Ok(finish(best, phi_zero, evaluations))
}

fn finish(best: (f64, f64), phi_zero: f64, evaluations: usize) -> LineSearchOutcome {
    if best.1 > phi_zero {
        LineSearchOutcome {
            step: best.0,
            value: best.1,
            improved: true,
            evaluations,
        }
    } else {
        LineSearchOutcome {
            step: 0.0,
            value: phi_zero,
            improved: false,
            evaluations,
        }
    }
}

fn offset_pulse(pulse: &PulseCoefficients, direction: &[f64], step: f64) -> Result<PulseCoefficients> {
    let params: Vec<f64> = pulse
        .params()
        .iter()
        .zip(direction)
        .map(|(a, d)| a + step * d)
        .collect();
    PulseCoefficients::from_params(&params, pulse.duration_us(), pulse.carrier_mhz())
}

/// Step length along `direction` maximising `F_tot` at fixed `p`.
///
/// A zero direction returns an unimproved outcome without evaluating anything.
pub fn line_search<E: TransferEngine, X: MemberMap>(
    objective: &EnsembleObjective<'_, E, X>,
    pulse: &PulseCoefficients,
    direction: &[f64],
    p: f64,
    f_tot_start: f64,
    settings: &LineSearchSettings,
) -> Result<LineSearchOutcome> {
    if direction.iter().all(|&d| d == 0.0) {
        return Ok(LineSearchOutcome {
            step: 0.0,
            value: f_tot_start,
            improved: false,
            evaluations: 0,
        });
    }
    golden_section_search(
        |beta| {
            let trial = offset_pulse(pulse, direction, beta)?;
            Ok(objective.value(&trial)? + penalty(&trial, p))
        },
        f_tot_start,
        settings,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub rabi_limit_mhz: f64,
    pub duration_us: f64,
    pub harmonics: usize,
    /// Carrier metadata copied onto the resulting pulse.
    pub carrier_mhz: f64,
    /// Total number of updates.
    pub steps: usize,
    /// Step length of the constant-step phase.
    pub fixed_step: f64,
    /// Number of constant-step updates before line searches start.
    pub fixed_steps: usize,
    pub penalty_initial: f64,
    pub penalty_step: f64,
    /// Initial peak Rabi frequency as a multiple of the limit.
    pub init_overshoot: f64,
    pub seed: u64,
    /// Line-search iteration cap.
    pub line_search_iterations: usize,
    /// Relative bracket width at which a line search stops.
    pub line_search_tolerance: f64,
    /// Iterates with peak Rabi frequency up to `rabi_limit_mhz × rabi_tolerance` count as feasible.
    pub rabi_tolerance: f64,
    /// Final per-step change in `F_st` above which the run is reported as not converged.
    pub convergence_threshold: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rabi_limit_mhz: 1.4,
            duration_us: 1.85,
            harmonics: 10,
            carrier_mhz: 0.0,
            steps: 150,
            fixed_step: 0.007,
            fixed_steps: 51,
            penalty_initial: 1.0,
            penalty_step: 0.05,
            init_overshoot: 2.8,
            seed: 0,
            line_search_iterations: 30,
            line_search_tolerance: 1e-3,
            rabi_tolerance: 1.02,
            convergence_threshold: 1e-3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        require_positive("rabi limit", self.rabi_limit_mhz)?;
        require_positive("duration", self.duration_us)?;
        require_positive("fixed step", self.fixed_step)?;
        require_positive("line search tolerance", self.line_search_tolerance)?;
        require_positive("rabi tolerance", self.rabi_tolerance)?;
        require_positive("convergence threshold", self.convergence_threshold)?;
        if self.harmonics == 0 {
            return Err(Error::invalid("harmonics", "need at least one harmonic"));
        }
        if self.steps < self.fixed_steps {
            return Err(Error::invalid(
                "steps",
                alloc::format!("total steps {} below fixed-step count {}", self.steps, self.fixed_steps),
            ));
        }
        if !(self.init_overshoot > 1.0 && self.init_overshoot.is_finite()) {
            return Err(Error::invalid("overshoot", "initial overshoot must exceed 1"));
        }
        if !(self.penalty_initial >= 0.0 && self.penalty_initial.is_finite()) {
            return Err(Error::invalid("penalty", "initial penalty must be finite and >= 0"));
        }
        if !(self.penalty_step >= 0.0 && self.penalty_step.is_finite()) {
            return Err(Error::invalid("penalty step", "must be finite and >= 0"));
        }
        if self.line_search_iterations == 0 {
            return Err(Error::invalid("line search iterations", "must be positive"));
        }
        Ok(())
    }

    fn line_search_settings(&self) -> LineSearchSettings {
        LineSearchSettings {
            initial_upper: 10.0 * self.fixed_step,
            max_iterations: self.line_search_iterations,
            tolerance: self.line_search_tolerance,
            ..LineSearchSettings::default()
        }
    }
}

/// State after one update (or the initial guess, at step 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub f_st: f64,
    /// Penalty of this iterate under the constant `penalty` that was active for the update.
    pub f_pen: f64,
    pub penalty: f64,
    pub max_rabi_mhz: f64,
    /// Step length used to reach this iterate.
    pub beta: f64,
    /// `F_tot` of the previous iterate under the same penalty constant.
    pub f_tot_start: f64,
    pub line_search: bool,
}

impl TraceRecord {
    pub fn f_tot(&self) -> f64 {
        self.f_st + self.f_pen
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationOutcome {
    /// Best feasible iterate (highest `F_st` within the Rabi tolerance), or
    /// the final iterate when none was feasible.
    pub pulse: PulseCoefficients,
    /// Step index of [`Self::pulse`] in the trace.
    pub best_step: usize,
    pub final_pulse: PulseCoefficients,
    pub trace: OptimizationTrace,
    /// Whether the last update changed `F_st` by at most the convergence threshold.
    pub converged: bool,
    pub feasible: bool,
}

pub fn optimize<E: TransferEngine, X: MemberMap>(
    config: &OptimizerConfig,
    objective: &EnsembleObjective<'_, E, X>,
) -> Result<OptimizationOutcome> {
    config.validate()?;
    let initial = init_amplitudes(
        config.seed,
        config.rabi_limit_mhz,
        config.harmonics,
        config.duration_us,
        config.init_overshoot,
    )?
    .with_carrier(config.carrier_mhz);
    optimize_from(config, objective, initial)
}

/// As [`optimize`], starting from a given pulse instead of a seeded draw.
pub fn optimize_from<E: TransferEngine, X: MemberMap>(
    config: &OptimizerConfig,
    objective: &EnsembleObjective<'_, E, X>,
    initial: PulseCoefficients,
) -> Result<OptimizationOutcome> {
    config.validate()?;
    let settings = config.line_search_settings();
    let limit = config.rabi_limit_mhz * config.rabi_tolerance;
    let mut pulse = initial;
    let mut p = config.penalty_initial;
    let (mut f_st, mut grad_st) = objective.value_and_gradient(&pulse)?;
    let mut max_rabi = pulse.max_rabi();
    let f_pen0 = penalty(&pulse, p);
    let mut records = Vec::with_capacity(config.steps + 1);
    records.push(TraceRecord {
        step: 0,
        f_st,
        f_pen: f_pen0,
        penalty: p,
        max_rabi_mhz: max_rabi,
        beta: 0.0,
        f_tot_start: f_st + f_pen0,
        line_search: false,
    });
    let mut best: Option<(usize, f64, PulseCoefficients)> = None;
    if max_rabi <= limit {
        best = Some((0, f_st, pulse.clone()));
    }
    p = update_penalty(p, max_rabi, config.rabi_limit_mhz, config.penalty_step);

    for step in 1..=config.steps {
        let f_tot_start = f_st + penalty(&pulse, p);
        let mut direction = grad_st.clone();
        for (d, pg) in direction.iter_mut().zip(penalty_gradient(&pulse, p)) {
            *d += pg;
        }
        let searching = step > config.fixed_steps;
        let beta = if searching {
            line_search(objective, &pulse, &direction, p, f_tot_start, &settings)?.step
        } else {
            config.fixed_step
        };
        pulse = offset_pulse(&pulse, &direction, beta)?;
        let (f, g) = objective.value_and_gradient(&pulse)?;
        f_st = f;
        grad_st = g;
        max_rabi = pulse.max_rabi();
        records.push(TraceRecord {
            step,
            f_st,
            f_pen: penalty(&pulse, p),
            penalty: p,
            max_rabi_mhz: max_rabi,
            beta,
            f_tot_start,
            line_search: searching,
        });
        if max_rabi <= limit && best.as_ref().map_or(true, |b| f_st > b.1) {
            best = Some((step, f_st, pulse.clone()));
        }
        p = update_penalty(p, max_rabi, config.rabi_limit_mhz, config.penalty_step);
    }

    let converged = match records.as_slice() {
        [.., prev, last] => (last.f_st - prev.f_st).abs() <= config.convergence_threshold,
        _ => true,
    };
    let feasible = best.is_some();
    let (best_step, pulse_out) = match best {
        Some((s, _, p)) => (s, p),
        None => (config.steps, pulse.clone()),
    };
    Ok(OptimizationOutcome {
        pulse: pulse_out,
        best_step,
        final_pulse: pulse,
        trace: OptimizationTrace { records },
        converged,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::FloquetEngine;
    use crate::ensemble::sample_representative_ensemble;
    use crate::exec::Sequential;
    use crate::hamiltonian::EnsembleMember;
    use crate::magnus::MagnusEngine;
    use core::f64::consts::PI;

    #[test]
    fn penalty_matches_direct_substitution() {
        let zero = PulseCoefficients::zeros(3, 1.0).unwrap();
        assert_eq!(penalty(&zero, 1.0), 0.0);
        let mut ax = vec![0.0; 3];
        ax[0] = 2.0 * PI;
        let p = PulseCoefficients::new(ax, vec![0.0; 3], 1.0, 0.0).unwrap();
        assert!((penalty(&p, 1.0) + 4.0 * PI * PI).abs() < 1e-12);
        assert!((penalty(&p, 1.0) - (-39.478_417_604_357_43)).abs() < 1e-9);
        assert_eq!(penalty(&p, 0.0), 0.0);
        let g = penalty_gradient(&p, 0.5);
        assert!((g[0] - (-2.0 * 0.5 * 1.0 * 2.0 * PI)).abs() < 1e-15);
        assert!(penalty_gradient(&zero, 1.0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn penalty_update_rule() {
        assert!((update_penalty(1.0, 1.5, 1.4, 0.05) - 1.05).abs() < 1e-15);
        assert!((update_penalty(1.0, 1.3, 1.4, 0.05) - 0.95).abs() < 1e-15);
        assert_eq!(update_penalty(0.03, 1.3, 1.4, 0.05), 0.0);
    }

    #[test]
    fn initial_amplitudes_hit_overshoot_and_are_seeded() {
        let a = init_amplitudes(42, 1.4, 10, 1.85, 2.8).unwrap();
        assert!((a.max_rabi() - 2.8 * 1.4).abs() < 1e-9);
        let b = init_amplitudes(42, 1.4, 10, 1.85, 2.8).unwrap();
        assert_eq!(a, b);
        let c = init_amplitudes(43, 1.4, 10, 1.85, 2.8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn golden_section_finds_quadratic_maximum() {
        let target = 0.123;
        let settings = LineSearchSettings {
            initial_upper: 0.07,
            tolerance: 1e-6,
            ..LineSearchSettings::default()
        };
        let phi = |b: f64| Ok(1.0 - (b - target) * (b - target));
        let out = golden_section_search(phi, phi(0.0).unwrap(), &settings).unwrap();
        assert!(out.improved);
        assert!((out.step - target).abs() < 1e-3, "step {}", out.step);

        // Maximum inside the first bracket.
        let phi = |b: f64| Ok(-(b - 0.01) * (b - 0.01));
        let out = golden_section_search(phi, phi(0.0).unwrap(), &settings).unwrap();
        assert!((out.step - 0.01).abs() < 1e-3);
    }

    #[test]
    fn golden_section_flags_descent_direction() {
        let phi = |b: f64| Ok(-b);
        let out = golden_section_search(phi, 0.0, &LineSearchSettings::default()).unwrap();
        assert!(!out.improved);
        assert_eq!(out.step, 0.0);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn zero_direction_is_flagged_without_evaluation() {
        let e = RepresentativeEnsemble::single(EnsembleMember::nominal());
        let hf = HyperfineConfig::single();
        let engine = MagnusEngine::default();
        let obj = EnsembleObjective::new(&e, &hf, &engine, &Sequential);
        let pulse = PulseCoefficients::zeros(2, 1.0).unwrap();
        let out = line_search(&obj, &pulse, &[0.0; 4], 1.0, 0.0, &LineSearchSettings::default()).unwrap();
        assert!(!out.improved && out.step == 0.0 && out.evaluations == 0);
    }

    #[test]
    fn zero_pulse_has_zero_objective() {
        let e = sample_representative_ensemble(1.0, 0.1, 3, 3).unwrap();
        let hf = HyperfineConfig::nitrogen14();
        let engine = FloquetEngine::default();
        let obj = EnsembleObjective::new(&e, &hf, &engine, &Sequential);
        let (f, per) = obj.evaluate(&PulseCoefficients::zeros(4, 1.85).unwrap()).unwrap();
        assert!(f.abs() < 1e-20);
        assert_eq!(per.len(), 9);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let e = sample_representative_ensemble(1.0, 0.1, 3, 2).unwrap();
        let hf = HyperfineConfig::nitrogen14();
        let engine = MagnusEngine::new(300).unwrap();
        let obj = EnsembleObjective::new(&e, &hf, &engine, &Sequential);
        let pulse = init_amplitudes(5, 1.4, 4, 1.85, 1.0).unwrap();
        let p = 0.7;
        let grad = objective_gradient(&obj, &pulse, p).unwrap();
        let base = pulse.params();
        let h = 1e-6;
        for i in 0..base.len() {
            let f = |d: f64| {
                let mut q = base.clone();
                q[i] += d;
                let q = PulseCoefficients::from_params(&q, 1.85, 0.0).unwrap();
                obj.value(&q).unwrap() + penalty(&q, p)
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-5 * grad[i].abs().max(1e-3), "i={i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn easy_single_defect_instance_reaches_near_unit_fidelity() {
        let e = sample_representative_ensemble(0.01, 0.001, 2, 2).unwrap();
        let hf = HyperfineConfig::single();
        let engine = MagnusEngine::new(400).unwrap();
        let obj = EnsembleObjective::new(&e, &hf, &engine, &Sequential);
        let config = OptimizerConfig {
            rabi_limit_mhz: 5.0,
            harmonics: 4,
            steps: 60,
            fixed_steps: 20,
            seed: 3,
            penalty_initial: 0.0,
            ..OptimizerConfig::default()
        };
        let out = optimize(&config, &obj).unwrap();
        assert_eq!(out.trace.len(), 61);
        assert!(out.trace.last().unwrap().f_st > 0.99, "{:?}", out.trace.last());
        for r in out.trace.records.iter().filter(|r| r.line_search) {
            assert!(r.f_tot() >= r.f_tot_start);
        }
    }

    #[test]
    fn config_validation() {
        let bad = OptimizerConfig {
            steps: 10,
            fixed_steps: 20,
            ..OptimizerConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidInput { field: "steps", .. })));
        let bad = OptimizerConfig {
            init_overshoot: 1.0,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig::default().validate().is_ok());
    }
}
