//! Truncated Floquet-matrix propagators.
//!
//! For a Hamiltonian periodic in `T = 2 t_p` with harmonics `H_n`, the
//! Floquet matrix `F[(m,s),(n,s')] = H_{m−n}[s,s'] + m Ω δ_mn δ_ss'`
//! (Ω = 2π/T, `|m|, |n| ≤ M`) gives the propagator
//! `U(t) = Σ_n e^{inΩt} [e^{−iFt}]_{(n,·),(0,·)}`. At `t = t_p` the phase
//! factors reduce to `(−1)^n`.
//!
//! Each hyperfine transition is an independent 2x2 block, so the Floquet
//! matrix is assembled and diagonalised per block (size `2(2M+1)`) and the
//! full propagator is the block-diagonal stack.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{require_positive, Error, Result};
use crate::fidelity::Propagator;
use crate::hamiltonian::{hamiltonian_fourier_components, EnsembleMember, FourierComponents};
use crate::linalg::{hermitian_eigen, hermitian_eigen_projected, CMatrix, HermitianEigen, C64, ZERO};
use crate::pulse::PulseCoefficients;
use crate::spin::HyperfineConfig;
use crate::TWO_PI;
use core::f64::consts::PI;

/// How many Floquet harmonics `M` to keep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    /// Exactly `M` harmonics; must be at least the pulse's `N_f`.
    Fixed(usize),
    /// Start at `initial` (default `N_f + 10`) and double until the 2x2 block
    /// propagators at `M` and `M + 2` agree to `tolerance` in operator norm.
    Adaptive {
        initial: Option<usize>,
        tolerance: f64,
        max_harmonics: usize,
    },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Adaptive {
            initial: None,
            tolerance: 1e-9,
            max_harmonics: 160,
        }
    }
}

impl Truncation {
    fn validate(&self, nf: usize) -> Result<()> {
        match *self {
            Truncation::Fixed(m) if m < nf => Err(Error::invalid(
                "truncation",
                alloc::format!("M = {m} is below the pulse's {nf} harmonics"),
            )),
            Truncation::Adaptive {
                initial,
                tolerance,
                max_harmonics,
            } => {
                require_positive("truncation tolerance", tolerance)?;
                let start = initial.unwrap_or(nf + 10);
                if start < nf || max_harmonics < start {
                    return Err(Error::invalid(
                        "truncation",
                        alloc::format!(
                            "need N_f <= initial <= max_harmonics, got {nf}, {start}, {max_harmonics}"
                        ),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Fourier components of a single two-level transition, `C_n` for `n = −N_f..=N_f`.
#[derive(Clone, Debug)]
pub struct BlockComponents {
    max_harmonic: usize,
    /// Row-major 2x2 matrices, index `n + N_f`.
    c: Vec<[C64; 4]>,
}

impl BlockComponents {
    /// Builds the components of one transition directly from the pulse.
    pub fn from_pulse(pulse: &PulseCoefficients, detuning_mhz: f64, alpha: f64) -> Self {
        let nf = pulse.harmonics();
        let mut c = vec![[ZERO; 4]; 2 * nf + 1];
        c[nf] = [
            C64::new(PI * detuning_mhz, 0.0),
            ZERO,
            ZERO,
            C64::new(-PI * detuning_mhz, 0.0),
        ];
        for j in 0..nf {
            let (ax, ay) = (TWO_PI * pulse.ax()[j], TWO_PI * pulse.ay()[j]);
            // (α/2i)(ax σx + ay σy)
            let s = C64::new(0.0, -0.5 * alpha);
            let upper = s * C64::new(ax, -ay);
            let lower = s * C64::new(ax, ay);
            c[nf + j + 1] = [ZERO, upper, lower, ZERO];
            c[nf - j - 1] = [ZERO, -upper, -lower, ZERO];
        }
        Self { max_harmonic: nf, c }
    }

    /// Extracts block components from generic 2x2 Fourier components.
    pub fn from_components(comps: &FourierComponents) -> Result<Self> {
        if comps.dim() != 2 {
            return Err(Error::invalid("components", "block components must be 2x2"));
        }
        let nf = comps.max_harmonic();
        let c = (-(nf as isize)..=nf as isize)
            .map(|n| {
                let m = comps.get(n).expect("harmonic within band");
                [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
            })
            .collect();
        Ok(Self { max_harmonic: nf, c })
    }

    pub fn max_harmonic(&self) -> usize {
        self.max_harmonic
    }

    fn get(&self, n: isize) -> Option<&[C64; 4]> {
        let idx = n + self.max_harmonic as isize;
        if idx < 0 {
            None
        } else {
            self.c.get(idx as usize)
        }
    }
}

#[inline]
fn fidx(m: isize, s: usize, harmonics: usize) -> usize {
    (m + harmonics as isize) as usize * 2 + s
}

/// The `2(2M+1)`-dimensional Floquet matrix of one transition.
pub fn floquet_matrix(block: &BlockComponents, harmonics: usize, fundamental: f64) -> CMatrix {
    let m_max = harmonics as isize;
    let nf = block.max_harmonic as isize;
    let n = 2 * (2 * harmonics + 1);
    let mut f = CMatrix::zeros(n, n);
    for m in -m_max..=m_max {
        for k in (m - nf).max(-m_max)..=(m + nf).min(m_max) {
            let c = block.get(m - k).expect("difference within band");
            for s in 0..2 {
                for sp in 0..2 {
                    f[(fidx(m, s, harmonics), fidx(k, sp, harmonics))] = c[2 * s + sp];
                }
            }
        }
        for s in 0..2 {
            f[(fidx(m, s, harmonics), fidx(m, s, harmonics))] += C64::new(m as f64 * fundamental, 0.0);
        }
    }
    f
}

/// Diagonalised Floquet matrix of one transition at a given truncation.
pub struct BlockSolution {
    harmonics: usize,
    duration_us: f64,
    eig: HermitianEigen,
}

impl BlockSolution {
    pub fn solve(block: &BlockComponents, harmonics: usize, duration_us: f64) -> Result<Self> {
        let fundamental = PI / duration_us;
        let f = floquet_matrix(block, harmonics, fundamental);
        let eig = hermitian_eigen(&f)?;
        Ok(Self {
            harmonics,
            duration_us,
            eig,
        })
    }

    pub fn harmonics(&self) -> usize {
        self.harmonics
    }

    /// `Σ_n (−1)^n V[(n,s), a]` for each eigenvector `a`.
    fn alternating_sum(&self, s: usize) -> Vec<C64> {
        let v = &self.eig.vectors;
        let dim = v.cols();
        let m = self.harmonics as isize;
        let mut out = vec![ZERO; dim];
        for n in -m..=m {
            let row = fidx(n, s, self.harmonics);
            let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            for (a, o) in out.iter_mut().enumerate() {
                *o += v[(row, a)] * sign;
            }
        }
        out
    }

    fn phases(&self) -> Vec<C64> {
        self.eig
            .values
            .iter()
            .map(|&l| C64::from_polar(1.0, -l * self.duration_us))
            .collect()
    }

    /// The 2x2 propagator over `[0, t_p]`.
    pub fn propagator(&self) -> CMatrix {
        let v = &self.eig.vectors;
        let phases = self.phases();
        let mut u = CMatrix::zeros(2, 2);
        let sums = [self.alternating_sum(0), self.alternating_sum(1)];
        for s in 0..2 {
            for sp in 0..2 {
                let col0 = fidx(0, sp, self.harmonics);
                u[(s, sp)] = (0..phases.len())
                    .map(|a| sums[s][a] * phases[a] * v[(col0, a)].conj())
                    .sum();
            }
        }
        u
    }

    /// Transfer amplitude `⟨1|U|0⟩` and its derivative with respect to the
    /// flat pulse parameters `[a_1x … a_Nx, a_1y … a_Ny]`.
    ///
    /// The derivative is exact for the truncated Floquet matrix, using the
    /// divided-difference form of the derivative of `e^{−iFt}`.
    pub fn transfer_amplitude_gradient(&self, alpha: f64, pulse_harmonics: usize) -> (C64, Vec<C64>) {
        let v = &self.eig.vectors;
        let dim = v.cols();
        let t = self.duration_us;
        let lam = &self.eig.values;
        let phases = self.phases();
        let row00 = fidx(0, 0, self.harmonics);
        let p: Vec<C64> = (0..dim).map(|a| v[(row00, a)].conj()).collect();
        let q: Vec<C64> = self.alternating_sum(1).into_iter().map(|z| z.conj()).collect();
        let amp: C64 = (0..dim).map(|a| q[a].conj() * phases[a] * p[a]).sum();

        // X_ab = conj(q_a) Φ_ab p_b, Φ_ab = (e^{−iλ_a t} − e^{−iλ_b t}) / (λ_a − λ_b).
        let mut x = vec![ZERO; dim * dim];
        for a in 0..dim {
            let qa = q[a].conj();
            for b in 0..dim {
                let half = 0.5 * (lam[a] - lam[b]) * t;
                let sinc = if half.abs() < 1e-4 {
                    1.0 - half * half / 6.0
                } else {
                    half.sin() / half
                };
                let mean = 0.5 * (lam[a] + lam[b]);
                let phi = C64::new(0.0, -t) * C64::from_polar(sinc, -mean * t);
                x[a * dim + b] = qa * phi * p[b];
            }
        }
        // W = conj(V) X; then Y_kl = Σ_b W_kb V_lb is only needed near the band diagonal.
        let mut w = vec![ZERO; dim * dim];
        for k in 0..dim {
            let wrow = &mut w[k * dim..(k + 1) * dim];
            for a in 0..dim {
                let vka = v[(k, a)].conj();
                let xrow = &x[a * dim..(a + 1) * dim];
                for (wv, xv) in wrow.iter_mut().zip(xrow) {
                    *wv += vka * xv;
                }
            }
        }
        let vrows = v.as_slice();
        let y = |k: usize, l: usize| -> C64 {
            w[k * dim..(k + 1) * dim]
                .iter()
                .zip(&vrows[l * dim..(l + 1) * dim])
                .map(|(a, b)| a * b)
                .sum()
        };
        let m_max = self.harmonics as isize;
        // S_d[s,s'] = Σ_m Y[(m,s),(m−d,s')]
        let shifted = |d: isize| -> [C64; 4] {
            let mut s_acc = [ZERO; 4];
            for m in (-m_max).max(-m_max + d)..=m_max.min(m_max + d) {
                for s in 0..2 {
                    for sp in 0..2 {
                        if s == sp {
                            continue;
                        }
                        s_acc[2 * s + sp] +=
                            y(fidx(m, s, self.harmonics), fidx(m - d, sp, self.harmonics));
                    }
                }
            }
            s_acc
        };
        let pref = C64::new(0.0, -0.5 * alpha * TWO_PI);
        let i = C64::new(0.0, 1.0);
        let mut grad = vec![ZERO; 2 * pulse_harmonics];
        for j in 1..=pulse_harmonics {
            let sp = shifted(j as isize);
            let sm = shifted(-(j as isize));
            let dx = (sp[1] + sp[2]) - (sm[1] + sm[2]);
            let dy = (-i * sp[1] + i * sp[2]) - (-i * sm[1] + i * sm[2]);
            grad[j - 1] = pref * dx;
            grad[pulse_harmonics + j - 1] = pref * dy;
        }
        (amp, grad)
    }
}

/// 2x2 propagator of one transition at a fixed truncation.
///
/// Only the four eigenvector functionals entering the extraction are formed,
/// which avoids accumulating the full eigenvector matrix.
pub fn block_propagator(block: &BlockComponents, harmonics: usize, duration_us: f64) -> Result<CMatrix> {
    let f = floquet_matrix(block, harmonics, PI / duration_us);
    let dim = f.rows();
    let m = harmonics as isize;
    let mut functionals = vec![vec![ZERO; dim]; 4];
    for n in -m..=m {
        let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        functionals[0][fidx(n, 0, harmonics)] = C64::new(sign, 0.0);
        functionals[1][fidx(n, 1, harmonics)] = C64::new(sign, 0.0);
    }
    functionals[2][fidx(0, 0, harmonics)] = C64::new(1.0, 0.0);
    functionals[3][fidx(0, 1, harmonics)] = C64::new(1.0, 0.0);
    let (values, proj) = hermitian_eigen_projected(&f, &functionals)?;
    let mut u = CMatrix::zeros(2, 2);
    for (a, &lam) in values.iter().enumerate() {
        let phase = C64::from_polar(1.0, -lam * duration_us);
        for s in 0..2 {
            for sp in 0..2 {
                u[(s, sp)] += proj[s][a] * phase * proj[2 + sp][a].conj();
            }
        }
    }
    Ok(u)
}

/// Result of solving one transition, with the truncation that was accepted.
pub struct BlockOutcome {
    pub propagator: CMatrix,
    pub harmonics: usize,
    /// `‖U(M+2) − U(M)‖` at acceptance; zero for fixed truncation.
    pub change: f64,
}

/// Solves one transition under the requested truncation policy.
pub fn solve_block(
    block: &BlockComponents,
    duration_us: f64,
    truncation: Truncation,
) -> Result<BlockOutcome> {
    let nf = block.max_harmonic();
    truncation.validate(nf)?;
    match truncation {
        Truncation::Fixed(m) => Ok(BlockOutcome {
            propagator: block_propagator(block, m, duration_us)?,
            harmonics: m,
            change: 0.0,
        }),
        Truncation::Adaptive {
            initial,
            tolerance,
            max_harmonics,
        } => {
            let mut m = initial.unwrap_or(nf + 10);
            loop {
                let coarse = block_propagator(block, m, duration_us)?;
                let fine = block_propagator(block, m + 2, duration_us)?;
                let change = (fine.clone() - coarse).operator_norm()?;
                if change < tolerance {
                    return Ok(BlockOutcome {
                        propagator: fine,
                        harmonics: m + 2,
                        change,
                    });
                }
                if m >= max_harmonics {
                    return Err(Error::NonConvergence {
                        harmonics: m,
                        change,
                        tolerance,
                    });
                }
                m = (2 * m).min(max_harmonics);
            }
        }
    }
}

/// Full `2K x 2K` propagator over one pulse for one ensemble member.
///
/// The result is projected onto the nearest unitary so that truncation
/// round-off does not leak into downstream fidelities.
pub fn floquet_propagator(
    pulse: &PulseCoefficients,
    member: &EnsembleMember,
    config: &HyperfineConfig,
    truncation: Truncation,
) -> Result<Propagator> {
    let comps = hamiltonian_fourier_components(pulse, member, config);
    let mut blocks = Vec::with_capacity(config.levels());
    for k in 0..config.levels() {
        let block = BlockComponents::from_components(&comps.block(k))?;
        let outcome = solve_block(&block, pulse.duration_us(), truncation)?;
        blocks.push(outcome.propagator.polar_unitary()?);
    }
    Ok(Propagator::new(CMatrix::block_diagonal(&blocks), pulse.duration_us()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm_hermitian_2x2;

    fn pulse() -> PulseCoefficients {
        PulseCoefficients::new(
            vec![1.2, -0.4, 0.8, 0.1],
            vec![0.3, 0.9, -0.6, 0.2],
            1.85,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn direct_block_components_match_generic_assembly() {
        let p = pulse();
        let cfg = HyperfineConfig::nitrogen14();
        let member = EnsembleMember::new(0.4, 0.95, 1.0).unwrap();
        let comps = hamiltonian_fourier_components(&p, &member, &cfg);
        for (k, det) in cfg.transition_detunings(0.4).enumerate() {
            let a = BlockComponents::from_components(&comps.block(k)).unwrap();
            let b = BlockComponents::from_pulse(&p, det, 0.95);
            for (x, y) in a.c.iter().zip(&b.c) {
                for i in 0..4 {
                    assert!((x[i] - y[i]).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn projected_propagator_matches_full_extraction() {
        let block = BlockComponents::from_pulse(&pulse(), -0.8, 1.03);
        let full = BlockSolution::solve(&block, 25, 1.85).unwrap().propagator();
        let fast = block_propagator(&block, 25, 1.85).unwrap();
        assert!(full.max_abs_diff(&fast) < 1e-12);
    }

    #[test]
    fn floquet_matrix_is_hermitian() {
        let block = BlockComponents::from_pulse(&pulse(), 0.3, 1.1);
        let f = floquet_matrix(&block, 12, PI / 1.85);
        assert!(f.is_hermitian(1e-15));
        assert_eq!(f.rows(), 50);
    }

    #[test]
    fn zero_pulse_gives_free_precession() {
        let p = PulseCoefficients::zeros(3, 1.85).unwrap();
        let det = 0.37;
        let block = BlockComponents::from_pulse(&p, det, 1.0);
        let sol = BlockSolution::solve(&block, 3, 1.85).unwrap();
        let h = CMatrix::from_row_major(
            2,
            2,
            vec![C64::new(PI * det, 0.0), ZERO, ZERO, C64::new(-PI * det, 0.0)],
        );
        let expected = expm_hermitian_2x2(&h, 1.85);
        assert!(sol.propagator().max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn fixed_truncation_below_pulse_band_is_rejected() {
        let r = floquet_propagator(
            &pulse(),
            &EnsembleMember::nominal(),
            &HyperfineConfig::single(),
            Truncation::Fixed(2),
        );
        assert!(matches!(r, Err(Error::InvalidInput { field: "truncation", .. })));
    }

    #[test]
    fn adaptive_result_is_unitary() {
        let u = floquet_propagator(
            &pulse(),
            &EnsembleMember::new(0.2, 1.0, 1.0).unwrap(),
            &HyperfineConfig::nitrogen14(),
            Truncation::default(),
        )
        .unwrap();
        assert!(u.matrix().unitarity_defect().unwrap() < 1e-10);
    }

    #[test]
    fn capped_adaptive_truncation_reports_non_convergence() {
        let strong = pulse().scaled(6.0);
        let r = solve_block(
            &BlockComponents::from_pulse(&strong, 0.0, 1.0),
            1.85,
            Truncation::Adaptive {
                initial: Some(4),
                tolerance: 1e-12,
                max_harmonics: 8,
            },
        );
        assert!(matches!(r, Err(Error::NonConvergence { harmonics: 8, .. })));
    }

    #[test]
    fn analytic_gradient_matches_finite_difference_of_truncated_model() {
        let p = pulse();
        let (det, alpha, m) = (0.45, 1.07, 30);
        let sol = BlockSolution::solve(&BlockComponents::from_pulse(&p, det, alpha), m, 1.85).unwrap();
        let (amp, grad) = sol.transfer_amplitude_gradient(alpha, p.harmonics());
        assert!((amp - sol.propagator()[(1, 0)]).norm() < 1e-12);
        let base = p.params();
        let h = 1e-6;
        for idx in 0..base.len() {
            let mut plus = base.clone();
            plus[idx] += h;
            let mut minus = base.clone();
            minus[idx] -= h;
            let eval = |params: &[f64]| {
                let q = PulseCoefficients::from_params(params, 1.85, 0.0).unwrap();
                BlockSolution::solve(&BlockComponents::from_pulse(&q, det, alpha), m, 1.85)
                    .unwrap()
                    .propagator()[(1, 0)]
            };
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            assert!((fd - grad[idx]).norm() < 1e-7, "param {idx}: fd {fd} analytic {}", grad[idx]);
        }
    }
}
