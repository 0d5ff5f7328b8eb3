//! Fourth-order Magnus integrator for a single driven transition.
//!
//! A 2x2 traceless Hamiltonian is written `H = b·σ/2` with
//! `b = (αI, αQ, 2πΔ)`. Each step uses the two Gauss–Legendre nodes and the
//! exponent `−i v·σ`, `v = (h/4)(b₁ + b₂) + (√3 h²/24)(b₂ × b₁)`, whose
//! exponential is `cos|v| − i sin|v| v̂·σ`. The transfer probability gradient
//! is propagated backwards through the same steps, so it is exact for the
//! discretised dynamics.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::engine::TransferEngine;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};
use crate::pulse::PulseCoefficients;
use crate::TWO_PI;

type Vec3 = [f64; 3];

#[inline]
fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `exp(−i v·σ)` as `[[e00, e01], [e10, e11]]`.
#[derive(Clone, Copy)]
struct Su2 {
    m: [C64; 4],
}

impl Su2 {
    fn from_vector(v: &Vec3) -> Self {
        let theta = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let c = theta.cos();
        let s_over = if theta < 1e-8 { 1.0 - theta * theta / 6.0 } else { theta.sin() / theta };
        let (x, y, z) = (v[0] * s_over, v[1] * s_over, v[2] * s_over);
        // cos θ − i (x σx + y σy + z σz)
        Su2 {
            m: [
                C64::new(c, -z),
                C64::new(-y, -x),
                C64::new(y, -x),
                C64::new(c, z),
            ],
        }
    }

    #[inline]
    fn apply(&self, psi: [C64; 2]) -> [C64; 2] {
        [
            self.m[0] * psi[0] + self.m[1] * psi[1],
            self.m[2] * psi[0] + self.m[3] * psi[1],
        ]
    }

    /// Row vector times matrix.
    #[inline]
    fn apply_left(&self, lam: [C64; 2]) -> [C64; 2] {
        [
            lam[0] * self.m[0] + lam[1] * self.m[2],
            lam[0] * self.m[1] + lam[1] * self.m[3],
        ]
    }
}

/// Magnus integrator settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagnusEngine {
    /// Number of steps across `[0, t_p]`.
    pub steps: usize,
}

impl Default for MagnusEngine {
    fn default() -> Self {
        Self { steps: 1000 }
    }
}

/// Envelope and basis values at the quadrature nodes of one pulse.
#[derive(Clone, Debug)]
pub struct MagnusPrepared {
    harmonics: usize,
    step: f64,
    /// `I` and `Q` at node `2n` and `2n+1` of step `n`, rad/µs.
    envelope: Vec<(f64, f64)>,
    /// `2 sin(jΩ t_node)`, row per node, column per harmonic.
    basis: Vec<f64>,
}

impl MagnusEngine {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("steps", "Magnus step count must be positive"));
        }
        Ok(Self { steps })
    }

    fn drive_vector(env: (f64, f64), detuning_mhz: f64, alpha: f64) -> Vec3 {
        [alpha * env.0, alpha * env.1, TWO_PI * detuning_mhz]
    }

    fn step_vector(&self, prep: &MagnusPrepared, n: usize, detuning_mhz: f64, alpha: f64) -> (Vec3, Vec3, Vec3) {
        let h = prep.step;
        let b1 = Self::drive_vector(prep.envelope[2 * n], detuning_mhz, alpha);
        let b2 = Self::drive_vector(prep.envelope[2 * n + 1], detuning_mhz, alpha);
        let kappa = 3f64.sqrt() * h * h / 24.0;
        let c = cross(&b2, &b1);
        let v = [
            0.25 * h * (b1[0] + b2[0]) + kappa * c[0],
            0.25 * h * (b1[1] + b2[1]) + kappa * c[1],
            0.25 * h * (b1[2] + b2[2]) + kappa * c[2],
        ];
        (v, b1, b2)
    }

    /// 2x2 propagator of one transition.
    pub fn block_propagator(&self, prep: &MagnusPrepared, detuning_mhz: f64, alpha: f64) -> CMatrix {
        let mut cols = [[C64::new(1.0, 0.0), ZERO], [ZERO, C64::new(1.0, 0.0)]];
        for n in 0..self.steps {
            let (v, _, _) = self.step_vector(prep, n, detuning_mhz, alpha);
            let e = Su2::from_vector(&v);
            for col in cols.iter_mut() {
                *col = e.apply(*col);
            }
        }
        CMatrix::from_row_major(2, 2, vec![cols[0][0], cols[1][0], cols[0][1], cols[1][1]])
    }
}

impl TransferEngine for MagnusEngine {
    type Prepared = MagnusPrepared;

    fn prepare(&self, pulse: &PulseCoefficients) -> Result<MagnusPrepared> {
        if self.steps == 0 {
            return Err(Error::invalid("steps", "Magnus step count must be positive"));
        }
        let nf = pulse.harmonics();
        let h = pulse.duration_us() / self.steps as f64;
        let w = pulse.fundamental();
        let offs = [0.5 - 3f64.sqrt() / 6.0, 0.5 + 3f64.sqrt() / 6.0];
        let mut envelope = Vec::with_capacity(2 * self.steps);
        let mut basis = Vec::with_capacity(2 * self.steps * nf);
        for n in 0..self.steps {
            for off in offs {
                let t = (n as f64 + off) * h;
                let (mut i, mut q) = (0.0, 0.0);
                for j in 0..nf {
                    let s = 2.0 * TWO_PI * ((j + 1) as f64 * w * t).sin();
                    basis.push(s);
                    i += pulse.ax()[j] * s;
                    q += pulse.ay()[j] * s;
                }
                envelope.push((i, q));
            }
        }
        Ok(MagnusPrepared {
            harmonics: nf,
            step: h,
            envelope,
            basis,
        })
    }

    fn transfer(&self, prep: &MagnusPrepared, detuning_mhz: f64, alpha: f64) -> Result<f64> {
        let mut psi = [C64::new(1.0, 0.0), ZERO];
        for n in 0..self.steps {
            let (v, _, _) = self.step_vector(prep, n, detuning_mhz, alpha);
            psi = Su2::from_vector(&v).apply(psi);
        }
        Ok(psi[1].norm_sqr())
    }

    fn transfer_with_gradient(
        &self,
        prep: &MagnusPrepared,
        detuning_mhz: f64,
        alpha: f64,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        let nf = prep.harmonics;
        if grad.len() != 2 * nf {
            return Err(Error::invalid("gradient", "buffer length must be 2 N_f"));
        }
        let steps = self.steps;
        let mut states = Vec::with_capacity(steps + 1);
        let mut props = Vec::with_capacity(steps);
        let mut vecs = Vec::with_capacity(steps);
        let mut psi = [C64::new(1.0, 0.0), ZERO];
        states.push(psi);
        for n in 0..steps {
            let (v, b1, b2) = self.step_vector(prep, n, detuning_mhz, alpha);
            let e = Su2::from_vector(&v);
            psi = e.apply(psi);
            states.push(psi);
            props.push(e);
            vecs.push((v, b1, b2));
        }
        let amp = psi[1];
        let fidelity = amp.norm_sqr();
        let amp_c = amp.conj();
        let h = prep.step;
        let kappa = 3f64.sqrt() * h * h / 24.0;
        let mut lam = [ZERO, C64::new(1.0, 0.0)];
        for n in (0..steps).rev() {
            let (v, b1, b2) = vecs[n];
            let psi = states[n];
            // ⟨λ| 1 |ψ⟩ and ⟨λ| σ_j |ψ⟩
            let s0 = lam[0] * psi[0] + lam[1] * psi[1];
            let sx = lam[0] * psi[1] + lam[1] * psi[0];
            let sy = C64::new(0.0, -1.0) * lam[0] * psi[1] + C64::new(0.0, 1.0) * lam[1] * psi[0];
            let sz = lam[0] * psi[0] - lam[1] * psi[1];
            let s = [sx, sy, sz];
            let theta = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let (sin_t, cos_t) = theta.sin_cos();
            let sinc = if theta < 1e-8 { 1.0 - theta * theta / 6.0 } else { sin_t / theta };
            let g: Vec3 = if theta < 1e-12 {
                // dE/dv_i = −iσ_i at the origin
                core::array::from_fn(|i| 2.0 * (amp_c * C64::new(0.0, -1.0) * s[i]).re)
            } else {
                let u = [v[0] / theta, v[1] / theta, v[2] / theta];
                let us = s[0] * u[0] + s[1] * u[1] + s[2] * u[2];
                core::array::from_fn(|i| {
                    let d = -s0 * (sin_t * u[i])
                        - C64::new(0.0, 1.0) * (us * (cos_t * u[i]) + (s[i] - us * u[i]) * sinc);
                    2.0 * (amp_c * d).re
                })
            };
            let gb2 = cross(&b1, &g);
            let gb1 = cross(&g, &b2);
            let node_grad = [
                [0.25 * h * g[0] + kappa * gb1[0], 0.25 * h * g[1] + kappa * gb1[1]],
                [0.25 * h * g[0] + kappa * gb2[0], 0.25 * h * g[1] + kappa * gb2[1]],
            ];
            for (node, ng) in node_grad.iter().enumerate() {
                let row = &prep.basis[(2 * n + node) * nf..(2 * n + node + 1) * nf];
                let (gx, gy) = (weight * alpha * ng[0], weight * alpha * ng[1]);
                let (gax, gay) = grad.split_at_mut(nf);
                for j in 0..nf {
                    gax[j] += gx * row[j];
                    gay[j] += gy * row[j];
                }
            }
            lam = props[n].apply_left(lam);
        }
        Ok(fidelity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{solve_block, BlockComponents, Truncation};

    fn pulse() -> PulseCoefficients {
        PulseCoefficients::new(
            vec![1.4, -0.6, 0.9, 0.2, -0.3],
            vec![0.5, 1.1, -0.7, 0.4, 0.1],
            1.85,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn propagator_agrees_with_converged_floquet() {
        let p = pulse();
        let engine = MagnusEngine::default();
        let prep = engine.prepare(&p).unwrap();
        for (det, alpha) in [(0.0, 1.0), (1.3, 0.9), (-2.9, 1.1)] {
            let u_m = engine.block_propagator(&prep, det, alpha);
            let block = BlockComponents::from_pulse(&p, det, alpha);
            let u_f = solve_block(&block, 1.85, Truncation::default()).unwrap().propagator;
            assert!(u_m.max_abs_diff(&u_f) < 1e-7, "det {det}: {}", u_m.max_abs_diff(&u_f));
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = pulse();
        let engine = MagnusEngine::new(200).unwrap();
        let (det, alpha, weight) = (0.7, 1.05, 0.3);
        let prep = engine.prepare(&p).unwrap();
        let mut grad = vec![0.0; 2 * p.harmonics()];
        let f = engine
            .transfer_with_gradient(&prep, det, alpha, weight, &mut grad)
            .unwrap();
        assert!((f - engine.transfer(&prep, det, alpha).unwrap()).abs() < 1e-14);
        let base = p.params();
        let h = 1e-6;
        for idx in 0..base.len() {
            let eval = |delta: f64| {
                let mut q = base.clone();
                q[idx] += delta;
                let q = PulseCoefficients::from_params(&q, 1.85, 0.0).unwrap();
                engine.transfer(&engine.prepare(&q).unwrap(), det, alpha).unwrap()
            };
            let fd = weight * (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - grad[idx]).abs() < 1e-8, "param {idx}: fd {fd} analytic {}", grad[idx]);
        }
    }

    #[test]
    fn rejects_zero_steps() {
        assert!(MagnusEngine::new(0).is_err());
    }
}
