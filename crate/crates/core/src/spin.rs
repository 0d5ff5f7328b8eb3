//! Hyperfine structure and embedded spin operators.
//!
//! A defect with `K` hyperfine-resolved transitions is modelled as `K`
//! independent two-level systems stacked into a `2K`-dimensional space. Block
//! `k` spans basis states `2k` (`|0⟩_k`) and `2k+1` (`|−1⟩_k`).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, I, ONE, ZERO};

/// Hyperfine manifold driven by a single microwave tone.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperfineConfig {
    levels: usize,
    splitting_mhz: f64,
}

impl HyperfineConfig {
    /// `levels` transitions spaced by `splitting_mhz`. `levels` must be 1, 2 or 3.
    ///
    /// A zero splitting with several levels is accepted and yields identical blocks.
    pub fn new(levels: usize, splitting_mhz: f64) -> Result<Self> {
        if !(1..=3).contains(&levels) {
            return Err(Error::invalid(
                "levels",
                alloc::format!("hyperfine level count must be 1, 2 or 3, got {levels}"),
            ));
        }
        if !(splitting_mhz.is_finite() && splitting_mhz >= 0.0) {
            return Err(Error::invalid(
                "splitting",
                alloc::format!("hyperfine splitting must be finite and >= 0, got {splitting_mhz}"),
            ));
        }
        Ok(Self {
            levels,
            splitting_mhz,
        })
    }

    /// Three transitions split by 2.16 MHz (the nitrogen-14 vacancy).
    pub fn nitrogen14() -> Self {
        Self {
            levels: 3,
            splitting_mhz: 2.16,
        }
    }

    /// A lone two-level transition.
    pub fn single() -> Self {
        Self {
            levels: 1,
            splitting_mhz: 0.0,
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn splitting_mhz(&self) -> f64 {
        self.splitting_mhz
    }

    pub fn dim(&self) -> usize {
        2 * self.levels
    }

    /// Offset multipliers `w_k`, symmetric about zero: `{0}`, `{−½, ½}` or `{−1, 0, 1}`.
    pub fn weights(&self) -> &'static [f64] {
        match self.levels {
            1 => &[0.0],
            2 => &[-0.5, 0.5],
            _ => &[-1.0, 0.0, 1.0],
        }
    }

    /// Detuning of each transition in MHz when the ensemble member sits at `detuning_mhz`.
    pub fn transition_detunings(&self, detuning_mhz: f64) -> impl Iterator<Item = f64> + '_ {
        self.weights()
            .iter()
            .map(move |w| detuning_mhz + w * self.splitting_mhz)
    }
}

/// Pauli operators embedded on each hyperfine block.
#[derive(Clone, Debug)]
pub struct SpinMatrixSet {
    pub x: Vec<CMatrix>,
    pub y: Vec<CMatrix>,
    pub z: Vec<CMatrix>,
}

impl SpinMatrixSet {
    pub fn levels(&self) -> usize {
        self.x.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.levels()
    }
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_major(2, 2, vec![ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_major(2, 2, vec![ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_major(2, 2, vec![ONE, ZERO, ZERO, -ONE])
}

fn embed(block: &CMatrix, k: usize, levels: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2 * levels, 2 * levels);
    for r in 0..2 {
        for c in 0..2 {
            m[(2 * k + r, 2 * k + c)] = block[(r, c)];
        }
    }
    m
}

pub fn build_spin_matrices(config: &HyperfineConfig) -> SpinMatrixSet {
    let k = config.levels();
    let (px, py, pz) = (pauli_x(), pauli_y(), pauli_z());
    SpinMatrixSet {
        x: (0..k).map(|i| embed(&px, i, k)).collect(),
        y: (0..k).map(|i| embed(&py, i, k)).collect(),
        z: (0..k).map(|i| embed(&pz, i, k)).collect(),
    }
}

/// Basis vector `|0⟩_k` (first state of block `k`) in the `2K`-dimensional space.
pub fn ground_state(config: &HyperfineConfig, k: usize) -> Vec<C64> {
    basis(config.dim(), 2 * k)
}

/// Basis vector `|−1⟩_k` (second state of block `k`).
pub fn target_state(config: &HyperfineConfig, k: usize) -> Vec<C64> {
    basis(config.dim(), 2 * k + 1)
}

fn basis(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[index] = ONE;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsupported_level_counts() {
        assert!(matches!(
            HyperfineConfig::new(4, 2.16),
            Err(Error::InvalidInput { field: "levels", .. })
        ));
        assert!(HyperfineConfig::new(0, 2.16).is_err());
        assert!(matches!(
            HyperfineConfig::new(3, -1.0),
            Err(Error::InvalidInput { field: "splitting", .. })
        ));
        assert!(HyperfineConfig::new(3, f64::NAN).is_err());
    }

    #[test]
    fn three_level_set_has_six_dimensional_pauli_algebra() {
        let set = build_spin_matrices(&HyperfineConfig::nitrogen14());
        assert_eq!(set.dim(), 6);
        for k in 0..3 {
            // [σx, σy] = 2iσz on each block
            let c = CMatrix::commutator(&set.x[k], &set.y[k]);
            assert!(c.max_abs_diff(&set.z[k].scale(C64::new(0.0, 2.0))) < 1e-15);
            // σx² = identity on the block
            let sq = set.x[k].matmul(&set.x[k]);
            assert!((sq[(2 * k, 2 * k)] - ONE).norm() < 1e-15);
            assert!((sq[(2 * k + 1, 2 * k + 1)] - ONE).norm() < 1e-15);
        }
        // different blocks commute
        let c = CMatrix::commutator(&set.x[0], &set.y[2]);
        assert!(c.frobenius_norm() < 1e-15);
    }

    #[test]
    fn first_z_matrix_acts_on_first_pair_only() {
        let set = build_spin_matrices(&HyperfineConfig::nitrogen14());
        let z = &set.z[0];
        for r in 0..6 {
            for c in 0..6 {
                let expected = match (r, c) {
                    (0, 0) => 1.0,
                    (1, 1) => -1.0,
                    _ => 0.0,
                };
                assert_eq!(z[(r, c)], C64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn single_transition_uses_plain_pauli_matrices() {
        let set = build_spin_matrices(&HyperfineConfig::single());
        assert_eq!(set.x[0], pauli_x());
        assert_eq!(set.y[0], pauli_y());
        assert_eq!(set.z[0], pauli_z());
    }

    #[test]
    fn z_and_x_commutators() {
        let set = build_spin_matrices(&HyperfineConfig::nitrogen14());
        let c = CMatrix::commutator(&set.z[1], &set.x[1]);
        assert!(c.max_abs_diff(&set.y[1].scale(C64::new(0.0, 2.0))) < 1e-15);
        assert!(CMatrix::commutator(&set.z[0], &set.x[2]).frobenius_norm() < 1e-15);
    }

    #[test]
    fn weights_are_symmetric() {
        for k in 1..=3 {
            let cfg = HyperfineConfig::new(k, 2.0).unwrap();
            let s: f64 = cfg.weights().iter().sum();
            assert_eq!(s, 0.0);
            assert_eq!(cfg.weights().len(), k);
        }
        let det: Vec<f64> = HyperfineConfig::nitrogen14().transition_detunings(0.5).collect();
        assert_eq!(det, vec![0.5 - 2.16, 0.5, 0.5 + 2.16]);
    }
}
