//! Weighted (Δ, α) grids standing in for an inhomogeneous defect population.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{require_positive, Error, Result};
use crate::hamiltonian::EnsembleMember;

#[derive(Clone, Debug, PartialEq)]
pub struct RepresentativeEnsemble {
    members: Vec<EnsembleMember>,
    detuning_points: usize,
    amplitude_points: usize,
    detuning_half_width_mhz: f64,
    amplitude_spread: f64,
}

impl RepresentativeEnsemble {
    /// An arbitrary member list; weights are renormalised to sum to one.
    pub fn from_members(mut members: Vec<EnsembleMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("ensemble", "needs at least one member"));
        }
        if members.iter().any(|m| !(m.weight >= 0.0) || !m.weight.is_finite()) {
            return Err(Error::invalid("weight", "member weights must be finite and >= 0"));
        }
        let total: f64 = members.iter().map(|m| m.weight).sum();
        require_positive("weight", total)?;
        for m in members.iter_mut() {
            m.weight /= total;
        }
        let n = members.len();
        Ok(Self {
            members,
            detuning_points: n,
            amplitude_points: 1,
            detuning_half_width_mhz: 0.0,
            amplitude_spread: 0.0,
        })
    }

    pub fn single(member: EnsembleMember) -> Self {
        Self::from_members(alloc::vec![EnsembleMember { weight: 1.0, ..member }])
            .expect("one member with unit weight")
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `(n_Δ, n_α)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.detuning_points, self.amplitude_points)
    }

    pub fn detuning_half_width_mhz(&self) -> f64 {
        self.detuning_half_width_mhz
    }

    pub fn amplitude_spread(&self) -> f64 {
        self.amplitude_spread
    }
}

/// Relative weight of detuning `Δ` for a zero-centred Gaussian with full width
/// at half maximum `fwhm`, normalised to 1 at the centre.
pub fn gaussian_weight(detuning_mhz: f64, fwhm_mhz: f64) -> f64 {
    let x = detuning_mhz / fwhm_mhz;
    (-4.0 * core::f64::consts::LN_2 * x * x).exp()
}

/// Uniform `n_Δ × n_α` grid over `[−Δ̂, Δ̂] × [1 − s, 1 + s]`, endpoints included.
///
/// Detuning weights follow a Gaussian whose FWHM equals `Δ̂` (half the grid
/// span); amplitude weights are flat. Members are ordered detuning-major.
pub fn sample_representative_ensemble(
    detuning_half_width_mhz: f64,
    amplitude_spread: f64,
    detuning_points: usize,
    amplitude_points: usize,
) -> Result<RepresentativeEnsemble> {
    require_positive("detuning range", detuning_half_width_mhz)?;
    require_positive("amplitude range", amplitude_spread)?;
    if amplitude_spread >= 1.0 {
        return Err(Error::invalid("amplitude range", "spread must be below 1 so alpha stays positive"));
    }
    if detuning_points < 2 || amplitude_points < 2 {
        return Err(Error::invalid("grid", "need at least 2 points per axis"));
    }
    let grid = |lo: f64, hi: f64, n: usize, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let mut members = Vec::with_capacity(detuning_points * amplitude_points);
    let mut total = 0.0;
    for i in 0..detuning_points {
        let det = grid(-detuning_half_width_mhz, detuning_half_width_mhz, detuning_points, i);
        let w = gaussian_weight(det, detuning_half_width_mhz);
        for j in 0..amplitude_points {
            let alpha = grid(1.0 - amplitude_spread, 1.0 + amplitude_spread, amplitude_points, j);
            members.push(EnsembleMember {
                detuning_mhz: det,
                alpha,
                weight: w,
            });
            total += w;
        }
    }
    for m in members.iter_mut() {
        m.weight /= total;
    }
    Ok(RepresentativeEnsemble {
        members,
        detuning_points,
        amplitude_points,
        detuning_half_width_mhz,
        amplitude_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_normalised_symmetric_and_peaked_at_centre() {
        let e = sample_representative_ensemble(1.0, 0.1, 12, 12).unwrap();
        let total: f64 = e.members().iter().map(|m| m.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let dets: Vec<f64> = e.members().iter().step_by(12).map(|m| m.detuning_mhz).collect();
        let ws: Vec<f64> = e.members().iter().step_by(12).map(|m| m.weight).collect();
        for i in 0..12 {
            assert!((dets[i] + dets[11 - i]).abs() < 1e-15);
            assert!((ws[i] - ws[11 - i]).abs() < 1e-15);
        }
        let imax = (0..12).max_by(|&a, &b| ws[a].total_cmp(&ws[b])).unwrap();
        assert!(dets[imax].abs() <= dets.iter().map(|d| d.abs()).fold(f64::MAX, f64::min) + 1e-15);
        // weights independent of alpha at fixed detuning
        for m in e.members().chunks(12) {
            assert!(m.iter().all(|x| x.weight == m[0].weight));
        }
    }

    #[test]
    fn edge_to_centre_weight_ratio_is_one_sixteenth() {
        let e = sample_representative_ensemble(1.0, 0.1, 5, 2).unwrap();
        let centre = e.members()[4].weight;
        let edge = e.members()[0].weight;
        assert_eq!(e.members()[4].detuning_mhz, 0.0);
        assert!((edge / centre - 1.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(sample_representative_ensemble(0.0, 0.1, 12, 12).is_err());
        assert!(sample_representative_ensemble(1.0, -0.1, 12, 12).is_err());
        assert!(sample_representative_ensemble(1.0, 0.1, 1, 12).is_err());
        assert!(matches!(
            sample_representative_ensemble(-1.0, 0.1, 12, 12),
            Err(Error::InvalidInput { field: "detuning range", .. })
        ));
    }

    #[test]
    fn from_members_normalises() {
        let e = RepresentativeEnsemble::from_members(alloc::vec![
            EnsembleMember { detuning_mhz: 0.0, alpha: 1.0, weight: 3.0 },
            EnsembleMember { detuning_mhz: 1.0, alpha: 1.0, weight: 1.0 },
        ])
        .unwrap();
        assert_eq!(e.members()[0].weight, 0.75);
    }
}
