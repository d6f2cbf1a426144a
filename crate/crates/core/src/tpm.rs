//! Two-point-measurement work statistics and the Leggett-Garg-type
//! covariance inequality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::ChargingProcess;
use crate::operator::{CMatrix, SpectralDecomposition};
use crate::quasi::{default_merge_tol, Atom, WorkQuasiDistribution};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TpmDistribution {
    #[serde(skip)]
    pub distribution: WorkQuasiDistribution,
    /// Initial level energies and populations `p_i`.
    pub initial: Vec<(f64, f64)>,
    /// Final level energies.
    pub final_levels: Vec<f64>,
    /// `p_{k|i}`, one row per initial level.
    pub transitions: Vec<Vec<f64>>,
}

impl TpmDistribution {
    pub fn variance(&self) -> f64 {
        self.distribution.variance()
    }
}

/// `p(w) = sum_{i,k} p_i p_{k|i} delta(w - E^t_k + E^0_i)` for an initial
/// density matrix without coherence between levels of `H0`.
pub fn tpm_distribution(
    rho0: &CMatrix,
    h0: &SpectralDecomposition,
    u: &CMatrix,
    ht: &SpectralDecomposition,
) -> Result<TpmDistribution> {
    let d = h0.dim();
    for actual in [rho0.nrows(), rho0.ncols(), u.nrows(), u.ncols(), ht.dim()] {
        if actual != d {
            return Err(Error::DimensionMismatch { expected: d, actual });
        }
    }
    let v0 = h0.eigenvectors();
    let r = v0.adjoint() * rho0 * v0;
    let levels0 = h0.levels(h0.default_level_tol());
    let mut coherence = 0.0f64;
    for a in &levels0 {
        for b in &levels0 {
            if a.start == b.start {
                continue;
            }
            for i in a.indices() {
                for j in b.indices() {
                    coherence = coherence.max(r[(i, j)].norm());
                }
            }
        }
    }
    if coherence > 1e-12 {
        return Err(Error::NotDiagonal { coherence });
    }
    let w = ht.eigenvectors().adjoint() * u * v0;
    let levels_t = ht.levels(ht.default_level_tol());
    let mut initial = Vec::new();
    let mut transitions = Vec::new();
    let mut atoms = Vec::new();
    for a in &levels0 {
        let p_i: f64 = a.indices().map(|i| r[(i, i)].re).sum();
        initial.push((a.energy, p_i));
        let mut row = Vec::with_capacity(levels_t.len());
        for lk in &levels_t {
            let mut mass = 0.0;
            for k in lk.indices() {
                for x in a.indices() {
                    for y in a.indices() {
                        mass += (w[(k, x)] * r[(x, y)] * w[(k, y)].conj()).re;
                    }
                }
            }
            if mass < -1e-12 {
                return Err(Error::Invariant(format!("negative TPM weight {mass}")));
            }
            let mass = mass.max(0.0);
            row.push(if p_i > 0.0 { mass / p_i } else { 0.0 });
            if mass > 0.0 {
                atoms.push(Atom::new(lk.energy - a.energy, mass));
            }
        }
        transitions.push(row);
    }
    let scale = h0.max_eigenvalue().abs().max(ht.max_eigenvalue().abs());
    let distribution = WorkQuasiDistribution::new(atoms, default_merge_tol(scale))?;
    let total = distribution.total_weight();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Normalization { sum: total });
    }
    Ok(TpmDistribution {
        distribution,
        initial,
        final_levels: levels_t.iter().map(|l| l.energy).collect(),
        transitions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LgReport {
    pub sigma2_tau: f64,
    pub sigma2_t1: f64,
    pub sigma2: f64,
    /// `|sigma2_tau + sigma2_t1 - sigma2|`.
    pub lhs: f64,
    /// `2 sigma2_tau sigma2_t1`.
    pub rhs: f64,
    pub violated: bool,
    /// Present when the two sides are nonzero: they carry energy^2 and
    /// energy^4, so the verdict depends on the energy unit.
    pub note: Option<String>,
}

/// `|s_tau + s_t1 - s| <= 2 s_tau s_t1`, as stated for the variances.
pub fn lg_check(sigma2_tau: f64, sigma2_t1: f64, sigma2: f64) -> Result<LgReport> {
    for (name, v) in [("sigma2_tau", sigma2_tau), ("sigma2_t1", sigma2_t1), ("sigma2", sigma2)] {
        if !(v >= 0.0) {
            return Err(Error::param("variance", format!("{name} = {v} is negative")));
        }
    }
    let lhs = (sigma2_tau + sigma2_t1 - sigma2).abs();
    let rhs = 2.0 * sigma2_tau * sigma2_t1;
    let note = (lhs > 1e-12 || rhs > 1e-12).then(|| {
        "lhs is quadratic and rhs quartic in energy; the comparison depends on the energy unit"
            .to_string()
    });
    Ok(LgReport {
        sigma2_tau,
        sigma2_t1,
        sigma2,
        lhs,
        rhs,
        violated: lhs > rhs + 1e-12,
        note,
    })
}

/// Variances for the charging process: TPM work on `[0, tau]` and `[0, t1]`
/// starting from the ground state, and the `p_q` work on `[t1, tau]`.
pub fn lg_for_process(process: &ChargingProcess, q: f64) -> Result<LgReport> {
    let ground = process.ground_state().amplitudes();
    let rho0 = ground * ground.adjoint();
    let spec0 = process.h0_spectral();
    let spec1 = process.h1_spectral();
    let full = tpm_distribution(&rho0, spec0, &spec1.unitary(process.tau()), spec0)?;
    let ht1 = if process.t1() > 0.0 { spec1 } else { spec0 };
    let first = tpm_distribution(&rho0, spec0, &spec1.unitary(process.t1()), ht1)?;
    let sigma2 = process.pq(q)?.variance();
    lg_check(clean(full.variance()), clean(first.variance()), clean(sigma2))
}

/// Clamps roundoff-level negative variances to zero.
fn clean(v: f64) -> f64 {
    if v < 0.0 && v > -1e-12 {
        0.0
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BatteryModel, TwoLevelCollective};
    use crate::operator::{CVector, diagonalize, pauli};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn two_level() -> ChargingProcess {
        let m = BatteryModel::TwoLevel(TwoLevelCollective::new(2, 1.0, 1.0).unwrap());
        ChargingProcess::from_model(&m, None).unwrap()
    }

    #[test]
    fn identity_evolution_gives_zero_work() {
        let z = diagonalize(&pauli::z());
        let rho = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::new(0.3, 0.0),
            Complex64::new(0.7, 0.0),
        ]));
        let t = tpm_distribution(&rho, &z, &CMatrix::identity(2, 2), &z).unwrap();
        assert_eq!(t.distribution.len(), 1);
        assert_abs_diff_eq!(t.distribution.atoms()[0].w, 0.0);
    }

    #[test]
    fn coherent_start_rejected() {
        let z = diagonalize(&pauli::z());
        let h = Complex64::new(0.5, 0.0);
        let rho = CMatrix::from_element(2, 2, h);
        assert!(matches!(
            tpm_distribution(&rho, &z, &CMatrix::identity(2, 2), &z),
            Err(Error::NotDiagonal { .. })
        ));
    }

    #[test]
    fn two_level_full_and_half_charge() {
        let p = two_level();
        let g = p.ground_state().amplitudes();
        let rho = g * g.adjoint();
        let s0 = p.h0_spectral();
        let s1 = p.h1_spectral();
        let full = tpm_distribution(&rho, s0, &s1.unitary(p.tau()), s0).unwrap();
        assert_eq!(full.distribution.len(), 1);
        assert_abs_diff_eq!(full.distribution.atoms()[0].w, 2.0, epsilon = 1e-9);
        let half = tpm_distribution(&rho, s0, &s1.unitary(p.tau() / 2.0), s0).unwrap();
        assert_abs_diff_eq!(half.distribution.weight_near(0.0, 1e-9), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(half.distribution.weight_near(2.0, 1e-9), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn lg_examples() {
        let r = lg_check(0.0, 1.3, 1.3).unwrap();
        assert_eq!((r.lhs, r.rhs, r.violated), (0.0, 0.0, false));
        assert!(r.note.is_none());
        let r = lg_check(1.0, 1.0, 2.0).unwrap();
        assert!(!r.violated);
        let r = lg_check(0.1, 0.1, 1.0).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rhs, 0.02, epsilon = 1e-15);
        assert!(r.violated);
        assert!(lg_check(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn two_level_process_saturates() {
        let r = lg_for_process(&two_level(), 0.5).unwrap();
        assert_abs_diff_eq!(r.sigma2_tau, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sigma2_t1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sigma2, 1.0, epsilon = 1e-12);
        assert!(!r.violated);
        assert!(r.lhs < 1e-12 && r.rhs < 1e-12);
    }
}
