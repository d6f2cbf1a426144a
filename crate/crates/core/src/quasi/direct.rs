use num_complex::Complex64;

use super::distribution::{Atom, WorkQuasiDistribution};
use crate::error::{Error, Result};
use crate::operator::{CMatrix, CVector, HermitianOperator, PureState, SpectralDecomposition};

/// Residue of `Im sum(weights)` tolerated before declaring a bug.
pub const RESIDUE_TOL: f64 = 1e-9;

/// Builds `p_q(w)` for a pure state at `t1`, the Hamiltonians at both ends of
/// the interval and the propagator `u` between them.
///
/// Weights are `Re <E_i|rho|E_j><E_j|U^dag|E_k><E_k|U|E_i>` grouped by
/// eigenvalue level, so degenerate subspaces are handled with projectors.
pub fn build_pq_direct(
    psi_t1: &PureState,
    h_t1: &SpectralDecomposition,
    h_t2: &SpectralDecomposition,
    u: &CMatrix,
    q: f64,
    merge_tol: f64,
) -> Result<WorkQuasiDistribution> {
    let d = psi_t1.dim();
    for actual in [h_t1.dim(), h_t2.dim(), u.nrows(), u.ncols()] {
        if actual != d {
            return Err(Error::DimensionMismatch { expected: d, actual });
        }
    }
    let coeffs = h_t1.to_eigenbasis(psi_t1.amplitudes());
    let v1 = h_t1.eigenvectors();
    let v2_adj = h_t2.eigenvectors().adjoint();

    // phi_a = V2^dag U P_a psi for each occupied level a of H(t1)
    let mut branches: Vec<(f64, CVector)> = Vec::new();
    for level in h_t1.levels(h_t1.default_level_tol()) {
        let weight: f64 = level.indices().map(|i| coeffs[i].norm_sqr()).sum();
        if weight < 1e-30 {
            continue;
        }
        let mut projected = CVector::zeros(d);
        for i in level.indices() {
            projected.axpy(coeffs[i], &v1.column(i), Complex64::new(1.0, 0.0));
        }
        branches.push((level.energy, &v2_adj * (u * projected)));
    }

    let levels2 = h_t2.levels(h_t2.default_level_tol());
    let mut atoms = Vec::with_capacity(branches.len() * branches.len() * levels2.len());
    let mut total = Complex64::new(0.0, 0.0);
    for (ea, phi_a) in &branches {
        for (eb, phi_b) in &branches {
            for level in &levels2 {
                let z: Complex64 = level.indices().map(|k| phi_a[k] * phi_b[k].conj()).sum();
                total += z;
                atoms.push(Atom::new(level.energy - q * ea - (1.0 - q) * eb, z.re));
            }
        }
    }
    if total.im.abs() > RESIDUE_TOL {
        return Err(Error::ImaginaryResidue {
            residue: total.im.abs(),
        });
    }
    WorkQuasiDistribution::new(atoms, merge_tol)
}

fn apply(m: &CMatrix, v: &CVector) -> CVector {
    m * v
}

/// `<w>, <w^2>, <w^3>` from operator expressions.
///
/// With `D = H2 - H1`, where `H2` is the final Hamiltonian in the Heisenberg
/// picture: `<w^n> = <D^n>` for `n <= 2`, and
/// `<w^3> = <D^3> + <[H1 + H2, [H1, H2]]>/2 - 3 q (1-q) <[H1, [H1, H2]]>`.
pub fn analytic_moments(
    psi_t1: &PureState,
    h_t1: &HermitianOperator,
    h_t2_heisenberg: &HermitianOperator,
    q: f64,
) -> Result<[f64; 3]> {
    let d = psi_t1.dim();
    for actual in [h_t1.dim(), h_t2_heisenberg.dim()] {
        if actual != d {
            return Err(Error::DimensionMismatch { expected: d, actual });
        }
    }
    let h1 = h_t1.matrix();
    let h2 = h_t2_heisenberg.matrix();
    let psi = psi_t1.amplitudes();
    let delta = h2 - h1;
    let comm = |v: &CVector| apply(h1, &apply(h2, v)) - apply(h2, &apply(h1, v));
    let ev = |v: &CVector| psi.dotc(v);

    let d1 = apply(&delta, psi);
    let d2 = apply(&delta, &d1);
    let d3 = apply(&delta, &d2);

    // [A, C] psi with C = [H1, H2]
    let c_psi = comm(psi);
    let sum = h1 + h2;
    let outer_sym = apply(&sum, &c_psi) - comm(&apply(&sum, psi));
    let outer_h1 = apply(h1, &c_psi) - comm(&apply(h1, psi));

    let m3 = ev(&d3) + 0.5 * ev(&outer_sym) - 3.0 * q * (1.0 - q) * ev(&outer_h1);
    Ok([ev(&d1).re, ev(&d2).re, m3.re])
}
