use num_complex::Complex64;
use rand::Rng;

use super::ChargingProcess;
use crate::error::{Error, Result};
use crate::operator::{space_dim, CMatrix, HermitianOperator};

/// Hermitian matrix with entries uniform in `[-scale, scale]` (real and
/// imaginary parts).
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> HermitianOperator {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = Complex64::new(rng.gen_range(-scale..=scale), 0.0);
        for j in 0..i {
            let z = Complex64::new(rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermitianOperator::new(m).expect("Hermitian by construction")
}

fn h0_for(n: usize) -> Result<HermitianOperator> {
    let dim = space_dim(2, n)?;
    let values: Vec<f64> = (0..dim).map(|i| (i as u64).count_ones() as f64).collect();
    Ok(HermitianOperator::diagonal(&values))
}

/// `N` cells with `eps0 = 1`, a generic random `H1` and `tau` drawn from
/// `[0.5, 1.5]`. The final state is generally not fully charged.
pub fn random_process<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ChargingProcess> {
    let h0 = h0_for(n)?;
    let h1 = random_hermitian(h0.dim(), 1.0, rng);
    let tau = rng.gen_range(0.5..=1.5);
    let t1 = rng.gen_range(0.0..tau);
    ChargingProcess::new(h0, h1, tau, t1)
}

/// Random process that fully charges at `tau = pi / (2 lambda)`:
/// `H1 = lambda (|1..1><0..0| + h.c.)` plus a random Hermitian block on the
/// complement of those two states, and random diagonal energies on them.
pub fn random_charging_process<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ChargingProcess> {
    if n == 0 {
        return Err(Error::param("N", "must be at least 1"));
    }
    let h0 = h0_for(n)?;
    let dim = h0.dim();
    let lambda = rng.gen_range(0.5..=2.0);
    let shift = rng.gen_range(-1.0..=1.0);
    let mut m = CMatrix::zeros(dim, dim);
    let top = dim - 1;
    // equal diagonal shifts keep the rotation between the two states exact
    m[(0, 0)] = Complex64::new(shift, 0.0);
    m[(top, top)] = Complex64::new(shift, 0.0);
    m[(0, top)] = Complex64::new(lambda, 0.0);
    m[(top, 0)] = Complex64::new(lambda, 0.0);
    if dim > 2 {
        let rest = random_hermitian(dim - 2, 1.0, rng);
        for i in 0..dim - 2 {
            for j in 0..dim - 2 {
                m[(i + 1, j + 1)] = rest.matrix()[(i, j)];
            }
        }
    }
    let h1 = HermitianOperator::new(m)?;
    let tau = std::f64::consts::PI / (2.0 * lambda);
    let t1 = rng.gen_range(0.0..tau);
    ChargingProcess::new(h0, h1, tau, t1)
}
