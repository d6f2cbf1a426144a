use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{space_dim, CMatrix, HermitianOperator};
use crate::quasi::{default_merge_tol, Atom, WorkQuasiDistribution};

/// `N` cells charged by `H1 = lambda (|E1><E0| + |E0><E1|)`, which couples
/// the ground state directly to the fully charged state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoLevelCollective {
    #[serde(rename = "N")]
    n: usize,
    epsilon0: f64,
    lambda: f64,
}

impl TwoLevelCollective {
    pub fn new(n: usize, epsilon0: f64, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        if !(epsilon0 > 0.0) || !epsilon0.is_finite() {
            return Err(Error::param("epsilon0", "must be positive"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::param("lambda", "must be positive"));
        }
        Ok(Self { n, epsilon0, lambda })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn e0_max(&self) -> f64 {
        self.n as f64 * self.epsilon0
    }

    /// `pi / omega` with `omega = 2 lambda`.
    pub fn charging_time(&self) -> f64 {
        PI / (2.0 * self.lambda)
    }

    /// Dense `H1` on `2^N` states.
    pub fn h1(&self) -> Result<HermitianOperator> {
        let dim = space_dim(2, self.n)?;
        let mut m = CMatrix::zeros(dim, dim);
        m[(0, dim - 1)] = Complex64::new(self.lambda, 0.0);
        m[(dim - 1, 0)] = Complex64::new(self.lambda, 0.0);
        HermitianOperator::new(m)
    }

    /// Closed-form `X_q(u) = e^{iuN eps0} c_q(u) - s_q(u)`.
    pub fn xq_closed(&self, u: f64, q: f64) -> Complex64 {
        let a = self.lambda * q * u;
        let b = self.lambda * (1.0 - q) * u;
        Complex64::from_polar(a.cos() * b.cos(), u * self.e0_max()) - a.sin() * b.sin()
    }

    /// `p_q(w)` on the interval `[t1, tau]` for any `0 < t1 < tau`.
    ///
    /// Four diagonal terms of weight 1/4 sit at `E_k - E_pm`; the interference
    /// terms of weight `-1/4` (final state `|E0>`) and `+1/4` (final state
    /// `|E1>`) sit at `E_k +- (1 - 2q) lambda`.
    pub fn pq(&self, q: f64) -> Result<WorkQuasiDistribution> {
        let lam = self.lambda;
        let shift = (1.0 - 2.0 * q) * lam;
        let mut atoms = Vec::with_capacity(8);
        for (e_k, sign) in [(0.0, -1.0), (self.e0_max(), 1.0)] {
            atoms.push(Atom::new(e_k - lam, 0.25));
            atoms.push(Atom::new(e_k + lam, 0.25));
            atoms.push(Atom::new(e_k + shift, 0.25 * sign));
            atoms.push(Atom::new(e_k - shift, 0.25 * sign));
        }
        WorkQuasiDistribution::new(atoms, default_merge_tol(self.e0_max()))
    }
}
