use num_complex::Complex64;

use super::BatteryModel;
use crate::error::{Error, Result};
use crate::operator::{
    diagonalize, evolve, expectation, CMatrix, CVector, HermitianOperator, PureState,
    SpectralDecomposition,
};
use crate::quasi::{analytic_moments, build_pq_direct, default_merge_tol, WorkQuasiDistribution, XqTrace};

/// Dense exact engine for the quench protocol: `H0` at `t = 0` and `t = tau`,
/// `H1` in between, starting from the ground state of `H0`.
///
/// The work interval is `[t1, tau]`.
#[derive(Clone, Debug)]
pub struct ChargingProcess {
    h0: HermitianOperator,
    h1: HermitianOperator,
    spec0: SpectralDecomposition,
    spec1: SpectralDecomposition,
    tau: f64,
    t1: f64,
    ground: PureState,
}

impl ChargingProcess {
    pub fn new(h0: HermitianOperator, h1: HermitianOperator, tau: f64, t1: f64) -> Result<Self> {
        let spec0 = diagonalize(&h0);
        let spec1 = diagonalize(&h1);
        Self::with_spectra(h0, spec0, h1, spec1, tau, t1)
    }

    pub fn with_spectra(
        h0: HermitianOperator,
        spec0: SpectralDecomposition,
        h1: HermitianOperator,
        spec1: SpectralDecomposition,
        tau: f64,
        t1: f64,
    ) -> Result<Self> {
        if h1.dim() != h0.dim() {
            return Err(Error::DimensionMismatch {
                expected: h0.dim(),
                actual: h1.dim(),
            });
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::param("tau", "must be positive"));
        }
        if !(0.0..=tau).contains(&t1) {
            return Err(Error::param("t1", format!("must lie in [0, {tau}]")));
        }
        let ground = PureState::new(spec0.eigenvectors().column(0).into_owned())?;
        Ok(Self {
            h0,
            h1,
            spec0,
            spec1,
            tau,
            t1,
            ground,
        })
    }

    /// Exact engine for a model; `t1` defaults to `tau / 2`.
    pub fn from_model(model: &BatteryModel, t1: Option<f64>) -> Result<Self> {
        let tau = model.charging_time();
        let h0 = model.h0()?;
        let spec0 = diagonalize(&h0);
        let h1 = model.h1()?;
        let spec1 = model.h1_spectral()?;
        Self::with_spectra(h0, spec0, h1, spec1, tau, t1.unwrap_or(0.5 * tau))
    }

    pub fn with_t1(&self, t1: f64) -> Result<Self> {
        if !(0.0..=self.tau).contains(&t1) {
            return Err(Error::param("t1", format!("must lie in [0, {}]", self.tau)));
        }
        Ok(Self { t1, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn h0(&self) -> &HermitianOperator {
        &self.h0
    }

    pub fn h1(&self) -> &HermitianOperator {
        &self.h1
    }

    pub fn h0_spectral(&self) -> &SpectralDecomposition {
        &self.spec0
    }

    pub fn h1_spectral(&self) -> &SpectralDecomposition {
        &self.spec1
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn ground_state(&self) -> &PureState {
        &self.ground
    }

    pub fn e0_max(&self) -> f64 {
        self.spec0.max_eigenvalue()
    }

    /// `psi(t) = e^{-iH1 t} |E0>` for `0 <= t <= tau`.
    pub fn state_at(&self, t: f64) -> Result<PureState> {
        if !(0.0..=self.tau * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::param("t", format!("must lie in [0, {}]", self.tau)));
        }
        evolve(&self.ground, &self.spec1, t)
    }

    pub fn final_state(&self) -> Result<PureState> {
        self.state_at(self.tau)
    }

    /// `e^{-iH1 (tau - t1)}`.
    pub fn propagator(&self) -> CMatrix {
        self.spec1.unitary(self.tau - self.t1)
    }

    /// `<H0>` at time `t`.
    pub fn energy_at(&self, t: f64) -> Result<f64> {
        expectation(&self.h0, &self.state_at(t)?)
    }

    /// `p_q(w)` on `[t1, tau]` by the direct triple sum.
    pub fn pq(&self, q: f64) -> Result<WorkQuasiDistribution> {
        build_pq_direct(
            &self.state_at(self.t1)?,
            &self.spec1,
            &self.spec0,
            &self.propagator(),
            q,
            default_merge_tol(self.e0_max()),
        )
    }

    /// `U^dag H0 U`, the final Hamiltonian in the Heisenberg picture.
    pub fn h0_heisenberg(&self) -> Result<HermitianOperator> {
        self.h0.conjugated_by(&self.propagator())
    }

    pub fn analytic_moments(&self, q: f64) -> Result<[f64; 3]> {
        analytic_moments(&self.state_at(self.t1)?, &self.h1, &self.h0_heisenberg()?, q)
    }

    /// `X_q(u)` by dense matrix exponentials in the final state.
    pub fn xq(&self, u: f64, q: f64) -> Result<Complex64> {
        let psi = self.final_state()?;
        Ok(XqTrace::new(&psi, &self.spec0, &self.spec1)?.eval(u, q))
    }

    fn sandwich(&self, middle: &HermitianOperator, psi: &PureState) -> f64 {
        let v: CVector = self.h1.matrix() * psi.amplitudes();
        v.dotc(&(middle.matrix() * &v)).re
    }

    /// `<H1 H0 H1>` in the ground state.
    pub fn h1_h0_h1_ground(&self) -> f64 {
        self.sandwich(&self.h0, &self.ground)
    }

    /// `<H1 (E_max - H0) H1>` in the final state.
    pub fn h1_h0tilde_h1_final(&self) -> Result<f64> {
        let tilde = self.h0.reflected(self.e0_max());
        Ok(self.sandwich(&tilde, &self.final_state()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{SpinBlock, TwoLevelCollective};
    use approx::assert_abs_diff_eq;

    fn two_level(n: usize, lambda: f64) -> ChargingProcess {
        let m = BatteryModel::TwoLevel(TwoLevelCollective::new(n, 1.0, lambda).unwrap());
        ChargingProcess::from_model(&m, None).unwrap()
    }

    #[test]
    fn two_level_state_rotates_between_ground_and_full_charge() {
        let p = two_level(2, 1.0);
        let t = 0.3;
        let psi = p.state_at(t).unwrap();
        let a = psi.amplitudes();
        assert!((a[0] - Complex64::new(t.cos(), 0.0)).norm() < 1e-12);
        assert!((a[3] - Complex64::new(0.0, -t.sin())).norm() < 1e-12);
        assert_abs_diff_eq!(p.energy_at(p.tau()).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn spin_block_state_has_product_amplitudes() {
        let m = SpinBlock::new(4, 2, 1.5, 1.0, 0.0).unwrap();
        let p = ChargingProcess::from_model(&BatteryModel::SpinBlock(m), None).unwrap();
        let t = 0.37;
        let exact = p.state_at(t).unwrap();
        let product = m.final_state(t).unwrap();
        assert!((exact.inner(&product).unwrap().norm() - 1.0).abs() < 1e-12);
        let pt = (1.5 * t).sin().powi(2);
        assert_abs_diff_eq!(exact.amplitudes()[15].norm_sqr(), pt * pt, epsilon = 1e-12);
    }

    #[test]
    fn two_level_sandwich_values() {
        let p = two_level(2, 1.0);
        // H1|E0> = lambda|E1>, H0|E1> = N eps0 |E1>
        assert_abs_diff_eq!(p.h1_h0_h1_ground(), 2.0, epsilon = 1e-12);
        // final state is |E1> up to phase; H1|E1> = |E0>, E_max - 0 = 2
        assert_abs_diff_eq!(p.h1_h0tilde_h1_final().unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn t1_out_of_range() {
        let p = two_level(2, 1.0);
        assert!(p.with_t1(10.0).is_err());
    }
}
