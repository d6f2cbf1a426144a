use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::{track_log, LocalTerm};
use crate::error::{Error, Result};
use crate::operator::{
    check_dim, embed_product, pauli, space_dim, CMatrix, CVector, HermitianOperator, PureState,
    SpectralDecomposition,
};
use crate::quasi::{
    commensurate_unit, default_merge_tol, invert_fn, linspace, Atom, EnergyLattice,
    WorkQuasiDistribution,
};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `k` disjoint blocks of `r` cells, each driven by `lambda * (sigma^x)^{(x) r}`,
/// plus an optional commuting perturbation `alpha * sum_i sigma^x_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinBlock {
    #[serde(rename = "N")]
    n: usize,
    r: usize,
    k: usize,
    lambda: f64,
    epsilon0: f64,
    alpha: f64,
}

/// `g'(0)`, `g''(0)`, `g'''(0)` of the per-cell exponent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GDerivatives {
    pub first: Complex64,
    pub second: Complex64,
    pub third: Complex64,
}

/// Comparison of the closed-form perturbed `g_{1/2}` with exact traces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbedComparison {
    /// Largest `|X_formula - X_exact|` for the evolved final state.
    pub max_dev_evolved: f64,
    /// Largest `|X_formula - X|` when the final state is replaced by `|1...1>`.
    pub max_dev_fully_charged: f64,
    pub agrees_with_evolved: bool,
    pub agrees_with_fully_charged: bool,
    pub tolerance: f64,
}

impl SpinBlock {
    pub fn new(n: usize, r: usize, lambda: f64, epsilon0: f64, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        if r == 0 || n % r != 0 {
            return Err(Error::param("r", format!("must divide N = {n}, got {r}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::param("lambda", "must be positive"));
        }
        if !(epsilon0 > 0.0) || !epsilon0.is_finite() {
            return Err(Error::param("epsilon0", "must be positive"));
        }
        if !alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        Ok(Self {
            n,
            r,
            k: n / r,
            lambda,
            epsilon0,
            alpha,
        })
    }

    /// `lambda = r * epsilon0`, the convention of the figures and sweeps.
    pub fn with_default_lambda(n: usize, r: usize, epsilon0: f64, alpha: f64) -> Result<Self> {
        Self::new(n, r, r as f64 * epsilon0, epsilon0, alpha)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon0(&self) -> f64 {
        self.epsilon0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn e0_max(&self) -> f64 {
        self.n as f64 * self.epsilon0
    }

    /// `pi / (2 lambda)`.
    pub fn charging_time(&self) -> f64 {
        PI / (2.0 * self.lambda)
    }

    fn require_unperturbed(&self) -> Result<()> {
        if self.alpha != 0.0 {
            return Err(Error::param(
                "alpha",
                "closed form holds only without the perturbation",
            ));
        }
        Ok(())
    }

    /// `H_p = alpha * sum_i sigma^x_i` alone.
    pub fn h_p(&self) -> Result<HermitianOperator> {
        let x = pauli::x();
        let dim = space_dim(2, self.n)?;
        let mut acc = HermitianOperator::zeros(dim);
        for site in 1..=self.n {
            acc = acc.add(&embed_product(&[(site, &x)], 2, self.n)?)?;
        }
        Ok(acc.scaled(self.alpha))
    }

    /// Unperturbed block part `lambda * sum_b (sigma^x)^{(x) r}`.
    pub fn h1_blocks(&self) -> Result<HermitianOperator> {
        let x = pauli::x();
        let dim = space_dim(2, self.n)?;
        let mut acc = HermitianOperator::zeros(dim);
        for b in 0..self.k {
            let factors: Vec<(usize, &HermitianOperator)> =
                (1..=self.r).map(|j| (b * self.r + j, &x)).collect();
            acc = acc.add(&embed_product(&factors, 2, self.n)?)?;
        }
        Ok(acc.scaled(self.lambda))
    }

    /// Dense charging Hamiltonian including the perturbation.
    pub fn h1(&self) -> Result<HermitianOperator> {
        let blocks = self.h1_blocks()?;
        if self.alpha == 0.0 {
            Ok(blocks)
        } else {
            blocks.add(&self.h_p()?)
        }
    }

    /// Eigenpairs of `H1` from the `sigma^x` product basis, without a dense
    /// eigensolver: every term is diagonal after a Hadamard transform.
    pub fn h1_spectral(&self) -> Result<SpectralDecomposition> {
        let dim = space_dim(2, self.n)?;
        let norm = (dim as f64).sqrt().recip();
        let vectors = DMatrix::from_fn(dim, dim, |i, j| {
            let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * norm, 0.0)
        });
        let values = (0..dim)
            .map(|j| {
                // site s (1-based) is bit n - s; a set bit is the -1 eigenvalue of sigma^x
                let spin = |s: usize| if (j >> (self.n - s)) & 1 == 1 { -1.0 } else { 1.0 };
                let blocks: f64 = (0..self.k)
                    .map(|b| (1..=self.r).map(|i| spin(b * self.r + i)).product::<f64>())
                    .sum();
                let singles: f64 = (1..=self.n).map(spin).sum();
                self.lambda * blocks + self.alpha * singles
            })
            .collect();
        Ok(SpectralDecomposition::from_parts_trusted(values, vectors))
    }

    /// `(sigma^x)^{(x) N}`, which maps the spectrum of `H0` onto its inversion.
    pub fn inversion_unitary(&self) -> Result<CMatrix> {
        inversion_unitary(self.n)
    }

    /// Block terms of support `r`, and single-site terms when `alpha != 0`.
    pub fn h1_terms(&self) -> Vec<LocalTerm> {
        let mut terms: Vec<LocalTerm> = (0..self.k)
            .map(|b| LocalTerm {
                sites: (b * self.r + 1..=(b + 1) * self.r).collect(),
                norm: self.lambda,
            })
            .collect();
        if self.alpha != 0.0 {
            terms.extend((1..=self.n).map(|s| LocalTerm {
                sites: vec![s],
                norm: self.alpha.abs(),
            }));
        }
        terms
    }

    /// `<H1 H0 H1>` in the ground state divided by `N`.
    pub fn lemma1_metric(&self) -> f64 {
        if self.r == 1 {
            (self.lambda + self.alpha).powi(2) * self.epsilon0
        } else {
            (self.lambda * self.lambda + self.alpha * self.alpha) * self.epsilon0
        }
    }

    fn cq_sq(&self, u: f64, q: f64) -> (f64, f64) {
        let a = self.lambda * q * u;
        let b = self.lambda * (1.0 - q) * u;
        (a.cos() * b.cos(), a.sin() * b.sin())
    }

    /// `c_q(u) - s_q(u) e^{-iur eps0}`.
    pub fn block_factor(&self, u: f64, q: f64) -> Complex64 {
        let (c, s) = self.cq_sq(u, q);
        c - s * Complex64::from_polar(1.0, -u * self.r as f64 * self.epsilon0)
    }

    /// Closed-form `X_q(u) = e^{iuE_max} (c_q - s_q e^{-iur eps0})^k`.
    pub fn xq_closed(&self, u: f64, q: f64) -> Result<Complex64> {
        self.require_unperturbed()?;
        Ok(Complex64::from_polar(1.0, u * self.e0_max()) * self.block_factor(u, q).powi(self.k as i32))
    }

    fn factor_bandwidth(&self) -> f64 {
        self.r as f64 * self.epsilon0 + 2.0 * self.lambda + 2.0 * self.alpha.abs() * self.r as f64
    }

    /// `g_q(u) = ln(c_q - s_q e^{-iur eps0}) / r`, continued from `u = 0`.
    pub fn gq(&self, u: f64, q: f64) -> Result<Complex64> {
        self.require_unperturbed()?;
        let log = track_log(|x| self.block_factor(x, q), u, self.factor_bandwidth())?;
        Ok(log / self.r as f64)
    }

    /// `g' = 0`, `g'' = -lambda^2 / r`, `g''' = 6 i q (1-q) eps0 lambda^2`.
    pub fn gq_derivs(&self, q: f64) -> Result<GDerivatives> {
        self.require_unperturbed()?;
        let lam2 = self.lambda * self.lambda;
        Ok(GDerivatives {
            first: Complex64::new(0.0, 0.0),
            second: Complex64::new(-lam2 / self.r as f64, 0.0),
            third: Complex64::new(0.0, 6.0 * q * (1.0 - q) * self.epsilon0 * lam2),
        })
    }

    /// Signed atoms of one block factor `e^{iur eps0}(c_q - s_q e^{-iur eps0})`.
    ///
    /// Expanding the cosines and sines into exponentials gives weight `1/4`
    /// at `r eps0 +- lambda(2q-1)` and `r eps0 +- lambda`, `-1/4` at
    /// `+- lambda(2q-1)` and `+1/4` at `+- lambda`.
    pub fn block_atoms(&self, q: f64) -> Result<WorkQuasiDistribution> {
        self.require_unperturbed()?;
        let re = self.r as f64 * self.epsilon0;
        let lam = self.lambda;
        let d = lam * (2.0 * q - 1.0);
        let atoms = [
            Atom::new(re + d, 0.25),
            Atom::new(re - d, 0.25),
            Atom::new(re + lam, 0.25),
            Atom::new(re - lam, 0.25),
            Atom::new(d, -0.25),
            Atom::new(-d, -0.25),
            Atom::new(lam, 0.25),
            Atom::new(-lam, 0.25),
        ];
        let dist = WorkQuasiDistribution::new(atoms, default_merge_tol(self.e0_max()))?;
        let span = 2.0 * PI / self.factor_bandwidth();
        for u in linspace(-span, span, 64) {
            let want = Complex64::from_polar(1.0, u * re) * self.block_factor(u, q);
            let dev = (dist.characteristic_at(u) - want).norm();
            if dev > 1e-10 {
                return Err(Error::Invariant(format!(
                    "block atoms miss the block factor by {dev:.3e} at u = {u}"
                )));
            }
        }
        Ok(dist)
    }

    /// `p_q(w)` as the `k`-fold convolution of the block atoms, symmetrized in
    /// `q <-> 1-q`.
    pub fn pq_convolution(&self, q: f64) -> Result<WorkQuasiDistribution> {
        let a = self.block_atoms(q)?.convolve_power(self.k);
        if (q - 0.5).abs() < 1e-15 {
            return Ok(a);
        }
        let b = self.block_atoms(1.0 - q)?.convolve_power(self.k);
        a.mixture(&b, 0.5)
    }

    /// Per-block `2x2` building blocks of the exact trace; see [`Self::xq_exact`].
    fn block_trace(&self, theta_l: f64, theta_r: f64, u: f64, flip: bool) -> Complex64 {
        let m = |theta: f64| {
            let (s, c) = (self.alpha * theta).sin_cos();
            [[ONE * c, I * s], [I * s, ONE * c]]
        };
        let ml = m(theta_l);
        let mr = m(-theta_r);
        let phase = Complex64::from_polar(1.0, u * self.epsilon0);
        let mut mm = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (s, row) in mm.iter_mut().enumerate() {
            for (t, x) in row.iter_mut().enumerate() {
                *x = ml[s][0] * mr[0][t] + ml[s][1] * phase * mr[1][t];
            }
        }
        let cl = [
            ONE * (self.lambda * theta_l).cos(),
            I * (self.lambda * theta_l).sin(),
        ];
        let cr = [
            ONE * (self.lambda * theta_r).cos(),
            -I * (self.lambda * theta_r).sin(),
        ];
        let mut sum = Complex64::new(0.0, 0.0);
        for s in 0..2 {
            for t in 0..2 {
                let (a, b) = if flip { (1 - s, 1 - t) } else { (s, t) };
                sum += cl[s] * cr[t] * mm[a][b].powi(self.r as i32);
            }
        }
        sum
    }

    /// Exact `X_q(u)` in the evolved final state, for any `alpha`.
    ///
    /// All terms of `H1` commute, so each block contributes
    /// `<0| e^{i th_L H_b} e^{iuH0} e^{-i th_R H_b} |0>` with
    /// `th_L = tau - u(1-q)` and `th_R = tau + uq`. The cell factors
    /// `e^{i th alpha sigma^x}` reduce it to `sum_{s,t} cL_s cR_t (M_st)^r`.
    pub fn xq_exact(&self, u: f64, q: f64) -> Complex64 {
        let tau = self.charging_time();
        self.block_trace(tau - u * (1.0 - q), tau + u * q, u, false)
            .powi(self.k as i32)
    }

    /// `X_q(u)` with the final state replaced by the fully charged `|1...1>`.
    pub fn xq_fully_charged(&self, u: f64, q: f64) -> Complex64 {
        self.block_trace(-u * (1.0 - q), u * q, u, true)
            .powi(self.k as i32)
    }

    /// Block factor of the closed-form perturbed `g_{1/2}`:
    /// `a^r c + b - conj(a^r) s e^{-iur eps0}` with
    /// `a = cos^2(alpha u/2) - e^{-iu eps0} sin^2(alpha u/2)` and
    /// `b = -2i cos(lambda u/2) sin(lambda u/2) (-i cos(alpha u/2) sin(alpha u/2)(1 + e^{-iu eps0}))^r`.
    pub fn perturbed_factor12(&self, u: f64) -> Complex64 {
        let e = Complex64::from_polar(1.0, -u * self.epsilon0);
        let (sa, ca) = (0.5 * self.alpha * u).sin_cos();
        let (sl, cl) = (0.5 * self.lambda * u).sin_cos();
        let a_r = (ca * ca - e * sa * sa).powi(self.r as i32);
        let beta = -2.0 * I * cl * sl * (-I * ca * sa * (ONE + e)).powi(self.r as i32);
        let (c, s) = self.cq_sq(u, 0.5);
        a_r * c + beta
            - a_r.conj() * s * Complex64::from_polar(1.0, -u * self.r as f64 * self.epsilon0)
    }

    /// Closed-form perturbed `g_{1/2}(u)`, continued from `u = 0`.
    pub fn perturbed_g12(&self, u: f64) -> Result<Complex64> {
        let log = track_log(|x| self.perturbed_factor12(x), u, self.factor_bandwidth())?;
        Ok(log / self.r as f64)
    }

    /// `X_{1/2}` implied by the closed-form perturbed `g_{1/2}`.
    pub fn perturbed_x12(&self, u: f64) -> Complex64 {
        Complex64::from_polar(1.0, u * self.e0_max()) * self.perturbed_factor12(u).powi(self.k as i32)
    }

    /// Checks the closed-form perturbed `X_{1/2}` against both exact traces.
    pub fn compare_perturbed(&self, u_grid: &[f64], tolerance: f64) -> PerturbedComparison {
        let mut dev_evolved = 0.0f64;
        let mut dev_charged = 0.0f64;
        for &u in u_grid {
            let formula = self.perturbed_x12(u);
            dev_evolved = dev_evolved.max((formula - self.xq_exact(u, 0.5)).norm());
            dev_charged = dev_charged.max((formula - self.xq_fully_charged(u, 0.5)).norm());
        }
        PerturbedComparison {
            max_dev_evolved: dev_evolved,
            max_dev_fully_charged: dev_charged,
            agrees_with_evolved: dev_evolved <= tolerance,
            agrees_with_fully_charged: dev_charged <= tolerance,
            tolerance,
        }
    }

    /// Lattice spacing shared by every work value at this `q`.
    pub fn energy_unit(&self, q: f64) -> Result<f64> {
        let mut values = vec![self.epsilon0, q * self.lambda, (1.0 - q) * self.lambda];
        if self.alpha != 0.0 {
            values.extend([q * self.alpha, (1.0 - q) * self.alpha]);
        }
        commensurate_unit(&values, 64).ok_or_else(|| {
            Error::param(
                "q",
                "energies are not commensurate on a rational grid with denominator <= 64",
            )
        })
    }

    /// `p_q(w)` by Fourier inversion of the exact `(X_q + X_{1-q})/2`.
    pub fn pq_fourier(&self, q: f64) -> Result<WorkQuasiDistribution> {
        let unit = self.energy_unit(q)?;
        let reach = self.k as f64 * self.lambda + self.n as f64 * self.alpha.abs();
        let lattice = EnergyLattice::covering(unit, -reach, self.e0_max() + reach, 1)?;
        check_dim(lattice.len)?;
        invert_fn(
            |u| 0.5 * (self.xq_exact(u, q) + self.xq_exact(u, 1.0 - q)),
            &lattice,
            default_merge_tol(self.e0_max()),
        )
    }

    /// Amplitudes `(<0...0|, <1...1|)` of one evolved block at time `t`.
    pub fn block_amplitudes(&self, t: f64) -> (Complex64, Complex64) {
        let (sl, cl) = (self.lambda * t).sin_cos();
        let (sa, ca) = (self.alpha * t).sin_cos();
        let keep = ONE * ca;
        let flip = -I * sa;
        let r = self.r as i32;
        // (cos - i sin X^r) applied to (m|0>)^{(x) r}
        let a0 = cl * keep.powi(r) - I * sl * flip.powi(r);
        let a1 = cl * flip.powi(r) - I * sl * keep.powi(r);
        (a0, a1)
    }

    /// `|<1...1|psi(tau)>|^2`.
    pub fn full_charge_overlap(&self) -> f64 {
        self.block_amplitudes(self.charging_time())
            .1
            .norm_sqr()
            .powi(self.k as i32)
    }

    /// `psi(t)`: product form without the perturbation, exact evolution otherwise.
    pub fn final_state(&self, t: f64) -> Result<PureState> {
        let tau = self.charging_time();
        if !(0.0..=tau * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::param("t", format!("must lie in [0, {tau}]")));
        }
        let dim = space_dim(2, self.n)?;
        if self.alpha == 0.0 {
            let block_dim = 1usize << self.r;
            let mut block = CVector::zeros(block_dim);
            block[0] = ONE * (self.lambda * t).cos();
            block[block_dim - 1] = -I * (self.lambda * t).sin();
            return PureState::product(&vec![block; self.k]);
        }
        let ground = PureState::basis(dim, 0)?;
        crate::operator::evolve(&ground, &self.h1_spectral()?, t)
    }
}

/// `(sigma^x)^{(x) n}` as a dense matrix.
pub fn inversion_unitary(n: usize) -> Result<CMatrix> {
    let dim = space_dim(2, n)?;
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(dim - 1 - i, i)] = ONE;
    }
    Ok(m)
}
