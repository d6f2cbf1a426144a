//! Qubit detector kicked at `t1` and `t2` whose coherence encodes `X_q(u)`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::ChargingProcess;
use crate::operator::{CVector, SpectralDecomposition};
use crate::quasi::{CharacteristicSamples, SampleKind};

const G: usize = 0;
const E: usize = 1;

/// Detector with `H_D = omega |e><e|`, kicks
/// `H_I = -delta_e |e><e| + delta_g |g><g|` at `t1` and
/// `H_I' = -delta_e' |e><e| + delta_g' |g><g|` at `t2`.
///
/// `rho` is indexed with `g = 0`, `e = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectorSpec {
    pub omega: f64,
    pub delta_e: f64,
    pub delta_g: f64,
    pub delta_e2: f64,
    pub delta_g2: f64,
    pub rho: [[Complex64; 2]; 2],
}

impl DetectorSpec {
    /// `|+><+|` with no kicks.
    pub fn plus_state(omega: f64) -> Self {
        let h = Complex64::new(0.5, 0.0);
        Self {
            omega,
            delta_e: 0.0,
            delta_g: 0.0,
            delta_e2: 0.0,
            delta_g2: 0.0,
            rho: [[h, h], [h, h]],
        }
    }

    /// Kicks that read out `X_q(u)`: `delta_e = -qu`, `delta_g = -(1-q)u`,
    /// `delta_e' = u`, `delta_g' = 0`.
    pub fn with_schedule(&self, u: f64, q: f64) -> Self {
        Self {
            delta_e: -q * u,
            delta_g: -(1.0 - q) * u,
            delta_e2: u,
            delta_g2: 0.0,
            ..*self
        }
    }

    pub fn coherence(&self) -> Complex64 {
        self.rho[E][G]
    }

    fn validate(&self) -> Result<Matrix2<Complex64>> {
        let m = Matrix2::new(self.rho[0][0], self.rho[0][1], self.rho[1][0], self.rho[1][1]);
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(Error::param("rho", format!("not Hermitian (deviation {herm:.3e})")));
        }
        let trace = (m[(0, 0)] + m[(1, 1)]).re;
        if (trace - 1.0).abs() > 1e-12 {
            return Err(Error::param("rho", format!("trace is {trace}, expected 1")));
        }
        let eig = m.symmetric_eigenvalues();
        if eig.iter().any(|&x| x < -1e-12) {
            return Err(Error::param("rho", "not positive semidefinite"));
        }
        for x in [self.omega, self.delta_e, self.delta_g, self.delta_e2, self.delta_g2] {
            if !x.is_finite() {
                return Err(Error::param("detector", "non-finite parameter"));
            }
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Readout {
    /// `<e|rho_D(tau)|g>` from the simulated joint evolution.
    pub coherence: Complex64,
    /// The same quantity from the trace formula.
    pub closed_form: Complex64,
    pub deviation: f64,
    /// `Tr rho_S^2` of the battery after the readout.
    pub system_purity: f64,
}

/// `e^{-i K (x) H_I}` on a joint vector indexed `2 i + s`.
fn kick(spec: &SpectralDecomposition, hi_diag: [f64; 2], joint: &CVector) -> CVector {
    let (values, vectors) = spec.kron_diagonal(&hi_diag);
    let joint_spec = SpectralDecomposition::from_parts_trusted(values, vectors);
    joint_spec.apply_exp(1.0, joint)
}

/// Free evolution under `K (x) 1 + 1 (x) H_D` for time `t`.
fn free(spec: &SpectralDecomposition, omega: f64, t: f64, joint: &CVector) -> CVector {
    let d = spec.dim();
    let mut out = CVector::zeros(2 * d);
    for s in [G, E] {
        let part = CVector::from_iterator(d, (0..d).map(|i| joint[2 * i + s]));
        let evolved = spec.apply_exp(t, &part);
        let phase = if s == E {
            Complex64::from_polar(1.0, -omega * t)
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..d {
            out[2 * i + s] = evolved[i] * phase;
        }
    }
    out
}

fn hamiltonian_at(process: &ChargingProcess, t: f64) -> &SpectralDecomposition {
    if t <= 0.0 || t >= process.tau() {
        process.h0_spectral()
    } else {
        process.h1_spectral()
    }
}

/// Simulates the kicked joint evolution over `[0, tau]` and returns the
/// detector coherence at `tau`.
///
/// The mixed detector state is purified into at most two pure components;
/// each is evolved as a joint system-detector vector.
pub fn simulate_readout(
    process: &ChargingProcess,
    t1: f64,
    t2: f64,
    det: &DetectorSpec,
) -> Result<Readout> {
    let tau = process.tau();
    if !(0.0 <= t1 && t1 < t2 && t2 <= tau) {
        return Err(Error::param("t1", format!("need 0 <= t1 < t2 <= {tau}")));
    }
    let rho = det.validate()?;
    crate::operator::check_dim(2 * process.dim())?;
    let d = process.dim();
    let eig = rho.symmetric_eigen();
    let ground = process.ground_state().amplitudes();
    let spec1 = process.h1_spectral();
    let k1 = hamiltonian_at(process, t1);
    let k2 = hamiltonian_at(process, t2);

    // Piecewise free evolution is generated by H1 on (0, tau); H0 only acts at
    // the endpoints, where the initial state is its eigenstate.
    let mut coherence = Complex64::new(0.0, 0.0);
    let mut branches: Vec<CVector> = Vec::new();
    for j in 0..2 {
        let p = eig.eigenvalues[j];
        if p <= 1e-15 {
            continue;
        }
        let phi = eig.eigenvectors.column(j);
        let mut joint = CVector::zeros(2 * d);
        for i in 0..d {
            for s in [G, E] {
                joint[2 * i + s] = ground[i] * phi[s] * p.sqrt();
            }
        }
        joint = free(spec1, det.omega, t1, &joint);
        joint = kick(k1, [det.delta_g, -det.delta_e], &joint);
        joint = free(spec1, det.omega, t2 - t1, &joint);
        joint = kick(k2, [det.delta_g2, -det.delta_e2], &joint);
        joint = free(spec1, det.omega, tau - t2, &joint);
        for i in 0..d {
            coherence += joint[2 * i + E] * joint[2 * i + G].conj();
        }
        for s in [G, E] {
            branches.push(CVector::from_iterator(d, (0..d).map(|i| joint[2 * i + s])));
        }
    }
    let mut purity = 0.0;
    for a in &branches {
        for b in &branches {
            purity += a.dotc(b).norm_sqr();
        }
    }
    let closed_form = closed_form(process, t1, t2, det)?;
    Ok(Readout {
        coherence,
        closed_form,
        deviation: (coherence - closed_form).norm(),
        system_purity: purity,
    })
}

/// `rho_eg e^{-i omega tau} Tr{e^{i d_e H(t1)} rho(t1) e^{i d_g H(t1)} e^{i(d_e' + d_g') H^H(t2)}}`
/// with `H^H(t2) = U^dag H(t2) U` and `U` the propagator from `t1` to `t2`.
pub fn closed_form(
    process: &ChargingProcess,
    t1: f64,
    t2: f64,
    det: &DetectorSpec,
) -> Result<Complex64> {
    let psi = process.state_at(t1)?;
    let k1 = hamiltonian_at(process, t1);
    let k2 = hamiltonian_at(process, t2);
    let spec1 = process.h1_spectral();
    let v = psi.amplitudes();
    let right = k1.apply_exp(-det.delta_e, v);
    let right = spec1.apply_exp(t2 - t1, &right);
    let right = k2.apply_exp(-(det.delta_e2 + det.delta_g2), &right);
    let right = spec1.apply_exp(t1 - t2, &right);
    let left = k1.apply_exp(det.delta_g, v);
    let trace = left.dotc(&right);
    Ok(det.coherence() * Complex64::from_polar(1.0, -det.omega * process.tau()) * trace)
}

/// `X_q(u)` on a grid from simulated readouts, normalized by the free
/// precession factor `rho_eg e^{-i omega tau}`.
pub fn reconstruct_xq(
    process: &ChargingProcess,
    u_grid: &[f64],
    q: f64,
    template: &DetectorSpec,
) -> Result<CharacteristicSamples> {
    let c0 = template.coherence();
    if c0.norm() < 1e-12 {
        return Err(Error::param("rho", "initial detector coherence vanishes"));
    }
    let norm = c0 * Complex64::from_polar(1.0, -template.omega * process.tau());
    CharacteristicSamples::try_from_fn(SampleKind::Xq, u_grid, |u| {
        let det = template.with_schedule(u, q);
        Ok(simulate_readout(process, process.t1(), process.tau(), &det)?.coherence / norm)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BatteryModel, TwoLevelCollective};
    use approx::assert_abs_diff_eq;

    fn process() -> ChargingProcess {
        let m = BatteryModel::TwoLevel(TwoLevelCollective::new(2, 1.0, 1.0).unwrap());
        ChargingProcess::from_model(&m, None).unwrap()
    }

    #[test]
    fn no_kicks_gives_free_precession() {
        let p = process();
        let det = DetectorSpec::plus_state(0.7);
        let r = simulate_readout(&p, p.t1(), p.tau(), &det).unwrap();
        let want = 0.5 * Complex64::from_polar(1.0, -0.7 * p.tau());
        assert!((r.coherence - want).norm() < 1e-12);
        assert_abs_diff_eq!(r.system_purity, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_detector_has_no_signal() {
        let p = process();
        let mut det = DetectorSpec::plus_state(0.7).with_schedule(0.4, 0.5);
        det.rho = [
            [Complex64::new(0.3, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(0.7, 0.0)],
        ];
        let r = simulate_readout(&p, p.t1(), p.tau(), &det).unwrap();
        assert_eq!(r.coherence, Complex64::new(0.0, 0.0));
        assert!(reconstruct_xq(&p, &[0.1], 0.5, &det).is_err());
    }

    #[test]
    fn readout_matches_trace_formula_and_xq() {
        let p = process();
        let det = DetectorSpec::plus_state(0.3);
        for u in [-0.8, 0.0, 0.45, 1.3] {
            let r = simulate_readout(&p, p.t1(), p.tau(), &det.with_schedule(u, 0.25)).unwrap();
            assert!(r.deviation < 1e-12);
            let x = r.coherence / (0.5 * Complex64::from_polar(1.0, -0.3 * p.tau()));
            assert!((x - p.xq(u, 0.25).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_invalid_detector_state() {
        let p = process();
        let mut det = DetectorSpec::plus_state(0.0);
        det.rho[0][0] = Complex64::new(0.9, 0.0);
        assert!(simulate_readout(&p, p.t1(), p.tau(), &det).is_err());
        let det = DetectorSpec::plus_state(0.0);
        assert!(simulate_readout(&p, p.tau(), p.tau(), &det).is_err());
    }
}
