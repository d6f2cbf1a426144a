use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::distribution::{Atom, WorkQuasiDistribution};
use crate::error::{Error, Result};
use crate::operator::{PureState, SpectralDecomposition};

/// Which function a set of samples holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SampleKind {
    /// `X_q(u)`, the unsymmetrized trace.
    Xq,
    /// `chi_q(u) = <e^{iwu}>`.
    Chi,
    /// Per-cell exponent `g_q(u)`.
    Gq,
    /// `G_q(u) = ln chi_q(u)`.
    CumulantGenerating,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharacteristicSamples {
    kind: SampleKind,
    u: Vec<f64>,
    values: Vec<Complex64>,
}

impl CharacteristicSamples {
    pub fn new(kind: SampleKind, u: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if u.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                actual: values.len(),
            });
        }
        if kind == SampleKind::Chi {
            if let Some(i) = u.iter().position(|&x| x == 0.0) {
                let dev = (values[i] - Complex64::new(1.0, 0.0)).norm();
                if dev > 1e-12 {
                    return Err(Error::Invariant(format!(
                        "characteristic function at u = 0 is off by {dev:.3e}"
                    )));
                }
            }
        }
        Ok(Self { kind, u, values })
    }

    pub fn from_fn(kind: SampleKind, u: &[f64], f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(kind, u.to_vec(), u.iter().map(|&x| f(x)).collect())
    }

    pub fn try_from_fn(
        kind: SampleKind,
        u: &[f64],
        f: impl Fn(f64) -> Result<Complex64>,
    ) -> Result<Self> {
        let values = u.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
        Self::new(kind, u.to_vec(), values)
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Pointwise `max |a - b|`; grids must coincide.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        if let Some((a, b)) = self
            .u
            .iter()
            .zip(&other.u)
            .find(|(a, b)| (*a - *b).abs() > 1e-12 * a.abs().max(1.0))
        {
            return Err(Error::param("u_grid", format!("grids differ: {a} vs {b}")));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest `|f(-u) - conj f(u)|` over grid pairs `(u, -u)`; `None` if the
    /// grid contains no such pair.
    pub fn conjugate_symmetry_deviation(&self) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for (i, &u) in self.u.iter().enumerate() {
            if u <= 0.0 {
                continue;
            }
            let tol = 1e-12 * u.max(1.0);
            if let Some(j) = self.u.iter().position(|&v| (v + u).abs() <= tol) {
                let dev = (self.values[j] - self.values[i].conj()).norm();
                worst = Some(worst.map_or(dev, |w: f64| w.max(dev)));
            }
        }
        worst
    }

    /// CSV with header `u,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["u", "re", "im"])?;
        for (u, v) in self.u.iter().zip(&self.values) {
            wtr.write_record([
                format!("{u:.16e}"),
                format!("{:.16e}", v.re),
                format!("{:.16e}", v.im),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `n` points evenly spaced on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Samples `sum_a p_a e^{i u w_a}` on the grid.
pub fn characteristic(dist: &WorkQuasiDistribution, u_grid: &[f64]) -> CharacteristicSamples {
    CharacteristicSamples {
        kind: SampleKind::Chi,
        u: u_grid.to_vec(),
        values: u_grid.iter().map(|&u| dist.characteristic_at(u)).collect(),
    }
}

/// `X_q(u) = <psi| e^{-iu(1-q)H1} e^{iuH0} e^{-iuqH1} |psi>` for a fixed final state.
pub struct XqTrace<'a> {
    psi: &'a PureState,
    h0: &'a SpectralDecomposition,
    h1: &'a SpectralDecomposition,
}

impl<'a> XqTrace<'a> {
    pub fn new(
        psi: &'a PureState,
        h0: &'a SpectralDecomposition,
        h1: &'a SpectralDecomposition,
    ) -> Result<Self> {
        for d in [h0.dim(), h1.dim()] {
            if d != psi.dim() {
                return Err(Error::DimensionMismatch {
                    expected: psi.dim(),
                    actual: d,
                });
            }
        }
        Ok(Self { psi, h0, h1 })
    }

    pub fn eval(&self, u: f64, q: f64) -> Complex64 {
        let v = self.psi.amplitudes();
        let right = self.h1.apply_exp(u * q, v);
        let right = self.h0.apply_exp(-u, &right);
        let left = self.h1.apply_exp(-u * (1.0 - q), v);
        left.dotc(&right)
    }

    /// `(X_q + X_{1-q}) / 2`.
    pub fn chi(&self, u: f64, q: f64) -> Complex64 {
        0.5 * (self.eval(u, q) + self.eval(u, 1.0 - q))
    }

    pub fn samples(&self, u_grid: &[f64], q: f64) -> CharacteristicSamples {
        CharacteristicSamples {
            kind: SampleKind::Xq,
            u: u_grid.to_vec(),
            values: u_grid.iter().map(|&u| self.eval(u, q)).collect(),
        }
    }
}

/// One-shot form of [`XqTrace::eval`].
pub fn xq_trace(
    psi_tau: &PureState,
    h0: &SpectralDecomposition,
    h1: &SpectralDecomposition,
    u: f64,
    q: f64,
) -> Result<Complex64> {
    Ok(XqTrace::new(psi_tau, h0, h1)?.eval(u, q))
}

/// Uniform energy lattice `{(origin + n) * unit : 0 <= n < len}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyLattice {
    pub unit: f64,
    pub origin: i64,
    pub len: usize,
}

impl EnergyLattice {
    /// Smallest power-of-two lattice holding `[w_lo, w_hi]` with `margin`
    /// spare sites on each side.
    pub fn covering(unit: f64, w_lo: f64, w_hi: f64, margin: usize) -> Result<Self> {
        if !(unit > 0.0) || !unit.is_finite() {
            return Err(Error::param("energy_unit", "must be positive and finite"));
        }
        if !(w_hi >= w_lo) {
            return Err(Error::param("support", "upper end below lower end"));
        }
        let lo = (w_lo / unit).floor() as i64 - margin as i64;
        let hi = (w_hi / unit).ceil() as i64 + margin as i64;
        let span = (hi - lo + 1) as usize;
        Ok(Self {
            unit,
            origin: lo,
            len: span.next_power_of_two(),
        })
    }

    /// `2 pi / unit`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.unit
    }

    /// `u_m = 2 pi m / (len * unit)` for `0 <= m < len`.
    pub fn sample_points(&self) -> Vec<f64> {
        let du = self.period() / self.len as f64;
        (0..self.len).map(|m| du * m as f64).collect()
    }

    pub fn energy(&self, n: usize) -> f64 {
        (self.origin + n as i64) as f64 * self.unit
    }
}

/// Weights below this magnitude are dropped after inversion.
pub const INVERSION_PRUNE: f64 = 1e-12;
/// Maximal imaginary part tolerated in an inverted weight.
pub const IMAGINARY_TOL: f64 = 1e-9;
/// Held-out mismatch above which the lattice is declared too coarse.
pub const HOLDOUT_TOL: f64 = 1e-8;

/// Discrete inverse Fourier transform of samples taken at
/// [`EnergyLattice::sample_points`].
pub fn invert_characteristic(
    samples: &CharacteristicSamples,
    lattice: &EnergyLattice,
    merge_tol: f64,
) -> Result<WorkQuasiDistribution> {
    let expected = lattice.sample_points();
    if samples.len() != expected.len() {
        return Err(Error::DimensionMismatch {
            expected: expected.len(),
            actual: samples.len(),
        });
    }
    let du = lattice.period() / lattice.len as f64;
    if let Some((a, b)) = samples
        .u()
        .iter()
        .zip(&expected)
        .find(|(a, b)| (*a - *b).abs() > 1e-9 * du)
    {
        return Err(Error::param(
            "u_grid",
            format!("sample at {a} does not sit on the lattice grid point {b}"),
        ));
    }
    let m = lattice.len;
    // chi(u_m) = sum_n p_n e^{2 pi i (origin + n) m / M}
    let mut buf: Vec<Complex64> = samples
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let phase = -2.0 * PI * ((lattice.origin * j as i64).rem_euclid(m as i64)) as f64
                / m as f64;
            v * Complex64::from_polar(1.0, phase)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    let mut atoms = Vec::new();
    let mut worst_im = 0.0f64;
    for (n, z) in buf.iter().enumerate() {
        let z = z * scale;
        worst_im = worst_im.max(z.im.abs());
        if z.re.abs() >= INVERSION_PRUNE {
            atoms.push(Atom::new(lattice.energy(n), z.re));
        }
    }
    if worst_im > IMAGINARY_TOL {
        return Err(Error::ImaginaryResidue { residue: worst_im });
    }
    WorkQuasiDistribution::new(atoms, merge_tol)
}

/// Samples `f` on the lattice grid, inverts, and re-evaluates the result at
/// off-grid points to detect aliasing.
pub fn invert_fn(
    f: impl Fn(f64) -> Complex64,
    lattice: &EnergyLattice,
    merge_tol: f64,
) -> Result<WorkQuasiDistribution> {
    let samples = CharacteristicSamples::from_fn(SampleKind::Chi, &lattice.sample_points(), &f)?;
    let dist = invert_characteristic(&samples, lattice, merge_tol)?;
    let period = lattice.period();
    let shift = 0.5 * (5f64.sqrt() - 1.0);
    let mut worst = 0.0f64;
    for j in 0..16 {
        let u = (j as f64 + shift) * period / 16.0 - 0.5 * period;
        worst = worst.max((dist.characteristic_at(u) - f(u)).norm());
    }
    if worst > HOLDOUT_TOL {
        return Err(Error::Commensurability {
            energy_unit: lattice.unit,
            mismatch: worst,
        });
    }
    Ok(dist)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Best rational approximation `n/d` with `d <= max_den` by continued fractions.
fn rational(x: f64, max_den: u64) -> Option<(i128, u128)> {
    let sign = if x < 0.0 { -1 } else { 1 };
    let x = x.abs();
    let (mut h0, mut h1) = (0u128, 1u128);
    let (mut k0, mut k1) = (1u128, 0u128);
    let mut rest = x;
    for _ in 0..64 {
        let a = rest.floor();
        if a > 1e15 {
            break;
        }
        let a = a as u128;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > max_den as u128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - x).abs() <= 1e-12 * x.max(1.0) {
            return Some((sign * h1 as i128, k1));
        }
        let frac = rest - rest.floor();
        if frac == 0.0 {
            break;
        }
        rest = 1.0 / frac;
    }
    None
}

/// Largest unit `delta` such that every value is an integer multiple of
/// `delta`, searching rationals with denominators up to `max_den`.
pub fn commensurate_unit(values: &[f64], max_den: u64) -> Option<f64> {
    let mut fracs = Vec::new();
    for &v in values {
        if v.abs() <= 1e-12 {
            continue;
        }
        fracs.push(rational(v, max_den)?);
    }
    if fracs.is_empty() {
        return None;
    }
    let lcm = fracs
        .iter()
        .fold(1u128, |l, &(_, d)| l / gcd(l, d) * d);
    let g = fracs
        .iter()
        .fold(0u128, |g, &(n, d)| gcd(g, n.unsigned_abs() * (lcm / d)));
    Some(g as f64 / lcm as f64)
}
