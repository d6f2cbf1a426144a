use serde::Serialize;

use super::distribution::WorkQuasiDistribution;

/// Cumulants `kappa_1..=kappa_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CumulantSet {
    values: Vec<f64>,
}

impl CumulantSet {
    /// `kappa_n`, or 0 beyond the computed order.
    pub fn get(&self, n: usize) -> f64 {
        assert!(n >= 1, "cumulants start at order 1");
        self.values.get(n - 1).copied().unwrap_or(0.0)
    }

    pub fn max_order(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Raw moments `m_0..=m_n` to cumulants via
/// `kappa_n = m_n - sum_{j=1}^{n-1} C(n-1, j-1) kappa_j m_{n-j}`.
///
/// The moments are divided by `m_0` first.
pub fn cumulants_from_moments(moments: &[f64]) -> CumulantSet {
    let m0 = moments.first().copied().unwrap_or(1.0);
    let m: Vec<f64> = moments.iter().map(|x| x / m0).collect();
    let mut kappa: Vec<f64> = Vec::with_capacity(m.len().saturating_sub(1));
    for n in 1..m.len() {
        let mut k = m[n];
        for j in 1..n {
            k -= binomial(n - 1, j - 1) * kappa[j - 1] * m[n - j];
        }
        kappa.push(k);
    }
    CumulantSet { values: kappa }
}

/// Cumulants of an atomic distribution.
///
/// Moments are taken about the mean, which keeps the recursion well
/// conditioned when the distribution sits far from the origin; only
/// `kappa_1` depends on the shift.
pub fn cumulants(dist: &WorkQuasiDistribution, n_max: usize) -> CumulantSet {
    let mean = dist.mean();
    let mut central = vec![1.0];
    central.extend((1..=n_max).map(|n| dist.central_moment(n as u32)));
    if n_max >= 1 {
        central[1] = 0.0;
    }
    let mut set = cumulants_from_moments(&central);
    if n_max >= 1 {
        set.values[0] = mean;
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasi::distribution::Atom;
    use approx::assert_abs_diff_eq;

    #[test]
    fn point_mass_has_only_a_mean() {
        let c = cumulants(&WorkQuasiDistribution::point_mass(3.5), 5);
        assert_eq!(c.get(1), 3.5);
        for n in 2..=5 {
            assert_abs_diff_eq!(c.get(n), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn poisson_moments_give_equal_cumulants() {
        // Poisson(2): m = 1, 2, 6, 22, 94
        let c = cumulants_from_moments(&[1.0, 2.0, 6.0, 22.0, 94.0]);
        for n in 1..=4 {
            assert_abs_diff_eq!(c.get(n), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn five_atom_example() {
        let atoms = [(-1.0, 0.25), (0.0, -0.5), (1.0, 0.5), (2.0, 0.5), (3.0, 0.25)];
        let d = WorkQuasiDistribution::new(atoms.iter().map(|&(w, p)| Atom::new(w, p)), 1e-9)
            .unwrap();
        let c = cumulants(&d, 4);
        // hand sums of p (w - 2)^n
        let central3: f64 = atoms.iter().map(|&(w, p)| p * (w - 2.0f64).powi(3)).sum();
        assert_abs_diff_eq!(c.get(1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.get(2), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c.get(3), central3, epsilon = 1e-14);
        assert_abs_diff_eq!(c.get(3), -3.0, epsilon = 1e-14);
    }

    #[test]
    fn raw_and_central_routes_agree() {
        let d = WorkQuasiDistribution::new(
            [Atom::new(0.3, 0.2), Atom::new(1.1, 0.5), Atom::new(2.9, 0.3)],
            1e-9,
        )
        .unwrap();
        let raw: Vec<f64> = (0..=5).map(|n| d.moment(n)).collect();
        let a = cumulants_from_moments(&raw);
        let b = cumulants(&d, 5);
        for n in 1..=5 {
            assert_abs_diff_eq!(a.get(n), b.get(n), epsilon = 1e-10);
        }
    }
}
