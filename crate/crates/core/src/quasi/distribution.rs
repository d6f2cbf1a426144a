use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Allowed deviation of the total weight from 1.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Merged weights at or below this magnitude are dropped.
pub const DUST: f64 = 1e-15;

/// `1e-9 * max(1, |e_max|)`.
pub fn default_merge_tol(e_max: f64) -> f64 {
    1e-9 * e_max.abs().max(1.0)
}

/// One Dirac delta `p * delta(w - w_a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub w: f64,
    pub p: f64,
}

impl Atom {
    pub fn new(w: f64, p: f64) -> Self {
        Self { w, p }
    }
}

/// Normalized signed atomic measure over work values.
///
/// Atoms are kept sorted by location and are pairwise separated by more than
/// `merge_tol`.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkQuasiDistribution {
    atoms: Vec<Atom>,
    merge_tol: f64,
}

fn merge_sorted(mut raw: Vec<Atom>, merge_tol: f64) -> Vec<Atom> {
    raw.sort_by(|a, b| a.w.total_cmp(&b.w));
    let mut out: Vec<Atom> = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let first = raw[i].w;
        let mut sum_w = 0.0;
        let mut sum_p = 0.0;
        let mut count = 0usize;
        while i < raw.len() && raw[i].w - first <= merge_tol {
            sum_w += raw[i].w;
            sum_p += raw[i].p;
            count += 1;
            i += 1;
        }
        if sum_p.abs() > DUST {
            out.push(Atom::new(sum_w / count as f64, sum_p));
        }
    }
    out
}

impl WorkQuasiDistribution {
    /// Merges coincident atoms and checks normalization.
    pub fn new(atoms: impl IntoIterator<Item = Atom>, merge_tol: f64) -> Result<Self> {
        let raw: Vec<Atom> = atoms.into_iter().collect();
        if let Some(bad) = raw.iter().find(|a| !a.w.is_finite() || !a.p.is_finite()) {
            return Err(Error::param("atoms", format!("non-finite atom {bad:?}")));
        }
        if !(merge_tol >= 0.0) {
            return Err(Error::param("merge_tol", "must be non-negative"));
        }
        let atoms = merge_sorted(raw, merge_tol);
        let sum: f64 = atoms.iter().map(|a| a.p).sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization { sum });
        }
        Ok(Self { atoms, merge_tol })
    }

    pub fn point_mass(w: f64) -> Self {
        Self {
            atoms: vec![Atom::new(w, 1.0)],
            merge_tol: default_merge_tol(w),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn merge_tol(&self) -> f64 {
        self.merge_tol
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.p).sum()
    }

    /// `sum_a p_a w_a^n`.
    pub fn moment(&self, n: u32) -> f64 {
        self.atoms.iter().map(|a| a.p * a.w.powi(n as i32)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn central_moment(&self, n: u32) -> f64 {
        let mean = self.mean();
        self.atoms
            .iter()
            .map(|a| a.p * (a.w - mean).powi(n as i32))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        self.central_moment(2)
    }

    /// `sum_a |p_a|`; equals 1 iff no weight is negative.
    pub fn negativity(&self) -> f64 {
        self.atoms.iter().map(|a| a.p.abs()).sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.p).fold(f64::INFINITY, f64::min)
    }

    pub fn support(&self) -> (f64, f64) {
        (
            self.atoms.first().map_or(0.0, |a| a.w),
            self.atoms.last().map_or(0.0, |a| a.w),
        )
    }

    /// Total weight within `tol` of `w`.
    pub fn weight_near(&self, w: f64, tol: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| (a.w - w).abs() <= tol)
            .map(|a| a.p)
            .sum()
    }

    /// `sum_a p_a e^{i u w_a}`.
    pub fn characteristic_at(&self, u: f64) -> Complex64 {
        self.atoms
            .iter()
            .map(|a| Complex64::from_polar(a.p, u * a.w))
            .sum()
    }

    pub fn shifted(&self, dw: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| Atom::new(a.w + dw, a.p)).collect(),
            merge_tol: self.merge_tol,
        }
    }

    /// Distribution of the sum of two independent contributions.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut raw = Vec::with_capacity(self.len() * other.len());
        for a in &self.atoms {
            for b in &other.atoms {
                raw.push(Atom::new(a.w + b.w, a.p * b.p));
            }
        }
        let merge_tol = self.merge_tol.max(other.merge_tol);
        Self {
            atoms: merge_sorted(raw, merge_tol),
            merge_tol,
        }
    }

    /// `k`-fold self-convolution by repeated squaring; `k = 0` gives a point mass at 0.
    pub fn convolve_power(&self, k: usize) -> Self {
        let mut result = Self {
            atoms: vec![Atom::new(0.0, 1.0)],
            merge_tol: self.merge_tol,
        };
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = result.convolve(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.convolve(&base);
            }
        }
        result
    }

    /// `a * self + (1 - a) * other`.
    pub fn mixture(&self, other: &Self, a: f64) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|x| Atom::new(x.w, a * x.p))
            .chain(other.atoms.iter().map(|x| Atom::new(x.w, (1.0 - a) * x.p)));
        Self::new(atoms, self.merge_tol.max(other.merge_tol))
    }

    /// Largest weight difference over the union of atom locations; locations
    /// closer than `loc_tol` are identified.
    pub fn max_deviation(&self, other: &Self, loc_tol: f64) -> f64 {
        let mut tagged: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.w, a.p))
            .chain(other.atoms.iter().map(|a| (a.w, -a.p)))
            .collect();
        tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut worst = 0.0f64;
        let mut i = 0;
        while i < tagged.len() {
            let first = tagged[i].0;
            let mut diff = 0.0;
            while i < tagged.len() && tagged[i].0 - first <= loc_tol {
                diff += tagged[i].1;
                i += 1;
            }
            worst = worst.max(diff.abs());
        }
        worst
    }

    fn bin_edges(&self, bins: usize) -> Vec<f64> {
        let bins = bins.max(1);
        let (lo, hi) = self.support();
        if !(hi > lo) {
            let width = 1.0 / bins as f64;
            return (0..=bins).map(|j| lo - 0.5 + width * j as f64).collect();
        }
        if bins == 1 {
            return vec![lo, hi];
        }
        // the support endpoints sit at the first and last bin centers
        let width = (hi - lo) / (bins - 1) as f64;
        (0..=bins).map(|j| lo + width * (j as f64 - 0.5)).collect()
    }

    /// Atom weights summed into `bins` equal bins covering the support.
    pub fn histogram(&self, bins: usize) -> Histogram {
        let edges = self.bin_edges(bins);
        let n = edges.len() - 1;
        let lo = edges[0];
        let width = edges[1] - edges[0];
        let mut masses = vec![0.0; n];
        for a in &self.atoms {
            let j = (((a.w - lo) / width).floor() as isize).clamp(0, n as isize - 1) as usize;
            masses[j] += a.p;
        }
        Histogram { edges, masses }
    }

    /// Bin masses of the distribution smoothed by a Gaussian kernel of
    /// standard deviation `resolution`, on the same edges as [`Self::histogram`].
    ///
    /// This is the coarse-grained view of the measure: oscillations on scales
    /// much finer than `resolution` average out.
    pub fn coarse_histogram(&self, bins: usize, resolution: f64) -> Histogram {
        let edges = self.bin_edges(bins);
        if !(resolution > 0.0) {
            return self.histogram(bins);
        }
        let scale = resolution * std::f64::consts::SQRT_2;
        // P(X < x) for X ~ N(w_a, resolution^2), written with erfc so far tails stay accurate.
        let cdf = |x: f64| 0.5 * erfc(-x / scale);
        let masses = edges
            .windows(2)
            .map(|e| {
                self.atoms
                    .iter()
                    .map(|a| {
                        let hi = e[1] - a.w;
                        let lo = e[0] - a.w;
                        // upper-tail form for positive arguments avoids cancellation
                        let mass = if lo > 0.0 {
                            0.5 * erfc(lo / scale) - 0.5 * erfc(hi / scale)
                        } else {
                            cdf(hi) - cdf(lo)
                        };
                        a.p * mass
                    })
                    .sum()
            })
            .collect();
        Histogram { edges, masses }
    }

    /// CSV with header `w,weight`, ascending `w`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["w", "weight"])?;
        for a in &self.atoms {
            wtr.write_record([format!("{:.16e}", a.w), format!("{:.16e}", a.p)])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, merge_tol: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "w" || &headers[1] != "weight" {
            return Err(Error::param("csv", "expected header `w,weight`"));
        }
        let mut atoms = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let parse = |i: usize| -> Result<f64> {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::param("csv", format!("bad number `{}`: {e}", &record[i])))
            };
            atoms.push(Atom::new(parse(0)?, parse(1)?));
        }
        Self::new(atoms, merge_tol)
    }
}

/// Binned masses with `edges.len() == masses.len() + 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn min_mass(&self) -> f64 {
        self.masses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// CSV with header `w_bin_center,mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["w_bin_center", "mass"])?;
        for (c, m) in self.centers().iter().zip(&self.masses) {
            wtr.write_record([format!("{c:.16e}"), format!("{m:.16e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
