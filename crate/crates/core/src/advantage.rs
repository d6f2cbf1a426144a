//! Scaling diagnostics linking negativity of `p_{1/2}` to a vanishing
//! charging time.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::models::{ChargingProcess, LocalTerm, SpinBlock};
use crate::operator::{max_abs_diff, CMatrix, HermitianOperator};
use crate::quasi::{cumulants, Atom, WorkQuasiDistribution};

/// `|<H1 H0 H1>_0| / N` from the dense engine.
pub fn lemma1_metric_exact(process: &ChargingProcess, cells: usize) -> f64 {
    process.h1_h0_h1_ground().abs() / cells as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShortTimeCheck {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// `|<H0>_t - <H1 H0 H1>_0 t^2| / t^3`.
    pub residual_over_t3: Vec<f64>,
    /// `|<H0>_t| / t`, which must vanish with `t`.
    pub linear_ratio: Vec<f64>,
    pub bounded: bool,
}

/// Compares `<H0>_t` with its leading `t^2` term at each time.
///
/// The residual ratio counts as bounded when it does not grow by more than a
/// factor of 10 over the largest time, up to a roundoff floor.
pub fn short_time_expansion_check(process: &ChargingProcess, times: &[f64]) -> Result<ShortTimeCheck> {
    let w2 = process.h1_h0_h1_ground();
    let mut energies = Vec::with_capacity(times.len());
    let mut residual = Vec::with_capacity(times.len());
    let mut linear = Vec::with_capacity(times.len());
    for &t in times {
        let e = process.energy_at(t)?;
        energies.push(e);
        if t > 0.0 {
            residual.push((e - w2 * t * t).abs() / t.powi(3));
            linear.push(e.abs() / t);
        } else {
            residual.push(0.0);
            linear.push(0.0);
        }
    }
    let scale = process.e0_max().max(1.0);
    let reference = times
        .iter()
        .zip(&residual)
        .filter(|(t, _)| **t > 0.0)
        .fold(None::<(f64, f64)>, |acc, (&t, &r)| match acc {
            Some((tb, _)) if tb >= t => acc,
            _ => Some((t, r)),
        });
    let bounded = match reference {
        None => true,
        Some((_, r_ref)) => residual.iter().zip(times).all(|(&r, &t)| {
            let floor = if t > 0.0 { 1e-13 * scale / t.powi(3) } else { 0.0 };
            r.is_finite() && r <= 10.0 * r_ref + floor
        }),
    };
    Ok(ShortTimeCheck {
        times: times.to_vec(),
        energies,
        residual_over_t3: residual,
        linear_ratio: linear,
        bounded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Kappa3Decomposition {
    pub q: f64,
    /// `kappa'_3 + correction`.
    pub kappa3: f64,
    /// Third cumulant of `-H1` in the final state.
    pub kappa3_prime: f64,
    /// `-6 q (1-q) <H1 (E_max - H0) H1>_tau`.
    pub correction: f64,
    /// Third cumulant of the atoms of `p_q`.
    pub kappa3_distribution: f64,
    pub consistent: bool,
}

/// Splits `kappa_3` into the `-H1` cumulant and the interference correction
/// and compares the sum with the atoms of `p_q`.
///
/// The split holds when the final state is an eigenstate of `H0` at `E_max`.
pub fn kappa3_decomposition(process: &ChargingProcess, q: f64) -> Result<Kappa3Decomposition> {
    let psi = process.final_state()?;
    let spec1 = process.h1_spectral();
    let coeffs = spec1.to_eigenbasis(psi.amplitudes());
    let atoms = spec1
        .eigenvalues()
        .iter()
        .zip(coeffs.iter())
        .map(|(&e, c)| Atom::new(-e, c.norm_sqr()));
    let minus_h1 = WorkQuasiDistribution::new(atoms, 1e-9 * spec1.default_level_tol().max(1e-9))?;
    let kappa3_prime = cumulants(&minus_h1, 3).get(3);
    let correction = -6.0 * q * (1.0 - q) * process.h1_h0tilde_h1_final()?;
    let kappa3 = kappa3_prime + correction;
    let kappa3_distribution = cumulants(&process.pq(q)?, 3).get(3);
    let consistent = (kappa3 - kappa3_distribution).abs() <= 1e-8 * kappa3.abs().max(1.0);
    Ok(Kappa3Decomposition {
        q,
        kappa3,
        kappa3_prime,
        correction,
        kappa3_distribution,
        consistent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InversionSymmetry {
    pub symmetric: bool,
    /// `max |U_I H1 U_I - H1|`.
    pub deviation: f64,
    pub sandwich_final: Option<f64>,
    pub sandwich_ground: Option<f64>,
    /// Set when the final state is `U_I |E0>`, the case in which the two
    /// sandwiches must coincide.
    pub sandwiches_equal: Option<bool>,
}

/// Checks `U_I H1 U_I = H1` for an involution `U_I`; with a process whose
/// final state is `U_I|E0>`, also checks
/// `<H1 (E_max - H0) H1>_tau = <H1 H0 H1>_0`.
pub fn inversion_symmetry_check(
    h1: &HermitianOperator,
    u_i: &CMatrix,
    process: Option<&ChargingProcess>,
) -> Result<InversionSymmetry> {
    let d = h1.dim();
    if u_i.nrows() != d || u_i.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: u_i.nrows(),
        });
    }
    let square = u_i * u_i;
    let inv_dev = max_abs_diff(&square, &CMatrix::identity(d, d));
    if inv_dev > 1e-10 {
        return Err(Error::NotInvolution { deviation: inv_dev });
    }
    let conj = u_i * h1.matrix() * u_i;
    let deviation = max_abs_diff(&conj, h1.matrix());
    let symmetric = deviation < 1e-10;
    let mut out = InversionSymmetry {
        symmetric,
        deviation,
        sandwich_final: None,
        sandwich_ground: None,
        sandwiches_equal: None,
    };
    if let Some(p) = process {
        let fin = p.h1_h0tilde_h1_final()?;
        let gnd = p.h1_h0_h1_ground();
        out.sandwich_final = Some(fin);
        out.sandwich_ground = Some(gnd);
        let target = u_i * p.ground_state().amplitudes();
        let overlap = target.dotc(p.final_state()?.amplitudes()).norm_sqr();
        if symmetric && overlap > 1.0 - 1e-10 {
            let equal = (fin - gnd).abs() <= 1e-8 * gnd.abs().max(1.0);
            if !equal {
                return Err(Error::Invariant(format!(
                    "inversion-symmetric H1 but <H1 H0~ H1>_tau = {fin} differs from <H1 H0 H1>_0 = {gnd}"
                )));
            }
            out.sandwiches_equal = Some(equal);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalityReport {
    /// Largest support of any term.
    pub radius: usize,
    /// `sum_i ||h_i|| (sum_{X contains i} ||v_X||)^2`.
    pub bound: f64,
    /// `bound / N`.
    pub constant: f64,
    /// `|<H1 H0 H1>_0|`.
    pub metric: f64,
    pub within_bound: bool,
}

/// Bounds `|<H1 H0 H1>_0|` by the term structure of `H1`.
///
/// Only terms touching cell `i` can excite it, which gives
/// `|<H1 H0 H1>_0| <= sum_i ||h_i|| (sum_{X contains i} ||v_X||)^2`.
pub fn locality_bound(
    terms: &[LocalTerm],
    cells: usize,
    local_norm: f64,
    metric: f64,
) -> Result<LocalityReport> {
    if terms.is_empty() {
        return Err(Error::param("terms", "H1 must be given as a sum of local terms"));
    }
    let mut per_site = vec![0.0; cells];
    let mut radius = 0;
    for term in terms {
        radius = radius.max(term.sites.len());
        for &s in &term.sites {
            if s == 0 || s > cells {
                return Err(Error::SiteOutOfRange { site: s, cells });
            }
            per_site[s - 1] += term.norm;
        }
    }
    let bound: f64 = per_site.iter().map(|x| local_norm * x * x).sum();
    Ok(LocalityReport {
        radius,
        bound,
        constant: bound / cells as f64,
        metric: metric.abs(),
        within_bound: metric.abs() <= bound * (1.0 + 1e-12),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianComparison {
    /// Largest `|coarse bin mass - Gaussian bin mass|`.
    pub sup_deviation: f64,
    pub mean: f64,
    pub variance: f64,
    /// `N |g''(0)|`.
    pub variance_model: f64,
    /// Smoothing width applied to the atoms before binning.
    pub resolution: f64,
    pub skewness: f64,
    pub skewness_sqrt_n: f64,
    pub min_coarse_mass: f64,
}

fn normal_mass(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let s = sd * std::f64::consts::SQRT_2;
    let (a, b) = ((lo - mean) / s, (hi - mean) / s);
    if a > 0.0 {
        0.5 * (erfc(a) - erfc(b))
    } else {
        0.5 * (erfc(-b) - erfc(-a))
    }
}

/// Compares the coarse-grained `p_{1/2}` with the Gaussian of variance
/// `N |g''(0)|` centred at `E_max`.
///
/// Atoms are smoothed with a Gaussian of width `resolution` and binned into
/// `bins` equal bins; the reference Gaussian is widened by the same amount.
pub fn gaussian_limit_compare(
    dist: &WorkQuasiDistribution,
    g2: f64,
    e0_max: f64,
    n: usize,
    bins: usize,
    resolution: f64,
) -> Result<GaussianComparison> {
    if !(g2 < 0.0) {
        return Err(Error::param("g2", format!("g''(0) must be negative, got {g2}")));
    }
    let variance_model = n as f64 * g2.abs();
    let coarse = dist.coarse_histogram(bins, resolution);
    let sd = (variance_model + resolution * resolution).sqrt();
    let sup_deviation = coarse
        .edges
        .windows(2)
        .zip(&coarse.masses)
        .map(|(e, m)| (m - normal_mass(e[0], e[1], e0_max, sd)).abs())
        .fold(0.0, f64::max);
    let c = cumulants(dist, 3);
    let skewness = c.get(3) / c.get(2).powf(1.5);
    Ok(GaussianComparison {
        sup_deviation,
        mean: c.get(1),
        variance: c.get(2),
        variance_model,
        resolution,
        skewness,
        skewness_sqrt_n: skewness * (n as f64).sqrt(),
        min_coarse_mass: coarse.min_mass(),
    })
}

/// Density `Re(e^{-(w-E)^2 / (-2N g'')} / sqrt(-2 pi N g''))` of the
/// complex-Gaussian limit for general `q`, using the principal square root.
///
/// The flag is raised when `-g''` is not (numerically) a positive real, where
/// the choice of branch changes the sign of the result.
pub fn complex_gaussian_density(w: f64, g2: Complex64, e0_max: f64, n: usize) -> (f64, bool) {
    let a = -g2 * n as f64;
    let ambiguous = a.im.abs() > 1e-12 * a.norm() || a.re <= 0.0;
    let x = w - e0_max;
    let value = (-(x * x) / (2.0 * a)).exp() / (2.0 * std::f64::consts::PI * a).sqrt();
    (value.re, ambiguous)
}

/// `y = c x^p` fitted on log-log axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Least-squares power law; `None` with fewer than two points or any
/// non-positive value.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Option<PowerLawFit> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - exponent * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(PowerLawFit {
        exponent,
        prefactor: intercept.exp(),
        r_squared,
    })
}

/// How the block size follows the cell count in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum RRule {
    Fixed(usize),
    Power(f64),
}

impl RRule {
    /// Parses `fixed:<int>` or `pow:<float>`.
    pub fn parse(text: &str) -> Result<Self> {
        let (kind, value) = text
            .split_once(':')
            .ok_or_else(|| Error::param("r_rule", "expected fixed:<int> or pow:<float>"))?;
        match kind {
            "fixed" => value
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|r| *r > 0)
                .map(RRule::Fixed)
                .ok_or_else(|| Error::param("r_rule", format!("bad block size `{value}`"))),
            "pow" => value
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|p| p.is_finite() && *p >= 0.0 && *p <= 1.0)
                .map(RRule::Power)
                .ok_or_else(|| Error::param("r_rule", format!("bad exponent `{value}`"))),
            _ => Err(Error::param("r_rule", format!("unknown rule `{kind}`"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            RRule::Fixed(r) => format!("fixed:{r}"),
            RRule::Power(p) => format!("pow:{p}"),
        }
    }

    pub fn target(&self, n: usize) -> f64 {
        match *self {
            RRule::Fixed(r) => r as f64,
            RRule::Power(p) => (n as f64).powf(p),
        }
    }

    /// The divisor of `n` closest to the target on a log scale, ties going to
    /// the larger divisor; `Err` carries the reason when none lies within a
    /// factor of 2.
    pub fn snap(&self, n: usize) -> std::result::Result<usize, String> {
        if n == 0 {
            return Err("N must be positive".into());
        }
        let target = self.target(n);
        if let RRule::Fixed(r) = *self {
            return if n % r == 0 {
                Ok(r)
            } else {
                Err(format!("r = {r} does not divide N = {n}"))
            };
        }
        let mut best: Option<(usize, f64)> = None;
        for r in (1..=n).filter(|r| n % r == 0) {
            let dist = (r as f64).ln() - target.ln();
            let dist = dist.abs();
            best = match best {
                Some((_, d)) if dist > d + 1e-9 => best,
                _ => Some((r, dist)),
            };
        }
        let (r, dist) = best.expect("1 divides every N");
        if dist > std::f64::consts::LN_2 {
            Err(format!(
                "no divisor of N = {n} within a factor 2 of r = {target:.3}"
            ))
        } else {
            Ok(r)
        }
    }
}

/// Diagnostics for one spin-block battery.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdvantageReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub r: usize,
    pub k: usize,
    pub lambda: f64,
    pub q: f64,
    pub requested_r: f64,
    pub tau: f64,
    pub lemma1_metric: f64,
    pub kappa3_over_n: f64,
    pub kappa3_prime_over_n: f64,
    /// Atom-level `sum |p|`.
    pub negativity: f64,
    /// Most negative atom weight.
    pub min_weight: f64,
    /// Smallest coarse-grained bin mass.
    pub coarse_min_mass: f64,
    pub skewness: f64,
    pub skewness_sqrt_n: f64,
    pub gaussian_deviation: f64,
    pub locality_radius: usize,
}

/// Consistency tolerance between the two atom-level negativity signals.
pub const SIGNAL_TOL: f64 = 1e-9;

impl AdvantageReport {
    /// `min_weight < -tol` exactly when `negativity > 1 + tol`.
    pub fn signals_consistent(&self) -> bool {
        (self.min_weight < -SIGNAL_TOL) == (self.negativity > 1.0 + SIGNAL_TOL)
    }
}

/// Builds the report for one spin-block battery from its convolution atoms.
pub fn advantage_report(
    model: &SpinBlock,
    q: f64,
    bins: usize,
    requested_r: f64,
) -> Result<AdvantageReport> {
    let dist = model.pq_convolution(q)?;
    let n = model.n();
    let c = cumulants(&dist, 3);
    let g2 = model.gq_derivs(q)?.second.re;
    let resolution = (n as f64).sqrt() * model.epsilon0();
    let gauss = gaussian_limit_compare(&dist, g2, model.e0_max(), n, bins, resolution)?;
    // -H1 in the final state |1...1>: each block gives +-lambda with weight 1/2
    let block = WorkQuasiDistribution::new(
        [Atom::new(-model.lambda(), 0.5), Atom::new(model.lambda(), 0.5)],
        1e-9,
    )?;
    let kappa3_prime = model.k() as f64 * cumulants(&block, 3).get(3);
    let terms = model.h1_terms();
    let report = AdvantageReport {
        n,
        r: model.r(),
        k: model.k(),
        lambda: model.lambda(),
        q,
        requested_r,
        tau: model.charging_time(),
        lemma1_metric: model.lemma1_metric(),
        kappa3_over_n: c.get(3) / n as f64,
        kappa3_prime_over_n: kappa3_prime / n as f64,
        negativity: dist.negativity(),
        min_weight: dist.min_weight(),
        coarse_min_mass: gauss.min_coarse_mass,
        skewness: gauss.skewness,
        skewness_sqrt_n: gauss.skewness_sqrt_n,
        gaussian_deviation: gauss.sup_deviation,
        locality_radius: terms.iter().map(|t| t.sites.len()).max().unwrap_or(0),
    };
    if !report.signals_consistent() {
        return Err(Error::Invariant(format!(
            "negativity signals disagree at N = {n}: min weight {} vs sum |p| {}",
            report.min_weight, report.negativity
        )));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub q: f64,
    pub bins: usize,
    pub epsilon0: f64,
    /// Coarse bin mass below `-negativity_threshold` counts as negative.
    pub negativity_threshold: f64,
    pub min_exponent: f64,
    pub min_r_squared: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            q: 0.5,
            bins: 101,
            epsilon0: 1.0,
            negativity_threshold: 1e-6,
            min_exponent: 0.2,
            min_r_squared: 0.99,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub family: String,
    /// Negative coarse mass at every row.
    pub negativity_everywhere: bool,
    /// Negative coarse mass at no row.
    pub negativity_nowhere: bool,
    /// Magnitude of the most negative coarse mass grows along the sweep.
    pub negativity_growing: bool,
    pub tau_decreasing: bool,
    pub tau_constant: bool,
    pub lemma1_fit: Option<PowerLawFit>,
    pub lemma1_unbounded: bool,
    pub tau_fit: Option<PowerLawFit>,
    pub locality_radius_growing: bool,
    /// Growing negativity comes with a decreasing charging time.
    pub implication_holds: bool,
    /// The charging time decreases while no negativity appears.
    pub converse_counterexample: bool,
    pub flags: Vec<String>,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub config: PipelineConfig,
    pub rule: RRule,
    pub rows: Vec<AdvantageReport>,
    pub skipped: Vec<SkippedRow>,
    pub verdict: Verdict,
}

fn monotone(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

/// Runs the negativity-to-advantage pipeline across a spin-block family.
pub fn theorem_pipeline(n_list: &[usize], rule: RRule, config: &PipelineConfig) -> Result<Sweep> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut n_sorted = n_list.to_vec();
    n_sorted.sort_unstable();
    n_sorted.dedup();
    for &n in &n_sorted {
        match rule.snap(n) {
            Ok(r) => {
                let model = SpinBlock::with_default_lambda(n, r, config.epsilon0, 0.0)?;
                rows.push(advantage_report(&model, config.q, config.bins, rule.target(n))?);
            }
            Err(reason) => skipped.push(SkippedRow { n, reason }),
        }
    }
    let verdict = verdict(&rows, rule, config);
    Ok(Sweep {
        config: *config,
        rule,
        rows,
        skipped,
        verdict,
    })
}

fn verdict(rows: &[AdvantageReport], rule: RRule, config: &PipelineConfig) -> Verdict {
    let mut flags = Vec::new();
    let negative: Vec<bool> = rows
        .iter()
        .map(|r| r.coarse_min_mass < -config.negativity_threshold)
        .collect();
    let everywhere = !rows.is_empty() && negative.iter().all(|&b| b);
    let nowhere = negative.iter().all(|&b| !b);
    let depth: Vec<f64> = rows.iter().map(|r| -r.coarse_min_mass).collect();
    let growing = everywhere && rows.len() >= 2 && monotone(&depth, true);
    if !everywhere && !nowhere {
        flags.push("negativity appears at some sizes only".into());
    }
    if everywhere && !growing {
        flags.push("negativity present but not growing monotonically".into());
    }
    let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let tau_decreasing = rows.len() >= 2 && monotone(&taus, false);
    let tau_constant = taus.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-12 * w[0]);
    if !tau_decreasing && !tau_constant {
        flags.push("charging time neither decreasing nor constant".into());
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let metric: Vec<f64> = rows.iter().map(|r| r.lemma1_metric).collect();
    let lemma1_fit = fit_power_law(&ns, &metric);
    let lemma1_unbounded = lemma1_fit
        .map(|f| f.exponent > config.min_exponent && f.r_squared > config.min_r_squared)
        .unwrap_or(false);
    let tau_fit = fit_power_law(&ns, &taus);
    let radii: Vec<f64> = rows.iter().map(|r| r.locality_radius as f64).collect();
    let locality_radius_growing = rows.len() >= 2 && monotone(&radii, true);
    for r in rows {
        if !r.signals_consistent() {
            flags.push(format!("inconsistent negativity signals at N = {}", r.n));
        }
    }
    let implication_holds = !growing || tau_decreasing;
    let converse_counterexample = nowhere && tau_decreasing;
    let consistent = implication_holds
        && flags.iter().all(|f| !f.starts_with("inconsistent"))
        && (!growing || lemma1_unbounded);
    Verdict {
        family: rule.label(),
        negativity_everywhere: everywhere,
        negativity_nowhere: nowhere,
        negativity_growing: growing,
        tau_decreasing,
        tau_constant,
        lemma1_fit,
        lemma1_unbounded,
        tau_fit,
        locality_radius_growing,
        implication_holds,
        converse_counterexample,
        flags,
        consistent,
    }
}

impl Sweep {
    /// CSV with columns
    /// `N,r,k,lambda,tau,lemma1_metric,kappa3_over_N,negativity,min_weight,skewness`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "N",
            "r",
            "k",
            "lambda",
            "tau",
            "lemma1_metric",
            "kappa3_over_N",
            "negativity",
            "min_weight",
            "skewness",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.n.to_string(),
                r.r.to_string(),
                r.k.to_string(),
                format!("{:.16e}", r.lambda),
                format!("{:.16e}", r.tau),
                format!("{:.16e}", r.lemma1_metric),
                format!("{:.16e}", r.kappa3_over_n),
                format!("{:.16e}", r.negativity),
                format!("{:.16e}", r.min_weight),
                format!("{:.16e}", r.skewness),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn power_law_recovers_exact_exponent() {
        let x = [16.0, 81.0, 256.0, 625.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let f = fit_power_law(&x, &y).unwrap();
        assert_abs_diff_eq!(f.exponent, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f.prefactor, 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit_power_law(&[1.0], &[1.0]).is_none());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, -1.0]).is_none());
    }

    #[test]
    fn snapping() {
        assert_eq!(RRule::Power(0.75).snap(1024), Ok(256));
        assert_eq!(RRule::Power(0.75).snap(1296), Ok(216));
        assert_eq!(RRule::Power(0.25).snap(256), Ok(4));
        assert_eq!(RRule::Fixed(2).snap(16), Ok(2));
        assert!(RRule::Fixed(3).snap(16).is_err());
        // 17 is prime and both divisors are more than a factor 2 from 17^0.75
        assert!(RRule::Power(0.75).snap(17).is_err());
    }

    #[test]
    fn rule_parsing() {
        assert_eq!(RRule::parse("fixed:2").unwrap(), RRule::Fixed(2));
        assert_eq!(RRule::parse("pow:0.75").unwrap(), RRule::Power(0.75));
        assert!(RRule::parse("pow:x").is_err());
        assert!(RRule::parse("cubic:2").is_err());
        assert!(RRule::parse("fixed:0").is_err());
    }

    #[test]
    fn degenerate_gaussian_rejected() {
        let d = WorkQuasiDistribution::point_mass(1.0);
        assert!(gaussian_limit_compare(&d, 0.0, 1.0, 1, 11, 1.0).is_err());
    }

    #[test]
    fn parallel_terms_have_unit_radius() {
        let terms: Vec<LocalTerm> = (1..=6)
            .map(|s| LocalTerm {
                sites: vec![s],
                norm: 0.5,
            })
            .collect();
        let rep = locality_bound(&terms, 6, 1.0, 1.5).unwrap();
        assert_eq!(rep.radius, 1);
        assert_abs_diff_eq!(rep.bound, 6.0 * 0.25);
        assert!(rep.within_bound);
    }

    #[test]
    fn complex_gaussian_is_ordinary_for_real_curvature() {
        let (v, flag) = complex_gaussian_density(1.0, Complex64::new(-0.5, 0.0), 1.0, 2);
        assert!(!flag);
        assert_abs_diff_eq!(v, 1.0 / (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-14);
        let (_, flag) = complex_gaussian_density(1.0, Complex64::new(-0.5, 0.3), 1.0, 2);
        assert!(flag);
    }
}
