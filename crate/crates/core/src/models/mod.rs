//! Concrete batteries: the two-level collective model and the spin-block
//! model, with exact-engine builders and closed forms.

mod engine;
mod random;
mod spin_block;
mod two_level;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::operator::{diagonalize, space_dim, CMatrix, HermitianOperator, SpectralDecomposition};
use crate::quasi::WorkQuasiDistribution;

pub use engine::ChargingProcess;
pub use random::{random_charging_process, random_hermitian, random_process};
pub use spin_block::{inversion_unitary, GDerivatives, PerturbedComparison, SpinBlock};
pub use two_level::TwoLevelCollective;

/// One term `v_X` of a charging Hamiltonian: its support and operator norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalTerm {
    pub sites: Vec<usize>,
    pub norm: f64,
}

const BRANCH_FLOOR: f64 = 1e-12;

fn advance_arg(
    f: &impl Fn(f64) -> Complex64,
    a: f64,
    arg_a: f64,
    b: f64,
    depth: u32,
) -> Result<f64> {
    let z = f(b);
    if z.norm() < BRANCH_FLOOR {
        return Err(Error::Branch { u: b });
    }
    let raw = z.arg();
    let next = raw + 2.0 * PI * ((arg_a - raw) / (2.0 * PI)).round();
    if (next - arg_a).abs() > 0.5 {
        if depth >= 40 {
            return Err(Error::Branch { u: b });
        }
        let mid = 0.5 * (a + b);
        let arg_mid = advance_arg(f, a, arg_a, mid, depth + 1)?;
        return advance_arg(f, mid, arg_mid, b, depth + 1);
    }
    Ok(next)
}

/// `ln f(u)` continued along `[0, u]` from the principal value at 0.
///
/// `bandwidth` bounds the frequencies in `f` and sets the base step; steps
/// are bisected wherever the phase moves too fast.
pub(crate) fn track_log(f: impl Fn(f64) -> Complex64, u: f64, bandwidth: f64) -> Result<Complex64> {
    let z0 = f(0.0);
    if z0.norm() < BRANCH_FLOOR {
        return Err(Error::Branch { u: 0.0 });
    }
    let mut arg = z0.arg();
    let steps = (u.abs() * bandwidth.max(1.0) / 0.1).ceil().max(1.0) as usize;
    let mut prev = 0.0;
    for j in 1..=steps {
        let x = u * j as f64 / steps as f64;
        arg = advance_arg(&f, prev, arg, x, 0)?;
        prev = x;
    }
    Ok(Complex64::new(f(u).norm().ln(), arg))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum BatteryModel {
    TwoLevel(TwoLevelCollective),
    SpinBlock(SpinBlock),
}

impl BatteryModel {
    pub fn n(&self) -> usize {
        match self {
            BatteryModel::TwoLevel(m) => m.n(),
            BatteryModel::SpinBlock(m) => m.n(),
        }
    }

    pub fn epsilon0(&self) -> f64 {
        match self {
            BatteryModel::TwoLevel(m) => m.epsilon0(),
            BatteryModel::SpinBlock(m) => m.epsilon0(),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            BatteryModel::TwoLevel(m) => m.lambda(),
            BatteryModel::SpinBlock(m) => m.lambda(),
        }
    }

    pub fn e0_max(&self) -> f64 {
        self.n() as f64 * self.epsilon0()
    }

    pub fn charging_time(&self) -> f64 {
        match self {
            BatteryModel::TwoLevel(m) => m.charging_time(),
            BatteryModel::SpinBlock(m) => m.charging_time(),
        }
    }

    /// `H0 = sum_i eps0 |1><1|_i`, diagonal in the computational basis.
    pub fn h0(&self) -> Result<HermitianOperator> {
        let dim = space_dim(2, self.n())?;
        let e = self.epsilon0();
        let values: Vec<f64> = (0..dim).map(|i| e * (i as u64).count_ones() as f64).collect();
        Ok(HermitianOperator::diagonal(&values))
    }

    pub fn h1(&self) -> Result<HermitianOperator> {
        match self {
            BatteryModel::TwoLevel(m) => m.h1(),
            BatteryModel::SpinBlock(m) => m.h1(),
        }
    }

    pub fn h1_spectral(&self) -> Result<SpectralDecomposition> {
        match self {
            BatteryModel::TwoLevel(m) => Ok(diagonalize(&m.h1()?)),
            BatteryModel::SpinBlock(m) => m.h1_spectral(),
        }
    }

    pub fn h1_terms(&self) -> Vec<LocalTerm> {
        match self {
            BatteryModel::TwoLevel(m) => vec![LocalTerm {
                sites: (1..=m.n()).collect(),
                norm: m.lambda(),
            }],
            BatteryModel::SpinBlock(m) => m.h1_terms(),
        }
    }

    /// `(sigma^x)^{(x) N}`.
    pub fn inversion_unitary(&self) -> Result<CMatrix> {
        inversion_unitary(self.n())
    }

    /// `<H1 H0 H1>_0 / N` from the structure of `H1`.
    pub fn lemma1_metric(&self) -> f64 {
        match self {
            BatteryModel::TwoLevel(m) => m.lambda() * m.lambda() * m.epsilon0(),
            BatteryModel::SpinBlock(m) => m.lemma1_metric(),
        }
    }

    /// Closed-form `X_q(u)`; unavailable for the perturbed spin block.
    pub fn xq_closed(&self, u: f64, q: f64) -> Result<Complex64> {
        match self {
            BatteryModel::TwoLevel(m) => Ok(m.xq_closed(u, q)),
            BatteryModel::SpinBlock(m) => m.xq_closed(u, q),
        }
    }

    /// `p_q(w)` without the dense engine: closed form, block convolution, or
    /// Fourier inversion when the perturbation is on.
    pub fn pq_closed(&self, q: f64) -> Result<WorkQuasiDistribution> {
        match self {
            BatteryModel::TwoLevel(m) => m.pq(q),
            BatteryModel::SpinBlock(m) if m.alpha() == 0.0 => m.pq_convolution(q),
            BatteryModel::SpinBlock(m) => m.pq_fourier(q),
        }
    }
}

/// A model together with the work-interval settings of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunSpec {
    #[serde(flatten)]
    pub model: BatteryModel,
    pub q: f64,
    pub t1: Option<f64>,
}

const SPEC_FIELDS: [&str; 8] = ["model", "N", "r", "lambda", "epsilon0", "alpha", "q", "t1"];

fn field_f64(map: &Map<String, Value>, key: &'static str) -> Result<Option<f64>> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .map(Some)
            .ok_or_else(|| Error::param(key, format!("expected a finite number, got {v}"))),
    }
}

fn field_usize(map: &Map<String, Value>, key: &'static str) -> Result<Option<usize>> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|x| Some(x as usize))
            .ok_or_else(|| Error::param(key, format!("expected a non-negative integer, got {v}"))),
    }
}

impl RunSpec {
    /// Parses `{model, N, r?, lambda?, epsilon0?, alpha?, q?, t1?}`.
    ///
    /// Defaults: `epsilon0 = 1`, `alpha = 0`, `q = 1/2`, `t1 = tau/2`;
    /// `lambda = 1` for `two_level` and `r * epsilon0` for `spin_block`.
    pub fn from_value(value: &Value) -> Result<Self> {
        let map = value
            .as_object()
            .ok_or_else(|| Error::param("model", "model spec must be a JSON object"))?;
        if let Some(key) = map.keys().find(|k| !SPEC_FIELDS.contains(&k.as_str())) {
            return Err(Error::param("model", format!("unknown field `{key}`")));
        }
        let kind = map
            .get("model")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::param("model", "expected \"two_level\" or \"spin_block\""))?;
        let n = field_usize(map, "N")?.ok_or_else(|| Error::param("N", "is required"))?;
        let epsilon0 = field_f64(map, "epsilon0")?.unwrap_or(1.0);
        let alpha = field_f64(map, "alpha")?.unwrap_or(0.0);
        let lambda = field_f64(map, "lambda")?;
        let r = field_usize(map, "r")?;
        let model = match kind {
            "two_level" => {
                if r.is_some() {
                    return Err(Error::param("r", "not used by the two_level model"));
                }
                if alpha != 0.0 {
                    return Err(Error::param("alpha", "not used by the two_level model"));
                }
                BatteryModel::TwoLevel(TwoLevelCollective::new(
                    n,
                    epsilon0,
                    lambda.unwrap_or(1.0),
                )?)
            }
            "spin_block" => {
                let r = r.ok_or_else(|| Error::param("r", "is required for spin_block"))?;
                let lambda = lambda.unwrap_or(r as f64 * epsilon0);
                BatteryModel::SpinBlock(SpinBlock::new(n, r, lambda, epsilon0, alpha)?)
            }
            other => {
                return Err(Error::param(
                    "model",
                    format!("unknown model `{other}`, expected two_level or spin_block"),
                ))
            }
        };
        let q = field_f64(map, "q")?.unwrap_or(0.5);
        let t1 = field_f64(map, "t1")?;
        if let Some(t) = t1 {
            let tau = model.charging_time();
            if !(t > 0.0 && t < tau) {
                return Err(Error::param("t1", format!("must lie in (0, {tau})")));
            }
        }
        Ok(Self { model, q, t1 })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Self::from_value(&serde_json::from_str(text)?)
    }

    pub fn t1_or_default(&self) -> f64 {
        self.t1.unwrap_or(0.5 * self.model.charging_time())
    }
}
