use thiserror::Error;

/// Errors raised by the numerical engines.
///
/// Input problems (bad parameters, mismatched dimensions) are separated from
/// internal consistency failures so the CLI can map them to different exit
/// codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A - A^H| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("state is not normalized: |psi|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("Hilbert-space dimension {dim} exceeds the exact-engine cap {cap} (set QWORKLAB_MAX_DIM to raise it)")]
    DimensionCap { dim: usize, cap: usize },

    #[error("site {site} is out of range 1..={cells}")]
    SiteOutOfRange { site: usize, cells: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("distribution is not normalized: sum of weights = {sum}")]
    Normalization { sum: f64 },

    #[error("imaginary residue {residue:.3e} left after assembling real weights")]
    ImaginaryResidue { residue: f64 },

    #[error("characteristic function is not commensurate with energy unit {energy_unit}: held-out mismatch {mismatch:.3e}")]
    Commensurability { energy_unit: f64, mismatch: f64 },

    #[error("logarithm branch lost: block factor vanishes near u = {u}")]
    Branch { u: f64 },

    #[error("utility function is not increasing on the support near w = {w}")]
    NotIncreasing { w: f64 },

    #[error("operator is not an involution: max |U^2 - I| = {deviation:.3e}")]
    NotInvolution { deviation: f64 },

    #[error("density matrix is not diagonal in the energy basis: coherence {coherence:.3e}")]
    NotDiagonal { coherence: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// True for failures of internal consistency checks, as opposed to bad input.
    pub fn is_invariant_failure(&self) -> bool {
        matches!(
            self,
            Error::ImaginaryResidue { .. }
                | Error::Commensurability { .. }
                | Error::Invariant(_)
                | Error::Normalization { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
