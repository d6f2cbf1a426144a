//! Work quasiprobability distributions, their characteristic functions and
//! cumulants.

mod characteristic;
mod cumulants;
mod direct;
mod distribution;
mod utility;

pub use characteristic::{
    characteristic, commensurate_unit, invert_characteristic, invert_fn, linspace, xq_trace,
    CharacteristicSamples, EnergyLattice, SampleKind, XqTrace, HOLDOUT_TOL, IMAGINARY_TOL,
    INVERSION_PRUNE,
};
pub use cumulants::{cumulants, cumulants_from_moments, CumulantSet};
pub use direct::{analytic_moments, build_pq_direct, RESIDUE_TOL};
pub use distribution::{
    default_merge_tol, Atom, Histogram, WorkQuasiDistribution, DUST, NORMALIZATION_TOL,
};
pub use utility::{jensen_check, JensenReport, UtilityFunction};
