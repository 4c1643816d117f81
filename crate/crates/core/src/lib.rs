//! Periodic Parseval wavelet frames built from two-parameter mask tables,
//! their nonstationary lifts to the real line, and the uncertainty constants
//! of both.

mod banded;
pub mod conditions;
pub mod error;
pub mod frame;
pub mod jet;
pub mod lift;
pub mod localization;
pub mod mask;
pub mod periodize;
pub mod product;
mod quadrature;
pub mod spline;

pub use error::{Error, Result};
pub use lift::{lift_mask, verify_mask_smoothness, LiftedMask, Side, SmoothnessReport};
pub use mask::{builtin_family, Family, KnotValues, PeriodicMaskTable, ThetaTable, ValidationReport};
pub use product::{eval_scaling_spectrum, product_bounds, LiftedFamily, MaskFamily, ProductBounds, SpectrumGrid};
pub use spline::{fit_phase_spline, PhaseSpline, SplineDump};
pub use frame::{
    build_nonstationary_level, build_periodic_level, check_uep_conditions, parseval_split, step_mask_lift,
    NonstationaryFrameLevel, PeriodicFrameLevel, UepReport,
};
pub use periodize::{periodize, roundtrip_check, CoefficientSeries, RoundTripReport};
pub use localization::{uc_breitenberger, uc_heisenberg, uc_pair_for_level, Gaussian, LevelWavelet, Spectrum, UcPair, UcbReport, UchReport};
pub use conditions::{check_divided_difference, check_weighted_sum, run_adjustment_experiment, ExperimentReport};
