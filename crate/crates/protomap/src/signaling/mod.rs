//! Constellations, labelings, input distributions, distribution matching,
//! shaped frame assembly, soft demapping and information-rate functionals.

mod ccdm;
mod constellation;
mod pas;
mod rates;

pub use ccdm::{
    ccdm_decode, ccdm_encode, quantize_composition, solve_nu, Composition,
};
pub use constellation::{
    brgc_codes, Constellation, DistributionMode, InputDistribution, Signaling,
};
pub use pas::{
    pas_assemble, pas_spectral_efficiency, uniform_spectral_efficiency, PasFrame, PasLayout,
};
pub use rates::{
    bmd_limit_snr_db, bmd_rate, capacity_awgn, cond_entropy_bit, demap_llr,
    reliability_ordering, required_snr_uncertainty, uncertainty_llr,
};

use thiserror::Error as ThisError;

#[derive(Debug, Clone, ThisError)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matcher input has {got} bits, at most {max} supported")]
    DmInputTooLong { got: usize, max: usize },
    #[error("sequence does not match the declared composition")]
    DmCompositionMismatch,
    #[error("sequence lies outside the matcher image")]
    DmSequenceOutsideImage,
    #[error("matcher rate {0} is unreachable for this constellation")]
    DmRateUnreachable(f64),
    #[error("shaped frame capacity mismatch: {0}")]
    PasCapacityMismatch(String),
}
