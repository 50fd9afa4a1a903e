//! Space-time projection (STP) forecasting.
//!
//! An ensemble of `k` trajectories, each `n + m` snapshots of `p` degrees of
//! freedom, is decomposed with an ensemble space-time POD of the first `n`
//! snapshots (the hindcast). The resulting hindcast modes are extended over
//! the remaining `m` snapshots (the forecast) using the same ensemble
//! coefficients. A new trajectory is forecast by projecting its hindcast onto
//! the hindcast modes and expanding the extended modes with those
//! coefficients.
//!
//! The crate is `no_std` (it needs `alloc`). The default `std` feature only
//! enables runtime CPU feature detection in the matrix-multiply kernels.
//!
//! ```
//! use stp_core::prelude::*;
//!
//! let spec = RankLimitedSpec { k: 40, horizon: HorizonSpec::new(3, 2, 4).unwrap(), rank: 3, seed: 7 };
//! let data = gen_rank_limited(&spec).unwrap();
//! let (train, mean) = center_transient(data.ensemble).unwrap();
//! let model = fit(&train, 3, &WeightVector::uniform(4)).unwrap().with_mean(mean);
//! let prediction = model.predict(train.hindcast(0)).unwrap();
//! assert_eq!(prediction.forecast.len(), 2 * 4);
//! ```

#![no_std]
#![forbid(unsafe_op_in_unsafe_fn)]

extern crate alloc;

mod error;
pub mod linalg;
pub mod metrics;
pub mod preprocess;
pub mod stp;
pub mod synth;
pub mod types;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::linalg::{eig_symmetric, matmul, svd_oracle, DenseMatrix, EigResult};
    pub use crate::metrics::{error_report, rmse_step, spectrum_report, ErrorReport, SpectrumReport};
    pub use crate::preprocess::{
        center_stationary, center_transient, ensemble_mean, segment_series, segment_stationary,
        uncenter, SegmentationSpec, Segmented, SnapshotSeries,
    };
    pub use crate::stp::{fit, fit_basis, PodBasis, Prediction, StpModel};
    pub use crate::synth::{
        gen_decaying_transient, gen_linear_map, gen_rank_limited, gen_traveling_wave,
        DecayingTransientSpec, LinearMapKind, LinearMapSpec, RankLimitedSpec, TravelingWaveSpec,
    };
    pub use crate::types::{
        validate_ensemble, DataKind, Ensemble, Episode, HorizonSpec, MeanField, MeanKind,
        WeightVector,
    };
}
