//! Tessellation-localized transfer learning for nonparametric regression.
//!
//! A Nadaraya-Watson fit on a large source sample is carried over to a small
//! target sample through cellwise affine corrections on an axis-aligned
//! tessellation of `[0,1]^d`; the tessellation itself is chosen on held-out
//! target data.
//!
//! ```
//! use tl2_core::prelude::*;
//!
//! let spec = SyntheticSpec::new(1, 200, 40, TargetFn::Target1).with_seed(RngSeed::new(3, 0));
//! let source = gen_source(&spec).unwrap();
//! let target = gen_target(&spec).unwrap();
//! let cfg = PipelineConfig {
//!     schedule: AnnealSchedule { steps: 50, ..Default::default() },
//!     ..Default::default()
//! };
//! let run = run_tl2(source, &target, &cfg, RngSeed::new(3, 1)).unwrap();
//! let model = run.model().unwrap();
//! assert!(model.predict(&[0.3]).unwrap().is_finite());
//! ```

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod pipeline;
mod record;
pub mod rng;
pub mod selection;
pub mod source;
pub mod synth;
pub mod tessellation;
pub mod transfer;

pub use data::{split_target, Dataset, LabeledSample, Role};
pub use error::{Error, Result};
pub use kernel::{kernel_eval, Kernel};
pub use rng::{RngSeed, Stream};
pub use source::{bandwidth_rule_source, nw_fit, nw_predict, SourceBandwidth, SourceModel};
pub use tessellation::{Cell, Tessellation};
pub use transfer::{bandwidth_rule_transfer, fit_cell, fit_transfer, CellFit, Fallback, FitConfig, TransferModel};

pub mod prelude {
    pub use crate::data::{split_target, Dataset, LabeledSample, Role};
    pub use crate::diagnostics::{
        decompose_risk, error_reduction, mse_against_truth, rate_probe, ExperimentData, ExperimentResult, RateAxis,
    };
    pub use crate::error::{Error, Result};
    pub use crate::kernel::{kernel_eval, Kernel};
    pub use crate::pipeline::{run_tl2, PipelineConfig, Tl2Run};
    pub use crate::rng::{RngSeed, Stream};
    pub use crate::selection::{
        anneal_select, empirical_risk, mom_block_rule, mom_risk, select_over, AnnealSchedule, SelectionMethod,
        SelectionReport, TessellationSpace,
    };
    pub use crate::source::{bandwidth_rule_source, nw_fit, nw_predict, SourceBandwidth, SourceModel};
    pub use crate::synth::{gen_source, gen_target, Noise, NoiseConvention, SyntheticSpec, TargetFn};
    pub use crate::tessellation::{check_admissible, AdmissibilityConstants, Cell, Tessellation};
    pub use crate::transfer::{
        bandwidth_rule_transfer, fit_cell, fit_transfer, CellFit, Fallback, FitConfig, TransferBandwidth,
        TransferFitter, TransferModel,
    };
}
