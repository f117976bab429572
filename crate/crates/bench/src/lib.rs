//! Shared fixtures for the criterion benchmarks.

use framedisc_core::discretizer::{select_samples, SampleRule, SamplingPlan};
use framedisc_core::{build_pou, uniform_covering, Covering, FrameModel, GaborParams, PouKind};

/// Gabor model on an `n x n` phase grid over signals of length `n`.
pub fn gabor_fixture(n: usize) -> FrameModel {
    FrameModel::gabor(GaborParams {
        n_time: n,
        n_freq: n,
        window_width: n as f64 / 4.0,
        signal_len: None,
    })
    .expect("valid Gabor parameters")
}

/// Width-2 partition of the phase grid.
pub fn pair_covering(model: &FrameModel) -> Covering {
    uniform_covering(model.space(), 2.0, 0.0).expect("grid admits width-2 windows")
}

/// Smooth model with a plan whose Neumann series is certified.
pub fn certified_plan(n: usize) -> (FrameModel, SamplingPlan) {
    let model = FrameModel::random_smooth(4, n, 3.0 * n as f64 / 128.0, 7).expect("valid smooth model");
    let cov = uniform_covering(model.space(), 2.0 / n as f64, 0.0).expect("grid admits pair windows");
    let pou = build_pou(&cov, model.space(), PouKind::Flat).expect("covering is admissible");
    let plan = select_samples(&cov, &pou, model.space(), SampleRule::Medoid).expect("sets are nonempty");
    (model, plan)
}
