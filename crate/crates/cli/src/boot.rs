//! Parallel bootstrap execution. Resamples are pure functions of
//! `(seed, index)`, so computing them on a thread pool and collecting in
//! index order is bit-identical to the sequential loop in the core crate.

use rayon::prelude::*;

use noisydet_core::froc::{
    percentile, BootstrapCase, BootstrapConfig, BootstrapPlan, BootstrapSummary, Detection,
};
use noisydet_core::noise::Annotation;
use noisydet_core::Result;

/// Parallel equivalent of `noisydet_core::froc::bootstrap_afroc`.
pub fn bootstrap_afroc_parallel(
    detections: &[Detection],
    ground_truths: &[Annotation],
    cases: &[BootstrapCase],
    config: BootstrapConfig,
) -> Result<BootstrapSummary> {
    let plan = BootstrapPlan::new(detections, ground_truths, cases, config)?;
    let afrocs: Vec<f64> = (0..plan.n_resamples())
        .into_par_iter()
        .map(|i| plan.resample_afroc(i))
        .collect();
    Ok(plan.summarize(&afrocs))
}

/// Pointwise 2.5/97.5 percentile envelope of the resampled curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub fp: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Sensitivity confidence band over a fixed FP/image grid, from the same
/// resample sequence as the AFROC bootstrap.
pub fn sensitivity_band(
    detections: &[Detection],
    ground_truths: &[Annotation],
    cases: &[BootstrapCase],
    config: BootstrapConfig,
    grid: &[f64],
) -> Result<Vec<BandPoint>> {
    let plan = BootstrapPlan::new(detections, ground_truths, cases, config)?;
    let curves: Vec<_> = (0..plan.n_resamples())
        .into_par_iter()
        .map(|i| plan.resample_curve(i))
        .collect();
    Ok(grid
        .iter()
        .map(|&fp| {
            let mut sens: Vec<f64> = curves.iter().map(|c| c.sensitivity_at(fp)).collect();
            sens.sort_unstable_by(|a, b| a.partial_cmp(b).expect("sensitivities are finite"));
            BandPoint {
                fp,
                lo: percentile(&sens, 2.5),
                hi: percentile(&sens, 97.5),
            }
        })
        .collect())
}
