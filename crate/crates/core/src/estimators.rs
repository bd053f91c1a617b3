//! Descriptive baselines and coverage-based species estimators over error
//! fingerprints.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::votes::{FStatistics, TallyState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorOutput {
    /// Estimated total number of species.
    pub total_errors_hat: f64,
    /// `total_errors_hat` minus the estimator's own observed count, floored at 0.
    pub remaining_hat: f64,
    pub coverage_hat: f64,
    pub cv2_hat: f64,
    /// Coverage estimate hit zero and the total was capped at the universe size.
    pub low_coverage: bool,
}

/// Items marked dirty by at least one worker.
pub fn nominal(t: &TallyState) -> u64 {
    t.items().iter().filter(|i| i.pos > 0).count() as u64
}

/// Items with a strict dirty majority. Ties count as clean.
pub fn majority(t: &TallyState) -> u64 {
    t.items().iter().filter(|i| i.pos > i.neg).count() as u64
}

/// Scales the error count of a uniform sample to the whole data set.
/// Returns `(total, remaining)`.
pub fn extrapolate(sample_fraction: f64, sample_errors: u64) -> Result<(f64, f64)> {
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::domain(format!(
            "sample fraction {sample_fraction} outside (0, 1]"
        )));
    }
    let observed = sample_errors as f64;
    let total = observed / sample_fraction;
    Ok((total, total - observed))
}

/// Good-Turing sample coverage `1 − f₁/n`, with `n = 0` defined as full coverage.
pub fn coverage(f: &FStatistics) -> f64 {
    if f.n() == 0 {
        return 1.0;
    }
    (1.0 - f.singletons() as f64 / f.n() as f64).clamp(0.0, 1.0)
}

/// Squared coefficient of variation of detection probabilities, floored at 0.
pub fn cv2(f: &FStatistics, d_noskew: f64) -> f64 {
    let n = f.n() as f64;
    if f.n() < 2 {
        return 0.0;
    }
    (d_noskew * f.second_factorial_moment() / (n * (n - 1.0)) - 1.0).max(0.0)
}

/// Shared coverage-plus-skew form: `(c + f₁·γ̂²) / Ĉ`.
///
/// `observed` is the distinct count placed in the numerator; the fingerprint
/// supplies `f₁`, `n` and the moments. When coverage is zero the estimate is
/// pinned to `cap` and flagged.
pub(crate) fn coverage_estimate(observed: f64, f: &FStatistics, cap: f64) -> EstimatorOutput {
    let c_hat = coverage(f);
    if f.n() == 0 {
        return EstimatorOutput {
            total_errors_hat: observed,
            remaining_hat: 0.0,
            coverage_hat: c_hat,
            cv2_hat: 0.0,
            low_coverage: false,
        };
    }
    if c_hat <= 0.0 {
        let total = cap.max(observed);
        return EstimatorOutput {
            total_errors_hat: total,
            remaining_hat: (total - observed).max(0.0),
            coverage_hat: 0.0,
            cv2_hat: 0.0,
            low_coverage: true,
        };
    }
    let gamma2 = cv2(f, observed / c_hat);
    let f1 = f.singletons() as f64;
    let total = (observed + f1 * gamma2) / c_hat;
    EstimatorOutput {
        total_errors_hat: total,
        remaining_hat: (total - observed).max(0.0),
        coverage_hat: c_hat,
        cv2_hat: gamma2,
        low_coverage: false,
    }
}

/// Chao92 over an error fingerprint built by
/// [`error_fstats`](crate::votes::error_fstats), so `c` is the nominal count.
/// `universe` caps the estimate when every observation is a singleton.
pub fn chao92(f: &FStatistics, universe: usize) -> EstimatorOutput {
    coverage_estimate(f.c() as f64, f, universe as f64)
}

/// Fingerprint shifted by `s`: `f'_j = f_{j+s}` and
/// `n^{+,s} = n⁺ − Σ_{i=1..s} f_i`. `None` when the adjusted size is not positive.
pub fn shift_fstats(f: &FStatistics, shift: u64) -> Option<FStatistics> {
    let dropped: u64 = (1..=shift).map(|i| f.f(i)).sum();
    let n_shift = f.n().checked_sub(dropped).filter(|&n| n > 0)?;
    let shifted = FStatistics::from_freq(
        f.freq()
            .iter()
            .filter(|(&j, _)| j > shift)
            .map(|(&j, &fj)| (j - shift, fj)),
    );
    Some(shifted.with_sample_size(n_shift))
}

/// vChao92: majority count in the numerator, frequencies shifted by `shift`.
/// The skew term is computed on the shifted fingerprint.
pub fn vchao92(
    t: &TallyState,
    f: &FStatistics,
    shift: u64,
    universe: usize,
) -> Result<EstimatorOutput> {
    let shifted =
        shift_fstats(f, shift).ok_or(Error::InsufficientData("shifted sample size is not positive"))?;
    Ok(coverage_estimate(
        majority(t) as f64,
        &shifted,
        universe as f64,
    ))
}
