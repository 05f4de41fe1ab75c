//! Empirical local-rate classification of residual histories.

/// Number of trailing history entries inspected for digit doubling.
const QUADRATIC_WINDOW: usize = 4;
const QUADRATIC_RATIO: f64 = 1.8;
/// Number of trailing entries used by the geometric fit.
const LINEAR_WINDOW: usize = 10;
const MIN_R_SQUARED: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LocalRate {
    Quadratic,
    /// Estimated contraction factor per iteration.
    Linear(f64),
    Undetermined,
}

/// Classifies a positive residual history.
///
/// Trailing zeros are dropped. The history is quadratic when the last four
/// entries are below one and each `log r` is at least 1.8 times the previous
/// one. Otherwise a least-squares line is fitted to `log r` over the last ten
/// entries; an R² of at least 0.9 gives `Linear(exp(slope))`.
pub fn estimate_local_rate(history: &[f64]) -> LocalRate {
    let end = history
        .iter()
        .rposition(|&r| r > 0.0)
        .map_or(0, |i| i + 1);
    let history = &history[..end];
    if history.len() < QUADRATIC_WINDOW || history.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return LocalRate::Undetermined;
    }
    let logs: Vec<f64> = history.iter().map(|r| r.ln()).collect();

    let tail = &logs[logs.len() - QUADRATIC_WINDOW..];
    if tail.iter().all(|&l| l < 0.0) && tail.windows(2).all(|w| w[1] / w[0] >= QUADRATIC_RATIO) {
        return LocalRate::Quadratic;
    }

    let window = &logs[logs.len().saturating_sub(LINEAR_WINDOW)..];
    let (slope, r2) = line_fit(window);
    if r2 >= MIN_R_SQUARED {
        LocalRate::Linear(slope.exp())
    } else {
        LocalRate::Undetermined
    }
}

/// Slope and R² of the least-squares fit of `ys` against `0, 1, 2, ...`.
/// A constant sequence is fitted exactly.
fn line_fit(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r2 = if syy <= 1e-24 * (1.0 + mean_y * mean_y) {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_doubling_is_quadratic() {
        assert_eq!(estimate_local_rate(&[1e-1, 1e-2, 1e-4, 1e-8]), LocalRate::Quadratic);
    }

    #[test]
    fn fast_start_then_doubling_is_quadratic() {
        assert_eq!(estimate_local_rate(&[0.38, 8.4e-3, 9.9e-6, 2.1e-11]), LocalRate::Quadratic);
    }

    #[test]
    fn geometric_is_linear() {
        match estimate_local_rate(&[1.0, 0.5, 0.25, 0.125, 0.0625]) {
            LocalRate::Linear(r) => assert!((r - 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trailing_zeros_are_truncated() {
        assert_eq!(
            estimate_local_rate(&[1e-1, 1e-2, 1e-4, 1e-8, 0.0, 0.0]),
            LocalRate::Quadratic
        );
    }

    #[test]
    fn short_or_noisy_histories_are_undetermined() {
        assert_eq!(estimate_local_rate(&[1.0, 0.1, 0.01]), LocalRate::Undetermined);
        assert_eq!(
            estimate_local_rate(&[1.0, 0.01, 1.0, 0.01, 1.0, 0.01]),
            LocalRate::Undetermined
        );
    }

    #[test]
    fn stalled_history_is_linear_with_unit_rate() {
        match estimate_local_rate(&[0.3; 6]) {
            LocalRate::Linear(r) => assert!((r - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
