//! FIR Wiener one-step linear predictor, the baseline the game is compared against.

use rand::Rng;

use crate::error::{Error, Result};
use crate::sign::{decide, sgn};

#[derive(Debug, Clone, PartialEq)]
pub struct WienerFilter {
    weights: Vec<f64>,
    mean: f64,
    fitted: bool,
}

impl WienerFilter {
    /// Filter with fixed weights on a zero-mean series.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        assert!(!weights.is_empty(), "filter order must be at least 1");
        WienerFilter {
            weights,
            mean: 0.0,
            fitted: true,
        }
    }

    /// An order-`order` filter with no weights yet.
    pub fn unfitted(order: usize) -> Self {
        WienerFilter {
            weights: vec![0.0; order],
            mean: 0.0,
            fitted: false,
        }
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    /// Linear one-step forecast from `recent` (most recent first).
    pub fn forecast(&self, recent: &[f64]) -> f64 {
        assert!(self.fitted, "Wiener filter used before fitting");
        assert_eq!(recent.len(), self.order(), "need exactly `order` recent values");
        self.mean
            + self
                .weights
                .iter()
                .zip(recent)
                .map(|(w, y)| w * (y - self.mean))
                .sum::<f64>()
    }
}

/// Biased autocovariance estimates at lags `0..=max_lag`.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    (0..=max_lag)
        .map(|lag| {
            series[lag..]
                .iter()
                .zip(series)
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n`. Returns `None` when a pivot vanishes.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    let tiny = scale * 1e-12;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[pivot * n + col].abs() <= tiny {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    Some(x)
}

/// Fits the order-`order` one-step predictor from the normal equations
/// `R w = r`, `R[i][j] = c(|i-j|)`, `r[i] = c(i+1)`.
pub fn fit_wiener(series: &[f64], order: usize) -> Result<WienerFilter> {
    if order == 0 {
        return Err(Error::config("order", "filter order must be at least 1"));
    }
    if series.len() < 10 * order {
        return Err(Error::InsufficientData(format!(
            "{} samples for an order-{order} filter, need at least {}",
            series.len(),
            10 * order
        )));
    }
    let c = autocovariance(series, order);
    let mut r = vec![0.0; order * order];
    for i in 0..order {
        for j in 0..order {
            r[i * order + j] = c[i.abs_diff(j)];
        }
    }
    let rhs = c[1..=order].to_vec();
    let weights = solve_dense(r, rhs).ok_or_else(|| {
        Error::Degenerate("autocovariance matrix is singular (constant or degenerate series)".into())
    })?;
    Ok(WienerFilter {
        weights,
        mean: series.iter().sum::<f64>() / series.len() as f64,
        fitted: true,
    })
}

/// Sign of the linear forecast; an exact zero is a coin flip.
pub fn predict_sign_wiener<R: Rng + ?Sized>(f: &WienerFilter, recent: &[f64], rng: &mut R) -> i8 {
    decide(f.forecast(recent), rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerEvaluation {
    pub filter: WienerFilter,
    pub psi: f64,
    pub scored: usize,
}

/// Fits on the first half of `series` and returns the sign hit rate of
/// one-step forecasts over the second half. Zero samples are not scored.
pub fn evaluate_wiener<R: Rng + ?Sized>(
    series: &[f64],
    order: usize,
    rng: &mut R,
) -> Result<WienerEvaluation> {
    let split = series.len() / 2;
    let filter = fit_wiener(&series[..split], order)?;
    let mut recent = vec![0.0; order];
    let mut hits = 0usize;
    let mut scored = 0usize;
    for t in split.max(order)..series.len() {
        for (i, r) in recent.iter_mut().enumerate() {
            *r = series[t - 1 - i];
        }
        let realized = sgn(series[t]);
        if realized == 0 {
            continue;
        }
        scored += 1;
        if predict_sign_wiener(&filter, &recent, rng) == realized {
            hits += 1;
        }
    }
    if scored == 0 {
        return Err(Error::Degenerate("no nonzero samples in the test half".into()));
    }
    Ok(WienerEvaluation {
        filter,
        psi: hits as f64 / scored as f64,
        scored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ArProcess, IidNoise, SignalSource, BENCHMARK_AR3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recovers_ar3_coefficients() {
        let xs = ArProcess::benchmark(21).generate(100_000);
        let f = fit_wiener(&xs, 3).unwrap();
        for (w, c) in f.weights().iter().zip(BENCHMARK_AR3) {
            assert!((w - c).abs() < 0.05, "w={w} c={c}");
        }
    }

    #[test]
    fn white_noise_weight_near_zero() {
        let mut src = IidNoise::new(4);
        let xs: Vec<f64> = (0..20_000).map(|_| src.next_sample().unwrap()).collect();
        let f = fit_wiener(&xs, 1).unwrap();
        assert!(f.weights()[0].abs() < 0.05);
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert!(matches!(fit_wiener(&[3.0; 100], 2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(matches!(
            fit_wiener(&[1.0, 2.0, 3.0], 1),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn sign_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = WienerFilter::from_weights(vec![-0.6]);
        assert_eq!(predict_sign_wiener(&f, &[2.0], &mut rng), -1);

        let f = WienerFilter::from_weights(vec![0.5]);
        let ups = (0..2000)
            .filter(|_| predict_sign_wiener(&f, &[0.0], &mut rng) == 1)
            .count();
        assert!(ups > 800 && ups < 1200, "ups={ups}");
    }

    #[test]
    #[should_panic]
    fn unfitted_filter_panics() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        predict_sign_wiener(&WienerFilter::unfitted(2), &[1.0, 2.0], &mut rng);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let x = solve_dense(vec![0.0, 1.0, 1.0, 0.0], vec![2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
        assert!(solve_dense(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn scaling_leaves_signs_unchanged() {
        let xs = ArProcess::benchmark(5).generate(2000);
        let scaled: Vec<f64> = xs.iter().map(|x| x * 37.5).collect();
        let a = fit_wiener(&xs, 3).unwrap();
        let b = fit_wiener(&scaled, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 3..xs.len() {
            let ra = [xs[t - 1], xs[t - 2], xs[t - 3]];
            let rb = [scaled[t - 1], scaled[t - 2], scaled[t - 3]];
            assert_eq!(
                predict_sign_wiener(&a, &ra, &mut rng),
                predict_sign_wiener(&b, &rb, &mut rng)
            );
        }
    }
}
