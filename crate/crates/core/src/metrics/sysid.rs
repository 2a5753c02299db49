use super::MetricError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Squared,
    Absolute,
}

impl Loss {
    fn eval(self, e: f64) -> f64 {
        match self {
            Loss::Squared => e * e,
            Loss::Absolute => e.abs(),
        }
    }
}

fn mean_loss(y: &[f64], y_hat: &[f64], loss: Loss) -> Result<f64, MetricError> {
    if y.len() != y_hat.len() {
        return Err(MetricError::Length(y.len(), y_hat.len()));
    }
    if y.is_empty() {
        return Err(MetricError::Invalid("empty data".into()));
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| loss.eval(a - b)).sum::<f64>() / y.len() as f64)
}

/// Coefficient of determination, clamped at zero for fits worse than the mean.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricError> {
    if y.len() != y_hat.len() {
        return Err(MetricError::Length(y.len(), y_hat.len()));
    }
    if y.len() < 2 {
        return Err(MetricError::Invalid("need at least two samples".into()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::DegenerateData);
    }
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((1.0 - ss_res / ss_tot).max(0.0))
}

/// Final prediction error `(1 + d/N) / (1 - d/N) * mean squared residual`.
pub fn fpe(y: &[f64], y_hat: &[f64], model_dim: usize) -> Result<f64, MetricError> {
    let n = y.len();
    if model_dim >= n {
        return Err(MetricError::Dimension { dim: model_dim, n });
    }
    let r = model_dim as f64 / n as f64;
    Ok((1.0 + r) / (1.0 - r) * mean_loss(y, y_hat, Loss::Squared)?)
}

/// `(1 + U_N) * (1/N) sum loss(y - y_hat)`.
pub fn cost_criterion(y: &[f64], y_hat: &[f64], penalty: f64, loss: Loss) -> Result<f64, MetricError> {
    if !(penalty >= 0.0) {
        return Err(MetricError::Invalid(format!("penalty {penalty} must be >= 0")));
    }
    Ok((1.0 + penalty) * mean_loss(y, y_hat, loss)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r_squared_examples() {
        let y = [1.0, 2.0, 4.0, 3.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&y, &[2.5; 4]).unwrap(), 0.0);
        assert_eq!(r_squared(&y, &[10.0, -3.0, 0.0, 9.0]).unwrap(), 0.0);
        assert_eq!(r_squared(&[1.0, 1.0], &[1.0, 2.0]), Err(MetricError::DegenerateData));
    }

    #[test]
    fn fpe_examples() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let yh = [1.5, 2.0, 2.0, 4.0];
        let mse = (0.25 + 1.0) / 4.0;
        assert!((fpe(&y, &yh, 0).unwrap() - mse).abs() < 1e-15);
        assert!((fpe(&y, &yh, 2).unwrap() - 3.0 * mse).abs() < 1e-15);
        assert!(matches!(fpe(&y, &yh, 4), Err(MetricError::Dimension { dim: 4, n: 4 })));
        let mut last = 0.0;
        for d in 0..4 {
            let v = fpe(&y, &yh, d).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn cost_criterion_examples() {
        let y = [0.0, 0.0];
        let yh = [1.0, -1.0];
        assert_eq!(cost_criterion(&y, &yh, 0.0, Loss::Squared).unwrap(), 1.0);
        assert_eq!(cost_criterion(&y, &yh, 0.5, Loss::Absolute).unwrap(), 1.5);
    }

    proptest! {
        #[test]
        fn cost_criterion_reproduces_fpe(
            data in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..40),
            frac in 0.0f64..1.0,
        ) {
            let (y, yh): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
            let n = y.len();
            let d = ((frac * n as f64) as usize).min(n - 1);
            let r = d as f64 / n as f64;
            // (1 + U) = (1 + r) / (1 - r)
            let u = 2.0 * r / (1.0 - r);
            let a = fpe(&y, &yh, d).unwrap();
            let b = cost_criterion(&y, &yh, u, Loss::Squared).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }

        #[test]
        fn r_squared_in_unit_interval(
            data in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..40),
        ) {
            let (y, yh): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
            if let Ok(v) = r_squared(&y, &yh) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
