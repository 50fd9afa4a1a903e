//! Forecast error and spectrum diagnostics.

use alloc::vec::Vec;

use crate::stp::{Prediction, StpModel};
use crate::types::Ensemble;
use crate::{Error, Result};

/// Root-mean-square difference of two snapshots, `‖u - u*‖₂ / √p`.
pub fn rmse_step(truth: &[f64], predicted: &[f64]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            what: "snapshot",
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = truth.iter().zip(predicted).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(sq / truth.len() as f64))
}

/// Per-step RMSE of every episode, with the ensemble mean and spread.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `per_episode[j][i]`: error of episode `j` at step `i` (0-based over `n + m`).
    pub per_episode: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (`k - 1` denominator); `None` for a single episode.
    pub std: Option<Vec<f64>>,
    /// First forecast step, i.e. `n`.
    pub forecast_start: usize,
}

impl ErrorReport {
    pub fn steps(&self) -> usize {
        self.mean.len()
    }

    pub fn episodes(&self) -> usize {
        self.per_episode.len()
    }

    /// Mean error over the hindcast steps.
    pub fn hindcast_mean(&self) -> f64 {
        average(&self.mean[..self.forecast_start])
    }

    /// Mean error over the forecast steps.
    pub fn forecast_mean(&self) -> f64 {
        average(&self.mean[self.forecast_start..])
    }

    /// Mean error at forecast lead `lead` (1-based).
    pub fn at_lead(&self, lead: usize) -> f64 {
        self.mean[self.forecast_start + lead - 1]
    }
}

fn average(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Compares predictions against the episodes they were made from.
///
/// Both sides must be on the same footing: centered truth with predictions
/// that carry no mean, or raw truth with mean-restored predictions.
pub fn error_report(truth: &Ensemble, predictions: &[Prediction]) -> Result<ErrorReport> {
    let k = truth.k();
    if predictions.len() != k {
        return Err(Error::DimensionMismatch {
            what: "prediction count",
            expected: k,
            actual: predictions.len(),
        });
    }
    let h = truth.horizon();
    let (n, p) = (h.n(), h.p());
    let mut per_episode = Vec::with_capacity(k);
    for (j, pred) in predictions.iter().enumerate() {
        if pred.mean_added == truth.is_centered() {
            return Err(Error::MeanMismatch);
        }
        if pred.hindcast.len() != h.hindcast_len() || pred.forecast.len() != h.forecast_len() {
            return Err(Error::DimensionMismatch {
                what: "prediction length",
                expected: h.episode_len(),
                actual: pred.hindcast.len() + pred.forecast.len(),
            });
        }
        let episode = truth.episode(j);
        let row = (0..h.steps())
            .map(|i| {
                let predicted = if i < n {
                    &pred.hindcast[i * p..(i + 1) * p]
                } else {
                    &pred.forecast[(i - n) * p..(i - n + 1) * p]
                };
                rmse_step(&episode[i * p..(i + 1) * p], predicted)
            })
            .collect::<Result<Vec<f64>>>()?;
        per_episode.push(row);
    }
    Ok(summarize(per_episode, n))
}

/// Column means and sample standard deviations of a per-episode error table.
pub fn summarize(per_episode: Vec<Vec<f64>>, forecast_start: usize) -> ErrorReport {
    let k = per_episode.len();
    let steps = per_episode.first().map_or(0, Vec::len);
    let mut mean = alloc::vec![0.0; steps];
    for row in &per_episode {
        for (acc, e) in mean.iter_mut().zip(row) {
            *acc += e;
        }
    }
    mean.iter_mut().for_each(|x| *x /= k as f64);
    let std = (k >= 2).then(|| {
        (0..steps)
            .map(|i| {
                let ss: f64 = per_episode.iter().map(|row| (row[i] - mean[i]) * (row[i] - mean[i])).sum();
                libm::sqrt(ss / (k - 1) as f64)
            })
            .collect()
    });
    ErrorReport {
        per_episode,
        mean,
        std,
        forecast_start,
    }
}

/// Eigenvalue spectrum and the fraction of total energy captured by the
/// leading modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub cumulative_fraction: Vec<f64>,
}

/// Spectrum of the retained modes relative to the model's total energy.
pub fn spectrum_report(model: &StpModel) -> SpectrumReport {
    spectrum_from(model.eigenvalues(), model.total_energy())
}

/// Spectrum of a list of eigenvalues relative to `total`.
pub fn spectrum_from(eigenvalues: &[f64], total: f64) -> SpectrumReport {
    let mut acc = 0.0;
    let cumulative_fraction = eigenvalues
        .iter()
        .map(|l| {
            acc += l;
            if total > 0.0 {
                acc / total
            } else {
                0.0
            }
        })
        .collect();
    SpectrumReport {
        eigenvalues: eigenvalues.to_vec(),
        cumulative_fraction,
    }
}

/// Number of leading modes needed to capture `fraction` of the energy.
pub fn modes_for_fraction(report: &SpectrumReport, fraction: f64) -> Option<usize> {
    report.cumulative_fraction.iter().position(|&c| c >= fraction).map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{DataKind, HorizonSpec};
    use alloc::vec;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse_step(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse_step(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        let e = rmse_step(&[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert!((e - 5.0 / core::f64::consts::SQRT_2).abs() < 1e-15);
        assert!(rmse_step(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn pred(h: Vec<f64>, f: Vec<f64>) -> Prediction {
        Prediction {
            coefficients: vec![],
            hindcast: h,
            forecast: f,
            mean_added: false,
        }
    }

    fn truth(data: Vec<f64>, n: usize, m: usize, p: usize) -> Ensemble {
        Ensemble::from_flat(data, HorizonSpec::new(n, m, p).unwrap(), DataKind::Transient, true, None).unwrap()
    }

    #[test]
    fn exact_predictions_give_zero_error() {
        let t = truth(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 1, 2, 1);
        let preds = vec![pred(vec![1.0], vec![2.0, 3.0]), pred(vec![4.0], vec![5.0, 6.0])];
        let r = error_report(&t, &preds).unwrap();
        assert_eq!(r.mean, vec![0.0; 3]);
        assert_eq!(r.std.unwrap(), vec![0.0; 3]);
        assert_eq!(r.forecast_start, 1);
    }

    #[test]
    fn two_point_spread() {
        let t = truth(vec![0.0; 4], 1, 1, 1);
        let preds = vec![pred(vec![1.0], vec![1.0]), pred(vec![3.0], vec![-3.0])];
        let r = error_report(&t, &preds).unwrap();
        assert_eq!(r.mean, vec![2.0, 2.0]);
        let s = r.std.unwrap();
        assert!((s[0] - core::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn single_episode_has_no_spread() {
        let t = truth(vec![0.0; 2], 1, 1, 1);
        let r = error_report(&t, &[pred(vec![1.0], vec![1.0])]).unwrap();
        assert!(r.std.is_none());
    }

    #[test]
    fn mismatches_are_rejected() {
        let t = truth(vec![0.0; 4], 1, 1, 1);
        assert!(error_report(&t, &[pred(vec![0.0], vec![0.0])]).is_err());
        let mut p = pred(vec![0.0], vec![0.0]);
        p.mean_added = true;
        assert_eq!(error_report(&t, &[p.clone(), p]).unwrap_err(), Error::MeanMismatch);
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum_from(&[1.0; 4], 4.0);
        assert_eq!(s.cumulative_fraction, vec![0.25, 0.5, 0.75, 1.0]);
        let s = spectrum_from(&[3.0, 1.0], 4.0);
        assert_eq!(s.cumulative_fraction, vec![0.75, 1.0]);
        assert_eq!(modes_for_fraction(&s, 0.7), Some(1));
        assert_eq!(modes_for_fraction(&s, 0.9), Some(2));
    }
}
