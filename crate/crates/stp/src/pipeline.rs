//! Fitting, evaluation and parameter sweeps on top of the core routines.

use rayon::prelude::*;
use stp_core::metrics::{error_report, spectrum_from, ErrorReport, SpectrumReport};
use stp_core::preprocess::{center_stationary, center_transient, segment_stationary, SegmentationSpec, SnapshotSeries};
use stp_core::stp::{fit_basis, StpModel};
use stp_core::types::{DataKind, Ensemble, HorizonSpec, MeanField, WeightVector};
use stp_core::{Error, Result};

/// Centered training data, optional centered test data, and the mean that
/// was removed (if any).
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Ensemble,
    pub test: Option<Ensemble>,
    pub mean: Option<MeanField>,
}

/// Centers a series with its temporal mean (unless already centered) and
/// cuts it into training and testing episodes.
pub fn prepare_series(series: SnapshotSeries, spec: &SegmentationSpec) -> Result<Prepared> {
    let (series, mean) = if series.is_centered() {
        (series, None)
    } else {
        let (s, mean) = center_stationary(series)?;
        (s, Some(mean))
    };
    let seg = segment_stationary(&series, spec)?;
    Ok(Prepared {
        train: seg.train,
        test: seg.test,
        mean,
    })
}

/// Centers a training ensemble: transient data with the ensemble mean,
/// stationary data with the mean over all of its snapshots.
pub fn prepare_ensemble(train: Ensemble) -> Result<Prepared> {
    if train.is_centered() {
        return Ok(Prepared {
            train,
            test: None,
            mean: None,
        });
    }
    let (train, mean) = match train.kind() {
        DataKind::Transient => center_transient(train)?,
        DataKind::Stationary => center_temporal(train)?,
    };
    Ok(Prepared {
        train,
        test: None,
        mean: Some(mean),
    })
}

fn center_temporal(ensemble: Ensemble) -> Result<(Ensemble, MeanField)> {
    let h = ensemble.horizon();
    let times = ensemble.time_indices().map(<[f64]>::to_vec);
    let kind = ensemble.kind();
    let series = SnapshotSeries::new(h.p(), ensemble.into_data())?;
    let (series, mean) = center_stationary(series)?;
    let centered = Ensemble::from_flat(series.data().to_vec(), h, kind, true, times)?;
    Ok((centered, mean))
}

/// Fits a model and returns it with the spectrum of every eigenvalue of the
/// hindcast correlation matrix.
pub fn fit_model(
    train: &Ensemble,
    r: usize,
    w: &WeightVector,
    mean: Option<MeanField>,
) -> Result<(StpModel, SpectrumReport)> {
    if r == 0 || r > train.k() {
        return Err(Error::RankOutOfRange { rank: r, max: train.k() });
    }
    let basis = fit_basis(train, w)?;
    let spectrum = spectrum_from(basis.eigenvalues(), basis.total_energy());
    let mut model = basis.extend(train, r)?;
    if let Some(mean) = mean {
        model = model.try_with_mean(mean)?;
    }
    Ok((model, spectrum))
}

/// Forecasts every test episode from its hindcast and scores it against the
/// truth. Raw test data is centered with the model mean first.
pub fn evaluate(model: &StpModel, test: Ensemble) -> Result<ErrorReport> {
    let h = test.horizon();
    if h != model.horizon() {
        return Err(Error::DimensionMismatch {
            what: "episode length",
            expected: model.horizon().episode_len(),
            actual: h.episode_len(),
        });
    }
    let test = if test.is_centered() { test } else { model.center_ensemble(test)? };
    let predictions = model.predict_ensemble(&test)?;
    error_report(&test, &predictions)
}

/// Keeps the first `n + m` snapshots of every episode, relabelled as `n`
/// hindcast and `m` forecast steps.
pub fn rewindow(ensemble: &Ensemble, n: usize, m: usize) -> Result<Ensemble> {
    let h = ensemble.horizon();
    let target = HorizonSpec::new(n, m, h.p())?;
    if target.steps() > h.steps() {
        return Err(Error::InvalidParameter(format!(
            "n + m = {} exceeds the {} steps per episode",
            target.steps(),
            h.steps()
        )));
    }
    let keep = target.episode_len();
    let mut data = Vec::with_capacity(ensemble.k() * keep);
    for episode in ensemble.episodes() {
        data.extend_from_slice(&episode[..keep]);
    }
    let times = ensemble.time_indices().map(|t| t[..target.steps()].to_vec());
    Ensemble::from_flat(data, target, ensemble.kind(), ensemble.is_centered(), times)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Hindcast,
    Rank,
    Ensemble,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Hindcast => "n",
            Axis::Rank => "r",
            Axis::Ensemble => "k",
        }
    }
}

/// Data a sweep draws its episodes from.
#[derive(Debug, Clone)]
pub enum SweepSource {
    /// A long series, re-segmented for every hindcast length.
    Series {
        series: SnapshotSeries,
        stride: usize,
        split_fraction: f64,
    },
    /// Fixed training and testing ensembles, re-windowed for every hindcast length.
    Ensembles { train: Ensemble, test: Ensemble },
}

/// Values held fixed while one axis varies.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub weights: Option<WeightVector>,
    /// In hindcast sweeps keep `n + m` fixed instead of `m`.
    pub hold_total: bool,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: usize,
    pub n: usize,
    pub m: usize,
    pub k_train: usize,
    pub rank: usize,
    pub report: ErrorReport,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub axis: Axis,
    pub points: Vec<SweepPoint>,
}

/// Smallest mean error at one forecast lead across a hindcast sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadMinimum {
    pub lead: usize,
    pub error: f64,
    /// Hindcast length attaining it; the smallest on ties.
    pub n: usize,
}

impl Sweep {
    /// Per-lead minimum over the grid. Only meaningful for hindcast sweeps.
    pub fn lead_minima(&self) -> Vec<LeadMinimum> {
        let max_m = self.points.iter().map(|p| p.m).max().unwrap_or(0);
        (1..=max_m)
            .filter_map(|lead| {
                self.points
                    .iter()
                    .filter(|p| p.m >= lead)
                    .map(|p| (p.report.at_lead(lead), p.n))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .map(|(error, n)| LeadMinimum { lead, error, n })
            })
            .collect()
    }
}

/// Runs one fit-and-evaluate per grid value, in parallel. Rank sweeps reuse a
/// single decomposition; ensemble-size sweeps train on the first `k` episodes
/// with rank `min(r, k)`.
pub fn run_sweep(source: &SweepSource, settings: &SweepSettings, axis: Axis, grid: &[usize]) -> Result<Sweep> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let series_centered = match source {
        SweepSource::Series { series, .. } if !series.is_centered() => {
            Some(center_stationary(series.clone())?.0)
        }
        _ => None,
    };
    let setup = |n: usize, m: usize| -> Result<Prepared> {
        match source {
            SweepSource::Series {
                series,
                stride,
                split_fraction,
            } => {
                let spec = SegmentationSpec::new(n, m, *stride, *split_fraction)?;
                let prepared = prepare_series(series_centered.clone().unwrap_or_else(|| series.clone()), &spec)?;
                if prepared.test.is_none() {
                    return Err(Error::InvalidParameter("series too short for a test set".into()));
                }
                Ok(prepared)
            }
            SweepSource::Ensembles { train, test } => {
                let (train, test) = if train.horizon().n() == n && train.horizon().m() == m {
                    (train.clone(), test.clone())
                } else {
                    (rewindow(train, n, m)?, rewindow(test, n, m)?)
                };
                let prepared = prepare_ensemble(train)?;
                Ok(Prepared {
                    test: Some(test),
                    ..prepared
                })
            }
        }
    };
    let weights = |p: usize| settings.weights.clone().unwrap_or_else(|| WeightVector::uniform(p));
    let point = |value: usize, n: usize, m: usize, model: &StpModel, test: Ensemble| -> Result<SweepPoint> {
        Ok(SweepPoint {
            value,
            n,
            m,
            k_train: model.k_train(),
            rank: model.rank(),
            report: evaluate(model, test)?,
        })
    };

    let points = match axis {
        Axis::Hindcast => grid
            .par_iter()
            .map(|&n| {
                let m = if settings.hold_total {
                    (settings.n + settings.m).checked_sub(n).filter(|&m| m > 0).ok_or_else(|| {
                        Error::InvalidParameter(format!("n = {n} leaves no forecast steps"))
                    })?
                } else {
                    settings.m
                };
                let prepared = setup(n, m)?;
                let w = weights(prepared.train.horizon().p());
                let r = settings.r.min(prepared.train.k());
                let (model, _) = fit_model(&prepared.train, r, &w, prepared.mean)?;
                point(n, n, m, &model, prepared.test.expect("test set checked"))
            })
            .collect::<Result<Vec<_>>>()?,
        Axis::Rank => {
            let prepared = setup(settings.n, settings.m)?;
            let w = weights(prepared.train.horizon().p());
            let top = *grid.iter().max().expect("non-empty");
            let (full, _) = fit_model(&prepared.train, top, &w, prepared.mean)?;
            let test = prepared.test.expect("test set checked");
            grid.par_iter()
                .map(|&r| point(r, settings.n, settings.m, &full.truncated(r)?, test.clone()))
                .collect::<Result<Vec<_>>>()?
        }
        Axis::Ensemble => {
            let base = setup(settings.n, settings.m)?;
            let test = base.test.clone().expect("test set checked");
            // Raw ensembles are re-centered per subset; series data was centered up front.
            let raw_train = match source {
                SweepSource::Ensembles { train, .. } if !train.is_centered() => Some(train),
                _ => None,
            };
            grid.par_iter()
                .map(|&k| {
                    let (train, mean) = match raw_train {
                        Some(raw) => {
                            let p = prepare_ensemble(raw.truncated(k)?)?;
                            (p.train, p.mean)
                        }
                        None => (base.train.truncated(k)?, base.mean.clone()),
                    };
                    let w = weights(train.horizon().p());
                    let (model, _) = fit_model(&train, settings.r.min(k), &w, mean)?;
                    point(k, settings.n, settings.m, &model, test.clone())
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(Sweep { axis, points })
}
