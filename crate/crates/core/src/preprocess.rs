//! Mean removal and ensemble construction.
//!
//! Transient data is centered with the ensemble mean (one mean per time index).
//! Stationary data is centered with the temporal mean of a long series and then
//! cut into overlapping episodes.

use alloc::vec::Vec;

use crate::types::{DataKind, Ensemble, HorizonSpec, MeanField};
use crate::{Error, Result};

/// Per-time-index mean over the episodes of a transient ensemble.
pub fn ensemble_mean(ensemble: &Ensemble) -> Result<MeanField> {
    if ensemble.kind() != DataKind::Transient {
        return Err(Error::WrongKind { expected: "transient" });
    }
    let horizon = ensemble.horizon();
    let mut mean = alloc::vec![0.0; horizon.episode_len()];
    for episode in ensemble.episodes() {
        for (acc, x) in mean.iter_mut().zip(episode) {
            *acc += x;
        }
    }
    let inv = 1.0 / ensemble.k() as f64;
    mean.iter_mut().for_each(|x| *x *= inv);
    MeanField::ensemble(mean, horizon)
}

/// Subtracts the ensemble mean from every episode and returns it for later
/// re-addition to forecasts.
pub fn center_transient(mut ensemble: Ensemble) -> Result<(Ensemble, MeanField)> {
    if ensemble.is_centered() {
        return Err(Error::AlreadyCentered);
    }
    let mean = ensemble_mean(&ensemble)?;
    let len = ensemble.horizon().episode_len();
    for episode in ensemble.data_mut().chunks_exact_mut(len) {
        for (x, mu) in episode.iter_mut().zip(mean.values()) {
            *x -= mu;
        }
    }
    ensemble.set_centered(true);
    Ok((ensemble, mean))
}

/// Adds a stored mean back to every episode of a centered ensemble.
pub fn uncenter(mut ensemble: Ensemble, mean: &MeanField) -> Result<Ensemble> {
    if !ensemble.is_centered() {
        return Err(Error::InvalidParameter("ensemble is not centered".into()));
    }
    let horizon = ensemble.horizon();
    mean.check(horizon)?;
    for episode in ensemble.data_mut().chunks_exact_mut(horizon.episode_len()) {
        mean.add_to(0, horizon.p(), episode);
    }
    ensemble.set_centered(false);
    Ok(ensemble)
}

/// A single long record of snapshots, snapshot-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    p: usize,
    data: Vec<f64>,
    centered: bool,
}

impl SnapshotSeries {
    pub fn new(p: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_centering(p, data, false)
    }

    pub fn with_centering(p: usize, data: Vec<f64>, centered: bool) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidHorizon("p must be at least 1"));
        }
        if data.len() % p != 0 {
            return Err(Error::DimensionMismatch {
                what: "series buffer (multiple of p)",
                expected: (data.len() / p + 1) * p,
                actual: data.len(),
            });
        }
        Ok(Self { p, data, centered })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of snapshots.
    pub fn len(&self) -> usize {
        self.data.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn snapshot(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }
}

/// Subtracts the mean over all snapshots from each snapshot.
pub fn center_stationary(mut series: SnapshotSeries) -> Result<(SnapshotSeries, MeanField)> {
    if series.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, needed: 1 });
    }
    if series.centered {
        return Err(Error::AlreadyCentered);
    }
    let p = series.p;
    let mut mean = alloc::vec![0.0; p];
    for snap in series.data.chunks_exact(p) {
        for (acc, x) in mean.iter_mut().zip(snap) {
            *acc += x;
        }
    }
    let inv = 1.0 / series.len() as f64;
    mean.iter_mut().for_each(|x| *x *= inv);
    for snap in series.data.chunks_exact_mut(p) {
        for (x, mu) in snap.iter_mut().zip(&mean) {
            *x -= mu;
        }
    }
    series.centered = true;
    Ok((series, MeanField::temporal(mean)?))
}

/// How a stationary series is cut into overlapping episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationSpec {
    pub n: usize,
    pub m: usize,
    /// Start-to-start offset between consecutive episodes, in snapshots.
    pub stride: usize,
    /// Fraction of the episodes assigned to training.
    pub split_fraction: f64,
}

impl SegmentationSpec {
    pub fn new(n: usize, m: usize, stride: usize, split_fraction: f64) -> Result<Self> {
        let spec = Self {
            n,
            m,
            stride,
            split_fraction,
        };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        HorizonSpec::new(self.n, self.m, 1)?;
        if self.stride == 0 {
            return Err(Error::InvalidSegmentation("stride must be at least 1"));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidSegmentation("split fraction must lie strictly between 0 and 1"));
        }
        Ok(())
    }

    /// Number of episodes that fit in a series of `len` snapshots before splitting.
    pub fn episode_count(&self, len: usize) -> usize {
        episode_count(len, self.n + self.m, self.stride)
    }
}

fn episode_count(len: usize, steps: usize, stride: usize) -> usize {
    if len < steps {
        0
    } else {
        (len - steps) / stride + 1
    }
}

/// Training and testing ensembles cut from one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub train: Ensemble,
    /// `None` when no episode fits after the training block.
    pub test: Option<Ensemble>,
    /// First snapshot of every training episode.
    pub train_starts: Vec<usize>,
    pub test_starts: Vec<usize>,
}

/// Every episode of `n + m` snapshots starting at `0, stride, 2 * stride, ...`.
/// Returns the ensemble and the start index of each episode.
pub fn segment_series(
    series: &SnapshotSeries,
    n: usize,
    m: usize,
    stride: usize,
) -> Result<(Ensemble, Vec<usize>)> {
    let horizon = HorizonSpec::new(n, m, series.p)?;
    if stride == 0 {
        return Err(Error::InvalidSegmentation("stride must be at least 1"));
    }
    let count = episode_count(series.len(), horizon.steps(), stride);
    if count == 0 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            needed: horizon.steps(),
        });
    }
    let starts: Vec<usize> = (0..count).map(|j| j * stride).collect();
    Ok((cut(series, horizon, &starts)?, starts))
}

/// Cuts a stationary series into training and testing episodes.
///
/// All `K` episodes are enumerated first. The first `round(split_fraction * K)`
/// (at least one) become the training ensemble. Testing episodes are the
/// remaining ones that start after the last training episode has ended, so no
/// snapshot is shared between the two sets. For a 16000-snapshot series with
/// `n = 15`, `m = 20`, `stride = 10` and an 80% split this yields 1278
/// training and 316 testing episodes.
pub fn segment_stationary(series: &SnapshotSeries, spec: &SegmentationSpec) -> Result<Segmented> {
    spec.check()?;
    let horizon = HorizonSpec::new(spec.n, spec.m, series.p)?;
    let steps = horizon.steps();
    let total = spec.episode_count(series.len());
    if total == 0 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            needed: steps,
        });
    }
    let k_train = (libm::floor(spec.split_fraction * total as f64 + 0.5) as usize).clamp(1, total);
    let train_starts: Vec<usize> = (0..k_train).map(|j| j * spec.stride).collect();
    let train_end = train_starts[k_train - 1] + steps;
    let test_starts: Vec<usize> = (k_train..total)
        .map(|j| j * spec.stride)
        .filter(|&s| s >= train_end)
        .collect();
    let train = cut(series, horizon, &train_starts)?;
    let test = if test_starts.is_empty() {
        None
    } else {
        Some(cut(series, horizon, &test_starts)?)
    };
    Ok(Segmented {
        train,
        test,
        train_starts,
        test_starts,
    })
}

fn cut(series: &SnapshotSeries, horizon: HorizonSpec, starts: &[usize]) -> Result<Ensemble> {
    let p = series.p;
    let len = horizon.episode_len();
    let mut data = Vec::with_capacity(starts.len() * len);
    for &s in starts {
        data.extend_from_slice(&series.data[s * p..s * p + len]);
    }
    Ensemble::from_flat(data, horizon, DataKind::Stationary, series.centered, None)
}
