//! Shared data model: horizons, episodes, ensembles, weights and mean fields.
//!
//! Every snapshot vector is stored snapshot-major: the `p` degrees of freedom
//! of snapshot 0, then snapshot 1, and so on. An ensemble keeps all of its
//! episodes in one contiguous buffer, episode after episode, so the buffer is
//! exactly the column-major prediction data matrix.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Hindcast length `n`, forecast length `m` (both in snapshots) and the
/// number of degrees of freedom `p` per snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HorizonSpec {
    n: usize,
    m: usize,
    p: usize,
}

impl HorizonSpec {
    pub fn new(n: usize, m: usize, p: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidHorizon("n must be at least 1"));
        }
        if m == 0 {
            return Err(Error::InvalidHorizon("m must be at least 1"));
        }
        if p == 0 {
            return Err(Error::InvalidHorizon("p must be at least 1"));
        }
        Ok(Self { n, m, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Snapshots in the prediction horizon, `n + m`.
    pub fn steps(&self) -> usize {
        self.n + self.m
    }

    /// Length of a stacked hindcast vector, `n * p`.
    pub fn hindcast_len(&self) -> usize {
        self.n * self.p
    }

    /// Length of a stacked forecast vector, `m * p`.
    pub fn forecast_len(&self) -> usize {
        self.m * self.p
    }

    /// Length of a full episode, `(n + m) * p`.
    pub fn episode_len(&self) -> usize {
        self.steps() * self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataKind {
    Transient,
    Stationary,
}

impl DataKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DataKind::Transient => "transient",
            DataKind::Stationary => "stationary",
        }
    }
}

/// One trajectory over the prediction horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub values: Vec<f64>,
    pub time_indices: Option<Vec<f64>>,
}

impl Episode {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            time_indices: None,
        }
    }

    pub fn with_times(values: Vec<f64>, times: Vec<f64>) -> Self {
        Self {
            values,
            time_indices: Some(times),
        }
    }
}

/// `k` episodes sharing one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    horizon: HorizonSpec,
    kind: DataKind,
    centered: bool,
    k: usize,
    data: Vec<f64>,
    time_indices: Option<Vec<f64>>,
}

impl Ensemble {
    /// Builds an ensemble from individual episodes and validates it.
    pub fn from_episodes(episodes: Vec<Episode>, horizon: HorizonSpec, kind: DataKind) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let len = horizon.episode_len();
        let times = episodes[0].time_indices.clone();
        let mut data = Vec::with_capacity(len * episodes.len());
        for (j, episode) in episodes.iter().enumerate() {
            if episode.values.len() != len {
                return Err(Error::DimensionMismatch {
                    what: "episode length",
                    expected: len,
                    actual: episode.values.len(),
                });
            }
            if episode.time_indices != times {
                return Err(Error::InconsistentTimes { episode: j });
            }
            data.extend_from_slice(&episode.values);
        }
        validate_ensemble(Self {
            horizon,
            kind,
            centered: false,
            k: episodes.len(),
            data,
            time_indices: times,
        })
    }

    /// Wraps a flat buffer of `k` concatenated episodes.
    pub fn from_flat(
        data: Vec<f64>,
        horizon: HorizonSpec,
        kind: DataKind,
        centered: bool,
        time_indices: Option<Vec<f64>>,
    ) -> Result<Self> {
        let len = horizon.episode_len();
        if data.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if data.len() % len != 0 {
            return Err(Error::DimensionMismatch {
                what: "ensemble buffer (multiple of episode length)",
                expected: (data.len() / len + 1) * len,
                actual: data.len(),
            });
        }
        validate_ensemble(Self {
            horizon,
            kind,
            centered,
            k: data.len() / len,
            data,
            time_indices,
        })
    }

    pub fn horizon(&self) -> HorizonSpec {
        self.horizon
    }

    pub fn kind(&self) -> DataKind {
        self.kind
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn time_indices(&self) -> Option<&[f64]> {
        self.time_indices.as_deref()
    }

    /// All episodes back to back; this is the column-major prediction matrix.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn episode(&self, j: usize) -> &[f64] {
        let len = self.horizon.episode_len();
        &self.data[j * len..(j + 1) * len]
    }

    pub fn hindcast(&self, j: usize) -> &[f64] {
        &self.episode(j)[..self.horizon.hindcast_len()]
    }

    pub fn forecast(&self, j: usize) -> &[f64] {
        &self.episode(j)[self.horizon.hindcast_len()..]
    }

    pub fn episodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.horizon.episode_len())
    }

    /// Copies episode `j` out as an owned [`Episode`].
    pub fn to_episode(&self, j: usize) -> Episode {
        Episode {
            values: self.episode(j).to_vec(),
            time_indices: self.time_indices.clone(),
        }
    }

    /// Keeps only the first `count` episodes.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let count = count.min(self.k);
        let mut out = self.clone();
        out.data.truncate(count * self.horizon.episode_len());
        out.k = count;
        Ok(out)
    }

    /// Declares the data as already mean-free (e.g. loaded from a file that
    /// was centered elsewhere).
    pub fn assume_centered(mut self) -> Self {
        self.centered = true;
        self
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn set_centered(&mut self, centered: bool) {
        self.centered = centered;
    }
}

/// Checks every ensemble invariant and hands the ensemble back unchanged.
pub fn validate_ensemble(ensemble: Ensemble) -> Result<Ensemble> {
    if ensemble.k == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let len = ensemble.horizon.episode_len();
    if ensemble.data.len() != ensemble.k * len {
        return Err(Error::DimensionMismatch {
            what: "ensemble buffer",
            expected: ensemble.k * len,
            actual: ensemble.data.len(),
        });
    }
    if let Some(times) = &ensemble.time_indices {
        if times.len() != ensemble.horizon.steps() {
            return Err(Error::DimensionMismatch {
                what: "time stamps",
                expected: ensemble.horizon.steps(),
                actual: times.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotoneTimes { episode: 0 });
        }
    }
    Ok(ensemble)
}

/// Diagonal inner-product weights, one per degree of freedom of a snapshot.
/// They are applied to every snapshot of a stacked vector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("weight vector is empty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and positive"));
        }
        Ok(Self(weights))
    }

    /// `W = I`.
    pub fn uniform(p: usize) -> Self {
        Self(alloc::vec![1.0; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_unit(&self) -> bool {
        self.0.iter().all(|&w| w == 1.0)
    }

    /// Weight of element `i` of a stacked vector.
    #[inline]
    pub fn at(&self, i: usize) -> f64 {
        self.0[i % self.0.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeanKind {
    /// One mean per time index and degree of freedom, length `(n + m) * p`.
    Ensemble,
    /// One mean per degree of freedom, length `p`, shared by all snapshots.
    Temporal,
}

impl MeanKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeanKind::Ensemble => "ensemble",
            MeanKind::Temporal => "temporal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    kind: MeanKind,
    values: Vec<f64>,
}

impl MeanField {
    pub fn ensemble(values: Vec<f64>, horizon: HorizonSpec) -> Result<Self> {
        if values.len() != horizon.episode_len() {
            return Err(Error::DimensionMismatch {
                what: "ensemble mean",
                expected: horizon.episode_len(),
                actual: values.len(),
            });
        }
        Ok(Self {
            kind: MeanKind::Ensemble,
            values,
        })
    }

    pub fn temporal(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "temporal mean",
                expected: 1,
                actual: 0,
            });
        }
        Ok(Self {
            kind: MeanKind::Temporal,
            values,
        })
    }

    pub fn kind(&self) -> MeanKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Checks that the field fits a horizon.
    pub fn check(&self, horizon: HorizonSpec) -> Result<()> {
        let expected = match self.kind {
            MeanKind::Ensemble => horizon.episode_len(),
            MeanKind::Temporal => horizon.p(),
        };
        if self.values.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "mean field",
                expected,
                actual: self.values.len(),
            });
        }
        Ok(())
    }

    /// Mean at stacked index `i`, counted from snapshot `first_step`.
    #[inline]
    pub fn at(&self, first_step: usize, p: usize, i: usize) -> f64 {
        match self.kind {
            MeanKind::Ensemble => self.values[first_step * p + i],
            MeanKind::Temporal => self.values[i % self.values.len()],
        }
    }

    /// Subtracts the mean from a stacked vector that starts at snapshot `first_step`.
    pub fn subtract_from(&self, first_step: usize, p: usize, v: &mut [f64]) {
        for (i, x) in v.iter_mut().enumerate() {
            *x -= self.at(first_step, p, i);
        }
    }

    pub fn add_to(&self, first_step: usize, p: usize, v: &mut [f64]) {
        for (i, x) in v.iter_mut().enumerate() {
            *x += self.at(first_step, p, i);
        }
    }
}
