//! Space-time projection: ensemble space-time POD of the hindcast data,
//! extended (STP) modes, and forecasts by projection.
//!
//! With `Q-` the `np x k` hindcast matrix, `Q±` the `(n+m)p x k` prediction
//! matrix and `W` the diagonal weights:
//!
//! ```text
//! C-   = Q-ᵀ W Q- / k,          C- Ψ = Ψ Λ
//! Φ-   = Q- Ψ Λ^(-1/2) / √k     (hindcast modes, Φ-ᵀ W Φ- = I)
//! Φ±*  = Q± Ψ Λ^(-1/2) / √k     (STP modes, top np rows equal Φ-)
//! a*   = Φ-ᵀ W q_new
//! q±*  = Φ±* a*
//! ```

use alloc::vec::Vec;

use crate::linalg::{eig_symmetric, gemm, DenseMatrix, EigResult, MatView};
use crate::types::{Ensemble, HorizonSpec, MeanField, WeightVector};
use crate::{Error, Result};

/// Modes with `λ <= EIGENVALUE_FLOOR * λ_1` are dropped before `Λ^(-1/2)`.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Rows per block when weights have to be materialised.
const ROW_BLOCK: usize = 512;

fn require_centered(ensemble: &Ensemble) -> Result<()> {
    if ensemble.is_centered() {
        Ok(())
    } else {
        Err(Error::NotCentered)
    }
}

fn hindcast_view(ensemble: &Ensemble) -> Result<MatView<'_>> {
    let h = ensemble.horizon();
    MatView::col_major(ensemble.data(), h.hindcast_len(), ensemble.k(), h.episode_len())
}

fn prediction_view(ensemble: &Ensemble) -> Result<MatView<'_>> {
    let h = ensemble.horizon();
    MatView::col_major(ensemble.data(), h.episode_len(), ensemble.k(), h.episode_len())
}

/// `Q-`: column `j` is the hindcast of episode `j`.
pub fn build_hindcast_matrix(ensemble: &Ensemble) -> Result<DenseMatrix> {
    require_centered(ensemble)?;
    Ok(hindcast_view(ensemble)?.to_owned())
}

/// `Q±`: column `j` is the full episode `j`.
pub fn build_prediction_matrix(ensemble: &Ensemble) -> Result<DenseMatrix> {
    require_centered(ensemble)?;
    let h = ensemble.horizon();
    DenseMatrix::from_col_major(h.episode_len(), ensemble.k(), ensemble.data().to_vec())
}

fn check_weights(rows: usize, w: &WeightVector) -> Result<()> {
    if w.is_empty() || rows % w.len() != 0 {
        return Err(Error::DimensionMismatch {
            what: "weights (must divide the stacked length)",
            expected: rows,
            actual: w.len(),
        });
    }
    Ok(())
}

/// Copies `q` with row `i` multiplied by `w.at(row_offset + i)`.
fn weighted_copy(q: MatView<'_>, w: &WeightVector, row_offset: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(q.rows(), q.cols());
    for j in 0..q.cols() {
        for (i, o) in out.col_mut(j).iter_mut().enumerate() {
            *o = q.get(i, j) * w.at(row_offset + i);
        }
    }
    out
}

/// `Q-ᵀ W Q- / k` for a strided view; the result is exactly symmetric.
fn correlation(q: MatView<'_>, w: &WeightVector) -> Result<DenseMatrix> {
    check_weights(q.rows(), w)?;
    let k = q.cols();
    let mut c = DenseMatrix::zeros(k, k);
    if k == 0 {
        return Ok(c);
    }
    let inv_k = 1.0 / k as f64;
    if w.is_unit() {
        gemm(inv_k, q.t(), q, 0.0, &mut c)?;
    } else {
        let mut start = 0;
        while start < q.rows() {
            let end = (start + ROW_BLOCK).min(q.rows());
            let block = q.row_range(start, end);
            let weighted = weighted_copy(block, w, start);
            gemm(inv_k, block.t(), weighted.view(), 1.0, &mut c)?;
            start = end;
        }
    }
    for j in 0..k {
        for i in 0..j {
            let avg = 0.5 * (c.get(i, j) + c.get(j, i));
            c.set(i, j, avg);
            c.set(j, i, avg);
        }
    }
    Ok(c)
}

/// Ensemble sample correlation matrix `C- = Q-ᵀ W Q- / k`. The per-snapshot
/// weights are repeated over the snapshot blocks of `Q-`.
pub fn hindcast_correlation(q_minus: &DenseMatrix, w: &WeightVector) -> Result<DenseMatrix> {
    correlation(q_minus.view(), w)
}

/// Eigendecomposition of `C-`, negative round-off eigenvalues set to zero.
pub fn solve_pod(c_minus: &DenseMatrix) -> Result<EigResult> {
    let mut eig = eig_symmetric(c_minus)?;
    for l in eig.eigenvalues.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    Ok(eig)
}

/// Keeps the leading `r` eigenpairs, minus any whose eigenvalue is at or below
/// `EIGENVALUE_FLOOR * λ_1`. The effective rank is the length of the result
/// and may be zero when the data carries no variance.
pub fn truncate(eig: &EigResult, r: usize) -> Result<EigResult> {
    let k = eig.len();
    if r == 0 || r > k {
        return Err(Error::RankOutOfRange { rank: r, max: k });
    }
    let lead = eig.eigenvalues[0];
    let floor = EIGENVALUE_FLOOR * lead;
    let keep = eig.eigenvalues[..r]
        .iter()
        .take_while(|&&l| lead > 0.0 && l > floor)
        .count();
    Ok(EigResult {
        eigenvalues: eig.eigenvalues[..keep].to_vec(),
        eigenvectors: eig.eigenvectors.leading_cols(keep),
    })
}

/// `Ψ Λ^(-1/2) / √k`, the `k x r` map from data columns to modes.
fn mode_map(eig: &EigResult, k: usize) -> Result<DenseMatrix> {
    if eig.is_empty() {
        return Err(Error::DegenerateData);
    }
    if eig.eigenvectors.rows() != k {
        return Err(Error::DimensionMismatch {
            what: "ensemble coefficients",
            expected: k,
            actual: eig.eigenvectors.rows(),
        });
    }
    let mut map = eig.eigenvectors.clone();
    for (l, &lambda) in eig.eigenvalues.iter().enumerate() {
        if !(lambda > 0.0) {
            return Err(Error::ZeroEigenvalue { index: l });
        }
        let s = 1.0 / libm::sqrt(k as f64 * lambda);
        map.col_mut(l).iter_mut().for_each(|x| *x *= s);
    }
    Ok(map)
}

fn expand(q: MatView<'_>, eig: &EigResult, k: usize) -> Result<DenseMatrix> {
    if q.cols() != k {
        return Err(Error::DimensionMismatch {
            what: "data columns",
            expected: k,
            actual: q.cols(),
        });
    }
    let map = mode_map(eig, k)?;
    let mut out = DenseMatrix::zeros(q.rows(), map.cols());
    gemm(1.0, q, map.view(), 0.0, &mut out)?;
    Ok(out)
}

/// Hindcast modes `Φ- = Q- Ψ Λ^(-1/2) / √k`.
pub fn hindcast_modes(q_minus: &DenseMatrix, eig: &EigResult, k: usize) -> Result<DenseMatrix> {
    expand(q_minus.view(), eig, k)
}

/// STP modes `Φ±* = Q± Ψ Λ^(-1/2) / √k`.
pub fn stp_modes(q_pm: &DenseMatrix, eig: &EigResult, k: usize) -> Result<DenseMatrix> {
    expand(q_pm.view(), eig, k)
}

/// Expansion coefficients `A- = Φ-ᵀ W Q-`.
pub fn expansion_coefficients(phi_minus: &DenseMatrix, w: &WeightVector, q_minus: &DenseMatrix) -> Result<DenseMatrix> {
    if phi_minus.rows() != q_minus.rows() {
        return Err(Error::DimensionMismatch {
            what: "mode length",
            expected: q_minus.rows(),
            actual: phi_minus.rows(),
        });
    }
    check_weights(phi_minus.rows(), w)?;
    let weighted = weighted_copy(phi_minus.view(), w, 0);
    let mut a = DenseMatrix::zeros(phi_minus.cols(), q_minus.cols());
    gemm(1.0, weighted.view().t(), q_minus.view(), 0.0, &mut a)?;
    Ok(a)
}

/// The full-rank hindcast decomposition of a training ensemble. Any rank and
/// any forecast extension of the same hindcast data can be built from it.
#[derive(Debug, Clone)]
pub struct PodBasis {
    horizon: HorizonSpec,
    k: usize,
    weights: WeightVector,
    eig: EigResult,
    total_energy: f64,
}

/// Solves the ensemble space-time POD of a centered training ensemble.
pub fn fit_basis(train: &Ensemble, w: &WeightVector) -> Result<PodBasis> {
    require_centered(train)?;
    let horizon = train.horizon();
    if w.len() != horizon.p() {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: horizon.p(),
            actual: w.len(),
        });
    }
    if train.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("training ensemble"));
    }
    let c = correlation(hindcast_view(train)?, w)?;
    let eig = solve_pod(&c)?;
    let total_energy = eig.eigenvalues.iter().sum();
    Ok(PodBasis {
        horizon,
        k: train.k(),
        weights: w.clone(),
        eig,
        total_energy,
    })
}

impl PodBasis {
    pub fn horizon(&self) -> HorizonSpec {
        self.horizon
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// All `k` eigenvalues, descending, clamped at zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.eigenvalues
    }

    pub fn eig(&self) -> &EigResult {
        &self.eig
    }

    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    /// Builds the rank-`r` STP model from the ensemble the basis was fitted
    /// on. The ensemble may carry a different forecast length `m`; its
    /// hindcast block must be the one that was decomposed.
    pub fn extend(&self, train: &Ensemble, r: usize) -> Result<StpModel> {
        require_centered(train)?;
        let h = train.horizon();
        if train.k() != self.k {
            return Err(Error::DimensionMismatch {
                what: "training episodes",
                expected: self.k,
                actual: train.k(),
            });
        }
        if h.n() != self.horizon.n() || h.p() != self.horizon.p() {
            return Err(Error::DimensionMismatch {
                what: "hindcast length",
                expected: self.horizon.hindcast_len(),
                actual: h.hindcast_len(),
            });
        }
        let eig = truncate(&self.eig, r)?;
        let modes = expand(prediction_view(train)?, &eig, self.k)?;
        Ok(StpModel {
            horizon: h,
            requested_rank: r,
            eigenvalues: eig.eigenvalues,
            modes,
            weights: self.weights.clone(),
            mean: None,
            k_train: self.k,
            total_energy: self.total_energy,
        })
    }
}

/// Fits a rank-`r` STP model to a centered training ensemble.
///
/// The returned model has no stored mean; attach one with
/// [`StpModel::with_mean`] to forecast raw (uncentered) data.
pub fn fit(train: &Ensemble, r: usize, w: &WeightVector) -> Result<StpModel> {
    if r == 0 || r > train.k() {
        return Err(Error::RankOutOfRange { rank: r, max: train.k() });
    }
    fit_basis(train, w)?.extend(train, r)
}

/// A fitted forecaster. Immutable; safe to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct StpModel {
    horizon: HorizonSpec,
    requested_rank: usize,
    eigenvalues: Vec<f64>,
    /// `(n+m)p x r`, column-major; the top `np` rows are the hindcast modes.
    modes: DenseMatrix,
    weights: WeightVector,
    mean: Option<MeanField>,
    k_train: usize,
    total_energy: f64,
}

/// Tolerance on `Φ-ᵀ W Φ- = I` accepted when assembling a model from parts.
pub const LOAD_ORTHONORMALITY_TOL: f64 = 1e-6;

impl StpModel {
    /// Reassembles a model (e.g. from a file) and checks its invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        horizon: HorizonSpec,
        requested_rank: usize,
        eigenvalues: Vec<f64>,
        modes: DenseMatrix,
        weights: WeightVector,
        mean: Option<MeanField>,
        k_train: usize,
        total_energy: f64,
    ) -> Result<Self> {
        let r = eigenvalues.len();
        let bad = |msg: &str| Err(Error::InvariantViolation(msg.into()));
        if r == 0 || r > k_train {
            return bad("rank must lie in 1..=k_train");
        }
        if requested_rank < r || requested_rank > k_train {
            return bad("requested rank out of range");
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return bad("eigenvalues must be finite and positive");
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return bad("eigenvalues must be sorted descending");
        }
        if !(total_energy.is_finite() && total_energy >= eigenvalues.iter().sum::<f64>() * (1.0 - 1e-12)) {
            return bad("total energy smaller than retained energy");
        }
        if modes.rows() != horizon.episode_len() || modes.cols() != r {
            return bad("mode matrix shape does not match horizon and rank");
        }
        if modes.data().iter().any(|x| !x.is_finite()) {
            return bad("non-finite mode entries");
        }
        if weights.len() != horizon.p() {
            return bad("weight vector length differs from p");
        }
        if let Some(mean) = &mean {
            mean.check(horizon)?;
        }
        let model = Self {
            horizon,
            requested_rank,
            eigenvalues,
            modes,
            weights,
            mean,
            k_train,
            total_energy,
        };
        if model.orthonormality_error() > LOAD_ORTHONORMALITY_TOL {
            return bad("hindcast modes are not orthonormal");
        }
        Ok(model)
    }

    pub fn with_mean(mut self, mean: MeanField) -> Self {
        self.mean = Some(mean);
        self
    }

    /// Attaches a mean after checking that it fits the horizon.
    pub fn try_with_mean(self, mean: MeanField) -> Result<Self> {
        mean.check(self.horizon)?;
        Ok(self.with_mean(mean))
    }

    pub fn horizon(&self) -> HorizonSpec {
        self.horizon
    }

    /// Number of retained modes (after the eigenvalue floor).
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn requested_rank(&self) -> usize {
        self.requested_rank
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    pub fn k_train(&self) -> usize {
        self.k_train
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn mean(&self) -> Option<&MeanField> {
        self.mean.as_ref()
    }

    /// `Φ±*`, column-major.
    pub fn stp_modes(&self) -> &DenseMatrix {
        &self.modes
    }

    /// Hindcast part of mode `l`, identical to the hindcast mode `φ-`.
    pub fn hindcast_mode(&self, l: usize) -> &[f64] {
        &self.modes.col(l)[..self.horizon.hindcast_len()]
    }

    pub fn forecast_mode(&self, l: usize) -> &[f64] {
        &self.modes.col(l)[self.horizon.hindcast_len()..]
    }

    /// `Φ-` as an owned matrix (the top block of `Φ±*`).
    pub fn hindcast_modes(&self) -> DenseMatrix {
        self.modes.row_block(0, self.horizon.hindcast_len())
    }

    fn hindcast_view(&self) -> MatView<'_> {
        MatView::col_major(self.modes.data(), self.horizon.hindcast_len(), self.rank(), self.horizon.episode_len())
            .expect("mode matrix shape is a model invariant")
    }

    /// `max |Φ-ᵀ W Φ- - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let phi = self.hindcast_view();
        let weighted = weighted_copy(phi, &self.weights, 0);
        let mut g = DenseMatrix::zeros(self.rank(), self.rank());
        gemm(1.0, phi.t(), weighted.view(), 0.0, &mut g).expect("conformant by construction");
        g.max_abs_diff(&DenseMatrix::identity(self.rank()))
    }

    /// The same model keeping only the leading `r` modes.
    pub fn truncated(&self, r: usize) -> Result<Self> {
        if r == 0 || r > self.k_train {
            return Err(Error::RankOutOfRange { rank: r, max: self.k_train });
        }
        let keep = r.min(self.rank());
        let mut out = self.clone();
        out.requested_rank = r;
        out.eigenvalues.truncate(keep);
        out.modes = self.modes.leading_cols(keep);
        Ok(out)
    }

    fn check_hindcast(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.horizon.hindcast_len() {
            return Err(Error::DimensionMismatch {
                what: "hindcast vector",
                expected: self.horizon.hindcast_len(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    /// Coefficients `a* = Φ-ᵀ W q` of a centered hindcast vector.
    pub fn project(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_hindcast(q)?;
        let w = &self.weights;
        Ok((0..self.rank())
            .map(|l| {
                self.hindcast_mode(l)
                    .iter()
                    .zip(q)
                    .enumerate()
                    .map(|(i, (phi, x))| phi * w.at(i) * x)
                    .sum()
            })
            .collect())
    }

    /// Centers a raw hindcast with the stored mean, then projects it.
    pub fn project_raw(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_hindcast(q)?;
        let centered = self.center_hindcast(q)?;
        self.project(&centered)
    }

    fn center_hindcast(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mean = self.mean.as_ref().ok_or(Error::MissingMean)?;
        let mut centered = q.to_vec();
        mean.subtract_from(0, self.horizon.p(), &mut centered);
        Ok(centered)
    }

    /// `Φ±* a`, split at the hindcast/forecast boundary.
    pub fn expand(&self, coefficients: &[f64]) -> Result<Prediction> {
        if coefficients.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: self.rank(),
                actual: coefficients.len(),
            });
        }
        let mut full = alloc::vec![0.0; self.horizon.episode_len()];
        for (l, &a) in coefficients.iter().enumerate() {
            for (o, phi) in full.iter_mut().zip(self.modes.col(l)) {
                *o += a * phi;
            }
        }
        let forecast = full.split_off(self.horizon.hindcast_len());
        Ok(Prediction {
            coefficients: coefficients.to_vec(),
            hindcast: full,
            forecast,
            mean_added: false,
        })
    }

    /// Forecast of a centered hindcast vector.
    pub fn predict(&self, q: &[f64]) -> Result<Prediction> {
        let a = self.project(q)?;
        self.expand(&a)
    }

    /// Forecast of a raw hindcast vector; the stored mean is removed before
    /// projection and added back to the prediction.
    pub fn predict_raw(&self, q: &[f64]) -> Result<Prediction> {
        self.check_hindcast(q)?;
        let centered = self.center_hindcast(q)?;
        let mut prediction = self.predict(&centered)?;
        let mean = self.mean.as_ref().ok_or(Error::MissingMean)?;
        prediction.add_mean(mean, self.horizon)?;
        Ok(prediction)
    }

    /// Removes the stored mean from every episode of a raw ensemble.
    pub fn center_ensemble(&self, ensemble: Ensemble) -> Result<Ensemble> {
        if ensemble.is_centered() {
            return Err(Error::AlreadyCentered);
        }
        let mean = self.mean.as_ref().ok_or(Error::MissingMean)?;
        let h = ensemble.horizon();
        if h != self.horizon {
            return Err(Error::DimensionMismatch {
                what: "episode length",
                expected: self.horizon.episode_len(),
                actual: h.episode_len(),
            });
        }
        let mut data = ensemble.data().to_vec();
        for episode in data.chunks_exact_mut(h.episode_len()) {
            mean.subtract_from(0, h.p(), episode);
        }
        Ensemble::from_flat(data, h, ensemble.kind(), true, ensemble.time_indices().map(<[f64]>::to_vec))
    }

    /// Forecasts every episode of an ensemble from its hindcast. Raw
    /// ensembles are centered with the stored mean first; predictions are
    /// returned without the mean.
    pub fn predict_ensemble(&self, ensemble: &Ensemble) -> Result<Vec<Prediction>> {
        let h = ensemble.horizon();
        if h.n() != self.horizon.n() || h.p() != self.horizon.p() {
            return Err(Error::DimensionMismatch {
                what: "hindcast length",
                expected: self.horizon.hindcast_len(),
                actual: h.hindcast_len(),
            });
        }
        let np = self.horizon.hindcast_len();
        let k = ensemble.k();
        let mut q = MatView::col_major(ensemble.data(), np, k, h.episode_len())?.to_owned();
        if !ensemble.is_centered() {
            let mean = self.mean.as_ref().ok_or(Error::MissingMean)?;
            for j in 0..k {
                mean.subtract_from(0, h.p(), q.col_mut(j));
            }
        }
        if !self.weights.is_unit() {
            q = weighted_copy(q.view(), &self.weights, 0);
        }
        let r = self.rank();
        let mut a = DenseMatrix::zeros(r, k);
        gemm(1.0, self.hindcast_view().t(), q.view(), 0.0, &mut a)?;
        let mut full = DenseMatrix::zeros(self.horizon.episode_len(), k);
        gemm(1.0, self.modes.view(), a.view(), 0.0, &mut full)?;
        Ok((0..k)
            .map(|j| {
                let col = full.col(j);
                Prediction {
                    coefficients: a.col(j).to_vec(),
                    hindcast: col[..np].to_vec(),
                    forecast: col[np..].to_vec(),
                    mean_added: false,
                }
            })
            .collect())
    }
}

/// Forecast of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Hindcast coefficients `a*`.
    pub coefficients: Vec<f64>,
    /// Reconstructed hindcast `q-*`, length `np`.
    pub hindcast: Vec<f64>,
    /// Forecast `q+*`, length `mp`.
    pub forecast: Vec<f64>,
    pub mean_added: bool,
}

impl Prediction {
    /// `[q-*; q+*]`.
    pub fn trajectory(&self) -> Vec<f64> {
        let mut out = self.hindcast.clone();
        out.extend_from_slice(&self.forecast);
        out
    }

    pub fn add_mean(&mut self, mean: &MeanField, horizon: HorizonSpec) -> Result<()> {
        if self.mean_added {
            return Err(Error::InvalidParameter("mean already added".into()));
        }
        mean.check(horizon)?;
        let p = horizon.p();
        mean.add_to(0, p, &mut self.hindcast);
        mean.add_to(horizon.n(), p, &mut self.forecast);
        self.mean_added = true;
        Ok(())
    }
}
