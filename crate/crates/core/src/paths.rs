//! Deterministic, seedable Gaussian path generation on uniform grids.
//!
//! Every sampler derives one RNG stream per path index from `(seed, index)`,
//! so a batch is reproducible bit-for-bit regardless of how path indices are
//! partitioned across workers.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Local behaviour of a variance/correlation structure near the horizon:
/// `sigma(t) = sigma_s - a (S-t)^beta1 (1+o(1))` on the left,
/// `sigma_s - a_pm (t-S)^beta2 (1+o(1))` on the right, and correlation
/// `1 - d |t-s|^alpha (1+o(1))`. `q`/`gamma` bound increment variances for
/// diagnostics only and enter no formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExpansion {
    pub sigma_s: f64,
    pub a: f64,
    pub a_pm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub d: f64,
    pub alpha: f64,
    pub q: Option<f64>,
    pub gamma: Option<f64>,
}

impl LocalExpansion {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_s > 0.0 && self.a > 0.0 && self.d > 0.0) {
            return Err(Error::InvalidArgument(
                "local expansion needs sigma_s > 0, a > 0, d > 0".into(),
            ));
        }
        if !(self.beta1 > 0.0 && self.beta1 <= self.beta2 && self.beta2 <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < beta1 <= beta2 <= 1, got beta1={}, beta2={}",
                self.beta1, self.beta2
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha {} outside (0, 2]",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub enum ModelKind {
    BrownianMotion,
    FractionalBm { alpha: f64 },
    /// Stationary increments with `Var(X(t) - X(s)) = V(|t-s|)`; `V` must be
    /// differentiable, strictly increasing and convex.
    StationaryIncrements { v: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

#[derive(Clone)]
pub struct GaussianModel {
    pub kind: ModelKind,
    pub local: Option<LocalExpansion>,
}

impl GaussianModel {
    pub fn brownian() -> Self {
        GaussianModel { kind: ModelKind::BrownianMotion, local: None }
    }

    pub fn fbm(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidArgument(format!("fBm alpha {alpha} outside (0, 2]")));
        }
        Ok(GaussianModel { kind: ModelKind::FractionalBm { alpha }, local: None })
    }

    pub fn stationary_increments<F>(v: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        GaussianModel { kind: ModelKind::StationaryIncrements { v: Arc::new(v) }, local: None }
    }

    pub fn variance(&self, t: f64) -> f64 {
        match &self.kind {
            ModelKind::BrownianMotion => t,
            ModelKind::FractionalBm { alpha } => t.abs().powf(*alpha),
            ModelKind::StationaryIncrements { v } => v(t.abs()),
        }
    }

    pub fn covariance(&self, s: f64, t: f64) -> f64 {
        match &self.kind {
            ModelKind::BrownianMotion => s.min(t),
            _ => 0.5 * (self.variance(s) + self.variance(t) - self.variance(t - s)),
        }
    }

    pub fn tag(&self) -> String {
        match &self.kind {
            ModelKind::BrownianMotion => "bm".into(),
            ModelKind::FractionalBm { alpha } => format!("fbm(alpha={alpha})"),
            ModelKind::StationaryIncrements { .. } => "stationary_increments".into(),
        }
    }
}

/// A batch of sampled trajectories on a common grid, stored row-major.
#[derive(Debug, Clone)]
pub struct PathBatch {
    pub grid: TimeGrid,
    pub n_paths: usize,
    values: Vec<f64>,
    /// Likelihood ratios against the unshifted law; `None` means all 1.
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    pub model_tag: String,
}

impl PathBatch {
    pub(crate) fn from_rows(
        grid: TimeGrid,
        rows: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
        seed: u64,
        model_tag: String,
    ) -> Self {
        let n_paths = rows.len();
        let mut values = Vec::with_capacity(n_paths * grid.n_points());
        for row in rows {
            values.extend_from_slice(&row);
        }
        PathBatch { grid, n_paths, values, weights, seed, model_tag }
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let np = self.grid.n_points();
        &self.values[i * np..(i + 1) * np]
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.grid.n_points() + k]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

/// RNG stream for path `index` of a run keyed by `seed`. Streams are
/// independent across indices, so partitioning by index is safe.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Anything that can fill path `index` of run `seed` into a buffer.
/// Implementations must be pure given `(seed, index)`.
pub trait PathSource: Sync {
    type Scratch: Send;

    fn n_points(&self) -> usize;
    fn make_scratch(&self) -> Self::Scratch;
    fn fill_path(&self, seed: u64, index: u64, scratch: &mut Self::Scratch, out: &mut [f64]);

    /// Likelihood ratio of the nominal law against the sampling law for a
    /// generated path. 1 unless the source tilts.
    fn weight(&self, _path: &[f64]) -> f64 {
        1.0
    }
}

/// Map a per-path statistic over `n` paths in parallel. The result vector is
/// ordered by path index, so any sequential reduction over it is bit-exact
/// regardless of the worker count.
pub fn map_paths<S, T, F>(source: &S, n: usize, seed: u64, f: F) -> Vec<T>
where
    S: PathSource,
    T: Send,
    F: Fn(&[f64], f64) -> T + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map_init(
            || (source.make_scratch(), vec![0.0f64; source.n_points()]),
            |(scratch, buf), i| {
                source.fill_path(seed, i, scratch, buf);
                f(buf, source.weight(buf))
            },
        )
        .collect()
}

// --- circulant embedding of fractional Gaussian noise ---

struct FgnSynth {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
    /// sqrt(lambda_k / M) for each circulant eigenvalue, or empty when the
    /// Cholesky fallback is active.
    scale: Vec<f64>,
    fallback: Option<DMatrix<f64>>,
}

impl FgnSynth {
    /// Increment-level autocovariance of fGn at lag `k` for grid spacing
    /// `step`: `step^alpha * (|k+1|^a - 2|k|^a + |k-1|^a) / 2`.
    fn autocov(alpha: f64, step: f64, k: usize) -> f64 {
        let k = k as f64;
        0.5 * step.powf(alpha)
            * ((k + 1.0).powf(alpha) - 2.0 * k.powf(alpha) + (k - 1.0).abs().powf(alpha))
    }

    fn new(alpha: f64, step: f64, m: usize) -> Self {
        let big_m = 2 * m;
        let mut row: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); big_m];
        for k in 0..=m {
            row[k].re = Self::autocov(alpha, step, k);
        }
        for k in 1..m {
            row[big_m - k].re = row[k].re;
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(big_m);
        fft.process(&mut row);

        let min_eig = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min_eig < -1e-8 {
            // Embedding genuinely indefinite (small m, alpha near 2): fall
            // back to an exact factor of the Toeplitz fGn covariance.
            log::warn!(
                "circulant embedding indefinite (min eigenvalue {min_eig:e}); \
                 falling back to dense factorization"
            );
            let cov = DMatrix::from_fn(m, m, |i, j| {
                Self::autocov(alpha, step, i.abs_diff(j))
            });
            let factor = symmetric_factor(&cov, 1e-10).expect("fGn covariance must be PSD");
            return FgnSynth { m, fft, scale: Vec::new(), fallback: Some(factor) };
        }
        if min_eig < 0.0 {
            log::debug!("clipping circulant eigenvalues down to {min_eig:e} at zero");
        }
        let scale = row
            .iter()
            .map(|c| (c.re.max(0.0) / big_m as f64).sqrt())
            .collect();
        FgnSynth { m, fft, scale, fallback: None }
    }

    /// Write `m` fGn increments drawn from `rng` into `out[..m]`.
    fn fill_increments(&self, rng: &mut ChaCha8Rng, buf: &mut Vec<Complex<f64>>, out: &mut [f64]) {
        if let Some(factor) = &self.fallback {
            let z = DVector::from_fn(self.m, |_, _| StandardNormal.sample(rng));
            let x = factor * z;
            out[..self.m].copy_from_slice(x.as_slice());
            return;
        }
        let big_m = 2 * self.m;
        buf.clear();
        buf.extend(self.scale.iter().map(|&s| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Complex::new(s * a, s * b)
        }));
        debug_assert_eq!(buf.len(), big_m);
        self.fft.process(buf);
        for (o, c) in out[..self.m].iter_mut().zip(buf.iter()) {
            *o = c.re;
        }
    }
}

/// Eigen-factor `C = Q sqrt(max(L, 0)) ` of a symmetric PSD matrix, clipping
/// eigenvalues in `(-tol, 0)` and rejecting anything below `-tol`.
fn symmetric_factor(cov: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let eig = cov.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, &l| a.max(l.abs()));
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &l| a.min(l));
    if min_eig < -tol * scale.max(1.0) {
        return Err(Error::IndefiniteCovariance { min_eigenvalue: min_eig });
    }
    if min_eig < 0.0 {
        log::debug!("clipping covariance eigenvalue {min_eig:e} at zero");
    }
    let mut factor = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    Ok(factor)
}

enum Synth {
    /// Independent increments of variance `step` (Brownian motion, and fBm
    /// with alpha = 1 where the noise autocovariance vanishes exactly).
    BmIncrements,
    /// fBm with alpha = 2 is the degenerate line `t * Z`.
    Linear,
    Fgn(FgnSynth),
    /// Dense factor sampling: `out[1..] = F z`, `out[0] = 0` when the grid
    /// starts at a zero-variance origin; otherwise all points come from `F`.
    Factor { factor: DMatrix<f64>, pin_origin: bool },
}

struct Shift {
    a: f64,
    anchor_index: usize,
    var_anchor: f64,
    mean: Vec<f64>,
}

/// A reusable sampler for one model on one grid, optionally mean-shifted for
/// importance sampling.
pub struct PathGenerator {
    grid: TimeGrid,
    synth: Synth,
    shift: Option<Shift>,
    pub model_tag: String,
}

pub struct Scratch {
    fft_buf: Vec<Complex<f64>>,
    incr: Vec<f64>,
}

impl PathGenerator {
    pub fn new(model: &GaussianModel, grid: &TimeGrid) -> Result<Self> {
        let synth = match &model.kind {
            ModelKind::BrownianMotion => Synth::BmIncrements,
            ModelKind::FractionalBm { alpha } => {
                if grid.start() != 0.0 {
                    return Err(Error::InvalidArgument(
                        "fBm sampling requires a grid anchored at 0".into(),
                    ));
                }
                if (alpha - 1.0).abs() < 1e-12 {
                    Synth::BmIncrements
                } else if (alpha - 2.0).abs() < 1e-12 {
                    Synth::Linear
                } else {
                    Synth::Fgn(FgnSynth::new(*alpha, grid.step(), grid.n_steps()))
                }
            }
            ModelKind::StationaryIncrements { .. } => return Self::new_factor(model, grid),
        };
        Ok(PathGenerator { grid: grid.clone(), synth, shift: None, model_tag: model.tag() })
    }

    /// Exact sampler through a dense covariance factorization, for any model.
    pub fn new_factor(model: &GaussianModel, grid: &TimeGrid) -> Result<Self> {
        if grid.n_points() > 4096 {
            return Err(Error::InvalidArgument(format!(
                "dense sampling capped at 4096 grid points, got {}",
                grid.n_points()
            )));
        }
        let pts = grid.points();
        // A zero-variance origin makes the full matrix singular; pin it and
        // factor the rest.
        let pin_origin = model.variance(pts[0]).abs() < 1e-14;
        let active: &[f64] = if pin_origin { &pts[1..] } else { &pts };
        let m = active.len();
        let cov = DMatrix::from_fn(m, m, |i, j| model.covariance(active[i], active[j]));
        let factor = symmetric_factor(&cov, 1e-10)?;
        Ok(PathGenerator {
            grid: grid.clone(),
            synth: Synth::Factor { factor, pin_origin },
            shift: None,
            model_tag: model.tag(),
        })
    }

    /// Mean-shifted sampler: mean `a * r(t, anchor)` with the exact
    /// likelihood ratio `exp(-a X(anchor) + a^2 sigma^2(anchor) / 2)`
    /// attached to every path.
    pub fn shifted(model: &GaussianModel, grid: &TimeGrid, anchor: f64, a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::InvalidArgument("shift coefficient must be finite".into()));
        }
        let anchor_index = grid
            .index_of(anchor)
            .ok_or_else(|| Error::InvalidArgument(format!("anchor {anchor} not on grid")))?;
        let mut gen = Self::new(model, grid)?;
        let mean = grid.points().iter().map(|&t| a * model.covariance(t, anchor)).collect();
        gen.shift = Some(Shift { a, anchor_index, var_anchor: model.variance(anchor), mean });
        Ok(gen)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
}

impl PathSource for PathGenerator {
    type Scratch = Scratch;

    fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    fn make_scratch(&self) -> Scratch {
        Scratch { fft_buf: Vec::new(), incr: vec![0.0; self.grid.n_steps()] }
    }

    fn fill_path(&self, seed: u64, index: u64, scratch: &mut Scratch, out: &mut [f64]) {
        let mut rng = path_rng(seed, index);
        match &self.synth {
            Synth::BmIncrements => {
                let sqrt_step = self.grid.step().sqrt();
                let mut acc = 0.0;
                out[0] = 0.0;
                for o in out.iter_mut().skip(1) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    acc += sqrt_step * z;
                    *o = acc;
                }
            }
            Synth::Linear => {
                let z: f64 = StandardNormal.sample(&mut rng);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = self.grid.point(k) * z;
                }
            }
            Synth::Fgn(synth) => {
                synth.fill_increments(&mut rng, &mut scratch.fft_buf, &mut scratch.incr);
                let mut acc = 0.0;
                out[0] = 0.0;
                for (o, &dx) in out.iter_mut().skip(1).zip(scratch.incr.iter()) {
                    acc += dx;
                    *o = acc;
                }
            }
            Synth::Factor { factor, pin_origin } => {
                let m = factor.nrows();
                let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
                let x = factor * z;
                if *pin_origin {
                    out[0] = 0.0;
                    out[1..].copy_from_slice(x.as_slice());
                } else {
                    out.copy_from_slice(x.as_slice());
                }
            }
        }
        if let Some(shift) = &self.shift {
            for (o, &m) in out.iter_mut().zip(shift.mean.iter()) {
                *o += m;
            }
        }
    }

    fn weight(&self, path: &[f64]) -> f64 {
        match &self.shift {
            None => 1.0,
            Some(s) => {
                (-s.a * path[s.anchor_index] + 0.5 * s.a * s.a * s.var_anchor).exp()
            }
        }
    }
}

fn batch_from(gen: &PathGenerator, n: usize, seed: u64, with_weights: bool) -> PathBatch {
    let np = gen.n_points();
    let rows = map_paths(gen, n, seed, |path, w| (path.to_vec(), w));
    let mut values = Vec::with_capacity(n * np);
    let mut weights = Vec::with_capacity(if with_weights { n } else { 0 });
    for (row, w) in rows {
        values.extend_from_slice(&row);
        if with_weights {
            weights.push(w);
        }
    }
    PathBatch {
        grid: gen.grid.clone(),
        n_paths: n,
        values,
        weights: with_weights.then_some(weights),
        seed,
        model_tag: gen.model_tag.clone(),
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    Ok(())
}

/// Brownian motion on `grid`: cumulative sums of N(0, step) increments.
pub fn sample_bm(grid: &TimeGrid, n: usize, seed: u64) -> Result<PathBatch> {
    check_n(n)?;
    let gen = PathGenerator::new(&GaussianModel::brownian(), grid)?;
    Ok(batch_from(&gen, n, seed, false))
}

/// Fractional Brownian motion anchored at 0, synthesized by circulant
/// embedding of the increment autocovariance (with special-cased alpha = 1
/// and alpha = 2 degeneracies).
pub fn sample_fbm(grid: &TimeGrid, alpha: f64, n: usize, seed: u64) -> Result<PathBatch> {
    check_n(n)?;
    let gen = PathGenerator::new(&GaussianModel::fbm(alpha)?, grid)?;
    Ok(batch_from(&gen, n, seed, false))
}

/// Exact finite-dimensional sample of any Gaussian model through a dense
/// covariance factorization.
pub fn sample_cholesky(model: &GaussianModel, grid: &TimeGrid, n: usize, seed: u64) -> Result<PathBatch> {
    check_n(n)?;
    let gen = PathGenerator::new_factor(model, grid)?;
    Ok(batch_from(&gen, n, seed, false))
}

/// Mean-shifted sample with exact likelihood-ratio weights; see
/// [`PathGenerator::shifted`].
pub fn sample_shifted(
    model: &GaussianModel,
    grid: &TimeGrid,
    anchor: f64,
    a: f64,
    n: usize,
    seed: u64,
) -> Result<PathBatch> {
    check_n(n)?;
    let gen = PathGenerator::shifted(model, grid, anchor, a)?;
    Ok(batch_from(&gen, n, seed, true))
}
