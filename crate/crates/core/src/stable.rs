//! Alpha-stable risk-process simulation.
//!
//! Increments are generated with the Chambers-Mallows-Stuck transform in the
//! "1-parameterization" (no shift): `X(t) ~ S_alpha(t^{1/alpha}, beta, 0)`,
//! so the tail constants of the closed-form asymptotics apply directly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::paths::{map_paths, path_rng, PathBatch, PathSource};
use crate::ruin::{MCConfig, MCEstimate, WindowRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl StableSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "stable index alpha={alpha} must lie strictly inside (1, 2)"
            )));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("skewness beta={beta} outside [-1, 1]")));
        }
        Ok(StableSpec { alpha, beta })
    }
}

/// One standard `S_alpha(1, beta, 0)` variate by the CMS transform.
/// Consumes exactly two uniforms from `rng`.
pub fn cms_standard(alpha: f64, beta: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = std::f64::consts::PI * (rng.gen::<f64>() - 0.5);
    // Exp(1); clamp away from 0 so the power below cannot produce NaN.
    let w: f64 = (-(1.0 - rng.gen::<f64>()).ln()).max(1e-300);
    let half_pi_alpha = std::f64::consts::FRAC_PI_2 * alpha;
    let b = (beta * half_pi_alpha.tan()).atan() / alpha;
    let s = (1.0 + beta * beta * half_pi_alpha.tan().powi(2)).powf(0.5 / alpha);
    let au_b = alpha * (u + b);
    s * au_b.sin() / u.cos().powf(1.0 / alpha)
        * ((u - au_b).cos() / w).powf((1.0 - alpha) / alpha)
}

pub struct StableGenerator {
    grid: TimeGrid,
    alpha: f64,
    beta: f64,
    /// Per-step scale `step^{1/alpha}`.
    scale: f64,
}

impl StableGenerator {
    pub fn new(spec: &StableSpec, grid: &TimeGrid) -> Result<Self> {
        if grid.start() != 0.0 {
            return Err(Error::InvalidArgument("stable paths are anchored at 0".into()));
        }
        Ok(StableGenerator {
            grid: grid.clone(),
            alpha: spec.alpha,
            beta: spec.beta,
            scale: grid.step().powf(1.0 / spec.alpha),
        })
    }
}

impl PathSource for StableGenerator {
    type Scratch = ();

    fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    fn make_scratch(&self) {}

    fn fill_path(&self, seed: u64, index: u64, _scratch: &mut (), out: &mut [f64]) {
        let mut rng = path_rng(seed, index);
        let mut acc = 0.0;
        out[0] = 0.0;
        for o in out.iter_mut().skip(1) {
            acc += self.scale * cms_standard(self.alpha, self.beta, &mut rng);
            *o = acc;
        }
    }
}

/// Sample `n` stable paths on `grid` (stationary independent increments).
pub fn sample_stable_paths(
    spec: &StableSpec,
    grid: &TimeGrid,
    n: usize,
    seed: u64,
) -> Result<PathBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let gen = StableGenerator::new(spec, grid)?;
    let rows = map_paths(&gen, n, seed, |path, _| path.to_vec());
    Ok(PathBatch::from_rows(
        grid.clone(),
        rows,
        None,
        seed,
        format!("stable(alpha={}, beta={})", spec.alpha, spec.beta),
    ))
}

/// Plain Monte Carlo of the Parisian ruin probability for a stable driver.
pub fn estimate_parisian_stable(
    spec: &StableSpec,
    c: f64,
    s: f64,
    u: f64,
    window: &WindowRule,
    config: &MCConfig,
) -> Result<MCEstimate> {
    Ok(estimate_parisian_stable_multi(spec, c, s, &[u], window, config)?.pop().unwrap())
}

/// One-pass plain MC over several capital levels with common paths; used for
/// convergence-trend checks where correlated ratios sharpen the comparison.
pub fn estimate_parisian_stable_multi(
    spec: &StableSpec,
    c: f64,
    s: f64,
    us: &[f64],
    window: &WindowRule,
    config: &MCConfig,
) -> Result<Vec<MCEstimate>> {
    if !(c > 0.0 && s > 0.0) {
        return Err(Error::InvalidArgument(format!("need c, S > 0; got c={c}, S={s}")));
    }
    window.validate()?;
    let step = config.grid_step;
    let widest = us
        .iter()
        .map(|&u| window.resolve(u))
        .fold(0.0f64, f64::max);
    config.validate(s, widest)?;
    let s_steps = (s / step).round() as usize;
    if (s - s_steps as f64 * step).abs() > 1e-9 {
        return Err(Error::InvalidArgument("horizon must be a whole number of grid steps".into()));
    }
    let w_max = (widest / step).round() as usize;
    let grid = TimeGrid::with_steps(0.0, step, s_steps + w_max.max(1))?;
    let gen = StableGenerator::new(spec, &grid)?;
    let windows: Vec<usize> = us.iter().map(|&u| grid.steps_in(window.resolve(u))).collect();
    let outcomes: Vec<Vec<u8>> = map_paths(&gen, config.n_paths, config.seed, |path, _| {
        us.iter()
            .zip(&windows)
            .map(|(&u, &w)| {
                u8::from(
                    crate::ruin::parisian_functional(
                        path,
                        &grid,
                        c,
                        s_steps as f64 * step,
                        w as f64 * step,
                    )
                    .expect("grid covers S + T")
                        > u,
                )
            })
            .collect()
    });
    let nf = config.n_paths as f64;
    Ok((0..us.len())
        .map(|k| {
            let hits: u64 = outcomes.iter().map(|o| o[k] as u64).sum();
            let p = hits as f64 / nf;
            MCEstimate {
                p_hat: p,
                stderr: (p * (1.0 - p) / nf).sqrt(),
                n: config.n_paths,
                ci95: if hits == 0 {
                    (0.0, 3.0 / nf)
                } else {
                    (
                        (p - 1.959963984540054 * (p * (1.0 - p) / nf).sqrt()).max(0.0),
                        (p + 1.959963984540054 * (p * (1.0 - p) / nf).sqrt()).min(1.0),
                    )
                },
                ess: nf,
                grid_step: step,
            }
        })
        .collect())
}
