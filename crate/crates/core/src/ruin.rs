//! The Parisian sup-inf ruin functional and its Monte Carlo estimators.
//!
//! Ruin over `[0, S]` with window `T_u` is the event
//! `sup_{t in [0,S]} inf_{s in [t, t+T_u]} (X(s) - c s) > u`; by
//! complementation this is the surplus `u + c s - X(s)` staying negative
//! throughout some window of length `T_u` starting before `S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::paths::{map_paths, GaussianModel, PathGenerator};

/// Parisian window rule: a fixed length, or `T u^{-kappa}` shrinking with
/// the capital (the scaling regime of the exact asymptotics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowRule {
    Constant { t: f64 },
    Scaled { t: f64, kappa: f64 },
}

impl WindowRule {
    pub fn resolve(&self, u: f64) -> f64 {
        match *self {
            WindowRule::Constant { t } => t,
            WindowRule::Scaled { t, kappa } => t * u.powf(-kappa),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WindowRule::Constant { t } if t >= 0.0 => Ok(()),
            WindowRule::Scaled { t, kappa } if t >= 0.0 && kappa > 0.0 => Ok(()),
            _ => Err(Error::InvalidArgument("window needs T >= 0 (and kappa > 0)".into())),
        }
    }
}

pub struct RuinProblem {
    pub model: GaussianModel,
    pub c: f64,
    pub s: f64,
    pub u: f64,
    pub window: WindowRule,
}

impl RuinProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.c > 0.0 && self.u >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need S > 0, c > 0, u >= 0; got S={}, c={}, u={}",
                self.s, self.c, self.u
            )));
        }
        self.window.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub grid_step: f64,
    pub importance_sampling: bool,
    /// Paths handed to a worker at a time; affects scheduling only, never
    /// results.
    pub batch_size: usize,
}

impl MCConfig {
    pub fn validate(&self, s: f64, t_u: f64) -> Result<()> {
        if self.n_paths < 100 {
            return Err(Error::InvalidArgument(format!(
                "n_paths {} below the minimum of 100",
                self.n_paths
            )));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::InvalidArgument("grid_step must be > 0".into()));
        }
        let cap = if t_u > 0.0 { s.min(t_u) / 4.0 } else { s / 4.0 };
        if self.grid_step > cap + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "grid_step {} too coarse: must be <= {} for S={s}, T_u={t_u}",
                self.grid_step, cap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub n: usize,
    pub ci95: (f64, f64),
    /// Effective sample size: `n` for plain MC, the Kish size of the
    /// weighted indicators for importance sampling.
    pub ess: f64,
    pub grid_step: f64,
}

/// Wilson 95% interval for a binomial proportion; at zero hits the upper
/// limit is replaced by the rule-of-three bound `3/n`.
fn wilson_ci(hits: f64, n: f64) -> (f64, f64) {
    if hits == 0.0 {
        return (0.0, 3.0 / n);
    }
    let z = 1.959963984540054f64;
    let z2 = z * z;
    let p = hits / n;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Max over grid times `t <= S` of the min over grid times `s in [t, t+T]`
/// of `X(s) - c s`. `{functional > u}` is the discretized ruin event.
///
/// `T` is rounded to the nearest whole number of grid steps (callers log
/// the adjustment); the grid must cover `S + T`.
pub fn parisian_functional(path: &[f64], grid: &TimeGrid, c: f64, s: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument("window length must be >= 0".into()));
    }
    let s_idx = grid
        .index_of(s)
        .ok_or_else(|| Error::InvalidArgument(format!("horizon {s} not on grid")))?;
    let w = grid.steps_in(t);
    if s_idx + w >= grid.n_points() {
        return Err(Error::InvalidArgument(format!(
            "grid ends at {} but the functional needs S + T = {}",
            grid.end(),
            s + w as f64 * grid.step()
        )));
    }
    Ok(windowed_sup_inf(path, grid, c, s_idx, w))
}

/// Core sliding-window computation over precomputed indices. The window min
/// uses a monotone deque, so the whole evaluation is O(n_points).
fn windowed_sup_inf(path: &[f64], grid: &TimeGrid, c: f64, s_idx: usize, w: usize) -> f64 {
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut best = f64::NEG_INFINITY;
    let drifted = |j: usize| path[j] - c * grid.point(j);
    for j in 0..=s_idx + w {
        let dj = drifted(j);
        while let Some(&back) = deque.back() {
            if drifted(back) >= dj {
                deque.pop_back();
            } else {
                break;
            }
        }
        deque.push_back(j);
        if j >= w {
            let t_idx = j - w;
            while *deque.front().unwrap() < t_idx {
                deque.pop_front();
            }
            let window_min = drifted(*deque.front().unwrap());
            if window_min > best {
                best = window_min;
            }
            if t_idx == s_idx {
                break;
            }
        }
    }
    best
}

/// Completion index of the first Parisian excursion: smallest grid index
/// `j = t_idx + w` with the windowed min over `[t_idx, t_idx + w]` above
/// `u`, for `t_idx <= s_idx`. `None` when no excursion completes.
fn first_completion_index(
    path: &[f64],
    grid: &TimeGrid,
    c: f64,
    s_idx: usize,
    w: usize,
    u: f64,
) -> Option<usize> {
    let mut deque: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let drifted = |j: usize| path[j] - c * grid.point(j);
    for j in 0..=s_idx + w {
        let dj = drifted(j);
        while let Some(&back) = deque.back() {
            if drifted(back) >= dj {
                deque.pop_back();
            } else {
                break;
            }
        }
        deque.push_back(j);
        if j >= w {
            let t_idx = j - w;
            while *deque.front().unwrap() < t_idx {
                deque.pop_front();
            }
            if drifted(*deque.front().unwrap()) > u {
                return Some(j);
            }
            if t_idx == s_idx {
                break;
            }
        }
    }
    None
}

struct Discretized {
    grid: TimeGrid,
    s_idx: usize,
    w: usize,
    t_u: f64,
}

/// Resolve the problem onto a grid: `S` and `T_u` are rounded to whole
/// numbers of steps and the grid extends to `S + T_u`.
fn discretize(problem: &RuinProblem, grid_step: f64) -> Result<Discretized> {
    let t_u = problem.window.resolve(problem.u);
    let s_steps = (problem.s / grid_step).round() as usize;
    let w = (t_u / grid_step).round() as usize;
    if s_steps == 0 {
        return Err(Error::InvalidArgument("grid_step larger than the horizon".into()));
    }
    if (problem.s - s_steps as f64 * grid_step).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "horizon S={} is not a whole number of grid steps",
            problem.s
        )));
    }
    if (t_u - w as f64 * grid_step).abs() > 1e-9 * t_u.max(1.0) {
        log::info!(
            "window T_u={t_u} adjusted to {} ({} grid steps)",
            w as f64 * grid_step,
            w
        );
    }
    let grid = TimeGrid::with_steps(0.0, grid_step, s_steps + w)?;
    Ok(Discretized { grid, s_idx: s_steps, w, t_u })
}

fn is_tilt(problem: &RuinProblem) -> f64 {
    (problem.u + problem.c * problem.s) / problem.model.variance(problem.s)
}

fn finish_weighted(vs: Vec<f64>, grid_step: f64) -> MCEstimate {
    let n = vs.len();
    let nf = n as f64;
    let sum: f64 = vs.iter().sum();
    let p = sum / nf;
    let ss: f64 = vs.iter().map(|v| (v - p) * (v - p)).sum();
    let stderr = (ss / (nf * (nf - 1.0))).sqrt();
    let sum_sq: f64 = vs.iter().map(|v| v * v).sum();
    let ess = if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 };
    if ess < 0.01 * nf && ess > 0.0 {
        log::warn!("effective sample size {ess:.1} below 1% of n: tilt mismatch likely");
    }
    let lo = (p - 1.959963984540054 * stderr).max(0.0);
    let hi = (p + 1.959963984540054 * stderr).min(1.0);
    MCEstimate { p_hat: p, stderr, n, ci95: (lo, hi), ess, grid_step }
}

fn finish_plain(hits: u64, n: usize, grid_step: f64) -> MCEstimate {
    let nf = n as f64;
    let p = hits as f64 / nf;
    let stderr = (p * (1.0 - p) / nf).sqrt();
    MCEstimate { p_hat: p, stderr, n, ci95: wilson_ci(hits as f64, nf), ess: nf, grid_step }
}

/// Plain Monte Carlo estimate of the Parisian ruin probability.
pub fn estimate_parisian_mc(problem: &RuinProblem, config: &MCConfig) -> Result<MCEstimate> {
    Ok(estimate_parisian_mc_multi(problem, &[problem.u], config)?.pop().unwrap())
}

/// One-pass plain MC over several capital levels (common paths; the window
/// rule is resolved at each level separately).
pub fn estimate_parisian_mc_multi(
    problem: &RuinProblem,
    us: &[f64],
    config: &MCConfig,
) -> Result<Vec<MCEstimate>> {
    problem.validate()?;
    // Discretize at the largest window among the levels so one grid covers all.
    let widest = us
        .iter()
        .map(|&u| RuinProblem { u, ..clone_problem(problem) })
        .max_by(|a, b| {
            a.window.resolve(a.u).partial_cmp(&b.window.resolve(b.u)).unwrap()
        })
        .unwrap();
    let d = discretize(&widest, config.grid_step)?;
    config.validate(problem.s, d.t_u)?;
    warn_window(problem.s, d.t_u);
    let gen = PathGenerator::new(&problem.model, &d.grid)?;
    let windows: Vec<usize> = us
        .iter()
        .map(|&u| d.grid.steps_in(problem.window.resolve(u)))
        .collect();
    let outcomes: Vec<Vec<u8>> = map_paths(&gen, config.n_paths, config.seed, |path, _| {
        us.iter()
            .zip(&windows)
            .map(|(&u, &w)| u8::from(windowed_sup_inf(path, &d.grid, problem.c, d.s_idx, w) > u))
            .collect()
    });
    Ok((0..us.len())
        .map(|k| {
            let hits: u64 = outcomes.iter().map(|o| o[k] as u64).sum();
            finish_plain(hits, config.n_paths, config.grid_step)
        })
        .collect())
}

fn clone_problem(p: &RuinProblem) -> RuinProblem {
    RuinProblem { model: p.model.clone(), c: p.c, s: p.s, u: p.u, window: p.window }
}

fn warn_window(s: f64, t_u: f64) {
    if t_u > s {
        log::warn!("window T_u={t_u} exceeds the horizon S={s}; the excursion may end after S");
    }
}

/// Importance-sampled estimate: paths are tilted along the covariance
/// section at the horizon with coefficient `a = (u + cS) / sigma^2(S)`, the
/// most likely ruin configuration, and reweighted by the exact likelihood
/// ratio.
pub fn estimate_parisian_is(problem: &RuinProblem, config: &MCConfig) -> Result<MCEstimate> {
    problem.validate()?;
    let d = discretize(problem, config.grid_step)?;
    config.validate(problem.s, d.t_u)?;
    warn_window(problem.s, d.t_u);
    let gen =
        PathGenerator::shifted(&problem.model, &d.grid, problem.s, is_tilt(problem))?;
    let u = problem.u;
    let vs: Vec<f64> = map_paths(&gen, config.n_paths, config.seed, |path, weight| {
        if windowed_sup_inf(path, &d.grid, problem.c, d.s_idx, d.w) > u {
            weight
        } else {
            0.0
        }
    });
    Ok(finish_weighted(vs, config.grid_step))
}

/// Estimate dispatching on `config.importance_sampling`.
pub fn estimate_parisian(problem: &RuinProblem, config: &MCConfig) -> Result<MCEstimate> {
    if config.importance_sampling {
        estimate_parisian_is(problem, config)
    } else {
        estimate_parisian_mc(problem, config)
    }
}

/// A step-halving diagnostic: the estimate, a re-estimate at half the grid
/// step under a fresh seed, their drift, and whether the drift exceeds two
/// joint standard errors (signalling that discretization bias dominates).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepHalving {
    pub base: MCEstimate,
    pub halved: MCEstimate,
    pub drift: f64,
    /// Standard error of `drift` (the two runs use independent seeds).
    pub drift_stderr: f64,
    pub flagged: bool,
}

impl StepHalving {
    /// Richardson-style bound on the remaining discretization bias of the
    /// base estimate, assuming an O(sqrt(step)) error decay. The measured
    /// drift is widened by twice its own noise so a lucky small drift cannot
    /// understate the bias.
    pub fn bias_bound(&self) -> f64 {
        (self.drift.abs() + 2.0 * self.drift_stderr) / (1.0 - std::f64::consts::FRAC_1_SQRT_2)
    }
}

pub fn step_halving_diagnostic(problem: &RuinProblem, config: &MCConfig) -> Result<StepHalving> {
    let base = estimate_parisian(problem, config)?;
    let halved_cfg = MCConfig {
        grid_step: config.grid_step / 2.0,
        seed: config.seed.wrapping_add(0x9e3779b97f4a7c15),
        ..*config
    };
    let halved = estimate_parisian(problem, &halved_cfg)?;
    let drift = halved.p_hat - base.p_hat;
    let joint = (base.stderr.powi(2) + halved.stderr.powi(2)).sqrt();
    Ok(StepHalving { base, halved, drift, drift_stderr: joint, flagged: drift.abs() > 2.0 * joint })
}

/// Importance-sampled estimate of `P(inf_{[T1,T2]}(B(t) - c t) > u)` for
/// Brownian motion, the simulation counterpart of the exact quadrature
/// oracle. The tilt pushes the path level at `T1` to `u + c T1`.
pub fn estimate_interval_inf_is(
    c: f64,
    t1: f64,
    t2: f64,
    u: f64,
    config: &MCConfig,
) -> Result<MCEstimate> {
    if !(c > 0.0 && t1 > 0.0 && t2 >= t1 && u > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need c > 0, 0 < T1 <= T2, u > 0; got c={c}, T1={t1}, T2={t2}, u={u}"
        )));
    }
    let steps = ((t2 / config.grid_step).round()) as usize;
    if (t2 - steps as f64 * config.grid_step).abs() > 1e-9 {
        return Err(Error::InvalidArgument("T2 must be a whole number of grid steps".into()));
    }
    let grid = TimeGrid::with_steps(0.0, config.grid_step, steps)?;
    let i1 = grid
        .index_of(t1)
        .ok_or_else(|| Error::InvalidArgument(format!("T1={t1} not on the grid")))?;
    let a = (u + c * t1) / t1;
    let model = GaussianModel::brownian();
    let gen = PathGenerator::shifted(&model, &grid, t1, a)?;
    let n_pts = grid.n_points();
    let vs: Vec<f64> = map_paths(&gen, config.n_paths, config.seed, |path, weight| {
        let ok = (i1..n_pts).all(|j| path[j] - c * grid.point(j) > u);
        if ok {
            weight
        } else {
            0.0
        }
    });
    Ok(finish_weighted(vs, config.grid_step))
}

/// Conditional law of the rescaled ruin time `u^2 (S - tau_u)` given ruin,
/// where `tau_u` is the completion time of the first Parisian excursion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuinTimeLaw {
    pub x: Vec<f64>,
    pub cdf: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Effective count of ruin events behind the conditional estimate.
    pub n_ruin_eff: f64,
    pub n: usize,
}

pub fn estimate_ruin_time_law(
    problem: &RuinProblem,
    config: &MCConfig,
    x_grid: &[f64],
) -> Result<RuinTimeLaw> {
    problem.validate()?;
    let d = discretize(problem, config.grid_step)?;
    config.validate(problem.s, d.t_u)?;
    let gen: PathGenerator = if config.importance_sampling {
        PathGenerator::shifted(&problem.model, &d.grid, problem.s, is_tilt(problem))?
    } else {
        PathGenerator::new(&problem.model, &d.grid)?
    };
    let u = problem.u;
    // (weight of ruin event, rescaled time), weight 0 when no ruin.
    let outcomes: Vec<(f64, f64)> =
        map_paths(&gen, config.n_paths, config.seed, |path, weight| {
            match first_completion_index(path, &d.grid, problem.c, d.s_idx, d.w, u) {
                None => (0.0, 0.0),
                Some(j) => (weight, u * u * (problem.s - d.grid.point(j))),
            }
        });
    let w_sum: f64 = outcomes.iter().map(|o| o.0).sum();
    if w_sum <= 0.0 {
        return Err(Error::NoRuinEvents { n: config.n_paths });
    }
    let w_sq: f64 = outcomes.iter().map(|o| o.0 * o.0).sum();
    let n_ruin_eff = w_sum * w_sum / w_sq;
    let mut cdf = Vec::with_capacity(x_grid.len());
    let mut stderr = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let hit: f64 = outcomes.iter().filter(|o| o.0 > 0.0 && o.1 <= x).map(|o| o.0).sum();
        let f = hit / w_sum;
        cdf.push(f);
        stderr.push((f * (1.0 - f) / n_ruin_eff).sqrt());
    }
    Ok(RuinTimeLaw { x: x_grid.to_vec(), cdf, stderr, n_ruin_eff, n: config.n_paths })
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use crate::grid::TimeGrid;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Widening the window can only lower the sup-inf value, and T = 0
        /// must reproduce the plain running supremum.
        #[test]
        fn functional_monotone_in_window(
            incrs in proptest::collection::vec(-1.0f64..1.0, 24),
            c in 0.1f64..3.0,
        ) {
            let grid = TimeGrid::with_steps(0.0, 0.125, 24).unwrap();
            let mut path = vec![0.0];
            let mut acc = 0.0;
            for dx in incrs {
                acc += dx;
                path.push(acc);
            }
            let s = 1.0;
            let sup0 = parisian_functional(&path, &grid, c, s, 0.0).unwrap();
            let direct = (0..=8)
                .map(|j| path[j] - c * grid.point(j))
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((sup0 - direct).abs() < 1e-12);
            let mut last = sup0;
            for w in 1..=8usize {
                let v = parisian_functional(&path, &grid, c, s, w as f64 * 0.125).unwrap();
                prop_assert!(v <= last + 1e-12, "w={w}: {v} > {last}");
                last = v;
            }
        }

        /// The deque-based window min agrees with a brute-force double loop.
        #[test]
        fn functional_matches_brute_force(
            incrs in proptest::collection::vec(-1.0f64..1.0, 16),
            w in 0usize..8,
        ) {
            let grid = TimeGrid::with_steps(0.0, 0.25, 16).unwrap();
            let mut path = vec![0.0];
            let mut acc = 0.0;
            for dx in incrs {
                acc += dx;
                path.push(acc);
            }
            let c = 1.0;
            let s_idx = 16 - w;
            let brute = (0..=s_idx)
                .map(|t| {
                    (t..=t + w)
                        .map(|j| path[j] - c * grid.point(j))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let v = parisian_functional(&path, &grid, c, s_idx as f64 * 0.25, w as f64 * 0.25)
                .unwrap();
            prop_assert!((v - brute).abs() < 1e-12, "{v} vs {brute}");
        }
    }
}
