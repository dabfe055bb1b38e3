//! Acceptance gate: one test per criterion, each printing a single
//! PASS/FAIL line with its pinned tolerance. Budgeted for a single core.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use parisian_core::asymptotics::{
    bm_inf_tail_asymptotic, bm_inf_tail_exact, diff_tail_asymptotic, fbm_corollary_asymptotic,
    fbm_local_expansion, gauss_exact_asymptotic, k_constant, levy_stable_asymptotic, log_rate,
    lower_bound_gaussian, DiffTailSpec,
};
use parisian_core::constants::{estimate_with_ladder, ConstantEstimate, FunctionalSpec};
use parisian_core::gauss::{erfc, phi, psi};
use parisian_core::Error;
use parisian_core::paths::GaussianModel;
use parisian_core::quad::integrate;
use parisian_core::ruin::{
    estimate_interval_inf_is, estimate_parisian, estimate_parisian_is, estimate_parisian_mc,
    estimate_parisian_mc_multi, estimate_ruin_time_law, MCConfig, RuinProblem, WindowRule,
};
use parisian_core::stable::{estimate_parisian_stable, estimate_parisian_stable_multi, StableSpec};

fn report(criterion: u32, ok: bool, start: Instant, detail: &str) {
    println!(
        "criterion {criterion:02}: {} — {detail} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
}

fn cfg(n_paths: usize, grid_step: f64, seed: u64) -> MCConfig {
    MCConfig { n_paths, seed, grid_step, importance_sampling: false, batch_size: 1024 }
}

fn bm_problem(u: f64, window: WindowRule) -> RuinProblem {
    RuinProblem { model: GaussianModel::brownian(), c: 1.0, s: 1.0, u, window }
}

/// Interval-inf convergence: asymptotic/exact ratio monotone toward 1 over
/// u in {3..8}, |ratio - 1| <= 0.15 at u = 8. (c=1, T1=1, T2=2.)
#[test]
fn a01_interval_inf_asymptotic_convergence() {
    let start = Instant::now();
    let ratios: Vec<f64> = (3..=8)
        .map(|u| {
            let u = u as f64;
            bm_inf_tail_asymptotic(1.0, 1.0, 2.0, u).unwrap().value
                / bm_inf_tail_exact(1.0, 1.0, 2.0, u).unwrap()
        })
        .collect();
    let monotone = ratios.windows(2).all(|w| w[1] < w[0]) || ratios.windows(2).all(|w| w[1] > w[0]);
    let landed = (ratios[5] - 1.0).abs() <= 0.15;
    let ok = monotone && landed;
    report(1, ok, start, &format!("ratios {ratios:.4?}"));
    assert!(ok);
}

/// IS Monte Carlo vs exact quadrature for P(inf_{[1,2]}(B - t) > 3):
/// n = 1e6, step 1/512, agreement within 3 stderr + step-halving bound.
#[test]
fn a02_is_estimate_matches_exact_oracle() {
    let start = Instant::now();
    let exact = bm_inf_tail_exact(1.0, 1.0, 2.0, 3.0).unwrap();
    let base = estimate_interval_inf_is(1.0, 1.0, 2.0, 3.0, &cfg(1_000_000, 1.0 / 512.0, 42))
        .unwrap();
    let halved = estimate_interval_inf_is(
        1.0,
        1.0,
        2.0,
        3.0,
        &cfg(1_000_000, 1.0 / 1024.0, 42u64.wrapping_add(0x9e3779b97f4a7c15)),
    )
    .unwrap();
    let drift = halved.p_hat - base.p_hat;
    let joint = (base.stderr.powi(2) + halved.stderr.powi(2)).sqrt();
    let bound = (drift.abs() + 2.0 * joint) / (1.0 - std::f64::consts::FRAC_1_SQRT_2);
    let tol = 3.0 * base.stderr + bound;
    let ok = (base.p_hat - exact).abs() < tol;
    report(
        2,
        ok,
        start,
        &format!("p_hat={:.6e} exact={exact:.6e} tol={tol:.2e}", base.p_hat),
    );
    assert!(ok);
}

/// Pickands constants by lambda-ladder extrapolation (ladder {5,10,20},
/// delta = 0.01, n = 1e5): H1 in [0.9, 1.1] and H2 in [0.51, 0.62].
#[test]
fn a03_pickands_constants() {
    let start = Instant::now();
    let ladder = [5.0, 10.0, 20.0];
    let h1 = estimate_with_ladder(
        &FunctionalSpec::pickands(1.0, 0.0, ladder[0], 0.01),
        &ladder,
        100_000,
        7,
    );
    let h2 = estimate_with_ladder(
        &FunctionalSpec::pickands(2.0, 0.0, ladder[0], 0.01),
        &ladder,
        100_000,
        7,
    );
    let in_range = |r: &Result<_, _>, lo: f64, hi: f64| match r {
        Ok((est, _)) => {
            let est: &ConstantEstimate = est;
            (lo..=hi).contains(&est.value)
        }
        Err(_) => false,
    };
    let describe = |r: &Result<(ConstantEstimate, Vec<ConstantEstimate>), Error>| match r {
        Ok((est, _)) => format!("{:.4}+-{:.4}", est.value, est.stderr),
        Err(e) => format!("ladder extrapolation failed ({e})"),
    };
    let ok1 = in_range(&h1, 0.9, 1.1);
    let ok2 = in_range(&h2, 0.51, 0.62);
    report(
        3,
        ok1 && ok2,
        start,
        &format!(
            "H1={} (want [0.9,1.1]) H2={} (want [0.51,0.62])",
            describe(&h1),
            describe(&h2)
        ),
    );
    assert!(ok1, "H1 = {} outside [0.9, 1.1]", describe(&h1));
    assert!(ok2, "H2 = {} outside [0.51, 0.62]", describe(&h2));
}

/// The general local-expansion evaluator instantiated for fBm must equal the
/// specialized corollary evaluator to 1e-12 relative, 100 random points per
/// regime.
#[test]
fn a04_corollary_theorem_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for regime in 0..3 {
        for _ in 0..100 {
            let alpha = match regime {
                0 => rng.gen_range(0.2..0.99),
                1 => 1.0,
                _ => rng.gen_range(1.01..2.0),
            };
            let s = rng.gen_range(0.5..2.0);
            let c = rng.gen_range(0.5..2.0);
            let u = rng.gen_range(1.0..10.0);
            let t = rng.gen_range(0.0..1.0);
            let constant = (regime < 2).then(|| rng.gen_range(0.3..3.0));
            let local = fbm_local_expansion(alpha, s).unwrap();
            let general = gauss_exact_asymptotic(&local, c, s, u, t, constant).unwrap().value;
            let special = fbm_corollary_asymptotic(alpha, c, s, u, t, constant).unwrap().value;
            worst = worst.max(((general - special) / special).abs());
        }
    }
    let ok = worst <= 1e-12;
    report(4, ok, start, &format!("worst relative gap {worst:.2e} (tol 1e-12)"));
    assert!(ok);
}

/// K-scaling identity K_{c,y} = y^{-1/2} K_{c sqrt(y), 1} to 1e-13 relative
/// over a 20x20 log grid.
#[test]
fn a05_k_scaling_identity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        for j in 0..20 {
            let c = 10f64.powf(-1.0 + 2.0 * i as f64 / 19.0);
            let y = 10f64.powf(-1.0 + 2.0 * j as f64 / 19.0);
            let lhs = k_constant(c, y).unwrap();
            let rhs = y.powf(-0.5) * k_constant(c * y.sqrt(), 1.0).unwrap();
            worst = worst.max(((lhs - rhs) / rhs).abs());
        }
    }
    let ok = worst <= 1e-13;
    report(5, ok, start, &format!("worst relative gap {worst:.2e} (tol 1e-13)"));
    assert!(ok);
}

/// Boundary-regime validation for BM (alpha = beta1 = 1): IS estimate at
/// u = 4, T_u = 1/u^2, n = 1e6 within max(3 stderr, 20%) of the product of
/// the simulated Piterbarg constant on the scaled window and Psi(u + c).
#[test]
fn a06_boundary_regime_with_simulated_constant() {
    let start = Instant::now();
    // Scaled window: D^{1/alpha} sigma_S^{-2/alpha} T = T/2 for BM at S = 1.
    let p_const = estimate_with_ladder(
        &FunctionalSpec::piterbarg(1.0, 1.0, 1.0, -1.0, 0.5, 2.0, 1.0 / 128.0),
        &[2.0, 4.0, 8.0],
        100_000,
        11,
    )
    .unwrap()
    .0;
    let target = p_const.value * psi(5.0);
    let problem = bm_problem(4.0, WindowRule::Scaled { t: 1.0, kappa: 2.0 });
    let config =
        MCConfig { importance_sampling: true, ..cfg(1_000_000, 1.0 / 1024.0, 606) };
    let est = estimate_parisian_is(&problem, &config).unwrap();
    let se = (est.stderr.powi(2) + (p_const.stderr * psi(5.0)).powi(2)).sqrt();
    let tol = (3.0 * se).max(0.2 * target);
    let ok = (est.p_hat - target).abs() <= tol;
    report(
        6,
        ok,
        start,
        &format!(
            "p_hat={:.4e} target={target:.4e} (P={:.4}+-{:.4}) tol={tol:.2e}",
            est.p_hat, p_const.value, p_const.stderr
        ),
    );
    assert!(ok);
}

/// Lower bound: the closed-form bound value must not exceed p_hat + 3 stderr
/// for u in {2, 3} (BM, S = T = c = 1, plain MC n = 5e6, step 1/128).
#[test]
fn a07_lower_bound_below_estimate() {
    let start = Instant::now();
    let us = [2.0, 3.0];
    let ests = estimate_parisian_mc_multi(
        &bm_problem(us[0], WindowRule::Constant { t: 1.0 }),
        &us,
        &cfg(5_000_000, 1.0 / 128.0, 77),
    )
    .unwrap();
    let mut ok = true;
    let mut detail = String::new();
    for (&u, est) in us.iter().zip(&ests) {
        let bound = lower_bound_gaussian(|x| x, |_| 1.0, 1.0, 1.0, 1.0, u).unwrap().value;
        let pass = bound <= est.p_hat + 3.0 * est.stderr;
        ok &= pass;
        detail.push_str(&format!(
            "u={u}: bound={bound:.3e} p_hat={:.3e}+-{:.1e}; ",
            est.p_hat, est.stderr
        ));
    }
    report(7, ok, start, &detail);
    assert!(ok);
}

/// Log-rate: LS slope of log p_hat (IS) against u^2 over u in {3,4,5} within
/// 15% of -0.5 (BM, S = 1, T = 0.1). The displayed alternative rate from the
/// source material is printed alongside via the evaluator's validity notes.
#[test]
fn a08_log_rate_slope() {
    let start = Instant::now();
    let us = [3.0, 4.0, 5.0];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &u in &us {
        let problem = bm_problem(u, WindowRule::Constant { t: 0.1 });
        let config = MCConfig { importance_sampling: true, ..cfg(200_000, 1.0 / 64.0, 808) };
        let est = estimate_parisian_is(&problem, &config).unwrap();
        xs.push(u * u);
        ys.push(est.p_hat.ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let rate = log_rate(&GaussianModel::brownian(), 1.0).unwrap();
    let ok = ((slope + 0.5) / 0.5).abs() <= 0.15;
    report(
        8,
        ok,
        start,
        &format!(
            "slope={slope:.4} (want -0.5 +- 15%); rate={} notes={:?}",
            rate.value, rate.validity_notes
        ),
    );
    assert!(ok, "slope {slope}");
}

/// Stable driver: MC/asymptotic ratio at u = 30 (n = 1e6, step 1e-3) inside
/// [0.7, 1.3], and the ratio at u = 60 closer to 1 than at u = 15
/// (common-path run, n = 8e6, step 4e-3).
#[test]
fn a09_stable_tail_validation() {
    let start = Instant::now();
    let spec = StableSpec::new(1.5, 0.0).unwrap();
    let window = WindowRule::Constant { t: 0.1 };
    let asympt = |u: f64| levy_stable_asymptotic(1.5, 0.0, 1.0, u).unwrap().value;

    let pinned =
        estimate_parisian_stable(&spec, 1.0, 1.0, 30.0, &window, &cfg(1_000_000, 1e-3, 99))
            .unwrap();
    let ratio30 = pinned.p_hat / asympt(30.0);
    let ok_pinned = (0.7..=1.3).contains(&ratio30);

    let us = [15.0, 30.0, 60.0];
    let trend =
        estimate_parisian_stable_multi(&spec, 1.0, 1.0, &us, &window, &cfg(8_000_000, 4e-3, 100))
            .unwrap();
    let r15 = trend[0].p_hat / asympt(15.0);
    let r60 = trend[2].p_hat / asympt(60.0);
    let ok_trend = (r60 - 1.0).abs() < (r15 - 1.0).abs();
    let ok = ok_pinned && ok_trend;
    report(
        9,
        ok,
        start,
        &format!("ratio(30)={ratio30:.3} ratio(15)={r15:.3} ratio(60)={r60:.3}"),
    );
    assert!(ok);
}

/// Difference-tail factorization, half-normal example: asymptotic/exact
/// ratio within 10% of 1 at u = 5 and closer at u = 7.
#[test]
fn a10_difference_tail_half_normal() {
    let start = Instant::now();
    // Y = |N(0,1)|, X independent standard normal, w(u) = u.
    let spec = DiffTailSpec::new(
        1.0,
        |u| u,
        |u| 1.0 - erfc(1.0 / (u * std::f64::consts::SQRT_2)),
        psi,
    )
    .unwrap();
    let exact = |u: f64| {
        let crude = integrate(|y| 2.0 * phi(y) * psi(u + y), 0.0, 40.0, 1e-12).unwrap();
        integrate(|y| 2.0 * phi(y) * psi(u + y), 0.0, 40.0, (crude.value * 1e-9).max(1e-300))
            .unwrap()
            .value
    };
    let r5 = diff_tail_asymptotic(&spec, 5.0) / exact(5.0);
    let r7 = diff_tail_asymptotic(&spec, 7.0) / exact(7.0);
    let ok = (r5 - 1.0).abs() <= 0.10 && (r7 - 1.0).abs() < (r5 - 1.0).abs();
    report(10, ok, start, &format!("ratio(5)={r5:.4} ratio(7)={r7:.4}"));
    assert!(ok);
}

/// Ruin-time law: conditional CDF of u^2 (S - tau) at u = 4 within 4
/// pointwise stderr of 1 - exp(-x/2) at x in {0.5, 2 ln 2, 3}.
#[test]
fn a11_ruin_time_law() {
    let start = Instant::now();
    let xs = [0.5, 2.0 * 2f64.ln(), 3.0];
    let problem = bm_problem(4.0, WindowRule::Scaled { t: 0.25, kappa: 2.0 });
    let config = MCConfig { importance_sampling: true, ..cfg(1_000_000, 1.0 / 256.0, 1111) };
    let law = estimate_ruin_time_law(&problem, &config, &xs).unwrap();
    let mut ok = true;
    let mut detail = format!("n_ruin_eff={:.0}; ", law.n_ruin_eff);
    for k in 0..xs.len() {
        let limit = 1.0 - (-xs[k] / 2.0).exp();
        let pass = (law.cdf[k] - limit).abs() <= 4.0 * law.stderr[k];
        ok &= pass;
        detail.push_str(&format!(
            "x={:.3}: cdf={:.4}+-{:.4} limit={limit:.4}; ",
            xs[k], law.cdf[k], law.stderr[k]
        ));
    }
    report(11, ok, start, &detail);
    assert!(ok);
}

/// Determinism: representative runs of every estimator repeated at 1, 2 and
/// 4 workers reproduce p_hat bit-exactly (reassociation tolerance 1e-12
/// relative).
#[test]
fn a12_worker_count_independence() {
    let start = Instant::now();
    let run_all = || -> Vec<f64> {
        let plain = estimate_parisian(
            &bm_problem(2.0, WindowRule::Constant { t: 0.25 }),
            &cfg(20_000, 1.0 / 64.0, 5),
        )
        .unwrap();
        let is = estimate_parisian(
            &bm_problem(3.0, WindowRule::Constant { t: 0.25 }),
            &MCConfig { importance_sampling: true, ..cfg(20_000, 1.0 / 64.0, 5) },
        )
        .unwrap();
        let fbm = estimate_parisian_mc(
            &RuinProblem {
                model: GaussianModel::fbm(1.5).unwrap(),
                c: 1.0,
                s: 1.0,
                u: 1.0,
                window: WindowRule::Constant { t: 0.25 },
            },
            &cfg(5_000, 1.0 / 64.0, 6),
        )
        .unwrap();
        let stable = estimate_parisian_stable(
            &StableSpec::new(1.5, 0.0).unwrap(),
            1.0,
            1.0,
            10.0,
            &WindowRule::Constant { t: 0.1 },
            &cfg(20_000, 0.01, 7),
        )
        .unwrap();
        let pick = estimate_with_ladder(
            &FunctionalSpec::pickands(1.0, 0.0, 1.0, 0.02),
            &[1.0, 2.0, 4.0],
            2_000,
            8,
        )
        .unwrap()
        .0;
        vec![plain.p_hat, is.p_hat, fbm.p_hat, stable.p_hat, pick.value]
    };
    let runs: Vec<Vec<f64>> = [1usize, 2, 4]
        .iter()
        .map(|&workers| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .unwrap()
                .install(run_all)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for run in &runs[1..] {
        for (a, b) in runs[0].iter().zip(run) {
            worst = worst.max(((a - b) / a.abs().max(1e-300)).abs());
        }
    }
    let ok = worst <= 1e-12;
    report(12, ok, start, &format!("worst relative drift across 1/2/4 workers {worst:.2e}"));
    assert!(ok);
}
