//! Experiment runner: configure an estimator or evaluator from a JSON
//! document (flags override), run it, and persist a `run.json` record plus a
//! `table.csv` with 17-significant-digit numbers.
//!
//! Exit codes: 0 success, 2 unknown regime tag, 3 malformed config,
//! 4 unwritable output path.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use parisian_core::asymptotics::{
    bm_inf_tail_asymptotic, bm_inf_tail_exact, diff_tail_asymptotic, fbm_corollary_asymptotic,
    gauss_exact_asymptotic, levy_stable_asymptotic, log_rate, lower_bound_gaussian,
    AsymptoticValue, DiffTailSpec,
};
use parisian_core::constants::{estimate_with_ladder, ConstantMode, FunctionalSpec};
use parisian_core::gauss::{erfc, psi};
use parisian_core::paths::{GaussianModel, LocalExpansion};
use parisian_core::ruin::{
    estimate_interval_inf_is, estimate_parisian, MCConfig, RuinProblem, WindowRule,
};
use parisian_core::stable::{estimate_parisian_stable, StableSpec};

const FORMAT_VERSION: u32 = 1;
const OUT_DIR_ENV: &str = "PARISIAN_OUT_DIR";
const CSV_HEADER: &str = "u,p_mc,stderr,p_asympt,ratio,p_exact_if_available";

#[derive(Parser)]
#[command(name = "parisian", version, about = "Parisian ruin experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration document.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads; default = available cores. Results are
    /// identical for any value.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (overrides $PARISIAN_OUT_DIR, default ./parisian-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the config grid step.
    #[arg(long, global = true)]
    grid_step: Option<f64>,
    /// Override the config path count.
    #[arg(long, global = true)]
    n_paths: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Monte Carlo Parisian / classical ruin for a Gaussian model.
    Simulate,
    /// Evaluate a closed-form asymptotic regime.
    Asympt,
    /// Estimate a Pickands/Piterbarg-type constant over a lambda ladder.
    Constants,
    /// Ratio table MC / asymptotic (and exact where available) over a u-ladder.
    Compare,
    /// Monte Carlo Parisian ruin for an alpha-stable model.
    Stable,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Asympt => "asympt",
            Command::Constants => "constants",
            Command::Compare => "compare",
            Command::Stable => "stable",
        }
    }
}

#[derive(Debug)]
enum CliError {
    /// Exit 2.
    UnknownRegime(String),
    /// Exit 3.
    Config(String),
    /// Exit 4.
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::UnknownRegime(_) => 2,
            CliError::Config(_) => 3,
            CliError::Output(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::UnknownRegime(m) | CliError::Config(m) | CliError::Output(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

// --- configuration documents ---

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ModelSpec {
    Bm,
    Fbm { alpha: f64 },
}

impl ModelSpec {
    fn build(&self) -> Result<GaussianModel, CliError> {
        match self {
            ModelSpec::Bm => Ok(GaussianModel::brownian()),
            ModelSpec::Fbm { alpha } => GaussianModel::fbm(*alpha).map_err(config_err),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SimulateConfig {
    model: ModelSpec,
    c: f64,
    s: f64,
    u: f64,
    window: WindowRule,
    mc: MCConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StableConfig {
    alpha: f64,
    beta: f64,
    c: f64,
    s: f64,
    u: f64,
    window: WindowRule,
    mc: MCConfig,
}

/// Flat parameter record for `asympt`; each regime reads the fields it
/// needs and rejects the rest as missing.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct AsymptConfig {
    regime: String,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    c: Option<f64>,
    #[serde(default)]
    s: Option<f64>,
    #[serde(default)]
    u: Option<f64>,
    #[serde(default)]
    t: Option<f64>,
    #[serde(default)]
    t1: Option<f64>,
    #[serde(default)]
    t2: Option<f64>,
    /// Supplied Pickands/Piterbarg constant for the regimes that need one.
    #[serde(default)]
    constant: Option<f64>,
    /// Local expansion for the general thm33 evaluator.
    #[serde(default)]
    local: Option<LocalExpansion>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConstantsConfig {
    mode: ConstantMode,
    alpha: f64,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    b1: Option<f64>,
    #[serde(default)]
    b2: Option<f64>,
    t: f64,
    lambdas: Vec<f64>,
    grid_step: f64,
    n_paths: usize,
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CompareConfig {
    regime: String,
    us: Vec<f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    c: Option<f64>,
    #[serde(default)]
    s: Option<f64>,
    #[serde(default)]
    t1: Option<f64>,
    #[serde(default)]
    t2: Option<f64>,
    #[serde(default)]
    window: Option<WindowRule>,
    /// Omit to tabulate the closed forms only.
    #[serde(default)]
    mc: Option<MCConfig>,
}

// --- run record ---

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct RunRecord {
    format_version: u32,
    command: String,
    /// Fully resolved configuration (flag overrides applied).
    config: serde_json::Value,
    results: Vec<serde_json::Value>,
    duration_seconds: f64,
    tool_version: String,
    /// Unix seconds.
    timestamp: u64,
}

fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

struct CsvRow {
    u: f64,
    p_mc: Option<(f64, f64)>,
    p_asympt: Option<f64>,
    p_exact: Option<f64>,
}

impl CsvRow {
    fn line(&self) -> String {
        let opt = |v: Option<f64>| v.map(sig17).unwrap_or_default();
        let ratio = match (self.p_mc, self.p_asympt) {
            (Some((p, _)), Some(a)) if a != 0.0 => Some(p / a),
            _ => None,
        };
        format!(
            "{},{},{},{},{},{}",
            sig17(self.u),
            opt(self.p_mc.map(|(p, _)| p)),
            opt(self.p_mc.map(|(_, se)| se)),
            opt(self.p_asympt),
            opt(ratio),
            opt(self.p_exact),
        )
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    }
    let raw = load_config(cli)?;
    let started = Instant::now();
    let (config, results, rows) = match cli.command {
        Command::Simulate => cmd_simulate(cli, &raw)?,
        Command::Asympt => cmd_asympt(cli, &raw)?,
        Command::Constants => cmd_constants(cli, &raw)?,
        Command::Compare => cmd_compare(cli, &raw)?,
        Command::Stable => cmd_stable(cli, &raw)?,
    };
    let record = RunRecord {
        format_version: FORMAT_VERSION,
        command: cli.command.name().to_string(),
        config,
        results,
        duration_seconds: started.elapsed().as_secs_f64(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let out_dir = resolve_out_dir(cli);
    write_outputs(&out_dir, &record, &rows)?;
    println!("wrote {} and table.csv under {}", "run.json", out_dir.display());
    Ok(())
}

fn load_config(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
}

fn resolve_out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("parisian-out"))
}

fn write_outputs(dir: &Path, record: &RunRecord, rows: &[String]) -> Result<(), CliError> {
    let out_err = |e: std::io::Error| CliError::Output(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(out_err)?;
    let json = serde_json::to_string_pretty(record)
        .map_err(|e| CliError::Output(format!("serializing run record: {e}")))?;
    std::fs::write(dir.join("run.json"), json).map_err(out_err)?;
    let mut csv = String::new();
    for row in rows {
        csv.push_str(row);
        csv.push('\n');
    }
    std::fs::write(dir.join("table.csv"), csv).map_err(out_err)?;
    Ok(())
}

fn apply_mc_overrides(cli: &Cli, mc: &mut MCConfig) {
    if let Some(seed) = cli.seed {
        mc.seed = seed;
    }
    if let Some(step) = cli.grid_step {
        mc.grid_step = step;
    }
    if let Some(n) = cli.n_paths {
        mc.n_paths = n;
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("all result types serialize")
}

type CommandOutput = (serde_json::Value, Vec<serde_json::Value>, Vec<String>);

fn cmd_simulate(cli: &Cli, raw: &serde_json::Value) -> Result<CommandOutput, CliError> {
    let mut config: SimulateConfig =
        serde_json::from_value(raw.clone()).map_err(config_err)?;
    apply_mc_overrides(cli, &mut config.mc);
    let problem = RuinProblem {
        model: config.model.build()?,
        c: config.c,
        s: config.s,
        u: config.u,
        window: config.window,
    };
    let est = estimate_parisian(&problem, &config.mc).map_err(config_err)?;
    let rows = vec![
        CSV_HEADER.to_string(),
        CsvRow { u: config.u, p_mc: Some((est.p_hat, est.stderr)), p_asympt: None, p_exact: None }
            .line(),
    ];
    Ok((to_value(&config), vec![to_value(&est)], rows))
}

fn cmd_stable(cli: &Cli, raw: &serde_json::Value) -> Result<CommandOutput, CliError> {
    let mut config: StableConfig = serde_json::from_value(raw.clone()).map_err(config_err)?;
    apply_mc_overrides(cli, &mut config.mc);
    let spec = StableSpec::new(config.alpha, config.beta).map_err(config_err)?;
    let est =
        estimate_parisian_stable(&spec, config.c, config.s, config.u, &config.window, &config.mc)
            .map_err(config_err)?;
    let asympt = levy_stable_asymptotic(config.alpha, config.beta, config.s, config.u)
        .map_err(config_err)?;
    let rows = vec![
        CSV_HEADER.to_string(),
        CsvRow {
            u: config.u,
            p_mc: Some((est.p_hat, est.stderr)),
            p_asympt: Some(asympt.value),
            p_exact: None,
        }
        .line(),
    ];
    Ok((to_value(&config), vec![to_value(&est), to_value(&asympt)], rows))
}

fn cmd_constants(cli: &Cli, raw: &serde_json::Value) -> Result<CommandOutput, CliError> {
    let mut config: ConstantsConfig = serde_json::from_value(raw.clone()).map_err(config_err)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(step) = cli.grid_step {
        config.grid_step = step;
    }
    if let Some(n) = cli.n_paths {
        config.n_paths = n;
    }
    let first = *config
        .lambdas
        .first()
        .ok_or_else(|| CliError::Config("lambdas must be non-empty".into()))?;
    let spec = FunctionalSpec {
        mode: config.mode,
        alpha: config.alpha,
        beta: config.beta,
        b1: config.b1,
        b2: config.b2,
        t: config.t,
        lambda: first,
        grid_step: config.grid_step,
    };
    let (fin, rungs) = estimate_with_ladder(&spec, &config.lambdas, config.n_paths, config.seed)
        .map_err(config_err)?;
    let mut rows = vec!["lambda,raw,ratio,stderr".to_string()];
    for r in &rungs {
        rows.push(format!(
            "{},{},{},{}",
            sig17(r.lambda),
            sig17(r.value),
            sig17(r.value / r.lambda),
            sig17(r.stderr)
        ));
    }
    let results = std::iter::once(to_value(&fin)).chain(rungs.iter().map(to_value)).collect();
    Ok((to_value(&config), results, rows))
}

fn req(v: Option<f64>, name: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing parameter `{name}`")))
}

fn cmd_asympt(_cli: &Cli, raw: &serde_json::Value) -> Result<CommandOutput, CliError> {
    let config: AsymptConfig = serde_json::from_value(raw.clone()).map_err(config_err)?;
    let value: AsymptoticValue = match config.regime.as_str() {
        "thm21" => bm_inf_tail_asymptotic(
            req(config.c, "c")?,
            req(config.t1, "t1")?,
            req(config.t2, "t2")?,
            req(config.u, "u")?,
        )
        .map_err(config_err)?,
        "thm31_lower" => {
            // fBm variance V(t) = t^alpha.
            let alpha = config.alpha.unwrap_or(1.0);
            lower_bound_gaussian(
                move |x: f64| x.powf(alpha),
                move |x: f64| alpha * x.powf(alpha - 1.0),
                req(config.c, "c")?,
                req(config.s, "s")?,
                req(config.t, "t")?,
                req(config.u, "u")?,
            )
            .map_err(config_err)?
        }
        "thm32_log" => {
            let model = match config.alpha {
                None => GaussianModel::brownian(),
                Some(a) => GaussianModel::fbm(a).map_err(config_err)?,
            };
            log_rate(&model, req(config.s, "s")?).map_err(config_err)?
        }
        "thm33_i" | "thm33_ii" | "thm33_iii" => {
            let local = config
                .local
                .clone()
                .ok_or_else(|| CliError::Config("thm33 regimes need `local`".into()))?;
            let got = gauss_exact_asymptotic(
                &local,
                req(config.c, "c")?,
                req(config.s, "s")?,
                req(config.u, "u")?,
                req(config.t, "t")?,
                config.constant,
            )
            .map_err(config_err)?;
            check_regime_tag(&got, &config.regime)?;
            got
        }
        "cor34_i" | "cor34_ii" | "cor34_iii" => {
            let got = fbm_corollary_asymptotic(
                req(config.alpha, "alpha")?,
                req(config.c, "c")?,
                req(config.s, "s")?,
                req(config.u, "u")?,
                req(config.t, "t")?,
                config.constant,
            )
            .map_err(config_err)?;
            check_regime_tag(&got, &config.regime)?;
            got
        }
        "prop11_stable" => levy_stable_asymptotic(
            req(config.alpha, "alpha")?,
            req(config.beta, "beta")?,
            req(config.s, "s")?,
            req(config.u, "u")?,
        )
        .map_err(config_err)?,
        "lemma41" => {
            // Built-in half-normal subtraction example, parameterized by u.
            let spec = DiffTailSpec::new(
                1.0,
                |u| u,
                |u| 1.0 - erfc(1.0 / (u * std::f64::consts::SQRT_2)),
                psi,
            )
            .map_err(config_err)?;
            let u = req(config.u, "u")?;
            let v = diff_tail_asymptotic(&spec, u);
            let rows = vec![
                CSV_HEADER.to_string(),
                CsvRow { u, p_mc: None, p_asympt: Some(v), p_exact: None }.line(),
            ];
            let result = serde_json::json!({ "value": v, "regime": "lemma41", "u": u });
            return Ok((to_value(&config), vec![result], rows));
        }
        other => return Err(CliError::UnknownRegime(format!("unknown regime tag `{other}`"))),
    };
    let rows = vec![
        CSV_HEADER.to_string(),
        CsvRow {
            u: config.u.unwrap_or(f64::NAN),
            p_mc: None,
            p_asympt: Some(value.value),
            p_exact: None,
        }
        .line(),
    ];
    Ok((to_value(&config), vec![to_value(&value)], rows))
}

/// The regime actually selected by the evaluator must be the one the user
/// asked for; a mismatch means the parameters live in a different case.
fn check_regime_tag(value: &AsymptoticValue, requested: &str) -> Result<(), CliError> {
    let got = serde_json::to_value(value.regime)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    if got != requested {
        return Err(CliError::Config(format!(
            "parameters select regime `{got}`, not the requested `{requested}`"
        )));
    }
    Ok(())
}

fn cmd_compare(cli: &Cli, raw: &serde_json::Value) -> Result<CommandOutput, CliError> {
    let mut config: CompareConfig = serde_json::from_value(raw.clone()).map_err(config_err)?;
    if let Some(mc) = config.mc.as_mut() {
        apply_mc_overrides(cli, mc);
    }
    if config.us.is_empty() {
        return Err(CliError::Config("u-ladder must be non-empty".into()));
    }
    let mut rows = vec![CSV_HEADER.to_string()];
    let mut results = Vec::new();
    match config.regime.as_str() {
        "thm21" => {
            let c = req(config.c, "c")?;
            let t1 = req(config.t1, "t1")?;
            let t2 = req(config.t2, "t2")?;
            for &u in &config.us {
                let asympt = bm_inf_tail_asymptotic(c, t1, t2, u).map_err(config_err)?;
                let exact = bm_inf_tail_exact(c, t1, t2, u).map_err(config_err)?;
                let mc = config
                    .mc
                    .as_ref()
                    .map(|mc| estimate_interval_inf_is(c, t1, t2, u, mc))
                    .transpose()
                    .map_err(config_err)?;
                rows.push(
                    CsvRow {
                        u,
                        p_mc: mc.as_ref().map(|e| (e.p_hat, e.stderr)),
                        p_asympt: Some(asympt.value),
                        p_exact: Some(exact),
                    }
                    .line(),
                );
                results.push(serde_json::json!({
                    "u": u,
                    "asymptotic": asympt,
                    "exact": exact,
                    "mc": mc,
                }));
            }
        }
        "cor34_iii" => {
            let alpha = req(config.alpha, "alpha")?;
            let c = req(config.c, "c")?;
            let s = req(config.s, "s")?;
            let window = config
                .window
                .ok_or_else(|| CliError::Config("cor34_iii compare needs `window`".into()))?;
            for &u in &config.us {
                let t_u = window.resolve(u);
                let asympt =
                    fbm_corollary_asymptotic(alpha, c, s, u, t_u * u.powf(2.0 / alpha), None)
                        .map_err(config_err)?;
                let mc = config
                    .mc
                    .as_ref()
                    .map(|mc| {
                        let problem = RuinProblem {
                            model: GaussianModel::fbm(alpha)?,
                            c,
                            s,
                            u,
                            window,
                        };
                        estimate_parisian(&problem, mc)
                    })
                    .transpose()
                    .map_err(config_err)?;
                rows.push(
                    CsvRow {
                        u,
                        p_mc: mc.as_ref().map(|e| (e.p_hat, e.stderr)),
                        p_asympt: Some(asympt.value),
                        p_exact: None,
                    }
                    .line(),
                );
                results.push(serde_json::json!({ "u": u, "asymptotic": asympt, "mc": mc }));
            }
        }
        "prop11_stable" => {
            let alpha = req(config.alpha, "alpha")?;
            let beta = req(config.beta, "beta")?;
            let c = req(config.c, "c")?;
            let s = req(config.s, "s")?;
            let window = config
                .window
                .ok_or_else(|| CliError::Config("prop11_stable compare needs `window`".into()))?;
            let spec = StableSpec::new(alpha, beta).map_err(config_err)?;
            for &u in &config.us {
                let asympt = levy_stable_asymptotic(alpha, beta, s, u).map_err(config_err)?;
                let mc = config
                    .mc
                    .as_ref()
                    .map(|mc| estimate_parisian_stable(&spec, c, s, u, &window, mc))
                    .transpose()
                    .map_err(config_err)?;
                rows.push(
                    CsvRow {
                        u,
                        p_mc: mc.as_ref().map(|e| (e.p_hat, e.stderr)),
                        p_asympt: Some(asympt.value),
                        p_exact: None,
                    }
                    .line(),
                );
                results.push(serde_json::json!({ "u": u, "asymptotic": asympt, "mc": mc }));
            }
        }
        other => return Err(CliError::UnknownRegime(format!("unknown regime tag `{other}`"))),
    }
    Ok((to_value(&config), results, rows))
}
