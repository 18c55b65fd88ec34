//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input (unknown flags, bad keys or
//! values), 2 when a run fails (underflow, I/O, a failed cross-check).

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analytic::{self, PhysicalConstants};
use crate::error::{Error, Result};
use crate::experiments::{
    run_experiment, sweep, ExperimentConfig, Preset, CONFIG_KEYS, SWEEPABLE,
};
use crate::fisher::RunOptions;
use crate::protocol::{run_trajectory_with, TrajectoryOptions};
use crate::validation::run_validation;

const ANALYTIC_HELP: &str = "\
Analytic functions (key=value arguments; defaults in brackets):
  gamma_b              k0Ts | beta                      leading backaction rate beta^2
  gamma_exact          k0Ts | beta, gamma2 [0]          -ln((1 + cos 2 beta)/2) + gamma2
  beta                 k0Ts | A_perp, Ts                effective coupling
  signal               n, M, k0Ts, phi                  small-coupling readout probability
  signal_general       couplings, phases, P [1], alpha [pi/2]   exact product formula
  fisher_sum           N, M, k0Ts, phi, tau_m [1], gamma [exact backaction + gamma2]
  fisher_closed        N, M, k0Ts, tau_m [1], gamma [...]    closed form
  fisher_expansion     N, M, k0Ts, tau_m [1], gamma [...]    three-term expansion
  asymptote            N, M, k0Ts, tau_m [1], gamma2 [0]     long-time Fisher information
  asymptote_corrected  N, M, k0Ts, tau_m [1], gamma2 [0]
  hl_fisher            M, N, tau_m [1]                  Heisenberg-limited Fisher information
  heisenberg           M, T [s]                         Ramsey limit (T)
  uncertainty_bound    N, M, k0Ts, tau_m [1]            field uncertainty in the N^3 regime (T)
  nv_alone             T2_nv [s], T [s]                 optimal bare-sensor uncertainty (T)
  crossover_M          ratio                            smallest M that beats the bare sensor
  crossover_prefactor                                   27/(4e)
  cramer_rao           I                                1/sqrt(I)
Physical constants default to an NV centre with carbon-13 spins; override
with hbar, mu_n, mu_e. `digits` [4] sets the printed precision.";

fn keys_help() -> String {
    let mut s = String::from("Configuration keys (key=value, in a --config file or inline):\n");
    for (k, unit) in CONFIG_KEYS {
        s.push_str(&format!("  {k:<24} {unit}\n"));
    }
    s.push_str("\nPresets: ");
    s.push_str(&Preset::all().map(|p| p.name()).collect::<Vec<_>>().join(", "));
    s.push_str("\nInline keys override the config file. Threads default to HYBRIDSENSE_THREADS or all cores.");
    s
}

#[derive(Parser, Debug)]
#[command(name = "hybridsense", version, about = "Sequential weak-measurement magnetometry simulator", after_help = keys_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, or `auto`.
    #[arg(long, env = "HYBRIDSENSE_THREADS")]
    threads: Option<String>,
    /// Output file (default: standard output).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Scenario preset.
    #[arg(long)]
    preset: Option<String>,
    /// key=value overrides.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one measurement record and print its checkpoint log-likelihoods.
    #[command(after_help = keys_help())]
    Simulate(Common),
    /// Estimate the Fisher information for a preset and write a CSV table.
    #[command(after_help = keys_help())]
    Fisher(Common),
    /// Evaluate a closed-form expression.
    #[command(after_help = ANALYTIC_HELP)]
    Analytic {
        /// Function name.
        name: String,
        #[arg(value_name = "KEY=VALUE")]
        args: Vec<String>,
    },
    /// Track the mean logarithmic negativity and write a CSV table.
    #[command(after_help = keys_help())]
    Entangle(Common),
    /// Repeat a preset over values of one parameter (M, beta, gamma2, phi, N_max).
    #[command(after_help = keys_help())]
    Sweep {
        /// Parameter to scan.
        parameter: String,
        /// Comma-separated values.
        values: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the brute-force cross-checks.
    Validate {
        /// Largest register for the full-space comparisons.
        #[arg(long = "max-M", default_value_t = 6)]
        max_m: usize,
        #[arg(long, env = "HYBRIDSENSE_THREADS")]
        threads: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Failure of a command, split by exit code.
enum Failure {
    Input(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Input(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn split_pair(s: &str) -> CliResult<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Failure::Input(format!("expected key=value, got `{s}`")))
}

/// Collects pairs, rejecting a key given twice with different values.
fn collect_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (k, v) in pairs {
        if let Some(old) = map.get(&k) {
            if *old != v {
                return Err(Failure::Input(format!(
                    "invalid parameter `{k}`: conflicting values `{old}` and `{v}`"
                )));
            }
        }
        map.insert(k, v);
    }
    Ok(map)
}

fn read_config(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("I/O error on {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let pair = split_pair(line).map_err(|_| {
            Failure::Input(format!("{}:{}: expected key=value", path.display(), i + 1))
        })?;
        pairs.push(pair);
    }
    collect_pairs(pairs)
}

fn threads(arg: &Option<String>) -> CliResult<Option<usize>> {
    match arg.as_deref() {
        None | Some("auto") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Input(format!(
                "invalid parameter `threads`: expected a positive integer or `auto`, got `{v}`"
            ))),
        },
    }
}

/// Builds the experiment configuration: file first, inline pairs on top.
fn configure(common: &Common, default: Preset) -> CliResult<ExperimentConfig> {
    let mut merged = match &common.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    let inline = collect_pairs(
        common
            .overrides
            .iter()
            .map(|s| split_pair(s))
            .collect::<CliResult<Vec<_>>>()?,
    )?;
    merged.extend(inline);
    let preset = match common.preset.clone().or(merged.remove("preset")) {
        Some(p) => p.parse::<Preset>()?,
        None => default,
    };
    let file_seed = merged
        .remove("seed")
        .map(|s| s.parse::<u64>())
        .transpose()
        .map_err(|_| Failure::Input("invalid parameter `seed`: expected an integer".into()))?;
    let mut config = ExperimentConfig::new(preset);
    for (k, v) in &merged {
        config.set(k, v)?;
    }
    config.base_seed = common.seed.or(file_seed).unwrap_or(0);
    config.threads = threads(&common.threads)?;
    // Surface bad values before any computation starts.
    config.settings()?;
    Ok(config)
}

fn emit(output: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Runtime(format!("I/O error on {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Runtime(format!("cannot write to standard output: {e}")))
        }
    }
}

fn cmd_simulate(common: &Common) -> CliResult<()> {
    let config = configure(common, Preset::Custom)?;
    let settings = config.settings()?;
    let params = &settings.params;
    let rec = run_trajectory_with(params, config.base_seed, &TrajectoryOptions::default(), None)?;
    let mut text = format!(
        "# hybridsense {}\n# seed={}\n# M={} beta={:e} phi={:e} gamma2={:e} N_max={}\n",
        env!("CARGO_PKG_VERSION"),
        config.base_seed,
        params.m,
        params.beta,
        params.phi,
        params.gamma2,
        params.n_max
    );
    text.push_str("N,plus_count,log_p,score,conditional_fi\n");
    let scores = rec.scores();
    let mut plus = 0u64;
    let mut n = 0u64;
    for (i, &cp) in rec.checkpoints.iter().enumerate() {
        while n < cp {
            plus += rec.outcome(n) as u64;
            n += 1;
        }
        text.push_str(&format!(
            "{cp},{plus},{:e},{:e},{:e}\n",
            rec.log_p[i], scores[i], rec.conditional_fisher[i]
        ));
    }
    emit(&common.output, &text)
}

fn cmd_table(common: &Common, default: Preset, allowed: impl Fn(Preset) -> bool, what: &str) -> CliResult<()> {
    let mut config = configure(common, default)?;
    if !allowed(config.preset) {
        return Err(Failure::Input(format!(
            "invalid parameter `preset`: {} is not a {what} preset",
            config.preset
        )));
    }
    config.output_path = common.output.clone();
    let table = run_experiment(&config)?;
    if config.output_path.is_none() {
        emit(&None, &table.to_csv())?;
    }
    eprintln!("{}: {} rows, {} aborted runs", config.preset, table.rows.len(), table.aborted);
    Ok(())
}

fn cmd_sweep(parameter: &str, values: &str, common: &Common) -> CliResult<()> {
    if !SWEEPABLE.contains(&parameter) {
        return Err(Failure::Input(format!(
            "invalid parameter `{parameter}`: not sweepable; choose one of {}",
            SWEEPABLE.join(", ")
        )));
    }
    let vals = values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Failure::Input(format!("invalid parameter `{parameter}`: bad value `{s}`")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    let mut config = configure(common, Preset::Fig1Product)?;
    config.output_path = common.output.clone();
    let table = sweep(parameter, &vals, &config)?;
    if config.output_path.is_none() {
        emit(&None, &table.to_csv())?;
    }
    eprintln!("sweep {parameter}: {} rows, {} aborted runs", table.rows.len(), table.aborted);
    Ok(())
}

fn cmd_validate(max_m: usize, threads_arg: &Option<String>, output: &Option<PathBuf>) -> CliResult<()> {
    let options = RunOptions {
        threads: threads(threads_arg)?,
    };
    let results = run_validation(max_m, &options)?;
    let mut text = String::new();
    for r in &results {
        text.push_str(&format!(
            "{} {}: {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        ));
    }
    emit(output, &text)?;
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} cross-check(s) failed")));
    }
    Ok(())
}

/// Key lookup for `analytic`; remembers which keys were consumed.
struct Query {
    map: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Query {
    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.map.get(key).map(String::as_str)
    }

    fn opt(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::param(key, format!("cannot parse `{v}`")))
            })
            .transpose()
    }

    fn num(&self, key: &str) -> Result<f64> {
        self.opt(key)?.ok_or_else(|| Error::param(key, "required"))
    }

    fn or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn count(&self, key: &str) -> Result<u64> {
        let v = self.num(key)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::param(key, "must be a non-negative integer"));
        }
        Ok(v as u64)
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.raw(key).ok_or_else(|| Error::param(key, "required"))?;
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::param(key, format!("cannot parse `{s}`")))
            })
            .collect()
    }

    /// `k0Ts`, or `beta` converted to it.
    fn k0ts(&self) -> Result<f64> {
        match (self.opt("k0Ts")?, self.opt("beta")?) {
            (Some(_), Some(_)) => Err(Error::param("k0Ts", "give either k0Ts or beta")),
            (Some(k), None) => Ok(k),
            (None, Some(b)) => Ok(b * std::f64::consts::PI / 2.0),
            (None, None) => Err(Error::param("k0Ts", "required (or beta)")),
        }
    }

    fn constants(&self) -> Result<PhysicalConstants> {
        let d = PhysicalConstants::nv_carbon13();
        PhysicalConstants::new(self.or("hbar", d.hbar)?, self.or("mu_n", d.mu_n)?, self.or("mu_e", d.mu_e)?)
    }

    fn gamma(&self, k0ts: f64) -> Result<f64> {
        match self.opt("gamma")? {
            Some(g) => Ok(g),
            None => analytic::backaction_rate_exact(analytic::beta_from_k0ts(k0ts), self.or("gamma2", 0.0)?),
        }
    }

    fn finish(&self, name: &str) -> Result<()> {
        let used = self.used.borrow();
        match self.map.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(Error::param(k.as_str(), format!("not an argument of `{name}`"))),
            None => Ok(()),
        }
    }
}

fn evaluate(name: &str, q: &Query) -> Result<f64> {
    use analytic::*;
    let v = match name {
        "gamma_b" => backaction_rate_approx(beta_from_k0ts(q.k0ts()?)),
        "gamma_exact" => backaction_rate_exact(beta_from_k0ts(q.k0ts()?), q.or("gamma2", 0.0)?)?,
        "beta" => match q.opt("A_perp")? {
            Some(a) => crate::protocol::effective_beta(a, q.num("Ts")?)?,
            None => beta_from_k0ts(q.num("k0Ts")?),
        },
        "signal" => signal_probability(q.count("n")?, q.count("M")? as usize, q.num("k0Ts")?, q.num("phi")?),
        "signal_general" => signal_probability_general(
            &q.list("couplings")?,
            &q.list("phases")?,
            q.or("P", 1.0)?,
            q.or("alpha", std::f64::consts::FRAC_PI_2)?,
        )?,
        "fisher_sum" => {
            let k = q.num("k0Ts")?;
            let g = q.gamma(k)?;
            fisher_sum_exact(q.count("N")?, q.count("M")? as usize, k, q.or("tau_m", 1.0)?, g, q.num("phi")?)?
        }
        "fisher_closed" | "fisher_expansion" => {
            let k = q.num("k0Ts")?;
            let g = q.gamma(k)?;
            let f = fisher_closed_form(q.count("N")?, q.count("M")? as usize, k, q.or("tau_m", 1.0)?, g)?;
            if name == "fisher_closed" {
                f.value
            } else {
                f.expansion
            }
        }
        "asymptote" | "asymptote_corrected" => {
            let k = q.num("k0Ts")?;
            let gb = backaction_rate_approx(beta_from_k0ts(k));
            let a = fisher_asymptote(
                q.count("N")?,
                q.count("M")? as usize,
                k,
                q.or("tau_m", 1.0)?,
                gb,
                q.or("gamma2", 0.0)?,
            )?;
            if name == "asymptote" {
                a.leading
            } else {
                a.corrected
            }
        }
        "hl_fisher" => hl_fisher(q.count("M")? as usize, q.num("N")?, q.or("tau_m", 1.0)?),
        "heisenberg" => heisenberg_uncertainty(q.count("M")? as usize, q.num("T")?, &q.constants()?)?,
        "uncertainty_bound" => uncertainty_bound(
            q.count("N")?,
            q.count("M")? as usize,
            q.num("k0Ts")?,
            q.or("tau_m", 1.0)?,
            &q.constants()?,
        )?,
        "nv_alone" => nv_alone_uncertainty(q.num("T2_nv")?, q.num("T")?, &q.constants()?)?,
        "crossover_M" => crossover_m(q.num("ratio")?)?,
        "crossover_prefactor" => crossover_prefactor(),
        "cramer_rao" => cramer_rao(q.num("I")?)?,
        other => return Err(Error::param("analytic", format!("unknown function `{other}`"))),
    };
    Ok(v)
}

fn cmd_analytic(name: &str, args: &[String]) -> CliResult<()> {
    let map = collect_pairs(args.iter().map(|s| split_pair(s)).collect::<CliResult<Vec<_>>>()?)?;
    let q = Query {
        map,
        used: RefCell::new(BTreeSet::new()),
    };
    let digits = q.or("digits", 4.0)?;
    if !(0.0..=17.0).contains(&digits) || digits.fract() != 0.0 {
        return Err(Failure::Input("invalid parameter `digits`: expected 0..=17".into()));
    }
    let v = evaluate(name, &q)?;
    q.finish(name)?;
    emit(&None, &format!("{v:.*e}\n", digits as usize))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Fisher(c) => cmd_table(c, Preset::Fig1Product, |p| p != Preset::Fig3siEntanglement, "Fisher"),
        Command::Entangle(c) => cmd_table(c, Preset::Fig3siEntanglement, |p| p == Preset::Fig3siEntanglement, "entanglement"),
        Command::Analytic { name, args } => cmd_analytic(name, args),
        Command::Sweep {
            parameter,
            values,
            common,
        } => cmd_sweep(parameter, values, common),
        Command::Validate {
            max_m,
            threads,
            output,
        } => cmd_validate(*max_m, threads, output),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}
