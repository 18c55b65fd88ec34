//! Figure presets, parameter sweeps and CSV result tables.

mod table;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

pub use table::{ResultRow, ResultTable, CSV_HEADER};

use crate::analytic::{backaction_rate_exact, fisher_asymptote, fisher_closed_form, hl_fisher};
use crate::entanglement::{entanglement_trace, Bipartition};
use crate::error::{Error, Result};
use crate::fisher::{estimate_fisher_with, Estimator, RunOptions};
use crate::protocol::{Backend, ProtocolParams};

/// Scenario templates. Every preset starts from desk-scale defaults that
/// overrides can change key by key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// FI versus `N` for a polarized register.
    Fig1Product,
    /// FI versus `N` for a completely mixed register.
    Fig1Mixed,
    /// FI versus `N` at five times the coupling.
    Fig1StrongCoupling,
    /// FI at fixed `N` versus `M`.
    Fig2MSweep,
    /// FI at fixed `N` versus the dephasing rate.
    FigDecGammaSweep,
    /// FI versus `N` for several couplings, with the Heisenberg reference.
    Fig2siRatio,
    /// Mean logarithmic negativity versus `N`.
    Fig3siEntanglement,
    /// FI versus `N` with the product-state defaults.
    Custom,
}

const PRESETS: [(Preset, &str); 8] = [
    (Preset::Fig1Product, "fig1_product"),
    (Preset::Fig1Mixed, "fig1_mixed"),
    (Preset::Fig1StrongCoupling, "fig1_strong_coupling"),
    (Preset::Fig2MSweep, "fig2_M_sweep"),
    (Preset::FigDecGammaSweep, "figdec_gamma_sweep"),
    (Preset::Fig2siRatio, "fig2si_ratio"),
    (Preset::Fig3siEntanglement, "fig3si_entanglement"),
    (Preset::Custom, "custom"),
];

impl Preset {
    pub fn all() -> impl Iterator<Item = Preset> {
        PRESETS.iter().map(|(p, _)| *p)
    }

    pub fn name(self) -> &'static str {
        PRESETS.iter().find(|(p, _)| *p == self).map(|(_, n)| *n).unwrap_or("custom")
    }

    /// The list-valued key through which this preset scans `parameter`, if any.
    fn list_key(self, parameter: &str) -> Option<&'static str> {
        match (self, parameter) {
            (Preset::Fig2MSweep, "M") => Some("M_values"),
            (Preset::FigDecGammaSweep, "gamma2") => Some("gamma2_values"),
            (Preset::Fig2siRatio, "beta") => Some("beta_values"),
            _ => None,
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(p, _)| *p)
            .ok_or_else(|| Error::param("preset", format!("unknown preset `{s}`")))
    }
}

/// Every override key with its unit or accepted values.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("M", "number of auxiliary spins"),
    ("beta", "rad, coupling angle per measurement"),
    ("k0Ts", "dimensionless coupling, sets beta = 2 k0Ts / pi"),
    ("phi", "rad, precession per measurement cycle"),
    ("tau_m", "s, duration of one measurement cycle"),
    ("gamma2", "1/cycle, auxiliary-spin dephasing per cycle"),
    ("polarization", "dimensionless in [0, 1], initial polarization along +x"),
    ("alpha", "rad, sensor readout angle"),
    ("N_max", "measurements per trajectory"),
    ("d_phi", "rad, finite-difference half step on phi"),
    ("runs", "trajectories per estimate"),
    ("checkpoints_per_octave", "checkpoints per doubling of N"),
    ("backend", "auto | dicke | density | grouped"),
    ("dephasing", "local | kick"),
    ("estimator", "conditional | score"),
    ("M_values", "comma list of spin counts (fig2_M_sweep)"),
    ("gamma2_values", "comma list, 1/cycle (figdec_gamma_sweep)"),
    ("beta_values", "comma list, rad (fig2si_ratio)"),
    ("splits", "comma list of m1|m2 bipartitions (fig3si_entanglement)"),
];

/// Parameters a sweep can scan.
pub const SWEEPABLE: &[&str] = &["M", "beta", "gamma2", "phi", "N_max"];

/// What to run and where to put it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Raw `key -> value` overrides; only keys of [`CONFIG_KEYS`] are accepted.
    pub overrides: BTreeMap<String, String>,
    pub output_path: Option<PathBuf>,
    pub base_seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(preset: Preset) -> Self {
        ExperimentConfig {
            preset,
            overrides: BTreeMap::new(),
            output_path: None,
            base_seed: 0,
            threads: None,
        }
    }

    /// Adds one override. Unknown keys and a second, different value for the
    /// same key are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !CONFIG_KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::param(key, "unknown configuration key"));
        }
        let value = value.trim();
        match self.overrides.get(key) {
            Some(old) if old != value => Err(Error::param(
                key,
                format!("conflicting values `{old}` and `{value}`"),
            )),
            _ => {
                self.overrides.insert(key.to_string(), value.to_string());
                Ok(())
            }
        }
    }

    pub fn with(mut self, key: &str, value: &str) -> Result<Self> {
        self.set(key, value)?;
        Ok(self)
    }

    /// Preset defaults with the overrides applied.
    pub fn settings(&self) -> Result<Settings> {
        Settings::resolve(self)
    }
}

/// Fully resolved experiment parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub params: ProtocolParams,
    pub runs: usize,
    pub estimator: Estimator,
    pub m_values: Vec<usize>,
    pub gamma2_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub splits: Vec<Bipartition>,
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::param(key, format!("cannot parse `{v}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Integer-valued key that also accepts `2^k`.
fn parse_count(key: &str, v: &str) -> Result<u64> {
    if let Some(exp) = v.strip_prefix("2^") {
        let e: u32 = parse(key, exp)?;
        return 1u64
            .checked_shl(e)
            .filter(|_| e < 64)
            .ok_or_else(|| Error::param(key, "exponent too large"));
    }
    parse(key, v)
}

impl Settings {
    fn defaults(preset: Preset) -> Settings {
        let beta = 0.02 / PI;
        let mut params = ProtocolParams::new(20, beta, 0.7, 1 << 20);
        params.checkpoints_per_octave = 4;
        let mut s = Settings {
            params,
            runs: 96,
            estimator: Estimator::Conditional,
            m_values: Vec::new(),
            gamma2_values: Vec::new(),
            beta_values: Vec::new(),
            splits: Vec::new(),
        };
        match preset {
            Preset::Fig1Product | Preset::Custom => {}
            Preset::Fig1Mixed => {
                s.params.polarization = 0.0;
                s.params.backend = Backend::Grouped;
                s.runs = 32;
            }
            Preset::Fig1StrongCoupling => {
                s.params.beta = 0.1 / PI;
                s.params.n_max = 1 << 18;
            }
            Preset::Fig2MSweep => {
                s.params.n_max = 1 << 18;
                s.params.checkpoints_per_octave = 1;
                s.m_values = vec![5, 10, 20, 40];
            }
            Preset::FigDecGammaSweep => {
                s.params.m = 10;
                s.params.n_max = 1 << 18;
                s.params.checkpoints_per_octave = 1;
                s.runs = 24;
                s.gamma2_values = vec![1e-5, 3e-5, 1e-4, 3e-4, 1e-3];
            }
            Preset::Fig2siRatio => {
                s.params.n_max = 1 << 18;
                s.beta_values = vec![0.02 / PI, 0.1 / PI];
            }
            Preset::Fig3siEntanglement => {
                s.params.m = 10;
                s.params.n_max = 1 << 16;
                s.runs = 200;
            }
        }
        s
    }

    fn resolve(config: &ExperimentConfig) -> Result<Settings> {
        let mut s = Settings::defaults(config.preset);
        let o = &config.overrides;
        if o.contains_key("beta") && o.contains_key("k0Ts") {
            return Err(Error::param("k0Ts", "set either beta or k0Ts, not both"));
        }
        let mut splits_given = false;
        for (key, v) in o {
            let p = &mut s.params;
            match key.as_str() {
                "M" => p.m = parse(key, v)?,
                "beta" => p.beta = parse(key, v)?,
                "k0Ts" => p.beta = 2.0 * parse::<f64>(key, v)? / PI,
                "phi" => p.phi = parse(key, v)?,
                "tau_m" => p.tau_m = parse(key, v)?,
                "gamma2" => p.gamma2 = parse(key, v)?,
                "polarization" => p.polarization = parse(key, v)?,
                "alpha" => p.alpha = parse(key, v)?,
                "N_max" => p.n_max = parse_count(key, v)?,
                "d_phi" => p.d_phi = Some(parse(key, v)?),
                "runs" => s.runs = parse(key, v)?,
                "checkpoints_per_octave" => p.checkpoints_per_octave = parse(key, v)?,
                "backend" => p.backend = v.parse()?,
                "dephasing" => p.dephasing = v.parse()?,
                "estimator" => s.estimator = v.parse()?,
                "M_values" => s.m_values = parse_list(key, v)?,
                "gamma2_values" => s.gamma2_values = parse_list(key, v)?,
                "beta_values" => s.beta_values = parse_list(key, v)?,
                "splits" => {
                    s.splits = v
                        .split(',')
                        .map(str::trim)
                        .filter(|x| !x.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?;
                    splits_given = true;
                }
                _ => return Err(Error::param(key.as_str(), "unknown configuration key")),
            }
        }
        if config.preset == Preset::Fig3siEntanglement && !splits_given {
            s.splits = vec![Bipartition::single(s.params.m)?, Bipartition::equal(s.params.m)?];
        }
        if s.runs < 2 {
            return Err(Error::param("runs", "at least 2 runs are required"));
        }
        if s.m_values.contains(&0) {
            return Err(Error::param("M_values", "spin counts must be positive"));
        }
        s.params.validate()?;
        Ok(s)
    }

    /// `key=value` lines echoed into the CSV header.
    fn describe(&self, preset: Preset) -> Vec<String> {
        let p = &self.params;
        let mut out = vec![
            format!("M={}", p.m),
            format!("beta={:e}", p.beta),
            format!("phi={:e}", p.phi),
            format!("tau_m={:e}", p.tau_m),
            format!("gamma2={:e}", p.gamma2),
            format!("polarization={:e}", p.polarization),
            format!("alpha={:e}", p.alpha),
            format!("N_max={}", p.n_max),
            format!("d_phi={:e}", p.d_phi()),
            format!("runs={}", self.runs),
            format!("checkpoints_per_octave={}", p.checkpoints_per_octave),
            format!("backend={}", p.backend),
            format!("dephasing={}", p.dephasing),
            format!("estimator={}", self.estimator),
        ];
        let join = |v: Vec<String>| v.join(",");
        match preset {
            Preset::Fig2MSweep => out.push(format!(
                "M_values={}",
                join(self.m_values.iter().map(|m| m.to_string()).collect())
            )),
            Preset::FigDecGammaSweep => out.push(format!(
                "gamma2_values={}",
                join(self.gamma2_values.iter().map(|g| format!("{g:e}")).collect())
            )),
            Preset::Fig2siRatio => out.push(format!(
                "beta_values={}",
                join(self.beta_values.iter().map(|b| format!("{b:e}")).collect())
            )),
            Preset::Fig3siEntanglement => out.push(format!(
                "splits={}",
                join(self.splits.iter().map(|s| s.to_string()).collect())
            )),
            _ => {}
        }
        out
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Closed-form companions of a Fisher row: small-`N` law, long-time
/// asymptote and Heisenberg reference.
fn overlays(p: &ProtocolParams, n: u64) -> (Option<f64>, Option<f64>, Option<f64>) {
    let k0ts = p.beta * PI / 2.0;
    let Ok(gamma_b) = backaction_rate_exact(p.beta, 0.0) else {
        return (None, None, None);
    };
    let eq9 = fisher_closed_form(n, p.m, k0ts, p.tau_m, gamma_b + p.gamma2)
        .ok()
        .and_then(|f| finite(f.value));
    let eq14 = fisher_asymptote(n, p.m, k0ts, p.tau_m, gamma_b, p.gamma2)
        .ok()
        .and_then(|f| finite(f.leading));
    (eq9, eq14, finite(hl_fisher(p.m, n as f64, p.tau_m)))
}

fn fisher_rows(
    preset: Preset,
    tag: &str,
    s: &Settings,
    params: &ProtocolParams,
    seed: u64,
    options: &RunOptions,
    final_only: bool,
) -> Result<ResultTable> {
    let est = estimate_fisher_with(params, s.runs, seed, options)?;
    let (mean, se) = est.series(s.estimator);
    let first = if final_only { est.checkpoints.len() - 1 } else { 0 };
    let rows = (first..est.checkpoints.len())
        .map(|i| {
            let n = est.checkpoints[i];
            let (eq9, eq14, hl) = overlays(params, n);
            ResultRow {
                preset,
                param_tag: tag.to_string(),
                n,
                m: params.m,
                beta: params.beta,
                gamma2: params.gamma2,
                phi: params.phi,
                mean_fi: Some(mean[i]),
                std_err: Some(se[i]),
                runs: est.runs,
                analytic_eq9: eq9,
                analytic_eq14: eq14,
                hl_fisher: hl,
                mean_ln: None,
                ln_split: None,
            }
        })
        .collect();
    Ok(ResultTable {
        comments: Vec::new(),
        rows,
        aborted: est.aborted,
    })
}

fn entanglement_rows(s: &Settings, seed: u64, options: &RunOptions) -> Result<ResultTable> {
    let p = &s.params;
    let trace = entanglement_trace(p, &s.splits, s.runs, seed, options)?;
    let mut rows = Vec::new();
    for (si, split) in trace.splits.iter().enumerate() {
        for (ci, &n) in trace.checkpoints.iter().enumerate() {
            rows.push(ResultRow {
                preset: Preset::Fig3siEntanglement,
                param_tag: format!("split={split}"),
                n,
                m: p.m,
                beta: p.beta,
                gamma2: p.gamma2,
                phi: p.phi,
                mean_fi: None,
                std_err: Some(trace.std_error[si][ci]),
                runs: trace.runs,
                analytic_eq9: None,
                analytic_eq14: None,
                hl_fisher: None,
                mean_ln: Some(trace.mean_ln[si][ci]),
                ln_split: Some(*split),
            });
        }
    }
    Ok(ResultTable {
        comments: Vec::new(),
        rows,
        aborted: 0,
    })
}

fn header(config: &ExperimentConfig, s: &Settings) -> Vec<String> {
    let mut c = vec![
        format!("hybridsense {}", env!("CARGO_PKG_VERSION")),
        format!("preset={}", config.preset),
        format!("base_seed={}", config.base_seed),
    ];
    c.extend(s.describe(config.preset));
    c
}

/// Runs the preset without writing anything.
pub fn build_table(config: &ExperimentConfig) -> Result<ResultTable> {
    let s = config.settings()?;
    let options = RunOptions {
        threads: config.threads,
    };
    let seed = config.base_seed;
    let preset = config.preset;
    let mut table = ResultTable {
        comments: header(config, &s),
        ..ResultTable::default()
    };
    match preset {
        Preset::Fig2MSweep => {
            for &m in &s.m_values {
                let mut p = s.params.clone();
                p.m = m;
                table.extend(fisher_rows(preset, &format!("M={m}"), &s, &p, seed, &options, true)?);
            }
        }
        Preset::FigDecGammaSweep => {
            for &g in &s.gamma2_values {
                let mut p = s.params.clone();
                p.gamma2 = g;
                table.extend(fisher_rows(preset, &format!("gamma2={g:e}"), &s, &p, seed, &options, true)?);
            }
        }
        Preset::Fig2siRatio => {
            for &b in &s.beta_values {
                let mut p = s.params.clone();
                p.beta = b;
                table.extend(fisher_rows(preset, &format!("beta={b:e}"), &s, &p, seed, &options, false)?);
            }
        }
        Preset::Fig3siEntanglement => table.extend(entanglement_rows(&s, seed, &options)?),
        _ => table.extend(fisher_rows(preset, "base", &s, &s.params, seed, &options, false)?),
    }
    Ok(table)
}

/// Runs the preset and writes the CSV to `output_path`, if set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    let table = build_table(config)?;
    if let Some(path) = &config.output_path {
        table.write_to(path)?;
    }
    Ok(table)
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

/// Runs `base` once per value of `parameter`, all with the same seeds, and
/// concatenates the tables. Rows carry `parameter=value` in `param_tag`.
pub fn sweep(parameter: &str, values: &[f64], base: &ExperimentConfig) -> Result<ResultTable> {
    if !SWEEPABLE.contains(&parameter) {
        return Err(Error::param(
            parameter,
            format!("not sweepable; choose one of {}", SWEEPABLE.join(", ")),
        ));
    }
    let key = base.preset.list_key(parameter).unwrap_or(parameter);
    let mut table = ResultTable::default();
    // Validate the base before running anything.
    let s = base.settings()?;
    table.comments = header(base, &s);
    table.comments.push(format!(
        "sweep {parameter}={}",
        values.iter().map(|v| format_value(*v)).collect::<Vec<_>>().join(",")
    ));
    let mut configs = Vec::with_capacity(values.len());
    for &v in values {
        let mut c = base.clone();
        c.output_path = None;
        c.overrides.remove(key);
        if parameter == "beta" {
            c.overrides.remove("k0Ts");
        }
        c.set(key, &format_value(v))?;
        c.settings()?;
        configs.push((v, c));
    }
    for (v, c) in configs {
        let mut block = build_table(&c)?;
        let tag = format!("{parameter}={}", format_value(v));
        for r in &mut block.rows {
            r.param_tag = if r.param_tag == "base" || r.param_tag == tag {
                tag.clone()
            } else {
                format!("{tag};{}", r.param_tag)
            };
        }
        table.extend(block);
    }
    if let Some(path) = &base.output_path {
        table.write_to(path)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke() -> ExperimentConfig {
        ExperimentConfig::new(Preset::Custom)
            .with("runs", "2")
            .unwrap()
            .with("N_max", "16")
            .unwrap()
            .with("M", "2")
            .unwrap()
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::all() {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("fig9".parse::<Preset>().is_err());
    }

    #[test]
    fn unknown_and_conflicting_keys_rejected() {
        let mut c = ExperimentConfig::new(Preset::Custom);
        assert!(c.set("Mx", "3").is_err());
        c.set("M", "3").unwrap();
        c.set("M", "3").unwrap();
        let err = c.set("M", "4").unwrap_err();
        assert!(err.to_string().contains("`M`"));
        let c = ExperimentConfig::new(Preset::Custom)
            .with("beta", "0.1")
            .unwrap()
            .with("k0Ts", "0.1")
            .unwrap();
        assert!(c.settings().is_err());
    }

    #[test]
    fn custom_smoke_table_is_complete() {
        let t = run_experiment(&smoke()).unwrap();
        let csv = t.to_csv();
        let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, CSV_HEADER);
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert_eq!(rows.len(), t.rows.len());
        for r in rows {
            let cols: Vec<&str> = r.split(',').collect();
            assert_eq!(cols.len(), 15);
            assert!(!r.contains("NaN") && !r.contains("inf"));
            assert!(!cols[7].is_empty());
        }
        assert!(csv.ends_with("# aborted_runs=0\n"));
    }

    #[test]
    fn power_of_two_counts() {
        let s = ExperimentConfig::new(Preset::Custom)
            .with("N_max", "2^10")
            .unwrap()
            .settings()
            .unwrap();
        assert_eq!(s.params.n_max, 1024);
    }

    #[test]
    fn sweep_tags_and_empty() {
        let t = sweep("M", &[], &smoke()).unwrap();
        assert!(t.is_empty());
        assert!(sweep("tau_m", &[1.0], &smoke()).is_err());
        let t = sweep("M", &[1.0, 3.0], &smoke()).unwrap();
        assert!(t.rows.iter().any(|r| r.param_tag == "M=1" && r.m == 1));
        assert!(t.rows.iter().any(|r| r.param_tag == "M=3" && r.m == 3));
    }

    #[test]
    fn entanglement_rows_carry_split() {
        let c = ExperimentConfig::new(Preset::Fig3siEntanglement)
            .with("runs", "2")
            .unwrap()
            .with("N_max", "32")
            .unwrap()
            .with("M", "4")
            .unwrap();
        let t = build_table(&c).unwrap();
        assert!(t.rows.iter().all(|r| r.ln_split.is_some() && r.mean_fi.is_none()));
        assert!(t.rows.iter().any(|r| r.ln_split == Some(Bipartition::new(2, 2).unwrap())));
        assert!(t.rows.iter().any(|r| r.ln_split == Some(Bipartition::new(1, 3).unwrap())));
    }
}
