//! Scenario files.
//!
//! Flat `key = value` text, one key per line; `#` starts a comment and
//! blank lines are ignored. Unknown keys are errors.
//!
//! | key               | value                                    | default    |
//! |-------------------|------------------------------------------|------------|
//! | `id`              | free text without commas                 | `scenario` |
//! | `K`               | number of users                          | required   |
//! | `Nt`              | number of transmit antennas              | required   |
//! | `modulation`      | `qpsk`, `16qam`, `psk:M`, `qam:M`, ...   | required   |
//! | `mode`            | `pm` or `sb`                             | required   |
//! | `sweep`           | comma-separated dB values (`-inf` ok)    | required   |
//! | `budget`          | SB power budget `p`                      | `1`        |
//! | `channels`        | channel realizations `N_c`               | `1`        |
//! | `slots`           | symbol slots per frame `N_s`             | `20`       |
//! | `seed`            | 64-bit seed                              | `0`        |
//! | `solver`          | `pif` or `oracle`                        | `pif`      |
//! | `precoder`        | `slp` or `zf` (SB only)                  | `slp`      |
//! | `rho`             | ADMM penalty                             | protocol   |
//! | `beta`            | dual damping                             | protocol   |
//! | `tau_factor`      | `τ = tau_factor·ρ‖A‖²`                   | protocol   |
//! | `tau`             | fixed `τ` (overrides `tau_factor`)       | unset      |
//! | `partition`       | `scalar`, `antenna`, `contiguous:N`      | protocol   |
//! | `iters`           | fixed iteration count, or `delta`        | protocol   |
//! | `delta_tol`       | stopping threshold on `‖xᵗ − xᵗ⁻¹‖`      | protocol   |
//! | `max_iters`       | iteration cap in Δ mode                  | protocol   |
//! | `parallel_blocks` | `true` / `false`                         | `false`    |
//! | `oracle_tol`      | KKT tolerance of the oracle              | `1e-9`     |
//!
//! "protocol" means the value from [`default_config`] for the scenario's
//! size, modulation and mode.

use std::path::Path;

use crate::ci_model::PartitionStrategy;
use crate::constellation::ConstellationSpec;
use crate::error::{Error, Result};
use crate::oracle::OracleConfig;
use crate::pif::{default_config, Mode, PjAdmmConfig, Tau};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Pif,
    Oracle,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pif" => Ok(SolverKind::Pif),
            "oracle" => Ok(SolverKind::Oracle),
            other => Err(Error::param(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precoder {
    Slp,
    ZeroForcing,
}

impl std::str::FromStr for Precoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slp" => Ok(Precoder::Slp),
            "zf" => Ok(Precoder::ZeroForcing),
            other => Err(Error::param(format!("unknown precoder '{other}'"))),
        }
    }
}

/// Optional overrides of the protocol solver parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverOverrides {
    pub rho: Option<f64>,
    pub beta: Option<f64>,
    pub tau_factor: Option<f64>,
    pub tau: Option<f64>,
    pub partition: Option<PartitionStrategy>,
    /// `Some(None)` switches to Δ mode.
    pub iters: Option<Option<usize>>,
    pub delta_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub parallel_blocks: Option<bool>,
}

impl SolverOverrides {
    /// Applies one solver key; returns `false` if `key` is not a solver key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let v = value.trim();
        match key.trim() {
            "rho" => self.rho = Some(num(key, v)?),
            "beta" => self.beta = Some(num(key, v)?),
            "tau_factor" => self.tau_factor = Some(num(key, v)?),
            "tau" => self.tau = Some(num(key, v)?),
            "partition" => self.partition = Some(v.parse()?),
            "iters" => {
                self.iters = Some(if v.eq_ignore_ascii_case("delta") {
                    None
                } else {
                    Some(num(key, v)?)
                })
            }
            "delta_tol" => self.delta_tol = Some(num(key, v)?),
            "max_iters" => self.max_iters = Some(num(key, v)?),
            "parallel_blocks" => self.parallel_blocks = Some(parse_bool(key, v)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn apply(&self, mut cfg: PjAdmmConfig) -> PjAdmmConfig {
        if let Some(r) = self.rho {
            cfg.rho = r;
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(f) = self.tau_factor {
            cfg.tau = Tau::SpectralScaled(f);
        }
        if let Some(t) = self.tau {
            cfg.tau = Tau::Fixed(t);
        }
        if let Some(p) = self.partition {
            cfg.partition = p;
        }
        if let Some(it) = self.iters {
            cfg.fixed_iters = it;
            if let Some(n) = it {
                cfg.max_iters = n;
            }
        }
        if let Some(d) = self.delta_tol {
            cfg.delta_tol = d;
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
        if let Some(p) = self.parallel_blocks {
            cfg.parallel_blocks = p;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub users: usize,
    pub antennas: usize,
    pub modulation: ConstellationSpec,
    pub mode: Mode,
    /// γ in dB (PM) or SNR in dB (SB).
    pub sweep: Vec<f64>,
    pub budget: f64,
    pub channels: usize,
    pub slots: usize,
    pub seed: u64,
    pub solver: SolverKind,
    pub precoder: Precoder,
    pub overrides: SolverOverrides,
    pub oracle_tol: f64,
}

#[derive(Default)]
struct Builder {
    id: Option<String>,
    users: Option<usize>,
    antennas: Option<usize>,
    modulation: Option<ConstellationSpec>,
    mode: Option<Mode>,
    sweep: Option<Vec<f64>>,
    budget: Option<f64>,
    channels: Option<usize>,
    slots: Option<usize>,
    seed: Option<u64>,
    solver: Option<SolverKind>,
    precoder: Option<Precoder>,
    overrides: SolverOverrides,
    oracle_tol: Option<f64>,
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(format!("{key}: cannot parse '{value}'")))
}

fn parse_db(key: &str, v: &str) -> Result<f64> {
    match v.to_ascii_lowercase().as_str() {
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => {
            let x: f64 = num(key, v)?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::param(format!("{key}: '{v}' is not a finite dB value")))
            }
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::param(format!("{key}: expected true/false, got '{v}'"))),
    }
}

impl Builder {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "id" => {
                if v.is_empty() || v.contains(',') || v.contains('\n') {
                    return Err(Error::param("id must be nonempty and contain no commas"));
                }
                self.id = Some(v.to_string());
            }
            "K" => self.users = Some(num(key, v)?),
            "Nt" => self.antennas = Some(num(key, v)?),
            "modulation" => self.modulation = Some(ConstellationSpec::from_name(v)?),
            "mode" => self.mode = Some(v.parse()?),
            "sweep" => {
                self.sweep = Some(
                    v.split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| parse_db(key, s.trim()))
                        .collect::<Result<_>>()?,
                )
            }
            "budget" => self.budget = Some(num(key, v)?),
            "channels" => self.channels = Some(num(key, v)?),
            "slots" => self.slots = Some(num(key, v)?),
            "seed" => self.seed = Some(num(key, v)?),
            "solver" => self.solver = Some(v.parse()?),
            "precoder" => self.precoder = Some(v.parse()?),
            "oracle_tol" => self.oracle_tol = Some(num(key, v)?),
            other => {
                if !self.overrides.set(other, v)? {
                    return Err(Error::param(format!("unknown key '{other}'")));
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Scenario> {
        let missing = |k: &str| Error::param(format!("missing required key '{k}'"));
        let s = Scenario {
            id: self.id.unwrap_or_else(|| "scenario".to_string()),
            users: self.users.ok_or_else(|| missing("K"))?,
            antennas: self.antennas.ok_or_else(|| missing("Nt"))?,
            modulation: self.modulation.ok_or_else(|| missing("modulation"))?,
            mode: self.mode.ok_or_else(|| missing("mode"))?,
            sweep: self.sweep.ok_or_else(|| missing("sweep"))?,
            budget: self.budget.unwrap_or(1.0),
            channels: self.channels.unwrap_or(1),
            slots: self.slots.unwrap_or(20),
            seed: self.seed.unwrap_or(0),
            solver: self.solver.unwrap_or(SolverKind::Pif),
            precoder: self.precoder.unwrap_or(Precoder::Slp),
            overrides: self.overrides,
            oracle_tol: self.oracle_tol.unwrap_or(OracleConfig::default().tol),
        };
        s.validate()?;
        Ok(s)
    }
}

impl Scenario {
    /// Parses scenario text, then applies `overrides` in order.
    pub fn parse_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut b = Builder::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            b.set(k, v).map_err(|e| Error::Parse {
                line: n + 1,
                msg: e.to_string(),
            })?;
        }
        for (k, v) in overrides {
            b.set(k, v).map_err(|e| e.context(format!("--set {k}={v}")))?;
        }
        b.finish()
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, &[])
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::parse_with(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.antennas == 0 {
            return Err(Error::param("K and Nt must be positive"));
        }
        if self.channels == 0 || self.slots == 0 {
            return Err(Error::param("channels and slots must be at least 1"));
        }
        if self.sweep.is_empty() {
            return Err(Error::param("sweep must not be empty"));
        }
        if !(self.budget > 0.0 && self.budget.is_finite()) {
            return Err(Error::param(format!("budget must be positive, got {}", self.budget)));
        }
        if self.mode == Mode::Sb && self.sweep.iter().any(|s| !s.is_finite()) {
            return Err(Error::param("SNR values must be finite"));
        }
        if self.mode == Mode::Pm && self.precoder == Precoder::ZeroForcing {
            return Err(Error::param("the zero-forcing baseline is only available in SB mode"));
        }
        if !(self.oracle_tol >= 1e-12) {
            return Err(Error::param("oracle_tol must be at least 1e-12"));
        }
        self.solver_config()?.validate()
    }

    /// Protocol parameters for this scenario with overrides applied.
    pub fn solver_config(&self) -> Result<PjAdmmConfig> {
        let cfg = default_config(self.users, self.antennas, &self.modulation, self.mode).config;
        Ok(self.overrides.apply(cfg))
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            tol: self.oracle_tol,
            ..OracleConfig::default()
        }
    }
}
