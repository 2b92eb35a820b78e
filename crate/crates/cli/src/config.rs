//! Run configuration shared by all subcommands.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use dqg_core::causet::DEFAULT_SIZE_CAP;
use dqg_core::qmeasure::DEFAULT_TOL;
use dqg_core::ComplementMode;

/// Source of the transition-amplitude table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ApChoice {
    Action,
    Uniform,
    File(PathBuf),
}

impl FromStr for ApChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "action" => Ok(ApChoice::Action),
            "uniform" => Ok(ApChoice::Uniform),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(ApChoice::File(PathBuf::from(path))),
                _ => bail!("unknown amplitude process '{s}' (expected action, uniform or file:<path>)"),
            },
        }
    }
}

impl fmt::Display for ApChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApChoice::Action => f.write_str("action"),
            ApChoice::Uniform => f.write_str("uniform"),
            ApChoice::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// How the chosen table turns into probability operators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProcessKind {
    /// Rank-one operators `ρ_n = a_n a_n*`.
    #[default]
    Amplitude,
    /// Diagonal operators `ρ_n = diag(a_n)`; the table must be real.
    Classical,
}

impl FromStr for ProcessKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(ProcessKind::Amplitude),
            "classical" => Ok(ProcessKind::Classical),
            _ => bail!("unknown process kind '{s}' (expected amplitude or classical)"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "table" => Ok(Format::Table),
            _ => bail!("unknown format '{s}' (expected json, csv or table)"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub max_level: usize,
    pub ap: ApChoice,
    pub process: ProcessKind,
    pub tol: f64,
    pub format: Format,
    pub seed: u64,
    pub strict_complement: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_level: 5,
            ap: ApChoice::Action,
            process: ProcessKind::Amplitude,
            tol: DEFAULT_TOL,
            format: Format::Json,
            seed: 0,
            strict_complement: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_level == 0 {
            bail!("--max-level must be at least 1");
        }
        if self.max_level > DEFAULT_SIZE_CAP {
            bail!("--max-level {} exceeds the size cap {DEFAULT_SIZE_CAP}", self.max_level);
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            bail!("--tol must be a positive finite number");
        }
        Ok(())
    }

    pub fn complement_mode(&self) -> ComplementMode {
        if self.strict_complement {
            ComplementMode::Literal
        } else {
            ComplementMode::Computational
        }
    }

    /// Reads a transition-table file when the configuration names one.
    pub fn table_entries(&self) -> Result<Option<Vec<dqg_core::amplitude::TableEntry>>> {
        match &self.ap {
            ApChoice::File(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let entries = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                Ok(Some(entries))
            }
            _ => Ok(None),
        }
    }
}
