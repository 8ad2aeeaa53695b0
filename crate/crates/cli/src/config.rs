//! Experiment selection and parameters.
//!
//! A run is described by an [`ExperimentConfig`]. It can be assembled from
//! command-line flags, from a TOML file, or both; values in the file take
//! precedence over flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RegretCurve,
    BoundCheck,
    Hardseq,
    NfgDynamics,
    Comm,
    Sparsify,
    EfgNfce,
    Twocoin,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::RegretCurve,
        ExperimentKind::BoundCheck,
        ExperimentKind::Hardseq,
        ExperimentKind::NfgDynamics,
        ExperimentKind::Comm,
        ExperimentKind::Sparsify,
        ExperimentKind::EfgNfce,
        ExperimentKind::Twocoin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RegretCurve => "regret-curve",
            ExperimentKind::BoundCheck => "eq3-check",
            ExperimentKind::Hardseq => "hardseq",
            ExperimentKind::NfgDynamics => "nfg-dynamics",
            ExperimentKind::Comm => "comm",
            ExperimentKind::Sparsify => "sparsify",
            ExperimentKind::EfgNfce => "efg-nfce",
            ExperimentKind::Twocoin => "twocoin",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
                CliError::Usage(format!("unknown experiment '{s}' (expected one of: {})", known.join(", ")))
            })
    }
}

/// Kind-specific parameters. Unset values fall back to per-kind defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n: Option<usize>,
    pub eps: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<u32>,
    pub delta: Option<f64>,
    #[serde(rename = "H")]
    pub h: Option<u64>,
    #[serde(rename = "S")]
    pub s: Option<u32>,
    pub players: Option<usize>,
    pub runs: Option<usize>,
    pub days: Option<u64>,
    pub infosets: Option<usize>,
    pub repeats: Option<usize>,
    pub adversary: Option<String>,
    pub mode: Option<String>,
    pub shared: Option<bool>,
}

impl Params {
    /// Field-wise union where `over` wins.
    pub fn overridden_by(self, over: Params) -> Params {
        Params {
            n: over.n.or(self.n),
            eps: over.eps.or(self.eps),
            k: over.k.or(self.k),
            l: over.l.or(self.l),
            delta: over.delta.or(self.delta),
            h: over.h.or(self.h),
            s: over.s.or(self.s),
            players: over.players.or(self.players),
            runs: over.runs.or(self.runs),
            days: over.days.or(self.days),
            infosets: over.infosets.or(self.infosets),
            repeats: over.repeats.or(self.repeats),
            adversary: over.adversary.or(self.adversary),
            mode: over.mode.or(self.mode),
            shared: over.shared.or(self.shared),
        }
    }

    /// Explicit `(H, S)` schedule; both or neither must be set.
    pub fn schedule(&self) -> CliResult<Option<(u64, u32)>> {
        match (self.h, self.s) {
            (Some(h), Some(s)) => Ok(Some((h, s))),
            (None, None) => Ok(None),
            _ => Err(CliError::Usage("H and S must be given together".into())),
        }
    }
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub out: PathBuf,
    pub params: Params,
}

/// On-disk layout: flat keys, the experiment name as a string.
#[derive(Debug, Default, Serialize)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub params: Params,
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let mut table: toml::Table = toml::from_str(text)?;
        let mut take = |key: &str| table.remove(key);
        let experiment = take("experiment").map(|v| v.try_into()).transpose()?;
        let seed = take("seed").map(|v| v.try_into()).transpose()?;
        let out = take("out").map(|v| v.try_into()).transpose()?;
        Ok(Self {
            experiment,
            seed,
            out,
            params: table.try_into()?,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64, out: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            seed,
            out: out.into(),
            params: Params::default(),
        }
    }

    pub fn with_params(mut self, params: Params) -> Self {
        self.params = params;
        self
    }

    /// Combines flag values with an optional config file; the file wins.
    pub fn resolve(flags: ConfigFile, file: Option<ConfigFile>) -> CliResult<Self> {
        let file = file.unwrap_or_default();
        let name = file
            .experiment
            .or(flags.experiment)
            .ok_or_else(|| CliError::Usage("no experiment given (use --experiment)".into()))?;
        Ok(Self {
            kind: name.parse()?,
            seed: file.seed.or(flags.seed).unwrap_or(0),
            out: file.out.or(flags.out).unwrap_or_else(|| PathBuf::from("out")),
            params: flags.params.overridden_by(file.params),
        })
    }

    pub fn to_toml_string(&self) -> String {
        let file = ConfigFile {
            experiment: Some(self.kind.name().to_string()),
            seed: Some(self.seed),
            out: Some(self.out.clone()),
            params: self.params.clone(),
        };
        toml::to_string(&file).expect("config is always representable")
    }
}
