//! Run configuration, written next to every run's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use finsler_core::descent::{DescentConfig, DescentMode, PAIR_SEED};
use finsler_core::energy::KernelParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_N: usize = 1280;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Match,
    Flow,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSettings {
    pub tau: f64,
    pub steps: usize,
    /// One run per `(ρ, λ)` pair; the descent `rho` / `lambda` are used
    /// when a list is empty.
    pub rhos: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self { tau: 0.0005, steps: 20, rhos: Vec::new(), lambdas: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub source: PathBuf,
    pub target: Option<PathBuf>,
    pub out: PathBuf,
    pub preset: Option<String>,
    pub n: usize,
    pub seed: u64,
    pub kernel: KernelParams,
    pub descent: DescentConfig,
    pub flow: FlowSettings,
    /// Map both curves jointly to a bounding box of unit diagonal before
    /// running; outputs are mapped back.
    pub normalize: bool,
    /// Write every `frame_every`-th frame (the last one is always written).
    pub frame_every: usize,
    pub dump_program: bool,
}

impl RunManifest {
    pub fn new(command: Command, source: PathBuf, target: Option<PathBuf>, out: PathBuf) -> Self {
        Self {
            command,
            source,
            target,
            out,
            preset: None,
            n: DEFAULT_N,
            seed: PAIR_SEED,
            kernel: KernelParams::default(),
            descent: DescentConfig::default(),
            flow: FlowSettings::default(),
            // The synthetic field is tied to absolute coordinates.
            normalize: command != Command::Flow,
            frame_every: 1,
            dump_program: false,
        }
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<(), CliError> {
        let p = Preset::by_name(name)?;
        self.preset = Some(name.to_string());
        self.kernel = p.kernel;
        self.descent.mode = p.mode;
        self.descent.rho = p.rho;
        self.descent.lambda = p.lambda;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::input(format!("malformed manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n < 3 {
            return Err(CliError::input(format!("n must be at least 3, got {}", self.n)));
        }
        if self.frame_every == 0 {
            return Err(CliError::input("frame-every must be positive"));
        }
        KernelParams::new(self.kernel.sigma, self.kernel.delta)?;
        if self.command != Command::Flow {
            self.descent.validate()?;
        }
        if self.command != Command::Flow && self.target.is_none() {
            return Err(CliError::input("a target curve is required"));
        }
        Ok(())
    }
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub kernel: KernelParams,
    pub mode: DescentMode,
    pub rho: f64,
    pub lambda: f64,
}

pub const PRESETS: [Preset; 2] = [
    Preset {
        name: "matching-rigid",
        kernel: KernelParams { sigma: 0.8, delta: 0.04 },
        mode: DescentMode::FinslerRigid,
        rho: 0.8,
        lambda: 0.0,
    },
    Preset {
        name: "matching-simil",
        kernel: KernelParams { sigma: 0.8, delta: 0.04 },
        mode: DescentMode::FinslerSimilarity,
        rho: 0.85,
        lambda: 2000.0,
    },
];

impl Preset {
    pub fn by_name(name: &str) -> Result<Preset, CliError> {
        PRESETS.iter().copied().find(|p| p.name == name).ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            CliError::input(format!("unknown preset {name:?} (known: {})", known.join(", ")))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut m = RunManifest::new(Command::Match, "a.json".into(), Some("b.json".into()), "out".into());
        m.apply_preset("matching-simil").unwrap();
        m.descent.rho = 0.1 + 0.2;
        m.descent.tau_init = 1.0 / 3.0;
        m.kernel.delta = std::f64::consts::PI * 1e-7;
        m.flow.rhos = vec![0.1, 0.3, 0.7, 0.9];
        m.seed = u64::MAX;
        assert_eq!(RunManifest::parse(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn presets() {
        let p = Preset::by_name("matching-rigid").unwrap();
        assert_eq!((p.kernel.sigma, p.kernel.delta, p.rho), (0.8, 0.04, 0.8));
        let p = Preset::by_name("matching-simil").unwrap();
        assert_eq!((p.lambda, p.rho), (2000.0, 0.85));
        assert!(Preset::by_name("nope").is_err());
    }

    #[test]
    fn target_required_for_matching() {
        let m = RunManifest::new(Command::Match, "a.json".into(), None, "out".into());
        assert!(m.validate().is_err());
        let m = RunManifest::new(Command::Flow, "a.json".into(), None, "out".into());
        assert!(m.validate().is_ok());
    }
}
