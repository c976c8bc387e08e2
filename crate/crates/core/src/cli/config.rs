//! Run configuration: a TOML file whose every field can be overridden by a flag.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::network::{presets, NetworkFile, RcNetwork};
use crate::simulate::{Coloring, NoisePlan, DEFAULT_BURN_IN};
use crate::topology::{default_gamma, LearnParams};
use crate::{Error, Result};

pub const OUTPUT_ROOT_ENV: &str = "RCTOPO_OUTPUT_ROOT";
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Path to a network file, or `builtin:five-zone`, `builtin:two-zone`, `builtin:chain3`.
    pub network: String,
    /// Sampling interval; falls back to the network file's value, then 1.
    pub dt: Option<f64>,
    pub samples: usize,
    pub burn_in: usize,
    pub noise: NoiseConfig,
    pub learn: LearnConfig,
    pub baseline: BaselineConfig,
    pub sweep: SweepConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            network: "builtin:five-zone".into(),
            dt: None,
            samples: 100_000,
            burn_in: DEFAULT_BURN_IN,
            noise: NoiseConfig::default(),
            learn: LearnConfig::default(),
            baseline: BaselineConfig::default(),
            sweep: SweepConfig::default(),
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Ar1,
    Fir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub variance: f64,
    /// AR(1) pole, used when `kind = "ar1"`.
    pub coefficient: f64,
    /// FIR taps, used when `kind = "fir"`.
    pub taps: Vec<f64>,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::White,
            variance: 1.0,
            coefficient: 0.5,
            taps: vec![1.0],
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn coloring(&self) -> Coloring {
        match self.kind {
            NoiseKind::White => Coloring::White,
            NoiseKind::Ar1 => Coloring::Ar1 {
                coefficient: self.coefficient,
            },
            NoiseKind::Fir => Coloring::Fir { taps: self.taps.clone() },
        }
    }

    pub fn plan(&self, m: usize) -> NoisePlan {
        NoisePlan::uniform(m, self.variance, self.coloring(), self.seed)
    }
}

/// A fixed penalty, or the sample-size rule applied at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSetting {
    Value(f64),
    Named(AutoGamma),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoGamma {
    Auto,
}

impl GammaSetting {
    pub fn resolve(self, node_count: usize, lag_order: usize, samples: usize) -> f64 {
        match self {
            GammaSetting::Value(g) => g,
            GammaSetting::Named(AutoGamma::Auto) => default_gamma(node_count, lag_order, samples),
        }
    }
}

impl std::str::FromStr for GammaSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GammaSetting::Named(AutoGamma::Auto));
        }
        s.parse::<f64>()
            .map(GammaSetting::Value)
            .map_err(|_| format!("expected a number or 'auto', got '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub lag_order: usize,
    pub gamma: GammaSetting,
    pub rho: f64,
    pub tau: f64,
    pub magnitude_floor: f64,
    pub grid_points: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        let p = LearnParams::default();
        Self {
            lag_order: p.lag_order,
            gamma: GammaSetting::Value(p.gamma),
            rho: p.rho,
            tau: p.tau,
            magnitude_floor: p.magnitude_floor,
            grid_points: p.grid_points,
        }
    }
}

impl LearnConfig {
    /// Concrete parameters for a panel of `node_count` nodes and `samples` samples.
    pub fn params(&self, node_count: usize, samples: usize) -> LearnParams {
        LearnParams {
            lag_order: self.lag_order,
            gamma: self.gamma.resolve(node_count, self.lag_order, samples),
            rho: self.rho,
            tau: self.tau,
            magnitude_floor: self.magnitude_floor,
            grid_points: self.grid_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub regression_gamma: f64,
    pub glasso_lambda: f64,
    pub threshold: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        use crate::baselines::*;
        Self {
            regression_gamma: DEFAULT_REGRESSION_GAMMA,
            glasso_lambda: DEFAULT_GLASSO_LAMBDA,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Wiener filters with plain least squares.
    Wiener,
    /// Wiener filters with the sample-size L1 penalty.
    WienerL1,
    Regression,
    Glasso,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Wiener, Method::WienerL1, Method::Regression, Method::Glasso];

    pub fn name(self) -> &'static str {
        match self {
            Method::Wiener => "wiener",
            Method::WienerL1 => "wiener-l1",
            Method::Regression => "regression",
            Method::Glasso => "glasso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    White,
    Ar1,
}

impl InputKind {
    pub fn name(self) -> &'static str {
        match self {
            InputKind::White => "white",
            InputKind::Ar1 => "ar1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub samples: Vec<usize>,
    /// Explicit seeds; when empty, `0..trials`.
    pub seeds: Vec<u64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub inputs: Vec<InputKind>,
    /// AR(1) pole for colored inputs.
    pub ar_coefficient: f64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            samples: vec![1_000, 10_000, 100_000],
            seeds: Vec::new(),
            trials: 10,
            methods: Method::ALL.to_vec(),
            inputs: vec![InputKind::White, InputKind::Ar1],
            ar_coefficient: 0.5,
            workers: 0,
        }
    }
}

impl SweepConfig {
    pub fn resolved_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.trials as u64).collect()
        } else {
            self.seeds.clone()
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::MalformedFile {
            path: path.to_path_buf(),
            detail: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| Error::MalformedFile {
            path: origin.to_path_buf(),
            detail: e.to_string(),
        })?;
        // Relative network paths are taken relative to the config file.
        if !config.network.starts_with(BUILTIN_PREFIX) {
            let p = Path::new(&config.network);
            if p.is_relative() {
                if let Some(dir) = origin.parent() {
                    config.network = dir.join(p).to_string_lossy().into_owned();
                }
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn check(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
            }
        }
        if self.sweep.resolved_seeds().is_empty() {
            return Err(Error::InvalidParameter("sweep needs at least one trial".into()));
        }
        Ok(())
    }
}

/// A network together with the sampling interval to discretize it at.
#[derive(Debug, Clone)]
pub struct ResolvedNetwork {
    pub network: RcNetwork,
    pub dt: f64,
    pub source: String,
}

pub fn resolve_network(reference: &str, dt_override: Option<f64>) -> Result<ResolvedNetwork> {
    let (network, file_dt) = if let Some(name) = reference.strip_prefix(BUILTIN_PREFIX) {
        match name {
            "five-zone" => {
                let f = presets::five_zone_file();
                (f.network, f.dt)
            }
            "two-zone" => (presets::two_zone(), Some(1.0)),
            "chain3" => (presets::chain(3, 10.0, Some(5.0)), Some(1.0)),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown built-in network '{other}' (known: five-zone, two-zone, chain3)"
                )))
            }
        }
    } else {
        let f = NetworkFile::load(Path::new(reference))?;
        (f.network, f.dt)
    };
    Ok(ResolvedNetwork {
        network,
        dt: dt_override.or(file_dt).unwrap_or(1.0),
        source: reference.to_string(),
    })
}

/// `--out`, then the config's directory, then `$RCTOPO_OUTPUT_ROOT/<command>`,
/// then `rctopo-output/<command>`.
pub fn output_dir(flag: Option<&Path>, config: &RunConfig, command: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &config.output_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("rctopo-output"));
    root.join(command)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::parse(&c.to_toml(), Path::new("x.toml")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let text = "samples = 500\n[noise]\nkind = \"ar1\"\n[learn]\ngamma = \"auto\"\n";
        let c = RunConfig::parse(text, Path::new("x.toml")).unwrap();
        assert_eq!(c.samples, 500);
        assert_eq!(c.noise.kind, NoiseKind::Ar1);
        assert_eq!(c.learn.gamma, GammaSetting::Named(AutoGamma::Auto));
        assert_eq!(c.learn.rho, 0.05);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::parse("sampels = 5\n", Path::new("bad.toml")).unwrap_err();
        assert!(err.to_string().contains("bad.toml"));
    }

    #[test]
    fn relative_network_follows_config_location() {
        let c = RunConfig::parse("network = \"net.json\"\n", Path::new("/tmp/cfg/run.toml")).unwrap();
        assert_eq!(c.network, "/tmp/cfg/net.json");
    }

    #[test]
    fn gamma_from_str() {
        assert_eq!("auto".parse::<GammaSetting>().unwrap(), GammaSetting::Named(AutoGamma::Auto));
        assert_eq!("0.1".parse::<GammaSetting>().unwrap(), GammaSetting::Value(0.1));
        assert!("x".parse::<GammaSetting>().is_err());
    }

    #[test]
    fn builtins_resolve() {
        assert_eq!(resolve_network("builtin:five-zone", None).unwrap().network.node_count(), 5);
        assert!(resolve_network("builtin:nope", None).is_err());
        let err = resolve_network("/no/such/net.json", None).unwrap_err();
        assert!(err.to_string().contains("/no/such/net.json"));
    }
}
