//! Scenario configuration, read from TOML.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::BgdSettings;
use crate::error::{Error, Result};
use crate::extraction::ExtractionSettings;
use crate::harness::presets;
use crate::sdp_solver::SolverSettings;
use crate::signal_model::{ChannelModel, Constellation, TapPower, C64};

/// Complex number written as `[re, im]`.
pub type Cplx = [f64; 2];

fn to_c64(z: &Cplx) -> C64 {
    C64::new(z[0], z[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// A named channel from [`presets`].
    Preset { name: String },
    /// Fresh i.i.d. circular Gaussian taps for every run.
    Random {
        #[serde(default = "one")]
        n_rx: usize,
        #[serde(default = "one")]
        n_tx: usize,
        taps: usize,
        #[serde(default)]
        power: TapPower,
    },
    /// Explicit FIR taps indexed `[receiver][source][lag]`.
    Fir { taps: Vec<Vec<Vec<Cplx>>> },
    /// Instantaneous mixing matrix indexed `[receiver][source]`.
    Flat { matrix: Vec<Vec<Cplx>> },
}

fn one() -> usize {
    1
}

impl ChannelSpec {
    /// Resolves presets; the result is never `Preset`.
    pub fn resolve(&self) -> Result<ChannelSpec> {
        match self {
            Self::Preset { name } => presets::preset(name),
            other => Ok(other.clone()),
        }
    }

    pub fn is_random(&self) -> Result<bool> {
        Ok(matches!(self.resolve()?, Self::Random { .. }))
    }

    /// Channel for one run; random specs draw from `seed`.
    pub fn realize(&self, seed: u64) -> Result<ChannelModel> {
        match self.resolve()? {
            Self::Random {
                n_rx,
                n_tx,
                taps,
                power,
            } => ChannelModel::rayleigh(n_rx, n_tx, taps, power, &mut ChaCha8Rng::seed_from_u64(seed)),
            Self::Fir { taps } => ChannelModel::new(
                taps.iter()
                    .map(|row| row.iter().map(|h| h.iter().map(to_c64).collect()).collect())
                    .collect(),
            ),
            Self::Flat { matrix } => {
                ChannelModel::flat(matrix.iter().map(|row| row.iter().map(to_c64).collect()).collect())
            }
            Self::Preset { .. } => unreachable!("presets resolve to concrete channels"),
        }
    }

    /// Number of sources.
    pub fn n_tx(&self) -> Result<usize> {
        Ok(match self.resolve()? {
            Self::Random { n_tx, .. } => n_tx,
            Self::Fir { taps } => taps.first().map_or(0, |r| r.len()),
            Self::Flat { matrix } => matrix.first().map_or(0, |r| r.len()),
            Self::Preset { .. } => unreachable!("presets resolve to concrete channels"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// SOS relaxation followed by extraction.
    #[default]
    Co,
    /// Fixed-step gradient descent from a spike.
    Bgd,
    /// Delay-optimized linear MMSE equalizer from the true channel.
    Optimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BlindCost {
    #[default]
    Cma,
    Swa,
    Med,
}

impl BlindCost {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Cma => "cma",
            Self::Swa => "swa",
            Self::Med => "med",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PostProcessing {
    Pp1,
    #[default]
    Pp2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSpec {
    /// Label used in outputs; derived from the parameters when absent.
    pub name: Option<String>,
    pub method: Method,
    pub cost: BlindCost,
    /// SWA mixing parameter.
    pub alpha: f64,
    /// MED power-penalty multiplier.
    pub lambda_p: f64,
    pub post: PostProcessing,
    /// Semiblind weight on the blind cost; blind when absent.
    pub lambda: Option<f64>,
    /// Number of pilot symbols per source in semiblind mode.
    pub pilots: usize,
    /// Cross-correlation penalty weight for streams after the first.
    pub lambda_cr: f64,
    /// Penalized lags `-delta ..= delta`.
    pub delta: i64,
    /// Streams to recover; defaults to the number of sources.
    pub streams: Option<usize>,
    /// Gradient descent step.
    pub step: f64,
    /// Index in `u` of the unit spike used to start gradient descent on
    /// stream `i`, offset by `i (L_w + 1)` so each stream starts on its own
    /// receiver.
    pub spike: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for AlgorithmSpec {
    fn default() -> Self {
        let bgd = BgdSettings::default();
        Self {
            name: None,
            method: Method::Co,
            cost: BlindCost::Cma,
            alpha: 0.5,
            lambda_p: 2.0,
            post: PostProcessing::Pp2,
            lambda: None,
            pilots: 8,
            lambda_cr: 1.0,
            delta: 0,
            streams: None,
            step: bgd.step,
            spike: 2,
            max_iters: bgd.max_iters,
            tol: bgd.tol,
        }
    }
}

impl AlgorithmSpec {
    pub fn co(cost: BlindCost) -> Self {
        Self {
            cost,
            ..Self::default()
        }
    }

    pub fn bgd(cost: BlindCost) -> Self {
        Self {
            method: Method::Bgd,
            cost,
            ..Self::default()
        }
    }

    pub fn optimum() -> Self {
        Self {
            method: Method::Optimum,
            ..Self::default()
        }
    }

    pub fn semiblind(mut self, lambda: f64, pilots: usize) -> Self {
        self.lambda = Some(lambda);
        self.pilots = pilots;
        self
    }

    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let sb = if self.lambda.is_some() { "sb-" } else { "" };
        match self.method {
            Method::Optimum => "optimum".into(),
            Method::Bgd => format!("bgd-{sb}{}", self.cost.as_str()),
            Method::Co => {
                let post = match self.post {
                    PostProcessing::Pp1 => "pp1",
                    PostProcessing::Pp2 => "pp2",
                };
                format!("co-{sb}{}-{post}", self.cost.as_str())
            }
        }
    }

    pub fn bgd_settings(&self) -> BgdSettings {
        BgdSettings {
            step: self.step,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }

    fn validate(&self) -> Result<()> {
        let label = self.label();
        let bad = |msg: &str| Err(Error::Config(format!("algorithm `{label}`: {msg}")));
        if let Some(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return bad("lambda must lie in [0, 1]");
            }
            if self.pilots == 0 {
                return bad("semiblind mode needs at least one pilot");
            }
        }
        if !(self.lambda_cr >= 0.0) || self.delta < 0 {
            return bad("lambda_cr and delta must be nonnegative");
        }
        if self.streams == Some(0) {
            return bad("streams must be at least 1");
        }
        if self.method == Method::Bgd && !(self.step > 0.0) {
            return bad("step must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub channel: ChannelSpec,
    pub constellation: String,
    /// Frame length `K`.
    pub samples: usize,
    /// `inf` for noiseless frames.
    pub snr_db: f64,
    /// Equalizer order `L_w` (each sub-equalizer has `L_w + 1` taps).
    pub equalizer_order: usize,
    pub runs: usize,
    pub seed: u64,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub extraction: ExtractionSettings,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::by_name(&self.constellation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.samples <= self.equalizer_order {
            return Err(Error::Config("samples must exceed equalizer_order".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("snr_db must be a number or inf".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        self.constellation()?;
        let n_tx = self.channel.n_tx()?;
        self.channel.realize(0)?;
        for a in &self.algorithms {
            a.validate()?;
            if a.streams.is_some_and(|s| s > n_tx) {
                return Err(Error::Config(format!(
                    "algorithm `{}` asks for more streams than the {n_tx} sources",
                    a.label()
                )));
            }
        }
        Ok(())
    }
}
