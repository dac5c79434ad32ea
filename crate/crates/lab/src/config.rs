//! Run configuration: a single JSON document, unknown keys rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use ilwlab_core::integrable::EquicontinuityProbe;
use ilwlab_core::normalform::{NfParams, MAX_EVALUATED_GENERATIONS};
use ilwlab_core::spectral::{Grid, SpectralField};
use serde::{Deserialize, Serialize};

use crate::LabError;

/// Seed used for the `random` profile when the config does not give one.
pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ConvergeShallow,
    TailTrack,
    AlphaConserve,
    NfVerify,
    SymbolTable,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::ConvergeShallow,
        Experiment::TailTrack,
        Experiment::AlphaConserve,
        Experiment::NfVerify,
        Experiment::SymbolTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ConvergeShallow => "converge-shallow",
            Experiment::TailTrack => "tail-track",
            Experiment::AlphaConserve => "alpha-conserve",
            Experiment::NfVerify => "nf-verify",
            Experiment::SymbolTable => "symbol-table",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `cos x`
    Cos,
    /// `sech²(2(x − π))`, mean removed.
    Bump,
    /// Seeded band-limited random field of unit L² norm.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InitialData {
    pub profile: Profile,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Highest mode of the random profile; defaults to the dealiasing band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<i64>,
}

fn one() -> f64 {
    1.0
}

impl InitialData {
    /// Mean-zero field on `grid`.
    pub fn build(&self, grid: Grid) -> Result<SpectralField, LabError> {
        let f = match self.profile {
            Profile::Cos => SpectralField::from_fn(grid, f64::cos),
            Profile::Bump => SpectralField::from_fn(grid, |x| {
                let s = 1.0 / (2.0 * (x - std::f64::consts::PI)).cosh();
                s * s
            }),
            Profile::Random => {
                let band = self.band.unwrap_or(grid.dealias_cut());
                SpectralField::random_band_limited(grid, band, self.seed.unwrap_or(DEFAULT_SEED))
                    .map_err(|e| LabError::Config(e.to_string()))?
            }
        };
        Ok(f.galilean_reduce().0.scale(self.amplitude))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProbeConfig {
    pub s: f64,
    pub mu: f64,
    pub n: f64,
}

impl ProbeConfig {
    pub fn probe(&self) -> Result<EquicontinuityProbe, LabError> {
        EquicontinuityProbe::new(self.s, self.mu, self.n).map_err(|e| LabError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NfConfig {
    #[serde(default = "one")]
    pub k: f64,
    /// Node frequency bound; defaults to the dealiasing band of the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_cut: Option<i64>,
    #[serde(default = "two")]
    pub j_max: usize,
    /// Times at which `verify_step1` is evaluated; must be interior snapshot times.
    #[serde(default)]
    pub step1_times: Vec<f64>,
    /// Times at which the normal form is reconstructed.
    #[serde(default)]
    pub reconstruct_times: Vec<f64>,
    #[serde(default = "four")]
    pub bound_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_k: Option<Vec<f64>>,
}

fn two() -> usize {
    2
}

fn four() -> usize {
    4
}

impl NfConfig {
    pub fn params(&self, grid: Grid) -> Result<NfParams, LabError> {
        let cut = self.lattice_cut.unwrap_or(grid.dealias_cut());
        NfParams::new(self.k, cut)
            .and_then(|p| p.with_max_gen(self.j_max.max(2)))
            .map_err(|e| LabError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub modes: usize,
    pub horizon: f64,
    pub dt: f64,
    /// Steps between recorded snapshots.
    #[serde(default = "one_usize")]
    pub record_every: usize,
    pub initial_data: InitialData,
    #[serde(default)]
    pub delta_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nf: Option<NfConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Frequency `N` splitting low and high modes in `converge-shallow`, and the
    /// largest `|ξ|` in `symbol-table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_n: Option<f64>,
    /// `‖v_{0,δ} − v_0‖ = c·δ` perturbation of the scaled ILW data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn one_usize() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("lab-out")
}

fn positive(name: &str, x: f64) -> Result<(), LabError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(LabError::Config(format!("{name} must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| LabError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<Grid, LabError> {
        Grid::new(self.modes).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), LabError> {
        self.grid()?;
        if self.horizon < 0.0 || !self.horizon.is_finite() {
            return Err(LabError::Config(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        positive("dt", self.dt)?;
        if self.record_every == 0 {
            return Err(LabError::Config("recordEvery must be positive".into()));
        }
        let a = self.initial_data.amplitude;
        if !(a >= 0.0 && a.is_finite()) {
            return Err(LabError::Config(format!("amplitude must be >= 0, got {a}")));
        }
        for &d in &self.delta_grid {
            positive("deltaGrid entry", d)?;
        }
        if let Some(w) = self.delta_grid.windows(2).find(|w| w[1] >= w[0]) {
            return Err(LabError::Config(format!(
                "deltaGrid must be strictly decreasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if let Some(k) = self.kappa {
            positive("kappa", k)?;
        }
        if let Some(n) = self.split_n {
            positive("splitN", n)?;
        }
        if let Some(c) = self.perturbation {
            if !c.is_finite() {
                return Err(LabError::Config("perturbation must be finite".into()));
            }
        }
        if let Some(p) = &self.probe {
            p.probe()?;
        }
        if let Some(nf) = &self.nf {
            if nf.j_max == 0 || nf.j_max > MAX_EVALUATED_GENERATIONS {
                return Err(LabError::Config(format!(
                    "nf.jMax must lie in 1..={MAX_EVALUATED_GENERATIONS}, got {}",
                    nf.j_max
                )));
            }
            nf.params(self.grid()?)?;
        }
        let needs_delta = matches!(
            self.experiment,
            Experiment::ConvergeShallow | Experiment::TailTrack | Experiment::AlphaConserve | Experiment::SymbolTable
        );
        if needs_delta && self.delta_grid.is_empty() {
            return Err(LabError::Config(format!("{} needs a nonempty deltaGrid", self.experiment)));
        }
        match self.experiment {
            Experiment::TailTrack if self.probe.is_none() => {
                Err(LabError::Config("tail-track needs a probe".into()))
            }
            Experiment::NfVerify if self.nf.is_none() => Err(LabError::Config("nf-verify needs nf parameters".into())),
            Experiment::AlphaConserve if self.kappa.is_none() => {
                Err(LabError::Config("alpha-conserve needs kappa".into()))
            }
            _ => Ok(()),
        }
    }

    /// The seed in effect, if the initial data is random.
    pub fn effective_seed(&self) -> Option<u64> {
        (self.initial_data.profile == Profile::Random).then(|| self.initial_data.seed.unwrap_or(DEFAULT_SEED))
    }
}
