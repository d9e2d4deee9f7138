use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{DEConfig, EpsSearchConfig};
use crate::error::{Error, Result};
use crate::measure::OutlierGranularity;
use crate::network::InitMethod;
use crate::train::TrainConfig;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Watts-Strogatz parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub sizes: Vec<usize>,
    pub neis: Vec<usize>,
    pub ps: Vec<f64>,
}

impl Grid {
    pub const SIZES: [usize; 5] = [250, 300, 350, 400, 500];
    pub const NEIS: [usize; 6] = [2, 4, 6, 8, 10, 20];
    pub const PS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

    /// Every `(size, nei, p)` in declaration order.
    pub fn points(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for &size in &self.sizes {
            for &nei in &self.neis {
                for &p in &self.ps {
                    out.push((size, nei, p));
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.neis.is_empty() || self.ps.is_empty() {
            return Err(Error::InvalidParameter("grid has an empty axis".into()));
        }
        let bad = self.sizes.iter().any(|s| !Self::SIZES.contains(s))
            || self.neis.iter().any(|n| !Self::NEIS.contains(n))
            || self.ps.iter().any(|p| !Self::PS.contains(p));
        if bad {
            return Err(Error::InvalidParameter(format!("grid values outside the declared sets: {self:?}")));
        }
        Ok(())
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            sizes: Self::SIZES.to_vec(),
            neis: Self::NEIS.to_vec(),
            ps: Self::PS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    Paper,
    Desk,
    Custom,
}

impl std::fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScaleMode::Paper => "paper",
            ScaleMode::Desk => "desk",
            ScaleMode::Custom => "custom",
        })
    }
}

/// Multipliers that shrink the workload. Every scaled count is rounded and
/// kept at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub mode: ScaleMode,
    pub epoch_fraction: f64,
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub one_pixel_fraction: f64,
    /// Applied to both DE population size and iteration budget.
    pub de_fraction: f64,
}

impl Scale {
    pub fn paper() -> Self {
        Self {
            mode: ScaleMode::Paper,
            epoch_fraction: 1.0,
            train_fraction: 1.0,
            test_fraction: 1.0,
            one_pixel_fraction: 1.0,
            de_fraction: 1.0,
        }
    }

    /// 5 of 30 epochs, 10k of 60k training images, 1k of 10k test images,
    /// DE population and budget of 50; all 100 one-pixel images.
    pub fn desk() -> Self {
        Self {
            mode: ScaleMode::Desk,
            epoch_fraction: 1.0 / 6.0,
            train_fraction: 1.0 / 6.0,
            test_fraction: 0.1,
            one_pixel_fraction: 1.0,
            de_fraction: 0.1,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::InvalidParameter(format!("unknown scale preset {other:?} (paper | desk)"))),
        }
    }

    pub fn apply(fraction: f64, n: usize) -> usize {
        ((n as f64 * fraction).round() as usize).max(1)
    }

    fn validate(&self) -> Result<()> {
        let fs = [
            self.epoch_fraction,
            self.train_fraction,
            self.test_fraction,
            self.one_pixel_fraction,
            self.de_fraction,
        ];
        if fs.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::InvalidParameter(format!("scale fractions must lie in (0, 1]: {self:?}")));
        }
        Ok(())
    }
}

/// Attack settings shared by the sweep and the pruning baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSettings {
    pub fgsm_eps: f64,
    pub eps_search: EpsSearchConfig,
    /// The DE seed here is ignored; every image gets its own stream.
    pub one_pixel: DEConfig,
    /// First this many correctly classified test images, in dataset order.
    pub one_pixel_images: usize,
}

impl Default for AttackSettings {
    fn default() -> Self {
        Self {
            fgsm_eps: 0.1,
            eps_search: EpsSearchConfig::default(),
            one_pixel: DEConfig::default(),
            one_pixel_images: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningConfig {
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub steps: usize,
    pub retrain_epochs: usize,
    pub init_method: InitMethod,
}

impl Default for PruningConfig {
    fn default() -> Self {
        Self {
            hidden: vec![50, 100, 100, 50],
            alpha: 0.1,
            steps: 20,
            retrain_epochs: 5,
            init_method: InitMethod::HeUniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub grid: Grid,
    pub target_graph_count: usize,
    /// Inclusive bounds on the network parameter count.
    pub param_range: [usize; 2],
    /// Upper bound on full grid passes before the search gives up.
    pub max_grid_passes: usize,
    pub init_methods: Vec<InitMethod>,
    pub train: TrainConfig,
    pub attacks: AttackSettings,
    pub pruning: PruningConfig,
    pub outlier_granularity: OutlierGranularity,
    pub master_seed: u64,
    pub scale: Scale,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            grid: Grid::default(),
            target_graph_count: 100,
            param_range: [50_000, 91_000],
            max_grid_passes: 50,
            init_methods: InitMethod::ALL.to_vec(),
            train: TrainConfig::default(),
            attacks: AttackSettings::default(),
            pruning: PruningConfig::default(),
            outlier_granularity: OutlierGranularity::Run,
            master_seed: 2020,
            scale: Scale::paper(),
        }
    }
}

impl ExperimentManifest {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.scale.validate()?;
        self.train.validate()?;
        self.attacks.one_pixel.validate()?;
        if self.param_range[0] >= self.param_range[1] {
            return Err(Error::InvalidParameter(format!("param_range {:?} is not increasing", self.param_range)));
        }
        if self.init_methods.is_empty() {
            return Err(Error::InvalidParameter("no init methods".into()));
        }
        if !(0.0..1.0).contains(&self.pruning.alpha) {
            return Err(Error::InvalidParameter(format!("pruning alpha {} outside [0, 1)", self.pruning.alpha)));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn epochs(&self) -> usize {
        Scale::apply(self.scale.epoch_fraction, self.train.epochs)
    }

    pub fn retrain_epochs(&self) -> usize {
        Scale::apply(self.scale.epoch_fraction, self.pruning.retrain_epochs)
    }

    pub fn train_images(&self, available: usize) -> usize {
        Scale::apply(self.scale.train_fraction, available).min(available)
    }

    pub fn test_images(&self, available: usize) -> usize {
        Scale::apply(self.scale.test_fraction, available).min(available)
    }

    pub fn one_pixel_images(&self) -> usize {
        Scale::apply(self.scale.one_pixel_fraction, self.attacks.one_pixel_images)
    }

    /// DE settings after scaling; population never drops below 4.
    pub fn de_config(&self) -> DEConfig {
        let de = self.attacks.one_pixel;
        DEConfig {
            pop_size: Scale::apply(self.scale.de_fraction, de.pop_size).max(4),
            max_iter: Scale::apply(self.scale.de_fraction, de.max_iter),
            ..de
        }
    }
}
