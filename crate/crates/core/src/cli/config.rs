//! Per-command configuration blocks. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cantor::ConstructionParams;
use crate::covering::{RadiusRule, SetSequence};
use crate::dimfun::GaugePair;
use crate::error::{Error, Result};
use crate::geometry::{logspace, Ball, Metric, Window};
use crate::io::read_points_csv;
use crate::measure::{MeasureOptions, DEFAULT_CENTERS, DEFAULT_PARTITIONS, DEFAULT_SAMPLES};
use crate::randomsim::{RadiusMode, RandomScheme};
use crate::sets::SetModel;

fn d_samples() -> usize {
    DEFAULT_SAMPLES
}
fn d_true() -> bool {
    true
}
fn d_tol() -> f64 {
    1e-9
}
fn d_partitions() -> usize {
    DEFAULT_PARTITIONS
}
fn d_centers() -> usize {
    DEFAULT_CENTERS
}
fn d_r_grid() -> Vec<f64> {
    logspace(1e-3, 1e-1, 6)
}
fn d_delta_grid() -> Vec<f64> {
    logspace(1e-3, 0.3, 6)
}
fn d_scales() -> Vec<f64> {
    logspace(2f64.powi(-10), 2f64.powi(-4), 7)
}
fn d_pool() -> usize {
    crate::covering::DEFAULT_POOL_PER_J
}
fn d_one() -> f64 {
    1.0
}
fn d_holder_trials() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSettings {
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "d_tol")]
    pub tol: f64,
    #[serde(default = "d_partitions")]
    pub partitions: usize,
    #[serde(default = "d_centers")]
    pub centers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
}

impl Default for MeasureSettings {
    fn default() -> Self {
        MeasureSettings {
            metric: Metric::Sup,
            tol: d_tol(),
            partitions: d_partitions(),
            centers: d_centers(),
            window: None,
        }
    }
}

impl MeasureSettings {
    pub fn options(&self) -> MeasureOptions {
        MeasureOptions {
            metric: self.metric,
            tol: self.tol,
            partitions: self.partitions,
            window: self.window.clone(),
            centers: self.centers,
            delta_relative: false,
        }
    }
}

/// A set given inline or as a CSV point cloud (path relative to the config file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SetModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_csv: Option<PathBuf>,
}

impl ModelSource {
    pub fn load(&self, base: &Path) -> Result<SetModel> {
        let m = match (&self.model, &self.points_csv) {
            (Some(m), None) => m.clone(),
            (None, Some(p)) => SetModel::points(read_points_csv(&base.join(p))?)?,
            _ => return Err(Error::Config("give exactly one of `model` and `points_csv`".into())),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitLspConfig {
    pub master_seed: Option<u64>,
    pub set: ModelSource,
    #[serde(default = "d_r_grid")]
    pub r_grid: Vec<f64>,
    #[serde(default = "d_delta_grid")]
    pub delta_grid: Vec<f64>,
    /// Reads `delta_grid` as ratios δ/r.
    #[serde(default = "d_true")]
    pub delta_relative: bool,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default)]
    pub measure: MeasureSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxdimConfig {
    pub master_seed: Option<u64>,
    pub set: ModelSource,
    #[serde(default = "d_scales")]
    pub scales: Vec<f64>,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default)]
    pub measure: MeasureSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinkowskiConfig {
    pub master_seed: Option<u64>,
    pub set: ModelSource,
    /// Dimension used in the normalisation `δ^{−(n−d)}`.
    pub d: f64,
    #[serde(default = "d_scales")]
    pub scales: Vec<f64>,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default)]
    pub measure: MeasureSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformConfig {
    pub gauges: GaugePair,
    pub upsilon: Vec<f64>,
    /// Grid for the hypothesis checks; the default is 64 log-spaced points on [1e-6, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_grid: Option<Vec<f64>>,
    /// Ambient dimension for the power-law exponent `(s − κn)/((1 − κ)n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoverConfig {
    FiveR {
        balls: Vec<Ball>,
        #[serde(default)]
        metric: Metric,
    },
    Caj {
        master_seed: Option<u64>,
        a: Ball,
        j: usize,
        set: ModelSource,
        upsilon: f64,
        #[serde(default = "d_pool")]
        pool: usize,
        #[serde(default)]
        metric: Metric,
        #[serde(default = "d_tol")]
        tol: f64,
    },
    Kgb {
        master_seed: Option<u64>,
        b: Ball,
        g: usize,
        j_max: usize,
        sets: SetSequence,
        gauges: GaugePair,
        upsilon: RadiusRule,
        #[serde(default = "d_one")]
        target_fraction: f64,
        #[serde(default = "d_one")]
        c5: f64,
        #[serde(default = "d_pool")]
        pool_per_j: usize,
        #[serde(default)]
        metric: Metric,
        #[serde(default = "d_tol")]
        tol: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSettings {
    #[serde(default = "d_holder_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default = "half")]
    pub leaf_fraction: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorBuildConfig {
    pub master_seed: Option<u64>,
    pub construction: ConstructionParams,
    /// Runs the P0–P5 audit after building.
    #[serde(default = "d_true")]
    pub audit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<HolderSettings>,
    /// Writes the full tree as `tree.json` next to the report.
    #[serde(default = "d_true")]
    pub write_tree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorVerifyConfig {
    pub master_seed: Option<u64>,
    pub construction: ConstructionParams,
    /// A `tree.json` written by `cantor-build`; when absent the tree is rebuilt from the seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySettings {
    pub x: Vec<f64>,
    pub radii: RadiusMode,
    pub lo: usize,
    pub hi: usize,
    #[serde(default = "d_trials")]
    pub trials: usize,
}

fn d_trials() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandsimConfig {
    pub scheme: RandomScheme,
    /// Stage counts `N` for the covering exponent; omit to skip it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<FrequencySettings>,
}
