//! Study configuration file (TOML).
//!
//! Every table rejects unknown keys. [`StudyConfig::load`] parses and then
//! checks the whole study (plate, variable bindings, settings) before any
//! computation starts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vscl_core::fem::{AngleSampling, BoundaryCondition, Cutout, EigenOptions, FemOptions, PlateModel, Ply, ShearInterpolation};
use vscl_core::reliability::{AdaptiveConfig, FormOptions};
use vscl_core::stochastic::{expand_per_ply, Binding, Dispersion, Family, GaussianSpace, RandomVariableSpec};
use vscl_core::surrogate::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Seed of the sampling designs and estimators.
    #[serde(default)]
    pub seed: u64,
    pub plate: PlateConfig,
    #[serde(default)]
    pub materials: BTreeMap<String, Material>,
    #[serde(default)]
    pub fem: FemConfig,
    #[serde(default)]
    pub variables: Vec<VariableConfig>,
    #[serde(default)]
    pub limit_state: LimitStateConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateConfig {
    pub a: f64,
    pub b: f64,
    /// Elements along x and y.
    pub mesh: [usize; 2],
    #[serde(default = "default_shear_correction")]
    pub shear_correction: f64,
    #[serde(default)]
    pub bc: BoundaryCondition,
    pub plies: Vec<PlyConfig>,
    #[serde(default)]
    pub cutout: Option<CutoutConfig>,
}

fn default_shear_correction() -> f64 {
    5.0 / 6.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub e1: f64,
    pub e2: f64,
    pub g12: f64,
    pub g13: f64,
    pub g23: f64,
    pub nu12: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlyConfig {
    /// Key into the `materials` table.
    pub material: String,
    pub thickness: f64,
    /// `[theta0, theta1]` in degrees: center line and edge angles.
    pub theta: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoutConfig {
    #[serde(default)]
    pub xc: f64,
    #[serde(default)]
    pub yc: f64,
    pub d: f64,
    #[serde(default = "one")]
    pub ellipticity: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemConfig {
    pub shear: ShearInterpolation,
    pub angle_sampling: AngleSampling,
    pub enrichment: bool,
    pub eigen_tolerance: f64,
    pub eigen_max_iterations: usize,
}

impl Default for FemConfig {
    fn default() -> Self {
        let o = FemOptions::default();
        FemConfig {
            shear: o.shear,
            angle_sampling: o.angle_sampling,
            enrichment: o.enrichment,
            eigen_tolerance: o.eigen.tolerance,
            eigen_max_iterations: o.eigen.max_iterations,
        }
    }
}

impl FemConfig {
    pub fn options(&self, modes: usize) -> FemOptions {
        FemOptions {
            shear: self.shear,
            angle_sampling: self.angle_sampling,
            enrichment: self.enrichment,
            modes,
            eigen: EigenOptions {
                tolerance: self.eigen_tolerance,
                max_iterations: self.eigen_max_iterations,
                ..EigenOptions::default()
            },
        }
    }
}

/// One row of the random-variable table. With `per_ply = true` the target
/// is a ply quantity (`thickness` or `angle`) and one variable is created
/// per ply, named `name1, name2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableConfig {
    pub name: String,
    pub target: String,
    pub family: Family,
    pub mean: f64,
    #[serde(default)]
    pub cov: Option<f64>,
    #[serde(default)]
    pub std: Option<f64>,
    #[serde(default)]
    pub per_ply: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitStateConfig {
    /// `lambda_r` as a fraction of the fundamental frequency at the means.
    pub fraction: f64,
}

impl Default for LimitStateConfig {
    fn default() -> Self {
        LimitStateConfig { fraction: 0.97 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    /// Design sizes of the `train` command; the last one is kept.
    pub samples: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig { samples: vec![1000], train: TrainConfig::default() }
    }
}

/// Which limit state a sampling estimator runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    #[default]
    Surrogate,
    Fem,
}

/// Which saved net the surrogate-based commands use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NetSource {
    #[default]
    Train,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    pub net: NetSource,
    pub form: FormOptions,
    pub mcs: SamplingConfig,
    pub mcis: SamplingConfig,
    pub adaptive: AdaptiveSettings,
    pub sensitivity: SensitivityConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            net: NetSource::Train,
            form: FormOptions::default(),
            mcs: SamplingConfig { samples: 200_000, model: Model::Surrogate },
            mcis: SamplingConfig { samples: 10_000, model: Model::Surrogate },
            adaptive: AdaptiveSettings::default(),
            sensitivity: SensitivityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub samples: usize,
    #[serde(default)]
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveSettings {
    pub n_per_stage: usize,
    pub max_stages: usize,
    pub halfwidth: f64,
    pub termination_width: f64,
    pub n_is: usize,
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        let d = AdaptiveConfig::default();
        AdaptiveSettings {
            n_per_stage: d.n_per_stage,
            max_stages: d.max_stages,
            halfwidth: d.halfwidth,
            termination_width: d.termination_width,
            n_is: d.n_is,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    /// Pick-freeze base samples without importance sampling.
    pub samples: usize,
    /// Pick-freeze base samples drawn around the MPP.
    pub samples_is: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig { samples: 200_000, samples_is: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub meshes: Vec<usize>,
    pub modes: usize,
    /// Reference frequencies (rad/s) for the deviation column.
    pub reference: Vec<f64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig { meshes: vec![10, 20, 30], modes: 5, reference: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub cache: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), cache: None }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::config(msg)
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: StudyConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError { message: format!("{}: {}", path.display(), e.message), ..e })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validates everything that can be checked without solving.
    pub fn check(&self) -> Result<(), CliError> {
        let plate = self.plate_model()?;
        plate.validate().map_err(|e| config_error(format!("plate: {e}")))?;
        let specs = self.variables()?;
        let mut names = std::collections::HashSet::new();
        for s in &specs {
            s.validate().map_err(|e| config_error(e.to_string()))?;
            s.target.check(&plate).map_err(|e| config_error(format!("variable {:?}: {e}", s.name)))?;
            if !names.insert(s.name.clone()) {
                return Err(config_error(format!("duplicate variable name {:?}", s.name)));
            }
        }
        if !specs.is_empty() {
            GaussianSpace::new(&specs).map_err(|e| config_error(e.to_string()))?;
        }
        if !(self.limit_state.fraction > 0.0) {
            return Err(config_error("limit_state.fraction must be positive"));
        }
        self.surrogate.train.validate().map_err(|e| config_error(e.to_string()))?;
        if self.surrogate.samples.is_empty() || self.surrogate.samples.contains(&0) {
            return Err(config_error("surrogate.samples must list positive design sizes"));
        }
        if self.method.mcs.samples < 100 {
            return Err(config_error(format!("method.mcs.samples must be at least 100, got {}", self.method.mcs.samples)));
        }
        if self.method.mcis.samples < 2 {
            return Err(config_error("method.mcis.samples must be at least 2"));
        }
        let f = &self.method.form;
        if !(f.epsilon > 0.0) || f.max_iter == 0 {
            return Err(config_error("method.form needs epsilon > 0 and max_iter >= 1"));
        }
        let a = &self.method.adaptive;
        if a.n_per_stage < 2 || a.max_stages == 0 || !(a.halfwidth > 0.0) || !(a.termination_width > 0.0) || a.n_is < 2 {
            return Err(config_error("method.adaptive: need n_per_stage >= 2, max_stages >= 1, positive widths, n_is >= 2"));
        }
        if self.method.sensitivity.samples == 0 || self.method.sensitivity.samples_is == 0 {
            return Err(config_error("method.sensitivity sample counts must be positive"));
        }
        if self.validate.meshes.iter().any(|&n| n < 2) || self.validate.modes == 0 {
            return Err(config_error("validate: meshes must be >= 2 and modes >= 1"));
        }
        Ok(())
    }

    /// Plate at the configured mesh.
    pub fn plate_model(&self) -> Result<PlateModel, CliError> {
        let p = &self.plate;
        let plies = p
            .plies
            .iter()
            .enumerate()
            .map(|(k, ply)| {
                let m = self.materials.get(&ply.material).ok_or_else(|| {
                    config_error(format!("plate.plies[{k}]: unknown material {:?}", ply.material))
                })?;
                Ok(Ply {
                    e1: m.e1,
                    e2: m.e2,
                    g12: m.g12,
                    g13: m.g13,
                    g23: m.g23,
                    nu12: m.nu12,
                    rho: m.rho,
                    thickness: ply.thickness,
                    theta0: ply.theta[0],
                    theta1: ply.theta[1],
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(PlateModel {
            a: p.a,
            b: p.b,
            plies,
            cutout: p.cutout.as_ref().map(|c| Cutout { xc: c.xc, yc: c.yc, d_major: c.d, ellipticity: c.ellipticity }),
            bc: p.bc,
            mesh_nx: p.mesh[0],
            mesh_ny: p.mesh[1],
            shear_correction: p.shear_correction,
        })
    }

    /// Random variables with per-ply rows expanded.
    pub fn variables(&self) -> Result<Vec<RandomVariableSpec>, CliError> {
        let n_plies = self.plate.plies.len();
        let mut out = Vec::new();
        for v in &self.variables {
            let dispersion = match (v.cov, v.std) {
                (Some(c), None) => Dispersion::Cov(c),
                (None, Some(s)) => Dispersion::Std(s),
                _ => return Err(config_error(format!("variable {:?}: give exactly one of cov and std", v.name))),
            };
            if v.per_ply {
                let binding: fn(usize) -> Binding = match v.target.as_str() {
                    "thickness" => Binding::Thickness,
                    "angle" => Binding::Angle,
                    t => {
                        return Err(config_error(format!(
                            "variable {:?}: per_ply needs target thickness or angle, got {t:?}",
                            v.name
                        )))
                    }
                };
                out.extend(expand_per_ply(&v.name, binding, n_plies, v.family, v.mean, dispersion));
            } else {
                let target: Binding =
                    v.target.parse().map_err(|e| config_error(format!("variable {:?}: {e}", v.name)))?;
                out.push(RandomVariableSpec { name: v.name.clone(), target, family: v.family, mean: v.mean, dispersion });
            }
        }
        Ok(out)
    }

    pub fn require_variables(&self) -> Result<Vec<RandomVariableSpec>, CliError> {
        let specs = self.variables()?;
        if specs.is_empty() {
            return Err(config_error("this command needs a [[variables]] table"));
        }
        Ok(specs)
    }

    /// Digest of everything that determines a FEM frequency for given
    /// inputs: plate, materials, solver settings and variable bindings.
    pub fn model_digest(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            plate: &'a PlateConfig,
            materials: &'a BTreeMap<String, Material>,
            fem: &'a FemConfig,
            variables: &'a [VariableConfig],
        }
        let key = Key { plate: &self.plate, materials: &self.materials, fem: &self.fem, variables: &self.variables };
        hex_digest(toml::to_string(&key).expect("key serializes").as_bytes())
    }

    /// Digest of the whole configuration.
    pub fn digest(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
