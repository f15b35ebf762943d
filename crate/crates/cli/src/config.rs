//! Experiment configuration: a strict TOML document covering the scene,
//! trajectory, camera, sensor, fusion parameters and output layout. Unknown
//! keys are fatal so a typo cannot silently fall back to a default.

use serde::{Deserialize, Serialize};

use semvox::fusion::FusionStrategy;
use semvox::observation::FusionConfig;
use semvox::sim::{
    generate_scene, AxisBox, FloorSpec, ObservationKind, Scene, SceneSpec, SensorModel,
    TrajectorySpec,
};
use semvox::types::{CameraIntrinsics, CoreError};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_voxel_size")]
    pub voxel_size: f64,
    /// Benchmark row order for `compare`.
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    pub scene: SceneConfig,
    pub trajectory: TrajectoryConfig,
    pub camera: CameraConfig,
    pub sensor: SensorConfig,
    #[serde(default)]
    pub fusion: FusionSection,
    #[serde(default)]
    pub observations: ObservationConfig,
}

fn default_voxel_size() -> f64 {
    0.1
}

fn default_strategies() -> Vec<String> {
    FusionStrategy::BENCHMARK_ORDER
        .iter()
        .map(|s| s.name().to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub num_classes: usize,
    pub background_class: usize,
    pub boxes: Vec<BoxConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<FloorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorConfig {
    pub z: f64,
    pub half_extent: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryConfig {
    Orbit {
        center: [f64; 3],
        radius: f64,
        height: f64,
        frames: usize,
        dt: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub p_correct: f64,
    pub outlier_rate: f64,
    pub outlier_confidence: f64,
    pub epistemic_spread_correct: f64,
    pub epistemic_spread_outlier: f64,
    pub uncertainty_error_correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSection {
    pub beta: f64,
    pub eps_var: f64,
    pub p_min: f64,
    pub mc_samples: usize,
}

impl Default for FusionSection {
    fn default() -> Self {
        let d = FusionConfig::<f64>::default();
        Self {
            beta: d.beta,
            eps_var: d.eps_var,
            p_min: d.p_min,
            mc_samples: d.mc_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationConfig {
    /// "mean_variance" or "mc_samples".
    pub kind: String,
    pub stride: usize,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            kind: "mean_variance".to_string(),
            stride: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scene()?;
        self.intrinsics()?;
        self.sensor_model(self.seed)
            .validate()
            .map_err(|e| CliError::Scene(e.to_string()))?;
        self.fusion_config()
            .validate(self.scene.num_classes)
            .map_err(CliError::Config)?;
        if !(self.voxel_size > 0.0) {
            return Err(CliError::Config(format!(
                "voxel_size = {} must be positive",
                self.voxel_size
            )));
        }
        if self.observations.stride == 0 {
            return Err(CliError::Config("stride must be at least 1".into()));
        }
        self.observation_kind()?;
        for name in &self.strategies {
            if FusionStrategy::from_name(name).is_none() {
                return Err(CliError::Config(format!("unknown strategy {name:?}")));
            }
        }
        if self.strategies.is_empty() {
            return Err(CliError::Config("strategies list is empty".into()));
        }
        Ok(())
    }

    pub fn scene(&self) -> Result<Scene, CliError> {
        generate_scene(&SceneSpec {
            num_classes: self.scene.num_classes,
            background_class: self.scene.background_class,
            boxes: self
                .scene
                .boxes
                .iter()
                .map(|b| AxisBox {
                    min: b.min,
                    max: b.max,
                    class: b.class,
                })
                .collect(),
            floor: self.scene.floor.as_ref().map(|f| FloorSpec {
                z: f.z,
                half_extent: f.half_extent,
                thickness: f.thickness,
            }),
        })
        .map_err(|e| CliError::Scene(e.to_string()))
    }

    pub fn trajectory(&self) -> TrajectorySpec {
        match self.trajectory {
            TrajectoryConfig::Orbit {
                center,
                radius,
                height,
                frames,
                dt,
            } => TrajectorySpec::Orbit {
                center,
                radius,
                height,
                frames,
                dt,
            },
        }
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics<f64>, CliError> {
        CameraIntrinsics::new(
            self.camera.fx,
            self.camera.fy,
            self.camera.cx,
            self.camera.cy,
            self.camera.width,
            self.camera.height,
        )
        .map_err(|e: CoreError| CliError::Config(e.to_string()))
    }

    pub fn sensor_model(&self, seed: u64) -> SensorModel {
        SensorModel {
            p_correct: self.sensor.p_correct,
            outlier_rate: self.sensor.outlier_rate,
            outlier_confidence: self.sensor.outlier_confidence,
            epistemic_spread_correct: self.sensor.epistemic_spread_correct,
            epistemic_spread_outlier: self.sensor.epistemic_spread_outlier,
            uncertainty_error_correlation: self.sensor.uncertainty_error_correlation,
            seed,
        }
    }

    pub fn fusion_config(&self) -> FusionConfig<f64> {
        FusionConfig {
            beta: self.fusion.beta,
            eps_var: self.fusion.eps_var,
            p_min: self.fusion.p_min,
            mc_samples: self.fusion.mc_samples,
        }
    }

    pub fn observation_kind(&self) -> Result<ObservationKind, CliError> {
        match self.observations.kind.as_str() {
            "mean_variance" => Ok(ObservationKind::MeanVariance),
            "mc_samples" => Ok(ObservationKind::McSamples),
            other => Err(CliError::Config(format!(
                "observations.kind must be \"mean_variance\" or \"mc_samples\", got {other:?}"
            ))),
        }
    }

    pub fn strategy_list(&self) -> Vec<FusionStrategy> {
        self.strategies
            .iter()
            .map(|n| FusionStrategy::from_name(n).expect("validated"))
            .collect()
    }
}
