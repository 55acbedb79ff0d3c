//! Pipeline configuration file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use homog_core::calibrate::{Bounds, CostConfig, Theta, TrustRegionConfig};
use homog_core::fem::FlemishGeometry;
use homog_core::validation::{WallProgram, WallRunConfig};
use homog_core::vlab::{CampaignConfig, MasonryMaterials};
use homog_core::{Error, Result};

/// Whole pipeline configuration. Every section is optional and falls back to
/// the reference Flemish-bond setup.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub geometry: FlemishGeometry,
    pub materials: MasonryMaterials,
    pub campaign: CampaignConfig,
    pub calibration: CalibrationSection,
    pub validation: ValidationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub theta0: Theta,
    pub bounds: Bounds,
    pub optimizer: TrustRegionConfig,
    pub cost: CostConfig,
    /// Also require admissibility at the element length of the macro wall.
    pub admissible_at_wall: bool,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            theta0: Theta::starting_point(),
            bounds: Bounds::reference(),
            optimizer: TrustRegionConfig::default(),
            cost: CostConfig::default(),
            admissible_at_wall: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSection {
    pub width: f64,
    pub height: f64,
    /// Brick element size of the micro wall [m].
    pub micro_brick_element: f64,
    pub macro_nx: usize,
    pub macro_ny: usize,
    pub programs: Vec<NamedProgram>,
    pub run: WallRunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedProgram {
    pub name: String,
    #[serde(flatten)]
    pub program: WallProgram,
}

impl Default for ValidationSection {
    fn default() -> Self {
        Self {
            width: 1.27,
            height: 1.27,
            micro_brick_element: 0.06,
            macro_nx: 44,
            macro_ny: 45,
            programs: vec![
                NamedProgram {
                    name: "compression".into(),
                    program: WallProgram::Compression {
                        dy_max: 0.015,
                        steps: 150,
                    },
                },
                NamedProgram {
                    name: "shear_compression".into(),
                    program: WallProgram::ShearCompression {
                        dy: 9e-5,
                        pre_steps: 5,
                        dx_max: 0.006,
                        steps: 120,
                    },
                },
            ],
            run: WallRunConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            what: "configuration".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            what: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_setup() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.calibration.theta0.f0t, 3.5e5);
        assert_eq!(c.materials.mortar.gc, 80_000.0);
    }

    #[test]
    fn sections_override_defaults_and_round_trip() {
        let c = PipelineConfig::from_toml(
            "[geometry]\nbrick_length = 0.25\nbrick_height = 0.055\njoint = 0.012\ncourses = 2\nresolution = 1\n\n\
             [campaign]\ntension_steps = 10\n\n[[validation.programs]]\nname = \"c\"\nkind = \"compression\"\ndy_max = 0.001\nsteps = 4\n",
        )
        .unwrap();
        assert_eq!(c.geometry.joint, 0.012);
        assert_eq!(c.campaign.tension_steps, 10);
        assert_eq!(c.validation.programs.len(), 1);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(PipelineConfig::from_toml("[campaign]\nstepz = 3\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn shipped_reference_config_parses() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
        let c = PipelineConfig::load(&path).unwrap();
        assert!(c.calibration.admissible_at_wall);
        assert_eq!(c.calibration.theta0.gc, 1500.0);
        assert_eq!(c.calibration.theta0.f0t, Theta::starting_point().f0t);
        assert_eq!(c.validation, ValidationSection::default());
    }
}
