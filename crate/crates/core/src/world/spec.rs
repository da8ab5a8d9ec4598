use serde::{Deserialize, Serialize};

use super::{Bounds, Obstacle, SensorNoise, SupportSurface, VegetationField, WorldModel};
use crate::config::ConfigError;

/// On-disk world description: geometry, sensor noise and a default seed.
///
/// ```toml
/// seed = 7
///
/// [bounds]
/// min = [0.0, 0.0]
/// max = [20.0, 20.0]
///
/// [support]
/// offset = 0.0
/// ramp = [0.05, 0.0]          # dz/dx, dz/dy
/// bumps = [{ center = [8.0, 10.0], amplitude = 0.4, sigma = 2.5 }]
///
/// [vegetation]
/// base = 0.1
/// gradient = [0.005, 0.0]
///
/// [[obstacles]]
/// center = [10.0, 10.0]
/// radius = 0.4
/// height = 1.5
///
/// [noise]
/// cloud_sigma = 0.02
/// canopy_roughness = 0.0       # extra scatter of vegetation returns
/// density = 1000.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    #[serde(default)]
    pub seed: u64,
    pub bounds: Bounds,
    #[serde(default)]
    pub support: SupportSurface,
    #[serde(default)]
    pub vegetation: VegetationField,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub noise: SensorNoise,
}

impl WorldSpec {
    pub fn world(&self) -> WorldModel {
        WorldModel {
            bounds: self.bounds,
            support: self.support.clone(),
            vegetation: self.vegetation.clone(),
            obstacles: self.obstacles.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("world specs always serialize")
    }
}

/// Parses and validates a world spec.
pub fn parse_world_spec(text: &str) -> Result<WorldSpec, ConfigError> {
    let spec: WorldSpec = toml::from_str(text)?;
    spec.world().validate(None).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    spec.noise.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"
            seed = 7
            [bounds]
            min = [0.0, 0.0]
            max = [20.0, 20.0]
            [support]
            ramp = [0.05, 0.0]
            bumps = [{ center = [8.0, 10.0], amplitude = 0.4, sigma = 2.5 }]
            [vegetation]
            base = 0.1
            [[obstacles]]
            center = [10.0, 10.0]
            radius = 0.4
            height = 1.5
            [noise]
            cloud_sigma = 0.02
            density = 1000.0
        "#;
        let spec = parse_world_spec(text).unwrap();
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.obstacles.len(), 1);
        assert_eq!(spec.support.bumps[0].sigma, 2.5);
        assert_eq!(parse_world_spec(&spec.to_toml()).unwrap(), spec);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_world_spec("bounds = 3"), Err(ConfigError::Parse(_))));
        assert!(matches!(
            parse_world_spec("[bounds]\nmin = [0.0, 0.0]\nmax = [0.0, 1.0]"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(parse_world_spec("[bounds]\nmin = [0.0, 0.0]\nmax = [1.0, 1.0]\nunknown = 1").is_err());
        assert!(parse_world_spec("[bounds]\nmin = [0.0, 0.0]\nmax = [1.0, 1.0]\n[noise]\ndensity = -1.0").is_err());
    }
}
