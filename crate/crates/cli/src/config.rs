//! Scenario configuration: TOML with one `[[scenario]]` block per scenario
//! plus optional `[power]` / `[floorplan]` overrides. A resolved run also
//! round-trips through the JSON manifest written next to every trace.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sculi_core::accel::Block;
use sculi_core::curve::{AffinePoint, CurveParams, Scalar};
use sculi_core::leakage::{Floorplan, LaserSpec, PowerParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("scenario `{scenario}`, field `{field}`: {reason}")]
    Field {
        scenario: String,
        field: String,
        reason: String,
    },
    #[error("no scenario named `{0}` in the config")]
    NoSuchScenario(String),
    #[error("config has no scenarios")]
    Empty,
}

/// Partial override of the power-model constants.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PowerOverrides {
    pub w_dyn: Option<f64>,
    pub i_static0: Option<f64>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub sigma_noise: Option<f64>,
    pub drift: Option<f64>,
    pub cells_per_weight: Option<f64>,
    pub kernel_decay: Option<f64>,
    pub kernel_support: Option<usize>,
    /// Per-block data-dependence of static current (partial map).
    pub gamma: Option<BTreeMap<String, f64>>,
    /// Per-block relative sizes (partial map).
    pub gate_weight: Option<BTreeMap<String, f64>>,
}

impl PowerOverrides {
    pub fn apply(&self, base: &mut PowerParams, scenario: &str) -> Result<(), ConfigError> {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    base.$field = v;
                }
            };
        }
        set!(w_dyn);
        set!(i_static0);
        set!(alpha);
        set!(eta);
        set!(sigma_noise);
        set!(drift);
        set!(cells_per_weight);
        set!(kernel_decay);
        set!(kernel_support);
        for (map, target, field) in [
            (&self.gamma, &mut base.gamma, "gamma"),
            (&self.gate_weight, &mut base.gate_weight, "gate_weight"),
        ] {
            if let Some(map) = map {
                for (name, v) in map {
                    let b = Block::from_str(name).map_err(|reason| ConfigError::Field {
                        scenario: scenario.to_string(),
                        field: format!("power.{field}.{name}"),
                        reason,
                    })?;
                    target[b] = *v;
                }
            }
        }
        Ok(())
    }
}

fn default_repeats() -> usize {
    1
}

/// One `[[scenario]]` block.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Scalar: hex digits, or "random:<seed>" for a full 233-bit scalar.
    pub scalar: String,
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub laser: Option<LaserSpec>,
    /// Base point as "x,y" hex pair; the curve generator if absent.
    #[serde(default)]
    pub base_point: Option<String>,
    /// Scenario-level power overrides on top of the global ones.
    #[serde(default)]
    pub power: Option<PowerOverrides>,
}

/// Whole config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub power: Option<PowerOverrides>,
    #[serde(default)]
    pub floorplan: Option<Floorplan>,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioConfig>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_toml_str(&text)
    }

    pub fn scenario(&self, name: &str) -> Result<&ScenarioConfig, ConfigError> {
        self.scenarios
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| ConfigError::NoSuchScenario(name.to_string()))
    }
}

/// Fully resolved, reproducible description of one scenario: what the
/// manifest records and what the runner executes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolvedScenario {
    pub name: String,
    pub scalar_hex: String,
    pub base_point_hex: String,
    pub seed: u64,
    pub repeats: usize,
    pub laser: LaserSpec,
    pub power: PowerParams,
    pub floorplan: Floorplan,
}

impl ResolvedScenario {
    pub fn scalar(&self) -> Scalar {
        Scalar::from_hex(&self.scalar_hex).expect("resolved scalar hex")
    }

    pub fn base_point(&self, curve: &CurveParams) -> AffinePoint {
        AffinePoint::from_hex(&curve.field, &self.base_point_hex).expect("resolved point hex")
    }
}

/// Resolve a scenario against the global config and a curve.
pub fn resolve_scenario(
    cfg: &Config,
    sc: &ScenarioConfig,
    curve: &CurveParams,
) -> Result<ResolvedScenario, ConfigError> {
    let field_err = |field: &str, reason: String| ConfigError::Field {
        scenario: sc.name.clone(),
        field: field.to_string(),
        reason,
    };

    if sc.name.is_empty() || sc.name.contains(['/', '\\']) {
        return Err(field_err(
            "name",
            "must be non-empty and free of path separators".into(),
        ));
    }
    if sc.repeats == 0 {
        return Err(field_err("repeats", "must be at least 1".into()));
    }

    let scalar_hex = if let Some(seed_str) = sc.scalar.strip_prefix("random:") {
        let seed: u64 = seed_str
            .parse()
            .map_err(|_| field_err("scalar", format!("bad random seed `{seed_str}`")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Scalar::random_full(233, &mut rng).to_hex()
    } else {
        let k = Scalar::from_hex(&sc.scalar)
            .map_err(|e| field_err("scalar", e.to_string()))?;
        if k.is_zero() {
            return Err(field_err("scalar", "must be nonzero".into()));
        }
        k.to_hex()
    };

    let base_point_hex = match &sc.base_point {
        None => curve.generator().to_hex(&curve.field),
        Some(s) => {
            let p = AffinePoint::from_hex(&curve.field, s)
                .map_err(|e| field_err("base_point", e.to_string()))?;
            if !curve.is_on_curve(&p) {
                return Err(field_err("base_point", "point is not on the curve".into()));
            }
            if p.is_infinity() {
                return Err(field_err("base_point", "must not be infinity".into()));
            }
            p.to_hex(&curve.field)
        }
    };

    let laser = sc.laser.unwrap_or_else(LaserSpec::disabled);
    laser
        .validate()
        .map_err(|e| field_err("laser", e.to_string()))?;

    let mut power = PowerParams::default();
    if let Some(overrides) = &cfg.power {
        overrides.apply(&mut power, &sc.name)?;
    }
    if let Some(overrides) = &sc.power {
        overrides.apply(&mut power, &sc.name)?;
    }
    power
        .validate()
        .map_err(|e| field_err("power", e.to_string()))?;

    let floorplan = cfg.floorplan.clone().unwrap_or_default();
    floorplan
        .validate()
        .map_err(|e| field_err("floorplan", e.to_string()))?;

    Ok(ResolvedScenario {
        name: sc.name.clone(),
        scalar_hex,
        base_point_hex,
        seed: sc.seed,
        repeats: sc.repeats,
        laser,
        power,
        floorplan,
    })
}

/// FNV-1a over the canonical JSON of a resolved scenario.
pub fn config_hash(resolved: &ResolvedScenario) -> String {
    let bytes = serde_json::to_vec(resolved).expect("resolved scenario serializes");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    format!("{h:016x}")
}
