//! Run configuration files.
//!
//! A config is a JSON object; every key is optional and unknown keys are
//! rejected:
//!
//! ```json
//! {
//!   "machine": "toy",
//!   "class": "builtin:reveal-benchmark",
//!   "discount": "geometric:1/2",
//!   "schedule": {"kind": "inverse_sqrt"},
//!   "budget": {"max_prefix_len": 24, "max_steps": 67108864},
//!   "seed": 0,
//!   "output_dir": "out",
//!   "agent": {"exploit_floor": 1e-12, "force_explore": false, "eps_trunc": "1/100"}
//! }
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use uailab_core::bayesexp::{AgentConfig, EpsilonSchedule};
use uailab_core::machine::Caps;
use uailab_core::rational::{self, Q};
use uailab_core::values::DiscountSchedule;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("config error at `{path}`: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn at(path: &str, message: impl fmt::Display) -> Self {
        SchemaError {
            path: path.to_string(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub machine: String,
    /// Path to a class file, or `builtin:example1` / `builtin:reveal-benchmark`.
    pub class: Option<String>,
    #[serde(serialize_with = "display", deserialize_with = "from_text")]
    pub discount: DiscountSchedule,
    pub schedule: EpsilonSchedule,
    pub budget: Caps,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub agent: AgentOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentOptions {
    pub exploit_floor: f64,
    pub force_explore: bool,
    #[serde(with = "rational::serde_q")]
    pub eps_trunc: Q,
}

impl Default for AgentOptions {
    fn default() -> Self {
        let d = AgentConfig::default();
        AgentOptions {
            exploit_floor: d.exploit_floor,
            force_explore: d.force_explore,
            eps_trunc: d.eps_trunc,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            machine: "toy".into(),
            class: None,
            discount: DiscountSchedule::default(),
            schedule: EpsilonSchedule::default(),
            budget: Caps::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            agent: AgentOptions::default(),
        }
    }
}

fn display<S: Serializer>(value: &DiscountSchedule, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(value)
}

fn from_text<'de, D: Deserializer<'de>>(d: D) -> Result<DiscountSchedule, D::Error> {
    String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
}

/// Parses and validates a config file's bytes.
pub fn parse_config(bytes: &[u8]) -> Result<RunConfig, SchemaError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        let path = match unknown_field(&message) {
            Some(field) if path == field || path.ends_with(&format!(".{field}")) => path,
            Some(field) if path == "." => field.to_string(),
            Some(field) => format!("{path}.{field}"),
            None => path,
        };
        SchemaError::at(&path, message)
    })?;
    config.validate()?;
    Ok(config)
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

pub fn load_config(path: &Path) -> Result<RunConfig, SchemaError> {
    let bytes = std::fs::read(path).map_err(|e| SchemaError::at(".", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&bytes)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SchemaError> {
        let caps = [
            ("budget.max_prefix_len", self.budget.max_prefix_len as u64),
            ("budget.max_steps", self.budget.max_steps),
            ("budget.max_mm_terms", self.budget.max_mm_terms),
            ("budget.max_planner_nodes", self.budget.max_planner_nodes),
            ("budget.max_oracle_policies", self.budget.max_oracle_policies),
        ];
        for (name, value) in caps {
            if value == 0 {
                return Err(SchemaError::at(name, "caps must be positive"));
            }
        }
        uailab_core::machine::machine_by_id(&self.machine).map_err(|e| SchemaError::at("machine", e))?;
        self.discount.validate().map_err(|e| SchemaError::at("discount", e))?;
        self.schedule.validate().map_err(|e| SchemaError::at("schedule", e))?;
        self.agent_config().validate().map_err(|e| SchemaError::at("agent", e))?;
        if let Some(class) = &self.class {
            if !class.starts_with("builtin:") && !Path::new(class).is_file() {
                return Err(SchemaError::at("class", format!("no such file: {class}")));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(SchemaError::at("output_dir", "must not be empty"));
        }
        Ok(())
    }

    /// Caps after applying the `UAILAB_MAX_STEPS` override.
    pub fn caps(&self) -> Result<Caps, uailab_core::Error> {
        self.budget.with_env_override()
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            discount: self.discount.clone(),
            epsilon: self.schedule.clone(),
            exploit_floor: self.agent.exploit_floor,
            force_explore: self.agent.force_explore,
            eps_trunc: self.agent.eps_trunc.clone(),
            caps: self.budget,
        }
    }

    /// The canonical serialization: compact JSON with sorted keys,
    /// leaving out where results are written.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        serde_json::to_vec(&value).expect("config serializes")
    }

    /// Hex SHA-256 of [`RunConfig::canonical_bytes`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
