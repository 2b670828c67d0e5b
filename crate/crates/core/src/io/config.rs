//! Versioned TOML network description.
//!
//! ```toml
//! schema = "v1"
//!
//! [eos]
//! model = "cnga"
//!
//! [[nodes]]
//! id = "1"
//! kind = "slack"
//! profile = { type = "constant", value = 3447378.645 }
//!
//! [[pipes]]
//! id = "1"
//! from = "1"
//! to = "2"
//! length = 20000.0
//! diameter = 0.9144
//! friction = 0.01
//!
//! [simulation]
//! t_end = 3600.0
//! dx_target = 500.0
//! ```

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eos::{EosModel, TemperatureProfile, REFERENCE_B1, REFERENCE_B2, REFERENCE_GRAVITY, REFERENCE_RT};
use crate::error::{Error, Result};
use crate::network::{CompressorSide, Network, NetworkBuilder};
use crate::pipe::PipeGeometry;
use crate::profiles::TimeProfile;

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub schema: String,
    #[serde(default)]
    pub eos: EosConfig,
    pub nodes: Vec<NodeConfig>,
    pub pipes: Vec<PipeConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compressors: Vec<CompressorConfig>,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

/// Equation of state; unset parameters take the reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EosConfig {
    /// `ideal`, `cnga`, `cnga_detailed` or `non_isothermal`.
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_gravity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_ambient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_jump: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
}

impl Default for EosConfig {
    fn default() -> Self {
        EosConfig {
            model: "cnga".into(),
            wave_speed: None,
            b1: None,
            b2: None,
            rt: None,
            temperature: None,
            gas_gravity: None,
            gas_constant: None,
            t_ambient: None,
            t_jump: None,
            decay_rate: None,
        }
    }
}

impl EosConfig {
    pub fn to_model(&self) -> Result<EosModel> {
        let model = match self.model.as_str() {
            "ideal" => EosModel::Ideal {
                wave_speed: self
                    .wave_speed
                    .ok_or_else(|| Error::domain("ideal eos requires `wave_speed`"))?,
            },
            "cnga" => EosModel::Cnga {
                b1: self.b1.unwrap_or(REFERENCE_B1),
                b2: self.b2.unwrap_or(REFERENCE_B2),
                rt: self.rt.unwrap_or(REFERENCE_RT),
            },
            "cnga_detailed" => EosModel::CngaDetailed {
                temperature: self
                    .temperature
                    .ok_or_else(|| Error::domain("cnga_detailed eos requires `temperature`"))?,
                gas_gravity: self.gas_gravity.unwrap_or(REFERENCE_GRAVITY),
                gas_constant: self.gas_constant,
            },
            "non_isothermal" => EosModel::NonIsothermal {
                profile: TemperatureProfile {
                    ambient: self
                        .t_ambient
                        .ok_or_else(|| Error::domain("non_isothermal eos requires `t_ambient`"))?,
                    jump: self.t_jump.unwrap_or(0.0),
                    decay_rate: self.decay_rate.unwrap_or(0.0),
                },
                gas_gravity: self.gas_gravity.unwrap_or(REFERENCE_GRAVITY),
                gas_constant: self.gas_constant,
            },
            other => return Err(Error::domain(format!("unknown eos model `{other}`"))),
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKindConfig {
    /// `profile` is the pressure, Pa.
    Slack,
    /// `profile` is the withdrawal, kg/s.
    Demand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: String,
    pub kind: NodeKindConfig,
    pub profile: TimeProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeConfig {
    pub id: String,
    pub from: String,
    pub to: String,
    /// m
    pub length: f64,
    /// m
    pub diameter: f64,
    pub friction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressorConfig {
    pub id: String,
    pub pipe: String,
    pub side: CompressorSide,
    pub ratio: TimeProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Steady flow for the data at `t = 0`.
    #[default]
    Steady,
    /// Gas at rest at the slack pressure.
    Rest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// s; unset picks the largest step under `cfl_safety` dividing `cadence`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    pub dx_target: f64,
    #[serde(default = "default_cfl_safety")]
    pub cfl_safety: f64,
    /// Output interval, s.
    #[serde(default = "default_cadence")]
    pub cadence: f64,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub initial: InitialState,
}

fn default_cfl_safety() -> f64 {
    0.9
}

fn default_cadence() -> f64 {
    60.0
}

fn default_output() -> String {
    "out".into()
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: None,
            t_end: 3600.0,
            dx_target: 500.0,
            cfl_safety: default_cfl_safety(),
            cadence: default_cadence(),
            output: default_output(),
            initial: InitialState::default(),
        }
    }
}

impl NetworkConfig {
    /// Parses TOML text. With `strict`, keys the schema does not know are an
    /// error; otherwise they are logged and skipped.
    pub fn from_toml_str(text: &str, origin: &str, strict: bool) -> Result<Self> {
        let mut unknown = BTreeSet::new();
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            detail: e.to_string(),
        })?;
        let cfg: NetworkConfig = serde_ignored::deserialize(de, |path| {
            unknown.insert(path.to_string());
        })
        .map_err(|e| Error::Parse {
            path: origin.to_string(),
            detail: e.to_string(),
        })?;
        if !unknown.is_empty() {
            if strict {
                return Err(Error::Validation(
                    unknown.into_iter().map(|k| format!("unknown key `{k}`")).collect(),
                ));
            }
            for k in unknown {
                log::warn!("{origin}: ignoring unknown key `{k}`");
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse {
            path: "<serialize>".into(),
            detail: e.to_string(),
        })
    }

    /// Every rule violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.schema != SCHEMA_VERSION {
            out.push(format!("schema must be \"{SCHEMA_VERSION}\", got \"{}\"", self.schema));
        }
        if let Err(e) = self.eos.to_model() {
            out.push(format!("eos: {e}"));
        }

        let mut node_ids = HashSet::new();
        for n in &self.nodes {
            if !node_ids.insert(n.id.as_str()) {
                out.push(format!("duplicate node id '{}'", n.id));
            }
            if let Err(e) = n.profile.validate() {
                out.push(format!("node '{}': {e}", n.id));
            }
            if n.kind == NodeKindConfig::Slack && n.profile.range().0 <= 0.0 {
                out.push(format!("node '{}': slack pressure must be positive", n.id));
            }
        }
        if !self.nodes.iter().any(|n| n.kind == NodeKindConfig::Slack) {
            out.push("network needs at least one slack node".into());
        }

        let mut pipe_ids = HashSet::new();
        for p in &self.pipes {
            if !pipe_ids.insert(p.id.as_str()) {
                out.push(format!("duplicate pipe id '{}'", p.id));
            }
            for (end, id) in [("from", &p.from), ("to", &p.to)] {
                if !node_ids.contains(id.as_str()) {
                    out.push(format!("pipe '{}': {end} node '{id}' does not exist", p.id));
                }
            }
            for (name, v) in [("length", p.length), ("diameter", p.diameter)] {
                if !(v > 0.0 && v.is_finite()) {
                    out.push(format!("pipe '{}': {name} must be positive, got {v}", p.id));
                }
            }
            if !(p.friction >= 0.0 && p.friction.is_finite()) {
                out.push(format!(
                    "pipe '{}': friction must be non-negative, got {}",
                    p.id, p.friction
                ));
            }
        }

        let mut comp_ids = HashSet::new();
        for c in &self.compressors {
            if !comp_ids.insert(c.id.as_str()) {
                out.push(format!("duplicate compressor id '{}'", c.id));
            }
            if !pipe_ids.contains(c.pipe.as_str()) {
                out.push(format!("compressor '{}': pipe '{}' does not exist", c.id, c.pipe));
            }
            match c.ratio.validate() {
                Err(e) => out.push(format!("compressor '{}': {e}", c.id)),
                Ok(()) if c.ratio.range().0 < 1.0 => {
                    out.push(format!("compressor '{}': boost ratio must be at least 1", c.id))
                }
                Ok(()) => {}
            }
        }

        let s = &self.simulation;
        if let Some(dt) = s.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                out.push(format!("simulation: dt must be positive, got {dt}"));
            }
        }
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
            out.push(format!("simulation: t_end must be non-negative, got {}", s.t_end));
        }
        for (name, v) in [("dx_target", s.dx_target), ("cadence", s.cadence)] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("simulation: {name} must be positive, got {v}"));
            }
        }
        if !(s.cfl_safety > 0.0 && s.cfl_safety <= 1.0) {
            out.push(format!(
                "simulation: cfl_safety must lie in (0, 1], got {}",
                s.cfl_safety
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Builds the network (pipes at rest; no steady initialisation).
    pub fn build_network(&self) -> Result<Network> {
        self.validate()?;
        let mut b = NetworkBuilder::new(self.eos.to_model()?);
        for n in &self.nodes {
            b = match n.kind {
                NodeKindConfig::Slack => b.slack(n.id.clone(), n.profile.clone()),
                NodeKindConfig::Demand => b.demand(n.id.clone(), n.profile.clone()),
            };
        }
        for p in &self.pipes {
            b = b.pipe(
                p.id.clone(),
                p.from.clone(),
                p.to.clone(),
                PipeGeometry::new(p.length, p.diameter, p.friction)?,
            );
        }
        for c in &self.compressors {
            b = b.compressor(c.id.clone(), c.pipe.clone(), c.side, c.ratio.clone());
        }
        b.build(self.simulation.dx_target)
    }
}

/// Reads, parses and validates a config file.
pub fn load_config(path: impl AsRef<Path>, strict: bool) -> Result<NetworkConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = NetworkConfig::from_toml_str(&text, &path.display().to_string(), strict)?;
    cfg.validate()?;
    Ok(cfg)
}

/// The bundled five-node network description.
pub const FIVE_NODE_CFG: &str = include_str!("../../configs/five_node.cfg");
