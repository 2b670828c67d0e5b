//! Configuration files and run output.

pub mod config;
pub mod output;

pub use config::{
    load_config, CompressorConfig, EosConfig, InitialState, NetworkConfig, NodeConfig, NodeKindConfig, PipeConfig,
    SimulationConfig, FIVE_NODE_CFG, SCHEMA_VERSION,
};
pub use output::{read_series, sha256_hex, write_json, CsvRow, RunSummary, SeriesWriter, CSV_HEADER};

use crate::experiments::five_node::{PIPES, SLACK_PRESSURE};
use crate::network::CompressorSide;
use crate::profiles::{five_node as sched, TimeProfile};

/// The five-node network as a config document; the bundled fixture is its
/// serialisation.
pub fn five_node_config() -> NetworkConfig {
    let node = |id: &str, kind, profile| NodeConfig {
        id: id.into(),
        kind,
        profile,
    };
    let comp = |id: &str, pipe: &str, ratio| CompressorConfig {
        id: id.into(),
        pipe: pipe.into(),
        side: CompressorSide::Inlet,
        ratio,
    };
    NetworkConfig {
        schema: SCHEMA_VERSION.into(),
        eos: EosConfig::default(),
        nodes: vec![
            node("1", NodeKindConfig::Slack, TimeProfile::constant(SLACK_PRESSURE)),
            node("2", NodeKindConfig::Demand, TimeProfile::constant(0.0)),
            node("3", NodeKindConfig::Demand, sched::d3()),
            node("4", NodeKindConfig::Demand, TimeProfile::constant(0.0)),
            node("5", NodeKindConfig::Demand, sched::d5()),
        ],
        pipes: PIPES
            .iter()
            .map(|&(id, from, to, length, diameter, friction)| PipeConfig {
                id: id.into(),
                from: from.into(),
                to: to.into(),
                length,
                diameter,
                friction,
            })
            .collect(),
        compressors: vec![
            comp("1", "1", sched::c1()),
            comp("2", "2", sched::c2()),
            comp("3", "5", sched::c3()),
        ],
        simulation: SimulationConfig {
            dt: Some(0.125),
            t_end: sched::DAY,
            dx_target: 62.5,
            cfl_safety: 0.9,
            cadence: 60.0,
            output: "out/five_node".into(),
            initial: InitialState::Steady,
        },
    }
}
