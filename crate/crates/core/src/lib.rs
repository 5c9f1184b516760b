//! Overlay path selection, service chaining and transfer simulation over a
//! mixed ISP / cloud-backbone topology.

pub mod atlasio;
pub mod measure;
pub mod model;
pub mod netsim;
pub mod pathfinder;
pub mod scheduler;
pub mod synth;
