//! Large-scale channel: distance pathloss, sector antenna pattern and
//! spatially correlated shadowing, combined into a per-drop [`LinkTable`].

mod antenna;
mod links;
mod pathloss;
mod shadow;

pub use antenna::{antenna_gain, AntennaPattern};
pub use links::{build_link_table, wan_gain_at, LinkTable};
pub use pathloss::{pathloss_d2d, pathloss_wan};
pub use shadow::{
    generate_shadow_field, repair_correlation, write_shadow_csv, CorrelationFactor, ShadowConfig,
    ShadowField, ShadowGenerator, ShadowMethod, TorusGridSampler,
};
