use crate::channel::{build_link_table, generate_shadow_field, LinkTable, ShadowField, ShadowMethod};
use crate::config::ScenarioConfig;
use crate::deployment::{associate_all, drop_ues, NetworkLayout, Point, UeDrop, UeRole};
use crate::error::Result;
use crate::power::dl_sinr_map;
use crate::rng::{stream_rng, Stream};

/// Everything static about one drop.
#[derive(Debug, Clone)]
pub struct World {
    pub layout: NetworkLayout,
    pub ues: UeDrop,
    pub links: LinkTable,
    pub serving: Vec<usize>,
    /// Long-term DL SINR of every UE with all sectors transmitting.
    pub dl_sinr_db: Vec<f64>,
    pub shadow_method: ShadowMethod,
}

pub fn build_layout(cfg: &ScenarioConfig) -> Result<NetworkLayout> {
    Ok(NetworkLayout::build(cfg.deployment.isd, cfg.deployment.tiers)?
        .with_heights(cfg.deployment.enb_height, cfg.deployment.ue_height))
}

/// Shadowing for `points` in drop `drop`.
pub fn shadow_for(cfg: &ScenarioConfig, layout: &NetworkLayout, points: &[Point], drop: u64) -> Result<ShadowField> {
    let mut rng = stream_rng(cfg.run.seed, drop, Stream::Shadow);
    generate_shadow_field(layout, points, &cfg.channel, &mut rng)
}

impl World {
    pub fn build(cfg: &ScenarioConfig, drop: u64) -> Result<World> {
        let layout = build_layout(cfg)?;
        let mut rng = stream_rng(cfg.run.seed, drop, Stream::UeDrop);
        let ues = drop_ues(&layout, cfg.deployment.counts(), cfg.deployment.max_ues_per_sector, &mut rng)?;
        let field = shadow_for(cfg, &layout, &ues.positions, drop)?;
        Ok(Self::from_parts(cfg, layout, ues, &field))
    }

    /// A world from a given drop and shadow field.
    pub fn from_parts(cfg: &ScenarioConfig, layout: NetworkLayout, ues: UeDrop, field: &ShadowField) -> World {
        let links = build_link_table(&layout, &cfg.antenna, &ues.positions, field);
        let serving = associate_all(&links);
        let dl_sinr_db = dl_sinr_map(&links, &serving, &cfg.power);
        World {
            layout,
            ues,
            links,
            serving,
            dl_sinr_db,
            shadow_method: field.method,
        }
    }

    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    /// UEs with `role`, ascending.
    pub fn with_role(&self, role: UeRole) -> Vec<usize> {
        (0..self.num_ues()).filter(|&u| self.ues.roles[u] == role).collect()
    }

    /// Coupling loss of a UE to its serving sector.
    pub fn serving_loss(&self, ue: usize) -> f64 {
        self.links.coupling_loss(ue, self.serving[ue])
    }
}
