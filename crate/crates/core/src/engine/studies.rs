//! Standalone studies: relay-replacement upper bound and uplink-spectrum
//! power snapshots.

use rand::seq::IndexedRandom;

use crate::channel::{build_link_table, pathloss_d2d, LinkTable};
use crate::config::ScenarioConfig;
use crate::deployment::{associate_all, drop_ues, NetworkLayout, Point, UeRole};
use crate::engine::world::{build_layout, shadow_for, World};
use crate::error::Result;
use crate::relaying::{find_candidates, select_relay, CandidateFilter, NeighborRule};
use crate::rng::{stream_rng, Stream};
use crate::stats::{percentile_sorted, sorted};
use crate::units::{db_to_linear, linear_to_db};

/// Before/after samples of the relay-replacement upper bound.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpperBoundResult {
    pub dl_before_db: Vec<f64>,
    pub dl_after_db: Vec<f64>,
    pub ul_before_db: Vec<f64>,
    pub ul_after_db: Vec<f64>,
    /// Mean ICI at the serving eNB per UL UE, in dBm.
    pub ici_before_dbm: Vec<f64>,
    pub ici_after_dbm: Vec<f64>,
    /// Active UEs that found a better neighbour.
    pub replaced: usize,
    pub active: usize,
}

impl UpperBoundResult {
    pub fn merge(mut self, o: UpperBoundResult) -> Self {
        self.dl_before_db.extend(o.dl_before_db);
        self.dl_after_db.extend(o.dl_after_db);
        self.ul_before_db.extend(o.ul_before_db);
        self.ul_after_db.extend(o.ul_after_db);
        self.ici_before_dbm.extend(o.ici_before_dbm);
        self.ici_after_dbm.extend(o.ici_after_dbm);
        self.replaced += o.replaced;
        self.active += o.active;
        self
    }

    /// Median after minus median before, in dB.
    pub fn median_dl_gain_db(&self) -> f64 {
        median(&self.dl_after_db) - median(&self.dl_before_db)
    }

    pub fn median_ul_gain_db(&self) -> f64 {
        median(&self.ul_after_db) - median(&self.ul_before_db)
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    percentile_sorted(&sorted(v), 0.5)
}

/// The active UE itself or its best-DL-SINR neighbour, per active UE.
pub fn replacements(cfg: &ScenarioConfig, world: &World) -> Vec<(usize, usize)> {
    let filter = CandidateFilter {
        p_acc_max_db: cfg.relay.upper_bound_p_acc_max_db,
        rule: NeighborRule::AnySector,
        idle_only: false,
    };
    (0..world.num_ues())
        .filter(|&u| world.ues.roles[u].is_active())
        .map(|u| {
            let cands = find_candidates(u, &world.ues.roles, &world.serving, &world.links, &filter);
            (u, select_relay(u, &cands, &world.dl_sinr_db).unwrap_or(u))
        })
        .collect()
}

/// Uplink SINR per flow, averaged over random interferer rotations. Each
/// rotation schedules one transmitter per sector, drawn from the flows'
/// transmitters grouped by their serving sector; the flow's own transmitter
/// takes its sector's slot. Returns (mean SINR dB, mean ICI dBm) per flow.
fn rotated_ul_sinr(
    cfg: &ScenarioConfig,
    links: &LinkTable,
    serving: &[usize],
    transmitters: &[usize],
    rotations: usize,
    rng: &mut impl rand::Rng,
) -> Vec<(f64, f64)> {
    let n_sectors = links.num_sectors();
    let p = &cfg.power;
    let rx = |tx: usize, s: usize| {
        db_to_linear(p.full_band_ul_power(links.coupling_loss(tx, serving[tx])) + links.wan_gain(tx, s))
    };
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_sectors];
    for &t in transmitters {
        groups[serving[t]].push(t);
    }
    let noise = p.enb_noise_mw();
    let mut sums = vec![(0.0, 0.0); transmitters.len()];
    let mut ici = vec![0.0; n_sectors];
    for _ in 0..rotations {
        let sched: Vec<Option<usize>> = groups.iter().map(|g| g.choose(rng).copied()).collect();
        for (r, slot) in ici.iter_mut().enumerate() {
            *slot = (0..n_sectors)
                .filter(|&s| s != r)
                .filter_map(|s| sched[s].map(|t| rx(t, r)))
                .sum();
        }
        for (i, &t) in transmitters.iter().enumerate() {
            let r = serving[t];
            let sinr = p.sinr_db(rx(t, r), ici[r], noise);
            sums[i].0 += db_to_linear(sinr);
            sums[i].1 += ici[r];
        }
    }
    sums.iter()
        .map(|&(s, i)| (linear_to_db(s / rotations as f64), linear_to_db(i / rotations as f64)))
        .collect()
}

/// Upper-bound study on one world.
pub fn upper_bound_in(cfg: &ScenarioConfig, world: &World, drop: u64) -> UpperBoundResult {
    let reps = replacements(cfg, world);
    let mut out = UpperBoundResult {
        active: reps.len(),
        replaced: reps.iter().filter(|(u, r)| u != r).count(),
        ..Default::default()
    };
    let (dl, ul): (Vec<_>, Vec<_>) = reps
        .iter()
        .partition(|(u, _)| world.ues.roles[*u] == UeRole::ActiveDl);
    for &(u, r) in &dl {
        out.dl_before_db.push(world.dl_sinr_db[u]);
        out.dl_after_db.push(world.dl_sinr_db[r]);
    }
    let before: Vec<usize> = ul.iter().map(|&(u, _)| u).collect();
    let after: Vec<usize> = ul.iter().map(|&(_, r)| r).collect();
    let mut rng = stream_rng(cfg.run.seed, drop, Stream::Rotation);
    let k = cfg.run.upper_bound_rotations;
    for (sinr, ici) in rotated_ul_sinr(cfg, &world.links, &world.serving, &before, k, &mut rng) {
        out.ul_before_db.push(sinr);
        out.ici_before_dbm.push(ici);
    }
    for (sinr, ici) in rotated_ul_sinr(cfg, &world.links, &world.serving, &after, k, &mut rng) {
        out.ul_after_db.push(sinr);
        out.ici_after_dbm.push(ici);
    }
    out
}

pub fn upper_bound_drop(cfg: &ScenarioConfig, drop: u64) -> Result<UpperBoundResult> {
    let world = World::build(cfg, drop)?;
    Ok(upper_bound_in(cfg, &world, drop))
}

/// One heatmap cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnapshotResult {
    /// Per subframe: wrapped distance from the reference point to the
    /// nearest uplink transmitter.
    pub nearest_distance_m: Vec<f64>,
    /// Per subframe: total uplink power received at the reference point.
    pub ref_power_dbm: Vec<f64>,
    /// Uplink-spectrum power of one subframe over the region, noise included.
    pub ul_grid: Vec<GridCell>,
    /// Downlink-spectrum power with every sector transmitting, noise included.
    pub dl_grid: Vec<GridCell>,
}

impl SnapshotResult {
    /// Keeps the first operand's heatmaps.
    pub fn merge(mut self, o: SnapshotResult) -> Self {
        self.nearest_distance_m.extend(o.nearest_distance_m);
        self.ref_power_dbm.extend(o.ref_power_dbm);
        if self.ul_grid.is_empty() {
            self.ul_grid = o.ul_grid;
            self.dl_grid = o.dl_grid;
        }
        self
    }
}

/// Reference point of the snapshot study.
pub fn reference_point(layout: &NetworkLayout) -> Point {
    Point::new(layout.isd / 3.0, 0.0)
}

/// Grid points of pitch `step` inside the deployment region.
pub fn region_grid(layout: &NetworkLayout, step: f64) -> Vec<Point> {
    let (lo, hi) = layout.bounding_box();
    let nx = ((hi.x - lo.x) / step).floor() as usize + 1;
    let ny = ((hi.y - lo.y) / step).floor() as usize + 1;
    let mut pts = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = Point::new(lo.x + i as f64 * step, lo.y + j as f64 * step);
            if layout.contains(p) {
                pts.push(p);
            }
        }
    }
    pts
}

/// Uplink power in dBm at `at` from transmitters `(position, power dBm)`,
/// over UE-to-UE pathloss, plus `noise_mw`.
pub fn ul_power_at(layout: &NetworkLayout, at: Point, tx: &[(Point, f64)], noise_mw: f64) -> f64 {
    let total: f64 = tx
        .iter()
        .map(|&(p, dbm)| db_to_linear(dbm - pathloss_d2d(layout.wrap_distance(p, at))))
        .sum();
    linear_to_db(total + noise_mw)
}

/// Snapshot study on drop `drop`; heatmaps only when `with_grid`.
pub fn snapshot_drop(cfg: &ScenarioConfig, drop: u64, with_grid: bool) -> Result<SnapshotResult> {
    let layout = build_layout(cfg)?;
    let mut rng = stream_rng(cfg.run.seed, drop, Stream::UeDrop);
    let ues = drop_ues(&layout, cfg.deployment.counts(), cfg.deployment.max_ues_per_sector, &mut rng)?;
    let ul: Vec<Point> = (0..ues.len())
        .filter(|&u| ues.roles[u] == UeRole::ActiveUl)
        .map(|u| ues.positions[u])
        .collect();
    let grid = if with_grid { region_grid(&layout, cfg.run.snapshot_grid_m) } else { Vec::new() };
    let points: Vec<Point> = ul.iter().chain(&grid).copied().collect();
    let field = shadow_for(cfg, &layout, &points, drop)?;
    let links = build_link_table(&layout, &cfg.antenna, &points, &field);
    let serving = associate_all(&links);
    let n_ul = ul.len();

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); layout.num_sectors()];
    for u in 0..n_ul {
        groups[serving[u]].push(u);
    }
    let power: Vec<f64> = (0..n_ul)
        .map(|u| cfg.power.full_band_ul_power(links.coupling_loss(u, serving[u])))
        .collect();

    let reference = reference_point(&layout);
    let mut rng = stream_rng(cfg.run.seed, drop, Stream::Snapshot);
    let mut out = SnapshotResult::default();
    let mut first: Vec<(Point, f64)> = Vec::new();
    for k in 0..cfg.run.snapshot_subframes {
        let tx: Vec<(Point, f64)> = groups
            .iter()
            .filter_map(|g| g.choose(&mut rng).map(|&u| (ul[u], power[u])))
            .collect();
        let nearest = tx
            .iter()
            .map(|&(p, _)| layout.wrap_distance(p, reference))
            .fold(f64::INFINITY, f64::min);
        out.nearest_distance_m.push(nearest);
        out.ref_power_dbm.push(ul_power_at(&layout, reference, &tx, 0.0));
        if k == 0 {
            first = tx;
        }
    }

    if with_grid {
        let ue_noise = cfg.power.ue_noise_mw();
        for (i, &g) in grid.iter().enumerate() {
            out.ul_grid.push(GridCell {
                x: g.x,
                y: g.y,
                dbm: ul_power_at(&layout, g, &first, ue_noise),
            });
            let dl: f64 = links
                .gains_of(n_ul + i)
                .iter()
                .map(|&gain| db_to_linear(cfg.power.enb_tx_power_dbm + gain))
                .sum();
            out.dl_grid.push(GridCell {
                x: g.x,
                y: g.y,
                dbm: linear_to_db(dl + ue_noise),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: &str) -> ScenarioConfig {
        let mut c = ScenarioConfig::from_toml_str(&format!("run.mode = \"{mode}\"")).unwrap();
        c.deployment.idle_per_sector = 20;
        c.deployment.active_dl_per_sector = 2;
        c.deployment.active_ul_per_sector = 2;
        c.run.upper_bound_rotations = 10;
        c.run.snapshot_subframes = 20;
        c.run.snapshot_grid_m = 50.0;
        c
    }

    #[test]
    fn replacement_never_worse() {
        let cfg = small("upper-bound");
        let world = World::build(&cfg, 0).unwrap();
        let r = upper_bound_in(&cfg, &world, 0);
        assert_eq!(r.dl_before_db.len() + r.ul_before_db.len(), r.active);
        for (b, a) in r.dl_before_db.iter().zip(&r.dl_after_db) {
            assert!(a >= b);
        }
    }

    #[test]
    fn lonely_ue_keeps_its_sinr() {
        let mut cfg = small("upper-bound");
        cfg.deployment.idle_per_sector = 0;
        cfg.relay.upper_bound_p_acc_max_db = 0.0;
        let world = World::build(&cfg, 0).unwrap();
        let r = upper_bound_in(&cfg, &world, 0);
        assert_eq!(r.replaced, 0);
        assert_eq!(r.dl_before_db, r.dl_after_db);
        assert_eq!(r.median_dl_gain_db(), 0.0);
    }

    #[test]
    fn no_transmitters_leaves_noise_floor() {
        let mut cfg = small("snapshot");
        cfg.deployment.active_ul_per_sector = 0;
        let r = snapshot_drop(&cfg, 0, true).unwrap();
        let floor = cfg.power.ue_noise_dbm();
        assert!(!r.ul_grid.is_empty());
        for c in &r.ul_grid {
            assert!((c.dbm - floor).abs() < 1e-9);
        }
        assert!(r.nearest_distance_m.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn grid_stays_inside_region() {
        let layout = NetworkLayout::build(500.0, 2).unwrap();
        let g = region_grid(&layout, 25.0);
        assert!(g.iter().all(|&p| layout.contains(p)));
        let area = 19.0 * 3.0 * layout.sector_area();
        let expect = area / 625.0;
        assert!((g.len() as f64 - expect).abs() / expect < 0.02, "{} vs {expect}", g.len());
    }
}
