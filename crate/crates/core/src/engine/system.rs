//! The subframe simulation of one drop.

use std::collections::HashMap;

use crate::config::ScenarioConfig;
use crate::deployment::UeRole;
use crate::engine::metrics::{MetricsAccumulator, UeRecord};
use crate::engine::world::World;
use crate::error::{Result, SimError};
use crate::mac::{
    build_conflict_graph, dl_candidate, pf_schedule, ul_candidate, yield_decisions, AccessLink, AccessState,
    Candidate, ConflictGraph, Grant, PfState, WanPath, YieldRule,
};
use crate::power::PowerConfig;
use crate::relaying::{
    assign_relay, prune_relays, CandidateFilter, Direction, NeighborRule, RateEstimate, RelayAssignment,
    RelayBuffer,
};
use crate::rng::{stream_rng, SimRng, Stream};
use crate::units::db_to_linear;

/// One row of the optional schedule trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub drop: u64,
    pub subframe: u64,
    pub sector: usize,
    pub kind: TraceKind,
    /// Granted UE for WAN rows, edge UE for access rows.
    pub ue: usize,
    pub state: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Dl,
    Ul,
    Access,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Dl => "dl",
            TraceKind::Ul => "ul",
            TraceKind::Access => "access",
        }
    }
}

pub const TRACE_HEADER: &str = "drop,subframe,sector,kind,ue,state";

/// Inputs and outcome of the pruning rule for one relayed edge.
///
/// Rates are full-band bits per subframe measured during warm-up. WAN grants
/// are shared by the flows of the edge's sector and direction, so WAN rates
/// enter the comparison divided by that flow count. The access link has the
/// band to itself whenever it is not yielding, half-duplex gated or waiting
/// for a shared radio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneRecord {
    pub edge: usize,
    pub relay: usize,
    pub direction: Direction,
    pub backhaul_rate: f64,
    /// Mean over subframes in which the access link transmitted; zero if it
    /// never did.
    pub access_rate: f64,
    /// Fraction of warm-up subframes the access link was transmitting or
    /// held back only by its buffer.
    pub access_availability: f64,
    pub direct_rate: f64,
    pub sector_flows: usize,
    pub kept: bool,
}

impl PruneRecord {
    pub fn through_estimate(&self) -> f64 {
        let wan = self.backhaul_rate / self.sector_flows as f64;
        wan.min(self.access_rate * self.access_availability)
    }

    pub fn direct_estimate(&self) -> f64 {
        self.direct_rate / self.sector_flows as f64
    }

    pub fn estimate(&self) -> RateEstimate {
        RateEstimate {
            edge: self.edge,
            through_relay: self.through_estimate(),
            direct: self.direct_estimate(),
        }
    }
}

/// Result of one drop.
#[derive(Debug, Clone)]
pub struct DropOutput {
    pub drop: u64,
    pub metrics: MetricsAccumulator,
    /// Relay choices before pruning.
    pub selected: Vec<RelayAssignment>,
    /// Relay choices used in the measurement window.
    pub assignments: Vec<RelayAssignment>,
    pub pruning: Vec<PruneRecord>,
    pub trace: Vec<TraceRow>,
}

/// Relay discovery and selection for every active UE of the world.
pub fn select_relays(cfg: &ScenarioConfig, world: &World) -> Vec<RelayAssignment> {
    let filter = CandidateFilter {
        p_acc_max_db: cfg.relay.p_acc_max_db,
        rule: NeighborRule::SameSector,
        idle_only: cfg.relay.idle_only,
    };
    (0..world.num_ues())
        .filter_map(|u| {
            let direction = match world.ues.roles[u] {
                UeRole::ActiveDl => Direction::Dl,
                UeRole::ActiveUl => Direction::Ul,
                UeRole::Idle => return None,
            };
            Some(if cfg.run.mode.has_relays() {
                assign_relay(
                    u,
                    direction,
                    &world.ues.roles,
                    &world.serving,
                    &world.links,
                    &world.dl_sinr_db,
                    &filter,
                    &cfg.power,
                )
            } else {
                let p = cfg.power.access_tx_power(world.serving_loss(u));
                RelayAssignment::direct(u, direction, world.dl_sinr_db[u], p)
            })
        })
        .collect()
}

/// Full drop: world, relay selection, warm-up, pruning, measurement.
pub fn run_drop(cfg: &ScenarioConfig, drop: u64, trace: bool) -> Result<DropOutput> {
    let world = World::build(cfg, drop)?;
    run_drop_in(cfg, &world, drop, trace)
}

/// As [`run_drop`] on a prebuilt world.
pub fn run_drop_in(cfg: &ScenarioConfig, world: &World, drop: u64, trace: bool) -> Result<DropOutput> {
    let selected = select_relays(cfg, world);
    let mut rng = stream_rng(cfg.run.seed, drop, Stream::Yield);
    let mut subframe = 0u64;

    let (assignments, pruning) = if cfg.run.mode.has_relays() && cfg.run.warmup_subframes > 0 {
        let mut sim = Sim::new(cfg, world, &selected);
        let mut warm = WarmupStats::new(sim.flows.len());
        for _ in 0..cfg.run.warmup_subframes {
            sim.step(subframe, &mut rng, Observer { warm: Some(&mut warm), ..Observer::default() })?;
            subframe += 1;
        }
        let records = sim.prune_records(&warm);
        let estimates: Vec<RateEstimate> = records.iter().map(PruneRecord::estimate).collect();
        let kept = prune_relays(selected.clone(), &estimates, cfg.relay.prune_margin);
        let records = records
            .into_iter()
            .map(|r| PruneRecord {
                kept: kept.iter().any(|a| a.edge == r.edge && a.relay.is_some()),
                ..r
            })
            .collect();
        (kept, records)
    } else {
        (selected.clone(), Vec::new())
    };

    let mut sim = Sim::new(cfg, world, &assignments);
    let mut metrics = MetricsAccumulator::new(scenario_tag(cfg), cfg.run.subframes);
    metrics.drops.push(drop);
    let mut rows = Vec::new();
    for t in 0..cfg.run.subframes {
        let obs = Observer {
            metrics: Some(&mut metrics),
            trace: trace.then_some(&mut rows),
            drop,
            subframe: t,
            warm: None,
        };
        sim.step(subframe, &mut rng, obs)?;
        subframe += 1;
    }
    sim.finish(drop, &mut metrics);
    Ok(DropOutput {
        drop,
        metrics,
        selected,
        assignments,
        pruning,
        trace: rows,
    })
}

/// Label identifying the scenario a set of metrics belongs to.
pub fn scenario_tag(cfg: &ScenarioConfig) -> String {
    format!("{}:{}", cfg.run.mode, cfg.run.seed)
}

#[derive(Default)]
struct Observer<'a> {
    metrics: Option<&'a mut MetricsAccumulator>,
    trace: Option<&'a mut Vec<TraceRow>>,
    warm: Option<&'a mut WarmupStats>,
    drop: u64,
    subframe: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Mean {
    sum: f64,
    n: u64,
}

impl Mean {
    fn add(&mut self, x: f64) {
        self.sum += x;
        self.n += 1;
    }

    fn get(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
}

/// Per-flow rate measurements behind the pruning rule.
struct WarmupStats {
    subframes: u64,
    /// Per flow: subframes its access link was transmitting or buffer gated.
    available: Vec<u64>,
    ul_direct: Vec<Mean>,
    ul_backhaul: Vec<Mean>,
    access: Vec<Mean>,
}

impl WarmupStats {
    fn new(n: usize) -> Self {
        WarmupStats {
            subframes: 0,
            available: vec![0; n],
            ul_direct: vec![Mean::default(); n],
            ul_backhaul: vec![Mean::default(); n],
            access: vec![Mean::default(); n],
        }
    }
}

struct Flow {
    edge: usize,
    direction: Direction,
    sector: usize,
    relay: Option<usize>,
    link: Option<usize>,
    buffer: Option<RelayBuffer>,
    /// Full-band DL bits per subframe of edge and relay.
    edge_dl_rate: f64,
    relay_dl_rate: f64,
    edge_slot: usize,
    relay_slot: Option<usize>,
    direct_bits: u64,
    relayed_bits: u64,
    delivered_bits: u64,
    sinr_sum: f64,
    sinr_count: u64,
}

/// Per-drop simulation state with precomputed linear gains.
struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    power: &'a PowerConfig,
    world: &'a World,
    n_sectors: usize,
    flows: Vec<Flow>,
    dl_flows: Vec<Vec<usize>>,
    ul_flows: Vec<Vec<usize>>,
    pf_dl: Vec<PfState>,
    pf_ul: Vec<PfState>,
    /// mW from each WAN uplink transmitter slot at each sector.
    slot_rx: Vec<f64>,
    /// mW from each WAN uplink transmitter at each access receiver.
    slot_to_link: Vec<f64>,
    links: Vec<AccessLink>,
    link_flow: Vec<usize>,
    /// mW from each access transmitter at each sector.
    link_rx: Vec<f64>,
    /// mW from access transmitter `i` at access receiver `j`, row-major.
    link_to_link: Vec<f64>,
    graph: ConflictGraph,
    yield_rule: YieldRule,
    /// Smoothed uplink interference plus noise per sector (mW).
    ul_in_est: Vec<f64>,
    enb_noise: f64,
    ue_noise: f64,
    // Scratch.
    holds_ul: Vec<bool>,
    radio_busy: Vec<bool>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, world: &'a World, assignments: &[RelayAssignment]) -> Self {
        let power = &cfg.power;
        let n_sectors = world.layout.num_sectors();
        let links_tab = &world.links;
        let rate = |sinr: f64| power.rate_from_sinr(sinr, 1.0);

        let mut slot_of: HashMap<usize, usize> = HashMap::new();
        let mut slot_ue = Vec::new();
        let mut slot = |ue: usize| {
            *slot_of.entry(ue).or_insert_with(|| {
                slot_ue.push(ue);
                slot_ue.len() - 1
            })
        };

        let mut flows = Vec::with_capacity(assignments.len());
        let mut links = Vec::new();
        let mut link_flow = Vec::new();
        let capacity = cfg.buffer_bits();
        for a in assignments {
            let sector = world.serving[a.edge];
            let edge_slot = slot(a.edge);
            let relay_slot = a.relay.map(&mut slot);
            let link = a.relay.map(|r| {
                let (tx, rx) = match a.direction {
                    Direction::Dl => (r, a.edge),
                    Direction::Ul => (a.edge, r),
                };
                links.push(AccessLink {
                    tx,
                    rx,
                    tx_power_dbm: power.access_tx_power(world.serving_loss(tx)),
                });
                link_flow.push(flows.len());
                links.len() - 1
            });
            flows.push(Flow {
                edge: a.edge,
                direction: a.direction,
                sector,
                relay: a.relay,
                link,
                buffer: a.relay.map(|_| RelayBuffer::new(capacity, a.direction, a.edge)),
                edge_dl_rate: rate(world.dl_sinr_db[a.edge]),
                relay_dl_rate: a.relay.map_or(0.0, |r| rate(world.dl_sinr_db[r])),
                edge_slot,
                relay_slot,
                direct_bits: 0,
                relayed_bits: 0,
                delivered_bits: 0,
                sinr_sum: 0.0,
                sinr_count: 0,
            });
        }

        let mut dl_flows = vec![Vec::new(); n_sectors];
        let mut ul_flows = vec![Vec::new(); n_sectors];
        for (i, f) in flows.iter().enumerate() {
            match f.direction {
                Direction::Dl => dl_flows[f.sector].push(i),
                Direction::Ul => ul_flows[f.sector].push(i),
            }
        }
        let t_c = cfg.mac.pf_time_constant;
        let pf_dl = dl_flows.iter().map(|v| PfState::new(v.len(), t_c)).collect();
        let pf_ul = ul_flows.iter().map(|v| PfState::new(v.len(), t_c)).collect();

        let slot_power_dbm: Vec<f64> = slot_ue
            .iter()
            .map(|&u| power.full_band_ul_power(world.serving_loss(u)))
            .collect();
        let mut slot_rx = Vec::with_capacity(slot_ue.len() * n_sectors);
        for (i, &u) in slot_ue.iter().enumerate() {
            for s in 0..n_sectors {
                slot_rx.push(db_to_linear(slot_power_dbm[i] + links_tab.wan_gain(u, s)));
            }
        }
        let n_links = links.len();
        let mut slot_to_link = Vec::with_capacity(slot_ue.len() * n_links);
        for (i, &u) in slot_ue.iter().enumerate() {
            for l in &links {
                slot_to_link.push(db_to_linear(slot_power_dbm[i] - links_tab.d2d_pathloss(u, l.rx)));
            }
        }
        let mut link_rx = Vec::with_capacity(n_links * n_sectors);
        for l in &links {
            for s in 0..n_sectors {
                link_rx.push(db_to_linear(l.tx_power_dbm + links_tab.wan_gain(l.tx, s)));
            }
        }
        let mut link_to_link = Vec::with_capacity(n_links * n_links);
        for a in &links {
            for b in &links {
                link_to_link.push(db_to_linear(a.tx_power_dbm - links_tab.d2d_pathloss(a.tx, b.rx)));
            }
        }
        let graph = build_conflict_graph(&links, links_tab, cfg.gamma_acc_db());
        let enb_noise = power.enb_noise_mw();

        Sim {
            cfg,
            power,
            world,
            n_sectors,
            flows,
            dl_flows,
            ul_flows,
            pf_dl,
            pf_ul,
            slot_rx,
            slot_to_link,
            links,
            link_flow,
            link_rx,
            link_to_link,
            graph,
            yield_rule: cfg.mac.yield_rule,
            ul_in_est: vec![enb_noise; n_sectors],
            enb_noise,
            ue_noise: power.ue_noise_mw(),
            holds_ul: vec![false; world.num_ues()],
            radio_busy: vec![false; world.num_ues()],
        }
    }

    #[inline]
    fn slot_rx(&self, slot: usize, sector: usize) -> f64 {
        self.slot_rx[slot * self.n_sectors + sector]
    }

    fn ul_candidate_rate(&self, slot: usize, sector: usize) -> f64 {
        let sinr = self.power.sinr_db(self.slot_rx(slot, sector), self.ul_in_est[sector], 0.0);
        self.power.rate_from_sinr(sinr, 1.0)
    }

    fn step(&mut self, t: u64, rng: &mut SimRng, mut obs: Observer<'_>) -> Result<()> {
        let n_sectors = self.n_sectors;
        let n_links = self.links.len();

        // 1. WAN grants.
        let mut dl_grants: Vec<Option<Grant>> = vec![None; n_sectors];
        let mut ul_grants: Vec<Option<Grant>> = vec![None; n_sectors];
        let mut cands: Vec<Candidate> = Vec::new();
        for s in 0..n_sectors {
            cands.clear();
            for &fi in &self.dl_flows[s] {
                let f = &self.flows[fi];
                let room = f.buffer.as_ref().map_or(0, RelayBuffer::room);
                cands.push(dl_candidate(f.edge, f.edge_dl_rate, f.relay.map(|r| (r, f.relay_dl_rate)), room));
            }
            dl_grants[s] = pf_schedule(&cands, &mut self.pf_dl[s]);

            cands.clear();
            for &fi in &self.ul_flows[s] {
                let f = &self.flows[fi];
                let queued = f.buffer.as_ref().map_or(0, RelayBuffer::level);
                let edge_rate = self.ul_candidate_rate(f.edge_slot, s);
                let relay = f.relay.zip(f.relay_slot).map(|(r, rs)| (r, self.ul_candidate_rate(rs, s)));
                cands.push(ul_candidate(f.edge, edge_rate, relay, queued));
            }
            ul_grants[s] = pf_schedule(&cands, &mut self.pf_ul[s]);
        }

        // Uplink transmitter slot per sector.
        let ul_tx: Vec<Option<usize>> = (0..n_sectors)
            .map(|s| {
                ul_grants[s].map(|g| {
                    let f = &self.flows[self.ul_flows[s][g.flow]];
                    match g.candidate.path {
                        WanPath::Direct => f.edge_slot,
                        WanPath::Backhaul => f.relay_slot.expect("backhaul grant without relay"),
                    }
                })
            })
            .collect();
        for s in 0..n_sectors {
            if let Some(g) = ul_grants[s] {
                self.holds_ul[g.candidate.ue] = true;
            }
        }

        // 2. Half-duplex, buffer and single-radio gates.
        let mut states = vec![AccessState::GatedBuffer; n_links];
        let mut eligible = vec![false; n_links];
        if n_links > 0 {
            let start = (t % n_links as u64) as usize;
            for k in 0..n_links {
                let i = (start + k) % n_links;
                let l = self.links[i];
                let f = &self.flows[self.link_flow[i]];
                let buf = f.buffer.as_ref().expect("access link without buffer");
                let buffer_ok = match f.direction {
                    Direction::Dl => buf.drainer_eligible(),
                    Direction::Ul => buf.feeder_eligible(),
                };
                states[i] = if self.holds_ul[l.tx] || self.holds_ul[l.rx] {
                    AccessState::GatedHalfDuplex
                } else if !buffer_ok {
                    AccessState::GatedBuffer
                } else if self.radio_busy[l.tx] || self.radio_busy[l.rx] {
                    AccessState::GatedRadio
                } else {
                    self.radio_busy[l.tx] = true;
                    self.radio_busy[l.rx] = true;
                    eligible[i] = true;
                    AccessState::Transmitting
                };
            }
            for l in &self.links {
                self.radio_busy[l.tx] = false;
                self.radio_busy[l.rx] = false;
            }
        }

        // 3. Conflicts and yielding among eligible links.
        let transmit = if self.graph.num_edges() > 0 || self.yield_rule == YieldRule::PriorityOrder {
            yield_decisions(&self.graph, &eligible, self.yield_rule, rng)
        } else {
            eligible.clone()
        };
        let mut active: Vec<usize> = Vec::new();
        for i in 0..n_links {
            if eligible[i] && !transmit[i] {
                states[i] = AccessState::Yielded;
            }
            if transmit[i] {
                let l = self.links[i];
                if self.holds_ul[l.tx] || self.holds_ul[l.rx] {
                    let ue = if self.holds_ul[l.tx] { l.tx } else { l.rx };
                    return Err(SimError::HalfDuplexViolation { subframe: t, ue });
                }
                active.push(i);
            }
        }
        for s in 0..n_sectors {
            if let Some(g) = ul_grants[s] {
                self.holds_ul[g.candidate.ue] = false;
            }
        }

        // 4. SINR and bits.
        let mut ul_bits = vec![0u64; n_sectors];
        let mut ul_sinr = vec![f64::NAN; n_sectors];
        for s in 0..n_sectors {
            let Some(slot) = ul_tx[s] else { continue };
            let signal = self.slot_rx(slot, s);
            let ici: f64 = (0..n_sectors)
                .filter(|&o| o != s)
                .filter_map(|o| ul_tx[o])
                .map(|os| self.slot_rx(os, s))
                .sum();
            let access: f64 = active.iter().map(|&l| self.link_rx[l * n_sectors + s]).sum();
            let sinr = self.power.sinr_db(signal, ici + access, self.enb_noise);
            ul_sinr[s] = sinr;
            ul_bits[s] = self.power.rate_from_sinr(sinr, 1.0).floor() as u64;
            let measured = ici + access + self.enb_noise;
            let w = 1.0 / self.cfg.mac.pf_time_constant;
            self.ul_in_est[s] = (1.0 - w) * self.ul_in_est[s] + w * measured;
            if let Some(warm) = obs.warm.as_deref_mut() {
                for &fi in &self.ul_flows[s] {
                    let f = &self.flows[fi];
                    let Some(rs) = f.relay_slot else { continue };
                    let rate = |slot| {
                        let sinr = self.power.sinr_db(self.slot_rx(slot, s), measured, 0.0);
                        self.power.rate_from_sinr(sinr, 1.0)
                    };
                    warm.ul_direct[fi].add(rate(f.edge_slot));
                    warm.ul_backhaul[fi].add(rate(rs));
                }
            }
            if let Some(m) = obs.metrics.as_deref_mut() {
                m.note_sinr(sinr);
                m.enb_signal_mw.push(signal);
                m.enb_ici_mw.push(ici);
                m.enb_access_mw.push(access);
            }
        }
        let mut access_bits = vec![0u64; n_links];
        let mut access_sinr = vec![f64::NAN; n_links];
        for &j in &active {
            let l = self.links[j];
            let from_ul: f64 = ul_tx
                .iter()
                .flatten()
                .map(|&slot| self.slot_to_link[slot * n_links + j])
                .sum();
            let from_access: f64 = active
                .iter()
                .filter(|&&i| i != j)
                .map(|&i| self.link_to_link[i * n_links + j])
                .sum();
            let signal = self.link_to_link[j * n_links + j];
            let sinr = self.power.sinr_db(signal, from_ul + from_access, self.ue_noise);
            access_sinr[j] = sinr;
            access_bits[j] = self.power.rate_from_sinr(sinr, 1.0).floor() as u64;
            if let Some(warm) = obs.warm.as_deref_mut() {
                warm.access[self.link_flow[j]].add(self.power.rate_from_sinr(sinr, 1.0));
            }
            if let Some(m) = obs.metrics.as_deref_mut() {
                m.note_sinr(sinr);
                m.max_access_power_dbm = m.max_access_power_dbm.max(l.tx_power_dbm);
                match self.flows[self.link_flow[j]].direction {
                    Direction::Dl => m.access_sinr_dl_db.push(sinr),
                    Direction::Ul => m.access_sinr_ul_db.push(sinr),
                }
            }
        }

        // 5. Delivery and buffers.
        let mut wan_served = vec![0u64; self.flows.len()];
        let mut granted = vec![false; self.flows.len()];
        let mut backhaul = vec![false; self.flows.len()];
        for s in 0..n_sectors {
            if let Some(g) = dl_grants[s] {
                let fi = self.dl_flows[s][g.flow];
                let sinr = self.world.dl_sinr_db[g.candidate.ue];
                let bits = self.power.rate_from_sinr(sinr, 1.0).floor() as u64;
                granted[fi] = true;
                let f = &mut self.flows[fi];
                f.sinr_sum += db_to_linear(sinr);
                f.sinr_count += 1;
                if let Some(m) = obs.metrics.as_deref_mut() {
                    m.note_sinr(sinr);
                }
                match g.candidate.path {
                    WanPath::Direct => {
                        f.direct_bits += bits;
                        f.delivered_bits += bits;
                        wan_served[fi] = bits;
                    }
                    WanPath::Backhaul => {
                        wan_served[fi] = bits;
                        backhaul[fi] = true;
                    }
                }
            }
            if let Some(g) = ul_grants[s] {
                let fi = self.ul_flows[s][g.flow];
                granted[fi] = true;
                let f = &mut self.flows[fi];
                f.sinr_sum += db_to_linear(ul_sinr[s]);
                f.sinr_count += 1;
                match g.candidate.path {
                    WanPath::Direct => {
                        f.direct_bits += ul_bits[s];
                        f.delivered_bits += ul_bits[s];
                        wan_served[fi] = ul_bits[s];
                    }
                    WanPath::Backhaul => {
                        wan_served[fi] = ul_bits[s];
                        backhaul[fi] = true;
                    }
                }
            }
        }
        let mut violations = 0u64;
        for (fi, f) in self.flows.iter_mut().enumerate() {
            let (Some(buf), Some(link)) = (f.buffer.as_mut(), f.link) else { continue };
            let access = if transmit[link] { access_bits[link] } else { 0 };
            let wan = if backhaul[fi] { wan_served[fi] } else { 0 };
            let step = match f.direction {
                Direction::Dl => buf.step(wan, access),
                Direction::Ul => buf.step(access, wan),
            };
            if backhaul[fi] {
                wan_served[fi] = match f.direction {
                    Direction::Dl => step.admitted,
                    Direction::Ul => step.drained,
                };
            }
            f.relayed_bits += step.drained;
            f.delivered_bits += step.drained;
            if !buf.is_conserved() {
                violations += 1;
            }
        }

        // 6. PF and warm-up bookkeeping.
        if let Some(warm) = obs.warm.as_deref_mut() {
            warm.subframes += 1;
            for (i, st) in states.iter().enumerate() {
                if matches!(st, AccessState::Transmitting | AccessState::GatedBuffer) {
                    warm.available[self.link_flow[i]] += 1;
                }
            }
        }
        for s in 0..n_sectors {
            let served: Vec<f64> = self.dl_flows[s].iter().map(|&fi| wan_served[fi] as f64).collect();
            self.pf_dl[s].update(&served);
            let served: Vec<f64> = self.ul_flows[s].iter().map(|&fi| wan_served[fi] as f64).collect();
            self.pf_ul[s].update(&served);
        }

        // 7. Metrics and trace.
        if let Some(m) = obs.metrics.as_deref_mut() {
            m.buffer_violations += violations;
            m.active_links += active.len() as u64;
            m.sector_subframes += n_sectors as u64;
        }
        if let Some(rows) = obs.trace.as_deref_mut() {
            for s in 0..n_sectors {
                for (kind, g) in [(TraceKind::Dl, dl_grants[s]), (TraceKind::Ul, ul_grants[s])] {
                    if let Some(g) = g {
                        rows.push(TraceRow {
                            drop: obs.drop,
                            subframe: obs.subframe,
                            sector: s,
                            kind,
                            ue: g.candidate.ue,
                            state: g.candidate.path.as_str(),
                        });
                    }
                }
            }
            for (i, st) in states.iter().enumerate() {
                if matches!(st, AccessState::Transmitting | AccessState::Yielded) {
                    let f = &self.flows[self.link_flow[i]];
                    rows.push(TraceRow {
                        drop: obs.drop,
                        subframe: obs.subframe,
                        sector: f.sector,
                        kind: TraceKind::Access,
                        ue: f.edge,
                        state: st.as_str(),
                    });
                }
            }
        }
        Ok(())
    }

    fn prune_records(&self, warm: &WarmupStats) -> Vec<PruneRecord> {
        self.flows
            .iter()
            .enumerate()
            .filter_map(|(fi, f)| {
                let relay = f.relay?;
                let (backhaul_rate, direct_rate, sector_flows) = match f.direction {
                    Direction::Dl => (f.relay_dl_rate, f.edge_dl_rate, self.dl_flows[f.sector].len()),
                    Direction::Ul => (
                        warm.ul_backhaul[fi].get(),
                        warm.ul_direct[fi].get(),
                        self.ul_flows[f.sector].len(),
                    ),
                };
                Some(PruneRecord {
                    edge: f.edge,
                    relay,
                    direction: f.direction,
                    backhaul_rate,
                    access_rate: warm.access[fi].get(),
                    access_availability: warm.available[fi] as f64 / warm.subframes.max(1) as f64,
                    direct_rate,
                    sector_flows,
                    kept: true,
                })
            })
            .collect()
    }

    fn finish(&self, drop: u64, m: &mut MetricsAccumulator) {
        for f in &self.flows {
            if f.delivered_bits != f.direct_bits + f.relayed_bits {
                m.bit_mismatches += 1;
            }
            m.ues.push(UeRecord {
                drop,
                ue: f.edge,
                direction: f.direction,
                sector: f.sector,
                relay: f.relay,
                direct_bits: f.direct_bits,
                relayed_bits: f.relayed_bits,
                sinr_sum: f.sinr_sum,
                sinr_count: f.sinr_count,
            });
        }
        let mean = if m.sector_subframes == 0 {
            0.0
        } else {
            m.active_links as f64 / m.sector_subframes as f64
        };
        m.drop_active_links.push((drop, mean));
    }
}
