//! Relay discovery and selection, the 5% pruning rule, relay buffers and the
//! half-duplex gate.

use std::collections::HashMap;
use std::io::{self, Write};

use crate::channel::LinkTable;
use crate::deployment::UeRole;
use crate::power::PowerConfig;
use crate::report::fmt_num;

/// Traffic direction of an edge UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Dl,
    Ul,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Dl => "dl",
            Direction::Ul => "ul",
        }
    }
}

/// Which neighbours count as relay candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborRule {
    /// Same serving sector and D2D pathloss strictly below the limit.
    SameSector,
    /// Any UE with D2D pathloss at or below the limit.
    AnySector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateFilter {
    pub p_acc_max_db: f64,
    pub rule: NeighborRule,
    pub idle_only: bool,
}

/// Relay candidates of `edge`, in ascending UE order. The edge itself is not
/// listed; [`select_relay`] compares against it separately.
pub fn find_candidates(
    edge: usize,
    roles: &[UeRole],
    serving: &[usize],
    links: &LinkTable,
    filter: &CandidateFilter,
) -> Vec<usize> {
    (0..links.num_points())
        .filter(|&v| v != edge)
        .filter(|&v| !filter.idle_only || roles[v] == UeRole::Idle)
        .filter(|&v| filter.rule == NeighborRule::AnySector || serving[v] == serving[edge])
        .filter(|&v| {
            let pl = links.d2d_pathloss(edge, v);
            match filter.rule {
                NeighborRule::SameSector => pl < filter.p_acc_max_db,
                NeighborRule::AnySector => pl <= filter.p_acc_max_db,
            }
        })
        .collect()
}

/// Candidate with the highest DL SINR, if it beats the edge's own. Ties go to
/// the lowest UE id.
pub fn select_relay(edge: usize, candidates: &[usize], dl_sinr_db: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &c in candidates {
        match best {
            Some(b) if dl_sinr_db[c] < dl_sinr_db[b] || (dl_sinr_db[c] == dl_sinr_db[b] && c > b) => {}
            _ => best = Some(c),
        }
    }
    best.filter(|&b| dl_sinr_db[b] > dl_sinr_db[edge])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayAssignment {
    pub edge: usize,
    pub relay: Option<usize>,
    pub direction: Direction,
    /// D2D pathloss between edge and relay (NaN without a relay).
    pub access_pl_db: f64,
    pub access_tx_power_edge_dbm: f64,
    /// NaN without a relay.
    pub access_tx_power_relay_dbm: f64,
    pub edge_dl_sinr_db: f64,
    /// NaN without a relay.
    pub relay_dl_sinr_db: f64,
}

impl RelayAssignment {
    pub fn direct(edge: usize, direction: Direction, edge_dl_sinr_db: f64, edge_access_power: f64) -> Self {
        RelayAssignment {
            edge,
            relay: None,
            direction,
            access_pl_db: f64::NAN,
            access_tx_power_edge_dbm: edge_access_power,
            access_tx_power_relay_dbm: f64::NAN,
            edge_dl_sinr_db,
            relay_dl_sinr_db: f64::NAN,
        }
    }

    pub fn drop_relay(&mut self) {
        self.relay = None;
        self.access_pl_db = f64::NAN;
        self.access_tx_power_relay_dbm = f64::NAN;
        self.relay_dl_sinr_db = f64::NAN;
    }
}

/// Discovery plus selection for one edge UE.
#[allow(clippy::too_many_arguments)]
pub fn assign_relay(
    edge: usize,
    direction: Direction,
    roles: &[UeRole],
    serving: &[usize],
    links: &LinkTable,
    dl_sinr_db: &[f64],
    filter: &CandidateFilter,
    power: &PowerConfig,
) -> RelayAssignment {
    let access_power = |u: usize| power.access_tx_power(links.coupling_loss(u, serving[u]));
    let candidates = find_candidates(edge, roles, serving, links, filter);
    let mut a = RelayAssignment::direct(edge, direction, dl_sinr_db[edge], access_power(edge));
    if let Some(r) = select_relay(edge, &candidates, dl_sinr_db) {
        a.relay = Some(r);
        a.access_pl_db = links.d2d_pathloss(edge, r);
        a.access_tx_power_relay_dbm = access_power(r);
        a.relay_dl_sinr_db = dl_sinr_db[r];
    }
    a
}

/// Warm-up measurement behind the pruning decision for one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub edge: usize,
    /// Per-flow bits per subframe expected through the relay.
    pub through_relay: f64,
    /// Per-flow bits per subframe expected on the direct link.
    pub direct: f64,
}

/// Drops relays whose through-relay estimate is below `(1 + margin)` times
/// the direct estimate. Edges without an estimate keep their relay.
pub fn prune_relays(
    mut assignments: Vec<RelayAssignment>,
    estimates: &[RateEstimate],
    margin: f64,
) -> Vec<RelayAssignment> {
    let by_edge: HashMap<usize, &RateEstimate> = estimates.iter().map(|e| (e.edge, e)).collect();
    for a in &mut assignments {
        if a.relay.is_none() {
            continue;
        }
        if let Some(e) = by_edge.get(&a.edge) {
            if e.through_relay < (1.0 + margin) * e.direct {
                a.drop_relay();
            }
        }
    }
    assignments
}

/// Per-edge relay buffer. Within a subframe the drain only sees bits present
/// at the start, and the fill is admitted only into space free at the start,
/// so the level never leaves `[0, capacity]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayBuffer {
    pub capacity: u64,
    pub direction: Direction,
    pub owner_edge: usize,
    level: u64,
    total_in: u64,
    total_out: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferStep {
    pub admitted: u64,
    pub drained: u64,
}

impl RelayBuffer {
    pub fn new(capacity: u64, direction: Direction, owner_edge: usize) -> Self {
        RelayBuffer {
            capacity,
            direction,
            owner_edge,
            level: 0,
            total_in: 0,
            total_out: 0,
        }
    }

    pub fn with_level(mut self, level: u64) -> Self {
        assert!(level <= self.capacity);
        self.level = level;
        self.total_in = level;
        self
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    /// Bits the buffer can still admit.
    pub fn room(&self) -> u64 {
        self.capacity - self.level
    }

    pub fn is_full(&self) -> bool {
        self.level >= self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.level == 0
    }

    /// Offers `bits_in` from the feeding link and asks for `bits_out` on the
    /// draining link.
    pub fn step(&mut self, bits_in: u64, bits_out: u64) -> BufferStep {
        let drained = bits_out.min(self.level);
        let admitted = bits_in.min(self.capacity - self.level);
        self.level = self.level - drained + admitted;
        self.total_in += admitted;
        self.total_out += drained;
        BufferStep { admitted, drained }
    }

    /// The feeding link may run next subframe.
    pub fn feeder_eligible(&self) -> bool {
        !self.is_full()
    }

    /// The draining link may run next subframe.
    pub fn drainer_eligible(&self) -> bool {
        !self.is_empty()
    }

    pub fn total_in(&self) -> u64 {
        self.total_in
    }

    pub fn total_out(&self) -> u64 {
        self.total_out
    }

    pub fn is_conserved(&self) -> bool {
        self.total_in == self.total_out + self.level && self.level <= self.capacity
    }
}

/// Whether an access link may be active given the subframe's uplink grants:
/// neither endpoint may hold one.
pub fn half_duplex_gate(edge: usize, relay: usize, holds_ul_grant: &[bool]) -> bool {
    !(holds_ul_grant[edge] || holds_ul_grant[relay])
}

/// CSV dump of assignments.
pub fn write_assignments_csv<W: Write>(mut w: W, drop: usize, assignments: &[RelayAssignment]) -> io::Result<()> {
    for a in assignments {
        writeln!(
            w,
            "{drop},{},{},{},{},{},{}",
            a.edge,
            a.direction.as_str(),
            a.relay.map_or(-1, |r| r as i64),
            fmt_num(a.access_pl_db),
            fmt_num(a.edge_dl_sinr_db),
            fmt_num(a.relay_dl_sinr_db)
        )?;
    }
    Ok(())
}

pub const ASSIGNMENTS_HEADER: &str = "drop,edge,direction,relay,access_pl_db,edge_dl_sinr_db,relay_dl_sinr_db";
