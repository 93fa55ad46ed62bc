//! WAN scheduling and access-link medium access.
//!
//! Each sector grants the whole band to one downlink and one uplink
//! transmission per subframe using proportional fairness. Access links that
//! survive the half-duplex and buffer gates then resolve pairwise conflicts
//! by random yielding.

use rand::Rng;

use crate::channel::LinkTable;

/// Proportional-fair averages for a fixed list of flows.
///
/// Flows are indexed in the caller's order, which must be ascending UE id so
/// that ties resolve to the lowest id.
#[derive(Debug, Clone, PartialEq)]
pub struct PfState {
    t_c: f64,
    avg: Vec<f64>,
}

/// Floor on the average so the PF metric stays finite.
const MIN_AVG: f64 = 1e-9;

impl PfState {
    pub fn new(n_flows: usize, t_c: f64) -> Self {
        assert!(t_c >= 1.0, "PF time constant below one subframe");
        PfState {
            t_c,
            avg: vec![f64::NAN; n_flows],
        }
    }

    pub fn len(&self) -> usize {
        self.avg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.avg.is_empty()
    }

    pub fn time_constant(&self) -> f64 {
        self.t_c
    }

    /// Average throughput of `flow`, `None` before its first candidate rate.
    pub fn average(&self, flow: usize) -> Option<f64> {
        let a = self.avg[flow];
        (!a.is_nan()).then_some(a)
    }

    /// Picks the flow maximising `rate / average`; averages not yet set are
    /// initialised to the flow's candidate rate first.
    pub fn schedule(&mut self, rates: &[f64]) -> Option<usize> {
        assert_eq!(rates.len(), self.avg.len());
        let mut best: Option<(usize, f64)> = None;
        for (i, &r) in rates.iter().enumerate() {
            if self.avg[i].is_nan() {
                self.avg[i] = r.max(MIN_AVG);
            }
            let metric = r / self.avg[i];
            if best.is_none_or(|(_, m)| metric > m) {
                best = Some((i, metric));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Exponential update of every flow with the bits it was served.
    pub fn update(&mut self, served: &[f64]) {
        assert_eq!(served.len(), self.avg.len());
        let w = 1.0 / self.t_c;
        for (a, &s) in self.avg.iter_mut().zip(served) {
            if a.is_nan() {
                continue;
            }
            *a = ((1.0 - w) * *a + w * s).max(MIN_AVG);
        }
    }
}

/// The WAN hop a flow would use if granted this subframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WanPath {
    /// eNB <-> edge UE.
    Direct,
    /// eNB <-> relay UE.
    Backhaul,
}

impl WanPath {
    pub fn as_str(self) -> &'static str {
        match self {
            WanPath::Direct => "direct",
            WanPath::Backhaul => "backhaul",
        }
    }
}

/// A flow's candidate transmission for the current subframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub path: WanPath,
    /// UE on the WAN end of the candidate (receiver for DL, transmitter for UL).
    pub ue: usize,
    /// Full-band bits if granted.
    pub rate: f64,
}

/// Downlink candidate: the backhaul to the relay while its buffer has
/// `room` bits free, else the direct link. The backhaul rate is capped at
/// `room`, the most a grant can deliver.
pub fn dl_candidate(edge: usize, edge_rate: f64, relay: Option<(usize, f64)>, room: u64) -> Candidate {
    match relay {
        Some((r, rate)) if room > 0 => Candidate { path: WanPath::Backhaul, ue: r, rate: rate.min(room as f64) },
        _ => Candidate { path: WanPath::Direct, ue: edge, rate: edge_rate },
    }
}

/// Uplink candidate: the relay draining its `queued` bits, else the edge
/// directly. The backhaul rate is capped at `queued`.
pub fn ul_candidate(edge: usize, edge_rate: f64, relay: Option<(usize, f64)>, queued: u64) -> Candidate {
    match relay {
        Some((r, rate)) if queued > 0 => Candidate { path: WanPath::Backhaul, ue: r, rate: rate.min(queued as f64) },
        _ => Candidate { path: WanPath::Direct, ue: edge, rate: edge_rate },
    }
}

/// A sector's grant: index of the flow in the sector's flow list plus the
/// hop it uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grant {
    pub flow: usize,
    pub candidate: Candidate,
}

/// PF grant over candidates already resolved against the buffers.
pub fn pf_schedule(candidates: &[Candidate], pf: &mut PfState) -> Option<Grant> {
    let rates: Vec<f64> = candidates.iter().map(|c| c.rate).collect();
    pf.schedule(&rates).map(|flow| Grant {
        flow,
        candidate: candidates[flow],
    })
}

/// State of one access link in one subframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessState {
    Transmitting,
    Yielded,
    GatedHalfDuplex,
    GatedBuffer,
    /// Another link sharing the same UE radio has the turn.
    GatedRadio,
}

impl AccessState {
    pub fn as_str(self) -> &'static str {
        match self {
            AccessState::Transmitting => "transmitting",
            AccessState::Yielded => "yielded",
            AccessState::GatedHalfDuplex => "gated-halfduplex",
            AccessState::GatedBuffer => "gated-buffer",
            AccessState::GatedRadio => "gated-radio",
        }
    }
}

/// Grants and access-link states of one subframe.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubframeSchedule {
    pub dl: Vec<Option<Grant>>,
    pub ul: Vec<Option<Grant>>,
    pub access: Vec<AccessState>,
}

/// Static description of an access link for conflict evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessLink {
    pub tx: usize,
    pub rx: usize,
    pub tx_power_dbm: f64,
}

/// Pairwise conflicts among access links, as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConflictGraph {
    adj: Vec<Vec<usize>>,
}

impl ConflictGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            assert_ne!(a, b);
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        ConflictGraph { adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, link: usize) -> &[usize] {
        &self.adj[link]
    }

    pub fn degree(&self, link: usize) -> usize {
        self.adj[link].len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn conflicts(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }
}

/// SIR in dB at `victim`'s receiver with `aggressor` as the only interferer.
pub fn pairwise_sir_db(victim: &AccessLink, aggressor: &AccessLink, table: &LinkTable) -> f64 {
    let signal = victim.tx_power_dbm - table.d2d_pathloss(victim.tx, victim.rx);
    let interference = aggressor.tx_power_dbm - table.d2d_pathloss(aggressor.tx, victim.rx);
    signal - interference
}

/// Links conflict when either sees the other's transmitter above the SIR
/// threshold. A threshold of `-inf` disables conflicts.
pub fn build_conflict_graph(links: &[AccessLink], table: &LinkTable, gamma_acc_db: f64) -> ConflictGraph {
    let mut edges = Vec::new();
    if gamma_acc_db > f64::NEG_INFINITY {
        for a in 0..links.len() {
            for b in a + 1..links.len() {
                if pairwise_sir_db(&links[a], &links[b], table) < gamma_acc_db
                    || pairwise_sir_db(&links[b], &links[a], table) < gamma_acc_db
                {
                    edges.push((a, b));
                }
            }
        }
    }
    ConflictGraph::from_edges(links.len(), &edges)
}

/// How a conflicting pair decides who yields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YieldRule {
    /// A fair coin per conflicting pair per subframe.
    IndependentPairs,
    /// One random priority order per subframe; a link transmits when it
    /// outranks every eligible neighbour.
    PriorityOrder,
}

impl YieldRule {
    pub fn as_str(self) -> &'static str {
        match self {
            YieldRule::IndependentPairs => "independent-pairs",
            YieldRule::PriorityOrder => "priority-order",
        }
    }
}

/// Transmit decision per link. Ineligible links never transmit and never
/// suppress a neighbour.
pub fn yield_decisions<R: Rng + ?Sized>(
    graph: &ConflictGraph,
    eligible: &[bool],
    rule: YieldRule,
    rng: &mut R,
) -> Vec<bool> {
    assert_eq!(graph.len(), eligible.len());
    let mut transmit = eligible.to_vec();
    match rule {
        YieldRule::IndependentPairs => {
            for a in 0..graph.len() {
                if !eligible[a] {
                    continue;
                }
                for &b in graph.neighbors(a) {
                    if b <= a || !eligible[b] {
                        continue;
                    }
                    if rng.random::<bool>() {
                        transmit[a] = false;
                    } else {
                        transmit[b] = false;
                    }
                }
            }
        }
        YieldRule::PriorityOrder => {
            let prio: Vec<u64> = eligible.iter().map(|_| rng.random()).collect();
            for a in 0..graph.len() {
                if !eligible[a] {
                    continue;
                }
                let outranked = graph
                    .neighbors(a)
                    .iter()
                    .any(|&b| eligible[b] && (prio[b], b) > (prio[a], a));
                if outranked {
                    transmit[a] = false;
                }
            }
        }
    }
    transmit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deployment::{Point, WrapMetric};
    use crate::rng::{stream_rng, Stream};
    use proptest::prelude::*;

    fn table(points: &[(f64, f64)]) -> LinkTable {
        let pts: Vec<Point> = points.iter().map(|&(x, y)| Point::new(x, y)).collect();
        LinkTable::from_gains(vec![-100.0; pts.len()], 1, pts, WrapMetric::euclidean())
    }

    fn grant_shares(rates: &[f64], n: usize) -> Vec<f64> {
        let mut pf = PfState::new(rates.len(), 100.0);
        let mut count = vec![0usize; rates.len()];
        for _ in 0..n {
            let g = pf.schedule(rates).unwrap();
            count[g] += 1;
            let mut served = vec![0.0; rates.len()];
            served[g] = rates[g];
            pf.update(&served);
        }
        count.iter().map(|&c| c as f64 / n as f64).collect()
    }

    #[test]
    fn single_flow_always_granted() {
        assert_eq!(grant_shares(&[5000.0], 1000), vec![1.0]);
    }

    #[test]
    fn symmetric_flows_share_equally() {
        for n in [2, 3, 5] {
            for s in grant_shares(&vec![40_000.0; n], 10_000) {
                assert!((s - 1.0 / n as f64).abs() < 0.02, "{n} flows: {s}");
            }
        }
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let mut pf = PfState::new(3, 100.0);
        assert_eq!(pf.schedule(&[10.0, 10.0, 10.0]), Some(0));
        assert_eq!(PfState::new(0, 100.0).schedule(&[]), None);
    }

    #[test]
    fn average_initialised_then_decays() {
        let mut pf = PfState::new(2, 100.0);
        assert_eq!(pf.average(0), None);
        pf.schedule(&[200.0, 100.0]);
        assert_eq!(pf.average(0), Some(200.0));
        pf.update(&[0.0, 100.0]);
        assert!((pf.average(0).unwrap() - 198.0).abs() < 1e-12);
        assert!((pf.average(1).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn candidates_follow_buffers() {
        let c = dl_candidate(3, 100.0, Some((7, 900.0)), 5000);
        assert_eq!((c.path, c.ue, c.rate), (WanPath::Backhaul, 7, 900.0));
        let c = dl_candidate(3, 100.0, Some((7, 900.0)), 40);
        assert_eq!((c.path, c.ue, c.rate), (WanPath::Backhaul, 7, 40.0));
        let c = dl_candidate(3, 100.0, Some((7, 900.0)), 0);
        assert_eq!((c.path, c.ue, c.rate), (WanPath::Direct, 3, 100.0));
        let c = ul_candidate(3, 100.0, Some((7, 900.0)), 0);
        assert_eq!((c.path, c.ue), (WanPath::Direct, 3));
        let c = ul_candidate(3, 100.0, Some((7, 900.0)), 300);
        assert_eq!((c.path, c.ue, c.rate), (WanPath::Backhaul, 7, 300.0));
        assert_eq!(ul_candidate(3, 100.0, None, 300).path, WanPath::Direct);
    }

    #[test]
    fn colocated_links_conflict() {
        let t = table(&[(0.0, 0.0), (10.0, 0.0), (0.0, 0.0), (10.0, 0.0)]);
        let links = [
            AccessLink { tx: 0, rx: 1, tx_power_dbm: 0.0 },
            AccessLink { tx: 2, rx: 3, tx_power_dbm: 0.0 },
        ];
        assert!(pairwise_sir_db(&links[0], &links[1], &t).abs() < 1e-12);
        let g = build_conflict_graph(&links, &t, 5.0);
        assert!(g.conflicts(0, 1));
        assert_eq!(build_conflict_graph(&links, &t, f64::NEG_INFINITY).num_edges(), 0);
    }

    #[test]
    fn distant_links_do_not_conflict() {
        let t = table(&[(0.0, 0.0), (10.0, 0.0), (2000.0, 0.0), (2010.0, 0.0)]);
        let links = [
            AccessLink { tx: 0, rx: 1, tx_power_dbm: 0.0 },
            AccessLink { tx: 2, rx: 3, tx_power_dbm: 0.0 },
        ];
        assert_eq!(build_conflict_graph(&links, &t, 5.0).num_edges(), 0);
    }

    fn transmit_fraction(graph: &ConflictGraph, rule: YieldRule, link: usize, trials: usize) -> f64 {
        let mut rng = stream_rng(11, 0, Stream::Yield);
        let eligible = vec![true; graph.len()];
        let hits = (0..trials)
            .filter(|_| yield_decisions(graph, &eligible, rule, &mut rng)[link])
            .count();
        hits as f64 / trials as f64
    }

    #[test]
    fn yielding_duty_cycles() {
        let pair = ConflictGraph::from_edges(2, &[(0, 1)]);
        let tri = ConflictGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        let alone = ConflictGraph::from_edges(1, &[]);
        assert_eq!(transmit_fraction(&alone, YieldRule::IndependentPairs, 0, 1000), 1.0);
        assert!((transmit_fraction(&pair, YieldRule::IndependentPairs, 0, 10_000) - 0.5).abs() < 0.02);
        assert!((transmit_fraction(&tri, YieldRule::IndependentPairs, 2, 10_000) - 0.25).abs() < 0.02);
        assert!((transmit_fraction(&tri, YieldRule::PriorityOrder, 2, 10_000) - 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn ineligible_links_do_not_suppress() {
        let g = ConflictGraph::from_edges(2, &[(0, 1)]);
        let mut rng = stream_rng(1, 0, Stream::Yield);
        for rule in [YieldRule::IndependentPairs, YieldRule::PriorityOrder] {
            for _ in 0..100 {
                assert_eq!(yield_decisions(&g, &[true, false], rule, &mut rng), vec![true, false]);
            }
        }
    }

    proptest! {
        #[test]
        fn transmitters_form_independent_set(
            edges in prop::collection::vec((0usize..12, 0usize..12), 0..40),
            eligible in prop::collection::vec(any::<bool>(), 12),
            seed in any::<u64>(),
            priority in any::<bool>(),
        ) {
            let edges: Vec<_> = edges.into_iter().filter(|(a, b)| a != b).collect();
            let g = ConflictGraph::from_edges(12, &edges);
            let rule = if priority { YieldRule::PriorityOrder } else { YieldRule::IndependentPairs };
            let mut rng = stream_rng(seed, 0, Stream::Yield);
            let tx = yield_decisions(&g, &eligible, rule, &mut rng);
            for (a, b) in edges {
                prop_assert!(!(tx[a] && tx[b]));
            }
            for i in 0..12 {
                prop_assert!(!tx[i] || eligible[i]);
                if eligible[i] && g.neighbors(i).iter().all(|&n| !eligible[n]) {
                    prop_assert!(tx[i]);
                }
            }
        }

        #[test]
        fn pf_grant_is_argmax(rates in prop::collection::vec(1.0f64..1e5, 1..10), avgs in prop::collection::vec(1.0f64..1e5, 10)) {
            let mut pf = PfState::new(rates.len(), 100.0);
            pf.schedule(&vec![1.0; rates.len()]);
            let served: Vec<f64> = avgs[..rates.len()].to_vec();
            for _ in 0..500 {
                pf.update(&served);
            }
            let avg: Vec<f64> = (0..rates.len()).map(|i| pf.average(i).unwrap()).collect();
            let g = pf.schedule(&rates).unwrap();
            for i in 0..rates.len() {
                let m = rates[i] / avg[i];
                let mg = rates[g] / avg[g];
                prop_assert!(m < mg || (m == mg && i >= g));
            }
        }
    }
}
