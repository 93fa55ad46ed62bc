//! Hexagonal multi-site layout with toroidal wrap-around, UE drops and
//! serving-sector association.
//!
//! Sites sit on a triangular lattice with spacing `isd`. A layout with `t`
//! tiers has `1 + 3t(t+1)` sites, and the whole cluster tiles the plane under
//! translations by the lattice generated by the axial vector `(t+1, t)` and
//! its 60-degree rotation. All distances in the simulator are measured on that
//! torus.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::ops::{Add, Mul, Sub};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::LinkTable;
use crate::error::{Result, SimError};
use crate::report::fmt_num;

/// Largest number of tiers with a wrap-around scheme.
pub const MAX_TIERS: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Angle of the vector in degrees, in `(-180, 180]`.
    pub fn azimuth_deg(self) -> f64 {
        self.y.atan2(self.x).to_degrees()
    }

    fn rotate_deg(self, deg: f64) -> Point {
        let (s, c) = deg.to_radians().sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Period lattice of the wrap-around torus, spanned by two vectors of equal
/// length at 60 degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrapLattice {
    t1: Point,
    t2: Point,
    inv: [[f64; 2]; 2],
}

impl WrapLattice {
    fn new(t1: Point, t2: Point) -> Self {
        let det = t1.x * t2.y - t2.x * t1.y;
        let inv = [[t2.y / det, -t2.x / det], [-t1.y / det, t1.x / det]];
        WrapLattice { t1, t2, inv }
    }

    pub fn basis(&self) -> (Point, Point) {
        (self.t1, self.t2)
    }

    /// Coordinates of `p` in the lattice basis.
    pub fn coords(&self, p: Point) -> (f64, f64) {
        (
            self.inv[0][0] * p.x + self.inv[0][1] * p.y,
            self.inv[1][0] * p.x + self.inv[1][1] * p.y,
        )
    }

    /// Shortest representative of `d` modulo the lattice.
    pub fn min_image(&self, d: Point) -> Point {
        let (u, v) = self.coords(d);
        let base = self.t1 * (u - u.floor()) + self.t2 * (v - v.floor());
        // The reduced cell splits into two equilateral triangles, so the
        // nearest lattice point is one of its four corners.
        let mut best = base;
        for c in [self.t1, self.t2, self.t1 + self.t2] {
            let cand = base - c;
            if cand.norm_sq() < best.norm_sq() {
                best = cand;
            }
        }
        best
    }
}

/// Distance metric of a layout: wrapped when the layout has a torus,
/// Euclidean otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrapMetric {
    lattice: Option<WrapLattice>,
}

impl WrapMetric {
    pub fn euclidean() -> Self {
        WrapMetric { lattice: None }
    }

    pub fn lattice(&self) -> Option<&WrapLattice> {
        self.lattice.as_ref()
    }

    /// Shortest displacement vector from `from` to `to`.
    #[inline]
    pub fn displacement(&self, from: Point, to: Point) -> Point {
        let d = to - from;
        match &self.lattice {
            Some(l) => l.min_image(d),
            None => d,
        }
    }

    /// Wrapped distance, exactly symmetric in its arguments.
    #[inline]
    pub fn distance(&self, a: Point, b: Point) -> f64 {
        if (a.x, a.y) <= (b.x, b.y) {
            self.displacement(a, b).norm()
        } else {
            self.displacement(b, a).norm()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub id: usize,
    pub site: usize,
    /// Boresight azimuth in degrees, counter-clockwise from +x.
    pub azimuth_deg: f64,
}

/// Sites, sectors and the wrap-around torus. UEs live in [`UeDrop`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub isd: f64,
    pub tiers: u32,
    pub sites: Vec<Point>,
    pub sectors: Vec<Sector>,
    /// The six shortest non-zero wrap translations (empty without wrap-around).
    pub wrap_vectors: Vec<Point>,
    pub enb_height: f64,
    pub ue_height: f64,
    metric: WrapMetric,
}

pub const SECTORS_PER_SITE: usize = 3;
const BORESIGHTS_DEG: [f64; SECTORS_PER_SITE] = [30.0, 150.0, 270.0];

fn axial_to_point(q: i32, r: i32, isd: f64) -> Point {
    Point::new(
        isd * (q as f64 + r as f64 / 2.0),
        isd * (3f64.sqrt() / 2.0) * r as f64,
    )
}

fn hex_ring(q: i32, r: i32) -> i32 {
    q.abs().max(r.abs()).max((q + r).abs())
}

impl NetworkLayout {
    /// Hexagonal layout of `1 + 3·tiers·(tiers+1)` sites with wrap-around.
    /// A zero-tier layout is a single site on the plane.
    pub fn build(isd: f64, tiers: u32) -> Result<Self> {
        if !(isd > 0.0 && isd.is_finite()) {
            return Err(SimError::config("deployment.isd", "must be positive"));
        }
        if tiers > MAX_TIERS {
            return Err(SimError::config(
                "deployment.tiers",
                format!("no wrap-around scheme for {tiers} tiers (supported: 0..={MAX_TIERS})"),
            ));
        }
        let t = tiers as i32;
        let mut axial = Vec::new();
        for q in -t..=t {
            for r in -t..=t {
                if hex_ring(q, r) <= t {
                    axial.push((q, r));
                }
            }
        }
        // Spiral order: centre first, then ring by ring, counter-clockwise.
        axial.sort_by(|&(q1, r1), &(q2, r2)| {
            let key = |q: i32, r: i32| {
                let p = axial_to_point(q, r, 1.0);
                let mut a = p.y.atan2(p.x);
                if a < 0.0 {
                    a += 2.0 * PI;
                }
                (hex_ring(q, r), a)
            };
            let (ra, aa) = key(q1, r1);
            let (rb, ab) = key(q2, r2);
            ra.cmp(&rb).then(aa.total_cmp(&ab))
        });
        let sites: Vec<Point> = axial.iter().map(|&(q, r)| axial_to_point(q, r, isd)).collect();

        let sectors = (0..sites.len())
            .flat_map(|site| {
                BORESIGHTS_DEG.iter().enumerate().map(move |(k, &az)| Sector {
                    id: site * SECTORS_PER_SITE + k,
                    site,
                    azimuth_deg: az,
                })
            })
            .collect();

        let (wrap_vectors, metric) = if tiers == 0 {
            (Vec::new(), WrapMetric::euclidean())
        } else {
            let base = axial_to_point(t + 1, t, isd);
            let vectors: Vec<Point> = (0..6).map(|k| base.rotate_deg(60.0 * k as f64)).collect();
            let lattice = WrapLattice::new(vectors[0], vectors[1]);
            (vectors, WrapMetric { lattice: Some(lattice) })
        };

        Ok(NetworkLayout {
            isd,
            tiers,
            sites,
            sectors,
            wrap_vectors,
            enb_height: 32.0,
            ue_height: 1.5,
            metric,
        })
    }

    pub fn with_heights(mut self, enb_height: f64, ue_height: f64) -> Self {
        self.enb_height = enb_height;
        self.ue_height = ue_height;
        self
    }

    pub fn metric(&self) -> WrapMetric {
        self.metric
    }

    pub fn num_sectors(&self) -> usize {
        self.sectors.len()
    }

    pub fn wrap_distance(&self, a: Point, b: Point) -> f64 {
        self.metric.distance(a, b)
    }

    pub fn sector_site(&self, sector: usize) -> Point {
        self.sites[self.sectors[sector].site]
    }

    /// Area of one sector (a third of a site hexagon).
    pub fn sector_area(&self) -> f64 {
        self.isd * self.isd / (2.0 * 3f64.sqrt())
    }

    /// The two edge vectors of a sector's rhombus, from the site outwards.
    /// Every point of the sector is `site + u·a + v·b` with `u, v` in `[0, 1)`.
    pub fn sector_rhombus(&self, sector: usize) -> (Point, Point) {
        let az = self.sectors[sector].azimuth_deg;
        let radius = self.isd / 3f64.sqrt();
        let a = Point::new(radius, 0.0).rotate_deg(az - 60.0);
        let b = Point::new(radius, 0.0).rotate_deg(az + 60.0);
        (a, b)
    }

    /// Uniform point inside a sector.
    pub fn sample_in_sector<R: Rng + ?Sized>(&self, sector: usize, rng: &mut R) -> Point {
        let (a, b) = self.sector_rhombus(sector);
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        self.sector_site(sector) + a * u + b * v
    }

    /// Whether `p` lies in the (unwrapped) deployment region, i.e. in the
    /// hexagonal cell of one of the layout's sites.
    pub fn contains(&self, p: Point) -> bool {
        let r = p.y / (self.isd * 3f64.sqrt() / 2.0);
        let q = p.x / self.isd - r / 2.0;
        let (q, r) = hex_round(q, r);
        hex_ring(q, r) <= self.tiers as i32
    }

    /// Axis-aligned bounding box of the deployment region.
    pub fn bounding_box(&self) -> (Point, Point) {
        let radius = self.isd / 3f64.sqrt();
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in &self.sites {
            lo.x = lo.x.min(s.x - radius);
            lo.y = lo.y.min(s.y - radius);
            hi.x = hi.x.max(s.x + radius);
            hi.y = hi.y.max(s.y + radius);
        }
        (lo, hi)
    }
}

fn hex_round(q: f64, r: f64) -> (i32, i32) {
    let s = -q - r;
    let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
    let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    (rq as i32, rr as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UeRole {
    Idle,
    ActiveDl,
    ActiveUl,
}

impl UeRole {
    pub fn as_str(self) -> &'static str {
        match self {
            UeRole::Idle => "idle",
            UeRole::ActiveDl => "active-dl",
            UeRole::ActiveUl => "active-ul",
        }
    }

    pub fn is_active(self) -> bool {
        self != UeRole::Idle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerSectorCounts {
    pub idle: usize,
    pub active_dl: usize,
    pub active_ul: usize,
}

impl PerSectorCounts {
    pub fn total(&self) -> usize {
        self.idle + self.active_dl + self.active_ul
    }
}

/// UE positions and roles for one drop. `drop_sector` is the sector area a UE
/// was dropped into; the serving sector comes from [`associate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UeDrop {
    pub positions: Vec<Point>,
    pub roles: Vec<UeRole>,
    pub drop_sector: Vec<usize>,
}

impl UeDrop {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Drops `counts` UEs uniformly into every sector and assigns roles uniformly
/// at random among each sector's UEs.
pub fn drop_ues<R: Rng + ?Sized>(
    layout: &NetworkLayout,
    counts: PerSectorCounts,
    max_per_sector: usize,
    rng: &mut R,
) -> Result<UeDrop> {
    if counts.total() > max_per_sector {
        return Err(SimError::config(
            "deployment.idle_per_sector",
            format!(
                "{} UEs per sector exceeds the configured maximum of {max_per_sector}",
                counts.total()
            ),
        ));
    }
    let n = counts.total() * layout.num_sectors();
    let mut out = UeDrop {
        positions: Vec::with_capacity(n),
        roles: Vec::with_capacity(n),
        drop_sector: Vec::with_capacity(n),
    };
    let mut labels = Vec::with_capacity(counts.total());
    for sector in 0..layout.num_sectors() {
        labels.clear();
        labels.extend(std::iter::repeat_n(UeRole::ActiveDl, counts.active_dl));
        labels.extend(std::iter::repeat_n(UeRole::ActiveUl, counts.active_ul));
        labels.extend(std::iter::repeat_n(UeRole::Idle, counts.idle));
        labels.shuffle(rng);
        for &role in &labels {
            out.positions.push(layout.sample_in_sector(sector, rng));
            out.roles.push(role);
            out.drop_sector.push(sector);
        }
    }
    Ok(out)
}

/// Serving sector of `ue`: lowest coupling loss, ties to the lowest index.
pub fn associate(ue: usize, links: &LinkTable) -> usize {
    let mut best = 0;
    let mut best_loss = f64::INFINITY;
    for s in 0..links.num_sectors() {
        let loss = links.coupling_loss(ue, s);
        if loss < best_loss {
            best_loss = loss;
            best = s;
        }
    }
    best
}

pub fn associate_all(links: &LinkTable) -> Vec<usize> {
    (0..links.num_points()).map(|u| associate(u, links)).collect()
}

/// Writes the layout as CSV: one `sector` row per sector, then one `ue` row
/// per UE.
pub fn write_layout_csv<W: Write>(
    mut w: W,
    layout: &NetworkLayout,
    ues: &UeDrop,
    serving: &[usize],
) -> io::Result<()> {
    writeln!(w, "kind,id,x,y,role,serving_sector,azimuth_deg")?;
    for s in &layout.sectors {
        let p = layout.sites[s.site];
        writeln!(
            w,
            "sector,{},{},{},,,{}",
            s.id,
            fmt_num(p.x),
            fmt_num(p.y),
            fmt_num(s.azimuth_deg)
        )?;
    }
    for (i, p) in ues.positions.iter().enumerate() {
        writeln!(
            w,
            "ue,{},{},{},{},{},",
            i,
            fmt_num(p.x),
            fmt_num(p.y),
            ues.roles[i].as_str(),
            serving[i]
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use proptest::prelude::*;

    fn brute_wrap(layout: &NetworkLayout, a: Point, b: Point) -> f64 {
        std::iter::once(Point::default())
            .chain(layout.wrap_vectors.iter().copied())
            .map(|t| (b - a - t).norm())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn default_layout_has_19_sites_57_sectors() {
        let l = NetworkLayout::build(500.0, 2).unwrap();
        assert_eq!(l.sites.len(), 19);
        assert_eq!(l.sectors.len(), 57);
        assert_eq!(l.wrap_vectors.len(), 6);
        assert_eq!(l.sites[0], Point::new(0.0, 0.0));
        for v in &l.wrap_vectors {
            assert!((v.norm() - 500.0 * 19f64.sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn single_site_layout() {
        let l = NetworkLayout::build(500.0, 0).unwrap();
        assert_eq!(l.sites.len(), 1);
        assert_eq!(l.sectors.len(), 3);
        assert!(l.wrap_vectors.is_empty());
        let a = Point::new(10.0, 0.0);
        let b = Point::new(-30.0, 30.0);
        assert_eq!(l.wrap_distance(a, b), (b - a).norm());
    }

    #[test]
    fn site_counts_per_tier() {
        for t in 0..=MAX_TIERS {
            let l = NetworkLayout::build(500.0, t).unwrap();
            assert_eq!(l.sites.len() as u32, 1 + 3 * t * (t + 1));
        }
        assert!(NetworkLayout::build(500.0, MAX_TIERS + 1).is_err());
        assert!(NetworkLayout::build(0.0, 2).is_err());
    }

    #[test]
    fn adjacent_sites_are_one_isd_apart() {
        let l = NetworkLayout::build(500.0, 2).unwrap();
        for (i, a) in l.sites.iter().enumerate() {
            let nearest = l
                .sites
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| (*b - *a).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((nearest - 500.0).abs() < 1e-9);
            // With wrap-around every site has exactly six neighbours at ISD.
            let wrapped = l
                .sites
                .iter()
                .filter(|b| (l.wrap_distance(*a, **b) - 500.0).abs() < 1e-6)
                .count();
            assert_eq!(wrapped, 6);
        }
    }

    #[test]
    fn sector_boresights_are_120_apart() {
        let l = NetworkLayout::build(500.0, 2).unwrap();
        for site in 0..l.sites.len() {
            let az: Vec<f64> = (0..3).map(|k| l.sectors[site * 3 + k].azimuth_deg).collect();
            assert_eq!(az[1] - az[0], 120.0);
            assert_eq!(az[2] - az[1], 120.0);
        }
    }

    #[test]
    fn wrap_identity() {
        let l = NetworkLayout::build(500.0, 2).unwrap();
        let a = Point::new(123.0, -45.0);
        assert_eq!(l.wrap_distance(a, a), 0.0);
        for v in &l.wrap_vectors {
            assert!(l.wrap_distance(a, a + *v) < 1e-9);
        }
    }

    #[test]
    fn drop_counts() {
        let l = NetworkLayout::build(500.0, 2).unwrap();
        let mut rng = stream_rng(1, 0, Stream::UeDrop);
        let full = PerSectorCounts { idle: 480, active_dl: 10, active_ul: 10 };
        let d = drop_ues(&l, full, 2000, &mut rng).unwrap();
        assert_eq!(d.len(), 28_500);
        assert_eq!(d.roles.iter().filter(|r| r.is_active()).count(), 57 * 20);

        let desk = PerSectorCounts { idle: 100, active_dl: 10, active_ul: 10 };
        assert_eq!(drop_ues(&l, desk, 2000, &mut rng).unwrap().len(), 6_840);

        let none = PerSectorCounts { idle: 0, active_dl: 0, active_ul: 0 };
        assert!(drop_ues(&l, none, 2000, &mut rng).unwrap().is_empty());

        let err = drop_ues(&l, full, 100, &mut rng).unwrap_err();
        assert!(err.to_string().contains("deployment.idle_per_sector"));
    }

    #[test]
    fn role_counts_per_sector_are_exact() {
        let l = NetworkLayout::build(500.0, 2).unwrap();
        let counts = PerSectorCounts { idle: 30, active_dl: 10, active_ul: 7 };
        for seed in 0..5 {
            let mut rng = stream_rng(seed, 0, Stream::UeDrop);
            let d = drop_ues(&l, counts, 2000, &mut rng).unwrap();
            for s in 0..l.num_sectors() {
                let tally = |role| {
                    (0..d.len())
                        .filter(|&i| d.drop_sector[i] == s && d.roles[i] == role)
                        .count()
                };
                assert_eq!(tally(UeRole::ActiveDl), 10);
                assert_eq!(tally(UeRole::ActiveUl), 7);
                assert_eq!(tally(UeRole::Idle), 30);
            }
        }
    }

    #[test]
    fn dropped_ues_lie_in_region() {
        let l = NetworkLayout::build(500.0, 2).unwrap();
        let mut rng = stream_rng(3, 0, Stream::UeDrop);
        let counts = PerSectorCounts { idle: 50, active_dl: 0, active_ul: 0 };
        let d = drop_ues(&l, counts, 2000, &mut rng).unwrap();
        assert!(d.positions.iter().all(|&p| l.contains(p)));
        // Just outside the cluster along a wrap vector direction.
        assert!(!l.contains(l.wrap_vectors[0] * 0.6));
        assert!(l.contains(Point::new(0.0, 0.0)));
    }

    #[test]
    fn sector_membership_of_samples() {
        // Samples of a sector are closer to their own site than to any other.
        let l = NetworkLayout::build(500.0, 2).unwrap();
        let mut rng = stream_rng(4, 0, Stream::UeDrop);
        for s in 0..l.num_sectors() {
            for _ in 0..20 {
                let p = l.sample_in_sector(s, &mut rng);
                let own = l.wrap_distance(p, l.sector_site(s));
                for site in &l.sites {
                    assert!(own <= l.wrap_distance(p, *site) + 1e-9);
                }
                let off = (l.metric().displacement(l.sector_site(s), p).azimuth_deg()
                    - l.sectors[s].azimuth_deg)
                    .rem_euclid(360.0);
                let off = if off > 180.0 { off - 360.0 } else { off };
                assert!(off.abs() <= 60.0 + 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn wrap_distance_matches_translation_scan(
            ax in -1000.0f64..1000.0, ay in -1000.0f64..1000.0,
            bx in -1000.0f64..1000.0, by in -1000.0f64..1000.0,
        ) {
            let l = NetworkLayout::build(500.0, 2).unwrap();
            let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
            prop_assume!(l.contains(a) && l.contains(b));
            let d = l.wrap_distance(a, b);
            prop_assert!((d - brute_wrap(&l, a, b)).abs() < 1e-6);
            prop_assert!((d - l.wrap_distance(b, a)).abs() < 1e-9);
            prop_assert!(d <= (b - a).norm() + 1e-9);
        }
    }
}
