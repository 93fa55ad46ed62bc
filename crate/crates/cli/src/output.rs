//! CSV writers. Every file goes through [`OutputDir`], which records its
//! SHA-256 for the manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use relaysim_core::engine::{
    EnbComponent, MetricsAccumulator, SnapshotResult, SystemRun, UpperBoundResult, TRACE_HEADER,
};
use relaysim_core::relaying::{write_assignments_csv, Direction, ASSIGNMENTS_HEADER};
use relaysim_core::report::fmt_num;
use relaysim_core::stats::{gain, percentile_sorted, sorted, summarize};

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// An output directory and the checksums of the files written into it,
/// keyed by `/`-separated relative path.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    pub checksums: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            checksums: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
        }
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = HashingWriter {
            inner: BufWriter::new(file),
            hasher: Sha256::new(),
        };
        body(&mut w)
            .and_then(|_| w.flush())
            .with_context(|| format!("cannot write {}", path.display()))?;
        self.checksums.insert(rel.to_string(), hex::encode(w.hasher.finalize()));
        Ok(())
    }
}

/// Writes `header` and one `value,cdf` row per probe; only the header when
/// there are no samples.
fn write_cdf(w: &mut dyn Write, header: &str, samples: &[f64]) -> io::Result<()> {
    writeln!(w, "{header}")?;
    write_cdf_rows(w, "", samples)
}

fn write_cdf_rows(w: &mut dyn Write, prefix: &str, samples: &[f64]) -> io::Result<()> {
    let Ok(s) = summarize(samples) else { return Ok(()) };
    for (x, f) in s.cdf {
        writeln!(w, "{prefix}{},{}", fmt_num(x), fmt_num(f))?;
    }
    Ok(())
}

fn p5_p50(sorted_samples: &[f64]) -> (f64, f64) {
    if sorted_samples.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (percentile_sorted(sorted_samples, 0.05), percentile_sorted(sorted_samples, 0.5))
    }
}

/// Headline numbers of a baseline/relay/relay-im run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSummary {
    pub dl_rate: (f64, f64),
    pub ul_rate: (f64, f64),
    pub dl_sinr: (f64, f64),
    pub ul_sinr: (f64, f64),
    pub mean_active_links: f64,
    pub dl_relayed: f64,
    pub ul_relayed: f64,
}

impl SystemSummary {
    pub fn of(m: &MetricsAccumulator) -> Self {
        SystemSummary {
            dl_rate: p5_p50(&m.ue_rate_bps(Direction::Dl)),
            ul_rate: p5_p50(&m.ue_rate_bps(Direction::Ul)),
            dl_sinr: p5_p50(&m.ue_sinr_db(Direction::Dl)),
            ul_sinr: p5_p50(&m.ue_sinr_db(Direction::Ul)),
            mean_active_links: m.mean_active_links(),
            dl_relayed: m.relayed_fraction(Direction::Dl),
            ul_relayed: m.relayed_fraction(Direction::Ul),
        }
    }

    /// Relative rate gains over `base` at the DL and UL 5th and 50th percentiles.
    pub fn gains_over(&self, base: &SystemSummary) -> [f64; 4] {
        [
            gain(self.dl_rate.0, base.dl_rate.0),
            gain(self.dl_rate.1, base.dl_rate.1),
            gain(self.ul_rate.0, base.ul_rate.0),
            gain(self.ul_rate.1, base.ul_rate.1),
        ]
    }
}

pub const GAIN_COLUMNS: [&str; 4] = ["dl_rate_p5_gain", "dl_rate_p50_gain", "ul_rate_p5_gain", "ul_rate_p50_gain"];

fn write_metric_rows(w: &mut dyn Write, rows: &[(&str, f64)]) -> io::Result<()> {
    writeln!(w, "metric,value")?;
    for (k, v) in rows {
        writeln!(w, "{k},{}", fmt_num(*v))?;
    }
    Ok(())
}

/// All CSVs of a system run under `prefix` (empty or ending in `/`).
pub fn write_system(
    out: &mut OutputDir,
    prefix: &str,
    run: &SystemRun,
    baseline: &SystemSummary,
    trace: bool,
) -> Result<SystemSummary> {
    let m = &run.metrics;
    let p = |name: &str| format!("{prefix}{name}");

    out.write(&p("dl_sinr_cdf.csv"), |w| write_cdf(w, "sinr_db,cdf", &m.ue_sinr_db(Direction::Dl)))?;
    out.write(&p("ul_sinr_cdf.csv"), |w| write_cdf(w, "sinr_db,cdf", &m.ue_sinr_db(Direction::Ul)))?;
    out.write(&p("dl_rate_cdf.csv"), |w| write_cdf(w, "rate_bps,cdf", &m.ue_rate_bps(Direction::Dl)))?;
    out.write(&p("ul_rate_cdf.csv"), |w| write_cdf(w, "rate_bps,cdf", &m.ue_rate_bps(Direction::Ul)))?;
    out.write(&p("access_sinr_cdf.csv"), |w| {
        writeln!(w, "direction,sinr_db,cdf")?;
        for d in [Direction::Dl, Direction::Ul] {
            write_cdf_rows(w, &format!("{},", d.as_str()), &m.access_sinr_db(d))?;
        }
        Ok(())
    })?;
    out.write(&p("enb_interference_cdf.csv"), |w| {
        writeln!(w, "component,power_dbm,cdf")?;
        for c in EnbComponent::ALL {
            write_cdf_rows(w, &format!("{},", c.as_str()), &m.enb_component_dbm(c))?;
        }
        Ok(())
    })?;

    let s = SystemSummary::of(m);
    let g = s.gains_over(baseline);
    out.write(&p("summary.csv"), |w| {
        let mut rows = vec![
            ("dl_rate_p5_bps", s.dl_rate.0),
            ("dl_rate_p50_bps", s.dl_rate.1),
            ("ul_rate_p5_bps", s.ul_rate.0),
            ("ul_rate_p50_bps", s.ul_rate.1),
            ("dl_sinr_p5_db", s.dl_sinr.0),
            ("dl_sinr_p50_db", s.dl_sinr.1),
            ("ul_sinr_p5_db", s.ul_sinr.0),
            ("ul_sinr_p50_db", s.ul_sinr.1),
        ];
        rows.extend(GAIN_COLUMNS.iter().copied().zip(g));
        rows.extend([
            ("mean_active_access_links", s.mean_active_links),
            ("dl_relayed_fraction", s.dl_relayed),
            ("ul_relayed_fraction", s.ul_relayed),
            ("max_sinr_db", m.max_sinr_db),
            ("max_access_power_dbm", m.max_access_power_dbm),
            ("buffer_violations", m.buffer_violations as f64),
            ("bit_mismatches", m.bit_mismatches as f64),
        ]);
        write_metric_rows(w, &rows)
    })?;

    out.write(&p("ues.csv"), |w| {
        writeln!(w, "drop,ue,direction,sector,relay,direct_bits,relayed_bits,served_bits,avg_sinr_db")?;
        for r in m.sorted_ues() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.drop,
                r.ue,
                r.direction.as_str(),
                r.sector,
                r.relay.map_or(-1, |x| x as i64),
                r.direct_bits,
                r.relayed_bits,
                r.served_bits(),
                r.avg_sinr_db().map_or("nan".to_string(), fmt_num)
            )?;
        }
        Ok(())
    })?;
    out.write(&p("active_links.csv"), |w| {
        writeln!(w, "drop,mean_active_links")?;
        for (d, v) in m.per_drop_active_links() {
            writeln!(w, "{d},{}", fmt_num(v))?;
        }
        Ok(())
    })?;

    if run.drops.iter().any(|d| !d.selected.is_empty()) {
        out.write(&p("assignments.csv"), |w| {
            writeln!(w, "{ASSIGNMENTS_HEADER}")?;
            for d in &run.drops {
                write_assignments_csv(&mut *w, d.drop as usize, &d.assignments)?;
            }
            Ok(())
        })?;
        out.write(&p("pruning.csv"), |w| {
            writeln!(
                w,
                "drop,edge,relay,direction,backhaul_rate,access_rate,access_availability,direct_rate,sector_flows,through_estimate,direct_estimate,kept"
            )?;
            for d in &run.drops {
                for r in &d.pruning {
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{},{},{},{},{}",
                        d.drop,
                        r.edge,
                        r.relay,
                        r.direction.as_str(),
                        fmt_num(r.backhaul_rate),
                        fmt_num(r.access_rate),
                        fmt_num(r.access_availability),
                        fmt_num(r.direct_rate),
                        r.sector_flows,
                        fmt_num(r.through_estimate()),
                        fmt_num(r.direct_estimate()),
                        u8::from(r.kept)
                    )?;
                }
            }
            Ok(())
        })?;
    }
    if trace {
        out.write(&p("trace.csv"), |w| {
            writeln!(w, "{TRACE_HEADER}")?;
            for d in &run.drops {
                for t in &d.trace {
                    writeln!(w, "{},{},{},{},{},{}", t.drop, t.subframe, t.sector, t.kind.as_str(), t.ue, t.state)?;
                }
            }
            Ok(())
        })?;
    }
    Ok(s)
}

/// `gains.csv` of a `--mode all` run.
pub fn write_gains(out: &mut OutputDir, rows: &[(&str, SystemSummary)], baseline: &SystemSummary) -> Result<()> {
    out.write("gains.csv", |w| {
        writeln!(
            w,
            "mode,{},mean_active_access_links,dl_relayed_fraction,ul_relayed_fraction",
            GAIN_COLUMNS.join(",")
        )?;
        for (mode, s) in rows {
            let g = s.gains_over(baseline).map(fmt_num).join(",");
            writeln!(
                w,
                "{mode},{g},{},{},{}",
                fmt_num(s.mean_active_links),
                fmt_num(s.dl_relayed),
                fmt_num(s.ul_relayed)
            )?;
        }
        Ok(())
    })
}

pub fn write_upper_bound(out: &mut OutputDir, r: &UpperBoundResult) -> Result<()> {
    out.write("upper_bound_sinr_cdf.csv", |w| {
        writeln!(w, "direction,stage,sinr_db,cdf")?;
        for (dir, stage, v) in [
            ("dl", "before", &r.dl_before_db),
            ("dl", "after", &r.dl_after_db),
            ("ul", "before", &r.ul_before_db),
            ("ul", "after", &r.ul_after_db),
        ] {
            write_cdf_rows(w, &format!("{dir},{stage},"), v)?;
        }
        Ok(())
    })?;
    out.write("upper_bound_ici_cdf.csv", |w| {
        writeln!(w, "stage,ici_dbm,cdf")?;
        write_cdf_rows(w, "before,", &r.ici_before_dbm)?;
        write_cdf_rows(w, "after,", &r.ici_after_dbm)
    })?;
    let med = |v: &[f64]| p5_p50(&sorted(v)).1;
    out.write("summary.csv", |w| {
        write_metric_rows(
            w,
            &[
                ("median_dl_gain_db", r.median_dl_gain_db()),
                ("median_ul_gain_db", r.median_ul_gain_db()),
                ("dl_before_p50_db", med(&r.dl_before_db)),
                ("dl_after_p50_db", med(&r.dl_after_db)),
                ("ul_before_p50_db", med(&r.ul_before_db)),
                ("ul_after_p50_db", med(&r.ul_after_db)),
                ("ici_before_p50_dbm", med(&r.ici_before_dbm)),
                ("ici_after_p50_dbm", med(&r.ici_after_dbm)),
                ("replaced_fraction", r.replaced as f64 / r.active.max(1) as f64),
            ],
        )
    })
}

pub fn write_snapshot(out: &mut OutputDir, r: &SnapshotResult) -> Result<()> {
    for (name, grid) in [("snapshot_ul_grid.csv", &r.ul_grid), ("snapshot_dl_grid.csv", &r.dl_grid)] {
        out.write(name, |w| {
            writeln!(w, "x,y,dbm")?;
            for c in grid {
                writeln!(w, "{},{},{}", fmt_num(c.x), fmt_num(c.y), fmt_num(c.dbm))?;
            }
            Ok(())
        })?;
    }
    out.write("nearest_distance_cdf.csv", |w| write_cdf(w, "distance_m,cdf", &r.nearest_distance_m))?;
    out.write("ref_power_cdf.csv", |w| write_cdf(w, "power_dbm,cdf", &r.ref_power_dbm))?;
    let d = &r.nearest_distance_m;
    let power = sorted(&r.ref_power_dbm);
    let p80 = if power.is_empty() { f64::NAN } else { percentile_sorted(&power, 0.8) };
    out.write("summary.csv", |w| {
        write_metric_rows(
            w,
            &[
                ("mean_nearest_distance_m", d.iter().sum::<f64>() / d.len().max(1) as f64),
                ("ref_power_p50_dbm", p5_p50(&power).1),
                ("ref_power_p80_dbm", p80),
            ],
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksums_match_file_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write("a/b.csv", |w| writeln!(w, "x,cdf\n1,0.5")).unwrap();
        let bytes = fs::read(dir.path().join("a/b.csv")).unwrap();
        assert_eq!(out.checksums["a/b.csv"], hex::encode(Sha256::digest(&bytes)));
    }

    #[test]
    fn empty_samples_give_header_only() {
        let mut v = Vec::new();
        write_cdf(&mut v, "rate_bps,cdf", &[]).unwrap();
        assert_eq!(String::from_utf8(v).unwrap(), "rate_bps,cdf\n");
    }

    #[test]
    fn cdf_rows_use_fixed_format() {
        let mut v = Vec::new();
        write_cdf(&mut v, "x,cdf", &[1.0, 2.0]).unwrap();
        let text = String::from_utf8(v).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 201);
        assert_eq!(lines[1], "1.00000e0,5.00000e-1");
        assert_eq!(lines[201], "2.00000e0,1.00000e0");
    }
}
