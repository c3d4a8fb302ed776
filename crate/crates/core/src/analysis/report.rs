//! CSV and plot-data JSON writers for the analysis products.

use std::io::{self, Write};

use serde::Serialize;

use super::robustness::RobustnessReport;
use super::{BaselineDistribution, Dendrogram, DeviationMatrix, PatternTable, PreElectionReport};
use crate::frames::Frame;
use crate::stats::stars;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_baseline_csv<W: Write>(w: W, b: &BaselineDistribution) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["frame", "proportion", "seed_min", "seed_max", "n_seeds", "floor", "n_orgs"])?;
    for f in Frame::ALL {
        let xs = b.per_seed.iter().map(|p| p[f]);
        let lo = xs.clone().fold(f64::INFINITY, f64::min);
        let hi = xs.fold(f64::NEG_INFINITY, f64::max);
        out.write_record([
            f.name().to_string(),
            b.median[f].to_string(),
            lo.to_string(),
            hi.to_string(),
            b.n_seeds.to_string(),
            b.floor.to_string(),
            b.n_orgs.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Long format: one row per (org, frame).
pub fn write_deviation_csv<W: Write>(w: W, m: &DeviationMatrix) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["org", "structure", "n_posts", "frame", "share", "baseline", "deviation_pct"])?;
    for row in &m.rows {
        for f in Frame::ALL {
            out.write_record([
                row.org.clone(),
                row.structure.map(|s| s.as_str().to_string()).unwrap_or_default(),
                row.n_posts.to_string(),
                f.name().to_string(),
                row.share[f].to_string(),
                m.baseline[f].to_string(),
                opt(row.deviation[f]),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_pre_election_csv<W: Write>(w: W, r: &PreElectionReport) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "frame", "n_loss", "mean_loss", "ci_low_loss", "ci_high_loss", "n_win", "mean_win", "ci_low_win",
        "ci_high_win", "t", "df", "p", "stars",
    ])?;
    for c in &r.frames {
        let (a, b) = (&c.test.a, &c.test.b);
        out.write_record([
            c.frame.name().to_string(),
            a.n.to_string(),
            a.mean.to_string(),
            a.ci_low.to_string(),
            a.ci_high.to_string(),
            b.n.to_string(),
            b.mean.to_string(),
            b.ci_low.to_string(),
            b.ci_high.to_string(),
            c.test.t.to_string(),
            c.test.df.to_string(),
            c.test.p.to_string(),
            stars(c.stars),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_pattern_csv<W: Write>(w: W, t: &PatternTable) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "frame", "pattern", "k_loss", "n_loss", "prop_loss", "k_win", "n_win", "prop_win", "diff", "ci_lower",
        "ci_upper", "significant",
    ])?;
    for c in &t.cells {
        out.write_record([
            c.frame.name().to_string(),
            c.pattern.as_str().to_string(),
            c.k_loss.to_string(),
            c.n_loss.to_string(),
            c.prop_loss.to_string(),
            c.k_win.to_string(),
            c.n_win.to_string(),
            c.prop_win.to_string(),
            c.diff.to_string(),
            c.ci.lower.to_string(),
            c.ci.upper.to_string(),
            c.significant.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per (mode, frame, level); reports for several modes can share a
/// file.
pub fn write_robustness_summary_csv<W: Write>(w: W, reports: &[RobustnessReport]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "mode", "window_days", "n_seeds", "frame", "level", "frac_significant", "median_t", "median_p", "t_min",
        "t_max",
    ])?;
    for r in reports {
        for fs in &r.summaries {
            let s = &fs.summary;
            for l in &s.levels {
                out.write_record([
                    r.mode.as_str().to_string(),
                    r.window_days.to_string(),
                    s.n_seeds.to_string(),
                    fs.frame.name().to_string(),
                    l.level.to_string(),
                    l.frac_significant.to_string(),
                    s.median_t.to_string(),
                    s.median_p.to_string(),
                    s.t_min.to_string(),
                    s.t_max.to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_robustness_consensus_csv<W: Write>(w: W, reports: &[RobustnessReport]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["mode", "frame", "pattern", "mean_diff", "frac_significant", "consensus"])?;
    for r in reports {
        for c in &r.cells {
            out.write_record([
                r.mode.as_str().to_string(),
                c.frame.name().to_string(),
                c.pattern.as_str().to_string(),
                c.mean_diff.to_string(),
                c.frac_significant.to_string(),
                c.consensus.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
}

#[derive(Serialize)]
pub struct DeviationPlot<'a> {
    pub frames: Vec<&'static str>,
    pub baseline: Vec<f64>,
    pub orgs: Vec<&'a str>,
    pub structure: Vec<Option<&'static str>>,
    /// Rows follow `leaf_order`.
    pub deviation_pct: Vec<Vec<Option<f64>>>,
    pub leaf_order: &'a [String],
}

pub fn deviation_plot<'a>(m: &'a DeviationMatrix, dendrogram: &'a Dendrogram) -> DeviationPlot<'a> {
    let rows: Vec<_> = dendrogram
        .leaf_order
        .iter()
        .filter_map(|org| m.rows.iter().find(|r| &r.org == org))
        .collect();
    DeviationPlot {
        frames: Frame::ALL.iter().map(|f| f.name()).collect(),
        baseline: m.baseline.0.to_vec(),
        orgs: rows.iter().map(|r| r.org.as_str()).collect(),
        structure: rows.iter().map(|r| r.structure.map(|s| s.as_str())).collect(),
        deviation_pct: rows.iter().map(|r| r.deviation.0.to_vec()).collect(),
        leaf_order: &dendrogram.leaf_order,
    }
}

#[derive(Serialize)]
pub struct PrePlotRow {
    pub frame: &'static str,
    pub loss: [f64; 3],
    pub win: [f64; 3],
    pub p: f64,
    pub stars: String,
}

/// `[mean, ci_low, ci_high]` per group.
pub fn pre_election_plot(r: &PreElectionReport) -> Vec<PrePlotRow> {
    r.frames
        .iter()
        .map(|c| PrePlotRow {
            frame: c.frame.name(),
            loss: [c.test.a.mean, c.test.a.ci_low, c.test.a.ci_high],
            win: [c.test.b.mean, c.test.b.ci_low, c.test.b.ci_high],
            p: c.test.p,
            stars: stars(c.stars),
        })
        .collect()
}

#[derive(Serialize)]
pub struct PatternPlotRow {
    pub frame: &'static str,
    pub pattern: &'static str,
    pub diff_pct: f64,
    pub ci_pct: [f64; 2],
    pub significant: bool,
}

pub fn pattern_plot(t: &PatternTable) -> Vec<PatternPlotRow> {
    t.cells
        .iter()
        .map(|c| PatternPlotRow {
            frame: c.frame.name(),
            pattern: c.pattern.as_str(),
            diff_pct: 100.0 * c.diff,
            ci_pct: [100.0 * c.ci.lower, 100.0 * c.ci.upper],
            significant: c.significant,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{pattern_table_selected, tests::instance};
    use crate::eventstudy::Thresholds;
    use crate::frames::PerFrame;
    use crate::ingest::Outcome;

    #[test]
    fn pattern_csv_has_fifteen_rows() {
        let inst: Vec<_> = (0..4)
            .map(|i| {
                let o = if i % 2 == 0 { Outcome::Win } else { Outcome::Loss };
                instance(&i.to_string(), "A", o, 0.0, i as f64 - 1.5)
            })
            .collect();
        let th = PerFrame::from_fn(|_| Some(Thresholds { p25: -1.0, p75: 1.0 }));
        let t = pattern_table_selected(&inst, &[0, 1, 2, 3], &th, 0.05).unwrap();
        let mut buf = Vec::new();
        write_pattern_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 16);
        assert!(text.starts_with("frame,pattern,k_loss"));
        assert_eq!(pattern_plot(&t).len(), 15);
    }
}
