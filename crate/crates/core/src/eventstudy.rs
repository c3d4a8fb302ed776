//! Pre/post election frame usage, pseudo-event baselines, detrending,
//! offsets and change-pattern classification.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frames::{Frame, PerFrame};
use crate::ingest::{Outcome, OutcomeInstance, StudyRange};
use crate::stats::{self, CaseKey};
use crate::timeseries::RolledSeries;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EventStudyError {
    #[error("invalid window spec: {0}")]
    Window(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Pre,
    Post,
}

/// Event-relative day offsets of the two windows and the baseline span
/// length, all in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub pre: (i64, i64),
    pub post: (i64, i64),
    pub baseline_span: i64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            pre: (-7, -3),
            post: (3, 7),
            baseline_span: 18,
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<(), EventStudyError> {
        let (a, b) = self.pre;
        let (c, d) = self.post;
        if !(a <= b && b < 0) {
            return Err(EventStudyError::Window(format!(
                "pre window [{a}, {b}] must be ordered and end before day 0"
            )));
        }
        if !(0 < c && c <= d) {
            return Err(EventStudyError::Window(format!(
                "post window [{c}, {d}] must be ordered and start after day 0"
            )));
        }
        if self.baseline_span < 1 {
            return Err(EventStudyError::Window(format!(
                "baseline span must be positive, got {}",
                self.baseline_span
            )));
        }
        Ok(())
    }

    pub fn offsets(&self, side: Side) -> std::ops::RangeInclusive<i64> {
        let (a, b) = match side {
            Side::Pre => self.pre,
            Side::Post => self.post,
        };
        a..=b
    }

    /// 0-based position of the pseudo-event inside a baseline span: day 9
    /// of 18.
    pub fn pseudo_event_offset(&self) -> i64 {
        (self.baseline_span - 1) / 2
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean rolled usage over one side's day offsets, skipping days without a
/// value.
pub fn window_usage(
    series: &RolledSeries,
    event_date: NaiveDate,
    side: Side,
    spec: &WindowSpec,
) -> PerFrame<Option<f64>> {
    PerFrame::from_fn(|f| {
        mean_defined(
            spec.offsets(side)
                .map(|k| series.get(f, event_date + Duration::days(k))),
        )
    })
}

/// Pseudo-event dates for `org` and `outcome`.
///
/// The study range is cut at every election of that outcome for the org;
/// each remaining gap is tiled from its left edge with non-overlapping
/// spans of `baseline_span` days. Elections of the other outcome do not
/// cut the range.
pub fn find_baseline_periods(
    org: &str,
    outcome: Outcome,
    events: &[OutcomeInstance],
    study_range: &StudyRange,
    spec: &WindowSpec,
) -> Vec<NaiveDate> {
    let mut cuts: Vec<NaiveDate> = events
        .iter()
        .filter(|e| e.org == org && e.outcome == outcome && study_range.contains(e.election_date))
        .map(|e| e.election_date)
        .collect();
    cuts.sort_unstable();
    cuts.dedup();

    let span = spec.baseline_span;
    let mid = spec.pseudo_event_offset();
    let mut out = Vec::new();
    let mut tile = |from: NaiveDate, to: NaiveDate| {
        let len = (to - from).num_days() + 1;
        for i in 0..len.max(0) / span {
            out.push(from + Duration::days(i * span + mid));
        }
    };
    let mut cursor = study_range.start;
    for cut in cuts {
        tile(cursor, cut - Duration::days(1));
        cursor = cut + Duration::days(1);
    }
    tile(cursor, study_range.end);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineUsage {
    pub pre: PerFrame<Option<f64>>,
    pub post: PerFrame<Option<f64>>,
    pub n_pseudo_events: usize,
}

type Usage = PerFrame<Option<f64>>;

/// Unweighted mean of pseudo-event window usage per side and frame.
pub fn baseline_usage(series: &RolledSeries, pseudo_events: &[NaiveDate], spec: &WindowSpec) -> BaselineUsage {
    let per_event: Vec<(Usage, Usage)> = pseudo_events
        .iter()
        .map(|&d| {
            (
                window_usage(series, d, Side::Pre, spec),
                window_usage(series, d, Side::Post, spec),
            )
        })
        .collect();
    BaselineUsage {
        pre: PerFrame::from_fn(|f| mean_defined(per_event.iter().map(|(pre, _)| pre[f]))),
        post: PerFrame::from_fn(|f| mean_defined(per_event.iter().map(|(_, post)| post[f]))),
        n_pseudo_events: pseudo_events.len(),
    }
}

fn sub(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// `(U_b - baseline_pre, U_a - baseline_post)`; any missing input gives a
/// missing output.
pub fn detrend(
    u_b: Option<f64>,
    u_a: Option<f64>,
    baseline_pre: Option<f64>,
    baseline_post: Option<f64>,
) -> (Option<f64>, Option<f64>) {
    (sub(u_b, baseline_pre), sub(u_a, baseline_post))
}

/// Post minus pre detrended usage.
pub fn offset(u_b_d: Option<f64>, u_a_d: Option<f64>) -> Option<f64> {
    sub(u_a_d, u_b_d)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    Decrease,
    Stable,
    Increase,
    #[default]
    Unclassified,
}

impl Pattern {
    pub const CLASSIFIED: [Pattern; 3] = [Pattern::Decrease, Pattern::Stable, Pattern::Increase];

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Decrease => "decrease",
            Pattern::Stable => "stable",
            Pattern::Increase => "increase",
            Pattern::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub p25: f64,
    pub p75: f64,
}

/// Decrease below `p25`, increase above `p75`, stable in between with both
/// bounds inclusive.
pub fn classify_change(o: Option<f64>, thresholds: Option<Thresholds>) -> Pattern {
    match (o, thresholds) {
        (Some(o), Some(t)) if o < t.p25 => Pattern::Decrease,
        (Some(o), Some(t)) if o > t.p75 => Pattern::Increase,
        (Some(_), Some(_)) => Pattern::Stable,
        _ => Pattern::Unclassified,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FrameScores {
    pub u_b: Option<f64>,
    pub u_a: Option<f64>,
    pub u_b_baseline: Option<f64>,
    pub u_a_baseline: Option<f64>,
    pub u_b_d: Option<f64>,
    pub u_a_d: Option<f64>,
    pub offset: Option<f64>,
    pub pattern: Pattern,
}

/// One (organization, case, outcome) with its per-frame scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStudyInstance {
    pub case_id: String,
    pub org: String,
    pub outcome: Outcome,
    pub election_date: NaiveDate,
    pub n_pseudo_events: usize,
    pub frames: PerFrame<FrameScores>,
}

impl CaseKey for EventStudyInstance {
    fn org(&self) -> &str {
        &self.org
    }
    fn case_id(&self) -> &str {
        &self.case_id
    }
    fn outcome(&self) -> Outcome {
        self.outcome
    }
}

/// Scores one event against a baseline. Patterns stay unclassified until
/// thresholds are known.
pub fn score_event(
    series: &RolledSeries,
    event_date: NaiveDate,
    baseline: &BaselineUsage,
    spec: &WindowSpec,
) -> PerFrame<FrameScores> {
    let pre = window_usage(series, event_date, Side::Pre, spec);
    let post = window_usage(series, event_date, Side::Post, spec);
    PerFrame::from_fn(|f| {
        let (u_b_d, u_a_d) = detrend(pre[f], post[f], baseline.pre[f], baseline.post[f]);
        FrameScores {
            u_b: pre[f],
            u_a: post[f],
            u_b_baseline: baseline.pre[f],
            u_a_baseline: baseline.post[f],
            u_b_d,
            u_a_d,
            offset: offset(u_b_d, u_a_d),
            pattern: Pattern::Unclassified,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedInstance {
    pub case_id: String,
    pub org: String,
    pub outcome: Outcome,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EventStudy {
    /// Sorted by (case_id, org).
    pub instances: Vec<EventStudyInstance>,
    pub dropped: Vec<DroppedInstance>,
    pub thresholds: PerFrame<Option<Thresholds>>,
}

/// Builds every instance, computes pooled won+lost percentile thresholds per
/// frame and classifies each instance's change pattern.
pub fn run_event_study(
    series: &BTreeMap<String, RolledSeries>,
    outcomes: &[OutcomeInstance],
    study_range: &StudyRange,
    spec: &WindowSpec,
) -> Result<EventStudy, EventStudyError> {
    spec.validate()?;

    let mut keys: Vec<(&str, Outcome)> = outcomes.iter().map(|o| (o.org.as_str(), o.outcome)).collect();
    keys.sort_unstable();
    keys.dedup();
    let baselines: BTreeMap<(&str, Outcome), BaselineUsage> = keys
        .par_iter()
        .filter_map(|&(org, outcome)| {
            let s = series.get(org)?;
            let pseudo = find_baseline_periods(org, outcome, outcomes, study_range, spec);
            Some(((org, outcome), baseline_usage(s, &pseudo, spec)))
        })
        .collect();

    let results: Vec<Result<EventStudyInstance, DroppedInstance>> = outcomes
        .par_iter()
        .map(|o| {
            let drop = |reason: &str| DroppedInstance {
                case_id: o.case_id.clone(),
                org: o.org.clone(),
                outcome: o.outcome,
                reason: reason.to_string(),
            };
            let Some(s) = series.get(&o.org) else {
                return Err(drop("no labeled posts for org"));
            };
            let baseline = &baselines[&(o.org.as_str(), o.outcome)];
            if baseline.n_pseudo_events == 0 {
                return Err(drop("no baseline periods"));
            }
            if baseline.pre.0.iter().all(Option::is_none) || baseline.post.0.iter().all(Option::is_none) {
                return Err(drop("baseline windows hold no posts"));
            }
            let frames = score_event(s, o.election_date, baseline, spec);
            if frames.0.iter().all(|f| f.u_b.is_none()) {
                return Err(drop("pre-election window holds no posts"));
            }
            if frames.0.iter().all(|f| f.u_a.is_none()) {
                return Err(drop("post-election window holds no posts"));
            }
            Ok(EventStudyInstance {
                case_id: o.case_id.clone(),
                org: o.org.clone(),
                outcome: o.outcome,
                election_date: o.election_date,
                n_pseudo_events: baseline.n_pseudo_events,
                frames,
            })
        })
        .collect();

    let mut study = EventStudy::default();
    for r in results {
        match r {
            Ok(i) => study.instances.push(i),
            Err(d) => study.dropped.push(d),
        }
    }
    study
        .instances
        .sort_by(|a, b| (&a.case_id, &a.org).cmp(&(&b.case_id, &b.org)));
    study
        .dropped
        .sort_by(|a, b| (&a.case_id, &a.org).cmp(&(&b.case_id, &b.org)));
    study.thresholds = classify_instances(&mut study.instances);
    Ok(study)
}

/// 25th/75th percentiles of the pooled offset distribution per frame.
pub fn offset_thresholds(instances: &[EventStudyInstance]) -> PerFrame<Option<Thresholds>> {
    PerFrame::from_fn(|f| {
        let offsets: Vec<f64> = instances.iter().filter_map(|i| i.frames[f].offset).collect();
        Some(Thresholds {
            p25: stats::percentile(&offsets, 25.0).ok()?,
            p75: stats::percentile(&offsets, 75.0).ok()?,
        })
    })
}

pub fn classify_instances(instances: &mut [EventStudyInstance]) -> PerFrame<Option<Thresholds>> {
    let thresholds = offset_thresholds(instances);
    for inst in instances.iter_mut() {
        for f in Frame::ALL {
            let scores = &mut inst.frames[f];
            scores.pattern = classify_change(scores.offset, thresholds[f]);
        }
    }
    thresholds
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const INSTANCE_CSV_HEADER: [&str; 12] = [
    "case_id",
    "org",
    "outcome",
    "frame",
    "U_b",
    "U_a",
    "U_b_baseline",
    "U_a_baseline",
    "U_b_D",
    "U_a_D",
    "O",
    "pattern",
];

pub fn write_instances_csv<W: std::io::Write>(w: W, instances: &[EventStudyInstance]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(INSTANCE_CSV_HEADER)?;
    for inst in instances {
        for (f, s) in inst.frames.iter() {
            w.write_record([
                inst.case_id.as_str(),
                inst.org.as_str(),
                inst.outcome.as_str(),
                f.name(),
                &fmt_opt(s.u_b),
                &fmt_opt(s.u_a),
                &fmt_opt(s.u_b_baseline),
                &fmt_opt(s.u_a_baseline),
                &fmt_opt(s.u_b_d),
                &fmt_opt(s.u_a_d),
                &fmt_opt(s.offset),
                s.pattern.as_str(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
