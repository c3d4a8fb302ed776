//! Per-organization daily frame counts and their centered rolling proportions.

use chrono::{Duration, NaiveDate};

use crate::frames::{Frame, PerFrame};
use crate::ingest::Post;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SeriesError {
    #[error("post `{0}` has no labels")]
    Unlabeled(String),
    #[error("post `{post_id}` belongs to `{found}`, expected `{expected}`")]
    MixedOrgs {
        post_id: String,
        expected: String,
        found: String,
    },
    #[error("window_days must be an odd positive integer, got {0}")]
    BadWindow(usize),
}

/// Dense daily counts for one organization, from its first to its last post
/// date. Days without posts carry zero totals.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyCounts {
    pub org: String,
    pub start: Option<NaiveDate>,
    pub totals: Vec<u32>,
    pub frames: PerFrame<Vec<u32>>,
}

impl DailyCounts {
    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn date_at(&self, idx: usize) -> Option<NaiveDate> {
        self.start.map(|s| s + Duration::days(idx as i64))
    }

    fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start?).num_days();
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }

    pub fn total_on(&self, date: NaiveDate) -> u32 {
        self.index_of(date).map_or(0, |i| self.totals[i])
    }

    pub fn count_on(&self, frame: Frame, date: NaiveDate) -> u32 {
        self.index_of(date).map_or(0, |i| self.frames[frame][i])
    }
}

/// Counts posts per day and per frame. All posts must be labeled and share
/// `org`.
pub fn daily_counts(org: &str, posts: &[&Post]) -> Result<DailyCounts, SeriesError> {
    let mut empty = DailyCounts {
        org: org.to_string(),
        start: None,
        totals: Vec::new(),
        frames: PerFrame::default(),
    };
    for p in posts {
        if p.org != org {
            return Err(SeriesError::MixedOrgs {
                post_id: p.post_id.clone(),
                expected: org.to_string(),
                found: p.org.clone(),
            });
        }
        if p.labels.is_none() {
            return Err(SeriesError::Unlabeled(p.post_id.clone()));
        }
    }
    let (Some(first), Some(last)) = (
        posts.iter().map(|p| p.date).min(),
        posts.iter().map(|p| p.date).max(),
    ) else {
        return Ok(empty);
    };
    let len = (last - first).num_days() as usize + 1;
    empty.start = Some(first);
    empty.totals = vec![0; len];
    empty.frames = PerFrame::from_fn(|_| vec![0; len]);
    for p in posts {
        let i = (p.date - first).num_days() as usize;
        empty.totals[i] += 1;
        let labels = p.labels.as_ref().expect("checked above");
        for f in Frame::ALL {
            if labels.get(f) {
                empty.frames[f][i] += 1;
            }
        }
    }
    Ok(empty)
}

/// Rolled per-frame proportions on a contiguous date span.
///
/// The span extends half a window past the raw counts on each side; any date
/// outside it has an empty window and therefore no value.
#[derive(Debug, Clone, PartialEq)]
pub struct RolledSeries {
    pub org: String,
    pub window_days: usize,
    pub start: Option<NaiveDate>,
    pub values: PerFrame<Vec<Option<f64>>>,
}

impl RolledSeries {
    pub fn len(&self) -> usize {
        self.values[Frame::Diagnostic].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn date_at(&self, idx: usize) -> Option<NaiveDate> {
        self.start.map(|s| s + Duration::days(idx as i64))
    }

    /// Rolled proportion of `frame` on `date`; `None` when the window around
    /// `date` holds no posts.
    pub fn get(&self, frame: Frame, date: NaiveDate) -> Option<f64> {
        let offset = (date - self.start?).num_days();
        if offset < 0 {
            return None;
        }
        self.values[frame].get(offset as usize).copied().flatten()
    }

    /// Adds `c` to every defined value. Used for invariance checks.
    pub fn shifted(&self, c: f64) -> RolledSeries {
        let mut out = self.clone();
        for f in Frame::ALL {
            for v in out.values[f].iter_mut().flatten() {
                *v += c;
            }
        }
        out
    }
}

pub fn check_window(window_days: usize) -> Result<usize, SeriesError> {
    if window_days == 0 || window_days.is_multiple_of(2) {
        return Err(SeriesError::BadWindow(window_days));
    }
    Ok((window_days - 1) / 2)
}

/// Centered boxcar roll: the value on day `d` is the frame's post count over
/// `[d-h, d+h]` divided by the total post count over the same span.
pub fn roll(counts: &DailyCounts, window_days: usize) -> Result<RolledSeries, SeriesError> {
    let half = check_window(window_days)?;
    let Some(start) = counts.start else {
        return Ok(RolledSeries {
            org: counts.org.clone(),
            window_days,
            start: None,
            values: PerFrame::default(),
        });
    };
    let n = counts.len();
    let out_len = n + 2 * half;

    let prefix = |xs: &[u32]| {
        let mut acc = Vec::with_capacity(xs.len() + 1);
        acc.push(0u64);
        for &x in xs {
            acc.push(acc.last().unwrap() + x as u64);
        }
        acc
    };
    let total_prefix = prefix(&counts.totals);
    // output index j covers raw indices [j-2h, j] clipped to [0, n)
    let span = |j: usize| {
        let lo = j.saturating_sub(2 * half);
        let hi = (j + 1).min(n);
        (lo.min(n), hi)
    };

    let mut values = PerFrame::default();
    for f in Frame::ALL {
        let frame_prefix = prefix(&counts.frames[f]);
        values[f] = (0..out_len)
            .map(|j| {
                let (lo, hi) = span(j);
                let denom = total_prefix[hi] - total_prefix[lo];
                (denom > 0).then(|| (frame_prefix[hi] - frame_prefix[lo]) as f64 / denom as f64)
            })
            .collect();
    }
    Ok(RolledSeries {
        org: counts.org.clone(),
        window_days,
        start: Some(start - Duration::days(half as i64)),
        values,
    })
}

/// `org,date,frame,count,total,rolled` rows over the rolled span.
pub fn write_series_csv<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    counts: &DailyCounts,
    rolled: &RolledSeries,
) -> csv::Result<()> {
    for idx in 0..rolled.len() {
        let date = rolled.date_at(idx).expect("non-empty series has a start");
        for f in Frame::ALL {
            w.write_record([
                counts.org.as_str(),
                &date.to_string(),
                f.name(),
                &counts.count_on(f, date).to_string(),
                &counts.total_on(date).to_string(),
                &rolled.values[f][idx].map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    Ok(())
}
