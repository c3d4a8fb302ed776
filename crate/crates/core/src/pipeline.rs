//! Glue from labeled posts and outcomes to a classified event study.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eventstudy::{run_event_study, EventStudy, EventStudyError, WindowSpec};
use crate::ingest::{OutcomeInstance, Post, StudyRange};
use crate::timeseries::{daily_counts, roll, RolledSeries, SeriesError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    EventStudy(#[from] EventStudyError),
}

/// Parameters shared by every event-study computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub window_days: usize,
    pub spec: WindowSpec,
    pub study_range: StudyRange,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            window_days: 5,
            spec: WindowSpec::default(),
            study_range: StudyRange::reference_period(),
        }
    }
}

/// Labeled posts grouped by org plus the outcomes to analyze.
#[derive(Debug, Clone, Default)]
pub struct StudyInputs {
    pub posts_by_org: BTreeMap<String, Vec<Post>>,
    pub outcomes: Vec<OutcomeInstance>,
    /// Posts left out because they carry no labels.
    pub n_unlabeled: usize,
}

impl StudyInputs {
    /// Groups posts by org. Unlabeled posts are counted and left out, never
    /// given default labels.
    pub fn new(posts: Vec<Post>, outcomes: Vec<OutcomeInstance>) -> Self {
        let mut inputs = StudyInputs {
            outcomes,
            ..Default::default()
        };
        for p in posts {
            if p.labels.is_none() {
                inputs.n_unlabeled += 1;
                continue;
            }
            inputs.posts_by_org.entry(p.org.clone()).or_default().push(p);
        }
        for posts in inputs.posts_by_org.values_mut() {
            posts.sort_by(|a, b| a.post_id.cmp(&b.post_id));
        }
        inputs
    }
}

pub fn build_series(
    posts_by_org: &BTreeMap<String, Vec<Post>>,
    window_days: usize,
) -> Result<BTreeMap<String, RolledSeries>, SeriesError> {
    posts_by_org
        .par_iter()
        .map(|(org, posts)| {
            let refs: Vec<&Post> = posts.iter().collect();
            let counts = daily_counts(org, &refs)?;
            Ok((org.clone(), roll(&counts, window_days)?))
        })
        .collect()
}

pub fn run_study(inputs: &StudyInputs, config: &StudyConfig) -> Result<EventStudy, PipelineError> {
    let series = build_series(&inputs.posts_by_org, config.window_days)?;
    Ok(run_event_study(
        &series,
        &inputs.outcomes,
        &config.study_range,
        &config.spec,
    )?)
}
