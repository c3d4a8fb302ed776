//! Repeats the pre-election comparison and pattern table across resampling
//! seeds and aggregates the results.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compare_selected, pattern_table_selected, AnalysisError, FrameComparison, PatternTable};
use crate::eventstudy::{EventStudy, Pattern};
use crate::frames::Frame;
use crate::pipeline::{run_study, PipelineError, StudyConfig, StudyInputs};
use crate::stats::{
    self, balanced_sample, balanced_subset, cap_to_percentile, derive_seed, seed_consensus, SeedSummary, TTestVariant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessMode {
    MultiSeedBalance,
    Cap90ThenBalance,
    WindowVariant,
}

impl RobustnessMode {
    pub const ALL: [RobustnessMode; 3] = [
        RobustnessMode::MultiSeedBalance,
        RobustnessMode::Cap90ThenBalance,
        RobustnessMode::WindowVariant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RobustnessMode::MultiSeedBalance => "multi_seed_balance",
            RobustnessMode::Cap90ThenBalance => "cap90_then_balance",
            RobustnessMode::WindowVariant => "window_variant",
        }
    }
}

impl FromStr for RobustnessMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown robustness mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessParams {
    pub n_seeds: usize,
    pub base_seed: u64,
    pub alpha: f64,
    pub variant: TTestVariant,
    pub cap_percentile: f64,
    pub consensus: f64,
    pub levels: Vec<f64>,
    /// Rolling window used by [`RobustnessMode::WindowVariant`].
    pub variant_window_days: usize,
}

impl Default for RobustnessParams {
    fn default() -> Self {
        RobustnessParams {
            n_seeds: 20,
            base_seed: 0,
            alpha: 0.05,
            variant: TTestVariant::Welch,
            cap_percentile: 90.0,
            consensus: 0.8,
            levels: stats::DEFAULT_LEVELS.to_vec(),
            variant_window_days: 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RobustnessError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("seed #{index} ({seed}): {source}")]
    Seed {
        index: usize,
        seed: u64,
        #[source]
        source: AnalysisError,
    },
    #[error("{frame}: {source}")]
    Summary {
        frame: Frame,
        #[source]
        source: stats::StatsError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameSummary {
    pub frame: Frame,
    pub summary: SeedSummary,
}

/// One pattern-table cell aggregated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusCell {
    pub frame: Frame,
    pub pattern: Pattern,
    pub mean_diff: f64,
    pub frac_significant: f64,
    pub consensus: bool,
}

/// Results of one resampling seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRun {
    pub index: usize,
    pub seed: u64,
    pub n_instances: usize,
    pub comparisons: Vec<FrameComparison>,
    pub patterns: PatternTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub mode: RobustnessMode,
    pub window_days: usize,
    pub params: RobustnessParams,
    pub summaries: Vec<FrameSummary>,
    pub cells: Vec<ConsensusCell>,
    pub runs: Vec<SeedRun>,
}

/// Seed used by resampling run `index`.
pub fn run_seed(base_seed: u64, index: usize) -> u64 {
    derive_seed(base_seed, &format!("robustness/{index}"))
}

/// Runs the event study (at the variant window for
/// [`RobustnessMode::WindowVariant`]) and aggregates resampled comparisons.
pub fn robustness_run(
    inputs: &StudyInputs,
    config: &StudyConfig,
    mode: RobustnessMode,
    params: &RobustnessParams,
) -> Result<RobustnessReport, RobustnessError> {
    let mut config = *config;
    if mode == RobustnessMode::WindowVariant {
        config.window_days = params.variant_window_days;
    }
    let study = run_study(inputs, &config)?;
    robustness_on_study(&study, config.window_days, mode, params)
}

/// Aggregates resampled comparisons over an existing study. Capping applies
/// only in [`RobustnessMode::Cap90ThenBalance`].
pub fn robustness_on_study(
    study: &EventStudy,
    window_days: usize,
    mode: RobustnessMode,
    params: &RobustnessParams,
) -> Result<RobustnessReport, RobustnessError> {
    let instances = &study.instances;
    let runs: Vec<SeedRun> = (0..params.n_seeds)
        .into_par_iter()
        .map(|index| {
            let seed = run_seed(params.base_seed, index);
            let selected = if mode == RobustnessMode::Cap90ThenBalance {
                let capped = cap_to_percentile(instances, params.cap_percentile, seed);
                balanced_subset(instances, capped, seed)
            } else {
                balanced_sample(instances, seed)
            };
            let wrap = |source| RobustnessError::Seed { index, seed, source };
            Ok(SeedRun {
                index,
                seed,
                n_instances: selected.len(),
                comparisons: compare_selected(instances, &selected, params.variant).map_err(wrap)?,
                patterns: pattern_table_selected(instances, &selected, &study.thresholds, params.alpha)
                    .map_err(wrap)?,
            })
        })
        .collect::<Result<_, RobustnessError>>()?;

    let summaries = Frame::ALL
        .into_iter()
        .map(|frame| {
            let tests: Vec<_> = runs
                .iter()
                .map(|r| r.comparisons[frame.index()].test)
                .collect();
            stats::multi_seed_summary(&tests, &params.levels)
                .map(|summary| FrameSummary { frame, summary })
                .map_err(|source| RobustnessError::Summary { frame, source })
        })
        .collect::<Result<_, _>>()?;

    let mut cells = Vec::with_capacity(15);
    for frame in Frame::ALL {
        for pattern in Pattern::CLASSIFIED {
            let per_seed: Vec<_> = runs
                .iter()
                .filter_map(|r| r.patterns.cell(frame, pattern))
                .collect();
            let flags: Vec<bool> = per_seed.iter().map(|c| c.significant).collect();
            let n = per_seed.len().max(1) as f64;
            cells.push(ConsensusCell {
                frame,
                pattern,
                mean_diff: per_seed.iter().map(|c| c.diff).sum::<f64>() / n,
                frac_significant: flags.iter().filter(|&&f| f).count() as f64 / n,
                consensus: seed_consensus(&flags, params.consensus),
            });
        }
    }
    Ok(RobustnessReport {
        mode,
        window_days,
        params: params.clone(),
        summaries,
        cells,
        runs,
    })
}
