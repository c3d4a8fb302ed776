//! Result products: the pooled baseline frame distribution, the per-org
//! deviation matrix and its clustering, the pre-election won/lost
//! comparison, the pre/post pattern table and the resampling robustness
//! runs.

pub mod cluster;
pub mod report;
pub mod robustness;

use std::collections::BTreeMap;

use rand::seq::index;
use serde::Serialize;

use crate::eventstudy::{classify_change, EventStudyInstance, Pattern, Thresholds};
use crate::frames::{Frame, PerFrame};
use crate::ingest::{Outcome, Post, Registry, Structure};
use crate::stats::{
    self, balanced_sample, derive_seed, newcombe_diff_ci, star_level, stream_rng, PropDiffCI, StatsError,
    TTestResult, TTestVariant,
};

pub use cluster::{hierarchical_cluster, Dendrogram, Linkage, Merge};
pub use robustness::{robustness_run, RobustnessMode, RobustnessParams, RobustnessReport};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("no organizations with labeled posts")]
    NoOrgs,
    #[error("organization `{0}` has no labeled posts")]
    NoPosts(String),
    #[error("{outcome} group is empty for {frame} after balancing")]
    EmptyGroup { frame: Frame, outcome: Outcome },
    #[error("{frame}: {source}")]
    Stats {
        frame: Frame,
        #[source]
        source: StatsError,
    },
    #[error("nothing to cluster")]
    EmptyMatrix,
}

/// Median pooled frame proportion across down-sampling seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineDistribution {
    pub median: PerFrame<f64>,
    pub per_seed: Vec<PerFrame<f64>>,
    pub n_seeds: usize,
    /// Posts drawn from every org in each seed.
    pub floor: usize,
    pub n_orgs: usize,
}

/// Down-samples every org to the smallest org's post count, pools, and takes
/// the per-frame median proportion across seeds.
///
/// Per seed `s` the seed is `derive_seed(base_seed, "baseline/{s}")`; each
/// org (in id order) draws from its posts sorted by `post_id` with the
/// stream `"downsample/{org}"`.
pub fn baseline_frame_distribution(
    posts_by_org: &BTreeMap<String, Vec<Post>>,
    n_seeds: usize,
    base_seed: u64,
) -> Result<BaselineDistribution, AnalysisError> {
    if posts_by_org.is_empty() {
        return Err(AnalysisError::NoOrgs);
    }
    let mut labeled: BTreeMap<&str, Vec<&Post>> = BTreeMap::new();
    for (org, posts) in posts_by_org {
        let mut ps: Vec<&Post> = posts.iter().filter(|p| p.labels.is_some()).collect();
        if ps.is_empty() {
            return Err(AnalysisError::NoPosts(org.clone()));
        }
        ps.sort_by(|a, b| a.post_id.cmp(&b.post_id));
        labeled.insert(org, ps);
    }
    let floor = labeled.values().map(Vec::len).min().unwrap_or(0);
    let pooled_n = (floor * labeled.len()) as f64;

    let per_seed: Vec<PerFrame<f64>> = (0..n_seeds)
        .map(|s| {
            let seed = derive_seed(base_seed, &format!("baseline/{s}"));
            let mut hits = PerFrame::<usize>::default();
            for (org, posts) in &labeled {
                let mut rng = stream_rng(seed, &format!("downsample/{org}"));
                for i in index::sample(&mut rng, posts.len(), floor) {
                    let labels = posts[i].labels.as_ref().expect("filtered");
                    for f in Frame::ALL {
                        hits[f] += labels.get(f) as usize;
                    }
                }
            }
            hits.map(|_, &h| h as f64 / pooled_n)
        })
        .collect();

    let median = PerFrame::from_fn(|f| {
        let xs: Vec<f64> = per_seed.iter().map(|p| p[f]).collect();
        stats::median(&xs).unwrap_or(f64::NAN)
    });
    Ok(BaselineDistribution {
        median,
        per_seed,
        n_seeds,
        floor,
        n_orgs: labeled.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub org: String,
    pub structure: Option<Structure>,
    pub n_posts: usize,
    pub share: PerFrame<f64>,
    /// Percent difference over the baseline; `None` where the baseline is 0.
    pub deviation: PerFrame<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationMatrix {
    pub baseline: PerFrame<f64>,
    pub rows: Vec<DeviationRow>,
}

/// `100 · (share - baseline) / baseline`.
pub fn percent_deviation(share: f64, baseline: f64) -> Option<f64> {
    (baseline != 0.0).then(|| 100.0 * (share - baseline) / baseline)
}

/// Each org's share of posts per frame over all its labeled posts, relative
/// to the baseline.
pub fn union_deviation_matrix(
    posts_by_org: &BTreeMap<String, Vec<Post>>,
    baseline: &BaselineDistribution,
    registry: &Registry,
) -> DeviationMatrix {
    let rows = posts_by_org
        .iter()
        .filter_map(|(org, posts)| {
            let labels: Vec<_> = posts.iter().filter_map(|p| p.labels.as_ref()).collect();
            if labels.is_empty() {
                return None;
            }
            let n = labels.len() as f64;
            let share = PerFrame::from_fn(|f| labels.iter().filter(|l| l.get(f)).count() as f64 / n);
            Some(DeviationRow {
                org: org.clone(),
                structure: registry.structure(org),
                n_posts: labels.len(),
                deviation: share.map(|f, &s| percent_deviation(s, baseline.median[f])),
                share,
            })
        })
        .collect();
    DeviationMatrix {
        baseline: baseline.median,
        rows,
    }
}

/// Clusters the matrix rows on their deviation vectors (undefined entries
/// count as 0).
pub fn cluster_matrix(matrix: &DeviationMatrix, linkage: Linkage) -> Result<Dendrogram, AnalysisError> {
    let labels: Vec<String> = matrix.rows.iter().map(|r| r.org.clone()).collect();
    let points: Vec<Vec<f64>> = matrix
        .rows
        .iter()
        .map(|r| r.deviation.0.iter().map(|d| d.unwrap_or(0.0)).collect())
        .collect();
    hierarchical_cluster(&labels, &points, linkage)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameComparison {
    pub frame: Frame,
    /// Loss group is `a`, win group is `b`; `t` is loss minus win.
    pub test: TTestResult,
    pub stars: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreElectionReport {
    pub seed: u64,
    pub n_instances: usize,
    pub frames: Vec<FrameComparison>,
}

/// Compares detrended pre-election usage of lost and won cases on an
/// already selected subset.
pub fn compare_selected(
    instances: &[EventStudyInstance],
    selected: &[usize],
    variant: TTestVariant,
) -> Result<Vec<FrameComparison>, AnalysisError> {
    Frame::ALL
        .into_iter()
        .map(|frame| {
            let group = |outcome: Outcome| -> Vec<f64> {
                selected
                    .iter()
                    .map(|&i| &instances[i])
                    .filter(|inst| inst.outcome == outcome)
                    .filter_map(|inst| inst.frames[frame].u_b_d)
                    .collect()
            };
            let (loss, win) = (group(Outcome::Loss), group(Outcome::Win));
            for (xs, outcome) in [(&loss, Outcome::Loss), (&win, Outcome::Win)] {
                if xs.is_empty() {
                    return Err(AnalysisError::EmptyGroup { frame, outcome });
                }
            }
            let test = stats::t_test(&loss, &win, variant).map_err(|source| AnalysisError::Stats { frame, source })?;
            Ok(FrameComparison {
                frame,
                stars: star_level(test.p),
                test,
            })
        })
        .collect()
}

/// Balances wins and losses per org with `seed`, then compares detrended
/// pre-election usage per frame.
pub fn pre_election_comparison(
    instances: &[EventStudyInstance],
    seed: u64,
    variant: TTestVariant,
) -> Result<PreElectionReport, AnalysisError> {
    let selected = balanced_sample(instances, seed);
    Ok(PreElectionReport {
        seed,
        n_instances: selected.len(),
        frames: compare_selected(instances, &selected, variant)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternCell {
    pub frame: Frame,
    pub pattern: Pattern,
    pub k_loss: u64,
    pub n_loss: u64,
    pub k_win: u64,
    pub n_win: u64,
    pub prop_loss: f64,
    pub prop_win: f64,
    /// Loss minus win proportion.
    pub diff: f64,
    pub ci: PropDiffCI,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternTable {
    pub alpha: f64,
    /// Frame-major, patterns in decrease/stable/increase order.
    pub cells: Vec<PatternCell>,
    /// Instances without a pattern per (frame, outcome), excluded above.
    pub unclassified: BTreeMap<String, usize>,
}

impl PatternTable {
    pub fn cell(&self, frame: Frame, pattern: Pattern) -> Option<&PatternCell> {
        self.cells.iter().find(|c| c.frame == frame && c.pattern == pattern)
    }
}

/// Pattern prevalence among lost minus won instances with Newcombe
/// intervals, over an already selected subset.
pub fn pattern_table_selected(
    instances: &[EventStudyInstance],
    selected: &[usize],
    thresholds: &PerFrame<Option<Thresholds>>,
    alpha: f64,
) -> Result<PatternTable, AnalysisError> {
    let mut cells = Vec::with_capacity(15);
    let mut unclassified = BTreeMap::new();
    for frame in Frame::ALL {
        let mut counts: BTreeMap<(Outcome, Pattern), u64> = BTreeMap::new();
        for &i in selected {
            let inst = &instances[i];
            let pattern = classify_change(inst.frames[frame].offset, thresholds[frame]);
            *counts.entry((inst.outcome, pattern)).or_default() += 1;
        }
        let get = |o, p| counts.get(&(o, p)).copied().unwrap_or(0);
        for outcome in [Outcome::Loss, Outcome::Win] {
            unclassified.insert(
                format!("{frame}/{outcome}"),
                get(outcome, Pattern::Unclassified) as usize,
            );
        }
        let total = |o| Pattern::CLASSIFIED.iter().map(|&p| get(o, p)).sum::<u64>();
        let (n_loss, n_win) = (total(Outcome::Loss), total(Outcome::Win));
        for (n, outcome) in [(n_loss, Outcome::Loss), (n_win, Outcome::Win)] {
            if n == 0 {
                return Err(AnalysisError::EmptyGroup { frame, outcome });
            }
        }
        for pattern in Pattern::CLASSIFIED {
            let (k_loss, k_win) = (get(Outcome::Loss, pattern), get(Outcome::Win, pattern));
            let ci = newcombe_diff_ci(k_loss, n_loss, k_win, n_win, alpha)
                .map_err(|source| AnalysisError::Stats { frame, source })?;
            cells.push(PatternCell {
                frame,
                pattern,
                k_loss,
                n_loss,
                k_win,
                n_win,
                prop_loss: k_loss as f64 / n_loss as f64,
                prop_win: k_win as f64 / n_win as f64,
                diff: ci.d,
                significant: ci.significant(),
                ci,
            });
        }
    }
    Ok(PatternTable {
        alpha,
        cells,
        unclassified,
    })
}

/// Balances with `seed`, then tabulates change patterns.
pub fn prepost_pattern_table(
    instances: &[EventStudyInstance],
    thresholds: &PerFrame<Option<Thresholds>>,
    seed: u64,
    alpha: f64,
) -> Result<PatternTable, AnalysisError> {
    let selected = balanced_sample(instances, seed);
    pattern_table_selected(instances, &selected, thresholds, alpha)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::eventstudy::FrameScores;
    use crate::frames::FrameLabels;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
    }

    fn posts_for(org: &str, n: usize, frames: impl Fn(usize) -> Vec<Frame>) -> Vec<Post> {
        (0..n)
            .map(|i| {
                Post::new(&format!("{org}-{i:05}"), org, date(), "")
                    .with_labels(FrameLabels::from_frames(frames(i)))
            })
            .collect()
    }

    #[test]
    fn baseline_all_framed_is_one() {
        let mut by_org = BTreeMap::new();
        by_org.insert("A".to_string(), posts_for("A", 30, |_| vec![Frame::Diagnostic]));
        by_org.insert("B".to_string(), posts_for("B", 10, |_| vec![Frame::Diagnostic]));
        let b = baseline_frame_distribution(&by_org, 5, 1).unwrap();
        assert_eq!(b.median[Frame::Diagnostic], 1.0);
        assert_eq!(b.median[Frame::Community], 0.0);
        assert_eq!(b.floor, 10);
    }

    #[test]
    fn baseline_replays_documented_sampling() {
        let mut by_org = BTreeMap::new();
        by_org.insert("A".to_string(), posts_for("A", 100, |i| if i % 3 == 0 { vec![Frame::Prognostic] } else { vec![] }));
        by_org.insert("B".to_string(), posts_for("B", 50, |i| if i % 2 == 0 { vec![Frame::Prognostic] } else { vec![] }));
        let base_seed = 99;
        let got = baseline_frame_distribution(&by_org, 5, base_seed).unwrap();

        // replay: 50 posts from A (sampled) + all 50 of B per seed
        let mut per_seed = Vec::new();
        for s in 0..5 {
            let seed = derive_seed(base_seed, &format!("baseline/{s}"));
            let mut hits = 0;
            for org in ["A", "B"] {
                let posts = &by_org[org];
                let mut rng = stream_rng(seed, &format!("downsample/{org}"));
                for i in index::sample(&mut rng, posts.len(), 50) {
                    hits += posts[i].labels.unwrap().prognostic as usize;
                }
            }
            per_seed.push(hits as f64 / 100.0);
        }
        for (s, v) in per_seed.iter().enumerate() {
            assert_eq!(got.per_seed[s][Frame::Prognostic], *v);
        }
        let mut sorted = per_seed.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(got.median[Frame::Prognostic], sorted[2]);
        // all of B is always drawn: 25 hits
        assert!(per_seed.iter().all(|&v| v >= 0.25));
    }

    #[test]
    fn baseline_errors() {
        assert!(matches!(baseline_frame_distribution(&BTreeMap::new(), 5, 1), Err(AnalysisError::NoOrgs)));
        let mut by_org = BTreeMap::new();
        by_org.insert("A".to_string(), vec![Post::new("1", "A", date(), "")]);
        assert!(matches!(baseline_frame_distribution(&by_org, 5, 1), Err(AnalysisError::NoPosts(_))));
    }

    #[test]
    fn deviation_examples() {
        assert!((percent_deviation(0.818, 0.409).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(percent_deviation(0.3, 0.3), Some(0.0));
        assert!((percent_deviation(0.2045, 0.409).unwrap() + 50.0).abs() < 1e-9);
        assert_eq!(percent_deviation(0.0, 0.4), Some(-100.0));
        assert_eq!(percent_deviation(0.1, 0.0), None);
    }

    #[test]
    fn deviation_matrix_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut by_org = BTreeMap::new();
        for org in ["A", "B", "C"] {
            let posts: Vec<Post> = (0..30)
                .map(|i| {
                    let frames: Vec<Frame> = Frame::ALL.into_iter().filter(|_| rng.random_bool(0.3)).collect();
                    Post::new(&format!("{org}{i}"), org, date(), "").with_labels(FrameLabels::from_frames(frames))
                })
                .collect();
            by_org.insert(org.to_string(), posts);
        }
        let baseline = baseline_frame_distribution(&by_org, 5, 3).unwrap();
        let m = union_deviation_matrix(&by_org, &baseline, &Registry::default());
        for row in &m.rows {
            let posts = &by_org[&row.org];
            for f in Frame::ALL {
                let hits = posts.iter().filter(|p| p.labels.unwrap().get(f)).count();
                let share = hits as f64 / posts.len() as f64;
                let want = 100.0 * (share - baseline.median[f]) / baseline.median[f];
                assert!((row.deviation[f].unwrap() - want).abs() < 1e-9);
            }
        }
    }

    pub(crate) fn instance(case: &str, org: &str, outcome: Outcome, u_b_d: f64, offset: f64) -> EventStudyInstance {
        let scores = FrameScores {
            u_b: Some(u_b_d),
            u_a: Some(u_b_d + offset),
            u_b_baseline: Some(0.0),
            u_a_baseline: Some(0.0),
            u_b_d: Some(u_b_d),
            u_a_d: Some(u_b_d + offset),
            offset: Some(offset),
            pattern: Pattern::Unclassified,
        };
        EventStudyInstance {
            case_id: case.into(),
            org: org.into(),
            outcome,
            election_date: date(),
            n_pseudo_events: 3,
            frames: PerFrame::from_fn(|_| scores),
        }
    }

    fn noisy_instances(seed: u64, win_shift: f64, n_per_org: usize) -> Vec<EventStudyInstance> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for org in ["A", "B", "C", "D"] {
            for i in 0..n_per_org {
                for outcome in [Outcome::Win, Outcome::Loss] {
                    let shift = if outcome == Outcome::Win { win_shift } else { 0.0 };
                    out.push(instance(
                        &format!("{org}-{outcome}-{i}"),
                        org,
                        outcome,
                        shift + rng.random::<f64>() * 0.2 - 0.1,
                        rng.random::<f64>() - 0.5,
                    ));
                }
            }
        }
        out
    }

    #[test]
    fn separated_groups_get_three_stars() {
        let inst = noisy_instances(1, 0.1, 60);
        let r = pre_election_comparison(&inst, 7, TTestVariant::Welch).unwrap();
        for c in &r.frames {
            assert_eq!(c.stars, 3);
            assert!(c.test.b.mean > c.test.a.mean);
            assert!(c.test.t < 0.0);
        }
    }

    #[test]
    fn comparison_ignores_input_order() {
        let inst = noisy_instances(2, 0.0, 20);
        let mut rev = inst.clone();
        rev.reverse();
        let a = pre_election_comparison(&inst, 3, TTestVariant::Welch).unwrap();
        let b = pre_election_comparison(&rev, 3, TTestVariant::Welch).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn null_groups_rarely_starred() {
        let runs = 200;
        let mut hits = 0;
        for s in 0..runs {
            let inst = noisy_instances(1000 + s, 0.0, 15);
            let r = pre_election_comparison(&inst, s, TTestVariant::Welch).unwrap();
            hits += (r.frames[0].stars > 0) as usize;
        }
        let rate = hits as f64 / runs as f64;
        assert!(rate < 0.1, "false-positive rate {rate}");
    }

    #[test]
    fn empty_group_is_error() {
        let inst: Vec<_> = (0..5).map(|i| instance(&i.to_string(), "A", Outcome::Win, 0.1, 0.0)).collect();
        assert!(matches!(
            pre_election_comparison(&inst, 1, TTestVariant::Welch),
            Err(AnalysisError::EmptyGroup { .. })
        ));
    }

    fn thresholds(p25: f64, p75: f64) -> PerFrame<Option<Thresholds>> {
        PerFrame::from_fn(|_| Some(Thresholds { p25, p75 }))
    }

    #[test]
    fn identical_distributions_give_zero_differences() {
        let mut inst = Vec::new();
        for (i, o) in [-0.5, 0.0, 0.0, 0.5].iter().enumerate() {
            inst.push(instance(&format!("w{i}"), "A", Outcome::Win, 0.0, *o));
            inst.push(instance(&format!("l{i}"), "A", Outcome::Loss, 0.0, *o));
        }
        let t = prepost_pattern_table(&inst, &thresholds(-0.1, 0.1), 1, 0.05).unwrap();
        assert_eq!(t.cells.len(), 15);
        for c in &t.cells {
            assert_eq!(c.diff, 0.0);
            assert!(!c.significant);
        }
    }

    #[test]
    fn extreme_patterns_significant() {
        let mut inst = Vec::new();
        for i in 0..50 {
            inst.push(instance(&format!("l{i:02}"), "A", Outcome::Loss, 0.0, 1.0));
            inst.push(instance(&format!("w{i:02}"), "A", Outcome::Win, 0.0, -1.0));
        }
        let t = prepost_pattern_table(&inst, &thresholds(-0.1, 0.1), 1, 0.05).unwrap();
        let inc = t.cell(Frame::Motivational, Pattern::Increase).unwrap();
        assert_eq!(inc.diff, 1.0);
        assert!(inc.significant);
        let dec = t.cell(Frame::Motivational, Pattern::Decrease).unwrap();
        assert_eq!(dec.diff, -1.0);
        assert!(dec.significant);
        let stable = t.cell(Frame::Motivational, Pattern::Stable).unwrap();
        assert_eq!(stable.diff, 0.0);
        assert!(!stable.significant);
    }

    #[test]
    fn unclassified_excluded_from_denominators() {
        let mut inst = vec![
            instance("l0", "A", Outcome::Loss, 0.0, 0.0),
            instance("l1", "A", Outcome::Loss, 0.0, 0.5),
            instance("w0", "A", Outcome::Win, 0.0, 0.0),
            instance("w1", "A", Outcome::Win, 0.0, -0.5),
        ];
        inst[1].frames[Frame::Diagnostic].offset = None;
        let t = prepost_pattern_table(&inst, &thresholds(-0.1, 0.1), 1, 0.05).unwrap();
        let cells: Vec<_> = t.cells.iter().filter(|c| c.frame == Frame::Diagnostic).collect();
        assert!(cells.iter().all(|c| c.n_loss == 1 && c.n_win == 2));
        let sum: f64 = cells.iter().map(|c| c.prop_loss).sum();
        assert_eq!(sum, 1.0);
        assert_eq!(t.unclassified["diagnostic/loss"], 1);
    }
}
