//! Synthetic corpora with known injected effects.
//!
//! Each org gets `cases_per_org` single-union elections placed one per
//! equal-length slot across the study range, and a Poisson number of posts
//! per day. Every post carries independent Bernoulli frame labels; the
//! probability of a frame is shifted by `delta` on posts dated inside an
//! effect's event-relative day range of an election with the effect's
//! outcome.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::frames::{Frame, FrameLabels, Lexicon, PerFrame};
use crate::ingest::{IngestError, Outcome, OutcomeInstance, Post, Registry, StudyRange};
use crate::stats::stream_rng;

/// Additive label-probability shift on posts `days.0..=days.1` days after
/// elections with `outcome` (negative days precede the election).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub outcome: Outcome,
    pub frame: Frame,
    pub days: (i64, i64),
    pub delta: f64,
}

impl Effect {
    pub fn pre(outcome: Outcome, frame: Frame, delta: f64) -> Self {
        Effect {
            outcome,
            frame,
            days: (-7, -3),
            delta,
        }
    }

    pub fn post(outcome: Outcome, frame: Frame, delta: f64) -> Self {
        Effect {
            outcome,
            frame,
            days: (3, 7),
            delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_orgs: usize,
    pub study_range: StudyRange,
    /// Mean posts per org per day.
    pub post_rate: f64,
    pub base_probs: PerFrame<f64>,
    pub cases_per_org: usize,
    pub win_fraction: f64,
    /// Minimum distance in days between an election and its slot's edges.
    pub slot_margin: i64,
    pub effects: Vec<Effect>,
    /// Fill post text with lexicon phrases matching the labels.
    pub with_text: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_orgs: 40,
            study_range: StudyRange::reference_period(),
            post_rate: 1.0,
            base_probs: PerFrame([0.40, 0.30, 0.25, 0.20, 0.15]),
            cases_per_org: 50,
            win_fraction: 0.5,
            slot_margin: 10,
            effects: Vec::new(),
            with_text: false,
            seed: 0,
        }
    }
}

/// One row of the generated elections CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionRow {
    pub case_id: String,
    pub election_date: NaiveDate,
    pub union_raw: String,
    pub is_winner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrgTruth {
    pub org: String,
    pub raw_name: String,
    pub n_posts: usize,
    pub wins: usize,
    pub losses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthManifest {
    pub config: ScenarioConfig,
    pub effects: Vec<Effect>,
    pub n_posts: usize,
    pub n_cases: usize,
    pub orgs: Vec<OrgTruth>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    /// Sorted by `post_id`.
    pub posts: Vec<Post>,
    /// Sorted by (case_id, union_raw).
    pub elections: Vec<ElectionRow>,
    /// Ground-truth outcome per tracked org and case.
    pub outcomes: Vec<OutcomeInstance>,
    pub manifest: SynthManifest,
}

/// Canonical id and raw election name per org: registry unions first, then
/// generated ones.
fn org_names(n: usize) -> Vec<(String, String)> {
    let reg = Registry::builtin();
    let mut names: Vec<(String, String)> = reg
        .entries
        .values()
        .map(|e| (e.canonical_id.clone(), e.full_name.clone()))
        .collect();
    let mut i = 0;
    while names.len() < n {
        i += 1;
        names.push((format!("SYN{i:03}"), format!("SYN{i:03}")));
    }
    names.truncate(n);
    names
}

/// Phrase per frame that the builtin lexicon assigns to that frame only.
fn frame_phrases(lexicon: &Lexicon) -> PerFrame<Option<String>> {
    PerFrame::from_fn(|f| {
        lexicon
            .phrases(f)
            .iter()
            .filter(|p| !p.starts_with("re:"))
            .find(|p| lexicon.classify_text(p) == FrameLabels::from_frames([f]))
            .cloned()
    })
}

const FILLER: &str = "update from the local";

fn check(config: &ScenarioConfig, warnings: &mut Vec<String>) -> i64 {
    let n_days = config.study_range.n_days();
    let slot = if config.cases_per_org == 0 {
        n_days
    } else {
        n_days / config.cases_per_org as i64
    };
    if slot < 2 * config.slot_margin + 1 {
        warnings.push(format!(
            "slots of {slot} days cannot keep a {}-day margin; elections placed at slot centers",
            config.slot_margin
        ));
    }
    if slot < 2 * 18 {
        warnings.push(format!(
            "elections every {slot} days leave little room for 18-day baseline spans"
        ));
    }
    for (name, p) in Frame::ALL.iter().map(|f| (f.name(), config.base_probs[*f])) {
        if !(0.0..=1.0).contains(&p) {
            warnings.push(format!("{name} probability {p} clamped to [0, 1]"));
        }
    }
    for e in &config.effects {
        if e.days.0 > e.days.1 {
            warnings.push(format!("effect on {} has empty day range {:?}", e.frame, e.days));
        }
        let shifted = config.base_probs[e.frame] + e.delta;
        if !(0.0..=1.0).contains(&shifted) {
            warnings.push(format!("{} probability with shift {shifted} clamped to [0, 1]", e.frame));
        }
    }
    if !(config.post_rate.is_finite() && config.post_rate >= 0.0) {
        warnings.push(format!("post rate {} treated as 0", config.post_rate));
    }
    slot.max(1)
}

/// Deterministic in `config.seed`; orgs draw from independent streams.
pub fn generate_scenario(config: &ScenarioConfig) -> Scenario {
    let mut warnings = Vec::new();
    let slot = check(config, &mut warnings);
    let start = config.study_range.start;
    let n_days = config.study_range.n_days();
    let phrases = config.with_text.then(|| frame_phrases(&Lexicon::builtin()));
    let rate = if config.post_rate.is_finite() && config.post_rate > 0.0 {
        Some(Poisson::new(config.post_rate).expect("positive rate"))
    } else {
        None
    };

    let per_org: Vec<_> = org_names(config.n_orgs)
        .into_par_iter()
        .enumerate()
        .map(|(oi, (org, raw))| {
            let mut rng = stream_rng(config.seed, &format!("synth/elections/{org}"));
            let n_cases = config.cases_per_org;
            let n_wins = (config.win_fraction.clamp(0.0, 1.0) * n_cases as f64).round() as usize;
            let mut outcomes: Vec<Outcome> = (0..n_cases)
                .map(|i| if i < n_wins { Outcome::Win } else { Outcome::Loss })
                .collect();
            outcomes.shuffle(&mut rng);

            let mut elections = Vec::with_capacity(n_cases);
            let mut truth = Vec::with_capacity(n_cases);
            // day index -> (outcome, days relative to election)
            let mut near: BTreeMap<i64, (Outcome, i64)> = BTreeMap::new();
            for (k, &outcome) in outcomes.iter().enumerate() {
                let lo = k as i64 * slot;
                let day = if slot > 2 * config.slot_margin {
                    lo + rng.random_range(config.slot_margin..=slot - 1 - config.slot_margin)
                } else {
                    lo + slot / 2
                }
                .min(n_days - 1);
                let date = start + Duration::days(day);
                let case_id = format!("{:02}-RC-{:06}", oi + 1, k + 1);
                elections.push(ElectionRow {
                    case_id: case_id.clone(),
                    election_date: date,
                    union_raw: format!("{raw} Local {}", 100 + k),
                    is_winner: outcome == Outcome::Win,
                });
                truth.push(OutcomeInstance {
                    case_id,
                    org: org.clone(),
                    outcome,
                    election_date: date,
                });
                for e in config.effects.iter().filter(|e| e.outcome == outcome) {
                    for rel in e.days.0..=e.days.1 {
                        near.entry(day + rel).or_insert((outcome, rel));
                    }
                }
            }

            let mut rng = stream_rng(config.seed, &format!("synth/posts/{org}"));
            let mut posts = Vec::new();
            for day in 0..n_days {
                let n = rate.as_ref().map_or(0, |r| r.sample(&mut rng) as u64);
                if n == 0 {
                    continue;
                }
                let date = start + Duration::days(day);
                let mut probs = config.base_probs;
                if let Some(&(outcome, rel)) = near.get(&day) {
                    for e in &config.effects {
                        if e.outcome == outcome && (e.days.0..=e.days.1).contains(&rel) {
                            probs[e.frame] += e.delta;
                        }
                    }
                }
                for j in 0..n {
                    let labels = FrameLabels::from_frames(
                        Frame::ALL
                            .into_iter()
                            .filter(|&f| rng.random::<f64>() < probs[f].clamp(0.0, 1.0)),
                    );
                    let text = match &phrases {
                        Some(ph) => {
                            let mut parts: Vec<&str> = Frame::ALL
                                .into_iter()
                                .filter(|&f| labels.get(f))
                                .filter_map(|f| ph[f].as_deref())
                                .collect();
                            parts.push(FILLER);
                            parts.join(". ")
                        }
                        None => String::new(),
                    };
                    let id = format!("{org}-{}-{j:02}", date.format("%Y%m%d"));
                    posts.push(Post::new(&id, &org, date, &text).with_labels(labels));
                }
            }
            let wins = outcomes.iter().filter(|&&o| o == Outcome::Win).count();
            let info = OrgTruth {
                org,
                raw_name: raw,
                n_posts: posts.len(),
                wins,
                losses: n_cases - wins,
            };
            (posts, elections, truth, info)
        })
        .collect();

    let mut posts = Vec::new();
    let mut elections = Vec::new();
    let mut outcomes = Vec::new();
    let mut orgs = Vec::new();
    for (p, e, t, info) in per_org {
        posts.extend(p);
        elections.extend(e);
        outcomes.extend(t);
        orgs.push(info);
    }
    posts.sort_by(|a, b| a.post_id.cmp(&b.post_id));
    elections.sort_by(|a, b| (&a.case_id, &a.union_raw).cmp(&(&b.case_id, &b.union_raw)));
    outcomes.sort_by(|a, b| (&a.case_id, &a.org).cmp(&(&b.case_id, &b.org)));
    let manifest = SynthManifest {
        config: config.clone(),
        effects: config.effects.clone(),
        n_posts: posts.len(),
        n_cases: elections.len(),
        orgs,
        warnings,
    };
    Scenario {
        posts,
        elections,
        outcomes,
        manifest,
    }
}

pub fn write_elections_csv<W: Write>(w: W, rows: &[ElectionRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `posts.jsonl`, `elections.csv` and `synth_manifest.json` into `dir`.
pub fn write_scenario(scenario: &Scenario, dir: &Path) -> Result<(), IngestError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| IngestError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    crate::ingest::write_posts(&scenario.posts, &dir.join("posts.jsonl"))?;
    let path = dir.join("elections.csv");
    let file = std::fs::File::create(&path).map_err(io(&path))?;
    write_elections_csv(std::io::BufWriter::new(file), &scenario.elections).map_err(|source| IngestError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let path = dir.join("synth_manifest.json");
    let file = std::fs::File::create(&path).map_err(io(&path))?;
    crate::analysis::report::write_json(std::io::BufWriter::new(file), &scenario.manifest).map_err(io(&path))
}
