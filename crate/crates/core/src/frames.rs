//! Five-frame label schema, a lexicon baseline labeler and the adapter for
//! externally produced label files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::ops::{Index, IndexMut};
use std::path::Path;
use std::str::FromStr;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::ingest::{LineReject, Post};

#[derive(Debug, thiserror::Error)]
pub enum FramesError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed lexicon: {0}")]
    Lexicon(String),
    #[error("lexicon is missing frame `{0}`")]
    MissingFrame(&'static str),
    #[error("invalid lexicon pattern for {frame}: {source}")]
    Pattern {
        frame: &'static str,
        #[source]
        source: regex::Error,
    },
    #[error("duplicate label for post_id `{0}`")]
    DuplicateLabel(String),
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
}

/// One of the five collective-action discourse frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Identifying problems and attributing responsibility.
    Diagnostic,
    /// Advancing solutions and strategies for change.
    Prognostic,
    /// Encouraging participation through calls to action.
    Motivational,
    /// Fostering solidarity and collective identity.
    Community,
    /// Promoting interaction and audience involvement.
    Engagement,
}

impl Frame {
    pub const ALL: [Frame; 5] = [
        Frame::Diagnostic,
        Frame::Prognostic,
        Frame::Motivational,
        Frame::Community,
        Frame::Engagement,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            Frame::Diagnostic => "diagnostic",
            Frame::Prognostic => "prognostic",
            Frame::Motivational => "motivational",
            Frame::Community => "community",
            Frame::Engagement => "engagement",
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Frame {
    type Err = FramesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Frame::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FramesError::UnknownFrame(s.to_string()))
    }
}

/// A value per core frame, indexable by [`Frame`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerFrame<T>(pub [T; 5]);

impl<T> PerFrame<T> {
    pub fn from_fn(mut f: impl FnMut(Frame) -> T) -> Self {
        PerFrame(Frame::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Frame, &T)> {
        Frame::ALL.into_iter().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(Frame, &T) -> U) -> PerFrame<U> {
        PerFrame::from_fn(|frame| f(frame, &self.0[frame.index()]))
    }
}

impl<T> Index<Frame> for PerFrame<T> {
    type Output = T;
    fn index(&self, frame: Frame) -> &T {
        &self.0[frame.index()]
    }
}

impl<T> IndexMut<Frame> for PerFrame<T> {
    fn index_mut(&mut self, frame: Frame) -> &mut T {
        &mut self.0[frame.index()]
    }
}

/// Multi-label frame annotation of a post.
///
/// `political_endorsement` is carried through I/O untouched and never used by
/// any analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameLabels {
    pub diagnostic: bool,
    pub prognostic: bool,
    pub motivational: bool,
    pub community: bool,
    pub engagement: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub political_endorsement: Option<bool>,
}

impl FrameLabels {
    pub fn get(&self, frame: Frame) -> bool {
        match frame {
            Frame::Diagnostic => self.diagnostic,
            Frame::Prognostic => self.prognostic,
            Frame::Motivational => self.motivational,
            Frame::Community => self.community,
            Frame::Engagement => self.engagement,
        }
    }

    pub fn set(&mut self, frame: Frame, value: bool) {
        match frame {
            Frame::Diagnostic => self.diagnostic = value,
            Frame::Prognostic => self.prognostic = value,
            Frame::Motivational => self.motivational = value,
            Frame::Community => self.community = value,
            Frame::Engagement => self.engagement = value,
        }
    }

    pub fn from_frames(frames: impl IntoIterator<Item = Frame>) -> Self {
        let mut labels = FrameLabels::default();
        for f in frames {
            labels.set(f, true);
        }
        labels
    }

    /// True when at least one core frame is present.
    pub fn any(&self) -> bool {
        Frame::ALL.iter().any(|&f| self.get(f))
    }
}

/// Phrase lists per frame, compiled into one matcher per frame.
///
/// Entries are literal phrases matched case-insensitively on word
/// boundaries. An entry prefixed with `re:` is used as a raw regular
/// expression instead.
#[derive(Debug, Clone)]
pub struct Lexicon {
    phrases: PerFrame<Vec<String>>,
    matchers: PerFrame<Option<Regex>>,
}

const BUILTIN_LEXICON: &str = include_str!("../../../data/lexicon.json");

impl Lexicon {
    pub fn new(phrases: PerFrame<Vec<String>>) -> Result<Self, FramesError> {
        let mut matchers = PerFrame::from_fn(|_| None);
        for (frame, list) in phrases.iter() {
            if list.is_empty() {
                continue;
            }
            let alternatives: Vec<String> = list.iter().map(|p| phrase_pattern(p)).collect();
            let re = RegexBuilder::new(&alternatives.join("|"))
                .case_insensitive(true)
                .build()
                .map_err(|source| FramesError::Pattern {
                    frame: frame.name(),
                    source,
                })?;
            matchers[frame] = Some(re);
        }
        Ok(Lexicon { phrases, matchers })
    }

    /// Parses `{"diagnostic":[...], ...}`. Every core frame must be present;
    /// other keys (e.g. `political_endorsement`) are ignored.
    pub fn from_json(json: &str) -> Result<Self, FramesError> {
        let raw: HashMap<String, Vec<String>> =
            serde_json::from_str(json).map_err(|e| FramesError::Lexicon(e.to_string()))?;
        let mut phrases: PerFrame<Vec<String>> = PerFrame::default();
        for frame in Frame::ALL {
            phrases[frame] = raw
                .get(frame.name())
                .cloned()
                .ok_or(FramesError::MissingFrame(frame.name()))?;
        }
        Lexicon::new(phrases)
    }

    pub fn load(path: &Path) -> Result<Self, FramesError> {
        let text = std::fs::read_to_string(path).map_err(|source| FramesError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::from_json(&text)
    }

    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Lexicon::from_json(BUILTIN_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn phrases(&self, frame: Frame) -> &[String] {
        &self.phrases[frame]
    }

    pub fn classify_text(&self, text: &str) -> FrameLabels {
        let mut labels = FrameLabels::default();
        if text.is_empty() {
            return labels;
        }
        for (frame, matcher) in self.matchers.iter() {
            if let Some(re) = matcher {
                labels.set(frame, re.is_match(text));
            }
        }
        labels
    }
}

fn phrase_pattern(entry: &str) -> String {
    if let Some(raw) = entry.strip_prefix("re:") {
        return format!("(?:{raw})");
    }
    let phrase = entry.trim();
    let starts_word = phrase.chars().next().is_some_and(is_word_char);
    let ends_word = phrase.chars().last().is_some_and(is_word_char);
    format!(
        "{}{}{}",
        if starts_word { r"\b" } else { "" },
        regex::escape(phrase),
        if ends_word { r"\b" } else { "" }
    )
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Labels a post from its text alone.
pub fn classify_lexicon(post: &Post, lexicon: &Lexicon) -> FrameLabels {
    lexicon.classify_text(&post.text)
}

/// One row of a labels JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub post_id: String,
    pub labels: FrameLabels,
}

#[derive(Debug, Clone, Default)]
pub struct LabelRows {
    pub rows: Vec<LabelRow>,
    pub rejects: Vec<LineReject>,
}

pub fn load_label_rows(path: &Path) -> Result<LabelRows, FramesError> {
    let file = std::fs::File::open(path).map_err(|source| FramesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = LabelRows::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| FramesError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LabelRow>(&line) {
            Ok(row) => out.rows.push(row),
            Err(e) => out.rejects.push(LineReject {
                line: i + 1,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AttachReport {
    /// Label rows whose post_id matched no post.
    pub unmatched_label_ids: Vec<String>,
    /// Posts left without labels.
    pub unlabeled_post_ids: Vec<String>,
    pub attached: usize,
}

/// Attaches externally produced labels to posts by `post_id`.
///
/// Text, dates and post count are never modified. Posts without a matching
/// row keep whatever labels they had (usually none) and are reported.
pub fn attach_labels(
    mut posts: Vec<Post>,
    rows: &[LabelRow],
) -> Result<(Vec<Post>, AttachReport), FramesError> {
    let mut by_id: BTreeMap<&str, &FrameLabels> = BTreeMap::new();
    for row in rows {
        if by_id.insert(row.post_id.as_str(), &row.labels).is_some() {
            return Err(FramesError::DuplicateLabel(row.post_id.clone()));
        }
    }

    let mut report = AttachReport::default();
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for post in posts.iter_mut() {
        match by_id.get_key_value(post.post_id.as_str()) {
            Some((&id, labels)) => {
                post.labels = Some(**labels);
                seen.insert(id);
                report.attached += 1;
            }
            None => report.unlabeled_post_ids.push(post.post_id.clone()),
        }
    }
    report.unmatched_label_ids = by_id
        .keys()
        .filter(|id| !seen.contains(*id))
        .map(|id| id.to_string())
        .collect();
    Ok((posts, report))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FrameCoverage {
    pub n_total: usize,
    pub n_labeled: usize,
    pub n_any_frame: usize,
    pub per_frame: BTreeMap<Frame, usize>,
}

pub fn frame_coverage(posts: &[Post]) -> FrameCoverage {
    let mut cov = FrameCoverage {
        n_total: posts.len(),
        per_frame: Frame::ALL.iter().map(|&f| (f, 0)).collect(),
        ..Default::default()
    };
    for labels in posts.iter().filter_map(|p| p.labels.as_ref()) {
        cov.n_labeled += 1;
        if labels.any() {
            cov.n_any_frame += 1;
        }
        for f in Frame::ALL {
            if labels.get(f) {
                *cov.per_frame.get_mut(&f).unwrap() += 1;
            }
        }
    }
    cov
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn post(id: &str, text: &str) -> Post {
        Post::new(id, "CWA", NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), text)
    }

    fn lexicon() -> Lexicon {
        let mut phrases: PerFrame<Vec<String>> = PerFrame::default();
        phrases[Frame::Motivational] = vec!["picket line".into(), "sign the petition".into()];
        phrases[Frame::Community] = vec!["solidarity".into(), "#UnionStrong".into()];
        phrases[Frame::Diagnostic] = vec!["unfair".into()];
        Lexicon::new(phrases).unwrap()
    }

    #[test]
    fn direct_phrase_hit() {
        let labels = classify_lexicon(&post("1", "Join the picket line tomorrow!"), &lexicon());
        assert!(labels.motivational);
        assert!(!labels.diagnostic && !labels.community);
    }

    #[test]
    fn empty_text_is_all_false() {
        let labels = classify_lexicon(&post("1", ""), &lexicon());
        assert_eq!(labels, FrameLabels::default());
        assert!(!labels.any());
    }

    #[test]
    fn two_frames_both_true() {
        let labels = classify_lexicon(
            &post("1", "Unfair schedules again. SOLIDARITY with the night shift."),
            &lexicon(),
        );
        assert!(labels.diagnostic && labels.community);
        assert!(!labels.motivational);
    }

    #[test]
    fn word_boundaries_respected() {
        let lex = lexicon();
        assert!(!lex.classify_text("an unfairness").diagnostic);
        assert!(lex.classify_text("stay #unionstrong today").community);
    }

    #[test]
    fn raw_regex_entries() {
        let mut phrases: PerFrame<Vec<String>> = PerFrame::default();
        phrases[Frame::Engagement] = vec![r"re:\bshare\s+(this|now)\b".into()];
        let lex = Lexicon::new(phrases).unwrap();
        assert!(lex.classify_text("Please SHARE   this post").engagement);
        assert!(!lex.classify_text("shareholders").engagement);
    }

    #[test]
    fn lexicon_json_requires_every_frame() {
        let err = Lexicon::from_json(r#"{"diagnostic":[],"prognostic":[]}"#).unwrap_err();
        assert!(matches!(err, FramesError::MissingFrame("motivational")));
        let ok = Lexicon::from_json(
            r#"{"diagnostic":["a"],"prognostic":[],"motivational":[],"community":[],"engagement":[],"political_endorsement":["vote"]}"#,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn builtin_lexicon_loads() {
        let lex = Lexicon::builtin();
        for f in Frame::ALL {
            assert!(!lex.phrases(f).is_empty(), "{f} has no phrases");
        }
    }

    fn row(id: &str, frames: &[Frame]) -> LabelRow {
        LabelRow {
            post_id: id.into(),
            labels: FrameLabels::from_frames(frames.iter().copied()),
        }
    }

    #[test]
    fn attach_all_matching() {
        let posts = vec![post("a", "x"), post("b", "y"), post("c", "z")];
        let rows = vec![
            row("a", &[Frame::Diagnostic]),
            row("b", &[]),
            row("c", &[Frame::Community]),
        ];
        let (out, report) = attach_labels(posts.clone(), &rows).unwrap();
        assert_eq!(report.attached, 3);
        assert!(report.unmatched_label_ids.is_empty());
        assert!(report.unlabeled_post_ids.is_empty());
        for (before, after) in posts.iter().zip(&out) {
            assert_eq!(before.text, after.text);
            assert_eq!(before.date, after.date);
        }
        assert!(out[0].labels.unwrap().diagnostic);
    }

    #[test]
    fn attach_reports_unknown_ids() {
        let posts = vec![post("a", "x"), post("b", "y")];
        let rows = vec![row("a", &[Frame::Diagnostic]), row("zzz", &[])];
        let (out, report) = attach_labels(posts, &rows).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(report.unmatched_label_ids, vec!["zzz".to_string()]);
        assert_eq!(report.unlabeled_post_ids, vec!["b".to_string()]);
    }

    #[test]
    fn attach_rejects_duplicates() {
        let rows = vec![row("a", &[]), row("a", &[Frame::Engagement])];
        let err = attach_labels(vec![post("a", "x")], &rows).unwrap_err();
        assert!(err.to_string().contains("duplicate label"));
    }

    #[test]
    fn coverage_counts() {
        let mut posts = vec![post("a", ""), post("b", "")];
        posts[0].labels = Some(FrameLabels::default());
        posts[1].labels = Some(FrameLabels::default());
        assert_eq!(frame_coverage(&posts).n_any_frame, 0);

        posts[1].labels = Some(FrameLabels::from_frames([Frame::Diagnostic]));
        let cov = frame_coverage(&posts);
        assert_eq!(cov.n_any_frame, 1);
        assert_eq!(cov.per_frame[&Frame::Diagnostic], 1);
        assert_eq!(cov.per_frame[&Frame::Community], 0);
    }

    #[test]
    fn labels_serde_keeps_endorsement_slot() {
        let json = r#"{"diagnostic":true,"prognostic":false,"motivational":false,"community":true,"engagement":false,"political_endorsement":true}"#;
        let labels: FrameLabels = serde_json::from_str(json).unwrap();
        assert_eq!(labels.political_endorsement, Some(true));
        assert_eq!(serde_json::to_string(&labels).unwrap(), json);
    }

    #[test]
    fn frame_parse_roundtrip() {
        for f in Frame::ALL {
            assert_eq!(f.name().parse::<Frame>().unwrap(), f);
        }
        assert!("political_endorsement".parse::<Frame>().is_err());
    }
}
