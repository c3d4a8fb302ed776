//! Election-case and post file parsing, organization-name canonicalization
//! and per-organization outcome derivation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::frames::FrameLabels;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("rule {index}: invalid pattern `{pattern}`: {source}")]
    BadRule {
        index: usize,
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("rule {index}: {reason}")]
    InvalidRule { index: usize, reason: String },
    #[error("invalid study range: {0}")]
    Range(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Inclusive calendar-date range of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl StudyRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, IngestError> {
        if end < start {
            return Err(IngestError::Range(format!("{end} is before {start}")));
        }
        Ok(StudyRange { start, end })
    }

    /// January 2015 through December 2024.
    pub fn reference_period() -> Self {
        StudyRange {
            start: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2024, 12, 31).unwrap(),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    pub fn n_days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Win,
    Loss,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Win => "win",
            Outcome::Loss => "loss",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "win" => Ok(Outcome::Win),
            "loss" => Ok(Outcome::Loss),
            other => Err(format!("unknown outcome `{other}`")),
        }
    }
}

/// One representation election as recorded in the elections file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElectionCase {
    pub case_id: String,
    pub election_date: NaiveDate,
    /// Raw participant names, sorted and de-duplicated.
    pub participants: Vec<String>,
    pub winner_raw: Option<String>,
}

/// Column names of the elections CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionSchema {
    pub case_id: String,
    pub election_date: String,
    pub union_raw: String,
    pub is_winner: String,
}

impl Default for ElectionSchema {
    fn default() -> Self {
        ElectionSchema {
            case_id: "case_id".into(),
            election_date: "election_date".into(),
            union_raw: "union_raw".into(),
            is_winner: "is_winner".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowReject {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub case_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ElectionParse {
    pub cases: Vec<ElectionCase>,
    pub rejects: Vec<RowReject>,
    pub warnings: Vec<String>,
}

struct PendingRow {
    row: usize,
    date: NaiveDate,
    union_raw: String,
    is_winner: bool,
}

/// Parses the elections CSV (one row per case and participating union).
///
/// Rows of the same case are merged. A case with any bad row, conflicting
/// dates or more than one winner is omitted as a whole, so the result does
/// not depend on row order.
pub fn parse_elections(path: &Path, schema: &ElectionSchema) -> Result<ElectionParse, IngestError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    parse_elections_from(file, schema, &path.display().to_string())
}

pub fn parse_elections_from<R: std::io::Read>(
    reader: R,
    schema: &ElectionSchema,
    source_name: &str,
) -> Result<ElectionParse, IngestError> {
    let csv_err = |source| IngestError::Csv {
        path: source_name.to_string(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn {
                path: source_name.to_string(),
                column: name.to_string(),
            })
    };
    let (c_case, c_date, c_union, c_win) = (
        col(&schema.case_id)?,
        col(&schema.election_date)?,
        col(&schema.union_raw)?,
        col(&schema.is_winner)?,
    );

    let mut out = ElectionParse::default();
    let mut pending: BTreeMap<String, Vec<PendingRow>> = BTreeMap::new();
    let mut poisoned: BTreeSet<String> = BTreeSet::new();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.rejects.push(RowReject {
                    row,
                    case_id: None,
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        };
        let field = |c: usize| record.get(c).map(str::trim).unwrap_or("");
        let case_id = field(c_case).to_string();
        let reject = |reason: String| RowReject {
            row,
            case_id: (!case_id.is_empty()).then(|| case_id.clone()),
            reason,
        };
        if case_id.is_empty() {
            out.rejects.push(reject("missing case id".into()));
            continue;
        }
        let date = match NaiveDate::parse_from_str(field(c_date), "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) => {
                out.rejects.push(reject(format!("bad date `{}`", field(c_date))));
                poisoned.insert(case_id.clone());
                continue;
            }
        };
        let union_raw = field(c_union).to_string();
        if union_raw.is_empty() {
            out.rejects.push(reject("missing union name".into()));
            poisoned.insert(case_id.clone());
            continue;
        }
        let is_winner = match field(c_win).to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" | "" => false,
            other => {
                out.rejects.push(reject(format!("bad is_winner `{other}`")));
                poisoned.insert(case_id.clone());
                continue;
            }
        };
        pending.entry(case_id).or_default().push(PendingRow {
            row,
            date,
            union_raw,
            is_winner,
        });
    }

    for (case_id, rows) in pending {
        let first_row = rows.iter().map(|r| r.row).min().unwrap_or(0);
        let case_reject = |reason: String| RowReject {
            row: first_row,
            case_id: Some(case_id.clone()),
            reason,
        };
        if poisoned.contains(&case_id) {
            continue;
        }
        let dates: BTreeSet<NaiveDate> = rows.iter().map(|r| r.date).collect();
        if dates.len() > 1 {
            out.rejects.push(case_reject("conflicting dates".into()));
            continue;
        }
        let winners: BTreeSet<&str> = rows
            .iter()
            .filter(|r| r.is_winner)
            .map(|r| r.union_raw.as_str())
            .collect();
        if winners.len() > 1 {
            out.rejects.push(case_reject("multiple winners".into()));
            continue;
        }
        let participants: Vec<String> = rows
            .iter()
            .map(|r| r.union_raw.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if participants.len() > 3 {
            out.warnings.push(format!(
                "case {case_id} has {} participants",
                participants.len()
            ));
        }
        out.cases.push(ElectionCase {
            election_date: rows[0].date,
            winner_raw: winners.into_iter().next().map(str::to_string),
            case_id,
            participants,
        });
    }
    for case_id in poisoned {
        out.rejects.push(RowReject {
            row: 0,
            case_id: Some(case_id),
            reason: "case omitted: contains rejected rows".into(),
        });
    }
    out.rejects.sort_by(|a, b| (a.row, &a.case_id, &a.reason).cmp(&(b.row, &b.case_id, &b.reason)));
    Ok(out)
}

/// Ordered case-insensitive rewrite from a raw name to a canonical id.
#[derive(Debug, Clone)]
pub struct NormalizationRule {
    pub pattern: Regex,
    pub canonical: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleRecord {
    pattern: String,
    canonical: String,
}

impl NormalizationRule {
    pub fn new(pattern: &str, canonical: &str) -> Result<Self, IngestError> {
        Self::compile(0, pattern, canonical)
    }

    fn compile(index: usize, pattern: &str, canonical: &str) -> Result<Self, IngestError> {
        if canonical.trim().is_empty() {
            return Err(IngestError::InvalidRule {
                index,
                reason: "empty canonical id".into(),
            });
        }
        let re = RegexBuilder::new(pattern)
            .case_insensitive(true)
            .build()
            .map_err(|source| IngestError::BadRule {
                index,
                pattern: pattern.to_string(),
                source,
            })?;
        Ok(NormalizationRule {
            pattern: re,
            canonical: canonical.trim().to_string(),
        })
    }
}

/// Result of normalizing one raw organization name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NameMatch {
    Canonical(String),
    Unmatched(String),
}

impl NameMatch {
    pub fn canonical(&self) -> Option<&str> {
        match self {
            NameMatch::Canonical(c) => Some(c),
            NameMatch::Unmatched(_) => None,
        }
    }
}

/// Ordered normalization rules; the first matching rule wins.
///
/// A raw name that is exactly one of the canonical ids maps to itself before
/// any rule is consulted, which keeps normalization idempotent.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<NormalizationRule>,
    canonical_ids: BTreeSet<String>,
}

impl RuleSet {
    pub fn new(rules: Vec<NormalizationRule>) -> Self {
        let canonical_ids = rules.iter().map(|r| r.canonical.clone()).collect();
        RuleSet {
            rules,
            canonical_ids,
        }
    }

    /// Reads JSONL records `{"pattern": ..., "canonical": ...}` in file order.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_jsonl(&text)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, IngestError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: RuleRecord = serde_json::from_str(line).map_err(|e| IngestError::InvalidRule {
                index: i + 1,
                reason: e.to_string(),
            })?;
            rules.push(NormalizationRule::compile(i + 1, &rec.pattern, &rec.canonical)?);
        }
        Ok(RuleSet::new(rules))
    }

    /// The bundled rules for the registry's unions.
    pub fn builtin() -> Self {
        Self::from_jsonl(BUILTIN_RULES).expect("bundled rules parse")
    }

    pub fn rules(&self) -> &[NormalizationRule] {
        &self.rules
    }

    pub fn canonical_ids(&self) -> &BTreeSet<String> {
        &self.canonical_ids
    }

    pub fn normalize(&self, raw: &str) -> NameMatch {
        normalize_name(raw, self)
    }
}

pub fn normalize_name(raw: &str, rules: &RuleSet) -> NameMatch {
    let trimmed = raw.trim();
    if rules.canonical_ids.contains(trimmed) {
        return NameMatch::Canonical(trimmed.to_string());
    }
    rules
        .rules
        .iter()
        .find(|r| r.pattern.is_match(trimmed))
        .map(|r| NameMatch::Canonical(r.canonical.clone()))
        .unwrap_or_else(|| NameMatch::Unmatched(raw.to_string()))
}

/// An election case with participants mapped to canonical ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedCase {
    pub case_id: String,
    pub election_date: NaiveDate,
    pub participants: BTreeSet<String>,
    pub winner: Option<String>,
    pub unmatched: Vec<String>,
}

pub fn normalize_case(case: &ElectionCase, rules: &RuleSet) -> NormalizedCase {
    let mut participants = BTreeSet::new();
    let mut unmatched = Vec::new();
    for raw in &case.participants {
        match rules.normalize(raw) {
            NameMatch::Canonical(c) => {
                participants.insert(c);
            }
            NameMatch::Unmatched(u) => unmatched.push(u),
        }
    }
    let winner = case
        .winner_raw
        .as_deref()
        .and_then(|w| rules.normalize(w).canonical().map(str::to_string));
    NormalizedCase {
        case_id: case.case_id.clone(),
        election_date: case.election_date,
        participants,
        winner,
        unmatched,
    }
}

/// One (case, organization) outcome.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct OutcomeInstance {
    pub case_id: String,
    pub org: String,
    pub outcome: Outcome,
    pub election_date: NaiveDate,
}

/// Win for the case winner, loss for every other tracked participant. A case
/// without a recorded winner is a loss for all of them.
pub fn derive_outcomes(case: &NormalizedCase, tracked_orgs: &BTreeSet<String>) -> Vec<OutcomeInstance> {
    case.participants
        .iter()
        .filter(|org| tracked_orgs.contains(*org))
        .map(|org| OutcomeInstance {
            case_id: case.case_id.clone(),
            org: org.clone(),
            outcome: if case.winner.as_deref() == Some(org.as_str()) {
                Outcome::Win
            } else {
                Outcome::Loss
            },
            election_date: case.election_date,
        })
        .collect()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OutcomeSummary {
    pub n_cases: usize,
    /// Number of cases by participant count (1, 2, 3, more).
    pub participant_split: BTreeMap<usize, usize>,
    pub n_wins: usize,
    pub n_losses: usize,
    /// Raw names no rule matched, with occurrence counts.
    pub unmatched_names: BTreeMap<String, usize>,
}

/// Normalizes every case and derives outcomes for the tracked orgs, sorted
/// by (case_id, org).
pub fn derive_all_outcomes(
    cases: &[ElectionCase],
    rules: &RuleSet,
    tracked_orgs: &BTreeSet<String>,
) -> (Vec<OutcomeInstance>, OutcomeSummary) {
    let mut summary = OutcomeSummary {
        n_cases: cases.len(),
        ..Default::default()
    };
    let mut all = Vec::new();
    for case in cases {
        *summary
            .participant_split
            .entry(case.participants.len())
            .or_default() += 1;
        let norm = normalize_case(case, rules);
        for u in &norm.unmatched {
            *summary.unmatched_names.entry(u.clone()).or_default() += 1;
        }
        all.extend(derive_outcomes(&norm, tracked_orgs));
    }
    all.sort_by(|a, b| (&a.case_id, &a.org).cmp(&(&b.case_id, &b.org)));
    summary.n_wins = all.iter().filter(|o| o.outcome == Outcome::Win).count();
    summary.n_losses = all.len() - summary.n_wins;
    (all, summary)
}

/// One social-media post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub post_id: String,
    pub org: String,
    pub date: NaiveDate,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<FrameLabels>,
    /// Fields this tool does not interpret, kept for round-tripping.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Post {
    pub fn new(post_id: &str, org: &str, date: NaiveDate, text: &str) -> Self {
        Post {
            post_id: post_id.to_string(),
            org: org.to_string(),
            date,
            text: text.to_string(),
            labels: None,
            extra: serde_json::Map::new(),
        }
    }

    pub fn with_labels(mut self, labels: FrameLabels) -> Self {
        self.labels = Some(labels);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineReject {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct PostsLoad {
    pub posts: Vec<Post>,
    pub rejects: Vec<LineReject>,
}

/// Loads a posts JSONL file. Malformed lines, duplicate ids and (when a
/// range is given) out-of-range dates are rejected line by line.
pub fn load_posts(path: &Path, range: Option<&StudyRange>) -> Result<PostsLoad, IngestError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = PostsLoad::default();
    let mut ids: HashSet<String> = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let reject = |reason: String| LineReject { line: i + 1, reason };
        match serde_json::from_str::<Post>(&line) {
            Ok(post) => {
                if let Some(r) = range {
                    if !r.contains(post.date) {
                        out.rejects.push(reject(format!("date {} outside study range", post.date)));
                        continue;
                    }
                }
                if !ids.insert(post.post_id.clone()) {
                    out.rejects.push(reject(format!("duplicate post_id `{}`", post.post_id)));
                    continue;
                }
                out.posts.push(post);
            }
            Err(e) => out.rejects.push(reject(e.to_string())),
        }
    }
    Ok(out)
}

pub fn write_posts(posts: &[Post], path: &Path) -> Result<(), IngestError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for p in posts {
        let line = serde_json::to_string(p).expect("posts serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_outcomes(outcomes: &[OutcomeInstance], path: &Path) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_path(path).map_err(|source| IngestError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let csv_err = |source| IngestError::Csv {
        path: path.display().to_string(),
        source,
    };
    w.write_record(["case_id", "org", "outcome", "election_date"])
        .map_err(csv_err)?;
    for o in outcomes {
        w.write_record([
            o.case_id.as_str(),
            o.org.as_str(),
            o.outcome.as_str(),
            &o.election_date.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Organizational structure of a union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Structure {
    Craft,
    Industrial,
}

impl Structure {
    pub fn as_str(self) -> &'static str {
        match self {
            Structure::Craft => "Craft",
            Structure::Industrial => "Industrial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgEntry {
    pub canonical_id: String,
    pub full_name: String,
    pub structure: Structure,
}

/// Static org metadata from `orgs.csv` (`canonical_id,full_name,structure`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    pub entries: BTreeMap<String, OrgEntry>,
}

const BUILTIN_REGISTRY: &str = include_str!("../../../data/orgs.csv");
const BUILTIN_RULES: &str = include_str!("../../../data/rules.jsonl");

impl Registry {
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let file = std::fs::File::open(path).map_err(io_err(path))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: std::io::Read>(reader: R, name: &str) -> Result<Self, IngestError> {
        let csv_err = |source| IngestError::Csv {
            path: name.to_string(),
            source,
        };
        let mut entries = BTreeMap::new();
        for rec in csv::Reader::from_reader(reader).deserialize::<OrgEntry>() {
            let e = rec.map_err(csv_err)?;
            entries.insert(e.canonical_id.clone(), e);
        }
        Ok(Registry { entries })
    }

    /// The bundled 40-union registry.
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN_REGISTRY.as_bytes(), "orgs.csv").expect("bundled registry parses")
    }

    pub fn structure(&self, org: &str) -> Option<Structure> {
        self.entries.get(org).map(|e| e.structure)
    }

    pub fn ids(&self) -> BTreeSet<String> {
        self.entries.keys().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Frame;

    fn parse(csv: &str) -> ElectionParse {
        parse_elections_from(csv.as_bytes(), &ElectionSchema::default(), "test.csv").unwrap()
    }

    const HEADER: &str = "case_id,election_date,union_raw,is_winner\n";

    #[test]
    fn single_row_case() {
        let p = parse(&format!("{HEADER}A,2020-01-15,X,true\n"));
        assert_eq!(p.cases.len(), 1);
        let c = &p.cases[0];
        assert_eq!(c.case_id, "A");
        assert_eq!(c.participants, vec!["X"]);
        assert_eq!(c.winner_raw.as_deref(), Some("X"));
    }

    #[test]
    fn rows_merge_by_case() {
        let p = parse(&format!("{HEADER}B,2020-02-01,X,false\nB,2020-02-01,Y,true\n"));
        assert_eq!(p.cases.len(), 1);
        assert_eq!(p.cases[0].participants, vec!["X", "Y"]);
        assert_eq!(p.cases[0].winner_raw.as_deref(), Some("Y"));
        assert!(p.rejects.is_empty());
    }

    #[test]
    fn bad_date_rejected() {
        let p = parse(&format!("{HEADER}C,2020-13-40,X,true\nD,2021-03-03,Z,\n"));
        assert_eq!(p.cases.len(), 1);
        assert_eq!(p.cases[0].case_id, "D");
        assert!(p.cases[0].winner_raw.is_none());
        assert!(p.rejects.iter().any(|r| r.reason.starts_with("bad date")));
        assert!(p.rejects.iter().all(|r| r.case_id.as_deref() == Some("C")));
    }

    #[test]
    fn conflicting_cases_are_omitted() {
        let p = parse(&format!(
            "{HEADER}E,2020-01-01,X,true\nE,2020-01-02,Y,false\nF,2020-01-01,X,true\nF,2020-01-01,Y,true\n"
        ));
        assert!(p.cases.is_empty());
        let reasons: Vec<_> = p.rejects.iter().map(|r| r.reason.as_str()).collect();
        assert!(reasons.contains(&"conflicting dates"));
        assert!(reasons.contains(&"multiple winners"));
    }

    #[test]
    fn missing_column_is_fatal() {
        let err = parse_elections_from(
            "case_id,union_raw,is_winner\nA,X,true\n".as_bytes(),
            &ElectionSchema::default(),
            "t.csv",
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn { ref column, .. } if column == "election_date"));
    }

    #[test]
    fn more_than_three_participants_warns() {
        let p = parse(&format!(
            "{HEADER}G,2020-01-01,A,false\nG,2020-01-01,B,false\nG,2020-01-01,C,false\nG,2020-01-01,D,true\n"
        ));
        assert_eq!(p.cases.len(), 1);
        assert_eq!(p.warnings.len(), 1);
    }

    fn rules() -> RuleSet {
        RuleSet::from_jsonl(
            r#"{"pattern":"communications workers of america|\\bcwa\\b","canonical":"CWA"}
{"pattern":"service employees","canonical":"SEIU"}
{"pattern":"^seiu$","canonical":"SEIU"}"#,
        )
        .unwrap()
    }

    #[test]
    fn normalize_local_to_national() {
        let r = rules();
        assert_eq!(
            normalize_name("Communications Workers of America Local 7250", &r),
            NameMatch::Canonical("CWA".into())
        );
        assert_eq!(normalize_name("TNG-CWA", &r).canonical(), Some("CWA"));
    }

    #[test]
    fn normalize_identity_and_unmatched() {
        let r = rules();
        assert_eq!(normalize_name("SEIU", &r), NameMatch::Canonical("SEIU".into()));
        assert_eq!(
            normalize_name("Totally Unknown Workers Assoc.", &r),
            NameMatch::Unmatched("Totally Unknown Workers Assoc.".into())
        );
    }

    #[test]
    fn first_match_wins() {
        let r = RuleSet::from_jsonl(
            "{\"pattern\":\"workers\",\"canonical\":\"FIRST\"}\n{\"pattern\":\"steel\",\"canonical\":\"USW\"}\n",
        )
        .unwrap();
        assert_eq!(normalize_name("Steel Workers", &r).canonical(), Some("FIRST"));
    }

    #[test]
    fn bad_rules_are_errors() {
        assert!(RuleSet::from_jsonl(r#"{"pattern":"(","canonical":"X"}"#).is_err());
        assert!(RuleSet::from_jsonl(r#"{"pattern":"x","canonical":" "}"#).is_err());
    }

    fn case(participants: &[&str], winner: Option<&str>) -> NormalizedCase {
        NormalizedCase {
            case_id: "K".into(),
            election_date: NaiveDate::from_ymd_opt(2020, 5, 5).unwrap(),
            participants: participants.iter().map(|s| s.to_string()).collect(),
            winner: winner.map(str::to_string),
            unmatched: vec![],
        }
    }

    fn tracked(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn outcomes_win_and_loss() {
        let out = derive_outcomes(&case(&["U1", "U2"], Some("U1")), &tracked(&["U1", "U2"]));
        let pairs: Vec<_> = out.iter().map(|o| (o.org.as_str(), o.outcome)).collect();
        assert_eq!(pairs, vec![("U1", Outcome::Win), ("U2", Outcome::Loss)]);
    }

    #[test]
    fn no_winner_means_loss() {
        let out = derive_outcomes(&case(&["U1"], None), &tracked(&["U1"]));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].outcome, Outcome::Loss);
    }

    #[test]
    fn untracked_orgs_dropped() {
        assert!(derive_outcomes(&case(&["U1"], Some("U1")), &tracked(&["U9"])).is_empty());
    }

    #[test]
    fn locals_of_one_union_collapse() {
        let r = rules();
        let raw = ElectionCase {
            case_id: "M".into(),
            election_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            participants: vec!["CWA Local 1".into(), "CWA Local 2".into()],
            winner_raw: Some("CWA Local 2".into()),
        };
        let out = derive_outcomes(&normalize_case(&raw, &r), &tracked(&["CWA"]));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].outcome, Outcome::Win);
    }

    #[test]
    fn registry_reads_bundled_file() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/orgs.csv");
        let reg = Registry::load(&path).unwrap();
        assert_eq!(reg.entries.len(), 40);
        assert_eq!(reg.structure("CWA"), Some(Structure::Industrial));
        assert_eq!(reg.structure("Roofers"), Some(Structure::Craft));
        assert_eq!(reg.structure("NOPE"), None);
        assert_eq!(reg, Registry::builtin());
        assert_eq!(RuleSet::builtin().rules().len(), RuleSet::load(&path.with_file_name("rules.jsonl")).unwrap().rules().len());
    }

    #[test]
    fn bundled_rules_cover_registry() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
        let reg = Registry::load(&root.join("orgs.csv")).unwrap();
        let rules = RuleSet::load(&root.join("rules.jsonl")).unwrap();
        for e in reg.entries.values() {
            assert_eq!(normalize_name(&e.full_name, &rules).canonical(), Some(e.canonical_id.as_str()), "{}", e.full_name);
            let local = format!("{} Local 123", e.full_name);
            assert_eq!(normalize_name(&local, &rules).canonical(), Some(e.canonical_id.as_str()), "{local}");
            assert_eq!(normalize_name(&e.canonical_id, &rules).canonical(), Some(e.canonical_id.as_str()));
        }
        assert_eq!(
            normalize_name("Communications Workers of America Local 7250", &rules).canonical(),
            Some("CWA")
        );
    }

    #[test]
    fn posts_roundtrip_with_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl");
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut a = Post::new("1", "CWA", d, "hello");
        a.extra.insert("likes".into(), serde_json::json!(12));
        let b = Post::new("2", "CWA", d, "").with_labels(FrameLabels::from_frames([Frame::Community]));
        let mut c = Post::new("3", "SEIU", d, "x");
        c.labels = Some(FrameLabels {
            political_endorsement: Some(false),
            ..FrameLabels::from_frames([Frame::Diagnostic, Frame::Engagement])
        });
        let posts = vec![a, b, c];
        write_posts(&posts, &path).unwrap();
        let loaded = load_posts(&path, None).unwrap();
        assert!(loaded.rejects.is_empty());
        assert_eq!(loaded.posts, posts);
    }

    #[test]
    fn malformed_lines_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl");
        std::fs::write(
            &path,
            "{\"post_id\":\"1\",\"org\":\"A\",\"date\":\"2020-01-01\",\"text\":\"\"}\nnot json\n{\"post_id\":\"1\",\"org\":\"A\",\"date\":\"2020-01-02\"}\n{\"post_id\":\"2\",\"org\":\"A\",\"date\":\"2030-01-01\"}\n",
        )
        .unwrap();
        let loaded = load_posts(&path, Some(&StudyRange::reference_period())).unwrap();
        assert_eq!(loaded.posts.len(), 1);
        assert_eq!(loaded.rejects.len(), 3);
        assert_eq!(loaded.rejects[0].line, 2);
    }
}
