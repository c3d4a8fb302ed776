//! Command-line front end. Every subcommand rebuilds its prerequisites from
//! the raw inputs in memory and writes only its own products plus
//! `manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    self, baseline_frame_distribution, cluster_matrix, pre_election_comparison, prepost_pattern_table, report,
    robustness_run, union_deviation_matrix, AnalysisError, BaselineDistribution, DeviationMatrix, Linkage,
    RobustnessMode, RobustnessParams,
};
use crate::eventstudy::{write_instances_csv, EventStudy, WindowSpec};
use crate::frames::{attach_labels, classify_lexicon, frame_coverage, load_label_rows, FramesError, Lexicon};
use crate::ingest::{
    derive_all_outcomes, load_posts, parse_elections, write_outcomes, write_posts, ElectionSchema, IngestError,
    Outcome, OutcomeInstance, Post, Registry, RuleSet, StudyRange,
};
use crate::pipeline::{run_study, PipelineError, StudyConfig, StudyInputs};
use crate::stats::{derive_seed, TTestVariant, DEFAULT_LEVELS};
use crate::synth::{generate_scenario, write_scenario, Effect, ScenarioConfig};
use crate::timeseries::check_window;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Frames(#[from] FramesError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Robustness(#[from] analysis::robustness::RobustnessError),
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
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Ingest(_) => "ingest",
            CliError::Frames(_) => "labels",
            CliError::Pipeline(_) => "eventstudy",
            CliError::Analysis(_) | CliError::Robustness(_) => "analysis",
            CliError::Io { .. } | CliError::Csv { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "framestudy", version, about = "Frame-usage event studies around representation elections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse elections, normalize union names and derive outcomes.
    Ingest(CommonArgs),
    /// Label posts with the lexicon or attach labels from a file.
    Label(CommonArgs),
    /// Down-sampled pooled frame distribution.
    Baseline(CommonArgs),
    /// Per-instance detrended usage, offsets and change patterns.
    Eventstudy(CommonArgs),
    /// Pre-election won/lost comparison per frame.
    ComparePre(CommonArgs),
    /// Pre/post change-pattern table.
    Patterns(CommonArgs),
    /// Multi-seed resampling runs.
    Robustness(RobustnessArgs),
    /// Per-org deviation matrix and its dendrogram.
    Cluster(CommonArgs),
    /// Generate a synthetic scenario.
    Synth(SynthArgs),
    /// Every product in one run.
    All(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub window_days: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub pre: Option<Vec<i64>>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub post: Option<Vec<i64>>,
    #[arg(long)]
    pub baseline_span: Option<i64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Resampling seeds for robustness runs.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub cap_percentile: Option<f64>,
    #[arg(long)]
    pub consensus: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Run a single mode instead of all three.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub n_orgs: usize,
    #[arg(long, default_value_t = 50)]
    pub cases_per_org: usize,
    #[arg(long, default_value_t = 1.0)]
    pub post_rate: f64,
    #[arg(long)]
    pub start: Option<NaiveDate>,
    #[arg(long)]
    pub end: Option<NaiveDate>,
    /// `outcome:frame:from:to:delta`, e.g. `win:diagnostic:-7:-3:0.1`.
    #[arg(long = "effect", allow_hyphen_values = true)]
    pub effects: Vec<String>,
    /// Fill post text with lexicon phrases.
    #[arg(long)]
    pub with_text: bool,
    #[arg(long, default_value = "synth")]
    pub out: PathBuf,
}

/// Where frame labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    #[default]
    Lexicon,
    /// Labels already present in the posts file.
    Embedded,
    /// Sidecar JSONL of `{post_id, labels}` rows.
    File,
}

/// Resolved run configuration. Relative paths are taken from the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub elections: Option<PathBuf>,
    pub posts: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub label_source: LabelSource,
    pub schema: ElectionSchema,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub window_days: usize,
    pub pre: (i64, i64),
    pub post: (i64, i64),
    pub baseline_span: i64,
    pub alpha: f64,
    pub seed: u64,
    pub baseline_seeds: usize,
    pub robustness_seeds: usize,
    pub ttest: TTestVariant,
    pub cap_percentile: f64,
    pub consensus: f64,
    pub variant_window_days: usize,
    pub linkage: Linkage,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let range = StudyRange::reference_period();
        let spec = WindowSpec::default();
        RunConfig {
            elections: None,
            posts: None,
            rules: None,
            registry: None,
            lexicon: None,
            labels: None,
            label_source: LabelSource::default(),
            schema: ElectionSchema::default(),
            start: range.start,
            end: range.end,
            window_days: 5,
            pre: spec.pre,
            post: spec.post,
            baseline_span: spec.baseline_span,
            alpha: 0.05,
            seed: 0,
            baseline_seeds: 5,
            robustness_seeds: 20,
            ttest: TTestVariant::default(),
            cap_percentile: 90.0,
            consensus: 0.8,
            variant_window_days: 3,
            linkage: Linkage::default(),
            out: PathBuf::from("out"),
        }
    }
}

fn pair(v: &Option<Vec<i64>>) -> Option<(i64, i64)> {
    v.as_ref().map(|v| (v[0], v[1]))
}

impl RunConfig {
    /// Config file (if any) overridden by command-line flags, then validated.
    pub fn resolve(args: &CommonArgs) -> Result<(Self, PathBuf), CliError> {
        let (mut cfg, base) = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                let cfg: RunConfig =
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (cfg, base)
            }
            None => (RunConfig::default(), PathBuf::new()),
        };
        if let Some(v) = args.seed {
            cfg.seed = v;
        }
        if let Some(v) = args.window_days {
            cfg.window_days = v;
        }
        if let Some(v) = pair(&args.pre) {
            cfg.pre = v;
        }
        if let Some(v) = pair(&args.post) {
            cfg.post = v;
        }
        if let Some(v) = args.baseline_span {
            cfg.baseline_span = v;
        }
        if let Some(v) = args.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = args.seeds {
            cfg.robustness_seeds = v;
        }
        if let Some(v) = args.cap_percentile {
            cfg.cap_percentile = v;
        }
        if let Some(v) = args.consensus {
            cfg.consensus = v;
        }
        cfg.out = match &args.out {
            Some(o) => o.clone(),
            None => base.join(&cfg.out),
        };
        cfg.validate()?;
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if check_window(self.window_days).is_err() {
            return bad(format!("window_days must be odd and positive, got {}", self.window_days));
        }
        if check_window(self.variant_window_days).is_err() {
            return bad(format!(
                "variant_window_days must be odd and positive, got {}",
                self.variant_window_days
            ));
        }
        self.spec()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(0.0..=100.0).contains(&self.cap_percentile) {
            return bad(format!("cap_percentile must lie in [0, 100], got {}", self.cap_percentile));
        }
        if !(0.0..=1.0).contains(&self.consensus) {
            return bad(format!("consensus must lie in [0, 1], got {}", self.consensus));
        }
        if self.baseline_seeds == 0 || self.robustness_seeds == 0 {
            return bad("seed counts must be positive".into());
        }
        if self.label_source == LabelSource::File && self.labels.is_none() {
            return bad("label_source = \"file\" needs a labels path".into());
        }
        StudyRange::new(self.start, self.end).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn spec(&self) -> WindowSpec {
        WindowSpec {
            pre: self.pre,
            post: self.post,
            baseline_span: self.baseline_span,
        }
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            window_days: self.window_days,
            spec: self.spec(),
            study_range: StudyRange::new(self.start, self.end).expect("validated"),
        }
    }

    fn robustness(&self) -> RobustnessParams {
        RobustnessParams {
            n_seeds: self.robustness_seeds,
            base_seed: self.seed,
            alpha: self.alpha,
            variant: self.ttest,
            cap_percentile: self.cap_percentile,
            consensus: self.consensus,
            levels: DEFAULT_LEVELS.to_vec(),
            variant_window_days: self.variant_window_days,
        }
    }

    /// Seed for the balanced sample behind the comparison and pattern table.
    pub fn balance_seed(&self) -> u64 {
        derive_seed(self.seed, "balance")
    }
}

/// Input file with its digest.
#[derive(Debug, Clone, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
    inputs: BTreeMap<&'static str, InputDigest>,
    outputs: Vec<String>,
}

struct Run {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    inputs: BTreeMap<&'static str, InputDigest>,
    outputs: BTreeSet<String>,
}

fn digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Run {
    fn new(args: &CommonArgs) -> Result<Self, CliError> {
        let (cfg, base) = RunConfig::resolve(args)?;
        let out = cfg.out.clone();
        std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
            path: out.display().to_string(),
            source,
        })?;
        Ok(Run {
            cfg,
            base,
            out,
            inputs: BTreeMap::new(),
            outputs: BTreeSet::new(),
        })
    }

    /// Resolves and records an input path.
    fn input(&mut self, name: &'static str, p: &Path) -> Result<PathBuf, CliError> {
        let full = self.base.join(p);
        let sha256 = digest(&full)?;
        self.inputs.insert(
            name,
            InputDigest {
                path: p.display().to_string(),
                sha256,
            },
        );
        Ok(full)
    }

    fn required(&mut self, name: &'static str, p: Option<PathBuf>) -> Result<PathBuf, CliError> {
        let p = p.ok_or_else(|| CliError::Config(format!("no `{name}` path configured")))?;
        self.input(name, &p)
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.out.join(name);
        let f = File::create(&path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.outputs.insert(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<(), CliError> {
        let w = self.create(name)?;
        write(w).map_err(|source| CliError::Csv {
            path: self.out.join(name).display().to_string(),
            source,
        })
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let w = self.create(name)?;
        report::write_json(w, value).map_err(|source| CliError::Io {
            path: self.out.join(name).display().to_string(),
            source,
        })
    }

    fn finish(mut self, command: &str) -> Result<(), CliError> {
        let mut outputs: Vec<String> = self.outputs.iter().cloned().collect();
        outputs.push("manifest.json".into());
        outputs.sort();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: self.cfg.seed,
            config: &self.cfg,
            inputs: std::mem::take(&mut self.inputs),
            outputs,
        };
        // the output directory differs between runs and is left out
        let mut value = serde_json::to_value(&manifest).expect("manifest serializes");
        value["config"].as_object_mut().expect("object").remove("out");
        let path = self.out.join("manifest.json");
        let f = File::create(&path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        report::write_json(BufWriter::new(f), &value).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        info!("wrote {} files to {}", self.outputs.len() + 1, self.out.display());
        Ok(())
    }

    fn rules(&mut self) -> Result<RuleSet, CliError> {
        match self.cfg.rules.clone() {
            Some(p) => Ok(RuleSet::load(&self.input("rules", &p)?)?),
            None => Ok(RuleSet::builtin()),
        }
    }

    fn registry(&mut self) -> Result<Registry, CliError> {
        match self.cfg.registry.clone() {
            Some(p) => Ok(Registry::load(&self.input("registry", &p)?)?),
            None => Ok(Registry::builtin()),
        }
    }

    fn ingest(&mut self, write: bool) -> Result<Vec<OutcomeInstance>, CliError> {
        let path = self.required("elections", self.cfg.elections.clone())?;
        let rules = self.rules()?;
        let registry = self.registry()?;
        let parsed = parse_elections(&path, &self.cfg.schema)?;
        let range = self.cfg.study().study_range;
        let in_range: Vec<_> = parsed
            .cases
            .iter()
            .filter(|c| range.contains(c.election_date))
            .cloned()
            .collect();
        let (outcomes, summary) = derive_all_outcomes(&in_range, &rules, &registry.ids());
        info!(
            "{} cases ({} in range), {} outcome instances, {} rejected rows",
            parsed.cases.len(),
            in_range.len(),
            outcomes.len(),
            parsed.rejects.len()
        );
        if write {
            let path = self.out.join("outcomes.csv");
            write_outcomes(&outcomes, &path)?;
            self.outputs.insert("outcomes.csv".into());
            self.json(
                "ingest_report.json",
                &serde_json::json!({
                    "n_cases_parsed": parsed.cases.len(),
                    "n_cases_in_range": in_range.len(),
                    "summary": summary,
                    "rejects": parsed.rejects,
                    "warnings": parsed.warnings,
                }),
            )?;
        }
        Ok(outcomes)
    }

    fn labeled_posts(&mut self, write: bool) -> Result<Vec<Post>, CliError> {
        let path = self.required("posts", self.cfg.posts.clone())?;
        let range = self.cfg.study().study_range;
        let loaded = load_posts(&path, Some(&range))?;
        let mut posts = loaded.posts;
        let mut attach = None;
        match self.cfg.label_source {
            LabelSource::Embedded => {}
            LabelSource::Lexicon => {
                let lexicon = match self.cfg.lexicon.clone() {
                    Some(p) => Lexicon::load(&self.input("lexicon", &p)?)?,
                    None => Lexicon::builtin(),
                };
                for p in &mut posts {
                    p.labels = Some(classify_lexicon(p, &lexicon));
                }
            }
            LabelSource::File => {
                let lp = self.required("labels", self.cfg.labels.clone())?;
                let rows = load_label_rows(&lp)?;
                for p in &mut posts {
                    p.labels = None;
                }
                let (with_labels, report) = attach_labels(posts, &rows.rows)?;
                posts = with_labels;
                attach = Some(serde_json::json!({ "report": report, "rejects": rows.rejects }));
            }
        }
        posts.sort_by(|a, b| a.post_id.cmp(&b.post_id));
        let coverage = frame_coverage(&posts);
        info!(
            "{} posts, {} labeled, {} with a frame",
            coverage.n_total, coverage.n_labeled, coverage.n_any_frame
        );
        if write {
            let path = self.out.join("labeled_posts.jsonl");
            write_posts(&posts, &path)?;
            self.outputs.insert("labeled_posts.jsonl".into());
            self.json(
                "label_report.json",
                &serde_json::json!({
                    "label_source": self.cfg.label_source,
                    "coverage": coverage,
                    "post_rejects": loaded.rejects,
                    "attach": attach,
                }),
            )?;
        }
        Ok(posts)
    }

    fn inputs(&mut self, write: bool) -> Result<StudyInputs, CliError> {
        let outcomes = self.ingest(write)?;
        let posts = self.labeled_posts(write)?;
        Ok(StudyInputs::new(posts, outcomes))
    }

    fn baseline(&mut self, inputs: &StudyInputs, write: bool) -> Result<BaselineDistribution, CliError> {
        let b = baseline_frame_distribution(
            &inputs.posts_by_org,
            self.cfg.baseline_seeds,
            derive_seed(self.cfg.seed, "baseline"),
        )?;
        if write {
            self.csv("baseline_distribution.csv", |w| report::write_baseline_csv(w, &b))?;
        }
        Ok(b)
    }

    fn cluster(&mut self, inputs: &StudyInputs, b: &BaselineDistribution) -> Result<DeviationMatrix, CliError> {
        let registry = self.registry()?;
        let m = union_deviation_matrix(&inputs.posts_by_org, b, &registry);
        let dendrogram = cluster_matrix(&m, self.cfg.linkage)?;
        self.csv("deviation_matrix.csv", |w| report::write_deviation_csv(w, &m))?;
        self.json("dendrogram.json", &dendrogram)?;
        self.json("fig1_deviation.json", &report::deviation_plot(&m, &dendrogram))?;
        Ok(m)
    }

    fn eventstudy(&mut self, inputs: &StudyInputs, write: bool) -> Result<EventStudy, CliError> {
        let study = run_study(inputs, &self.cfg.study())?;
        info!(
            "{} event-study instances, {} dropped",
            study.instances.len(),
            study.dropped.len()
        );
        if write {
            self.csv("instances.csv", |w| write_instances_csv(w, &study.instances))?;
            self.csv("dropped.csv", |w| {
                let mut out = csv::Writer::from_writer(w);
                for d in &study.dropped {
                    out.serialize(d)?;
                }
                out.flush()?;
                Ok(())
            })?;
            self.json("thresholds.json", &study.thresholds)?;
        }
        Ok(study)
    }

    fn compare_pre(&mut self, study: &EventStudy) -> Result<(), CliError> {
        let r = pre_election_comparison(&study.instances, self.cfg.balance_seed(), self.cfg.ttest)?;
        self.csv("pre_election.csv", |w| report::write_pre_election_csv(w, &r))?;
        self.json("fig2_pre_election.json", &report::pre_election_plot(&r))
    }

    fn patterns(&mut self, study: &EventStudy) -> Result<(), CliError> {
        let t = prepost_pattern_table(
            &study.instances,
            &study.thresholds,
            self.cfg.balance_seed(),
            self.cfg.alpha,
        )?;
        self.csv("pattern_table.csv", |w| report::write_pattern_csv(w, &t))?;
        self.json("fig3_patterns.json", &report::pattern_plot(&t))
    }

    fn robustness(&mut self, inputs: &StudyInputs, modes: &[RobustnessMode]) -> Result<(), CliError> {
        let params = self.cfg.robustness();
        let study = self.cfg.study();
        let reports = modes
            .iter()
            .map(|&m| robustness_run(inputs, &study, m, &params))
            .collect::<Result<Vec<_>, _>>()?;
        self.csv("robustness_summary.csv", |w| report::write_robustness_summary_csv(w, &reports))?;
        self.csv("robustness_consensus.csv", |w| report::write_robustness_consensus_csv(w, &reports))
    }
}

fn parse_effect(s: &str) -> Result<Effect, CliError> {
    let bad = || CliError::Config(format!("effect `{s}` is not outcome:frame:from:to:delta"));
    let parts: Vec<&str> = s.split(':').collect();
    let [outcome, frame, from, to, delta] = parts[..] else {
        return Err(bad());
    };
    Ok(Effect {
        outcome: outcome.parse::<Outcome>().map_err(|_| bad())?,
        frame: frame.parse().map_err(|_| bad())?,
        days: (from.parse().map_err(|_| bad())?, to.parse().map_err(|_| bad())?),
        delta: delta.parse().map_err(|_| bad())?,
    })
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut cfg = ScenarioConfig {
        seed: args.seed,
        n_orgs: args.n_orgs,
        cases_per_org: args.cases_per_org,
        post_rate: args.post_rate,
        with_text: args.with_text,
        effects: args.effects.iter().map(|e| parse_effect(e)).collect::<Result<_, _>>()?,
        ..Default::default()
    };
    let (start, end) = (
        args.start.unwrap_or(cfg.study_range.start),
        args.end.unwrap_or(cfg.study_range.end),
    );
    cfg.study_range = StudyRange::new(start, end).map_err(|e| CliError::Config(e.to_string()))?;
    let scenario = generate_scenario(&cfg);
    for w in &scenario.manifest.warnings {
        log::warn!("{w}");
    }
    write_scenario(&scenario, &args.out)?;
    info!(
        "{} posts and {} election rows written to {}",
        scenario.posts.len(),
        scenario.elections.len(),
        args.out.display()
    );
    Ok(())
}

fn modes(arg: &Option<String>) -> Result<Vec<RobustnessMode>, CliError> {
    match arg {
        Some(m) => Ok(vec![m.parse().map_err(CliError::Config)?]),
        None => Ok(RobustnessMode::ALL.to_vec()),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Synth(a) => return synth(a),
        Command::Robustness(a) => ("robustness", &a.common),
        Command::Ingest(a) => ("ingest", a),
        Command::Label(a) => ("label", a),
        Command::Baseline(a) => ("baseline", a),
        Command::Eventstudy(a) => ("eventstudy", a),
        Command::ComparePre(a) => ("compare-pre", a),
        Command::Patterns(a) => ("patterns", a),
        Command::Cluster(a) => ("cluster", a),
        Command::All(a) => ("all", a),
    };
    let mut run = Run::new(args)?;
    match &cli.command {
        Command::Ingest(_) => {
            run.ingest(true)?;
        }
        Command::Label(_) => {
            run.labeled_posts(true)?;
        }
        Command::Baseline(_) => {
            let inputs = run.inputs(false)?;
            run.baseline(&inputs, true)?;
        }
        Command::Cluster(_) => {
            let inputs = run.inputs(false)?;
            let b = run.baseline(&inputs, false)?;
            run.cluster(&inputs, &b)?;
        }
        Command::Eventstudy(_) => {
            let inputs = run.inputs(false)?;
            run.eventstudy(&inputs, true)?;
        }
        Command::ComparePre(_) => {
            let inputs = run.inputs(false)?;
            let study = run.eventstudy(&inputs, false)?;
            run.compare_pre(&study)?;
        }
        Command::Patterns(_) => {
            let inputs = run.inputs(false)?;
            let study = run.eventstudy(&inputs, false)?;
            run.patterns(&study)?;
        }
        Command::Robustness(a) => {
            let modes = modes(&a.mode)?;
            let inputs = run.inputs(false)?;
            run.robustness(&inputs, &modes)?;
        }
        Command::All(_) => {
            let inputs = run.inputs(true)?;
            let b = run.baseline(&inputs, true)?;
            run.cluster(&inputs, &b)?;
            let study = run.eventstudy(&inputs, true)?;
            run.compare_pre(&study)?;
            run.patterns(&study)?;
            run.robustness(&inputs, &RobustnessMode::ALL)?;
        }
        Command::Synth(_) => unreachable!(),
    }
    run.finish(name)
}

/// Sizes the global thread pool from `FRAMESTUDY_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("FRAMESTUDY_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("FRAMESTUDY_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}
