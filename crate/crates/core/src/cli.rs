//! Command-line front end and the end-to-end placement pipeline it drives.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context_trace::{generate_synthetic_trace, read_trace, write_trace, Frame, FrameWindow, TraceScript, DEFAULT_WINDOW};
use crate::document_profile::{parse_predictions_tsv, segment_document, DocumentProfile, LabelVocabulary, SegmentMode};
use crate::error::{Error, Result};
use crate::importance::{CellMask, ImportanceMap};
use crate::maps::{to_csv, to_pgm};
use crate::optimizer::{cell_index, cost_table, greedy_search, simulated_annealing, trace_csv, AnnealingConfig, SearchResult};
use crate::placement_cost::{CostBreakdown, CostContext, CostWeights, LabelGeometry};
use crate::spatial_profile::{KeyObject, SpatialProfile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_UNASSIGNED: i32 = 3;
pub const EXIT_MISSING_OBJECT: i32 = 4;

/// Tunables of one placement run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaceParams {
    pub weights: CostWeights,
    pub label: LabelGeometry,
    pub n_frames: usize,
    /// Index of the last frame in the window; the trace's last frame when unset.
    pub cursor: Option<usize>,
    pub annealing: AnnealingConfig,
}

impl Default for PlaceParams {
    fn default() -> Self {
        Self {
            weights: CostWeights::default(),
            label: LabelGeometry::default(),
            n_frames: DEFAULT_WINDOW,
            cursor: None,
            annealing: AnnealingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSummary {
    pub seed: u64,
    pub t1: f64,
    pub i_max: usize,
    pub evaluations: usize,
    pub unique_evaluations: usize,
    pub evaluations_to_best: usize,
    pub iterations_to_best: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaceReport {
    pub step: String,
    pub key_object: String,
    pub surface: String,
    pub r: usize,
    pub c: usize,
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub rotation: [f64; 4],
    pub cost: CostBreakdown,
    pub search: SearchSummary,
    pub window: WindowSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub cursor: usize,
    pub frames: usize,
}

/// A placement report with the maps behind it.
#[derive(Debug, Clone)]
pub struct PlaceOutcome {
    pub report: PlaceReport,
    pub importance: ImportanceMap,
    pub occlusion: CellMask,
    pub search: SearchResult,
}

/// The key object and frame window a step is placed against.
pub struct Scenario<'a> {
    pub step: String,
    pub key_object: &'a KeyObject,
    pub window: FrameWindow,
    pub cursor: usize,
    pub preferred: Option<crate::geometry::Vec3>,
}

impl<'a> Scenario<'a> {
    pub fn resolve(
        spatial: &'a SpatialProfile,
        doc: &DocumentProfile,
        frames: &[Frame],
        step_id: &str,
        params: &PlaceParams,
    ) -> Result<Self> {
        let step = doc.step(step_id)?;
        let label = step.key_object.as_deref().ok_or_else(|| Error::UnassignedStep(step_id.into()))?;
        let key_object = spatial.key_object(label).ok_or_else(|| Error::UnknownKeyObject(label.into()))?;
        if params.n_frames < 2 {
            return Err(Error::InvalidArgument(format!("window size must be at least 2, got {}", params.n_frames)));
        }
        if frames.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let cursor = params.cursor.unwrap_or(frames.len() - 1);
        let window = FrameWindow::ending_at(frames, cursor, params.n_frames)?;
        Ok(Self {
            step: step_id.into(),
            key_object,
            window,
            cursor,
            preferred: step.preferred(),
        })
    }

    pub fn context(&self, params: &PlaceParams) -> Result<CostContext<'_>> {
        CostContext::new(self.key_object, &self.window, params.label, params.weights, self.preferred)
    }
}

/// Runs annealing for one step and reports the best placement found.
pub fn place_step(
    spatial: &SpatialProfile,
    doc: &DocumentProfile,
    frames: &[Frame],
    step_id: &str,
    params: &PlaceParams,
) -> Result<PlaceOutcome> {
    let scenario = Scenario::resolve(spatial, doc, frames, step_id, params)?;
    let ctx = scenario.context(params)?;
    let search = simulated_annealing(scenario.key_object, |(s, r, c)| ctx.cost(s, r, c), &params.annealing)?;
    let (s, r, c) = search.best;
    let placement = ctx.placement(s, r, c)?;
    let cost = ctx.breakdown(&placement)?;
    let q = placement.rotation.quaternion();
    let report = PlaceReport {
        step: scenario.step.clone(),
        key_object: scenario.key_object.name.clone(),
        surface: scenario.key_object.surfaces()[s].id.clone(),
        r,
        c,
        position: placement.position.into(),
        rotation: [q.w, q.i, q.j, q.k],
        cost,
        search: SearchSummary {
            seed: params.annealing.seed,
            t1: params.annealing.t1,
            i_max: params.annealing.i_max,
            evaluations: search.evaluations,
            unique_evaluations: search.unique_evaluations,
            evaluations_to_best: search.evaluations_to_best,
            iterations_to_best: search.iterations_to_best,
        },
        window: WindowSummary {
            cursor: scenario.cursor,
            frames: scenario.window.len(),
        },
    };
    Ok(PlaceOutcome {
        report,
        occlusion: ctx.occlusion(&placement),
        importance: ctx.importance,
        search,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub kind: &'static str,
    pub seed: Option<u64>,
    pub surface: String,
    pub r: usize,
    pub c: usize,
    pub best_cost: f64,
    pub evaluations: usize,
    pub unique_evaluations: usize,
    pub evaluations_to_best: usize,
    pub iterations_to_best: usize,
    pub hit: bool,
}

/// One greedy row followed by one annealing row per seed, in seed order.
pub fn sweep(
    spatial: &SpatialProfile,
    doc: &DocumentProfile,
    frames: &[Frame],
    step_id: &str,
    params: &PlaceParams,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("the seed list is empty".into()));
    }
    let scenario = Scenario::resolve(spatial, doc, frames, step_id, params)?;
    let ctx = scenario.context(params)?;
    let k = scenario.key_object;
    let table = cost_table(k, |(s, r, c)| ctx.cost(s, r, c));
    let lookup = |cell| table[cell_index(k, cell)];
    let greedy = greedy_search(k, lookup);
    let row = |kind, seed, res: &SearchResult| SweepRow {
        kind,
        seed,
        surface: k.surfaces()[res.best.0].id.clone(),
        r: res.best.1,
        c: res.best.2,
        best_cost: res.best_cost,
        evaluations: res.evaluations,
        unique_evaluations: res.unique_evaluations,
        evaluations_to_best: res.evaluations_to_best,
        iterations_to_best: res.iterations_to_best,
        hit: res.best_cost == greedy.best_cost,
    };
    let mut rows = vec![row("greedy", None, &greedy)];
    let annealed: Vec<Result<SweepRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = AnnealingConfig { seed, ..params.annealing };
            simulated_annealing(k, lookup, &cfg).map(|res| row("annealing", Some(seed), &res))
        })
        .collect();
    for r in annealed {
        rows.push(r?);
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "kind,seed,surface,r,c,best_cost,evaluations,unique_evaluations,evaluations_to_best,iterations_to_best,hit\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.kind,
            r.seed.map_or(String::new(), |s| s.to_string()),
            r.surface,
            r.r,
            r.c,
            r.best_cost,
            r.evaluations,
            r.unique_evaluations,
            r.evaluations_to_best,
            r.iterations_to_best,
            r.hit
        ));
    }
    out
}

/// Parses `1,2,5..8` (ranges are half-open).
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::Parse(format!("bad seed `{part}`"));
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("the seed list is empty".into()));
    }
    Ok(out)
}

/// Reads a vocabulary file: one label per line, `alias => label` for
/// aliases, `#` comments.
pub fn parse_vocabulary(text: &str) -> Result<LabelVocabulary> {
    let mut labels = Vec::new();
    let mut aliases = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        match line.split_once("=>") {
            Some((a, l)) => aliases.push((a.trim().to_lowercase(), l.trim().to_lowercase())),
            None => labels.push(line.to_lowercase()),
        }
    }
    LabelVocabulary::new(labels, aliases)
}

// ---------------------------------------------------------------------------
// Argument parsing

#[derive(Debug, Parser)]
#[command(name = "stepplace", version, about = "Author instruction profiles and place their steps on key objects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment and label an instruction text into a document profile.
    Author(AuthorArgs),
    /// Place one step of a document profile on its key object.
    Place(PlaceArgs),
    /// Compare annealing over many seeds against the exhaustive search.
    Sweep(SweepArgs),
    /// Render a scripted gaze and hand trace.
    SynthTrace(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Paragraph,
    Sentence,
}

#[derive(Debug, Args)]
pub struct AuthorArgs {
    /// Plain-text instructions.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "paragraph")]
    pub mode: ModeArg,
    /// Document title; defaults to the input file stem.
    #[arg(long)]
    pub title: Option<String>,
    /// Vocabulary file replacing the built-in kitchen labels.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Comma-separated available key objects; defaults to the vocabulary.
    #[arg(long, conflicts_with = "spatial")]
    pub available: Option<String>,
    /// Take the available key objects from a spatial profile.
    #[arg(long)]
    pub spatial: Option<PathBuf>,
    /// Ranked classifier predictions (TSV).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct ScenarioArgs {
    /// TOML file with any of the flags below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub spatial: Option<PathBuf>,
    #[arg(long)]
    pub doc: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub step: Option<String>,
    #[arg(long)]
    pub n_frames: Option<usize>,
    /// Index of the last trace frame in the window.
    #[arg(long)]
    pub cursor: Option<usize>,
    #[arg(long)]
    pub t1: Option<f64>,
    #[arg(long)]
    pub i_max: Option<usize>,
    #[arg(long)]
    pub lambda_v: Option<f64>,
    #[arg(long)]
    pub lambda_r: Option<f64>,
    #[arg(long)]
    pub lambda_ha: Option<f64>,
    #[arg(long)]
    pub lambda_p: Option<f64>,
    #[arg(long)]
    pub label_w: Option<f64>,
    #[arg(long)]
    pub label_h: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlaceArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for importance, occlusion and search-trace dumps.
    #[arg(long)]
    pub dump_maps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Seeds such as `0..100` or `1,2,3`.
    #[arg(long)]
    pub seeds: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spatial: PathBuf,
    /// Trace script (JSON).
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Scenario keys accepted in a TOML config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub spatial: Option<PathBuf>,
    pub doc: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub step: Option<String>,
    pub seed: Option<u64>,
    pub seeds: Option<String>,
    pub n_frames: Option<usize>,
    pub cursor: Option<usize>,
    pub t1: Option<f64>,
    pub i_max: Option<usize>,
    pub lambda_v: Option<f64>,
    pub lambda_r: Option<f64>,
    pub lambda_ha: Option<f64>,
    pub lambda_p: Option<f64>,
    pub label_w: Option<f64>,
    pub label_h: Option<f64>,
    pub dump_maps: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Fully resolved scenario inputs.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub spatial: PathBuf,
    pub doc: PathBuf,
    pub trace: PathBuf,
    pub step: String,
    pub params: PlaceParams,
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load_config(args: &ScenarioArgs) -> anyhow::Result<ConfigFile> {
    match &args.config {
        None => Ok(ConfigFile::default()),
        Some(p) => toml::from_str(&read(p)?).map_err(|e| Error::Parse(format!("{}: {e}", p.display())).into()),
    }
}

fn resolve_scenario(args: &ScenarioArgs, cfg: &ConfigFile, seed: Option<u64>) -> anyhow::Result<ScenarioConfig> {
    fn required<T: Clone>(flag: &Option<T>, file: &Option<T>, name: &str) -> anyhow::Result<T> {
        match flag.clone().or_else(|| file.clone()) {
            Some(v) => Ok(v),
            None => bail!(Error::InvalidArgument(format!("--{name} is required"))),
        }
    }
    let pick = |flag: Option<f64>, file: Option<f64>, default: f64| flag.or(file).unwrap_or(default);
    let dw = CostWeights::default();
    let weights = CostWeights {
        visibility: pick(args.lambda_v, cfg.lambda_v, dw.visibility),
        readability: pick(args.lambda_r, cfg.lambda_r, dw.readability),
        hand_angle: pick(args.lambda_ha, cfg.lambda_ha, dw.hand_angle),
        preference: pick(args.lambda_p, cfg.lambda_p, dw.preference),
    };
    weights.validate()?;
    let dl = LabelGeometry::default();
    let label = LabelGeometry::new(pick(args.label_w, cfg.label_w, dl.width_m), pick(args.label_h, cfg.label_h, dl.height_m))?;
    let da = AnnealingConfig::default();
    let annealing = AnnealingConfig {
        t1: pick(args.t1, cfg.t1, da.t1),
        i_max: args.i_max.or(cfg.i_max).unwrap_or(da.i_max),
        seed: seed.or(cfg.seed).unwrap_or(da.seed),
    };
    annealing.validate()?;
    let n_frames = args.n_frames.or(cfg.n_frames).unwrap_or(DEFAULT_WINDOW);
    if n_frames < 2 {
        bail!(Error::InvalidArgument(format!("--n-frames must be at least 2, got {n_frames}")));
    }
    Ok(ScenarioConfig {
        spatial: required(&args.spatial, &cfg.spatial, "spatial")?,
        doc: required(&args.doc, &cfg.doc, "doc")?,
        trace: required(&args.trace, &cfg.trace, "trace")?,
        step: required(&args.step, &cfg.step, "step")?,
        params: PlaceParams {
            weights,
            label,
            n_frames,
            cursor: args.cursor.or(cfg.cursor),
            annealing,
        },
        out: args.out.clone().or_else(|| cfg.out.clone()),
    })
}

struct Loaded {
    spatial: SpatialProfile,
    doc: DocumentProfile,
    frames: Vec<Frame>,
}

fn load(sc: &ScenarioConfig) -> anyhow::Result<Loaded> {
    let spatial = SpatialProfile::from_json(read(&sc.spatial)?.as_bytes())
        .with_context(|| format!("loading {}", sc.spatial.display()))?;
    let doc =
        DocumentProfile::from_json(read(&sc.doc)?.as_bytes()).with_context(|| format!("loading {}", sc.doc.display()))?;
    let frames = read_trace(&read(&sc.trace)?).with_context(|| format!("loading {}", sc.trace.display()))?;
    Ok(Loaded { spatial, doc, frames })
}

fn cmd_author(args: &AuthorArgs) -> anyhow::Result<()> {
    let vocab = match &args.vocab {
        Some(p) => parse_vocabulary(&read(p)?)?,
        None => LabelVocabulary::default(),
    };
    let available = if let Some(list) = &args.available {
        list.split(',').map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect()
    } else if let Some(p) = &args.spatial {
        let spatial = SpatialProfile::from_json(read(p)?.as_bytes())?;
        spatial.key_objects().iter().map(|k| k.name.clone()).collect()
    } else {
        vocab.labels().iter().cloned().collect()
    };
    let mode = match args.mode {
        ModeArg::Paragraph => SegmentMode::Paragraph,
        ModeArg::Sentence => SegmentMode::Sentence,
    };
    let title = args.title.clone().unwrap_or_else(|| {
        args.input.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
    });
    let steps = segment_document(&read(&args.input)?, mode)?;
    let mut profile = DocumentProfile::new(title, available, steps)?.apply_rules(&vocab);
    if let Some(p) = &args.predictions {
        profile = profile.apply_predictions(&parse_predictions_tsv(&read(p)?)?)?;
    }
    write(&args.out, &(profile.to_json() + "\n"))?;
    let mut table = String::from("id\tlabel\tsource\tconfidence\n");
    for s in &profile.steps {
        let source = serde_json::to_value(s.source)?;
        table.push_str(&format!(
            "{}\t{}\t{}\t{:.3}\n",
            s.id,
            s.key_object.as_deref().unwrap_or("-"),
            source.as_str().unwrap_or_default(),
            s.confidence
        ));
    }
    print!("{table}");
    Ok(())
}

fn dump_maps(dir: &Path, k: &KeyObject, outcome: &PlaceOutcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, s) in k.surfaces().iter().enumerate() {
        let imap = &outcome.importance.surfaces[i];
        let occ = outcome.occlusion.surfaces[i].map(|&b| if b { 1.0 } else { 0.0 });
        write(&dir.join(format!("importance_{}.pgm", s.id)), &to_pgm(imap))?;
        write(&dir.join(format!("importance_{}.csv", s.id)), &to_csv(imap))?;
        write(&dir.join(format!("occlusion_{}.pgm", s.id)), &to_pgm(&occ))?;
        write(&dir.join(format!("occlusion_{}.csv", s.id)), &to_csv(&occ))?;
    }
    write(&dir.join("search_trace.csv"), &trace_csv(&outcome.search, k))
}

fn cmd_place(args: &PlaceArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.scenario)?;
    let sc = resolve_scenario(&args.scenario, &cfg, args.seed)?;
    let data = load(&sc)?;
    let outcome = place_step(&data.spatial, &data.doc, &data.frames, &sc.step, &sc.params)?;
    if let Some(dir) = args.dump_maps.clone().or(cfg.dump_maps) {
        let k = data.spatial.key_object(&outcome.report.key_object).expect("placed on a known key object");
        dump_maps(&dir, k, &outcome)?;
    }
    emit(sc.out.as_deref(), &(serde_json::to_string_pretty(&outcome.report)? + "\n"))
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.scenario)?;
    let sc = resolve_scenario(&args.scenario, &cfg, None)?;
    let seeds = match args.seeds.as_ref().or(cfg.seeds.as_ref()) {
        Some(s) => parse_seeds(s)?,
        None => bail!(Error::InvalidArgument("--seeds is required".into())),
    };
    let data = load(&sc)?;
    let rows = sweep(&data.spatial, &data.doc, &data.frames, &sc.step, &sc.params, &seeds)?;
    emit(sc.out.as_deref(), &sweep_csv(&rows))
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let spatial = SpatialProfile::from_json(read(&args.spatial)?.as_bytes())?;
    let script: TraceScript =
        serde_json::from_str(&read(&args.script)?).map_err(|e| Error::Parse(format!("{}: {e}", args.script.display())))?;
    let frames = generate_synthetic_trace(&script, &spatial, args.seed)?;
    emit(args.out.as_deref(), &write_trace(&frames))
}

/// Exit code for a failed command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::UnassignedStep(_)) => EXIT_UNASSIGNED,
        Some(Error::UnknownKeyObject(_)) => EXIT_MISSING_OBJECT,
        _ => EXIT_ERROR,
    }
}

pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Author(a) => cmd_author(a),
        Command::Place(a) => cmd_place(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::SynthTrace(a) => cmd_synth(a),
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
