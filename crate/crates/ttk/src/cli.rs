//! The `ttk` command line: fixture parsing and one report per subcommand.
//!
//! Every JSON report carries `"ttk_schema": 1` and deserializes back into
//! the same struct, so `--json` output can be re-read and re-checked.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::folds::{
    fold_factorization, invert_automorphism, is_inverse_pair, verify_factorization, FoldError, FoldReport,
};
use crate::graphs::{EdgePath, GraphError, GraphSpec, MarkedGraph, ValidationReport};
use crate::maps::{check_map, GraphSelfMap, MapError, MapReport, MapSpec};
use crate::nielsen::{
    classify, find_inp, nielsen_elimination, Classification, Elimination, EliminationOutcome, InpSearchOptions,
    NielsenError, NielsenPath, Verdict,
};
use crate::spectral::{
    charpoly, is_irreducible, metric_unchecked, pf_eigen, transition_matrix, PfData, SpectralError, TransitionMatrix,
};
use crate::wedge::{
    build_wedge, derive_parageometric, leaf_graph, nonfree_subgraph, verify_gap, GapReport, InverseEvidence, LeafGraph,
    NonFreeSubgraph, WedgeError,
};
use crate::words::{default_seeds, growth_rate, rose_automorphism, GrowthEstimate, WordError, DEFAULT_LENGTH_CAP};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{module}: {message}")]
    Module { module: &'static str, message: String },
}

impl CliError {
    /// 2 for unreadable or invalid input, 1 for analysis failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Module { module: "graphs" | "maps", .. } => 2,
            CliError::Module { .. } => 1,
        }
    }
}

macro_rules! module_error {
    ($($ty:ty => $name:literal),* $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Module { module: $name, message: e.to_string() }
            }
        }
    )*};
}

module_error! {
    GraphError => "graphs",
    MapError => "maps",
    SpectralError => "spectral",
    FoldError => "folds",
    WordError => "words",
    NielsenError => "nielsen",
    WedgeError => "wedge",
}

// ---------------------------------------------------------------------------
// Fixtures

fn schema() -> u32 {
    SCHEMA
}

/// A map either on an explicit graph or as a rose automorphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapBody {
    Graph { graph: GraphSpec, map: MapSpec },
    Rose { rank: usize, images: BTreeMap<String, String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureFile {
    #[serde(default = "schema")]
    pub ttk_schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(flatten)]
    pub body: MapBody,
    /// The map represents the `power`-th iterate of the automorphism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<MapBody>,
    /// A precomputed indivisible Nielsen path, as path tokens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub map: GraphSelfMap,
    pub power: usize,
    pub inverse: Option<GraphSelfMap>,
    pub rho: Option<EdgePath>,
    pub file: FixtureFile,
}

impl MapBody {
    pub fn from_map(m: &GraphSelfMap) -> Self {
        MapBody::Graph { graph: m.graph().to_spec(), map: m.to_spec() }
    }

    /// Rose shorthand when `m` lives on the standard rose, graph form otherwise.
    pub fn of(m: &GraphSelfMap) -> Self {
        if m.is_rose() && m.graph().vertex_name(0) == "v" {
            Self::rose_of(m)
        } else {
            Self::from_map(m)
        }
    }

    /// Rose shorthand; `m` must be a map on a rose.
    pub fn rose_of(m: &GraphSelfMap) -> Self {
        let spec = m.to_spec();
        MapBody::Rose { rank: m.graph().edge_count(), images: spec.edges }
    }

    pub fn to_map(&self) -> Result<GraphSelfMap, CliError> {
        match self {
            MapBody::Graph { graph, map } => {
                let g = MarkedGraph::from_spec(graph)?;
                Ok(GraphSelfMap::from_spec(g, map)?)
            }
            MapBody::Rose { rank, images } => {
                if images.len() != *rank {
                    return Err(CliError::Parse(format!("rank {rank} but {} images", images.len())));
                }
                let pairs: Vec<(&str, &str)> = images.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
                Ok(GraphSelfMap::rose(&pairs)?)
            }
        }
    }
}

impl Fixture {
    pub fn from_json(text: &str, name: &str) -> Result<Fixture, CliError> {
        let file: FixtureFile = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        Fixture::from_file(file, name)
    }

    pub fn from_file(file: FixtureFile, default_name: &str) -> Result<Fixture, CliError> {
        if file.ttk_schema != SCHEMA {
            return Err(CliError::Parse(format!("unsupported ttk_schema {}", file.ttk_schema)));
        }
        let map = file.body.to_map()?;
        let inverse = file.inverse.as_ref().map(MapBody::to_map).transpose()?;
        let rho = file.rho.as_deref().map(|s| map.graph().parse_path(s)).transpose()?;
        Ok(Fixture {
            name: file.name.clone().unwrap_or_else(|| default_name.to_string()),
            map,
            power: file.power.unwrap_or(1).max(1),
            inverse,
            rho,
            file,
        })
    }

    pub fn load(path: &Path) -> Result<Fixture, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("fixture");
        Fixture::from_json(&text, stem)
    }
}

// ---------------------------------------------------------------------------
// Arguments

#[derive(Debug, Parser)]
#[command(name = "ttk", version, about = "Train track maps of free-group outer automorphisms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 24)]
    pub max_power: usize,
    #[arg(long, global = true, default_value_t = 64)]
    pub max_back: usize,
    /// Leaf-graph BFS depth.
    #[arg(long, global = true, default_value_t = 6)]
    pub depth: usize,
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(long, global = true)]
    pub dot: bool,
    /// Exit with status 3 on an Indeterminate verdict.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Fixtures analysed concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate graph and map.
    Check { files: Vec<PathBuf> },
    /// Transition matrix and Perron–Frobenius data.
    Lambda { files: Vec<PathBuf> },
    /// Gates, illegal turns and local Whitehead graphs.
    Turns { files: Vec<PathBuf> },
    /// Stallings fold factorization.
    Folds { files: Vec<PathBuf> },
    /// Nielsen-path elimination and indivisible Nielsen path search.
    Nielsen { files: Vec<PathBuf> },
    /// Geometric / parageometric / neither.
    Classify { files: Vec<PathBuf> },
    /// Wedge-model valences, the non-free subgraph and leaf graphs.
    Wedge {
        files: Vec<PathBuf>,
        /// Edge for the leaf graph (default: every edge of the non-free subgraph).
        #[arg(long)]
        edge: Option<String>,
        /// Position along that edge in the eigen-metric (default: a generic interior point).
        #[arg(long)]
        position: Option<f64>,
    },
    /// Inverse of a rose automorphism.
    Invert { files: Vec<PathBuf> },
    /// Word-growth estimate of the expansion factor.
    Growth {
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Estimate the growth of the inverse automorphism instead.
        #[arg(long)]
        of_inverse: bool,
    },
    /// Check λ(φ⁻¹) ≤ λ′ < λ(φ) for a parageometric automorphism.
    VerifyGap {
        files: Vec<PathBuf>,
        /// Fixture holding a representative of φ⁻¹.
        #[arg(long)]
        inverse: Option<PathBuf>,
    },
}

impl Command {
    fn files(&self) -> &[PathBuf] {
        match self {
            Command::Check { files }
            | Command::Lambda { files }
            | Command::Turns { files }
            | Command::Folds { files }
            | Command::Nielsen { files }
            | Command::Classify { files }
            | Command::Wedge { files, .. }
            | Command::Invert { files }
            | Command::Growth { files, .. }
            | Command::VerifyGap { files, .. } => files,
        }
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub ttk_schema: u32,
    pub fixture: String,
    pub graph: ValidationReport,
    pub map: MapReport,
    pub rose: bool,
    pub train_track: bool,
    pub witness: Option<String>,
    pub irreducible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeValue {
    pub edge: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub ttk_schema: u32,
    pub fixture: String,
    pub matrix: TransitionMatrix,
    pub pf: PfData,
    /// Characteristic polynomial, leading coefficient first.
    pub charpoly: Vec<i64>,
    /// Eigen-metric lengths (left PF eigenvector), summing to 1.
    pub metric: Vec<EdgeValue>,
    pub stretch_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteheadJson {
    pub vertex: String,
    pub directions: Vec<String>,
    pub edges: Vec<String>,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnsReport {
    pub ttk_schema: u32,
    pub fixture: String,
    pub direction_map: BTreeMap<String, String>,
    pub gates: Vec<Vec<String>>,
    pub illegal_turns: Vec<String>,
    pub periodic: BTreeMap<String, usize>,
    pub period_lcm: u64,
    pub train_track: bool,
    pub witness: Option<String>,
    pub whitehead: Vec<WhiteheadJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldsReport {
    pub ttk_schema: u32,
    pub fixture: String,
    pub verified: bool,
    pub factorization: FoldReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationJson {
    pub outcome: EliminationOutcome,
    pub steps: usize,
    pub fold_steps: usize,
    pub rounds: usize,
    pub stages: usize,
    pub folds: usize,
    pub initial: Vec<String>,
    pub sizes: Vec<usize>,
    pub survivors: Vec<String>,
    pub cap: f64,
}

impl EliminationJson {
    fn new(g: &MarkedGraph, e: &Elimination) -> Self {
        EliminationJson {
            outcome: e.outcome,
            steps: e.steps,
            fold_steps: e.fold_steps,
            rounds: e.rounds,
            stages: e.stages,
            folds: e.folds,
            initial: e.initial.iter().map(|p| g.format_path(p)).collect(),
            sizes: e.sizes.clone(),
            survivors: e.survivors.iter().map(|p| g.format_path(p)).collect(),
            cap: e.cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpJson {
    pub power: usize,
    pub path: String,
    pub alpha: String,
    pub beta: String,
    pub closed: bool,
    pub length: f64,
}

impl InpJson {
    fn new(g: &MarkedGraph, p: &NielsenPath) -> Self {
        InpJson {
            power: p.power,
            path: g.format_path(&p.path),
            alpha: g.format_path(&p.alpha()),
            beta: g.format_path(&p.beta()),
            closed: p.closed,
            length: p.length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpSearchJson {
    pub power: usize,
    /// Edges after subdividing at periodic points.
    pub edges: usize,
    pub inps: Vec<InpJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NielsenReport {
    pub ttk_schema: u32,
    pub fixture: String,
    pub elimination: EliminationJson,
    pub power_bound: usize,
    pub searches: Vec<InpSearchJson>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub ttk_schema: u32,
    pub fixture: String,
    pub verdict: Verdict,
    pub inp: Option<InpJson>,
    pub edge_counts: BTreeMap<String, usize>,
    pub power_bound: usize,
    pub counts_per_power: Vec<usize>,
    pub elimination: Option<EliminationJson>,
    pub statements: Vec<String>,
    pub notes: Vec<String>,
}

impl ClassifyReport {
    fn new(fixture: &str, m: &GraphSelfMap, c: &Classification) -> Self {
        let g = m.graph();
        ClassifyReport {
            ttk_schema: SCHEMA,
            fixture: fixture.to_string(),
            verdict: c.verdict.clone(),
            inp: c.inp.as_ref().map(|p| InpJson::new(g, p)),
            edge_counts: c.edge_counts.iter().enumerate().map(|(e, &k)| (g.edge_name(e).to_string(), k)).collect(),
            power_bound: c.power_bound,
            counts_per_power: c.counts_per_power.clone(),
            elimination: c.elimination.as_ref().map(|e| EliminationJson::new(g, e)),
            statements: c.statements.clone(),
            notes: c.notes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafJson {
    pub edge: String,
    pub position: f64,
    pub graph: LeafGraph,
    pub valences_agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeReport {
    pub ttk_schema: u32,
    pub fixture: String,
    /// The analysed map represents this power of the fixture's automorphism.
    pub power: usize,
    pub representative: MapBody,
    pub rho: InpJson,
    pub lambda: f64,
    pub lengths: Vec<EdgeValue>,
    pub valence: BTreeMap<String, usize>,
    pub free_edges: Vec<String>,
    pub weighted_valence: f64,
    pub nonfree: NonFreeSubgraph,
    pub depth: usize,
    pub leaves: Vec<LeafJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertReport {
    pub ttk_schema: u32,
    pub fixture: String,
    pub verified: bool,
    /// `w` with `φ(φ⁻¹(x)) = w x w̄`.
    pub conjugator: String,
    pub inverse: FixtureFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub ttk_schema: u32,
    pub fixture: String,
    pub of_inverse: bool,
    pub growth: GrowthEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyGapReport {
    pub ttk_schema: u32,
    pub fixture: String,
    pub gap: GapReport,
    /// The Nielsen-unique representative used, as a re-loadable fixture.
    pub representative: FixtureFile,
}

// ---------------------------------------------------------------------------
// Commands

/// A rendered report plus whether its verdict was Indeterminate.
struct Rendered {
    text: String,
    indeterminate: bool,
}

fn render<T: Serialize>(flags: &Flags, report: &T, text: impl FnOnce() -> String) -> Result<Rendered, CliError> {
    let text = if flags.json {
        let mut s = serde_json::to_string_pretty(report).map_err(|e| CliError::Parse(e.to_string()))?;
        s.push('\n');
        s
    } else {
        text()
    };
    Ok(Rendered { text, indeterminate: false })
}

fn edge_values(g: &MarkedGraph, xs: &[f64]) -> Vec<EdgeValue> {
    xs.iter().enumerate().map(|(e, &value)| EdgeValue { edge: g.edge_name(e).to_string(), value }).collect()
}

fn check(fx: &Fixture, flags: &Flags) -> Result<Rendered, CliError> {
    let m = &fx.map;
    let tt = m.is_train_track();
    let report = CheckReport {
        ttk_schema: SCHEMA,
        fixture: fx.name.clone(),
        graph: m.graph().report(),
        map: check_map(m.graph(), m.vertex_images(), m.edge_images()),
        rose: m.is_rose(),
        train_track: tt.train_track,
        witness: tt
            .witness
            .map(|(e, i, t)| format!("g({}) crosses {} at position {i}", m.graph().edge_name(e), m.turn_label(&t))),
        irreducible: is_irreducible(&transition_matrix(m)),
    };
    render(flags, &report, || {
        let mut s = String::new();
        let g = &report.graph;
        let _ = writeln!(
            s,
            "{}: {} vertices, {} edges, rank {}, connected {}",
            report.fixture, g.vertex_count, g.edge_count, g.rank, g.connected
        );
        if !g.low_valence.is_empty() {
            let _ = writeln!(s, "low valence vertices: {}", g.low_valence.join(", "));
        }
        let _ = writeln!(s, "map valid: {}", report.map.valid);
        let _ = writeln!(s, "train track: {}", report.train_track);
        if let Some(w) = &report.witness {
            let _ = writeln!(s, "  {w}");
        }
        let _ = writeln!(s, "irreducible: {}", report.irreducible);
        s
    })
}

fn lambda(fx: &Fixture, flags: &Flags) -> Result<Rendered, CliError> {
    let m = &fx.map;
    let matrix = transition_matrix(m);
    let pf = pf_eigen(&matrix, flags.tol)?;
    let em = metric_unchecked(m, flags.tol)?;
    let report = LambdaReport {
        ttk_schema: SCHEMA,
        fixture: fx.name.clone(),
        charpoly: charpoly(&matrix).into_iter().map(|c| c as i64).collect(),
        metric: edge_values(m.graph(), &em.lengths),
        stretch_residual: em.max_stretch_residual,
        matrix,
        pf,
    };
    render(flags, &report, || {
        let mut s = format!("λ = {:.9}\n", report.pf.lambda);
        let _ = writeln!(s, "bracket [{:.12}, {:.12}]", report.pf.lower, report.pf.upper);
        let _ = writeln!(s, "primitive: {}", report.pf.primitive);
        for (row, e) in report.matrix.rows.iter().zip(&report.matrix.index) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "  {e:>4} | {}", cells.join(" "));
        }
        for ev in &report.metric {
            let _ = writeln!(s, "  ℓ({}) = {:.9}", ev.edge, ev.value);
        }
        s
    })
}

fn turns(fx: &Fixture, flags: &Flags) -> Result<Rendered, CliError> {
    let m = &fx.map;
    let g = m.graph();
    let gates = m.gates();
    let dm = m.direction_map();
    let tt = m.is_train_track();
    let whitehead: Vec<WhiteheadJson> = (0..g.vertex_count())
        .map(|v| {
            let wg = m.local_whitehead_graph(v);
            WhiteheadJson {
                vertex: g.vertex_name(v).to_string(),
                directions: wg.directions.iter().map(|&d| g.token(d)).collect(),
                edges: wg.edges.iter().map(|t| m.turn_label(t)).collect(),
                connected: wg.connected,
            }
        })
        .collect();
    let report = TurnsReport {
        ttk_schema: SCHEMA,
        fixture: fx.name.clone(),
        direction_map: g.directions().map(|d| (g.token(d), g.token(dm[d.index()]))).collect(),
        gates: gates.gates.iter().map(|gt| gt.iter().map(|&d| g.token(d)).collect()).collect(),
        illegal_turns: gates.illegal_turns.iter().map(|t| m.turn_label(t)).collect(),
        periodic: gates.periodic.iter().map(|&(d, p)| (g.token(d), p)).collect(),
        period_lcm: gates.period_lcm,
        train_track: tt.train_track,
        witness: tt
            .witness
            .map(|(e, i, t)| format!("g({}) crosses {} at position {i}", g.edge_name(e), m.turn_label(&t))),
        whitehead,
    };
    if flags.dot && !flags.json {
        let mut s = String::new();
        for w in &report.whitehead {
            let _ = writeln!(s, "graph \"{}\" {{", w.vertex);
            for d in &w.directions {
                let _ = writeln!(s, "  \"{d}\";");
            }
            for t in &w.edges {
                let inner = t.trim_start_matches('{').trim_end_matches('}');
                if let Some((a, b)) = inner.split_once(", ") {
                    let _ = writeln!(s, "  \"{a}\" -- \"{b}\";");
                }
            }
            s.push_str("}\n");
        }
        return Ok(Rendered { text: s, indeterminate: false });
    }
    render(flags, &report, || {
        let mut s = String::new();
        let _ = writeln!(s, "train track: {}", report.train_track);
        let _ = writeln!(
            s,
            "gates: {}",
            report.gates.iter().map(|g| format!("{{{}}}", g.join(", "))).collect::<Vec<_>>().join(" ")
        );
        let _ = writeln!(s, "illegal turns: {}", report.illegal_turns.join(" "));
        let _ = writeln!(s, "period lcm: {}", report.period_lcm);
        for w in &report.whitehead {
            let _ = writeln!(s, "Whitehead graph at {}: {} (connected {})", w.vertex, w.edges.join(" "), w.connected);
        }
        s
    })
}

fn folds(fx: &Fixture, flags: &Flags) -> Result<Rendered, CliError> {
    let seq = fold_factorization(&fx.map)?;
    let report = FoldsReport {
        ttk_schema: SCHEMA,
        fixture: fx.name.clone(),
        verified: verify_factorization(&seq, &fx.map),
        factorization: seq.to_report(),
    };
    render(flags, &report, || {
        let f = &report.factorization;
        let mut s = format!(
            "{} stages ({} folds, {} subdivisions), verified {}\n",
            f.stages.len(),
            f.folds,
            f.subdivisions,
            report.verified
        );
        for (i, st) in f.stages.iter().enumerate() {
            let _ = match st {
                crate::folds::Stage::Subdivide { edge, parts, vertex } => {
                    writeln!(s, "  {:>3}. subdivide {edge} = {} {} at {vertex}", i + 1, parts[0], parts[1])
                }
                crate::folds::Stage::Fold { keep, drop } => writeln!(s, "  {:>3}. fold {drop} onto {keep}", i + 1),
            };
        }
        s
    })
}

fn nielsen(fx: &Fixture, flags: &Flags) -> Result<Rendered, CliError> {
    let m = &fx.map;
    let g = m.graph();
    let elim = nielsen_elimination(m, flags.max_back, flags.tol)?;
    let power_bound = (m.gates().period_lcm as usize).min(flags.max_power).max(1);
    // An emptied elimination already rules out periodic Nielsen paths.
    let searches = if elim.outcome == EliminationOutcome::Empty {
        Vec::new()
    } else {
        find_inp(m, power_bound, InpSearchOptions::default(), flags.tol)?
            .iter()
            .map(|s| InpSearchJson {
                power: s.power,
                edges: s.map().graph().edge_count(),
                inps: s.inps.iter().map(|p| InpJson::new(s.map().graph(), p)).collect(),
            })
            .collect()
    };
    let summary = match elim.outcome {
        EliminationOutcome::Empty => format!("no periodic Nielsen paths (emptied after {} steps)", elim.steps),
        EliminationOutcome::Survivors => format!(
            "{} candidate paths survive after {} steps; {} indivisible Nielsen paths found for powers ≤ {power_bound}",
            elim.survivors.len(),
            elim.steps,
            searches.iter().map(|s: &InpSearchJson| s.inps.len()).sum::<usize>()
        ),
        EliminationOutcome::Exhausted => {
            format!("elimination did not settle within {} rounds ({} steps)", elim.rounds, elim.steps)
        }
    };
    let report = NielsenReport {
        ttk_schema: SCHEMA,
        fixture: fx.name.clone(),
        elimination: EliminationJson::new(g, &elim),
        power_bound,
        searches,
        summary,
    };
    render(flags, &report, || {
        let mut s = format!("{}\n", report.summary);
        let e = &report.elimination;
        let _ = writeln!(
            s,
            "initial illegal paths: {}; fold factorization: {} stages, {} folds",
            e.initial.len(),
            e.stages,
            e.folds
        );
        for sr in &report.searches {
            for p in &sr.inps {
                let _ = writeln!(
                    s,
                    "  g^{}: {}  (length {:.9}{})",
                    sr.power,
                    p.path,
                    p.length,
                    if p.closed { ", closed" } else { "" }
                );
            }
        }
        s
    })
}

fn classify_cmd(fx: &Fixture, flags: &Flags) -> Result<Rendered, CliError> {
    let c = classify(&fx.map, flags.max_power, flags.max_back, flags.tol);
    let report = ClassifyReport::new(&fx.name, &fx.map, &c);
    let mut r = render(flags, &report, || {
        let mut s = format!("verdict: {}\n", report.verdict.name());
        if let Verdict::Indeterminate(why) = &report.verdict {
            let _ = writeln!(s, "reason: {why}");
        }
        if let Some(p) = &report.inp {
            let _ = writeln!(s, "ρ = {}  (power {}, length {:.9})", p.path, p.power, p.length);
        }
        for st in &report.statements {
            let _ = writeln!(s, "{st}");
        }
        s
    })?;
    r.indeterminate = matches!(report.verdict, Verdict::Indeterminate(_));
    Ok(r)
}

/// A Nielsen-unique representative of some power of the fixture's
/// automorphism with its indivisible Nielsen path.
struct Representative {
    power: usize,
    map: GraphSelfMap,
    classification: Classification,
}

fn representative(fx: &Fixture, flags: &Flags) -> Result<Representative, CliError> {
    let c = classify(&fx.map, flags.max_power, flags.max_back, flags.tol);
    if let Some(rho) = &fx.rho {
        if c.verdict != Verdict::ParageometricCandidate && c.verdict != Verdict::GeometricCandidate {
            return Err(CliError::Module {
                module: "nielsen",
                message: format!(
                    "supplied ρ `{}` but the map classifies as {}",
                    fx.map.graph().format_path(rho),
                    c.verdict.name()
                ),
            });
        }
        let found = c.inp.as_ref().map(|p| crate::folds::canonical(&p.path) == crate::folds::canonical(rho));
        if found != Some(true) {
            return Err(CliError::Module {
                module: "nielsen",
                message: "supplied ρ is not the indivisible Nielsen path".into(),
            });
        }
    }
    match c.verdict {
        Verdict::ParageometricCandidate | Verdict::GeometricCandidate => {
            Ok(Representative { power: fx.power, map: fx.map.clone(), classification: c })
        }
        Verdict::NoPeriodicNielsenPath => Err(WedgeError::NotParageometric(c.verdict.name().into()).into()),
        Verdict::Indeterminate(_) => {
            let d = derive_parageometric(&fx.map, flags.max_power, flags.max_back, flags.tol)?;
            Ok(Representative { power: fx.power * d.power, map: d.map, classification: d.classification })
        }
    }
}

/// Generic interior point: the golden-section point of the edge.
const GENERIC_FRACTION: f64 = 0.381_966_011_250_105_1;

fn wedge(fx: &Fixture, flags: &Flags, edge: Option<&str>, position: Option<f64>) -> Result<Rendered, CliError> {
    let rep = representative(fx, flags)?;
    let rho = rep.classification.inp.as_ref().ok_or(WedgeError::NotNielsenUnique("no ρ".into()))?;
    let w = build_wedge(&rep.map, rho, flags.tol)?;
    let sub = nonfree_subgraph(&w, flags.tol)?;
    let g = rep.map.graph();
    let targets: Vec<(usize, f64)> = match edge {
        Some(name) => {
            let e = g.edge_id(name)?;
            vec![(e, position.unwrap_or(GENERIC_FRACTION * w.lengths[e]))]
        }
        None => sub.edge_ids.iter().map(|&e| (e, GENERIC_FRACTION * w.lengths[e])).collect(),
    };
    let leaves = targets
        .into_iter()
        .map(|(e, pos)| {
            let lg = leaf_graph(&w, e, pos, flags.depth)?;
            Ok(LeafJson {
                edge: g.edge_name(e).to_string(),
                position: pos,
                valences_agree: lg.valences_agree(),
                graph: lg,
            })
        })
        .collect::<Result<Vec<_>, WedgeError>>()?;
    if flags.dot && !flags.json {
        let text = leaves.iter().map(|l| l.graph.to_dot(&w)).collect::<String>();
        return Ok(Rendered { text, indeterminate: false });
    }
    let report = WedgeReport {
        ttk_schema: SCHEMA,
        fixture: fx.name.clone(),
        power: rep.power,
        representative: MapBody::from_map(&rep.map),
        rho: InpJson::new(g, rho),
        lambda: w.lambda,
        lengths: edge_values(g, &w.lengths),
        valence: w.valence.iter().enumerate().map(|(e, &k)| (g.edge_name(e).to_string(), k)).collect(),
        free_edges: w.free_edges.iter().map(|&e| g.edge_name(e).to_string()).collect(),
        weighted_valence: w.weighted_valence(),
        nonfree: sub,
        depth: flags.depth,
        leaves,
    };
    render(flags, &report, || {
        let mut s =
            format!("representative of φ^{} with {} edges, λ = {:.9}\n", report.power, g.edge_count(), report.lambda);
        let _ = writeln!(s, "ρ = {}", report.rho.path);
        let vals: Vec<String> = report.valence.iter().map(|(e, k)| format!("{e}:{k}")).collect();
        let _ = writeln!(s, "dihedral valence: {}", vals.join(" "));
        let _ = writeln!(s, "free edges: {}", report.free_edges.join(" "));
        let _ = writeln!(s, "G₁ = {{{}}}, λ′ = {:.9}", report.nonfree.edges.join(", "), report.nonfree.lambda_prime);
        for l in &report.leaves {
            let _ = writeln!(
                s,
                "leaf at {}@{:.6}: {} points, {} segments, acyclic {}, valences agree {}",
                l.edge,
                l.position,
                l.graph.points.len(),
                l.graph.segments.len(),
                l.graph.acyclic,
                l.valences_agree
            );
        }
        s
    })
}

fn as_rose(m: &GraphSelfMap) -> Result<GraphSelfMap, CliError> {
    if m.is_rose() {
        Ok(m.clone())
    } else {
        Ok(rose_automorphism(m)?.0)
    }
}

fn invert(fx: &Fixture, flags: &Flags) -> Result<Rendered, CliError> {
    let phi = as_rose(&fx.map)?;
    let inv = invert_automorphism(&phi)?;
    let w = is_inverse_pair(&phi, &inv)?;
    let report = InvertReport {
        ttk_schema: SCHEMA,
        fixture: fx.name.clone(),
        verified: w.is_some(),
        conjugator: w.map(|w| w.format(phi.graph())).unwrap_or_default(),
        inverse: FixtureFile {
            ttk_schema: SCHEMA,
            name: Some(format!("{}_inv", fx.name)),
            description: None,
            body: MapBody::rose_of(&inv),
            power: None,
            inverse: Some(MapBody::rose_of(&phi)),
            rho: None,
        },
    };
    render(flags, &report, || {
        let mut s = String::new();
        if let MapBody::Rose { images, .. } = &report.inverse.body {
            for (k, v) in images {
                let _ = writeln!(s, "{k} -> {v}");
            }
        }
        let _ = writeln!(s, "inverse pair: {}", report.verified);
        s
    })
}

fn growth(fx: &Fixture, flags: &Flags, n: usize, of_inverse: bool) -> Result<Rendered, CliError> {
    let phi = as_rose(&fx.map)?;
    let target = if of_inverse {
        match &fx.inverse {
            Some(m) => as_rose(m)?,
            None => invert_automorphism(&phi)?,
        }
    } else {
        phi
    };
    let seeds = default_seeds(target.graph().edge_count());
    let est = growth_rate(&target, &seeds, n, DEFAULT_LENGTH_CAP)?;
    let report = GrowthReport { ttk_schema: SCHEMA, fixture: fx.name.clone(), of_inverse, growth: est };
    render(flags, &report, || {
        let g = &report.growth;
        let mut s = format!(
            "growth{} ≈ {:.6} (N = {}, {} seeds)\n",
            if of_inverse { " of inverse" } else { "" },
            g.estimate,
            g.requested,
            g.seeds.len()
        );
        if g.truncated {
            s.push_str("warning: length cap reached before N\n");
        }
        if g.non_monotone {
            s.push_str("warning: ratio sequence not monotone\n");
        }
        s
    })
}

fn inverse_evidence(m: &GraphSelfMap) -> Result<InverseEvidence, CliError> {
    let ok = m.is_train_track().train_track && is_irreducible(&transition_matrix(m));
    if ok {
        return Ok(InverseEvidence::Representative(m.clone()));
    }
    let r = as_rose(m)?;
    let seeds = default_seeds(r.graph().edge_count());
    Ok(InverseEvidence::Growth(growth_rate(&r, &seeds, 24, DEFAULT_LENGTH_CAP)?))
}

fn verify_gap_cmd(fx: &Fixture, flags: &Flags, inverse: Option<&Fixture>) -> Result<Rendered, CliError> {
    let inv_map = inverse.map(|f| &f.map).or(fx.inverse.as_ref()).ok_or(WedgeError::MissingInverseEvidence)?;
    let evidence = inverse_evidence(inv_map)?;
    let rep = representative(fx, flags)?;
    let (gap, _, _) = verify_gap(&rep.map, rep.power, &rep.classification, Some(&evidence), flags.tol)?;
    let report = VerifyGapReport {
        ttk_schema: SCHEMA,
        fixture: fx.name.clone(),
        representative: FixtureFile {
            ttk_schema: SCHEMA,
            name: Some(format!("{}_nielsen_unique", fx.name)),
            description: Some(format!(
                "Nielsen-unique parageometric representative of the power {} of {}",
                rep.power, fx.name
            )),
            body: MapBody::from_map(&rep.map),
            power: Some(rep.power),
            inverse: Some(MapBody::of(inv_map)),
            rho: rep.classification.inp.as_ref().map(|p| rep.map.graph().format_path(&p.path)),
        },
        gap,
    };
    render(flags, &report, || {
        let g = &report.gap;
        let mut s = format!(
            "power {}: λ(φ) = {}, λ′ = {}, λ(φ⁻¹) = {}\n",
            g.power, g.lambda_phi, g.lambda_prime, g.lambda_phi_inverse
        );
        let _ = writeln!(s, "per step: λ(φ) = {}, λ′ = {}, λ(φ⁻¹) = {}", g.per_step[0], g.per_step[1], g.per_step[2]);
        let _ = writeln!(s, "margin {}", g.margin);
        let _ = writeln!(s, "verdict: {}", g.verdict);
        for st in &g.statements {
            let _ = writeln!(s, "{st}");
        }
        s
    })
}

// ---------------------------------------------------------------------------
// Driver

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn run_one(cmd: &Command, flags: &Flags, path: &Path, inverse: Option<&Fixture>) -> Result<Rendered, CliError> {
    let fx = Fixture::load(path)?;
    match cmd {
        Command::Check { .. } => check(&fx, flags),
        Command::Lambda { .. } => lambda(&fx, flags),
        Command::Turns { .. } => turns(&fx, flags),
        Command::Folds { .. } => folds(&fx, flags),
        Command::Nielsen { .. } => nielsen(&fx, flags),
        Command::Classify { .. } => classify_cmd(&fx, flags),
        Command::Wedge { edge, position, .. } => wedge(&fx, flags, edge.as_deref(), *position),
        Command::Invert { .. } => invert(&fx, flags),
        Command::Growth { n, of_inverse, .. } => growth(&fx, flags, *n, *of_inverse),
        Command::VerifyGap { .. } => verify_gap_cmd(&fx, flags, inverse),
    }
}

/// Parses `args` (including the program name) and runs the command. Each
/// fixture's report is produced whole and emitted in input order.
pub fn run<I, T>(args: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Output { code, stdout: text, stderr: String::new() }
            } else {
                Output { code, stdout: String::new(), stderr: text }
            };
        }
    };
    execute(&cli)
}

pub fn execute(cli: &Cli) -> Output {
    let files = cli.command.files();
    let mut out = Output { code: 0, stdout: String::new(), stderr: String::new() };
    if files.is_empty() {
        out.code = 2;
        out.stderr = "parse error: no fixture given\n".into();
        return out;
    }
    let inverse = match &cli.command {
        Command::VerifyGap { inverse: Some(p), .. } => match Fixture::load(p) {
            Ok(f) => Some(f),
            Err(e) => {
                out.code = e.exit_code();
                out.stderr = format!("error: {e}\n");
                return out;
            }
        },
        _ => None,
    };
    let jobs = cli.flags.jobs.clamp(1, files.len());
    let mut results: Vec<Option<Result<Rendered, CliError>>> = (0..files.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (chunk_id, chunk) in results.chunks_mut(files.len().div_ceil(jobs)).enumerate() {
            let start = chunk_id * files.len().div_ceil(jobs);
            let (cmd, flags, inverse) = (&cli.command, &cli.flags, inverse.as_ref());
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(run_one(cmd, flags, &files[start + k], inverse));
                }
            });
        }
    });
    for (path, r) in files.iter().zip(results) {
        match r.expect("every fixture is processed") {
            Ok(r) => {
                out.stdout.push_str(&r.text);
                if r.indeterminate && cli.flags.strict && out.code == 0 {
                    out.code = 3;
                }
            }
            Err(e) => {
                let _ = writeln!(out.stderr, "error: {}: {e}", path.display());
                let c = e.exit_code();
                if out.code == 0 || out.code == 3 || c == 2 {
                    out.code = c;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI: &str = r#"{"ttk_schema":1,"rank":3,"images":{"A":"A C","B":"A","C":"B"}}"#;

    #[test]
    fn rose_shorthand_and_graph_form_agree() {
        let a = Fixture::from_json(PHI, "phi").unwrap();
        let body = MapBody::from_map(&a.map);
        let text = serde_json::to_string(&FixtureFile { body, ..a.file.clone() }).unwrap();
        let b = Fixture::from_json(&text, "phi").unwrap();
        assert_eq!(a.map, b.map);
    }

    #[test]
    fn bad_inputs_are_parse_errors() {
        for bad in [
            "{",
            r#"{"ttk_schema":2,"rank":1,"images":{"A":"A"}}"#,
            r#"{"rank":2,"images":{"A":"A"}}"#,
            r#"{"rank":1,"images":{"A":"Z"}}"#,
        ] {
            let e = Fixture::from_json(bad, "x").unwrap_err();
            assert_eq!(e.exit_code(), 2, "{bad}: {e}");
        }
    }

    #[test]
    fn module_errors_name_the_module() {
        let e: CliError = NielsenError::NotTrainTrack.into();
        assert_eq!(e.to_string(), "nielsen: map is not a train track map");
        assert_eq!(e.exit_code(), 1);
    }
}
