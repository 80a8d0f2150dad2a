//! Batch front end. Every subcommand reads its inputs from JSON files, writes
//! its result to `--out` (or stdout), and places a run manifest next to each
//! written artifact.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure or a
//! failed check, 3 capacity exceeded.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::divergences::{max_relative_entropy, relative_entropy};
use crate::error::{Error, Result};
use crate::hypothesis::{lambda_point, positive_part_curve, stein_exponent_estimate};
use crate::linalg::fmt12;
use crate::measures::{log_robustness, rel_ent_to_set, smooth_from_certificate, FwOptions, SmoothingStrategy};
use crate::povm::{ic_povm, km_estimate, tetrahedral_frame, Frame};
use crate::protocol::{closest_separable, curve_csv, simulate_alternative, simulate_null, Adversary, ProtocolConfig};
use crate::state_sets::{
    family_property_check, ppt_set, sep_inner_set, ConvexSet, PptFamily, SepInnerFamily, SetDescriptor, SetFamily, SingletonFamily,
};
use crate::states::{max_entangled, read_state, DensityMatrix};
use crate::symmetry::definetti_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "steinlab", version, about = "Hypothesis testing against convex sets of quantum states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// S(ρ‖σ) and S_max(ρ‖σ) in bits.
    Divergence(DivergenceArgs),
    /// Relative entropy distance of ρ to a convex set.
    Measure(MeasureArgs),
    /// Log global robustness of ρ with respect to a convex set.
    Robustness(RobustnessArgs),
    /// −log₂ β_n(ε)/n for n = 1..nmax.
    SteinCurve(SteinArgs),
    /// Primal and dual values of λ(π, M, K).
    LambdaDuality(LambdaArgs),
    /// y ↦ min_ω tr(ρ^⊗n − 2^{yn} ω)_+ over a set family.
    PositivePartCurve(PositivePartArgs),
    /// Post-selection bounds on random symmetric states.
    DefinettiCheck(DefinettiArgs),
    /// Build an informationally complete POVM and its dual frame.
    PovmBuild(PovmArgs),
    /// Monte-Carlo run of the entanglement test.
    ProtocolSim(ProtocolArgs),
    /// Randomized check of the five closure properties of a set family.
    PropertySuite(PropertyArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct DivergenceArgs {
    #[arg(long)]
    pub rho: PathBuf,
    #[arg(long)]
    pub sigma: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct MeasureArgs {
    #[arg(long)]
    pub rho: PathBuf,
    /// Set descriptor JSON, or `ppt` / `sep-inner` on the layout of ρ.
    #[arg(long)]
    pub set: String,
    #[arg(long, default_value_t = 400)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum Strategy {
    Dr,
    Mixing,
    Best,
}

#[derive(Args, Debug, Serialize)]
pub struct RobustnessArgs {
    #[arg(long)]
    pub rho: PathBuf,
    #[arg(long)]
    pub set: String,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Smoothing radius ε in trace norm.
    #[arg(long)]
    pub smooth: Option<f64>,
    #[arg(long, value_enum, default_value_t = Strategy::Best)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct SteinArgs {
    #[arg(long)]
    pub rho: PathBuf,
    #[arg(long)]
    pub sigma: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub nmax: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct LambdaArgs {
    #[arg(long)]
    pub pi: PathBuf,
    #[arg(long)]
    pub set: String,
    /// Comma-separated K values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum FamilyKind {
    Ppt,
    SepInner,
    Singleton,
}

#[derive(Args, Debug, Serialize)]
pub struct PositivePartArgs {
    #[arg(long)]
    pub rho: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyKind,
    /// Inner family evaluated alongside (an upper curve).
    #[arg(long, value_enum)]
    pub inner: Option<FamilyKind>,
    /// σ for the singleton family.
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct DefinettiArgs {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub states: usize,
    #[arg(long, default_value_t = 0.3)]
    pub min_overlap: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// Tetrahedral frame on qubits, random frames elsewhere.
    #[default]
    Tetrahedral,
    Random,
}

#[derive(Args, Debug, Serialize)]
pub struct PovmArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_enum, default_value_t = FrameKind::Random)]
    pub kind: FrameKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampled pairs for the K lower bound; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub km_trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Acceptance curve as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct PropertyArgs {
    #[arg(long, value_enum)]
    pub family: FamilyKind,
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub da: usize,
    #[arg(long, default_value_t = 2)]
    pub db: usize,
    #[arg(long, default_value_t = 2)]
    pub nmax: usize,
    #[arg(long, default_value_t = 4)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Protocol run description read by `protocol-sim`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolFile {
    /// `bell`, or a state file relative to the configuration file.
    #[serde(default = "default_target")]
    pub target: String,
    pub n: usize,
    /// Grid for the adversary curve; defaults to `[n]`.
    #[serde(default)]
    pub n_grid: Vec<usize>,
    pub alpha: f64,
    pub eps_gap: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub frame: FrameKind,
    #[serde(default)]
    pub frame_seed: u64,
    #[serde(default)]
    pub adversary: AdversarySpec,
}

fn default_target() -> String {
    "bell".into()
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversarySpec {
    #[default]
    None,
    ClosestSeparable,
    MaximallyMixed,
    Iid { state: PathBuf },
    PermutedProducts { states: Vec<PathBuf> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: Value,
    /// SHA-256 of every input file, keyed by path.
    pub input_hashes: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Manifest written next to `artifact`.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Capacity { .. } => EXIT_CAPACITY,
        Error::Domain { .. } | Error::Numerical(_) | Error::Support { .. } | Error::NotPermutationInvariant { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

struct Run {
    subcommand: &'static str,
    parameters: Value,
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
    started: Instant,
    artifacts: Vec<PathBuf>,
}

impl Run {
    fn new(subcommand: &'static str, parameters: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(Self { subcommand, parameters: serde_json::to_value(parameters)?, inputs: Vec::new(), seed, started: Instant::now(), artifacts: Vec::new() })
    }

    fn input(&mut self, p: &Path) -> &mut Self {
        self.inputs.push(p.to_path_buf());
        self
    }

    /// Writes `body` to `out` or prints it.
    fn emit(&mut self, out: Option<&Path>, body: &str) -> Result<()> {
        match out {
            Some(p) => {
                std::fs::write(p, body)?;
                self.artifacts.push(p.to_path_buf());
            }
            None => print!("{body}"),
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.artifacts.is_empty() {
            return Ok(());
        }
        let mut input_hashes = BTreeMap::new();
        for p in &self.inputs {
            input_hashes.insert(p.display().to_string(), sha256_hex(&std::fs::read(p)?));
        }
        let manifest = RunManifest {
            subcommand: self.subcommand.into(),
            parameters: self.parameters,
            input_hashes,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            artifacts: self.artifacts.iter().map(|p| p.display().to_string()).collect(),
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        for a in &self.artifacts {
            std::fs::write(manifest_path(a), &text)?;
        }
        Ok(())
    }
}

/// JSON number, or a string for ±∞ and NaN.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

fn pretty(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn load_state(path: &Path) -> Result<DensityMatrix> {
    Ok(read_state(path)?.into_density())
}

/// Set from a descriptor file, or a named set on the layout of `rho`.
fn load_set(spec: &str, rho: &DensityMatrix, seed: u64, run: &mut Run) -> Result<Box<dyn ConvexSet>> {
    match spec {
        "ppt" => Ok(Box::new(ppt_set(rho.dims())?)),
        "sep-inner" | "sep_inner" => Ok(Box::new(sep_inner_set(rho.dims(), 16, seed)?)),
        path => {
            let p = Path::new(path);
            run.input(p);
            let d: SetDescriptor = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            d.build()
        }
    }
}

fn family(kind: FamilyKind, copy_dims: &[usize], sigma: Option<&DensityMatrix>, seed: u64) -> Result<Box<dyn SetFamily>> {
    let bipartite = || -> Result<(usize, usize)> {
        match copy_dims {
            [a, b] => Ok((*a, *b)),
            _ => Err(Error::InvalidSubsystems(format!("family needs a bipartite copy, got {copy_dims:?}"))),
        }
    };
    Ok(match kind {
        FamilyKind::Ppt => {
            let (a, b) = bipartite()?;
            Box::new(PptFamily::new(a, b))
        }
        FamilyKind::SepInner => {
            let (a, b) = bipartite()?;
            Box::new(SepInnerFamily::new(a, b, 16, seed))
        }
        FamilyKind::Singleton => {
            let s = sigma.ok_or_else(|| Error::InvalidArgument("the singleton family needs --sigma".into()))?;
            Box::new(SingletonFamily::new(s.clone()))
        }
    })
}

fn local_frames(dims: &[usize], kind: FrameKind, seed: u64) -> Result<Vec<Frame>> {
    dims.iter()
        .enumerate()
        .map(|(i, &d)| match kind {
            FrameKind::Tetrahedral if d == 2 => tetrahedral_frame(),
            _ => ic_povm(d, crate::random::child_seed(seed, i as u64)),
        })
        .collect()
}

fn divergence(a: &DivergenceArgs) -> Result<()> {
    let mut run = Run::new("divergence", a, None)?;
    run.input(&a.rho).input(&a.sigma);
    let rho = load_state(&a.rho)?;
    let sigma = load_state(&a.sigma)?;
    let s = relative_entropy(&rho, &sigma)?;
    let smax = max_relative_entropy(&rho, &sigma)?;
    let body = pretty(&json!({
        "relative_entropy": num(s.value),
        "max_relative_entropy": num(smax.value),
        "support_ok": s.support_ok,
    }))?;
    run.emit(a.out.as_deref(), &body)?;
    run.finish()
}

fn measure(a: &MeasureArgs) -> Result<()> {
    let mut run = Run::new("measure", a, Some(a.seed))?;
    run.input(&a.rho);
    let rho = load_state(&a.rho)?;
    let set = load_set(&a.set, &rho, a.seed, &mut run)?;
    let r = rel_ent_to_set(&rho, set.as_ref(), &FwOptions { max_iter: a.max_iter, tol: a.tol, cancel: None })?;
    let body = pretty(&json!({ "set": set.label(), "result": r }))?;
    run.emit(a.out.as_deref(), &body)?;
    run.finish()
}

fn robustness(a: &RobustnessArgs) -> Result<()> {
    let mut run = Run::new("robustness", a, Some(a.seed))?;
    run.input(&a.rho);
    let rho = load_state(&a.rho)?;
    let set = load_set(&a.set, &rho, a.seed, &mut run)?;
    let base = log_robustness(&rho, set.as_ref(), a.tol)?;
    let smooth = match a.smooth {
        Some(eps) => {
            let strategy = match a.strategy {
                Strategy::Dr => SmoothingStrategy::Dr,
                Strategy::Mixing => SmoothingStrategy::Mixing,
                Strategy::Best => SmoothingStrategy::Best,
            };
            Some(smooth_from_certificate(&rho, &base, eps, strategy)?)
        }
        None => None,
    };
    let body = pretty(&json!({ "set": set.label(), "log_robustness": base, "smoothed_upper_bound": smooth }))?;
    run.emit(a.out.as_deref(), &body)?;
    run.finish()
}

fn stein_curve(a: &SteinArgs) -> Result<()> {
    let mut run = Run::new("stein-curve", a, None)?;
    run.input(&a.rho).input(&a.sigma);
    let rho = load_state(&a.rho)?;
    let sigma = load_state(&a.sigma)?;
    let curve = stein_exponent_estimate(&rho, &sigma, a.eps, a.nmax)?;
    run.emit(a.out.as_deref(), &curve.to_csv())?;
    run.finish()
}

fn lambda_duality(a: &LambdaArgs) -> Result<()> {
    let mut run = Run::new("lambda-duality", a, Some(a.seed))?;
    run.input(&a.pi);
    let pi = load_state(&a.pi)?;
    let set = load_set(&a.set, &pi, a.seed, &mut run)?;
    let mut csv = String::from("k,primal,dual,gap,certified\n");
    for &k in &a.k {
        let p = lambda_point(&pi, set.as_ref(), k, a.budget, &FwOptions::default(), a.seed)?;
        csv.push_str(&format!("{},{},{},{},{}\n", fmt12(p.k), fmt12(p.primal), fmt12(p.dual), fmt12(p.gap), p.certified));
    }
    run.emit(a.out.as_deref(), &csv)?;
    run.finish()
}

fn positive_part(a: &PositivePartArgs) -> Result<()> {
    let mut run = Run::new("positive-part-curve", a, Some(a.seed))?;
    run.input(&a.rho);
    let rho = load_state(&a.rho)?;
    let sigma = match &a.sigma {
        Some(p) => {
            run.input(p);
            Some(load_state(p)?)
        }
        None => None,
    };
    let outer = family(a.family, rho.dims(), sigma.as_ref(), a.seed)?;
    let inner = a.inner.map(|k| family(k, rho.dims(), sigma.as_ref(), a.seed)).transpose()?;
    let curve = positive_part_curve(&rho, outer.as_ref(), inner.as_deref(), a.n, &a.y, &FwOptions::default())?;
    let mut csv = String::from("y,outer_value,outer_lower,inner_value\n");
    for p in &curve.points {
        let inner = p.inner_value.map(fmt12).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{}\n", fmt12(p.y), fmt12(p.outer_value), fmt12(p.outer_lower), inner));
    }
    run.emit(a.out.as_deref(), &csv)?;
    run.finish()
}

fn definetti(a: &DefinettiArgs) -> Result<()> {
    let mut run = Run::new("definetti-check", a, Some(a.seed))?;
    let suite = definetti_suite(a.d, a.n, a.states, a.min_overlap, a.seed, 1e-9)?;
    run.emit(a.out.as_deref(), &pretty(&suite)?)?;
    run.finish()?;
    if suite.failures > 0 {
        return Err(Error::Numerical(format!("{} of {} post-selection checks failed", suite.failures, suite.instances)));
    }
    Ok(())
}

fn povm_build(a: &PovmArgs) -> Result<()> {
    let mut run = Run::new("povm-build", a, Some(a.seed))?;
    let frame = match a.kind {
        FrameKind::Tetrahedral if a.d == 2 => tetrahedral_frame()?,
        FrameKind::Tetrahedral => return Err(Error::InvalidArgument("the tetrahedral frame exists for d = 2 only".into())),
        FrameKind::Random => ic_povm(a.d, a.seed)?,
    };
    let km = if a.km_trials > 0 { Some(km_estimate(&frame, a.km_trials, a.seed)?) } else { None };
    let summary = json!({
        "d": a.d,
        "elements": frame.len(),
        "gram_condition": num(frame.gram_condition),
        "resolution_error": num(frame.resolution_error()),
        "km": km,
    });
    match &a.out {
        Some(p) => {
            frame.write_json(p)?;
            run.artifacts.push(p.clone());
            print!("{}", pretty(&summary)?);
        }
        None => print!("{}", pretty(&summary)?),
    }
    run.finish()
}

/// Resolves a protocol configuration into library types.
pub fn protocol_setup(file: &ProtocolFile, base_dir: &Path, seed: u64) -> Result<(ProtocolConfig, Option<Adversary>, Vec<PathBuf>)> {
    let mut inputs = Vec::new();
    let mut state = |p: &Path| -> Result<DensityMatrix> {
        let full = base_dir.join(p);
        let s = load_state(&full)?;
        inputs.push(full);
        Ok(s)
    };
    let target = if file.target == "bell" { max_entangled(2).density() } else { state(Path::new(&file.target))? };
    let frames = local_frames(target.dims(), file.frame, file.frame_seed)?;
    let adversary = match &file.adversary {
        AdversarySpec::None => None,
        AdversarySpec::ClosestSeparable => Some(Adversary::Iid(closest_separable(&target, seed)?)),
        AdversarySpec::MaximallyMixed => Some(Adversary::Iid(DensityMatrix::maximally_mixed(target.dims()))),
        AdversarySpec::Iid { state: p } => Some(Adversary::Iid(state(p)?)),
        AdversarySpec::PermutedProducts { states } => Some(Adversary::PermutedProducts(states.iter().map(|p| state(p)).collect::<Result<_>>()?)),
    };
    let config = ProtocolConfig { target, n: file.n, alpha: file.alpha, eps_gap: file.eps_gap, frames, trials: file.trials, seed };
    Ok((config, adversary, inputs))
}

fn protocol_sim(a: &ProtocolArgs) -> Result<()> {
    let file: ProtocolFile = serde_json::from_str(&std::fs::read_to_string(&a.config)?)?;
    let seed = a.seed.unwrap_or(file.seed);
    let mut run = Run::new("protocol-sim", &json!({ "args": a, "config": file }), Some(seed))?;
    run.input(&a.config);
    let base_dir = a.config.parent().unwrap_or(Path::new("."));
    let (config, adversary, inputs) = protocol_setup(&file, base_dir, seed)?;
    for p in &inputs {
        run.input(p);
    }
    let null = simulate_null(&config)?;
    let grid = if file.n_grid.is_empty() { vec![file.n] } else { file.n_grid.clone() };
    let alternative = adversary.as_ref().map(|adv| simulate_alternative(&config, adv, &grid)).transpose()?;
    let body = pretty(&json!({ "threshold": num(config.threshold()), "null": null, "alternative": alternative }))?;
    run.emit(a.out.as_deref(), &body)?;
    if let Some(p) = &a.csv {
        let points = alternative.as_ref().map_or_else(|| vec![null.clone()], |r| r.points.clone());
        std::fs::write(p, curve_csv(&points))?;
        run.artifacts.push(p.clone());
    }
    run.finish()
}

fn property_suite(a: &PropertyArgs) -> Result<()> {
    let mut run = Run::new("property-suite", a, Some(a.seed))?;
    let sigma = match &a.sigma {
        Some(p) => {
            run.input(p);
            Some(load_state(p)?)
        }
        None => None,
    };
    let copy_dims = sigma.as_ref().map_or_else(|| vec![a.da, a.db], |s| s.dims().to_vec());
    let fam = family(a.family, &copy_dims, sigma.as_ref(), a.seed)?;
    let report = family_property_check(fam.as_ref(), a.nmax, a.trials, a.seed)?;
    run.emit(a.out.as_deref(), &pretty(&report)?)?;
    run.finish()?;
    if !report.all_passed() {
        let failed: Vec<&str> = report.clauses.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        return Err(Error::Numerical(format!("closure clauses failed: {}", failed.join(", "))));
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Divergence(a) => divergence(a),
        Command::Measure(a) => measure(a),
        Command::Robustness(a) => robustness(a),
        Command::SteinCurve(a) => stein_curve(a),
        Command::LambdaDuality(a) => lambda_duality(a),
        Command::PositivePartCurve(a) => positive_part(a),
        Command::DefinettiCheck(a) => definetti(a),
        Command::PovmBuild(a) => povm_build(a),
        Command::ProtocolSim(a) => protocol_sim(a),
        Command::PropertySuite(a) => property_suite(a),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&Error::Capacity { requested: 10, limit: 4 }), EXIT_CAPACITY);
        assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), EXIT_USAGE);
        assert_eq!(run(["steinlab", "no-such-command"]), EXIT_USAGE);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn protocol_file_defaults() {
        let f: ProtocolFile = serde_json::from_str(r#"{"n": 40, "alpha": 0.5, "eps_gap": 0.4, "trials": 10}"#).unwrap();
        assert_eq!(f.target, "bell");
        assert!(matches!(f.adversary, AdversarySpec::None));
        let f: ProtocolFile =
            serde_json::from_str(r#"{"n": 40, "alpha": 0.5, "eps_gap": 0.4, "trials": 10, "adversary": {"kind": "maximally_mixed"}}"#).unwrap();
        assert!(matches!(f.adversary, AdversarySpec::MaximallyMixed));
    }
}
