//! `raimi`: shift certificates and equidistribution sweeps from the command line.
//!
//! Every run writes JSON Lines: a header record carrying the full configuration,
//! then one record per trial. The exit status is 0 when every certificate
//! passes, 1 when some certificate fails, and 2 on any error, in which case a
//! JSON error record goes to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use raimi_core::coloring::{derive_seed, Carrier, ColoringKind, ColoringSpec};
use raimi_core::cyclic::{build_partition, find_shift, CYCLIC_SCHEMA_VERSION};
use raimi_core::fs::{build_fs, verify_fs, verify_fs_sampled, EXHAUSTIVE_LIMIT};
use raimi_core::lattice::{parse_family, relation_lattice};
use raimi_core::numeric::{CertifiedReal, Precision, RealConst, Threshold};
use raimi_core::sl2::{check_sl2_precondition, find_shift_sl2, Sl2Group, Sl2Options, SL2_SCHEMA_VERSION};
use raimi_core::torus::{hd_certificate, HdParams, PlanParams, TorusPartitionSpec, HD_SCHEMA_VERSION};
use raimi_core::weyl::{equidist_on_h, find_x_eps, poly_raimi_certificate, Frequency, PolyParams, XEpsOptions, POLY_SCHEMA_VERSION};
use raimi_core::{Error, Result};

/// Schema of the `fs` and `equidist` records.
const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "raimi", version, about = "Shift certificates for Raimi-type partitions")]
struct Cli {
    /// Working precision in bits for certified arithmetic.
    #[arg(long, env = "RAIMI_PRECISION_BITS", global = true, default_value_t = Precision::default().bits)]
    precision_bits: u32,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Diagonal shifts of a colored box `[1, M]^k`.
    Hd(HdArgs),
    /// Polynomial shifts `x0 + P_j(h)` of a colored box.
    Poly(PolyArgs),
    /// Shift certificates on the cyclic group `Z_N`.
    Cyclic(CyclicArgs),
    /// Shift certificates on `SL2(F_q)`.
    Sl2(Sl2Args),
    /// Return times of `(βP_1(h), ..., βP_f(h))` near zero, with Weyl sums.
    Equidist(EquidistArgs),
    /// Build and verify a finite-sum sequence.
    Fs(FsArgs),
}

#[derive(Args, Debug, Serialize)]
struct BoxArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    r: u32,
    #[arg(long, default_value_t = 2)]
    t: u32,
    /// Side length `M` of the box.
    #[arg(long = "box", default_value_t = 1000)]
    #[serde(rename = "box")]
    side: u64,
    /// random, intervals, residues, fourier-sparse, fiber-constant or adversarial-left-pack.
    #[arg(long, default_value = "random")]
    coloring: String,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    delta_grid: f64,
    #[arg(long, default_value_t = PlanParams::default().x0_max)]
    x0_max: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct HdArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: BoxArgs,
    /// Length of the finite-sum sequence.
    #[arg(long, default_value_t = HdParams::default().fs_len)]
    fs_len: usize,
    #[arg(long, default_value_t = HdParams::default().h_budget)]
    h_budget: u64,
    #[arg(long, default_value_t = HdParams::default().h_samples)]
    h_samples: usize,
}

#[derive(Args, Debug, Serialize)]
struct PolyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: BoxArgs,
    #[arg(long, default_value = "x,x^2")]
    polys: String,
    #[arg(long, default_value_t = PolyParams::default().scan_n)]
    scan_n: u64,
    #[arg(long, default_value_t = PolyParams::default().h_count)]
    h_count: usize,
}

#[derive(Args, Debug, Serialize)]
struct CyclicArgs {
    /// Group order; taken from the file when `--coloring` names one.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 2)]
    r: u32,
    #[arg(long, default_value_t = 2)]
    t: u32,
    /// A procedural kind, or a file with one color per line.
    #[arg(long, default_value = "random")]
    coloring: String,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct Sl2Args {
    #[arg(long)]
    q: u64,
    #[arg(long, default_value_t = 2)]
    r: u32,
    #[arg(long, default_value_t = 2)]
    t: u32,
    #[arg(long, default_value = "random")]
    coloring: String,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop the `q > 8rt` requirement (the bound is then not guaranteed).
    #[arg(long)]
    relaxed: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EquidistArgs {
    #[arg(long, default_value = "sqrt2")]
    beta: String,
    #[arg(long)]
    polys: String,
    #[arg(long)]
    eps: String,
    #[arg(long)]
    n: u64,
    /// Monte-Carlo samples for the predicted density when no exact value exists.
    #[arg(long, default_value_t = XEpsOptions::default().measure_samples)]
    measure_samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the prefix sweep as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct FsArgs {
    #[arg(long, default_value = "golden")]
    beta: String,
    #[arg(long)]
    eps: String,
    #[arg(long)]
    k: usize,
    /// Sampled subset sums when `k` is above the exhaustive limit.
    #[arg(long, default_value_t = 1 << 16)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Records of one run and whether every certificate passed.
struct Output {
    records: Vec<Value>,
    pass: bool,
}

fn header(subcommand: &str, schema_version: u32, precision: Precision, config: &impl Serialize) -> Value {
    json!({
        "record": "header",
        "tool": "raimi",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "schema_version": schema_version,
        "precision": precision,
        "config": config,
    })
}

fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::InternalInvariantBroken(format!("serialization: {e}")))
}

fn trial_record(trial: u64, seed: u64, pass: bool, certificate: Value) -> Value {
    json!({ "record": "certificate", "trial": trial, "seed": seed, "pass": pass, "certificate": certificate })
}

fn coloring_kind(s: &str) -> Result<ColoringKind> {
    s.parse()
}

/// Runs `f` on every trial in parallel, keeping trial order.
fn run_trials<F>(trials: u64, root: u64, f: F) -> Result<Vec<(Value, bool)>>
where
    F: Fn(u64, u64) -> Result<(Value, bool)> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(root, i);
            f(i, seed).map(|(cert, pass)| (trial_record(i, seed, pass, cert), pass))
        })
        .collect()
}

fn collect(head: Value, trials: Vec<(Value, bool)>) -> Output {
    let pass = trials.iter().all(|(_, p)| *p);
    let mut records = vec![head];
    records.extend(trials.into_iter().map(|(v, _)| v));
    Output { records, pass }
}

fn box_spec(a: &BoxArgs, precision: Precision) -> Result<TorusPartitionSpec> {
    TorusPartitionSpec::new(a.k, a.r, precision)
}

fn box_coloring(a: &BoxArgs, seed: u64) -> Result<raimi_core::coloring::SpecBoxColoring> {
    ColoringSpec { kind: coloring_kind(&a.coloring)?, t: a.t, seed, carrier: Carrier::Box { k: a.k, side: a.side } }.box_coloring()
}

fn plan(a: &BoxArgs) -> PlanParams {
    PlanParams { x0_max: a.x0_max, ..PlanParams::default() }
}

fn run_hd(a: &HdArgs, precision: Precision) -> Result<Output> {
    let spec = box_spec(&a.common, precision)?;
    let trials = run_trials(a.common.trials, a.common.seed, |_, seed| {
        let coloring = box_coloring(&a.common, seed)?;
        let params = HdParams {
            delta_grid: a.common.delta_grid,
            fs_len: a.fs_len,
            h_budget: a.h_budget,
            h_samples: a.h_samples,
            seed,
            plan: plan(&a.common),
        };
        let cert = hd_certificate(&coloring, &spec, &params)?;
        Ok((to_value(&cert)?, cert.valid))
    })?;
    Ok(collect(header("hd", HD_SCHEMA_VERSION, precision, a), trials))
}

fn run_poly(a: &PolyArgs, precision: Precision) -> Result<Output> {
    let spec = box_spec(&a.common, precision)?;
    let polys = parse_family(&a.polys)?;
    let trials = run_trials(a.common.trials, a.common.seed, |_, seed| {
        let coloring = box_coloring(&a.common, seed)?;
        let params = PolyParams { delta_grid: a.common.delta_grid, plan: plan(&a.common), scan_n: a.scan_n, h_count: a.h_count };
        let cert = poly_raimi_certificate(&coloring, &spec, &polys, &params)?;
        Ok((to_value(&cert)?, cert.valid))
    })?;
    Ok(collect(header("poly", POLY_SCHEMA_VERSION, precision, a), trials))
}

fn read_color_file(path: &Path) -> Result<Vec<u32>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| l.parse().map_err(|_| Error::Parse(format!("{}: line {}: bad color {l:?}", path.display(), i + 1))))
        .collect()
}

fn run_cyclic(a: &CyclicArgs, precision: Precision) -> Result<Output> {
    let head = header("cyclic", CYCLIC_SCHEMA_VERSION, precision, a);
    match coloring_kind(&a.coloring) {
        Ok(kind) => {
            let n = a.n.ok_or_else(|| Error::Precondition("--n is required for procedural colorings".into()))?;
            let partition = build_partition(n, a.r, a.t)?;
            let trials = run_trials(a.trials, a.seed, |_, seed| {
                let colors = ColoringSpec { kind, t: a.t, seed, carrier: Carrier::Cyclic { n } }.table()?;
                let cert = find_shift(&colors, &partition)?;
                Ok((to_value(&cert)?, cert.pass))
            })?;
            Ok(collect(head, trials))
        }
        Err(_) => {
            let colors = read_color_file(Path::new(&a.coloring))?;
            let n = colors.len() as u64;
            if a.n.is_some_and(|given| given != n) {
                return Err(Error::Precondition(format!("--n {} does not match the {n} colors in the file", a.n.unwrap())));
            }
            let partition = build_partition(n, a.r, a.t)?;
            let cert = find_shift(&colors, &partition)?;
            Ok(collect(head, vec![(trial_record(0, a.seed, cert.pass, to_value(&cert)?), cert.pass)]))
        }
    }
}

fn run_sl2(a: &Sl2Args, precision: Precision) -> Result<Output> {
    check_sl2_precondition(a.q, a.r, a.t, a.relaxed)?;
    let kind = coloring_kind(&a.coloring)?;
    let g = Sl2Group::new(a.q)?;
    let trials = run_trials(a.trials, a.seed, |_, seed| {
        let colors = ColoringSpec { kind, t: a.t, seed, carrier: Carrier::Sl2 { q: a.q } }.table()?;
        let cert = find_shift_sl2(&g, &colors, a.r, a.t, Sl2Options { relaxed: a.relaxed })?;
        Ok((to_value(&cert)?, cert.pass))
    })?;
    Ok(collect(header("sl2", SL2_SCHEMA_VERSION, precision, a), trials))
}

fn run_equidist(a: &EquidistArgs, precision: Precision) -> Result<(Output, Option<String>)> {
    let beta = CertifiedReal::new(a.beta.parse::<RealConst>()?, precision);
    let polys = parse_family(&a.polys)?;
    let eps = Threshold::parse(&a.eps)?;
    let opts = XEpsOptions { measure_samples: a.measure_samples, seed: a.seed, ..XEpsOptions::default() };
    let report = find_x_eps(&beta, &polys, &eps, a.n, opts)?;
    let lattice = relation_lattice(&polys)?;
    let f = polys.len();
    let mut trial_ms: Vec<Vec<i64>> = (0..f).map(|i| (0..f).map(|j| (i == j) as i64).collect()).collect();
    for row in &lattice.basis {
        let m = row
            .iter()
            .map(|&x| i64::try_from(x).map_err(|_| Error::Precondition("relation vector exceeds 64 bits".into())))
            .collect::<Result<Vec<_>>>()?;
        trial_ms.push(m);
    }
    let rows = equidist_on_h(&Frequency::Real(beta), &polys, &trial_ms, a.n)?;
    let csv = report.sweep_csv();
    let record = json!({
        "record": "equidist",
        "relation_basis": lattice.basis.iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "weyl_sums": to_value(&rows)?,
        "report": to_value(&report)?,
    });
    let out = Output { records: vec![header("equidist", REPORT_SCHEMA_VERSION, precision, a), record], pass: true };
    Ok((out, Some(csv)))
}

fn run_fs(a: &FsArgs, precision: Precision) -> Result<Output> {
    let beta = CertifiedReal::new(a.beta.parse::<RealConst>()?, precision);
    let eps = Threshold::parse(&a.eps)?;
    let seq = build_fs(&beta, &eps, a.k)?;
    let report = if a.k <= EXHAUSTIVE_LIMIT { verify_fs(&seq, &beta)? } else { verify_fs_sampled(&seq, &beta, a.samples, a.seed)? };
    let record = json!({ "record": "fs", "pass": report.pass, "sequence": to_value(&seq)?, "report": to_value(&report)? });
    Ok(Output { records: vec![header("fs", REPORT_SCHEMA_VERSION, precision, a), record], pass: report.pass })
}

fn jsonl(records: &[Value]) -> String {
    records.iter().map(|r| format!("{r}\n")).collect()
}

/// Writes `contents` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Precondition(format!("cannot write {}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(out: &Output, path: Option<&Path>) -> Result<()> {
    let text = jsonl(&out.records);
    match path {
        Some(p) => write_atomic(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let precision = Precision::with_bits(cli.precision_bits);
    if precision.bits < 64 {
        return Err(Error::Precondition("precision must be at least 64 bits".into()));
    }
    let (out, path) = match &cli.command {
        Command::Hd(a) => (run_hd(a, precision)?, a.common.out.as_deref()),
        Command::Poly(a) => (run_poly(a, precision)?, a.common.out.as_deref()),
        Command::Cyclic(a) => (run_cyclic(a, precision)?, a.out.as_deref()),
        Command::Sl2(a) => (run_sl2(a, precision)?, a.out.as_deref()),
        Command::Fs(a) => (run_fs(a, precision)?, a.out.as_deref()),
        Command::Equidist(a) => {
            let (out, csv) = run_equidist(a, precision)?;
            if let (Some(p), Some(text)) = (&a.csv, csv) {
                write_atomic(p, &text)?;
            }
            (out, a.out.as_deref())
        }
    };
    emit(&out, path)?;
    Ok(out.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(2)
        }
    }
}
