use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fockband_core::bands::BandSet;
use fockband_core::channel::{Channel, ChannelAnalysis};
use fockband_core::determinant::DeterminantEvaluator;
use fockband_core::fy::{FyOptions, FySolver};
use fockband_core::model::{build_preset, ModelProblem, Preset, ProblemFile, TorusGrid};
use fockband_core::oracle::{assemble_full, classify_spectrum, eig_sym, DEFAULT_DIM_CAP};
use fockband_core::pencil::split_blocks;
use fockband_core::verify;
use fockband_core::{Error, Interval, SpectralConfig};

/// Spectra of a four-sector lattice block operator.
#[derive(Parser, Debug)]
#[command(name = "fockband", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Branches of the essential spectrum and degenerate fiber bands.
    Bands(Common),
    /// Channel spectra, essential spectrum and discrete eigenvalues.
    Spectrum(Common),
    /// The essential spectrum.
    Essential(Common),
    /// Bottom of the essential spectrum.
    Hwz(Common),
    /// Discrete eigenvalues off the essential spectrum.
    Eigs(Common),
    /// Transfer-function spectrum and min-max report in the gap.
    Pencil(Common),
    /// Determinant curves along z.
    Scan(ScanArgs),
    /// Runs the acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Named preset: decoupled, remark, symmetric or gap.
    #[arg(long)]
    preset: Option<String>,
    /// JSON problem file.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Points per axis (default 12 for presets).
    #[arg(long)]
    n: Option<usize>,
    /// Torus dimension.
    #[arg(long)]
    nu: Option<usize>,
    /// Merge tolerance of band sets.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    z_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    z_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = Method::Fy)]
    method: Method,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// First fiber index.
    #[arg(long, default_value_t = 0)]
    p: usize,
    /// Second fiber index; scans Δ₃(p,q;z) when given, else Δ₁ and Δ₂.
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 400)]
    points: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Run only this check.
    #[arg(long)]
    check: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Fy,
    Oracle,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

/// Failures mapped to exit codes.
enum Failure {
    Usage(String),
    Domain(String),
    Checks,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::UnknownPreset(_) | Error::Grid(_) | Error::Io(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Domain(other.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// A command result in both output shapes.
struct Artifact {
    json: Value,
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.14e}")
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// Compact JSON with every float printed to 15 significant digits.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
}

fn render_json(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    serde::Serialize::serialize(v, &mut ser).expect("in-memory serialization");
    let mut s = String::from_utf8(buf).expect("utf-8");
    s.push('\n');
    s
}

fn render_csv(a: &Artifact) -> String {
    let mut s = a.header.join(",");
    s.push('\n');
    for row in &a.rows {
        let cells: Vec<String> = row.iter().map(Cell::render).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

fn emit(text: &str, out: Option<&PathBuf>) -> Outcome<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn load(c: &Common) -> Outcome<ModelProblem> {
    match (&c.preset, &c.problem) {
        (Some(name), None) => {
            let which = Preset::from_name(name)?;
            let grid = TorusGrid::new(c.nu.unwrap_or(1), c.n.unwrap_or(12))?;
            Ok(build_preset(which, &grid)?)
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let mut file = ProblemFile::from_json(&text)?;
            if let Some(n) = c.n {
                file.n = n;
            }
            if let Some(nu) = c.nu {
                file.nu = nu;
            }
            Ok(file.materialize()?)
        }
        _ => Err(Failure::Usage("exactly one of --preset and --problem is required".into())),
    }
}

fn config(c: &Common) -> SpectralConfig {
    let mut cfg = SpectralConfig::default();
    if let Some(t) = c.tol {
        cfg.merge_tol = t;
    }
    cfg
}

fn set_json(set: &BandSet) -> Value {
    json!({
        "intervals": set.intervals().iter().map(|iv| json!([iv.lo, iv.hi])).collect::<Vec<_>>(),
        "points": set.points(),
    })
}

fn set_rows(label: &str, set: &BandSet, rows: &mut Vec<Vec<Cell>>) {
    for iv in set.intervals() {
        rows.push(vec![Cell::Text(label.into()), Cell::Num(iv.lo), Cell::Num(iv.hi)]);
    }
    for &p in set.points() {
        rows.push(vec![Cell::Text(label.into()), Cell::Num(p), Cell::Num(p)]);
    }
}

fn z_window(c: &Common, prob: &ModelProblem) -> (f64, f64) {
    let (lo, hi) = prob.spectral_window();
    (c.z_min.unwrap_or(lo), c.z_max.unwrap_or(hi))
}

fn bands(c: &Common) -> Outcome<Artifact> {
    let prob = load(c)?;
    let ch = ChannelAnalysis::new(&prob, config(c));
    let b = ch.branches().clone();
    let ess = ch.essential_spectrum().set;
    let n = prob.npts();
    let mut degenerate = Vec::new();
    for p in 0..n {
        for q in 0..n {
            let band = ch.band3(p, q);
            if band.width() <= 1e-12 {
                degenerate.push(json!({"p": p, "q": q, "point": 0.5 * (band.lo + band.hi)}));
            }
        }
    }
    let mut rows = Vec::new();
    for (label, set) in [("four", &b.four), ("three", &b.three), ("two1", &b.two1), ("two2", &b.two2), ("essential", &ess)] {
        set_rows(label, set, &mut rows);
    }
    Ok(Artifact {
        json: json!({
            "four": set_json(&b.four),
            "three": set_json(&b.three),
            "two1": set_json(&b.two1),
            "two2": set_json(&b.two2),
            "essential": set_json(&ess),
            "hwz_min": ch.hwz_min(),
            "degenerate_bands": degenerate,
        }),
        header: vec!["set", "lo", "hi"],
        rows,
    })
}

fn essential(c: &Common) -> Outcome<Artifact> {
    let prob = load(c)?;
    let ch = ChannelAnalysis::new(&prob, config(c));
    let ess = ch.essential_spectrum().set;
    let mut rows = Vec::new();
    set_rows("essential", &ess, &mut rows);
    Ok(Artifact {
        json: json!({"essential": set_json(&ess), "min": ess.min(), "max": ess.max()}),
        header: vec!["set", "lo", "hi"],
        rows,
    })
}

fn hwz(c: &Common) -> Outcome<Artifact> {
    let prob = load(c)?;
    let ch = ChannelAnalysis::new(&prob, config(c));
    let m = ch.hwz_min();
    Ok(Artifact {
        json: json!({"hwz_min": m}),
        header: vec!["hwz_min"],
        rows: vec![vec![Cell::Num(m)]],
    })
}

/// Discrete eigenvalues in the z-window with per-root diagnostics.
fn discrete(c: &Common, prob: &ModelProblem) -> Outcome<Vec<(f64, f64)>> {
    let cfg = config(c);
    let (lo, hi) = z_window(c, prob);
    match c.method {
        Method::Fy => {
            let solver = FySolver::new(prob, cfg, FyOptions::default())?;
            let search: Vec<Interval> = solver
                .search_intervals()
                .into_iter()
                .filter_map(|iv| {
                    let (a, b) = (iv.lo.max(lo), iv.hi.min(hi));
                    (a < b).then(|| Interval::new(a, b))
                })
                .collect();
            Ok(solver
                .find_eigenvalues(&search)
                .into_iter()
                .map(|b| (b.z, b.residual))
                .collect())
        }
        Method::Oracle => {
            let ch = ChannelAnalysis::new(prob, cfg);
            let ess = ch.essential_spectrum().set;
            let full = assemble_full(prob, DEFAULT_DIM_CAP)?;
            let eig = eig_sym(&full, true)?;
            let vectors = eig.vectors.expect("vectors requested");
            let cl = classify_spectrum(&eig.values, &ess, Some(prob.npts()));
            let mut out = Vec::new();
            for (k, &z) in eig.values.iter().enumerate() {
                if cl.isolated.contains(&z) && lo <= z && z <= hi {
                    let v = vectors.column(k).into_owned();
                    let r = (full.apply(&v) - &v * z).norm() / v.norm();
                    out.push((z, r));
                }
            }
            Ok(out)
        }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Fy => "fy",
        Method::Oracle => "oracle",
    }
}

fn eigs(c: &Common) -> Outcome<Artifact> {
    let prob = load(c)?;
    let found = discrete(c, &prob)?;
    let rows = found
        .iter()
        .enumerate()
        .map(|(i, &(z, r))| vec![Cell::Int(i), Cell::Num(z), Cell::Num(r)])
        .collect();
    Ok(Artifact {
        json: json!({
            "method": method_name(c.method),
            "eigenvalues": found.iter().map(|e| e.0).collect::<Vec<_>>(),
            "residuals": found.iter().map(|e| e.1).collect::<Vec<_>>(),
        }),
        header: vec!["index", "z", "residual"],
        rows,
    })
}

fn spectrum(c: &Common) -> Outcome<Artifact> {
    let prob = load(c)?;
    let ch = ChannelAnalysis::new(&prob, config(c));
    let mut rows = Vec::new();
    let mut channels = serde_json::Map::new();
    for which in Channel::ALL {
        let set = ch.channel_spectrum(which);
        let label = format!("H{}", which.index());
        set_rows(&label, &set, &mut rows);
        channels.insert(label, set_json(&set));
    }
    let ess = ch.essential_spectrum().set;
    set_rows("essential", &ess, &mut rows);
    let found = discrete(c, &prob)?;
    for &(z, _) in &found {
        rows.push(vec![Cell::Text("discrete".into()), Cell::Num(z), Cell::Num(z)]);
    }
    Ok(Artifact {
        json: json!({
            "channels": Value::Object(channels),
            "essential": set_json(&ess),
            "discrete": found.iter().map(|e| e.0).collect::<Vec<_>>(),
            "method": method_name(c.method),
        }),
        header: vec!["set", "lo", "hi"],
        rows,
    })
}

fn pencil(c: &Common) -> Outcome<Artifact> {
    let prob = load(c)?;
    let full = assemble_full(&prob, DEFAULT_DIM_CAP)?;
    let split = split_blocks(&full)?;
    let alpha = c.z_min.unwrap_or(split.b_c + 1e-6);
    let beta = c.z_max.unwrap_or(split.a_ess - 1e-6);
    let roots = split.pencil_spectrum(alpha, beta, 200)?;
    let eig = eig_sym(&full, true)?;
    let vectors = eig.vectors.expect("vectors requested");
    let pairs: Vec<_> = eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &l)| alpha < l && l < beta)
        .map(|(k, &l)| (l, vectors.column(k).into_owned()))
        .collect();
    let report = split.minmax_verify(alpha, beta, &pairs, 100, 1, 1e-8)?;
    let curve = split.curve(alpha, beta, 200)?;
    let rows = curve
        .iter()
        .map(|&(l, m, k)| vec![Cell::Num(l), Cell::Num(m), Cell::Int(k)])
        .collect();
    let report = serde_json::to_value(&report).map_err(|e| Failure::Domain(e.to_string()))?;
    Ok(Artifact {
        json: json!({
            "interval": [alpha, beta],
            "b_c": split.b_c,
            "a_ess": split.a_ess,
            "roots": roots,
            "minmax_report": report,
        }),
        header: vec!["lambda", "min_abs_eig_l", "kappa"],
        rows,
    })
}

fn scan(s: &ScanArgs) -> Outcome<Artifact> {
    let c = &s.common;
    let prob = load(c)?;
    let n = prob.npts();
    if s.p >= n || s.q.is_some_and(|q| q >= n) {
        return Err(Failure::Usage(format!("fiber index out of range 0..{n}")));
    }
    let eval = DeterminantEvaluator::new(&prob, config(c));
    let (lo, hi) = z_window(c, &prob);
    let points = s.points.max(1);
    let zs = (0..=points).map(|i| lo + (hi - lo) * i as f64 / points as f64);
    let mut rows = Vec::new();
    let mut items = Vec::new();
    match s.q {
        Some(q) => {
            for z in zs {
                // points inside the band are skipped
                if let Ok(d) = eval.delta3(s.p, q, z) {
                    rows.push(vec![Cell::Int(s.p), Cell::Int(q), Cell::Num(z), Cell::Num(d)]);
                    items.push(json!({"z": z, "delta3": d}));
                }
            }
            Ok(Artifact {
                json: json!({"p": s.p, "q": q, "curve": items}),
                header: vec!["p", "q", "z", "delta3"],
                rows,
            })
        }
        None => {
            for z in zs {
                if let (Ok(d1), Ok(d2)) = (eval.delta1(s.p, z), eval.delta2(s.p, z)) {
                    rows.push(vec![Cell::Int(s.p), Cell::Num(z), Cell::Num(d1), Cell::Num(d2)]);
                    items.push(json!({"z": z, "delta1": d1, "delta2": d2}));
                }
            }
            Ok(Artifact {
                json: json!({"p": s.p, "curve": items}),
                header: vec!["p", "z", "delta1", "delta2"],
                rows,
            })
        }
    }
}

fn run_verify(v: &VerifyArgs) -> Outcome<()> {
    let results: Vec<_> = match v.check {
        Some(id) => vec![verify::run_check(id)
            .ok_or_else(|| Failure::Usage(format!("no check {id}; valid 1..={}", verify::CHECK_COUNT)))?],
        None => {
            let mut all = Vec::new();
            for id in 1..=verify::CHECK_COUNT {
                let r = verify::run_check(id).expect("valid id");
                eprintln!("{}", r.line());
                all.push(r);
            }
            all
        }
    };
    if v.check.is_some() {
        eprintln!("{}", results[0].line());
    }
    let text = match v.format {
        Format::Json => render_json(&serde_json::to_value(&results).expect("plain data")),
        Format::Csv => {
            let mut s = String::from("id,name,passed,seconds,budget_seconds,detail\n");
            for r in &results {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},\"{}\"",
                    r.id,
                    r.name,
                    r.passed,
                    fmt_f64(r.seconds),
                    fmt_f64(r.budget_seconds),
                    r.detail.replace('"', "'")
                );
            }
            s
        }
    };
    emit(&text, v.out.as_ref())?;
    if results.iter().all(|r| r.passed) {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn run(cli: Cli) -> Outcome<()> {
    let (common, artifact) = match &cli.command {
        Command::Bands(c) => (c, bands(c)?),
        Command::Spectrum(c) => (c, spectrum(c)?),
        Command::Essential(c) => (c, essential(c)?),
        Command::Hwz(c) => (c, hwz(c)?),
        Command::Eigs(c) => (c, eigs(c)?),
        Command::Pencil(c) => (c, pencil(c)?),
        Command::Scan(s) => (&s.common, scan(s)?),
        Command::Verify(v) => return run_verify(v),
    };
    let text = match common.format {
        Format::Json => render_json(&artifact.json),
        Format::Csv => render_csv(&artifact),
    };
    emit(&text, common.out.as_ref())
}

fn init_threads() -> Outcome<()> {
    let Ok(raw) = std::env::var("FOCKBAND_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("FOCKBAND_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match init_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Checks) => ExitCode::from(1),
    }
}
