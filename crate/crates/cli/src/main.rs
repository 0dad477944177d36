//! `tatecoh`: command-line front end for the completed Tate toolkit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tate_core::fgl::{catalog, FormalGroupLaw};
use tate_core::floer::{
    blind, ku_completed_tate, model_sh_tate, recover_integral_homology, recover_ku, AbelianGroup,
    CompletedKuModule, KuGroups, ShTate,
};
use tate_core::tate::{bc_k_presentation, orbit_local_module, tate_of_module};
use tate_core::{BlindedData, Error, Homology, ManifoldModel, Parity, TateValue};

#[derive(Parser, Debug)]
#[command(name = "tatecoh", version, about = "Completed Tate cohomology of periodic theories, computed exactly")]
struct Cli {
    /// Truncation order N of all power series
    #[arg(long = "precision-N", global = true, default_value_t = 32, value_parser = clap::value_parser!(u32).range(1..))]
    precision_n: u32,
    /// p-adic precision K for laws named without one
    #[arg(long = "padic-K", global = true, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    padic_k: u32,
    /// Largest multiple m used when classifying [m](u)
    #[arg(long, global = true, default_value_t = 24, value_parser = clap::value_parser!(u32).range(1..))]
    mmax: u32,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the n-series [n](u) of a formal group law
    Nseries {
        fgl: String,
        #[arg(allow_hyphen_values = true)]
        n: i64,
    },
    /// Completed Tate value of a module or of a manifold's tower
    Tate {
        #[command(subcommand)]
        subject: TateSubject,
    },
    /// Recover groups from completed Tate data
    Recover {
        #[command(subcommand)]
        kind: RecoverKind,
    },
}

#[derive(Subcommand, Debug)]
enum TateSubject {
    /// R*(BC_k) = R*[[u]]/([k](u))
    Bck { k: u32, fgl: String },
    /// Local module of a k-fold covered orbit
    Orbit { k: u32, parity: ParityArg, fgl: String },
    /// The action-filtered tower of a manifold model
    Manifold { file: PathBuf, fgl: String },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParityArg {
    Good,
    Bad,
}

#[derive(Subcommand, Debug)]
enum RecoverKind {
    /// H_*(M; Z) from a manifold model (round trip) or from raw tower values
    Homology {
        file: PathBuf,
        /// Primes to probe; defaults to the primes in the model's torsion
        #[arg(long, value_delimiter = ',')]
        primes: Option<Vec<u64>>,
        /// Highest level k of the K_{p^k}(m) towers
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(2..))]
        kmax: u32,
    },
    /// KU_0, KU_1 from groups (round trip) or from a completed module
    Ku { file: PathBuf },
}

enum Failure {
    Core(Error),
    Input(String),
    Mismatch(Output),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Core(e)
    }
}

struct Output {
    json: Value,
    table: String,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownFgl(_) | Error::InvalidArgument(_) | Error::InvalidDescriptor(_) => 2,
        Error::PrecisionExhausted(_) | Error::ExponentOverflow { .. } => 3,
        Error::UnknownLocalization { .. } | Error::NonStabilizingTower | Error::NonStabilizing(_) => 5,
        Error::InconsistentPattern(_) | Error::MalformedCompletedModule(_) => 6,
        _ => 4,
    }
}

fn error_name(e: &Error) -> String {
    let debug = format!("{e:?}");
    debug
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli);
    let emit = |out: &Output| match cli.format {
        Format::Json => println!("{}", out.json),
        Format::Table => print!("{}", out.table),
    };
    match result {
        Ok(out) => {
            emit(&out);
            ExitCode::SUCCESS
        }
        Err(Failure::Mismatch(out)) => {
            emit(&out);
            eprintln!("recovered groups differ from the input");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("{}", json!({"error": "InvalidInput", "message": msg}));
            ExitCode::from(4)
        }
        Err(Failure::Core(e)) => {
            eprintln!("{}", json!({"error": error_name(&e), "message": e.to_string()}));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Nseries { fgl, n } => nseries(cli, fgl, *n),
        Command::Tate { subject } => match subject {
            TateSubject::Bck { k, fgl } => {
                let f = law(cli, fgl)?;
                module_value(cli, &bc_k_presentation(&f, *k)?)
            }
            TateSubject::Orbit { k, parity, fgl } => {
                let f = law(cli, fgl)?;
                let parity = match parity {
                    ParityArg::Good => Parity::Good,
                    ParityArg::Bad => Parity::Bad,
                };
                module_value(cli, &orbit_local_module(&f, *k, parity)?)
            }
            TateSubject::Manifold { file, fgl } => {
                let f = law(cli, fgl)?;
                let m = read_model(&read_json(file)?)?;
                manifold_value(&model_sh_tate(&m, &f, cli.mmax)?)
            }
        },
        Command::Recover { kind } => match kind {
            RecoverKind::Homology { file, primes, kmax } => recover_homology(cli, file, primes.as_deref(), *kmax),
            RecoverKind::Ku { file } => recover_ku_cmd(file),
        },
    }
}

fn law(cli: &Cli, name: &str) -> Result<Arc<FormalGroupLaw>, Failure> {
    Ok(catalog().by_name(name, cli.precision_n as usize, cli.padic_k)?)
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_model(v: &Value) -> Result<ManifoldModel, Failure> {
    let m: ManifoldModel =
        serde_json::from_value(v.clone()).map_err(|e| Failure::Core(Error::InvalidModel(e.to_string())))?;
    m.validate()?;
    Ok(m)
}

fn nseries(cli: &Cli, name: &str, n: i64) -> Result<Output, Failure> {
    let f = law(cli, name)?;
    let s = f.n_series(n)?;
    let profile = s.unit_profile();
    let r = f.ring();
    let terms: Vec<Value> = s
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(j, c)| {
            json!({
                "power": j,
                "coefficient": r.encode(c),
                "text": r.format(c),
                "degree": r.degree(c),
            })
        })
        .collect();
    let json = json!({
        "fgl": f.name(),
        "n": n,
        "N": s.order(),
        "degree": s.homogeneous_degree(),
        "series": s.to_string(),
        "terms": terms,
        "unit_profile": profile,
    });
    let mut table = format!("[{n}](u) = {s}\n");
    match profile.valuation {
        Some(v) if profile.certifies_unit() => {
            let _ = writeln!(table, "unit profile: u^{v} times a unit");
        }
        Some(v) => {
            let _ = writeln!(table, "unit profile: first unit at u^{v}, lower coefficients not all nilpotent");
        }
        None => table.push_str("unit profile: no unit coefficient up to the truncation\n"),
    }
    Ok(Output { json, table })
}

fn module_value(cli: &Cli, module: &tate_core::tate::FglModule) -> Result<Output, Failure> {
    let value = tate_of_module(module, cli.mmax)?;
    Ok(Output {
        json: value.to_json(),
        table: render_value(&value),
    })
}

fn manifold_value(sh: &ShTate) -> Result<Output, Failure> {
    let json = serde_json::to_value(sh).expect("serializable");
    let mut table = render_value(&sh.value);
    let _ = writeln!(table, "theorem check: {}", sh.theorem_check);
    let _ = writeln!(table, "stabilization level: {}", sh.stabilization_level);
    Ok(Output { json, table })
}

fn render_value(v: &TateValue) -> String {
    match v {
        TateValue::Zero => "0\n".to_string(),
        TateValue::LaurentModule { base, summands, .. } => {
            let mut out = format!("base {base}, u inverted\ndegree  summand\n");
            for s in summands {
                let group = if s.order == 0 { base.to_string() } else { format!("Z/{}", s.order) };
                let _ = writeln!(out, "{:>6}  {group}", s.degree);
            }
            out
        }
    }
}

fn render_group(free: u32, torsion: &[(u64, u32, u32)]) -> String {
    let mut parts = Vec::new();
    if free > 0 {
        parts.push(if free == 1 { "Z".to_string() } else { format!("Z^{free}") });
    }
    for &(p, l, m) in torsion {
        let g = format!("Z/{}", p.pow(l));
        parts.push(if m == 1 { g } else { format!("({g})^{m}") });
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

fn render_homology(h: &Homology) -> String {
    let mut out = String::new();
    for d in &h.0 {
        let _ = writeln!(out, "H_{} = {}", d.degree, render_group(d.free, &d.torsion));
    }
    if h.0.is_empty() {
        out.push_str("H_* = 0\n");
    }
    out
}

fn homology_diff(expected: &Homology, recovered: &Homology) -> Vec<Value> {
    let degrees: std::collections::BTreeSet<u32> = expected.0.iter().chain(&recovered.0).map(|d| d.degree).collect();
    let at = |h: &Homology, d: u32| h.0.iter().find(|x| x.degree == d).cloned();
    degrees
        .into_iter()
        .filter(|&d| at(expected, d) != at(recovered, d))
        .map(|d| {
            json!({
                "degree": d,
                "expected": at(expected, d),
                "recovered": at(recovered, d),
            })
        })
        .collect()
}

fn recover_homology(cli: &Cli, file: &Path, primes: Option<&[u64]>, kmax: u32) -> Result<Output, Failure> {
    let v = read_json(file)?;
    let order = cli.precision_n as usize;
    if v.get("homology").is_some() {
        let m = read_model(&v)?;
        let primes: Vec<u64> = match primes {
            Some(p) => p.to_vec(),
            None => {
                let mut ps: Vec<u64> = m.homology.0.iter().flat_map(|d| d.torsion.iter().map(|t| t.0)).collect();
                ps.sort_unstable();
                ps.dedup();
                if ps.is_empty() {
                    ps.push(2);
                }
                ps
            }
        };
        let data = blind(&m, &primes, kmax, order, cli.mmax)?;
        let recovered = recover_integral_homology(&data)?;
        let expected = m.homology.canonical();
        let diff = homology_diff(&expected, &recovered);
        let matched = diff.is_empty();
        let json = json!({
            "mode": "round_trip",
            "primes": primes,
            "kmax": kmax,
            "recovered": recovered,
            "match": matched,
            "diff": diff,
        });
        let mut table = render_homology(&recovered);
        let _ = writeln!(table, "match: {matched}");
        let out = Output { json, table };
        if matched {
            Ok(out)
        } else {
            Err(Failure::Mismatch(out))
        }
    } else if v.get("rational").is_some() {
        let data: BlindedData = serde_json::from_value(v).map_err(|e| Failure::Core(Error::InvalidModel(e.to_string())))?;
        let recovered = recover_integral_homology(&data)?;
        Ok(Output {
            json: json!({"mode": "towers", "recovered": recovered}),
            table: render_homology(&recovered),
        })
    } else {
        Err(Failure::Core(Error::InvalidModel(
            "expected a manifold model (with \"homology\") or tower values (with \"rational\")".into(),
        )))
    }
}

fn render_ku(g: &KuGroups) -> String {
    let group = |a: &AbelianGroup| render_group(a.free, &a.torsion);
    format!("KU_0 = {}\nKU_1 = {}\n", group(&g.ku0), group(&g.ku1))
}

fn recover_ku_cmd(file: &Path) -> Result<Output, Failure> {
    let v = read_json(file)?;
    let schema = |e: serde_json::Error| Failure::Core(Error::InvalidModel(e.to_string()));
    if v.get("ku0").is_some() || v.get("ku1").is_some() {
        let groups: KuGroups = serde_json::from_value(v).map_err(schema)?;
        groups.ku0.validate()?;
        groups.ku1.validate()?;
        let module = ku_completed_tate(&groups);
        let recovered = recover_ku(&module)?;
        let matched = recovered == groups.canonical();
        let json = json!({
            "mode": "round_trip",
            "completed": module,
            "recovered": recovered,
            "match": matched,
        });
        let mut table = render_ku(&recovered);
        let _ = writeln!(table, "match: {matched}");
        let out = Output { json, table };
        if matched {
            Ok(out)
        } else {
            Err(Failure::Mismatch(out))
        }
    } else if v.get("summands").is_some() {
        let module: CompletedKuModule = serde_json::from_value(v).map_err(|e| {
            Failure::Core(Error::MalformedCompletedModule(e.to_string()))
        })?;
        let recovered = recover_ku(&module)?;
        Ok(Output {
            json: json!({"mode": "completed", "recovered": recovered}),
            table: render_ku(&recovered),
        })
    } else {
        Err(Failure::Core(Error::InvalidModel(
            "expected KU groups (\"ku0\", \"ku1\") or a completed module (\"summands\")".into(),
        )))
    }
}
