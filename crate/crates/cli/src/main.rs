//! Command-line front end. Exit status: 0 when every verdict passes, 1 when
//! one fails, 2 for configuration, precondition or I/O errors.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anisoharm::decomposition::{cz_decompose, verify_cz};
use anisoharm::experiments::{list, run_experiment, ExperimentConfig};
use anisoharm::kernels::{decay_profile, synthesize_kernels, KernelKind};
use anisoharm::operators::{
    g_q, hl_maximal, m_s, marcinkiewicz_d_alpha, poisson_semigroup, q_semigroup, riesz_potential,
    t_j_square_function, DyadicQuadrature, LpPartition, TRange,
};
use anisoharm::report::ExperimentReport;
use anisoharm::{make_band_limited, DilationGroup, Error, GridSpec, SampledField};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "anisoharm", version, about = "Anisotropic harmonic analysis on periodic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// The quasi-norm at given points.
    Rho {
        #[command(subcommand)]
        action: RhoAction,
    },
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Apply an operator to a field.
    Op {
        #[command(subcommand)]
        action: OpAction,
    },
    /// Calderon-Zygmund decomposition.
    Cz {
        #[command(subcommand)]
        action: CzAction,
    },
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
}

#[derive(Args, Clone)]
struct GroupArgs {
    /// Exponents a_j, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    exponents: Vec<f64>,
    #[arg(long)]
    root_tolerance: Option<f64>,
}

impl GroupArgs {
    fn group(&self) -> anisoharm::Result<DilationGroup> {
        match self.root_tolerance {
            Some(t) => DilationGroup::with_tolerance(self.exponents.clone(), t),
            None => DilationGroup::new(self.exponents.clone()),
        }
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long, value_delimiter = ',')]
    counts: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    extents: Vec<f64>,
}

impl GridArgs {
    fn grid(&self) -> anisoharm::Result<GridSpec> {
        GridSpec::new(self.counts.clone(), self.extents.clone())
    }
}

/// Where an input field comes from: a dump, or a generated band-limited field.
#[derive(Args, Clone)]
struct InputArgs {
    /// Field dump; `.csv` files are read as CSV, anything else as binary.
    #[arg(long, conflicts_with = "band_limited")]
    input: Option<PathBuf>,
    /// Seed of a band-limited field on the grid given by --counts/--extents.
    #[arg(long)]
    band_limited: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    counts: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    extents: Vec<f64>,
}

impl InputArgs {
    fn field(&self, group: &DilationGroup) -> anisoharm::Result<SampledField> {
        match (&self.input, self.band_limited) {
            (Some(path), _) => read_field(path),
            (None, Some(seed)) => {
                let grid = GridSpec::new(self.counts.clone(), self.extents.clone())?;
                make_band_limited(&grid, group, seed)
            }
            (None, None) => Err(Error::InvalidInput("give --input or --band-limited".into())),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Bin,
    Csv,
}

#[derive(Subcommand)]
enum RhoAction {
    Eval {
        #[command(flatten)]
        group: GroupArgs,
        /// A point, comma separated; repeat for several.
        #[arg(long = "point", value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Append, required = true)]
        points: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KernelAction {
    /// Synthesize a kernel and dump it.
    Synth {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Kernel as JSON, e.g. '{"kind":"deriv","k":0}'.
        #[arg(long)]
        kind: String,
        #[arg(long, value_enum, default_value = "bin")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted shell profile of a kernel, written as `profile.csv`.
    Decay {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OpName {
    Riesz,
    Poisson,
    Q,
    DAlpha,
    GQ,
    Maximal,
    MS,
    TJ,
}

#[derive(Subcommand)]
enum OpAction {
    Apply {
        #[arg(value_enum)]
        op: OpName,
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Semigroup time for poisson and q.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Exponent of m-s.
        #[arg(long, default_value_t = 2.0)]
        s: f64,
        /// Index of t-j; its blocks are those resolved on the grid.
        #[arg(long, default_value_t = 0)]
        j: i32,
        #[arg(long, value_enum, default_value = "bin")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CzAction {
    Run {
        #[command(flatten)]
        group: GroupArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Whitney parameter N.
        #[arg(long, default_value_t = 2.0)]
        n: f64,
        /// Also dump the good part.
        #[arg(long)]
        dump_good: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    List,
    Run {
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Outcome {
    Pass,
    Fail,
}

fn read_field(path: &Path) -> anisoharm::Result<SampledField> {
    let file = BufReader::new(fs::File::open(path)?);
    if path.extension().is_some_and(|e| e == "csv") {
        SampledField::read_csv(file)
    } else {
        SampledField::read_binary(&mut { file })
    }
}

fn write_field(f: &SampledField, dir: &Path, stem: &str, format: Format) -> anisoharm::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(match format {
        Format::Bin => format!("{stem}.bin"),
        Format::Csv => format!("{stem}.csv"),
    });
    let mut w = BufWriter::new(fs::File::create(&path)?);
    match format {
        Format::Bin => f.write_binary(&mut w)?,
        Format::Csv => f.write_csv(&mut w)?,
    }
    w.flush()?;
    Ok(path)
}

fn field_summary(f: &SampledField) -> anisoharm::Result<serde_json::Value> {
    Ok(json!({
        "counts": f.grid().counts(),
        "extents": f.grid().extents(),
        "l2_norm": f.lp_norm(2.0)?,
        "max_abs": f.max_abs(),
    }))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> anisoharm::Result<()> {
    fs::create_dir_all(dir)?;
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(dir.join(name), s)?;
    Ok(())
}

fn parse_kind(text: &str) -> anisoharm::Result<KernelKind> {
    Ok(serde_json::from_str(text)?)
}

fn rho_eval(group: &GroupArgs, points: &[f64], out: Option<&Path>) -> anisoharm::Result<Outcome> {
    let g = group.group()?;
    let n = g.dim();
    if !points.len().is_multiple_of(n) {
        return Err(Error::InvalidInput(format!("{} coordinates do not split into points of dimension {n}", points.len())));
    }
    let rows = points
        .chunks(n)
        .map(|x| Ok(json!({ "point": x, "rho": g.rho(x)? })))
        .collect::<anisoharm::Result<Vec<_>>>()?;
    let doc = json!({ "exponents": g.exponents(), "values": rows });
    match out {
        Some(dir) => write_json(dir, "report.json", &doc)?,
        None => println!("{}", serde_json::to_string_pretty(&doc)?),
    }
    Ok(Outcome::Pass)
}

fn op_apply(
    op: OpName,
    g: &DilationGroup,
    f: &SampledField,
    alpha: f64,
    t: f64,
    s: f64,
    j: i32,
) -> anisoharm::Result<SampledField> {
    let quad = DyadicQuadrature::default();
    match op {
        OpName::Riesz => riesz_potential(f, alpha, g),
        OpName::Poisson => poisson_semigroup(f, t, g),
        OpName::Q => q_semigroup(f, t, g),
        OpName::DAlpha => marcinkiewicz_d_alpha(f, alpha, &quad, g),
        OpName::GQ => g_q(f, &TRange::for_field(f, g)?, g),
        OpName::Maximal => hl_maximal(f, g),
        OpName::MS => m_s(f, s, g),
        OpName::TJ => t_j_square_function(f, j, alpha, &quad, &LpPartition::resolved(g, f.grid())?, g),
    }
}

fn finish_report(r: &ExperimentReport, dir: &Path) -> anisoharm::Result<Outcome> {
    r.emit(dir)?;
    for (name, v) in &r.verdicts {
        let value = r.metrics.get(&v.metric).copied().unwrap_or(f64::NAN);
        println!("{} {name}: {} = {value:e} ({:?} {:e})", if v.passed { "PASS" } else { "FAIL" }, v.metric, v.comparison, v.tolerance);
    }
    Ok(if r.passed() { Outcome::Pass } else { Outcome::Fail })
}

fn run(cli: Cli) -> anisoharm::Result<Outcome> {
    match cli.command {
        Command::Rho { action: RhoAction::Eval { group, points, out } } => rho_eval(&group, &points, out.as_deref()),
        Command::Kernel { action: KernelAction::Synth { group, grid, kind, format, out } } => {
            let g = group.group()?;
            let k = synthesize_kernels(&[parse_kind(&kind)?], &g, &grid.grid()?)?.remove(0);
            write_field(&k.field, &out, "kernel", format)?;
            write_json(
                &out,
                "report.json",
                &json!({
                    "kind": k.kind,
                    "exponents": g.exponents(),
                    "decay_exponent": k.decay_exponent,
                    "edge_sup": k.edge_sup,
                    "field": field_summary(&k.field)?,
                }),
            )?;
            Ok(Outcome::Pass)
        }
        Command::Kernel { action: KernelAction::Decay { group, grid, kind, out } } => {
            let g = group.group()?;
            let k = synthesize_kernels(&[parse_kind(&kind)?], &g, &grid.grid()?)?.remove(0);
            let p = decay_profile(&k);
            fs::create_dir_all(&out)?;
            let mut w = BufWriter::new(fs::File::create(out.join("profile.csv"))?);
            p.write_csv(&mut w)?;
            w.flush()?;
            write_json(&out, "report.json", &json!({ "kind": k.kind, "edge_sup": k.edge_sup, "max": p.max(), "profile": p }))?;
            Ok(Outcome::Pass)
        }
        Command::Op { action: OpAction::Apply { op, group, input, alpha, t, s, j, format, out } } => {
            let g = group.group()?;
            let f = input.field(&g)?;
            let y = op_apply(op, &g, &f, alpha, t, s, j)?;
            write_field(&y, &out, "output", format)?;
            write_json(&out, "report.json", &json!({ "input": field_summary(&f)?, "output": field_summary(&y)? }))?;
            Ok(Outcome::Pass)
        }
        Command::Cz { action: CzAction::Run { group, input, beta, p, n, dump_good, out } } => {
            let g = group.group()?;
            let f = input.field(&g)?;
            let dec = cz_decompose(&f, beta, p, &g, n)?;
            write_json(&out, "cz.json", &serde_json::to_value(&dec)?)?;
            if dump_good {
                write_field(&dec.good, &out, "good", Format::Bin)?;
            }
            finish_report(&verify_cz(&dec, &f, &g)?, &out)
        }
        Command::Experiment { action: ExperimentAction::List } => {
            for (name, desc) in list() {
                println!("{name:20} {desc}");
            }
            Ok(Outcome::Pass)
        }
        Command::Experiment { action: ExperimentAction::Run { name, config, out } } => {
            let config = match config {
                Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
                None => ExperimentConfig::default(),
            };
            finish_report(&run_experiment(&name, &config)?, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
