//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use qdet_core::analyzer::Prepared;
use qdet_core::compare::{ComparisonReport, CompareError};
use qdet_core::evaluator::{run_flowchart, run_q_effective};
use qdet_core::formulas;
use qdet_core::generators::{self, GridBoundary};
use qdet_core::*;
use serde_json::{json, Value as Json};

use crate::catalog::{AlgorithmRecord, CatalogError, DeterminantRecord, Store};
use crate::formats::{self, FormatError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SharingArg {
    Dag,
    Tree,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ChainArg {
    Exact,
    Floor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenName {
    ScalarProduct,
    Matmul,
    GaussJordan,
    Jacobi,
    GaussSeidel,
    GridJacobi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Form {
    Doubling,
    Sequential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Boundary {
    Zero,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Metric {
    Height,
    Width,
    Both,
}

fn parse_param(s: &str) -> Result<(String, i64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v = v.trim().parse().map_err(|_| format!("`{v}` is not an integer"))?;
    Ok((k.trim().to_string(), v))
}

/// Q-determinant construction and analysis.
#[derive(Parser, Debug)]
#[command(name = "qdet", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Catalog directory; defaults to $QDET_HOME.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Wrap results in a JSON envelope.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, value_enum, default_value = "on")]
    doubling: OnOff,
    #[arg(long, global = true, value_enum, default_value = "dag")]
    sharing: SharingArg,
    #[arg(long = "chain-count", global = true, value_enum, default_value = "exact")]
    chain_count: ChainArg,
    /// Dimension parameter, `name=value`; repeatable.
    #[arg(long, global = true, value_parser = parse_param)]
    param: Vec<(String, i64)>,
    /// Iteration bound for charts that declare `iterations`.
    #[arg(long, global = true, alias = "L")]
    iterations: Option<u32>,
    /// Input values, `name=value,...`; repeatable.
    #[arg(long, global = true)]
    input: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Write a reference algorithm as a flowchart or a determinant file.
    Gen {
        #[arg(value_enum)]
        algorithm: GenName,
        #[arg(long)]
        n: Option<i64>,
        /// Inner dimension of matmul, grid rows of grid-jacobi.
        #[arg(long, alias = "K")]
        k: Option<i64>,
        #[arg(long)]
        m: Option<i64>,
        #[arg(long, alias = "J")]
        j: Option<i64>,
        /// Reduction form of scalar products and matrix products; follows `--doubling` when absent.
        #[arg(long, value_enum)]
        form: Option<Form>,
        #[arg(long, value_enum, default_value = "zero")]
        boundary: Boundary,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build the determinant of a flowchart.
    Build {
        chart: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the height D and width P of a determinant.
    Analyze {
        file: PathBuf,
        /// Also print the operation count of every level.
        #[arg(long)]
        levels: bool,
    },
    /// Evaluate a determinant or run a flowchart on the `--input` values.
    Eval {
        file: PathBuf,
        /// Step-by-step execution with guard cancellation.
        #[arg(long)]
        effective: bool,
    },
    /// Compare two catalog algorithms over their shared parameter values.
    Compare {
        a: String,
        b: String,
        #[arg(long, value_enum, default_value = "both")]
        metric: Metric,
    },
    /// Evaluate a closed-form characteristic.
    Formula {
        #[command(subcommand)]
        formula: FormulaCmd,
    },
    /// Manage stored algorithms and their determinants.
    Catalog {
        #[command(subcommand)]
        action: CatalogCmd,
    },
    /// Export the level-by-level execution plan of a determinant as JSON.
    Schedule {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum FormulaCmd {
    Scalar {
        #[arg(long)]
        n: u64,
    },
    GaussJordanHeight {
        #[arg(long)]
        n: u64,
    },
    GaussJordanGuardHeight {
        #[arg(long)]
        n: u64,
    },
    GaussJordanWidthBound {
        #[arg(long)]
        n: u64,
    },
    GridJacobiHeight {
        #[arg(long)]
        kj: u64,
        #[arg(long)]
        n0: u64,
    },
    GridJacobiWidth {
        #[arg(long)]
        kj: u64,
    },
    GridJacobiWidthPow2 {
        #[arg(long)]
        s: u32,
    },
    GridJacobiWidthIncrement {
        #[arg(long)]
        kj: u64,
    },
}

#[derive(Subcommand, Debug)]
enum CatalogCmd {
    AlgorithmAdd {
        id: String,
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "")]
        description: String,
    },
    AlgorithmUpdate {
        id: String,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        description: Option<String>,
    },
    AlgorithmList,
    AlgorithmRemove {
        id: String,
    },
    /// Store a determinant file; D and P are computed with the global counting flags.
    DeterminantAdd {
        algorithm: String,
        file: PathBuf,
    },
    DeterminantList {
        #[arg(long)]
        algorithm: Option<String>,
    },
    DeterminantDownload {
        id: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    DeterminantRemove {
        id: String,
    },
    /// Recompute D and P of a stored determinant and check them against the record.
    Verify {
        id: String,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(m: impl ToString) -> Failure {
    Failure { code: EXIT_USAGE, message: m.to_string() }
}

fn domain(m: impl ToString) -> Failure {
    Failure { code: EXIT_DOMAIN, message: m.to_string() }
}

fn io_fail(m: impl ToString) -> Failure {
    Failure { code: EXIT_IO, message: m.to_string() }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        domain(e)
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::MissingParameter(_) | BuildError::MissingIterations | BuildError::UnexpectedIterations => {
                usage(e)
            }
            _ => domain(e),
        }
    }
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::InvalidId(_) => usage(e),
            CatalogError::Format(_) | CatalogError::Compare(_) => domain(e),
            _ => io_fail(e),
        }
    }
}

impl From<CompareError> for Failure {
    fn from(e: CompareError) -> Self {
        domain(e)
    }
}

/// What a command produced: text for the terminal and the same result as JSON.
struct Output {
    text: String,
    json: Json,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_fail(format!("{}: {e}", path.display())))
}

fn write_or_print(path: &Option<PathBuf>, text: &str, what: Json) -> Result<Output, Failure> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| io_fail(format!("{}: {e}", p.display())))?;
            Ok(Output { text: format!("wrote {}\n", p.display()), json: json!({ "written": p, "content": what }) })
        }
        None => Ok(Output { text: text.to_string(), json: what }),
    }
}

fn looks_like_chart(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

fn value_json(v: Value) -> Json {
    match v {
        Value::Num(x) => json!(x),
        Value::Bool(b) => json!(b),
    }
}

fn value_text(v: Value) -> String {
    match v {
        Value::Num(x) => format!("{x}"),
        Value::Bool(b) => format!("{b}"),
    }
}

impl Cli {
    fn flags(&self) -> AnalysisFlags {
        AnalysisFlags {
            sharing: match self.sharing {
                SharingArg::Dag => Sharing::Dag,
                SharingArg::Tree => Sharing::Tree,
            },
            doubling: self.doubling == OnOff::On,
            chain_count: match self.chain_count {
                ChainArg::Exact => ChainCount::Exact,
                ChainArg::Floor => ChainCount::Floor,
            },
        }
    }

    fn config(&self) -> BuildConfig {
        BuildConfig {
            params: self.param.iter().cloned().collect(),
            iterations: self.iterations,
            ..Default::default()
        }
    }

    fn interpretation(&self) -> Result<Interpretation, Failure> {
        let mut i = Interpretation::new();
        for s in &self.input {
            for (k, v) in formats::parse_bindings(s).map_err(usage)? {
                i.insert(k, v);
            }
        }
        Ok(i)
    }

    fn store(&self) -> Result<Store, Failure> {
        let root = match &self.store {
            Some(p) => p.clone(),
            None => match std::env::var_os("QDET_HOME") {
                Some(p) => PathBuf::from(p),
                None => return Err(usage("no store given: pass --store or set QDET_HOME")),
            },
        };
        Ok(Store::open(root)?)
    }

    fn flags_json(&self) -> Json {
        let on = |b: bool| if b { "on" } else { "off" };
        let f = self.flags();
        json!({
            "store": self.store,
            "json": self.json,
            "doubling": on(f.doubling),
            "sharing": formats::sharing_name(f.sharing),
            "chain_count": if f.chain_count == ChainCount::Floor { "floor" } else { "exact" },
            "param": self.param.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
            "iterations": self.iterations,
            "input": self.input,
        })
    }
}

fn command_name(c: &Cmd) -> &'static str {
    match c {
        Cmd::Gen { .. } => "gen",
        Cmd::Build { .. } => "build",
        Cmd::Analyze { .. } => "analyze",
        Cmd::Eval { .. } => "eval",
        Cmd::Compare { .. } => "compare",
        Cmd::Formula { .. } => "formula",
        Cmd::Catalog { .. } => "catalog",
        Cmd::Schedule { .. } => "schedule",
    }
}

fn need(v: Option<i64>, flag: &str) -> Result<i64, Failure> {
    match v {
        Some(x) if x >= 1 => Ok(x),
        Some(x) => Err(usage(format!("--{flag} must be positive, got {x}"))),
        None => Err(usage(format!("--{flag} is required"))),
    }
}

fn gen(cli: &Cli, name: GenName, dims: [Option<i64>; 4], form: Form, boundary: Boundary) -> Result<String, Failure> {
    let [n, k, m, j] = dims;
    let iterations = || cli.iterations.filter(|&l| l >= 1).ok_or_else(|| usage("--iterations is required"));
    let doubling = form == Form::Doubling;
    Ok(match name {
        GenName::ScalarProduct => formats::serialize_flowchart(&generators::gen_scalar_product(need(n, "n")?, doubling)),
        GenName::Matmul => {
            let q = generators::gen_matmul(need(n, "n")?, need(k, "k")?, need(m, "m")?, doubling);
            formats::serialize_qdet(&q)
        }
        GenName::GaussJordan => {
            let n = need(n, "n")?;
            if !(2..=5).contains(&n) {
                return Err(usage("gauss-jordan supports --n 2 to 5"));
            }
            formats::serialize_flowchart(&generators::gen_gauss_jordan(n))
        }
        GenName::Jacobi => formats::serialize_flowchart(&generators::gen_jacobi_linear(need(n, "n")?, iterations()?)),
        GenName::GaussSeidel => {
            formats::serialize_flowchart(&generators::gen_gauss_seidel(need(n, "n")?, iterations()?))
        }
        GenName::GridJacobi => {
            let b = match boundary {
                Boundary::Zero => GridBoundary::Zero,
                Boundary::Periodic => GridBoundary::Periodic,
            };
            let q = generators::gen_grid_jacobi_with(need(k, "k")?, need(j, "j")?, iterations()?, b);
            formats::serialize_qdet(&q)
        }
    })
}

fn load_qdet(path: &Path) -> Result<QDeterminant, Failure> {
    Ok(formats::parse_qdet(&read(path)?)?)
}

fn report_json(r: &ComparisonReport) -> Json {
    json!({
        "shared": r.shared.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
        "delta_d": r.delta_d as i64,
        "delta_p": r.delta_p as i64,
        "verdict_d": r.verdict_d.name(),
        "verdict_p": r.verdict_p.name(),
    })
}

fn algorithm_json(a: &AlgorithmRecord) -> Json {
    json!({ "id": a.id, "name": a.name, "description": a.description, "count": a.count() })
}

fn determinant_json(d: &DeterminantRecord) -> Json {
    serde_json::to_value(d).expect("plain data serializes")
}

fn determinant_line(d: &DeterminantRecord) -> String {
    format!("{} {} {} D={} P={}\n", d.id, d.algorithm, d.key(), d.d, d.p)
}

fn formula(f: &FormulaCmd) -> Result<Output, Failure> {
    let guard = |ok: bool, m: &str| if ok { Ok(()) } else { Err(usage(m)) };
    let (text, json) = match *f {
        FormulaCmd::Scalar { n } => {
            guard(n >= 1, "--n must be at least 1")?;
            let (d, p) = formulas::scalar_characteristics(n);
            (format!("D={d} P={p}"), json!({ "d": d, "p": p }))
        }
        FormulaCmd::GaussJordanHeight { n } => {
            guard(n >= 1, "--n must be at least 1")?;
            let v = formulas::gauss_jordan_height(n);
            (v.to_string(), json!(v))
        }
        FormulaCmd::GaussJordanGuardHeight { n } => {
            guard(n >= 1, "--n must be at least 1")?;
            let v = formulas::gauss_jordan_guard_height(n);
            (v.to_string(), json!(v))
        }
        FormulaCmd::GaussJordanWidthBound { n } => {
            let v = formulas::gauss_jordan_width_lower_bound(n).to_string();
            (v.clone(), json!(v))
        }
        FormulaCmd::GridJacobiHeight { kj, n0 } => {
            guard(kj >= 1, "--kj must be at least 1")?;
            let v = formulas::grid_jacobi_height(kj, n0);
            (v.to_string(), json!(v))
        }
        FormulaCmd::GridJacobiWidth { kj } => {
            let v = formulas::grid_jacobi_width(kj);
            (v.to_string(), json!(v))
        }
        FormulaCmd::GridJacobiWidthPow2 { s } => {
            let v = formulas::grid_jacobi_width_pow2(s).to_string();
            (v.clone(), json!(v))
        }
        FormulaCmd::GridJacobiWidthIncrement { kj } => {
            guard(kj >= 1, "--kj must be at least 1")?;
            let v = formulas::grid_jacobi_width_increment(kj);
            (v.to_string(), json!(v))
        }
    };
    Ok(Output { text: text + "\n", json })
}

fn catalog(cli: &Cli, action: &CatalogCmd) -> Result<Output, Failure> {
    let store = cli.store()?;
    let out = |text: String, json: Json| Ok(Output { text, json });
    match action {
        CatalogCmd::AlgorithmAdd { id, name, description } => {
            let a = store.algorithm_add(id, name, description)?;
            out(format!("added {}\n", a.id), algorithm_json(&a))
        }
        CatalogCmd::AlgorithmUpdate { id, name, description } => {
            let a = store.algorithm_update(id, name.as_deref(), description.as_deref())?;
            out(format!("updated {}\n", a.id), algorithm_json(&a))
        }
        CatalogCmd::AlgorithmList => {
            let all = store.algorithm_list()?;
            let text = all.iter().map(|a| format!("{} {} count={}\n", a.id, a.name, a.count())).collect();
            out(text, Json::Array(all.iter().map(algorithm_json).collect()))
        }
        CatalogCmd::AlgorithmRemove { id } => {
            let a = store.algorithm_remove(id)?;
            out(format!("removed {} and {} determinants\n", a.id, a.count()), algorithm_json(&a))
        }
        CatalogCmd::DeterminantAdd { algorithm, file } => {
            let d = store.determinant_add(algorithm, &read(file)?, cli.flags())?;
            out(determinant_line(&d), determinant_json(&d))
        }
        CatalogCmd::DeterminantList { algorithm } => {
            let all = store.determinant_list(algorithm.as_deref())?;
            out(all.iter().map(determinant_line).collect(), Json::Array(all.iter().map(determinant_json).collect()))
        }
        CatalogCmd::DeterminantDownload { id, output } => {
            let text = store.determinant_download(id)?;
            write_or_print(output, &text, json!(text))
        }
        CatalogCmd::DeterminantRemove { id } => {
            let d = store.determinant_remove(id)?;
            out(format!("removed {}\n", d.id), determinant_json(&d))
        }
        CatalogCmd::Verify { id } => {
            let (stored, again) = store.verify(id)?;
            let json = json!({
                "stored": { "d": stored.0, "p": stored.1 },
                "recomputed": { "d": again.0, "p": again.1 },
            });
            if stored != again {
                return Err(domain(format!(
                    "{id}: stored D={} P={} but recomputed D={} P={}",
                    stored.0, stored.1, again.0, again.1
                )));
            }
            out(format!("{id}: D={} P={} reproduced\n", stored.0, stored.1), json)
        }
    }
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    match &cli.cmd {
        Cmd::Gen { algorithm, n, k, m, j, form, boundary, output } => {
            let form = form.unwrap_or(if cli.doubling == OnOff::On { Form::Doubling } else { Form::Sequential });
            let text = gen(cli, *algorithm, [*n, *k, *m, *j], form, *boundary)?;
            write_or_print(output, &text, json!(text))
        }
        Cmd::Build { chart, output } => {
            let fc = formats::parse_flowchart(&read(chart)?)?;
            let q = build_qdet(&fc, &cli.config())?;
            write_or_print(output, &formats::serialize_qdet(&q), json!(formats::serialize_qdet(&q)))
        }
        Cmd::Analyze { file, levels } => {
            let q = load_qdet(file)?;
            let f = cli.flags();
            let c = analyze(&q, f);
            let mut text = format!("D={} P={}\n", c.d, c.p);
            let counts = Prepared::new(&q, f.doubling).level_counts(f.sharing, f.chain_count);
            if *levels {
                let list: Vec<String> = counts.iter().map(u64::to_string).collect();
                text.push_str(&format!("levels: {}\n", list.join(" ")));
            }
            Ok(Output { text, json: json!({ "d": c.d, "p": c.p, "key": c.key.to_string(), "levels": counts }) })
        }
        Cmd::Eval { file, effective } => {
            let text = read(file)?;
            let inputs = cli.interpretation()?;
            let outputs = if looks_like_chart(&text) {
                let fc = formats::parse_flowchart(&text)?;
                run_flowchart(&fc, &cli.config(), &inputs)?
            } else {
                let q = formats::parse_qdet(&text)?;
                if *effective {
                    run_q_effective(&q, &inputs, cli.flags().doubling).outputs
                } else {
                    q.value(&inputs).map_err(domain)?
                }
            };
            let mut lines = String::new();
            let mut obj = serde_json::Map::new();
            for (v, o) in &outputs {
                let (t, j) = match o.value() {
                    Some(x) => (value_text(x), value_json(x)),
                    None => ("undetermined".to_string(), Json::Null),
                };
                lines.push_str(&format!("{v} = {t}\n"));
                obj.insert(v.to_string(), j);
            }
            Ok(Output { text: lines, json: Json::Object(obj) })
        }
        Cmd::Compare { a, b, metric } => {
            let r = cli.store()?.compare(a, b)?;
            let mut text = format!("shared={}", r.shared.len());
            if *metric != Metric::Width {
                text.push_str(&format!(" dD={} ({})", r.delta_d, r.verdict_d.name()));
            }
            if *metric != Metric::Height {
                text.push_str(&format!(" dP={} ({})", r.delta_p, r.verdict_p.name()));
            }
            Ok(Output { text: text + "\n", json: report_json(&r) })
        }
        Cmd::Formula { formula: f } => formula(f),
        Cmd::Catalog { action } => catalog(cli, action),
        Cmd::Schedule { file, output } => {
            let q = load_qdet(file)?;
            let f = cli.flags();
            let prep = Prepared::new(&q, f.doubling);
            let doc = formats::export_schedule(&prep.arena, &prep.schedule(f.sharing));
            let parsed: Json = serde_json::from_str(&doc).expect("export is valid JSON");
            write_or_print(output, &doc, parsed)
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit code:
/// 0 on success, 1 for usage errors, 2 for domain errors, 3 for IO and store errors.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let name = command_name(&cli.cmd);
    match run(&cli) {
        Ok(o) => {
            let _ = if cli.json {
                let env = json!({ "command": name, "flags": cli.flags_json(), "result": o.json });
                writeln!(out, "{}", serde_json::to_string_pretty(&env).expect("plain data serializes"))
            } else {
                write!(out, "{}", o.text)
            };
            EXIT_OK
        }
        Err(f) => {
            let _ = if cli.json {
                let env = json!({ "command": name, "flags": cli.flags_json(), "error": f.message, "code": f.code });
                writeln!(err, "{}", serde_json::to_string_pretty(&env).expect("plain data serializes"))
            } else {
                writeln!(err, "qdet {name}: {}", f.message)
            };
            f.code
        }
    }
}
