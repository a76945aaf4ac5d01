use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use clmeasure::decomp::DecompError;
use clmeasure::measure::{module_factored, nu_ptors, support};
use clmeasure::moments::moment;
use clmeasure::nongalois::{aip_report, ip_ratio_report};
use clmeasure::partmod::{enumerate_shapes, module_size, ShapeError};
use clmeasure::qexact::{default_tol, format_decimal, int, Rounding};
use clmeasure::spmodel::{compare_to_limit, limit_moment, run_experiment, sur_moment, SpError};
use clmeasure::verify::{run_suite, SUITES};
use clmeasure::{CertValue, DecompData, GroupSpec, MeasureError, ModuleShape, Partition, Rational};

const SCHEMA_VERSION: u32 = 1;
const DIGITS: usize = 6;

#[derive(Parser)]
#[command(
    name = "clmeasure",
    version,
    about = "Conjectured distributions of p-parts of class groups"
)]
struct Cli {
    /// JSON object whose keys fill in flags not given on the command line
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the decomposition data of Z_p[Γ]
    Decompose(DecompArgs),
    /// Probability of a single module
    Prob(ShapeArgs),
    /// Probability of a given p-torsion rank per component
    Ptors(PtorsArgs),
    /// Conjectured moment of a module
    Moment(ShapeArgs),
    /// Probabilities of every module up to an order bound
    Table(TableArgs),
    /// Run a verification suite
    Verify(VerifyArgs),
    /// Sample cokernels from the symplectic matrix model
    Simulate(SimulateArgs),
    /// Compare against Malle's predictions
    CompareMalle(MalleArgs),
}

#[derive(Args, Clone)]
struct DecompArgs {
    /// cyclic:N or abelian:a,b,...
    #[arg(long, required_unless_present = "decomp_file")]
    group: Option<String>,
    #[arg(long, requires = "group")]
    p: Option<u64>,
    /// Decomposition data as JSON, for groups given by hand
    #[arg(long, conflicts_with = "group")]
    decomp_file: Option<PathBuf>,
    #[arg(long)]
    r: Option<u32>,
    #[arg(long)]
    u: Option<u32>,
}

#[derive(Args)]
struct TolArg {
    /// Width of the certified enclosures, as a decimal or a fraction a/b
    #[arg(long, env = "CLMEASURE_TOL")]
    tol: Option<String>,
}

#[derive(Args)]
struct ShapeArgs {
    #[command(flatten)]
    decomp: DecompArgs,
    /// One partition per component, ordered by id, e.g. "[[1],[]]"
    #[arg(long)]
    module: String,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct PtorsArgs {
    #[command(flatten)]
    decomp: DecompArgs,
    /// p-torsion rank per component, ordered by id, e.g. "1,0"
    #[arg(long)]
    ranks: String,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    decomp: DecompArgs,
    #[arg(long)]
    max_order: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    suite: String,
    #[arg(long)]
    bound: Option<u64>,
    #[arg(long)]
    emax: Option<u64>,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    r: u32,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    g: usize,
    #[arg(long)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add a chi-square comparison with the g → ∞ law
    #[arg(long)]
    compare: bool,
    #[command(flatten)]
    tol: TolArg,
}

#[derive(Args)]
struct MalleArgs {
    /// ip (the C7 pair) or aip (one absolutely irreducible pair)
    #[arg(long)]
    case: String,
    #[arg(long, default_value_t = 1)]
    u: u32,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    epsilon: i8,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn new(code: u8, err: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            err: err.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure { code: 1, err }
    }
}

impl From<DecompError> for Failure {
    fn from(e: DecompError) -> Self {
        let code = match e {
            DecompError::Json(_) | DecompError::Invalid(_) => 3,
            _ => 2,
        };
        Failure::new(code, e)
    }
}

impl From<ShapeError> for Failure {
    fn from(e: ShapeError) -> Self {
        Failure::new(4, e)
    }
}

impl From<MeasureError> for Failure {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Shape(s) => s.into(),
            MeasureError::Decomp(_) => Failure::new(3, e),
            e => Failure::new(1, e),
        }
    }
}

impl From<SpError> for Failure {
    fn from(e: SpError) -> Self {
        match e {
            SpError::Measure(m) => m.into(),
            e => Failure::new(2, e),
        }
    }
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let args = match with_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

/// Appends `--key value` for every config entry whose flag is absent.
fn with_config(mut args: Vec<String>) -> anyhow::Result<Vec<String>> {
    let Some(pos) = args
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))
    else {
        return Ok(args);
    };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => args
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| anyhow!("--config needs a path"))?,
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {path}"))?;
    let Value::Object(map) =
        serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?
    else {
        return Err(anyhow!("{path}: config must be a JSON object"));
    };
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if args
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
        {
            continue;
        }
        match v {
            Value::Bool(true) => args.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::String(s) => args.extend([flag, s]),
            other => args.extend([flag, other.to_string()]),
        }
    }
    Ok(args)
}

fn run(cmd: Cmd) -> Res<u8> {
    match cmd {
        Cmd::Decompose(a) => {
            let d = load_decomp(&a)?;
            emit(serde_json::to_value(&d).map_err(anyhow::Error::from)?);
        }
        Cmd::Prob(a) => {
            let d = load_decomp(&a.decomp)?;
            let shape = ModuleShape::parse(&d, &a.module)?;
            let v = module_factored(&d, &shape)?
                .eval(&tolerance(&a.tol)?)
                .map_err(MeasureError::from)?;
            emit(cert_json(&v, json!({"support": support(&d, &shape, d.r)})));
        }
        Cmd::Ptors(a) => {
            let d = load_decomp(&a.decomp)?;
            let ranks = parse_ranks(&d, &a.ranks)?;
            let v = nu_ptors(&d, &ranks, &tolerance(&a.tol)?)?;
            emit(cert_json(&v, json!({})));
        }
        Cmd::Moment(a) => {
            let d = load_decomp(&a.decomp)?;
            let shape = ModuleShape::parse(&d, &a.module)?;
            let m = moment(&d, &shape)?;
            let exact = m
                .to_rational()
                .ok_or_else(|| anyhow!("moment {m} is not rational"))?;
            emit(json!({
                "exact": exact.to_string(),
                "lo": format_decimal(&exact, 20, Rounding::Down),
                "hi": format_decimal(&exact, 20, Rounding::Up),
                "decimal": CertValue::point(exact).to_decimal(DIGITS),
            }));
        }
        Cmd::Table(a) => table(a)?,
        Cmd::Verify(a) => {
            let tol = tolerance(&a.tol)?;
            let Some(rep) = run_suite(&a.suite, a.bound, a.emax, &tol) else {
                return Err(Failure::new(
                    2,
                    anyhow!("unknown suite {:?}; known: {}", a.suite, SUITES.join(", ")),
                ));
            };
            let passed = rep.passed;
            emit(serde_json::to_value(&rep).map_err(anyhow::Error::from)?);
            return Ok(if passed { 0 } else { 1 });
        }
        Cmd::Simulate(a) => simulate(a)?,
        Cmd::CompareMalle(a) => compare_malle(a)?,
    }
    Ok(0)
}

fn load_decomp(a: &DecompArgs) -> Res<DecompData> {
    let d = match (&a.group, &a.decomp_file) {
        (Some(g), _) => {
            let p =
                a.p.ok_or_else(|| Failure::new(2, anyhow!("--group needs --p")))?;
            DecompData::abelian(&GroupSpec::parse(g)?, p, a.r.unwrap_or(1), a.u.unwrap_or(1))?
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            // Accept our own output, which carries a version field.
            let mut v: Value =
                serde_json::from_str(&text).map_err(|e| DecompError::Json(e.to_string()))?;
            if let Some(obj) = v.as_object_mut() {
                obj.remove("schema_version");
            }
            let d = DecompData::from_json(&v.to_string())?;
            let (r, u) = (a.r.unwrap_or(d.r), a.u.unwrap_or(d.u));
            let d = d.with_params(r, u);
            clmeasure::decomp::validate(&d).map_err(DecompError::Invalid)?;
            d
        }
        (None, None) => {
            return Err(Failure::new(
                2,
                anyhow!("need --group and --p, or --decomp-file"),
            ))
        }
    };
    Ok(d)
}

fn tolerance(a: &TolArg) -> Res<Rational> {
    let Some(text) = &a.tol else {
        return Ok(default_tol());
    };
    let t = parse_rational(text.trim())
        .ok_or_else(|| Failure::new(2, anyhow!("cannot parse tolerance {text:?}")))?;
    if !t.is_positive() {
        return Err(Failure::new(
            2,
            anyhow!("tolerance must be positive, got {text}"),
        ));
    }
    Ok(t)
}

/// `a/b`, an integer, or a decimal with optional exponent, read exactly.
fn parse_rational(s: &str) -> Option<Rational> {
    if let Ok(r) = Rational::from_str(s) {
        return Some(r);
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (whole, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if whole.is_empty() && frac.is_empty()
        || !(whole.chars().chain(frac.chars())).all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{whole}{frac}");
    let mut x =
        Rational::from_str(digits.trim_start_matches('0')).unwrap_or_else(|_| Rational::zero());
    let shift = exp - frac.len() as i32;
    let ten = int(10);
    for _ in 0..shift.unsigned_abs() {
        x = if shift > 0 { &x * &ten } else { &x / &ten };
    }
    Some(if neg { -x } else { x })
}

fn parse_ranks(d: &DecompData, text: &str) -> Res<BTreeMap<u32, u32>> {
    let ranks: Vec<u32> = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .map_err(|_| ShapeError::Malformed(format!("rank {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    let ids = d.ids();
    if ranks.len() != ids.len() {
        return Err(ShapeError::ComponentCount {
            got: ranks.len(),
            expected: ids.len(),
        }
        .into());
    }
    Ok(ids.into_iter().zip(ranks).collect())
}

/// Writes a line to stdout; a closed pipe just ends the output.
fn out(line: &str) {
    if let Err(e) = writeln!(std::io::stdout(), "{line}") {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
            std::process::exit(1);
        }
    }
}

fn emit(mut v: Value) {
    if let Some(obj) = v.as_object_mut() {
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    out(&serde_json::to_string_pretty(&v).expect("JSON value serializes"));
}

fn cert_json(v: &CertValue, extra: Value) -> Value {
    let mut out = serde_json::to_value(v).expect("enclosure serializes");
    let obj = out.as_object_mut().expect("enclosure is an object");
    obj.insert("decimal".into(), json!(v.to_decimal(DIGITS)));
    if let Value::Object(more) = extra {
        obj.extend(more);
    }
    out
}

/// The underlying abelian group of a module, e.g. `(Z/2)^2 x Z/4`.
fn group_description(d: &DecompData, shape: &ModuleShape) -> String {
    let mut mult: BTreeMap<u32, u64> = BTreeMap::new();
    for (id, lam) in shape.iter() {
        let c = d.component(id).expect("checked shape");
        for &e in lam.conjugate().parts() {
            *mult.entry(e).or_default() += (c.d * c.n) as u64;
        }
    }
    if mult.is_empty() {
        return "1".into();
    }
    mult.iter()
        .map(|(&e, &m)| {
            let base = match d.p.checked_pow(e) {
                Some(m) => format!("Z/{m}"),
                None => format!("Z/{}^{e}", d.p),
            };
            if m == 1 {
                base
            } else {
                format!("({base})^{m}")
            }
        })
        .collect::<Vec<_>>()
        .join(" x ")
}

fn table(a: TableArgs) -> Res<()> {
    let d = load_decomp(&a.decomp)?;
    let tol = tolerance(&a.tol)?;
    let shapes = enumerate_shapes(&d, a.max_order);
    let per_row = &tol / int(shapes.len().max(1));
    let mut rows = Vec::new();
    let mut total = CertValue::zero();
    for s in &shapes {
        let v = module_factored(&d, s)?
            .eval(&per_row)
            .map_err(MeasureError::from)?;
        let m = moment(&d, s)?
            .to_rational()
            .ok_or_else(|| anyhow!("irrational moment"))?;
        total = &total + &v;
        rows.push((
            s.to_lists(&d),
            group_description(&d, s),
            module_size(&d, s)?,
            v,
            m,
        ));
    }
    let tail = Rational::one() - total.hi();
    if tail.is_negative() {
        return Err(anyhow!(
            "probabilities sum past 1 (upper end {}); internal error",
            total.hi()
        )
        .into());
    }
    let tail_text = format_decimal(&tail, 20, Rounding::Down);
    match a.format {
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|(shape, group, size, v, m)| {
                    let mut row = json!({"shape": shape, "group": group, "order": size.to_string(), "moment": m.to_string()});
                    if let (Value::Object(r), Value::Object(c)) = (&mut row, cert_json(v, json!({}))) {
                        r.extend(c);
                    }
                    row
                })
                .collect();
            emit(
                json!({"max_order": a.max_order, "rows": rows, "total": cert_json(&total, json!({})), "tail_allowance": tail_text}),
            );
        }
        Format::Csv => {
            out(&format!("# schema_version={SCHEMA_VERSION} max_order={} total_lo={} total_hi={} tail_allowance={tail_text}",
                a.max_order,
                format_decimal(total.lo(), 20, Rounding::Down),
                format_decimal(total.hi(), 20, Rounding::Up)
            ));
            out("shape,group,order,lo,hi,decimal,moment");
            for (shape, group, size, v, m) in &rows {
                out(&format!(
                    "\"{}\",{group},{size},{},{},{},{m}",
                    serde_json::to_string(shape).expect("lists serialize"),
                    format_decimal(v.lo(), 20, Rounding::Down),
                    format_decimal(v.hi(), 20, Rounding::Up),
                    v.to_decimal(DIGITS)
                ));
            }
        }
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Res<()> {
    let h = run_experiment(a.p, a.r, a.k, a.g, a.samples, a.seed)?;
    let mut out = json!({"histogram": serde_json::to_value(&h).map_err(anyhow::Error::from)?});
    if a.compare {
        let tol = tolerance(&a.tol)?;
        let cmp = compare_to_limit(&h, &tol)?;
        let target = Partition::row(1);
        let (mean, stderr) = sur_moment(&h, &target);
        let limit = limit_moment(a.p, a.r, &target);
        out["comparison"] = serde_json::to_value(&cmp).map_err(anyhow::Error::from)?;
        out["comparison"]["max_abs_z_expected_25"] = json!(cmp.max_abs_z(25.0));
        out["moment"] = json!({
            "target": [1],
            "mean": mean,
            "stderr": stderr,
            "limit": limit.to_string(),
        });
    }
    emit(out);
    Ok(())
}

fn compare_malle(a: MalleArgs) -> Res<()> {
    match a.case.as_str() {
        "ip" => {
            let rep = ip_ratio_report(a.u)?;
            match a.format {
                Format::Json => emit(serde_json::to_value(&rep).map_err(anyhow::Error::from)?),
                Format::Csv => {
                    out(&format!(
                        "# schema_version={SCHEMA_VERSION} u={} verdict={}",
                        rep.u, rep.verdict
                    ));
                    out(rep.to_csv().trim_end());
                }
            }
        }
        "aip" => {
            let p =
                a.p.ok_or_else(|| Failure::new(2, anyhow!("--case aip needs --p")))?;
            let d =
                a.d.ok_or_else(|| Failure::new(2, anyhow!("--case aip needs --d")))?;
            let rep = aip_report(p, d, a.epsilon).map_err(|e| Failure::new(2, e))?;
            emit(serde_json::to_value(&rep).map_err(anyhow::Error::from)?);
        }
        other => {
            return Err(Failure::new(
                2,
                anyhow!("unknown case {other:?}; known: ip, aip"),
            ))
        }
    }
    Ok(())
}
