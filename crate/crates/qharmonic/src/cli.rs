//! The `qh` command line: `eval`, `transform` and `verify`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{Read, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{QError, Result};
use crate::fischer::{FischerElement, SampledElement, Sign};
use crate::qbessel::{bessel_j1, bessel_j2};
use crate::qcore::{exp_big, exp_small, geometric_grid, q_bracket, q_gamma2, sup_relative, QContext};
use crate::qhankel::{hankel1, hankel2, d_const, BraidedLine, HankelSpec, KnownForm, RadialFunction};
use crate::qpolys::{gegenbauer, hermite, laguerre_q2, laguerre_q2inv};
use crate::sphere::funk_hecke_alpha;
use crate::verify::{self, RunConfig, Status, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qh", version, about = "q-deformed special functions, transforms and property checks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Deformation parameter, 0 < q < 1.
    #[arg(long, global = true, default_value_t = 0.5)]
    q: f64,
    /// Dimension.
    #[arg(long, global = true, default_value_t = 3)]
    m: u32,
    /// Relative truncation tolerance of series and Jackson sums.
    #[arg(long, global = true, default_value_t = 1e-10)]
    rel_tol: f64,
    #[arg(long, global = true, default_value_t = 500)]
    max_terms: usize,
    /// Anchor of infinite Jackson grids.
    #[arg(long, global = true, default_value_t = 1.0)]
    gamma: f64,
    /// Seed of the randomized checks.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

impl Common {
    fn config(&self) -> RunConfig {
        RunConfig {
            q: self.q,
            m: self.m,
            rel_tol: self.rel_tol,
            max_terms: self.max_terms,
            gamma: self.gamma,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    Hankel1,
    Hankel2,
    #[value(name = "fourier_fwd")]
    FourierFwd,
    #[value(name = "fourier_inv")]
    FourierInv,
    Braided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
}

impl From<SignArg> for Sign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Plus => Sign::Plus,
            SignArg::Minus => Sign::Minus,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a special function, e.g. `qh eval laguerre_q2 j=2 alpha=0.5 --at 0.1,0.7`.
    Eval {
        function: String,
        /// Parameters as name=value; the variable may be given this way too.
        params: Vec<String>,
        /// Comma-separated evaluation points.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
    },
    /// Apply a transform to an element (JSON) or a known form.
    Transform {
        #[arg(value_enum)]
        which: Which,
        /// FischerElement JSON file, `-` for standard input.
        #[arg(long, conflicts_with = "known")]
        element: Option<String>,
        /// Known form, e.g. `laguerre_block:j=2,order=0.5,scale=1`.
        #[arg(long)]
        known: Option<String>,
        /// Bessel order of a Hankel transform; defaults to the order of the form.
        #[arg(long, allow_negative_numbers = true)]
        nu: Option<f64>,
        #[arg(long, value_enum, default_value_t = SignArg::Plus)]
        sign: SignArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
    },
    /// Run the property checks and emit a report.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
}

/// Failure of a command, mapped onto the exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Compute(QError),
}

impl From<QError> for Failure {
    fn from(e: QError) -> Self {
        match e {
            QError::InvalidParameter { .. } | QError::Parse(_) | QError::TagMismatch(_) => Failure::Usage(e.to_string()),
            other => Failure::Compute(other),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// A table of numbers with named columns.
#[derive(Debug, Clone, PartialEq)]
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    Value::Object(
                        self.columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.clone(), json_number(*v)))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

fn json_number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Eval { function, params, at } => cmd_eval(&cli.common, function, params, at, out),
        Command::Transform {
            which,
            element,
            known,
            nu,
            sign,
            at,
        } => cmd_transform(&cli.common, *which, element.as_deref(), known.as_deref(), *nu, (*sign).into(), at, out),
        Command::Verify { suite } => cmd_verify(&cli.common, *suite, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Compute(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAIL
        }
    }
}

fn context(common: &Common) -> std::result::Result<QContext, Failure> {
    common.config().context().map_err(|e| usage(e.to_string()))
}

fn emit(out: &mut dyn Write, text: &str) -> std::result::Result<(), Failure> {
    out.write_all(text.as_bytes())
        .and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
        .map_err(|e| Failure::Compute(QError::Domain(format!("cannot write output: {e}"))))
}

fn config_json(common: &Common) -> Value {
    serde_json::to_value(common.config()).expect("config serialises")
}

fn parse_params(params: &[String]) -> std::result::Result<BTreeMap<String, f64>, Failure> {
    params
        .iter()
        .map(|p| {
            let (k, v) = p.split_once('=').ok_or_else(|| usage(format!("parameter `{p}` is not name=value")))?;
            let v: f64 = v.trim().parse().map_err(|_| usage(format!("parameter `{k}` has non-numeric value `{v}`")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn integer(params: &BTreeMap<String, f64>, name: &str) -> std::result::Result<u32, Failure> {
    let v = required(params, name)?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(usage(format!("parameter `{name}` must be a non-negative integer, got {v}")));
    }
    Ok(v as u32)
}

fn required(params: &BTreeMap<String, f64>, name: &str) -> std::result::Result<f64, Failure> {
    params.get(name).copied().ok_or_else(|| usage(format!("missing parameter `{name}`")))
}

type EvalFn = Box<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// Names of the parameters and the variable of each function, plus the
/// evaluator with its parameters bound.
fn evaluator(
    ctx: &QContext,
    name: &str,
    params: &BTreeMap<String, f64>,
) -> std::result::Result<(&'static [&'static str], Option<&'static str>, EvalFn), Failure> {
    let c = *ctx;
    Ok(match name {
        "q_bracket" => (&[], Some("u"), Box::new(move |u| Ok(q_bracket(&c, u)))),
        "q_gamma2" => (&[], Some("t"), Box::new(move |t| q_gamma2(&c, t))),
        "e_q" => (&[], Some("t"), Box::new(move |t| exp_small(&c, t))),
        "E_q" => (&[], Some("t"), Box::new(move |t| Ok(exp_big(&c, t)))),
        "hermite" => {
            let k = integer(params, "k")?;
            (&["k"], Some("t"), Box::new(move |t| Ok(hermite(&c, k, t))))
        }
        "laguerre_q2" | "laguerre_q2inv" => {
            let j = integer(params, "j")?;
            let alpha = required(params, "alpha")?;
            let inverse = name == "laguerre_q2inv";
            (
                &["j", "alpha"],
                Some("u"),
                Box::new(move |u| if inverse { laguerre_q2inv(&c, j, alpha, u) } else { laguerre_q2(&c, j, alpha, u) }),
            )
        }
        "gegenbauer" => {
            let n = integer(params, "n")?;
            let lambda = required(params, "lambda")?;
            (&["n", "lambda"], Some("t"), Box::new(move |t| Ok(gegenbauer(&c, n, lambda, t))))
        }
        "besselJ1" | "besselJ2" => {
            let nu = required(params, "nu")?;
            crate::qbessel::BesselOrder::new(nu)?;
            let first = name == "besselJ1";
            (
                &["nu"],
                Some("x"),
                Box::new(move |x| if first { bessel_j1(&c, nu, x) } else { bessel_j2(&c, nu, x) }),
            )
        }
        "d_const" => {
            let lambda = required(params, "lambda")?;
            let alpha = required(params, "alpha")?;
            (&["lambda", "alpha"], None, Box::new(move |_| d_const(&c, lambda, alpha)))
        }
        "funk_hecke_alpha" => {
            let k = integer(params, "k")?;
            let l = integer(params, "l")?;
            (&["k", "l"], None, Box::new(move |_| Ok(funk_hecke_alpha(&c, k, l))))
        }
        other => return Err(usage(format!("unknown function `{other}`"))),
    })
}

fn cmd_eval(
    common: &Common,
    function: &str,
    params: &[String],
    at: &[f64],
    out: &mut dyn Write,
) -> std::result::Result<i32, Failure> {
    let ctx = context(common)?;
    let mut params = parse_params(params)?;
    let (names, variable, f) = evaluator(&ctx, function, &params)?;
    let mut points = at.to_vec();
    if let Some(var) = variable {
        if let Some(v) = params.remove(var) {
            points.insert(0, v);
        }
        if points.is_empty() {
            return Err(usage(format!("`{function}` needs points: --at or {var}=value")));
        }
    } else if !points.is_empty() {
        return Err(usage(format!("`{function}` takes no evaluation points")));
    } else {
        points.push(f64::NAN);
    }
    if let Some(extra) = params.keys().find(|k| !names.contains(&k.as_str())) {
        return Err(usage(format!("`{function}` has no parameter `{extra}`")));
    }
    let values: Vec<f64> = crate::par::map(&points, |&x| f(x)).into_iter().collect::<Result<_>>()?;
    let table = match variable {
        Some(var) => Table {
            columns: vec![var.to_string(), "value".to_string()],
            rows: points.iter().zip(&values).map(|(x, v)| vec![*x, *v]).collect(),
        },
        None => Table {
            columns: vec!["value".to_string()],
            rows: values.iter().map(|v| vec![*v]).collect(),
        },
    };
    let text = match common.format {
        Format::Csv => table.csv(),
        Format::Json => serde_json::to_string_pretty(&json!({
            "config": config_json(common),
            "command": "eval",
            "function": function,
            "params": params_json(&params),
            "rows": table.json_rows(),
        }))
        .expect("json"),
    };
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn params_json(params: &BTreeMap<String, f64>) -> Value {
    Value::Object(params.iter().map(|(k, v)| (k.clone(), json_number(*v))).collect())
}

/// A parsed `--known` descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Known {
    Radial(KnownForm),
    HermiteGaussian(u32),
    LineMonomial(u32),
}

fn parse_known(text: &str) -> std::result::Result<Known, Failure> {
    let (name, rest) = text.split_once(':').unwrap_or((text, ""));
    let params: Vec<String> = rest.split(',').filter(|s| !s.trim().is_empty()).map(str::to_string).collect();
    let params = parse_params(&params)?;
    let allowed: &[&str] = match name {
        "laguerre_block" | "monomial_gaussian" => &["j", "order", "scale"],
        "hermite_gaussian" | "line_monomial" => &["k"],
        other => return Err(usage(format!("unknown known form `{other}`"))),
    };
    if let Some(extra) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(usage(format!("known form `{name}` has no parameter `{extra}`")));
    }
    Ok(match name {
        "laguerre_block" | "monomial_gaussian" => {
            let j = integer(&params, "j")?;
            let order = params.get("order").copied().unwrap_or(0.0);
            let scale = params.get("scale").copied().unwrap_or(1.0);
            if !(scale > 0.0) {
                return Err(usage(format!("known form scale must be positive, got {scale}")));
            }
            Known::Radial(if name == "laguerre_block" {
                KnownForm::LaguerreBlock { j, order, scale }
            } else {
                KnownForm::MonomialGaussian { j, order, scale }
            })
        }
        "hermite_gaussian" => Known::HermiteGaussian(integer(&params, "k")?),
        _ => Known::LineMonomial(integer(&params, "k")?),
    })
}

fn read_element(path: &str, ctx: &QContext) -> std::result::Result<FischerElement, Failure> {
    let mut text = String::new();
    let read = if path == "-" {
        std::io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    read.map_err(|e| usage(format!("cannot read `{path}`: {e}")))?;
    let e = FischerElement::from_json_with(&text, *ctx.policy())?;
    if e.ctx().q() != ctx.q() || e.ctx().m() != ctx.m() {
        return Err(usage(format!(
            "element has q = {}, m = {} but the run uses q = {}, m = {}",
            e.ctx().q(),
            e.ctx().m(),
            ctx.q(),
            ctx.m()
        )));
    }
    Ok(e)
}

struct TransformOutput {
    table: Table,
    max_residual: Option<f64>,
    element: Option<FischerElement>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_transform(
    common: &Common,
    which: Which,
    element: Option<&str>,
    known: Option<&str>,
    nu: Option<f64>,
    sign: Sign,
    at: &[f64],
    out: &mut dyn Write,
) -> std::result::Result<i32, Failure> {
    let ctx = context(common)?;
    let points = if at.is_empty() { geometric_grid(0.1, 4.0, 9) } else { at.to_vec() };
    if points.iter().any(|x| !x.is_finite()) {
        return Err(usage("evaluation points must be finite"));
    }
    let known = known.map(parse_known).transpose()?;
    let output = match which {
        Which::Hankel1 | Which::Hankel2 => {
            let Some(Known::Radial(form)) = known else {
                return Err(usage("hankel transforms take --known laguerre_block:... or monomial_gaussian:..."));
            };
            hankel_transform(&ctx, common.gamma, which, form, nu, &points)?
        }
        Which::FourierFwd | Which::FourierInv => {
            let Some(path) = element else {
                return Err(usage("fourier transforms take --element FILE"));
            };
            let e = read_element(path, &ctx)?;
            fourier_transform(&e, common.gamma, which == Which::FourierFwd, sign, &points)?
        }
        Which::Braided => match known {
            Some(Known::HermiteGaussian(k)) => braided_transform(&ctx, k, true, &points)?,
            Some(Known::LineMonomial(k)) => braided_transform(&ctx, k, false, &points)?,
            _ => return Err(usage("braided takes --known hermite_gaussian:k=N or line_monomial:k=N")),
        },
    };
    let text = match common.format {
        Format::Csv => output.table.csv(),
        Format::Json => {
            let mut doc = json!({
                "config": config_json(common),
                "command": "transform",
                "transform": which.to_possible_value().expect("named").get_name(),
                "rows": output.table.json_rows(),
            });
            if let Some(r) = output.max_residual {
                doc["max_residual"] = json_number(r);
            }
            if let Some(e) = &output.element {
                doc["element"] = serde_json::from_str(&e.to_json()).expect("element json");
            }
            serde_json::to_string_pretty(&doc).expect("json")
        }
    };
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn hankel_transform(
    ctx: &QContext,
    gamma: f64,
    which: Which,
    form: KnownForm,
    nu: Option<f64>,
    points: &[f64],
) -> std::result::Result<TransformOutput, Failure> {
    let (order, scale) = match form {
        KnownForm::LaguerreBlock { order, scale, .. } | KnownForm::MonomialGaussian { order, scale, .. } => (order, scale),
        KnownForm::Opaque => unreachable!("descriptors never produce opaque forms"),
    };
    let nu = nu.unwrap_or(order);
    let f = RadialFunction::known(ctx, form, 1.0);
    let (image, var) = match (which, form) {
        (Which::Hankel1, KnownForm::LaguerreBlock { .. }) => (hankel1(ctx, &HankelSpec::new(nu, scale)?, &f)?, "t"),
        (Which::Hankel2, KnownForm::MonomialGaussian { .. }) => (hankel2(ctx, &HankelSpec::new(nu, gamma)?, &f)?, "r"),
        _ => {
            return Err(Failure::Usage(format!(
                "gaussian tag mismatch: {which:?} needs {}",
                if which == Which::Hankel1 { "an E-type laguerre_block" } else { "an e-type monomial_gaussian" }
            )))
        }
    };
    let values: Vec<f64> = crate::par::map(points, |&x| image.eval(x)).into_iter().collect::<Result<_>>()?;
    let closed: Vec<Option<f64>> = points.iter().map(|&x| image.closed_form(x)).collect::<Result<_>>()?;
    let mut columns = vec![var.to_string(), "value".to_string()];
    let (rows, max_residual) = if closed.iter().all(Option::is_some) && nu == order {
        let closed: Vec<f64> = closed.into_iter().flatten().collect();
        columns.push("closed_form".to_string());
        let rows = points.iter().zip(&values).zip(&closed).map(|((x, v), c)| vec![*x, *v, *c]).collect();
        (rows, Some(sup_relative(&values, &closed)))
    } else {
        (points.iter().zip(&values).map(|(x, v)| vec![*x, *v]).collect(), None)
    };
    Ok(TransformOutput {
        table: Table { columns, rows },
        max_residual,
        element: None,
    })
}

fn sampled_rows(quad: &SampledElement, closed: &SampledElement) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for (k, (phase, values)) in &quad.blocks {
        let reference = closed.blocks.get(k).map(|(_, v)| v.as_slice());
        for (i, x) in quad.points.iter().enumerate() {
            let c = reference.map_or(0.0, |v| v[i]);
            rows.push(vec![*k as f64, phase.turns() as f64, *x, values[i], c]);
        }
    }
    rows
}

fn fourier_transform(
    e: &FischerElement,
    gamma: f64,
    forward: bool,
    sign: Sign,
    points: &[f64],
) -> std::result::Result<TransformOutput, Failure> {
    let (closed, quad) = if forward {
        (e.fourier_forward(sign)?, e.fourier_forward_sampled(sign, points)?)
    } else {
        (e.fourier_inverse(sign)?, e.fourier_inverse_sampled(sign, gamma, points)?)
    };
    let reference = closed.sample(points)?;
    Ok(TransformOutput {
        table: Table {
            columns: ["k", "phase", "r", "value", "closed_form"].map(String::from).to_vec(),
            rows: sampled_rows(&quad, &reference),
        },
        max_residual: Some(quad.distance(&reference)?),
        element: Some(closed),
    })
}

fn braided_transform(ctx: &QContext, k: u32, forward: bool, points: &[f64]) -> std::result::Result<TransformOutput, Failure> {
    let line = BraidedLine::new(ctx, 1.0)?;
    let (values, closed): (Vec<Complex64>, Vec<Complex64>) = if forward {
        let f = |x: f64| Complex64::new(line.hermite_gaussian(k, x), 0.0);
        let v = crate::par::map(points, |&y| line.forward(&f, y)).into_iter().collect::<Result<_>>()?;
        let c = points.iter().map(|&y| line.forward_image(k, y)).collect::<Result<_>>()?;
        (v, c)
    } else {
        let cd = line.c_delta()?;
        let g = |y: f64| Complex64::new(line.monomial_gaussian(k, y).unwrap_or(f64::NAN), 0.0);
        let v = crate::par::map(points, |&x| Ok(line.inverse(&g, x)? / cd)).into_iter().collect::<Result<_>>()?;
        let c = points.iter().map(|&x| line.inverse_image(k, x)).collect();
        (v, c)
    };
    let diff = values.iter().zip(&closed).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let scale = closed.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let var = if forward { "y" } else { "x" };
    Ok(TransformOutput {
        table: Table {
            columns: [var, "re", "im", "closed_re", "closed_im"].map(String::from).to_vec(),
            rows: points
                .iter()
                .zip(values.iter().zip(&closed))
                .map(|(x, (v, c))| vec![*x, v.re, v.im, c.re, c.im])
                .collect(),
        },
        max_residual: Some(if diff == 0.0 { 0.0 } else { diff / scale }),
        element: None,
    })
}

fn cmd_verify(common: &Common, suite: Suite, out: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let config = common.config();
    config.suite_context().map_err(|e| usage(e.to_string()))?;
    let report = verify::run(&config, suite)?;
    let text = match common.format {
        Format::Json => report.to_json(),
        Format::Csv => {
            let mut s = String::from("name,residual,tol,status,reason\n");
            for c in &report.checks {
                let status = match c.status {
                    Status::Pass => "pass",
                    Status::Fail => "fail",
                    Status::Skip => "skip",
                };
                let residual = c.residual.map_or(String::new(), |r| r.to_string());
                let reason = c.reason.as_deref().unwrap_or("").replace('"', "\"\"");
                s.push_str(&format!("{},{},{},{},\"{}\"\n", c.name, residual, c.tol, status, reason));
            }
            s
        }
    };
    emit(out, &text)?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAIL })
}
