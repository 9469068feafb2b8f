//! `copula`: evaluation, sampling and approximation experiments on Archimedean
//! copulas given by their Williamson measures.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use archimedean::approx::{self, Flavor};
use archimedean::checks::{self, CheckOptions};
use archimedean::gallery::{self, GalleryEntry};
use archimedean::measure::spec::{emit_measure_spec, parse_measure_spec};
use archimedean::sampling::{self, SamplerConfig};
use archimedean::{ArchimedeanCopula, Error, Method, WilliamsonMeasure};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "copula", version, about = "Archimedean copulas from Williamson measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Gallery entry name (see `copula gallery`).
    #[arg(long, global = true)]
    gallery: Option<String>,
    /// Inline MeasureSpec JSON.
    #[arg(long, global = true)]
    spec: Option<String>,
    /// Path to a MeasureSpec JSON file.
    #[arg(long, global = true)]
    spec_file: Option<PathBuf>,
    /// Dimension for gallery entries.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// de Rham parameter of `singular_full_support`.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Truncation depth of `dense_atoms`.
    #[arg(long, global = true)]
    depth: Option<usize>,
}

#[derive(Args, Clone)]
struct Sink {
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    /// Raw little-endian samples (`sample` only).
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Psi,
    Gamma,
    Taylor,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Psi => Method::PsiForm,
            MethodArg::Gamma => Method::GammaForm,
            MethodArg::Taylor => Method::TaylorForm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Discrete,
    Abscont,
    Singular,
}

impl From<FlavorArg> for Flavor {
    fn from(f: FlavorArg) -> Flavor {
        match f {
            FlavorArg::Discrete => Flavor::Discrete,
            FlavorArg::Abscont => Flavor::AbsolutelyContinuous,
            FlavorArg::Singular => Flavor::Singular,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Copula value at one or more points.
    Eval {
        /// Comma-separated coordinates; repeat for several points.
        #[arg(long, required = true, value_delimiter = ';')]
        point: Vec<String>,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Markov kernel `y ↦ K(x, [0, y])`.
    Kernel {
        /// The first d−1 coordinates, comma-separated.
        #[arg(long)]
        point: String,
        /// Values of y; defaults to a grid.
        #[arg(long, value_delimiter = ',')]
        y: Vec<f64>,
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long, value_enum, default_value = "gamma")]
        method: MethodArg,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Kendall distribution function on `t_k = k/(grid−1)` or at given t.
    Kendall {
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        #[arg(long, value_enum, default_value = "gamma")]
        method: MethodArg,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Mass of level sets `{C = t}`; defaults to the levels of the atoms.
    Levelmass {
        #[arg(long, value_delimiter = ',')]
        t: Vec<f64>,
        #[arg(long, value_enum, default_value = "gamma")]
        method: MethodArg,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Exact samples of the copula, or of the kernel given `--given`.
    Sample {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Condition on the first d−1 coordinates (comma-separated).
        #[arg(long)]
        given: Option<String>,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Stage-n approximation of the measure.
    Approx {
        #[arg(long, value_enum)]
        flavor: FlavorArg,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Convergence report of the approximation ladder against the measure.
    Converge {
        /// Flavor; all three when omitted.
        #[arg(long, value_enum)]
        flavor: Option<FlavorArg>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
        stages: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// List gallery entries, or emit one as MeasureSpec JSON.
    Gallery {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
    /// Run every module's invariant suite against the measure.
    Check {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = 20)]
        disintegration_points: usize,
        #[arg(long, default_value_t = 256)]
        kendall_grid: usize,
        /// Sample size for the 5^d full-support box check.
        #[arg(long)]
        support_samples: Option<usize>,
        #[arg(long)]
        no_ladder: bool,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        sink: Sink,
    },
}

/// Failure of a command: a library error or a failed check run.
enum Failure {
    Lib(Error),
    Usage(String),
    Io(io::Error),
    Checks(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn report(&self) -> (Value, u8) {
        match self {
            Failure::Lib(e) => {
                let mut v = json!({ "error": e.kind(), "message": e.to_string() });
                match e {
                    Error::Invariant { invariant, .. } => v["invariant"] = json!(invariant),
                    Error::Tolerance {
                        requested, achieved, ..
                    } => {
                        v["requested"] = json!(requested);
                        v["achieved"] = json!(achieved);
                    }
                    _ => {}
                }
                (v, e.exit_code() as u8)
            }
            Failure::Usage(m) => (json!({ "error": "usage", "message": m }), 2),
            Failure::Io(e) => (json!({ "error": "io", "message": e.to_string() }), 2),
            Failure::Checks(names) => (
                json!({ "error": "tolerance", "message": "invariant checks failed", "failures": names }),
                3,
            ),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// `%.17g`-style rendering: 17 significant digits, trailing zeros removed.
fn g17(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let exp = v.abs().log10().floor() as i32;
    let sci = format!("{v:.16e}");
    let (mant, e) = sci.split_once('e').unwrap();
    let e: i32 = e.parse().unwrap();
    if (-5..17).contains(&exp) {
        let decimals = (16 - e).max(0) as usize;
        let s = format!("{v:.decimals$}");
        trim_zeros(&s)
    } else {
        format!("{}e{}{:02}", trim_zeros(mant), if e < 0 { '-' } else { '+' }, e.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn parse_coords(s: &str) -> Outcome<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad coordinate \"{p}\" in \"{s}\"")))
        })
        .collect()
}

fn load(source: &Source) -> Outcome<(WilliamsonMeasure, Option<GalleryEntry>)> {
    let given = [
        source.gallery.is_some(),
        source.spec.is_some(),
        source.spec_file.is_some(),
    ];
    if given.iter().filter(|&&b| b).count() != 1 {
        return Err(Failure::Usage(
            "give exactly one of --gallery, --spec, --spec-file".into(),
        ));
    }
    if let Some(name) = &source.gallery {
        let d = source.dim.unwrap_or(3);
        let entry = match (name.as_str(), source.p, source.depth) {
            ("singular_full_support", Some(p), _) => gallery::singular_full_support(d, p)?,
            ("dense_atoms", _, Some(depth)) => gallery::dense_atoms(d, depth)?,
            _ => gallery::by_name(name, d)?,
        };
        return Ok((entry.gamma.clone(), Some(entry)));
    }
    let text = match (&source.spec, &source.spec_file) {
        (Some(s), _) => s.clone(),
        (_, Some(path)) => fs::read_to_string(path)?,
        _ => unreachable!(),
    };
    let gamma = parse_measure_spec(&text)?;
    if let Some(d) = source.dim {
        if d != gamma.dim() {
            return Err(Failure::Lib(Error::Spec(format!(
                "--dim {d} disagrees with the spec's d = {}",
                gamma.dim()
            ))));
        }
    }
    Ok((gamma, None))
}

fn copula_of(source: &Source) -> Outcome<ArchimedeanCopula> {
    Ok(ArchimedeanCopula::from_measure(load(source)?.0))
}

fn emit(sink: &Sink, bytes: &[u8]) -> Outcome<()> {
    match &sink.out {
        Some(path) => fs::write(path, bytes)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn emit_json(sink: &Sink, v: &Value) -> Outcome<()> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    emit(sink, s.as_bytes())
}

/// Writes rows as JSON records or CSV, depending on the sink.
fn emit_table(sink: &Sink, header: &[&str], rows: &[Vec<Value>]) -> Outcome<()> {
    match sink.format {
        Format::Csv => {
            let mut s = header.join(",");
            s.push('\n');
            for row in rows {
                let cells: Vec<String> = row
                    .iter()
                    .map(|v| match v {
                        Value::Number(n) => g17(n.as_f64().unwrap()),
                        Value::String(t) => t.clone(),
                        Value::Bool(b) => b.to_string(),
                        other => other.to_string(),
                    })
                    .collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            emit(sink, s.as_bytes())
        }
        Format::Json => {
            let records: Vec<Value> = rows
                .iter()
                .map(|row| {
                    let mut m = serde_json::Map::new();
                    for (k, v) in header.iter().zip(row) {
                        m.insert(k.to_string(), v.clone());
                    }
                    Value::Object(m)
                })
                .collect();
            emit_json(sink, &Value::Array(records))
        }
        Format::Binary => Err(Failure::Usage("binary output is only for `sample`".into())),
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(g17(v)))
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Eval {
            point,
            source,
            sink,
        } => {
            let c = copula_of(&source)?;
            let mut rows = Vec::new();
            for p in &point {
                let x = parse_coords(p)?;
                let v = c.value(&x)?;
                let mut row: Vec<Value> = x.iter().map(|&xi| num(xi)).collect();
                row.push(num(v));
                rows.push(row);
            }
            let names: Vec<String> = (1..=c.dim()).map(|i| format!("x{i}")).collect();
            let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
            header.push("value");
            emit_table(&sink, &header, &rows)
        }
        Command::Kernel {
            point,
            y,
            grid,
            method,
            source,
            sink,
        } => {
            let c = copula_of(&source)?;
            let x = parse_coords(&point)?;
            let ys = if y.is_empty() {
                grid_points(grid)?
            } else {
                y
            };
            let mut rows = Vec::new();
            for yv in ys {
                let k = c.markov_kernel(&x, yv, method.into())?;
                rows.push(vec![
                    num(yv),
                    num(k.value),
                    json!(serde_json::to_value(k.branch).unwrap()),
                ]);
            }
            emit_table(&sink, &["y", "kernel", "branch"], &rows)
        }
        Command::Kendall {
            grid,
            t,
            method,
            source,
            sink,
        } => {
            let c = copula_of(&source)?;
            let ts = if t.is_empty() { grid_points(grid)? } else { t };
            let mut rows = Vec::new();
            for tv in ts {
                rows.push(vec![
                    num(tv),
                    num(c.kendall_cdf(tv, method.into())?),
                    num(c.level_mass(tv, Method::GammaForm)?),
                ]);
            }
            emit_table(&sink, &["t", "kendall_cdf", "level_mass"], &rows)
        }
        Command::Levelmass {
            t,
            method,
            source,
            sink,
        } => {
            let c = copula_of(&source)?;
            let g = c.generator();
            let ts = if t.is_empty() {
                let mut levels = Vec::new();
                for a in g.law().atoms() {
                    levels.push(g.psi(1.0 / a.t)?);
                }
                levels.sort_by(f64::total_cmp);
                levels.dedup();
                levels
            } else {
                t
            };
            let mut rows = Vec::new();
            for tv in ts {
                rows.push(vec![num(tv), num(c.level_mass(tv, method.into())?)]);
            }
            emit_table(&sink, &["t", "level_mass"], &rows)
        }
        Command::Sample {
            n,
            seed,
            stream,
            given,
            source,
            sink,
        } => {
            let c = copula_of(&source)?;
            let cfg = SamplerConfig {
                seed,
                n,
                stream_id: stream,
            };
            let (d, data) = match given {
                Some(x) => (1, sampling::sample_conditional(&c, &parse_coords(&x)?, cfg)?),
                None => {
                    let p = sampling::sample_copula(&c, cfg)?;
                    (p.d, p.data)
                }
            };
            match sink.format {
                Format::Binary => {
                    let mut buf = Vec::with_capacity(16 + 8 * data.len());
                    buf.extend_from_slice(b"CPLB");
                    buf.extend_from_slice(&(d as u32).to_le_bytes());
                    buf.extend_from_slice(&(n as u64).to_le_bytes());
                    for v in &data {
                        buf.extend_from_slice(&v.to_le_bytes());
                    }
                    emit(&sink, &buf)
                }
                Format::Csv => {
                    let mut s = String::new();
                    for row in data.chunks_exact(d) {
                        let cells: Vec<String> = row.iter().map(|&v| g17(v)).collect();
                        s.push_str(&cells.join(","));
                        s.push('\n');
                    }
                    emit(&sink, s.as_bytes())
                }
                Format::Json => {
                    let rows: Vec<Value> = data
                        .chunks_exact(d)
                        .map(|r| Value::Array(r.iter().map(|&v| num(v)).collect()))
                        .collect();
                    emit_json(
                        &sink,
                        &json!({ "d": d, "n": n, "seed": seed, "stream": stream, "points": rows }),
                    )
                }
            }
        }
        Command::Approx {
            flavor,
            n,
            source,
            sink,
        } => {
            let (gamma, _) = load(&source)?;
            let a = approx::approximate(&gamma, flavor.into(), n)?;
            match sink.format {
                Format::Csv => {
                    let mut rows = Vec::new();
                    for &q in &a.anchors {
                        rows.push(vec![
                            num(q),
                            num(gamma.cdf(q)?),
                            num(a.gamma.cdf(q * a.scale)?),
                        ]);
                    }
                    emit_table(&sink, &["anchor", "target_cdf", "approx_cdf_rescaled"], &rows)
                }
                _ => {
                    let spec: Value =
                        serde_json::from_str(&emit_measure_spec(&a.gamma)?).expect("valid json");
                    emit_json(
                        &sink,
                        &json!({
                            "flavor": Flavor::from(flavor),
                            "n": n,
                            "scale": a.scale,
                            "anchors": a.anchors,
                            "measure": spec,
                        }),
                    )
                }
            }
        }
        Command::Converge {
            flavor,
            stages,
            grid,
            samples,
            seed,
            source,
            sink,
        } => {
            let (gamma, _) = load(&source)?;
            let flavors: Vec<Flavor> = match flavor {
                Some(f) => vec![f.into()],
                None => Flavor::ALL.to_vec(),
            };
            let mut ladders = Vec::new();
            for f in flavors {
                ladders.push((f, approx::ladder(&gamma, f, &stages, grid, samples, seed)?));
            }
            if sink.format == Format::Csv {
                let names: Vec<String> = ladders[0].1[0]
                    .report
                    .entries()
                    .into_iter()
                    .map(|e| e.0)
                    .collect();
                let mut header = vec!["flavor", "n", "scale"];
                header.extend(names.iter().map(String::as_str));
                let mut rows = Vec::new();
                for (f, ladder) in &ladders {
                    for s in ladder {
                        let mut row = vec![serde_json::to_value(f).unwrap(), json!(s.n), num(s.scale)];
                        row.extend(s.report.entries().into_iter().map(|e| num(e.1)));
                        rows.push(row);
                    }
                }
                return emit_table(&sink, &header, &rows);
            }
            let mut out = Vec::new();
            for (f, ladder) in &ladders {
                let names: Vec<String> = ladder[0].report.entries().into_iter().map(|e| e.0).collect();
                let mut criteria = serde_json::Map::new();
                for (i, name) in names.iter().enumerate() {
                    let series: Vec<Value> =
                        ladder.iter().map(|s| num(s.report.entries()[i].1)).collect();
                    criteria.insert(name.clone(), Value::Array(series));
                }
                out.push(json!({
                    "flavor": f,
                    "stages": ladder.iter().map(|s| s.n).collect::<Vec<_>>(),
                    "scales": ladder.iter().map(|s| s.scale).collect::<Vec<_>>(),
                    "criteria": criteria,
                    "reports": ladder.iter().map(|s| &s.report).collect::<Vec<_>>(),
                }));
            }
            emit_json(
                &sink,
                &json!({
                    "d": gamma.dim(),
                    "grid_resolution": grid,
                    "sample_count": samples,
                    "seed": seed,
                    "metadata": {
                        "marginal_density_orders": "only m = 2 and m = d-1 are checked",
                        "kernel_gap": "mean absolute gap over sampled (x, y), degenerate branches skipped",
                    },
                    "ladders": out,
                }),
            )
        }
        Command::Gallery { source, sink } => {
            if source.gallery.is_none() {
                let entries = gallery::catalog(source.dim.unwrap_or(3))?;
                let rows: Vec<Vec<Value>> = entries
                    .iter()
                    .map(|e| {
                        let s = e.summary();
                        vec![
                            json!(s.name),
                            json!(s.d),
                            num(s.scale),
                            serde_json::to_value(s.regularity).unwrap(),
                            json!(s.notes),
                        ]
                    })
                    .collect();
                if sink.format == Format::Csv {
                    let rows: Vec<Vec<Value>> =
                        rows.into_iter().map(|mut r| { r.truncate(4); r }).collect();
                    return emit_table(&sink, &["name", "d", "scale", "regularity"], &rows);
                }
                return emit_table(&sink, &["name", "d", "scale", "regularity", "notes"], &rows);
            }
            let (gamma, entry) = load(&source)?;
            let spec = emit_measure_spec(&gamma)?;
            if sink.format == Format::Csv {
                return Err(Failure::Usage("gallery entries are emitted as JSON".into()));
            }
            let mut s = spec;
            s.push('\n');
            if let Some(e) = entry {
                eprintln!(
                    "{}",
                    serde_json::to_string(&e.summary()).expect("serializable")
                );
            }
            emit(&sink, s.as_bytes())
        }
        Command::Check {
            samples,
            points,
            disintegration_points,
            kendall_grid,
            support_samples,
            no_ladder,
            seed,
            source,
            sink,
        } => {
            let (gamma, _) = load(&source)?;
            let opts = CheckOptions {
                seed,
                mc_samples: samples,
                random_points: points,
                disintegration_points,
                kendall_grid,
                support_samples,
                ladder: !no_ladder,
            };
            let report = checks::run(&gamma, &opts)?;
            if sink.format == Format::Csv {
                let mut rows = Vec::new();
                for s in &report.suites {
                    for c in &s.checks {
                        rows.push(vec![
                            json!(s.module),
                            json!(c.name.replace(',', ";")),
                            json!(c.passed),
                            num(c.worst),
                            num(c.tolerance),
                        ]);
                    }
                }
                emit_table(&sink, &["module", "check", "passed", "worst", "tolerance"], &rows)?;
            } else {
                emit_json(&sink, &serde_json::to_value(&report).expect("serializable"))?;
            }
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Checks(report.failures()))
            }
        }
    }
}

fn grid_points(n: usize) -> Outcome<Vec<f64>> {
    if n < 2 {
        return Err(Failure::Usage("grid needs at least 2 points".into()));
    }
    Ok((0..n).map(|k| k as f64 / (n - 1) as f64).collect())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (v, code) = f.report();
            eprintln!("{v}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(g17(0.3), "0.29999999999999999");
        assert_eq!(g17(0.875), "0.875");
        assert_eq!(g17(1.0), "1");
        assert_eq!(g17(1e-20), "9.9999999999999995e-21");
        assert_eq!(g17(0.0), "0");
        for v in [0.1, 7.0 / 18.0, 1e-7, 123456.789, 3e30] {
            assert_eq!(g17(v).parse::<f64>().unwrap(), v);
        }
    }
}
