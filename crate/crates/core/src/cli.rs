//! Command-line front end. [`run`] parses arguments, dispatches to the
//! harness or theory operation, writes results and `run_manifest.json` to the
//! output directory, and returns the process exit code.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::dist::{BatchSampler, ProductQuartic, StandardGaussian};
use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig, Kind};
use crate::numerics::RngStream;
use crate::theory;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Parser)]
#[command(name = "nce-lab", version, about = "Numerical lab for noise contrastive estimation")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON experiment config, or a run manifest to replay.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dotted-key override such as `gd.step_size=0.005`; repeatable.
    #[arg(long = "override", value_name = "K=V", global = true)]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = ".", global = true)]
    pub out: PathBuf,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', global = true)]
    pub dims: Option<Vec<usize>>,
    /// Suppress the summary on standard output.
    #[arg(long, short = 'q', global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    Data,
    Noise,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a batch from the quartic data law or the Gaussian noise.
    Sample {
        #[arg(long, value_enum, default_value = "data")]
        source: SourceArg,
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Bhattacharyya, Hellinger and TV bounds and the Hessian norm bound.
    Distances,
    /// Spectrum of the population Hessian at θ* across dimensions.
    Hessian,
    /// MSE of the NCE estimator across dimensions.
    Mse {
        /// Use 26 dimensions from 70 to 120 and 100 trials.
        #[arg(long)]
        full: bool,
    },
    /// Anti-concentration of the log density ratio.
    Anticonc,
    /// Variance identity E[A²] + E[B²] = 2vᵀHv.
    Identity,
    /// SVG scatter plot with an OLS line.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        /// Column name, optionally prefixed with `log:`.
        #[arg(long)]
        y: String,
        /// Output file name inside `--out`.
        #[arg(long, default_value = "plot.svg")]
        output: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample { .. } => "sample",
            Command::Distances => "distances",
            Command::Hessian => "hessian",
            Command::Mse { .. } => "mse",
            Command::Anticonc => "anticonc",
            Command::Identity => "identity",
            Command::Plot { .. } => "plot",
        }
    }

    fn kind(&self) -> Option<Kind> {
        match self {
            Command::Hessian => Some(Kind::HessianDecay),
            Command::Mse { .. } => Some(Kind::Mse),
            Command::Anticonc => Some(Kind::Anticonc),
            Command::Identity => Some(Kind::Identity),
            _ => None,
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("nce-lab: {e}");
            exit_code(&e)
        }
    }
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies a `a.b.c=value` override. Only keys already present may be set.
pub fn apply_override(target: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not of the form K=V")))?;
    let mut node = target;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override key {key:?} does not name a config field")))?;
        let slot = obj
            .get_mut(*part)
            .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
        if i + 1 == parts.len() {
            *slot = parse_value(raw);
            return Ok(());
        }
        node = slot;
    }
    Err(Error::Config(format!("empty override key in {spec:?}")))
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn read_config_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    // A run manifest carries its resolved config under "config".
    if value.get("manifest_version").is_some() {
        return value
            .get("config")
            .filter(|c| c.is_object())
            .cloned()
            .ok_or_else(|| Error::Config("manifest has no replayable config".into()));
    }
    Ok(value)
}

/// Defaults for `kind`, then the config file, overrides, `--seed` and `--dims`.
pub fn resolve_config(kind: Kind, full: bool, common: &CommonArgs) -> Result<ExperimentConfig> {
    let defaults = if full { ExperimentConfig::full_mse() } else { ExperimentConfig::defaults_for(kind) };
    let mut value = serde_json::to_value(&defaults).expect("config serializes");
    if let Some(path) = &common.config {
        let file = read_config_file(path)?;
        if !file.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        if let Some(obj) = file.as_object() {
            for key in obj.keys() {
                if value.get(key).is_none() {
                    return Err(Error::Config(format!("unknown config key {key:?}")));
                }
            }
        }
        merge(&mut value, &file);
    }
    for spec in &common.overrides {
        apply_override(&mut value, spec)?;
    }
    if let Some(seed) = common.seed {
        value["master_seed"] = json!(seed);
    }
    if let Some(dims) = &common.dims {
        value["dims"] = json!(dims);
    }
    let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    if cfg.kind != kind {
        return Err(Error::Config(format!("config kind {:?} does not match this subcommand", cfg.kind)));
    }
    Ok(cfg)
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".nce-lab-write-test");
    std::fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    let _ = std::fs::remove_file(probe);
    Ok(())
}

struct Run<'a> {
    common: &'a CommonArgs,
    outputs: Vec<String>,
}

impl Run<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        harness::write_text(&self.common.out, name, contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.common.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    // Resolve the config before touching the file system.
    let cfg = match (cli.command.kind(), &cli.command) {
        (Some(kind), Command::Mse { full }) => Some(resolve_config(kind, *full, common)?),
        (Some(kind), _) => Some(resolve_config(kind, false, common)?),
        (None, _) => {
            if common.config.is_some() || !common.overrides.is_empty() {
                return Err(Error::Config(format!("{} takes no config", cli.command.name())));
            }
            None
        }
    };
    prepare_out_dir(&common.out)?;
    let mut run = Run {
        common,
        outputs: Vec::new(),
    };
    let mut params = Map::new();
    match &cli.command {
        Command::Sample { source, n } => {
            let d = match common.dims.as_deref() {
                None => 2,
                Some([d]) if *d >= 1 => *d,
                Some(_) => return Err(Error::Config("sample takes exactly one positive dimension".into())),
            };
            let seed = common.seed.unwrap_or(0);
            let (batch, stream) = match source {
                SourceArg::Data => (ProductQuartic::new(d)?.sample_batch(*n, &mut RngStream::new(seed, 0))?, "data"),
                SourceArg::Noise => (StandardGaussian::new(d)?.sample_batch(*n, &mut RngStream::new(seed, 1))?, "noise"),
            };
            run.write("samples.csv", &batch.to_csv())?;
            run.write("samples.json", &serde_json::to_string_pretty(&batch.info()).expect("info serializes"))?;
            params.insert("source".into(), json!(stream));
            params.insert("n".into(), json!(n));
            params.insert("d".into(), json!(d));
            params.insert("seed".into(), json!(seed));
            run.say(format!("wrote {n} {stream} points in dimension {d}"));
        }
        Command::Distances => {
            let dims = common.dims.clone().unwrap_or_else(|| vec![1, 10, 100]);
            if dims.iter().any(|&d| d == 0) {
                return Err(Error::Config("dimensions must be positive".into()));
            }
            let csv = distances_csv(&dims)?;
            run.write("distances.csv", &csv)?;
            params.insert("dims".into(), json!(dims));
            run.say(csv.trim_end());
        }
        Command::Hessian => {
            let cfg = cfg.as_ref().expect("resolved above");
            let out = harness::run_hessian_decay(cfg)?;
            run.write("hessian.csv", &harness::hessian_csv(&out.records))?;
            if let Some(fit) = &out.fit {
                run.write("fit.json", &harness::fit_json(fit))?;
                run.say(format!("ln lambda_max slope {:.6}, r^2 {:.4}", fit.slope, fit.r_squared));
            }
        }
        Command::Mse { .. } => {
            let cfg = cfg.as_ref().expect("resolved above");
            let out = harness::run_mse_experiment(cfg)?;
            run.write("mse.csv", &harness::mse_csv(&out.records))?;
            run.write("summary.csv", &harness::summary_csv(&out.summary))?;
            if let Some(fit) = &out.fit {
                run.write("fit.json", &harness::fit_json(fit))?;
                run.say(format!("ln MSE slope {:.6}, r^2 {:.4}", fit.slope, fit.r_squared));
            }
        }
        Command::Anticonc => {
            let cfg = cfg.as_ref().expect("resolved above");
            let reports = harness::run_anticonc_experiment(cfg)?;
            run.write("anticonc.csv", &harness::anticonc_csv(&reports, false))?;
            run.write("anticonc_reversed.csv", &harness::anticonc_csv(&reports, true))?;
            for r in &reports {
                run.say(format!(
                    "d={} forward {} reversed {}",
                    r.forward.thresholds.d,
                    if r.forward.pass { "pass" } else { "fail" },
                    if r.reversed.pass { "pass" } else { "fail" }
                ));
            }
        }
        Command::Identity => {
            let cfg = cfg.as_ref().expect("resolved above");
            let records = harness::run_identity_check(cfg)?;
            run.write("identity.csv", &harness::identity_csv(&records))?;
            for r in &records {
                run.say(format!("d={} lhs {} rhs {} {}", r.d, r.lhs, r.rhs, if r.pass { "pass" } else { "fail" }));
            }
        }
        Command::Plot { input, x, y, output } => {
            let svg = plot_svg(input, x, y)?;
            run.write(output, &svg.svg)?;
            params.insert("input".into(), json!(input));
            params.insert("x".into(), json!(x));
            params.insert("y".into(), json!(y));
            run.say(format!("slope {:.6}", svg.fit.slope));
        }
    }
    let manifest = json!({
        "manifest_version": 1,
        "subcommand": cli.command.name(),
        "config": cfg.as_ref().map(|c| serde_json::to_value(c).expect("config serializes")),
        "params": params,
        "overrides": common.overrides,
        "outputs": run.outputs,
        "versions": { "nce_lab": env!("CARGO_PKG_VERSION") },
    });
    harness::write_text(
        &common.out,
        MANIFEST_FILE,
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
}

/// Rows `d,rho,hellinger_sq,tv_lower_bound,hessian_norm_bound_log`.
pub fn distances_csv(dims: &[usize]) -> Result<String> {
    let rho = theory::bhattacharyya_rho()?;
    let scalar = crate::dist::QuarticScalarDist::new()?;
    let mut s = String::from("d,rho,hellinger_sq,tv_lower_bound,hessian_norm_bound_log\n");
    for &d in dims {
        let r = theory::tv_hellinger_report_with(rho, d)?;
        let b = theory::hessian_norm_bound_with(d, rho, &scalar)?;
        let _ = writeln!(s, "{},{},{},{},{}", d, rho, r.hellinger_sq_d, r.tv_lower_bound_d, b.log_bound);
    }
    Ok(s)
}

/// A rendered plot and the fit drawn on it.
#[derive(Debug, Clone)]
pub struct Plot {
    pub svg: String,
    pub fit: harness::FitReport,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 40.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

/// Reads two columns of `input` and renders them; `y` may be `log:<col>`.
pub fn plot_svg(input: &Path, x_col: &str, y_spec: &str) -> Result<Plot> {
    let (y_col, log_y) = match y_spec.strip_prefix("log:") {
        Some(c) => (c, true),
        None => (y_spec, false),
    };
    let mut reader = csv::Reader::from_path(input).map_err(|e| Error::Data(format!("{}: {e}", input.display())))?;
    let headers = reader.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("column {name:?} not found in {}", input.display())))
    };
    let (xi, yi) = (col(x_col)?, col(y_col)?);
    let mut points = Vec::new();
    let mut bad = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Data(format!("row {}: column {} is not a number", row + 1, i + 1)))
        };
        let (x, y) = (parse(xi)?, parse(yi)?);
        if log_y && !(y > 0.0 && y.is_finite()) {
            bad.push(format!("row {} ({y})", row + 1));
            continue;
        }
        points.push((x, if log_y { y.ln() } else { y }));
    }
    if !bad.is_empty() {
        return Err(Error::Data(format!("non-positive values under log: {}", bad.join(", "))));
    }
    if points.is_empty() {
        return Err(Error::Data(format!("{} has no data rows", input.display())));
    }
    let fit = harness::linear_fit(&points)?;
    let y_label = if log_y { format!("ln {y_col}") } else { y_col.to_string() };
    Ok(Plot {
        svg: render_svg(&points, &fit, x_col, &y_label),
        fit,
    })
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn render_svg(points: &[(f64, f64)], fit: &harness::FitReport, x_label: &str, y_label: &str) -> String {
    let (x0, x1) = padded_range(points.iter().map(|p| p.0));
    let line_ys = [fit.intercept + fit.slope * x0, fit.intercept + fit.slope * x1];
    let (y0, y1) = padded_range(points.iter().map(|p| p.1).chain(line_ys));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (ax, ay) = (LEFT, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{ax}" y1="{ay}" x2="{}" y2="{ay}"/><line x1="{ax}" y1="{ay}" x2="{ax}" y2="{TOP}"/></g>"#,
        WIDTH - RIGHT
    );
    s.push_str(r#"<g font-family="sans-serif" font-size="12">"#);
    s.push('\n');
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let xv = x0 + t * (x1 - x0);
        let yv = y0 + t * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{ay}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            ay + 5.0,
            ay + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{ax}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ax - 5.0,
            ax - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="30" text-anchor="end" font-size="14">slope = {:.6}  r² = {:.4}</text>"#,
        WIDTH - RIGHT,
        fit.slope,
        fit.r_squared
    );
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-width="2"/>"#,
        sx(x0),
        sy(line_ys[0]),
        sx(x1),
        sy(line_ys[1])
    );
    s.push_str(r#"<g fill="steelblue">"#);
    s.push('\n');
    for &(x, y) in points {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4"/>"#, sx(x), sy(y));
    }
    s.push_str("</g>\n</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
