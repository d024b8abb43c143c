//! Command-line driver: `run(argv)` parses arguments, dispatches to the
//! library and writes CSV with a JSON run manifest next to it.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::acceptance::Suite;
use crate::floquet::{band_structure, floquet_data, Interval, Region};
use crate::lyapunov::lyapunov_profile;
use crate::model::ModelConfig;
use crate::scattering::{band_coefficients, critical_set, gap_coefficients};
use crate::spectra::{
    eigenfunction_decay, good_box_probability, green_function, ids_estimate, thouless_check, wegner_probability,
    DirichletBox, FitWindow,
};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "anderson1d", version, about = "Transfer-matrix experiments for 1D continuum Anderson models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(untagged)]
enum Command {
    /// Bands and gaps of the periodic background
    Bands(BandsArgs),
    /// Scattering coefficients of a single site on an energy grid
    Scatter(ScatterArgs),
    /// Exceptional energies: b-roots, D-zeros, band edges, gap-coefficient roots
    Critical(CriticalArgs),
    /// Lyapunov exponent estimates
    Lyapunov(LyapunovArgs),
    /// Integrated density of states from Dirichlet boxes
    Ids(IdsArgs),
    /// Thouless-formula consistency of simulated γ and N
    Thouless(ThoulessArgs),
    /// Green's function of one sampled box
    Green(GreenArgs),
    /// Fraction of (γ̄, λ)-good boxes
    Goodbox(GoodboxArgs),
    /// Fraction of boxes with an eigenvalue near λ
    Wegner(WegnerArgs),
    /// Decay rates of the eigenfunctions of one sampled box
    Eigdecay(EigdecayArgs),
    /// Run the acceptance suite
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// Model file (JSON)
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest path (default: `<out>.manifest.json` when --out is given)
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EnergyGrid {
    #[arg(long, requires_all = ["lambda_max", "lambda_step"], conflicts_with = "lambda_list")]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_step: Option<f64>,
    /// Comma-separated energies
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda_list: Option<Vec<f64>>,
}

impl EnergyGrid {
    fn energies(&self) -> Result<Vec<f64>> {
        if let Some(list) = &self.lambda_list {
            return Ok(list.clone());
        }
        match (self.lambda_min, self.lambda_max, self.lambda_step) {
            (Some(a), Some(b), Some(h)) => grid(a, b, h),
            _ => Err(Error::InvalidInput("give --lambda-list or --lambda-min/--lambda-max/--lambda-step".into())),
        }
    }
}

fn grid(a: f64, b: f64, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::InvalidInput(format!("bad grid: min {a}, max {b}, step {h}")));
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * h).collect())
}

#[derive(Args, Debug, Serialize)]
struct BandsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_negative_numbers = true)]
    min: f64,
    #[arg(long, allow_negative_numbers = true)]
    max: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = crate::floquet::DEFAULT_EDGE_TOL)]
    edge_tol: f64,
    /// List touching (zero-width) gaps instead of merging the bands around them
    #[arg(long)]
    closed_gaps: bool,
}

#[derive(Args, Debug, Serialize)]
struct ScatterArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    energies: EnergyGrid,
    /// Scan step of the band-structure pass
    #[arg(long, default_value_t = 0.01)]
    step: f64,
}

#[derive(Args, Debug, Serialize)]
struct CriticalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_negative_numbers = true)]
    min: f64,
    #[arg(long, allow_negative_numbers = true)]
    max: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = crate::scattering::DEFAULT_ROOT_TOL)]
    root_tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct LyapunovArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    energies: EnergyGrid,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

#[derive(Args, Debug, Serialize)]
struct IdsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    energies: EnergyGrid,
    /// Box length L
    #[arg(long)]
    length: u32,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

#[derive(Args, Debug, Serialize)]
struct ThoulessArgs {
    #[command(flatten)]
    common: Common,
    /// Fit interval `a:b`; repeat for a union
    #[arg(long = "fit", required = true, value_parser = parse_interval, allow_hyphen_values = true)]
    fit: Vec<(f64, f64)>,
    /// Spacing of the Lyapunov samples inside the fit window
    #[arg(long, default_value_t = 0.25)]
    fit_step: f64,
    #[arg(long, allow_negative_numbers = true)]
    ids_min: f64,
    #[arg(long)]
    ids_max: f64,
    #[arg(long, default_value_t = 0.05)]
    ids_step: f64,
    #[arg(long, default_value_t = 120)]
    length: u32,
    #[arg(long, default_value_t = 20)]
    ids_samples: usize,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, default_value_t = 100)]
    samples: usize,
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[derive(Args, Debug, Serialize)]
struct GreenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    length: u32,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    y: Vec<f64>,
    /// Sample index of the configuration drawn from --seed
    #[arg(long, default_value_t = 0)]
    sample: u64,
}

#[derive(Args, Debug, Serialize)]
struct GoodboxArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long)]
    gamma_bar: f64,
    /// Comma-separated box lengths, each in 3Z \ 6Z
    #[arg(long, value_delimiter = ',', required = true)]
    lengths: Vec<u32>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

#[derive(Args, Debug, Serialize)]
struct WegnerArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    lengths: Vec<u32>,
    #[arg(long, default_value_t = 500)]
    samples: usize,
}

#[derive(Args, Debug, Serialize)]
struct EigdecayArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    length: u32,
    #[arg(long, allow_negative_numbers = true)]
    window_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    window_max: f64,
    #[arg(long, default_value_t = 0)]
    sample: u64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Args, Debug, Serialize)]
struct SelftestArgs {
    /// Comma-separated criterion numbers (default: all)
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[arg(long, hide = true, default_value_t = 1.0)]
    tolerance_scale: f64,
}

/// Provenance written next to every output file.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub model_path: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub master_seed: u64,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
}

/// Tabular output of one subcommand.
struct Table {
    header: &'static str,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &'static str) -> Self {
        Self { header, rows: Vec::new() }
    }

    fn render(&self) -> String {
        let mut s = String::from(self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Twelve significant digits, plain decimal for magnitudes in `[1e-6, 1e15)`
/// and scientific notation otherwise.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mag = x.abs();
    if (1e-6..1e15).contains(&mag) {
        let exponent = mag.log10().floor() as i32;
        let decimals = (11 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new leading digit; one digit too many is harmless.
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

fn num(x: f64) -> String {
    format_number(x)
}

/// Runs the CLI on `argv` (program name first) and returns the exit code:
/// 0 on success, 1 for invalid input, 2 for numerical failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Command::Selftest(args) = &cli.command {
        return selftest(&args.only, args.tolerance_scale);
    }
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn selftest(only: &[u8], scale: f64) -> i32 {
    if let Some(bad) = only.iter().find(|&&id| !(1..=10).contains(&id)) {
        eprintln!("error: InvalidInput: no criterion {bad}; criteria are numbered 1 to 10");
        return 1;
    }
    let suite = Suite::with_tolerance_scale(scale);
    let outcomes = if only.is_empty() { suite.run_all() } else { only.iter().map(|&id| suite.run(id)).collect() };
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        0
    } else {
        2
    }
}

fn execute(command: &Command) -> Result<()> {
    let started = chrono::Utc::now().to_rfc3339();
    let (name, common, table, notes) = match command {
        Command::Bands(a) => ("bands", &a.common, bands(a)?, vec![]),
        Command::Scatter(a) => ("scatter", &a.common, scatter(a)?, vec![]),
        Command::Critical(a) => ("critical", &a.common, critical(a)?, vec![]),
        Command::Lyapunov(a) => ("lyapunov", &a.common, lyapunov(a)?, vec![]),
        Command::Ids(a) => ("ids", &a.common, ids(a)?, vec![]),
        Command::Thouless(a) => {
            let (table, notes) = thouless(a)?;
            ("thouless", &a.common, table, notes)
        }
        Command::Green(a) => ("green", &a.common, green(a)?, vec![]),
        Command::Goodbox(a) => ("goodbox", &a.common, goodbox(a)?, vec![]),
        Command::Wegner(a) => ("wegner", &a.common, wegner(a)?, vec![]),
        Command::Eigdecay(a) => ("eigdecay", &a.common, eigdecay(a)?, vec![]),
        Command::Selftest(_) => unreachable!("handled by run"),
    };
    for n in &notes {
        eprintln!("{n}");
    }
    write_output(common.out.as_deref(), &table.render())?;
    let manifest_path = common.manifest.clone().or_else(|| common.out.as_ref().map(|o| sidecar(o)));
    if let Some(path) = manifest_path {
        let manifest = RunManifest {
            subcommand: name.into(),
            model_path: common.model.display().to_string(),
            parameters: parameters(command),
            master_seed: common.seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            started,
            finished: chrono::Utc::now().to_rfc3339(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_output(Some(&path), &(text + "\n"))?;
    }
    Ok(())
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn parameters(command: &Command) -> BTreeMap<String, serde_json::Value> {
    let mut flat = BTreeMap::new();
    fn walk(v: serde_json::Value, out: &mut BTreeMap<String, serde_json::Value>) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, v) in map {
                    if v.is_object() {
                        walk(v, out);
                    } else if !matches!(k.as_str(), "model" | "seed" | "out" | "manifest") {
                        out.insert(k, v);
                    }
                }
            }
            other => {
                out.insert("value".into(), other);
            }
        }
    }
    walk(serde_json::to_value(command).expect("arguments serialize"), &mut flat);
    flat
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    let io = |p: &Path, e: std::io::Error| Error::Io { path: p.display().to_string(), message: e.to_string() };
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io(p, e)),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(|e| io(Path::new("<stdout>"), e)),
    }
}

fn load(common: &Common) -> Result<ModelConfig> {
    ModelConfig::load(&common.model)
}

fn bands(a: &BandsArgs) -> Result<Table> {
    let m = load(&a.common)?;
    let bs = band_structure(&m, a.min, a.max, a.step, a.edge_tol)?;
    let mut merged: Vec<Interval> = Vec::new();
    for iv in &bs.intervals {
        let closed = iv.kind == Region::Gap && iv.left == iv.right;
        match merged.last_mut() {
            Some(last) if !a.closed_gaps && (closed || last.right == iv.left && last.kind == iv.kind) => {
                last.right = iv.right;
            }
            _ => merged.push(*iv),
        }
    }
    let mut t = Table::new("band_index,kind,left,right");
    for (i, iv) in merged.iter().enumerate() {
        t.rows.push(vec![i.to_string(), iv.kind.as_str().into(), num(iv.left), num(iv.right)]);
    }
    Ok(t)
}

fn scatter(a: &ScatterArgs) -> Result<Table> {
    let m = load(&a.common)?.normalize_support()?;
    let energies = a.energies.energies()?;
    let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bs = band_structure(&m, lo - 1.0, hi + 1.0, a.step, crate::floquet::DEFAULT_EDGE_TOL)?;
    let mut t = Table::new("lambda,region,a_re,a_im,b_re,b_im,a1,b1,a2,b2");
    for l in energies {
        let fd = floquet_data(&m, l, &bs)?;
        let row = match fd.region {
            Region::Band => {
                let s = band_coefficients(&m, l, &bs)?;
                vec![num(l), "band".into(), num(s.a.re), num(s.a.im), num(s.b.re), num(s.b.im)]
                    .into_iter()
                    .chain(std::iter::repeat(String::new()).take(4))
                    .collect()
            }
            Region::Gap => {
                let g = gap_coefficients(&m, l, &bs)?;
                let mut r = vec![num(l), "gap".into()];
                r.extend(std::iter::repeat(String::new()).take(4));
                r.extend([num(g.a1), num(g.b1), num(g.a2), num(g.b2)]);
                r
            }
        };
        t.rows.push(row);
    }
    Ok(t)
}

fn critical(a: &CriticalArgs) -> Result<Table> {
    let m = load(&a.common)?.normalize_support()?;
    let cs = critical_set(&m, a.min, a.max, a.step, a.root_tol)?;
    let mut t = Table::new("lambda,kind,residual");
    for e in &cs.entries {
        t.rows.push(vec![num(e.lambda), e.kind.as_str().into(), num(e.residual)]);
    }
    Ok(t)
}

fn lyapunov(a: &LyapunovArgs) -> Result<Table> {
    let m = load(&a.common)?;
    positive_counts(&[("steps", a.steps), ("samples", a.samples)])?;
    let profile = lyapunov_profile(&m, &a.energies.energies()?, a.steps, a.samples, a.common.seed);
    let mut t = Table::new("lambda,mean,std_error,n_steps,n_samples");
    for e in profile {
        t.rows.push(vec![num(e.lambda), num(e.mean), num(e.std_error), e.n_steps.to_string(), e.n_samples.to_string()]);
    }
    Ok(t)
}

fn positive_counts(items: &[(&str, usize)]) -> Result<()> {
    for (name, v) in items {
        if *v == 0 {
            return Err(Error::InvalidInput(format!("--{name} must be positive")));
        }
    }
    Ok(())
}

fn ids(a: &IdsArgs) -> Result<Table> {
    let m = load(&a.common)?;
    let table = ids_estimate(&m, &a.energies.energies()?, a.length, a.samples, a.common.seed)?;
    let mut t = Table::new("lambda,N,stderr");
    for j in 0..table.lambda_grid.len() {
        t.rows.push(vec![num(table.lambda_grid[j]), num(table.values[j]), num(table.std_errors[j])]);
    }
    Ok(t)
}

fn thouless(a: &ThoulessArgs) -> Result<(Table, Vec<String>)> {
    let m = load(&a.common)?;
    positive_counts(&[("steps", a.steps), ("samples", a.samples)])?;
    let window = FitWindow::new(a.fit.clone())?;
    let mut energies = Vec::new();
    for &(lo, hi) in &window.intervals {
        energies.extend(grid(lo, hi, a.fit_step)?);
    }
    let gamma = lyapunov_profile(&m, &energies, a.steps, a.samples, a.common.seed);
    let ids_grid = grid(a.ids_min, a.ids_max, a.ids_step)?;
    let ids = ids_estimate(&m, &ids_grid, a.length, a.ids_samples, a.common.seed)?;
    let fit = thouless_check(&gamma, &ids, &window)?;
    let mut t = Table::new("lambda,gamma,integral,residual");
    for r in &fit.rows {
        t.rows.push(vec![num(r.lambda), num(r.gamma), num(r.integral), num(r.residual)]);
    }
    let mut notes = vec![format!("alpha = {}", num(fit.alpha)), format!("max_residual = {}", num(fit.max_residual))];
    notes.extend(fit.warnings.iter().map(|w| format!("warning: {w}")));
    Ok((t, notes))
}

fn sampled_box_config(m: &ModelConfig, length: u32, seed: u64, sample: u64) -> Result<crate::model::Configuration> {
    if length == 0 {
        return Err(Error::InvalidInput("--length must be positive".into()));
    }
    let (lo, hi) = DirichletBox::cell_range(length);
    Ok(m.sample_configuration(lo, hi, seed, sample))
}

fn green(a: &GreenArgs) -> Result<Table> {
    let m = load(&a.common)?;
    let c = sampled_box_config(&m, a.length, a.common.seed, a.sample)?;
    let mut t = Table::new("x,y,G");
    for &x in &a.x {
        for &y in &a.y {
            t.rows.push(vec![num(x), num(y), num(green_function(&m, &c, a.length, a.lambda, x, y)?)]);
        }
    }
    Ok(t)
}

fn goodbox(a: &GoodboxArgs) -> Result<Table> {
    let m = load(&a.common)?;
    let mut t = Table::new("L,fraction");
    for &l in &a.lengths {
        let f = good_box_probability(&m, a.lambda, a.gamma_bar, l, a.samples, a.common.seed)?;
        t.rows.push(vec![l.to_string(), num(f)]);
    }
    Ok(t)
}

fn wegner(a: &WegnerArgs) -> Result<Table> {
    let m = load(&a.common)?;
    let mut t = Table::new("L,fraction");
    for &l in &a.lengths {
        if l == 0 {
            return Err(Error::InvalidInput("box lengths must be positive".into()));
        }
        let f = wegner_probability(&m, a.lambda, l, a.sigma, a.beta, a.samples, a.common.seed)?;
        t.rows.push(vec![l.to_string(), num(f)]);
    }
    Ok(t)
}

fn eigdecay(a: &EigdecayArgs) -> Result<Table> {
    let m = load(&a.common)?;
    let c = sampled_box_config(&m, a.length, a.common.seed, a.sample)?;
    let eig = crate::spectra::box_eigenvalues(&m, &c, a.length, (a.window_min, a.window_max), a.tol)?;
    let mut t = Table::new("eigenvalue,decay_rate");
    for e in eig {
        t.rows.push(vec![num(e), num(eigenfunction_decay(&m, &c, a.length, e)?)]);
    }
    Ok(t)
}
