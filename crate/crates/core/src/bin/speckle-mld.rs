//! `speckle-mld`: synthesize speckled phantoms, denoise, score and sweep.
//!
//! Exit status: 0 success, 2 solver did not converge (output still written),
//! 64 usage error, 1 anything else.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use speckle_mld::io::{read_image, write_image};
use speckle_mld::manifest::{RunManifest, MANIFEST_META_KEYS};
use speckle_mld::metrics::{metrics_csv_row, metrics_report, pearson_lowpass, METRICS_CSV_HEADER};
use speckle_mld::noise::{apply_speckle, log_compress, DEFAULT_LOG_FLOOR};
use speckle_mld::phantom::{default_phantom_spec, generate_phantom, PhantomSpec};
use speckle_mld::solvers::{denoise_mld_gaussian, denoise_mld_gg, denoise_tvl1};
use speckle_mld::sweep::{
    run_sweep_with, standard_grids, GgValues, Objective, ParamGrid, SweepReport,
};
use speckle_mld::{kv, par, GGParams, GaussianParams, Method, Seed, SolverConfig};

const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "speckle-mld",
    version,
    about = "Speckle-aware TV denoising toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render the phantom, apply generalized-gamma speckle and log-compress it.
    Synth(SynthArgs),
    /// Denoise one image.
    Denoise(DenoiseArgs),
    /// Score an image against a reference.
    Metrics(MetricsArgs),
    /// Run a parameter grid and report the best rows.
    Sweep(SweepArgs),
}

#[derive(Args, Clone, Default)]
struct GgArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct SolverArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    grad_eps: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Phantom description (key=value); defaults to the built-in phantom.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the phantom size in pixels.
    #[arg(long)]
    size: Option<usize>,
    #[command(flatten)]
    gg: GgArgs,
    /// Noise seed; drawn at random and recorded when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Floor applied before taking logarithms.
    #[arg(long)]
    log_floor: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// mld_gg, tvl1 or mld_gaussian.
    #[arg(long)]
    method: Option<String>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    gg: GgArgs,
    /// Gaussian noise mean for mld_gaussian.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Also report the low-pass Pearson correlation against this observation.
    #[arg(long)]
    noisy: Option<PathBuf>,
    /// Square the numerator of the edge correlation.
    #[arg(long)]
    literal_eps_e: bool,
    #[arg(long, default_value = "0")]
    frame_id: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    noisy: Option<PathBuf>,
    /// Run the standard MLD grid and the standard TV-L1 grid.
    #[arg(long)]
    standard_grids: bool,
    /// Method for an explicit grid.
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated α values.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    gammas: Option<String>,
    #[arg(long)]
    nus: Option<String>,
    #[arg(long)]
    deltas: Option<String>,
    /// Keep every n-th γ, ν and δ value [default: 1].
    #[arg(long)]
    stride: Option<usize>,
    /// Worker threads; 0 uses every core [default: 0].
    #[arg(long)]
    jobs: Option<usize>,
    /// eps_b, eps_d, eps_e or pearson_lowpass [default: eps_b].
    #[arg(long)]
    objective: Option<String>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    NotConverged,
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<speckle_mld::Error> for Failure {
    fn from(e: speckle_mld::Error) -> Self {
        Failure::Other(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    let res = match cli.cmd {
        Cmd::Synth(a) => cmd_synth(a, &command_line),
        Cmd::Denoise(a) => cmd_denoise(a, &command_line),
        Cmd::Metrics(a) => cmd_metrics(a),
        Cmd::Sweep(a) => cmd_sweep(a, &command_line),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NotConverged) => ExitCode::from(EXIT_NOT_CONVERGED),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Values from a `--config` file, consulted when a flag is absent.
struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    fn load(path: Option<&Path>, allowed: &[&str]) -> std::result::Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Config {
                map: BTreeMap::new(),
            });
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let map = kv::parse(&text)?;
        if let Some(bad) = map
            .keys()
            .find(|k| !allowed.contains(&k.as_str()) && !MANIFEST_META_KEYS.contains(&k.as_str()))
        {
            return Err(Failure::Usage(format!("unknown config key '{bad}'")));
        }
        Ok(Config { map })
    }

    fn get<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> std::result::Result<Option<T>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::Usage(format!("bad value '{v}' for config key '{key}'"))),
        }
    }

    fn or<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> std::result::Result<T, Failure> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, flag: Option<T>, key: &str) -> std::result::Result<T, Failure> {
        self.get(flag, key)?
            .ok_or_else(|| Failure::Usage(format!("--{} is required", key.replace('_', "-"))))
    }
}

const SOLVER_KEYS: [&str; 5] = ["alpha", "beta", "tol", "max_iter", "grad_eps"];
const GG_KEYS: [&str; 3] = ["gamma", "nu", "delta"];

fn resolve_solver(cfg: &Config, a: &SolverArgs) -> std::result::Result<SolverConfig, Failure> {
    let d = SolverConfig::default();
    let s = SolverConfig {
        alpha: cfg.or(a.alpha, "alpha", d.alpha)?,
        beta: cfg.or(a.beta, "beta", d.beta)?,
        tol: cfg.or(a.tol, "tol", d.tol)?,
        max_iter: cfg.or(a.max_iter, "max_iter", d.max_iter)?,
        grad_eps: cfg.or(a.grad_eps, "grad_eps", d.grad_eps)?,
        trace_every: 0,
    };
    s.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(s)
}

fn resolve_gg(
    cfg: &Config,
    a: &GgArgs,
    default: Option<f64>,
) -> std::result::Result<GGParams, Failure> {
    let pick = |flag: Option<f64>, key: &str| -> std::result::Result<f64, Failure> {
        cfg.get(flag, key)?
            .or(default)
            .ok_or_else(|| Failure::Usage(format!("--{key} is required")))
    };
    let p = GGParams::new(
        pick(a.gamma, "gamma")?,
        pick(a.nu, "nu")?,
        pick(a.delta, "delta")?,
    )
    .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(p)
}

fn record_solver(m: &mut RunManifest, s: &SolverConfig) {
    m.param("alpha", s.alpha)
        .param("beta", s.beta)
        .param("tol", s.tol)
        .param("max_iter", s.max_iter)
        .param("grad_eps", s.grad_eps);
}

fn write_manifest(path: &Path, m: &mut RunManifest) -> anyhow::Result<()> {
    m.finish();
    fs::write(path, m.to_kv()).with_context(|| format!("writing {}", path.display()))
}

/// `out.pgm` → `out.pgm.manifest.txt`.
fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.txt");
    PathBuf::from(s)
}

fn parse_method(s: &str) -> std::result::Result<Method, Failure> {
    s.parse()
        .map_err(|e: speckle_mld::Error| Failure::Usage(e.to_string()))
}

fn cmd_synth(a: SynthArgs, command_line: &str) -> CmdResult {
    let mut keys = vec!["spec", "size", "seed", "log_floor"];
    keys.extend(GG_KEYS);
    let cfg = Config::load(a.config.as_deref(), &keys)?;
    let spec_path: Option<PathBuf> = cfg.get(a.spec, "spec")?;
    let mut spec: PhantomSpec = match &spec_path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            PhantomSpec::from_kv(&text)?
        }
        None => default_phantom_spec(),
    };
    if let Some(size) = cfg.get(a.size, "size")? {
        spec = spec.with_size(size);
    }
    spec.validate()?;
    let p = resolve_gg(&cfg, &a.gg, None)?;
    let seed = cfg.get(a.seed, "seed")?.unwrap_or_else(rand::random);
    let floor = cfg.or(a.log_floor, "log_floor", DEFAULT_LOG_FLOOR)?;

    let mut m = RunManifest::start(command_line);
    m.seed = Some(seed);
    if let Some(p) = &spec_path {
        m.param("spec", p.display());
    }
    m.param("size", spec.size)
        .param("gamma", p.gamma())
        .param("nu", p.nu())
        .param("delta", p.delta())
        .param("log_floor", floor);

    let ph = generate_phantom(&spec)?;
    let reference_log = log_compress(&ph.cartesian, floor)?;
    let speckled = apply_speckle(&ph.cartesian, &p, Seed(seed))?;
    let noisy_log = log_compress(&speckled, floor)?;

    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let dir = &a.out_dir;
    write_image(&ph.cartesian, dir.join("reference.pgm"))?;
    write_image(&ph.cartesian, dir.join("reference.pfm"))?;
    write_image(&reference_log, dir.join("reference_log.pfm"))?;
    write_image(&speckled, dir.join("speckled.pfm"))?;
    write_image(&noisy_log, dir.join("noisy_log.pfm"))?;
    write_manifest(&dir.join("manifest.txt"), &mut m)?;
    println!("seed={seed} out_dir={}", dir.display());
    Ok(())
}

fn cmd_denoise(a: DenoiseArgs, command_line: &str) -> CmdResult {
    // results recorded in a manifest are accepted and ignored on replay
    let mut keys = vec!["input", "output", "method", "mu", "iterations", "converged"];
    keys.extend(SOLVER_KEYS);
    keys.extend(GG_KEYS);
    let cfg = Config::load(a.config.as_deref(), &keys)?;
    let input_path: PathBuf = cfg.required(a.input, "input")?;
    let output_path: PathBuf = cfg.required(a.output, "output")?;
    let method_name: String = cfg
        .get(a.method, "method")?
        .ok_or_else(|| Failure::Usage("--method is required".into()))?;
    let method = parse_method(&method_name)?;
    let solver = resolve_solver(&cfg, &a.solver)?;
    let input = read_image(&input_path)?;

    let mut m = RunManifest::start(command_line);
    m.param("input", input_path.display())
        .param("method", method);
    record_solver(&mut m, &solver);
    let res = match method {
        Method::MldGg => {
            let p = resolve_gg(&cfg, &a.gg, None)?;
            m.param("gamma", p.gamma())
                .param("nu", p.nu())
                .param("delta", p.delta());
            denoise_mld_gg(&input, &p, &solver)?
        }
        Method::Tvl1 => denoise_tvl1(&input, &solver)?,
        Method::MldGaussian => {
            let mu = cfg.or(a.mu, "mu", 0.0)?;
            m.param("mu", mu);
            denoise_mld_gaussian(&input, &GaussianParams::new(mu, 1.0)?, &solver)?
        }
    };
    write_image(&res.image, &output_path)?;
    m.param("output", output_path.display())
        .param("iterations", res.iterations)
        .param("converged", res.converged);
    write_manifest(&manifest_path(&output_path), &mut m)?;
    println!(
        "iterations={} energy={:.12e} converged={} final_step={:.6e} diverged={}",
        res.iterations, res.final_energy, res.converged, res.final_step_inf_norm, res.diverged
    );
    if res.converged {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn cmd_metrics(a: MetricsArgs) -> CmdResult {
    let reference = read_image(&a.reference)?;
    let test = read_image(&a.test)?;
    let mut report = metrics_report(&reference, &test, a.literal_eps_e)?;
    if let Some(noisy) = &a.noisy {
        report.pearson_lowpass = Some(pearson_lowpass(&read_image(noisy)?, &test)?);
    }
    println!("{METRICS_CSV_HEADER}");
    println!("{}", metrics_csv_row(&a.frame_id, &report));
    Ok(())
}

fn parse_list(s: &str, name: &str) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad {name} value '{v}'")))
        })
        .collect()
}

fn cmd_sweep(a: SweepArgs, command_line: &str) -> CmdResult {
    let mut keys = vec![
        "reference",
        "noisy",
        "out",
        "standard_grids",
        "method",
        "alphas",
        "gammas",
        "nus",
        "deltas",
        "stride",
        "jobs",
        "objective",
    ];
    keys.extend(SOLVER_KEYS);
    let cfg = Config::load(a.config.as_deref(), &keys)?;
    let reference_path: PathBuf = cfg.required(a.reference.clone(), "reference")?;
    let noisy_path: PathBuf = cfg.required(a.noisy.clone(), "noisy")?;
    let out_path: PathBuf = cfg.required(a.out.clone(), "out")?;
    let standard = a.standard_grids || cfg.or(None, "standard_grids", false)?;
    let stride = cfg.or(a.stride, "stride", 1)?;
    let jobs = cfg.or(a.jobs, "jobs", 0)?;
    let objective: Objective = cfg
        .or(a.objective.clone(), "objective", "eps_b".to_string())?
        .parse()
        .map_err(|e: speckle_mld::Error| Failure::Usage(e.to_string()))?;
    let solver = resolve_solver(&cfg, &a.solver)?;
    let mut lists: Vec<(&str, String)> = Vec::new();

    let grids: Vec<ParamGrid> = if standard {
        let (mld, tv) = standard_grids();
        vec![mld, tv]
    } else {
        let method =
            parse_method(&cfg.get(a.method.clone(), "method")?.ok_or_else(|| {
                Failure::Usage("--method or --standard-grids is required".into())
            })?)?;
        let mut list = |flag: &Option<String>,
                        key: &'static str|
         -> std::result::Result<Option<Vec<f64>>, Failure> {
            let raw: Option<String> = cfg.get(flag.clone(), key)?;
            if let Some(s) = &raw {
                lists.push((key, s.clone()));
            }
            raw.map(|s| parse_list(&s, key)).transpose()
        };
        let alphas = list(&a.alphas, "alphas")?
            .ok_or_else(|| Failure::Usage("--alphas is required".into()))?;
        let grid = match method {
            Method::MldGg => {
                let need = |v: Option<Vec<f64>>, key: &str| {
                    v.ok_or_else(|| Failure::Usage(format!("--{key} is required for mld_gg")))
                };
                let gg = GgValues {
                    gamma: need(list(&a.gammas, "gammas")?, "gammas")?,
                    nu: need(list(&a.nus, "nus")?, "nus")?,
                    delta: need(list(&a.deltas, "deltas")?, "deltas")?,
                };
                ParamGrid::mld_gg(alphas, gg, objective)
            }
            m => ParamGrid::alpha_only(m, alphas, objective),
        };
        vec![grid]
    };
    let grids = grids
        .into_iter()
        .map(|g| {
            g.with_objective(objective)
                .thinned(stride)
                .and_then(|g| g.validate().map(|_| g))
        })
        .collect::<speckle_mld::Result<Vec<_>>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;

    let reference = read_image(&reference_path)?;
    let noisy = read_image(&noisy_path)?;
    let jobs = if jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        jobs
    };

    let mut m = RunManifest::start(command_line);
    m.param("reference", reference_path.display())
        .param("noisy", noisy_path.display())
        .param("out", out_path.display())
        .param("standard_grids", standard)
        .param("stride", stride)
        .param("jobs", jobs)
        .param("objective", objective.name());
    if let Some(method) = grids.first().filter(|_| !standard).map(|g| g.method) {
        m.param("method", method);
    }
    for (k, v) in &lists {
        m.param(k, v);
    }
    record_solver(&mut m, &solver);

    let mut reports: Vec<SweepReport> = Vec::new();
    for grid in &grids {
        let total = grid.len();
        let done = AtomicUsize::new(0);
        let step = (total / 20).max(1);
        let report = par::with_jobs(jobs, || {
            run_sweep_with(&reference, &noisy, grid, &solver, |_| {
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if k.is_multiple_of(step) || k == total {
                    eprintln!("{}: {k}/{total}", grid.method);
                }
            })
        })?;
        reports.push(report);
    }

    let mut csv = String::new();
    let mut offset = 0;
    let mut header_done = false;
    let mut trailers = String::new();
    for r in &reports {
        let text = r.to_csv();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# best:") {
                let (obj, idx) = rest.split_once('=').unwrap_or((rest, "none"));
                let idx = idx
                    .parse::<usize>()
                    .map_or_else(|_| "none".to_string(), |i| (i + offset).to_string());
                trailers.push_str(&format!("# best:{obj}={idx}\n"));
            } else if line.starts_with("method,") {
                if !header_done {
                    csv.push_str(line);
                    csv.push('\n');
                    header_done = true;
                }
            } else {
                csv.push_str(line);
                csv.push('\n');
            }
        }
        offset += r.rows.len();
    }
    csv.push_str(&trailers);
    fs::write(&out_path, &csv).with_context(|| format!("writing {}", out_path.display()))?;
    write_manifest(&manifest_path(&out_path), &mut m)?;

    for r in &reports {
        let method = r.rows.first().map_or("?", |row| row.method.name());
        match r.best_row() {
            Some(b) => println!("best {method} {}: {}", objective.name(), b.csv()),
            None => println!("best {method} {}: none", objective.name()),
        }
    }
    if let Some(r) = reports.iter().find(|r| r.all_diverged()) {
        let method = r.rows.first().map_or("?", |row| row.method.name());
        return Err(Failure::Other(anyhow!("every {method} run diverged")));
    }
    Ok(())
}
