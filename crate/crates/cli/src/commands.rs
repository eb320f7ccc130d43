use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Args;
use log::info;
use roughkit::experiments::{
    counterexample_study, covariance_lemma_suite, endpoint_l2_study, good_sequence_study, linear_scalar_sde, wong_zakai_study, InitialCondition,
};
use roughkit::gaussian::{sample_bm, sample_fbm, FbmMethod};
use roughkit::io::{read_lifted_csv, read_path_csv, write_lifted_csv, write_path_csv};
use roughkit::metrics::{holder_distance, p_variation_distance};
use roughkit::path::dyadic_grid;
use roughkit::rde::SolverManifest;
use roughkit::{solve_ode, solve_rde_level2, Driver, Error, Level, MetricReport, PairSet, RateStudyResult, Result, RngSpec, StudyConfig, VectorFieldSet};

use crate::config::{parse_levels, parse_list, FileConfig};

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

/// Writes to `path`, or to stdout when it is absent or `-`.
fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => Ok(Box::new(BufWriter::new(File::create(p)?))),
        _ => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn open_in(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Usage(format!("cannot open {}: {e}", path.display())))
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Usage(format!("missing --{}", key.replace('_', "-"))))
}

fn driver_from(name: Option<String>, hurst: Option<f64>) -> Result<Driver> {
    match (name.as_deref(), hurst) {
        (None, None) => Ok(Driver::Bm),
        (None | Some("fbm"), Some(h)) => format!("fbm({h})").parse(),
        (Some("fbm"), None) => usage("fbm needs --hurst"),
        (Some(other), None) => other.parse(),
        (Some(other), Some(_)) => usage(format!("--hurst does not apply to driver {other}")),
    }
}

fn level_from(depth: Option<usize>) -> Result<Level> {
    Level::from_depth(depth.unwrap_or(2))
}

/// Seed and stream recorded in a sampled path's comments, if any.
fn rng_from_comments(comments: &[String]) -> (Option<u64>, Option<u64>) {
    let (mut seed, mut stream) = (None, None);
    for c in comments {
        for part in c.split(',') {
            match part.trim().split_once('=') {
                Some(("seed", v)) => seed = v.parse().ok(),
                Some(("stream", v)) => stream = v.parse().ok(),
                _ => {}
            }
        }
    }
    (seed, stream)
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// bm, fbm (with --hurst), or fbm(H)
    #[arg(long)]
    driver: Option<String>,
    #[arg(long)]
    hurst: Option<f64>,
    /// fBm generator: davies_harte or cholesky
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// The grid has 2^fine intervals on [0, 1]
    #[arg(long)]
    fine: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stream: Option<u64>,
    /// Output CSV; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SampleArgs {
    pub const KEYS: &'static [&'static str] = &["driver", "hurst", "method", "dim", "fine", "seed", "stream", "out"];

    pub fn run(self, file: &FileConfig) -> Result<()> {
        let driver = driver_from(file.pick("driver", self.driver)?, file.pick("hurst", self.hurst)?)?;
        let method: FbmMethod = file.pick("method", self.method)?.map_or(Ok(FbmMethod::DaviesHarte), |m: String| m.parse())?;
        let dim = file.pick("dim", self.dim)?.unwrap_or(2);
        let fine = file.pick("fine", self.fine)?.unwrap_or(10);
        if fine > 20 {
            return usage(format!("fine exponent must be at most 20, got {fine}"));
        }
        let spec = RngSpec::new(file.pick("seed", self.seed)?.unwrap_or(0), file.pick("stream", self.stream)?.unwrap_or(0));
        let grid = dyadic_grid(fine);
        let path = match driver {
            Driver::Bm => sample_bm(&grid, dim, &spec)?,
            Driver::Fbm { hurst } => sample_fbm(&grid, dim, hurst, method, &spec)?,
        };
        let mut w = open_out(file.pick("out", self.out)?.as_deref())?;
        write_path_csv(&mut w, &path, &[spec.header(), format!("driver={driver}")])?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct LiftArgs {
    /// Path CSV with columns t,x1..xd
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Truncation level, 2 or 3
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl LiftArgs {
    pub const KEYS: &'static [&'static str] = &["in", "level", "out"];

    pub fn run(self, file: &FileConfig) -> Result<()> {
        let input = required(file.pick("in", self.input)?, "in")?;
        let level = level_from(file.pick("level", self.level)?)?;
        let (path, comments) = read_path_csv(open_in(&input)?)?;
        let lifted = path.signature_lift(level);
        let mut w = open_out(file.pick("out", self.out)?.as_deref())?;
        write_lifted_csv(&mut w, &lifted, &comments)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct MetricArgs {
    /// First lifted CSV
    #[arg(long)]
    x: Option<PathBuf>,
    /// Second lifted CSV, on the same grid
    #[arg(long)]
    y: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    /// all, dyadic or auto
    #[arg(long)]
    pairs: Option<String>,
    /// holder or pvar
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl MetricArgs {
    pub const KEYS: &'static [&'static str] = &["x", "y", "p", "pairs", "kind", "out"];

    pub fn run(self, file: &FileConfig) -> Result<()> {
        let (x, _) = read_lifted_csv(open_in(&required(file.pick("x", self.x)?, "x")?)?)?;
        let (y, _) = read_lifted_csv(open_in(&required(file.pick("y", self.y)?, "y")?)?)?;
        let p = file.pick("p", self.p)?.unwrap_or(2.5);
        let pairs = pairs_from(file.pick("pairs", self.pairs)?)?.unwrap_or_else(|| PairSet::auto(x.len().saturating_sub(1)));
        let mut w = open_out(file.pick("out", self.out)?.as_deref())?;
        match file.pick::<String>("kind", self.kind)?.as_deref().unwrap_or("holder") {
            "holder" => {
                let report = holder_distance(&x, &y, p, pairs)?;
                writeln!(w, "{}", MetricReport::CSV_HEADER)?;
                writeln!(w, "{}", report.csv_row())?;
            }
            "pvar" => {
                let d = p_variation_distance(&x, &y, p)?;
                writeln!(w, "distance")?;
                writeln!(w, "{d:.16e}")?;
            }
            other => return usage(format!("unknown metric {other:?} (expected holder or pvar)")),
        }
        w.flush()?;
        Ok(())
    }
}

fn pairs_from(s: Option<String>) -> Result<Option<PairSet>> {
    match s.as_deref() {
        None | Some("auto") => Ok(None),
        Some(s) => s.parse().map(Some),
    }
}

/// Flags shared by the Monte-Carlo studies.
#[derive(Args, Debug)]
pub struct StudyArgs {
    #[arg(long)]
    driver: Option<String>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    p_prime: Option<f64>,
    /// The fine grid has 2^fine intervals
    #[arg(long)]
    fine: Option<u32>,
    /// Coarse dyadic levels, `3:8` or `2,4,6`
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Exponent of the L^q aggregate
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    /// all, dyadic or auto
    #[arg(long)]
    pairs: Option<String>,
    #[arg(long)]
    method: Option<String>,
    /// Bootstrap resamples for the slope interval; 0 for the t interval
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    substeps: Option<usize>,
    /// Record wall-clock times per level
    #[arg(long)]
    timing: bool,
    /// Output directory for study.csv and study_summary.json
    #[arg(long)]
    out: Option<PathBuf>,
}

const STUDY_KEYS: &[&str] = &[
    "driver", "hurst", "level", "p", "p_prime", "fine", "levels", "replicas", "q", "seed", "dim", "pairs", "method", "bootstrap", "substeps", "timing", "out",
];

impl StudyArgs {
    fn resolve(&self, file: &FileConfig, default_dim: usize) -> Result<StudyConfig> {
        let mut cfg = StudyConfig {
            driver: driver_from(file.pick("driver", self.driver.clone())?, file.pick("hurst", self.hurst)?)?,
            level: level_from(file.pick("level", self.level)?)?,
            dim: file.pick("dim", self.dim)?.unwrap_or(default_dim),
            pairs: pairs_from(file.pick("pairs", self.pairs.clone())?)?,
            timing: file.pick_switch("timing", self.timing)?,
            ..StudyConfig::default()
        };
        macro_rules! take {
            ($field:ident, $key:literal, $flag:expr) => {
                if let Some(v) = file.pick($key, $flag)? {
                    cfg.$field = v;
                }
            };
        }
        take!(p, "p", self.p);
        take!(p_prime, "p_prime", self.p_prime);
        take!(fine_exponent, "fine", self.fine);
        take!(replicas, "replicas", self.replicas);
        take!(q, "q", self.q);
        take!(seed, "seed", self.seed);
        take!(bootstrap, "bootstrap", self.bootstrap);
        take!(substeps, "substeps", self.substeps);
        if let Some(levels) = file.pick::<String>("levels", self.levels.clone())? {
            cfg.levels = parse_levels(&levels)?;
        }
        if let Some(m) = file.pick::<String>("method", self.method.clone())? {
            cfg.fbm_method = m.parse()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, file: &FileConfig) -> Result<PathBuf> {
        Ok(file.pick("out", self.out.clone())?.unwrap_or_else(|| PathBuf::from(".")))
    }
}

/// Writes `study.csv` and `study_summary.json`, prints a one-line summary, and
/// fails the run when the fitted slope is not positive.
fn finish_study(command: &str, result: &RateStudyResult, dir: &Path, started: Instant) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join("study.csv"))?);
    result.write_csv(&mut csv)?;
    csv.flush()?;
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = serde_json::json!({
        "command": command,
        "created_unix": created,
        "elapsed_ms": started.elapsed().as_millis() as u64,
        "threads": rayon::current_num_threads(),
    });
    let mut json = BufWriter::new(File::create(dir.join("study_summary.json"))?);
    result.write_summary(&mut json, meta)?;
    json.flush()?;
    let (lo, hi) = result.slope_ci;
    println!(
        "{} slope={:.6} ci=[{:.6}, {:.6}] replicas={} failed={}",
        result.study,
        result.slope,
        lo,
        hi,
        result.replicas,
        result.failed.len()
    );
    if result.slope.is_nan() || result.slope <= 0.0 {
        return Err(Error::Study(format!("fitted slope {:.6} is not positive", result.slope)));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct GoodSeqArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// defect (joint-lift distance) or endpoint (L² endpoint gap)
    #[arg(long = "study")]
    kind: Option<String>,
}

impl GoodSeqArgs {
    pub fn keys() -> Vec<&'static str> {
        STUDY_KEYS.iter().copied().chain(["study"]).collect()
    }

    pub fn run(self, file: &FileConfig) -> Result<()> {
        let started = Instant::now();
        let cfg = self.study.resolve(file, 2)?;
        let kind = file.pick::<String>("study", self.kind)?.unwrap_or_else(|| "defect".into());
        info!("{kind} study: driver {}, {} replicas, levels {:?}", cfg.driver, cfg.replicas, cfg.levels);
        let result = match kind.as_str() {
            "defect" => good_sequence_study(&cfg)?,
            "endpoint" => endpoint_l2_study(&cfg)?,
            other => return usage(format!("unknown study {other:?} (expected defect or endpoint)")),
        };
        finish_study("good-seq", &result, &self.study.out_dir(file)?, started)
    }
}

#[derive(Args, Debug)]
pub struct CounterexampleArgs {
    #[arg(long)]
    p: Option<f64>,
    /// Cells of the coarsest grid, a power of two
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    halvings: Option<u32>,
    /// Also write the table to this CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CounterexampleArgs {
    pub const KEYS: &'static [&'static str] = &["p", "grid", "halvings", "out"];

    pub fn run(self, file: &FileConfig) -> Result<()> {
        let p = file.pick("p", self.p)?.unwrap_or(2.5);
        let grid = file.pick("grid", self.grid)?.unwrap_or(64);
        let halvings = file.pick("halvings", self.halvings)?.unwrap_or(6);
        let report = counterexample_study(p, grid, halvings)?;
        let mut table = vec!["mesh,zero_defect,zero_floor,loop_defect,loop_floor".to_string()];
        for ((mesh, zero), loops) in report.meshes.iter().zip(&report.zero).zip(&report.loops) {
            table.push(format!(
                "{mesh:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                zero.distance, report.zero_floor, loops.distance, report.loop_floor
            ));
        }
        if let Some(path) = file.pick::<PathBuf>("out", self.out)? {
            let mut w = open_out(Some(&path))?;
            for line in &table {
                writeln!(w, "{line}")?;
            }
            w.flush()?;
        }
        for line in &table {
            println!("{line}");
        }
        if !report.floor_holds() {
            return Err(Error::Study("a defect fell below its floor".into()));
        }
        let min = |v: &[MetricReport]| v.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
        println!(
            "NOT_GOOD_SEQUENCE p={p} zero_min={:.6} zero_floor={:.6} loop_min={:.6} loop_floor={:.6}",
            min(&report.zero),
            report.zero_floor,
            min(&report.loops),
            report.loop_floor
        );
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct WongZakaiArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Drift coefficient of dy = a y dt + σ y ∘ dx
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// A number, or `endpoint` for y₀ = x₁
    #[arg(long)]
    y0: Option<String>,
}

impl WongZakaiArgs {
    pub fn keys() -> Vec<&'static str> {
        STUDY_KEYS.iter().copied().chain(["a", "sigma", "y0"]).collect()
    }

    pub fn run(self, file: &FileConfig) -> Result<()> {
        let started = Instant::now();
        let cfg = self.study.resolve(file, 1)?;
        let a = file.pick("a", self.a)?.unwrap_or(0.5);
        let sigma = file.pick("sigma", self.sigma)?.unwrap_or(1.0);
        let init = match file.pick::<String>("y0", self.y0)?.as_deref() {
            None => InitialCondition::Fixed(vec![1.0]),
            Some("endpoint") => InitialCondition::Endpoint,
            Some(v) => InitialCondition::Fixed(vec![v.parse().map_err(|_| Error::Usage(format!("bad y0 {v:?}")))?]),
        };
        if cfg.dim != 1 {
            return usage(format!("the scalar equation needs --dim 1, got {}", cfg.dim));
        }
        let (vf, exact) = linear_scalar_sde(a, sigma)?;
        info!("wong-zakai: a = {a}, sigma = {sigma}, {init:?}");
        let result = wong_zakai_study(&cfg, &vf, &init, Some(exact.as_ref()))?;
        finish_study("wong-zakai", &result, &self.study.out_dir(file)?, started)
    }
}

#[derive(Args, Debug)]
pub struct LemmasArgs {
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    p_prime: Option<f64>,
    /// Subdivision sizes, comma separated
    #[arg(long)]
    sizes: Option<String>,
    /// JSON report; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

impl LemmasArgs {
    pub const KEYS: &'static [&'static str] = &["hurst", "p_prime", "sizes", "out"];

    pub fn run(self, file: &FileConfig) -> Result<()> {
        let h = file.pick("hurst", self.hurst)?.unwrap_or(0.4);
        let p_prime = file.pick("p_prime", self.p_prime)?.unwrap_or(3.0);
        let sizes: Vec<usize> = match file.pick::<String>("sizes", self.sizes)? {
            Some(s) => parse_list(&s)?,
            None => vec![4, 8, 16, 32, 64, 128, 256],
        };
        let report = covariance_lemma_suite(h, p_prime, &sizes)?;
        let mut w = open_out(file.pick("out", self.out)?.as_deref())?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        if report.violations() > 0 {
            return Err(Error::Study(format!("{} lattice orderings violate the monotonicity inequality", report.violations())));
        }
        if !report.ratio_non_increasing {
            return Err(Error::Study("the double-sum ratio increases with the subdivision size".into()));
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Driver path CSV
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// ode (piecewise-linear driver, RK4) or rough (level-2 lift)
    #[arg(long)]
    scheme: Option<String>,
    /// Drift coefficient a of dy = a y dt + Σ σᵢ y ∘ dxᵢ
    #[arg(long)]
    a: Option<f64>,
    /// One coefficient per driver coordinate, comma separated
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    y0: Option<f64>,
    /// RK4 steps per driver interval
    #[arg(long)]
    substeps: Option<usize>,
    /// Solution CSV; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append a JSON line describing the run to this file
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl SolveArgs {
    pub const KEYS: &'static [&'static str] = &["in", "scheme", "a", "sigma", "y0", "substeps", "out", "manifest"];

    pub fn run(self, file: &FileConfig) -> Result<()> {
        let input = required(file.pick("in", self.input)?, "in")?;
        let (x, comments) = read_path_csv(open_in(&input)?)?;
        let a = file.pick("a", self.a)?.unwrap_or(0.0);
        let sigma: Vec<f64> = match file.pick::<String>("sigma", self.sigma)? {
            Some(s) => parse_list(&s)?,
            None => vec![1.0; x.dim()],
        };
        if sigma.len() != x.dim() {
            return usage(format!("--sigma has {} entries for a {}-dimensional driver", sigma.len(), x.dim()));
        }
        let y0 = [file.pick("y0", self.y0)?.unwrap_or(1.0)];
        let substeps = file.pick("substeps", self.substeps)?.unwrap_or(1);
        let vf = VectorFieldSet::linear(1, Some(vec![a]), sigma.iter().map(|&s| vec![s]).collect())?;
        let scheme = file.pick::<String>("scheme", self.scheme)?.unwrap_or_else(|| "rough".into());
        let solution = match scheme.as_str() {
            "ode" => solve_ode(&vf, &y0, &x, substeps)?,
            "rough" => solve_rde_level2(&vf, &y0, &x.signature_lift(Level::Two))?,
            other => return usage(format!("unknown scheme {other:?} (expected ode or rough)")),
        };
        let mut w = open_out(file.pick("out", self.out)?.as_deref())?;
        write_path_csv(&mut w, &solution.y, &[format!("scheme={scheme}")])?;
        w.flush()?;
        if let Some(path) = file.pick::<PathBuf>("manifest", self.manifest)? {
            let (seed, stream) = rng_from_comments(&comments);
            let mesh = x.times().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
            let substeps = if scheme == "ode" { substeps } else { 1 };
            let manifest = SolverManifest { scheme, mesh, substeps, seed, stream };
            let mut m = fs::OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(m, "{}", manifest.to_json_line())?;
        }
        Ok(())
    }
}
