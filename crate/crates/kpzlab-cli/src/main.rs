//! `kpzlab` command-line front end.
//!
//! Every subcommand reads an optional JSON configuration (`--config`), applies
//! the `--seed` / `--samples` overrides, writes its outputs into `--out`
//! (created if needed) and finishes with a `report.json`. The exit status is 2
//! when a check in the report failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use kpzlab::airy::baik_rains_table;
use kpzlab::asep::{characteristic_site, sample_currents};
use kpzlab::contour::{fredholm_v, place_contours_asep, place_contours_vertex, DeterminantRecord, GFunction};
use kpzlab::harness::{
    asep_fredholm_record, run_degeneration_check, run_identity_check, run_mapping_check,
    run_rescaled_distribution_experiment, run_scaling_experiment, seed_for_time, vertex_observation_point, FREDHOLM_DOUBLING_TOL,
    ExperimentConfig, ModelName, Record, Report, SampleRun, Tolerance,
};
use kpzlab::params::scaling_constants_vertex;
use kpzlab::vertex_model::{exact_fredholm_lhs, exact_height_distribution, sample_heights, BoundarySpec, EXACT_MAX};
use kpzlab::{Cplx, Real};

#[derive(Parser, Debug)]
#[command(name = "kpzlab", version, about = "Stationary ASEP / stochastic six-vertex numerical laboratory")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "kpzlab-out")]
    out: PathBuf,
    /// Samples per time (overrides the configuration).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact q-moment and six-vertex Fredholm identities on small windows.
    IdentityCheck,
    /// Evaluates det(Id + V_ζ) (vertex) or det(Id + A_ζ) (ASEP) at one point.
    FredholmEval,
    /// Tabulates g(c, s), the determinant and F_BR;c(s).
    BaikRainsTable {
        /// First s.
        #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
        s_min: Real,
        /// Last s.
        #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
        s_max: Real,
        /// Step in s.
        #[arg(long, default_value_t = 0.1)]
        s_step: Real,
    },
    /// Samples the six-vertex height.
    SimulateVertex {
        /// Column X (default: characteristic point of each T).
        #[arg(long)]
        x: Option<usize>,
        /// Row Y (default: characteristic point of each T).
        #[arg(long)]
        y: Option<usize>,
    },
    /// Samples the ASEP current.
    SimulateAsep,
    /// Growth exponent of the fluctuations along the characteristic.
    ScalingExperiment,
    /// Rescaled six-vertex heights against Baik–Rains.
    DistributionExperiment,
    /// Six-vertex → ASEP degeneration (two-sample KS).
    DegenerationCheck,
    /// Ferroelectric mapping round trips and stationarity of the entrances.
    MappingCheck,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.samples.is_some() {
        cfg.samples = common.samples;
    }
    Ok(cfg)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn write_samples(dir: &Path, name: &str, runs: &[SampleRun]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let vertex = runs.first().map(|r| r.model == ModelName::Vertex).unwrap_or(true);
    if vertex {
        w.write_record(["seed", "X", "Y", "height"])?;
    } else {
        w.write_record(["seed", "T", "x", "J"])?;
    }
    for run in runs {
        for v in &run.values {
            if vertex {
                w.write_record([run.base_seed.to_string(), run.x.to_string(), run.y.unwrap_or(0).to_string(), v.to_string()])?;
            } else {
                w.write_record([run.base_seed.to_string(), run.t.to_string(), run.x.to_string(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(path)
}

/// Label of a run in the pmf files.
fn run_key(r: &SampleRun) -> String {
    match r.y {
        Some(y) => format!("T={},X={},Y={y}", r.t, r.x),
        None => format!("T={},x={}", r.t, r.x),
    }
}

/// Empirical pmf of each run.
fn empirical_pmfs(runs: &[SampleRun]) -> BTreeMap<String, BTreeMap<i64, Real>> {
    runs.iter()
        .map(|r| {
            let n = r.values.len() as Real;
            let mut pmf = BTreeMap::new();
            for &v in &r.values {
                *pmf.entry(v).or_insert(0.0) += 1.0 / n;
            }
            (run_key(r), pmf)
        })
        .collect()
}

fn moments_records(report: &mut Report, runs: &[SampleRun]) {
    for r in runs {
        let v: Vec<Real> = r.values.iter().map(|&x| x as Real).collect();
        let mut inp = BTreeMap::new();
        inp.insert("T".to_string(), r.t);
        inp.insert("x".to_string(), r.x as Real);
        if let Some(y) = r.y {
            inp.insert("y".to_string(), y as Real);
        }
        inp.insert("samples".to_string(), v.len() as Real);
        report.records.push(Record::measurement("mean", inp.clone(), kpzlab::harness::mean(&v)));
        if v.len() > 1 {
            report.records.push(Record::measurement("variance", inp, kpzlab::harness::variance(&v)));
        }
    }
}

fn fredholm_eval(cfg: &ExperimentConfig) -> Result<(Report, Vec<DeterminantRecord>)> {
    let start = std::time::Instant::now();
    let mut report = Report::new("fredholm-eval", cfg);
    let pw = cfg.p.unwrap_or(1.0);
    let x = cfg.x.unwrap_or(2);
    let t = cfg.times_or(&[3.0])[0];
    let mut dets = Vec::new();
    match cfg.model.unwrap_or(ModelName::Vertex) {
        ModelName::Vertex => {
            let mut c = cfg.clone();
            c.b2 = Some(cfg.b2.unwrap_or(0.3));
            let p = c.vertex_params()?;
            let circles = place_contours_vertex(&p)?;
            if x < 1 || t < 1.0 || t.fract() != 0.0 {
                bail!("the vertex model needs integer x >= 1 and T >= 1");
            }
            let g = GFunction::six_vertex(&p, x as i32, t as i32);
            let det = fredholm_v(&g, pw, &circles, 64, FREDHOLM_DOUBLING_TOL)?;
            let mut inp = BTreeMap::from([("x".to_string(), x as Real), ("t".to_string(), t), ("p".to_string(), pw)]);
            inp.insert("nodes".to_string(), det.nodes as Real);
            if (x as usize) <= EXACT_MAX && (t as usize) <= EXACT_MAX {
                let zeta = Cplx::new(-p.q.powf(pw), 0.0);
                let lhs = exact_fredholm_lhs(&p, x as usize, t as usize, zeta)?;
                report.records.push(Record::compare(
                    "det_vs_exact_observable",
                    inp,
                    det.value.re,
                    lhs.re,
                    Tolerance::Absolute(cfg.tolerance("fredholm", 1e-6)),
                ));
            } else {
                report.records.push(Record::measurement("det", inp, det.value.re));
            }
            dets.push(det);
        }
        ModelName::Asep => {
            let mut c = cfg.clone();
            if c.b.is_none() && c.b1.is_none() {
                c.b1 = Some(0.6);
                c.b2 = Some(cfg.b2.unwrap_or(0.3));
            }
            let p = c.asep_params()?;
            let circles = place_contours_asep(&p)?;
            let det = fredholm_v(&GFunction::asep(&p, x as i32, t), pw, &circles, 64, FREDHOLM_DOUBLING_TOL)?;
            let inp = BTreeMap::from([("x".to_string(), x as Real), ("T".to_string(), t), ("p".to_string(), pw)]);
            report.records.push(Record::measurement("det", inp, det.value.re));
            if let Some(n) = cfg.samples {
                report.records.push(asep_fredholm_record(&p, x, t, pw, n, cfg.seed(), cfg.tolerance("standard_errors", 3.0))?);
            }
            dets.push(det);
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((report, dets))
}

/// Exact height pmfs keyed like the empirical ones (only for windows within [`EXACT_MAX`]).
type ExactPmfs = BTreeMap<String, BTreeMap<i64, Real>>;

fn simulate_vertex(cfg: &ExperimentConfig, x: Option<usize>, y: Option<usize>) -> Result<(Report, Vec<SampleRun>, ExactPmfs)> {
    let start = std::time::Instant::now();
    let mut report = Report::new("simulate-vertex", cfg);
    let p = cfg.vertex_params()?;
    let n = cfg.samples_or(1000);
    let boundary = BoundarySpec::double_bernoulli(p.b1, p.b2);
    let mut runs = Vec::new();
    let mut exact = BTreeMap::new();
    for t in cfg.times_or(&[100.0]) {
        let (xx, yy) = match (x, y) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                let sc = scaling_constants_vertex(&p).context("the characteristic point needs translation-invariant parameters; pass --x and --y")?;
                let (a, b) = vertex_observation_point(&sc, t, cfg.c.unwrap_or(0.0))?;
                (x.unwrap_or(a), y.unwrap_or(b))
            }
        };
        let seed = seed_for_time(cfg.seed(), t);
        let values = sample_heights(&p.rates(), xx, yy, &boundary, seed, n)?;
        let run = SampleRun { model: ModelName::Vertex, t, x: xx as i64, y: Some(yy as i64), base_seed: seed, values };
        if xx <= EXACT_MAX && yy <= EXACT_MAX {
            exact.insert(run_key(&run), exact_height_distribution(&p.rates(), xx, yy, &boundary)?.pmf);
        }
        runs.push(run);
    }
    moments_records(&mut report, &runs);
    if !exact.is_empty() {
        report.records.push(Record::measurement("exact_pmfs_written", BTreeMap::new(), exact.len() as Real));
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((report, runs, exact))
}

fn simulate_asep(cfg: &ExperimentConfig) -> Result<(Report, Vec<SampleRun>)> {
    let start = std::time::Instant::now();
    let mut report = Report::new("simulate-asep", cfg);
    let p = cfg.asep_params()?;
    let n = cfg.samples_or(1000);
    let mut runs = Vec::new();
    for t in cfg.times_or(&[50.0]) {
        let x = cfg.x.unwrap_or_else(|| characteristic_site(&p, t));
        let seed = seed_for_time(cfg.seed(), t);
        let values = sample_currents(&p, x, t, seed, n)?;
        runs.push(SampleRun { model: ModelName::Asep, t, x, y: None, base_seed: seed, values });
    }
    moments_records(&mut report, &runs);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((report, runs))
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let cfg = load_config(&cli.common)?;
    let out = cli.common.out.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    let report = match cli.command {
        Command::IdentityCheck => run_identity_check(&cfg)?,
        Command::FredholmEval => {
            let (report, dets) = fredholm_eval(&cfg)?;
            written.push(write_json(&out, "determinants.json", &dets)?);
            report
        }
        Command::BaikRainsTable { s_min, s_max, s_step } => {
            if !(s_step > 0.0 && s_max >= s_min) {
                bail!("need s_step > 0 and s_max >= s_min");
            }
            let start = std::time::Instant::now();
            let c = cfg.c.unwrap_or(0.0);
            let count = ((s_max - s_min) / s_step + 1e-9).floor() as usize + 1;
            let s: Vec<Real> = (0..count).map(|i| s_min + s_step * i as Real).collect();
            let rows = baik_rains_table(c, &s)?;
            let path = out.join("baik_rains.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["c", "s", "g", "det", "F_BR"])?;
            for r in &rows {
                w.write_record([r.c.to_string(), r.s.to_string(), r.g.to_string(), r.det.to_string(), r.f_br.to_string()])?;
            }
            w.flush()?;
            written.push(path);
            let mut report = Report::new("baik-rains-table", &cfg);
            report.records.push(Record::measurement("rows", BTreeMap::from([("c".to_string(), c)]), rows.len() as Real));
            report.wall_time_s = start.elapsed().as_secs_f64();
            report
        }
        Command::SimulateVertex { x, y } => {
            let (report, runs, exact) = simulate_vertex(&cfg, x, y)?;
            written.push(write_samples(&out, "vertex_samples.csv", &runs)?);
            written.push(write_json(&out, "empirical_pmf.json", &empirical_pmfs(&runs))?);
            if !exact.is_empty() {
                written.push(write_json(&out, "exact_pmf.json", &exact)?);
            }
            report
        }
        Command::SimulateAsep => {
            let (report, runs) = simulate_asep(&cfg)?;
            written.push(write_samples(&out, "asep_samples.csv", &runs)?);
            written.push(write_json(&out, "empirical_pmf.json", &empirical_pmfs(&runs))?);
            report
        }
        Command::ScalingExperiment => {
            let (report, runs) = run_scaling_experiment(&cfg)?;
            let name = if runs.first().map(|r| r.model) == Some(ModelName::Asep) { "asep_samples.csv" } else { "vertex_samples.csv" };
            written.push(write_samples(&out, name, &runs)?);
            report
        }
        Command::DistributionExperiment => {
            let (report, runs) = run_rescaled_distribution_experiment(&cfg)?;
            written.push(write_samples(&out, "vertex_samples.csv", &runs)?);
            report
        }
        Command::DegenerationCheck => {
            let (report, runs) = run_degeneration_check(&cfg)?;
            written.push(write_samples(&out, "vertex_samples.csv", &runs[..1])?);
            written.push(write_samples(&out, "asep_samples.csv", &runs[1..])?);
            report
        }
        Command::MappingCheck => run_mapping_check(&cfg)?,
    };
    written.push(write_json(&out, "report.json", &report)?);
    for rec in report.verdicts() {
        let verdict = if rec.pass == Some(true) { "PASS" } else { "FAIL" };
        let inputs: Vec<String> = rec.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{verdict} {} value={:.6e} [{}]", rec.name, rec.value, inputs.join(", "));
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(report.all_pass())
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
