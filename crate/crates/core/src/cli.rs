//! Command-line front end: `scan-family`, `homoclinics`, `certify`, `plots`.
//!
//! Every artifact starts with `# config_hash: <sha256>` computed from the
//! configuration it depends on. Downstream commands recompute the hash they
//! expect and refuse a cache that does not match.
//!
//! Exit codes: 0 pass, 1 certificate failed, 2 computation incomplete or
//! cache missing, 3 I/O, 64 usage.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dynamics::{energy, hill_region_indicator, State4, SystemParams};
use crate::error::Error;
use crate::flow::{FlowConfig, Propagator};
use crate::manifolds::{
    channel_tangent_spans, homoclinic_pair, monodromy, read_homoclinic_csv, write_homoclinic_csv,
    Branch, HomoclinicRow, ManifoldConfig,
};
use crate::melnikov::{
    grid_evaluate, grid_size, read_samples_csv, theta_grid, verify_sign_cover, write_samples_csv,
    BranchContext, Certificate, MarginFloor, MelnikovSample, QuadratureConfig, Terms,
};
use crate::orbits::{scan_family, Family, ShootingConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Overrides `--out-dir` when set.
pub const OUT_DIR_ENV: &str = "R3BP_OUT_DIR";

pub const FAMILY_FILE: &str = "family.csv";
pub const HOMOCLINIC_FILE: &str = "homoclinics.csv";
pub const SAMPLES_FILE: &str = "melnikov.csv";
pub const CERTIFICATE_FILE: &str = "certificate.json";

#[derive(Debug, Parser)]
#[command(name = "r3bp-diffusion", version, about = "Diffusion hypotheses for the elliptic restricted three-body problem")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Mass ratio of the smaller primary.
    #[arg(long, global = true, default_value_t = 0.0009537)]
    pub mu: f64,
    /// Interval of x* as `lo:hi`.
    #[arg(long, global = true, default_value = "-0.955:-0.945", allow_hyphen_values = true)]
    pub interval: String,
    /// Number of family nodes.
    #[arg(long, global = true, default_value_t = 5)]
    pub nodes: usize,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Continue the Lyapunov family over the interval.
    ScanFamily,
    /// Symmetric homoclinic points and transversality at every node.
    Homoclinics {
        /// Restrict output to one branch (1 or 2).
        #[arg(long)]
        branch: Option<usize>,
    },
    /// Evaluate the Melnikov grid and the sign-cover certificate.
    Certify {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        /// Absolute margin a witness must clear; default is ten times its error.
        #[arg(long)]
        margin_floor: Option<f64>,
        /// Angles per node.
        #[arg(long, default_value_t = 256)]
        angles: usize,
        /// Drop the integrals and keep the boundary terms only.
        #[arg(long)]
        boundary_only: bool,
    },
    /// Plot-ready data files.
    Plots {
        /// Hill region grid at the energy of the middle node.
        #[arg(long)]
        hill: bool,
        /// Orbits of the family.
        #[arg(long)]
        family: bool,
        /// T(x*) and H(q(x*)).
        #[arg(long)]
        periods: bool,
        /// Melnikov curves from the sample cache.
        #[arg(long)]
        melnikov: bool,
        /// Everything above.
        #[arg(long)]
        all: bool,
        /// Hill grid resolution per axis.
        #[arg(long, default_value_t = 301)]
        hill_grid: usize,
        /// Phase of the sample cache to plot.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        tau: f64,
        /// Angles per node of the sample cache.
        #[arg(long, default_value_t = 256)]
        angles: usize,
    },
}

/// The full configuration of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mu: f64,
    pub interval: (f64, f64),
    pub nodes: usize,
    pub angles: usize,
    pub tau: f64,
    pub margin_floor: MarginFloor,
    pub flow: FlowConfig,
    pub shooting: ShootingConfig,
    pub manifold: ManifoldConfig,
    pub quadrature: QuadratureConfig,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_args(common: &CommonArgs) -> Result<Self, Failure> {
        let interval = parse_interval(&common.interval)?;
        if common.nodes == 0 {
            return Err(Failure::usage("--nodes must be at least 1"));
        }
        if !(common.mu > 0.0 && common.mu < 0.5) {
            return Err(Failure::usage("--mu must lie in (0, 1/2)"));
        }
        Ok(Self {
            mu: common.mu,
            interval,
            nodes: common.nodes,
            angles: 256,
            tau: 0.0,
            margin_floor: MarginFloor::default(),
            flow: FlowConfig::default(),
            shooting: ShootingConfig::default(),
            manifold: ManifoldConfig::default(),
            quadrature: QuadratureConfig::default(),
            out_dir: common.out_dir.clone(),
        })
    }

    pub fn propagator(&self) -> Propagator {
        let mut params = SystemParams::default();
        params.mu = self.mu;
        Propagator::new(params, self.flow)
    }

    pub fn family_hash(&self) -> String {
        digest(&(
            "family",
            self.mu,
            self.interval,
            self.nodes,
            &self.flow,
            &self.shooting,
        ))
    }

    pub fn homoclinic_hash(&self) -> String {
        digest(&("homoclinics", self.family_hash(), &self.manifold))
    }

    pub fn melnikov_hash(&self) -> String {
        digest(&(
            "melnikov",
            self.homoclinic_hash(),
            self.angles,
            self.tau,
            &self.quadrature,
        ))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn digest<T: Serialize>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn parse_interval(s: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::usage(format!("interval must be `lo:hi` with lo < hi, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok((lo, hi))
    } else {
        Err(bad())
    }
}

/// An exit code with a message for stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_) => EXIT_USAGE,
            Error::Io(_) => EXIT_IO,
            Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
            _ => EXIT_INCOMPLETE,
        };
        Self::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32, Failure> {
    let mut cfg = RunConfig::from_args(&cli.common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.jobs {
        if n == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::new(EXIT_INCOMPLETE, e.to_string()))?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_failure(&cfg.out_dir, e))?;
    pool.install(|| match &cli.command {
        Command::ScanFamily => cmd_scan_family(&cfg),
        Command::Homoclinics { branch } => cmd_homoclinics(&cfg, *branch),
        Command::Certify {
            tau,
            margin_floor,
            angles,
            boundary_only,
        } => {
            if *angles == 0 {
                return Err(Failure::usage("--angles must be at least 1"));
            }
            if !tau.is_finite() {
                return Err(Failure::usage("--tau must be finite"));
            }
            cfg.tau = *tau;
            cfg.angles = *angles;
            if let Some(m) = margin_floor {
                if !(*m >= 0.0) {
                    return Err(Failure::usage("--margin-floor must be non-negative"));
                }
                cfg.margin_floor = MarginFloor::Absolute(*m);
            }
            if *boundary_only {
                cfg.quadrature.terms = Terms::BoundaryOnly;
            }
            cmd_certify(&cfg)
        }
        Command::Plots {
            hill,
            family,
            periods,
            melnikov,
            all,
            hill_grid,
            tau,
            angles,
        } => {
            cfg.tau = *tau;
            cfg.angles = *angles;
            let sel = PlotSelection {
                hill: *hill || *all,
                family: *family || *all,
                periods: *periods || *all,
                melnikov: *melnikov || *all,
                hill_grid: *hill_grid,
            };
            cmd_plots(&cfg, &sel)
        }
    })
}

/// Writes `body` after the hash header, through a temporary file.
fn write_artifact(
    path: &Path,
    kind: &str,
    hash: &str,
    body: impl FnOnce(&mut dyn Write) -> crate::Result<()>,
) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp");
    let file = fs::File::create(&tmp).map_err(|e| io_failure(&tmp, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# artifact: {kind}").map_err(|e| io_failure(&tmp, e))?;
    writeln!(w, "# config_hash: {hash}").map_err(|e| io_failure(&tmp, e))?;
    body(&mut w)?;
    w.flush().map_err(|e| io_failure(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| io_failure(path, e))
}

/// Reads a cached artifact after checking its hash header.
fn read_artifact(path: &Path, expected: &str) -> Result<String, Failure> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Failure::new(
                EXIT_INCOMPLETE,
                format!("missing cache {}; run the upstream command first", path.display()),
            )
        } else {
            io_failure(path, e)
        }
    })?;
    let found = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# config_hash:"))
        .map(str::trim)
        .unwrap_or("");
    if found != expected {
        return Err(Error::StaleCache {
            path: path.display().to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
        .into());
    }
    Ok(text)
}

pub fn load_family(cfg: &RunConfig) -> Result<Family, Failure> {
    let text = read_artifact(&cfg.path(FAMILY_FILE), &cfg.family_hash())?;
    Ok(Family::read_csv(text.as_bytes(), Some(cfg.interval))?)
}

pub fn load_homoclinics(cfg: &RunConfig) -> Result<Vec<HomoclinicRow>, Failure> {
    let text = read_artifact(&cfg.path(HOMOCLINIC_FILE), &cfg.homoclinic_hash())?;
    Ok(read_homoclinic_csv(text.as_bytes())?)
}

pub fn load_samples(cfg: &RunConfig) -> Result<Vec<MelnikovSample>, Failure> {
    let text = read_artifact(&cfg.path(SAMPLES_FILE), &cfg.melnikov_hash())?;
    Ok(read_samples_csv(text.as_bytes())?)
}

fn cmd_scan_family(cfg: &RunConfig) -> Result<i32, Failure> {
    let prop = cfg.propagator();
    let fam = scan_family(&prop, cfg.interval, cfg.nodes, &cfg.shooting)?;
    write_artifact(&cfg.path(FAMILY_FILE), "family", &cfg.family_hash(), |w| {
        fam.write_csv(w)
    })?;
    eprintln!("wrote {} orbits to {}", fam.len(), cfg.path(FAMILY_FILE).display());
    Ok(EXIT_PASS)
}

/// Rows for one node, both branches; failures become rows with a reason.
fn node_rows(prop: &Propagator, fam: &Family, x: f64, cfg: &ManifoldConfig) -> Vec<HomoclinicRow> {
    let orbit = match fam.orbit_at(x) {
        Some(o) => *o,
        None => {
            return Branch::BOTH
                .iter()
                .map(|&b| HomoclinicRow::failed(x, b, "node missing from family"))
                .collect()
        }
    };
    match homoclinic_pair(prop, &orbit, cfg) {
        Ok((_, hps)) => hps
            .iter()
            .map(|hp| match channel_tangent_spans(prop, hp, fam, cfg) {
                Ok(spans) => HomoclinicRow::new(hp, Some(&spans)),
                Err(e) => {
                    let mut row = HomoclinicRow::new(hp, None);
                    row.status = format!("spans: {e}");
                    row
                }
            })
            .collect(),
        Err(e) => Branch::BOTH
            .iter()
            .map(|&b| HomoclinicRow::failed(x, b, &e.to_string()))
            .collect(),
    }
}

fn cmd_homoclinics(cfg: &RunConfig, branch: Option<usize>) -> Result<i32, Failure> {
    if let Some(b) = branch {
        Branch::from_index(b)?;
    }
    let fam = load_family(cfg)?;
    let prop = cfg.propagator();
    let nodes = fam.nodes();
    let rows: Vec<HomoclinicRow> = nodes
        .par_iter()
        .map(|&x| node_rows(&prop, &fam, x, &cfg.manifold))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .filter(|r| branch.map_or(true, |b| r.branch == b))
        .collect();
    for r in rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("warning: x* = {}, branch {}: {}", r.x_star, r.branch, r.status);
    }
    write_artifact(
        &cfg.path(HOMOCLINIC_FILE),
        "homoclinics",
        &cfg.homoclinic_hash(),
        |w| write_homoclinic_csv(w, &rows),
    )?;
    Ok(EXIT_PASS)
}

#[derive(Serialize)]
struct CertificateFile<'a> {
    schema: u32,
    config_hash: String,
    certificate: &'a Certificate,
}

/// Branch contexts for every node with both branches solved.
fn contexts(cfg: &RunConfig) -> Result<(Vec<BranchContext>, Vec<String>), Failure> {
    let fam = load_family(cfg)?;
    let rows = load_homoclinics(cfg)?;
    let prop = cfg.propagator();
    let mut problems = Vec::new();
    let per_node: Vec<Result<Vec<BranchContext>, String>> = fam
        .orbits
        .par_iter()
        .map(|orbit| {
            let mono = monodromy(&prop, orbit).map_err(|e| e.to_string())?;
            let mut out = Vec::new();
            for b in Branch::BOTH {
                let row = rows
                    .iter()
                    .find(|r| r.x_star == orbit.x_star && r.branch == b.index())
                    .ok_or_else(|| format!("x* = {}: branch {} not cached", orbit.x_star, b.index()))?;
                let hp = row.homoclinic_point().map_err(|e| e.to_string())?;
                out.push(BranchContext::new(&prop, orbit, &mono, &hp).map_err(|e| e.to_string())?);
            }
            Ok(out)
        })
        .collect();
    let mut ctxs = Vec::new();
    for r in per_node {
        match r {
            Ok(c) => ctxs.extend(c),
            Err(e) => problems.push(e),
        }
    }
    Ok((ctxs, problems))
}

fn cmd_certify(cfg: &RunConfig) -> Result<i32, Failure> {
    let (ctxs, problems) = contexts(cfg)?;
    for p in &problems {
        eprintln!("warning: {p}");
    }
    let angles = theta_grid(cfg.angles);
    let samples = grid_evaluate(&ctxs, &angles, cfg.tau, &cfg.quadrature);
    let cert = verify_sign_cover(&samples, cfg.margin_floor);
    let hash = cfg.melnikov_hash();

    write_artifact(&cfg.path(SAMPLES_FILE), "melnikov", &hash, |w| {
        write_samples_csv(&samples, w)
    })?;
    let json = serde_json::to_string_pretty(&CertificateFile {
        schema: 1,
        config_hash: hash,
        certificate: &cert,
    })
    .map_err(Error::from)?;
    let path = cfg.path(CERTIFICATE_FILE);
    fs::write(&path, json + "\n").map_err(|e| io_failure(&path, e))?;
    write_melnikov_plots(cfg, &samples)?;

    let uncovered = cert.nodes.iter().filter(|n| !n.covered()).count();
    eprintln!(
        "{} samples, {} rejected, {} of {} nodes uncovered: {}",
        cert.samples,
        cert.rejected,
        uncovered,
        cert.nodes.len(),
        if cert.pass { "PASS" } else { "FAIL" }
    );
    let expected = cfg.nodes * 2 * grid_size(&angles);
    if !problems.is_empty() || samples.len() < expected || 100 * cert.rejected > cert.samples {
        return Ok(EXIT_INCOMPLETE);
    }
    Ok(if cert.pass { EXIT_PASS } else { EXIT_FAIL })
}

pub struct PlotSelection {
    pub hill: bool,
    pub family: bool,
    pub periods: bool,
    pub melnikov: bool,
    pub hill_grid: usize,
}

fn plot_file(
    cfg: &RunConfig,
    name: &str,
    header: &[&str],
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), Failure> {
    let path = cfg.path(name);
    let file = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        body(&mut w)?;
        w.flush()
    })();
    res.map_err(|e| io_failure(&path, e))
}

/// One file per node, one gnuplot index block per `(i, j)` curve, ordered by
/// the lifted angle.
fn write_melnikov_plots(cfg: &RunConfig, samples: &[MelnikovSample]) -> Result<(), Failure> {
    let mut xs: Vec<f64> = samples.iter().map(|s| s.x_star).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for (k, &x) in xs.iter().enumerate() {
        let name = format!("melnikov-node{k}.dat");
        let head = [
            format!("dS/dtheta at s0(x*, theta), x* = {x}, tau = {}", cfg.tau),
            "blocks (i,j) = (1,1) (1,2) (2,1) (2,2); columns: theta value error".to_string(),
        ];
        let head: Vec<&str> = head.iter().map(String::as_str).collect();
        plot_file(cfg, &name, &head, |w| {
            for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                let mut curve: Vec<&MelnikovSample> = samples
                    .iter()
                    .filter(|s| s.x_star == x && s.i == i && s.j == j && s.accepted())
                    .collect();
                curve.sort_by(|a, b| a.theta.total_cmp(&b.theta));
                writeln!(w, "# i={i} j={j}")?;
                for s in curve {
                    writeln!(w, "{:.12} {:.12e} {:.3e}", s.theta, s.value, s.error)?;
                }
                writeln!(w)?;
                writeln!(w)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn cmd_plots(cfg: &RunConfig, sel: &PlotSelection) -> Result<i32, Failure> {
    if !(sel.hill || sel.family || sel.periods || sel.melnikov) {
        return Ok(EXIT_PASS);
    }
    let fam = load_family(cfg)?;
    let prop = cfg.propagator();
    if sel.hill {
        let n = sel.hill_grid.max(2);
        let mid = 0.5 * (cfg.interval.0 + cfg.interval.1);
        let h = fam.energy_at(mid)?;
        let head = format!("Hill region at H = {h}; columns: x y allowed");
        plot_file(cfg, "hill-region.dat", &[&head], |w| {
            for a in 0..n {
                let x = -1.5 + 3.0 * a as f64 / (n - 1) as f64;
                for b in 0..n {
                    let y = -1.5 + 3.0 * b as f64 / (n - 1) as f64;
                    let inside = hill_region_indicator(x, y, h, &prop.params);
                    writeln!(w, "{x:.6} {y:.6} {}", u8::from(inside))?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
    }
    if sel.family {
        let mut blocks = Vec::new();
        for o in &fam.orbits {
            let traj = prop.trajectory(&o.q(), o.period)?;
            let pts: Vec<State4> = (0..=400)
                .map(|k| traj.state((traj.t_end() * k as f64 / 400.0).min(traj.t_end())).expect("inside run"))
                .collect();
            blocks.push((o.x_star, pts));
        }
        plot_file(cfg, "family-orbits.dat", &["one block per node; columns: x y px py"], |w| {
            for (x, pts) in &blocks {
                writeln!(w, "# x* = {x}")?;
                for s in pts {
                    writeln!(w, "{:.12} {:.12} {:.12} {:.12}", s.x, s.y, s.px, s.py)?;
                }
                writeln!(w)?;
                writeln!(w)?;
            }
            Ok(())
        })?;
    }
    if sel.periods {
        let rows: Vec<(f64, f64, f64, f64)> = fam
            .orbits
            .iter()
            .map(|o| Ok((o.x_star, o.period, energy(&o.q(), &prop.params)?, o.kappa)))
            .collect::<crate::Result<_>>()?;
        plot_file(cfg, "period-energy.dat", &["columns: x_star T H kappa"], |w| {
            for (x, t, h, k) in &rows {
                writeln!(w, "{x:.12} {t:.12} {h:.12} {k:.12}")?;
            }
            Ok(())
        })?;
    }
    if sel.melnikov {
        let samples = load_samples(cfg)?;
        write_melnikov_plots(cfg, &samples)?;
    }
    Ok(EXIT_PASS)
}
