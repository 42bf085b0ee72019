//! Command-line front end: `run`, `scan`, `lab` and `validate`.
//!
//! Exit status is 0 on success, 2 for configuration problems (including a
//! measurement period below the guard without `--zeno-study`) and 3 for
//! numerical failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lab::{hermiticity_lab, identities_lab, wigner_lab, Lab};
use crate::scenario::{prepare, run_prepared, scan, ScanAxis, ScanRow, ScenarioBundle, ScenarioConfig};

macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "arrival", version, about = "Arrival-time distributions from repeated no-click measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunFlags {
    /// Output directory (default: out/<config name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow measurement periods below the guard.
    #[arg(long)]
    zeno_study: bool,
    /// Write the normalized no-click states to snapshots.csv.
    #[arg(long)]
    record_snapshots: bool,
    /// Also write whitespace-separated .dat files with commented headers.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its series, summary and manifest.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a scenario once per value of one parameter.
    Scan {
        config: PathBuf,
        /// delta_t, dx or sigma0.
        #[arg(long)]
        axis: ScanAxis,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a fixed numerical experiment: hermiticity, identities or wigner.
    Lab {
        which: Lab,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(long)]
        zeno_study: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardFlags {
    pub guard_passed: bool,
    pub zeno_study: bool,
    pub dispersive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the effective config as written to `config.json`.
    pub config_hash: Option<String>,
    pub code_version: String,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub guard: Option<GuardFlags>,
}

/// Collects artifacts for one output directory.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    /// Use `dir`, creating it if needed. An existing directory must be empty
    /// or hold only the files listed by a previous manifest, which are
    /// replaced.
    fn open(dir: &Path) -> Result<Self> {
        if dir.exists() {
            if !dir.is_dir() {
                return Err(Error::Config(format!("{} is not a directory", dir.display())));
            }
            let manifest = dir.join(MANIFEST);
            if manifest.exists() {
                let old: RunManifest = serde_json::from_str(&fs::read_to_string(&manifest)?)
                    .map_err(|e| Error::Config(format!("unreadable manifest in {}: {e}", dir.display())))?;
                for f in &old.files {
                    let p = dir.join(f);
                    if p.is_file() {
                        fs::remove_file(p)?;
                    }
                }
            }
            if let Some(entry) = fs::read_dir(dir)?.next() {
                return Err(Error::Config(format!(
                    "output directory {} holds {} which no manifest lists",
                    dir.display(),
                    entry?.file_name().to_string_lossy()
                )));
            }
        } else {
            fs::create_dir_all(dir)?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest> {
        self.files.push(MANIFEST.to_string());
        self.files.sort();
        manifest.files = self.files;
        fs::write(self.dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest)
    }
}

fn config_hash(json: &str) -> String {
    hex::encode(Sha256::digest(json.as_bytes()))
}

fn load(path: &Path, flags: Option<&RunFlags>, zeno: bool) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    if zeno {
        cfg.chain.zeno_study = true;
    }
    if let Some(f) = flags {
        if f.record_snapshots {
            cfg.chain.record_snapshots = true;
        }
    }
    Ok(cfg)
}

fn out_dir(flags: &RunFlags, cfg: &ScenarioConfig) -> PathBuf {
    flags.out.clone().unwrap_or_else(|| Path::new("out").join(&cfg.name))
}

fn distributions_dat(b: &ScenarioBundle) -> String {
    let mut s = String::from("# t chain_exponential integral_equation flux_law\n");
    for k in 0..b.exponential.len() {
        let _ = writeln!(
            s,
            "{:.16e} {:.16e} {:.16e} {:.16e}",
            b.exponential.times[k], b.exponential.density[k], b.integral.density[k], b.flux.density[k]
        );
    }
    s
}

fn chain_dat(b: &ScenarioBundle) -> String {
    let c = &b.chain;
    let mut s = String::from("# t survival w p\n");
    for k in 0..c.len() {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e} {:.16e}", c.times[k], c.survival[k], c.w[k], c.p[k]);
    }
    s
}

fn snapshots_csv(b: &ScenarioBundle) -> String {
    let mut s = String::from("t,x,re,im\n");
    for psi in &b.chain.snapshots {
        let g = psi.grid();
        for (j, z) in psi.amplitudes().iter().enumerate() {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", psi.time(), g.x(j), z.re, z.im);
        }
    }
    s
}

fn cmd_run(config: &Path, flags: &RunFlags) -> Result<()> {
    let start = Instant::now();
    let cfg = load(config, Some(flags), flags.zeno_study)?;
    let prep = prepare(&cfg)?;
    let bundle = run_prepared(&cfg, &prep)?;
    let dir = out_dir(flags, &cfg);
    let mut art = Artifacts::open(&dir)?;
    let cfg_json = cfg.to_json() + "\n";
    art.write("config.json", &cfg_json)?;
    art.write("chain.csv", &bundle.chain.to_csv())?;
    art.write("chain_exponential.csv", &bundle.exponential.to_csv())?;
    art.write("integral_equation.csv", &bundle.integral.to_csv())?;
    art.write("flux_law.csv", &bundle.flux.to_csv())?;
    let summary = bundle.summary();
    art.write("summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    if cfg.chain.record_snapshots {
        art.write("snapshots.csv", &snapshots_csv(&bundle))?;
    }
    if flags.gnuplot {
        art.write("chain.dat", &chain_dat(&bundle))?;
        art.write("distributions.dat", &distributions_dat(&bundle))?;
    }
    let manifest = art.finish(RunManifest {
        command: "run".into(),
        config_hash: Some(config_hash(&cfg_json)),
        code_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: Vec::new(),
        guard: Some(GuardFlags {
            guard_passed: prep.passes_guard,
            zeno_study: cfg.chain.zeno_study,
            dispersive: prep.dispersive,
        }),
    })?;
    let a = &summary.route_agreement;
    say!(
        "{}: detected {:.6}, survival {:.3e}, L1 exp/flux {:.4}, int/flux {:.4}, routes {}",
        cfg.name,
        summary.total_detected,
        summary.final_survival,
        a.exponential_vs_flux_l1,
        a.integral_vs_flux_l1,
        if a.passed { "agree" } else { "DISAGREE" }
    );
    for p in &summary.distributions[0].peaks {
        say!("  peak t = {:.6}  height = {:.6}", p.time, p.height);
    }
    if !prep.passes_guard {
        eprintln!("warning: measurement period is below the guard (zeno study)");
    }
    say!("wrote {} files to {}", manifest.files.len(), dir.display());
    Ok(())
}

const SCAN_HEADER: &str = "axis,value,dx,delta_t,cells_per_period,passes_guard,dispersive,total_detected,flux_mass,\
exponential_vs_flux_l1,integral_vs_flux_l1,exponential_vs_integral,pseudo_schrodinger_residual,n_peaks";

fn axis_label(a: ScanAxis) -> &'static str {
    match a {
        ScanAxis::DeltaT => "delta_t",
        ScanAxis::Dx => "dx",
        ScanAxis::Sigma0 => "sigma0",
    }
}

fn scan_csv(rows: &[ScanRow], sep: &str) -> String {
    let mut s = String::new();
    for r in rows {
        let cols = [
            axis_label(r.axis).to_string(),
            format!("{:.16e}", r.value),
            format!("{:.16e}", r.dx),
            format!("{:.16e}", r.delta_t),
            format!("{:.16e}", r.cells_per_period),
            u8::from(r.passes_guard).to_string(),
            u8::from(r.dispersive).to_string(),
            format!("{:.16e}", r.total_detected),
            format!("{:.16e}", r.flux_mass),
            format!("{:.16e}", r.exponential_vs_flux_l1),
            format!("{:.16e}", r.integral_vs_flux_l1),
            format!("{:.16e}", r.exponential_vs_integral),
            format!("{:.16e}", r.pseudo_schrodinger_residual),
            r.peaks.len().to_string(),
        ];
        s.push_str(&cols.join(sep));
        s.push('\n');
    }
    s
}

fn cmd_scan(config: &Path, axis: ScanAxis, values: &[f64], flags: &RunFlags) -> Result<()> {
    let start = Instant::now();
    let cfg = load(config, Some(flags), flags.zeno_study)?;
    let rows = scan(&cfg, axis, values)?;
    let dir = flags
        .out
        .clone()
        .unwrap_or_else(|| Path::new("out").join(format!("{}_scan_{}", cfg.name, axis_label(axis))));
    let mut art = Artifacts::open(&dir)?;
    let cfg_json = cfg.to_json() + "\n";
    art.write("config.json", &cfg_json)?;
    art.write("scan.csv", &format!("{SCAN_HEADER}\n{}", scan_csv(&rows, ",")))?;
    art.write("scan.json", &(serde_json::to_string_pretty(&rows)? + "\n"))?;
    if flags.gnuplot {
        let header = SCAN_HEADER.replace(',', " ");
        art.write("scan.dat", &format!("# {header}\n{}", scan_csv(&rows, " ")))?;
    }
    art.finish(RunManifest {
        command: format!("scan {}", axis_label(axis)),
        config_hash: Some(config_hash(&cfg_json)),
        code_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: Vec::new(),
        guard: Some(GuardFlags {
            guard_passed: rows.iter().all(|r| r.passes_guard),
            zeno_study: cfg.chain.zeno_study,
            dispersive: rows.iter().any(|r| r.dispersive),
        }),
    })?;
    say!(
        "{:>14} {:>10} {:>12} {:>12} {:>12} {:>12} {:>6}",
        axis_label(axis),
        "v dt/dx",
        "detected",
        "L1 exp/flux",
        "L1 int/flux",
        "pseudo-S",
        "peaks"
    );
    for r in &rows {
        say!(
            "{:>14.6e} {:>10.4} {:>12.6} {:>12.4e} {:>12.4e} {:>12.4e} {:>6}",
            r.value,
            r.cells_per_period,
            r.total_detected,
            r.exponential_vs_flux_l1,
            r.integral_vs_flux_l1,
            r.pseudo_schrodinger_residual,
            r.peaks.len()
        );
    }
    say!("wrote scan to {}", dir.display());
    Ok(())
}

fn cmd_lab(which: Lab, out: Option<&Path>) -> Result<()> {
    let start = Instant::now();
    let (name, json, passed) = match which {
        Lab::Hermiticity => {
            let r = hermiticity_lab()?;
            ("hermiticity", serde_json::to_string_pretty(&r)?, r.passed)
        }
        Lab::Identities => {
            let r = identities_lab()?;
            ("identities", serde_json::to_string_pretty(&r)?, r.passed)
        }
        Lab::Wigner => {
            let r = wigner_lab()?;
            ("wigner", serde_json::to_string_pretty(&r)?, r.passed)
        }
    };
    say!("{json}");
    if let Some(dir) = out {
        let mut art = Artifacts::open(dir)?;
        art.write(&format!("lab_{name}.json"), &(json + "\n"))?;
        art.finish(RunManifest {
            command: format!("lab {name}"),
            config_hash: None,
            code_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_seconds: start.elapsed().as_secs_f64(),
            files: Vec::new(),
            guard: None,
        })?;
    }
    if passed {
        Ok(())
    } else {
        Err(Error::Accuracy(format!("lab {name} failed its checks")))
    }
}

fn cmd_validate(config: &Path, zeno: bool) -> Result<()> {
    let cfg = load(config, None, zeno)?;
    let prep = prepare(&cfg)?;
    say!(
        "{}: ok ({} points, dx {}, v {:.6}, v dt / dx {:.4}{}{})",
        cfg.name,
        prep.grid.len(),
        prep.grid.dx(),
        prep.velocity,
        prep.velocity * cfg.chain.delta_t / prep.grid.dx(),
        if prep.passes_guard { "" } else { ", below guard" },
        if prep.dispersive { ", dispersive" } else { "" }
    );
    Ok(())
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        2
    } else {
        3
    }
}

/// Parse `args` (program name first), dispatch, and return the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Run { config, flags } => cmd_run(config, flags),
        Command::Scan {
            config,
            axis,
            values,
            flags,
        } => cmd_scan(config, *axis, values, flags),
        Command::Lab { which, out } => cmd_lab(*which, out.as_deref()),
        Command::Validate { config, zeno_study } => cmd_validate(config, *zeno_study),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
