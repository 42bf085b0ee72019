//! Experiment definitions: a JSON config describing grid, initial packet,
//! detector and chain, and the bundle of every route to the arrival-time
//! distribution computed from it.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{run_chain, ChainConfig, ChainRecord};
use crate::detector::{DetectorGeometry, Region};
use crate::distribution::{
    distribution_from_w, flux_law, refinement_for, relative_l1, round_sig, solve_integral_equation_refined, w_from_free_density, Peak,
    TimeDistribution,
};
use crate::error::{Error, Result};
use crate::grid::{mean_velocity, Grid, GridSpec, WaveFunction};
use crate::hermiticity::pseudo_schrodinger_check;
use crate::propagators::{GaussianSpec, PropagatorKind};

pub const SCHEMA_VERSION: u32 = 1;

/// Train offsets used when none are given.
pub const DEFAULT_OFFSETS: [f64; 4] = [80.0, 160.0, 240.0, 320.0];

/// Largest initial probability allowed in or right of the detector.
pub const DETECTOR_OVERLAP_LIMIT: f64 = 1e-10;

/// Fraction of the window, in units of the spreading time, beyond which a
/// run is flagged dispersive.
pub const RIGID_WINDOW: f64 = 0.05;

fn default_offsets() -> Vec<f64> {
    DEFAULT_OFFSETS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Gaussian {
        center: f64,
        width: f64,
        carrier: f64,
    },
    /// `(1/sqrt N) sum_n psi_G(x + a_n)`, with `psi_G` centered at `center`.
    Train {
        #[serde(default = "default_offsets")]
        offsets: Vec<f64>,
        width: f64,
        carrier: f64,
        #[serde(default)]
        center: f64,
    },
    /// Flat amplitude on `[lo, hi]` with raised-cosine edges two cells wide.
    Rectangular {
        lo: f64,
        hi: f64,
        carrier: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub width: f64,
}

fn default_peak_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Peaks below this fraction of the tallest are not tabulated.
    #[serde(default = "default_peak_fraction")]
    pub peak_fraction: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            peak_fraction: default_peak_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub grid: GridSpec,
    pub initial_state: InitialState,
    pub detector: DetectorConfig,
    pub chain: ChainConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    /// Single packet crossing a 20-wide detector with `v dt = 4 dx`.
    pub fn single_gaussian() -> Self {
        let grid = GridSpec::new(-512.0, 512.0, 16384);
        let v = 32.0;
        let dt = 4.0 * grid.dx() / v;
        Self {
            schema_version: SCHEMA_VERSION,
            name: "single_gaussian".into(),
            grid,
            initial_state: InitialState::Gaussian {
                center: -140.0,
                width: 20.0,
                carrier: v,
            },
            detector: DetectorConfig { width: 20.0 },
            chain: ChainConfig::new(dt, 1280),
            output: OutputConfig::default(),
        }
    }

    /// Four-packet train at the default offsets.
    pub fn gaussian_train() -> Self {
        let grid = GridSpec::new(-512.0, 512.0, 8192);
        let v = 16.0;
        let dt = 4.0 * grid.dx() / v;
        Self {
            schema_version: SCHEMA_VERSION,
            name: "gaussian_train".into(),
            grid,
            initial_state: InitialState::Train {
                offsets: default_offsets(),
                width: 10.0,
                carrier: v,
                center: 0.0,
            },
            detector: DetectorConfig { width: 20.0 },
            chain: ChainConfig::new(dt, 768),
            output: OutputConfig::default(),
        }
    }

    /// Packet width, where the initial state has one.
    pub fn packet_width(&self) -> Option<f64> {
        match &self.initial_state {
            InitialState::Gaussian { width, .. } | InitialState::Train { width, .. } => Some(*width),
            InitialState::Rectangular { .. } => None,
        }
    }

    pub fn uses_default_offsets(&self) -> bool {
        matches!(&self.initial_state, InitialState::Train { offsets, .. } if offsets[..] == DEFAULT_OFFSETS[..])
    }
}

/// Everything derived from a validated config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: Grid,
    pub geometry: DetectorGeometry,
    pub initial: WaveFunction,
    pub velocity: f64,
    pub passes_guard: bool,
    /// Window longer than [`RIGID_WINDOW`] spreading times.
    pub dispersive: bool,
}

fn packet(grid: &Grid, center: f64, width: f64, carrier: f64) -> GaussianSpec {
    GaussianSpec {
        center,
        width,
        carrier,
        mass: grid.mass(),
    }
}

fn check_train(offsets: &[f64], width: f64) -> Result<()> {
    if offsets.is_empty() {
        return Err(Error::Config("a train needs at least one offset".into()));
    }
    for &a in offsets {
        if a < 6.0 * width {
            return Err(Error::Config(format!(
                "train offset {a} is closer than 6 widths ({}) to the detector",
                6.0 * width
            )));
        }
    }
    for (i, a) in offsets.iter().enumerate() {
        for b in &offsets[i + 1..] {
            if (a - b).abs() < 8.0 * width {
                return Err(Error::Config(format!(
                    "train offsets {a} and {b} are closer than 8 widths ({})",
                    8.0 * width
                )));
            }
        }
    }
    Ok(())
}

/// Raised-cosine ramp from 0 at `edge - 2dx` to 1 at `edge`.
fn ramp(x: f64, edge: f64, dx: f64) -> f64 {
    let u = (x - (edge - 2.0 * dx)) / (2.0 * dx);
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * u).cos())
    }
}

/// Normalized initial state; configuration problems are reported as
/// [`Error::Config`].
pub fn build_initial_state(cfg: &ScenarioConfig) -> Result<WaveFunction> {
    let grid = Grid::from_spec(cfg.grid)?;
    build_on(&grid, &cfg.initial_state)
}

fn build_on(grid: &Grid, state: &InitialState) -> Result<WaveFunction> {
    let hbar = grid.hbar();
    let psi = match state {
        InitialState::Gaussian { center, width, carrier } => {
            let spec = packet(grid, *center, *width, *carrier);
            spec.validate(grid)?;
            WaveFunction::from_fn(grid, |x| spec.amplitude(x, 0.0, hbar))
        }
        InitialState::Train {
            offsets,
            width,
            carrier,
            center,
        } => {
            check_train(offsets, *width)?;
            let specs: Vec<GaussianSpec> = offsets
                .iter()
                .map(|a| packet(grid, center - a, *width, *carrier))
                .collect();
            for s in &specs {
                s.validate(grid)?;
            }
            let norm = 1.0 / (offsets.len() as f64).sqrt();
            WaveFunction::from_fn(grid, |x| specs.iter().map(|s| s.amplitude(x, 0.0, hbar)).sum::<num_complex::Complex64>() * norm)
        }
        InitialState::Rectangular { lo, hi, carrier } => {
            let dx = grid.dx();
            if !(hi - lo >= 4.0 * dx) {
                return Err(Error::Config(format!("rectangle [{lo}, {hi}] is narrower than four cells")));
            }
            if lo - 2.0 * dx <= grid.x_min() || hi + 2.0 * dx >= grid.x_max() {
                return Err(Error::Config(format!("rectangle [{lo}, {hi}] does not fit on the grid")));
            }
            WaveFunction::from_fn(grid, |x| {
                let a = ramp(x, *lo, dx) * ramp(-x, -hi, dx);
                num_complex::Complex64::from_polar(a, carrier * x)
            })
        }
    };
    psi.normalized()
        .map_err(|e| Error::Config(format!("initial state cannot be normalized: {e}")))
}

/// Validate a config and build the state, geometry and flags it implies.
pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!("unsupported schema_version {}", cfg.schema_version)));
    }
    cfg.chain.validate()?;
    let grid = Grid::from_spec(cfg.grid)?;
    let geometry = DetectorGeometry::new(&grid, cfg.detector.width)?;
    let initial = build_on(&grid, &cfg.initial_state)?;
    let overlap = geometry.mass_in(&initial, Region::Detector) + geometry.mass_in(&initial, Region::Right);
    if overlap > DETECTOR_OVERLAP_LIMIT {
        return Err(Error::Config(format!(
            "initial state puts {overlap:.3e} probability in or beyond the detector (limit {DETECTOR_OVERLAP_LIMIT:.0e})"
        )));
    }
    let velocity = mean_velocity(&initial)?;
    if !(velocity > 0.0) {
        return Err(Error::Config(format!("initial state must move toward the detector (v = {velocity})")));
    }
    cfg.chain.check_guard(velocity, grid.dx())?;
    let dispersive = match cfg.packet_width() {
        Some(w) => cfg.chain.duration() > RIGID_WINDOW * 2.0 * grid.mass() * w * w / grid.hbar(),
        None => true,
    };
    Ok(Prepared {
        passes_guard: cfg.chain.passes_guard(velocity, grid.dx()),
        grid,
        geometry,
        initial,
        velocity,
        dispersive,
    })
}

/// Pairwise comparisons between routes on the shared lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteAgreement {
    /// `max |P_int - P_exp| / max P_exp`, with the integral equation solved
    /// on the refined lattice.
    pub exponential_vs_integral: f64,
    pub exponential_vs_flux_l1: f64,
    pub integral_vs_flux_l1: f64,
    /// Unconditional chain click density against the flux law.
    pub chain_vs_flux_l1: f64,
    /// Chain rate against the free-evolution rate, over samples where the
    /// free left mass is at least `0.1`.
    pub chain_w_vs_free_w_l1: f64,
    /// Chain routes within [`EQUIVALENCE_LIMIT`] of each other and within
    /// [`ROUTE_L1_LIMIT`] of the flux law.
    pub passed: bool,
}

/// Maximum tolerated L1 disagreement between chain and flux routes.
pub const ROUTE_L1_LIMIT: f64 = 0.05;

/// Maximum relative gap between the two formulas fed the same rate.
pub const EQUIVALENCE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainCheck {
    pub n_packets: usize,
    pub expected_times: Vec<f64>,
    pub expected_height: f64,
    pub peaks: Vec<Peak>,
    /// Rigid flux law against `(v/N) sum rho_G(a_n - v t, 0)`.
    pub superposition_l1: f64,
    /// Last over first peak height.
    pub damping_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub velocity: f64,
    pub spreading_time: Option<f64>,
    pub dx: f64,
    pub delta_t: f64,
    pub cells_per_period: f64,
    pub passes_guard: bool,
    pub zeno_study: bool,
    pub dispersive: bool,
    /// Where the train offsets came from: `project_default` or `config`.
    pub offsets_source: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScenarioBundle {
    pub config: ScenarioConfig,
    pub chain: ChainRecord,
    pub exponential: TimeDistribution,
    pub integral: TimeDistribution,
    pub flux: TimeDistribution,
    pub agreement: RouteAgreement,
    pub peaks: Vec<Peak>,
    pub train: Option<TrainCheck>,
    pub metadata: Metadata,
}

fn max_relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let top = a.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / top
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioBundle> {
    let prep = prepare(cfg)?;
    run_prepared(cfg, &prep)
}

pub fn run_prepared(cfg: &ScenarioConfig, prep: &Prepared) -> Result<ScenarioBundle> {
    let chain = run_chain(&prep.initial, &prep.geometry, &cfg.chain)?;
    let times = chain.times.clone();
    let exponential = distribution_from_w(&times, &chain.w)?;
    let integral = solve_integral_equation_refined(&times, &chain.w, refinement_for(times.len()))?;
    let flux = flux_law(&prep.initial, &prep.geometry, &times, &PropagatorKind::SpectralFree)?;

    let free = w_from_free_density(&prep.initial, &prep.geometry, &times)?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (k, (&w, &left)) in free.w.iter().zip(&free.left_mass).enumerate() {
        if k > 0 && left >= 0.1 {
            a.push(chain.w[k]);
            b.push(w);
        }
    }
    let chain_w_vs_free_w_l1 = if b.is_empty() { f64::NAN } else { relative_l1(&a, &b) };

    let exponential_vs_flux_l1 = relative_l1(&exponential.density, &flux.density);
    let integral_vs_flux_l1 = relative_l1(&integral.density, &flux.density);
    let exponential_vs_integral = max_relative_gap(&exponential.density, &integral.density);
    let agreement = RouteAgreement {
        exponential_vs_integral,
        exponential_vs_flux_l1,
        integral_vs_flux_l1,
        chain_vs_flux_l1: relative_l1(&chain.click_density(), &flux.density),
        chain_w_vs_free_w_l1,
        passed: exponential_vs_integral <= EQUIVALENCE_LIMIT
            && exponential_vs_flux_l1 <= ROUTE_L1_LIMIT
            && integral_vs_flux_l1 <= ROUTE_L1_LIMIT,
    };
    let peaks = exponential.peaks(cfg.output.peak_fraction);

    let hbar = prep.grid.hbar();
    let train = match &cfg.initial_state {
        InitialState::Train {
            offsets,
            width,
            carrier,
            center,
        } => Some(train_check(prep, &times, offsets, *width, *carrier, *center, &peaks)?),
        _ => None,
    };
    let spreading_time = cfg
        .packet_width()
        .map(|w| 2.0 * prep.grid.mass() * w * w / hbar);
    let metadata = Metadata {
        velocity: prep.velocity,
        spreading_time,
        dx: prep.grid.dx(),
        delta_t: cfg.chain.delta_t,
        cells_per_period: prep.velocity * cfg.chain.delta_t / prep.grid.dx(),
        passes_guard: prep.passes_guard,
        zeno_study: cfg.chain.zeno_study,
        dispersive: prep.dispersive,
        offsets_source: match &cfg.initial_state {
            InitialState::Train { .. } if cfg.uses_default_offsets() => Some("project_default".into()),
            InitialState::Train { .. } => Some("config".into()),
            _ => None,
        },
    };
    Ok(ScenarioBundle {
        config: cfg.clone(),
        chain,
        exponential,
        integral,
        flux,
        agreement,
        peaks,
        train,
        metadata,
    })
}

fn train_check(
    prep: &Prepared,
    times: &[f64],
    offsets: &[f64],
    width: f64,
    carrier: f64,
    center: f64,
    peaks: &[Peak],
) -> Result<TrainCheck> {
    let grid = &prep.grid;
    let v = prep.velocity;
    let n = offsets.len() as f64;
    let xb = grid.x(prep.geometry.boundary_index());
    let g = packet(grid, center, width, carrier);
    let hbar = grid.hbar();
    let rigid = flux_law(&prep.initial, &prep.geometry, times, &PropagatorKind::RigidTransport { velocity: v })?;
    let formula: Vec<f64> = times
        .iter()
        .map(|&t| v / n * offsets.iter().map(|a| g.density(xb - v * t + a, 0.0, hbar)).sum::<f64>())
        .collect();
    let damping_ratio = match (peaks.first(), peaks.last()) {
        (Some(f), Some(l)) if peaks.len() >= 2 => l.height / f.height,
        _ => f64::NAN,
    };
    Ok(TrainCheck {
        n_packets: offsets.len(),
        expected_times: offsets.iter().map(|a| (a - center) / v).collect(),
        expected_height: v * g.density(center, 0.0, hbar) / n,
        peaks: peaks.to_vec(),
        superposition_l1: relative_l1(&rigid.density, &formula),
        damping_ratio,
    })
}

impl ScenarioBundle {
    pub fn summary(&self) -> Summary {
        let r = round_sig;
        let frac = self.config.output.peak_fraction;
        let a = &self.agreement;
        Summary {
            name: self.config.name.clone(),
            schema_version: SCHEMA_VERSION,
            total_detected: r(self.chain.total_detected()),
            final_survival: r(self.chain.final_survival()),
            terminated_at: self.chain.terminated_at,
            route_agreement: RouteAgreement {
                exponential_vs_integral: r(a.exponential_vs_integral),
                exponential_vs_flux_l1: r(a.exponential_vs_flux_l1),
                integral_vs_flux_l1: r(a.integral_vs_flux_l1),
                chain_vs_flux_l1: r(a.chain_vs_flux_l1),
                chain_w_vs_free_w_l1: r(a.chain_w_vs_free_w_l1),
                passed: a.passed,
            },
            distributions: [&self.exponential, &self.integral, &self.flux]
                .iter()
                .map(|d| d.summary(frac))
                .collect(),
            train: self.train.as_ref().map(|t| TrainCheck {
                n_packets: t.n_packets,
                expected_times: t.expected_times.iter().map(|x| r(*x)).collect(),
                expected_height: r(t.expected_height),
                peaks: t
                    .peaks
                    .iter()
                    .map(|p| Peak {
                        time: r(p.time),
                        height: r(p.height),
                    })
                    .collect(),
                superposition_l1: r(t.superposition_l1),
                damping_ratio: r(t.damping_ratio),
            }),
            metadata: Metadata {
                velocity: r(self.metadata.velocity),
                spreading_time: self.metadata.spreading_time.map(r),
                dx: r(self.metadata.dx),
                delta_t: r(self.metadata.delta_t),
                cells_per_period: r(self.metadata.cells_per_period),
                ..self.metadata.clone()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub schema_version: u32,
    pub total_detected: f64,
    pub final_survival: f64,
    pub terminated_at: Option<usize>,
    pub route_agreement: RouteAgreement,
    pub distributions: Vec<crate::distribution::DistributionSummary>,
    pub train: Option<TrainCheck>,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    DeltaT,
    Dx,
    Sigma0,
}

impl std::str::FromStr for ScanAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta_t" => Ok(ScanAxis::DeltaT),
            "dx" => Ok(ScanAxis::Dx),
            "sigma0" => Ok(ScanAxis::Sigma0),
            _ => Err(Error::Config(format!("unknown scan axis {s:?} (delta_t, dx or sigma0)"))),
        }
    }
}

/// Copy of `cfg` with one parameter changed. The chain window is kept:
/// changing `delta_t` rescales the step count.
pub fn with_axis_value(cfg: &ScenarioConfig, axis: ScanAxis, value: f64) -> Result<ScenarioConfig> {
    let mut out = cfg.clone();
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::Config(format!("scan value must be positive, got {value}")));
    }
    match axis {
        ScanAxis::DeltaT => {
            let window = cfg.chain.duration();
            out.chain.delta_t = value;
            out.chain.n_steps = (window / value).round().max(1.0) as usize;
        }
        ScanAxis::Dx => {
            let n = ((cfg.grid.x_max - cfg.grid.x_min) / value).round() as usize;
            out.grid.n_points = n;
            out.grid.validate()?;
        }
        ScanAxis::Sigma0 => match &mut out.initial_state {
            InitialState::Gaussian { width, .. } | InitialState::Train { width, .. } => *width = value,
            InitialState::Rectangular { .. } => {
                return Err(Error::Config("a rectangular packet has no width to scan".into()))
            }
        },
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub axis: ScanAxis,
    pub value: f64,
    pub dx: f64,
    pub delta_t: f64,
    pub cells_per_period: f64,
    pub passes_guard: bool,
    pub dispersive: bool,
    pub total_detected: f64,
    pub flux_mass: f64,
    pub exponential_vs_flux_l1: f64,
    pub integral_vs_flux_l1: f64,
    pub exponential_vs_integral: f64,
    /// Interior pseudo-Schrodinger residual when the packet center reaches
    /// the detector.
    pub pseudo_schrodinger_residual: f64,
    pub peaks: Vec<Peak>,
}

fn scan_row(base: &ScenarioConfig, axis: ScanAxis, value: f64) -> Result<ScanRow> {
    let cfg = with_axis_value(base, axis, value)?;
    let prep = prepare(&cfg)?;
    let b = run_prepared(&cfg, &prep)?;
    let t_cross = (-prep.initial.mean_position() / prep.velocity).max(0.0);
    let ps = pseudo_schrodinger_check(&prep.initial, &prep.geometry.no_click(), t_cross, None)?;
    let r = round_sig;
    Ok(ScanRow {
        axis,
        value,
        dx: r(prep.grid.dx()),
        delta_t: r(cfg.chain.delta_t),
        cells_per_period: r(b.metadata.cells_per_period),
        passes_guard: prep.passes_guard,
        dispersive: prep.dispersive,
        total_detected: r(b.chain.total_detected()),
        flux_mass: r(b.flux.total_mass),
        exponential_vs_flux_l1: r(b.agreement.exponential_vs_flux_l1),
        integral_vs_flux_l1: r(b.agreement.integral_vs_flux_l1),
        exponential_vs_integral: r(b.agreement.exponential_vs_integral),
        pseudo_schrodinger_residual: r(ps.interior_residual),
        peaks: b
            .peaks
            .iter()
            .map(|p| Peak {
                time: r(p.time),
                height: r(p.height),
            })
            .collect(),
    })
}

/// One scenario per value, run in parallel; rows come back in input order.
pub fn scan(base: &ScenarioConfig, axis: ScanAxis, values: &[f64]) -> Result<Vec<ScanRow>> {
    values.par_iter().map(|&v| scan_row(base, axis, v)).collect()
}
