//! Free time evolution.
//!
//! The Hamiltonian is purely kinetic, so one spectral step multiplies each
//! momentum amplitude by `exp(-i hbar k^2 dt / 2m)` and is exact on the
//! periodic lattice. The closed-form Gaussian and the rigid-transport shift
//! serve as references for it.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{edge_mass, DensityMatrix, Grid, WaveFunction, LEAKAGE_LIMIT};

/// Gaussian packet `(2 pi s^2)^(-1/4) exp(-(x-x0)^2 / 4s^2 + i k0 (x-x0))`.
/// `width` is the standard deviation of the position density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub center: f64,
    pub width: f64,
    pub carrier: f64,
    #[serde(default = "unit_mass")]
    pub mass: f64,
}

fn unit_mass() -> f64 {
    1.0
}

impl GaussianSpec {
    pub fn new(center: f64, width: f64, carrier: f64) -> Self {
        Self {
            center,
            width,
            carrier,
            mass: 1.0,
        }
    }

    /// Spreading time `2 m s0^2 / hbar`.
    pub fn tau(&self, hbar: f64) -> f64 {
        2.0 * self.mass * self.width * self.width / hbar
    }

    pub fn velocity(&self, hbar: f64) -> f64 {
        hbar * self.carrier / self.mass
    }

    pub fn width_at(&self, t: f64, hbar: f64) -> f64 {
        let r = t / self.tau(hbar);
        self.width * (1.0 + r * r).sqrt()
    }

    pub fn center_at(&self, t: f64, hbar: f64) -> f64 {
        self.center + self.velocity(hbar) * t
    }

    /// Width positive and the packet at least six widths from either edge.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::Config(format!("packet width must be positive, got {}", self.width)));
        }
        if !(self.mass > 0.0) {
            return Err(Error::Config(format!("packet mass must be positive, got {}", self.mass)));
        }
        let margin = 6.0 * self.width;
        if self.center - grid.x_min() <= margin || grid.x_max() - self.center <= margin {
            return Err(Error::Config(format!(
                "packet at {} with width {} is within six widths of the grid edge",
                self.center, self.width
            )));
        }
        Ok(())
    }

    /// Value of the freely evolved packet at `(x, t)`.
    pub fn amplitude(&self, x: f64, t: f64, hbar: f64) -> C64 {
        let s2 = self.width * self.width;
        let spread = C64::new(1.0, t / self.tau(hbar));
        let prefactor = (2.0 * std::f64::consts::PI * s2).powf(-0.25) / spread.sqrt();
        let y = x - self.center;
        let shifted = y - self.velocity(hbar) * t;
        let envelope = -shifted * shifted / (4.0 * s2 * spread);
        let phase = C64::new(
            0.0,
            self.carrier * y - hbar * self.carrier * self.carrier * t / (2.0 * self.mass),
        );
        prefactor * (envelope + phase).exp()
    }

    /// Position density of the freely evolved packet.
    pub fn density(&self, x: f64, t: f64, hbar: f64) -> f64 {
        let s = self.width_at(t, hbar);
        let y = x - self.center_at(t, hbar);
        (-(y * y) / (2.0 * s * s)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * s)
    }
}

/// How a density is carried forward in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PropagatorKind {
    SpectralFree,
    AnalyticGaussian(GaussianSpec),
    /// Shape-preserving shift at the Ehrenfest velocity of the initial state.
    RigidTransport { velocity: f64 },
}

/// Phase factors `exp(-i hbar k^2 dt / 2m)` in FFT order.
pub fn free_phases(grid: &Grid, dt: f64) -> Vec<C64> {
    let c = grid.hbar() * dt / (2.0 * grid.mass());
    grid.wavenumbers()
        .iter()
        .map(|&k| C64::from_polar(1.0, -c * k * k))
        .collect()
}

/// Reusable free step of fixed length.
#[derive(Debug, Clone)]
pub struct FreePropagator {
    grid: Grid,
    dt: f64,
    phases: Vec<C64>,
}

impl FreePropagator {
    pub fn new(grid: &Grid, dt: f64) -> Result<Self> {
        if !dt.is_finite() {
            return Err(Error::InvalidState(format!("non-finite time step {dt}")));
        }
        Ok(Self {
            grid: grid.clone(),
            dt,
            phases: free_phases(grid, dt),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, amps: &mut [C64]) {
        self.grid.forward(amps);
        amps.iter_mut().zip(&self.phases).for_each(|(z, p)| *z *= p);
        self.grid.inverse(amps);
    }

    pub fn step(&self, psi: &mut WaveFunction) -> Result<()> {
        self.grid.ensure_same(psi.grid())?;
        self.apply(psi.amplitudes_mut());
        let t = psi.time() + self.dt;
        psi.set_time(t);
        Ok(())
    }

    /// `rho -> U rho U^dagger`.
    pub fn step_mixed(&self, rho: &mut DensityMatrix) -> Result<()> {
        self.grid.ensure_same(rho.grid())?;
        let m = rho.elements_mut();
        for _ in 0..2 {
            for j in 0..m.ncols() {
                let mut col = m.column_mut(j);
                self.apply(col.as_mut_slice());
            }
            m.adjoint_mut();
        }
        let t = rho.time() + self.dt;
        rho.set_time(t);
        Ok(())
    }
}

/// Exact free evolution by `dt`. Negative `dt` runs backwards.
pub fn step_free(psi: &WaveFunction, dt: f64) -> Result<WaveFunction> {
    let prop = FreePropagator::new(psi.grid(), dt)?;
    let mut out = psi.clone();
    prop.step(&mut out)?;
    Ok(out)
}

/// Closed-form free Gaussian at time `t`, sampled on `grid`.
pub fn analytic_gaussian(grid: &Grid, spec: &GaussianSpec, t: f64) -> Result<WaveFunction> {
    if (spec.mass - grid.mass()).abs() > 1e-12 * grid.mass() {
        return Err(Error::InvalidState(format!(
            "packet mass {} differs from grid mass {}",
            spec.mass,
            grid.mass()
        )));
    }
    spec.validate_width()?;
    let hbar = grid.hbar();
    let psi = WaveFunction::from_fn(grid, |x| spec.amplitude(x, t, hbar)).with_time(t);
    let deficit = (1.0 - psi.norm_sq()).abs();
    let edge = psi.edge_mass();
    if deficit > LEAKAGE_LIMIT || edge > LEAKAGE_LIMIT {
        return Err(Error::Leakage {
            mass: deficit.max(edge),
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(psi)
}

impl GaussianSpec {
    fn validate_width(&self) -> Result<()> {
        if self.width > 0.0 && self.width.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState(format!("packet width must be positive, got {}", self.width)))
        }
    }
}

/// Band-limited shift of a sampled density by `v t`.
pub fn rigid_density(grid: &Grid, rho0: &[f64], v: f64, t: f64) -> Result<Vec<f64>> {
    if rho0.len() != grid.len() {
        return Err(Error::InvalidState(format!(
            "{} samples for a {}-point grid",
            rho0.len(),
            grid.len()
        )));
    }
    if !(v > 0.0) {
        return Err(Error::InvalidState(format!("rigid transport needs v > 0, got {v}")));
    }
    let shift = v * t;
    let mut buf: Vec<C64> = rho0.iter().map(|&r| C64::from(r)).collect();
    let kn = -grid.k_nyquist();
    grid.apply_spectral(&mut buf, |k| {
        if k == kn {
            C64::from((k * shift).cos())
        } else {
            C64::from_polar(1.0, -k * shift)
        }
    });
    let out: Vec<f64> = buf.iter().map(|z| z.re).collect();
    let total: f64 = rho0.iter().sum::<f64>() * grid.dx();
    let edge = edge_mass(grid, &out);
    if shift.abs() >= grid.length() || edge > LEAKAGE_LIMIT * total.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Leakage {
            mass: edge,
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(out)
}

/// Density at time `t` starting from `psi0`, under the chosen propagator.
pub fn density_at(kind: &PropagatorKind, psi0: &WaveFunction, t: f64) -> Result<Vec<f64>> {
    match kind {
        PropagatorKind::SpectralFree => {
            let psi = step_free(psi0, t)?;
            psi.check_leakage(LEAKAGE_LIMIT)?;
            Ok(psi.density())
        }
        PropagatorKind::AnalyticGaussian(spec) => Ok(analytic_gaussian(psi0.grid(), spec, t)?.density()),
        PropagatorKind::RigidTransport { velocity } => {
            rigid_density(psi0.grid(), &psi0.density(), *velocity, t)
        }
    }
}
