//! Uniform periodic lattice, its discrete-Fourier dual, and the complex
//! fields (pure and mixed states) that live on it.
//!
//! Conventions: cell `j` sits at `x_min + j*dx`, the wavenumber lattice is in
//! FFT order, and every integral is a plain sum times `dx`. The domain is
//! periodic, so anything that reaches the edge band wraps around; see
//! [`WaveFunction::check_leakage`].

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest grid for which dense `n x n` objects are built.
pub const DENSE_LIMIT: usize = 1024;

/// Wrap-around budget: probability allowed in the edge band.
pub const LEAKAGE_LIMIT: f64 = 1e-6;

const MIN_POINTS: usize = 16;

fn one() -> f64 {
    1.0
}

/// Serializable lattice parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "one")]
    pub hbar: f64,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Self {
        Self {
            x_min,
            x_max,
            n_points,
            mass: 1.0,
            hbar: 1.0,
        }
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_points;
        if n < MIN_POINTS || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n} must be a power of two and at least {MIN_POINTS}"
            )));
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite()) || self.x_max <= self.x_min {
            return Err(Error::InvalidGrid(format!(
                "need x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidGrid(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidGrid(format!("hbar must be positive, got {}", self.hbar)));
        }
        Ok(())
    }
}

struct Inner {
    spec: GridSpec,
    dx: f64,
    k: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Cheap-to-clone handle to a lattice and its FFT plans.
#[derive(Clone)]
pub struct Grid(Arc<Inner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("x_min", &self.0.spec.x_min)
            .field("x_max", &self.0.spec.x_max)
            .field("n_points", &self.0.spec.n_points)
            .field("mass", &self.0.spec.mass)
            .field("hbar", &self.0.spec.hbar)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.spec == other.0.spec
    }
}

impl Grid {
    /// Grid in units with `m = hbar = 1`.
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        Self::from_spec(GridSpec::new(x_min, x_max, n_points))
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_points;
        let dx = spec.dx();
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * dx);
        let k = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as isize } else { j as isize - n as isize };
                m as f64 * dk
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Grid(Arc::new(Inner {
            spec,
            dx,
            k,
            fwd,
            inv,
        })))
    }

    pub fn spec(&self) -> GridSpec {
        self.0.spec
    }
    pub fn len(&self) -> usize {
        self.0.spec.n_points
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn x_min(&self) -> f64 {
        self.0.spec.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.0.spec.x_max
    }
    pub fn dx(&self) -> f64 {
        self.0.dx
    }
    pub fn mass(&self) -> f64 {
        self.0.spec.mass
    }
    pub fn hbar(&self) -> f64 {
        self.0.spec.hbar
    }
    pub fn length(&self) -> f64 {
        self.x_max() - self.x_min()
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min() + j as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    /// Wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.0.k
    }

    pub fn k_nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }

    /// Width of the wrap-around monitor band, in cells, on each side.
    pub fn edge_band(&self) -> usize {
        (self.len() / 32).max(1)
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Unnormalized forward DFT in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.0.fwd.process(data);
    }

    /// Inverse DFT in place, including the `1/n` factor.
    pub fn inverse(&self, data: &mut [C64]) {
        self.0.inv.process(data);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// Multiply the spectrum of `data` by `f(k)` and transform back.
    pub fn apply_spectral(&self, data: &mut [C64], f: impl Fn(f64) -> C64) {
        self.forward(data);
        for (z, &k) in data.iter_mut().zip(self.wavenumbers()) {
            *z *= f(k);
        }
        self.inverse(data);
    }

    /// Spectral derivative of order 1 or 2. The Nyquist mode is dropped for
    /// odd orders so real input stays real.
    pub fn derivative(&self, data: &[C64], order: u32) -> Vec<C64> {
        let mut out = data.to_vec();
        let kn = -self.k_nyquist();
        self.apply_spectral(&mut out, |k| {
            if order % 2 == 1 && k == kn {
                C64::new(0.0, 0.0)
            } else {
                C64::new(0.0, k).powu(order)
            }
        });
        out
    }
}

/// Band-limited value and first derivative of sampled data at an arbitrary point.
pub(crate) fn interpolate(grid: &Grid, spectrum: &[C64], x: f64) -> (C64, C64) {
    let u = x - grid.x_min();
    let kn = -grid.k_nyquist();
    let mut value = C64::new(0.0, 0.0);
    let mut slope = C64::new(0.0, 0.0);
    for (&c, &k) in spectrum.iter().zip(grid.wavenumbers()) {
        if k == kn {
            // split the Nyquist mode symmetrically between +k and -k
            let kk = -k;
            value += c * (kk * u).cos();
            slope += -c * kk * (kk * u).sin();
        } else {
            let e = C64::from_polar(1.0, k * u);
            value += c * e;
            slope += c * e * C64::new(0.0, k);
        }
    }
    let s = 1.0 / grid.len() as f64;
    (value * s, slope * s)
}

/// Complex amplitude field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid,
    amps: Vec<C64>,
    time: f64,
}

impl WaveFunction {
    pub fn new(grid: &Grid, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != grid.len() {
            return Err(Error::InvalidState(format!(
                "{} amplitudes for a {}-point grid",
                amps.len(),
                grid.len()
            )));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            amps,
            time: 0.0,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> C64) -> Self {
        let amps = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        Self {
            grid: grid.clone(),
            amps,
            time: 0.0,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            amps: vec![C64::new(0.0, 0.0); grid.len()],
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }
    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }
    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }
    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Rescale to unit norm, returning the previous norm squared.
    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm_sq();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize a field with norm^2 = {n2}")));
        }
        let s = 1.0 / n2.sqrt();
        self.amps.iter_mut().for_each(|z| *z *= s);
        Ok(n2)
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn scale(&mut self, c: C64) {
        self.amps.iter_mut().for_each(|z| *z *= c);
    }

    pub fn density(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn momentum_amplitudes(&self) -> Vec<C64> {
        let mut out = self.amps.clone();
        self.grid.forward(&mut out);
        out
    }

    /// Norm squared computed from the momentum amplitudes.
    pub fn momentum_norm_sq(&self) -> f64 {
        let n = self.grid.len() as f64;
        self.momentum_amplitudes()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            * self.grid.dx()
            / n
    }

    pub fn mean_position(&self) -> f64 {
        let dx = self.grid.dx();
        let m: f64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(j, z)| self.grid.x(j) * z.norm_sqr())
            .sum::<f64>()
            * dx;
        m / self.norm_sq()
    }

    /// Standard deviation of the position density.
    pub fn width(&self) -> f64 {
        let mean = self.mean_position();
        let dx = self.grid.dx();
        let var = self
            .amps
            .iter()
            .enumerate()
            .map(|(j, z)| (self.grid.x(j) - mean).powi(2) * z.norm_sqr())
            .sum::<f64>()
            * dx
            / self.norm_sq();
        var.sqrt()
    }

    /// Probability sitting in the edge bands of the periodic domain.
    pub fn edge_mass(&self) -> f64 {
        edge_mass(&self.grid, &self.density())
    }

    pub fn check_leakage(&self, limit: f64) -> Result<()> {
        let mass = self.edge_mass();
        if mass > limit {
            Err(Error::Leakage { mass, limit })
        } else {
            Ok(())
        }
    }

    /// Band-limited value and slope at any point of the domain.
    pub fn interpolate(&self, x: f64) -> (C64, C64) {
        interpolate(&self.grid, &self.momentum_amplitudes(), x)
    }
}

pub(crate) fn edge_mass(grid: &Grid, density: &[f64]) -> f64 {
    let band = grid.edge_band();
    let n = density.len();
    let s: f64 = density[..band].iter().chain(&density[n - band..]).sum();
    s * grid.dx()
}

/// `<a|b> = sum conj(a_j) b_j dx`.
pub fn inner_product(a: &WaveFunction, b: &WaveFunction) -> Result<C64> {
    a.grid.ensure_same(&b.grid)?;
    let s: C64 = a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid.dx())
}

/// Expectation of momentum, evaluated on the wavenumber lattice.
pub fn mean_momentum(psi: &WaveFunction) -> Result<f64> {
    let phi = psi.momentum_amplitudes();
    let total: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidState("mean momentum of a zero field".into()));
    }
    let first: f64 = phi
        .iter()
        .zip(psi.grid.wavenumbers())
        .map(|(z, &k)| k * z.norm_sqr())
        .sum();
    Ok(psi.grid.hbar() * first / total)
}

/// Ehrenfest velocity `<p>/m`.
pub fn mean_velocity(psi: &WaveFunction) -> Result<f64> {
    Ok(mean_momentum(psi)? / psi.grid.mass())
}

/// Mixed state stored as the kernel `rho(x_j, x_k)`; as an operator it acts
/// with the measure, `(rho f)_j = sum_k rho_jk f_k dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    grid: Grid,
    elems: DMatrix<C64>,
    time: f64,
}

pub fn purify(psi: &WaveFunction) -> Result<DensityMatrix> {
    purify_with_limit(psi, DENSE_LIMIT)
}

/// `rho_jk = psi_j conj(psi_k)`, refusing grids above `limit` points.
pub fn purify_with_limit(psi: &WaveFunction, limit: usize) -> Result<DensityMatrix> {
    let n = psi.grid.len();
    if n > limit {
        return Err(Error::Capacity {
            what: "density matrix",
            needed: n,
            limit,
        });
    }
    let a = &psi.amps;
    let elems = DMatrix::from_fn(n, n, |j, k| a[j] * a[k].conj());
    Ok(DensityMatrix {
        grid: psi.grid.clone(),
        elems,
        time: psi.time,
    })
}

impl DensityMatrix {
    pub fn from_elements(grid: &Grid, elems: DMatrix<C64>) -> Result<Self> {
        let n = grid.len();
        if n > DENSE_LIMIT {
            return Err(Error::Capacity {
                what: "density matrix",
                needed: n,
                limit: DENSE_LIMIT,
            });
        }
        if elems.nrows() != n || elems.ncols() != n {
            return Err(Error::InvalidState(format!(
                "{}x{} kernel for a {n}-point grid",
                elems.nrows(),
                elems.ncols()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            elems,
            time: 0.0,
        })
    }

    /// Incoherent mixture `sum w_i |psi_i><psi_i|`, weights renormalized.
    pub fn mixture(components: &[(f64, &WaveFunction)]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let grid = first.1.grid.clone();
        let total: f64 = components.iter().map(|c| c.0).sum();
        if components.iter().any(|c| c.0 < 0.0) || !(total > 0.0) {
            return Err(Error::InvalidState("mixture weights must be non-negative".into()));
        }
        let mut rho = purify(first.1)?;
        rho.elems *= C64::from(first.0 / total);
        for (w, psi) in &components[1..] {
            grid.ensure_same(&psi.grid)?;
            let p = purify(psi)?;
            rho.elems += p.elems * C64::from(*w / total);
        }
        Ok(rho)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn elements(&self) -> &DMatrix<C64> {
        &self.elems
    }
    pub fn elements_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.elems
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn trace(&self) -> f64 {
        self.elems.diagonal().iter().map(|z| z.re).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let tr = self.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::InvalidState(format!("cannot normalize a kernel with trace {tr}")));
        }
        self.elems /= C64::from(tr);
        Ok(tr)
    }

    /// Position density `rho(x_j, x_j)`.
    pub fn diagonal_density(&self) -> Vec<f64> {
        self.elems.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.elems.nrows();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in j..n {
                worst = worst.max((self.elems[(j, k)] - self.elems[(k, j)].conj()).norm());
            }
        }
        worst
    }

    /// `max |rho^2 - rho|` with the operator product carrying `dx`.
    pub fn idempotence_error(&self) -> f64 {
        let sq = &self.elems * &self.elems * C64::from(self.grid.dx());
        (sq - &self.elems).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the operator (kernel times `dx`).
    pub fn min_eigenvalue(&self) -> f64 {
        let op = self.elems.clone() * C64::from(self.grid.dx());
        op.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn edge_mass(&self) -> f64 {
        edge_mass(&self.grid, &self.diagonal_density())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gaussian(grid: &Grid, x0: f64, sigma: f64, k0: f64) -> WaveFunction {
        let a = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
        WaveFunction::from_fn(grid, |x| {
            C64::from_polar(a * (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp(), k0 * (x - x0))
        })
    }

    #[test]
    fn rejects_bad_lattices() {
        assert!(Grid::new(0.0, 1.0, 8).is_err());
        assert!(Grid::new(0.0, 1.0, 100).is_err());
        assert!(Grid::new(1.0, 0.0, 64).is_err());
        let mut spec = GridSpec::new(0.0, 1.0, 64);
        spec.mass = 0.0;
        assert!(Grid::from_spec(spec).is_err());
    }

    #[test]
    fn momentum_lattice_is_fft_dual() {
        let g = Grid::new(-8.0, 8.0, 64).unwrap();
        let k = g.wavenumbers();
        let dk = 2.0 * std::f64::consts::PI / g.length();
        assert_abs_diff_eq!(k[1], dk, epsilon = 1e-15);
        assert_abs_diff_eq!(k[32], -g.k_nyquist(), epsilon = 1e-12);
        // a plane wave on a lattice mode lands in a single bin
        let psi = WaveFunction::from_fn(&g, |x| C64::from_polar(1.0, 3.0 * dk * x));
        let phi = psi.momentum_amplitudes();
        let peak = phi.iter().map(|z| z.norm()).enumerate().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!(peak.0, 3);
    }

    #[test]
    fn normalized_gaussian_has_unit_inner_product() {
        let g = Grid::new(-40.0, 40.0, 1024).unwrap();
        let psi = gaussian(&g, 0.0, 2.0, 1.0);
        let ip = inner_product(&psi, &psi).unwrap();
        assert_abs_diff_eq!(ip.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn distant_gaussians_are_orthogonal() {
        let g = Grid::new(-80.0, 80.0, 2048).unwrap();
        let sigma = 2.0;
        // closed form e^{-d^2 / 8 sigma^2} for density width sigma
        let overlap = |d: f64| {
            let a = gaussian(&g, -d / 2.0, sigma, 0.0);
            let b = gaussian(&g, d / 2.0, sigma, 0.0);
            inner_product(&a, &b).unwrap().norm()
        };
        let d = 10.0 * sigma;
        assert!((overlap(d) - (-d * d / (8.0 * sigma * sigma)).exp()).abs() < 1e-12);
        // ten amplitude widths (sqrt 2 sigma) apart
        let d = 10.0 * 2.0_f64.sqrt() * sigma;
        let ov = overlap(d);
        assert!(ov < 1e-8, "overlap {ov}");
        assert!((ov - (-25.0_f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn inner_product_requires_same_grid() {
        let g1 = Grid::new(-1.0, 1.0, 16).unwrap();
        let g2 = Grid::new(-1.0, 1.0, 32).unwrap();
        let a = WaveFunction::zeros(&g1);
        let b = WaveFunction::zeros(&g2);
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn mean_momentum_of_boosted_and_real_gaussians() {
        let g = Grid::new(-40.0, 40.0, 2048).unwrap();
        let boosted = gaussian(&g, 0.0, 1.0, 5.0);
        assert_abs_diff_eq!(mean_momentum(&boosted).unwrap(), 5.0, epsilon = 1e-6);
        let real = gaussian(&g, 3.0, 1.0, 0.0);
        assert_abs_diff_eq!(mean_momentum(&real).unwrap(), 0.0, epsilon = 1e-10);
        assert!(matches!(
            mean_momentum(&WaveFunction::zeros(&g)),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn mean_momentum_carries_hbar() {
        let mut spec = GridSpec::new(-40.0, 40.0, 2048);
        spec.hbar = 0.5;
        let g = Grid::from_spec(spec).unwrap();
        let psi = gaussian(&g, 0.0, 1.0, 5.0);
        assert_abs_diff_eq!(mean_momentum(&psi).unwrap(), 2.5, epsilon = 1e-6);
    }

    #[test]
    fn train_momentum_matches_direct_quadrature() {
        let g = Grid::new(-64.0, 64.0, 4096).unwrap();
        let k0 = 3.0;
        let offsets = [10.0, 25.0, 40.0];
        let a = (2.0 * std::f64::consts::PI).powf(-0.25);
        let mut psi = WaveFunction::from_fn(&g, |x| {
            offsets
                .iter()
                .map(|&d| C64::from_polar(a * (-(x + d).powi(2) / 4.0).exp(), k0 * (x + d)))
                .sum::<C64>()
        });
        psi.normalize().unwrap();
        // direct quadrature of conj(psi) (-i hbar) psi' with a sixth-order difference
        let dx = g.dx();
        let amps = psi.amplitudes();
        let n = amps.len();
        let direct: f64 = (3..n - 3)
            .map(|j| {
                let d = (amps[j + 3] - amps[j - 3] - (amps[j + 2] - amps[j - 2]) * 9.0
                    + (amps[j + 1] - amps[j - 1]) * 45.0)
                    / (60.0 * dx);
                (amps[j].conj() * C64::new(0.0, -1.0) * d).re
            })
            .sum::<f64>()
            * dx;
        let spectral = mean_momentum(&psi).unwrap();
        assert_abs_diff_eq!(spectral, k0, epsilon = 1e-6);
        assert!((direct - spectral).abs() < 1e-6, "{direct} vs {spectral}");
    }

    #[test]
    fn purify_toy_kernel() {
        let g = Grid::new(0.0, 16.0, 16).unwrap();
        let dx = g.dx();
        let mut amps = vec![C64::new(0.0, 0.0); 16];
        let s = 1.0 / (2.0 * dx).sqrt();
        amps[3] = C64::new(s, 0.0);
        amps[4] = C64::new(0.0, s);
        let psi = WaveFunction::new(&g, amps).unwrap();
        let rho = purify(&psi).unwrap();
        let off = rho.elements()[(3, 4)];
        assert_abs_diff_eq!(off.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(off.im, -1.0 / (2.0 * dx), epsilon = 1e-14);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn purified_state_is_idempotent_and_psd() {
        let g = Grid::new(-16.0, 16.0, 128).unwrap();
        let psi = gaussian(&g, 1.0, 2.0, 0.7);
        let rho = purify(&psi).unwrap();
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
        assert!(rho.idempotence_error() < 1e-10);
        assert!(rho.hermiticity_error() < 1e-14);
        assert!(rho.is_positive_semidefinite(1e-8));
        let diag = rho.diagonal_density();
        assert_eq!(diag, psi.density());
    }

    #[test]
    fn purify_respects_capacity() {
        let g = Grid::new(-1.0, 1.0, 2048).unwrap();
        let psi = WaveFunction::zeros(&g);
        assert!(matches!(purify(&psi), Err(Error::Capacity { .. })));
        let g = Grid::new(-1.0, 1.0, 64).unwrap();
        let psi = WaveFunction::zeros(&g);
        assert!(matches!(purify_with_limit(&psi, 32), Err(Error::Capacity { .. })));
    }

    #[test]
    fn mixture_of_two_states_is_mixed() {
        let g = Grid::new(-32.0, 32.0, 128).unwrap();
        let a = gaussian(&g, -10.0, 1.5, 0.0);
        let b = gaussian(&g, 10.0, 1.5, 0.0);
        let rho = DensityMatrix::mixture(&[(1.0, &a), (1.0, &b)]).unwrap();
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-12);
        // purity Tr(rho^2) = 1/2 for disjoint equal mixtures
        let sq = rho.elements() * rho.elements() * C64::from(g.dx() * g.dx());
        let purity: f64 = sq.diagonal().iter().map(|z| z.re).sum();
        assert_abs_diff_eq!(purity, 0.5, epsilon = 1e-10);
        assert!(rho.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn interpolation_reproduces_nodes_and_slopes() {
        let g = Grid::new(-20.0, 20.0, 512).unwrap();
        let psi = gaussian(&g, 0.5, 2.0, 1.3);
        let (v, _) = psi.interpolate(g.x(200));
        assert!((v - psi.amplitudes()[200]).norm() < 1e-12);
        // slope against the analytic derivative at an off-node point
        let x = 0.3217;
        let (v, d) = psi.interpolate(x);
        let a = (2.0 * std::f64::consts::PI * 4.0).powf(-0.25);
        let exact = C64::from_polar(a * (-(x - 0.5).powi(2) / 16.0).exp(), 1.3 * (x - 0.5));
        let exact_d = exact * C64::new(-(x - 0.5) / 8.0, 1.3);
        assert!((v - exact).norm() < 1e-12);
        assert!((d - exact_d).norm() < 1e-11);
    }

    #[test]
    fn edge_mass_flags_wrapping_probability() {
        let g = Grid::new(-20.0, 20.0, 512).unwrap();
        let centered = gaussian(&g, 0.0, 1.0, 0.0);
        assert!(centered.check_leakage(LEAKAGE_LIMIT).is_ok());
        let at_edge = gaussian(&g, 19.0, 1.0, 0.0);
        assert!(matches!(at_edge.check_leakage(LEAKAGE_LIMIT), Err(Error::Leakage { .. })));
    }
}
