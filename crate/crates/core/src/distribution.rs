//! Arrival-time densities from a click rate `w(t)`, and the flux law
//! `P(t) = v rho(0-, t)` that needs no chain at all.
//!
//! All integrals are trapezoid sums on a uniform time lattice starting at
//! the first sample.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detector::{DetectorGeometry, Region};
use crate::error::{Error, Result};
use crate::grid::{interpolate, mean_velocity, Grid, WaveFunction, LEAKAGE_LIMIT};
use crate::propagators::{analytic_gaussian, rigid_density, FreePropagator, PropagatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ChainExponential,
    IntegralEquation,
    FluxLaw,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::ChainExponential => "chain_exponential",
            Method::IntegralEquation => "integral_equation",
            Method::FluxLaw => "flux_law",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeDistribution {
    pub times: Vec<f64>,
    pub density: Vec<f64>,
    pub method: Method,
    pub total_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub time: f64,
    pub height: f64,
}

impl TimeDistribution {
    pub fn new(times: Vec<f64>, density: Vec<f64>, method: Method) -> Result<Self> {
        if times.len() != density.len() {
            return Err(Error::Data(format!(
                "{} times but {} density samples",
                times.len(),
                density.len()
            )));
        }
        if let Some(d) = density.iter().find(|d| !(**d >= 0.0)) {
            return Err(Error::Data(format!("density sample {d} is negative or not finite")));
        }
        let total_mass = trapezoid(&times, &density);
        Ok(Self {
            times,
            density,
            method,
            total_mass,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Local maxima above `min_fraction` of the global maximum, refined by a
    /// parabola through the three samples around each.
    pub fn peaks(&self, min_fraction: f64) -> Vec<Peak> {
        let d = &self.density;
        let top = d.iter().cloned().fold(0.0, f64::max);
        if d.len() < 3 || top <= 0.0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for k in 1..d.len() - 1 {
            if d[k] > d[k - 1] && d[k] >= d[k + 1] && d[k] >= min_fraction * top {
                let (a, b, c) = (d[k - 1], d[k], d[k + 1]);
                let curv = a - 2.0 * b + c;
                let h = self.times[k + 1] - self.times[k];
                let (shift, height) = if curv < 0.0 {
                    let s = 0.5 * (a - c) / curv;
                    (s, b - 0.25 * (a - c) * s)
                } else {
                    (0.0, b)
                };
                out.push(Peak {
                    time: self.times[k] + shift * h,
                    height,
                });
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,density,method\n");
        for (t, d) in self.times.iter().zip(&self.density) {
            let _ = writeln!(s, "{t:.16e},{d:.16e},{}", self.method.label());
        }
        s
    }

    pub fn summary(&self, min_peak_fraction: f64) -> DistributionSummary {
        DistributionSummary {
            method: self.method,
            total_mass: round_sig(self.total_mass),
            peaks: self
                .peaks(min_peak_fraction)
                .into_iter()
                .map(|p| Peak {
                    time: round_sig(p.time),
                    height: round_sig(p.height),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub method: Method,
    pub total_mass: f64,
    pub peaks: Vec<Peak>,
}

/// Round to the 12 significant digits used in JSON summaries.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

/// Trapezoid integral of samples over their time lattice.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Running trapezoid integral, starting at 0.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for k in 0..values.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// `sum |a - b| / sum |b|` over common samples.
pub fn relative_l1(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    let den: f64 = b.iter().map(|y| y.abs()).sum();
    num / den
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::Data("a rate series needs at least two samples".into()));
    }
    let h = times[1] - times[0];
    if !(h > 0.0) {
        return Err(Error::Data(format!("time lattice must increase, first step {h}")));
    }
    for (k, t) in times.iter().enumerate() {
        let expect = times[0] + k as f64 * h;
        if (t - expect).abs() > 1e-9 * h.max(expect.abs()) {
            return Err(Error::Data(format!("time lattice is not uniform at sample {k}")));
        }
    }
    Ok(h)
}

fn check_rate(times: &[f64], w: &[f64]) -> Result<f64> {
    if times.len() != w.len() {
        return Err(Error::Data(format!("{} times but {} rate samples", times.len(), w.len())));
    }
    if let Some((k, x)) = w.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
        return Err(Error::Data(format!("rate sample {k} is {x}; rates must be non-negative")));
    }
    uniform_step(times)
}

/// `P(t) = w(t) exp(-int_0^t w)`.
pub fn distribution_from_w(times: &[f64], w: &[f64]) -> Result<TimeDistribution> {
    check_rate(times, w)?;
    let cum = cumulative_trapezoid(times, w);
    let density = w.iter().zip(&cum).map(|(w, c)| w * (-c).exp()).collect();
    TimeDistribution::new(times.to_vec(), density, Method::ChainExponential)
}

/// Forward solution of `P(t) = w(t) [1 - int_0^t P]` with the integral
/// discretized by the trapezoid rule, solved for each new sample in closed
/// form.
pub fn solve_integral_equation(times: &[f64], w: &[f64]) -> Result<TimeDistribution> {
    let h = check_rate(times, w)?;
    let mut density = Vec::with_capacity(w.len());
    density.push(w[0]);
    let mut integral = 0.0;
    for k in 1..w.len() {
        let prev = density[k - 1];
        let p = w[k] * (1.0 - integral - 0.5 * h * prev) / (1.0 + 0.5 * h * w[k]);
        integral += 0.5 * h * (prev + p);
        density.push(p.max(0.0));
    }
    TimeDistribution::new(times.to_vec(), density, Method::IntegralEquation)
}

/// Refined samples used by [`solve_integral_equation_refined`].
pub const REFINED_SAMPLES: usize = 20_000;

/// [`solve_integral_equation`] on a lattice `factor` times finer, with `w`
/// interpolated linearly between the given samples, read back at `times`.
pub fn solve_integral_equation_refined(times: &[f64], w: &[f64], factor: usize) -> Result<TimeDistribution> {
    let h = check_rate(times, w)?;
    let factor = factor.max(1);
    let n = times.len() - 1;
    let fine_t: Vec<f64> = (0..=n * factor).map(|j| times[0] + j as f64 * h / factor as f64).collect();
    let fine_w: Vec<f64> = (0..=n * factor)
        .map(|j| {
            let (k, r) = (j / factor, j % factor);
            if r == 0 {
                w[k]
            } else {
                let u = r as f64 / factor as f64;
                (1.0 - u) * w[k] + u * w[k + 1]
            }
        })
        .collect();
    let fine = solve_integral_equation(&fine_t, &fine_w)?;
    let density = fine.density.iter().step_by(factor).copied().collect();
    TimeDistribution::new(times.to_vec(), density, Method::IntegralEquation)
}

/// Refinement factor bringing `n_samples` up to at least [`REFINED_SAMPLES`].
pub fn refinement_for(n_samples: usize) -> usize {
    REFINED_SAMPLES.div_ceil(n_samples.saturating_sub(1).max(1)).max(1)
}

/// Free-evolution quantities read at the detector's left edge.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub velocity: f64,
    pub times: Vec<f64>,
    /// `w(t) = v rho(0-, t) / int_{x<0} rho(x, t)`.
    pub w: Vec<f64>,
    /// `v rho(0-, t)`.
    pub flux: Vec<f64>,
    pub left_mass: Vec<f64>,
}

fn positive_velocity(psi0: &WaveFunction) -> Result<f64> {
    let v = mean_velocity(psi0)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidState(format!(
            "the packet must move toward the detector, mean velocity is {v}"
        )))
    }
}

/// Free evolution of `psi0` visited at each of `times` in order.
fn for_each_free(
    psi0: &WaveFunction,
    times: &[f64],
    mut f: impl FnMut(usize, &WaveFunction) -> Result<bool>,
) -> Result<()> {
    let mut psi = psi0.clone();
    let mut now = psi0.time();
    let mut prop: Option<FreePropagator> = None;
    for (i, &t) in times.iter().enumerate() {
        let dt = t - now;
        if dt != 0.0 {
            let reuse = prop.as_ref().is_some_and(|p| (p.dt() - dt).abs() <= 1e-12 * dt.abs());
            if !reuse {
                prop = Some(FreePropagator::new(psi.grid(), dt)?);
            }
            prop.as_ref().unwrap().step(&mut psi)?;
            psi.set_time(t);
            now = t;
        }
        psi.check_leakage(LEAKAGE_LIMIT)?;
        if !f(i, &psi)? {
            break;
        }
    }
    Ok(())
}

/// Rate from the freely evolved density. The series stops once the left
/// mass drops below `1e-12`.
pub fn w_from_free_density(psi0: &WaveFunction, geom: &DetectorGeometry, times: &[f64]) -> Result<RateSeries> {
    geom.grid().ensure_same(psi0.grid())?;
    let v = positive_velocity(psi0)?;
    let jb = geom.boundary_index();
    let mut out = RateSeries {
        velocity: v,
        times: Vec::new(),
        w: Vec::new(),
        flux: Vec::new(),
        left_mass: Vec::new(),
    };
    for_each_free(psi0, times, |i, psi| {
        let left = geom.mass_in(psi, Region::Left);
        if left < 1e-12 {
            return Ok(false);
        }
        let flux = v * psi.amplitudes()[jb].norm_sqr();
        out.times.push(times[i]);
        out.w.push(flux / left);
        out.flux.push(flux);
        out.left_mass.push(left);
        Ok(true)
    })?;
    Ok(out)
}

/// `P(t) = v rho(0-, t)` with `v` the initial Ehrenfest velocity.
pub fn flux_law(
    psi0: &WaveFunction,
    geom: &DetectorGeometry,
    times: &[f64],
    kind: &PropagatorKind,
) -> Result<TimeDistribution> {
    geom.grid().ensure_same(psi0.grid())?;
    let jb = geom.boundary_index();
    let grid = psi0.grid();
    let density = match kind {
        PropagatorKind::SpectralFree => {
            let v = positive_velocity(psi0)?;
            let mut out = Vec::with_capacity(times.len());
            for_each_free(psi0, times, |_, psi| {
                out.push(v * psi.amplitudes()[jb].norm_sqr());
                Ok(true)
            })?;
            out
        }
        PropagatorKind::AnalyticGaussian(spec) => {
            let v = spec.velocity(grid.hbar());
            let x = grid.x(jb);
            times
                .iter()
                .map(|&t| {
                    analytic_gaussian(grid, spec, t)?;
                    Ok(v * spec.density(x, t, grid.hbar()))
                })
                .collect::<Result<Vec<f64>>>()?
        }
        PropagatorKind::RigidTransport { velocity } => {
            let rho0 = psi0.density();
            times
                .iter()
                // the band-limited shift can undershoot zero by round-off
                .map(|&t| Ok(velocity * rigid_density(grid, &rho0, *velocity, t)?[jb].max(0.0)))
                .collect::<Result<Vec<f64>>>()?
        }
    };
    TimeDistribution::new(times.to_vec(), density, Method::FluxLaw)
}

/// Both sides of `int_{x<0} rho(x, t) dx = int_t^inf v rho(0-, t') dt'` for
/// a rigidly transported density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformIdentity {
    pub left_mass: f64,
    pub flux_integral: f64,
    pub defect: f64,
}

/// The left side integrates the shifted density over cells up to the
/// boundary cell; the right side samples `v rho0(x_b - v t')` at spacing
/// `dx / v` by direct band-limited evaluation, until the samples leave the
/// grid.
pub fn transform_identity_check(
    geom: &DetectorGeometry,
    rho0: &[f64],
    v: f64,
    t: f64,
) -> Result<TransformIdentity> {
    let grid = geom.grid();
    let jb = geom.boundary_index();
    let dx = grid.dx();
    let shifted = rigid_density(grid, rho0, v, t)?;
    let left_mass = dx * (0.5 * shifted[jb] + shifted[..jb].iter().sum::<f64>());

    let mut spec: Vec<_> = rho0.iter().map(|&r| num_complex::Complex64::from(r)).collect();
    grid.forward(&mut spec);
    let xb = grid.x(jb);
    let x_stop = grid.x_min();
    let dt = dx / v;
    let mut acc = 0.0;
    let mut j = 0usize;
    loop {
        let tp = t + j as f64 * dt;
        let x = xb - v * tp;
        if x < x_stop {
            break;
        }
        let r = interpolate(grid, &spec, x).0.re;
        acc += if j == 0 { 0.5 * r } else { r };
        j += 1;
    }
    let flux_integral = acc * v * dt;
    Ok(TransformIdentity {
        left_mass,
        flux_integral,
        defect: relative_defect(left_mass, flux_integral),
    })
}

/// Same identity with the true dispersive evolution on both sides; the flux
/// integral runs on the lattice `t + j dt` up to `horizon`.
pub fn transform_identity_free(
    psi0: &WaveFunction,
    geom: &DetectorGeometry,
    t: f64,
    horizon: f64,
    dt: f64,
) -> Result<TransformIdentity> {
    geom.grid().ensure_same(psi0.grid())?;
    if !(dt > 0.0) || horizon < t {
        return Err(Error::Config("need dt > 0 and horizon >= t".into()));
    }
    let v = positive_velocity(psi0)?;
    let jb = geom.boundary_index();
    let n = ((horizon - t) / dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|j| t + j as f64 * dt).collect();
    let mut flux = Vec::with_capacity(times.len());
    let mut left_mass = 0.0;
    for_each_free(psi0, &times, |i, psi| {
        if i == 0 {
            left_mass = geom.mass_in(psi, Region::Left);
        }
        flux.push(v * psi.amplitudes()[jb].norm_sqr());
        Ok(true)
    })?;
    let flux_integral = trapezoid(&times, &flux);
    Ok(TransformIdentity {
        left_mass,
        flux_integral,
        defect: relative_defect(left_mass, flux_integral),
    })
}

fn relative_defect(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Uniform lattice `t0, t0 + h, ...` with `n + 1` samples.
pub fn time_lattice(t0: f64, h: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t0 + k as f64 * h).collect()
}

/// Grid-level helper: the density a rigidly moving initial state has at the
/// boundary cell, as a function of time.
pub fn rigid_boundary_density(grid: &Grid, geom: &DetectorGeometry, rho0: &[f64], v: f64, times: &[f64]) -> Result<Vec<f64>> {
    grid.ensure_same(geom.grid())?;
    let jb = geom.boundary_index();
    times.iter().map(|&t| Ok(rigid_density(grid, rho0, v, t)?[jb])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{run_chain, ChainConfig};
    use crate::propagators::GaussianSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_rate_gives_zero_density() {
        let t = time_lattice(0.0, 0.1, 100);
        let w = vec![0.0; t.len()];
        for d in [distribution_from_w(&t, &w).unwrap(), solve_integral_equation(&t, &w).unwrap()] {
            assert!(d.density.iter().all(|&x| x == 0.0));
            assert_eq!(d.total_mass, 0.0);
        }
    }

    #[test]
    fn constant_rate_gives_exponential_decay() {
        let gamma = 2.0;
        let h = 1e-3 / gamma;
        let t = time_lattice(0.0, h, 5000);
        let w = vec![gamma; t.len()];
        let exact: Vec<f64> = t.iter().map(|t| gamma * (-gamma * t).exp()).collect();
        for d in [distribution_from_w(&t, &w).unwrap(), solve_integral_equation(&t, &w).unwrap()] {
            let err = d
                .density
                .iter()
                .zip(&exact)
                .map(|(a, b)| ((a - b) / b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-6, "{:?}: {err}", d.method);
        }
    }

    #[test]
    fn bad_rates_are_rejected() {
        let t = time_lattice(0.0, 0.1, 3);
        assert!(matches!(distribution_from_w(&t, &[0.0, -1.0, 0.0, 0.0]), Err(Error::Data(_))));
        assert!(matches!(distribution_from_w(&[0.0, 0.1, 0.3], &[0.0; 3]), Err(Error::Data(_))));
        assert!(matches!(solve_integral_equation(&t, &[0.0; 2]), Err(Error::Data(_))));
    }

    #[test]
    fn parabolic_peak_refinement() {
        let h = 0.1;
        let t = time_lattice(0.0, h, 100);
        let d: Vec<f64> = t.iter().map(|t| 3.0 - (t - 4.23).powi(2)).map(|x| x.max(0.0)).collect();
        let dist = TimeDistribution::new(t, d, Method::FluxLaw).unwrap();
        let p = dist.peaks(0.5);
        assert_eq!(p.len(), 1);
        assert_abs_diff_eq!(p[0].time, 4.23, epsilon = 1e-9);
        assert_abs_diff_eq!(p[0].height, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.123456789012345), 0.123456789012);
        assert_eq!(round_sig(-98765.4321098765), -98765.4321099);
        assert_eq!(round_sig(0.0), 0.0);
    }

    fn setup() -> (WaveFunction, DetectorGeometry, GaussianSpec) {
        let g = Grid::new(-256.0, 256.0, 4096).unwrap();
        let geom = DetectorGeometry::new(&g, 20.0).unwrap();
        let spec = GaussianSpec::new(-80.0, 10.0, 16.0);
        (analytic_gaussian(&g, &spec, 0.0).unwrap(), geom, spec)
    }

    #[test]
    fn far_packet_has_no_rate() {
        let (psi, geom, _) = setup();
        let r = w_from_free_density(&psi, &geom, &time_lattice(0.0, 0.1, 5)).unwrap();
        assert!(r.w.iter().all(|&w| w < 1e-8));
    }

    #[test]
    fn rate_peaks_after_flux() {
        let (psi, geom, _) = setup();
        let t = time_lattice(0.0, 0.05, 200);
        let r = w_from_free_density(&psi, &geom, &t).unwrap();
        let arg = |x: &[f64]| x.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(r.times.len() < t.len(), "series stops when the left side empties");
        assert!(arg(&r.w) > arg(&r.flux));
    }

    #[test]
    fn rate_rejects_packets_moving_away() {
        let g = Grid::new(-128.0, 128.0, 1024).unwrap();
        let geom = DetectorGeometry::new(&g, 20.0).unwrap();
        let psi = analytic_gaussian(&g, &GaussianSpec::new(-40.0, 5.0, -1.0), 0.0).unwrap();
        assert!(w_from_free_density(&psi, &geom, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn flux_law_normalizes_and_peaks_on_time() {
        let (psi, geom, spec) = setup();
        let v = 16.0;
        let dx = psi.grid().dx();
        let t = time_lattice(0.0, dx / v, 1600);
        let flux = flux_law(&psi, &geom, &t, &PropagatorKind::SpectralFree).unwrap();
        assert_abs_diff_eq!(flux.total_mass, 1.0, epsilon = 1e-2);
        let peak = flux.peaks(0.5)[0];
        let xb = psi.grid().x(geom.boundary_index());
        assert!((peak.time - (xb - spec.center) / v).abs() <= 2.0 * dx / v);
        let analytic = flux_law(&psi, &geom, &t, &PropagatorKind::AnalyticGaussian(spec)).unwrap();
        assert!(relative_l1(&flux.density, &analytic.density) < 1e-8);
    }

    #[test]
    fn rigid_flux_matches_exponential_of_rigid_rate() {
        // with rigid transport the exponential formula reproduces v rho(0-, t)
        let (psi, geom, _) = setup();
        let v = 16.0;
        let grid = psi.grid();
        let dx = grid.dx();
        let t = time_lattice(0.0, dx / v, 1800);
        let rho0 = psi.density();
        let rho_b = rigid_boundary_density(grid, &geom, &rho0, v, &t).unwrap();
        let jb = geom.boundary_index();
        let w: Vec<f64> = t
            .iter()
            .zip(&rho_b)
            .map(|(&tt, r)| {
                let s = rigid_density(grid, &rho0, v, tt).unwrap();
                let left = s[..jb].iter().sum::<f64>() * dx + 0.5 * s[jb] * dx;
                if left > 1e-12 { v * r / left } else { 0.0 }
            })
            .collect();
        let exp = distribution_from_w(&t, &w).unwrap();
        let flux = flux_law(&psi, &geom, &t, &PropagatorKind::RigidTransport { velocity: v }).unwrap();
        let l1 = relative_l1(&exp.density, &flux.density);
        assert!(l1 <= 0.02, "{l1}");
    }

    #[test]
    fn transform_identity_under_rigid_transport() {
        let (psi, geom, _) = setup();
        let rho0 = psi.density();
        let at0 = transform_identity_check(&geom, &rho0, 16.0, 0.0).unwrap();
        assert_abs_diff_eq!(at0.left_mass, 1.0, epsilon = 1e-9);
        assert!(at0.defect <= 1e-9);
        let mid = transform_identity_check(&geom, &rho0, 16.0, 5.0).unwrap();
        assert!(mid.left_mass > 0.3 && mid.left_mass < 0.7);
        assert!(mid.defect <= 1e-6, "{}", mid.defect);
    }

    #[test]
    fn transform_identity_breaks_down_with_dispersion() {
        let g = Grid::new(-128.0, 128.0, 2048).unwrap();
        let geom = DetectorGeometry::new(&g, 20.0).unwrap();
        let spec = GaussianSpec::new(-20.0, 2.0, 4.0);
        let psi = analytic_gaussian(&g, &spec, 0.0).unwrap();
        let tau = spec.tau(1.0);
        let r = transform_identity_free(&psi, &geom, tau, 12.0, g.dx() / 4.0).unwrap();
        assert!(r.defect.is_finite() && r.left_mass > 0.0);
    }

    #[test]
    fn chain_rate_bookkeeping() {
        let g = Grid::new(-512.0, 512.0, 8192).unwrap();
        let geom = DetectorGeometry::new(&g, 20.0).unwrap();
        let psi = analytic_gaussian(&g, &GaussianSpec::new(-140.0, 20.0, 16.0), 0.0).unwrap();
        let dt = 4.0 * g.dx() / 16.0;
        let rec = run_chain(&psi, &geom, &ChainConfig::new(dt, 480)).unwrap();
        let d = distribution_from_w(&rec.times, &rec.w).unwrap();
        assert_abs_diff_eq!(d.total_mass, 1.0 - rec.final_survival(), epsilon = 1e-3);
        let ie = solve_integral_equation(&rec.times, &rec.w).unwrap();
        let top = d.density.iter().cloned().fold(0.0, f64::max);
        for (a, b) in d.density.iter().zip(&ie.density) {
            assert!((a - b).abs() <= 1e-4 * top);
        }
    }

    #[test]
    fn csv_rows_carry_the_method() {
        let t = time_lattice(0.0, 0.5, 2);
        let d = distribution_from_w(&t, &[1.0, 1.0, 1.0]).unwrap();
        let csv = d.to_csv();
        assert!(csv.starts_with("t,density,method\n"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",chain_exponential"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn refined_integral_equation_converges_quadratically() {
        let times = time_lattice(0.0, 0.05, 400);
        let w: Vec<f64> = times.iter().map(|t| 0.8 * (-((t - 8.0) / 3.0).powi(2)).exp()).collect();
        let exp = distribution_from_w(&times, &w).unwrap();
        let gap = |f| {
            let d = solve_integral_equation_refined(&times, &w, f).unwrap();
            d.density.iter().zip(&exp.density).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let plain = solve_integral_equation(&times, &w).unwrap();
        let d1 = solve_integral_equation_refined(&times, &w, 1).unwrap();
        assert_eq!(plain.density, d1.density);
        let (g1, g4) = (gap(1), gap(4));
        assert!(g4 < g1 / 12.0, "{g1} {g4}");
        assert_eq!(refinement_for(401), 50);
        assert_eq!(refinement_for(30_000), 1);
    }
}
