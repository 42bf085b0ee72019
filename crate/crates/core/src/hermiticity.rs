//! Numerical experiments on the projected Hamiltonian `H_bar = chi_D H chi_D`.
//!
//! On the real line `H_bar` fails to be hermitian: for fields that do not
//! vanish at the boundary of `D`, `conj(<phi, H_bar psi>) - <psi, H_bar phi>`
//! equals a partial-integration boundary term. A naive finite matrix
//! `M H_fd M`, by contrast, is exactly symmetric and generates reflecting
//! dynamics. That symmetry is a discretization artifact and must not be used
//! in place of projected free evolution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chain::projected_evolution;
use crate::detector::{DetectorGeometry, ProjectorMask, Region};
use crate::error::{Error, Result};
use crate::grid::{interpolate, Grid, WaveFunction, DENSE_LIMIT};
use crate::propagators::step_free;

/// Largest spectral power fraction allowed above half the Nyquist wavenumber.
pub const RESOLUTION_LIMIT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiticityReport {
    pub pair_id: String,
    /// `conj(int_D conj(phi) H psi)`.
    pub lhs: C64,
    /// `int_D conj(psi) H phi`.
    pub rhs: C64,
    pub defect: C64,
    /// `(hbar^2 / 2m) [conj(psi) phi' - phi conj(psi)']` summed over the
    /// interval ends, upper minus lower.
    pub boundary_term: C64,
    pub mismatch: f64,
}

/// Exact integral over `[lo, hi]` of the band-limited interpolant of the
/// samples whose unnormalized spectrum is `spec`.
fn interval_integral(grid: &Grid, spec: &[C64], iv: Interval) -> C64 {
    let (a, b) = (iv.lo - grid.x_min(), iv.hi - grid.x_min());
    let kn = -grid.k_nyquist();
    let mut acc = C64::new(0.0, 0.0);
    for (&c, &k) in spec.iter().zip(grid.wavenumbers()) {
        if k == 0.0 {
            acc += c * (b - a);
        } else if k == kn {
            let kk = -k;
            acc += c * (((kk * b).sin() - (kk * a).sin()) / kk);
        } else {
            let e = C64::from_polar(1.0, k * b) - C64::from_polar(1.0, k * a);
            acc += c * e / C64::new(0.0, k);
        }
    }
    acc / grid.len() as f64
}

fn ensure_resolved(psi: &WaveFunction, label: &str) -> Result<()> {
    let spec = psi.momentum_amplitudes();
    let half = 0.5 * psi.grid().k_nyquist();
    let total: f64 = spec.iter().map(|z| z.norm_sqr()).sum();
    let high: f64 = spec
        .iter()
        .zip(psi.grid().wavenumbers())
        .filter(|(_, k)| k.abs() > half)
        .map(|(z, _)| z.norm_sqr())
        .sum();
    if total > 0.0 && high / total > RESOLUTION_LIMIT {
        return Err(Error::Accuracy(format!(
            "field {label} has {:.2e} of its spectral power above k_nyquist/2",
            high / total
        )));
    }
    Ok(())
}

fn apply_h(psi: &WaveFunction) -> Vec<C64> {
    let grid = psi.grid();
    let c = -grid.hbar() * grid.hbar() / (2.0 * grid.mass());
    grid.derivative(psi.amplitudes(), 2).into_iter().map(|z| z * c).collect()
}

/// `int_D conj(a) H b` over a union of intervals.
fn restricted_matrix_element(a: &WaveFunction, b: &WaveFunction, domain: &[Interval]) -> C64 {
    let grid = a.grid();
    let hb = apply_h(b);
    let mut f: Vec<C64> = a.amplitudes().iter().zip(&hb).map(|(x, y)| x.conj() * y).collect();
    grid.forward(&mut f);
    domain.iter().map(|iv| interval_integral(grid, &f, *iv)).sum()
}

/// Both sides of the hermiticity test for `H_bar` on `domain`, with
/// derivatives taken on the full periodic line before restriction.
pub fn hermiticity_defect(
    phi: &WaveFunction,
    psi: &WaveFunction,
    domain: &[Interval],
    pair_id: &str,
) -> Result<HermiticityReport> {
    phi.grid().ensure_same(psi.grid())?;
    let grid = phi.grid();
    for iv in domain {
        if !(iv.lo < iv.hi && iv.lo >= grid.x_min() && iv.hi <= grid.x_max()) {
            return Err(Error::Config(format!(
                "interval [{}, {}] is empty or leaves the grid",
                iv.lo, iv.hi
            )));
        }
    }
    ensure_resolved(phi, "phi")?;
    ensure_resolved(psi, "psi")?;

    let lhs = restricted_matrix_element(phi, psi, domain).conj();
    let rhs = restricted_matrix_element(psi, phi, domain);
    let defect = lhs - rhs;

    let c = grid.hbar() * grid.hbar() / (2.0 * grid.mass());
    let sp = phi.momentum_amplitudes();
    let ss = psi.momentum_amplitudes();
    let wronskian = |x: f64| {
        let (p, dp) = interpolate(grid, &sp, x);
        let (s, ds) = interpolate(grid, &ss, x);
        s.conj() * dp - p * ds.conj()
    };
    let boundary_term: C64 = domain
        .iter()
        .map(|iv| (wronskian(iv.hi) - wronskian(iv.lo)) * c)
        .sum();
    Ok(HermiticityReport {
        pair_id: pair_id.to_string(),
        lhs,
        rhs,
        defect,
        boundary_term,
        mismatch: (defect - boundary_term).norm(),
    })
}

/// `-(hbar^2/2m)` times the periodic three-point second difference.
pub fn finite_difference_hamiltonian(grid: &Grid) -> Result<DMatrix<f64>> {
    let n = grid.len();
    if n > DENSE_LIMIT {
        return Err(Error::Capacity {
            what: "dense Hamiltonian",
            needed: n,
            limit: DENSE_LIMIT,
        });
    }
    let c = grid.hbar() * grid.hbar() / (2.0 * grid.mass() * grid.dx() * grid.dx());
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        h[(j, j)] = 2.0 * c;
        h[(j, (j + 1) % n)] = -c;
        h[(j, (j + n - 1) % n)] = -c;
    }
    Ok(h)
}

/// `M H_fd M` with `M` the no-click mask.
pub fn projected_fd_matrix(geom: &DetectorGeometry) -> Result<DMatrix<f64>> {
    let mut a = finite_difference_hamiltonian(geom.grid())?;
    let keep = geom.no_click();
    for (j, &k) in keep.weights().iter().enumerate() {
        if !k {
            a.row_mut(j).fill(0.0);
            a.column_mut(j).fill(0.0);
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub t: f64,
    /// `||M e^{-iAt} psi0||^2`.
    pub matrix_norm_in_d: f64,
    /// `||pi_bar e^{-iHt} psi0||^2`, the projected free evolution.
    pub projected_norm: f64,
    /// Free-evolution mass left of the detector.
    pub free_left_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteReport {
    pub n_points: usize,
    pub max_asymmetry: f64,
    pub norm_drift: f64,
    pub contrast: Vec<ContrastRow>,
    pub note: String,
}

pub const ARTIFACT_NOTE: &str = "The finite matrix M H M is symmetric, so exp(-iAt) is unitary and \
reflects the packet at the detector edge as a Dirichlet wall would. On the real line the projected \
Hamiltonian is not hermitian (see the boundary-term defect); the reflecting dynamics is an artifact \
of discretizing before projecting. Projected free evolution, not this matrix, is the intended dynamics.";

/// Build `A = M H_fd M`, evolve `psi0` with `exp(-iAt)` and tabulate it
/// against projected free evolution at each of `times`.
pub fn discrete_projected_hamiltonian(
    geom: &DetectorGeometry,
    psi0: &WaveFunction,
    times: &[f64],
) -> Result<(DMatrix<f64>, DiscreteReport)> {
    geom.grid().ensure_same(psi0.grid())?;
    let a = projected_fd_matrix(geom)?;
    let max_asymmetry = (&a - a.transpose()).iter().map(|x| x.abs()).fold(0.0, f64::max);

    // A vanishes outside D, so only the D block needs diagonalizing; the
    // detector block of the state is left untouched.
    let keep = geom.no_click();
    let idx: Vec<usize> = (0..a.nrows()).filter(|&j| keep.weights()[j]).collect();
    let block = DMatrix::from_fn(idx.len(), idx.len(), |r, c| a[(idx[r], idx[c])]);
    let eig = SymmetricEigen::new(block);
    if eig.eigenvectors.iter().any(|x| !x.is_finite()) {
        return Err(Error::Accuracy("eigendecomposition of M H M did not converge".into()));
    }
    let q = eig.eigenvectors.map(C64::from);
    let x0 = DVector::from_iterator(idx.len(), idx.iter().map(|&j| psi0.amplitudes()[j]));
    let coeff = q.adjoint() * &x0;
    let norm0 = keep.expectation(psi0);

    let mut contrast = Vec::with_capacity(times.len());
    let mut norm_drift: f64 = 0.0;
    for &t in times {
        let phased = DVector::from_iterator(
            coeff.len(),
            coeff
                .iter()
                .zip(eig.eigenvalues.iter())
                .map(|(c, &l)| c * C64::from_polar(1.0, -l * t / psi0.grid().hbar())),
        );
        let xt = &q * phased;
        let mut amps = psi0.amplitudes().to_vec();
        for (r, &j) in idx.iter().enumerate() {
            amps[j] = xt[r];
        }
        let evolved = WaveFunction::new(psi0.grid(), amps)?;
        let in_d = keep.expectation(&evolved);
        norm_drift = norm_drift.max((in_d - norm0).abs());
        let projected_norm = projected_evolution(psi0, geom, t)?.norm_sq();
        let free_left_mass = geom.mass_in(&step_free(psi0, t)?, Region::Left);
        contrast.push(ContrastRow {
            t,
            matrix_norm_in_d: in_d,
            projected_norm,
            free_left_mass,
        });
    }
    Ok((
        a,
        DiscreteReport {
            n_points: psi0.grid().len(),
            max_asymmetry,
            norm_drift,
            contrast,
            note: ARTIFACT_NOTE.to_string(),
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoSchrodingerReport {
    pub t: f64,
    pub time_step: f64,
    /// Max residual over cells at least two cells inside `D`.
    pub interior_residual: f64,
    /// Max residual over all of `D`, boundary cells included.
    pub full_residual: f64,
    pub interior_cells: usize,
}

/// Fourth-order five-point second difference at cell `j`, periodic.
fn second_difference(a: &[C64], j: usize, dx: f64) -> C64 {
    let n = a.len();
    let at = |o: isize| a[((j as isize + o).rem_euclid(n as isize)) as usize];
    (-(at(-2) + at(2)) + (at(-1) + at(1)) * 16.0 - at(0) * 30.0) / (12.0 * dx * dx)
}

/// Residual of `i hbar d/dt phi_bar = chi_D H phi_bar` for
/// `phi_bar = chi_D psi(t)`, with `psi` the exact free evolution.
///
/// `H` acts through a local five-point stencil so that cells two or more
/// cells inside `D` never see the mask edge; the time derivative is a
/// centered difference with step `h` (default `0.01 m dx^2 / hbar`).
pub fn pseudo_schrodinger_check(
    psi0: &WaveFunction,
    domain: &ProjectorMask,
    t: f64,
    h: Option<f64>,
) -> Result<PseudoSchrodingerReport> {
    domain.grid().ensure_same(psi0.grid())?;
    let grid = psi0.grid();
    let dx = grid.dx();
    let hbar = grid.hbar();
    let h = h.unwrap_or(0.01 * grid.mass() * dx * dx / hbar);
    if !(h > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {h}")));
    }
    let project = |tt: f64| -> Result<Vec<C64>> {
        let mut psi = step_free(psi0, tt)?;
        domain.apply(psi.amplitudes_mut());
        Ok(psi.into_amplitudes())
    };
    let now = project(t)?;
    let plus = project(t + h)?;
    let minus = project(t - h)?;
    let c = hbar * hbar / (2.0 * grid.mass());
    let w = domain.weights();
    let n = w.len();
    let inside = |j: usize, r: isize| (-r..=r).all(|o| w[((j as isize + o).rem_euclid(n as isize)) as usize]);

    let mut interior: f64 = 0.0;
    let mut full: f64 = 0.0;
    let mut cells = 0;
    for j in 0..n {
        if !w[j] {
            continue;
        }
        let h_phi = -c * second_difference(&now, j, dx);
        let dt_phi = C64::new(0.0, hbar) * (plus[j] - minus[j]) / (2.0 * h);
        let r = (h_phi - dt_phi).norm();
        full = full.max(r);
        if inside(j, 2) {
            interior = interior.max(r);
            cells += 1;
        }
    }
    Ok(PseudoSchrodingerReport {
        t,
        time_step: h,
        interior_residual: interior,
        full_residual: full,
        interior_cells: cells,
    })
}
