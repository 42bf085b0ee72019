use arrival_core::chain::{run_chain, ChainConfig};
use arrival_core::detector::{collapse_no_click, DetectorGeometry, ProjectorMask};
use arrival_core::distribution::{distribution_from_w, solve_integral_equation, time_lattice};
use arrival_core::grid::{inner_product, purify, Grid, WaveFunction};
use arrival_core::propagators::{analytic_gaussian, step_free, GaussianSpec};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::new(-32.0, 32.0, 256).unwrap()
}

/// Sum of two Gaussians, well inside the grid and resolved.
fn state(g: &Grid, a: (f64, f64, f64), b: (f64, f64, f64), mix: f64) -> WaveFunction {
    let p = analytic_gaussian(g, &GaussianSpec::new(a.0, a.1, a.2), 0.0).unwrap();
    let q = analytic_gaussian(g, &GaussianSpec::new(b.0, b.1, b.2), 0.0).unwrap();
    let amps = p
        .amplitudes()
        .iter()
        .zip(q.amplitudes())
        .map(|(x, y)| x + y * C64::from_polar(1.0, mix))
        .collect();
    WaveFunction::new(g, amps).unwrap().normalized().unwrap()
}

fn packet() -> impl Strategy<Value = (f64, f64, f64)> {
    (-10.0..10.0f64, 1.0..3.0f64, -2.0..2.0f64)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval(a in packet(), b in packet(), mix in 0.0..6.28f64) {
        let psi = state(&grid(), a, b, mix);
        prop_assert!((psi.momentum_norm_sq() - psi.norm_sq()).abs() <= 1e-12);
    }

    #[test]
    fn inner_product_is_conjugate_symmetric(a in packet(), b in packet(), c in packet(), d in packet()) {
        let g = grid();
        let phi = state(&g, a, b, 0.3);
        let psi = state(&g, c, d, 1.1);
        let x = inner_product(&phi, &psi).unwrap();
        let y = inner_product(&psi, &phi).unwrap();
        prop_assert!((x - y.conj()).norm() <= 1e-14);
    }

    #[test]
    fn free_steps_are_unitary_and_compose(a in packet(), b in packet(), t1 in 0.0..5.0f64, t2 in 0.0..5.0f64) {
        let psi = state(&grid(), a, b, 0.7);
        let one = step_free(&step_free(&psi, t1).unwrap(), t2).unwrap();
        let both = step_free(&psi, t1 + t2).unwrap();
        prop_assert!(max_diff(one.amplitudes(), both.amplitudes()) <= 1e-12);
        prop_assert!((both.norm_sq() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn masks_are_idempotent_with_exact_complements(bits in proptest::collection::vec(any::<bool>(), 256), a in packet()) {
        let g = grid();
        let m = ProjectorMask::from_cells(&g, bits).unwrap();
        let psi = state(&g, a, a, 0.0);
        let mut once = psi.amplitudes().to_vec();
        m.apply(&mut once);
        let mut twice = once.clone();
        m.apply(&mut twice);
        prop_assert_eq!(&once, &twice);
        let mut rest = psi.amplitudes().to_vec();
        m.complement().apply(&mut rest);
        let sum: Vec<C64> = once.iter().zip(&rest).map(|(x, y)| x + y).collect();
        prop_assert_eq!(&sum[..], psi.amplitudes());
        prop_assert!((m.expectation(&psi) + m.complement().expectation(&psi) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn no_click_collapse_fixes_left_supported_states(x0 in -40.0..-18.0f64, s in 1.0..1.5f64, k in -1.0..1.0f64) {
        let g = Grid::new(-64.0, 64.0, 512).unwrap();
        let geom = DetectorGeometry::new(&g, 8.0).unwrap();
        let psi = analytic_gaussian(&g, &GaussianSpec::new(x0, s, k), 0.0).unwrap();
        let out = collapse_no_click(&geom, &psi).unwrap();
        prop_assert!(max_diff(out.state.amplitudes(), psi.amplitudes()) <= 1e-12);
        prop_assert!((out.survival - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn purified_state_has_the_density_on_its_diagonal(a in packet(), b in packet()) {
        let psi = state(&grid(), a, b, 2.0);
        let rho = purify(&psi).unwrap();
        let diag = rho.diagonal_density();
        let dens = psi.density();
        prop_assert!(diag.iter().zip(&dens).all(|(x, y)| (x - y).abs() <= 1e-14));
        prop_assert!(rho.hermiticity_error() <= 1e-15);
    }

    #[test]
    fn formulas_agree_on_smooth_rates(amp in 0.05..2.0f64, c in 2.0..8.0f64, width in 0.5..3.0f64) {
        let times = time_lattice(0.0, 1e-3, 10_000);
        let w: Vec<f64> = times.iter().map(|t| amp * (-((t - c) / width).powi(2)).exp()).collect();
        let a = distribution_from_w(&times, &w).unwrap();
        let b = solve_integral_equation(&times, &w).unwrap();
        let top = a.density.iter().cloned().fold(0.0, f64::max);
        let gap = a.density.iter().zip(&b.density).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-6 * top, "{}", gap / top);
    }

    #[test]
    fn survival_never_increases(x0 in -15.5..-14.5f64, k0 in 3.0..3.1f64, dt in 0.5..0.52f64) {
        let g = Grid::new(-64.0, 64.0, 256).unwrap();
        let geom = DetectorGeometry::new(&g, 10.0).unwrap();
        let psi = analytic_gaussian(&g, &GaussianSpec::new(x0, 3.0, k0), 0.0).unwrap();
        let rec = run_chain(&psi, &geom, &ChainConfig::new(dt, 20)).unwrap();
        prop_assert!(rec.survival.windows(2).all(|s| s[1] <= s[0]));
        prop_assert!(rec.p.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
