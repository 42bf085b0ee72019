//! Three-region detector geometry and the no-click collapse.
//!
//! Cells whose centers lie in the closed interval `[left, left + width]`
//! belong to the detector; everything to the left is `L`, everything to the
//! right is `R`. Masks are 0/1 per cell, so `pi + pi_bar = 1` holds exactly.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DensityMatrix, Grid, WaveFunction};

/// Norm below which the no-click branch counts as empty.
pub const CERTAIN_DETECTION_NORM: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Left,
    Detector,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorGeometry {
    grid: Grid,
    left: f64,
    width: f64,
    cells: Vec<Region>,
}

impl DetectorGeometry {
    /// Detector occupying `[0, width]`.
    pub fn new(grid: &Grid, width: f64) -> Result<Self> {
        Self::with_left_edge(grid, 0.0, width)
    }

    pub fn with_left_edge(grid: &Grid, left: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite() && left.is_finite()) {
            return Err(Error::Config(format!("detector width must be positive, got {width}")));
        }
        // absorbs rounding in x_min + j*dx for cells that sit on an edge
        let eps = 1e-9 * grid.dx();
        let right = left + width;
        let cells: Vec<Region> = grid
            .positions()
            .into_iter()
            .map(|x| {
                if x < left - eps {
                    Region::Left
                } else if x <= right + eps {
                    Region::Detector
                } else {
                    Region::Right
                }
            })
            .collect();
        if !cells.contains(&Region::Detector) {
            return Err(Error::Config(format!(
                "detector [{left}, {right}] contains no grid cell (dx = {})",
                grid.dx()
            )));
        }
        if cells.first() != Some(&Region::Left) {
            return Err(Error::Config("detector leaves no cells on its left".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            left,
            width,
            cells,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn left_edge(&self) -> f64 {
        self.left
    }
    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn regions(&self) -> &[Region] {
        &self.cells
    }
    pub fn region(&self, j: usize) -> Region {
        self.cells[j]
    }

    /// Last cell left of the detector: where densities "at 0-" are read.
    pub fn boundary_index(&self) -> usize {
        self.cells.iter().position(|r| *r != Region::Left).unwrap() - 1
    }

    pub fn mask(&self, regions: &[Region]) -> ProjectorMask {
        ProjectorMask {
            grid: self.grid.clone(),
            weights: self.cells.iter().map(|r| regions.contains(r)).collect(),
        }
    }

    /// `pi`: the click projector.
    pub fn click(&self) -> ProjectorMask {
        self.mask(&[Region::Detector])
    }

    /// `pi_bar = pi_bar_L + pi_bar_R`.
    pub fn no_click(&self) -> ProjectorMask {
        self.mask(&[Region::Left, Region::Right])
    }

    pub fn left(&self) -> ProjectorMask {
        self.mask(&[Region::Left])
    }

    pub fn mass_in(&self, psi: &WaveFunction, region: Region) -> f64 {
        psi.amplitudes()
            .iter()
            .zip(&self.cells)
            .filter(|(_, r)| **r == region)
            .map(|(z, _)| z.norm_sqr())
            .sum::<f64>()
            * self.grid.dx()
    }
}

/// Characteristic function of a set of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorMask {
    grid: Grid,
    weights: Vec<bool>,
}

impl ProjectorMask {
    pub fn from_cells(grid: &Grid, weights: Vec<bool>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidState(format!(
                "{} mask cells for a {}-point grid",
                weights.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            weights,
        })
    }

    pub fn identity(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            weights: vec![true; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn weights(&self) -> &[bool] {
        &self.weights
    }

    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            weights: self.weights.iter().map(|w| !w).collect(),
        }
    }

    /// Product of two masks (both applied).
    pub fn and(&self, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| *a && *b).collect(),
        })
    }

    pub fn apply(&self, amps: &mut [C64]) {
        for (z, &keep) in amps.iter_mut().zip(&self.weights) {
            if !keep {
                *z = C64::new(0.0, 0.0);
            }
        }
    }

    /// `sum_{j in mask} |psi_j|^2 dx`.
    pub fn expectation(&self, psi: &WaveFunction) -> f64 {
        psi.amplitudes()
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w)
            .map(|(z, _)| z.norm_sqr())
            .sum::<f64>()
            * self.grid.dx()
    }

    /// `pi rho pi`: zero the rows and columns outside the mask.
    pub fn apply_mixed(&self, rho: &mut DensityMatrix) {
        let m = rho.elements_mut();
        for (j, &keep) in self.weights.iter().enumerate() {
            if !keep {
                m.row_mut(j).fill(C64::new(0.0, 0.0));
                m.column_mut(j).fill(C64::new(0.0, 0.0));
            }
        }
    }

    pub fn expectation_mixed(&self, rho: &DensityMatrix) -> f64 {
        rho.elements()
            .diagonal()
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w)
            .map(|(z, _)| z.re)
            .sum::<f64>()
            * self.grid.dx()
    }
}

/// Cellwise multiply; the result is not renormalized.
pub fn project(mask: &ProjectorMask, psi: &WaveFunction) -> Result<WaveFunction> {
    mask.grid.ensure_same(psi.grid())?;
    let mut out = psi.clone();
    mask.apply(out.amplitudes_mut());
    Ok(out)
}

/// Outcome of a no-click measurement.
#[derive(Debug, Clone)]
pub struct NoClick<S> {
    /// Renormalized conditional state.
    pub state: S,
    /// Probability of the no-click outcome.
    pub survival: f64,
}

impl<S> NoClick<S> {
    pub fn log_survival(&self) -> f64 {
        self.survival.ln()
    }
}

/// `psi -> pi_bar psi / ||pi_bar psi||`.
pub fn collapse_no_click(geom: &DetectorGeometry, psi: &WaveFunction) -> Result<NoClick<WaveFunction>> {
    geom.grid.ensure_same(psi.grid())?;
    let total = psi.norm_sq();
    let mut state = project(&geom.no_click(), psi)?;
    let kept = state.norm_sq();
    if kept < CERTAIN_DETECTION_NORM {
        return Err(Error::CertainDetection { norm_sq: kept });
    }
    state.normalize()?;
    Ok(NoClick {
        state,
        survival: kept / total,
    })
}

/// `rho -> pi_bar rho pi_bar / Tr(pi_bar rho pi_bar)`.
pub fn collapse_no_click_mixed(
    geom: &DetectorGeometry,
    rho: &DensityMatrix,
) -> Result<NoClick<DensityMatrix>> {
    geom.grid.ensure_same(rho.grid())?;
    let total = rho.trace();
    let mut state = rho.clone();
    geom.no_click().apply_mixed(&mut state);
    let kept = state.trace();
    if kept < CERTAIN_DETECTION_NORM {
        return Err(Error::CertainDetection { norm_sq: kept });
    }
    state.normalize()?;
    Ok(NoClick {
        state,
        survival: kept / total,
    })
}
