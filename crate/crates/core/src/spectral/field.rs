use std::ops::{Add, Mul, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use super::fft;
use super::grid::TorusGrid;
use crate::error::{Error, Result};
use crate::par::pairwise_sum;

/// Real samples on a torus grid with lazily cached Fourier coefficients.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
    coeffs: OnceLock<Arc<Vec<Complex64>>>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self::from_vec_unchecked(grid, values))
    }

    pub(crate) fn from_vec_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        ScalarField {
            grid,
            values,
            coeffs: OnceLock::new(),
        }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self::from_vec_unchecked(grid, vec![c; grid.len()])
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..dim])).collect();
        Self::new(grid, values)
    }

    /// Builds the real field `Σ c_k e^{iξ·x}` (imaginary residue discarded).
    pub fn from_coeffs(grid: TorusGrid, coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a grid of {} points",
                coeffs.len(),
                grid.len()
            )));
        }
        Self::new(grid, fft::inverse(&grid, coeffs))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Normalized Fourier coefficients (computed once, then cached).
    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs
            .get_or_init(|| Arc::new(fft::forward(&self.grid, &self.values)))
            .as_slice()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_vec_unchecked(self.grid, self.values.iter().map(|v| v * s).collect())
    }

    pub fn check_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    /// `∫ u dx` by the grid rule.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    /// `∫ u v dx` by the grid rule.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.check_grid(other)?;
        let prods: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(pairwise_sum(&prods) * self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        (pairwise_sum(&sq) * self.grid.cell_volume()).sqrt()
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in field addition");
        ScalarField::from_vec_unchecked(
            self.grid,
            self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        )
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in field subtraction");
        ScalarField::from_vec_unchecked(
            self.grid,
            self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        )
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch in field product");
        ScalarField::from_vec_unchecked(
            self.grid,
            self.values.iter().zip(&rhs.values).map(|(a, b)| a * b).collect(),
        )
    }
}

/// `dim` scalar components on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::param("vector field needs at least one component"))?;
        for c in &components[1..] {
            first.check_grid(c)?;
        }
        if components.len() != first.grid().dim() {
            return Err(Error::GridMismatch(format!(
                "{} components on a {}-dimensional grid",
                components.len(),
                first.grid().dim()
            )));
        }
        Ok(VectorField { components })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        VectorField {
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let n = self.grid().len();
        let vals = (0..n)
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c.values()[i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        ScalarField::from_vec_unchecked(*self.grid(), vals)
    }

    pub fn l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitude().max_abs()
    }

    pub fn scale(&self, s: f64) -> Self {
        VectorField {
            components: self.components.iter().map(|c| c.scale(s)).collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.components[0].check_grid(&other.components[0])?;
        Ok(VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn map_components(
        &self,
        f: impl Fn(&ScalarField) -> Result<ScalarField>,
    ) -> Result<Self> {
        VectorField::new(self.components.iter().map(f).collect::<Result<Vec<_>>>()?)
    }
}
