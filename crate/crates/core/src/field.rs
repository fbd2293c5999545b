use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// `ncomp` real components sampled on a grid, component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    ncomp: usize,
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSample {
    pub value: f64,
    /// Flat grid index of the first minimizing sample.
    pub location: usize,
}

impl Field {
    pub fn new(grid: Grid, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if ncomp == 0 {
            return Err(Error::ShapeMismatch("field needs at least one component".into()));
        }
        let expected = ncomp * grid.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "field samples".into(),
                expected,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("field contains non-finite samples".into()));
        }
        Ok(Self { grid, ncomp, values })
    }

    pub fn zeros(grid: &Grid, ncomp: usize) -> Self {
        Self {
            grid: grid.clone(),
            ncomp,
            values: vec![0.0; ncomp * grid.len()],
        }
    }

    /// Samples `f(x)` into component `k`, leaving others untouched.
    pub fn fill_component(&mut self, k: usize, f: impl Fn([f64; 3]) -> f64) {
        let len = self.grid.len();
        for i in 0..len {
            let x = self.grid.point(i);
            self.values[k * len + i] = f(x);
        }
    }

    pub fn from_fn(grid: &Grid, ncomp: usize, f: impl Fn(usize, [f64; 3]) -> f64) -> Self {
        let mut field = Self::zeros(grid, ncomp);
        for k in 0..ncomp {
            field.fill_component(k, |x| f(k, x));
        }
        field
    }

    /// Stacks single-component fields sharing one grid.
    pub fn stack(parts: &[Field]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::ShapeMismatch("nothing to stack".into()))?;
        let mut values = Vec::new();
        let mut ncomp = 0;
        for p in parts {
            if p.grid != first.grid {
                return Err(Error::ShapeMismatch("stacked fields live on different grids".into()));
            }
            values.extend_from_slice(&p.values);
            ncomp += p.ncomp;
        }
        Self::new(first.grid.clone(), ncomp, values)
    }

    pub(crate) fn from_raw(grid: Grid, ncomp: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), ncomp * grid.len());
        Self { grid, ncomp, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, k: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[k * len..(k + 1) * len]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut [f64] {
        let len = self.grid.len();
        &mut self.values[k * len..(k + 1) * len]
    }

    /// Value of component `k` at the origin (flat index 0).
    pub fn at_origin(&self, k: usize) -> f64 {
        self.component(k)[0]
    }

    fn check_same_shape(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("fields live on different grids".into()));
        }
        if self.ncomp != other.ncomp {
            return Err(Error::DimensionMismatch {
                context: "field components".into(),
                expected: self.ncomp,
                found: other.ncomp,
            });
        }
        Ok(())
    }

    fn check_component(&self, k: usize) -> Result<()> {
        if k >= self.ncomp {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.ncomp,
            });
        }
        Ok(())
    }

    /// Riemann sum `Σ_k Σ_x f_k g_k h^d`, accumulated sequentially in index order.
    pub fn inner_product(&self, other: &Field) -> Result<f64> {
        self.check_same_shape(other)?;
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(sum * self.grid.cell_volume())
    }

    /// Minimum of component `k` (zero-based); ties go to the smallest flat index.
    pub fn min_component_value(&self, k: usize) -> Result<MinSample> {
        self.check_component(k)?;
        let mut best = MinSample {
            value: f64::INFINITY,
            location: 0,
        };
        for (i, &v) in self.component(k).iter().enumerate() {
            if v < best.value {
                best = MinSample { value: v, location: i };
            }
        }
        Ok(best)
    }

    /// `∫ u_k dx` by the Riemann sum.
    pub fn mass(&self, k: usize) -> Result<f64> {
        self.check_component(k)?;
        Ok(self.component(k).iter().sum::<f64>() * self.grid.cell_volume())
    }

    /// `‖u_k‖_{L²}`.
    pub fn l2_norm(&self, k: usize) -> Result<f64> {
        self.check_component(k)?;
        let s: f64 = self.component(k).iter().map(|v| v * v).sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self::from_raw(self.grid.clone(), self.ncomp, values))
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }
}
