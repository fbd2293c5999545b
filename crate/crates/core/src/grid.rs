use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic box `[-box/2, box/2)^d` sampled with `n` points per axis.
///
/// Sample `j` on an axis sits at coordinate `j * spacing` for `j < n/2` and
/// `(j - n) * spacing` otherwise, so the origin is flat index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridParams", into = "GridParams")]
pub struct Grid {
    d: usize,
    n: usize,
    box_len: f64,
    wavenumbers: Vec<f64>,
    derivative_wavenumbers: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridParams {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "box")]
    pub box_len: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, box_len: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidField {
                field: "d".into(),
                message: format!("spatial dimension {d} not in 1..=3"),
            });
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidField {
                field: "grid.n".into(),
                message: format!("{n} points per axis; need a power of two >= 8"),
            });
        }
        if !(box_len > 0.0 && box_len.is_finite()) {
            return Err(Error::InvalidField {
                field: "grid.box".into(),
                message: format!("box length {box_len} must be positive"),
            });
        }
        let wavenumbers: Vec<f64> = (0..n)
            .map(|j| 2.0 * PI * Self::frequency_of(j, n) as f64 / box_len)
            .collect();
        let mut derivative_wavenumbers = wavenumbers.clone();
        derivative_wavenumbers[n / 2] = 0.0;
        Ok(Self {
            d,
            n,
            box_len,
            wavenumbers,
            derivative_wavenumbers,
        })
    }

    /// Signed integer frequency stored at FFT slot `j`.
    pub fn frequency_of(j: usize, n: usize) -> i64 {
        if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    pub fn spacing(&self) -> f64 {
        self.box_len / self.n as f64
    }

    /// `spacing^d`, the quadrature weight of one sample.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis wavenumber table `2*pi*k/box` in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Wavenumbers used for odd derivatives: the unmatched Nyquist entry is zero.
    pub fn derivative_wavenumbers(&self) -> &[f64] {
        &self.derivative_wavenumbers
    }

    /// Splits a flat index into per-axis indices (axis 0 slowest).
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for axis in (0..self.d).rev() {
            idx[axis] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        Self::frequency_of(j, self.n) as f64 * self.spacing()
    }

    /// Physical coordinates of a flat sample index; unused axes are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.d {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    /// `|xi|^2` for a flat mode index.
    pub fn xi_squared(&self, flat: usize) -> f64 {
        let idx = self.unflatten(flat);
        (0..self.d).map(|a| self.wavenumbers[idx[a]].powi(2)).sum()
    }

    /// 2/3-rule mask: true when every axis frequency satisfies `3|k| < n`.
    pub fn dealias_keep(&self, flat: usize) -> bool {
        let idx = self.unflatten(flat);
        (0..self.d).all(|a| 3 * Self::frequency_of(idx[a], self.n).unsigned_abs() < self.n as u64)
    }

    pub fn max_xi_squared(&self) -> f64 {
        let k = PI * self.n as f64 / self.box_len;
        self.d as f64 * k * k
    }

    pub fn params(&self) -> GridParams {
        GridParams {
            d: self.d,
            n: self.n,
            box_len: self.box_len,
        }
    }
}

impl TryFrom<GridParams> for Grid {
    type Error = Error;

    fn try_from(p: GridParams) -> Result<Self> {
        Grid::new(p.d, p.n, p.box_len)
    }
}

impl From<Grid> for GridParams {
    fn from(g: Grid) -> Self {
        g.params()
    }
}
