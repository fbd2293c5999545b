//! Fourier representation on the periodic grid and the linear symbol
//! `M(ξ) = −|ξ|⁶ A + i Σⱼ ξⱼ Γʲ (− L)`.
//!
//! Layout: a [`SpectrumField`] stores the full complex DFT of every component
//! in FFT order (the same flat ordering as [`Field`]). The forward transform is
//! unnormalized, the inverse divides by `n^d`, so `coeffs[0] / n^d` is the
//! mean of the component.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::expm::expm;
use crate::field::Field;
use crate::grid::Grid;
use crate::matrix::MatrixN;
use crate::system::{ReactionSpec, SystemSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumField {
    grid: Grid,
    ncomp: usize,
    coeffs: Vec<Complex64>,
}

impl SpectrumField {
    pub fn new(grid: Grid, ncomp: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != ncomp * grid.len() {
            return Err(Error::DimensionMismatch {
                context: "spectrum coefficients".into(),
                expected: ncomp * grid.len(),
                found: coeffs.len(),
            });
        }
        Ok(Self { grid, ncomp, coeffs })
    }

    pub fn zeros(grid: &Grid, ncomp: usize) -> Self {
        Self {
            grid: grid.clone(),
            ncomp,
            coeffs: vec![ZERO; ncomp * grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn component(&self, k: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[k * len..(k + 1) * len]
    }

    /// Flat index of the mode `-ξ` for the mode at `flat`.
    pub fn mirror_index(grid: &Grid, flat: usize) -> usize {
        let n = grid.n();
        let idx = grid.unflatten(flat);
        (0..grid.d()).fold(0, |acc, a| acc * n + (n - idx[a]) % n)
    }

    /// Largest `|c(−ξ) − conj(c(ξ))|` relative to the largest coefficient.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let len = self.grid.len();
        let scale = self.coeffs.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for k in 0..self.ncomp {
            let c = self.component(k);
            for i in 0..len {
                let j = Self::mirror_index(&self.grid, i);
                worst = worst.max((c[j] - c[i].conj()).norm());
            }
        }
        worst / scale
    }

    /// `Σ |c|² · box^d / n^{2d}`, which equals `‖u‖²` of the inverse transform.
    pub fn parseval_energy(&self) -> f64 {
        let len = self.grid.len() as f64;
        let vol = self.grid.box_len().powi(self.grid.d() as i32);
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() * vol / (len * len)
    }

    fn check_matrix(&self, m: &MatrixN, what: &str) -> Result<()> {
        if m.n() != self.ncomp {
            return Err(Error::DimensionMismatch {
                context: format!("{what} side vs spectrum components"),
                expected: self.ncomp,
                found: m.n(),
            });
        }
        Ok(())
    }
}

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let mut cache = CACHE
        .get_or_init(|| Mutex::new(HashMap::new()))
        .lock()
        .expect("fft plan cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// In-place multidimensional FFT of one component block.
fn transform_block(block: &mut [Complex64], grid: &Grid, fft: &Arc<dyn Fft<f64>>, exec: Exec) {
    let n = grid.n();
    let d = grid.d();
    let len = block.len();
    let lines_per_task = (4096 / n).max(1);
    let run_lines = |_: usize, lines: &mut [Complex64]| {
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        for line in lines.chunks_mut(n) {
            fft.process_with_scratch(line, &mut scratch);
        }
    };
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            exec.for_each_chunk(block, n * lines_per_task, run_lines);
            continue;
        }
        // gather lines of this axis contiguously, transform, scatter back
        let mut buf = vec![ZERO; len];
        {
            let src: &[Complex64] = block;
            exec.for_each_chunk(&mut buf, n, |line, out| {
                let outer = line / stride;
                let inner = line % stride;
                let base = outer * n * stride + inner;
                for (j, o) in out.iter_mut().enumerate() {
                    *o = src[base + j * stride];
                }
            });
        }
        exec.for_each_chunk(&mut buf, n * lines_per_task, run_lines);
        let src: &[Complex64] = &buf;
        exec.for_each_chunk(block, n * stride, |outer, out| {
            for j in 0..n {
                for inner in 0..stride {
                    out[j * stride + inner] = src[(outer * stride + inner) * n + j];
                }
            }
        });
    }
}

pub fn forward(u: &Field) -> SpectrumField {
    forward_with(u, Exec::default())
}

pub fn forward_with(u: &Field, exec: Exec) -> SpectrumField {
    let grid = u.grid().clone();
    let len = grid.len();
    let (fwd, _) = plans(grid.n());
    let mut coeffs: Vec<Complex64> = u.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for block in coeffs.chunks_mut(len) {
        transform_block(block, &grid, &fwd, exec);
    }
    SpectrumField {
        grid,
        ncomp: u.ncomp(),
        coeffs,
    }
}

/// Inverse transform; the imaginary residue of a real-field spectrum is dropped.
pub fn inverse(s: &SpectrumField) -> Field {
    inverse_with(s, Exec::default())
}

pub fn inverse_with(s: &SpectrumField, exec: Exec) -> Field {
    let len = s.grid.len();
    let (_, inv) = plans(s.grid.n());
    let mut work = s.coeffs.clone();
    for block in work.chunks_mut(len) {
        transform_block(block, &s.grid, &inv, exec);
    }
    let scale = 1.0 / len as f64;
    let values = work.iter().map(|z| z.re * scale).collect();
    Field::from_raw(s.grid.clone(), s.ncomp, values)
}

/// `out(ξ) = −|ξ|⁶ A s(ξ)`.
pub fn apply_laplacian_cubed(s: &SpectrumField, a: &MatrixN) -> Result<SpectrumField> {
    s.check_matrix(a, "A")?;
    let grid = &s.grid;
    let len = grid.len();
    let nc = s.ncomp;
    let mut out = SpectrumField::zeros(grid, nc);
    for i in 0..len {
        let q = grid.xi_squared(i);
        let mult = -(q * q * q);
        for k in 0..nc {
            let mut acc = ZERO;
            for j in 0..nc {
                acc += s.coeffs[j * len + i] * a.get(k, j);
            }
            out.coeffs[k * len + i] = acc * mult;
        }
    }
    Ok(out)
}

/// `out(ξ) = i Σⱼ ξⱼ Γʲ s(ξ)` with the Nyquist derivative multiplier set to zero.
pub fn apply_transport(s: &SpectrumField, gammas: &[MatrixN]) -> Result<SpectrumField> {
    let grid = &s.grid;
    if gammas.len() != grid.d() {
        return Err(Error::DimensionMismatch {
            context: "transport matrices vs spatial dimension".into(),
            expected: grid.d(),
            found: gammas.len(),
        });
    }
    for g in gammas {
        s.check_matrix(g, "Gamma")?;
    }
    let len = grid.len();
    let nc = s.ncomp;
    let kd = grid.derivative_wavenumbers();
    let mut out = SpectrumField::zeros(grid, nc);
    for i in 0..len {
        let idx = grid.unflatten(i);
        for k in 0..nc {
            let mut acc = ZERO;
            for (axis, g) in gammas.iter().enumerate() {
                let xi = kd[idx[axis]];
                if xi == 0.0 {
                    continue;
                }
                for j in 0..nc {
                    acc += s.coeffs[j * len + i] * (g.get(k, j) * xi);
                }
            }
            out.coeffs[k * len + i] = acc * I;
        }
    }
    Ok(out)
}

/// Per-mode `exp(dt · M(ξ))`, stored row-major per mode.
#[derive(Clone, Debug)]
pub struct ModePropagator {
    grid: Grid,
    ncomp: usize,
    dt: f64,
    exps: Vec<Complex64>,
}

impl ModePropagator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Row-major `N×N` block for a flat mode index.
    pub fn mode(&self, flat: usize) -> &[Complex64] {
        let nn = self.ncomp * self.ncomp;
        &self.exps[flat * nn..(flat + 1) * nn]
    }

    pub fn mode_matrix(&self, flat: usize) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.ncomp, self.ncomp, self.mode(flat))
    }

    /// Applies the per-mode matrices to a spectrum.
    pub fn apply(&self, s: &SpectrumField) -> Result<SpectrumField> {
        self.apply_with(s, Exec::default())
    }

    pub fn apply_with(&self, s: &SpectrumField, exec: Exec) -> Result<SpectrumField> {
        if s.grid != self.grid || s.ncomp != self.ncomp {
            return Err(Error::ShapeMismatch(
                "propagator and spectrum differ in grid or component count".into(),
            ));
        }
        let len = self.grid.len();
        let nc = self.ncomp;
        let nn = nc * nc;
        // mode-major scratch keeps each task's writes contiguous
        let mut modal = vec![ZERO; len * nc];
        exec.for_each_chunk(&mut modal, nc * 1024, |chunk, out| {
            let first = chunk * 1024;
            for (off, slot) in out.chunks_mut(nc).enumerate() {
                let i = first + off;
                let m = &self.exps[i * nn..(i + 1) * nn];
                for k in 0..nc {
                    let mut acc = ZERO;
                    for j in 0..nc {
                        acc += m[k * nc + j] * s.coeffs[j * len + i];
                    }
                    slot[k] = acc;
                }
            }
        });
        let mut coeffs = vec![ZERO; len * nc];
        for k in 0..nc {
            for i in 0..len {
                coeffs[k * len + i] = modal[i * nc + k];
            }
        }
        Ok(SpectrumField {
            grid: self.grid.clone(),
            ncomp: nc,
            coeffs,
        })
    }
}

/// The symbol `M(ξ)` at one flat mode index.
pub fn mode_symbol(
    spec: &SystemSpec,
    grid: &Grid,
    flat: usize,
    include_linear_reaction: bool,
) -> DMatrix<Complex64> {
    let nc = spec.ncomp();
    let q = grid.xi_squared(flat);
    let q3 = q * q * q;
    let idx = grid.unflatten(flat);
    let kd = grid.derivative_wavenumbers();
    let l = match (include_linear_reaction, spec.reaction()) {
        (true, ReactionSpec::Linear { l }) => Some(l),
        _ => None,
    };
    DMatrix::from_fn(nc, nc, |k, j| {
        let mut z = Complex64::new(-q3 * spec.a().get(k, j), 0.0);
        for (axis, g) in spec.gammas().iter().enumerate() {
            z.im += kd[idx[axis]] * g.get(k, j);
        }
        if let Some(l) = l {
            z.re -= l.get(k, j);
        }
        z
    })
}

pub fn build_propagator(
    spec: &SystemSpec,
    grid: &Grid,
    dt: f64,
    include_linear_reaction: bool,
) -> Result<ModePropagator> {
    build_propagator_with(spec, grid, dt, include_linear_reaction, Exec::default())
}

pub fn build_propagator_with(
    spec: &SystemSpec,
    grid: &Grid,
    dt: f64,
    include_linear_reaction: bool,
    exec: Exec,
) -> Result<ModePropagator> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::Precondition(format!("time step {dt} must be finite and >= 0")));
    }
    if grid.d() != spec.d() {
        return Err(Error::DimensionMismatch {
            context: "grid dimension vs system dimension".into(),
            expected: spec.d(),
            found: grid.d(),
        });
    }
    let nc = spec.ncomp();
    let nn = nc * nc;
    let len = grid.len();
    let per_task = 256;
    let mut exps = vec![ZERO; len * nn];
    let failed = Mutex::new(None::<usize>);
    exec.for_each_chunk(&mut exps, nn * per_task, |chunk, out| {
        for (off, slot) in out.chunks_mut(nn).enumerate() {
            let i = chunk * per_task + off;
            let m = mode_symbol(spec, grid, i, include_linear_reaction) * Complex64::new(dt, 0.0);
            match expm(&m) {
                Some(e) => {
                    for k in 0..nc {
                        for j in 0..nc {
                            slot[k * nc + j] = e[(k, j)];
                        }
                    }
                }
                None => {
                    let mut f = failed.lock().expect("poisoned");
                    *f = Some(f.map_or(i, |prev: usize| prev.min(i)));
                }
            }
        }
    });
    if let Some(mode) = failed.into_inner().expect("poisoned") {
        return Err(Error::PropagatorOverflow { mode });
    }
    Ok(ModePropagator {
        grid: grid.clone(),
        ncomp: nc,
        dt,
        exps,
    })
}
