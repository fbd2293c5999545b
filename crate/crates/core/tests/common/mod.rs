//! Independent reference routines shared by the integration tests.
//!
//! Nothing here calls into the crate's transforms, symbols or exponentials:
//! the DFT is the O(n²) sum, the symbol is rebuilt from the matrices, and
//! the matrix exponential goes through a Schur form with the Parlett
//! recurrence.
#![allow(dead_code)]

use std::f64::consts::PI;

use cubelap::{Field, Grid, MatrixN, ReactionSpec, SystemSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Signed integer frequency at slot `j`.
pub fn freq(j: usize, n: usize) -> f64 {
    if j < n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

fn unflatten(mut flat: usize, d: usize, n: usize) -> [usize; 3] {
    let mut idx = [0; 3];
    for a in (0..d).rev() {
        idx[a] = flat % n;
        flat /= n;
    }
    idx
}

/// Direct DFT applied axis by axis (O(n) sum per output), `sign = −1`
/// forward, `+1` inverse, unscaled.
pub fn naive_dft(data: &[C], d: usize, n: usize, sign: f64) -> Vec<C> {
    let twiddle: Vec<C> = (0..n).map(|m| C::from_polar(1.0, sign * 2.0 * PI * m as f64 / n as f64)).collect();
    let mut cur = data.to_vec();
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let mut next = vec![c(0.0, 0.0); cur.len()];
        for (flat, out) in next.iter_mut().enumerate() {
            let k = unflatten(flat, d, n)[axis];
            let base = flat - k * stride;
            *out = (0..n).map(|x| cur[base + x * stride] * twiddle[(k * x) % n]).sum();
        }
        cur = next;
    }
    cur
}

/// Wavenumber vector of a flat mode; the Nyquist slot's odd-derivative
/// multiplier is zero, its even one is kept.
pub fn wavevector(grid: &Grid, flat: usize) -> ([f64; 3], [f64; 3]) {
    let n = grid.n();
    let idx = unflatten(flat, grid.d(), n);
    let mut even = [0.0; 3];
    let mut odd = [0.0; 3];
    for a in 0..grid.d() {
        let k = 2.0 * PI * freq(idx[a], n) / grid.box_len();
        even[a] = k;
        odd[a] = if idx[a] == n / 2 { 0.0 } else { k };
    }
    (even, odd)
}

/// `−|ξ|⁶ A + i Σ ξ_j Γʲ − L`.
pub fn symbol(spec: &SystemSpec, grid: &Grid, flat: usize) -> DMatrix<C> {
    let (even, odd) = wavevector(grid, flat);
    let q: f64 = even.iter().map(|k| k * k).sum();
    let q6 = q.powi(3);
    let nc = spec.ncomp();
    DMatrix::from_fn(nc, nc, |k, j| {
        let mut z = c(-q6 * spec.a().get(k, j), 0.0);
        for (a, g) in spec.gammas().iter().enumerate() {
            z.im += odd[a] * g.get(k, j);
        }
        if let ReactionSpec::Linear { l } = spec.reaction() {
            z.re -= l.get(k, j);
        }
        z
    })
}

/// `(e^b − e^a)/(b − a)` without cancellation.
fn exp_divided_difference(a: C, b: C) -> C {
    let z = (b - a) * 0.5;
    if z.norm() > 0.5 {
        (b.exp() - a.exp()) / (b - a)
    } else {
        // e^{(a+b)/2} sinh(z)/z
        let z2 = z * z;
        let mut term = c(1.0, 0.0);
        let mut sum = term;
        for m in 1..20 {
            term = term * z2 / ((2 * m) as f64 * (2 * m + 1) as f64);
            sum += term;
        }
        ((a + b) * 0.5).exp() * sum
    }
}

/// `exp(m)` via complex Schur form `m = Q T Q*` and Parlett's recurrence on `T`.
pub fn expm_schur(m: &DMatrix<C>) -> DMatrix<C> {
    let n = m.nrows();
    if m.iter().all(|z| z.norm() == 0.0) {
        return DMatrix::identity(n, n);
    }
    let (q, t) = m.clone().schur().unpack();
    let mut f = DMatrix::<C>::zeros(n, n);
    for i in 0..n {
        f[(i, i)] = t[(i, i)].exp();
    }
    for p in 1..n {
        for i in 0..n - p {
            let j = i + p;
            let (li, lj) = (t[(i, i)], t[(j, j)]);
            let mut v = t[(i, j)] * exp_divided_difference(li, lj);
            let mut s = c(0.0, 0.0);
            for k in i + 1..j {
                s += t[(i, k)] * f[(k, j)] - f[(i, k)] * t[(k, j)];
            }
            if s.norm() != 0.0 {
                v += s / (lj - li);
            }
            f[(i, j)] = v;
        }
    }
    &q * f * q.adjoint()
}

/// One exact step `u ↦ IDFT(exp(dt M(ξ)) DFT(u))` using only the references above.
pub fn oracle_step(spec: &SystemSpec, u: &Field, dt: f64) -> Field {
    let grid = u.grid();
    let (d, n, len, nc) = (grid.d(), grid.n(), grid.len(), u.ncomp());
    let hats: Vec<Vec<C>> = (0..nc)
        .map(|k| {
            let data: Vec<C> = u.component(k).iter().map(|&v| c(v, 0.0)).collect();
            naive_dft(&data, d, n, -1.0)
        })
        .collect();
    let mut out = vec![vec![c(0.0, 0.0); len]; nc];
    for i in 0..len {
        let e = expm_schur(&(symbol(spec, grid, i) * c(dt, 0.0)));
        for k in 0..nc {
            out[k][i] = (0..nc).map(|j| e[(k, j)] * hats[j][i]).sum();
        }
    }
    let mut values = Vec::with_capacity(len * nc);
    for o in out {
        values.extend(naive_dft(&o, d, n, 1.0).iter().map(|z| z.re / len as f64));
    }
    Field::new(grid.clone(), nc, values).unwrap()
}

/// `A = B Bᵀ + 0.2 I + K` with `K` skew, so `A + Aᵀ` is positive definite.
pub fn random_coercive(rng: &mut impl Rng, n: usize) -> MatrixN {
    let b = random_matrix(rng, n, 1.0);
    let k = random_matrix(rng, n, 1.0);
    let mut m = MatrixN::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let sym: f64 = (0..n).map(|l| b.get(i, l) * b.get(j, l)).sum();
            let diag = if i == j { 0.2 } else { 0.0 };
            m.set(i, j, sym + diag + k.get(i, j) - k.get(j, i));
        }
    }
    m
}

pub fn random_matrix(rng: &mut impl Rng, n: usize, scale: f64) -> MatrixN {
    MatrixN::new(n, (0..n * n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize, scale: f64) -> MatrixN {
    let mut m = random_matrix(rng, n, scale);
    for i in 0..n {
        for j in 0..i {
            let v = m.get(j, i);
            m.set(i, j, v);
        }
    }
    m
}

/// Sum of a few low harmonics plus an offset, so data is smooth and resolved.
pub fn random_smooth_field(rng: &mut impl Rng, grid: &Grid, ncomp: usize, offset: f64) -> Field {
    let d = grid.d();
    let l = grid.box_len();
    let modes: Vec<Vec<([i32; 3], f64, f64)>> = (0..ncomp)
        .map(|_| {
            (0..4)
                .map(|_| {
                    let mut k = [0; 3];
                    for a in k.iter_mut().take(d) {
                        *a = rng.random_range(-3..=3);
                    }
                    (k, rng.random_range(-0.5..0.5), rng.random_range(0.0..2.0 * PI))
                })
                .collect()
        })
        .collect();
    Field::from_fn(grid, ncomp, |comp, x| {
        offset
            + modes[comp]
                .iter()
                .map(|(k, amp, ph)| {
                    let arg: f64 = (0..d).map(|a| 2.0 * PI * k[a] as f64 * x[a] / l).sum();
                    amp * (arg + ph).cos()
                })
                .sum::<f64>()
    })
}
