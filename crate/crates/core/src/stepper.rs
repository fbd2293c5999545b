//! Time integration.
//!
//! Zero and linear reactions are advanced exactly by the mode propagator
//! (the linear reaction is folded into the symbol). Polynomial reactions use
//! the integrating-factor RK4 scheme: the stiff linear part is propagated
//! exactly with `exp(dt M)` and `exp(dt M / 2)`, and RK4 is applied to the
//! transformed nonlinearity. With the 2/3 rule on, modes with `3|k| >= n` on
//! any axis are dropped from each reaction evaluation.
//!
//! ETDRK4 would be the natural alternative for the nonlinear case; the
//! integrating factor keeps the linear cases exact without phi-functions.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::Field;
use crate::grid::Grid;
use crate::spectral::{build_propagator_with, forward_with, inverse_with, ModePropagator, SpectrumField};
use crate::system::{ReactionSpec, SystemSpec};

/// Any sample above this magnitude (or non-finite) counts as blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Largest admissible `dt · max|ξ|⁶ · ‖A‖` for the default step.
pub const DEFAULT_STIFFNESS_BUDGET: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub min: bool,
    pub mass: bool,
    pub l2: bool,
}

impl Default for Record {
    fn default() -> Self {
        Self {
            min: true,
            mass: true,
            l2: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t_end: f64,
    pub dt: f64,
    pub output_stride: usize,
    /// `None` means on for polynomial reactions.
    pub dealias: Option<bool>,
    pub record: Record,
}

impl RunConfig {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            output_stride: 1,
            dealias: None,
            record: Record::default(),
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.output_stride = stride;
        self
    }

    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = Some(on);
        self
    }

    /// Number of steps, after checking `0 < dt <= t_end` and integrality.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite() && self.t_end.is_finite()) {
            return Err(Error::InvalidField {
                field: "dt".into(),
                message: format!("time step {} must be positive", self.dt),
            });
        }
        if self.dt > self.t_end {
            return Err(Error::InvalidField {
                field: "dt".into(),
                message: format!("time step {} exceeds t_end {}", self.dt, self.t_end),
            });
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidField {
                field: "output_stride".into(),
                message: "must be at least 1".into(),
            });
        }
        let ratio = self.t_end / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidField {
                field: "dt".into(),
                message: format!("t_end / dt = {ratio} is not an integer step count"),
            });
        }
        Ok(steps as usize)
    }

    /// Largest step keeping `dt · max|ξ|⁶ · ‖A‖_F` within the stiffness budget.
    pub fn default_dt(spec: &SystemSpec, grid: &Grid) -> f64 {
        let q = grid.max_xi_squared();
        DEFAULT_STIFFNESS_BUDGET / (q * q * q * spec.a().frobenius_norm())
    }

    /// Splits `t_end` into whole steps no longer than `dt_max`.
    pub fn fitted(t_end: f64, dt_max: f64) -> Self {
        let steps = (t_end / dt_max).ceil().max(1.0);
        Self::new(t_end, t_end / steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentDiagnostics {
    pub min: f64,
    pub argmin_index: usize,
    pub mass: f64,
    pub l2norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub step: usize,
    pub t: f64,
    pub components: Vec<ComponentDiagnostics>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowUp {
    /// Step at which the state left the finite range.
    pub step: usize,
    pub t: f64,
    pub last_finite_step: usize,
}

#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub records: Vec<DiagnosticRecord>,
    /// Last finite state.
    pub final_state: Field,
    pub final_t: f64,
    pub blow_up: Option<BlowUp>,
}

impl TimeSeries {
    pub const CSV_HEADER: &'static str = "t,component,min,argmin_index,mass,l2norm";

    /// One row per record and component; components are 1-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            for (k, c) in r.components.iter().enumerate() {
                writeln!(
                    w,
                    "{:e},{},{:e},{},{:e},{:e}",
                    r.t,
                    k + 1,
                    c.min,
                    c.argmin_index,
                    c.mass,
                    c.l2norm
                )?;
            }
        }
        Ok(())
    }

    /// Time of the first record where component `k` dips below zero.
    pub fn first_negative_time(&self, k: usize) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.components[k].min < 0.0)
            .map(|r| r.t)
    }
}

/// Final-state dump: small header plus the flat sample array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "box")]
    pub box_len: f64,
    #[serde(rename = "N")]
    pub ncomp: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

impl StateDump {
    pub fn from_field(u: &Field, t: f64) -> Self {
        Self {
            d: u.grid().d(),
            n: u.grid().n(),
            box_len: u.grid().box_len(),
            ncomp: u.ncomp(),
            t,
            values: u.values().to_vec(),
        }
    }

    pub fn to_field(&self) -> Result<Field> {
        Field::new(Grid::new(self.d, self.n, self.box_len)?, self.ncomp, self.values.clone())
    }
}

/// Exact linear step: `out(ξ) = exp(dt M(ξ)) s(ξ)`.
pub fn step_linear(s: &SpectrumField, propagator: &ModePropagator) -> Result<SpectrumField> {
    propagator.apply(s)
}

/// Pointwise `F(u)`.
pub fn evaluate_reaction(u: &Field, reaction: &ReactionSpec) -> Result<Field> {
    evaluate_reaction_with(u, reaction, Exec::default())
}

pub fn evaluate_reaction_with(u: &Field, reaction: &ReactionSpec, exec: Exec) -> Result<Field> {
    let nc = u.ncomp();
    reaction.validate(nc)?;
    let len = u.grid().len();
    if reaction.is_zero() {
        return Ok(Field::zeros(u.grid(), nc));
    }
    let vals = u.values();
    let mut modal = vec![0.0; len * nc];
    exec.for_each_chunk(&mut modal, nc * 1024, |chunk, out| {
        let mut s = vec![0.0; nc];
        for (off, slot) in out.chunks_mut(nc).enumerate() {
            let i = chunk * 1024 + off;
            for (k, sk) in s.iter_mut().enumerate() {
                *sk = vals[k * len + i];
            }
            reaction.eval(&s, slot);
        }
    });
    if let Some(bad) = modal.iter().position(|v| !v.is_finite()) {
        return Err(Error::ReactionOverflow { sample: bad / nc });
    }
    let mut values = vec![0.0; len * nc];
    for k in 0..nc {
        for i in 0..len {
            values[k * len + i] = modal[i * nc + k];
        }
    }
    Field::new(u.grid().clone(), nc, values)
}

fn diagnostics(u: &Field, record: &Record) -> Vec<ComponentDiagnostics> {
    (0..u.ncomp())
        .map(|k| {
            let (min, argmin_index) = if record.min {
                let m = u.min_component_value(k).expect("component in range");
                (m.value, m.location)
            } else {
                (f64::NAN, 0)
            };
            ComponentDiagnostics {
                min,
                argmin_index,
                mass: if record.mass { u.mass(k).expect("in range") } else { f64::NAN },
                l2norm: if record.l2 { u.l2_norm(k).expect("in range") } else { f64::NAN },
            }
        })
        .collect()
}

fn axpy(y: &mut [Complex64], a: f64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

struct Integrator<'a> {
    spec: &'a SystemSpec,
    grid: Grid,
    exec: Exec,
    full: ModePropagator,
    half: Option<ModePropagator>,
    dealias: bool,
}

impl Integrator<'_> {
    /// `−mask · FFT(F(IFFT(s)))`.
    fn nonlinear(&self, s: &SpectrumField) -> std::result::Result<SpectrumField, ()> {
        let u = inverse_with(s, self.exec);
        let f = evaluate_reaction_with(&u, self.spec.reaction(), self.exec).map_err(|_| ())?;
        let mut fh = forward_with(&f, self.exec);
        let len = self.grid.len();
        for k in 0..s.ncomp() {
            let block = &mut fh.coeffs_mut()[k * len..(k + 1) * len];
            for (i, z) in block.iter_mut().enumerate() {
                if self.dealias && !self.grid.dealias_keep(i) {
                    *z = Complex64::new(0.0, 0.0);
                } else {
                    *z = -*z;
                }
            }
        }
        Ok(fh)
    }

    fn step(&self, s: &SpectrumField) -> std::result::Result<SpectrumField, ()> {
        let Some(half) = &self.half else {
            return self.full.apply_with(s, self.exec).map_err(|_| ());
        };
        let dt = self.full.dt();
        let e = |x: &SpectrumField| self.full.apply_with(x, self.exec).expect("shape checked");
        let e2 = |x: &SpectrumField| half.apply_with(x, self.exec).expect("shape checked");

        let k1 = self.nonlinear(s)?;
        let mut a = s.clone();
        axpy(a.coeffs_mut(), 0.5 * dt, k1.coeffs());
        let k2 = self.nonlinear(&e2(&a))?;

        let e2s = e2(s);
        let mut b = e2s.clone();
        axpy(b.coeffs_mut(), 0.5 * dt, k2.coeffs());
        let k3 = self.nonlinear(&b)?;

        let es = e(s);
        let e2k3 = e2(&k3);
        let mut c = es.clone();
        axpy(c.coeffs_mut(), dt, e2k3.coeffs());
        let k4 = self.nonlinear(&c)?;

        let ek1 = e(&k1);
        let mut mid = k2;
        axpy(mid.coeffs_mut(), 1.0, k3.coeffs());
        let e2mid = e2(&mid);

        let mut out = es;
        axpy(out.coeffs_mut(), dt / 6.0, ek1.coeffs());
        axpy(out.coeffs_mut(), dt / 3.0, e2mid.coeffs());
        axpy(out.coeffs_mut(), dt / 6.0, k4.coeffs());
        Ok(out)
    }
}

fn is_blown_up(s: &SpectrumField, exec: Exec) -> Option<Field> {
    let len = s.grid().len() as f64;
    let mut bound = 0.0;
    for z in s.coeffs() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return None;
        }
        bound += z.norm();
    }
    let u = inverse_with(s, exec);
    if bound / len <= BLOW_UP_THRESHOLD {
        return Some(u);
    }
    (u.max_abs() <= BLOW_UP_THRESHOLD).then_some(u)
}

/// Advances `u0` from 0 to `rc.t_end`.
pub fn run(spec: &SystemSpec, u0: &Field, rc: &RunConfig) -> Result<TimeSeries> {
    run_with(spec, u0, rc, Exec::default())
}

pub fn run_with(spec: &SystemSpec, u0: &Field, rc: &RunConfig, exec: Exec) -> Result<TimeSeries> {
    let grid = u0.grid().clone();
    if u0.ncomp() != spec.ncomp() {
        return Err(Error::DimensionMismatch {
            context: "initial data components vs system".into(),
            expected: spec.ncomp(),
            found: u0.ncomp(),
        });
    }
    if grid.d() != spec.d() {
        return Err(Error::DimensionMismatch {
            context: "grid dimension vs system dimension".into(),
            expected: spec.d(),
            found: grid.d(),
        });
    }
    let steps = rc.steps()?;
    let polynomial = matches!(spec.reaction(), ReactionSpec::Polynomial { .. });
    let linear = matches!(spec.reaction(), ReactionSpec::Linear { .. });
    let integrator = Integrator {
        spec,
        grid: grid.clone(),
        exec,
        full: build_propagator_with(spec, &grid, rc.dt, linear, exec)?,
        half: if polynomial {
            Some(build_propagator_with(spec, &grid, 0.5 * rc.dt, false, exec)?)
        } else {
            None
        },
        dealias: rc.dealias.unwrap_or(polynomial),
    };

    let mut records = vec![DiagnosticRecord {
        step: 0,
        t: 0.0,
        components: diagnostics(u0, &rc.record),
    }];
    let mut state = forward_with(u0, exec);
    let mut last = u0.clone();
    let mut last_step = 0;
    let mut blow_up = None;
    for step in 1..=steps {
        let t = step as f64 * rc.dt;
        let next = integrator.step(&state).ok();
        match next.as_ref().and_then(|s| is_blown_up(s, exec)) {
            Some(u) => {
                state = next.expect("checked above");
                last = u;
                last_step = step;
            }
            None => {
                blow_up = Some(BlowUp {
                    step,
                    t,
                    last_finite_step: last_step,
                });
                break;
            }
        }
        if step % rc.output_stride == 0 || step == steps {
            records.push(DiagnosticRecord {
                step,
                t,
                components: diagnostics(&last, &rc.record),
            });
        }
    }
    Ok(TimeSeries {
        records,
        final_state: last,
        final_t: last_step as f64 * rc.dt,
        blow_up,
    })
}
