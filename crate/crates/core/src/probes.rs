//! Test data that exposes structural nonnegativity failures, and the
//! experiments built on it.
//!
//! Probes are written in scaled coordinates `y = x / ε`. The diffusion probe
//! is
//!
//! ```text
//! p(y) = E(|y|) · (2 − exp(s − c s⁸)),   s = Σ y_k,   c = 0.7,
//! E(r) = exp(−ρ⁸ / (1 + ρ⁴)),            ρ = r / R,
//! ```
//!
//! cut to zero for `|y| >= 2.5 R` (where `E` is below 3e−17). Both factors
//! agree with `1` and `2 − e^s` through sixth order at the origin, so the
//! continuum `Δ³p(0)` is exactly `−d³` while `p` stays strictly positive on
//! its support for any `c` above ~0.64. The transport probe replaces the
//! second factor with `exp(−|y_⊥|²/2) · e^{−σ y_i}`, whose `y_i`-derivative at
//! the origin is `−σ`.
//!
//! Smaller `R` shrinks the support but raises the frequency content; on a
//! fixed grid the spectral error in `Δ³p(0)` falls quickly with `R` until the
//! probe stops being resolved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::matrix::MatrixN;
use crate::ode;
use crate::spectral::{apply_laplacian_cubed, apply_transport, forward, inverse};
use crate::stepper::{evaluate_reaction, run, RunConfig, BLOW_UP_THRESHOLD};
use crate::system::{ReactionSpec, SystemSpec};

pub const DEFAULT_RADIUS: f64 = 0.6;
/// Support radius as a multiple of the envelope radius.
pub const CUTOFF_FACTOR: f64 = 2.5;
/// Damping `c` in `exp(s − c s⁸)`.
pub const DAMPING: f64 = 0.7;
/// Largest usable `spacing / ε`.
pub const MAX_SPACING_RATIO: f64 = 0.05;
/// A minimum below `−NEGATIVITY_TOLERANCE` counts as negative.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-8;
/// Substeps used for `t_probe` when the reaction is polynomial.
pub const POLYNOMIAL_PROBE_STEPS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    /// Envelope radius `R` in scaled units.
    pub radius: f64,
    /// Support radius in scaled units.
    pub cutoff: f64,
}

impl Default for Mollifier {
    fn default() -> Self {
        Self::with_radius(DEFAULT_RADIUS)
    }
}

impl Mollifier {
    pub fn with_radius(radius: f64) -> Self {
        Self {
            radius,
            cutoff: CUTOFF_FACTOR * radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Precondition(format!("mollifier radius {} must be positive", self.radius)));
        }
        if !(self.cutoff > self.radius && self.cutoff.is_finite()) {
            return Err(Error::Precondition(format!(
                "mollifier cutoff {} must exceed the radius {}",
                self.cutoff, self.radius
            )));
        }
        Ok(())
    }

    /// `E(r)`, zero at and beyond the cutoff.
    pub fn envelope(&self, r: f64) -> f64 {
        if r >= self.cutoff {
            return 0.0;
        }
        let rho4 = (r / self.radius).powi(4);
        (-(rho4 * rho4) / (1.0 + rho4)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProbeKind {
    Diffusion,
    /// `axis` is zero-based; `sign` is ±1.
    Transport { axis: usize, sign: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFamily {
    pub kind: ProbeKind,
    pub eps: f64,
    pub mollifier: Mollifier,
}

impl ProbeFamily {
    pub fn diffusion(eps: f64) -> Self {
        Self {
            kind: ProbeKind::Diffusion,
            eps,
            mollifier: Mollifier::default(),
        }
    }

    pub fn transport(axis: usize, sign: f64, eps: f64) -> Self {
        Self {
            kind: ProbeKind::Transport { axis, sign },
            eps,
            mollifier: Mollifier::default(),
        }
    }

    pub fn with_mollifier(mut self, mollifier: Mollifier) -> Self {
        self.mollifier = mollifier;
        self
    }

    /// Probe value at scaled point `y` in `d` dimensions.
    pub fn profile(&self, y: &[f64]) -> f64 {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let e = self.mollifier.envelope(r);
        if e == 0.0 {
            return 0.0;
        }
        match self.kind {
            ProbeKind::Diffusion => {
                let s: f64 = y.iter().sum();
                e * (2.0 - (s - DAMPING * s.powi(8)).exp())
            }
            ProbeKind::Transport { axis, sign } => {
                let perp: f64 = y
                    .iter()
                    .enumerate()
                    .filter(|&(a, _)| a != axis)
                    .map(|(_, v)| v * v)
                    .sum();
                e * (-0.5 * perp - sign * y[axis]).exp()
            }
        }
    }

    /// Checks that the probe fits in the box and is resolved by the grid.
    pub fn check(&self, grid: &Grid) -> Result<()> {
        self.mollifier.validate()?;
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Precondition(format!("scale {} must be positive", self.eps)));
        }
        if let ProbeKind::Transport { axis, sign } = self.kind {
            if axis >= grid.d() {
                return Err(Error::IndexOutOfRange {
                    index: axis,
                    len: grid.d(),
                });
            }
            if sign != 1.0 && sign != -1.0 {
                return Err(Error::Precondition(format!("transport sign {sign} must be +1 or -1")));
            }
        }
        let support = self.eps * self.mollifier.cutoff;
        if support > 0.5 * grid.box_len() {
            return Err(Error::Precondition(format!(
                "probe support radius {support:.4} exceeds half the box ({:.4})",
                0.5 * grid.box_len()
            )));
        }
        let ratio = grid.spacing() / self.eps;
        if ratio > MAX_SPACING_RATIO + 1e-12 {
            return Err(Error::Precondition(format!(
                "grid spacing / eps = {ratio:.4} exceeds {MAX_SPACING_RATIO}; probe not resolved"
            )));
        }
        Ok(())
    }

    pub fn build(&self, grid: &Grid) -> Result<Field> {
        self.check(grid)?;
        let d = grid.d();
        let mut f = Field::zeros(grid, 1);
        f.fill_component(0, |x| {
            let y: Vec<f64> = x[..d].iter().map(|v| v / self.eps).collect();
            self.profile(&y)
        });
        Ok(f)
    }
}

pub fn build_diffusion_probe(grid: &Grid, eps: f64, mollifier: Mollifier) -> Result<Field> {
    ProbeFamily::diffusion(eps).with_mollifier(mollifier).build(grid)
}

pub fn build_transport_probe(grid: &Grid, axis: usize, sign: f64, eps: f64, mollifier: Mollifier) -> Result<Field> {
    ProbeFamily::transport(axis, sign, eps)
        .with_mollifier(mollifier)
        .build(grid)
}

/// A grid sized to one probe: box `ε · max(3, 0.03 n)`.
pub fn probe_grid(d: usize, n: usize, eps: f64) -> Result<Grid> {
    Grid::new(d, n, eps * f64::max(3.0, 0.03 * n as f64))
}

/// Spectral `Δ³ u_k` at the origin.
pub fn laplacian_cubed_at_origin(u: &Field, k: usize) -> f64 {
    let one = MatrixN::identity(u.ncomp());
    let s = apply_laplacian_cubed(&forward(u), &one).expect("identity has matching side");
    inverse(&s).at_origin(k)
}

/// Spectral `∂u_k/∂x_axis` at the origin.
pub fn derivative_at_origin(u: &Field, k: usize, axis: usize) -> f64 {
    let d = u.grid().d();
    let gammas: Vec<MatrixN> = (0..d)
        .map(|a| {
            if a == axis {
                MatrixN::identity(u.ncomp())
            } else {
                MatrixN::zeros(u.ncomp())
            }
        })
        .collect();
    let s = apply_transport(&forward(u), &gammas).expect("shapes match");
    inverse(&s).at_origin(k)
}

/// `A Δ³u + Σ Γⁱ ∂u/∂xᵢ − F(u)`.
pub fn initial_rate_field(spec: &SystemSpec, u0: &Field) -> Result<Field> {
    if u0.ncomp() != spec.ncomp() || u0.grid().d() != spec.d() {
        return Err(Error::ShapeMismatch("initial data does not match the system".into()));
    }
    let s = forward(u0);
    let diff = inverse(&apply_laplacian_cubed(&s, spec.a())?);
    let adv = inverse(&apply_transport(&s, spec.gammas())?);
    let f = evaluate_reaction(u0, spec.reaction())?;
    let values = diff
        .values()
        .iter()
        .zip(adv.values())
        .zip(f.values())
        .map(|((a, b), c)| a + b - c)
        .collect();
    Field::new(u0.grid().clone(), u0.ncomp(), values)
}

/// Smallest rate of component `k` over the samples where `u0_k == 0`.
pub fn min_rate_on_zero_set(spec: &SystemSpec, u0: &Field, k: usize) -> Result<Option<f64>> {
    let rate = initial_rate_field(spec, u0)?;
    Ok(u0
        .component(k)
        .iter()
        .zip(rate.component(k))
        .filter(|(u, _)| **u == 0.0)
        .map(|(_, r)| *r)
        .reduce(f64::min))
}

/// Which structural entry the experiment switches on. Indices are zero-based.
#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    /// `A = c I + a e_k e_jᵀ` with `c = max(1, a)`.
    Diffusion { k: usize, j: usize, a: f64 },
    /// `A = I`, `Γ^axis = γ e_k e_jᵀ`.
    Transport { k: usize, j: usize, axis: usize, gamma: f64 },
    /// `A = I`, `Γ = 0`, the given reaction.
    Reaction { k: usize, reaction: ReactionSpec },
}

impl ViolationKind {
    pub fn name(&self) -> &'static str {
        match self {
            ViolationKind::Diffusion { .. } => "diffusion",
            ViolationKind::Transport { .. } => "transport",
            ViolationKind::Reaction { .. } => "reaction",
        }
    }

    pub fn pinned(&self) -> usize {
        match *self {
            ViolationKind::Diffusion { k, .. }
            | ViolationKind::Transport { k, .. }
            | ViolationKind::Reaction { k, .. } => k,
        }
    }

    /// The system the experiment runs on.
    pub fn spec(&self, d: usize, ncomp: usize) -> Result<SystemSpec> {
        let zero_gammas = || vec![MatrixN::zeros(ncomp); d];
        let in_range = |i: usize| {
            if i < ncomp {
                Ok(())
            } else {
                Err(Error::IndexOutOfRange { index: i, len: ncomp })
            }
        };
        match self {
            &ViolationKind::Diffusion { k, j, a } => {
                in_range(k)?;
                in_range(j)?;
                let mut m = MatrixN::identity(ncomp);
                let c = a.abs().max(1.0);
                for i in 0..ncomp {
                    m.set(i, i, c);
                }
                m.set(k, j, m.get(k, j) + a);
                SystemSpec::new(d, ncomp, m, zero_gammas(), ReactionSpec::Zero)
            }
            &ViolationKind::Transport { k, j, axis, gamma } => {
                in_range(k)?;
                in_range(j)?;
                if axis >= d {
                    return Err(Error::IndexOutOfRange { index: axis, len: d });
                }
                let mut g = zero_gammas();
                g[axis].set(k, j, gamma);
                SystemSpec::new(d, ncomp, MatrixN::identity(ncomp), g, ReactionSpec::Zero)
            }
            ViolationKind::Reaction { k, reaction } => {
                in_range(*k)?;
                SystemSpec::new(d, ncomp, MatrixN::identity(ncomp), zero_gammas(), reaction.clone())
            }
        }
    }

    /// The same experiment with the offending entry removed; `fixed` replaces
    /// the reaction for the reaction kind.
    pub fn repaired(&self, fixed: Option<ReactionSpec>) -> Self {
        match self {
            &ViolationKind::Diffusion { k, j, .. } => ViolationKind::Diffusion { k, j, a: 0.0 },
            &ViolationKind::Transport { k, j, axis, .. } => ViolationKind::Transport {
                k,
                j,
                axis,
                gamma: 0.0,
            },
            ViolationKind::Reaction { k, reaction } => ViolationKind::Reaction {
                k: *k,
                reaction: fixed.unwrap_or_else(|| reaction.clone()),
            },
        }
    }

    /// `u0_k ≡ 0`, every other component the matching probe at scale `eps`.
    pub fn initial_data(&self, grid: &Grid, ncomp: usize, eps: f64, mollifier: Mollifier) -> Result<Field> {
        let probe = match *self {
            ViolationKind::Transport { axis, gamma, .. } => {
                let sign = if gamma < 0.0 { -1.0 } else { 1.0 };
                ProbeFamily::transport(axis, sign, eps)
            }
            _ => ProbeFamily::diffusion(eps),
        }
        .with_mollifier(mollifier)
        .build(grid)?;
        let k = self.pinned();
        let zero = Field::zeros(grid, 1);
        let parts: Vec<Field> = (0..ncomp)
            .map(|c| if c == k { zero.clone() } else { probe.clone() })
            .collect();
        Field::stack(&parts)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub kind: ViolationKind,
    pub ncomp: usize,
    pub grid: Grid,
    pub eps: Vec<f64>,
    /// Defaults to `1e−4 (box/2π)⁶ / ‖A‖_F`.
    pub t_probe: Option<f64>,
    pub mollifier: Mollifier,
}

impl Experiment {
    pub fn new(kind: ViolationKind, ncomp: usize, grid: Grid, eps: Vec<f64>) -> Self {
        Self {
            kind,
            ncomp,
            grid,
            eps,
            t_probe: None,
            mollifier: Mollifier::default(),
        }
    }
}

pub fn default_t_probe(spec: &SystemSpec, grid: &Grid) -> f64 {
    1e-4 * (grid.box_len() / (2.0 * std::f64::consts::PI)).powi(6) / spec.a().frobenius_norm()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedScale {
    pub eps: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub kind: String,
    /// 1-based.
    pub pinned_component: usize,
    pub eps: Vec<f64>,
    pub initial_rate_at_origin: Vec<f64>,
    pub min_after_t_probe: Vec<f64>,
    /// Least-squares slope of `ln|rate|` against `ln ε`; needs two scales.
    pub fitted_slope: Option<f64>,
    /// Minimum below `−1e−8` at the smallest retained scale.
    pub negativity_observed: bool,
    /// Largest retained scale at which the minimum went negative.
    pub negativity_threshold_eps: Option<f64>,
    pub t_probe: f64,
    pub dropped: Vec<DroppedScale>,
}

impl ViolationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

fn evolve_min(spec: &SystemSpec, u0: &Field, k: usize, t_probe: f64) -> Result<f64> {
    let rc = match spec.reaction() {
        // the propagator is exact, one step suffices
        ReactionSpec::Zero | ReactionSpec::Linear { .. } => RunConfig::new(t_probe, t_probe),
        ReactionSpec::Polynomial { .. } => {
            RunConfig::new(t_probe, t_probe / POLYNOMIAL_PROBE_STEPS as f64).with_stride(POLYNOMIAL_PROBE_STEPS)
        }
    };
    let ts = run(spec, u0, &rc)?;
    Ok(ts.final_state.min_component_value(k)?.value)
}

pub fn run_violation_experiment(exp: &Experiment) -> Result<ViolationReport> {
    if let ViolationKind::Diffusion { k, j, a } = exp.kind {
        if !(a > 0.0) {
            return Err(Error::Precondition(format!("diffusion coupling {a} must be positive")));
        }
        if k == j {
            return Err(Error::Precondition("diffusion coupling must be off-diagonal".into()));
        }
    }
    if let ViolationKind::Transport { k, j, .. } = exp.kind {
        if k == j {
            return Err(Error::Precondition("transport coupling must be off-diagonal".into()));
        }
    }
    if exp.eps.is_empty() {
        return Err(Error::Precondition("no scales given".into()));
    }
    let spec = exp.kind.spec(exp.grid.d(), exp.ncomp)?;
    let t_probe = exp.t_probe.unwrap_or_else(|| default_t_probe(&spec, &exp.grid));
    if !(t_probe > 0.0 && t_probe.is_finite()) {
        return Err(Error::Precondition(format!("t_probe {t_probe} must be positive")));
    }
    let k = exp.kind.pinned();

    let mut eps_sorted = exp.eps.clone();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut report = ViolationReport {
        kind: exp.kind.name().into(),
        pinned_component: k + 1,
        eps: Vec::new(),
        initial_rate_at_origin: Vec::new(),
        min_after_t_probe: Vec::new(),
        fitted_slope: None,
        negativity_observed: false,
        negativity_threshold_eps: None,
        t_probe,
        dropped: Vec::new(),
    };
    for &eps in &eps_sorted {
        let u0 = match exp.kind.initial_data(&exp.grid, exp.ncomp, eps, exp.mollifier) {
            Ok(u) => u,
            Err(Error::Precondition(reason)) => {
                report.dropped.push(DroppedScale { eps, reason });
                continue;
            }
            Err(e) => return Err(e),
        };
        let rate = initial_rate_field(&spec, &u0)?.at_origin(k);
        let min = match evolve_min(&spec, &u0, k, t_probe) {
            Ok(m) => m,
            Err(e @ (Error::PropagatorOverflow { .. } | Error::ReactionOverflow { .. })) => {
                report.dropped.push(DroppedScale {
                    eps,
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        report.eps.push(eps);
        report.initial_rate_at_origin.push(rate);
        report.min_after_t_probe.push(min);
    }
    let logs: Vec<(f64, f64)> = report
        .eps
        .iter()
        .zip(&report.initial_rate_at_origin)
        .filter(|(_, r)| **r != 0.0)
        .map(|(e, r)| (e.ln(), r.abs().ln()))
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
    report.fitted_slope = fit_slope(&lx, &ly);
    report.negativity_observed = report
        .min_after_t_probe
        .last()
        .is_some_and(|m| *m < -NEGATIVITY_TOLERANCE);
    report.negativity_threshold_eps = report
        .eps
        .iter()
        .zip(&report.min_after_t_probe)
        .find(|(_, m)| **m < -NEGATIVITY_TOLERANCE)
        .map(|(e, _)| *e);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeComparison {
    /// Largest `|u_pde − u_ode|` over common steps and components.
    pub max_deviation: f64,
    pub steps_compared: usize,
    pub pde_first_negative: Vec<Option<f64>>,
    pub ode_first_negative: Vec<Option<f64>>,
    pub pde_blow_up: Option<f64>,
    pub ode_blow_up: Option<f64>,
}

/// Runs the PDE from a spatially constant state next to the RK4 solve of
/// `u' = −F(u)`.
pub fn ode_reduction_check(reaction: &ReactionSpec, u0_const: &[f64], t_end: f64, dt: f64) -> Result<OdeComparison> {
    let nc = u0_const.len();
    if nc == 0 {
        return Err(Error::Precondition("empty initial state".into()));
    }
    if u0_const.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Precondition("initial state must be nonnegative".into()));
    }
    reaction.validate(nc)?;
    let grid = Grid::new(1, 8, 2.0 * std::f64::consts::PI)?;
    let spec = SystemSpec::new(1, nc, MatrixN::identity(nc), vec![MatrixN::zeros(nc)], reaction.clone())?;
    let u0 = Field::from_fn(&grid, nc, |k, _| u0_const[k]);
    let rc = RunConfig::new(t_end, dt);
    let steps = rc.steps()?;
    let pde = run(&spec, &u0, &rc)?;
    let traj = ode::solve(reaction, u0_const, rc.dt, steps, BLOW_UP_THRESHOLD);

    let mut max_deviation: f64 = 0.0;
    let mut compared = 0;
    for (rec, state) in pde.records.iter().zip(&traj.states) {
        for (c, v) in rec.components.iter().zip(state) {
            // the PDE state is constant in space, so min = value
            max_deviation = max_deviation.max((c.min - v).abs());
        }
        compared += 1;
    }
    let ode_first_negative = (0..nc).map(|k| traj.first_negative_time(k)).collect();
    let pde_first_negative = (0..nc).map(|k| pde.first_negative_time(k)).collect();
    Ok(OdeComparison {
        max_deviation,
        steps_compared: compared,
        pde_first_negative,
        ode_first_negative,
        pde_blow_up: pde.blow_up.map(|b| b.t),
        ode_blow_up: traj.blow_up_step.map(|s| s as f64 * rc.dt),
    })
}
