//! Structural nonnegativity audit.
//!
//! A system can only keep nonnegative data nonnegative if `A` and every `Γⁱ`
//! are diagonal and each `F_k` is `<= 0` on the face `{s_k = 0, s >= 0}`.
//! Negative off-diagonal entries of `A` fall outside the hypothesis under
//! which that statement holds and are reported as warnings.
//!
//! For linear reactions the face condition is exactly "`L` has nonpositive
//! off-diagonal entries", which is checked exactly. For polynomial reactions
//! it is checked on random and corner samples, so a pass is evidence rather
//! than proof; a fail always carries a concrete violating point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MatrixN;
use crate::system::{ReactionSpec, SystemSpec};

/// Values of `F_k` above this on the face count as violations.
pub const SIGN_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "diag-A")]
    DiagA,
    #[serde(rename = "diag-Gamma")]
    DiagGamma,
    #[serde(rename = "reaction-sign")]
    ReactionSign,
    #[serde(rename = "assumption-akl")]
    AssumptionAkl,
}

/// Location of a finding. Rows, columns and components are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Site {
    Entry {
        matrix: String,
        row: usize,
        col: usize,
    },
    Sample {
        component: usize,
        point: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub site: Site,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evidence {
    /// Decided exactly from the coefficients.
    Exact,
    /// Checked on samples only.
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub overall: bool,
    pub diffusion_ok: bool,
    pub transport_ok: bool,
    pub reaction_ok: bool,
    pub reaction_evidence: Evidence,
    pub warnings: Vec<Violation>,
    pub violations: Vec<Violation>,
    /// Samples where `F_k` overflowed; neither pass nor fail.
    pub indeterminate: Vec<Site>,
}

impl AuditReport {
    /// 0 pass, 2 fail, 3 pass with warnings.
    pub fn exit_code(&self) -> i32 {
        if !self.overall {
            2
        } else if !self.warnings.is_empty() {
            3
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignSampler {
    pub samples_per_component: usize,
    pub magnitude_scales: Vec<f64>,
    pub seed: u64,
}

impl Default for SignSampler {
    fn default() -> Self {
        Self {
            samples_per_component: 256,
            magnitude_scales: vec![0.1, 1.0, 10.0],
            seed: 0,
        }
    }
}

impl SignSampler {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_component == 0 {
            return Err(Error::InvalidField {
                field: "samples_per_component".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.magnitude_scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidField {
                field: "magnitude_scales".into(),
                message: "scales must be positive and finite".into(),
            });
        }
        Ok(())
    }

    /// Points on the face `s_k = 0`: origin, unit and scaled unit vectors,
    /// then uniform draws in `[0, scale]^{N-1}` per scale.
    pub fn face_points(&self, n: usize, k: usize) -> Vec<Vec<f64>> {
        // one stream per component so adding components doesn't reshuffle others
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut points = vec![vec![0.0; n]];
        for l in (0..n).filter(|&l| l != k) {
            let mut e = vec![0.0; n];
            e[l] = 1.0;
            points.push(e.clone());
            for &scale in &self.magnitude_scales {
                if scale != 1.0 {
                    let mut se = e.clone();
                    se[l] = scale;
                    points.push(se);
                }
            }
        }
        for &scale in &self.magnitude_scales {
            for _ in 0..self.samples_per_component {
                let p = (0..n)
                    .map(|l| if l == k { 0.0 } else { scale * rng.random::<f64>() })
                    .collect();
                points.push(p);
            }
        }
        points
    }
}

fn off_diagonal_where(m: &MatrixN, name: &str, rule: Rule, pred: impl Fn(f64) -> bool) -> Vec<Violation> {
    m.off_diagonal()
        .filter(|&(_, _, v)| pred(v))
        .map(|(row, col, value)| Violation {
            rule,
            site: Site::Entry {
                matrix: name.to_string(),
                row: row + 1,
                col: col + 1,
            },
            value,
        })
        .collect()
}

/// Off-diagonal entries of `A` that are negative.
pub fn check_assumption_offdiag_nonneg(a: &MatrixN) -> Vec<Violation> {
    off_diagonal_where(a, "A", Rule::AssumptionAkl, |v| v < 0.0)
}

/// Off-diagonal entries with `|m_kj| > tol`, tagged as a diffusion finding.
pub fn check_diagonality(m: &MatrixN, tol: f64) -> Vec<Violation> {
    check_diagonality_as(m, tol, "A", Rule::DiagA)
}

fn check_diagonality_as(m: &MatrixN, tol: f64, name: &str, rule: Rule) -> Vec<Violation> {
    off_diagonal_where(m, name, rule, |v| v.abs() > tol)
}

/// Off-diagonal entries of `L` that are positive.
pub fn check_essentially_nonpositive(l: &MatrixN) -> Vec<Violation> {
    off_diagonal_where(l, "L", Rule::ReactionSign, |v| v > 0.0)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SignCheck {
    pub violations: Vec<Violation>,
    pub indeterminate: Vec<Site>,
}

/// Samples `F_k` on each face `{s_k = 0}`.
pub fn check_reaction_boundary_sign(
    reaction: &ReactionSpec,
    n: usize,
    sampler: &SignSampler,
) -> Result<SignCheck> {
    reaction.validate(n)?;
    sampler.validate()?;
    let mut out = SignCheck::default();
    if reaction.is_zero() {
        return Ok(out);
    }
    for k in 0..n {
        for point in sampler.face_points(n, k) {
            let v = reaction.eval_component(k, &point);
            let site = Site::Sample {
                component: k + 1,
                point,
            };
            if !v.is_finite() {
                out.indeterminate.push(site);
            } else if v > SIGN_TOLERANCE {
                out.violations.push(Violation {
                    rule: Rule::ReactionSign,
                    site,
                    value: v,
                });
            }
        }
    }
    Ok(out)
}

/// Full audit; `tol` applies to the diagonality checks.
pub fn audit(spec: &SystemSpec, sampler: &SignSampler, tol: f64) -> Result<AuditReport> {
    let warnings = check_assumption_offdiag_nonneg(spec.a());
    let diffusion = check_diagonality_as(spec.a(), tol, "A", Rule::DiagA);
    let transport: Vec<_> = spec
        .gammas()
        .iter()
        .enumerate()
        .flat_map(|(i, g)| check_diagonality_as(g, tol, &format!("Gamma{}", i + 1), Rule::DiagGamma))
        .collect();
    let (reaction, indeterminate, evidence) = match spec.reaction() {
        ReactionSpec::Zero => (Vec::new(), Vec::new(), Evidence::Exact),
        ReactionSpec::Linear { l } => (check_essentially_nonpositive(l), Vec::new(), Evidence::Exact),
        r @ ReactionSpec::Polynomial { .. } => {
            let c = check_reaction_boundary_sign(r, spec.ncomp(), sampler)?;
            (c.violations, c.indeterminate, Evidence::Sampled)
        }
    };
    let diffusion_ok = diffusion.is_empty();
    let transport_ok = transport.is_empty();
    let reaction_ok = reaction.is_empty();
    let mut violations = diffusion;
    violations.extend(transport);
    violations.extend(reaction);
    Ok(AuditReport {
        overall: violations.is_empty(),
        diffusion_ok,
        transport_ok,
        reaction_ok,
        reaction_evidence: evidence,
        warnings,
        violations,
        indeterminate,
    })
}
