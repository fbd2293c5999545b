//! System description `u_t = A Δ³u + Σ Γⁱ ∂u/∂xᵢ − F(u)` and its config file.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrix::MatrixN;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn eval(&self, s: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(s)
            .fold(self.coeff, |acc, (&e, &x)| acc * x.powi(e as i32))
    }
}

/// The interaction term `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReactionSpec {
    Zero,
    /// `F(u) = L u`.
    Linear {
        #[serde(rename = "L")]
        l: MatrixN,
    },
    /// `terms[k]` lists the monomials summed into `F_k`.
    Polynomial { terms: Vec<Vec<Monomial>> },
}

impl ReactionSpec {
    pub fn linear(l: MatrixN) -> Self {
        ReactionSpec::Linear { l }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ReactionSpec::Zero => Ok(()),
            ReactionSpec::Linear { l } => {
                if l.n() != n {
                    return Err(Error::DimensionMismatch {
                        context: "reaction.L side".into(),
                        expected: n,
                        found: l.n(),
                    });
                }
                Ok(())
            }
            ReactionSpec::Polynomial { terms } => {
                if terms.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: "reaction.terms (one list per component)".into(),
                        expected: n,
                        found: terms.len(),
                    });
                }
                for (k, comp) in terms.iter().enumerate() {
                    for (m, mono) in comp.iter().enumerate() {
                        if mono.exponents.len() != n {
                            return Err(Error::DimensionMismatch {
                                context: format!(
                                    "reaction.terms[{k}][{m}].exponents"
                                ),
                                expected: n,
                                found: mono.exponents.len(),
                            });
                        }
                        if !mono.coeff.is_finite() {
                            return Err(Error::InvalidField {
                                field: format!("reaction.terms[{k}][{m}].coeff"),
                                message: "coefficient must be finite".into(),
                            });
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ReactionSpec::Zero)
    }

    /// `F_k(s)`.
    pub fn eval_component(&self, k: usize, s: &[f64]) -> f64 {
        match self {
            ReactionSpec::Zero => 0.0,
            ReactionSpec::Linear { l } => (0..l.n()).map(|j| l.get(k, j) * s[j]).sum(),
            ReactionSpec::Polynomial { terms } => terms[k].iter().map(|m| m.eval(s)).sum(),
        }
    }

    /// Writes `F(s)` into `out`.
    pub fn eval(&self, s: &[f64], out: &mut [f64]) {
        match self {
            ReactionSpec::Zero => out.fill(0.0),
            ReactionSpec::Linear { l } => l.mul_vec(s, out),
            ReactionSpec::Polynomial { .. } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = self.eval_component(k, s);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    d: usize,
    ncomp: usize,
    a: MatrixN,
    gammas: Vec<MatrixN>,
    reaction: ReactionSpec,
}

impl SystemSpec {
    /// Validates dimensions and positivity of `A + A^T`.
    pub fn new(
        d: usize,
        ncomp: usize,
        a: MatrixN,
        gammas: Vec<MatrixN>,
        reaction: ReactionSpec,
    ) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidField {
                field: "d".into(),
                message: format!("spatial dimension {d} not in 1..=3"),
            });
        }
        if ncomp == 0 {
            return Err(Error::InvalidField {
                field: "N".into(),
                message: "need at least one component".into(),
            });
        }
        if a.n() != ncomp {
            return Err(Error::DimensionMismatch {
                context: "A side".into(),
                expected: ncomp,
                found: a.n(),
            });
        }
        if gammas.len() != d {
            return Err(Error::DimensionMismatch {
                context: "Gamma (one matrix per spatial dimension)".into(),
                expected: d,
                found: gammas.len(),
            });
        }
        for (i, g) in gammas.iter().enumerate() {
            if g.n() != ncomp {
                return Err(Error::DimensionMismatch {
                    context: format!("Gamma[{}] side", i + 1),
                    expected: ncomp,
                    found: g.n(),
                });
            }
        }
        reaction.validate(ncomp)?;
        let smallest = a.min_symmetric_eigenvalue();
        if !(smallest > 0.0) {
            return Err(Error::NotPositiveDefinite {
                smallest_eigenvalue: smallest,
            });
        }
        Ok(Self {
            d,
            ncomp,
            a,
            gammas,
            reaction,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn a(&self) -> &MatrixN {
        &self.a
    }

    pub fn gammas(&self) -> &[MatrixN] {
        &self.gammas
    }

    pub fn reaction(&self) -> &ReactionSpec {
        &self.reaction
    }

    pub fn with_reaction(&self, reaction: ReactionSpec) -> Result<Self> {
        Self::new(self.d, self.ncomp, self.a.clone(), self.gammas.clone(), reaction)
    }
}

/// Optional grid section of a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub n: usize,
    #[serde(rename = "box")]
    pub box_len: f64,
}

impl GridSection {
    pub fn to_grid(&self, d: usize) -> Result<Grid> {
        Grid::new(d, self.n, self.box_len)
    }
}

/// On-disk shape of a system config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub d: usize,
    #[serde(rename = "N")]
    pub ncomp: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "Gamma")]
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub reaction: ReactionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_spec(&self) -> Result<SystemSpec> {
        let a = MatrixN::from_rows(&self.a).map_err(|e| relabel(e, "A"))?;
        let gammas = self
            .gamma
            .iter()
            .enumerate()
            .map(|(i, g)| MatrixN::from_rows(g).map_err(|e| relabel(e, &format!("Gamma[{}]", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        SystemSpec::new(self.d, self.ncomp, a, gammas, self.reaction.clone())
    }

    pub fn from_spec(spec: &SystemSpec, grid: Option<&Grid>) -> Self {
        Self {
            d: spec.d,
            ncomp: spec.ncomp,
            a: spec.a.rows(),
            gamma: spec.gammas.iter().map(|g| g.rows()).collect(),
            reaction: spec.reaction.clone(),
            grid: grid.map(|g| GridSection {
                n: g.n(),
                box_len: g.box_len(),
            }),
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }
}

fn relabel(e: Error, field: &str) -> Error {
    match e {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        } => Error::DimensionMismatch {
            context: format!("{field}: {context}"),
            expected,
            found,
        },
        Error::InvalidField { message, .. } => Error::InvalidField {
            field: field.into(),
            message,
        },
        other => other,
    }
}

/// Parses and validates a config text into a [`SystemSpec`].
pub fn load_system(config_text: &str) -> Result<SystemSpec> {
    SystemConfig::parse(config_text)?.to_spec()
}

/// Serializes a spec back to config text.
pub fn serialize_system(spec: &SystemSpec, grid: Option<&Grid>) -> String {
    SystemConfig::from_spec(spec, grid).to_text()
}
