//! On-disk model snapshots (JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cdiff::C64;
use crate::error::{Error, Result};
use crate::laurent::{LaurentPotential, PotentialRecord};
use crate::representations::{gauss_legendre, Particular, ProblemKind, ProblemSpec, Regime};
use crate::train::{AdamState, Model};

pub const FORMAT: &str = "holonet-ckpt-1";

/// Problem as stored in a checkpoint. Elasticity keeps the derived constants
/// so that a reload reproduces the model bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemRecord {
    Laplace { particular: Particular },
    Biharmonic { particular: Particular },
    Elasticity { mu: f64, lambda_eff: f64, kappa: f64, regime: Regime },
    Helmholtz { beta: f64, quadrature: usize },
}

impl ProblemRecord {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        match &spec.kind {
            ProblemKind::Laplace => ProblemRecord::Laplace { particular: spec.particular },
            ProblemKind::Biharmonic => ProblemRecord::Biharmonic { particular: spec.particular },
            ProblemKind::Elasticity { mu, lambda_eff, kappa, regime } => ProblemRecord::Elasticity {
                mu: *mu,
                lambda_eff: *lambda_eff,
                kappa: *kappa,
                regime: *regime,
            },
            ProblemKind::Helmholtz { beta, quad } => ProblemRecord::Helmholtz {
                beta: *beta,
                quadrature: quad.nodes.len(),
            },
        }
    }

    pub fn to_spec(&self, center: C64) -> Result<ProblemSpec> {
        let mut spec = match *self {
            ProblemRecord::Laplace { particular } => ProblemSpec::new(ProblemKind::Laplace, particular)?,
            ProblemRecord::Biharmonic { particular } => ProblemSpec::new(ProblemKind::Biharmonic, particular)?,
            ProblemRecord::Elasticity { mu, lambda_eff, kappa, regime } => {
                if !(mu > 0.0 && lambda_eff + mu > 0.0 && kappa.is_finite()) {
                    return Err(Error::Contract(format!(
                        "invalid elastic constants mu = {mu}, lambda = {lambda_eff}"
                    )));
                }
                ProblemSpec::new(
                    ProblemKind::Elasticity {
                        mu,
                        lambda_eff,
                        kappa,
                        regime,
                    },
                    Particular::None,
                )?
            }
            ProblemRecord::Helmholtz { beta, quadrature } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::Contract(format!("wave number must be positive, got {beta}")));
                }
                ProblemSpec::new(
                    ProblemKind::Helmholtz {
                        beta,
                        quad: gauss_legendre(quadrature)?,
                    },
                    Particular::None,
                )?
            }
        };
        spec.center = center;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub problem: ProblemRecord,
    pub center: C64,
    pub epoch: usize,
    pub potentials: Vec<PotentialRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, epoch: usize, adam: Option<AdamState>) -> Checkpoint {
        Checkpoint {
            format: FORMAT.into(),
            problem: ProblemRecord::from_spec(&model.problem),
            center: model.problem.center,
            epoch,
            potentials: model.potentials.iter().map(|p| p.to_record()).collect(),
            adam,
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        let problem = self.problem.to_spec(self.center)?;
        if self.potentials.len() != problem.n_potentials() {
            return Err(Error::Contract(format!(
                "{} problems need {} potentials, checkpoint has {}",
                problem.kind.name(),
                problem.n_potentials(),
                self.potentials.len()
            )));
        }
        let potentials = self
            .potentials
            .iter()
            .map(LaurentPotential::from_record)
            .collect::<Result<Vec<_>>>()?;
        let model = Model { problem, potentials };
        if let Some(adam) = &self.adam {
            let n = model.n_real();
            if adam.m.len() != n || adam.v.len() != n {
                return Err(Error::Contract(format!(
                    "optimizer state has {} entries, model has {n} parameters",
                    adam.m.len()
                )));
            }
        }
        Ok(model)
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Io(e.to_string()))?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Reads and validates a checkpoint; malformed content is a configuration error
    /// naming the file.
    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path)?;
        let bad = |m: String| Error::config(path.display().to_string(), m);
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(format!("not JSON: {e}")))?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(FORMAT) => {}
            Some(other) => return Err(bad(format!("unknown checkpoint format `{other}`"))),
            None => return Err(bad("missing `format` field".into())),
        }
        let ckpt: Checkpoint = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        ckpt.to_model().map_err(|e| bad(e.to_string()))?;
        Ok(ckpt)
    }

    /// Short human-readable description.
    pub fn summary(&self) -> Result<String> {
        let model = self.to_model()?;
        let mut out = format!(
            "format: {}\nproblem: {}\nepoch: {}\nparameters (real): {}\n",
            self.format,
            model.problem.kind.name(),
            self.epoch,
            model.n_real()
        );
        for (i, p) in self.potentials.iter().enumerate() {
            out.push_str(&format!(
                "potential {i}: {} widths {:?}, {} hole term(s)\n",
                match p.base.arch {
                    crate::nets::Arch::Mlp { .. } => "mlp".to_string(),
                    crate::nets::Arch::Kan { degree, .. } => format!("kan degree {degree}"),
                },
                p.base.arch.widths(),
                p.holes.len()
            ));
        }
        out.push_str(&format!(
            "optimizer state: {}\n",
            if self.adam.is_some() { "present" } else { "absent" }
        ));
        Ok(out)
    }
}
