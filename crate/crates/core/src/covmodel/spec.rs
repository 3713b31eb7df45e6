//! JSON model specification.
//!
//! ```json
//! {"x1": {"family": "ou"}, "x2": {"family": "bargmann_fock"}, "cross": "independent"}
//! {"x2": {"family": "bargmann_fock"},
//!  "cross": {"regression": {"rho1": 0.3, "z": {"family": "bargmann_fock"}}}}
//! ```
//!
//! `x1` may be omitted for independent models (then `x1 = x2`, the i.i.d.
//! model) and must be omitted for regression models, where `r1` is derived.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::family::{Family, FamilyCov, SharedCov};
use super::{CovarianceModel, RegressionConvention};
use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    BargmannFock {
        #[serde(default = "one")]
        scale: f64,
    },
    Cauchy {
        #[serde(default = "one")]
        scale: f64,
    },
    Ou {
        #[serde(default = "one")]
        scale: f64,
    },
    Alpha {
        alpha: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl FamilySpec {
    pub fn build(&self) -> Result<FamilyCov> {
        let (family, scale) = match *self {
            FamilySpec::BargmannFock { scale } => (Family::BargmannFock, scale),
            FamilySpec::Cauchy { scale } => (Family::Cauchy, scale),
            FamilySpec::Ou { scale } => (Family::Exponential { alpha: 1.0 }, scale),
            FamilySpec::Alpha { alpha, scale } => (Family::Exponential { alpha }, scale),
        };
        FamilyCov::new(family, scale)
    }

    fn shared(&self) -> Result<SharedCov> {
        Ok(Arc::new(self.build()?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CrossSpec {
    Independent,
    Regression {
        rho1: f64,
        z: FamilySpec,
        #[serde(default)]
        convention: RegressionConvention,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<FamilySpec>,
    pub x2: FamilySpec,
    pub cross: CrossSpec,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("model spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model spec serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub(super) fn build(&self) -> Result<CovarianceModel> {
        let r2 = self.x2.shared()?;
        match &self.cross {
            CrossSpec::Independent => {
                let r1 = match &self.x1 {
                    Some(x1) => x1.shared()?,
                    None => r2.clone(),
                };
                CovarianceModel::independent(r1, r2)
            }
            CrossSpec::Regression { rho1, z, convention } => {
                if self.x1.is_some() {
                    return Err(Error::Config("regression models derive x1; remove the x1 entry".into()));
                }
                CovarianceModel::regression(r2, z.shared()?, *rho1, *convention)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covmodel::ModelClass;

    #[test]
    fn parses_documented_examples() {
        let s = ModelSpec::from_json(r#"{"x1":{"family":"ou"},"x2":{"family":"bargmann_fock"},"cross":"independent"}"#)
            .unwrap();
        let m = CovarianceModel::from_spec(&s).unwrap();
        assert_eq!(m.classify(), ModelClass::Independent);

        let s = ModelSpec::from_json(
            r#"{"x2":{"family":"bargmann_fock"},"cross":{"regression":{"rho1":0.3,"z":{"family":"bargmann_fock"}}}}"#,
        )
        .unwrap();
        let m = CovarianceModel::from_spec(&s).unwrap();
        assert_eq!(m.classify(), ModelClass::General);
        assert_eq!(
            m.regression_meta().unwrap().convention,
            RegressionConvention::Consistent
        );
    }

    #[test]
    fn round_trip_and_hash() {
        let s = ModelSpec {
            x1: Some(FamilySpec::Alpha { alpha: 1.2, scale: 1.0 }),
            x2: FamilySpec::Alpha { alpha: 1.2, scale: 1.0 },
            cross: CrossSpec::Independent,
        };
        let back = ModelSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
        assert_eq!(s.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            ModelSpec::from_json(r#"{"x2":{"family":"nope"},"cross":"independent"}"#),
            Err(Error::Config(_))
        ));
        let s = ModelSpec::from_json(r#"{"x2":{"family":"alpha","alpha":2.0},"cross":"independent"}"#).unwrap();
        assert!(matches!(CovarianceModel::from_spec(&s), Err(Error::Parameter(_))));
    }
}
