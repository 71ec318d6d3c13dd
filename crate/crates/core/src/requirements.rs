//! Satisficing requirement checks and conjunctive filtering with stepwise
//! relaxation.
//!
//! Numerical bounds are strict: `Max(v)` passes only for values below `v` and
//! `Min(v)` only for values above it. An attribute missing on an alternative
//! fails every requirement placed on it.
//!
//! When no alternative meets every requirement, [`filter`] admits alternatives
//! violating at most one requirement, then at most two, and so on. Taking the
//! union over all dropped subsets of size `k` is the same as thresholding the
//! per-alternative violation count at `k`, which is how it is computed here.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::catalog::{Alternative, AttributeSpecs};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RequirementKind {
    Max,
    Min,
    Equals,
    OneOf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    Max(f64),
    Min(f64),
    Equals(String),
    OneOf(BTreeSet<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RequirementDocument", into = "RequirementDocument")]
pub struct Requirement {
    pub attribute: String,
    pub condition: Condition,
}

impl Requirement {
    pub fn max(attribute: impl Into<String>, bound: f64) -> Self {
        Requirement {
            attribute: attribute.into(),
            condition: Condition::Max(bound),
        }
    }

    pub fn min(attribute: impl Into<String>, bound: f64) -> Self {
        Requirement {
            attribute: attribute.into(),
            condition: Condition::Min(bound),
        }
    }

    pub fn equals(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Requirement {
            attribute: attribute.into(),
            condition: Condition::Equals(value.into()),
        }
    }

    pub fn one_of<I, S>(attribute: impl Into<String>, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Requirement {
            attribute: attribute.into(),
            condition: Condition::OneOf(values.into_iter().map(Into::into).collect()),
        }
    }

    pub fn kind(&self) -> RequirementKind {
        match self.condition {
            Condition::Max(_) => RequirementKind::Max,
            Condition::Min(_) => RequirementKind::Min,
            Condition::Equals(_) => RequirementKind::Equals,
            Condition::OneOf(_) => RequirementKind::OneOf,
        }
    }

    fn is_numeric(&self) -> bool {
        matches!(self.condition, Condition::Max(_) | Condition::Min(_))
    }

    fn mismatch(&self) -> Error {
        Error::TypeMismatch {
            attribute: self.attribute.clone(),
            expected: if self.is_numeric() { "numerical" } else { "non-numerical" },
        }
    }

    /// Checks the requirement's value type against known attribute specs.
    pub fn validate(&self, specs: &AttributeSpecs) -> Result<()> {
        let wrong_side = if self.is_numeric() {
            specs.non_numerical(&self.attribute).is_some()
        } else {
            specs.numerical(&self.attribute).is_some()
        };
        if wrong_side {
            return Err(self.mismatch());
        }
        Ok(())
    }
}

/// Wire form: `{attr, kind, value | values[]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequirementDocument {
    attr: String,
    kind: RequirementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
}

impl TryFrom<RequirementDocument> for Requirement {
    type Error = String;

    fn try_from(doc: RequirementDocument) -> std::result::Result<Self, String> {
        let attr = doc.attr;
        let condition = match (doc.kind, doc.value, doc.values) {
            (RequirementKind::Max | RequirementKind::Min, Some(v), None) => {
                let bound = v
                    .as_f64()
                    .filter(|b| b.is_finite())
                    .ok_or_else(|| format!("requirement on `{attr}` needs a numeric `value`"))?;
                if doc.kind == RequirementKind::Max {
                    Condition::Max(bound)
                } else {
                    Condition::Min(bound)
                }
            }
            (RequirementKind::Equals, Some(serde_json::Value::String(s)), None) => Condition::Equals(s),
            (RequirementKind::OneOf, None, Some(values)) if !values.is_empty() => {
                Condition::OneOf(values.into_iter().collect())
            }
            (kind, _, _) => {
                return Err(format!(
                    "requirement on `{attr}` of kind {kind:?} has the wrong operand \
                     (max/min: numeric `value`; equals: text `value`; oneOf: non-empty `values`)"
                ))
            }
        };
        Ok(Requirement {
            attribute: attr,
            condition,
        })
    }
}

impl From<Requirement> for RequirementDocument {
    fn from(r: Requirement) -> Self {
        let kind = r.kind();
        let (value, values) = match r.condition {
            Condition::Max(v) | Condition::Min(v) => (Some(serde_json::json!(v)), None),
            Condition::Equals(s) => (Some(serde_json::Value::String(s)), None),
            Condition::OneOf(set) => (None, Some(set.into_iter().collect())),
        };
        RequirementDocument {
            attr: r.attribute,
            kind,
            value,
            values,
        }
    }
}

/// Evaluates one requirement against one alternative.
pub fn check(requirement: &Requirement, alternative: &impl Alternative) -> Result<bool> {
    let key = requirement.attribute.as_str();
    match &requirement.condition {
        Condition::Max(bound) | Condition::Min(bound) => match alternative.numeric(key) {
            Some(v) => Ok(match requirement.condition {
                Condition::Max(_) => v < *bound,
                _ => v > *bound,
            }),
            None if alternative.text(key).is_some() => Err(requirement.mismatch()),
            None => Ok(false),
        },
        Condition::Equals(s) => match alternative.text(key) {
            Some(v) => Ok(v == s),
            None if alternative.numeric(key).is_some() => Err(requirement.mismatch()),
            None => Ok(false),
        },
        Condition::OneOf(set) => match alternative.text(key) {
            Some(v) => Ok(set.contains(v)),
            None if alternative.numeric(key).is_some() => Err(requirement.mismatch()),
            None => Ok(false),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Survivor {
    pub id: String,
    /// Indices into the requirement list that this alternative violates.
    pub violated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FilterOutcome {
    pub survivors: Vec<Survivor>,
    pub relaxation_level: usize,
}

impl FilterOutcome {
    pub fn survivor(&self, id: &str) -> Option<&Survivor> {
        self.survivors
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.survivors[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.survivors.iter().map(|s| s.id.as_str())
    }
}

/// Indices of the requirements `alternative` violates.
pub fn violations(requirements: &[Requirement], alternative: &impl Alternative) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (k, r) in requirements.iter().enumerate() {
        if !check(r, alternative)? {
            out.push(k);
        }
    }
    Ok(out)
}

/// Filters `alternatives` by all requirements, relaxing stepwise when
/// `relax` is set and strict filtering leaves nothing. Survivors are ordered
/// by id.
pub fn filter<A: Alternative>(requirements: &[Requirement], alternatives: &[A], relax: bool) -> Result<FilterOutcome> {
    let mut scored = Vec::with_capacity(alternatives.len());
    for alt in alternatives {
        scored.push((alt.id(), violations(requirements, alt)?));
    }
    let level = if relax {
        scored.iter().map(|(_, v)| v.len()).min().unwrap_or(0)
    } else {
        0
    };
    let mut survivors: Vec<Survivor> = scored
        .into_iter()
        .filter(|(_, v)| v.len() <= level)
        .map(|(id, violated)| Survivor {
            id: id.to_owned(),
            violated,
        })
        .collect();
    survivors.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(FilterOutcome {
        survivors,
        relaxation_level: level,
    })
}

/// Survivors admitted at a fixed relaxation level, by id.
pub fn survivors_at_level<A: Alternative>(requirements: &[Requirement], alternatives: &[A], level: usize) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for alt in alternatives {
        if violations(requirements, alt)?.len() <= level {
            out.push(alt.id().to_owned());
        }
    }
    out.sort();
    Ok(out)
}
