//! Per-component preference profiles: requirements, criteria hierarchies with
//! their pairwise comparisons, and the combination policy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ahp::{
    default_image_hierarchy, default_integrated_hierarchy, default_service_hierarchy, global_weights,
    uniform_matrices, CriteriaHierarchy, GlobalWeights, HierarchyNodeDocument, PairwiseMatrix, Subject,
};
use crate::catalog::Catalog;
use crate::combination::{CombinationPolicy, Operator};
use crate::error::{Error, Result};
use crate::requirements::Requirement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Stepwise,
    Integrated,
}

/// Hierarchy choice and comparisons for one side. Without `hierarchy` the
/// built-in tree is used; `select` keeps only the listed leaves.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CriteriaDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hierarchy: Option<HierarchyNodeDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<Vec<String>>,
    #[serde(default)]
    pub matrices: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CombinationDocument {
    #[serde(default)]
    pub operator: Operator,
    /// Order-2 comparison of image versus service importance.
    #[serde(default = "equal_importance")]
    pub importance: Vec<Vec<f64>>,
    #[serde(default = "yes")]
    pub apply_network_delta: bool,
}

impl Default for CombinationDocument {
    fn default() -> Self {
        CombinationDocument {
            operator: Operator::Sum,
            importance: equal_importance(),
            apply_network_delta: true,
        }
    }
}

fn equal_importance() -> Vec<Vec<f64>> {
    vec![vec![1.0, 1.0], vec![1.0, 1.0]]
}

fn yes() -> bool {
    true
}

/// Preferences JSON document.
///
/// Omitting a side's criteria block entirely means "built-in hierarchy, all
/// comparisons equal"; a block that is present must supply a matrix for
/// every goal with more than one child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PreferencesDocument {
    #[serde(default)]
    pub image_requirements: Vec<Requirement>,
    #[serde(default)]
    pub service_requirements: Vec<Requirement>,
    #[serde(default = "yes")]
    pub relax_service_requirements: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<CriteriaDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<CriteriaDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrated: Option<CriteriaDocument>,
    #[serde(default)]
    pub combination: CombinationDocument,
    #[serde(default)]
    pub mode: Mode,
}

impl Default for PreferencesDocument {
    fn default() -> Self {
        PreferencesDocument {
            image_requirements: Vec::new(),
            service_requirements: Vec::new(),
            relax_service_requirements: true,
            image: None,
            service: None,
            integrated: None,
            combination: CombinationDocument::default(),
            mode: Mode::Stepwise,
        }
    }
}

impl PreferencesDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("preferences", e))
    }
}

/// A validated profile with derived weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceProfile {
    pub image_requirements: Vec<Requirement>,
    pub service_requirements: Vec<Requirement>,
    pub relax_service_requirements: bool,
    pub image_weights: GlobalWeights,
    pub service_weights: GlobalWeights,
    pub integrated_weights: Option<GlobalWeights>,
    pub policy: CombinationPolicy,
    pub mode: Mode,
    pub warnings: Vec<String>,
}

impl PreferenceProfile {
    pub fn resolve(doc: &PreferencesDocument, catalog: &Catalog) -> Result<Self> {
        for r in &doc.image_requirements {
            r.validate(catalog.image_specs())?;
        }
        for r in &doc.service_requirements {
            r.validate(catalog.service_specs())?;
        }

        let image_weights = side_weights(doc.image.as_ref(), default_image_hierarchy, Subject::Image, catalog)?;
        let service_weights =
            side_weights(doc.service.as_ref(), default_service_hierarchy, Subject::Service, catalog)?;
        let integrated_weights = match doc.mode {
            Mode::Integrated => Some(side_weights(
                doc.integrated.as_ref(),
                default_integrated_hierarchy,
                Subject::Image,
                catalog,
            )?),
            Mode::Stepwise => None,
        };
        for (side, w) in [("image", &image_weights), ("service", &service_weights)] {
            let want = if side == "image" { Subject::Image } else { Subject::Service };
            if let Some(c) = w.leaves.iter().find(|c| c.subject != want) {
                return Err(Error::validation(
                    "criterion",
                    &c.id,
                    "subject",
                    format!("{side} hierarchy contains a {:?} criterion", c.subject),
                ));
            }
        }

        let importance = PairwiseMatrix::from_judgments(doc.combination.importance.clone())?;
        let policy = CombinationPolicy::from_importance(
            &importance,
            doc.combination.operator,
            doc.combination.apply_network_delta,
        )?;

        let mut warnings = Vec::new();
        for (side, w) in [("image", Some(&image_weights)), ("service", Some(&service_weights)), ("integrated", integrated_weights.as_ref())] {
            if let Some(w) = w {
                warnings.extend(w.warnings.iter().map(|m| format!("{side}: {m}")));
            }
        }

        Ok(PreferenceProfile {
            image_requirements: doc.image_requirements.clone(),
            service_requirements: doc.service_requirements.clone(),
            relax_service_requirements: doc.relax_service_requirements,
            image_weights,
            service_weights,
            integrated_weights,
            policy,
            mode: doc.mode,
            warnings,
        })
    }
}

fn side_weights(
    doc: Option<&CriteriaDocument>,
    default: fn() -> CriteriaHierarchy,
    subject: Subject,
    catalog: &Catalog,
) -> Result<GlobalWeights> {
    let Some(doc) = doc else {
        let h = default();
        return global_weights(&h, &uniform_matrices(&h));
    };
    let mut h = match &doc.hierarchy {
        Some(tree) => CriteriaHierarchy::from_document(tree, subject, catalog.image_specs(), catalog.service_specs())?,
        None => default(),
    };
    if let Some(select) = &doc.select {
        h = h.select(&select.iter().cloned().collect::<BTreeSet<_>>())?;
    }
    let matrices = doc
        .matrices
        .iter()
        .map(|(id, rows)| {
            PairwiseMatrix::from_judgments(rows.clone())
                .map(|m| (id.clone(), m))
                .map_err(|e| Error::InvalidMatrix(format!("goal `{id}`: {e}")))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    global_weights(&h, &matrices)
}
