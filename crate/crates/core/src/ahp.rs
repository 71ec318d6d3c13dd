//! Analytic hierarchy process: criteria hierarchies, pairwise comparison
//! matrices, priority weights, consistency ratios and distributive
//! normalization of criterion values.
//!
//! Priorities are the normalized row geometric means of a comparison matrix.
//! For a consistent matrix (`a[i][j] = w[i] / w[j]`) this reproduces `w`
//! exactly, the same vector the principal eigenvector would give.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::catalog::{attr, AttributeSpecs, Influence};
use crate::error::{Error, Result};

/// Saaty's random consistency index by matrix order (index 0 unused).
const RANDOM_INDEX: [f64; 16] = [
    0.0, 0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49, 1.51, 1.48, 1.56, 1.57, 1.59,
];

/// Judgments above this ratio are reported as inconsistent.
pub const CONSISTENCY_THRESHOLD: f64 = 0.1;

const RECIPROCITY_TOLERANCE: f64 = 1e-9;
const SCALE_SNAP_TOLERANCE: f64 = 1e-3;

/// Square reciprocal matrix of positive judgments on the 1/9..9 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl PairwiseMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let order = rows.len();
        if order == 0 {
            return Err(Error::InvalidMatrix("matrix is empty".into()));
        }
        let mut entries = Vec::with_capacity(order * order);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {order}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        let m = PairwiseMatrix { order, entries };
        m.validate()?;
        Ok(m)
    }

    /// Parses judgments entered on the discrete Saaty scale
    /// {1/9, ..., 1/2, 1, 2, ..., 9}. Entries within 1e-3 (relative) of a
    /// scale value are snapped to it, so `0.333` reads as `1/3`.
    pub fn from_judgments(rows: Vec<Vec<f64>>) -> Result<Self> {
        let snapped = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(j, v)| {
                        snap_to_scale(v).ok_or_else(|| {
                            Error::InvalidMatrix(format!(
                                "entry ({i},{j}) = {v} is not a Saaty scale value"
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        PairwiseMatrix::new(snapped)
    }

    /// All-equal judgments.
    pub fn uniform(order: usize) -> Self {
        PairwiseMatrix {
            order,
            entries: vec![1.0; order * order],
        }
    }

    /// The consistent matrix `w[i] / w[j]`.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let rows = weights
            .iter()
            .map(|wi| weights.iter().map(|wj| wi / wj).collect())
            .collect();
        PairwiseMatrix::new(rows)
    }

    fn validate(&self) -> Result<()> {
        let n = self.order;
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::InvalidMatrix(format!("entry ({i},{j}) = {v} is not positive")));
                }
                if !(1.0 / 9.0 - RECIPROCITY_TOLERANCE..=9.0 + RECIPROCITY_TOLERANCE).contains(&v) {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({i},{j}) = {v} is outside the 1/9..9 scale"
                    )));
                }
                if i == j && (v - 1.0).abs() > RECIPROCITY_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!("diagonal entry ({i},{i}) = {v} is not 1")));
                }
                if j > i && (v * self.get(j, i) - 1.0).abs() > RECIPROCITY_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!(
                        "entries ({i},{j}) = {v} and ({j},{i}) = {} are not reciprocal",
                        self.get(j, i)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.order).map(<[f64]>::to_vec).collect()
    }
}

impl Serialize for PairwiseMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

fn snap_to_scale(v: f64) -> Option<f64> {
    if !v.is_finite() || v <= 0.0 {
        return None;
    }
    (1..=9u32)
        .flat_map(|k| [k as f64, 1.0 / k as f64])
        .find(|s| ((v - s) / s).abs() <= SCALE_SNAP_TOLERANCE)
}

/// Priority vector of a comparison matrix: normalized row geometric means.
pub fn derive_weights(matrix: &PairwiseMatrix) -> Vec<f64> {
    let n = matrix.order();
    let means: Vec<f64> = (0..n)
        .map(|i| {
            let log_sum: f64 = (0..n).map(|j| matrix.get(i, j).ln()).sum();
            (log_sum / n as f64).exp()
        })
        .collect();
    let total: f64 = means.iter().sum();
    means.into_iter().map(|m| m / total).collect()
}

/// Consistency ratio CI / RI, with the principal eigenvalue estimated from the
/// derived priority vector. Orders of two or less are always consistent.
pub fn consistency_ratio(matrix: &PairwiseMatrix) -> f64 {
    let n = matrix.order();
    if n <= 2 {
        return 0.0;
    }
    let w = derive_weights(matrix);
    let lambda_max = (0..n)
        .map(|i| (0..n).map(|j| matrix.get(i, j) * w[j]).sum::<f64>() / w[i])
        .sum::<f64>()
        / n as f64;
    let ci = (lambda_max - n as f64) / (n as f64 - 1.0);
    let ri = RANDOM_INDEX[n.min(RANDOM_INDEX.len() - 1)];
    (ci / ri).max(0.0)
}

/// Distributive normalization: each value over the sum of all values; an
/// all-zero input maps every entry to `1 / N`. Returns the position of the
/// first negative value as the error.
pub fn normalize_values(values: &[f64]) -> std::result::Result<Vec<f64>, usize> {
    if let Some(pos) = values.iter().position(|v| *v < 0.0 || v.is_nan()) {
        return Err(pos);
    }
    let sum: f64 = values.iter().sum();
    if sum == 0.0 {
        let n = values.len() as f64;
        return Ok(vec![1.0 / n; values.len()]);
    }
    Ok(values.iter().map(|v| v / sum).collect())
}

/// Distributive normalization of one criterion across alternatives.
pub fn normalize_criterion(values: &[(String, f64)]) -> Result<BTreeMap<String, f64>> {
    let raw: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
    let norm = normalize_values(&raw).map_err(|pos| Error::NegativeValue {
        id: values[pos].0.clone(),
        value: values[pos].1,
    })?;
    Ok(values.iter().map(|(id, _)| id.clone()).zip(norm).collect())
}

/// Which alternative kind a criterion reads its attribute from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subject {
    Image,
    Service,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub attribute: String,
    pub influence: Influence,
    pub subject: Subject,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Goal(Vec<HierarchyNode>),
    Criterion(Criterion),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyNode {
    pub id: String,
    pub label: String,
    pub kind: NodeKind,
}

impl HierarchyNode {
    pub fn goal(id: &str, label: &str, children: Vec<HierarchyNode>) -> Self {
        HierarchyNode {
            id: id.to_owned(),
            label: label.to_owned(),
            kind: NodeKind::Goal(children),
        }
    }

    pub fn leaf(id: &str, attribute: &str, influence: Influence, subject: Subject) -> Self {
        HierarchyNode {
            id: id.to_owned(),
            label: attribute.to_owned(),
            kind: NodeKind::Criterion(Criterion {
                attribute: attribute.to_owned(),
                influence,
                subject,
            }),
        }
    }

    fn children(&self) -> &[HierarchyNode] {
        match &self.kind {
            NodeKind::Goal(c) => c,
            NodeKind::Criterion(_) => &[],
        }
    }
}

/// Goal tree whose leaves are influential attribute criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaHierarchy {
    root: HierarchyNode,
}

impl CriteriaHierarchy {
    pub fn new(root: HierarchyNode) -> Result<Self> {
        if !matches!(root.kind, NodeKind::Goal(_)) {
            return Err(Error::validation("hierarchy", &root.id, "root", "must be a goal"));
        }
        let mut ids = BTreeSet::new();
        check_node(&root, &mut ids)?;
        Ok(CriteriaHierarchy { root })
    }

    pub fn root(&self) -> &HierarchyNode {
        &self.root
    }

    /// Leaf criteria in depth-first order, as (node id, criterion).
    pub fn leaves(&self) -> Vec<(&str, &Criterion)> {
        fn walk<'a>(n: &'a HierarchyNode, out: &mut Vec<(&'a str, &'a Criterion)>) {
            match &n.kind {
                NodeKind::Criterion(c) => out.push((&n.id, c)),
                NodeKind::Goal(children) => children.iter().for_each(|c| walk(c, out)),
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Goal nodes with their number of children, depth-first.
    pub fn goals(&self) -> Vec<(&str, usize)> {
        fn walk<'a>(n: &'a HierarchyNode, out: &mut Vec<(&'a str, usize)>) {
            if let NodeKind::Goal(children) = &n.kind {
                out.push((&n.id, children.len()));
                children.iter().for_each(|c| walk(c, out));
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Keeps only the listed leaves; goals left without children are removed.
    pub fn select(&self, leaf_ids: &BTreeSet<String>) -> Result<Self> {
        let known: BTreeSet<&str> = self.leaves().into_iter().map(|(id, _)| id).collect();
        if let Some(unknown) = leaf_ids.iter().find(|id| !known.contains(id.as_str())) {
            return Err(Error::validation("hierarchy", &self.root.id, "select", format!("unknown leaf `{unknown}`")));
        }
        fn prune(n: &HierarchyNode, keep: &BTreeSet<String>) -> Option<HierarchyNode> {
            match &n.kind {
                NodeKind::Criterion(_) => keep.contains(&n.id).then(|| n.clone()),
                NodeKind::Goal(children) => {
                    let kept: Vec<_> = children.iter().filter_map(|c| prune(c, keep)).collect();
                    (!kept.is_empty()).then(|| HierarchyNode {
                        id: n.id.clone(),
                        label: n.label.clone(),
                        kind: NodeKind::Goal(kept),
                    })
                }
            }
        }
        let root = prune(&self.root, leaf_ids).ok_or_else(|| {
            Error::validation("hierarchy", &self.root.id, "select", "no leaf criteria selected")
        })?;
        CriteriaHierarchy::new(root)
    }

    /// Checks leaves against the attribute specs of their subject: attributes
    /// without influence may not be criteria, and a declared influence must
    /// agree with the declared one.
    pub fn validate_against(&self, image: &AttributeSpecs, service: &AttributeSpecs) -> Result<()> {
        for (id, c) in self.leaves() {
            let specs = match c.subject {
                Subject::Image => image,
                Subject::Service => service,
            };
            if let Some(spec) = specs.numerical(&c.attribute) {
                if spec.influence == Influence::None {
                    return Err(Error::validation(
                        "criterion",
                        id,
                        &c.attribute,
                        "has no influence and cannot be a criterion",
                    ));
                }
                if spec.influence != c.influence {
                    return Err(Error::validation(
                        "criterion",
                        id,
                        &c.attribute,
                        format!("declared {:?} but the attribute is {:?}", c.influence, spec.influence),
                    ));
                }
            } else if specs.non_numerical(&c.attribute).is_some() {
                return Err(Error::validation(
                    "criterion",
                    id,
                    &c.attribute,
                    "is non-numerical and can only be used in requirements",
                ));
            }
        }
        Ok(())
    }
}

fn check_node<'a>(n: &'a HierarchyNode, ids: &mut BTreeSet<&'a str>) -> Result<()> {
    if n.id.is_empty() {
        return Err(Error::validation("hierarchy", "", "id", "must not be empty"));
    }
    if !ids.insert(&n.id) {
        return Err(Error::validation("hierarchy", &n.id, "id", "is duplicated"));
    }
    match &n.kind {
        NodeKind::Criterion(c) => {
            if c.influence == Influence::None {
                return Err(Error::validation(
                    "criterion",
                    &n.id,
                    &c.attribute,
                    "has no influence and cannot be a criterion",
                ));
            }
        }
        NodeKind::Goal(children) => {
            if children.is_empty() {
                return Err(Error::validation("hierarchy", &n.id, "children", "goal has no children"));
            }
            for c in children {
                check_node(c, ids)?;
            }
        }
    }
    Ok(())
}

/// Wire form of a hierarchy node: a goal has `children`, a leaf has `attribute`.
/// A leaf's `influence` may be omitted for attributes with a known spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyNodeDocument {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<HierarchyNodeDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub influence: Option<Influence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<Subject>,
}

impl CriteriaHierarchy {
    /// Builds a hierarchy from its wire form. Leaves without an explicit
    /// subject inherit `default_subject`.
    pub fn from_document(
        doc: &HierarchyNodeDocument,
        default_subject: Subject,
        image: &AttributeSpecs,
        service: &AttributeSpecs,
    ) -> Result<Self> {
        fn build(
            d: &HierarchyNodeDocument,
            subject: Subject,
            image: &AttributeSpecs,
            service: &AttributeSpecs,
        ) -> Result<HierarchyNode> {
            match (&d.children, &d.attribute) {
                (Some(children), None) => {
                    let subject = d.subject.unwrap_or(subject);
                    let kids = children
                        .iter()
                        .map(|c| build(c, subject, image, service))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(HierarchyNode {
                        id: d.id.clone(),
                        label: d.label.clone().unwrap_or_else(|| d.id.clone()),
                        kind: NodeKind::Goal(kids),
                    })
                }
                (None, Some(attribute)) => {
                    let subject = d.subject.unwrap_or(subject);
                    let specs = match subject {
                        Subject::Image => image,
                        Subject::Service => service,
                    };
                    let influence = match (d.influence, specs.numerical(attribute)) {
                        (Some(i), _) => i,
                        (None, Some(spec)) => spec.influence,
                        (None, None) => {
                            return Err(Error::validation(
                                "criterion",
                                &d.id,
                                attribute,
                                "custom attribute needs an explicit influence",
                            ))
                        }
                    };
                    Ok(HierarchyNode {
                        id: d.id.clone(),
                        label: d.label.clone().unwrap_or_else(|| attribute.clone()),
                        kind: NodeKind::Criterion(Criterion {
                            attribute: attribute.clone(),
                            influence,
                            subject,
                        }),
                    })
                }
                _ => Err(Error::validation(
                    "hierarchy",
                    &d.id,
                    "children",
                    "node needs exactly one of `children` or `attribute`",
                )),
            }
        }
        let h = CriteriaHierarchy::new(build(doc, default_subject, image, service)?)?;
        h.validate_against(image, service)?;
        Ok(h)
    }

    pub fn to_document(&self) -> HierarchyNodeDocument {
        fn conv(n: &HierarchyNode) -> HierarchyNodeDocument {
            match &n.kind {
                NodeKind::Goal(children) => HierarchyNodeDocument {
                    id: n.id.clone(),
                    label: Some(n.label.clone()),
                    children: Some(children.iter().map(conv).collect()),
                    attribute: None,
                    influence: None,
                    subject: None,
                },
                NodeKind::Criterion(c) => HierarchyNodeDocument {
                    id: n.id.clone(),
                    label: Some(n.label.clone()),
                    children: None,
                    attribute: Some(c.attribute.clone()),
                    influence: Some(c.influence),
                    subject: Some(c.subject),
                },
            }
        }
        conv(&self.root)
    }
}

fn image_tree() -> HierarchyNode {
    use Influence::*;
    let leaf = |id, a, i| HierarchyNode::leaf(id, a, i, Subject::Image);
    HierarchyNode::goal(
        "image",
        "VM Image Value",
        vec![
            HierarchyNode::goal("image-cost", "Cost", vec![leaf("license-price", attr::HOURLY_LICENSE_PRICE, Negative)]),
            HierarchyNode::goal("image-popularity", "Popularity", vec![leaf("popularity", attr::POPULARITY, Positive)]),
            HierarchyNode::goal("image-maturity", "Maturity", vec![leaf("age", attr::AGE, Positive)]),
        ],
    )
}

fn service_tree() -> HierarchyNode {
    use Influence::*;
    let leaf = |id, a, i| HierarchyNode::leaf(id, a, i, Subject::Service);
    HierarchyNode::goal(
        "service",
        "Infrastructure Service Value",
        vec![
            HierarchyNode::goal(
                "service-cost",
                "Cost",
                vec![
                    leaf("cpu-price", attr::HOURLY_CPU_PRICE, Negative),
                    leaf("network-send-price", attr::NETWORK_SEND_PRICE, Negative),
                    leaf("network-receive-price", attr::NETWORK_RECEIVE_PRICE, Negative),
                    leaf("internet-send-price", attr::INTERNET_SEND_PRICE, Negative),
                    leaf("internet-receive-price", attr::INTERNET_RECEIVE_PRICE, Negative),
                ],
            ),
            HierarchyNode::goal(
                "service-performance",
                "Performance",
                vec![
                    leaf("cpu-performance", attr::CPU_PERFORMANCE, Positive),
                    leaf("ram-performance", attr::RAM_PERFORMANCE, Positive),
                    leaf("disk-performance", attr::DISK_PERFORMANCE, Positive),
                    leaf("max-latency", attr::MAX_LATENCY, Negative),
                    leaf("avg-latency", attr::AVG_LATENCY, Negative),
                ],
            ),
            HierarchyNode::goal(
                "service-capacity",
                "Capacity & Reputation",
                vec![
                    leaf("cpu-cores", attr::CPU_CORES, Positive),
                    leaf("ram-size", attr::RAM_SIZE, Positive),
                    leaf("disk-size", attr::DISK_SIZE, Positive),
                    leaf("uptime", attr::UPTIME, Positive),
                    leaf("service-popularity", attr::SERVICE_POPULARITY, Positive),
                ],
            ),
        ],
    )
}

/// Default VM image hierarchy: three goals, one criterion each.
pub fn default_image_hierarchy() -> CriteriaHierarchy {
    CriteriaHierarchy::new(image_tree()).expect("default image hierarchy is valid")
}

/// Default infrastructure service hierarchy: three goals of five criteria.
pub fn default_service_hierarchy() -> CriteriaHierarchy {
    CriteriaHierarchy::new(service_tree()).expect("default service hierarchy is valid")
}

/// Single hierarchy over image and service criteria for integrated evaluation.
pub fn default_integrated_hierarchy() -> CriteriaHierarchy {
    CriteriaHierarchy::new(HierarchyNode::goal(
        "combination",
        "Combined Solution Value",
        vec![image_tree(), service_tree()],
    ))
    .expect("default integrated hierarchy is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WeightedCriterion {
    pub id: String,
    pub attribute: String,
    pub influence: Influence,
    pub subject: Subject,
    #[serde(serialize_with = "crate::numfmt::sig9")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalWeights {
    pub leaves: Vec<WeightedCriterion>,
    /// Consistency ratio per compared goal node.
    #[serde(skip)]
    pub consistency: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Global leaf weights: products of local priorities along each root-to-leaf
/// path. Every goal with more than one child needs a matrix of matching order;
/// single-child goals pass their weight through.
pub fn global_weights(hierarchy: &CriteriaHierarchy, matrices: &BTreeMap<String, PairwiseMatrix>) -> Result<GlobalWeights> {
    let goal_ids: BTreeSet<&str> = hierarchy.goals().into_iter().map(|(id, _)| id).collect();
    if let Some(extra) = matrices.keys().find(|k| !goal_ids.contains(k.as_str())) {
        return Err(Error::InvalidMatrix(format!("matrix given for unknown goal `{extra}`")));
    }

    let mut out = GlobalWeights {
        leaves: Vec::new(),
        consistency: BTreeMap::new(),
        warnings: Vec::new(),
    };
    walk_weights(hierarchy.root(), 1.0, matrices, &mut out)?;
    Ok(out)
}

fn walk_weights(
    node: &HierarchyNode,
    weight: f64,
    matrices: &BTreeMap<String, PairwiseMatrix>,
    out: &mut GlobalWeights,
) -> Result<()> {
    match &node.kind {
        NodeKind::Criterion(c) => {
            out.leaves.push(WeightedCriterion {
                id: node.id.clone(),
                attribute: c.attribute.clone(),
                influence: c.influence,
                subject: c.subject,
                weight,
            });
            Ok(())
        }
        NodeKind::Goal(children) => {
            let local = match (children.len(), matrices.get(&node.id)) {
                (1, None) => vec![1.0],
                (_, None) => return Err(Error::MissingMatrix(node.id.clone())),
                (n, Some(m)) if m.order() != n => {
                    return Err(Error::InvalidMatrix(format!(
                        "goal `{}` has {n} children but its matrix has order {}",
                        node.id,
                        m.order()
                    )))
                }
                (_, Some(m)) => {
                    let cr = consistency_ratio(m);
                    out.consistency.insert(node.id.clone(), cr);
                    if cr > CONSISTENCY_THRESHOLD {
                        out.warnings.push(format!(
                            "comparisons under `{}` are inconsistent (CR = {:.3} > {CONSISTENCY_THRESHOLD})",
                            node.id, cr
                        ));
                    }
                    derive_weights(m)
                }
            };
            for (child, w) in node.children().iter().zip(local) {
                walk_weights(child, weight * w, matrices, out)?;
            }
            Ok(())
        }
    }
}

/// Equal comparisons for every goal of `hierarchy`.
pub fn uniform_matrices(hierarchy: &CriteriaHierarchy) -> BTreeMap<String, PairwiseMatrix> {
    hierarchy
        .goals()
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|(id, n)| (id.to_owned(), PairwiseMatrix::uniform(n)))
        .collect()
}
