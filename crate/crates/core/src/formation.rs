//! The multi-component IT system being migrated: components, their
//! interconnections with expected traffic costs, and committed solutions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub feature: String,
}

/// Expected traffic costs of one link, in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrafficCosts {
    pub local_recv: f64,
    pub local_send: f64,
    pub inet_recv: f64,
    pub inet_send: f64,
}

impl TrafficCosts {
    pub fn local(&self) -> f64 {
        self.local_recv + self.local_send
    }

    pub fn internet(&self) -> f64 {
        self.inet_recv + self.inet_send
    }

    fn all(&self) -> [(&'static str, f64); 4] {
        [
            ("localRecv", self.local_recv),
            ("localSend", self.local_send),
            ("inetRecv", self.inet_recv),
            ("inetSend", self.inet_send),
        ]
    }
}

/// An unordered interconnection between two components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<TrafficCosts>,
}

impl Link {
    pub fn new(a: impl Into<String>, b: impl Into<String>, costs: TrafficCosts) -> Self {
        Link {
            a: a.into(),
            b: b.into(),
            costs: Some(costs),
        }
    }

    pub fn touches(&self, component: &str) -> bool {
        self.a == component || self.b == component
    }

    pub fn other(&self, component: &str) -> Option<&str> {
        if self.a == component {
            Some(&self.b)
        } else if self.b == component {
            Some(&self.a)
        } else {
            None
        }
    }
}

/// A component's chosen image/service pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommittedSolution {
    pub component_id: String,
    pub image_id: String,
    pub service_id: String,
    #[serde(serialize_with = "numfmt::sig9")]
    pub score: f64,
}

/// Serialized form of a formation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationDocument {
    pub components: Vec<Component>,
    #[serde(default)]
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    components: Vec<Component>,
    links: Vec<Link>,
    committed: BTreeMap<String, CommittedSolution>,
    warnings: Vec<String>,
}

/// Validates components and links into a [`Formation`] with nothing committed.
///
/// Links without cost estimates get all-zero costs and a warning.
pub fn define_formation(components: Vec<Component>, links: Vec<Link>) -> Result<Formation> {
    if components.is_empty() {
        return Err(Error::validation("formation", "", "components", "must not be empty"));
    }
    let mut ids = BTreeSet::new();
    for c in &components {
        if c.id.is_empty() {
            return Err(Error::validation("component", "", "id", "must not be empty"));
        }
        if !ids.insert(c.id.as_str()) {
            return Err(Error::validation("component", &c.id, "id", "is duplicated"));
        }
        if c.feature.trim().is_empty() {
            return Err(Error::validation("component", &c.id, "feature", "must not be empty"));
        }
    }

    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    let mut normalized = Vec::with_capacity(links.len());
    for link in links {
        let name = format!("{}-{}", link.a, link.b);
        for end in [&link.a, &link.b] {
            if !ids.contains(end.as_str()) {
                return Err(Error::validation(
                    "link",
                    &name,
                    "endpoint",
                    format!("references unknown component `{end}`"),
                ));
            }
        }
        if link.a == link.b {
            return Err(Error::validation("link", &name, "endpoint", "connects a component to itself"));
        }
        let (a, b) = if link.a <= link.b {
            (link.a, link.b)
        } else {
            (link.b, link.a)
        };
        if !seen.insert((a.clone(), b.clone())) {
            return Err(Error::validation("link", &name, "endpoint", "is duplicated"));
        }
        let costs = match link.costs {
            Some(costs) => {
                for (field, value) in costs.all() {
                    if !value.is_finite() || value < 0.0 {
                        return Err(Error::validation(
                            "link",
                            &name,
                            field,
                            format!("cost {value} must be a non-negative number"),
                        ));
                    }
                }
                costs
            }
            None => {
                warnings.push(format!("link {a}-{b}: no traffic estimate, assuming zero costs"));
                TrafficCosts::default()
            }
        };
        normalized.push(Link {
            a,
            b,
            costs: Some(costs),
        });
    }

    Ok(Formation {
        components,
        links: normalized,
        committed: BTreeMap::new(),
        warnings,
    })
}

impl Formation {
    pub fn from_document(doc: FormationDocument) -> Result<Formation> {
        define_formation(doc.components, doc.links)
    }

    pub fn from_json(text: &str) -> Result<Formation> {
        let doc: FormationDocument =
            serde_json::from_str(text).map_err(|e| Error::parse("formation", e))?;
        Formation::from_document(doc)
    }

    pub fn to_document(&self) -> FormationDocument {
        FormationDocument {
            components: self.components.clone(),
            links: self.links.clone(),
        }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn committed(&self) -> &BTreeMap<String, CommittedSolution> {
        &self.committed
    }

    pub fn is_committed(&self, id: &str) -> bool {
        self.committed.contains_key(id)
    }

    pub(crate) fn commit(&mut self, solution: CommittedSolution) {
        self.committed.insert(solution.component_id.clone(), solution);
    }

    /// Links touching `component`, as (neighbor id, costs).
    pub fn neighbors<'a>(&'a self, component: &'a str) -> impl Iterator<Item = (&'a str, TrafficCosts)> + 'a {
        self.links.iter().filter_map(move |l| {
            l.other(component)
                .map(|o| (o, l.costs.unwrap_or_default()))
        })
    }

    /// Committed neighbors of `component` with the traffic estimate of the
    /// connecting link, ordered by neighbor id.
    pub fn related_committed(&self, component: &str) -> Result<Vec<(&CommittedSolution, TrafficCosts)>> {
        if self.component(component).is_none() {
            return Err(Error::UnknownComponent(component.to_owned()));
        }
        let mut out: Vec<_> = self
            .neighbors(component)
            .filter_map(|(o, costs)| self.committed.get(o).map(|s| (s, costs)))
            .collect();
        out.sort_by(|x, y| x.0.component_id.cmp(&y.0.component_id));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn comp(id: &str) -> Component {
        Component {
            id: id.into(),
            feature: "Web Server".into(),
        }
    }

    fn solution(c: &str) -> CommittedSolution {
        CommittedSolution {
            component_id: c.into(),
            image_id: "a1".into(),
            service_id: "s1".into(),
            score: 1.0,
        }
    }

    #[test]
    fn two_links() {
        let f = define_formation(
            vec![comp("c1"), comp("c2"), comp("c3")],
            vec![
                Link::new("c1", "c2", TrafficCosts::default()),
                Link::new("c2", "c3", TrafficCosts::default()),
            ],
        )
        .unwrap();
        assert_eq!(f.links().len(), 2);
        assert!(f.committed().is_empty());
    }

    #[test]
    fn dangling_link() {
        let err = define_formation(
            vec![comp("c1")],
            vec![Link::new("c1", "c9", TrafficCosts::default())],
        )
        .unwrap_err();
        assert!(err.to_string().contains("c9"));
    }

    #[test]
    fn single_component_is_valid() {
        let f = define_formation(vec![comp("c1")], vec![]).unwrap();
        assert_eq!(f.related_committed("c1").unwrap().len(), 0);
    }

    #[test]
    fn rejects_negative_cost_and_duplicates() {
        let bad = TrafficCosts {
            local_recv: -1.0,
            ..Default::default()
        };
        assert!(define_formation(vec![comp("c1"), comp("c2")], vec![Link::new("c1", "c2", bad)]).is_err());
        assert!(define_formation(vec![comp("c1"), comp("c1")], vec![]).is_err());
        assert!(define_formation(vec![], vec![]).is_err());
    }

    #[test]
    fn missing_costs_default_to_zero_with_warning() {
        let f = define_formation(
            vec![comp("c1"), comp("c2")],
            vec![Link {
                a: "c2".into(),
                b: "c1".into(),
                costs: None,
            }],
        )
        .unwrap();
        assert_eq!(f.warnings().len(), 1);
        assert_eq!(f.links()[0].costs, Some(TrafficCosts::default()));
        assert_eq!(f.links()[0].a, "c1");
    }

    #[test]
    fn related_only_counts_linked_commits() {
        let mut f = define_formation(
            vec![comp("c1"), comp("c2"), comp("c3")],
            vec![Link::new("c1", "c2", TrafficCosts::default())],
        )
        .unwrap();
        assert!(f.related_committed("c2").unwrap().is_empty());
        f.commit(solution("c1"));
        assert_eq!(f.related_committed("c2").unwrap().len(), 1);
        assert!(f.related_committed("c3").unwrap().is_empty());
        assert!(matches!(f.related_committed("zz"), Err(Error::UnknownComponent(_))));
    }

    proptest! {
        #[test]
        fn related_committed_matches_brute_force(
            n in 1usize..8,
            edges in proptest::collection::vec((0usize..8, 0usize..8), 0..20),
            committed in proptest::collection::vec(any::<bool>(), 8),
        ) {
            let comps: Vec<_> = (0..n).map(|i| comp(&format!("c{i}"))).collect();
            let mut pairs = BTreeSet::new();
            for (a, b) in edges {
                let (a, b) = (a % n, b % n);
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
            let links = pairs
                .iter()
                .map(|&(a, b)| Link::new(format!("c{a}"), format!("c{b}"), TrafficCosts::default()))
                .collect();
            let mut f = define_formation(comps, links).unwrap();
            for (i, _) in committed.iter().take(n).enumerate().filter(|(_, &c)| c) {
                f.commit(solution(&format!("c{i}")));
            }
            for i in 0..n {
                let got: BTreeSet<String> = f
                    .related_committed(&format!("c{i}"))
                    .unwrap()
                    .into_iter()
                    .map(|(s, _)| s.component_id.clone())
                    .collect();
                let expected: BTreeSet<String> = (0..n)
                    .filter(|&o| committed[o] && pairs.contains(&(i.min(o), i.max(o))))
                    .map(|o| format!("c{o}"))
                    .collect();
                prop_assert_eq!(got, expected);
            }
        }
    }
}
