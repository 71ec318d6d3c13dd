//! Migration sessions: component selection, preferences, evaluation and
//! commits over one formation, recorded as an append-only event log.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::ahp::WeightedCriterion;
use crate::catalog::{Catalog, CloudService, VmImage};
use crate::combination::{combine, integrated_evaluate, CombinationPolicy, CombinedSolution};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_images, evaluate_services, Ranking};
use crate::formation::{CommittedSolution, Formation, FormationDocument};
use crate::profile::{Mode, PreferenceProfile, PreferencesDocument};
use crate::requirements::filter;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Weights {
    pub image: Vec<WeightedCriterion>,
    pub service: Vec<WeightedCriterion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrated: Option<Vec<WeightedCriterion>>,
}

/// Output of one evaluation round for a component.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Recommendation {
    pub component: String,
    pub mode: Mode,
    pub policy: CombinationPolicy,
    pub weights: Weights,
    pub image_ranking: Ranking,
    pub service_ranking: Ranking,
    pub combinations: Vec<CombinedSolution>,
    pub warnings: Vec<String>,
}

impl Recommendation {
    pub fn best(&self) -> Option<&CombinedSolution> {
        self.combinations.iter().find(|c| c.feasible)
    }

    pub fn find(&self, image: &str, service: &str) -> Option<&CombinedSolution> {
        self.combinations
            .iter()
            .find(|c| c.image_id == image && c.service_id == service)
    }

    /// SHA-256 of the serialized result, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("recommendation serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Copy with at most `n` combinations.
    pub fn truncated(&self, n: usize) -> Recommendation {
        let mut r = self.clone();
        r.combinations.truncate(n);
        r
    }
}

/// Runs filtering, evaluation and combination for `component` against the
/// formation's committed neighbors.
pub fn recommend(
    catalog: &Catalog,
    formation: &Formation,
    component: &str,
    profile: &PreferenceProfile,
) -> Result<Recommendation> {
    let comp = formation
        .component(component)
        .ok_or_else(|| Error::UnknownComponent(component.to_owned()))?;
    let images: Vec<&VmImage> = catalog.images_with_feature(&comp.feature);
    let mut services: Vec<&CloudService> = catalog.services().iter().collect();
    services.sort_by(|a, b| a.id.cmp(&b.id));

    let mut warnings = profile.warnings.clone();
    if images.is_empty() {
        warnings.push(format!("no image offers feature `{}`", comp.feature));
    }

    let image_outcome = filter(&profile.image_requirements, &images, true)?;
    let service_outcome = filter(&profile.service_requirements, &services, profile.relax_service_requirements)?;
    if image_outcome.relaxation_level > 0 {
        warnings.push(format!("image requirements relaxed to level {}", image_outcome.relaxation_level));
    }
    if service_outcome.relaxation_level > 0 {
        warnings.push(format!("service requirements relaxed to level {}", service_outcome.relaxation_level));
    }
    let image_ranking = evaluate_images(&images, &image_outcome, &profile.image_weights.leaves)?;
    let service_ranking = evaluate_services(&services, &service_outcome, &profile.service_weights.leaves)?;

    let combinations = match (profile.mode, &profile.integrated_weights) {
        (Mode::Integrated, Some(w)) => {
            let surviving_images: Vec<&VmImage> =
                images.iter().copied().filter(|i| image_outcome.survivor(&i.id).is_some()).collect();
            let surviving_services: Vec<&CloudService> = services
                .iter()
                .copied()
                .filter(|s| service_outcome.survivor(&s.id).is_some())
                .collect();
            integrated_evaluate(
                catalog,
                &surviving_images,
                &surviving_services,
                &w.leaves,
                formation,
                component,
                &profile.policy,
            )?
        }
        _ => combine(&image_ranking, &service_ranking, formation, component, catalog, &profile.policy)?,
    };

    Ok(Recommendation {
        component: component.to_owned(),
        mode: profile.mode,
        policy: profile.policy,
        weights: Weights {
            image: profile.image_weights.leaves.clone(),
            service: profile.service_weights.leaves.clone(),
            integrated: profile.integrated_weights.as_ref().map(|w| w.leaves.clone()),
        },
        image_ranking,
        service_ranking,
        combinations,
        warnings,
    })
}

/// Source of event timestamps in milliseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Clock {
    System,
    /// Counts up from the given value; makes logs reproducible.
    Logical(u64),
}

impl Clock {
    fn tick(&mut self) -> u64 {
        match self {
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            Clock::Logical(next) => {
                let t = *next;
                *next += 1;
                t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum EventType {
    DefineFormation,
    SelectComponent,
    SetPreferences,
    Evaluate,
    Commit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    #[serde(rename = "type")]
    pub kind: EventType,
    pub payload: Value,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventLog {
    pub session_id: String,
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("event log", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("event log serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HistoryEntry {
    pub component: String,
    pub solution: CommittedSolution,
    pub at: u64,
    /// Position of the chosen pair in the evaluated ranking, from 1.
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
struct StoredPreferences {
    document: PreferencesDocument,
    profile: PreferenceProfile,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    catalog: Arc<Catalog>,
    formation: Formation,
    pending: Option<String>,
    candidates: Vec<String>,
    preferences: BTreeMap<String, StoredPreferences>,
    last: Option<Recommendation>,
    history: Vec<HistoryEntry>,
    events: Vec<Event>,
    clock: Clock,
    replay_at: Option<u64>,
}

/// Serializable view of a session.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionSnapshot<'a> {
    pub session_id: &'a str,
    pub catalog_digest: String,
    pub formation: FormationDocument,
    pub committed: Vec<&'a CommittedSolution>,
    pub pending_component: Option<&'a str>,
    pub candidate_images: &'a [String],
    pub preferences: BTreeMap<&'a str, &'a PreferencesDocument>,
    pub last_results: Option<&'a Recommendation>,
    pub history: &'a [HistoryEntry],
}

impl Session {
    pub fn new(id: impl Into<String>, catalog: Arc<Catalog>, formation: Formation, clock: Clock) -> Session {
        let mut s = Session {
            id: id.into(),
            catalog,
            formation,
            pending: None,
            candidates: Vec::new(),
            preferences: BTreeMap::new(),
            last: None,
            history: Vec::new(),
            events: Vec::new(),
            clock,
            replay_at: None,
        };
        let payload = s.formation_payload();
        s.record(EventType::DefineFormation, payload);
        s
    }

    fn formation_payload(&self) -> Value {
        json!({
            "catalogDigest": self.catalog.digest(),
            "formation": self.formation.to_document(),
        })
    }

    fn record(&mut self, kind: EventType, payload: Value) -> u64 {
        let at = match self.replay_at.take() {
            Some(t) => t,
            None => self.clock.tick(),
        };
        self.events.push(Event { kind, payload, at });
        at
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn formation(&self) -> &Formation {
        &self.formation
    }

    pub fn pending(&self) -> Option<&str> {
        self.pending.as_deref()
    }

    /// Images matching the pending component's feature.
    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn last_results(&self) -> Option<&Recommendation> {
        self.last.as_ref()
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn preferences(&self, component: &str) -> Option<&PreferencesDocument> {
        self.preferences.get(component).map(|p| &p.document)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event_log(&self) -> EventLog {
        EventLog {
            session_id: self.id.clone(),
            events: self.events.clone(),
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot<'_> {
        SessionSnapshot {
            session_id: &self.id,
            catalog_digest: self.catalog.digest(),
            formation: self.formation.to_document(),
            committed: self.formation.committed().values().collect(),
            pending_component: self.pending.as_deref(),
            candidate_images: &self.candidates,
            preferences: self.preferences.iter().map(|(k, v)| (k.as_str(), &v.document)).collect(),
            last_results: self.last.as_ref(),
            history: &self.history,
        }
    }

    /// Replaces the formation. Only allowed before the first commit.
    pub fn redefine_formation(&mut self, formation: Formation) -> Result<()> {
        if let Some(c) = self.formation.committed().keys().next() {
            return Err(Error::AlreadyCommitted(c.clone()));
        }
        self.formation = formation;
        self.pending = None;
        self.candidates.clear();
        self.preferences.clear();
        self.last = None;
        let payload = self.formation_payload();
        self.record(EventType::DefineFormation, payload);
        Ok(())
    }

    /// Makes `component` the pending one and returns its candidate images.
    pub fn select_component(&mut self, component: &str) -> Result<&[String]> {
        self.check_open(component)?;
        let feature = &self.formation.component(component).expect("checked").feature;
        self.candidates = self
            .catalog
            .images_with_feature(feature)
            .into_iter()
            .map(|i| i.id.clone())
            .collect();
        self.pending = Some(component.to_owned());
        self.last = None;
        self.record(EventType::SelectComponent, json!({ "component": component }));
        Ok(&self.candidates)
    }

    fn check_open(&self, component: &str) -> Result<()> {
        if self.formation.component(component).is_none() {
            return Err(Error::UnknownComponent(component.to_owned()));
        }
        if self.formation.is_committed(component) {
            return Err(Error::AlreadyCommitted(component.to_owned()));
        }
        Ok(())
    }

    /// Validates and stores preferences for an uncommitted component.
    pub fn set_preferences(&mut self, component: &str, document: PreferencesDocument) -> Result<&PreferenceProfile> {
        self.check_open(component)?;
        let profile = PreferenceProfile::resolve(&document, &self.catalog)?;
        self.record(
            EventType::SetPreferences,
            json!({ "component": component, "preferences": document }),
        );
        self.preferences
            .insert(component.to_owned(), StoredPreferences { document, profile });
        Ok(&self.preferences[component].profile)
    }

    /// Evaluates the pending component with its stored preferences, or with
    /// defaults when none were set. Failed evaluations leave no trace.
    pub fn evaluate(&mut self) -> Result<&Recommendation> {
        let component = self.pending.clone().ok_or(Error::NoPendingComponent)?;
        let default;
        let profile = match self.preferences.get(&component) {
            Some(p) => &p.profile,
            None => {
                default = PreferenceProfile::resolve(&PreferencesDocument::default(), &self.catalog)?;
                &default
            }
        };
        let rec = recommend(&self.catalog, &self.formation, &component, profile)?;
        let best = rec.best().map(|b| json!({ "image": b.image_id, "service": b.service_id }));
        self.record(
            EventType::Evaluate,
            json!({ "component": component, "resultDigest": rec.digest(), "best": best }),
        );
        self.last = Some(rec);
        Ok(self.last.as_ref().expect("just stored"))
    }

    /// Commits a feasible evaluated pair for the pending component. Any
    /// feasible pair may be chosen, not only the top one.
    pub fn commit(&mut self, image: &str, service: &str, note: Option<String>) -> Result<&HistoryEntry> {
        let component = self.pending.clone().ok_or(Error::NoPendingComponent)?;
        let rec = self
            .last
            .as_ref()
            .filter(|r| r.component == component)
            .ok_or_else(|| Error::NotEvaluated(component.clone()))?;
        let (rank, chosen) = rec
            .combinations
            .iter()
            .enumerate()
            .find(|(_, c)| c.image_id == image && c.service_id == service && c.feasible)
            .ok_or_else(|| Error::InfeasibleSelection {
                image: image.to_owned(),
                service: service.to_owned(),
            })?;
        let solution = CommittedSolution {
            component_id: component.clone(),
            image_id: image.to_owned(),
            service_id: service.to_owned(),
            score: chosen.combined_score,
        };
        let rank = rank + 1;
        let mut payload = json!({
            "component": component,
            "image": image,
            "service": service,
            "score": crate::numfmt::round_sig(solution.score),
        });
        if let Some(n) = &note {
            payload["note"] = json!(n);
        }
        let at = self.record(EventType::Commit, payload);
        self.formation.commit(solution.clone());
        self.history.push(HistoryEntry {
            component,
            solution,
            at,
            rank,
            note,
        });
        self.pending = None;
        self.candidates.clear();
        self.last = None;
        Ok(self.history.last().expect("just pushed"))
    }

    /// Rebuilds a session from its event log, checking that every recorded
    /// evaluation reproduces the same result digest.
    pub fn replay(catalog: Arc<Catalog>, log: &EventLog) -> Result<Session> {
        let mut session: Option<Session> = None;
        for (index, event) in log.events.iter().enumerate() {
            let mismatch = |message: String| Error::ReplayMismatch { index, message };
            let field = |name: &str| -> Result<&str> {
                event.payload[name]
                    .as_str()
                    .ok_or_else(|| mismatch(format!("payload lacks `{name}`")))
            };
            if event.kind == EventType::DefineFormation {
                let digest = field("catalogDigest")?;
                if digest != catalog.digest() {
                    return Err(mismatch("catalog digest differs".into()));
                }
                let doc: FormationDocument = serde_json::from_value(event.payload["formation"].clone())
                    .map_err(|e| Error::parse("formation", e))?;
                let formation = Formation::from_document(doc)?;
                match session.as_mut() {
                    None => {
                        let mut s = Session::new(log.session_id.clone(), catalog.clone(), formation, Clock::Logical(0));
                        s.events[0].at = event.at;
                        session = Some(s);
                    }
                    Some(s) => {
                        s.replay_at = Some(event.at);
                        s.redefine_formation(formation)?;
                    }
                }
                continue;
            }
            let s = session
                .as_mut()
                .ok_or_else(|| mismatch("log does not start with defineFormation".into()))?;
            s.replay_at = Some(event.at);
            match event.kind {
                EventType::DefineFormation => unreachable!(),
                EventType::SelectComponent => {
                    s.select_component(field("component")?)?;
                }
                EventType::SetPreferences => {
                    let doc: PreferencesDocument = serde_json::from_value(event.payload["preferences"].clone())
                        .map_err(|e| Error::parse("preferences", e))?;
                    s.set_preferences(field("component")?, doc)?;
                }
                EventType::Evaluate => {
                    let want = field("resultDigest")?.to_owned();
                    let got = s.evaluate()?.digest();
                    if got != want {
                        return Err(mismatch(format!("result digest {got} != recorded {want}")));
                    }
                }
                EventType::Commit => {
                    let note = event.payload["note"].as_str().map(str::to_owned);
                    s.commit(field("image")?, field("service")?, note)?;
                }
            }
            let last = s.events.last().expect("event recorded");
            if last != event {
                return Err(mismatch("re-recorded event differs".into()));
            }
        }
        session.ok_or_else(|| Error::ReplayMismatch {
            index: 0,
            message: "empty event log".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CATALOG: &str = r#"{
      "providers": [{"id": "p1", "name": "One"}, {"id": "p2", "name": "Two"}],
      "images": [
        {"id": "w1", "feature": "Web Server", "numerical": {"Popularity": 10, "Age": 2, "Hourly License Price": 0}},
        {"id": "w2", "feature": "Web Server", "numerical": {"Popularity": 20, "Age": 1, "Hourly License Price": 1}},
        {"id": "d1", "feature": "Database", "numerical": {"Popularity": 5, "Age": 3, "Hourly License Price": 2}}
      ],
      "services": [
        {"id": "s1", "provider": "p1", "location": "DE", "numerical": {"Hourly CPU Price": 0.1, "Uptime": 99.9}},
        {"id": "s2", "provider": "p2", "location": "US", "numerical": {"Hourly CPU Price": 0.2, "Uptime": 99.0}}
      ],
      "compat": {
        "imageService": [["w1","s1"],["w1","s2"],["w2","s1"],["w2","s2"],["d1","s1"],["d1","s2"]],
        "imageImage": [["w1","d1"]],
        "serviceService": [["s1","s1"],["s1","s2"],["s2","s2"]]
      }
    }"#;

    const FORMATION: &str = r#"{
      "components": [{"id": "web", "feature": "Web Server"}, {"id": "db", "feature": "Database"}, {"id": "cache", "feature": "Cache"}],
      "links": [{"a": "web", "b": "db", "costs": {"localRecv": 0.01, "localSend": 0.02, "inetRecv": 0.1, "inetSend": 0.2}}]
    }"#;

    fn session() -> Session {
        let catalog = Arc::new(Catalog::from_json(CATALOG).unwrap());
        Session::new("s", catalog, Formation::from_json(FORMATION).unwrap(), Clock::Logical(100))
    }

    #[test]
    fn select_filters_candidates() {
        let mut s = session();
        assert_eq!(s.select_component("web").unwrap(), ["w1", "w2"]);
        assert!(matches!(s.select_component("nope"), Err(Error::UnknownComponent(_))));
        assert!(s.select_component("cache").unwrap().is_empty());
        assert!(matches!(s.evaluate(), Err(Error::NoFeasibleCombination(_))));
    }

    #[test]
    fn commit_requires_evaluation_and_feasibility() {
        let mut s = session();
        assert!(matches!(s.commit("w1", "s1", None), Err(Error::NoPendingComponent)));
        s.select_component("web").unwrap();
        assert!(matches!(s.commit("w1", "s1", None), Err(Error::NotEvaluated(_))));
        s.evaluate().unwrap();
        assert!(matches!(s.commit("d1", "s1", None), Err(Error::InfeasibleSelection { .. })));
        let e = s.commit("w1", "s2", Some("deployed".into())).unwrap();
        assert_eq!(e.solution.image_id, "w1");
        assert!(s.formation().is_committed("web"));
        assert!(matches!(s.select_component("web"), Err(Error::AlreadyCommitted(_))));
    }

    #[test]
    fn neighbor_constraints_apply() {
        let mut s = session();
        s.select_component("web").unwrap();
        s.evaluate().unwrap();
        s.commit("w2", "s2", None).unwrap();
        s.select_component("db").unwrap();
        // d1 is only compatible with w1
        assert!(matches!(s.evaluate(), Err(Error::NoFeasibleCombination(_))));
        let mut s = session();
        s.select_component("web").unwrap();
        s.evaluate().unwrap();
        s.commit("w1", "s1", None).unwrap();
        s.select_component("db").unwrap();
        let r = s.evaluate().unwrap();
        let same = r.find("d1", "s1").unwrap();
        let other = r.find("d1", "s2").unwrap();
        assert!((same.network_delta - 0.03).abs() < 1e-12);
        assert!((other.network_delta - 0.3).abs() < 1e-12);
    }

    #[test]
    fn evaluation_is_idempotent() {
        let mut s = session();
        s.select_component("web").unwrap();
        let a = s.evaluate().unwrap().clone();
        let b = s.evaluate().unwrap().clone();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(s.history().len(), 0);
    }

    #[test]
    fn replay_reproduces_log() {
        let mut s = session();
        s.select_component("web").unwrap();
        let doc = PreferencesDocument::from_json(r#"{"combination": {"operator": "product"}}"#).unwrap();
        s.set_preferences("web", doc).unwrap();
        s.evaluate().unwrap();
        s.commit("w1", "s1", None).unwrap();
        s.select_component("db").unwrap();
        s.evaluate().unwrap();
        s.commit("d1", "s1", Some("customized".into())).unwrap();
        let log = s.event_log();
        let r = Session::replay(s.catalog().clone(), &log).unwrap();
        assert_eq!(r.event_log().to_json(), log.to_json());
        assert_eq!(r.history(), s.history());

        let mut bad = log.clone();
        bad.events[3].payload["resultDigest"] = json!("00");
        assert!(matches!(
            Session::replay(s.catalog().clone(), &bad),
            Err(Error::ReplayMismatch { index: 3, .. })
        ));
    }

    #[test]
    fn redefine_only_before_commit() {
        let mut s = session();
        s.redefine_formation(Formation::from_json(FORMATION).unwrap()).unwrap();
        s.select_component("web").unwrap();
        s.evaluate().unwrap();
        s.commit("w1", "s1", None).unwrap();
        assert!(s.redefine_formation(Formation::from_json(FORMATION).unwrap()).is_err());
    }
}
