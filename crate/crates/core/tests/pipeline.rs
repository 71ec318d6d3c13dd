use std::sync::Arc;

use formation_genius::catalog::Catalog;
use formation_genius::formation::Formation;
use formation_genius::profile::PreferencesDocument;
use formation_genius::session::{Clock, Session};
use formation_genius::Error;
use serde_json::json;

/// Five web-server and three app-server images; E holds one image pair.
fn catalog(image_image: serde_json::Value) -> Arc<Catalog> {
    let mut images = Vec::new();
    for k in 1..=5 {
        images.push(json!({"id": format!("w{k}"), "feature": "Web Server",
            "numerical": {"Popularity": 10 * k, "Age": 100 + k, "Hourly License Price": 0.1 * k as f64}}));
    }
    for k in 1..=3 {
        images.push(json!({"id": format!("a{k}"), "feature": "Application Server",
            "numerical": {"Popularity": 20 * k, "Age": 50 * k, "Hourly License Price": 0.05}}));
    }
    let services = json!([
        {"id": "s1", "provider": "p", "location": "DE", "numerical": {"Hourly CPU Price": 0.1, "Uptime": 99.5}},
        {"id": "s2", "provider": "q", "location": "US", "numerical": {"Hourly CPU Price": 0.2, "Uptime": 99.9}}
    ]);
    let mut d = Vec::new();
    for i in &images {
        for s in ["s1", "s2"] {
            d.push(json!([i["id"], s]));
        }
    }
    let doc = json!({
        "providers": [{"id": "p", "name": "P"}, {"id": "q", "name": "Q"}],
        "images": images,
        "services": services,
        "compat": {"imageService": d, "imageImage": image_image, "serviceService": [["s1","s1"],["s1","s2"],["s2","s2"]]}
    });
    Arc::new(Catalog::from_json(&doc.to_string()).unwrap())
}

fn formation() -> Formation {
    Formation::from_json(
        r#"{"components": [{"id": "c1", "feature": "Web Server"}, {"id": "c2", "feature": "Application Server"}],
            "links": [{"a": "c1", "b": "c2", "costs": {"localRecv": 0.1, "localSend": 0.1, "inetRecv": 1, "inetSend": 1}}]}"#,
    )
    .unwrap()
}

fn feasible_count(s: &Session) -> usize {
    s.last_results().unwrap().combinations.iter().filter(|c| c.feasible).count()
}

#[test]
fn candidate_pool_matches_feature() {
    let mut s = Session::new("t", catalog(json!([])), formation(), Clock::Logical(0));
    assert_eq!(s.select_component("c1").unwrap().len(), 5);
    assert_eq!(s.select_component("c2").unwrap().len(), 3);
}

#[test]
fn first_component_has_unit_deltas() {
    let mut s = Session::new("t", catalog(json!([])), formation(), Clock::Logical(0));
    s.select_component("c1").unwrap();
    let r = s.evaluate().unwrap();
    assert!(r.combinations.iter().all(|c| c.network_delta == 0.0 && c.normalized_delta == 1.0));
    assert_eq!(r.combinations.len(), 10);
}

#[test]
fn committed_neighbor_shrinks_feasible_set() {
    let mut s = Session::new("t", catalog(json!([["w1", "a2"]])), formation(), Clock::Logical(0));
    s.select_component("c2").unwrap();
    s.evaluate().unwrap();
    let unconstrained = feasible_count(&s);
    assert_eq!(unconstrained, 6);

    s.select_component("c1").unwrap();
    s.evaluate().unwrap();
    s.commit("w1", "s1", None).unwrap();
    s.select_component("c2").unwrap();
    let r = s.evaluate().unwrap();
    let feasible: Vec<_> = r.combinations.iter().filter(|c| c.feasible).collect();
    assert_eq!(feasible.len(), 2);
    assert!(feasible.iter().all(|c| c.image_id == "a2"));
    // same provider and location as the neighbor: local costs
    assert_eq!(r.find("a2", "s1").unwrap().network_delta, 0.2);
    assert_eq!(r.find("a2", "s2").unwrap().network_delta, 2.0);
    assert!(r.combinations.iter().filter(|c| !c.feasible).all(|c| c.combined_score == 0.0));
}

#[test]
fn reevaluation_replaces_results_and_non_top_commit_is_allowed() {
    let mut s = Session::new("t", catalog(json!([])), formation(), Clock::Logical(0));
    s.select_component("c1").unwrap();
    let before = s.evaluate().unwrap().clone();
    let doc = PreferencesDocument::from_json(
        r#"{"image": {"matrices": {"image": [[1, 0.1111111111, 0.1111111111], [9, 1, 1], [9, 1, 1]]}},
            "combination": {"importance": [[1, 9], [0.1111111111, 1]]}}"#,
    )
    .unwrap();
    s.set_preferences("c1", doc).unwrap();
    let after = s.evaluate().unwrap().clone();
    assert_ne!(before.digest(), after.digest());
    assert!((after.policy.w_image - 0.9).abs() < 1e-9);
    assert_eq!(s.last_results().unwrap().digest(), after.digest());

    let third = after.combinations[2].clone();
    let entry = s.commit(&third.image_id, &third.service_id, None).unwrap();
    assert_eq!(entry.rank, 3);
    assert_eq!(s.history().len(), 1);
}

#[test]
fn empty_pool_still_evaluates_to_no_feasible() {
    let f = Formation::from_json(r#"{"components": [{"id": "x", "feature": "Cache"}]}"#).unwrap();
    let mut s = Session::new("t", catalog(json!([])), f, Clock::Logical(0));
    assert!(s.select_component("x").unwrap().is_empty());
    assert!(matches!(s.evaluate(), Err(Error::NoFeasibleCombination(_))));
    assert_eq!(s.history().len(), 0);
}

#[test]
fn evaluation_never_touches_formation_or_history() {
    let mut s = Session::new("t", catalog(json!([])), formation(), Clock::Logical(0));
    s.select_component("c1").unwrap();
    let f = s.formation().clone();
    s.evaluate().unwrap();
    s.evaluate().unwrap();
    assert_eq!(s.formation(), &f);
    assert!(s.history().is_empty());
}
