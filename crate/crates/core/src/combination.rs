//! Combination of ranked images and services into feasible solution pairs.
//!
//! A pair is feasible when the image is deployable on the service and, for
//! every already committed component linked to the one being placed, the two
//! images and the two services are compatible. Feasible pairs are valued by
//! the weighted sum (or product) of their image and service scores divided by
//! their normalized network-cost delta; infeasible pairs are valued 0.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ahp::{derive_weights, PairwiseMatrix, WeightedCriterion};
use crate::catalog::{Alternative, Catalog, CloudService, VmImage};
use crate::error::{Error, Result};
use crate::evaluation::{multiplicative_index, rescale, Ranking};
use crate::formation::Formation;
use crate::numfmt::sig9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    #[default]
    Sum,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CombinationPolicy {
    pub operator: Operator,
    #[serde(serialize_with = "sig9")]
    pub w_image: f64,
    #[serde(serialize_with = "sig9")]
    pub w_service: f64,
    pub apply_network_delta: bool,
}

impl Default for CombinationPolicy {
    fn default() -> Self {
        CombinationPolicy {
            operator: Operator::Sum,
            w_image: 0.5,
            w_service: 0.5,
            apply_network_delta: true,
        }
    }
}

impl CombinationPolicy {
    pub fn new(operator: Operator, w_image: f64, w_service: f64, apply_network_delta: bool) -> Result<Self> {
        if !(w_image > 0.0 && w_service > 0.0) || (w_image + w_service - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                "policy",
                "combination",
                "weights",
                format!("({w_image}, {w_service}) must be positive and sum to 1"),
            ));
        }
        Ok(CombinationPolicy {
            operator,
            w_image,
            w_service,
            apply_network_delta,
        })
    }

    /// Image/service importance from a single order-2 comparison.
    pub fn from_importance(importance: &PairwiseMatrix, operator: Operator, apply_network_delta: bool) -> Result<Self> {
        if importance.order() != 2 {
            return Err(Error::InvalidMatrix(format!(
                "image/service importance needs an order-2 matrix, got {}",
                importance.order()
            )));
        }
        let w = derive_weights(importance);
        CombinationPolicy::new(operator, w[0], w[1], apply_network_delta)
    }
}

/// Why a pair was ruled out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Infeasibility {
    /// The image cannot be deployed on the service.
    NotDeployable,
    /// The image is incompatible with a linked committed component's image.
    ImageIncompatible,
    /// The service is incompatible with a linked committed component's service.
    ServiceIncompatible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CombinedSolution {
    #[serde(rename = "image")]
    pub image_id: String,
    #[serde(rename = "service")]
    pub service_id: String,
    #[serde(rename = "score", serialize_with = "sig9")]
    pub combined_score: f64,
    #[serde(rename = "raw", serialize_with = "sig9")]
    pub combined_raw: f64,
    #[serde(serialize_with = "opt_sig9")]
    pub image_score: Option<f64>,
    #[serde(serialize_with = "opt_sig9")]
    pub service_score: Option<f64>,
    #[serde(rename = "delta", serialize_with = "sig9")]
    pub network_delta: f64,
    #[serde(serialize_with = "sig9")]
    pub normalized_delta: f64,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<Infeasibility>,
}

fn opt_sig9<S: serde::Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => sig9(v, s),
        None => s.serialize_none(),
    }
}

/// Extra traffic cost of placing `component` on `service`: for each linked
/// committed neighbor, local-network costs when the neighbor's service has the
/// same provider and location, internet costs otherwise.
pub fn network_delta(formation: &Formation, component: &str, service: &CloudService, catalog: &Catalog) -> Result<f64> {
    let mut delta = 0.0;
    for (neighbor, costs) in formation.related_committed(component)? {
        let other = catalog.service(&neighbor.service_id).ok_or_else(|| {
            Error::validation(
                "committed",
                &neighbor.component_id,
                "service",
                format!("references unknown service `{}`", neighbor.service_id),
            )
        })?;
        delta += if other.provider == service.provider && other.location == service.location {
            costs.local()
        } else {
            costs.internet()
        };
    }
    Ok(delta)
}

/// Distributive normalization of network deltas with a floor of
/// `1 / (N * 10^6)`; all-zero deltas map to 1 so they do not affect ranking.
pub fn normalize_deltas(deltas: &[f64]) -> Vec<f64> {
    let sum: f64 = deltas.iter().sum();
    if sum == 0.0 {
        return vec![1.0; deltas.len()];
    }
    let floor = 1.0 / (deltas.len() as f64 * 1e6);
    deltas.iter().map(|d| (d / sum).max(floor)).collect()
}

/// One side of the pair enumeration: a surviving alternative with its score
/// and catalog position.
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    pub id: &'a str,
    pub position: usize,
    pub score: f64,
}

/// Surviving entries of a ranking, in rank order, resolved against the catalog.
pub fn candidates<'a>(
    ranking: &'a Ranking,
    position: impl Fn(&str) -> Option<usize>,
) -> Result<Vec<Candidate<'a>>> {
    ranking
        .survivors()
        .map(|a| {
            let pos = position(&a.id)
                .ok_or_else(|| Error::validation("ranking", &a.id, "id", "is not in the catalog"))?;
            Ok(Candidate {
                id: &a.id,
                position: pos,
                score: a.score,
            })
        })
        .collect()
}

/// Feasibility of every (image, service) pair, image-major.
pub fn feasibility(
    catalog: &Catalog,
    formation: &Formation,
    component: &str,
    images: &[Candidate<'_>],
    services: &[Candidate<'_>],
) -> Result<Vec<Option<Infeasibility>>> {
    let mut neighbor_images = Vec::new();
    let mut neighbor_services = Vec::new();
    for (n, _) in formation.related_committed(component)? {
        neighbor_images.push(catalog.image_position(&n.image_id).ok_or_else(|| {
            Error::validation("committed", &n.component_id, "image", format!("unknown image `{}`", n.image_id))
        })?);
        neighbor_services.push(catalog.service_position(&n.service_id).ok_or_else(|| {
            Error::validation("committed", &n.component_id, "service", format!("unknown service `{}`", n.service_id))
        })?);
    }
    let image_ok: Vec<bool> = images
        .iter()
        .map(|i| neighbor_images.iter().all(|&o| catalog.images_compatible_at(i.position, o)))
        .collect();
    let service_ok: Vec<bool> = services
        .iter()
        .map(|s| neighbor_services.iter().all(|&o| catalog.services_compatible_at(s.position, o)))
        .collect();

    let mut out = Vec::with_capacity(images.len() * services.len());
    for (a, img) in images.iter().enumerate() {
        for (b, svc) in services.iter().enumerate() {
            out.push(if !catalog.deployable_at(img.position, svc.position) {
                Some(Infeasibility::NotDeployable)
            } else if !image_ok[a] {
                Some(Infeasibility::ImageIncompatible)
            } else if !service_ok[b] {
                Some(Infeasibility::ServiceIncompatible)
            } else {
                None
            });
        }
    }
    Ok(out)
}

/// Network delta per candidate service.
pub fn service_deltas(
    catalog: &Catalog,
    formation: &Formation,
    component: &str,
    services: &[Candidate<'_>],
) -> Result<Vec<f64>> {
    services
        .iter()
        .map(|s| network_delta(formation, component, &catalog.services()[s.position], catalog))
        .collect()
}

/// Input row for pair scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PairInput<'a> {
    pub image_id: &'a str,
    pub service_id: &'a str,
    pub image_score: f64,
    pub service_score: f64,
    pub delta: f64,
    pub infeasible: Option<Infeasibility>,
}

/// Values, rescales and orders pairs. Deltas are normalized over the feasible
/// pairs only.
pub fn score_pairs(pairs: &[PairInput<'_>], policy: &CombinationPolicy, parallel: bool) -> Vec<CombinedSolution> {
    let feasible_deltas: Vec<f64> = pairs.iter().filter(|p| p.infeasible.is_none()).map(|p| p.delta).collect();
    let normalized = if policy.apply_network_delta {
        normalize_deltas(&feasible_deltas)
    } else {
        vec![1.0; feasible_deltas.len()]
    };
    let mut nd_iter = normalized.into_iter();
    let nds: Vec<f64> = pairs
        .iter()
        .map(|p| if p.infeasible.is_none() { nd_iter.next().unwrap_or(1.0) } else { 0.0 })
        .collect();

    let value = |(p, nd): (&PairInput<'_>, &f64)| -> f64 {
        if p.infeasible.is_some() {
            return 0.0;
        }
        let v = match policy.operator {
            Operator::Sum => policy.w_image * p.image_score + policy.w_service * p.service_score,
            Operator::Product => p.image_score * p.service_score,
        };
        v / nd
    };
    let raw: Vec<f64> = if parallel {
        pairs.par_iter().zip(nds.par_iter()).map(value).collect()
    } else {
        pairs.iter().zip(nds.iter()).map(value).collect()
    };
    let max = raw
        .iter()
        .zip(pairs)
        .filter(|(_, p)| p.infeasible.is_none())
        .map(|(r, _)| *r)
        .fold(0.0, f64::max);

    let build = |((p, r), nd): ((&PairInput<'_>, &f64), &f64)| CombinedSolution {
        image_id: p.image_id.to_owned(),
        service_id: p.service_id.to_owned(),
        combined_score: match (p.infeasible, max > 0.0) {
            (Some(_), _) => 0.0,
            (None, true) => r / max,
            (None, false) => 1.0,
        },
        combined_raw: *r,
        image_score: Some(p.image_score),
        service_score: Some(p.service_score),
        network_delta: p.delta,
        normalized_delta: *nd,
        feasible: p.infeasible.is_none(),
        reason: p.infeasible,
    };
    let mut out: Vec<CombinedSolution> = if parallel {
        pairs.par_iter().zip(raw.par_iter()).zip(nds.par_iter()).map(build).collect()
    } else {
        pairs.iter().zip(raw.iter()).zip(nds.iter()).map(build).collect()
    };
    if parallel {
        out.par_sort_unstable_by(rank_order);
    } else {
        out.sort_unstable_by(rank_order);
    }
    out
}

/// Feasible first, then by raw value descending, then by (image, service) id.
pub fn rank_order(a: &CombinedSolution, b: &CombinedSolution) -> std::cmp::Ordering {
    b.feasible
        .cmp(&a.feasible)
        .then(b.combined_raw.total_cmp(&a.combined_raw))
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| a.service_id.cmp(&b.service_id))
}

/// Builds the pair table for surviving images and services.
pub fn pair_inputs<'a>(
    images: &[Candidate<'a>],
    services: &[Candidate<'a>],
    feasible: &[Option<Infeasibility>],
    deltas: &[f64],
) -> Vec<PairInput<'a>> {
    let n = services.len();
    let mut out = Vec::with_capacity(images.len() * n);
    for (a, img) in images.iter().enumerate() {
        for (b, svc) in services.iter().enumerate() {
            out.push(PairInput {
                image_id: img.id,
                service_id: svc.id,
                image_score: img.score,
                service_score: svc.score,
                delta: deltas[b],
                infeasible: feasible[a * n + b],
            });
        }
    }
    out
}

/// Stepwise combination of image and service rankings for `component`.
///
/// Only alternatives that passed requirement filtering are paired. Fails with
/// [`Error::NoFeasibleCombination`] when no pair is feasible.
pub fn combine(
    image_ranking: &Ranking,
    service_ranking: &Ranking,
    formation: &Formation,
    component: &str,
    catalog: &Catalog,
    policy: &CombinationPolicy,
) -> Result<Vec<CombinedSolution>> {
    let images = candidates(image_ranking, |id| catalog.image_position(id))?;
    let services = candidates(service_ranking, |id| catalog.service_position(id))?;
    let feasible = feasibility(catalog, formation, component, &images, &services)?;
    let deltas = service_deltas(catalog, formation, component, &services)?;
    let pairs = pair_inputs(&images, &services, &feasible, &deltas);
    let out = score_pairs(&pairs, policy, false);
    if !out.first().is_some_and(|c| c.feasible) {
        return Err(Error::NoFeasibleCombination(component.to_owned()));
    }
    Ok(out)
}

/// Highest-valued feasible pair.
pub fn best_combination(combined: &[CombinedSolution]) -> Result<&CombinedSolution> {
    combined
        .iter()
        .filter(|c| c.feasible)
        .min_by(|a, b| rank_order(a, b))
        .ok_or_else(|| Error::NoFeasibleCombination(String::new()))
}

/// Integrated variant: feasible pairs are the alternatives of a single
/// hierarchy spanning image and service criteria. Each pair takes image
/// criteria from its image and service criteria from its service. Infeasible
/// pairs are not scored and not returned. When the policy applies network
/// deltas, the index is divided by the normalized delta as in stepwise mode.
#[allow(clippy::too_many_arguments)]
pub fn integrated_evaluate(
    catalog: &Catalog,
    images: &[&VmImage],
    services: &[&CloudService],
    criteria: &[WeightedCriterion],
    formation: &Formation,
    component: &str,
    policy: &CombinationPolicy,
) -> Result<Vec<CombinedSolution>> {
    let mut img_c = Vec::with_capacity(images.len());
    for i in images {
        let position = catalog
            .image_position(&i.id)
            .ok_or_else(|| Error::validation("image", &i.id, "id", "is not in the catalog"))?;
        img_c.push(Candidate { id: i.id.as_str(), position, score: 0.0 });
    }
    let mut svc_c = Vec::with_capacity(services.len());
    for s in services {
        let position = catalog
            .service_position(&s.id)
            .ok_or_else(|| Error::validation("service", &s.id, "id", "is not in the catalog"))?;
        svc_c.push(Candidate { id: s.id.as_str(), position, score: 0.0 });
    }
    let feasible = feasibility(catalog, formation, component, &img_c, &svc_c)?;
    let deltas = service_deltas(catalog, formation, component, &svc_c)?;

    let n = services.len();
    let pairs: Vec<(usize, usize)> = (0..images.len())
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .filter(|&(a, b)| feasible[a * n + b].is_none())
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoFeasibleCombination(component.to_owned()));
    }

    let leaves: Vec<&WeightedCriterion> = criteria.iter().collect();
    let columns: Vec<Vec<Option<f64>>> = leaves
        .iter()
        .map(|c| {
            pairs
                .iter()
                .map(|&(a, b)| match c.subject {
                    crate::ahp::Subject::Image => images[a].numeric(&c.attribute),
                    crate::ahp::Subject::Service => services[b].numeric(&c.attribute),
                })
                .collect()
        })
        .collect();
    let (index, _) = multiplicative_index(&columns, &leaves, pairs.len())?;
    let pair_deltas: Vec<f64> = pairs.iter().map(|&(_, b)| deltas[b]).collect();
    let nds = if policy.apply_network_delta {
        normalize_deltas(&pair_deltas)
    } else {
        vec![1.0; pairs.len()]
    };
    let raw: Vec<f64> = index.iter().zip(&nds).map(|(v, nd)| v / nd).collect();
    let scores = rescale(&raw);

    let mut out: Vec<CombinedSolution> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| CombinedSolution {
            image_id: images[a].id.clone(),
            service_id: services[b].id.clone(),
            combined_score: scores[k],
            combined_raw: raw[k],
            image_score: None,
            service_score: None,
            network_delta: pair_deltas[k],
            normalized_delta: nds[k],
            feasible: true,
            reason: None,
        })
        .collect();
    out.sort_by(rank_order);
    Ok(out)
}

/// Ranks of pairs by (image, service) id, for comparisons across modes.
pub fn rank_positions(combined: &[CombinedSolution]) -> BTreeMap<(String, String), usize> {
    combined
        .iter()
        .enumerate()
        .map(|(i, c)| ((c.image_id.clone(), c.service_id.clone()), i))
        .collect()
}
