//! Scoring of VM images and infrastructure services with the AHP
//! multiplicative index: the weighted sum of normalized positive criteria
//! divided by the weighted sum of normalized negative criteria.
//!
//! Criterion values are normalized distributively over the surviving
//! alternatives. An empty positive side counts as 1, as does an empty
//! negative side. A zero negative sum is floored at `1 / (N * 10^6)` for `N`
//! survivors. Raw indices are finally divided by the largest one so the best
//! survivor scores exactly 1.

use serde::Serialize;

use crate::ahp::{normalize_values, Subject, WeightedCriterion};
use crate::catalog::{Alternative, CloudService, Influence, VmImage};
use crate::error::{Error, Result};
use crate::numfmt::sig9;
use crate::requirements::FilterOutcome;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoredAlternative {
    pub id: String,
    #[serde(serialize_with = "sig9")]
    pub score: f64,
    #[serde(serialize_with = "sig9")]
    pub raw: f64,
    pub requirement_ok: bool,
    pub relaxation_level: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violated: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Ranking {
    pub alternatives: Vec<ScoredAlternative>,
    pub relaxation_level: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Ranking {
    pub fn get(&self, id: &str) -> Option<&ScoredAlternative> {
        self.alternatives.iter().find(|a| a.id == id)
    }

    /// Alternatives that passed requirement filtering, in rank order.
    pub fn survivors(&self) -> impl Iterator<Item = &ScoredAlternative> {
        self.alternatives.iter().filter(|a| a.requirement_ok)
    }
}

/// Zero-denominator floor for `count` alternatives.
pub fn degenerate_floor(count: usize) -> f64 {
    1.0 / (count.max(1) as f64 * 1e6)
}

/// Raw multiplicative indices for alternatives described by per-criterion
/// value columns (`columns[k][i]` is criterion `k` of alternative `i`,
/// `None` when the attribute is missing).
///
/// Missing values count as 0 on either side. Returns the raw indices plus,
/// per alternative, whether its denominator had to be floored.
pub(crate) fn multiplicative_index(
    columns: &[Vec<Option<f64>>],
    criteria: &[&WeightedCriterion],
    count: usize,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut numerator = vec![0.0; count];
    let mut denominator = vec![0.0; count];
    let mut has_positive = false;
    let mut has_negative = false;

    for (column, criterion) in columns.iter().zip(criteria) {
        let values: Vec<f64> = column.iter().map(|v| v.unwrap_or(0.0)).collect();
        let norm = normalize_values(&values).map_err(|pos| Error::NegativeValue {
            id: format!("{}#{pos}", criterion.attribute),
            value: values[pos],
        })?;
        let target = match criterion.influence {
            Influence::Positive => {
                has_positive = true;
                &mut numerator
            }
            Influence::Negative => {
                has_negative = true;
                &mut denominator
            }
            Influence::None => continue,
        };
        for (acc, v) in target.iter_mut().zip(&norm) {
            *acc += criterion.weight * v;
        }
    }

    let floor = degenerate_floor(count);
    let mut floored = vec![false; count];
    let raw = (0..count)
        .map(|i| {
            let num = if has_positive { numerator[i] } else { 1.0 };
            let den = if has_negative {
                if denominator[i] < floor {
                    floored[i] = true;
                    floor
                } else {
                    denominator[i]
                }
            } else {
                1.0
            };
            num / den
        })
        .collect();
    Ok((raw, floored))
}

/// Divides by the maximum so the best entry is 1; an all-zero input maps to 1.
pub(crate) fn rescale(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        raw.iter().map(|r| r / max).collect()
    } else {
        vec![1.0; raw.len()]
    }
}

/// Scores `alternatives` (the candidate pool) against weighted criteria.
/// Alternatives absent from `outcome`'s survivors score 0.
pub fn evaluate<A: Alternative>(
    alternatives: &[A],
    outcome: &FilterOutcome,
    criteria: &[WeightedCriterion],
) -> Result<Ranking> {
    let survivors: Vec<&A> = alternatives
        .iter()
        .filter(|a| outcome.survivor(a.id()).is_some())
        .collect();
    let count = survivors.len();
    let leaves: Vec<&WeightedCriterion> = criteria.iter().collect();

    let mut per_alt_warnings = vec![Vec::new(); count];
    let columns: Vec<Vec<Option<f64>>> = leaves
        .iter()
        .map(|c| {
            survivors
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let v = a.numeric(&c.attribute);
                    if v.is_none() {
                        per_alt_warnings[i].push(format!("missing attribute `{}` scored as 0", c.attribute));
                    }
                    v
                })
                .collect()
        })
        .collect();

    let (raw, floored) = multiplicative_index(&columns, &leaves, count)?;
    let scores = rescale(&raw);
    let mut warnings = Vec::new();
    if floored.iter().any(|f| *f) {
        warnings.push("zero negative-criteria sum floored; ordering follows the positive criteria".to_owned());
    }

    let mut out: Vec<ScoredAlternative> = survivors
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let violated = outcome.survivor(a.id()).map(|s| s.violated.clone()).unwrap_or_default();
            let mut w = std::mem::take(&mut per_alt_warnings[i]);
            w.extend(violated.iter().map(|k| format!("requirement #{k} relaxed")));
            if floored[i] {
                w.push("negative-criteria sum floored".to_owned());
            }
            ScoredAlternative {
                id: a.id().to_owned(),
                score: scores[i],
                raw: raw[i],
                requirement_ok: true,
                relaxation_level: outcome.relaxation_level,
                violated,
                warnings: w,
            }
        })
        .collect();
    out.extend(
        alternatives
            .iter()
            .filter(|a| outcome.survivor(a.id()).is_none())
            .map(|a| ScoredAlternative {
                id: a.id().to_owned(),
                score: 0.0,
                raw: 0.0,
                requirement_ok: false,
                relaxation_level: outcome.relaxation_level,
                violated: Vec::new(),
                warnings: vec!["violates requirements".to_owned()],
            }),
    );
    sort_ranked(&mut out);

    Ok(Ranking {
        alternatives: out,
        relaxation_level: outcome.relaxation_level,
        warnings,
    })
}

fn sort_ranked(list: &mut [ScoredAlternative]) {
    list.sort_by(|a, b| {
        b.requirement_ok
            .cmp(&a.requirement_ok)
            .then(b.raw.total_cmp(&a.raw))
            .then_with(|| a.id.cmp(&b.id))
    });
}

fn check_subject(criteria: &[WeightedCriterion], subject: Subject) -> Result<()> {
    match criteria.iter().find(|c| c.subject != subject) {
        Some(c) => Err(Error::validation(
            "criterion",
            &c.id,
            &c.attribute,
            format!("belongs to {:?}, not {subject:?}", c.subject),
        )),
        None => Ok(()),
    }
}

pub fn evaluate_images(images: &[&VmImage], outcome: &FilterOutcome, criteria: &[WeightedCriterion]) -> Result<Ranking> {
    check_subject(criteria, Subject::Image)?;
    evaluate(images, outcome, criteria)
}

pub fn evaluate_services(
    services: &[&CloudService],
    outcome: &FilterOutcome,
    criteria: &[WeightedCriterion],
) -> Result<Ranking> {
    check_subject(criteria, Subject::Service)?;
    evaluate(services, outcome, criteria)
}

/// Top-ranked alternative.
pub fn best(ranking: &Ranking) -> Result<&ScoredAlternative> {
    ranking.alternatives.first().ok_or(Error::EmptyRanking)
}
