//! Synthetic catalogs and a per-phase timing harness for full stepwise
//! migrations.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::{attr, builtin_attribute_specs, Catalog, CatalogDocument, CloudService, CompatDocument, Provider, VmImage};
use crate::combination::{candidates, feasibility, pair_inputs, score_pairs, service_deltas, CombinedSolution};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_images, evaluate_services};
use crate::formation::{define_formation, CommittedSolution, Component, Formation, Link, TrafficCosts};
use crate::numfmt::sig9;
use crate::profile::{PreferenceProfile, PreferencesDocument};
use crate::requirements::filter;

pub const SYNTHETIC_FEATURE: &str = "Application Server";
pub const LOW_TRAFFIC_COST: f64 = 0.01;
pub const HIGH_TRAFFIC_COST: f64 = 0.25;

const OPERATING_SYSTEMS: [&str; 4] = ["Ubuntu", "Debian", "CentOS", "Windows Server"];
const FORMATS: [&str; 3] = ["ova", "qcow2", "vhd"];
const LANGUAGES: [&str; 4] = ["Java", "C", "Python", "Go"];
const COUNTRIES: [&str; 5] = ["DE", "US", "IE", "JP", "BR"];

/// Upper sampling bound for attributes whose spec range is open-ended.
fn sampling_cap(key: &str) -> f64 {
    match key {
        attr::HOURLY_LICENSE_PRICE => 1.0,
        attr::AGE => 3650.0,
        attr::OS_VERSION | attr::SOFTWARE_VERSION => 20.0,
        attr::HOURLY_CPU_PRICE => 2.0,
        attr::NETWORK_SEND_PRICE | attr::NETWORK_RECEIVE_PRICE => 0.05,
        attr::INTERNET_SEND_PRICE | attr::INTERNET_RECEIVE_PRICE => 0.2,
        attr::CPU_CORES => 64.0,
        attr::RAM_SIZE | attr::DISK_SIZE => 4096.0,
        attr::MAX_LATENCY => 500.0,
        attr::AVG_LATENCY => 200.0,
        _ => 1000.0,
    }
}

/// Catalog and formation of a synthetic benchmark instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub images: usize,
    pub services: usize,
    pub components: usize,
    pub providers: usize,
    pub full_d: bool,
}

/// Deterministic for a seed. All images share one feature and every pair of
/// components is linked; E and F contain every pair.
pub fn generate_synthetic(spec: SyntheticSpec, seed: u64) -> Result<(Catalog, Formation)> {
    if spec.images == 0 || spec.services == 0 || spec.components == 0 || spec.providers == 0 {
        return Err(Error::validation("bench", "config", "counts", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (image_specs, service_specs) = builtin_attribute_specs();

    let providers: Vec<Provider> = (0..spec.providers)
        .map(|k| Provider {
            id: format!("p{k}"),
            name: format!("Provider {k}"),
        })
        .collect();

    let sample = |rng: &mut ChaCha8Rng, key: &str, min: f64, max: Option<f64>| {
        let hi = max.unwrap_or_else(|| sampling_cap(key));
        rng.gen_range(min..=hi)
    };

    let images: Vec<VmImage> = (0..spec.images)
        .map(|i| {
            let numerical = image_specs
                .numerical
                .iter()
                .map(|s| (s.key.clone(), sample(&mut rng, &s.key, s.range.min, s.range.max)))
                .collect();
            let mut non_numerical = BTreeMap::new();
            non_numerical.insert(attr::OPERATING_SYSTEM.to_owned(), pick(&mut rng, &OPERATING_SYSTEMS));
            non_numerical.insert(attr::VIRTUALIZATION_FORMAT.to_owned(), pick(&mut rng, &FORMATS));
            non_numerical.insert(attr::IMPLEMENTATION_LANGUAGE.to_owned(), pick(&mut rng, &LANGUAGES));
            VmImage {
                id: format!("img-{i:04}"),
                feature: SYNTHETIC_FEATURE.to_owned(),
                numerical,
                non_numerical,
            }
        })
        .collect();

    let services: Vec<CloudService> = (0..spec.services)
        .map(|j| {
            let numerical = service_specs
                .numerical
                .iter()
                .map(|s| (s.key.clone(), sample(&mut rng, &s.key, s.range.min, s.range.max)))
                .collect();
            CloudService {
                id: format!("svc-{j:04}"),
                provider: providers[rng.gen_range(0..spec.providers)].id.clone(),
                location: pick(&mut rng, &COUNTRIES),
                numerical,
                non_numerical: BTreeMap::new(),
            }
        })
        .collect();

    let mut image_service = Vec::new();
    for img in &images {
        let start = image_service.len();
        for svc in &services {
            if spec.full_d || rng.gen_bool(0.5) {
                image_service.push((img.id.clone(), svc.id.clone()));
            }
        }
        if image_service.len() == start {
            let svc = services.choose(&mut rng).expect("services not empty");
            image_service.push((img.id.clone(), svc.id.clone()));
        }
    }
    let all_pairs = |ids: Vec<&String>| {
        let mut out = Vec::new();
        for (k, a) in ids.iter().enumerate() {
            for b in &ids[k..] {
                out.push(((*a).clone(), (*b).clone()));
            }
        }
        out
    };
    let compat = CompatDocument {
        image_service,
        image_image: all_pairs(images.iter().map(|i| &i.id).collect()),
        service_service: all_pairs(services.iter().map(|s| &s.id).collect()),
    };
    let catalog = Catalog::from_document(CatalogDocument {
        providers,
        images,
        services,
        compat,
    })?;

    // Provider assignment of components only shapes the cost estimates, which
    // carry both a low local and a high internet figure per link.
    let components: Vec<Component> = (0..spec.components)
        .map(|c| Component {
            id: format!("c{}", c + 1),
            feature: SYNTHETIC_FEATURE.to_owned(),
        })
        .collect();
    let costs = TrafficCosts {
        local_recv: LOW_TRAFFIC_COST,
        local_send: LOW_TRAFFIC_COST,
        inet_recv: HIGH_TRAFFIC_COST,
        inet_send: HIGH_TRAFFIC_COST,
    };
    let mut links = Vec::new();
    for a in 0..components.len() {
        for b in a + 1..components.len() {
            links.push(Link::new(components[a].id.clone(), components[b].id.clone(), costs));
        }
    }
    let formation = define_formation(components, links)?;
    Ok((catalog, formation))
}

fn pick(rng: &mut ChaCha8Rng, values: &[&str]) -> String {
    values.choose(rng).expect("non-empty").to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Phase {
    Filter,
    Evaluate,
    Feasibility,
    NetworkCosts,
    Combine,
    Total,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Filter,
        Phase::Evaluate,
        Phase::Feasibility,
        Phase::NetworkCosts,
        Phase::Combine,
        Phase::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Filter => "Filter",
            Phase::Evaluate => "Evaluate",
            Phase::Feasibility => "Feasibility",
            Phase::NetworkCosts => "NetworkCosts",
            Phase::Combine => "Combine",
            Phase::Total => "Total",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BenchRecord {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub phase: Phase,
    pub repetition: usize,
    pub elapsed_ns: u64,
}

/// Per-phase durations of one migration run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTimes(pub BTreeMap<Phase, Duration>);

impl PhaseTimes {
    fn add(&mut self, phase: Phase, d: Duration) {
        *self.0.entry(phase).or_default() += d;
    }

    pub fn get(&self, phase: Phase) -> Duration {
        self.0.get(&phase).copied().unwrap_or_default()
    }
}

/// Runs a complete stepwise migration, committing the top pair of every
/// component in formation order, and times each phase.
pub fn timed_migration(
    catalog: &Catalog,
    formation: &Formation,
    profile: &PreferenceProfile,
    parallel: bool,
) -> Result<(PhaseTimes, Vec<CommittedSolution>)> {
    let mut formation = formation.clone();
    let mut times = PhaseTimes::default();
    let mut commits = Vec::new();
    let total = Instant::now();
    let order: Vec<Component> = formation.components().to_vec();
    for comp in &order {
        let t = Instant::now();
        let images = catalog.images_with_feature(&comp.feature);
        let services: Vec<&CloudService> = catalog.services().iter().collect();
        let image_outcome = filter(&profile.image_requirements, &images, true)?;
        let service_outcome = filter(&profile.service_requirements, &services, profile.relax_service_requirements)?;
        times.add(Phase::Filter, t.elapsed());

        let t = Instant::now();
        let image_ranking = evaluate_images(&images, &image_outcome, &profile.image_weights.leaves)?;
        let service_ranking = evaluate_services(&services, &service_outcome, &profile.service_weights.leaves)?;
        times.add(Phase::Evaluate, t.elapsed());

        let t = Instant::now();
        let img_c = candidates(&image_ranking, |id| catalog.image_position(id))?;
        let svc_c = candidates(&service_ranking, |id| catalog.service_position(id))?;
        let feasible = feasibility(catalog, &formation, &comp.id, &img_c, &svc_c)?;
        times.add(Phase::Feasibility, t.elapsed());

        let t = Instant::now();
        let deltas = service_deltas(catalog, &formation, &comp.id, &svc_c)?;
        times.add(Phase::NetworkCosts, t.elapsed());

        let t = Instant::now();
        let pairs = pair_inputs(&img_c, &svc_c, &feasible, &deltas);
        let scored: Vec<CombinedSolution> = score_pairs(&pairs, &profile.policy, parallel);
        times.add(Phase::Combine, t.elapsed());

        let best = scored
            .first()
            .filter(|c| c.feasible)
            .ok_or_else(|| Error::NoFeasibleCombination(comp.id.clone()))?;
        let solution = CommittedSolution {
            component_id: comp.id.clone(),
            image_id: best.image_id.clone(),
            service_id: best.service_id.clone(),
            score: best.combined_score,
        };
        formation.commit(solution.clone());
        commits.push(solution);
    }
    times.add(Phase::Total, total.elapsed());
    Ok((times, commits))
}

/// Pairing of image and service counts into grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridPairing {
    /// Every (m, n) combination.
    #[default]
    Product,
    /// Element-wise pairs (m_i, n_i).
    Zip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchConfig {
    pub image_counts: Vec<usize>,
    pub service_counts: Vec<usize>,
    pub component_counts: Vec<usize>,
    pub provider_count: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub full_d: bool,
    pub pairing: GridPairing,
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            image_counts: vec![10, 20, 40],
            service_counts: vec![10, 20, 40],
            component_counts: vec![3],
            provider_count: 3,
            seed: 42,
            repetitions: 3,
            full_d: true,
            pairing: GridPairing::Product,
            parallel: false,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::validation("bench", "config", field, msg));
        if self.image_counts.is_empty() || self.image_counts.contains(&0) {
            return bad("imageCounts", "must be a non-empty list of positive counts");
        }
        if self.service_counts.is_empty() || self.service_counts.contains(&0) {
            return bad("serviceCounts", "must be a non-empty list of positive counts");
        }
        if self.component_counts.is_empty() || self.component_counts.contains(&0) {
            return bad("componentCounts", "must be a non-empty list of positive counts");
        }
        if self.provider_count == 0 {
            return bad("providerCount", "must be positive");
        }
        if self.repetitions < 3 {
            return bad("repetitions", "must be at least 3");
        }
        if self.pairing == GridPairing::Zip && self.image_counts.len() != self.service_counts.len() {
            return bad("serviceCounts", "zip pairing needs as many service counts as image counts");
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<(usize, usize, usize)> {
        let mn: Vec<(usize, usize)> = match self.pairing {
            GridPairing::Product => self
                .image_counts
                .iter()
                .flat_map(|&m| self.service_counts.iter().map(move |&n| (m, n)))
                .collect(),
            GridPairing::Zip => self.image_counts.iter().copied().zip(self.service_counts.iter().copied()).collect(),
        };
        mn.into_iter()
            .flat_map(|(m, n)| self.component_counts.iter().map(move |&l| (m, n, l)))
            .collect()
    }
}

/// Times full migrations over the configured grid with no requirements and
/// equal preferences. One warm-up run per grid point is discarded.
pub fn run_scaling(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let profile = PreferenceProfile::resolve(&PreferencesDocument::default(), &empty_catalog())?;
    let mut records = Vec::new();
    for (m, n, l) in config.grid() {
        let spec = SyntheticSpec {
            images: m,
            services: n,
            components: l,
            providers: config.provider_count,
            full_d: config.full_d,
        };
        let (catalog, formation) = generate_synthetic(spec, config.seed)?;
        tracing::debug!(m, n, l, "benchmarking grid point");
        timed_migration(&catalog, &formation, &profile, config.parallel)?;
        for repetition in 0..config.repetitions {
            let (times, _) = timed_migration(&catalog, &formation, &profile, config.parallel)?;
            for phase in Phase::ALL {
                records.push(BenchRecord {
                    m,
                    n,
                    l,
                    phase,
                    repetition,
                    elapsed_ns: times.get(phase).as_nanos() as u64,
                });
            }
        }
    }
    Ok(records)
}

fn empty_catalog() -> Catalog {
    Catalog::from_document(CatalogDocument {
        providers: Vec::new(),
        images: Vec::new(),
        services: Vec::new(),
        compat: CompatDocument::default(),
    })
    .expect("empty catalog is valid")
}

pub fn write_csv(records: &[BenchRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "m,n,l,phase,repetition,elapsed_ns")?;
    for r in records {
        writeln!(out, "{},{},{},{},{},{}", r.m, r.n, r.l, r.phase.name(), r.repetition, r.elapsed_ns)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LinearFit {
    #[serde(serialize_with = "sig9")]
    pub slope: f64,
    #[serde(serialize_with = "sig9")]
    pub intercept: f64,
    #[serde(serialize_with = "sig9")]
    pub r2: f64,
}

/// Ordinary least squares of `ys` on `xs`. `None` with fewer than two
/// distinct x values.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len() as f64;
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(LinearFit { slope, intercept, r2 })
}

pub fn median(values: &mut [u64]) -> u64 {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    let k = values.len() / 2;
    if values.len() % 2 == 1 {
        values[k]
    } else {
        (values[k - 1] + values[k]) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridPoint {
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub median_ns: BTreeMap<&'static str, u64>,
}

impl GridPoint {
    pub fn median(&self, phase: Phase) -> u64 {
        self.median_ns.get(phase.name()).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SeriesFit {
    /// Fixed coordinates of the series, e.g. `{"l": 3}`.
    pub fixed: BTreeMap<&'static str, usize>,
    pub fit: LinearFit,
    /// Slope of ln(time) against ln(x); about 1 for linear growth.
    #[serde(serialize_with = "sig9")]
    pub log_log_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchSummary {
    pub points: Vec<GridPoint>,
    /// Median total time against m·n for each component count.
    pub total_vs_pairs: Vec<SeriesFit>,
    /// Median total time against component count for each (m, n).
    pub total_vs_components: Vec<SeriesFit>,
}

/// Axes held constant within one fitted series.
type Fixed = Vec<(&'static str, usize)>;

pub fn summarize(records: &[BenchRecord]) -> BenchSummary {
    let mut grouped: BTreeMap<(usize, usize, usize), BTreeMap<Phase, Vec<u64>>> = BTreeMap::new();
    for r in records {
        grouped
            .entry((r.m, r.n, r.l))
            .or_default()
            .entry(r.phase)
            .or_default()
            .push(r.elapsed_ns);
    }
    let points: Vec<GridPoint> = grouped
        .into_iter()
        .map(|((m, n, l), mut phases)| GridPoint {
            m,
            n,
            l,
            median_ns: phases.iter_mut().map(|(p, v)| (p.name(), median(v))).collect(),
        })
        .collect();

    let series = |key: &dyn Fn(&GridPoint) -> (Fixed, f64)| {
        let mut groups: BTreeMap<Fixed, Vec<(f64, f64)>> = BTreeMap::new();
        for p in &points {
            let (fixed, x) = key(p);
            groups.entry(fixed).or_default().push((x, p.median(Phase::Total) as f64));
        }
        groups
            .into_iter()
            .filter_map(|(fixed, xy)| {
                let (xs, ys): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
                let fit = linear_fit(&xs, &ys)?;
                let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
                let ly: Vec<f64> = ys.iter().map(|y| y.max(1.0).ln()).collect();
                let log_log_slope = linear_fit(&lx, &ly).map_or(f64::NAN, |f| f.slope);
                Some(SeriesFit {
                    fixed: fixed.into_iter().collect(),
                    fit,
                    log_log_slope,
                })
            })
            .collect::<Vec<_>>()
    };
    let total_vs_pairs = series(&|p| (vec![("l", p.l)], (p.m * p.n) as f64));
    let total_vs_components = series(&|p| (vec![("m", p.m), ("n", p.n)], p.l as f64));
    BenchSummary {
        points,
        total_vs_pairs,
        total_vs_components,
    }
}
