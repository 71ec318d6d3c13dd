//! Static world model: providers, VM images, infrastructure services, their
//! attributes and the compatibility sets between them.
//!
//! A [`Catalog`] is validated once at load time and immutable afterwards, so it
//! can be shared behind an `Arc` by any number of concurrent evaluations.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Keys of the built-in attribute set.
pub mod attr {
    pub const HOURLY_LICENSE_PRICE: &str = "Hourly License Price";
    pub const POPULARITY: &str = "Popularity";
    pub const AGE: &str = "Age";
    pub const OS_VERSION: &str = "OS Version";
    pub const SOFTWARE_VERSION: &str = "Software Version";

    pub const VIRTUALIZATION_FORMAT: &str = "Virtualization Format";
    pub const OPERATING_SYSTEM: &str = "Operating System (OS)";
    pub const IMPLEMENTATION_LANGUAGE: &str = "Implementation Language";
    pub const SOFTWARE_FEATURE: &str = "Software Feature";
    pub const SOFTWARE: &str = "Software";

    pub const HOURLY_CPU_PRICE: &str = "Hourly CPU Price";
    pub const NETWORK_SEND_PRICE: &str = "Network Send Price";
    pub const NETWORK_RECEIVE_PRICE: &str = "Network Receive Price";
    pub const INTERNET_SEND_PRICE: &str = "Internet Send Price";
    pub const INTERNET_RECEIVE_PRICE: &str = "Internet Receive Price";
    pub const CPU_PERFORMANCE: &str = "CPU Performance";
    pub const CPU_CORES: &str = "CPU Cores";
    pub const RAM_PERFORMANCE: &str = "RAM Performance";
    pub const RAM_SIZE: &str = "RAM Size";
    pub const DISK_PERFORMANCE: &str = "Disk Performance";
    pub const DISK_SIZE: &str = "Disk Size";
    pub const MAX_LATENCY: &str = "Max. Latency";
    pub const AVG_LATENCY: &str = "Avg. Latency";
    pub const UPTIME: &str = "Uptime";
    pub const SERVICE_POPULARITY: &str = "Service Popularity";

    pub const PROVIDER: &str = "Provider";
    pub const LOCATION_COUNTRY: &str = "Location Country";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Influence {
    Positive,
    Negative,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variability {
    Static,
    Dynamic,
}

/// Closed lower bound, optional closed upper bound (`None` means unbounded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: Option<f64>,
}

impl ValueRange {
    pub const NON_NEGATIVE: ValueRange = ValueRange {
        min: 0.0,
        max: None,
    };
    pub const PERCENT: ValueRange = ValueRange {
        min: 0.0,
        max: Some(100.0),
    };

    pub fn contains(&self, value: f64) -> bool {
        value.is_finite() && value >= self.min && self.max.is_none_or(|max| value <= max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericalAttributeSpec {
    pub key: String,
    pub influence: Influence,
    pub variability: Variability,
    pub metric: String,
    pub range: ValueRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonNumericalAttributeSpec {
    pub key: String,
    pub variability: Variability,
    pub allowed_values: Option<BTreeSet<String>>,
}

/// Numerical and non-numerical attribute specifications of one alternative kind.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeSpecs {
    pub numerical: Vec<NumericalAttributeSpec>,
    pub non_numerical: Vec<NonNumericalAttributeSpec>,
}

impl AttributeSpecs {
    pub fn numerical(&self, key: &str) -> Option<&NumericalAttributeSpec> {
        self.numerical.iter().find(|s| s.key == key)
    }

    pub fn non_numerical(&self, key: &str) -> Option<&NonNumericalAttributeSpec> {
        self.non_numerical.iter().find(|s| s.key == key)
    }
}

fn num(key: &str, influence: Influence, variability: Variability, metric: &str, range: ValueRange) -> NumericalAttributeSpec {
    NumericalAttributeSpec {
        key: key.to_owned(),
        influence,
        variability,
        metric: metric.to_owned(),
        range,
    }
}

fn text(key: &str) -> NonNumericalAttributeSpec {
    NonNumericalAttributeSpec {
        key: key.to_owned(),
        variability: Variability::Static,
        allowed_values: None,
    }
}

/// The built-in image and service attribute sets, in table order.
///
/// Metric labels are kept verbatim, including the `$/h` label on
/// "Internet Send Price".
pub fn builtin_attribute_specs() -> (AttributeSpecs, AttributeSpecs) {
    use Influence::*;
    use Variability::*;
    let any = ValueRange::NON_NEGATIVE;
    let pct = ValueRange::PERCENT;

    let image = AttributeSpecs {
        numerical: vec![
            num(attr::HOURLY_LICENSE_PRICE, Negative, Dynamic, "$/h", any),
            num(attr::POPULARITY, Positive, Dynamic, "%", pct),
            num(attr::AGE, Positive, Dynamic, "Days", any),
            num(attr::OS_VERSION, None, Static, "Version", any),
            num(attr::SOFTWARE_VERSION, None, Static, "Version", any),
        ],
        non_numerical: vec![
            text(attr::VIRTUALIZATION_FORMAT),
            text(attr::OPERATING_SYSTEM),
            text(attr::IMPLEMENTATION_LANGUAGE),
            text(attr::SOFTWARE_FEATURE),
            text(attr::SOFTWARE),
        ],
    };

    let service = AttributeSpecs {
        numerical: vec![
            num(attr::HOURLY_CPU_PRICE, Negative, Dynamic, "$/h", any),
            num(attr::NETWORK_SEND_PRICE, Negative, Dynamic, "$/B", any),
            num(attr::NETWORK_RECEIVE_PRICE, Negative, Dynamic, "$/B", any),
            num(attr::INTERNET_SEND_PRICE, Negative, Dynamic, "$/h", any),
            num(attr::INTERNET_RECEIVE_PRICE, Negative, Dynamic, "$/B", any),
            num(attr::CPU_PERFORMANCE, Positive, Dynamic, "Flops", any),
            num(attr::CPU_CORES, Positive, Dynamic, "Cores", any),
            num(attr::RAM_PERFORMANCE, Positive, Dynamic, "Flops", any),
            num(attr::RAM_SIZE, Positive, Dynamic, "Bit", any),
            num(attr::DISK_PERFORMANCE, Positive, Dynamic, "Flops", any),
            num(attr::DISK_SIZE, Positive, Dynamic, "Bit", any),
            num(attr::MAX_LATENCY, Negative, Dynamic, "ms", any),
            num(attr::AVG_LATENCY, Negative, Dynamic, "ms", any),
            num(attr::UPTIME, Positive, Dynamic, "%", pct),
            num(attr::SERVICE_POPULARITY, Positive, Dynamic, "%", pct),
        ],
        non_numerical: vec![text(attr::PROVIDER), text(attr::LOCATION_COUNTRY)],
    };

    (image, service)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provider {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VmImage {
    pub id: String,
    pub feature: String,
    #[serde(default)]
    pub numerical: BTreeMap<String, f64>,
    #[serde(default)]
    pub non_numerical: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CloudService {
    pub id: String,
    pub provider: String,
    pub location: String,
    #[serde(default)]
    pub numerical: BTreeMap<String, f64>,
    #[serde(default)]
    pub non_numerical: BTreeMap<String, String>,
}

/// Read access to attribute values of an evaluation alternative.
pub trait Alternative {
    fn id(&self) -> &str;
    fn numeric(&self, key: &str) -> Option<f64>;
    fn text(&self, key: &str) -> Option<&str>;
}

impl Alternative for VmImage {
    fn id(&self) -> &str {
        &self.id
    }

    fn numeric(&self, key: &str) -> Option<f64> {
        self.numerical.get(key).copied()
    }

    fn text(&self, key: &str) -> Option<&str> {
        if key == attr::SOFTWARE_FEATURE {
            return Some(&self.feature);
        }
        self.non_numerical.get(key).map(String::as_str)
    }
}

impl Alternative for CloudService {
    fn id(&self) -> &str {
        &self.id
    }

    fn numeric(&self, key: &str) -> Option<f64> {
        self.numerical.get(key).copied()
    }

    fn text(&self, key: &str) -> Option<&str> {
        match key {
            attr::PROVIDER => Some(&self.provider),
            attr::LOCATION_COUNTRY => Some(&self.location),
            _ => self.non_numerical.get(key).map(String::as_str),
        }
    }
}

impl<T: Alternative + ?Sized> Alternative for &T {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn numeric(&self, key: &str) -> Option<f64> {
        (**self).numeric(key)
    }

    fn text(&self, key: &str) -> Option<&str> {
        (**self).text(key)
    }
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

/// Compatibility sets: image-service deployability and the symmetric
/// image-image and service-service co-operation relations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompatibilitySets {
    image_service: BTreeSet<(String, String)>,
    image_image: BTreeSet<(String, String)>,
    service_service: BTreeSet<(String, String)>,
}

impl CompatibilitySets {
    pub fn new(
        image_service: impl IntoIterator<Item = (String, String)>,
        image_image: impl IntoIterator<Item = (String, String)>,
        service_service: impl IntoIterator<Item = (String, String)>,
    ) -> Self {
        CompatibilitySets {
            image_service: image_service.into_iter().collect(),
            image_image: image_image.into_iter().map(|(a, b)| unordered(&a, &b)).collect(),
            service_service: service_service
                .into_iter()
                .map(|(a, b)| unordered(&a, &b))
                .collect(),
        }
    }

    pub fn deployable(&self, image: &str, service: &str) -> bool {
        self.image_service
            .contains(&(image.to_owned(), service.to_owned()))
    }

    pub fn images_compatible(&self, a: &str, b: &str) -> bool {
        self.image_image.contains(&unordered(a, b))
    }

    pub fn services_compatible(&self, a: &str, b: &str) -> bool {
        self.service_service.contains(&unordered(a, b))
    }

    pub fn image_service(&self) -> &BTreeSet<(String, String)> {
        &self.image_service
    }

    pub fn image_image(&self) -> &BTreeSet<(String, String)> {
        &self.image_image
    }

    pub fn service_service(&self) -> &BTreeSet<(String, String)> {
        &self.service_service
    }
}

/// Index-based copy of the compatibility sets for hot feasibility checks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct CompatIndex {
    image_service: HashSet<(u32, u32)>,
    image_image: HashSet<(u32, u32)>,
    service_service: HashSet<(u32, u32)>,
}

fn ordered_idx(a: u32, b: u32) -> (u32, u32) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Serialized form of a catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CatalogDocument {
    pub providers: Vec<Provider>,
    pub images: Vec<VmImage>,
    pub services: Vec<CloudService>,
    #[serde(default)]
    pub compat: CompatDocument,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CompatDocument {
    #[serde(default)]
    pub image_service: Vec<(String, String)>,
    #[serde(default)]
    pub image_image: Vec<(String, String)>,
    #[serde(default)]
    pub service_service: Vec<(String, String)>,
}

/// Validated, immutable catalog snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    providers: Vec<Provider>,
    images: Vec<VmImage>,
    services: Vec<CloudService>,
    compat: CompatibilitySets,
    image_specs: AttributeSpecs,
    service_specs: AttributeSpecs,
    warnings: Vec<String>,
    image_index: HashMap<String, u32>,
    service_index: HashMap<String, u32>,
    compat_index: CompatIndex,
}

/// Reads and validates a catalog JSON file.
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Catalog::from_json(&text)
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Catalog> {
        let doc: CatalogDocument =
            serde_json::from_str(text).map_err(|e| Error::parse("catalog", e))?;
        Catalog::from_document(doc)
    }

    pub fn from_document(doc: CatalogDocument) -> Result<Catalog> {
        let (image_specs, service_specs) = builtin_attribute_specs();
        let mut warnings = Vec::new();

        let mut provider_ids = BTreeSet::new();
        for p in &doc.providers {
            if p.id.is_empty() {
                return Err(Error::validation("provider", "", "id", "must not be empty"));
            }
            if !provider_ids.insert(p.id.as_str()) {
                return Err(Error::validation("provider", &p.id, "id", "is duplicated"));
            }
        }

        let mut image_index = HashMap::new();
        for (i, image) in doc.images.iter().enumerate() {
            if image.id.is_empty() {
                return Err(Error::validation("image", "", "id", "must not be empty"));
            }
            if image_index.insert(image.id.clone(), i as u32).is_some() {
                return Err(Error::validation("image", &image.id, "id", "is duplicated"));
            }
            if image.feature.trim().is_empty() {
                return Err(Error::validation("image", &image.id, "feature", "must not be empty"));
            }
            if image.non_numerical.contains_key(attr::SOFTWARE_FEATURE) {
                return Err(Error::validation(
                    "image",
                    &image.id,
                    attr::SOFTWARE_FEATURE,
                    "is given by the `feature` field",
                ));
            }
            check_attributes(
                "image",
                &image.id,
                &image.numerical,
                &image.non_numerical,
                &image_specs,
                &mut warnings,
            )?;
        }

        let mut service_index = HashMap::new();
        for (j, service) in doc.services.iter().enumerate() {
            if service.id.is_empty() {
                return Err(Error::validation("service", "", "id", "must not be empty"));
            }
            if service_index.insert(service.id.clone(), j as u32).is_some() {
                return Err(Error::validation("service", &service.id, "id", "is duplicated"));
            }
            if !provider_ids.contains(service.provider.as_str()) {
                return Err(Error::validation(
                    "service",
                    &service.id,
                    "provider",
                    format!("references unknown provider `{}`", service.provider),
                ));
            }
            for key in [attr::PROVIDER, attr::LOCATION_COUNTRY] {
                if service.non_numerical.contains_key(key) {
                    return Err(Error::validation(
                        "service",
                        &service.id,
                        key,
                        "is given by the `provider`/`location` fields",
                    ));
                }
            }
            check_attributes(
                "service",
                &service.id,
                &service.numerical,
                &service.non_numerical,
                &service_specs,
                &mut warnings,
            )?;
        }

        let mut compat_index = CompatIndex::default();
        for (img, svc) in &doc.compat.image_service {
            let i = resolve(&image_index, "imageService", img, "image")?;
            let s = resolve(&service_index, "imageService", svc, "service")?;
            compat_index.image_service.insert((i, s));
        }
        for (a, b) in &doc.compat.image_image {
            let x = resolve(&image_index, "imageImage", a, "image")?;
            let y = resolve(&image_index, "imageImage", b, "image")?;
            compat_index.image_image.insert(ordered_idx(x, y));
        }
        for (a, b) in &doc.compat.service_service {
            let x = resolve(&service_index, "serviceService", a, "service")?;
            let y = resolve(&service_index, "serviceService", b, "service")?;
            compat_index.service_service.insert(ordered_idx(x, y));
        }

        let compat = CompatibilitySets::new(
            doc.compat.image_service,
            doc.compat.image_image,
            doc.compat.service_service,
        );

        Ok(Catalog {
            providers: doc.providers,
            images: doc.images,
            services: doc.services,
            compat,
            image_specs,
            service_specs,
            warnings,
            image_index,
            service_index,
            compat_index,
        })
    }

    /// Canonical serialized form; compatibility pairs come out sorted.
    pub fn to_document(&self) -> CatalogDocument {
        CatalogDocument {
            providers: self.providers.clone(),
            images: self.images.clone(),
            services: self.services.clone(),
            compat: CompatDocument {
                image_service: self.compat.image_service.iter().cloned().collect(),
                image_image: self.compat.image_image.iter().cloned().collect(),
                service_service: self.compat.service_service.iter().cloned().collect(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("catalog serializes")
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_document()).expect("catalog serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn providers(&self) -> &[Provider] {
        &self.providers
    }

    pub fn images(&self) -> &[VmImage] {
        &self.images
    }

    pub fn services(&self) -> &[CloudService] {
        &self.services
    }

    pub fn compat(&self) -> &CompatibilitySets {
        &self.compat
    }

    pub fn image_specs(&self) -> &AttributeSpecs {
        &self.image_specs
    }

    pub fn service_specs(&self) -> &AttributeSpecs {
        &self.service_specs
    }

    /// Load-time warnings, e.g. attribute keys outside the built-in set.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn image(&self, id: &str) -> Option<&VmImage> {
        self.image_index.get(id).map(|&i| &self.images[i as usize])
    }

    pub fn service(&self, id: &str) -> Option<&CloudService> {
        self.service_index.get(id).map(|&j| &self.services[j as usize])
    }

    pub fn image_position(&self, id: &str) -> Option<usize> {
        self.image_index.get(id).map(|&i| i as usize)
    }

    pub fn service_position(&self, id: &str) -> Option<usize> {
        self.service_index.get(id).map(|&j| j as usize)
    }

    /// Images whose software feature matches (case-insensitively), in id order.
    pub fn images_with_feature(&self, feature: &str) -> Vec<&VmImage> {
        let mut out: Vec<&VmImage> = self
            .images
            .iter()
            .filter(|i| i.feature.eq_ignore_ascii_case(feature.trim()))
            .collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }

    /// `(image, service)` deployability by catalog position.
    pub fn deployable_at(&self, image: usize, service: usize) -> bool {
        self.compat_index
            .image_service
            .contains(&(image as u32, service as u32))
    }

    pub fn images_compatible_at(&self, a: usize, b: usize) -> bool {
        self.compat_index
            .image_image
            .contains(&ordered_idx(a as u32, b as u32))
    }

    pub fn services_compatible_at(&self, a: usize, b: usize) -> bool {
        self.compat_index
            .service_service
            .contains(&ordered_idx(a as u32, b as u32))
    }
}

fn resolve(index: &HashMap<String, u32>, set: &str, id: &str, kind: &str) -> Result<u32> {
    index.get(id).copied().ok_or_else(|| {
        Error::validation(
            "compat",
            set,
            kind,
            format!("references unknown {kind} `{id}`"),
        )
    })
}

fn check_attributes(
    entity: &'static str,
    id: &str,
    numerical: &BTreeMap<String, f64>,
    non_numerical: &BTreeMap<String, String>,
    specs: &AttributeSpecs,
    warnings: &mut Vec<String>,
) -> Result<()> {
    for (key, &value) in numerical {
        if !value.is_finite() {
            return Err(Error::validation(entity, id, key, "must be a finite number"));
        }
        match specs.numerical(key) {
            Some(spec) if !spec.range.contains(value) => {
                let upper = spec
                    .range
                    .max
                    .map_or_else(|| "inf".to_owned(), |m| m.to_string());
                return Err(Error::validation(
                    entity,
                    id,
                    key,
                    format!("value {value} outside [{}, {upper}]", spec.range.min),
                ));
            }
            Some(_) => {}
            None if specs.non_numerical(key).is_some() => {
                return Err(Error::validation(entity, id, key, "is a non-numerical attribute"));
            }
            None => warnings.push(format!("{entity} `{id}`: unknown numerical attribute `{key}`")),
        }
    }
    for (key, value) in non_numerical {
        match specs.non_numerical(key) {
            Some(spec) => {
                if let Some(allowed) = &spec.allowed_values {
                    if !allowed.contains(value) {
                        return Err(Error::validation(
                            entity,
                            id,
                            key,
                            format!("value `{value}` is not allowed"),
                        ));
                    }
                }
            }
            None if specs.numerical(key).is_some() => {
                return Err(Error::validation(entity, id, key, "is a numerical attribute"));
            }
            None => warnings.push(format!(
                "{entity} `{id}`: unknown non-numerical attribute `{key}`"
            )),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_doc() -> CatalogDocument {
        let image = |id: &str| VmImage {
            id: id.into(),
            feature: "Web Server".into(),
            numerical: BTreeMap::from([(attr::POPULARITY.into(), 50.0)]),
            non_numerical: BTreeMap::new(),
        };
        let service = |id: &str, p: &str| CloudService {
            id: id.into(),
            provider: p.into(),
            location: "Germany".into(),
            numerical: BTreeMap::from([(attr::UPTIME.into(), 99.9)]),
            non_numerical: BTreeMap::new(),
        };
        let images = vec![image("a1"), image("a2"), image("a3")];
        let services = vec![service("s1", "p1"), service("s2", "p1"), service("s3", "p2")];
        let mut pairs = Vec::new();
        for i in &images {
            for s in &services {
                pairs.push((i.id.clone(), s.id.clone()));
            }
        }
        CatalogDocument {
            providers: vec![
                Provider { id: "p1".into(), name: "One".into() },
                Provider { id: "p2".into(), name: "Two".into() },
            ],
            images,
            services,
            compat: CompatDocument {
                image_service: pairs,
                image_image: vec![("a2".into(), "a1".into())],
                service_service: vec![],
            },
        }
    }

    #[test]
    fn counts_echo_input() {
        let c = Catalog::from_document(small_doc()).unwrap();
        assert_eq!(c.images().len(), 3);
        assert_eq!(c.services().len(), 3);
        assert_eq!(c.compat().image_service().len(), 9);
        assert!(c.warnings().is_empty());
    }

    #[test]
    fn popularity_out_of_range_names_image_and_field() {
        let mut doc = small_doc();
        doc.images[1].numerical.insert(attr::POPULARITY.into(), 150.0);
        let err = Catalog::from_document(doc).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation { .. }));
        assert!(msg.contains("a2") && msg.contains("Popularity"), "{msg}");
    }

    #[test]
    fn dangling_provider_rejected() {
        let mut doc = small_doc();
        doc.services[0].provider = "px".into();
        let err = Catalog::from_document(doc).unwrap_err();
        assert!(err.to_string().contains("px"));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            Catalog::from_json("{\"providers\": ["),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn unknown_attributes_are_kept_with_warning() {
        let mut doc = small_doc();
        doc.images[0].numerical.insert("Boot Time".into(), 12.0);
        let c = Catalog::from_document(doc).unwrap();
        assert_eq!(c.warnings().len(), 1);
        assert_eq!(c.image("a1").unwrap().numeric("Boot Time"), Some(12.0));
    }

    #[test]
    fn symmetric_relations() {
        let c = Catalog::from_document(small_doc()).unwrap();
        assert!(c.compat().images_compatible("a1", "a2"));
        assert!(c.compat().images_compatible("a2", "a1"));
        assert!(c.images_compatible_at(0, 1) && c.images_compatible_at(1, 0));
        assert!(!c.compat().images_compatible("a1", "a3"));
    }

    #[test]
    fn builtin_specs_match_tables() {
        let (img, svc) = builtin_attribute_specs();
        let price = img.numerical(attr::HOURLY_LICENSE_PRICE).unwrap();
        assert_eq!(price.influence, Influence::Negative);
        assert_eq!(price.variability, Variability::Dynamic);
        assert_eq!(price.metric, "$/h");
        let uptime = svc.numerical(attr::UPTIME).unwrap();
        assert_eq!(uptime.influence, Influence::Positive);
        assert_eq!(uptime.range, ValueRange::PERCENT);
        assert!(img.non_numerical(attr::OPERATING_SYSTEM).is_some());
        assert_eq!(img.numerical(attr::OS_VERSION).unwrap().influence, Influence::None);
        assert_eq!(img.numerical(attr::SOFTWARE_VERSION).unwrap().influence, Influence::None);
        assert_eq!(img.numerical.len(), 5);
        assert_eq!(img.non_numerical.len(), 5);
        assert_eq!(svc.numerical.len(), 15);
        assert_eq!(svc.non_numerical.len(), 2);
        assert!(svc.numerical.iter().all(|s| s.variability == Variability::Dynamic));
        assert!(img
            .non_numerical
            .iter()
            .chain(&svc.non_numerical)
            .all(|s| s.variability == Variability::Static));
    }

    #[test]
    fn json_round_trip() {
        let c = Catalog::from_document(small_doc()).unwrap();
        let back = Catalog::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.digest(), back.digest());
    }
}
