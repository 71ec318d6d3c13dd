//! Brute-force scoring written straight from the formulas, sharing no code
//! with the engine. Plain data in, plain numbers out.

use std::collections::{BTreeMap, HashSet};

#[derive(Debug, Clone)]
pub struct Alt {
    pub id: String,
    pub values: BTreeMap<String, f64>,
    pub text: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Svc {
    pub alt: Alt,
    pub provider: String,
    pub location: String,
}

#[derive(Debug, Clone)]
pub enum Req {
    Max(String, f64),
    Min(String, f64),
    Equals(String, String),
    OneOf(String, Vec<String>),
}

#[derive(Debug, Clone)]
pub struct Crit {
    pub attr: String,
    pub positive: bool,
    pub weight: f64,
}

/// Saaty-scale judgments for one goal, row-major.
pub type Judgments = Vec<Vec<f64>>;

/// Goal tree: a goal with children (and a matrix if more than one), or a leaf.
#[derive(Debug, Clone)]
pub enum Tree {
    Goal(Judgments, Vec<Tree>),
    Leaf(String, bool),
}

pub fn priorities(m: &Judgments) -> Vec<f64> {
    let n = m.len();
    let g: Vec<f64> = m
        .iter()
        .map(|row| row.iter().fold(1.0, |p, x| p * x).powf(1.0 / n as f64))
        .collect();
    let s: f64 = g.iter().sum();
    g.iter().map(|x| x / s).collect()
}

/// Leaf weights as products of local priorities along each path.
pub fn flatten(tree: &Tree, weight: f64, out: &mut Vec<Crit>) {
    match tree {
        Tree::Leaf(attr, positive) => out.push(Crit {
            attr: attr.clone(),
            positive: *positive,
            weight,
        }),
        Tree::Goal(m, kids) => {
            let local = if kids.len() == 1 { vec![1.0] } else { priorities(m) };
            for (k, p) in kids.iter().zip(local) {
                flatten(k, weight * p, out);
            }
        }
    }
}

pub fn satisfied(r: &Req, a: &Alt) -> bool {
    match r {
        Req::Max(k, b) => a.values.get(k).is_some_and(|v| v < b),
        Req::Min(k, b) => a.values.get(k).is_some_and(|v| v > b),
        Req::Equals(k, s) => a.text.get(k).is_some_and(|v| v == s),
        Req::OneOf(k, set) => a.text.get(k).is_some_and(|v| set.contains(v)),
    }
}

/// Indices passing all requirements; if none, those failing at most one,
/// and so on.
pub fn admitted(reqs: &[Req], alts: &[&Alt]) -> Vec<usize> {
    for allowed in 0..=reqs.len() {
        let s: Vec<usize> = (0..alts.len())
            .filter(|&i| reqs.iter().filter(|r| !satisfied(r, alts[i])).count() <= allowed)
            .collect();
        if !s.is_empty() {
            return s;
        }
    }
    Vec::new()
}

/// Positive weighted sum over negative weighted sum of normalized values,
/// then divided by the best so the top alternative is 1.
pub fn values(crits: &[Crit], alts: &[&Alt]) -> Vec<f64> {
    let n = alts.len();
    let mut pos = vec![0.0; n];
    let mut neg = vec![0.0; n];
    let any_pos = crits.iter().any(|c| c.positive);
    let any_neg = crits.iter().any(|c| !c.positive);
    for c in crits {
        let col: Vec<f64> = alts.iter().map(|a| a.values.get(&c.attr).copied().unwrap_or(0.0)).collect();
        let total: f64 = col.iter().sum();
        for i in 0..n {
            let x = if total == 0.0 { 1.0 / n as f64 } else { col[i] / total };
            if c.positive {
                pos[i] += c.weight * x;
            } else {
                neg[i] += c.weight * x;
            }
        }
    }
    let floor = 1.0 / (n as f64 * 1e6);
    let f: Vec<f64> = (0..n)
        .map(|i| {
            let top = if any_pos { pos[i] } else { 1.0 };
            let bottom = if any_neg { neg[i].max(floor) } else { 1.0 };
            top / bottom
        })
        .collect();
    let best = f.iter().cloned().fold(0.0, f64::max);
    f.iter().map(|x| if best > 0.0 { x / best } else { 1.0 }).collect()
}

#[derive(Debug, Clone)]
pub struct Link {
    pub a: String,
    pub b: String,
    /// local receive, local send, internet receive, internet send
    pub costs: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Sum,
    Product,
}

pub struct World {
    pub images: Vec<(Alt, String)>,
    pub services: Vec<Svc>,
    pub d: HashSet<(String, String)>,
    pub e: HashSet<(String, String)>,
    pub f: HashSet<(String, String)>,
    pub links: Vec<Link>,
    /// component -> (image, service)
    pub committed: BTreeMap<String, (String, String)>,
}

pub struct Prefs {
    pub image_reqs: Vec<Req>,
    pub service_reqs: Vec<Req>,
    pub image_tree: Tree,
    pub service_tree: Tree,
    pub importance: f64,
    pub op: Op,
    pub use_delta: bool,
}

impl World {
    fn service(&self, id: &str) -> &Svc {
        self.services.iter().find(|s| s.alt.id == id).unwrap()
    }

    /// Extra traffic cost for `comp` placed on `svc`.
    pub fn delta(&self, comp: &str, svc: &Svc) -> f64 {
        let mut total = 0.0;
        for l in &self.links {
            let other = if l.a == comp {
                &l.b
            } else if l.b == comp {
                &l.a
            } else {
                continue;
            };
            let Some((_, other_svc)) = self.committed.get(other) else { continue };
            let o = self.service(other_svc);
            total += if o.provider == svc.provider && o.location == svc.location {
                l.costs[0] + l.costs[1]
            } else {
                l.costs[2] + l.costs[3]
            };
        }
        total
    }

    fn neighbors(&self, comp: &str) -> Vec<&(String, String)> {
        self.links
            .iter()
            .filter_map(|l| {
                let other = if l.a == comp { &l.b } else if l.b == comp { &l.a } else { return None };
                self.committed.get(other)
            })
            .collect()
    }

    /// Raw values of every feasible pair of admitted image and service.
    pub fn pair_values(&self, comp: &str, feature: &str, p: &Prefs) -> BTreeMap<(String, String), f64> {
        let imgs: Vec<&Alt> = self.images.iter().filter(|(_, f)| f == feature).map(|(a, _)| a).collect();
        let svcs: Vec<&Alt> = self.services.iter().map(|s| &s.alt).collect();
        let ai = admitted(&p.image_reqs, &imgs);
        let si = admitted(&p.service_reqs, &svcs);
        let ia: Vec<&Alt> = ai.iter().map(|&i| imgs[i]).collect();
        let sa: Vec<&Alt> = si.iter().map(|&i| svcs[i]).collect();

        let mut ic = Vec::new();
        flatten(&p.image_tree, 1.0, &mut ic);
        let mut sc = Vec::new();
        flatten(&p.service_tree, 1.0, &mut sc);
        let va = values(&ic, &ia);
        let vs = values(&sc, &sa);

        let w = priorities(&vec![vec![1.0, p.importance], vec![1.0 / p.importance, 1.0]]);
        let near = self.neighbors(comp);
        let mut feasible = Vec::new();
        for (x, a) in ia.iter().enumerate() {
            for (y, s) in sa.iter().enumerate() {
                let ok = self.d.contains(&(a.id.clone(), s.id.clone()))
                    && near.iter().all(|(ni, ns)| {
                        self.e.contains(&(a.id.clone(), ni.clone())) && self.f.contains(&(s.id.clone(), ns.clone()))
                    });
                if ok {
                    let svc = self.service(&s.id);
                    feasible.push((a.id.clone(), s.id.clone(), va[x], vs[y], self.delta(comp, svc)));
                }
            }
        }
        let total: f64 = feasible.iter().map(|t| t.4).sum();
        let floor = 1.0 / (feasible.len() as f64 * 1e6);
        feasible
            .into_iter()
            .map(|(i, s, a, b, d)| {
                let nd = if !p.use_delta || total == 0.0 { 1.0 } else { (d / total).max(floor) };
                let v = match p.op {
                    Op::Sum => w[0] * a + w[1] * b,
                    Op::Product => a * b,
                };
                ((i, s), v / nd)
            })
            .collect()
    }
}

/// Highest value, ties to the smallest (image, service).
pub fn argmax(values: &BTreeMap<(String, String), f64>) -> Option<(String, String)> {
    let mut best: Option<(&(String, String), f64)> = None;
    for (k, &v) in values {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k.clone())
}
