//! Intersection arithmetic on blow-ups of the projective plane.
//!
//! A [`Configuration`] records an ordered forest of base points (free points
//! and first-order infinitely near points). Divisor classes live in the
//! Picard lattice generated by the line class `H` and the total-transform
//! exceptional classes `E_i`, with `H^2 = 1`, `E_i . E_j = -delta_ij`,
//! `H . E_i = 0`. A class is stored as `d H - sum m_i E_i`, so strict
//! transforms such as `E_parent - E_child` are derived values, never basis
//! elements; this keeps the pairing and the virtual dimension uniform across
//! free and infinitely near points.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_i64, half, Scalar};

/// Errors from lattice construction and arithmetic.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("label {0} appears twice in the configuration")]
    DuplicateLabel(Label),
    #[error("parent {parent} of {label} is not an earlier point of the configuration")]
    BadParent { label: Label, parent: Label },
    #[error("label {0} does not belong to the configuration")]
    UnknownLabel(Label),
    #[error("point {0} already has an infinitely near point attached")]
    AlreadyHasChild(Label),
    #[error("malformed class JSON: {0}")]
    Json(String),
}

/// Opaque identifier of a base point.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub String);

impl Label {
    pub fn new(name: impl Into<String>) -> Self {
        Label(name.into())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label(s.to_owned())
    }
}

/// One base point: free (`parent == None`) or infinitely near of first order
/// to an earlier point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointNode {
    pub label: Label,
    pub parent: Option<Label>,
}

/// Ordered configuration of base points. Position order is the canonical
/// order for sorting ties, rendering, and serialization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    points: Vec<PointNode>,
}

impl Configuration {
    /// Validates label uniqueness and that parents reference earlier points.
    pub fn new(points: Vec<PointNode>) -> Result<Self, LatticeError> {
        let mut seen: BTreeMap<&Label, usize> = BTreeMap::new();
        for (idx, node) in points.iter().enumerate() {
            if seen.contains_key(&node.label) {
                return Err(LatticeError::DuplicateLabel(node.label.clone()));
            }
            if let Some(parent) = &node.parent {
                match seen.get(parent) {
                    Some(_) => {}
                    None => {
                        return Err(LatticeError::BadParent {
                            label: node.label.clone(),
                            parent: parent.clone(),
                        })
                    }
                }
            }
            seen.insert(&node.label, idx);
        }
        Ok(Configuration { points })
    }

    /// `k` free points labelled `p1..pk`.
    pub fn free(k: usize) -> Self {
        let points = (1..=k)
            .map(|i| PointNode {
                label: Label(format!("p{i}")),
                parent: None,
            })
            .collect();
        Configuration { points }
    }

    /// `free` free points `p1..`, then `chains` two-point clusters: parent
    /// `p{j}` followed by its infinitely near point `p{j}.1`.
    pub fn with_clusters(free: usize, chains: usize) -> Self {
        let mut points = Vec::with_capacity(free + 2 * chains);
        for i in 1..=free {
            points.push(PointNode {
                label: Label(format!("p{i}")),
                parent: None,
            });
        }
        for j in free + 1..=free + chains {
            let parent = Label(format!("p{j}"));
            points.push(PointNode {
                label: parent.clone(),
                parent: None,
            });
            points.push(PointNode {
                label: Label(format!("p{j}.1")),
                parent: Some(parent),
            });
        }
        Configuration { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PointNode] {
        &self.points
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.points.iter().map(|n| &n.label)
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.position(label).is_some()
    }

    /// Canonical position of a label, if present.
    pub fn position(&self, label: &Label) -> Option<usize> {
        self.points.iter().position(|n| &n.label == label)
    }

    pub fn parent_of(&self, label: &Label) -> Option<&Label> {
        self.points
            .iter()
            .find(|n| &n.label == label)
            .and_then(|n| n.parent.as_ref())
    }

    /// First-order infinitely near point attached to `label`, if any.
    pub fn child_of(&self, label: &Label) -> Option<&Label> {
        self.points
            .iter()
            .find(|n| n.parent.as_ref() == Some(label))
            .map(|n| &n.label)
    }

    pub fn is_free(&self, label: &Label) -> bool {
        self.parent_of(label).is_none()
    }

    /// Appends a free point; the label must be fresh.
    pub fn push_free(&mut self, label: Label) -> Result<(), LatticeError> {
        if self.contains(&label) {
            return Err(LatticeError::DuplicateLabel(label));
        }
        self.points.push(PointNode {
            label,
            parent: None,
        });
        Ok(())
    }

    /// Appends a point infinitely near to an existing one that has no
    /// attached point yet.
    pub fn push_near(&mut self, label: Label, parent: Label) -> Result<(), LatticeError> {
        if self.contains(&label) {
            return Err(LatticeError::DuplicateLabel(label));
        }
        if !self.contains(&parent) {
            return Err(LatticeError::UnknownLabel(parent));
        }
        if self.child_of(&parent).is_some() {
            return Err(LatticeError::AlreadyHasChild(parent));
        }
        self.points.push(PointNode {
            label,
            parent: Some(parent),
        });
        Ok(())
    }

    /// Detaches `label` from its parent, turning it into a free point at the
    /// same position.
    pub fn detach(&mut self, label: &Label) -> Result<(), LatticeError> {
        let node = self
            .points
            .iter_mut()
            .find(|n| &n.label == label)
            .ok_or_else(|| LatticeError::UnknownLabel(label.clone()))?;
        node.parent = None;
        Ok(())
    }
}

/// Element `degree * H - sum mults[i] * E_i` of the Picard lattice.
///
/// Zero multiplicities are never stored, so equality of classes is
/// independent of which zero entries a caller happened to mention. Negative
/// degrees and multiplicities are representable: intermediate reduction
/// states need them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivisorClass<T: Scalar> {
    degree: T,
    mults: BTreeMap<Label, T>,
}

impl<T: Scalar> DivisorClass<T> {
    pub fn new(degree: T, mults: impl IntoIterator<Item = (Label, T)>) -> Self {
        let mut class = DivisorClass {
            degree,
            mults: BTreeMap::new(),
        };
        for (label, m) in mults {
            class.set_mult(label, m);
        }
        class
    }

    /// Class with degree only (no base points).
    pub fn of_degree(degree: T) -> Self {
        DivisorClass {
            degree,
            mults: BTreeMap::new(),
        }
    }

    /// Builds `degree; mults` with multiplicities assigned to the first
    /// `mults.len()` points of `cfg` in canonical order.
    pub fn aligned(degree: T, mults: &[T], cfg: &Configuration) -> Self {
        assert!(
            mults.len() <= cfg.len(),
            "more multiplicities than configuration points"
        );
        DivisorClass::new(
            degree,
            cfg.labels()
                .cloned()
                .zip(mults.iter().cloned())
                .collect::<Vec<_>>(),
        )
    }

    /// The total-transform exceptional class `E_label`, stored as degree 0
    /// with multiplicity -1 at `label`.
    pub fn exceptional(label: Label) -> Self {
        DivisorClass::new(T::zero(), [(label, from_i64::<T>(-1))])
    }

    pub fn degree(&self) -> &T {
        &self.degree
    }

    pub fn set_degree(&mut self, degree: T) {
        self.degree = degree;
    }

    /// Multiplicity at `label` (zero when absent).
    pub fn mult(&self, label: &Label) -> T {
        self.mults.get(label).cloned().unwrap_or_else(T::zero)
    }

    pub fn set_mult(&mut self, label: Label, m: T) {
        if m.is_zero() {
            self.mults.remove(&label);
        } else {
            self.mults.insert(label, m);
        }
    }

    pub fn add_mult(&mut self, label: &Label, delta: T) {
        let m = self.mult(label) + delta;
        self.set_mult(label.clone(), m);
    }

    /// Labels carrying a nonzero multiplicity.
    pub fn support(&self) -> impl Iterator<Item = &Label> {
        self.mults.keys()
    }

    pub fn support_len(&self) -> usize {
        self.mults.len()
    }

    pub fn mults(&self) -> impl Iterator<Item = (&Label, &T)> {
        self.mults.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.degree.is_zero() && self.mults.is_empty()
    }

    /// Sum of all multiplicities.
    pub fn mult_sum(&self) -> T {
        self.mults
            .values()
            .fold(T::zero(), |acc, m| acc + m.clone())
    }

    /// `self + t * other` in the lattice.
    pub fn add_scaled(&self, other: &DivisorClass<T>, t: T) -> DivisorClass<T> {
        let mut out = self.clone();
        out.degree = out.degree + t.clone() * other.degree.clone();
        for (label, m) in &other.mults {
            out.add_mult(label, t.clone() * m.clone());
        }
        out
    }

    pub fn plus(&self, other: &DivisorClass<T>) -> DivisorClass<T> {
        self.add_scaled(other, T::one())
    }

    pub fn minus(&self, other: &DivisorClass<T>) -> DivisorClass<T> {
        self.add_scaled(other, from_i64::<T>(-1))
    }

    pub fn scaled(&self, t: T) -> DivisorClass<T> {
        DivisorClass::of_degree(T::zero()).add_scaled(self, t)
    }

    /// Multiplicities in the canonical order of `cfg` (zeros filled in).
    pub fn mult_vector(&self, cfg: &Configuration) -> Vec<T> {
        cfg.labels().map(|l| self.mult(l)).collect()
    }

    fn check_over(&self, cfg: &Configuration) -> Result<(), LatticeError> {
        for label in self.mults.keys() {
            if !cfg.contains(label) {
                return Err(LatticeError::UnknownLabel(label.clone()));
            }
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Display for DivisorClass<T> {
    /// Compact `d; m1, m2, ...` form in label order (label order here is the
    /// lexicographic fallback; renderers with a configuration in hand should
    /// use canonical positions instead).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degree)?;
        if !self.mults.is_empty() {
            write!(f, ";")?;
            for (i, (_, m)) in self.mults.iter().enumerate() {
                write!(f, "{}{}", if i == 0 { " " } else { ", " }, m)?;
            }
        }
        Ok(())
    }
}

/// Intersection pairing `deg(a) deg(b) - sum_i m_i(a) m_i(b)`.
pub fn pair<T: Scalar>(
    a: &DivisorClass<T>,
    b: &DivisorClass<T>,
    cfg: &Configuration,
) -> Result<T, LatticeError> {
    a.check_over(cfg)?;
    b.check_over(cfg)?;
    let mut acc = a.degree.clone() * b.degree.clone();
    for (label, ma) in &a.mults {
        let mb = b.mult(label);
        if !mb.is_zero() {
            acc = acc - ma.clone() * mb;
        }
    }
    Ok(acc)
}

/// Canonical class `-3 H + sum_i E_i`, i.e. degree -3 with every
/// multiplicity -1.
pub fn canonical_class<T: Scalar>(cfg: &Configuration) -> DivisorClass<T> {
    DivisorClass::new(
        from_i64::<T>(-3),
        cfg.labels()
            .map(|l| (l.clone(), from_i64::<T>(-1)))
            .collect::<Vec<_>>(),
    )
}

/// Virtual dimension `d(d+3)/2 - sum m_i(m_i+1)/2`, equal to
/// `(L.L - L.K)/2`.
pub fn virtual_dim<T: Scalar>(l: &DivisorClass<T>) -> T {
    let d = l.degree.clone();
    let mut v = half(d.clone() * (d + from_i64::<T>(3)));
    for (_, m) in l.mults() {
        v = v - half(m.clone() * (m.clone() + T::one()));
    }
    v
}

/// Expected dimension `max(-1, virtual_dim)`.
pub fn expected_dim<T: Scalar>(l: &DivisorClass<T>) -> T {
    let v = virtual_dim(l);
    let floor = from_i64::<T>(-1);
    if v < floor {
        floor
    } else {
        v
    }
}

/// Self-intersection target for negative-class enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelfIntTarget {
    /// Classes with `C^2 = -1`, `C.K = -1` (rational of genus 0).
    MinusOne,
    /// Classes with `C^2 = -2`, `C.K = 0`.
    MinusTwo,
}

impl SelfIntTarget {
    pub fn self_int(self) -> i64 {
        match self {
            SelfIntTarget::MinusOne => -1,
            SelfIntTarget::MinusTwo => -2,
        }
    }

    fn canonical_pairing(self) -> i64 {
        match self {
            SelfIntTarget::MinusOne => -1,
            SelfIntTarget::MinusTwo => 0,
        }
    }
}

/// One enumerated negative class together with its invariants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegClassEntry<T: Scalar> {
    pub class: DivisorClass<T>,
    pub self_int: i64,
    pub pairing_with_input: T,
}

/// Result of a bounded negative-class search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegClassReport<T: Scalar> {
    pub classes: Vec<NegClassEntry<T>>,
    pub degree_bound_used: i64,
    /// True only when the bound provably exhausts all classes of the target
    /// type: automatic for at most 8 points with bound >= 6 (every such class
    /// has degree <= 6 by Cauchy-Schwarz on the defining equations), or set
    /// by [`NegClassReport::assert_complete`] with a caller justification.
    pub complete: bool,
    pub justification: Option<String>,
}

impl<T: Scalar> NegClassReport<T> {
    /// Caller-supplied completeness claim (e.g. a nefness bound specific to
    /// the input class); records the justification verbatim.
    pub fn assert_complete(mut self, justification: &str) -> Self {
        self.complete = true;
        self.justification = Some(justification.to_owned());
        self
    }
}

/// Enumerates integer classes `C = delta H - sum c_i E_i` with
/// `0 <= delta <= degree_bound`, the target self-intersection, the matching
/// canonical pairing, and `c_i >= 0` whenever `delta > 0`. Classes of degree
/// zero are the exceptional shapes `E_i` (target -1) and `E_i - E_j` (target
/// -2). Output is sorted by pairing with `l` ascending, then canonically.
pub fn enumerate_negative_classes<T: Scalar>(
    cfg: &Configuration,
    l: &DivisorClass<T>,
    degree_bound: i64,
    target: SelfIntTarget,
) -> Result<NegClassReport<T>, LatticeError> {
    assert!(degree_bound >= 0, "degree_bound must be nonnegative");
    l.check_over(cfg)?;
    let labels: Vec<Label> = cfg.labels().cloned().collect();
    let k = labels.len();
    let mut found: Vec<DivisorClass<T>> = Vec::new();

    match target {
        SelfIntTarget::MinusOne => {
            for label in &labels {
                found.push(DivisorClass::exceptional(label.clone()));
            }
        }
        SelfIntTarget::MinusTwo => {
            for i in &labels {
                for j in &labels {
                    if i != j {
                        // E_i - E_j: multiplicity -1 at i, +1 at j.
                        found.push(DivisorClass::new(
                            T::zero(),
                            [
                                (i.clone(), from_i64::<T>(-1)),
                                (j.clone(), T::one()),
                            ],
                        ));
                    }
                }
            }
        }
    }

    for delta in 1..=degree_bound {
        let (sum, sum_sq) = match target {
            SelfIntTarget::MinusOne => (3 * delta - 1, delta * delta + 1),
            SelfIntTarget::MinusTwo => (3 * delta, delta * delta + 2),
        };
        if sum < 0 {
            continue;
        }
        let mut coeffs = vec![0i64; k];
        search_mult_vectors(delta, sum, sum_sq, 0, &mut coeffs, &mut |c| {
            found.push(DivisorClass::new(
                from_i64::<T>(delta),
                labels
                    .iter()
                    .cloned()
                    .zip(c.iter().map(|&x| from_i64::<T>(x)))
                    .collect::<Vec<_>>(),
            ));
        });
    }

    let canonical = canonical_class::<T>(cfg);
    let mut classes = Vec::with_capacity(found.len());
    for class in found {
        let self_int = pair(&class, &class, cfg)?;
        let with_k = pair(&class, &canonical, cfg)?;
        debug_assert_eq!(self_int.to_i64(), Some(target.self_int()));
        debug_assert_eq!(with_k.to_i64(), Some(target.canonical_pairing()));
        let pairing_with_input = pair(&class, l, cfg)?;
        classes.push(NegClassEntry {
            class,
            self_int: target.self_int(),
            pairing_with_input,
        });
    }
    classes.sort_by(|a, b| {
        a.pairing_with_input
            .cmp(&b.pairing_with_input)
            .then_with(|| a.class.degree.cmp(&b.class.degree))
            .then_with(|| {
                a.class
                    .mult_vector(cfg)
                    .cmp(&b.class.mult_vector(cfg))
            })
    });

    let complete = k <= 8 && degree_bound >= 6;
    Ok(NegClassReport {
        classes,
        degree_bound_used: degree_bound,
        complete,
        justification: complete.then(|| "exhaustive: at most 8 points, bound 6".to_owned()),
    })
}

/// Depth-first enumeration of nonnegative coefficient vectors with the given
/// sum and sum of squares; coefficients are capped by `delta` (forced by the
/// square constraint) and pruned by feasibility of the remaining budget.
fn search_mult_vectors(
    delta: i64,
    sum: i64,
    sum_sq: i64,
    idx: usize,
    coeffs: &mut Vec<i64>,
    emit: &mut impl FnMut(&[i64]),
) {
    if sum < 0 || sum_sq < 0 {
        return;
    }
    if idx == coeffs.len() {
        if sum == 0 && sum_sq == 0 {
            emit(coeffs);
        }
        return;
    }
    let remaining = (coeffs.len() - idx) as i64;
    // Even all-max coefficients cannot reach the remaining sum.
    if sum > remaining * delta {
        return;
    }
    let hi = delta.min(sum).min(isqrt(sum_sq));
    for c in (0..=hi).rev() {
        let s = sum - c;
        let q = sum_sq - c * c;
        let rest = remaining - 1;
        // Cauchy-Schwarz: rest nonnegative entries with sum s need
        // s^2 <= rest * (their sum of squares).
        if rest == 0 {
            if s != 0 || q != 0 {
                continue;
            }
        } else if s * s > rest * q {
            continue;
        }
        coeffs[idx] = c;
        search_mult_vectors(delta, s, q, idx + 1, coeffs, emit);
    }
    coeffs[idx] = 0;
}

fn isqrt(n: i64) -> i64 {
    if n <= 0 {
        return 0;
    }
    let mut x = (n as f64).sqrt() as i64;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Verdict of a bounded nefness test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NefVerdict<T: Scalar> {
    /// No enumerated negative class pairs negatively with the input.
    NefUpToBound,
    /// A witness with its (negative) pairing.
    NotNef {
        witness: DivisorClass<T>,
        pairing: T,
    },
}

/// Tests `l` against the classes that are effective curves at general
/// position: every enumerated (-1)-class up to the degree bound, plus the
/// chain class E_parent - E_child of each infinitely near point. Numerical
/// (-2)-classes of positive degree only become curves at special positions
/// and are not consulted. Returns the most negative witness, if any.
pub fn is_nef_bounded<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
    degree_bound: i64,
) -> Result<NefVerdict<T>, LatticeError> {
    let mut worst: Option<(DivisorClass<T>, T)> = None;
    let consider = |class: DivisorClass<T>, pairing: T, worst: &mut Option<(DivisorClass<T>, T)>| {
        if pairing < T::zero() {
            let better = match worst {
                None => true,
                Some((_, p)) => pairing < *p,
            };
            if better {
                *worst = Some((class, pairing));
            }
        }
    };
    let report = enumerate_negative_classes(cfg, l, degree_bound, SelfIntTarget::MinusOne)?;
    for entry in report.classes {
        consider(entry.class, entry.pairing_with_input, &mut worst);
    }
    for node in cfg.points() {
        if let Some(parent) = &node.parent {
            let chain = DivisorClass::new(
                T::zero(),
                [
                    (parent.clone(), from_i64::<T>(-1)),
                    (node.label.clone(), T::one()),
                ],
            );
            let pairing = pair(&chain, l, cfg)?;
            consider(chain, pairing, &mut worst);
        }
    }
    Ok(match worst {
        None => NefVerdict::NefUpToBound,
        Some((witness, pairing)) => NefVerdict::NotNef { witness, pairing },
    })
}

/// JSON form `{degree, mults: [{label, mult, parent}]}` with entries in the
/// canonical order of `cfg` (every configuration point appears, zeros
/// included). Degrees and multiplicities must fit in `i64`.
pub fn class_to_json<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
) -> Result<serde_json::Value, LatticeError> {
    l.check_over(cfg)?;
    let degree = l
        .degree()
        .to_i64()
        .ok_or_else(|| LatticeError::Json("degree exceeds the i64 interchange range".into()))?;
    let mults: Vec<serde_json::Value> = cfg
        .points()
        .iter()
        .map(|node| {
            let m = l.mult(&node.label).to_i64().ok_or_else(|| {
                LatticeError::Json("multiplicity exceeds the i64 interchange range".into())
            })?;
            Ok(serde_json::json!({
                "label": node.label.0,
                "mult": m,
                "parent": node.parent.as_ref().map(|p| p.0.clone()),
            }))
        })
        .collect::<Result<_, LatticeError>>()?;
    Ok(serde_json::json!({ "degree": degree, "mults": mults }))
}

/// Inverse of [`class_to_json`]: rebuilds the configuration and the class.
pub fn class_from_json<T: Scalar>(
    value: &serde_json::Value,
) -> Result<(Configuration, DivisorClass<T>), LatticeError> {
    let degree = value
        .get("degree")
        .and_then(|d| d.as_i64())
        .ok_or_else(|| LatticeError::Json("missing integer field: degree".into()))?;
    let entries = value
        .get("mults")
        .and_then(|m| m.as_array())
        .ok_or_else(|| LatticeError::Json("missing array field: mults".into()))?;
    let mut points = Vec::with_capacity(entries.len());
    let mut mults = Vec::with_capacity(entries.len());
    for entry in entries {
        let label = entry
            .get("label")
            .and_then(|l| l.as_str())
            .ok_or_else(|| LatticeError::Json("mult entry without label".into()))?;
        let m = entry
            .get("mult")
            .and_then(|m| m.as_i64())
            .ok_or_else(|| LatticeError::Json("mult entry without integer mult".into()))?;
        let parent = entry
            .get("parent")
            .and_then(|p| p.as_str())
            .map(Label::from);
        points.push(PointNode {
            label: Label::from(label),
            parent,
        });
        mults.push((Label::from(label), from_i64::<T>(m)));
    }
    let cfg = Configuration::new(points)?;
    Ok((cfg, DivisorClass::new(from_i64::<T>(degree), mults)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn homogeneous(d: i64, m: i64, k: usize) -> (Configuration, DivisorClass<i64>) {
        let cfg = Configuration::free(k);
        let class = DivisorClass::aligned(d, &vec![m; k], &cfg);
        (cfg, class)
    }

    #[test]
    fn pairing_of_anticanonical_on_nine_points_is_zero() {
        let (cfg, l) = homogeneous(3, 1, 9);
        assert_eq!(pair(&l, &l, &cfg), Ok(0));
    }

    #[test]
    fn pairing_formula_mixed_example() {
        let cfg = Configuration::free(2);
        let a = DivisorClass::aligned(1, &[1, 1], &cfg);
        let b = DivisorClass::aligned(2, &[2, 2], &cfg);
        assert_eq!(pair(&a, &b, &cfg), Ok(-2));
    }

    #[test]
    fn pairing_of_orthogonal_parts_vanishes() {
        let cfg = Configuration::free(4);
        let a = DivisorClass::aligned(7, &[0, 0, 0, 0], &cfg);
        let b = DivisorClass::aligned(0, &[3, 3, 3, 3], &cfg);
        assert_eq!(pair(&a, &b, &cfg), Ok(0));
    }

    #[test]
    fn pairing_rejects_foreign_labels() {
        let cfg = Configuration::free(1);
        let bad = DivisorClass::new(1, [(Label::from("zz"), 1)]);
        let l = DivisorClass::of_degree(1);
        assert_eq!(
            pair(&bad, &l, &cfg),
            Err(LatticeError::UnknownLabel(Label::from("zz")))
        );
    }

    #[test]
    fn canonical_class_shape() {
        let cfg = Configuration::free(10);
        let k = canonical_class::<i64>(&cfg);
        assert_eq!(*k.degree(), -3);
        assert!(cfg.labels().all(|l| k.mult(l) == -1));

        let empty = Configuration::free(0);
        let k0 = canonical_class::<i64>(&empty);
        assert_eq!(*k0.degree(), -3);
        assert_eq!(k0.support_len(), 0);
    }

    #[test]
    fn canonical_pairing_with_homogeneous_class() {
        for (d, m, k) in [(5, 2, 7), (174, 55, 10), (0, 0, 3)] {
            let (cfg, l) = homogeneous(d, m, k);
            let kls = canonical_class::<i64>(&cfg);
            assert_eq!(pair(&l, &kls, &cfg), Ok(-3 * d + k as i64 * m));
        }
    }

    #[test]
    fn virtual_dim_examples() {
        let (_, l) = homogeneous(174, 55, 10);
        assert_eq!(virtual_dim(&l), -1);
        let bare = DivisorClass::<i64>::of_degree(6);
        assert_eq!(virtual_dim(&bare), 27);
        let (_, l) = homogeneous(4, 2, 5);
        assert_eq!(virtual_dim(&l), -1);
    }

    #[test]
    fn virtual_dim_matches_pairing_identity() {
        let cfg = Configuration::with_clusters(3, 2);
        let l = DivisorClass::aligned(9, &[4, -2, 3, 5, 2, 1, 1], &cfg);
        let k = canonical_class::<i64>(&cfg);
        let self_int = pair(&l, &l, &cfg).unwrap();
        let with_k = pair(&l, &k, &cfg).unwrap();
        assert_eq!(virtual_dim(&l), (self_int - with_k) / 2);
    }

    #[test]
    fn expected_dim_examples() {
        let (_, l) = homogeneous(2, 2, 2);
        assert_eq!(expected_dim(&l), -1);
        let (_, l) = homogeneous(19, 6, 10);
        assert_eq!(expected_dim(&l), -1);
        let l = DivisorClass::<i64>::of_degree(6);
        assert_eq!(expected_dim(&l), 27);
    }

    #[test]
    fn expected_dim_is_permutation_invariant() {
        let cfg = Configuration::free(4);
        let a = DivisorClass::aligned(6, &[3, 1, 2, 2], &cfg);
        let b = DivisorClass::aligned(6, &[2, 2, 3, 1], &cfg);
        assert_eq!(expected_dim(&a), expected_dim(&b));
    }

    #[test]
    fn negative_class_enumeration_two_points() {
        let cfg = Configuration::free(2);
        let l = DivisorClass::aligned(0, &[0, 0], &cfg);
        let report = enumerate_negative_classes(&cfg, &l, 1, SelfIntTarget::MinusOne).unwrap();
        let classes: Vec<_> = report.classes.iter().map(|e| &e.class).collect();
        assert!(classes.contains(&&DivisorClass::exceptional(Label::from("p1"))));
        assert!(classes.contains(&&DivisorClass::exceptional(Label::from("p2"))));
        assert!(classes.contains(&&DivisorClass::aligned(1, &[1, 1], &cfg)));
        assert_eq!(classes.len(), 3);
        assert!(!report.complete);
        let report6 = enumerate_negative_classes(&cfg, &l, 6, SelfIntTarget::MinusOne).unwrap();
        assert!(report6.complete);
    }

    #[test]
    fn negative_class_enumeration_finds_singular_cubic() {
        let cfg = Configuration::free(7);
        let l = DivisorClass::aligned(0, &[0; 7], &cfg);
        let report = enumerate_negative_classes(&cfg, &l, 3, SelfIntTarget::MinusOne).unwrap();
        let wanted = DivisorClass::aligned(3, &[2, 1, 1, 1, 1, 1, 1], &cfg);
        assert!(report.classes.iter().any(|e| e.class == wanted));
    }

    #[test]
    fn minus_two_classes_on_a_cluster() {
        let cfg = Configuration::with_clusters(0, 1);
        let l = DivisorClass::aligned(0, &[0, 0], &cfg);
        let report = enumerate_negative_classes(&cfg, &l, 0, SelfIntTarget::MinusTwo).unwrap();
        // E_p - E_q in both orders; only the parent-to-child one is ever
        // effective, but enumeration is numerical.
        assert_eq!(report.classes.len(), 2);
        for entry in &report.classes {
            assert_eq!(entry.self_int, -2);
        }
    }

    #[test]
    fn enumerated_classes_satisfy_their_quadratic_constraints() {
        let cfg = Configuration::free(6);
        let l = DivisorClass::aligned(5, &[2, 2, 2, 1, 1, 1], &cfg);
        for target in [SelfIntTarget::MinusOne, SelfIntTarget::MinusTwo] {
            let report = enumerate_negative_classes(&cfg, &l, 4, target).unwrap();
            for entry in &report.classes {
                assert_eq!(
                    pair(&entry.class, &entry.class, &cfg).unwrap(),
                    target.self_int()
                );
                let k = canonical_class::<i64>(&cfg);
                assert_eq!(
                    pair(&entry.class, &k, &cfg).unwrap(),
                    match target {
                        SelfIntTarget::MinusOne => -1,
                        SelfIntTarget::MinusTwo => 0,
                    }
                );
                assert_eq!(entry.pairing_with_input, pair(&entry.class, &l, &cfg).unwrap());
            }
            // Sorted ascending by pairing with the input.
            for w in report.classes.windows(2) {
                assert!(w[0].pairing_with_input <= w[1].pairing_with_input);
            }
        }
    }

    #[test]
    fn nefness_examples() {
        let cfg = Configuration::free(7);
        // 3d - 10m >= 0 keeps the homogeneous-plus-double class nef.
        let l = DivisorClass::aligned(10, &[6, 3, 3, 3, 3, 3, 3], &cfg);
        assert_eq!(is_nef_bounded(&l, &cfg, 5).unwrap(), NefVerdict::NefUpToBound);

        let cfg2 = Configuration::free(2);
        let special = DivisorClass::aligned(2, &[2, 2], &cfg2);
        match is_nef_bounded(&special, &cfg2, 5).unwrap() {
            NefVerdict::NotNef { witness, pairing } => {
                assert_eq!(witness, DivisorClass::aligned(1, &[1, 1], &cfg2));
                assert_eq!(pairing, -2);
            }
            NefVerdict::NefUpToBound => panic!("expected a witness"),
        }

        let zero = DivisorClass::aligned(0, &[0, 0], &cfg2);
        assert_eq!(is_nef_bounded(&zero, &cfg2, 5).unwrap(), NefVerdict::NefUpToBound);
    }

    #[test]
    fn json_round_trip() {
        let cfg = Configuration::with_clusters(2, 1);
        let l = DivisorClass::aligned(24, &[11, 11, 4, 4], &cfg);
        let value = class_to_json(&l, &cfg).unwrap();
        let (cfg2, l2) = class_from_json::<i64>(&value).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(l, l2);
        // Canonical order is position order, not lexicographic.
        let labels: Vec<&str> = value["mults"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["label"].as_str().unwrap())
            .collect();
        assert_eq!(labels, ["p1", "p2", "p3", "p3.1"]);
    }

    #[test]
    fn configuration_validation() {
        let dup = Configuration::new(vec![
            PointNode {
                label: Label::from("a"),
                parent: None,
            },
            PointNode {
                label: Label::from("a"),
                parent: None,
            },
        ]);
        assert!(matches!(dup, Err(LatticeError::DuplicateLabel(_))));

        let orphan = Configuration::new(vec![PointNode {
            label: Label::from("b"),
            parent: Some(Label::from("missing")),
        }]);
        assert!(matches!(orphan, Err(LatticeError::BadParent { .. })));

        let forward = Configuration::new(vec![
            PointNode {
                label: Label::from("c"),
                parent: Some(Label::from("d")),
            },
            PointNode {
                label: Label::from("d"),
                parent: None,
            },
        ]);
        assert!(matches!(forward, Err(LatticeError::BadParent { .. })));
    }

    #[test]
    fn zero_mults_are_normalized_away() {
        let cfg = Configuration::free(3);
        let a = DivisorClass::aligned(5, &[2, 0, 1], &cfg);
        let b = DivisorClass::new(
            5,
            [(Label::from("p1"), 2), (Label::from("p3"), 1)],
        );
        assert_eq!(a, b);
        assert_eq!(a.support_len(), 2);
    }
}
