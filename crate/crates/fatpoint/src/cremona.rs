//! Cremona reduction of linear systems.
//!
//! The engine repeatedly applies quadratic transformations based at the three
//! points of largest multiplicity, interleaved with two sheaf-theoretically
//! safe normalizations: clamping negative multiplicities (recording the split
//! exceptional curve) and unloading proximity violations on infinitely near
//! pairs (recording the split of the stray (-2)-curve). Reduction terminates
//! in a standard form (top three multiplicities sum to at most the degree) or
//! in an emptiness certificate (degree driven negative).
//!
//! A transformation based at a point whose infinitely near point is not part
//! of the triple detaches that point: its transform is a general point of the
//! new plane, no longer infinitely near. Skipping this restructuring is
//! unsound; it silently changes dimensions when proximity later unloads.

use std::fmt::Write as _;

use thiserror::Error;

use crate::lattice::{
    enumerate_negative_classes, virtual_dim, Configuration, DivisorClass, Label, LatticeError,
    NegClassEntry, SelfIntTarget,
};
use crate::scalar::{from_i64, Scalar};

/// Default degree bound for negative-class enumeration: every (-1)-curve
/// whose pairing with an antibicanonical-bounded system can be negative has
/// degree at most 5.
pub const DEFAULT_NEG_CLASS_BOUND: i64 = 5;

/// Errors from reduction and classification.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CremonaError {
    #[error("transform triple must consist of three distinct labels")]
    InvalidTriple,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("splitting did not stabilize within {cap} steps")]
    BudgetExceeded { cap: u64 },
    #[error("Nagata predicates require at least 10 points, got {k}")]
    NagataOutOfScope { k: usize },
}

/// One step of a reduction log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step<T: Scalar> {
    /// Quadratic transformation based at `triple`. `touches_cluster` flags
    /// triples involving infinitely near structure (the transformation is
    /// then of degenerate type; the class arithmetic is identical).
    Quadratic {
        triple: [Label; 3],
        before: DivisorClass<T>,
        after: DivisorClass<T>,
        touches_cluster: bool,
    },
    /// `times` copies of `class` split off as a fixed part.
    Split {
        class: DivisorClass<T>,
        times: T,
        before: DivisorClass<T>,
        after: DivisorClass<T>,
    },
    /// `child` stopped being infinitely near to `parent` (its transform is a
    /// general point). The class is unchanged.
    Detach { parent: Label, child: Label },
    /// A virtual multiplicity-0 free point was appended so that a triple
    /// exists. The class is unchanged.
    Pad { label: Label },
}

impl<T: Scalar> Step<T> {
    /// Class state after this step, if the step changes it.
    fn state_after(&self) -> Option<&DivisorClass<T>> {
        match self {
            Step::Quadratic { after, .. } | Step::Split { after, .. } => Some(after),
            Step::Detach { .. } | Step::Pad { .. } => None,
        }
    }
}

/// Replayable record of a reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformLog<T: Scalar> {
    pub initial: DivisorClass<T>,
    pub steps: Vec<Step<T>>,
}

impl<T: Scalar> TransformLog<T> {
    pub fn new(initial: DivisorClass<T>) -> Self {
        TransformLog {
            initial,
            steps: Vec::new(),
        }
    }

    /// Final class state (the initial class when no step changed it).
    pub fn final_class(&self) -> &DivisorClass<T> {
        self.steps
            .iter()
            .rev()
            .find_map(Step::state_after)
            .unwrap_or(&self.initial)
    }

    /// Number of quadratic transformations performed.
    pub fn transform_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, Step::Quadratic { .. }))
            .count()
    }

    /// Checks that each class-changing step starts from the previous state.
    pub fn replays(&self) -> bool {
        let mut state = &self.initial;
        for step in &self.steps {
            match step {
                Step::Quadratic { before, after, .. } | Step::Split { before, after, .. } => {
                    if before != state {
                        return false;
                    }
                    state = after;
                }
                Step::Detach { .. } | Step::Pad { .. } => {}
            }
        }
        true
    }
}

/// Result of driving a class to standard form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReductionOutcome<T: Scalar> {
    /// Standard: the three largest multiplicities sum to at most the degree.
    Standard(DivisorClass<T>),
    /// The reduction drove the degree negative: the system is empty.
    Empty { final_state: DivisorClass<T> },
}

/// Reduction output: outcome, full log, and the evolved configuration
/// (detachments and padding applied).
#[derive(Clone, Debug)]
pub struct Reduction<T: Scalar> {
    pub outcome: ReductionOutcome<T>,
    pub log: TransformLog<T>,
    pub final_cfg: Configuration,
    pub padded: Vec<Label>,
}

impl<T: Scalar> Reduction<T> {
    pub fn is_empty(&self) -> bool {
        matches!(self.outcome, ReductionOutcome::Empty { .. })
    }

    pub fn standard_form(&self) -> Option<&DivisorClass<T>> {
        match &self.outcome {
            ReductionOutcome::Standard(c) => Some(c),
            ReductionOutcome::Empty { .. } => None,
        }
    }
}

/// Applies the quadratic transformation based at `triple`:
/// `d' = 2d - (m1+m2+m3)`, `m_i' = d - m_j - m_k`, all other multiplicities
/// unchanged. An involution; preserves the pairing, hence also the virtual
/// dimension. Admissibility of infinitely near base points is not checked
/// here (reduction handles the restructuring).
pub fn quadratic_transform<T: Scalar>(
    l: &DivisorClass<T>,
    triple: &[Label; 3],
    cfg: &Configuration,
) -> Result<DivisorClass<T>, CremonaError> {
    let [a, b, c] = triple;
    if a == b || a == c || b == c {
        return Err(CremonaError::InvalidTriple);
    }
    for label in triple {
        if !cfg.contains(label) {
            return Err(CremonaError::Lattice(LatticeError::UnknownLabel(
                label.clone(),
            )));
        }
    }
    let d = l.degree().clone();
    let (ma, mb, mc) = (l.mult(a), l.mult(b), l.mult(c));
    let mut out = l.clone();
    out.set_degree(d.clone() + d.clone() - ma.clone() - mb.clone() - mc.clone());
    out.set_mult(a.clone(), d.clone() - mb.clone() - mc.clone());
    out.set_mult(b.clone(), d.clone() - ma.clone() - mc.clone());
    out.set_mult(c.clone(), d - ma - mb);
    Ok(out)
}

/// Strict-transform class `E_parent - E_child` of the exceptional curve over
/// `parent`, a (-2)-class once `child` is blown up on it.
fn stray_class<T: Scalar>(parent: &Label, child: &Label) -> DivisorClass<T> {
    DivisorClass::new(
        T::zero(),
        [
            (parent.clone(), from_i64::<T>(-1)),
            (child.clone(), T::one()),
        ],
    )
}

/// Clamps negative multiplicities and unloads proximity violations until the
/// class is stable; every change is a recorded split of a fixed curve.
fn normalize<T: Scalar>(
    cur: &mut DivisorClass<T>,
    cfg: &Configuration,
    steps: &mut Vec<Step<T>>,
) {
    loop {
        let mut changed = false;
        for label in cfg.labels() {
            let m = cur.mult(label);
            if m < T::zero() {
                let times = -m;
                let class = DivisorClass::exceptional(label.clone());
                let before = cur.clone();
                cur.set_mult(label.clone(), T::zero());
                steps.push(Step::Split {
                    class,
                    times,
                    before,
                    after: cur.clone(),
                });
                changed = true;
            }
        }
        for node in cfg.points() {
            let Some(parent) = &node.parent else { continue };
            let child = &node.label;
            let mp = cur.mult(parent);
            let mc = cur.mult(child);
            if mc > mp {
                // n single unloads at once; each is valid while the pairing
                // m_parent - m_child stays negative.
                let two = from_i64::<T>(2);
                let gap = mc.clone() - mp.clone();
                let times = (gap + T::one()).div_floor(&two);
                let before = cur.clone();
                cur.set_mult(parent.clone(), mp + times.clone());
                cur.set_mult(child.clone(), mc - times.clone());
                steps.push(Step::Split {
                    class: stray_class(parent, child),
                    times,
                    before,
                    after: cur.clone(),
                });
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// The three labels of largest multiplicity, ties broken by canonical
/// position. Requires at least three points.
fn largest_triple<T: Scalar>(cur: &DivisorClass<T>, cfg: &Configuration) -> [Label; 3] {
    let mut order: Vec<(usize, &Label)> = cfg.labels().enumerate().collect();
    order.sort_by(|(ia, la), (ib, lb)| {
        cur.mult(lb)
            .cmp(&cur.mult(la))
            .then_with(|| ia.cmp(ib))
    });
    [
        order[0].1.clone(),
        order[1].1.clone(),
        order[2].1.clone(),
    ]
}

fn fresh_aux_label(cfg: &Configuration, hint: usize) -> Label {
    let mut i = hint;
    loop {
        let label = Label(format!("aux{i}"));
        if !cfg.contains(&label) {
            return label;
        }
        i += 1;
    }
}

/// Drives `l` to a standard form (or an emptiness certificate), recording
/// every transformation, split, detachment, and padding step.
pub fn reduce_to_standard<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
) -> Result<Reduction<T>, CremonaError> {
    for label in l.support() {
        if !cfg.contains(label) {
            return Err(CremonaError::Lattice(LatticeError::UnknownLabel(
                label.clone(),
            )));
        }
    }
    let mut cfg = cfg.clone();
    let mut cur = l.clone();
    let mut log = TransformLog::new(l.clone());
    let mut padded = Vec::new();

    for i in 1.. {
        if cfg.len() >= 3 {
            break;
        }
        let label = fresh_aux_label(&cfg, i);
        cfg.push_free(label.clone()).expect("fresh label");
        log.steps.push(Step::Pad {
            label: label.clone(),
        });
        padded.push(label);
    }

    let degree_hint = l.degree().to_u64().unwrap_or(u64::MAX / 32).max(1);
    let cap = 10 * (cfg.len() as u64 + degree_hint) + 30;
    let mut spent = 0u64;

    let outcome = loop {
        spent += 1;
        if spent > cap {
            return Err(CremonaError::BudgetExceeded { cap });
        }
        normalize(&mut cur, &cfg, &mut log.steps);
        if *cur.degree() < T::zero() {
            break ReductionOutcome::Empty {
                final_state: cur.clone(),
            };
        }
        let triple = largest_triple(&cur, &cfg);
        let top_sum = cur.mult(&triple[0]) + cur.mult(&triple[1]) + cur.mult(&triple[2]);
        if top_sum <= *cur.degree() {
            break ReductionOutcome::Standard(cur.clone());
        }
        let before = cur.clone();
        let after = quadratic_transform(&cur, &triple, &cfg)?;
        let touches_cluster = triple.iter().any(|label| {
            cfg.parent_of(label).is_some() || cfg.child_of(label).is_some()
        });
        log.steps.push(Step::Quadratic {
            triple: triple.clone(),
            before,
            after: after.clone(),
            touches_cluster,
        });
        cur = after;
        // A point of the triple whose infinitely near point was left out has
        // been blown up; the near point's transform is a general point.
        for label in &triple {
            if let Some(child) = cfg.child_of(label).cloned() {
                if !triple.contains(&child) {
                    cfg.detach(&child).expect("child exists");
                    log.steps.push(Step::Detach {
                        parent: label.clone(),
                        child,
                    });
                }
            }
        }
    };

    Ok(Reduction {
        outcome,
        log,
        final_cfg: cfg,
        padded,
    })
}

/// Record of one fixed curve split off a class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitRecord<T: Scalar> {
    pub class: DivisorClass<T>,
    pub times: T,
}

/// Subtracts every enumerated (-1)-class that pairs negatively, `n` copies
/// for pairing `-n`, until the residual pairs nonnegatively with the whole
/// enumerated set (or its degree goes negative, which certifies emptiness of
/// the input; the enumeration postcondition then no longer applies).
pub fn split_fixed_neg_curves<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
    degree_bound: i64,
) -> Result<(DivisorClass<T>, Vec<SplitRecord<T>>), CremonaError> {
    let mut residual = l.clone();
    let mut splits: Vec<SplitRecord<T>> = Vec::new();
    let degree_hint = l.degree().to_u64().unwrap_or(u64::MAX / 32).max(1);
    let cap = 10 * (cfg.len() as u64 + degree_hint) + 30;
    let mut spent = 0u64;
    loop {
        if *residual.degree() < T::zero() {
            break;
        }
        let report =
            enumerate_negative_classes(cfg, &residual, degree_bound, SelfIntTarget::MinusOne)?;
        let Some(entry) = report
            .classes
            .into_iter()
            .find(|e| e.pairing_with_input < T::zero())
        else {
            break;
        };
        spent += 1;
        if spent > cap {
            return Err(CremonaError::BudgetExceeded { cap });
        }
        let times = -entry.pairing_with_input;
        residual = residual.add_scaled(&entry.class, -times.clone());
        match splits.iter_mut().find(|s| s.class == entry.class) {
            Some(existing) => existing.times += times,
            None => splits.push(SplitRecord {
                class: entry.class,
                times,
            }),
        }
    }
    Ok((residual, splits))
}

/// Classification of a linear system by reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassificationKind {
    /// Reduction certifies emptiness.
    Empty,
    /// Already standard (no transformation needed), not (almost) excellent.
    Standard,
    /// Standard only after at least one transformation, not (almost)
    /// excellent.
    CremonaReducible,
    /// Some (-1)-class pairs at most -2 with the input: a multiple
    /// (-1)-curve sits in the base locus.
    MinusOneSpecial,
    /// Standard form with `3d - sum(m) > 0`.
    Excellent,
    /// Standard form with `3d - sum(m) = 0`.
    AlmostExcellent,
}

/// Classification result with its witnesses.
#[derive(Clone, Debug)]
pub struct Classification<T: Scalar> {
    pub kind: ClassificationKind,
    /// The standard representative (absent when empty).
    pub standard_form: Option<DivisorClass<T>>,
    /// (-1)-classes pairing at most -2 with the input.
    pub multiple_neg_curves: Vec<NegClassEntry<T>>,
    pub log: TransformLog<T>,
}

/// Classifies by reducing to standard form; excellence is tested on the
/// standard representative via `3d - sum(m)`. Precedence: empty, then
/// multiple-(-1)-curve speciality (witnessed against the default enumeration
/// bound), then excellence, then standard/reducible.
pub fn classify<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
) -> Result<Classification<T>, CremonaError> {
    let reduction = reduce_to_standard(l, cfg)?;
    let report =
        enumerate_negative_classes(cfg, l, DEFAULT_NEG_CLASS_BOUND, SelfIntTarget::MinusOne)?;
    let multiple_neg_curves: Vec<NegClassEntry<T>> = report
        .classes
        .into_iter()
        .filter(|e| e.pairing_with_input <= from_i64::<T>(-2))
        .collect();

    let (kind, standard_form) = match &reduction.outcome {
        ReductionOutcome::Empty { .. } => (ClassificationKind::Empty, None),
        ReductionOutcome::Standard(form) => {
            let excess = from_i64::<T>(3) * form.degree().clone() - form.mult_sum();
            let kind = if !multiple_neg_curves.is_empty() {
                ClassificationKind::MinusOneSpecial
            } else if excess > T::zero() {
                ClassificationKind::Excellent
            } else if excess == T::zero() {
                ClassificationKind::AlmostExcellent
            } else if reduction.log.transform_count() == 0 {
                ClassificationKind::Standard
            } else {
                ClassificationKind::CremonaReducible
            };
            (kind, Some(form.clone()))
        }
    };
    Ok(Classification {
        kind,
        standard_form,
        multiple_neg_curves,
        log: reduction.log,
    })
}

/// Whether the computed dimension is a theorem or conjectural.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimStatus {
    /// At most 9 points carry the system (before or after reduction), where
    /// the dimension count is a theorem for general points.
    Proven,
    /// Rests on the standard-form dimension conjecture for 10 or more
    /// points.
    Conjectural,
}

/// Dimension result with its reduction log.
#[derive(Clone, Debug)]
pub struct DimResult<T: Scalar> {
    pub dim: T,
    pub status: DimStatus,
    pub log: TransformLog<T>,
}

/// Projective dimension of the system at general points: reduce to standard
/// form, then `max(-1, virtual_dim)`; `-1` when reduction certifies
/// emptiness.
pub fn shgh_dim<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
) -> Result<DimResult<T>, CremonaError> {
    let reduction = reduce_to_standard(l, cfg)?;
    let minus_one = from_i64::<T>(-1);
    let (dim, final_support) = match &reduction.outcome {
        ReductionOutcome::Empty { final_state } => (minus_one, final_state.support_len()),
        ReductionOutcome::Standard(form) => {
            let v = virtual_dim(form);
            (if v < minus_one { minus_one } else { v }, form.support_len())
        }
    };
    let effective_points = l.support_len().min(final_support);
    let status = if effective_points <= 9 {
        DimStatus::Proven
    } else {
        DimStatus::Conjectural
    };
    Ok(DimResult {
        dim,
        status,
        log: reduction.log,
    })
}

/// Verdict of the degree/multiplicity emptiness predicate for 10 or more
/// points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NagataVerdict {
    /// `(sum m)^2 >= d^2 k` with `k` a perfect square: emptiness is a
    /// theorem.
    EmptyProven,
    /// `(sum m)^2 >= d^2 k`, `k` not a perfect square: emptiness is
    /// conjectural.
    EmptyConjectural,
    /// The predicate does not apply.
    NoPrediction,
}

/// Tests `(sum m)^2 >= d^2 k` exactly in integers (the boundary counts as
/// empty). Requires `k >= 10`; multiplicity sums below zero give no
/// prediction.
pub fn nagata_empty<T: Scalar>(l: &DivisorClass<T>, k: usize) -> Result<NagataVerdict, CremonaError> {
    if k < 10 {
        return Err(CremonaError::NagataOutOfScope { k });
    }
    let sum = l.mult_sum();
    if sum < T::zero() {
        return Ok(NagataVerdict::NoPrediction);
    }
    let d = l.degree().clone();
    let lhs = sum.clone() * sum;
    let rhs = d.clone() * d * from_i64::<T>(k as i64);
    if lhs >= rhs {
        let root = integer_sqrt(k);
        if root * root == k {
            Ok(NagataVerdict::EmptyProven)
        } else {
            Ok(NagataVerdict::EmptyConjectural)
        }
    } else {
        Ok(NagataVerdict::NoPrediction)
    }
}

fn integer_sqrt(n: usize) -> usize {
    let mut x = (n as f64).sqrt() as usize;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

// ---------------------------------------------------------------------------
// Canonical table renderer
// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq)]
enum Cell {
    Simple { value: String, marked: bool },
    Compound {
        parent: String,
        child: String,
        parent_marked: bool,
        child_marked: bool,
    },
}

impl Cell {
    fn text(&self) -> String {
        fn deco(v: &str, marked: bool) -> String {
            if marked {
                format!("_{v}_")
            } else {
                v.to_owned()
            }
        }
        match self {
            Cell::Simple { value, marked } => deco(value, *marked),
            Cell::Compound {
                parent,
                child,
                parent_marked,
                child_marked,
            } => format!(
                "[{},{}]",
                deco(parent, *parent_marked),
                deco(child, *child_marked)
            ),
        }
    }

    fn is_marked(&self) -> bool {
        match self {
            Cell::Simple { marked, .. } => *marked,
            Cell::Compound {
                parent_marked,
                child_marked,
                ..
            } => *parent_marked || *child_marked,
        }
    }
}

/// Renders one class as a table row over the initial configuration:
/// `degree; entries` in canonical position order, infinitely near pairs as
/// `[m_parent, m_child]` with zero components dropped, trailing zero entries
/// dropped (unless marked), equal unmarked neighbours compressed as `v^k`,
/// and the entries used by the next transformation underlined as `_v_`.
fn render_row<T: Scalar>(
    class: &DivisorClass<T>,
    cfg: &Configuration,
    marks: &[Label],
) -> String {
    let marked = |label: &Label| marks.contains(label);
    let mut cells: Vec<Cell> = Vec::new();
    for node in cfg.points() {
        if node.parent.is_some() {
            continue; // rendered inside the parent's cell
        }
        let label = &node.label;
        let m = class.mult(label);
        match cfg.child_of(label) {
            None => cells.push(Cell::Simple {
                value: m.to_string(),
                marked: marked(label),
            }),
            Some(child) => {
                let mc = class.mult(child);
                let (pz, cz) = (m.is_zero(), mc.is_zero());
                let (pm, cm) = (marked(label), marked(child));
                if pz && cz && !pm && !cm {
                    // dropped cluster; keep a placeholder for trailing logic
                    cells.push(Cell::Simple {
                        value: "0".into(),
                        marked: false,
                    });
                } else if pz && !pm {
                    cells.push(Cell::Simple {
                        value: mc.to_string(),
                        marked: cm,
                    });
                } else if cz && !cm {
                    cells.push(Cell::Simple {
                        value: m.to_string(),
                        marked: pm,
                    });
                } else {
                    cells.push(Cell::Compound {
                        parent: m.to_string(),
                        child: mc.to_string(),
                        parent_marked: pm,
                        child_marked: cm,
                    });
                }
            }
        }
    }
    while let Some(last) = cells.last() {
        let droppable = matches!(last, Cell::Simple { value, marked: false } if value == "0");
        if droppable {
            cells.pop();
        } else {
            break;
        }
    }
    let mut out = class.degree().to_string();
    let mut first = true;
    let mut i = 0;
    while i < cells.len() {
        let mut run = 1;
        while i + run < cells.len()
            && cells[i + run] == cells[i]
            && !cells[i].is_marked()
        {
            run += 1;
        }
        let sep = if first { "; " } else { ", " };
        first = false;
        if run > 1 {
            let _ = write!(out, "{sep}{}^{run}", cells[i].text());
        } else {
            let _ = write!(out, "{sep}{}", cells[i].text());
        }
        i += run;
    }
    out
}

/// Renders a reduction log as the canonical multi-row table: the initial
/// class, then the state after every class-changing step, one row each; rows
/// followed by a quadratic step underline the three entries it uses.
pub fn render_reduction_table<T: Scalar>(log: &TransformLog<T>, cfg: &Configuration) -> String {
    // Padded points may appear mid-log; render over the richest configuration
    // (initial clustering is kept for bracketing even if later detached).
    let mut render_cfg = cfg.clone();
    for step in &log.steps {
        if let Step::Pad { label } = step {
            let _ = render_cfg.push_free(label.clone());
        }
    }
    let mut states: Vec<&DivisorClass<T>> = vec![&log.initial];
    let mut marks_per_state: Vec<Vec<Label>> = vec![Vec::new()];
    for step in &log.steps {
        if let Step::Quadratic { triple, .. } = step {
            *marks_per_state.last_mut().expect("nonempty") = triple.to_vec();
        }
        if let Some(after) = step.state_after() {
            states.push(after);
            marks_per_state.push(Vec::new());
        }
    }
    states
        .iter()
        .zip(marks_per_state.iter())
        .map(|(state, marks)| render_row(state, &render_cfg, marks))
        .collect::<Vec<_>>()
        .join("\n")
}

/// JSON form of a reduction log: the initial class and one object per step.
pub fn log_to_json<T: Scalar>(
    log: &TransformLog<T>,
    cfg: &Configuration,
) -> Result<serde_json::Value, CremonaError> {
    use crate::lattice::class_to_json;
    let mut render_cfg = cfg.clone();
    for step in &log.steps {
        if let Step::Pad { label } = step {
            let _ = render_cfg.push_free(label.clone());
        }
    }
    let steps: Vec<serde_json::Value> = log
        .steps
        .iter()
        .map(|step| {
            Ok(match step {
                Step::Quadratic {
                    triple,
                    before,
                    after,
                    touches_cluster,
                } => serde_json::json!({
                    "kind": "quadratic",
                    "triple": [triple[0].0, triple[1].0, triple[2].0],
                    "before": class_to_json(before, &render_cfg)?,
                    "after": class_to_json(after, &render_cfg)?,
                    "touches_cluster": touches_cluster,
                }),
                Step::Split {
                    class,
                    times,
                    before,
                    after,
                } => serde_json::json!({
                    "kind": "split",
                    "class": class_to_json(class, &render_cfg)?,
                    "times": times.to_i64(),
                    "before": class_to_json(before, &render_cfg)?,
                    "after": class_to_json(after, &render_cfg)?,
                }),
                Step::Detach { parent, child } => serde_json::json!({
                    "kind": "detach",
                    "parent": parent.0,
                    "child": child.0,
                }),
                Step::Pad { label } => serde_json::json!({
                    "kind": "pad",
                    "label": label.0,
                }),
            })
        })
        .collect::<Result<_, CremonaError>>()?;
    Ok(serde_json::json!({
        "initial": crate::lattice::class_to_json(&log.initial, &render_cfg)?,
        "steps": steps,
        "table": render_reduction_table(log, cfg),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::expected_dim;

    fn free_class(d: i64, mults: &[i64]) -> (Configuration, DivisorClass<i64>) {
        let cfg = Configuration::free(mults.len());
        let class = DivisorClass::aligned(d, mults, &cfg);
        (cfg, class)
    }

    fn cluster_class(
        d: i64,
        free: &[i64],
        chains: &[(i64, i64)],
    ) -> (Configuration, DivisorClass<i64>) {
        let cfg = Configuration::with_clusters(free.len(), chains.len());
        let mut mults: Vec<i64> = free.to_vec();
        for (a, b) in chains {
            mults.push(*a);
            mults.push(*b);
        }
        let class = DivisorClass::aligned(d, &mults, &cfg);
        (cfg, class)
    }

    fn triple(cfg: &Configuration, a: usize, b: usize, c: usize) -> [Label; 3] {
        let labels: Vec<Label> = cfg.labels().cloned().collect();
        [labels[a].clone(), labels[b].clone(), labels[c].clone()]
    }

    #[test]
    fn quadratic_transform_basic() {
        let (cfg, l) = free_class(5, &[3, 2, 2]);
        let t = triple(&cfg, 0, 1, 2);
        let out = quadratic_transform(&l, &t, &cfg).unwrap();
        assert_eq!(out, DivisorClass::aligned(3, &[1, 0, 0], &cfg));
        assert_eq!(virtual_dim(&l), virtual_dim(&out));
        assert_eq!(virtual_dim(&l), 8);
    }

    #[test]
    fn quadratic_transform_large_instance() {
        let (cfg, l) = free_class(54, &[36, 15, 15, 15, 15, 15, 15]);
        let out = quadratic_transform(&l, &triple(&cfg, 0, 1, 2), &cfg).unwrap();
        assert_eq!(
            out,
            DivisorClass::aligned(42, &[24, 3, 3, 15, 15, 15, 15], &cfg)
        );
    }

    #[test]
    fn quadratic_transform_fixed_degree_and_involution() {
        let (cfg, l) = free_class(9, &[4, 3, 2, 1]);
        let t = triple(&cfg, 0, 1, 2);
        let out = quadratic_transform(&l, &t, &cfg).unwrap();
        assert_eq!(*out.degree(), 9);
        let back = quadratic_transform(&out, &t, &cfg).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn quadratic_transform_rejects_duplicates() {
        let (cfg, l) = free_class(3, &[1, 1, 1]);
        let t = triple(&cfg, 0, 0, 1);
        assert_eq!(
            quadratic_transform(&l, &t, &cfg),
            Err(CremonaError::InvalidTriple)
        );
    }

    #[test]
    fn reduction_of_homogeneous_seven_point_instance() {
        let (cfg, l) = free_class(54, &[36, 15, 15, 15, 15, 15, 15]);
        let red = reduce_to_standard(&l, &cfg).unwrap();
        let form = red.standard_form().expect("standard");
        assert_eq!(
            form,
            &DivisorClass::aligned(18, &[0, 3, 3, 3, 3, 3, 3], &cfg)
        );
        assert_eq!(red.log.transform_count(), 3);
        assert!(red.log.replays());
        assert_eq!(virtual_dim(&l), virtual_dim(form));
    }

    #[test]
    fn reduction_with_clusters_matches_closed_form() {
        let (cfg, l) = cluster_class(24, &[11, 11, 11, 11], &[(4, 4), (4, 4)]);
        let red = reduce_to_standard(&l, &cfg).unwrap();
        let form = red.standard_form().expect("standard");
        assert_eq!(*form.degree(), 7);
        assert_eq!(
            form.mult_vector(&cfg),
            vec![2, 2, 2, 3, 0, 0, 0, 0]
        );
        assert_eq!(red.log.transform_count(), 3);
    }

    #[test]
    fn reduction_leaves_standard_classes_alone() {
        let (cfg, l) = free_class(3, &[1; 9]);
        let red = reduce_to_standard(&l, &cfg).unwrap();
        assert_eq!(red.standard_form(), Some(&l));
        assert_eq!(red.log.steps.len(), 0);
    }

    #[test]
    fn reduction_table_strings() {
        let (cfg, l) = free_class(54, &[36, 15, 15, 15, 15, 15, 15]);
        let red = reduce_to_standard(&l, &cfg).unwrap();
        let table = render_reduction_table(&red.log, &cfg);
        let expected = [
            "54; _36_, _15_, _15_, 15^4",
            "42; _24_, 3^2, _15_, _15_, 15^2",
            "30; _12_, 3^4, _15_, _15_",
            "18; 0, 3^6",
        ]
        .join("\n");
        assert_eq!(table, expected);
    }

    #[test]
    fn reduction_table_with_clusters() {
        let (cfg, l) = cluster_class(24, &[11, 11, 11, 11], &[(4, 4), (4, 4)]);
        let red = reduce_to_standard(&l, &cfg).unwrap();
        let table = render_reduction_table(&red.log, &cfg);
        let expected = [
            "24; _11_, _11_, _11_, 11, [4,4]^2",
            "15; 2^3, _11_, [_4_,_4_], [4,4]",
            "11; 2^3, _7_, 0, [_4_,_4_]",
            "7; 2^3, 3",
        ]
        .join("\n");
        assert_eq!(table, expected);
    }

    #[test]
    fn splitting_examples() {
        let (cfg, l) = free_class(2, &[2, 2]);
        let (residual, splits) = split_fixed_neg_curves(&l, &cfg, 5).unwrap();
        assert!(residual.is_zero());
        assert_eq!(splits.len(), 1);
        assert_eq!(splits[0].class, DivisorClass::aligned(1, &[1, 1], &cfg));
        assert_eq!(splits[0].times, 2);

        let (cfg, l) = free_class(4, &[2, 2, 2, 2, 2]);
        let (residual, splits) = split_fixed_neg_curves(&l, &cfg, 5).unwrap();
        assert!(residual.is_zero());
        assert_eq!(splits.len(), 1);
        assert_eq!(
            splits[0].class,
            DivisorClass::aligned(2, &[1, 1, 1, 1, 1], &cfg)
        );
        assert_eq!(splits[0].times, 2);

        let (cfg, nef) = free_class(10, &[3, 3, 3, 3, 3, 3, 3]);
        let (residual, splits) = split_fixed_neg_curves(&nef, &cfg, 5).unwrap();
        assert_eq!(residual, nef);
        assert!(splits.is_empty());
    }

    #[test]
    fn classification_examples() {
        // Excellent family: 4a - 3b degree over six points of multiplicity
        // a - b, here (a, b) = (9, 6).
        let (cfg, l) = free_class(18, &[3, 3, 3, 3, 3, 3]);
        assert_eq!(classify(&l, &cfg).unwrap().kind, ClassificationKind::Excellent);

        let (cfg, l) = free_class(2, &[2, 2]);
        let c = classify(&l, &cfg).unwrap();
        assert_eq!(c.kind, ClassificationKind::MinusOneSpecial);
        assert!(!c.multiple_neg_curves.is_empty());

        let (cfg, l) = free_class(6, &[2; 9]);
        assert_eq!(
            classify(&l, &cfg).unwrap().kind,
            ClassificationKind::AlmostExcellent
        );

        let (cfg, l) = free_class(3, &[1; 10]);
        assert_eq!(classify(&l, &cfg).unwrap().kind, ClassificationKind::Standard);

        let (cfg, l) = free_class(1, &[2]);
        assert_eq!(classify(&l, &cfg).unwrap().kind, ClassificationKind::Empty);
    }

    #[test]
    fn shgh_dim_examples() {
        let cases: Vec<(i64, Vec<i64>, i64, DimStatus)> = vec![
            (2, vec![2, 2], 0, DimStatus::Proven),
            (6, vec![2; 9], 0, DimStatus::Proven),
            (174, vec![55; 10], -1, DimStatus::Conjectural),
            (3, vec![1; 9], 0, DimStatus::Proven),
            (5, vec![3, 3, 2, 1, 1, 1, 1, 1, 1], -1, DimStatus::Proven),
            (1, vec![2], -1, DimStatus::Proven),
            (19, vec![6; 10], -1, DimStatus::Conjectural),
        ];
        for (d, mults, want, status) in cases {
            let (cfg, l) = free_class(d, &mults);
            let res = shgh_dim(&l, &cfg).unwrap();
            assert_eq!(res.dim, want, "dim of {d}; {mults:?}");
            assert_eq!(res.status, status, "status of {d}; {mults:?}");
            assert!(res.dim >= expected_dim(&l));
        }
    }

    type ClusterCase = (i64, Vec<i64>, Vec<(i64, i64)>, i64, DimStatus);

    #[test]
    fn shgh_dim_cluster_examples() {
        let cases: Vec<ClusterCase> = vec![
            (12, vec![1; 6], vec![(6, 6), (6, 6)], 0, DimStatus::Proven),
            (15, vec![2; 6], vec![(7, 7), (7, 7)], 5, DimStatus::Proven),
            // Reduces to a standard form still carried by ten points.
            (18, vec![3; 6], vec![(8, 8), (8, 8)], 9, DimStatus::Conjectural),
            (24, vec![11; 4], vec![(4, 4), (4, 4)], 20, DimStatus::Proven),
            (
                42,
                vec![30, 11, 11, 11, 11, 11, 11],
                vec![(6, 6), (6, 6)],
                0,
                DimStatus::Proven,
            ),
        ];
        for (d, free, chains, want, status) in cases {
            let (cfg, l) = cluster_class(d, &free, &chains);
            let res = shgh_dim(&l, &cfg).unwrap();
            assert_eq!(res.dim, want, "dim of {d}; {free:?} {chains:?}");
            assert_eq!(res.status, status, "status of {d}; {free:?} {chains:?}");
        }
    }

    #[test]
    fn unloading_matches_explicit_chain_splitting() {
        // Multiplicity below the infinitely near point's forces unloading:
        // the chain class E_p - E_c pairs negatively and splits off until
        // the written multiplicities satisfy proximity, here [0,6] -> [3,3].
        let (cfg, l) = cluster_class(6, &[1, 1, 1, 1, 1, 1], &[(0, 6)]);
        let red = reduce_to_standard(&l, &cfg).unwrap();
        assert!(red.log.replays());
        let res = shgh_dim(&l, &cfg).unwrap();
        let (cfg2, l2) = cluster_class(6, &[1, 1, 1, 1, 1, 1], &[(3, 3)]);
        let res2 = shgh_dim(&l2, &cfg2).unwrap();
        assert_eq!(res.dim, res2.dim);
        assert_eq!(res.dim, 9);
    }

    #[test]
    fn nagata_examples() {
        let (_, l) = free_class(9, &[3; 10]);
        assert_eq!(nagata_empty(&l, 10), Ok(NagataVerdict::EmptyConjectural));

        let (_, l) = free_class(8, &[2; 16]);
        assert_eq!(nagata_empty(&l, 16), Ok(NagataVerdict::EmptyProven));

        let (_, l) = free_class(100, &[1; 10]);
        assert_eq!(nagata_empty(&l, 10), Ok(NagataVerdict::NoPrediction));

        let (_, l) = free_class(3, &[1; 9]);
        assert_eq!(
            nagata_empty(&l, 9),
            Err(CremonaError::NagataOutOfScope { k: 9 })
        );
    }

    #[test]
    fn empty_certificates_stay_empty_under_padding() {
        let cfg = Configuration::free(1);
        let l = DivisorClass::aligned(1, &[2], &cfg);
        let red = reduce_to_standard(&l, &cfg).unwrap();
        assert!(red.is_empty());
        assert!(!red.padded.is_empty());
    }
}
