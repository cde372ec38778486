//! Finite action sets and points of the probability simplex.
//!
//! Actions are identified with the unit vectors of the simplex, so realized
//! outcomes, forecasts, and bin averages all live in the same space.

use crate::error::{Error, Result};
use crate::num::{Accumulator, Scalar};
use std::fmt;
use std::sync::Arc;

/// Validation tolerance for simplex membership (float backend).
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug)]
struct ActionSetInner {
    labels: Vec<String>,
}

/// A finite, ordered set of action labels.
#[derive(Clone, Debug)]
pub struct ActionSet {
    inner: Arc<ActionSetInner>,
}

impl ActionSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidTranscript(format!("duplicate action label {l:?}")));
            }
        }
        Ok(ActionSet { inner: Arc::new(ActionSetInner { labels }) })
    }

    /// The binary action set `{"0", "1"}` used throughout the binary examples.
    pub fn binary() -> Self {
        ActionSet::new(["0", "1"]).unwrap()
    }

    /// Action set `{"0", .., "{n-1}"}`.
    pub fn numbered(n: usize) -> Result<Self> {
        ActionSet::new((0..n).map(|i| i.to_string()))
    }

    pub fn size(&self) -> usize {
        self.inner.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.inner.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.inner.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.inner
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownAction(label.to_string()))
    }

    pub fn same_as(&self, other: &ActionSet) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner.labels == other.inner.labels
    }
}

impl PartialEq for ActionSet {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}
impl Eq for ActionSet {}

/// A probability distribution over a finite action set.
#[derive(Clone, PartialEq)]
pub struct Dist<T: Scalar> {
    actions: ActionSet,
    weights: Vec<T>,
}

impl<T: Scalar> fmt::Debug for Dist<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dist[")?;
        for (i, w) in self.weights.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, "]")
    }
}

/// Construct a validated simplex point.
pub fn dist_new<T: Scalar>(actions: &ActionSet, weights: Vec<T>) -> Result<Dist<T>> {
    if weights.len() != actions.size() {
        return Err(Error::LengthMismatch(weights.len(), actions.size()));
    }
    for (i, w) in weights.iter().enumerate() {
        let neg_tol = if T::EXACT { T::zero() } else { -T::from_ratio(1, 1_000_000_000_000) };
        if *w < neg_tol {
            return Err(Error::NegativeWeight { index: i, value: w.to_display_string() });
        }
    }
    let mass = crate::num::sum_iter(weights.iter());
    let gap = (mass.clone() - T::one()).abs();
    let ok = if T::EXACT { gap.is_zero() } else { gap.to_f64() <= MASS_TOLERANCE };
    if !ok {
        return Err(Error::MassNotOne { mass: mass.to_display_string(), tolerance: MASS_TOLERANCE });
    }
    Ok(Dist { actions: actions.clone(), weights })
}

impl<T: Scalar> Dist<T> {
    pub fn new(actions: &ActionSet, weights: Vec<T>) -> Result<Self> {
        dist_new(actions, weights)
    }

    /// Unit vector for one action.
    pub fn pure(actions: &ActionSet, index: usize) -> Self {
        let mut w = vec![T::zero(); actions.size()];
        w[index] = T::one();
        Dist { actions: actions.clone(), weights: w }
    }

    /// Uniform distribution (the barycenter of the simplex).
    pub fn uniform(actions: &ActionSet) -> Self {
        let n = actions.size() as i64;
        Dist { actions: actions.clone(), weights: vec![T::from_ratio(1, n); actions.size()] }
    }

    /// Binary distribution from the probability of the action at index 1.
    pub fn binary(p: T) -> Self {
        let actions = ActionSet::binary();
        Dist { actions, weights: vec![T::one() - p.clone(), p] }
    }

    pub fn action_set(&self) -> &ActionSet {
        &self.actions
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> &T {
        &self.weights[index]
    }

    /// Scalar coordinate for binary sets: the probability of the action at
    /// index 1 (the action labeled "1" in the standard binary set).
    pub fn scalar(&self) -> T {
        debug_assert_eq!(self.actions.size(), 2);
        self.weights[1].clone()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Dot product with a loss-style vector, skipping zero weights so that
    /// an unbounded loss outside the support does not poison the sum.
    pub fn dot(&self, v: &[T]) -> T {
        debug_assert_eq!(v.len(), self.weights.len());
        let mut acc = T::Acc::new();
        for (w, x) in self.weights.iter().zip(v) {
            if !w.is_zero() {
                acc.add(&(w.clone() * x.clone()));
            }
        }
        acc.total()
    }

    pub fn to_f64(&self) -> Dist<f64> {
        Dist {
            actions: self.actions.clone(),
            weights: self.weights.iter().map(|w| w.to_f64()).collect(),
        }
    }

    /// Hashable value key; two forecasts with equal keys are "the same value"
    /// for binning purposes.
    pub fn value_key(&self, tol: f64) -> Vec<T::Key> {
        self.weights.iter().map(|w| w.key(tol)).collect()
    }
}

/// Squared Euclidean distance, exact in the scalar type.
pub fn euclid_dist_sq<T: Scalar>(x: &Dist<T>, y: &Dist<T>) -> Result<T> {
    if !x.actions.same_as(&y.actions) {
        return Err(Error::ActionSetMismatch);
    }
    let mut acc = T::Acc::new();
    for (a, b) in x.weights.iter().zip(&y.weights) {
        let d = a.clone() - b.clone();
        acc.add(&(d.clone() * d));
    }
    Ok(acc.total())
}

/// Euclidean distance `‖x − y‖₂` (as a float, whatever the backend).
pub fn euclid_dist<T: Scalar>(x: &Dist<T>, y: &Dist<T>) -> Result<f64> {
    Ok(euclid_dist_sq(x, y)?.to_f64().sqrt())
}

/// Weighted average of simplex points; with no weights, the plain mean.
pub fn running_average<T: Scalar>(points: &[Dist<T>], weights: Option<&[T]>) -> Result<Dist<T>> {
    let first = points.first().ok_or(Error::EmptyInput)?;
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(Error::LengthMismatch(w.len(), points.len()));
        }
        for (i, wi) in w.iter().enumerate() {
            if *wi < T::zero() {
                return Err(Error::NegativeWeight { index: i, value: wi.to_display_string() });
            }
        }
    }
    let mut avg = VectorAverage::new(first.actions.clone(), first.len());
    for (i, p) in points.iter().enumerate() {
        if !p.actions.same_as(&first.actions) {
            return Err(Error::ActionSetMismatch);
        }
        let w = weights.map(|w| w[i].clone()).unwrap_or_else(T::one);
        avg.add(p, &w);
    }
    avg.dist().ok_or(Error::ZeroTotalWeight)
}

/// Incrementally maintained weighted average of simplex points.
#[derive(Clone, Debug)]
pub struct VectorAverage<T: Scalar> {
    actions: ActionSet,
    sums: Vec<T::Acc>,
    total: T::Acc,
    count: u64,
}

impl<T: Scalar> VectorAverage<T> {
    pub fn new(actions: ActionSet, dim: usize) -> Self {
        VectorAverage { actions, sums: vec![T::Acc::new(); dim], total: T::Acc::new(), count: 0 }
    }

    pub fn add(&mut self, p: &Dist<T>, weight: &T) {
        if weight.is_zero() {
            return;
        }
        for (s, w) in self.sums.iter_mut().zip(p.weights()) {
            s.add(&(weight.clone() * w.clone()));
        }
        self.total.add(weight);
        self.count += 1;
    }

    pub fn add_pure(&mut self, index: usize, weight: &T) {
        if weight.is_zero() {
            return;
        }
        self.sums[index].add(weight);
        self.total.add(weight);
        self.count += 1;
    }

    pub fn total_weight(&self) -> T {
        self.total.total()
    }

    pub fn entries(&self) -> u64 {
        self.count
    }

    /// Current average, `None` while total weight is zero.
    pub fn dist(&self) -> Option<Dist<T>> {
        let total = self.total.total();
        if total.is_zero() {
            return None;
        }
        let weights: Vec<T> =
            self.sums.iter().map(|s| s.total() / total.clone()).collect();
        Some(Dist { actions: self.actions.clone(), weights })
    }
}
