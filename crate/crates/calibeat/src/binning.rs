//! Pure and general (fractional) binning sequences, joint binnings,
//! refinement relations, and δ-locality.
//!
//! A pure binning assigns each period to a single bin; a general binning
//! distributes each period over bins with nonnegative weights summing
//! to one.  Bin ids are opaque labels or tuples of labels (joint bins).
//! The bin sets are finite per run; countably infinite bin sets are out of
//! scope for this artifact.

use crate::error::{Error, Result};
use crate::num::{Accumulator, Scalar};
use crate::simplex::Dist;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;

/// Bin identifier: an opaque label, or a tuple for joint binnings.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinId {
    Label(String),
    Tuple(Vec<BinId>),
}

impl BinId {
    pub fn label(s: impl Into<String>) -> Self {
        BinId::Label(s.into())
    }

    pub fn pair(a: BinId, b: BinId) -> Self {
        BinId::Tuple(vec![a, b])
    }

    /// Bin id keyed by a forecast's value (same key ⇒ same bin).
    pub fn from_value_key<T: Scalar>(d: &Dist<T>, tol: f64) -> Self {
        let parts: Vec<String> = d.value_key(tol).iter().map(|k| format!("{k:?}")).collect();
        BinId::Label(format!("v[{}]", parts.join(",")))
    }
}

impl fmt::Debug for BinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinId::Label(s) => write!(f, "{s}"),
            BinId::Tuple(parts) => {
                write!(f, "(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p:?}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for BinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One bin per period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PureBinning {
    ids: Vec<BinId>,
}

impl PureBinning {
    pub fn new(ids: Vec<BinId>) -> Self {
        PureBinning { ids }
    }

    pub fn from_labels<S: ToString>(labels: impl IntoIterator<Item = S>) -> Self {
        PureBinning { ids: labels.into_iter().map(|l| BinId::Label(l.to_string())).collect() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[BinId] {
        &self.ids
    }

    pub fn id(&self, s: usize) -> &BinId {
        &self.ids[s]
    }

    /// Number of distinct bins used.
    pub fn bins_used(&self) -> usize {
        self.ids.iter().collect::<HashSet<_>>().len()
    }

    /// View as a general binning with unit masses.
    pub fn to_general<T: Scalar>(&self) -> GeneralBinning<T> {
        GeneralBinning {
            periods: self.ids.iter().map(|id| vec![(id.clone(), T::one())]).collect(),
        }
    }
}

/// Fractional assignment of periods to bins: per period, a probability
/// distribution over bin ids (only positive weights are stored).
#[derive(Clone, Debug)]
pub struct GeneralBinning<T: Scalar> {
    periods: Vec<Vec<(BinId, T)>>,
}

impl<T: Scalar> GeneralBinning<T> {
    /// Validate weights: nonnegative, unit mass per period.
    pub fn new(periods: Vec<Vec<(BinId, T)>>) -> Result<Self> {
        for fs in &periods {
            let mut acc = T::Acc::new();
            for (i, (_, w)) in fs.iter().enumerate() {
                if *w < T::zero() {
                    return Err(Error::NegativeWeight { index: i, value: w.to_display_string() });
                }
                acc.add(w);
            }
            let gap = (acc.total() - T::one()).abs();
            let ok = if T::EXACT { gap.is_zero() } else { gap.to_f64() <= 1e-12 };
            if !ok {
                return Err(Error::MassNotOne {
                    mass: acc.total().to_display_string(),
                    tolerance: 1e-12,
                });
            }
        }
        Ok(GeneralBinning { periods })
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// The positive-weight entries of period `s`.
    pub fn period(&self, s: usize) -> &[(BinId, T)] {
        &self.periods[s]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<(BinId, T)>> {
        self.periods.iter()
    }

    /// Total weight per bin over the first `t` periods; the totals sum to `t`.
    pub fn bin_weights(&self, t: usize) -> HashMap<BinId, T> {
        let mut acc: HashMap<BinId, T::Acc> = HashMap::new();
        for fs in &self.periods[..t] {
            for (id, w) in fs {
                acc.entry(id.clone()).or_insert_with(T::Acc::new).add(w);
            }
        }
        acc.into_iter().map(|(k, a)| (k, a.total())).collect()
    }

    /// Distinct bins with positive weight.
    pub fn support(&self) -> HashSet<BinId> {
        let mut s = HashSet::new();
        for fs in &self.periods {
            for (id, w) in fs {
                if !w.is_zero() {
                    s.insert(id.clone());
                }
            }
        }
        s
    }
}

/// Partition witness for "each coarse bin is a union of fine bins".
#[derive(Clone, Debug, Default)]
pub struct RefinementWitness {
    /// fine bin id → coarse bin id
    pub map: HashMap<BinId, BinId>,
}

impl RefinementWitness {
    pub fn new(map: HashMap<BinId, BinId>) -> Self {
        RefinementWitness { map }
    }

    /// Witness for a projection of joint tuple bins onto component `k`.
    pub fn tuple_projection(fine_support: &HashSet<BinId>, k: usize) -> Self {
        let map = fine_support
            .iter()
            .map(|id| match id {
                BinId::Tuple(parts) => (id.clone(), parts[k].clone()),
                other => (other.clone(), other.clone()),
            })
            .collect();
        RefinementWitness { map }
    }

    /// Witness collapsing everything to one bin.
    pub fn total(fine_support: &HashSet<BinId>, coarse: BinId) -> Self {
        RefinementWitness {
            map: fine_support.iter().map(|id| (id.clone(), coarse.clone())).collect(),
        }
    }
}

/// Standard binning by forecast value: two periods share a bin exactly when
/// their forecasts have the same value (exact in rational arithmetic,
/// rounded at `value_tolerance` in floats).
pub fn from_forecasts<T: Scalar>(forecasts: &[Dist<T>], value_tolerance: f64) -> PureBinning {
    PureBinning {
        ids: forecasts.iter().map(|c| BinId::from_value_key(c, value_tolerance)).collect(),
    }
}

/// Joint binning: bin id is the ordered pair of the two inputs' ids; it
/// refines both.
pub fn joint(b: &PureBinning, c: &PureBinning) -> Result<PureBinning> {
    if b.len() != c.len() {
        return Err(Error::LengthMismatch(b.len(), c.len()));
    }
    Ok(PureBinning {
        ids: b.ids.iter().zip(&c.ids).map(|(x, y)| BinId::pair(x.clone(), y.clone())).collect(),
    })
}

/// Joint binning of any number of sequences (tuple bin ids).
pub fn joint_many(binnings: &[&PureBinning]) -> Result<PureBinning> {
    let first = binnings.first().ok_or(Error::EmptyInput)?;
    for b in binnings.iter() {
        if b.len() != first.len() {
            return Err(Error::LengthMismatch(b.len(), first.len()));
        }
    }
    Ok(PureBinning {
        ids: (0..first.len())
            .map(|s| BinId::Tuple(binnings.iter().map(|b| b.ids[s].clone()).collect()))
            .collect(),
    })
}

/// Check that `fine` refines `coarse` through the witness partition:
/// `g_s(j) = Σ_{i ∈ I(j)} f_s(i)` for every period `s` and coarse bin `j`.
pub fn check_refines<T: Scalar>(
    fine: &GeneralBinning<T>,
    coarse: &GeneralBinning<T>,
    witness: &RefinementWitness,
) -> bool {
    if fine.len() != coarse.len() {
        return false;
    }
    for (fs, gs) in fine.periods.iter().zip(&coarse.periods) {
        let mut implied: HashMap<&BinId, T::Acc> = HashMap::new();
        for (i, w) in fs {
            if w.is_zero() {
                continue;
            }
            let Some(j) = witness.map.get(i) else { return false };
            implied.entry(j).or_insert_with(T::Acc::new).add(w);
        }
        let mut stated: HashMap<&BinId, T> = HashMap::new();
        for (j, w) in gs {
            if !w.is_zero() {
                stated.insert(j, w.clone());
            }
        }
        for (j, acc) in &implied {
            let total = acc.total();
            let target = stated.remove(*j).unwrap_or_else(T::zero);
            let gap = (total - target).abs();
            let ok = if T::EXACT { gap.is_zero() } else { gap.to_f64() <= 1e-12 };
            if !ok {
                return false;
            }
        }
        if stated.values().any(|w| {
            if T::EXACT {
                !w.is_zero()
            } else {
                w.to_f64().abs() > 1e-12
            }
        }) {
            return false;
        }
    }
    true
}

/// δ-locality: every bin's supported forecasts lie strictly within `delta`
/// of a common center.  Centers may be supplied; otherwise each bin's
/// weighted average forecast is used as the candidate center.
pub fn check_delta_local<T: Scalar>(
    f: &GeneralBinning<T>,
    forecasts: &[Dist<T>],
    delta: f64,
    centers: Option<&HashMap<BinId, Dist<T>>>,
) -> bool {
    if delta <= 0.0 || f.len() != forecasts.len() {
        return false;
    }
    // Gather supported forecasts per bin.
    let mut members: HashMap<&BinId, Vec<usize>> = HashMap::new();
    for (s, fs) in f.periods.iter().enumerate() {
        for (id, w) in fs {
            if !w.is_zero() {
                members.entry(id).or_default().push(s);
            }
        }
    }
    for (id, periods) in members {
        let center: Dist<T> = if let Some(cs) = centers {
            match cs.get(id) {
                Some(c) => c.clone(),
                None => return false,
            }
        } else {
            let pts: Vec<Dist<T>> = periods.iter().map(|&s| forecasts[s].clone()).collect();
            let ws: Vec<T> = periods
                .iter()
                .map(|&s| {
                    f.periods[s]
                        .iter()
                        .find(|(i, _)| i == id)
                        .map(|(_, w)| w.clone())
                        .unwrap_or_else(T::zero)
                })
                .collect();
            match crate::simplex::running_average(&pts, Some(&ws)) {
                Ok(c) => c,
                Err(_) => continue,
            }
        };
        for &s in &periods {
            match crate::simplex::euclid_dist(&forecasts[s], &center) {
                Ok(d) if d < delta => {}
                _ => return false,
            }
        }
    }
    true
}
