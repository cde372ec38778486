//! Transcript ingestion and serialization.
//!
//! A transcript is a sequence of per-period records `(t, a_t, b_t, c_t)`
//! plus optional named binnings, stored as JSON lines:
//!
//! ```text
//! {"actions":["0","1"]}
//! {"t":1,"a":"1","b":0.2,"c":1.0,"bins":{"grid":"cell3"}}
//! ```
//!
//! The header line is optional (the binary action set is inferred when
//! scalar probabilities are used).  `b` may be a bin label, a scalar
//! probability, a full distribution, or an array of labels (several
//! reference forecasters).  Numbers may be JSON numbers or strings;
//! strings survive the exact-arithmetic round trip (`"1/3"`, `"0.2"`).

use crate::binning::{BinId, GeneralBinning, PureBinning};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::simplex::{ActionSet, Dist};
use std::collections::BTreeMap;

/// The reference column: labels, or forecast points (which double as
/// labels through their values).
#[derive(Clone, Debug)]
pub enum RefColumn<T: Scalar> {
    Labels(Vec<BinId>),
    Points(Vec<Dist<T>>),
    /// Several reference forecasters announced jointly.
    Tuples(Vec<Vec<BinId>>),
}

impl<T: Scalar> RefColumn<T> {
    pub fn len(&self) -> usize {
        match self {
            RefColumn::Labels(v) => v.len(),
            RefColumn::Points(v) => v.len(),
            RefColumn::Tuples(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The induced pure binning (points are binned by value).
    pub fn binning(&self) -> PureBinning {
        match self {
            RefColumn::Labels(v) => PureBinning::new(v.clone()),
            RefColumn::Points(v) => crate::binning::from_forecasts(v, 1e-9),
            RefColumn::Tuples(v) => {
                PureBinning::new(v.iter().map(|t| BinId::Tuple(t.clone())).collect())
            }
        }
    }

    /// Forecast points when the reference announced distributions.
    pub fn points(&self) -> Option<&[Dist<T>]> {
        match self {
            RefColumn::Points(v) => Some(v),
            _ => None,
        }
    }
}

/// Aligned per-period records plus named binnings.
#[derive(Clone, Debug)]
pub struct Transcript<T: Scalar> {
    pub action_set: ActionSet,
    pub actions: Vec<usize>,
    pub reference: Option<RefColumn<T>>,
    pub forecasts: Option<Vec<Dist<T>>>,
    pub named_binnings: BTreeMap<String, GeneralBinning<T>>,
}

impl<T: Scalar> Transcript<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn forecasts(&self) -> Result<&[Dist<T>]> {
        self.forecasts.as_deref().ok_or_else(|| {
            Error::InvalidTranscript("transcript has no forecast column c".into())
        })
    }

    pub fn reference(&self) -> Result<&RefColumn<T>> {
        self.reference.as_ref().ok_or_else(|| {
            Error::InvalidTranscript("transcript has no reference column b".into())
        })
    }

    /// Parse JSON lines.  Validates: contiguous `t` from 1, known action
    /// labels, simplex-valid distributions.
    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut action_set: Option<ActionSet> = None;
        let mut actions_raw: Vec<String> = Vec::new();
        let mut refs: Vec<Option<serde_json::Value>> = Vec::new();
        let mut forecasts_raw: Vec<Option<serde_json::Value>> = Vec::new();
        let mut bins_raw: Vec<BTreeMap<String, serde_json::Value>> = Vec::new();
        let mut expected_t = 1u64;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(line).map_err(|e| {
                Error::InvalidTranscript(format!("line {}: {e}", lineno + 1))
            })?;
            let obj = v.as_object().ok_or_else(|| {
                Error::InvalidTranscript(format!("line {}: not an object", lineno + 1))
            })?;
            if let Some(labels) = obj.get("actions") {
                let labels: Vec<String> = labels
                    .as_array()
                    .ok_or_else(|| Error::InvalidTranscript("actions must be an array".into()))?
                    .iter()
                    .map(|l| json_label(l))
                    .collect::<Result<_>>()?;
                action_set = Some(ActionSet::new(labels)?);
                continue;
            }
            let t = obj
                .get("t")
                .and_then(|t| t.as_u64())
                .ok_or_else(|| Error::InvalidTranscript(format!("line {}: missing t", lineno + 1)))?;
            if t != expected_t {
                return Err(Error::InvalidTranscript(format!(
                    "period {t} out of order (expected {expected_t})"
                )));
            }
            expected_t += 1;
            let a = obj.get("a").ok_or_else(|| {
                Error::InvalidTranscript(format!("period {t}: missing action"))
            })?;
            actions_raw.push(json_label(a)?);
            refs.push(obj.get("b").cloned());
            forecasts_raw.push(obj.get("c").cloned());
            bins_raw.push(match obj.get("bins") {
                Some(serde_json::Value::Object(m)) => {
                    m.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
                }
                _ => BTreeMap::new(),
            });
        }
        if actions_raw.is_empty() {
            return Err(Error::InvalidTranscript("no periods".into()));
        }
        let action_set = action_set.unwrap_or_else(ActionSet::binary);
        let actions: Vec<usize> = actions_raw
            .iter()
            .map(|l| action_set.index_of(l))
            .collect::<Result<_>>()?;

        let forecasts = if forecasts_raw.iter().all(|c| c.is_some()) {
            Some(
                forecasts_raw
                    .iter()
                    .map(|c| parse_dist::<T>(&action_set, c.as_ref().unwrap()))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else if forecasts_raw.iter().any(|c| c.is_some()) {
            return Err(Error::InvalidTranscript("forecast column c is partial".into()));
        } else {
            None
        };

        let reference = parse_reference::<T>(&action_set, &refs)?;

        let mut named: BTreeMap<String, Vec<Vec<(BinId, T)>>> = BTreeMap::new();
        for (s, per) in bins_raw.iter().enumerate() {
            for (name, val) in per {
                let entry = named.entry(name.clone()).or_default();
                entry.resize(s, Vec::new());
                entry.push(parse_bin_entry::<T>(val)?);
            }
        }
        let t_total = actions.len();
        let mut named_binnings = BTreeMap::new();
        for (name, mut periods) in named {
            if periods.len() != t_total || periods.iter().any(Vec::is_empty) {
                return Err(Error::InvalidTranscript(format!(
                    "named binning {name} does not cover every period"
                )));
            }
            periods.shrink_to_fit();
            named_binnings.insert(name, GeneralBinning::new(periods)?);
        }

        Ok(Transcript { action_set, actions, reference, forecasts, named_binnings })
    }

    /// Serialize back to JSON lines (numbers as JSON numbers for floats and
    /// as exact strings for rationals).
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        out.push_str(
            &serde_json::json!({ "actions": self.action_set.labels() }).to_string(),
        );
        out.push('\n');
        for s in 0..self.len() {
            let mut obj = serde_json::Map::new();
            obj.insert("t".into(), serde_json::json!(s + 1));
            obj.insert(
                "a".into(),
                serde_json::json!(self.action_set.label(self.actions[s])),
            );
            match &self.reference {
                Some(RefColumn::Labels(v)) => {
                    obj.insert("b".into(), bin_id_json(&v[s]));
                }
                Some(RefColumn::Points(v)) => {
                    obj.insert("b".into(), dist_json(&v[s]));
                }
                Some(RefColumn::Tuples(v)) => {
                    obj.insert(
                        "b".into(),
                        serde_json::Value::Array(v[s].iter().map(bin_id_json).collect()),
                    );
                }
                None => {}
            }
            if let Some(c) = &self.forecasts {
                obj.insert("c".into(), dist_json(&c[s]));
            }
            if !self.named_binnings.is_empty() {
                let mut bins = serde_json::Map::new();
                for (name, g) in &self.named_binnings {
                    let fs = g.period(s);
                    if fs.len() == 1 && fs[0].1 == T::one() {
                        bins.insert(name.clone(), bin_id_json(&fs[0].0));
                    } else {
                        let mut m = serde_json::Map::new();
                        for (id, w) in fs {
                            m.insert(format!("{id}"), w.to_json());
                        }
                        bins.insert(name.clone(), serde_json::Value::Object(m));
                    }
                }
                obj.insert("bins".into(), serde_json::Value::Object(bins));
            }
            out.push_str(&serde_json::Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }

    /// Import the two-action CSV form: header `t,a,b,c` with scalar
    /// probabilities for `b` and `c` (either may be empty).
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidTranscript("empty csv".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let find = |name: &str| cols.iter().position(|c| *c == name);
        let (ai, bi, ci) = (
            find("a").ok_or_else(|| Error::InvalidTranscript("csv needs column a".into()))?,
            find("b"),
            find("c"),
        );
        let action_set = ActionSet::binary();
        let mut actions = Vec::new();
        let mut bs: Vec<Dist<T>> = Vec::new();
        let mut cs: Vec<Dist<T>> = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            actions.push(action_set.index_of(fields[ai])?);
            let get = |i: Option<usize>| -> Result<Option<Dist<T>>> {
                match i {
                    Some(i) if i < fields.len() && !fields[i].is_empty() => {
                        let p = T::parse(fields[i]).ok_or_else(|| {
                            Error::InvalidTranscript(format!("bad probability {:?}", fields[i]))
                        })?;
                        Ok(Some(Dist::binary(p)))
                    }
                    _ => Ok(None),
                }
            };
            if let Some(b) = get(bi)? {
                bs.push(b);
            }
            if let Some(c) = get(ci)? {
                cs.push(c);
            }
        }
        if actions.is_empty() {
            return Err(Error::InvalidTranscript("no periods".into()));
        }
        let reference = if bs.len() == actions.len() {
            Some(RefColumn::Points(bs))
        } else if bs.is_empty() {
            None
        } else {
            return Err(Error::InvalidTranscript("reference column b is partial".into()));
        };
        let forecasts = if cs.len() == actions.len() {
            Some(cs)
        } else if cs.is_empty() {
            None
        } else {
            return Err(Error::InvalidTranscript("forecast column c is partial".into()));
        };
        Ok(Transcript {
            action_set,
            actions,
            reference,
            forecasts,
            named_binnings: BTreeMap::new(),
        })
    }
}

fn json_label(v: &serde_json::Value) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::InvalidTranscript(format!("bad label {other}"))),
    }
}

fn json_scalar<T: Scalar>(v: &serde_json::Value) -> Result<T> {
    let text = match v {
        serde_json::Value::Number(n) => n.to_string(),
        serde_json::Value::String(s) => s.clone(),
        other => return Err(Error::InvalidTranscript(format!("bad number {other}"))),
    };
    T::parse(&text)
        .ok_or_else(|| Error::InvalidTranscript(format!("cannot parse number {text:?}")))
}

fn parse_dist<T: Scalar>(actions: &ActionSet, v: &serde_json::Value) -> Result<Dist<T>> {
    match v {
        serde_json::Value::Array(ws) => {
            let weights: Vec<T> = ws.iter().map(json_scalar::<T>).collect::<Result<_>>()?;
            Dist::new(actions, weights)
        }
        scalar => {
            if actions.size() != 2 {
                return Err(Error::InvalidTranscript(
                    "scalar probabilities need a binary action set".into(),
                ));
            }
            let p: T = json_scalar(scalar)?;
            Dist::new(
                actions,
                vec![T::one() - p.clone(), p],
            )
        }
    }
}

fn parse_reference<T: Scalar>(
    actions: &ActionSet,
    refs: &[Option<serde_json::Value>],
) -> Result<Option<RefColumn<T>>> {
    if refs.iter().all(Option::is_none) {
        return Ok(None);
    }
    if refs.iter().any(Option::is_none) {
        return Err(Error::InvalidTranscript("reference column b is partial".into()));
    }
    let vals: Vec<&serde_json::Value> = refs.iter().map(|r| r.as_ref().unwrap()).collect();
    // Distribution-valued reference: numbers, or arrays of numbers of the
    // action-set size.
    let is_dist = |v: &serde_json::Value| match v {
        serde_json::Value::Number(_) => true,
        serde_json::Value::String(s) => T::parse(s).is_some(),
        serde_json::Value::Array(a) => {
            a.len() == actions.size() && a.iter().all(|x| json_scalar::<f64>(x).is_ok())
        }
        _ => false,
    };
    if vals.iter().all(|v| is_dist(v)) {
        let points: Vec<Dist<T>> =
            vals.iter().map(|v| parse_dist::<T>(actions, v)).collect::<Result<_>>()?;
        return Ok(Some(RefColumn::Points(points)));
    }
    // Tuple reference: array of labels.
    if vals.iter().all(|v| v.is_array()) {
        let tuples: Vec<Vec<BinId>> = vals
            .iter()
            .map(|v| {
                v.as_array()
                    .unwrap()
                    .iter()
                    .map(|l| json_label(l).map(BinId::Label))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        return Ok(Some(RefColumn::Tuples(tuples)));
    }
    let labels: Vec<BinId> = vals
        .iter()
        .map(|v| json_label(v).map(BinId::Label))
        .collect::<Result<_>>()?;
    Ok(Some(RefColumn::Labels(labels)))
}

fn parse_bin_entry<T: Scalar>(v: &serde_json::Value) -> Result<Vec<(BinId, T)>> {
    match v {
        serde_json::Value::Object(m) => m
            .iter()
            .map(|(k, w)| Ok((BinId::label(k.clone()), json_scalar::<T>(w)?)))
            .collect(),
        label => Ok(vec![(BinId::Label(json_label(label)?), T::one())]),
    }
}

fn bin_id_json(id: &BinId) -> serde_json::Value {
    match id {
        BinId::Label(s) => serde_json::json!(s),
        BinId::Tuple(parts) => serde_json::Value::Array(parts.iter().map(bin_id_json).collect()),
    }
}

fn dist_json<T: Scalar>(d: &Dist<T>) -> serde_json::Value {
    if d.len() == 2 {
        d.weight(1).to_json()
    } else {
        serde_json::Value::Array(d.weights().iter().map(|w| w.to_json()).collect())
    }
}

/// The ten-period two-forecaster table (extended periodically `m` times):
/// actions `1,0,0,0,0,1,1,1,1,0`, reference forecasts `1/5 ×5, 4/5 ×5`,
/// forecasts `1,0,½,½,½,½,½,½,1,0`.  Both columns are perfectly calibrated;
/// the quadratic comparison favors `c`, the 2-spherical one favors `b`.
pub fn example1<T: Scalar>(m: usize) -> Transcript<T> {
    let actions_tab = [1usize, 0, 0, 0, 0, 1, 1, 1, 1, 0];
    let b_tab = [(1, 5); 5].iter().chain([(4, 5); 5].iter()).cloned().collect::<Vec<_>>();
    let c_tab: [(i64, i64); 10] =
        [(1, 1), (0, 1), (1, 2), (1, 2), (1, 2), (1, 2), (1, 2), (1, 2), (1, 1), (0, 1)];
    let m = m.max(1);
    let mut actions = Vec::with_capacity(10 * m);
    let mut b = Vec::with_capacity(10 * m);
    let mut c = Vec::with_capacity(10 * m);
    for _ in 0..m {
        actions.extend_from_slice(&actions_tab);
        b.extend(b_tab.iter().map(|&(n, d)| Dist::binary(T::from_ratio(n, d))));
        c.extend(c_tab.iter().map(|&(n, d)| Dist::binary(T::from_ratio(n, d))));
    }
    Transcript {
        action_set: ActionSet::binary(),
        actions,
        reference: Some(RefColumn::Points(b)),
        forecasts: Some(c),
        named_binnings: BTreeMap::new(),
    }
}

/// The step-rule failure transcript: alternating actions `0,1,0,1,…`, a
/// constant reference bin, and the running-average forecasts seeded at ½.
/// Under the step rule, `B_t = 1` while `R_t(b) → ½`.
pub fn example52<T: Scalar>(t: usize) -> Transcript<T> {
    let mut actions = Vec::with_capacity(t);
    let mut c: Vec<Dist<T>> = Vec::with_capacity(t);
    let mut ones = 0i64;
    for s in 0..t {
        let forecast = if s == 0 {
            T::from_ratio(1, 2)
        } else {
            T::from_ratio(ones, s as i64)
        };
        c.push(Dist::binary(forecast));
        let a = s % 2;
        ones += a as i64;
        actions.push(a);
    }
    Transcript {
        action_set: ActionSet::binary(),
        actions,
        reference: Some(RefColumn::Labels(vec![BinId::label("b"); t])),
        forecasts: Some(c),
        named_binnings: BTreeMap::new(),
    }
}
