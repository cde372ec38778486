//! Scores for sequences of forecasts: Brier, calibration, refinement (pure
//! and fractional binnings), average entropy, online refinement, and the
//! decomposition / bound / monotonicity checks.
//!
//! For a binning that refines the forecasts (all periods in a bin share one
//! forecast value) the decomposition `B = K + R` is an identity; in exact
//! arithmetic the residual returned by [`decomposition_check`] is literally
//! zero.  For merely δ-local binnings the identity holds up to `2Mδ` for
//! M-Lipschitz rules.

use crate::binning::{
    check_delta_local, check_refines, from_forecasts, BinId, GeneralBinning, PureBinning,
    RefinementWitness,
};
use crate::error::{Error, Result};
use crate::num::{Accumulator, Scalar};
use crate::scoring::{make_quadratic, ScoringRule};
use crate::simplex::{Dist, VectorAverage};
use std::collections::HashMap;

/// Residual tolerance for exact identities evaluated in floats.
pub const DECOMP_TOL: f64 = 1e-10;
/// Slack for inequalities involving declared constants.
pub const BOUND_TOL: f64 = 1e-9;
/// Slack for monotonicity chains evaluated in floats.
pub const MONO_TOL: f64 = 1e-10;

/// Per-bin horizon statistics of a general binning.
struct BinStats<T: Scalar> {
    id: BinId,
    weight: T,
    avg_action: Dist<T>,
    avg_forecast: Option<Dist<T>>,
}

fn bin_stats<T: Scalar>(
    rule_actions: &crate::simplex::ActionSet,
    actions: &[usize],
    forecasts: Option<&[Dist<T>]>,
    binning: &GeneralBinning<T>,
) -> Result<Vec<BinStats<T>>> {
    if binning.len() != actions.len() {
        return Err(Error::LengthMismatch(binning.len(), actions.len()));
    }
    if let Some(f) = forecasts {
        if f.len() != actions.len() {
            return Err(Error::LengthMismatch(f.len(), actions.len()));
        }
    }
    let mut order: Vec<BinId> = Vec::new();
    let mut act: HashMap<BinId, VectorAverage<T>> = HashMap::new();
    let mut fc: HashMap<BinId, VectorAverage<T>> = HashMap::new();
    let dim = rule_actions.size();
    for (s, fs) in binning.iter().enumerate() {
        for (id, w) in fs {
            if w.is_zero() {
                continue;
            }
            let a = act.entry(id.clone()).or_insert_with(|| {
                order.push(id.clone());
                VectorAverage::new(rule_actions.clone(), dim)
            });
            a.add_pure(actions[s], w);
            if let Some(f) = forecasts {
                fc.entry(id.clone())
                    .or_insert_with(|| VectorAverage::new(rule_actions.clone(), dim))
                    .add(&f[s], w);
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let a = &act[&id];
            BinStats {
                weight: a.total_weight(),
                avg_action: a.dist().expect("positive weight"),
                avg_forecast: fc.get(&id).and_then(|v| v.dist()),
                id,
            }
        })
        .collect())
}

/// Average entropy of the realized actions, `H_t = (1/t) Σ H(1_{a_s})`.
pub fn avg_entropy<T: Scalar>(rule: &ScoringRule<T>, actions: &[usize]) -> Result<T> {
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    let h: Vec<T> = (0..rule.action_set().size()).map(|a| rule.action_entropy(a)).collect();
    let mut acc = T::Acc::new();
    for &a in actions {
        acc.add(&h[a]);
    }
    Ok(acc.total() / T::from_int(actions.len() as i64))
}

/// Brier score: average divergence of forecasts from realized actions.
pub fn brier<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
) -> Result<T> {
    if actions.len() != forecasts.len() {
        return Err(Error::LengthMismatch(actions.len(), forecasts.len()));
    }
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    let h: Vec<T> = (0..rule.action_set().size()).map(|a| rule.action_entropy(a)).collect();
    let mut acc = T::Acc::new();
    for (&a, c) in actions.iter().zip(forecasts) {
        if !c.action_set().same_as(rule.action_set()) {
            return Err(Error::ActionSetMismatch);
        }
        acc.add(&(rule.loss_of_action(a, c) - h[a].clone()));
    }
    Ok(acc.total() / T::from_int(actions.len() as i64))
}

/// Calibration score against a binning:
/// `K = (1/t) Σ_i n(i) · D(ā(i), c̄(i))` over positive-weight bins.
pub fn calibration<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
    binning: &GeneralBinning<T>,
) -> Result<T> {
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    let stats = bin_stats(rule.action_set(), actions, Some(forecasts), binning)?;
    let mut acc = T::Acc::new();
    for b in &stats {
        let cbar = b.avg_forecast.as_ref().expect("forecasts supplied");
        acc.add(&(b.weight.clone() * rule.divergence(&b.avg_action, cbar)?));
    }
    Ok(acc.total() / T::from_int(actions.len() as i64))
}

/// Refinement score (direct form):
/// `R = (1/t) Σ_i Σ_s f_s(i) · D(a_s, ā(i))`.
pub fn refinement<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    binning: &GeneralBinning<T>,
) -> Result<T> {
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    let stats = bin_stats::<T>(rule.action_set(), actions, None, binning)?;
    let h: Vec<T> = (0..rule.action_set().size()).map(|a| rule.action_entropy(a)).collect();
    let loss: HashMap<&BinId, Vec<T>> =
        stats.iter().map(|b| (&b.id, rule.loss_vector(&b.avg_action))).collect();
    let mut acc = T::Acc::new();
    for (s, fs) in binning.iter().enumerate() {
        let a = actions[s];
        for (id, w) in fs {
            if w.is_zero() {
                continue;
            }
            let d = loss[id][a].clone() - h[a].clone();
            acc.add(&(w.clone() * d));
        }
    }
    Ok(acc.total() / T::from_int(actions.len() as i64))
}

/// Refinement score (entropy form): `Σ_i (n(i)/t) H(ā(i)) − H_t`.
pub fn refinement_entropy_form<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    binning: &GeneralBinning<T>,
) -> Result<T> {
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    let stats = bin_stats::<T>(rule.action_set(), actions, None, binning)?;
    let mut acc = T::Acc::new();
    for b in &stats {
        acc.add(&(b.weight.clone() * rule.entropy(&b.avg_action)));
    }
    let t = T::from_int(actions.len() as i64);
    Ok(acc.total() / t - avg_entropy(rule, actions)?)
}

/// True when every positive-weight bin supports a single forecast value.
pub fn forecast_refining<T: Scalar>(
    binning: &GeneralBinning<T>,
    forecasts: &[Dist<T>],
    value_tolerance: f64,
) -> bool {
    if binning.len() != forecasts.len() {
        return false;
    }
    let mut seen: HashMap<&BinId, Vec<<T as Scalar>::Key>> = HashMap::new();
    for (s, fs) in binning.iter().enumerate() {
        let key = forecasts[s].value_key(value_tolerance);
        for (id, w) in fs {
            if w.is_zero() {
                continue;
            }
            match seen.get(id) {
                Some(k) if *k != key => return false,
                Some(_) => {}
                None => {
                    seen.insert(id, key.clone());
                }
            }
        }
    }
    true
}

/// Error unless the pure binning refines the forecasts.
pub fn require_forecast_refining<T: Scalar>(
    binning: &PureBinning,
    forecasts: &[Dist<T>],
) -> Result<()> {
    if !forecast_refining(&binning.to_general::<T>(), forecasts, 1e-9) {
        return Err(Error::NotARefinement("bins mix distinct forecast values".into()));
    }
    Ok(())
}

/// Decomposition residual `B − K − R` for a forecast-refining binning;
/// zero in exact arithmetic, `≤ 1e-10` in floats.
pub fn decomposition_check<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
    binning: &GeneralBinning<T>,
) -> Result<T> {
    if !forecast_refining(binning, forecasts, 1e-9) {
        return Err(Error::NotARefinement("bins mix distinct forecast values".into()));
    }
    let b = brier(rule, actions, forecasts)?;
    let k = calibration(rule, actions, forecasts, binning)?;
    let r = refinement(rule, actions, binning)?;
    Ok(b - k - r)
}

/// Approximate decomposition for δ-local binnings: returns
/// `(B − K − R, 2·M_L·δ)`; the residual is strictly below the bound for
/// M_L-Lipschitz rules.
pub fn delta_decomposition_check<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
    binning: &GeneralBinning<T>,
    delta: f64,
    centers: Option<&HashMap<BinId, Dist<T>>>,
) -> Result<(T, f64)> {
    let m = rule.declared_lipschitz().ok_or(Error::MissingConstant("lipschitz"))?;
    if !check_delta_local(binning, forecasts, delta, centers) {
        return Err(Error::NotDeltaLocal {
            delta,
            detail: "some bin's forecasts spread beyond a δ-ball".into(),
        });
    }
    let b = brier(rule, actions, forecasts)?;
    let k = calibration(rule, actions, forecasts, binning)?;
    let r = refinement(rule, actions, binning)?;
    Ok((b - k - r, 2.0 * m * delta))
}

/// Online refinement report: the running-average refinement next to the
/// horizon-final one, with the `2M(N/t)(ln(t/N)+1)` bound when a Lipschitz
/// constant is declared.
#[derive(Clone, Debug)]
pub struct OnlineRefinementReport<T: Scalar> {
    pub online: T,
    pub offline: T,
    pub gap: T,
    pub bins_used: usize,
    pub bound: Option<f64>,
}

/// Online refinement `R̃ = (1/t) Σ D(a_s, ā_{s−1}(i_s))`, with the first
/// visit of each bin scored against `seed_forecast`.
pub fn online_refinement<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    binning: &PureBinning,
    seed_forecast: &Dist<T>,
) -> Result<OnlineRefinementReport<T>> {
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    if binning.len() != actions.len() {
        return Err(Error::LengthMismatch(binning.len(), actions.len()));
    }
    let t = actions.len();
    let h: Vec<T> = (0..rule.action_set().size()).map(|a| rule.action_entropy(a)).collect();
    let mut state: HashMap<&BinId, VectorAverage<T>> = HashMap::new();
    let mut acc = T::Acc::new();
    for (s, &a) in actions.iter().enumerate() {
        let id = binning.id(s);
        let avg = state.entry(id).or_insert_with(|| {
            VectorAverage::new(rule.action_set().clone(), rule.action_set().size())
        });
        let past = avg.dist().unwrap_or_else(|| seed_forecast.clone());
        acc.add(&(rule.loss_of_action(a, &past) - h[a].clone()));
        avg.add_pure(a, &T::one());
    }
    let online = acc.total() / T::from_int(t as i64);
    let offline = refinement(rule, actions, &binning.to_general::<T>())?;
    let bins_used = state.len();
    let bound = rule.declared_lipschitz().map(|m| {
        let n = bins_used as f64;
        let t = t as f64;
        2.0 * m * (n / t) * ((t / n).ln() + 1.0)
    });
    Ok(OnlineRefinementReport { gap: online.clone() - offline.clone(), online, offline, bins_used, bound })
}

/// Single-bin online/offline comparison for arbitrary points
/// `x_1..x_n ∈ C`: `v = (1/n)ΣD(x_j, x̄_n)`, `ṽ = (1/n)ΣD(x_j, x̄_{j−1})`,
/// and the telescoped increments `(1/n) Σ_j j·D(x̄_j, x̄_{j−1})`; the first
/// two differ by exactly the third.
#[derive(Clone, Debug)]
pub struct OnlineOffline<T: Scalar> {
    pub offline: T,
    pub online: T,
    pub increment_sum: T,
    /// Per-step increments `η_j = j·D(x̄_j, x̄_{j−1})` for j ≥ 2, plus the
    /// seed term at j = 1.
    pub increments: Vec<T>,
}

pub fn online_offline_identity<T: Scalar>(
    rule: &ScoringRule<T>,
    points: &[Dist<T>],
    seed: &Dist<T>,
) -> Result<OnlineOffline<T>> {
    if points.is_empty() {
        return Err(Error::EmptySequence);
    }
    let n = points.len();
    let dim = rule.action_set().size();
    let mut avg = VectorAverage::<T>::new(rule.action_set().clone(), dim);
    let mut online_acc = T::Acc::new();
    let mut incr_acc = T::Acc::new();
    let mut increments = Vec::with_capacity(n);
    let mut prev = seed.clone();
    for (j, x) in points.iter().enumerate() {
        online_acc.add(&rule.divergence(x, &prev)?);
        avg.add(x, &T::one());
        let cur = avg.dist().expect("nonempty");
        let eta = T::from_int((j + 1) as i64) * rule.divergence(&cur, &prev)?;
        incr_acc.add(&eta);
        increments.push(eta);
        prev = cur;
    }
    let xbar = avg.dist().expect("nonempty");
    let mut off_acc = T::Acc::new();
    for x in points {
        off_acc.add(&rule.divergence(x, &xbar)?);
    }
    let nn = T::from_int(n as i64);
    Ok(OnlineOffline {
        offline: off_acc.total() / nn.clone(),
        online: online_acc.total() / nn.clone(),
        increment_sum: incr_acc.total() / nn,
        increments,
    })
}

/// Calibration bounded by the quadratic score: `K^L ≤ M_b √K` and, for
/// Lipschitz rules, `K^L ≤ M_L K`.
#[derive(Clone, Debug)]
pub struct CalibrationBound<T: Scalar> {
    pub k_rule: T,
    pub k_quadratic: T,
    pub bounded_route: Option<bool>,
    pub lipschitz_route: Option<bool>,
    pub holds: bool,
}

pub fn calibration_bound_check<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
    binning: &GeneralBinning<T>,
) -> Result<CalibrationBound<T>> {
    if rule.declared_bound().is_none() && rule.declared_lipschitz().is_none() {
        return Err(Error::MissingConstant("bound or lipschitz"));
    }
    let k_rule = calibration(rule, actions, forecasts, binning)?;
    let quad = make_quadratic::<T>(rule.action_set());
    let k_quad = calibration(&quad, actions, forecasts, binning)?;
    let kl = k_rule.to_f64();
    let kq = k_quad.to_f64();
    let bounded_route = rule.declared_bound().map(|m| kl <= m * kq.max(0.0).sqrt() + BOUND_TOL);
    let lipschitz_route = rule.declared_lipschitz().map(|m| kl <= m * kq + BOUND_TOL);
    let holds = bounded_route.unwrap_or(true) && lipschitz_route.unwrap_or(true);
    Ok(CalibrationBound { k_rule, k_quadratic: k_quad, bounded_route, lipschitz_route, holds })
}

/// Refinement can only decrease under refinement of the binning.
#[derive(Clone, Debug)]
pub struct RefinementMonotonicity<T: Scalar> {
    pub r_fine: T,
    pub r_coarse: T,
    pub holds: bool,
}

pub fn refinement_monotonicity_check<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    fine: &GeneralBinning<T>,
    coarse: &GeneralBinning<T>,
    witness: &RefinementWitness,
) -> Result<RefinementMonotonicity<T>> {
    if !check_refines(fine, coarse, witness) {
        return Err(Error::NotARefinement("witness equations fail".into()));
    }
    let r_fine = refinement(rule, actions, fine)?;
    let r_coarse = refinement(rule, actions, coarse)?;
    let holds = if T::EXACT {
        r_fine <= r_coarse
    } else {
        r_fine.to_f64() <= r_coarse.to_f64() + MONO_TOL
    };
    Ok(RefinementMonotonicity { r_fine, r_coarse, holds })
}

/// The chain `K(c; fine) ≥ K(c; mid) ≥ K(c)` for binnings refining the
/// forecasts.
#[derive(Clone, Debug)]
pub struct CalibrationChain<T: Scalar> {
    pub k_fine: T,
    pub k_mid: T,
    pub k_forecast: T,
    pub holds: bool,
}

pub fn calibration_monotonicity_check<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
    fine: &GeneralBinning<T>,
    mid: &GeneralBinning<T>,
    witness_fine_to_mid: &RefinementWitness,
) -> Result<CalibrationChain<T>> {
    if !check_refines(fine, mid, witness_fine_to_mid) {
        return Err(Error::NotARefinement("fine does not refine mid".into()));
    }
    if !forecast_refining(mid, forecasts, 1e-9) || !forecast_refining(fine, forecasts, 1e-9) {
        return Err(Error::NotARefinement("chain does not refine the forecasts".into()));
    }
    let k_fine = calibration(rule, actions, forecasts, fine)?;
    let k_mid = calibration(rule, actions, forecasts, mid)?;
    let byf = from_forecasts(forecasts, 1e-9).to_general::<T>();
    let k_forecast = calibration(rule, actions, forecasts, &byf)?;
    let ok = |a: &T, b: &T| {
        if T::EXACT {
            a >= b
        } else {
            a.to_f64() >= b.to_f64() - MONO_TOL
        }
    };
    let holds = ok(&k_fine, &k_mid) && ok(&k_mid, &k_forecast);
    Ok(CalibrationChain { k_fine, k_mid, k_forecast, holds })
}

/// Full per-(rule, binning) report.
#[derive(Clone, Debug)]
pub struct ScoreReport<T: Scalar> {
    pub rule: String,
    pub binning: String,
    pub t: usize,
    pub brier: T,
    pub calibration: T,
    pub refinement: T,
    pub avg_entropy: T,
    pub decomposition_residual: Option<T>,
}

impl<T: Scalar> ScoreReport<T> {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "rule": self.rule,
            "binning": self.binning,
            "t": self.t,
            "brier": self.brier.to_json(),
            "calibration": self.calibration.to_json(),
            "refinement": self.refinement.to_json(),
            "avg_entropy": self.avg_entropy.to_json(),
            "decomposition_residual": self.decomposition_residual.as_ref().map(|r| r.to_json()),
        })
    }

    pub fn csv_header() -> &'static str {
        "rule,binning,t,brier,calibration,refinement,avg_entropy,decomposition_residual"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.rule,
            self.binning,
            self.t,
            self.brier.to_display_string(),
            self.calibration.to_display_string(),
            self.refinement.to_display_string(),
            self.avg_entropy.to_display_string(),
            self.decomposition_residual
                .as_ref()
                .map(|r| r.to_display_string())
                .unwrap_or_default(),
        )
    }
}

/// Compute all scores of one transcript against one binning.  The
/// decomposition residual is reported only when the binning refines the
/// forecasts (where it must vanish).
pub fn score_report<T: Scalar>(
    rule: &ScoringRule<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
    binning: &GeneralBinning<T>,
    binning_name: &str,
) -> Result<ScoreReport<T>> {
    let b = brier(rule, actions, forecasts)?;
    let k = calibration(rule, actions, forecasts, binning)?;
    let r = refinement(rule, actions, binning)?;
    let h = avg_entropy(rule, actions)?;
    let residual = if forecast_refining(binning, forecasts, 1e-9) {
        Some(b.clone() - k.clone() - r.clone())
    } else {
        None
    };
    Ok(ScoreReport {
        rule: rule.id().to_string(),
        binning: binning_name.to_string(),
        t: actions.len(),
        brier: b,
        calibration: k,
        refinement: r,
        avg_entropy: h,
        decomposition_residual: residual,
    })
}
