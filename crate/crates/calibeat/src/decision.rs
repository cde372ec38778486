//! Decision-making under uncertainty: utilities, best replies, induced
//! scoring rules, and the regret = calibration identity.
//!
//! A utility `u : A × X → R` induces the scoring rule
//! `L(a, c) = −u(a, x*(c))`, the disutility of best-replying to the
//! forecast.  Best-replying to a forecast sequence then earns average
//! utility `−B − H` under the induced rule, and the maximal gain from
//! re-mapping bins to decisions is exactly the induced calibration score.

use crate::binning::{BinId, PureBinning};
use crate::error::{Error, Result};
use crate::num::{Accumulator, Scalar};
use crate::scores;
use crate::scoring::ScoringRule;
use crate::simplex::{ActionSet, Dist, VectorAverage};
use std::collections::HashMap;

/// Tie-breaking among optimal decisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Lowest decision index wins (default, reproducible).
    #[default]
    Lowest,
    /// Highest decision index wins.
    Highest,
}

#[derive(Clone, Debug)]
pub enum UtilityKind<T: Scalar> {
    /// Finite decision set with an explicit payoff table `payoff[a][x]`.
    Finite { decisions: Vec<String>, payoff: Vec<Vec<T>> },
    /// Decisions are forecasts themselves: `X = C`, `u(a, x) = −L_A(a, x)`;
    /// the optimal decision is `x*(d) = d` by properness.
    SelfScore(Box<ScoringRule<T>>),
}

/// A utility function over actions and decisions, with its optimal-decision
/// selector.
#[derive(Clone, Debug)]
pub struct Utility<T: Scalar> {
    id: String,
    actions: ActionSet,
    kind: UtilityKind<T>,
    tie: TieBreak,
}

/// A chosen decision: an index into a finite decision set, or a forecast
/// point when decisions are forecasts.
#[derive(Clone, Debug, PartialEq)]
pub enum Decision<T: Scalar> {
    Index(usize),
    Point(Dist<T>),
}

impl<T: Scalar> Utility<T> {
    pub fn finite(
        id: impl Into<String>,
        actions: &ActionSet,
        decisions: Vec<String>,
        payoff: Vec<Vec<T>>,
        tie: TieBreak,
    ) -> Result<Self> {
        if decisions.is_empty() {
            return Err(Error::EmptyInput);
        }
        if payoff.len() != actions.size() {
            return Err(Error::LengthMismatch(payoff.len(), actions.size()));
        }
        for row in &payoff {
            if row.len() != decisions.len() {
                return Err(Error::LengthMismatch(row.len(), decisions.len()));
            }
        }
        Ok(Utility {
            id: id.into(),
            actions: actions.clone(),
            kind: UtilityKind::Finite { decisions, payoff },
            tie,
        })
    }

    /// The missmatch-penalty utility `u(a, x) = −1_{a≠x}` with `X = A`.
    pub fn match_action(actions: &ActionSet, tie: TieBreak) -> Self {
        let n = actions.size();
        let payoff = (0..n)
            .map(|a| (0..n).map(|x| if a == x { T::zero() } else { -T::one() }).collect())
            .collect();
        Utility::finite("match", actions, actions.labels().to_vec(), payoff, tie).unwrap()
    }

    /// Wrap a proper scoring rule as the utility `u(a, c) = −L_A(a, c)` with
    /// `X = C`, whose optimal decision is the forecast itself.
    pub fn from_rule(rule: ScoringRule<T>) -> Self {
        Utility {
            id: format!("neg({})", rule.id()),
            actions: rule.action_set().clone(),
            kind: UtilityKind::SelfScore(Box::new(rule)),
            tie: TieBreak::Lowest,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn action_set(&self) -> &ActionSet {
        &self.actions
    }

    pub fn kind(&self) -> &UtilityKind<T> {
        &self.kind
    }

    pub fn tie(&self) -> TieBreak {
        self.tie
    }

    pub fn num_decisions(&self) -> Option<usize> {
        match &self.kind {
            UtilityKind::Finite { decisions, .. } => Some(decisions.len()),
            UtilityKind::SelfScore(_) => None,
        }
    }

    /// Payoff `u(a, x)` for a finite decision index.
    pub fn payoff(&self, action: usize, decision: usize) -> T {
        match &self.kind {
            UtilityKind::Finite { payoff, .. } => payoff[action][decision].clone(),
            UtilityKind::SelfScore(_) => panic!("payoff by index needs a finite decision set"),
        }
    }

    /// Expected utility `U(d, x) = E_{a∼d} u(a, x)`.
    pub fn expected(&self, d: &Dist<T>, decision: &Decision<T>) -> Result<T> {
        if !d.action_set().same_as(&self.actions) {
            return Err(Error::ActionSetMismatch);
        }
        match (&self.kind, decision) {
            (UtilityKind::Finite { payoff, .. }, Decision::Index(x)) => {
                let mut acc = T::Acc::new();
                for (a, w) in d.weights().iter().enumerate() {
                    if !w.is_zero() {
                        acc.add(&(w.clone() * payoff[a][*x].clone()));
                    }
                }
                Ok(acc.total())
            }
            (UtilityKind::SelfScore(rule), Decision::Point(x)) => {
                Ok(-(rule.expected_loss(d, x)?))
            }
            _ => Err(Error::OptimizerFailure("decision kind mismatch".into())),
        }
    }

    /// An optimal decision `x*(d)` (maximizer of `U(d, ·)`), with the
    /// configured tie-breaking.
    pub fn optimal_decision(&self, d: &Dist<T>) -> Result<Decision<T>> {
        if !d.action_set().same_as(&self.actions) {
            return Err(Error::ActionSetMismatch);
        }
        match &self.kind {
            UtilityKind::SelfScore(_) => Ok(Decision::Point(d.clone())),
            UtilityKind::Finite { decisions, payoff } => {
                let mut best: Option<(usize, T)> = None;
                for x in 0..decisions.len() {
                    let mut acc = T::Acc::new();
                    for (a, w) in d.weights().iter().enumerate() {
                        if !w.is_zero() {
                            acc.add(&(w.clone() * payoff[a][x].clone()));
                        }
                    }
                    let v = acc.total();
                    let better = match &best {
                        None => true,
                        Some((_, bv)) => match self.tie {
                            TieBreak::Lowest => v > *bv,
                            TieBreak::Highest => v >= *bv,
                        },
                    };
                    if better {
                        best = Some((x, v));
                    }
                }
                best.map(|(x, _)| Decision::Index(x))
                    .ok_or_else(|| Error::OptimizerFailure("no maximizer".into()))
            }
        }
    }

    /// Highest expected utility `V(d) = U(d, x*(d))`.
    pub fn best_value(&self, d: &Dist<T>) -> Result<T> {
        let x = self.optimal_decision(d)?;
        self.expected(d, &x)
    }

    /// Realized payoff `u(a, x*(c))` of best-replying to `c` when action `a`
    /// occurs.
    pub fn best_reply_payoff(&self, action: usize, c: &Dist<T>) -> Result<T> {
        match (&self.kind, self.optimal_decision(c)?) {
            (UtilityKind::Finite { payoff, .. }, Decision::Index(x)) => {
                Ok(payoff[action][x].clone())
            }
            (UtilityKind::SelfScore(rule), Decision::Point(x)) => {
                Ok(-rule.loss_of_action(action, &x))
            }
            _ => unreachable!(),
        }
    }

    /// Scale so that the induced scoring rule is 1-bounded (divide by the
    /// payoff range over decisions); returns the utility unchanged when no
    /// finite bound is available.
    pub fn normalized_bounded(&self) -> Self
    where
        T: Scalar,
    {
        match &self.kind {
            UtilityKind::Finite { decisions, payoff } => {
                let mut range = 0.0f64;
                for x in 0..decisions.len() {
                    for y in 0..decisions.len() {
                        let mut sq = 0.0;
                        for row in payoff {
                            let d = row[x].to_f64() - row[y].to_f64();
                            sq += d * d;
                        }
                        range = range.max(sq.sqrt());
                    }
                }
                if range <= 0.0 {
                    return self.clone();
                }
                let scale = T::from_f64_approx(1.0 / range);
                let payoff = payoff
                    .iter()
                    .map(|row| row.iter().map(|v| v.clone() * scale.clone()).collect())
                    .collect();
                Utility {
                    id: format!("norm({})", self.id),
                    actions: self.actions.clone(),
                    kind: UtilityKind::Finite { decisions: decisions.clone(), payoff },
                    tie: self.tie,
                }
            }
            UtilityKind::SelfScore(_) => self.clone(),
        }
    }
}

/// Report of regret against a binning, with the matched calibration score.
#[derive(Clone, Debug)]
pub struct RegretReport<T: Scalar> {
    pub avg_utility: T,
    pub best_remap_utility: T,
    pub regret: T,
    pub matched_calibration: T,
    /// Brute-force maximum over all maps `ξ : I → X`, when the search space
    /// is small enough; equals `best_remap_utility` by per-bin linearity.
    pub brute_force_remap: Option<T>,
}

/// Average realized payoff of best-replying to forecasts.
pub fn avg_utility<T: Scalar>(
    u: &Utility<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
) -> Result<T> {
    if actions.len() != forecasts.len() {
        return Err(Error::LengthMismatch(actions.len(), forecasts.len()));
    }
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut acc = T::Acc::new();
    for (a, c) in actions.iter().zip(forecasts) {
        acc.add(&u.best_reply_payoff(*a, c)?);
    }
    Ok(acc.total() / T::from_int(actions.len() as i64))
}

/// Per-bin action averages of a pure binning.
fn bin_averages<T: Scalar>(
    action_set: &ActionSet,
    actions: &[usize],
    binning: &PureBinning,
) -> Vec<(BinId, T, Dist<T>)> {
    let mut order: Vec<BinId> = Vec::new();
    let mut accs: HashMap<BinId, VectorAverage<T>> = HashMap::new();
    for (a, id) in actions.iter().zip(binning.ids()) {
        let acc = accs.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            VectorAverage::new(action_set.clone(), action_set.size())
        });
        acc.add_pure(*a, &T::one());
    }
    order
        .into_iter()
        .map(|id| {
            let acc = &accs[&id];
            (id.clone(), acc.total_weight(), acc.dist().expect("bin has entries"))
        })
        .collect()
}

/// Regret of best-replying to forecasts, measured against any binning that
/// refines them, together with the matched induced-rule calibration score.
///
/// The optimal remap takes `ξ(i) = x*(ā_t(i))` in each bin; on instances
/// with `|X|^|I| ≤ brute_force_limit` the maximum is additionally computed
/// by exhaustive search over all maps.
pub fn regret<T: Scalar>(
    u: &Utility<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
    binning: &PureBinning,
    brute_force_limit: u64,
) -> Result<RegretReport<T>> {
    if actions.len() != forecasts.len() {
        return Err(Error::LengthMismatch(actions.len(), forecasts.len()));
    }
    if binning.len() != actions.len() {
        return Err(Error::LengthMismatch(binning.len(), actions.len()));
    }
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    scores::require_forecast_refining(binning, forecasts)?;

    let t = T::from_int(actions.len() as i64);
    let avg = avg_utility(u, actions, forecasts)?;

    let bins = bin_averages::<T>(u.action_set(), actions, binning);
    let mut acc = T::Acc::new();
    for (_, n, abar) in &bins {
        acc.add(&(n.clone() * u.best_value(abar)?));
    }
    let best_remap = acc.total() / t.clone();

    let brute = match (u.num_decisions(), &u.kind) {
        (Some(nx), UtilityKind::Finite { payoff, .. })
            if (nx as f64).powi(bins.len() as i32) <= brute_force_limit as f64 =>
        {
            // Total payoff of every map ξ : bins → X.
            let k = bins.len();
            let mut best: Option<T> = None;
            let mut choice = vec![0usize; k];
            loop {
                let mut acc = T::Acc::new();
                for (bi, (_, n, abar)) in bins.iter().enumerate() {
                    let x = choice[bi];
                    for (a, w) in abar.weights().iter().enumerate() {
                        if !w.is_zero() {
                            acc.add(&(n.clone() * w.clone() * payoff[a][x].clone()));
                        }
                    }
                }
                let v = acc.total() / t.clone();
                if best.as_ref().map_or(true, |b| v > *b) {
                    best = Some(v);
                }
                // next map in lexicographic order
                let mut pos = 0;
                loop {
                    if pos == k {
                        break;
                    }
                    choice[pos] += 1;
                    if choice[pos] < nx {
                        break;
                    }
                    choice[pos] = 0;
                    pos += 1;
                }
                if pos == k {
                    break;
                }
            }
            best
        }
        _ => None,
    };

    let induced = crate::scoring::make_induced_rule(u.clone())?;
    let matched = scores::calibration(&induced, actions, forecasts, &binning.to_general())?;

    Ok(RegretReport {
        regret: best_remap.clone() - avg.clone(),
        avg_utility: avg,
        best_remap_utility: best_remap,
        matched_calibration: matched,
        brute_force_remap: brute,
    })
}

/// Components of the utility-gain identity
/// `U_t(c) − U_t(b) = Reg_t(b; i) + (R_t^{L^u}(i) − B_t^{L^u}(c))`
/// for a binning `i` refining `b`.
#[derive(Clone, Debug)]
pub struct UtilityGain<T: Scalar> {
    pub utility_c: T,
    pub utility_b: T,
    pub regret_b: T,
    pub refinement_i: T,
    pub brier_c: T,
    /// `(U_t(c) − U_t(b)) − (Reg + R − B)`; zero when the identity holds.
    pub residual: T,
}

pub fn utility_gain_check<T: Scalar>(
    u: &Utility<T>,
    actions: &[usize],
    b_forecasts: &[Dist<T>],
    c_forecasts: &[Dist<T>],
    binning: &PureBinning,
) -> Result<UtilityGain<T>> {
    let rep = regret(u, actions, b_forecasts, binning, 0)?;
    let induced = crate::scoring::make_induced_rule(u.clone())?;
    let refinement_i = scores::refinement(&induced, actions, &binning.to_general())?;
    let brier_c = scores::brier(&induced, actions, c_forecasts)?;
    let utility_c = avg_utility(u, actions, c_forecasts)?;
    let gain = utility_c.clone() - rep.avg_utility.clone();
    let rhs = rep.regret.clone() + refinement_i.clone() - brier_c.clone();
    Ok(UtilityGain {
        utility_c,
        utility_b: rep.avg_utility,
        regret_b: rep.regret,
        refinement_i,
        brier_c,
        residual: gain - rhs,
    })
}

/// Swap regret (remaps keyed by the decision actually taken) next to the
/// forecast-based regret (remaps keyed by the forecast value).  The latter
/// can separate forecasts that share an optimal decision, so it is at least
/// as large.
pub fn swap_vs_forecast_regret<T: Scalar>(
    u: &Utility<T>,
    actions: &[usize],
    forecasts: &[Dist<T>],
) -> Result<(T, T)> {
    if actions.len() != forecasts.len() {
        return Err(Error::LengthMismatch(actions.len(), forecasts.len()));
    }
    if actions.is_empty() {
        return Err(Error::EmptySequence);
    }
    let t = T::from_int(actions.len() as i64);
    let avg = avg_utility(u, actions, forecasts)?;

    let remap_value = |ids: &[BinId]| -> Result<T> {
        let binning = PureBinning::new(ids.to_vec());
        let bins = bin_averages::<T>(u.action_set(), actions, &binning);
        let mut acc = T::Acc::new();
        for (_, n, abar) in &bins {
            acc.add(&(n.clone() * u.best_value(abar)?));
        }
        Ok(acc.total() / t.clone())
    };

    let decision_ids: Vec<BinId> = forecasts
        .iter()
        .map(|c| {
            Ok(match u.optimal_decision(c)? {
                Decision::Index(x) => BinId::label(format!("x{x}")),
                Decision::Point(p) => BinId::from_value_key(&p, 1e-9),
            })
        })
        .collect::<Result<_>>()?;
    let forecast_ids: Vec<BinId> =
        forecasts.iter().map(|c| BinId::from_value_key(c, 1e-9)).collect();

    let swap = remap_value(&decision_ids)? - avg.clone();
    let forecast = remap_value(&forecast_ids)? - avg;
    Ok((swap, forecast))
}
