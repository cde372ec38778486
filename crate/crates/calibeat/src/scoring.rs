//! Proper scoring rules: the catalog, expected losses, divergences,
//! entropies, and bound/Lipschitz constants.
//!
//! A rule is identified with its loss vector `c ↦ L(c) ∈ R^A`; the expected
//! loss is `L(d, c) = d · L(c)`, the entropy `H(c) = L(c, c)`, and the
//! divergence `D(d, c) = L(d, c) − L(d, d)` (nonnegative exactly when the
//! rule is proper).  Catalog:
//!
//! * `quadratic` — `L_A(a,c) = −2c(a) + ‖c‖²`, `D(d,c) = ‖c−d‖²`.
//! * `spherical:α` (α > 1) — `H(c) = −‖c‖_α`; Lipschitz for α ≥ 2.
//! * `power:α` (α ∉ {0,1}) — Tsallis family; `power:2` is `quadratic / 2`,
//!   negative α is proper but unbounded near the simplex boundary.
//! * `step` — binary, bounded, discontinuous at c = 1/2; the standard
//!   example of a bounded rule that is not Lipschitz.
//! * induced rules `L(a,c) = −u(a, x*(c))` from a utility `u`.
//!
//! Declared bound/Lipschitz constants are valid upper bounds (hard-coded
//! derivations where simple, conservative analytic bounds otherwise);
//! [`estimate_constants`] reports empirical lower bounds for comparison.

use crate::decision::{Decision, Utility, UtilityKind};
use crate::error::{Error, Result};
use crate::num::{Accumulator, Scalar};
use crate::sampling;
use crate::simplex::{ActionSet, Dist};

/// Properness slack accepted by the seeded verification sample.
pub const PROPERNESS_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum RuleKind<T: Scalar> {
    Quadratic,
    Spherical { alpha: f64 },
    Power { alpha: f64 },
    Step { upper_at_half: bool },
    Induced { utility: Utility<T> },
}

/// A proper scoring rule with declared regularity constants.
#[derive(Clone, Debug)]
pub struct ScoringRule<T: Scalar> {
    id: String,
    actions: ActionSet,
    kind: RuleKind<T>,
    scale: T,
    declared_bound: Option<f64>,
    declared_lipschitz: Option<f64>,
    proper: bool,
}

impl<T: Scalar> ScoringRule<T> {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn action_set(&self) -> &ActionSet {
        &self.actions
    }

    pub fn declared_bound(&self) -> Option<f64> {
        self.declared_bound
    }

    pub fn declared_lipschitz(&self) -> Option<f64> {
        self.declared_lipschitz
    }

    pub fn is_proper(&self) -> bool {
        self.proper
    }

    /// True when the loss is unbounded near the boundary of the simplex
    /// (negative-power rules); such rules are only evaluated at interior
    /// points in exact arithmetic.
    pub fn needs_interior(&self) -> bool {
        matches!(self.kind, RuleKind::Power { alpha } if alpha < 1.0)
    }

    /// The loss vector `L(c) = (L_A(a, c))_a`.
    pub fn loss_vector(&self, c: &Dist<T>) -> Vec<T> {
        let n = c.len();
        let base: Vec<T> = match &self.kind {
            RuleKind::Quadratic => {
                let mut sq = T::Acc::new();
                for w in c.weights() {
                    sq.add(&(w.clone() * w.clone()));
                }
                let norm_sq = sq.total();
                c.weights()
                    .iter()
                    .map(|w| norm_sq.clone() - T::from_int(2) * w.clone())
                    .collect()
            }
            RuleKind::Spherical { alpha } => {
                let a = *alpha;
                let mut s = T::Acc::new();
                for w in c.weights() {
                    s.add(&w.try_powf(a).expect("spherical needs a real backend"));
                }
                let denom = s.total().try_powf((a - 1.0) / a).expect("real backend");
                c.weights()
                    .iter()
                    .map(|w| {
                        -(w.try_powf(a - 1.0).expect("real backend") / denom.clone())
                    })
                    .collect()
            }
            RuleKind::Power { alpha } => {
                let a = *alpha;
                let pw = |w: &T, e: f64| -> T {
                    if e.fract() == 0.0 {
                        w.powi(e as i32)
                    } else {
                        w.try_powf(e).expect("fractional power needs a real backend")
                    }
                };
                let mut s = T::Acc::new();
                for w in c.weights() {
                    s.add(&pw(w, a));
                }
                let denom_a =
                    if a.fract() == 0.0 { T::from_int(a as i64) } else { T::from_f64_approx(a) };
                let shared = s.total() / denom_a;
                let inv_am1 = if (a - 1.0).fract() == 0.0 {
                    T::one() / T::from_int((a - 1.0) as i64)
                } else {
                    T::from_f64_approx(1.0 / (a - 1.0))
                };
                c.weights()
                    .iter()
                    .map(|w| shared.clone() - inv_am1.clone() * pw(w, a - 1.0))
                    .collect()
            }
            RuleKind::Step { upper_at_half } => {
                // Scalar convention: c is the probability of the action at
                // index 1; the branch at c = 1/2 follows the constructor flag.
                let p = c.weight(1);
                let half = T::from_ratio(1, 2);
                let upper = if *upper_at_half { *p >= half } else { *p > half };
                if upper {
                    vec![T::one(), T::zero()]
                } else {
                    vec![T::zero(), T::one()]
                }
            }
            RuleKind::Induced { utility } => match (utility.kind(), utility
                .optimal_decision(c)
                .expect("induced rule evaluated on its own action set"))
            {
                (UtilityKind::Finite { .. }, Decision::Index(x)) => {
                    (0..n).map(|a| -utility.payoff(a, x)).collect()
                }
                (UtilityKind::SelfScore(rule), Decision::Point(p)) => rule.loss_vector(&p),
                _ => unreachable!(),
            },
        };
        if self.scale == T::one() {
            base
        } else {
            base.into_iter().map(|x| x * self.scale.clone()).collect()
        }
    }

    /// Expected loss `L(d, c) = d · L(c)`.
    pub fn expected_loss(&self, d: &Dist<T>, c: &Dist<T>) -> Result<T> {
        if !d.action_set().same_as(&self.actions) || !c.action_set().same_as(&self.actions) {
            return Err(Error::ActionSetMismatch);
        }
        Ok(d.dot(&self.loss_vector(c)))
    }

    /// Loss of a realized action: `L_A(a, c)`.
    pub fn loss_of_action(&self, action: usize, c: &Dist<T>) -> T {
        self.loss_vector(c).swap_remove(action)
    }

    /// Divergence `D(d, c) = L(d, c) − L(d, d)`.
    pub fn divergence(&self, d: &Dist<T>, c: &Dist<T>) -> Result<T> {
        Ok(self.expected_loss(d, c)? - self.entropy(d))
    }

    /// Divergence from a realized action, `D(1_a, c) = L_A(a, c) − H(1_a)`.
    pub fn divergence_from_action(&self, action: usize, c: &Dist<T>) -> T {
        self.loss_of_action(action, c) - self.action_entropy(action)
    }

    /// Entropy `H(c) = L(c, c)`.
    pub fn entropy(&self, c: &Dist<T>) -> T {
        c.dot(&self.loss_vector(c))
    }

    /// Entropy at a pure action.
    pub fn action_entropy(&self, action: usize) -> T {
        let pure = Dist::pure(&self.actions, action);
        self.loss_of_action(action, &pure)
    }

    /// Multiply all losses by a positive factor (scores scale with it).
    pub fn scaled(&self, factor: T) -> ScoringRule<T> {
        let f = factor.to_f64();
        ScoringRule {
            id: format!("{}*{}", factor.to_display_string(), self.id),
            actions: self.actions.clone(),
            kind: self.kind.clone(),
            scale: self.scale.clone() * factor,
            declared_bound: self.declared_bound.map(|m| m * f),
            declared_lipschitz: self.declared_lipschitz.map(|m| m * f),
            proper: self.proper,
        }
    }
}

/// Run the seeded properness sample; all constructors call this so that the
/// `proper` flag is verified rather than trusted.
fn verify_proper<T: Scalar>(rule: &ScoringRule<T>) -> Result<()> {
    let mut rng = sampling::seeded_rng(0x5ca1ab1e);
    let interior = rule.needs_interior();
    for _ in 0..64 {
        let d = sampling::sample_dist::<T>(&rule.actions, &mut rng, interior);
        let c = sampling::sample_dist::<T>(&rule.actions, &mut rng, interior);
        let dv = rule.divergence(&d, &c)?;
        let ok = if T::EXACT { dv >= T::zero() } else { dv.to_f64() >= -PROPERNESS_TOL };
        if !ok {
            return Err(Error::OptimizerFailure(format!(
                "properness sample failed for {}: D = {}",
                rule.id(),
                dv.to_display_string()
            )));
        }
    }
    Ok(())
}

/// Quadratic (Brier) scoring rule.
///
/// Lipschitz constant: on the simplex `1·(c−c') = 0`, so
/// `‖L(c)−L(c')‖² = 4‖c−c'‖² + n((c+c')·(c−c'))² ≤ 4n‖c−c'‖²`,
/// giving the sharp constant `2√n`; the bound constant uses the diameter:
/// `2√n · √2`.
pub fn make_quadratic<T: Scalar>(actions: &ActionSet) -> ScoringRule<T> {
    let n = actions.size() as f64;
    let rule = ScoringRule {
        id: "quadratic".to_string(),
        actions: actions.clone(),
        kind: RuleKind::Quadratic,
        scale: T::one(),
        declared_bound: Some(2.0 * (2.0 * n).sqrt()),
        declared_lipschitz: Some(2.0 * n.sqrt()),
        proper: true,
    };
    verify_proper(&rule).expect("quadratic rule is proper");
    rule
}

/// α-spherical scoring rule, `H(c) = −‖c‖_α`, for α > 1.
///
/// `‖L(c)‖ = (‖c‖_{2(α−1)} / ‖c‖_α)^{α−1} ≤ n^{max(0, 2−α)/(2α)}`, and the
/// loss vectors have nonnegative dot products, so the bound constant is
/// `√2` for α ≥ 2 and `2·n^{(2−α)/(2α)}` for 1 < α < 2.  For α = 2 the rule
/// is the normalized projection `−c/‖c‖` with Lipschitz constant `√n`; for
/// α > 2 a conservative analytic constant is used.
pub fn make_spherical<T: Scalar>(actions: &ActionSet, alpha: f64) -> Result<ScoringRule<T>> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::BadAlpha(alpha, "spherical needs alpha > 1".into()));
    }
    if T::EXACT {
        return Err(Error::ExactUnsupported("spherical scoring"));
    }
    let n = actions.size() as f64;
    let bound =
        if alpha >= 2.0 { 2f64.sqrt() } else { 2.0 * n.powf((2.0 - alpha) / (2.0 * alpha)) };
    let lipschitz = if alpha == 2.0 {
        Some(n.sqrt())
    } else if alpha > 2.0 {
        Some(2.0 * (alpha - 1.0) * n)
    } else {
        None
    };
    let rule = ScoringRule {
        id: format!("spherical:{alpha}"),
        actions: actions.clone(),
        kind: RuleKind::Spherical { alpha },
        scale: T::one(),
        declared_bound: Some(bound),
        declared_lipschitz: lipschitz,
        proper: true,
    };
    verify_proper(&rule)?;
    Ok(rule)
}

/// α-power (Tsallis) scoring rule for α ∉ {0, 1}.
///
/// For α = 2 this is the quadratic rule divided by 2 (Lipschitz constant
/// `√n`); for α ≥ 2 the Jacobian bound `‖diag(c^{α−2})‖ + √n‖c^{α−1}‖ ≤
/// 1 + √n` applies.  For α < 1 the rule is proper but unbounded near the
/// boundary of the simplex.
pub fn make_power<T: Scalar>(actions: &ActionSet, alpha: f64) -> Result<ScoringRule<T>> {
    if alpha == 0.0 || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::BadAlpha(alpha, "power needs alpha outside {0,1}".into()));
    }
    if T::EXACT && alpha.fract() != 0.0 {
        return Err(Error::ExactUnsupported("fractional power scoring"));
    }
    let n = actions.size() as f64;
    let (bound, lipschitz) = if alpha >= 2.0 {
        let b = n.sqrt() * (1.0 / (alpha - 1.0) + 1.0 / alpha);
        let l = if alpha == 2.0 { n.sqrt() } else { 1.0 + n.sqrt() };
        (Some(b), Some(l))
    } else if alpha > 1.0 {
        (Some(n.sqrt() * (1.0 / (alpha - 1.0) + 1.0 / alpha)), None)
    } else {
        (None, None)
    };
    let rule = ScoringRule {
        id: format!("power:{alpha}"),
        actions: actions.clone(),
        kind: RuleKind::Power { alpha },
        scale: T::one(),
        declared_bound: bound,
        declared_lipschitz: lipschitz,
        proper: true,
    };
    verify_proper(&rule)?;
    Ok(rule)
}

/// Binary step rule: `L(d, c) = 1−d` when `c ≥ 1/2`, else `d` (scalars are
/// probabilities of the action at index 1).  Bounded (`√2`) but
/// discontinuous at `c = 1/2`, hence not Lipschitz.  `upper_at_half`
/// selects which branch the tie `c = 1/2` takes.
pub fn make_step_rule<T: Scalar>(actions: &ActionSet, upper_at_half: bool) -> Result<ScoringRule<T>> {
    if actions.size() != 2 {
        return Err(Error::WrongArity { expected: 2, got: actions.size() });
    }
    let rule = ScoringRule {
        id: "step".to_string(),
        actions: actions.clone(),
        kind: RuleKind::Step { upper_at_half },
        scale: T::one(),
        declared_bound: Some(2f64.sqrt()),
        declared_lipschitz: None,
        proper: true,
    };
    verify_proper(&rule)?;
    Ok(rule)
}

/// Scoring rule induced by a utility: `L_A(a, c) = −u(a, x*(c))`.
///
/// The bound constant for a finite decision set is the exact payoff spread
/// `max_{x,x'} ‖u(·,x) − u(·,x')‖`; induced rules are generally
/// discontinuous in `c`, so no Lipschitz constant is declared.
pub fn make_induced_rule<T: Scalar>(utility: Utility<T>) -> Result<ScoringRule<T>> {
    let bound = match utility.kind() {
        UtilityKind::Finite { decisions, payoff } => {
            let mut worst = 0.0f64;
            for x in 0..decisions.len() {
                for y in (x + 1)..decisions.len() {
                    let mut sq = 0.0;
                    for row in payoff {
                        let d = row[x].to_f64() - row[y].to_f64();
                        sq += d * d;
                    }
                    worst = worst.max(sq.sqrt());
                }
            }
            Some(worst)
        }
        UtilityKind::SelfScore(rule) => rule.declared_bound(),
    };
    let lipschitz = match utility.kind() {
        UtilityKind::SelfScore(rule) => rule.declared_lipschitz(),
        UtilityKind::Finite { .. } => None,
    };
    let rule = ScoringRule {
        id: format!("induced:{}", utility.id()),
        actions: utility.action_set().clone(),
        kind: RuleKind::Induced { utility },
        scale: T::one(),
        declared_bound: bound,
        declared_lipschitz: lipschitz,
        proper: true,
    };
    verify_proper(&rule)?;
    Ok(rule)
}

/// Normalization target for [`normalize_rule`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalizeMode {
    Bounded,
    Lipschitz,
}

/// Scale a rule by the inverse of its declared constant so it becomes
/// 1-bounded (resp. 1-Lipschitz).  Exact backends divide by the smallest
/// representable value ≥ the constant, which keeps the result inside the
/// normalized class.
pub fn normalize_rule<T: Scalar>(
    rule: &ScoringRule<T>,
    mode: NormalizeMode,
) -> Result<ScoringRule<T>> {
    let (m, tag) = match mode {
        NormalizeMode::Bounded => (
            rule.declared_bound.ok_or(Error::MissingConstant("bound"))?,
            "bnd1",
        ),
        NormalizeMode::Lipschitz => (
            rule.declared_lipschitz.ok_or(Error::MissingConstant("lipschitz"))?,
            "lip1",
        ),
    };
    if !(m > 0.0) {
        return Ok(rule.clone());
    }
    let mut scaled = rule.scaled(T::one() / T::from_f64_approx(m));
    scaled.id = format!("{tag}({})", rule.id);
    match mode {
        NormalizeMode::Bounded => scaled.declared_bound = Some(1.0),
        NormalizeMode::Lipschitz => scaled.declared_lipschitz = Some(1.0),
    }
    Ok(scaled)
}

/// Empirical lower bounds for the bound and Lipschitz constants from a
/// deterministic seeded sample of forecast pairs.  True constants can only
/// be larger; a diverging Lipschitz estimate flags a discontinuous rule.
pub fn estimate_constants<T: Scalar>(
    rule: &ScoringRule<T>,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = sampling::seeded_rng(seed);
    let interior = rule.needs_interior();
    let mut max_diff = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut pair = |c: Dist<T>, c2: Dist<T>| {
        let lc: Vec<f64> = rule.loss_vector(&c).iter().map(|x| x.to_f64()).collect();
        let lc2: Vec<f64> = rule.loss_vector(&c2).iter().map(|x| x.to_f64()).collect();
        let diff: f64 =
            lc.iter().zip(&lc2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let dist = crate::simplex::euclid_dist(&c, &c2).unwrap();
        max_diff = max_diff.max(diff);
        if dist > 1e-12 {
            max_ratio = max_ratio.max(diff / dist);
        }
    };
    for i in 0..samples.max(2) {
        let c = sampling::sample_dist::<T>(&rule.actions, &mut rng, interior);
        let c2 = sampling::sample_dist::<T>(&rule.actions, &mut rng, interior);
        pair(c.clone(), c2);
        // Nearby pairs probe the local Lipschitz ratio; straddling pairs at
        // ever-smaller separations expose discontinuities.
        if !T::EXACT && i % 2 == 0 {
            let eps = 10f64.powi(-((i % 12) as i32) - 2);
            let nearby = sampling::perturb_dist(&c, eps, &mut rng);
            pair(c, nearby);
        }
    }
    (max_diff, max_ratio)
}
