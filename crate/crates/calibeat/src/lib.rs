//! Evaluation and generation of probability forecasts under bounded and
//! Lipschitz proper scoring rules.
//!
//! The crate computes Brier/calibration/refinement decompositions of
//! forecast sequences for an extensible catalog of proper scoring rules,
//! runs calibeating procedures with their quantitative guarantees, verifies
//! the equivalence between forecast-based regret and induced-rule
//! calibration, and implements the weighted row/column-averaging theory
//! that characterizes when calibeating transfers across scoring rules.
//!
//! Scores can be computed in `f64` or in exact rational arithmetic
//! ([`num::Rat`]); the exact backend turns the decomposition identities
//! into literal equalities.

pub mod binning;
pub mod decision;
pub mod error;
pub mod num;
pub mod procedures;
pub mod rowcol;
pub mod sampling;
pub mod scores;
pub mod scoring;
pub mod simplex;
pub mod transcript;

pub use error::{Error, Result};
pub use num::{Rat, Scalar};
pub use simplex::{ActionSet, Dist};

use decision::{TieBreak, Utility};
use scoring::ScoringRule;

/// Parse a rule id from the catalog: `quadratic`, `spherical:α`,
/// `power:α`, `step`, `induced:<utility-id>` (resolved against the given
/// utilities).  A `lip1(...)` or `bnd1(...)` wrapper normalizes the rule.
pub fn parse_rule<T: Scalar>(
    id: &str,
    actions: &ActionSet,
    utilities: &[Utility<T>],
) -> Result<ScoringRule<T>> {
    let id = id.trim();
    if let Some(inner) = id.strip_prefix("lip1(").and_then(|s| s.strip_suffix(')')) {
        let rule = parse_rule(inner, actions, utilities)?;
        return scoring::normalize_rule(&rule, scoring::NormalizeMode::Lipschitz);
    }
    if let Some(inner) = id.strip_prefix("bnd1(").and_then(|s| s.strip_suffix(')')) {
        let rule = parse_rule(inner, actions, utilities)?;
        return scoring::normalize_rule(&rule, scoring::NormalizeMode::Bounded);
    }
    if id == "quadratic" {
        return Ok(scoring::make_quadratic(actions));
    }
    if id == "step" {
        return scoring::make_step_rule(actions, true);
    }
    if let Some(alpha) = id.strip_prefix("spherical:") {
        let alpha: f64 =
            alpha.parse().map_err(|_| Error::UnknownRule(id.to_string()))?;
        return scoring::make_spherical(actions, alpha);
    }
    if let Some(alpha) = id.strip_prefix("power:") {
        let alpha: f64 =
            alpha.parse().map_err(|_| Error::UnknownRule(id.to_string()))?;
        return scoring::make_power(actions, alpha);
    }
    if let Some(uid) = id.strip_prefix("induced:") {
        if uid == "match" {
            return scoring::make_induced_rule(Utility::match_action(actions, TieBreak::Highest));
        }
        let u = utilities
            .iter()
            .find(|u| u.id() == uid)
            .ok_or_else(|| Error::UnknownRule(id.to_string()))?;
        return scoring::make_induced_rule(u.clone());
    }
    Err(Error::UnknownRule(id.to_string()))
}
