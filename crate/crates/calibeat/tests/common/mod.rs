//! Shared instance generators for the integration and acceptance suites.
#![allow(dead_code)] // each test target uses a different subset

use calibeat::binning::{BinId, GeneralBinning, PureBinning, RefinementWitness};
use calibeat::num::Scalar;
use calibeat::sampling::{sample_dist, seeded_rng};
use calibeat::simplex::{ActionSet, Dist};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// A random transcript whose forecasts are drawn from a small pool (so the
/// by-forecast binning has repeating bins) and whose reference labels come
/// from `ref_bins` labels.
pub struct Instance<T: Scalar> {
    pub action_set: ActionSet,
    pub actions: Vec<usize>,
    pub forecasts: Vec<Dist<T>>,
    pub reference: PureBinning,
}

pub fn random_instance<T: Scalar>(
    rng: &mut ChaCha8Rng,
    t: usize,
    action_count: usize,
    pool_size: usize,
    ref_bins: usize,
) -> Instance<T> {
    let action_set = ActionSet::numbered(action_count).unwrap();
    let pool: Vec<Dist<T>> =
        (0..pool_size).map(|_| sample_dist::<T>(&action_set, rng, false)).collect();
    let actions: Vec<usize> = (0..t).map(|_| rng.random_range(0..action_count)).collect();
    let forecasts: Vec<Dist<T>> =
        (0..t).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect();
    let reference = PureBinning::new(
        (0..t).map(|_| BinId::label(format!("r{}", rng.random_range(0..ref_bins)))).collect(),
    );
    Instance { action_set, actions, forecasts, reference }
}

/// A random fractional binning over `bins` ids: each period spreads its
/// mass over one to three bins.
pub fn random_fractional<T: Scalar>(
    rng: &mut ChaCha8Rng,
    t: usize,
    bins: usize,
) -> GeneralBinning<T> {
    let periods = (0..t)
        .map(|_| {
            let k = rng.random_range(1..=3usize.min(bins));
            let mut chosen: Vec<usize> = Vec::new();
            while chosen.len() < k {
                let b = rng.random_range(0..bins);
                if !chosen.contains(&b) {
                    chosen.push(b);
                }
            }
            let raw: Vec<i64> = (0..k).map(|_| rng.random_range(1..=6i64)).collect();
            let total: i64 = raw.iter().sum();
            chosen
                .into_iter()
                .zip(raw)
                .map(|(b, w)| (BinId::label(format!("f{b}")), T::from_ratio(w, total)))
                .collect()
        })
        .collect();
    GeneralBinning::new(periods).unwrap()
}

/// Coarsen a general binning by a random partition of its support;
/// returns the coarse binning and the witness.
pub fn random_coarsening<T: Scalar>(
    rng: &mut ChaCha8Rng,
    fine: &GeneralBinning<T>,
    groups: usize,
) -> (GeneralBinning<T>, RefinementWitness) {
    let support: Vec<BinId> = {
        let mut v: Vec<BinId> = fine.support().into_iter().collect();
        v.sort();
        v
    };
    let mut map = HashMap::new();
    for id in &support {
        let g = rng.random_range(0..groups.max(1));
        map.insert(id.clone(), BinId::label(format!("g{g}")));
    }
    let witness = RefinementWitness::new(map.clone());
    let periods = fine
        .iter()
        .map(|fs| {
            let mut acc: HashMap<BinId, T> = HashMap::new();
            for (id, w) in fs {
                let coarse = map[id].clone();
                let e = acc.entry(coarse).or_insert_with(T::zero);
                *e = e.clone() + w.clone();
            }
            let mut v: Vec<(BinId, T)> = acc.into_iter().collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        })
        .collect();
    (GeneralBinning::new(periods).unwrap(), witness)
}

/// Fractional binning that refines the by-forecast binning: each forecast
/// value's mass is split across sub-bins private to that value.
pub fn random_forecast_refining<T: Scalar>(
    rng: &mut ChaCha8Rng,
    forecasts: &[Dist<T>],
    splits: usize,
) -> GeneralBinning<T> {
    let periods = forecasts
        .iter()
        .map(|c| {
            let base = BinId::from_value_key(c, 1e-9);
            let k = rng.random_range(1..=splits.max(1));
            let raw: Vec<i64> = (0..k).map(|_| rng.random_range(1..=5i64)).collect();
            let total: i64 = raw.iter().sum();
            raw.into_iter()
                .enumerate()
                .map(|(i, w)| {
                    (BinId::pair(base.clone(), BinId::label(format!("s{i}"))), T::from_ratio(w, total))
                })
                .collect()
        })
        .collect();
    GeneralBinning::new(periods).unwrap()
}

/// All float-backend catalog rules used by the randomized harnesses.
pub fn float_catalog(actions: &ActionSet) -> Vec<calibeat::scoring::ScoringRule<f64>> {
    let mut rules = vec![
        calibeat::scoring::make_quadratic::<f64>(actions),
        calibeat::scoring::make_spherical::<f64>(actions, 2.0).unwrap(),
        calibeat::scoring::make_power::<f64>(actions, 3.0).unwrap(),
    ];
    if actions.size() == 2 {
        rules.push(calibeat::scoring::make_step_rule::<f64>(actions, true).unwrap());
    }
    rules.push(
        calibeat::scoring::make_induced_rule(calibeat::decision::Utility::match_action(
            actions,
            calibeat::decision::TieBreak::Highest,
        ))
        .unwrap(),
    );
    rules
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    seeded_rng(seed)
}
