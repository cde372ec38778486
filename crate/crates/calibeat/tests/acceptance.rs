//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them on success).
//!
//! Tolerances are pinned in the asserts; seeds are fixed so every run is
//! reproducible.

mod common;

use calibeat::binning::{from_forecasts, joint, BinId, GeneralBinning};
use calibeat::decision::{self, TieBreak, Utility};
use calibeat::num::{Rat, Scalar};
use calibeat::procedures::{self, Adversary, Grid, Reference, ReferenceKind};
use calibeat::rowcol::{self, ConcaveFn, CounterexampleCase, WeightedMatrix};
use calibeat::sampling::sample_dist;
use calibeat::scores;
use calibeat::scoring::{self, make_quadratic, make_spherical, make_step_rule, NormalizeMode};
use calibeat::simplex::{ActionSet, Dist};
use calibeat::transcript;
use common::{random_instance, rng};
use rand::Rng;
use std::time::Instant;

fn pass(name: &str, started: Instant, detail: impl std::fmt::Display) {
    println!("acceptance {name}: PASS ({:.2?}) — {detail}", started.elapsed());
}

/// 1. Exact reproduction of the bundled ten-period table: quadratic
/// B(c) = 3/10 and R(b) = 8/25 in rational arithmetic; 2-spherical
/// B(c) = 0.6(1−1/√2) > R(b) = 1−√0.68 within 1e-9; invariant under
/// periodic extension m ∈ {1, 2, 5}.
#[test]
fn criterion_01_table_reproduction() {
    let t0 = Instant::now();
    let actions = ActionSet::binary();
    for m in [1usize, 2, 5] {
        let tr = transcript::example1::<Rat>(m);
        let q = make_quadratic::<Rat>(&actions);
        let c = tr.forecasts().unwrap();
        let b_binning = tr.reference().unwrap().binning().to_general::<Rat>();
        assert_eq!(scores::brier(&q, &tr.actions, c).unwrap(), Rat::from_ratio(3, 10));
        assert_eq!(
            scores::refinement(&q, &tr.actions, &b_binning).unwrap(),
            Rat::from_ratio(8, 25)
        );

        let trf = transcript::example1::<f64>(m);
        let s = make_spherical::<f64>(&actions, 2.0).unwrap();
        let bc = scores::brier(&s, &trf.actions, trf.forecasts().unwrap()).unwrap();
        let rb = scores::refinement(
            &s,
            &trf.actions,
            &trf.reference().unwrap().binning().to_general::<f64>(),
        )
        .unwrap();
        assert!((bc - 0.6 * (1.0 - 1.0 / 2f64.sqrt())).abs() <= 1e-9);
        assert!((rb - (1.0 - 0.68f64.sqrt())).abs() <= 1e-9);
        assert!(bc > rb);
    }
    pass("01 table reproduction", t0, "B=3/10 < R(b)=8/25 flips under the 2-spherical rule");
}

/// 2. Decomposition residual `B − K − R`: zero in rationals, ≤ 1e-10 in
/// floats, over 500 random instances × {by-forecast, joint} binnings ×
/// the rule catalog.
#[test]
fn criterion_02_decomposition() {
    let t0 = Instant::now();
    let mut r = rng(0xC2);
    let mut float_checks = 0usize;
    let mut exact_checks = 0usize;
    for i in 0..500 {
        let n = if i % 2 == 0 { 2 } else { 3 };
        let t = r.random_range(1..=200usize);
        let inst = random_instance::<f64>(&mut r, t, n, 4, 3);
        let byf = from_forecasts(&inst.forecasts, 1e-9);
        let jb = joint(&inst.reference, &byf).unwrap();
        for rule in common::float_catalog(&inst.action_set) {
            for binning in [&byf, &jb] {
                let res = scores::decomposition_check(
                    &rule,
                    &inst.actions,
                    &inst.forecasts,
                    &binning.to_general::<f64>(),
                )
                .unwrap();
                assert!(res.abs() <= 1e-10, "{}: residual {res}", rule.id());
                float_checks += 1;
            }
        }
        if i % 5 == 0 {
            let inst = random_instance::<Rat>(&mut r, t.min(120), 2, 3, 2);
            let byf = from_forecasts(&inst.forecasts, 1e-9);
            let jb = joint(&inst.reference, &byf).unwrap();
            let a2 = &inst.action_set;
            let rules = [
                make_quadratic::<Rat>(a2),
                scoring::make_power::<Rat>(a2, 3.0).unwrap(),
                make_step_rule::<Rat>(a2, true).unwrap(),
                scoring::make_induced_rule(Utility::match_action(a2, TieBreak::Highest)).unwrap(),
            ];
            for rule in &rules {
                for binning in [&byf, &jb] {
                    let res = scores::decomposition_check(
                        rule,
                        &inst.actions,
                        &inst.forecasts,
                        &binning.to_general::<Rat>(),
                    )
                    .unwrap();
                    assert!(res.is_zero(), "{}: exact residual {res:?}", rule.id());
                    exact_checks += 1;
                }
            }
        }
    }
    pass(
        "02 decomposition",
        t0,
        format!("{float_checks} float residuals ≤ 1e-10, {exact_checks} exact residuals = 0"),
    );
}

/// 3. δ-local approximate decomposition: |B − K − R| < 2·M_L·δ on 200
/// random fractional grid binnings per δ ∈ {0.05, 0.1, 0.2}.
#[test]
fn criterion_03_delta_local_decomposition() {
    let t0 = Instant::now();
    let actions = ActionSet::binary();
    let rules = [
        make_quadratic::<f64>(&actions),
        make_spherical::<f64>(&actions, 2.0).unwrap(),
        scoring::make_power::<f64>(&actions, 2.0).unwrap(),
        scoring::make_power::<f64>(&actions, 3.0).unwrap(),
    ];
    let mut r = rng(0xC3);
    let mut checks = 0usize;
    for delta in [0.05f64, 0.1, 0.2] {
        // scalar centers at spacing δ/3: every forecast is split between
        // its two flanking centers, both within δ in the plane.
        let h = delta / 3.0;
        let k_max = (1.0 / h).ceil() as usize;
        let center = |k: usize| Dist::binary((k as f64 * h).min(1.0));
        for _ in 0..200 {
            let t = r.random_range(5..80usize);
            let acts: Vec<usize> = (0..t).map(|_| r.random_range(0..2)).collect();
            let forecasts: Vec<Dist<f64>> =
                (0..t).map(|_| sample_dist::<f64>(&actions, &mut r, false)).collect();
            let mut periods = Vec::with_capacity(t);
            for c in &forecasts {
                let p = c.scalar();
                let lo = ((p / h).floor() as usize).min(k_max);
                let hi = ((p / h).ceil() as usize).min(k_max);
                let frac = (p / h) - lo as f64;
                if lo == hi || frac <= 0.0 {
                    periods.push(vec![(BinId::label(format!("g{lo}")), 1.0)]);
                } else {
                    periods.push(vec![
                        (BinId::label(format!("g{lo}")), 1.0 - frac),
                        (BinId::label(format!("g{hi}")), frac),
                    ]);
                }
            }
            let binning = GeneralBinning::new(periods).unwrap();
            let centers: std::collections::HashMap<BinId, Dist<f64>> =
                (0..=k_max).map(|k| (BinId::label(format!("g{k}")), center(k))).collect();
            for rule in &rules {
                let (res, bound) = scores::delta_decomposition_check(
                    rule,
                    &acts,
                    &forecasts,
                    &binning,
                    delta,
                    Some(&centers),
                )
                .unwrap();
                assert!(res.abs() < bound, "{}: |{res}| ≥ {bound} at δ={delta}", rule.id());
                checks += 1;
            }
        }
    }
    pass("03 delta-local decomposition", t0, format!("{checks} residuals inside 2·M_L·δ"));
}

/// 4. The simple running-average procedure calibeats every reference:
/// 0 ≤ B − R(b) ≤ 2|B|(ln t + 1)/t for all 1-Lipschitz-normalized catalog
/// rules, |B| ∈ {2, 5}, t ∈ {1e2, 1e3, 1e4, 1e5}, three adversaries.
#[test]
fn criterion_04_simple_calibeating_bound() {
    let t0 = Instant::now();
    let actions = ActionSet::binary();
    let rules: Vec<_> = ["quadratic", "spherical:2", "power:2", "power:3"]
        .iter()
        .map(|id| {
            scoring::normalize_rule(
                &calibeat::parse_rule::<f64>(id, &actions, &[]).unwrap(),
                NormalizeMode::Lipschitz,
            )
            .unwrap()
        })
        .collect();
    let adversaries = ["flip_farthest", "pattern:01", "stochastic:0.3"];
    let mut cells = 0usize;
    for bins in [2usize, 5] {
        for adv_id in adversaries {
            let sim = procedures::run_simple(
                &actions,
                Reference::new(ReferenceKind::Cycle(bins), 900 + bins as u64),
                Adversary::parse(adv_id, 900 + bins as u64, &actions).unwrap(),
                100_000,
                None,
            );
            for &t in &[100usize, 1_000, 10_000, 100_000] {
                let acts = &sim.actions[..t];
                let fore = &sim.forecasts[..t];
                let refb = calibeat::binning::PureBinning::new(sim.reference.ids()[..t].to_vec());
                let bound = 2.0 * bins as f64 * ((t as f64).ln() + 1.0) / t as f64;
                for rule in &rules {
                    let b = scores::brier(rule, acts, fore).unwrap();
                    let r = scores::refinement(rule, acts, &refb.to_general::<f64>()).unwrap();
                    let gap = b - r;
                    assert!(
                        gap >= -1e-10,
                        "{} |B|={bins} {adv_id} t={t}: negative gap {gap}",
                        rule.id()
                    );
                    assert!(
                        gap <= bound,
                        "{} |B|={bins} {adv_id} t={t}: gap {gap} > bound {bound}",
                        rule.id()
                    );
                    cells += 1;
                }
            }
        }
    }
    pass("04 simple calibeating bound", t0, format!("{cells} (rule,|B|,adversary,t) cells"));
}

/// 5. The bounded, non-Lipschitz step rule defeats the simple procedure:
/// B = 1 exactly, |R − 1/2| ≤ 1/t for even t, and B − R ≥ 0.4 for t ≥ 100.
#[test]
fn criterion_05_step_rule_failure() {
    let t0 = Instant::now();
    let actions = ActionSet::binary();
    let step = make_step_rule::<f64>(&actions, true).unwrap();
    let sim = procedures::run_simple(
        &actions,
        Reference::new(ReferenceKind::Constant, 0),
        Adversary::parse("pattern:01", 0, &actions).unwrap(),
        1000,
        Some(Dist::binary(0.5)),
    );
    // every period scores a full miss
    for (s, (a, c)) in sim.actions.iter().zip(&sim.forecasts).enumerate() {
        let d = step.divergence_from_action(*a, c);
        assert!((d - 1.0).abs() < 1e-14, "period {s}: D = {d}");
    }
    for t in (100..=1000).step_by(50) {
        let acts = &sim.actions[..t];
        let refb = calibeat::binning::PureBinning::new(sim.reference.ids()[..t].to_vec());
        let b = scores::brier(&step, acts, &sim.forecasts[..t]).unwrap();
        let r = scores::refinement(&step, acts, &refb.to_general::<f64>()).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
        if t % 2 == 0 {
            assert!((r - 0.5).abs() <= 1.0 / t as f64);
        }
        assert!(b - r >= 0.4, "t={t}: gap {}", b - r);
    }
    pass("05 step-rule failure", t0, "B = 1 while R(b) → 1/2");
}

/// 6. Online vs offline averaging: the increment identity is exact in
/// rationals on 100 random single-bin instances; the float gap obeys
/// 0 ≤ gap ≤ 2M(ln n + 1)/n for Lipschitz rules; the doubled
/// negative-power rule on the alternating sequence shows gap ≥ (n−2)/n.
#[test]
fn criterion_06_online_offline() {
    let t0 = Instant::now();
    let actions = ActionSet::binary();
    let q = make_quadratic::<Rat>(&actions);
    let mut r = rng(0xC6);
    for _ in 0..100 {
        let n = r.random_range(1..=100usize);
        let pts: Vec<Dist<Rat>> =
            (0..n).map(|_| sample_dist::<Rat>(&actions, &mut r, false)).collect();
        let seed = sample_dist::<Rat>(&actions, &mut r, false);
        let oo = scores::online_offline_identity(&q, &pts, &seed).unwrap();
        assert_eq!(oo.online.clone() - oo.offline.clone(), oo.increment_sum);
    }

    // float bound on a Lipschitz-normalized rule, single bin
    let lip = scoring::normalize_rule(&make_quadratic::<f64>(&actions), NormalizeMode::Lipschitz)
        .unwrap();
    for n in [50usize, 500, 5000] {
        let acts: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let binning = calibeat::binning::PureBinning::from_labels(vec!["i"; n]);
        let rep =
            scores::online_refinement(&lip, &acts, &binning, &Dist::uniform(&actions)).unwrap();
        let bound = rep.bound.unwrap();
        assert!(rep.gap >= -1e-12 && rep.gap <= bound + 1e-12);
    }

    // doubled negative-power rule: η_j = 1 + 1/((j−1)(j−2)²) exactly, so
    // the post-seeding gap is at least (n−2)/n.
    let unbounded = scoring::make_power::<Rat>(&actions, -1.0).unwrap().scaled(Rat::from_int(2));
    let n = 40usize;
    let pts: Vec<Dist<Rat>> = (0..n)
        .map(|j| Dist::pure(&actions, if j == 0 { 0 } else { 1 }))
        .collect();
    let mut avg: Option<Dist<Rat>> = None;
    let mut tail = <Rat as Scalar>::zero();
    let mut sums: Vec<Rat> = vec![<Rat as Scalar>::zero(); 2];
    for (j, x) in pts.iter().enumerate() {
        for (s, w) in sums.iter_mut().zip(x.weights()) {
            *s = s.clone() + w.clone();
        }
        let m = Rat::from_int((j + 1) as i64);
        let cur = Dist::new(
            &actions,
            sums.iter().map(|s| s.clone() / m.clone()).collect(),
        )
        .unwrap();
        if let Some(prev) = avg {
            if j + 1 >= 3 {
                let eta =
                    Rat::from_int((j + 1) as i64) * unbounded.divergence(&cur, &prev).unwrap();
                let jj = (j + 1) as i64;
                let expected = Rat::from_int(1)
                    + Rat::from_int(1) / Rat::from_int((jj - 1) * (jj - 2) * (jj - 2));
                assert_eq!(eta, expected, "η at j={}", j + 1);
                tail = tail + eta;
            }
        }
        avg = Some(cur);
    }
    let gap = tail / Rat::from_int(n as i64);
    assert!(gap >= Rat::from_ratio((n as i64) - 2, n as i64));
    pass("06 online/offline identity", t0, "exact increments, bounded float gap, unbounded-rule blowup");
}

/// 7. Calibration under any rule is controlled by quadratic calibration:
/// K^L ≤ M_b √K + 1e-9 and K^L ≤ M_L K + 1e-9 on 500 random triples.
#[test]
fn criterion_07_calibration_bounds() {
    let t0 = Instant::now();
    let mut r = rng(0xC7);
    let mut checks = 0usize;
    for i in 0..500 {
        let n = if i % 2 == 0 { 2 } else { 3 };
        let t = r.random_range(2..80usize);
        let inst = random_instance::<f64>(&mut r, t, n, 4, 3);
        let rules = common::float_catalog(&inst.action_set);
        let rule = &rules[i % rules.len()];
        let byf = from_forecasts(&inst.forecasts, 1e-9);
        let binning = if i % 3 == 0 {
            joint(&inst.reference, &byf).unwrap().to_general::<f64>()
        } else if i % 3 == 1 {
            byf.to_general::<f64>()
        } else {
            inst.reference.to_general::<f64>()
        };
        let rep =
            scores::calibration_bound_check(rule, &inst.actions, &inst.forecasts, &binning)
                .unwrap();
        assert!(
            rep.holds,
            "{}: K^L={} K={} routes {:?}/{:?}",
            rule.id(),
            rep.k_rule,
            rep.k_quadratic,
            rep.bounded_route,
            rep.lipschitz_route
        );
        checks += 1;
    }
    pass("07 calibration bounds", t0, format!("{checks} random (instance, rule, binning) triples"));
}

/// 8. Monotonicity: refinement shrinks and calibration grows along 500
/// random refinement chains, fractional binnings included.
#[test]
fn criterion_08_monotonicity_chains() {
    let t0 = Instant::now();
    let mut r = rng(0xC8);
    let actions = ActionSet::binary();
    let rules = common::float_catalog(&actions);
    let mut checks = 0usize;
    for i in 0..500 {
        let t = r.random_range(3..60usize);
        let acts: Vec<usize> = (0..t).map(|_| r.random_range(0..2)).collect();
        let rule = &rules[i % rules.len()];
        if i % 2 == 0 {
            let fine = common::random_fractional::<f64>(&mut r, t, 6);
            let (coarse, witness) = common::random_coarsening(&mut r, &fine, 3);
            let rep =
                scores::refinement_monotonicity_check(rule, &acts, &fine, &coarse, &witness)
                    .unwrap();
            assert!(rep.holds, "{}: {} ≤ {}", rule.id(), rep.r_fine, rep.r_coarse);
        } else {
            let forecasts: Vec<Dist<f64>> = {
                let pool: Vec<Dist<f64>> =
                    (0..3).map(|_| sample_dist::<f64>(&actions, &mut r, false)).collect();
                (0..t).map(|_| pool[r.random_range(0..3)].clone()).collect()
            };
            let fine = common::random_forecast_refining::<f64>(&mut r, &forecasts, 3);
            let support: Vec<BinId> = {
                let mut v: Vec<_> = fine.support().into_iter().collect();
                v.sort();
                v
            };
            let map: std::collections::HashMap<_, _> = support
                .iter()
                .map(|id| match id {
                    BinId::Tuple(parts) => (id.clone(), parts[0].clone()),
                    other => (other.clone(), other.clone()),
                })
                .collect();
            let witness = calibeat::binning::RefinementWitness::new(map.clone());
            let mid = GeneralBinning::new(
                fine.iter()
                    .map(|fs| {
                        let mut acc: std::collections::HashMap<BinId, f64> =
                            std::collections::HashMap::new();
                        for (id, w) in fs {
                            *acc.entry(map[id].clone()).or_insert(0.0) += w;
                        }
                        let mut v: Vec<_> = acc.into_iter().collect();
                        v.sort_by(|a, b| a.0.cmp(&b.0));
                        v
                    })
                    .collect(),
            )
            .unwrap();
            let chain = scores::calibration_monotonicity_check(
                rule, &acts, &forecasts, &fine, &mid, &witness,
            )
            .unwrap();
            assert!(chain.holds, "{}: K chain fails", rule.id());
        }
        checks += 1;
    }
    pass("08 monotonicity chains", t0, format!("{checks} chains"));
}

/// 9. Regret of best-replying equals induced-rule calibration (within
/// 1e-9) on 200 random instances; the exhaustive remap search agrees with
/// the per-bin argmax; the utility-gain identity closes to 1e-9; and the
/// forecast-based regret strictly dominates swap regret on the
/// constructed instance.
#[test]
fn criterion_09_regret_equals_calibration() {
    let t0 = Instant::now();
    let mut r = rng(0xC9);
    let mut brute_checked = 0usize;
    for i in 0..200 {
        let n = if i % 2 == 0 { 2 } else { 3 };
        let actions = ActionSet::numbered(n).unwrap();
        let nx = r.random_range(2..=3usize);
        let payoff: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..nx).map(|_| r.random_range(-2.0..2.0)).collect())
            .collect();
        let u = Utility::finite(
            format!("u{i}"),
            &actions,
            (0..nx).map(|x| format!("x{x}")).collect(),
            payoff,
            TieBreak::Lowest,
        )
        .unwrap();
        let t = r.random_range(4..40usize);
        let inst = random_instance::<f64>(&mut r, t, n, 3, 2);
        let byf = from_forecasts(&inst.forecasts, 1e-9);
        let rep =
            decision::regret(&u, &inst.actions, &inst.forecasts, &byf, 1_000_000).unwrap();
        assert!(
            (rep.regret - rep.matched_calibration).abs() <= 1e-9,
            "Reg {} vs K {}",
            rep.regret,
            rep.matched_calibration
        );
        assert!(rep.regret >= -1e-12);
        if let Some(bf) = rep.brute_force_remap {
            assert!((bf - rep.best_remap_utility).abs() <= 1e-9);
            brute_checked += 1;
        }

        // utility-gain identity against both the reference's own binning
        // and the joint binning
        let b_forecasts = inst.forecasts.clone();
        let c_forecasts: Vec<Dist<f64>> = {
            let pool: Vec<Dist<f64>> =
                (0..3).map(|_| sample_dist::<f64>(&actions, &mut r, false)).collect();
            (0..inst.actions.len()).map(|_| pool[r.random_range(0..3)].clone()).collect()
        };
        let b_binning = from_forecasts(&b_forecasts, 1e-9);
        let jb = joint(&b_binning, &from_forecasts(&c_forecasts, 1e-9)).unwrap();
        for binning in [&b_binning, &jb] {
            let gain = decision::utility_gain_check(
                &u,
                &inst.actions,
                &b_forecasts,
                &c_forecasts,
                binning,
            )
            .unwrap();
            assert!(gain.residual.abs() <= 1e-9, "gain residual {}", gain.residual);
        }
    }
    assert!(brute_checked >= 150, "brute force should cover most instances: {brute_checked}");

    // constructed strict swap gap: two forecasts share the optimal
    // decision but separate the realized actions.
    let actions = ActionSet::binary();
    let u = Utility::<f64>::match_action(&actions, TieBreak::Highest);
    let acts = [0usize, 0, 1, 1];
    let fore: Vec<Dist<f64>> = [0.6, 0.6, 0.9, 0.9].iter().map(|&p| Dist::binary(p)).collect();
    let (swap, forecast) = decision::swap_vs_forecast_regret(&u, &acts, &fore).unwrap();
    assert!(forecast >= swap - 1e-10);
    assert!(forecast - swap > 0.4, "strict gap expected, got {}", forecast - swap);
    pass(
        "09 regret = calibration",
        t0,
        format!("200 instances, {brute_checked} exhaustive cross-checks, swap gap exhibited"),
    );
}

/// 10. The stochastic grid forecaster calibeats the joint binning at the
/// contracted rate: with δ = 0.1, |B| = 2, t = 1e4, the mean quadratic
/// K(c; b×c) over 30 seeds stays below δ² + 2|B||C_δ|(ln t + 1)/t, and
/// consequently mean B^L − R^L(b) ≤ √bound for the 1-bounded catalog.
#[test]
fn criterion_10_grid_forecaster_contract() {
    let t0 = Instant::now();
    let actions = ActionSet::binary();
    let delta = 0.1;
    let t = 10_000usize;
    let seeds = 30u64;
    let grid_len = Grid::covering(&actions, delta).unwrap().len() as f64;
    let bound = delta * delta + 2.0 * 2.0 * grid_len * ((t as f64).ln() + 1.0) / t as f64;

    let bounded_rules: Vec<_> = ["quadratic", "spherical:2", "power:3", "step", "induced:match"]
        .iter()
        .map(|id| {
            scoring::normalize_rule(
                &calibeat::parse_rule::<f64>(id, &actions, &[]).unwrap(),
                NormalizeMode::Bounded,
            )
            .unwrap()
        })
        .collect();

    let q = make_quadratic::<f64>(&actions);
    let mut mean_k = 0.0;
    let mut mean_gap = vec![0.0; bounded_rules.len()];
    for seed in 0..seeds {
        let sim = procedures::run_grid(
            &actions,
            Reference::new(ReferenceKind::Cycle(2), seed),
            Adversary::parse("flip_farthest", seed, &actions).unwrap(),
            t,
            delta,
            seed,
        )
        .unwrap();
        let jb = joint(&sim.reference, &from_forecasts(&sim.forecasts, 1e-9))
            .unwrap()
            .to_general::<f64>();
        mean_k += scores::calibration(&q, &sim.actions, &sim.forecasts, &jb).unwrap();
        for (gi, rule) in bounded_rules.iter().enumerate() {
            let b = scores::brier(rule, &sim.actions, &sim.forecasts).unwrap();
            let rb =
                scores::refinement(rule, &sim.actions, &sim.reference.to_general::<f64>())
                    .unwrap();
            mean_gap[gi] += b - rb;
        }
    }
    mean_k /= seeds as f64;
    assert!(mean_k <= bound, "mean joint calibration {mean_k} above bound {bound}");
    for (gi, rule) in bounded_rules.iter().enumerate() {
        let g = mean_gap[gi] / seeds as f64;
        assert!(
            g <= bound.sqrt(),
            "{}: mean B − R(b) = {g} above √bound = {}",
            rule.id(),
            bound.sqrt()
        );
    }
    pass(
        "10 grid forecaster contract",
        t0,
        format!("mean K(c;b×c) = {mean_k:.5} ≤ {bound:.5} over {seeds} seeds"),
    );
}

/// 11. Row/column averaging: the inequalities and equality cases on 1e4
/// sampled instances; the on-segment counterexample's closed form to
/// 1e-12 across a δ-grid; the two-entry matrix values exactly; valid
/// violating weights for 50 random three-entry 2×2 matrices; and zero
/// violations for column-constant matrices over 1e4 sampled weights.
#[test]
fn criterion_11_row_column_averaging() {
    let t0 = Instant::now();
    let mut r = rng(0xC11);

    // (a)–(c) of the averaging inequalities on sampled instances
    for i in 0..10_000 {
        let rows = r.random_range(2..=3usize);
        let cols = r.random_range(2..=3usize);
        let m = if i % 2 == 0 { 1 } else { 2 };
        let points: Vec<Vec<Vec<f64>>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| (0..m).map(|_| r.random_range(0..9) as f64 / 8.0).collect())
                    .collect()
            })
            .collect();
        let weights = if i % 3 == 0 {
            rowcol::sample_sparse_weights(rows, cols, &mut r)
        } else {
            // floor dense weights so strict-concavity gaps stay visible
            let mut w = rowcol::sample_weights(rows, cols, &mut r);
            let mut total = 0.0;
            for row in w.iter_mut() {
                for x in row.iter_mut() {
                    *x = x.max(1e-5);
                    total += *x;
                }
            }
            for row in w.iter_mut() {
                for x in row.iter_mut() {
                    *x /= total;
                }
            }
            w
        };
        let wm = WeightedMatrix::new(points, weights).unwrap();
        let rep = rowcol::averaging_inequality_check(&wm, &ConcaveFn::SoftNorm);
        assert!(rep.inequalities_hold, "C/R ≥ E fails at instance {i}");
        assert!(rep.equality_under_constancy, "constancy equality fails at instance {i}");
        assert!(rep.strict_biconditional, "strict biconditional fails at instance {i}");
    }

    // closed form of the on-segment construction across a δ-grid
    for k in 1..20 {
        let delta = k as f64 / 20.0;
        let x = WeightedMatrix::scalar(
            vec![vec![1.0, 0.0], vec![delta, 0.3]],
            vec![vec![0.25, 0.25], vec![0.25, 0.25]],
        )
        .unwrap();
        let ce = rowcol::counterexample_weights(&x).unwrap();
        match ce.case {
            CounterexampleCase::OnSegment { delta: d, predicted_r_minus_c } => {
                assert!((d - delta).abs() < 1e-12);
                let expected =
                    delta * (1.0 - delta) * (1.0 + 2.0 * delta) / (6.0 * (2.0 + delta));
                assert!((predicted_r_minus_c - expected).abs() <= 1e-12);
                let (_, rq, cq) = rowcol::functionals(&ce.weights, &ConcaveFn::Quadratic);
                assert!((rq - cq - expected).abs() <= 1e-12, "δ={delta}: {}", rq - cq);
            }
            other => panic!("δ={delta}: expected the on-segment case, got {other:?}"),
        }
    }

    // two-entry matrix: C = R = −1/4, E = −1/2, exactly
    let x2 = WeightedMatrix::scalar(
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.25, 0.25], vec![0.25, 0.25]],
    )
    .unwrap();
    let (e, rr, cc) = rowcol::functionals(&x2, &ConcaveFn::Quadratic);
    assert_eq!((e, rr, cc), (-0.5, -0.25, -0.25));

    // violating weights for 50 random three-entry 2×2 matrices
    for i in 0..50 {
        let m = if i % 2 == 0 { 1 } else { 2 };
        let (a, b, d) = loop {
            let mut p =
                || -> Vec<f64> { (0..m).map(|_| r.random_range(0..17) as f64 / 16.0).collect() };
            let (a, b, d) = (p(), p(), p());
            if a != b && a != d && b != d {
                break (a, b, d);
            }
        };
        let x = WeightedMatrix::new(
            vec![vec![a, b], vec![d, vec![0.0; m]]],
            vec![vec![0.25, 0.25], vec![0.25, 0.25]],
        )
        .unwrap();
        match rowcol::counterexample_weights(&x) {
            Ok(ce) => {
                let (_, rq, cq) = rowcol::functionals(&ce.weights, &ConcaveFn::Quadratic);
                assert!(cq <= rq + rowcol::HYP_TOL, "hypothesis violated at {i}");
                let (ef, rf, cf) = rowcol::functionals(&ce.weights, &ce.violating_hinge);
                assert!(
                    cf > rf + rowcol::EQ_TOL || (cf - ef).abs() > rowcol::EQ_TOL,
                    "instance {i}: hinge does not violate the chain"
                );
            }
            Err(calibeat::Error::CollinearityMisclassified(_)) => {
                panic!("instance {i}: grid points should classify cleanly")
            }
            Err(other) => panic!("instance {i}: {other}"),
        }
    }

    // column-constant matrices never violate the chain
    let mut violations = 0usize;
    for i in 0..10_000 {
        let cols = 3usize;
        let col_vals: Vec<f64> = (0..cols).map(|_| r.random_range(0..9) as f64).collect();
        let points: Vec<Vec<Vec<f64>>> =
            (0..2).map(|_| col_vals.iter().map(|&v| vec![v]).collect()).collect();
        let w = if i % 2 == 0 {
            rowcol::sample_weights(2, cols, &mut r)
        } else {
            rowcol::sample_sparse_weights(2, cols, &mut r)
        };
        let wm = WeightedMatrix::new(points, w).unwrap();
        for f in [ConcaveFn::Quadratic, ConcaveFn::SoftNorm] {
            let (e, rq, cq) = rowcol::functionals(&wm, &f);
            if (cq - e).abs() > rowcol::EQ_TOL || cq > rq + rowcol::EQ_TOL {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
    pass("11 row/column averaging", t0, "inequalities, closed form, counterexamples, zero column-constant violations");
}

/// 12. The snapshot scenario: the bundled table reports
/// (calibeat = true, joint = false, proper = false), and the frequency
/// sweep realizes both failure modes together on the bundled
/// nondegenerate matrix.
#[test]
fn criterion_12_snapshot_scenario() {
    let t0 = Instant::now();
    let actions = ActionSet::binary();
    let avg = |p: f64| Dist::binary(p);
    let averages = vec![
        vec![avg(1.0), avg(0.0), avg(0.0)],
        vec![avg(1.0), avg(0.0), avg(1.0)],
    ];
    let freqs = vec![vec![0.1, 0.1, 0.3], vec![0.1, 0.1, 0.3]];
    let rules = vec![
        make_quadratic::<f64>(&actions),
        make_spherical::<f64>(&actions, 2.0).unwrap(),
        scoring::make_power::<f64>(&actions, 3.0).unwrap(),
    ];
    let rep = rowcol::calibeating_snapshot(&averages, &freqs, &rules).unwrap();
    assert!(rep.calibeats);
    assert!(!rep.calibeats_joint);
    assert!(!rep.proper_calibeats);

    let sweep = rowcol::snapshot_sweep(&averages, &rules, 1000, 0xC12).unwrap();
    assert!(sweep.calibeat_count > 0);
    assert!(sweep.calibeat_not_joint > 0, "sweep must find calibeat-without-joint");
    assert!(sweep.calibeat_not_proper > 0, "sweep must find calibeat-without-proper");
    assert!(sweep.equivalence_ok);
    pass(
        "12 snapshot scenario",
        t0,
        format!(
            "flags (true,false,false); sweep: {}/{} not-joint, {} not-proper",
            sweep.calibeat_not_joint, sweep.calibeat_count, sweep.calibeat_not_proper
        ),
    );
}
