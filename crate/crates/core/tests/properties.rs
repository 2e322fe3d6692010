mod common;

use common::*;
use meyerstop::commands::{run_command, sample_indices, Command, Options, Status};
use meyerstop::divided::{from_divided_quadruple, instant_form, to_divided_quadruple, validate_divided};
use meyerstop::enumerate::{enumerate_stopping_times, ENUMERATION_LIMIT};
use meyerstop::generate::{generate_instance, Regime, RewardShape};
use meyerstop::lattice::int;
use meyerstop::projection::{project, Mode, Side};
use meyerstop::scenario::parse_scenario;
use meyerstop::snell::{is_lambda_supermartingale, snell_envelope};
use meyerstop::{FieldKind, Instant, LatticeProcess, MeyerSpace, Q};
use proptest::prelude::*;

fn regime() -> impl Strategy<Value = Regime> {
    prop::sample::select(REGIMES.to_vec())
}

fn setup(seed: u64, epochs: usize, paths: usize, regime: Regime) -> Instance {
    instance(&params(seed, epochs, paths, regime))
}

/// A Lambda-measurable process with zero terminal from raw integers.
fn lambda_process(space: &MeyerSpace, raw: &[i64]) -> LatticeProcess {
    let n = space.instants().len();
    let z = LatticeProcess::from_fn(space, |p, u| int(raw[(p * n + u.rank()) % raw.len()]));
    project(space, &z, FieldKind::Lambda)
}

/// `Y_S >= E[Y_T | F^Lambda_S]` for every pair of Lambda-stopping times `S <= T`.
fn pairwise_supermartingale(space: &MeyerSpace, y: &LatticeProcess) -> bool {
    let times = enumerate_stopping_times(space, FieldKind::Lambda, None, ENUMERATION_LIMIT).unwrap();
    times.iter().all(|s| {
        let f = space.field_at_time(s, FieldKind::Lambda);
        let ys = y.at_time(s);
        times.iter().filter(|t| s.le(t)).all(|t| {
            let c = space.conditional_expectation(&y.at_time(t), &f);
            (0..space.n_paths()).all(|p| ys[p] >= c[p])
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn envelope_is_least_dominating_supermartingale(
        seed in 0u64..10_000, epochs in 1usize..4, paths in 2usize..7, r in regime(),
        extra in prop::collection::vec(0i64..4, 1..40),
    ) {
        let inst = setup(seed, epochs, paths, r);
        let zbar = snell_envelope(&inst.space, &inst.z).unwrap();
        prop_assert!(zbar.dominates(&inst.z));
        prop_assert!(is_lambda_supermartingale(&inst.space, &zbar).unwrap());
        // any supermartingale above Z is above Zbar
        let bump = lambda_process(&inst.space, &extra);
        let w = inst.z.zip_with(&bump, |a, b| a + b);
        let y = snell_envelope(&inst.space, &w).unwrap();
        prop_assert!(y.dominates(&inst.z) && y.dominates(&zbar));
    }

    #[test]
    fn supermartingale_one_step_matches_pairwise(
        seed in 0u64..10_000, epochs in 1usize..3, paths in 2usize..5, r in regime(),
        raw in prop::collection::vec(0i64..5, 1..30), take_envelope in any::<bool>(),
    ) {
        let inst = setup(seed, epochs, paths, r);
        let y = lambda_process(&inst.space, &raw);
        let y = if take_envelope { snell_envelope(&inst.space, &y).unwrap() } else { y };
        prop_assert_eq!(is_lambda_supermartingale(&inst.space, &y).unwrap(), pairwise_supermartingale(&inst.space, &y));
    }

    #[test]
    fn projections_are_idempotent_linear_and_monotone(
        seed in 0u64..10_000, epochs in 1usize..4, paths in 2usize..8, r in regime(),
        a in prop::collection::vec(-5i64..6, 1..40), b in prop::collection::vec(0i64..6, 1..40),
    ) {
        let s = setup(seed, epochs, paths, r).space;
        let n = s.instants().len();
        let x = LatticeProcess::from_fn(&s, |p, u| int(a[(p * n + u.rank()) % a.len()]));
        let nonneg = LatticeProcess::from_fn(&s, |p, u| int(b[(p * n + u.rank()) % b.len()]));
        for k in [FieldKind::Lambda, FieldKind::Optional, FieldKind::Predictable] {
            let px = project(&s, &x, k);
            prop_assert!(s.is_measurable(&px, k));
            prop_assert_eq!(project(&s, &px, k), px.clone());
            let sum = x.zip_with(&nonneg, |u, v| u + v);
            let lin = px.zip_with(&project(&s, &nonneg, k), |u, v| u + v);
            prop_assert_eq!(project(&s, &sum, k), lin);
            prop_assert!(project(&s, &sum, k).dominates(&px));
            // expectations are preserved instant by instant
            for u in s.instants() {
                prop_assert_eq!(s.expectation(px.slice(u)), s.expectation(x.slice(u)));
            }
        }
        let right = meyerstop::projection::envelope(&s, &nonneg, Side::Right, Mode::Sup);
        let left = meyerstop::projection::envelope(&s, &nonneg, Side::Left, Mode::Sup);
        prop_assert!(right.first_negative().is_none() && left.first_negative().is_none());
    }

    #[test]
    fn divided_encodings_round_trip(
        seed in 0u64..10_000, epochs in 1usize..3, paths in 2usize..6, r in regime(), pick in any::<prop::sample::Index>(),
    ) {
        let s = setup(seed, epochs, paths, r).space;
        let times = enumerate_stopping_times(&s, FieldKind::Lambda, None, ENUMERATION_LIMIT).unwrap();
        let t = &times[pick.index(times.len())];
        let d = to_divided_quadruple(&s, t).unwrap();
        prop_assert!(validate_divided(&s, &d).is_valid());
        prop_assert_eq!(&from_divided_quadruple(&s, &d).unwrap(), t);
        prop_assert_eq!(&instant_form(&s, &d), t);
    }

    #[test]
    fn decomposition_holds_on_generated_rewards(
        seed in 0u64..10_000, epochs in 1usize..5, paths in 2usize..10, r in regime(), usc in any::<bool>(),
    ) {
        let mut p = params(seed, epochs, paths, r);
        p.reward = if usc { RewardShape::UscShaped } else { RewardShape::Free };
        let sc = generate_instance(&p);
        let rep = run_command(&sc, Command::Decompose, &Options::default()).unwrap();
        prop_assert_eq!(rep.status, Status::Ok);
    }

    #[test]
    fn scenario_render_parse_round_trip(seed in any::<u64>(), epochs in 1usize..5, paths in 1usize..13, r in regime()) {
        let sc = generate_instance(&params(seed, epochs, paths, r));
        let text = sc.render();
        let back = parse_scenario(&text, true).unwrap();
        prop_assert!(back.warnings.is_empty());
        prop_assert_eq!(back.scenario, sc);
    }

    #[test]
    fn sampled_indices_are_distinct_and_in_range(len in 1usize..500, k in 0usize..8, seed in any::<u64>()) {
        let v = sample_indices(len, k, seed);
        prop_assert_eq!(v.len(), k.min(len));
        prop_assert!(v.iter().all(|&i| i < len));
        let mut d = v.clone();
        d.sort();
        d.dedup();
        prop_assert_eq!(d.len(), v.len());
    }

    #[test]
    fn envelope_value_is_monotone_in_the_reward(
        seed in 0u64..10_000, epochs in 1usize..4, paths in 2usize..8, r in regime(),
        extra in prop::collection::vec(0i64..3, 1..40),
    ) {
        let inst = setup(seed, epochs, paths, r);
        let bump = lambda_process(&inst.space, &extra);
        let w = inst.z.zip_with(&bump, |a, b| a + b);
        let a = snell_envelope(&inst.space, &inst.z).unwrap();
        let b = snell_envelope(&inst.space, &w).unwrap();
        prop_assert!(b.dominates(&a));
        let root = |x: &LatticeProcess| -> Q { inst.space.expectation(x.slice(Instant::At(0))) };
        prop_assert!(root(&b) >= root(&a));
    }
}
