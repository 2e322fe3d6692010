mod common;

use common::*;
use meyerstop::enumerate::{enumerate_stopping_times, ENUMERATION_LIMIT};
use meyerstop::generate::RewardShape;
use meyerstop::snell::*;
use meyerstop::{FieldKind, Instant, LatticeProcess, RandomInstant};
use meyerstop::lattice::int;

#[test]
fn deterministic_envelope_and_value() {
    let s = single_path(1);
    let z = deterministic(&[1, 3, 2, 0]);
    let zbar = snell_envelope(&s, &z).unwrap();
    assert_eq!(zbar.path_row(0), qs(&[3, 3, 2, 0]));
    let bf = snell_brute_force(&s, &z, ENUMERATION_LIMIT).unwrap();
    assert_eq!(bf.value, int(3));
    assert_eq!(bf.optimizers, vec![RandomInstant::constant(1, Instant::Int(0))]);
}

#[test]
fn branch_envelope_value_two() {
    let s = two_path(true);
    let z = branch_reward();
    let zbar = snell_envelope(&s, &z).unwrap();
    assert_eq!(zbar.slice(at(0)), &qs(&[2, 2])[..]);
    assert_eq!(zbar.slice(int_(0)), &qs(&[2, 2])[..]);
    assert_eq!(zbar.slice(at(1)), &qs(&[4, 0])[..]);
    assert_eq!(snell_brute_force(&s, &z, ENUMERATION_LIMIT).unwrap().value, int(2));
    assert_eq!(root_value(&s, &zbar), int(2));
}

#[test]
fn zero_and_constant_rewards() {
    let s = two_path(false);
    let zero = LatticeProcess::zeros_on(&s);
    assert_eq!(snell_envelope(&s, &zero).unwrap(), zero);
    let c = LatticeProcess::from_path_rows(&[qs(&[2, 2, 2, 2]), qs(&[2, 2, 2, 2])]).unwrap();
    let bf = snell_brute_force(&s, &c, ENUMERATION_LIMIT).unwrap();
    assert_eq!(bf.value, int(2));
    // Z_inf = 0, so exactly the finite stopping times are optimal
    let all = enumerate_stopping_times(&s, FieldKind::Lambda, None, ENUMERATION_LIMIT).unwrap();
    let finite: Vec<_> = all.into_iter().filter(|t| t.finite_set().len() == 2).collect();
    assert_eq!(bf.optimizers, finite);
}

#[test]
fn rejects_negative_and_unmeasurable() {
    let s = two_path(false);
    let neg = deterministic(&[1, -1, 0, 0]);
    assert!(snell_envelope(&single_path(1), &neg).is_err());
    assert!(snell_envelope(&s, &branch_reward()).is_err());
}

#[test]
fn supermartingale_examples() {
    let s = single_path(1);
    assert!(is_lambda_supermartingale(&s, &deterministic(&[3, 3, 2, 0])).unwrap());
    assert!(!is_lambda_supermartingale(&s, &deterministic(&[0, 1, 2, 3])).unwrap());
    assert!(is_lambda_martingale(&s, &deterministic(&[0, 0, 0, 0])).unwrap());
}

#[test]
fn mertens_deterministic() {
    let s = single_path(1);
    let d = mertens_decompose(&s, &deterministic(&[3, 3, 2, 0])).unwrap();
    assert_eq!(d.a.path_row(0), qs(&[0, 0, 1, 1]));
    // the drop 2 -> 0 inside epoch 1 is a B jump at (1,AT)
    assert_eq!(d.b.path_row(0), qs(&[0, 0, 2, 2]));
    assert_eq!(d.m.path_row(0), qs(&[3, 3, 3, 3]));
    assert_eq!(d.m.terminal(), &qs(&[3])[..]);
}

#[test]
fn mertens_branch() {
    let s = two_path(true);
    let zbar = snell_envelope(&s, &branch_reward()).unwrap();
    let d = mertens_decompose(&s, &zbar).unwrap();
    assert!(d.a.path_row(0).iter().chain(d.a.path_row(1).iter()).all(|v| *v == int(0)));
    assert_eq!(d.b.slice(at(1)), &qs(&[4, 0])[..]);
    assert!(is_lambda_martingale(&s, &d.m).unwrap());
}

#[test]
fn martingale_has_trivial_decomposition() {
    let s = two_path(true);
    let m = LatticeProcess::from_path_rows(&[qs(&[2, 2, 4, 4]), qs(&[2, 2, 0, 0])]).unwrap();
    let d = mertens_decompose(&s, &m).unwrap();
    assert_eq!(d.b, LatticeProcess::zeros_on(&s));
    // A only moves at infinity, where the envelope drops to 0
    for p in 0..2 {
        assert!(d.a.path_row(p).iter().all(|v| *v == int(0)));
        assert_eq!(d.m.path_row(p), m.path_row(p));
    }
    assert_eq!(d.a.terminal(), &qs(&[4, 0])[..]);
    assert!(is_lambda_martingale(&s, &d.m).unwrap());
}

#[test]
fn entry_time_examples() {
    let s = single_path(1);
    let z = deterministic(&[1, 3, 2, 0]);
    let zbar = snell_envelope(&s, &z).unwrap();
    let s0 = s.constant_time(at(0));
    let t = lambda_entry_time(&s, &z, &zbar, &meyerstop::lattice::ratio(1, 2), &s0).unwrap();
    assert_eq!(t, RandomInstant::constant(1, int_(0)));
    assert!(lambda_entry_time(&s, &z, &zbar, &int(1), &s0).is_err());
    // beyond the threshold the entry time is the first equality
    let star = lambda_threshold(&z, &zbar);
    let lam = (star + int(1)) / int(2);
    let d = delta_stop(&s, &z, &s0).unwrap();
    assert_eq!(lambda_entry_time(&s, &z, &zbar, &lam, &s0).unwrap(), d.instant);
}

#[test]
fn delta_examples() {
    let s = single_path(1);
    let d = delta_stop(&s, &deterministic(&[1, 3, 2, 0]), &s.constant_time(at(0))).unwrap();
    assert_eq!(d.instant, RandomInstant::constant(1, int_(0)));

    let b = two_path(true);
    let d = delta_stop(&b, &branch_reward(), &b.constant_time(at(0))).unwrap();
    // path b has Z = Zbar = 0 already at (1,AT)
    assert_eq!(d.instant, RandomInstant::new(vec![at(1), at(1)]));
}

#[test]
fn sigma_examples() {
    let s = single_path(1);
    let z = deterministic(&[1, 3, 2, 0]);
    let st = sigma_stop(&s, &z, &s.constant_time(at(0))).unwrap();
    assert_eq!(st.growth, RandomInstant::constant(1, at(1)));
    assert_eq!(st.instant, RandomInstant::constant(1, int_(0)));
    assert!(st.k_minus.contains(0));

    let zero = LatticeProcess::zeros_on(&s);
    let st = sigma_stop(&s, &zero, &s.constant_time(at(0))).unwrap();
    assert_eq!(st.instant, RandomInstant::constant(1, Instant::Terminal));
}

#[test]
fn certificate_examples() {
    let s = two_path(true);
    let z = branch_reward();
    assert!(check_optimality(&s, &z, &s.constant_time(at(1))).unwrap().optimal);
    let c = check_optimality(&s, &z, &s.constant_time(at(0))).unwrap();
    assert!(!c.condition_i && !c.optimal);
    let bad = RandomInstant::new(vec![at(1), Instant::Terminal]);
    assert!(check_optimality(&two_path(false), &LatticeProcess::zeros_on(&s), &bad).is_err());
}

#[test]
fn bounds_examples() {
    let s = two_path(true);
    let b = smallest_largest_optimal(&s, &branch_reward(), ENUMERATION_LIMIT).unwrap();
    assert_eq!(b.smallest, s.constant_time(at(1)));
    assert!(b.smallest_certified && b.largest_certified);
    let err = smallest_largest_optimal(&single_path(1), &deterministic(&[1, 3, 2, 0]), ENUMERATION_LIMIT).unwrap_err();
    assert!(err.to_string().contains("right"), "{err}");
}

#[test]
fn envelope_matches_oracle_on_seeded_instances() {
    for inst in instances(60, RewardShape::Free) {
        let zbar = snell_envelope(&inst.space, &inst.z).unwrap();
        let bf = snell_brute_force(&inst.space, &inst.z, ENUMERATION_LIMIT).unwrap();
        assert_eq!(root_value(&inst.space, &zbar), bf.value);
        for t in enumerate_stopping_times(&inst.space, FieldKind::Lambda, None, ENUMERATION_LIMIT).unwrap() {
            let c = check_optimality(&inst.space, &inst.z, &t).unwrap();
            let ez: meyerstop::Q = inst.space.expectation(&inst.z.at_time(&t));
            assert_eq!(c.optimal, ez == bf.value);
        }
    }
}
