mod common;

use common::*;
use meyerstop::enumerate::{enumerate_stopping_times, ENUMERATION_LIMIT};
use meyerstop::generate::RewardShape;
use meyerstop::lattice::{int, ratio};
use meyerstop::projection::*;
use meyerstop::{FieldKind, Instant, LatticeProcess, RandomInstant};

fn split_at_one() -> LatticeProcess {
    LatticeProcess::from_path_rows(&[qs(&[0, 0, 4, 0]), qs(&[0, 0, 0, 0])]).unwrap()
}

#[test]
fn project_examples() {
    let s = two_path(false);
    let z = split_at_one();
    assert_eq!(project(&s, &z, FieldKind::Lambda).slice(at(1)), &qs(&[2, 2])[..]);
    assert_eq!(project(&s, &z, FieldKind::Predictable).slice(at(1)), &qs(&[2, 2])[..]);
    assert_eq!(project(&s, &z, FieldKind::Optional).slice(at(1)), &qs(&[4, 0])[..]);
    let so = two_path(true);
    assert_eq!(project(&so, &z, FieldKind::Lambda), z);
}

#[test]
fn envelope_examples() {
    let s = single_path(1);
    let z = deterministic(&[1, 3, 2, 0]);
    let r = envelope(&s, &z, Side::Right, Mode::Sup);
    assert_eq!(r.value(0, at(0)), &int(3));
    let l = envelope(&s, &z, Side::Left, Mode::Sup);
    assert_eq!(l.value(0, at(1)), &int(3));
    assert_eq!(l.value(0, at(0)), &int(1));
    let c = deterministic(&[5, 5, 5, 5]);
    for side in [Side::Left, Side::Right] {
        for mode in [Mode::Sup, Mode::Inf] {
            let e = envelope(&s, &c, side, mode);
            assert_eq!(e.path_row(0), c.path_row(0));
            assert_eq!(e, envelope(&s, &c, side, if mode == Mode::Sup { Mode::Inf } else { Mode::Sup }));
        }
    }
}

#[test]
fn usc_examples() {
    let s = single_path(1);
    let z = deterministic(&[1, 3, 2, 0]);
    let r = is_right_usc_in_expectation(&s, &z).unwrap();
    assert!(!r.holds);
    assert_eq!(r.witness, Some((0, at(0))));
    let l = is_left_usc_in_expectation(&s, &z).unwrap();
    assert!(!l.holds);
    assert_eq!(l.witness, Some((0, at(1))));
    let dec = deterministic(&[4, 3, 2, 0]);
    assert!(is_right_usc_in_expectation(&s, &dec).unwrap().holds);
    // the left jump 3 -> 2 at (1,AT) is a downward jump
    assert!(!is_left_usc_in_expectation(&s, &dec).unwrap().holds);
    let flat = deterministic(&[4, 4, 4, 0]);
    assert!(is_left_usc_in_expectation(&s, &flat).unwrap().holds);
}

#[test]
fn usc_rejects_unmeasurable() {
    assert!(is_right_usc_in_expectation(&two_path(false), &split_at_one()).is_err());
}

#[test]
fn two_path_right_usc_by_projection() {
    let s = two_path(true);
    let z = LatticeProcess::from_path_rows(&[qs(&[2, 2, 4, 0]), qs(&[2, 2, 0, 0])]).unwrap();
    let rhs = project(&s, &envelope(&s, &z, Side::Right, Mode::Sup), FieldKind::Lambda);
    let expected = s.instants().iter().all(|&u| (0..2).all(|p| z.value(p, u) >= rhs.value(p, u)));
    assert_eq!(is_right_usc_in_expectation(&s, &z).unwrap().holds, expected);
}

#[test]
fn sequence_equivalence_examples() {
    let s = single_path(1);
    let r = check_usc_sequence_equivalence(&s, &deterministic(&[4, 4, 4, 0])).unwrap();
    assert!(r.agrees() && r.right_predicate && r.left_predicate);
    let r = check_usc_sequence_equivalence(&s, &deterministic(&[4, 3, 2, 0])).unwrap();
    assert!(r.agrees() && r.right_predicate && !r.left_predicate);
    let r = check_usc_sequence_equivalence(&s, &deterministic(&[1, 3, 2, 0])).unwrap();
    assert!(r.agrees() && !r.right_predicate && !r.left_predicate);
    assert_eq!(r.right_counterexample, Some(s.constant_time(at(0))));
}

#[test]
fn sequence_equivalence_on_seeded_instances() {
    for shape in [RewardShape::Free, RewardShape::UscShaped] {
        for inst in instances(60, shape) {
            let r = check_usc_sequence_equivalence(&inst.space, &inst.z).unwrap();
            assert!(r.agrees(), "{r:?}");
            if shape == RewardShape::UscShaped {
                assert!(r.right_predicate && r.left_predicate);
            }
        }
    }
}

#[test]
fn fatou_examples() {
    let s = single_path(1);
    assert!(check_projection_fatou(&s, &deterministic(&[1, 3, 2, 0])).unwrap().passed());
    let r = check_projection_fatou(&two_path(false), &split_at_one()).unwrap();
    assert!(r.passed(), "{:?}", r.failures);
    assert!(r.optional_times > 0 && r.predictable_times > 0);
}

#[test]
fn fatou_raw_optional_process_between_extremes() {
    // three paths, G_1 strictly between F_0 and F_1
    let mut sc = meyerstop::scenario::Scenario::from_space_parts(
        1,
        vec![("a".into(), ratio(1, 3)), ("b".into(), ratio(1, 3)), ("c".into(), ratio(1, 3))],
        vec![vec![vec!["a".into(), "b".into(), "c".into()]], vec![vec!["a".into()], vec!["b".into()], vec!["c".into()]]],
        vec![vec![vec!["a".into(), "b".into(), "c".into()]], vec![vec!["a".into()], vec!["b".into(), "c".into()]]],
    );
    sc.processes.insert(
        "Z".into(),
        vec![
            ("a".into(), qs(&[0, 0, 1, 0])),
            ("b".into(), qs(&[0, 0, 2, 6])),
            ("c".into(), qs(&[0, 0, 0, 0])),
        ],
    );
    let s = sc.space().unwrap();
    let z = sc.process("Z").unwrap();
    let r = check_projection_fatou(&s, &z).unwrap();
    assert!(r.passed(), "{:?}", r.failures);
    // envelopes only read interior slices, where all three fields are F_k,
    // so each chain collapses to equalities
    let lz = project(&s, &z, FieldKind::Lambda);
    let l_r = envelope(&s, &lz, Side::Right, Mode::Inf);
    let o_r = project(&s, &envelope(&s, &z, Side::Right, Mode::Inf), FieldKind::Optional);
    let l_l = envelope(&s, &lz, Side::Left, Mode::Inf);
    let p_l = project(&s, &envelope(&s, &z, Side::Left, Mode::Inf), FieldKind::Predictable);
    for u in s.instants() {
        for p in 0..3 {
            assert_eq!(o_r.value(p, u), l_r.value(p, u));
            if u != at(0) {
                assert_eq!(p_l.value(p, u), l_l.value(p, u));
            }
        }
    }
    // while the projections themselves differ at (1,AT)
    assert_ne!(project(&s, &z, FieldKind::Optional).slice(at(1)), lz.slice(at(1)));
}

#[test]
fn fatou_on_seeded_raw_processes() {
    for inst in instances(40, RewardShape::Free) {
        // a raw, non-measurable perturbation of the reward
        let mut raw = inst.z.clone();
        for p in 0..inst.space.n_paths() {
            raw.set(p, at(inst.space.horizon()), raw.value(p, at(0)) + int(p as i64));
        }
        let r = check_projection_fatou(&inst.space, &raw).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
    }
}

#[test]
fn tower_duality_and_normalization() {
    for inst in instances(40, RewardShape::Free) {
        let s = &inst.space;
        let mut raw = inst.z.clone();
        for p in 0..s.n_paths() {
            for u in s.instants() {
                raw.set(p, u, raw.value(p, u) * int(p as i64 + 1));
            }
        }
        let lam = project(s, &raw, FieldKind::Lambda);
        assert_eq!(project(s, &lam, FieldKind::Predictable), project(s, &raw, FieldKind::Predictable));
        assert_eq!(project(s, &project(s, &raw, FieldKind::Optional), FieldKind::Lambda), lam);
        assert!(s.is_measurable(&lam, FieldKind::Lambda));
        let one = LatticeProcess::from_fn(s, |_, _| int(1));
        assert_eq!(project(s, &one, FieldKind::Lambda), one);
        // A: running sum of a nonnegative Lambda-measurable process
        let da = project(s, &inst.z, FieldKind::Lambda);
        let mut a = LatticeProcess::zeros_on(s);
        for p in 0..s.n_paths() {
            let mut acc = int(0);
            for u in s.instants() {
                acc += da.value(p, u);
                a.set(p, u, acc.clone());
            }
        }
        let a = a.clone().with_terminal(s.instants().last().map(|&u| a.slice(u).to_vec()).unwrap());
        assert_eq!(increasing_pairing(s, &raw, &a), increasing_pairing(s, &lam, &a));
        // projection at stopping times of matching kind
        for t in enumerate_stopping_times(s, FieldKind::Lambda, None, ENUMERATION_LIMIT).unwrap().iter().take(50) {
            let f = s.field_at_time(t, FieldKind::Lambda);
            let fin = t.finite_set();
            let cond = s.conditional_expectation(&raw.at_time(t), &f);
            for p in fin.iter() {
                assert_eq!(&cond[p], lam.value(p, t.at(p)));
            }
        }
    }
}

#[test]
fn witness_examples() {
    let s = single_path(2);
    let z = deterministic(&[0, 0, 0, 0, 0, 0]);
    assert_eq!(
        approximating_witness(&s, &z, &s.constant_time(at(1)), Side::Right).unwrap(),
        vec![s.constant_time(int_(1))]
    );
    let term = s.constant_time(Instant::Terminal);
    assert_eq!(approximating_witness(&s, &z, &term, Side::Right).unwrap(), vec![term.clone()]);
    assert_eq!(
        approximating_witness(&s, &z, &s.constant_time(at(2)), Side::Left).unwrap(),
        vec![s.constant_time(int_(1))]
    );
    assert!(approximating_witness(&s, &z, &s.constant_time(at(0)), Side::Left).is_err());
    let b = two_path(true);
    let t = RandomInstant::new(vec![at(1), Instant::Terminal]);
    assert!(approximating_witness(&b, &LatticeProcess::zeros_on(&b), &t, Side::Left).is_err());
}
