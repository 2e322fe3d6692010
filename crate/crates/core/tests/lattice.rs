mod common;

use common::*;
use meyerstop::enumerate::{enumerate_stopping_times, ENUMERATION_LIMIT};
use meyerstop::generate::RewardShape;
use meyerstop::lattice::*;
use meyerstop::FieldKind;

fn two_path_lattice() -> FilteredLattice {
    FilteredLattice {
        horizon: 1,
        paths: ["a", "b"]
            .iter()
            .map(|id| PathRecord {
                id: id.to_string(),
                probability: ratio(1, 2),
            })
            .collect(),
        filtration: vec![vec![vec![0, 1]], vec![vec![0], vec![1]]],
        initial_field: None,
    }
}

#[test]
fn validate_extreme_meyer_choices() {
    let l = two_path_lattice();
    for g1 in [vec![vec![0, 1]], vec![vec![0], vec![1]]] {
        let m = MeyerStructure { fields: vec![vec![vec![0, 1]], g1] };
        assert!(validate_lattice(&l, &m).is_valid());
    }
}

#[test]
fn validate_rejects_g_coarser_than_previous_f() {
    let mut l = two_path_lattice();
    l.filtration[0] = vec![vec![0], vec![1]];
    let m = MeyerStructure {
        fields: vec![vec![vec![0], vec![1]], vec![vec![0, 1]]],
    };
    let r = validate_lattice(&l, &m);
    assert!(!r.is_valid());
    assert!(r.to_string().contains("G_1 does not refine F_0"), "{r}");
}

#[test]
fn validate_structural_errors() {
    let mut l = two_path_lattice();
    l.paths[1].id = "a".into();
    let m = MeyerStructure { fields: vec![vec![vec![0, 1]], vec![vec![0, 1]]] };
    assert!(validate_lattice(&l, &m).to_string().contains("duplicate"));
    let mut l = two_path_lattice();
    l.paths[1].probability = ratio(2, 5);
    assert!(validate_lattice(&l, &m).to_string().contains("probabilities sum to 9/10"));
    let mut l = two_path_lattice();
    l.paths[1].probability = int(0);
    l.paths[0].probability = int(1);
    assert!(!validate_lattice(&l, &m).is_valid());
}

#[test]
fn sigma_field_table() {
    let s = two_path(false);
    assert_eq!(s.sigma_field_at(at(1), FieldKind::Lambda).unwrap(), s.meyer_field(1));
    assert_eq!(s.sigma_field_at(at(1), FieldKind::Predictable).unwrap(), s.filtration(0));
    assert_eq!(s.sigma_field_at(at(1), FieldKind::Optional).unwrap(), s.filtration(1));
    for k in [FieldKind::Lambda, FieldKind::Optional, FieldKind::Predictable] {
        assert_eq!(s.sigma_field_at(int_(0), k).unwrap(), s.filtration(0));
    }
    assert_eq!(s.sigma_field_at(at(0), FieldKind::Predictable).unwrap(), s.initial_field());
    assert!(s.sigma_field_at(meyerstop::Instant::Terminal, FieldKind::Lambda).is_err());
}

#[test]
fn conditional_expectation_examples() {
    let s = two_path(false);
    assert_eq!(s.conditional_expectation(&qs(&[4, 0]), &Partition::trivial(2)), qs(&[2, 2]));
    assert_eq!(s.conditional_expectation(&qs(&[4, 0]), &Partition::finest(2)), qs(&[4, 0]));

    let l = FilteredLattice {
        horizon: 1,
        paths: [("a", ratio(1, 2)), ("b", ratio(1, 4)), ("c", ratio(1, 4))]
            .into_iter()
            .map(|(id, p)| PathRecord {
                id: id.into(),
                probability: p,
            })
            .collect(),
        filtration: vec![vec![vec![0, 1, 2]], vec![vec![0], vec![1, 2]]],
        initial_field: None,
    };
    let m = MeyerStructure {
        fields: vec![vec![vec![0, 1, 2]], vec![vec![0], vec![1, 2]]],
    };
    let s3 = MeyerSpace::new(l, m).unwrap();
    let part = Partition::new(3, &[vec![0], vec![1, 2]]).unwrap();
    assert_eq!(s3.conditional_expectation(&qs(&[1, 2, 6]), &part), qs(&[1, 4, 4]));
}

#[test]
fn measurability_examples() {
    let s = two_path(false);
    let det = meyerstop::LatticeProcess::from_path_rows(&[qs(&[1, 2, 3, 4]), qs(&[1, 2, 3, 4])]).unwrap();
    assert!(s.is_measurable(&det, FieldKind::Predictable));
    let split = meyerstop::LatticeProcess::from_path_rows(&[qs(&[0, 0, 1, 0]), qs(&[0, 0, 2, 0])]).unwrap();
    assert!(!s.is_measurable(&split, FieldKind::Lambda));
    let so = two_path(true);
    assert!(so.is_measurable(&split, FieldKind::Lambda));
    assert!(!so.is_measurable(&split, FieldKind::Predictable));
}

#[test]
fn stopping_time_examples() {
    let s = two_path(false);
    for u in s.instants_with_terminal() {
        for k in [FieldKind::Lambda, FieldKind::Optional, FieldKind::Predictable] {
            assert!(s.is_stopping_time(&s.constant_time(u), k));
        }
    }
    let t = meyerstop::RandomInstant::new(vec![at(1), meyerstop::Instant::Terminal]);
    assert!(!s.is_lambda_stopping_time(&t));
    assert!(s.is_stopping_time(&t, FieldKind::Optional));
    assert!(two_path(true).is_lambda_stopping_time(&t));
}

#[test]
fn restrict_time_examples() {
    let s = two_path(true);
    let t = s.constant_time(at(1));
    assert_eq!(t.restrict(&PathSet::full(2)), t);
    assert_eq!(t.restrict(&PathSet::empty(2)), s.constant_time(meyerstop::Instant::Terminal));
    let h = s.meyer_field(1).atom_set(0);
    assert!(s.is_lambda_stopping_time(&t.restrict(&h)));
}

#[test]
fn section_witness_examples() {
    let s = two_path(true);
    let all = InstantSet::from_fn(&s, |_, _| true);
    assert_eq!(s.section_witness(&all).unwrap(), s.constant_time(at(0)));
    let none = InstantSet::empty(&s);
    let w = s.section_witness(&none).unwrap();
    assert!(w.finite_set().is_empty());
    let t = meyerstop::RandomInstant::new(vec![at(1), int_(1)]);
    assert_eq!(s.section_witness(&InstantSet::graph(&s, &t)).unwrap(), t);
    let bad = InstantSet::from_fn(&s, |p, u| p == 0 && u == int_(0));
    assert!(s.section_witness(&bad).is_err());
}

#[test]
fn refinement_chain_and_left_field_identity() {
    for inst in instances(30, RewardShape::Free) {
        let s = &inst.space;
        for k in 0..=s.horizon() {
            let rv = inst.z.slice(at(k)).to_vec();
            let fine = s.conditional_expectation(&rv, s.filtration(k));
            assert_eq!(
                s.conditional_expectation(&fine, s.meyer_field(k)),
                s.conditional_expectation(&rv, s.meyer_field(k))
            );
            if k < s.horizon() {
                assert_eq!(s.field(at(k + 1), FieldKind::Predictable), s.filtration(k));
                assert_eq!(s.field(int_(k), FieldKind::Lambda), s.filtration(k));
            }
        }
    }
}

#[test]
fn section_corollary_by_enumeration() {
    // Z and Z' agreeing at every Lambda-stopping time agree everywhere: the
    // constant times already separate instants, and each atom stop separates
    // values inside a slice.
    for inst in instances(20, RewardShape::Free) {
        let s = &inst.space;
        let times = enumerate_stopping_times(s, FieldKind::Lambda, None, ENUMERATION_LIMIT).unwrap();
        let mut other = inst.z.clone();
        let u = s.instants()[inst.z.path_row(0).len() / 2];
        other.set(0, u, other.value(0, u) + int(1));
        let other = meyerstop::projection::project(s, &other, FieldKind::Lambda);
        let differs = times.iter().any(|t| inst.z.at_time(t) != other.at_time(t));
        assert_eq!(differs, other != inst.z);
    }
}

#[test]
fn restrict_preserves_stopping_iff_h_in_field_at_t() {
    for inst in instances(12, RewardShape::Free) {
        let s = &inst.space;
        let n = s.n_paths();
        if n > 6 {
            continue;
        }
        let times = enumerate_stopping_times(s, FieldKind::Lambda, None, 2_000).unwrap_or_default();
        for t in times.iter().take(200) {
            let ft = s.field_at_time(t, FieldKind::Lambda);
            for mask in 0..(1u32 << n) {
                let h = PathSet::from_fn(n, |p| mask >> p & 1 == 1);
                // only the part of H where T is finite matters
                let hf = h.intersection(&t.finite_set());
                let in_field = ft.is_union_of_atoms(&hf);
                assert_eq!(s.is_lambda_stopping_time(&t.restrict(&h)), in_field, "T={t}");
            }
        }
    }
}
