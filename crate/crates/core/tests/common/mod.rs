#![allow(dead_code)]

use meyerstop::generate::{generate_instance, RandomInstanceParams, Regime, RewardShape};
use meyerstop::lattice::{int, FilteredLattice, MeyerStructure, PathRecord};
use meyerstop::representation::{Cubic, GFamily, GKind, RandomMeasure};
use meyerstop::scenario::Scenario;
use meyerstop::{Instant, LatticeProcess, MeyerSpace, Q};

pub fn q(s: &str) -> Q {
    meyerstop::scenario::parse_rational(s).unwrap()
}

pub fn qs(v: &[i64]) -> Vec<Q> {
    v.iter().map(|&x| int(x)).collect()
}

/// Two equal-weight paths `a`, `b`, one branching at epoch 1.
pub fn two_path(optional: bool) -> MeyerSpace {
    let lattice = FilteredLattice {
        horizon: 1,
        paths: ["a", "b"]
            .iter()
            .map(|id| PathRecord {
                id: id.to_string(),
                probability: meyerstop::lattice::ratio(1, 2),
            })
            .collect(),
        filtration: vec![vec![vec![0, 1]], vec![vec![0], vec![1]]],
        initial_field: None,
    };
    let g1 = if optional { vec![vec![0], vec![1]] } else { vec![vec![0, 1]] };
    MeyerSpace::new(lattice, MeyerStructure { fields: vec![vec![vec![0, 1]], g1] }).unwrap()
}

/// `Z = 1` at epoch 0, `(4,0)` at `(1,AT)`, `0` after.
pub fn branch_reward() -> LatticeProcess {
    LatticeProcess::from_path_rows(&[qs(&[1, 1, 4, 0]), qs(&[1, 1, 0, 0])]).unwrap()
}

pub fn single_path(horizon: usize) -> MeyerSpace {
    let lattice = FilteredLattice {
        horizon,
        paths: vec![PathRecord {
            id: "w".into(),
            probability: int(1),
        }],
        filtration: vec![vec![vec![0]]; horizon + 1],
        initial_field: None,
    };
    MeyerSpace::new(lattice, MeyerStructure { fields: vec![vec![vec![0]]; horizon + 1] }).unwrap()
}

pub fn deterministic(values: &[i64]) -> LatticeProcess {
    LatticeProcess::from_path_rows(&[qs(values)]).unwrap()
}

/// `g = l`, `mu = 1` at `(0,AT)` and `(1,AT)`.
pub fn single_path_rep() -> (MeyerSpace, GFamily, RandomMeasure) {
    let space = single_path(1);
    let g = GFamily::from_fn(&space, GKind::Affine, |_, _| Cubic::affine(int(0), int(1)));
    let mu = RandomMeasure::new(deterministic(&[1, 0, 1, 0])).unwrap();
    (space, g, mu)
}

pub const REGIMES: [Regime; 3] = [Regime::PredictableExtreme, Regime::OptionalExtreme, Regime::RandomBetween];

pub fn params(seed: u64, epochs: usize, max_paths: usize, regime: Regime) -> RandomInstanceParams {
    RandomInstanceParams {
        seed,
        epochs,
        max_paths,
        regime,
        ..Default::default()
    }
}

pub struct Instance {
    pub scenario: Scenario,
    pub space: MeyerSpace,
    pub z: LatticeProcess,
}

pub fn instance(p: &RandomInstanceParams) -> Instance {
    let scenario = generate_instance(p);
    let space = scenario.space().unwrap();
    let z = scenario.process("Z").unwrap();
    Instance { scenario, space, z }
}

/// Small instances cycling through regimes and sizes.
pub fn instances(n: u64, reward: RewardShape) -> Vec<Instance> {
    (0..n)
        .map(|seed| {
            let mut p = params(seed, 1 + (seed % 3) as usize, 3 + (seed % 4) as usize, REGIMES[(seed % 3) as usize]);
            p.reward = reward;
            instance(&p)
        })
        .collect()
}

pub fn at(k: usize) -> Instant {
    Instant::At(k)
}

pub fn int_(k: usize) -> Instant {
    Instant::Int(k)
}
