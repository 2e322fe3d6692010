//! Seeded random instances: binary-branching lattices with random Meyer
//! structures, nonnegative rewards and representation bundles.

use crate::enumerate::{count_divided_stops, count_stopping_times};
use crate::lattice::{int, ratio, FieldKind, Instant, LatticeProcess, MeyerSpace, Partition, Q};
use crate::representation::{forward_evaluate, RandomMeasure, DEFAULT_TOLERANCE};
use crate::scenario::{Coef, CommandMeta, GKindChoice, GConfig, Scenario};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `G_k = F_{k-1}`.
    PredictableExtreme,
    /// `G_k = F_k`.
    OptionalExtreme,
    RandomBetween,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardShape {
    Free,
    /// Built backward so that both semicontinuity predicates hold.
    UscShaped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstanceParams {
    pub seed: u64,
    pub epochs: usize,
    pub max_paths: usize,
    /// Reward and signal values are drawn from `0..=value_range`.
    pub value_range: u32,
    pub regime: Regime,
    /// Probability that an optional atom carries `mu` mass at an instant.
    pub mu_density: f64,
    pub reward: RewardShape,
    pub g_kind: GKindChoice,
    /// Cap on the number of Lambda, optional, predictable and divided
    /// stopping times.
    pub budget: u128,
}

impl Default for RandomInstanceParams {
    fn default() -> Self {
        RandomInstanceParams {
            seed: 0,
            epochs: 2,
            max_paths: 6,
            value_range: 6,
            regime: Regime::RandomBetween,
            mu_density: 0.5,
            reward: RewardShape::Free,
            g_kind: GKindChoice::Affine,
            budget: 20_000,
        }
    }
}

pub const MAX_EPOCHS: usize = 4;
pub const MAX_PATHS: usize = 12;

struct Tree {
    /// `levels[k][leaf]` = node index at epoch `k`.
    levels: Vec<Vec<usize>>,
    probs: Vec<Q>,
}

const SPLITS: [(i64, i64); 5] = [(1, 2), (1, 3), (2, 3), (1, 4), (3, 4)];

fn grow(rng: &mut ChaCha8Rng, epochs: usize, max_paths: usize) -> Tree {
    // Leaves carry their ancestry; node ids are per-level indices.
    let mut leaves: Vec<(Vec<usize>, Q)> = vec![(Vec::new(), int(1))];
    for _ in 0..=epochs {
        let mut next = Vec::new();
        let mut count = leaves.len();
        for (hist, p) in &leaves {
            let branch = count < max_paths && rng.random_bool(0.6);
            if branch {
                count += 1;
                let (n, d) = SPLITS[rng.random_range(0..SPLITS.len())];
                let w = ratio(n, d);
                for q in [w.clone(), int(1) - &w] {
                    let mut h = hist.clone();
                    h.push(next.len());
                    next.push((h, p * q));
                }
            } else {
                let mut h = hist.clone();
                h.push(next.len());
                next.push((h, p.clone()));
            }
        }
        leaves = next;
    }
    let n = leaves.len();
    let levels = (0..=epochs).map(|k| (0..n).map(|i| leaves[i].0[k]).collect()).collect();
    Tree {
        levels,
        probs: leaves.into_iter().map(|(_, p)| p).collect(),
    }
}

fn atoms_of<T: Eq>(labels: &[T]) -> Vec<Vec<usize>> {
    Partition::from_labels(labels).atoms().to_vec()
}

fn meyer_level(rng: &mut ChaCha8Rng, regime: Regime, coarse: &[usize], fine: &[usize]) -> Vec<Vec<usize>> {
    match regime {
        Regime::PredictableExtreme => atoms_of(coarse),
        Regime::OptionalExtreme => atoms_of(fine),
        Regime::RandomBetween => {
            // Each coarse atom that branches keeps or merges its children.
            let mut merged = Vec::new();
            let mut decided = std::collections::BTreeMap::new();
            for (&c, &f) in coarse.iter().zip(fine) {
                let merge = *decided.entry(c).or_insert_with(|| rng.random_bool(0.5));
                merged.push(if merge { (c, usize::MAX) } else { (c, f) });
            }
            atoms_of(&merged)
        }
    }
}

fn ids(atoms: &[Vec<usize>]) -> Vec<Vec<String>> {
    atoms
        .iter()
        .map(|a| a.iter().map(|&p| format!("p{p}")).collect())
        .collect()
}

fn draw(rng: &mut ChaCha8Rng, range: u32) -> Q {
    let n = rng.random_range(0..=2 * range as i64);
    ratio(n, 2)
}

/// Random values constant on the atoms of the field at each instant.
fn measurable(
    space: &MeyerSpace,
    kind: FieldKind,
    rng: &mut ChaCha8Rng,
    mut f: impl FnMut(&mut ChaCha8Rng, Instant) -> Q,
) -> LatticeProcess {
    let mut z = LatticeProcess::zeros_on(space);
    for u in space.instants() {
        let part = space.field(u, kind);
        let vals: Vec<Q> = (0..part.len()).map(|_| f(rng, u)).collect();
        z.set_slice(u, (0..space.n_paths()).map(|p| vals[part.atom_of(p)].clone()).collect());
    }
    z
}

fn free_reward(space: &MeyerSpace, rng: &mut ChaCha8Rng, range: u32) -> LatticeProcess {
    measurable(space, FieldKind::Lambda, rng, |r, _| draw(r, range))
}

fn usc_reward(space: &MeyerSpace, rng: &mut ChaCha8Rng, range: u32) -> LatticeProcess {
    let k_max = space.horizon();
    let mut z = LatticeProcess::zeros_on(space);
    for k in (0..=k_max).rev() {
        if k < k_max {
            let below = space.conditional_expectation(z.slice(Instant::At(k + 1)), space.filtration(k));
            let t = ratio(rng.random_range(0..=2), 2);
            z.set_slice(Instant::Int(k), below.iter().map(|v| v * &t).collect());
        }
        let g = space.meyer_field(k);
        let base = space.conditional_expectation(z.slice(Instant::Int(k)), g);
        let bumps: Vec<Q> = (0..g.len()).map(|_| draw(rng, range)).collect();
        z.set_slice(
            Instant::At(k),
            (0..space.n_paths()).map(|p| &base[p] + &bumps[g.atom_of(p)]).collect(),
        );
    }
    z
}

fn within_budget(space: &MeyerSpace, budget: u128) -> bool {
    [FieldKind::Lambda, FieldKind::Optional, FieldKind::Predictable]
        .into_iter()
        .all(|k| count_stopping_times(space, k, None) <= budget)
        && count_divided_stops(space, None) <= budget
}

fn per_path(space: &MeyerSpace, z: &LatticeProcess) -> Coef {
    Coef::PerPath(Scenario::rows_of(space, z))
}

/// A scenario with reward `Z`, signal `L`, its reward `X`, `g`, `mu` and an
/// eight-point level grid. Pure function of `params`.
pub fn generate_instance(params: &RandomInstanceParams) -> Scenario {
    let epochs = params.epochs.clamp(1, MAX_EPOCHS);
    let mut max_paths = params.max_paths.clamp(1, MAX_PATHS);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut attempt = 0;
    let (mut scenario, space) = loop {
        let tree = grow(&mut rng, epochs, max_paths);
        let n = tree.probs.len();
        let mut meyer = vec![meyer_level(&mut rng, params.regime, &vec![0; n], &tree.levels[0])];
        for k in 1..=epochs {
            meyer.push(meyer_level(&mut rng, params.regime, &tree.levels[k - 1], &tree.levels[k]));
        }
        let s = Scenario::from_space_parts(
            epochs,
            (0..n).map(|p| (format!("p{p}"), tree.probs[p].clone())).collect(),
            tree.levels.iter().map(|l| ids(&atoms_of(l))).collect(),
            meyer.iter().map(|m| ids(m)).collect(),
        );
        let space = s.space().expect("generated lattices are valid");
        attempt += 1;
        if within_budget(&space, params.budget) || max_paths == 1 {
            break (s, space);
        }
        if attempt % 4 == 0 {
            max_paths -= 1;
        }
    };

    let range = params.value_range.max(1);
    let z = match params.reward {
        RewardShape::Free => free_reward(&space, &mut rng, range),
        RewardShape::UscShaped => usc_reward(&space, &mut rng, range),
    };
    let l = measurable(&space, FieldKind::Lambda, &mut rng, |r, _| int(r.random_range(0..=range as i64)));
    let monotone = params.g_kind == GKindChoice::Monotone;
    let ga = measurable(&space, FieldKind::Optional, &mut rng, |r, _| int(r.random_range(0..=2)));
    let (gb, gc) = if monotone {
        let c = measurable(&space, FieldKind::Optional, &mut rng, |r, _| int(r.random_range(0..=1)));
        let b = c.map(|c| if c.is_zero() { int(1) } else { Q::zero() });
        let extra = measurable(&space, FieldKind::Optional, &mut rng, |r, _| int(r.random_range(0..=1)));
        (b.zip_with(&extra, |b, e| b + e), c)
    } else {
        (
            measurable(&space, FieldKind::Optional, &mut rng, |r, _| int(r.random_range(1..=3))),
            LatticeProcess::zeros_on(&space),
        )
    };
    let density = params.mu_density.clamp(0.0, 1.0);
    let mu = measurable(&space, FieldKind::Optional, &mut rng, |r, _| {
        if r.random_bool(density) {
            int(r.random_range(1..=3))
        } else {
            Q::zero()
        }
    });
    let g_config = GConfig {
        kind: params.g_kind,
        a: per_path(&space, &ga),
        b: per_path(&space, &gb),
        c: monotone.then(|| per_path(&space, &gc)),
        tolerance: monotone.then_some(DEFAULT_TOLERANCE),
    };
    scenario.g = Some(g_config);
    scenario.mu = Some(per_path(&space, &mu));
    let g = scenario.g_family(&space).expect("generated g is valid").expect("g present");
    let x = forward_evaluate(&space, &g, &RandomMeasure::new(mu).expect("mu"), &l).expect("forward");

    let vals: Vec<Q> = (0..space.n_paths()).flat_map(|p| l.path_row(p)).collect();
    let min = vals.iter().min().cloned().unwrap_or_else(Q::zero) - ratio(1, 2);
    let max = vals.iter().max().cloned().unwrap_or_else(Q::zero) + ratio(1, 2);
    scenario.ell_grid = (0..8).map(|i| &min + (&max - &min) * ratio(i, 7)).collect();

    scenario.processes.insert("Z".into(), Scenario::rows_of(&space, &z));
    scenario.processes.insert("L".into(), Scenario::rows_of(&space, &l));
    scenario.processes.insert("X".into(), Scenario::rows_of(&space, &x));
    scenario.commands = CommandMeta {
        process: Some("Z".into()),
        signal: Some("L".into()),
        reward: Some("X".into()),
    };
    scenario
}
