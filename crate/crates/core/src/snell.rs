//! Snell envelope, decomposition of the envelope, optimal divided stops
//! `delta_S` and `sigma_S`, optimality certificates and brute-force oracles.

use crate::divided::{to_divided_quadruple, DividedQuadruple};
use crate::enumerate::{argmax_scaled, enumerate_stopping_times, ScaledTable};
use crate::error::{Error, Result};
use crate::lattice::{FieldKind, Instant, LatticeProcess, MeyerSpace, PathSet, RandomInstant, Q};
use crate::projection::{is_left_usc_in_expectation, is_right_usc_in_expectation, project, require_reward};
use num_traits::{One, Signed, Zero};

/// Backward recursion: `max(Z, E[next envelope | field at u])`.
pub fn snell_envelope(space: &MeyerSpace, z: &LatticeProcess) -> Result<LatticeProcess> {
    require_reward(space, z, "reward")?;
    let mut env = z.clone();
    let mut next = z.terminal().to_vec();
    for u in space.instants().into_iter().rev() {
        let cont = space.conditional_expectation(&next, space.field(u, FieldKind::Lambda));
        let s: Vec<Q> = z.slice(u).iter().zip(cont).map(|(a, b)| if *a >= b { a.clone() } else { b }).collect();
        env.set_slice(u, s.clone());
        next = s;
    }
    Ok(env)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForce {
    pub value: Q,
    pub optimizers: Vec<RandomInstant>,
    pub candidates: usize,
}

/// Maximises `E[Z_T]` over every Lambda-stopping time `T >= from`.
pub fn snell_brute_force_from(
    space: &MeyerSpace,
    z: &LatticeProcess,
    from: Option<&RandomInstant>,
    limit: u128,
) -> Result<BruteForce> {
    require_reward(space, z, "reward")?;
    let times = enumerate_stopping_times(space, FieldKind::Lambda, from, limit)?;
    let table = ScaledTable::new(space, z);
    let (value, idx) = argmax_scaled(&table, &times);
    Ok(BruteForce {
        value,
        optimizers: idx.into_iter().map(|i| times[i].clone()).collect(),
        candidates: times.len(),
    })
}

pub fn snell_brute_force(space: &MeyerSpace, z: &LatticeProcess, limit: u128) -> Result<BruteForce> {
    snell_brute_force_from(space, z, None, limit)
}

/// First (path, instant) where `ok(Z_u, E[Z_next | field at u])` fails.
fn step_failure(
    space: &MeyerSpace,
    z: &LatticeProcess,
    ok: impl Fn(&Q, &Q) -> bool,
) -> Option<(usize, Instant)> {
    for u in space.instants() {
        let next = space.successor(u).expect("finite instant");
        let cont = space.conditional_expectation(z.slice(next), space.field(u, FieldKind::Lambda));
        if let Some(p) = (0..space.n_paths()).find(|&p| !ok(z.value(p, u), &cont[p])) {
            return Some((p, u));
        }
    }
    None
}

fn require_adapted(space: &MeyerSpace, z: &LatticeProcess) -> Result<()> {
    if z.n_paths() != space.n_paths() || z.n_instants() != space.n_instants() {
        return Err(Error::Shape("process does not match the lattice".into()));
    }
    space.require_measurable(z, FieldKind::Lambda, "process")
}

/// One-step test `Z_u >= E[Z_{u'} | field at u]`, the last step reading the terminal slice.
pub fn is_lambda_supermartingale(space: &MeyerSpace, z: &LatticeProcess) -> Result<bool> {
    require_adapted(space, z)?;
    Ok(step_failure(space, z, |a, b| a >= b).is_none())
}

pub fn is_lambda_martingale(space: &MeyerSpace, z: &LatticeProcess) -> Result<bool> {
    require_adapted(space, z)?;
    Ok(step_failure(space, z, |a, b| a == b).is_none())
}

/// `Zbar = M - A - B_-`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MertensDecomposition {
    pub m: LatticeProcess,
    pub a: LatticeProcess,
    pub b: LatticeProcess,
}

impl MertensDecomposition {
    /// `B` at the predecessor instant, 0 before `(0,AT)`.
    pub fn b_shifted(&self, space: &MeyerSpace, p: usize, u: Instant) -> Q {
        match space.predecessor(u) {
            Some(v) => self.b.value(p, v).clone(),
            None => Q::zero(),
        }
    }
}

pub fn mertens_decompose(space: &MeyerSpace, zbar: &LatticeProcess) -> Result<MertensDecomposition> {
    require_reward(space, zbar, "envelope")?;
    if let Some((path, at)) = step_failure(space, zbar, |a, b| a >= b) {
        return Err(Error::NotSupermartingale { path, at });
    }
    let n = space.n_paths();
    let pz = project(space, zbar, FieldKind::Predictable);
    let mut a = LatticeProcess::zeros_on(space);
    let mut b = LatticeProcess::zeros_on(space);
    let mut m = LatticeProcess::zeros_on(space);
    let mut a_prev = vec![Q::zero(); n];
    let mut b_prev = vec![Q::zero(); n];
    for k in 0..=space.horizon() {
        let at = Instant::At(k);
        let int_ = Instant::Int(k);
        let cont = space.conditional_expectation(zbar.slice(int_), space.meyer_field(k));
        for p in 0..n {
            let da = if k == 0 {
                Q::zero()
            } else {
                zbar.value(p, Instant::Int(k - 1)) - pz.value(p, at)
            };
            let db = zbar.value(p, at) - &cont[p];
            let av = &a_prev[p] + da;
            let bv = &b_prev[p] + db;
            m.set(p, at, zbar.value(p, at) + &av + &b_prev[p]);
            m.set(p, int_, zbar.value(p, int_) + &av + &bv);
            a.set(p, at, av.clone());
            a.set(p, int_, av.clone());
            b.set(p, at, bv.clone());
            b.set(p, int_, bv.clone());
            a_prev[p] = av;
            b_prev[p] = bv;
        }
    }
    let last = Instant::Int(space.horizon());
    let a_inf: Vec<Q> = (0..n).map(|p| &a_prev[p] + zbar.value(p, last)).collect();
    let m_inf: Vec<Q> = (0..n).map(|p| &a_inf[p] + &b_prev[p]).collect();
    Ok(MertensDecomposition {
        m: m.with_terminal(m_inf),
        a: a.with_terminal(a_inf),
        b: b.with_terminal(b_prev),
    })
}

/// First instant `u >= S` with `lambda * Zbar_u <= Z_u`.
pub fn lambda_entry_time(
    space: &MeyerSpace,
    z: &LatticeProcess,
    zbar: &LatticeProcess,
    lambda: &Q,
    s: &RandomInstant,
) -> Result<RandomInstant> {
    if !lambda.is_positive() || *lambda >= Q::one() {
        return Err(Error::LambdaRange(lambda.to_string()));
    }
    space.require_stopping_time(s, FieldKind::Lambda, "S")?;
    Ok(first_from(space, s, |p, u| lambda * zbar.value(p, u) <= *z.value(p, u)))
}

fn first_from(space: &MeyerSpace, s: &RandomInstant, hit: impl Fn(usize, Instant) -> bool) -> RandomInstant {
    let all = space.instants_with_terminal();
    RandomInstant::new(
        (0..space.n_paths())
            .map(|p| {
                all.iter()
                    .copied()
                    .filter(|&u| u >= s.at(p))
                    .find(|&u| hit(p, u))
                    .unwrap_or(Instant::Terminal)
            })
            .collect(),
    )
}

/// Largest ratio `Z/Zbar` over points where `Z < Zbar`; entry times for
/// `lambda` above it coincide with the entry of `{Zbar = Z}`.
pub fn lambda_threshold(z: &LatticeProcess, zbar: &LatticeProcess) -> Q {
    let mut best = Q::zero();
    for u in 0..z.n_instants() {
        let u = Instant::from_rank(u, z.horizon());
        for p in 0..z.n_paths() {
            let (a, b) = (z.value(p, u), zbar.value(p, u));
            if a < b {
                let r = a / b;
                if r > best {
                    best = r;
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaStop {
    pub instant: RandomInstant,
    pub quadruple: DividedQuadruple,
}

/// Entry of `{Zbar = Z}` after `S`.
pub fn delta_stop(space: &MeyerSpace, z: &LatticeProcess, s: &RandomInstant) -> Result<DeltaStop> {
    let zbar = snell_envelope(space, z)?;
    space.require_stopping_time(s, FieldKind::Lambda, "S")?;
    let instant = first_from(space, s, |p, u| zbar.value(p, u) == z.value(p, u));
    let quadruple = to_divided_quadruple(space, &instant)?;
    Ok(DeltaStop { instant, quadruple })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigmaStop {
    /// First instant after `S` at which `A + B` grows.
    pub growth: RandomInstant,
    pub instant: RandomInstant,
    pub quadruple: DividedQuadruple,
    pub k_minus: PathSet,
    pub k: PathSet,
    pub k_plus: PathSet,
}

/// Stop just before `A` grows, at the instant `B` grows.
pub fn sigma_stop(space: &MeyerSpace, z: &LatticeProcess, s: &RandomInstant) -> Result<SigmaStop> {
    let zbar = snell_envelope(space, z)?;
    space.require_stopping_time(s, FieldKind::Lambda, "S")?;
    let dec = mertens_decompose(space, &zbar)?;
    let n = space.n_paths();
    let k_max = space.horizon();
    let base = |p: usize| dec.a.value(p, s.at(p)) + dec.b_shifted(space, p, s.at(p));
    let growth = first_from(space, s, |p, u| dec.a.value(p, u) + dec.b.value(p, u) > base(p));

    let mut k_minus = PathSet::empty(n);
    let mut k_set = PathSet::empty(n);
    let mut k_plus = PathSet::empty(n);
    let mut time = Vec::with_capacity(n);
    let mut w_minus = PathSet::empty(n);
    let mut w = PathSet::empty(n);
    let mut instant = Vec::with_capacity(n);
    for p in 0..n {
        let t = growth.at(p);
        let a_up = dec.a.value(p, t) > dec.a.value(p, s.at(p));
        let b_up = *dec.b.value(p, t) > dec.b_shifted(space, p, s.at(p));
        let grew = dec.a.value(p, t) + dec.b.value(p, t) > base(p);
        debug_assert!(!t.is_int(), "A + B only grows at AT instants or at TERMINAL");
        time.push(t);
        if grew && a_up {
            k_minus.insert(p);
            w_minus.insert(p);
            instant.push(match t {
                Instant::At(e) => Instant::Int(e - 1),
                _ => Instant::Int(k_max),
            });
        } else {
            if grew && b_up {
                k_set.insert(p);
            } else if grew {
                k_plus.insert(p);
            }
            w.insert(p);
            instant.push(t);
        }
    }
    Ok(SigmaStop {
        growth,
        instant: RandomInstant::new(instant),
        quadruple: DividedQuadruple {
            time: RandomInstant::new(time),
            w_minus,
            w,
            w_plus: PathSet::empty(n),
        },
        k_minus,
        k: k_set,
        k_plus,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimalityCertificate {
    pub candidate: RandomInstant,
    pub condition_i: bool,
    pub condition_ii: bool,
    pub optimal: bool,
}

/// `Zbar` frozen after `U`.
pub fn stopped(space: &MeyerSpace, zbar: &LatticeProcess, u: &RandomInstant) -> LatticeProcess {
    let mut out = LatticeProcess::from_fn(space, |p, t| zbar.value(p, t.min(u.at(p))).clone());
    let term = (0..space.n_paths()).map(|p| zbar.value(p, u.at(p)).clone()).collect();
    out = out.with_terminal(term);
    out
}

/// (i) `Z_U = Zbar_U`; (ii) `Zbar` stopped at `U` is a Lambda-martingale.
pub fn check_optimality(space: &MeyerSpace, z: &LatticeProcess, u: &RandomInstant) -> Result<OptimalityCertificate> {
    let zbar = snell_envelope(space, z)?;
    space.require_stopping_time(u, FieldKind::Lambda, "U")?;
    check_optimality_with(space, z, &zbar, u)
}

pub fn check_optimality_with(
    space: &MeyerSpace,
    z: &LatticeProcess,
    zbar: &LatticeProcess,
    u: &RandomInstant,
) -> Result<OptimalityCertificate> {
    let condition_i = (0..space.n_paths()).all(|p| z.value(p, u.at(p)) == zbar.value(p, u.at(p)));
    let condition_ii = is_lambda_martingale(space, &stopped(space, zbar, u))?;
    Ok(OptimalityCertificate {
        candidate: u.clone(),
        condition_i,
        condition_ii,
        optimal: condition_i && condition_ii,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimalBounds {
    /// Debut of `{Z = Zbar}`.
    pub smallest: RandomInstant,
    /// Debut of `{M != Zbar}`.
    pub largest: RandomInstant,
    pub smallest_certified: bool,
    pub largest_certified: bool,
    pub all_optimal: Vec<RandomInstant>,
}

/// Debut of a set in grid time: a first hit inside `(t_k, t_{k+1})` debuts at `t_k`.
fn debut(space: &MeyerSpace, hit: impl Fn(usize, Instant) -> bool) -> RandomInstant {
    let s = space.constant_time(Instant::At(0));
    let first = first_from(space, &s, hit);
    RandomInstant::new(
        first
            .as_slice()
            .iter()
            .map(|u| match u {
                Instant::Int(k) => Instant::At(*k),
                u => *u,
            })
            .collect(),
    )
}

pub fn is_optional_structure(space: &MeyerSpace) -> bool {
    (0..=space.horizon()).all(|k| space.meyer_field(k) == space.filtration(k))
}

/// Smallest and largest optimal stopping times in the optional case.
pub fn smallest_largest_optimal(space: &MeyerSpace, z: &LatticeProcess, limit: u128) -> Result<OptimalBounds> {
    if !is_optional_structure(space) {
        return Err(Error::Precondition("Meyer structure is not optional".into()));
    }
    let right = is_right_usc_in_expectation(space, z)?;
    if let Some((p, u)) = right.witness {
        return Err(Error::Precondition(format!(
            "right-USC in expectation fails at path {}, {u}",
            space.path_id(p)
        )));
    }
    let left = is_left_usc_in_expectation(space, z)?;
    if let Some((p, u)) = left.witness {
        return Err(Error::Precondition(format!(
            "left-USC in expectation fails at path {}, {u}",
            space.path_id(p)
        )));
    }
    let zbar = snell_envelope(space, z)?;
    let dec = mertens_decompose(space, &zbar)?;
    let smallest = debut(space, |p, u| z.value(p, u) == zbar.value(p, u));
    let largest = debut(space, |p, u| dec.m.value(p, u) != zbar.value(p, u));
    let smallest_certified = check_optimality_with(space, z, &zbar, &smallest)?.optimal;
    let largest_certified = check_optimality_with(space, z, &zbar, &largest)?.optimal;
    let all_optimal = snell_brute_force(space, z, limit)?.optimizers;
    Ok(OptimalBounds {
        smallest,
        largest,
        smallest_certified,
        largest_certified,
        all_optimal,
    })
}

/// Root value `E[Zbar at (0,AT)]`.
pub fn root_value(space: &MeyerSpace, zbar: &LatticeProcess) -> Q {
    space.expectation(zbar.slice(Instant::At(0)))
}
