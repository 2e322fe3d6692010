//! Lambda-, optional and predictable projections, left/right envelopes, the
//! semicontinuity-in-expectation predicates and the Fatou-type chains.

use crate::enumerate::{enumerate_stopping_times, ScaledTable, ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::lattice::{FieldKind, Instant, LatticeProcess, MeyerSpace, RandomInstant, Q};
use num_traits::Signed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Limit superior or inferior. Both read a single slice on the lattice, so
/// they coincide; kept so call sites match the notation they implement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sup,
    Inf,
}

/// Slice-wise conditional expectation on the instant field; terminal slice unchanged.
pub fn project(space: &MeyerSpace, z: &LatticeProcess, kind: FieldKind) -> LatticeProcess {
    let mut out = z.clone();
    for u in space.instants() {
        let s = space.conditional_expectation(z.slice(u), space.field(u, kind));
        out.set_slice(u, s);
    }
    out
}

/// Right envelope reads `(k,INT)` at `(k,AT)`; left envelope reads
/// `(k-1,INT)` at `(k,AT)` for `k >= 1`. Both read themselves at INT
/// instants. At `TERMINAL` the left envelope reads `(K,INT)` and the right
/// one keeps the terminal value.
pub fn envelope(space: &MeyerSpace, z: &LatticeProcess, side: Side, _mode: Mode) -> LatticeProcess {
    let mut out = z.clone();
    for u in space.instants() {
        let src = match (side, u) {
            (Side::Right, Instant::At(k)) => Instant::Int(k),
            (Side::Left, Instant::At(k)) if k >= 1 => Instant::Int(k - 1),
            _ => u,
        };
        out.set_slice(u, z.slice(src).to_vec());
    }
    if side == Side::Left {
        let last = z.slice(Instant::Int(space.horizon())).to_vec();
        out.set_slice(Instant::Terminal, last);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UscVerdict {
    pub holds: bool,
    /// First violating (path, instant) in instant order.
    pub witness: Option<(usize, Instant)>,
}

impl UscVerdict {
    fn from_witness(witness: Option<(usize, Instant)>) -> Self {
        UscVerdict {
            holds: witness.is_none(),
            witness,
        }
    }
}

pub(crate) fn require_reward(space: &MeyerSpace, z: &LatticeProcess, what: &str) -> Result<()> {
    if z.n_paths() != space.n_paths() || z.n_instants() != space.n_instants() {
        return Err(Error::Shape(format!("{what} does not match the lattice")));
    }
    space.require_measurable(z, FieldKind::Lambda, what)?;
    if let Some((path, at)) = z.first_negative() {
        return Err(Error::Negative {
            what: what.to_string(),
            path,
            at,
        });
    }
    if !z.has_zero_terminal() {
        return Err(Error::NonzeroTerminal(what.to_string()));
    }
    Ok(())
}

/// `Z >= ^Lambda(Z*)` at every (path, instant).
pub fn is_right_usc_in_expectation(space: &MeyerSpace, z: &LatticeProcess) -> Result<UscVerdict> {
    require_reward(space, z, "process")?;
    let rhs = project(space, &envelope(space, z, Side::Right, Mode::Sup), FieldKind::Lambda);
    let witness = space.instants().into_iter().find_map(|u| {
        (0..space.n_paths())
            .find(|&p| z.value(p, u) < rhs.value(p, u))
            .map(|p| (p, u))
    });
    Ok(UscVerdict::from_witness(witness))
}

/// `^P Z >= *Z` at every instant after `(0,AT)`, and `*Z_inf <= 0`.
pub fn is_left_usc_in_expectation(space: &MeyerSpace, z: &LatticeProcess) -> Result<UscVerdict> {
    require_reward(space, z, "process")?;
    let pz = project(space, z, FieldKind::Predictable);
    let left = envelope(space, z, Side::Left, Mode::Sup);
    let mut witness = space.instants().into_iter().skip(1).find_map(|u| {
        (0..space.n_paths())
            .find(|&p| pz.value(p, u) < left.value(p, u))
            .map(|p| (p, u))
    });
    if witness.is_none() {
        witness = (0..space.n_paths())
            .find(|&p| left.value(p, Instant::Terminal).is_positive())
            .map(|p| (p, Instant::Terminal));
    }
    Ok(UscVerdict::from_witness(witness))
}

/// `S` moved to the interior of its epoch.
pub fn right_step(t: &RandomInstant) -> RandomInstant {
    RandomInstant::new(
        t.as_slice()
            .iter()
            .map(|u| match u {
                Instant::At(k) => Instant::Int(*k),
                u => *u,
            })
            .collect(),
    )
}

/// `S` moved to the interior just before it; `(0,AT)` stays, `TERMINAL` reads `(K,INT)`.
pub fn left_step(t: &RandomInstant, horizon: usize) -> RandomInstant {
    RandomInstant::new(
        t.as_slice()
            .iter()
            .map(|u| match u {
                Instant::At(k) if *k >= 1 => Instant::Int(k - 1),
                Instant::Terminal => Instant::Int(horizon),
                u => *u,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UscEquivalenceReport {
    pub right_predicate: bool,
    pub right_sequence: bool,
    pub left_predicate: bool,
    pub left_sequence: bool,
    /// Stopping times at which a sequence definition fails.
    pub right_counterexample: Option<RandomInstant>,
    pub left_counterexample: Option<RandomInstant>,
    pub stopping_times_checked: usize,
}

impl UscEquivalenceReport {
    pub fn agrees(&self) -> bool {
        self.right_predicate == self.right_sequence && self.left_predicate == self.left_sequence
    }
}

/// Compares the projection predicates with the sequence definitions
/// `E[Z_S] >= limsup E[Z_{S_n}]`. On the lattice every monotone sequence is
/// eventually constant, so it suffices to compare each Lambda-stopping `S`
/// with its right step and each predictable `S` with its left step.
pub fn check_usc_sequence_equivalence(space: &MeyerSpace, z: &LatticeProcess) -> Result<UscEquivalenceReport> {
    let right = is_right_usc_in_expectation(space, z)?;
    let left = is_left_usc_in_expectation(space, z)?;
    let table = ScaledTable::new(space, z);

    let lam = enumerate_stopping_times(space, FieldKind::Lambda, None, ENUMERATION_LIMIT)?;
    let right_bad = crate::par::map(&lam, |s| table.scaled(s) < table.scaled(&right_step(s)));
    let right_counterexample = right_bad.iter().position(|b| *b).map(|i| lam[i].clone());

    let pred = enumerate_stopping_times(space, FieldKind::Predictable, None, ENUMERATION_LIMIT)?;
    let k = space.horizon();
    let left_bad = crate::par::map(&pred, |s| table.scaled(s) < table.scaled(&left_step(s, k)));
    let left_counterexample = left_bad.iter().position(|b| *b).map(|i| pred[i].clone());

    Ok(UscEquivalenceReport {
        right_predicate: right.holds,
        right_sequence: right_counterexample.is_none(),
        left_predicate: left.holds,
        left_sequence: left_counterexample.is_none(),
        right_counterexample,
        left_counterexample,
        stopping_times_checked: lam.len() + pred.len(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FatouReport {
    pub optional_times: usize,
    pub predictable_times: usize,
    pub failures: Vec<String>,
}

impl FatouReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Projection that also conditions the terminal slice on `F_K`.
fn project_full(space: &MeyerSpace, z: &LatticeProcess, kind: FieldKind) -> LatticeProcess {
    let mut out = project(space, z, kind);
    let t = space.conditional_expectation(z.terminal(), space.filtration(space.horizon()));
    out.set_slice(Instant::Terminal, t);
    out
}

/// Checks both Fatou chains and the two limit identities at every
/// enumerated optional and predictable stopping time. The predictable chain
/// is read on `{T > (0,AT)}`.
pub fn check_projection_fatou(space: &MeyerSpace, z: &LatticeProcess) -> Result<FatouReport> {
    if z.n_paths() != space.n_paths() || z.n_instants() != space.n_instants() {
        return Err(Error::Shape("process does not match the lattice".into()));
    }
    if !z.has_zero_terminal() {
        return Err(Error::NonzeroTerminal("process".into()));
    }
    let lz = project_full(space, z, FieldKind::Lambda);
    let env = |x: &LatticeProcess, s, m| envelope(space, x, s, m);

    let o_rinf = project_full(space, &env(z, Side::Right, Mode::Inf), FieldKind::Optional);
    let l_rinf = env(&lz, Side::Right, Mode::Inf);
    let l_rsup = env(&lz, Side::Right, Mode::Sup);
    let o_rsup = project_full(space, &env(z, Side::Right, Mode::Sup), FieldKind::Optional);

    let p_linf = project_full(space, &env(z, Side::Left, Mode::Inf), FieldKind::Predictable);
    let l_linf = env(&lz, Side::Left, Mode::Inf);
    let l_lsup = env(&lz, Side::Left, Mode::Sup);
    let p_lsup = project_full(space, &env(z, Side::Left, Mode::Sup), FieldKind::Predictable);

    let chain = |t: &RandomInstant, c: [&LatticeProcess; 4], skip_first: bool, label: &str| -> Vec<String> {
        let mut out = Vec::new();
        for p in 0..space.n_paths() {
            let u = t.at(p);
            if skip_first && u == Instant::At(0) {
                continue;
            }
            let v: Vec<&Q> = c.iter().map(|x| x.value(p, u)).collect();
            if !(v[0] <= v[1] && v[1] <= v[2] && v[2] <= v[3]) {
                out.push(format!("{label} chain fails at T={t}, path {}", space.path_id(p)));
            }
        }
        out
    };

    let opt = enumerate_stopping_times(space, FieldKind::Optional, None, ENUMERATION_LIMIT)?;
    let pred = enumerate_stopping_times(space, FieldKind::Predictable, None, ENUMERATION_LIMIT)?;
    let mut failures: Vec<String> = crate::par::map(&opt, |t| {
        chain(t, [&o_rinf, &l_rinf, &l_rsup, &o_rsup], false, "optional")
    })
    .into_iter()
    .flatten()
    .collect();
    failures.extend(
        crate::par::map(&pred, |t| {
            chain(t, [&p_linf, &l_linf, &l_lsup, &p_lsup], true, "predictable")
        })
        .into_iter()
        .flatten(),
    );
    // (^Lambda Z)_{T+} = ^O(Z_+)_T and (^Lambda Z)_{T-} = ^P(Z_-)_T as processes
    for u in space.instants() {
        for p in 0..space.n_paths() {
            if l_rsup.value(p, u) != o_rsup.value(p, u) {
                failures.push(format!("right limit identity fails at {u}, path {}", space.path_id(p)));
            }
            if u != Instant::At(0) && l_lsup.value(p, u) != p_lsup.value(p, u) {
                failures.push(format!("left limit identity fails at {u}, path {}", space.path_id(p)));
            }
        }
    }
    failures.truncate(50);
    Ok(FatouReport {
        optional_times: opt.len(),
        predictable_times: pred.len(),
        failures,
    })
}

/// Length-one approximating sequence: the interior of `T`'s epoch (RIGHT) or
/// the interior just before `T` (LEFT).
pub fn approximating_witness(
    space: &MeyerSpace,
    z: &LatticeProcess,
    t: &RandomInstant,
    side: Side,
) -> Result<Vec<RandomInstant>> {
    let _ = z;
    match side {
        Side::Right => {
            space.require_stopping_time(t, FieldKind::Optional, "T")?;
            Ok(vec![right_step(t)])
        }
        Side::Left => {
            space.require_stopping_time(t, FieldKind::Predictable, "T")?;
            if t.as_slice().contains(&Instant::At(0)) {
                return Err(Error::Precondition("LEFT witness needs T > (0,AT)".into()));
            }
            Ok(vec![left_step(t, space.horizon())])
        }
    }
}

/// `E[sum_u Z_u dA_u]`, with `dA_u = A_u - A_{pred u}` and `A` before
/// `(0,AT)` read as 0; the terminal jump is included.
pub fn increasing_pairing(space: &MeyerSpace, z: &LatticeProcess, a: &LatticeProcess) -> Q {
    let mut total = crate::lattice::int(0);
    for u in space.instants_with_terminal() {
        let prev = space.predecessor(u);
        let da: Vec<Q> = (0..space.n_paths())
            .map(|p| {
                let base = prev.map(|v| a.value(p, v).clone()).unwrap_or_else(|| crate::lattice::int(0));
                z.value(p, u) * (a.value(p, u) - base)
            })
            .collect();
        total += space.expectation(&da);
    }
    total
}
