//! Exhaustive enumeration of stopping times and fast exact evaluation of
//! `E[Z_T]` over many candidates.
//!
//! A stopping time of a given kind is built atom by atom: an atom of the
//! instant field either stops whole at that instant or splits into the atoms
//! of the next instant's field, which then decide independently.

use crate::error::{Error, Result};
use crate::lattice::{FieldKind, Instant, LatticeProcess, MeyerSpace, PathSet, RandomInstant, Q};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

/// Default cap on the number of enumerated stopping times.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Which paths are eligible to stop where.
struct Rules<'a> {
    space: &'a MeyerSpace,
    kind: FieldKind,
    from: Option<&'a RandomInstant>,
    /// Stopping at an INT instant counts twice (W+ and W- encodings).
    divided: bool,
}

impl Rules<'_> {
    fn eligible(&self, atom: &[usize], u: Instant) -> bool {
        match self.from {
            None => true,
            Some(s) => atom.iter().all(|&p| s.at(p) <= u),
        }
    }

    fn children(&self, atom: &[usize], next: Instant) -> Vec<Vec<usize>> {
        let set = PathSet::from_indices(self.space.n_paths(), atom.iter().copied());
        self.space.field(next, self.kind).trace(&set)
    }

    fn count_node(&self, u: Instant, atom: &[usize]) -> u128 {
        if u.is_terminal() {
            return 1;
        }
        let mut c: u128 = 0;
        if self.eligible(atom, u) {
            c = if self.divided && u.is_int() { 2 } else { 1 };
        }
        let next = self.space.successor(u).expect("finite instant");
        let prod = if next.is_terminal() {
            1
        } else {
            self.children(atom, next)
                .iter()
                .fold(1u128, |acc, ch| acc.saturating_mul(self.count_node(next, ch)))
        };
        c.saturating_add(prod)
    }

    fn count(&self, set: &PathSet, start: Instant) -> u128 {
        if start.is_terminal() {
            return 1;
        }
        self.space
            .field(start, self.kind)
            .trace(set)
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(self.count_node(start, a)))
    }

    /// Assignments for `atom`, each aligned with the atom's index list.
    fn node(&self, u: Instant, atom: &[usize]) -> Vec<Vec<Instant>> {
        if u.is_terminal() {
            return vec![vec![Instant::Terminal; atom.len()]];
        }
        let mut out = Vec::new();
        if self.eligible(atom, u) {
            out.push(vec![u; atom.len()]);
        }
        let next = self.space.successor(u).expect("finite instant");
        if next.is_terminal() {
            out.push(vec![Instant::Terminal; atom.len()]);
        } else {
            let parts = self.children(atom, next);
            out.extend(self.product(atom, &parts, next));
        }
        out
    }

    fn product(&self, atom: &[usize], parts: &[Vec<usize>], u: Instant) -> Vec<Vec<Instant>> {
        let mut acc = vec![vec![Instant::Terminal; atom.len()]];
        for part in parts {
            let pos: Vec<usize> = part
                .iter()
                .map(|p| atom.iter().position(|q| q == p).expect("child inside atom"))
                .collect();
            let opts = self.node(u, part);
            let mut next = Vec::with_capacity(acc.len() * opts.len());
            for base in &acc {
                for opt in &opts {
                    let mut v = base.clone();
                    for (i, &j) in pos.iter().enumerate() {
                        v[j] = opt[i];
                    }
                    next.push(v);
                }
            }
            acc = next;
        }
        acc
    }

    fn enumerate(&self, set: &PathSet, start: Instant) -> Vec<RandomInstant> {
        let n = self.space.n_paths();
        let members: Vec<usize> = set.iter().collect();
        let assignments = if start.is_terminal() {
            vec![vec![Instant::Terminal; members.len()]]
        } else {
            let parts = self.space.field(start, self.kind).trace(set);
            self.product(&members, &parts, start)
        };
        assignments
            .into_iter()
            .map(|a| {
                let mut t = vec![Instant::Terminal; n];
                for (i, &p) in members.iter().enumerate() {
                    t[p] = a[i];
                }
                RandomInstant::new(t)
            })
            .collect()
    }
}

/// Number of stopping times of `kind` that are `>= from` pathwise.
pub fn count_stopping_times(space: &MeyerSpace, kind: FieldKind, from: Option<&RandomInstant>) -> u128 {
    let rules = Rules { space, kind, from, divided: false };
    rules.count(&PathSet::full(space.n_paths()), Instant::At(0))
}

/// Number of valid divided stopping times whose instant form is `>= from`.
pub fn count_divided_stops(space: &MeyerSpace, from: Option<&RandomInstant>) -> u128 {
    let rules = Rules {
        space,
        kind: FieldKind::Lambda,
        from,
        divided: true,
    };
    rules.count(&PathSet::full(space.n_paths()), Instant::At(0))
}

/// Every stopping time of `kind` that is `>= from`, in canonical order.
pub fn enumerate_stopping_times(
    space: &MeyerSpace,
    kind: FieldKind,
    from: Option<&RandomInstant>,
    limit: u128,
) -> Result<Vec<RandomInstant>> {
    let count = count_stopping_times(space, kind, from);
    if count > limit {
        return Err(Error::TooLarge { count, limit });
    }
    let rules = Rules { space, kind, from, divided: false };
    Ok(rules.enumerate(&PathSet::full(space.n_paths()), Instant::At(0)))
}

/// Stopping times of `kind` on the paths of `set` that take values `>= start`;
/// paths outside `set` read `Terminal`. `set` must lie in the field at the
/// instant before `start`.
pub fn enumerate_on(
    space: &MeyerSpace,
    kind: FieldKind,
    set: &PathSet,
    start: Instant,
    limit: u128,
) -> Result<Vec<RandomInstant>> {
    let rules = Rules { space, kind, from: None, divided: false };
    let count = rules.count(set, start);
    if count > limit {
        return Err(Error::TooLarge { count, limit });
    }
    Ok(rules.enumerate(set, start))
}

/// `P(path) * Z(path, u)` scaled to a common denominator, so that `E[Z_T]`
/// is a sum of integers per candidate `T`.
#[derive(Debug, Clone)]
pub struct ScaledTable {
    den: BigInt,
    small: Option<Vec<Vec<i128>>>,
    big: Vec<Vec<BigInt>>,
}

impl ScaledTable {
    pub fn new(space: &MeyerSpace, z: &LatticeProcess) -> Self {
        let rows: Vec<Vec<Q>> = space
            .instants_with_terminal()
            .into_iter()
            .map(|u| {
                z.slice(u)
                    .iter()
                    .zip(space.probabilities())
                    .map(|(v, p)| v * p)
                    .collect()
            })
            .collect();
        let mut den = BigInt::one();
        for w in rows.iter().flatten() {
            den = den.lcm(w.denom());
        }
        let big: Vec<Vec<BigInt>> = rows
            .iter()
            .map(|r| r.iter().map(|w| w.numer() * (&den / w.denom())).collect())
            .collect();
        let n = space.n_paths().max(1) as i128;
        let bound = i128::MAX / n;
        let small = big
            .iter()
            .map(|r| {
                r.iter()
                    .map(|x| x.to_i128().filter(|v| v.abs() <= bound))
                    .collect::<Option<Vec<i128>>>()
            })
            .collect::<Option<Vec<_>>>();
        ScaledTable { den, small, big }
    }

    fn row(u: Instant, n_rows: usize) -> usize {
        if u.is_terminal() {
            n_rows - 1
        } else {
            u.rank()
        }
    }

    /// `E[Z_T]` times the common denominator.
    pub fn scaled(&self, t: &RandomInstant) -> BigInt {
        let n_rows = self.big.len();
        match &self.small {
            Some(tab) => {
                let s: i128 = (0..t.n_paths()).map(|p| tab[Self::row(t.at(p), n_rows)][p]).sum();
                BigInt::from(s)
            }
            None => (0..t.n_paths())
                .map(|p| self.big[Self::row(t.at(p), n_rows)][p].clone())
                .sum(),
        }
    }

    /// Like `scaled`, summing only over `paths`.
    pub fn scaled_on(&self, t: &RandomInstant, paths: &[usize]) -> BigInt {
        let n_rows = self.big.len();
        match &self.small {
            Some(tab) => BigInt::from(paths.iter().map(|&p| tab[Self::row(t.at(p), n_rows)][p]).sum::<i128>()),
            None => paths.iter().map(|&p| self.big[Self::row(t.at(p), n_rows)][p].clone()).sum(),
        }
    }

    pub fn denominator(&self) -> &BigInt {
        &self.den
    }

    pub fn expected(&self, t: &RandomInstant) -> Q {
        self.unscale(self.scaled(t))
    }

    pub fn unscale(&self, s: BigInt) -> Q {
        Q::new(s, self.den.clone())
    }

    pub fn uses_machine_integers(&self) -> bool {
        self.small.is_some()
    }
}

/// Largest value and every candidate attaining it.
pub fn argmax_scaled(table: &ScaledTable, candidates: &[RandomInstant]) -> (Q, Vec<usize>) {
    let values = crate::par::map(candidates, |t| table.scaled(t));
    let best = values.iter().max().cloned().unwrap_or_else(BigInt::zero);
    let idx = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == best)
        .map(|(i, _)| i)
        .collect();
    (table.unscale(best), idx)
}
