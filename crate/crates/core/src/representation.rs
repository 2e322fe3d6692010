//! Representation `X_u = E[sum_{w >= u} g_w(max_{[u,w]} L) mu_w | field at u]`,
//! its inversion, and the level-passage stopping signals of `L`.

use crate::divided::{enumerate_divided_stops, instant_form, to_divided_quadruple, DividedQuadruple};
use crate::enumerate::{enumerate_on, ScaledTable};
use crate::error::{Error, Result};
use crate::lattice::{FieldKind, Instant, LatticeProcess, MeyerSpace, PathSet, RandomInstant, Q};
use crate::projection::{is_left_usc_in_expectation, is_right_usc_in_expectation, UscVerdict};
use num_traits::{Signed, ToPrimitive, Zero};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Accepted gap between `X` and the forward evaluation of a solved `L` in
/// monotone mode.
pub const MONOTONE_CHECK_TOLERANCE: f64 = 1e-7;

/// `a + b l + c l^3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cubic {
    pub a: Q,
    pub b: Q,
    pub c: Q,
}

impl Cubic {
    pub fn affine(a: Q, b: Q) -> Self {
        Cubic { a, b, c: Q::zero() }
    }

    pub fn eval(&self, l: &Q) -> Q {
        &self.a + &self.b * l + &self.c * l * l * l
    }

    fn eval_f64(&self, l: f64) -> f64 {
        let f = |q: &Q| q.to_f64().unwrap_or(f64::NAN);
        f(&self.a) + f(&self.b) * l + f(&self.c) * l * l * l
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GKind {
    Affine,
    Monotone { tolerance: f64 },
}

/// Strictly increasing `g_u(path, l)` per (instant, path), cubic in `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct GFamily {
    pub kind: GKind,
    /// `coef[rank][path]`.
    pub coef: Vec<Vec<Cubic>>,
}

impl GFamily {
    pub fn from_fn(space: &MeyerSpace, kind: GKind, f: impl Fn(usize, Instant) -> Cubic) -> Self {
        GFamily {
            kind,
            coef: space
                .instants()
                .into_iter()
                .map(|u| (0..space.n_paths()).map(|p| f(p, u)).collect())
                .collect(),
        }
    }

    /// `g_u(l) = l` everywhere.
    pub fn identity(space: &MeyerSpace) -> Self {
        Self::from_fn(space, GKind::Affine, |_, _| Cubic::affine(Q::zero(), crate::lattice::int(1)))
    }

    pub fn at(&self, p: usize, u: Instant) -> &Cubic {
        &self.coef[u.rank()][p]
    }

    pub fn eval(&self, p: usize, u: Instant, l: &Q) -> Q {
        self.at(p, u).eval(l)
    }

    pub fn validate(&self, space: &MeyerSpace) -> Result<()> {
        if self.coef.len() != space.n_instants() || self.coef.iter().any(|r| r.len() != space.n_paths()) {
            return Err(Error::Shape("g does not match the lattice".into()));
        }
        for u in space.instants() {
            let row = &self.coef[u.rank()];
            for (p, c) in row.iter().enumerate() {
                let ok = match self.kind {
                    GKind::Affine => c.c.is_zero() && c.b.is_positive(),
                    GKind::Monotone { .. } => {
                        !c.b.is_negative() && !c.c.is_negative() && (&c.b + &c.c).is_positive()
                    }
                };
                if !ok {
                    return Err(Error::Precondition(format!(
                        "g at path {}, {u} is not strictly increasing of the configured kind",
                        space.path_id(p)
                    )));
                }
            }
            if !space.field(u, FieldKind::Optional).is_constant_on_atoms(row) {
                return Err(Error::NotMeasurable {
                    what: "g".into(),
                    kind: FieldKind::Optional,
                    at: u,
                });
            }
        }
        if let GKind::Monotone { tolerance } = self.kind {
            if tolerance.is_nan() || tolerance <= 0.0 {
                return Err(Error::Precondition("tolerance must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Nonnegative mass per (path, finite instant); no mass at infinity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomMeasure {
    pub mass: LatticeProcess,
}

impl RandomMeasure {
    pub fn new(mass: LatticeProcess) -> Result<Self> {
        if let Some((path, at)) = mass.first_negative() {
            return Err(Error::Negative {
                what: "mu".into(),
                path,
                at,
            });
        }
        if !mass.has_zero_terminal() {
            return Err(Error::NonzeroTerminal("mu".into()));
        }
        Ok(RandomMeasure { mass })
    }

    pub fn zero(space: &MeyerSpace) -> Self {
        RandomMeasure {
            mass: LatticeProcess::zeros_on(space),
        }
    }

    pub fn at(&self, p: usize, u: Instant) -> &Q {
        self.mass.value(p, u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Given {
    Signal(LatticeProcess),
    Reward(LatticeProcess),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationProblem {
    pub g: GFamily,
    pub mu: RandomMeasure,
    pub given: Given,
}

impl RepresentationProblem {
    /// `X`, computed from `L` when only the signal is given.
    pub fn reward(&self, space: &MeyerSpace) -> Result<LatticeProcess> {
        match &self.given {
            Given::Reward(x) => Ok(x.clone()),
            Given::Signal(l) => forward_evaluate(space, &self.g, &self.mu, l),
        }
    }

    /// `L`, solved from `X` when only the reward is given.
    pub fn signal(&self, space: &MeyerSpace, limit: u128) -> Result<LatticeProcess> {
        match &self.given {
            Given::Signal(l) => Ok(l.clone()),
            Given::Reward(x) => solve_representation(space, &self.g, &self.mu, x, limit),
        }
    }
}

fn check_shape(space: &MeyerSpace, z: &LatticeProcess, what: &str) -> Result<()> {
    if z.n_paths() != space.n_paths() || z.n_instants() != space.n_instants() {
        return Err(Error::Shape(format!("{what} does not match the lattice")));
    }
    Ok(())
}

pub fn forward_evaluate(space: &MeyerSpace, g: &GFamily, mu: &RandomMeasure, l: &LatticeProcess) -> Result<LatticeProcess> {
    check_shape(space, l, "L")?;
    check_shape(space, &mu.mass, "mu")?;
    g.validate(space)?;
    space.require_measurable(l, FieldKind::Lambda, "L")?;
    let inst = space.instants();
    let mut x = LatticeProcess::zeros_on(space);
    for (i, &u) in inst.iter().enumerate() {
        let y: Vec<Q> = (0..space.n_paths())
            .map(|p| {
                let mut sup = l.value(p, u).clone();
                let mut acc = Q::zero();
                for &w in &inst[i..] {
                    if l.value(p, w) > &sup {
                        sup = l.value(p, w).clone();
                    }
                    let m = mu.at(p, w);
                    if !m.is_zero() {
                        acc += g.eval(p, w, &sup) * m;
                    }
                }
                acc
            })
            .collect();
        x.set_slice(u, space.conditional_expectation(&y, space.field(u, FieldKind::Lambda)));
    }
    Ok(x)
}

/// Solves `agg(l) = target` for a strictly increasing aggregate.
pub fn g_root(agg: &Cubic, target: &Q, kind: GKind) -> Result<Q> {
    if agg.b.is_negative() || agg.c.is_negative() || !(&agg.b + &agg.c).is_positive() {
        return Err(Error::ZeroWeight);
    }
    if agg.c.is_zero() {
        return Ok((target - &agg.a) / &agg.b);
    }
    let tolerance = match kind {
        GKind::Monotone { tolerance } => tolerance,
        GKind::Affine => return Err(Error::Precondition("cubic term in affine mode".into())),
    };
    let t = target.to_f64().unwrap_or(f64::NAN);
    let f = |x: f64| agg.eval_f64(x) - t;
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while f(lo) > 0.0 {
        lo *= 2.0;
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    // both the bracket and its image must be within tolerance
    while hi - lo > tolerance || f(hi) - f(lo) > tolerance {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Q::from_float(0.5 * (lo + hi)).ok_or_else(|| Error::Precondition("root is not finite".into()))
}

/// `sum_{w < v} mu_w * coefficient_w` per (path, instant), terminal = full sum.
fn accrued(space: &MeyerSpace, mu: &RandomMeasure, coef: impl Fn(usize, Instant) -> Q) -> LatticeProcess {
    let n = space.n_paths();
    let mut out = LatticeProcess::zeros_on(space);
    let mut run = vec![Q::zero(); n];
    for u in space.instants() {
        out.set_slice(u, run.clone());
        for (p, r) in run.iter_mut().enumerate() {
            let m = mu.at(p, u);
            if !m.is_zero() {
                *r += m * coef(p, u);
            }
        }
    }
    out.with_terminal(run)
}

/// For each instant `u` and Lambda-atom `a`, the least root over stopping
/// times `T > u` on `a` of
/// `E[sum_{u <= w < T} g_w(l) mu_w ; a] = E[X_u - X_T ; a]`.
pub fn solve_representation(
    space: &MeyerSpace,
    g: &GFamily,
    mu: &RandomMeasure,
    x: &LatticeProcess,
    limit: u128,
) -> Result<LatticeProcess> {
    check_shape(space, x, "X")?;
    check_shape(space, &mu.mass, "mu")?;
    g.validate(space)?;
    space.require_measurable(x, FieldKind::Lambda, "X")?;
    if !x.has_zero_terminal() {
        return Err(Error::NonzeroTerminal("X".into()));
    }
    let ca = accrued(space, mu, |p, u| g.at(p, u).a.clone());
    let cb = accrued(space, mu, |p, u| g.at(p, u).b.clone());
    let cc = accrued(space, mu, |p, u| g.at(p, u).c.clone());
    let tables = [&ca, &cb, &cc, x].map(|z| ScaledTable::new(space, z));
    let n = space.n_paths();

    let mut jobs = Vec::new();
    for u in space.instants() {
        for atom in space.field(u, FieldKind::Lambda).atoms() {
            jobs.push((u, atom.clone()));
        }
    }
    let solved = crate::par::map(&jobs, |(u, atom)| -> Result<Q> {
        let u = *u;
        let set = PathSet::from_indices(n, atom.iter().copied());
        let base = space.constant_time(u);
        let at_u: Vec<Q> = tables.iter().map(|t| t.unscale(t.scaled_on(&base, atom))).collect();
        let start = space.successor(u).expect("finite instant");
        let candidates = enumerate_on(space, FieldKind::Lambda, &set, start, limit)?;
        let mut best: Option<Q> = None;
        for t in &candidates {
            let s: Vec<Q> = tables.iter().map(|tab| tab.unscale(tab.scaled_on(t, atom))).collect();
            let agg = Cubic {
                a: &s[0] - &at_u[0],
                b: &s[1] - &at_u[1],
                c: &s[2] - &at_u[2],
            };
            if (&agg.b + &agg.c).is_zero() {
                continue;
            }
            let target = &at_u[3] - &s[3];
            let root = g_root(&agg, &target, g.kind)?;
            if best.as_ref().is_none_or(|b| root < *b) {
                best = Some(root);
            }
        }
        match best {
            Some(r) => Ok(r),
            None if atom.iter().all(|&p| x.value(p, u).is_zero()) => Ok(Q::zero()),
            None => Err(Error::NotRepresentable(format!(
                "no remaining mass after {u} on a path where X is nonzero"
            ))),
        }
    });
    let mut l = LatticeProcess::zeros_on(space);
    for ((u, atom), r) in jobs.iter().zip(solved) {
        let r = r?;
        for &p in atom {
            l.set(p, *u, r.clone());
        }
    }

    let back = forward_evaluate(space, g, mu, &l)?;
    let ok = match g.kind {
        GKind::Affine => back == *x,
        GKind::Monotone { .. } => max_abs_gap(space, &back, x) <= MONOTONE_CHECK_TOLERANCE,
    };
    if !ok {
        return Err(Error::NotRepresentable("forward check failed".into()));
    }
    Ok(l)
}

pub fn max_abs_gap(space: &MeyerSpace, a: &LatticeProcess, b: &LatticeProcess) -> f64 {
    space
        .instants()
        .into_iter()
        .flat_map(|u| (0..space.n_paths()).map(move |p| (p, u)))
        .map(|(p, u)| (a.value(p, u) - b.value(p, u)).abs().to_f64().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

/// `X_v + sum_{w < v} g_w(l) mu_w` per (path, instant). Terminal holds the full accrual.
pub fn objective_process(space: &MeyerSpace, g: &GFamily, mu: &RandomMeasure, x: &LatticeProcess, ell: &Q) -> LatticeProcess {
    let acc = accrued(space, mu, |p, u| g.eval(p, u, ell));
    x.zip_with(&acc, |a, b| a + b)
}

#[derive(Debug, Clone, Copy)]
pub enum Stop<'a> {
    Instant(&'a RandomInstant),
    Divided(&'a DividedQuadruple),
}

/// `E[X_tau + sum_{w < tau} g_w(l) mu_w]` in strict instant order. A
/// quadruple reads `X` through the envelopes of its sides and accrues up to
/// its instant form.
pub fn stopping_value(
    space: &MeyerSpace,
    g: &GFamily,
    mu: &RandomMeasure,
    x: &LatticeProcess,
    ell: &Q,
    tau: Stop<'_>,
) -> Result<Q> {
    let acc = accrued(space, mu, |p, u| g.eval(p, u, ell));
    let (xs, r) = match tau {
        Stop::Instant(r) => {
            space.require_stopping_time(r, FieldKind::Lambda, "tau")?;
            (x.at_time(r), r.clone())
        }
        Stop::Divided(q) => {
            let report = crate::divided::validate_divided(space, q);
            if !report.is_valid() {
                return Err(Error::Divided(report.to_string()));
            }
            (crate::divided::divided_value(space, x, q), instant_form(space, q))
        }
    };
    let per: Vec<Q> = (0..space.n_paths()).map(|p| &xs[p] + acc.value(p, r.at(p))).collect();
    Ok(space.expectation(&per))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelPassage {
    pub instant: RandomInstant,
    pub quadruple: DividedQuadruple,
}

/// Variant 1: first instant with `L >= l`; variant 2: first with `L > l`.
pub fn level_passage(space: &MeyerSpace, l: &LatticeProcess, ell: &Q, variant: u8) -> Result<LevelPassage> {
    check_shape(space, l, "L")?;
    space.require_measurable(l, FieldKind::Lambda, "L")?;
    if variant != 1 && variant != 2 {
        return Err(Error::Precondition(format!("unknown level-passage variant {variant}")));
    }
    let inst = space.instants();
    let instant = RandomInstant::new(
        (0..space.n_paths())
            .map(|p| {
                inst.iter()
                    .copied()
                    .find(|&u| {
                        let v = l.value(p, u);
                        if variant == 1 {
                            v >= ell
                        } else {
                            v > ell
                        }
                    })
                    .unwrap_or(Instant::Terminal)
            })
            .collect(),
    );
    let quadruple = to_divided_quadruple(space, &instant)?;
    Ok(LevelPassage { instant, quadruple })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditions {
    /// Fail unless `X` is left-USC in expectation.
    Enforce,
    /// Record the predicates only.
    Report,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalRow {
    pub ell: Q,
    pub value_1: Q,
    pub value_2: Q,
    pub maximum: Q,
    pub tau_1: DividedQuadruple,
    pub tau_2: DividedQuadruple,
    pub optimizers: Vec<DividedQuadruple>,
}

impl SignalRow {
    pub fn ok(&self) -> bool {
        self.value_1 == self.maximum && self.value_2 == self.maximum
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalReport {
    pub x: LatticeProcess,
    pub left_usc: Option<UscVerdict>,
    pub right_usc: Option<UscVerdict>,
    pub candidates: usize,
    pub rows: Vec<SignalRow>,
}

impl SignalReport {
    pub fn all_optimal(&self) -> bool {
        self.rows.iter().all(SignalRow::ok)
    }
}

/// Compares both level-passage stops of `L` with the brute-force maximum
/// over every divided stopping time, for each level in the grid.
pub fn universal_signal_check(
    space: &MeyerSpace,
    problem: &RepresentationProblem,
    grid: &[Q],
    policy: Preconditions,
    limit: u128,
) -> Result<SignalReport> {
    let l = problem.signal(space, limit)?;
    let x = problem.reward(space)?;
    let left_usc = is_left_usc_in_expectation(space, &x).ok();
    let right_usc = is_right_usc_in_expectation(space, &x).ok();
    if policy == Preconditions::Enforce {
        match &left_usc {
            Some(v) if v.holds => {}
            _ => return Err(Error::Precondition("X is not left-USC in expectation".into())),
        }
    }
    let quads = enumerate_divided_stops(space, None, limit)?;
    let forms: Vec<RandomInstant> = quads.iter().map(|q| instant_form(space, q)).collect();
    let rows = crate::par::map(grid, |ell| -> Result<SignalRow> {
        let obj = objective_process(space, &problem.g, &problem.mu, &x, ell);
        let table = ScaledTable::new(space, &obj);
        let values: Vec<_> = forms.iter().map(|r| table.scaled(r)).collect();
        let best = values.iter().max().cloned().unwrap_or_default();
        let optimizers = values
            .iter()
            .zip(&quads)
            .filter(|(v, _)| **v == best)
            .map(|(_, q)| q.clone())
            .collect();
        let t1 = level_passage(space, &l, ell, 1)?;
        let t2 = level_passage(space, &l, ell, 2)?;
        Ok(SignalRow {
            ell: ell.clone(),
            value_1: stopping_value(space, &problem.g, &problem.mu, &x, ell, Stop::Divided(&t1.quadruple))?,
            value_2: stopping_value(space, &problem.g, &problem.mu, &x, ell, Stop::Divided(&t2.quadruple))?,
            maximum: table.unscale(best),
            tau_1: t1.quadruple,
            tau_2: t2.quadruple,
            optimizers,
        })
    });
    Ok(SignalReport {
        x,
        left_usc,
        right_usc,
        candidates: quads.len(),
        rows: rows.into_iter().collect::<Result<Vec<_>>>()?,
    })
}
