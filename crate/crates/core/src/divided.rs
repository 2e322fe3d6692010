//! Divided stopping times `(T, W-, W, W+)`: stop just before, at, or just
//! after an epoch-valued time `T`.

use crate::enumerate::{count_divided_stops, enumerate_stopping_times};
use crate::error::{Error, Result};
use crate::lattice::{FieldKind, Instant, LatticeProcess, MeyerSpace, Partition, PathSet, RandomInstant, Q};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    At,
    Plus,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DividedQuadruple {
    /// Per path `(e,AT)` for epoch `e`, or `Terminal`.
    pub time: RandomInstant,
    pub w_minus: PathSet,
    pub w: PathSet,
    pub w_plus: PathSet,
}

impl DividedQuadruple {
    pub fn side(&self, p: usize) -> Side {
        if self.w_minus.contains(p) {
            Side::Minus
        } else if self.w_plus.contains(p) {
            Side::Plus
        } else {
            Side::At
        }
    }

    pub fn n_paths(&self) -> usize {
        self.time.n_paths()
    }
}

impl fmt::Display for DividedQuadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.n_paths())
            .map(|p| {
                let tag = match self.side(p) {
                    Side::Minus => "-",
                    Side::At => "",
                    Side::Plus => "+",
                };
                match self.time.at(p) {
                    Instant::At(e) => format!("{e}{tag}"),
                    _ => format!("inf{tag}"),
                }
            })
            .collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    Structure,
    Time,
    I,
    II,
    III,
    IV,
    V,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::Structure => "structure",
            Clause::Time => "T",
            Clause::I => "(i)",
            Clause::II => "(ii)",
            Clause::III => "(iii)",
            Clause::IV => "(iv)",
            Clause::V => "(v)",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DividedReport {
    pub failures: Vec<(Clause, String)>,
}

impl DividedReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn fails(&self, c: Clause) -> bool {
        self.failures.iter().any(|(x, _)| *x == c)
    }
}

impl fmt::Display for DividedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.failures.iter().map(|(c, m)| format!("{c}: {m}")).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Pieces `atom n on` must lie wholly inside or outside `set`.
fn relative_union(part: &Partition, on: &PathSet, set: &PathSet) -> bool {
    part.trace(on)
        .iter()
        .all(|a| a.iter().all(|&p| set.contains(p) == set.contains(a[0])))
}

pub fn validate_divided(space: &MeyerSpace, q: &DividedQuadruple) -> DividedReport {
    let mut fail = Vec::new();
    let n = space.n_paths();
    let k = space.horizon();
    if q.n_paths() != n || q.w_minus.universe() != n || q.w.universe() != n || q.w_plus.universe() != n {
        fail.push((Clause::Structure, "path count mismatch".to_string()));
        return DividedReport { failures: fail };
    }
    if q.time.as_slice().iter().any(|u| u.is_int()) {
        fail.push((Clause::Structure, "T takes an INT value".to_string()));
    }
    if q.time.as_slice().iter().any(|u| matches!(u, Instant::At(e) if *e > k)) {
        fail.push((Clause::Structure, "T exceeds the horizon".to_string()));
    }
    let cover = q.w_minus.union(&q.w).union(&q.w_plus);
    if !q.w_minus.is_disjoint(&q.w) || !q.w_minus.is_disjoint(&q.w_plus) || !q.w.is_disjoint(&q.w_plus) {
        fail.push((Clause::Structure, "W-, W, W+ overlap".to_string()));
    }
    if cover.len() != n {
        fail.push((Clause::Structure, "W-, W, W+ do not cover all paths".to_string()));
    }
    if !fail.is_empty() {
        return DividedReport { failures: fail };
    }

    if !space.is_stopping_time(&q.time, FieldKind::Optional) {
        fail.push((Clause::Time, "T is not a stopping time of the filtration".to_string()));
    }
    let on = |u: Instant| PathSet::from_fn(n, |p| q.time.at(p) == u);

    let mut bad_i = Vec::new();
    let mut bad_ii = Vec::new();
    let mut bad_iii = Vec::new();
    for e in 0..=k {
        let o = on(Instant::At(e));
        if e == 0 {
            if !q.w_minus.intersection(&o).is_empty() {
                bad_i.push("W- meets {T=0}".to_string());
            }
        } else if !relative_union(space.filtration(e - 1), &o, &q.w_minus) {
            bad_i.push(format!("W- on {{T={e}}} is not F_{} measurable", e - 1));
        }
        if !relative_union(space.meyer_field(e), &o, &q.w) {
            bad_ii.push(format!("W on {{T={e}}} is not G_{e} measurable"));
        }
        if !relative_union(space.filtration(e), &o, &q.w_plus) {
            bad_iii.push(format!("W+ on {{T={e}}} is not F_{e} measurable"));
        }
    }
    let inf = on(Instant::Terminal);
    let fk = space.filtration(k);
    if !relative_union(fk, &inf, &q.w_minus) {
        bad_i.push("W- on {T=inf} is not F_K measurable".to_string());
    }
    if !relative_union(fk, &inf, &q.w) {
        bad_ii.push("W on {T=inf} is not F_K measurable".to_string());
    }
    if !q.w_plus.intersection(&inf).is_empty() {
        bad_iii.push("W+ meets {T=inf}".to_string());
    }
    for (c, v) in [(Clause::I, bad_i), (Clause::II, bad_ii), (Clause::III, bad_iii)] {
        if !v.is_empty() {
            fail.push((c, v.join(", ")));
        }
    }
    if !space.is_stopping_time(&q.time.restrict(&q.w_minus), FieldKind::Predictable) {
        fail.push((Clause::IV, "T restricted to W- is not predictable".to_string()));
    }
    if !space.is_stopping_time(&q.time.restrict(&q.w), FieldKind::Lambda) {
        fail.push((Clause::V, "T restricted to W is not a Lambda-stopping time".to_string()));
    }
    DividedReport { failures: fail }
}

/// Quadruple form of a Lambda-stopping instant; never uses `W-`.
pub fn to_divided_quadruple(space: &MeyerSpace, r: &RandomInstant) -> Result<DividedQuadruple> {
    space.require_stopping_time(r, FieldKind::Lambda, "instant")?;
    let n = space.n_paths();
    let mut time = Vec::with_capacity(n);
    let mut w = PathSet::empty(n);
    let mut w_plus = PathSet::empty(n);
    for p in 0..n {
        match r.at(p) {
            Instant::Int(e) => {
                time.push(Instant::At(e));
                w_plus.insert(p);
            }
            u => {
                time.push(u);
                w.insert(p);
            }
        }
    }
    Ok(DividedQuadruple {
        time: RandomInstant::new(time),
        w_minus: PathSet::empty(n),
        w,
        w_plus,
    })
}

/// Instant form without validation.
pub fn instant_form(space: &MeyerSpace, q: &DividedQuadruple) -> RandomInstant {
    let k = space.horizon();
    RandomInstant::new(
        (0..q.n_paths())
            .map(|p| match (q.side(p), q.time.at(p)) {
                (Side::Minus, Instant::At(e)) => Instant::Int(e.saturating_sub(1)),
                (Side::Minus, _) => Instant::Int(k),
                (Side::Plus, Instant::At(e)) => Instant::Int(e),
                (_, u) => u,
            })
            .collect(),
    )
}

pub fn from_divided_quadruple(space: &MeyerSpace, q: &DividedQuadruple) -> Result<RandomInstant> {
    let report = validate_divided(space, q);
    if !report.is_valid() {
        return Err(Error::Divided(report.to_string()));
    }
    Ok(instant_form(space, q))
}

/// `Z_sigma = *Z_T on W-, Z_T on W, Z*_T on W+`, read per path.
pub fn divided_value(space: &MeyerSpace, z: &LatticeProcess, q: &DividedQuadruple) -> Vec<Q> {
    use crate::projection::{envelope, Mode, Side as Env};
    let left = envelope(space, z, Env::Left, Mode::Sup);
    let right = envelope(space, z, Env::Right, Mode::Sup);
    (0..q.n_paths())
        .map(|p| {
            let t = q.time.at(p);
            match q.side(p) {
                Side::Minus => left.value(p, t).clone(),
                Side::At => z.value(p, t).clone(),
                Side::Plus => right.value(p, t).clone(),
            }
        })
        .collect()
}

/// Every quadruple encoding of `r`: each `F_k` atom of `{r = (k,INT)}` may be
/// read as `W+` at `k` or `W-` at `k+1`.
pub fn encodings(space: &MeyerSpace, r: &RandomInstant) -> Vec<DividedQuadruple> {
    let n = space.n_paths();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..=space.horizon() {
        let on = PathSet::from_fn(n, |p| r.at(p) == Instant::Int(k));
        groups.extend(space.filtration(k).trace(&on));
    }
    let after = |e: usize| {
        if e == space.horizon() {
            Instant::Terminal
        } else {
            Instant::At(e + 1)
        }
    };
    let mut out = Vec::with_capacity(1 << groups.len());
    for mask in 0u64..(1u64 << groups.len()) {
        let mut time = Vec::with_capacity(n);
        let mut w_minus = PathSet::empty(n);
        let mut w = PathSet::empty(n);
        let mut w_plus = PathSet::empty(n);
        for p in 0..n {
            match r.at(p) {
                Instant::Int(e) => {
                    let g = groups.iter().position(|a| a.contains(&p)).expect("grouped");
                    if mask >> g & 1 == 1 {
                        time.push(after(e));
                        w_minus.insert(p);
                    } else {
                        time.push(Instant::At(e));
                        w_plus.insert(p);
                    }
                }
                u => {
                    time.push(u);
                    w.insert(p);
                }
            }
        }
        out.push(DividedQuadruple {
            time: RandomInstant::new(time),
            w_minus,
            w,
            w_plus,
        });
    }
    out
}

/// All valid divided stopping times whose instant form is `>= from`.
pub fn enumerate_divided_stops(
    space: &MeyerSpace,
    from: Option<&RandomInstant>,
    limit: u128,
) -> Result<Vec<DividedQuadruple>> {
    let count = count_divided_stops(space, from);
    if count > limit {
        return Err(Error::TooLarge { count, limit });
    }
    let times = enumerate_stopping_times(space, FieldKind::Lambda, from, limit)?;
    let lists = crate::par::map(&times, |r| {
        encodings(space, r)
            .into_iter()
            .filter(|q| validate_divided(space, q).is_valid())
            .collect::<Vec<_>>()
    });
    Ok(lists.into_iter().flatten().collect())
}
