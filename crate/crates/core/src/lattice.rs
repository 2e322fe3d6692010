//! Finite filtered path space with a Meyer structure, instants, processes
//! and stopping times.
//!
//! Each epoch `k` contributes two instants: `(k,AT)`, the grid point, and
//! `(k,INT)`, the open interval up to the next grid point on which every
//! process is constant. `TERMINAL` stands for infinity.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;

pub type Q = BigRational;

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Lambda,
    Optional,
    Predictable,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Lambda => "LAMBDA",
            FieldKind::Optional => "OPTIONAL",
            FieldKind::Predictable => "PREDICTABLE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instant {
    At(usize),
    Int(usize),
    Terminal,
}

impl Instant {
    pub fn rank(self) -> usize {
        match self {
            Instant::At(k) => 2 * k,
            Instant::Int(k) => 2 * k + 1,
            Instant::Terminal => usize::MAX,
        }
    }

    /// Inverse of `rank` for finite instants; ranks past the horizon give `Terminal`.
    pub fn from_rank(rank: usize, horizon: usize) -> Instant {
        if rank >= 2 * (horizon + 1) {
            Instant::Terminal
        } else if rank.is_multiple_of(2) {
            Instant::At(rank / 2)
        } else {
            Instant::Int(rank / 2)
        }
    }

    pub fn epoch(self) -> Option<usize> {
        match self {
            Instant::At(k) | Instant::Int(k) => Some(k),
            Instant::Terminal => None,
        }
    }

    pub fn is_terminal(self) -> bool {
        self == Instant::Terminal
    }

    pub fn is_at(self) -> bool {
        matches!(self, Instant::At(_))
    }

    pub fn is_int(self) -> bool {
        matches!(self, Instant::Int(_))
    }
}

impl Ord for Instant {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for Instant {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Instant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instant::At(k) => write!(f, "({k},AT)"),
            Instant::Int(k) => write!(f, "({k},INT)"),
            Instant::Terminal => f.write_str("TERMINAL"),
        }
    }
}

/// Set of path indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathSet(Vec<bool>);

impl PathSet {
    pub fn empty(n: usize) -> Self {
        PathSet(vec![false; n])
    }

    pub fn full(n: usize) -> Self {
        PathSet(vec![true; n])
    }

    pub fn from_indices(n: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for i in idx {
            s.0[i] = true;
        }
        s
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Self {
        PathSet((0..n).map(f).collect())
    }

    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, p: usize) -> bool {
        self.0[p]
    }

    pub fn insert(&mut self, p: usize) {
        self.0[p] = true;
    }

    pub fn remove(&mut self, p: usize) {
        self.0[p] = false;
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|b| *b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn union(&self, o: &PathSet) -> PathSet {
        PathSet(self.0.iter().zip(&o.0).map(|(a, b)| *a || *b).collect())
    }

    pub fn intersection(&self, o: &PathSet) -> PathSet {
        PathSet(self.0.iter().zip(&o.0).map(|(a, b)| *a && *b).collect())
    }

    pub fn difference(&self, o: &PathSet) -> PathSet {
        PathSet(self.0.iter().zip(&o.0).map(|(a, b)| *a && !*b).collect())
    }

    pub fn complement(&self) -> PathSet {
        PathSet(self.0.iter().map(|b| !*b).collect())
    }

    pub fn is_subset(&self, o: &PathSet) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| !*a || *b)
    }

    pub fn is_disjoint(&self, o: &PathSet) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| !(*a && *b))
    }
}

/// Partition of the path set in canonical form: atoms sorted internally and
/// ordered by their smallest element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    atoms: Vec<Vec<usize>>,
    atom_of: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, atoms: &[Vec<usize>]) -> std::result::Result<Self, String> {
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for (ai, atom) in atoms.iter().enumerate() {
            if atom.is_empty() {
                return Err(format!("atom {ai} is empty"));
            }
            for &p in atom {
                if p >= n {
                    return Err(format!("atom {ai} names unknown path index {p}"));
                }
                if let Some(prev) = owner[p] {
                    return Err(format!("atoms {prev} and {ai} overlap in path index {p}"));
                }
                owner[p] = Some(ai);
            }
        }
        if let Some(p) = owner.iter().position(|o| o.is_none()) {
            return Err(format!("path index {p} is in no atom"));
        }
        Ok(Self::canonical(atoms.to_vec(), n))
    }

    fn canonical(mut atoms: Vec<Vec<usize>>, n: usize) -> Self {
        for a in &mut atoms {
            a.sort_unstable();
        }
        atoms.sort_unstable_by_key(|a| a[0]);
        let mut atom_of = vec![0; n];
        for (i, a) in atoms.iter().enumerate() {
            for &p in a {
                atom_of[p] = i;
            }
        }
        Partition { atoms, atom_of }
    }

    pub fn trivial(n: usize) -> Self {
        Self::canonical(vec![(0..n).collect()], n)
    }

    pub fn finest(n: usize) -> Self {
        Self::canonical((0..n).map(|p| vec![p]).collect(), n)
    }

    /// Groups paths with equal labels.
    pub fn from_labels<T: Eq>(labels: &[T]) -> Self {
        let mut atoms: Vec<Vec<usize>> = Vec::new();
        let mut reps: Vec<&T> = Vec::new();
        for (p, l) in labels.iter().enumerate() {
            match reps.iter().position(|r| *r == l) {
                Some(i) => atoms[i].push(p),
                None => {
                    reps.push(l);
                    atoms.push(vec![p]);
                }
            }
        }
        Self::canonical(atoms, labels.len())
    }

    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn atom_of(&self, p: usize) -> usize {
        self.atom_of[p]
    }

    pub fn n_paths(&self) -> usize {
        self.atom_of.len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom_set(&self, i: usize) -> PathSet {
        PathSet::from_indices(self.n_paths(), self.atoms[i].iter().copied())
    }

    /// Atoms of `self` that meet more than one atom of `coarser`.
    pub fn non_refining_atoms(&self, coarser: &Partition) -> Vec<&[usize]> {
        self.atoms
            .iter()
            .filter(|a| a.iter().any(|&p| coarser.atom_of(p) != coarser.atom_of(a[0])))
            .map(|a| a.as_slice())
            .collect()
    }

    pub fn refines(&self, coarser: &Partition) -> bool {
        self.non_refining_atoms(coarser).is_empty()
    }

    pub fn is_union_of_atoms(&self, set: &PathSet) -> bool {
        self.atoms
            .iter()
            .all(|a| a.iter().all(|&p| set.contains(p) == set.contains(a[0])))
    }

    /// The atoms intersected with `set`, dropping empty pieces.
    pub fn trace(&self, set: &PathSet) -> Vec<Vec<usize>> {
        self.atoms
            .iter()
            .map(|a| a.iter().copied().filter(|&p| set.contains(p)).collect::<Vec<_>>())
            .filter(|a| !a.is_empty())
            .collect()
    }

    /// True iff the values are constant on every atom.
    pub fn is_constant_on_atoms<T: PartialEq>(&self, values: &[T]) -> bool {
        self.first_non_constant(values).is_none()
    }

    pub fn first_non_constant<T: PartialEq>(&self, values: &[T]) -> Option<usize> {
        self.atoms
            .iter()
            .find_map(|a| a.iter().copied().find(|&p| values[p] != values[a[0]]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRecord {
    pub id: String,
    pub probability: Q,
}

/// Raw lattice description. Atoms are lists of path indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredLattice {
    /// Last epoch index K; epochs run over 0..=K.
    pub horizon: usize,
    pub paths: Vec<PathRecord>,
    pub filtration: Vec<Vec<Vec<usize>>>,
    pub initial_field: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeyerStructure {
    pub fields: Vec<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return f.write_str("valid");
        }
        f.write_str(&self.issues.join("; "))
    }
}

fn atom_names(lattice: &FilteredLattice, atom: &[usize]) -> String {
    let names: Vec<&str> = atom
        .iter()
        .map(|&p| lattice.paths.get(p).map(|r| r.id.as_str()).unwrap_or("?"))
        .collect();
    format!("{{{}}}", names.join(","))
}

/// Checks every structural and refinement invariant of a lattice and its
/// Meyer structure.
pub fn validate_lattice(lattice: &FilteredLattice, meyer: &MeyerStructure) -> ValidationReport {
    let mut issues = Vec::new();
    let n = lattice.paths.len();
    let k = lattice.horizon;
    if k == 0 {
        issues.push("epochs must be positive".to_string());
    }
    if n == 0 {
        issues.push("no paths".to_string());
    }
    for (i, r) in lattice.paths.iter().enumerate() {
        if lattice.paths[..i].iter().any(|o| o.id == r.id) {
            issues.push(format!("duplicate path id {:?} at path {i}", r.id));
        }
        if !r.probability.is_positive() {
            issues.push(format!(
                "path {:?} has non-positive probability {}",
                r.id, r.probability
            ));
        }
    }
    let total: Q = lattice.paths.iter().map(|r| r.probability.clone()).sum();
    if n > 0 && !total.is_one() {
        issues.push(format!("probabilities sum to {total}"));
    }

    let mut build = |label: String, raw: &[Vec<usize>]| -> Option<Partition> {
        match Partition::new(n, raw) {
            Ok(p) => Some(p),
            Err(e) => {
                issues.push(format!("{label} is not a partition: {e}"));
                None
            }
        }
    };
    let f0m = match &lattice.initial_field {
        Some(raw) => build("F_0-".to_string(), raw),
        None => Some(Partition::trivial(n)),
    };
    let f: Vec<Option<Partition>> = (0..=k)
        .map(|e| match lattice.filtration.get(e) {
            Some(raw) => build(format!("F_{e}"), raw),
            None => None,
        })
        .collect();
    let g: Vec<Option<Partition>> = (0..=k)
        .map(|e| match meyer.fields.get(e) {
            Some(raw) => build(format!("G_{e}"), raw),
            None => None,
        })
        .collect();
    if lattice.filtration.len() != k + 1 {
        issues.push(format!(
            "filtration has {} epochs, expected {}",
            lattice.filtration.len(),
            k + 1
        ));
    }
    if meyer.fields.len() != k + 1 {
        issues.push(format!(
            "Meyer structure has {} epochs, expected {}",
            meyer.fields.len(),
            k + 1
        ));
    }

    let mut refine = |fine: &Option<Partition>, fl: String, coarse: &Option<Partition>, cl: String| {
        if let (Some(a), Some(b)) = (fine, coarse) {
            let bad = a.non_refining_atoms(b);
            if !bad.is_empty() {
                let list: Vec<String> = bad.iter().map(|x| atom_names(lattice, x)).collect();
                issues.push(format!(
                    "{fl} does not refine {cl}: atoms {} split across {cl} atoms",
                    list.join(" ")
                ));
            }
        }
    };
    for e in 0..=k {
        let (prev, pl) = if e == 0 {
            (f0m.clone(), "F_0-".to_string())
        } else {
            (f[e - 1].clone(), format!("F_{}", e - 1))
        };
        refine(&f[e], format!("F_{e}"), &prev, pl.clone());
        refine(&g[e], format!("G_{e}"), &prev, pl);
        refine(&f[e], format!("F_{e}"), &g[e], format!("G_{e}"));
    }
    ValidationReport { issues }
}

/// A validated lattice with its Meyer structure; all operations that need
/// sigma-fields hang off this type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeyerSpace {
    lattice: FilteredLattice,
    meyer: MeyerStructure,
    prob: Vec<Q>,
    f: Vec<Partition>,
    f0m: Partition,
    g: Vec<Partition>,
}

impl MeyerSpace {
    pub fn new(lattice: FilteredLattice, meyer: MeyerStructure) -> Result<Self> {
        let report = validate_lattice(&lattice, &meyer);
        if !report.is_valid() {
            return Err(Error::Lattice(report.to_string()));
        }
        let n = lattice.paths.len();
        let part = |raw: &Vec<Vec<usize>>| Partition::new(n, raw).expect("validated");
        let f = lattice.filtration.iter().map(part).collect();
        let g = meyer.fields.iter().map(part).collect();
        let f0m = lattice
            .initial_field
            .as_ref()
            .map(part)
            .unwrap_or_else(|| Partition::trivial(n));
        let prob = lattice.paths.iter().map(|r| r.probability.clone()).collect();
        Ok(MeyerSpace {
            lattice,
            meyer,
            prob,
            f,
            f0m,
            g,
        })
    }

    pub fn lattice(&self) -> &FilteredLattice {
        &self.lattice
    }

    pub fn meyer(&self) -> &MeyerStructure {
        &self.meyer
    }

    pub fn horizon(&self) -> usize {
        self.lattice.horizon
    }

    pub fn n_paths(&self) -> usize {
        self.prob.len()
    }

    pub fn n_instants(&self) -> usize {
        2 * (self.horizon() + 1)
    }

    pub fn path_id(&self, p: usize) -> &str {
        &self.lattice.paths[p].id
    }

    pub fn probability(&self, p: usize) -> &Q {
        &self.prob[p]
    }

    pub fn probabilities(&self) -> &[Q] {
        &self.prob
    }

    /// Finite instants in order.
    pub fn instants(&self) -> Vec<Instant> {
        (0..self.n_instants())
            .map(|r| Instant::from_rank(r, self.horizon()))
            .collect()
    }

    /// Finite instants followed by `Terminal`.
    pub fn instants_with_terminal(&self) -> Vec<Instant> {
        let mut v = self.instants();
        v.push(Instant::Terminal);
        v
    }

    pub fn successor(&self, u: Instant) -> Option<Instant> {
        match u {
            Instant::At(k) => Some(Instant::Int(k)),
            Instant::Int(k) if k == self.horizon() => Some(Instant::Terminal),
            Instant::Int(k) => Some(Instant::At(k + 1)),
            Instant::Terminal => None,
        }
    }

    pub fn predecessor(&self, u: Instant) -> Option<Instant> {
        match u {
            Instant::At(0) => None,
            Instant::At(k) => Some(Instant::Int(k - 1)),
            Instant::Int(k) => Some(Instant::At(k)),
            Instant::Terminal => Some(Instant::Int(self.horizon())),
        }
    }

    pub fn filtration(&self, k: usize) -> &Partition {
        &self.f[k]
    }

    pub fn initial_field(&self) -> &Partition {
        &self.f0m
    }

    pub fn meyer_field(&self, k: usize) -> &Partition {
        &self.g[k]
    }

    /// `F_{k-1}`, reading `F_{0-}` for k = 0.
    pub fn filtration_before(&self, k: usize) -> &Partition {
        if k == 0 {
            &self.f0m
        } else {
            &self.f[k - 1]
        }
    }

    pub fn sigma_field_at(&self, u: Instant, kind: FieldKind) -> Result<&Partition> {
        if u.is_terminal() {
            return Err(Error::TerminalField);
        }
        Ok(self.field(u, kind))
    }

    /// Like `sigma_field_at`, reading `F_K` at `Terminal`.
    pub fn field(&self, u: Instant, kind: FieldKind) -> &Partition {
        match (u, kind) {
            (Instant::Terminal, _) => &self.f[self.horizon()],
            (Instant::Int(k), _) => &self.f[k],
            (Instant::At(k), FieldKind::Lambda) => &self.g[k],
            (Instant::At(k), FieldKind::Optional) => &self.f[k],
            (Instant::At(k), FieldKind::Predictable) => self.filtration_before(k),
        }
    }

    pub fn expectation(&self, rv: &[Q]) -> Q {
        rv.iter().zip(&self.prob).map(|(x, p)| x * p).sum()
    }

    /// Probability-weighted average of `rv` over each atom.
    pub fn conditional_expectation(&self, rv: &[Q], partition: &Partition) -> Vec<Q> {
        let mut out = vec![Q::zero(); rv.len()];
        for atom in partition.atoms() {
            let mass: Q = atom.iter().map(|&p| self.prob[p].clone()).sum();
            let num: Q = atom.iter().map(|&p| &rv[p] * &self.prob[p]).sum();
            let avg = num / mass;
            for &p in atom {
                out[p] = avg.clone();
            }
        }
        out
    }

    pub fn mass(&self, set: &PathSet) -> Q {
        set.iter().map(|p| self.prob[p].clone()).sum()
    }

    pub fn is_measurable(&self, process: &LatticeProcess, kind: FieldKind) -> bool {
        self.first_non_measurable(process, kind).is_none()
    }

    pub fn first_non_measurable(&self, process: &LatticeProcess, kind: FieldKind) -> Option<(usize, Instant)> {
        self.instants().into_iter().find_map(|u| {
            self.field(u, kind)
                .first_non_constant(process.slice(u))
                .map(|p| (p, u))
        })
    }

    pub fn require_measurable(&self, process: &LatticeProcess, kind: FieldKind, what: &str) -> Result<()> {
        match self.first_non_measurable(process, kind) {
            None => Ok(()),
            Some((_, at)) => Err(Error::NotMeasurable {
                what: what.to_string(),
                kind,
                at,
            }),
        }
    }

    pub fn is_stopping_time(&self, t: &RandomInstant, kind: FieldKind) -> bool {
        self.instants().into_iter().all(|u| {
            let set = PathSet::from_fn(self.n_paths(), |p| t.at(p) <= u);
            self.field(u, kind).is_union_of_atoms(&set)
        })
    }

    pub fn is_lambda_stopping_time(&self, t: &RandomInstant) -> bool {
        self.is_stopping_time(t, FieldKind::Lambda)
    }

    pub fn require_stopping_time(&self, t: &RandomInstant, kind: FieldKind, what: &str) -> Result<()> {
        if t.n_paths() != self.n_paths() {
            return Err(Error::Shape(format!("{what} has {} paths", t.n_paths())));
        }
        if self.is_stopping_time(t, kind) {
            Ok(())
        } else {
            Err(Error::NotStoppingTime {
                what: what.to_string(),
                kind,
            })
        }
    }

    /// Atoms of the field at a stopping time: on `{T = u}` the atoms of the
    /// instant field, on `{T = TERMINAL}` the atoms of `F_K`.
    pub fn field_at_time(&self, t: &RandomInstant, kind: FieldKind) -> Partition {
        let n = self.n_paths();
        let mut atoms = Vec::new();
        for u in self.instants_with_terminal() {
            let on = PathSet::from_fn(n, |p| t.at(p) == u);
            if on.is_empty() {
                continue;
            }
            atoms.extend(self.field(u, kind).trace(&on));
        }
        Partition::canonical(atoms, n)
    }

    /// Earliest instant of a Lambda-measurable set of (path, instant) pairs.
    pub fn section_witness(&self, set: &InstantSet) -> Result<RandomInstant> {
        for u in self.instants() {
            let slice = set.slice(u);
            if !self.field(u, FieldKind::Lambda).is_union_of_atoms(&slice) {
                return Err(Error::NotLambdaSet(u));
            }
        }
        Ok(RandomInstant::new(
            (0..self.n_paths())
                .map(|p| {
                    self.instants()
                        .into_iter()
                        .find(|&u| set.contains(p, u))
                        .unwrap_or(Instant::Terminal)
                })
                .collect(),
        ))
    }

    pub fn constant_time(&self, u: Instant) -> RandomInstant {
        RandomInstant::constant(self.n_paths(), u)
    }
}

/// Rational value per (path, instant) plus a terminal slice.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticeProcess {
    slices: Vec<Vec<Q>>,
    terminal: Vec<Q>,
}

impl LatticeProcess {
    pub fn zeros(n_instants: usize, n_paths: usize) -> Self {
        LatticeProcess {
            slices: vec![vec![Q::zero(); n_paths]; n_instants],
            terminal: vec![Q::zero(); n_paths],
        }
    }

    pub fn zeros_on(space: &MeyerSpace) -> Self {
        Self::zeros(space.n_instants(), space.n_paths())
    }

    /// Builds from `slices[rank][path]` with terminal value 0.
    pub fn from_slices(slices: Vec<Vec<Q>>) -> Result<Self> {
        let n = slices.first().map(|s| s.len()).unwrap_or(0);
        if !slices.len().is_multiple_of(2) || slices.iter().any(|s| s.len() != n) {
            return Err(Error::Shape("slices must be an even number of equal-length rows".into()));
        }
        Ok(LatticeProcess {
            slices,
            terminal: vec![Q::zero(); n],
        })
    }

    /// Builds from `rows[path][rank]` with terminal value 0.
    pub fn from_path_rows(rows: &[Vec<Q>]) -> Result<Self> {
        let m = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("path rows differ in length".into()));
        }
        let slices = (0..m).map(|r| rows.iter().map(|row| row[r].clone()).collect()).collect();
        Self::from_slices(slices)
    }

    /// Same values on every path.
    pub fn deterministic(values: &[Q], n_paths: usize) -> Result<Self> {
        Self::from_slices(values.iter().map(|v| vec![v.clone(); n_paths]).collect())
    }

    pub fn from_fn(space: &MeyerSpace, f: impl Fn(usize, Instant) -> Q) -> Self {
        let slices = space
            .instants()
            .into_iter()
            .map(|u| (0..space.n_paths()).map(|p| f(p, u)).collect())
            .collect();
        LatticeProcess {
            slices,
            terminal: vec![Q::zero(); space.n_paths()],
        }
    }

    pub fn with_terminal(mut self, terminal: Vec<Q>) -> Self {
        assert_eq!(terminal.len(), self.n_paths());
        self.terminal = terminal;
        self
    }

    pub fn n_paths(&self) -> usize {
        self.terminal.len()
    }

    pub fn n_instants(&self) -> usize {
        self.slices.len()
    }

    pub fn horizon(&self) -> usize {
        self.slices.len() / 2 - 1
    }

    pub fn slice(&self, u: Instant) -> &[Q] {
        match u {
            Instant::Terminal => &self.terminal,
            _ => &self.slices[u.rank()],
        }
    }

    pub fn slice_mut(&mut self, u: Instant) -> &mut Vec<Q> {
        match u {
            Instant::Terminal => &mut self.terminal,
            _ => &mut self.slices[u.rank()],
        }
    }

    pub fn set_slice(&mut self, u: Instant, values: Vec<Q>) {
        assert_eq!(values.len(), self.n_paths());
        *self.slice_mut(u) = values;
    }

    pub fn value(&self, p: usize, u: Instant) -> &Q {
        &self.slice(u)[p]
    }

    pub fn set(&mut self, p: usize, u: Instant, v: Q) {
        self.slice_mut(u)[p] = v;
    }

    pub fn terminal(&self) -> &[Q] {
        &self.terminal
    }

    /// Values of one path over the finite instants.
    pub fn path_row(&self, p: usize) -> Vec<Q> {
        self.slices.iter().map(|s| s[p].clone()).collect()
    }

    pub fn has_zero_terminal(&self) -> bool {
        self.terminal.iter().all(|v| v.is_zero())
    }

    /// First (path, instant) with a negative value, terminal included.
    pub fn first_negative(&self) -> Option<(usize, Instant)> {
        let h = self.horizon();
        self.slices
            .iter()
            .chain(std::iter::once(&self.terminal))
            .enumerate()
            .find_map(|(r, s)| {
                s.iter()
                    .position(|v| v.is_negative())
                    .map(|p| (p, Instant::from_rank(r, h)))
            })
    }

    pub fn map(&self, f: impl Fn(&Q) -> Q) -> Self {
        LatticeProcess {
            slices: self.slices.iter().map(|s| s.iter().map(&f).collect()).collect(),
            terminal: self.terminal.iter().map(&f).collect(),
        }
    }

    pub fn zip_with(&self, o: &LatticeProcess, f: impl Fn(&Q, &Q) -> Q) -> Self {
        let zip = |a: &Vec<Q>, b: &Vec<Q>| a.iter().zip(b).map(|(x, y)| f(x, y)).collect();
        LatticeProcess {
            slices: self.slices.iter().zip(&o.slices).map(|(a, b)| zip(a, b)).collect(),
            terminal: zip(&self.terminal, &o.terminal),
        }
    }

    /// Pointwise `self >= o` over finite instants and the terminal slice.
    pub fn dominates(&self, o: &LatticeProcess) -> bool {
        self.slices
            .iter()
            .chain(std::iter::once(&self.terminal))
            .zip(o.slices.iter().chain(std::iter::once(&o.terminal)))
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x >= y))
    }

    /// Values read along a random instant.
    pub fn at_time(&self, t: &RandomInstant) -> Vec<Q> {
        (0..self.n_paths()).map(|p| self.value(p, t.at(p)).clone()).collect()
    }
}

/// Per-path instant; `Terminal` encodes infinity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RandomInstant(Vec<Instant>);

impl RandomInstant {
    pub fn new(v: Vec<Instant>) -> Self {
        RandomInstant(v)
    }

    pub fn constant(n: usize, u: Instant) -> Self {
        RandomInstant(vec![u; n])
    }

    pub fn at(&self, p: usize) -> Instant {
        self.0[p]
    }

    pub fn set(&mut self, p: usize, u: Instant) {
        self.0[p] = u;
    }

    pub fn n_paths(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Instant] {
        &self.0
    }

    /// `T` on `H`, `Terminal` off `H`.
    pub fn restrict(&self, h: &PathSet) -> RandomInstant {
        RandomInstant(
            self.0
                .iter()
                .enumerate()
                .map(|(p, &u)| if h.contains(p) { u } else { Instant::Terminal })
                .collect(),
        )
    }

    /// Pathwise `self <= o`.
    pub fn le(&self, o: &RandomInstant) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a <= b)
    }

    pub fn finite_set(&self) -> PathSet {
        PathSet::from_fn(self.0.len(), |p| !self.0[p].is_terminal())
    }
}

impl fmt::Display for RandomInstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|u| u.to_string()).collect();
        write!(f, "[{}]", parts.join(" "))
    }
}

/// Set of (path, finite instant) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstantSet {
    member: Vec<Vec<bool>>,
}

impl InstantSet {
    pub fn empty(space: &MeyerSpace) -> Self {
        InstantSet {
            member: vec![vec![false; space.n_paths()]; space.n_instants()],
        }
    }

    pub fn from_fn(space: &MeyerSpace, f: impl Fn(usize, Instant) -> bool) -> Self {
        InstantSet {
            member: space
                .instants()
                .into_iter()
                .map(|u| (0..space.n_paths()).map(|p| f(p, u)).collect())
                .collect(),
        }
    }

    /// The graph of `t` restricted to finite values.
    pub fn graph(space: &MeyerSpace, t: &RandomInstant) -> Self {
        Self::from_fn(space, |p, u| t.at(p) == u)
    }

    pub fn contains(&self, p: usize, u: Instant) -> bool {
        !u.is_terminal() && self.member[u.rank()][p]
    }

    pub fn insert(&mut self, p: usize, u: Instant) {
        self.member[u.rank()][p] = true;
    }

    pub fn slice(&self, u: Instant) -> PathSet {
        PathSet::from_fn(self.member[u.rank()].len(), |p| self.member[u.rank()][p])
    }

    pub fn projection(&self) -> PathSet {
        let n = self.member.first().map(|s| s.len()).unwrap_or(0);
        PathSet::from_fn(n, |p| self.member.iter().any(|s| s[p]))
    }
}
