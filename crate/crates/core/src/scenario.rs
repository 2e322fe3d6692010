//! Scenario files: a JSON document describing a lattice, its Meyer
//! structure, named processes and an optional representation bundle.
//!
//! Rationals are strings (`"3"`, `"-1/4"`). Coefficient tables are either an
//! array with one entry per instant (shared by all paths) or an object
//! mapping path ids to such arrays.

use crate::error::{Error, Result};
use crate::lattice::{FilteredLattice, Instant, LatticeProcess, MeyerSpace, MeyerStructure, PathRecord, Q};
use crate::representation::{Cubic, GFamily, GKind, Given, RandomMeasure, RepresentationProblem, DEFAULT_TOLERANCE};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde_json::{Map, Value};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum Coef {
    PerInstant(Vec<Q>),
    PerPath(Vec<(String, Vec<Q>)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GKindChoice {
    Affine,
    Monotone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GConfig {
    pub kind: GKindChoice,
    pub a: Coef,
    pub b: Coef,
    pub c: Option<Coef>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommandMeta {
    /// Reward process used by the stopping commands.
    pub process: Option<String>,
    /// Signal `L` for the representation commands.
    pub signal: Option<String>,
    /// Reward `X` for the representation commands.
    pub reward: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub epochs: usize,
    pub paths: Vec<(String, Q)>,
    pub initial_field: Option<Vec<Vec<String>>>,
    pub filtration: Vec<Vec<Vec<String>>>,
    pub meyer: Vec<Vec<Vec<String>>>,
    /// name -> rows in path order.
    pub processes: BTreeMap<String, Vec<(String, Vec<Q>)>>,
    pub g: Option<GConfig>,
    pub mu: Option<Coef>,
    pub ell_grid: Vec<Q>,
    pub commands: CommandMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

pub fn parse_rational(s: &str) -> std::result::Result<Q, String> {
    let t = s.trim();
    let bad = || format!("malformed rational {s:?}");
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let ok = |x: &str| {
        let digits = x.strip_prefix('-').unwrap_or(x);
        !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
    };
    if !ok(n) || !ok(d) || d.starts_with('-') {
        return Err(bad());
    }
    let num: BigInt = n.parse().map_err(|_| bad())?;
    let den: BigInt = d.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(format!("zero denominator in {s:?}"));
    }
    Ok(Q::new(num, den))
}

/// Lowest terms, `p` or `p/q`.
pub fn format_rational(q: &Q) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

struct Reader {
    strict: bool,
    warnings: Vec<String>,
}

fn err(at: &str, msg: impl std::fmt::Display) -> Error {
    Error::Scenario(format!("{at}: {msg}"))
}

impl Reader {
    fn object<'v>(&mut self, v: &'v Value, at: &str, known: &[&str]) -> Result<&'v Map<String, Value>> {
        let m = v.as_object().ok_or_else(|| err(at, "expected an object"))?;
        for k in m.keys() {
            if !known.contains(&k.as_str()) {
                let msg = format!("{at}: unknown field {k:?}");
                if self.strict {
                    return Err(Error::Scenario(msg));
                }
                self.warnings.push(msg);
            }
        }
        Ok(m)
    }

    fn rational(&self, v: &Value, at: &str) -> Result<Q> {
        match v {
            Value::String(s) => parse_rational(s).map_err(|e| err(at, e)),
            Value::Number(n) if n.is_i64() => Ok(Q::from_integer(BigInt::from(n.as_i64().unwrap()))),
            _ => Err(err(at, "expected a rational string")),
        }
    }

    fn rationals(&self, v: &Value, at: &str) -> Result<Vec<Q>> {
        let a = v.as_array().ok_or_else(|| err(at, "expected an array of rationals"))?;
        a.iter()
            .enumerate()
            .map(|(i, x)| self.rational(x, &format!("{at}[{i}]")))
            .collect()
    }

    fn partition(&self, v: &Value, at: &str) -> Result<Vec<Vec<String>>> {
        let a = v.as_array().ok_or_else(|| err(at, "expected a list of atoms"))?;
        a.iter()
            .enumerate()
            .map(|(i, atom)| {
                let at = format!("{at}[{i}]");
                let ids = atom.as_array().ok_or_else(|| err(&at, "expected a list of path ids"))?;
                ids.iter()
                    .enumerate()
                    .map(|(j, id)| {
                        id.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| err(&format!("{at}[{j}]"), "expected a path id"))
                    })
                    .collect()
            })
            .collect()
    }

    fn rows(&self, v: &Value, at: &str) -> Result<Vec<(String, Vec<Q>)>> {
        let m = v.as_object().ok_or_else(|| err(at, "expected an object of path rows"))?;
        m.iter()
            .map(|(id, row)| Ok((id.clone(), self.rationals(row, &format!("{at}.{id}"))?)))
            .collect()
    }

    fn coef(&self, v: &Value, at: &str) -> Result<Coef> {
        match v {
            Value::Array(_) => Ok(Coef::PerInstant(self.rationals(v, at)?)),
            Value::Object(_) => Ok(Coef::PerPath(self.rows(v, at)?)),
            _ => Err(err(at, "expected an array or an object of path rows")),
        }
    }
}

pub fn parse_scenario(text: &str, strict: bool) -> Result<Parsed> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| Error::Scenario(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let mut r = Reader {
        strict,
        warnings: Vec::new(),
    };
    let top = r.object(
        &root,
        "scenario",
        &[
            "epochs",
            "paths",
            "initial_field",
            "filtration",
            "meyer",
            "processes",
            "g",
            "mu",
            "ell_grid",
            "commands",
        ],
    )?;
    let get = |k: &str| top.get(k).ok_or_else(|| err("scenario", format!("missing field {k:?}")));

    let epochs = get("epochs")?
        .as_u64()
        .ok_or_else(|| err("epochs", "expected a nonnegative integer"))? as usize;
    let mut paths = Vec::new();
    for (i, p) in get("paths")?
        .as_array()
        .ok_or_else(|| err("paths", "expected an array"))?
        .iter()
        .enumerate()
    {
        let at = format!("paths[{i}]");
        let m = r.object(p, &at, &["id", "probability"])?;
        let id = m
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| err(&at, "missing string field \"id\""))?;
        let prob = r.rational(
            m.get("probability").ok_or_else(|| err(&at, "missing field \"probability\""))?,
            &format!("{at}.probability"),
        )?;
        paths.push((id.to_string(), prob));
    }
    let initial_field = match top.get("initial_field") {
        Some(v) => Some(r.partition(v, "initial_field")?),
        None => None,
    };
    let epoch_list = |r: &Reader, key: &str| -> Result<Vec<Vec<Vec<String>>>> {
        let a = get(key)?.as_array().ok_or_else(|| err(key, "expected one partition per epoch"))?;
        a.iter()
            .enumerate()
            .map(|(e, v)| r.partition(v, &format!("{key}[{e}]")))
            .collect()
    };
    let filtration = epoch_list(&r, "filtration")?;
    let meyer = epoch_list(&r, "meyer")?;

    let mut processes = BTreeMap::new();
    if let Some(v) = top.get("processes") {
        let m = v.as_object().ok_or_else(|| err("processes", "expected an object"))?;
        for (name, rows) in m {
            processes.insert(name.clone(), r.rows(rows, &format!("processes.{name}"))?);
        }
    }
    let g = match top.get("g") {
        Some(v) => {
            let m = r.object(v, "g", &["kind", "a", "b", "c", "tolerance"])?;
            let kind = match m.get("kind").and_then(Value::as_str) {
                Some("affine") => GKindChoice::Affine,
                Some("monotone") => GKindChoice::Monotone,
                _ => return Err(err("g.kind", "expected \"affine\" or \"monotone\"")),
            };
            let part = |k: &str| m.get(k).ok_or_else(|| err("g", format!("missing field {k:?}")));
            Some(GConfig {
                kind,
                a: r.coef(part("a")?, "g.a")?,
                b: r.coef(part("b")?, "g.b")?,
                c: match m.get("c") {
                    Some(v) => Some(r.coef(v, "g.c")?),
                    None => None,
                },
                tolerance: match m.get("tolerance") {
                    Some(v) => Some(v.as_f64().ok_or_else(|| err("g.tolerance", "expected a number"))?),
                    None => None,
                },
            })
        }
        None => None,
    };
    let mu = match top.get("mu") {
        Some(v) => Some(r.coef(v, "mu")?),
        None => None,
    };
    let ell_grid = match top.get("ell_grid") {
        Some(v) => r.rationals(v, "ell_grid")?,
        None => Vec::new(),
    };
    let mut commands = CommandMeta::default();
    if let Some(v) = top.get("commands") {
        let m = r.object(v, "commands", &["process", "signal", "reward"])?;
        let name = |k: &str| -> Result<Option<String>> {
            match m.get(k) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(err(&format!("commands.{k}"), "expected a process name")),
            }
        };
        commands = CommandMeta {
            process: name("process")?,
            signal: name("signal")?,
            reward: name("reward")?,
        };
    }
    let scenario = Scenario {
        epochs,
        paths,
        initial_field,
        filtration,
        meyer,
        processes,
        g,
        mu,
        ell_grid,
        commands,
    };
    scenario.check()?;
    Ok(Parsed {
        scenario,
        warnings: r.warnings,
    })
}

fn rows_value(rows: &[(String, Vec<Q>)]) -> Value {
    let mut m = Map::new();
    for (id, row) in rows {
        m.insert(id.clone(), Value::Array(row.iter().map(|q| Value::String(format_rational(q))).collect()));
    }
    Value::Object(m)
}

fn coef_value(c: &Coef) -> Value {
    match c {
        Coef::PerInstant(v) => Value::Array(v.iter().map(|q| Value::String(format_rational(q))).collect()),
        Coef::PerPath(rows) => rows_value(rows),
    }
}

fn partition_value(p: &[Vec<String>]) -> Value {
    Value::Array(
        p.iter()
            .map(|a| Value::Array(a.iter().map(|s| Value::String(s.clone())).collect()))
            .collect(),
    )
}

impl Scenario {
    pub fn n_instants(&self) -> usize {
        2 * (self.epochs + 1)
    }

    pub fn path_index(&self, id: &str) -> Option<usize> {
        self.paths.iter().position(|(p, _)| p == id)
    }

    fn indices(&self, p: &[Vec<String>], at: &str) -> Result<Vec<Vec<usize>>> {
        let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
        let mut out = Vec::new();
        for (i, atom) in p.iter().enumerate() {
            let mut idx = Vec::new();
            for id in atom {
                let k = self
                    .path_index(id)
                    .ok_or_else(|| err(&format!("{at}[{i}]"), format!("unknown path {id:?}")))?;
                if let Some(prev) = seen.insert(id, i) {
                    return Err(err(at, format!("atoms {prev} and {i} overlap in path {id:?}")));
                }
                idx.push(k);
            }
            out.push(idx);
        }
        for (id, _) in &self.paths {
            if !seen.contains_key(id.as_str()) {
                return Err(err(at, format!("path {id:?} is in no atom")));
            }
        }
        Ok(out)
    }

    pub fn lattice(&self) -> Result<(FilteredLattice, MeyerStructure)> {
        let lattice = FilteredLattice {
            horizon: self.epochs,
            paths: self
                .paths
                .iter()
                .map(|(id, p)| PathRecord {
                    id: id.clone(),
                    probability: p.clone(),
                })
                .collect(),
            filtration: self
                .filtration
                .iter()
                .enumerate()
                .map(|(e, p)| self.indices(p, &format!("filtration[{e}]")))
                .collect::<Result<_>>()?,
            initial_field: match &self.initial_field {
                Some(p) => Some(self.indices(p, "initial_field")?),
                None => None,
            },
        };
        let meyer = MeyerStructure {
            fields: self
                .meyer
                .iter()
                .enumerate()
                .map(|(e, p)| self.indices(p, &format!("meyer[{e}]")))
                .collect::<Result<_>>()?,
        };
        Ok((lattice, meyer))
    }

    pub fn space(&self) -> Result<MeyerSpace> {
        let (l, m) = self.lattice()?;
        MeyerSpace::new(l, m)
    }

    fn table(&self, rows: &[(String, Vec<Q>)], at: &str) -> Result<Vec<Vec<Q>>> {
        let mut out: Vec<Option<Vec<Q>>> = vec![None; self.paths.len()];
        for (id, row) in rows {
            let p = self
                .path_index(id)
                .ok_or_else(|| err(at, format!("unknown path {id:?}")))?;
            if row.len() != self.n_instants() {
                return Err(err(
                    &format!("{at}.{id}"),
                    format!("expected {} values, found {}", self.n_instants(), row.len()),
                ));
            }
            out[p] = Some(row.clone());
        }
        out.into_iter()
            .enumerate()
            .map(|(p, r)| r.ok_or_else(|| err(at, format!("missing row for path {:?}", self.paths[p].0))))
            .collect()
    }

    fn coef_table(&self, c: &Coef, at: &str) -> Result<Vec<Vec<Q>>> {
        match c {
            Coef::PerInstant(v) => {
                if v.len() != self.n_instants() {
                    return Err(err(at, format!("expected {} values, found {}", self.n_instants(), v.len())));
                }
                Ok(vec![v.clone(); self.paths.len()])
            }
            Coef::PerPath(rows) => self.table(rows, at),
        }
    }

    pub fn process(&self, name: &str) -> Result<LatticeProcess> {
        let rows = self
            .processes
            .get(name)
            .ok_or_else(|| err("processes", format!("no process named {name:?}")))?;
        LatticeProcess::from_path_rows(&self.table(rows, &format!("processes.{name}"))?)
    }

    /// The reward named by `commands.process`, or the only process present.
    pub fn default_process(&self) -> Result<String> {
        if let Some(p) = &self.commands.process {
            return Ok(p.clone());
        }
        if self.processes.len() == 1 {
            return Ok(self.processes.keys().next().unwrap().clone());
        }
        Err(Error::Scenario("no process selected; pass --process".into()))
    }

    pub fn g_family(&self, space: &MeyerSpace) -> Result<Option<GFamily>> {
        let Some(g) = &self.g else { return Ok(None) };
        let a = self.coef_table(&g.a, "g.a")?;
        let b = self.coef_table(&g.b, "g.b")?;
        let c = match &g.c {
            Some(c) => self.coef_table(c, "g.c")?,
            None => vec![vec![Q::zero(); self.n_instants()]; self.paths.len()],
        };
        let kind = match g.kind {
            GKindChoice::Affine => GKind::Affine,
            GKindChoice::Monotone => GKind::Monotone {
                tolerance: g.tolerance.unwrap_or(DEFAULT_TOLERANCE),
            },
        };
        let fam = GFamily::from_fn(space, kind, |p, u| Cubic {
            a: a[p][u.rank()].clone(),
            b: b[p][u.rank()].clone(),
            c: c[p][u.rank()].clone(),
        });
        fam.validate(space)?;
        Ok(Some(fam))
    }

    pub fn measure(&self, space: &MeyerSpace) -> Result<Option<RandomMeasure>> {
        let Some(mu) = &self.mu else { return Ok(None) };
        let rows = self.coef_table(mu, "mu")?;
        let _ = space;
        RandomMeasure::new(LatticeProcess::from_path_rows(&rows)?).map(Some)
    }

    /// Representation bundle, when `g`, `mu` and a signal or reward are present.
    pub fn representation(&self, space: &MeyerSpace) -> Result<Option<RepresentationProblem>> {
        let (Some(g), Some(mu)) = (self.g_family(space)?, self.measure(space)?) else {
            return Ok(None);
        };
        let given = match (&self.commands.signal, &self.commands.reward) {
            (Some(l), _) => Given::Signal(self.process(l)?),
            (None, Some(x)) => Given::Reward(self.process(x)?),
            (None, None) => return Ok(None),
        };
        Ok(Some(RepresentationProblem { g, mu, given }))
    }

    /// Structural checks beyond JSON shape: lattice validity and name resolution.
    pub fn check(&self) -> Result<()> {
        let (l, m) = self.lattice()?;
        let report = crate::lattice::validate_lattice(&l, &m);
        if !report.is_valid() {
            return Err(Error::Scenario(report.to_string()));
        }
        for name in self.processes.keys() {
            self.process(name)?;
        }
        for (k, name) in [
            ("process", &self.commands.process),
            ("signal", &self.commands.signal),
            ("reward", &self.commands.reward),
        ] {
            if let Some(n) = name {
                if !self.processes.contains_key(n) {
                    return Err(err(&format!("commands.{k}"), format!("no process named {n:?}")));
                }
            }
        }
        if let Some(g) = &self.g {
            self.coef_table(&g.a, "g.a")?;
            self.coef_table(&g.b, "g.b")?;
            if let Some(c) = &g.c {
                self.coef_table(c, "g.c")?;
            }
        }
        if let Some(mu) = &self.mu {
            let t = self.coef_table(mu, "mu")?;
            if t.iter().flatten().any(|q| q.is_negative()) {
                return Err(err("mu", "masses must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("epochs".into(), Value::from(self.epochs as u64));
        m.insert(
            "paths".into(),
            Value::Array(
                self.paths
                    .iter()
                    .map(|(id, p)| {
                        let mut o = Map::new();
                        o.insert("id".into(), Value::String(id.clone()));
                        o.insert("probability".into(), Value::String(format_rational(p)));
                        Value::Object(o)
                    })
                    .collect(),
            ),
        );
        if let Some(f) = &self.initial_field {
            m.insert("initial_field".into(), partition_value(f));
        }
        m.insert(
            "filtration".into(),
            Value::Array(self.filtration.iter().map(|p| partition_value(p)).collect()),
        );
        m.insert(
            "meyer".into(),
            Value::Array(self.meyer.iter().map(|p| partition_value(p)).collect()),
        );
        if !self.processes.is_empty() {
            let mut o = Map::new();
            for (name, rows) in &self.processes {
                o.insert(name.clone(), rows_value(rows));
            }
            m.insert("processes".into(), Value::Object(o));
        }
        if let Some(g) = &self.g {
            let mut o = Map::new();
            o.insert(
                "kind".into(),
                Value::String(match g.kind {
                    GKindChoice::Affine => "affine".into(),
                    GKindChoice::Monotone => "monotone".into(),
                }),
            );
            o.insert("a".into(), coef_value(&g.a));
            o.insert("b".into(), coef_value(&g.b));
            if let Some(c) = &g.c {
                o.insert("c".into(), coef_value(c));
            }
            if let Some(t) = g.tolerance {
                o.insert("tolerance".into(), Value::from(t));
            }
            m.insert("g".into(), Value::Object(o));
        }
        if let Some(mu) = &self.mu {
            m.insert("mu".into(), coef_value(mu));
        }
        if !self.ell_grid.is_empty() {
            m.insert(
                "ell_grid".into(),
                Value::Array(self.ell_grid.iter().map(|q| Value::String(format_rational(q))).collect()),
            );
        }
        let c = &self.commands;
        if c.process.is_some() || c.signal.is_some() || c.reward.is_some() {
            let mut o = Map::new();
            for (k, v) in [("process", &c.process), ("signal", &c.signal), ("reward", &c.reward)] {
                if let Some(v) = v {
                    o.insert(k.into(), Value::String(v.clone()));
                }
            }
            m.insert("commands".into(), Value::Object(o));
        }
        Value::Object(m)
    }

    /// Canonical text form; `parse_scenario(render())` reproduces the scenario.
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("json");
        s.push('\n');
        s
    }

    /// Rows of a process in path order, for embedding into a scenario.
    pub fn rows_of(space: &MeyerSpace, z: &LatticeProcess) -> Vec<(String, Vec<Q>)> {
        (0..space.n_paths())
            .map(|p| (space.path_id(p).to_string(), z.path_row(p)))
            .collect()
    }

    pub fn from_space_parts(
        epochs: usize,
        paths: Vec<(String, Q)>,
        filtration: Vec<Vec<Vec<String>>>,
        meyer: Vec<Vec<Vec<String>>>,
    ) -> Scenario {
        Scenario {
            epochs,
            paths,
            initial_field: None,
            filtration,
            meyer,
            processes: BTreeMap::new(),
            g: None,
            mu: None,
            ell_grid: Vec::new(),
            commands: CommandMeta::default(),
        }
    }

    /// A scenario describing `space` with no processes.
    pub fn from_space(space: &MeyerSpace) -> Scenario {
        let l = space.lattice();
        let names = |p: &[Vec<usize>]| -> Vec<Vec<String>> {
            p.iter()
                .map(|a| a.iter().map(|&i| l.paths[i].id.clone()).collect())
                .collect()
        };
        Scenario {
            epochs: l.horizon,
            paths: l.paths.iter().map(|r| (r.id.clone(), r.probability.clone())).collect(),
            initial_field: l.initial_field.as_ref().map(|p| names(p)),
            filtration: l.filtration.iter().map(|p| names(p)).collect(),
            meyer: space.meyer().fields.iter().map(|p| names(p)).collect(),
            processes: BTreeMap::new(),
            g: None,
            mu: None,
            ell_grid: Vec::new(),
            commands: CommandMeta::default(),
        }
    }
}

/// Instant label used in reports.
pub fn instant_label(u: Instant) -> String {
    u.to_string()
}
