//! Report-producing commands over a scenario, shared by the CLI and tests.

use crate::divided::{divided_value, enumerate_divided_stops, instant_form, DividedQuadruple};
use crate::enumerate::{enumerate_stopping_times, ScaledTable, ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::lattice::{int, FieldKind, Instant, LatticeProcess, MeyerSpace, RandomInstant, Q};
use crate::projection::{
    check_projection_fatou, check_usc_sequence_equivalence, envelope, increasing_pairing, is_left_usc_in_expectation,
    is_right_usc_in_expectation, project, Mode, Side,
};
use crate::representation::{
    forward_evaluate, level_passage, max_abs_gap, solve_representation, stopping_value, universal_signal_check, GKind,
    Given, Preconditions, RepresentationProblem, Stop, MONOTONE_CHECK_TOLERANCE,
};
use crate::scenario::{format_rational, Scenario};
use crate::snell::{
    check_optimality_with, delta_stop, is_lambda_martingale, is_lambda_supermartingale, is_optional_structure,
    lambda_entry_time, lambda_threshold, mertens_decompose, root_value, sigma_stop, smallest_largest_optimal,
    snell_brute_force, snell_brute_force_from, snell_envelope, MertensDecomposition,
};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Project,
    Snell,
    Decompose,
    Stop,
    Represent,
    Signal,
    Oracle,
    Suite,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Validate,
        Command::Project,
        Command::Snell,
        Command::Decompose,
        Command::Stop,
        Command::Represent,
        Command::Signal,
        Command::Oracle,
        Command::Suite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Project => "project",
            Command::Snell => "snell",
            Command::Decompose => "decompose",
            Command::Stop => "stop",
            Command::Represent => "represent",
            Command::Signal => "signal",
            Command::Oracle => "oracle",
            Command::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Table,
    Machine,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub process: Option<String>,
    pub ell_grid: Option<Vec<Q>>,
    pub format: Format,
    pub limit: u128,
    /// Seed for the sampled starting times of the relaxation check.
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            process: None,
            ell_grid: None,
            format: Format::Table,
            limit: ENUMERATION_LIMIT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ValidationFailure,
    PropertyFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::ValidationFailure => 1,
            Status::PropertyFailure => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Fields(Vec<(String, String)>),
    /// Path rows over the instants, terminal last.
    Process(Vec<(String, Vec<String>)>),
    Table { header: Vec<String>, rows: Vec<Vec<String>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub title: String,
    pub block: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Command,
    pub status: Status,
    pub sections: Vec<Section>,
}

fn q(v: &Q) -> String {
    format_rational(v)
}

fn yes(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

fn fields(title: &str, kv: Vec<(&str, String)>) -> Section {
    Section {
        title: title.to_string(),
        block: Block::Fields(kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
    }
}

fn process_section(space: &MeyerSpace, title: &str, z: &LatticeProcess) -> Section {
    let rows = (0..space.n_paths())
        .map(|p| {
            let mut r: Vec<String> = z.path_row(p).iter().map(q).collect();
            r.push(q(z.value(p, Instant::Terminal)));
            (space.path_id(p).to_string(), r)
        })
        .collect();
    Section {
        title: title.to_string(),
        block: Block::Process(rows),
    }
}

fn time_string(space: &MeyerSpace, t: &RandomInstant) -> String {
    (0..space.n_paths())
        .map(|p| format!("{}:{}", space.path_id(p), t.at(p)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn quad_string(space: &MeyerSpace, d: &DividedQuadruple) -> String {
    let s = d.to_string();
    let inner = s.trim_start_matches('[').trim_end_matches(']');
    inner
        .split(' ')
        .enumerate()
        .map(|(p, v)| format!("{}:{v}", space.path_id(p)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn instant_header(space: &MeyerSpace) -> Vec<String> {
    let mut h = vec!["path".to_string()];
    h.extend(space.instants().iter().map(|u| u.to_string()));
    h.push(Instant::Terminal.to_string());
    h
}

impl Report {
    pub fn render(&self, space: Option<&MeyerSpace>, format: Format) -> String {
        match format {
            Format::Table => self.render_table(space),
            Format::Machine => {
                let mut s = serde_json::to_string_pretty(&self.to_value()).expect("json");
                s.push('\n');
                s
            }
        }
    }

    fn render_table(&self, space: Option<&MeyerSpace>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}: {}", self.command.name(), status_name(self.status));
        for s in &self.sections {
            let _ = writeln!(out, "\n[{}]", s.title);
            match &s.block {
                Block::Fields(kv) => {
                    let w = kv.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                    for (k, v) in kv {
                        let _ = writeln!(out, "{k:<w$}  {v}");
                    }
                }
                Block::Process(rows) => {
                    let header = match space {
                        Some(sp) => instant_header(sp),
                        None => Vec::new(),
                    };
                    let body: Vec<Vec<String>> = rows
                        .iter()
                        .map(|(id, r)| std::iter::once(id.clone()).chain(r.iter().cloned()).collect())
                        .collect();
                    write_grid(&mut out, &header, &body);
                }
                Block::Table { header, rows } => write_grid(&mut out, header, rows),
            }
        }
        out
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), Value::String(self.command.name().into()));
        m.insert("status".into(), Value::String(status_name(self.status).into()));
        let mut secs = Map::new();
        for s in &self.sections {
            let v = match &s.block {
                Block::Fields(kv) => {
                    Value::Object(kv.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
                }
                Block::Process(rows) => Value::Object(
                    rows.iter()
                        .map(|(id, r)| (id.clone(), Value::Array(r.iter().cloned().map(Value::String).collect())))
                        .collect(),
                ),
                Block::Table { header, rows } => Value::Array(
                    rows.iter()
                        .map(|r| {
                            Value::Object(
                                header
                                    .iter()
                                    .zip(r)
                                    .map(|(h, c)| (h.clone(), Value::String(c.clone())))
                                    .collect(),
                            )
                        })
                        .collect(),
                ),
            };
            secs.insert(s.title.clone(), v);
        }
        m.insert("sections".into(), Value::Object(secs));
        Value::Object(m)
    }
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::ValidationFailure => "validation failure",
        Status::PropertyFailure => "property failure",
    }
}

fn write_grid(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let cols = header.len().max(rows.iter().map(Vec::len).max().unwrap_or(0));
    let mut w = vec![0; cols];
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (i, c) in r.iter().enumerate() {
            w[i] = w[i].max(c.chars().count());
        }
    }
    let line = |r: &[String]| {
        let cells: Vec<String> = r.iter().enumerate().map(|(i, c)| format!("{c:<width$}", width = w[i])).collect();
        cells.join("  ").trim_end().to_string()
    };
    if !header.is_empty() {
        let _ = writeln!(out, "{}", line(header));
    }
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
}

struct Ctx<'a> {
    scenario: &'a Scenario,
    space: MeyerSpace,
    opts: &'a Options,
}

impl Ctx<'_> {
    fn reward(&self) -> Result<(String, LatticeProcess)> {
        let name = match &self.opts.process {
            Some(p) => p.clone(),
            None => self.scenario.default_process()?,
        };
        let z = self.scenario.process(&name)?;
        Ok((name, z))
    }

    fn problem(&self) -> Result<RepresentationProblem> {
        self.scenario
            .representation(&self.space)?
            .ok_or_else(|| Error::Scenario("scenario has no representation bundle (g, mu and a signal or reward)".into()))
    }

    fn grid(&self) -> Vec<Q> {
        self.opts.ell_grid.clone().unwrap_or_else(|| self.scenario.ell_grid.clone())
    }
}

/// Runs `cmd`; module errors come back with the command name attached.
pub fn run_command(scenario: &Scenario, cmd: Command, opts: &Options) -> Result<Report> {
    let space = scenario.space()?;
    let ctx = Ctx { scenario, space, opts };
    let out = match cmd {
        Command::Validate => validate(&ctx),
        Command::Project => projections(&ctx),
        Command::Snell => snell(&ctx),
        Command::Decompose => decompose(&ctx),
        Command::Stop => stop(&ctx),
        Command::Represent => represent(&ctx),
        Command::Signal => signal(&ctx),
        Command::Oracle => oracle(&ctx),
        Command::Suite => suite(&ctx),
    };
    out.map_err(|e| Error::Scenario(format!("{}: {e}", cmd.name())))
}

fn report(cmd: Command, status: Status, sections: Vec<Section>) -> Result<Report> {
    Ok(Report {
        command: cmd,
        status,
        sections,
    })
}

fn validate(c: &Ctx) -> Result<Report> {
    let s = &c.space;
    let total: Q = s.probabilities().iter().sum();
    let mut sections = vec![fields(
        "lattice",
        vec![
            ("epochs", s.horizon().to_string()),
            ("paths", s.n_paths().to_string()),
            ("probability total", q(&total)),
            ("optional structure", yes(is_optional_structure(s))),
        ],
    )];
    let mut rows = Vec::new();
    for name in c.scenario.processes.keys() {
        let z = c.scenario.process(name)?;
        rows.push(vec![
            name.clone(),
            yes(s.is_measurable(&z, FieldKind::Lambda)),
            yes(z.first_negative().is_none()),
        ]);
    }
    sections.push(Section {
        title: "processes".into(),
        block: Block::Table {
            header: vec!["name".into(), "lambda-measurable".into(), "nonnegative".into()],
            rows,
        },
    });
    let g_ok = c.scenario.g_family(s).map(|g| g.is_some());
    let mu_ok = c.scenario.measure(s).map(|m| m.is_some());
    let show = |r: &Result<bool>| match r {
        Ok(true) => "valid".to_string(),
        Ok(false) => "absent".to_string(),
        Err(e) => format!("invalid: {e}"),
    };
    let bundle_status = if g_ok.is_err() || mu_ok.is_err() {
        Status::ValidationFailure
    } else {
        Status::Ok
    };
    sections.push(fields("representation", vec![("g", show(&g_ok)), ("mu", show(&mu_ok))]));
    report(Command::Validate, bundle_status, sections)
}

fn projections(c: &Ctx) -> Result<Report> {
    let s = &c.space;
    let (name, z) = c.reward()?;
    let mut sections = vec![fields("process", vec![("name", name)])];
    for (t, k) in [
        ("lambda projection", FieldKind::Lambda),
        ("optional projection", FieldKind::Optional),
        ("predictable projection", FieldKind::Predictable),
    ] {
        sections.push(process_section(s, t, &project(s, &z, k)));
    }
    sections.push(process_section(s, "right envelope", &envelope(s, &z, Side::Right, Mode::Sup)));
    sections.push(process_section(s, "left envelope", &envelope(s, &z, Side::Left, Mode::Sup)));
    let verdict = |v: Result<crate::projection::UscVerdict>| match v {
        Ok(v) if v.holds => "yes".to_string(),
        Ok(v) => match v.witness {
            Some((p, u)) => format!("no (path {}, {u})", s.path_id(p)),
            None => "no".to_string(),
        },
        Err(e) => format!("n/a: {e}"),
    };
    sections.push(fields(
        "semicontinuity",
        vec![
            ("right-usc in expectation", verdict(is_right_usc_in_expectation(s, &z))),
            ("left-usc in expectation", verdict(is_left_usc_in_expectation(s, &z))),
        ],
    ));
    report(Command::Project, Status::Ok, sections)
}

fn snell(c: &Ctx) -> Result<Report> {
    let s = &c.space;
    let (name, z) = c.reward()?;
    let zbar = snell_envelope(s, &z)?;
    let value = root_value(s, &zbar);
    let bf = snell_brute_force(s, &z, c.opts.limit)?;
    let status = if bf.value == value { Status::Ok } else { Status::PropertyFailure };
    report(
        Command::Snell,
        status,
        vec![
            fields("process", vec![("name", name)]),
            process_section(s, "envelope", &zbar),
            fields(
                "value",
                vec![
                    ("root value", q(&value)),
                    ("brute force value", q(&bf.value)),
                    ("stopping times enumerated", bf.candidates.to_string()),
                    ("optimal stopping times", bf.optimizers.len().to_string()),
                    ("match", yes(bf.value == value)),
                ],
            ),
        ],
    )
}

/// Every decomposition identity, as (name, holds) pairs.
fn decomposition_checks(s: &MeyerSpace, z: &LatticeProcess, zbar: &LatticeProcess, d: &MertensDecomposition) -> Vec<(&'static str, bool)> {
    let n = s.n_paths();
    let pz = project(s, zbar, FieldKind::Predictable);
    let left_z = envelope(s, z, Side::Left, Mode::Sup);
    let mut jump_a = true;
    let mut jump_b = true;
    let mut support_a = true;
    let mut support_b = true;
    let mut max_right = true;
    let mut max_left = true;
    let mut reconstruct = true;
    for k in 0..=s.horizon() {
        let at = Instant::At(k);
        let cont = s.conditional_expectation(zbar.slice(Instant::Int(k)), s.meyer_field(k));
        for p in 0..n {
            let da = match s.predecessor(at) {
                Some(prev) => d.a.value(p, at) - d.a.value(p, prev),
                None => d.a.value(p, at).clone(),
            };
            let db = match s.predecessor(at) {
                Some(prev) => d.b.value(p, at) - d.b.value(p, prev),
                None => d.b.value(p, at).clone(),
            };
            let zminus = if k == 0 { zbar.value(p, at).clone() } else { zbar.value(p, Instant::Int(k - 1)).clone() };
            if k >= 1 {
                jump_a &= da == &zminus - pz.value(p, at);
                support_a &= !da.is_positive() || &zminus == left_z.value(p, at);
                let m = pz.value(p, at).max(left_z.value(p, at));
                max_left &= &zminus == m;
            } else {
                jump_a &= da.is_zero();
            }
            jump_b &= db == zbar.value(p, at) - &cont[p];
            support_b &= !db.is_positive() || zbar.value(p, at) == z.value(p, at);
            max_right &= *zbar.value(p, at) == cont[p].clone().max(z.value(p, at).clone());
        }
    }
    for u in s.instants() {
        for p in 0..n {
            reconstruct &= d.m.value(p, u) == &(zbar.value(p, u) + d.a.value(p, u) + d.b_shifted(s, p, u));
        }
    }
    let nondecreasing = |x: &LatticeProcess| {
        (0..n).all(|p| {
            let mut prev = Q::zero();
            s.instants_with_terminal().into_iter().all(|u| {
                let ok = x.value(p, u) >= &prev;
                prev = x.value(p, u).clone();
                ok
            })
        })
    };
    vec![
        ("M is a Lambda-martingale", is_lambda_martingale(s, &d.m).unwrap_or(false)),
        ("Zbar = M - A - B_-", reconstruct),
        ("A predictable", s.is_measurable(&d.a, FieldKind::Predictable)),
        ("A nondecreasing from 0", nondecreasing(&d.a) && (0..n).all(|p| d.a.value(p, Instant::At(0)).is_zero())),
        ("B Lambda-measurable", s.is_measurable(&d.b, FieldKind::Lambda)),
        ("B nondecreasing", nondecreasing(&d.b)),
        ("dA = Zbar_- - pZbar", jump_a),
        ("dB = Zbar - Lambda(Zbar_+)", jump_b),
        ("{dA > 0} in {Zbar_- = *Z}", support_a),
        ("{dB > 0} in {Zbar = Z}", support_b),
        ("Zbar = Lambda(Zbar_+) max Z", max_right),
        ("Zbar_- = pZbar max *Z", max_left),
    ]
}

fn decompose(c: &Ctx) -> Result<Report> {
    let s = &c.space;
    let (name, z) = c.reward()?;
    let zbar = snell_envelope(s, &z)?;
    let d = mertens_decompose(s, &zbar)?;
    let checks = decomposition_checks(s, &z, &zbar, &d);
    let status = if checks.iter().all(|(_, ok)| *ok) { Status::Ok } else { Status::PropertyFailure };
    report(
        Command::Decompose,
        status,
        vec![
            fields("process", vec![("name", name)]),
            process_section(s, "envelope", &zbar),
            process_section(s, "M", &d.m),
            process_section(s, "A", &d.a),
            process_section(s, "B", &d.b),
            fields("identities", checks.into_iter().map(|(k, v)| (k, yes(v))).collect()),
        ],
    )
}

fn stop(c: &Ctx) -> Result<Report> {
    let s = &c.space;
    let (name, z) = c.reward()?;
    let zbar = snell_envelope(s, &z)?;
    let s0 = s.constant_time(Instant::At(0));
    let root = root_value(s, &zbar);
    let delta = delta_stop(s, &z, &s0)?;
    let sigma = sigma_stop(s, &z, &s0)?;
    let vd = s.expectation(&z.at_time(&delta.instant));
    let vs = s.expectation(&z.at_time(&sigma.instant));
    let lam = lambda_threshold(&z, &zbar);
    let mut ok = vd == root && vs == root;
    let mut sections = vec![
        fields("process", vec![("name", name), ("root value", q(&root))]),
        fields(
            "delta_0",
            vec![
                ("instant", time_string(s, &delta.instant)),
                ("quadruple", quad_string(s, &delta.quadruple)),
                ("value", q(&vd)),
                ("lambda threshold", q(&lam)),
            ],
        ),
        fields(
            "sigma_0",
            vec![
                ("growth time", time_string(s, &sigma.growth)),
                ("instant", time_string(s, &sigma.instant)),
                ("quadruple", quad_string(s, &sigma.quadruple)),
                ("value", q(&vs)),
            ],
        ),
    ];
    match smallest_largest_optimal(s, &z, c.opts.limit) {
        Ok(b) => {
            ok &= b.smallest_certified && b.largest_certified;
            sections.push(fields(
                "optimal bounds",
                vec![
                    ("smallest", time_string(s, &b.smallest)),
                    ("largest", time_string(s, &b.largest)),
                    ("certified", yes(b.smallest_certified && b.largest_certified)),
                    ("optimal stopping times", b.all_optimal.len().to_string()),
                ],
            ))
        }
        Err(Error::Precondition(msg)) => sections.push(fields("optimal bounds", vec![("skipped", msg)])),
        Err(e) => return Err(e),
    }
    report(Command::Stop, if ok { Status::Ok } else { Status::PropertyFailure }, sections)
}

fn represent(c: &Ctx) -> Result<Report> {
    let s = &c.space;
    let problem = c.problem()?;
    let (l, x, from) = match &problem.given {
        Given::Signal(l) => (l.clone(), forward_evaluate(s, &problem.g, &problem.mu, l)?, "signal"),
        Given::Reward(x) => (solve_representation(s, &problem.g, &problem.mu, x, c.opts.limit)?, x.clone(), "reward"),
    };
    let solved = solve_representation(s, &problem.g, &problem.mu, &x, c.opts.limit)?;
    let back = forward_evaluate(s, &problem.g, &problem.mu, &solved)?;
    let (ok, gap) = match problem.g.kind {
        GKind::Affine => (back == x, if back == x { "0".to_string() } else { "nonzero".to_string() }),
        GKind::Monotone { .. } => {
            let g = max_abs_gap(s, &back, &x);
            (g <= MONOTONE_CHECK_TOLERANCE, format!("{g:.3e}"))
        }
    };
    report(
        Command::Represent,
        if ok { Status::Ok } else { Status::PropertyFailure },
        vec![
            fields("input", vec![("given", from.to_string())]),
            process_section(s, "L", &l),
            process_section(s, "X", &x),
            process_section(s, "solved L", &solved),
            fields("round trip", vec![("forward(solve(X)) = X", yes(ok)), ("gap", gap)]),
        ],
    )
}

fn signal(c: &Ctx) -> Result<Report> {
    let s = &c.space;
    let problem = c.problem()?;
    let grid = c.grid();
    let r = universal_signal_check(s, &problem, &grid, Preconditions::Report, c.opts.limit)?;
    let verdict = |v: &Option<crate::projection::UscVerdict>| match v {
        Some(v) => yes(v.holds),
        None => "n/a".to_string(),
    };
    let rows = r
        .rows
        .iter()
        .map(|row| {
            vec![
                q(&row.ell),
                q(&row.value_1),
                q(&row.value_2),
                q(&row.maximum),
                row.optimizers.len().to_string(),
                yes(row.ok()),
            ]
        })
        .collect();
    let passages = r
        .rows
        .iter()
        .map(|row| vec![q(&row.ell), quad_string(s, &row.tau_1), quad_string(s, &row.tau_2)])
        .collect();
    report(
        Command::Signal,
        if r.all_optimal() { Status::Ok } else { Status::PropertyFailure },
        vec![
            fields(
                "reward",
                vec![
                    ("left-usc in expectation", verdict(&r.left_usc)),
                    ("right-usc in expectation", verdict(&r.right_usc)),
                    ("divided stopping times", r.candidates.to_string()),
                ],
            ),
            Section {
                title: "levels".into(),
                block: Block::Table {
                    header: ["level", "value tau1", "value tau2", "brute force", "optimizers", "optimal"]
                        .map(String::from)
                        .to_vec(),
                    rows,
                },
            },
            Section {
                title: "level passages".into(),
                block: Block::Table {
                    header: ["level", "tau1", "tau2"].map(String::from).to_vec(),
                    rows: passages,
                },
            },
        ],
    )
}

fn oracle(c: &Ctx) -> Result<Report> {
    let s = &c.space;
    let (name, z) = c.reward()?;
    let bf = snell_brute_force(s, &z, c.opts.limit)?;
    let quads = enumerate_divided_stops(s, None, c.opts.limit)?;
    let table = ScaledTable::new(s, &z);
    let forms: Vec<RandomInstant> = quads.iter().map(|d| instant_form(s, d)).collect();
    let (dmax, _) = crate::enumerate::argmax_scaled(&table, &forms);
    let zbar = snell_envelope(s, &z)?;
    let root = root_value(s, &zbar);
    let ok = bf.value == root && dmax == root;
    let rows = bf.optimizers.iter().map(|t| vec![time_string(s, t)]).collect();
    report(
        Command::Oracle,
        if ok { Status::Ok } else { Status::PropertyFailure },
        vec![
            fields(
                "values",
                vec![
                    ("process", name),
                    ("lambda stopping times", bf.candidates.to_string()),
                    ("brute force value", q(&bf.value)),
                    ("divided stopping times", quads.len().to_string()),
                    ("divided maximum", q(&dmax)),
                    ("envelope root value", q(&root)),
                    ("agree", yes(ok)),
                ],
            ),
            Section {
                title: "optimizers".into(),
                block: Block::Table {
                    header: vec!["stopping time".into()],
                    rows,
                },
            },
        ],
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Outcome {
    Pass,
    Fail(String),
    Skip(String),
}

fn outcome(r: Result<bool>, why: &str) -> Outcome {
    match r {
        Ok(true) => Outcome::Pass,
        Ok(false) => Outcome::Fail(why.to_string()),
        Err(Error::TooLarge { count, limit }) => Outcome::Skip(format!("{count} candidates exceed limit {limit}")),
        Err(e) => Outcome::Fail(e.to_string()),
    }
}

/// Up to `k` distinct indices below `len`, deterministic in `seed`.
pub fn sample_indices(len: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<usize> = Vec::new();
    let mut tries = 0;
    while out.len() < k.min(len) && tries < 64 * k.max(1) {
        let i = rng.random_range(0..len);
        if !out.contains(&i) {
            out.push(i);
        }
        tries += 1;
    }
    out
}

struct Checker<'a> {
    s: &'a MeyerSpace,
    z: &'a LatticeProcess,
    zbar: &'a LatticeProcess,
    limit: u128,
    seed: u64,
}

impl Checker<'_> {
    fn lambda_times(&self, from: Option<&RandomInstant>) -> Result<Vec<RandomInstant>> {
        enumerate_stopping_times(self.s, FieldKind::Lambda, from, self.limit)
    }

    fn tower(&self) -> Result<bool> {
        let s = self.s;
        let z = self.z;
        Ok((0..=s.horizon()).all(|k| {
            let at = z.slice(Instant::At(k)).to_vec();
            let f = s.conditional_expectation(&at, s.filtration(k));
            s.conditional_expectation(&f, s.meyer_field(k)) == s.conditional_expectation(&at, s.meyer_field(k))
        }))
    }

    fn left_field_identity(&self) -> Result<bool> {
        let s = self.s;
        Ok((0..s.horizon()).all(|k| {
            s.field(Instant::At(k + 1), FieldKind::Predictable) == s.filtration(k)
                && s.field(Instant::Int(k), FieldKind::Lambda) == s.filtration(k)
        }))
    }

    fn section_and_restrict(&self) -> Result<bool> {
        let s = self.s;
        let times = self.lambda_times(None)?;
        let mut ok = true;
        for i in sample_indices(times.len(), 8, self.seed) {
            let t = &times[i];
            let graph = crate::lattice::InstantSet::graph(s, t);
            ok &= s.section_witness(&graph)? == *t;
            let part = s.field_at_time(t, FieldKind::Lambda);
            for a in 0..part.len() {
                let h = part.atom_set(a);
                ok &= s.is_lambda_stopping_time(&t.restrict(&h));
            }
        }
        Ok(ok)
    }

    fn projection_laws(&self) -> Result<bool> {
        let s = self.s;
        let z = self.z;
        let lam = project(s, z, FieldKind::Lambda);
        let pred = project(s, z, FieldKind::Predictable);
        let ok_tower = project(s, &lam, FieldKind::Predictable) == pred
            && project(s, &project(s, z, FieldKind::Optional), FieldKind::Lambda) == lam;
        let one = LatticeProcess::from_fn(s, |_, _| int(1));
        let ok_norm = project(s, &one, FieldKind::Lambda) == one;
        let mut a = LatticeProcess::zeros_on(s);
        for p in 0..s.n_paths() {
            let mut acc = Q::zero();
            for u in s.instants() {
                acc += z.value(p, u);
                a.set(p, u, acc.clone());
            }
        }
        // a raw process: Z weighted by path index
        let raw = LatticeProcess::from_fn(s, |p, u| z.value(p, u) * int(p as i64 + 1));
        let lraw = project(s, &raw, FieldKind::Lambda);
        let ok_dual = increasing_pairing(s, &raw, &a) == increasing_pairing(s, &lraw, &a);
        Ok(ok_tower && ok_norm && ok_dual)
    }

    fn fatou(&self) -> Result<bool> {
        let raw = LatticeProcess::from_fn(self.s, |p, u| self.z.value(p, u) * int(p as i64 + 1));
        Ok(check_projection_fatou(self.s, self.z)?.passed() && check_projection_fatou(self.s, &raw)?.passed())
    }

    fn usc_equivalence(&self) -> Result<bool> {
        Ok(check_usc_sequence_equivalence(self.s, self.z)?.agrees())
    }

    fn oracle(&self) -> Result<bool> {
        Ok(snell_brute_force(self.s, self.z, self.limit)?.value == root_value(self.s, self.zbar))
    }

    fn dominance(&self) -> Result<bool> {
        let s = self.s;
        let d = mertens_decompose(s, self.zbar)?;
        let shifted = self.zbar.map(|v| v + int(1)).with_terminal(vec![Q::zero(); s.n_paths()]);
        let mut ok = self.zbar.dominates(self.z) && is_lambda_supermartingale(s, self.zbar)?;
        for y in [&d.m, &shifted] {
            if is_lambda_supermartingale(s, y)? && y.dominates(self.z) {
                ok &= y.dominates(self.zbar);
            }
        }
        Ok(ok)
    }

    fn supermartingale_pairs(&self) -> Result<bool> {
        // Y_S >= E[Y_T | F_S] for S <= T, against the one-step definition
        let s = self.s;
        let times = self.lambda_times(None)?;
        if times.len() > 400 {
            return Err(Error::TooLarge {
                count: times.len() as u128,
                limit: 400,
            });
        }
        let one_step = is_lambda_supermartingale(s, self.z)?;
        let mut pairs = true;
        for a in &times {
            let f = s.field_at_time(a, FieldKind::Lambda);
            let za = self.z.at_time(a);
            for b in times.iter().filter(|b| a.le(b)) {
                let cond = s.conditional_expectation(&self.z.at_time(b), &f);
                pairs &= (0..s.n_paths()).all(|p| za[p] >= cond[p]);
            }
        }
        Ok(one_step == pairs)
    }

    fn relaxation(&self) -> Result<bool> {
        let s = self.s;
        let times = self.lambda_times(None)?;
        let mut starts = vec![s.constant_time(Instant::At(0))];
        starts.extend(sample_indices(times.len(), 3, self.seed).into_iter().map(|i| times[i].clone()));
        for st in &starts {
            let lhs = s.expectation(&self.zbar.at_time(st));
            let d = delta_stop(s, self.z, st)?;
            let vd = s.expectation(&self.z.at_time(&d.instant));
            let quads = enumerate_divided_stops(s, Some(st), self.limit)?;
            let best = quads
                .iter()
                .map(|q| s.expectation(&divided_value(s, self.z, q)))
                .max()
                .unwrap_or_else(Q::zero);
            let bf = snell_brute_force_from(s, self.z, Some(st), self.limit)?;
            if lhs != vd || lhs != best || lhs != bf.value {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn sigma(&self) -> Result<bool> {
        let s = self.s;
        let st = sigma_stop(s, self.z, &s.constant_time(Instant::At(0)))?;
        let eq = self.z.at_time(&st.instant) == self.zbar.at_time(&st.instant);
        let v = s.expectation(&self.z.at_time(&st.instant)) == root_value(s, self.zbar);
        Ok(eq && v && st.k_plus.is_empty())
    }

    fn certificate(&self) -> Result<bool> {
        let s = self.s;
        let bf = snell_brute_force(s, self.z, self.limit)?;
        let times = self.lambda_times(None)?;
        let flags = crate::par::map(&times, |t| check_optimality_with(s, self.z, self.zbar, t).map(|c| c.optimal));
        let mut ok = true;
        for (t, f) in times.iter().zip(flags) {
            ok &= f? == bf.optimizers.contains(t);
        }
        Ok(ok)
    }

    fn entry_stabilization(&self) -> Result<bool> {
        let s = self.s;
        let s0 = s.constant_time(Instant::At(0));
        let d = delta_stop(s, self.z, &s0)?;
        let star = lambda_threshold(self.z, self.zbar);
        let lam = (&star + int(1)) / int(2);
        if lam.is_zero() || lam >= int(1) {
            return Ok(true);
        }
        Ok(lambda_entry_time(s, self.z, self.zbar, &lam, &s0)? == d.instant)
    }

    fn usc_both(&self) -> bool {
        matches!(is_right_usc_in_expectation(self.s, self.z), Ok(v) if v.holds)
            && matches!(is_left_usc_in_expectation(self.s, self.z), Ok(v) if v.holds)
    }

    fn sandwich(&self) -> Result<Option<bool>> {
        let s = self.s;
        if !is_optional_structure(s) || !self.usc_both() {
            return Ok(None);
        }
        let s0 = s.constant_time(Instant::At(0));
        let d = delta_stop(s, self.z, &s0)?;
        let st = sigma_stop(s, self.z, &s0)?;
        let b = smallest_largest_optimal(s, self.z, self.limit)?;
        let ok = b.smallest == d.instant
            && b.largest == st.instant
            && b.smallest_certified
            && b.largest_certified
            && b.all_optimal.iter().all(|u| d.instant.le(u) && u.le(&st.instant));
        Ok(Some(ok))
    }

    fn h_sets(&self) -> Result<Option<bool>> {
        let s = self.s;
        if !matches!(is_left_usc_in_expectation(s, self.z), Ok(v) if v.holds) {
            return Ok(None);
        }
        let d = delta_stop(s, self.z, &s.constant_time(Instant::At(0)))?;
        Ok(Some(
            d.quadruple.w_minus.is_empty() && self.z.at_time(&d.instant) == self.zbar.at_time(&d.instant),
        ))
    }
}

fn representation_checks(s: &MeyerSpace, problem: &RepresentationProblem, grid: &[Q], limit: u128) -> Vec<(&'static str, Outcome)> {
    let mut out = Vec::new();
    let x = match problem.reward(s) {
        Ok(x) => x,
        Err(e) => return vec![("representation.forward_total", Outcome::Fail(e.to_string()))],
    };
    out.push(("representation.forward_total", Outcome::Pass));
    let solved = solve_representation(s, &problem.g, &problem.mu, &x, limit);
    let round = solved.and_then(|l| {
        forward_evaluate(s, &problem.g, &problem.mu, &l).map(|back| match problem.g.kind {
            GKind::Affine => back == x,
            GKind::Monotone { .. } => max_abs_gap(s, &back, &x) <= MONOTONE_CHECK_TOLERANCE,
        })
    });
    out.push(("representation.round_trip", outcome(round, "forward(solve(X)) differs from X")));
    out.push((
        "representation.right_usc_implication",
        outcome(is_right_usc_in_expectation(s, &x).map(|v| v.holds), "representable X is not right-USC"),
    ));
    let l = match problem.signal(s, limit) {
        Ok(l) => l,
        Err(e) => {
            out.push(("representation.universal_signal", Outcome::Fail(e.to_string())));
            return out;
        }
    };
    let exact = problem.g.kind == GKind::Affine;
    let sig = universal_signal_check(s, problem, grid, Preconditions::Report, limit);
    let sig_ok = match &sig {
        Ok(r) => Ok(r.all_optimal()),
        Err(e) => Err(e.clone()),
    };
    out.push((
        "representation.universal_signal",
        if exact {
            outcome(sig_ok, "level passage below the brute-force maximum")
        } else {
            Outcome::Skip("monotone g: bisection roots are not exact".into())
        },
    ));
    let mut mono = true;
    for w in grid.windows(2) {
        let (a, b) = if w[0] <= w[1] { (&w[0], &w[1]) } else { (&w[1], &w[0]) };
        for v in [1, 2] {
            match (level_passage(s, &l, a, v), level_passage(s, &l, b, v)) {
                (Ok(ta), Ok(tb)) => mono &= ta.instant.le(&tb.instant),
                _ => mono = false,
            }
        }
    }
    for e in grid {
        if let (Ok(t1), Ok(t2)) = (level_passage(s, &l, e, 1), level_passage(s, &l, e, 2)) {
            mono &= t1.instant.le(&t2.instant) && t1.quadruple.w_minus.is_empty();
        }
    }
    out.push(("representation.level_monotonicity", if mono { Outcome::Pass } else { Outcome::Fail("tau_l not monotone in l".into()) }));
    if exact && grid.len() >= 3 {
        let affine = (|| -> Result<bool> {
            let t = level_passage(s, &l, &grid[grid.len() / 2], 1)?.instant;
            let v: Vec<Q> = grid
                .iter()
                .map(|e| stopping_value(s, &problem.g, &problem.mu, &x, e, Stop::Instant(&t)))
                .collect::<Result<_>>()?;
            if grid[1] == grid[0] {
                return Ok(true);
            }
            let slope = (&v[1] - &v[0]) / (&grid[1] - &grid[0]);
            let fixed = (2..grid.len()).all(|i| &v[i] - &v[0] == &slope * (&grid[i] - &grid[0]));
            // the pointwise maximum over fixed policies is convex
            let convex = match &sig {
                Ok(r) => r.rows.windows(3).all(|w| {
                    let (x0, x1, x2) = (&w[0].ell, &w[1].ell, &w[2].ell);
                    if !(x0 < x1 && x1 < x2) {
                        return true;
                    }
                    let t = (x1 - x0) / (x2 - x0);
                    w[1].maximum <= &w[0].maximum * (int(1) - &t) + &w[2].maximum * &t
                }),
                Err(_) => false,
            };
            Ok(fixed && convex)
        })();
        out.push(("representation.level_convexity", outcome(affine, "value in the level is not piecewise affine convex")));
    }
    out
}

fn suite(c: &Ctx) -> Result<Report> {
    let s = &c.space;
    let (name, z) = c.reward()?;
    let zbar = snell_envelope(s, &z)?;
    let ch = Checker {
        s,
        z: &z,
        zbar: &zbar,
        limit: c.opts.limit,
        seed: c.opts.seed,
    };
    let opt = |r: Result<Option<bool>>, why: &str| match r {
        Ok(None) => Outcome::Skip("preconditions not met".into()),
        Ok(Some(b)) => outcome(Ok(b), why),
        Err(e) => outcome(Err(e), why),
    };
    let mut rows: Vec<(&'static str, Outcome)> = vec![
        ("lattice.valid", Outcome::Pass),
        ("lattice.tower", outcome(ch.tower(), "conditional expectations do not compose")),
        ("lattice.left_field_identity", outcome(ch.left_field_identity(), "F_k differs from the left field")),
        ("lattice.section_and_restrict", outcome(ch.section_and_restrict(), "section or restriction lost the stopping property")),
        ("projection.laws", outcome(ch.projection_laws(), "tower, duality or normalization fails")),
        ("projection.fatou", outcome(ch.fatou(), "Fatou chain fails")),
        ("projection.usc_equivalence", outcome(ch.usc_equivalence(), "predicate and sequence definitions disagree")),
        ("snell.oracle", outcome(ch.oracle(), "envelope value differs from brute force")),
        ("snell.minimal_dominance", outcome(ch.dominance(), "envelope is not the least dominating supermartingale")),
        ("snell.supermartingale_pairs", outcome(ch.supermartingale_pairs(), "one-step and pairwise definitions disagree")),
        ("snell.relaxation", outcome(ch.relaxation(), "divided maximum differs from the envelope")),
        ("snell.sigma", outcome(ch.sigma(), "sigma_0 is not optimal")),
        ("snell.certificate", outcome(ch.certificate(), "certificate disagrees with brute force")),
        ("snell.entry_stabilization", outcome(ch.entry_stabilization(), "entry time does not stabilize")),
        ("snell.sandwich", opt(ch.sandwich(), "optimal time outside [delta_0, sigma_0]")),
        ("snell.h_sets", opt(ch.h_sets(), "delta_0 leaves Zbar > Z")),
    ];
    let decomp = mertens_decompose(s, &zbar).map(|d| decomposition_checks(s, &z, &zbar, &d));
    match decomp {
        Ok(checks) => {
            let bad: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
            rows.insert(
                10,
                (
                    "snell.decomposition",
                    if bad.is_empty() { Outcome::Pass } else { Outcome::Fail(bad.join(", ")) },
                ),
            );
        }
        Err(e) => rows.insert(10, ("snell.decomposition", Outcome::Fail(e.to_string()))),
    }
    if let Some(problem) = c.scenario.representation(s)? {
        rows.extend(representation_checks(s, &problem, &c.grid(), c.opts.limit));
    }
    let failed = rows.iter().any(|(_, o)| matches!(o, Outcome::Fail(_)));
    let table = rows
        .into_iter()
        .map(|(n, o)| {
            let (r, d) = match o {
                Outcome::Pass => ("pass", String::new()),
                Outcome::Fail(d) => ("fail", d),
                Outcome::Skip(d) => ("skip", d),
            };
            vec![n.to_string(), r.to_string(), d]
        })
        .collect();
    report(
        Command::Suite,
        if failed { Status::PropertyFailure } else { Status::Ok },
        vec![
            fields("process", vec![("name", name)]),
            Section {
                title: "properties".into(),
                block: Block::Table {
                    header: vec!["property".into(), "result".into(), "detail".into()],
                    rows: table,
                },
            },
        ],
    )
}
