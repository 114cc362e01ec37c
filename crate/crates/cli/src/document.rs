//! Sectioned model files.
//!
//! ```text
//! [space]            n, coordinates, parameters, assume.<name>
//! [g] / [h]          g.i.j (1-based, missing entries are zero)
//! [potentials]       V0, V1
//! [model]            order, fixed_lapse
//! [candidate NAME]   xi.k, eta.k (';'-separated) or eta.k.<coord>, omega.k, f.k, integral.k
//! [simulate]         gauge, x0, xdot0, pivot, sign, t0, t1, step, precision,
//!                    epsilon, tolerance, monitor, param.<name>, function.<f(args)>
//! ```
//!
//! `#` starts a comment. Values are symcore expressions unless noted.

use std::collections::BTreeMap;
use std::fmt;

use noether_core::symcore::{normalize, parse, parse_free, Assumptions, Rational, SymError};
use noether_core::{CandidateSymmetry, Error, Expr, GeneratorTerms, MetricTable, Model, VariableSpace};

/// A diagnostic pinned to the offending text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub token: String,
    pub message: String,
}

impl Diagnostic {
    fn new(line: usize, column: usize, token: &str, message: impl Into<String>) -> Self {
        Diagnostic { line, column, token: token.to_string(), message: message.into() }
    }

    fn at(src: &Src, message: impl Into<String>) -> Self {
        Diagnostic::new(src.line, src.column, &src.text, message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {} (at `{}`)", self.line, self.column, self.message, self.token)
    }
}

impl std::error::Error for Diagnostic {}

/// A value with the position it was read from. Equality ignores position.
#[derive(Clone, Debug, Default)]
pub struct Src {
    pub text: String,
    pub line: usize,
    pub column: usize,
}

impl Src {
    pub fn new(text: &str) -> Self {
        Src { text: collapse(text), line: 0, column: 0 }
    }
}

/// A 1-based source line that never takes part in equality.
#[derive(Clone, Copy, Debug, Default)]
pub struct Position(pub usize);

impl PartialEq for Position {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl PartialEq for Src {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpaceSpec {
    pub n: usize,
    pub coordinates: Vec<String>,
    pub parameters: Vec<String>,
    /// `assume.<name> = positive | nonzero | != q, ...`
    pub assume: Vec<(String, Src)>,
    pub line: Position,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricSpec {
    /// 1-based `(i, j, entry)`.
    pub entries: Vec<(usize, usize, Src)>,
    pub line: Position,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermKind {
    Xi,
    Eta,
    Omega,
    F,
    /// Expected first integral at this order.
    Integral,
}

impl TermKind {
    fn name(self) -> &'static str {
        match self {
            TermKind::Xi => "xi",
            TermKind::Eta => "eta",
            TermKind::Omega => "omega",
            TermKind::F => "f",
            TermKind::Integral => "integral",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermKey {
    pub kind: TermKind,
    pub order: usize,
    /// Coordinate name for `eta.k.<coord>`.
    pub component: Option<String>,
}

impl fmt::Display for TermKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.kind.name(), self.order)?;
        if let Some(c) = &self.component {
            write!(f, ".{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSpec {
    pub name: String,
    pub terms: Vec<(TermKey, Src)>,
    pub line: Position,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSpec {
    pub gauge: Src,
    pub x0: Src,
    pub xdot0: Src,
    pub pivot: Option<String>,
    pub sign: Option<String>,
    pub t0: Src,
    pub t1: Src,
    pub step: Src,
    pub precision: Option<String>,
    pub epsilon: Option<Src>,
    pub tolerance: Option<Src>,
    pub monitor: Vec<String>,
    pub params: Vec<(String, Src)>,
    /// `(signature, body)`, e.g. `("T(t)", "1")`.
    pub functions: Vec<(String, Src)>,
    pub line: Position,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelDocument {
    pub space: SpaceSpec,
    pub g: MetricSpec,
    pub h: Option<MetricSpec>,
    pub v0: Src,
    pub v1: Option<Src>,
    pub order: usize,
    pub fixed_lapse: Option<Src>,
    pub candidates: Vec<CandidateSpec>,
    pub simulate: Option<SimulateSpec>,
}

/// A candidate that could not be turned into a generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Rejected {
    pub name: String,
    pub diagnostic: Diagnostic,
}

#[derive(Clone, Debug)]
pub struct BuiltCandidate {
    pub symmetry: CandidateSymmetry,
    /// Expected integrals by order.
    pub integrals: BTreeMap<usize, Expr>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Precision {
    Double,
    DoubleDouble,
}

#[derive(Clone, Debug)]
pub struct SimulationPlan {
    pub gauge: Expr,
    pub x0: Vec<Expr>,
    pub xdot0: Vec<Expr>,
    pub pivot: Option<(usize, i8)>,
    pub t_span: (f64, f64),
    pub step: f64,
    pub precision: Precision,
    pub epsilon: Option<Rational>,
    pub tolerance: Option<f64>,
    pub monitor: Vec<String>,
    pub params: BTreeMap<noether_core::Atom, Rational>,
    pub functions: Vec<(String, Vec<noether_core::Atom>, Expr)>,
}

/// Everything a command needs, built from a document.
#[derive(Clone, Debug)]
pub struct Built {
    pub model: Model,
    pub fixed_lapse: Option<Expr>,
    pub candidates: Vec<BuiltCandidate>,
    pub rejected: Vec<Rejected>,
    pub simulate: Option<SimulationPlan>,
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

/// Drops comments, trims lines, collapses runs of spaces and of blank lines.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out: Vec<String> = Vec::new();
    for raw in text.lines() {
        let line = collapse(strip_comment(raw));
        if line.is_empty() && out.last().map_or(true, |l| l.is_empty()) {
            continue;
        }
        out.push(line);
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    let mut s = out.join("\n");
    s.push('\n');
    s
}

struct Line<'a> {
    number: usize,
    key: &'a str,
    key_column: usize,
    value: Src,
}

fn split_line(number: usize, raw: &str) -> Result<Line<'_>, Diagnostic> {
    let body = strip_comment(raw);
    let Some(eq) = body.find('=') else {
        let t = body.trim();
        let col = body.find(t).unwrap_or(0) + 1;
        return Err(Diagnostic::new(number, col, t, "expected `key = value`"));
    };
    let key_part = &body[..eq];
    let key = key_part.trim();
    let key_column = key_part.find(key).unwrap_or(0) + 1;
    let rest = &body[eq + 1..];
    let lead = rest.len() - rest.trim_start().len();
    let value = Src { text: collapse(rest), line: number, column: eq + 2 + lead };
    if key.is_empty() {
        return Err(Diagnostic::new(number, 1, body.trim(), "missing key"));
    }
    if value.text.is_empty() {
        return Err(Diagnostic::new(number, key_column, key, "missing value"));
    }
    Ok(Line { number, key, key_column, value })
}

fn parse_usize(line: &Line<'_>) -> Result<usize, Diagnostic> {
    line.value.text.parse().map_err(|_| Diagnostic::at(&line.value, "expected a non-negative integer"))
}

fn name_list(src: &Src, sep: char) -> Vec<String> {
    src.text.split(sep).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn metric_key(line: &Line<'_>, letter: &str) -> Result<(usize, usize), Diagnostic> {
    let bad = || Diagnostic::new(line.number, line.key_column, line.key, format!("expected `{letter}.i.j`"));
    let mut parts = line.key.split('.');
    if parts.next() != Some(letter) {
        return Err(bad());
    }
    let i = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
    let j = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
    if parts.next().is_some() || i == 0 || j == 0 {
        return Err(bad());
    }
    Ok((i, j))
}

fn term_key(line: &Line<'_>) -> Result<TermKey, Diagnostic> {
    let bad = |m: &str| Diagnostic::new(line.number, line.key_column, line.key, m.to_string());
    let mut parts = line.key.splitn(3, '.');
    let kind = match parts.next().unwrap_or("") {
        "xi" => TermKind::Xi,
        "eta" => TermKind::Eta,
        "omega" => TermKind::Omega,
        "f" => TermKind::F,
        "integral" => TermKind::Integral,
        _ => return Err(bad("unknown candidate key; expected xi, eta, omega, f or integral")),
    };
    let order = parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("expected `<term>.<order>`"))?;
    let component = parts.next().map(str::to_string);
    if component.is_some() && kind != TermKind::Eta {
        return Err(bad("only eta takes a coordinate component"));
    }
    Ok(TermKey { kind, order, component })
}

#[derive(PartialEq)]
enum Section {
    None,
    Space,
    G,
    H,
    Potentials,
    Model,
    Candidate,
    Simulate,
}

/// Parses and validates a model document.
///
/// Errors in the model sections are fatal; a malformed candidate is kept in
/// the document and reported by [`ModelDocument::build`] as rejected.
pub fn parse_model(text: &str) -> Result<ModelDocument, Diagnostic> {
    let doc = parse_syntax(text)?;
    doc.build()?;
    Ok(doc)
}

fn parse_syntax(text: &str) -> Result<ModelDocument, Diagnostic> {
    let mut section = Section::None;
    let mut seen: Vec<String> = Vec::new();
    let mut space: Option<SpaceSpec> = None;
    let mut g: Option<MetricSpec> = None;
    let mut h: Option<MetricSpec> = None;
    let mut v0: Option<Src> = None;
    let mut v1: Option<Src> = None;
    let mut potentials_line = 0;
    let mut order = 0;
    let mut fixed_lapse = None;
    let mut candidates: Vec<CandidateSpec> = Vec::new();
    let mut sim: Option<BTreeMap<String, (Src, usize)>> = None;
    let mut sim_multi: Vec<(String, String, Src)> = Vec::new();
    let mut sim_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let trimmed = strip_comment(raw).trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('[') {
            let col = raw.find('[').unwrap_or(0) + 1;
            let Some(inner) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) else {
                return Err(Diagnostic::new(number, col, trimmed, "unterminated section header"));
            };
            let inner = collapse(inner);
            let (kind, arg) = match inner.split_once(' ') {
                Some((k, a)) => (k.to_string(), Some(a.to_string())),
                None => (inner.clone(), None),
            };
            section = match (kind.as_str(), &arg) {
                ("space", None) => Section::Space,
                ("g", None) => Section::G,
                ("h", None) => Section::H,
                ("potentials", None) => Section::Potentials,
                ("model", None) => Section::Model,
                ("simulate", None) => Section::Simulate,
                ("candidate", Some(name)) => {
                    let ok = name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
                    if !ok {
                        return Err(Diagnostic::new(number, col, name, "invalid candidate name"));
                    }
                    if candidates.iter().any(|c| &c.name == name) {
                        return Err(Diagnostic::new(number, col, name, "duplicate candidate"));
                    }
                    candidates.push(CandidateSpec { name: name.clone(), terms: Vec::new(), line: Position(number) });
                    Section::Candidate
                }
                _ => return Err(Diagnostic::new(number, col, trimmed, "unknown section")),
            };
            if section != Section::Candidate {
                if seen.contains(&kind) {
                    return Err(Diagnostic::new(number, col, trimmed, "duplicate section"));
                }
                seen.push(kind);
            }
            match section {
                Section::Space => space = Some(SpaceSpec { line: Position(number), ..SpaceSpec::default() }),
                Section::G => g = Some(MetricSpec { entries: Vec::new(), line: Position(number) }),
                Section::H => h = Some(MetricSpec { entries: Vec::new(), line: Position(number) }),
                Section::Potentials => potentials_line = number,
                Section::Simulate => {
                    sim = Some(BTreeMap::new());
                    sim_line = number;
                }
                _ => {}
            }
            continue;
        }
        let line = split_line(number, raw)?;
        let unknown = |line: &Line<'_>| Diagnostic::new(line.number, line.key_column, line.key, "unknown key");
        let duplicate = |line: &Line<'_>| Diagnostic::new(line.number, line.key_column, line.key, "duplicate key");
        match section {
            Section::None => {
                return Err(Diagnostic::new(number, line.key_column, line.key, "key outside of any section"));
            }
            Section::Space => {
                let s = space.as_mut().unwrap();
                match line.key {
                    "n" => s.n = parse_usize(&line)?,
                    "coordinates" => s.coordinates = name_list(&line.value, ','),
                    "parameters" => s.parameters = name_list(&line.value, ','),
                    k if k.starts_with("assume.") => {
                        let name = k["assume.".len()..].to_string();
                        if s.assume.iter().any(|(n, _)| *n == name) {
                            return Err(duplicate(&line));
                        }
                        s.assume.push((name, line.value));
                    }
                    _ => return Err(unknown(&line)),
                }
            }
            Section::G | Section::H => {
                let (letter, m) = if section == Section::G { ("g", g.as_mut()) } else { ("h", h.as_mut()) };
                let m = m.unwrap();
                let (i, j) = metric_key(&line, letter)?;
                if m.entries.iter().any(|(a, b, _)| (*a, *b) == (i, j)) {
                    return Err(duplicate(&line));
                }
                m.entries.push((i, j, line.value));
            }
            Section::Potentials => {
                let slot = match line.key {
                    "V0" => &mut v0,
                    "V1" => &mut v1,
                    _ => return Err(unknown(&line)),
                };
                if slot.is_some() {
                    return Err(duplicate(&line));
                }
                *slot = Some(line.value);
            }
            Section::Model => match line.key {
                "order" => order = parse_usize(&line)?,
                "fixed_lapse" => fixed_lapse = Some(line.value),
                _ => return Err(unknown(&line)),
            },
            Section::Candidate => {
                let key = term_key(&line)?;
                let c = candidates.last_mut().unwrap();
                if c.terms.iter().any(|(k, _)| *k == key) {
                    return Err(duplicate(&line));
                }
                c.terms.push((key, line.value));
            }
            Section::Simulate => {
                if let Some(rest) = line.key.strip_prefix("param.") {
                    sim_multi.push(("param".into(), rest.to_string(), line.value));
                } else if let Some(rest) = line.key.strip_prefix("function.") {
                    sim_multi.push(("function".into(), collapse(rest), line.value));
                } else {
                    const KEYS: [&str; 12] = [
                        "gauge", "x0", "xdot0", "pivot", "sign", "t0", "t1", "step", "precision", "epsilon",
                        "tolerance", "monitor",
                    ];
                    if !KEYS.contains(&line.key) {
                        return Err(unknown(&line));
                    }
                    let map = sim.as_mut().unwrap();
                    if map.contains_key(line.key) {
                        return Err(duplicate(&line));
                    }
                    map.insert(line.key.to_string(), (line.value, line.key_column));
                }
            }
        }
    }

    let space = space.ok_or_else(|| Diagnostic::new(1, 1, "", "missing [space] section"))?;
    let g = g.ok_or_else(|| Diagnostic::new(space.line.0, 1, "", "missing [g] section"))?;
    let v0 = v0.ok_or_else(|| Diagnostic::new(potentials_line.max(1), 1, "", "missing V0 in [potentials]"))?;
    let simulate = match sim {
        None => None,
        Some(mut map) => {
            let mut take = |k: &str| map.remove(k).map(|(v, _)| v);
            let need = |v: Option<Src>, k: &str| {
                v.ok_or_else(|| Diagnostic::new(sim_line, 1, k, format!("missing `{k}` in [simulate]")))
            };
            let word = |v: Option<Src>| v.map(|s| s.text);
            Some(SimulateSpec {
                gauge: need(take("gauge"), "gauge")?,
                x0: need(take("x0"), "x0")?,
                xdot0: need(take("xdot0"), "xdot0")?,
                pivot: word(take("pivot")),
                sign: word(take("sign")),
                t0: need(take("t0"), "t0")?,
                t1: need(take("t1"), "t1")?,
                step: need(take("step"), "step")?,
                precision: word(take("precision")),
                epsilon: take("epsilon"),
                tolerance: take("tolerance"),
                monitor: take("monitor").map(|s| name_list(&s, ';')).unwrap_or_default(),
                params: sim_multi.iter().filter(|m| m.0 == "param").map(|m| (m.1.clone(), m.2.clone())).collect(),
                functions: sim_multi
                    .iter()
                    .filter(|m| m.0 == "function")
                    .map(|m| (m.1.clone(), m.2.clone()))
                    .collect(),
                line: Position(sim_line),
            })
        }
    };
    Ok(ModelDocument { space, g, h, v0, v1, order, fixed_lapse, candidates, simulate })
}

fn parse_assumptions(src: &Src) -> Result<Assumptions, Diagnostic> {
    let mut a = Assumptions::default();
    for part in src.text.split(',') {
        let part = part.trim();
        match part {
            "positive" => a = Assumptions { excluded: a.excluded, ..Assumptions::positive() },
            "nonzero" => a.nonzero = true,
            p if p.starts_with("!=") => {
                let v = parse_free(&p[2..])
                    .ok()
                    .and_then(|e| normalize(&e).ok())
                    .and_then(|e| match e {
                        Expr::Num(q) => Some(q),
                        _ => None,
                    })
                    .ok_or_else(|| Diagnostic::at(src, format!("`{p}` needs a rational value")))?;
                a.excluded.push(v);
            }
            _ => return Err(Diagnostic::at(src, format!("unknown assumption `{part}`"))),
        }
    }
    Ok(a)
}

/// Parses `src` over `space`, shifting error columns to the file.
fn expr_in(src: &Src, offset: usize, text: &str, space: &VariableSpace) -> Result<Expr, Diagnostic> {
    parse(text, space).map_err(|e| match e {
        SymError::Parse { column, token, message, .. } => {
            Diagnostic::new(src.line, src.column + offset + column - 1, &token, message)
        }
        other => Diagnostic::new(src.line, src.column + offset, text, other.to_string()),
    })
}

fn expr(src: &Src, space: &VariableSpace) -> Result<Expr, Diagnostic> {
    expr_in(src, 0, &src.text, space)
}

fn number(src: &Src) -> Result<Rational, Diagnostic> {
    parse_free(&src.text)
        .ok()
        .and_then(|e| normalize(&e).ok())
        .and_then(|e| match e {
            Expr::Num(q) => Some(q),
            _ => None,
        })
        .ok_or_else(|| Diagnostic::at(src, "expected an exact number"))
}

fn float(src: &Src) -> Result<f64, Diagnostic> {
    if let Ok(v) = src.text.parse::<f64>() {
        return Ok(v);
    }
    use num_traits::ToPrimitive;
    number(src)?.to_f64().ok_or_else(|| Diagnostic::at(src, "number out of range"))
}

impl ModelDocument {
    fn metric(&self, spec: &MetricSpec, space: &VariableSpace) -> Result<MetricTable, Diagnostic> {
        let n = self.space.n;
        let mut rows = vec![vec![Expr::zero(); n]; n];
        let mut given = vec![vec![false; n]; n];
        for (i, j, src) in &spec.entries {
            if *i > n || *j > n {
                return Err(Diagnostic::at(src, format!("metric index ({i},{j}) exceeds n = {n}")));
            }
            let e = normalize(&expr(src, space)?).map_err(|e| Diagnostic::at(src, e.to_string()))?;
            let (i, j) = (i - 1, j - 1);
            if given[j][i] && i != j && rows[j][i] != e {
                return Err(Diagnostic::at(src, format!("asymmetric metric: entry ({},{}) differs", j + 1, i + 1)));
            }
            rows[i][j] = e.clone();
            given[i][j] = true;
            if !given[j][i] {
                rows[j][i] = e;
            }
        }
        MetricTable::new(space.coordinates(), rows).map_err(|e| Diagnostic::new(spec.line.0, 1, "", e.to_string()))
    }

    /// Builds the model, candidates and simulation plan.
    pub fn build(&self) -> Result<Built, Diagnostic> {
        let sp = &self.space;
        if sp.coordinates.len() != sp.n {
            return Err(Diagnostic::new(
                sp.line.0,
                1,
                &sp.coordinates.join(", "),
                format!("n = {} but {} coordinates are declared", sp.n, sp.coordinates.len()),
            ));
        }
        let mut assumptions: BTreeMap<&str, Assumptions> = BTreeMap::new();
        for (name, src) in &sp.assume {
            if !sp.coordinates.contains(name) && !sp.parameters.contains(name) {
                return Err(Diagnostic::at(src, format!("assumption for undeclared atom `{name}`")));
            }
            assumptions.insert(name, parse_assumptions(src)?);
        }
        let decl = |names: &[String]| -> Vec<(String, Assumptions)> {
            names.iter().map(|n| (n.clone(), assumptions.get(n.as_str()).cloned().unwrap_or_default())).collect()
        };
        let space = VariableSpace::build(&decl(&sp.coordinates), &decl(&sp.parameters))
            .map_err(|e| Diagnostic::new(sp.line.0, 1, "", e.to_string()))?;
        let g = self.metric(&self.g, &space)?;
        let h = match &self.h {
            Some(h) => self.metric(h, &space)?,
            None => MetricTable::zero(space.coordinates()),
        };
        let v0 = expr(&self.v0, &space)?;
        let v1 = match &self.v1 {
            Some(s) => expr(s, &space)?,
            None => Expr::zero(),
        };
        let model = Model::new(space.clone(), g, h, v0, v1, self.order).map_err(|e| {
            let line = match e {
                Error::SingularMetric(_) | Error::AsymmetricMetric(..) => self.g.line.0,
                _ => self.v0.line,
            };
            Diagnostic::new(line, 1, "", e.to_string())
        })?;
        let fixed_lapse = match &self.fixed_lapse {
            Some(s) => Some(expr(s, &space)?),
            None => None,
        };

        let mut candidates = Vec::new();
        let mut rejected = Vec::new();
        for c in &self.candidates {
            match build_candidate(c, &space) {
                Ok(b) => candidates.push(b),
                Err(diagnostic) => rejected.push(Rejected { name: c.name.clone(), diagnostic }),
            }
        }

        let simulate = match &self.simulate {
            Some(s) => Some(self.plan(s, &space, &candidates, &rejected)?),
            None => None,
        };
        Ok(Built { model, fixed_lapse, candidates, rejected, simulate })
    }

    fn plan(
        &self,
        s: &SimulateSpec,
        space: &VariableSpace,
        candidates: &[BuiltCandidate],
        rejected: &[Rejected],
    ) -> Result<SimulationPlan, Diagnostic> {
        let n = space.dim();
        let at_line = |key: &str, msg: String| Diagnostic::new(s.line.0, 1, key, msg);
        let list = |src: &Src| -> Result<Vec<Expr>, Diagnostic> {
            let parts = split_components(src);
            if parts.len() != n {
                return Err(Diagnostic::at(src, format!("expected {n} components, found {}", parts.len())));
            }
            parts.iter().map(|(off, text)| expr_in(src, *off, text, space)).collect()
        };
        let pivot = match &s.pivot {
            None => None,
            Some(p) => {
                let i = space
                    .coordinates()
                    .iter()
                    .position(|c| c.name() == p)
                    .ok_or_else(|| at_line(p, format!("pivot `{p}` is not a coordinate")))?;
                let sign = match s.sign.as_deref() {
                    None | Some("+") => 1,
                    Some("-") => -1,
                    Some(other) => return Err(at_line(other, "sign must be `+` or `-`".into())),
                };
                Some((i, sign))
            }
        };
        let precision = match s.precision.as_deref() {
            None | Some("double") => Precision::Double,
            Some("double-double") => Precision::DoubleDouble,
            Some(other) => return Err(at_line(other, "precision must be `double` or `double-double`".into())),
        };
        for m in &s.monitor {
            if !candidates.iter().any(|c| &c.symmetry.name == m) {
                let why = if rejected.iter().any(|r| &r.name == m) { "is rejected" } else { "is not a candidate" };
                return Err(at_line(m, format!("monitor `{m}` {why}")));
            }
        }
        let mut params = BTreeMap::new();
        for (name, src) in &s.params {
            let atom = space
                .parameters()
                .iter()
                .find(|a| a.name() == name)
                .ok_or_else(|| Diagnostic::at(src, format!("`{name}` is not a declared parameter")))?;
            params.insert(atom.clone(), number(src)?);
        }
        let mut functions = Vec::new();
        for (sig, body) in &s.functions {
            let bad = || Diagnostic::at(body, format!("function key must look like `function.T(t)`, found `{sig}`"));
            let (name, rest) = sig.split_once('(').ok_or_else(bad)?;
            let args = rest.strip_suffix(')').ok_or_else(bad)?;
            let mut atoms = Vec::new();
            for a in args.split(',').map(str::trim) {
                atoms.push(space.lookup(a).ok_or_else(|| Diagnostic::at(body, format!("unknown argument `{a}`")))?);
            }
            functions.push((name.trim().to_string(), atoms, expr(body, space)?));
        }
        Ok(SimulationPlan {
            gauge: expr(&s.gauge, space)?,
            x0: list(&s.x0)?,
            xdot0: list(&s.xdot0)?,
            pivot,
            t_span: (float(&s.t0)?, float(&s.t1)?),
            step: float(&s.step)?,
            precision,
            epsilon: s.epsilon.as_ref().map(number).transpose()?,
            tolerance: s.tolerance.as_ref().map(float).transpose()?,
            monitor: s.monitor.clone(),
            params,
            functions,
        })
    }

    /// Canonical text; parsing it gives back an equal document.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let kv = |out: &mut String, k: &str, v: &str| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        };
        out.push_str("[space]\n");
        kv(&mut out, "n", &self.space.n.to_string());
        kv(&mut out, "coordinates", &self.space.coordinates.join(", "));
        if !self.space.parameters.is_empty() {
            kv(&mut out, "parameters", &self.space.parameters.join(", "));
        }
        for (name, a) in &self.space.assume {
            kv(&mut out, &format!("assume.{name}"), &a.text);
        }
        for (letter, m) in [("g", Some(&self.g)), ("h", self.h.as_ref())] {
            if let Some(m) = m {
                out.push_str(&format!("\n[{letter}]\n"));
                for (i, j, e) in &m.entries {
                    kv(&mut out, &format!("{letter}.{i}.{j}"), &e.text);
                }
            }
        }
        out.push_str("\n[potentials]\n");
        kv(&mut out, "V0", &self.v0.text);
        if let Some(v1) = &self.v1 {
            kv(&mut out, "V1", &v1.text);
        }
        out.push_str("\n[model]\n");
        kv(&mut out, "order", &self.order.to_string());
        if let Some(n0) = &self.fixed_lapse {
            kv(&mut out, "fixed_lapse", &n0.text);
        }
        for c in &self.candidates {
            out.push_str(&format!("\n[candidate {}]\n", c.name));
            for (k, v) in &c.terms {
                kv(&mut out, &k.to_string(), &v.text);
            }
        }
        if let Some(s) = &self.simulate {
            out.push_str("\n[simulate]\n");
            kv(&mut out, "gauge", &s.gauge.text);
            kv(&mut out, "x0", &s.x0.text);
            kv(&mut out, "xdot0", &s.xdot0.text);
            if let Some(p) = &s.pivot {
                kv(&mut out, "pivot", p);
            }
            if let Some(p) = &s.sign {
                kv(&mut out, "sign", p);
            }
            kv(&mut out, "t0", &s.t0.text);
            kv(&mut out, "t1", &s.t1.text);
            kv(&mut out, "step", &s.step.text);
            if let Some(p) = &s.precision {
                kv(&mut out, "precision", p);
            }
            if let Some(e) = &s.epsilon {
                kv(&mut out, "epsilon", &e.text);
            }
            if let Some(e) = &s.tolerance {
                kv(&mut out, "tolerance", &e.text);
            }
            if !s.monitor.is_empty() {
                kv(&mut out, "monitor", &s.monitor.join("; "));
            }
            for (k, v) in &s.params {
                kv(&mut out, &format!("param.{k}"), &v.text);
            }
            for (k, v) in &s.functions {
                kv(&mut out, &format!("function.{k}"), &v.text);
            }
        }
        out
    }
}

/// `(offset into src.text, trimmed component)` for a ';'-separated value.
fn split_components(src: &Src) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut start = 0;
    for part in src.text.split(';') {
        let lead = part.len() - part.trim_start().len();
        out.push((start + lead, part.trim().to_string()));
        start += part.len() + 1;
    }
    out
}

fn build_candidate(c: &CandidateSpec, space: &VariableSpace) -> Result<BuiltCandidate, Diagnostic> {
    let n = space.dim();
    let max_order = c.terms.iter().map(|(k, _)| k.order).max().unwrap_or(0);
    let mut orders = vec![GeneratorTerms::zero(n); max_order + 1];
    let mut integrals = BTreeMap::new();
    let mut eta_forms: BTreeMap<usize, bool> = BTreeMap::new();
    for (key, src) in &c.terms {
        let terms = &mut orders[key.order];
        match key.kind {
            TermKind::Xi => terms.xi = expr(src, space)?,
            TermKind::Omega => terms.omega = expr(src, space)?,
            TermKind::F => terms.f = expr(src, space)?,
            TermKind::Integral => {
                integrals.insert(key.order, expr(src, space)?);
            }
            TermKind::Eta => {
                let listed = key.component.is_none();
                if eta_forms.insert(key.order, listed).is_some_and(|prev| prev != listed || listed) {
                    return Err(Diagnostic::at(src, format!("eta.{} given both as a list and by component", key.order)));
                }
                match &key.component {
                    None => {
                        let parts = split_components(src);
                        if parts.len() != n {
                            return Err(Diagnostic::at(
                                src,
                                format!("eta.{} has {} components but n = {n}", key.order, parts.len()),
                            ));
                        }
                        for (i, (off, text)) in parts.iter().enumerate() {
                            terms.eta[i] = expr_in(src, *off, text, space)?;
                        }
                    }
                    Some(coord) => {
                        let i = space.coordinates().iter().position(|a| a.name() == coord).ok_or_else(|| {
                            Diagnostic::new(
                                src.line,
                                1,
                                &format!("eta.{}.{coord}", key.order),
                                format!("`{coord}` is not a declared coordinate"),
                            )
                        })?;
                        terms.eta[i] = expr(src, space)?;
                    }
                }
            }
        }
    }
    let symmetry = CandidateSymmetry::new(&c.name, orders);
    symmetry.validate(space).map_err(|e| Diagnostic::new(c.line.0, 1, &c.name, e.to_string()))?;
    Ok(BuiltCandidate { symmetry, integrals, line: c.line.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "[space]\nn = 1\ncoordinates = x\n\n[g]\ng.1.1 = 1\n\n[potentials]\nV0 = x^2/2\n\n[model]\norder = 0\n";

    #[test]
    fn minimal_document_round_trips() {
        let doc = parse_model(SMALL).unwrap();
        assert_eq!(doc.render(), SMALL);
        assert_eq!(parse_model(&doc.render()).unwrap(), doc);
    }

    #[test]
    fn unknown_section_is_located() {
        let err = parse_model("[space]\nn = 1\ncoordinates = x\n[metric]\n").unwrap_err();
        assert_eq!((err.line, err.column), (4, 1));
        assert!(err.message.contains("unknown section"));
    }

    #[test]
    fn undeclared_atom_in_potential_is_fatal() {
        let text = SMALL.replace("V0 = x^2/2", "V0 = y^2/2");
        let err = parse_model(&text).unwrap_err();
        assert_eq!(err.token, "y");
        assert_eq!((err.line, err.column), (9, 6));
    }

    #[test]
    fn asymmetric_metric() {
        let text = "[space]\nn = 2\ncoordinates = x, y\n[g]\ng.1.1 = 1\ng.1.2 = x\ng.2.1 = y\ng.2.2 = 1\n[potentials]\nV0 = x\n";
        let err = parse_model(text).unwrap_err();
        assert!(err.message.contains("asymmetric"), "{err}");
        assert_eq!(err.line, 7);
    }

    #[test]
    fn eta_arity_rejects_the_candidate() {
        let text = format!("{SMALL}\n[candidate wide]\neta.0 = 1; x\n");
        let doc = parse_model(&text).unwrap();
        let built = doc.build().unwrap();
        assert!(built.candidates.is_empty());
        assert_eq!(built.rejected[0].diagnostic.line, 15);
        assert!(built.rejected[0].diagnostic.message.contains("2 components but n = 1"));
    }

    #[test]
    fn undeclared_atom_in_candidate_points_at_token() {
        let text = format!("{SMALL}\n[candidate c]\nxi.0 = 1 + phi*t\n");
        let built = parse_model(&text).unwrap().build().unwrap();
        let d = &built.rejected[0].diagnostic;
        assert_eq!((d.line, d.column, d.token.as_str()), (15, 12, "phi"));
    }
}
