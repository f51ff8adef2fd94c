//! The `.pipenet` network description format.
//!
//! Line oriented; `#` starts a comment; arguments are `key=value` pairs.
//!
//! ```text
//! gas Rs=<f> z0=<f> T0=<f> [cv=<f>] [Tamb=<f>]
//! pipe <id> L=<f> d=<f> [dout=<f>] [eps=<f>] [dh=<f>] [lambda=<f>] [Re=<f>] [krad=<f>]
//! gain <id> k=<f>
//! joint <id> feeds=[<a>,<b>] into=<c>        # ports <id>.l1 <id>.l2 <id>.r
//! branch <id> from=<a> into=[<b>,<c>]        # ports <id>.l <id>.r1 <id>.r2
//! series <id> pipes=[<p1>,...]               # ports <id>.l <id>.r
//! nominal <pipe|*> pl=<f> q=<f> [Tl=<f>] [Tr=<f>]
//! link <elem>.<port> <elem>.<port>           # right flange first
//! input <name> = <elem>.<port>
//! output <name> = <signal-label>
//! ```
//!
//! A pipe not consumed by a joint, branch or series is an element in its
//! own right with ports `<id>.l` and `<id>.r`. Element declaration order
//! fixes the state ordering of the built model.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::composite::{
    make_branch, make_gain, make_joint, make_pipe, make_series, NominalCheck, PipeMember,
};
use crate::error::{Diagnostic, Error, Result};
use crate::friction::{resolve_lambda, PipeSpec};
use crate::gas::{validate_regime, GasProperties, OperatingPoint, PipeParams, RegimeWarning};
use crate::interconnect::{
    build_fg, close, select_outputs, ClosedNetwork, ConnectionMatrices, ExternalInput, Link,
    Network, PortRef, StackedSystem,
};
use crate::label::{is_identifier, Quantity, Side, SignalLabel};
use crate::statespace::StateSpaceModel;
use crate::steady_state::exact_nominal_pr;

/// Specific heat assumed when the gas line omits `cv` [J/(kg·K)].
pub const DEFAULT_CV: f64 = 1700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GasDecl {
    pub rs: f64,
    pub z0: f64,
    pub t0: f64,
    pub cv: Option<f64>,
    pub tamb: Option<f64>,
}

impl GasDecl {
    pub fn properties(&self) -> Result<GasProperties> {
        GasProperties::new(
            self.rs,
            self.z0,
            self.cv.unwrap_or(DEFAULT_CV),
            self.t0,
            self.tamb.unwrap_or(self.t0),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipeDecl {
    pub id: String,
    pub length: f64,
    pub diameter: f64,
    pub dout: Option<f64>,
    pub eps: Option<f64>,
    pub dh: Option<f64>,
    pub lambda: Option<f64>,
    pub re: Option<f64>,
    pub krad: Option<f64>,
}

impl PipeDecl {
    pub fn spec(&self) -> PipeSpec {
        PipeSpec {
            length: self.length,
            diameter: self.diameter,
            outer_diameter: self.dout,
            roughness: self.eps.unwrap_or(0.0),
            elevation: self.dh.unwrap_or(0.0),
            lambda: self.lambda,
            reynolds: self.re,
            k_rad: self.krad.unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Pipe(PipeDecl),
    Gain { id: String, k: f64 },
    Joint { id: String, feeds: [String; 2], into: String },
    Branch { id: String, from: String, into: [String; 2] },
    Series { id: String, pipes: Vec<String> },
}

impl Decl {
    pub fn id(&self) -> &str {
        match self {
            Decl::Pipe(p) => &p.id,
            Decl::Gain { id, .. }
            | Decl::Joint { id, .. }
            | Decl::Branch { id, .. }
            | Decl::Series { id, .. } => id,
        }
    }

    /// Pipes consumed by a composite declaration.
    fn consumed(&self) -> Vec<&str> {
        match self {
            Decl::Pipe(_) | Decl::Gain { .. } => Vec::new(),
            Decl::Joint { feeds, into, .. } => vec![into, &feeds[0], &feeds[1]],
            Decl::Branch { from, into, .. } => vec![from, &into[0], &into[1]],
            Decl::Series { pipes, .. } => pipes.iter().map(String::as_str).collect(),
        }
    }

    /// `(port, side, member)` of every flange the element exposes.
    fn ports(&self) -> Vec<(&'static str, Side, &str)> {
        match self {
            Decl::Pipe(PipeDecl { id, .. }) | Decl::Gain { id, .. } => {
                vec![("l", Side::Left, id), ("r", Side::Right, id)]
            }
            Decl::Joint { feeds, into, .. } => vec![
                ("l1", Side::Left, &feeds[0]),
                ("l2", Side::Left, &feeds[1]),
                ("r", Side::Right, into),
            ],
            Decl::Branch { from, into, .. } => vec![
                ("l", Side::Left, from),
                ("r1", Side::Right, &into[0]),
                ("r2", Side::Right, &into[1]),
            ],
            Decl::Series { pipes, .. } => vec![
                ("l", Side::Left, &pipes[0]),
                ("r", Side::Right, &pipes[pipes.len() - 1]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NominalTarget {
    /// `*`: applies to every pipe without its own line.
    Default,
    Pipe(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalDecl {
    pub target: NominalTarget,
    pub pl: f64,
    pub q: f64,
    pub tl: Option<f64>,
    pub tr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputDecl {
    pub name: String,
    pub label: SignalLabel,
}

/// A parsed and validated network description.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub gas: GasDecl,
    /// Pipe and element declarations in file order.
    pub decls: Vec<Decl>,
    pub nominals: Vec<NominalDecl>,
    pub links: Vec<Link>,
    pub inputs: Vec<ExternalInput>,
    pub outputs: Vec<OutputDecl>,
}

impl NetworkSpec {
    fn consumed_pipes(&self) -> HashSet<&str> {
        self.decls.iter().flat_map(Decl::consumed).collect()
    }

    /// Top-level elements in declaration order.
    pub fn elements(&self) -> Vec<&Decl> {
        let consumed = self.consumed_pipes();
        self.decls
            .iter()
            .filter(|d| !matches!(d, Decl::Pipe(p) if consumed.contains(p.id.as_str())))
            .collect()
    }

    pub fn pipe(&self, id: &str) -> Option<&PipeDecl> {
        self.decls.iter().find_map(|d| match d {
            Decl::Pipe(p) if p.id == id => Some(p),
            _ => None,
        })
    }

    fn nominal(&self, target: &NominalTarget) -> Option<&NominalDecl> {
        self.nominals.iter().find(|n| &n.target == target)
    }
}

// ---------------------------------------------------------------------------
// Lexing

#[derive(Debug, Clone)]
struct Token {
    text: String,
    /// 1-based character column.
    col: usize,
}

/// Splits a line into whitespace-separated tokens; a bracketed list is one
/// token even when it contains spaces, and `=` standing alone is a token.
fn tokenize(line: &str) -> std::result::Result<Vec<Token>, (usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let mut text = String::new();
        let mut depth = 0usize;
        while i < chars.len() {
            let c = chars[i];
            if depth == 0 && (c.is_whitespace() || c == '#') {
                break;
            }
            match c {
                '[' => depth += 1,
                ']' if depth == 0 => return Err((i + 1, "unbalanced ']'".into())),
                ']' => depth -= 1,
                _ => {}
            }
            if !c.is_whitespace() {
                text.push(c);
            }
            i += 1;
        }
        if depth > 0 {
            return Err((start + 1, "unterminated '['".into()));
        }
        out.push(Token {
            text,
            col: start + 1,
        });
    }
    Ok(out)
}

struct LineCtx<'a> {
    line: usize,
    diags: &'a mut Vec<Diagnostic>,
}

impl LineCtx<'_> {
    fn err(&mut self, col: usize, msg: impl Into<String>) {
        self.diags.push(Diagnostic {
            line: self.line,
            column: col,
            message: msg.into(),
        });
    }
}

/// `key=value` arguments with their positions.
struct Args {
    map: HashMap<String, (String, usize)>,
    keyword_col: usize,
}

impl Args {
    fn parse(ctx: &mut LineCtx, keyword_col: usize, toks: &[Token], allowed: &[&str]) -> Option<Args> {
        let mut map = HashMap::new();
        let mut ok = true;
        for t in toks {
            let Some((k, v)) = t.text.split_once('=') else {
                ctx.err(t.col, format!("expected key=value, found '{}'", t.text));
                ok = false;
                continue;
            };
            if !allowed.contains(&k) {
                ctx.err(t.col, format!("unknown key '{k}'"));
                ok = false;
                continue;
            }
            let vcol = t.col + k.chars().count() + 1;
            if map.insert(k.to_string(), (v.to_string(), vcol)).is_some() {
                ctx.err(t.col, format!("duplicate key '{k}'"));
                ok = false;
            }
        }
        ok.then_some(Args { map, keyword_col })
    }

    fn raw(&self, ctx: &mut LineCtx, key: &str) -> Option<(String, usize)> {
        let v = self.map.get(key).cloned();
        if v.is_none() {
            ctx.err(self.keyword_col, format!("missing required key '{key}'"));
        }
        v
    }

    fn number(&self, ctx: &mut LineCtx, key: &str, check: Check) -> Option<f64> {
        let (v, col) = self.raw(ctx, key)?;
        parse_number(ctx, &v, col, key, check)
    }

    fn opt_number(&self, ctx: &mut LineCtx, key: &str, check: Check, bad: &mut bool) -> Option<f64> {
        let (v, col) = self.map.get(key)?.clone();
        let r = parse_number(ctx, &v, col, key, check);
        if r.is_none() {
            *bad = true;
        }
        r
    }

    fn ident(&self, ctx: &mut LineCtx, key: &str) -> Option<String> {
        let (v, col) = self.raw(ctx, key)?;
        if is_identifier(&v) {
            Some(v)
        } else {
            ctx.err(col, format!("'{v}' is not a valid identifier"));
            None
        }
    }

    fn list(&self, ctx: &mut LineCtx, key: &str) -> Option<Vec<String>> {
        let (v, col) = self.raw(ctx, key)?;
        let Some(inner) = v.strip_prefix('[').and_then(|s| s.strip_suffix(']')) else {
            ctx.err(col, format!("expected a bracketed list for '{key}'"));
            return None;
        };
        if inner.is_empty() {
            return Some(Vec::new());
        }
        let items: Vec<String> = inner.split(',').map(str::to_string).collect();
        if let Some(bad) = items.iter().find(|s| !is_identifier(s)) {
            ctx.err(col, format!("'{bad}' is not a valid identifier"));
            return None;
        }
        Some(items)
    }

    fn pair(&self, ctx: &mut LineCtx, key: &str) -> Option<[String; 2]> {
        let col = self.map.get(key).map_or(self.keyword_col, |(_, c)| *c);
        let items = self.list(ctx, key)?;
        match <[String; 2]>::try_from(items) {
            Ok(p) => Some(p),
            Err(_) => {
                ctx.err(col, format!("'{key}' needs exactly two pipes"));
                None
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Check {
    Positive,
    NonNegative,
    NonZero,
    Finite,
}

fn parse_number(ctx: &mut LineCtx, v: &str, col: usize, key: &str, check: Check) -> Option<f64> {
    let Ok(x) = v.parse::<f64>() else {
        ctx.err(col, format!("'{v}' is not a number"));
        return None;
    };
    let (ok, what) = match check {
        Check::Positive => (x > 0.0, "positive"),
        Check::NonNegative => (x >= 0.0, "non-negative"),
        Check::NonZero => (x != 0.0, "nonzero"),
        Check::Finite => (true, "finite"),
    };
    if !x.is_finite() || !ok {
        ctx.err(col, format!("'{key}' must be {what} and finite, got {v}"));
        return None;
    }
    Some(x)
}

fn ident_token(ctx: &mut LineCtx, toks: &[Token], keyword: &Token) -> Option<(String, usize)> {
    match toks.first() {
        Some(t) if is_identifier(&t.text) && !t.text.contains('=') => Some((t.text.clone(), t.col)),
        Some(t) => {
            ctx.err(t.col, format!("'{}' is not a valid identifier", t.text));
            None
        }
        None => {
            ctx.err(keyword.col, format!("'{}' needs a name", keyword.text));
            None
        }
    }
}

/// `<name> = <rhs>` with `=` spaced or not.
fn binding(ctx: &mut LineCtx, toks: &[Token], keyword: &Token) -> Option<(String, usize, String, usize)> {
    let joined: Vec<(char, usize)> = toks
        .iter()
        .flat_map(|t| t.text.chars().enumerate().map(move |(i, c)| (c, t.col + i)))
        .collect();
    let Some(eq) = joined.iter().position(|(c, _)| *c == '=') else {
        ctx.err(keyword.col, format!("expected '{} <name> = <target>'", keyword.text));
        return None;
    };
    let name: String = joined[..eq].iter().map(|(c, _)| c).collect();
    let rhs: String = joined[eq + 1..].iter().map(|(c, _)| c).collect();
    let name_col = joined.first().map_or(keyword.col, |(_, c)| *c);
    let rhs_col = joined.get(eq + 1).map_or(joined[eq].1, |(_, c)| *c);
    if toks.len() > 3 || (toks.len() == 3 && toks[1].text != "=") {
        ctx.err(toks[0].col, "unexpected extra tokens");
        return None;
    }
    if !is_identifier(&name) {
        ctx.err(name_col, format!("'{name}' is not a valid identifier"));
        return None;
    }
    Some((name, name_col, rhs, rhs_col))
}

fn port_ref(ctx: &mut LineCtx, text: &str, col: usize) -> Option<PortRef> {
    match text.parse() {
        Ok(p) => Some(p),
        Err(_) => {
            ctx.err(col, format!("expected <element>.<port>, found '{text}'"));
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

/// Source positions kept for semantic diagnostics.
#[derive(Default)]
struct Positions {
    decls: Vec<(usize, usize)>,
    nominals: Vec<(usize, usize)>,
    links: Vec<(usize, usize, usize)>,
    inputs: Vec<(usize, usize)>,
    outputs: Vec<(usize, usize)>,
}

/// Parses and validates a network description.
pub fn parse(text: &str) -> Result<NetworkSpec> {
    let mut diags = Vec::new();
    let mut gas: Option<GasDecl> = None;
    let mut spec = NetworkSpec {
        gas: GasDecl {
            rs: 0.0,
            z0: 0.0,
            t0: 0.0,
            cv: None,
            tamb: None,
        },
        decls: Vec::new(),
        nominals: Vec::new(),
        links: Vec::new(),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    let mut pos = Positions::default();

    for (i, line) in text.lines().enumerate() {
        let mut ctx = LineCtx {
            line: i + 1,
            diags: &mut diags,
        };
        let toks = match tokenize(line) {
            Ok(t) => t,
            Err((col, msg)) => {
                ctx.err(col, msg);
                continue;
            }
        };
        let Some((kw, rest)) = toks.split_first() else {
            continue;
        };
        let here = (i + 1, kw.col);
        match kw.text.as_str() {
            "gas" => {
                if gas.is_some() {
                    ctx.err(kw.col, "duplicate gas line");
                    continue;
                }
                let Some(a) = Args::parse(&mut ctx, kw.col, rest, &["Rs", "z0", "T0", "cv", "Tamb"]) else {
                    continue;
                };
                let mut bad = false;
                let rs = a.number(&mut ctx, "Rs", Check::Positive);
                let z0 = a.number(&mut ctx, "z0", Check::Positive);
                let t0 = a.number(&mut ctx, "T0", Check::Positive);
                let cv = a.opt_number(&mut ctx, "cv", Check::Positive, &mut bad);
                let tamb = a.opt_number(&mut ctx, "Tamb", Check::Positive, &mut bad);
                if let (Some(rs), Some(z0), Some(t0), false) = (rs, z0, t0, bad) {
                    gas = Some(GasDecl { rs, z0, t0, cv, tamb });
                }
            }
            "pipe" => {
                let Some((id, _)) = ident_token(&mut ctx, rest, kw) else {
                    continue;
                };
                let keys = ["L", "d", "dout", "eps", "dh", "lambda", "Re", "krad"];
                let Some(a) = Args::parse(&mut ctx, kw.col, &rest[1..], &keys) else {
                    continue;
                };
                let mut bad = false;
                let length = a.number(&mut ctx, "L", Check::Positive);
                let diameter = a.number(&mut ctx, "d", Check::Positive);
                let dout = a.opt_number(&mut ctx, "dout", Check::Positive, &mut bad);
                let eps = a.opt_number(&mut ctx, "eps", Check::NonNegative, &mut bad);
                let dh = a.opt_number(&mut ctx, "dh", Check::Finite, &mut bad);
                let lambda = a.opt_number(&mut ctx, "lambda", Check::Positive, &mut bad);
                let re = a.opt_number(&mut ctx, "Re", Check::Positive, &mut bad);
                let krad = a.opt_number(&mut ctx, "krad", Check::NonNegative, &mut bad);
                let (Some(length), Some(diameter), false) = (length, diameter, bad) else {
                    continue;
                };
                if let Some(dout) = dout.filter(|&o| o < diameter) {
                    let col = a.map["dout"].1;
                    ctx.err(col, format!("outer diameter {dout} is below the inner diameter"));
                    continue;
                }
                if lambda.is_none() && re.is_none() {
                    ctx.err(kw.col, format!("pipe {id} needs 'lambda' or 'Re'"));
                    continue;
                }
                spec.decls.push(Decl::Pipe(PipeDecl {
                    id,
                    length,
                    diameter,
                    dout,
                    eps,
                    dh,
                    lambda,
                    re,
                    krad,
                }));
                pos.decls.push(here);
            }
            "gain" => {
                let Some((id, _)) = ident_token(&mut ctx, rest, kw) else {
                    continue;
                };
                let Some(a) = Args::parse(&mut ctx, kw.col, &rest[1..], &["k"]) else {
                    continue;
                };
                if let Some(k) = a.number(&mut ctx, "k", Check::NonZero) {
                    spec.decls.push(Decl::Gain { id, k });
                    pos.decls.push(here);
                }
            }
            "joint" => {
                let Some((id, _)) = ident_token(&mut ctx, rest, kw) else {
                    continue;
                };
                let Some(a) = Args::parse(&mut ctx, kw.col, &rest[1..], &["feeds", "into"]) else {
                    continue;
                };
                let feeds = a.pair(&mut ctx, "feeds");
                let into = a.ident(&mut ctx, "into");
                if let (Some(feeds), Some(into)) = (feeds, into) {
                    spec.decls.push(Decl::Joint { id, feeds, into });
                    pos.decls.push(here);
                }
            }
            "branch" => {
                let Some((id, _)) = ident_token(&mut ctx, rest, kw) else {
                    continue;
                };
                let Some(a) = Args::parse(&mut ctx, kw.col, &rest[1..], &["from", "into"]) else {
                    continue;
                };
                let from = a.ident(&mut ctx, "from");
                let into = a.pair(&mut ctx, "into");
                if let (Some(from), Some(into)) = (from, into) {
                    spec.decls.push(Decl::Branch { id, from, into });
                    pos.decls.push(here);
                }
            }
            "series" => {
                let Some((id, _)) = ident_token(&mut ctx, rest, kw) else {
                    continue;
                };
                let Some(a) = Args::parse(&mut ctx, kw.col, &rest[1..], &["pipes"]) else {
                    continue;
                };
                match a.list(&mut ctx, "pipes") {
                    Some(pipes) if pipes.is_empty() => {
                        ctx.err(kw.col, format!("series {id} has no pipes"));
                    }
                    Some(pipes) => {
                        spec.decls.push(Decl::Series { id, pipes });
                        pos.decls.push(here);
                    }
                    None => {}
                }
            }
            "nominal" => {
                let target = match rest.first() {
                    Some(t) if t.text == "*" => NominalTarget::Default,
                    Some(t) if is_identifier(&t.text) => NominalTarget::Pipe(t.text.clone()),
                    Some(t) => {
                        ctx.err(t.col, format!("expected a pipe name or '*', found '{}'", t.text));
                        continue;
                    }
                    None => {
                        ctx.err(kw.col, "'nominal' needs a pipe name or '*'");
                        continue;
                    }
                };
                let Some(a) = Args::parse(&mut ctx, kw.col, &rest[1..], &["pl", "q", "Tl", "Tr"]) else {
                    continue;
                };
                let mut bad = false;
                let pl = a.number(&mut ctx, "pl", Check::Positive);
                let q = a.number(&mut ctx, "q", Check::Finite);
                let tl = a.opt_number(&mut ctx, "Tl", Check::Positive, &mut bad);
                let tr = a.opt_number(&mut ctx, "Tr", Check::Positive, &mut bad);
                if let (Some(pl), Some(q), false) = (pl, q, bad) {
                    spec.nominals.push(NominalDecl { target, pl, q, tl, tr });
                    pos.nominals.push(here);
                }
            }
            "link" => {
                if rest.len() != 2 {
                    ctx.err(kw.col, "'link' needs exactly two ports");
                    continue;
                }
                let right = port_ref(&mut ctx, &rest[0].text, rest[0].col);
                let left = port_ref(&mut ctx, &rest[1].text, rest[1].col);
                if let (Some(right), Some(left)) = (right, left) {
                    spec.links.push(Link { right, left });
                    pos.links.push((i + 1, rest[0].col, rest[1].col));
                }
            }
            "input" => {
                let Some((name, ncol, rhs, rcol)) = binding(&mut ctx, rest, kw) else {
                    continue;
                };
                if let Some(port) = port_ref(&mut ctx, &rhs, rcol) {
                    spec.inputs.push(ExternalInput { name, port });
                    pos.inputs.push((i + 1, ncol));
                }
            }
            "output" => {
                let Some((name, ncol, rhs, rcol)) = binding(&mut ctx, rest, kw) else {
                    continue;
                };
                match rhs.parse::<SignalLabel>() {
                    Ok(label) => {
                        spec.outputs.push(OutputDecl { name, label });
                        pos.outputs.push((i + 1, ncol));
                    }
                    Err(_) => ctx.err(rcol, format!("'{rhs}' is not a signal label")),
                }
            }
            other => ctx.err(kw.col, format!("unknown keyword '{other}'")),
        }
    }

    match gas {
        Some(g) => spec.gas = g,
        None if diags.is_empty() => diags.push(Diagnostic {
            line: 1,
            column: 1,
            message: "no gas block".into(),
        }),
        None => {}
    }
    if diags.is_empty() {
        validate(&spec, &pos, &mut diags);
    }
    if diags.is_empty() {
        Ok(spec)
    } else {
        Err(Error::Parse(diags))
    }
}

fn validate(spec: &NetworkSpec, pos: &Positions, diags: &mut Vec<Diagnostic>) {
    let mut err = |(line, column): (usize, usize), message: String| {
        diags.push(Diagnostic {
            line,
            column,
            message,
        })
    };

    let mut names = HashSet::new();
    for (d, &p) in spec.decls.iter().zip(&pos.decls) {
        if !names.insert(d.id()) {
            err(p, format!("duplicate name '{}'", d.id()));
        }
    }

    // Composite membership.
    let mut owner: HashMap<&str, &str> = HashMap::new();
    let mut series_followers = HashSet::new();
    for (d, &p) in spec.decls.iter().zip(&pos.decls) {
        let members = d.consumed();
        let mut local = HashSet::new();
        for m in &members {
            if spec.pipe(m).is_none() {
                err(p, format!("'{}' refers to undeclared pipe '{m}'", d.id()));
            } else if !local.insert(*m) {
                err(p, format!("'{}' uses pipe '{m}' twice", d.id()));
            } else if let Some(prev) = owner.insert(m, d.id()) {
                err(p, format!("pipe '{m}' already belongs to '{prev}'"));
            }
        }
        if let Decl::Series { pipes, .. } = d {
            series_followers.extend(pipes.iter().skip(1).map(String::as_str));
        }
    }

    // Nominal points.
    let mut seen = HashSet::new();
    for (n, &p) in spec.nominals.iter().zip(&pos.nominals) {
        if !seen.insert(&n.target) {
            err(p, "duplicate nominal line".into());
            continue;
        }
        if let NominalTarget::Pipe(id) = &n.target {
            if spec.pipe(id).is_none() {
                err(p, format!("nominal for undeclared pipe '{id}'"));
            } else if series_followers.contains(id.as_str()) {
                err(p, format!("nominal of series member '{id}' follows from its predecessor"));
            }
        }
    }
    let has_default = spec.nominal(&NominalTarget::Default).is_some();
    for (d, &p) in spec.decls.iter().zip(&pos.decls) {
        if let Decl::Pipe(pd) = d {
            let own = spec.nominal(&NominalTarget::Pipe(pd.id.clone())).is_some();
            if !own && !has_default && !series_followers.contains(pd.id.as_str()) {
                err(p, format!("pipe '{}' has no nominal point", pd.id));
            }
        }
    }

    // Ports of top-level elements.
    let elements = spec.elements();
    let mut ports: HashMap<(String, String), (Side, String)> = HashMap::new();
    let mut outputs = HashSet::new();
    for e in &elements {
        for (name, side, member) in e.ports() {
            ports.insert((e.id().to_string(), name.to_string()), (side, member.to_string()));
            let q = match side {
                Side::Left => Quantity::Flow,
                Side::Right => Quantity::Pressure,
            };
            outputs.insert(SignalLabel::new(member, side, q));
        }
        if let Decl::Series { pipes, .. } = e {
            outputs.insert(SignalLabel::pressure(&pipes[pipes.len() - 1], Side::Right));
        }
    }
    let lookup = |r: &PortRef| -> std::result::Result<Side, String> {
        if owner.contains_key(r.element.as_str()) {
            return Err(format!(
                "pipe '{}' belongs to '{}' and cannot be linked directly",
                r.element, owner[r.element.as_str()]
            ));
        }
        ports
            .get(&(r.element.clone(), r.port.clone()))
            .map(|(s, _)| *s)
            .ok_or_else(|| format!("unknown port '{r}'"))
    };

    let mut used: HashMap<PortRef, usize> = HashMap::new();
    for (l, &(line, c1, c2)) in spec.links.iter().zip(&pos.links) {
        let right = lookup(&l.right);
        let left = lookup(&l.left);
        match (&right, &left) {
            (Err(m), _) => err((line, c1), m.clone()),
            (_, Err(m)) => err((line, c2), m.clone()),
            (Ok(Side::Right), Ok(Side::Left)) => {}
            _ => err(
                (line, c1),
                format!("incompatible flanges: {} must be a right flange and {} a left flange", l.right, l.left),
            ),
        }
        for (r, c) in [(&l.right, c1), (&l.left, c2)] {
            if used.insert(r.clone(), line).is_some() {
                err((line, c), format!("port '{r}' is used more than once"));
            }
        }
    }
    let mut input_names = HashSet::new();
    for (inp, &p) in spec.inputs.iter().zip(&pos.inputs) {
        if !input_names.insert(inp.name.as_str()) {
            err(p, format!("duplicate input name '{}'", inp.name));
        }
        if let Err(m) = lookup(&inp.port) {
            err(p, m);
        } else if used.insert(inp.port.clone(), p.0).is_some() {
            err(p, format!("port '{}' is used more than once", inp.port));
        }
    }
    for e in &elements {
        for (name, side, member) in e.ports() {
            let r = PortRef::new(e.id(), name);
            if !used.contains_key(&r) {
                let q = match side {
                    Side::Left => Quantity::Pressure,
                    Side::Right => Quantity::Flow,
                };
                let line = pos.decls[spec.decls.iter().position(|d| d.id() == e.id()).unwrap_or(0)];
                err(
                    line,
                    format!(
                        "unconnected component input {} (port {r} is neither linked nor an input)",
                        SignalLabel::new(member, side, q)
                    ),
                );
            }
        }
    }

    let mut output_names = HashSet::new();
    for (o, &p) in spec.outputs.iter().zip(&pos.outputs) {
        if !output_names.insert(o.name.as_str()) {
            err(p, format!("duplicate output name '{}'", o.name));
        }
        if !outputs.contains(&o.label) {
            err(p, format!("{} is not an output of any element", o.label));
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering

fn num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn opt(out: &mut String, key: &str, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, " {key}={}", num(v));
    }
}

/// Canonical text form; parsing it yields an identical spec.
pub fn render(spec: &NetworkSpec) -> String {
    let mut out = String::new();
    let g = &spec.gas;
    let _ = write!(out, "gas Rs={} z0={} T0={}", num(g.rs), num(g.z0), num(g.t0));
    opt(&mut out, "cv", g.cv);
    opt(&mut out, "Tamb", g.tamb);
    out.push('\n');
    for d in &spec.decls {
        match d {
            Decl::Pipe(p) => {
                let _ = write!(out, "pipe {} L={} d={}", p.id, num(p.length), num(p.diameter));
                opt(&mut out, "dout", p.dout);
                opt(&mut out, "eps", p.eps);
                opt(&mut out, "dh", p.dh);
                opt(&mut out, "lambda", p.lambda);
                opt(&mut out, "Re", p.re);
                opt(&mut out, "krad", p.krad);
            }
            Decl::Gain { id, k } => {
                let _ = write!(out, "gain {id} k={}", num(*k));
            }
            Decl::Joint { id, feeds, into } => {
                let _ = write!(out, "joint {id} feeds=[{},{}] into={into}", feeds[0], feeds[1]);
            }
            Decl::Branch { id, from, into } => {
                let _ = write!(out, "branch {id} from={from} into=[{},{}]", into[0], into[1]);
            }
            Decl::Series { id, pipes } => {
                let _ = write!(out, "series {id} pipes=[{}]", pipes.join(","));
            }
        }
        out.push('\n');
    }
    for n in &spec.nominals {
        let target = match &n.target {
            NominalTarget::Default => "*",
            NominalTarget::Pipe(id) => id,
        };
        let _ = write!(out, "nominal {target} pl={} q={}", num(n.pl), num(n.q));
        opt(&mut out, "Tl", n.tl);
        opt(&mut out, "Tr", n.tr);
        out.push('\n');
    }
    for l in &spec.links {
        let _ = writeln!(out, "link {} {}", l.right, l.left);
    }
    for i in &spec.inputs {
        let _ = writeln!(out, "input {} = {}", i.name, i.port);
    }
    for o in &spec.outputs {
        let _ = writeln!(out, "output {} = {}", o.name, o.label);
    }
    out
}

// ---------------------------------------------------------------------------
// Elaboration

/// A network built from a spec.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub gas: GasProperties,
    pub network: Network,
    pub stacked: StackedSystem,
    pub connections: ConnectionMatrices,
    pub closed: ClosedNetwork,
    /// Declared output selection (empty: all outputs).
    pub outputs: Vec<OutputDecl>,
    /// Regime hypotheses violated by individual pipes.
    pub warnings: Vec<(String, RegimeWarning)>,
}

impl NetworkModel {
    /// The closed model restricted to the declared outputs, if any.
    pub fn selected(&self) -> Result<StateSpaceModel> {
        if self.outputs.is_empty() {
            Ok(self.closed.model.clone())
        } else {
            let labels: Vec<_> = self.outputs.iter().map(|o| o.label.clone()).collect();
            select_outputs(&self.closed.model, &labels)
        }
    }

    /// Resolves an output by declared name or canonical label.
    pub fn output_label(&self, name: &str) -> Result<SignalLabel> {
        if let Some(o) = self.outputs.iter().find(|o| o.name == name) {
            return Ok(o.label.clone());
        }
        let label: SignalLabel = name
            .parse()
            .map_err(|_| Error::config(format!("unknown output '{name}'")))?;
        if self.closed.model.output_index(&label).is_some() {
            Ok(label)
        } else {
            Err(Error::config(format!("unknown output '{name}'")))
        }
    }
}

fn operating_point(
    p_l: f64,
    q: f64,
    t_l: f64,
    t_r: f64,
    params: &PipeParams,
    gas: &GasProperties,
) -> Result<OperatingPoint> {
    let p_r = exact_nominal_pr(p_l, q, t_l, t_r, params, gas)?;
    OperatingPoint::new(p_l, p_r, q, t_l, t_r)
}

struct Resolver<'a> {
    spec: &'a NetworkSpec,
    gas: GasProperties,
    params: HashMap<&'a str, PipeParams>,
}

impl Resolver<'_> {
    fn nominal_decl(&self, id: &str) -> Result<(&NominalDecl, bool)> {
        if let Some(n) = self.spec.nominal(&NominalTarget::Pipe(id.to_string())) {
            return Ok((n, false));
        }
        self.spec
            .nominal(&NominalTarget::Default)
            .map(|n| (n, true))
            .ok_or_else(|| Error::config(format!("pipe '{id}' has no nominal point")))
    }

    /// The member and whether it took the `*` default.
    fn member(&self, id: &str) -> Result<(PipeMember, bool)> {
        let (n, shared) = self.nominal_decl(id)?;
        let params = self.params[id];
        let t0 = self.gas.t0();
        let op = operating_point(n.pl, n.q, n.tl.unwrap_or(t0), n.tr.unwrap_or(t0), &params, &self.gas)?;
        Ok((PipeMember::new(id, params, op), shared))
    }

    /// Series members with nominal points chained from the first.
    fn chain(&self, ids: &[String]) -> Result<Vec<PipeMember>> {
        let (first, _) = self.member(&ids[0])?;
        let mut out = vec![first];
        for id in &ids[1..] {
            let prev = out[out.len() - 1].op;
            let params = self.params[id.as_str()];
            let op = operating_point(prev.p_r(), prev.q(), prev.t_r(), prev.t_r(), &params, &self.gas)?;
            out.push(PipeMember::new(id.clone(), params, op));
        }
        Ok(out)
    }
}

/// Resolves friction factors and nominal points, builds every element,
/// stacks them in declaration order and closes the network.
pub fn elaborate(spec: &NetworkSpec) -> Result<NetworkModel> {
    let gas = spec.gas.properties()?;
    let mut params = HashMap::new();
    for d in &spec.decls {
        if let Decl::Pipe(p) = d {
            params.insert(p.id.as_str(), resolve_lambda(&p.spec())?);
        }
    }
    let r = Resolver { spec, gas, params };

    let mut network = Network::new();
    let mut warnings = Vec::new();
    let mut note = |m: &PipeMember| -> Result<()> {
        for w in validate_regime(&m.params, &m.op, &gas)? {
            warnings.push((m.id.clone(), w));
        }
        Ok(())
    };
    for e in spec.elements() {
        let built = match e {
            Decl::Pipe(p) => {
                let (m, _) = r.member(&p.id)?;
                note(&m)?;
                make_pipe(&m, &gas)?
            }
            Decl::Gain { id, k } => make_gain(id, *k)?,
            Decl::Joint { id, feeds, into } => {
                let (m0, s0) = r.member(into)?;
                let (m1, s1) = r.member(&feeds[0])?;
                let (m2, s2) = r.member(&feeds[1])?;
                for m in [&m0, &m1, &m2] {
                    note(m)?;
                }
                let check = if s0 && s1 && s2 { NominalCheck::Skip } else { NominalCheck::Strict };
                make_joint(id, &m0, &m1, &m2, &gas, check)?
            }
            Decl::Branch { id, from, into } => {
                let (m0, s0) = r.member(from)?;
                let (m1, s1) = r.member(&into[0])?;
                let (m2, s2) = r.member(&into[1])?;
                for m in [&m0, &m1, &m2] {
                    note(m)?;
                }
                let check = if s0 && s1 && s2 { NominalCheck::Skip } else { NominalCheck::Strict };
                make_branch(id, &m0, &m1, &m2, &gas, check)?
            }
            Decl::Series { id, pipes } => {
                let members = r.chain(pipes)?;
                for m in &members {
                    note(m)?;
                }
                make_series(id, &members, &gas)?
            }
        };
        network.add(built);
    }
    for l in &spec.links {
        network.link(l.right.clone(), l.left.clone());
    }
    for i in &spec.inputs {
        network.external(i.name.clone(), i.port.clone());
    }

    let stacked = network.stacked()?;
    let connections = build_fg(&stacked, network.links(), network.externals())?;
    let model = close(&stacked, &connections)?;
    let closed = ClosedNetwork {
        model,
        input_names: connections.external_names.clone(),
    };
    Ok(NetworkModel {
        gas,
        network,
        stacked,
        connections,
        closed,
        outputs: spec.outputs.clone(),
        warnings,
    })
}
