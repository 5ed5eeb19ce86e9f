//! Declarative task documents for the command-line interface.
//!
//! A document is a sequence of single-line statements. Definitions bind
//! names that later statements may reference; scalar settings provide
//! defaults that command-line flags override.
//!
//! ```text
//! # spaces are built from explicit constructors
//! space e  = expspan([0, 1])
//! space p3 = weyl(3, 1)
//! space f  = product(e, p3)
//!
//! support a = {(0, 0), (1, 0), (0, 1)}
//! weights w = {0: 1.0, 3: 2.5}
//!
//! domain = disk(1)              # unit disk; also disk(re, im, r),
//!                               # polydisk(...), annulus(r0, r1),
//!                               # rectangle(re0, re1, im0, im1),
//!                               # plane(n), torus(n)
//! task = expect(f)
//! tol = 1e-9
//! seed = 42
//! ```
//!
//! Space constructors mirror the expression variants: `weyl(d, n)`,
//! `expspan([...])` (frequencies are reals, `c(re, im)` complexes, or
//! tuples of those for several variables), `sparse({exponent: weight})`
//! or `sparse(name)`, `gaf()`, `gef()`, `product(...)` (n-ary, folded
//! left), `power(f, k)`, `tensor(...)`. There is no expression
//! evaluation beyond name lookup, and unknown statement keys are errors.
//! Parse errors carry exact line and column positions.

use num_complex::Complex64;

use crate::polytope::LatticeSupport;
use crate::quad::{CoordRegion, Domain};
use crate::space::{SpaceExpr, SupportWeights};
use crate::{Error, Result};

/// A parsed document: named definitions plus optional settings.
#[derive(Debug, Default)]
pub struct SpecDocument {
    pub spaces: Vec<(String, SpaceExpr)>,
    pub supports: Vec<(String, LatticeSupport)>,
    pub weight_tables: Vec<(String, SupportWeights)>,
    pub domain: Option<Domain>,
    pub task: Option<TaskSpec>,
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub radius: Option<f64>,
    pub threads: Option<usize>,
    pub budget: Option<u64>,
    pub truncation: Option<usize>,
    pub grid: Option<Vec<GridAxis>>,
}

/// What the document asks to be computed.
#[derive(Clone, Debug)]
pub enum TaskSpec {
    Expect(Vec<SpaceExpr>),
    Mc(SpaceExpr),
    Mixed(Vec<SpaceExpr>),
    Bkk(Vec<LatticeSupport>),
    Kushnirenko(LatticeSupport, SupportWeights),
    Grid(SpaceExpr),
    Weights(SpaceExpr),
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Expect(_) => "expect",
            TaskSpec::Mc(_) => "mc",
            TaskSpec::Mixed(_) => "mixed",
            TaskSpec::Bkk(_) | TaskSpec::Kushnirenko(..) => "bkk",
            TaskSpec::Grid(_) => "grid",
            TaskSpec::Weights(_) => "weights",
        }
    }
}

/// One coordinate's sampling grid: `rect(re_min, re_max, re_steps,
/// im_min, im_max, im_steps)`.
#[derive(Clone, Copy, Debug)]
pub struct GridAxis {
    pub re_min: f64,
    pub re_max: f64,
    pub re_steps: usize,
    pub im_min: f64,
    pub im_max: f64,
    pub im_steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Eq,
    Newline,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err_at(line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, col, message: message.into() }
}

fn tokenize(text: &str) -> Result<Vec<Spanned>> {
    let mut toks = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_num = lineno + 1;
        let bytes: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let col = i + 1;
            match c {
                ' ' | '\t' | '\r' => i += 1,
                '#' => break,
                '(' => { toks.push(Spanned { tok: Tok::LParen, line: line_num, col }); i += 1 }
                ')' => { toks.push(Spanned { tok: Tok::RParen, line: line_num, col }); i += 1 }
                '[' => { toks.push(Spanned { tok: Tok::LBracket, line: line_num, col }); i += 1 }
                ']' => { toks.push(Spanned { tok: Tok::RBracket, line: line_num, col }); i += 1 }
                '{' => { toks.push(Spanned { tok: Tok::LBrace, line: line_num, col }); i += 1 }
                '}' => { toks.push(Spanned { tok: Tok::RBrace, line: line_num, col }); i += 1 }
                ',' => { toks.push(Spanned { tok: Tok::Comma, line: line_num, col }); i += 1 }
                ':' => { toks.push(Spanned { tok: Tok::Colon, line: line_num, col }); i += 1 }
                '=' => { toks.push(Spanned { tok: Tok::Eq, line: line_num, col }); i += 1 }
                _ if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                        i += 1;
                    }
                    let word: String = bytes[start..i].iter().collect();
                    toks.push(Spanned { tok: Tok::Ident(word), line: line_num, col });
                }
                _ if c.is_ascii_digit()
                    || ((c == '-' || c == '+')
                        && i + 1 < bytes.len()
                        && (bytes[i + 1].is_ascii_digit() || bytes[i + 1] == '.'))
                    || (c == '.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit()) =>
                {
                    let start = i;
                    if c == '-' || c == '+' {
                        i += 1;
                    }
                    let mut is_float = false;
                    while i < bytes.len() {
                        match bytes[i] {
                            '0'..='9' => i += 1,
                            '.' => { is_float = true; i += 1 }
                            'e' | 'E' => {
                                is_float = true;
                                i += 1;
                                if i < bytes.len() && (bytes[i] == '-' || bytes[i] == '+') {
                                    i += 1;
                                }
                            }
                            _ => break,
                        }
                    }
                    let text: String = bytes[start..i].iter().collect();
                    let tok = if is_float {
                        Tok::Float(text.parse::<f64>().map_err(|_| {
                            err_at(line_num, col, format!("invalid number `{text}`"))
                        })?)
                    } else {
                        Tok::Int(text.parse::<i64>().map_err(|_| {
                            err_at(line_num, col, format!("invalid integer `{text}`"))
                        })?)
                    };
                    toks.push(Spanned { tok, line: line_num, col });
                }
                other => {
                    return Err(err_at(line_num, col, format!("unexpected character `{other}`")));
                }
            }
        }
        toks.push(Spanned { tok: Tok::Newline, line: line_num, col: bytes.len() + 1 });
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    doc: SpecDocument,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos.min(self.toks.len().saturating_sub(1))) {
            Some(s) => (s.line, s.col),
            None => (1, 1),
        }
    }

    fn next(&mut self, what: &str) -> Result<&Spanned> {
        let (line, col) = self.here();
        match self.toks.get(self.pos) {
            Some(s) => {
                self.pos += 1;
                Ok(s)
            }
            None => Err(err_at(line, col, format!("expected {what}, found end of input"))),
        }
    }

    fn expect_tok(&mut self, want: &Tok, what: &str) -> Result<()> {
        let s = self.next(what)?;
        if &s.tok == want {
            Ok(())
        } else {
            Err(err_at(s.line, s.col, format!("expected {what}, found {}", describe(&s.tok))))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize, usize)> {
        let s = self.next(what)?;
        match &s.tok {
            Tok::Ident(name) => Ok((name.clone(), s.line, s.col)),
            other => Err(err_at(s.line, s.col, format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64> {
        let s = self.next(what)?;
        match s.tok {
            Tok::Int(v) => Ok(v as f64),
            Tok::Float(v) => Ok(v),
            ref other => Err(err_at(s.line, s.col, format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn integer(&mut self, what: &str) -> Result<i64> {
        let s = self.next(what)?;
        match s.tok {
            Tok::Int(v) => Ok(v),
            ref other => Err(err_at(s.line, s.col, format!("expected {what}, found {}", describe(other)))),
        }
    }

    fn end_statement(&mut self) -> Result<()> {
        match self.peek() {
            None => Ok(()),
            Some(s) if s.tok == Tok::Newline => {
                self.pos += 1;
                Ok(())
            }
            Some(s) => Err(err_at(s.line, s.col, format!("expected end of line, found {}", describe(&s.tok)))),
        }
    }

    fn lookup_space(&self, name: &str, line: usize, col: usize) -> Result<SpaceExpr> {
        self.doc
            .spaces
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| err_at(line, col, format!("unknown space `{name}`")))
    }

    fn lookup_support(&self, name: &str, line: usize, col: usize) -> Result<LatticeSupport> {
        self.doc
            .supports
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| err_at(line, col, format!("unknown support `{name}`")))
    }

    fn lookup_weights(&self, name: &str, line: usize, col: usize) -> Result<SupportWeights> {
        self.doc
            .weight_tables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| err_at(line, col, format!("unknown weights `{name}`")))
    }

    fn lift(&self, r: crate::Result<SpaceExpr>, line: usize, col: usize) -> Result<SpaceExpr> {
        r.map_err(|e| err_at(line, col, e.to_string()))
    }

    /// scalar | c(re, im)
    fn complex_scalar(&mut self, what: &str) -> Result<Complex64> {
        let (line, col) = self.here();
        match self.peek().map(|s| s.tok.clone()) {
            Some(Tok::Ident(w)) if w == "c" => {
                self.pos += 1;
                self.expect_tok(&Tok::LParen, "`(`")?;
                let re = self.number("real part")?;
                self.expect_tok(&Tok::Comma, "`,`")?;
                let im = self.number("imaginary part")?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                Ok(Complex64::new(re, im))
            }
            Some(Tok::Int(_)) | Some(Tok::Float(_)) => Ok(Complex64::new(self.number(what)?, 0.0)),
            _ => Err(err_at(line, col, format!("expected {what}"))),
        }
    }

    /// one frequency: scalar, c(re, im), or a tuple of those
    fn frequency(&mut self) -> Result<Vec<Complex64>> {
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::LParen)) {
            self.pos += 1;
            let mut comps = vec![self.complex_scalar("frequency component")?];
            while matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                self.pos += 1;
                comps.push(self.complex_scalar("frequency component")?);
            }
            self.expect_tok(&Tok::RParen, "`)`")?;
            Ok(comps)
        } else {
            Ok(vec![self.complex_scalar("frequency")?])
        }
    }

    /// integer exponent vector: INT or (INT, ..., INT)
    fn exponent_key(&mut self) -> Result<Vec<i64>> {
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::LParen)) {
            self.pos += 1;
            let mut key = vec![self.integer("exponent")?];
            while matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                self.pos += 1;
                key.push(self.integer("exponent")?);
            }
            self.expect_tok(&Tok::RParen, "`)`")?;
            Ok(key)
        } else {
            Ok(vec![self.integer("exponent")?])
        }
    }

    /// { exponent: weight, ... }
    fn weight_table(&mut self) -> Result<SupportWeights> {
        let (line, col) = self.here();
        self.expect_tok(&Tok::LBrace, "`{`")?;
        let mut entries = Vec::new();
        loop {
            entries.push({
                let key = self.exponent_key()?;
                self.expect_tok(&Tok::Colon, "`:`")?;
                let w = self.number("weight")?;
                (key, w)
            });
            match self.next("`,` or `}`")? {
                Spanned { tok: Tok::Comma, .. } => continue,
                Spanned { tok: Tok::RBrace, .. } => break,
                s => return Err(err_at(s.line, s.col, format!("expected `,` or `}}`, found {}", describe(&s.tok)))),
            }
        }
        SupportWeights::new(entries).map_err(|e| err_at(line, col, e.to_string()))
    }

    /// { point, point, ... }
    fn support_set(&mut self) -> Result<LatticeSupport> {
        let (line, col) = self.here();
        self.expect_tok(&Tok::LBrace, "`{`")?;
        let mut points = Vec::new();
        loop {
            points.push(self.exponent_key()?);
            match self.next("`,` or `}`")? {
                Spanned { tok: Tok::Comma, .. } => continue,
                Spanned { tok: Tok::RBrace, .. } => break,
                s => return Err(err_at(s.line, s.col, format!("expected `,` or `}}`, found {}", describe(&s.tok)))),
            }
        }
        LatticeSupport::new(points).map_err(|e| err_at(line, col, e.to_string()))
    }

    fn space_expr(&mut self) -> Result<SpaceExpr> {
        let (name, line, col) = self.expect_ident("space constructor or name")?;
        match name.as_str() {
            "weyl" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                let d = self.integer("degree")?;
                self.expect_tok(&Tok::Comma, "`,`")?;
                let n = self.integer("variable count")?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                if d < 0 || n <= 0 {
                    return Err(err_at(line, col, "weyl needs degree ≥ 0 and nvars ≥ 1"));
                }
                self.lift(SpaceExpr::weyl(d as u32, n as usize), line, col)
            }
            "expspan" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                self.expect_tok(&Tok::LBracket, "`[`")?;
                let mut freqs = vec![self.frequency()?];
                while matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                    self.pos += 1;
                    freqs.push(self.frequency()?);
                }
                self.expect_tok(&Tok::RBracket, "`]`")?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                self.lift(SpaceExpr::exp_span(freqs), line, col)
            }
            "sparse" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                let weights = match self.peek().map(|s| s.tok.clone()) {
                    Some(Tok::LBrace) => self.weight_table()?,
                    Some(Tok::Ident(n)) => {
                        let (l, c) = self.here();
                        self.pos += 1;
                        self.lookup_weights(&n, l, c)?
                    }
                    _ => {
                        let (l, c) = self.here();
                        return Err(err_at(l, c, "sparse needs `{...}` or a weights name"));
                    }
                };
                self.expect_tok(&Tok::RParen, "`)`")?;
                Ok(SpaceExpr::sparse_laurent(weights))
            }
            "gaf" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                Ok(SpaceExpr::hyperbolic_gaf())
            }
            "gef" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                Ok(SpaceExpr::gef())
            }
            "product" | "tensor" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                let mut parts = vec![self.space_expr()?];
                while matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                    self.pos += 1;
                    parts.push(self.space_expr()?);
                }
                self.expect_tok(&Tok::RParen, "`)`")?;
                if name == "tensor" {
                    self.lift(SpaceExpr::tensor(parts), line, col)
                } else {
                    let mut iter = parts.into_iter();
                    let mut acc = iter.next().unwrap();
                    for p in iter {
                        acc = self.lift(SpaceExpr::product(acc, p), line, col)?;
                    }
                    Ok(acc)
                }
            }
            "power" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                let base = self.space_expr()?;
                self.expect_tok(&Tok::Comma, "`,`")?;
                let k = self.integer("exponent")?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                if k <= 0 {
                    return Err(err_at(line, col, "power exponent must be positive"));
                }
                self.lift(SpaceExpr::power(base, k as u32), line, col)
            }
            other => self.lookup_space(other, line, col),
        }
    }

    fn domain_expr(&mut self) -> Result<Domain> {
        let (name, line, col) = self.expect_ident("domain constructor")?;
        let lift = |r: crate::Result<Domain>| r.map_err(|e| err_at(line, col, e.to_string()));
        match name.as_str() {
            "disk" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                let a = self.number("radius or center")?;
                let d = if matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                    self.pos += 1;
                    let b = self.number("center imaginary part")?;
                    self.expect_tok(&Tok::Comma, "`,`")?;
                    let r = self.number("radius")?;
                    Domain::disk(Complex64::new(a, b), r)
                } else {
                    Domain::disk(Complex64::new(0.0, 0.0), a)
                };
                self.expect_tok(&Tok::RParen, "`)`")?;
                lift(d)
            }
            "polydisk" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                let mut disks = Vec::new();
                loop {
                    if matches!(self.peek().map(|s| s.tok.clone()), Some(Tok::Ident(w)) if w == "disk") {
                        let (l, c) = self.here();
                        match self.domain_expr()?.regions() {
                            [CoordRegion::Disk { center, radius }] => disks.push((*center, *radius)),
                            _ => return Err(err_at(l, c, "polydisk factors must be disks")),
                        }
                    } else {
                        let r = self.number("disk radius")?;
                        disks.push((Complex64::new(0.0, 0.0), r));
                    }
                    match self.next("`,` or `)`")? {
                        Spanned { tok: Tok::Comma, .. } => continue,
                        Spanned { tok: Tok::RParen, .. } => break,
                        s => return Err(err_at(s.line, s.col, format!("expected `,` or `)`, found {}", describe(&s.tok)))),
                    }
                }
                lift(Domain::polydisk(disks))
            }
            "annulus" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                let r0 = self.number("inner radius")?;
                self.expect_tok(&Tok::Comma, "`,`")?;
                let r1 = self.number("outer radius")?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                lift(Domain::annulus(r0, r1))
            }
            "rectangle" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                let mut vals = vec![self.number("bound")?];
                while matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                    self.pos += 1;
                    vals.push(self.number("bound")?);
                }
                self.expect_tok(&Tok::RParen, "`)`")?;
                if vals.len() % 4 != 0 {
                    return Err(err_at(line, col, "rectangle takes groups of four bounds (re_lo, re_hi, im_lo, im_hi)"));
                }
                lift(Domain::rectangle(
                    vals.chunks(4).map(|c| (c[0], c[1], c[2], c[3])).collect(),
                ))
            }
            "plane" | "torus" => {
                self.expect_tok(&Tok::LParen, "`(`")?;
                let n = self.integer("dimension")?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                if n <= 0 {
                    return Err(err_at(line, col, "dimension must be positive"));
                }
                lift(if name == "plane" {
                    Domain::plane(n as usize)
                } else {
                    Domain::torus(n as usize)
                })
            }
            other => Err(err_at(line, col, format!("unknown domain constructor `{other}`"))),
        }
    }

    fn support_arg(&mut self) -> Result<LatticeSupport> {
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::LBrace)) {
            self.support_set()
        } else {
            let (name, line, col) = self.expect_ident("support name")?;
            self.lookup_support(&name, line, col)
        }
    }

    fn task_expr(&mut self) -> Result<TaskSpec> {
        let (name, line, col) = self.expect_ident("task constructor")?;
        self.expect_tok(&Tok::LParen, "`(`")?;
        let task = match name.as_str() {
            "expect" | "mixed" => {
                let mut spaces = vec![self.space_expr()?];
                while matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                    self.pos += 1;
                    spaces.push(self.space_expr()?);
                }
                if name == "expect" {
                    TaskSpec::Expect(spaces)
                } else {
                    TaskSpec::Mixed(spaces)
                }
            }
            "mc" => TaskSpec::Mc(self.space_expr()?),
            "grid" => TaskSpec::Grid(self.space_expr()?),
            "weights" => TaskSpec::Weights(self.space_expr()?),
            "bkk" => {
                let mut sups = vec![self.support_arg()?];
                while matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                    self.pos += 1;
                    sups.push(self.support_arg()?);
                }
                TaskSpec::Bkk(sups)
            }
            "kushnirenko" => {
                let sup = self.support_arg()?;
                self.expect_tok(&Tok::Comma, "`,`")?;
                let w = match self.peek().map(|s| s.tok.clone()) {
                    Some(Tok::LBrace) => self.weight_table()?,
                    Some(Tok::Ident(n)) => {
                        let (l, c) = self.here();
                        self.pos += 1;
                        self.lookup_weights(&n, l, c)?
                    }
                    _ => {
                        let (l, c) = self.here();
                        return Err(err_at(l, c, "kushnirenko needs a weights table or name"));
                    }
                };
                TaskSpec::Kushnirenko(sup, w)
            }
            other => return Err(err_at(line, col, format!("unknown task `{other}`"))),
        };
        self.expect_tok(&Tok::RParen, "`)`")?;
        Ok(task)
    }

    fn grid_axes(&mut self) -> Result<Vec<GridAxis>> {
        let mut axes = Vec::new();
        let bracketed = matches!(self.peek().map(|s| &s.tok), Some(Tok::LBracket));
        if bracketed {
            self.pos += 1;
        }
        loop {
            let (name, line, col) = self.expect_ident("`rect`")?;
            if name != "rect" {
                return Err(err_at(line, col, format!("expected `rect`, found `{name}`")));
            }
            self.expect_tok(&Tok::LParen, "`(`")?;
            let re_min = self.number("re_min")?;
            self.expect_tok(&Tok::Comma, "`,`")?;
            let re_max = self.number("re_max")?;
            self.expect_tok(&Tok::Comma, "`,`")?;
            let re_steps = self.integer("re_steps")?;
            self.expect_tok(&Tok::Comma, "`,`")?;
            let im_min = self.number("im_min")?;
            self.expect_tok(&Tok::Comma, "`,`")?;
            let im_max = self.number("im_max")?;
            self.expect_tok(&Tok::Comma, "`,`")?;
            let im_steps = self.integer("im_steps")?;
            self.expect_tok(&Tok::RParen, "`)`")?;
            if re_steps < 1 || im_steps < 1 || !(re_min < re_max) || !(im_min < im_max) {
                return Err(err_at(line, col, "grid axes need min < max and at least one step"));
            }
            axes.push(GridAxis {
                re_min,
                re_max,
                re_steps: re_steps as usize,
                im_min,
                im_max,
                im_steps: im_steps as usize,
            });
            if bracketed && matches!(self.peek().map(|s| &s.tok), Some(Tok::Comma)) {
                self.pos += 1;
                continue;
            }
            break;
        }
        if bracketed {
            self.expect_tok(&Tok::RBracket, "`]`")?;
        }
        Ok(axes)
    }

    fn statement(&mut self) -> Result<()> {
        let (key, line, col) = self.expect_ident("statement keyword")?;
        match key.as_str() {
            "space" => {
                let (name, nline, ncol) = self.expect_ident("space name")?;
                if self.doc.spaces.iter().any(|(n, _)| n == &name) {
                    return Err(err_at(nline, ncol, format!("space `{name}` is already defined")));
                }
                self.expect_tok(&Tok::Eq, "`=`")?;
                let expr = self.space_expr()?;
                self.doc.spaces.push((name, expr));
            }
            "support" => {
                let (name, nline, ncol) = self.expect_ident("support name")?;
                if self.doc.supports.iter().any(|(n, _)| n == &name) {
                    return Err(err_at(nline, ncol, format!("support `{name}` is already defined")));
                }
                self.expect_tok(&Tok::Eq, "`=`")?;
                let sup = self.support_set()?;
                self.doc.supports.push((name, sup));
            }
            "weights" => {
                let (name, nline, ncol) = self.expect_ident("weights name")?;
                if self.doc.weight_tables.iter().any(|(n, _)| n == &name) {
                    return Err(err_at(nline, ncol, format!("weights `{name}` is already defined")));
                }
                self.expect_tok(&Tok::Eq, "`=`")?;
                let w = self.weight_table()?;
                self.doc.weight_tables.push((name, w));
            }
            "domain" => {
                self.expect_tok(&Tok::Eq, "`=`")?;
                let d = self.domain_expr()?;
                self.doc.domain = Some(d);
            }
            "task" => {
                self.expect_tok(&Tok::Eq, "`=`")?;
                let t = self.task_expr()?;
                self.doc.task = Some(t);
            }
            "grid" => {
                self.expect_tok(&Tok::Eq, "`=`")?;
                let axes = self.grid_axes()?;
                self.doc.grid = Some(axes);
            }
            "tol" | "radius" => {
                self.expect_tok(&Tok::Eq, "`=`")?;
                let v = self.number("value")?;
                if key == "tol" {
                    self.doc.tol = Some(v);
                } else {
                    self.doc.radius = Some(v);
                }
            }
            "samples" | "seed" | "threads" | "budget" | "truncation" => {
                self.expect_tok(&Tok::Eq, "`=`")?;
                let v = self.integer("value")?;
                if v < 0 {
                    return Err(err_at(line, col, format!("`{key}` must be nonnegative")));
                }
                match key.as_str() {
                    "samples" => self.doc.samples = Some(v as usize),
                    "seed" => self.doc.seed = Some(v as u64),
                    "threads" => self.doc.threads = Some(v as usize),
                    "budget" => self.doc.budget = Some(v as u64),
                    "truncation" => self.doc.truncation = Some(v as usize),
                    _ => unreachable!(),
                }
            }
            other => {
                return Err(err_at(line, col, format!("unknown statement `{other}`")));
            }
        }
        self.end_statement()
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(w) => format!("`{w}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Float(v) => format!("`{v}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Colon => "`:`".into(),
        Tok::Eq => "`=`".into(),
        Tok::Newline => "end of line".into(),
    }
}

/// Parse a task document. Errors carry 1-based line and column numbers.
pub fn parse_document(text: &str) -> Result<SpecDocument> {
    let toks = tokenize(text)?;
    let mut parser = Parser { toks: &toks, pos: 0, doc: SpecDocument::default() };
    while parser.pos < toks.len() {
        if toks[parser.pos].tok == Tok::Newline {
            parser.pos += 1;
            continue;
        }
        parser.statement()?;
    }
    Ok(parser.doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spaces_domain_and_task() {
        let doc = parse_document(
            "# a combined space\n\
             space e = expspan([0, 1])\n\
             space f = product(e, weyl(3, 1))\n\
             domain = disk(1)\n\
             task = expect(f)\n\
             tol = 1e-9\n",
        )
        .unwrap();
        assert_eq!(doc.spaces.len(), 2);
        assert_eq!(doc.spaces[1].1.to_string(), "product(expspan([0, 1]), weyl(3, 1))");
        assert_eq!(doc.tol, Some(1e-9));
        assert!(matches!(doc.task, Some(TaskSpec::Expect(ref v)) if v.len() == 1));
        assert_eq!(doc.domain.unwrap().dimension(), 1);
    }

    #[test]
    fn parses_supports_weights_and_bkk() {
        let doc = parse_document(
            "support a = {(0, 0), (1, 0), (0, 1)}\n\
             support b = {(0, 0), (2, 0), (0, 2)}\n\
             weights w = {0: 1.0, 3: 2.5}\n\
             task = bkk(a, b)\n",
        )
        .unwrap();
        assert_eq!(doc.supports.len(), 2);
        assert_eq!(doc.weight_tables.len(), 1);
        assert!(matches!(doc.task, Some(TaskSpec::Bkk(ref v)) if v.len() == 2));
    }

    #[test]
    fn parses_complex_frequencies_and_tensor() {
        let doc = parse_document(
            "space e2 = tensor(expspan([0, c(1, 2)]), expspan([(0, 0), (1, 1)]))\n",
        )
        .unwrap();
        assert_eq!(doc.spaces[0].1.nvars(), 3);
    }

    #[test]
    fn roundtrips_display_form() {
        let src = "space f = product(weyl(2, 1), expspan([0, c(1, 2)]))\n";
        let doc = parse_document(src).unwrap();
        let shown = format!("space f = {}\n", doc.spaces[0].1);
        let again = parse_document(&shown).unwrap();
        assert_eq!(doc.spaces[0].1, again.spaces[0].1);
    }

    #[test]
    fn error_positions_are_exact() {
        let err = parse_document("space f = weyl(2, 1)\nspace g = wobble(3)\n").unwrap_err();
        match err {
            Error::Parse { line, col, message } => {
                assert_eq!(line, 2);
                assert_eq!(col, 11);
                assert!(message.contains("wobble"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_statement_keys_are_rejected() {
        let err = parse_document("speed = 3\n").unwrap_err();
        match err {
            Error::Parse { line, col, message } => {
                assert_eq!((line, col), (1, 1));
                assert!(message.contains("unknown statement"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_definitions_are_rejected() {
        let err = parse_document("space f = gef()\nspace f = gaf()\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn trailing_tokens_are_rejected() {
        let err = parse_document("tol = 1e-9 42\n").unwrap_err();
        match err {
            Error::Parse { line: 1, col, .. } => assert_eq!(col, 12),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parses_every_domain_constructor() {
        for (src, dim) in [
            ("domain = disk(0.5, -1, 2)\n", 1),
            ("domain = polydisk(1, disk(0, 0, 1))\n", 2),
            ("domain = annulus(0.5, 1)\n", 1),
            ("domain = rectangle(-1, 1, -2, 2)\n", 1),
            ("domain = rectangle(-1, 1, -2, 2, 0, 1, 0, 1)\n", 2),
            ("domain = plane(1)\n", 1),
            ("domain = torus(2)\n", 2),
        ] {
            let doc = parse_document(src).unwrap();
            assert_eq!(doc.domain.unwrap().dimension(), dim, "{src}");
        }
    }

    #[test]
    fn parses_grid_axes() {
        let doc = parse_document("grid = rect(-1, 1, 20, -1, 1, 20)\n").unwrap();
        assert_eq!(doc.grid.as_ref().unwrap().len(), 1);
        let doc =
            parse_document("grid = [rect(-1, 1, 4, -1, 1, 4), rect(0, 2, 3, 0, 2, 3)]\n").unwrap();
        assert_eq!(doc.grid.unwrap().len(), 2);
    }

    #[test]
    fn kushnirenko_task_with_inline_tables() {
        let doc = parse_document("task = kushnirenko({0, 3}, {0: 1.0, 3: 2.0})\n").unwrap();
        match doc.task {
            Some(TaskSpec::Kushnirenko(sup, w)) => {
                assert_eq!(sup.len(), 2);
                assert_eq!(w.len(), 2);
            }
            other => panic!("unexpected task {other:?}"),
        }
    }
}
