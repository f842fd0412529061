//! Concrete syntax. See the grammar in the repository README.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraint::{CAtom, Constraint, Universe};
use crate::error::{Error, Pos, Result};
use crate::formula::{to_prenex_dnf, Formula, QuantifiedFormula};
use crate::program::{normalize_atom, Database, Goal, PredInfo, PredKind, Rule};
use crate::term::{Atom, Const, Fresh, GroundAtom, Literal, Sign, Sym, Term, UpdateAtom, Var};

#[derive(Clone, PartialEq, Eq, Debug)]
enum Tok {
    Ident(String),
    Var(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Semi,
    Slash,
    Hash,
    If,
    Query,
    Eq,
    Neq,
    Plus,
    Minus,
    Diamond,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Hash => "`#`".into(),
            Tok::If => "`:-`".into(),
            Tok::Query => "`?-`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Neq => "`!=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Diamond => "`|>`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let next = chars.get(i + 1).copied();
        let mut adv = 1;
        match c {
            '\n' => {
                line += 1;
                col = 0;
            }
            c if c.is_whitespace() => {}
            '%' => {
                while i + adv < chars.len() && chars[i + adv] != '\n' {
                    adv += 1;
                }
            }
            c if c.is_alphanumeric() || c == '_' => {
                while i + adv < chars.len() && (chars[i + adv].is_alphanumeric() || chars[i + adv] == '_') {
                    adv += 1;
                }
                let word: String = chars[i..i + adv].iter().collect();
                if c.is_uppercase() || c == '_' {
                    out.push((Tok::Var(word), pos));
                } else {
                    out.push((Tok::Ident(word), pos));
                }
            }
            '(' => out.push((Tok::LParen, pos)),
            ')' => out.push((Tok::RParen, pos)),
            ',' => out.push((Tok::Comma, pos)),
            '.' => out.push((Tok::Dot, pos)),
            ';' => out.push((Tok::Semi, pos)),
            '/' => out.push((Tok::Slash, pos)),
            '#' => out.push((Tok::Hash, pos)),
            '=' => out.push((Tok::Eq, pos)),
            '+' => out.push((Tok::Plus, pos)),
            '-' => out.push((Tok::Minus, pos)),
            ':' if next == Some('-') => {
                out.push((Tok::If, pos));
                adv = 2;
            }
            '?' if next == Some('-') => {
                out.push((Tok::Query, pos));
                adv = 2;
            }
            '!' if next == Some('=') => {
                out.push((Tok::Neq, pos));
                adv = 2;
            }
            '|' if next == Some('>') => {
                out.push((Tok::Diamond, pos));
                adv = 2;
            }
            other => {
                return Err(Error::Syntax {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
        i += adv;
        col += adv;
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[derive(Clone, Debug)]
struct RawAtom {
    atom: Atom,
    pos: Pos,
}

#[derive(Clone, Debug)]
enum Item {
    Lit(bool, RawAtom),
    Upd(Sign, RawAtom),
    Cons(CAtom),
    True,
    False,
}

#[derive(Clone, Debug)]
struct RawTail {
    prefix: Vec<(bool, Var)>,
    disjuncts: Vec<Vec<Item>>,
}

#[derive(Clone, Debug)]
struct RawClause {
    head: RawAtom,
    body: Option<Vec<Item>>,
    tail: Option<RawTail>,
}

enum Stmt {
    Domain(Vec<Const>),
    Extensional(Vec<(String, usize, Pos)>),
    Clause(RawClause),
    Goal(Vec<Item>, Pos),
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            msg: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.error(what)
        }
    }

    fn statement(&mut self) -> Result<Stmt> {
        match self.peek().clone() {
            Tok::Hash => {
                self.bump();
                let pos = self.pos();
                match self.bump() {
                    Tok::Ident(d) if d == "domain" => {
                        let mut consts = vec![self.constant()?];
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            consts.push(self.constant()?);
                        }
                        self.expect(Tok::Dot, "`.`")?;
                        Ok(Stmt::Domain(consts))
                    }
                    Tok::Ident(d) if d == "extensional" => {
                        let mut preds = vec![self.pred_spec()?];
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            preds.push(self.pred_spec()?);
                        }
                        self.expect(Tok::Dot, "`.`")?;
                        Ok(Stmt::Extensional(preds))
                    }
                    _ => Err(Error::Syntax {
                        pos,
                        msg: "expected `domain` or `extensional` after `#`".into(),
                    }),
                }
            }
            Tok::Query => {
                let pos = self.pos();
                self.bump();
                let items = self.items()?;
                self.expect(Tok::Dot, "`,` or `.`")?;
                Ok(Stmt::Goal(items, pos))
            }
            Tok::Ident(_) => {
                let head = self.atom()?;
                let mut clause = RawClause {
                    head,
                    body: None,
                    tail: None,
                };
                if *self.peek() == Tok::If {
                    self.bump();
                    clause.body = Some(self.items()?);
                    if *self.peek() == Tok::Diamond {
                        self.bump();
                        clause.tail = Some(self.tail()?);
                    }
                }
                self.expect(Tok::Dot, if clause.body.is_some() { "`,`, `|>` or `.`" } else { "`:-` or `.`" })?;
                Ok(Stmt::Clause(clause))
            }
            _ => self.error("a clause, a goal or a directive"),
        }
    }

    fn constant(&mut self) -> Result<Const> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Const::new(&s))
            }
            _ => self.error("a constant"),
        }
    }

    fn pred_spec(&mut self) -> Result<(String, usize, Pos)> {
        let pos = self.pos();
        let Tok::Ident(p) = self.peek().clone() else {
            return self.error("a predicate name");
        };
        self.bump();
        self.expect(Tok::Slash, "`/`")?;
        match self.peek().clone() {
            Tok::Ident(n) if n.chars().all(|c| c.is_ascii_digit()) => {
                self.bump();
                Ok((p, n.parse().unwrap_or(0), pos))
            }
            _ => self.error("an arity"),
        }
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Term::constant(&s))
            }
            Tok::Var(s) => {
                self.bump();
                Ok(Term::var(&s))
            }
            _ => self.error("a term"),
        }
    }

    fn atom(&mut self) -> Result<RawAtom> {
        let pos = self.pos();
        let Tok::Ident(p) = self.peek().clone() else {
            return self.error("a predicate");
        };
        self.bump();
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            args.push(self.term()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`,` or `)`")?;
        }
        Ok(RawAtom {
            atom: Atom::new(&p, args),
            pos,
        })
    }

    fn item(&mut self) -> Result<Item> {
        let t = self.peek().clone();
        let t2 = self.peek2().clone();
        let comparison = matches!(t2, Tok::Eq | Tok::Neq);
        match t {
            Tok::Plus | Tok::Minus => {
                self.bump();
                let sign = if t == Tok::Plus { Sign::Insert } else { Sign::Delete };
                Ok(Item::Upd(sign, self.atom()?))
            }
            Tok::Ident(ref s) if s == "not" && matches!(t2, Tok::Ident(_)) => {
                self.bump();
                Ok(Item::Lit(false, self.atom()?))
            }
            Tok::Ident(ref s) if s == "true" && !comparison && t2 != Tok::LParen => {
                self.bump();
                Ok(Item::True)
            }
            Tok::Ident(ref s) if s == "false" && !comparison && t2 != Tok::LParen => {
                self.bump();
                Ok(Item::False)
            }
            Tok::Var(_) | Tok::Ident(_) if comparison => {
                let a = self.term()?;
                let op = self.bump();
                let b = self.term()?;
                Ok(Item::Cons(if op == Tok::Eq { CAtom::Eq(a, b) } else { CAtom::Neq(a, b) }))
            }
            Tok::Ident(_) => Ok(Item::Lit(true, self.atom()?)),
            _ => self.error("a literal, an update or a constraint"),
        }
    }

    fn items(&mut self) -> Result<Vec<Item>> {
        let mut items = vec![self.item()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn tail(&mut self) -> Result<RawTail> {
        let mut prefix = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Ident(q) if q == "forall" || q == "exists" => {
                    self.bump();
                    let mut any = false;
                    while let Tok::Var(v) = self.peek().clone() {
                        self.bump();
                        prefix.push((q == "forall", Var::new(&v)));
                        any = true;
                    }
                    if !any {
                        return self.error("a quantified variable");
                    }
                }
                _ => break,
            }
        }
        if prefix.is_empty() {
            if let Tok::Ident(s) = self.peek().clone() {
                if s == "true" || s == "false" {
                    self.bump();
                    let disjuncts = if s == "true" { vec![vec![Item::True]] } else { vec![] };
                    return Ok(RawTail { prefix, disjuncts });
                }
            }
        }
        self.expect(Tok::LParen, "`(`")?;
        let mut disjuncts = vec![self.items()?];
        while *self.peek() == Tok::Semi {
            self.bump();
            disjuncts.push(self.items()?);
        }
        self.expect(Tok::RParen, "`,`, `;` or `)`")?;
        for d in &disjuncts {
            for i in d {
                if let Item::Upd(_, a) = i {
                    return Err(Error::Syntax {
                        pos: a.pos,
                        msg: "update atoms are not allowed in a tail".into(),
                    });
                }
            }
        }
        Ok(RawTail { prefix, disjuncts })
    }
}

fn parse_statements(text: &str) -> Result<Vec<(Stmt, Pos)>> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        let pos = p.pos();
        out.push((p.statement()?, pos));
    }
    Ok(out)
}

fn item_vars(items: &[Item], out: &mut Vec<Var>) {
    for i in items {
        match i {
            Item::Lit(_, a) | Item::Upd(_, a) => out.extend(a.atom.vars().cloned()),
            Item::Cons(c) => {
                let (x, y) = c.terms();
                out.extend(x.as_var().cloned());
                out.extend(y.as_var().cloned());
            }
            Item::True | Item::False => {}
        }
    }
}

fn item_consts(items: &[Item], out: &mut BTreeSet<Const>) {
    for i in items {
        match i {
            Item::Lit(_, a) | Item::Upd(_, a) => out.extend(a.atom.args.iter().filter_map(|t| t.as_const().cloned())),
            Item::Cons(c) => {
                let (x, y) = c.terms();
                out.extend(x.as_const().cloned());
                out.extend(y.as_const().cloned());
            }
            Item::True | Item::False => {}
        }
    }
}

struct Body {
    constraint: Constraint,
    updates: Vec<UpdateAtom>,
    body: Vec<Literal>,
}

fn build_body(items: &[Item], fresh: &mut Fresh, eqs: &mut Vec<CAtom>) -> Body {
    let mut updates = Vec::new();
    let mut body = Vec::new();
    let mut falsum = false;
    for i in items {
        match i {
            Item::Lit(pos, a) => body.push(Literal {
                positive: *pos,
                atom: normalize_atom(&a.atom, fresh, eqs),
            }),
            Item::Upd(sign, a) => updates.push(UpdateAtom {
                sign: *sign,
                atom: a.atom.clone(),
            }),
            Item::Cons(c) => eqs.push(c.clone()),
            Item::True => {}
            Item::False => falsum = true,
        }
    }
    let constraint = if falsum { Constraint::falsum() } else { Constraint::from_atoms(eqs.iter()) };
    Body {
        constraint,
        updates,
        body,
    }
}

fn build_tail(raw: &RawTail, fresh: &mut Fresh, universe: &Universe) -> Option<QuantifiedFormula> {
    let disjuncts = raw
        .disjuncts
        .iter()
        .map(|d| {
            Formula::And(
                d.iter()
                    .map(|i| match i {
                        Item::Lit(pos, a) => Formula::Lit(Literal {
                            positive: *pos,
                            atom: a.atom.clone(),
                        }),
                        Item::Cons(c) => Formula::Cons(c.clone()),
                        Item::True => Formula::True,
                        Item::False | Item::Upd(..) => Formula::False,
                    })
                    .collect(),
            )
        })
        .collect();
    let f = raw.prefix.iter().rev().fold(Formula::Or(disjuncts), |f, (all, v)| {
        if *all {
            Formula::forall(vec![v.clone()], f)
        } else {
            Formula::exists(vec![v.clone()], f)
        }
    });
    let q = to_prenex_dnf(f, fresh, universe);
    if q.is_true() {
        None
    } else {
        Some(q)
    }
}

struct Kinds {
    preds: BTreeMap<Sym, PredInfo>,
}

impl Kinds {
    fn arity(&mut self, a: &Atom, pos: Pos, kind: Option<PredKind>) -> Result<()> {
        match self.preds.get_mut(&a.pred) {
            None => {
                self.preds.insert(
                    a.pred.clone(),
                    PredInfo {
                        arity: a.arity(),
                        kind: kind.unwrap_or(PredKind::Extensional),
                    },
                );
            }
            Some(i) if i.arity != a.arity() => {
                return Err(Error::Arity {
                    pos,
                    pred: a.pred.to_string(),
                    expected: i.arity,
                    found: a.arity(),
                })
            }
            Some(_) => {}
        }
        Ok(())
    }
}

/// Parses a database. Nothing is loaded if any error is found.
pub fn parse_program(text: &str) -> Result<Database> {
    let stmts = parse_statements(text)?;
    let mut domain = BTreeSet::new();
    let mut consts = BTreeSet::new();
    let mut var_names = Vec::new();
    let mut intensional: BTreeMap<Sym, Pos> = BTreeMap::new();
    for (s, _) in &stmts {
        match s {
            Stmt::Domain(cs) => domain.extend(cs.iter().cloned()),
            Stmt::Clause(c) => {
                consts.extend(c.head.atom.args.iter().filter_map(|t| t.as_const().cloned()));
                var_names.extend(c.head.atom.vars().cloned());
                if let Some(b) = &c.body {
                    intensional.entry(c.head.atom.pred.clone()).or_insert(c.head.pos);
                    item_consts(b, &mut consts);
                    item_vars(b, &mut var_names);
                }
                if let Some(t) = &c.tail {
                    var_names.extend(t.prefix.iter().map(|(_, v)| v.clone()));
                    for d in &t.disjuncts {
                        item_consts(d, &mut consts);
                        item_vars(d, &mut var_names);
                    }
                }
            }
            Stmt::Goal(_, pos) => {
                return Err(Error::Syntax {
                    pos: *pos,
                    msg: "goals are not allowed in a program".into(),
                })
            }
            Stmt::Extensional(_) => {}
        }
    }
    consts.extend(domain.iter().cloned());
    let universe = Universe::new(consts);
    let mut fresh = Fresh::avoiding(var_names.iter());

    // Explicitly extensional predicates: facts, update atoms, directives.
    let mut kinds = Kinds { preds: BTreeMap::new() };
    let explicit_ext = |pred: &Sym, pos: Pos, is_update: bool| -> Result<()> {
        if intensional.contains_key(pred) {
            return Err(if is_update {
                Error::UpdateOnIntensional {
                    pos,
                    pred: pred.to_string(),
                }
            } else {
                Error::KindClash {
                    pos,
                    pred: pred.to_string(),
                }
            });
        }
        Ok(())
    };
    for (s, _) in &stmts {
        match s {
            Stmt::Extensional(ps) => {
                for (p, n, pos) in ps {
                    let a = Atom::new(p, (0..*n).map(|i| Term::var(&format!("X{i}"))).collect());
                    explicit_ext(&a.pred, *pos, false)?;
                    kinds.arity(&a, *pos, Some(PredKind::Extensional))?;
                }
            }
            Stmt::Clause(c) => {
                let head_kind = if c.body.is_some() { PredKind::Intensional } else { PredKind::Extensional };
                if c.body.is_none() {
                    explicit_ext(&c.head.atom.pred, c.head.pos, false)?;
                }
                kinds.arity(&c.head.atom, c.head.pos, Some(head_kind))?;
                let mut all: Vec<&Item> = c.body.iter().flatten().collect();
                if let Some(t) = &c.tail {
                    all.extend(t.disjuncts.iter().flatten());
                }
                for i in all {
                    match i {
                        Item::Upd(_, a) => {
                            explicit_ext(&a.atom.pred, a.pos, true)?;
                            kinds.arity(&a.atom, a.pos, Some(PredKind::Extensional))?;
                        }
                        Item::Lit(_, a) => {
                            let k = if intensional.contains_key(&a.atom.pred) {
                                PredKind::Intensional
                            } else {
                                PredKind::Extensional
                            };
                            kinds.arity(&a.atom, a.pos, Some(k))?;
                        }
                        _ => {}
                    }
                }
            }
            _ => {}
        }
    }

    let mut db = Database {
        domain,
        preds: kinds.preds,
        ..Database::default()
    };
    for (s, _) in stmts {
        let Stmt::Clause(c) = s else { continue };
        match c.body {
            None => match c.head.atom.to_ground() {
                Some(g) => {
                    db.facts.insert(g);
                }
                None => {
                    return Err(Error::NonGroundFact {
                        pos: c.head.pos,
                        fact: c.head.atom.to_string(),
                    })
                }
            },
            Some(items) => {
                let mut eqs = Vec::new();
                let head = normalize_atom(&c.head.atom, &mut fresh, &mut eqs);
                let b = build_body(&items, &mut fresh, &mut eqs);
                let tail = c.tail.as_ref().and_then(|t| build_tail(t, &mut fresh, &universe));
                db.rules.push(Rule {
                    head,
                    constraint: b.constraint,
                    updates: b.updates,
                    body: b.body,
                    tail,
                });
            }
        }
    }
    Ok(db)
}

/// Parses `?- ... .`; the `?-` prefix and the final dot are optional.
pub fn parse_goal(text: &str) -> Result<Goal> {
    let trimmed = text.trim();
    let mut src = String::new();
    if !trimmed.starts_with("?-") {
        src.push_str("?- ");
    }
    src.push_str(trimmed);
    if !trimmed.ends_with('.') {
        src.push('.');
    }
    let stmts = parse_statements(&src)?;
    let [(Stmt::Goal(items, _), _)] = stmts.as_slice() else {
        return Err(Error::Syntax {
            pos: Pos { line: 1, col: 1 },
            msg: "expected exactly one goal".into(),
        });
    };
    let mut names = Vec::new();
    item_vars(items, &mut names);
    let mut fresh = Fresh::avoiding(names.iter());
    let mut eqs = Vec::new();
    let b = build_body(items, &mut fresh, &mut eqs);
    Ok(Goal {
        constraint: b.constraint,
        updates: b.updates,
        body: b.body,
    })
}

/// Parses a fact file: ground facts and `#domain` directives only.
pub fn parse_facts(text: &str) -> Result<(BTreeSet<GroundAtom>, BTreeSet<Const>)> {
    let mut facts = BTreeSet::new();
    let mut domain = BTreeSet::new();
    let mut arities: BTreeMap<Sym, usize> = BTreeMap::new();
    for (s, pos) in parse_statements(text)? {
        match s {
            Stmt::Domain(cs) => domain.extend(cs),
            Stmt::Clause(RawClause { head, body: None, .. }) => {
                let Some(g) = head.atom.to_ground() else {
                    return Err(Error::NonGroundFact {
                        pos: head.pos,
                        fact: head.atom.to_string(),
                    });
                };
                let n = *arities.entry(g.pred.clone()).or_insert(g.args.len());
                if n != g.args.len() {
                    return Err(Error::Arity {
                        pos: head.pos,
                        pred: g.pred.to_string(),
                        expected: n,
                        found: g.args.len(),
                    });
                }
                facts.insert(g);
            }
            _ => return Err(Error::NotAFact { pos }),
        }
    }
    Ok((facts, domain))
}
