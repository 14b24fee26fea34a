//! Parser and pretty-printer for the DLV-style textual fragment.
//!
//! The grammar is whitespace-insensitive; `%` starts a comment that runs
//! to the end of the line. A statement is `head :- body.` with an
//! optional head (constraint) or an optional body (fact), `|` between
//! disjunctive head literals, `not` for default negation and a `-`
//! prefix (optionally spaced, as in some published listings) for strong
//! negation. There are no integers: `-` is never arithmetic.
//!
//! Predicates are identified by name and arity, so `p` and `p(X, Y)`
//! coexist like they do in DLV. [`parse_program_strict`] additionally
//! rejects programs that use one name with two arities, which the rule
//! generator relies on.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ast::{is_variable_name, Atom, BodyLiteral, Literal, Program, Rule, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    SyntaxError,
    ArityMismatch,
    HeadDefaultNegation,
}

/// A parse problem at a 1-based position in the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl std::fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {:?}: {}", self.line, self.column, self.kind, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Implies, // :-
    Pipe,
    Comma,
    Dot,
    LParen,
    RParen,
    Minus,
    Not,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1, column: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn tokenize(mut self) -> Result<Vec<Token>, ParseDiagnostic> {
        let mut out = Vec::new();
        loop {
            // skip whitespace and comments
            loop {
                match self.chars.peek() {
                    Some(c) if c.is_whitespace() => {
                        self.bump();
                    }
                    Some('%') => {
                        while let Some(c) = self.bump() {
                            if c == '\n' {
                                break;
                            }
                        }
                    }
                    _ => break,
                }
            }
            let (line, column) = (self.line, self.column);
            let Some(&c) = self.chars.peek() else { break };
            let tok = match c {
                '.' => {
                    self.bump();
                    Tok::Dot
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '|' => {
                    self.bump();
                    Tok::Pipe
                }
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                '-' => {
                    self.bump();
                    Tok::Minus
                }
                ':' => {
                    self.bump();
                    if self.chars.peek() == Some(&'-') {
                        self.bump();
                        Tok::Implies
                    } else {
                        return Err(ParseDiagnostic {
                            line,
                            column,
                            kind: DiagnosticKind::SyntaxError,
                            message: "expected `:-`".into(),
                        });
                    }
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some('"') => break,
                            Some(ch) => s.push(ch),
                            None => {
                                return Err(ParseDiagnostic {
                                    line,
                                    column,
                                    kind: DiagnosticKind::SyntaxError,
                                    message: "unterminated string constant".into(),
                                })
                            }
                        }
                    }
                    if s.is_empty() {
                        return Err(ParseDiagnostic {
                            line,
                            column,
                            kind: DiagnosticKind::SyntaxError,
                            message: "empty string constant".into(),
                        });
                    }
                    Tok::Quoted(s)
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut s = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if s == "not" {
                        Tok::Not
                    } else {
                        Tok::Ident(s)
                    }
                }
                other => {
                    return Err(ParseDiagnostic {
                        line,
                        column,
                        kind: DiagnosticKind::SyntaxError,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            };
            out.push(Token { tok, line, column });
        }
        Ok(out)
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// (name, arity, line, column) of every atom, for the strict check.
    atom_sites: Vec<(String, usize, usize, usize)>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (usize, usize) {
        match self.peek() {
            Some(t) => (t.line, t.column),
            None => self
                .tokens
                .last()
                .map(|t| (t.line, t.column))
                .unwrap_or((1, 1)),
        }
    }

    fn error(&self, kind: DiagnosticKind, message: impl Into<String>) -> ParseDiagnostic {
        let (line, column) = self.here();
        ParseDiagnostic { line, column, kind, message: message.into() }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseDiagnostic> {
        match self.peek() {
            Some(t) if t.tok == want => Ok(self.bump().unwrap()),
            _ => Err(self.error(DiagnosticKind::SyntaxError, format!("expected {what}"))),
        }
    }

    /// Skip past the next `.` so later statements still get parsed.
    fn recover(&mut self) {
        while let Some(t) = self.bump() {
            if t.tok == Tok::Dot {
                break;
            }
        }
    }

    fn parse_term(&mut self) -> Result<Term, ParseDiagnostic> {
        match self.bump().map(|t| t.tok) {
            Some(Tok::Ident(name)) => {
                if is_variable_name(&name) {
                    Ok(Term::Variable(name))
                } else {
                    Ok(Term::Constant(name))
                }
            }
            Some(Tok::Quoted(name)) => Ok(Term::Constant(name)),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error(DiagnosticKind::SyntaxError, "expected a term"))
            }
        }
    }

    fn parse_atom(&mut self) -> Result<Atom, ParseDiagnostic> {
        let (line, column) = self.here();
        let name = match self.bump().map(|t| t.tok) {
            Some(Tok::Ident(name)) => name,
            _ => {
                self.pos = self.pos.saturating_sub(1);
                return Err(self.error(DiagnosticKind::SyntaxError, "expected a predicate name"));
            }
        };
        let mut args = Vec::new();
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::LParen)) {
            self.bump();
            loop {
                args.push(self.parse_term()?);
                match self.peek().map(|t| &t.tok) {
                    Some(Tok::Comma) => {
                        self.bump();
                    }
                    Some(Tok::RParen) => {
                        self.bump();
                        break;
                    }
                    _ => return Err(self.error(DiagnosticKind::SyntaxError, "expected `,` or `)`")),
                }
            }
        }
        self.atom_sites.push((name.clone(), args.len(), line, column));
        Ok(Atom::new(name, args))
    }

    fn parse_literal(&mut self) -> Result<Literal, ParseDiagnostic> {
        let strong_neg = if matches!(self.peek().map(|t| &t.tok), Some(Tok::Minus)) {
            self.bump();
            true
        } else {
            false
        };
        Ok(Literal { atom: self.parse_atom()?, strong_neg })
    }

    fn parse_body_literal(&mut self) -> Result<BodyLiteral, ParseDiagnostic> {
        let default_neg = if matches!(self.peek().map(|t| &t.tok), Some(Tok::Not)) {
            self.bump();
            true
        } else {
            false
        };
        Ok(BodyLiteral { literal: self.parse_literal()?, default_neg })
    }

    fn parse_statement(&mut self) -> Result<Rule, ParseDiagnostic> {
        let mut head = Vec::new();
        if !matches!(self.peek().map(|t| &t.tok), Some(Tok::Implies)) {
            loop {
                if matches!(self.peek().map(|t| &t.tok), Some(Tok::Not)) {
                    return Err(self.error(
                        DiagnosticKind::HeadDefaultNegation,
                        "`not` cannot appear in a rule head",
                    ));
                }
                head.push(self.parse_literal()?);
                match self.peek().map(|t| &t.tok) {
                    Some(Tok::Pipe) => {
                        self.bump();
                    }
                    _ => break,
                }
            }
        }
        let mut body = Vec::new();
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::Implies)) {
            self.bump();
            if !matches!(self.peek().map(|t| &t.tok), Some(Tok::Dot)) {
                loop {
                    body.push(self.parse_body_literal()?);
                    match self.peek().map(|t| &t.tok) {
                        Some(Tok::Comma) => {
                            self.bump();
                        }
                        _ => break,
                    }
                }
            }
        }
        self.expect(Tok::Dot, "`.` at end of statement")?;
        Ok(Rule::new(head, body))
    }
}

/// Parse a full program. On failure the diagnostics contain the first
/// error of every offending statement.
pub fn parse_program(text: &str) -> Result<Program, Vec<ParseDiagnostic>> {
    parse_inner(text, false)
}

/// Like [`parse_program`] but additionally requires every predicate name
/// to be used with a single arity.
pub fn parse_program_strict(text: &str) -> Result<Program, Vec<ParseDiagnostic>> {
    parse_inner(text, true)
}

fn parse_inner(text: &str, strict_arity: bool) -> Result<Program, Vec<ParseDiagnostic>> {
    let tokens = match Lexer::new(text).tokenize() {
        Ok(tokens) => tokens,
        Err(diag) => return Err(vec![diag]),
    };
    let mut parser = Parser { tokens, pos: 0, atom_sites: Vec::new() };
    let mut statements = Vec::new();
    let mut diagnostics = Vec::new();
    while parser.peek().is_some() {
        match parser.parse_statement() {
            Ok(rule) => statements.push(rule),
            Err(diag) => {
                diagnostics.push(diag);
                parser.recover();
            }
        }
    }
    if strict_arity {
        let mut arities: HashMap<String, (usize, usize, usize)> = HashMap::new();
        for (name, arity, line, column) in &parser.atom_sites {
            match arities.get(name) {
                None => {
                    arities.insert(name.clone(), (*arity, *line, *column));
                }
                Some((first, _, _)) if first != arity => {
                    diagnostics.push(ParseDiagnostic {
                        line: *line,
                        column: *column,
                        kind: DiagnosticKind::ArityMismatch,
                        message: format!(
                            "predicate `{name}` used with arity {arity} but first seen with arity {first}"
                        ),
                    });
                }
                Some(_) => {}
            }
        }
    }
    if diagnostics.is_empty() {
        Ok(Program::new(statements))
    } else {
        Err(diagnostics)
    }
}

/// Parse a single literal such as `p("a")` or `-fly(tweety)`.
pub fn parse_literal(text: &str) -> Result<Literal, ParseDiagnostic> {
    let tokens = Lexer::new(text).tokenize().map_err(|d| d)?;
    let mut parser = Parser { tokens, pos: 0, atom_sites: Vec::new() };
    let lit = parser.parse_literal()?;
    // tolerate one trailing dot
    if matches!(parser.peek().map(|t| &t.tok), Some(Tok::Dot)) {
        parser.bump();
    }
    if parser.peek().is_some() {
        return Err(parser.error(DiagnosticKind::SyntaxError, "trailing input after literal"));
    }
    Ok(lit)
}

/// Parse a ground atom such as `fly("Tweety")`.
pub fn parse_ground_atom(text: &str) -> Result<Atom, ParseDiagnostic> {
    let lit = parse_literal(text)?;
    if lit.strong_neg {
        return Err(ParseDiagnostic {
            line: 1,
            column: 1,
            kind: DiagnosticKind::SyntaxError,
            message: "expected an atom, found a strongly negated literal".into(),
        });
    }
    if !lit.atom.is_ground() {
        return Err(ParseDiagnostic {
            line: 1,
            column: 1,
            kind: DiagnosticKind::SyntaxError,
            message: "atom must be ground".into(),
        });
    }
    Ok(lit.atom)
}

/// Render a program in the interchange format: facts first, one
/// statement per line. `parse_program(print_program(p))` reproduces `p`
/// up to canonical ordering.
pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for rule in program.statements() {
        let _ = writeln!(out, "{rule}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_paper_rule() {
        let p = parse_program("fly(X) :- bird(X), not -fly(X).").unwrap();
        assert_eq!(p.rules.len(), 1);
        let rule = &p.rules[0];
        assert_eq!(rule.head.len(), 1);
        assert_eq!(rule.head[0].to_string(), "fly(X)");
        assert_eq!(rule.body.len(), 2);
        assert_eq!(rule.body[0].to_string(), "bird(X)");
        assert_eq!(rule.body[1].to_string(), "not -fly(X)");
    }

    #[test]
    fn parses_zero_arity_fact() {
        let p = parse_program("smoke.").unwrap();
        assert_eq!(p.facts.len(), 1);
        assert_eq!(p.facts[0].to_string(), "smoke.");
    }

    #[test]
    fn parses_two_rules_on_one_line() {
        let p = parse_program("p :- not q. q :- not p.").unwrap();
        assert_eq!(p.rules.len(), 2);
    }

    #[test]
    fn parses_constraint_and_disjunction() {
        let p = parse_program(":- fly(X), penguin(X).\na | b :- d.\n").unwrap();
        assert_eq!(p.rules.len(), 2);
        assert!(p.rules[0].is_constraint());
        assert!(p.rules[1].is_disjunctive());
    }

    #[test]
    fn accepts_spaced_strong_negation() {
        let p = parse_program("- wall(\"Savannah\", \"Matthew\").").unwrap();
        assert_eq!(p.facts.len(), 1);
        assert!(p.facts[0].head[0].strong_neg);
    }

    #[test]
    fn uppercase_predicates_and_quoted_constants() {
        let p = parse_program("CanFly(A) :- Bird(A), not Abnormal(A).\nBird(\"Tweety\").").unwrap();
        assert_eq!(p.facts.len(), 1);
        assert_eq!(p.rules.len(), 1);
        assert_eq!(p.facts[0].to_string(), "Bird(\"Tweety\").");
        assert_eq!(p.rules[0].variables(), vec!["A".to_string()]);
    }

    #[test]
    fn comments_are_skipped() {
        let p = parse_program("% a comment\np(a). % trailing\n").unwrap();
        assert_eq!(p.facts.len(), 1);
    }

    #[test]
    fn head_default_negation_is_reported() {
        let err = parse_program("not p :- q.").unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].kind, DiagnosticKind::HeadDefaultNegation);
        assert_eq!((err[0].line, err[0].column), (1, 1));
    }

    #[test]
    fn syntax_error_positions_are_one_based() {
        let err = parse_program("p(a)\nq(b).").unwrap_err();
        assert_eq!(err[0].kind, DiagnosticKind::SyntaxError);
        assert_eq!(err[0].line, 2);
    }

    #[test]
    fn one_error_per_statement_with_recovery() {
        let err = parse_program("p(.\nq(b).\nr(.").unwrap_err();
        assert_eq!(err.len(), 2);
    }

    #[test]
    fn mixed_arity_is_fine_by_default_but_strict_rejects() {
        let text = "- ledger.\nledger(V0, V2) :- not -star(V0, V2), - france(V0, V2).";
        let p = parse_program(text).unwrap();
        assert!(p.predicates().contains(&("ledger".to_string(), 0)));
        assert!(p.predicates().contains(&("ledger".to_string(), 2)));

        let err = parse_program_strict(text).unwrap_err();
        assert!(err.iter().any(|d| d.kind == DiagnosticKind::ArityMismatch));
    }

    #[test]
    fn print_examples() {
        // constant identity is string identity after unquoting, so a
        // quoted lowercase constant reprints bare
        let p = parse_program("p(\"a\").").unwrap();
        assert_eq!(print_program(&p), "p(a).\n");
        let p = parse_program("p(\"Tweety\").").unwrap();
        assert_eq!(print_program(&p), "p(\"Tweety\").\n");

        let p = parse_program(":- p(X), q(X).").unwrap();
        assert_eq!(print_program(&p), ":- p(X), q(X).\n");

        let p = parse_program("a|b:-d.").unwrap();
        assert_eq!(print_program(&p), "a | b :- d.\n");
    }

    #[test]
    fn roundtrip_prints_facts_first() {
        let text = "r(X) :- p(X), not q(X).\np(a).\n-q(b).\n";
        let p = parse_program(text).unwrap();
        let printed = print_program(&p);
        assert_eq!(printed, "p(a).\n-q(b).\nr(X) :- p(X), not q(X).\n");
        let reparsed = parse_program(&printed).unwrap();
        assert_eq!(p.canonical(), reparsed.canonical());
    }

    #[test]
    fn parse_literal_helper() {
        let lit = parse_literal(" -q( \"b\" ) ").unwrap();
        assert_eq!(lit.to_string(), "-q(b)");
        assert!(parse_literal("p(a), q(b)").is_err());
        let atom = parse_ground_atom("fly(tweety)").unwrap();
        assert_eq!(atom.to_string(), "fly(tweety)");
        assert!(parse_ground_atom("fly(X)").is_err());
    }
}
