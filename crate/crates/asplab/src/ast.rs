//! Core syntax of the supported ASP fragment: terms, atoms, literals,
//! rules, programs and answer sets, with the canonical ordering used
//! everywhere downstream (grounding, solving, evaluation).
//!
//! All types are immutable after construction and cheap to clone.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AstError {
    #[error("literal is not ground: {0}")]
    NonGroundLiteral(String),
    #[error("set contains both {0} and its strong negation")]
    Inconsistent(String),
}

/// A term is either a constant or a variable. Variables start with an
/// uppercase letter; everything else is a constant. Constants are stored
/// unquoted and get quoted on output when they do not look like a bare
/// lowercase identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Constant(String),
    Variable(String),
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Self {
        let name = name.into();
        debug_assert!(!name.is_empty(), "constant names must be nonempty");
        debug_assert!(!name.contains('"'), "constant names must not contain quotes");
        Term::Constant(name)
    }

    pub fn variable(name: impl Into<String>) -> Self {
        let name = name.into();
        debug_assert!(is_variable_name(&name), "invalid variable name: {name}");
        Term::Variable(name)
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Constant(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Constant(s) | Term::Variable(s) => s,
        }
    }
}

pub fn is_variable_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// True when a constant can be printed without quotes.
pub fn is_bare_constant(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Constant(s) if is_bare_constant(s) => f.write_str(s),
            Term::Constant(s) => write!(f, "\"{s}\""),
            Term::Variable(s) => f.write_str(s),
        }
    }
}

/// A predicate applied to terms, e.g. `fly(X)` or the 0-ary `smoke`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { predicate: predicate.into(), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Variable(v) => Some(v.as_str()),
            Term::Constant(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, arg) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{arg}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// An atom with an optional strong (classical) negation prefix `-`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub strong_neg: bool,
}

impl Literal {
    pub fn positive(atom: Atom) -> Self {
        Literal { atom, strong_neg: false }
    }

    pub fn negative(atom: Atom) -> Self {
        Literal { atom, strong_neg: true }
    }

    /// `p` <-> `-p`.
    pub fn complement(&self) -> Literal {
        Literal { atom: self.atom.clone(), strong_neg: !self.strong_neg }
    }

    pub fn is_ground(&self) -> bool {
        self.atom.is_ground()
    }
}

// Answer sets serialize sorted by (predicate, sign, args); the derived
// ordering would compare args before the sign, so spell it out.
impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.atom
            .predicate
            .cmp(&other.atom.predicate)
            .then(self.strong_neg.cmp(&other.strong_neg))
            .then_with(|| self.atom.args.cmp(&other.atom.args))
    }
}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.strong_neg {
            f.write_str("-")?;
        }
        write!(f, "{}", self.atom)
    }
}

/// A body occurrence of a literal, with optional default negation `not`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BodyLiteral {
    pub literal: Literal,
    pub default_neg: bool,
}

impl BodyLiteral {
    pub fn plain(literal: Literal) -> Self {
        BodyLiteral { literal, default_neg: false }
    }

    pub fn not(literal: Literal) -> Self {
        BodyLiteral { literal, default_neg: true }
    }
}

impl fmt::Display for BodyLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.default_neg {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.literal)
    }
}

/// Toggle both the strong and the default negation of a body literal:
/// `not p` becomes `-p`, `not -p` becomes `p`, and vice versa. This is an
/// involution and the only rewrite the rule repair step is allowed to use.
pub fn negation_flip(b: &BodyLiteral) -> BodyLiteral {
    BodyLiteral {
        literal: Literal { atom: b.literal.atom.clone(), strong_neg: !b.literal.strong_neg },
        default_neg: !b.default_neg,
    }
}

/// `head :- body.` An empty head is an integrity constraint, a head with
/// two or more literals is disjunctive, and a single ground head with an
/// empty body is a fact. Duplicate head/body entries are dropped at
/// construction; the semantics are set-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub head: Vec<Literal>,
    pub body: Vec<BodyLiteral>,
}

impl Rule {
    pub fn new(head: Vec<Literal>, body: Vec<BodyLiteral>) -> Self {
        Rule { head: dedup_preserving(head), body: dedup_preserving(body) }
    }

    pub fn fact(literal: Literal) -> Self {
        debug_assert!(literal.is_ground(), "facts must be ground");
        Rule { head: vec![literal], body: Vec::new() }
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_empty()
    }

    pub fn is_disjunctive(&self) -> bool {
        self.head.len() >= 2
    }

    pub fn is_fact(&self) -> bool {
        self.head.len() == 1 && self.body.is_empty() && self.is_ground()
    }

    pub fn is_ground(&self) -> bool {
        self.head.iter().all(Literal::is_ground)
            && self.body.iter().all(|b| b.literal.is_ground())
    }

    /// All distinct variable names, head first, in order of appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let head_vars = self.head.iter().flat_map(|l| l.atom.variables());
        let body_vars = self.body.iter().flat_map(|b| b.literal.atom.variables());
        for v in head_vars.chain(body_vars) {
            if seen.insert(v.to_string()) {
                out.push(v.to_string());
            }
        }
        out
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.head.iter().map(|l| &l.atom).chain(self.body.iter().map(|b| &b.literal.atom))
    }
}

fn dedup_preserving<T: Clone + Eq + std::hash::Hash>(items: Vec<T>) -> Vec<T> {
    let mut seen = std::collections::HashSet::new();
    items.into_iter().filter(|x| seen.insert(x.clone())).collect()
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, h) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{h}")?;
        }
        if !self.body.is_empty() || self.head.is_empty() {
            if self.head.is_empty() {
                f.write_str(":-")?;
            } else {
                f.write_str(" :-")?;
            }
            for (i, b) in self.body.iter().enumerate() {
                f.write_str(if i > 0 { ", " } else { " " })?;
                write!(f, "{b}")?;
            }
        }
        f.write_str(".")
    }
}

/// A program split into fact-shaped statements and proper rules.
///
/// Predicates are identified by name and arity, as in DLV: `p` and
/// `p(X, Y)` are distinct predicates and may coexist. The signature table
/// records every (name, arity) pair in use.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub facts: Vec<Rule>,
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn new(statements: impl IntoIterator<Item = Rule>) -> Self {
        let mut program = Program::default();
        for statement in statements {
            program.push(statement);
        }
        program
    }

    pub fn push(&mut self, statement: Rule) {
        if statement.is_fact() {
            self.facts.push(statement);
        } else {
            self.rules.push(statement);
        }
    }

    /// Facts first, then rules, as printed.
    pub fn statements(&self) -> impl Iterator<Item = &Rule> {
        self.facts.iter().chain(self.rules.iter())
    }

    pub fn len(&self) -> usize {
        self.facts.len() + self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty() && self.rules.is_empty()
    }

    /// Predicate name -> set of arities it is used with.
    pub fn signature(&self) -> BTreeMap<String, BTreeSet<usize>> {
        let mut table: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for rule in self.statements() {
            for atom in rule.atoms() {
                table.entry(atom.predicate.clone()).or_default().insert(atom.arity());
            }
        }
        table
    }

    /// All (name, arity) pairs in use.
    pub fn predicates(&self) -> BTreeSet<(String, usize)> {
        self.statements()
            .flat_map(Rule::atoms)
            .map(|a| (a.predicate.clone(), a.arity()))
            .collect()
    }

    /// Constants of the whole program; the Herbrand universe.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for rule in self.statements() {
            for atom in rule.atoms() {
                for term in &atom.args {
                    if let Term::Constant(c) = term {
                        out.insert(c.clone());
                    }
                }
            }
        }
        out
    }

    pub fn has_disjunction(&self) -> bool {
        self.statements().any(Rule::is_disjunctive)
    }

    /// Sorted, deduplicated copy; two programs are equal modulo ordering
    /// iff their canonical forms are equal.
    pub fn canonical(&self) -> Program {
        let mut facts = self.facts.clone();
        let mut rules = self.rules.clone();
        facts.sort();
        facts.dedup();
        rules.sort();
        rules.dedup();
        Program { facts, rules }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in self.statements() {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

/// A consistent set of ground literals; the unit of ground truth for all
/// three tasks. Construction rejects sets containing a literal together
/// with its strong negation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnswerSet {
    literals: BTreeSet<Literal>,
}

impl AnswerSet {
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Result<Self, AstError> {
        let literals: BTreeSet<Literal> = literals.into_iter().collect();
        for lit in &literals {
            if !lit.is_ground() {
                return Err(AstError::NonGroundLiteral(lit.to_string()));
            }
            if literals.contains(&lit.complement()) {
                return Err(AstError::Inconsistent(lit.atom.to_string()));
            }
        }
        Ok(AnswerSet { literals })
    }

    pub fn literals(&self) -> &BTreeSet<Literal> {
        &self.literals
    }

    pub fn contains(&self, literal: &Literal) -> bool {
        self.literals.contains(literal)
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Literal> {
        self.literals.iter()
    }
}

impl fmt::Display for AnswerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, lit) in self.literals.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{lit}")?;
        }
        f.write_str("}")
    }
}

/// Deterministic total order over a set of ground literals: sorted by
/// (predicate, sign, args). Equal sets always produce identical lists.
pub fn canonicalize(literals: &BTreeSet<Literal>) -> Result<Vec<Literal>, AstError> {
    if let Some(bad) = literals.iter().find(|l| !l.is_ground()) {
        return Err(AstError::NonGroundLiteral(bad.to_string()));
    }
    Ok(literals.iter().cloned().collect())
}

/// Naive consistency test over a raw literal set.
pub fn is_consistent(literals: &BTreeSet<Literal>) -> bool {
    literals.iter().all(|l| !literals.contains(&l.complement()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(pred: &str, args: &[Term]) -> Atom {
        Atom::new(pred, args.to_vec())
    }

    fn c(name: &str) -> Term {
        Term::constant(name)
    }

    #[test]
    fn term_printing_quotes_non_bare_constants() {
        assert_eq!(c("tweety").to_string(), "tweety");
        assert_eq!(c("Tweety").to_string(), "\"Tweety\"");
        assert_eq!(c("x_1").to_string(), "x_1");
        assert_eq!(Term::variable("V0").to_string(), "V0");
    }

    #[test]
    fn literal_ordering_is_predicate_sign_args() {
        // {b, -a} canonicalizes to [-a, b]
        let b = Literal::positive(atom("b", &[]));
        let neg_a = Literal::negative(atom("a", &[]));
        let set: BTreeSet<_> = [b.clone(), neg_a.clone()].into_iter().collect();
        assert_eq!(canonicalize(&set).unwrap(), vec![neg_a, b]);

        // {p("b"), p("a")} canonicalizes to [p("a"), p("b")]
        let pa = Literal::positive(atom("p", &[c("a")]));
        let pb = Literal::positive(atom("p", &[c("b")]));
        let set: BTreeSet<_> = [pb.clone(), pa.clone()].into_iter().collect();
        assert_eq!(canonicalize(&set).unwrap(), vec![pa, pb.clone()]);

        // sign sorts before args: p("b") before -p("a")
        let neg_pa = Literal::negative(atom("p", &[c("a")]));
        let set: BTreeSet<_> = [neg_pa.clone(), pb.clone()].into_iter().collect();
        assert_eq!(canonicalize(&set).unwrap(), vec![pb, neg_pa]);
    }

    #[test]
    fn canonicalize_rejects_variables() {
        let lit = Literal::positive(atom("p", &[Term::variable("X")]));
        let set: BTreeSet<_> = [lit].into_iter().collect();
        assert!(matches!(canonicalize(&set), Err(AstError::NonGroundLiteral(_))));
    }

    #[test]
    fn negation_flip_examples() {
        // not p -> -p
        let not_p = BodyLiteral::not(Literal::positive(atom("p", &[])));
        let flipped = negation_flip(&not_p);
        assert_eq!(flipped, BodyLiteral::plain(Literal::negative(atom("p", &[]))));

        // not -p -> p
        let not_neg_p = BodyLiteral::not(Literal::negative(atom("p", &[])));
        assert_eq!(
            negation_flip(&not_neg_p),
            BodyLiteral::plain(Literal::positive(atom("p", &[])))
        );

        // p -> not -p, forced by involution
        let p = BodyLiteral::plain(Literal::positive(atom("p", &[])));
        assert_eq!(negation_flip(&p), BodyLiteral::not(Literal::negative(atom("p", &[]))));
    }

    #[test]
    fn answer_set_rejects_inconsistency() {
        let p = Literal::positive(atom("p", &[c("a")]));
        let np = p.complement();
        assert!(AnswerSet::new([p.clone(), np]).is_err());
        assert!(AnswerSet::new([p]).is_ok());
    }

    #[test]
    fn rule_dedups_head_and_body() {
        let a = Literal::positive(atom("a", &[]));
        let b = BodyLiteral::plain(Literal::positive(atom("b", &[])));
        let r = Rule::new(vec![a.clone(), a.clone()], vec![b.clone(), b]);
        assert_eq!(r.head.len(), 1);
        assert_eq!(r.body.len(), 1);
    }

    #[test]
    fn rule_display_forms() {
        let fact = Rule::fact(Literal::positive(atom("p", &[c("a")])));
        assert_eq!(fact.to_string(), "p(a).");

        let constraint = Rule::new(
            vec![],
            vec![
                BodyLiteral::plain(Literal::positive(atom("p", &[Term::variable("X")]))),
                BodyLiteral::plain(Literal::positive(atom("q", &[Term::variable("X")]))),
            ],
        );
        assert_eq!(constraint.to_string(), ":- p(X), q(X).");

        let disj = Rule::new(
            vec![Literal::positive(atom("a", &[])), Literal::positive(atom("b", &[]))],
            vec![BodyLiteral::plain(Literal::positive(atom("d", &[])))],
        );
        assert_eq!(disj.to_string(), "a | b :- d.");

        let zero_arity = Rule::fact(Literal::positive(atom("smoke", &[])));
        assert_eq!(zero_arity.to_string(), "smoke.");
    }
}
