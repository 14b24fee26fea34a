//! Safety checking and naive grounding over the Herbrand universe.
//!
//! Grounding is full instantiation with no cleverness: generated
//! programs have a handful of constants and arity at most three, so the
//! ground program stays desk-scale.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Atom, BodyLiteral, Literal, Program, Rule, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundError {
    #[error("unsafe rule `{rule}`: variables {variables:?} not bound by a positive body literal")]
    UnsafeRule { rule: String, variables: Vec<String> },
    #[error("program has variables but no constants to instantiate them with")]
    EmptyUniverse,
}

/// A fully instantiated program plus its atom universe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundProgram {
    pub rules: Vec<Rule>,
    pub atoms: BTreeSet<Atom>,
}

impl GroundProgram {
    pub fn to_program(&self) -> Program {
        Program::new(self.rules.iter().cloned())
    }
}

/// Returns the variables that violate safety: every variable appearing
/// in the head or in a default-negated body literal must also appear in
/// a body literal that is not default-negated.
pub fn safety_check(rule: &Rule) -> Vec<String> {
    let bound: BTreeSet<&str> = rule
        .body
        .iter()
        .filter(|b| !b.default_neg)
        .flat_map(|b| b.literal.atom.variables())
        .collect();
    let mut unsafe_vars = BTreeSet::new();
    for v in rule.head.iter().flat_map(|l| l.atom.variables()) {
        if !bound.contains(v) {
            unsafe_vars.insert(v.to_string());
        }
    }
    for b in rule.body.iter().filter(|b| b.default_neg) {
        for v in b.literal.atom.variables() {
            if !bound.contains(v) {
                unsafe_vars.insert(v.to_string());
            }
        }
    }
    unsafe_vars.into_iter().collect()
}

pub fn is_safe(rule: &Rule) -> bool {
    safety_check(rule).is_empty()
}

fn substitute_atom(atom: &Atom, binding: &BTreeMap<&str, &str>) -> Atom {
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Variable(v) => Term::Constant(binding[v.as_str()].to_string()),
            Term::Constant(c) => Term::Constant(c.clone()),
        })
        .collect();
    Atom::new(atom.predicate.clone(), args)
}

fn substitute_rule(rule: &Rule, binding: &BTreeMap<&str, &str>) -> Rule {
    let head = rule
        .head
        .iter()
        .map(|l| Literal { atom: substitute_atom(&l.atom, binding), strong_neg: l.strong_neg })
        .collect();
    let body = rule
        .body
        .iter()
        .map(|b| BodyLiteral {
            literal: Literal {
                atom: substitute_atom(&b.literal.atom, binding),
                strong_neg: b.literal.strong_neg,
            },
            default_neg: b.default_neg,
        })
        .collect();
    Rule::new(head, body)
}

/// Instantiate every rule with every substitution of its variables by
/// the program's constants. Duplicate ground rules are removed; the
/// output order is deterministic (program order, then substitutions in
/// lexicographic constant order).
pub fn ground(program: &Program) -> Result<GroundProgram, GroundError> {
    for rule in program.statements() {
        let unsafe_vars = safety_check(rule);
        if !unsafe_vars.is_empty() {
            return Err(GroundError::UnsafeRule {
                rule: rule.to_string(),
                variables: unsafe_vars,
            });
        }
    }
    let constants: Vec<String> = program.constants().into_iter().collect();
    let mut rules = Vec::new();
    let mut seen = HashSet::new();
    for rule in program.statements() {
        let vars = rule.variables();
        if vars.is_empty() {
            if seen.insert(rule.clone()) {
                rules.push(rule.clone());
            }
            continue;
        }
        if constants.is_empty() {
            return Err(GroundError::EmptyUniverse);
        }
        // odometer over |constants|^|vars| substitutions
        let mut indices = vec![0usize; vars.len()];
        loop {
            let binding: BTreeMap<&str, &str> = vars
                .iter()
                .zip(indices.iter())
                .map(|(v, &i)| (v.as_str(), constants[i].as_str()))
                .collect();
            let ground_rule = substitute_rule(rule, &binding);
            if seen.insert(ground_rule.clone()) {
                rules.push(ground_rule);
            }
            let mut pos = vars.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                indices[pos] += 1;
                if indices[pos] < constants.len() {
                    break;
                }
                indices[pos] = 0;
            }
            if indices.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    let atoms = rules.iter().flat_map(Rule::atoms).cloned().collect();
    Ok(GroundProgram { rules, atoms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn rule_of(text: &str) -> Rule {
        let p = parse_program(text).unwrap();
        let rule = p.statements().next().unwrap().clone();
        rule
    }

    #[test]
    fn safety_examples() {
        assert!(safety_check(&rule_of("p(X) :- q(X).")).is_empty());
        assert_eq!(safety_check(&rule_of("p(X,Y) :- q(X).")), vec!["Y".to_string()]);
        assert_eq!(safety_check(&rule_of("p(X) :- not q(X).")), vec!["X".to_string()]);
        // strong negation binds variables
        assert!(safety_check(&rule_of("p(X) :- -q(X).")).is_empty());
        // default-negated occurrence needs a positive binder
        assert_eq!(safety_check(&rule_of(":- not q(X).")), vec!["X".to_string()]);
    }

    #[test]
    fn grounds_tweety_rule_over_one_constant() {
        let p = parse_program("bird(tweety).\nfly(X) :- bird(X), not -fly(X).").unwrap();
        let g = ground(&p).unwrap();
        assert_eq!(g.rules.len(), 2);
        assert_eq!(g.rules[1].to_string(), "fly(tweety) :- bird(tweety), not -fly(tweety).");
    }

    #[test]
    fn propositional_program_unchanged() {
        let p = parse_program("a :- not b. b :- not a.").unwrap();
        let g = ground(&p).unwrap();
        assert_eq!(g.to_program().canonical(), p.canonical());
    }

    #[test]
    fn instance_count_is_constants_to_the_vars() {
        let p = parse_program("p(a). p(b). p(c).\nq(X,Y) :- p(X), p(Y).").unwrap();
        let g = ground(&p).unwrap();
        // 3 facts + 3^2 instances
        assert_eq!(g.rules.len(), 3 + 9);
    }

    #[test]
    fn grounding_is_idempotent() {
        let p = parse_program("p(a).\nq(X) :- p(X), not r(X).").unwrap();
        let g1 = ground(&p).unwrap();
        let g2 = ground(&g1.to_program()).unwrap();
        assert_eq!(g1.to_program().canonical(), g2.to_program().canonical());
    }

    #[test]
    fn unsafe_rule_is_an_error() {
        let p = parse_program("p(a).\nq(X) :- not p(X).").unwrap();
        assert!(matches!(ground(&p), Err(GroundError::UnsafeRule { .. })));
    }

    #[test]
    fn empty_universe_is_an_error() {
        let p = parse_program("q(X) :- p(X).").unwrap();
        assert_eq!(ground(&p), Err(GroundError::EmptyUniverse));
    }

    #[test]
    fn atom_universe_matches_occurrences() {
        let p = parse_program("p(a).\nq(X) :- p(X).").unwrap();
        let g = ground(&p).unwrap();
        let names: BTreeSet<String> = g.atoms.iter().map(|a| a.to_string()).collect();
        assert_eq!(
            names,
            ["p(a)", "q(a)"].iter().map(|s| s.to_string()).collect::<BTreeSet<_>>()
        );
    }
}
