//! Stage 2 of the pipeline: turning a typed rule-predicate-operation
//! graph into concrete, safe rules.
//!
//! Variable assignment draws each predicate's arity once and keeps it
//! for every occurrence. Within a rule, every atom that carries
//! variables shares at least one with some other atom whenever another
//! atom has variables to share, and head variables always come from the
//! body pool. Negation types map to syntax on the body side (DN =>
//! `not p`, SN => `-p`, SN&DN => `not -p`); on the head side and in
//! facts a type that includes default negation goes through the
//! negation flip instead, since `not` may not appear in a head.
//!
//! Rules that fail the safety check afterwards are repaired by flipping
//! body literals, trying k-flip combinations in increasing k, and
//! discarded when no combination passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Atom, BodyLiteral, Literal, Rule, Term};
use crate::graphgen::{derive_seed, NegOp, RpoGraph};
use crate::grounder::safety_check;

pub const DEFAULT_MAX_REPAIR_ATTEMPTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleGenError {
    #[error("arity range [{min}, {max}] is empty")]
    ArityRangeEmpty { min: usize, max: usize },
}

/// Rule discarded after exhausting the flip budget.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("rule rejected after {attempts} repair attempts")]
pub struct Rejected {
    pub attempts: usize,
}

/// Name, arity and canonical variable template of one predicate node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSignature {
    pub pred: usize,
    pub name: String,
    pub arity: usize,
    pub template: Vec<String>,
}

/// Variable assignment for one rule node: (predicate node, argument
/// variables) for head and body atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleBinding {
    pub rule: usize,
    pub head: Vec<(usize, Vec<String>)>,
    pub body: Vec<(usize, Vec<String>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub signatures: Vec<PredicateSignature>,
    pub bindings: Vec<RuleBinding>,
}

/// How rule nodes with several head predicates are rendered: split into
/// one rule per head with a shared body, or one disjunctive rule.
/// Entailment generation always splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadPolicy {
    SplitRules,
    Disjunction,
}

fn var(i: usize) -> String {
    format!("V{i}")
}

/// Draw arities and per-rule variable bindings for a typed graph.
pub fn assign_variables(
    g: &RpoGraph,
    arity_range: (usize, usize),
    seed: u64,
) -> Result<Assignment, RuleGenError> {
    let (min, max) = arity_range;
    if min > max {
        return Err(RuleGenError::ArityRangeEmpty { min, max });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4));
    let signatures: Vec<PredicateSignature> = (0..g.n_preds)
        .map(|p| {
            let arity = rng.gen_range(min..=max);
            PredicateSignature {
                pred: p,
                name: format!("P{p}"),
                arity,
                template: (0..arity).map(var).collect(),
            }
        })
        .collect();

    let mut bindings = Vec::new();
    for rule in 0..g.n_rules {
        let body_preds = g.body_preds(rule);
        let head_preds = g.head_preds(rule);
        let head_arities: Vec<usize> = head_preds.iter().map(|&p| signatures[p].arity).collect();
        let body_arities: Vec<usize> = body_preds.iter().map(|&p| signatures[p].arity).collect();
        let (head_vars, body_vars) = bind_rule_variables(&head_arities, &body_arities, &mut rng);
        bindings.push(RuleBinding {
            rule,
            head: head_preds.into_iter().zip(head_vars).collect(),
            body: body_preds.into_iter().zip(body_vars).collect(),
        });
    }
    Ok(Assignment { signatures, bindings })
}

/// Variable assignment for one rule shape: fresh variables for the
/// first body atom, at least one reused variable per later body atom,
/// head variables drawn from the body pool. A rule whose body carries
/// no variables gets fresh head variables and is left for the safety
/// check to reject.
pub fn bind_rule_variables(
    head_arities: &[usize],
    body_arities: &[usize],
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut pool: Vec<String> = Vec::new();
    let mut next_var = 0usize;
    let mut fresh = |next_var: &mut usize, pool: &mut Vec<String>| {
        let v = var(*next_var);
        *next_var += 1;
        pool.push(v.clone());
        v
    };

    let mut body: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, &arity) in body_arities.iter().enumerate() {
        let mut args = Vec::with_capacity(arity);
        if arity > 0 && i > 0 && !pool.is_empty() {
            // one slot must reuse an existing variable
            let reuse_slot = rng.gen_range(0..arity);
            for slot in 0..arity {
                if slot == reuse_slot || (rng.gen_bool(0.5) && !pool.is_empty()) {
                    args.push(pool[rng.gen_range(0..pool.len())].clone());
                } else {
                    args.push(fresh(&mut next_var, &mut pool));
                }
            }
        } else {
            for _ in 0..arity {
                args.push(fresh(&mut next_var, &mut pool));
            }
        }
        body.push((0, args));
    }

    let mut head: Vec<(usize, Vec<String>)> = Vec::new();
    for &arity in head_arities {
        let mut args = Vec::with_capacity(arity);
        for _ in 0..arity {
            if pool.is_empty() {
                args.push(var(next_var));
                next_var += 1;
            } else {
                args.push(pool[rng.gen_range(0..pool.len())].clone());
            }
        }
        head.push((0, args));
    }

    share_fixup(&mut body, &mut head, rng);
    (
        head.into_iter().map(|(_, a)| a).collect(),
        body.into_iter().map(|(_, a)| a).collect(),
    )
}

/// Make every variable-carrying atom share a variable with some other
/// atom of the rule, when any other atom has variables to offer. An
/// unshared variable occurs in exactly one atom, so swapping it out
/// never breaks the sharing of others.
fn share_fixup(
    body: &mut [(usize, Vec<String>)],
    head: &mut [(usize, Vec<String>)],
    rng: &mut ChaCha8Rng,
) {
    let n = body.len() + head.len();
    for i in 0..n {
        let my_vars: Vec<String> = slot(body, head, i).1.clone();
        if my_vars.is_empty() {
            continue;
        }
        let mut other_vars: Vec<String> = Vec::new();
        for j in 0..n {
            if j != i {
                other_vars.extend(slot(body, head, j).1.iter().cloned());
            }
        }
        if other_vars.is_empty() {
            continue;
        }
        if my_vars.iter().any(|v| other_vars.contains(v)) {
            continue;
        }
        let borrowed = other_vars[rng.gen_range(0..other_vars.len())].clone();
        let args = &mut slot(body, head, i).1;
        let last = args.len() - 1;
        args[last] = borrowed;
    }
}

fn slot<'a>(
    body: &'a mut [(usize, Vec<String>)],
    head: &'a mut [(usize, Vec<String>)],
    i: usize,
) -> &'a mut (usize, Vec<String>) {
    if i < body.len() {
        &mut body[i]
    } else {
        &mut head[i - body.len()]
    }
}

fn atom_of(sig: &PredicateSignature, args: &[String]) -> Atom {
    Atom::new(sig.name.clone(), args.iter().map(|v| Term::variable(v.clone())).collect())
}

/// Body-side rendering of a unified negation type.
pub fn body_literal_for(op: NegOp, atom: Atom) -> BodyLiteral {
    BodyLiteral {
        literal: Literal { atom, strong_neg: op.strong() },
        default_neg: op.default(),
    }
}

/// Head-side (and fact) rendering: default negation is illegal there,
/// so types that include it go through the negation flip.
pub fn head_literal_for(op: NegOp, atom: Atom) -> Literal {
    let as_body = body_literal_for(op, atom);
    if as_body.default_neg {
        crate::ast::negation_flip(&as_body).literal
    } else {
        as_body.literal
    }
}

/// Render every rule node into concrete rules under the head policy.
pub fn emit_rules(g: &RpoGraph, assignment: &Assignment, policy: HeadPolicy) -> Vec<Rule> {
    let mut out = Vec::new();
    for binding in &assignment.bindings {
        let body: Vec<BodyLiteral> = binding
            .body
            .iter()
            .map(|(p, args)| {
                let op = g.types[*p].expect("assign_operations must run first");
                body_literal_for(op, atom_of(&assignment.signatures[*p], args))
            })
            .collect();
        let heads: Vec<Literal> = binding
            .head
            .iter()
            .map(|(p, args)| {
                let op = g.types[*p].expect("assign_operations must run first");
                head_literal_for(op, atom_of(&assignment.signatures[*p], args))
            })
            .collect();
        match policy {
            HeadPolicy::SplitRules => {
                for h in heads {
                    out.push(Rule::new(vec![h], body.clone()));
                }
            }
            HeadPolicy::Disjunction => {
                out.push(Rule::new(heads, body));
            }
        }
    }
    out
}

/// Repair a rule by flipping body literals until it passes the safety
/// check, trying flip sets in breadth-first order (so the returned rule
/// differs by the smallest possible number of flips), and rejecting
/// after `max_attempts` tried combinations.
pub fn repair(rule: &Rule, max_attempts: usize) -> Result<(Rule, usize), Rejected> {
    let n = rule.body.len();
    let mut attempts = 0;
    for k in 0..=n {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            if attempts >= max_attempts {
                return Err(Rejected { attempts });
            }
            attempts += 1;
            let candidate = apply_flips(rule, &combo);
            if safety_check(&candidate).is_empty() {
                return Ok((candidate, k));
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    Err(Rejected { attempts })
}

fn apply_flips(rule: &Rule, flip: &[usize]) -> Rule {
    let body = rule
        .body
        .iter()
        .enumerate()
        .map(|(i, b)| if flip.contains(&i) { crate::ast::negation_flip(b) } else { b.clone() })
        .collect();
    Rule::new(rule.head.clone(), body)
}

/// Advance a sorted index combination lexicographically; false when
/// exhausted.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - (k - i) {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
