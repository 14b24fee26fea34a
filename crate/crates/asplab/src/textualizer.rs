//! Template rendering of symbolic programs into controlled natural
//! language. The templates carry the logical structure verbatim:
//! `p(X).` becomes "p(X) is true", `-p(X).` becomes "p(X) is explicitly
//! false", and `h :- b1, not b2.` becomes "If b1 is true and there is
//! no evidence that b2 is true, then h is true."
//!
//! Constants render unquoted with their case preserved; rendering is
//! deterministic and injective on the generated fragment.

use thiserror::Error;

use crate::ast::{Atom, BodyLiteral, Literal, Program, Rule};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("not a fact: {0}")]
pub struct NonFact(pub String);

fn atom_text(atom: &Atom) -> String {
    if atom.args.is_empty() {
        return atom.predicate.clone();
    }
    let args: Vec<&str> = atom.args.iter().map(|t| t.name()).collect();
    format!("{}({})", atom.predicate, args.join(", "))
}

fn literal_phrase(lit: &Literal) -> String {
    if lit.strong_neg {
        format!("{} is explicitly false", atom_text(&lit.atom))
    } else {
        format!("{} is true", atom_text(&lit.atom))
    }
}

fn body_phrase(b: &BodyLiteral) -> String {
    if b.default_neg {
        format!("there is no evidence that {}", literal_phrase(&b.literal))
    } else {
        literal_phrase(&b.literal)
    }
}

/// "p(a) is true." / "p(a) is explicitly false."
pub fn textualize_fact(fact: &Rule) -> Result<String, NonFact> {
    if !fact.is_fact() {
        return Err(NonFact(fact.to_string()));
    }
    Ok(format!("{}.", literal_phrase(&fact.head[0])))
}

/// Conditional sentence for a rule; constraints render as "It cannot be
/// the case that ...".
pub fn textualize_rule(rule: &Rule) -> String {
    let body: Vec<String> = rule.body.iter().map(body_phrase).collect();
    let head: Vec<String> = rule.head.iter().map(literal_phrase).collect();
    if rule.head.is_empty() {
        format!("It cannot be the case that {}.", body.join(" and "))
    } else if rule.body.is_empty() {
        format!("{}.", head.join(" or "))
    } else {
        format!("If {}, then {}.", body.join(" and "), head.join(" or "))
    }
}

/// One sentence per statement, facts first, in program order.
pub fn textualize_program(program: &Program) -> Vec<String> {
    let mut out = Vec::with_capacity(program.len());
    for fact in &program.facts {
        out.push(textualize_fact(fact).expect("program facts are fact-shaped"));
    }
    for rule in &program.rules {
        out.push(textualize_rule(rule));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn first(text: &str) -> Rule {
        let p = parse_program(text).unwrap();
        let rule = p.statements().next().unwrap().clone();
        rule
    }

    #[test]
    fn fact_templates() {
        assert_eq!(
            textualize_fact(&first("kissing_and_drinking(\"David\", \"Jason\").")).unwrap(),
            "kissing_and_drinking(David, Jason) is true."
        );
        assert_eq!(
            textualize_fact(&first("-learning_about_science(\"David\", \"Lori\").")).unwrap(),
            "learning_about_science(David, Lori) is explicitly false."
        );
        assert_eq!(textualize_fact(&first("smoke.")).unwrap(), "smoke is true.");
    }

    #[test]
    fn fact_rejects_rules() {
        assert!(textualize_fact(&first("a :- b.")).is_err());
        assert!(textualize_fact(&first("p(X) :- q(X).")).is_err());
    }

    #[test]
    fn rule_templates() {
        assert_eq!(
            textualize_rule(&first("h :- b1, not b2.")),
            "If b1 is true and there is no evidence that b2 is true, then h is true."
        );
        assert_eq!(
            textualize_rule(&first("white(V1, v2) :- holds(V1, v2), not fluffy(V1).")),
            "If holds(V1, v2) is true and there is no evidence that fluffy(V1) is true, \
             then white(V1, v2) is true."
        );
        assert_eq!(
            textualize_rule(&first(":- p(X), q(X).")),
            "It cannot be the case that p(X) is true and q(X) is true."
        );
        assert_eq!(
            textualize_rule(&first("a | c :- b.")),
            "If b is true, then a is true or c is true."
        );
        assert_eq!(
            textualize_rule(&first("-fly(X) :- penguin(X).")),
            "If penguin(X) is true, then fly(X) is explicitly false."
        );
        assert_eq!(
            textualize_rule(&first("fly(X) :- bird(X), not -fly(X).")),
            "If bird(X) is true and there is no evidence that fly(X) is explicitly false, \
             then fly(X) is true."
        );
    }

    #[test]
    fn program_sentences_in_order() {
        let p = parse_program("fly(X) :- bird(X), not -fly(X).\nbird(tweety).").unwrap();
        let sentences = textualize_program(&p);
        assert_eq!(
            sentences,
            vec![
                "bird(tweety) is true.".to_string(),
                "If bird(X) is true and there is no evidence that fly(X) is explicitly false, \
                 then fly(X) is true."
                    .to_string(),
            ]
        );
        assert_eq!(sentences.len(), p.len());
        assert!(textualize_program(&Program::default()).is_empty());
    }
}
