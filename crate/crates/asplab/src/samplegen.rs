//! Stage 3 of the pipeline: fact formulation, augmentation, restyling,
//! solver-backed labeling and emission of benchmark sample records for
//! the three tasks.
//!
//! Nothing here is trusted by construction: every emitted program is
//! re-solved and every stored label is certified by the solver before a
//! record leaves this module. Samples are deterministic functions of
//! (config, master seed, index); batch generation runs sample-parallel
//! with per-sample seeds, followed by a sequential structural-dedup
//! scan, so the output is identical for any worker count.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Atom, Literal, Program, Rule, Term};
use crate::graphgen::{
    assign_operations, build_rule_graph, chain_length, dedup_key, derive_seed, expand_to_rp_graph,
    GenParams, NegOp, RpoGraph,
};
use crate::grounder::ground;
use crate::rulegen::{
    assign_variables, bind_rule_variables, body_literal_for, emit_rules, head_literal_for, repair,
    Assignment, HeadPolicy, DEFAULT_MAX_REPAIR_ATTEMPTS,
};
use crate::solver::{classify, enumerate_answer_sets_with, verify_with, ClassReport, SolveOptions};
use crate::textualizer::textualize_program;

const BUNDLED_NAMES: &str = include_str!("../data/names.txt");
const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.tsv");

/// Rounds of regenerate-and-rescan the batch generator spends on
/// structural dedup before admitting repeated fingerprints.
const DEDUP_ROUNDS: u64 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("resample budget exhausted after {attempts} attempts (sample {id})")]
    ResampleBudgetExhausted { id: String, attempts: usize },
    #[error("augmented program has {count} derivable literals, above the bound of {bound}")]
    AugmentationOverflow { count: usize, bound: usize },
    #[error("lexicon has {available} distinct concepts but {needed} predicates need names")]
    LexiconTooSmall { needed: usize, available: usize },
    #[error("name pool has {available} names but {needed} constants need replacements")]
    NamePoolTooSmall { needed: usize, available: usize },
    #[error("bad lexicon line {line}: expected head<TAB>relation<TAB>tail")]
    BadLexicon { line: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "ASE")]
    Ase,
    #[serde(rename = "ASV")]
    Asv,
    #[serde(rename = "ASC")]
    Asc,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Ase => f.write_str("ASE"),
            Task::Asv => f.write_str("ASV"),
            Task::Asc => f.write_str("ASC"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredicateStyle {
    #[serde(rename = "p_style")]
    PStyle,
    #[serde(rename = "related_concepts")]
    RelatedConcepts,
    #[serde(rename = "random_concepts")]
    RandomConcepts,
}

/// Which naming style to apply and where concept triples come from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleConfig {
    /// None: rotate styles per sample in roughly equal thirds.
    pub style: Option<PredicateStyle>,
    /// None: use the bundled lexicon.
    pub lexicon_path: Option<PathBuf>,
}

/// Concept triples (head, relation, tail) backing the lexicalized
/// predicate styles.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub triples: Vec<(String, String, String)>,
    pub concepts: Vec<String>,
}

impl Lexicon {
    pub fn from_tsv(text: &str) -> Result<Lexicon, GenError> {
        let mut triples = Vec::new();
        let mut concepts = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(h), Some(r), Some(t)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(GenError::BadLexicon { line: i + 1 });
            };
            concepts.insert(h.to_string());
            concepts.insert(t.to_string());
            triples.push((h.to_string(), r.to_string(), t.to_string()));
        }
        Ok(Lexicon { triples, concepts: concepts.into_iter().collect() })
    }

    pub fn bundled() -> Lexicon {
        Lexicon::from_tsv(BUNDLED_LEXICON).expect("bundled lexicon is well-formed")
    }

    pub fn load(config: &StyleConfig) -> Result<Lexicon, GenError> {
        match &config.lexicon_path {
            None => Ok(Lexicon::bundled()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|_| GenError::BadLexicon { line: 0 })?;
                Lexicon::from_tsv(&text)
            }
        }
    }
}

pub fn bundled_names() -> Vec<String> {
    BUNDLED_NAMES
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerturbationKind {
    #[serde(rename = "FN")]
    FlipNegation,
    #[serde(rename = "DF")]
    DeleteFact,
    #[serde(rename = "AMFC")]
    AddModifiedFactConstants,
    #[serde(rename = "AMFP")]
    AddModifiedFactPredicate,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 4] = [
        PerturbationKind::FlipNegation,
        PerturbationKind::DeleteFact,
        PerturbationKind::AddModifiedFactConstants,
        PerturbationKind::AddModifiedFactPredicate,
    ];

    pub fn abbrev(self) -> &'static str {
        match self {
            PerturbationKind::FlipNegation => "FN",
            PerturbationKind::DeleteFact => "DF",
            PerturbationKind::AddModifiedFactConstants => "AMFC",
            PerturbationKind::AddModifiedFactPredicate => "AMFP",
        }
    }
}

/// One applied candidate modification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub target: String,
    pub replacement: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub rules: usize,
    pub facts: usize,
    pub predicates: usize,
    pub constants: usize,
    pub derivable_literals: usize,
    pub chain_length: usize,
    pub augmented_rules: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub seed: u64,
    pub predicate_style: PredicateStyle,
    pub class: ClassReport,
    pub perturbation: Option<Perturbation>,
    pub counts: SampleCounts,
}

/// One benchmark item: the program in symbolic and textual form, the
/// task payload (query or candidate), the certified label and all
/// answer sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub task: Task,
    pub program_lp: String,
    pub program: Program,
    pub program_text: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub answer_sets: Vec<Vec<String>>,
    pub metadata: SampleMetadata,
}

/// Batch generation knobs. Structural parameters are ranges; each
/// sample draws concrete [`GenParams`] from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub rules_min: usize,
    pub rules_max: usize,
    /// extra rule-graph edges beyond the spanning minimum
    pub edge_slack: usize,
    pub extra_predicates_max: usize,
    pub extra_edges_max: usize,
    pub max_body_predicates: usize,
    pub p_strong_neg: f64,
    pub p_default_neg: f64,
    pub arity_min: usize,
    pub arity_max: usize,
    pub constants_min: usize,
    pub constants_max: usize,
    pub augment_rules_max: usize,
    pub max_derivable: usize,
    pub resample_budget: usize,
    pub style: StyleConfig,
    /// ASE only: retry until the sample gets this label
    pub requested_label: Option<String>,
    pub dedup: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            rules_min: 2,
            rules_max: 5,
            edge_slack: 2,
            extra_predicates_max: 2,
            extra_edges_max: 2,
            max_body_predicates: 3,
            p_strong_neg: 0.3,
            p_default_neg: 0.3,
            arity_min: 0,
            arity_max: 3,
            constants_min: 2,
            constants_max: 3,
            augment_rules_max: 3,
            max_derivable: 18,
            resample_budget: 200,
            style: StyleConfig::default(),
            requested_label: None,
            dedup: true,
        }
    }
}

impl GenConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { max_derivable: self.max_derivable }
    }
}

/// One ground fact per input predicate node (the ones nothing derives),
/// with the node's unified type deciding the sign: P and SN yield `p.`
/// and `-p.` directly, types with default negation go through the
/// negation flip. Variables are instantiated from the constant pool.
pub fn formulate_facts(
    g: &RpoGraph,
    assignment: &Assignment,
    pool: &[String],
    seed: u64,
) -> Vec<Rule> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 5));
    let mut facts = Vec::new();
    for p in g.input_preds() {
        let sig = &assignment.signatures[p];
        let op = g.types[p].expect("typed graph required");
        let args: Vec<Term> = (0..sig.arity)
            .map(|_| Term::constant(pool[rng.gen_range(0..pool.len())].clone()))
            .collect();
        let literal = head_literal_for(op, Atom::new(sig.name.clone(), args));
        facts.push(Rule::fact(literal));
    }
    facts
}

/// Augmentation settings derived from the batch config.
pub struct AugmentConfig {
    pub n_rules: usize,
    pub max_body_predicates: usize,
    pub p_strong_neg: f64,
    pub p_default_neg: f64,
    pub arity_min: usize,
    pub arity_max: usize,
    pub max_derivable: usize,
}

/// Add up to `n_rules` diversification rules of the five structural
/// kinds: (a) head from the target predicates, (b) body touching the
/// target predicates, (c) head and body from the inner predicates,
/// (d) a mix of new and inner predicates, (e) new predicates only.
/// New predicates that nothing derives get facts. Fails when the
/// augmented program would blow the ground-size bound.
pub fn augment(
    program: &Program,
    g: &RpoGraph,
    assignment: &Assignment,
    config: &AugmentConfig,
    seed: u64,
) -> Result<(Program, usize), GenError> {
    if config.n_rules == 0 {
        return Ok((program.clone(), 0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 6));
    let name_of = |p: usize| assignment.signatures[p].name.clone();

    let targets: Vec<usize> = g.target_preds();
    let others: Vec<usize> = (0..g.n_preds).filter(|p| !targets.contains(p)).collect();
    let constants: Vec<String> = program.constants().into_iter().collect();

    // (name, arity, op) of every predicate available to augmentation
    let mut table: BTreeMap<String, (usize, NegOp)> = BTreeMap::new();
    for p in 0..g.n_preds {
        let sig = &assignment.signatures[p];
        table.insert(sig.name.clone(), (sig.arity, g.types[p].unwrap()));
    }
    let mut next_new = g.n_preds;
    let mut new_preds: Vec<String> = Vec::new();
    let mut fresh_pred = |rng: &mut ChaCha8Rng,
                          table: &mut BTreeMap<String, (usize, NegOp)>,
                          new_preds: &mut Vec<String>|
     -> String {
        let name = format!("P{next_new}");
        next_new += 1;
        let arity = if constants.is_empty() {
            0
        } else {
            rng.gen_range(config.arity_min..=config.arity_max)
        };
        let op = NegOp::from_flags(
            rng.gen_bool(config.p_strong_neg),
            rng.gen_bool(config.p_default_neg),
        );
        table.insert(name.clone(), (arity, op));
        new_preds.push(name.clone());
        name
    };

    let mut result = program.clone();
    let mut added = 0usize;
    let mut attempts = 0usize;
    while added < config.n_rules && attempts < config.n_rules * 8 {
        attempts += 1;
        let kind = rng.gen_range(0..5u8);
        let pick = |rng: &mut ChaCha8Rng, from: &[usize]| -> Option<String> {
            if from.is_empty() {
                None
            } else {
                Some(name_of(from[rng.gen_range(0..from.len())]))
            }
        };
        // head predicate and body predicates by kind
        let (head_name, body_names): (String, Vec<String>) = match kind {
            // (a) head from targets, body from the others
            0 => {
                let (Some(h), Some(_)) = (pick(&mut rng, &targets), others.first()) else {
                    continue;
                };
                let n = rng.gen_range(1..=config.max_body_predicates.min(others.len()));
                let mut body: Vec<String> = Vec::new();
                while body.len() < n {
                    let b = pick(&mut rng, &others).unwrap();
                    if !body.contains(&b) {
                        body.push(b);
                    }
                }
                (h, body)
            }
            // (b) body touches a target, head from the others
            1 => {
                let (Some(h), Some(t)) = (pick(&mut rng, &others), pick(&mut rng, &targets))
                else {
                    continue;
                };
                let mut body = vec![t];
                if config.max_body_predicates > 1 && !others.is_empty() && rng.gen_bool(0.5) {
                    let extra = pick(&mut rng, &others).unwrap();
                    if !body.contains(&extra) {
                        body.push(extra);
                    }
                }
                (h, body)
            }
            // (c) head and body solely from the others
            2 => {
                if others.len() < 2 {
                    continue;
                }
                let h = pick(&mut rng, &others).unwrap();
                let n = rng.gen_range(1..=config.max_body_predicates.min(others.len()));
                let mut body: Vec<String> = Vec::new();
                let mut guard = 0;
                while body.len() < n && guard < 32 {
                    guard += 1;
                    let b = pick(&mut rng, &others).unwrap();
                    if b != h && !body.contains(&b) {
                        body.push(b);
                    }
                }
                if body.is_empty() {
                    continue;
                }
                (h, body)
            }
            // (d) part new predicates, part others
            3 => {
                if others.is_empty() {
                    continue;
                }
                let new_name = fresh_pred(&mut rng, &mut table, &mut new_preds);
                let old_name = pick(&mut rng, &others).unwrap();
                if rng.gen_bool(0.5) {
                    (new_name, vec![old_name])
                } else {
                    (old_name.clone(), vec![new_name, old_name])
                }
            }
            // (e) head and body solely from new predicates
            _ => {
                let h = fresh_pred(&mut rng, &mut table, &mut new_preds);
                let b = fresh_pred(&mut rng, &mut table, &mut new_preds);
                (h, vec![b])
            }
        };

        let head_arities = vec![table[&head_name].0];
        let body_arities: Vec<usize> = body_names.iter().map(|n| table[n].0).collect();
        let (head_vars, body_vars) = bind_rule_variables(&head_arities, &body_arities, &mut rng);
        let head = vec![head_literal_for(
            table[&head_name].1,
            Atom::new(
                head_name.clone(),
                head_vars[0].iter().map(|v| Term::variable(v.clone())).collect(),
            ),
        )];
        let body = body_names
            .iter()
            .zip(body_vars)
            .map(|(n, vars)| {
                body_literal_for(
                    table[n].1,
                    Atom::new(n.clone(), vars.into_iter().map(Term::variable).collect()),
                )
            })
            .collect();
        let rule = Rule::new(head, body);
        let Ok((repaired, _)) = repair(&rule, DEFAULT_MAX_REPAIR_ATTEMPTS) else {
            continue;
        };
        if result.statements().any(|r| *r == repaired) {
            continue;
        }
        result.push(repaired);
        added += 1;
    }

    // facts for new predicates nothing derives
    let derived: BTreeSet<(String, usize)> = result
        .statements()
        .flat_map(|r| r.head.iter())
        .map(|l| (l.atom.predicate.clone(), l.atom.arity()))
        .collect();
    for name in &new_preds {
        let (arity, op) = table[name];
        if derived.contains(&(name.clone(), arity)) {
            continue;
        }
        let used = result
            .statements()
            .flat_map(Rule::atoms)
            .any(|a| a.predicate == *name && a.arity() == arity);
        if !used {
            continue;
        }
        let args: Vec<Term> = (0..arity)
            .map(|_| Term::constant(constants[rng.gen_range(0..constants.len())].clone()))
            .collect();
        let literal = head_literal_for(op, Atom::new(name.clone(), args));
        let fact = Rule::fact(literal);
        if !result.facts.contains(&fact) {
            result.push(fact);
        }
    }

    let grounded = match ground(&result) {
        Ok(g) => g,
        Err(_) => {
            return Err(GenError::AugmentationOverflow { count: usize::MAX, bound: config.max_derivable })
        }
    };
    let derivable: BTreeSet<&Literal> = grounded.rules.iter().flat_map(|r| r.head.iter()).collect();
    if derivable.len() > config.max_derivable {
        return Err(GenError::AugmentationOverflow {
            count: derivable.len(),
            bound: config.max_derivable,
        });
    }
    Ok((result, added))
}

/// Result of restyling: the renamed program plus the bijective
/// predicate and constant maps that produced it.
#[derive(Debug, Clone)]
pub struct Restyled {
    pub program: Program,
    pub predicate_map: BTreeMap<String, String>,
    pub constant_map: BTreeMap<String, String>,
}

/// Bijectively rename predicates according to the style and replace
/// every constant with a fresh name from the pool.
pub fn restyle(
    program: &Program,
    style: PredicateStyle,
    lexicon: &Lexicon,
    names: &[String],
    seed: u64,
) -> Result<Restyled, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 7));

    // predicate names in first-appearance order
    let mut preds: Vec<String> = Vec::new();
    for rule in program.statements() {
        for atom in rule.atoms() {
            if !preds.contains(&atom.predicate) {
                preds.push(atom.predicate.clone());
            }
        }
    }

    let mut predicate_map: BTreeMap<String, String> = BTreeMap::new();
    match style {
        PredicateStyle::PStyle => {
            for (i, name) in preds.iter().enumerate() {
                predicate_map.insert(name.clone(), format!("P{i}"));
            }
        }
        PredicateStyle::RandomConcepts => {
            if lexicon.concepts.len() < preds.len() {
                return Err(GenError::LexiconTooSmall {
                    needed: preds.len(),
                    available: lexicon.concepts.len(),
                });
            }
            let mut pool = lexicon.concepts.clone();
            pool.shuffle(&mut rng);
            for (name, concept) in preds.iter().zip(pool) {
                predicate_map.insert(name.clone(), concept);
            }
        }
        PredicateStyle::RelatedConcepts => {
            if lexicon.concepts.len() < preds.len() {
                return Err(GenError::LexiconTooSmall {
                    needed: preds.len(),
                    available: lexicon.concepts.len(),
                });
            }
            let mut used: BTreeSet<String> = BTreeSet::new();
            let mut triples = lexicon.triples.clone();
            triples.shuffle(&mut rng);
            // name body/head pairs of each rule from concept triples
            // (body gets the triple head, rule head gets the tail, as in
            // naming `a(V0) :- -b(V0).` flying/bird from
            // (bird, CapableOf, flying))
            for rule in &program.rules {
                for h in &rule.head {
                    for b in &rule.body {
                        let bp = &b.literal.atom.predicate;
                        let hp = &h.atom.predicate;
                        if bp == hp {
                            continue;
                        }
                        let b_named = predicate_map.contains_key(bp);
                        let h_named = predicate_map.contains_key(hp);
                        if b_named && h_named {
                            continue;
                        }
                        let found = triples.iter().find(|(th, _, tt)| {
                            let b_ok = if b_named {
                                predicate_map[bp] == *th
                            } else {
                                !used.contains(th)
                            };
                            let h_ok = if h_named {
                                predicate_map[hp] == *tt
                            } else {
                                !used.contains(tt)
                            };
                            b_ok && h_ok && th != tt
                        });
                        if let Some((th, _, tt)) = found.cloned() {
                            if !b_named {
                                used.insert(th.clone());
                                predicate_map.insert(bp.clone(), th);
                            }
                            if !h_named {
                                used.insert(tt.clone());
                                predicate_map.insert(hp.clone(), tt);
                            }
                        }
                    }
                }
            }
            // the rest get random unused concepts
            let mut pool: Vec<String> =
                lexicon.concepts.iter().filter(|c| !used.contains(*c)).cloned().collect();
            pool.shuffle(&mut rng);
            let mut next = pool.into_iter();
            for name in &preds {
                if !predicate_map.contains_key(name) {
                    let concept = next.next().ok_or(GenError::LexiconTooSmall {
                        needed: preds.len(),
                        available: lexicon.concepts.len(),
                    })?;
                    predicate_map.insert(name.clone(), concept);
                }
            }
        }
    }

    let constants: Vec<String> = program.constants().into_iter().collect();
    if names.len() < constants.len() {
        return Err(GenError::NamePoolTooSmall {
            needed: constants.len(),
            available: names.len(),
        });
    }
    let mut name_pool = names.to_vec();
    name_pool.shuffle(&mut rng);
    let constant_map: BTreeMap<String, String> =
        constants.into_iter().zip(name_pool).collect();

    let map_rule = |rule: &Rule| -> Rule {
        let map_atom = |atom: &Atom| -> Atom {
            Atom::new(
                predicate_map[&atom.predicate].clone(),
                atom.args
                    .iter()
                    .map(|t| match t {
                        Term::Constant(c) => Term::Constant(constant_map[c].clone()),
                        Term::Variable(v) => Term::Variable(v.clone()),
                    })
                    .collect(),
            )
        };
        Rule::new(
            rule.head
                .iter()
                .map(|l| Literal { atom: map_atom(&l.atom), strong_neg: l.strong_neg })
                .collect(),
            rule.body
                .iter()
                .map(|b| crate::ast::BodyLiteral {
                    literal: Literal {
                        atom: map_atom(&b.literal.atom),
                        strong_neg: b.literal.strong_neg,
                    },
                    default_neg: b.default_neg,
                })
                .collect(),
        )
    };
    let program = Program::new(program.statements().map(map_rule));
    Ok(Restyled { program, predicate_map, constant_map })
}

/// Everything the batch driver needs about one generated sample.
struct Generated {
    record: SampleRecord,
    graph_key: String,
}

struct Pools<'a> {
    lexicon: &'a Lexicon,
    names: &'a [String],
}

fn draw_params(cfg: &GenConfig, rng: &mut ChaCha8Rng, seed: u64) -> GenParams {
    let n = rng.gen_range(cfg.rules_min..=cfg.rules_max.max(cfg.rules_min));
    let min_edges = n.saturating_sub(1);
    let max_edges = if n < 2 { 0 } else { n * (n - 1) / 2 };
    let target = (min_edges + rng.gen_range(0..=cfg.edge_slack)).min(max_edges);
    GenParams {
        n_rules: n,
        target_edges: target,
        extra_predicates: rng.gen_range(0..=cfg.extra_predicates_max),
        extra_edges: rng.gen_range(0..=cfg.extra_edges_max),
        max_body_predicates: cfg.max_body_predicates,
        p_strong_neg: cfg.p_strong_neg,
        p_default_neg: cfg.p_default_neg,
        seed,
    }
}

/// One generation attempt; any failure becomes a resample upstream.
fn try_generate(
    task: Task,
    cfg: &GenConfig,
    pools: &Pools,
    attempt_seed: u64,
) -> Option<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(attempt_seed, 10));
    let params = draw_params(cfg, &mut rng, derive_seed(attempt_seed, 11));
    let rule_graph = build_rule_graph(&params).ok()?;
    let graph = assign_operations(&expand_to_rp_graph(&rule_graph, &params), &params);
    let assignment =
        assign_variables(&graph, (cfg.arity_min, cfg.arity_max), derive_seed(attempt_seed, 12))
            .ok()?;

    let policy = match task {
        Task::Ase => HeadPolicy::SplitRules,
        Task::Asv | Task::Asc => HeadPolicy::Disjunction,
    };
    let mut rules = Vec::new();
    for rule in emit_rules(&graph, &assignment, policy) {
        let (repaired, _) = repair(&rule, DEFAULT_MAX_REPAIR_ATTEMPTS).ok()?;
        rules.push(repaired);
    }

    let n_constants = rng.gen_range(cfg.constants_min..=cfg.constants_max.max(cfg.constants_min));
    let mut pool: Vec<String> = pools.names.to_vec();
    pool.shuffle(&mut rng);
    pool.truncate(n_constants.max(1));

    let facts = formulate_facts(&graph, &assignment, &pool, derive_seed(attempt_seed, 13));
    let base = Program::new(facts.into_iter().chain(rules));

    let n_aug = rng.gen_range(0..=cfg.augment_rules_max);
    let aug_config = AugmentConfig {
        n_rules: n_aug,
        max_body_predicates: cfg.max_body_predicates,
        p_strong_neg: cfg.p_strong_neg,
        p_default_neg: cfg.p_default_neg,
        arity_min: cfg.arity_min,
        arity_max: cfg.arity_max,
        max_derivable: cfg.max_derivable,
    };
    let (augmented, added) =
        augment(&base, &graph, &assignment, &aug_config, derive_seed(attempt_seed, 14)).ok()?;

    let style = cfg.style.style.unwrap_or_else(|| {
        match rng.gen_range(0..3u8) {
            0 => PredicateStyle::PStyle,
            1 => PredicateStyle::RelatedConcepts,
            _ => PredicateStyle::RandomConcepts,
        }
    });
    let restyled = restyle(
        &augmented,
        style,
        pools.lexicon,
        pools.names,
        derive_seed(attempt_seed, 15),
    )
    .ok()?;
    let program = restyled.program;

    let opts = cfg.solve_options();
    let answer_sets = enumerate_answer_sets_with(&program, usize::MAX, &opts).ok()?;
    match task {
        Task::Ase => {
            if answer_sets.len() != 1 || program.has_disjunction() {
                return None;
            }
        }
        Task::Asv | Task::Asc => {
            if answer_sets.is_empty() {
                return None;
            }
        }
    }

    // task payloads
    let mut query = None;
    let mut candidate = None;
    let mut label = None;
    let mut perturbation = None;
    match task {
        Task::Ase => {
            let terminal_old = &assignment.signatures[graph.terminal_pred].name;
            let terminal = restyled.predicate_map[terminal_old].clone();
            let arity = assignment.signatures[graph.terminal_pred].arity;
            let constants: Vec<String> = program.constants().into_iter().collect();
            if arity > 0 && constants.is_empty() {
                return None;
            }
            let args: Vec<Term> = (0..arity)
                .map(|_| Term::constant(constants[rng.gen_range(0..constants.len())].clone()))
                .collect();
            let atom = Atom::new(terminal, args);
            let positive = Literal::positive(atom.clone());
            let s = &answer_sets[0];
            let truth = if s.contains(&positive) {
                "True"
            } else if s.contains(&positive.complement()) {
                "False"
            } else {
                "Unknown"
            };
            if let Some(wanted) = &cfg.requested_label {
                if wanted != truth {
                    return None;
                }
            }
            query = Some(positive.to_string());
            label = Some(truth.to_string());
        }
        Task::Asv => {
            let base_set = answer_sets[rng.gen_range(0..answer_sets.len())].clone();
            let yes = rng.gen_bool(0.5);
            if yes {
                let diag = verify_with(&program, base_set.literals(), &opts).ok()?;
                if !diag.verdict {
                    return None;
                }
                candidate = Some(base_set.iter().map(|l| l.to_string()).collect());
                label = Some("Yes".to_string());
            } else {
                let (set, applied) =
                    perturb(&program, base_set.literals(), pools, &mut rng, cfg, &opts)?;
                candidate = Some(set.iter().map(|l| l.to_string()).collect());
                label = Some("No".to_string());
                perturbation = Some(applied);
            }
        }
        Task::Asc => {}
    }

    let grounded = ground(&program).ok()?;
    let derivable: BTreeSet<&Literal> =
        grounded.rules.iter().flat_map(|r| r.head.iter()).collect();
    let counts = SampleCounts {
        rules: program.rules.len(),
        facts: program.facts.len(),
        predicates: program.predicates().len(),
        constants: program.constants().len(),
        derivable_literals: derivable.len(),
        chain_length: chain_length(&rule_graph),
        augmented_rules: added,
    };
    let record = SampleRecord {
        id: String::new(),
        task,
        program_lp: crate::parser::print_program(&program),
        program_text: textualize_program(&program),
        query,
        candidate,
        label,
        answer_sets: answer_sets
            .iter()
            .map(|s| s.iter().map(|l| l.to_string()).collect())
            .collect(),
        metadata: SampleMetadata {
            seed: attempt_seed,
            predicate_style: style,
            class: classify(&program),
            perturbation,
            counts,
        },
        program,
    };
    Some(Generated { record, graph_key: dedup_key(&graph) })
}

/// Apply one modification to a correct answer set and certify that the
/// result really fails verification; retried when a perturbation lands
/// on another answer set.
fn perturb(
    program: &Program,
    base: &BTreeSet<Literal>,
    pools: &Pools,
    rng: &mut ChaCha8Rng,
    _cfg: &GenConfig,
    opts: &SolveOptions,
) -> Option<(BTreeSet<Literal>, Perturbation)> {
    let literals: Vec<Literal> = base.iter().cloned().collect();
    if literals.is_empty() {
        return None;
    }
    let constants: Vec<String> = program.constants().into_iter().collect();
    let signature = program.signature();

    for _ in 0..24 {
        let kind = PerturbationKind::ALL[rng.gen_range(0..4)];
        let target = literals[rng.gen_range(0..literals.len())].clone();
        let mut set = base.clone();
        let applied = match kind {
            PerturbationKind::FlipNegation => {
                let flipped = target.complement();
                set.remove(&target);
                set.insert(flipped.clone());
                Perturbation {
                    kind,
                    target: target.to_string(),
                    replacement: Some(flipped.to_string()),
                }
            }
            PerturbationKind::DeleteFact => {
                set.remove(&target);
                Perturbation { kind, target: target.to_string(), replacement: None }
            }
            PerturbationKind::AddModifiedFactConstants => {
                if target.atom.args.is_empty() {
                    continue;
                }
                let slot = rng.gen_range(0..target.atom.args.len());
                let old = target.atom.args[slot].name();
                let replacements: Vec<&String> = constants
                    .iter()
                    .filter(|c| c.as_str() != old)
                    .chain(pools.names.iter().filter(|n| !constants.contains(*n)).take(4))
                    .collect();
                if replacements.is_empty() {
                    continue;
                }
                let new_const = replacements[rng.gen_range(0..replacements.len())].clone();
                let mut args = target.atom.args.clone();
                args[slot] = Term::constant(new_const);
                let modified = Literal {
                    atom: Atom::new(target.atom.predicate.clone(), args),
                    strong_neg: target.strong_neg,
                };
                if set.contains(&modified) || set.contains(&modified.complement()) {
                    continue;
                }
                set.insert(modified.clone());
                Perturbation {
                    kind,
                    target: target.to_string(),
                    replacement: Some(modified.to_string()),
                }
            }
            PerturbationKind::AddModifiedFactPredicate => {
                let arity = target.atom.arity();
                let alternatives: Vec<&String> = signature
                    .iter()
                    .filter(|(name, arities)| {
                        arities.contains(&arity) && **name != target.atom.predicate
                    })
                    .map(|(name, _)| name)
                    .collect();
                let new_pred = if alternatives.is_empty() {
                    pools
                        .lexicon
                        .concepts
                        .iter()
                        .find(|c| !signature.contains_key(*c))?
                        .clone()
                } else {
                    alternatives[rng.gen_range(0..alternatives.len())].clone()
                };
                let modified = Literal {
                    atom: Atom::new(new_pred, target.atom.args.clone()),
                    strong_neg: target.strong_neg,
                };
                if set.contains(&modified) || set.contains(&modified.complement()) {
                    continue;
                }
                set.insert(modified.clone());
                Perturbation {
                    kind,
                    target: target.to_string(),
                    replacement: Some(modified.to_string()),
                }
            }
        };
        match verify_with(program, &set, opts) {
            Ok(diag) if !diag.verdict => return Some((set, applied)),
            Ok(_) => continue, // landed on another answer set; redraw
            Err(_) => return None,
        }
    }
    None
}

fn generate_one(
    task: Task,
    cfg: &GenConfig,
    pools: &Pools,
    sample_seed: u64,
) -> Result<Generated, GenError> {
    for attempt in 0..cfg.resample_budget {
        let attempt_seed = derive_seed(sample_seed, 100 + attempt as u64);
        if let Some(generated) = try_generate(task, cfg, pools, attempt_seed) {
            return Ok(generated);
        }
    }
    Err(GenError::ResampleBudgetExhausted {
        id: format!("seed {sample_seed:#x}"),
        attempts: cfg.resample_budget,
    })
}

/// Generate one entailment sample: a disjunction-free program with
/// exactly one answer set, a positive query over the terminal
/// predicate, and the solver-computed three-valued label.
pub fn make_ase_sample(cfg: &GenConfig, seed: u64) -> Result<SampleRecord, GenError> {
    make_sample(Task::Ase, cfg, seed)
}

/// Generate one verification sample: a program with at least one answer
/// set and a candidate that is either a real answer set (Yes) or a
/// certified perturbation of one (No).
pub fn make_asv_sample(cfg: &GenConfig, seed: u64) -> Result<SampleRecord, GenError> {
    make_sample(Task::Asv, cfg, seed)
}

/// Generate one computation sample: a program with at least one answer
/// set and the complete enumerated answer-set list as ground truth.
pub fn make_asc_sample(cfg: &GenConfig, seed: u64) -> Result<SampleRecord, GenError> {
    make_sample(Task::Asc, cfg, seed)
}

fn make_sample(task: Task, cfg: &GenConfig, seed: u64) -> Result<SampleRecord, GenError> {
    let lexicon = Lexicon::load(&cfg.style)?;
    let names = bundled_names();
    let pools = Pools { lexicon: &lexicon, names: &names };
    let mut generated = generate_one(task, cfg, &pools, seed)?;
    generated.record.id = format!("{}-{seed:016x}", task.to_string().to_lowercase());
    Ok(generated.record)
}

/// Generate a batch of `num` samples. Sample `i` is a deterministic
/// function of (config, master seed, i): generation runs in parallel,
/// then a sequential scan accepts samples in index order, regenerating
/// any whose graph fingerprint was already seen. If the structure space
/// is too small the last round admits repeats rather than failing.
pub fn generate_batch(
    task: Task,
    num: usize,
    master_seed: u64,
    cfg: &GenConfig,
) -> Result<Vec<SampleRecord>, GenError> {
    let lexicon = Lexicon::load(&cfg.style)?;
    let names = bundled_names();

    let mut accepted: Vec<Option<SampleRecord>> = vec![None; num];
    let mut fallback: Vec<Option<SampleRecord>> = vec![None; num];
    let mut seen: BTreeSet<String> = BTreeSet::new();

    for round in 0..DEDUP_ROUNDS {
        let pending: Vec<usize> =
            (0..num).filter(|&i| accepted[i].is_none()).collect();
        if pending.is_empty() {
            break;
        }
        let results: Vec<(usize, Result<Generated, GenError>)> = pending
            .par_iter()
            .map(|&i| {
                let pools = Pools { lexicon: &lexicon, names: &names };
                let sample_seed = derive_seed(derive_seed(master_seed, i as u64), 1000 + round);
                (i, generate_one(task, cfg, &pools, sample_seed))
            })
            .collect();
        for (i, result) in results {
            let generated = result.map_err(|e| match e {
                GenError::ResampleBudgetExhausted { attempts, .. } => {
                    GenError::ResampleBudgetExhausted {
                        id: format!("{}-{i:05}", task.to_string().to_lowercase()),
                        attempts,
                    }
                }
                other => other,
            })?;
            let mut record = generated.record;
            record.id = format!("{}-{i:05}", task.to_string().to_lowercase());
            if !cfg.dedup || seen.insert(generated.graph_key) {
                accepted[i] = Some(record);
            } else {
                fallback[i] = Some(record);
            }
        }
    }
    let records = accepted
        .into_iter()
        .zip(fallback)
        .map(|(a, f)| a.or(f).expect("every index resolved"))
        .collect();
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_literal, parse_program};
    use crate::solver::enumerate_answer_sets;

    fn quick_cfg() -> GenConfig {
        GenConfig { rules_min: 1, rules_max: 3, augment_rules_max: 2, ..GenConfig::default() }
    }

    #[test]
    fn formulate_facts_follows_type_table() {
        let params = GenParams {
            n_rules: 1,
            target_edges: 0,
            extra_predicates: 2,
            extra_edges: 0,
            seed: 1,
            ..GenParams::default()
        };
        let rg = build_rule_graph(&params).unwrap();
        let mut g = expand_to_rp_graph(&rg, &params);
        // inputs: the original P_in plus two extras; force the types
        let inputs = g.input_preds();
        let types = [NegOp::P, NegOp::Sn, NegOp::Dn, NegOp::SnDn];
        for (i, t) in g.types.iter_mut().enumerate() {
            *t = Some(types[i % 4]);
        }
        let assignment = assign_variables(&g, (1, 1), 3).unwrap();
        let pool = vec!["Tweety".to_string()];
        let facts = formulate_facts(&g, &assignment, &pool, 0);
        assert_eq!(facts.len(), inputs.len());
        for (fact, &p) in facts.iter().zip(&inputs) {
            let lit = &fact.head[0];
            match g.types[p].unwrap() {
                NegOp::P | NegOp::SnDn => assert!(!lit.strong_neg),
                NegOp::Sn | NegOp::Dn => assert!(lit.strong_neg),
            }
            assert!(fact.is_fact());
            assert_eq!(lit.atom.args.len(), 1);
            assert_eq!(lit.atom.args[0].name(), "Tweety");
        }
    }

    /// First seed at or after `start` whose emitted rules all repair.
    fn pipeline(start: u64, n_rules: usize) -> (RpoGraph, Assignment, Program) {
        for seed in start.. {
            let params = GenParams {
                n_rules,
                target_edges: n_rules.saturating_sub(1),
                seed,
                ..GenParams::default()
            };
            let rg = build_rule_graph(&params).unwrap();
            let g = assign_operations(&expand_to_rp_graph(&rg, &params), &params);
            let a = assign_variables(&g, (0, 2), seed).unwrap();
            let pool = vec!["Alice".to_string(), "Bob".to_string()];
            let facts = formulate_facts(&g, &a, &pool, seed);
            let repaired: Option<Vec<Rule>> = emit_rules(&g, &a, HeadPolicy::SplitRules)
                .into_iter()
                .map(|r| repair(&r, 64).ok().map(|(rule, _)| rule))
                .collect();
            if let Some(rules) = repaired {
                let program = Program::new(facts.into_iter().chain(rules));
                return (g, a, program);
            }
        }
        unreachable!()
    }

    #[test]
    fn zero_augmentation_is_identity() {
        let (g, a, program) = pipeline(4, 3);
        let cfg = AugmentConfig {
            n_rules: 0,
            max_body_predicates: 3,
            p_strong_neg: 0.3,
            p_default_neg: 0.3,
            arity_min: 0,
            arity_max: 2,
            max_derivable: 18,
        };
        let (out, added) = augment(&program, &g, &a, &cfg, 9).unwrap();
        assert_eq!(out, program);
        assert_eq!(added, 0);
    }

    #[test]
    fn augmentation_adds_safe_rules_within_bound() {
        let (g, a, program) = pipeline(8, 2);
        let cfg = AugmentConfig {
            n_rules: 3,
            max_body_predicates: 3,
            p_strong_neg: 0.3,
            p_default_neg: 0.3,
            arity_min: 0,
            arity_max: 2,
            max_derivable: 18,
        };
        match augment(&program, &g, &a, &cfg, 77) {
            Ok((out, added)) => {
                assert!(added > 0);
                assert!(out.len() > program.len());
                for rule in out.statements() {
                    assert!(crate::grounder::safety_check(rule).is_empty());
                }
            }
            Err(GenError::AugmentationOverflow { .. }) => {}
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn restyle_is_bijective_and_arity_preserving() {
        let p = parse_program("p0(a). p1(a, b).\np2(X) :- p0(X), not p1(X, X).").unwrap();
        let lexicon = Lexicon::bundled();
        let names = bundled_names();
        for style in [
            PredicateStyle::PStyle,
            PredicateStyle::RelatedConcepts,
            PredicateStyle::RandomConcepts,
        ] {
            let restyled = restyle(&p, style, &lexicon, &names, 5).unwrap();
            let values: BTreeSet<&String> = restyled.predicate_map.values().collect();
            assert_eq!(values.len(), restyled.predicate_map.len(), "injective rename");
            let old_sig = p.signature();
            let new_sig = restyled.program.signature();
            for (old, new) in &restyled.predicate_map {
                assert_eq!(old_sig[old], new_sig[new], "arity preserved for {old}->{new}");
            }
            let const_values: BTreeSet<&String> = restyled.constant_map.values().collect();
            assert_eq!(const_values.len(), restyled.constant_map.len());
        }
    }

    #[test]
    fn related_style_uses_triple_connected_pairs() {
        // a(V0) :- -b(V0). should draw names from one triple
        let p = parse_program("b(c).\na(V0) :- -b(V0).").unwrap();
        let lexicon = Lexicon::bundled();
        let names = bundled_names();
        let restyled =
            restyle(&p, PredicateStyle::RelatedConcepts, &lexicon, &names, 3).unwrap();
        let a_name = &restyled.predicate_map["a"];
        let b_name = &restyled.predicate_map["b"];
        assert!(
            lexicon
                .triples
                .iter()
                .any(|(h, _, t)| h == b_name && t == a_name),
            "{b_name} -> {a_name} should come from one lexicon triple"
        );
    }

    #[test]
    fn restyle_commutes_with_solving() {
        let text = "p(a). -q(b).\nr(X) :- p(X), not q(X).";
        let p = parse_program(text).unwrap();
        let lexicon = Lexicon::bundled();
        let names = bundled_names();
        let restyled = restyle(&p, PredicateStyle::RandomConcepts, &lexicon, &names, 11).unwrap();

        let before = enumerate_answer_sets(&p, usize::MAX).unwrap();
        let after = enumerate_answer_sets(&restyled.program, usize::MAX).unwrap();
        assert_eq!(before.len(), after.len());
        for (b, a) in before.iter().zip(after.iter()) {
            let mapped: BTreeSet<String> = b
                .iter()
                .map(|l| {
                    let mut lit = l.clone();
                    lit.atom.predicate = restyled.predicate_map[&lit.atom.predicate].clone();
                    lit.atom.args = lit
                        .atom
                        .args
                        .iter()
                        .map(|t| Term::constant(restyled.constant_map[t.name()].clone()))
                        .collect();
                    lit.to_string()
                })
                .collect();
            let actual: BTreeSet<String> = a.iter().map(|l| l.to_string()).collect();
            assert_eq!(mapped, actual);
        }
    }

    #[test]
    fn ase_samples_have_unique_answer_set_and_positive_query() {
        let cfg = quick_cfg();
        for seed in 0..20 {
            let record = make_ase_sample(&cfg, seed).unwrap();
            assert_eq!(record.answer_sets.len(), 1);
            assert!(!record.program_lp.contains('|'));
            let query = parse_literal(record.query.as_deref().unwrap()).unwrap();
            assert!(!query.strong_neg);
            assert!(query.is_ground());
            assert!(matches!(
                record.label.as_deref(),
                Some("True" | "False" | "Unknown")
            ));
            // reparse and re-solve: the stored label must be certified
            let program = parse_program(&record.program_lp).unwrap();
            let state = crate::solver::entail_with(
                &program,
                &query.atom,
                &cfg.solve_options(),
            )
            .unwrap();
            assert_eq!(state.to_string(), record.label.clone().unwrap());
        }
    }

    #[test]
    fn asv_samples_are_certified() {
        let cfg = quick_cfg();
        let mut yes = 0;
        let mut no = 0;
        for seed in 0..20 {
            let record = make_asv_sample(&cfg, seed).unwrap();
            let program = parse_program(&record.program_lp).unwrap();
            let candidate: BTreeSet<Literal> = record
                .candidate
                .as_ref()
                .unwrap()
                .iter()
                .map(|s| parse_literal(s).unwrap())
                .collect();
            let diag = verify_with(&program, &candidate, &cfg.solve_options()).unwrap();
            match record.label.as_deref() {
                Some("Yes") => {
                    assert!(diag.verdict);
                    assert!(record.metadata.perturbation.is_none());
                    yes += 1;
                }
                Some("No") => {
                    assert!(!diag.verdict);
                    assert!(record.metadata.perturbation.is_some());
                    no += 1;
                }
                other => panic!("bad label {other:?}"),
            }
        }
        assert!(yes > 0 && no > 0);
    }

    #[test]
    fn asc_samples_store_all_answer_sets() {
        let cfg = quick_cfg();
        for seed in 0..15 {
            let record = make_asc_sample(&cfg, seed).unwrap();
            assert!(!record.answer_sets.is_empty());
            let program = parse_program(&record.program_lp).unwrap();
            let sets = enumerate_answer_sets_with(&program, usize::MAX, &cfg.solve_options())
                .unwrap();
            assert_eq!(sets.len(), record.answer_sets.len());
            for stored in &record.answer_sets {
                let set: BTreeSet<Literal> =
                    stored.iter().map(|s| parse_literal(s).unwrap()).collect();
                let diag = verify_with(&program, &set, &cfg.solve_options()).unwrap();
                assert!(diag.verdict, "stored answer set must re-verify");
            }
        }
    }

    #[test]
    fn batches_are_deterministic_and_ordered() {
        let cfg = quick_cfg();
        let a = generate_batch(Task::Ase, 6, 42, &cfg).unwrap();
        let b = generate_batch(Task::Ase, 6, 42, &cfg).unwrap();
        assert_eq!(a, b);
        for (i, record) in a.iter().enumerate() {
            assert_eq!(record.id, format!("ase-{i:05}"));
        }
        let other = generate_batch(Task::Ase, 6, 43, &cfg).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn emitted_programs_roundtrip_and_solve() {
        let cfg = quick_cfg();
        for record in generate_batch(Task::Asc, 8, 7, &cfg).unwrap() {
            let reparsed = parse_program(&record.program_lp).unwrap();
            assert_eq!(reparsed.canonical(), record.program.canonical());
            assert_eq!(
                record.program_text.len(),
                record.program.len(),
                "one sentence per statement"
            );
        }
    }
}
