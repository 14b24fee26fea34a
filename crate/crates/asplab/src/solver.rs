//! Reference stable-model engine.
//!
//! A set `S` is an answer set of a program `P` when `S` is a minimal
//! model of the reduct of `P` with respect to `S`: drop every ground
//! rule whose body contains `not l` with `l ∈ S`, erase the remaining
//! default literals, and check that `S` satisfies the result while no
//! proper subset does.
//!
//! Enumeration tests exactly the candidate sets that can matter: every
//! literal of a minimal model of a reduct occurs in some rule head (a
//! literal outside every head could be removed and still leave a model),
//! so candidates range over consistent subsets of the ground head
//! literals. This stays sound and complete at the scale this crate is
//! used for and is cross-checked against a brute-force oracle in tests.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{is_consistent, AnswerSet, Atom, BodyLiteral, Literal, Program, Rule};
use crate::grounder::{ground, GroundError, GroundProgram};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("ground program has {count} derivable literals, above the bound of {bound}")]
    GroundSizeExceeded { count: usize, bound: usize },
    #[error("candidate set contains a literal and its strong negation")]
    InconsistentCandidate,
    #[error("program has {count} answer sets, entailment needs exactly one")]
    NotSingleAnswerSet { count: usize },
}

/// Three-valued truth state of a query atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruthState {
    True,
    False,
    Unknown,
}

impl std::fmt::Display for TruthState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TruthState::True => f.write_str("True"),
            TruthState::False => f.write_str("False"),
            TruthState::Unknown => f.write_str("Unknown"),
        }
    }
}

/// Syntactic classification of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassReport {
    /// Neither strong nor default negation occurs.
    pub positive: bool,
    /// No dependency cycle runs through a default-negation edge.
    pub stratified: bool,
    /// The positive dependency graph is acyclic: no positive recursion,
    /// including through disjunctive heads.
    pub head_cycle_free: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerifyFailure {
    Inconsistent,
    NotModelOfReduct,
    NotMinimal,
    None,
}

/// Outcome of checking a candidate set against a program. `verdict` is
/// true exactly when `failure` is `None`; a `NotMinimal` failure carries
/// a strictly smaller model as witness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyDiagnosis {
    pub verdict: bool,
    pub failure: VerifyFailure,
    pub witness: Option<BTreeSet<Literal>>,
}

/// Enumeration bound: the number of distinct ground head literals a
/// program may have before the solver refuses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub max_derivable: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_derivable: 18 }
    }
}

/// Gelfond-Lifschitz reduct of a ground program with respect to a
/// candidate set: (1) delete each rule whose body has `not l` with
/// `l` in the candidate, (2) erase all remaining default literals.
pub fn reduct(g: &GroundProgram, candidate: &BTreeSet<Literal>) -> Result<GroundProgram, SolveError> {
    if !is_consistent(candidate) {
        return Err(SolveError::InconsistentCandidate);
    }
    let mut rules = Vec::new();
    for rule in &g.rules {
        let blocked = rule
            .body
            .iter()
            .any(|b| b.default_neg && candidate.contains(&b.literal));
        if blocked {
            continue;
        }
        let body: Vec<BodyLiteral> =
            rule.body.iter().filter(|b| !b.default_neg).cloned().collect();
        rules.push(Rule::new(rule.head.clone(), body));
    }
    let atoms = rules.iter().flat_map(Rule::atoms).cloned().collect();
    Ok(GroundProgram { rules, atoms })
}

/// Does `s` satisfy every rule of a default-negation-free ground
/// program? Constraints are satisfied when their body does not hold.
pub fn is_model(s: &BTreeSet<Literal>, g: &GroundProgram) -> bool {
    g.rules.iter().all(|rule| {
        let body_holds = rule.body.iter().all(|b| {
            debug_assert!(!b.default_neg, "is_model expects a reduct");
            s.contains(&b.literal)
        });
        !body_holds || rule.head.iter().any(|h| s.contains(h))
    })
}

/// Search for a model of `g` strictly contained in `s`. Returns the
/// first one found. `g` must be default-negation-free and `s` a model.
fn find_smaller_model(
    s: &BTreeSet<Literal>,
    g: &GroundProgram,
) -> Result<Option<BTreeSet<Literal>>, SolveError> {
    // Literals of s outside the program vocabulary can always be
    // dropped: no rule mentions them, so the rest stays a model.
    let vocab: BTreeSet<&Literal> = g
        .rules
        .iter()
        .flat_map(|r| r.head.iter().chain(r.body.iter().map(|b| &b.literal)))
        .collect();
    let in_vocab: BTreeSet<Literal> = s.iter().filter(|l| vocab.contains(l)).cloned().collect();
    if in_vocab.len() < s.len() {
        return Ok(Some(in_vocab));
    }

    let lits: Vec<&Literal> = s.iter().collect();
    if lits.len() > 60 {
        return Err(SolveError::GroundSizeExceeded { count: lits.len(), bound: 60 });
    }
    let index: HashMap<&Literal, usize> = lits.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let full: u64 = if lits.is_empty() { 0 } else { (1u64 << lits.len()) - 1 };

    // Only rules whose body lies inside s can fire for any subset of s.
    let mut relevant: Vec<(u64, u64)> = Vec::new();
    for rule in &g.rules {
        let mut body = 0u64;
        let mut fires = true;
        for b in &rule.body {
            match index.get(&b.literal) {
                Some(&i) => body |= 1 << i,
                None => {
                    fires = false;
                    break;
                }
            }
        }
        if !fires {
            continue;
        }
        let head: u64 = rule.head.iter().filter_map(|h| index.get(h)).map(|&i| 1 << i).fold(0, |m, b| m | b);
        relevant.push((body, head));
    }

    // Literals forced into every model below s: single-choice heads of
    // rules whose bodies are already forced.
    let mut core = 0u64;
    loop {
        let mut changed = false;
        for &(body, head) in &relevant {
            if body & core == body && head.count_ones() == 1 && core & head == 0 {
                core |= head;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if core == full {
        return Ok(None);
    }

    let free = full & !core;
    let mut sub = free;
    loop {
        sub = sub.wrapping_sub(1) & free;
        let m = core | sub;
        if m != full {
            let is_m_model = relevant
                .iter()
                .all(|&(body, head)| body & m != body || head & m != 0);
            if is_m_model {
                let set = lits
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| m & (1 << i) != 0)
                    .map(|(_, l)| (*l).clone())
                    .collect();
                return Ok(Some(set));
            }
        }
        if sub == 0 {
            break;
        }
    }
    Ok(None)
}

/// True iff `s` satisfies every rule of the (default-negation-free)
/// ground program and no proper subset of `s` does too.
pub fn is_minimal_model(s: &BTreeSet<Literal>, g: &GroundProgram) -> bool {
    if !is_model(s, g) {
        return false;
    }
    find_smaller_model(s, g)
        .expect("minimal-model search only supports sets of up to 60 literals")
        .is_none()
}

/// Compiled rule over derivable-literal bit indices.
struct MaskRule {
    head: u64,
    body: u64,
    dn: u64,
}

struct Engine {
    lits: Vec<Literal>,
    rules: Vec<MaskRule>,
    required: u64,
    full: u64,
    conflicts: Vec<u64>,
}

impl Engine {
    fn build(g: &GroundProgram, opts: &SolveOptions) -> Result<Engine, SolveError> {
        let derivable: BTreeSet<Literal> =
            g.rules.iter().flat_map(|r| r.head.iter().cloned()).collect();
        if derivable.len() > opts.max_derivable {
            return Err(SolveError::GroundSizeExceeded {
                count: derivable.len(),
                bound: opts.max_derivable,
            });
        }
        let lits: Vec<Literal> = derivable.into_iter().collect();
        let index: HashMap<&Literal, usize> =
            lits.iter().enumerate().map(|(i, l)| (l, i)).collect();

        let mut rules = Vec::new();
        'rule: for rule in &g.rules {
            let mut head = 0u64;
            for h in &rule.head {
                head |= 1 << index[h];
            }
            let mut body = 0u64;
            let mut dn = 0u64;
            for b in &rule.body {
                if b.default_neg {
                    // `not l` with underivable l always holds; erase it.
                    if let Some(&i) = index.get(&b.literal) {
                        dn |= 1 << i;
                    }
                } else {
                    match index.get(&b.literal) {
                        Some(&i) => body |= 1 << i,
                        // an underivable positive body literal means the
                        // rule can never fire
                        None => continue 'rule,
                    }
                }
            }
            rules.push(MaskRule { head, body, dn });
        }

        let required = rules
            .iter()
            .filter(|r| r.body == 0 && r.dn == 0 && r.head.count_ones() == 1)
            .fold(0u64, |m, r| m | r.head);
        let full = if lits.is_empty() { 0 } else { (1u64 << lits.len()) - 1 };

        let mut conflicts = Vec::new();
        for (i, lit) in lits.iter().enumerate() {
            if let Some(&j) = index.get(&lit.complement()) {
                if i < j {
                    conflicts.push((1u64 << i) | (1u64 << j));
                }
            }
        }
        Ok(Engine { lits, rules, required, full, conflicts })
    }

    fn consistent(&self, s: u64) -> bool {
        self.conflicts.iter().all(|&pair| s & pair != pair)
    }

    /// Answer-set test for one candidate mask: model of the reduct,
    /// then minimality (least-fixpoint core, subset search only if the
    /// core leaves slack).
    fn is_answer_set(&self, s: u64, scratch: &mut Vec<(u64, u64)>) -> bool {
        scratch.clear();
        for rule in &self.rules {
            if rule.dn & s != 0 {
                continue; // blocked: some `not l` has l in the candidate
            }
            if rule.body & s == rule.body {
                if rule.head & s == 0 {
                    return false; // fires but head unsatisfied (or constraint)
                }
                scratch.push((rule.body, rule.head & s));
            }
        }
        // minimality over subsets of s; only rules with body within s matter
        let mut core = 0u64;
        loop {
            let mut changed = false;
            for &(body, head_s) in scratch.iter() {
                if body & core == body && head_s.count_ones() == 1 && core & head_s == 0 {
                    core |= head_s;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if core == s {
            return true;
        }
        let free = s & !core;
        let mut sub = free;
        loop {
            sub = sub.wrapping_sub(1) & free;
            let m = core | sub;
            if m != s {
                let is_m_model =
                    scratch.iter().all(|&(body, head_s)| body & m != body || head_s & m != 0);
                if is_m_model {
                    return false;
                }
            }
            if sub == 0 {
                break;
            }
        }
        true
    }

    fn mask_to_set(&self, s: u64) -> BTreeSet<Literal> {
        self.lits
            .iter()
            .enumerate()
            .filter(|(i, _)| s & (1 << i) != 0)
            .map(|(_, l)| l.clone())
            .collect()
    }
}

/// All answer sets of a program, canonically ordered and truncated at
/// `limit`, using the default ground-size bound.
pub fn enumerate_answer_sets(p: &Program, limit: usize) -> Result<Vec<AnswerSet>, SolveError> {
    enumerate_answer_sets_with(p, limit, &SolveOptions::default())
}

pub fn enumerate_answer_sets_with(
    p: &Program,
    limit: usize,
    opts: &SolveOptions,
) -> Result<Vec<AnswerSet>, SolveError> {
    let g = ground(p)?;
    let engine = Engine::build(&g, opts)?;

    let mut found: Vec<AnswerSet> = Vec::new();
    if !engine.consistent(engine.required) {
        return Ok(found);
    }
    let free = engine.full & !engine.required;
    let mut scratch = Vec::new();
    let mut sub = free;
    loop {
        let s = engine.required | sub;
        if engine.consistent(s) && engine.is_answer_set(s, &mut scratch) {
            let set = AnswerSet::new(engine.mask_to_set(s))
                .expect("consistent candidates only");
            found.push(set);
        }
        if sub == 0 {
            break;
        }
        sub = sub.wrapping_sub(1) & free;
    }
    found.sort();
    found.dedup();
    found.truncate(limit);
    Ok(found)
}

/// Check whether a candidate set of ground literals is an answer set,
/// reporting the first failing stage and a witness where one exists.
pub fn verify(p: &Program, candidate: &BTreeSet<Literal>) -> Result<VerifyDiagnosis, SolveError> {
    verify_with(p, candidate, &SolveOptions::default())
}

pub fn verify_with(
    p: &Program,
    candidate: &BTreeSet<Literal>,
    opts: &SolveOptions,
) -> Result<VerifyDiagnosis, SolveError> {
    if let Some(bad) = candidate.iter().find(|l| candidate.contains(&l.complement())) {
        let pair: BTreeSet<Literal> = [bad.clone(), bad.complement()].into_iter().collect();
        return Ok(VerifyDiagnosis {
            verdict: false,
            failure: VerifyFailure::Inconsistent,
            witness: Some(pair),
        });
    }
    let g = ground(p)?;
    let derivable: BTreeSet<&Literal> = g.rules.iter().flat_map(|r| r.head.iter()).collect();
    if derivable.len() > opts.max_derivable {
        return Err(SolveError::GroundSizeExceeded {
            count: derivable.len(),
            bound: opts.max_derivable,
        });
    }
    let gl_reduct = reduct(&g, candidate)?;
    if !is_model(candidate, &gl_reduct) {
        return Ok(VerifyDiagnosis {
            verdict: false,
            failure: VerifyFailure::NotModelOfReduct,
            witness: None,
        });
    }
    match find_smaller_model(candidate, &gl_reduct)? {
        Some(witness) => Ok(VerifyDiagnosis {
            verdict: false,
            failure: VerifyFailure::NotMinimal,
            witness: Some(witness),
        }),
        None => Ok(VerifyDiagnosis { verdict: true, failure: VerifyFailure::None, witness: None }),
    }
}

/// Truth state of a ground query atom in the unique answer set.
pub fn entail(p: &Program, query: &Atom) -> Result<TruthState, SolveError> {
    entail_with(p, query, &SolveOptions::default())
}

pub fn entail_with(p: &Program, query: &Atom, opts: &SolveOptions) -> Result<TruthState, SolveError> {
    let sets = enumerate_answer_sets_with(p, 2, opts)?;
    if sets.len() != 1 {
        return Err(SolveError::NotSingleAnswerSet { count: sets.len() });
    }
    let s = &sets[0];
    let positive = Literal::positive(query.clone());
    if s.contains(&positive) {
        Ok(TruthState::True)
    } else if s.contains(&positive.complement()) {
        Ok(TruthState::False)
    } else {
        Ok(TruthState::Unknown)
    }
}

/// Syntactic classification over the predicate dependency graph.
///
/// Edges run from body predicates to head predicates; an edge is
/// negative when the body occurrence is default-negated. Stratified
/// means no cycle through a negative edge. Head-cycle-freeness follows
/// the published examples rather than the usual shared-disjunctive-head
/// definition: the graph restricted to non-default edges must be acyclic.
pub fn classify(p: &Program) -> ClassReport {
    let positive = p.statements().all(|r| {
        r.head.iter().all(|h| !h.strong_neg)
            && r.body.iter().all(|b| !b.default_neg && !b.literal.strong_neg)
    });

    let mut nodes: HashMap<(String, usize), petgraph::graph::NodeIndex> = HashMap::new();
    let mut graph = petgraph::graph::DiGraph::<(), bool>::new();
    let mut node = |graph: &mut petgraph::graph::DiGraph<(), bool>,
                    nodes: &mut HashMap<(String, usize), petgraph::graph::NodeIndex>,
                    atom: &Atom| {
        *nodes
            .entry((atom.predicate.clone(), atom.arity()))
            .or_insert_with(|| graph.add_node(()))
    };
    for rule in p.statements() {
        for h in &rule.head {
            let to = node(&mut graph, &mut nodes, &h.atom);
            for b in &rule.body {
                let from = node(&mut graph, &mut nodes, &b.literal.atom);
                graph.add_edge(from, to, b.default_neg);
            }
        }
    }

    let scc = petgraph::algo::tarjan_scc(&graph);
    let mut scc_of = HashMap::new();
    for (i, comp) in scc.iter().enumerate() {
        for &n in comp {
            scc_of.insert(n, i);
        }
    }
    let stratified = !graph.edge_indices().any(|e| {
        let (a, b) = graph.edge_endpoints(e).unwrap();
        *graph.edge_weight(e).unwrap() && scc_of[&a] == scc_of[&b]
    });

    let positive_graph = graph.filter_map(
        |_, _| Some(()),
        |e, &neg| if neg { None } else { Some(e) },
    );
    let head_cycle_free = !petgraph::algo::is_cyclic_directed(&positive_graph);

    ClassReport { positive, stratified, head_cycle_free }
}
