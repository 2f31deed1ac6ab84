//! Minimal deterministic acyclic automaton over the case variants of a log.
//!
//! Construction is the incremental algorithm for sorted input: words are
//! inserted in lexicographic order and every suffix that can no longer change
//! is either merged with an equivalent registered state or registered itself.
//! The result is minimal without a separate minimization pass.

mod annotate;

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Display, Write as _};
use std::hash::Hash;

use crate::error::{Error, Result};

pub use annotate::{
    annotate_log, contingency_table, prepare, AnnotatedCase, AnnotatedEvent, AnnotatedLog,
    ContingencyTable, TransitionVariantIndex,
};

pub type StateId = usize;
pub type TransitionId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition<L> {
    pub source: StateId,
    pub label: L,
    pub target: StateId,
}

#[derive(Debug, Clone, Default)]
struct State {
    is_final: bool,
    /// Outgoing transition ids, ordered by label.
    out: Vec<TransitionId>,
    in_degree: usize,
}

#[derive(Debug, Clone)]
pub struct Dafsa<L> {
    states: Vec<State>,
    transitions: Vec<Transition<L>>,
}

/// Builds the minimal DAFSA accepting exactly `variants`. Duplicate words
/// collapse; the empty word and the empty set are rejected.
pub fn build_minimal_dafsa<L, I>(variants: I) -> Result<Dafsa<L>>
where
    L: Ord + Clone + Hash,
    I: IntoIterator<Item = Vec<L>>,
{
    let mut words: Vec<Vec<L>> = variants.into_iter().collect();
    if words.is_empty() {
        return Err(Error::Validation("cannot build an automaton from no variants".into()));
    }
    if words.iter().any(Vec::is_empty) {
        return Err(Error::Validation("variants must contain at least one activity".into()));
    }
    words.sort();
    words.dedup();

    let mut builder = Builder::new();
    for w in &words {
        builder.insert(w);
    }
    Ok(builder.finish())
}

struct BuildNode<L> {
    is_final: bool,
    edges: Vec<(L, usize)>,
}

struct Builder<L> {
    nodes: Vec<BuildNode<L>>,
    register: HashMap<(bool, Vec<(L, usize)>), usize>,
    /// Path of the previously inserted word not yet checked against the
    /// register: `(parent, label, child)`.
    unchecked: Vec<(usize, L, usize)>,
    previous: Vec<L>,
}

impl<L: Ord + Clone + Hash> Builder<L> {
    fn new() -> Self {
        Builder {
            nodes: vec![BuildNode {
                is_final: false,
                edges: Vec::new(),
            }],
            register: HashMap::new(),
            unchecked: Vec::new(),
            previous: Vec::new(),
        }
    }

    fn insert(&mut self, word: &[L]) {
        let common = word
            .iter()
            .zip(&self.previous)
            .take_while(|(a, b)| a == b)
            .count();
        self.minimize(common);

        let mut node = self.unchecked.last().map_or(0, |&(_, _, child)| child);
        for label in &word[common..] {
            let child = self.nodes.len();
            self.nodes.push(BuildNode {
                is_final: false,
                edges: Vec::new(),
            });
            self.nodes[node].edges.push((label.clone(), child));
            self.unchecked.push((node, label.clone(), child));
            node = child;
        }
        self.nodes[node].is_final = true;
        self.previous = word.to_vec();
    }

    fn minimize(&mut self, down_to: usize) {
        while self.unchecked.len() > down_to {
            let (parent, label, child) = self.unchecked.pop().expect("len checked");
            let key = (self.nodes[child].is_final, self.nodes[child].edges.clone());
            match self.register.get(&key) {
                Some(&existing) => {
                    let edge = self.nodes[parent]
                        .edges
                        .iter_mut()
                        .find(|(l, _)| *l == label)
                        .expect("edge on unchecked path");
                    edge.1 = existing;
                }
                None => {
                    self.register.insert(key, child);
                }
            }
        }
    }

    fn finish(mut self) -> Dafsa<L> {
        self.minimize(0);

        let mut reachable = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        reachable[0] = true;
        while let Some(n) = stack.pop() {
            for &(_, child) in &self.nodes[n].edges {
                if !reachable[child] {
                    reachable[child] = true;
                    stack.push(child);
                }
            }
        }
        // ids follow creation order among surviving nodes
        let mut new_id = vec![usize::MAX; self.nodes.len()];
        let mut next = 0;
        for (old, &alive) in reachable.iter().enumerate() {
            if alive {
                new_id[old] = next;
                next += 1;
            }
        }

        let mut states = vec![State::default(); next];
        let mut transitions = Vec::new();
        for (old, node) in self.nodes.into_iter().enumerate() {
            if !reachable[old] {
                continue;
            }
            let source = new_id[old];
            states[source].is_final = node.is_final;
            for (label, child) in node.edges {
                let target = new_id[child];
                states[source].out.push(transitions.len());
                states[target].in_degree += 1;
                transitions.push(Transition {
                    source,
                    label,
                    target,
                });
            }
        }
        Dafsa {
            states,
            transitions,
        }
    }
}

impl<L: Ord + Clone> Dafsa<L> {
    pub fn initial(&self) -> StateId {
        0
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn transitions(&self) -> &[Transition<L>] {
        &self.transitions
    }

    pub fn transition(&self, id: TransitionId) -> &Transition<L> {
        &self.transitions[id]
    }

    pub fn is_final(&self, state: StateId) -> bool {
        self.states[state].is_final
    }

    pub fn finals(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len()).filter(|&s| self.states[s].is_final)
    }

    pub fn in_degree(&self, state: StateId) -> usize {
        self.states[state].in_degree
    }

    pub fn out_degree(&self, state: StateId) -> usize {
        self.states[state].out.len()
    }

    pub fn outgoing(&self, state: StateId) -> impl Iterator<Item = &Transition<L>> + '_ {
        self.states[state].out.iter().map(|&t| &self.transitions[t])
    }

    pub fn step(&self, state: StateId, label: &L) -> Option<TransitionId> {
        let out = &self.states[state].out;
        out.binary_search_by(|&t| self.transitions[t].label.cmp(label))
            .ok()
            .map(|i| out[i])
    }

    pub fn find_transition(&self, source: StateId, label: &L, target: StateId) -> Option<TransitionId> {
        self.step(source, label)
            .filter(|&t| self.transitions[t].target == target)
    }

    /// Transitions visited when replaying `word` from the initial state, or
    /// `None` if the word is not accepted.
    pub fn path<W: PartialEq<L>>(&self, word: &[W]) -> Option<Vec<TransitionId>> {
        let mut state = self.initial();
        let mut path = Vec::with_capacity(word.len());
        for label in word {
            let t = *self.states[state]
                .out
                .iter()
                .find(|&&t| *label == self.transitions[t].label)?;
            path.push(t);
            state = self.transitions[t].target;
        }
        self.states[state].is_final.then_some(path)
    }

    pub fn accepts(&self, word: &[L]) -> bool {
        self.path(word).is_some()
    }

    /// Every accepted word. Exponential in the worst case; meant for tests
    /// and small automata.
    pub fn language(&self) -> BTreeSet<Vec<L>> {
        let mut out = BTreeSet::new();
        let mut prefix = Vec::new();
        self.collect_suffixes(self.initial(), &mut prefix, &mut out);
        out
    }

    fn collect_suffixes(&self, state: StateId, prefix: &mut Vec<L>, out: &mut BTreeSet<Vec<L>>) {
        if self.states[state].is_final {
            out.insert(prefix.clone());
        }
        for &t in &self.states[state].out {
            prefix.push(self.transitions[t].label.clone());
            self.collect_suffixes(self.transitions[t].target, prefix, out);
            prefix.pop();
        }
    }

    fn prefixes_of(&self, state: StateId) -> BTreeSet<Vec<L>> {
        let mut incoming: Vec<Vec<TransitionId>> = vec![Vec::new(); self.states.len()];
        for (id, t) in self.transitions.iter().enumerate() {
            incoming[t.target].push(id);
        }
        let mut out = BTreeSet::new();
        let mut rev = Vec::new();
        self.collect_prefixes(state, &incoming, &mut rev, &mut out);
        out
    }

    fn collect_prefixes(
        &self,
        state: StateId,
        incoming: &[Vec<TransitionId>],
        rev: &mut Vec<L>,
        out: &mut BTreeSet<Vec<L>>,
    ) {
        if state == self.initial() {
            out.insert(rev.iter().rev().cloned().collect());
            return;
        }
        for &t in &incoming[state] {
            rev.push(self.transitions[t].label.clone());
            self.collect_prefixes(self.transitions[t].source, incoming, rev, out);
            rev.pop();
        }
    }

    fn suffixes_of(&self, state: StateId) -> BTreeSet<Vec<L>> {
        let mut out = BTreeSet::new();
        let mut prefix = Vec::new();
        self.collect_suffixes(state, &mut prefix, &mut out);
        out
    }

    /// Common prefixes (label paths into states with more than one outgoing
    /// transition) and common suffixes (label paths out of states with more
    /// than one incoming transition). Empty sequences are omitted. Diagnostic
    /// only; privacy grouping works on transitions.
    pub fn common_prefixes_suffixes(&self) -> (BTreeSet<Vec<L>>, BTreeSet<Vec<L>>) {
        let mut prefixes = BTreeSet::new();
        let mut suffixes = BTreeSet::new();
        for s in 0..self.states.len() {
            if self.out_degree(s) > 1 {
                prefixes.extend(self.prefixes_of(s).into_iter().filter(|p| !p.is_empty()));
            }
            if self.in_degree(s) > 1 {
                suffixes.extend(self.suffixes_of(s).into_iter().filter(|p| !p.is_empty()));
            }
        }
        (prefixes, suffixes)
    }
}

impl<L: Ord + Clone + Display> Dafsa<L> {
    /// Graphviz rendering, final states drawn as double circles.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dafsa {\n  rankdir=LR;\n");
        for s in 0..self.states.len() {
            let shape = if self.states[s].is_final { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  s{s} [shape={shape}];");
        }
        for t in &self.transitions {
            let label = t.label.to_string().replace('\\', "\\\\").replace('"', "\\\"");
            let _ = writeln!(out, "  s{} -> s{} [label=\"{}\"];", t.source, t.target, label);
        }
        out.push_str("}\n");
        out
    }
}

impl<L: fmt::Debug> fmt::Display for Transition<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(s{}, {:?}, s{})", self.source, self.label, self.target)
    }
}

#[cfg(test)]
pub(crate) fn words(list: &[&str]) -> Vec<Vec<char>> {
    list.iter().map(|w| w.chars().collect()).collect()
}
