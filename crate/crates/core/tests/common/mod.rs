//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use evlogdp::log_io::{parse_event_log, EventLog, LogFormat};

pub const RUNNING_EXAMPLE_CSV: &str = include_str!("../data/running_example.csv");

pub fn running_example() -> EventLog {
    parse_event_log(RUNNING_EXAMPLE_CSV.as_bytes(), LogFormat::Csv, None).unwrap()
}

pub fn strings(word: &str) -> Vec<String> {
    word.chars().map(|c| c.to_string()).collect()
}

/// State count of the minimal DFA for a finite language: build the trie,
/// then Moore partition refinement.
pub fn trie_minimized_states(words: &BTreeSet<Vec<char>>) -> usize {
    let mut children: Vec<BTreeMap<char, usize>> = vec![BTreeMap::new()];
    let mut finals = vec![false];
    for w in words {
        let mut node = 0;
        for &c in w {
            node = match children[node].get(&c) {
                Some(&n) => n,
                None => {
                    children.push(BTreeMap::new());
                    finals.push(false);
                    let n = children.len() - 1;
                    children[node].insert(c, n);
                    n
                }
            };
        }
        finals[node] = true;
    }

    let mut class: Vec<usize> = finals.iter().map(|&f| f as usize).collect();
    let mut count = class.iter().collect::<BTreeSet<_>>().len();
    loop {
        let mut ids: HashMap<(usize, Vec<(char, usize)>), usize> = HashMap::new();
        let next: Vec<usize> = (0..children.len())
            .map(|i| {
                let sig = (class[i], children[i].iter().map(|(&c, &n)| (c, class[n])).collect());
                let fresh = ids.len();
                *ids.entry(sig).or_insert(fresh)
            })
            .collect();
        let refined = ids.len();
        class = next;
        if refined == count {
            return refined;
        }
        count = refined;
    }
}

/// Optimal transport cost between two uniform empirical distributions,
/// solved as min-cost flow with successive shortest paths.
pub fn transport_lp(u: &[f64], v: &[f64]) -> f64 {
    let (n, m) = (u.len(), v.len());
    let source = 0;
    let sink = n + m + 1;
    let mut g = FlowGraph::new(n + m + 2);
    for i in 0..n {
        g.add(source, 1 + i, m as i64, 0.0);
        for j in 0..m {
            g.add(1 + i, 1 + n + j, (n * m) as i64, (u[i] - v[j]).abs());
        }
    }
    for j in 0..m {
        g.add(1 + n + j, sink, n as i64, 0.0);
    }
    g.min_cost_flow(source, sink, (n * m) as i64) / (n * m) as f64
}

struct Edge {
    to: usize,
    cap: i64,
    cost: f64,
}

struct FlowGraph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        FlowGraph {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
        });
    }

    fn min_cost_flow(&mut self, s: usize, t: usize, mut need: i64) -> f64 {
        let nodes = self.adj.len();
        let mut total = 0.0;
        while need > 0 {
            // Bellman-Ford over the residual graph
            let mut dist = vec![f64::INFINITY; nodes];
            let mut via = vec![usize::MAX; nodes];
            dist[s] = 0.0;
            for _ in 0..nodes {
                let mut changed = false;
                for a in 0..nodes {
                    if dist[a].is_infinite() {
                        continue;
                    }
                    for &e in &self.adj[a] {
                        let edge = &self.edges[e];
                        if edge.cap > 0 && dist[a] + edge.cost < dist[edge.to] - 1e-10 {
                            dist[edge.to] = dist[a] + edge.cost;
                            via[edge.to] = e;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            assert!(dist[t].is_finite(), "flow infeasible");
            let mut push = need;
            let mut x = t;
            while x != s {
                let e = via[x];
                push = push.min(self.edges[e].cap);
                x = self.edges[e ^ 1].to;
            }
            let mut x = t;
            while x != s {
                let e = via[x];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                x = self.edges[e ^ 1].to;
            }
            total += push as f64 * dist[t];
            need -= push;
        }
        total
    }
}

/// Laplace CDF with location 0.
pub fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

/// `P(round(X) = k)` for `X ~ Lap(0, scale)`.
pub fn rounded_laplace_pmf(k: i64, scale: f64) -> f64 {
    laplace_cdf(k as f64 + 0.5, scale) - laplace_cdf(k as f64 - 0.5, scale)
}

/// Root of `δ(ε) = e^{-ε}·tanh(ε/4) + 1 - e^{-ε}` by bisection.
pub fn oversampling_root(delta: f64) -> f64 {
    let g = |e: f64| (-e).exp() * (e / 4.0).tanh() + 1.0 - (-e).exp();
    let (mut lo, mut hi) = (0.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
