//! Causal structure learning: Fisher-z skeleton, PAG orientation with domain
//! constraints, entropic resolution of undetermined edges, and the resulting
//! acyclic directed mixed graph.

mod ci;
mod entropic;
mod graph;

use std::collections::BTreeSet;

use serde::Serialize;

pub use ci::{
    fisher_z_test, learn_skeleton, partial_correlation, CiOutcome, Correlations, Skeleton,
};
pub use entropic::{
    discretize, entropy, entropy_of, exogenous_entropy, greedy_coupling_entropy, latent_search,
    resolve_codes, resolve_edge, Candidates, EdgeDecision, EntropicConfig, Latent,
    LatentSearchConfig, Resolution,
};
pub use graph::{
    adjacency_matrix, graph_overlap, Admg, AdmgMeta, EndpointMark, GraphOverlap, Pag, TypedEdge,
};

use crate::data::{mean_sd, Dataset, VariableRole};
use crate::error::{Error, Result};
use crate::par;

/// Background knowledge: source vertices (configuration options) never receive
/// arrowheads, and explicitly forbidden ordered pairs never get `u -> v`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StructuralConstraints {
    pub sources: BTreeSet<String>,
    pub forbidden: BTreeSet<(String, String)>,
}

impl StructuralConstraints {
    /// Every option column of `ds` becomes a source.
    pub fn from_roles(ds: &Dataset) -> Self {
        StructuralConstraints {
            sources: ds
                .names_with_role(VariableRole::Option)
                .into_iter()
                .collect(),
            forbidden: BTreeSet::new(),
        }
    }

    pub fn is_source(&self, v: &str) -> bool {
        self.sources.contains(v)
    }

    /// True when a direct `u -> v` influence is ruled out.
    pub fn forbids(&self, u: &str, v: &str) -> bool {
        self.is_source(v) || self.forbidden.contains(&(u.to_string(), v.to_string()))
    }
}

/// Orients a skeleton: source endpoints become tails (and their partners
/// arrowheads), unshielded triples whose middle vertex is absent from most
/// separating sets become colliders, and the chain rule
/// propagates `a *-> b o-* c` into `b -> c` when `a` and `c` are not adjacent.
pub fn orient_pag(skel: &Skeleton, constraints: &StructuralConstraints) -> Pag {
    use EndpointMark::*;
    let names = &skel.names;
    let d = names.len();
    let mut pag = Pag::new(names.clone());
    for (i, j) in skel.edges() {
        pag.add_edge(i, j);
    }
    pag.sepsets = skel.sepsets.clone();
    let src: Vec<bool> = names.iter().map(|n| constraints.is_source(n)).collect();

    for (i, j) in skel.edges() {
        for (a, b) in [(i, j), (j, i)] {
            if src[a] {
                pag.set_mark(b, a, Tail);
                if !src[b] {
                    pag.set_mark(a, b, Arrow);
                }
            } else if constraints.forbids(&names[a], &names[b]) && !src[b] {
                // a -> b ruled out but the edge stays: it cannot be a tail at a.
                pag.set_mark(b, a, Arrow);
            }
        }
    }

    // Colliders are decided from the skeleton and the separating-set votes
    // alone, so the visiting order cannot change the result. A tie leaves the
    // triple unoriented.
    let mut colliders = Vec::new();
    for k in 0..d {
        if src[k] {
            continue;
        }
        let nb = pag.neighbors(k);
        for (x, &i) in nb.iter().enumerate() {
            for &j in &nb[x + 1..] {
                if pag.adjacent(i, j) {
                    continue;
                }
                let key = (i.min(j), k, i.max(j));
                let collider = match skel.collider_votes.get(&key) {
                    Some(&(with, without)) if with + without > 0 => without > with,
                    _ => !pag.sepset(i, j).is_some_and(|s| s.contains(&k)),
                };
                if collider {
                    colliders.push((i, k, j));
                }
            }
        }
    }
    for (i, k, j) in colliders {
        pag.set_mark(i, k, Arrow);
        pag.set_mark(j, k, Arrow);
    }

    loop {
        let mut changed = false;
        for b in 0..d {
            for a in pag.neighbors(b) {
                if pag.mark(a, b) != Some(Arrow) {
                    continue;
                }
                for c in pag.neighbors(b) {
                    if c == a || pag.adjacent(a, c) || src[c] {
                        continue;
                    }
                    if pag.mark(c, b) == Some(Circle) {
                        pag.set_mark(c, b, Tail);
                        pag.set_mark(b, c, Arrow);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    pag
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnConfig {
    pub alpha: f64,
    pub max_cond: usize,
    pub entropic: EntropicConfig,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            alpha: 0.05,
            max_cond: 3,
            entropic: EntropicConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LearnDiagnostics {
    pub variables: usize,
    pub skipped_columns: Vec<String>,
    pub ci_tests: usize,
    pub skeleton_edges: usize,
    pub resolved_edges: usize,
    pub ties: usize,
    pub unconverged_searches: usize,
    pub cycle_repairs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnedModel {
    pub admg: Admg,
    pub pag: Pag,
    pub diagnostics: LearnDiagnostics,
}

#[derive(Clone, Copy, Debug)]
enum Oriented {
    Directed { from: usize, to: usize, gap: f64 },
    Bidirected,
}

/// Skeleton, orientation and entropic resolution over every non-constant
/// column of `ds` except success flags. Column order fixes the result.
pub fn learn_causal_model(
    ds: &Dataset,
    constraints: &StructuralConstraints,
    cfg: &LearnConfig,
) -> Result<LearnedModel> {
    if ds.n_rows() < 50 {
        return Err(Error::InvalidArgument(format!(
            "causal learning needs at least 50 rows, got {}",
            ds.n_rows()
        )));
    }
    let mut names = Vec::new();
    let mut skipped = Vec::new();
    for c in ds.columns() {
        if c.role == VariableRole::SuccessFlag {
            continue;
        }
        let (_, sd) = mean_sd(&c.data.as_f64());
        if sd > 0.0 {
            names.push(c.name.clone());
        } else {
            skipped.push(c.name.clone());
        }
    }
    if names.len() < 2 {
        return Err(Error::InvalidArgument(
            "causal learning needs at least two non-constant variables".into(),
        ));
    }
    let skel = learn_skeleton(ds, &names, constraints, cfg.alpha, cfg.max_cond)?;
    let pag = orient_pag(&skel, constraints);

    let codes: Vec<Vec<usize>> = par::map(&names, |n| {
        discretize(&ds.numeric(n).expect("column exists"), cfg.entropic.bins)
    });
    let edges = pag.edges();
    let resolved: Vec<Result<(Oriented, Option<Resolution>)>> = par::map(&edges, |&(i, j)| {
        use EndpointMark::*;
        let (at_i, at_j) = (pag.mark(j, i).expect("edge"), pag.mark(i, j).expect("edge"));
        let fixed = |from, to| Oriented::Directed {
            from,
            to,
            gap: f64::INFINITY,
        };
        let run = |x: usize, y: usize, cand: Candidates| {
            resolve_codes(
                (names[x].as_str(), &codes[x]),
                (names[y].as_str(), &codes[y]),
                cand,
                &cfg.entropic,
                cfg.seed,
            )
        };
        let from_resolution = |x: usize, y: usize, r: Resolution| {
            let o = match r.decision {
                EdgeDecision::Forward => Oriented::Directed {
                    from: x,
                    to: y,
                    gap: r.gap(),
                },
                EdgeDecision::Backward => Oriented::Directed {
                    from: y,
                    to: x,
                    gap: r.gap(),
                },
                EdgeDecision::Bidirected => Oriented::Bidirected,
            };
            (o, Some(r))
        };
        Ok(match (at_i, at_j) {
            (Tail, Arrow) | (Tail, Circle) => (fixed(i, j), None),
            (Arrow, Tail) | (Circle, Tail) => (fixed(j, i), None),
            (Arrow, Arrow) => (Oriented::Bidirected, None),
            (Circle, Arrow) => from_resolution(i, j, run(i, j, Candidates::ForwardOrLatent)?),
            (Arrow, Circle) => from_resolution(j, i, run(j, i, Candidates::ForwardOrLatent)?),
            (Circle, Circle) => from_resolution(i, j, run(i, j, Candidates::Any)?),
            (Tail, Tail) => (Oriented::Bidirected, None),
        })
    });

    let mut diagnostics = LearnDiagnostics {
        variables: names.len(),
        skipped_columns: skipped,
        ci_tests: skel.tests_run,
        skeleton_edges: edges.len(),
        ..Default::default()
    };
    let mut oriented = Vec::with_capacity(edges.len());
    for r in resolved {
        let (o, res) = r?;
        if let Some(res) = res {
            diagnostics.resolved_edges += 1;
            diagnostics.ties += res.tie as usize;
            diagnostics.unconverged_searches += (!res.latent_converged) as usize;
        }
        oriented.push(o);
    }

    // Break directed cycles by demoting the least confident edge on each.
    while let Some(cycle) = find_cycle(names.len(), &oriented) {
        let weakest = cycle
            .into_iter()
            .min_by(|&a, &b| {
                let g = |k: usize| match oriented[k] {
                    Oriented::Directed { gap, .. } => gap,
                    Oriented::Bidirected => f64::INFINITY,
                };
                g(a).total_cmp(&g(b)).then(a.cmp(&b))
            })
            .expect("cycles are nonempty");
        oriented[weakest] = Oriented::Bidirected;
        diagnostics.cycle_repairs += 1;
    }

    let mut admg = Admg::new(names.clone())?;
    for (&(i, j), o) in edges.iter().zip(&oriented) {
        match *o {
            Oriented::Directed { from, to, .. } => admg.add_directed(&names[from], &names[to])?,
            Oriented::Bidirected => admg.add_bidirected(&names[i], &names[j])?,
        }
    }
    admg.meta = AdmgMeta {
        alpha: cfg.alpha,
        bins: cfg.entropic.bins,
        seed: cfg.seed,
    };
    Ok(LearnedModel {
        admg,
        pag,
        diagnostics,
    })
}

/// Indices into `oriented` of the edges of some directed cycle.
fn find_cycle(n: usize, oriented: &[Oriented]) -> Option<Vec<usize>> {
    let mut out_edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, o) in oriented.iter().enumerate() {
        if let Oriented::Directed { from, to, .. } = *o {
            out_edges[from].push((to, k));
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut via: Vec<Option<(usize, usize)>> = vec![None; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < out_edges[v].len() {
                let (w, k) = out_edges[v][*next];
                *next += 1;
                match state[w] {
                    0 => {
                        state[w] = 1;
                        via[w] = Some((v, k));
                        stack.push((w, 0));
                    }
                    1 => {
                        let mut cycle = vec![k];
                        let mut cur = v;
                        while cur != w {
                            let (p, e) = via[cur].expect("on-stack vertices have parents");
                            cycle.push(e);
                            cur = p;
                        }
                        return Some(cycle);
                    }
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    None
}
