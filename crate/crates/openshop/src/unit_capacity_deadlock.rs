//! Reachable Deadlock for unit-capacity systems via an edge-colored
//! multigraph on the machines.
//!
//! Every job contributes a clique on its required machines, all edges
//! carrying the job's color. The system can deadlock if and only if the
//! multigraph has a simple cycle with pairwise distinct colors (a
//! *rainbow cycle*), which in turn holds exactly when some biconnected
//! component spans at least two colors. The cycle gives an executable
//! deadlock schedule: every job on the cycle parks on "its" cycle
//! machine while waiting for the next one.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::shop_model::{MachineRef, Move, OpenShopSystem, Schedule, ShopState};

#[derive(Debug, Error)]
pub enum UnitCapacityError {
    #[error("some machine has capacity greater than one; use exact search instead")]
    NotApplicable,
    #[error("invalid rainbow cycle: {0}")]
    InvalidCycle(String),
}

/// An undirected edge colored by the job that induces it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub color: usize,
}

impl Edge {
    fn other(&self, vertex: usize) -> usize {
        if self.u == vertex {
            self.v
        } else {
            self.u
        }
    }

    fn touches(&self, vertex: usize) -> bool {
        self.u == vertex || self.v == vertex
    }
}

/// Machines as vertices, one edge per unordered machine pair within each
/// job's required set, colored by the job.
#[derive(Clone, Debug)]
pub struct ColoredMultigraph {
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
}

/// A simple cycle with pairwise distinct vertices and edge colors.
/// `edges[i]` connects `vertices[i]` and `vertices[(i+1) % len]`;
/// length 2 means two parallel edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RainbowCycle {
    pub vertices: Vec<usize>,
    pub edges: Vec<Edge>,
}

impl RainbowCycle {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Structural invariants: length ≥ 2, distinct vertices, distinct
    /// colors, consecutive edges share exactly the connecting vertex.
    pub fn validate(&self) -> Result<(), UnitCapacityError> {
        let k = self.vertices.len();
        if k < 2 || self.edges.len() != k {
            return Err(UnitCapacityError::InvalidCycle(
                "cycle needs at least two vertices and as many edges".into(),
            ));
        }
        if self.vertices.iter().collect::<BTreeSet<_>>().len() != k {
            return Err(UnitCapacityError::InvalidCycle("repeated vertex".into()));
        }
        let colors: BTreeSet<usize> = self.edges.iter().map(|e| e.color).collect();
        if colors.len() != k {
            return Err(UnitCapacityError::InvalidCycle("repeated color".into()));
        }
        for (i, edge) in self.edges.iter().enumerate() {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % k];
            if !(edge.touches(a) && edge.touches(b) && a != b) {
                return Err(UnitCapacityError::InvalidCycle(format!(
                    "edge {i} does not connect consecutive cycle vertices"
                )));
            }
        }
        Ok(())
    }
}

/// True iff every machine has capacity one.
pub fn check_applicable(system: &OpenShopSystem) -> bool {
    system.machines().iter().all(|m| m.capacity == 1)
}

/// Builds the job-colored machine multigraph (capacity-agnostic).
pub fn build_multigraph(system: &OpenShopSystem) -> ColoredMultigraph {
    let mut edges = Vec::new();
    for (color, job) in system.jobs().iter().enumerate() {
        let req: Vec<usize> = job.required.iter().copied().collect();
        for i in 0..req.len() {
            for j in i + 1..req.len() {
                edges.push(Edge {
                    u: req[i],
                    v: req[j],
                    color,
                });
            }
        }
    }
    ColoredMultigraph {
        vertex_count: system.machine_count(),
        edges,
    }
}

/// Biconnected components as an edge partition (edge indices). Parallel
/// edges of different colors form their own two-edge components.
fn biconnected_components(graph: &ColoredMultigraph) -> Vec<Vec<usize>> {
    let n = graph.vertex_count;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, e) in graph.edges.iter().enumerate() {
        if e.u != e.v {
            adj[e.u].push(idx);
            adj[e.v].push(idx);
        }
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0usize;
    let mut edge_stack: Vec<usize> = Vec::new();
    let mut components = Vec::new();

    // iterative DFS: (vertex, tree edge into it, adjacency position)
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&(u, via, pos)) = stack.last() {
            if pos < adj[u].len() {
                stack.last_mut().unwrap().2 += 1;
                let eidx = adj[u][pos];
                if Some(eidx) == via {
                    continue;
                }
                let w = graph.edges[eidx].other(u);
                if disc[w] == usize::MAX {
                    edge_stack.push(eidx);
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, Some(eidx), 0));
                } else if disc[w] < disc[u] {
                    // back edge to a proper ancestor (or parallel edge)
                    edge_stack.push(eidx);
                    low[u] = low[u].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    if low[u] >= disc[parent] {
                        // pop the component: everything above and
                        // including the tree edge into u
                        let tree_edge = via.expect("non-root has a tree edge");
                        let mut comp = Vec::new();
                        loop {
                            let top = edge_stack.pop().expect("tree edge is on the stack");
                            comp.push(top);
                            if top == tree_edge {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        components.push(comp);
                    }
                    low[parent] = low[parent].min(low[u]);
                }
            }
        }
    }
    components
}

/// Decides Reachable Deadlock for a unit-capacity system: YES iff some
/// biconnected component spans at least two colors.
pub fn has_reachable_deadlock_unit(system: &OpenShopSystem) -> Result<bool, UnitCapacityError> {
    if !check_applicable(system) {
        return Err(UnitCapacityError::NotApplicable);
    }
    let graph = build_multigraph(system);
    Ok(multicolored_component(&graph).is_some())
}

/// The qualifying component (≥ 2 colors) containing the smallest edge
/// index, if any.
fn multicolored_component(graph: &ColoredMultigraph) -> Option<Vec<usize>> {
    biconnected_components(graph)
        .into_iter()
        .filter(|comp| {
            comp.iter()
                .map(|&i| graph.edges[i].color)
                .collect::<BTreeSet<_>>()
                .len()
                >= 2
        })
        .min_by_key(|comp| comp[0])
}

/// Extracts a rainbow cycle, present iff some biconnected component
/// spans two colors: start from two differently colored edges at a
/// shared vertex, close them into a simple cycle inside the component,
/// then shorten along same-color clique chords until all colors are
/// distinct.
pub fn find_rainbow_cycle(graph: &ColoredMultigraph) -> Option<RainbowCycle> {
    let comp = multicolored_component(graph)?;
    let comp_edges: Vec<Edge> = comp.iter().map(|&i| graph.edges[i]).collect();

    // two incident edges of different colors at the smallest such vertex
    let (vertex, first, second) = (0..graph.vertex_count)
        .find_map(|v| {
            let incident: Vec<&Edge> = comp_edges.iter().filter(|e| e.touches(v)).collect();
            let first = incident.first()?;
            let second = incident.iter().find(|e| e.color != first.color)?;
            Some((v, **first, **second))
        })
        .expect("a two-colored component has a two-colored vertex");

    let a = first.other(vertex);
    let b = second.other(vertex);
    let mut cycle = if a == b {
        RainbowCycle {
            vertices: vec![vertex, a],
            edges: vec![first, second],
        }
    } else {
        // simple a..b path avoiding `vertex`, BFS in the component
        let mut prev: Vec<Option<Edge>> = vec![None; graph.vertex_count];
        let mut seen = vec![false; graph.vertex_count];
        seen[vertex] = true;
        seen[a] = true;
        let mut queue = VecDeque::from([a]);
        'bfs: while let Some(u) = queue.pop_front() {
            for e in comp_edges.iter().filter(|e| e.touches(u)) {
                let w = e.other(u);
                if seen[w] {
                    continue;
                }
                seen[w] = true;
                prev[w] = Some(*e);
                if w == b {
                    break 'bfs;
                }
                queue.push_back(w);
            }
        }
        assert!(seen[b], "2-connected component must connect a and b off v");
        let mut path_vertices = vec![b];
        let mut path_edges = Vec::new();
        let mut at = b;
        while at != a {
            let e = prev[at].expect("path reconstruction");
            path_edges.push(e);
            at = e.other(at);
            path_vertices.push(at);
        }
        path_vertices.reverse();
        path_edges.reverse();
        // cycle: vertex --first-- a --path-- b --second-- vertex
        let mut vertices = vec![vertex];
        vertices.extend(path_vertices);
        let mut edges = vec![first];
        edges.extend(path_edges);
        edges.push(second);
        RainbowCycle { vertices, edges }
    };

    // chord-shortening until colors are pairwise distinct
    loop {
        let k = cycle.len();
        let dup = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .find(|&(i, j)| cycle.edges[i].color == cycle.edges[j].color);
        let Some((i, j)) = dup else {
            break;
        };
        let color = cycle.edges[i].color;
        // arc strictly between the pair, and the complementary arc
        let inner: Vec<usize> = (i + 1..j).collect();
        let outer: Vec<usize> = (j + 1..k).chain(0..i).collect();
        let pick_inner = inner.iter().any(|&t| cycle.edges[t].color != color);
        let (positions, from, to) = if pick_inner {
            (inner, (i + 1) % k, j % k)
        } else {
            assert!(
                outer.iter().any(|&t| cycle.edges[t].color != color),
                "cycle lost its second color"
            );
            (outer, (j + 1) % k, i)
        };
        let mut vertices: Vec<usize> = Vec::with_capacity(positions.len() + 1);
        let mut cursor = from;
        vertices.push(cycle.vertices[cursor]);
        for _ in &positions {
            cursor = (cursor + 1) % k;
            vertices.push(cycle.vertices[cursor]);
        }
        debug_assert_eq!(*vertices.last().unwrap(), cycle.vertices[to]);
        let mut edges: Vec<Edge> = positions.iter().map(|&t| cycle.edges[t]).collect();
        // closing chord exists in the inducing job's clique
        edges.push(Edge {
            u: cycle.vertices[to],
            v: cycle.vertices[from],
            color,
        });
        let shorter = RainbowCycle { vertices, edges };
        assert!(shorter.len() < cycle.len(), "shortening must make progress");
        cycle = shorter;
    }
    cycle.validate().expect("extracted cycle is well-formed");
    Some(cycle)
}

/// Turns a rainbow cycle into the two-phase deadlock schedule: all jobs
/// off the cycle complete and leave one by one; then each cycle job runs
/// its off-cycle machines and parks on its cycle machine, waiting for
/// the next one. Returns the deadlock state and the schedule from the
/// initial state.
pub fn construct_deadlock_schedule(
    system: &OpenShopSystem,
    cycle: &RainbowCycle,
) -> Result<(ShopState, Schedule), UnitCapacityError> {
    if !check_applicable(system) {
        return Err(UnitCapacityError::NotApplicable);
    }
    cycle.validate()?;
    for edge in &cycle.edges {
        let ok = edge.color < system.job_count()
            && system.jobs()[edge.color].required.contains(&edge.u)
            && system.jobs()[edge.color].required.contains(&edge.v)
            && edge.u < system.machine_count()
            && edge.v < system.machine_count();
        if !ok {
            return Err(UnitCapacityError::InvalidCycle(
                "edge not induced by the system".into(),
            ));
        }
    }
    let cycle_vertices: BTreeSet<usize> = cycle.vertices.iter().copied().collect();
    let cycle_colors: BTreeSet<usize> = cycle.edges.iter().map(|e| e.color).collect();

    let mut moves = Vec::new();
    let mut route = |job: usize, stations: &[usize], park: Option<usize>| {
        let mut at = MachineRef::In;
        for &m in stations {
            moves.push(Move {
                job,
                from: at,
                to: MachineRef::Machine(m),
            });
            at = MachineRef::Machine(m);
        }
        match park {
            Some(m) => moves.push(Move {
                job,
                from: at,
                to: MachineRef::Machine(m),
            }),
            None => moves.push(Move {
                job,
                from: at,
                to: MachineRef::Out,
            }),
        }
    };
    // phase 1: everyone off the cycle completes sequentially
    for job in 0..system.job_count() {
        if !cycle_colors.contains(&job) {
            let stations: Vec<usize> = system.jobs()[job].required.iter().copied().collect();
            route(job, &stations, None);
        }
    }
    // phase 2: cycle jobs in cycle order, off-cycle work first, then park
    for (pos, edge) in cycle.edges.iter().enumerate() {
        let job = edge.color;
        let stations: Vec<usize> = system.jobs()[job]
            .required
            .iter()
            .copied()
            .filter(|m| !cycle_vertices.contains(m))
            .collect();
        route(job, &stations, Some(cycle.vertices[pos]));
    }
    let schedule = Schedule::new(moves);
    let state = schedule
        .replay(system, &system.initial_state())
        .map_err(|e| UnitCapacityError::InvalidCycle(e.to_string()))?;
    debug_assert!(system.is_deadlock(&state));
    debug_assert!(crate::safety::verify_blocking_set(
        system,
        &state,
        &cycle_vertices
    ));
    Ok((state, schedule))
}
