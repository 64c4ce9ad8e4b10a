//! Small integral min-cost max-flow network, successive shortest paths.
//!
//! Instances here are tiny (a node per job and machine), so a
//! Bellman-Ford path search per augmentation is plenty. All capacities,
//! costs and flows are integers, so optima are exact.

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: i64,
    cost: i64,
    /// index of the reverse arc in `graph[to]`
    rev: usize,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct FlowNetwork {
    graph: Vec<Vec<Arc>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            graph: vec![Vec::new(); nodes],
        }
    }

    /// Adds a directed arc; returns a handle for reading its flow later.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> (usize, usize) {
        let fwd = self.graph[from].len();
        let rev = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Arc {
            to,
            cap,
            cost,
            rev,
        });
        self.graph[to].push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
            rev: fwd,
        });
        (from, fwd)
    }

    /// Flow currently on the arc returned by [`add_arc`](Self::add_arc).
    pub fn flow(&self, handle: (usize, usize)) -> i64 {
        let arc = &self.graph[handle.0][handle.1];
        self.graph[arc.to][arc.rev].cap
    }

    /// Sends as much flow as possible from `source` to `sink`, cheapest
    /// paths first. Returns (total flow, total cost).
    pub fn min_cost_max_flow(&mut self, source: usize, sink: usize) -> (i64, i64) {
        let n = self.graph.len();
        let mut total_flow = 0;
        let mut total_cost = 0;
        loop {
            // Bellman-Ford (residual costs can be negative)
            let mut dist = vec![i64::MAX; n];
            let mut pred: Vec<Option<(usize, usize)>> = vec![None; n];
            dist[source] = 0;
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if dist[u] == i64::MAX {
                        continue;
                    }
                    for (i, arc) in self.graph[u].iter().enumerate() {
                        if arc.cap > 0 && dist[u] + arc.cost < dist[arc.to] {
                            dist[arc.to] = dist[u] + arc.cost;
                            pred[arc.to] = Some((u, i));
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[sink] == i64::MAX {
                return (total_flow, total_cost);
            }
            // bottleneck along the path
            let mut bottleneck = i64::MAX;
            let mut v = sink;
            while let Some((u, i)) = pred[v] {
                bottleneck = bottleneck.min(self.graph[u][i].cap);
                v = u;
            }
            let mut v = sink;
            while let Some((u, i)) = pred[v] {
                let rev = self.graph[u][i].rev;
                self.graph[u][i].cap -= bottleneck;
                self.graph[v][rev].cap += bottleneck;
                v = u;
            }
            total_flow += bottleneck;
            total_cost += bottleneck * dist[sink];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_arc() {
        let mut net = FlowNetwork::new(2);
        let arc = net.add_arc(0, 1, 5, 3);
        let (flow, cost) = net.min_cost_max_flow(0, 1);
        assert_eq!((flow, cost), (5, 15));
        assert_eq!(net.flow(arc), 5);
    }

    #[test]
    fn cheaper_path_is_preferred() {
        // 0 -> 1 -> 3 (cost 1), 0 -> 2 -> 3 (cost 5), each capacity 1
        let mut net = FlowNetwork::new(4);
        net.add_arc(0, 1, 1, 0);
        let cheap = net.add_arc(1, 3, 1, 1);
        net.add_arc(0, 2, 1, 0);
        let dear = net.add_arc(2, 3, 1, 5);
        let (flow, cost) = net.min_cost_max_flow(0, 3);
        assert_eq!((flow, cost), (2, 6));
        assert_eq!(net.flow(cheap), 1);
        assert_eq!(net.flow(dear), 1);
    }

    #[test]
    fn augmenting_path_reroutes_flow() {
        // classic rerouting: middle arc must be undone for the optimum
        let mut net = FlowNetwork::new(4);
        net.add_arc(0, 1, 1, 0);
        net.add_arc(0, 2, 1, 2);
        net.add_arc(1, 2, 1, 0);
        net.add_arc(1, 3, 1, 2);
        net.add_arc(2, 3, 1, 0);
        let (flow, cost) = net.min_cost_max_flow(0, 3);
        assert_eq!(flow, 2);
        assert_eq!(cost, 4);
    }
}
