//! Integer s-t max-flow. Arcs are stored in pairs: arc `a` and its reverse
//! `a ^ 1`.

use std::collections::VecDeque;

pub type Capacity = i128;

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    head: Vec<usize>,
    cap: Vec<Capacity>,
    out: Vec<Vec<usize>>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            head: Vec::new(),
            cap: Vec::new(),
            out: vec![Vec::new(); nodes],
        }
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    /// Adds `u -> v` with capacity `forward` and `v -> u` with `backward`.
    pub fn add_edge(&mut self, u: usize, v: usize, forward: Capacity, backward: Capacity) {
        let a = self.head.len();
        self.head.push(v);
        self.cap.push(forward);
        self.out[u].push(a);
        self.head.push(u);
        self.cap.push(backward);
        self.out[v].push(a + 1);
    }

    fn tail(&self, a: usize) -> usize {
        self.head[a ^ 1]
    }

    fn push(&mut self, a: usize, f: Capacity) {
        self.cap[a] -= f;
        self.cap[a ^ 1] += f;
    }

    /// Residual capacity of arc `a`.
    pub fn residual(&self, a: usize) -> Capacity {
        self.cap[a]
    }

    /// Nodes with a residual path to `t`.
    pub fn reaches(&self, t: usize) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        seen[t] = true;
        let mut queue = VecDeque::from([t]);
        while let Some(x) = queue.pop_front() {
            for &a in &self.out[x] {
                // a: x -> y, so a ^ 1 is y -> x
                let y = self.head[a];
                if !seen[y] && self.cap[a ^ 1] > 0 {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }
}

/// An exact max-flow algorithm. On return the network holds the residual
/// capacities of a maximum flow.
pub trait MaxFlow: Send + Sync {
    fn name(&self) -> &'static str;
    fn max_flow(&self, net: &mut FlowNetwork, s: usize, t: usize) -> Capacity;
}

/// Boykov-Kolmogorov search trees.
pub struct BoykovKolmogorov;

/// Dinic's blocking flows.
pub struct Dinic;

impl MaxFlow for Dinic {
    fn name(&self) -> &'static str {
        "dinic"
    }

    fn max_flow(&self, net: &mut FlowNetwork, s: usize, t: usize) -> Capacity {
        let n = net.node_count();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &a in &net.out[x] {
                    let y = net.head[a];
                    if net.cap[a] > 0 && level[y] == usize::MAX {
                        level[y] = level[x] + 1;
                        queue.push_back(y);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut it = vec![0usize; n];
            loop {
                let f = dinic_dfs(net, &level, &mut it, s, t, Capacity::MAX);
                if f == 0 {
                    break;
                }
                total += f;
            }
        }
    }
}

fn dinic_dfs(net: &mut FlowNetwork, level: &[usize], it: &mut [usize], x: usize, t: usize, limit: Capacity) -> Capacity {
    if x == t {
        return limit;
    }
    while it[x] < net.out[x].len() {
        let a = net.out[x][it[x]];
        let y = net.head[a];
        if net.cap[a] > 0 && level[y] == level[x] + 1 {
            let f = dinic_dfs(net, level, it, y, t, limit.min(net.cap[a]));
            if f > 0 {
                net.push(a, f);
                return f;
            }
        }
        it[x] += 1;
    }
    0
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Parent {
    None,
    Root,
    /// Source tree: arc parent -> node. Sink tree: arc node -> parent.
    Arc(usize),
}

struct BkState {
    tree: Vec<Tree>,
    parent: Vec<Parent>,
}

impl BkState {
    fn parent_node(&self, net: &FlowNetwork, x: usize) -> Option<usize> {
        match (self.parent[x], self.tree[x]) {
            (Parent::Arc(a), Tree::Source) => Some(net.tail(a)),
            (Parent::Arc(a), Tree::Sink) => Some(net.head[a]),
            _ => None,
        }
    }

    /// Whether `x` is connected to its tree's root.
    fn rooted(&self, net: &FlowNetwork, mut x: usize) -> bool {
        loop {
            match self.parent[x] {
                Parent::Root => return true,
                Parent::None => return false,
                Parent::Arc(_) => x = self.parent_node(net, x).unwrap(),
            }
        }
    }
}

impl MaxFlow for BoykovKolmogorov {
    fn name(&self) -> &'static str {
        "bk"
    }

    fn max_flow(&self, net: &mut FlowNetwork, s: usize, t: usize) -> Capacity {
        let n = net.node_count();
        let mut st = BkState {
            tree: vec![Tree::Free; n],
            parent: vec![Parent::None; n],
        };
        st.tree[s] = Tree::Source;
        st.tree[t] = Tree::Sink;
        st.parent[s] = Parent::Root;
        st.parent[t] = Parent::Root;
        let mut active = VecDeque::from([s, t]);
        let mut total = 0;
        loop {
            // growth: find an arc joining the trees, oriented source -> sink
            let mut bridge = None;
            while let Some(&p) = active.front() {
                if st.tree[p] == Tree::Free {
                    active.pop_front();
                    continue;
                }
                for &a in &net.out[p] {
                    let q = net.head[a];
                    let (residual, via) = match st.tree[p] {
                        Tree::Source => (net.cap[a], a),
                        _ => (net.cap[a ^ 1], a ^ 1),
                    };
                    if residual <= 0 {
                        continue;
                    }
                    if st.tree[q] == Tree::Free {
                        st.tree[q] = st.tree[p];
                        st.parent[q] = Parent::Arc(via);
                        active.push_back(q);
                    } else if st.tree[q] != st.tree[p] {
                        bridge = Some(via);
                        break;
                    }
                }
                if bridge.is_some() {
                    break;
                }
                active.pop_front();
            }
            let Some(bridge) = bridge else {
                return total;
            };

            // augmentation
            let mut path = vec![bridge];
            let mut x = net.tail(bridge);
            while let Parent::Arc(a) = st.parent[x] {
                path.push(a);
                x = net.tail(a);
            }
            let mut x = net.head[bridge];
            while let Parent::Arc(a) = st.parent[x] {
                path.push(a);
                x = net.head[a];
            }
            let f = path.iter().map(|&a| net.cap[a]).min().unwrap();
            total += f;
            let mut orphans = Vec::new();
            for &a in &path {
                net.push(a, f);
                if net.cap[a] == 0 && a != bridge {
                    let (u, v) = (net.tail(a), net.head[a]);
                    let child = if st.tree[u] == Tree::Source && st.tree[v] == Tree::Source { v } else { u };
                    st.parent[child] = Parent::None;
                    orphans.push(child);
                }
            }

            // adoption
            while let Some(p) = orphans.pop() {
                let side = st.tree[p];
                let mut adopted = None;
                for &a in &net.out[p] {
                    let q = net.head[a];
                    if st.tree[q] != side {
                        continue;
                    }
                    let (residual, via) = match side {
                        Tree::Source => (net.cap[a ^ 1], a ^ 1),
                        _ => (net.cap[a], a),
                    };
                    if residual > 0 && st.rooted(net, q) {
                        adopted = Some(via);
                        break;
                    }
                }
                if let Some(via) = adopted {
                    st.parent[p] = Parent::Arc(via);
                    continue;
                }
                for &a in &net.out[p] {
                    let q = net.head[a];
                    if st.tree[q] != side {
                        continue;
                    }
                    let residual = match side {
                        Tree::Source => net.cap[a ^ 1],
                        _ => net.cap[a],
                    };
                    if residual > 0 {
                        active.push_back(q);
                    }
                    if st.parent_node(net, q) == Some(p) {
                        st.parent[q] = Parent::None;
                        orphans.push(q);
                    }
                }
                st.tree[p] = Tree::Free;
            }
        }
    }
}

pub fn max_flow_names() -> &'static [&'static str] {
    &["bk", "dinic"]
}

pub fn max_flow_by_name(name: &str) -> Option<Box<dyn MaxFlow>> {
    match name {
        "bk" => Some(Box::new(BoykovKolmogorov)),
        "dinic" => Some(Box::new(Dinic)),
        _ => None,
    }
}
