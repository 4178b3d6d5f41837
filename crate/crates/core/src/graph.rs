//! Directed acyclic graphs over nodes `1..=d`, causal orders, and the
//! ancestral violation rate used to score an estimated order.
//!
//! Node ids are 1-based everywhere in the public API. Column `j` (0-based) of
//! a data matrix corresponds to node `j + 1`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Largest node count accepted by [`valid_orders_bruteforce`].
pub const BRUTEFORCE_MAX_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    /// Builds a DAG, rejecting self-loops, duplicate edges, out-of-range ids
    /// and directed cycles.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::param("a DAG needs at least one node"));
        }
        let mut set = BTreeSet::new();
        let mut parents = vec![Vec::new(); node_count];
        let mut children = vec![Vec::new(); node_count];
        for (u, v) in edges {
            if u == 0 || v == 0 || u > node_count || v > node_count {
                return Err(Error::param(format!(
                    "edge ({u}, {v}) references a node outside 1..={node_count}"
                )));
            }
            if u == v {
                return Err(Error::param(format!("self-loop on node {u}")));
            }
            if !set.insert((u, v)) {
                return Err(Error::param(format!("duplicate edge ({u}, {v})")));
            }
            parents[v - 1].push(u);
            children[u - 1].push(v);
        }
        let topo = kahn(node_count, &parents, &children)?;
        Ok(Self {
            node_count,
            edges: set,
            parents,
            children,
            topo,
        })
    }

    pub fn empty(node_count: usize) -> Result<Self> {
        Self::new(node_count, std::iter::empty())
    }

    /// The chain `1 -> 2 -> ... -> d`.
    pub fn chain(node_count: usize) -> Result<Self> {
        Self::new(node_count, (1..node_count).map(|u| (u, u + 1)))
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u, v))
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v - 1]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v - 1]
    }

    /// A topological ordering of the nodes (parents before children).
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn roots(&self) -> Vec<usize> {
        (1..=self.node_count)
            .filter(|&v| self.parents[v - 1].is_empty())
            .collect()
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v == 0 || v > self.node_count {
            return Err(Error::param(format!(
                "unknown node {v}; nodes are 1..={}",
                self.node_count
            )));
        }
        Ok(())
    }

    /// an(v): nodes with a directed path into `v`, excluding `v`.
    pub fn ancestors(&self, v: usize) -> Result<BTreeSet<usize>> {
        self.check_node(v)?;
        Ok(self.reach(v, &self.parents))
    }

    /// de(v): nodes reachable from `v`, excluding `v`.
    pub fn descendants(&self, v: usize) -> Result<BTreeSet<usize>> {
        self.check_node(v)?;
        Ok(self.reach(v, &self.children))
    }

    fn reach(&self, v: usize, adj: &[Vec<usize>]) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = adj[v - 1].clone();
        while let Some(u) = stack.pop() {
            if seen.insert(u) {
                stack.extend_from_slice(&adj[u - 1]);
            }
        }
        seen
    }

    /// Dense ancestor relation: `m[u-1][v-1]` is true iff u ∈ an(v).
    pub fn ancestor_matrix(&self) -> Vec<Vec<bool>> {
        let d = self.node_count;
        let mut m = vec![vec![false; d]; d];
        for &v in &self.topo {
            for &p in &self.parents[v - 1] {
                m[p - 1][v - 1] = true;
                for row in m.iter_mut() {
                    if row[p - 1] {
                        row[v - 1] = true;
                    }
                }
            }
        }
        m
    }

    /// Parses the line-oriented DAG text format: `d=<int>` followed by one
    /// `u v` edge per line. Blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut node_count = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if node_count.is_none() {
                let value = line
                    .strip_prefix("d=")
                    .or_else(|| line.strip_prefix("d ="))
                    .ok_or_else(|| Error::Config {
                        line: line_no,
                        message: "expected `d=<int>` header".into(),
                    })?;
                let d = value.trim().parse::<usize>().map_err(|e| Error::Config {
                    line: line_no,
                    message: format!("bad node count: {e}"),
                })?;
                node_count = Some(d);
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| Error::Config {
                        line: line_no,
                        message: "expected `u v`".into(),
                    })?
                    .parse::<usize>()
                    .map_err(|e| Error::Config {
                        line: line_no,
                        message: format!("bad node id: {e}"),
                    })
            };
            let u = next()?;
            let v = next()?;
            if parts.next().is_some() {
                return Err(Error::Config {
                    line: line_no,
                    message: "trailing tokens after edge".into(),
                });
            }
            edges.push((u, v));
        }
        let d = node_count.ok_or_else(|| Error::Config {
            line: 1,
            message: "missing `d=<int>` header".into(),
        })?;
        Self::new(d, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("d={}\n", self.node_count);
        for (u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

fn kahn(d: usize, parents: &[Vec<usize>], children: &[Vec<usize>]) -> Result<Vec<usize>> {
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (1..=d).filter(|&v| indeg[v - 1] == 0).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &c in &children[v - 1] {
            indeg[c - 1] -= 1;
            if indeg[c - 1] == 0 {
                queue.push_back(c);
            }
        }
    }
    if order.len() < d {
        let stuck = (1..=d).find(|&v| indeg[v - 1] > 0).unwrap_or(1);
        return Err(Error::Cycle(stuck));
    }
    Ok(order)
}

/// A causal order π: node -> rank, both 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CausalOrder {
    ranks: Vec<usize>,
}

impl CausalOrder {
    /// From `ranks[v - 1] = π(v)`.
    pub fn from_ranks(ranks: Vec<usize>) -> Result<Self> {
        let d = ranks.len();
        let mut seen = vec![false; d];
        for &r in &ranks {
            if r == 0 || r > d || seen[r - 1] {
                return Err(Error::param(format!(
                    "ranks {ranks:?} are not a permutation of 1..={d}"
                )));
            }
            seen[r - 1] = true;
        }
        Ok(Self { ranks })
    }

    /// From the sequence of nodes in rank order: `sequence[s - 1]` gets rank `s`.
    pub fn from_sequence(sequence: &[usize]) -> Result<Self> {
        let d = sequence.len();
        let mut ranks = vec![0; d];
        for (s, &v) in sequence.iter().enumerate() {
            if v == 0 || v > d || ranks[v - 1] != 0 {
                return Err(Error::param(format!(
                    "sequence {sequence:?} is not a permutation of 1..={d}"
                )));
            }
            ranks[v - 1] = s + 1;
        }
        Ok(Self { ranks })
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn rank(&self, v: usize) -> usize {
        self.ranks[v - 1]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Nodes listed by increasing rank.
    pub fn sequence(&self) -> Vec<usize> {
        let mut seq = vec![0; self.ranks.len()];
        for (i, &r) in self.ranks.iter().enumerate() {
            seq[r - 1] = i + 1;
        }
        seq
    }
}

fn check_sizes(dag: &Dag, order: &CausalOrder) -> Result<()> {
    if dag.node_count() != order.len() {
        return Err(Error::param(format!(
            "order covers {} nodes but the DAG has {}",
            order.len(),
            dag.node_count()
        )));
    }
    Ok(())
}

/// True iff `u ∈ an(v)` implies `π(u) < π(v)` for every pair.
pub fn is_valid_order(dag: &Dag, order: &CausalOrder) -> Result<bool> {
    check_sizes(dag, order)?;
    // Checking direct edges suffices: ancestral pairs chain through them.
    Ok(dag.edges().all(|(u, v)| order.rank(u) < order.rank(v)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationRate {
    pub rate: f64,
    pub violated: usize,
    pub ancestral_pairs: usize,
}

impl ViolationRate {
    /// Set when the DAG has no ancestral pairs and the rate was defined as 0.
    pub fn no_ancestral_pairs(&self) -> bool {
        self.ancestral_pairs == 0
    }
}

/// Fraction of ancestral pairs `(u, v)`, `u ∈ an(v)`, that `order` ranks
/// backwards. An edgeless DAG yields rate 0 with [`ViolationRate::no_ancestral_pairs`] set.
pub fn ancestral_violation_rate(dag: &Dag, order: &CausalOrder) -> Result<ViolationRate> {
    check_sizes(dag, order)?;
    let anc = dag.ancestor_matrix();
    let d = dag.node_count();
    let mut pairs = 0;
    let mut violated = 0;
    for u in 1..=d {
        for v in 1..=d {
            if anc[u - 1][v - 1] {
                pairs += 1;
                if order.rank(u) > order.rank(v) {
                    violated += 1;
                }
            }
        }
    }
    let rate = if pairs == 0 {
        0.0
    } else {
        violated as f64 / pairs as f64
    };
    Ok(ViolationRate {
        rate,
        violated,
        ancestral_pairs: pairs,
    })
}

/// Every valid causal order of `dag`, by exhaustive enumeration of
/// permutations. Limited to [`BRUTEFORCE_MAX_NODES`] nodes.
pub fn valid_orders_bruteforce(dag: &Dag) -> Result<Vec<CausalOrder>> {
    let d = dag.node_count();
    if d > BRUTEFORCE_MAX_NODES {
        return Err(Error::param(format!(
            "brute-force enumeration supports at most {BRUTEFORCE_MAX_NODES} nodes, got {d}"
        )));
    }
    let mut out = Vec::new();
    let mut ranks: Vec<usize> = (1..=d).collect();
    permute(&mut ranks, 0, &mut |r| {
        let order = CausalOrder { ranks: r.to_vec() };
        if dag.edges().all(|(u, v)| order.rank(u) < order.rank(v)) {
            out.push(order);
        }
    });
    out.sort_by(|a, b| a.ranks.cmp(&b.ranks));
    Ok(out)
}

fn permute(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// Random DAG: nodes are placed in a uniformly random order and each of the
/// `d(d-1)/2` forward pairs becomes an edge independently with probability
/// `avg_degree / (d - 1)`, so the expected total degree per node is `avg_degree`.
pub fn random_dag<R: Rng + ?Sized>(d: usize, avg_degree: f64, rng: &mut R) -> Result<Dag> {
    if d < 2 {
        return Err(Error::param(format!("random DAG needs d >= 2, got {d}")));
    }
    if !(avg_degree > 0.0 && avg_degree <= (d - 1) as f64) {
        return Err(Error::param(format!(
            "average degree must lie in (0, {}], got {avg_degree}",
            d - 1
        )));
    }
    let p = avg_degree / (d - 1) as f64;
    let mut perm: Vec<usize> = (1..=d).collect();
    perm.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            if p >= 1.0 || rng.random::<f64>() < p {
                edges.push((perm[i], perm[j]));
            }
        }
    }
    Dag::new(d, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diamond() -> Dag {
        Dag::new(4, [(1, 2), (1, 3), (2, 4), (3, 4)]).unwrap()
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn construction_rejects_bad_graphs() {
        assert!(matches!(Dag::new(3, [(1, 2), (2, 3), (3, 1)]), Err(Error::Cycle(_))));
        assert!(Dag::new(2, [(1, 1)]).is_err());
        assert!(Dag::new(2, [(1, 2), (1, 2)]).is_err());
        assert!(Dag::new(2, [(1, 3)]).is_err());
    }

    #[test]
    fn ancestors_examples() {
        let chain = Dag::chain(3).unwrap();
        assert_eq!(chain.ancestors(3).unwrap(), set(&[1, 2]));
        assert!(chain.ancestors(1).unwrap().is_empty());
        assert_eq!(diamond().ancestors(4).unwrap(), set(&[1, 2, 3]));
        assert!(chain.ancestors(4).is_err());
        assert_eq!(diamond().descendants(1).unwrap(), set(&[2, 3, 4]));
    }

    #[test]
    fn valid_order_examples() {
        let chain = Dag::chain(3).unwrap();
        let id = CausalOrder::from_ranks(vec![1, 2, 3]).unwrap();
        let rev = CausalOrder::from_ranks(vec![3, 2, 1]).unwrap();
        assert!(is_valid_order(&chain, &id).unwrap());
        assert!(!is_valid_order(&chain, &rev).unwrap());

        let iso = Dag::empty(2).unwrap();
        for r in [vec![1, 2], vec![2, 1]] {
            assert!(is_valid_order(&iso, &CausalOrder::from_ranks(r).unwrap()).unwrap());
        }
        assert!(is_valid_order(&iso, &id).is_err());
    }

    #[test]
    fn violation_rate_examples() {
        let chain = Dag::chain(3).unwrap();
        let rate = |r: Vec<usize>| {
            ancestral_violation_rate(&chain, &CausalOrder::from_ranks(r).unwrap())
                .unwrap()
                .rate
        };
        assert_eq!(rate(vec![1, 2, 3]), 0.0);
        assert_eq!(rate(vec![3, 2, 1]), 1.0);
        assert!((rate(vec![2, 1, 3]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn violation_rate_on_edgeless_dag_is_flagged_zero() {
        let dag = Dag::empty(3).unwrap();
        let v = ancestral_violation_rate(&dag, &CausalOrder::from_ranks(vec![3, 1, 2]).unwrap())
            .unwrap();
        assert_eq!(v.rate, 0.0);
        assert!(v.no_ancestral_pairs());
    }

    #[test]
    fn bruteforce_examples() {
        let chain = Dag::chain(3).unwrap();
        let orders = valid_orders_bruteforce(&chain).unwrap();
        assert_eq!(orders, vec![CausalOrder::from_ranks(vec![1, 2, 3]).unwrap()]);

        assert_eq!(valid_orders_bruteforce(&Dag::empty(3).unwrap()).unwrap().len(), 6);

        let fork = Dag::new(3, [(1, 2), (1, 3)]).unwrap();
        let orders = valid_orders_bruteforce(&fork).unwrap();
        assert_eq!(orders.len(), 2);
        assert!(orders.iter().all(|o| o.rank(1) == 1));

        assert!(valid_orders_bruteforce(&Dag::empty(9).unwrap()).is_err());
    }

    #[test]
    fn order_constructors_agree() {
        let o = CausalOrder::from_sequence(&[3, 1, 2]).unwrap();
        assert_eq!(o.ranks(), &[2, 3, 1]);
        assert_eq!(o.sequence(), vec![3, 1, 2]);
        assert!(CausalOrder::from_ranks(vec![1, 1]).is_err());
        assert!(CausalOrder::from_sequence(&[0, 1]).is_err());
    }

    #[test]
    fn random_dag_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_dag(2, 1.0, &mut rng).unwrap();
        assert_eq!(g.edge_count(), 1);

        let a = random_dag(5, 3.0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = random_dag(5, 3.0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);

        assert!(random_dag(1, 1.0, &mut rng).is_err());
        assert!(random_dag(5, 0.0, &mut rng).is_err());
        assert!(random_dag(5, 4.5, &mut rng).is_err());
    }

    #[test]
    fn random_dag_mean_degree() {
        // Each edge adds 2 to the total degree: mean node degree = 2|E|/d.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 10_000;
        let total: f64 = (0..draws)
            .map(|_| 2.0 * random_dag(10, 3.0, &mut rng).unwrap().edge_count() as f64 / 10.0)
            .sum();
        let mean = total / draws as f64;
        assert!((2.9..=3.1).contains(&mean), "mean degree {mean}");
    }

    #[test]
    fn random_dags_are_acyclic_across_seeds() {
        for seed in 0..1000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for d in 2..=15 {
                let deg = 3.0_f64.min((d - 1) as f64);
                let g = random_dag(d, deg, &mut rng).unwrap();
                assert_eq!(g.topological_order().len(), d);
            }
        }
    }

    #[test]
    fn text_format_round_trip() {
        let g = diamond();
        let text = g.to_text();
        assert!(text.starts_with("d=4\n"));
        assert_eq!(Dag::parse_text(&text).unwrap(), g);
        assert!(Dag::parse_text("1 2\n").is_err());
        assert!(Dag::parse_text("d=2\n1 2 3\n").is_err());
    }
}
