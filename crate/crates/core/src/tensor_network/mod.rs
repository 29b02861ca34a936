//! Tensor networks on a graph: exact contraction of small instances, operator
//! products, exact embedding of a dense tensor along a depth-first spanning
//! tree, and bond-dimension accounting for circuits.
//!
//! Each vertex tensor has its physical axes first (one for states, `in, out`
//! for operators), then one bond axis per incident edge ordered by neighbour
//! id. Dense tensors and operators use ascending vertex order.

mod tensor;

pub use tensor::{DenseTensor, TensorFile};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, Svd};
use crate::metric_lattice::{Lattice, Region};

/// Largest number of entries an intermediate contraction result may hold.
pub const CONTRACTION_CAP: usize = 1 << 24;

/// Connected simple graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PepsGraph {
    n: usize,
    /// Sorted `(a, b)` with `a < b`.
    edges: Vec<(usize, usize)>,
    /// Edge indices at each vertex, ordered by neighbour id.
    incident: Vec<Vec<usize>>,
}

impl PepsGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidNetwork("graph has no vertices".into()));
        }
        let mut sorted: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidNetwork(format!("self-loop at {a}")));
            }
            if a.max(b) >= n {
                return Err(Error::InvalidNetwork(format!("edge ({a}, {b}) leaves 0..{n}")));
            }
            sorted.push((a.min(b), a.max(b)));
        }
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidNetwork("duplicate edge".into()));
        }
        let mut incident = vec![Vec::new(); n];
        for (e, &(a, b)) in sorted.iter().enumerate() {
            incident[a].push(e);
            incident[b].push(e);
        }
        let graph = PepsGraph { n, edges: sorted, incident };
        let mut incident = graph.incident.clone();
        for (x, list) in incident.iter_mut().enumerate() {
            list.sort_by_key(|&e| graph.other_end(e, x));
        }
        let graph = PepsGraph { incident, ..graph };
        if graph.dfs(0).0.len() != n {
            return Err(Error::Disconnected);
        }
        Ok(graph)
    }

    pub fn from_lattice(lattice: &Lattice) -> Result<Self> {
        Self::new(lattice.n_sites(), &lattice.edges())
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, &(1..n).map(|k| (k - 1, k)).collect::<Vec<_>>())
    }

    pub fn cycle(n: usize) -> Result<Self> {
        let mut edges: Vec<_> = (1..n).map(|k| (k - 1, k)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::new(n, &edges)
    }

    /// Vertex 0 joined to `leaves` other vertices.
    pub fn star(leaves: usize) -> Result<Self> {
        Self::new(leaves + 1, &(1..=leaves).map(|k| (0, k)).collect::<Vec<_>>())
    }

    /// `rows x cols` grid, vertex `r * cols + c`.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let x = r * cols + c;
                if c + 1 < cols {
                    edges.push((x, x + 1));
                }
                if r + 1 < rows {
                    edges.push((x, x + cols));
                }
            }
        }
        Self::new(rows * cols, &edges)
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn incident(&self, x: usize) -> &[usize] {
        &self.incident[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.incident[x].len()
    }

    pub fn other_end(&self, e: usize, x: usize) -> usize {
        let (a, b) = self.edges[e];
        if a == x {
            b
        } else {
            a
        }
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    /// First-visit order and tree parents of a depth-first search from
    /// `root`, visiting neighbours in ascending id.
    pub fn dfs(&self, root: usize) -> (Vec<usize>, Vec<Option<usize>>) {
        let mut order = Vec::with_capacity(self.n);
        let mut parent = vec![None; self.n];
        let mut seen = vec![false; self.n];
        let mut stack = vec![(root, 0usize)];
        seen[root] = true;
        order.push(root);
        while let Some(&mut (x, ref mut next)) = stack.last_mut() {
            if let Some(&e) = self.incident[x].get(*next) {
                *next += 1;
                let y = self.other_end(e, x);
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    order.push(y);
                    stack.push((y, 0));
                }
            } else {
                stack.pop();
            }
        }
        (order, parent)
    }

    /// Whether `region` induces a connected subgraph.
    pub fn is_connected_region(&self, region: &Region) -> bool {
        let Some(start) = region.iter().next() else { return false };
        let mut seen = vec![start];
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for &e in &self.incident[x] {
                let y = self.other_end(e, x);
                if region.contains(y) && !seen.contains(&y) {
                    seen.push(y);
                    stack.push(y);
                }
            }
        }
        seen.len() == region.len()
    }

    /// Subgraph induced by `region`, with vertices relabelled by position.
    pub fn induced(&self, region: &Region) -> Result<Self> {
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| Some((region.position(a)?, region.position(b)?)))
            .collect();
        Self::new(region.len(), &edges)
    }
}

/// Per-vertex tensors with physical axes `phys[x]` and bond dimension
/// `bond_dims[e]` on each edge.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorNetwork {
    graph: PepsGraph,
    bond_dims: Vec<usize>,
    phys: Vec<Vec<usize>>,
    tensors: Vec<DenseTensor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Leg {
    Phys(usize, usize),
    Bond(usize),
}

impl TensorNetwork {
    pub fn new(graph: PepsGraph, bond_dims: Vec<usize>, phys: Vec<Vec<usize>>, tensors: Vec<DenseTensor>) -> Result<Self> {
        let n = graph.n_vertices();
        if bond_dims.len() != graph.edges().len() || phys.len() != n || tensors.len() != n {
            return Err(Error::InvalidNetwork("bond, physical and tensor counts must match the graph".into()));
        }
        if bond_dims.contains(&0) {
            return Err(Error::InvalidNetwork("bond dimensions must be at least 1".into()));
        }
        for x in 0..n {
            let expected: Vec<usize> =
                phys[x].iter().copied().chain(graph.incident(x).iter().map(|&e| bond_dims[e])).collect();
            if tensors[x].shape() != expected.as_slice() {
                return Err(Error::InvalidNetwork(format!(
                    "tensor at {x} has shape {:?}, graph requires {expected:?}",
                    tensors[x].shape()
                )));
            }
        }
        Ok(TensorNetwork { graph, bond_dims, phys, tensors })
    }

    pub fn graph(&self) -> &PepsGraph {
        &self.graph
    }

    pub fn bond_dims(&self) -> &[usize] {
        &self.bond_dims
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims.iter().copied().max().unwrap_or(1)
    }

    pub fn tensor(&self, x: usize) -> &DenseTensor {
        &self.tensors[x]
    }

    /// Sum over all bond indices, absorbing vertices in `order`; physical axes
    /// of the result follow ascending vertex order.
    pub fn contract_in_order(&self, order: &[usize]) -> Result<DenseTensor> {
        let n = self.graph.n_vertices();
        let mut check = order.to_vec();
        check.sort_unstable();
        if check != (0..n).collect::<Vec<_>>() {
            return Err(Error::InvalidNetwork(format!("contraction order {order:?} is not a permutation of 0..{n}")));
        }
        let mut acc = DenseTensor::scalar(c64(1.0, 0.0));
        let mut legs: Vec<Leg> = Vec::new();
        for &x in order {
            let local: Vec<Leg> = (0..self.phys[x].len())
                .map(|s| Leg::Phys(x, s))
                .chain(self.graph.incident(x).iter().map(|&e| Leg::Bond(e)))
                .collect();
            let pairs: Vec<(usize, usize)> = legs
                .iter()
                .enumerate()
                .filter_map(|(i, leg)| local.iter().position(|l| l == leg).map(|j| (i, j)))
                .collect();
            let free_acc = legs.iter().enumerate().filter(|(i, _)| !pairs.iter().any(|p| p.0 == *i));
            let free_local = local.iter().enumerate().filter(|(j, _)| !pairs.iter().any(|p| p.1 == *j));
            let size: usize = free_acc.clone().map(|(i, _)| acc.shape()[i]).product::<usize>()
                * free_local.clone().map(|(j, _)| self.tensors[x].shape()[j]).product::<usize>();
            if size > CONTRACTION_CAP {
                return Err(Error::DimensionCap { dim: size, cap: CONTRACTION_CAP });
            }
            let next_legs: Vec<Leg> = free_acc.map(|(_, l)| *l).chain(free_local.map(|(_, l)| *l)).collect();
            acc = acc.contract(&self.tensors[x], &pairs)?;
            legs = next_legs;
        }
        let mut target: Vec<(usize, usize, usize)> = legs
            .iter()
            .enumerate()
            .map(|(i, leg)| match leg {
                Leg::Phys(x, s) => (*x, *s, i),
                Leg::Bond(_) => unreachable!("every bond joins two absorbed vertices"),
            })
            .collect();
        target.sort_unstable();
        Ok(acc.permute(&target.iter().map(|t| t.2).collect::<Vec<_>>()))
    }

    pub fn contract(&self) -> Result<DenseTensor> {
        self.contract_in_order(&(0..self.graph.n_vertices()).collect::<Vec<_>>())
    }
}

/// Network with one physical axis per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Peps(TensorNetwork);

/// Network with physical axes `(in, out)` per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Pepo(TensorNetwork);

impl Peps {
    pub fn new(graph: PepsGraph, bond_dims: Vec<usize>, phys_dims: &[usize], tensors: Vec<DenseTensor>) -> Result<Self> {
        Ok(Peps(TensorNetwork::new(graph, bond_dims, phys_dims.iter().map(|&d| vec![d]).collect(), tensors)?))
    }

    pub fn network(&self) -> &TensorNetwork {
        &self.0
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.0.phys.iter().map(|p| p[0]).collect()
    }

    pub fn contract(&self) -> Result<DenseTensor> {
        self.0.contract()
    }
}

impl Pepo {
    pub fn new(graph: PepsGraph, bond_dims: Vec<usize>, phys_dims: &[usize], tensors: Vec<DenseTensor>) -> Result<Self> {
        Ok(Pepo(TensorNetwork::new(graph, bond_dims, phys_dims.iter().map(|&d| vec![d, d]).collect(), tensors)?))
    }

    /// Identity operator with every bond of dimension 1.
    pub fn identity(graph: PepsGraph, phys_dims: &[usize]) -> Result<Self> {
        let tensors = (0..graph.n_vertices())
            .map(|x| {
                let d = phys_dims[x];
                let shape: Vec<usize> = [d, d].into_iter().chain(std::iter::repeat(1).take(graph.degree(x))).collect();
                DenseTensor::from_fn(shape, |i| if i[0] == i[1] { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
            })
            .collect();
        let bonds = vec![1; graph.edges().len()];
        Pepo::new(graph, bonds, phys_dims, tensors)
    }

    pub fn network(&self) -> &TensorNetwork {
        &self.0
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.0.phys.iter().map(|p| p[0]).collect()
    }

    /// Dense operator with rows indexed by the `in` axes.
    pub fn to_operator(&self) -> Result<CMatrix> {
        self.to_operator_in_order(&(0..self.0.graph.n_vertices()).collect::<Vec<_>>())
    }

    pub fn to_operator_in_order(&self, order: &[usize]) -> Result<CMatrix> {
        let t = self.0.contract_in_order(order)?;
        let n = self.0.graph.n_vertices();
        let axes: Vec<usize> = (0..n).map(|x| 2 * x).chain((0..n).map(|x| 2 * x + 1)).collect();
        Ok(t.permute(&axes).to_matrix(n))
    }
}

/// `F = G H` vertex by vertex; bond `b = c D_H(e) + d` pairs the bonds of
/// `G` and `H`, so `D_F(e) = D_G(e) D_H(e)`.
pub fn pepo_product(g: &Pepo, h: &Pepo) -> Result<Pepo> {
    if g.0.graph != h.0.graph {
        return Err(Error::InvalidNetwork("operator networks live on different graphs".into()));
    }
    if g.0.phys != h.0.phys {
        return Err(Error::InvalidNetwork("operator networks have different physical dimensions".into()));
    }
    let graph = &g.0.graph;
    let bond_dims: Vec<usize> = g.0.bond_dims.iter().zip(&h.0.bond_dims).map(|(a, b)| a * b).collect();
    let tensors = (0..graph.n_vertices())
        .map(|x| {
            let z = graph.degree(x);
            let prod = g.0.tensors[x].contract(&h.0.tensors[x], &[(1, 0)])?;
            // Axes: i, c_1..c_z, k, d_1..d_z.
            let mut axes = vec![0, z + 1];
            for m in 0..z {
                axes.push(1 + m);
                axes.push(z + 2 + m);
            }
            let d = g.0.phys[x][0];
            let shape: Vec<usize> = [d, d].into_iter().chain(graph.incident(x).iter().map(|&e| bond_dims[e])).collect();
            prod.permute(&axes).reshape(shape)
        })
        .collect::<Result<Vec<_>>>()?;
    Pepo::new(graph.clone(), bond_dims, &g.phys_dims(), tensors)
}

/// Exact network for `t` (axis `x` on vertex `x`).
///
/// The tensor is split into a matrix product along the depth-first first-visit
/// order from vertex 0. Each matrix-product bond is routed along the tree path
/// between its two vertices; a tree edge carries at most two such bonds and
/// intermediate vertices copy the bond index through. `truncation = Some(rel)`
/// drops singular values below `rel` times the largest one.
pub fn tensor_to_peps(t: &DenseTensor, graph: &PepsGraph, truncation: Option<f64>) -> Result<Peps> {
    let n = graph.n_vertices();
    if t.rank() != n {
        return Err(Error::InvalidNetwork(format!("tensor of rank {} for {n} vertices", t.rank())));
    }
    let phys = t.shape().to_vec();
    let (order, parent) = graph.dfs(0);
    let mut position = vec![0; n];
    for (k, &x) in order.iter().enumerate() {
        position[x] = k;
    }

    // Matrix product: cores[k] has shape [r_{k-1}, d, r_k].
    let mut rest = t.permute(&order);
    let mut left = 1usize;
    let mut cores = Vec::with_capacity(n);
    let mut ranks = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n - 1 {
        let d = phys[order[k]];
        let m = CMatrix::from_row_slice(left * d, rest.len() / (left * d), rest.data());
        let mut svd = Svd::of(&m);
        if let Some(rel) = truncation {
            let r = svd.rank_above(rel);
            svd = svd.truncated(r);
        }
        let r = svd.s.len();
        cores.push(DenseTensor::from_matrix(&svd.u, vec![left, d, r])?);
        let mut sv = svd.v.adjoint();
        for (i, &s) in svd.s.iter().enumerate() {
            sv.row_mut(i).scale_mut(s);
        }
        let remaining: Vec<usize> = std::iter::once(r).chain(order[k + 1..].iter().map(|&x| phys[x])).collect();
        rest = DenseTensor::from_matrix(&sv, remaining)?;
        ranks.push(r);
        left = r;
    }
    let last = phys[order[n - 1]];
    cores.push(rest.reshape(vec![left, last, 1])?);

    let depth = {
        let mut depth = vec![0usize; n];
        for &x in &order {
            if let Some(p) = parent[x] {
                depth[x] = depth[p] + 1;
            }
        }
        depth
    };
    let tree_path = |mut u: usize, mut v: usize| -> Vec<usize> {
        let (mut up, mut down) = (Vec::new(), Vec::new());
        while u != v {
            if depth[u] >= depth[v] {
                let p = parent[u].expect("non-root");
                up.push(graph.edge_index(u, p).expect("tree edge"));
                u = p;
            } else {
                let p = parent[v].expect("non-root");
                down.push(graph.edge_index(v, p).expect("tree edge"));
                v = p;
            }
        }
        up.extend(down.into_iter().rev());
        up
    };

    let mut routes: Vec<Vec<usize>> = vec![Vec::new(); graph.edges().len()];
    for k in 0..n - 1 {
        for e in tree_path(order[k], order[k + 1]) {
            routes[e].push(k);
        }
    }
    if let Some(e) = routes.iter().position(|r| r.len() > 2) {
        return Err(Error::InvalidNetwork(format!("edge {e} carries {} bonds", routes[e].len())));
    }
    let bond_dims: Vec<usize> = routes.iter().map(|r| r.iter().map(|&k| ranks[k]).product()).collect();

    let tensors = (0..n)
        .map(|x| {
            let p = position[x];
            let core = &cores[p];
            let incident = graph.incident(x);
            let shape: Vec<usize> = std::iter::once(phys[x]).chain(incident.iter().map(|&e| bond_dims[e])).collect();
            DenseTensor::from_fn(shape, |idx| {
                let mut values: Vec<(usize, usize)> = Vec::new();
                for (slot, &e) in incident.iter().enumerate() {
                    let mut b = idx[1 + slot];
                    for &k in routes[e].iter().rev() {
                        values.push((k, b % ranks[k]));
                        b /= ranks[k];
                    }
                }
                values.sort_unstable();
                if values.windows(2).any(|w| w[0].0 == w[1].0 && w[0].1 != w[1].1) {
                    return c64(0.0, 0.0);
                }
                let lookup = |k: usize| values.iter().find(|v| v.0 == k).map_or(0, |v| v.1);
                let l = if p > 0 { lookup(p - 1) } else { 0 };
                let r = if p + 1 < n { lookup(p) } else { 0 };
                core.get(&[l, idx[0], r])
            })
        })
        .collect();
    Peps::new(graph.clone(), bond_dims, &phys, tensors)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub support: Region,
    pub unitary: CMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EdgeBound {
    pub edge: (usize, usize),
    pub bound: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CircuitBound {
    pub per_edge: Vec<EdgeBound>,
    /// `d^{2KL}`.
    pub global_bound: u128,
    /// Largest gate support.
    #[serde(rename = "K")]
    pub k: usize,
    /// Most gates acting on one site.
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
}

fn check_gate(gate: &Gate, graph: &PepsGraph, phys_dims: &[usize]) -> Result<()> {
    if gate.support.is_empty() || gate.support.max_site().is_some_and(|x| x >= graph.n_vertices()) {
        return Err(Error::InvalidNetwork(format!("gate support {} is not inside the graph", gate.support)));
    }
    if !graph.is_connected_region(&gate.support) {
        return Err(Error::InvalidNetwork(format!("gate support {} is not connected", gate.support)));
    }
    let dim: usize = gate.support.iter().map(|x| phys_dims[x]).product();
    if gate.unitary.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!("gate on {} needs a {dim}x{dim} matrix", gate.support)));
    }
    Ok(())
}

fn checked_pow(base: usize, exp: usize) -> Result<u128> {
    u32::try_from(exp)
        .ok()
        .and_then(|e| (base as u128).checked_pow(e))
        .ok_or_else(|| Error::Numerical(format!("bond bound {base}^{exp} overflows")))
}

/// Per-edge product of `d_g^{2 K_g}` over gates containing both endpoints,
/// and the global bound `d^{2KL}`.
pub fn circuit_to_pepo_bound(circuit: &[Gate], graph: &PepsGraph, phys_dims: &[usize]) -> Result<CircuitBound> {
    if phys_dims.len() != graph.n_vertices() {
        return Err(Error::DimensionMismatch("one physical dimension per vertex required".into()));
    }
    for gate in circuit {
        check_gate(gate, graph, phys_dims)?;
    }
    let d = phys_dims.iter().copied().max().unwrap_or(1);
    let k = circuit.iter().map(|g| g.support.len()).max().unwrap_or(0);
    let mut per_site = vec![0usize; graph.n_vertices()];
    for gate in circuit {
        gate.support.iter().for_each(|x| per_site[x] += 1);
    }
    let l = per_site.into_iter().max().unwrap_or(0);
    let per_edge = graph
        .edges()
        .iter()
        .map(|&(a, b)| {
            let bound = circuit
                .iter()
                .filter(|g| g.support.contains(a) && g.support.contains(b))
                .try_fold(1u128, |acc, g| {
                    let dg = g.support.iter().map(|x| phys_dims[x]).max().unwrap_or(1);
                    acc.checked_mul(checked_pow(dg, 2 * g.support.len())?)
                        .ok_or_else(|| Error::Numerical("edge bound overflows".into()))
                })?;
            Ok(EdgeBound { edge: (a, b), bound })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CircuitBound { per_edge, global_bound: checked_pow(d, 2 * k * l)?, k, l, d })
}

/// Exact operator network of one gate; edges leaving its support have dimension 1.
pub fn gate_pepo(gate: &Gate, graph: &PepsGraph, phys_dims: &[usize]) -> Result<Pepo> {
    check_gate(gate, graph, phys_dims)?;
    let support = &gate.support;
    let dims: Vec<usize> = support.iter().map(|x| phys_dims[x]).collect();
    let op_tensor = DenseTensor::from_fn(dims.iter().map(|d| d * d).collect(), |idx| {
        let (mut row, mut col) = (0, 0);
        for (m, &combined) in idx.iter().enumerate() {
            row = row * dims[m] + combined / dims[m];
            col = col * dims[m] + combined % dims[m];
        }
        gate.unitary[(row, col)]
    });
    let sub = graph.induced(support)?;
    let local = tensor_to_peps(&op_tensor, &sub, None)?;
    let mut bond_dims = vec![1; graph.edges().len()];
    for (e, &(a, b)) in sub.edges().iter().enumerate() {
        let full = graph.edge_index(support.sites()[a], support.sites()[b]).expect("induced edge");
        bond_dims[full] = local.0.bond_dims[e];
    }
    let identity = Pepo::identity(graph.clone(), phys_dims)?;
    let tensors = (0..graph.n_vertices())
        .map(|x| match support.position(x) {
            None => Ok(identity.0.tensors[x].clone()),
            Some(m) => {
                let d = phys_dims[x];
                let shape: Vec<usize> =
                    [d, d].into_iter().chain(graph.incident(x).iter().map(|&e| bond_dims[e])).collect();
                local.0.tensors[m].clone().reshape(shape)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Pepo::new(graph.clone(), bond_dims, phys_dims, tensors)
}

/// Network of `U_1 U_2 ... U_G` as a product of per-gate networks.
pub fn materialize_circuit(circuit: &[Gate], graph: &PepsGraph, phys_dims: &[usize]) -> Result<Pepo> {
    circuit.iter().try_fold(Pepo::identity(graph.clone(), phys_dims)?, |acc, gate| {
        pepo_product(&acc, &gate_pepo(gate, graph, phys_dims)?)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub edge_dims: Vec<usize>,
    /// Physical axis sizes per vertex: one entry for states, two for operators.
    pub phys: Vec<Vec<usize>>,
    pub tensors: Vec<TensorFile>,
}

impl NetworkFile {
    pub fn build(&self) -> Result<TensorNetwork> {
        let graph = PepsGraph::new(self.n_vertices, &self.edges)?;
        let tensors = self.tensors.iter().map(DenseTensor::try_from).collect::<Result<Vec<_>>>()?;
        TensorNetwork::new(graph, self.edge_dims.clone(), self.phys.clone(), tensors)
    }

    pub fn from_network(net: &TensorNetwork) -> Self {
        NetworkFile {
            n_vertices: net.graph.n_vertices(),
            edges: net.graph.edges().to_vec(),
            edge_dims: net.bond_dims.clone(),
            phys: net.phys.clone(),
            tensors: net.tensors.iter().map(TensorFile::from).collect(),
        }
    }
}

#[cfg(test)]
mod tests;
