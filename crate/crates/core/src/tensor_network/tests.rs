use super::*;
use crate::linalg::{exp_minus_i_hermitian, frobenius_norm, kron, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_network(rng: &mut ChaCha8Rng, graph: &PepsGraph, phys: &[Vec<usize>], max_bond: usize) -> TensorNetwork {
    let bonds: Vec<usize> = graph.edges().iter().map(|_| rng.gen_range(1..=max_bond)).collect();
    let tensors = (0..graph.n_vertices())
        .map(|x| {
            let shape = phys[x].iter().copied().chain(graph.incident(x).iter().map(|&e| bonds[e])).collect();
            random_tensor(rng, shape)
        })
        .collect();
    TensorNetwork::new(graph.clone(), bonds, phys.to_vec(), tensors).unwrap()
}

fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
    let m = CMatrix::from_fn(dim, dim, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    exp_minus_i_hermitian(&(&m + m.adjoint()), 1.0)
}

/// Brute-force sum over every bond assignment of one physical index per vertex.
fn naive_contract(net: &TensorNetwork) -> DenseTensor {
    let graph = net.graph();
    let n = graph.n_vertices();
    let phys: Vec<usize> = (0..n).map(|x| net.tensor(x).shape()[0]).collect();
    let bonds = net.bond_dims();
    DenseTensor::from_fn(phys.clone(), |idx| {
        let total: usize = bonds.iter().product();
        let mut acc = c64(0.0, 0.0);
        for mut code in 0..total {
            let mut assignment = vec![0; bonds.len()];
            for e in (0..bonds.len()).rev() {
                assignment[e] = code % bonds[e];
                code /= bonds[e];
            }
            let mut term = c64(1.0, 0.0);
            for x in 0..n {
                let index: Vec<usize> =
                    std::iter::once(idx[x]).chain(graph.incident(x).iter().map(|&e| assignment[e])).collect();
                term *= net.tensor(x).get(&index);
            }
            acc += term;
        }
        acc
    })
}

fn relative_error(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.sub(b).unwrap().norm() / b.norm()
}

#[test]
fn graph_validation_and_dfs() {
    assert!(PepsGraph::new(3, &[(0, 1)]).is_err());
    assert!(PepsGraph::new(2, &[(0, 0)]).is_err());
    assert!(PepsGraph::new(2, &[(0, 1), (1, 0)]).is_err());
    let star = PepsGraph::star(3).unwrap();
    assert_eq!(star.dfs(0).0, vec![0, 1, 2, 3]);
    let grid = PepsGraph::grid(2, 2).unwrap();
    assert_eq!(grid.dfs(0).0, vec![0, 1, 3, 2]);
    assert!(grid.is_connected_region(&Region::from([0, 1])));
    assert!(!grid.is_connected_region(&Region::from([0, 3])));
}

#[test]
fn unit_bonds_give_product_tensor() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let graph = PepsGraph::cycle(3).unwrap();
    let tensors: Vec<DenseTensor> = (0..3).map(|_| random_tensor(&mut rng, vec![2, 1, 1])).collect();
    let peps = Peps::new(graph, vec![1; 3], &[2, 2, 2], tensors.clone()).unwrap();
    let t = peps.contract().unwrap();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let expected = tensors[0].get(&[i, 0, 0]) * tensors[1].get(&[j, 0, 0]) * tensors[2].get(&[k, 0, 0]);
                assert!((t.get(&[i, j, k]) - expected).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn two_vertices_are_a_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_tensor(&mut rng, vec![3, 4]);
    let b = random_tensor(&mut rng, vec![2, 4]);
    let peps = Peps::new(PepsGraph::path(2).unwrap(), vec![4], &[3, 2], vec![a.clone(), b.clone()]).unwrap();
    let expected = a.to_matrix(1) * b.to_matrix(1).transpose();
    assert!(frobenius_norm(&(peps.contract().unwrap().to_matrix(1) - expected)) < 1e-12);
}

#[test]
fn tree_contraction_matches_brute_force_in_any_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let graph = PepsGraph::new(4, &[(0, 1), (1, 2), (1, 3)]).unwrap();
    let net = random_network(&mut rng, &graph, &vec![vec![2]; 4], 3);
    let oracle = naive_contract(&net);
    assert!(relative_error(&net.contract().unwrap(), &oracle) < 1e-12);
    assert!(relative_error(&net.contract_in_order(&[3, 0, 2, 1]).unwrap(), &oracle) < 1e-12);
    assert!(net.contract_in_order(&[0, 1, 1, 2]).is_err());
}

#[test]
fn shape_mismatch_is_rejected() {
    let graph = PepsGraph::path(2).unwrap();
    let t = DenseTensor::zeros(vec![2, 3]);
    assert!(Peps::new(graph, vec![2], &[2, 2], vec![t.clone(), t]).is_err());
}

#[test]
fn identity_product_keeps_operator() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let graph = PepsGraph::path(3).unwrap();
    let g = Pepo(random_network(&mut rng, &graph, &vec![vec![2, 2]; 3], 2));
    let id = Pepo::identity(graph, &[2, 2, 2]).unwrap();
    let p = pepo_product(&g, &id).unwrap();
    assert_eq!(p.network().bond_dims(), g.network().bond_dims());
    assert!(frobenius_norm(&(p.to_operator().unwrap() - g.to_operator().unwrap())) < 1e-12);
}

#[test]
fn product_bond_dimensions_multiply() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let graph = PepsGraph::path(2).unwrap();
    let mk = |rng: &mut ChaCha8Rng, d: usize| {
        let tensors = vec![random_tensor(rng, vec![2, 2, d]), random_tensor(rng, vec![2, 2, d])];
        Pepo::new(graph.clone(), vec![d], &[2, 2], tensors).unwrap()
    };
    let (g, h) = (mk(&mut rng, 2), mk(&mut rng, 3));
    let f = pepo_product(&g, &h).unwrap();
    assert_eq!(f.network().bond_dims(), &[6]);
    let dense = g.to_operator().unwrap() * h.to_operator().unwrap();
    assert!(frobenius_norm(&(f.to_operator().unwrap() - dense)) < 1e-11);
    let other = Pepo::identity(PepsGraph::star(1).unwrap(), &[2, 3]).unwrap();
    assert!(pepo_product(&g, &other).is_err());
}

#[test]
fn product_tensor_truncates_to_unit_bonds() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let factors: Vec<DenseTensor> = (0..4).map(|_| random_tensor(&mut rng, vec![2])).collect();
    let t = DenseTensor::from_fn(vec![2; 4], |idx| idx.iter().enumerate().map(|(k, &i)| factors[k].get(&[i])).product::<C64>());
    let peps = tensor_to_peps(&t, &PepsGraph::grid(2, 2).unwrap(), Some(1e-12)).unwrap();
    assert!(peps.network().bond_dims().iter().all(|&d| d == 1));
    assert!(relative_error(&peps.contract().unwrap(), &t) < 1e-12);
}

#[test]
fn path_graph_gives_plain_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 6;
    let t = random_tensor(&mut rng, vec![2; n]);
    let peps = tensor_to_peps(&t, &PepsGraph::path(n).unwrap(), None).unwrap();
    assert_eq!(peps.network().bond_dims(), &[2, 4, 8, 4, 2]);
    assert!(peps.network().max_bond_dim() <= 2usize.pow((n / 2) as u32));
    assert!(relative_error(&peps.contract().unwrap(), &t) < 1e-9);
}

#[test]
fn star_graph_reconstructs_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = random_tensor(&mut rng, vec![2, 3, 2, 2]);
    let graph = PepsGraph::star(3).unwrap();
    let peps = tensor_to_peps(&t, &graph, None).unwrap();
    // Ranks along the order 0,1,2,3 are 2, 4, 2; bonds 1->2 and 2->3 pass through the centre.
    assert_eq!(peps.network().bond_dims(), &[2 * 4, 4 * 2, 2]);
    assert!(relative_error(&peps.contract().unwrap(), &t) < 1e-9);
    assert!(peps.network().max_bond_dim() <= 3usize.pow(4));
}

#[test]
fn single_site_gate_has_unit_bonds() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let graph = PepsGraph::path(3).unwrap();
    let gate = Gate { support: Region::singleton(1), unitary: random_unitary(&mut rng, 2) };
    let bound = circuit_to_pepo_bound(std::slice::from_ref(&gate), &graph, &[2; 3]).unwrap();
    assert!(bound.per_edge.iter().all(|e| e.bound == 1));
    let pepo = materialize_circuit(&[gate.clone()], &graph, &[2; 3]).unwrap();
    assert!(pepo.network().bond_dims().iter().all(|&d| d == 1));
    let dense = kron(&kron(&CMatrix::identity(2, 2), &gate.unitary), &CMatrix::identity(2, 2));
    assert!(frobenius_norm(&(pepo.to_operator().unwrap() - dense)) < 1e-12);
}

#[test]
fn global_circuit_bound_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let graph = PepsGraph::path(4).unwrap();
    let circuit: Vec<Gate> = [(0, 1), (1, 2), (2, 3), (0, 1), (1, 2)]
        .iter()
        .map(|&(a, b)| Gate { support: Region::from([a, b]), unitary: random_unitary(&mut rng, 4) })
        .collect();
    let bound = circuit_to_pepo_bound(&circuit, &graph, &[2; 4]).unwrap();
    assert_eq!((bound.k, bound.l), (2, 4));
    let three = circuit_to_pepo_bound(&circuit[..3], &graph, &[2; 4]).unwrap();
    assert_eq!((three.k, three.l, three.global_bound), (2, 2, 256));
    let layered: Vec<Gate> = (0..3).map(|_| circuit[1].clone()).collect();
    let b = circuit_to_pepo_bound(&layered, &graph, &[2; 4]).unwrap();
    assert_eq!((b.k, b.l, b.global_bound), (2, 3, 4096));
    assert!(b.per_edge.iter().all(|e| e.bound <= b.global_bound));
    let bad = Gate { support: Region::from([0, 2]), unitary: random_unitary(&mut rng, 4) };
    assert!(circuit_to_pepo_bound(&[bad], &graph, &[2; 4]).is_err());
}

#[test]
fn overlapping_gates_materialize_to_dense_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let graph = PepsGraph::path(3).unwrap();
    let u1 = random_unitary(&mut rng, 4);
    let u2 = random_unitary(&mut rng, 4);
    let circuit = vec![
        Gate { support: Region::from([0, 1]), unitary: u1.clone() },
        Gate { support: Region::from([1, 2]), unitary: u2.clone() },
    ];
    let pepo = materialize_circuit(&circuit, &graph, &[2; 3]).unwrap();
    let id = CMatrix::identity(2, 2);
    let dense = kron(&u1, &id) * kron(&id, &u2);
    let op = pepo.to_operator().unwrap();
    assert!(frobenius_norm(&(&op - dense)) < 1e-10);
    assert!(frobenius_norm(&(op.adjoint() * &op - CMatrix::identity(8, 8))) < 1e-8);
    let bound = circuit_to_pepo_bound(&circuit, &graph, &[2; 3]).unwrap();
    for (e, eb) in bound.per_edge.iter().enumerate() {
        assert!(pepo.network().bond_dims()[e] as u128 <= eb.bound);
    }
}

#[test]
fn network_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let net = random_network(&mut rng, &PepsGraph::cycle(4).unwrap(), &vec![vec![2]; 4], 2);
    let json = serde_json::to_string(&NetworkFile::from_network(&net)).unwrap();
    let back: NetworkFile = serde_json::from_str(&json).unwrap();
    assert_eq!(back.build().unwrap(), net);
}

fn graph_strategy() -> impl Strategy<Value = PepsGraph> {
    prop_oneof![
        (2usize..6).prop_map(|n| PepsGraph::path(n).unwrap()),
        (2usize..5).prop_map(|n| PepsGraph::star(n).unwrap()),
        (3usize..6).prop_map(|n| PepsGraph::cycle(n).unwrap()),
        Just(PepsGraph::grid(2, 2).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn embedding_round_trips(graph in graph_strategy(), seed in 0u64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = graph.n_vertices();
        let shape: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=3)).collect();
        let t = random_tensor(&mut rng, shape.clone());
        let peps = tensor_to_peps(&t, &graph, None).unwrap();
        prop_assert!(relative_error(&peps.contract().unwrap(), &t) < 1e-9);
        let d = *shape.iter().max().unwrap();
        prop_assert!(peps.network().max_bond_dim() <= d.pow(n as u32));
    }

    #[test]
    fn random_operator_products_match(seed in 0u64..1_000_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let graph = PepsGraph::path(3).unwrap();
        let g = Pepo(random_network(&mut rng, &graph, &vec![vec![2, 2]; 3], 3));
        let h = Pepo(random_network(&mut rng, &graph, &vec![vec![2, 2]; 3], 3));
        let f = pepo_product(&g, &h).unwrap();
        for (e, &df) in f.network().bond_dims().iter().enumerate() {
            prop_assert_eq!(df, g.network().bond_dims()[e] * h.network().bond_dims()[e]);
        }
        let dense = g.to_operator().unwrap() * h.to_operator().unwrap();
        prop_assert!(frobenius_norm(&(f.to_operator().unwrap() - &dense)) <= 1e-10 * frobenius_norm(&dense));
    }
}
