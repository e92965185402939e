//! Sparse encoder layers against dense normalized-adjacency products.

mod common;

use std::sync::Arc;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tip_core::encoder::{
    ddm_forward, ggm_forward, ppm_forward, DdmLayer, GgmMode, GgmUnit, PpmLayer,
};
use tip_core::*;

const DENSE_TOL: f64 = 1e-6;

fn param_rows(store: &ParamStore, id: ParamId) -> Vec<Vec<f64>> {
    to_rows(store.get(id).value())
}

/// `W_r[i][o] = Σ_b a[r][b]·V[i][b][o]` straight from the raw tensors.
fn composed_weight(store: &ParamStore, layer: &DdmLayer, r: usize) -> Vec<Vec<f64>> {
    let v = store.get(layer.bases).value();
    let a = store.get(layer.coeffs).value();
    let (d_in, nb, d_out) = (v.shape()[0], v.shape()[1], v.shape()[2]);
    let mut w = vec![vec![0.0; d_out]; d_in];
    for (i, row) in w.iter_mut().enumerate() {
        for (o, cell) in row.iter_mut().enumerate() {
            for b in 0..nb {
                *cell += a.get(r, b) * v.data()[(i * nb + b) * d_out + o];
            }
        }
    }
    w
}

/// Dense relational layer with explicit per-relation weights.
fn dense_relational(
    n: usize,
    edges: &[Vec<(usize, usize)>],
    h: &[Vec<f64>],
    weights: &[Vec<Vec<f64>>],
    self_weight: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let mut out = dense_matmul(h, self_weight);
    for (r, e) in edges.iter().enumerate() {
        let a = row_normalized(n, n, e);
        let msg = dense_matmul(&dense_matmul(&a, h), &weights[r]);
        out = add_rows(&out, &msg);
    }
    relu_rows(&out)
}

fn both_orientations(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect()
}

fn random_undirected(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                e.push((a, b));
            }
        }
    }
    e
}

#[test]
fn mean_aggregate_matches_dense_on_100_graphs() {
    let mut r = rng(1);
    for _ in 0..100 {
        let ns = r.gen_range(1..=30);
        let nt = r.gen_range(1..=30);
        let mut edges = Vec::new();
        for s in 0..ns {
            for t in 0..nt {
                if r.gen_bool(0.15) {
                    edges.push((s, t));
                }
            }
        }
        let x = uniform(&[ns, 4], -2.0, 2.0, &mut r);
        let adj = Arc::new(Adjacency::from_edges(ns, nt, edges.clone()).unwrap());
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let out = tape.mean_aggregate(xv, adj).unwrap();
        let dense = dense_matmul(&row_normalized(nt, ns, &edges), &to_rows(&x));
        assert!(max_abs_diff(&dense, tape.value(out)) <= DENSE_TOL);
    }
}

#[test]
fn protein_layers_match_dense_on_100_graphs() {
    let mut r = rng(2);
    for _ in 0..100 {
        let n = r.gen_range(2..=30);
        let undirected = random_undirected(n, 0.15, &mut r);
        let directed = both_orientations(&undirected);
        let adj = Arc::new(Adjacency::from_edges(n, n, directed.clone()).unwrap());
        let mut store = ParamStore::new();
        // One-hot input (no residual), a projected residual, an identity residual.
        let layers = vec![
            PpmLayer::init(&mut store, "l0", n, 6, true, &mut r).unwrap(),
            PpmLayer::init(&mut store, "l1", 6, 4, false, &mut r).unwrap(),
            PpmLayer::init(&mut store, "l2", 4, 4, false, &mut r).unwrap(),
        ];
        let mut tape = Tape::new();
        let out = ppm_forward(&mut tape, &store, &adj, NodeInput::OneHot(n), &layers).unwrap();

        let a = row_normalized(n, n, &directed);
        let h1 = relu_rows(&dense_matmul(&a, &param_rows(&store, layers[0].weight)));
        let encoder::Residual::Projection(p1) = layers[1].residual else {
            panic!()
        };
        let h2 = relu_rows(&add_rows(
            &dense_matmul(
                &dense_matmul(&a, &h1),
                &param_rows(&store, layers[1].weight),
            ),
            &dense_matmul(&h1, &param_rows(&store, p1)),
        ));
        assert_eq!(layers[2].residual, encoder::Residual::Identity);
        let h3 = relu_rows(&add_rows(
            &dense_matmul(
                &dense_matmul(&a, &h2),
                &param_rows(&store, layers[2].weight),
            ),
            &h2,
        ));
        assert!(max_abs_diff(&h3, tape.value(out)) <= DENSE_TOL);
    }
}

#[test]
fn graph_to_graph_unit_matches_dense_on_100_graphs() {
    let mut r = rng(3);
    for case in 0..100 {
        let np = r.gen_range(1..=30);
        let nd = r.gen_range(1..=30);
        let mut pd = Vec::new();
        for p in 0..np {
            for d in 0..nd {
                if r.gen_bool(0.1) {
                    pd.push((p, d));
                }
            }
        }
        let adj = Arc::new(Adjacency::from_edges(np, nd, pd.clone()).unwrap());
        let hp = uniform(&[np, 5], -2.0, 2.0, &mut r);
        let mode = if case % 2 == 0 {
            GgmMode::Cat
        } else {
            GgmMode::Sum
        };
        let mut store = ParamStore::new();
        let unit = GgmUnit::init(&mut store, 5, nd, 3, 3, mode, &mut r).unwrap();
        let mut tape = Tape::new();
        let hv = tape.constant(hp.clone());
        let out = ggm_forward(&mut tape, &store, &adj, hv, NodeInput::OneHot(nd), &unit).unwrap();

        let a = row_normalized(nd, np, &pd);
        let from_p = relu_rows(&dense_matmul(
            &dense_matmul(&a, &to_rows(&hp)),
            &param_rows(&store, unit.protein_weight),
        ));
        let from_d = relu_rows(&param_rows(&store, unit.drug_weight));
        let expected: Vec<Vec<f64>> = match mode {
            GgmMode::Cat => from_p
                .iter()
                .zip(&from_d)
                .map(|(a, b)| [a.clone(), b.clone()].concat())
                .collect(),
            GgmMode::Sum => add_rows(&from_p, &from_d),
        };
        assert!(max_abs_diff(&expected, tape.value(out)) <= DENSE_TOL);
    }
}

#[test]
fn relational_layers_match_dense_on_100_graphs() {
    let mut r = rng(4);
    for _ in 0..100 {
        let n = r.gen_range(2..=30);
        let nr = r.gen_range(1..=4);
        let undirected: Vec<_> = (0..nr).map(|_| random_undirected(n, 0.1, &mut r)).collect();
        let directed: Vec<_> = undirected.iter().map(|e| both_orientations(e)).collect();
        let adj = Arc::new(RelationalAdjacency::from_edges(n, &directed).unwrap());
        let mut store = ParamStore::new();
        let nb = r.gen_range(1..=5);
        let layers = vec![
            DdmLayer::init(&mut store, "d0", 3, 5, nr, nb, &mut r).unwrap(),
            DdmLayer::init(&mut store, "d1", 5, 2, nr, nb, &mut r).unwrap(),
        ];
        let h0 = uniform(&[n, 3], -2.0, 2.0, &mut r);
        let mut tape = Tape::new();
        let hv = tape.constant(h0.clone());
        let out = ddm_forward(&mut tape, &store, &adj, NodeInput::Dense(hv), &layers).unwrap();

        let mut h = to_rows(&h0);
        for layer in &layers {
            let ws: Vec<_> = (0..nr)
                .map(|rel| composed_weight(&store, layer, rel))
                .collect();
            h = dense_relational(
                n,
                &directed,
                &h,
                &ws,
                &param_rows(&store, layer.self_weight),
            );
        }
        assert!(max_abs_diff(&h, tape.value(out)) <= DENSE_TOL);
    }
}

#[test]
fn indicator_bases_collapse_to_unconstrained_layer() {
    let mut r = rng(5);
    for _ in 0..100 {
        let n = r.gen_range(2..=20);
        let nr = r.gen_range(1..=5);
        let directed: Vec<_> = (0..nr)
            .map(|_| both_orientations(&random_undirected(n, 0.2, &mut r)))
            .collect();
        let adj = Arc::new(RelationalAdjacency::from_edges(n, &directed).unwrap());
        let mut store = ParamStore::new();
        let layer = DdmLayer::init(&mut store, "d", 4, 3, nr, nr, &mut r).unwrap();
        let mut eye = Tensor::zeros(&[nr, nr]);
        for k in 0..nr {
            eye.data_mut()[k * nr + k] = 1.0;
        }
        store.set_value(layer.coeffs, eye).unwrap();

        // Unconstrained weights read directly as slices V[:, r, :].
        let v = store.get(layer.bases).value().clone();
        let ws: Vec<Vec<Vec<f64>>> = (0..nr)
            .map(|rel| {
                (0..4)
                    .map(|i| (0..3).map(|o| v.data()[(i * nr + rel) * 3 + o]).collect())
                    .collect()
            })
            .collect();
        let h0 = uniform(&[n, 4], -2.0, 2.0, &mut r);
        let mut tape = Tape::new();
        let hv = tape.constant(h0.clone());
        let out = ddm_forward(
            &mut tape,
            &store,
            &adj,
            NodeInput::Dense(hv),
            std::slice::from_ref(&layer),
        )
        .unwrap();
        let dense = dense_relational(
            n,
            &directed,
            &to_rows(&h0),
            &ws,
            &param_rows(&store, layer.self_weight),
        );
        assert!(max_abs_diff(&dense, tape.value(out)) <= 1e-10);
    }
}

#[test]
fn relational_layer_by_hand() {
    // Drugs 0, 1, 2. Relation 0: {0-1}. Relation 1: {0-2, 1-2}.
    let directed = vec![vec![(0, 1), (1, 0)], vec![(0, 2), (2, 0), (1, 2), (2, 1)]];
    let adj = Arc::new(RelationalAdjacency::from_edges(3, &directed).unwrap());
    let mut store = ParamStore::new();
    let layer = DdmLayer::init(&mut store, "d", 2, 2, 2, 2, &mut rng(0)).unwrap();
    // V_0 = I, V_1 = swap; stored as [d_in, B, d_out].
    store
        .set_value(
            layer.bases,
            Tensor::new(vec![2, 2, 2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap(),
        )
        .unwrap();
    // W_0 = I, W_1 = ½·ones.
    store
        .set_value(layer.coeffs, Tensor::from_rows(&[[1.0, 0.0], [0.5, 0.5]]))
        .unwrap();
    store
        .set_value(
            layer.self_weight,
            Tensor::from_rows(&[[2.0, 0.0], [0.0, -1.0]]),
        )
        .unwrap();

    let mut tape = Tape::new();
    let h = tape.constant(Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]));
    let out = ddm_forward(&mut tape, &store, &adj, NodeInput::Dense(h), &[layer]).unwrap();
    // 0: [0,1]·W_0 + [1,1]·W_1 + [1,0]·W_o = [0,1] + [1,1] + [2,0]
    // 1: [1,0] + [1,1] + [0,-1]
    // 2: mean([½,½], [½,½]) + [2,-1], then ReLU
    let expected = [[3.0, 2.0], [2.0, 0.0], [2.5, 0.0]];
    for (i, row) in expected.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!((tape.value(out).get(i, j) - v).abs() < 1e-10);
        }
    }
}

fn permuted(edges: &[(usize, usize)], perm: &[usize]) -> Vec<(usize, usize)> {
    edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect()
}

fn permute_rows(t: &Tensor, perm: &[usize]) -> Tensor {
    let mut out = t.clone();
    let c = t.cols();
    for (i, &p) in perm.iter().enumerate() {
        out.data_mut()[p * c..(p + 1) * c].copy_from_slice(t.row(i));
    }
    out
}

#[test]
fn protein_layers_are_permutation_equivariant() {
    let mut r = rng(6);
    for _ in 0..20 {
        let n = 10;
        let edges = both_orientations(&random_undirected(n, 0.3, &mut r));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);

        let mut store = ParamStore::new();
        let layers = vec![
            PpmLayer::init(&mut store, "l0", n, 6, true, &mut r).unwrap(),
            PpmLayer::init(&mut store, "l1", 6, 4, false, &mut r).unwrap(),
        ];
        let run = |store: &ParamStore, edges: &[(usize, usize)]| {
            let adj = Arc::new(Adjacency::from_edges(n, n, edges.to_vec()).unwrap());
            let mut tape = Tape::new();
            let out = ppm_forward(&mut tape, store, &adj, NodeInput::OneHot(n), &layers).unwrap();
            tape.value(out).clone()
        };
        let base = run(&store, &edges);
        // The one-hot layer's weight rows index proteins.
        let w0 = store.get(layers[0].weight).value().clone();
        store
            .set_value(layers[0].weight, permute_rows(&w0, &perm))
            .unwrap();
        let moved = run(&store, &permuted(&edges, &perm));
        assert!(permute_rows(&base, &perm).max_abs_diff(&moved) < 1e-12);
    }
}

#[test]
fn full_encoder_is_drug_relabeling_equivariant() {
    let s = synth_graph(&SynthConfig::with_shape(30, 12, 3), 4).unwrap();
    let g = &s.graph;
    let mut perm: Vec<usize> = (0..g.num_drugs()).collect();
    perm.shuffle(&mut rng(7));
    let pd: Vec<_> = g.pd_edges().iter().map(|&(p, d)| (p, perm[d])).collect();
    let dd: Vec<Vec<_>> = g
        .dd_edges_all()
        .iter()
        .map(|e| permuted(e, &perm))
        .collect();
    let h = MultiModalGraph::from_counts(
        g.num_proteins(),
        g.num_drugs(),
        g.pp_edges().to_vec(),
        pd,
        dd,
    )
    .unwrap();

    for v in Variant::ALL {
        let ctx_g = GraphContext::new(g).unwrap();
        let ctx_h = GraphContext::new(&h).unwrap();
        let model =
            TipModel::new(ModelConfig::for_variant(v), GraphShape::from(&ctx_g), 3).unwrap();
        let mut moved = model.clone();
        // Parameters with one row per drug: the one-hot input weights.
        for id in model.params().ids() {
            let p = model.params().get(id);
            let indexes_drugs = matches!(p.name(), "ggm.drug" | "drug_features")
                || (matches!(p.name(), "ddm.0.bases" | "ddm.0.self") && !v.uses_proteins());
            if indexes_drugs {
                let t = p.value();
                let flat = t
                    .reshaped(vec![t.shape()[0], t.len() / t.shape()[0]])
                    .unwrap();
                let back = permute_rows(&flat, &perm)
                    .reshaped(t.shape().to_vec())
                    .unwrap();
                moved.params_mut().set_value(id, back).unwrap();
            }
        }
        let z = model.embeddings(&ctx_g).unwrap();
        let zm = moved.embeddings(&ctx_h).unwrap();
        assert!(
            permute_rows(&z, &perm).max_abs_diff(&zm) < 1e-12,
            "{}",
            v.name()
        );
        assert!(z.is_finite());
    }
}
