//! Test-only oracles: dense reference aggregations and finite differences.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tip_core::{ParamStore, Tape, Tensor, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(lo..hi)).collect(),
    )
    .unwrap()
}

/// Naive triple-loop matrix product on row-major slices.
pub fn dense_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    let k = b.len();
    let n = if k == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![0.0; n]; m];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i][p] * b[p][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

/// `D⁻¹A` for directed `(source, target)` edges: row `target`, column `source`.
pub fn row_normalized(
    num_targets: usize,
    num_sources: usize,
    edges: &[(usize, usize)],
) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; num_sources]; num_targets];
    for &(s, t) in edges {
        a[t][s] += 1.0;
    }
    for row in &mut a {
        let deg: f64 = row.iter().sum();
        if deg > 0.0 {
            row.iter_mut().for_each(|v| *v /= deg);
        }
    }
    a
}

pub fn add_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

pub fn relu_rows(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|r| r.iter().map(|v| v.max(0.0)).collect())
        .collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &Tensor) -> f64 {
    assert_eq!(a.len(), b.rows());
    let mut m: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), b.cols());
        for (j, v) in row.iter().enumerate() {
            m = m.max((v - b.get(i, j)).abs());
        }
    }
    m
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares tape gradients of `loss` against central differences with step
/// `1e-5` at every parameter entry; `store` exposes the parameters inside
/// `state` that `loss` reads. Returns the worst relative error.
pub fn gradient_check_in<S, L>(
    state: &mut S,
    store: impl Fn(&mut S) -> &mut ParamStore,
    loss: L,
) -> f64
where
    L: Fn(&mut Tape, &S) -> Var,
{
    const H: f64 = 1e-5;
    store(state).zero_grad();
    let mut tape = Tape::new();
    let l = loss(&mut tape, state);
    tape.backward(l, store(state)).unwrap();
    let analytic: Vec<Tensor> = store(state).iter().map(|p| p.grad().clone()).collect();
    assert!(
        analytic
            .iter()
            .any(|g| g.data().iter().any(|v| v.abs() > 1e-8)),
        "every gradient vanished; the check would be vacuous"
    );

    let eval = |s: &S| {
        let mut tape = Tape::new();
        let l = loss(&mut tape, s);
        tape.value(l).item().unwrap()
    };

    let mut worst: f64 = 0.0;
    let ids: Vec<_> = store(state).ids().collect();
    for (k, id) in ids.into_iter().enumerate() {
        for idx in 0..analytic[k].len() {
            let orig = store(state).get(id).value().data()[idx];
            store(state).value_mut(id).data_mut()[idx] = orig + H;
            let up = eval(state);
            store(state).value_mut(id).data_mut()[idx] = orig - H;
            let down = eval(state);
            store(state).value_mut(id).data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * H);
            worst = worst.max(relative_error(analytic[k].data()[idx], numeric));
        }
    }
    worst
}

pub fn gradient_check<F>(store: &mut ParamStore, loss: F) -> f64
where
    F: Fn(&mut Tape, &ParamStore) -> Var,
{
    gradient_check_in(store, |s| s, loss)
}

/// Random edge list without self-loops over `n` nodes, `(source, target)`.
pub fn random_edges(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && rng.gen_bool(density) {
                edges.push((s, t));
            }
        }
    }
    edges
}
