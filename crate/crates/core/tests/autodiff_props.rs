mod common;

use std::sync::Arc;

use graphmgs_core::autodiff::gradcheck::check_gradients;
use graphmgs_core::autodiff::{SparseMatrix, Tape, Tensor, Var};
use graphmgs_core::seed;
use graphmgs_core::Result;
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-5;
const H: f64 = 1e-6;

fn rand_tensor(rng: &mut seed::Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape, (0..len).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Weighted sum with fixed random weights, so every output entry matters.
fn reduce(tape: &mut Tape, out: Var, seed_: u64) -> Result<Var> {
    let shape = tape.value(out).shape().to_vec();
    let w = rand_tensor(&mut seed::rng(seed_), &shape, -1.0, 1.0);
    let w = tape.constant(w);
    let p = tape.mul(out, w)?;
    Ok(tape.sum(p))
}

fn assert_grad(inputs: &[Tensor], f: impl Fn(&mut Tape, &[Var]) -> Result<Var>) {
    let r = check_gradients(inputs, H, f).unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
}

proptest! {
    #![proptest_config(common::cases(100))]

    #[test]
    fn elementwise_ops(s in any::<u64>(), r in 1usize..5, c in 1usize..5) {
        let mut rng = seed::rng(s);
        let a = rand_tensor(&mut rng, &[r, c], -2.0, 2.0);
        let b = rand_tensor(&mut rng, &[r, c], 0.5, 2.0);
        assert_grad(&[a.clone(), b.clone()], |t, v| { let o = t.add(v[0], v[1])?; reduce(t, o, s) });
        assert_grad(&[a.clone(), b.clone()], |t, v| { let o = t.sub(v[0], v[1])?; reduce(t, o, s) });
        assert_grad(&[a.clone(), b.clone()], |t, v| { let o = t.mul(v[0], v[1])?; reduce(t, o, s) });
        assert_grad(&[a.clone(), b.clone()], |t, v| { let o = t.div(v[0], v[1])?; reduce(t, o, s) });
        assert_grad(&[b.clone()], |t, v| { let o = t.recip(v[0]); reduce(t, o, s) });
        assert_grad(&[b.clone()], |t, v| { let o = t.sqrt(v[0]); reduce(t, o, s) });
        assert_grad(&[a.clone()], |t, v| { let o = t.tanh(v[0]); reduce(t, o, s) });
        assert_grad(&[a.clone()], |t, v| { let o = t.sigmoid(v[0]); reduce(t, o, s) });
        assert_grad(&[a.clone()], |t, v| { let o = t.scale(v[0], -1.7); reduce(t, o, s) });
        assert_grad(&[a.clone()], |t, v| { let o = t.mean(v[0]); Ok(t.scale(o, 3.0)) });
        // Keep ReLU inputs away from the kink.
        let relu_in = Tensor::new(&[r, c], a.data().iter().map(|x| if x.abs() < 0.05 { x + 0.1 } else { *x }).collect()).unwrap();
        assert_grad(&[relu_in], |t, v| { let o = t.relu(v[0]); reduce(t, o, s) });
    }

    #[test]
    fn matrix_ops(s in any::<u64>(), m in 1usize..5, k in 1usize..5, n in 1usize..5) {
        let mut rng = seed::rng(s);
        let a = rand_tensor(&mut rng, &[m, k], -1.0, 1.0);
        let b = rand_tensor(&mut rng, &[k, n], -1.0, 1.0);
        let row = rand_tensor(&mut rng, &[1, k], -1.0, 1.0);
        let col = rand_tensor(&mut rng, &[m, 1], -1.0, 1.0);
        let sc = rand_tensor(&mut rng, &[1], -1.0, 1.0);
        assert_grad(&[a.clone(), b.clone()], |t, v| { let o = t.matmul(v[0], v[1])?; reduce(t, o, s) });
        assert_grad(&[a.clone()], |t, v| { let o = t.transpose(v[0])?; reduce(t, o, s) });
        assert_grad(&[a.clone(), row], |t, v| { let o = t.add_row(v[0], v[1])?; reduce(t, o, s) });
        assert_grad(&[a.clone(), col], |t, v| { let o = t.mul_col(v[0], v[1])?; reduce(t, o, s) });
        assert_grad(&[a.clone(), sc], |t, v| { let o = t.scale_by(v[0], v[1])?; reduce(t, o, s) });
        assert_grad(&[a.clone()], |t, v| { let o = t.mean_rows(v[0])?; reduce(t, o, s) });
        let shifted = Tensor::new(&[m, k], a.data().iter().map(|x| x + 1.5).collect()).unwrap();
        assert_grad(&[shifted], |t, v| { let o = t.l2_norm(v[0])?; reduce(t, o, s) });
        let a2 = rand_tensor(&mut rng, &[m, k], -1.0, 1.0);
        let a3 = rand_tensor(&mut rng, &[m, n], -1.0, 1.0);
        assert_grad(&[a.clone(), a2], |t, v| { let o = t.concat(&[v[0], v[1]], 0)?; reduce(t, o, s) });
        assert_grad(&[a.clone(), a3], |t, v| { let o = t.concat(&[v[0], v[1]], 1)?; reduce(t, o, s) });
    }

    #[test]
    fn indexing_and_sparse_ops(s in any::<u64>(), rows in 1usize..6, cols in 1usize..4, picks in 1usize..8) {
        let mut rng = seed::rng(s);
        let a = rand_tensor(&mut rng, &[rows, cols], -1.0, 1.0);
        let index: Vec<usize> = (0..picks).map(|_| rng.random_range(0..rows)).collect();
        let flat: Vec<usize> = (0..picks).map(|_| rng.random_range(0..rows * cols)).collect();
        let src = rand_tensor(&mut rng, &[picks, cols], -1.0, 1.0);
        assert_grad(&[a.clone()], |t, v| { let o = t.index_select(v[0], &index)?; reduce(t, o, s) });
        assert_grad(&[src], |t, v| { let o = t.scatter_add(v[0], &index, rows)?; reduce(t, o, s) });
        assert_grad(&[a.clone()], |t, v| { let o = t.gather(v[0], &flat)?; reduce(t, o, s) });
        let entries = (0..rows * 2).map(|_| (rng.random_range(0..rows), rng.random_range(0..rows), rng.random_range(-1.0..1.0))).collect();
        let sp = Arc::new(SparseMatrix::new(rows, rows, entries));
        assert_grad(&[a.clone()], |t, v| { let o = t.spmm(&sp, v[0])?; reduce(t, o, s) });
    }

    #[test]
    fn statistical_ops(s in any::<u64>(), n in 3usize..12) {
        let mut rng = seed::rng(s);
        let x = rand_tensor(&mut rng, &[n], -1.0, 1.0);
        let y = rand_tensor(&mut rng, &[n], -1.0, 1.0);
        let tau = rng.random_range(0.2..1.0);
        assert_grad(&[x.clone()], |t, v| { let o = t.soft_rank(v[0], tau)?; reduce(t, o, s) });
        assert_grad(&[x.clone(), y.clone()], |t, v| t.pearson(v[0], v[1]));
        let targets: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..2u8))).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
        mask[0] = true;
        assert_grad(&[x], |t, v| t.bce_with_logits(v[0], &targets, &mask));
    }

    #[test]
    fn tape_isolation(s in any::<u64>(), r in 1usize..4, c in 1usize..4) {
        let mut rng = seed::rng(s);
        let a = rand_tensor(&mut rng, &[r, c], -1.0, 1.0);
        let b = rand_tensor(&mut rng, &[r, c], -1.0, 1.0);
        let f = |t: &mut Tape, x: Var| { let y = t.tanh(x); let z = t.mul(y, x).unwrap(); t.sum(z) };
        let single = |x: &Tensor| { let mut t = Tape::new(); let v = t.param(x.clone()); let l = f(&mut t, v); t.backward(l).unwrap().get(v).unwrap().clone() };
        let mut t = Tape::new();
        let (va, vb) = (t.param(a.clone()), t.param(b.clone()));
        let (la, lb) = (f(&mut t, va), f(&mut t, vb));
        let total = t.add(la, lb).unwrap();
        let g = t.backward(total).unwrap();
        prop_assert_eq!(g.get(va).unwrap(), &single(&a));
        prop_assert_eq!(g.get(vb).unwrap(), &single(&b));
    }

    #[test]
    fn deterministic_gradients(s in any::<u64>()) {
        let run = || {
            let mut rng = seed::rng(s);
            let a = rand_tensor(&mut rng, &[3, 4], -1.0, 1.0);
            let b = rand_tensor(&mut rng, &[4, 2], -1.0, 1.0);
            let mut t = Tape::new();
            let (va, vb) = (t.param(a), t.param(b));
            let m = t.matmul(va, vb).unwrap();
            let m = t.sigmoid(m);
            let l = t.sum(m);
            let out = t.value(l).item();
            let g = t.backward(l).unwrap();
            (out.to_bits(), g.get(va).unwrap().clone(), g.get(vb).unwrap().clone())
        };
        prop_assert_eq!(run(), run());
    }
}
