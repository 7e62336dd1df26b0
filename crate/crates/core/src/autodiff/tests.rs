use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 2]) -> Tensor {
    Tensor::new(shape, (0..shape[0] * shape[1]).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn opts() -> GradCheckOptions {
    GradCheckOptions {
        max_coords_per_param: 64,
        ..Default::default()
    }
}

#[test]
fn softmax_of_zeros_is_uniform() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.constant(Tensor::row(vec![0.0, 0.0])).unwrap();
    let s = g.softmax(x, Axis::Cols).unwrap();
    assert_eq!(g.value(s).data(), &[0.5, 0.5]);
}

#[test]
fn softmax_along_rows_axis() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.constant(Tensor::new([2, 2], vec![1.0, 5.0, 1.0, -3.0]).unwrap()).unwrap();
    let s = g.softmax(x, Axis::Rows).unwrap();
    let d = g.value(s).data().to_vec();
    assert!((d[0] - 0.5).abs() < 1e-15 && (d[2] - 0.5).abs() < 1e-15);
    assert!((d[1] + d[3] - 1.0).abs() < 1e-12);
}

#[test]
fn sigmoid_of_zero() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.constant(Tensor::scalar(0.0)).unwrap();
    let s = g.sigmoid(x).unwrap();
    assert_eq!(g.scalar(s), 0.5);
    let ls = g.log_sigmoid(x).unwrap();
    assert!((g.scalar(ls) - 0.5f64.ln()).abs() < 1e-15);
}

#[test]
fn dropout_eval_is_identity() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = g.constant(Tensor::row(vec![1.0, -2.0, 3.0])).unwrap();
    let y = g.dropout(x, 0.2, false, &mut rng).unwrap();
    assert_eq!(g.value(y), g.value(x));
    assert!(g.dropout(x, 1.0, true, &mut rng).is_err());
}

#[test]
fn dropout_train_scales_kept_units() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = g.constant(Tensor::filled([1, 2000], 1.0)).unwrap();
    let y = g.dropout(x, 0.2, true, &mut rng).unwrap();
    let vals = g.value(y).data();
    assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.25).abs() < 1e-12));
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!((mean - 1.0).abs() < 0.1);
}

#[test]
fn sum_gradient_is_ones() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::new([2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap()).unwrap();
    let mut g = Graph::new(&store);
    let wv = g.param(w);
    let loss = g.sum(wv).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(w).unwrap(), &[1.0; 6]);
}

#[test]
fn zero_times_f_has_zero_gradient() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::row(vec![0.3, -0.7])).unwrap();
    let unused = store.add("unused", Tensor::row(vec![1.0])).unwrap();
    let mut g = Graph::new(&store);
    let wv = g.param(w);
    let t = g.tanh(wv).unwrap();
    let s = g.sum(t).unwrap();
    let loss = g.scale(s, 0.0).unwrap();
    let grads = g.backward(loss).unwrap();
    assert!(grads.get(w).unwrap().iter().all(|&x| x == 0.0));
    assert!(grads.get(unused).is_none());
    assert_eq!(grads.get_or_zeros(unused, &store), vec![0.0]);
}

#[test]
fn backward_requires_scalar() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::row(vec![1.0, 2.0])).unwrap();
    let mut g = Graph::new(&store);
    let wv = g.param(w);
    assert!(matches!(g.backward(wv), Err(AutodiffError::NonScalarLoss(_))));
}

#[test]
fn shape_mismatch_is_reported() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let a = g.constant(Tensor::zeros([2, 3])).unwrap();
    let b = g.constant(Tensor::zeros([2, 3])).unwrap();
    assert!(matches!(g.matmul(a, b), Err(AutodiffError::ShapeMismatch { .. })));
    let c = g.constant(Tensor::zeros([1, 2])).unwrap();
    assert!(g.add(a, c).is_err());
    assert!(g.add_row(a, c).is_err());
    assert!(g.pick(c, 2).is_err());
    assert!(g.embedding(a, 5).is_err());
}

#[test]
fn non_finite_values_trip() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.constant(Tensor::scalar(1000.0)).unwrap();
    assert!(matches!(g.exp(x), Err(AutodiffError::NonFiniteValue("exp"))));
    assert!(g.constant(Tensor::scalar(f64::NAN)).is_err());
}

#[test]
fn log_is_guarded_at_zero() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.constant(Tensor::row(vec![0.0, 1.0])).unwrap();
    let l = g.log(x).unwrap();
    assert_eq!(g.value(l).data(), &[LOG_EPS.ln(), 0.0]);
}

#[test]
fn quadratic_grad_check_is_tight() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::scalar(0.7)).unwrap();
    let err = grad_check(&mut store, &[w], opts(), |g| {
        let wv = g.param(w);
        let sq = g.mul(wv, wv)?;
        let three = g.scale(wv, 3.0)?;
        let s = g.add(sq, three)?;
        g.sum(s)
    })
    .unwrap();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn constant_function_has_zero_error() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::row(vec![0.5, 0.25])).unwrap();
    let err = grad_check(&mut store, &[w], opts(), |g| g.constant(Tensor::scalar(3.0))).unwrap();
    assert_eq!(err, 0.0);
}

/// Every primitive composed into one scalar; checked against central differences.
#[test]
fn all_primitives_pass_grad_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    let a = store.add("a", random_tensor(&mut rng, [2, 3])).unwrap();
    let b = store.add("b", random_tensor(&mut rng, [3, 4])).unwrap();
    let c = store.add("c", random_tensor(&mut rng, [3, 4])).unwrap();
    let r = store.add("r", random_tensor(&mut rng, [1, 4])).unwrap();
    let e = store.add("e", random_tensor(&mut rng, [5, 4])).unwrap();
    let pos = store.add("pos", Tensor::row(vec![0.3, 0.9, 1.7, 0.05])).unwrap();
    let ids = [a, b, c, r, e, pos];
    let err = grad_check(&mut store, &ids, opts(), |g| {
        let (a, b, c, r, e, pos) = (g.param(a), g.param(b), g.param(c), g.param(r), g.param(e), g.param(pos));
        let ab = g.matmul(a, b)?; // [2,4]
        let ab = g.add_row(ab, r)?;
        let t = g.tanh(ab)?;
        let abt = g.matmul_nt(t, c)?; // [2,3]
        let abt_t = g.transpose(abt)?; // [3,2]
        let s = g.sigmoid(abt_t)?;
        let sm = g.softmax(abt, Axis::Cols)?;
        let smr = g.softmax(abt, Axis::Rows)?;
        let ls = g.log_softmax(abt)?;
        let lsig = g.log_sigmoid(abt)?;
        let prod = g.mul(sm, smr)?;
        let diff = g.sub(prod, lsig)?;
        let cat = g.concat(&[diff, ls], Axis::Cols)?; // [2,6]
        let sl = g.slice_cols(cat, 1, 4)?; // [2,4]
        let stacked = g.concat(&[sl, e], Axis::Rows)?; // [7,4]
        let emb = g.embedding(stacked, 4)?;
        let lg = g.log(pos)?;
        let ex = g.exp(emb)?;
        let mix = g.mul(ex, lg)?;
        let lse = g.log_sum_exp_pick(mix, &[0, 2, 3])?;
        let pk = g.pick(s, 5)?;
        let m = g.mean(stacked)?;
        let tot = g.add_all(&[lse, pk, m])?;
        g.scale(tot, 0.7)
    })
    .unwrap();
    assert!(err <= 1e-7, "{err}");
}

/// Stand-alone LSTM step (concat-input form) checked with central differences.
#[test]
fn lstm_step_matches_finite_differences() {
    let (input, hidden) = (3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let w = store.add("w", random_tensor(&mut rng, [input + hidden, 4 * hidden])).unwrap();
    let bias = store.add("b", random_tensor(&mut rng, [1, 4 * hidden])).unwrap();
    let x0 = random_tensor(&mut rng, [1, input]);
    let h0 = random_tensor(&mut rng, [1, hidden]);
    let c0 = random_tensor(&mut rng, [1, hidden]);
    let target = random_tensor(&mut rng, [1, hidden]);
    let err = grad_check(&mut store, &[w, bias], opts(), |g| {
        let (wv, bv) = (g.param(w), g.param(bias));
        let (x, h, c, tgt) = (
            g.constant(x0.clone())?,
            g.constant(h0.clone())?,
            g.constant(c0.clone())?,
            g.constant(target.clone())?,
        );
        let xh = g.concat(&[x, h], Axis::Cols)?;
        let z = g.matmul(xh, wv)?;
        let z = g.add_row(z, bv)?;
        let i = g.slice_cols(z, 0, hidden)?;
        let f = g.slice_cols(z, hidden, hidden)?;
        let gg = g.slice_cols(z, 2 * hidden, hidden)?;
        let o = g.slice_cols(z, 3 * hidden, hidden)?;
        let (i, f, gg, o) = (g.sigmoid(i)?, g.sigmoid(f)?, g.tanh(gg)?, g.sigmoid(o)?);
        let fc = g.mul(f, c)?;
        let ig = g.mul(i, gg)?;
        let c1 = g.add(fc, ig)?;
        let tc = g.tanh(c1)?;
        let h1 = g.mul(o, tc)?;
        let d = g.sub(h1, tgt)?;
        let sq = g.mul(d, d)?;
        g.sum(sq)
    })
    .unwrap();
    assert!(err <= 1e-4, "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn softmax_rows_are_distributions(vals in proptest::collection::vec(-15.0f64..15.0, 1..12)) {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.constant(Tensor::row(vals)).unwrap();
        let s = g.softmax(x, Axis::Cols).unwrap();
        let d = g.value(s).data();
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        prop_assert!(d.iter().all(|&p| p > 0.0 && p < 1.0 || d.len() == 1));
    }

    #[test]
    fn backward_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let w = store.add("w", random_tensor(&mut rng, [1, 5])).unwrap();
        let f = |g: &mut Graph, wv: Var| -> Result<Var, AutodiffError> {
            let t = g.tanh(wv)?;
            g.sum(t)
        };
        let h = |g: &mut Graph, wv: Var| -> Result<Var, AutodiffError> {
            let s = g.softmax(wv, Axis::Cols)?;
            let p = g.pick(s, 2)?;
            g.log(p)
        };
        let grad_of = |which: u8| {
            let mut g = Graph::new(&store);
            let wv = g.param(w);
            let loss = match which {
                0 => f(&mut g, wv).unwrap(),
                1 => h(&mut g, wv).unwrap(),
                _ => {
                    let fv = f(&mut g, wv).unwrap();
                    let hv = h(&mut g, wv).unwrap();
                    let fa = g.scale(fv, a).unwrap();
                    let hb = g.scale(hv, b).unwrap();
                    g.add(fa, hb).unwrap()
                }
            };
            g.backward(loss).unwrap().get_or_zeros(w, &store)
        };
        let (gf, gh, gc) = (grad_of(0), grad_of(1), grad_of(2));
        for i in 0..5 {
            prop_assert!((gc[i] - (a * gf[i] + b * gh[i])).abs() <= 1e-8);
        }
    }
}
