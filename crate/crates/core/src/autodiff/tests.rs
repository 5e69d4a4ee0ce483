use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Result;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Checks the tape gradient of Σ w ⊙ f(inputs) against central
/// differences for every input entry.
fn check(inputs: Vec<Tensor>, f: impl Fn(&mut Tape, &[Var]) -> Result<Var>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eval = |xs: &[Tensor], w: Option<&Tensor>| -> (f64, Option<Vec<Vec<f64>>>, Tensor) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone()).unwrap()).collect();
        let y = f(&mut tape, &vars).unwrap();
        let yv = tape.value(y).clone();
        let Some(w) = w else { return (0.0, None, yv) };
        let wv = tape.leaf(w.clone()).unwrap();
        let prod = tape.mul(y, wv).unwrap();
        let loss = tape.sum(prod);
        let g = tape.backward(loss).unwrap();
        let grads = vars
            .iter()
            .map(|v| g.of(*v).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; tape.value(*v).len()]))
            .collect();
        (tape.value(loss).item(), Some(grads), yv)
    };
    let (_, _, y0) = eval(&inputs, None);
    let w = random(&mut rng, y0.shape());
    let (_, grads, _) = eval(&inputs, Some(&w));
    let grads = grads.unwrap();
    let h = 1e-5;
    for (k, x) in inputs.iter().enumerate() {
        for j in 0..x.len() {
            let mut plus = inputs.clone();
            plus[k].data_mut()[j] += h;
            let mut minus = inputs.clone();
            minus[k].data_mut()[j] -= h;
            let fd = (eval(&plus, Some(&w)).0 - eval(&minus, Some(&w)).0) / (2.0 * h);
            let an = grads[k][j];
            let err = (fd - an).abs();
            assert!(err <= 1e-7_f64.max(1e-5 * an.abs().max(fd.abs())), "input {k}[{j}]: analytic {an} vs fd {fd}");
        }
    }
}

#[test]
fn primitive_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100u64 {
        let a = random(&mut rng, &[3, 4]);
        let b = random(&mut rng, &[3, 4]);
        let m = random(&mut rng, &[4, 2]);
        let row = random(&mut rng, &[1, 4]);
        let col = random(&mut rng, &[3, 1]);
        let s = 1000 + case;
        check(vec![a.clone(), m.clone()], |t, v| t.matmul(v[0], v[1]), s);
        check(vec![a.clone(), b.clone()], |t, v| t.matmul_t(v[0], v[1]), s);
        check(vec![a.clone()], |t, v| t.transpose(v[0]), s);
        check(vec![a.clone(), b.clone()], |t, v| t.add(v[0], v[1]), s);
        check(vec![a.clone(), b.clone()], |t, v| t.sub(v[0], v[1]), s);
        check(vec![a.clone(), b.clone()], |t, v| t.mul(v[0], v[1]), s);
        check(vec![a.clone(), b.clone()], |t, v| t.minimum(v[0], v[1]), s);
        check(vec![a.clone(), row.clone()], |t, v| t.add_row(v[0], v[1]), s);
        check(vec![a.clone(), row.clone()], |t, v| t.mul_row(v[0], v[1]), s);
        check(vec![a.clone(), col.clone()], |t, v| t.add_col(v[0], v[1]), s);
        check(vec![a.clone()], |t, v| Ok(t.scale(v[0], -2.5)), s);
        check(vec![a.clone()], |t, v| Ok(t.relu(v[0])), s);
        check(vec![a.clone()], |t, v| Ok(t.tanh(v[0])), s);
        check(vec![a.clone()], |t, v| Ok(t.exp(v[0])), s);
        let pos = Tensor::new(vec![3, 4], a.data().iter().map(|x| x.abs() + 0.5).collect()).unwrap();
        check(vec![pos], |t, v| Ok(t.log(v[0])), s);
        check(vec![a.clone()], |t, v| Ok(t.softplus(v[0])), s);
        check(vec![a.clone()], |t, v| Ok(t.square(v[0])), s);
        check(vec![a.clone()], |t, v| Ok(t.clamp(v[0], -0.5, 0.5)), s);
        check(vec![a.clone()], |t, v| t.softmax_rows(v[0]), s);
        check(vec![a.clone()], |t, v| t.layer_norm(v[0]), s);
        let keep: Vec<bool> = (0..12).map(|i| (i + case as usize) % 3 != 0).collect();
        check(vec![a.clone()], move |t, v| t.dropout(v[0], &keep, 0.25), s);
        check(vec![a.clone(), b.clone()], |t, v| t.concat_cols(&[v[0], v[1]]), s);
        check(vec![a.clone(), b.clone()], |t, v| t.concat_rows(&[v[0], v[1]]), s);
        check(vec![a.clone()], |t, v| t.slice_cols(v[0], 1, 2), s);
        check(vec![a.clone()], |t, v| t.slice_rows(v[0], 1, 2), s);
        check(vec![a.clone()], |t, v| Ok(t.sum(v[0])), s);
        check(vec![a.clone()], |t, v| Ok(t.mean(v[0])), s);
        check(vec![a.clone()], |t, v| t.sum_cols(v[0]), s);
    }
}

#[test]
fn two_layer_tanh_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&mut rng, &[5, 3]);
    let w1 = random(&mut rng, &[3, 6]);
    let b1 = random(&mut rng, &[1, 6]);
    let w2 = random(&mut rng, &[6, 2]);
    check(
        vec![x, w1, b1, w2],
        |t, v| {
            let h = t.matmul(v[0], v[1])?;
            let h = t.add_row(h, v[2])?;
            let h = t.tanh(h);
            t.matmul(h, v[3])
        },
        6,
    );
}

#[test]
fn primitive_values() {
    let mut t = Tape::new();
    let z = t.leaf(Tensor::row(&[0.0, 0.0])).unwrap();
    let s = t.softmax_rows(z).unwrap();
    assert_eq!(t.value(s).data(), &[0.5, 0.5]);

    let i = t.leaf(Tensor::identity(2)).unwrap();
    let m = t.leaf(Tensor::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap()).unwrap();
    let p = t.matmul(i, m).unwrap();
    assert_eq!(t.value(p).data(), &[3.0, 4.0, 5.0, 6.0]);

    let r = t.leaf(Tensor::row(&[-1.0, 2.0])).unwrap();
    let y = t.relu(r);
    assert_eq!(t.value(y).data(), &[0.0, 2.0]);

    let bad = t.leaf(Tensor::zeros(&[3, 3])).unwrap();
    match t.matmul(m, bad) {
        Err(crate::Error::Shape { left, right, .. }) => {
            assert_eq!(left, vec![2, 2]);
            assert_eq!(right, vec![3, 3]);
        }
        other => panic!("expected shape error, got {other:?}"),
    }
}

#[test]
fn square_derivative_and_softmax_sum() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::scalar(3.0)).unwrap();
    let y = t.square(x);
    let g = t.backward(y).unwrap();
    assert_eq!(g.of(x).unwrap(), &[6.0]);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut t = Tape::new();
    let x = t.leaf(random(&mut rng, &[4, 5])).unwrap();
    let s = t.softmax_rows(x).unwrap();
    for row in t.value(s).data().chunks(5) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let total = t.sum(s);
    let g = t.backward(total).unwrap();
    assert!(g.of(x).unwrap().iter().all(|v| v.abs() < 1e-15));
}

#[test]
fn masked_softmax_is_exactly_zero() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::row(&[0.3, f64::NEG_INFINITY, 1.0])).unwrap();
    let s = t.softmax_rows(x).unwrap();
    assert_eq!(t.value(s).data()[1], 0.0);
}

#[test]
fn backward_rejects_non_scalar_and_skips_unreachable() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::zeros(&[2, 2])).unwrap();
    assert!(t.backward(x).is_err());

    let mut params = ParamSet::new();
    params.push("used", Tensor::scalar(2.0));
    params.push("unused", Tensor::scalar(5.0));
    let mut t = Tape::new();
    let vars = params.attach(&mut t).unwrap();
    let y = t.square(vars[0]);
    let g = t.backward(y).unwrap();
    let mut grads = params.zero_grads();
    g.accumulate_params(&mut grads);
    assert_eq!(grads[0].item(), 4.0);
    assert_eq!(grads[1].item(), 0.0);
}

#[test]
fn fan_out_accumulates() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::scalar(1.5)).unwrap();
    let a = t.mul(x, x).unwrap();
    let b = t.add(a, x).unwrap();
    let g = t.backward(b).unwrap();
    assert_eq!(g.of(x).unwrap(), &[4.0]);
}

#[test]
fn dropout_edge_cases() {
    let mut t = Tape::new();
    let x = t.leaf(Tensor::row(&[1.0, -2.0, 3.0])).unwrap();
    let y = t.dropout(x, &[true, true, true], 0.0).unwrap();
    assert_eq!(t.value(y), t.value(x));
    assert!(t.dropout(x, &[true; 3], 1.0).is_err());
    let z = t.dropout(x, &[true, false, true], 0.5).unwrap();
    assert_eq!(t.value(z).data(), &[2.0, 0.0, 6.0]);
}

#[test]
fn adam_updates() {
    let mut params = ParamSet::new();
    params.push("w", Tensor::filled(&[2, 3], 1.0));
    let start = params.clone();
    let mut adam = Adam::new(&params, 0.1);
    let zeros = params.zero_grads();
    adam.step(&mut params, &zeros).unwrap();
    assert_eq!(params, start);

    let mut adam = Adam::new(&params, 0.1);
    let ones = vec![Tensor::filled(&[2, 3], 1.0)];
    adam.step(&mut params, &ones).unwrap();
    for v in params.get(0).data() {
        // m̂ = 1, v̂ = 1 → Δ = 0.1/(1 + 1e-8)
        assert!((v - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }
    assert_eq!(adam.steps(), 1);

    let mut p2 = start.clone();
    let mut p3 = start.clone();
    let mut a2 = Adam::new(&p2, 0.1);
    let mut a3 = Adam::new(&p3, 0.1);
    a2.step(&mut p2, &ones).unwrap();
    a3.step(&mut p3, &ones).unwrap();
    assert_eq!(p2, p3);

    let nan = vec![Tensor::filled(&[2, 3], f64::NAN)];
    let err = adam.step(&mut params, &nan).unwrap_err();
    assert!(err.to_string().contains('w'));
}

#[test]
fn soft_update_endpoints() {
    let mut online = ParamSet::new();
    online.push("a", Tensor::row(&[1.0, 2.0]));
    let mut target = ParamSet::new();
    target.push("a", Tensor::row(&[5.0, -1.0]));
    let before = target.clone();
    online.soft_update_into(&mut target, 0.0).unwrap();
    assert_eq!(target, before);
    online.soft_update_into(&mut target, 1.0).unwrap();
    assert_eq!(target, online);
}

#[test]
fn flat_round_trip() {
    let mut p = ParamSet::new();
    p.push("a", Tensor::row(&[1.0, 2.0]));
    p.push("b", Tensor::zeros(&[2, 2]));
    let flat: Vec<f64> = (0..6).map(|i| i as f64).collect();
    p.set_flat(&flat).unwrap();
    assert_eq!(p.flat(), flat);
    assert!(p.set_flat(&flat[..5]).is_err());
}
