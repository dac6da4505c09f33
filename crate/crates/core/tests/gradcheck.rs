mod support;

use rfspeech_core::nn::Graph;
use support::{gradcases, random_tensor, rng};

#[test]
fn every_op_matches_finite_differences() {
    for (name, err) in gradcases::all() {
        assert!(err < gradcases::OP_TOL, "{name}: relative error {err:e}");
    }
}

#[test]
fn softmax_rows_sum_to_one_and_single_token_attends_to_itself() {
    let mut r = rng(9);
    let mut g = Graph::<f64>::new();
    let q = g.constant(random_tensor(&mut r, &[10, 8], -3.0, 3.0)).unwrap();
    let k = g.constant(random_tensor(&mut r, &[10, 8], -3.0, 3.0)).unwrap();
    let v = g.constant(random_tensor(&mut r, &[10, 8], -3.0, 3.0)).unwrap();
    let a = g.attention(q, k, v, 2, 4).unwrap();
    for row in g.attention_probs(a).unwrap().chunks(5) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
    let v1 = g.constant(random_tensor(&mut r, &[1, 8], -1.0, 1.0)).unwrap();
    let q1 = g.constant(random_tensor(&mut r, &[1, 8], -1.0, 1.0)).unwrap();
    let single = g.attention(q1, q1, v1, 1, 2).unwrap();
    assert_eq!(g.value(single).data(), g.value(v1).data());
    assert!(g.attention(q, k, v, 2, 3).is_err());
}

#[test]
fn tiny_model_matches_finite_differences() {
    let (err, probed) = gradcases::tiny_model(21, 20);
    assert!(err < gradcases::MODEL_TOL, "relative error {err:e} over {probed:?}");
}
