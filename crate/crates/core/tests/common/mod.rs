//! Shared helpers for the acceptance suite.

use lla_core::autodiff::{Tape, Value};

/// Central finite-difference gradient check. `f` rebuilds the graph from the
/// given leaves and returns a scalar root; every input element is perturbed
/// by a scaled step in both directions. Relative error must stay below `tol`
/// wherever the gradient is meaningfully large; near-zero gradients are held
/// to a small absolute bound instead.
pub fn check_gradients<F>(inputs: &[(Vec<usize>, Vec<f64>)], tol: f64, f: F)
where
    F: Fn(&mut Tape, &[Value]) -> Value,
{
    let eval = |perturb: Option<(usize, usize, f64)>| -> (f64, Option<Vec<Vec<f64>>>) {
        let mut tape = Tape::new();
        let leaves: Vec<Value> = inputs
            .iter()
            .enumerate()
            .map(|(k, (shape, data))| {
                let mut data = data.clone();
                if let Some((i, j, delta)) = perturb {
                    if k == i {
                        data[j] += delta;
                    }
                }
                tape.leaf(shape, &data, true).unwrap()
            })
            .collect();
        let root = f(&mut tape, &leaves);
        let y = tape.data(root)[0];
        if perturb.is_none() {
            tape.backward(root).unwrap();
            let grads = leaves
                .iter()
                .map(|&l| {
                    // A leaf the backward pass never reached (e.g. a pool
                    // member that wins no column) has a zero gradient.
                    tape.grad(l)
                        .map(|g| g.to_vec())
                        .unwrap_or_else(|| vec![0.0; tape.data(l).len()])
                })
                .collect();
            (y, Some(grads))
        } else {
            (y, None)
        }
    };

    let (_, grads) = eval(None);
    let grads = grads.unwrap();
    for (i, (_, data)) in inputs.iter().enumerate() {
        for j in 0..data.len() {
            let h = 1e-6 * (1.0 + data[j].abs());
            let (up, _) = eval(Some((i, j, h)));
            let (down, _) = eval(Some((i, j, -h)));
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[i][j];
            let scale = analytic.abs().max(numeric.abs());
            if scale < 1e-6 {
                assert!(
                    (analytic - numeric).abs() < 1e-7,
                    "input {i}[{j}]: analytic {analytic} vs numeric {numeric} (near zero)"
                );
            } else {
                let rel = (analytic - numeric).abs() / scale;
                assert!(
                    rel < tol,
                    "input {i}[{j}]: analytic {analytic} vs numeric {numeric}, rel err {rel}"
                );
            }
        }
    }
}
