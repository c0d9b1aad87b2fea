//! Central finite-difference checks for tape gradients.

use super::{ParamStore, Tape, Var};

/// Max relative error between tape gradients and central differences over
/// every parameter entry. Relative error uses `max(|a|, |b|, floor)`.
pub(crate) fn max_rel_error(
    store: &ParamStore,
    f: impl Fn(&mut Tape, &ParamStore) -> Var,
    h: f64,
    floor: f64,
) -> f64 {
    let mut tape = Tape::new();
    let loss = f(&mut tape, store);
    let grads = tape.backward(loss);
    let mut worst: f64 = 0.0;
    let mut probe = store.clone();
    for id in store.ids() {
        let analytic = grads.get(id).cloned();
        for idx in 0..store.get(id).len() {
            let orig = store.get(id).as_slice().unwrap()[idx];
            probe.get_mut(id).as_slice_mut().unwrap()[idx] = orig + h;
            let mut t = Tape::new();
            let l = f(&mut t, &probe);
            let up = t.scalar(l);
            probe.get_mut(id).as_slice_mut().unwrap()[idx] = orig - h;
            let mut t = Tape::new();
            let l = f(&mut t, &probe);
            let down = t.scalar(l);
            probe.get_mut(id).as_slice_mut().unwrap()[idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic
                .as_ref()
                .map_or(0.0, |g| g.as_slice().unwrap()[idx]);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use ndarray::{array, Array2};

    use super::*;
    use crate::nn::{ConvGeom, Csr, LrGroup, SpOp};

    fn store_with(blocks: &[(&str, Array2<f64>)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (n, v) in blocks {
            s.add(n, v.clone(), LrGroup::Main).unwrap();
        }
        s
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let s = store_with(&[
            ("a", array![[0.3, -0.7, 1.1], [0.5, 0.2, -0.4]]),
            ("b", array![[0.9, -0.2], [0.1, 0.4], [-0.6, 0.8]]),
            ("row", array![[0.05, -0.15]]),
            ("k", array![[0.7]]),
            ("img", Array2::from_shape_fn((16, 2), |(i, j)| ((i * 5 + j * 3) % 7) as f64 * 0.1 - 0.3)),
            ("kern", Array2::from_shape_fn((18, 3), |(i, j)| ((i + 2 * j) % 5) as f64 * 0.1 - 0.2)),
        ]);
        let sp = Arc::new(SpOp::new(Csr::from_triplets(
            3,
            2,
            vec![(0, 0, 0.5), (1, 1, -1.0), (2, 0, 0.25), (2, 1, 2.0)],
        )));
        let f = |t: &mut Tape, s: &ParamStore| {
            let a = t.param(s, s.id("a").unwrap());
            let b = t.param(s, s.id("b").unwrap());
            let row = t.param(s, s.id("row").unwrap());
            let k = t.param(s, s.id("k").unwrap());
            let ab = t.matmul(a, b); // 2x2
            let ab = t.add_row(ab, row);
            let sg = t.sigmoid(ab);
            let rl = t.relu(ab);
            let m = t.mul(sg, rl);
            let d = t.sub(m, ab);
            let d = t.mul_scalar(d, k);
            let col = t.gather_rows(sg, Arc::new(vec![0, 1]));
            let col = t.mean_rows(col); // 1x2
            let col_t = t.matmul(b, d); // 3x2
            let cc = t.concat_cols(&[col_t, b]); // 3x4
            let stacked = t.concat_rows(&[b, d]); // 5x2
            let stacked = t.sigmoid(stacked);
            let l0 = t.mean(stacked);
            let sp_out = t.spmm(sp.clone(), d); // 3x2
            let g = t.gather_rows(sp_out, Arc::new(vec![2, 0, 2, 1]));
            let seg = t.segment_sum(g, Arc::new(vec![0, 1, 0, 1]), 2);
            let gate = t.sigmoid(seg);
            let gate = t.gather_rows(gate, Arc::new(vec![0, 1, 0]));
            let one = t.concat_cols(&[gate]);
            let half = t_ones(t, 2, 1);
            let gcol = t.matmul(one, half);
            let mc = t.mul_col(cc, gcol);
            let af = t.affine(mc, -0.5, 0.1);
            let l1 = t.mean(af);
            let l2 = t.mse(col, Arc::new(array![[0.2, 0.9]]));
            let p = t.sigmoid(d);
            let l3 = t.bce(p, Arc::new(array![[1.0, 0.0], [0.0, 1.0]]));
            let img = t.param(s, s.id("img").unwrap());
            let geom = ConvGeom { h: 4, w: 4, c: 2, kernel: 3, stride: 2, pad: 1 };
            let cols = t.im2col(img, geom);
            let kern = t.param(s, s.id("kern").unwrap());
            let conv = t.matmul(cols, kern);
            let conv = t.relu(conv);
            let l4 = t.mean_rows(conv);
            let l4 = t.sum(l4);
            let l = t.add(l1, l2);
            let l = t.add(l, l3);
            let l = t.add(l, l0);
            t.add(l, l4)
        };
        let err = max_rel_error(&s, f, 1e-6, 1e-6);
        assert!(err < 1e-5, "max relative error {err}");
    }

    fn t_ones(t: &mut Tape, r: usize, c: usize) -> Var {
        t.constant(Array2::ones((r, c)) * 0.5)
    }
}
