//! Minimal differentiable toolkit: tensors, a reverse-mode tape, layers,
//! Adam and a parameter checkpoint format.

pub mod checkpoint;
pub mod layers;
pub mod params;
pub mod tape;
pub mod tensor;

pub use layers::{CellKind, Dense, RecurrentCell};
pub use params::{Adam, Param, ParamId, ParamSet};
pub use tape::{sigmoid, Gradients, Tape, TensorError, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::keyed_rng;

    #[test]
    fn square_sum_gradient() {
        let ps = ParamSet::new();
        let mut tape = Tape::new(&ps);
        let x = tape.constant(Tensor::row(&[1.0, 2.0]));
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum_all(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.of(x).unwrap().data, vec![2.0, 4.0]);
    }

    #[test]
    fn unused_parameter_gets_zero_grad() {
        let mut ps = ParamSet::new();
        let used = ps.add("used", Tensor::row(&[3.0]));
        ps.add("unused", Tensor::row(&[5.0, 6.0]));
        let mut tape = Tape::new(&ps);
        let u = tape.param(used);
        let loss = tape.sum_all(u);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.params[0].data, vec![1.0]);
        assert_eq!(g.params[1].data, vec![0.0, 0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let ps = ParamSet::new();
        let mut tape = Tape::new(&ps);
        let x = tape.constant(Tensor::row(&[1.0, 2.0]));
        assert_eq!(tape.backward(x).unwrap_err(), TensorError::NonScalarLoss((1, 2)));
    }

    #[test]
    fn forward_identities() {
        let ps = ParamSet::new();
        let mut tape = Tape::new(&ps);
        let x = tape.constant(Tensor::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]));
        let w = tape.constant(Tensor::identity(3));
        let b = tape.constant(Tensor::zeros(1, 3));
        let y = tape.affine(x, w, b).unwrap();
        assert_eq!(tape.value(y), tape.value(x));

        let c = tape.constant(Tensor::filled(1, 4, 0.7));
        let s = tape.softmax_rows(c);
        assert!(tape.value(s).data.iter().all(|&p| (p - 0.25).abs() < 1e-15));

        let z = tape.constant(Tensor::row(&[0.0]));
        let sz = tape.sigmoid(z);
        assert_eq!(tape.value(sz).data[0], 0.5);

        let mut rng = keyed_rng(0, &[]);
        assert_eq!(tape.dropout(x, 0.5, false, &mut rng), x);
        assert_eq!(tape.dropout(x, 0.0, true, &mut rng), x);
    }

    #[test]
    fn shape_errors_name_operands() {
        let ps = ParamSet::new();
        let mut tape = Tape::new(&ps);
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        let err = tape.matmul(a, b).unwrap_err();
        assert_eq!(err.to_string(), "matmul: lhs is (2, 3) but rhs is (2, 3)");
        let c = tape.constant(Tensor::zeros(3, 2));
        assert!(tape.add(a, c).is_err());
        assert!(tape.sum(&[]).is_err());
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let ps = ParamSet::new();
        let mut rng = keyed_rng(8, &[]);
        use rand::Rng;
        let mut tape = Tape::new(&ps);
        let data: Vec<f64> = (0..60).map(|_| rng.random_range(-30.0..30.0)).collect();
        let x = tape.constant(Tensor::from_vec(6, 10, data));
        let s = tape.softmax_rows(x);
        for r in 0..6 {
            let row = tape.value(s).row_slice(r);
            assert!(row.iter().all(|&p| p >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
