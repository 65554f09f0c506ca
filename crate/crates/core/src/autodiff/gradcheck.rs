use super::{Graph, NodeId, Tensor};
use crate::error::{Error, Result};

/// Compares reverse-mode gradients against central finite differences.
///
/// `builder` receives a fresh graph and one leaf per entry of `params` and
/// must return a scalar node. The result is the largest element-wise
/// relative error `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(builder: F, params: &[Tensor], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::Invalid(format!("epsilon {epsilon} outside (0, 1e-2]")));
    }
    let eval = |values: &[Tensor]| -> Result<(f64, Vec<Tensor>)> {
        let mut g = Graph::new();
        let leaves = values
            .iter()
            .map(|v| g.make(v.clone(), true))
            .collect::<Result<Vec<_>>>()?;
        let root = builder(&mut g, &leaves)?;
        let out = g.scalar(root);
        if !out.is_finite() {
            return Err(Error::NonFinite("grad_check builder".into()));
        }
        let grads = g.backward(root)?;
        let per_leaf = leaves
            .iter()
            .map(|l| grads.get(*l).cloned().expect("leaf gradient"))
            .collect();
        Ok((out, per_leaf))
    };

    let (_, analytic) = eval(params)?;
    let mut worst = 0.0f64;
    let mut probe = params.to_vec();
    for (p, grad) in analytic.iter().enumerate() {
        for i in 0..params[p].len() {
            let orig = params[p].data()[i];
            probe[p].data_mut()[i] = orig + epsilon;
            let (up, _) = eval(&probe)?;
            probe[p].data_mut()[i] = orig - epsilon;
            let (down, _) = eval(&probe)?;
            probe[p].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let a = grad.data()[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_has_tiny_error() {
        let err = grad_check(
            |g, p| g.mul(p[0], p[0]).and_then(|n| g.sum(n)),
            &[Tensor::scalar(3.0)],
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn dead_parameter_has_zero_gradient_both_ways() {
        let err = grad_check(|g, p| g.sum(p[0]), &[Tensor::vector(vec![1.0, 2.0]), Tensor::scalar(5.0)], 1e-5)
            .unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(grad_check(|g, p| g.sum(p[0]), &[Tensor::scalar(1.0)], 0.5).is_err());
        assert!(grad_check(|g, p| g.sum(p[0]), &[Tensor::scalar(1.0)], 0.0).is_err());
    }

    #[test]
    fn non_finite_builder_is_an_error() {
        assert!(grad_check(|g, p| g.log(p[0]), &[Tensor::scalar(-1.0)], 1e-5).is_err());
    }
}
