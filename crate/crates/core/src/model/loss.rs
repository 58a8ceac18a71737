use crate::error::{Error, Result};

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]` and its gradient `softmax - onehot`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numeric(format!("logits {logits:?}")));
    }
    if label >= logits.len() {
        return Err(Error::shape(format!("label {label} for {} logits", logits.len())));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_and_extreme() {
        let (loss, _) = softmax_cross_entropy(&[0.0; 6], 3).unwrap();
        assert!((loss - 6f64.ln()).abs() < 1e-12);
        assert!((loss - 1.791759).abs() < 1e-6);
        let (loss, grad) = softmax_cross_entropy(&[1000.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0).unwrap();
        assert!(loss.abs() < 1e-12 && loss.is_finite());
        assert!(grad.iter().all(|g| g.is_finite()));
        assert!(matches!(
            softmax_cross_entropy(&[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0], 0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let logits = [0.3, -1.2, 2.5, 0.0, -0.7, 1.1];
        for label in 0..6 {
            let (_, grad) = softmax_cross_entropy(&logits, label).unwrap();
            for i in 0..6 {
                let h = 1e-5;
                let mut up = logits;
                let mut dn = logits;
                up[i] += h;
                dn[i] -= h;
                let fd = (softmax_cross_entropy(&up, label).unwrap().0
                    - softmax_cross_entropy(&dn, label).unwrap().0)
                    / (2.0 * h);
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-12);
                assert!(rel < 1e-6, "label {label} logit {i}: {fd} vs {}", grad[i]);
            }
        }
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in proptest::collection::vec(-700.0f64..700.0, 6)) {
            let s: f64 = softmax(&v).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
