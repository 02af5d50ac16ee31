use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    /// Gradient with respect to the logits.
    pub grad: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy against the smoothed target `q = (1 - eps) * onehot + eps / K`.
/// The gradient is `softmax(logits) - q`.
pub fn label_smoothed_ce(logits: &[f64], target: usize, eps: f64) -> Result<LossGrad> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::ShapeMismatch {
            expected: 2,
            actual: k,
        });
    }
    if target >= k {
        return Err(Error::TargetOutOfRange { target, classes: k });
    }
    if !eps.is_finite() || logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    let off = eps / k as f64;
    let on = 1.0 - eps + off;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(k);
    for (i, &z) in logits.iter().enumerate() {
        let log_p = z - max - log_sum;
        let q = if i == target { on } else { off };
        loss -= q * log_p;
        grad.push(log_p.exp() - q);
    }
    Ok(LossGrad { loss, grad })
}

/// The smallest achievable smoothed loss, `H(q)`, reached when the softmax
/// equals `q`.
pub fn smoothed_ce_minimum(classes: usize, eps: f64) -> f64 {
    let k = classes as f64;
    let on = 1.0 - eps + eps / k;
    let off = eps / k;
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    h(on) + (k - 1.0) * h(off)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_zero_is_plain_cross_entropy() {
        let logits = [1.0, -0.5, 2.0];
        let r = label_smoothed_ce(&logits, 2, 0.0).unwrap();
        let p = softmax(&logits);
        assert!((r.loss + p[2].ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_logits_give_log_k() {
        for k in [2usize, 3, 10, 1000] {
            for eps in [0.0, 0.1, 0.5, 0.9] {
                let r = label_smoothed_ce(&vec![0.7; k], k / 2, eps).unwrap();
                assert!((r.loss - (k as f64).ln()).abs() <= 1e-12, "k={k} eps={eps}");
            }
        }
    }

    /// Logits [2, 0], target 0, eps 0.1, K 2:
    /// q = [0.95, 0.05]; log p0 = -ln(1 + e^-2); log p1 = -2 - ln(1 + e^-2).
    /// loss = ln(1 + e^-2) + 0.05 * 2 = 0.126928011042972... + 0.1
    #[test]
    fn two_class_reference_value() {
        let r = label_smoothed_ce(&[2.0, 0.0], 0, 0.1).unwrap();
        let expected = 0.226_928_011_042_972_5_f64;
        assert!((r.loss - expected).abs() < 1e-15, "{}", r.loss);
        let h = 1e-6;
        for i in 0..2 {
            let mut up = [2.0, 0.0];
            let mut dn = [2.0, 0.0];
            up[i] += h;
            dn[i] -= h;
            let fd = (label_smoothed_ce(&up, 0, 0.1).unwrap().loss
                - label_smoothed_ce(&dn, 0, 0.1).unwrap().loss)
                / (2.0 * h);
            assert!((fd - r.grad[i]).abs() <= 1e-6 * r.grad[i].abs().max(1e-3));
        }
    }

    #[test]
    fn loss_never_below_entropy_of_target() {
        let k = 4;
        let eps = 0.2;
        let min = smoothed_ce_minimum(k, eps);
        // logits equal to log q reach the minimum
        let q: Vec<f64> = (0..k)
            .map(|i| if i == 1 { 1.0 - eps + eps / 4.0 } else { eps / 4.0 })
            .collect();
        let at_q: Vec<f64> = q.iter().map(|p| p.ln()).collect();
        let r = label_smoothed_ce(&at_q, 1, eps).unwrap();
        assert!((r.loss - min).abs() < 1e-12);
        assert!(r.grad.iter().all(|g| g.abs() < 1e-12));
        for logits in [[0.0, 5.0, 0.0, 0.0], [3.0, 1.0, -2.0, 0.5], [0.0, 50.0, 0.0, 0.0]] {
            assert!(label_smoothed_ce(&logits, 1, eps).unwrap().loss > min);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(label_smoothed_ce(&[f64::NAN, 0.0], 0, 0.1).unwrap_err().code(), "NON_FINITE_INPUT");
        assert_eq!(label_smoothed_ce(&[f64::INFINITY, 0.0], 0, 0.1).unwrap_err().code(), "NON_FINITE_INPUT");
        assert!(label_smoothed_ce(&[1.0], 0, 0.1).is_err());
        assert!(label_smoothed_ce(&[1.0, 2.0], 2, 0.1).is_err());
    }
}
