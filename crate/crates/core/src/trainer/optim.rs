use crate::error::{Error, Result};

fn same_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, actual })
    }
}

/// SGD with momentum and coupled weight decay:
/// `v = momentum * v + grad + wd * param`, `param -= lr * v`.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    same_len(params.len(), grads.len())?;
    same_len(params.len(), velocity.len())?;
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g + weight_decay * *p;
        *p -= lr * *v;
    }
    Ok(())
}

/// `shadow = decay * shadow + (1 - decay) * params`.
pub fn ema_update(shadow: &mut [f64], params: &[f64], decay: f64) -> Result<()> {
    same_len(shadow.len(), params.len())?;
    for (s, &p) in shadow.iter_mut().zip(params) {
        *s = decay * *s + (1.0 - decay) * p;
    }
    Ok(())
}
