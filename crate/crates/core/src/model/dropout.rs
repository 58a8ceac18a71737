use rand::Rng as _;

use crate::seed;

/// Dropout behaviour for one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Training with a dropout stream seeded by `seed`.
    Train { seed: u64 },
}

impl Mode {
    pub fn is_train(self) -> bool {
        matches!(self, Mode::Train { .. })
    }
}

/// Per-unit multipliers: `0` for dropped units, `1/(1-p)` for survivors.
/// `None` means identity.
pub fn dropout_mask(len: usize, prob: f64, mode: Mode) -> Option<Vec<f64>> {
    let Mode::Train { seed } = mode else {
        return None;
    };
    if prob <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - prob);
    let mut rng = seed::rng(seed);
    Some(
        (0..len)
            .map(|_| if rng.gen::<f64>() < prob { 0.0 } else { keep })
            .collect(),
    )
}

pub fn dropout(activations: &[f64], prob: f64, seed: u64, train_mode: bool) -> Vec<f64> {
    let mode = if train_mode { Mode::Train { seed } } else { Mode::Eval };
    match dropout_mask(activations.len(), prob, mode) {
        Some(mask) => activations.iter().zip(&mask).map(|(a, m)| a * m).collect(),
        None => activations.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_cases() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(dropout(&x, 0.0, 9, true), x);
        assert_eq!(dropout(&x, 0.5, 9, false), x);
    }

    #[test]
    fn zeroed_fraction_and_scaling() {
        let x = vec![1.0; 1_000_000];
        let y = dropout(&x, 0.5, 17, true);
        let zeroed = y.iter().filter(|v| **v == 0.0).count() as f64 / x.len() as f64;
        // 4 sigma of Binomial(1e6, 0.5) is 0.002
        assert!((zeroed - 0.5).abs() < 0.002, "zeroed {zeroed}");
        assert!(y.iter().all(|v| *v == 0.0 || *v == 2.0));
        assert_eq!(y, dropout(&x, 0.5, 17, true));
    }
}
