//! Simulated expert that knows the true task.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{ActionPair, Choice, QSource, ResponseModel, TaskId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpertMode {
    /// Boltzmann-rational answers with the configured precision.
    Stochastic,
    /// Always the higher-valued action; the first one on ties.
    Deterministic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    pub model: ResponseModel,
    pub mode: ExpertMode,
}

/// Answers `pair` at `state` for `true_task`. Stochastic mode consumes one
/// uniform draw per answer; deterministic mode consumes none.
pub fn respond<Q: QSource, R: Rng + ?Sized>(
    pair: &ActionPair<Q::Action>,
    state: &Q::State,
    true_task: TaskId,
    q: &Q,
    cfg: &ExpertConfig,
    rng: &mut R,
) -> Choice {
    let q1 = q.q(state, &pair.first, true_task);
    let q2 = q.q(state, &pair.second, true_task);
    match cfg.mode {
        ExpertMode::Deterministic => {
            if q2 > q1 {
                Choice::Second
            } else {
                Choice::First
            }
        }
        ExpertMode::Stochastic => {
            if rng.random::<f64>() < cfg.model.probability(q1, q2) {
                Choice::First
            } else {
                Choice::Second
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::testing::TableQ;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frequency_of_first(values: Vec<Vec<f64>>, beta: f64, n: usize, seed: u64) -> f64 {
        let q = TableQ { values };
        let cfg = ExpertConfig {
            model: ResponseModel::new(beta).unwrap(),
            mode: ExpertMode::Stochastic,
        };
        let pair = ActionPair::new(0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hits = (0..n)
            .filter(|_| respond(&pair, &(), TaskId(0), &q, &cfg, &mut rng) == Choice::First)
            .count();
        hits as f64 / n as f64
    }

    #[test]
    fn deterministic_picks_better() {
        let q = TableQ {
            values: vec![vec![0.9], vec![0.1]],
        };
        let cfg = ExpertConfig {
            model: ResponseModel::new(0.0).unwrap(),
            mode: ExpertMode::Deterministic,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let pair = ActionPair::new(0, 1).unwrap();
            assert_eq!(respond(&pair, &(), TaskId(0), &q, &cfg, &mut rng), Choice::First);
            let pair = ActionPair::new(1, 0).unwrap();
            assert_eq!(respond(&pair, &(), TaskId(0), &q, &cfg, &mut rng), Choice::Second);
        }
        let tie = TableQ {
            values: vec![vec![0.5], vec![0.5]],
        };
        let pair = ActionPair::new(1, 0).unwrap();
        assert_eq!(respond(&pair, &(), TaskId(0), &tie, &cfg, &mut rng), Choice::First);
    }

    #[test]
    fn zero_precision_is_fair() {
        let n = 10_000;
        let f = frequency_of_first(vec![vec![1.0], vec![0.0]], 0.0, n, 1);
        let se = (0.25 / n as f64).sqrt();
        assert!((f - 0.5).abs() < 3.0 * se, "f = {f}");
    }

    #[test]
    fn tenth_gap_frequency() {
        let n = 10_000;
        let p = 1.0 / (1.0 + (-1.0f64).exp());
        let f = frequency_of_first(vec![vec![0.6], vec![0.5]], 10.0, n, 2);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((f - p).abs() < 3.0 * se, "f = {f}");
    }

    #[test]
    fn chi_square_over_gaps() {
        // 1 degree of freedom per gap; 10.83 is the 0.999 quantile.
        let n = 10_000;
        for (i, gap) in [0.05f64, 0.2, -0.1].into_iter().enumerate() {
            let p = 1.0 / (1.0 + (-10.0 * gap).exp());
            let f = frequency_of_first(vec![vec![gap], vec![0.0]], 10.0, n, 10 + i as u64);
            let observed = f * n as f64;
            let expected = p * n as f64;
            let chi2 = (observed - expected).powi(2) / expected
                + (observed - expected).powi(2) / (n as f64 - expected);
            assert!(chi2 < 10.83, "gap {gap}: chi2 = {chi2}");
        }
    }

    #[test]
    fn large_precision_approaches_deterministic() {
        let f = frequency_of_first(vec![vec![0.6], vec![0.5]], 1e4, 1000, 3);
        assert_eq!(f, 1.0);
    }

    #[test]
    fn seeded_answers_repeat() {
        let a = frequency_of_first(vec![vec![0.55], vec![0.5]], 10.0, 500, 42);
        let b = frequency_of_first(vec![vec![0.55], vec![0.5]], 10.0, 500, 42);
        assert_eq!(a, b);
    }
}
