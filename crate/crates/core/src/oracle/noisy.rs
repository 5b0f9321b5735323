use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Answer, Oracle, OracleDescriptor, OracleError, Question, YesNo};

/// Asymmetric answer-flip probabilities plus the seed of the flip stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p_no_to_yes: f64,
    pub p_yes_to_no: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p_no_to_yes: 0.0,
            p_yes_to_no: 0.0,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn new(p_no_to_yes: f64, p_yes_to_no: f64, seed: u64) -> Self {
        NoiseConfig {
            p_no_to_yes,
            p_yes_to_no,
            seed,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        for (name, p) in [("p_no_to_yes", self.p_no_to_yes), ("p_yes_to_no", self.p_yes_to_no)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

/// Possibly invert `inner`. Exactly one uniform draw is consumed per call,
/// whatever the inner value, so flip streams line up with question order.
pub fn noisy_answer<R: Rng + ?Sized>(inner: Answer, noise: &NoiseConfig, rng: &mut R) -> Answer {
    let u: f64 = rng.random();
    let p = match inner.value {
        YesNo::No => noise.p_no_to_yes,
        YesNo::Yes => noise.p_yes_to_no,
    };
    if u < p {
        Answer {
            value: inner.value.flip(),
            flipped: true,
            ..inner
        }
    } else {
        inner
    }
}

/// Seeded noise around another oracle.
pub struct NoisyOracle<O> {
    inner: O,
    noise: NoiseConfig,
    rng: ChaCha8Rng,
}

impl<O: Oracle> NoisyOracle<O> {
    pub fn new(inner: O, noise: NoiseConfig) -> Self {
        NoisyOracle {
            inner,
            noise,
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
        }
    }
}

impl<O: Oracle> Oracle for NoisyOracle<O> {
    fn answer(&mut self, question: &Question) -> Result<Answer, OracleError> {
        let inner = self.inner.answer(question)?;
        Ok(noisy_answer(inner, &self.noise, &mut self.rng))
    }

    fn descriptor(&self) -> OracleDescriptor {
        let inner = self.inner.descriptor();
        let rates = (self.noise.p_no_to_yes, self.noise.p_yes_to_no, &inner.config_hash);
        OracleDescriptor::new(&format!("noisy({})", inner.backend), &rates, &inner.prompt_version)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = NoiseConfig::new(0.0, 0.0, 9);
        for _ in 0..100 {
            assert_eq!(noisy_answer(Answer::no(), &cfg, &mut rng), Answer::no());
            assert_eq!(noisy_answer(Answer::yes(), &cfg, &mut rng), Answer::yes());
        }
    }

    #[test]
    fn certain_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = NoiseConfig::new(1.0, 0.0, 1);
        let out = noisy_answer(Answer::no(), &cfg, &mut rng);
        assert_eq!(out.value, YesNo::Yes);
        assert!(out.flipped);
        assert_eq!(noisy_answer(Answer::yes(), &cfg, &mut rng).value, YesNo::Yes);
    }

    #[test]
    fn rejects_out_of_range_probability() {
        assert!(NoiseConfig::new(1.5, 0.0, 0).check().is_err());
        assert!(NoiseConfig::new(0.2, -0.1, 0).check().is_err());
    }
}
