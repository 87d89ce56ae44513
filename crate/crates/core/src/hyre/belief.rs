//! Belief state over ensemble members and the softmax reweighting rule.
//!
//! Weights are `softmax_k(-L_k / T + log_prior_k)`. With `T = 1` and a zero log
//! prior this is exactly the negative-cumulative-loss softmax. A constant added to
//! every `L_k` (or every `log_prior_k`) cancels, which is why a single scalar prior
//! weight has no effect; a per-head log prior does.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    cumulative_losses: Vec<f64>,
    temperature: f64,
    log_prior: Vec<f64>,
}

impl BeliefState {
    /// Uniform belief over `k` heads.
    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("belief needs at least one head"));
        }
        Ok(Self {
            cumulative_losses: vec![0.0; k],
            temperature: 1.0,
            log_prior: vec![0.0; k],
        })
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn with_log_prior(mut self, log_prior: Vec<f64>) -> Result<Self> {
        if log_prior.len() != self.k() {
            return Err(Error::invalid("log prior length differs from head count"));
        }
        if log_prior.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("log prior entries must be finite"));
        }
        self.log_prior = log_prior;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.cumulative_losses.len()
    }

    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative_losses
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    /// `L_k += losses_k`.
    pub fn accumulate(&mut self, losses: &[f64]) -> Result<()> {
        if losses.len() != self.k() {
            return Err(Error::invalid(format!(
                "{} losses for {} heads",
                losses.len(),
                self.k()
            )));
        }
        if let Some(bad) = losses.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::invalid(format!(
                "per-head losses must be finite and non-negative, got {bad}"
            )));
        }
        for (c, l) in self.cumulative_losses.iter_mut().zip(losses) {
            *c += l;
        }
        Ok(())
    }

    /// Weights on the simplex, computed with max-subtraction.
    pub fn weights(&self) -> Vec<f64> {
        let logits: Vec<f64> = self
            .cumulative_losses
            .iter()
            .zip(&self.log_prior)
            .map(|(l, p)| -l / self.temperature + p)
            .collect();
        softmax(&logits)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// `posterior_k ∝ exp(-loss_k) · prior_k`.
///
/// Heads with zero prior mass stay at zero.
pub fn generalized_update(prior: &[f64], losses: &[f64]) -> Result<Vec<f64>> {
    if prior.len() != losses.len() || prior.is_empty() {
        return Err(Error::invalid("prior and losses must be non-empty and equal length"));
    }
    let total: f64 = prior.iter().sum();
    if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("prior is not on the simplex"));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("losses must be finite"));
    }
    let logits: Vec<f64> = prior
        .iter()
        .zip(losses)
        .map(|(&p, &l)| if p > 0.0 { p.ln() - l } else { f64::NEG_INFINITY })
        .collect();
    Ok(softmax(&logits))
}

/// Plain-text record, one `key = value` per line; lists are comma separated.
///
/// ```text
/// k = 3
/// temperature = 1
/// cumulative_losses = 0,1,2
/// log_prior = 0,0,0
/// ```
///
/// Values use shortest round-trip formatting, so parsing restores bit-identical state.
impl fmt::Display for BeliefState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        writeln!(f, "k = {}", self.k())?;
        writeln!(f, "temperature = {}", self.temperature)?;
        writeln!(f, "cumulative_losses = {}", join(&self.cumulative_losses))?;
        writeln!(f, "log_prior = {}", join(&self.log_prior))
    }
}

impl FromStr for BeliefState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut k = None;
        let mut temperature = None;
        let mut losses = None;
        let mut log_prior = None;
        let list = |v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::format(format!("bad number `{x}` in belief record")))
                })
                .collect()
        };
        for (i, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(format!("belief line {}: missing `=`", i + 1)))?;
            let value = value.trim();
            match key.trim() {
                "k" => {
                    k = Some(value.parse::<usize>().map_err(|_| {
                        Error::format(format!("belief line {}: bad head count", i + 1))
                    })?)
                }
                "temperature" => {
                    temperature = Some(value.parse::<f64>().map_err(|_| {
                        Error::format(format!("belief line {}: bad temperature", i + 1))
                    })?)
                }
                "cumulative_losses" => losses = Some(list(value)?),
                "log_prior" => log_prior = Some(list(value)?),
                other => return Err(Error::format(format!("unknown belief key `{other}`"))),
            }
        }
        let missing = |name: &str| Error::format(format!("belief record missing `{name}`"));
        let k = k.ok_or_else(|| missing("k"))?;
        let losses = losses.ok_or_else(|| missing("cumulative_losses"))?;
        let log_prior = log_prior.ok_or_else(|| missing("log_prior"))?;
        if losses.len() != k || log_prior.len() != k {
            return Err(Error::format("belief list lengths disagree with k"));
        }
        let mut belief = BeliefState::uniform(k)
            .map_err(|e| Error::format(e.to_string()))?
            .with_temperature(temperature.ok_or_else(|| missing("temperature"))?)
            .and_then(|b| b.with_log_prior(log_prior))
            .map_err(|e| Error::format(e.to_string()))?;
        belief
            .accumulate(&losses)
            .map_err(|e| Error::format(e.to_string()))?;
        Ok(belief)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_weights() {
        assert_eq!(BeliefState::uniform(4).unwrap().weights(), vec![0.25; 4]);
        assert_eq!(BeliefState::uniform(1).unwrap().weights(), vec![1.0]);
        let w = BeliefState::uniform(100).unwrap().weights();
        assert!(w.iter().all(|&x| x == 0.01));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(BeliefState::uniform(0).is_err());
    }

    #[test]
    fn known_softmax_values() {
        // 1/(1+e^-1), e^-1/(1+e^-1)
        let mut b = BeliefState::uniform(2).unwrap();
        b.accumulate(&[0.0, 1.0]).unwrap();
        let w = b.weights();
        assert!((w[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((w[1] - 0.268_941_421_369_995_1).abs() < 1e-12);

        let mut b = BeliefState::uniform(3).unwrap();
        b.accumulate(&[0.0, 1.0, 2.0]).unwrap();
        let w = b.weights();
        let expected = [0.665_240_955_774_821_4, 0.244_728_471_054_797_6, 0.090_030_573_170_380_46];
        for (a, e) in w.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn accumulate_rejects_bad_losses() {
        let mut b = BeliefState::uniform(2).unwrap();
        assert!(b.accumulate(&[-1.0, 0.0]).is_err());
        assert!(b.accumulate(&[f64::NAN, 0.0]).is_err());
        assert!(b.accumulate(&[0.0]).is_err());
        let before = b.clone();
        b.accumulate(&[0.0, 0.0]).unwrap();
        assert_eq!(b, before);
    }

    #[test]
    fn large_shift_is_invariant() {
        let mut a = BeliefState::uniform(3).unwrap();
        a.accumulate(&[0.5, 2.0, 1.0]).unwrap();
        let mut b = a.clone();
        b.accumulate(&[1000.0; 3]).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn coin_posterior() {
        // Hypotheses p(heads) = 0.9 and 0.1, one head observed.
        let post = generalized_update(&[0.5, 0.5], &[-(0.9f64.ln()), -(0.1f64.ln())]).unwrap();
        assert!((post[0] - 0.9).abs() < 1e-12);
        assert!((post[1] - 0.1).abs() < 1e-12);
        assert!(generalized_update(&[0.6, 0.6], &[0.0, 0.0]).is_err());
        assert_eq!(generalized_update(&[1.0, 0.0], &[5.0, 0.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn record_round_trip() {
        let mut b = BeliefState::uniform(3)
            .unwrap()
            .with_temperature(0.3)
            .unwrap()
            .with_log_prior(vec![0.1, -0.2, 1.0 / 3.0])
            .unwrap();
        b.accumulate(&[0.1, 7.0, 1e-300]).unwrap();
        let text = b.to_string();
        assert!(text.starts_with("k = 3\n"));
        let back: BeliefState = text.parse().unwrap();
        assert_eq!(back, b);
        assert!("k = 2\ntemperature = 1\ncumulative_losses = 0\nlog_prior = 0,0\n"
            .parse::<BeliefState>()
            .is_err());
    }
}
