use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coarse variables `(c, T_1..T_m)` of a travelling wave with `m` spikes.
///
/// Spike `j` crosses threshold at comoving position `ξ = c T_j`; `T_1 = 0` fixes
/// the phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseWave {
    pub c: f64,
    pub t: Vec<f64>,
}

impl CoarseWave {
    /// Builds a wave, shifting `t` so that `T_1 = 0`.
    pub fn new(c: f64, mut t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::InvalidParams("a wave needs at least one spike".into()));
        }
        let t0 = t[0];
        t.iter_mut().for_each(|x| *x -= t0);
        let wave = Self { c, t };
        wave.check()?;
        Ok(wave)
    }

    pub fn m(&self) -> usize {
        self.t.len()
    }

    pub fn width(&self) -> f64 {
        self.c * self.t[self.m() - 1]
    }

    pub fn crossings(&self) -> impl Iterator<Item = f64> + '_ {
        self.t.iter().map(move |&t| self.c * t)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::OrderViolation(format!("speed must be positive, got {}", self.c)));
        }
        if self.t[0] != 0.0 {
            return Err(Error::OrderViolation("phase condition T_1 = 0 violated".into()));
        }
        if let Some(k) = self.t.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::OrderViolation(format!(
                "offsets not strictly increasing at {}: {:?}",
                k + 1,
                self.t
            )));
        }
        Ok(())
    }

    /// Unknown vector `(c, T_2, ..., T_m)` used by the Newton solvers.
    pub fn to_unknowns(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.m());
        x.push(self.c);
        x.extend_from_slice(&self.t[1..]);
        x
    }

    pub fn from_unknowns(x: &[f64]) -> Self {
        let mut t = Vec::with_capacity(x.len());
        t.push(0.0);
        t.extend_from_slice(&x[1..]);
        Self { c: x[0], t }
    }
}

/// One sample of the travelling profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub xi: f64,
    pub nu: f64,
    pub sigma: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_normalises_phase() {
        let w = CoarseWave::new(2.0, vec![1.0, 1.5, 3.0]).unwrap();
        assert_eq!(w.t, vec![0.0, 0.5, 2.0]);
        assert_eq!(w.width(), 4.0);
    }

    #[test]
    fn rejects_bad_waves() {
        assert!(CoarseWave::new(-1.0, vec![0.0]).is_err());
        assert!(CoarseWave::new(1.0, vec![0.0, 0.0]).is_err());
        assert!(CoarseWave::new(1.0, vec![0.0, 0.5, 0.4]).is_err());
        assert!(CoarseWave::new(1.0, vec![]).is_err());
    }

    #[test]
    fn unknowns_round_trip() {
        let w = CoarseWave::new(3.0, vec![0.0, 0.1, 0.25]).unwrap();
        assert_eq!(CoarseWave::from_unknowns(&w.to_unknowns()), w);
    }
}
