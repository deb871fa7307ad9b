//! Ornstein–Uhlenbeck noise: temporally correlated, mean-reverting to zero.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OuProcess {
    pub theta_ou: f64,
    pub sigma_ou: f64,
    pub dt: f64,
    state: Vec<f64>,
}

impl OuProcess {
    pub fn new(theta_ou: f64, sigma_ou: f64, dt: f64, dim: usize) -> Result<Self> {
        if theta_ou <= 0.0 {
            return Err(Error::Config(format!("ou theta must be positive, got {theta_ou}")));
        }
        if sigma_ou < 0.0 {
            return Err(Error::Config(format!("ou sigma must be >= 0, got {sigma_ou}")));
        }
        if dt <= 0.0 {
            return Err(Error::Config(format!("ou dt must be positive, got {dt}")));
        }
        Ok(OuProcess { theta_ou, sigma_ou, dt, state: vec![0.0; dim] })
    }

    pub fn with_state(mut self, state: Vec<f64>) -> Result<Self> {
        if state.len() != self.state.len() {
            return Err(Error::Dimension("ou state dimension fixed at construction".into()));
        }
        self.state = state;
        Ok(self)
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = 0.0);
    }

    /// Advance: x ← x + θ·(0 − x)·dt + σ·√dt·z, z ~ N(0, 1).
    pub fn sample(&mut self, rng: &mut impl Rng) -> Vec<f64> {
        let sqrt_dt = self.dt.sqrt();
        for x in self.state.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += self.theta_ou * (0.0 - *x) * self.dt + self.sigma_ou * sqrt_dt * z;
        }
        self.state.clone()
    }
}
