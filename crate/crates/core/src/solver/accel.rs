//! Auxiliary-sequence bookkeeping for the accelerated solver: the coupled
//! scalars (a_k, b_k, gamma_k, alpha_k, beta_k) and the adaptive-restart
//! trigger.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coupled acceleration scalars. `update` advances one iteration: it
/// solves the gamma coupling equation, derives alpha and beta, and then
/// steps (a, b) for the next iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelParams {
    /// Convexity-estimate parameter sigma >= 0.
    pub sigma: f64,
    /// Plays the same role as sigma in the alpha/beta formulas; kept
    /// separate for experimentation, equal to sigma by default.
    pub rho: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Block count n in the coupling equations.
    pub nblocks: usize,
}

impl AccelParams {
    /// Initial values: a_0 defaults to 1/n, b_0 to 1.
    pub fn initial(sigma: f64, rho: Option<f64>, a0: Option<f64>, b0: f64, nblocks: usize) -> Result<Self> {
        if nblocks == 0 {
            return Err(Error::Param("acceleration needs at least one block".into()));
        }
        if sigma < 0.0 || b0 <= 0.0 {
            return Err(Error::Param(format!("need sigma >= 0 and b0 > 0, got {sigma}, {b0}")));
        }
        let a = a0.unwrap_or(1.0 / nblocks as f64);
        if a <= 0.0 {
            return Err(Error::Param(format!("a0 must be positive, got {a}")));
        }
        Ok(Self {
            sigma,
            rho: rho.unwrap_or(sigma),
            a,
            b: b0,
            gamma: 0.0,
            alpha: 0.0,
            beta: 0.0,
            nblocks,
        })
    }

    /// Resets (a, b) to fresh initial values, discarding stale momentum
    /// bookkeeping after a restart.
    pub fn reset(&mut self, a0: Option<f64>, b0: f64) {
        self.a = a0.unwrap_or(1.0 / self.nblocks as f64);
        self.b = b0;
    }
}

/// Advances the auxiliary scalars one iteration.
///
/// gamma_k is the larger root of
///   gamma^2 - gamma (1/n - sigma a^2 / (n b^2)) - a^2 / b^2 = 0,
/// which rearranges the coupling equation
///   gamma^2 - gamma/n = (1 - gamma sigma / n) a^2 / b^2
/// and satisfies gamma >= 1/n. Then
///   alpha = (n - gamma rho) / (gamma (n^2 - rho)),
///   beta  = 1 - gamma rho / n,
///   b_next = b / sqrt(beta),
///   a_next = gamma * beta_next,
/// with beta_next computed from the current gamma (the next iteration's
/// gamma is not yet known).
pub fn update_accel(params: &AccelParams) -> Result<AccelParams> {
    let n = params.nblocks as f64;
    let (a, b) = (params.a, params.b);
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Param(format!("invalid accel state: a = {a}, b = {b}")));
    }
    let q = a * a / (b * b);
    // gamma^2 + p gamma - q = 0 with p = sigma q / n - 1/n
    let p = params.sigma * q / n - 1.0 / n;
    let disc = p * p + 4.0 * q;
    if disc < 0.0 {
        return Err(Error::Param(format!("coupling equation has no real root (disc = {disc})")));
    }
    let gamma = (-p + disc.sqrt()) / 2.0;
    if gamma < 1.0 / n - 1e-12 {
        return Err(Error::Param(format!("gamma = {gamma} fell below 1/n = {}", 1.0 / n)));
    }
    let rho = params.rho;
    let alpha = (n - gamma * rho) / (gamma * (n * n - rho));
    let beta = 1.0 - gamma * rho / n;
    if !(beta > 0.0) || beta > 1.0 + 1e-12 {
        return Err(Error::Param(format!("beta = {beta} outside (0, 1]")));
    }
    if !(alpha > 0.0) || alpha > 1.0 + 1e-12 {
        return Err(Error::Param(format!("alpha = {alpha} outside (0, 1]")));
    }
    let b_next = b / beta.sqrt();
    let beta_next = 1.0 - gamma * rho / n;
    let a_next = gamma * beta_next;
    Ok(AccelParams {
        gamma,
        alpha,
        beta,
        a: a_next,
        b: b_next,
        ..*params
    })
}

/// Adaptive-restart trigger: true iff the decrease was insufficient,
/// f_prev - f_next < c1 |grad f(Y_prev)|^2 (strict inequality).
pub fn check_restart(f_prev: f64, f_next: f64, gradnorm: f64, c1: f64) -> bool {
    f_prev - f_next < c1 * gradnorm * gradnorm
}
