//! Fetkovich aquifer: cumulative encroached water and pressure sensitivities.
//!
//! Two equivalent formulations are provided. The recursive update advances
//! `W_e` one step at a time using the midpoint of the two block pressures.
//! The closed form replaces the midpoint with the end-of-step pressure and
//! telescopes the recursion into an explicit sum over past steps; it is the
//! form the history solver uses because its pressure derivative is analytic
//! and causal (lower-triangular in step indices).

use crate::error::{Error, Result};
use num_traits::Float;

/// Aquifer parameters attached to a single block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AquiferParams<T> {
    /// Maximum encroachable water, RB.
    pub w_ei: T,
    /// Aquifer productivity index, RB/(psi*day).
    pub j: T,
    /// Initial aquifer pressure, psia (shared with the attached block).
    pub p_init: T,
}

impl<T: Float> AquiferParams<T> {
    pub fn new(w_ei: T, j: T, p_init: T) -> Result<Self> {
        if !(w_ei > T::zero()) {
            return Err(Error::invalid("aquifer: w_ei must be > 0"));
        }
        if !(j >= T::zero()) {
            return Err(Error::invalid("aquifer: j must be >= 0"));
        }
        if !(p_init > T::zero()) {
            return Err(Error::invalid("aquifer: p_init must be > 0"));
        }
        Ok(AquiferParams { w_ei, j, p_init })
    }

    /// Pot-aquifer parameterization: w_ei = c_t * w_i * p_i * (theta/360).
    pub fn from_pot(w_i: T, theta_deg: T, c_t: T, j: T, p_init: T) -> Result<Self> {
        if !(theta_deg > T::zero()) || theta_deg > T::from(360.0).unwrap() {
            return Err(Error::invalid("aquifer: theta must be in (0, 360]"));
        }
        if !(w_i > T::zero()) || !(c_t > T::zero()) {
            return Err(Error::invalid("aquifer: w_i and c_t must be > 0"));
        }
        let w_ei = c_t * w_i * p_init * (theta_deg / T::from(360.0).unwrap());
        AquiferParams::new(w_ei, j, p_init)
    }

    /// exp(-J * p_i * tau / W_ei): influx decay over an elapsed time `tau`.
    pub fn decay(&self, tau: T) -> T {
        (-self.j * self.p_init * tau / self.w_ei).exp()
    }

    /// (W_ei / p_i) * (1 - decay(dt)): drawdown-to-volume coefficient of one
    /// step of length `dt`.
    pub fn influx_coeff(&self, dt: T) -> T {
        self.w_ei / self.p_init * (T::one() - self.decay(dt))
    }

    /// One recursive update with the midpoint pressure approximation.
    ///
    /// W_e^n = W_e^{n-1}
    ///       + (W_ei/p_i) [ p_i (1 - W_e^{n-1}/W_ei) - (p^n + p^{n-1})/2 ]
    ///                    [ 1 - exp(-J p_i dt / W_ei) ]
    pub fn step_recursive(&self, w_e_prev: T, p_prev: T, p_curr: T, dt: T) -> T {
        let half = T::from(0.5).unwrap();
        let p_bar = half * (p_curr + p_prev);
        let drawdown = self.p_init * (T::one() - w_e_prev / self.w_ei) - p_bar;
        w_e_prev + self.w_ei / self.p_init * drawdown * (T::one() - self.decay(dt))
    }

    /// Closed-form cumulative influx after `n` steps (end-of-step pressure
    /// approximation):
    ///
    /// W_e^n = sum_{k=1..n} (W_ei/p_i) [1 - e^{-J p_i dt_k / W_ei}]
    ///                      e^{-J p_i (t_n - t_k) / W_ei} (p_i - p_k)
    ///
    /// `pressures[k-1]` and `dts[k-1]` hold p_k and dt_k. `n = 0` gives 0.
    pub fn step_closed_form(&self, pressures: &[T], dts: &[T], n: usize) -> Result<T> {
        if n > pressures.len() || n > dts.len() {
            return Err(Error::invalid(format!(
                "aquifer closed form: step {n} exceeds history length {}",
                pressures.len().min(dts.len())
            )));
        }
        // t_n - t_k accumulated backwards so each summand needs one decay.
        let mut elapsed = T::zero();
        let mut total = T::zero();
        for k in (0..n).rev() {
            let term = self.influx_coeff(dts[k]) * self.decay(elapsed) * (self.p_init - pressures[k]);
            total = total + term;
            elapsed = elapsed + dts[k];
        }
        Ok(total)
    }

    /// d W_e^k / d p_j of the closed form (0-based step indices):
    /// -(W_ei/p_i) [1 - e^{-J p_i dt_j / W_ei}] e^{-J p_i (t_k - t_j)/W_ei}
    /// for j <= k, and 0 for j > k.
    pub fn dwe_dp(&self, dts: &[T], k: usize, j: usize) -> T {
        if j > k {
            return T::zero();
        }
        let mut elapsed = T::zero();
        for dt in &dts[j + 1..=k] {
            elapsed = elapsed + *dt;
        }
        -self.influx_coeff(dts[j]) * self.decay(elapsed)
    }
}

/// Per-step influx record kept by the marching solvers.
#[derive(Debug, Clone, Default)]
pub struct AquiferState<T> {
    /// Cumulative encroached volume after each completed step (W_e^0 = 0 is
    /// implicit; entry k is W_e^{k+1}).
    pub w_e_history: Vec<T>,
    /// Block pressures the influx was computed with, aligned with
    /// `w_e_history`.
    pub pressure_history: Vec<T>,
}
