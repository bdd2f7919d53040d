//! History-mode solver: marches the coupled per-block pressure system of the
//! general material balance through the historical schedule.
//!
//! Per block the residual splits into a local part (expansion, withdrawal,
//! injection, rock/water compressibility, aquifer influx) and a non-local
//! part (time-integrated inter-block phase fluxes). The integral is
//! discretized backward Euler: pressures are implicit at the new time level,
//! relative permeabilities and saturations lag one step, viscosity is taken
//! at the upstream block's iterate pressure, and the gravity density is the
//! arithmetic mean of the two connected blocks (keeps the flux continuous
//! across potential reversals).

use crate::aquifer::AquiferParams;
use crate::error::{Error, Result};
use crate::relperm::Phase;
use crate::reservoir::{
    phase_volumes, saturations, Block, Cumulatives, HistorySchedule, ReservoirNetwork, Saturations,
};
use crate::{DEFAULT_FLUX_UNIT_CONSTANT, PSI_PER_LBMFT3_FT};
use nalgebra::{DMatrix, DVector};

/// Newton iteration controls shared by the history and forecast solvers.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Residual infinity-norm tolerance, RB.
    pub newton_tol_residual: f64,
    /// Pressure-update infinity-norm tolerance, psia.
    pub newton_tol_update: f64,
    pub max_newton_iters: usize,
    /// Update damping factor in (0, 1].
    pub damping: f64,
    pub gravity_enabled: bool,
    /// mD*ft * psi / cP -> RB/day conversion; a unit calibration.
    pub flux_unit_constant: f64,
    /// Per-iteration cap on |delta p|, psia.
    pub max_pressure_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol_residual: 1.0e-3,
            newton_tol_update: 1.0e-6,
            max_newton_iters: 30,
            damping: 1.0,
            gravity_enabled: true,
            flux_unit_constant: DEFAULT_FLUX_UNIT_CONSTANT,
            max_pressure_step: 500.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol_residual > 0.0) || !(self.newton_tol_update > 0.0) {
            return Err(Error::invalid("solver: tolerances must be > 0"));
        }
        if self.max_newton_iters < 1 {
            return Err(Error::invalid("solver: max_newton_iters must be >= 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("solver: damping must be in (0,1]"));
        }
        if !(self.flux_unit_constant > 0.0) || !(self.max_pressure_step > 0.0) {
            return Err(Error::invalid(
                "solver: flux_unit_constant and max_pressure_step must be > 0",
            ));
        }
        Ok(())
    }
}

/// Local (within-block) material balance residual, RB:
///
///   N_foi [B_o - B_oi + B_g (R_si - R_s) + R_v (B_oi R_s - B_o R_si)] / (1 - R_s R_v)
/// + G_fgi [B_g - B_gi + B_o (R_vi - R_v) + R_s (B_gi R_v - B_g R_vi)] / (1 - R_s R_v)
/// - N_p (B_o - R_s B_g)/(1 - R_s R_v) - G_p (B_g - R_v B_o)/(1 - R_s R_v)
/// - W_p B_w + W_inj B_winj + G_inj B_ginj
/// + (N_foi B_oi + G_fgi B_gi) (c_f + c_w S_wi)/(1 - S_wi) (p_i - p) + W_e
pub fn residual_local(block: &Block, p: f64, cum: &Cumulatives, w_e: f64) -> Result<f64> {
    let v = block.pvt.values(p);
    let denom = 1.0 - v.rs * v.rv;
    if denom <= 0.0 {
        return Err(Error::invalid(format!(
            "block {}: singular PVT denominator at p = {p}",
            block.id
        )));
    }
    let (b_oi, b_gi, r_si, r_vi) = (block.b_oi(), block.b_gi(), block.r_si(), block.r_vi());
    let oil_expansion = v.bo - b_oi + v.bg * (r_si - v.rs) + v.rv * (b_oi * v.rs - v.bo * r_si);
    let gas_expansion = v.bg - b_gi + v.bo * (r_vi - v.rv) + v.rs * (b_gi * v.rv - v.bg * r_vi);
    let dp = block.p_init - p;
    Ok(block.n_foi * oil_expansion / denom
        + block.g_fgi * gas_expansion / denom
        - cum.np * (v.bo - v.rs * v.bg) / denom
        - cum.gp * (v.bg - v.rv * v.bo) / denom
        - cum.wp * v.bw
        + cum.winj * v.bw
        + cum.ginj * v.bg
        + (block.n_foi * b_oi + block.g_fgi * b_gi) * block.rock_water_expansion() * dp
        + w_e)
}

/// Analytic pressure derivative of [`residual_local`]. `dwe_dp` is the
/// aquifer sensitivity of W_e to this block's pressure (0 without aquifer).
pub fn residual_local_dp(block: &Block, p: f64, cum: &Cumulatives, dwe_dp: f64) -> Result<f64> {
    let v = block.pvt.values(p);
    let s = block.pvt.slopes(p);
    let denom = 1.0 - v.rs * v.rv;
    if denom <= 0.0 {
        return Err(Error::invalid(format!(
            "block {}: singular PVT denominator at p = {p}",
            block.id
        )));
    }
    let d_denom = -(s.rs * v.rv + v.rs * s.rv);
    let (b_oi, b_gi, r_si, r_vi) = (block.b_oi(), block.b_gi(), block.r_si(), block.r_vi());

    let oil_exp = v.bo - b_oi + v.bg * (r_si - v.rs) + v.rv * (b_oi * v.rs - v.bo * r_si);
    let d_oil_exp = s.bo + s.bg * (r_si - v.rs) - v.bg * s.rs
        + s.rv * (b_oi * v.rs - v.bo * r_si)
        + v.rv * (b_oi * s.rs - s.bo * r_si);

    let gas_exp = v.bg - b_gi + v.bo * (r_vi - v.rv) + v.rs * (b_gi * v.rv - v.bg * r_vi);
    let d_gas_exp = s.bg + s.bo * (r_vi - v.rv) - v.bo * s.rv
        + s.rs * (b_gi * v.rv - v.bg * r_vi)
        + v.rs * (b_gi * s.rv - s.bg * r_vi);

    let oil_wd = v.bo - v.rs * v.bg;
    let d_oil_wd = s.bo - s.rs * v.bg - v.rs * s.bg;
    let gas_wd = v.bg - v.rv * v.bo;
    let d_gas_wd = s.bg - s.rv * v.bo - v.rv * s.bo;

    let quotient = |f: f64, df: f64| (df * denom - f * d_denom) / (denom * denom);

    Ok(block.n_foi * quotient(oil_exp, d_oil_exp)
        + block.g_fgi * quotient(gas_exp, d_gas_exp)
        - cum.np * quotient(oil_wd, d_oil_wd)
        - cum.gp * quotient(gas_wd, d_gas_wd)
        - cum.wp * s.bw
        + cum.winj * s.bw
        + cum.ginj * s.bg
        - (block.n_foi * b_oi + block.g_fgi * b_gi) * block.rock_water_expansion()
        + dwe_dp)
}

fn mu_prop(phase: Phase) -> crate::pvt::PvtProperty {
    match phase {
        Phase::Oil => crate::pvt::PvtProperty::MuO,
        Phase::Gas => crate::pvt::PvtProperty::MuG,
        Phase::Water => crate::pvt::PvtProperty::MuW,
    }
}

fn rho_prop(phase: Phase) -> crate::pvt::PvtProperty {
    match phase {
        Phase::Oil => crate::pvt::PvtProperty::RhoO,
        Phase::Gas => crate::pvt::PvtProperty::RhoG,
        Phase::Water => crate::pvt::PvtProperty::RhoW,
    }
}

/// Current-step phase fluxes into block `a` from block `b`, RB, with
/// derivatives w.r.t. both pressures:
///
///   F_alpha = C T k_r(S_up^n) dt / mu_alpha(p_up) * [p_b - p_a - rho_bar g (z_b - z_a)]
///
/// Upstream is the block with the higher phase potential; k_r uses the
/// upstream block's lagged saturation, viscosity the upstream iterate
/// pressure. rho_bar is the two-block arithmetic mean.
#[allow(clippy::too_many_arguments)]
pub fn phase_fluxes(
    a: &Block,
    b: &Block,
    t_ab: f64,
    dt: f64,
    sat_a: &Saturations,
    sat_b: &Saturations,
    p_a: f64,
    p_b: f64,
    config: &SolverConfig,
) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let mut flux = [0.0; 3];
    let mut d_dpa = [0.0; 3];
    let mut d_dpb = [0.0; 3];
    if t_ab == 0.0 {
        return (flux, d_dpa, d_dpb);
    }
    let dz = b.z - a.z;
    let grav_on = config.gravity_enabled && dz != 0.0;
    for (idx, phase) in Phase::ALL.iter().enumerate() {
        let (grav, dgrav_dpa, dgrav_dpb) = if grav_on {
            let rho_a = a.pvt.eval(rho_prop(*phase), p_a);
            let rho_b = b.pvt.eval(rho_prop(*phase), p_b);
            let g = 0.5 * (rho_a + rho_b) * dz * PSI_PER_LBMFT3_FT;
            let dga = 0.5 * a.pvt.eval_dp(rho_prop(*phase), p_a) * dz * PSI_PER_LBMFT3_FT;
            let dgb = 0.5 * b.pvt.eval_dp(rho_prop(*phase), p_b) * dz * PSI_PER_LBMFT3_FT;
            (g, dga, dgb)
        } else {
            (0.0, 0.0, 0.0)
        };
        let dpot = p_b - p_a - grav;
        let b_upstream = dpot > 0.0;
        let (up_block, up_sat, p_up) = if b_upstream {
            (b, sat_b, p_b)
        } else {
            (a, sat_a, p_a)
        };
        let kr = up_block.relperm.kr(*phase, up_sat.of(*phase));
        if kr == 0.0 {
            continue;
        }
        let mu = up_block.pvt.eval(mu_prop(*phase), p_up);
        let dmu = up_block.pvt.eval_dp(mu_prop(*phase), p_up);
        let k = config.flux_unit_constant * t_ab * kr * dt;
        flux[idx] = k * dpot / mu;
        let dinvmu = -dmu / (mu * mu);
        d_dpa[idx] = k * ((-1.0 - dgrav_dpa) / mu + if b_upstream { 0.0 } else { dpot * dinvmu });
        d_dpb[idx] = k * ((1.0 - dgrav_dpb) / mu + if b_upstream { dpot * dinvmu } else { 0.0 });
    }
    (flux, d_dpa, d_dpb)
}

/// Everything frozen for one implicit time step: target cumulatives, lagged
/// saturations, accumulated fluxes, and the aquifer split into a frozen part
/// plus the current-step coefficient.
pub struct StepProblem<'a> {
    pub network: &'a ReservoirNetwork,
    pub config: &'a SolverConfig,
    pub dt: f64,
    pub cums: Vec<Cumulatives>,
    pub lag_sats: Vec<Saturations>,
    /// Cumulative phase flux per connection up to the previous step, signed
    /// into `connection.i`.
    pub frozen_flux: Vec<[f64; 3]>,
    /// Per block: aquifer influx from past steps, decayed to the new time.
    pub aquifer_frozen: Vec<f64>,
    /// Per block: current-step influx coefficient (dW_e = coeff * drawdown).
    pub aquifer_coeff: Vec<f64>,
}

impl<'a> StepProblem<'a> {
    /// Aquifer influx at the new time level as a function of the iterate
    /// pressure: only the current-step summand depends on it.
    pub fn w_e(&self, b: usize, p: f64) -> f64 {
        self.aquifer_frozen[b] + self.aquifer_coeff[b] * (self.network.block(b).p_init - p)
    }

    pub fn dwe_dp(&self, b: usize) -> f64 {
        -self.aquifer_coeff[b]
    }

    /// Current-step fluxes of every connection at the iterate pressures,
    /// each with pressure derivatives (into `connection.i`).
    fn connection_fluxes(&self, pressures: &[f64]) -> Vec<([f64; 3], [f64; 3], [f64; 3])> {
        self.network
            .connections()
            .iter()
            .map(|c| {
                phase_fluxes(
                    self.network.block(c.i),
                    self.network.block(c.j),
                    c.t_ij,
                    self.dt,
                    &self.lag_sats[c.i],
                    &self.lag_sats[c.j],
                    pressures[c.i],
                    pressures[c.j],
                    self.config,
                )
            })
            .collect()
    }

    pub fn residual(&self, pressures: &[f64]) -> Result<DVector<f64>> {
        let n = self.network.n_blocks();
        let mut r = DVector::zeros(n);
        for b in 0..n {
            let block = self.network.block(b);
            r[b] = residual_local(block, pressures[b], &self.cums[b], self.w_e(b, pressures[b]))?;
        }
        for (c, conn) in self.network.connections().iter().enumerate() {
            let (flux, _, _) = phase_fluxes(
                self.network.block(conn.i),
                self.network.block(conn.j),
                conn.t_ij,
                self.dt,
                &self.lag_sats[conn.i],
                &self.lag_sats[conn.j],
                pressures[conn.i],
                pressures[conn.j],
                self.config,
            );
            for ph in 0..3 {
                let total = self.frozen_flux[c][ph] + flux[ph];
                r[conn.i] += total;
                r[conn.j] -= total;
            }
        }
        Ok(r)
    }

    /// Non-local residual of one block alone (frozen history plus the
    /// current implicit step), for diagnostics and tests.
    pub fn residual_nonlocal(&self, b: usize, pressures: &[f64]) -> f64 {
        let mut total = 0.0;
        for &(c, _) in self.network.incident(b) {
            let conn = &self.network.connections()[c];
            let (flux, _, _) = phase_fluxes(
                self.network.block(conn.i),
                self.network.block(conn.j),
                conn.t_ij,
                self.dt,
                &self.lag_sats[conn.i],
                &self.lag_sats[conn.j],
                pressures[conn.i],
                pressures[conn.j],
                self.config,
            );
            let sign = if conn.i == b { 1.0 } else { -1.0 };
            for ph in 0..3 {
                total += sign * (self.frozen_flux[c][ph] + flux[ph]);
            }
        }
        total
    }

    pub fn jacobian(&self, pressures: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.network.n_blocks();
        let mut jac = DMatrix::zeros(n, n);
        for b in 0..n {
            let block = self.network.block(b);
            jac[(b, b)] = residual_local_dp(block, pressures[b], &self.cums[b], self.dwe_dp(b))?;
        }
        for (c, conn) in self.network.connections().iter().enumerate() {
            let _ = c;
            let (_, d_dpi, d_dpj) = phase_fluxes(
                self.network.block(conn.i),
                self.network.block(conn.j),
                conn.t_ij,
                self.dt,
                &self.lag_sats[conn.i],
                &self.lag_sats[conn.j],
                pressures[conn.i],
                pressures[conn.j],
                self.config,
            );
            for ph in 0..3 {
                jac[(conn.i, conn.i)] += d_dpi[ph];
                jac[(conn.i, conn.j)] += d_dpj[ph];
                jac[(conn.j, conn.j)] -= d_dpj[ph];
                jac[(conn.j, conn.i)] -= d_dpi[ph];
            }
        }
        Ok(jac)
    }
}

/// Evolving solver state between accepted steps.
#[derive(Debug, Clone)]
pub struct HistoryState {
    /// Completed schedule rows.
    pub step: usize,
    pub time: f64,
    pub pressures: Vec<f64>,
    pub saturations: Vec<Saturations>,
    pub w_e: Vec<f64>,
    /// Per block aquifer ledger: accepted step lengths and end pressures.
    pub aquifer_dts: Vec<Vec<f64>>,
    pub aquifer_ps: Vec<Vec<f64>>,
    /// Cumulative phase flux per connection, into `connection.i`, RB.
    pub flux_cum: Vec<[f64; 3]>,
}

impl HistoryState {
    pub fn initial(network: &ReservoirNetwork) -> Result<Self> {
        let n = network.n_blocks();
        let mut pressures = Vec::with_capacity(n);
        let mut sats = Vec::with_capacity(n);
        for block in network.blocks() {
            pressures.push(block.p_init);
            let v = phase_volumes(block, block.p_init, &Cumulatives::default(), 0.0)?;
            let (s, _) = saturations(&v)?;
            sats.push(s);
        }
        Ok(HistoryState {
            step: 0,
            time: 0.0,
            pressures,
            saturations: sats,
            w_e: vec![0.0; n],
            aquifer_dts: vec![Vec::new(); n],
            aquifer_ps: vec![Vec::new(); n],
            flux_cum: vec![[0.0; 3]; network.connections().len()],
        })
    }

    /// Builds the frozen step problem for advancing `dt` to the given
    /// cumulatives.
    pub fn step_problem<'a>(
        &self,
        network: &'a ReservoirNetwork,
        config: &'a SolverConfig,
        cums: Vec<Cumulatives>,
        dt: f64,
    ) -> StepProblem<'a> {
        let n = network.n_blocks();
        let mut frozen = vec![0.0; n];
        let mut coeff = vec![0.0; n];
        for b in 0..n {
            if let Some(aq) = &network.block(b).aquifer {
                let (f, c) = aquifer_frozen_split(aq, &self.aquifer_dts[b], &self.aquifer_ps[b], dt);
                frozen[b] = f;
                coeff[b] = c;
            }
        }
        StepProblem {
            network,
            config,
            dt,
            cums,
            lag_sats: self.saturations.clone(),
            frozen_flux: self.flux_cum.clone(),
            aquifer_frozen: frozen,
            aquifer_coeff: coeff,
        }
    }
}

/// Splits the closed-form influx at the new time into (frozen past part,
/// current-step coefficient).
pub(crate) fn aquifer_frozen_split(
    aq: &AquiferParams<f64>,
    dts: &[f64],
    ps: &[f64],
    dt_next: f64,
) -> (f64, f64) {
    let mut elapsed = dt_next;
    let mut frozen = 0.0;
    for k in (0..dts.len()).rev() {
        frozen += aq.influx_coeff(dts[k]) * aq.decay(elapsed) * (aq.p_init - ps[k]);
        elapsed += dts[k];
    }
    (frozen, aq.influx_coeff(dt_next))
}

/// Outcome of one Newton solve.
#[derive(Debug, Clone)]
pub struct StepSolution {
    pub pressures: Vec<f64>,
    /// Residual infinity norm at the start of each iteration (last entry is
    /// at the accepted pressures).
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
}

/// Damped Newton on the per-block pressure system for one time step.
pub fn solve_step(problem: &StepProblem, start: &[f64], step_index: usize) -> Result<StepSolution> {
    let config = problem.config;
    let mut p = DVector::from_column_slice(start);
    let mut norms = Vec::new();
    let mut last_dp = f64::INFINITY;
    for it in 0..config.max_newton_iters {
        let r = problem.residual(p.as_slice())?;
        let rn = r.amax();
        norms.push(rn);
        if rn < config.newton_tol_residual && (it == 0 || last_dp < config.newton_tol_update) {
            return Ok(StepSolution {
                pressures: p.as_slice().to_vec(),
                residual_norms: norms,
                iterations: it,
            });
        }
        let jac = problem.jacobian(p.as_slice())?;
        let lu = jac.lu();
        let mut delta = lu.solve(&(-&r)).ok_or_else(|| {
            Error::SingularSystem(format!("history Jacobian at step {step_index}"))
        })?;
        delta *= config.damping;
        for d in delta.iter_mut() {
            *d = d.clamp(-config.max_pressure_step, config.max_pressure_step);
        }
        p += &delta;
        last_dp = delta.amax();
    }
    let final_norm = norms.last().copied().unwrap_or(f64::NAN);
    Err(Error::NonConvergence {
        step: step_index,
        detail: format!(
            "residual norm {final_norm:.3e} after {} iterations (last |dp| {last_dp:.3e}, iterate {:?})",
            config.max_newton_iters,
            p.as_slice()
        ),
    })
}

/// Full time series produced by a history run.
#[derive(Debug, Clone)]
pub struct HistoryRun {
    pub times: Vec<f64>,
    /// `[step][block]`.
    pub pressures: Vec<Vec<f64>>,
    pub saturations: Vec<Vec<Saturations>>,
    pub w_e: Vec<Vec<f64>>,
    /// `[step][connection][phase]`: flux over the step into `connection.i`.
    pub step_fluxes: Vec<Vec<[f64; 3]>>,
    /// `[step][block]`: residual at the accepted pressures.
    pub residuals: Vec<Vec<f64>>,
    pub newton_iters: Vec<usize>,
    pub final_state: HistoryState,
}

/// Sequential march over the whole schedule.
pub fn run_history(
    network: &ReservoirNetwork,
    schedule: &HistorySchedule,
    config: &SolverConfig,
) -> Result<HistoryRun> {
    config.validate()?;
    schedule.validate(network.n_blocks())?;
    network.check_solvable()?;

    let n = network.n_blocks();
    let mut state = HistoryState::initial(network)?;
    let mut run = HistoryRun {
        times: Vec::new(),
        pressures: Vec::new(),
        saturations: Vec::new(),
        w_e: Vec::new(),
        step_fluxes: Vec::new(),
        residuals: Vec::new(),
        newton_iters: Vec::new(),
        final_state: state.clone(),
    };

    for (row, &t) in schedule.times.iter().enumerate() {
        let dt = t - state.time;
        let cums: Vec<Cumulatives> = (0..n).map(|b| schedule.cumulatives(b, row)).collect();
        if dt == 0.0 {
            // A t=0 row can only restate the initial condition.
            if cums.iter().any(|c| *c != Cumulatives::default()) {
                return Err(Error::invalid(
                    "schedule row at t=0 must have zero cumulatives",
                ));
            }
            run.times.push(t);
            run.pressures.push(state.pressures.clone());
            run.saturations.push(state.saturations.clone());
            run.w_e.push(state.w_e.clone());
            run.step_fluxes.push(vec![[0.0; 3]; network.connections().len()]);
            run.residuals.push(vec![0.0; n]);
            run.newton_iters.push(0);
            continue;
        }
        let problem = state.step_problem(network, config, cums, dt);
        let sol = solve_step(&problem, &state.pressures, row)?;
        advance_state(&mut state, network, &problem, &sol.pressures, t, row)?;

        let step_flux = problem
            .connection_fluxes(&state.pressures)
            .into_iter()
            .map(|(f, _, _)| f)
            .collect::<Vec<_>>();
        let resid = problem.residual(&state.pressures)?;

        run.times.push(t);
        run.pressures.push(state.pressures.clone());
        run.saturations.push(state.saturations.clone());
        run.w_e.push(state.w_e.clone());
        run.step_fluxes.push(step_flux);
        run.residuals.push(resid.as_slice().to_vec());
        run.newton_iters.push(sol.iterations);
    }
    run.final_state = state;
    Ok(run)
}

/// Commits an accepted step: flux ledger, aquifer ledger, saturations.
fn advance_state(
    state: &mut HistoryState,
    network: &ReservoirNetwork,
    problem: &StepProblem,
    new_pressures: &[f64],
    t: f64,
    row: usize,
) -> Result<()> {
    for (c, (flux, _, _)) in problem.connection_fluxes(new_pressures).into_iter().enumerate() {
        for ph in 0..3 {
            state.flux_cum[c][ph] += flux[ph];
        }
    }
    for b in 0..network.n_blocks() {
        state.w_e[b] = problem.w_e(b, new_pressures[b]);
        if network.block(b).aquifer.is_some() {
            state.aquifer_dts[b].push(problem.dt);
            state.aquifer_ps[b].push(new_pressures[b]);
        }
        let vols = phase_volumes(
            network.block(b),
            new_pressures[b],
            &problem.cums[b],
            state.w_e[b],
        )?;
        let (sats, clamped) = saturations(&vols)?;
        if clamped {
            log::warn!(
                "step {row}: block {} phase volume clamped to zero in saturation update",
                network.block(b).id
            );
        }
        state.saturations[b] = sats;
    }
    state.pressures = new_pressures.to_vec();
    state.time = t;
    state.step += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::test_fixtures::{linear_relperm, rich_pvt};
    use crate::reservoir::{BlockHistory, Connection};
    use crate::pvt::{PvtColumns, PvtTable};
    use std::sync::Arc;

    fn simple_block(id: usize, aquifer: Option<AquiferParams<f64>>) -> Block {
        Block::new(
            id, 5.0e7, 1.0e10, 0.2, 4.0e-6, 3.0e-6, 4500.0, 0.0,
            rich_pvt(), linear_relperm(), aquifer,
        )
        .unwrap()
    }

    fn two_block_network(t_ij: f64) -> ReservoirNetwork {
        ReservoirNetwork::new(
            vec![simple_block(1, None), simple_block(2, None)],
            vec![Connection { i: 0, j: 1, t_ij }],
            1.0e5,
        )
        .unwrap()
    }

    fn flat_schedule(n_blocks: usize, times: Vec<f64>) -> HistorySchedule {
        let nt = times.len();
        HistorySchedule {
            times,
            blocks: (0..n_blocks)
                .map(|_| BlockHistory {
                    np: vec![0.0; nt],
                    gp: vec![0.0; nt],
                    wp: vec![0.0; nt],
                    ginj: vec![0.0; nt],
                    winj: vec![0.0; nt],
                    pobs: None,
                })
                .collect(),
        }
    }

    #[test]
    fn local_residual_zero_at_initial_equilibrium() {
        let b = simple_block(1, None);
        let r = residual_local(&b, b.p_init, &Cumulatives::default(), 0.0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn local_residual_decreases_with_np() {
        let b = simple_block(1, None);
        let p = 4200.0;
        let r1 = residual_local(&b, p, &Cumulatives { np: 1.0e5, ..Default::default() }, 0.0).unwrap();
        let r2 = residual_local(&b, p, &Cumulatives { np: 2.0e5, ..Default::default() }, 0.0).unwrap();
        assert!(r2 < r1);
    }

    #[test]
    fn local_derivative_matches_finite_difference() {
        let b = simple_block(1, Some(AquiferParams::new(2.0e8, 100.0, 4500.0).unwrap()));
        let cum = Cumulatives { np: 3.0e5, gp: 2.0e8, wp: 5.0e4, ginj: 1.0e8, winj: 2.0e4 };
        // aquifer sensitivity folded in via a fixed coefficient
        let coeff = b.aquifer.as_ref().unwrap().influx_coeff(30.0);
        let we = |p: f64| coeff * (4500.0 - p);
        let h = 1e-3;
        for &p in &[4400.0, 4100.0, 3700.0] {
            let fd = (residual_local(&b, p + h, &cum, we(p + h)).unwrap()
                - residual_local(&b, p - h, &cum, we(p - h)).unwrap())
                / (2.0 * h);
            let an = residual_local_dp(&b, p, &cum, -coeff).unwrap();
            assert!(
                ((fd - an) / an).abs() < 1e-7,
                "p={p}: fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn nonlocal_zero_for_disconnected_and_equal_blocks() {
        let net = two_block_network(0.0);
        let state = HistoryState::initial(&net).unwrap();
        let config = SolverConfig::default();
        let problem = state.step_problem(&net, &config, vec![Cumulatives::default(); 2], 30.0);
        assert_eq!(problem.residual_nonlocal(0, &[4500.0, 4500.0]), 0.0);

        // connected, but equal pressures and depths
        let net = two_block_network(5.0e4);
        let problem = HistoryState::initial(&net)
            .unwrap()
            .step_problem(&net, &config, vec![Cumulatives::default(); 2], 30.0);
        assert_eq!(problem.residual_nonlocal(0, &[4500.0, 4500.0]), 0.0);
    }

    #[test]
    fn nonlocal_antisymmetric_for_two_blocks() {
        let net = two_block_network(5.0e4);
        let config = SolverConfig::default();
        let problem = HistoryState::initial(&net)
            .unwrap()
            .step_problem(&net, &config, vec![Cumulatives::default(); 2], 30.0);
        let p = [4400.0, 4250.0];
        let r_i = problem.residual_nonlocal(0, &p);
        let r_j = problem.residual_nonlocal(1, &p);
        assert_eq!(r_i, -r_j);
        assert!(r_i != 0.0);
    }

    #[test]
    fn zero_production_step_keeps_pressures() {
        let net = two_block_network(5.0e4);
        let config = SolverConfig::default();
        let run = run_history(&net, &flat_schedule(2, vec![30.0, 60.0]), &config).unwrap();
        for step in &run.pressures {
            assert_eq!(step, &vec![4500.0, 4500.0]);
        }
        assert!(run.newton_iters.iter().all(|&it| it == 0));
    }

    /// Undersaturated single tank against the linearized-compressibility
    /// closed form.
    #[test]
    fn single_tank_matches_analytic_depletion() {
        let (net, schedule, oracle) = single_tank_case(100);
        let run = run_history(&net, &schedule, &SolverConfig::default()).unwrap();
        for (k, pressures) in run.pressures.iter().enumerate() {
            assert!(
                (pressures[0] - oracle[k]).abs() < 0.1,
                "step {k}: solver {} vs analytic {}",
                pressures[0],
                oracle[k]
            );
        }
    }

    /// Newton tail on the oracle problem contracts fast.
    #[test]
    fn newton_residual_tail_is_quadratic() {
        let (net, schedule, _) = single_tank_case(1);
        let config = SolverConfig::default();
        let state = HistoryState::initial(&net).unwrap();
        let cums = vec![schedule.cumulatives(0, 0)];
        let problem = state.step_problem(&net, &config, cums, schedule.times[0]);
        let sol = solve_step(&problem, &state.pressures, 0).unwrap();
        // Contraction into tolerance: compare the first sub-tolerance norm
        // with its predecessor (later entries sit at the rounding floor).
        let k = sol
            .residual_norms
            .iter()
            .position(|&r| r < config.newton_tol_residual)
            .expect("converged");
        assert!(k >= 1, "expected at least one Newton update");
        let ratio = sol.residual_norms[k] / sol.residual_norms[k - 1];
        assert!(ratio < 1e-2, "tail ratio {ratio} too slow");
    }

    /// Builds the undersaturated oracle problem: Rv = 0, Rs constant, exactly
    /// linear Bo, produced gas at solution GOR.
    pub(crate) fn single_tank_case(
        n_steps: usize,
    ) -> (ReservoirNetwork, HistorySchedule, Vec<f64>) {
        let p_i = 4500.0;
        let b_oi = 1.3;
        let c_o = 1.0e-5;
        let rs = 600.0;
        let pvt = Arc::new(
            PvtTable::new(PvtColumns {
                pressure: vec![1000.0, p_i],
                bo: vec![b_oi * (1.0 + c_o * (p_i - 1000.0)), b_oi],
                bg: vec![1.0e-3, 1.0e-3],
                bw: vec![1.02, 1.02],
                rs: vec![rs, rs],
                rv: vec![0.0, 0.0],
                muo: vec![1.1, 1.1],
                mug: vec![0.02, 0.02],
                muw: vec![0.5, 0.5],
                rhoo: vec![46.0, 46.0],
                rhog: vec![8.0, 8.0],
                rhow: vec![62.5, 62.5],
            })
            .unwrap(),
        );
        let n_foi = 5.0e7;
        let block = Block::new(
            1, n_foi, 0.0, 0.2, 4.0e-6, 3.0e-6, p_i, 0.0,
            pvt, linear_relperm(), None,
        )
        .unwrap();
        let c_e = block.rock_water_expansion();
        let net = ReservoirNetwork::new(vec![block], vec![], 1.0).unwrap();

        let mut times = Vec::new();
        let mut np = Vec::new();
        let mut gp = Vec::new();
        let mut oracle = Vec::new();
        for k in 1..=n_steps {
            let t = 30.0 * k as f64;
            let n_p = 1.0e6 * (k as f64) / (n_steps as f64);
            times.push(t);
            np.push(n_p);
            gp.push(rs * n_p);
            let dp = n_p / (n_foi * (c_o + c_e) - n_p * c_o);
            oracle.push(p_i - dp);
        }
        let nt = times.len();
        let schedule = HistorySchedule {
            times,
            blocks: vec![BlockHistory {
                np,
                gp,
                wp: vec![0.0; nt],
                ginj: vec![0.0; nt],
                winj: vec![0.0; nt],
                pobs: None,
            }],
        };
        (net, schedule, oracle)
    }

    #[test]
    fn equal_blocks_stay_symmetric() {
        let net = two_block_network(5.0e4);
        let mut schedule = flat_schedule(2, (1..=20).map(|k| 30.0 * k as f64).collect());
        for b in 0..2 {
            for (k, v) in schedule.blocks[b].np.iter_mut().enumerate() {
                *v = 2.0e4 * (k + 1) as f64;
            }
            for (k, v) in schedule.blocks[b].gp.iter_mut().enumerate() {
                *v = 0.18 * 4500.0 * 2.0e4 * (k + 1) as f64;
            }
        }
        let run = run_history(&net, &schedule, &SolverConfig::default()).unwrap();
        for step in &run.pressures {
            assert!(
                (step[0] - step[1]).abs() < 1e-9,
                "symmetry broken: {} vs {}",
                step[0],
                step[1]
            );
        }
        // pressures actually decline
        assert!(run.pressures.last().unwrap()[0] < 4500.0 - 1.0);
    }

    #[test]
    fn isolated_network_equals_independent_single_tanks() {
        let net = two_block_network(0.0);
        let mut schedule = flat_schedule(2, (1..=10).map(|k| 30.0 * k as f64).collect());
        for (k, v) in schedule.blocks[0].np.iter_mut().enumerate() {
            *v = 3.0e4 * (k + 1) as f64;
        }
        for (k, v) in schedule.blocks[1].np.iter_mut().enumerate() {
            *v = 1.0e4 * (k + 1) as f64;
        }
        let run = run_history(&net, &schedule, &SolverConfig::default()).unwrap();

        for b in 0..2 {
            let single = ReservoirNetwork::new(vec![simple_block(1, None)], vec![], 1.0).unwrap();
            let sched = HistorySchedule {
                times: schedule.times.clone(),
                blocks: vec![schedule.blocks[b].clone()],
            };
            let solo = run_history(&single, &sched, &SolverConfig::default()).unwrap();
            for (k, step) in solo.pressures.iter().enumerate() {
                let got = run.pressures[k][b];
                assert!(
                    (got - step[0]).abs() <= 1e-12 * step[0].abs(),
                    "block {b} step {k}: coupled {got} vs solo {}",
                    step[0]
                );
            }
        }
    }

    #[test]
    fn history_run_is_deterministic() {
        let net = two_block_network(3.0e4);
        let mut schedule = flat_schedule(2, (1..=15).map(|k| 30.0 * k as f64).collect());
        for (k, v) in schedule.blocks[0].np.iter_mut().enumerate() {
            *v = 4.0e4 * (k + 1) as f64;
        }
        let a = run_history(&net, &schedule, &SolverConfig::default()).unwrap();
        let b = run_history(&net, &schedule, &SolverConfig::default()).unwrap();
        assert_eq!(a.pressures, b.pressures);
        assert_eq!(a.step_fluxes, b.step_fluxes);
    }

    #[test]
    fn converged_steps_satisfy_the_balance() {
        let net = two_block_network(3.0e4);
        let mut schedule = flat_schedule(2, (1..=12).map(|k| 45.0 * k as f64).collect());
        for (k, v) in schedule.blocks[0].np.iter_mut().enumerate() {
            *v = 5.0e4 * (k + 1) as f64;
        }
        for (k, v) in schedule.blocks[1].winj.iter_mut().enumerate() {
            *v = 2.0e4 * (k + 1) as f64;
        }
        let config = SolverConfig::default();
        let run = run_history(&net, &schedule, &config).unwrap();
        for step in &run.residuals {
            for r in step {
                assert!(r.abs() < config.newton_tol_residual);
            }
        }
    }
}
