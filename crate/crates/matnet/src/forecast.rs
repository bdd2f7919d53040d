//! Predictive mode: solves per block and time step for pressure and the
//! three cumulative productions under flowing-bottomhole-pressure
//! constraints.
//!
//! Unknowns are block-ordered quadruples X = [(p, N_p, G_p, W_p)_1, ...],
//! which keeps the Jacobian dominantly block diagonal: the only couplings
//! outside the 4x4 diagonal blocks are material-balance (R1) rows against
//! the pressure columns of connected blocks.
//!
//! Closure equations per block:
//!   R1  general material balance (local + non-local), as in history mode
//!   R2  Vogel inflow: liquid increment vs drawdown
//!   R3  water cut: dW_p/dN_p pinned to the mobility ratio
//!   R4  gas/oil ratio: dG_p/dN_p pinned to R_s plus free-gas mobility

use crate::error::{Error, Result};
use crate::history::{
    aquifer_frozen_split, phase_fluxes, residual_local, residual_local_dp, HistoryState,
    SolverConfig,
};
use crate::relperm::Phase;
use crate::reservoir::{
    phase_volumes, saturations, Block, Connection, Cumulatives, ForecastSchedule,
    ReservoirNetwork, Saturations,
};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;

/// Mobility-ratio denominators are floored here to keep the water-cut and
/// GOR closures finite near residual oil.
pub const KRO_FLOOR: f64 = 1.0e-6;

/// Unknown ordering inside a block quadruple.
const P: usize = 0;
const NP: usize = 1;
const GP: usize = 2;
const WP: usize = 3;

/// Vogel inflow bracket 1 - 0.2 (pwf/p) - 0.8 (pwf/p)^2.
pub fn vogel_bracket(pwf: f64, p: f64) -> f64 {
    let r = pwf / p;
    1.0 - 0.2 * r - 0.8 * r * r
}

fn vogel_bracket_dp(pwf: f64, p: f64) -> f64 {
    0.2 * pwf / (p * p) + 1.6 * pwf * pwf / (p * p * p)
}

/// Marching state of a forecast run; constructed fresh or carried over from
/// the end of a history solve.
#[derive(Debug, Clone)]
pub struct ForecastState {
    pub time: f64,
    pub pressures: Vec<f64>,
    /// Cumulative totals per block (np/gp/wp continue the unknown history,
    /// ginj/winj follow the schedule).
    pub cums: Vec<Cumulatives>,
    pub saturations: Vec<Saturations>,
    pub w_e: Vec<f64>,
    pub aquifer_dts: Vec<Vec<f64>>,
    pub aquifer_ps: Vec<Vec<f64>>,
    pub flux_cum: Vec<[f64; 3]>,
}

impl ForecastState {
    /// Fresh start from initial reservoir conditions.
    pub fn initial(network: &ReservoirNetwork) -> Result<Self> {
        let h = HistoryState::initial(network)?;
        Ok(ForecastState::from_history(
            &h,
            vec![Cumulatives::default(); network.n_blocks()],
        ))
    }

    /// Continuation from a converged history state and its final schedule
    /// cumulatives.
    pub fn from_history(state: &HistoryState, cums: Vec<Cumulatives>) -> Self {
        ForecastState {
            time: state.time,
            pressures: state.pressures.clone(),
            cums,
            saturations: state.saturations.clone(),
            w_e: state.w_e.clone(),
            aquifer_dts: state.aquifer_dts.clone(),
            aquifer_ps: state.aquifer_ps.clone(),
            flux_cum: state.flux_cum.clone(),
        }
    }
}

/// Per-block operating controls over one step.
#[derive(Debug, Clone, Copy)]
pub struct StepControls {
    pub pwf: f64,
    pub qlmax: f64,
    pub nproducers: f64,
    /// Cumulative injection targets at the end of the step.
    pub ginj: f64,
    pub winj: f64,
}

/// Saturations at the iterate unknowns plus their chain-rule derivatives
/// w.r.t. (p, N_p, G_p, W_p). Clamped volumes carry zero derivative.
struct SatChain {
    sats: Saturations,
    /// `[phase][unknown]`, phases ordered oil/gas/water.
    d: [[f64; 4]; 3],
}

fn saturation_chain(
    block: &Block,
    p: f64,
    cum: &Cumulatives,
    w_e: f64,
    dwe_dp: f64,
) -> Result<SatChain> {
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
    let gas_rem = block.gas_in_place() - cum.gp;
    let oil_rem = block.oil_in_place() - cum.np;
    let g_fg = (gas_rem - oil_rem * v.rs) / denom;
    let n_fo = (oil_rem - gas_rem * v.rv) / denom;
    let dg_fg_dp =
        (-oil_rem * s.rs * denom - (gas_rem - oil_rem * v.rs) * d_denom) / (denom * denom);
    let dn_fo_dp =
        (-gas_rem * s.rv * denom - (oil_rem - gas_rem * v.rv) * d_denom) / (denom * denom);

    // Volumes and their derivatives, unknown order p/np/gp/wp.
    let vol_o = v.bo * n_fo;
    let d_o = [
        s.bo * n_fo + v.bo * dn_fo_dp,
        v.bo * (-1.0 / denom),
        v.bo * (v.rv / denom),
        0.0,
    ];
    let vol_g = v.bg * g_fg + cum.ginj * v.bg;
    let d_g = [
        s.bg * g_fg + v.bg * dg_fg_dp + cum.ginj * s.bg,
        v.bg * (v.rs / denom),
        v.bg * (-1.0 / denom),
        0.0,
    ];
    let vol_w = w_e - v.bw * cum.wp
        + v.bw * cum.winj
        + block.v_phi_i() * block.s_wi * (1.0 + block.c_w * (block.p_init - p));
    let d_w = [
        dwe_dp - s.bw * cum.wp + s.bw * cum.winj - block.v_phi_i() * block.s_wi * block.c_w,
        0.0,
        0.0,
        -v.bw,
    ];

    let mut vols = [vol_o, vol_g, vol_w];
    let mut derivs = [d_o, d_g, d_w];
    for ph in 0..3 {
        if vols[ph] < 0.0 {
            vols[ph] = 0.0;
            derivs[ph] = [0.0; 4];
        }
    }
    let total: f64 = vols.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid(format!(
            "block {}: all phase volumes vanished at the forecast iterate",
            block.id
        )));
    }
    let d_total: [f64; 4] = std::array::from_fn(|u| derivs.iter().map(|d| d[u]).sum());
    let mut d = [[0.0; 4]; 3];
    for ph in 0..3 {
        for u in 0..4 {
            d[ph][u] = (derivs[ph][u] * total - vols[ph] * d_total[u]) / (total * total);
        }
    }
    Ok(SatChain {
        sats: Saturations {
            oil: vols[0] / total,
            gas: vols[1] / total,
            water: vols[2] / total,
        },
        d,
    })
}

/// Mobility ratio k_r(phase)/max(k_ro, floor) with its unknown derivatives.
fn mobility_ratio(block: &Block, chain: &SatChain, phase: Phase) -> (f64, [f64; 4]) {
    let so = chain.sats.oil;
    let sx = chain.sats.of(phase);
    let kro = block.relperm.kr(Phase::Oil, so);
    let kro_eff = kro.max(KRO_FLOOR);
    let dkro = if kro > KRO_FLOOR {
        block.relperm.kr_ds(Phase::Oil, so)
    } else {
        0.0
    };
    let krx = block.relperm.kr(phase, sx);
    let dkrx = block.relperm.kr_ds(phase, sx);
    let ratio = krx / kro_eff;
    let ph_idx = match phase {
        Phase::Oil => 0,
        Phase::Gas => 1,
        Phase::Water => 2,
    };
    let d = std::array::from_fn(|u| {
        (dkrx * chain.d[ph_idx][u] * kro_eff - krx * dkro * chain.d[0][u]) / (kro_eff * kro_eff)
    });
    (ratio, d)
}

/// One implicit forecast step with everything lagged/frozen built in.
pub struct ForecastStep<'a> {
    pub network: &'a ReservoirNetwork,
    pub config: &'a SolverConfig,
    pub dt: f64,
    /// Cumulative totals at the previous time level.
    pub prev: Vec<Cumulatives>,
    pub controls: Vec<StepControls>,
    pub lag_sats: Vec<Saturations>,
    pub frozen_flux: Vec<[f64; 3]>,
    pub aquifer_frozen: Vec<f64>,
    pub aquifer_coeff: Vec<f64>,
}

impl<'a> ForecastStep<'a> {
    pub fn new(
        state: &ForecastState,
        network: &'a ReservoirNetwork,
        config: &'a SolverConfig,
        controls: Vec<StepControls>,
        dt: f64,
    ) -> Self {
        let n = network.n_blocks();
        let mut frozen = vec![0.0; n];
        let mut coeff = vec![0.0; n];
        for b in 0..n {
            if let Some(aq) = &network.block(b).aquifer {
                let (f, c) =
                    aquifer_frozen_split(aq, &state.aquifer_dts[b], &state.aquifer_ps[b], dt);
                frozen[b] = f;
                coeff[b] = c;
            }
        }
        ForecastStep {
            network,
            config,
            dt,
            prev: state.cums.clone(),
            controls,
            lag_sats: state.saturations.clone(),
            frozen_flux: state.flux_cum.clone(),
            aquifer_frozen: frozen,
            aquifer_coeff: coeff,
        }
    }

    pub fn w_e(&self, b: usize, p: f64) -> f64 {
        self.aquifer_frozen[b] + self.aquifer_coeff[b] * (self.network.block(b).p_init - p)
    }

    fn cums_at(&self, b: usize, x: &[f64]) -> Cumulatives {
        Cumulatives {
            np: x[4 * b + NP],
            gp: x[4 * b + GP],
            wp: x[4 * b + WP],
            ginj: self.controls[b].ginj,
            winj: self.controls[b].winj,
        }
    }

    fn connection_flux(&self, conn: &Connection, x: &[f64]) -> ([f64; 3], [f64; 3], [f64; 3]) {
        phase_fluxes(
            self.network.block(conn.i),
            self.network.block(conn.j),
            conn.t_ij,
            self.dt,
            &self.lag_sats[conn.i],
            &self.lag_sats[conn.j],
            x[4 * conn.i + P],
            x[4 * conn.j + P],
            self.config,
        )
    }

    /// Material balance residual of one block at the iterate (R1).
    pub fn residual_r1(&self, b: usize, x: &[f64]) -> Result<f64> {
        let block = self.network.block(b);
        let p = x[4 * b + P];
        let mut r = residual_local(block, p, &self.cums_at(b, x), self.w_e(b, p))?;
        for &(c, _) in self.network.incident(b) {
            let conn = &self.network.connections()[c];
            let (flux, _, _) = self.connection_flux(conn, x);
            let sign = if conn.i == b { 1.0 } else { -1.0 };
            for ph in 0..3 {
                r += sign * (self.frozen_flux[c][ph] + flux[ph]);
            }
        }
        Ok(r)
    }

    /// Vogel liquid-rate closure (R2), STB.
    pub fn residual_r2(&self, b: usize, x: &[f64]) -> f64 {
        let ctl = &self.controls[b];
        let p = x[4 * b + P];
        let dw = x[4 * b + WP] - self.prev[b].wp;
        let dn = x[4 * b + NP] - self.prev[b].np;
        dw + dn - vogel_bracket(ctl.pwf, p) * self.dt * ctl.qlmax * ctl.nproducers
    }

    /// Water/oil-ratio closure (R3), STB.
    pub fn residual_r3(&self, b: usize, x: &[f64]) -> Result<f64> {
        let block = self.network.block(b);
        let p = x[4 * b + P];
        let cum = self.cums_at(b, x);
        let chain = saturation_chain(block, p, &cum, self.w_e(b, p), -self.aquifer_coeff[b])?;
        let (ratio, _) = mobility_ratio(block, &chain, Phase::Water);
        let v = block.pvt.values(p);
        let wor = ratio * (v.muo * v.bo) / (v.muw * v.bw);
        Ok(wor * (x[4 * b + NP] - self.prev[b].np) - (x[4 * b + WP] - self.prev[b].wp))
    }

    /// Gas/oil-ratio closure (R4), scf.
    pub fn residual_r4(&self, b: usize, x: &[f64]) -> Result<f64> {
        let block = self.network.block(b);
        let p = x[4 * b + P];
        let cum = self.cums_at(b, x);
        let chain = saturation_chain(block, p, &cum, self.w_e(b, p), -self.aquifer_coeff[b])?;
        let (ratio, _) = mobility_ratio(block, &chain, Phase::Gas);
        let v = block.pvt.values(p);
        let gor = v.rs + ratio * (v.muo * v.bo) / (v.mug * v.bg);
        Ok(gor * (x[4 * b + NP] - self.prev[b].np) - (x[4 * b + GP] - self.prev[b].gp))
    }

    pub fn residual(&self, x: &[f64]) -> Result<DVector<f64>> {
        let n = self.network.n_blocks();
        let mut r = DVector::zeros(4 * n);
        for b in 0..n {
            let block = self.network.block(b);
            let p = x[4 * b + P];
            r[4 * b] = residual_local(block, p, &self.cums_at(b, x), self.w_e(b, p))?;
            r[4 * b + 1] = self.residual_r2(b, x);
            r[4 * b + 2] = self.residual_r3(b, x)?;
            r[4 * b + 3] = self.residual_r4(b, x)?;
        }
        for (c, conn) in self.network.connections().iter().enumerate() {
            let (flux, _, _) = self.connection_flux(conn, x);
            for ph in 0..3 {
                let total = self.frozen_flux[c][ph] + flux[ph];
                r[4 * conn.i] += total;
                r[4 * conn.j] -= total;
            }
        }
        Ok(r)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.network.n_blocks();
        let mut jac = DMatrix::zeros(4 * n, 4 * n);
        for b in 0..n {
            let block = self.network.block(b);
            let ctl = &self.controls[b];
            let p = x[4 * b + P];
            let cum = self.cums_at(b, x);
            let v = block.pvt.values(p);
            let s = block.pvt.slopes(p);
            let denom = 1.0 - v.rs * v.rv;
            let dwe = -self.aquifer_coeff[b];
            let dn = x[4 * b + NP] - self.prev[b].np;

            // R1 row; the non-local pressure couplings fold in below.
            jac[(4 * b, 4 * b + P)] = residual_local_dp(block, p, &cum, dwe)?;
            jac[(4 * b, 4 * b + NP)] = -(v.bo - v.rs * v.bg) / denom;
            jac[(4 * b, 4 * b + GP)] = -(v.bg - v.rv * v.bo) / denom;
            jac[(4 * b, 4 * b + WP)] = -v.bw;

            // R2 row.
            jac[(4 * b + 1, 4 * b + P)] =
                -self.dt * ctl.qlmax * ctl.nproducers * vogel_bracket_dp(ctl.pwf, p);
            jac[(4 * b + 1, 4 * b + NP)] = 1.0;
            jac[(4 * b + 1, 4 * b + WP)] = 1.0;

            // R3/R4 rows share the saturation chain.
            let chain = saturation_chain(block, p, &cum, self.w_e(b, p), dwe)?;
            let (wratio, dwratio) = mobility_ratio(block, &chain, Phase::Water);
            let wfrac = (v.muo * v.bo) / (v.muw * v.bw);
            let dwfrac_dp = ((s.muo * v.bo + v.muo * s.bo) * (v.muw * v.bw)
                - (v.muo * v.bo) * (s.muw * v.bw + v.muw * s.bw))
                / (v.muw * v.bw * v.muw * v.bw);
            let wor = wratio * wfrac;
            for u in 0..4 {
                let mut dwor = dwratio[u] * wfrac;
                if u == P {
                    dwor += wratio * dwfrac_dp;
                }
                jac[(4 * b + 2, 4 * b + u)] = dwor * dn;
            }
            jac[(4 * b + 2, 4 * b + NP)] += wor;
            jac[(4 * b + 2, 4 * b + WP)] += -1.0;

            let (gratio, dgratio) = mobility_ratio(block, &chain, Phase::Gas);
            let gfrac = (v.muo * v.bo) / (v.mug * v.bg);
            let dgfrac_dp = ((s.muo * v.bo + v.muo * s.bo) * (v.mug * v.bg)
                - (v.muo * v.bo) * (s.mug * v.bg + v.mug * s.bg))
                / (v.mug * v.bg * v.mug * v.bg);
            let gor = v.rs + gratio * gfrac;
            for u in 0..4 {
                let mut dgor = dgratio[u] * gfrac;
                if u == P {
                    dgor += s.rs + gratio * dgfrac_dp;
                }
                jac[(4 * b + 3, 4 * b + u)] = dgor * dn;
            }
            jac[(4 * b + 3, 4 * b + NP)] += gor;
            jac[(4 * b + 3, 4 * b + GP)] += -1.0;
        }
        for conn in self.network.connections() {
            let (_, d_dpi, d_dpj) = self.connection_flux(conn, x);
            for ph in 0..3 {
                jac[(4 * conn.i, 4 * conn.i + P)] += d_dpi[ph];
                jac[(4 * conn.i, 4 * conn.j + P)] += d_dpj[ph];
                jac[(4 * conn.j, 4 * conn.j + P)] -= d_dpj[ph];
                jac[(4 * conn.j, 4 * conn.i + P)] -= d_dpi[ph];
            }
        }
        Ok(jac)
    }

    /// Scaled residual norm: R1/R2/R3 in RB/STB as-is, R4 divided by the
    /// block's initial solution GOR so the gas closure weighs comparably.
    fn residual_norm(&self, r: &DVector<f64>) -> f64 {
        let mut norm: f64 = 0.0;
        for b in 0..self.network.n_blocks() {
            let r4_scale = self.network.block(b).r_si().max(1.0);
            norm = norm
                .max(r[4 * b].abs())
                .max(r[4 * b + 1].abs())
                .max(r[4 * b + 2].abs())
                .max(r[4 * b + 3].abs() / r4_scale);
        }
        norm
    }
}

/// Structural nonzero pattern of the forecast Jacobian: full 4x4 diagonal
/// blocks plus R1-row entries at connected blocks' pressure columns.
pub fn forecast_jacobian_pattern(network: &ReservoirNetwork) -> BTreeSet<(usize, usize)> {
    let mut pat = BTreeSet::new();
    for b in 0..network.n_blocks() {
        for r in 0..4 {
            for c in 0..4 {
                pat.insert((4 * b + r, 4 * b + c));
            }
        }
    }
    for conn in network.connections() {
        pat.insert((4 * conn.i, 4 * conn.j + P));
        pat.insert((4 * conn.j, 4 * conn.i + P));
    }
    pat
}

/// Outcome of one converged forecast solve.
#[derive(Debug, Clone)]
pub struct ForecastStepSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Blocks whose iterate pressure fell to or below the pwf constraint.
    pub drive_loss: Vec<usize>,
}

/// Damped Newton on the 4N system. Columns are scaled by block OOIP/OGIP
/// before the solve; rows are equilibrated by their max modulus.
pub fn solve_forecast_step(
    step: &ForecastStep,
    start: &[f64],
    step_index: usize,
) -> Result<ForecastStepSolution> {
    let config = step.config;
    let n = step.network.n_blocks();
    let dim = 4 * n;
    let col_scale: Vec<f64> = (0..dim)
        .map(|c| {
            let block = step.network.block(c / 4);
            match c % 4 {
                P => 1.0,
                GP => block.gas_in_place().max(1.0),
                _ => block.n_foi.max(1.0),
            }
        })
        .collect();

    let mut x = DVector::from_column_slice(start);
    let mut last_dp = f64::INFINITY;
    for it in 0..config.max_newton_iters {
        for b in 0..n {
            if x[4 * b + P] <= 0.0 {
                return Err(Error::NonConvergence {
                    step: step_index,
                    detail: format!("iterate pressure of block {b} went non-positive"),
                });
            }
        }
        let r = step.residual(x.as_slice())?;
        let rn = step.residual_norm(&r);
        if rn < config.newton_tol_residual && (it == 0 || last_dp < config.newton_tol_update) {
            let drive_loss = (0..n)
                .filter(|&b| {
                    x[4 * b + P] <= step.controls[b].pwf && step.controls[b].nproducers > 0.0
                })
                .collect();
            return Ok(ForecastStepSolution {
                x: x.as_slice().to_vec(),
                iterations: it,
                drive_loss,
            });
        }
        let mut jac = step.jacobian(x.as_slice())?;
        let mut rhs = -r;
        for (row, mut jrow) in jac.row_iter_mut().enumerate() {
            for (c, v) in jrow.iter_mut().enumerate() {
                *v *= col_scale[c];
            }
            let m = jrow.amax();
            if m > 0.0 {
                jrow /= m;
                rhs[row] /= m;
            }
        }
        let lu = jac.lu();
        let delta_scaled = lu
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem(format!("forecast Jacobian at step {step_index}")))?;
        let mut dp_norm: f64 = 0.0;
        for c in 0..dim {
            let mut d = config.damping * delta_scaled[c] * col_scale[c];
            if c % 4 == P {
                d = d.clamp(-config.max_pressure_step, config.max_pressure_step);
                dp_norm = dp_norm.max(d.abs());
            }
            x[c] += d;
        }
        last_dp = dp_norm;
    }
    Err(Error::NonConvergence {
        step: step_index,
        detail: format!(
            "forecast Newton stalled after {} iterations",
            config.max_newton_iters
        ),
    })
}

/// Forecast time series aligned with the schedule rows.
#[derive(Debug, Clone)]
pub struct ForecastRun {
    pub times: Vec<f64>,
    /// `[step][block]`.
    pub pressures: Vec<Vec<f64>>,
    pub cums: Vec<Vec<Cumulatives>>,
    pub saturations: Vec<Vec<Saturations>>,
    pub w_e: Vec<Vec<f64>>,
    pub final_state: ForecastState,
}

/// Marches the forecast schedule. Nonconvergence or a cumulative-monotonicity
/// violation rejects the step and halves dt down to (row dt)/64.
pub fn run_forecast(
    network: &ReservoirNetwork,
    schedule: &ForecastSchedule,
    initial: ForecastState,
    config: &SolverConfig,
) -> Result<ForecastRun> {
    config.validate()?;
    schedule.validate(network.n_blocks())?;
    network.check_solvable()?;
    let n = network.n_blocks();
    let mut state = initial;
    let mut run = ForecastRun {
        times: Vec::new(),
        pressures: Vec::new(),
        cums: Vec::new(),
        saturations: Vec::new(),
        w_e: Vec::new(),
        final_state: state.clone(),
    };

    for (row, &t) in schedule.times.iter().enumerate() {
        let row_start = state.time;
        let row_dt = t - row_start;
        if row_dt <= 0.0 {
            return Err(Error::invalid(format!(
                "forecast schedule time {t} does not advance past state time {row_start}"
            )));
        }
        let inj_base: Vec<(f64, f64)> = state.cums.iter().map(|c| (c.ginj, c.winj)).collect();
        let min_dt = row_dt / 64.0;
        let mut dt_try = row_dt;
        while state.time < t - 1e-9 * t.max(1.0) {
            let dt = dt_try.min(t - state.time);
            let frac = ((state.time + dt) - row_start) / row_dt;
            let controls: Vec<StepControls> = (0..n)
                .map(|b| {
                    let f = &schedule.blocks[b];
                    StepControls {
                        pwf: f.pwf[row],
                        qlmax: f.qlmax[row],
                        nproducers: f.nproducers[row] as f64,
                        ginj: inj_base[b].0 + frac * (f.ginj[row] - inj_base[b].0),
                        winj: inj_base[b].1 + frac * (f.winj[row] - inj_base[b].1),
                    }
                })
                .collect();
            match try_substep(network, config, &state, controls, dt, row) {
                Ok(new_state) => state = new_state,
                Err(e @ Error::Invalid(_)) => return Err(e),
                Err(e) => {
                    dt_try *= 0.5;
                    if dt_try < min_dt {
                        return Err(Error::NonConvergence {
                            step: row,
                            detail: format!(
                                "forecast step rejected below dt floor {min_dt:.3e} days: {e}"
                            ),
                        });
                    }
                }
            }
        }
        run.times.push(t);
        run.pressures.push(state.pressures.clone());
        run.cums.push(state.cums.clone());
        run.saturations.push(state.saturations.clone());
        run.w_e.push(state.w_e.clone());
    }
    run.final_state = state;
    Ok(run)
}

/// Attempts one sub-step; returns the advanced state on success.
fn try_substep(
    network: &ReservoirNetwork,
    config: &SolverConfig,
    state: &ForecastState,
    controls: Vec<StepControls>,
    dt: f64,
    row: usize,
) -> Result<ForecastState> {
    let n = network.n_blocks();
    let step = ForecastStep::new(state, network, config, controls, dt);
    let mut x0 = Vec::with_capacity(4 * n);
    for b in 0..n {
        x0.push(state.pressures[b]);
        x0.push(state.cums[b].np);
        x0.push(state.cums[b].gp);
        x0.push(state.cums[b].wp);
    }
    let sol = solve_forecast_step(&step, &x0, row)?;

    // Enforce non-decreasing cumulatives; roundoff-level dips snap back.
    let mut x = sol.x.clone();
    for b in 0..n {
        for (u, prev) in [
            (NP, state.cums[b].np),
            (GP, state.cums[b].gp),
            (WP, state.cums[b].wp),
        ] {
            let scale = network.block(b).n_foi.max(1.0);
            let v = x[4 * b + u];
            if v < prev - 1e-12 * scale {
                return Err(Error::NonConvergence {
                    step: row,
                    detail: format!("cumulative unknown {u} of block {b} decreased ({v} < {prev})"),
                });
            }
            if v < prev {
                x[4 * b + u] = prev;
            }
        }
    }

    let mut new_state = state.clone();
    for (c, conn) in network.connections().iter().enumerate() {
        let (flux, _, _) = step.connection_flux(conn, &x);
        for ph in 0..3 {
            new_state.flux_cum[c][ph] += flux[ph];
        }
    }
    for b in 0..n {
        let p = x[4 * b + P];
        new_state.pressures[b] = p;
        new_state.cums[b] = Cumulatives {
            np: x[4 * b + NP],
            gp: x[4 * b + GP],
            wp: x[4 * b + WP],
            ginj: step.controls[b].ginj,
            winj: step.controls[b].winj,
        };
        new_state.w_e[b] = step.w_e(b, p);
        if network.block(b).aquifer.is_some() {
            new_state.aquifer_dts[b].push(dt);
            new_state.aquifer_ps[b].push(p);
        }
        let vols = phase_volumes(network.block(b), p, &new_state.cums[b], new_state.w_e[b])?;
        let (sats, _) = saturations(&vols)?;
        new_state.saturations[b] = sats;
    }
    new_state.time = state.time + dt;
    Ok(new_state)
}
