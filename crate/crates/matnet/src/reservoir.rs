//! Compartment network model: blocks, inter-block transmissibilities,
//! schedules, and the in-place/volume bookkeeping shared by the history and
//! forecast solvers.

use crate::aquifer::AquiferParams;
use crate::error::{Error, Result};
use crate::pvt::{PvtTable, PvtValues};
use crate::relperm::RelPermCurves;
use std::sync::Arc;

/// One reservoir compartment.
#[derive(Debug, Clone)]
pub struct Block {
    pub id: usize,
    /// Initial oil component in the oil phase, STB.
    pub n_foi: f64,
    /// Initial gas component in the gas phase, scf.
    pub g_fgi: f64,
    /// Initial water saturation, fraction.
    pub s_wi: f64,
    /// Formation compressibility, 1/psi.
    pub c_f: f64,
    /// Water compressibility, 1/psi.
    pub c_w: f64,
    /// Initial pressure, psia.
    pub p_init: f64,
    /// Datum depth, ft (positive downward).
    pub z: f64,
    pub pvt: Arc<PvtTable<f64>>,
    pub relperm: Arc<RelPermCurves<f64>>,
    pub aquifer: Option<AquiferParams<f64>>,
    // Cached initial-state PVT values.
    b_oi: f64,
    b_gi: f64,
    r_si: f64,
    r_vi: f64,
    v_phi_i: f64,
}

impl Block {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        n_foi: f64,
        g_fgi: f64,
        s_wi: f64,
        c_f: f64,
        c_w: f64,
        p_init: f64,
        z: f64,
        pvt: Arc<PvtTable<f64>>,
        relperm: Arc<RelPermCurves<f64>>,
        aquifer: Option<AquiferParams<f64>>,
    ) -> Result<Self> {
        if !(n_foi >= 0.0) || !(g_fgi >= 0.0) {
            return Err(Error::invalid(format!(
                "block {id}: initial fluids in place must be >= 0"
            )));
        }
        if !(0.0..1.0).contains(&s_wi) {
            return Err(Error::invalid(format!("block {id}: s_wi must be in [0,1)")));
        }
        if !(c_f >= 0.0) || !(c_w >= 0.0) {
            return Err(Error::invalid(format!(
                "block {id}: compressibilities must be >= 0"
            )));
        }
        if !(p_init > 0.0) {
            return Err(Error::invalid(format!("block {id}: p_init must be > 0")));
        }
        if !z.is_finite() {
            return Err(Error::invalid(format!("block {id}: datum depth must be finite")));
        }
        if let Some(aq) = &aquifer {
            if (aq.p_init - p_init).abs() > 1e-9 * p_init.max(1.0) {
                return Err(Error::invalid(format!(
                    "block {id}: aquifer p_init {} differs from block p_init {}",
                    aq.p_init, p_init
                )));
            }
        }
        let init = pvt.values(p_init);
        let v_phi_i = (n_foi * init.bo + g_fgi * init.bg) / (1.0 - s_wi);
        Ok(Block {
            id,
            n_foi,
            g_fgi,
            s_wi,
            c_f,
            c_w,
            p_init,
            z,
            pvt,
            relperm,
            aquifer,
            b_oi: init.bo,
            b_gi: init.bg,
            r_si: init.rs,
            r_vi: init.rv,
            v_phi_i,
        })
    }

    pub fn b_oi(&self) -> f64 {
        self.b_oi
    }
    pub fn b_gi(&self) -> f64 {
        self.b_gi
    }
    pub fn r_si(&self) -> f64 {
        self.r_si
    }
    pub fn r_vi(&self) -> f64 {
        self.r_vi
    }
    /// Initial pore volume V_phi_i = (N_foi B_oi + G_fgi B_gi) / (1 - S_wi).
    pub fn v_phi_i(&self) -> f64 {
        self.v_phi_i
    }
    /// Initial gas component in place: G = G_fgi + N_foi R_si.
    pub fn gas_in_place(&self) -> f64 {
        self.g_fgi + self.n_foi * self.r_si
    }
    /// Initial oil component in place: N = N_foi + G_fgi R_vi.
    pub fn oil_in_place(&self) -> f64 {
        self.n_foi + self.g_fgi * self.r_vi
    }
    /// Pore-volume compressibility factor (c_f + c_w S_wi) / (1 - S_wi),
    /// multiplying (N_foi B_oi + G_fgi B_gi) dP in the balance.
    pub fn rock_water_expansion(&self) -> f64 {
        (self.c_f + self.c_w * self.s_wi) / (1.0 - self.s_wi)
    }
}

/// Cumulative produced/injected volumes of one block at one time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cumulatives {
    /// Oil produced, STB.
    pub np: f64,
    /// Gas produced, scf.
    pub gp: f64,
    /// Water produced, STB.
    pub wp: f64,
    /// Gas injected, scf.
    pub ginj: f64,
    /// Water injected, STB.
    pub winj: f64,
}

/// Free-phase component volumes remaining in place.
#[derive(Debug, Clone, Copy)]
pub struct FreePhase {
    /// Gas component in the gas phase, scf.
    pub g_fg: f64,
    /// Oil component in the oil phase, STB.
    pub n_fo: f64,
}

/// Simultaneous solution of the two remaining-in-place balances:
///
///   G - G_p = G_fg + N_fo R_s
///   N - N_p = N_fo + G_fg R_v
///
/// Outputs may be transiently negative inside Newton; callers clamp where
/// physical bounds matter.
pub fn free_phase_components(block: &Block, p: f64, np: f64, gp: f64) -> Result<FreePhase> {
    let vals = block.pvt.values(p);
    free_phase_from_values(block, &vals, np, gp)
}

pub(crate) fn free_phase_from_values(
    block: &Block,
    vals: &PvtValues<f64>,
    np: f64,
    gp: f64,
) -> Result<FreePhase> {
    let denom = 1.0 - vals.rs * vals.rv;
    if denom <= 0.0 {
        return Err(Error::invalid(format!(
            "block {}: singular PVT denominator 1 - Rs*Rv = {denom}",
            block.id
        )));
    }
    let gas_remaining = block.gas_in_place() - gp;
    let oil_remaining = block.oil_in_place() - np;
    Ok(FreePhase {
        g_fg: (gas_remaining - oil_remaining * vals.rs) / denom,
        n_fo: (oil_remaining - gas_remaining * vals.rv) / denom,
    })
}

/// Phase volumes at reservoir conditions, RB.
#[derive(Debug, Clone, Copy)]
pub struct PhaseVolumes {
    pub oil: f64,
    pub gas: f64,
    pub water: f64,
}

/// Current phase volumes at reservoir conditions:
///
///   V_o = B_o (N_foi + G_fgi R_vi - G_fg R_v - N_p)
///   V_g = B_g (G_fgi + N_foi R_si - N_fo R_s - G_p) + G_inj B_ginj
///   V_w = W_e - B_w W_p + B_winj W_inj + V_phi_i S_wi (1 + c_w (p_i - p))
///
/// Injectant factors are table values at the current block pressure.
pub fn phase_volumes(block: &Block, p: f64, cum: &Cumulatives, w_e: f64) -> Result<PhaseVolumes> {
    let vals = block.pvt.values(p);
    let free = free_phase_from_values(block, &vals, cum.np, cum.gp)?;
    let dp = block.p_init - p;
    Ok(PhaseVolumes {
        oil: vals.bo * (block.oil_in_place() - free.g_fg * vals.rv - cum.np),
        gas: vals.bg * (block.gas_in_place() - free.n_fo * vals.rs - cum.gp) + cum.ginj * vals.bg,
        water: w_e - vals.bw * cum.wp
            + vals.bw * cum.winj
            + block.v_phi_i * block.s_wi * (1.0 + block.c_w * dp),
    })
}

/// Phase saturations, always in [0,1] and summing to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturations {
    pub oil: f64,
    pub gas: f64,
    pub water: f64,
}

impl Saturations {
    pub fn of(self, phase: crate::relperm::Phase) -> f64 {
        match phase {
            crate::relperm::Phase::Oil => self.oil,
            crate::relperm::Phase::Gas => self.gas,
            crate::relperm::Phase::Water => self.water,
        }
    }
}

/// Normalizes phase volumes into saturations. Negative transient volumes are
/// clamped to zero; the returned flag reports whether any clamping happened.
pub fn saturations(volumes: &PhaseVolumes) -> Result<(Saturations, bool)> {
    let vo = volumes.oil.max(0.0);
    let vg = volumes.gas.max(0.0);
    let vw = volumes.water.max(0.0);
    let clamped = vo != volumes.oil || vg != volumes.gas || vw != volumes.water;
    let total = vo + vg + vw;
    if total <= 0.0 {
        return Err(Error::invalid("degenerate block: all phase volumes are zero"));
    }
    Ok((
        Saturations {
            oil: vo / total,
            gas: vg / total,
            water: vw / total,
        },
        clamped,
    ))
}

/// Symmetric inter-block connection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Connection {
    pub i: usize,
    pub j: usize,
    /// Transmissibility, mD*ft.
    pub t_ij: f64,
}

/// The compartment network: blocks plus a symmetric transmissibility
/// adjacency. Immutable once built; solvers own their state separately.
#[derive(Debug, Clone)]
pub struct ReservoirNetwork {
    blocks: Vec<Block>,
    connections: Vec<Connection>,
    t_max: f64,
    /// Per block: (connection index, neighbor block index).
    incident: Vec<Vec<(usize, usize)>>,
}

impl ReservoirNetwork {
    pub fn new(blocks: Vec<Block>, connections: Vec<Connection>, t_max: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("network: needs at least one block"));
        }
        if !(t_max > 0.0) {
            return Err(Error::invalid("network: t_max must be > 0"));
        }
        let n = blocks.len();
        let mut seen = std::collections::BTreeSet::new();
        for c in &connections {
            if c.i >= n || c.j >= n {
                return Err(Error::invalid(format!(
                    "connection ({},{}): block index out of range",
                    c.i, c.j
                )));
            }
            if c.i == c.j {
                return Err(Error::invalid(format!("connection ({},{}): self-loop", c.i, c.j)));
            }
            if !(c.t_ij >= 0.0) || c.t_ij > t_max {
                return Err(Error::invalid(format!(
                    "connection ({},{}): t_ij {} outside [0, t_max={}]",
                    c.i, c.j, c.t_ij, t_max
                )));
            }
            let key = (c.i.min(c.j), c.i.max(c.j));
            if !seen.insert(key) {
                return Err(Error::invalid(format!(
                    "connection ({},{}): duplicate pair",
                    c.i, c.j
                )));
            }
        }
        let mut incident = vec![Vec::new(); n];
        for (ci, c) in connections.iter().enumerate() {
            incident[c.i].push((ci, c.j));
            incident[c.j].push((ci, c.i));
        }
        Ok(ReservoirNetwork {
            blocks,
            connections,
            t_max,
            incident,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &Block {
        &self.blocks[i]
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Connections incident to block `b` as (connection index, other block).
    pub fn incident(&self, b: usize) -> &[(usize, usize)] {
        &self.incident[b]
    }

    /// Symmetric transmissibility lookup; zero when not connected.
    pub fn transmissibility(&self, i: usize, j: usize) -> f64 {
        self.incident[i]
            .iter()
            .find(|(_, other)| *other == j)
            .map(|(ci, _)| self.connections[*ci].t_ij)
            .unwrap_or(0.0)
    }

    /// Rejects configurations that make the pressure system singular by
    /// construction: a block with no compressibility mechanism at all (flat
    /// PVT, zero rock/water compressibility, no aquifer, no connection).
    pub fn check_solvable(&self) -> Result<()> {
        for (b, block) in self.blocks.iter().enumerate() {
            if self.incident[b].is_empty()
                && block.aquifer.is_none()
                && block.c_f == 0.0
                && block.c_w == 0.0
                && pvt_is_flat(&block.pvt)
            {
                return Err(Error::invalid(format!(
                    "block {}: fully incompressible and isolated; pressure equation is singular",
                    block.id
                )));
            }
        }
        Ok(())
    }
}

fn pvt_is_flat(pvt: &PvtTable<f64>) -> bool {
    use crate::pvt::PvtProperty as P;
    for prop in [P::Bo, P::Bg, P::Bw, P::Rs, P::Rv] {
        let nodes = pvt.pressure_nodes();
        let first = pvt.eval(prop, nodes[0]);
        if nodes.iter().any(|&p| pvt.eval(prop, p) != first) {
            return false;
        }
    }
    true
}

/// Historical schedule: per-block cumulative production/injection series.
#[derive(Debug, Clone)]
pub struct HistorySchedule {
    pub times: Vec<f64>,
    /// Indexed `[block][step]`.
    pub blocks: Vec<BlockHistory>,
}

#[derive(Debug, Clone, Default)]
pub struct BlockHistory {
    pub np: Vec<f64>,
    pub gp: Vec<f64>,
    pub wp: Vec<f64>,
    pub ginj: Vec<f64>,
    pub winj: Vec<f64>,
    pub pobs: Option<Vec<f64>>,
}

impl HistorySchedule {
    pub fn validate(&self, n_blocks: usize) -> Result<()> {
        validate_times(&self.times)?;
        if self.blocks.len() != n_blocks {
            return Err(Error::invalid(format!(
                "history schedule covers {} blocks, network has {n_blocks}",
                self.blocks.len()
            )));
        }
        let nt = self.times.len();
        for (b, h) in self.blocks.iter().enumerate() {
            for (name, series) in [
                ("np", &h.np),
                ("gp", &h.gp),
                ("wp", &h.wp),
                ("ginj", &h.ginj),
                ("winj", &h.winj),
            ] {
                if series.len() != nt {
                    return Err(Error::invalid(format!(
                        "history schedule block {b}: `{name}` has {} rows, expected {nt}",
                        series.len()
                    )));
                }
                for w in series.windows(2) {
                    if w[1] < w[0] {
                        return Err(Error::invalid(format!(
                            "history schedule block {b}: cumulative `{name}` decreases"
                        )));
                    }
                }
                if series.first().is_some_and(|&v| v < 0.0) {
                    return Err(Error::invalid(format!(
                        "history schedule block {b}: cumulative `{name}` negative"
                    )));
                }
            }
            if let Some(pobs) = &h.pobs {
                if pobs.len() != nt {
                    return Err(Error::invalid(format!(
                        "history schedule block {b}: `pobs` has {} rows, expected {nt}",
                        pobs.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn cumulatives(&self, block: usize, step: usize) -> Cumulatives {
        let h = &self.blocks[block];
        Cumulatives {
            np: h.np[step],
            gp: h.gp[step],
            wp: h.wp[step],
            ginj: h.ginj[step],
            winj: h.winj[step],
        }
    }

    /// Truncates to the first `n_steps` schedule rows.
    pub fn truncated(&self, n_steps: usize) -> HistorySchedule {
        HistorySchedule {
            times: self.times[..n_steps].to_vec(),
            blocks: self
                .blocks
                .iter()
                .map(|h| BlockHistory {
                    np: h.np[..n_steps].to_vec(),
                    gp: h.gp[..n_steps].to_vec(),
                    wp: h.wp[..n_steps].to_vec(),
                    ginj: h.ginj[..n_steps].to_vec(),
                    winj: h.winj[..n_steps].to_vec(),
                    pobs: h.pobs.as_ref().map(|p| p[..n_steps].to_vec()),
                })
                .collect(),
        }
    }
}

/// Forecast schedule: operating constraints per block per step.
#[derive(Debug, Clone)]
pub struct ForecastSchedule {
    pub times: Vec<f64>,
    pub blocks: Vec<BlockForecast>,
}

#[derive(Debug, Clone, Default)]
pub struct BlockForecast {
    /// Flowing bottomhole pressure constraint, psia.
    pub pwf: Vec<f64>,
    /// Absolute open flow per producer, STB/D.
    pub qlmax: Vec<f64>,
    /// Active producer count.
    pub nproducers: Vec<u32>,
    /// Cumulative gas injected, scf.
    pub ginj: Vec<f64>,
    /// Cumulative water injected, STB.
    pub winj: Vec<f64>,
}

impl ForecastSchedule {
    pub fn validate(&self, n_blocks: usize) -> Result<()> {
        validate_times(&self.times)?;
        if self.blocks.len() != n_blocks {
            return Err(Error::invalid(format!(
                "forecast schedule covers {} blocks, network has {n_blocks}",
                self.blocks.len()
            )));
        }
        let nt = self.times.len();
        for (b, f) in self.blocks.iter().enumerate() {
            for (name, len) in [
                ("pwf", f.pwf.len()),
                ("qlmax", f.qlmax.len()),
                ("nproducers", f.nproducers.len()),
                ("ginj", f.ginj.len()),
                ("winj", f.winj.len()),
            ] {
                if len != nt {
                    return Err(Error::invalid(format!(
                        "forecast schedule block {b}: `{name}` has {len} rows, expected {nt}"
                    )));
                }
            }
            for (k, &p) in f.pwf.iter().enumerate() {
                if !(p >= 0.0) {
                    return Err(Error::invalid(format!(
                        "forecast schedule block {b} row {k}: pwf must be >= 0"
                    )));
                }
                if f.nproducers[k] > 0 && !(f.qlmax[k] > 0.0) {
                    return Err(Error::invalid(format!(
                        "forecast schedule block {b} row {k}: qlmax must be > 0 when producers are active"
                    )));
                }
            }
            for (name, series) in [("ginj", &f.ginj), ("winj", &f.winj)] {
                for w in series.windows(2) {
                    if w[1] < w[0] {
                        return Err(Error::invalid(format!(
                            "forecast schedule block {b}: cumulative `{name}` decreases"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("schedule: no time steps"));
    }
    if times[0] < 0.0 {
        return Err(Error::invalid("schedule: times must start at >= 0"));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid("schedule: times must be strictly increasing"));
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_fixtures {
    use super::*;
    use crate::pvt::PvtColumns;

    /// Mildly compressible three-phase table over 500..6000 psia.
    pub fn rich_pvt() -> Arc<PvtTable<f64>> {
        let mut pressure = Vec::new();
        let mut p = 500.0;
        while p <= 6000.0 + 1e-9 {
            pressure.push(p);
            p += 250.0;
        }
        let col = |f: &dyn Fn(f64) -> f64| pressure.iter().map(|&p| f(p)).collect::<Vec<_>>();
        Arc::new(
            PvtTable::new(PvtColumns {
                bo: col(&|p| 1.10 + 6.5e-5 * p),
                bg: col(&|p| 2.7 / p),
                bw: col(&|p| 1.03 - 2.0e-6 * p),
                rs: col(&|p| 0.18 * p),
                rv: col(&|p| 2.0e-8 * p),
                muo: col(&|p| 1.2 - 5.0e-5 * p),
                mug: col(&|p| 0.012 + 2.5e-6 * p),
                muw: col(&|p| 0.52 - 1.0e-6 * p),
                rhoo: col(&|p| 48.0 - 8.0e-4 * p),
                rhog: col(&|p| 0.5 + 2.8e-3 * p),
                rhow: col(&|p| 62.4 + 2.0e-4 * p),
                pressure,
            })
            .unwrap(),
        )
    }

    pub fn linear_relperm() -> Arc<RelPermCurves<f64>> {
        Arc::new(
            RelPermCurves::new(
                vec![0.0, 1.0],
                vec![0.0, 1.0],
                vec![0.0, 0.8],
                vec![0.0, 0.9],
            )
            .unwrap(),
        )
    }

    pub fn block(id: usize) -> Block {
        Block::new(
            id,
            1.0e6,
            5.0e8,
            0.2,
            4.0e-6,
            3.0e-6,
            4500.0,
            0.0,
            rich_pvt(),
            linear_relperm(),
            None,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_fixtures::*;
    use super::*;
    use crate::pvt::PvtColumns;

    /// Table with controllable Rs/Rv for the free-phase checks.
    fn table_rs_rv(rs: [f64; 2], rv: [f64; 2]) -> Arc<PvtTable<f64>> {
        Arc::new(
            PvtTable::new(PvtColumns {
                pressure: vec![1000.0, 5000.0],
                bo: vec![1.2, 1.3],
                bg: vec![2.0e-3, 8.0e-4],
                bw: vec![1.02, 1.01],
                rs: rs.to_vec(),
                rv: rv.to_vec(),
                muo: vec![1.3, 1.0],
                mug: vec![0.014, 0.022],
                muw: vec![0.5, 0.5],
                rhoo: vec![47.0, 44.0],
                rhog: vec![3.0, 12.0],
                rhow: vec![62.4, 62.9],
            })
            .unwrap(),
        )
    }

    fn block_with_pvt(pvt: Arc<PvtTable<f64>>, n_foi: f64, g_fgi: f64) -> Block {
        Block::new(
            1,
            n_foi,
            g_fgi,
            0.25,
            3.0e-6,
            3.0e-6,
            5000.0,
            0.0,
            pvt,
            linear_relperm(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn free_phase_no_dissolution_no_production() {
        let b = block_with_pvt(table_rs_rv([0.0, 0.0], [0.0, 0.0]), 1.0e6, 5.0e8);
        let f = free_phase_components(&b, 3000.0, 0.0, 0.0).unwrap();
        assert_eq!(f.g_fg, 5.0e8);
        assert_eq!(f.n_fo, 1.0e6);
    }

    #[test]
    fn free_phase_identity_at_initial_conditions() {
        // Rv = 0, Rs constant: evaluating at any pressure with zero
        // cumulatives returns the initial split.
        let b = block_with_pvt(table_rs_rv([500.0, 500.0], [0.0, 0.0]), 1.0e6, 5.0e8);
        let f = free_phase_components(&b, 2345.0, 0.0, 0.0).unwrap();
        assert!((f.g_fg - 5.0e8).abs() < 1e-6 * 5.0e8);
        assert!((f.n_fo - 1.0e6).abs() < 1e-6 * 1.0e6);
    }

    #[test]
    fn free_phase_satisfies_both_balances() {
        // Instance from the operation contract: verify by substitution.
        let pvt = table_rs_rv([500.0, 450.0], [1.0e-4, 8.0e-5]);
        let b = Block::new(
            1,
            1.0e6,
            5.0e8,
            0.25,
            3.0e-6,
            3.0e-6,
            1000.0, // r_si = 500, r_vi = 1e-4 at the first node
            0.0,
            pvt,
            linear_relperm(),
            None,
        )
        .unwrap();
        assert_eq!(b.r_si(), 500.0);
        assert_eq!(b.r_vi(), 1.0e-4);
        let p = 5000.0; // rs = 450, rv = 8e-5
        let (np, gp) = (1.0e5, 6.0e7);
        let f = free_phase_components(&b, p, np, gp).unwrap();
        let vals = b.pvt.values(p);
        let lhs_gas = f.g_fg + f.n_fo * vals.rs;
        let rhs_gas = b.gas_in_place() - gp;
        assert!((lhs_gas - rhs_gas).abs() / rhs_gas.abs() < 1e-9);
        let lhs_oil = f.n_fo + f.g_fg * vals.rv;
        let rhs_oil = b.oil_in_place() - np;
        assert!((lhs_oil - rhs_oil).abs() / rhs_oil.abs() < 1e-9);
    }

    #[test]
    fn phase_volumes_initial_state() {
        let b = block(1);
        let v = phase_volumes(&b, b.p_init, &Cumulatives::default(), 0.0).unwrap();
        assert!((v.oil - b.n_foi * b.b_oi()).abs() < 1e-6);
        assert!((v.gas - b.g_fgi * b.b_gi()).abs() < 1e-4);
        assert!((v.water - b.v_phi_i() * b.s_wi).abs() < 1e-6);
    }

    #[test]
    fn water_production_is_linear_in_wp() {
        let b = block(1);
        let base = phase_volumes(&b, b.p_init, &Cumulatives::default(), 0.0).unwrap();
        let wp = 1234.5;
        let with_wp = phase_volumes(
            &b,
            b.p_init,
            &Cumulatives {
                wp,
                ..Default::default()
            },
            0.0,
        )
        .unwrap();
        let bw = b.pvt.eval(crate::pvt::PvtProperty::Bw, b.p_init);
        assert!((base.water - with_wp.water - bw * wp).abs() < 1e-9);
        assert_eq!(base.oil, with_wp.oil);
        assert_eq!(base.gas, with_wp.gas);
    }

    #[test]
    fn saturation_examples() {
        let (s, clamped) = saturations(&PhaseVolumes {
            oil: 100.0,
            gas: 0.0,
            water: 100.0,
        })
        .unwrap();
        assert_eq!((s.oil, s.gas, s.water), (0.5, 0.0, 0.5));
        assert!(!clamped);

        let (s, _) = saturations(&PhaseVolumes {
            oil: 1.0,
            gas: 1.0,
            water: 1.0,
        })
        .unwrap();
        assert!((s.oil - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.oil + s.gas + s.water - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saturations_clamp_negative_volumes() {
        let (s, clamped) = saturations(&PhaseVolumes {
            oil: -5.0,
            gas: 10.0,
            water: 10.0,
        })
        .unwrap();
        assert!(clamped);
        assert_eq!(s.oil, 0.0);
        assert!((s.gas - 0.5).abs() < 1e-15);

        assert!(saturations(&PhaseVolumes {
            oil: 0.0,
            gas: 0.0,
            water: 0.0
        })
        .is_err());
    }

    #[test]
    fn transmissibility_is_symmetric() {
        let blocks = vec![block(1), block(2), block(3)];
        let net = ReservoirNetwork::new(
            blocks,
            vec![
                Connection {
                    i: 0,
                    j: 1,
                    t_ij: 100.0,
                },
                Connection {
                    i: 2,
                    j: 1,
                    t_ij: 55.0,
                },
            ],
            1000.0,
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(net.transmissibility(i, j), net.transmissibility(j, i));
            }
        }
        assert_eq!(net.transmissibility(0, 2), 0.0);
        assert_eq!(net.transmissibility(1, 2), 55.0);
    }

    #[test]
    fn network_rejects_bad_connections() {
        let mk = |conns: Vec<Connection>| {
            ReservoirNetwork::new(vec![block(1), block(2)], conns, 1000.0)
        };

        assert!(mk(vec![Connection {
            i: 0,
            j: 0,
            t_ij: 10.0
        }])
        .is_err());
        assert!(mk(vec![Connection {
            i: 0,
            j: 1,
            t_ij: 2000.0
        }])
        .is_err());
        assert!(mk(vec![
            Connection {
                i: 0,
                j: 1,
                t_ij: 10.0
            },
            Connection {
                i: 1,
                j: 0,
                t_ij: 20.0
            }
        ])
        .is_err());
    }

    #[test]
    fn schedule_validation_catches_decreasing_cumulatives() {
        let sched = HistorySchedule {
            times: vec![30.0, 60.0],
            blocks: vec![BlockHistory {
                np: vec![10.0, 5.0],
                gp: vec![0.0, 0.0],
                wp: vec![0.0, 0.0],
                ginj: vec![0.0, 0.0],
                winj: vec![0.0, 0.0],
                pobs: None,
            }],
        };
        assert!(sched.validate(1).is_err());
    }
}
