//! Tabulated relative permeability curves.
//!
//! Each phase curve is keyed to its own phase saturation: k_ro vs S_o,
//! k_rw vs S_w, k_rg vs S_g. The three curves share one saturation grid.

use crate::error::{Error, Result};
use crate::interp;
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Oil,
    Gas,
    Water,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Oil, Phase::Gas, Phase::Water];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Oil => "oil",
            Phase::Gas => "gas",
            Phase::Water => "water",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelPermCurves<T> {
    saturation_nodes: Vec<T>,
    k_ro: Vec<T>,
    k_rw: Vec<T>,
    k_rg: Vec<T>,
}

impl<T: Float> RelPermCurves<T> {
    pub fn new(saturation_nodes: Vec<T>, k_ro: Vec<T>, k_rw: Vec<T>, k_rg: Vec<T>) -> Result<Self> {
        interp::check_strictly_increasing(&saturation_nodes)
            .map_err(|e| Error::invalid(format!("relperm saturation nodes: {e}")))?;
        let n = saturation_nodes.len();
        if saturation_nodes[0] < T::zero() || saturation_nodes[n - 1] > T::one() {
            return Err(Error::invalid("relperm saturation nodes must lie in [0,1]"));
        }
        for (name, col) in [("kro", &k_ro), ("krw", &k_rw), ("krg", &k_rg)] {
            if col.len() != n {
                return Err(Error::invalid(format!(
                    "relperm column `{name}`: length {} does not match {} nodes",
                    col.len(),
                    n
                )));
            }
            for (i, &v) in col.iter().enumerate() {
                if !(v >= T::zero() && v <= T::one()) {
                    return Err(Error::invalid(format!(
                        "relperm column `{name}`: value outside [0,1] at row {i}"
                    )));
                }
            }
        }
        Ok(RelPermCurves {
            saturation_nodes,
            k_ro,
            k_rw,
            k_rg,
        })
    }

    fn column(&self, phase: Phase) -> &[T] {
        match phase {
            Phase::Oil => &self.k_ro,
            Phase::Water => &self.k_rw,
            Phase::Gas => &self.k_rg,
        }
    }

    pub fn saturation_nodes(&self) -> &[T] {
        &self.saturation_nodes
    }

    pub fn kr(&self, phase: Phase, s: T) -> T {
        interp::eval(&self.saturation_nodes, self.column(phase), s)
    }

    /// Saturation derivative of the phase curve at `s`.
    pub fn kr_ds(&self, phase: Phase, s: T) -> T {
        interp::slope(&self.saturation_nodes, self.column(phase), s)
    }
}
