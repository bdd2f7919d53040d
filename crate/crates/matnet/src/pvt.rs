//! Pressure-dependent fluid properties from tabulated data.
//!
//! All properties are piecewise-linear in pressure with clamped
//! extrapolation (Newton iterates may transiently overshoot the table).
//! Validation happens once at construction; evaluation never fails.

use crate::error::{Error, Result};
use crate::interp;
use num_traits::Float;
use std::fmt;
use std::str::FromStr;

/// Identifier of a tabulated property column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PvtProperty {
    /// Oil formation volume factor, RB/STB.
    Bo,
    /// Gas formation volume factor, RB/scf.
    Bg,
    /// Water formation volume factor, RB/STB.
    Bw,
    /// Solution-gas/oil ratio, scf/STB.
    Rs,
    /// Volatile-oil/gas ratio, STB/scf.
    Rv,
    /// Oil viscosity, cP.
    MuO,
    /// Gas viscosity, cP.
    MuG,
    /// Water viscosity, cP.
    MuW,
    /// Oil density, lbm/ft^3.
    RhoO,
    /// Gas density, lbm/ft^3.
    RhoG,
    /// Water density, lbm/ft^3.
    RhoW,
}

impl PvtProperty {
    pub const ALL: [PvtProperty; 11] = [
        PvtProperty::Bo,
        PvtProperty::Bg,
        PvtProperty::Bw,
        PvtProperty::Rs,
        PvtProperty::Rv,
        PvtProperty::MuO,
        PvtProperty::MuG,
        PvtProperty::MuW,
        PvtProperty::RhoO,
        PvtProperty::RhoG,
        PvtProperty::RhoW,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PvtProperty::Bo => "bo",
            PvtProperty::Bg => "bg",
            PvtProperty::Bw => "bw",
            PvtProperty::Rs => "rs",
            PvtProperty::Rv => "rv",
            PvtProperty::MuO => "muo",
            PvtProperty::MuG => "mug",
            PvtProperty::MuW => "muw",
            PvtProperty::RhoO => "rhoo",
            PvtProperty::RhoG => "rhog",
            PvtProperty::RhoW => "rhow",
        }
    }
}

impl fmt::Display for PvtProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PvtProperty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PvtProperty::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown PVT property id `{s}`")))
    }
}

/// Raw column data handed to [`PvtTable::new`].
#[derive(Debug, Clone)]
pub struct PvtColumns<T> {
    pub pressure: Vec<T>,
    pub bo: Vec<T>,
    pub bg: Vec<T>,
    pub bw: Vec<T>,
    pub rs: Vec<T>,
    pub rv: Vec<T>,
    pub muo: Vec<T>,
    pub mug: Vec<T>,
    pub muw: Vec<T>,
    pub rhoo: Vec<T>,
    pub rhog: Vec<T>,
    pub rhow: Vec<T>,
}

/// Validated, immutable fluid property table. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct PvtTable<T> {
    cols: PvtColumns<T>,
}

/// All property values at one pressure.
#[derive(Debug, Clone, Copy)]
pub struct PvtValues<T> {
    pub bo: T,
    pub bg: T,
    pub bw: T,
    pub rs: T,
    pub rv: T,
    pub muo: T,
    pub mug: T,
    pub muw: T,
    pub rhoo: T,
    pub rhog: T,
    pub rhow: T,
}

/// Pressure derivatives of all properties at one pressure.
#[derive(Debug, Clone, Copy)]
pub struct PvtSlopes<T> {
    pub bo: T,
    pub bg: T,
    pub bw: T,
    pub rs: T,
    pub rv: T,
    pub muo: T,
    pub mug: T,
    pub muw: T,
    pub rhoo: T,
    pub rhog: T,
    pub rhow: T,
}

impl<T: Float> PvtTable<T> {
    pub fn new(cols: PvtColumns<T>) -> Result<Self> {
        interp::check_strictly_increasing(&cols.pressure)
            .map_err(|e| Error::invalid(format!("pvt pressure nodes: {e}")))?;
        let n = cols.pressure.len();

        let positive: [(&str, &Vec<T>); 9] = [
            ("bo", &cols.bo),
            ("bg", &cols.bg),
            ("bw", &cols.bw),
            ("muo", &cols.muo),
            ("mug", &cols.mug),
            ("muw", &cols.muw),
            ("rhoo", &cols.rhoo),
            ("rhog", &cols.rhog),
            ("rhow", &cols.rhow),
        ];
        for (name, col) in positive {
            check_column(name, col, n, true)?;
        }
        check_column("rs", &cols.rs, n, false)?;
        check_column("rv", &cols.rv, n, false)?;

        // 1 - Rs*Rv must stay positive over the whole interpolated range, not
        // just at the nodes: with linear segments the product is quadratic,
        // so an interior extremum only exists when the slopes have opposite
        // signs.
        for i in 0..n - 1 {
            let guard = |p: T, q: T, at: &str| -> Result<()> {
                if T::one() - p * q <= T::zero() {
                    Err(Error::invalid(format!(
                        "pvt: 1 - rs*rv is non-positive {at} (segment {i})"
                    )))
                } else {
                    Ok(())
                }
            };
            guard(cols.rs[i], cols.rv[i], "at node")?;
            guard(cols.rs[i + 1], cols.rv[i + 1], "at node")?;
            let dx = cols.pressure[i + 1] - cols.pressure[i];
            let bs = (cols.rs[i + 1] - cols.rs[i]) / dx;
            let bv = (cols.rv[i + 1] - cols.rv[i]) / dx;
            if bs * bv < T::zero() {
                // product extremum of (a+bs*t)(c+bv*t) on t in (0, dx)
                let a = cols.rs[i];
                let c = cols.rv[i];
                let two = T::one() + T::one();
                let t_star = -(bs * c + bv * a) / (two * bs * bv);
                if t_star > T::zero() && t_star < dx {
                    guard(a + bs * t_star, c + bv * t_star, "inside segment")?;
                }
            }
        }
        Ok(PvtTable { cols })
    }

    fn column(&self, property: PvtProperty) -> &[T] {
        match property {
            PvtProperty::Bo => &self.cols.bo,
            PvtProperty::Bg => &self.cols.bg,
            PvtProperty::Bw => &self.cols.bw,
            PvtProperty::Rs => &self.cols.rs,
            PvtProperty::Rv => &self.cols.rv,
            PvtProperty::MuO => &self.cols.muo,
            PvtProperty::MuG => &self.cols.mug,
            PvtProperty::MuW => &self.cols.muw,
            PvtProperty::RhoO => &self.cols.rhoo,
            PvtProperty::RhoG => &self.cols.rhog,
            PvtProperty::RhoW => &self.cols.rhow,
        }
    }

    pub fn pressure_nodes(&self) -> &[T] {
        &self.cols.pressure
    }

    pub fn columns(&self) -> &PvtColumns<T> {
        &self.cols
    }

    /// Interpolated property value at pressure `p` (clamped outside range).
    pub fn eval(&self, property: PvtProperty, p: T) -> T {
        interp::eval(&self.cols.pressure, self.column(property), p)
    }

    /// Pressure derivative of the property at `p`.
    pub fn eval_dp(&self, property: PvtProperty, p: T) -> T {
        interp::slope(&self.cols.pressure, self.column(property), p)
    }

    pub fn values(&self, p: T) -> PvtValues<T> {
        PvtValues {
            bo: self.eval(PvtProperty::Bo, p),
            bg: self.eval(PvtProperty::Bg, p),
            bw: self.eval(PvtProperty::Bw, p),
            rs: self.eval(PvtProperty::Rs, p),
            rv: self.eval(PvtProperty::Rv, p),
            muo: self.eval(PvtProperty::MuO, p),
            mug: self.eval(PvtProperty::MuG, p),
            muw: self.eval(PvtProperty::MuW, p),
            rhoo: self.eval(PvtProperty::RhoO, p),
            rhog: self.eval(PvtProperty::RhoG, p),
            rhow: self.eval(PvtProperty::RhoW, p),
        }
    }

    pub fn slopes(&self, p: T) -> PvtSlopes<T> {
        PvtSlopes {
            bo: self.eval_dp(PvtProperty::Bo, p),
            bg: self.eval_dp(PvtProperty::Bg, p),
            bw: self.eval_dp(PvtProperty::Bw, p),
            rs: self.eval_dp(PvtProperty::Rs, p),
            rv: self.eval_dp(PvtProperty::Rv, p),
            muo: self.eval_dp(PvtProperty::MuO, p),
            mug: self.eval_dp(PvtProperty::MuG, p),
            muw: self.eval_dp(PvtProperty::MuW, p),
            rhoo: self.eval_dp(PvtProperty::RhoO, p),
            rhog: self.eval_dp(PvtProperty::RhoG, p),
            rhow: self.eval_dp(PvtProperty::RhoW, p),
        }
    }
}

fn check_column<T: Float>(name: &str, col: &[T], n: usize, strictly_positive: bool) -> Result<()> {
    if col.len() != n {
        return Err(Error::invalid(format!(
            "pvt column `{name}`: length {} does not match {} pressure nodes",
            col.len(),
            n
        )));
    }
    for (i, &v) in col.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::invalid(format!(
                "pvt column `{name}`: non-finite value at row {i}"
            )));
        }
        if strictly_positive && v <= T::zero() {
            return Err(Error::invalid(format!(
                "pvt column `{name}`: must be > 0, got non-positive value at row {i}"
            )));
        }
        if !strictly_positive && v < T::zero() {
            return Err(Error::invalid(format!(
                "pvt column `{name}`: must be >= 0, got negative value at row {i}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_node_table() -> PvtTable<f64> {
        PvtTable::new(PvtColumns {
            pressure: vec![1000.0, 3000.0],
            bo: vec![1.20, 1.30],
            bg: vec![2.0e-3, 1.0e-3],
            bw: vec![1.02, 1.01],
            rs: vec![200.0, 600.0],
            rv: vec![0.0, 1.0e-4],
            muo: vec![1.4, 1.1],
            mug: vec![0.015, 0.020],
            muw: vec![0.52, 0.50],
            rhoo: vec![48.0, 45.0],
            rhog: vec![4.0, 9.5],
            rhow: vec![62.4, 62.8],
        })
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        let t = two_node_table();
        assert_eq!(t.eval(PvtProperty::Bo, 1000.0), 1.20);
        assert_eq!(t.eval(PvtProperty::Bo, 2000.0), 1.25);
        // clamped extrapolation above the last node
        assert_eq!(t.eval(PvtProperty::Bo, 5000.0), 1.30);
    }

    #[test]
    fn eval_dp_examples() {
        let t = two_node_table();
        assert!((t.eval_dp(PvtProperty::Bo, 2000.0) - 5.0e-5).abs() < 1e-18);
        assert_eq!(t.eval_dp(PvtProperty::Bo, 5000.0), 0.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let t = two_node_table();
        let h = 1e-3;
        for prop in PvtProperty::ALL {
            for &p in &[1200.0, 1777.0, 2900.0] {
                let fd = (t.eval(prop, p + h) - t.eval(prop, p - h)) / (2.0 * h);
                let an = t.eval_dp(prop, p);
                assert!(
                    (fd - an).abs() < 1e-10,
                    "{prop} at {p}: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn monotone_columns_interpolate_monotonically() {
        let t = two_node_table();
        let mut prev = t.eval(PvtProperty::Rs, 1000.0);
        let mut p = 1000.0;
        while p <= 3000.0 {
            let v = t.eval(PvtProperty::Rs, p);
            assert!(v >= prev);
            prev = v;
            p += 37.0;
        }
    }

    #[test]
    fn denominator_guard_holds_everywhere() {
        let t = two_node_table();
        let mut p = 900.0;
        while p <= 3100.0 {
            let d = 1.0 - t.eval(PvtProperty::Rs, p) * t.eval(PvtProperty::Rv, p);
            assert!(d > 0.0, "denominator violated at {p}");
            p += 13.0;
        }
    }

    #[test]
    fn construction_rejects_bad_tables() {
        let mut cols = two_node_table().cols;
        cols.pressure = vec![3000.0, 1000.0];
        assert!(PvtTable::new(cols.clone()).is_err());

        let mut cols = two_node_table().cols;
        cols.bo = vec![1.2, -0.1];
        assert!(PvtTable::new(cols).is_err());

        // Rs*Rv >= 1 at a node must be rejected.
        let mut cols = two_node_table().cols;
        cols.rs = vec![200.0, 2000.0];
        cols.rv = vec![0.0, 6.0e-4];
        assert!(PvtTable::new(cols).is_err());
    }

    #[test]
    fn property_id_round_trip() {
        for p in PvtProperty::ALL {
            assert_eq!(p.name().parse::<PvtProperty>().unwrap(), p);
        }
        assert!("bogus".parse::<PvtProperty>().is_err());
    }
}
