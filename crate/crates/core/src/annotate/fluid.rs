use serde::Serialize;

/// Universal gas constant, J/(mol K).
const GAS_CONSTANT: f64 = 8.314_462_618;
/// Normal boiling pressure, kPa.
const ATMOSPHERE_KPA: f64 = 101.325;
/// Default reference pressure multiplied by the reduced inlet pressure, kPa.
pub const DEFAULT_P_REF_KPA: f64 = 1.0;

/// `log10(p / kPa) = a - b / (T / K + c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Antoine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Antoine {
    /// Two-point fit (with `c = 0`) through the normal boiling point and
    /// the critical point.
    pub fn through(boiling_k: f64, critical_k: f64, critical_kpa: f64) -> Self {
        let b =
            (critical_kpa.log10() - ATMOSPHERE_KPA.log10()) / (1.0 / boiling_k - 1.0 / critical_k);
        Antoine {
            a: ATMOSPHERE_KPA.log10() + b / boiling_k,
            b,
            c: 0.0,
        }
    }

    /// Saturation pressure in kPa.
    pub fn saturation_kpa(&self, temperature_k: f64) -> f64 {
        10f64.powf(self.a - self.b / (temperature_k + self.c))
    }
}

/// Ideal-gas working fluid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fluid {
    pub name: &'static str,
    /// Specific gas constant, J/(kg K).
    pub r: f64,
    pub gamma: f64,
    /// `None` for fluids that cannot condense at the inlet (air).
    pub antoine: Option<Antoine>,
    pub p_ref_kpa: f64,
}

impl Fluid {
    fn new(name: &'static str, molar_mass_g: f64, gamma: f64, antoine: Option<Antoine>) -> Self {
        Fluid {
            name,
            r: GAS_CONSTANT / (molar_mass_g * 1e-3),
            gamma,
            antoine,
            p_ref_kpa: DEFAULT_P_REF_KPA,
        }
    }

    pub fn cp(&self) -> f64 {
        self.gamma * self.r / (self.gamma - 1.0)
    }

    /// Whether vapor at `(pressure, temperature)` lies on the liquid side of
    /// the saturation curve.
    pub fn condenses(&self, pressure_kpa: f64, temperature_k: f64) -> bool {
        self.antoine
            .is_some_and(|a| pressure_kpa > a.saturation_kpa(temperature_k))
    }
}

/// Names in the order of the compressor space's `fluid` categories.
pub const FLUID_NAMES: [&str; 8] = [
    "air",
    "ammonia",
    "isobutane",
    "pentane",
    "propane",
    "R1234yf",
    "R134a",
    "R245fa",
];

pub fn fluids() -> Vec<Fluid> {
    let sat = |tb, tc, pc| Some(Antoine::through(tb, tc, pc));
    vec![
        Fluid::new("air", 28.965, 1.4, None),
        Fluid::new("ammonia", 17.031, 1.31, sat(239.82, 405.4, 11_333.0)),
        Fluid::new("isobutane", 58.122, 1.10, sat(261.4, 407.8, 3_640.0)),
        Fluid::new("pentane", 72.15, 1.07, sat(309.2, 469.7, 3_370.0)),
        Fluid::new("propane", 44.097, 1.13, sat(231.0, 369.8, 4_248.0)),
        Fluid::new("R1234yf", 114.04, 1.09, sat(243.7, 367.85, 3_382.0)),
        Fluid::new("R134a", 102.03, 1.12, sat(247.08, 374.21, 4_059.0)),
        Fluid::new("R245fa", 134.05, 1.08, sat(288.3, 427.2, 3_651.0)),
    ]
}

pub fn fluid_by_name(name: &str) -> Option<Fluid> {
    fluids().into_iter().find(|f| f.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_invariants() {
        let table = fluids();
        assert_eq!(
            table.iter().map(|f| f.name).collect::<Vec<_>>(),
            FLUID_NAMES.to_vec()
        );
        for f in &table {
            assert!(f.r > 0.0 && f.gamma > 1.0 && f.gamma < 2.0, "{}", f.name);
        }
        let air = fluid_by_name("air").unwrap();
        assert!((air.r - 287.05).abs() < 0.1);
        assert!((air.cp() - 1004.7).abs() < 0.5);
        assert!(!air.condenses(1e6, 10.0));
    }

    #[test]
    fn antoine_passes_through_anchor_points() {
        for (tb, tc, pc) in [(239.82, 405.4, 11_333.0), (288.3, 427.2, 3_651.0)] {
            let a = Antoine::through(tb, tc, pc);
            assert!((a.saturation_kpa(tb) - ATMOSPHERE_KPA).abs() < 1e-9);
            assert!((a.saturation_kpa(tc) - pc).abs() < 1e-6 * pc);
            assert!(a.saturation_kpa(tb - 20.0) < ATMOSPHERE_KPA);
        }
        let nh3 = fluid_by_name("ammonia").unwrap();
        assert!(nh3.condenses(150.0, 239.82));
        assert!(!nh3.condenses(50.0, 239.82));
    }
}
