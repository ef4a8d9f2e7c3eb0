//! Simplified single-stage centrifugal compressor mean-line model.
//!
//! Ideal-gas fluid, inlet without pre-swirl, Wiesner slip at the impeller
//! exit and five lumped loss terms. The checks for choke, surge and inlet
//! condensation decide the working flag; everything else is a smooth
//! function of the design vector.

use std::f64::consts::PI;

use super::fluid::{fluids, Fluid};
use super::{AnnotateError, ErrorCode, Evaluator, Labels};
use crate::design_space::DesignSpace;

pub const COMPRESSOR_EVALUATOR_ID: &str = "compressor-meanline";

/// Incidence loss multiplier on the squared tangential velocity mismatch.
pub const K_INCIDENCE: f64 = 1.2;
/// Passage friction multiplier.
pub const K_FRICTION: f64 = 0.5;
/// Clearance loss per unit tip-clearance-to-exit-height ratio, as a share of
/// the Euler work.
pub const K_CLEARANCE: f64 = 1.0;
/// Backface (disk friction) loss per unit gap-to-radius ratio, times `U4^2`.
pub const K_BACKFACE: f64 = 0.2;
/// Vaneless diffuser wall friction multiplier.
pub const K_DIFFUSER: f64 = 1.0;
/// Sudden-expansion mixing multiplier at the diffuser inlet.
pub const K_MIXING: f64 = 1.0;
/// Throat relative Mach number at which the inducer chokes.
pub const CHOKE_MACH: f64 = 1.0;
/// Exit flow coefficient below which the stage is taken to surge.
pub const SURGE_FLOW_COEFFICIENT: f64 = 0.01;
/// Exit absolute flow angle (from meridional, degrees) above which the stage
/// is taken to surge.
pub const SURGE_FLOW_ANGLE_DEG: f64 = 85.0;
/// Smallest open share of a flow section after blade blockage.
const MIN_OPEN_AREA: f64 = 0.05;
/// Fixed number of density updates at the impeller exit.
const EXIT_DENSITY_ITERATIONS: usize = 4;

const NAMES: [&str; 23] = [
    "r4", "beta2", "beta4", "e_b", "Z_b", "r2h", "r2s", "r1", "r5", "b4", "b5", "beta2s", "e_tp",
    "e_bk", "l_ind", "Z_s", "Ra", "c_b", "fluid", "Ma21", "Ma41", "T1", "Pr1",
];

/// Inputs in SI units (lengths in m, angles in rad).
#[derive(Debug, Clone, Copy)]
struct Inputs {
    r4: f64,
    beta2: f64,
    beta4: f64,
    e_b: f64,
    z_b: f64,
    r2h: f64,
    r2s: f64,
    r5: f64,
    b4: f64,
    b5: f64,
    beta2s: f64,
    e_tp: f64,
    e_bk: f64,
    l_ind: f64,
    z_s: f64,
    ra: f64,
    c_b: f64,
    fluid: usize,
    ma21: f64,
    ma41: f64,
    t1: f64,
    pr1: f64,
}

/// Evaluated operating point of a working design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub mass_flow: f64,
    pub euler_work: f64,
    pub flow_coefficient: f64,
    pub exit_flow_angle_deg: f64,
    pub throat_mach: f64,
    pub losses: LossBreakdown,
    pub eta_tt: f64,
    pub pr_tt: f64,
}

/// Specific enthalpy losses, J/kg.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub incidence: f64,
    pub friction: f64,
    pub clearance: f64,
    pub backface: f64,
    pub diffuser: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.incidence + self.friction + self.clearance + self.backface + self.diffuser
    }
}

/// Darcy friction factor of fully rough flow (Colebrook, Reynolds term
/// dropped).
fn rough_friction(roughness: f64, hydraulic_diameter: f64) -> f64 {
    let l = (roughness / (3.7 * hydraulic_diameter)).log10();
    0.25 / (l * l)
}

#[derive(Debug, Clone)]
pub struct CompressorEvaluator {
    indices: [usize; 23],
    fluids: Vec<Fluid>,
    bound_names: Vec<String>,
}

impl CompressorEvaluator {
    /// Bind to a space that contains every compressor feature (in any order)
    /// with the bundled fluid list.
    pub fn for_space(space: &DesignSpace) -> Result<Self, AnnotateError> {
        let mut indices = [0; 23];
        for (slot, name) in indices.iter_mut().zip(NAMES) {
            *slot = space
                .index_of(name)
                .ok_or_else(|| AnnotateError::SpaceMismatch {
                    evaluator: COMPRESSOR_EVALUATOR_ID.into(),
                    reason: format!("missing feature `{name}`"),
                })?;
        }
        let table = fluids();
        let fluid = &space.features[indices[18]];
        let names: Vec<&str> = table.iter().map(|f| f.name).collect();
        if fluid
            .categories
            .iter()
            .map(String::as_str)
            .ne(names.iter().copied())
        {
            return Err(AnnotateError::SpaceMismatch {
                evaluator: COMPRESSOR_EVALUATOR_ID.into(),
                reason: format!("fluid categories must be {}", names.join(", ")),
            });
        }
        Ok(Self {
            indices,
            fluids: table,
            bound_names: space.names(),
        })
    }

    fn inputs(&self, x: &[f64]) -> Inputs {
        let v = |k: usize| x[self.indices[k]];
        let mm = 1e-3;
        let rad = PI / 180.0;
        Inputs {
            r4: v(0) * mm,
            beta2: v(1) * rad,
            beta4: v(2) * rad,
            e_b: v(3) * mm,
            z_b: v(4),
            r2h: v(5) * mm,
            r2s: v(6) * mm,
            r5: v(8) * mm,
            b4: v(9) * mm,
            b5: v(10) * mm,
            beta2s: v(11) * rad,
            e_tp: v(12) * mm,
            e_bk: v(13) * mm,
            l_ind: v(14) * mm,
            z_s: v(15),
            ra: v(16),
            c_b: v(17),
            fluid: v(18) as usize,
            ma21: v(19),
            ma41: v(20),
            t1: v(21),
            pr1: v(22),
        }
    }

    /// Full operating point, or the reason the design does not work.
    pub fn operating_point(&self, x: &[f64]) -> Result<OperatingPoint, ErrorCode> {
        let p = self.inputs(x);
        let fluid = self.fluids.get(p.fluid).ok_or(ErrorCode::Numerical)?;
        let (gamma, r) = (fluid.gamma, fluid.r);
        let cp = fluid.cp();
        let exponent = gamma / (gamma - 1.0);

        // Inlet: T1 and Pr1 * p_ref are total conditions.
        let t01 = p.t1;
        let p01 = p.pr1 * fluid.p_ref_kpa * 1e3;
        let a01 = (gamma * r * t01).sqrt();
        let c2 = p.ma21 * a01;
        let t2 = t01 - c2 * c2 / (2.0 * cp);
        if !(t2 > 0.0) {
            return Err(ErrorCode::Numerical);
        }
        let p2 = p01 * (t2 / t01).powf(exponent);
        if fluid.condenses(p2 * 1e-3, t2) {
            return Err(ErrorCode::Condensation);
        }
        let rho2 = p2 / (r * t2);
        let a2 = (gamma * r * t2).sqrt();
        let mass_flow = rho2 * c2 * PI * (p.r2s * p.r2s - p.r2h * p.r2h) * p.c_b;

        // Inducer velocity triangles.
        let u4 = p.ma41 * a01;
        let omega = u4 / p.r4;
        let r2m = ((p.r2h * p.r2h + p.r2s * p.r2s) / 2.0).sqrt();
        let u2m = omega * r2m;
        let u2s = omega * p.r2s;
        let open_inlet = 1.0 - p.z_b * p.e_b / (2.0 * PI * r2m);
        if open_inlet <= MIN_OPEN_AREA {
            return Err(ErrorCode::Choke);
        }
        let throat_mach = c2.hypot(u2s) / a2 / open_inlet;
        if throat_mach >= CHOKE_MACH {
            return Err(ErrorCode::Choke);
        }

        // Impeller exit with Wiesner slip.
        let blades = p.z_b + p.z_s / 2.0;
        let slip = 1.0 - p.beta4.abs().cos().sqrt() / blades.powf(0.7);
        let tan4 = p.beta4.abs().tan();
        let open_exit = 1.0 - (p.z_b + p.z_s) * p.e_b / (2.0 * PI * p.r4);
        if open_exit <= MIN_OPEN_AREA {
            return Err(ErrorCode::Choke);
        }
        let exit_area = 2.0 * PI * p.r4 * p.b4 * open_exit;
        let triangle = |rho4: f64| {
            let cm4 = mass_flow / (rho4 * exit_area);
            let cu4_ideal = u4 - cm4 * tan4;
            (cm4, cu4_ideal, slip * cu4_ideal)
        };
        let mut rho4 = rho2;
        for _ in 0..EXIT_DENSITY_ITERATIONS {
            let (cm4, cu4_ideal, cu4) = triangle(rho4);
            if cu4_ideal <= 0.0 {
                return Err(ErrorCode::Choke);
            }
            let t04 = t01 + u4 * cu4 / cp;
            let t4 = t04 - (cu4 * cu4 + cm4 * cm4) / (2.0 * cp);
            if !(t4 > 0.0) {
                return Err(ErrorCode::Numerical);
            }
            rho4 = p01 * (t4 / t01).powf(exponent) / (r * t4);
        }
        let (cm4, cu4_ideal, cu4) = triangle(rho4);
        if cu4_ideal <= 0.0 {
            return Err(ErrorCode::Choke);
        }
        let euler_work = u4 * cu4;
        let flow_coefficient = cm4 / u4;
        let exit_flow_angle_deg = cu4.atan2(cm4).to_degrees();
        if flow_coefficient < SURGE_FLOW_COEFFICIENT || exit_flow_angle_deg > SURGE_FLOW_ANGLE_DEG {
            return Err(ErrorCode::Surge);
        }

        // Losses.
        let mismatch_mean = -u2m - c2 * p.beta2.tan();
        let mismatch_shroud = -u2s - c2 * p.beta2s.tan();
        let incidence = K_INCIDENCE * 0.25 * (mismatch_mean.powi(2) + mismatch_shroud.powi(2));

        let w2 = c2.hypot(u2m);
        let w4 = cm4.hypot(u4 - cu4);
        let inducer_dh = 2.0 * (p.r2s - p.r2h);
        let pitch4 = 2.0 * PI * p.r4 / (p.z_b + p.z_s).max(1.0);
        let exit_dh = 2.0 * p.b4 * pitch4 / (p.b4 + pitch4);
        let passage_dh = 0.5 * (inducer_dh + exit_dh);
        let friction = K_FRICTION
            * rough_friction(p.ra, passage_dh)
            * (p.l_ind / passage_dh)
            * 0.25
            * (w2 * w2 + w4 * w4);

        let clearance = K_CLEARANCE * (p.e_tp / p.b4) * euler_work;
        let backface = K_BACKFACE * (p.e_bk / p.r4) * u4 * u4;

        let c4_sq = cm4 * cm4 + cu4 * cu4;
        let diffuser_dh = 2.0 * p.b5;
        let diffuser_friction = K_DIFFUSER
            * rough_friction(p.ra, diffuser_dh)
            * ((p.r5 - p.r4) / diffuser_dh)
            * 0.5
            * c4_sq
            * (p.r4 / p.r5);
        let expansion = if p.b5 > p.b4 { 1.0 - p.b4 / p.b5 } else { 0.0 };
        let mixing = K_MIXING * 0.5 * cm4 * cm4 * expansion * expansion;

        let losses = LossBreakdown {
            incidence,
            friction,
            clearance,
            backface,
            diffuser: diffuser_friction + mixing,
        };
        let eta_tt = (euler_work - losses.total()) / euler_work;
        if !(eta_tt > 0.0) || !eta_tt.is_finite() {
            return Err(ErrorCode::Numerical);
        }
        let pr_tt = (1.0 + eta_tt * euler_work / (cp * t01)).powf(exponent);
        if !pr_tt.is_finite() {
            return Err(ErrorCode::Numerical);
        }
        Ok(OperatingPoint {
            mass_flow,
            euler_work,
            flow_coefficient,
            exit_flow_angle_deg,
            throat_mach,
            losses,
            eta_tt,
            pr_tt,
        })
    }
}

impl Evaluator for CompressorEvaluator {
    fn id(&self) -> &str {
        COMPRESSOR_EVALUATOR_ID
    }

    fn check_space(&self, space: &DesignSpace) -> Result<(), AnnotateError> {
        if space.names() == self.bound_names {
            Ok(())
        } else {
            Err(AnnotateError::SpaceMismatch {
                evaluator: COMPRESSOR_EVALUATOR_ID.into(),
                reason: "feature layout differs from the space the evaluator was built for".into(),
            })
        }
    }

    fn evaluate(&self, x: &[f64]) -> Labels {
        match self.operating_point(x) {
            Ok(op) => Labels::working(op.eta_tt, op.pr_tt),
            Err(code) => Labels::failed(code),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mid_range(space: &DesignSpace) -> Vec<f64> {
        let mut x = space.denormalize(&vec![0.5; space.dim()]).unwrap().0;
        x[space.index_of("fluid").unwrap()] = 0.0;
        x[space.index_of("Ma21").unwrap()] = 0.2;
        x[space.index_of("Ma41").unwrap()] = 0.5;
        x
    }

    #[test]
    fn mid_range_air_golden_value() {
        let space = DesignSpace::compressor();
        let ev = CompressorEvaluator::for_space(&space).unwrap();
        let x = mid_range(&space);
        let op = ev.operating_point(&x).unwrap();
        assert!(
            (op.eta_tt - 0.806_306_352_814_350_7).abs() < 1e-12,
            "{}",
            op.eta_tt
        );
        assert!(
            (op.pr_tt - 1.161_910_781_522_637_3).abs() < 1e-12,
            "{}",
            op.pr_tt
        );
        assert!((0.6..=0.85).contains(&op.eta_tt));

        // Inlet triangle by hand: air at 285 K, 50.5 kPa total.
        let air = crate::annotate::fluid_by_name("air").unwrap();
        let a01 = (1.4 * air.r * 285.0_f64).sqrt();
        let c2 = 0.2 * a01;
        let t2 = 285.0 - c2 * c2 / (2.0 * air.cp());
        let p2 = 50.5e3 * (t2 / 285.0).powf(3.5);
        let area = PI * (0.07395_f64.powi(2) - 0.03825_f64.powi(2));
        let mdot = p2 / (air.r * t2) * c2 * area;
        assert!((op.mass_flow - mdot).abs() < 1e-12 * mdot);
        let u4 = 0.5 * a01;
        // Euler work bounded by the slip-free, zero-backsweep limit U4^2.
        assert!(op.euler_work < u4 * u4 && op.euler_work > 0.5 * u4 * u4);
        let phi = op.flow_coefficient;
        let sigma = 1.0 - (52.5_f64.to_radians().cos()).sqrt() / 13.0_f64.powf(0.7);
        let expected = sigma * u4 * (u4 - phi * u4 * 52.5_f64.to_radians().tan());
        assert!((op.euler_work - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn maximal_flow_minimal_speed_does_not_work() {
        let space = DesignSpace::compressor();
        let ev = CompressorEvaluator::for_space(&space).unwrap();
        let mut x = mid_range(&space);
        x[space.index_of("Ma21").unwrap()] = 0.7;
        x[space.index_of("Ma41").unwrap()] = 0.05;
        let l = ev.evaluate(&x);
        assert!(matches!(l.error, Some(ErrorCode::Choke | ErrorCode::Surge)));
        assert_eq!((l.working, l.eta_tt, l.pr_tt), (false, 0.0, 1.0));
    }

    #[test]
    fn cold_dense_refrigerant_condenses() {
        let space = DesignSpace::compressor();
        let ev = CompressorEvaluator::for_space(&space).unwrap();
        let mut x = mid_range(&space);
        x[space.index_of("fluid").unwrap()] = 6.0; // R134a
        x[space.index_of("T1").unwrap()] = 200.0;
        assert_eq!(ev.evaluate(&x).error, Some(ErrorCode::Condensation));
        // Air never condenses.
        x[space.index_of("fluid").unwrap()] = 0.0;
        assert_ne!(ev.evaluate(&x).error, Some(ErrorCode::Condensation));
    }

    #[test]
    fn clearance_never_raises_efficiency() {
        let space = DesignSpace::compressor();
        let ev = CompressorEvaluator::for_space(&space).unwrap();
        let mut x = mid_range(&space);
        let e_tp = space.index_of("e_tp").unwrap();
        let b4 = x[space.index_of("b4").unwrap()];
        let mut previous = f64::INFINITY;
        for step in 0..=50 {
            x[e_tp] = b4 * (0.01 + 0.14 * step as f64 / 50.0);
            let l = ev.evaluate(&x);
            assert!(l.eta_tt <= previous);
            previous = l.eta_tt;
        }
    }

    #[test]
    fn space_order_does_not_matter() {
        let space = DesignSpace::compressor();
        let ev = CompressorEvaluator::for_space(&space).unwrap();
        let x = mid_range(&space);
        let mut shuffled = space.clone();
        shuffled.features.swap(0, 1);
        let other = CompressorEvaluator::for_space(&shuffled).unwrap();
        let mut y = x.clone();
        y.swap(0, 1);
        assert_eq!(ev.evaluate(&x), other.evaluate(&y));
        assert!(ev.check_space(&shuffled).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn labels_are_pure_and_sentinel_consistent(unit in prop::collection::vec(0.0f64..1.0, 23)) {
            let space = DesignSpace::compressor();
            let ev = CompressorEvaluator::for_space(&space).unwrap();
            let x = space.from_unit(&unit).unwrap();
            let a = ev.evaluate(&x);
            prop_assert_eq!(a, ev.evaluate(&x));
            prop_assert!(a.is_consistent());
            prop_assert_eq!(a.working, a.error.is_none());
        }
    }
}
