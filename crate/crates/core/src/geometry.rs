//! Surfaces, the flattening map from the periodic domain onto the perturbed
//! one, and the transformed PDE coefficients.

use std::fmt;
use std::sync::Arc;

use evalexpr::{ContextWithMutableVariables, HashMapContext, Node, Value};

use crate::{Error, Result};

const FD_STEP: f64 = 1e-6;
const GUARD_FRACTION: f64 = 0.3;

/// Evaluation context of user formulas: binds `pi`.
pub(crate) fn formula_context() -> Result<HashMapContext> {
    let mut ctx = HashMapContext::new();
    ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI))
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(ctx)
}

/// A surface height profile or a perturbation, as a function of `x1`.
#[derive(Clone)]
pub enum Profile {
    Flat(f64),
    /// `1.5 + sin t / 3 - cos 2t / 4`
    Example2Zeta,
    /// `sin 2t / 20 + sin(pi t + 0.1) / 20`
    Example2P,
    /// `sin((4 + t^2)^(1/3)) / 20`
    Example3P,
    /// User formula in the variable `t` (evalexpr syntax, e.g. `0.05 * math::sin(t)`).
    Expr { source: String, node: Arc<Node> },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Profile({})", self.id())
    }
}

impl Profile {
    /// Parses a profile id: `flat:<c>`, `zero`, `example2-zeta`, `example2-p`,
    /// `example3-p`, the aliases `flat-1`/`flat-1.1`, or `expr:<formula>`.
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        match id {
            "zero" => return Ok(Profile::Flat(0.0)),
            "example2-zeta" => return Ok(Profile::Example2Zeta),
            "example2-p" => return Ok(Profile::Example2P),
            "example3-p" => return Ok(Profile::Example3P),
            _ => {}
        }
        let flat = id.strip_prefix("flat:").or_else(|| id.strip_prefix("flat-"));
        if let Some(c) = flat {
            return c
                .parse::<f64>()
                .ok()
                .filter(|c| c.is_finite())
                .map(Profile::Flat)
                .ok_or_else(|| Error::Config(format!("bad flat profile height in {id:?}")));
        }
        if let Some(src) = id.strip_prefix("expr:") {
            let node = evalexpr::build_operator_tree(src)
                .map_err(|e| Error::Config(format!("profile expression {src:?}: {e}")))?;
            let p = Profile::Expr { source: src.to_string(), node: Arc::new(node) };
            p.try_value(0.0)?;
            return Ok(p);
        }
        Err(Error::Config(format!("unknown profile id {id:?}")))
    }

    pub fn id(&self) -> String {
        match self {
            Profile::Flat(c) if *c == 0.0 => "zero".into(),
            Profile::Flat(c) => format!("flat:{c}"),
            Profile::Example2Zeta => "example2-zeta".into(),
            Profile::Example2P => "example2-p".into(),
            Profile::Example3P => "example3-p".into(),
            Profile::Expr { source, .. } => format!("expr:{source}"),
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            Profile::Flat(c) => Some(*c),
            _ => None,
        }
    }

    fn try_value(&self, t: f64) -> Result<f64> {
        match self {
            Profile::Expr { source, node } => {
                let mut ctx = formula_context()?;
                ctx.set_value("t".into(), Value::Float(t))
                    .map_err(|e| Error::Config(e.to_string()))?;
                let v = node
                    .eval_number_with_context(&ctx)
                    .map_err(|e| Error::Config(format!("profile expression {source:?}: {e}")))?;
                Ok(v)
            }
            _ => Ok(self.value(t)),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Flat(c) => *c,
            Profile::Example2Zeta => 1.5 + t.sin() / 3.0 - (2.0 * t).cos() / 4.0,
            Profile::Example2P => {
                (2.0 * t).sin() / 20.0 + (std::f64::consts::PI * t + 0.1).sin() / 20.0
            }
            Profile::Example3P => (4.0 + t * t).cbrt().sin() / 20.0,
            Profile::Expr { .. } => self.try_value(t).unwrap_or(f64::NAN),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Profile::Flat(_) => 0.0,
            Profile::Example2Zeta => t.cos() / 3.0 + (2.0 * t).sin() / 2.0,
            Profile::Example2P => (2.0 * t).cos() / 10.0 + PI * (PI * t + 0.1).cos() / 20.0,
            Profile::Example3P => {
                let r = (4.0 + t * t).cbrt();
                r.cos() * 2.0 * t / (3.0 * r * r) / 20.0
            }
            Profile::Expr { .. } => {
                (self.value(t + FD_STEP) - self.value(t - FD_STEP)) / (2.0 * FD_STEP)
            }
        }
    }
}

/// Periodic surface `zeta`, perturbation `p` and the strip heights.
#[derive(Clone, Debug)]
pub struct SurfacePair {
    pub zeta: Profile,
    pub p: Profile,
    pub lambda: f64,
    /// Top of the computational strip (transparent boundary).
    pub h_top: f64,
    /// Height above which the flattening map is the identity.
    pub h_blend: f64,
    zeta_min: f64,
    zeta_max: f64,
}

/// Transformed coefficients `A` (symmetric, `[a11, a12, a22]`) and `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub c: f64,
}

impl Coefficients {
    pub const IDENTITY: Coefficients = Coefficients { a11: 1.0, a12: 0.0, a22: 1.0, c: 1.0 };

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }
}

/// Coefficients at height `x2` above a column where the periodic surface has
/// height `zeta` and slope `dzeta` and the perturbation has value `p` and
/// slope `dp`. No domain check: the formula is smoothly extended below the
/// surface, which quadrature points of piecewise-linear boundary cells can
/// reach by O(h^2).
#[inline]
pub fn coefficients_at(zeta: f64, dzeta: f64, p: f64, dp: f64, h_blend: f64, x2: f64) -> Coefficients {
    if x2 >= h_blend || (p == 0.0 && dp == 0.0) {
        return Coefficients::IDENTITY;
    }
    let (a, d) = shear_and_stretch(zeta, dzeta, p, dp, h_blend, x2);
    Coefficients { a11: d, a12: -a, a22: (1.0 + a * a) / d, c: d }
}

/// Lower-left entry and determinant of the Jacobian of the flattening map.
#[inline]
fn shear_and_stretch(zeta: f64, dzeta: f64, p: f64, dp: f64, h_blend: f64, x2: f64) -> (f64, f64) {
    let depth = h_blend - zeta;
    let s = (h_blend - x2) / depth;
    let chi = s * s * s;
    let a = dp * chi + p * 3.0 * s * s * (h_blend - x2) * dzeta / (depth * depth);
    let d = 1.0 - 3.0 * p * s * s / depth;
    (a, d)
}

impl SurfacePair {
    pub fn new(zeta: Profile, p: Profile, lambda: f64, h_top: f64, h_blend: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("Lambda must be positive, got {lambda}")));
        }
        if !(h_blend < h_top) {
            return Err(Error::Config(format!("H0 = {h_blend} must be below H = {h_top}")));
        }
        let samples = 4096;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..samples {
            let z = zeta.value(-0.5 * lambda + lambda * i as f64 / samples as f64);
            if !z.is_finite() {
                return Err(Error::Config(format!("profile {} is not finite", zeta.id())));
            }
            lo = lo.min(z);
            hi = hi.max(z);
        }
        if !(hi < h_blend) {
            return Err(Error::Config(format!("sup zeta = {hi} must lie below H0 = {h_blend}")));
        }
        let sp = SurfacePair { zeta, p, lambda, h_top, h_blend, zeta_min: lo, zeta_max: hi };
        sp.check_perturbation(-0.5 * lambda, 0.5 * lambda)?;
        Ok(sp)
    }

    /// The Example 1 pair: flat surface at 1 perturbed to a flat surface at 1.1.
    pub fn example1() -> Self {
        Self::preset(Profile::Flat(1.0), Profile::Flat(0.1))
    }

    pub fn example2() -> Self {
        Self::preset(Profile::Example2Zeta, Profile::Example2P)
    }

    pub fn example3() -> Self {
        Self::preset(Profile::Example2Zeta, Profile::Example3P)
    }

    fn preset(zeta: Profile, p: Profile) -> Self {
        Self::new(zeta, p, 2.0 * std::f64::consts::PI, 3.0, 2.9).expect("preset geometry is valid")
    }

    pub fn zeta_min(&self) -> f64 {
        self.zeta_min
    }

    pub fn zeta_max(&self) -> f64 {
        self.zeta_max
    }

    pub fn zeta_p(&self, x1: f64) -> f64 {
        self.zeta.value(x1) + self.p.value(x1)
    }

    pub fn is_unperturbed(&self) -> bool {
        self.p.constant() == Some(0.0)
    }

    /// Rejects perturbations on `[x_lo, x_hi]` beyond the blending guard
    /// `sup |p| < 0.3 (H0 - sup zeta)`.
    pub fn check_perturbation(&self, x_lo: f64, x_hi: f64) -> Result<()> {
        let limit = GUARD_FRACTION * (self.h_blend - self.zeta_max);
        let n = (((x_hi - x_lo) / 0.01).ceil() as usize).max(16);
        let mut sup = 0.0f64;
        for i in 0..=n {
            let v = self.p.value(x_lo + (x_hi - x_lo) * i as f64 / n as f64);
            if !v.is_finite() {
                return Err(Error::Geometry(format!("perturbation {} is not finite", self.p.id())));
            }
            sup = sup.max(v.abs());
        }
        if sup >= limit {
            return Err(Error::Geometry(format!(
                "sup |p| = {sup:.4} on [{x_lo:.3}, {x_hi:.3}] exceeds the blending limit {limit:.4}"
            )));
        }
        Ok(())
    }

    fn check_domain(&self, x: [f64; 2]) -> Result<f64> {
        let z = self.zeta.value(x[0]);
        if x[1] < z - 1e-12 {
            return Err(Error::Domain(format!("({}, {}) lies below the surface {z}", x[0], x[1])));
        }
        Ok(z)
    }

    /// The flattening map at `x` (periodic domain) and its Jacobian
    /// `[[d1 T1, d2 T1], [d1 T2, d2 T2]]`.
    pub fn diffeo(&self, x: [f64; 2]) -> Result<([f64; 2], [[f64; 2]; 2])> {
        let z = self.check_domain(x)?;
        if x[1] >= self.h_blend {
            return Ok((x, [[1.0, 0.0], [0.0, 1.0]]));
        }
        let (p, dp) = (self.p.value(x[0]), self.p.derivative(x[0]));
        let dz = self.zeta.derivative(x[0]);
        let s = (self.h_blend - x[1]) / (self.h_blend - z);
        let (a, d) = shear_and_stretch(z, dz, p, dp, self.h_blend, x[1]);
        if !(d > 0.0) {
            return Err(Error::Geometry(format!(
                "flattening map not invertible at ({}, {}): det = {d}",
                x[0], x[1]
            )));
        }
        Ok(([x[0], x[1] + p * s * s * s], [[1.0, 0.0], [a, d]]))
    }

    /// `A = |det J| J^-1 J^-T` and `c = |det J|` at `x`.
    pub fn coefficients(&self, x: [f64; 2]) -> Result<Coefficients> {
        let (_, jac) = self.diffeo(x)?;
        let (a, d) = (jac[1][0], jac[1][1]);
        if x[1] >= self.h_blend {
            return Ok(Coefficients::IDENTITY);
        }
        Ok(Coefficients { a11: d, a12: -a, a22: (1.0 + a * a) / d, c: d })
    }

    /// Coefficients at `x` without the domain check (see [`coefficients_at`]).
    pub fn coefficients_extended(&self, x: [f64; 2]) -> Coefficients {
        coefficients_at(
            self.zeta.value(x[0]),
            self.zeta.derivative(x[0]),
            self.p.value(x[0]),
            self.p.derivative(x[0]),
            self.h_blend,
            x[1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles() {
        assert_eq!(Profile::parse("example2-zeta").unwrap().value(0.0), 1.25);
        assert_eq!(Profile::parse("flat-1").unwrap().value(17.3), 1.0);
        assert_eq!(Profile::parse("flat:1.1").unwrap().value(-4.0), 1.1);
        let v = Profile::parse("example3-p").unwrap().value(0.0);
        assert!((v - 4f64.cbrt().sin() / 20.0).abs() < 1e-15, "{v}");
        assert!(matches!(Profile::parse("bumpy"), Err(Error::Config(_))));
    }

    #[test]
    fn derivatives_match_central_differences() {
        for id in ["example2-zeta", "example2-p", "example3-p", "flat:2"] {
            let p = Profile::parse(id).unwrap();
            for &t in &[-3.0, -0.4, 0.0, 0.7, 5.5, 40.0] {
                let h = 1e-5;
                let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
                assert!((fd - p.derivative(t)).abs() < 1e-8, "{id} at {t}");
            }
        }
    }

    #[test]
    fn expression_profiles() {
        let p = Profile::parse("expr:0.05 * math::sin(t)").unwrap();
        assert!((p.value(1.0) - 0.05 * 1f64.sin()).abs() < 1e-15);
        assert!((p.derivative(1.0) - 0.05 * 1f64.cos()).abs() < 1e-8);
        assert!(Profile::parse("expr:1 +").is_err());
    }

    #[test]
    fn example1_maps_surface_to_perturbed_surface() {
        let sp = SurfacePair::example1();
        let (y, j) = sp.diffeo([0.0, 2.9]).unwrap();
        assert_eq!(y, [0.0, 2.9]);
        assert_eq!(j, [[1.0, 0.0], [0.0, 1.0]]);
        let (y, _) = sp.diffeo([0.0, 1.0]).unwrap();
        assert!((y[1] - 1.1).abs() < 1e-15);
        assert!(matches!(sp.diffeo([0.0, 0.9]), Err(Error::Domain(_))));
    }

    #[test]
    fn guard_rejects_large_perturbations() {
        let r = SurfacePair::new(
            Profile::Flat(1.0),
            Profile::Flat(0.6),
            2.0 * std::f64::consts::PI,
            3.0,
            2.9,
        );
        assert!(matches!(r, Err(Error::Geometry(_))));
        let r = SurfacePair::new(Profile::Flat(1.0), Profile::Flat(0.0), 1.0, 3.0, 3.5);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
