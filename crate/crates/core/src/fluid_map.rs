//! Conversion between the normalized second fundamental form `(L, M, N)` and
//! a Chaplygin-gas state `(ρ, u, v, p)` with `p = −1/ρ`.
//!
//! The map is `L = ρv² + p`, `M = −ρuv`, `N = ρu² + p`. Under the Chaplygin
//! closure the Gauss constraint `LN − M² = κ` becomes `ρpq² + p² = κ`, which
//! fixes the density as `ρ = 1/√(q² + κ)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// `q² + κ` at or below this value is treated as sonic degeneracy.
pub const SONIC_TOL: f64 = 1e-10;
/// Half-width of the band around `κ = 0` classified as sonic.
pub const SONIC_BAND: f64 = 1e-12;
/// Relative tolerance on `LN − M² − κ` accepted by [`lmn_to_fluid`].
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FluidError {
    #[error("no negative pressure root: p = {p:e} (state outside the Chaplygin regime)")]
    NoNegativeRoot { p: f64 },
    #[error("Gauss constraint violated: LN - M^2 - kappa = {residual:e}")]
    ConstraintViolation { residual: f64 },
    #[error("sonic degeneracy: q^2 + kappa = {value:e}")]
    SonicDegeneracy { value: f64 },
}

/// Normalized second fundamental form, `h_ij = √|g| · (L, M, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SecondFF {
    pub l: f64,
    pub m: f64,
    pub n: f64,
}

impl SecondFF {
    pub fn new(l: f64, m: f64, n: f64) -> Self {
        SecondFF { l, m, n }
    }

    /// `LN − M²`.
    pub fn gauss(&self) -> f64 {
        self.l * self.n - self.m * self.m
    }

    /// Unnormalized coefficients `(h11, h12, h22)` for a metric determinant.
    pub fn h(&self, det: f64) -> [f64; 3] {
        let s = det.sqrt();
        [s * self.l, s * self.m, s * self.n]
    }

    pub fn from_h(h: [f64; 3], det: f64) -> Self {
        let s = det.sqrt();
        SecondFF { l: h[0] / s, m: h[1] / s, n: h[2] / s }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

impl FluidState {
    /// State with the Chaplygin pressure `p = −1/ρ`.
    pub fn chaplygin(rho: f64, u: f64, v: f64) -> Self {
        FluidState { rho, u, v, p: -1.0 / rho }
    }

    /// Bernoulli-consistent state for velocity `(u, v)` at curvature `κ`.
    pub fn from_velocity(u: f64, v: f64, kappa: f64) -> Result<Self, FluidError> {
        let (rho, p) = bernoulli_density(u * u + v * v, kappa)?;
        Ok(FluidState { rho, u, v, p })
    }

    pub fn q2(&self) -> f64 {
        self.u * self.u + self.v * self.v
    }

    /// The curvature this state is consistent with, `ρpq² + p²`.
    pub fn implied_kappa(&self) -> f64 {
        self.rho * self.p * self.q2() + self.p * self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowType {
    Subsonic,
    Supersonic,
    Sonic,
}

/// `(L, M, N) = (ρv² + p, −ρuv, ρu² + p)`.
pub fn fluid_to_lmn(s: &FluidState) -> SecondFF {
    SecondFF {
        l: s.rho * s.v * s.v + s.p,
        m: -s.rho * s.u * s.v,
        n: s.rho * s.u * s.u + s.p,
    }
}

/// Invert the fluid map at curvature `κ`.
///
/// The pressure is the smaller root of `p² − (L+N)p + (LN − M²) = 0`. The
/// velocity is fixed in the gauge `u ≥ 0` with `sign(uv) = sign(−M)`; when
/// `M = 0` the nonzero component is taken nonnegative.
pub fn lmn_to_fluid(f: &SecondFF, kappa: f64) -> Result<FluidState, FluidError> {
    let SecondFF { l, m, n } = *f;
    let residual = l * n - m * m - kappa;
    let scale = 1.0f64.max((l * n).abs()).max(m * m).max(kappa.abs());
    if residual.abs() > CONSTRAINT_TOL * scale {
        return Err(FluidError::ConstraintViolation { residual });
    }
    let sum = l + n;
    let disc = ((l - n) * (l - n) + 4.0 * m * m).sqrt();
    // Product of the roots is κ; dividing avoids cancellation when L + N > 0.
    let p = if sum > 0.0 {
        let p_plus = 0.5 * (sum + disc);
        if p_plus == 0.0 {
            0.0
        } else {
            kappa / p_plus
        }
    } else {
        0.5 * (sum - disc)
    };
    if !(p < 0.0) {
        return Err(FluidError::NoNegativeRoot { p });
    }
    let rho = -1.0 / p;
    let u2 = (p * (p - n)).max(0.0);
    let v2 = (p * (p - l)).max(0.0);
    // uv = pM; take the square root of the larger component, divide for the other.
    let (mut u, mut v) = if u2 >= v2 {
        let u = u2.sqrt();
        (u, if u > 0.0 { p * m / u } else { 0.0 })
    } else {
        let v = v2.sqrt();
        (if v > 0.0 { p * m / v } else { 0.0 }, v)
    };
    if u < 0.0 || (u == 0.0 && v < 0.0) {
        u = -u;
        v = -v;
    }
    Ok(FluidState { rho, u: u + 0.0, v: v + 0.0, p })
}

/// `ρ = 1/√(q² + κ)`, `p = −√(q² + κ)`.
pub fn bernoulli_density(q2: f64, kappa: f64) -> Result<(f64, f64), FluidError> {
    let c2 = q2 + kappa;
    if !(c2 > SONIC_TOL) {
        return Err(FluidError::SonicDegeneracy { value: c2 });
    }
    let c = c2.sqrt();
    Ok((1.0 / c, -c))
}

/// Sound speed `c = 1/ρ` (from `c² = 1/ρ²`).
pub fn sound_speed(rho: f64) -> f64 {
    1.0 / rho
}

pub fn classify(kappa: f64) -> FlowType {
    if kappa > SONIC_BAND {
        FlowType::Subsonic
    } else if kappa < -SONIC_BAND {
        FlowType::Supersonic
    } else {
        FlowType::Sonic
    }
}

/// `ρpq² + p² − κ`.
pub fn gauss_residual(s: &FluidState, kappa: f64) -> f64 {
    s.implied_kappa() - kappa
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn fluid_to_lmn_examples() {
        let f = fluid_to_lmn(&FluidState { rho: 1.0, u: SQRT_2, v: 0.0, p: -1.0 });
        assert!(close(f.l, -1.0, 1e-15) && f.m == 0.0 && close(f.n, 1.0, 1e-15));
        let f = fluid_to_lmn(&FluidState { rho: 1.0, u: 1.0, v: 1.0, p: -1.0 });
        assert_eq!((f.l, f.m, f.n), (0.0, -1.0, 0.0));
        let f = fluid_to_lmn(&FluidState { rho: 2.0, u: 0.0, v: 0.0, p: -0.5 });
        assert_eq!((f.l, f.m, f.n), (-0.5, 0.0, -0.5));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn lmn_to_fluid_examples() {
        let s = lmn_to_fluid(&SecondFF::new(-1.0, 0.0, 1.0), -1.0).unwrap();
        assert!(close(s.rho, 1.0, 1e-15) && close(s.u, 1.414214, 1e-6) && s.v == 0.0 && close(s.p, -1.0, 1e-15));
        let s = lmn_to_fluid(&SecondFF::new(0.0, -1.0, 0.0), -1.0).unwrap();
        assert!(close(s.rho, 1.0, 1e-15) && close(s.u, 1.0, 1e-15) && close(s.v, 1.0, 1e-15));
        let s = lmn_to_fluid(&SecondFF::new(-0.5, 0.0, -0.5), 0.25).unwrap();
        assert!(close(s.rho, 2.0, 1e-15) && s.u == 0.0 && s.v == 0.0 && close(s.p, -0.5, 1e-15));
    }

    #[test]
    fn lmn_to_fluid_errors() {
        assert!(matches!(
            lmn_to_fluid(&SecondFF::new(-1.0, 0.0, 1.0), 0.5),
            Err(FluidError::ConstraintViolation { .. })
        ));
        // both roots positive: L = N = 1, M = 0, κ = 1
        assert!(matches!(
            lmn_to_fluid(&SecondFF::new(1.0, 0.0, 1.0), 1.0),
            Err(FluidError::NoNegativeRoot { .. })
        ));
    }

    #[test]
    fn velocity_gauge() {
        // (u, v) and (−u, −v) map to the same (L, M, N); u ≥ 0 is returned
        let s = FluidState::from_velocity(-0.8, 1.3, -0.2).unwrap();
        let back = lmn_to_fluid(&fluid_to_lmn(&s), -0.2).unwrap();
        assert!(close(back.u, 0.8, 1e-14) && close(back.v, -1.3, 1e-14));
        // M = 0 with u = 0: v is taken nonnegative
        let s = FluidState::from_velocity(0.0, -2.0, -1.0).unwrap();
        let back = lmn_to_fluid(&fluid_to_lmn(&s), -1.0).unwrap();
        assert!(back.u == 0.0 && close(back.v, 2.0, 1e-14));
    }

    #[test]
    fn bernoulli_examples() {
        assert_eq!(bernoulli_density(5.0, -1.0).unwrap(), (0.5, -2.0));
        assert_eq!(bernoulli_density(0.0, 4.0).unwrap(), (0.5, -2.0));
        assert!(matches!(bernoulli_density(1.0, -1.0), Err(FluidError::SonicDegeneracy { .. })));
    }

    #[test]
    fn classification() {
        assert_eq!(classify(1.0), FlowType::Subsonic);
        assert_eq!(classify(-1.0), FlowType::Supersonic);
        assert_eq!(classify(0.0), FlowType::Sonic);
        assert_eq!(classify(5e-13), FlowType::Sonic);
        assert_eq!(sound_speed(0.5), 2.0);
    }

    #[test]
    fn gauss_residual_examples() {
        let s = FluidState { rho: 0.5, u: 5f64.sqrt(), v: 0.0, p: -2.0 };
        assert!(gauss_residual(&s, -1.0).abs() <= 1e-14);
        let s = FluidState { rho: 1.0, u: 1.0, v: 1.0, p: -1.0 };
        assert_eq!(gauss_residual(&s, 0.0), -1.0);
        assert_eq!(gauss_residual(&s, -1.0), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn roundtrip_and_root_identity(rho in 0.1f64..10.0, q in 0.01f64..10.0, theta in 0.0f64..std::f64::consts::TAU) {
                let s = FluidState::chaplygin(rho, q * theta.cos(), q * theta.sin());
                let f = fluid_to_lmn(&s);
                let kappa = s.implied_kappa();
                let back = lmn_to_fluid(&f, kappa).unwrap();
                let sign = if s.u < 0.0 { -1.0 } else { 1.0 };
                let scale = rho.max(q).max(1.0 / rho);
                prop_assert!((back.rho - s.rho).abs() <= 1e-12 * scale);
                prop_assert!((back.p - s.p).abs() <= 1e-12 * scale);
                prop_assert!((back.u - sign * s.u).abs() <= 1e-12 * scale);
                prop_assert!((back.v - sign * s.v).abs() <= 1e-12 * scale);
                let root = (f.n - back.p) * (f.l - back.p) - f.m * f.m;
                prop_assert!(root.abs() <= 1e-12 * (f.l.abs() + f.n.abs() + back.p.abs()).powi(2).max(1.0));
                prop_assert!((back.rho * -back.p - 1.0).abs() <= 4.0 * f64::EPSILON);
            }
        }
    }
}
