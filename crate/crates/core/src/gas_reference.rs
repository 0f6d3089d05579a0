//! Closed-form steady potential-flow relations for a polytropic gas
//! `p = ρ^γ/γ` and for the isothermal gas `p = c²ρ`.
//!
//! These serve as reference oracles for the gas/geometry analogy; there is no
//! PDE solver here.

use serde::Serialize;
use thiserror::Error;

use crate::fluid_map::FlowType;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GasError {
    #[error("speed {q} exceeds the cavitation speed {q_cav}")]
    BeyondCavitation { q: f64, q_cav: f64 },
    #[error("invalid adiabatic exponent {0} (need gamma > 1)")]
    InvalidGamma(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Sample of the gas relations at one speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GasState {
    pub gamma: f64,
    pub q: f64,
    pub rho: f64,
    pub c: f64,
    pub flow: FlowType,
}

/// Bernoulli law `ρ = (1 − (γ−1)q²/2)^{1/(γ−1)}`, normalized so that `ρ = 1`
/// at stagnation.
pub fn isentropic_density(q: f64, gamma: f64) -> Result<f64, GasError> {
    if !(gamma > 1.0) {
        return Err(GasError::InvalidGamma(gamma));
    }
    if q < 0.0 {
        return Err(GasError::InvalidParameter("speed must be nonnegative"));
    }
    let q_cav = cavitation_speed(gamma)?;
    if q > q_cav {
        return Err(GasError::BeyondCavitation { q, q_cav });
    }
    Ok(cavitation_clamp(isentropic_sound_speed_sq(q, gamma)).powf(1.0 / (gamma - 1.0)))
}

/// Roundoff at `q = q_cav` would leave a tiny positive base.
fn cavitation_clamp(base: f64) -> f64 {
    if base <= 4.0 * f64::EPSILON {
        0.0
    } else {
        base
    }
}

/// `c² = 1 − (γ−1)q²/2`.
pub fn isentropic_sound_speed_sq(q: f64, gamma: f64) -> f64 {
    1.0 - 0.5 * (gamma - 1.0) * q * q
}

/// `q_cav = √(2/(γ−1))`.
pub fn cavitation_speed(gamma: f64) -> Result<f64, GasError> {
    if !(gamma > 1.0) {
        return Err(GasError::InvalidGamma(gamma));
    }
    Ok((2.0 / (gamma - 1.0)).sqrt())
}

/// `q_cr = √(2/(γ+1))`.
pub fn critical_speed(gamma: f64) -> Result<f64, GasError> {
    if !(gamma >= 1.0) {
        return Err(GasError::InvalidGamma(gamma));
    }
    Ok((2.0 / (gamma + 1.0)).sqrt())
}

/// Characteristic speeds of a gas law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalSpeeds {
    /// `None` for the isothermal gas, which never cavitates.
    pub q_cav: Option<f64>,
    pub q_cr: f64,
}

/// `(q_cav, q_cr)` for `γ > 1`. For `γ = 1` the isothermal critical speed is
/// the (constant) sound speed `c`, which must then be supplied.
pub fn critical_speeds(gamma: f64, isothermal_c: Option<f64>) -> Result<CriticalSpeeds, GasError> {
    if gamma == 1.0 {
        let c = isothermal_c.ok_or(GasError::InvalidParameter("isothermal flow needs a sound speed"))?;
        if !(c > 0.0) {
            return Err(GasError::InvalidParameter("sound speed must be positive"));
        }
        return Ok(CriticalSpeeds { q_cav: None, q_cr: c });
    }
    Ok(CriticalSpeeds { q_cav: Some(cavitation_speed(gamma)?), q_cr: critical_speed(gamma)? })
}

/// `|q² − q_cr² − (2/(γ+1))(q² − c²)|` with `c² = 1 − (γ−1)q²/2`.
pub fn classification_identity_residual(q: f64, gamma: f64) -> Result<f64, GasError> {
    let q_cr = critical_speed(gamma)?;
    let c2 = isentropic_sound_speed_sq(q, gamma);
    Ok((q * q - q_cr * q_cr - 2.0 / (gamma + 1.0) * (q * q - c2)).abs())
}

/// `ρ = ρ0 · exp(−q²/(2c²))`.
pub fn isothermal_density(q: f64, c: f64, rho0: f64) -> Result<f64, GasError> {
    if !(c > 0.0) || !(rho0 > 0.0) {
        return Err(GasError::InvalidParameter("c and rho0 must be positive"));
    }
    Ok(rho0 * (-q * q / (2.0 * c * c)).exp())
}

/// Classify a speed against the critical speed with a relative band.
pub fn classify_speed(q: f64, q_cr: f64) -> FlowType {
    let band = 1e-12 * q_cr.max(1.0);
    if (q - q_cr).abs() <= band {
        FlowType::Sonic
    } else if q < q_cr {
        FlowType::Subsonic
    } else {
        FlowType::Supersonic
    }
}

/// Polytropic state at speed `q`.
pub fn isentropic_state(q: f64, gamma: f64) -> Result<GasState, GasError> {
    let rho = isentropic_density(q, gamma)?;
    let c = cavitation_clamp(isentropic_sound_speed_sq(q, gamma)).sqrt();
    Ok(GasState { gamma, q, rho, c, flow: classify_speed(q, critical_speed(gamma)?) })
}

/// Isothermal state at speed `q`.
pub fn isothermal_state(q: f64, c: f64, rho0: f64) -> Result<GasState, GasError> {
    let rho = isothermal_density(q, c, rho0)?;
    Ok(GasState { gamma: 1.0, q, rho, c, flow: classify_speed(q, c) })
}

/// Table of states over `n` equally spaced speeds in `[0, q_max]`, where
/// `q_max = q_cav` for `γ > 1` and `3c` in the isothermal case.
pub fn table(gamma: f64, n: usize, isothermal: Option<(f64, f64)>) -> Result<Vec<GasState>, GasError> {
    if n < 2 {
        return Err(GasError::InvalidParameter("need at least two samples"));
    }
    if gamma == 1.0 {
        let (c, rho0) = isothermal.ok_or(GasError::InvalidParameter("isothermal flow needs c and rho0"))?;
        let q_max = 3.0 * c;
        return (0..n)
            .map(|i| isothermal_state(q_max * i as f64 / (n - 1) as f64, c, rho0))
            .collect();
    }
    let q_cav = cavitation_speed(gamma)?;
    (0..n)
        .map(|i| {
            let q = if i == n - 1 { q_cav } else { q_cav * i as f64 / (n - 1) as f64 };
            isentropic_state(q, gamma)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isentropic_density_examples() {
        assert_eq!(isentropic_density(0.0, 1.4).unwrap(), 1.0);
        let q_cav = cavitation_speed(1.4).unwrap();
        assert_eq!(isentropic_density(q_cav, 1.4).unwrap(), 0.0);
        assert_eq!(isentropic_state(q_cav, 1.4).unwrap().c, 0.0);
        assert!((isentropic_density(1.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            isentropic_density(q_cav * 1.001, 1.4),
            Err(GasError::BeyondCavitation { .. })
        ));
        assert!(matches!(isentropic_density(0.5, 1.0), Err(GasError::InvalidGamma(_))));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn critical_speed_examples() {
        let s = critical_speeds(3.0, None).unwrap();
        assert_eq!(s.q_cav, Some(1.0));
        assert!((s.q_cr - 0.707107).abs() < 1e-6);
        let s = critical_speeds(2.0, None).unwrap();
        assert!((s.q_cav.unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.q_cr - 0.816497).abs() < 1e-6);
        let s = critical_speeds(1.0, Some(1.0)).unwrap();
        assert_eq!((s.q_cav, s.q_cr), (None, 1.0));
        assert!(critical_speeds(1.0, None).is_err());
    }

    #[test]
    fn identity_examples() {
        assert!(classification_identity_residual(0.5, 2.0).unwrap() <= 1e-15);
        assert!(classification_identity_residual(0.0, 3.0).unwrap() <= 1e-15);
        let q_cr = critical_speed(1.4).unwrap();
        assert!(classification_identity_residual(q_cr, 1.4).unwrap() <= 1e-15);
        let c = isentropic_sound_speed_sq(q_cr, 1.4).sqrt();
        assert!((c - q_cr).abs() <= 1e-12);
        assert_eq!(isentropic_state(q_cr, 1.4).unwrap().flow, FlowType::Sonic);
        assert_eq!(isentropic_state(0.1, 1.4).unwrap().flow, FlowType::Subsonic);
        assert_eq!(isentropic_state(1.2, 1.4).unwrap().flow, FlowType::Supersonic);
    }

    #[test]
    fn isothermal_examples() {
        assert_eq!(isothermal_density(0.0, 2.0, 3.0).unwrap(), 3.0);
        assert!((isothermal_density(1.0, 1.0, 1.0).unwrap() - 0.606531).abs() < 1e-6);
        assert!(isothermal_density(10.0, 1.0, 1.0).unwrap() <= 2e-22);
        assert!(isothermal_density(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn density_is_strictly_decreasing() {
        for &gamma in &[1.2, 1.4, 2.0, 3.0] {
            let t = table(gamma, 200, None).unwrap();
            assert!(t.windows(2).all(|w| w[1].rho < w[0].rho), "gamma = {gamma}");
        }
    }

    #[test]
    fn identity_over_sample_grid() {
        for &gamma in &[1.2, 1.4, 2.0, 3.0] {
            let q_cav = cavitation_speed(gamma).unwrap();
            for i in 0..100 {
                let q = q_cav * i as f64 / 99.0;
                assert!(classification_identity_residual(q, gamma).unwrap() <= 1e-12);
            }
        }
    }
}
