use gcflow::fluid_map::{self, FluidState, SecondFF};
use gcflow::gas_reference;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random admissible state: `κ < 0`, velocity with `q² + κ > 0`.
fn random_state(rng: &mut ChaCha8Rng) -> (FluidState, f64) {
    let kappa = -rng.gen_range(0.01..4.0);
    let q_min = f64::sqrt(-kappa);
    let q = q_min * rng.gen_range(1.05..4.0);
    let theta = match rng.gen_range(0..10) {
        0 => 0.0,
        1 => std::f64::consts::FRAC_PI_2,
        _ => rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    };
    (FluidState::from_velocity(q * theta.cos(), q * theta.sin(), kappa).unwrap(), kappa)
}

#[test]
fn algebraic_identities_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let (s, kappa) = random_state(&mut rng);
        assert!((s.rho * -s.p - 1.0).abs() <= 1e-12);
        let q2 = s.q2();
        let scale = 1.0 + kappa.abs() + q2;
        assert!((s.rho * s.p * q2 + s.p * s.p - kappa).abs() <= 1e-12 * scale);
        let c = fluid_map::sound_speed(s.rho);
        assert!((c * c - q2 - kappa).abs() <= 1e-12 * scale);
        let gamma = rng.gen_range(1.05..3.0);
        let q = rng.gen_range(0.0..gas_reference::cavitation_speed(gamma).unwrap());
        assert!(gas_reference::classification_identity_residual(q, gamma).unwrap() <= 1e-12);
    }
}

#[test]
fn roundtrip_covers_both_signs_of_m_and_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut pos, mut neg, mut zero) = (0, 0, 0);
    for _ in 0..10_000 {
        let (s, kappa) = random_state(&mut rng);
        let h = fluid_map::fluid_to_lmn(&s);
        match h.m.partial_cmp(&0.0).unwrap() {
            std::cmp::Ordering::Greater => pos += 1,
            std::cmp::Ordering::Less => neg += 1,
            std::cmp::Ordering::Equal => zero += 1,
        }
        let back = fluid_map::lmn_to_fluid(&h, kappa).unwrap();
        // (u, v) and (−u, −v) share one second form; the inverse returns u ≥ 0
        let (u, v) = if s.u < 0.0 { (-s.u, -s.v) } else { (s.u, s.v) };
        let scale = u.abs().max(v.abs());
        assert!((back.u - u).abs() <= 1e-12 * scale && (back.v - v).abs() <= 1e-12 * scale, "{s:?} -> {back:?}");
    }
    assert!(pos > 0 && neg > 0 && zero > 0);
}

proptest! {
    #[test]
    fn lmn_of_any_state_satisfies_gauss(u in 0.0f64..5.0, v in -5.0f64..5.0, kappa in -3.0f64..3.0) {
        prop_assume!(u * u + v * v + kappa > 1e-3);
        let s = FluidState::from_velocity(u, v, kappa).unwrap();
        let h = fluid_map::fluid_to_lmn(&s);
        let scale = 1.0 + h.l.abs() * h.n.abs() + h.m * h.m;
        prop_assert!((h.gauss() - kappa).abs() <= 1e-12 * scale);
    }

    #[test]
    fn inversion_is_a_left_inverse(l in -4.0f64..4.0, m in -4.0f64..4.0, n in -4.0f64..4.0) {
        let kappa = l * n - m * m;
        prop_assume!(kappa < -1e-3);
        let h = SecondFF::new(l, m, n);
        let s = fluid_map::lmn_to_fluid(&h, kappa).unwrap();
        let h2 = fluid_map::fluid_to_lmn(&s);
        let scale = 1.0 + l.abs().max(m.abs()).max(n.abs());
        prop_assert!((h2.l - l).abs() <= 1e-10 * scale);
        prop_assert!((h2.m - m).abs() <= 1e-10 * scale);
        prop_assert!((h2.n - n).abs() <= 1e-10 * scale);
    }
}
