//! Time-bin entangled state and the 2x4 AMZI decoder.
//!
//! In the interfering central bin the four X-basis amplitudes are
//! `(1 ± e^{iΘ}) / (2√2)` with `Θ = θ1 + θ2 + θ(t-τ) - θ(t)`; `(X0,X'0)` and
//! `(X1,X'1)` carry the `+` sign.

use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::db_to_transmission;
use crate::diag::{Checker, Validate};
use crate::error::{Error, Result};

/// Largest two-photon visibility reachable without entanglement.
pub const CLASSICAL_VISIBILITY_BOUND: f64 = FRAC_1_SQRT_2;

/// Strictly above `1/√2`.
pub fn exceeds_classical_bound(visibility: f64) -> bool {
    visibility > CLASSICAL_VISIBILITY_BOUND
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TimeBinState {
    /// Long minus short arm delay.
    pub delay_tau_ps: f64,
    /// Phase between the early and late emission amplitudes.
    pub relative_phase: f64,
    /// Contrast of the two-photon interference term.
    pub visibility_source: f64,
}

impl Default for TimeBinState {
    fn default() -> Self {
        TimeBinState {
            delay_tau_ps: 800.0,
            relative_phase: 0.0,
            visibility_source: 1.0,
        }
    }
}

impl Validate for TimeBinState {
    fn diagnose(&self, c: &mut Checker<'_>) {
        c.require("delay_tau_ps", self.delay_tau_ps, self.delay_tau_ps > 0.0, "> 0");
        c.require("relative_phase", self.relative_phase, true, "");
        c.require(
            "visibility_source",
            self.visibility_source,
            (0.0..=1.0).contains(&self.visibility_source),
            "in [0, 1]",
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct AmziConfig {
    /// Signal AMZI long-short phase, used when no temperature sweep sets it.
    pub theta1: f64,
    pub theta2: f64,
    /// `θ(t-τ) - θ(t)` of the pump.
    pub pump_phase_diff: f64,
    pub intrinsic_loss_db: f64,
    pub excess_loss_db: f64,
    /// Signal AMZI phase per kelvin of PLC temperature.
    pub phase_per_kelvin: f64,
    pub reference_temperature_c: f64,
}

impl Default for AmziConfig {
    fn default() -> Self {
        AmziConfig {
            theta1: 0.0,
            theta2: 0.0,
            pump_phase_diff: 0.0,
            intrinsic_loss_db: 6.0,
            excess_loss_db: 2.0,
            phase_per_kelvin: core::f64::consts::TAU,
            reference_temperature_c: 20.0,
        }
    }
}

impl AmziConfig {
    pub fn total_loss_db(&self) -> f64 {
        self.intrinsic_loss_db + self.excess_loss_db
    }

    /// Probability that a photon gets through the AMZI.
    pub fn transmission(&self) -> f64 {
        db_to_transmission(self.total_loss_db())
    }

    /// Same configuration with the signal phase set by a PLC temperature.
    pub fn at_temperature(&self, plc_temperature_c: f64) -> AmziConfig {
        AmziConfig {
            theta1: phase_from_temperature(self, plc_temperature_c),
            ..*self
        }
    }
}

impl Validate for AmziConfig {
    fn diagnose(&self, c: &mut Checker<'_>) {
        c.require("theta1", self.theta1, true, "");
        c.require("theta2", self.theta2, true, "");
        c.require("pump_phase_diff", self.pump_phase_diff, true, "");
        // infinite loss is allowed: nothing gets through
        if self.intrinsic_loss_db.is_nan() || self.intrinsic_loss_db < 0.0 {
            c.error("intrinsic_loss_db", "must be >= 0");
        }
        if self.excess_loss_db.is_nan() || self.excess_loss_db < 0.0 {
            c.error("excess_loss_db", "must be >= 0");
        }
        c.require("phase_per_kelvin", self.phase_per_kelvin, true, "");
        c.require("reference_temperature_c", self.reference_temperature_c, true, "");
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct XBasisProbabilities {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl XBasisProbabilities {
    pub fn get(&self, signal: Port, idler: Port) -> f64 {
        match (signal, idler) {
            (Port::X0, Port::X0) => self.p00,
            (Port::X0, Port::X1) => self.p01,
            (Port::X1, Port::X0) => self.p10,
            (Port::X1, Port::X1) => self.p11,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Port, Port) {
        let u: f64 = rng.random();
        if u < self.p00 {
            (Port::X0, Port::X0)
        } else if u < self.p00 + self.p01 {
            (Port::X0, Port::X1)
        } else if u < self.p00 + self.p01 + self.p10 {
            (Port::X1, Port::X0)
        } else {
            (Port::X1, Port::X1)
        }
    }
}

/// Total two-photon phase `Θ`.
pub fn total_phase(state: &TimeBinState, amzi: &AmziConfig) -> f64 {
    amzi.theta1 + amzi.theta2 + amzi.pump_phase_diff + state.relative_phase
}

/// Port-pair probabilities of a coincidence in the central (interfering) bin.
///
/// The coherent part is the squared modulus of each amplitude; a fraction
/// `1 - V` of pairs is taken as fully mixed and spreads evenly over the ports.
pub fn xbasis_probabilities(state: &TimeBinState, amzi: &AmziConfig) -> Result<XBasisProbabilities> {
    state.validate()?;
    amzi.validate()?;
    let phase = Complex64::cis(total_phase(state, amzi));
    let one = Complex64::new(1.0, 0.0);
    let scale = 1.0 / 8.0;
    let same = (one + phase).norm_sqr() * scale;
    let cross = (one - phase).norm_sqr() * scale;
    let v = state.visibility_source;
    let mix = |p: f64| v * p + (1.0 - v) * 0.25;
    let (same, cross) = (mix(same), mix(cross));
    Ok(XBasisProbabilities {
        p00: same,
        p01: cross,
        p10: cross,
        p11: same,
    })
}

/// Signal AMZI phase at a PLC temperature, linear about the reference.
pub fn phase_from_temperature(amzi: &AmziConfig, plc_temperature_c: f64) -> f64 {
    amzi.phase_per_kelvin * (plc_temperature_c - amzi.reference_temperature_c)
}

/// Accidental-to-true ratio inside the coincidence window implied by a CAR.
pub fn background_ratio_from_car(car: f64) -> Result<f64> {
    if car.is_nan() || car <= 1.0 {
        return Err(Error::invalid("car", "must exceed 1"));
    }
    Ok(1.0 / (car - 1.0))
}

/// Arrival-time correlation contrast, limited only by accidentals.
pub fn zbasis_coincidence_visibility(background_ratio: f64) -> Result<f64> {
    if background_ratio.is_nan() || background_ratio < 0.0 {
        return Err(Error::invalid("background_ratio", "must be >= 0"));
    }
    Ok(1.0 / (1.0 + 2.0 * background_ratio))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Port {
    X0,
    X1,
}

impl Port {
    pub fn index(self) -> usize {
        match self {
            Port::X0 => 0,
            Port::X1 => 1,
        }
    }

    fn from_bit(b: bool) -> Port {
        if b {
            Port::X1
        } else {
            Port::X0
        }
    }
}

/// A photon leaving the AMZI: output port and added delay (0 or τ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutedPhoton {
    pub port: Port,
    pub delay_ps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutedPair {
    pub signal: RoutedPhoton,
    pub idler: RoutedPhoton,
}

impl RoutedPair {
    /// Idler minus signal AMZI delay: `-τ`, `0` or `+τ`.
    pub fn relative_delay_ps(&self) -> f64 {
        self.idler.delay_ps - self.signal.delay_ps
    }
}

/// Per-photon stochastic AMZI model for both channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmziRouter {
    probs: XBasisProbabilities,
    tau_ps: f64,
    transmission: f64,
}

impl AmziRouter {
    pub fn new(state: &TimeBinState, amzi: &AmziConfig) -> Result<Self> {
        Ok(AmziRouter {
            probs: xbasis_probabilities(state, amzi)?,
            tau_ps: state.delay_tau_ps,
            transmission: amzi.transmission(),
        })
    }

    pub fn probabilities(&self) -> &XBasisProbabilities {
        &self.probs
    }

    pub fn tau_ps(&self) -> f64 {
        self.tau_ps
    }

    /// Single-photon AMZI transmission.
    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    /// Arms and ports for a pair already known to survive.
    ///
    /// Equal arms land in the central bin and follow the X-basis probabilities;
    /// unequal arms give side-bin coincidences with flat port statistics.
    pub fn assign_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> RoutedPair {
        let long_s: bool = rng.random();
        let long_i: bool = rng.random();
        let (ps, pi) = if long_s == long_i {
            self.probs.sample(rng)
        } else {
            (Port::from_bit(rng.random()), Port::from_bit(rng.random()))
        };
        RoutedPair {
            signal: RoutedPhoton {
                port: ps,
                delay_ps: if long_s { self.tau_ps } else { 0.0 },
            },
            idler: RoutedPhoton {
                port: pi,
                delay_ps: if long_i { self.tau_ps } else { 0.0 },
            },
        }
    }

    /// Arm and port for a photon whose partner was lost.
    pub fn assign_single<R: Rng + ?Sized>(&self, rng: &mut R) -> RoutedPhoton {
        let long: bool = rng.random();
        RoutedPhoton {
            port: Port::from_bit(rng.random()),
            delay_ps: if long { self.tau_ps } else { 0.0 },
        }
    }

    /// Loss and routing for both photons of a pair.
    pub fn route_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Option<RoutedPhoton>, Option<RoutedPhoton>) {
        let s = rng.random::<f64>() < self.transmission;
        let i = rng.random::<f64>() < self.transmission;
        match (s, i) {
            (true, true) => {
                let pair = self.assign_pair(rng);
                (Some(pair.signal), Some(pair.idler))
            }
            (true, false) => (Some(self.assign_single(rng)), None),
            (false, true) => (None, Some(self.assign_single(rng))),
            (false, false) => (None, None),
        }
    }
}

/// Routes one photon created at `event_time_ps`: `None` if the AMZI loses it,
/// otherwise its port and delayed arrival time.
pub fn amzi_route<R: Rng + ?Sized>(
    event_time_ps: f64,
    router: &AmziRouter,
    rng: &mut R,
) -> Option<(Port, f64)> {
    if rng.random::<f64>() >= router.transmission {
        return None;
    }
    let photon = router.assign_single(rng);
    Some((photon.port, event_time_ps + photon.delay_ps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng_from_seed;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn state(v: f64) -> TimeBinState {
        TimeBinState {
            visibility_source: v,
            ..TimeBinState::default()
        }
    }

    fn amzi(theta: f64) -> AmziConfig {
        AmziConfig {
            theta1: theta,
            ..AmziConfig::default()
        }
    }

    fn lossless(theta: f64) -> AmziConfig {
        AmziConfig {
            intrinsic_loss_db: 0.0,
            excess_loss_db: 0.0,
            ..amzi(theta)
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn constructive_and_destructive() {
        let p = xbasis_probabilities(&state(1.0), &amzi(0.0)).unwrap();
        assert!(close(p.p00, 0.5) && close(p.p11, 0.5));
        assert!(close(p.p01, 0.0) && close(p.p10, 0.0));
        let p = xbasis_probabilities(&state(1.0), &amzi(PI)).unwrap();
        assert!(close(p.p00, 0.0) && close(p.p01, 0.5));
        let p = xbasis_probabilities(&state(0.95), &amzi(0.0)).unwrap();
        assert!(close(p.p00, 0.4875));
    }

    #[test]
    fn matches_closed_form() {
        for i in 0..64 {
            let theta = 2.0 * PI * i as f64 / 64.0;
            for v in [0.0, 0.5, 0.95, 1.0] {
                let cfg = AmziConfig {
                    theta1: 0.3 * theta,
                    theta2: 0.5 * theta,
                    pump_phase_diff: 0.2 * theta,
                    ..AmziConfig::default()
                };
                let p = xbasis_probabilities(&state(v), &cfg).unwrap();
                let c = libm::cos(theta);
                assert!(close(p.p00, (1.0 + v * c) / 4.0));
                assert!(close(p.p01, (1.0 - v * c) / 4.0));
            }
        }
    }

    #[test]
    fn temperature_phase() {
        let a = AmziConfig {
            phase_per_kelvin: 1.7,
            reference_temperature_c: 25.0,
            ..AmziConfig::default()
        };
        assert_eq!(phase_from_temperature(&a, 25.0), 0.0);
        assert!(close(phase_from_temperature(&a, 25.0 + 2.0 * PI / 1.7), 2.0 * PI));
        assert!(close(a.at_temperature(26.0).theta1, 1.7));
    }

    #[test]
    fn zbasis_limits() {
        assert_eq!(zbasis_coincidence_visibility(0.0).unwrap(), 1.0);
        assert!(zbasis_coincidence_visibility(1e12).unwrap() < 1e-11);
        // CAR 350: ratio 1/349, V_Z = 349/351
        let v = zbasis_coincidence_visibility(background_ratio_from_car(350.0).unwrap()).unwrap();
        assert!((v - 0.994_301_994_301_994_3).abs() < 1e-12);
        assert!(v >= 0.98);
        assert!(zbasis_coincidence_visibility(-0.1).is_err());
        assert!(background_ratio_from_car(1.0).is_err());
    }

    #[test]
    fn classical_bound_is_strict() {
        assert!(!exceeds_classical_bound(FRAC_1_SQRT_2));
        assert!(exceeds_classical_bound(FRAC_1_SQRT_2 + 1e-15));
        assert!(!exceeds_classical_bound(0.701));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(xbasis_probabilities(&state(1.1), &amzi(0.0)).is_err());
        let s = TimeBinState {
            delay_tau_ps: 0.0,
            ..state(1.0)
        };
        assert!(xbasis_probabilities(&s, &amzi(0.0)).is_err());
        let a = AmziConfig {
            excess_loss_db: -1.0,
            ..amzi(0.0)
        };
        assert!(xbasis_probabilities(&state(1.0), &a).is_err());
    }

    #[test]
    fn total_loss_drops_everything() {
        let a = AmziConfig {
            intrinsic_loss_db: f64::INFINITY,
            ..amzi(0.0)
        };
        let router = AmziRouter::new(&state(1.0), &a).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..10_000 {
            assert_eq!(router.route_pair(&mut rng), (None, None));
            assert!(amzi_route(5.0, &router, &mut rng).is_none());
        }
    }

    #[test]
    fn eight_db_survival() {
        let router = AmziRouter::new(&state(1.0), &amzi(0.0)).unwrap();
        assert!((router.transmission() - 0.158_489_319_246_111_35).abs() < 1e-15);
        let mut rng = rng_from_seed(2);
        let n = 100_000;
        let kept = (0..n)
            .filter(|_| amzi_route(0.0, &router, &mut rng).is_some())
            .count() as f64;
        let p = router.transmission();
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((kept - n as f64 * p).abs() < 4.0 * sd);
    }

    #[test]
    fn relative_delay_has_three_values() {
        let router = AmziRouter::new(&state(0.9), &lossless(0.4)).unwrap();
        let tau = router.tau_ps();
        let mut rng = rng_from_seed(3);
        let mut seen = [0usize; 3];
        for _ in 0..10_000 {
            let d = router.assign_pair(&mut rng).relative_delay_ps();
            let k = if d == -tau {
                0
            } else if d == 0.0 {
                1
            } else if d == tau {
                2
            } else {
                panic!("unexpected delay {d}")
            };
            seen[k] += 1;
        }
        assert!(seen.iter().all(|&n| n > 0));
        // the central bin collects half of all surviving pairs
        assert!((seen[1] as f64 - 5000.0).abs() < 4.0 * 50.0);
    }

    #[test]
    fn perfect_fringe_suppresses_cross_ports() {
        let router = AmziRouter::new(&state(1.0), &lossless(0.0)).unwrap();
        let mut rng = rng_from_seed(4);
        let (mut central, mut cross) = (0u64, 0u64);
        for _ in 0..1_000_000 {
            if let (Some(s), Some(i)) = router.route_pair(&mut rng) {
                if s.delay_ps == i.delay_ps {
                    central += 1;
                    if s.port == Port::X0 && i.port == Port::X1 {
                        cross += 1;
                    }
                }
            }
        }
        assert!((cross as f64) / (central as f64) < 0.005);
    }

    #[test]
    fn central_bin_frequencies_within_three_sigma() {
        let router = AmziRouter::new(&state(0.8), &lossless(1.1)).unwrap();
        let probs = *router.probabilities();
        let mut rng = rng_from_seed(5);
        let mut counts = [[0u64; 2]; 2];
        let mut central = 0u64;
        while central < 100_000 {
            let pair = router.assign_pair(&mut rng);
            if pair.relative_delay_ps() == 0.0 {
                central += 1;
                counts[pair.signal.port.index()][pair.idler.port.index()] += 1;
            }
        }
        for s in [Port::X0, Port::X1] {
            for i in [Port::X0, Port::X1] {
                let p = probs.get(s, i);
                let n = central as f64;
                let sd = (n * p * (1.0 - p)).sqrt();
                let got = counts[s.index()][i.index()] as f64;
                assert!((got - n * p).abs() <= 3.0 * sd, "{s:?}{i:?}: {got} vs {}", n * p);
            }
        }
    }

    #[test]
    fn side_bins_are_flat() {
        let router = AmziRouter::new(&state(1.0), &lossless(0.0)).unwrap();
        let mut rng = rng_from_seed(6);
        let mut counts = [0u64; 4];
        let mut side = 0u64;
        while side < 40_000 {
            let pair = router.assign_pair(&mut rng);
            if pair.relative_delay_ps() != 0.0 {
                side += 1;
                counts[2 * pair.signal.port.index() + pair.idler.port.index()] += 1;
            }
        }
        let sd = (40_000.0f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() <= 3.0 * sd);
        }
    }

    proptest! {
        #[test]
        fn normalised_and_symmetric(v in 0.0..=1.0f64, t1 in -20.0..20.0f64, t2 in -20.0..20.0f64, dp in -20.0..20.0f64) {
            let cfg = AmziConfig { theta1: t1, theta2: t2, pump_phase_diff: dp, ..AmziConfig::default() };
            let p = xbasis_probabilities(&state(v), &cfg).unwrap();
            prop_assert!((p.p00 + p.p01 + p.p10 + p.p11 - 1.0).abs() <= 1e-12);
            prop_assert!((p.p00 - p.p11).abs() <= 1e-12);
            prop_assert!((p.p01 - p.p10).abs() <= 1e-12);
            for x in [p.p00, p.p01, p.p10, p.p11] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }

        #[test]
        fn two_pi_periodic(v in 0.0..=1.0f64, t in -10.0..10.0f64, which in 0usize..3) {
            let base = AmziConfig { theta1: t, theta2: 0.3, pump_phase_diff: -0.2, ..AmziConfig::default() };
            let mut shifted = base;
            match which {
                0 => shifted.theta1 += 2.0 * PI,
                1 => shifted.theta2 += 2.0 * PI,
                _ => shifted.pump_phase_diff += 2.0 * PI,
            }
            let a = xbasis_probabilities(&state(v), &base).unwrap();
            let b = xbasis_probabilities(&state(v), &shifted).unwrap();
            prop_assert!((a.p00 - b.p00).abs() <= 1e-12);
            prop_assert!((a.p01 - b.p01).abs() <= 1e-12);
        }

        #[test]
        fn fringe_contrast_is_source_visibility(v in 0.0..=1.0f64) {
            let mut max = f64::MIN;
            let mut min = f64::MAX;
            for i in 0..64 {
                let p = xbasis_probabilities(&state(v), &amzi(2.0 * PI * i as f64 / 64.0)).unwrap().p00;
                max = max.max(p);
                min = min.min(p);
            }
            prop_assert!(((max - min) / (max + min) - v).abs() <= 1e-12);
        }
    }
}
