//! SFWM channel pairs and pair-generation rates for single- and double-port pumping.

use alloc::format;
use alloc::vec::Vec;

use crate::diag::{Checker, Validate};
use crate::error::{Error, Result};
use crate::resonator::ResonanceComb;
use crate::sampling::{rng_from_seed, stratified_phases};

/// Ratio of the double-port to single-port peak coincidence rates, 975 over 432
/// counts per 300 s.
pub const DOUBLE_PORT_RATE_RATIO: f64 = 975.0 / 432.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PumpPorts {
    #[default]
    Single,
    Double,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct PumpConfig {
    pub wavelength_nm: f64,
    pub power_per_port_mw: f64,
    pub ports: PumpPorts,
    /// Whether the two counter-propagating pumps are mutually phase coherent.
    pub coherent: bool,
}

impl Default for PumpConfig {
    fn default() -> Self {
        PumpConfig {
            wavelength_nm: 1546.0593,
            power_per_port_mw: 0.5,
            ports: PumpPorts::Single,
            coherent: true,
        }
    }
}

impl Validate for PumpConfig {
    fn diagnose(&self, c: &mut Checker<'_>) {
        c.require("wavelength_nm", self.wavelength_nm, self.wavelength_nm > 0.0, "> 0");
        c.require(
            "power_per_port_mw",
            self.power_per_port_mw,
            self.power_per_port_mw >= 0.0,
            ">= 0",
        );
    }
}

impl PumpConfig {
    /// Warns when the pump sits more than half a linewidth from the nearest resonance.
    pub fn diagnose_detuning(&self, comb: &ResonanceComb, c: &mut Checker<'_>) {
        if !self.wavelength_nm.is_finite() {
            return;
        }
        let peak = comb.nearest(self.wavelength_nm);
        let detuning = self.wavelength_nm - peak.center_nm;
        if detuning.abs() > 0.5 * peak.fwhm_nm() {
            c.warning(
                "wavelength_nm",
                format!(
                    "pump is {detuning:.4} nm from the resonance at {:.4} nm (half FWHM {:.4} nm)",
                    peak.center_nm,
                    0.5 * peak.fwhm_nm()
                ),
            );
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChannelPair {
    pub order: u32,
    /// Blue photon, taken at the resonance `order` below the pump.
    pub signal_wavelength_nm: f64,
    /// Red photon, from energy conservation against the pump.
    pub idler_wavelength_nm: f64,
    /// Idler minus the red resonance centre it is supposed to fall on.
    pub idler_mismatch_nm: f64,
    /// Half the FWHM of that red resonance.
    pub idler_tolerance_nm: f64,
}

impl ChannelPair {
    pub fn idler_mismatched(&self) -> bool {
        self.idler_mismatch_nm.abs() > self.idler_tolerance_nm
    }

    /// `|1/λs + 1/λi - 2/λp| / (2/λp)`.
    pub fn energy_error(&self, pump_nm: f64) -> f64 {
        let p = 2.0 / pump_nm;
        ((1.0 / self.signal_wavelength_nm + 1.0 / self.idler_wavelength_nm) - p).abs() / p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SourceModel {
    /// On-chip pairs per second per mW² per channel pair.
    pub brightness: f64,
    /// Flat background counts per second on each detector.
    pub raman_background: f64,
}

impl Default for SourceModel {
    fn default() -> Self {
        SourceModel {
            brightness: 0.0,
            raman_background: 0.0,
        }
    }
}

impl Validate for SourceModel {
    fn diagnose(&self, c: &mut Checker<'_>) {
        c.require("brightness", self.brightness, self.brightness >= 0.0, ">= 0");
        c.require(
            "raman_background",
            self.raman_background,
            self.raman_background >= 0.0,
            ">= 0",
        );
    }
}

/// Signal/idler pairs for orders `1..=max_order`.
pub fn channel_pairs(comb: &ResonanceComb, pump: &PumpConfig, max_order: u32) -> Result<Vec<ChannelPair>> {
    pump.validate()?;
    if max_order > comb.side_count() {
        return Err(Error::InsufficientComb {
            requested: max_order,
            available: comb.side_count(),
        });
    }
    let inv_pump = 2.0 / pump.wavelength_nm;
    (1..=max_order)
        .map(|order| {
            let k = order as i32;
            let signal = comb.peak(-k).expect("order within comb");
            let red = comb.peak(k).expect("order within comb");
            let inv_idler = inv_pump - 1.0 / signal.center_nm;
            if inv_idler <= 0.0 {
                return Err(Error::invalid("order", "idler beyond infinite wavelength"));
            }
            let idler = 1.0 / inv_idler;
            Ok(ChannelPair {
                order,
                signal_wavelength_nm: signal.center_nm,
                idler_wavelength_nm: idler,
                idler_mismatch_nm: idler - red.center_nm,
                idler_tolerance_nm: 0.5 * red.fwhm_nm(),
            })
        })
        .collect()
}

/// Pairs per second: `brightness · P² · enhancement`.
pub fn pair_rate(source: &SourceModel, pump: &PumpConfig, enhancement: f64) -> Result<f64> {
    source.validate()?;
    pump.validate()?;
    if !(enhancement >= 0.0 && enhancement.is_finite()) {
        return Err(Error::invalid("enhancement", "must be finite and >= 0"));
    }
    let p = pump.power_per_port_mw;
    Ok(source.brightness * p * p * enhancement)
}

/// `⟨P²⟩` of the forward pump relative to single-port pumping.
///
/// Coherent pumps interfere as `P ∝ 1 + r² + 2r cos φ`; incoherent ones add in
/// power, `P ∝ 1 + r²`.
pub fn enhancement_closed_form(r: f64, coherent: bool) -> f64 {
    let base = 1.0 + r * r;
    if coherent {
        base * base + 2.0 * r * r
    } else {
        base * base
    }
}

/// Phase-averaged `⟨P²⟩` estimated from `phase_samples` stratified draws of φ.
pub fn double_port_enhancement(r: f64, coherent: bool, phase_samples: usize, seed: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::invalid("r", "must lie in [0, 1]"));
    }
    if phase_samples == 0 {
        return Err(Error::invalid("phase_samples", "must be at least 1"));
    }
    let base = 1.0 + r * r;
    if !coherent {
        return Ok(base * base);
    }
    let phases = stratified_phases(phase_samples, &mut rng_from_seed(seed));
    let sum: f64 = phases
        .iter()
        .map(|&phi| {
            let p = base + 2.0 * r * libm::cos(phi);
            p * p
        })
        .sum();
    Ok(sum / phase_samples as f64)
}

/// Reflection `r ∈ [0, 1]` whose coherent enhancement equals `target`, by bisection.
pub fn reflection_for_enhancement(target: f64) -> Result<f64> {
    let (min, max) = (enhancement_closed_form(0.0, true), enhancement_closed_form(1.0, true));
    if !(min..=max).contains(&target) {
        return Err(Error::Unreachable { target, min, max });
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if enhancement_closed_form(mid, true) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
