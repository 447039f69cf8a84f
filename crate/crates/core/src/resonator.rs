//! Resonance comb, drop-port line shape and the counter-propagating pump fringe.
//!
//! Peaks are Lorentzian, `T(λ) = t_peak / (1 + (2Q(λ-λ0)/λ0)^2)`, and adjacent
//! resonances are separated by the free spectral range `λ²/(2πR·n_g)`. The comb is
//! laid out uniformly in inverse wavelength, which is the exact form of that
//! relation between neighbours: `λ_{k+1} - λ_k = λ_k·λ_{k+1}/(2πR·n_g)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::diag::{Checker, Validate};
use crate::error::{Error, Result};
use crate::sampling::{rng_from_seed, stratified_phases, RunningStats};

/// Group index assumed for the silicon wire when none is measured.
pub const DEFAULT_GROUP_INDEX: f64 = 4.3;

/// Resonance tuning slope, nm per kelvin.
pub const DEFAULT_THERMAL_SHIFT_NM_PER_K: f64 = 0.08;

/// Backscatter amplitude whose coherent double-pump enhancement equals 975/432.
/// Frozen from [`crate::pairgen::reflection_for_enhancement`].
pub const DEFAULT_BACKSCATTER_R: f64 = 0.541_112_510_204_302;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct RingParams {
    pub radius_um: f64,
    pub group_index: f64,
    pub q_factor: f64,
    /// Peak drop-port power transmission.
    pub t_drop_peak: f64,
    /// Wavelength of the pumped resonance at `anchor_temperature_c`.
    pub anchor_wavelength_nm: f64,
    pub anchor_temperature_c: f64,
    pub thermal_shift_nm_per_k: f64,
    /// Amplitude reflection of the counter-propagating pump inside the ring.
    pub backscatter_r: f64,
    /// Phase slope of the reflected field, radians per nm of detuning.
    pub backscatter_phase_slope: f64,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams {
            radius_um: 10.0,
            group_index: DEFAULT_GROUP_INDEX,
            q_factor: 8000.0,
            t_drop_peak: 0.5,
            anchor_wavelength_nm: 1546.0593,
            anchor_temperature_c: 28.907,
            thermal_shift_nm_per_k: DEFAULT_THERMAL_SHIFT_NM_PER_K,
            backscatter_r: DEFAULT_BACKSCATTER_R,
            backscatter_phase_slope: 100.0,
        }
    }
}

impl RingParams {
    /// Optical round-trip length `2πR·n_g` in nm.
    pub fn group_length_nm(&self) -> f64 {
        2.0 * PI * self.radius_um * 1e3 * self.group_index
    }

    /// Local free spectral range at `wavelength_nm`.
    pub fn fsr_nm(&self, wavelength_nm: f64) -> f64 {
        wavelength_nm * wavelength_nm / self.group_length_nm()
    }

    /// Centre of the pumped resonance at `temperature_c`.
    pub fn pump_resonance_nm(&self, temperature_c: f64) -> f64 {
        self.anchor_wavelength_nm
            + self.thermal_shift_nm_per_k * (temperature_c - self.anchor_temperature_c)
    }
}

impl Validate for RingParams {
    fn diagnose(&self, c: &mut Checker<'_>) {
        c.require("radius_um", self.radius_um, self.radius_um > 0.0, "> 0");
        c.require("group_index", self.group_index, self.group_index > 1.0, "> 1");
        c.require("q_factor", self.q_factor, self.q_factor > 0.0, "> 0");
        c.require(
            "t_drop_peak",
            self.t_drop_peak,
            (0.0..=1.0).contains(&self.t_drop_peak),
            "in [0, 1]",
        );
        c.require(
            "anchor_wavelength_nm",
            self.anchor_wavelength_nm,
            self.anchor_wavelength_nm > 0.0,
            "> 0",
        );
        c.require("anchor_temperature_c", self.anchor_temperature_c, true, "");
        c.require("thermal_shift_nm_per_k", self.thermal_shift_nm_per_k, true, "");
        c.require(
            "backscatter_r",
            self.backscatter_r,
            (0.0..=1.0).contains(&self.backscatter_r),
            "in [0, 1]",
        );
        c.require("backscatter_phase_slope", self.backscatter_phase_slope, true, "");
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Peak {
    /// Position relative to the pumped resonance (0).
    pub index: i32,
    pub center_nm: f64,
    pub q_factor: f64,
}

impl Peak {
    pub fn fwhm_nm(&self) -> f64 {
        self.center_nm / self.q_factor
    }

    /// Lorentzian power response normalised to 1 on resonance.
    #[inline]
    pub fn lorentzian(&self, wavelength_nm: f64) -> f64 {
        let x = 2.0 * self.q_factor * (wavelength_nm - self.center_nm) / self.center_nm;
        1.0 / (1.0 + x * x)
    }
}

/// Resonances ordered by index; index 0 is the pumped resonance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ResonanceComb {
    peaks: Vec<Peak>,
}

impl ResonanceComb {
    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    /// Number of resonances on each side of the pump.
    pub fn side_count(&self) -> u32 {
        (self.peaks.len() / 2) as u32
    }

    pub fn peak(&self, index: i32) -> Option<&Peak> {
        let n = self.side_count() as i32;
        if index.abs() > n {
            return None;
        }
        self.peaks.get((index + n) as usize)
    }

    pub fn pump_peak(&self) -> &Peak {
        &self.peaks[self.side_count() as usize]
    }

    /// Wavelength range over which spectra are tabulated: half a local FSR beyond
    /// the outermost peaks.
    pub fn span_nm(&self) -> (f64, f64) {
        let first = self.peaks[0].center_nm;
        let second = self.peaks.get(1).map_or(first, |p| p.center_nm);
        let last = self.peaks[self.peaks.len() - 1].center_nm;
        let before_last = self
            .peaks
            .len()
            .checked_sub(2)
            .map_or(last, |i| self.peaks[i].center_nm);
        (
            first - 0.5 * (second - first),
            last + 0.5 * (last - before_last),
        )
    }

    /// Peak closest to `wavelength_nm`.
    pub fn nearest(&self, wavelength_nm: f64) -> &Peak {
        let i = self
            .peaks
            .partition_point(|p| p.center_nm < wavelength_nm);
        if i == 0 {
            &self.peaks[0]
        } else if i == self.peaks.len() {
            &self.peaks[i - 1]
        } else {
            let lo = &self.peaks[i - 1];
            let hi = &self.peaks[i];
            if wavelength_nm - lo.center_nm <= hi.center_nm - wavelength_nm {
                lo
            } else {
                hi
            }
        }
    }
}

/// Builds `2·n_side + 1` resonances centred on the pumped one, shifted thermally to
/// `temperature_c`.
pub fn resonance_comb(params: &RingParams, temperature_c: f64, n_side: u32) -> Result<ResonanceComb> {
    params.validate()?;
    if n_side < 1 {
        return Err(Error::invalid("n_side", "must be at least 1"));
    }
    if !temperature_c.is_finite() {
        return Err(Error::invalid("temperature_c", "must be finite"));
    }
    let inv_anchor = 1.0 / params.anchor_wavelength_nm;
    let inv_length = 1.0 / params.group_length_nm();
    let shift = params.thermal_shift_nm_per_k * (temperature_c - params.anchor_temperature_c);
    let n = n_side as i32;
    let mut peaks = Vec::with_capacity(2 * n_side as usize + 1);
    for index in -n..=n {
        let inv = inv_anchor - index as f64 * inv_length;
        if inv <= 0.0 {
            return Err(Error::invalid("n_side", "comb extends past infinite wavelength"));
        }
        peaks.push(Peak {
            index,
            center_nm: 1.0 / inv + shift,
            q_factor: params.q_factor,
        });
    }
    Ok(ResonanceComb { peaks })
}

/// Drop-port power transmission at `wavelength_nm`, from the nearest resonance.
pub fn drop_transmission(params: &RingParams, comb: &ResonanceComb, wavelength_nm: f64) -> Result<f64> {
    let (min_nm, max_nm) = comb.span_nm();
    if !(min_nm..=max_nm).contains(&wavelength_nm) {
        return Err(Error::OutOfSpan {
            wavelength_nm,
            min_nm,
            max_nm,
        });
    }
    Ok(params.t_drop_peak * comb.nearest(wavelength_nm).lorentzian(wavelength_nm))
}

/// Intracavity forward power factor `|1 + r·e^{iδ}|²` of the pump interfering with
/// its own backscattered counter-propagating copy.
#[inline]
pub fn pump_interference(r: f64, delta: f64) -> f64 {
    (Complex64::new(1.0, 0.0) + Complex64::from_polar(r, delta)).norm_sqr()
}

/// One point of a tabulated spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpectrumPoint {
    pub wavelength_nm: f64,
    pub mean: f64,
    pub std: f64,
}

/// Single-port drop spectrum on `grid` (zero spread).
pub fn drop_spectrum(params: &RingParams, comb: &ResonanceComb, grid: &[f64]) -> Result<Vec<SpectrumPoint>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    grid.iter()
        .map(|&wavelength_nm| {
            Ok(SpectrumPoint {
                wavelength_nm,
                mean: drop_transmission(params, comb, wavelength_nm)?,
                std: 0.0,
            })
        })
        .collect()
}

/// Drop spectrum under coherent pumping from both add ports.
///
/// Each of `phase_samples` realisations draws one relative pump phase φ and applies
/// it to the whole grid, so a single realisation shows the fringe
/// `|1 + r·e^{i(φ + s(λ-λ0))}|²` across the resonance. The returned mean and sample
/// standard deviation are taken over realisations at every wavelength. Samples are
/// normalised by `(1 + r)²` so each stays within the single-port transmission.
pub fn double_pump_drop_spectrum(
    params: &RingParams,
    comb: &ResonanceComb,
    grid: &[f64],
    phase_samples: usize,
    seed: u64,
) -> Result<Vec<SpectrumPoint>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if phase_samples < 2 {
        return Err(Error::invalid("phase_samples", "must be at least 2"));
    }
    let r = params.backscatter_r;
    let slope = params.backscatter_phase_slope;
    let norm = (1.0 + r) * (1.0 + r);
    let phases = stratified_phases(phase_samples, &mut rng_from_seed(seed));

    grid.iter()
        .map(|&wavelength_nm| {
            let base = drop_transmission(params, comb, wavelength_nm)?;
            let detuning = wavelength_nm - comb.nearest(wavelength_nm).center_nm;
            let mut stats = RunningStats::default();
            for &phi in &phases {
                stats.push(base * pump_interference(r, phi + slope * detuning) / norm);
            }
            Ok(SpectrumPoint {
                wavelength_nm,
                mean: stats.mean(),
                std: stats.std_dev(),
            })
        })
        .collect()
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring() -> RingParams {
        RingParams::default()
    }

    // Reference values evaluated independently at 30 digits:
    // L = 2π·10⁴·4.3 nm, FSR = λ0²/L, λ±k = 1/(1/λ0 ∓ k/L).
    const FSR_AT_ANCHOR: f64 = 8.847_161_824_948_346;
    const PEAK_MINUS_1: f64 = 1537.262_477_069_563;
    const PEAK_PLUS_1: f64 = 1554.957_380_153_273;
    const PEAK_MINUS_2: f64 = 1528.565_192_729_904;
    const PEAK_PLUS_2: f64 = 1563.958_475_955_643;

    #[test]
    fn fsr_near_pump() {
        let p = ring();
        assert!((p.fsr_nm(p.anchor_wavelength_nm) - FSR_AT_ANCHOR).abs() < 1e-9);
    }

    #[test]
    fn comb_first_and_second_neighbours() {
        let p = ring();
        let comb = resonance_comb(&p, p.anchor_temperature_c, 2).unwrap();
        assert_eq!(comb.peaks().len(), 5);
        assert_eq!(comb.pump_peak().index, 0);
        assert_eq!(comb.pump_peak().center_nm, 1546.0593);
        assert!((comb.peak(-1).unwrap().center_nm - PEAK_MINUS_1).abs() < 1e-9);
        assert!((comb.peak(1).unwrap().center_nm - PEAK_PLUS_1).abs() < 1e-9);
        assert!((comb.peak(-2).unwrap().center_nm - PEAK_MINUS_2).abs() < 1e-9);
        assert!((comb.peak(2).unwrap().center_nm - PEAK_PLUS_2).abs() < 1e-9);
        // roughly 1537.2 / 1555.0 as quoted for a hand calculation
        assert!((comb.peak(-1).unwrap().center_nm - 1537.2).abs() < 0.1);
        assert!((comb.peak(1).unwrap().center_nm - 1555.0).abs() < 0.1);
    }

    #[test]
    fn neighbour_spacing_is_local_fsr() {
        let p = ring();
        let comb = resonance_comb(&p, p.anchor_temperature_c, 4).unwrap();
        for w in comb.peaks().windows(2) {
            let (a, b) = (w[0].center_nm, w[1].center_nm);
            assert!(((b - a) - a * b / p.group_length_nm()).abs() < 1e-9);
        }
    }

    #[test]
    fn anchor_temperature_gives_anchor_comb() {
        let p = ring();
        let a = resonance_comb(&p, p.anchor_temperature_c, 3).unwrap();
        let b = resonance_comb(&p, 28.907, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thermal_shift_moves_every_peak() {
        let p = ring();
        let cold = resonance_comb(&p, 28.907, 2).unwrap();
        let warm = resonance_comb(&p, 32.207, 2).unwrap();
        for (c, w) in cold.peaks().iter().zip(warm.peaks()) {
            assert!((w.center_nm - c.center_nm - 0.08 * 3.3).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = ring();
        p.q_factor = -1.0;
        assert!(matches!(
            resonance_comb(&p, 28.9, 1),
            Err(Error::InvalidParameter { ref field, .. }) if field == "q_factor"
        ));
        let mut p = ring();
        p.group_index = 1.0;
        assert!(resonance_comb(&p, 28.9, 1).is_err());
        let mut p = ring();
        p.backscatter_r = 1.5;
        assert!(resonance_comb(&p, 28.9, 1).is_err());
        assert!(resonance_comb(&ring(), 28.9, 0).is_err());
    }

    #[test]
    fn on_resonance_and_half_width() {
        let p = ring();
        let comb = resonance_comb(&p, p.anchor_temperature_c, 2).unwrap();
        let l0 = comb.pump_peak().center_nm;
        assert_eq!(drop_transmission(&p, &comb, l0).unwrap(), p.t_drop_peak);
        let half = l0 * (1.0 + 1.0 / (2.0 * p.q_factor));
        let t = drop_transmission(&p, &comb, half).unwrap();
        assert!((t - p.t_drop_peak / 2.0).abs() < 1e-12);
    }

    #[test]
    fn fwhm_for_q_8000() {
        let peak = Peak {
            index: 0,
            center_nm: 1546.06,
            q_factor: 8000.0,
        };
        // 1546.06 / 8000 by hand
        assert!((peak.fwhm_nm() - 0.193_257_5).abs() < 1e-9);
    }

    #[test]
    fn outside_span_is_rejected() {
        let p = ring();
        let comb = resonance_comb(&p, p.anchor_temperature_c, 1).unwrap();
        assert!(matches!(
            drop_transmission(&p, &comb, 1500.0),
            Err(Error::OutOfSpan { .. })
        ));
    }

    #[test]
    fn double_pump_without_reflection_is_single_port() {
        let mut p = ring();
        p.backscatter_r = 0.0;
        let comb = resonance_comb(&p, p.anchor_temperature_c, 1).unwrap();
        let l0 = comb.pump_peak().center_nm;
        let grid = linspace(l0 - 1.0, l0 + 1.0, 201);
        for seed in [0, 1, 99] {
            let spec = double_pump_drop_spectrum(&p, &comb, &grid, 10, seed).unwrap();
            for pt in spec {
                let t = drop_transmission(&p, &comb, pt.wavelength_nm).unwrap();
                assert!((pt.mean - t).abs() <= 1e-12);
                assert_eq!(pt.std, 0.0);
            }
        }
    }

    #[test]
    fn reflection_fluctuates_most_on_resonance() {
        let p = ring();
        let comb = resonance_comb(&p, p.anchor_temperature_c, 1).unwrap();
        let l0 = comb.pump_peak().center_nm;
        let fwhm = comb.pump_peak().fwhm_nm();
        let grid = [l0, l0 + 0.3 * fwhm, l0 + 5.0 * fwhm, l0 - 5.5 * fwhm];
        let spec = double_pump_drop_spectrum(&p, &comb, &grid, 10, 3).unwrap();
        assert!(spec[0].std > spec[2].std && spec[0].std > spec[3].std);
        assert!(spec[1].std > spec[2].std);
    }

    #[test]
    fn fixed_phase_fringe_period() {
        // Closed form |1 + r e^{iδ}|² = 1 + r² + 2r cos δ, periodic in λ with 2π/s.
        let r = 0.4;
        let s = 100.0;
        let period = 2.0 * PI / s;
        for i in 0..50 {
            let dl = -0.2 + 0.008 * i as f64;
            let a = pump_interference(r, 0.3 + s * dl);
            let b = pump_interference(r, 0.3 + s * (dl + period));
            let closed = 1.0 + r * r + 2.0 * r * libm::cos(0.3 + s * dl);
            assert!((a - closed).abs() < 1e-12);
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn phase_average_of_interference() {
        let r = 0.7;
        let phases = stratified_phases(10_000, &mut rng_from_seed(5));
        let mean = phases.iter().map(|&p| pump_interference(r, p)).sum::<f64>() / 10_000.0;
        assert!((mean - (1.0 + r * r)).abs() / (1.0 + r * r) < 0.01);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let p = ring();
        let comb = resonance_comb(&p, p.anchor_temperature_c, 1).unwrap();
        assert_eq!(double_pump_drop_spectrum(&p, &comb, &[], 10, 0), Err(Error::EmptyGrid));
        assert_eq!(drop_spectrum(&p, &comb, &[]), Err(Error::EmptyGrid));
    }

    proptest! {
        #[test]
        fn transmittance_in_unit_interval(
            t_peak in 0.0..=1.0f64,
            r in 0.0..=1.0f64,
            q in 500.0..50_000.0f64,
            offset in -4.0..4.0f64,
            seed in any::<u64>(),
        ) {
            let p = RingParams { t_drop_peak: t_peak, backscatter_r: r, q_factor: q, ..ring() };
            let comb = resonance_comb(&p, p.anchor_temperature_c, 1).unwrap();
            let l = comb.pump_peak().center_nm + offset;
            let t = drop_transmission(&p, &comb, l).unwrap();
            prop_assert!((0.0..=1.0).contains(&t));
            let spec = double_pump_drop_spectrum(&p, &comb, &[l], 4, seed).unwrap();
            prop_assert!(spec[0].mean >= 0.0 && spec[0].mean <= 1.0);
            prop_assert!(spec[0].mean <= t * (1.0 + 1e-12));
        }

        #[test]
        fn line_shape_symmetric_about_each_peak(k in -2i32..=2, d in 1e-4..2.0f64) {
            let p = ring();
            let comb = resonance_comb(&p, 30.0, 2).unwrap();
            let c = comb.peak(k).unwrap().center_nm;
            let lo = drop_transmission(&p, &comb, c - d).unwrap();
            let hi = drop_transmission(&p, &comb, c + d).unwrap();
            prop_assert!((lo - hi).abs() <= 1e-9 * lo.max(hi));
        }
    }
}
