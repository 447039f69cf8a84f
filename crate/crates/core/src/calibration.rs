//! Expected coincidence rates through the loss, jitter and accidental chain, and
//! the inverse problems that fix source brightness and visibility from measured
//! counts.
//!
//! These are the analytic expectations of what [`crate::detection`] simulates;
//! Monte Carlo runs are checked against them, not the other way round.

use crate::detection::DetectorParams;
use crate::error::{Error, Result};
use crate::PS_PER_S;

/// Single-port first-pair fringe peak, counts per 300 s.
pub const SINGLE_PORT_PEAK_COUNTS: f64 = 432.0;
/// Double-port first-pair fringe peak, counts per 300 s.
pub const DOUBLE_PORT_PEAK_COUNTS: f64 = 975.0;
pub const PEAK_COUNT_INTERVAL_S: f64 = 300.0;

/// Measured (X0-X'0, X0-X'1) visibilities with fit errors.
pub const FIRST_PAIR_VISIBILITIES: [(f64, f64); 2] = [(0.8196, 0.0316), (0.9018, 0.0480)];
pub const SECOND_PAIR_VISIBILITIES: [(f64, f64); 2] = [(0.8222, 0.0222), (0.9503, 0.0338)];

/// Lowest CAR reported for the second pair.
pub const MIN_CAR: f64 = 350.0;
/// CAR the second-pair brightness is tuned to; leaves room above [`MIN_CAR`]
/// for Monte Carlo scatter.
pub const TARGET_CAR: f64 = 400.0;

/// Inverse-variance weighted mean and its standard error.
pub fn inverse_variance_mean(values: &[(f64, f64)]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("values", "empty"));
    }
    let (mut sw, mut swx) = (0.0, 0.0);
    for &(x, e) in values {
        if !(e > 0.0 && e.is_finite() && x.is_finite()) {
            return Err(Error::invalid("values", "errors must be finite and > 0"));
        }
        let w = 1.0 / (e * e);
        sw += w;
        swx += w * x;
    }
    Ok((swx / sw, libm::sqrt(1.0 / sw)))
}

/// Integer delays that round into the central histogram bin.
pub fn central_bin_width_ps(bin_width_ps: u64) -> u64 {
    2 * ((bin_width_ps.max(1) - 1) / 2) + 1
}

/// Fraction of true coincidences whose jittered delay lands in the central bin.
///
/// The delay error is Gaussian with `σ = hypot(σs, σi)`; rounding each tag to
/// 1 ps widens the accepted interval by half a picosecond on each side.
pub fn capture_fraction(jitter_s_ps: f64, jitter_i_ps: f64, bin_width_ps: u64) -> f64 {
    let sigma = libm::hypot(jitter_s_ps, jitter_i_ps);
    let half = central_bin_width_ps(bin_width_ps) as f64 / 2.0;
    if sigma == 0.0 {
        return 1.0;
    }
    libm::erf(half / (core::f64::consts::SQRT_2 * sigma))
}

/// Detectors and optics between the ring and the time tagger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionChain {
    /// Detector parameters with any flat background already folded into the dark rate.
    pub signal: DetectorParams,
    pub idler: DetectorParams,
    /// `None` for direct detection, otherwise the AMZI power transmission.
    pub amzi_transmission: Option<f64>,
    pub bin_width_ps: u64,
}

impl DetectionChain {
    fn outputs(&self) -> f64 {
        if self.amzi_transmission.is_some() {
            2.0
        } else {
            1.0
        }
    }

    fn optics(&self) -> f64 {
        self.amzi_transmission.unwrap_or(1.0)
    }

    /// Click rates at one signal and one idler detector before dead time.
    pub fn singles(&self, pair_rate: f64) -> (f64, f64) {
        let n = self.outputs();
        (
            pair_rate * self.signal.efficiency() * self.optics() / n + self.signal.dark_rate,
            pair_rate * self.idler.efficiency() * self.optics() / n + self.idler.dark_rate,
        )
    }

    /// Fraction of clicks surviving dead time at each detector (non-paralysable).
    pub fn live_fractions(&self, pair_rate: f64) -> (f64, f64) {
        let (s, i) = self.singles(pair_rate);
        (
            1.0 / (1.0 + s * self.signal.dead_time_ns * 1e-9),
            1.0 / (1.0 + i * self.idler.dead_time_ns * 1e-9),
        )
    }

    fn capture(&self) -> f64 {
        capture_fraction(self.signal.jitter_sigma_ps, self.idler.jitter_sigma_ps, self.bin_width_ps)
    }

    /// Accidentals per second in a window of `width_ps`, after dead time.
    pub fn accidental_rate(&self, pair_rate: f64, width_ps: f64) -> f64 {
        let (s, i) = self.singles(pair_rate);
        let (ls, li) = self.live_fractions(pair_rate);
        s * ls * i * li * width_ps / PS_PER_S
    }

    /// True coincidences per second reaching a detector pair with both photons in
    /// the same arm, before port statistics and window capture.
    fn same_arm_rate(&self, pair_rate: f64) -> f64 {
        let (ls, li) = self.live_fractions(pair_rate);
        let t = self.optics();
        let arms = if self.amzi_transmission.is_some() { 0.5 } else { 1.0 };
        pair_rate * self.signal.efficiency() * self.idler.efficiency() * t * t * arms * ls * li
    }
}

/// CAR that [`crate::detection::car_report`] should return on average for a
/// single-bin peak window, direct detection.
pub fn expected_car(pair_rate: f64, chain: &DetectionChain) -> f64 {
    let bw = chain.bin_width_ps;
    let true_rate = chain.same_arm_rate(pair_rate) * chain.capture();
    let peak_acc = chain.accidental_rate(pair_rate, central_bin_width_ps(bw) as f64);
    let wing_acc = chain.accidental_rate(pair_rate, bw as f64);
    (true_rate + peak_acc) / wing_acc
}

/// Pair rate on the bright side of the CAR maximum that gives `target` CAR.
pub fn pair_rate_for_car(target: f64, chain: &DetectionChain) -> Result<f64> {
    let f = |ln_r: f64| expected_car(libm::exp(ln_r), chain);
    // CAR falls at high rate (accidentals ∝ R²) and at low rate (darks); scan for the maximum
    let (mut best, mut best_ln) = (f64::NEG_INFINITY, 0.0);
    let mut ln_r = 0.0;
    while ln_r <= 50.0 {
        let v = f(ln_r);
        if v > best {
            best = v;
            best_ln = ln_r;
        }
        ln_r += 0.05;
    }
    let floor = f(50.0);
    if !(target > floor && target <= best) {
        return Err(Error::Unreachable {
            target,
            min: floor,
            max: best,
        });
    }
    let (mut lo, mut hi) = (best_ln, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(libm::exp(0.5 * (lo + hi)))
}

/// Expected fitted fringe of one X-basis coincidence column (rates per second).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct XBasisExpectation {
    /// True central-bin coincidences averaged over phase, `K/4`.
    pub true_mean: f64,
    pub accidental: f64,
    pub mean_level: f64,
    pub amplitude: f64,
    pub peak: f64,
    /// Fringe visibility after accidentals.
    pub visibility: f64,
}

pub fn expected_xbasis(pair_rate: f64, visibility_source: f64, chain: &DetectionChain) -> XBasisExpectation {
    let true_mean = 0.25 * chain.same_arm_rate(pair_rate) * chain.capture();
    let accidental = chain.accidental_rate(pair_rate, central_bin_width_ps(chain.bin_width_ps) as f64);
    let mean_level = true_mean + accidental;
    let amplitude = visibility_source * true_mean;
    XBasisExpectation {
        true_mean,
        accidental,
        mean_level,
        amplitude,
        peak: mean_level + amplitude,
        visibility: if mean_level > 0.0 { amplitude / mean_level } else { 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct XBasisCalibration {
    pub pair_rate: f64,
    pub visibility_source: f64,
}

/// Pair rate and source visibility whose expected fringe has the given peak rate
/// and fitted visibility.
pub fn calibrate_xbasis(target_peak_rate: f64, target_visibility: f64, chain: &DetectionChain) -> Result<XBasisCalibration> {
    if !(target_peak_rate > 0.0 && target_peak_rate.is_finite()) {
        return Err(Error::invalid("target_peak_rate", "must be finite and > 0"));
    }
    if !(0.0..1.0).contains(&target_visibility) {
        return Err(Error::invalid("target_visibility", "must lie in [0, 1)"));
    }
    let level = target_peak_rate / (1.0 + target_visibility);
    let mean_at = |ln_r: f64| expected_xbasis(libm::exp(ln_r), 0.0, chain).mean_level;
    let (mut lo, mut hi) = (-30.0_f64, 50.0_f64);
    if mean_at(lo) >= level {
        return Err(Error::Unreachable {
            target: target_peak_rate,
            min: mean_at(lo) * (1.0 + target_visibility),
            max: f64::INFINITY,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pair_rate = libm::exp(0.5 * (lo + hi));
    let e = expected_xbasis(pair_rate, 0.0, chain);
    let visibility_source = target_visibility * e.mean_level / e.true_mean;
    if visibility_source > 1.0 {
        return Err(Error::Unreachable {
            target: target_visibility,
            min: 0.0,
            max: e.true_mean / e.mean_level,
        });
    }
    Ok(XBasisCalibration {
        pair_rate,
        visibility_source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timebin::AmziConfig;

    fn chain(amzi: bool) -> DetectionChain {
        DetectionChain {
            signal: DetectorParams::default(),
            idler: DetectorParams {
                channel_loss_db: 29.0,
                ..DetectorParams::default()
            },
            amzi_transmission: amzi.then(|| AmziConfig::default().transmission()),
            bin_width_ps: 64,
        }
    }

    #[test]
    fn paper_visibility_means() {
        // weighted means evaluated independently at 30 digits
        let (m1, e1) = inverse_variance_mean(&FIRST_PAIR_VISIBILITIES).unwrap();
        assert!((m1 - 0.844_453_941_185_020_1).abs() < 1e-12);
        assert!((e1 - 0.026_393_863_220_394_89).abs() < 1e-12);
        let (m2, _) = inverse_variance_mean(&SECOND_PAIR_VISIBILITIES).unwrap();
        assert!((m2 - 0.860_806_724_230_712_8).abs() < 1e-12);
        assert!(inverse_variance_mean(&[]).is_err());
    }

    #[test]
    fn capture_for_thirty_ps_detectors() {
        // erf(31.5 / (√2 · 30√2)) to 30 digits
        assert!((capture_fraction(30.0, 30.0, 64) - 0.542_192_605_809_058_2).abs() < 1e-14);
        assert_eq!(central_bin_width_ps(64), 63);
        assert_eq!(central_bin_width_ps(65), 65);
        assert_eq!(capture_fraction(0.0, 0.0, 64), 1.0);
    }

    #[test]
    fn car_branch_and_round_trip() {
        let c = chain(false);
        let r = pair_rate_for_car(TARGET_CAR, &c).unwrap();
        assert!((expected_car(r, &c) - TARGET_CAR).abs() < 1e-6);
        // bright side: more pairs lower the CAR
        assert!(expected_car(1.1 * r, &c) < TARGET_CAR);
        assert!(pair_rate_for_car(1e9, &c).is_err());
    }

    #[test]
    fn xbasis_round_trip() {
        let c = chain(true);
        let target = SINGLE_PORT_PEAK_COUNTS / PEAK_COUNT_INTERVAL_S;
        let cal = calibrate_xbasis(target, 0.8445, &c).unwrap();
        let e = expected_xbasis(cal.pair_rate, cal.visibility_source, &c);
        assert!((e.peak - target).abs() < 1e-9 * target);
        assert!((e.visibility - 0.8445).abs() < 1e-9);
        assert!(cal.visibility_source > 0.8445 && cal.visibility_source < 1.0);
    }

    #[test]
    fn default_chain_matches_reference() {
        // independent 30-digit evaluation of the same chain (root finding on the
        // closed-form rates, not this module)
        let first = calibrate_xbasis(432.0 / 300.0, 0.844_453_941_185_020_1, &chain(true)).unwrap();
        assert!((first.pair_rate / 219_055_743.148_769_37 - 1.0).abs() < 1e-9);
        assert!((first.visibility_source - 0.887_795_647_805_826_7).abs() < 1e-9);

        let r2 = pair_rate_for_car(400.0, &chain(false)).unwrap();
        assert!((r2 / 21_088_882.211_572_727 - 1.0).abs() < 1e-9);
        let second = expected_xbasis(r2, 0.0, &chain(true));
        let v2 = 0.860_806_724_230_712_8 * second.mean_level / second.true_mean;
        assert!((v2 - 0.865_392_765_229_843_8).abs() < 1e-9);

        let single = expected_xbasis(first.pair_rate, first.visibility_source, &chain(true));
        let double = expected_xbasis(first.pair_rate * 975.0 / 432.0, first.visibility_source, &chain(true));
        assert!((double.peak / single.peak - 2.325_647_720_627_041).abs() < 1e-9);
    }

    #[test]
    fn accidentals_cap_the_visibility() {
        let c = DetectionChain {
            signal: DetectorParams {
                dark_rate: 1e7,
                ..DetectorParams::default()
            },
            ..chain(true)
        };
        assert!(matches!(
            calibrate_xbasis(1.44, 0.95, &c),
            Err(Error::Unreachable { .. })
        ));
    }
}
