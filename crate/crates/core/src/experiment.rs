//! Per-trial pipelines: ring → pairs → AMZI → detectors → histograms and fits.
//!
//! Every function here is pure given its seed, so trials can be farmed out to
//! threads in any order and reassembled by index.

use alloc::vec::Vec;

use crate::analysis::{FringeSweep, SweepPoint};
use crate::calibration::{expected_car, expected_xbasis, DetectionChain, XBasisExpectation};
use crate::detection::{
    car_report, coincidence_histogram, simulate_routed_streams, simulate_streams, window_coincidences,
    CarReport, CoincidenceHistogram, DetectorParams, TimeTagStream,
};
use crate::error::{Error, Result};
use crate::pairgen::{channel_pairs, double_port_enhancement, pair_rate, ChannelPair, PumpPorts, SourceModel};
use crate::resonator::{
    double_pump_drop_spectrum, drop_spectrum, linspace, resonance_comb, Peak, ResonanceComb, RingParams,
    SpectrumPoint,
};
use crate::sampling::trial_seed;
use crate::scenario::Scenario;
use crate::timebin::{AmziRouter, TimeBinState};
use crate::diag::Validate;

/// Resolved parameters of one measured channel pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChannelPlan {
    pub order: u32,
    pub signal_wavelength_nm: f64,
    pub idler_wavelength_nm: f64,
    pub brightness: f64,
    /// Pairs per second into one drop port.
    pub pair_rate: f64,
    pub visibility_source: f64,
    pub accumulation_s: f64,
}

/// Which pumping configuration a sweep is simulated under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// Drop port `0` or `1` under the scenario's pumping.
    Port(u32),
    /// Same channel pumped from one port only.
    SinglePortReference,
}

impl Arm {
    fn stream(self) -> u64 {
        match self {
            Arm::Port(p) => p as u64,
            Arm::SinglePortReference => 2,
        }
    }
}

pub fn comb(s: &Scenario) -> Result<ResonanceComb> {
    resonance_comb(&s.ring, s.ring_temperature_c, s.comb_side_count())
}

/// `⟨P²⟩` enhancement of the scenario's pumping relative to one port.
pub fn enhancement(s: &Scenario) -> Result<f64> {
    match s.pump.ports {
        PumpPorts::Single => Ok(1.0),
        PumpPorts::Double => double_port_enhancement(
            s.ring.backscatter_r,
            s.pump.coherent,
            s.enhancement_samples,
            s.seed,
        ),
    }
}

pub fn plan_channels(s: &Scenario, enhancement: f64) -> Result<Vec<ChannelPlan>> {
    s.validate()?;
    let comb = comb(s)?;
    let pairs = channel_pairs(&comb, &s.pump, s.max_order())?;
    s.channels
        .iter()
        .map(|ch| {
            let pair: &ChannelPair = &pairs[ch.order as usize - 1];
            let brightness = ch.brightness.unwrap_or(s.source.brightness);
            let source = SourceModel {
                brightness,
                ..s.source
            };
            Ok(ChannelPlan {
                order: ch.order,
                signal_wavelength_nm: pair.signal_wavelength_nm,
                idler_wavelength_nm: pair.idler_wavelength_nm,
                brightness,
                pair_rate: pair_rate(&source, &s.pump, enhancement)?,
                visibility_source: ch.visibility_source.unwrap_or(s.state.visibility_source),
                accumulation_s: ch.duration_s.unwrap_or(s.duration_s),
            })
        })
        .collect()
}

fn detectors(s: &Scenario) -> (DetectorParams, DetectorParams) {
    let bg = s.source.raman_background;
    (
        s.detectors.signal.with_background(bg),
        s.detectors.idler.with_background(bg),
    )
}

/// Analytic detection chain matching the scenario's Monte Carlo.
pub fn detection_chain(s: &Scenario, with_amzi: bool) -> DetectionChain {
    let (signal, idler) = detectors(s);
    DetectionChain {
        signal,
        idler,
        amzi_transmission: with_amzi.then(|| s.amzi.transmission()),
        bin_width_ps: s.histogram.bin_width_ps,
    }
}

/// Seed of one sweep repeat. Index 0 is left to the enhancement estimate.
pub fn sweep_seed(s: &Scenario, arm: Arm, channel: usize, point: usize, repeat: u32) -> u64 {
    let points = s.sweep.map_or(1, |w| w.points) as u64;
    let channels = s.channels.len() as u64;
    let index = ((arm.stream() * channels + channel as u64) * points + point as u64) * s.repeats as u64
        + repeat as u64;
    trial_seed(s.seed, 1 + index)
}

/// Seed of the CAR acquisition of a channel.
pub fn car_seed(s: &Scenario, channel: usize) -> u64 {
    trial_seed(s.seed, 1 + channel as u64)
}

/// X0-X'0 and X0-X'1 coincidences of one repeat at one PLC temperature.
pub fn sweep_repeat(s: &Scenario, plan: &ChannelPlan, temperature_c: f64, seed: u64) -> Result<(u64, u64)> {
    let state = TimeBinState {
        visibility_source: plan.visibility_source,
        ..s.state
    };
    let router = AmziRouter::new(&state, &s.amzi.at_temperature(temperature_c))?;
    let (ds, di) = detectors(s);
    let streams = simulate_routed_streams(plan.pair_rate, &ds, &di, plan.accumulation_s, seed, &router)?;
    let bw = s.histogram.bin_width_ps;
    Ok((
        window_coincidences(&streams.signal[0], &streams.idler[0], bw)?,
        window_coincidences(&streams.signal[0], &streams.idler[1], bw)?,
    ))
}

/// Sums repeats into a sweep. `counts[point][repeat]` holds `(c00, c01)`.
pub fn assemble_sweep(s: &Scenario, plan: &ChannelPlan, counts: &[Vec<(u64, u64)>]) -> Result<FringeSweep> {
    let temps = s
        .sweep
        .ok_or_else(|| Error::invalid("sweep", "missing"))?
        .temperatures();
    if temps.len() != counts.len() {
        return Err(Error::invalid("counts", "one entry per sweep point expected"));
    }
    let points = temps
        .iter()
        .zip(counts)
        .map(|(&t, reps)| SweepPoint {
            temperature_c: t,
            counts_00: reps.iter().map(|c| c.0).sum(),
            counts_01: reps.iter().map(|c| c.1).sum(),
            accumulation_s: plan.accumulation_s,
        })
        .collect();
    Ok(FringeSweep {
        points,
        repeats: s.repeats,
    })
}

/// Sequential single-threaded sweep; the CLI runs the same repeats in parallel.
pub fn run_sweep(s: &Scenario, plan: &ChannelPlan, channel: usize, arm: Arm) -> Result<FringeSweep> {
    let temps = s
        .sweep
        .ok_or_else(|| Error::invalid("sweep", "missing"))?
        .temperatures();
    let counts = temps
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            (0..s.repeats)
                .map(|k| sweep_repeat(s, plan, t, sweep_seed(s, arm, channel, j, k)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_sweep(s, plan, &counts)
}

/// Expected fringe of a channel under the scenario's detection chain.
pub fn expected_fringe(s: &Scenario, plan: &ChannelPlan) -> XBasisExpectation {
    expected_xbasis(plan.pair_rate, plan.visibility_source, &detection_chain(s, true))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CarOutcome {
    pub order: u32,
    pub histogram: CoincidenceHistogram,
    pub report: CarReport,
    pub singles_signal: f64,
    pub singles_idler: f64,
    /// `S1·S2·bw·T` from the measured singles rates.
    pub accidental_oracle: f64,
    /// `wing_mean / accidental_oracle - 1`.
    pub accidental_deviation: f64,
    pub expected_car: f64,
}

/// Direct-detection signal and idler tags of one channel.
pub fn car_streams(s: &Scenario, plan: &ChannelPlan, seed: u64) -> Result<(TimeTagStream, TimeTagStream)> {
    let (ds, di) = detectors(s);
    simulate_streams(plan.pair_rate, &ds, &di, plan.accumulation_s, seed)
}

pub fn car_trial(s: &Scenario, plan: &ChannelPlan, seed: u64) -> Result<CarOutcome> {
    let (sig, idl) = car_streams(s, plan, seed)?;
    car_analysis(s, plan, &sig, &idl)
}

/// Histogram and CAR of recorded (or simulated) direct-detection tags.
pub fn car_analysis(s: &Scenario, plan: &ChannelPlan, sig: &TimeTagStream, idl: &TimeTagStream) -> Result<CarOutcome> {
    let h = &s.histogram;
    let histogram = coincidence_histogram(sig, idl, h.bin_width_ps, h.span_ps)?;
    let report = car_report(&histogram, h.peak_window_ps)?;
    let (s1, s2) = (sig.rate(), idl.rate());
    let oracle = s1 * s2 * h.bin_width_ps as f64 * 1e-12 * sig.duration_s();
    Ok(CarOutcome {
        order: plan.order,
        report,
        singles_signal: s1,
        singles_idler: s2,
        accidental_oracle: oracle,
        accidental_deviation: if oracle > 0.0 {
            report.wing_mean / oracle - 1.0
        } else {
            f64::NAN
        },
        expected_car: expected_car(plan.pair_rate, &detection_chain(s, false)),
        histogram,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpectrumOutcome {
    pub peaks: Vec<Peak>,
    pub pairs: Vec<ChannelPair>,
    pub points: Vec<SpectrumPoint>,
}

/// Single-port drop spectrum across the comb (or a window around the pump).
pub fn spectrum(s: &Scenario) -> Result<SpectrumOutcome> {
    s.validate()?;
    let comb = comb(s)?;
    let grid = spectrum_grid(s, &comb);
    Ok(SpectrumOutcome {
        peaks: comb.peaks().to_vec(),
        pairs: channel_pairs(&comb, &s.pump, comb.side_count())?,
        points: drop_spectrum(&s.ring, &comb, &grid)?,
    })
}

fn spectrum_grid(s: &Scenario, comb: &ResonanceComb) -> Vec<f64> {
    match s.spectrum.half_width_fwhm {
        Some(w) => {
            let p = comb.pump_peak();
            let half = w * p.fwhm_nm();
            linspace(p.center_nm - half, p.center_nm + half, s.spectrum.points)
        }
        None => {
            let (lo, hi) = comb.span_nm();
            linspace(lo, hi, s.spectrum.points)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PumpFringeOutcome {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub single: Vec<SpectrumPoint>,
    pub double: Vec<SpectrumPoint>,
    /// Smallest spread within one linewidth of the resonance.
    pub std_near_min: f64,
    /// Largest spread five or more linewidths away.
    pub std_far_max: f64,
    /// Same double-port spectrum with the reflection switched off.
    pub control_max_std: f64,
    pub control_max_deviation: f64,
}

impl PumpFringeOutcome {
    pub fn fringe_contrast(&self) -> bool {
        self.std_near_min > self.std_far_max
    }
}

pub fn pump_fringe(s: &Scenario) -> Result<PumpFringeOutcome> {
    s.validate()?;
    let comb = comb(s)?;
    let grid = spectrum_grid(s, &comb);
    let peak = *comb.pump_peak();
    let samples = s.spectrum.phase_samples;
    let single = drop_spectrum(&s.ring, &comb, &grid)?;
    let double = double_pump_drop_spectrum(&s.ring, &comb, &grid, samples, s.seed)?;
    let off = RingParams {
        backscatter_r: 0.0,
        ..s.ring
    };
    let control = double_pump_drop_spectrum(&off, &comb, &grid, samples, s.seed)?;

    let fwhm = peak.fwhm_nm();
    let detuning = |p: &SpectrumPoint| (p.wavelength_nm - peak.center_nm).abs();
    let near = double.iter().filter(|p| detuning(p) <= fwhm).map(|p| p.std);
    let far = double.iter().filter(|p| detuning(p) >= 5.0 * fwhm).map(|p| p.std);
    let std_near_min = near.fold(f64::INFINITY, f64::min);
    let std_far_max = far.fold(f64::NEG_INFINITY, f64::max);
    if !std_near_min.is_finite() || !std_far_max.is_finite() {
        return Err(Error::invalid(
            "spectrum.half_width_fwhm",
            "grid must reach both the resonance core and five linewidths out",
        ));
    }
    Ok(PumpFringeOutcome {
        center_nm: peak.center_nm,
        fwhm_nm: fwhm,
        std_near_min,
        std_far_max,
        control_max_std: control.iter().map(|p| p.std).fold(0.0, f64::max),
        control_max_deviation: control
            .iter()
            .zip(&single)
            .map(|(c, s)| (c.mean - s.mean).abs())
            .fold(0.0, f64::max),
        single,
        double,
    })
}
