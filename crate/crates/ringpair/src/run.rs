//! Scenario runner: fans trials out over rayon and writes the artifact bundle.

use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use ringpair_core::analysis::{entanglement_check, rate_ratio, visibility_pair, FringeFit, Verdict, VisibilityPair};
use ringpair_core::calibration::inverse_variance_mean;
use ringpair_core::detection::CarReport;
use ringpair_core::diag::Validate;
use ringpair_core::experiment::{self, Arm, ChannelPlan};
use ringpair_core::pairgen::{ChannelPair, PumpPorts};
use ringpair_core::scenario::{Scenario, ScenarioKind};

use crate::io::{self, TagHeader};

/// Standard errors subtracted from a visibility before comparing with the classical bound.
pub const ENTANGLEMENT_SIGMA: f64 = 1.0;

/// Pipeline stage that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Resonator,
    Pairgen,
    Detection,
    Analysis,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Resonator => "resonator",
            Stage::Pairgen => "pairgen",
            Stage::Detection => "detection",
            Stage::Analysis => "analysis",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

fn at<E: std::error::Error + Send + Sync + 'static>(stage: Stage) -> impl FnOnce(E) -> StageError {
    move |e| StageError {
        stage,
        source: Box::new(e),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Also write the raw direct-detection tags of CAR scenarios.
    pub export_tags: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakSummary {
    pub index: i32,
    pub center_nm: f64,
    pub fwhm_nm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub peaks: Vec<PeakSummary>,
    pub pairs: Vec<ChannelPair>,
    pub spectrum: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CarSummary {
    pub order: u32,
    pub pair_rate: f64,
    pub duration_s: f64,
    pub car: f64,
    pub expected_car: f64,
    pub peak_counts: u64,
    pub peak_bins: usize,
    pub wing_mean: f64,
    pub wing_bins: usize,
    pub accidental_oracle: f64,
    pub accidental_deviation: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub histogram: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tags: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VisibilitySummary {
    pub order: u32,
    /// Drop port number, or `None` for the single-port reference.
    pub port: Option<u32>,
    pub pumping: PumpPorts,
    pub pair_rate: f64,
    pub visibility_source: f64,
    pub expected_visibility: f64,
    pub visibility_00: f64,
    pub visibility_00_err: f64,
    pub visibility_01: f64,
    pub visibility_01_err: f64,
    pub verdict_00: Verdict,
    pub verdict_01: Verdict,
    pub phase_difference: f64,
    pub phase_difference_err: f64,
    pub antiphase_sigma: f64,
    pub antiphase: bool,
    pub mean_peak_rate: f64,
    pub mean_peak_rate_err: f64,
    pub expected_peak_rate: f64,
    pub sweep: String,
    pub fit: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRatioSummary {
    pub order: u32,
    pub port: u32,
    pub ratio: f64,
    pub err: f64,
    /// Sampled `⟨P²⟩` enhancement.
    pub enhancement: f64,
    /// Peak-rate ratio predicted by the analytic detection chain (includes accidentals).
    pub expected_peak_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PumpFringeSummary {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub backscatter_r: f64,
    pub std_near_min: f64,
    pub std_far_max: f64,
    pub fringe_contrast: bool,
    pub control_max_std: f64,
    pub control_max_deviation: f64,
    pub spectrum_single: String,
    pub spectrum_double: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub kind: &'static str,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enhancement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub car: Vec<CarSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub visibility: Vec<VisibilitySummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rate_ratio: Vec<RateRatioSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_fringe: Option<PumpFringeSummary>,
    pub checks: Vec<CheckResult>,
}

impl Summary {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Fit report written next to each sweep.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport<'a> {
    pub x00: ColumnFit<'a>,
    pub x01: ColumnFit<'a>,
    pub phase_difference: f64,
    pub phase_difference_err: f64,
    pub antiphase_sigma: f64,
    pub antiphase: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnFit<'a> {
    #[serde(flatten)]
    pub fit: &'a FringeFit,
    pub verdict: Verdict,
}

impl<'a> FitReport<'a> {
    pub fn new(v: &'a VisibilityPair) -> Self {
        let column = |fit: &'a FringeFit| ColumnFit {
            fit,
            verdict: entanglement_check(fit, ENTANGLEMENT_SIGMA),
        };
        FitReport {
            x00: column(&v.fit_00),
            x01: column(&v.fit_01),
            phase_difference: v.phase_difference,
            phase_difference_err: v.phase_difference_err,
            antiphase_sigma: v.antiphase_sigma,
            antiphase: v.antiphase,
        }
    }
}

/// Runs the scenario and writes its artifacts into `out`, which is created if needed.
pub fn run_scenario(s: &Scenario, out: &Path, opts: &RunOptions) -> Result<Summary, StageError> {
    s.validate().map_err(at(Stage::Config))?;
    fs::create_dir_all(out).map_err(at(Stage::Output))?;
    let mut summary = Summary {
        scenario: s.name.clone(),
        kind: s.kind.as_str(),
        seed: s.seed,
        enhancement: None,
        spectrum: None,
        car: Vec::new(),
        visibility: Vec::new(),
        rate_ratio: Vec::new(),
        pump_fringe: None,
        checks: Vec::new(),
    };
    match s.kind {
        ScenarioKind::Spectrum => run_spectrum(s, out, &mut summary)?,
        ScenarioKind::Car => run_car(s, out, opts, &mut summary)?,
        ScenarioKind::Visibility => run_visibility(s, out, &mut summary)?,
        ScenarioKind::PumpFringe => run_pump_fringe(s, out, &mut summary)?,
    }
    summary.checks = evaluate_checks(s, &summary);
    io::write_json(&out.join("summary.json"), &summary).map_err(at(Stage::Output))?;
    Ok(summary)
}

fn run_spectrum(s: &Scenario, out: &Path, summary: &mut Summary) -> Result<(), StageError> {
    let r = experiment::spectrum(s).map_err(at(Stage::Resonator))?;
    let file = "spectrum.csv";
    io::write_spectrum(&out.join(file), &r.points).map_err(at(Stage::Output))?;
    summary.spectrum = Some(SpectrumSummary {
        peaks: r
            .peaks
            .iter()
            .map(|p| PeakSummary {
                index: p.index,
                center_nm: p.center_nm,
                fwhm_nm: p.fwhm_nm(),
            })
            .collect(),
        pairs: r.pairs,
        spectrum: file.into(),
    });
    Ok(())
}

fn plans(s: &Scenario, summary: &mut Summary) -> Result<Vec<ChannelPlan>, StageError> {
    let e = experiment::enhancement(s).map_err(at(Stage::Pairgen))?;
    if s.pump.ports == PumpPorts::Double {
        summary.enhancement = Some(e);
    }
    experiment::plan_channels(s, e).map_err(at(Stage::Pairgen))
}

fn run_car(s: &Scenario, out: &Path, opts: &RunOptions, summary: &mut Summary) -> Result<(), StageError> {
    let plans = plans(s, summary)?;
    let results = plans
        .par_iter()
        .enumerate()
        .map(|(c, plan)| -> Result<_, StageError> {
            let seed = experiment::car_seed(s, c);
            let (sig, idl) = experiment::car_streams(s, plan, seed).map_err(at(Stage::Detection))?;
            let outcome = experiment::car_analysis(s, plan, &sig, &idl).map_err(at(Stage::Detection))?;
            let tags = if opts.export_tags {
                let file = format!("tags_order{}.txt", plan.order);
                let w = std::io::BufWriter::new(fs::File::create(out.join(&file)).map_err(at(Stage::Output))?);
                let header = TagHeader {
                    duration_s: plan.accumulation_s,
                    seed,
                };
                io::write_tags(w, header, &[&sig, &idl]).map_err(at(Stage::Output))?;
                Some(file)
            } else {
                None
            };
            Ok((outcome, tags))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (plan, (o, tags)) in plans.iter().zip(results) {
        let file = format!("histogram_order{}.csv", plan.order);
        io::write_histogram(&out.join(&file), &o.histogram).map_err(at(Stage::Output))?;
        let CarReport {
            car,
            peak_counts,
            peak_bins,
            wing_mean,
            wing_bins,
        } = o.report;
        summary.car.push(CarSummary {
            order: plan.order,
            pair_rate: plan.pair_rate,
            duration_s: plan.accumulation_s,
            car,
            expected_car: o.expected_car,
            peak_counts,
            peak_bins,
            wing_mean,
            wing_bins,
            accidental_oracle: o.accidental_oracle,
            accidental_deviation: o.accidental_deviation,
            singles_signal: o.singles_signal,
            singles_idler: o.singles_idler,
            histogram: file,
            tags,
        });
    }
    Ok(())
}

fn run_visibility(s: &Scenario, out: &Path, summary: &mut Summary) -> Result<(), StageError> {
    let double = plans(s, summary)?;
    let single = experiment::plan_channels(s, 1.0).map_err(at(Stage::Pairgen))?;
    let mut arms: Vec<Arm> = (0..s.drop_ports).map(Arm::Port).collect();
    if s.compare_single_port {
        arms.push(Arm::SinglePortReference);
    }
    let plan_for = |arm: Arm, c: usize| match arm {
        Arm::Port(_) => &double[c],
        Arm::SinglePortReference => &single[c],
    };
    let temps = s.sweep.expect("validated visibility scenario has a sweep").temperatures();

    let mut trials = Vec::new();
    for &arm in &arms {
        for c in 0..double.len() {
            for j in 0..temps.len() {
                for k in 0..s.repeats {
                    trials.push((arm, c, j, k));
                }
            }
        }
    }
    let counts = trials
        .par_iter()
        .map(|&(arm, c, j, k)| {
            experiment::sweep_repeat(s, plan_for(arm, c), temps[j], experiment::sweep_seed(s, arm, c, j, k))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(at(Stage::Detection))?;

    let per_sweep = temps.len() * s.repeats as usize;
    let mut fits = Vec::new();
    for (n, block) in counts.chunks(per_sweep).enumerate() {
        let arm = arms[n / double.len()];
        let c = n % double.len();
        let plan = plan_for(arm, c);
        let grouped: Vec<Vec<(u64, u64)>> = block.chunks(s.repeats as usize).map(<[_]>::to_vec).collect();
        let sweep = experiment::assemble_sweep(s, plan, &grouped).map_err(at(Stage::Analysis))?;
        let tag = match arm {
            Arm::Port(p) => format!("order{}_port{}", plan.order, p + 1),
            Arm::SinglePortReference => format!("order{}_single", plan.order),
        };
        let sweep_file = format!("sweep_{tag}.csv");
        let fit_file = format!("fit_{tag}.json");
        // written before fitting so a failed fit leaves its input behind
        io::write_sweep(&out.join(&sweep_file), &sweep).map_err(at(Stage::Output))?;
        let v = visibility_pair(&sweep).map_err(at(Stage::Analysis))?;
        io::write_json(&out.join(&fit_file), &FitReport::new(&v)).map_err(at(Stage::Output))?;
        let expected = experiment::expected_fringe(s, plan);
        let (rate, rate_err) = v.mean_peak_rate();
        summary.visibility.push(VisibilitySummary {
            order: plan.order,
            port: match arm {
                Arm::Port(p) => Some(p + 1),
                Arm::SinglePortReference => None,
            },
            pumping: match arm {
                Arm::Port(_) => s.pump.ports,
                Arm::SinglePortReference => PumpPorts::Single,
            },
            pair_rate: plan.pair_rate,
            visibility_source: plan.visibility_source,
            expected_visibility: expected.visibility,
            visibility_00: v.fit_00.visibility,
            visibility_00_err: v.fit_00.visibility_err,
            visibility_01: v.fit_01.visibility,
            visibility_01_err: v.fit_01.visibility_err,
            verdict_00: entanglement_check(&v.fit_00, ENTANGLEMENT_SIGMA),
            verdict_01: entanglement_check(&v.fit_01, ENTANGLEMENT_SIGMA),
            phase_difference: v.phase_difference,
            phase_difference_err: v.phase_difference_err,
            antiphase_sigma: v.antiphase_sigma,
            antiphase: v.antiphase,
            mean_peak_rate: rate,
            mean_peak_rate_err: rate_err,
            expected_peak_rate: expected.peak,
            sweep: sweep_file,
            fit: fit_file,
        });
        fits.push((arm, c, sweep));
    }

    if s.compare_single_port {
        let enhancement = summary.enhancement.unwrap_or(1.0);
        for (arm, c, sweep) in &fits {
            let Arm::Port(p) = *arm else { continue };
            let (_, _, reference) = fits
                .iter()
                .find(|(a, rc, _)| *a == Arm::SinglePortReference && rc == c)
                .expect("reference sweep runs for every channel");
            let r = rate_ratio(sweep, reference).map_err(at(Stage::Analysis))?;
            let e_double = experiment::expected_fringe(s, &double[*c]).peak;
            let e_single = experiment::expected_fringe(s, &single[*c]).peak;
            summary.rate_ratio.push(RateRatioSummary {
                order: double[*c].order,
                port: p + 1,
                ratio: r.ratio,
                err: r.err,
                enhancement,
                expected_peak_ratio: e_double / e_single,
            });
        }
    }
    Ok(())
}

fn run_pump_fringe(s: &Scenario, out: &Path, summary: &mut Summary) -> Result<(), StageError> {
    let r = experiment::pump_fringe(s).map_err(at(Stage::Resonator))?;
    let (fs, fd) = ("spectrum_single.csv", "spectrum_double.csv");
    io::write_spectrum(&out.join(fs), &r.single).map_err(at(Stage::Output))?;
    io::write_spectrum(&out.join(fd), &r.double).map_err(at(Stage::Output))?;
    summary.pump_fringe = Some(PumpFringeSummary {
        center_nm: r.center_nm,
        fwhm_nm: r.fwhm_nm,
        backscatter_r: s.ring.backscatter_r,
        std_near_min: r.std_near_min,
        std_far_max: r.std_far_max,
        fringe_contrast: r.fringe_contrast(),
        control_max_std: r.control_max_std,
        control_max_deviation: r.control_max_deviation,
        spectrum_single: fs.into(),
        spectrum_double: fd.into(),
    });
    Ok(())
}

fn check(name: String, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

/// Evaluates the scenario's `[check]` thresholds against a finished run.
pub fn evaluate_checks(s: &Scenario, summary: &Summary) -> Vec<CheckResult> {
    let spec = &s.check;
    let mut out = Vec::new();
    for c in &summary.car {
        if let Some(min) = spec.min_car {
            out.push(check(
                format!("car_order{}", c.order),
                c.car > min,
                format!("CAR {:.1} vs > {min}", c.car),
            ));
        }
        if let Some(tol) = spec.accidental_tolerance {
            out.push(check(
                format!("accidentals_order{}", c.order),
                c.accidental_deviation.abs() <= tol,
                format!("floor {:.3} vs oracle {:.3} ({:+.2}%)", c.wing_mean, c.accidental_oracle, 100.0 * c.accidental_deviation),
            ));
        }
    }
    for v in &summary.visibility {
        let label = match v.port {
            Some(p) => format!("order{}_port{p}", v.order),
            None => format!("order{}_single", v.order),
        };
        if spec.require_entangled {
            out.push(check(
                format!("entangled_{label}"),
                v.verdict_00 == Verdict::Entangled && v.verdict_01 == Verdict::Entangled,
                format!(
                    "V00 {:.4}±{:.4}, V01 {:.4}±{:.4}",
                    v.visibility_00, v.visibility_00_err, v.visibility_01, v.visibility_01_err
                ),
            ));
        }
        if spec.require_antiphase {
            out.push(check(
                format!("antiphase_{label}"),
                v.antiphase,
                format!("{:.2}σ from π", v.antiphase_sigma),
            ));
        }
        let target = s
            .channels
            .iter()
            .find(|c| c.order == v.order)
            .and_then(|c| c.target_visibilities);
        if let (Some(t), Some(_)) = (target, v.port) {
            let measured = [(v.visibility_00, v.visibility_00_err), (v.visibility_01, v.visibility_01_err)];
            for (col, ((m, me), [tv, te])) in ["00", "01"].iter().zip(measured.into_iter().zip(t)) {
                out.push(check(
                    format!("visibility_{col}_{label}"),
                    (m - tv).abs() <= me + te,
                    format!("{:.4}±{:.4} vs {tv:.4}±{te:.4}", m, me),
                ));
            }
        }
    }
    if let Some(expected) = spec.rate_ratio {
        for r in &summary.rate_ratio {
            let sigma = (r.ratio - expected).abs() / r.err;
            out.push(check(
                format!("rate_ratio_order{}_port{}", r.order, r.port),
                sigma <= 3.0,
                format!("{:.4}±{:.4} vs {expected:.4} ({sigma:.2}σ)", r.ratio, r.err),
            ));
        }
    }
    if spec.require_fringe_contrast {
        if let Some(f) = &summary.pump_fringe {
            out.push(check(
                "fringe_contrast".into(),
                f.fringe_contrast,
                format!("min std near {:.3e} vs max std far {:.3e}", f.std_near_min, f.std_far_max),
            ));
            out.push(check(
                "fringe_control".into(),
                f.control_max_std == 0.0 && f.control_max_deviation <= 1e-12,
                format!("r=0: max std {:e}, max deviation {:e}", f.control_max_std, f.control_max_deviation),
            ));
        }
    }
    out
}

/// Inverse-variance mean of a channel's reference visibilities.
pub fn target_mean(s: &Scenario, order: u32) -> Option<(f64, f64)> {
    let t = s.channels.iter().find(|c| c.order == order)?.target_visibilities?;
    inverse_variance_mean(&[(t[0][0], t[0][1]), (t[1][0], t[1][1])]).ok()
}
