//! Sinusoidal fringe fits, visibilities and the entanglement and rate-ratio checks.
//!
//! Columns are fitted as rates, `y = C + A·cos(2π(x - x_ref)/T + φ)`, by weighted
//! Levenberg-Marquardt. `x_ref` is the middle of the sweep so that φ and T are only
//! weakly correlated. Parameter errors are the unscaled covariance `(JᵀWJ)⁻¹`, i.e.
//! the input σ are taken as absolute.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::error::{Error, FitError, Result};
use crate::timebin::CLASSICAL_VISIBILITY_BOUND;

const MAX_ITERATIONS: usize = 200;
const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub temperature_c: f64,
    /// Coincidences summed over all repeats.
    pub counts_00: u64,
    pub counts_01: u64,
    /// Accumulation time of one repeat.
    pub accumulation_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FringeSweep {
    pub points: Vec<SweepPoint>,
    pub repeats: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    C00,
    C01,
}

impl FringeSweep {
    /// `(x, rate, σ)` for one column, with Poisson σ from the summed counts.
    pub fn column(&self, which: Column) -> core::result::Result<Vec<(f64, f64, f64)>, FitError> {
        if self.repeats == 0 {
            return Err(FitError::BadSigma { index: 0, sigma: 0.0 });
        }
        let mut total = 0u64;
        let mut out = Vec::with_capacity(self.points.len());
        for (index, p) in self.points.iter().enumerate() {
            if !(p.accumulation_s > 0.0 && p.accumulation_s.is_finite()) {
                return Err(FitError::BadSigma {
                    index,
                    sigma: p.accumulation_s,
                });
            }
            let n = match which {
                Column::C00 => p.counts_00,
                Column::C01 => p.counts_01,
            };
            total += n;
            let exposure = p.accumulation_s * self.repeats as f64;
            out.push((
                p.temperature_c,
                n as f64 / exposure,
                libm::sqrt(n.max(1) as f64) / exposure,
            ));
        }
        if total == 0 {
            return Err(FitError::NoCounts);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FringeFit {
    pub mean_level: f64,
    pub amplitude: f64,
    pub phase_offset: f64,
    pub period: f64,
    pub visibility: f64,
    pub visibility_err: f64,
    pub mean_level_err: f64,
    pub amplitude_err: f64,
    pub phase_err: f64,
    pub period_err: f64,
    /// Covariance of (C, A, φ, T).
    pub covariance: [[f64; 4]; 4],
    pub chi2: f64,
    pub dof: usize,
    pub x_ref: f64,
    pub iterations: usize,
    /// `y - model` per point.
    pub residuals: Vec<f64>,
}

impl FringeFit {
    pub fn model(&self, x: f64) -> f64 {
        model(&[self.mean_level, self.amplitude, self.phase_offset, self.period], x - self.x_ref)
    }

    /// Fitted fringe maximum `C + A` with its standard error.
    pub fn peak(&self) -> (f64, f64) {
        let c = &self.covariance;
        let var = c[0][0] + c[1][1] + 2.0 * c[0][1];
        (self.mean_level + self.amplitude, libm::sqrt(var.max(0.0)))
    }
}

#[inline]
fn model(p: &[f64; 4], dx: f64) -> f64 {
    p[0] + p[1] * libm::cos(TAU * dx / p[3] + p[2])
}

fn wrap_phase(phi: f64) -> f64 {
    let w = libm::remainder(phi, TAU);
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 0.0) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert<const N: usize>(a: [[f64; N]; N]) -> Option<[[f64; N]; N]> {
    let mut inv = [[0.0; N]; N];
    for j in 0..N {
        let mut e = [0.0; N];
        e[j] = 1.0;
        let col = solve(a, e)?;
        for i in 0..N {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

struct Data<'a> {
    x: Vec<f64>,
    y: &'a [(f64, f64, f64)],
    w: Vec<f64>,
}

impl Data<'_> {
    fn chi2(&self, p: &[f64; 4]) -> f64 {
        self.x
            .iter()
            .zip(self.y)
            .zip(&self.w)
            .map(|((&dx, &(_, y, _)), &w)| {
                let r = y - model(p, dx);
                w * r * r
            })
            .sum()
    }

    /// `JᵀWJ` and `JᵀW·r`.
    fn normal(&self, p: &[f64; 4]) -> ([[f64; 4]; 4], [f64; 4]) {
        let mut h = [[0.0; 4]; 4];
        let mut g = [0.0; 4];
        for ((&dx, &(_, y, _)), &w) in self.x.iter().zip(self.y).zip(&self.w) {
            let arg = TAU * dx / p[3] + p[2];
            let (s, c) = (libm::sin(arg), libm::cos(arg));
            let j = [1.0, c, -p[1] * s, p[1] * s * TAU * dx / (p[3] * p[3])];
            let r = y - (p[0] + p[1] * c);
            for a in 0..4 {
                g[a] += w * j[a] * r;
                for b in 0..4 {
                    h[a][b] += w * j[a] * j[b];
                }
            }
        }
        (h, g)
    }

    /// Best `(C, A, φ, T)` over a frequency grid, each frequency solved as a
    /// linear least-squares problem in `(C, a·cos, b·sin)`.
    fn periodogram_guess(&self, span: f64, min_dx: f64) -> Option<[f64; 4]> {
        let f_lo = 1.0 / span;
        let f_hi = (0.5 / min_dx).max(2.0 * f_lo);
        let steps = 400;
        let mut best: Option<(f64, [f64; 4])> = None;
        for k in 0..=steps {
            let f = f_lo + (f_hi - f_lo) * k as f64 / steps as f64;
            let mut m = [[0.0; 3]; 3];
            let mut v = [0.0; 3];
            for ((&dx, &(_, y, _)), &w) in self.x.iter().zip(self.y).zip(&self.w) {
                let arg = TAU * f * dx;
                let basis = [1.0, libm::cos(arg), libm::sin(arg)];
                for a in 0..3 {
                    v[a] += w * basis[a] * y;
                    for b in 0..3 {
                        m[a][b] += w * basis[a] * basis[b];
                    }
                }
            }
            let Some(sol) = solve(m, v) else { continue };
            let p = [
                sol[0],
                libm::hypot(sol[1], sol[2]),
                libm::atan2(-sol[2], sol[1]),
                1.0 / f,
            ];
            let chi2 = self.chi2(&p);
            if best.as_ref().is_none_or(|(c, _)| chi2 < *c) {
                best = Some((chi2, p));
            }
        }
        best.map(|(_, p)| p)
    }
}

/// Weighted sinusoid fit of `(x, y, σ_y)` points.
///
/// Flat data (no measurable modulation) returns `V = 0` with `visibility_err = 1`.
/// Failure to converge within the iteration budget is an error, never a
/// silently returned partial fit.
pub fn fit_sinusoid(points: &[(f64, f64, f64)]) -> core::result::Result<FringeFit, FitError> {
    if points.len() < MIN_POINTS {
        return Err(FitError::NotEnoughPoints {
            required: MIN_POINTS,
            got: points.len(),
        });
    }
    for (index, &(x, y, s)) in points.iter().enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(FitError::NonFinite { index });
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(FitError::BadSigma { index, sigma: s });
        }
    }
    let (x_min, x_max) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let span = x_max - x_min;
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_unstable_by(f64::total_cmp);
    let min_dx = xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !(span > 0.0) || !min_dx.is_finite() {
        return Err(FitError::NotEnoughPoints {
            required: MIN_POINTS,
            got: 1,
        });
    }
    let x_ref = 0.5 * (x_min + x_max);
    let data = Data {
        x: points.iter().map(|p| p.0 - x_ref).collect(),
        y: points,
        w: points.iter().map(|p| 1.0 / (p.2 * p.2)).collect(),
    };

    let wsum: f64 = data.w.iter().sum();
    let wmean = points.iter().zip(&data.w).map(|(p, w)| w * p.1).sum::<f64>() / wsum;
    let flat = points.iter().all(|p| p.1 == points[0].1);
    let guess = data.periodogram_guess(span, min_dx);
    let scale = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if flat || guess.is_none_or(|g| !(g[1] > 1e-12 * scale)) {
        return Ok(flat_fit(&data, wmean, wsum, x_ref, span));
    }
    let mut p = guess.unwrap();

    let mut chi2 = data.chi2(&p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (h, g) = data.normal(&p);
        let mut damped = h;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] += lambda * h[i][i].max(1e-300);
        }
        let step = solve(damped, g);
        let trial = step.map(|d| [p[0] + d[0], p[1] + d[1], p[2] + d[2], p[3] + d[3]]);
        match trial {
            Some(t) if t[3] > 0.0 && data.chi2(&t) <= chi2 => {
                let new_chi2 = data.chi2(&t);
                let d = step.unwrap();
                let small_step = (0..4).all(|i| d[i].abs() <= 1e-12 * (p[i].abs() + 1e-12));
                let small_gain = chi2 - new_chi2 <= 1e-14 * chi2.max(1e-300);
                p = t;
                chi2 = new_chi2;
                lambda = (lambda * 0.1).max(1e-12);
                if small_step || small_gain {
                    converged = true;
                    break;
                }
            }
            _ => {
                lambda *= 10.0;
                if lambda > 1e12 {
                    // no step in any direction lowers χ²: at the minimum to rounding
                    converged = true;
                    break;
                }
            }
        }
    }
    let residuals: Vec<f64> = data
        .x
        .iter()
        .zip(points)
        .map(|(&dx, &(_, y, _))| y - model(&p, dx))
        .collect();
    if !converged {
        let max_residual = residuals
            .iter()
            .zip(points)
            .map(|(r, pt)| (r / pt.2).abs())
            .fold(0.0, f64::max);
        return Err(FitError::NoConvergence {
            iterations,
            chi2,
            max_residual,
        });
    }

    if p[1] < 0.0 {
        p[1] = -p[1];
        p[2] += PI;
    }
    p[2] = wrap_phase(p[2]);
    let (h, _) = data.normal(&p);
    let cov = invert(h).ok_or(FitError::Singular)?;
    let (c, a) = (p[0], p[1]);
    let v = a / c;
    let var_v = (cov[1][1] - 2.0 * v * cov[0][1] + v * v * cov[0][0]) / (c * c);
    Ok(FringeFit {
        mean_level: c,
        amplitude: a,
        phase_offset: p[2],
        period: p[3],
        visibility: v,
        visibility_err: libm::sqrt(var_v.max(0.0)),
        mean_level_err: libm::sqrt(cov[0][0].max(0.0)),
        amplitude_err: libm::sqrt(cov[1][1].max(0.0)),
        phase_err: libm::sqrt(cov[2][2].max(0.0)),
        period_err: libm::sqrt(cov[3][3].max(0.0)),
        covariance: cov,
        chi2,
        dof: points.len() - 4,
        x_ref,
        iterations,
        residuals,
    })
}

fn flat_fit(data: &Data<'_>, mean: f64, wsum: f64, x_ref: f64, span: f64) -> FringeFit {
    let var_c = 1.0 / wsum;
    let mut cov = [[0.0; 4]; 4];
    cov[0][0] = var_c;
    let residuals: Vec<f64> = data.y.iter().map(|p| p.1 - mean).collect();
    FringeFit {
        mean_level: mean,
        amplitude: 0.0,
        phase_offset: 0.0,
        period: span,
        visibility: 0.0,
        visibility_err: 1.0,
        mean_level_err: libm::sqrt(var_c),
        amplitude_err: f64::INFINITY,
        phase_err: f64::INFINITY,
        period_err: f64::INFINITY,
        covariance: cov,
        chi2: data.chi2(&[mean, 0.0, 0.0, span]),
        dof: data.y.len() - 4,
        x_ref,
        iterations: 0,
        residuals,
    }
}

/// Fits of both coincidence columns and their relative phase.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct VisibilityPair {
    pub fit_00: FringeFit,
    pub fit_01: FringeFit,
    /// `φ00 - φ01` wrapped to `(-π, π]`.
    pub phase_difference: f64,
    pub phase_difference_err: f64,
    /// Distance of the phase difference from π in units of its error.
    pub antiphase_sigma: f64,
    pub antiphase: bool,
}

impl VisibilityPair {
    /// Mean of the two fitted fringe maxima, with its error.
    pub fn mean_peak_rate(&self) -> (f64, f64) {
        let (a, ea) = self.fit_00.peak();
        let (b, eb) = self.fit_01.peak();
        (0.5 * (a + b), 0.5 * libm::hypot(ea, eb))
    }
}

pub fn visibility_pair(sweep: &FringeSweep) -> Result<VisibilityPair> {
    let fit_00 = fit_sinusoid(&sweep.column(Column::C00)?)?;
    let fit_01 = fit_sinusoid(&sweep.column(Column::C01)?)?;
    let diff = wrap_phase(fit_00.phase_offset - fit_01.phase_offset);
    let err = libm::hypot(fit_00.phase_err, fit_01.phase_err);
    let off = PI - diff.abs();
    let sigma = if err > 0.0 {
        off / err
    } else if off == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(VisibilityPair {
        antiphase: sigma <= 3.0,
        fit_00,
        fit_01,
        phase_difference: diff,
        phase_difference_err: err,
        antiphase_sigma: sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    Entangled,
    Inconclusive,
}

/// Entangled iff `V - k·σ_V` is strictly above `1/√2`.
pub fn entanglement_check(fit: &FringeFit, k: f64) -> Verdict {
    if fit.visibility - k * fit.visibility_err > CLASSICAL_VISIBILITY_BOUND {
        Verdict::Entangled
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RateRatio {
    pub ratio: f64,
    pub err: f64,
}

/// Ratio of the mean fitted peak rates (per second) of sweep `a` over sweep `b`.
pub fn rate_ratio(a: &FringeSweep, b: &FringeSweep) -> Result<RateRatio> {
    let (pa, ea) = visibility_pair(a)?.mean_peak_rate();
    let (pb, eb) = visibility_pair(b)?.mean_peak_rate();
    if !(pb > 0.0) {
        return Err(Error::Fit(FitError::NoCounts));
    }
    let ratio = pa / pb;
    let err = ratio * libm::hypot(ea / pa, eb / pb);
    Ok(RateRatio { ratio, err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng_from_seed;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Poisson};

    fn synth(c: f64, v: f64, t: f64, phi: f64, n: usize, lo: f64, hi: f64) -> Vec<(f64, f64, f64)> {
        (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let y = c * (1.0 + v * libm::cos(TAU * x / t + phi));
                (x, y, libm::sqrt(y.max(1.0)))
            })
            .collect()
    }

    fn sweep_from(rates: &[(f64, f64, f64)], acc: f64, repeats: u32, seed: u64) -> FringeSweep {
        let mut rng = rng_from_seed(seed);
        let draw = |m: f64, rng: &mut _| -> u64 {
            if m <= 0.0 {
                0
            } else {
                Poisson::new(m).unwrap().sample(rng) as u64
            }
        };
        let points = rates
            .iter()
            .map(|&(x, r00, r01)| SweepPoint {
                temperature_c: x,
                counts_00: draw(r00 * acc * repeats as f64, &mut rng),
                counts_01: draw(r01 * acc * repeats as f64, &mut rng),
                accumulation_s: acc,
            })
            .collect();
        FringeSweep { points, repeats }
    }

    fn fringe_rates(c: f64, v: f64) -> Vec<(f64, f64, f64)> {
        (0..13)
            .map(|i| {
                let x = 20.0 + 0.1 * i as f64;
                let th = TAU * (x - 20.0) + 0.4;
                (x, c * (1.0 + v * libm::cos(th)), c * (1.0 - v * libm::cos(th)))
            })
            .collect()
    }

    #[test]
    fn recovers_noiseless_visibility() {
        let pts = synth(100.0, 0.9, 1.0, 0.3, 13, 20.0, 21.2);
        let fit = fit_sinusoid(&pts).unwrap();
        assert!((fit.visibility - 0.9).abs() < 1e-6);
        assert!((fit.period - 1.0).abs() < 1e-6);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-6));
    }

    #[test]
    fn flat_data_has_no_visibility() {
        let pts: Vec<_> = (0..9).map(|i| (i as f64, 5.0, 1.0)).collect();
        let fit = fit_sinusoid(&pts).unwrap();
        assert_eq!(fit.visibility, 0.0);
        assert_eq!(fit.visibility_err, 1.0);
        assert_eq!(fit.mean_level, 5.0);
        assert_eq!(entanglement_check(&fit, 1.0), Verdict::Inconclusive);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            fit_sinusoid(&[(0.0, 1.0, 1.0); 3]),
            Err(FitError::NotEnoughPoints { required: 5, got: 3 })
        );
        let mut pts = synth(10.0, 0.5, 1.0, 0.0, 8, 0.0, 2.0);
        pts[2].2 = 0.0;
        assert!(matches!(fit_sinusoid(&pts), Err(FitError::BadSigma { index: 2, .. })));
        pts[2].2 = 1.0;
        pts[4].1 = f64::NAN;
        assert_eq!(fit_sinusoid(&pts), Err(FitError::NonFinite { index: 4 }));
    }

    #[test]
    fn ideal_fringes_are_antiphase() {
        let rates = fringe_rates(50.0, 1.0);
        let pts00: Vec<_> = rates.iter().map(|r| (r.0, r.1, 1.0)).collect();
        let pts01: Vec<_> = rates.iter().map(|r| (r.0, r.2, 1.0)).collect();
        let a = fit_sinusoid(&pts00).unwrap();
        let b = fit_sinusoid(&pts01).unwrap();
        let d = wrap_phase(a.phase_offset - b.phase_offset);
        assert!((d.abs() - PI).abs() < 1e-6);
    }

    #[test]
    fn poisson_sweep_pair() {
        let sweep = sweep_from(&fringe_rates(2.0, 0.85), 60.0, 3, 17);
        let pair = visibility_pair(&sweep).unwrap();
        assert!(pair.antiphase, "{}", pair.antiphase_sigma);
        for f in [&pair.fit_00, &pair.fit_01] {
            assert!((f.visibility - 0.85).abs() < 4.0 * f.visibility_err);
            assert!(f.visibility_err > 0.0 && f.visibility_err < 0.1);
        }
    }

    #[test]
    fn zero_columns_fail() {
        let sweep = FringeSweep {
            points: (0..8)
                .map(|i| SweepPoint {
                    temperature_c: i as f64,
                    counts_00: 0,
                    counts_01: 0,
                    accumulation_s: 1.0,
                })
                .collect(),
            repeats: 1,
        };
        assert_eq!(visibility_pair(&sweep), Err(Error::Fit(FitError::NoCounts)));
        assert_eq!(sweep.column(Column::C01), Err(FitError::NoCounts));
    }

    #[test]
    fn verdicts() {
        let mut fit = fit_sinusoid(&synth(10.0, 0.95, 1.0, 0.0, 9, 0.0, 2.0)).unwrap();
        fit.visibility_err = 0.03;
        assert_eq!(entanglement_check(&fit, 1.0), Verdict::Entangled);
        fit.visibility = 0.8222;
        fit.visibility_err = 0.0222;
        assert_eq!(entanglement_check(&fit, 1.0), Verdict::Entangled);
        fit.visibility = 0.7071;
        fit.visibility_err = 0.0;
        assert_eq!(entanglement_check(&fit, 1.0), Verdict::Inconclusive);
    }

    #[test]
    fn identical_sweeps_ratio_one() {
        let sweep = sweep_from(&fringe_rates(2.0, 0.8), 60.0, 3, 3);
        let r = rate_ratio(&sweep, &sweep).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert!(r.err > 0.0);
    }

    #[test]
    fn ratio_of_scaled_sources() {
        let a = sweep_from(&fringe_rates(4.5, 0.8), 300.0, 3, 5);
        let b = sweep_from(&fringe_rates(2.0, 0.8), 300.0, 3, 6);
        let r = rate_ratio(&a, &b).unwrap();
        assert!((r.ratio - 2.25).abs() < 3.0 * r.err, "{r:?}");
    }

    #[test]
    fn error_scales_as_inverse_root_accumulation() {
        let rates = fringe_rates(1.0, 0.85);
        let mean_err = |acc: f64| {
            (0..10)
                .map(|s| visibility_pair(&sweep_from(&rates, acc, 3, 100 + s)).unwrap().fit_00.visibility_err)
                .sum::<f64>()
                / 10.0
        };
        let ratio = mean_err(30.0) / mean_err(300.0);
        assert!((ratio / libm::sqrt(10.0) - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn small_linear_solver() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let x = solve(a, [1.0, 2.0, 3.0]).unwrap();
        for (row, b) in a.iter().zip([1.0, 2.0, 3.0]) {
            let lhs: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert!((lhs - b).abs() < 1e-12);
        }
        assert!(solve([[1.0, 2.0], [2.0, 4.0]], [1.0, 1.0]).is_none());
        let inv = invert([[2.0, 0.0], [0.0, 4.0]]).unwrap();
        assert_eq!(inv, [[0.5, 0.0], [0.0, 0.25]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_on_model_data(
            c in 1.0..1e4f64,
            v in 0.05..=1.0f64,
            t in 0.6..1.2f64,
            phi in -PI..PI,
        ) {
            let pts = synth(c, v, t, phi, 15, 0.0, 1.3);
            let fit = fit_sinusoid(&pts).unwrap();
            prop_assert!((fit.visibility - v).abs() < 1e-6, "{} vs {}", fit.visibility, v);
            for (r, p) in fit.residuals.iter().zip(&pts) {
                prop_assert!(r.abs() <= 1e-9 * p.1.abs().max(c));
            }
        }

        #[test]
        fn visibility_invariant_under_scaling(k in 0.01..100.0f64, seed in 0u64..1000) {
            let sweep = sweep_from(&fringe_rates(1.5, 0.8), 60.0, 3, seed);
            let pts = sweep.column(Column::C00).unwrap();
            let scaled: Vec<_> = pts.iter().map(|&(x, y, s)| (x, k * y, k * s)).collect();
            let a = fit_sinusoid(&pts).unwrap();
            let b = fit_sinusoid(&scaled).unwrap();
            prop_assert!((a.visibility - b.visibility).abs() < 1e-6);
            prop_assert_eq!(entanglement_check(&a, 1.0), entanglement_check(&b, 1.0));
        }
    }
}
