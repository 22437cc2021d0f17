//! Power-law and linear fits on sweep output.
//!
//! The pipeline is: fit `n₀ ≈ c τ^(-β)` on the noiseless row, subtract it from
//! each noisy row to get `δn`, fit `δn ≈ r τ`, locate the minimum `τ_opt` of each
//! noisy row and finally fit `ln τ_opt` against `ln W²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default fit window in `ln τ`.
pub const DEFAULT_FIT_WINDOW: (f64, f64) = (3.0, 5.5);

/// Noise strengths used by the default sweep. The weakest keeps `r τ` small
/// enough that doubling it still quadruples the fitted rate.
pub const DEFAULT_NOISE_LEVELS: [f64; 7] = [0.006, 0.011, 0.013, 0.016, 0.019, 0.023, 0.028];

/// Ordinary least squares `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("length mismatch: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(LinearFit { slope, intercept, r2 })
}

/// `n ≈ c τ^(-beta)` fitted in log-log space over `window` (in `ln τ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta: f64,
    pub c: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

impl PowerLawFit {
    pub fn predict(&self, tau: f64) -> f64 {
        self.c * tau.powf(-self.beta)
    }
}

pub fn fit_power_law(taus: &[f64], ns: &[f64], window: (f64, f64)) -> Result<PowerLawFit> {
    if taus.len() != ns.len() {
        return Err(Error::Fit("τ and n columns differ in length".into()));
    }
    // grid endpoints come from exp(ln τ) and may miss the window by an ulp
    let slack = 1e-9;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&tau, &n) in taus.iter().zip(ns) {
        if !(tau > 0.0) {
            return Err(Error::Fit(format!("non-positive quench time {tau}")));
        }
        let x = tau.ln();
        if x < window.0 - slack || x > window.1 + slack {
            continue;
        }
        if !(n > 0.0) {
            return Err(Error::Fit(format!("non-positive defect density {n} at τ = {tau}")));
        }
        xs.push(x);
        ys.push(n.ln());
    }
    if xs.len() < 3 {
        return Err(Error::Fit(format!("only {} points inside the fit window", xs.len())));
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(PowerLawFit { beta: -fit.slope, c: fit.intercept.exp(), r2: fit.r2, window })
}

/// `δn = n_W - c τ^(-β)`.
pub fn noise_induced_defects(taus: &[f64], n_w: &[f64], kz_fit: &PowerLawFit) -> Result<Vec<f64>> {
    if taus.len() != n_w.len() {
        return Err(Error::Fit("τ and n columns differ in length".into()));
    }
    Ok(taus.iter().zip(n_w).map(|(&t, &n)| n - kz_fit.predict(t)).collect())
}

/// Linear growth rate `r` of the noise-induced defects, `δn ≈ r τ + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseInducedFit {
    pub r: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_linear_rate(taus: &[f64], dns: &[f64]) -> Result<NoiseInducedFit> {
    if taus.len() < 3 {
        return Err(Error::Fit("need at least three points".into()));
    }
    let fit = linear_fit(taus, dns)?;
    Ok(NoiseInducedFit { r: fit.slope, intercept: fit.intercept, r2: fit.r2 })
}

/// Quench time minimising `n_W`, refined by a parabola through the grid
/// minimum and its neighbours in `(ln τ, n)`.
pub fn optimal_quench_time(taus: &[f64], n_w: &[f64]) -> Result<f64> {
    if taus.len() != n_w.len() {
        return Err(Error::Fit("τ and n columns differ in length".into()));
    }
    if taus.len() < 3 {
        return Err(Error::Fit("need at least three points".into()));
    }
    if taus.windows(2).any(|w| !(w[0] < w[1] && w[0] > 0.0)) {
        return Err(Error::Fit("τ grid must be positive and increasing".into()));
    }
    let mut best = 0;
    for (i, &n) in n_w.iter().enumerate() {
        if n < n_w[best] {
            best = i;
        }
    }
    if best == 0 || best == n_w.len() - 1 {
        return Err(Error::BoundaryMinimum { index: best, len: n_w.len() });
    }
    let x = [taus[best - 1].ln(), taus[best].ln(), taus[best + 1].ln()];
    let y = [n_w[best - 1], n_w[best], n_w[best + 1]];
    let (a, b) = (x[1] - x[0], x[1] - x[2]);
    let (fa, fb) = (y[1] - y[2], y[1] - y[0]);
    let den = a * fa - b * fb;
    let vertex = if den == 0.0 { x[1] } else { x[1] - 0.5 * (a * a * fa - b * b * fb) / den };
    Ok(vertex.clamp(x[0], x[2]).exp())
}

/// Slope of `ln τ_opt` against the log of the noise strength.
///
/// `alpha` uses `ln W²` as abscissa; `alpha_ln_w` uses `ln W` and is therefore
/// exactly twice as steep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalTimeFit {
    pub alpha: f64,
    pub intercept: f64,
    pub r2: f64,
    pub alpha_ln_w: f64,
    /// `(ln W², ln τ_opt)`
    pub points: Vec<(f64, f64)>,
}

pub fn fit_alpha(ws: &[f64], tau_opts: &[f64]) -> Result<OptimalTimeFit> {
    if ws.len() != tau_opts.len() {
        return Err(Error::Fit("W and τ_opt lists differ in length".into()));
    }
    if ws.len() < 3 {
        return Err(Error::Fit(format!("need at least three (W, τ_opt) pairs, got {}", ws.len())));
    }
    if ws.iter().chain(tau_opts).any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("W and τ_opt must be positive".into()));
    }
    let points: Vec<(f64, f64)> =
        ws.iter().zip(tau_opts).map(|(w, t)| ((w * w).ln(), t.ln())).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let fit = linear_fit(&xs, &ys)?;
    let ln_w: Vec<f64> = ws.iter().map(|w| w.ln()).collect();
    let fit_w = linear_fit(&ln_w, &ys)?;
    Ok(OptimalTimeFit {
        alpha: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        alpha_ln_w: fit_w.slope,
        points,
    })
}

/// Slope of `ln τ_opt` against `ln r`; `-1/(β+1)` when `n_W = cτ^(-β) + rτ`.
pub fn fit_alpha_vs_rate(rates: &[f64], tau_opts: &[f64]) -> Result<LinearFit> {
    if rates.len() != tau_opts.len() || rates.len() < 3 {
        return Err(Error::Fit("need at least three (r, τ_opt) pairs".into()));
    }
    if rates.iter().chain(tau_opts).any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("r and τ_opt must be positive".into()));
    }
    let xs: Vec<f64> = rates.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = tau_opts.iter().map(|t| t.ln()).collect();
    linear_fit(&xs, &ys)
}
