//! Generalized gamma process (GGP) special functions.
//!
//! The GGP restricted to a location window of measure `alpha` has Lévy
//! intensity `alpha · w^{-1-σ} e^{-τw} / Γ(1-σ) dw`. Its total mass `T` has
//! Laplace exponent `ψ(u) = (α/σ)[(u+τ)^σ − τ^σ]` and a density obtained by
//! scaling and exponentially tilting a positive σ-stable law, whose density is
//! evaluated through Zolotarev's integral over `(0, π)`.
//!
//! Everything likelihood-adjacent is exposed in log domain.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Quadrature;
use crate::special::lgamma;

/// Parameters `(α, σ, τ)` of a GGP restricted to `[0, α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgpParams {
    alpha: f64,
    sigma: f64,
    tau: f64,
}

impl GgpParams {
    /// Only the infinite-activity region `0 < σ < 1`, `τ ≥ 0` is accepted.
    pub fn new(alpha: f64, sigma: f64, tau: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::domain(format!("sigma must lie in (0, 1), got {sigma}")));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::domain(format!("tau must be nonnegative, got {tau}")));
        }
        Ok(Self { alpha, sigma, tau })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `θ = α/σ`.
    pub fn theta(&self) -> f64 {
        self.alpha / self.sigma
    }

    /// `θ^{1/σ}`: the total mass at `τ = 0` is this multiple of a standard
    /// σ-stable variable.
    pub fn stable_scale(&self) -> f64 {
        (self.theta().ln() / self.sigma).exp()
    }

    /// Tilting parameter `λ = τ θ^{1/σ}` acting on the standardised variable.
    pub fn tilt(&self) -> f64 {
        self.tau * self.stable_scale()
    }

    /// `E[T] = α τ^{σ−1}`; infinite in the pure stable case.
    pub fn mean_total_mass(&self) -> f64 {
        if self.tau > 0.0 {
            self.alpha * self.tau.powf(self.sigma - 1.0)
        } else {
            f64::INFINITY
        }
    }

    /// A representative scale of the total mass: its mean when finite,
    /// otherwise the stable scale.
    pub fn typical_total_mass(&self) -> f64 {
        let m = self.mean_total_mass();
        if m.is_finite() {
            m
        } else {
            self.stable_scale()
        }
    }
}

/// Log of the unit-window Lévy density `w^{-1-σ} e^{-τw} / Γ(1-σ)`.
pub fn log_levy_density(sigma: f64, tau: f64, w: f64) -> f64 {
    -(1.0 + sigma) * w.ln() - tau * w - lgamma(1.0 - sigma)
}

/// `ρ_{σ,τ}(w) = w^{-1-σ} e^{-τw} / Γ(1-σ)`.
///
/// This is the intensity per unit of location measure; multiply by `α` for
/// the intensity of the restricted process.
pub fn levy_density(params: &GgpParams, w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::domain(format!("Lévy density needs w > 0, got {w}")));
    }
    Ok(log_levy_density(params.sigma, params.tau, w).exp())
}

/// `ψ(u) = (α/σ)[(u+τ)^σ − τ^σ]`.
pub fn laplace_exponent(params: &GgpParams, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::domain(format!("Laplace exponent needs u >= 0, got {u}")));
    }
    let GgpParams { sigma, tau, .. } = *params;
    Ok(params.theta() * ((u + tau).powf(sigma) - tau.powf(sigma)))
}

/// `sin(u)` on `(0, π)` evaluated through `π − u` past the midpoint, which keeps
/// relative accuracy near the right endpoint.
fn sin_reflected(u: f64) -> f64 {
    if u > 0.5 * PI {
        (PI - u).sin()
    } else {
        u.sin()
    }
}

/// `log A(σ, u)` without argument checks.
pub(crate) fn log_zolotarev_a_unchecked(sigma: f64, u: f64) -> f64 {
    let one_m = 1.0 - sigma;
    let num = one_m * ((one_m * u).sin()).ln() + sigma * ((sigma * u).sin()).ln();
    (num - sin_reflected(u).ln()) / one_m
}

/// Zolotarev's function
/// `A(σ,u) = [sin((1−σ)u)^{1−σ} sin(σu)^σ / sin u]^{1/(1−σ)}` on `(0, π)`.
pub fn zolotarev_a(sigma: f64, u: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(u > 0.0 && u < PI) {
        return Err(Error::domain(format!("Zolotarev A needs u in (0, π), got {u}")));
    }
    Ok(log_zolotarev_a_unchecked(sigma, u).exp())
}

/// `ln(sin x / x)` with full relative accuracy for small `x`.
fn ln_sinc(x: f64) -> f64 {
    if x < 0.25 {
        // Taylor coefficients from the Bernoulli-number expansion.
        const C: [f64; 8] = [
            -1.0 / 6.0,
            -1.0 / 180.0,
            -1.0 / 2835.0,
            -1.0 / 37800.0,
            -1.0 / 467_775.0,
            -691.0 / 3_831_077_250.0,
            -1.566_139_132_276_698_4e-8,
            -1.388_413_049_373_729_9e-9,
        ];
        let x2 = x * x;
        C.iter().rev().fold(0.0, |acc, &c| acc * x2 + c) * x2
    } else {
        (sin_reflected(x) / x).ln()
    }
}

/// `ln A(σ,u) − ln A(σ,0+)`, accurate when `u` is small and the difference
/// would otherwise cancel.
fn log_zolotarev_ratio(sigma: f64, u: f64) -> f64 {
    let one_m = 1.0 - sigma;
    (one_m * ln_sinc(one_m * u) + sigma * ln_sinc(sigma * u) - ln_sinc(u)) / one_m
}

/// `lim_{u→0+} A(σ, u) = (1−σ) σ^{σ/(1−σ)}`, the minimum of `A(σ, ·)`.
pub fn zolotarev_a_at_zero(sigma: f64) -> f64 {
    (1.0 - sigma) * (sigma.ln() * sigma / (1.0 - sigma)).exp()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::domain(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    Ok(())
}

/// Breakpoints on `[0, π/2]` refining geometrically towards zero down to
/// `width`.
fn geometric_breakpoints(width: f64) -> Vec<f64> {
    let mut pts = vec![0.5 * PI, 0.25 * PI, 0.125 * PI];
    let mut h = 0.125 * PI;
    while h > width && pts.len() < 64 {
        h *= 0.5;
        pts.push(h);
    }
    pts.push(0.0);
    pts.reverse();
    pts
}

/// `ln A(σ, π − v)` evaluated directly in the reflected angle `v`.
fn log_zolotarev_a_reflected(sigma: f64, v: f64) -> f64 {
    let one_m = 1.0 - sigma;
    let num = one_m * (sigma * PI + one_m * v).sin().ln() + sigma * (sigma * (PI - v)).sin().ln();
    (num - v.sin().ln()) / one_m
}

fn stable_quadrature() -> Quadrature {
    Quadrature {
        abs_tol: 0.0,
        rel_tol: 1e-10,
        max_panels: 6000,
    }
}

/// Log of the positive σ-stable density with Laplace transform `e^{-s^σ}`,
/// by quadrature of Zolotarev's representation.
pub fn log_stable_density(sigma: f64, x: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !(x > 0.0) {
        return Err(Error::domain(format!("stable density needs x > 0, got {x}")));
    }
    let one_m = 1.0 - sigma;
    let log_x = x.ln();
    let c = (-sigma / one_m * log_x).exp();
    let a0 = zolotarev_a_at_zero(sigma);
    let log_a0 = a0.ln();
    // Left half in u: the integrand peaks at u = 0 with width ~ c^{-1/2}.
    let left = |u: f64| {
        if u <= 0.0 {
            return a0;
        }
        let d = log_zolotarev_ratio(sigma, u);
        a0 * d.exp() * (-a0 * d.exp_m1() * c).exp()
    };
    // Right half in v = π − u: A blows up as v → 0 and the mass sits at
    // v ~ c^{1−σ}.
    let right = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        let d = log_zolotarev_a_reflected(sigma, v) - log_a0;
        let e = a0 * d.exp_m1() * c;
        if e > 745.0 {
            return 0.0;
        }
        a0 * d.exp() * (-e).exp()
    };
    let quad = stable_quadrature();
    let wrap = |e: Error| Error::numeric("stable_density", format!("σ={sigma}, x={x}: {e}"));
    let est_left = quad
        .integrate_panels(left, &geometric_breakpoints(0.05 / (1.0 + c).sqrt()))
        .map_err(wrap)?;
    let est_right = quad
        .integrate_panels(right, &geometric_breakpoints(0.1 * c.powf(one_m)))
        .map_err(wrap)?;
    let total = est_left.value + est_right.value;
    if !(total > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((sigma / (PI * one_m)).ln() - log_x / one_m - a0 * c + total.ln())
}
/// σ-stable density `f_σ(x)`.
pub fn stable_density(sigma: f64, x: f64) -> Result<f64> {
    Ok(log_stable_density(sigma, x)?.exp())
}

/// Log of the total-mass density `g_{α,σ,τ}(t)`.
pub fn log_total_mass_density(params: &GgpParams, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("total-mass density needs t > 0, got {t}")));
    }
    let scale = params.stable_scale();
    let log_f = log_stable_density(params.sigma, t / scale)?;
    Ok(log_f - scale.ln() + log_tilt_normaliser(params) - params.tau * t)
}

/// `g_{α,σ,τ}(t) = θ^{-1/σ} f_σ(t θ^{-1/σ}) e^{λ^σ − λ t θ^{-1/σ}}`.
pub fn total_mass_density(params: &GgpParams, t: f64) -> Result<f64> {
    Ok(log_total_mass_density(params, t)?.exp())
}

/// `λ^σ = θ τ^σ`.
fn log_tilt_normaliser(params: &GgpParams) -> f64 {
    if params.tau == 0.0 {
        0.0
    } else {
        params.theta() * params.tau.powf(params.sigma)
    }
}

/// Joint log density of the total mass `t` and Zolotarev's auxiliary angle
/// `u ∈ (0, π)`; integrating `exp` of it over `u` gives `g_{α,σ,τ}(t)`.
///
/// Returns `-∞` outside the support.
pub fn log_total_mass_density_augmented(params: &GgpParams, t: f64, u: f64) -> f64 {
    if !(t > 0.0 && u > 0.0 && u < PI) {
        return f64::NEG_INFINITY;
    }
    let sigma = params.sigma;
    let one_m = 1.0 - sigma;
    let log_scale = params.theta().ln() / sigma;
    let log_x = t.ln() - log_scale;
    let log_a = log_zolotarev_a_unchecked(sigma, u);
    let expo = (log_a - sigma / one_m * log_x).exp();
    -log_scale + (sigma / (PI * one_m)).ln() - log_x / one_m + log_a - expo
        + log_tilt_normaliser(params)
        - params.tau * t
}

/// `α ∫_0^ε h(w) w ρ(dw)`-type integrals over the truncated part of the Lévy
/// measure, with `h` smooth; the substitution `w = ε r^{1/(1−σ)}` removes the
/// `w^{−σ}` singularity.
fn lower_tail_integral<F: Fn(f64) -> f64>(params: &GgpParams, eps: f64, h: F) -> Result<f64> {
    let sigma = params.sigma;
    let one_m = 1.0 - sigma;
    let pre = params.alpha * (one_m * eps.ln()).exp() / (one_m * lgamma(one_m).exp());
    let est = Quadrature::new(1e-14, 1e-12).integrate(
        |r: f64| {
            let w = eps * r.powf(1.0 / one_m);
            h(w) * (-params.tau * w).exp()
        },
        0.0,
        1.0,
    )?;
    Ok(pre * est.value)
}

/// Expected mass `α ∫_0^ε w ρ(dw)` carried by atoms below the threshold `ε`.
pub fn truncated_mass_mean(params: &GgpParams, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain("truncation threshold must be positive"));
    }
    lower_tail_integral(params, eps, |_| 1.0)
}

/// Neglected tail `α ∫_0^ε (1 − e^{−w}) ρ(dw)`.
pub fn truncated_tail_mass(params: &GgpParams, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::domain("truncation threshold must be positive"));
    }
    lower_tail_integral(params, eps, |w| {
        if w < 1e-8 {
            1.0 - 0.5 * w
        } else {
            -(-w).exp_m1() / w
        }
    })
}

/// Inverse-CDF sampler for the total mass backed by a quadrature CDF table on
/// a uniform grid in `log t`.
#[derive(Debug, Clone)]
pub struct TotalMassSampler {
    params: GgpParams,
    log_t: Vec<f64>,
    cdf: Vec<f64>,
    /// Mass the table assigns to the whole grid before normalisation.
    raw_total: f64,
}

impl TotalMassSampler {
    const MAX_STEP: f64 = 0.05;

    pub fn new(params: GgpParams) -> Result<Self> {
        // Density of y = log t is t·g(t).
        let log_p = |y: f64| -> Result<f64> { Ok(y + log_total_mass_density(&params, y.exp())?) };
        let center = params.typical_total_mass().ln();
        let peak = {
            let mut best = log_p(center)?;
            for k in 1..=40 {
                for y in [center - 0.5 * k as f64, center + 0.5 * k as f64] {
                    let v = log_p(y)?;
                    if v > best {
                        best = v;
                    }
                }
            }
            best
        };
        let cutoff = peak - 40.0;
        let mut lo = center - 0.5;
        while log_p(lo)? > cutoff {
            lo -= 0.5;
            if lo < center - 400.0 {
                break;
            }
        }
        let mut hi = center + 0.5;
        while log_p(hi)? > cutoff {
            hi += 0.5;
            if hi > center + 400.0 {
                break;
            }
        }
        let cells = (((hi - lo) / Self::MAX_STEP).ceil() as usize).clamp(64, 20_000);
        let h = (hi - lo) / cells as f64;
        let mut log_t = Vec::with_capacity(cells + 1);
        let mut cdf = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        let mut left = log_p(lo)?.exp();
        log_t.push(lo);
        cdf.push(0.0);
        for k in 0..cells {
            let y0 = lo + k as f64 * h;
            let mid = log_p(y0 + 0.5 * h)?.exp();
            let right = log_p(y0 + h)?.exp();
            acc += h / 6.0 * (left + 4.0 * mid + right);
            left = right;
            log_t.push(y0 + h);
            cdf.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::numeric(
                "total-mass CDF table",
                format!("degenerate table mass {acc} for {params:?}"),
            ));
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self {
            params,
            log_t,
            cdf,
            raw_total: acc,
        })
    }

    pub fn params(&self) -> &GgpParams {
        &self.params
    }

    /// Quadrature mass captured by the table; should be 1 up to truncation of
    /// the far tails.
    pub fn table_mass(&self) -> f64 {
        self.raw_total
    }

    /// Tabulated CDF, linear in `log t` between grid nodes.
    pub fn cdf(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        let y = t.ln();
        let n = self.log_t.len();
        if y <= self.log_t[0] {
            return 0.0;
        }
        if y >= self.log_t[n - 1] {
            return 1.0;
        }
        let h = self.log_t[1] - self.log_t[0];
        let k = (((y - self.log_t[0]) / h) as usize).min(n - 2);
        let frac = (y - self.log_t[k]) / h;
        self.cdf[k] + frac * (self.cdf[k + 1] - self.cdf[k])
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let k = self.cdf.partition_point(|&c| c < p);
        if k == 0 {
            return self.log_t[0].exp();
        }
        if k >= self.cdf.len() {
            return self.log_t[self.log_t.len() - 1].exp();
        }
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let frac = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.5 };
        (self.log_t[k - 1] + frac * (self.log_t[k] - self.log_t[k - 1])).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Open interval keeps the draw strictly inside the grid.
        let p: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        self.quantile(p)
    }
}

type SamplerCache = Mutex<HashMap<[u64; 3], Arc<TotalMassSampler>>>;

fn sampler_cache() -> &'static SamplerCache {
    static CACHE: OnceLock<SamplerCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared, lazily built sampler for a parameter triple.
pub fn total_mass_sampler(params: &GgpParams) -> Result<Arc<TotalMassSampler>> {
    let key = [
        params.alpha.to_bits(),
        params.sigma.to_bits(),
        params.tau.to_bits(),
    ];
    if let Some(s) = sampler_cache().lock().expect("sampler cache poisoned").get(&key) {
        return Ok(Arc::clone(s));
    }
    let built = Arc::new(TotalMassSampler::new(*params)?);
    let mut cache = sampler_cache().lock().expect("sampler cache poisoned");
    Ok(Arc::clone(cache.entry(key).or_insert(built)))
}

/// Draws a total mass `T ~ g_{α,σ,τ}`.
pub fn sample_total_mass<R: Rng + ?Sized>(params: &GgpParams, rng: &mut R) -> Result<f64> {
    Ok(total_mass_sampler(params)?.sample(rng))
}
