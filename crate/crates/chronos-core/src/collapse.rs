//! Readout-time densities f(t) on a truncated support [0, T_max].
//!
//! Families whose natural support extends past T_max (or starts after 0) are
//! truncated and renormalized in closed form, so the represented density
//! integrates to one exactly. The Delta variant is symbolic: it carries no
//! pointwise density and is handled by dedicated branches downstream, which
//! keeps sharp-time recovery free of quadrature error.

use crate::error::{Error, Result};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist, Normal};
use statrs::function::gamma::{gamma_lr, ln_gamma};
use std::fmt;

const SQRT_TAU: f64 = 2.5066282746310002; // sqrt(2 pi)

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_TAU
}

#[derive(Clone, Debug)]
pub enum CollapseKind {
    /// Measurement at exactly t'. Symbolic: no pointwise density.
    Delta { t_prime: f64 },
    /// Constant density on [a, min(b, T_max)].
    Uniform { a: f64, b: f64 },
    /// rate * exp(-rate (t - offset)) for t >= offset, renormalized.
    Exponential { rate: f64, offset: f64 },
    /// Gamma density in (t - offset) with shape >= 1, renormalized.
    Gamma { shape: f64, scale: f64, offset: f64 },
    /// Normal(mu, sigma) restricted to [0, T_max], renormalized.
    TruncatedGaussian { mu: f64, sigma: f64 },
    /// Piecewise-linear density through (times[i], densities[i]).
    Tabulated { times: Vec<f64>, densities: Vec<f64> },
}

/// A readout-time density with support inside [0, t_max], normalized to unit
/// mass on that window.
#[derive(Clone, Debug)]
pub struct CollapseDistribution {
    kind: CollapseKind,
    t_max: f64,
    /// Untruncated mass that falls inside [0, t_max]; the renormalizer.
    mass: f64,
    /// Tabulated only: cumulative mass at each node, front-loaded to [0, 1].
    node_cdf: Vec<f64>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_t_max(t_max: f64) -> Result<()> {
    check_positive("t_max", t_max)
}

impl CollapseDistribution {
    pub fn delta(t_prime: f64) -> Result<Self> {
        if !(t_prime.is_finite() && t_prime >= 0.0) {
            return Err(Error::Domain(format!(
                "delta time must be nonnegative, got {t_prime}"
            )));
        }
        Ok(CollapseDistribution {
            kind: CollapseKind::Delta { t_prime },
            t_max: t_prime,
            mass: 1.0,
            node_cdf: Vec::new(),
        })
    }

    pub fn uniform(a: f64, b: f64, t_max: f64) -> Result<Self> {
        check_t_max(t_max)?;
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b > a) {
            return Err(Error::Domain(format!(
                "uniform window needs 0 <= a < b, got [{a}, {b}]"
            )));
        }
        if a >= t_max {
            return Err(Error::Domain(format!(
                "uniform window [{a}, {b}] has no mass inside [0, {t_max}]"
            )));
        }
        let hi = b.min(t_max);
        Ok(CollapseDistribution {
            kind: CollapseKind::Uniform { a, b },
            t_max,
            mass: (hi - a) / (b - a),
            node_cdf: Vec::new(),
        })
    }

    pub fn exponential(rate: f64, offset: f64, t_max: f64) -> Result<Self> {
        check_t_max(t_max)?;
        check_positive("rate", rate)?;
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(Error::Domain(format!(
                "offset must be nonnegative, got {offset}"
            )));
        }
        if offset >= t_max {
            return Err(Error::Domain(format!(
                "offset {offset} leaves no mass inside [0, {t_max}]"
            )));
        }
        let span = t_max - offset;
        let mass = -(-rate * span).exp_m1();
        Ok(CollapseDistribution {
            kind: CollapseKind::Exponential { rate, offset },
            t_max,
            mass,
            node_cdf: Vec::new(),
        })
    }

    pub fn gamma(shape: f64, scale: f64, offset: f64, t_max: f64) -> Result<Self> {
        check_t_max(t_max)?;
        check_positive("scale", scale)?;
        if !(shape.is_finite() && shape >= 1.0) {
            return Err(Error::Domain(format!(
                "shape must be at least 1 so the density stays finite at the \
                 offset, got {shape}"
            )));
        }
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(Error::Domain(format!(
                "offset must be nonnegative, got {offset}"
            )));
        }
        if offset >= t_max {
            return Err(Error::Domain(format!(
                "offset {offset} leaves no mass inside [0, {t_max}]"
            )));
        }
        let mass = gamma_lr(shape, (t_max - offset) / scale);
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::Domain(
                "gamma window holds no representable mass".into(),
            ));
        }
        Ok(CollapseDistribution {
            kind: CollapseKind::Gamma {
                shape,
                scale,
                offset,
            },
            t_max,
            mass,
            node_cdf: Vec::new(),
        })
    }

    pub fn truncated_gaussian(mu: f64, sigma: f64, t_max: f64) -> Result<Self> {
        check_t_max(t_max)?;
        check_positive("sigma", sigma)?;
        if !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be finite, got {mu}")));
        }
        let n = Normal::new(0.0, 1.0).expect("unit normal");
        let mass = n.cdf((t_max - mu) / sigma) - n.cdf(-mu / sigma);
        if !mass.is_finite() || mass <= 1e-300 {
            return Err(Error::Domain(format!(
                "gaussian(mu={mu}, sigma={sigma}) holds no representable mass \
                 inside [0, {t_max}]"
            )));
        }
        Ok(CollapseDistribution {
            kind: CollapseKind::TruncatedGaussian { mu, sigma },
            t_max,
            mass,
            node_cdf: Vec::new(),
        })
    }

    /// Piecewise-linear density through the given nodes. The raw values are
    /// renormalized so the trapezoid mass is exactly one; the support runs
    /// from the first node to the last, which becomes t_max.
    pub fn tabulated(times: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != densities.len() {
            return Err(Error::Domain(format!(
                "tabulated density needs matching time/density lists with at \
                 least two nodes, got {} and {}",
                times.len(),
                densities.len()
            )));
        }
        if !(times[0].is_finite() && times[0] >= 0.0) {
            return Err(Error::Domain(format!(
                "tabulated support must start at or after 0, got {}",
                times[0]
            )));
        }
        for w in times.windows(2) {
            if !(w[1].is_finite() && w[1] > w[0]) {
                return Err(Error::Domain(format!(
                    "tabulated times must strictly increase, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for &d in &densities {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Domain(format!(
                    "tabulated densities must be nonnegative, got {d}"
                )));
            }
        }
        let raw = crate::quad::trapezoid_mass(&times, &densities);
        if !raw.is_finite() || raw <= 0.0 {
            return Err(Error::Domain(
                "tabulated density carries no mass".into(),
            ));
        }
        let densities: Vec<f64> = densities.iter().map(|d| d / raw).collect();
        let mut node_cdf = Vec::with_capacity(times.len());
        let mut acc = 0.0;
        node_cdf.push(0.0);
        for i in 1..times.len() {
            acc += 0.5 * (densities[i - 1] + densities[i]) * (times[i] - times[i - 1]);
            node_cdf.push(acc);
        }
        // Rounding in the running sum is the only error left; pin the top.
        *node_cdf.last_mut().expect("nonempty") = 1.0;
        let t_max = *times.last().expect("nonempty");
        Ok(CollapseDistribution {
            kind: CollapseKind::Tabulated { times, densities },
            t_max,
            mass: 1.0,
            node_cdf,
        })
    }

    /// Tabulated density from two-column CSV text with the exact header `t,f`.
    pub fn tabulated_from_csv(text: &str) -> Result<Self> {
        let (times, densities) = parse_density_csv(text)?;
        CollapseDistribution::tabulated(times, densities)
    }

    pub fn kind(&self) -> &CollapseKind {
        &self.kind
    }

    /// Upper end of the support window.
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn is_delta(&self) -> bool {
        matches!(self.kind, CollapseKind::Delta { .. })
    }

    /// The sharp readout time when this is the symbolic Delta variant.
    pub fn delta_time(&self) -> Option<f64> {
        match self.kind {
            CollapseKind::Delta { t_prime } => Some(t_prime),
            _ => None,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.t_max.max(1.0);
        if !(t.is_finite() && (-slack..=self.t_max + slack).contains(&t)) {
            return Err(Error::Domain(format!(
                "time {t} outside the support [0, {}]",
                self.t_max
            )));
        }
        Ok(())
    }

    /// Normalized density at t in [0, t_max]. The Delta variant has no
    /// pointwise density and reports a variant error.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if self.is_delta() {
            return Err(Error::Variant(
                "the sharp-time variant has no pointwise density; use the \
                 dedicated sharp-time branch instead".into(),
            ));
        }
        Ok(self.pdf_clamped(t))
    }

    /// Density extended by zero outside the support window; the Delta variant
    /// yields zero everywhere (its mass lives in the symbolic branch). Meant
    /// for quadrature loops and report columns.
    pub fn pdf_clamped(&self, t: f64) -> f64 {
        if !t.is_finite() || t < 0.0 || t > self.t_max {
            return 0.0;
        }
        match &self.kind {
            CollapseKind::Delta { .. } => 0.0,
            CollapseKind::Uniform { a, b } => {
                let hi = b.min(self.t_max);
                if t >= *a && t <= hi {
                    1.0 / (b - a) / self.mass
                } else {
                    0.0
                }
            }
            CollapseKind::Exponential { rate, offset } => {
                if t < *offset {
                    0.0
                } else {
                    rate * (-rate * (t - offset)).exp() / self.mass
                }
            }
            CollapseKind::Gamma {
                shape,
                scale,
                offset,
            } => {
                if t < *offset {
                    return 0.0;
                }
                let s = t - offset;
                if s == 0.0 {
                    return if *shape > 1.0 {
                        0.0
                    } else {
                        1.0 / (scale * self.mass)
                    };
                }
                let ln_pdf = (shape - 1.0) * s.ln() - s / scale
                    - ln_gamma(*shape)
                    - shape * scale.ln();
                ln_pdf.exp() / self.mass
            }
            CollapseKind::TruncatedGaussian { mu, sigma } => {
                std_normal_pdf((t - mu) / sigma) / (sigma * self.mass)
            }
            CollapseKind::Tabulated { times, densities } => {
                if t < times[0] {
                    return 0.0;
                }
                let seg = segment_index(times, t);
                let h = times[seg + 1] - times[seg];
                let frac = (t - times[seg]) / h;
                densities[seg] * (1.0 - frac) + densities[seg + 1] * frac
            }
        }
    }

    /// Cumulative mass on [0, t]. Defined for every variant; Delta is the
    /// unit step at its readout time.
    pub fn cdf(&self, t: f64) -> f64 {
        if !t.is_finite() {
            return if t > 0.0 { 1.0 } else { 0.0 };
        }
        if t <= 0.0 && !matches!(self.kind, CollapseKind::Delta { t_prime } if t_prime <= t) {
            return 0.0;
        }
        if t >= self.t_max {
            return 1.0;
        }
        match &self.kind {
            CollapseKind::Delta { t_prime } => {
                if t >= *t_prime {
                    1.0
                } else {
                    0.0
                }
            }
            CollapseKind::Uniform { a, b } => {
                let hi = b.min(self.t_max);
                ((t - a) / (hi - a)).clamp(0.0, 1.0)
            }
            CollapseKind::Exponential { rate, offset } => {
                if t <= *offset {
                    0.0
                } else {
                    (-(-rate * (t - offset)).exp_m1() / self.mass).clamp(0.0, 1.0)
                }
            }
            CollapseKind::Gamma {
                shape,
                scale,
                offset,
            } => {
                if t <= *offset {
                    0.0
                } else {
                    (gamma_lr(*shape, (t - offset) / scale) / self.mass).clamp(0.0, 1.0)
                }
            }
            CollapseKind::TruncatedGaussian { mu, sigma } => {
                let n = Normal::new(0.0, 1.0).expect("unit normal");
                ((n.cdf((t - mu) / sigma) - n.cdf(-mu / sigma)) / self.mass).clamp(0.0, 1.0)
            }
            CollapseKind::Tabulated { times, densities } => {
                if t <= times[0] {
                    return 0.0;
                }
                let seg = segment_index(times, t);
                let tau = t - times[seg];
                let h = times[seg + 1] - times[seg];
                let slope = (densities[seg + 1] - densities[seg]) / h;
                (self.node_cdf[seg] + densities[seg] * tau + 0.5 * slope * tau * tau)
                    .clamp(0.0, 1.0)
            }
        }
    }

    /// Raw k-th moment of the readout time, k in {1, 2}, conditional on the
    /// truncated window.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if !(k == 1 || k == 2) {
            return Err(Error::Domain(format!(
                "only moments 1 and 2 are supported, got {k}"
            )));
        }
        let m = match &self.kind {
            CollapseKind::Delta { t_prime } => t_prime.powi(k as i32),
            CollapseKind::Uniform { a, b } => {
                let hi = b.min(self.t_max);
                if k == 1 {
                    0.5 * (a + hi)
                } else {
                    (a * a + a * hi + hi * hi) / 3.0
                }
            }
            CollapseKind::Exponential { rate, offset } => {
                let span = self.t_max - offset;
                let tail = (-rate * span).exp();
                let m1 = 1.0 / rate - span * tail / self.mass;
                if k == 1 {
                    offset + m1
                } else {
                    let m2 = 2.0 / (rate * rate)
                        - tail * span * (span + 2.0 / rate) / self.mass;
                    offset * offset + 2.0 * offset * m1 + m2
                }
            }
            CollapseKind::Gamma {
                shape,
                scale,
                offset,
            } => {
                let z = (self.t_max - offset) / scale;
                let m1 = shape * scale * gamma_lr(shape + 1.0, z) / self.mass;
                if k == 1 {
                    offset + m1
                } else {
                    let m2 = shape * (shape + 1.0) * scale * scale
                        * gamma_lr(shape + 2.0, z)
                        / self.mass;
                    offset * offset + 2.0 * offset * m1 + m2
                }
            }
            CollapseKind::TruncatedGaussian { mu, sigma } => {
                let alpha = -mu / sigma;
                let beta = (self.t_max - mu) / sigma;
                let (pa, pb) = (std_normal_pdf(alpha), std_normal_pdf(beta));
                let shift = (pa - pb) / self.mass;
                let m1 = mu + sigma * shift;
                if k == 1 {
                    m1
                } else {
                    let var = sigma
                        * sigma
                        * (1.0 + (alpha * pa - beta * pb) / self.mass - shift * shift);
                    var + m1 * m1
                }
            }
            CollapseKind::Tabulated { times, densities } => {
                // The integrand t^k f(t) is at most cubic on each segment, so
                // per-segment three-point quadrature is exact.
                let mut acc = 0.0;
                for i in 0..times.len() - 1 {
                    let (t0, t1) = (times[i], times[i + 1]);
                    let mid = 0.5 * (t0 + t1);
                    let fm = 0.5 * (densities[i] + densities[i + 1]);
                    let g = |t: f64, f: f64| t.powi(k as i32) * f;
                    acc += (t1 - t0) / 6.0
                        * (g(t0, densities[i]) + 4.0 * g(mid, fm) + g(t1, densities[i + 1]));
                }
                acc
            }
        };
        Ok(m)
    }

    /// Variance of the readout time, floored at zero against rounding.
    pub fn variance(&self) -> Result<f64> {
        if self.is_delta() {
            return Ok(0.0);
        }
        let m1 = self.moment(1)?;
        Ok((self.moment(2)? - m1 * m1).max(0.0))
    }

    /// n independent draws by inverse-transform sampling; every draw lies in
    /// [0, t_max].
    pub fn sample(&self, rng: &mut (impl Rng + ?Sized), n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen();
            out.push(self.quantile_from_unit(u));
        }
        Ok(out)
    }

    fn quantile_from_unit(&self, u: f64) -> f64 {
        let t = match &self.kind {
            CollapseKind::Delta { t_prime } => *t_prime,
            CollapseKind::Uniform { a, b } => {
                let hi = b.min(self.t_max);
                a + u * (hi - a)
            }
            CollapseKind::Exponential { rate, offset } => {
                offset + -(-u * self.mass).ln_1p() / rate
            }
            CollapseKind::Gamma {
                shape,
                scale,
                offset,
            } => {
                let g = GammaDist::new(*shape, 1.0 / scale).expect("validated at build");
                offset + g.inverse_cdf(u * self.mass)
            }
            CollapseKind::TruncatedGaussian { mu, sigma } => {
                let n = Normal::new(0.0, 1.0).expect("unit normal");
                let p = n.cdf(-mu / sigma) + u * self.mass;
                mu + sigma * n.inverse_cdf(p.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16))
            }
            CollapseKind::Tabulated { times, densities } => {
                let seg = self
                    .node_cdf
                    .partition_point(|c| *c <= u)
                    .saturating_sub(1)
                    .min(times.len() - 2);
                let target = u - self.node_cdf[seg];
                if target <= 0.0 {
                    times[seg]
                } else {
                    let h = times[seg + 1] - times[seg];
                    let f0 = densities[seg];
                    let slope = (densities[seg + 1] - f0) / h;
                    let disc = (f0 * f0 + 2.0 * slope * target).max(0.0);
                    let tau = 2.0 * target / (f0 + disc.sqrt());
                    times[seg] + tau.min(h)
                }
            }
        };
        t.clamp(0.0, self.t_max)
    }
}

impl fmt::Display for CollapseDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            CollapseKind::Delta { t_prime } => write!(f, "delta(t'={t_prime})"),
            CollapseKind::Uniform { a, b } => write!(f, "uniform({a}, {b})"),
            CollapseKind::Exponential { rate, offset } => {
                write!(f, "exponential(rate={rate}, offset={offset})")
            }
            CollapseKind::Gamma {
                shape,
                scale,
                offset,
            } => write!(f, "gamma(shape={shape}, scale={scale}, offset={offset})"),
            CollapseKind::TruncatedGaussian { mu, sigma } => {
                write!(f, "truncated-gaussian(mu={mu}, sigma={sigma})")
            }
            CollapseKind::Tabulated { times, .. } => {
                write!(f, "tabulated({} nodes)", times.len())
            }
        }
    }
}

/// Largest i with times[i] <= t, capped so i+1 is still a node.
fn segment_index(times: &[f64], t: f64) -> usize {
    times
        .partition_point(|node| *node <= t)
        .saturating_sub(1)
        .min(times.len() - 2)
}

/// Two-column readout-density CSV: exact header `t,f`, one `time,density`
/// pair per line. Returns the raw (unnormalized) columns.
pub fn parse_density_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines.next().map(str::trim).unwrap_or("");
    if header != "t,f" {
        return Err(Error::Domain(format!(
            "density CSV must start with the header \"t,f\", got \"{header}\""
        )));
    }
    let mut times = Vec::new();
    let mut densities = Vec::new();
    for (idx, raw) in lines.enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::Domain(format!(
                "density CSV line {} needs exactly two columns: \"{line}\"",
                idx + 2
            )));
        };
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| {
                Error::Domain(format!(
                    "density CSV line {}: cannot parse \"{s}\" as a number",
                    idx + 2
                ))
            })
        };
        times.push(parse(a)?);
        densities.push(parse(b)?);
    }
    Ok((times, densities))
}
