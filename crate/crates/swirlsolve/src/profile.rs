//! Radial profiles on `[0, 1]`: analytic bumps and tabulated monotone cubic interpolants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("table needs at least 2 knots with matching lengths, got {r} radii and {v} values")]
    Shape { r: usize, v: usize },
    #[error("table radii must be strictly increasing")]
    NotIncreasing,
    #[error("table radii must span [0, 1] with both ends present")]
    Span,
    #[error("value {0} outside the interpolation range")]
    OutOfRange(f64),
}

/// Piecewise cubic Hermite interpolant with slopes limited to preserve monotone data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// Slopes from the harmonic-mean rule of Fritsch and Butland.
    pub fn pchip(x: Vec<f64>, y: Vec<f64>) -> Result<Self, ProfileError> {
        check_knots(&x, &y)?;
        let n = x.len();
        let h: Vec<f64> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
            return Ok(Self { x, y, d });
        }
        for k in 1..n - 1 {
            if del[k - 1] * del[k] > 0.0 {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
            }
        }
        d[0] = end_slope(h[0], h[1], del[0], del[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        Ok(Self { x, y, d })
    }

    /// Given slopes, limited per interval so that monotone data stays monotone.
    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Result<Self, ProfileError> {
        check_knots(&x, &y)?;
        if d.len() != x.len() {
            return Err(ProfileError::Shape { r: x.len(), v: d.len() });
        }
        for k in 0..x.len() - 1 {
            let del = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
            if del == 0.0 {
                d[k] = 0.0;
                d[k + 1] = 0.0;
                continue;
            }
            if d[k] * del < 0.0 {
                d[k] = 0.0;
            }
            if d[k + 1] * del < 0.0 {
                d[k + 1] = 0.0;
            }
            let a = d[k] / del;
            let b = d[k + 1] / del;
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                d[k] = tau * a * del;
                d[k + 1] = tau * b * del;
            }
        }
        Ok(Self { x, y, d })
    }

    /// Overrides the end slopes.
    pub fn set_end_slopes(&mut self, first: Option<f64>, last: Option<f64>) {
        let n = self.d.len();
        if let Some(v) = first {
            self.d[0] = v;
        }
        if let Some(v) = last {
            self.d[n - 1] = v;
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(k) => k.min(n - 2),
            Err(0) => 0,
            Err(k) => (k - 1).min(n - 2),
        }
    }

    /// Value and first derivative at `t`, extrapolating the end cubics outside the knots.
    pub fn eval_d(&self, t: f64) -> (f64, f64) {
        let k = self.interval(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k] * h, self.d[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1;
        let dv = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1)
            / h;
        (v, dv)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_d(t).0
    }

    pub fn deriv(&self, t: f64) -> f64 {
        self.eval_d(t).1
    }

    /// Inverse of an increasing interpolant; knot values map back to their knots exactly.
    pub fn inverse(&self, v: f64) -> Result<f64, ProfileError> {
        let n = self.x.len();
        if !(v >= self.y[0] && v <= self.y[n - 1]) {
            return Err(ProfileError::OutOfRange(v));
        }
        let k = match self.y.binary_search_by(|a| a.partial_cmp(&v).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(k) => return Ok(self.x[k]),
            Err(k) => k - 1,
        };
        let (mut lo, mut hi) = (self.x[k], self.x[k + 1]);
        let h = hi - lo;
        let mut t = lo + h * (v - self.y[k]) / (self.y[k + 1] - self.y[k]);
        for _ in 0..100 {
            let (f, df) = self.eval_d(t);
            let res = f - v;
            if res == 0.0 {
                break;
            }
            if res > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let mut next = if df > 0.0 { t - res / df } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-16 * h.max(t.abs()) || hi - lo <= 1e-16 * h {
                t = next;
                break;
            }
            t = next;
        }
        Ok(t)
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

fn check_knots(x: &[f64], y: &[f64]) -> Result<(), ProfileError> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(ProfileError::Shape { r: x.len(), v: y.len() });
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ProfileError::NotIncreasing);
    }
    Ok(())
}

/// Smooth radial shapes used by the named perturbations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BumpShape {
    /// `r (1 - r^2)`
    SwirlCubic,
    /// `(1 - r^2)^2`
    Quartic,
}

impl BumpShape {
    /// Value and first two derivatives.
    pub fn eval(self, r: f64) -> [f64; 3] {
        match self {
            BumpShape::SwirlCubic => [r - r * r * r, 1.0 - 3.0 * r * r, -6.0 * r],
            BumpShape::Quartic => {
                let q = 1.0 - r * r;
                [q * q, -4.0 * r * q, -4.0 + 12.0 * r * r]
            }
        }
    }
}

/// A profile `base + sum amplitude_k shape_k(r)` or a tabulated monotone cubic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadialProfile {
    Analytic { base: f64, terms: Vec<(f64, BumpShape)> },
    Table(MonotoneCubic),
    /// Linear combination of other profiles.
    Combination(Vec<(f64, RadialProfile)>),
}

impl RadialProfile {
    pub fn constant(base: f64) -> Self {
        RadialProfile::Analytic { base, terms: Vec::new() }
    }

    pub fn table(r: Vec<f64>, values: Vec<f64>) -> Result<Self, ProfileError> {
        check_knots(&r, &values)?;
        if r[0] != 0.0 || r[r.len() - 1] != 1.0 {
            return Err(ProfileError::Span);
        }
        Ok(RadialProfile::Table(MonotoneCubic::pchip(r, values)?))
    }

    pub fn add_term(&mut self, amplitude: f64, shape: BumpShape) {
        match self {
            RadialProfile::Analytic { terms, .. } => terms.push((amplitude, shape)),
            RadialProfile::Table(_) | RadialProfile::Combination(_) => {}
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.eval_d(r).0
    }

    pub fn eval_d(&self, r: f64) -> (f64, f64) {
        match self {
            RadialProfile::Analytic { base, terms } => {
                let mut v = *base;
                let mut d = 0.0;
                for &(a, s) in terms {
                    let e = s.eval(r);
                    v += a * e[0];
                    d += a * e[1];
                }
                (v, d)
            }
            RadialProfile::Table(t) => t.eval_d(r),
            RadialProfile::Combination(parts) => parts.iter().fold((0.0, 0.0), |(v, d), (c, p)| {
                let (pv, pd) = p.eval_d(r);
                (v + c * pv, d + c * pd)
            }),
        }
    }

    pub fn deriv(&self, r: f64) -> f64 {
        self.eval_d(r).1
    }

    /// Second derivative, differenced for tables.
    pub fn deriv2(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Analytic { terms, .. } => {
                terms.iter().map(|&(a, s)| a * s.eval(r)[2]).sum()
            }
            RadialProfile::Table(t) => {
                let h = 1e-5;
                let (a, b) = ((r - h).max(0.0), (r + h).min(1.0));
                (t.deriv(b) - t.deriv(a)) / (b - a)
            }
            RadialProfile::Combination(parts) => parts.iter().map(|(c, p)| c * p.deriv2(r)).sum(),
        }
    }

    /// Value at the axis.
    pub fn at_axis(&self) -> f64 {
        self.eval(0.0)
    }
}
