//! Drive profiles Ẽ(t) and M(t).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Gaussian tails are negligible (e^-36) beyond this many t_p from the centre.
pub const QUIET_WIDTHS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSample {
    pub e_tilde: f64,
    pub e_dot: f64,
    pub m: f64,
    pub m_dot: f64,
}

/// Sampled drive, interpolated by clamped cubic splines (zero slope at both ends) and
/// held constant outside the sample range, so the profile stays C¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampledRaw", into = "SampledRaw")]
pub struct SampledPulse {
    t: Vec<f64>,
    e: Spline,
    m: Spline,
}

#[derive(Serialize, Deserialize)]
struct SampledRaw {
    t: Vec<f64>,
    e_tilde: Vec<f64>,
    m: Vec<f64>,
}

impl TryFrom<SampledRaw> for SampledPulse {
    type Error = Error;
    fn try_from(r: SampledRaw) -> Result<Self> {
        SampledPulse::new(r.t, r.e_tilde, r.m)
    }
}

impl From<SampledPulse> for SampledRaw {
    fn from(s: SampledPulse) -> Self {
        SampledRaw { e_tilde: s.e.y.clone(), m: s.m.y.clone(), t: s.t }
    }
}

impl SampledPulse {
    pub fn new(t: Vec<f64>, e_tilde: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if t.len() < 4 || e_tilde.len() != t.len() || m.len() != t.len() {
            return Err(invalid("sampled pulse needs at least 4 points and equal-length columns"));
        }
        if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotoneTime(i + 1));
        }
        if t.iter().chain(&e_tilde).chain(&m).any(|v| !v.is_finite()) {
            return Err(invalid("sampled pulse contains non-finite values"));
        }
        let e = Spline::clamped(&t, &e_tilde);
        let m = Spline::clamped(&t, &m);
        Ok(Self { t, e, m })
    }

    fn eval(&self, t: f64) -> PulseSample {
        let (e_tilde, e_dot) = self.e.eval(&self.t, t);
        let (m, m_dot) = self.m.eval(&self.t, t);
        PulseSample { e_tilde, e_dot, m, m_dot }
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Spline {
    y: Vec<f64>,
    /// Second derivatives at the knots.
    d2: Vec<f64>,
}

impl Spline {
    fn clamped(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        // Tridiagonal system for the knot second derivatives with f'(x0) = f'(xn) = 0.
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut r = vec![0.0; n];
        b[0] = h[0] / 3.0;
        c[0] = h[0] / 6.0;
        r[0] = (y[1] - y[0]) / h[0];
        for i in 1..n - 1 {
            a[i] = h[i - 1] / 6.0;
            b[i] = (h[i - 1] + h[i]) / 3.0;
            c[i] = h[i] / 6.0;
            r[i] = (y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1];
        }
        a[n - 1] = h[n - 2] / 6.0;
        b[n - 1] = h[n - 2] / 3.0;
        r[n - 1] = -(y[n - 1] - y[n - 2]) / h[n - 2];
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            r[i] -= w * r[i - 1];
        }
        let mut d2 = vec![0.0; n];
        d2[n - 1] = r[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            d2[i] = (r[i] - c[i] * d2[i + 1]) / b[i];
        }
        Self { y: y.to_vec(), d2 }
    }

    fn eval(&self, x: &[f64], t: f64) -> (f64, f64) {
        let n = x.len();
        if t <= x[0] {
            return (self.y[0], 0.0);
        }
        if t >= x[n - 1] {
            return (self.y[n - 1], 0.0);
        }
        let i = x.partition_point(|&v| v <= t).saturating_sub(1).min(n - 2);
        let h = x[i + 1] - x[i];
        let a = (x[i + 1] - t) / h;
        let b = (t - x[i]) / h;
        let (m0, m1) = (self.d2[i], self.d2[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let dv = (self.y[i + 1] - self.y[i]) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (v, dv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseShape {
    /// Ẽ ∝ −d/dt of a Gaussian, normalised to peak e_max; integrates to zero.
    BipolarDerivative,
    UnipolarGaussian,
    CustomSampled(SampledPulse),
}

impl PulseShape {
    pub fn tag(&self) -> &'static str {
        match self {
            PulseShape::BipolarDerivative => "bipolar-derivative",
            PulseShape::UnipolarGaussian => "unipolar-gaussian",
            PulseShape::CustomSampled(_) => "custom-sampled",
        }
    }
}

/// Ẽ(t) and M(t). For the analytic shapes
/// M(t) = M0 − (M0 − m_min) exp(−(t − t_center − m_offset)²/t_p²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseProfile {
    pub shape: PulseShape,
    pub m0: f64,
    pub e_max: f64,
    pub m_min: f64,
    pub t_p: f64,
    pub t_center: f64,
    /// Shift of the M-dip relative to the Ẽ centre. With a centred dip and a bipolar Ẽ
    /// the transported number vanishes by symmetry.
    #[serde(default)]
    pub m_offset: f64,
}

pub fn make_pulse(shape: &str, m0: f64, e_max: f64, m_min: f64, t_p: f64, t_center: f64) -> Result<PulseProfile> {
    let shape = match shape {
        "bipolar-derivative" | "bipolar" => PulseShape::BipolarDerivative,
        "unipolar-gaussian" | "gaussian" => PulseShape::UnipolarGaussian,
        other => return Err(Error::InvalidShape(other.to_string())),
    };
    let p = PulseProfile { shape, m0, e_max, m_min, t_p, t_center, m_offset: 0.0 };
    p.validate()?;
    Ok(p)
}

impl PulseProfile {
    /// Ẽ ≡ 0, M ≡ M0.
    pub fn null(m0: f64) -> Self {
        Self {
            shape: PulseShape::BipolarDerivative,
            m0,
            e_max: 0.0,
            m_min: m0,
            t_p: 1.0,
            t_center: 0.0,
            m_offset: 0.0,
        }
    }

    /// Sampled drive; m_min is taken from a dense scan of the interpolant.
    pub fn custom(m0: f64, samples: SampledPulse) -> Result<Self> {
        let (a, b) = samples.range();
        let n = 20 * samples.t.len();
        let mut m_min = f64::INFINITY;
        let mut e_max = 0.0f64;
        for i in 0..=n {
            let s = samples.eval(a + (b - a) * i as f64 / n as f64);
            m_min = m_min.min(s.m);
            e_max = e_max.max(s.e_tilde.abs());
        }
        let p = Self {
            shape: PulseShape::CustomSampled(samples),
            m0,
            e_max,
            m_min,
            t_p: (b - a) / 2.0,
            t_center: 0.5 * (a + b),
            m_offset: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_m_offset(mut self, m_offset: f64) -> Self {
        self.m_offset = m_offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m0 > 0.0) {
            return Err(invalid(format!("M0 must be positive, got {}", self.m0)));
        }
        if !(self.m_min > 0.0) {
            return Err(invalid(format!("m_min must be positive, got {}", self.m_min)));
        }
        if !(self.t_p > 0.0) {
            return Err(invalid(format!("t_p must be positive, got {}", self.t_p)));
        }
        if !matches!(self.shape, PulseShape::CustomSampled(_)) && self.m_min > self.m0 {
            return Err(invalid(format!("m_min = {} exceeds M0 = {}", self.m_min, self.m0)));
        }
        if !(self.e_max.is_finite() && self.t_center.is_finite() && self.m_offset.is_finite()) {
            return Err(invalid("pulse amplitude and centre must be finite"));
        }
        Ok(())
    }

    pub fn evaluate(&self, t: f64) -> PulseSample {
        let (e_tilde, e_dot) = match &self.shape {
            PulseShape::BipolarDerivative => {
                let x = (t - self.t_center) / self.t_p;
                let g = (-x * x).exp();
                let a = self.e_max * (2.0 * std::f64::consts::E).sqrt();
                (-a * x * g, -a * (1.0 - 2.0 * x * x) * g / self.t_p)
            }
            PulseShape::UnipolarGaussian => {
                let x = (t - self.t_center) / self.t_p;
                let g = self.e_max * (-x * x).exp();
                (g, -2.0 * x * g / self.t_p)
            }
            PulseShape::CustomSampled(s) => return s.eval(t),
        };
        let y = (t - self.t_center - self.m_offset) / self.t_p;
        let dip = (self.m0 - self.m_min) * (-y * y).exp();
        PulseSample { e_tilde, e_dot, m: self.m0 - dip, m_dot: 2.0 * y * dip / self.t_p }
    }

    pub fn e_tilde(&self, t: f64) -> f64 {
        self.evaluate(t).e_tilde
    }

    pub fn m(&self, t: f64) -> f64 {
        self.evaluate(t).m
    }

    /// Interval outside which the drive is quiescent.
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            PulseShape::CustomSampled(s) => s.range(),
            _ => {
                let lo = self.t_center.min(self.t_center + self.m_offset);
                let hi = self.t_center.max(self.t_center + self.m_offset);
                (lo - QUIET_WIDTHS * self.t_p, hi + QUIET_WIDTHS * self.t_p)
            }
        }
    }

    /// Time at which the M-dip is deepest.
    pub fn t_dip(&self) -> f64 {
        match &self.shape {
            PulseShape::CustomSampled(s) => {
                let (a, b) = s.range();
                let n = 20 * s.t.len();
                (0..=n)
                    .map(|i| a + (b - a) * i as f64 / n as f64)
                    .min_by(|x, y| s.eval(*x).m.total_cmp(&s.eval(*y).m))
                    .unwrap()
            }
            _ => self.t_center + self.m_offset,
        }
    }
}
