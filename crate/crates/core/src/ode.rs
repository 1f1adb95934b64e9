//! Dormand–Prince 8(5,3) explicit Runge–Kutta integrator with adaptive step control.
//!
//! The tableau and the combined 5th/3rd-order error estimate follow Hairer, Nørsett & Wanner.
//! Error control uses a scaled max-norm so that large batched systems cannot hide a
//! badly resolved component behind an average.

#![allow(clippy::excessive_precision)]
#![allow(clippy::needless_range_loop)]

use thiserror::Error;

const C2: f64 = 0.526001519587677318785587544488e-01;
const C3: f64 = 0.789002279381515978178381316732e-01;
const C4: f64 = 0.118350341907227396726757197510;
const C5: f64 = 0.281649658092772603273242802490;
const C6: f64 = 0.333333333333333333333333333333;
const C7: f64 = 0.25;
const C8: f64 = 0.307692307692307692307692307692;
const C9: f64 = 0.651282051282051282051282051282;
const C10: f64 = 0.6;
const C11: f64 = 0.857142857142857142857142857142;

const A21: f64 = 5.26001519587677318785587544488e-02;
const A31: f64 = 1.97250569845378994544595329183e-02;
const A32: f64 = 5.91751709536136983633785987549e-02;
const A41: f64 = 2.95875854768068491816892993775e-02;
const A43: f64 = 8.87627564304205475450678981324e-02;
const A51: f64 = 2.41365134159266685502369798665e-01;
const A53: f64 = -8.84549479328286085344864962717e-01;
const A54: f64 = 9.24834003261792003115737966543e-01;
const A61: f64 = 3.70370370370370370370370370370e-02;
const A64: f64 = 1.70828608729473871279604482173e-01;
const A65: f64 = 1.25467687566822425016691814123e-01;
const A71: f64 = 3.71093750000000000000000000000e-02;
const A74: f64 = 1.70252211019544039314978060272e-01;
const A75: f64 = 6.02165389804559606850219397283e-02;
const A76: f64 = -1.75781250000000000000000000000e-02;
const A81: f64 = 3.70920001185047927108779319836e-02;
const A84: f64 = 1.70383925712239993810214054705e-01;
const A85: f64 = 1.07262030446373284651809199168e-01;
const A86: f64 = -1.53194377486244017527936158236e-02;
const A87: f64 = 8.27378916381402288758473766002e-03;
const A91: f64 = 6.24110958716075717114429577812e-01;
const A94: f64 = -3.36089262944694129406857109825e+00;
const A95: f64 = -8.68219346841726006818189891453e-01;
const A96: f64 = 2.75920996994467083049415600797e+01;
const A97: f64 = 2.01540675504778934086186788979e+01;
const A98: f64 = -4.34898841810699588477366255144e+01;
const A101: f64 = 4.77662536438264365890433908527e-01;
const A104: f64 = -2.48811461997166764192642586468e+00;
const A105: f64 = -5.90290826836842996371446475743e-01;
const A106: f64 = 2.12300514481811942347288949897e+01;
const A107: f64 = 1.52792336328824235832596922938e+01;
const A108: f64 = -3.32882109689848629194453265587e+01;
const A109: f64 = -2.03312017085086261358222928593e-02;
const A111: f64 = -9.37142430085987325717040528057e-01;
const A114: f64 = 5.18637242884406370830023853209e+00;
const A115: f64 = 1.09143734899672957818500254654e+00;
const A116: f64 = -8.14978701074692612513997267357e+00;
const A117: f64 = -1.85200656599969598641566180701e+01;
const A118: f64 = 2.27394870993505042818970056734e+01;
const A119: f64 = 2.49360555267965238987089396762e+00;
const A1110: f64 = -3.04676447189821950038236690220e+00;
const A121: f64 = 2.27331014751653820792359768449e+00;
const A124: f64 = -1.05344954667372501984066689879e+01;
const A125: f64 = -2.00087205822486249909675718444e+00;
const A126: f64 = -1.79589318631187989172765950534e+01;
const A127: f64 = 2.79488845294199600508499808837e+01;
const A128: f64 = -2.85899827713502369474065508674e+00;
const A129: f64 = -8.87285693353062954433549289258e+00;
const A1210: f64 = 1.23605671757943030647266201528e+01;
const A1211: f64 = 6.43392746015763530355970484046e-01;

const B1: f64 = 5.42937341165687622380535766363e-02;
const B6: f64 = 4.45031289275240888144113950566e+00;
const B7: f64 = 1.89151789931450038304281599044e+00;
const B8: f64 = -5.80120396001058478146721142270e+00;
const B9: f64 = 3.11164366957819894408916062370e-01;
const B10: f64 = -1.52160949662516078556178806805e-01;
const B11: f64 = 2.01365400804030348374776537501e-01;
const B12: f64 = 4.47106157277725905176885569043e-02;

const BHH1: f64 = 0.244094488188976377952755905512e+00;
const BHH2: f64 = 0.733846688281611857341361741547e+00;
const BHH3: f64 = 0.220588235294117647058823529412e-01;

const ER1: f64 = 0.1312004499419488073250102996e-01;
const ER6: f64 = -0.1225156446376204440720569753e+01;
const ER7: f64 = -0.4957589496572501915214079952e+00;
const ER8: f64 = 0.1664377182454986536961530415e+01;
const ER9: f64 = -0.3503288487499736816886487290e+00;
const ER10: f64 = 0.3341791187130174790297318841e+00;
const ER11: f64 = 0.8192320648511571246570742613e-01;
const ER12: f64 = -0.2235530786388629525884427845e-01;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
}

/// A first-order system `y' = f(t, y)` over real components.
pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Per-component error scale. The default is the usual mixed absolute/relative scale.
    fn error_scale(&self, y0: &[f64], y1: &[f64], rtol: f64, atol: f64, scale: &mut [f64]) {
        for i in 0..scale.len() {
            scale[i] = atol + rtol * y0[i].abs().max(y1[i].abs());
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, rhs: Self) {
        self.accepted += rhs.accepted;
        self.rejected += rhs.rejected;
        self.evaluations += rhs.evaluations;
    }
}

/// Reusable DOP853 stepper. Keeps the last step size and the first-same-as-last stage
/// between calls, so integrating through a sequence of checkpoints costs no more than
/// one long integration.
#[derive(Debug, Clone)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
    h: Option<f64>,
    fsal_valid: bool,
    k: [Vec<f64>; 12],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    scale: Vec<f64>,
}

impl Dop853 {
    pub fn new(dim: usize, rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
            h: None,
            fsal_valid: false,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            ytmp: vec![0.0; dim],
            ynew: vec![0.0; dim],
            scale: vec![0.0; dim],
        }
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    /// Forget the cached step size and derivative, e.g. after the state was edited externally.
    pub fn reset(&mut self) {
        self.h = None;
        self.fsal_valid = false;
    }

    /// Last accepted (or proposed) step size magnitude.
    pub fn step_size(&self) -> Option<f64> {
        self.h
    }

    fn initial_step<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[f64], dir: f64) -> f64 {
        let n = y.len();
        sys.error_scale(y, y, self.rtol, self.atol, &mut self.scale);
        let (mut dnf, mut dny) = (0.0f64, 0.0f64);
        for i in 0..n {
            dnf = dnf.max((self.k[0][i] / self.scale[i]).abs());
            dny = dny.max((y[i] / self.scale[i]).abs());
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
        h = h.min(self.h_max);
        for i in 0..n {
            self.ytmp[i] = y[i] + dir * h * self.k[0][i];
        }
        sys.rhs(t + dir * h, &self.ytmp, &mut self.k[1]);
        let mut der2 = 0.0f64;
        for i in 0..n {
            der2 = der2.max(((self.k[1][i] - self.k[0][i]) / self.scale[i]).abs());
        }
        der2 /= h;
        let der12 = der2.max(dnf);
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        (100.0 * h).min(h1).min(self.h_max)
    }

    /// Advance `y` from `*t` to exactly `t_end` (either direction).
    pub fn integrate<S: OdeSystem>(
        &mut self,
        sys: &S,
        t: &mut f64,
        y: &mut [f64],
        t_end: f64,
    ) -> Result<StepStats, OdeError> {
        let n = sys.dim();
        debug_assert_eq!(y.len(), n);
        let mut stats = StepStats::default();
        if *t == t_end {
            return Ok(stats);
        }
        let dir = if t_end > *t { 1.0 } else { -1.0 };
        if !self.fsal_valid {
            sys.rhs(*t, y, &mut self.k[0]);
            stats.evaluations += 1;
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => {
                stats.evaluations += 1;
                self.initial_step(sys, *t, y, dir)
            }
        };
        let mut last_rejected = false;
        loop {
            let remaining = (t_end - *t).abs();
            if remaining <= 0.0 {
                break;
            }
            let mut last = false;
            let mut hs = h.min(self.h_max);
            if hs >= remaining * (1.0 - 1e-12) {
                hs = remaining;
                last = true;
            }
            if hs < 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepSizeUnderflow { t: *t, h: hs });
            }
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(OdeError::TooManySteps(self.max_steps));
            }
            let err = self.attempt(sys, *t, y, dir * hs);
            stats.evaluations += 11;
            if !err.is_finite() {
                return Err(OdeError::NonFinite(*t));
            }
            let fac11 = err.powf(1.0 / 8.0);
            if err <= 1.0 {
                stats.accepted += 1;
                *t = if last { t_end } else { *t + dir * hs };
                y.copy_from_slice(&self.ynew);
                // FSAL: stage 12 was evaluated at (t + h, y_new) only for the error estimate;
                // the derivative at the new point is recomputed here.
                sys.rhs(*t, y, &mut self.k[0]);
                stats.evaluations += 1;
                let mut fac = (fac11 / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                if last_rejected {
                    fac = fac.max(1.0);
                }
                let h_new = hs / fac;
                // Keep the natural step, not the truncated one, for the next call.
                h = if last { h.max(h_new) } else { h_new };
                last_rejected = false;
                if last {
                    break;
                }
            } else {
                stats.rejected += 1;
                h = hs / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                last_rejected = true;
            }
        }
        self.h = Some(h);
        Ok(stats)
    }

    /// One trial step of signed size `h`; writes the candidate to `ynew`, returns the scaled error.
    fn attempt<S: OdeSystem>(&mut self, sys: &S, t: f64, y: &[f64], h: f64) -> f64 {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7, k8, k9, k10, k11, k12] = &mut self.k;
        let yt = &mut self.ytmp;

        for i in 0..n {
            yt[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, yt, k2);
        for i in 0..n {
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, yt, k3);
        for i in 0..n {
            yt[i] = y[i] + h * (A41 * k1[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, yt, k4);
        for i in 0..n {
            yt[i] = y[i] + h * (A51 * k1[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, yt, k5);
        for i in 0..n {
            yt[i] = y[i] + h * (A61 * k1[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + C6 * h, yt, k6);
        for i in 0..n {
            yt[i] = y[i] + h * (A71 * k1[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(t + C7 * h, yt, k7);
        for i in 0..n {
            yt[i] = y[i]
                + h * (A81 * k1[i] + A84 * k4[i] + A85 * k5[i] + A86 * k6[i] + A87 * k7[i]);
        }
        sys.rhs(t + C8 * h, yt, k8);
        for i in 0..n {
            yt[i] = y[i]
                + h * (A91 * k1[i]
                    + A94 * k4[i]
                    + A95 * k5[i]
                    + A96 * k6[i]
                    + A97 * k7[i]
                    + A98 * k8[i]);
        }
        sys.rhs(t + C9 * h, yt, k9);
        for i in 0..n {
            yt[i] = y[i]
                + h * (A101 * k1[i]
                    + A104 * k4[i]
                    + A105 * k5[i]
                    + A106 * k6[i]
                    + A107 * k7[i]
                    + A108 * k8[i]
                    + A109 * k9[i]);
        }
        sys.rhs(t + C10 * h, yt, k10);
        for i in 0..n {
            yt[i] = y[i]
                + h * (A111 * k1[i]
                    + A114 * k4[i]
                    + A115 * k5[i]
                    + A116 * k6[i]
                    + A117 * k7[i]
                    + A118 * k8[i]
                    + A119 * k9[i]
                    + A1110 * k10[i]);
        }
        sys.rhs(t + C11 * h, yt, k11);
        for i in 0..n {
            yt[i] = y[i]
                + h * (A121 * k1[i]
                    + A124 * k4[i]
                    + A125 * k5[i]
                    + A126 * k6[i]
                    + A127 * k7[i]
                    + A128 * k8[i]
                    + A129 * k9[i]
                    + A1210 * k10[i]
                    + A1211 * k11[i]);
        }
        sys.rhs(t + h, yt, k12);

        let (mut e5, mut e3) = (0.0f64, 0.0f64);
        for i in 0..n {
            let slope = B1 * k1[i]
                + B6 * k6[i]
                + B7 * k7[i]
                + B8 * k8[i]
                + B9 * k9[i]
                + B10 * k10[i]
                + B11 * k11[i]
                + B12 * k12[i];
            self.ynew[i] = y[i] + h * slope;
            // stash the two error combinations in ytmp / k2 (no longer needed)
            yt[i] = slope - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
            k2[i] = ER1 * k1[i]
                + ER6 * k6[i]
                + ER7 * k7[i]
                + ER8 * k8[i]
                + ER9 * k9[i]
                + ER10 * k10[i]
                + ER11 * k11[i]
                + ER12 * k12[i];
        }
        sys.error_scale(y, &self.ynew, self.rtol, self.atol, &mut self.scale);
        for i in 0..n {
            let s = self.scale[i];
            e3 = e3.max((yt[i] / s).abs());
            e5 = e5.max((k2[i] / s).abs());
        }
        let deno = e5 * e5 + 0.01 * e3 * e3;
        if deno <= 0.0 {
            return 0.0;
        }
        h.abs() * e5 * e5 / deno.sqrt()
    }
}
