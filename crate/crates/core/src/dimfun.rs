//! Dimension functions (gauges) and the closed-form transforms built on them.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::geometry::logspace;

pub const BISECTION_REL_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;
const MONO_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GaugeKind {
    Power {
        s: f64,
    },
    /// Sorted `(r, value)` samples, interpolated linearly in log–log coordinates.
    Tabulated {
        samples: Vec<(f64, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaugeRepr", into = "GaugeRepr")]
pub struct Gauge {
    pub kind: GaugeKind,
    pub description: String,
}

#[derive(Serialize, Deserialize)]
struct GaugeRepr {
    #[serde(flatten)]
    kind: GaugeKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
}

impl TryFrom<GaugeRepr> for Gauge {
    type Error = Error;
    fn try_from(r: GaugeRepr) -> Result<Self> {
        let mut g = match r.kind {
            GaugeKind::Power { s } => Gauge::power(s)?,
            GaugeKind::Tabulated { samples } => Gauge::tabulated(samples)?,
        };
        if !r.description.is_empty() {
            g.description = r.description;
        }
        Ok(g)
    }
}

impl From<Gauge> for GaugeRepr {
    fn from(g: Gauge) -> Self {
        GaugeRepr {
            kind: g.kind,
            description: g.description,
        }
    }
}

impl Gauge {
    pub fn power(s: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return arg(format!("power gauge exponent must be finite and >= 0, got {s}"));
        }
        Ok(Gauge {
            kind: GaugeKind::Power { s },
            description: format!("r^{s}"),
        })
    }

    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return arg("tabulated gauge needs at least two samples");
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return arg("tabulated gauge radii must be strictly increasing");
            }
            if w[1].1 < w[0].1 {
                return arg("tabulated gauge values must be non-decreasing");
            }
        }
        if samples
            .iter()
            .any(|&(r, v)| !(r > 0.0 && v > 0.0 && r.is_finite() && v.is_finite()))
        {
            return arg("tabulated gauge samples must be positive and finite");
        }
        let n = samples.len();
        Ok(Gauge {
            kind: GaugeKind::Tabulated { samples },
            description: format!("tabulated ({n} samples)"),
        })
    }

    pub fn with_description(mut self, d: impl Into<String>) -> Self {
        self.description = d.into();
        self
    }

    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            GaugeKind::Power { s } => Some(s),
            _ => None,
        }
    }

    /// Radii on which the gauge is defined.
    pub fn hull(&self) -> (f64, f64) {
        match &self.kind {
            GaugeKind::Power { .. } => (0.0, f64::INFINITY),
            GaugeKind::Tabulated { samples } => (samples[0].0, samples[samples.len() - 1].0),
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("gauge evaluated at non-positive radius {r}")));
        }
        match &self.kind {
            GaugeKind::Power { s } => Ok(r.powf(*s)),
            GaugeKind::Tabulated { samples } => {
                let (lo, hi) = self.hull();
                if r < lo || r > hi {
                    return Err(Error::Range(format!("radius {r} outside tabulated hull [{lo}, {hi}]")));
                }
                let k = samples.partition_point(|s| s.0 <= r).clamp(1, samples.len() - 1);
                let (r0, v0) = samples[k - 1];
                let (r1, v1) = samples[k];
                let t = (r.ln() - r0.ln()) / (r1.ln() - r0.ln());
                Ok((v0.ln() + t * (v1.ln() - v0.ln())).exp())
            }
        }
    }

    /// Infallible evaluation for radii already known to be valid.
    pub(crate) fn at(&self, r: f64) -> f64 {
        self.eval(r).unwrap_or(f64::NAN)
    }

    /// Value at the smallest tabulated radius relative to the largest; 0 for
    /// power gauges with positive exponent.
    pub fn vanishing_ratio(&self) -> f64 {
        match &self.kind {
            GaugeKind::Power { s } if *s > 0.0 => 0.0,
            GaugeKind::Power { .. } => 1.0,
            GaugeKind::Tabulated { samples } => samples[0].1 / samples[samples.len() - 1].1,
        }
    }

    /// `g(a)/g(b)`, exact for power gauges.
    pub fn ratio(&self, a: f64, b: f64) -> f64 {
        match self.kind {
            GaugeKind::Power { s } => (a / b).powf(s),
            _ => self.at(a) / self.at(b),
        }
    }
}

/// Evaluates `f(r)`.
pub fn eval_gauge(f: &Gauge, r: f64) -> Result<f64> {
    f.eval(r)
}

/// Returns `r` with `|g(r) − y| ≤ tol·y`.
pub fn invert_gauge(g: &Gauge, y: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return arg("inversion tolerance must be positive");
    }
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::Range(format!("cannot invert gauge at {y}")));
    }
    match &g.kind {
        GaugeKind::Power { s } => {
            if *s == 0.0 {
                return if y == 1.0 {
                    Ok(1.0)
                } else {
                    Err(Error::Range(format!("r^0 never takes value {y}")))
                };
            }
            Ok(y.powf(1.0 / s))
        }
        GaugeKind::Tabulated { samples } => {
            let (vlo, vhi) = (samples[0].1, samples[samples.len() - 1].1);
            if y < vlo * (1.0 - tol) || y > vhi * (1.0 + tol) {
                return Err(Error::Range(format!("value {y} outside gauge range [{vlo}, {vhi}]")));
            }
            let (rlo, rhi) = g.hull();
            let (mut a, mut b) = (rlo.ln(), rhi.ln());
            let mut mid = 0.5 * (a + b);
            for _ in 0..BISECTION_MAX_ITER {
                mid = 0.5 * (a + b);
                let v = g.at(mid.exp());
                if (v - y).abs() <= tol * y {
                    return Ok(mid.exp());
                }
                if v < y {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let r = mid.exp();
            if (g.at(r) - y).abs() <= tol * y {
                Ok(r)
            } else {
                Err(Error::Numeric(format!(
                    "bisection did not reach tolerance {tol} inverting at {y}"
                )))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugePair {
    pub f: Gauge,
    pub g: Gauge,
    pub kappa: f64,
    #[serde(alias = "lambda")]
    pub lambda_doubling: f64,
}

impl GaugePair {
    pub fn new(f: Gauge, g: Gauge, kappa: f64, lambda_doubling: f64) -> Result<Self> {
        let p = GaugePair {
            f,
            g,
            kappa,
            lambda_doubling,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.kappa) {
            return arg(format!("kappa must lie in [0,1), got {}", self.kappa));
        }
        if !(self.lambda_doubling > 1.0) {
            return arg(format!("doubling constant must exceed 1, got {}", self.lambda_doubling));
        }
        Ok(())
    }

    /// `h = f / g^κ`.
    pub fn h(&self, r: f64) -> f64 {
        self.f.at(r) / self.g.at(r).powf(self.kappa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioDirection {
    /// f/g grows as r → 0.
    IncreasingAsRToZero,
    /// f/g shrinks as r → 0.
    DecreasingAsRToZero,
    Constant,
    NotMonotone,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub monotone_ok: bool,
    pub doubling_lambda_estimate: f64,
    pub doubling_ok: bool,
    pub ratio_direction: RatioDirection,
    pub f_over_g_kappa_ok: bool,
}

impl PairReport {
    pub fn passed(&self) -> bool {
        self.monotone_ok && self.doubling_ok && self.f_over_g_kappa_ok
    }
}

pub fn default_grid() -> Vec<f64> {
    logspace(1e-6, 1.0, 64)
}

fn non_decreasing(v: &[f64]) -> bool {
    v.windows(2)
        .all(|w| w[1] >= w[0] - MONO_TOL * w[0].abs().max(w[1].abs()))
}

/// Checks the pair hypotheses on `grid`.
pub fn verify_gauge_pair(p: &GaugePair, grid: &[f64]) -> Result<PairReport> {
    if grid.is_empty() {
        return arg("verification grid is empty");
    }
    if grid.len() < 8 {
        return arg("verification grid needs at least 8 points");
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] <= 0.0 {
        return arg("verification grid must be positive and strictly increasing");
    }
    if grid[grid.len() - 1] / grid[0] < 100.0 - 1e-9 {
        return arg("verification grid must span at least two decades");
    }
    p.validate()?;
    let f: Vec<f64> = grid.iter().map(|&r| p.f.eval(r)).collect::<Result<_>>()?;
    let g: Vec<f64> = grid.iter().map(|&r| p.g.eval(r)).collect::<Result<_>>()?;
    let ratio: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a / b).collect();
    let h: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a / b.powf(p.kappa)).collect();

    let rev: Vec<f64> = ratio.iter().rev().copied().collect();
    let up = non_decreasing(&ratio);
    let down = non_decreasing(&rev);
    let ratio_direction = match (up, down) {
        (true, true) => RatioDirection::Constant,
        // ratio increasing in r means it decreases as r → 0
        (true, false) => RatioDirection::DecreasingAsRToZero,
        (false, true) => RatioDirection::IncreasingAsRToZero,
        (false, false) => RatioDirection::NotMonotone,
    };
    let monotone_ok = non_decreasing(&f) && non_decreasing(&g) && (up || down);

    let (_, ghi) = p.g.hull();
    let mut lambda_est: f64 = 0.0;
    for &x in grid {
        if 2.0 * x <= ghi {
            lambda_est = lambda_est.max(p.g.ratio(2.0 * x, x));
        }
    }
    let doubling_ok = lambda_est <= p.lambda_doubling * (1.0 + MONO_TOL);

    // h must itself be a gauge: non-decreasing and shrinking towards r → 0.
    let h_vanishes = h.iter().all(|v| v.is_finite()) && h[0] < h[h.len() - 1] * (1.0 - MONO_TOL) && h[0] < h[1];
    let f_over_g_kappa_ok = non_decreasing(&h) && h_vanishes;

    Ok(PairReport {
        monotone_ok,
        doubling_lambda_estimate: lambda_est,
        doubling_ok,
        ratio_direction,
        f_over_g_kappa_ok,
    })
}

/// `Ῡ = g⁻¹((f(Υ)/g(Υ)^κ)^{1/(1−κ)})`.
pub fn mtp_radius(p: &GaugePair, upsilon: f64) -> Result<f64> {
    p.validate()?;
    let fu = p.f.eval(upsilon)?;
    let gu = p.g.eval(upsilon)?;
    let y = if p.kappa == 0.0 {
        fu
    } else {
        (fu / gu.powf(p.kappa)).powf(1.0 / (1.0 - p.kappa))
    };
    if !y.is_finite() || y <= 0.0 {
        return Err(Error::Numeric(format!(
            "transformed gauge value {y} is not a positive finite number at Υ={upsilon}"
        )));
    }
    let r = match (p.f.power_exponent(), p.g.power_exponent()) {
        // closed form keeps power-law reductions exact to rounding
        (Some(s), Some(n)) if n > 0.0 => upsilon.powf((s - p.kappa * n) / ((1.0 - p.kappa) * n)),
        _ => invert_gauge(&p.g, y, BISECTION_REL_TOL)?,
    };
    if !r.is_finite() {
        return Err(Error::Numeric(format!("transformed radius not finite at Υ={upsilon}")));
    }
    // f ≥ g at Υ is equivalent to Ῡ ≥ Υ
    if fu >= gu && r < upsilon * (1.0 - 1e-8) {
        return Err(Error::Numeric(format!(
            "transformed radius {r} fell below Υ={upsilon} although f(Υ) ≥ g(Υ)"
        )));
    }
    Ok(r)
}

/// `(s − κn)/((1 − κ)n)`.
pub fn corollary_exponent(s: f64, kappa: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return arg("ambient dimension must be positive");
    }
    if !(0.0..1.0).contains(&kappa) {
        return arg(format!("kappa must lie in [0,1), got {kappa}"));
    }
    let n = n as f64;
    if s <= kappa * n {
        return arg(format!("need s > κn, got s={s}, κn={}", kappa * n));
    }
    Ok((s - kappa * n) / ((1.0 - kappa) * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pw(s: f64) -> Gauge {
        Gauge::power(s).unwrap()
    }

    fn pair(fs: f64, gs: f64, kappa: f64) -> GaugePair {
        GaugePair::new(pw(fs), pw(gs), kappa, 2f64.powf(gs).max(1.0 + 1e-9) * 1.000001).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(pw(1.0).eval(0.25).unwrap(), 0.25);
        assert_eq!(pw(2.0).eval(0.5).unwrap(), 0.25);
        let t = Gauge::tabulated(vec![(0.1, 0.01), (1.0, 1.0)]).unwrap();
        // midpoint in log r maps to midpoint in log value: sqrt(0.01 * 1)
        let r = 10f64.powf(-0.5);
        assert!((t.eval(r).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn eval_errors() {
        assert!(matches!(pw(1.0).eval(0.0), Err(Error::Domain(_))));
        let t = Gauge::tabulated(vec![(0.1, 0.01), (1.0, 1.0)]).unwrap();
        assert!(matches!(t.eval(2.0), Err(Error::Range(_))));
        assert!(matches!(t.eval(0.05), Err(Error::Range(_))));
    }

    #[test]
    fn json_round_trip() {
        let g: Gauge = serde_json::from_str(r#"{"kind":"power","s":0.5}"#).unwrap();
        assert_eq!(g.power_exponent(), Some(0.5));
        let t: Gauge = serde_json::from_str(r#"{"kind":"tabulated","samples":[[0.1,0.01],[1,1]]}"#).unwrap();
        let back: Gauge = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(t, back);
        assert!(serde_json::from_str::<Gauge>(r#"{"kind":"power","s":-1}"#).is_err());
        assert!(serde_json::from_str::<Gauge>(r#"{"kind":"tabulated","samples":[[1,1],[0.1,0.01]]}"#).is_err());
    }

    #[test]
    fn verify_examples() {
        let grid = logspace(1e-4, 1.0, 16);
        let rep = verify_gauge_pair(&pair(0.5, 1.0, 0.0), &grid).unwrap();
        assert!(rep.monotone_ok);
        assert_eq!(rep.doubling_lambda_estimate, 2.0);
        assert_eq!(rep.ratio_direction, RatioDirection::IncreasingAsRToZero);

        let rep = verify_gauge_pair(&pair(0.5, 2.0, 0.0), &grid).unwrap();
        assert_eq!(rep.doubling_lambda_estimate, 4.0);

        let rep = verify_gauge_pair(&pair(2.0, 1.0, 0.9), &grid).unwrap();
        assert!(rep.f_over_g_kappa_ok);
        assert_eq!(rep.ratio_direction, RatioDirection::DecreasingAsRToZero);

        let rep = verify_gauge_pair(&pair(1.0, 1.0, 0.0), &grid).unwrap();
        assert_eq!(rep.ratio_direction, RatioDirection::Constant);
    }

    #[test]
    fn verify_rejects_bad_grids() {
        let p = pair(0.5, 1.0, 0.0);
        assert!(matches!(verify_gauge_pair(&p, &[]), Err(Error::Argument(_))));
        assert!(verify_gauge_pair(&p, &logspace(0.1, 1.0, 16)).is_err());
        assert!(verify_gauge_pair(&p, &logspace(1e-4, 1.0, 4)).is_err());
    }

    #[test]
    fn h_must_vanish() {
        // f = r^{0.5}, g = r, κ = 0.9: h = r^{-0.4} blows up at 0
        let grid = logspace(1e-4, 1.0, 16);
        let rep = verify_gauge_pair(&pair(0.5, 1.0, 0.9), &grid).unwrap();
        assert!(!rep.f_over_g_kappa_ok);
    }

    #[test]
    fn invert_examples() {
        assert_eq!(invert_gauge(&pw(2.0), 0.25, 1e-10).unwrap(), 0.5);
        assert_eq!(invert_gauge(&pw(1.0), 0.7, 1e-10).unwrap(), 0.7);
        let t = Gauge::tabulated(vec![(0.01, 1e-4), (1.0, 1.0)]).unwrap();
        let r = invert_gauge(&t, 0.01, 1e-10).unwrap();
        assert!((r - 0.1).abs() < 1e-9, "{r}");
        assert!(matches!(invert_gauge(&t, 2.0, 1e-10), Err(Error::Range(_))));
    }

    #[test]
    fn mtp_radius_examples() {
        let p = pair(1.0, 1.0, 0.0);
        assert_eq!(mtp_radius(&p, 0.3).unwrap(), 0.3);
        let p = pair(0.5, 1.0, 0.0);
        assert!((mtp_radius(&p, 0.04).unwrap() - 0.2).abs() < 1e-15);
        let p = pair(1.5, 2.0, 0.5);
        assert!((mtp_radius(&p, 0.01).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn mtp_radius_tabulated_matches_power() {
        // tabulated copy of g = r through bisection must agree with the closed form
        let samples: Vec<(f64, f64)> = logspace(1e-6, 1.0, 40).into_iter().map(|r| (r, r)).collect();
        let p = GaugePair::new(pw(0.5), Gauge::tabulated(samples).unwrap(), 0.0, 2.0).unwrap();
        let r = mtp_radius(&p, 0.04).unwrap();
        assert!((r - 0.2).abs() < 1e-9);
    }

    #[test]
    fn corollary_examples() {
        assert_eq!(corollary_exponent(0.5, 0.0, 1).unwrap(), 0.5);
        assert!((corollary_exponent(1.5, 0.5, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(corollary_exponent(1.0, 0.5, 2), Err(Error::Argument(_))));
    }

    proptest! {
        #[test]
        fn mtp_radius_matches_corollary(
            n in 1usize..4,
            kappa in 0.0f64..0.95,
            frac in 0.01f64..1.0,
            log_u in -12.0f64..-0.1,
        ) {
            let nf = n as f64;
            let s = kappa * nf + frac * (nf - kappa * nf);
            let p = GaugePair::new(pw(s), pw(nf), kappa, 2f64.powf(nf) + 1e-9).unwrap();
            let u = log_u.exp();
            let got = mtp_radius(&p, u).unwrap();
            let want = u.powf(corollary_exponent(s, kappa, n).unwrap());
            prop_assert!(((got - want) / want).abs() <= 1e-9);
        }

        #[test]
        fn invert_round_trip(s in 0.1f64..4.0, log_r in -10.0f64..2.0) {
            let g = pw(s);
            let r = log_r.exp();
            let back = invert_gauge(&g, g.eval(r).unwrap(), BISECTION_REL_TOL).unwrap();
            prop_assert!(((back - r) / r).abs() <= 1e-6);
        }

        #[test]
        fn invert_round_trip_tabulated(log_r in -5.9f64..-0.01) {
            let samples: Vec<(f64, f64)> = logspace(1e-6, 1.0, 25).into_iter().map(|r| (r, r.powf(1.3) * (1.0 + r))).collect();
            let g = Gauge::tabulated(samples).unwrap();
            let r = log_r.exp();
            let back = invert_gauge(&g, g.eval(r).unwrap(), BISECTION_REL_TOL).unwrap();
            prop_assert!(((back - r) / r).abs() <= 1e-6);
        }

        #[test]
        fn identity_transform(log_u in -20.0f64..3.0, s in 0.1f64..3.0) {
            let p = GaugePair::new(pw(s), pw(s), 0.0, 2f64.powf(s) + 1e-9).unwrap();
            let u = log_u.exp();
            prop_assert!(((mtp_radius(&p, u).unwrap() - u) / u).abs() <= 1e-9);
        }

        #[test]
        fn doubling_is_exact_for_power(s in 0.0f64..5.0) {
            let p = GaugePair::new(pw(s), pw(s), 0.0, 2f64.powf(s) + 1.0).unwrap();
            let rep = verify_gauge_pair(&p, &default_grid()).unwrap();
            prop_assert_eq!(rep.doubling_lambda_estimate, 2f64.powf(s));
        }
    }
}
