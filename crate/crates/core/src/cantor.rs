//! Finite-depth Cantor construction `K_η`: levels, local levels and sub-levels,
//! the mass distribution `μ`, property audits and the Hölder check.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covering::{
    build_caj, build_kgb, build_kgb_many, five_r_cover, BallFamily, KgbOptions, KgbResult, NetOptions, RadiusRule,
    SetSequence, SpatialHash, StageProvider,
};
use crate::dimfun::{mtp_radius, verify_gauge_pair, GaugePair, RatioDirection};
use crate::error::{arg, Error, Result};
use crate::geometry::{logspace, Ball, Metric};
use crate::measure::{global_neighborhood_measure, MeasureOptions};
use crate::rng::{self, stream};
use crate::sets::{distance_to_set, SetModel};

const AUDIT_SEED: u64 = 0x5eed_a0d1;

fn d_two() -> usize {
    2
}
fn d_one() -> usize {
    1
}
fn d_c5() -> f64 {
    0.15
}
fn d_unit() -> f64 {
    1.0
}
fn d_region() -> f64 {
    12.0
}
fn d_window() -> f64 {
    4.0
}
fn d_pool() -> usize {
    crate::covering::DEFAULT_POOL_PER_J
}
fn d_caj_pool() -> usize {
    2000
}
fn d_leftover() -> usize {
    200_000
}
fn d_max_nodes() -> usize {
    500_000
}
fn d_max_depth() -> usize {
    3
}
fn d_tol() -> f64 {
    1e-9
}

/// Ahlfors and doubling constants of `g` (`c₁ g(r) ≤ H^g(B) ≤ c₂ g(r)`,
/// `g(2x) < λ g(x)`, `g(5x) ≤ c₇ g(x)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ahlfors {
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
    pub c7: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructionParams {
    pub domain: Ball,
    pub gauges: GaugePair,
    pub eta: f64,
    pub sets: SetSequence,
    /// `Υ_j`; `Ῡ_j` follows from the gauges.
    pub upsilon: RadiusRule,
    #[serde(default = "d_two")]
    pub depth: usize,
    #[serde(default = "d_one")]
    pub g_floor: usize,
    pub j_max: usize,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default = "d_c5")]
    pub c5: f64,
    #[serde(default = "d_unit")]
    pub d1: f64,
    #[serde(default = "d_unit")]
    pub d2: f64,
    /// Overrides the exact (or grid-estimated) constants of `g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ahlfors: Option<Ahlfors>,
    #[serde(default = "d_unit")]
    pub target_fraction: f64,
    /// Radius of the leftover-region balls `B′` in units of `Ῡ_{G′}`.
    #[serde(default = "d_region")]
    pub region_factor: f64,
    /// Sub-levels beyond the first search `j ∈ [G′, window_factor · G′]`.
    #[serde(default = "d_window")]
    pub window_factor: f64,
    #[serde(default = "d_pool")]
    pub pool_per_j: usize,
    #[serde(default = "d_caj_pool")]
    pub caj_pool: usize,
    #[serde(default = "d_leftover")]
    pub leftover_pool_cap: usize,
    #[serde(default = "d_max_nodes")]
    pub max_nodes: usize,
    #[serde(default = "d_max_depth")]
    pub max_depth: usize,
    #[serde(default = "d_tol")]
    pub tol: f64,
}

impl ConstructionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return arg("eta must exceed 1");
        }
        if self.depth == 0 || self.depth > self.max_depth {
            return arg(format!("depth must lie in 1..={}", self.max_depth));
        }
        if self.g_floor == 0 || self.j_max < self.g_floor {
            return arg("need 1 ≤ g_floor ≤ j_max");
        }
        Ball::new(self.domain.center.clone(), self.domain.radius)?;
        self.sets.validate()?;
        self.upsilon.validate()?;
        self.gauges.validate()?;
        if self.sets.dim() != self.domain.dim() {
            return arg("set sequence and domain dimensions differ");
        }
        if self.metric == Metric::TorusSup {
            return Err(Error::Unsupported("the Cantor construction runs in ℝ^n".into()));
        }
        for (name, v) in [
            ("c5", self.c5),
            ("d1", self.d1),
            ("d2", self.d2),
            ("target_fraction", self.target_fraction),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return arg(format!("{name} must be positive"));
            }
        }
        if self.target_fraction > 1.0 {
            return arg("target_fraction must not exceed 1");
        }
        if !(self.region_factor > 3.0) {
            return arg("region_factor must exceed 3 so that 3A fits in B′");
        }
        if !(self.window_factor >= 1.0) {
            return arg("window_factor must be at least 1");
        }
        Ok(())
    }

    pub fn upsilon_at(&self, j: usize) -> f64 {
        self.upsilon.at(j)
    }

    pub fn tilde_at(&self, j: usize) -> Result<f64> {
        mtp_radius(&self.gauges, self.upsilon.at(j))
    }

    fn f(&self, r: f64) -> Result<f64> {
        self.gauges.f.eval(r)
    }

    fn g(&self, r: f64) -> Result<f64> {
        self.gauges.g.eval(r)
    }

    fn h(&self, r: f64) -> Result<f64> {
        Ok(self.f(r)? / self.g(r)?.powf(self.gauges.kappa))
    }

    /// `h(Υ)^{1/(1−κ)} = g(Ῡ)`, the weight of a pair in the mass formula.
    pub fn pair_weight(&self, upsilon: f64) -> Result<f64> {
        Ok(self.h(upsilon)?.powf(1.0 / (1.0 - self.gauges.kappa)))
    }
}

struct Stages<'a>(&'a ConstructionParams);

impl StageProvider for Stages<'_> {
    fn set(&self, j: usize) -> SetModel {
        self.0.sets.at(j)
    }

    fn tilde_upsilon(&self, j: usize) -> f64 {
        self.0.tilde_at(j).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub d1: f64,
    pub d2: f64,
    /// "exact", "configured" or "grid-estimate".
    pub source: String,
}

/// Exact values when `g = r^n` on `ℝ^n`, else grid estimates over the gauge hull.
pub fn constants(p: &ConstructionParams) -> Result<ConstantSet> {
    let n = p.domain.dim();
    let (a, source) = match (&p.ahlfors, p.gauges.g.power_exponent()) {
        (Some(a), _) => (a.clone(), "configured"),
        (None, Some(t)) if t == n as f64 => {
            let v = p.metric.ball_volume(n, 1.0);
            let nn = n as i32;
            (
                Ahlfors {
                    c1: v,
                    c2: v,
                    lambda: 2f64.powi(nn),
                    c7: 5f64.powi(nn),
                },
                "exact",
            )
        }
        (None, Some(_)) => {
            return Err(Error::Unsupported(
                "power gauge g must be r^n on ℝ^n unless ahlfors constants are configured".into(),
            ))
        }
        (None, None) => {
            let (lo, hi) = p.gauges.g.hull();
            let grid: Vec<f64> = logspace(lo, hi / 5.0, 64);
            let mut c1 = f64::INFINITY;
            let mut c2: f64 = 0.0;
            let mut lambda: f64 = 1.0;
            let mut c7: f64 = 1.0;
            for &r in &grid {
                let gr = p.g(r)?;
                let vol = p.metric.ball_volume(n, r);
                c1 = c1.min(vol / gr);
                c2 = c2.max(vol / gr);
                lambda = lambda.max(p.g(2.0 * r)? / gr);
                c7 = c7.max(p.g(5.0 * r)? / gr);
            }
            (Ahlfors { c1, c2, lambda, c7 }, "grid-estimate")
        }
    };
    let c6 = (a.c1 / a.c2).powi(2) * p.c5 / (2.0 * a.lambda * a.c7);
    Ok(ConstantSet {
        c1: a.c1,
        c2: a.c2,
        lambda: a.lambda,
        c5: p.c5,
        c6,
        c7: a.c7,
        d1: p.d1,
        d2: p.d2,
        source: source.into(),
    })
}

/// Rejects every regime but `f/g → ∞` as `r → 0`.
pub fn classify_case(p: &GaugePair) -> Result<()> {
    let (flo, fhi) = p.f.hull();
    let (glo, ghi) = p.g.hull();
    let (lo, hi) = (flo.max(glo).max(1e-12), fhi.min(ghi).min(1e6));
    let grid = if hi / lo >= 100.0 {
        logspace(lo, hi / 2.0, 64)
    } else {
        logspace(1e-6, 1.0, 64)
    };
    let rep = verify_gauge_pair(p, &grid)?;
    match rep.ratio_direction {
        RatioDirection::IncreasingAsRToZero => {}
        RatioDirection::DecreasingAsRToZero => {
            return Err(Error::CaseRejected(
                "case (b): f/g → 0, so H^f(B₀) = 0 and no construction is needed".into(),
            ))
        }
        RatioDirection::Constant => {
            return Err(Error::CaseRejected(
                "case (c): f/g is constant, H^f is a multiple of H^g and no construction is needed".into(),
            ))
        }
        RatioDirection::NotMonotone => return Err(Error::CaseRejected("f/g is not monotone on the test grid".into())),
    }
    if !rep.passed() {
        return arg(format!("gauge pair fails verification: {rep:?}"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorNode {
    pub id: usize,
    pub level: usize,
    pub ball: Ball,
    /// Stage index of the ball (0 for the root).
    pub j: usize,
    pub parent: Option<usize>,
    /// Sub-level of the parent's local level this ball belongs to (0 for the root).
    pub sublevel: usize,
    /// The `(A; j)` pair whose `C(A; j)` contains this ball.
    pub pair: Option<usize>,
    pub l_b: usize,
    /// `ε(B)`; absent when `l_B = 1` (no constraint).
    pub epsilon_b: Option<f64>,
    /// Starting index `G` of this node's local level, once built.
    pub g_start: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: usize,
    /// The ball `B` whose local level holds this pair.
    pub parent: usize,
    pub sublevel: usize,
    /// `A`, radius `Ῡ_j`.
    pub a: Ball,
    pub j: usize,
    pub upsilon: f64,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SublevelRecord {
    pub node: usize,
    pub index: usize,
    pub g_prime: usize,
    /// Largest `N₀` reached by the `K_{G′,B′}` selections.
    pub n0: usize,
    /// Number of balls `B′` (1 for the first sub-level, where `B′ = B`).
    pub regions: usize,
    pub region_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorTree {
    pub depth: usize,
    pub eta: f64,
    pub constants: ConstantSet,
    pub nodes: Vec<CantorNode>,
    pub pairs: Vec<PairRecord>,
    pub sublevels: Vec<SublevelRecord>,
    pub digest: String,
}

#[derive(Serialize)]
struct DigestView<'a> {
    depth: usize,
    eta: f64,
    constants: &'a ConstantSet,
    nodes: &'a [CantorNode],
    pairs: &'a [PairRecord],
    sublevels: &'a [SublevelRecord],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub depth: usize,
    pub nodes_per_level: Vec<usize>,
    pub pairs: usize,
    pub root_l_b: usize,
    pub sublevels: Vec<SublevelRecord>,
    pub digest: String,
}

impl CantorTree {
    /// SHA-256 of the canonical JSON of everything but the digest itself.
    pub fn compute_digest(&self) -> String {
        let view = DigestView {
            depth: self.depth,
            eta: self.eta,
            constants: &self.constants,
            nodes: &self.nodes,
            pairs: &self.pairs,
            sublevels: &self.sublevels,
        };
        let bytes = serde_json::to_vec(&view).expect("tree serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn refresh_digest(&mut self) {
        self.digest = self.compute_digest();
    }

    pub fn max_level(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &CantorNode> {
        let top = self.max_level();
        self.nodes.iter().filter(move |n| n.level == top)
    }

    pub fn summary(&self) -> TreeSummary {
        let top = self.max_level();
        TreeSummary {
            depth: self.depth,
            nodes_per_level: (1..=top)
                .map(|l| self.nodes.iter().filter(|n| n.level == l).count())
                .collect(),
            pairs: self.pairs.len(),
            root_l_b: self.nodes.first().map_or(0, |n| n.l_b),
            sublevels: self.sublevels.clone(),
            digest: self.digest.clone(),
        }
    }
}

/// `l_B` from the sub-level count formula.
pub fn l_b(p: &ConstructionParams, c: &ConstantSet, ball: &Ball, root: bool) -> Result<usize> {
    let r = ball.radius;
    let v = if root {
        // H^g(B₀) read as c₂ g(r), which is its Lebesgue volume in the exact case
        c.c2 * p.eta / (c.c6 * c.c2 * p.g(r)?)
    } else {
        p.f(r)? / (c.c6 * p.g(r)?)
    };
    if !v.is_finite() || v > 1e15 {
        return Err(Error::Truncation(format!("sub-level count {v} is not representable")));
    }
    Ok(v.floor() as usize + 1)
}

/// `ε(B)`; `None` when `l_B = 1`.
pub fn epsilon_b(p: &ConstructionParams, c: &ConstantSet, ball: &Ball, lb: usize) -> Result<Option<f64>> {
    if lb <= 1 {
        return Ok(None);
    }
    let r = ball.radius;
    let inner = c.c2 * c.c2 * c.lambda * c.lambda * c.d2 / c.c1 * (p.g(r)? / p.f(r)?) * (lb - 1) as f64;
    Ok(Some(c.c1 / (4.0 * c.lambda) / inner))
}

/// Smallest `j` in `[lo, hi]` with `cond(j)`, assuming `cond` is monotone in `j`.
fn first_index(lo: usize, hi: usize, cond: impl Fn(usize) -> Result<bool>) -> Result<Option<usize>> {
    if lo > hi || !cond(hi)? {
        return Ok(None);
    }
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let mid = a + (b - a) / 2;
        if cond(mid)? {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    Ok(Some(a))
}

/// Starting index `G` for the local level of `ball`.
pub fn start_index(p: &ConstructionParams, c: &ConstantSet, ball: &Ball, eps: Option<f64>) -> Result<usize> {
    let k = p.gauges.kappa;
    let r = ball.radius;
    let rb = p.g(r)? / p.f(r)?;
    let cond = |j: usize| -> Result<bool> {
        let u = p.upsilon_at(j);
        let (fu, gu) = (p.f(u)?, p.g(u)?);
        let g1 = 3.0 * gu.powf(1.0 - k) < fu / gu.powf(k);
        let g2 = eps.is_none_or(|e| gu / fu < e * rb);
        let g3 = (fu / (c.c6 * gu)).floor() >= 1.0;
        let sep = 6.0 * u < p.tilde_at(j)?;
        Ok(g1 && g2 && g3 && sep)
    };
    first_index(p.g_floor, p.j_max, cond)?.ok_or_else(|| {
        Error::Truncation(format!(
            "no start index up to j_max = {} satisfies the G conditions",
            p.j_max
        ))
    })
}

/// Smallest `j ≥ lo` with `f(Υ_j) ≤ ½ min f(r(L))` and the same for `h`.
fn halving_index(p: &ConstructionParams, lo: usize, min_f: f64, min_h: f64) -> Result<usize> {
    let cond = |j: usize| -> Result<bool> {
        let u = p.upsilon_at(j);
        Ok(p.f(u)? <= 0.5 * min_f && p.h(u)? <= 0.5 * min_h)
    };
    first_index(lo, p.j_max, cond)?
        .ok_or_else(|| Error::Truncation(format!("halving conditions not met by j_max = {}", p.j_max)))
}

struct LocalPair {
    sublevel: usize,
    a: Ball,
    j: usize,
    upsilon: f64,
    children: Vec<Ball>,
}

struct LocalLevel {
    g: usize,
    pairs: Vec<LocalPair>,
    sublevels: Vec<SublevelRecord>,
}

fn construction_err(node: usize, sublevel: usize, e: Error) -> Error {
    match e {
        Error::CoverageShortfall { achieved, target } => Error::Construction {
            node,
            sublevel,
            reason: format!("K_{{G,B}} reached {achieved:.4} of its target {target:.4}"),
        },
        Error::Truncation(s) => Error::Truncation(format!("node {node}, sub-level {sublevel}: {s}")),
        other => other,
    }
}

/// Disjoint balls `B(x, ρ) ⊂ B` with centres in `½B \ ∪4L`, disjoint from every `3L`.
fn leftover_regions<R: Rng + ?Sized>(
    p: &ConstructionParams,
    b: &Ball,
    placed: &[Ball],
    rho: f64,
    rng: &mut R,
) -> Vec<Ball> {
    let metric = p.metric;
    let n = b.dim();
    let rmax = placed.iter().map(|l| l.radius).fold(0.0, f64::max);
    let mut hash = SpatialHash::new(rho + 4.0 * rmax, metric, n);
    for (i, l) in placed.iter().enumerate() {
        hash.insert(&l.center, i);
    }
    let half = b.dilate(0.5);
    let want = 4.0 * half.volume(metric) / metric.ball_volume(n, rho);
    let pool = (want.ceil() as usize).clamp(100, p.leftover_pool_cap.max(100));
    let mut kept = Vec::new();
    for _ in 0..pool {
        let x = metric.sample_ball(&half.center, half.radius, rng);
        if metric.dist(&x, &b.center) + rho > b.radius {
            continue;
        }
        let blocked = hash.near(&x, |k| {
            let l = &placed[k];
            let d = metric.dist(&x, &l.center);
            d < 4.0 * l.radius || d < rho + 3.0 * l.radius
        });
        if !blocked {
            kept.push(Ball { center: x, radius: rho });
        }
    }
    five_r_cover(&BallFamily::new(kept, metric))
        .balls
        .into_iter()
        .map(|b| b.ball)
        .collect()
}

fn expand_pairs<R: Rng + ?Sized>(
    p: &ConstructionParams,
    sublevel: usize,
    kgb: &[KgbResult],
    rng: &mut R,
) -> Result<Vec<LocalPair>> {
    let nopts = NetOptions {
        metric: p.metric,
        tol: p.tol,
    };
    let mut out = Vec::new();
    for res in kgb {
        for a in &res.balls {
            let u = p.upsilon_at(a.j);
            let f = p.sets.at(a.j);
            let caj = build_caj(&a.ball, a.j, &f, u, p.caj_pool, &nopts, rng)?;
            out.push(LocalPair {
                sublevel,
                a: a.ball.clone(),
                j: a.j,
                upsilon: u,
                children: caj.balls.into_iter().map(|l| l.ball).collect(),
            });
        }
    }
    Ok(out)
}

fn build_local<R: Rng + ?Sized>(
    p: &ConstructionParams,
    c: &ConstantSet,
    node: usize,
    b: &Ball,
    lb: usize,
    eps: Option<f64>,
    rng: &mut R,
) -> Result<LocalLevel> {
    let stages = Stages(p);
    let kopts = KgbOptions {
        metric: p.metric,
        tol: p.tol,
        c5: p.c5,
        pool_per_j: p.pool_per_j,
    };
    let g = start_index(p, c, b, eps)?;
    let first =
        build_kgb(b, g, &stages, p.j_max, p.target_fraction, &kopts, rng).map_err(|e| construction_err(node, 1, e))?;
    let mut sublevels = vec![SublevelRecord {
        node,
        index: 1,
        g_prime: g,
        n0: first.n0,
        regions: 1,
        region_radius: b.radius,
    }];
    let mut pairs = expand_pairs(p, 1, std::slice::from_ref(&first), rng)?;
    let mut g_prime = g;
    for i in 2..=lb {
        let placed: Vec<Ball> = pairs.iter().flat_map(|q| q.children.iter().cloned()).collect();
        if placed.is_empty() {
            return Err(Error::Construction {
                node,
                sublevel: i,
                reason: "earlier sub-levels produced no balls".into(),
            });
        }
        let mut min_f = f64::INFINITY;
        let mut min_h = f64::INFINITY;
        for l in &placed {
            min_f = min_f.min(p.f(l.radius)?);
            min_h = min_h.min(p.h(l.radius)?);
        }
        g_prime = halving_index(p, g_prime.max(g), min_f, min_h).map_err(|e| construction_err(node, i, e))?;
        let rho = p.region_factor * p.tilde_at(g_prime)?;
        let regions = leftover_regions(p, b, &placed, rho, rng);
        if regions.is_empty() {
            return Err(Error::Construction {
                node,
                sublevel: i,
                reason: format!("no leftover region of radius {rho} fits"),
            });
        }
        let hi = ((g_prime as f64) * p.window_factor).min(p.j_max as f64) as usize;
        let res = build_kgb_many(
            &regions,
            g_prime,
            &stages,
            hi.max(g_prime),
            p.target_fraction,
            &kopts,
            rng,
        )
        .map_err(|e| construction_err(node, i, e))?;
        sublevels.push(SublevelRecord {
            node,
            index: i,
            g_prime,
            n0: res.iter().map(|r| r.n0).max().unwrap_or(g_prime),
            regions: regions.len(),
            region_radius: rho,
        });
        pairs.extend(expand_pairs(p, i, &res, rng)?);
    }
    Ok(LocalLevel { g, pairs, sublevels })
}

/// Builds the tree level by level. Local levels of one level are independent
/// and built in parallel from per-node seed streams.
pub fn build_cantor<R: Rng + ?Sized>(p: &ConstructionParams, rng: &mut R) -> Result<CantorTree> {
    p.validate()?;
    classify_case(&p.gauges)?;
    let c = constants(p)?;
    let root_lb = l_b(p, &c, &p.domain, true)?;
    let mut nodes = vec![CantorNode {
        id: 0,
        level: 1,
        ball: p.domain.clone(),
        j: 0,
        parent: None,
        sublevel: 0,
        pair: None,
        l_b: root_lb,
        epsilon_b: epsilon_b(p, &c, &p.domain, root_lb)?,
        g_start: None,
        children: Vec::new(),
    }];
    let mut pairs: Vec<PairRecord> = Vec::new();
    let mut sublevels: Vec<SublevelRecord> = Vec::new();
    let master = rng::fork(rng);
    for level in 2..=p.depth {
        let parents: Vec<usize> = nodes.iter().filter(|n| n.level == level - 1).map(|n| n.id).collect();
        let built: Vec<Result<LocalLevel>> = parents
            .par_iter()
            .map(|&id| {
                let nd = &nodes[id];
                let mut g = stream(master, &[level as u64, id as u64]);
                build_local(p, &c, id, &nd.ball, nd.l_b, nd.epsilon_b, &mut g)
            })
            .collect();
        for (&pid, local) in parents.iter().zip(built) {
            let local = local?;
            nodes[pid].g_start = Some(local.g);
            sublevels.extend(local.sublevels);
            for lp in local.pairs {
                let pair_id = pairs.len();
                let mut kids = Vec::with_capacity(lp.children.len());
                for ball in lp.children {
                    let id = nodes.len();
                    if id >= p.max_nodes {
                        return Err(Error::Truncation(format!(
                            "tree exceeds max_nodes = {} at level {level}",
                            p.max_nodes
                        )));
                    }
                    let lb = l_b(p, &c, &ball, false)?;
                    let eps = epsilon_b(p, &c, &ball, lb)?;
                    nodes.push(CantorNode {
                        id,
                        level,
                        ball,
                        j: lp.j,
                        parent: Some(pid),
                        sublevel: lp.sublevel,
                        pair: Some(pair_id),
                        l_b: lb,
                        epsilon_b: eps,
                        g_start: None,
                        children: Vec::new(),
                    });
                    nodes[pid].children.push(id);
                    kids.push(id);
                }
                pairs.push(PairRecord {
                    id: pair_id,
                    parent: pid,
                    sublevel: lp.sublevel,
                    a: lp.a,
                    j: lp.j,
                    upsilon: lp.upsilon,
                    children: kids,
                });
            }
        }
    }
    let mut t = CantorTree {
        depth: p.depth,
        eta: p.eta,
        constants: c,
        nodes,
        pairs,
        sublevels,
        digest: String::new(),
    };
    t.refresh_digest();
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassAssignment {
    /// `μ` per node id.
    pub mu: Vec<f64>,
}

fn pairs_by_parent(t: &CantorTree) -> BTreeMap<usize, Vec<usize>> {
    let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for q in &t.pairs {
        m.entry(q.parent).or_default().push(q.id);
    }
    m
}

/// `μ(L) = μ(B) · w_{j′} / (#C(A′; j′) · Σ w_j)` with `w_j = h(Υ_j)^{1/(1−κ)}`.
pub fn assign_mass(t: &CantorTree, p: &ConstructionParams) -> Result<MassAssignment> {
    let mut mu = vec![0.0; t.nodes.len()];
    if mu.is_empty() {
        return Ok(MassAssignment { mu });
    }
    mu[0] = 1.0;
    let by_parent = pairs_by_parent(t);
    // nodes are stored level by level, parents before children
    for node in &t.nodes {
        let Some(ids) = by_parent.get(&node.id) else { continue };
        let weights: Vec<f64> = ids
            .iter()
            .map(|&q| p.pair_weight(t.pairs[q].upsilon))
            .collect::<Result<_>>()?;
        let total: f64 = weights.iter().sum();
        for (&q, w) in ids.iter().zip(&weights) {
            let kids = &t.pairs[q].children;
            for &k in kids {
                mu[k] = mu[node.id] * (w / total) / kids.len() as f64;
            }
        }
    }
    Ok(MassAssignment { mu })
}

/// Exact rational masses, treating each pair weight as the exact value of its `f64`.
pub fn assign_mass_exact(t: &CantorTree, p: &ConstructionParams) -> Result<Vec<BigRational>> {
    let mut mu = vec![BigRational::zero(); t.nodes.len()];
    if mu.is_empty() {
        return Ok(mu);
    }
    mu[0] = BigRational::one();
    let by_parent = pairs_by_parent(t);
    for node in &t.nodes {
        let Some(ids) = by_parent.get(&node.id) else { continue };
        let mut weights = Vec::with_capacity(ids.len());
        for &q in ids {
            let w = p.pair_weight(t.pairs[q].upsilon)?;
            weights.push(BigRational::from_float(w).ok_or_else(|| Error::Numeric(format!("weight {w} not finite")))?);
        }
        let total: BigRational = weights.iter().fold(BigRational::zero(), |a, b| a + b);
        for (&q, w) in ids.iter().zip(&weights) {
            let kids = &t.pairs[q].children;
            if kids.is_empty() {
                continue;
            }
            let share = &mu[node.id] * w / (&total * BigRational::from_integer(BigInt::from(kids.len())));
            for &k in kids {
                mu[k] = share.clone();
            }
        }
    }
    Ok(mu)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<usize>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyAudit {
    pub property: String,
    pub passed: bool,
    pub checked: usize,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub properties: Vec<PropertyAudit>,
    pub all_passed: bool,
    /// Relative tolerance of the numeric checks.
    pub tolerance: f64,
    /// Monte-Carlo samples per audited pair for the measure clause of P2.
    pub mc_samples: usize,
}

impl AuditReport {
    pub fn get(&self, name: &str) -> Option<&PropertyAudit> {
        self.properties.iter().find(|a| a.property == name)
    }
}

struct Audit {
    name: &'static str,
    checked: usize,
    violations: Vec<Violation>,
}

impl Audit {
    fn new(name: &'static str) -> Self {
        Audit {
            name,
            checked: 0,
            violations: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, node: Option<usize>, pair: Option<usize>, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations.push(Violation {
                node,
                pair,
                detail: detail(),
            });
        }
    }

    fn finish(self) -> PropertyAudit {
        PropertyAudit {
            property: self.name.into(),
            passed: self.violations.is_empty(),
            checked: self.checked,
            violations: self.violations,
        }
    }
}

/// Indices of `balls` whose 3-dilates meet another's; also checks containment in `outer`.
fn disjoint_dilates(balls: &[&Ball], metric: Metric) -> Vec<(usize, usize)> {
    let n = balls.first().map_or(1, |b| b.dim());
    let rmax = balls.iter().map(|b| 3.0 * b.radius).fold(0.0, f64::max);
    let mut hash = SpatialHash::new(2.0 * rmax, metric, n);
    let mut bad = Vec::new();
    for (i, b) in balls.iter().enumerate() {
        let t = b.dilate(3.0);
        hash.near(&b.center, |k| {
            if balls[k].dilate(3.0).intersects(&t, metric) {
                bad.push((k, i));
            }
            false
        });
        hash.insert(&b.center, i);
    }
    bad
}

const AUDIT_TOL: f64 = 1e-9;
const AUDIT_PAIRS_MC: usize = 32;
const AUDIT_MC_SAMPLES: usize = 4000;

/// Audits P0–P5. Geometric clauses are exact predicates; P3 uses relative
/// tolerance 1e-9 and the measure clause of P2 is a 3σ Monte-Carlo check on up
/// to 32 evenly spaced pairs.
pub fn verify_levels(t: &CantorTree, p: &ConstructionParams) -> Result<AuditReport> {
    let metric = p.metric;
    let n = p.domain.dim();
    let c = &t.constants;
    let by_parent = pairs_by_parent(t);

    let mut p0 = Audit::new("P0");
    let roots: Vec<&CantorNode> = t.nodes.iter().filter(|nd| nd.level == 1).collect();
    p0.check(roots.len() == 1, None, None, || {
        format!("{} level-1 balls", roots.len())
    });
    if let Some(r) = t.nodes.first() {
        p0.check(
            r.level == 1 && r.parent.is_none() && r.ball == p.domain,
            Some(0),
            None,
            || "root is not B₀".into(),
        );
    }

    let mut p1 = Audit::new("P1");
    for nd in t.nodes.iter().filter(|nd| !nd.children.is_empty()) {
        let kids: Vec<&Ball> = nd.children.iter().map(|&k| &t.nodes[k].ball).collect();
        for (&k, b) in nd.children.iter().zip(&kids) {
            p1.check(nd.ball.contains_ball(&b.dilate(3.0), metric), Some(k), None, || {
                format!("3L not inside its parent {}", nd.id)
            });
        }
        for (a, b) in disjoint_dilates(&kids, metric) {
            let (ka, kb) = (nd.children[a], nd.children[b]);
            p1.check(false, Some(kb), None, || format!("3L meets 3L′ of node {ka}"));
        }
        p1.checked += 1;
    }

    let mut p2 = Audit::new("P2");
    let kappa = p.gauges.kappa;
    for q in &t.pairs {
        let f = p.sets.at(q.j);
        let u = p.upsilon_at(q.j);
        let tilde = p.tilde_at(q.j)?;
        p2.check(
            q.upsilon == u && (q.a.radius - tilde).abs() <= AUDIT_TOL * tilde,
            None,
            Some(q.id),
            || format!("pair radii differ from Υ_{0}, Ῡ_{0}", q.j),
        );
        p2.check(
            distance_to_set(&f, &q.a.center, metric, p.tol)? <= p.tol * (1.0 + q.a.radius),
            None,
            Some(q.id),
            || "A is not centred on F_j".into(),
        );
        let kids: Vec<&Ball> = q.children.iter().map(|&k| &t.nodes[k].ball).collect();
        for (&k, l) in q.children.iter().zip(&kids) {
            let d = distance_to_set(&f, &l.center, metric, p.tol)?;
            p2.check(l.radius == u && d <= p.tol * (1.0 + u), Some(k), Some(q.id), || {
                format!("ball is not of radius Υ_j centred on F_j (offset {d:e})")
            });
            p2.check(q.a.contains_ball(&l.dilate(3.0), metric), Some(k), Some(q.id), || {
                "3L not inside A".into()
            });
        }
        for (a, b) in disjoint_dilates(&kids, metric) {
            let _ = a;
            p2.check(false, Some(q.children[b]), Some(q.id), || {
                "3L overlap within C(A;j)".into()
            });
        }
        let fg = p.f(u)? / p.g(u)?;
        let envelope = fg.powf(kappa / (1.0 - kappa));
        let count = kids.len() as f64;
        p2.check(
            count >= c.d1 * envelope * (1.0 - AUDIT_TOL) && count <= c.d2 * envelope * (1.0 + AUDIT_TOL),
            None,
            Some(q.id),
            || format!("#C = {count} outside [{}, {}]", c.d1 * envelope, c.d2 * envelope),
        );
    }
    for (&parent, ids) in &by_parent {
        let b = &t.nodes[parent].ball;
        let a_balls: Vec<&Ball> = ids.iter().map(|&q| &t.pairs[q].a).collect();
        for (&q, a) in ids.iter().zip(&a_balls) {
            p2.check(b.contains_ball(&a.dilate(3.0), metric), Some(parent), Some(q), || {
                "3A not inside B".into()
            });
        }
        // 3A disjointness is a per-sub-level property
        let top = ids.iter().map(|&q| t.pairs[q].sublevel).max().unwrap_or(0);
        for i in 1..=top {
            let sub: Vec<usize> = ids.iter().copied().filter(|&q| t.pairs[q].sublevel == i).collect();
            let balls: Vec<&Ball> = sub.iter().map(|&q| &t.pairs[q].a).collect();
            for (_, k) in disjoint_dilates(&balls, metric) {
                p2.check(false, Some(parent), Some(sub[k]), || {
                    format!("3A overlap in sub-level {i}")
                });
            }
        }
    }
    // measure clause: vol(Δ(F,Υ) ∩ ½A) ≤ 7^n vol(∪L) and vol(∪L) ≤ vol(Δ(F,Υ) ∩ A)
    if !t.pairs.is_empty() {
        let step = (t.pairs.len() / AUDIT_PAIRS_MC).max(1);
        for q in t.pairs.iter().step_by(step).take(AUDIT_PAIRS_MC) {
            let f = p.sets.at(q.j);
            let union: f64 = q.children.iter().map(|&k| t.nodes[k].ball.volume(metric)).sum();
            let mut g = stream(AUDIT_SEED, &[q.id as u64]);
            let mut mopts = MeasureOptions::with_metric(metric);
            mopts.tol = p.tol;
            mopts.window = Some(q.a.bounding_box());
            let outer = global_neighborhood_measure(&f, q.upsilon, AUDIT_MC_SAMPLES, &mopts, &mut g)?;
            mopts.window = Some(q.a.dilate(0.5).bounding_box());
            let inner = global_neighborhood_measure(&f, q.upsilon, AUDIT_MC_SAMPLES, &mopts, &mut g)?;
            // box windows overshoot Euclidean balls; the sup-norm case is exact
            let slack = 1.0 + AUDIT_TOL;
            // endpoint rounding of the exact 1-d path at coordinates of size |x|
            let reach = q.a.center.iter().fold(0.0f64, |m, v| m.max(v.abs())) + q.a.radius;
            let abs = 8.0 * f64::EPSILON * reach * (q.children.len() + 1) as f64;
            p2.check(
                union <= (outer.value + 3.0 * outer.std_error) * slack + abs || metric == Metric::Euclidean,
                None,
                Some(q.id),
                || format!("vol(∪L) = {union:e} exceeds vol(Δ ∩ A) = {:e}", outer.value),
            );
            p2.check(
                7f64.powi(n as i32) * union * slack + abs >= inner.value - 3.0 * inner.std_error,
                None,
                Some(q.id),
                || format!("vol(∪L) = {union:e} too small against vol(Δ ∩ ½A) = {:e}", inner.value),
            );
        }
    }

    let mut p3 = Audit::new("P3");
    let mut p4 = Audit::new("P4");
    let mut p5 = Audit::new("P5");
    for nd in &t.nodes {
        let root = nd.parent.is_none();
        let want = l_b(p, c, &nd.ball, root)?;
        p5.check(nd.l_b == want, Some(nd.id), None, || {
            format!("l_B = {} but formula gives {want}", nd.l_b)
        });
        if !root {
            p5.check(nd.l_b >= 2, Some(nd.id), None, || format!("l_B = {} < 2", nd.l_b));
        }
        if nd.level >= t.depth {
            continue;
        }
        // expanded node: sub-levels 1..=l_B present, each with enough A-mass
        let ids = by_parent.get(&nd.id).cloned().unwrap_or_default();
        let vgb = p.g(nd.ball.radius)?;
        for i in 1..=nd.l_b {
            let sum: f64 = ids
                .iter()
                .filter(|&&q| t.pairs[q].sublevel == i)
                .map(|&q| p.g(t.pairs[q].a.radius))
                .sum::<Result<f64>>()?;
            p3.check(sum >= c.c6 * vgb * (1.0 - AUDIT_TOL), Some(nd.id), None, || {
                format!("sub-level {i}: Σ V^g(A) = {sum:e} < c₆ V^g(B) = {:e}", c.c6 * vgb)
            });
        }
        let present = ids.iter().map(|&q| t.pairs[q].sublevel).max().unwrap_or(0);
        p5.check(present == nd.l_b, Some(nd.id), None, || {
            format!("{present} sub-levels built, l_B = {}", nd.l_b)
        });
        let by_sub = |i: usize| nd.children.iter().filter(move |&&k| t.nodes[k].sublevel == i);
        for i in 1..nd.l_b {
            let mut min_f = f64::INFINITY;
            let mut min_h = f64::INFINITY;
            for &k in by_sub(i) {
                min_f = min_f.min(p.f(t.nodes[k].ball.radius)?);
                min_h = min_h.min(p.h(t.nodes[k].ball.radius)?);
            }
            for &k in by_sub(i + 1) {
                let r = t.nodes[k].ball.radius;
                let (fm, hm) = (p.f(r)?, p.h(r)?);
                p4.check(fm <= 0.5 * min_f && hm <= 0.5 * min_h, Some(k), None, || {
                    format!("sub-level {} ball does not halve f or h of sub-level {i}", i + 1)
                });
            }
        }
    }

    let properties: Vec<PropertyAudit> = [p0, p1, p2, p3, p4, p5].into_iter().map(Audit::finish).collect();
    let all_passed = properties.iter().all(|a| a.passed);
    Ok(AuditReport {
        properties,
        all_passed,
        tolerance: AUDIT_TOL,
        mc_samples: AUDIT_MC_SAMPLES,
    })
}

/// Deepest-level balls sorted by first coordinate for interval queries.
pub struct LeafIndex<'a> {
    leaves: Vec<(f64, usize)>,
    rmax: f64,
    tree: &'a CantorTree,
}

impl<'a> LeafIndex<'a> {
    pub fn new(t: &'a CantorTree) -> Self {
        let mut leaves: Vec<(f64, usize)> = t.leaves().map(|n| (n.ball.center[0], n.id)).collect();
        leaves.sort_by(|a, b| a.0.total_cmp(&b.0));
        let rmax = t.leaves().map(|n| n.ball.radius).fold(0.0, f64::max);
        LeafIndex { leaves, rmax, tree: t }
    }

    /// Ids of deepest balls meeting `d`.
    pub fn hits(&self, d: &Ball, metric: Metric) -> Vec<usize> {
        let reach = d.radius + self.rmax;
        let lo = self.leaves.partition_point(|(x, _)| *x <= d.center[0] - reach);
        let mut out = Vec::new();
        for &(x, id) in &self.leaves[lo..] {
            if x >= d.center[0] + reach {
                break;
            }
            if self.tree.nodes[id].ball.intersects(d, metric) {
                out.push(id);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }
}

/// `Σ μ(L)` over deepest-level balls `L` meeting `D`.
pub fn ball_mass_upper(t: &CantorTree, mass: &MassAssignment, d: &Ball, metric: Metric) -> f64 {
    LeafIndex::new(t).hits(d, metric).iter().map(|&i| mass.mu[i]).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderOptions {
    /// Defaults to the smallest deepest-level radius.
    #[serde(default)]
    pub r_min: Option<f64>,
    /// Defaults to `r(B₀)`.
    #[serde(default)]
    pub r_max: Option<f64>,
    /// Share of trials centred near a random deepest ball; the rest are uniform in `B₀`.
    #[serde(default = "half")]
    pub leaf_fraction: f64,
}

fn half() -> f64 {
    0.5
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions {
            r_min: None,
            r_max: None,
            leaf_fraction: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    /// Max of `μ(D) η / f(r(D))` over trials meeting at least two deepest balls.
    pub max_ratio: f64,
    pub worst_ball: Option<Ball>,
    /// Same maximum over trials meeting exactly one deepest ball.
    pub single_ball_max_ratio: f64,
    pub trials: usize,
    pub multi_ball_trials: usize,
    pub single_ball_trials: usize,
    pub empty_trials: usize,
    /// `η / max_ratio`: the lower bound on `H^f(K_η)` implied by the mass distribution principle.
    pub mdp_lower_bound: f64,
    pub r_min: f64,
    pub r_max: f64,
}

pub fn holder_check<R: Rng + ?Sized>(
    t: &CantorTree,
    mass: &MassAssignment,
    p: &ConstructionParams,
    trials: usize,
    opts: &HolderOptions,
    rng: &mut R,
) -> Result<HolderReport> {
    if trials < 1000 {
        return arg("holder_check needs at least 1000 trials");
    }
    if mass.mu.len() != t.nodes.len() {
        return arg("mass assignment does not match the tree");
    }
    let metric = p.metric;
    let index = LeafIndex::new(t);
    let leaves: Vec<usize> = t.leaves().map(|n| n.id).collect();
    let r_min = opts
        .r_min
        .unwrap_or_else(|| t.leaves().map(|n| n.ball.radius).fold(f64::INFINITY, f64::min));
    let r_max = opts.r_max.unwrap_or(p.domain.radius);
    if !(r_min > 0.0 && r_min <= r_max && r_max.is_finite()) {
        return arg(format!("invalid radius window [{r_min}, {r_max}]"));
    }
    let b0 = &p.domain;
    let mut rep = HolderReport {
        max_ratio: 0.0,
        worst_ball: None,
        single_ball_max_ratio: 0.0,
        trials,
        multi_ball_trials: 0,
        single_ball_trials: 0,
        empty_trials: 0,
        mdp_lower_bound: f64::INFINITY,
        r_min,
        r_max,
    };
    for _ in 0..trials {
        let r = (r_min.ln() + (r_max.ln() - r_min.ln()) * rng.gen::<f64>()).exp();
        let center = if rng.gen::<f64>() < opts.leaf_fraction && !leaves.is_empty() {
            let l = &t.nodes[leaves[rng.gen_range(0..leaves.len())]].ball;
            metric.sample_ball(&l.center, r, rng)
        } else {
            metric.sample_ball(&b0.center, b0.radius, rng)
        };
        let d = Ball { center, radius: r };
        let hits = index.hits(&d, metric);
        let m: f64 = hits.iter().map(|&i| mass.mu[i]).sum();
        let ratio = m * p.eta / p.f(r)?;
        match hits.len() {
            0 => rep.empty_trials += 1,
            1 => {
                rep.single_ball_trials += 1;
                rep.single_ball_max_ratio = rep.single_ball_max_ratio.max(ratio);
            }
            _ => {
                rep.multi_ball_trials += 1;
                if ratio > rep.max_ratio {
                    rep.max_ratio = ratio;
                    rep.worst_ball = Some(d);
                }
            }
        }
    }
    if rep.max_ratio > 0.0 {
        rep.mdp_lower_bound = p.eta / rep.max_ratio;
    }
    Ok(rep)
}
