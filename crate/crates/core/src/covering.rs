//! Greedy covering and packing selections: 5r covers, separated nets, and
//! the `K_{G,B}` / `C(A; j)` families.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::geometry::{Ball, Metric, Point, Window};
use crate::rng::{self, stream};
use crate::sets::{sample_on_set, SampleOptions, SetModel};

pub const DEFAULT_POOL_PER_J: usize = 10_000;

/// A ball tagged with the index `j` of the stage it came from (0 when untagged).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "BallRepr", into = "BallRepr")]
pub struct IndexedBall {
    pub ball: Ball,
    pub j: usize,
}

#[derive(Serialize, Deserialize)]
struct BallRepr {
    c: Point,
    r: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    j: usize,
}

fn is_zero(j: &usize) -> bool {
    *j == 0
}

impl From<BallRepr> for IndexedBall {
    fn from(b: BallRepr) -> Self {
        IndexedBall {
            ball: Ball {
                center: b.c,
                radius: b.r,
            },
            j: b.j,
        }
    }
}

impl From<IndexedBall> for BallRepr {
    fn from(b: IndexedBall) -> Self {
        BallRepr {
            c: b.ball.center,
            r: b.ball.radius,
            j: b.j,
        }
    }
}

impl IndexedBall {
    pub fn new(ball: Ball, j: usize) -> Self {
        IndexedBall { ball, j }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    pub balls: Vec<IndexedBall>,
    #[serde(default)]
    pub metric: Metric,
}

impl BallFamily {
    pub fn new(balls: Vec<Ball>, metric: Metric) -> Self {
        BallFamily {
            balls: balls.into_iter().map(|b| IndexedBall::new(b, 0)).collect(),
            metric,
        }
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn pairwise_disjoint(&self) -> bool {
        pairwise_disjoint(self.balls.iter().map(|b| &b.ball), self.metric)
    }
}

/// Brute-force pairwise disjointness.
pub fn pairwise_disjoint<'a>(balls: impl IntoIterator<Item = &'a Ball>, metric: Metric) -> bool {
    let v: Vec<&Ball> = balls.into_iter().collect();
    (0..v.len()).all(|i| (i + 1..v.len()).all(|k| v[i].disjoint(v[k], metric)))
}

/// Uniform grid over ball centres. Any two intersecting balls of radius at most
/// `cell / 2` have centres in neighbouring cells, so queries scan the 3^n block.
/// Falls back to one bucket for the torus or high dimension.
pub(crate) struct SpatialHash {
    cell: f64,
    bucketed: bool,
    cells: HashMap<Vec<i64>, Vec<usize>>,
    all: Vec<usize>,
}

impl SpatialHash {
    pub(crate) fn new(cell: f64, metric: Metric, n: usize) -> Self {
        SpatialHash {
            cell,
            bucketed: metric != Metric::TorusSup && n <= 3 && cell > 0.0 && cell.is_finite(),
            cells: HashMap::new(),
            all: Vec::new(),
        }
    }

    fn key(&self, c: &[f64]) -> Vec<i64> {
        c.iter().map(|v| (v / self.cell).floor() as i64).collect()
    }

    pub(crate) fn insert(&mut self, c: &[f64], idx: usize) {
        if self.bucketed {
            let k = self.key(c);
            self.cells.entry(k).or_default().push(idx);
        } else {
            self.all.push(idx);
        }
    }

    pub(crate) fn near(&self, c: &[f64], mut f: impl FnMut(usize) -> bool) -> bool {
        if !self.bucketed {
            return self.all.iter().any(|&i| f(i));
        }
        let base = self.key(c);
        let n = base.len();
        let mut k = base.clone();
        for code in 0..3usize.pow(n as u32) {
            let mut q = code;
            for i in 0..n {
                k[i] = base[i] + (q % 3) as i64 - 1;
                q /= 3;
            }
            if let Some(v) = self.cells.get(&k) {
                if v.iter().any(|&i| f(i)) {
                    return true;
                }
            }
        }
        false
    }
}

/// Greedy disjoint subfamily: descending radius, ties by input order. Each input
/// ball lies in the 5-dilate (indeed the 3-dilate) of a selected ball.
pub fn five_r_cover(fam: &BallFamily) -> BallFamily {
    let mut order: Vec<usize> = (0..fam.balls.len()).collect();
    order.sort_by(|&a, &b| fam.balls[b].ball.radius.total_cmp(&fam.balls[a].ball.radius));
    let rmax = fam.balls.iter().map(|b| b.ball.radius).fold(0.0, f64::max);
    let n = fam.balls.first().map_or(1, |b| b.ball.dim());
    let mut hash = SpatialHash::new(2.0 * rmax, fam.metric, n);
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        let b = &fam.balls[i].ball;
        let clash = hash.near(&b.center, |k| fam.balls[chosen[k]].ball.intersects(b, fam.metric));
        if !clash {
            hash.insert(&b.center, chosen.len());
            chosen.push(i);
        }
    }
    BallFamily {
        balls: chosen.into_iter().map(|i| fam.balls[i].clone()).collect(),
        metric: fam.metric,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetResult {
    pub points: Vec<Point>,
    /// Candidates drawn.
    pub pool_size: usize,
    /// Candidates that fell inside the region.
    pub pool_in_region: usize,
    /// Every in-region candidate is within `sep` of a chosen point.
    pub maximal: bool,
}

#[derive(Clone, Debug)]
pub struct NetOptions {
    pub metric: Metric,
    pub tol: f64,
}

impl Default for NetOptions {
    fn default() -> Self {
        NetOptions {
            metric: Metric::Sup,
            tol: 1e-9,
        }
    }
}

/// Candidate points on `F ∩ region`.
fn candidate_pool<R: Rng + ?Sized>(
    m: &SetModel,
    region: &Ball,
    count: usize,
    opts: &NetOptions,
    rng: &mut R,
) -> Result<Vec<Point>> {
    let pool = match m {
        // finite sets are enumerated, not sampled
        SetModel::Points { points } => points.clone(),
        _ => {
            let w: Window = region.bounding_box();
            let sopts = SampleOptions {
                window: Some(w),
                tol: opts.tol,
            };
            sample_on_set(m, count, &sopts, rng)?
        }
    };
    Ok(pool
        .into_iter()
        .filter(|p| region.contains_point(p, opts.metric))
        .collect())
}

fn greedy_net(pool: &[Point], sep: f64, metric: Metric) -> Vec<Point> {
    let n = pool.first().map_or(1, |p| p.len());
    let mut hash = SpatialHash::new(sep, metric, n);
    let mut out: Vec<Point> = Vec::new();
    for p in pool {
        if !hash.near(p, |k| metric.dist(&out[k], p) <= sep) {
            hash.insert(p, out.len());
            out.push(p.clone());
        }
    }
    out
}

/// Greedy maximal `sep`-separated subset of a candidate pool on `F ∩ region`.
pub fn separated_net<R: Rng + ?Sized>(
    m: &SetModel,
    region: &Ball,
    sep: f64,
    candidates: usize,
    opts: &NetOptions,
    rng: &mut R,
) -> Result<NetResult> {
    if !(sep > 0.0) {
        return arg("separation must be positive");
    }
    if candidates < 100 {
        return arg("candidate pool must hold at least 100 points");
    }
    if region.dim() != m.ambient_dim() {
        return arg("region dimension does not match the model");
    }
    let pool = candidate_pool(m, region, candidates, opts, rng)?;
    let points = greedy_net(&pool, sep, opts.metric);
    let maximal = pool
        .iter()
        .all(|p| points.iter().any(|q| opts.metric.dist(p, q) <= sep));
    Ok(NetResult {
        pool_size: candidates,
        pool_in_region: pool.len(),
        points,
        maximal,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CajResult {
    pub balls: Vec<IndexedBall>,
    pub net: NetResult,
}

impl CajResult {
    pub fn cardinality(&self) -> usize {
        self.balls.len()
    }
}

/// `C(A; j)`: balls of radius `Υ_j` on a `6Υ_j`-separated net of `F ∩ ½A`.
pub fn build_caj<R: Rng + ?Sized>(
    a: &Ball,
    j: usize,
    m: &SetModel,
    upsilon_j: f64,
    pool: usize,
    opts: &NetOptions,
    rng: &mut R,
) -> Result<CajResult> {
    if !(upsilon_j > 0.0 && 6.0 * upsilon_j < a.radius) {
        return arg(format!(
            "C(A;j) needs 0 < 6Υ_j < r(A); got Υ_j = {upsilon_j}, r(A) = {}",
            a.radius
        ));
    }
    let half = a.dilate(0.5);
    let net = separated_net(m, &half, 6.0 * upsilon_j, pool.max(100), opts, rng)?;
    let balls = net
        .points
        .iter()
        .map(|p| {
            IndexedBall::new(
                Ball {
                    center: p.clone(),
                    radius: upsilon_j,
                },
                j,
            )
        })
        .collect();
    Ok(CajResult { balls, net })
}

/// Radii `Υ_j` or `Ῡ_j` as a function of the stage index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase", deny_unknown_fields)]
pub enum RadiusRule {
    /// `c · j^{−tau}`
    Power { c: f64, tau: f64 },
    /// `c · ratio^j`
    Geometric { c: f64, ratio: f64 },
}

impl RadiusRule {
    pub fn at(&self, j: usize) -> f64 {
        match self {
            RadiusRule::Power { c, tau } => c * (j as f64).powf(-tau),
            RadiusRule::Geometric { c, ratio } => c * ratio.powi(j as i32),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            RadiusRule::Power { c, tau } => *c > 0.0 && *tau > 0.0 && c.is_finite() && tau.is_finite(),
            RadiusRule::Geometric { c, ratio } => *c > 0.0 && c.is_finite() && *ratio > 0.0 && *ratio < 1.0,
        };
        if ok {
            Ok(())
        } else {
            arg("radius rule must be positive and decreasing")
        }
    }
}

/// `F_j` as a function of the stage index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSequence {
    /// `F_j = {origin + scale · h(j)}` with `h` the Halton sequence
    /// (van der Corput in dimension 1).
    LowDiscrepancy { origin: Point, scale: f64 },
    /// The same model at every index.
    Fixed { model: SetModel },
}

const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Radical inverse of `j` in base `b`.
pub fn radical_inverse(mut j: u64, b: u64) -> f64 {
    let mut inv = 1.0 / b as f64;
    let mut x = 0.0;
    while j > 0 {
        x += (j % b) as f64 * inv;
        j /= b;
        inv /= b as f64;
    }
    x
}

pub fn van_der_corput(j: u64) -> f64 {
    radical_inverse(j, 2)
}

impl SetSequence {
    pub fn dim(&self) -> usize {
        match self {
            SetSequence::LowDiscrepancy { origin, .. } => origin.len(),
            SetSequence::Fixed { model } => model.ambient_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SetSequence::LowDiscrepancy { origin, scale } => {
                if origin.is_empty() || origin.len() > PRIMES.len() {
                    return arg("low-discrepancy sequence supports dimensions 1 to 10");
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return arg("low-discrepancy scale must be positive");
                }
                Ok(())
            }
            SetSequence::Fixed { model } => model.validate(),
        }
    }

    pub fn at(&self, j: usize) -> SetModel {
        match self {
            SetSequence::LowDiscrepancy { origin, scale } => SetModel::point(
                origin
                    .iter()
                    .zip(PRIMES)
                    .map(|(o, b)| o + scale * radical_inverse(j as u64, b))
                    .collect(),
            ),
            SetSequence::Fixed { model } => model.clone(),
        }
    }
}

/// Supplies `F_j` and `Ῡ_j` to the selection routines.
pub trait StageProvider: Sync {
    fn set(&self, j: usize) -> SetModel;
    fn tilde_upsilon(&self, j: usize) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSequence {
    pub sets: SetSequence,
    pub tilde_upsilon: RadiusRule,
}

impl StageProvider for StageSequence {
    fn set(&self, j: usize) -> SetModel {
        self.sets.at(j)
    }

    fn tilde_upsilon(&self, j: usize) -> f64 {
        self.tilde_upsilon.at(j)
    }
}

#[derive(Clone, Debug)]
pub struct KgbOptions {
    pub metric: Metric,
    pub tol: f64,
    /// The constant `c₅` the target is measured against.
    pub c5: f64,
    pub pool_per_j: usize,
}

impl Default for KgbOptions {
    fn default() -> Self {
        KgbOptions {
            metric: Metric::Sup,
            tol: 1e-9,
            c5: 1.0,
            pool_per_j: DEFAULT_POOL_PER_J,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KgbResult {
    /// The balls `A` (radius `Ῡ_j`), in selection order.
    pub balls: Vec<IndexedBall>,
    /// Index at which the target was met.
    pub n0: usize,
    /// `Σ vol(A) / vol(B)`.
    pub achieved_fraction: f64,
    pub target: f64,
}

/// `K_{G,B}`: candidates `B(x, 3Ῡ_j) ⊂ B` with `x ∈ F_j`, taken for
/// `j = G, G+1, …` and thinned greedily (larger radii first, which is the
/// 5r-cover order since `Ῡ_j` decreases). Survivors are scaled by 1/3. Stops at
/// the first `j` where `Σ vol(A) ≥ target_fraction · c₅ · vol(B)`.
pub fn build_kgb<R: Rng + ?Sized>(
    b: &Ball,
    g: usize,
    seq: &dyn StageProvider,
    j_max: usize,
    target_fraction: f64,
    opts: &KgbOptions,
    rng: &mut R,
) -> Result<KgbResult> {
    let mut out = build_kgb_many(std::slice::from_ref(b), g, seq, j_max, target_fraction, opts, rng)?;
    Ok(out.pop().unwrap())
}

/// `build_kgb` over several pairwise disjoint balls at once, sharing each `F_j`.
/// Every ball must reach the target; the first shortfall is reported.
pub fn build_kgb_many<R: Rng + ?Sized>(
    targets: &[Ball],
    g: usize,
    seq: &dyn StageProvider,
    j_max: usize,
    target_fraction: f64,
    opts: &KgbOptions,
    rng: &mut R,
) -> Result<Vec<KgbResult>> {
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return arg("target fraction must lie in (0, 1]");
    }
    if g == 0 || j_max < g {
        return arg("need 1 ≤ G ≤ j_max");
    }
    if targets.is_empty() {
        return Ok(Vec::new());
    }
    let n = targets[0].dim();
    let metric = opts.metric;
    let target = target_fraction * opts.c5;
    let master = rng::fork(rng);
    let rmax = targets.iter().map(|b| b.radius).fold(0.0, f64::max);
    // locate the owning target of a candidate centre
    let mut owners = SpatialHash::new(2.0 * rmax, metric, n);
    for (i, b) in targets.iter().enumerate() {
        owners.insert(&b.center, i);
    }
    struct State {
        accepted: Vec<Ball>,
        hash: Option<SpatialHash>,
        covered: f64,
        done: Option<usize>,
    }
    let mut states: Vec<State> = targets
        .iter()
        .map(|_| State {
            accepted: Vec::new(),
            hash: None,
            covered: 0.0,
            done: None,
        })
        .collect();
    let mut tags: Vec<Vec<usize>> = vec![Vec::new(); targets.len()];
    let mut remaining = targets.len();
    let mut prev_tilde = f64::INFINITY;
    for j in g..=j_max {
        let tilde = seq.tilde_upsilon(j);
        if !(tilde > 0.0 && tilde <= prev_tilde) {
            return arg(format!("Ῡ_j must be positive and non-increasing (j = {j})"));
        }
        prev_tilde = tilde;
        let f = seq.set(j);
        if f.ambient_dim() != n {
            return arg("stage set dimension does not match the target balls");
        }
        let r3 = tilde * 3.0;
        let mut g_rng = stream(master, &[j as u64]);
        // candidate centres per target
        let mut cands: Vec<(usize, Point)> = Vec::new();
        match &f {
            SetModel::Points { points } => {
                for p in points {
                    let mut hit = None;
                    owners.near(p, |i| {
                        if states[i].done.is_none() && targets[i].contains_point(p, metric) {
                            hit = Some(i);
                            true
                        } else {
                            false
                        }
                    });
                    if let Some(i) = hit {
                        cands.push((i, p.clone()));
                    }
                }
            }
            _ => {
                for (i, b) in targets.iter().enumerate() {
                    if states[i].done.is_some() || r3 >= b.radius {
                        continue;
                    }
                    let inner = Ball {
                        center: b.center.clone(),
                        radius: b.radius - r3,
                    };
                    let nopts = NetOptions { metric, tol: opts.tol };
                    let pool = candidate_pool(&f, &inner, opts.pool_per_j, &nopts, &mut g_rng)?;
                    for p in greedy_net(&pool, 2.0 * r3, metric) {
                        cands.push((i, p));
                    }
                }
            }
        }
        let mut touched: Vec<usize> = Vec::new();
        for (i, p) in cands {
            let st = &mut states[i];
            if st.done.is_some() {
                continue;
            }
            let cand = Ball { center: p, radius: r3 };
            if !targets[i].contains_ball(&cand, metric) {
                continue;
            }
            let hash = st.hash.get_or_insert_with(|| SpatialHash::new(2.0 * r3, metric, n));
            let accepted = &st.accepted;
            if hash.near(&cand.center, |k| accepted[k].intersects(&cand, metric)) {
                continue;
            }
            hash.insert(&cand.center, st.accepted.len());
            st.covered += metric.ball_volume(n, tilde);
            st.accepted.push(cand);
            tags[i].push(j);
            touched.push(i);
        }
        touched.dedup();
        for i in touched {
            let st = &mut states[i];
            if st.done.is_none() && st.covered / targets[i].volume(metric) >= target {
                st.done = Some(j);
                remaining -= 1;
            }
        }
        if remaining == 0 {
            break;
        }
    }
    let mut out = Vec::with_capacity(targets.len());
    for (i, st) in states.into_iter().enumerate() {
        let achieved = st.covered / targets[i].volume(metric);
        let Some(n0) = st.done else {
            return Err(Error::CoverageShortfall {
                achieved: achieved / opts.c5,
                target: target_fraction,
            });
        };
        let balls = st
            .accepted
            .into_iter()
            .zip(&tags[i])
            .map(|(b, &j)| {
                IndexedBall::new(
                    Ball {
                        center: b.center,
                        radius: b.radius / 3.0,
                    },
                    j,
                )
            })
            .collect();
        out.push(KgbResult {
            balls,
            n0,
            achieved_fraction: achieved,
            target,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{global_neighborhood_measure, MeasureOptions};
    use crate::sets::{distance_to_set, Ifs};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn ball(c: Vec<f64>, r: f64) -> Ball {
        Ball::new(c, r).unwrap()
    }

    fn check_cover(input: &BallFamily, out: &BallFamily) {
        assert!(out.pairwise_disjoint());
        for b in &input.balls {
            assert!(
                out.balls
                    .iter()
                    .any(|s| s.ball.dilate(5.0).contains_ball(&b.ball, input.metric)),
                "{b:?} not covered"
            );
        }
    }

    #[test]
    fn five_r_examples() {
        let one = BallFamily::new(vec![ball(vec![0.0], 1.0)], Metric::Sup);
        assert_eq!(five_r_cover(&one), one);
        let three = BallFamily::new(
            vec![ball(vec![0.0], 1.0), ball(vec![1.0], 1.0), ball(vec![2.0], 1.0)],
            Metric::Sup,
        );
        let out = five_r_cover(&three);
        let centers: Vec<f64> = out.balls.iter().map(|b| b.ball.center[0]).collect();
        assert_eq!(centers, vec![0.0, 2.0]);
        check_cover(&three, &out);
        let mut g = rng(3);
        let fam = BallFamily::new(
            (0..100)
                .map(|_| ball(vec![g.gen(), g.gen()], 0.01 + 0.04 * g.gen::<f64>()))
                .collect(),
            Metric::Sup,
        );
        check_cover(&fam, &five_r_cover(&fam));
    }

    #[test]
    fn separated_net_examples() {
        let line = SetModel::axis_line(2);
        let region = ball(vec![0.0, 0.0], 1.0);
        let net = separated_net(&line, &region, 0.5, 1000, &NetOptions::default(), &mut rng(1)).unwrap();
        assert!((3..=4).contains(&net.points.len()), "{}", net.points.len());
        assert!(net.maximal);
        for (i, p) in net.points.iter().enumerate() {
            assert!(region.contains_point(p, Metric::Sup) && p[1] == 0.0);
            for q in &net.points[i + 1..] {
                assert!(Metric::Sup.dist(p, q) > 0.5);
            }
        }
        let pt = SetModel::point(vec![0.2, 0.1]);
        let net = separated_net(&pt, &region, 0.1, 100, &NetOptions::default(), &mut rng(1)).unwrap();
        assert_eq!(net.points, vec![vec![0.2, 0.1]]);
        let net = separated_net(&line, &region, 5.0, 500, &NetOptions::default(), &mut rng(2)).unwrap();
        assert_eq!(net.points.len(), 1);
        let far = SetModel::point(vec![9.0, 9.0]);
        let net = separated_net(&far, &region, 0.1, 100, &NetOptions::default(), &mut rng(1)).unwrap();
        assert!(net.points.is_empty());
    }

    fn check_caj(a: &Ball, c: &CajResult, metric: Metric) {
        for (i, l) in c.balls.iter().enumerate() {
            assert!(a.contains_ball(&l.ball.dilate(3.0), metric));
            for m in &c.balls[i + 1..] {
                assert!(l.ball.dilate(3.0).disjoint(&m.ball.dilate(3.0), metric));
            }
        }
    }

    #[test]
    fn caj_examples() {
        let a = ball(vec![0.0, 0.0], 1.0);
        let c = build_caj(
            &a,
            5,
            &SetModel::axis_line(2),
            0.01,
            10_000,
            &NetOptions::default(),
            &mut rng(1),
        )
        .unwrap();
        let k = c.cardinality() as f64;
        assert!((8.0..=32.0).contains(&k), "{k}");
        check_caj(&a, &c, Metric::Sup);
        let c = build_caj(
            &a,
            1,
            &SetModel::point(vec![0.0, 0.0]),
            0.1,
            100,
            &NetOptions::default(),
            &mut rng(1),
        )
        .unwrap();
        assert_eq!(c.cardinality(), 1);
        assert!(build_caj(
            &a,
            1,
            &SetModel::axis_line(2),
            0.2,
            100,
            &NetOptions::default(),
            &mut rng(1)
        )
        .is_err());
    }

    #[test]
    fn caj_cantor_count() {
        let k = SetModel::Ifs(Ifs::middle_third_cantor());
        // 1/3 lies on K and its half-ball sees both first-level pieces
        let a = ball(vec![1.0 / 3.0], 1.0);
        let c = build_caj(&a, 1, &k, 1e-3, 20_000, &NetOptions::default(), &mut rng(2)).unwrap();
        // brute force: greedy net over the left ends of the depth-7 intervals
        let mut ends: Vec<Vec<f64>> = (0..128u32)
            .map(|w| {
                vec![(0..7)
                    .map(|i| {
                        if w >> (6 - i) & 1 == 1 {
                            2.0 * 3f64.powi(-(i + 1))
                        } else {
                            0.0
                        }
                    })
                    .sum()]
            })
            .filter(|p: &Vec<f64>| a.dilate(0.5).contains_point(p, Metric::Sup))
            .collect();
        ends.sort_by(|x, y| x[0].total_cmp(&y[0]));
        let brute = greedy_net(&ends, 6e-3, Metric::Sup).len() as f64;
        let kappa = 2f64.ln() / 3f64.ln();
        let expect = 1000f64.powf(kappa);
        let got = c.cardinality() as f64;
        assert!(got >= expect / 4.0 && got <= expect * 4.0, "{got} vs {expect}");
        assert!(got >= brute / 2.0 && got <= brute * 2.0, "{got} vs brute {brute}");
        check_caj(&a, &c, Metric::Sup);
        for l in &c.balls {
            assert!(distance_to_set(&k, &l.ball.center, Metric::Sup, 1e-9).unwrap() < 1e-6);
        }
    }

    #[test]
    fn caj_measure_sandwich() {
        let a = ball(vec![0.0, 0.0], 1.0);
        let f = SetModel::circle(vec![0.0, 0.0], 0.3).unwrap();
        let up = 0.01;
        let c = build_caj(&a, 1, &f, up, 20_000, &NetOptions::default(), &mut rng(4)).unwrap();
        let union = c.balls.iter().map(|l| l.ball.volume(Metric::Sup)).sum::<f64>();
        let mut opts = MeasureOptions {
            window: Some(a.bounding_box()),
            ..Default::default()
        };
        let outer = global_neighborhood_measure(&f, up, 200_000, &opts, &mut rng(5)).unwrap();
        opts.window = Some(a.dilate(0.5).bounding_box());
        let inner = global_neighborhood_measure(&f, up, 200_000, &opts, &mut rng(6)).unwrap();
        assert!(union <= outer.value + 3.0 * outer.std_error);
        // ≫ with a generous constant
        assert!(union >= inner.value / 20.0, "{union} vs {}", inner.value);
    }

    fn check_kgb(b: &Ball, res: &KgbResult, metric: Metric) {
        let triples: Vec<Ball> = res.balls.iter().map(|a| a.ball.dilate(3.0)).collect();
        for t in &triples {
            assert!(b.contains_ball(t, metric));
        }
        assert!(pairwise_disjoint(&triples, metric));
    }

    #[test]
    fn kgb_van_der_corput() {
        let seq = StageSequence {
            sets: SetSequence::LowDiscrepancy {
                origin: vec![0.0],
                scale: 1.0,
            },
            tilde_upsilon: RadiusRule::Power { c: 1.0, tau: 1.0 },
        };
        let b = ball(vec![0.5], 0.4);
        let res = build_kgb(&b, 10, &seq, 100_000, 0.05, &KgbOptions::default(), &mut rng(1)).unwrap();
        assert!(!res.balls.is_empty());
        assert!(res.achieved_fraction >= 0.05);
        check_kgb(&b, &res, Metric::Sup);
    }

    #[test]
    fn kgb_shortfall_and_line() {
        let seq = StageSequence {
            sets: SetSequence::Fixed {
                model: SetModel::point(vec![5.0]),
            },
            tilde_upsilon: RadiusRule::Power { c: 1.0, tau: 1.0 },
        };
        let b = ball(vec![0.5], 0.4);
        match build_kgb(&b, 1, &seq, 50, 0.05, &KgbOptions::default(), &mut rng(1)) {
            Err(Error::CoverageShortfall { achieved, .. }) => assert_eq!(achieved, 0.0),
            other => panic!("{other:?}"),
        }
        let seq = StageSequence {
            sets: SetSequence::Fixed {
                model: SetModel::axis_line(2),
            },
            tilde_upsilon: RadiusRule::Geometric { c: 1.0, ratio: 0.5 },
        };
        let b = ball(vec![0.1, 0.05], 0.5);
        let res = build_kgb(&b, 1, &seq, 30, 0.05, &KgbOptions::default(), &mut rng(2)).unwrap();
        check_kgb(&b, &res, Metric::Sup);
        assert!(res.n0 <= 10, "{}", res.n0);
        // slices y = const: the A's are squares, so area is Σ (2Ῡ)²
        let area: f64 = res.balls.iter().map(|a| (2.0 * a.ball.radius).powi(2)).sum();
        assert!(area >= 0.05 * b.volume(Metric::Sup));
    }

    #[test]
    fn kgb_is_deterministic() {
        let seq = StageSequence {
            sets: SetSequence::Fixed {
                model: SetModel::circle(vec![0.0, 0.0], 0.5).unwrap(),
            },
            tilde_upsilon: RadiusRule::Power { c: 0.2, tau: 1.0 },
        };
        let b = ball(vec![0.5, 0.0], 0.3);
        let opts = KgbOptions {
            pool_per_j: 500,
            ..Default::default()
        };
        let a = build_kgb(&b, 2, &seq, 200, 0.02, &opts, &mut rng(9)).unwrap();
        let c = build_kgb(&b, 2, &seq, 200, 0.02, &opts, &mut rng(9)).unwrap();
        assert_eq!(a, c);
        check_kgb(&b, &a, Metric::Sup);
    }

    #[test]
    fn json_round_trip() {
        let b = IndexedBall::new(ball(vec![1.0, 2.0], 0.5), 7);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"c":[1.0,2.0],"r":0.5,"j":7}"#);
        assert_eq!(serde_json::from_str::<IndexedBall>(&s).unwrap(), b);
    }

    #[test]
    fn van_der_corput_values() {
        assert_eq!(van_der_corput(1), 0.5);
        assert_eq!(van_der_corput(2), 0.25);
        assert_eq!(van_der_corput(3), 0.75);
        assert_eq!(radical_inverse(1, 3), 1.0 / 3.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn five_r_cover_property(seed in any::<u64>(), count in 1usize..120, n in 1usize..4, euclid in any::<bool>()) {
            let mut g = rng(seed);
            let metric = if euclid { Metric::Euclidean } else { Metric::Sup };
            let balls: Vec<Ball> = (0..count)
                .map(|_| ball((0..n).map(|_| g.gen()).collect(), 0.005 + 0.1 * g.gen::<f64>()))
                .collect();
            let fam = BallFamily::new(balls, metric);
            let out = five_r_cover(&fam);
            prop_assert!(out.pairwise_disjoint());
            for b in &fam.balls {
                prop_assert!(out.balls.iter().any(|s| s.ball.dilate(5.0).contains_ball(&b.ball, metric)));
            }
        }
    }
}
