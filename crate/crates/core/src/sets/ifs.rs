//! Self-similar attractors: cylinder geometry, cut-sets `I_r`, similarity dimension.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::geometry::{self, mat_mul, mat_vec, Matrix, Metric, Point, Window};

pub const DEFAULT_WORD_CAP: usize = 10_000_000;

/// `x ↦ ratio · O x + translation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonal: Option<Matrix>,
    pub translation: Point,
}

impl Similarity {
    pub fn new(ratio: f64, orthogonal: Option<Matrix>, translation: Point) -> Self {
        Similarity {
            ratio,
            orthogonal,
            translation,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Point {
        let ox = match &self.orthogonal {
            Some(o) => mat_vec(o, x),
            None => x.to_vec(),
        };
        ox.iter()
            .zip(&self.translation)
            .map(|(a, t)| self.ratio * a + t)
            .collect()
    }
}

#[derive(Clone, Debug, Default)]
struct Cache {
    dim: usize,
    /// Fixed point of the first map; lies on the attractor.
    anchor: Point,
    /// Euclidean ball `B(hull_center, hull_radius)` containing the attractor.
    hull_center: Point,
    hull_radius: f64,
    max_ratio: f64,
    dimension: f64,
    bbox: Option<Window>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "IfsRepr", into = "IfsRepr")]
pub struct Ifs {
    maps: Vec<Similarity>,
    osc_declared: bool,
    cache: Cache,
}

impl PartialEq for Ifs {
    fn eq(&self, other: &Self) -> bool {
        self.maps == other.maps && self.osc_declared == other.osc_declared
    }
}

#[derive(Serialize, Deserialize)]
struct IfsRepr {
    maps: Vec<Similarity>,
    #[serde(default, alias = "osc")]
    osc_declared: bool,
}

impl TryFrom<IfsRepr> for Ifs {
    type Error = Error;
    fn try_from(r: IfsRepr) -> Result<Self> {
        Ifs::new(r.maps, r.osc_declared)
    }
}

impl From<Ifs> for IfsRepr {
    fn from(i: Ifs) -> Self {
        IfsRepr {
            maps: i.maps,
            osc_declared: i.osc_declared,
        }
    }
}

/// Affine form of a composed word map `x ↦ ratio · O x + t`.
#[derive(Clone, Debug)]
pub struct Cylinder {
    pub ratio: f64,
    orth: Option<Matrix>,
    pub translation: Point,
}

impl Cylinder {
    fn identity(n: usize) -> Self {
        Cylinder {
            ratio: 1.0,
            orth: None,
            translation: vec![0.0; n],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Point {
        let ox = match &self.orth {
            Some(o) => mat_vec(o, x),
            None => x.to_vec(),
        };
        ox.iter()
            .zip(&self.translation)
            .map(|(a, t)| self.ratio * a + t)
            .collect()
    }

    /// `self ∘ m`.
    fn then(&self, m: &Similarity) -> Cylinder {
        let orth = match (&self.orth, &m.orthogonal) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(mat_mul(a, b)),
        };
        let t = self.apply(&m.translation);
        Cylinder {
            ratio: self.ratio * m.ratio,
            orth,
            translation: t,
        }
    }
}

impl Ifs {
    pub fn new(maps: Vec<Similarity>, osc_declared: bool) -> Result<Self> {
        if maps.len() < 2 {
            return arg("an IFS needs at least two maps");
        }
        let n = maps[0].translation.len();
        if n == 0 {
            return arg("IFS maps need a non-empty translation");
        }
        for m in &maps {
            if !(m.ratio > 0.0 && m.ratio < 1.0) {
                return arg(format!("IFS ratio must lie in (0,1), got {}", m.ratio));
            }
            if m.translation.len() != n {
                return arg("IFS maps disagree on dimension");
            }
            if let Some(o) = &m.orthogonal {
                if !geometry::is_square(o, n) {
                    return arg("orthogonal part must be n×n");
                }
                if geometry::orthogonality_defect(o) > 1e-12 {
                    return arg("orthogonal part is not orthogonal to 1e-12");
                }
            }
        }
        let mut ifs = Ifs {
            maps,
            osc_declared,
            cache: Cache::default(),
        };
        ifs.build_cache()?;
        Ok(ifs)
    }

    /// Convenience constructor for maps without an orthogonal part.
    pub fn from_ratios_translations(items: &[(f64, Vec<f64>)]) -> Result<Self> {
        Ifs::new(
            items
                .iter()
                .map(|(r, t)| Similarity::new(*r, None, t.clone()))
                .collect(),
            true,
        )
    }

    pub fn middle_third_cantor() -> Self {
        Ifs::from_ratios_translations(&[(1.0 / 3.0, vec![0.0]), (1.0 / 3.0, vec![2.0 / 3.0])]).unwrap()
    }

    pub fn sierpinski() -> Self {
        Ifs::from_ratios_translations(&[
            (0.5, vec![0.0, 0.0]),
            (0.5, vec![0.5, 0.0]),
            (0.5, vec![0.25, 3f64.sqrt() / 4.0]),
        ])
        .unwrap()
    }

    fn fixed_point(m: &Similarity, n: usize) -> Result<Point> {
        // (I − rO) x = t
        let o = m.orthogonal.clone().unwrap_or_else(|| geometry::identity(n));
        let a: Matrix = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (if i == j { 1.0 } else { 0.0 }) - m.ratio * o[i][j])
                    .collect()
            })
            .collect();
        geometry::solve(a, m.translation.clone())
            .ok_or_else(|| Error::Numeric("contraction fixed point system is singular".into()))
    }

    fn build_cache(&mut self) -> Result<()> {
        let n = self.maps[0].translation.len();
        let fixed: Vec<Point> = self
            .maps
            .iter()
            .map(|m| Self::fixed_point(m, n))
            .collect::<Result<_>>()?;
        let mut c = vec![0.0; n];
        for p in &fixed {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi / fixed.len() as f64;
            }
        }
        let mut rho: f64 = 0.0;
        for m in &self.maps {
            let img = m.apply(&c);
            rho = rho.max(Metric::Euclidean.dist(&img, &c) / (1.0 - m.ratio));
        }
        // strictly positive so that cylinder bounds are never degenerate
        rho = rho.max(1e-300) * (1.0 + 1e-12);
        let max_ratio = self.maps.iter().map(|m| m.ratio).fold(0.0, f64::max);
        self.cache = Cache {
            dim: n,
            anchor: fixed[0].clone(),
            hull_center: c,
            hull_radius: rho,
            max_ratio,
            dimension: 0.0,
            bbox: None,
        };
        self.cache.dimension = self.compute_similarity_dimension();
        self.cache.bbox = Some(self.compute_bbox());
        Ok(())
    }

    pub fn maps(&self) -> &[Similarity] {
        &self.maps
    }

    pub fn osc_declared(&self) -> bool {
        self.osc_declared
    }

    pub fn dim(&self) -> usize {
        self.cache.dim
    }

    pub fn anchor(&self) -> &[f64] {
        &self.cache.anchor
    }

    pub fn hull(&self) -> (&[f64], f64) {
        (&self.cache.hull_center, self.cache.hull_radius)
    }

    pub fn max_ratio(&self) -> f64 {
        self.cache.max_ratio
    }

    /// Axis-aligned box containing the attractor.
    pub fn bounding_box(&self) -> Window {
        self.cache.bbox.clone().expect("cache built")
    }

    fn compute_bbox(&self) -> Window {
        let n = self.dim();
        let (c, r) = self.hull();
        let mut lo: Point = c.iter().map(|x| x - r).collect();
        let mut hi: Point = c.iter().map(|x| x + r).collect();
        // iterate the box map; each iterate still contains the attractor
        for _ in 0..200 {
            let mut nlo = vec![f64::INFINITY; n];
            let mut nhi = vec![f64::NEG_INFINITY; n];
            for m in &self.maps {
                for corner in 0..(1usize << n) {
                    let p: Point = (0..n)
                        .map(|i| if corner >> i & 1 == 1 { hi[i] } else { lo[i] })
                        .collect();
                    let q = m.apply(&p);
                    for i in 0..n {
                        nlo[i] = nlo[i].min(q[i]);
                        nhi[i] = nhi[i].max(q[i]);
                    }
                }
            }
            let shrink: f64 = (0..n)
                .map(|i| (nlo[i] - lo[i]).abs() + (hi[i] - nhi[i]).abs())
                .fold(0.0, f64::max);
            for i in 0..n {
                lo[i] = lo[i].max(nlo[i]);
                hi[i] = hi[i].min(nhi[i]);
            }
            if shrink < 1e-15 {
                break;
            }
        }
        Window { lo, hi }
    }

    fn compute_similarity_dimension(&self) -> f64 {
        let sum = |d: f64| self.maps.iter().map(|m| m.ratio.powf(d)).sum::<f64>() - 1.0;
        let (mut a, mut b) = (0.0, 1.0);
        while sum(b) > 0.0 {
            b *= 2.0;
        }
        while b - a > 1e-13 {
            let m = 0.5 * (a + b);
            if sum(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// `d` with `Σ r_i^d = 1`.
    pub fn similarity_dimension(&self) -> f64 {
        self.cache.dimension
    }

    pub fn cylinder(&self, word: &[usize]) -> Cylinder {
        let mut c = Cylinder::identity(self.dim());
        for &a in word {
            c = c.then(&self.maps[a]);
        }
        c
    }

    fn child(&self, c: &Cylinder, i: usize) -> Cylinder {
        c.then(&self.maps[i])
    }

    /// Words whose ratio product first drops to `≤ r`.
    pub fn words_at_scale(&self, r: f64, cap: usize) -> Result<Vec<Vec<usize>>> {
        if !(r > 0.0 && r < 1.0) {
            return arg(format!("scale must lie in (0,1), got {r}"));
        }
        let mut out = Vec::new();
        let mut stack: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
        while let Some((w, p)) = stack.pop() {
            for (i, m) in self.maps.iter().enumerate().rev() {
                let q = p * m.ratio;
                let mut wi = w.clone();
                wi.push(i);
                if q <= r {
                    out.push(wi);
                    if out.len() > cap {
                        return Err(Error::Truncation(format!(
                            "cut-set at scale {r} exceeds the cap of {cap} words"
                        )));
                    }
                } else {
                    stack.push((wi, q));
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Distance from `x` to the attractor within `tol`, by best-first cylinder refinement.
    pub fn distance(&self, x: &[f64], metric: Metric, tol: f64) -> f64 {
        self.search(x, metric, tol, None).0
    }

    /// True when `d(x, K) < delta`, resolved to within `tol` near the boundary.
    pub fn within(&self, x: &[f64], metric: Metric, delta: f64, tol: f64) -> bool {
        let (ub, _) = self.search(x, metric, tol, Some(delta));
        ub < delta
    }

    /// Returns `(upper, lower)` bounds. With a cutoff the search stops as soon
    /// as the comparison against it is decided.
    fn search(&self, x: &[f64], metric: Metric, tol: f64, cutoff: Option<f64>) -> (f64, f64) {
        struct Item {
            lb: f64,
            cyl: Cylinder,
        }
        impl PartialEq for Item {
            fn eq(&self, o: &Self) -> bool {
                self.lb == o.lb
            }
        }
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.lb.total_cmp(&self.lb)
            }
        }

        let (hc, rho) = (&self.cache.hull_center, self.cache.hull_radius);
        let anchor = &self.cache.anchor;
        let root = Cylinder::identity(self.dim());
        let mut ub = metric.dist(x, &root.apply(anchor));
        let lb0 = (metric.dist(x, &root.apply(hc)) - rho).max(0.0);
        let mut heap = BinaryHeap::new();
        heap.push(Item { lb: lb0, cyl: root });
        while let Some(Item { lb, cyl }) = heap.pop() {
            if let Some(c) = cutoff {
                if ub < c || lb >= c {
                    return (ub, lb);
                }
            }
            if lb >= ub - tol {
                return (ub, lb);
            }
            if 2.0 * cyl.ratio * rho < tol {
                continue;
            }
            for i in 0..self.maps.len() {
                let ch = self.child(&cyl, i);
                let d_ref = metric.dist(x, &ch.apply(anchor));
                ub = ub.min(d_ref);
                let clb = (metric.dist(x, &ch.apply(hc)) - ch.ratio * rho).max(0.0);
                if clb < ub - tol || cutoff.is_some_and(|c| clb < c) {
                    heap.push(Item { lb: clb, cyl: ch });
                }
            }
        }
        (ub, ub)
    }

    /// Random attractor points at depth `⌈log tol / log max r⌉`, descending only
    /// through cylinders whose hull meets `window`. Children are weighted by `r_i^d`.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, window: Option<&Window>, tol: f64, rng: &mut R) -> Vec<Point> {
        let depth = (tol.ln() / self.max_ratio().ln()).ceil().max(1.0) as usize;
        let d = self.similarity_dimension();
        let weights: Vec<f64> = self.maps.iter().map(|m| m.ratio.powf(d)).collect();
        let (hc, rho) = (self.cache.hull_center.clone(), self.cache.hull_radius);
        let mut out = Vec::with_capacity(k);
        let mut attempts = 0usize;
        while out.len() < k && attempts < 50 * k + 1000 {
            attempts += 1;
            let mut cyl = Cylinder::identity(self.dim());
            let mut dead = false;
            for _ in 0..depth {
                let mut cand: Vec<(usize, f64)> = Vec::with_capacity(self.maps.len());
                for (i, w) in weights.iter().enumerate() {
                    match window {
                        Some(win) => {
                            let ch = self.child(&cyl, i);
                            if win.sup_dist(&ch.apply(&hc)) <= ch.ratio * rho {
                                cand.push((i, *w));
                            }
                        }
                        None => cand.push((i, *w)),
                    }
                }
                if cand.is_empty() {
                    dead = true;
                    break;
                }
                let total: f64 = cand.iter().map(|c| c.1).sum();
                let mut u = rng.gen::<f64>() * total;
                let mut pick = cand[cand.len() - 1].0;
                for (i, w) in &cand {
                    if u < *w {
                        pick = *i;
                        break;
                    }
                    u -= w;
                }
                cyl = self.child(&cyl, pick);
            }
            if dead {
                continue;
            }
            let p = cyl.apply(&self.cache.anchor);
            if window.is_none_or(|w| w.contains(&p)) {
                out.push(p);
            }
        }
        out
    }

    /// Convex hull `[a, b]` of a one-dimensional attractor, by iterating the
    /// interval map from the fixed points (a monotone, contracting iteration).
    pub fn hull_1d(&self) -> Result<(f64, f64)> {
        if self.dim() != 1 {
            return Err(Error::Unsupported("interval hull needs a 1-D attractor".into()));
        }
        let b = self.bounding_box();
        Ok((b.lo[0], b.hi[0]))
    }

    /// Open intervals whose union is `Δ(K, δ)`, restricted to those meeting `(lo, hi)`.
    /// A cylinder is emitted once its diameter is at most `2δ`; its internal gaps
    /// are then shorter than `2δ`, so its neighbourhood is a single interval.
    pub fn neighbourhood_intervals_1d(&self, delta: f64, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
        let (a, b) = self.hull_1d()?;
        let mut out = Vec::new();
        let mut stack = vec![Cylinder::identity(1)];
        while let Some(c) = stack.pop() {
            let (pa, pb) = (c.apply(&[a])[0], c.apply(&[b])[0]);
            let (l, r) = (pa.min(pb), pa.max(pb));
            if r + delta <= lo || l - delta >= hi {
                continue;
            }
            if r - l <= 2.0 * delta {
                out.push((l - delta, r + delta));
                if out.len() > DEFAULT_WORD_CAP {
                    return Err(Error::Truncation("too many neighbourhood intervals".into()));
                }
            } else {
                for i in 0..self.maps.len() {
                    stack.push(self.child(&c, i));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn two_maps(r1: f64, r2: f64) -> Ifs {
        Ifs::from_ratios_translations(&[(r1, vec![0.0]), (r2, vec![1.0 - r2])]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(Ifs::from_ratios_translations(&[(0.5, vec![0.0])]).is_err());
        assert!(Ifs::from_ratios_translations(&[(1.0, vec![0.0]), (0.5, vec![0.5])]).is_err());
        let bad = Similarity::new(0.5, Some(vec![vec![2.0]]), vec![0.0]);
        assert!(Ifs::new(vec![bad.clone(), bad], false).is_err());
    }

    #[test]
    fn similarity_dimension_examples() {
        let d = Ifs::middle_third_cantor().similarity_dimension();
        assert!((d - 0.630_929_753_6).abs() < 1e-10);
        assert!((Ifs::sierpinski().similarity_dimension() - 1.584_962_500_7).abs() < 1e-10);
        assert!((two_maps(0.5, 0.5).similarity_dimension() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn words_examples() {
        let c = Ifs::middle_third_cantor();
        assert_eq!(c.words_at_scale(1.0 / 3.0, 100).unwrap(), vec![vec![0], vec![1]]);
        let w = c.words_at_scale(0.2, 100).unwrap();
        assert_eq!(w, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let q = two_maps(0.5, 0.25);
        let mut w = q.words_at_scale(0.25, 100).unwrap();
        w.sort();
        assert_eq!(w, vec![vec![0, 0], vec![0, 1], vec![1]]);
        assert!(c.words_at_scale(1.0, 10).is_err());
        assert!(matches!(c.words_at_scale(1e-6, 10), Err(Error::Truncation(_))));
    }

    #[test]
    fn cantor_distance_example() {
        let c = Ifs::middle_third_cantor();
        let d = c.distance(&[0.5], Metric::Sup, 1e-6);
        assert!((d - 1.0 / 6.0).abs() <= 1e-6, "{d}");
        assert!(c.distance(&[0.0], Metric::Sup, 1e-9) < 1e-9);
        assert!((c.distance(&[-0.25], Metric::Sup, 1e-9) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn hull_and_bbox() {
        let c = Ifs::middle_third_cantor();
        let (a, b) = c.hull_1d().unwrap();
        assert!(a.abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        let s = Ifs::sierpinski().bounding_box();
        assert!(s.lo[0].abs() < 1e-12 && (s.hi[0] - 1.0).abs() < 1e-12);
        assert!((s.hi[1] - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn intervals_cover_neighbourhood() {
        let c = Ifs::middle_third_cantor();
        let iv = c.neighbourhood_intervals_1d(0.05, -1.0, 2.0).unwrap();
        // every interval midpoint region lies within δ of K
        for (l, r) in iv {
            let m = 0.5 * (l + r);
            assert!(c.distance(&[m], Metric::Sup, 1e-9) < 0.05 + 1e-9);
        }
    }

    #[test]
    fn samples_lie_on_attractor() {
        let c = Ifs::middle_third_cantor();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts = c.sample(100, None, 1e-9, &mut rng);
        assert_eq!(pts.len(), 100);
        for p in pts {
            assert!(c.distance(&p, Metric::Sup, 1e-7) <= 1e-6);
        }
        let w = Window::new(vec![0.6], vec![0.8]).unwrap();
        let pts = c.sample(50, Some(&w), 1e-9, &mut rng);
        assert_eq!(pts.len(), 50);
        assert!(pts.iter().all(|p| w.contains(p)));
    }

    #[test]
    fn rotated_maps_compose() {
        // maps with a reflection still have the cantor set as attractor
        let m1 = Similarity::new(1.0 / 3.0, Some(vec![vec![-1.0]]), vec![1.0 / 3.0]);
        let m2 = Similarity::new(1.0 / 3.0, None, vec![2.0 / 3.0]);
        let ifs = Ifs::new(vec![m1, m2], true).unwrap();
        let d = ifs.distance(&[0.5], Metric::Sup, 1e-8);
        assert!((d - 1.0 / 6.0).abs() < 1e-7);
    }
}
