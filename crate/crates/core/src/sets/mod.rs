//! Set models `F` with distance queries, sampling and isometry actions.

mod ifs;
mod isometry;

pub use ifs::{Cylinder, Ifs, Similarity, DEFAULT_WORD_CAP};
pub use isometry::Isometry;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::geometry::{self, dot, sub, Metric, Point, Window};

pub const DEFAULT_SAMPLE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum SetModel {
    Points {
        points: Vec<Point>,
    },
    /// `base + span(basis)`, orthonormal basis with fewer vectors than the dimension.
    Plane {
        base: Point,
        basis: Vec<Point>,
    },
    Circle {
        center: Point,
        radius: f64,
    },
    /// The sphere `{y : |y − center|₂ = radius}` in any dimension ≥ 2.
    Sphere {
        center: Point,
        radius: f64,
    },
    Polyline {
        vertices: Vec<Point>,
    },
    Ifs(Ifs),
}

impl SetModel {
    pub fn points(points: Vec<Point>) -> Result<Self> {
        let m = SetModel::Points { points };
        m.validate()?;
        Ok(m)
    }

    pub fn point(p: Point) -> Self {
        SetModel::Points { points: vec![p] }
    }

    pub fn plane(base: Point, basis: Vec<Point>) -> Result<Self> {
        let m = SetModel::Plane { base, basis };
        m.validate()?;
        Ok(m)
    }

    /// The first coordinate axis of `ℝ^n`.
    pub fn axis_line(n: usize) -> Self {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        SetModel::Plane {
            base: vec![0.0; n],
            basis: vec![e],
        }
    }

    pub fn circle(center: Point, radius: f64) -> Result<Self> {
        let m = SetModel::Circle { center, radius };
        m.validate()?;
        Ok(m)
    }

    pub fn sphere(center: Point, radius: f64) -> Result<Self> {
        let m = SetModel::Sphere { center, radius };
        m.validate()?;
        Ok(m)
    }

    pub fn polyline(vertices: Vec<Point>) -> Result<Self> {
        let m = SetModel::Polyline { vertices };
        m.validate()?;
        Ok(m)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: SetModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |p: &Point| p.iter().all(|v| v.is_finite());
        match self {
            SetModel::Points { points } => {
                if points.is_empty() {
                    return arg("point set must be non-empty");
                }
                let n = points[0].len();
                if n == 0 || points.iter().any(|p| p.len() != n || !finite(p)) {
                    return arg("points must be finite and share a positive dimension");
                }
            }
            SetModel::Plane { base, basis } => {
                let n = base.len();
                if n == 0 || !finite(base) {
                    return arg("plane base must be a finite non-empty vector");
                }
                if basis.is_empty() || basis.len() >= n {
                    return arg("plane needs 1 ≤ l < n basis vectors");
                }
                for (i, u) in basis.iter().enumerate() {
                    if u.len() != n {
                        return arg("plane basis vectors must match the ambient dimension");
                    }
                    for (k, v) in basis.iter().enumerate() {
                        let target = if i == k { 1.0 } else { 0.0 };
                        if (dot(u, v) - target).abs() > 1e-12 {
                            return arg("plane basis is not orthonormal to 1e-12");
                        }
                    }
                }
            }
            SetModel::Circle { center, radius } => {
                if center.len() != 2 || !finite(center) {
                    return arg("circle center must be a finite 2-vector");
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return arg("circle radius must be positive");
                }
            }
            SetModel::Sphere { center, radius } => {
                if center.len() < 2 || !finite(center) {
                    return arg("sphere center must be a finite vector of dimension ≥ 2");
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return arg("sphere radius must be positive");
                }
            }
            SetModel::Polyline { vertices } => {
                if vertices.len() < 2 {
                    return arg("polyline needs at least two vertices");
                }
                let n = vertices[0].len();
                if n == 0 || vertices.iter().any(|p| p.len() != n || !finite(p)) {
                    return arg("polyline vertices must be finite and share a dimension");
                }
            }
            SetModel::Ifs(_) => {}
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            SetModel::Points { points } => points[0].len(),
            SetModel::Plane { base, .. } => base.len(),
            SetModel::Circle { .. } => 2,
            SetModel::Sphere { center, .. } => center.len(),
            SetModel::Polyline { vertices } => vertices[0].len(),
            SetModel::Ifs(i) => i.dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SetModel::Points { .. } => "points",
            SetModel::Plane { .. } => "plane",
            SetModel::Circle { .. } => "circle",
            SetModel::Sphere { .. } => "sphere",
            SetModel::Polyline { .. } => "polyline",
            SetModel::Ifs(_) => "ifs",
        }
    }

    /// A point guaranteed to lie on the set.
    pub fn anchor(&self) -> Point {
        match self {
            SetModel::Points { points } => points[0].clone(),
            SetModel::Plane { base, .. } => base.clone(),
            SetModel::Circle { center, radius } | SetModel::Sphere { center, radius } => {
                let mut p = center.clone();
                p[0] += radius;
                p
            }
            SetModel::Polyline { vertices } => vertices[0].clone(),
            SetModel::Ifs(i) => i.anchor().to_vec(),
        }
    }

    /// Axis-aligned box containing the set; `None` for unbounded planes.
    pub fn bounding_box(&self) -> Option<Window> {
        let from_points = |pts: &[Point]| {
            let n = pts[0].len();
            let mut lo = vec![f64::INFINITY; n];
            let mut hi = vec![f64::NEG_INFINITY; n];
            for p in pts {
                for i in 0..n {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
            Window { lo, hi }
        };
        match self {
            SetModel::Points { points } => Some(from_points(points)),
            SetModel::Plane { .. } => None,
            SetModel::Circle { center, radius } | SetModel::Sphere { center, radius } => Some(Window {
                lo: center.iter().map(|c| c - radius).collect(),
                hi: center.iter().map(|c| c + radius).collect(),
            }),
            SetModel::Polyline { vertices } => Some(from_points(vertices)),
            SetModel::Ifs(i) => Some(i.bounding_box()),
        }
    }

    /// True when the exact interval path applies (ambient dimension 1, points or attractor).
    pub fn supports_exact_1d(&self) -> bool {
        self.ambient_dim() == 1 && matches!(self, SetModel::Points { .. } | SetModel::Ifs(_))
    }

    /// Open intervals whose union is `Δ(F, δ)` near `(lo, hi)` (1-D models only).
    pub fn neighbourhood_intervals_1d(&self, delta: f64, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
        match self {
            SetModel::Points { points } if self.ambient_dim() == 1 => Ok(points
                .iter()
                .map(|p| (p[0] - delta, p[0] + delta))
                .filter(|(a, b)| *b > lo && *a < hi)
                .collect()),
            SetModel::Ifs(i) if i.dim() == 1 => i.neighbourhood_intervals_1d(delta, lo, hi),
            _ => Err(Error::Unsupported(format!(
                "exact interval path not available for {} in dimension {}",
                self.kind_name(),
                self.ambient_dim()
            ))),
        }
    }
}

fn check_dim(m: &SetModel, x: &[f64]) -> Result<()> {
    if x.len() != m.ambient_dim() {
        return arg(format!(
            "point has dimension {} but the model lives in dimension {}",
            x.len(),
            m.ambient_dim()
        ));
    }
    Ok(())
}

/// `d(x, F)`. Exact for every variant but attractors, which are resolved to `tol`.
/// Under the torus metric the model is read as living in `ℝ^n` and the query is
/// minimised over the neighbouring lattice translates of `x mod 1`; this is exact
/// for sets inside a unit cell (up to a margin of ½) and for axis-aligned planes.
pub fn distance_to_set(m: &SetModel, x: &[f64], metric: Metric, tol: f64) -> Result<f64> {
    check_dim(m, x)?;
    if !(tol > 0.0) {
        return arg("distance tolerance must be positive");
    }
    Ok(match metric {
        Metric::TorusSup => {
            let n = x.len();
            let base: Point = x.iter().map(|v| v.rem_euclid(1.0)).collect();
            let mut best = f64::INFINITY;
            let mut shifted = base.clone();
            for code in 0..3usize.pow(n as u32) {
                let mut c = code;
                for i in 0..n {
                    shifted[i] = base[i] + (c % 3) as f64 - 1.0;
                    c /= 3;
                }
                best = best.min(raw_distance(m, &shifted, Metric::Sup, tol));
            }
            best
        }
        _ => raw_distance(m, x, metric, tol),
    })
}

/// Membership in the open neighbourhood `Δ(F, δ)`.
pub fn in_neighbourhood(m: &SetModel, x: &[f64], delta: f64, metric: Metric, tol: f64) -> bool {
    match (m, metric) {
        (SetModel::Ifs(i), Metric::Sup | Metric::Euclidean) => i.within(x, metric, delta, tol),
        (SetModel::Points { points }, _) => points.iter().any(|p| metric.dist(p, x) < delta),
        _ => distance_to_set(m, x, metric, tol).is_ok_and(|d| d < delta),
    }
}

fn raw_distance(m: &SetModel, x: &[f64], metric: Metric, tol: f64) -> f64 {
    match m {
        SetModel::Points { points } => points.iter().map(|p| metric.dist(p, x)).fold(f64::INFINITY, f64::min),
        SetModel::Plane { base, basis } => {
            let a = sub(x, base);
            match metric {
                Metric::Euclidean => {
                    let mut r = a.clone();
                    for u in basis {
                        let t = dot(&a, u);
                        for (ri, ui) in r.iter_mut().zip(u) {
                            *ri -= t * ui;
                        }
                    }
                    dot(&r, &r).sqrt()
                }
                _ => chebyshev_plane(&a, basis),
            }
        }
        SetModel::Circle { center, radius } | SetModel::Sphere { center, radius } => match metric {
            Metric::Euclidean => (Metric::Euclidean.dist(x, center) - radius).abs(),
            _ => sup_distance_to_sphere(x, center, *radius),
        },
        SetModel::Polyline { vertices } => vertices
            .windows(2)
            .map(|w| segment_distance(x, &w[0], &w[1], metric))
            .fold(f64::INFINITY, f64::min),
        SetModel::Ifs(i) => i.distance(x, metric, tol),
    }
}

/// `min_t ‖a − Σ t_k u_k‖_∞`, by enumerating the vertices of the equivalent
/// linear program: an optimum with positive value has `l + 1` rows active,
/// each with a definite sign.
fn chebyshev_plane(a: &[f64], basis: &[Point]) -> f64 {
    let n = a.len();
    let l = basis.len();
    let resid = |t: &[f64]| -> f64 {
        (0..n)
            .map(|i| (a[i] - (0..l).map(|k| t[k] * basis[k][i]).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    };
    // orthogonal projection handles the zero-residual case
    let proj: Vec<f64> = basis.iter().map(|u| dot(a, u)).collect();
    let mut best = resid(&proj);
    let mut rows: Vec<usize> = (0..=l).collect();
    loop {
        for signs in 0..(1usize << (l + 1)) {
            let mat: Vec<Vec<f64>> = rows
                .iter()
                .enumerate()
                .map(|(q, &i)| {
                    let mut row: Vec<f64> = (0..l).map(|k| basis[k][i]).collect();
                    row.push(if signs >> q & 1 == 1 { -1.0 } else { 1.0 });
                    row
                })
                .collect();
            let rhs: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
            if let Some(sol) = geometry::solve(mat, rhs) {
                best = best.min(resid(&sol[..l]));
            }
        }
        // next combination of l+1 rows out of n
        let k = l + 1;
        let mut i = k;
        while i > 0 && rows[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        rows[i - 1] += 1;
        for j in i..k {
            rows[j] = rows[j - 1] + 1;
        }
    }
    best
}

/// Sup-norm distance from `x` to the Euclidean sphere `S(c, R)`: the smallest
/// `r` for which the cube `Q(x, r)` meets the sphere, i.e. its nearest point
/// is inside and its farthest point is outside.
fn sup_distance_to_sphere(x: &[f64], c: &[f64], radius: f64) -> f64 {
    let n = x.len() as f64;
    let u: Vec<f64> = x.iter().zip(c).map(|(a, b)| (a - b).abs()).collect();
    let norm2: f64 = u.iter().map(|v| v * v).sum();
    if norm2 < radius * radius {
        // farthest cube point must reach the sphere: Σ (u_i + r)² = R²
        let s1: f64 = u.iter().sum();
        let disc = s1 * s1 - n * (norm2 - radius * radius);
        return ((-s1 + disc.sqrt()) / n).max(0.0);
    }
    // nearest cube point must reach the sphere: Σ_{u_i > r} (u_i − r)² = R²
    let mut s: Vec<f64> = u.clone();
    s.sort_by(|a, b| b.total_cmp(a));
    let (mut s1, mut s2) = (0.0, 0.0);
    for k in 1..=s.len() {
        s1 += s[k - 1];
        s2 += s[k - 1] * s[k - 1];
        let kf = k as f64;
        let disc = s1 * s1 - kf * (s2 - radius * radius);
        if disc < 0.0 {
            continue;
        }
        let r = (s1 - disc.sqrt()) / kf;
        let lower = if k < s.len() { s[k] } else { 0.0 };
        if r >= lower - 1e-15 && r <= s[k - 1] + 1e-15 {
            return r.max(0.0);
        }
    }
    0.0
}

fn segment_distance(x: &[f64], p: &[f64], q: &[f64], metric: Metric) -> f64 {
    let b = sub(q, p);
    let a = sub(x, p);
    match metric {
        Metric::Euclidean => {
            let bb = dot(&b, &b);
            let t = if bb > 0.0 {
                (dot(&a, &b) / bb).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let r: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| ai - t * bi).collect();
            dot(&r, &r).sqrt()
        }
        _ => {
            // convex piecewise-linear in t: minimum sits at a breakpoint or an end
            let n = a.len();
            let eval = |t: f64| (0..n).map(|i| (a[i] - t * b[i]).abs()).fold(0.0, f64::max);
            let mut best = eval(0.0).min(eval(1.0));
            let mut consider = |t: f64| {
                if t.is_finite() && t > 0.0 && t < 1.0 {
                    best = best.min(eval(t));
                }
            };
            for i in 0..n {
                if b[i] != 0.0 {
                    consider(a[i] / b[i]);
                }
                for k in i + 1..n {
                    if b[i] != b[k] {
                        consider((a[i] - a[k]) / (b[i] - b[k]));
                    }
                    if b[i] != -b[k] {
                        consider((a[i] + a[k]) / (b[i] + b[k]));
                    }
                }
            }
            best
        }
    }
}

/// Options for [`sample_on_set`].
#[derive(Clone, Debug)]
pub struct SampleOptions {
    /// Restricts samples to this box; required for planes.
    pub window: Option<Window>,
    pub tol: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            window: None,
            tol: DEFAULT_SAMPLE_TOL,
        }
    }
}

/// Up to `k` points on `F`. Fewer are returned only when a window leaves too
/// little of the set to find `k` samples within the attempt budget.
pub fn sample_on_set<R: Rng + ?Sized>(m: &SetModel, k: usize, opts: &SampleOptions, rng: &mut R) -> Result<Vec<Point>> {
    if k == 0 {
        return arg("sample count must be at least 1");
    }
    let win = opts.window.as_ref();
    if let Some(w) = win {
        if w.dim() != m.ambient_dim() {
            return arg("sampling window dimension mismatch");
        }
    }
    let budget = 200 * k + 1000;
    let keep = |p: &Point| win.is_none_or(|w| w.contains(p));
    Ok(match m {
        SetModel::Points { points } => {
            let pool: Vec<&Point> = points.iter().filter(|p| keep(p)).collect();
            if pool.is_empty() {
                return Ok(Vec::new());
            }
            (0..k).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
        }
        SetModel::Plane { base, basis } => {
            let Some(w) = win else {
                return arg("sampling a plane requires a bounding window");
            };
            sample_plane(base, basis, w, k, budget, rng)
        }
        SetModel::Circle { center, radius } => {
            let mut out = Vec::with_capacity(k);
            for _ in 0..budget {
                if out.len() == k {
                    break;
                }
                let th = rng.gen::<f64>() * std::f64::consts::TAU;
                let p = vec![center[0] + radius * th.cos(), center[1] + radius * th.sin()];
                if keep(&p) {
                    out.push(p);
                }
            }
            out
        }
        SetModel::Sphere { center, radius } => {
            let mut out = Vec::with_capacity(k);
            for _ in 0..budget {
                if out.len() == k {
                    break;
                }
                let v: Vec<f64> = (0..center.len()).map(|_| rng.sample(StandardNormal)).collect();
                let len = dot(&v, &v).sqrt();
                if len < 1e-12 {
                    continue;
                }
                let p: Point = center.iter().zip(&v).map(|(c, x)| c + radius * x / len).collect();
                if keep(&p) {
                    out.push(p);
                }
            }
            out
        }
        SetModel::Polyline { vertices } => {
            // clip each segment to the window, then sample by length
            let mut pieces: Vec<(Point, Point, f64)> = Vec::new();
            for s in vertices.windows(2) {
                let (t0, t1) = match win {
                    Some(w) => match clip_segment(&s[0], &s[1], w) {
                        Some(t) => t,
                        None => continue,
                    },
                    None => (0.0, 1.0),
                };
                let d = sub(&s[1], &s[0]);
                let a: Point = s[0].iter().zip(&d).map(|(p, v)| p + t0 * v).collect();
                let b: Point = s[0].iter().zip(&d).map(|(p, v)| p + t1 * v).collect();
                let len = Metric::Euclidean.dist(&a, &b);
                if len > 0.0 {
                    pieces.push((a, b, len));
                }
            }
            let total: f64 = pieces.iter().map(|p| p.2).sum();
            if pieces.is_empty() {
                return Ok(Vec::new());
            }
            (0..k)
                .map(|_| {
                    let mut u = rng.gen::<f64>() * total;
                    let mut idx = pieces.len() - 1;
                    for (i, p) in pieces.iter().enumerate() {
                        if u < p.2 {
                            idx = i;
                            break;
                        }
                        u -= p.2;
                    }
                    let (a, b, len) = &pieces[idx];
                    let t = (u / len).clamp(0.0, 1.0);
                    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
                })
                .collect()
        }
        SetModel::Ifs(i) => i.sample(k, win, opts.tol, rng),
    })
}

/// Parameter range `[t0, t1] ⊂ [0, 1]` of the segment `p + t(q − p)` inside `w`.
fn clip_segment(p: &[f64], q: &[f64], w: &Window) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for i in 0..p.len() {
        let d = q[i] - p[i];
        if d == 0.0 {
            if p[i] < w.lo[i] || p[i] > w.hi[i] {
                return None;
            }
        } else {
            let (a, b) = ((w.lo[i] - p[i]) / d, (w.hi[i] - p[i]) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t0 < t1).then_some((t0, t1))
}

fn sample_plane<R: Rng + ?Sized>(
    base: &[f64],
    basis: &[Point],
    w: &Window,
    k: usize,
    budget: usize,
    rng: &mut R,
) -> Vec<Point> {
    let n = base.len();
    let at = |t: &[f64]| -> Point {
        (0..n)
            .map(|i| base[i] + basis.iter().zip(t).map(|(u, ti)| ti * u[i]).sum::<f64>())
            .collect()
    };
    // parameter box covering the window's preimage
    let l = basis.len();
    let mut tlo = vec![0.0; l];
    let mut thi = vec![0.0; l];
    for k2 in 0..l {
        for i in 0..n {
            let u = basis[k2][i];
            let (a, b) = ((w.lo[i] - base[i]) * u, (w.hi[i] - base[i]) * u);
            tlo[k2] += a.min(b);
            thi[k2] += a.max(b);
        }
    }
    if l == 1 {
        // exact interval of the line inside the window
        let u = &basis[0];
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            if u[i] == 0.0 {
                if base[i] < w.lo[i] || base[i] > w.hi[i] {
                    return Vec::new();
                }
            } else {
                let (a, b) = ((w.lo[i] - base[i]) / u[i], (w.hi[i] - base[i]) / u[i]);
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        if !(t0 < t1) {
            return Vec::new();
        }
        return (0..k).map(|_| at(&[t0 + (t1 - t0) * rng.gen::<f64>()])).collect();
    }
    let mut out = Vec::with_capacity(k);
    for _ in 0..budget {
        if out.len() == k {
            break;
        }
        let t: Vec<f64> = (0..l).map(|q| tlo[q] + (thi[q] - tlo[q]) * rng.gen::<f64>()).collect();
        let p = at(&t);
        if w.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// `I_r` for an attractor.
pub fn words_at_scale(ifs: &Ifs, r: f64) -> Result<Vec<Vec<usize>>> {
    ifs.words_at_scale(r, DEFAULT_WORD_CAP)
}

pub fn similarity_dimension(ifs: &Ifs) -> f64 {
    ifs.similarity_dimension()
}

fn is_axis_aligned(basis: &[Point]) -> bool {
    basis.iter().all(|u| u.iter().filter(|v| **v != 0.0).count() == 1)
}

/// Image of `m` under `iso`. With `wrap`, the image is additionally shifted by
/// an integer vector so that its anchor lies in the unit cell; torus distances
/// are unaffected by such shifts.
pub fn transform_model(m: &SetModel, iso: &Isometry) -> Result<SetModel> {
    iso.validate()?;
    let n = m.ambient_dim();
    if iso.dim() != n {
        return arg(format!(
            "isometry dimension {} does not match model dimension {n}",
            iso.dim()
        ));
    }
    let moved = match m {
        // each point reduces independently on the torus
        SetModel::Points { points } => SetModel::Points {
            points: points.iter().map(|p| iso.apply(p)).collect(),
        },
        SetModel::Plane { base, basis } => {
            let basis: Vec<Point> = basis.iter().map(|u| iso.rotate(u)).collect();
            if iso.wrap && iso.has_rotation() && !is_axis_aligned(&basis) {
                return Err(Error::Unsupported(
                    "wrapped rotation must keep a plane axis-aligned".into(),
                ));
            }
            SetModel::Plane {
                base: iso.apply_unwrapped(base),
                basis,
            }
        }
        SetModel::Circle { center, radius } => SetModel::Circle {
            center: iso.apply_unwrapped(center),
            radius: *radius,
        },
        SetModel::Sphere { center, radius } => SetModel::Sphere {
            center: iso.apply_unwrapped(center),
            radius: *radius,
        },
        SetModel::Polyline { vertices } => SetModel::Polyline {
            vertices: vertices.iter().map(|p| iso.apply_unwrapped(p)).collect(),
        },
        SetModel::Ifs(ifs) => SetModel::Ifs(conjugate(ifs, iso)?),
    };
    if iso.wrap {
        let a = moved.anchor();
        let shift: Point = a.iter().map(|v| -v.div_euclid(1.0)).collect();
        if shift.iter().any(|v| *v != 0.0) {
            return transform_model(&moved, &Isometry::translation(shift));
        }
    }
    Ok(moved)
}

/// `T ∘ φ_i ∘ T⁻¹` for each map, whose attractor is `T(K)`.
fn conjugate(ifs: &Ifs, iso: &Isometry) -> Result<Ifs> {
    let q = iso.rotation.clone().unwrap_or_else(|| geometry::identity(iso.dim()));
    let qt = geometry::transpose(&q);
    let b = &iso.translation;
    let maps = ifs
        .maps()
        .iter()
        .map(|m| {
            let o = m.orthogonal.clone().unwrap_or_else(|| geometry::identity(iso.dim()));
            let o2 = geometry::mat_mul(&geometry::mat_mul(&q, &o), &qt);
            // ψ(y) = r Q O Qᵀ y + (Q t + b − r Q O Qᵀ b)
            let qtb = geometry::mat_vec(&q, &m.translation);
            let ob = geometry::mat_vec(&o2, b);
            let t: Point = (0..b.len()).map(|i| qtb[i] + b[i] - m.ratio * ob[i]).collect();
            let orth = if geometry::is_identity(&o2) { None } else { Some(o2) };
            Similarity::new(m.ratio, orth, t)
        })
        .collect();
    Ifs::new(maps, ifs.osc_declared())
}
