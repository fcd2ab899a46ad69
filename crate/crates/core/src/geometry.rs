//! Norms, balls, boxes and the small dense linear algebra the models need.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

pub type Point = Vec<f64>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Euclidean,
    #[default]
    Sup,
    /// Per-coordinate wrapped sup-norm on the flat torus `[0,1)^n`.
    TorusSup,
}

#[inline]
fn wrap_diff(d: f64) -> f64 {
    let a = d.abs().rem_euclid(1.0);
    a.min(1.0 - a)
}

impl Metric {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Metric::Sup => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Metric::TorusSup => v.iter().fold(0.0, |m, &x| m.max(wrap_diff(x))),
        }
    }

    pub fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Sup => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
            Metric::TorusSup => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max(wrap_diff(x - y))),
        }
    }

    /// Lebesgue volume of an open ball of radius `r` in dimension `n`.
    pub fn ball_volume(self, n: usize, r: f64) -> f64 {
        match self {
            Metric::Euclidean => unit_euclidean_ball_volume(n) * r.powi(n as i32),
            Metric::Sup | Metric::TorusSup => (2.0 * r).powi(n as i32),
        }
    }

    /// Uniform point in the open ball `B(c, r)`.
    pub fn sample_ball<R: Rng + ?Sized>(self, c: &[f64], r: f64, rng: &mut R) -> Point {
        match self {
            Metric::Euclidean => {
                let n = c.len();
                let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let len = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let scale = r * rng.gen::<f64>().powf(1.0 / n as f64) / len;
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi = ci + *vi * scale;
                }
                v
            }
            Metric::Sup | Metric::TorusSup => c.iter().map(|ci| ci + r * (2.0 * rng.gen::<f64>() - 1.0)).collect(),
        }
    }
}

pub fn unit_euclidean_ball_volume(n: usize) -> f64 {
    // V_n = 2π/n · V_{n-2}
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_euclidean_ball_volume(n - 2),
    }
}

/// Open ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return arg(format!("ball radius must be positive and finite, got {radius}"));
        }
        if center.iter().any(|x| !x.is_finite()) {
            return arg("ball center must be finite");
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn dilate(&self, alpha: f64) -> Ball {
        Ball {
            center: self.center.clone(),
            radius: self.radius * alpha,
        }
    }

    pub fn contains_point(&self, x: &[f64], metric: Metric) -> bool {
        metric.dist(&self.center, x) < self.radius
    }

    /// Open balls are disjoint iff the centre distance is at least the radius sum.
    pub fn disjoint(&self, other: &Ball, metric: Metric) -> bool {
        metric.dist(&self.center, &other.center) >= self.radius + other.radius
    }

    pub fn intersects(&self, other: &Ball, metric: Metric) -> bool {
        !self.disjoint(other, metric)
    }

    /// `inner ⊂ self` for open balls in a normed space.
    pub fn contains_ball(&self, inner: &Ball, metric: Metric) -> bool {
        metric.dist(&self.center, &inner.center) + inner.radius <= self.radius
    }

    pub fn volume(&self, metric: Metric) -> f64 {
        metric.ball_volume(self.dim(), self.radius)
    }

    pub fn bounding_box(&self) -> Window {
        Window {
            lo: self.center.iter().map(|c| c - self.radius).collect(),
            hi: self.center.iter().map(|c| c + self.radius).collect(),
        }
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
}

impl Window {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return arg("window corners must have equal, non-zero dimension");
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return arg("window requires lo < hi in every coordinate");
        }
        Ok(Window { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn expand(&self, d: f64) -> Window {
        Window {
            lo: self.lo.iter().map(|x| x - d).collect(),
            hi: self.hi.iter().map(|x| x + d).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + (b - a) * rng.gen::<f64>())
            .collect()
    }

    /// Sup-distance from the window to a point (0 inside).
    pub fn sup_dist(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .fold(0.0, |m, (v, (a, b))| m.max(a - v).max(v - b))
    }

    pub fn union(&self, other: &Window) -> Window {
        Window {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }
}

// ---- small dense linear algebra -------------------------------------------

pub type Matrix = Vec<Vec<f64>>;

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn mat_vec(m: &Matrix, v: &[f64]) -> Point {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..n)
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

pub fn transpose(m: &Matrix) -> Matrix {
    let n = m.first().map_or(0, |r| r.len());
    (0..n).map(|j| m.iter().map(|row| row[j]).collect()).collect()
}

pub fn is_square(m: &Matrix, n: usize) -> bool {
    m.len() == n && m.iter().all(|r| r.len() == n)
}

/// Max-entry deviation of `MᵀM` from the identity.
pub fn orthogonality_defect(m: &Matrix) -> f64 {
    let n = m.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = (0..n).map(|k| m[k][i] * m[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

pub fn is_identity(m: &Matrix) -> bool {
    m.iter().enumerate().all(|(i, row)| {
        row.iter()
            .enumerate()
            .all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 })
    })
}

/// True if every row and column has exactly one non-zero entry equal to ±1.
pub fn is_signed_permutation(m: &Matrix) -> bool {
    let n = m.len();
    let mut col_used = vec![false; n];
    for row in m {
        let nz: Vec<usize> = (0..n).filter(|&j| row[j] != 0.0).collect();
        if nz.len() != 1 || row[nz[0]].abs() != 1.0 || col_used[nz[0]] {
            return false;
        }
        col_used[nz[0]] = true;
    }
    true
}

/// Gaussian elimination with partial pivoting. `None` when singular.
pub fn solve(mut a: Matrix, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                let (top, rest) = a.split_at_mut(row);
                for (x, p) in rest[0][col..].iter_mut().zip(&top[col][col..]) {
                    *x -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn scale(a: &[f64], s: f64) -> Point {
    a.iter().map(|x| x * s).collect()
}

/// Uniform random rotation (Haar measure on SO(n)) via Gram–Schmidt on a Gaussian matrix.
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
    loop {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut ok = true;
        for _ in 0..n {
            let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            for c in &cols {
                let d = dot(&v, c);
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= d * ci;
                }
            }
            let len = dot(&v, &v).sqrt();
            if len < 1e-8 {
                ok = false;
                break;
            }
            cols.push(scale(&v, 1.0 / len));
        }
        if !ok {
            continue;
        }
        let mut m = transpose(&cols);
        if determinant(&m) < 0.0 {
            for row in m.iter_mut() {
                row[0] = -row[0];
            }
        }
        return m;
    }
}

pub fn determinant(m: &Matrix) -> f64 {
    let n = m.len();
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let Some(piv) = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())) else {
            return 0.0;
        };
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, rest) = a.split_at_mut(row);
            for (x, p) in rest[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
        }
    }
    det
}

/// Log-spaced grid of `k` points over `[a, b]`.
pub fn logspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..k)
        .map(|i| (la + (lb - la) * i as f64 / (k - 1) as f64).exp())
        .collect()
}
