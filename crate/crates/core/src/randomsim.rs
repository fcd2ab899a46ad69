//! Random limsup sets on the flat torus `[0,1)^n`: per-stage random
//! isometries, hit frequencies and covering exponents of tail unions.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::SetSequence;
use crate::error::{arg, Error, Result};
use crate::geometry::{Metric, Point, Window};
use crate::measure::{FitPoint, ScalingFit};
use crate::regression::line_fit;
use crate::rng::{self, stream};
use crate::sets::{distance_to_set, sample_on_set, transform_model, Isometry, SampleOptions, SetModel};

const TORUS: Metric = Metric::TorusSup;
const DIST_TOL: f64 = 1e-12;

fn d_tol_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomScheme {
    /// Base models `F_j`.
    pub sets: SetSequence,
    pub tau: f64,
    /// Gauge exponent; defaults to the ambient dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    pub kappa: f64,
    pub master_seed: u64,
    /// Adds a uniform signed permutation to every isometry.
    #[serde(default)]
    pub rotate: bool,
    /// Points sampled per stage when a model has no exact box rasterisation.
    #[serde(default = "d_tol_samples")]
    pub fallback_samples: usize,
}

impl RandomScheme {
    pub fn new(sets: SetSequence, tau: f64, kappa: f64, master_seed: u64) -> Result<Self> {
        let s = RandomScheme {
            sets,
            tau,
            s: None,
            kappa,
            master_seed,
            rotate: false,
            fallback_samples: d_tol_samples(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.sets.dim()
    }

    pub fn s(&self) -> f64 {
        self.s.unwrap_or(self.dim() as f64)
    }

    pub fn validate(&self) -> Result<()> {
        self.sets.validate()?;
        if !(0.0..1.0).contains(&self.kappa) {
            return arg("kappa must lie in [0, 1)");
        }
        let s = self.s();
        if !(s > 0.0 && s.is_finite()) {
            return arg("s must be positive");
        }
        if !(self.tau.is_finite() && self.tau > 1.0 / (s - self.kappa * s)) {
            return arg(format!("tau must exceed 1/(s − κs) = {}", 1.0 / (s - self.kappa * s)));
        }
        if self.fallback_samples == 0 {
            return arg("fallback_samples must be positive");
        }
        Ok(())
    }

    /// `κs + 1/τ`.
    pub fn predicted_exponent(&self) -> f64 {
        self.kappa * self.s() + 1.0 / self.tau
    }

    /// `Υ_j = j^{−τ}`.
    pub fn radius(&self, j: usize) -> f64 {
        (j as f64).powf(-self.tau)
    }

    /// `φ_j(F_j)` on the torus.
    pub fn stage_model(&self, j: usize) -> Result<SetModel> {
        transform_model(&self.sets.at(j), &draw_isometry(self, j))
    }
}

fn random_isometry<R: Rng + ?Sized>(n: usize, rotate: bool, rng: &mut R) -> Isometry {
    let translation: Point = (0..n).map(|_| rng.gen::<f64>()).collect();
    let rotation = rotate.then(|| {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mut m = vec![vec![0.0; n]; n];
        for (i, &p) in perm.iter().enumerate() {
            m[i][p] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        m
    });
    Isometry {
        rotation,
        translation,
        wrap: true,
    }
}

/// Stage-`j` isometry, a pure function of `(master_seed, j)`.
pub fn draw_isometry(scheme: &RandomScheme, j: usize) -> Isometry {
    let mut g = stream(scheme.master_seed, &[j as u64]);
    random_isometry(scheme.dim(), scheme.rotate, &mut g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RadiusMode {
    /// `j^{−τ}`.
    Paper,
    /// `j^{τ(κs − t)/(s − κs)}`.
    Transformed { t: f64 },
    /// `c · j^{−p}`.
    Power { c: f64, p: f64 },
}

impl RadiusMode {
    pub fn radius(&self, scheme: &RandomScheme, j: usize) -> f64 {
        let jf = j as f64;
        match *self {
            RadiusMode::Paper => scheme.radius(j),
            RadiusMode::Transformed { t } => {
                let (s, k) = (scheme.s(), scheme.kappa);
                jf.powf(scheme.tau * (k * s - t) / (s - k * s))
            }
            RadiusMode::Power { c, p } => c * jf.powf(-p),
        }
    }
}

/// Stages `j ∈ [J, N]` whose neighbourhood `Δ(φ_j(F_j), radius_j)` contains `x`.
pub fn hit_indices(scheme: &RandomScheme, x: &[f64], radii: RadiusMode, lo: usize, hi: usize) -> Result<Vec<usize>> {
    scheme.validate()?;
    if lo == 0 || lo > hi {
        return arg("need 1 ≤ J ≤ N");
    }
    if x.len() != scheme.dim() {
        return arg("point dimension does not match the scheme");
    }
    let hits: Vec<Option<usize>> = (lo..=hi)
        .into_par_iter()
        .map(|j| -> Result<Option<usize>> {
            let m = scheme.stage_model(j)?;
            let d = distance_to_set(&m, x, TORUS, DIST_TOL)?;
            Ok((d < radii.radius(scheme, j)).then_some(j))
        })
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().flatten().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesClass {
    Divergent,
    Convergent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub j: usize,
    pub p_hat: f64,
    pub stderr: f64,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub rows: Vec<FrequencyRow>,
    /// Slope of the partial sums against `ln N` over `[√N, N]`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub threshold: f64,
    pub classification: SeriesClass,
    pub trials: usize,
}

/// Slope of partial sums vs `ln N` above which the series is called divergent.
pub const DIVERGENCE_SLOPE: f64 = 0.05;

/// Per-stage empirical hit probabilities of `x` over independent re-draws of
/// the isometries, with a Borel–Cantelli divergence diagnostic.
pub fn coverage_frequency<R: Rng + ?Sized>(
    scheme: &RandomScheme,
    x: &[f64],
    radii: RadiusMode,
    lo: usize,
    hi: usize,
    trials: usize,
    rng: &mut R,
) -> Result<FrequencyReport> {
    scheme.validate()?;
    if trials < 1000 {
        return arg("coverage_frequency needs at least 1000 trials");
    }
    if lo == 0 || lo > hi {
        return arg("need 1 ≤ J ≤ N");
    }
    if hi - lo < 16 {
        return arg("need at least 17 stages for the divergence diagnostic");
    }
    if x.len() != scheme.dim() {
        return arg("point dimension does not match the scheme");
    }
    let master = rng::fork(rng);
    let n = scheme.dim();
    let probs: Vec<(f64, f64)> = (lo..=hi)
        .into_par_iter()
        .map(|j| -> Result<(f64, f64)> {
            let base = scheme.sets.at(j);
            let r = radii.radius(scheme, j);
            let mut g = stream(master, &[j as u64]);
            let mut hits = 0usize;
            for _ in 0..trials {
                let m = transform_model(&base, &random_isometry(n, scheme.rotate, &mut g))?;
                if distance_to_set(&m, x, TORUS, DIST_TOL)? < r {
                    hits += 1;
                }
            }
            let p = hits as f64 / trials as f64;
            Ok((p, (p * (1.0 - p) / trials as f64).sqrt()))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(probs.len());
    let mut sum = 0.0;
    for (k, (p, se)) in probs.into_iter().enumerate() {
        sum += p;
        rows.push(FrequencyRow {
            j: lo + k,
            p_hat: p,
            stderr: se,
            partial_sum: sum,
        });
    }
    // log-spaced checkpoints over the upper half of the log range
    let start = ((hi as f64).sqrt().ceil() as usize).max(lo);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last = 0;
    for q in 0..16 {
        let t = q as f64 / 15.0;
        let j = ((start as f64).ln() * (1.0 - t) + (hi as f64).ln() * t).exp().round() as usize;
        let j = j.clamp(lo, hi);
        if j == last {
            continue;
        }
        last = j;
        xs.push((j as f64).ln());
        ys.push(rows[j - lo].partial_sum);
    }
    if xs.len() < 3 {
        return arg("stage range too short for the divergence diagnostic");
    }
    let fit = line_fit(&xs, &ys)?;
    let slope = fit.coef[1];
    Ok(FrequencyReport {
        rows,
        slope,
        slope_stderr: fit.stderr[1],
        threshold: DIVERGENCE_SLOPE,
        classification: if slope > DIVERGENCE_SLOPE {
            SeriesClass::Divergent
        } else {
            SeriesClass::Convergent
        },
        trials,
    })
}

/// Half-open index range `[a, b)` per axis; `u64` indices on a grid of `m` cells.
type IndexBox = Vec<(u64, u64)>;

/// Cells of a side-`1/m` grid meeting the open interval `(a, b)` on the circle,
/// as at most two half-open ranges.
fn wrapped_cells(a: f64, b: f64, m: u64) -> Vec<(u64, u64)> {
    if b - a >= 1.0 {
        return vec![(0, m)];
    }
    let mf = m as f64;
    let shift = a.floor();
    let (a, b) = (a - shift, b - shift);
    let lo = ((a * mf).floor() as u64).min(m - 1);
    let hi = (b * mf).ceil() as u64;
    if hi <= m {
        vec![(lo, hi.max(lo + 1))]
    } else {
        let wrap_hi = (hi - m).min(m);
        if wrap_hi >= lo {
            vec![(0, m)]
        } else {
            vec![(lo, m), (0, wrap_hi)]
        }
    }
}

fn axis_free_coordinates(basis: &[Point]) -> Option<Vec<bool>> {
    let n = basis.first()?.len();
    let mut free = vec![false; n];
    for u in basis {
        let nz: Vec<usize> = (0..n).filter(|&i| u[i] != 0.0).collect();
        if nz.len() != 1 {
            return None;
        }
        free[nz[0]] = true;
    }
    Some(free)
}

/// Exact grid boxes occupied by the sup-norm `δ`-neighbourhood of `m`, when it
/// is a finite union of axis-aligned boxes (point sets and axis-aligned planes).
fn exact_boxes(m: &SetModel, delta: f64, cells: u64) -> Option<Vec<IndexBox>> {
    let per_axis: Vec<Vec<Vec<(u64, u64)>>> = match m {
        SetModel::Points { points } => points
            .iter()
            .map(|p| p.iter().map(|&c| wrapped_cells(c - delta, c + delta, cells)).collect())
            .collect(),
        SetModel::Plane { base, basis } => {
            let free = axis_free_coordinates(basis)?;
            vec![base
                .iter()
                .zip(&free)
                .map(|(&c, &f)| {
                    if f {
                        vec![(0, cells)]
                    } else {
                        wrapped_cells(c - delta, c + delta, cells)
                    }
                })
                .collect()]
        }
        _ => return None,
    };
    let mut out = Vec::new();
    for axes in per_axis {
        // cartesian product of the wrapped pieces
        let mut acc: Vec<IndexBox> = vec![Vec::new()];
        for pieces in axes {
            acc = acc
                .into_iter()
                .flat_map(|b| {
                    pieces.iter().map(move |&r| {
                        let mut b = b.clone();
                        b.push(r);
                        b
                    })
                })
                .collect();
        }
        out.extend(acc);
    }
    Some(out)
}

/// Number of cells in the union of index boxes (recursive slab sweep).
fn union_cells(boxes: &[&IndexBox], axis: usize) -> u128 {
    if boxes.is_empty() {
        return 0;
    }
    let n = boxes[0].len();
    if axis + 1 == n {
        let mut iv: Vec<(u64, u64)> = boxes.iter().map(|b| b[axis]).collect();
        iv.sort_unstable();
        let mut total: u128 = 0;
        let (mut a, mut b) = iv[0];
        for &(x, y) in &iv[1..] {
            if x > b {
                total += (b - a) as u128;
                a = x;
                b = y;
            } else {
                b = b.max(y);
            }
        }
        return total + (b - a) as u128;
    }
    let mut cuts: Vec<u64> = boxes.iter().flat_map(|b| [b[axis].0, b[axis].1]).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut total: u128 = 0;
    for w in cuts.windows(2) {
        let active: Vec<&IndexBox> = boxes
            .iter()
            .copied()
            .filter(|b| b[axis].0 <= w[0] && b[axis].1 >= w[1])
            .collect();
        if !active.is_empty() {
            total += (w[1] - w[0]) as u128 * union_cells(&active, axis + 1);
        }
    }
    total
}

/// Largest number of boxes one count may involve.
pub const BOX_CAP: usize = 5_000_000;

struct Occupancy {
    boxes: Vec<IndexBox>,
    exact: bool,
}

fn stage_boxes<R: Rng + ?Sized>(
    scheme: &RandomScheme,
    m: &SetModel,
    delta: f64,
    cells: u64,
    rng: &mut R,
) -> Result<(Vec<IndexBox>, bool)> {
    if let Some(b) = exact_boxes(m, delta, cells) {
        return Ok((b, true));
    }
    // sampled fallback: δ-cubes around points sampled on the unit-cell part of the set
    let n = m.ambient_dim();
    let opts = SampleOptions {
        window: Some(Window {
            lo: vec![-1.0; n],
            hi: vec![2.0; n],
        }),
        ..SampleOptions::default()
    };
    let pts = sample_on_set(m, scheme.fallback_samples, &opts, rng)?;
    let cloud = SetModel::Points { points: pts };
    Ok((exact_boxes(&cloud, delta, cells).unwrap_or_default(), false))
}

fn occupancy(
    scheme: &RandomScheme,
    lo: usize,
    hi: usize,
    delta_of: impl Fn(usize) -> f64 + Sync,
    cells: u64,
) -> Result<Occupancy> {
    let parts: Vec<(Vec<IndexBox>, bool)> = (lo..=hi)
        .into_par_iter()
        .map(|j| {
            let m = scheme.stage_model(j)?;
            let mut g = stream(scheme.master_seed, &[j as u64, 1]);
            stage_boxes(scheme, &m, delta_of(j), cells, &mut g)
        })
        .collect::<Result<_>>()?;
    let mut boxes = Vec::new();
    let mut exact = true;
    for (b, e) in parts {
        exact &= e;
        boxes.extend(b);
        if boxes.len() > BOX_CAP {
            return Err(Error::Truncation(format!(
                "more than {BOX_CAP} boxes in stages [{lo}, {hi}]; use smaller N"
            )));
        }
    }
    Ok(Occupancy { boxes, exact })
}

fn grid_cells(side_inverse: f64, n: usize) -> Result<u64> {
    let m = side_inverse.ceil();
    // keep m^n inside u128 and every index inside u64
    if !(m >= 1.0 && m.log2() * n as f64 <= 120.0 && m < 2f64.powi(62)) {
        return Err(Error::Truncation(format!(
            "grid of {m}^{n} cells is too fine; use smaller N"
        )));
    }
    Ok(m as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringRow {
    pub n: usize,
    pub side: f64,
    pub count: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageCountRow {
    pub j: usize,
    pub count: u128,
    /// `#Y_j / j^{τκs}`.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub fit: ScalingFit,
    pub predicted: f64,
    pub rows: Vec<CoveringRow>,
    pub stage_counts: Vec<StageCountRow>,
    /// Largest over smallest `#Y_j / j^{τκs}`.
    pub stage_ratio_spread: f64,
    /// False when some stage used the sampled fallback.
    pub exact: bool,
}

/// Per-stage cover count `#Y_j`: grid cells of side `j^{−τ}` meeting `Δ(φ_j(F_j), j^{−τ})`.
pub fn stage_count(scheme: &RandomScheme, j: usize) -> Result<StageCountRow> {
    let cells = grid_cells((j as f64).powf(scheme.tau), scheme.dim())?;
    let occ = occupancy(scheme, j, j, |j| scheme.radius(j), cells)?;
    let refs: Vec<&IndexBox> = occ.boxes.iter().collect();
    let count = union_cells(&refs, 0);
    let expected = (j as f64).powf(scheme.tau * scheme.kappa * scheme.s());
    Ok(StageCountRow {
        j,
        count,
        ratio: count as f64 / expected,
    })
}

/// Box-counting exponent of the tail unions `∪_{j=N}^{2N} Δ(φ_j(F_j), j^{−τ})`
/// at side `N^{−τ}`, against the prediction `κs + 1/τ`.
pub fn covering_exponent(scheme: &RandomScheme, n_list: &[usize]) -> Result<CoveringReport> {
    scheme.validate()?;
    if n_list.len() < 4 {
        return arg("need at least 4 stage counts");
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return arg("stage counts must be positive and increasing");
    }
    let dim = scheme.dim();
    let mut rows = Vec::with_capacity(n_list.len());
    let mut exact = true;
    for &n in n_list {
        let cells = grid_cells((n as f64).powf(scheme.tau), dim)?;
        let occ = occupancy(scheme, n, 2 * n, |j| scheme.radius(j), cells)?;
        exact &= occ.exact;
        let refs: Vec<&IndexBox> = occ.boxes.iter().collect();
        rows.push(CoveringRow {
            n,
            side: 1.0 / cells as f64,
            count: union_cells(&refs, 0),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| -r.side.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.count as f64).ln()).collect();
    let fit = line_fit(&xs, &ys)?;
    let points = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| FitPoint {
            log_scales: vec![x],
            log_measure: y,
            stderr: 0.0,
        })
        .collect();
    let lo = n_list[0];
    let hi = 2 * n_list[n_list.len() - 1];
    let mut stage_counts = Vec::new();
    let mut last = 0;
    for q in 0..12 {
        let t = q as f64 / 11.0;
        let j = ((lo as f64).ln() * (1.0 - t) + (hi as f64).ln() * t).exp().round() as usize;
        if j != last {
            stage_counts.push(stage_count(scheme, j)?);
            last = j;
        }
    }
    let (mn, mx) = stage_counts
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.ratio), b.max(r.ratio)));
    Ok(CoveringReport {
        fit: ScalingFit {
            exponent: fit.coef[1],
            exponent_stderr: fit.stderr[1],
            intercept: fit.coef[0],
            residual_max: fit.residual_max(),
            points,
            lsp: None,
        },
        predicted: scheme.predicted_exponent(),
        rows,
        stage_counts,
        stage_ratio_spread: if mn > 0.0 { mx / mn } else { f64::INFINITY },
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn point_scheme(tau: f64, seed: u64) -> RandomScheme {
        RandomScheme::new(
            SetSequence::Fixed {
                model: SetModel::point(vec![0.0]),
            },
            tau,
            0.0,
            seed,
        )
        .unwrap()
    }

    fn line_scheme(tau: f64, seed: u64) -> RandomScheme {
        RandomScheme::new(
            SetSequence::Fixed {
                model: SetModel::axis_line(2),
            },
            tau,
            0.5,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn hypothesis_enforced() {
        assert!(RandomScheme::new(
            SetSequence::Fixed {
                model: SetModel::point(vec![0.0])
            },
            1.0,
            0.0,
            1
        )
        .is_err());
        assert!(RandomScheme::new(
            SetSequence::Fixed {
                model: SetModel::axis_line(2)
            },
            1.0,
            0.5,
            1
        )
        .is_err());
        assert!(RandomScheme::new(
            SetSequence::Fixed {
                model: SetModel::point(vec![0.0])
            },
            2.0,
            1.0,
            1
        )
        .is_err());
    }

    #[test]
    fn isometries_are_deterministic_and_uniform() {
        let s = point_scheme(2.0, 5);
        assert_eq!(draw_isometry(&s, 5), draw_isometry(&s, 5));
        assert_ne!(draw_isometry(&s, 5), draw_isometry(&s, 6));
        let k = 100_000;
        let mut xs: Vec<f64> = (1..=k).map(|j| draw_isometry(&s, j).translation[0]).collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                ((i + 1) as f64 / k as f64 - x)
                    .abs()
                    .max((x - i as f64 / k as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 1.36 / (k as f64).sqrt(), "KS {ks}");
    }

    #[test]
    fn point_hit_probability() {
        let s = point_scheme(2.0, 8);
        let rep = coverage_frequency(
            &s,
            &[0.0],
            RadiusMode::Power { c: 0.05, p: 0.0 },
            1,
            17,
            100_000 / 17 + 1,
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        let trials: f64 = (rep.trials * rep.rows.len()) as f64;
        let p: f64 = rep.rows.iter().map(|r| r.p_hat).sum::<f64>() / rep.rows.len() as f64;
        let sigma = (0.1 * 0.9 / trials).sqrt();
        assert!((p - 0.1).abs() < 3.0 * sigma, "p = {p}");
    }

    #[test]
    fn hits_on_own_copy() {
        let s = point_scheme(2.0, 3);
        let x = draw_isometry(&s, 1).translation;
        assert_eq!(hit_indices(&s, &x, RadiusMode::Paper, 1, 1).unwrap(), vec![1]);
        let a = hit_indices(&s, &[0.3], RadiusMode::Transformed { t: 0.5 }, 1, 500).unwrap();
        assert_eq!(
            a,
            hit_indices(&s, &[0.3], RadiusMode::Transformed { t: 0.5 }, 1, 500).unwrap()
        );
    }

    #[test]
    fn transformed_radius_arithmetic() {
        let s = point_scheme(2.0, 0);
        let m = RadiusMode::Transformed {
            t: s.predicted_exponent(),
        };
        for j in [1, 7, 100] {
            assert!((m.radius(&s, j) - 1.0 / j as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn harmonic_hit_count() {
        // t = 1/2 gives radius 1/j, P_j = 2/j
        let n = 10_000;
        let s = point_scheme(2.0, 11);
        let hits = hit_indices(&s, &[0.123], RadiusMode::Transformed { t: 0.5 }, 1, n).unwrap();
        let ps: Vec<f64> = (1..=n).map(|j| (2.0 / j as f64).min(1.0)).collect();
        let mean: f64 = ps.iter().sum();
        let var: f64 = ps.iter().map(|p| p * (1.0 - p)).sum();
        assert!(
            (hits.len() as f64 - mean).abs() <= 3.0 * var.sqrt(),
            "{} vs {mean}",
            hits.len()
        );
    }

    #[test]
    fn wrapped_cells_cases() {
        assert_eq!(wrapped_cells(0.1, 0.3, 10), vec![(1, 3)]);
        assert_eq!(wrapped_cells(-0.05, 0.05, 10), vec![(9, 10), (0, 1)]);
        assert_eq!(wrapped_cells(0.95, 1.05, 10), vec![(9, 10), (0, 1)]);
        assert_eq!(wrapped_cells(0.0, 2.0, 10), vec![(0, 10)]);
    }

    #[test]
    fn union_matches_brute_force() {
        let mut g = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let m = 30u64;
            let boxes: Vec<IndexBox> = (0..15)
                .map(|_| {
                    (0..2)
                        .map(|_| {
                            let a = g.gen_range(0..m);
                            (a, g.gen_range(a + 1..=m))
                        })
                        .collect()
                })
                .collect();
            let mut grid = vec![false; (m * m) as usize];
            for b in &boxes {
                for x in b[0].0..b[0].1 {
                    for y in b[1].0..b[1].1 {
                        grid[(x * m + y) as usize] = true;
                    }
                }
            }
            let brute = grid.iter().filter(|&&v| v).count() as u128;
            let refs: Vec<&IndexBox> = boxes.iter().collect();
            assert_eq!(union_cells(&refs, 0), brute);
        }
    }

    #[test]
    fn exponents_near_prediction() {
        let ns: Vec<usize> = (6..=12).map(|k| 1 << k).collect();
        let r = covering_exponent(&point_scheme(2.0, 1), &ns).unwrap();
        assert!(r.exact);
        assert!((r.fit.exponent - 0.5).abs() <= 0.1, "{}", r.fit.exponent);
        let r4 = covering_exponent(&point_scheme(4.0, 1), &ns).unwrap();
        assert!((r4.fit.exponent - 0.25).abs() <= 0.1, "{}", r4.fit.exponent);
        let ns: Vec<usize> = (4..=9).map(|k| 1 << k).collect();
        let rl = covering_exponent(&line_scheme(2.0, 1), &ns).unwrap();
        assert!((rl.fit.exponent - 1.5).abs() <= 0.15, "{}", rl.fit.exponent);
        assert!(rl.stage_ratio_spread < 2.0, "{}", rl.stage_ratio_spread);
    }

    #[test]
    fn exponent_non_increasing_in_tau() {
        let ns: Vec<usize> = (6..=11).map(|k| 1 << k).collect();
        let e: Vec<ScalingFit> = [2.0, 3.0, 4.0]
            .iter()
            .map(|&t| covering_exponent(&point_scheme(t, 2), &ns).unwrap().fit)
            .collect();
        for w in e.windows(2) {
            assert!(w[1].exponent <= w[0].exponent + 3.0 * (w[0].exponent_stderr + w[1].exponent_stderr));
        }
    }

    #[test]
    fn borel_cantelli_classification() {
        let s = point_scheme(2.0, 6);
        let mut g = ChaCha8Rng::seed_from_u64(1);
        let div = coverage_frequency(&s, &[0.5], RadiusMode::Power { c: 1.0, p: 1.0 }, 1, 2000, 1000, &mut g).unwrap();
        assert_eq!(div.classification, SeriesClass::Divergent);
        let conv = coverage_frequency(&s, &[0.5], RadiusMode::Power { c: 1.0, p: 2.0 }, 1, 2000, 1000, &mut g).unwrap();
        assert_eq!(conv.classification, SeriesClass::Convergent);
        let lines = line_scheme(2.0, 6);
        let rl = coverage_frequency(
            &lines,
            &[0.5, 0.5],
            RadiusMode::Power { c: 1.0, p: 1.0 },
            1,
            500,
            1000,
            &mut g,
        )
        .unwrap();
        assert_eq!(rl.classification, SeriesClass::Divergent);
    }
}
