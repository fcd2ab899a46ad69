//! Command runners. Each turns a resolved config into results, tables and warnings.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::*;
use crate::cantor::{self, CantorTree, HolderOptions};
use crate::covering::{self, BallFamily, KgbOptions, NetOptions, StageProvider};
use crate::dimfun::{corollary_exponent, default_grid, mtp_radius, verify_gauge_pair};
use crate::error::{Error, Result};
use crate::io::{read_json, Table};
use crate::measure::{box_dimensions, fit_lsp, minkowski_content, ScalingFit};
use crate::randomsim::{coverage_frequency, covering_exponent};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    FitLsp,
    Boxdim,
    Minkowski,
    Transform,
    Cover,
    CantorBuild,
    CantorVerify,
    Randsim,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::FitLsp,
        Command::Boxdim,
        Command::Minkowski,
        Command::Transform,
        Command::Cover,
        Command::CantorBuild,
        Command::CantorVerify,
        Command::Randsim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::FitLsp => "fit-lsp",
            Command::Boxdim => "boxdim",
            Command::Minkowski => "minkowski",
            Command::Transform => "transform",
            Command::Cover => "cover",
            Command::CantorBuild => "cantor-build",
            Command::CantorVerify => "cantor-verify",
            Command::Randsim => "randsim",
        }
    }

    pub fn parse(name: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == name)
    }

    /// JSON path of the master seed, if the command (in this configuration) is stochastic.
    pub fn seed_path(self, cfg: &Value) -> Option<&'static [&'static str]> {
        match self {
            Command::Transform => None,
            Command::Cover if cfg.get("mode").and_then(Value::as_str) == Some("five_r") => None,
            Command::Randsim => Some(&["scheme", "master_seed"]),
            _ => Some(&["master_seed"]),
        }
    }
}

/// Everything a run produces besides timing.
#[derive(Debug, Default)]
pub struct Outcome {
    /// The config after defaults are filled in.
    pub config: Value,
    pub results: Value,
    pub tables: Vec<(String, Table)>,
    /// Extra JSON documents written next to the report.
    pub files: Vec<(String, Value)>,
    pub warnings: Vec<String>,
    /// Set when the run completed but a check failed (exit code 3).
    pub failure: Option<String>,
}

fn parse<T: DeserializeOwned + Serialize>(cfg: Value) -> Result<(T, Value)> {
    let c: T = serde_json::from_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let echo = serde_json::to_value(&c)?;
    Ok((c, echo))
}

fn seed(s: Option<u64>) -> Result<u64> {
    s.ok_or_else(|| Error::Config("master_seed is required for this command".into()))
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn fit_table(fit: &ScalingFit, names: &[&str]) -> Table {
    let mut t = Table::new(names.iter().copied().chain(["log_measure", "rel_stderr"]));
    for p in &fit.points {
        t.push(p.log_scales.iter().copied().chain([p.log_measure, p.stderr]));
    }
    t
}

/// Parses `cfg` as the command's config type and serialises it back with defaults filled in.
pub fn normalize(cmd: Command, cfg: Value) -> Result<Value> {
    fn go<T: DeserializeOwned + Serialize>(cfg: Value) -> Result<Value> {
        parse::<T>(cfg).map(|(_, v)| v)
    }
    match cmd {
        Command::FitLsp => go::<FitLspConfig>(cfg),
        Command::Boxdim => go::<BoxdimConfig>(cfg),
        Command::Minkowski => go::<MinkowskiConfig>(cfg),
        Command::Transform => go::<TransformConfig>(cfg),
        Command::Cover => go::<CoverConfig>(cfg),
        Command::CantorBuild => go::<CantorBuildConfig>(cfg),
        Command::CantorVerify => go::<CantorVerifyConfig>(cfg),
        Command::Randsim => go::<RandsimConfig>(cfg),
    }
}

pub fn execute(cmd: Command, cfg: Value, base: &Path) -> Result<Outcome> {
    match cmd {
        Command::FitLsp => run_fit_lsp(cfg, base),
        Command::Boxdim => run_boxdim(cfg, base),
        Command::Minkowski => run_minkowski(cfg, base),
        Command::Transform => run_transform(cfg),
        Command::Cover => run_cover(cfg, base),
        Command::CantorBuild => run_cantor_build(cfg),
        Command::CantorVerify => run_cantor_verify(cfg, base),
        Command::Randsim => run_randsim(cfg),
    }
}

fn run_fit_lsp(cfg: Value, base: &Path) -> Result<Outcome> {
    let (c, config): (FitLspConfig, _) = parse(cfg)?;
    let mut rng = stream(seed(c.master_seed)?, &[]);
    let m = c.set.load(base)?;
    let mut opts = c.measure.options();
    opts.delta_relative = c.delta_relative;
    let fit = fit_lsp(&m, &c.r_grid, &c.delta_grid, c.samples, &opts, &mut rng)?;
    let mut warnings = Vec::new();
    if let Some(l) = &fit.lsp {
        if l.c4_hat / l.c3_hat > 10.0 {
            warnings.push(format!(
                "LSP constants spread by {:.1}x across the grid",
                l.c4_hat / l.c3_hat
            ));
        }
    }
    Ok(Outcome {
        config,
        results: json!({
            "model": m.kind_name(),
            "kappa_hat": fit.exponent,
            "kappa_stderr": fit.exponent_stderr,
            "fit": to_value(&fit)?,
        }),
        tables: vec![("lsp_cells".into(), fit_table(&fit, &["log_delta", "log_r"]))],
        warnings,
        ..Outcome::default()
    })
}

fn run_boxdim(cfg: Value, base: &Path) -> Result<Outcome> {
    let (c, config): (BoxdimConfig, _) = parse(cfg)?;
    let mut rng = stream(seed(c.master_seed)?, &[]);
    let m = c.set.load(base)?;
    let (lo, hi) = box_dimensions(&m, &c.scales, c.samples, &c.measure.options(), &mut rng)?;
    let mut warnings = Vec::new();
    if hi.exponent - lo.exponent > 0.1 {
        warnings.push(format!(
            "lower and upper estimates differ by {:.3}",
            hi.exponent - lo.exponent
        ));
    }
    Ok(Outcome {
        config,
        results: json!({
            "model": m.kind_name(),
            "lower": lo.exponent,
            "upper": hi.exponent,
            "lower_fit": to_value(&lo)?,
            "upper_fit": to_value(&hi)?,
        }),
        tables: vec![("volumes".into(), fit_table(&lo, &["log_delta"]))],
        warnings,
        ..Outcome::default()
    })
}

fn run_minkowski(cfg: Value, base: &Path) -> Result<Outcome> {
    let (c, config): (MinkowskiConfig, _) = parse(cfg)?;
    let mut rng = stream(seed(c.master_seed)?, &[]);
    let m = c.set.load(base)?;
    let (lo, hi) = minkowski_content(&m, c.d, &c.scales, c.samples, &c.measure.options(), &mut rng)?;
    Ok(Outcome {
        config,
        results: json!({"model": m.kind_name(), "d": c.d, "lower": lo, "upper": hi}),
        ..Outcome::default()
    })
}

fn run_transform(cfg: Value) -> Result<Outcome> {
    let (c, config): (TransformConfig, _) = parse(cfg)?;
    c.gauges.validate()?;
    let grid = c.verify_grid.clone().unwrap_or_else(default_grid);
    let report = verify_gauge_pair(&c.gauges, &grid)?;
    let mut warnings = Vec::new();
    if !report.passed() {
        warnings.push("gauge pair fails a hypothesis check on the verification grid".into());
    }
    let mut table = Table::new(["upsilon", "tilde_upsilon"]);
    let mut rows = Vec::new();
    for &u in &c.upsilon {
        let t = mtp_radius(&c.gauges, u)?;
        table.push([u, t]);
        rows.push(json!({"upsilon": u, "tilde_upsilon": t}));
    }
    let exponent = match (c.ambient_dim, c.gauges.f.power_exponent(), c.gauges.g.power_exponent()) {
        (Some(n), Some(s), Some(_)) => Some(corollary_exponent(s, c.gauges.kappa, n)?),
        _ => None,
    };
    Ok(Outcome {
        config,
        results: json!({"rows": rows, "pair_report": to_value(&report)?, "corollary_exponent": exponent}),
        tables: vec![("transform".into(), table)],
        warnings,
        ..Outcome::default()
    })
}

fn ball_table(balls: impl Iterator<Item = (Vec<f64>, f64, usize)>, n: usize) -> Table {
    let mut t = Table::new((0..n).map(|i| format!("x{i}")).chain(["radius".into(), "j".into()]));
    for (c, r, j) in balls {
        t.push(c.iter().map(|v| v.to_string()).chain([r.to_string(), j.to_string()]));
    }
    t
}

struct KgbStages<'a> {
    sets: &'a covering::SetSequence,
    gauges: &'a crate::dimfun::GaugePair,
    upsilon: &'a covering::RadiusRule,
}

impl StageProvider for KgbStages<'_> {
    fn set(&self, j: usize) -> crate::sets::SetModel {
        self.sets.at(j)
    }

    fn tilde_upsilon(&self, j: usize) -> f64 {
        mtp_radius(self.gauges, self.upsilon.at(j)).unwrap_or(f64::NAN)
    }
}

fn run_cover(cfg: Value, base: &Path) -> Result<Outcome> {
    let (c, config): (CoverConfig, _) = parse(cfg)?;
    match c {
        CoverConfig::FiveR { balls, metric } => {
            let n = balls.first().map_or(1, |b| b.dim());
            for b in &balls {
                crate::geometry::Ball::new(b.center.clone(), b.radius)?;
                if b.dim() != n {
                    return Err(Error::Config("balls of mixed dimension".into()));
                }
            }
            let fam = BallFamily::new(balls.clone(), metric);
            let out = covering::five_r_cover(&fam);
            let covers = balls
                .iter()
                .all(|b| out.balls.iter().any(|s| s.ball.dilate(5.0).contains_ball(b, metric)));
            let disjoint = out.pairwise_disjoint();
            Ok(Outcome {
                config,
                results: json!({
                    "input": balls.len(),
                    "selected": out.len(),
                    "disjoint": disjoint,
                    "five_r_covers_all": covers,
                    "balls": to_value(&out.balls)?,
                }),
                tables: vec![(
                    "selected".into(),
                    ball_table(out.balls.iter().map(|b| (b.ball.center.clone(), b.ball.radius, b.j)), n),
                )],
                failure: (!(disjoint && covers)).then(|| "5r-cover check failed".to_string()),
                ..Outcome::default()
            })
        }
        CoverConfig::Caj {
            master_seed,
            a,
            j,
            set,
            upsilon,
            pool,
            metric,
            tol,
        } => {
            let mut rng = stream(seed(master_seed)?, &[]);
            let m = set.load(base)?;
            let res = covering::build_caj(&a, j, &m, upsilon, pool, &NetOptions { metric, tol }, &mut rng)?;
            let mut warnings = Vec::new();
            if !res.net.maximal {
                warnings.push("net is not maximal within the candidate pool".into());
            }
            Ok(Outcome {
                config,
                results: json!({
                    "cardinality": res.cardinality(),
                    "pool_in_region": res.net.pool_in_region,
                    "maximal": res.net.maximal,
                    "balls": to_value(&res.balls)?,
                }),
                tables: vec![(
                    "caj".into(),
                    ball_table(
                        res.balls.iter().map(|b| (b.ball.center.clone(), b.ball.radius, b.j)),
                        a.dim(),
                    ),
                )],
                warnings,
                ..Outcome::default()
            })
        }
        CoverConfig::Kgb {
            master_seed,
            b,
            g,
            j_max,
            sets,
            gauges,
            upsilon,
            target_fraction,
            c5,
            pool_per_j,
            metric,
            tol,
        } => {
            let mut rng = stream(seed(master_seed)?, &[]);
            sets.validate()?;
            upsilon.validate()?;
            gauges.validate()?;
            let stages = KgbStages {
                sets: &sets,
                gauges: &gauges,
                upsilon: &upsilon,
            };
            let opts = KgbOptions {
                metric,
                tol,
                c5,
                pool_per_j,
            };
            let res = covering::build_kgb(&b, g, &stages, j_max, target_fraction, &opts, &mut rng)?;
            Ok(Outcome {
                config,
                results: json!({
                    "count": res.balls.len(),
                    "n0": res.n0,
                    "achieved_fraction": res.achieved_fraction,
                    "target": res.target,
                    "balls": to_value(&res.balls)?,
                }),
                tables: vec![(
                    "kgb".into(),
                    ball_table(
                        res.balls.iter().map(|x| (x.ball.center.clone(), x.ball.radius, x.j)),
                        b.dim(),
                    ),
                )],
                ..Outcome::default()
            })
        }
    }
}

fn audit_table(rep: &cantor::AuditReport) -> Table {
    let mut t = Table::new(["property", "node", "pair", "detail"]);
    for a in &rep.properties {
        for v in &a.violations {
            t.push([
                a.property.clone(),
                v.node.map_or(String::new(), |n| n.to_string()),
                v.pair.map_or(String::new(), |n| n.to_string()),
                v.detail.clone(),
            ]);
        }
    }
    t
}

fn audit_summary(rep: &cantor::AuditReport) -> Value {
    Value::Array(
        rep.properties
            .iter()
            .map(|a| json!({"property": a.property, "passed": a.passed, "checked": a.checked, "violations": a.violations.len()}))
            .collect(),
    )
}

fn run_cantor_build(cfg: Value) -> Result<Outcome> {
    let (c, config): (CantorBuildConfig, _) = parse(cfg)?;
    let master = seed(c.master_seed)?;
    let p = &c.construction;
    let tree = cantor::build_cantor(p, &mut stream(master, &[0]))?;
    let mass = cantor::assign_mass(&tree, p)?;
    let leaf_mass: f64 = tree.leaves().map(|n| mass.mu[n.id]).sum();
    let mut results = json!({
        "summary": to_value(&tree.summary())?,
        "constants": to_value(&tree.constants)?,
        "leaf_mass": leaf_mass,
    });
    let mut out = Outcome {
        config,
        ..Outcome::default()
    };
    let mut nodes = Table::new([
        "id", "level", "parent", "sublevel", "j", "center0", "radius", "l_b", "mass",
    ]);
    for n in &tree.nodes {
        nodes.push([
            n.id.to_string(),
            n.level.to_string(),
            n.parent.map_or(String::new(), |p| p.to_string()),
            n.sublevel.to_string(),
            n.j.to_string(),
            n.ball.center[0].to_string(),
            n.ball.radius.to_string(),
            n.l_b.to_string(),
            mass.mu[n.id].to_string(),
        ]);
    }
    out.tables.push(("nodes".into(), nodes));
    let mut subs = Table::new(["node", "index", "g_prime", "n0", "regions", "region_radius"]);
    for s in &tree.sublevels {
        subs.push([
            s.node.to_string(),
            s.index.to_string(),
            s.g_prime.to_string(),
            s.n0.to_string(),
            s.regions.to_string(),
            s.region_radius.to_string(),
        ]);
    }
    out.tables.push(("sublevels".into(), subs));
    if c.audit {
        let rep = cantor::verify_levels(&tree, p)?;
        results["audit"] = audit_summary(&rep);
        results["audit_passed"] = json!(rep.all_passed);
        if !rep.all_passed {
            out.failure = Some("the tree fails the P0–P5 audit".into());
            out.tables.push(("violations".into(), audit_table(&rep)));
        }
    }
    if let Some(h) = &c.holder {
        let opts = HolderOptions {
            r_min: h.r_min,
            r_max: h.r_max,
            leaf_fraction: h.leaf_fraction,
        };
        let rep = cantor::holder_check(&tree, &mass, p, h.trials, &opts, &mut stream(master, &[1]))?;
        if rep.single_ball_max_ratio > rep.max_ratio {
            out.warnings
                .push("single-ball trials reach a larger ratio than multi-ball trials".into());
        }
        results["holder"] = to_value(&rep)?;
    }
    if c.write_tree {
        out.files.push(("tree".into(), to_value(&tree)?));
    }
    out.results = results;
    Ok(out)
}

fn run_cantor_verify(cfg: Value, base: &Path) -> Result<Outcome> {
    let (c, config): (CantorVerifyConfig, _) = parse(cfg)?;
    let p = &c.construction;
    let tree: CantorTree = match &c.tree {
        Some(path) => {
            let t: CantorTree = read_json(&base.join(path))?;
            if t.compute_digest() != t.digest {
                return Err(Error::Config("tree digest does not match its contents".into()));
            }
            t
        }
        None => cantor::build_cantor(p, &mut stream(seed(c.master_seed)?, &[0]))?,
    };
    let rep = cantor::verify_levels(&tree, p)?;
    Ok(Outcome {
        config,
        results: json!({
            "digest": tree.digest,
            "all_passed": rep.all_passed,
            "properties": audit_summary(&rep),
            "report": to_value(&rep)?,
        }),
        tables: vec![("violations".into(), audit_table(&rep))],
        failure: (!rep.all_passed).then(|| "the tree fails the P0–P5 audit".to_string()),
        ..Outcome::default()
    })
}

fn run_randsim(cfg: Value) -> Result<Outcome> {
    let (c, config): (RandsimConfig, _) = parse(cfg)?;
    c.scheme.validate()?;
    if c.n_list.is_none() && c.frequency.is_none() {
        return Err(Error::Config("give n_list, frequency or both".into()));
    }
    let mut out = Outcome {
        config,
        ..Outcome::default()
    };
    let mut results = json!({"predicted_exponent": c.scheme.predicted_exponent()});
    if let Some(ns) = &c.n_list {
        let rep = covering_exponent(&c.scheme, ns)?;
        if !rep.exact {
            out.warnings
                .push("some stages used the sampled box rasterisation".into());
        }
        let mut t = Table::new(["n", "side", "count"]);
        for r in &rep.rows {
            t.push([r.n.to_string(), r.side.to_string(), r.count.to_string()]);
        }
        out.tables.push(("covering".into(), t));
        let mut t = Table::new(["j", "count", "ratio"]);
        for r in &rep.stage_counts {
            t.push([r.j.to_string(), r.count.to_string(), r.ratio.to_string()]);
        }
        out.tables.push(("stage_counts".into(), t));
        results["covering"] = to_value(&rep)?;
    }
    if let Some(f) = &c.frequency {
        let mut rng = stream(c.scheme.master_seed, &[u64::MAX]);
        let rep = coverage_frequency(&c.scheme, &f.x, f.radii, f.lo, f.hi, f.trials, &mut rng)?;
        let mut t = Table::new(["j", "p_hat", "stderr", "partial_sum"]);
        for r in &rep.rows {
            t.push([
                r.j.to_string(),
                r.p_hat.to_string(),
                r.stderr.to_string(),
                r.partial_sum.to_string(),
            ]);
        }
        out.tables.push(("frequency".into(), t));
        results["frequency"] = json!({
            "classification": to_value(&rep.classification)?,
            "slope": rep.slope,
            "slope_stderr": rep.slope_stderr,
            "threshold": rep.threshold,
            "trials": rep.trials,
            "final_partial_sum": rep.rows.last().map(|r| r.partial_sum),
        });
    }
    out.results = results;
    Ok(out)
}
