//! Seeded experiments checking the distance identities and the coding
//! results on random and hand-picked instances. Each run returns an
//! [`ExperimentReport`]; instances are computed in parallel and assembled in
//! order, so equal inputs give byte-identical reports.

mod report;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::error::{invalid, Result};
use crate::excursion::{
    code_excursion, critical_cuts, d_excursion, d_gamma, sample_excursion_with, CodedTree, Excursion,
    ExcursionDistance, ExcursionKind, GammaOptions, Resolution,
};
use crate::gp_box::{
    box_lambda, glued_upper_bound, gromov_prohorov, gromov_prohorov_heuristic, improve_correspondence, BoxConfig,
    GlueSearch, DEFAULT_MAX_PAIRS,
};
use crate::io::mm_space_to_json;
use crate::mm_core::{sample_mm_space, FiniteMMSpace};
use crate::rational::Rational;

pub use report::{Assertion, ExperimentReport, Instance, Totals};

/// Seed of instance `i` of a run seeded with `seed`.
pub fn instance_seed(seed: u64, i: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(i))
}

fn q(p: i128, d: i128) -> Rational {
    Rational::new(p, d)
}

fn two_point(r: Rational, p: Rational) -> FiniteMMSpace {
    FiniteMMSpace::from_matrix(vec![vec![Rational::ZERO, r], vec![r, Rational::ZERO]], vec![p, Rational::ONE - p])
        .expect("valid two-point space")
}

const GLUING_CLAIM: &str = "d_GP equals the least Prohorov distance over gluings, attained by gluing along a correspondence";
const COMPARISON_CLAIM: &str = "d_GP <= box_1 <= 2 d_GP";
const MONOTONE_CLAIM: &str = "for lambda > lambda': box_lambda <= box_lambda' <= (lambda / lambda') box_lambda";

/// Random pairs of spaces with at most `n_max` points: the box formula for
/// d_GP against the best gluing, the comparison with box_1, and monotonicity
/// in lambda. A hand-computed pair is appended.
pub fn run_theorem_check(seed: u64, count: usize, n_max: usize) -> Result<ExperimentReport> {
    if n_max == 0 || n_max * n_max > DEFAULT_MAX_PAIRS {
        return Err(invalid(
            "run_theorem_check",
            "n_max",
            format!("must be between 1 and {} so that box distances stay exact", (DEFAULT_MAX_PAIRS as f64).sqrt() as usize),
        ));
    }
    let mut report = ExperimentReport::new("theorem-check", seed);
    report.param("count", json!(count));
    report.param("n_max", json!(n_max));
    report.param("diameter_max", json!("2"));
    report.param("lambdas", json!(["1/4", "1/2", "1", "2"]));
    let results: Vec<_> = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = instance_seed(seed, i as u64);
            let a = sample_mm_space(instance_seed(s, 0), n_max, Rational::from(2));
            let b = sample_mm_space(instance_seed(s, 1), n_max, Rational::from(2));
            gluing_instance(format!("pair-{i}"), format!("random spaces with {} and {} points", a.len(), b.len()), &a, &b, s)
        })
        .collect();
    results.into_iter().for_each(|r| report.push(r));

    let (a, b) = (FiniteMMSpace::point(), two_point(Rational::ONE, q(3, 4)));
    let (mut inst, mut checks) = gluing_instance("pinned".into(), "one point vs two points at distance 1 with weights 3/4, 1/4".into(), &a, &b, seed);
    let gp = gromov_prohorov(&a, &b, &BoxConfig::default())?.value;
    let half = box_lambda(&a, &b, &q(1, 2), &BoxConfig::default())?.value;
    checks.push(inst.check(
        "closed-form",
        "d_GP = min(1 - p, r / 2) = 1/4 and box_1/2 = min(r, 2 (1 - p)) = 1/2",
        gp == q(1, 4) && half == q(1, 2),
        format!("d_GP = {gp}, box_1/2 = {half}"),
    ));
    inst.exact("box_1/2", &half);
    report.push((inst, checks));
    Ok(report.finish())
}

fn gluing_instance(id: String, description: String, a: &FiniteMMSpace, b: &FiniteMMSpace, seed: u64) -> (Instance, Vec<Assertion>) {
    let cfg = BoxConfig::default();
    let mut inst = Instance::new(id, description);
    inst.value("a", mm_space_to_json(a));
    inst.value("b", mm_space_to_json(b));
    let gp = gromov_prohorov(a, b, &cfg).expect("sampled spaces are valid");
    let glued = glued_upper_bound(a, b, &GlueSearch { seed, ..GlueSearch::default() }).expect("sampled spaces are valid");
    let lambdas = [q(1, 4), q(1, 2), Rational::ONE, Rational::from(2)];
    let boxes: Vec<Rational> = lambdas.iter().map(|l| box_lambda(a, b, l, &cfg).expect("valid").value).collect();
    inst.exact("d_gp", &gp.value);
    inst.value("d_gp_correspondence", json!(gp.correspondence.pairs()));
    inst.exact("glued_bound", &glued.value);
    inst.value("glued_exhaustive", json!(glued.exhaustive));
    for (l, v) in lambdas.iter().zip(&boxes) {
        inst.exact(&format!("box_{l}"), v);
    }
    let mut checks = Vec::new();
    let attained = if glued.exhaustive { glued.value == gp.value } else { glued.value >= gp.value };
    checks.push(inst.check(
        "gluing-equality",
        GLUING_CLAIM,
        attained,
        format!("box formula {} vs gluing {} (exhaustive: {})", gp.value, glued.value, glued.exhaustive),
    ));
    let box1 = boxes[2];
    checks.push(inst.check(
        "box-comparison",
        COMPARISON_CLAIM,
        gp.value <= box1 && box1 <= Rational::from(2) * gp.value,
        format!("d_GP = {}, box_1 = {box1}", gp.value),
    ));
    let mut monotone = true;
    for i in 0..lambdas.len() {
        for j in 0..i {
            let (big, small) = (lambdas[i], lambdas[j]);
            monotone &= boxes[i] <= boxes[j] && boxes[j] <= big / small * boxes[i];
        }
    }
    checks.push(inst.check(
        "lambda-monotonicity",
        MONOTONE_CLAIM,
        monotone,
        boxes.iter().map(Rational::to_string).collect::<Vec<_>>().join(", "),
    ));
    (inst, checks)
}

/// Upper bound on d_GP between two coded trees, exact when small enough.
/// Trees coded on the same partition are compared through the coupling that
/// matches equal segments, improved by [`improve_correspondence`].
pub fn coded_trees_gp(a: &CodedTree, b: &CodedTree) -> (Rational, bool) {
    let (sa, sb) = (&a.space, &b.space);
    if sa.len() * sb.len() <= DEFAULT_MAX_PAIRS {
        let r = gromov_prohorov(sa, sb, &BoxConfig::default()).expect("coded trees are valid");
        return (r.value, true);
    }
    let half = q(1, 2);
    let value = if a.segments == b.segments {
        let start: Vec<(usize, usize)> = a.projection.iter().copied().zip(b.projection.iter().copied()).collect();
        improve_correspondence(sa, sb, &half, &start).expect("valid").value * half
    } else {
        gromov_prohorov_heuristic(sa, sb).expect("valid").value
    };
    (value, false)
}

/// Cuts shared by two excursions: critical cuts of both, all breakpoints,
/// and `extra`. Coding both on these gives identical segments.
pub fn shared_cuts(h: &Excursion, g: &Excursion, extra: &[Rational]) -> Vec<Rational> {
    let mut cuts: Vec<Rational> = critical_cuts(h, None)
        .into_iter()
        .chain(critical_cuts(g, None))
        .chain(h.breakpoints().iter().copied())
        .chain(g.breakpoints().iter().copied())
        .chain(extra.iter().copied())
        .collect();
    cuts.sort();
    cuts.dedup();
    cuts
}

const LIPSCHITZ_CLAIM: &str = "d_GP(T_h, T_g) <= 2 sup |h - g|";

/// Piecewise-linear pairs with shared breakpoints: the coded trees are
/// compared on a common partition and the Lipschitz bound is checked
/// exactly.
pub fn run_lipschitz_check(seed: u64, count: usize) -> ExperimentReport {
    let mut report = ExperimentReport::new("lipschitz", seed);
    report.param("count", json!(count));
    report.param("max_pieces", json!(4));
    let tent = Excursion::tent();
    let mut pairs: Vec<(String, String, Excursion, Excursion)> = vec![
        ("identical".into(), "tent vs itself".into(), tent.clone(), tent.clone()),
        ("scaled-tent".into(), "tent vs tent scaled by 9/10".into(), tent.clone(), tent.scaled(&q(9, 10)).expect("valid")),
    ];
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(seed, i as u64));
        let h = sample_excursion_with(&mut rng, ExcursionKind::PiecewiseLinear, 4);
        let mut values = h.values().to_vec();
        for v in values.iter_mut().skip(1) {
            *v = (*v + q(rng.gen_range(-2..=2), 8)).max(Rational::ZERO);
        }
        let g = Excursion::pl(h.breakpoints().to_vec(), values).expect("perturbed excursion is valid");
        pairs.push((format!("pair-{i}"), format!("random piecewise-linear pair with {} pieces", h.pieces()), h, g));
    }
    let results: Vec<_> = pairs
        .into_par_iter()
        .map(|(id, desc, h, g)| {
            let mut inst = Instance::new(id, desc);
            let sup = h.sup_distance(&g);
            let res = Resolution { cuts: shared_cuts(&h, &g, &[]), level_step: None };
            let (ch, cg) = (code_excursion(&h, &res), code_excursion(&g, &res));
            let (gp, exact) = coded_trees_gp(&ch, &cg);
            inst.value("h", crate::io::excursion_to_json(&h));
            inst.value("g", crate::io::excursion_to_json(&g));
            inst.exact("sup_distance", &sup);
            inst.exact("d_gp", &gp);
            inst.value("d_gp_exact", json!(exact));
            inst.value("tree_sizes", json!([ch.space.len(), cg.space.len()]));
            if sup.is_positive() {
                inst.exact("ratio", &(gp / sup));
            }
            let check = inst.check(
                "lipschitz",
                LIPSCHITZ_CLAIM,
                gp <= Rational::from(2) * sup,
                format!("d_GP {} {gp} vs 2 sup = {}", if exact { "=" } else { "<=" }, Rational::from(2) * sup),
            );
            (inst, vec![check], if sup.is_positive() { Some(gp / sup) } else { None })
        })
        .collect();
    let mut ratios = Vec::new();
    for (inst, checks, ratio) in results {
        report.push((inst, checks));
        ratios.extend(ratio);
    }
    ratios.sort();
    if !ratios.is_empty() {
        let pick = |x: &Rational| json!(x.to_decimal());
        report.summary.insert("ratio_min".into(), pick(&ratios[0]));
        report.summary.insert("ratio_median".into(), pick(&ratios[ratios.len() / 2]));
        report.summary.insert("ratio_max".into(), pick(&ratios[ratios.len() - 1]));
        report.summary.insert("ratio_count".into(), json!(ratios.len()));
    }
    report.finish()
}

/// Largest grid size accepted by [`run_counterexample`] (exact box search
/// keeps pair sets in 128-bit masks).
pub const COUNTEREXAMPLE_MAX_N: u32 = 11;

/// The grid indicators `h_n`: tabulates `d_excursion(h_n, h_m)` and d_GP of
/// the coded stars.
pub fn run_counterexample(n_list: &[u32]) -> Result<ExperimentReport> {
    let mut ns: Vec<u32> = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() || ns[0] == 0 || ns[ns.len() - 1] > COUNTEREXAMPLE_MAX_N {
        return Err(invalid("run_counterexample", "n_list", format!("entries must lie in 1..={COUNTEREXAMPLE_MAX_N}")));
    }
    let mut report = ExperimentReport::new("counterexample", 0);
    report.param("n_list", json!(ns));
    let cfg = BoxConfig { max_pairs: (ns[ns.len() - 1] * ns[ns.len() - 1]) as usize };
    let options = GammaOptions::default();
    let zero_pc = Excursion::pc(vec![Rational::ZERO, Rational::ONE], vec![Rational::ZERO], None).expect("valid");

    let singles: Vec<_> = ns
        .par_iter()
        .map(|&n| {
            let h = Excursion::grid_indicator(n).expect("n > 0");
            let mut inst = Instance::new(format!("h{n}-vs-zero"), format!("h_{n} against the zero step function"));
            let gamma = d_gamma(&h, &zero_pc);
            let expected = q(1, 2 * n as i128);
            gamma_values(&mut inst, "d_gamma", &gamma);
            let check = inst.check(
                "gamma-to-zero",
                "d_Gamma(h_n, 0) = 1/(2n)",
                gamma.square == Some(expected * expected),
                format!("squared distance {:?}, expected {}", gamma.square.map(|s| s.to_string()), expected * expected),
            );
            (inst, vec![check])
        })
        .collect();
    singles.into_iter().for_each(|r| report.push(r));

    let pairs: Vec<(u32, u32)> = ns.iter().enumerate().flat_map(|(i, &n)| ns[i..].iter().map(move |&m| (n, m))).collect();
    let rows: Vec<_> = pairs
        .par_iter()
        .map(|&(n, m)| {
            let (h, g) = (Excursion::grid_indicator(n).expect("n > 0"), Excursion::grid_indicator(m).expect("m > 0"));
            let dist = d_excursion(&h, &g, &options);
            let (ch, cg) = (code_excursion(&h, &Resolution::default()), code_excursion(&g, &Resolution::default()));
            let gp = gromov_prohorov(&ch.space, &cg.space, &cfg).expect("coded trees are valid");
            let mut inst = Instance::new(format!("h{n}-h{m}"), format!("h_{n} against h_{m}"));
            inst.value("n", json!(n));
            inst.value("m", json!(m));
            inst.exact("d_lambda", &dist.lambda);
            gamma_values(&mut inst, "d_gamma", &dist.gamma);
            excursion_values(&mut inst, &dist);
            inst.exact("d_gp", &gp.value);
            inst.value("d_gp_exact", json!(gp.exact));
            let mut checks = Vec::new();
            let bound = q(1, 2 * n.min(m) as i128);
            if n == m {
                checks.push(inst.check(
                    "diagonal",
                    "h_n against itself: both distances vanish",
                    dist.lambda.is_zero() && dist.gamma.square == Some(Rational::ZERO) && gp.value.is_zero(),
                    format!("d_excursion = {:?}, d_GP = {}", dist.exact(), gp.value),
                ));
            } else {
                let closed = Rational::ONE - q(n.min(m) as i128, n.max(m) as i128);
                checks.push(inst.check(
                    "lambda-vanishes",
                    "h_n and h_m differ on a null set, so d_lambda = 0",
                    dist.lambda.is_zero(),
                    format!("d_lambda = {}", dist.lambda),
                ));
                checks.push(inst.check(
                    "gamma-bound",
                    "d_Gamma(h_n, h_m) <= 1/(2 min(n, m))",
                    dist.gamma.square.is_some_and(|s| s <= bound * bound),
                    format!("squared d_Gamma {:?}, bound {}", dist.gamma.square.map(|s| s.to_string()), bound),
                ));
                checks.push(inst.check(
                    "star-distance",
                    "coded trees are uniform stars; d_GP = 1 - min(n,m)/max(n,m)",
                    gp.exact && gp.value == closed,
                    format!("d_GP = {} (exact: {}), closed form {closed}", gp.value, gp.exact),
                ));
            }
            (inst, checks, (n, m, dist, gp.value))
        })
        .collect();
    let mut table = Vec::new();
    for (inst, checks, row) in rows {
        report.push((inst, checks));
        table.push(row);
    }

    let positive: Vec<Rational> = table.iter().filter(|r| r.0 != r.1).map(|r| r.3).filter(|v| v.is_positive()).collect();
    match positive.iter().min() {
        Some(c) => {
            report.summary.insert("min_positive_d_gp".into(), crate::io::rational_json(c));
            let off_diagonal_ok = table.iter().filter(|r| r.0 != r.1).all(|r| r.3 >= *c);
            report.assert(
                "gp-bounded-below",
                "d_GP of coded trees stays at least c > 0 for all n != m",
                off_diagonal_ok && *c >= q(1, 10),
                format!("c = {c}"),
            );
        }
        None => report.assert("gp-bounded-below", "d_GP of coded trees stays at least c > 0 for all n != m", ns.len() == 1, "no off-diagonal pair".into()),
    }
    let large: Vec<_> = table.iter().filter(|r| r.0 != r.1 && r.0 >= 6 && r.1 >= 6).collect();
    if !large.is_empty() {
        let worst = large.iter().map(|r| r.2.hi).fold(0.0, f64::max);
        report.assert(
            "excursion-distance-small",
            "d_excursion(h_n, h_m) < 1/5 once n, m >= 6",
            worst < 0.2,
            format!("largest upper bound {worst:.6}"),
        );
    }
    let shrinking = table
        .iter()
        .filter(|r| r.0 != r.1)
        .all(|r| r.2.exact().is_some_and(|d| d <= q(1, 2 * r.0.min(r.1) as i128)));
    report.assert(
        "excursion-distance-shrinks",
        "d_excursion(h_n, h_m) <= 1/(2 min(n, m)), which tends to 0",
        shrinking,
        "checked on every off-diagonal pair".into(),
    );
    Ok(report.finish())
}

fn gamma_values(inst: &mut Instance, key: &str, g: &crate::excursion::GammaValue) {
    match (g.exact(), g.square) {
        (Some(v), _) => inst.exact(key, &v),
        (None, Some(s)) => {
            inst.exact(&format!("{key}_squared"), &s);
            inst.interval(key, g.lo, g.hi);
        }
        (None, None) => inst.interval(key, g.lo, g.hi),
    }
}

fn excursion_values(inst: &mut Instance, d: &ExcursionDistance) {
    match d.exact() {
        Some(v) => inst.exact("d_excursion", &v),
        None => inst.interval("d_excursion", d.lo, d.hi),
    }
}

/// How the reference excursion is perturbed at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Perturbation {
    /// No change.
    Null,
    /// Every value away from `t = 0` raised by `2^-k`.
    ValueJitter,
    /// Interior breakpoints shifted by `2^-k` times a quarter of the
    /// shortest piece, in seeded directions.
    BreakpointJitter,
    /// A spike of height 1/2 and half-width `2^-k` times a quarter of a
    /// piece: far in the uniform metric, close in `d_excursion`.
    Spike,
}

impl Perturbation {
    pub fn name(&self) -> &'static str {
        match self {
            Perturbation::Null => "null",
            Perturbation::ValueJitter => "value-jitter",
            Perturbation::BreakpointJitter => "breakpoint-jitter",
            Perturbation::Spike => "spike",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Perturbation::Null, Perturbation::ValueJitter, Perturbation::BreakpointJitter, Perturbation::Spike]
            .into_iter()
            .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuitySchedule {
    /// Steps `k = 1..=steps`.
    pub steps: u32,
    pub perturbations: Vec<Perturbation>,
    /// Extra cuts `i / grid` shared by both codings.
    pub grid: u32,
}

impl Default for ContinuitySchedule {
    fn default() -> Self {
        ContinuitySchedule {
            steps: 10,
            perturbations: vec![Perturbation::Null, Perturbation::ValueJitter, Perturbation::BreakpointJitter, Perturbation::Spike],
            grid: 8,
        }
    }
}

/// Perturbed excursion at step `k` and an upper bound on d_GP between the
/// two coded trees that the perturbation guarantees.
fn perturb(h: &Excursion, kind: Perturbation, k: u32, signs: &[bool]) -> (Excursion, Rational) {
    let delta = Rational::new(1, 1i128 << k);
    let two = Rational::from(2);
    let b = h.breakpoints();
    match kind {
        Perturbation::Null => (h.clone(), Rational::ZERO),
        Perturbation::ValueJitter => {
            let bump = |v: &[Rational], skip_first: bool| -> Vec<Rational> {
                v.iter().enumerate().map(|(i, x)| if skip_first && i == 0 { *x } else { *x + delta }).collect()
            };
            let g = match h.kind() {
                ExcursionKind::PiecewiseLinear => Excursion::pl(b.to_vec(), bump(h.values(), true)),
                ExcursionKind::PiecewiseConstant => {
                    Excursion::pc(b.to_vec(), bump(h.values(), false), Some(bump(h.breakpoint_values(), true)))
                }
            }
            .expect("raising values keeps an excursion valid");
            (g, two * delta)
        }
        Perturbation::BreakpointJitter => {
            let gap = b.windows(2).map(|w| w[1] - w[0]).min().expect("at least one piece");
            let shift = delta * gap / Rational::from(4);
            let moved: Vec<Rational> = b
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    if i == 0 || i + 1 == b.len() {
                        *t
                    } else if signs[i % signs.len()] {
                        *t + shift
                    } else {
                        *t - shift
                    }
                })
                .collect();
            let g = match h.kind() {
                ExcursionKind::PiecewiseLinear => Excursion::pl(moved, h.values().to_vec()),
                ExcursionKind::PiecewiseConstant => Excursion::pc(moved, h.values().to_vec(), Some(h.breakpoint_values().to_vec())),
            }
            .expect("small shifts keep breakpoints ordered");
            let envelope = match h.kind() {
                ExcursionKind::PiecewiseLinear => two * h.sup_distance(&g),
                // Outside the slivers between old and new breakpoints h and g
                // agree, and so do all infima over intervals with both ends
                // outside them; dropping the slivers costs their length.
                ExcursionKind::PiecewiseConstant => {
                    (two * h.sup_distance(&g)).min(shift * Rational::from(b.len() as i128 - 2))
                }
            };
            (g, envelope)
        }
        Perturbation::Spike => {
            let piece = (0..h.pieces()).find(|&i| h.piece_ends(i).0 != h.piece_ends(i).1).unwrap_or(0);
            let (a, e) = (b[piece], b[piece + 1]);
            let c = (a + e) / two;
            let w = delta * (e - a) / Rational::from(4);
            let height = q(1, 2);
            let g = match h.kind() {
                ExcursionKind::PiecewiseLinear => {
                    let mut breaks = b.to_vec();
                    let mut values = h.values().to_vec();
                    let at = |t: &Rational| h.eval(t).expect("inside [0,1]");
                    breaks.splice(piece + 1..piece + 1, [c - w, c, c + w]);
                    values.splice(piece + 1..piece + 1, [at(&(c - w)), at(&c) + height, at(&(c + w))]);
                    Excursion::pl(breaks, values)
                }
                ExcursionKind::PiecewiseConstant => {
                    let v = h.values()[piece];
                    let mut breaks = b.to_vec();
                    let mut values = h.values().to_vec();
                    let mut bv = h.breakpoint_values().to_vec();
                    breaks.splice(piece + 1..piece + 1, [c - w, c + w]);
                    values.splice(piece + 1..piece + 1, [v + height, v]);
                    bv.splice(piece + 1..piece + 1, [v, v]);
                    Excursion::pc(breaks, values, Some(bv))
                }
            }
            .expect("a spike keeps an excursion valid");
            // Off the spike h and g agree, and h is monotone across it, so
            // infima over intervals containing it agree as well.
            (g, two * w)
        }
    }
}

/// Perturbs `h` along each schedule entry and checks that d_GP of the coded
/// trees stays below an envelope tending to 0 while `d_excursion` decreases.
pub fn run_continuity_check(h: &Excursion, schedule: &ContinuitySchedule, seed: u64) -> Result<ExperimentReport> {
    if schedule.steps == 0 || schedule.steps > 60 {
        return Err(invalid("run_continuity_check", "steps", "must lie in 1..=60"));
    }
    if schedule.grid == 0 {
        return Err(invalid("run_continuity_check", "grid", "must be positive"));
    }
    let mut report = ExperimentReport::new("continuity", seed);
    report.param("h", crate::io::excursion_to_json(h));
    report.param("steps", json!(schedule.steps));
    report.param("perturbations", json!(schedule.perturbations.iter().map(Perturbation::name).collect::<Vec<_>>()));
    report.param("grid", json!(schedule.grid));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs: Vec<bool> = (0..h.breakpoints().len()).map(|_| rng.gen_bool(0.5)).collect();
    let grid: Vec<Rational> = (1..schedule.grid).map(|i| Rational::new(i as i128, schedule.grid as i128)).collect();
    let options = GammaOptions::default();

    let jobs: Vec<(Perturbation, u32)> =
        schedule.perturbations.iter().flat_map(|&p| (1..=schedule.steps).map(move |k| (p, k))).collect();
    let rows: Vec<_> = jobs
        .par_iter()
        .map(|&(kind, k)| {
            let (g, envelope) = perturb(h, kind, k, &signs);
            let dist = d_excursion(h, &g, &options);
            let sup = h.sup_distance(&g);
            let res = Resolution { cuts: shared_cuts(h, &g, &grid), level_step: None };
            let (ch, cg) = (code_excursion(h, &res), code_excursion(&g, &res));
            let (gp, exact) = coded_trees_gp(&ch, &cg);
            let mut inst = Instance::new(format!("{}-{k}", kind.name()), format!("{} at step {k}", kind.name()));
            inst.value("perturbation", json!(kind.name()));
            inst.value("k", json!(k));
            inst.exact("d_lambda", &dist.lambda);
            gamma_values(&mut inst, "d_gamma", &dist.gamma);
            excursion_values(&mut inst, &dist);
            inst.exact("sup_distance", &sup);
            inst.exact("d_gp", &gp);
            inst.value("d_gp_exact", json!(exact));
            inst.exact("envelope", &envelope);
            let check = inst.check(
                "envelope",
                "d_GP(T_h, T_g_k) stays below the envelope of the perturbation",
                gp <= envelope,
                format!("d_GP {} {gp}, envelope {envelope}", if exact { "=" } else { "<=" }),
            );
            (inst, vec![check], (kind, dist, envelope, gp))
        })
        .collect();
    let mut series: BTreeMap<&'static str, Vec<(ExcursionDistance, Rational, Rational)>> = BTreeMap::new();
    for (inst, checks, (kind, dist, envelope, gp)) in rows {
        report.push((inst, checks));
        series.entry(kind.name()).or_default().push((dist, envelope, gp));
    }
    let slack = 2.0 * options.tolerance;
    for (name, rows) in &series {
        let decreasing = rows.windows(2).all(|w| w[1].0.lo <= w[0].0.hi + slack);
        report.assert(
            &format!("{name}: excursion-distance-decreasing"),
            "d_excursion(h, g_k) is nonincreasing in k",
            decreasing,
            rows.iter().map(|r| format!("{:.3e}", r.0.estimate())).collect::<Vec<_>>().join(", "),
        );
        let (first, last) = (&rows[0], &rows[rows.len() - 1]);
        let factor = Rational::from(1i128 << schedule.steps.saturating_sub(2));
        let envelope_decays = rows.windows(2).all(|w| w[1].1 <= w[0].1) && last.1 * factor <= first.1;
        report.assert(
            &format!("{name}: envelope-vanishes"),
            "the envelope is nonincreasing and decays geometrically to 0",
            envelope_decays,
            rows.iter().map(|r| r.1.to_decimal()).collect::<Vec<_>>().join(", "),
        );
        if *name == Perturbation::Null.name() {
            let zero = rows.iter().all(|r| r.2.is_zero() && r.0.hi <= slack);
            report.assert("null: all-zero", "an unperturbed excursion is at distance 0", zero, String::new());
        }
        report.summary.insert(format!("{name}_last_d_gp"), json!(last.2.to_decimal()));
    }
    Ok(report.finish())
}

/// Runs an experiment by name with default parameters; used by tests that
/// compare reruns.
pub fn run_by_name(name: &str, seed: u64) -> Result<ExperimentReport> {
    match name {
        "theorem-check" => run_theorem_check(seed, 20, 3),
        "lipschitz" => Ok(run_lipschitz_check(seed, 10)),
        "counterexample" => run_counterexample(&[2, 3, 4]),
        "continuity" => run_continuity_check(&Excursion::tent(), &ContinuitySchedule { steps: 4, ..Default::default() }, seed),
        other => Err(invalid("run_by_name", "experiment", format!("unknown experiment {other}"))),
    }
}
