//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs under `cargo test` as a harness-less target.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rgn_bench::experiment::{median, to_csv_untimed};
use rgn_bench::{run, ExperimentConfig, ExperimentReport, Init, Problem, Scaling, Solver};
use rgn_core::linalg::{kron, singular_values, Matrix};
use rgn_core::manifold::{
    contract, extend, gauss_newton_residual_check, project_tangent, retract, riemannian_gradient,
    tangent_basis,
};
use rgn_core::measurement::{completion_sample, gaussian_ensemble, rank1_ensemble};
use rgn_core::random::{gaussian_tensor, orthonormal_frame, seeded, standard_normal, Rng};
use rgn_core::rgn::{convergence_order, rgn_step};
use rgn_core::tucker::{hooi, t_hosvd, truncate};
use rgn_core::{
    DenseTensor, MeasurementEnsemble, RgnConfig, Shape, TangentBasis, TangentVector, Truncation,
    TuckerRank, TuckerTensor,
};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Verdict { pass, detail }
    }
}

fn config(problem: Problem, p: usize, r: usize) -> ExperimentConfig {
    ExperimentConfig {
        problem,
        dims: vec![p; 3],
        ranks: vec![r; 3],
        record_timing: true,
        ..ExperimentConfig::default()
    }
}

fn run_ok(cfg: &ExperimentConfig) -> ExperimentReport {
    run(cfg).expect("valid acceptance config")
}

fn failures(report: &ExperimentReport) -> usize {
    report.summary.failures
}

// ---------------------------------------------------------------------------
// Criteria 1-5 (experiment-level)

fn c1_config() -> ExperimentConfig {
    let (p, r) = (30usize, 3usize);
    ExperimentConfig {
        n: Some((5.0 * (p as f64).powf(1.5) * r as f64).round() as usize),
        sigma: 0.0,
        trials: 10,
        max_iter: 12,
        seed: 1000,
        ..config(Problem::Regression, p, r)
    }
}

fn c1(report: &ExperimentReport, secs: f64) -> Verdict {
    let mut reached = 0;
    let mut steep = 0;
    let mut slopes = Vec::new();
    for t in &report.trials {
        if t.first_below(1e-12).is_some_and(|it| it <= 8) {
            reached += 1;
        }
        let slope = convergence_order(&t.errors(), 1e-10, 1e-2);
        if slope.is_some_and(|s| s >= 1.7) {
            steep += 1;
        }
        slopes.push(slope.map_or("-".into(), |s| format!("{s:.2}")));
    }
    let per_seed = secs / report.trials.len() as f64;
    Verdict::new(
        failures(report) == 0 && reached == 10 && steep >= 8 && per_seed <= 120.0,
        format!(
            "n={} reached 1e-12 within 8 iters: {reached}/10; slope>=1.7: {steep}/10 [{}]; {per_seed:.1}s/seed",
            report.config.n.unwrap_or(0),
            slopes.join(" ")
        ),
    )
}

fn c2_configs() -> (ExperimentConfig, ExperimentConfig) {
    let base = ExperimentConfig {
        sigma: 1e-3,
        scaling: Scaling::Paper41,
        trials: 20,
        max_iter: 10,
        tol: 0.0,
        seed: 2000,
        ..config(Problem::Regression, 20, 2)
    };
    let small = ExperimentConfig { n: Some(800), ..base.clone() };
    let large = ExperimentConfig { n: Some(3200), ..base };
    (small, large)
}

fn c2(small: &ExperimentReport, large: &ExperimentReport, secs: f64) -> Verdict {
    let finals = |r: &ExperimentReport| -> Vec<f64> {
        r.trials.iter().filter_map(|t| t.final_rel_rmse).collect()
    };
    let (a, b) = (median(&finals(small)), median(&finals(large)));
    let ratio = match (a, b) {
        (Some(a), Some(b)) if b > 0.0 => a / b,
        _ => f64::NAN,
    };
    Verdict::new(
        failures(small) + failures(large) == 0 && (1.5..=2.7).contains(&ratio) && secs <= 300.0,
        format!(
            "median plateau n=800: {:.3e}, n=3200: {:.3e}, ratio {ratio:.3} (want [1.5, 2.7]); {secs:.1}s",
            a.unwrap_or(f64::NAN),
            b.unwrap_or(f64::NAN)
        ),
    )
}

fn c3_config() -> ExperimentConfig {
    let (p, r) = (100usize, 3usize);
    ExperimentConfig {
        sigma: 1.0,
        lambda_min: Some(10.0 * (p as f64).powf(0.75) * (r as f64).powf(0.25)),
        init: Init::Spectral,
        trials: 20,
        max_iter: 10,
        tol: 0.0,
        seed: 3000,
        ..config(Problem::Svd, p, r)
    }
}

fn c3(report: &ExperimentReport, secs: f64) -> Verdict {
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for t in &report.trials {
        let errs = t.errors();
        if let (Some(&one), Some(&plateau)) = (errs.get(1), errs.last()) {
            worst = worst.max(one / plateau);
            if one <= 2.0 * plateau {
                good += 1;
            }
        }
    }
    Verdict::new(
        failures(report) == 0 && good >= 18 && secs <= 180.0,
        format!("one-step error <= 2x plateau: {good}/20 (worst ratio {worst:.4}); {secs:.1}s"),
    )
}

fn c4_config() -> ExperimentConfig {
    ExperimentConfig {
        rho: Some(0.35),
        sigma: 0.0,
        trials: 10,
        max_iter: 12,
        seed: 4000,
        ..config(Problem::Completion, 50, 3)
    }
}

fn c4(report: &ExperimentReport, secs: f64) -> Verdict {
    let iters: Vec<String> = report
        .trials
        .iter()
        .map(|t| t.first_below(1e-12).map_or("-".into(), |i| i.to_string()))
        .collect();
    let good = report
        .trials
        .iter()
        .filter(|t| t.first_below(1e-12).is_some_and(|i| i <= 10))
        .count();
    Verdict::new(
        good >= 9 && secs <= 180.0,
        format!("below 1e-12 within 10 iters: {good}/10 [{}]; {secs:.1}s", iters.join(" ")),
    )
}

fn c5_configs() -> (ExperimentConfig, ExperimentConfig) {
    let (p, r) = (15usize, 2usize);
    let rgn = ExperimentConfig {
        n: Some((5.0 * (p as f64).powf(1.5) * r as f64).round() as usize),
        trials: 10,
        max_iter: 300,
        tol: 1e-10,
        seed: 5000,
        ..config(Problem::Regression, p, r)
    };
    let iht = ExperimentConfig { solver: Solver::Iht, ..rgn.clone() };
    (rgn, iht)
}

fn c5(rgn: &ExperimentReport, iht: &ExperimentReport) -> Verdict {
    let mut wins = 0;
    let mut pairs = Vec::new();
    for (a, b) in rgn.trials.iter().zip(&iht.trials) {
        let ia = a.first_below(1e-10);
        let ib = b.first_below(1e-10);
        // an IHT run that never gets there counts as slower
        if ia.is_some_and(|x| ib.is_none_or(|y| x < y)) {
            wins += 1;
        }
        let show = |i: Option<usize>| i.map_or(">300".into(), |i| i.to_string());
        pairs.push(format!("{}/{}", show(ia), show(ib)));
    }
    Verdict::new(
        wins == rgn.trials.len() && wins == 10,
        format!("RGN fewer iterations to 1e-10 in {wins}/10 seeds (rgn/iht: {})", pairs.join(" ")),
    )
}

// ---------------------------------------------------------------------------
// Criterion 6 (geometry)

fn random_point(dims: &[usize], ranks: &[usize], rng: &mut Rng) -> TuckerTensor {
    let core = gaussian_tensor(&Shape::new(ranks.to_vec()).unwrap(), 1.0, rng);
    let factors = dims.iter().zip(ranks).map(|(&p, &r)| orthonormal_frame(p, r, rng)).collect();
    TuckerTensor::new(core, factors).unwrap()
}

fn random_tangent(basis: &Arc<TangentBasis>, rng: &mut Rng) -> TangentVector {
    let coords: Vec<f64> = (0..basis.dim()).map(|_| standard_normal(rng)).collect();
    TangentVector::from_coords(basis, &coords).unwrap()
}

fn random_ensembles(shape: &Shape, seed: u64) -> Vec<MeasurementEnsemble> {
    vec![
        gaussian_ensemble(40, shape, 1.0, seed).unwrap(),
        rank1_ensemble(40, shape, seed + 1).unwrap(),
        completion_sample(60, shape, seed + 2).unwrap(),
        MeasurementEnsemble::identity(shape),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn rank_count(m: &Matrix) -> usize {
    let sv = singular_values(m).unwrap();
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > 1e-8 * top).count()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

type Check = (&'static str, bool, String);

fn geometry_checks() -> Vec<Check> {
    let mut rng = seeded(6000);
    let mut out: Vec<Check> = Vec::new();
    let dims = [7usize, 6, 8];
    let ranks = [2usize, 3, 2];
    let shape = Shape::new(dims.to_vec()).unwrap();
    let rank = TuckerRank::new(ranks.to_vec()).unwrap();

    // adjointness of extend/contract and apply/adjoint
    let mut worst_l: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    for trial in 0..20 {
        let x = random_point(&dims, &ranks, &mut rng);
        let basis = tangent_basis(&x).unwrap();
        let v = random_tangent(&basis, &mut rng);
        let z = gaussian_tensor(&shape, 1.0, &mut rng);
        let lhs = extend(&v).inner(&z).unwrap();
        let rhs = v.inner(&contract(&basis, &z).unwrap()).unwrap();
        worst_l = worst_l.max(rel(lhs, rhs));
        for e in random_ensembles(&shape, 100 + 10 * trial) {
            let w = DVector::from_fn(e.n(), |_, _| standard_normal(&mut rng));
            let lhs = e.apply(&z).unwrap().dot(&w);
            let rhs = z.inner(&e.adjoint(&w).unwrap()).unwrap();
            worst_a = worst_a.max(rel(lhs, rhs));
        }
    }
    out.push(("L/L* adjointness", worst_l <= 1e-10, format!("max rel {worst_l:.1e}")));
    out.push(("A/A* adjointness (4 kinds)", worst_a <= 1e-10, format!("max rel {worst_a:.1e}")));

    // projector
    let mut worst_idem: f64 = 0.0;
    let mut worst_sa: f64 = 0.0;
    for _ in 0..20 {
        let basis = tangent_basis(&random_point(&dims, &ranks, &mut rng)).unwrap();
        let z1 = gaussian_tensor(&shape, 1.0, &mut rng);
        let z2 = gaussian_tensor(&shape, 1.0, &mut rng);
        let p1 = project_tangent(&basis, &z1).unwrap();
        let pp1 = project_tangent(&basis, &p1).unwrap();
        worst_idem = worst_idem.max(pp1.sub(&p1).unwrap().hs_norm() / p1.hs_norm());
        let a = p1.inner(&z2).unwrap();
        let b = z1.inner(&project_tangent(&basis, &z2).unwrap()).unwrap();
        worst_sa = worst_sa.max((a - b).abs() / (z1.hs_norm() * z2.hs_norm()));
    }
    out.push((
        "projector idempotent and self-adjoint",
        worst_idem <= 1e-10 && worst_sa <= 1e-10,
        format!("idempotence {worst_idem:.1e}, self-adjointness {worst_sa:.1e}"),
    ));

    // Kronecker form of the mode-k unfolding of a Tucker tensor
    let mut worst_k: f64 = 0.0;
    for _ in 0..20 {
        let x = random_point(&dims, &ranks, &mut rng);
        let dense = x.dense();
        for k in 0..3 {
            let mut chain: Option<Matrix> = None;
            for j in (0..3).rev().filter(|&j| j != k) {
                chain = Some(match chain {
                    None => x.factor(j).clone(),
                    Some(c) => kron(&c, x.factor(j)),
                });
            }
            let expect = x.factor(k) * x.core().matricize(k).unwrap() * chain.unwrap().transpose();
            let got = dense.matricize(k).unwrap();
            worst_k = worst_k.max((&got - &expect).norm() / expect.norm());
        }
    }
    out.push(("Kronecker unfolding identity", worst_k <= 1e-12, format!("max rel {worst_k:.1e}")));

    // tangent vectors have Tucker rank at most 2r
    let mut bad = 0;
    for _ in 0..100 {
        let x = random_point(&dims, &ranks, &mut rng);
        let basis = tangent_basis(&x).unwrap();
        let v = extend(&random_tangent(&basis, &mut rng));
        let sum = v.add(&x.dense()).unwrap();
        for k in 0..3 {
            if rank_count(&v.matricize(k).unwrap()) > 2 * ranks[k]
                || rank_count(&sum.matricize(k).unwrap()) > 2 * ranks[k]
            {
                bad += 1;
            }
        }
    }
    out.push(("rank <= 2r on 100 tangent vectors", bad == 0, format!("{bad} violations")));

    // normal component of X* at a nearby point is quadratic in the distance
    let mut bad = 0;
    let mut tightest: f64 = 0.0;
    for i in 0..50 {
        let star = random_point(&dims, &ranks, &mut rng);
        let xs = star.dense();
        let eps = 10f64.powf(-1.0 - 3.0 * i as f64 / 50.0);
        let noise = gaussian_tensor(&shape, 1.0, &mut rng);
        let xt = truncate(&xs.add(&noise.scaled(eps * xs.hs_norm() / noise.hs_norm())).unwrap(), &rank, Truncation::StHosvd)
            .unwrap();
        let basis = tangent_basis(&xt).unwrap();
        let normal = xs.sub(&project_tangent(&basis, &xs).unwrap()).unwrap().hs_norm();
        let lambda = (0..3)
            .map(|k| singular_values(&xs.matricize(k).unwrap()).unwrap()[ranks[k] - 1])
            .fold(f64::INFINITY, f64::min);
        let dist = xt.dense().sub(&xs).unwrap().hs_norm();
        let bound = 3.0 * dist * dist / lambda;
        tightest = tightest.max(normal / bound);
        if normal > bound + 1e-12 * xs.hs_norm() {
            bad += 1;
        }
    }
    out.push((
        "normal-component bound on 50 pairs",
        bad == 0,
        format!("{bad} violations, max ratio to bound {tightest:.3}"),
    ));

    // retraction agrees with the identity to first order
    let mut slopes = Vec::new();
    for method in [Truncation::StHosvd, Truncation::THosvd] {
        for _ in 0..5 {
            let x = random_point(&dims, &ranks, &mut rng);
            let basis = tangent_basis(&x).unwrap();
            let eta = random_tangent(&basis, &mut rng);
            let eta = eta.scaled(x.dense().hs_norm() / eta.norm());
            let base = contract(&basis, &x.dense()).unwrap();
            let (mut lt, mut le) = (Vec::new(), Vec::new());
            for h in 0..7 {
                let t = 1e-3 * 0.5f64.powi(h);
                let v = base.add_scaled(t, &eta).unwrap();
                let r = retract(&v, &rank, method).unwrap();
                let err = r.dense().sub(&extend(&v)).unwrap().hs_norm();
                lt.push(t.ln());
                le.push(err.ln());
            }
            slopes.push(slope(&lt, &le));
        }
    }
    let ok = slopes.iter().all(|s| (s - 2.0).abs() <= 0.2);
    let shown: Vec<String> = slopes.iter().map(|s| format!("{s:.3}")).collect();
    out.push(("retraction second-order defect", ok, format!("slopes [{}]", shown.join(" "))));

    // truncations are within sqrt(d) of the best approximation (HOOI witness)
    let cube = Shape::cube(8, 3).unwrap();
    let r2 = TuckerRank::uniform(2, 3).unwrap();
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let t = if i % 2 == 0 {
            gaussian_tensor(&cube, 1.0, &mut rng)
        } else {
            let low = random_point(&[8, 8, 8], &[2, 2, 2], &mut rng).dense();
            low.add(&gaussian_tensor(&cube, 0.05, &mut rng)).unwrap()
        };
        let (best, _) = hooi(&t, &r2, 50).unwrap();
        let best_err = best.dense().sub(&t).unwrap().hs_norm();
        for method in [Truncation::THosvd, Truncation::StHosvd] {
            let err = truncate(&t, &r2, method).unwrap().dense().sub(&t).unwrap().hs_norm();
            worst = worst.max(err / best_err);
            if err > 3f64.sqrt() * best_err * (1.0 + 1e-12) {
                bad += 1;
            }
        }
    }
    out.push((
        "quasi-projection sqrt(d) bound on 50 instances",
        bad == 0,
        format!("{bad} violations, worst ratio {worst:.4}"),
    ));

    // closed form for the identity design vs the generic least-squares path
    let cfg = RgnConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let star = random_point(&dims, &ranks, &mut rng).dense();
        let y = star.add(&gaussian_tensor(&shape, 0.01, &mut rng)).unwrap();
        let x = t_hosvd(&y, &rank).unwrap();
        let e = MeasurementEnsemble::identity(&shape);
        let yv = DVector::from_column_slice(y.data());
        let step = rgn_step(&x, &e, &yv, &rank, &cfg).unwrap();
        let closed = contract(&step.basis, &y).unwrap();
        let diff = step.ls.vector.add_scaled(-1.0, &closed).unwrap().norm() / closed.norm();
        worst = worst.max(diff);
    }
    out.push(("identity-design closed form vs LS", worst <= 1e-10, format!("max rel {worst:.1e}")));

    // least-squares solution satisfies the Gauss-Newton equation
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let star = random_point(&dims, &ranks, &mut rng).dense();
        let e = gaussian_ensemble(400, &shape, 1.0 / 400.0, 7000 + i).unwrap();
        let mut y = e.apply(&star).unwrap();
        y.iter_mut().for_each(|v| *v += 0.01 * standard_normal(&mut rng));
        let x = random_point(&dims, &ranks, &mut rng);
        let step = rgn_step(&x, &e, &y, &rank, &cfg).unwrap();
        let resid = gauss_newton_residual_check(&step.basis, &e, &y, &step.half_point()).unwrap();
        let scale = contract(&step.basis, &e.adjoint(&y).unwrap()).unwrap().norm();
        worst = worst.max(resid / scale);
    }
    out.push(("Gauss-Newton stationarity", worst <= 1e-8, format!("max rel {worst:.1e}")));

    // Riemannian gradient vs forward differences along the retraction
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let star = random_point(&dims, &ranks, &mut rng).dense();
        let e = gaussian_ensemble(300, &shape, 1.0 / 300.0, 8000 + i).unwrap();
        let y = e.apply(&star).unwrap();
        let x = random_point(&dims, &ranks, &mut rng);
        let f = |t: &DenseTensor| 0.5 * (e.apply(t).unwrap() - &y).norm_squared();
        let basis = tangent_basis(&x).unwrap();
        let g = riemannian_gradient(&basis, &e, &y, &x.dense()).unwrap();
        let eta = random_tangent(&basis, &mut rng);
        let eta = eta.scaled(1.0 / eta.norm());
        let t = 1e-6;
        let moved = retract(&contract(&basis, &x.dense()).unwrap().add_scaled(t, &eta).unwrap(), &rank, Truncation::StHosvd)
            .unwrap();
        let fd = (f(&moved.dense()) - f(&x.dense())) / t;
        let exact = g.inner(&eta).unwrap();
        worst = worst.max((fd - exact).abs() / exact.abs());
    }
    out.push(("gradient vs finite differences", worst <= 1e-4, format!("max rel {worst:.1e}")));
    out
}

fn c6() -> (Verdict, Vec<Check>) {
    let started = Instant::now();
    let checks = geometry_checks();
    let secs = started.elapsed().as_secs_f64();
    let failed = checks.iter().filter(|c| !c.1).count();
    (
        Verdict::new(
            failed == 0 && secs <= 300.0,
            format!("{} checks, {failed} failed; {secs:.1}s", checks.len()),
        ),
        checks,
    )
}

// ---------------------------------------------------------------------------
// Criterion 7 (restricted isometry probe)

fn c7() -> Verdict {
    let shape = Shape::cube(8, 3).unwrap();
    let r1 = TuckerRank::uniform(1, 3).unwrap();
    let (lo, hi) = MeasurementEnsemble::identity(&shape).trip_probe(&r1, 100, 1).unwrap();
    let identity_ok = (lo - 1.0).abs() <= 1e-12 && (hi - 1.0).abs() <= 1e-12;
    let mut spreads = Vec::new();
    for n in [50usize, 500, 5000] {
        let reps: Vec<f64> = (0..5)
            .map(|rep| {
                let e = gaussian_ensemble(n, &shape, 1.0 / n as f64, 7700 + rep).unwrap();
                let (lo, hi) = e.trip_probe(&r1, 50, 7800 + rep).unwrap();
                hi - lo
            })
            .collect();
        spreads.push(median(&reps).unwrap());
    }
    let monotone = spreads.windows(2).all(|w| w[1] < w[0]);
    Verdict::new(
        identity_ok && monotone,
        format!(
            "identity ratios [{lo:.17}, {hi:.17}]; gaussian median spread n=50/500/5000: {:.4} {:.4} {:.4}",
            spreads[0], spreads[1], spreads[2]
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    // `cargo test -- <filter>` passes arguments through; honour `--list`
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let timed = |cfg: &ExperimentConfig| {
        let started = Instant::now();
        let report = run_ok(cfg);
        (report, started.elapsed().as_secs_f64())
    };
    let mut lines: Vec<(&str, Verdict)> = Vec::new();
    let mut csvs: Vec<(ExperimentConfig, String)> = Vec::new();
    let mut keep = |cfg: &ExperimentConfig, r: &ExperimentReport| csvs.push((cfg.clone(), to_csv_untimed(r)));

    let cfg1 = c1_config();
    let (r1, s1) = timed(&cfg1);
    keep(&cfg1, &r1);
    lines.push(("1 quadratic convergence, noiseless regression", c1(&r1, s1)));

    let (cfg2a, cfg2b) = c2_configs();
    let started = Instant::now();
    let r2a = run_ok(&cfg2a);
    let r2b = run_ok(&cfg2b);
    keep(&cfg2a, &r2a);
    keep(&cfg2b, &r2b);
    lines.push(("2 noisy plateau scaling", c2(&r2a, &r2b, started.elapsed().as_secs_f64())));

    let cfg3 = c3_config();
    let (r3, s3) = timed(&cfg3);
    keep(&cfg3, &r3);
    lines.push(("3 tensor SVD one-step behavior", c3(&r3, s3)));

    let cfg4 = c4_config();
    let (r4, s4) = timed(&cfg4);
    keep(&cfg4, &r4);
    lines.push(("4 completion quadratic convergence", c4(&r4, s4)));

    let (cfg5a, cfg5b) = c5_configs();
    let r5a = run_ok(&cfg5a);
    let r5b = run_ok(&cfg5b);
    keep(&cfg5a, &r5a);
    keep(&cfg5b, &r5b);
    lines.push(("5 RGN vs IHT iteration counts", c5(&r5a, &r5b)));

    let (v6, checks) = c6();
    lines.push(("6 geometry property suite", v6));
    lines.push(("7 TRIP probe sanity", c7()));

    let mut same = 0;
    for (cfg, csv) in &csvs {
        if to_csv_untimed(&run_ok(cfg)) == *csv {
            same += 1;
        }
    }
    lines.push((
        "8 determinism of criteria 1-5",
        Verdict::new(same == csvs.len(), format!("{same}/{} reruns byte-identical", csvs.len())),
    ));

    for (name, ok, detail) in &checks {
        println!("    [{}] {name}: {detail}", if *ok { "ok" } else { "FAILED" });
    }
    let mut all = true;
    for (name, v) in &lines {
        all &= v.pass;
        println!("{} criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
