//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::time::Instant;

use anonvec_core::anonymizer::{anonymize, select_farthest, selected_indices, AnonymizationPolicy};
use anonvec_core::asv::eer_from_scores;
use anonvec_core::coral::{
    coral_apply_set, coral_fit, coral_fit_sampled, coral_objective, load_transform, save_transform,
    transfer_matrix, DenormMode,
};
use anonvec_core::harness::{run_ignorant, run_lazy_informed, run_unprotected, Scenario};
use anonvec_core::seed::{rng_from_seed, Rng as SeededRng};
use anonvec_core::stats::rel_frobenius;
use anonvec_core::{load_vector_set, save_vector_set, DMatrix, DVector, SpeakerVector, VectorSet};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond { Ok(detail) } else { Err(detail) }
}

fn correlated_set(rng: &mut SeededRng, label: &str, n: usize, d: usize) -> VectorSet {
    let mix = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let offset = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
    let mut set = VectorSet::new(d).unwrap();
    for i in 0..n {
        let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = &mix * g + &offset;
        set.push(SpeakerVector::new(format!("{label}{i}"), format!("{label}s{i}"), label, v.as_slice().to_vec()).unwrap())
            .unwrap();
    }
    set
}

fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(101);
    let source = correlated_set(&mut rng, "src", 5000, 16);
    let target = correlated_set(&mut rng, "tgt", 5000, 16);
    let start = Instant::now();
    let t = coral_fit(&source, &target, 0.0).map_err(|e| e.to_string())?;
    let mapped = coral_apply_set(&t, &source, DenormMode::Target).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let rows = |s: &VectorSet| s.iter().map(|v| v.values().to_vec()).collect::<Vec<_>>();
    let to_m = |c: Vec<Vec<f64>>| DMatrix::from_fn(16, 16, |i, j| c[i][j]);
    let got = to_m(empirical_covariance(&rows(&mapped)));
    let want = to_m(empirical_covariance(&rows(&target)));
    let err = rel_frobenius(&got, &want);
    check(err < 1e-6 && elapsed < 1.0, format!("rel_frobenius={err:.3e} runtime={elapsed:.3}s"))
}

fn random_pd(rng: &mut SeededRng, d: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let floor = 10f64.powf(rng.random_range(-3.0..0.0));
    &b * b.transpose() + DMatrix::identity(d, d) * floor
}

fn criterion_2() -> Outcome {
    let mut rng = rng_from_seed(202);
    let mut worst_margin = f64::INFINITY;
    for _ in 0..100 {
        let d = rng.random_range(1..=8);
        let cs = random_pd(&mut rng, d);
        let ct = random_pd(&mut rng, d);
        let a = transfer_matrix(&cs, &ct).map_err(|e| e.to_string())?;
        let best = coral_objective(&a, &cs, &ct);
        for _ in 0..1000 {
            let eps = 10f64.powf(rng.random_range(-4.0..0.0));
            let noise = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let other = coral_objective(&(&a + noise * eps), &cs, &ct);
            worst_margin = worst_margin.min(other - best);
            if best > other + 1e-9 {
                return Err(format!("objective {best:.3e} exceeds perturbed {other:.3e} at d={d}"));
            }
        }
    }
    Ok(format!("100 pairs x 1000 perturbations, min margin {worst_margin:.3e}"))
}

fn criterion_3() -> Outcome {
    let eer = |g: &[f64], i: &[f64]| eer_from_scores(g, i).map(|e| e.eer).map_err(|e| e.to_string());

    let a = eer(&[0.9, 0.8, 0.7], &[0.3, 0.2, 0.1])?;
    if a != 0.0 {
        return Err(format!("separable eer={a}"));
    }

    let mut rng = rng_from_seed(303);
    let same: Vec<f64> = (0..501).map(|_| rng.random::<f64>()).collect();
    let b = eer(&same, &same)?;
    if (b - 0.5).abs() > 1.0 / (2.0 * same.len() as f64) {
        return Err(format!("identical eer={b}"));
    }

    let g: Vec<f64> = Normal::new(1.0, 1.0).unwrap().sample_iter(&mut rng).take(100_000).collect();
    let i: Vec<f64> = Normal::new(-1.0, 1.0).unwrap().sample_iter(&mut rng).take(100_000).collect();
    let c = eer(&g, &i)?;
    if (c - 0.1587).abs() > 0.005 {
        return Err(format!("gaussian eer={c}"));
    }

    for inst in 0..200 {
        let ng = rng.random_range(1..60);
        let ni = rng.random_range(1..60);
        let grid = rng.random_bool(0.5);
        let mut draw = |shift: f64| {
            let x = rng.random_range(-1.0..1.0) + shift;
            if grid { (x * 5.0f64).round() / 5.0 } else { x }
        };
        let g: Vec<f64> = (0..ng).map(|_| draw(0.3)).collect();
        let i: Vec<f64> = (0..ni).map(|_| draw(0.0)).collect();
        let got = eer(&g, &i)?;
        let want = brute_force_eer(&g, &i);
        if (got - want).abs() > 1e-12 {
            return Err(format!("instance {inst}: {got} vs brute force {want}"));
        }
    }
    Ok(format!("separable=0 identical={b:.4} gaussian={c:.4} brute_force=200/200"))
}

fn criterion_4() -> Outcome {
    let mut rng = rng_from_seed(404);
    for inst in 0..200 {
        let d = rng.random_range(2..8);
        let pool = random_pool(&mut rng, d);
        let source: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = rng.random_range(1..=pool.len());
        let n = rng.random_range(1..=k);
        let want = oracle_farthest(&source, &pool, k);
        let got = select_farthest(&source, &pool, k).map_err(|e| e.to_string())?;
        if got != want {
            return Err(format!("instance {inst}: selection differs"));
        }
        let policy = AnonymizationPolicy::new(k, n, rng.random());
        let chosen = selected_indices(&source, &pool, &policy).map_err(|e| e.to_string())?;
        let mut uniq = chosen.clone();
        uniq.dedup();
        if uniq.len() != n || !chosen.iter().all(|i| want.contains(i)) {
            return Err(format!("instance {inst}: chosen indices are not an n-subset of the farthest set"));
        }
        let v = SpeakerVector::new("u", "s", "x", source.clone()).unwrap();
        let out = anonymize(&v, &pool, &policy).map_err(|e| e.to_string())?;
        for j in 0..d {
            let mean = chosen.iter().map(|&i| pool.vectors()[i].values()[j]).sum::<f64>() / n as f64;
            if (out.values()[j] - mean).abs() > 1e-12 {
                return Err(format!("instance {inst}: output is not the subset mean"));
            }
        }
    }
    Ok("200/200 instances".into())
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let c = corpus(7);
    let lazy_cfg = lazy_config(&c, Some(10), Some(10));
    let err = |e: anonvec_core::Error| e.to_string();
    let unprotected = run_unprotected(&lazy_cfg.with_scenario(Scenario::Unprotected)).map_err(err)?;
    let ignorant = run_ignorant(&lazy_cfg.with_scenario(Scenario::Ignorant)).map_err(err)?;
    let lazy = run_lazy_informed(&lazy_cfg).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    let (u, i, l) = (unprotected.mean_eer, ignorant.mean_eer, lazy.mean_eer);
    check(
        u < 0.05 && i > 0.30 && u < l && l < i && elapsed < 30.0,
        format!("unprotected={u:.4} ignorant={i:.4} lazy_informed={l:.4} runs={} runtime={elapsed:.1}s", lazy.runs.len()),
    )
}

fn binomial_upper_tail(n: u64, k: u64) -> f64 {
    let mut total = 0.0;
    for j in k..=n {
        let mut c = 1.0;
        for m in 0..j {
            c = c * (n - m) as f64 / (m + 1) as f64;
        }
        total += c;
    }
    total / 2f64.powi(n as i32)
}

fn criterion_6() -> Outcome {
    let c = corpus(8);
    let reps = 24u64;
    let mut wins = 0;
    let (mut sum10, mut sum100) = (0.0, 0.0);
    let dist = |n: usize, r: u64| -> Result<f64, String> {
        let a = coral_fit_sampled(&c.english, &c.general, n, 1.0, 1000 + 2 * r).map_err(|e| e.to_string())?;
        let b = coral_fit_sampled(&c.english, &c.general, n, 1.0, 1001 + 2 * r).map_err(|e| e.to_string())?;
        Ok((&a.matrix - &b.matrix).norm())
    };
    for r in 0..reps {
        let d10 = dist(10, r)?;
        let d100 = dist(100, r)?;
        sum10 += d10;
        sum100 += d100;
        if d10 > d100 {
            wins += 1;
        }
    }
    let p = binomial_upper_tail(reps, wins);
    let (m10, m100) = (sum10 / reps as f64, sum100 / reps as f64);
    check(
        m10 > m100 && p < 0.05,
        format!("mean_dist(N=10)={m10:.3} mean_dist(N=100)={m100:.3} wins={wins}/{reps} sign_test_p={p:.2e}"),
    )
}

fn artifacts_text(cfg: &anonvec_core::ScenarioConfig) -> Result<(String, String, String), String> {
    let err = |e: anonvec_core::Error| e.to_string();
    let report = run_lazy_informed(cfg).map_err(err)?.to_text(&[]);
    let mut user = String::new();
    let mut attacker = String::new();
    for run in 0..cfg.runs {
        let a = cfg.execute_run(run).map_err(err)?;
        user.push_str(&a.user_test.as_ref().unwrap().to_text(&[]));
        user.push_str(&a.user_transform.as_ref().unwrap().to_text(&[]));
        attacker.push_str(&a.attacker_enroll.as_ref().unwrap().to_text(&[]));
        attacker.push_str(&a.attacker_transform.as_ref().unwrap().to_text(&[]));
        user.push_str(&a.report.to_text(&[]));
    }
    Ok((report, user, attacker))
}

fn criterion_7() -> Outcome {
    let c = corpus(9);
    let mut cfg = lazy_config(&c, Some(10), Some(100));
    cfg.runs = 3;
    let first = artifacts_text(&cfg)?;
    let second = artifacts_text(&cfg)?;
    if first != second {
        return Err("repeated run differs".into());
    }
    let mut changed = cfg.clone();
    changed.user.anonymization.seed = 99;
    changed.user.coral.as_mut().unwrap().seed = 98;
    let third = artifacts_text(&changed)?;
    check(
        third.1 != first.1 && third.2 == first.2,
        format!(
            "repeat byte-identical ({} bytes); user seed change: test side changed={}, attacker side unchanged={}",
            first.0.len() + first.1.len() + first.2.len(),
            third.1 != first.1,
            third.2 == first.2
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = rng_from_seed(808);
    let p1 = dir.path().join("a.txt");
    let p2 = dir.path().join("b.txt");
    let read = |p: &std::path::Path| std::fs::read(p).map_err(|e| e.to_string());
    for inst in 0..100u64 {
        let set = random_set(inst, rng.random_range(0..30), rng.random_range(1..24));
        save_vector_set(&set, &p1).map_err(|e| e.to_string())?;
        let back = load_vector_set(&p1).map_err(|e| e.to_string())?;
        save_vector_set(&back, &p2).map_err(|e| e.to_string())?;
        if read(&p1)? != read(&p2)? || back != set {
            return Err(format!("dataset instance {inst} not stable"));
        }

        let d = rng.random_range(1..10);
        let (ns, nt) = (rng.random_range(d + 2..60), rng.random_range(d + 2..60));
        let s = correlated_set(&mut rng, "s", ns, d);
        let t = correlated_set(&mut rng, "t", nt, d);
        let lambda = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..2.0) };
        let mut transform = coral_fit(&s, &t, lambda).map_err(|e| e.to_string())?;
        if rng.random_bool(0.5) {
            transform.seed = Some(rng.random());
        }
        let comments = vec![format!("instance {inst}")];
        save_transform(&transform, &p1, &comments).map_err(|e| e.to_string())?;
        let back = load_transform(&p1).map_err(|e| e.to_string())?;
        save_transform(&back, &p2, &comments).map_err(|e| e.to_string())?;
        if read(&p1)? != read(&p2)? || back != transform {
            return Err(format!("transform instance {inst} not stable"));
        }
    }
    Ok("100/100 dataset and transform instances".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("coral exactness", criterion_1),
        ("coral minimizer", criterion_2),
        ("eer correctness", criterion_3),
        ("anonymizer oracle equivalence", criterion_4),
        ("trend reproduction", criterion_5),
        ("coral-n randomness", criterion_6),
        ("determinism", criterion_7),
        ("round-trip fidelity", criterion_8),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let (status, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {name}: {status} ({detail})", n + 1);
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
