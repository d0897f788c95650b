//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use moran_dim::expansion::{expand, synthesize_quasinormal, DigitStats, ExpansionKind};
use moran_dim::family::ContractionFamily;
use moran_dim::formulas::{dim_f_beta, dim_f_mary, grad_delta};
use moran_dim::frequency::{gauss_weight, FrequencyVector};
use moran_dim::measures::{eta_phi, gauss_density, gauss_grid, ulam_invariant_density};
use moran_dim::moran::{box_count, fit_dimension, realize, MoranSpec};
use moran_dim::numeric::ExactReal;
use moran_dim::pressure::{solve_delta_k, solve_delta_kn, PressureProblem};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Debug>(e: E) -> String {
    format!("error: {e:?}")
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn random_geometric_problem(rng: &mut ChaCha8Rng) -> PressureProblem {
    let k = rng.gen_range(2..=4);
    let mut fams = BTreeMap::new();
    for i in 0..k {
        let r = rng.gen_range(0.1..0.5);
        let a = rng.gen_range(0.5..1.5f64).min(0.95 / r);
        fams.insert(i as u64, ContractionFamily::geometric(a, r).unwrap());
    }
    let eta = FrequencyVector::finite(0, random_simplex(rng, k)).unwrap();
    PressureProblem::new(fams, eta).unwrap()
}

fn random_mixed_problem(rng: &mut ChaCha8Rng) -> PressureProblem {
    let k = rng.gen_range(2..=3);
    let mut fams = BTreeMap::new();
    for i in 0..k {
        let fam = if rng.gen_bool(0.5) {
            let r = rng.gen_range(0.1..0.6);
            ContractionFamily::geometric(rng.gen_range(0.3..1.2f64).min(0.95 / r), r).unwrap()
        } else {
            let m = rng.gen_range(2..6);
            ContractionFamily::explicit((0..m).map(|_| rng.gen_range(0.05..0.6)).collect()).unwrap()
        };
        fams.insert(i as u64, fam);
    }
    let eta = FrequencyVector::finite(0, random_simplex(rng, k)).unwrap();
    PressureProblem::new(fams, eta).unwrap()
}

fn c1_stationary() -> Outcome {
    let start = Instant::now();
    let p = PressureProblem::uniform(
        ContractionFamily::explicit(vec![0.25, 0.25]).map_err(fail)?,
        FrequencyVector::finite(0, vec![1.0]).map_err(fail)?,
    )
    .map_err(fail)?;
    let h = p.solve_h(1e-14).map_err(fail)?.h;
    let tree = realize(&MoranSpec::stationary(vec![0.25, 0.25], 8).map_err(fail)?).map_err(fail)?;
    let fit = fit_dimension(&tree).map_err(fail)?;
    let secs = start.elapsed().as_secs_f64();
    check(
        (h - 0.5).abs() <= 1e-12 && (fit.s_fit - h).abs() <= 1e-9 && secs < 1.0,
        format!("h = {h:.15}, s_fit = {:.15}, {secs:.3} s", fit.s_fit),
    )
}

fn c2_geometric() -> Outcome {
    let want = 2f64.ln() / 3f64.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let eta = if trial == 0 {
            vec![0.5, 0.5]
        } else {
            random_simplex(&mut rng, 2)
        };
        let g = ContractionFamily::geometric(1.0, 1.0 / 3.0).map_err(fail)?;
        let p = PressureProblem::new(
            BTreeMap::from([(0, g.clone()), (1, g)]),
            FrequencyVector::finite(0, eta).map_err(fail)?,
        )
        .map_err(fail)?;
        worst = worst.max((p.solve_h(1e-14).map_err(fail)?.h - want).abs());
    }
    check(worst <= 1e-10, format!("max |h − log2/log3| = {worst:.2e} over 10 η"))
}

fn c3_ladder() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ms = [2, 4, 8, 16, 32, 64];
    let mut worst_gap = 0.0f64;
    let mut monotone = true;
    for _ in 0..20 {
        let p = random_geometric_problem(&mut rng);
        let ladder = p.ladder(&ms, 1e-13).map_err(fail)?;
        monotone &= ladder.windows(2).all(|w| w[1].h >= w[0].h);
        let h = p.solve_h(1e-13).map_err(fail)?.h;
        worst_gap = worst_gap.max((ladder.last().unwrap().h - h).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        monotone && worst_gap <= 1e-4 && secs < 10.0,
        format!("monotone = {monotone}, max |h_64 − h| = {worst_gap:.2e}, {secs:.2} s"),
    )
}

fn c4_shape() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = 0usize;
    let mut worst_residual = 0.0f64;
    for _ in 0..20 {
        let p = random_mixed_problem(&mut rng);
        let ts: Vec<f64> = (0..200).map(|k| 0.02 + 3.0 * k as f64 / 199.0).collect();
        let vals = p.pressure_grid(&ts, 1e-10).map_err(fail)?;
        for w in vals.windows(2) {
            if w[1].value >= w[0].value + w[0].error_bound + w[1].error_bound {
                bad += 1;
            }
        }
        for w in vals.windows(3) {
            let slack = w[0].error_bound + 2.0 * w[1].error_bound + w[2].error_bound + 1e-13;
            if 2.0 * w[1].value > w[0].value + w[2].value + slack {
                bad += 1;
            }
        }
        let h = p.solve_h(1e-14).map_err(fail)?.h;
        worst_residual = worst_residual.max(p.pressure(h, 1e-12).map_err(fail)?.value.abs());
    }
    check(
        bad == 0 && worst_residual <= 1e-10,
        format!("{bad} shape violations, max |P(h)| = {worst_residual:.2e}"),
    )
}

fn c5_covering() -> Outcome {
    let g0 = ContractionFamily::geometric(1.0, 0.3).map_err(fail)?;
    let g1 = ContractionFamily::explicit(vec![0.2, 0.35, 0.1]).map_err(fail)?;
    let fams = BTreeMap::from([(0, g0), (1, g1)]);
    let mut worst_exact = 0.0f64;
    for (eta, period) in [
        (vec![0.5, 0.5], vec![0u64, 1]),
        (vec![1.0 / 3.0, 2.0 / 3.0], vec![1, 0, 1]),
    ] {
        let n = 999 - 999 % period.len();
        let omega: Vec<u64> = period.iter().cycle().take(n).copied().collect();
        let p = PressureProblem::new(fams.clone(), FrequencyVector::finite(0, eta).map_err(fail)?)
            .map_err(fail)?
            .with_omega(&omega);
        let h = p.solve_h(1e-13).map_err(fail)?.h;
        worst_exact = worst_exact.max((p.covering_sum(h, n).map_err(fail)? - 1.0).abs());
    }
    let eta = FrequencyVector::finite(0, vec![0.3, 0.7]).map_err(fail)?;
    let omega = synthesize_quasinormal(&[0, 1], &eta, 10_000, 5).map_err(fail)?;
    let p = PressureProblem::new(fams, eta).map_err(fail)?.with_omega(&omega);
    let h = p.solve_h(1e-14).map_err(fail)?.h;
    let q = (p.covering_sum(h, 10_000).map_err(fail)?.ln() / 10_000.0).exp();
    check(
        worst_exact <= 1e-8 && (q - 1.0).abs() <= 1e-2,
        format!(
            "exact-frequency |Σ − 1| = {worst_exact:.2e}, quasinormal |Σ^(1/n) − 1| = {:.2e}",
            (q - 1.0).abs()
        ),
    )
}

fn c6_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let step = 1e-5;
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let k = 2 + trial % 2;
        let mut fams = BTreeMap::new();
        for i in 0..k {
            let r = rng.gen_range(0.1..0.6);
            fams.insert(
                i as u64,
                ContractionFamily::geometric(rng.gen_range(0.4..1.2f64).min(0.95 / r), r).unwrap(),
            );
        }
        let eta = random_simplex(&mut rng, k);
        let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = v.iter().sum::<f64>() / k as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let at = |e: Vec<f64>| -> Result<f64, String> {
            let p = PressureProblem::new(fams.clone(), FrequencyVector::finite(0, e).map_err(fail)?).map_err(fail)?;
            Ok(p.solve_h(1e-13).map_err(fail)?.h)
        };
        let plus: Vec<f64> = eta.iter().zip(&v).map(|(a, b)| a + step * b).collect();
        let minus: Vec<f64> = eta.iter().zip(&v).map(|(a, b)| a - step * b).collect();
        let fd = (at(plus)? - at(minus)?) / (2.0 * step);
        let p = PressureProblem::new(fams.clone(), FrequencyVector::finite(0, eta).map_err(fail)?).map_err(fail)?;
        let g = grad_delta(&p, 1e-13).map_err(fail)?;
        worst = worst.max((g.directional(&v) - fd).abs());
    }
    check(worst <= 1e-6, format!("max |∇Δ·v − FD| = {worst:.2e} over 10 configs"))
}

fn c7_closed_forms() -> Outcome {
    let mary = dim_f_mary(2, &FrequencyVector::finite(0, vec![0.9, 0.1]).map_err(fail)?).map_err(fail)?;
    let beta = dim_f_beta(
        &ExactReal::golden(),
        &FrequencyVector::finite(0, vec![0.5, 0.5]).map_err(fail)?,
    )
    .map_err(fail)?;
    // direct re-evaluation: base-2 entropy and base-φ logs
    let mary_ref = -(0.9f64 * 0.9f64.log2() + 0.1 * 0.1f64.log2());
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let beta_ref = 2f64.ln() / (phi.ln() - 0.5 * (phi - 1.0).ln());
    check(
        (mary - 0.46900).abs() <= 1e-5
            && (beta - 0.96028).abs() <= 1e-5
            && (mary - mary_ref).abs() <= 1e-13
            && (beta - beta_ref).abs() <= 1e-13,
        format!("dim_F mary = {mary:.6}, dim_F beta = {beta:.6}"),
    )
}

fn c8_densities() -> Outcome {
    let cf = ExpansionKind::ContinuedFraction.fmap();
    let gauss = ulam_invariant_density(cf.as_ref(), 1024, 10_000, None).map_err(fail)?;
    let l1_gauss = gauss.l1_distance(gauss_density, 4);
    let golden = ExpansionKind::golden_beta().fmap();
    let parry = ulam_invariant_density(golden.as_ref(), 1024, 10_000, None).map_err(fail)?;
    let inv_phi = 2.0 / (1.0 + 5f64.sqrt());
    let l1_parry = parry.l1_distance(|x| if x < inv_phi { 1.170820 } else { 0.723607 }, 4);
    let closed = eta_phi(&gauss_grid(1024), cf.as_ref(), 200).map_err(fail)?;
    let from_ulam = eta_phi(&gauss, cf.as_ref(), 200).map_err(fail)?;
    let err = [
        closed.weight(1) - 0.415037,
        closed.weight(2) - 0.169925,
        from_ulam.weight(1) - 0.415037,
        from_ulam.weight(2) - 0.169925,
    ]
    .iter()
    .fold(0.0f64, |m, x| m.max(x.abs()));
    check(
        l1_gauss <= 0.01 && l1_parry <= 0.02 && err <= 1e-3,
        format!("L¹ Gauss = {l1_gauss:.2e}, L¹ Parry = {l1_parry:.2e}, max |η_φ − p_G| = {err:.2e}"),
    )
}

fn random_dyadic(rng: &mut ChaCha8Rng, bits: usize) -> ExactReal {
    let words: Vec<u32> = (0..bits / 32).map(|_| rng.gen()).collect();
    let p = BigInt::from(BigUint::from_slice(&words));
    ExactReal::rational(p, BigInt::from(1) << bits).unwrap()
}

fn c9_ergodic() -> Outcome {
    let kind = ExpansionKind::golden_beta();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inv_phi = 2.0 / (1.0 + 5f64.sqrt());
    let target = [
        1.0 / (1.0 + inv_phi * inv_phi),
        inv_phi * inv_phi / (1.0 + inv_phi * inv_phi),
    ];
    let xs: Vec<ExactReal> = (0..1000).map(|_| random_dyadic(&mut rng, 1024)).collect();
    let errs: Vec<f64> = {
        use rayon::prelude::*;
        xs.par_iter()
            .map(|x| {
                let seq = expand(&kind, x, 1000, 128).expect("expansion");
                let ones = seq.digits().iter().filter(|&&d| d == 1).count() as f64 / 1000.0;
                0.5 * ((1.0 - ones - target[0]).abs() + (ones - target[1]).abs())
            })
            .collect()
    };
    let mae = errs.iter().sum::<f64>() / errs.len() as f64;
    let bound = 3.0 / 1000f64.sqrt();
    check(
        mae <= bound,
        format!(
            "mean abs error {mae:.4} (bound {bound:.4}), target ({:.6}, {:.6})",
            target[0], target[1]
        ),
    )
}

fn c10_constancy() -> Outcome {
    // irrational weights keep the quota stream aperiodic
    let w0 = (2f64.sqrt() - 1.0) / 2.0;
    let eta = FrequencyVector::finite(0, vec![w0, 0.5, 0.5 - w0]).map_err(fail)?;
    let fams: BTreeMap<u64, ContractionFamily> = BTreeMap::from([
        (0, ContractionFamily::geometric(1.0, 0.3).map_err(fail)?),
        (1, ContractionFamily::geometric(0.8, 0.45).map_err(fail)?),
        (2, ContractionFamily::explicit(vec![0.3, 0.3, 0.2]).map_err(fail)?),
    ]);
    let mut members = Vec::new();
    let mut hs = Vec::new();
    for seed in 1..=50u64 {
        let omega = synthesize_quasinormal(&[0, 1, 2], &eta, 2000, seed).map_err(fail)?;
        let p = PressureProblem::new(fams.clone(), eta.clone())
            .map_err(fail)?
            .with_omega(&omega);
        hs.push(p.solve_h(1e-14).map_err(fail)?.h.to_bits());
        members.push(omega);
    }
    members.sort();
    members.dedup();
    let identical = hs.iter().all(|&b| b == hs[0]);
    let h = f64::from_bits(hs[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut separated = true;
    for _ in 0..20 {
        let other = FrequencyVector::finite(0, random_simplex(&mut rng, 3)).map_err(fail)?;
        let p = PressureProblem::new(fams.clone(), other).map_err(fail)?;
        let w = p.pressure(h, 1e-12).map_err(fail)?.value;
        if w.abs() > 1e-9 && p.solve_h(1e-14).map_err(fail)?.h == h {
            separated = false;
        }
    }
    check(
        members.len() == 50 && identical && separated,
        format!(
            "{} distinct members, identical h = {identical} ({h:.12}), distinct η′ separated = {separated}",
            members.len()
        ),
    )
}

fn c11_truncation() -> Outcome {
    let last = 200u64;
    let w: Vec<f64> = (1..=last).map(gauss_weight).collect();
    let eta = FrequencyVector::finite_normalized(1, w).map_err(fail)?;
    let digits = synthesize_quasinormal(&(1..=last).collect::<Vec<_>>(), &eta, 200_000, 11).map_err(fail)?;
    let stats = DigitStats::from_digits(&digits, Some(&eta));
    let (k, n) = (20, 1000);
    let d_n = solve_delta_kn(&stats, &eta, k, n, 1e-13).map_err(fail)?.h;
    let d_2n = solve_delta_kn(&stats, &eta, k, 2 * n, 1e-13).map_err(fail)?.h;
    let full = solve_delta_k(&stats, &eta, k, 1e-10).map_err(fail)?;
    let ref_gap = (full.lower - d_n).abs().max((full.upper - d_n).abs());
    check(
        (d_2n - d_n).abs() <= 1e-3 && ref_gap <= 1e-3,
        format!(
            "δ(k,n) = {d_n:.6}, δ(k,2n) = {d_2n:.6}, full series in [{:.6}, {:.6}]",
            full.lower, full.upper
        ),
    )
}

fn c12_geometry() -> Outcome {
    let cantor = realize(&MoranSpec::stationary(vec![1.0 / 3.0; 2], 10).map_err(fail)?).map_err(fail)?;
    let eps: Vec<f64> = (1..=10).map(|k| 3f64.powi(-k)).collect();
    let slope = box_count(&cantor, &eps).map_err(fail)?.slope.ok_or("no slope")?;
    let want = 2f64.ln() / 3f64.ln();
    let mut worst = 0.0f64;
    for (r0, r1, period) in [
        (1.0 / 3.0, 1.0 / 3.0, vec![0u64, 1]),
        (0.3, 0.45, vec![0, 1]),
        (0.25, 0.4, vec![0, 1, 1, 1]),
    ] {
        let fams = BTreeMap::from([
            (0, ContractionFamily::geometric(1.0, r0).map_err(fail)?),
            (1, ContractionFamily::geometric(1.0, r1).map_err(fail)?),
        ]);
        let ones = period.iter().filter(|&&d| d == 1).count() as f64 / period.len() as f64;
        let eta = FrequencyVector::finite(0, vec![1.0 - ones, ones]).map_err(fail)?;
        let omega: Vec<u64> = period.iter().cycle().take(8).copied().collect();
        let m = 6;
        let h_m = PressureProblem::new(fams.clone(), eta)
            .map_err(fail)?
            .solve_h_m(m, 1e-13)
            .map_err(fail)?
            .h;
        let tree = realize(&MoranSpec::from_families(&fams, m, omega, 8).map_err(fail)?).map_err(fail)?;
        worst = worst.max((fit_dimension(&tree).map_err(fail)?.s_fit - h_m).abs());
    }
    check(
        (slope - want).abs() <= 0.05 && worst <= 1e-2,
        format!("Cantor slope = {slope:.4} (want {want:.4}), max |s_fit − h_M| = {worst:.2e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("stationary sanity", c1_stationary),
        ("geometric family h", c2_geometric),
        ("ladder monotonicity", c3_ladder),
        ("pressure shape", c4_shape),
        ("covering-sum identity", c5_covering),
        ("gradient check", c6_gradient),
        ("closed-form dimensions", c7_closed_forms),
        ("invariant densities", c8_densities),
        ("ergodic frequency check", c9_ergodic),
        ("dimension constant on a frequency class", c10_constancy),
        ("truncation stabilization", c11_truncation),
        ("geometric oracle", c12_geometry),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS  {:>2} {name}: {d} [{secs:.2} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {d} [{secs:.2} s]", i + 1)
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
