//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured quantities and pinned tolerances.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rnm_core::berezin::{
    bef_check, berezin_mass, berezin_transform, conditional_identity_check, conditioned_onepoint_profile,
    exterior_harmonic_measure_check, scaling_limit_check, wavefunction_measure,
};
use rnm_core::cumulants::{
    dpp_cumulants, gaussian_pair_integrals, is_exact_zero, s_k, zero_sum_identity, CumulantOptions,
};
use rnm_core::htest::{ks_two_sample, SampleMoments};
use rnm_core::kernel::WeightedKernel;
use rnm_core::potential::{Droplet, Potential};
use rnm_core::sampler::{sample_dpp_many, sample_ginibre_many, sample_mcmc, SamplerConfig};
use rnm_core::statistics::{boundary_statistics, clt_report, FluctuationContext};
use rnm_core::testfn::TestFunction;
use statrs::function::gamma::{gamma_lr, gamma_ur};
use std::f64::consts::FRAC_PI_4;
use std::process::ExitCode;
use std::time::Instant;

const SEED_CLT: u64 = 20_240_601;
const SEED_CROSS: u64 = 20_240_602;
const SEED_BOUNDARY: u64 = 20_240_603;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ginibre_kernel(n: usize) -> WeightedKernel {
    WeightedKernel::radial(&Potential::ginibre(), n as f64, n).expect("ginibre kernel")
}

fn ginibre_droplet() -> Droplet {
    Droplet::compute(&Potential::ginibre(), 1.0).expect("ginibre droplet")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn criterion_1() -> Outcome {
    let two = BigRational::from_integer(BigInt::from(2));
    let mut ok = true;
    for k in 2..=10 {
        ok &= is_exact_zero(&zero_sum_identity(k));
        let s = s_k(k);
        ok &= if k == 2 { s == two } else { is_exact_zero(&s) };
    }
    outcome(
        ok,
        "zero-sum identity and S_k for k=2..10, exact rationals, tolerance 0".into(),
    )
}

fn criterion_2() -> Outcome {
    let p = gaussian_pair_integrals();
    let dev = [
        p.j.norm(),
        p.j_prime.norm(),
        p.l_prime.norm(),
        (p.l_second - 1.0).norm(),
    ];
    let worst = dev.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst <= 1e-8,
        format!(
            "|J|={:.2e} |J'|={:.2e} |L'|={:.2e} |L''-1|={:.2e}, tolerance 1e-8",
            dev[0], dev[1], dev[2], dev[3]
        ),
    )
}

fn ginibre_one_point_oracle(n: usize, r: f64) -> f64 {
    if r == 0.0 {
        return n as f64;
    }
    n as f64 * gamma_ur(n as f64, n as f64 * r * r)
}

fn criterion_3() -> Outcome {
    let k64 = ginibre_kernel(64);
    let mut sup: f64 = 0.0;
    let mut oracle_gap: f64 = 0.0;
    for i in 0..=50 {
        let r = 0.5 * i as f64 / 50.0;
        for j in 0..8 {
            let z = Complex64::from_polar(r, j as f64 * FRAC_PI_4);
            let v = k64.one_point(z).expect("one-point");
            sup = sup.max((v - 64.0).abs());
            oracle_gap = oracle_gap.max((v - ginibre_one_point_oracle(64, r)).abs() / 64.0);
        }
    }
    // n − R¹(z) = n P(Poisson(n|z|²) >= n) lies far below rounding at z = 0.3,
    // so the decay comparison uses the closed form
    let deficit = |n: usize| n as f64 * gamma_lr(n as f64, n as f64 * 0.09);
    let (res32, res128) = (deficit(32), deficit(128));
    let z = c(0.3, 0.0);
    let rounding = [32, 128]
        .iter()
        .map(|&n| ginibre_kernel(n).diagonal_expansion_residual(z).expect("residual") / n as f64)
        .fold(0.0, f64::max);
    let ok = sup <= 3.0 && res128 < res32 && oracle_gap <= 1e-9 && rounding <= 1e-9;
    outcome(
        ok,
        format!(
            "sup|R1-n| on |z|<=0.5 at n=64: {sup:.3e} (budget 3); residual at 0.3: n=32 {res32:.3e}, n=128 {res128:.3e}; kernel vs closed form {:.1e} (1e-9)",
            oracle_gap.max(rounding)
        ),
    )
}

fn criterion_4() -> Outcome {
    let droplet = ginibre_droplet();
    let g = TestFunction::bump(c(0.0, 0.0), 0.5);
    let samples = sample_ginibre_many(64, SEED_CLT, 2000).expect("matrix samples");
    let r = clt_report(&samples, &g, &droplet).expect("fluctuation report");
    let mean_ok = r.mean_ok();
    let var_ok = r.variance_ok(0.10);
    let skew_ok = r.skewness_ok();
    let kurt_ok = r.kurtosis_ok();
    outcome(
        mean_ok && var_ok && skew_ok && kurt_ok,
        format!(
            "mean {:.4} (3 MCSE {:.4}) {}; variance {:.4} vs {:.4} (allowed {:.4}) {}; skewness {:.3} (3 SE {:.3}) {}; excess kurtosis {:.3} (3 SE {:.3}) {}",
            r.mean,
            3.0 * r.mcse_mean,
            ok_word(mean_ok),
            r.variance,
            r.predicted_variance,
            (3.0 * r.mcse_variance).max(0.1 * r.predicted_variance),
            ok_word(var_ok),
            r.skewness,
            3.0 * r.se_skewness,
            ok_word(skew_ok),
            r.excess_kurtosis,
            3.0 * r.se_kurtosis,
            ok_word(kurt_ok),
        ),
    )
}

fn ok_word(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "out"
    }
}

fn criterion_5() -> Outcome {
    let g = TestFunction::bump(c(0.0, 0.0), 0.5);
    let v2 = 0.5;
    let opts = CumulantOptions::default();
    let c32 = dpp_cumulants(&ginibre_kernel(32), &g, &opts).expect("cumulants n=32");
    let c128 = dpp_cumulants(&ginibre_kernel(128), &g, &opts).expect("cumulants n=128");
    let c2 = c128[1];
    let c2_ok = (c2 - v2).abs() <= 0.1 * v2;
    let c3_ok = c128[2].abs() < 0.1 * c2.powf(1.5);
    let c4_ok = c128[3].abs() < 0.1 * c2 * c2;
    let decreasing = c128[2].abs() < c32[2].abs() && c128[3].abs() < c32[3].abs();
    outcome(
        c2_ok && c3_ok && c4_ok && decreasing,
        format!(
            "C2(128)={c2:.4} vs 0.5 (10%); C3: n=32 {:.2e}, n=128 {:.2e}; C4: n=32 {:.2e}, n=128 {:.2e}",
            c32[2], c128[2], c32[3], c128[3]
        ),
    )
}

fn criterion_6() -> Outcome {
    let n = 16;
    let pot = Potential::ginibre();
    let droplet = ginibre_droplet();
    let g = TestFunction::bump(c(0.0, 0.0), 0.5);
    let ctx = FluctuationContext::new(&g, &droplet, n);
    let cfg = SamplerConfig::with_seed(SEED_CROSS);
    let kernel = ginibre_kernel(n);
    let dpp: Vec<f64> = sample_dpp_many(&kernel, &cfg, 2000)
        .expect("dpp samples")
        .iter()
        .map(|s| ctx.fluct(&s.points))
        .collect();
    let mat: Vec<f64> = sample_ginibre_many(n, SEED_CROSS, 2000)
        .expect("matrix samples")
        .iter()
        .map(|s| ctx.fluct(&s.points))
        .collect();
    let mcmc: Vec<f64> = sample_mcmc(&pot, n as f64, n, &cfg, 40, 50)
        .expect("mcmc samples")
        .iter()
        .map(|s| ctx.fluct(&s.points))
        .collect();
    let a = ks_two_sample(&dpp, &mat);
    let b = ks_two_sample(&dpp, &mcmc);
    let m = ks_two_sample(&mat, &mcmc);
    let ok = a.passes(0.01) && b.passes(0.01) && m.passes(0.01);
    outcome(
        ok,
        format!(
            "KS p-values dpp/matrix {:.3}, dpp/mcmc {:.3}, matrix/mcmc {:.3} (level 0.01, 2000 each)",
            a.p_value, b.p_value, m.p_value
        ),
    )
}

fn criterion_7() -> Outcome {
    let pot = Potential::ginibre();
    let k32 = ginibre_kernel(32);
    let masses: Vec<f64> = [c(0.0, 0.0), c(0.5, 0.0), c(1.2, 0.0)]
        .iter()
        .map(|z| berezin_mass(&k32, *z).expect("berezin mass"))
        .collect();
    let mass_ok = masses.iter().all(|m| (m - 1.0).abs() <= 1e-6);
    let calm = conditional_identity_check(&pot, 16.0, 16)
        .expect("conditional identity")
        .residual;
    let bump = TestFunction::bump(c(0.0, 0.0), 0.5);
    let bef = bef_check(&pot, 16.0, 16, &TestFunction::bump(c(0.2, 0.1), 0.6))
        .expect("bef")
        .residual;
    let z0 = c(0.1, 0.0);
    let rel: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            berezin_transform(&ginibre_kernel(n), &bump, z0)
                .expect("transform")
                .relative_residual()
        })
        .collect();
    let expansion_ok = rel[1] <= 0.15 && rel[2] < rel[0];
    let ok = mass_ok && calm <= 1e-10 && bef <= 1e-8 && expansion_ok;
    outcome(
        ok,
        format!(
            "masses {:.2e},{:.2e},{:.2e} off 1 (1e-6); conditional identity {calm:.1e} (1e-10); BEF {bef:.1e} (1e-8); expansion residual n=64 {:.3}, n=128 {:.3} (0.15), n=256 {:.3}",
            (masses[0] - 1.0).abs(),
            (masses[1] - 1.0).abs(),
            (masses[2] - 1.0).abs(),
            rel[0],
            rel[1],
            rel[2]
        ),
    )
}

fn criterion_8() -> Outcome {
    let k = ginibre_kernel(128);
    let d = ginibre_droplet();
    let z0 = c(0.0, 0.0);
    let s = scaling_limit_check(&k, &d, z0).expect("scaling check");
    let radii: Vec<f64> = (0..=12).map(|i| 0.25 * i as f64).collect();
    let p = conditioned_onepoint_profile(&k, &d, z0, &radii).expect("conditioned profile");
    outcome(
        s.sup_deviation <= 0.05 && p.sup_deviation <= 0.02,
        format!(
            "sup||k_n|-e^(-|z-w|^2/2)| {:.2e} (0.05, {} pairs); conditioned profile sup deviation {:.2e} (0.02)",
            s.sup_deviation, s.pairs, p.sup_deviation
        ),
    )
}

fn criterion_9() -> Outcome {
    let pot = Potential::ginibre();
    let w = wavefunction_measure(&pot, 256.0, 256, 1.0, 0.1).expect("wavefunction");
    let h = exterior_harmonic_measure_check(&ginibre_kernel(256), &ginibre_droplet(), c(1.5, 0.0)).expect("harmonic");
    let ok = w.annulus_mass >= 0.95 && h.l1_distance <= 0.1 && h.mass_away_from_boundary <= 0.1;
    outcome(
        ok,
        format!(
            "wavefunction mass in ||z|-1|<0.1: {:.4} (0.95); harmonic-measure L1 {:.4} (0.1); Berezin mass farther than 0.1 from the boundary {:.4} (0.1)",
            w.annulus_mass, h.l1_distance, h.mass_away_from_boundary
        ),
    )
}

fn criterion_10() -> Outcome {
    let droplet = ginibre_droplet();
    let f = TestFunction::real_part();
    let pred = boundary_statistics(&f, &droplet).expect("boundary prediction");
    let ctx = FluctuationContext::new(&f, &droplet, 64);
    let values: Vec<f64> = sample_ginibre_many(64, SEED_BOUNDARY, 2000)
        .expect("matrix samples")
        .iter()
        .map(|s| ctx.fluct(&s.points))
        .collect();
    let m = SampleMoments::new(&values);
    let var_ok = (m.variance - pred.v_f2).abs() <= 0.15 * pred.v_f2;
    let mean_ok = (m.mean - pred.e_f).abs() <= 3.0 * m.mcse_mean;
    outcome(
        var_ok && mean_ok && (pred.v_f2 - 0.5).abs() < 1e-8,
        format!(
            "variance {:.4} vs v_f^2 {:.4} (15%); mean {:.4} vs e_f {:.1e} (3 MCSE {:.4})",
            m.variance,
            pred.v_f2,
            m.mean,
            pred.e_f,
            3.0 * m.mcse_mean
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("exact combinatorics", criterion_1),
        ("gaussian pair integrals", criterion_2),
        ("kernel diagonal expansion", criterion_3),
        ("fluctuation CLT", criterion_4),
        ("trace-formula cumulants", criterion_5),
        ("cross-sampler equivalence", criterion_6),
        ("berezin identities", criterion_7),
        ("scaling limit", criterion_8),
        ("wavefunction and harmonic measure", criterion_9),
        ("boundary fluctuations", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {status} {name} [{:.1}s]: {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
