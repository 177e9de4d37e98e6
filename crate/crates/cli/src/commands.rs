use num_complex::Complex64;
use rnm_core::berezin::{
    bef_check, berezin_mass, berezin_transform, conditional_identity_check, conditioned_onepoint_profile,
    exterior_harmonic_measure_check, scaling_limit_check, wavefunction_measure, BerezinKernel, ScalingProbe,
};
use rnm_core::cumulants::{
    abs_f64, dpp_cumulants, gaussian_pair_integrals, is_exact_zero, s_k, zero_sum_identity, CumulantOptions,
};
use rnm_core::kernel::{fit_decay_rate, WeightedKernel};
use rnm_core::potential::{Droplet, Potential};
use rnm_core::sampler::{sample_dpp_many, sample_ginibre_many, sample_mcmc, PointConfiguration, SamplerKind};
use rnm_core::statistics::{
    boundary_statistics, check_bulk_support, covariance_check, fluct_values, predicted_mean, predicted_variance,
    tilting_table, FluctuationContext, FluctuationReport,
};
use serde_json::{json, Value};

use crate::config::{complex, ExperimentConfig, StatisticSection};
use crate::output::{Check, Report, Table};
use crate::CliError;

/// Potential tag, droplet radius and `(m, n)` after defaults are applied.
pub fn resolved_summary(cfg: &ExperimentConfig, with_ensemble: bool) -> Value {
    if !with_ensemble {
        return Value::Null;
    }
    let pot = match cfg.build_potential() {
        Ok(p) => p,
        Err(_) => return Value::Null,
    };
    let radius = cfg.droplet(&pot).map(|d| d.radius()).ok();
    let (m, n) = cfg.ensemble().unwrap_or((f64::NAN, 0));
    json!({ "potential": pot.tag(), "tau": cfg.potential.tau, "droplet_radius": radius, "m": m, "n": n })
}

fn setup(cfg: &ExperimentConfig) -> Result<(Potential, Droplet, f64, usize), CliError> {
    let pot = cfg.build_potential()?;
    let droplet = cfg.droplet(&pot)?;
    let (m, n) = cfg.ensemble()?;
    Ok((pot, droplet, m, n))
}

/// Draws `sampler.samples` configurations with the configured sampler.
fn draw(cfg: &ExperimentConfig, pot: &Potential, m: f64, n: usize) -> Result<Vec<PointConfiguration>, CliError> {
    let scfg = cfg.sampler_config(cfg.require_seed()?)?;
    let count = cfg.sampler.samples;
    match cfg.sampler.kind {
        SamplerKind::Dpp => {
            let kernel = WeightedKernel::radial(pot, m, n)?;
            Ok(sample_dpp_many(&kernel, &scfg, count)?)
        }
        SamplerKind::Matrix => {
            if pot.tag() != "ginibre" || (m - n as f64).abs() > 1e-12 {
                return Err(CliError::Config(
                    "the matrix sampler needs the Ginibre potential with m = n (tau = 1)".into(),
                ));
            }
            Ok(sample_ginibre_many(n, scfg.master_seed, count)?)
        }
        SamplerKind::Mcmc => {
            let chains = cfg.sampler.chains;
            let per_chain = count.div_ceil(chains);
            let mut out = sample_mcmc(pot, m, n, &scfg, chains, per_chain)?;
            out.truncate(count);
            Ok(out)
        }
    }
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn rational(x: &impl std::fmt::Display) -> String {
    x.to_string()
}

pub fn identities() -> Result<Report, CliError> {
    let mut report = Report::new("identities");
    let mut table = Table::new("identities.csv", &["k", "zero_sum", "s_k", "expected_s_k", "status"]);
    report.console.push(format!(
        "{:>3}  {:>10}  {:>6}  {:>8}  status",
        "k", "zero_sum", "S_k", "expected"
    ));
    let mut rows = Vec::new();
    for k in 2..=10 {
        let zero = zero_sum_identity(k);
        let s = s_k(k);
        let expected = if k == 2 { 2 } else { 0 };
        let pass = is_exact_zero(&zero) && rational(&s) == expected.to_string();
        let status = if pass { "exact pass" } else { "exact fail" };
        report.console.push(format!(
            "{k:>3}  {:>10}  {:>6}  {expected:>8}  {status}",
            rational(&zero),
            rational(&s)
        ));
        table.push(vec![
            k.to_string(),
            rational(&zero),
            rational(&s),
            expected.to_string(),
            status.into(),
        ]);
        report
            .checks
            .push(Check::at_most(&format!("zero_sum_k{k}"), abs_f64(&zero), 0.0));
        report
            .checks
            .push(Check::near(&format!("s_k{k}"), abs_f64(&s), expected as f64, 0.0));
        rows.push(json!({ "k": k, "zero_sum": rational(&zero), "s_k": rational(&s), "status": status }));
    }
    let p = gaussian_pair_integrals();
    let pairs = [
        ("pair_j", p.j.norm(), 0.0),
        ("pair_j_prime", p.j_prime.norm(), 0.0),
        ("pair_l_prime", p.l_prime.norm(), 0.0),
        ("pair_l_second", (p.l_second - 1.0).norm(), 0.0),
    ];
    for (name, dev, _) in pairs {
        report.checks.push(Check::at_most(name, dev, 1e-8));
    }
    report.details = json!({
        "identities": rows,
        "pair_integrals": {
            "j": [p.j.re, p.j.im],
            "j_prime": [p.j_prime.re, p.j_prime.im],
            "l_prime": [p.l_prime.re, p.l_prime.im],
            "l_second": [p.l_second.re, p.l_second.im],
        },
    });
    report.tables.push(table);
    Ok(report)
}

pub fn kernel(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (pot, droplet, m, n) = setup(cfg)?;
    let k = WeightedKernel::radial(&pot, m, n)?;
    let mut report = Report::new("kernel");
    let r = droplet.radius();
    let kc = &cfg.kernel;
    let inner = kc
        .probe_inner
        .unwrap_or(if pot.laplacian_radial(0.0) > 0.0 { 0.0 } else { 0.4 * r });
    let outer = kc.probe_outer.unwrap_or(0.5 * r);
    if !(outer > inner && inner >= 0.0) || kc.probe_points < 2 {
        return Err(CliError::Config(
            "kernel probe needs 0 <= probe_inner < probe_outer and probe_points >= 2".into(),
        ));
    }
    let mut diag = Table::new("kernel_diagonal.csv", &["z_re", "z_im", "R1", "predicted", "residual"]);
    let mut sup: f64 = 0.0;
    for i in 0..kc.probe_points {
        let rad = inner + (outer - inner) * i as f64 / (kc.probe_points - 1) as f64;
        for j in 0..8 {
            let z = Complex64::from_polar(rad, std::f64::consts::FRAC_PI_4 * j as f64);
            let r1 = k.one_point(z)?;
            let predicted = m * pot.laplacian(z) + pot.half_laplacian_log_laplacian(rad, 1.0);
            let residual = (r1 - predicted).abs();
            sup = sup.max(residual);
            diag.push_numbers(&[z.re, z.im, r1, predicted, residual]);
        }
    }
    report
        .checks
        .push(Check::at_most("diagonal_residual_sup", sup, kc.budget));

    let z0 = complex(kc.anchor);
    let lap = pot.laplacian(z0);
    if !(lap > 0.0) {
        return Err(CliError::Config(
            "kernel.anchor must lie where the Laplacian of Q is positive".into(),
        ));
    }
    let window = m.ln() / m.sqrt();
    let radii: Vec<f64> = (0..=60).map(|i| 3.0 * window * i as f64 / 60.0).collect();
    let profile = k.offdiagonal_decay_profile(z0, &radii);
    let mut decay = Table::new("kernel_decay.csv", &["h", "value", "prediction"]);
    let mut shape: f64 = 0.0;
    for (h, v) in radii.iter().zip(&profile) {
        let gauss = (-m * lap * h * h / 2.0).exp();
        decay.push_numbers(&[*h, *v, m * lap * gauss]);
        if *h <= window {
            shape = shape.max((v / (m * lap) - gauss).abs());
        }
    }
    report
        .checks
        .push(Check::at_most("offdiagonal_shape_in_window", shape, kc.shape_tolerance));
    let tail: Vec<usize> = (0..radii.len()).filter(|&i| radii[i] >= window).collect();
    let fit = fit_decay_rate(
        &tail.iter().map(|&i| radii[i]).collect::<Vec<_>>(),
        &tail.iter().map(|&i| profile[i]).collect::<Vec<_>>(),
        m,
    );
    report.details = json!({
        "m": m,
        "n": n,
        "probe": { "inner": inner, "outer": outer, "points": kc.probe_points * 8 },
        "diagonal_residual_sup": sup,
        "anchor": kc.anchor,
        "window": window,
        "shape_deviation": shape,
        "decay_fit": { "rate": fit.rate, "intercept": fit.intercept, "epsilon": fit.epsilon },
    });
    report.console.push(format!(
        "kernel m={m} n={n}: sup residual {sup:.3e}, shape deviation {shape:.3e}, decay epsilon {:.3}",
        fit.epsilon
    ));
    report.tables.push(diag);
    report.tables.push(decay);
    Ok(report)
}

pub fn sample(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (pot, _, m, n) = setup(cfg)?;
    let samples = draw(cfg, &pot, m, n)?;
    let mut report = Report::new("sample");
    let mut table = Table::new("samples.csv", &["sample_id", "point_id", "re", "im"]);
    for (i, s) in samples.iter().enumerate() {
        for (j, z) in s.points.iter().enumerate() {
            table.push(vec![i.to_string(), j.to_string(), fmt(z.re), fmt(z.im)]);
        }
    }
    let metas: Vec<Value> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut v = serde_json::to_value(&s.meta).unwrap_or(Value::Null);
            v["sample_id"] = json!(i);
            v
        })
        .collect();
    let warnings = samples.iter().filter(|s| !s.meta.warnings.is_empty()).count();
    report.extra_json.push((
        "samples.meta.json".into(),
        json!({ "schema_version": crate::output::SCHEMA_VERSION, "samples": metas }),
    ));
    report.details =
        json!({ "samples": samples.len(), "m": m, "n": n, "sampler": cfg.sampler.kind, "with_warnings": warnings });
    report.console.push(format!(
        "sampled {} configurations of {n} points ({})",
        samples.len(),
        cfg.sampler.kind.as_str()
    ));
    report.tables.push(table);
    Ok(report)
}

fn fluct_table(file: &str, values: &[f64]) -> Table {
    let mut t = Table::new(file, &["sample_id", "fluct"]);
    for (i, v) in values.iter().enumerate() {
        t.push(vec![i.to_string(), fmt(*v)]);
    }
    t
}

fn clt_checks(report: &mut Report, r: &FluctuationReport) {
    report
        .checks
        .push(Check::near("mean", r.mean, r.predicted_mean, 3.0 * r.mcse_mean));
    report.checks.push(Check::near(
        "variance",
        r.variance,
        r.predicted_variance,
        (3.0 * r.mcse_variance).max(0.1 * r.predicted_variance),
    ));
    report
        .checks
        .push(Check::near("skewness", r.skewness, 0.0, 3.0 * r.se_skewness));
    report.checks.push(Check::near(
        "excess_kurtosis",
        r.excess_kurtosis,
        0.0,
        3.0 * r.se_kurtosis,
    ));
}

pub fn clt(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (pot, droplet, m, n) = setup(cfg)?;
    let g = cfg.statistic.build()?;
    check_bulk_support(&g, &droplet)?;
    let covariance = cfg.covariance.as_ref().map(StatisticSection::build).transpose()?;
    if let Some(f) = &covariance {
        check_bulk_support(f, &droplet)?;
    }
    let samples = draw(cfg, &pot, m, n)?;
    let ctx = FluctuationContext::new(&g, &droplet, n);
    let values = fluct_values(&samples, &ctx);
    let e_g = predicted_mean(&g, &droplet);
    let v2 = predicted_variance(&g)?;
    let r = FluctuationReport::from_values(&values, e_g, v2);
    let mut report = Report::new("clt");
    clt_checks(&mut report, &r);

    let tilt = tilting_table(&values, &cfg.tilting.lambdas, e_g, v2);
    let mut tilt_csv = Table::new(
        "clt_tilting.csv",
        &["lambda", "f_prime", "prediction", "f_second", "ess"],
    );
    for row in &tilt.rows {
        tilt_csv.push_numbers(&[row.lambda, row.f_prime, row.predicted, row.f_second, row.ess]);
    }
    let cov = match &covariance {
        Some(f) => {
            let chk = covariance_check(&samples, f, &g, &droplet)?;
            report
                .checks
                .push(Check::near("covariance", chk.empirical, chk.predicted, 3.0 * chk.mcse));
            Some(chk)
        }
        None => None,
    };
    report.details = json!({
        "m": m,
        "n": n,
        "statistic": g.tag(),
        "mean_term": ctx.mean_term(),
        "fluctuation": r,
        "tilting": tilt,
        "covariance": cov,
    });
    report.console.push(format!(
        "clt {} n={n}: mean {:.4} vs {:.4}, variance {:.4} vs {:.4}, skewness {:.3}, excess kurtosis {:.3}",
        g.tag(),
        r.mean,
        r.predicted_mean,
        r.variance,
        r.predicted_variance,
        r.skewness,
        r.excess_kurtosis
    ));
    report.tables.push(fluct_table("clt_fluct.csv", &values));
    report.tables.push(tilt_csv);
    Ok(report)
}

pub fn cumulants(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let pot = cfg.build_potential()?;
    let droplet = cfg.droplet(&pot)?;
    let g = cfg.statistic.build()?;
    check_bulk_support(&g, &droplet)?;
    let list = cfg.ensemble_list(&cfg.cumulants.n_list)?;
    let opts = CumulantOptions {
        max_order: cfg.cumulants.max_order,
        allow_high_order: cfg.cumulants.allow_high_order,
        radial_nodes: cfg.grid.radial.unwrap_or(CumulantOptions::default().radial_nodes),
        angular_nodes: cfg.grid.angular,
    };
    let e_g = predicted_mean(&g, &droplet);
    let v2 = predicted_variance(&g)?;
    let mut table = Table::new("cumulants.csv", &["n", "k", "C_k", "prediction"]);
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for &(m, n) in &list {
        let kernel = WeightedKernel::radial(&pot, m, n)?;
        let c = dpp_cumulants(&kernel, &g, &opts)?;
        let c1 = FluctuationContext::new(&g, &droplet, n).mean_term() + e_g;
        for (i, ck) in c.iter().enumerate() {
            let pred = match i {
                0 => c1,
                1 => v2,
                _ => 0.0,
            };
            table.push_numbers(&[n as f64, (i + 1) as f64, *ck, pred]);
        }
        rows.push((n, c));
    }
    let mut report = Report::new("cumulants");
    let (first, (n_last, last)) = (&rows[0].1, &rows[rows.len() - 1]);
    if last.len() >= 2 {
        report
            .checks
            .push(Check::near(&format!("c2_n{n_last}"), last[1], v2, 0.1 * v2));
    }
    let c2 = last.get(1).copied().unwrap_or(v2);
    for k in 3..=last.len() {
        let scale = c2.powf(k as f64 / 2.0);
        report.checks.push(Check::at_most(
            &format!("c{k}_n{n_last}"),
            last[k - 1].abs(),
            0.1 * scale,
        ));
        if rows.len() > 1 {
            report.checks.push(Check::at_most(
                &format!("c{k}_decays"),
                last[k - 1].abs(),
                first[k - 1].abs(),
            ));
        }
    }
    let all: Vec<Value> = rows.iter().map(|(n, c)| json!({ "n": n, "cumulants": c })).collect();
    report.details =
        json!({ "statistic": g.tag(), "predicted_mean_correction": e_g, "predicted_variance": v2, "rows": all });
    report
        .console
        .push(format!("cumulants of {} for n in {:?}", g.tag(), cfg.cumulants.n_list));
    report.tables.push(table);
    Ok(report)
}

pub fn berezin(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (pot, droplet, m, n) = setup(cfg)?;
    let bc = &cfg.berezin;
    let tau = cfg.potential.tau;
    let mut report = Report::new("berezin");
    let kernel = WeightedKernel::radial(&pot, m, n)?;

    let mut masses = Vec::new();
    for a in &bc.mass_anchors {
        let mass = berezin_mass(&kernel, complex(*a))?;
        report
            .checks
            .push(Check::near(&format!("mass_at_{}_{}", a[0], a[1]), mass, 1.0, 1e-6));
        masses.push(json!({ "anchor": a, "mass": mass }));
    }

    let calm = conditional_identity_check(&pot, m, n)?;
    report
        .checks
        .push(Check::at_most("conditional_identity", calm.residual, 1e-10 * n as f64));
    let g = cfg.statistic.build()?;
    let bef = bef_check(&pot, m, n, &g)?;
    report.checks.push(Check::at_most("bef", bef.residual, 1e-8));

    let z0 = complex(bc.anchor);
    let list = cfg.ensemble_list(&bc.n_list)?;
    let mut expansion = Vec::new();
    for &(mm, nn) in &list {
        let t = berezin_transform(&WeightedKernel::radial(&pot, mm, nn)?, &g, z0)?;
        if nn >= 128 {
            report.checks.push(Check::at_most(
                &format!("expansion_residual_n{nn}"),
                t.relative_residual(),
                bc.expansion_tolerance,
            ));
        }
        expansion.push((nn, t));
    }
    if expansion.len() > 1 {
        let (first, last) = (&expansion[0].1, &expansion[expansion.len() - 1].1);
        report.checks.push(Check::at_most(
            "expansion_residual_shrinks",
            last.relative_residual(),
            first.relative_residual(),
        ));
    }

    let b = BerezinKernel::new(&kernel, z0)?;
    let lap = pot.laplacian(z0);
    let mut density = Table::new("berezin_density.csv", &["distance", "value", "prediction"]);
    let micro = 1.0 / (m * lap.max(f64::MIN_POSITIVE)).sqrt();
    for i in 0..=40 {
        let d = 4.0 * micro * i as f64 / 40.0;
        density.push_numbers(&[d, b.density(z0 + d), m * lap * (-m * lap * d * d).exp()]);
    }

    let hn = cfg.ensemble_list(&[bc.harmonic_n])?[0];
    let wave = wavefunction_measure(&pot, hn.0, hn.1, tau, bc.width)?;
    report
        .checks
        .push(Check::at_least("wavefunction_annulus_mass", wave.annulus_mass, 0.95));
    let mut wave_csv = Table::new("wavefunction.csv", &["radius", "value"]);
    for (r, v) in &wave.radial_profile {
        wave_csv.push_numbers(&[*r, *v]);
    }
    let hk = WeightedKernel::radial(&pot, hn.0, hn.1)?;
    let harm = exterior_harmonic_measure_check(&hk, &droplet, complex(bc.harmonic_anchor))?;
    report
        .checks
        .push(Check::at_most("harmonic_measure_l1", harm.l1_distance, 0.1));
    report.checks.push(Check::at_most(
        "mass_away_from_boundary",
        harm.mass_away_from_boundary,
        0.1,
    ));
    let mut harm_csv = Table::new("harmonic_measure.csv", &["angle", "value", "prediction"]);
    for (t, v, p) in &harm.profile {
        harm_csv.push_numbers(&[*t, *v, *p]);
    }

    report.details = json!({
        "m": m,
        "n": n,
        "masses": masses,
        "conditional_identity": calm,
        "bef": bef,
        "expansion": expansion.iter().map(|(nn, t)| json!({ "n": nn, "transform": t, "relative_residual": t.relative_residual() })).collect::<Vec<_>>(),
        "wavefunction": {
            "n": wave.n,
            "droplet_radius": wave.droplet_radius,
            "width": wave.width,
            "total_mass": wave.total_mass,
            "annulus_mass": wave.annulus_mass,
            "angular_deviation": wave.angular_deviation,
        },
        "harmonic_measure": {
            "anchor": [harm.anchor_re, harm.anchor_im],
            "l1_distance": harm.l1_distance,
            "mass_away_from_boundary": harm.mass_away_from_boundary,
            "mass_outside_droplet": harm.mass_outside_droplet,
            "total_mass": harm.total_mass,
            "warnings": harm.warnings,
        },
    });
    report.console.push(format!(
        "berezin m={m} n={n}: conditional identity {:.2e}, BEF {:.2e}, annulus mass {:.4}, harmonic L1 {:.4}",
        calm.residual, bef.residual, wave.annulus_mass, harm.l1_distance
    ));
    report.tables.push(density);
    report.tables.push(wave_csv);
    report.tables.push(harm_csv);
    Ok(report)
}

pub fn scaling(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let pot = cfg.build_potential()?;
    let droplet = cfg.droplet(&pot)?;
    let sc = &cfg.scaling;
    let (m, n) = cfg.ensemble_list(&[sc.n])?[0];
    let kernel = WeightedKernel::radial(&pot, m, n)?;
    let z0 = complex(sc.anchor);
    let mut report = Report::new("scaling");
    let check = scaling_limit_check(&kernel, &droplet, z0)?;
    report.checks.push(Check::at_most(
        "kernel_sup_deviation",
        check.sup_deviation,
        sc.tolerance,
    ));
    let radii: Vec<f64> = (0..=12).map(|i| 0.25 * i as f64).collect();
    let profile = conditioned_onepoint_profile(&kernel, &droplet, z0, &radii)?;
    report.checks.push(Check::at_most(
        "conditioned_profile_sup_deviation",
        profile.sup_deviation,
        0.02,
    ));
    let mut prof = Table::new("conditioned_profile.csv", &["radius", "value", "prediction"]);
    for (r, v, p) in &profile.rows {
        prof.push_numbers(&[*r, *v, *p]);
    }
    let probe = ScalingProbe::new(&kernel, &droplet, z0)?;
    let mut modulus = Table::new("kernel_modulus.csv", &["distance", "value", "prediction"]);
    for i in 0..=30 {
        let d = 0.1 * i as f64;
        let v = probe.kernel(Complex64::new(0.0, 0.0), Complex64::new(d, 0.0)).norm();
        modulus.push_numbers(&[d, v, (-d * d / 2.0).exp()]);
    }
    let mut warnings = check.warnings.clone();
    warnings.extend(profile.warnings.iter().cloned());
    warnings.dedup();
    report.details = json!({
        "m": m,
        "n": n,
        "anchor": sc.anchor,
        "scale": probe.scale(),
        "kernel": check,
        "conditioned_profile": profile,
        "warnings": warnings,
    });
    report.console.push(format!(
        "scaling n={n} at ({}, {}): kernel deviation {:.2e}, conditioned profile deviation {:.2e}",
        sc.anchor[0], sc.anchor[1], check.sup_deviation, profile.sup_deviation
    ));
    for w in &warnings {
        report.console.push(format!("warning: {w}"));
    }
    report.tables.push(prof);
    report.tables.push(modulus);
    Ok(report)
}

pub fn boundary(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (pot, droplet, m, n) = setup(cfg)?;
    let f = StatisticSection {
        kind: cfg.boundary.statistic.clone(),
        ..StatisticSection::default()
    }
    .build()?;
    let pred = boundary_statistics(&f, &droplet)?;
    let samples = draw(cfg, &pot, m, n)?;
    let values = fluct_values(&samples, &FluctuationContext::new(&f, &droplet, n));
    let r = FluctuationReport::from_values(&values, pred.e_f, pred.v_f2);
    let mut report = Report::new("boundary");
    report
        .checks
        .push(Check::near("mean", r.mean, pred.e_f, 3.0 * r.mcse_mean));
    report.checks.push(Check::near(
        "variance",
        r.variance,
        pred.v_f2,
        cfg.boundary.variance_tolerance * pred.v_f2,
    ));
    report.details = json!({ "m": m, "n": n, "statistic": f.tag(), "prediction": pred, "fluctuation": r });
    report.console.push(format!(
        "boundary {} n={n}: mean {:.4} vs e_f {:.4}, variance {:.4} vs v_f^2 {:.4}",
        f.tag(),
        r.mean,
        pred.e_f,
        r.variance,
        pred.v_f2
    ));
    report.tables.push(fluct_table("boundary_fluct.csv", &values));
    Ok(report)
}
