use fracheat::field_sim::{
    assemble_covariance_capped, factor_with_jitter, sample_field, SpaceTimeGrid, DEFAULT_JITTER_SCHEDULE,
};
use fracheat::gaussian_oracles::RngSpec;
use fracheat::norms_existence::{
    covariance_solution, existence_check, existence_threshold, norm_g_colored, norm_g_exact, ColoredNorm,
};
use fracheat::spatial_kernels::{bracket_constants, closed_form_i_f, kernel_eval};
use fracheat::{derive_hurst_params, verify, HurstParams, KernelFamily, KernelSpec};
use serde_json::json;

use crate::config::{CommandKind, RunConfig};
use crate::output::{fmt_f64, Document, DrawTable};
use crate::CliError;

/// Computes the full document for `cfg`. Numerical failures become errors;
/// an unconverged but complete result comes back with `converged = false`.
pub fn execute(cfg: &RunConfig) -> Result<Document, CliError> {
    let mut doc = Document::new(cfg);
    match cfg.command {
        CommandKind::Existence => existence(cfg, &mut doc)?,
        CommandKind::Kernel => kernel(cfg, &mut doc)?,
        CommandKind::Norm => norm(cfg, &mut doc)?,
        CommandKind::Covariance => covariance(cfg, &mut doc)?,
        CommandKind::Simulate => simulate(cfg, &mut doc)?,
        CommandKind::Verify => run_verify(cfg, &mut doc)?,
    }
    Ok(doc)
}

fn spec(cfg: &RunConfig) -> Result<KernelSpec, CliError> {
    cfg.kernel.ok_or_else(|| CliError::Usage("a kernel is required".into()))
}

fn hurst(cfg: &RunConfig) -> Result<HurstParams, CliError> {
    let h = cfg.hurst.ok_or_else(|| CliError::Usage("a Hurst index is required".into()))?;
    Ok(derive_hurst_params(h)?)
}

fn kernel_constant_provenance(family: KernelFamily) -> &'static str {
    match family {
        KernelFamily::WhiteNoise => "delta mass, unit weight",
        KernelFamily::Riesz => "2^(d-alpha) pi^(d/2) Gamma((d-alpha)/2) / Gamma(alpha/2)",
        KernelFamily::Bessel => "(4 pi)^(alpha/2) Gamma(alpha/2)",
        KernelFamily::Heat => "(4 pi alpha)^(-d/2)",
        KernelFamily::Poisson => "alpha pi^(-(d+1)/2) Gamma((d+1)/2)",
    }
}

fn kernel_constants(doc: &mut Document, spec: &KernelSpec, t: f64) {
    doc.constant("kernel_constant", spec.constant, kernel_constant_provenance(spec.family));
    doc.constant("alpha_f", spec.alpha_f, "existence exponent of the kernel family");
    let b = bracket_constants(spec, t);
    doc.constant("bracket_lower", b.lower, "lower power-law constant, certified for 2t-s-r >= lower_valid_from");
    doc.constant("bracket_upper", b.upper, "upper power-law constant on 0 < 2t-s-r <= 2t");
    doc.constant("bracket_exponent", b.exponent, "(d - alpha_f)/2");
    doc.constant("lower_valid_from", b.lower_valid_from, "start of the certified range of bracket_lower");
}

fn hurst_constants(doc: &mut Document, hp: &HurstParams) {
    doc.constant("alpha_h", hp.alpha_h, "H(2H-1)");
    doc.constant(
        "c_h",
        hp.c_h,
        "Gamma(H-1/2) / (2^(2(1-H)) pi^(1/2) Gamma(1-H))",
    );
}

fn existence(cfg: &RunConfig, doc: &mut Document) -> Result<(), CliError> {
    let spec = spec(cfg)?;
    let h = cfg.hurst.ok_or_else(|| CliError::Usage("a Hurst index is required".into()))?;
    let v = existence_check(&spec, h)?;
    doc.value("admissible", v.admissible);
    doc.value("hurst", v.hurst);
    doc.value("threshold", v.threshold);
    doc.value("critical_value", v.critical_value);
    doc.constant("alpha_f", spec.alpha_f, "existence exponent of the kernel family");
    Ok(())
}

fn kernel(cfg: &RunConfig, doc: &mut Document) -> Result<(), CliError> {
    let spec = spec(cfg)?;
    kernel_constants(doc, &spec, cfg.horizon);
    doc.value("threshold", existence_threshold(&spec));
    if let Some(x) = &cfg.x {
        doc.value("kernel_value", kernel_eval(&spec, x)?);
    }
    if let (Some(r), Some(s)) = (cfg.r, cfg.s) {
        let v = closed_form_i_f(&spec, cfg.horizon, r, s)?;
        doc.value("i_f", v);
    }
    Ok(())
}

fn norm(cfg: &RunConfig, doc: &mut Document) -> Result<(), CliError> {
    let spec = spec(cfg)?;
    let hp = hurst(cfg)?;
    let t = cfg.horizon;
    hurst_constants(doc, &hp);
    kernel_constants(doc, &spec, t);
    match norm_g_colored(&spec, &hp, t, &cfg.quadrature)? {
        ColoredNorm::Exact(n) => {
            doc.value("kind", "exact");
            doc.value("value", n.value);
            doc.error("value", n.error_estimate);
            doc.converged = n.converged;
        }
        ColoredNorm::Bracket { lower, upper } => {
            let exact = norm_g_exact(&spec, &hp, t, 0.0, &cfg.quadrature)?;
            doc.value("kind", "bracket");
            doc.value("value", exact.value);
            doc.value("lower", lower.value);
            doc.value("upper", upper.value);
            doc.error("value", exact.error_estimate);
            doc.error("lower", lower.error_estimate);
            doc.error("upper", upper.error_estimate);
            doc.converged = exact.converged && lower.converged && upper.converged;
        }
    }
    Ok(())
}

fn covariance(cfg: &RunConfig, doc: &mut Document) -> Result<(), CliError> {
    let spec = spec(cfg)?;
    let hp = hurst(cfg)?;
    let (Some(p1), Some(p2)) = (&cfg.point1, &cfg.point2) else {
        return Err(CliError::Usage("covariance needs two space-time points".into()));
    };
    hurst_constants(doc, &hp);
    doc.constant("kernel_constant", spec.constant, kernel_constant_provenance(spec.family));
    let r = covariance_solution(&spec, &hp, p1, p2, &cfg.quadrature)?;
    doc.value("value", r.value);
    doc.error("value", r.error_estimate);
    doc.converged = r.converged;
    Ok(())
}

fn simulate(cfg: &RunConfig, doc: &mut Document) -> Result<(), CliError> {
    let spec = spec(cfg)?;
    let hp = hurst(cfg)?;
    let g = &cfg.grid;
    let grid = SpaceTimeGrid::uniform(g.times, cfg.horizon, g.sites, g.spacing, spec.dim)?;
    let mut cov = assemble_covariance_capped(&grid, &spec, &hp, &cfg.quadrature, g.max_points)?;
    let factor = factor_with_jitter(&mut cov, &DEFAULT_JITTER_SCHEDULE)?;
    let samples = sample_field(&factor, cfg.draws, RngSpec::new(cfg.seed, 0)?)?;

    hurst_constants(doc, &hp);
    doc.constant("kernel_constant", spec.constant, kernel_constant_provenance(spec.family));
    let points: Vec<_> = (0..grid.len()).map(|i| grid.point(i)).collect();
    doc.value("grid", json!({ "times": grid.times(), "sites": grid.sites(), "points": points }));
    doc.value("covariance", &cov.entries);
    doc.value("jitter_applied", cov.jitter_applied);
    doc.value("samples", &samples);
    doc.error("covariance", &cov.entry_errors);
    doc.converged = cov.all_converged;

    let columns = points
        .iter()
        .map(|p| {
            let x: Vec<String> = p.x.iter().map(|v| fmt_f64(*v)).collect();
            format!("u[t={};x={}]", fmt_f64(p.t), x.join(";"))
        })
        .collect();
    doc.draws = Some(DrawTable {
        columns,
        rows: samples.into_iter().map(|s| (s.draw, s.values)).collect(),
    });
    Ok(())
}

fn run_verify(cfg: &RunConfig, doc: &mut Document) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for &id in &cfg.criteria {
        let report = verify::by_id(id).ok_or_else(|| CliError::Usage(format!("no acceptance criterion {id}")))?;
        eprintln!("{}", report.line());
        for d in &report.details {
            eprintln!("    {d}");
        }
        reports.push(report);
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    doc.value("all_passed", failed.is_empty());
    doc.value("failed", &failed);
    doc.value("reports", &reports);
    Ok(())
}
