//! One function per subcommand. Each reads its inputs, calls the library and
//! returns an [`Outcome`] without touching stdout.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde_json::json;
use variogram::elliptope::{elliptope3_section, sample_cholesky, sample_gram, sample_rejection_with_budget};
use variogram::inverse::{loglik, ml_residual};
use variogram::kriging::krige_predict;
use variogram::model::{
    covariance_from_gamma, decompose_covariance, gamma_from_sigma_r, min_sigma2, validate_variogram,
};
use variogram::projection::{estimate_model, simulate_field, simulate_model};
use variogram::{CorrelationMatrix, CovarianceMatrix, SampleSet, VariogramMatrix};

use crate::io::{format_csv, parse_csv, parse_square, read_input, rows_of, ModelFile};
use crate::{CliError, Envelope, MatrixKind, Outcome, PriorMethod};

fn outcome(command: &str, result: serde_json::Value, warnings: Vec<String>) -> Outcome {
    Outcome {
        envelope: Envelope {
            command: command.into(),
            result,
            warnings,
        },
        artifact: None,
        exit_code: 0,
    }
}

fn load_model(path: &str) -> Result<(ModelFile, variogram::KrigeModel), CliError> {
    let file = ModelFile::parse(&read_input(path)?, path)?;
    let model = file.to_model()?;
    Ok((file, model))
}

fn load_samples(path: &str, n: Option<usize>) -> Result<SampleSet, CliError> {
    let data = parse_csv(&read_input(path)?, path)?;
    if let Some(n) = n {
        if data.ncols() != n {
            return Err(CliError::Parse(format!(
                "{path}: rows have {} fields, model dimension is {n}",
                data.ncols()
            )));
        }
    }
    Ok(SampleSet::new(data)?)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

pub fn validate(path: &str, sigma2: Option<f64>) -> Result<Outcome, CliError> {
    let text = read_input(path)?;
    let (gamma, sigma2) = if text.trim_start().starts_with('{') {
        let file = ModelFile::parse(&text, path)?;
        (file.gamma_matrix()?, sigma2.or(Some(file.sigma2)))
    } else {
        (parse_square(&text, path)?, sigma2)
    };
    let report = validate_variogram(&gamma, sigma2)?;
    let mut failed = Vec::new();
    if !report.symmetric_zero_diagonal.passed {
        failed.push("symmetric_zero_diagonal");
    }
    if !report.conditionally_negative_definite.passed {
        failed.push("conditionally_negative_definite");
    }
    if !report.nonnegative_entries.passed {
        failed.push("nonnegative_entries");
    }
    if report.sigma2_bound.as_ref().is_some_and(|c| !c.passed) {
        failed.push("sigma2_bound");
    }
    let valid = report.is_valid();
    let warnings = report.warnings.clone();
    let mut out = outcome(
        "validate",
        json!({ "valid": valid, "failed_conditions": failed, "sigma2": sigma2, "report": report }),
        warnings,
    );
    out.exit_code = if valid { 0 } else { 1 };
    Ok(out)
}

pub fn convert(
    from: MatrixKind,
    to: MatrixKind,
    path: &str,
    sigma2: Option<f64>,
    output: &str,
) -> Result<Outcome, CliError> {
    let m = parse_square(&read_input(path)?, path)?;
    let mut warnings = Vec::new();
    let (s2, gamma, cov) = match from {
        MatrixKind::Cov => {
            let cov = CovarianceMatrix::new(m)?;
            let (s2, r) = decompose_covariance(&cov)?;
            if let Some(given) = sigma2 {
                if given != s2 {
                    warnings.push(format!("--sigma2 {given} ignored; the covariance fixes sigma2 = {s2}"));
                }
            }
            (s2, gamma_from_sigma_r(s2, &r)?, Some(cov))
        }
        MatrixKind::Gamma => {
            let gamma = VariogramMatrix::new(m)?;
            match sigma2 {
                Some(s2) => {
                    let cov = covariance_from_gamma(s2, &gamma)?;
                    (s2, gamma, Some(cov))
                }
                None if to == MatrixKind::Gamma => (f64::NAN, gamma, None),
                None => {
                    return Err(CliError::Usage(
                        "--sigma2 is required when converting from a variogram".into(),
                    ))
                }
            }
        }
        MatrixKind::Corr => return Err(CliError::Usage("--from accepts cov or gamma".into())),
    };
    let out_matrix: DMatrix<f64> = match (to, &cov) {
        (MatrixKind::Gamma, _) => gamma.as_matrix().clone(),
        (MatrixKind::Cov, Some(c)) => c.as_matrix().clone(),
        (MatrixKind::Corr, Some(c)) => decompose_covariance(c)?.1.into_inner(),
        _ => unreachable!("covariance is known whenever it is needed"),
    };
    let floor = min_sigma2(&gamma).ok();
    let result = json!({
        "from": kind_label(from),
        "to": kind_label(to),
        "n": gamma.n(),
        "sigma2": s2.is_finite().then_some(s2),
        "min_sigma2": floor,
    });
    let mut out = outcome("convert", result, warnings);
    out.artifact = Some((output.into(), format_csv(&out_matrix)));
    Ok(out)
}

fn kind_label(k: MatrixKind) -> &'static str {
    match k {
        MatrixKind::Cov => "cov",
        MatrixKind::Gamma => "gamma",
        MatrixKind::Corr => "corr",
    }
}

pub fn likelihood(model_path: &str, data_path: &str) -> Result<Outcome, CliError> {
    let (_, model) = load_model(model_path)?;
    let samples = load_samples(data_path, Some(model.n()))?;
    let mut per_sample = Vec::with_capacity(samples.count());
    let mut logdet = 0.0;
    for k in 0..samples.count() {
        let ev = loglik(&samples.sample(k), &model)?;
        logdet = ev.logdet_term;
        per_sample.push(ev.loglik);
    }
    let total: f64 = per_sample.iter().sum();
    let centered = SampleSet::new(samples.as_matrix().add_scalar(-model.mu()))?;
    let residual = ml_residual(&centered, model.gamma(), model.sigma2())?;
    let result = json!({
        "n": model.n(),
        "count": samples.count(),
        "loglik": total,
        "mean_loglik": total / samples.count() as f64,
        "logdet_sigma": logdet,
        "per_sample": per_sample,
        "ml_residual_offdiag": residual.offdiag_norm,
    });
    Ok(outcome("likelihood", result, Vec::new()))
}

pub fn estimate(data_path: &str, output: &str) -> Result<Outcome, CliError> {
    let samples = load_samples(data_path, None)?;
    let est = estimate_model(&samples);
    let count = samples.count();
    let pooled = samples
        .as_matrix()
        .iter()
        .map(|v| (v - est.mu_hat).powi(2))
        .sum::<f64>()
        / samples.as_matrix().len() as f64;
    let floor = min_sigma2(&est.gamma_hat)?;
    let mut warnings = Vec::new();
    let sigma2 = if pooled < floor {
        warnings.push(format!(
            "pooled variance {pooled} is below min_sigma2 {floor}; using min_sigma2"
        ));
        floor
    } else {
        pooled
    };
    if est.gamma_hat.is_zero() {
        warnings.push("estimated variogram is identically zero".into());
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("source".into(), data_path.into());
    metadata.insert("estimator".into(), "projection".into());
    metadata.insert("samples".into(), count.to_string());
    let file = ModelFile {
        mu: est.mu_hat,
        sigma2,
        gamma: rows_of(est.gamma_hat.as_matrix()),
        metadata,
    };
    let se = est.gamma_hat.as_matrix() * (2.0 / count as f64).sqrt();
    let result = json!({
        "model": file,
        "min_sigma2": floor,
        "pooled_variance": pooled,
        "standard_errors": rows_of(&se),
    });
    let text = serde_json::to_string_pretty(&file).expect("model serializes") + "\n";
    let mut out = outcome("estimate", result, warnings);
    out.artifact = Some((output.into(), text));
    Ok(out)
}

pub fn simulate(
    model_path: &str,
    count: usize,
    seed: Option<u64>,
    full: bool,
    output: &str,
) -> Result<Outcome, CliError> {
    let (_, model) = load_model(model_path)?;
    let seed = resolve_seed(seed);
    let data = if full {
        simulate_model(&model, count, seed)?
    } else {
        let field = simulate_field(model.gamma(), count, seed)?;
        SampleSet::new(field.as_matrix().add_scalar(model.mu()))?
    };
    let result = json!({ "n": model.n(), "count": count, "seed": seed, "full": full });
    let mut out = outcome("simulate", result, Vec::new());
    out.artifact = Some((output.into(), format_csv(data.as_matrix())));
    Ok(out)
}

pub fn sample_prior(
    method: PriorMethod,
    n: usize,
    count: usize,
    seed: Option<u64>,
    max_draws: u64,
    stats_only: bool,
) -> Result<Outcome, CliError> {
    let seed = resolve_seed(seed);
    let mut warnings = Vec::new();
    let mut exit_code = 0;
    let mut result = json!({ "method": method, "n": n, "count": count, "seed": seed });
    let samples: Vec<CorrelationMatrix> = match method {
        PriorMethod::Rejection => {
            let o = sample_rejection_with_budget(n, count, seed, max_draws)?;
            result["draws"] = json!(o.draws);
            result["accepted"] = json!(o.samples.len());
            result["acceptance_rate"] = json!(o.acceptance_rate);
            result["timed_out"] = json!(o.timed_out);
            if o.timed_out {
                let e = variogram::Error::Timeout {
                    accepted: o.samples.len(),
                    draws: o.draws,
                };
                warnings.push(CliError::Domain(e).to_string());
                exit_code = 1;
            }
            o.samples
        }
        PriorMethod::Gram => sample_gram(n, count, seed)?,
        PriorMethod::Cholesky => sample_cholesky(n, count, seed)?,
    };
    if !stats_only {
        let mats: Vec<Vec<Vec<f64>>> = samples.iter().map(|r| rows_of(r.as_matrix())).collect();
        result["matrices"] = json!(mats);
    }
    let mut out = outcome("sample-prior", result, warnings);
    out.exit_code = exit_code;
    Ok(out)
}

pub fn predict(
    model_path: &str,
    data_path: &str,
    cov_row_path: &str,
    require_positive: bool,
) -> Result<Outcome, CliError> {
    let (_, model) = load_model(model_path)?;
    let n = model.n();
    let samples = load_samples(data_path, Some(n))?;
    let row = parse_csv(&read_input(cov_row_path)?, cov_row_path)?;
    if row.nrows() != 1 || row.ncols() != n + 1 {
        return Err(CliError::Parse(format!(
            "{cov_row_path}: expected one row of {} values, got {}x{}",
            n + 1,
            row.nrows(),
            row.ncols()
        )));
    }
    let sigma = model.covariance_matrix();
    let full = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
        (0, j) => row[(0, j)],
        (i, 0) => row[(0, i)],
        (i, j) => sigma[(i - 1, j - 1)],
    });
    let full = CovarianceMatrix::new(full)?;
    if require_positive && full.as_matrix().min() < 0.0 {
        return Err(variogram::Error::InvalidInput("covariance has a negative correlation".into()).into());
    }
    let mut predictions = Vec::with_capacity(samples.count());
    let mut warnings = Vec::new();
    for k in 0..samples.count() {
        let y: DVector<f64> = samples.sample(k);
        let p = krige_predict(&full, &y, model.mu())?;
        warnings.extend(p.warnings.iter().map(|w| format!("row {k}: {w}")));
        predictions.push(json!({ "prediction": p.prediction, "variance": p.variance, "weights": p.weights }));
    }
    Ok(outcome(
        "predict",
        json!({ "n": n, "mu": model.mu(), "predictions": predictions }),
        warnings,
    ))
}

pub fn elliptope_section(c: f64, points: usize, output: &str) -> Result<Outcome, CliError> {
    let s = elliptope3_section(c, points)?;
    let mut csv = String::from("x,y\n");
    for [x, y] in &s.boundary {
        csv.push_str(&format!("{x:.16e},{y:.16e}\n"));
    }
    let result = json!({
        "c": s.c,
        "quadratic": s.quadratic,
        "bound": s.bound,
        "semi_axes": s.semi_axes,
        "area": s.area,
        "points": points,
    });
    let mut out = outcome("elliptope-section", result, Vec::new());
    out.artifact = Some((output.into(), csv));
    Ok(out)
}
