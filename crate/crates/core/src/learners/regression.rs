//! Per-link multiple linear regression on the feature rows, solved by the
//! normal equations with a tiny ridge guard (1e-8, invisible at the 1e-6
//! tolerances used elsewhere) so near-collinear simulated data still fits.

use std::path::Path;

use crate::error::{Error, Result};
use crate::learners::features::{feature_names, FeatureRow, FEATURE_WIDTH};

pub const RIDGE_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    /// One coefficient per feature, intercept last.
    pub coefficients: Vec<f64>,
    pub trained_rows: usize,
}

/// Solve A x = b for a symmetric positive-definite A via Cholesky.
/// On a non-positive pivot, reports the offending column by name.
fn cholesky_solve(a: &mut [Vec<f64>], b: &mut [f64], names: &[String]) -> Result<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Fit(format!(
                "normal equations are rank deficient beyond the ridge guard; collinear column: {}",
                names.get(j).map(String::as_str).unwrap_or("?")
            )));
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / d;
        }
    }
    // forward then back substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= a[i][k] * y[k];
        }
        y[i] = v / a[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in i + 1..n {
            v -= a[k][i] * x[k];
        }
        x[i] = v / a[i][i];
    }
    Ok(x)
}

pub fn fit_regression(rows: &[FeatureRow]) -> Result<RegressionModel> {
    let p = FEATURE_WIDTH + 1;
    if rows.len() <= p {
        return Err(Error::Input(format!(
            "regression needs more rows than the {p} coefficients, got {}",
            rows.len()
        )));
    }
    for r in rows {
        if r.features.len() != FEATURE_WIDTH {
            return Err(Error::Input(format!(
                "feature layout mismatch: expected {FEATURE_WIDTH}, got {}",
                r.features.len()
            )));
        }
    }
    // X^T X and X^T y with the intercept as the last column
    let mut xtx = vec![vec![0.0f64; p]; p];
    let mut xty = vec![0.0f64; p];
    for r in rows {
        for i in 0..p {
            let xi = if i < FEATURE_WIDTH { r.features[i] } else { 1.0 };
            xty[i] += xi * r.target;
            for j in 0..=i {
                let xj = if j < FEATURE_WIDTH { r.features[j] } else { 1.0 };
                xtx[i][j] += xi * xj;
            }
        }
    }
    for i in 0..p {
        for j in i + 1..p {
            xtx[i][j] = xtx[j][i];
        }
        xtx[i][i] += RIDGE_GUARD;
    }
    let mut names = feature_names();
    names.push("intercept".to_string());
    let coefficients = cholesky_solve(&mut xtx, &mut xty, &names)?;
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Fit("regression produced non-finite coefficients".into()));
    }
    Ok(RegressionModel { coefficients, trained_rows: rows.len() })
}

/// Dot product plus intercept, clamped below at zero (speeds cannot be
/// negative).
pub fn predict_regression(model: &RegressionModel, features: &[f64]) -> Result<f64> {
    if features.len() != FEATURE_WIDTH {
        return Err(Error::Input(format!(
            "feature layout mismatch: model expects {FEATURE_WIDTH}, got {}",
            features.len()
        )));
    }
    let raw: f64 = features
        .iter()
        .zip(&model.coefficients)
        .map(|(f, c)| f * c)
        .sum::<f64>()
        + model.coefficients[FEATURE_WIDTH];
    Ok(raw.max(0.0))
}

/// Raw affine prediction without the clamp (used by linearity checks).
pub fn predict_regression_raw(model: &RegressionModel, features: &[f64]) -> f64 {
    features.iter().zip(&model.coefficients).map(|(f, c)| f * c).sum::<f64>()
        + model.coefficients[FEATURE_WIDTH]
}

/// Versioned textual coefficient dump; floats round-trip bit-exact through
/// Rust's shortest-representation formatting.
pub fn save_regression(model: &RegressionModel, path: &Path) -> Result<()> {
    let mut names = feature_names();
    names.push("intercept".to_string());
    let mut out = String::from("linkcast-model v1 regression\n");
    out.push_str(&format!("features {}\n", names.join(",")));
    out.push_str(&format!("trained_rows {}\n", model.trained_rows));
    for c in &model.coefficients {
        out.push_str(&format!("{c}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_regression(path: &Path) -> Result<RegressionModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("linkcast-model v1 regression") {
        return Err(Error::Parse(format!("{}: not a v1 regression dump", path.display())));
    }
    let mut names = feature_names();
    names.push("intercept".to_string());
    let expected_header = format!("features {}", names.join(","));
    if lines.next() != Some(expected_header.as_str()) {
        return Err(Error::Parse(format!("{}: feature layout differs", path.display())));
    }
    let trained_rows: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("trained_rows "))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: missing trained_rows", path.display())))?;
    let coefficients: Vec<f64> = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.parse().map_err(|e| Error::Parse(format!("{}: {e}", path.display()))))
        .collect::<Result<_>>()?;
    if coefficients.len() != FEATURE_WIDTH + 1 {
        return Err(Error::Parse(format!(
            "{}: expected {} coefficients, got {}",
            path.display(),
            FEATURE_WIDTH + 1,
            coefficients.len()
        )));
    }
    Ok(RegressionModel { coefficients, trained_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::features::build_design_matrix;
    use crate::rng::derive_rng;
    use crate::series::{parse_timestamp, SpeedSeries};
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn rows_from(values: Vec<f64>) -> Vec<FeatureRow> {
        let s = SpeedSeries::new("L", parse_timestamp("2024-01-01T00:00:00").unwrap(), 60, values)
            .unwrap();
        build_design_matrix(&s).unwrap()
    }

    fn random_rows(n: usize, seed: u64, noise: f64, f: impl Fn(&[f64]) -> f64) -> Vec<FeatureRow> {
        let mut rng = derive_rng(seed, "regr-test", &[]);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut values = vec![50.0, 55.0, 60.0];
        for _ in 0..n {
            values.push(40.0 + 40.0 * rng.random::<f64>());
        }
        let mut rows = rows_from(values);
        for r in &mut rows {
            r.target = f(&r.features) + noise * normal.sample(&mut rng);
        }
        rows
    }

    #[test]
    fn recovers_planted_noiseless_model() {
        let rows = random_rows(200, 1, 0.0, |f| 2.0 * f[0] + 5.0);
        let model = fit_regression(&rows).unwrap();
        assert!((model.coefficients[0] - 2.0).abs() < 1e-6);
        for c in &model.coefficients[1..FEATURE_WIDTH] {
            assert!(c.abs() < 1e-6, "{c}");
        }
        assert!((model.coefficients[FEATURE_WIDTH] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn constant_target_goes_to_the_intercept() {
        let rows = random_rows(200, 2, 0.0, |_| 60.0);
        let model = fit_regression(&rows).unwrap();
        for c in &model.coefficients[..FEATURE_WIDTH] {
            assert!(c.abs() < 1e-6);
        }
        assert!((model.coefficients[FEATURE_WIDTH] - 60.0).abs() < 1e-6);
    }

    #[test]
    fn recovers_planted_lag_model_under_noise() {
        let rows = random_rows(1000, 3, 0.01, |f| 1.5 * f[0] - 0.5 * f[1] + 0.25 * f[2]);
        let model = fit_regression(&rows).unwrap();
        assert!((model.coefficients[0] - 1.5).abs() < 1e-2);
        assert!((model.coefficients[1] + 0.5).abs() < 1e-2);
        assert!((model.coefficients[2] - 0.25).abs() < 1e-2);
    }

    #[test]
    fn residuals_are_orthogonal_to_features() {
        let rows = random_rows(500, 4, 2.0, |f| 0.8 * f[0] + 10.0);
        let model = fit_regression(&rows).unwrap();
        let p = FEATURE_WIDTH + 1;
        let mut dots = vec![0.0f64; p];
        let mut col_norms = vec![0.0f64; p];
        let mut resid_norm = 0.0f64;
        for r in &rows {
            let resid = r.target - predict_regression_raw(&model, &r.features);
            resid_norm += resid * resid;
            for i in 0..p {
                let xi = if i < FEATURE_WIDTH { r.features[i] } else { 1.0 };
                dots[i] += xi * resid;
                col_norms[i] += xi * xi;
            }
        }
        for i in 0..p {
            let scale = (col_norms[i].sqrt() * resid_norm.sqrt()).max(1e-12);
            assert!(dots[i].abs() / scale < 1e-6, "column {i}: {}", dots[i]);
        }
    }

    #[test]
    fn prediction_examples_and_clamp() {
        let mut coefficients = vec![0.0; FEATURE_WIDTH + 1];
        coefficients[0] = 2.0;
        coefficients[FEATURE_WIDTH] = 5.0;
        let model = RegressionModel { coefficients, trained_rows: 0 };
        let mut f = vec![0.0; FEATURE_WIDTH];
        f[0] = 10.0;
        assert_eq!(predict_regression(&model, &f).unwrap(), 25.0);
        let flat = RegressionModel {
            coefficients: {
                let mut c = vec![0.0; FEATURE_WIDTH + 1];
                c[FEATURE_WIDTH] = 60.0;
                c
            },
            trained_rows: 0,
        };
        assert_eq!(predict_regression(&flat, &vec![0.0; FEATURE_WIDTH]).unwrap(), 60.0);
        let negative = RegressionModel {
            coefficients: {
                let mut c = vec![0.0; FEATURE_WIDTH + 1];
                c[FEATURE_WIDTH] = -3.0;
                c
            },
            trained_rows: 0,
        };
        assert_eq!(predict_regression(&negative, &vec![0.0; FEATURE_WIDTH]).unwrap(), 0.0);
        assert!(predict_regression(&model, &[1.0]).is_err());
    }

    #[test]
    fn prediction_is_affine_before_the_clamp() {
        let rows = random_rows(300, 5, 1.0, |f| 0.5 * f[0] + 0.2 * f[1] + 30.0);
        let model = fit_regression(&rows).unwrap();
        let f1 = &rows[0].features;
        let f2 = &rows[1].features;
        for &a in &[0.25, 0.5, 0.75] {
            let mix: Vec<f64> = f1.iter().zip(f2).map(|(x, y)| a * x + (1.0 - a) * y).collect();
            let lhs = predict_regression_raw(&model, &mix);
            let rhs = a * predict_regression_raw(&model, f1) + (1.0 - a) * predict_regression_raw(&model, f2);
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_rows_is_an_input_error() {
        let rows = random_rows(20, 6, 0.0, |f| f[0]);
        assert!(matches!(fit_regression(&rows), Err(Error::Input(_))));
    }

    #[test]
    fn degeneracy_beyond_the_ridge_guard_names_the_column() {
        // a feature scale past f64 range overwhelms the guard: the normal
        // equations lose positive definiteness at that column's pivot
        let mut rows = random_rows(100, 8, 0.0, |f| f[0]);
        for r in &mut rows {
            r.features[1] = 1e200;
        }
        match fit_regression(&rows) {
            Err(Error::Fit(message)) => assert!(message.contains("lag"), "{message}"),
            other => panic!("expected fit error, got {other:?}"),
        }
    }

    #[test]
    fn persistence_round_trips_bit_exact() {
        let rows = random_rows(200, 7, 0.5, |f| 1.1 * f[0] - 0.3 * f[2] + 7.0);
        let model = fit_regression(&rows).unwrap();
        let dir = std::env::temp_dir().join(format!("linkcast-regr-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.txt");
        save_regression(&model, &path).unwrap();
        let back = load_regression(&path).unwrap();
        assert_eq!(model.coefficients, back.coefficients);
        std::fs::remove_dir_all(&dir).ok();
    }
}
