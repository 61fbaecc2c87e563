//! Panel preprocessing: log returns, leading-factor removal, PVE and
//! pairwise correlations.

use faer::Mat;

use crate::{Error, Result};

/// `R_{i,t} = log X_{i,t} - log X_{i,t-1}`, giving a `p x (n-1)` panel.
pub fn log_returns(prices: &Mat<f64>) -> Result<Mat<f64>> {
    let (p, n) = (prices.nrows(), prices.ncols());
    if n < 2 {
        return Err(Error::domain(format!("need at least two columns, got {n}")));
    }
    for i in 0..p {
        for t in 0..n {
            let v = prices[(i, t)];
            if !(v > 0.0) {
                return Err(Error::domain(format!(
                    "price at row {} column {} is not positive: {v}",
                    i + 1,
                    t + 1
                )));
            }
        }
    }
    Ok(Mat::from_fn(p, n - 1, |i, t| {
        prices[(i, t + 1)].ln() - prices[(i, t)].ln()
    }))
}

/// Subtracts each row's mean.
pub fn center_rows(panel: &Mat<f64>) -> Mat<f64> {
    let n = panel.ncols() as f64;
    let means: Vec<f64> = (0..panel.nrows())
        .map(|i| (0..panel.ncols()).map(|t| panel[(i, t)]).sum::<f64>() / n)
        .collect();
    Mat::from_fn(panel.nrows(), panel.ncols(), |i, t| panel[(i, t)] - means[i])
}

/// Centered panel minus its `s` leading singular terms.
pub fn remove_factors(panel: &Mat<f64>, s: usize) -> Result<Mat<f64>> {
    let k = panel.nrows().min(panel.ncols());
    if s > k {
        return Err(Error::domain(format!(
            "can remove at most {k} factors, asked for {s}"
        )));
    }
    let centered = center_rows(panel);
    if s == 0 {
        return Ok(centered);
    }
    let svd = centered
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("SVD failed: {e:?}")))?;
    let (u, d, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut out = centered;
    for r in 0..s {
        let sr = d[r];
        for j in 0..out.ncols() {
            let vj = v[(j, r)] * sr;
            for i in 0..out.nrows() {
                out[(i, j)] -= u[(i, r)] * vj;
            }
        }
    }
    Ok(out)
}

/// Squared singular values of the centered panel over their sum, nonincreasing.
pub fn pve(panel: &Mat<f64>) -> Result<Vec<f64>> {
    let sv = center_rows(panel)
        .singular_values()
        .map_err(|e| Error::Numeric(format!("SVD failed: {e:?}")))?;
    let sq: Vec<f64> = sv.iter().map(|s| s * s).collect();
    let total: f64 = sq.iter().sum();
    if total == 0.0 {
        return Err(Error::domain("panel has no variation after centering"));
    }
    Ok(sq.iter().map(|v| v / total).collect())
}

/// The `p(p-1)/2` correlations between distinct rows, in row-major upper
/// triangle order. Constant rows give NaN.
pub fn pairwise_correlations(panel: &Mat<f64>) -> Vec<f64> {
    let c = center_rows(panel);
    let p = c.nrows();
    let norms: Vec<f64> = (0..p)
        .map(|i| (0..c.ncols()).map(|t| c[(i, t)] * c[(i, t)]).sum::<f64>().sqrt())
        .collect();
    let gram = &c * c.transpose();
    let mut out = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            out.push(gram[(i, j)] / (norms[i] * norms[j]));
        }
    }
    out
}
