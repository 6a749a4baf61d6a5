use rand::Rng;

/// Result of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    /// Coordinate where the largest error occurred.
    pub worst: usize,
    pub checked: usize,
}

impl FdReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

/// Checks `analytic` against central differences of `loss` on a random
/// subset of `samples` coordinates (all of them if there are fewer).
///
/// Relative error per coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn fd_check<F>(
    params: &[f64],
    analytic: &[f64],
    mut loss: F,
    h: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> FdReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient shape differs from parameters");
    let coords: Vec<usize> = if samples >= params.len() {
        (0..params.len()).collect()
    } else {
        let mut c = rand::seq::index::sample(rng, params.len(), samples).into_vec();
        c.sort_unstable();
        c
    };
    let mut p = params.to_vec();
    let mut report = FdReport {
        max_rel_error: 0.0,
        worst: 0,
        checked: coords.len(),
    };
    for &i in &coords {
        let orig = p[i];
        p[i] = orig + h;
        let plus = loss(&p);
        p[i] = orig - h;
        let minus = loss(&p);
        p[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
            report.worst = i;
        }
    }
    report
}
