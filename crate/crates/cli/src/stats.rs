//! Reference spacing distributions and the Kolmogorov-Smirnov distance
//! used by the spectra-stats command.

use statrs::function::erf::erf;

/// GUE Wigner surmise density `(32 / pi^2) s^2 exp(-4 s^2 / pi)`.
pub fn wigner_surmise_pdf(s: f64) -> f64 {
    let pi = std::f64::consts::PI;
    32.0 / (pi * pi) * s * s * (-4.0 * s * s / pi).exp()
}

/// CDF of the GUE Wigner surmise.
pub fn wigner_surmise_cdf(s: f64) -> f64 {
    let pi = std::f64::consts::PI;
    erf(2.0 * s / pi.sqrt()) - 4.0 * s / pi * (-4.0 * s * s / pi).exp()
}

/// Spacing density of an uncorrelated (Poisson) spectrum.
pub fn poisson_pdf(s: f64) -> f64 {
    (-s).exp()
}

pub fn poisson_cdf(s: f64) -> f64 {
    1.0 - (-s).exp()
}

/// Kolmogorov-Smirnov distance between a sample and a reference CDF.
/// `samples` need not be sorted; the distance checks both sides of each
/// empirical step.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = cdf(s);
            let below = (f - i as f64 / n).abs();
            let above = ((i + 1) as f64 / n - f).abs();
            below.max(above)
        })
        .fold(0.0, f64::max)
}
