//! Statistical helpers for the verifiers: means and standard errors,
//! chi-squared and Kolmogorov–Smirnov tests, Gelman–Rubin, effective
//! sample size. Everything here works in f64; callers convert at the
//! boundary. P-value machinery follows the classic Numerical Recipes
//! series/continued-fraction forms.

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Sample covariance of paired data and the standard error of the
/// covariance estimator (delta method on the product moments).
pub fn covariance_se(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    let var_of_prod =
        prods.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (n - 1.0);
    (cov, (var_of_prod / n).sqrt())
}

/// ln Γ(x) by the Lanczos approximation (g = 5, 6 coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0);
    const COF: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for c in COF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // series
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x < a + 1.0 {
        1.0 - gamma_p(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    // modified Lentz continued fraction
    let fpmin = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / fpmin;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < fpmin {
            d = fpmin;
        }
        c = b + an / c;
        if c.abs() < fpmin {
            c = fpmin;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Result of a goodness-of-fit or two-sample test.
#[derive(Clone, Copy, Debug)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson chi-squared against expected counts; the caller is responsible
/// for merging sparse bins. dof = bins - 1 - `fitted_params`.
pub fn chi2_gof(observed: &[u64], expected: &[f64], fitted_params: usize) -> TestOutcome {
    assert_eq!(observed.len(), expected.len());
    let mut stat = 0.0;
    for (o, e) in observed.iter().zip(expected) {
        assert!(*e > 0.0, "expected counts must be positive");
        stat += (*o as f64 - e).powi(2) / e;
    }
    let dof = (observed.len() - 1 - fitted_params) as f64;
    let p = gamma_q(dof / 2.0, stat / 2.0);
    TestOutcome { statistic: stat, dof, p_value: p }
}

/// Poisson pmf values 0..=k_max plus a final bucket for the tail.
pub fn poisson_probs(lambda: f64, k_max: usize) -> Vec<f64> {
    let mut probs = Vec::with_capacity(k_max + 2);
    let mut cum = 0.0;
    for k in 0..=k_max {
        let lp = -lambda + k as f64 * lambda.ln() - ln_gamma(k as f64 + 1.0);
        let p = lp.exp();
        probs.push(p);
        cum += p;
    }
    probs.push((1.0 - cum).max(0.0));
    probs
}

/// Merge histogram cells so every expected count is at least `min_expected`.
/// Returns (merged observed, merged expected).
pub fn merge_sparse_bins(
    observed: &[u64],
    probs: &[f64],
    total: u64,
    min_expected: f64,
) -> (Vec<u64>, Vec<f64>) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let mut acc_o = 0u64;
    let mut acc_e = 0.0;
    for (o, p) in observed.iter().zip(probs) {
        acc_o += o;
        acc_e += p * total as f64;
        if acc_e >= min_expected {
            obs.push(acc_o);
            exp.push(acc_e);
            acc_o = 0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0 {
        if let (Some(o), Some(e)) = (obs.last_mut(), exp.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        } else {
            obs.push(acc_o);
            exp.push(acc_e.max(1e-12));
        }
    }
    (obs, exp)
}

/// Complement of the asymptotic Kolmogorov distribution, Q_KS(z).
fn ks_q(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.18 {
        let factor = (2.0 * std::f64::consts::PI).sqrt() / z;
        let term = (-std::f64::consts::PI.powi(2) / (8.0 * z * z)).exp();
        1.0 - factor * (term + term.powi(9) + term.powi(25) + term.powi(49))
    } else {
        let term = (-2.0 * z * z).exp();
        2.0 * (term - term.powi(4) + term.powi(9))
    }
}

/// Two-sample Kolmogorov–Smirnov test (asymptotic p-value).
pub fn ks2(sample_a: &[f64], sample_b: &[f64]) -> TestOutcome {
    let mut a: Vec<f64> = sample_a.to_vec();
    let mut b: Vec<f64> = sample_b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("NaN in KS sample"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("NaN in KS sample"));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    let mut fa = 0.0;
    let mut fb = 0.0;
    while i < a.len() && j < b.len() {
        let xa = a[i];
        let xb = b[j];
        if xa <= xb {
            i += 1;
            fa = i as f64 / na;
        }
        if xb <= xa {
            j += 1;
            fb = j as f64 / nb;
        }
        d = d.max((fa - fb).abs());
    }
    let ne = na * nb / (na + nb);
    let sqrt_ne = ne.sqrt();
    let p = ks_q((sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d);
    TestOutcome { statistic: d, dof: ne, p_value: p }
}

/// Gelman–Rubin potential scale reduction factor over chains of equal length.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len() as f64;
    let n = chains[0].len() as f64;
    assert!(m >= 2.0 && n >= 2.0);
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Total variation distance between two empirical count histograms.
pub fn tv_distance_counts(a: &[u64], b: &[u64]) -> f64 {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let len = a.len().max(b.len());
    let mut tv = 0.0;
    for i in 0..len {
        let pa = a.get(i).copied().unwrap_or(0) as f64 / na as f64;
        let pb = b.get(i).copied().unwrap_or(0) as f64 / nb as f64;
        tv += (pa - pb).abs();
    }
    tv / 2.0
}

/// Effective sample size by Geyer's initial positive sequence estimator.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let (mean, _) = mean_se(xs);
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - lag {
            acc += (xs[i] - mean) * (xs[i + lag] - mean);
        }
        acc / (n as f64 * var)
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    n as f64 / (1.0 + 2.0 * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(5.0), (24.0f64).ln(), max_relative = 1e-12);
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn incomplete_gamma_special_cases() {
        // P(1, x) = 1 - e^{-x}
        for x in [0.1, 1.0, 3.0, 10.0] {
            assert_relative_eq!(gamma_p(1.0, x), 1.0 - (-x as f64).exp(), max_relative = 1e-12);
            assert_relative_eq!(gamma_q(1.0, x), (-x as f64).exp(), max_relative = 1e-12);
        }
        // chi-squared with 2 dof: Q(1, ln(20)/2) = 1/sqrt(20)
        assert_relative_eq!(
            gamma_q(1.0, 20.0f64.ln() / 2.0),
            1.0 / 20.0f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn chi2_uniform_counts() {
        let obs = [25u64, 25, 25, 25];
        let exp = [25.0, 25.0, 25.0, 25.0];
        let t = chi2_gof(&obs, &exp, 0);
        assert_relative_eq!(t.statistic, 0.0);
        assert_relative_eq!(t.p_value, 1.0);
    }

    #[test]
    fn poisson_probs_sum_to_one() {
        let p = poisson_probs(3.7, 30);
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn ks_same_sample_is_zero() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let t = ks2(&xs, &xs);
        assert_eq!(t.statistic, 0.0);
        assert_relative_eq!(t.p_value, 1.0);
    }

    #[test]
    fn ks_reference_case() {
        // frozen case from the classic two-sample construction:
        // D = 1/3 at effective size 3
        let a = [0.3, 0.2, 0.25, 0.1, 0.9, 0.6];
        let b = [0.1, 0.8, 0.34, 0.09, 0.12, 0.81];
        let t = ks2(&a, &b);
        assert_relative_eq!(t.statistic, 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn gelman_rubin_identical_chains_near_one() {
        let c1: Vec<f64> = (0..500).map(|i| ((i * 37) % 101) as f64).collect();
        let mut c2 = c1.clone();
        c2.reverse();
        let r = gelman_rubin(&[c1, c2]);
        assert!(r < 1.01, "r = {r}");
    }

    #[test]
    fn tv_distance_bounds() {
        assert_relative_eq!(tv_distance_counts(&[10, 0], &[0, 10]), 1.0);
        assert_relative_eq!(tv_distance_counts(&[5, 5], &[50, 50]), 0.0);
    }

    #[test]
    fn ess_iid_close_to_n() {
        // deterministic low-autocorrelation sequence
        let xs: Vec<f64> = (0..2000).map(|i| (((i * 2654435761u64) % 97) as f64)).collect();
        let ess = effective_sample_size(&xs);
        assert!(ess > 1000.0, "ess = {ess}");
    }
}
