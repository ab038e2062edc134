//! One-way ANOVA and Bonferroni-corrected pairwise Welch t-tests, with the
//! regularized incomplete beta function as the p-value kernel.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// p-values below this are reported as `<1e-300`.
pub const P_FLOOR: f64 = 1e-300;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction of the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    // Convergence takes O(sqrt(max(a, b))) terms.
    let max_iter = 200 + 10 * (a.max(b).sqrt() as usize);

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `I_x(a, b)`, evaluated by continued fraction on whichever side of
/// `x = (a + 1) / (a + b + 2)` converges fastest.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("incomplete beta needs a, b > 0 (a={a}, b={b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("incomplete beta needs x in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Upper tail `P(F > f)` of the F distribution.
pub fn f_upper_tail(f: f64, df1: f64, df2: f64) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::Domain(format!("F statistic {f} must be >= 0")));
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))
}

/// Two-sided `P(|T| > |t|)` for Student's t with `df` degrees of freedom.
pub fn t_two_sided(t: f64, df: f64) -> Result<f64> {
    if t.is_infinite() {
        return Ok(0.0);
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Formats a p-value, clamping below [`P_FLOOR`].
pub fn format_p(p: f64) -> String {
    if p < P_FLOOR {
        "<1e-300".to_string()
    } else {
        format!("{p:.6e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub ss_between: f64,
    pub ss_within: f64,
}

fn grouped(values: &[f64], groups: &[usize]) -> Result<BTreeMap<usize, Vec<f64>>> {
    if values.len() != groups.len() {
        return Err(Error::Domain(format!(
            "{} values but {} group labels",
            values.len(),
            groups.len()
        )));
    }
    let mut by_group: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&v, &g) in values.iter().zip(groups) {
        by_group.entry(g).or_default().push(v);
    }
    Ok(by_group)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn one_way_anova(values: &[f64], groups: &[usize]) -> Result<AnovaResult> {
    let by_group = grouped(values, groups)?;
    let k = by_group.len();
    let n = values.len();
    if k < 2 {
        return Err(Error::Config(format!("ANOVA needs at least 2 groups, got {k}")));
    }
    if n <= k {
        return Err(Error::Config(format!("ANOVA needs more values ({n}) than groups ({k})")));
    }
    let grand = mean(values);
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for xs in by_group.values() {
        let m = mean(xs);
        ss_between += xs.len() as f64 * (m - grand) * (m - grand);
        ss_within += xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    if ss_within == 0.0 {
        return Err(Error::DegenerateVariance(
            "all groups have zero within-group variance".into(),
        ));
    }
    let df_between = k - 1;
    let df_within = n - k;
    let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    let p = f_upper_tail(f, df_between as f64, df_within as f64)?;
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p,
        ss_between,
        ss_within,
    })
}

/// Welch's unequal-variance t-test; returns `(t, df, two-sided p)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Domain("Welch test needs at least 2 values per group".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let var = |xs: &[f64], m: f64| xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    let (va, vb) = (var(a, ma) / a.len() as f64, var(b, mb) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        let p = if ma == mb { 1.0 } else { 0.0 };
        let t = if ma == mb { 0.0 } else { f64::INFINITY.copysign(ma - mb) };
        return Ok((t, f64::NAN, p));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok((t, df, t_two_sided(t, df)?))
}

/// Symmetric matrices over the sorted distinct group ids. `None` marks a
/// pair skipped because a group has fewer than two values.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTests {
    pub groups: Vec<usize>,
    pub raw: Vec<Vec<Option<f64>>>,
    pub adjusted: Vec<Vec<Option<f64>>>,
}

/// `min(1, p * comparisons)`.
pub fn bonferroni(p: f64, comparisons: usize) -> f64 {
    (p * comparisons.max(1) as f64).min(1.0)
}

/// Welch t-tests for every unordered group pair, Bonferroni-adjusted by the
/// total number of pairs.
pub fn pairwise_t_bonferroni(values: &[f64], groups: &[usize]) -> Result<PairwiseTests> {
    let by_group = grouped(values, groups)?;
    let ids: Vec<usize> = by_group.keys().copied().collect();
    let samples: Vec<&Vec<f64>> = by_group.values().collect();
    let k = ids.len();
    let pairs = k * k.saturating_sub(1) / 2;
    let mut raw = vec![vec![None; k]; k];
    let mut adjusted = vec![vec![None; k]; k];
    for i in 0..k {
        raw[i][i] = Some(1.0);
        adjusted[i][i] = Some(1.0);
        for j in (i + 1)..k {
            if samples[i].len() < 2 || samples[j].len() < 2 {
                continue;
            }
            let (_, _, p) = welch_t_test(samples[i], samples[j])?;
            let adj = bonferroni(p, pairs);
            raw[i][j] = Some(p);
            raw[j][i] = Some(p);
            adjusted[i][j] = Some(adj);
            adjusted[j][i] = Some(adj);
        }
    }
    Ok(PairwiseTests {
        groups: ids,
        raw,
        adjusted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_boundaries_and_closed_forms() {
        for &(a, b) in &[(0.5, 0.5), (1.0, 3.0), (7.0, 2.5)] {
            assert_eq!(regularized_incomplete_beta(a, b, 0.0).unwrap(), 0.0);
            assert_eq!(regularized_incomplete_beta(a, b, 1.0).unwrap(), 1.0);
        }
        for &x in &[0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((regularized_incomplete_beta(1.0, 1.0, x).unwrap() - x).abs() < 1e-14);
            // I_x(a, 1) = x^a and I_x(1, b) = 1 - (1 - x)^b
            let v = regularized_incomplete_beta(3.5, 1.0, x).unwrap();
            assert!((v - x.powf(3.5)).abs() < 1e-13);
            let v = regularized_incomplete_beta(1.0, 4.0, x).unwrap();
            assert!((v - (1.0 - (1.0 - x).powi(4))).abs() < 1e-13);
        }
        assert!((regularized_incomplete_beta(2.0, 2.0, 0.5).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn beta_domain_errors() {
        assert!(regularized_incomplete_beta(0.0, 1.0, 0.5).is_err());
        assert!(regularized_incomplete_beta(1.0, -1.0, 0.5).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, 1.5).is_err());
        assert!(regularized_incomplete_beta(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn ln_gamma_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0));
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn anova_fixture() {
        let r = one_way_anova(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_eq!(r.ss_between, 13.5);
        assert_eq!(r.ss_within, 4.0);
        assert_eq!(r.f, 13.5);
        assert_eq!((r.df_between, r.df_within), (1, 4));
        assert!((r.p - 0.021).abs() < 1e-3);
    }

    #[test]
    fn anova_no_between_variance() {
        let r = one_way_anova(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn anova_errors() {
        assert!(matches!(one_way_anova(&[1.0, 2.0], &[0, 0]), Err(Error::Config(_))));
        assert!(matches!(
            one_way_anova(&[1.0, 1.0, 2.0, 2.0], &[0, 0, 1, 1]),
            Err(Error::DegenerateVariance(_))
        ));
        assert!(one_way_anova(&[1.0, 2.0], &[0, 1]).is_err());
    }

    #[test]
    fn welch_identical_groups() {
        let (t, _, p) = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn bonferroni_scales_by_pairs() {
        let values = [1.0, 2.0, 3.0, 1.5, 2.5, 3.5, 10.0, 11.0, 12.5];
        let groups = [0, 0, 0, 1, 1, 1, 2, 2, 2];
        let r = pairwise_t_bonferroni(&values, &groups).unwrap();
        for i in 0..3 {
            assert_eq!(r.adjusted[i][i], Some(1.0));
            for j in 0..3 {
                let (raw, adj) = (r.raw[i][j].unwrap(), r.adjusted[i][j].unwrap());
                assert!(adj >= raw);
                assert_eq!(r.adjusted[i][j], r.adjusted[j][i]);
                if i != j {
                    assert_eq!(adj, (raw * 3.0).min(1.0));
                }
            }
        }
    }

    #[test]
    fn bonferroni_three_groups() {
        assert!((bonferroni(0.02, 3) - 0.06).abs() < 1e-15);
        assert_eq!(bonferroni(0.5, 3), 1.0);
    }

    #[test]
    fn bonferroni_flags_small_groups() {
        let r = pairwise_t_bonferroni(&[1.0, 2.0, 5.0, 6.0, 9.0], &[0, 0, 1, 1, 2]).unwrap();
        assert!(r.raw[0][2].is_none());
        assert!(r.raw[0][1].is_some());
    }

    #[test]
    fn p_formatting() {
        assert_eq!(format_p(1e-320), "<1e-300");
        assert_eq!(format_p(0.5), "5.000000e-1");
    }
}
