use proptest::prelude::*;
use rmst_core::{
    asymptotic_test, censoring_km, counting_processes, kaplan_meier, nelson_aalen, rmst,
    rmst_variance, studentized_perm_test, Estimand, Method, Sample, TestConfig, TimeWindow,
};

/// Times on a coarse grid so that ties of every kind occur.
fn observations(max: usize) -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec(
        ((1u32..=12).prop_map(|t| t as f64 * 0.5), any::<bool>()),
        1..max,
    )
}

fn to_sample(group: u8, obs: &[(f64, bool)]) -> Sample {
    let times: Vec<f64> = obs.iter().map(|o| o.0).collect();
    let status: Vec<u8> = obs.iter().map(|o| u8::from(o.1)).collect();
    Sample::new(group, &times, &status).unwrap()
}

fn estimable_sample(group: u8, obs: &[(f64, bool)]) -> Sample {
    let mut obs = obs.to_vec();
    obs.push((7.0, true));
    to_sample(group, &obs)
}

proptest! {
    #[test]
    fn product_of_left_limits_is_the_risk_fraction(obs in observations(40)) {
        let s = to_sample(1, &obs);
        let (km, g) = (kaplan_meier(&s), censoring_km(&s));
        let at_risk = counting_processes(&s).at_risk;
        let n = obs.len() as f64;
        for k in 0..=14 {
            let t = k as f64 * 0.5 + 0.25 * (k % 2) as f64;
            let lhs = km.left_limit(t) * g.left_limit(t);
            prop_assert!((lhs - at_risk.at(t) / n).abs() < 1e-12, "t={t}: {lhs} vs {}", at_risk.at(t) / n);
        }
    }

    #[test]
    fn uncensored_km_is_one_minus_ecdf(times in prop::collection::vec(0.01f64..20.0, 1..60)) {
        let status = vec![1u8; times.len()];
        let km = kaplan_meier(&Sample::new(1, &times, &status).unwrap());
        let n = times.len() as f64;
        for &t in times.iter().chain(&[0.0, 5.0, 25.0]) {
            let ecdf = times.iter().filter(|&&x| x <= t).count() as f64 / n;
            prop_assert!((km.eval(t) - (1.0 - ecdf)).abs() < 1e-12);
        }
    }

    #[test]
    fn km_lies_below_exp_of_minus_nelson_aalen(obs in observations(40)) {
        let s = to_sample(1, &obs);
        let (km, na) = (kaplan_meier(&s), nelson_aalen(&s));
        for k in 0..=14 {
            let t = k as f64 * 0.5;
            prop_assert!(km.eval(t) <= (-na.eval(t)).exp() + 1e-15);
        }
    }

    #[test]
    fn rmst_is_monotone_and_bounded(obs in observations(30)) {
        let s = estimable_sample(1, &obs);
        let km = kaplan_meier(&s);
        let mut prev = 0.0;
        for k in 1..=14 {
            let tau = k as f64 * 0.5;
            let w = TimeWindow::new(tau).unwrap();
            let mu = rmst(&km, w).unwrap();
            prop_assert!(mu >= prev - 1e-15 && mu <= tau + 1e-12);
            prop_assert!(rmst_variance(&s, w, s.len()).unwrap() >= 0.0);
            prev = mu;
        }
    }

    #[test]
    fn swapping_groups_mirrors_results(a in observations(15), b in observations(15), seed in any::<u64>()) {
        let (s1, s2) = (estimable_sample(1, &a), estimable_sample(2, &b));
        let w = TimeWindow::new(6.0).unwrap();
        let config = TestConfig { n_perm: 99, seed, ..TestConfig::default() };
        let (r12, r21) = match (
            studentized_perm_test(&s1, &s2, w, &config),
            studentized_perm_test(&s2.relabeled(1).unwrap(), &s1.relabeled(2).unwrap(), w, &config),
        ) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(_), Err(_)) => return Ok(()),
            _ => return Err(TestCaseError::fail("only one orientation failed")),
        };
        prop_assert_eq!(r12.p_value, r21.p_value);
        prop_assert_eq!(r12.point_estimate, -r21.point_estimate);
        let (c12, c21) = (r12.ci.unwrap(), r21.ci.unwrap());
        let mirrored = |x: f64, y: f64| x == -y || (x + y).abs() < 1e-12;
        prop_assert!(mirrored(c12.lower, c21.upper) && mirrored(c12.upper, c21.lower), "{:?} {:?}", c12, c21);
    }

    #[test]
    fn ci_excludes_null_exactly_when_test_rejects(a in observations(20), b in observations(20), seed in any::<u64>()) {
        let (s1, s2) = (estimable_sample(1, &a), estimable_sample(2, &b));
        let w = TimeWindow::new(6.5).unwrap();
        for estimand in [Estimand::Difference, Estimand::Ratio] {
            let config = TestConfig { n_perm: 199, seed, estimand, ..TestConfig::default() };
            for r in [asymptotic_test(&s1, &s2, w, &config), studentized_perm_test(&s1, &s2, w, &config)] {
                let Ok(r) = r else { continue };
                let ci = r.ci.unwrap();
                if r.statistic.is_finite() && (r.statistic - r.critical_value).abs() > 1e-9 {
                    prop_assert_eq!(r.reject, !ci.contains(estimand.null_value()), "{:?}", r);
                }
                if r.method == Method::StudentizedPerm {
                    prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
                }
            }
        }
    }
}
