use netbell::inequalities::{md_bound, s_n};
use netbell::lhv::{
    lhv_behavior, md_degree, md_report, paper_bilocal_model, paper_bilocal_table, paper_star_table,
    MDLhvModel, ModelReading,
};
use netbell::scenario::{no_signaling_check, validate_behavior};
use proptest::prelude::*;

fn normalize(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter().map(|p| p / total).collect()
}

/// Random model with binary alphabets. `rho_dep[x]` is party 1's law for
/// input `x`; the other sources use `rho_other[i]`.
fn one_sided_model(
    n: usize,
    tables: &[u8],
    rule: &[f64],
    rho_dep: [f64; 2],
    rho_other: &[f64],
) -> MDLhvModel {
    let joint = 1usize << n;
    let outcomes = 1usize << n;
    let responses = (0..n)
        .map(|i| {
            (0..2)
                .map(|lam| {
                    let bits = tables[i] >> (2 * lam);
                    let v = |b: u8| if bits >> b & 1 == 1 { -1 } else { 1 };
                    [v(0), v(1)]
                })
                .collect()
        })
        .collect();
    let central_rule = (0..joint)
        .map(|k| normalize(&rule[k * outcomes..(k + 1) * outcomes]))
        .collect();
    let distributions = (0..1usize << n)
        .map(|x| {
            (0..joint)
                .map(|k| {
                    let mut w = 1.0;
                    for i in 0..n {
                        let q = if i == 0 { rho_dep[x & 1] } else { rho_other[i - 1] };
                        w *= if k >> i & 1 == 0 { q } else { 1.0 - q };
                    }
                    w
                })
                .collect()
        })
        .collect();
    let mut dependence_pattern = vec![Vec::new(); n];
    dependence_pattern[0].push(0);
    MDLhvModel {
        n,
        lambda_sizes: vec![2; n],
        responses,
        central_rule,
        distributions,
        dependence_pattern,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn independent_bilocal_models_obey_classical_bound(
        tables in proptest::collection::vec(0u8..16, 2),
        rule in proptest::collection::vec(0.01f64..1.0, 16),
        q in proptest::collection::vec(0.0f64..1.0, 2),
    ) {
        let m = one_sided_model(2, &tables, &rule, [q[0], q[0]], &q[1..]);
        let t = lhv_behavior(&m).unwrap();
        prop_assert!(validate_behavior(&t, 1e-12).passed);
        prop_assert!(no_signaling_check(&t, 1e-10).passed);
        prop_assert!(s_n(&t).unwrap().aggregate_s <= 1.0 + 1e-9);
        prop_assert_eq!(md_degree(&m, 0).unwrap(), 0.0);
    }

    #[test]
    fn one_sided_bilocal_models_obey_bounds(
        tables in proptest::collection::vec(0u8..16, 2),
        rule in proptest::collection::vec(0.01f64..1.0, 16),
        r in proptest::collection::vec(0.0f64..1.0, 3),
    ) {
        let m = one_sided_model(2, &tables, &rule, [r[0], r[1]], &r[2..]);
        let t = lhv_behavior(&m).unwrap();
        prop_assert!(validate_behavior(&t, 1e-12).passed);
        let report = s_n(&t).unwrap();
        let (i, j) = (report.components[0], report.components[1]);
        prop_assert!(i.abs() + j.abs() <= 1.0 + 1e-12);
        let md = md_report(&m).unwrap();
        prop_assert!((md.m[0] - 2.0 * (r[0] - r[1]).abs()).abs() < 1e-12);
        prop_assert_eq!(md.m[1], 0.0);
        for (mi, fi) in md.m.iter().zip(&md.f) {
            prop_assert_eq!(*fi, 1.0 - mi / 2.0);
        }
        prop_assert!(report.aggregate_s <= md_bound(2, md.m[0]).unwrap() + 1e-9);
        prop_assert!(report.aggregate_s <= (1.0 + md.m[0] / 2.0).sqrt() + 1e-9);
    }

    #[test]
    fn one_sided_star_models_obey_bounds(
        tables in proptest::collection::vec(0u8..16, 3),
        rule in proptest::collection::vec(0.01f64..1.0, 64),
        r in proptest::collection::vec(0.0f64..1.0, 4),
    ) {
        let m = one_sided_model(3, &tables, &rule, [r[0], r[1]], &r[2..]);
        let t = lhv_behavior(&m).unwrap();
        prop_assert!(validate_behavior(&t, 1e-12).passed);
        let s = s_n(&t).unwrap().aggregate_s;
        let m1 = md_degree(&m, 0).unwrap();
        prop_assert!(s <= md_bound(3, m1).unwrap() + 1e-9);
        prop_assert!(s <= 4f64.powf(2.0 / 3.0) + 1e-9);
    }

    #[test]
    fn literal_tables_track_p(p in 0.0f64..=1.0) {
        let m = paper_bilocal_table(p, 1, 1).unwrap();
        prop_assert!((md_degree(&m, 0).unwrap() - 2.0 * p).abs() < 1e-12);
        let m = paper_star_table(p, 1, 1).unwrap();
        prop_assert!((md_degree(&m, 0).unwrap() - 2.0 * p).abs() < 1e-12);
    }
}

#[test]
fn blind_central_rule_keeps_no_signaling() {
    // central party ignores λ_1: the dependence cannot leak into marginals
    let mut rule = [0.0; 16];
    for k in 0..4 {
        rule[k * 4 + (k >> 1) * 3] = 1.0;
    }
    let rule: Vec<f64> = rule.iter().map(|v| v + 1e-300).collect();
    let m = one_sided_model(2, &[6, 9], &rule, [0.9, 0.2], &[0.4]);
    let t = lhv_behavior(&m).unwrap();
    assert!(no_signaling_check(&t, 1e-10).passed);
    assert!((md_degree(&m, 0).unwrap() - 1.4).abs() < 1e-12);
}

#[test]
fn paper_model_falls_back_to_search() {
    let pm = paper_bilocal_model(0.5).unwrap();
    assert_eq!(pm.reading, ModelReading::SearchFallback);
    assert!(!pm.literal_check.met);
    assert!(!pm.literal_check.no_signaling);
    assert!(pm.check.no_signaling);
    let t = lhv_behavior(&pm.model).unwrap();
    assert!(no_signaling_check(&t, 1e-10).passed);
}
