use std::time::Instant;

use netbell::inequalities::{md_bound, nth_root, s_n};
use netbell::lhv::{lhv_behavior, md_degree, MDLhvModel};
use netbell::oracle::{
    enumerate_deterministic, max_s_given_md, max_s_lhv, saturating_model, SearchConfig,
};
use netbell::quantum::CentralSignConvention;
use netbell::scenario::no_signaling_check;
use netbell::{NetError, Scenario};

fn signaling(m: f64, grid: usize) -> SearchConfig {
    SearchConfig {
        m_budget: m,
        grid_resolution: grid,
        allow_signaling: true,
        ..SearchConfig::default()
    }
}

#[test]
fn classical_bilocal_bound_exhaustive() {
    let start = Instant::now();
    let r = max_s_lhv(&Scenario::bilocal(), &[2, 2]).unwrap();
    assert_eq!(r.method, "exhaustive");
    assert_eq!(r.skeletons, 65536);
    assert!((r.best_s - 1.0).abs() < 1e-9, "{}", r.best_s);
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn classical_bound_with_trivial_alphabet() {
    let r = max_s_lhv(&Scenario::bilocal(), &[1, 2]).unwrap();
    assert!((r.best_s - 1.0).abs() < 1e-9);
    let r = max_s_lhv(&Scenario::bilocal(), &[1, 1]).unwrap();
    assert!((r.best_s - 1.0).abs() < 1e-9);
}

#[test]
fn classical_star_bound() {
    let s3 = Scenario::star(3).unwrap();
    let r = max_s_lhv(&s3, &[2, 2, 2]).unwrap();
    assert_eq!(r.method, "reduced");
    assert!((r.best_s - 2.0).abs() < 1e-6);
    // without shared randomness only one component can be nonzero
    let r = max_s_lhv(&s3, &[1, 1, 1]).unwrap();
    assert_eq!(r.method, "exhaustive");
    assert!((r.best_s - 1.0).abs() < 1e-9);
}

#[test]
fn empty_alphabet_rejected() {
    assert!(matches!(
        max_s_lhv(&Scenario::bilocal(), &[0, 2]),
        Err(NetError::OutOfRange(_))
    ));
}

#[test]
fn search_without_dependence_is_classical() {
    for n in [2, 3] {
        let sc = Scenario::star(n).unwrap();
        for cfg in [SearchConfig::default(), signaling(0.0, 100)] {
            let r = max_s_given_md(&sc, &cfg).unwrap();
            let bound = (1u64 << (n - 2)) as f64;
            assert!((r.best_s - bound).abs() < 1e-9, "n = {n}: {}", r.best_s);
            assert_eq!(r.achieved_m, 0.0);
            assert!(r.no_signaling);
        }
    }
}

#[test]
fn signaling_optimum_matches_closed_form() {
    // Exact one-sided optimum for two sources: sqrt(1 + M/2).
    let sc = Scenario::bilocal();
    for m in [0.2, 0.343_145_750_507_619_8, 1.0, 2.0] {
        let r = max_s_given_md(&sc, &signaling(m, 200)).unwrap();
        let exact = (1.0 + m / 2.0).sqrt();
        assert!(r.best_s <= exact + 1e-9, "M = {m}: {}", r.best_s);
        assert!(exact - r.best_s < 1e-6, "M = {m}: {}", r.best_s);
        assert!(r.best_s <= md_bound(2, m).unwrap() + 1e-9);
    }
    // three sources at full dependence: 2^{4/3}
    let r = max_s_given_md(&Scenario::star(3).unwrap(), &signaling(2.0, 100)).unwrap();
    assert!((r.best_s - 2f64.powf(4.0 / 3.0)).abs() < 1e-9);
}

#[test]
fn no_signaling_search_stays_classical() {
    for (n, m) in [(2, 0.5), (2, 2.0), (3, 1.0)] {
        let r = max_s_given_md(&Scenario::star(n).unwrap(), &SearchConfig::with_budget(m)).unwrap();
        assert!((r.best_s - (1u64 << (n - 2)) as f64).abs() < 1e-9);
        assert!(r.no_signaling);
    }
}

#[test]
fn results_are_sound() {
    for (n, cfg) in [
        (2, signaling(0.7, 50)),
        (3, signaling(0.3, 40)),
        (2, SearchConfig::with_budget(1.2)),
    ] {
        let r = max_s_given_md(&Scenario::star(n).unwrap(), &cfg).unwrap();
        let t = lhv_behavior(&r.best_model).unwrap();
        let report = s_n(&t).unwrap();
        assert!((report.aggregate_s - r.best_s).abs() < 1e-9);
        assert_eq!(report.components, r.certificate);
        assert!((md_degree(&r.best_model, 0).unwrap() - r.achieved_m).abs() < 1e-12);
        assert!(r.achieved_m <= cfg.m_budget + 1e-12);
        assert_eq!(no_signaling_check(&t, 1e-10).passed, r.no_signaling);
        let json = serde_json::to_string(&r.best_model).unwrap();
        assert_eq!(MDLhvModel::from_json_str(&json).unwrap(), r.best_model);
    }
}

#[test]
fn monotone_in_budget() {
    for n in [2, 3] {
        let sc = Scenario::star(n).unwrap();
        let mut last = f64::NEG_INFINITY;
        for k in 0..=10 {
            let r = max_s_given_md(&sc, &signaling(0.2 * k as f64, 40)).unwrap();
            assert!(r.best_s >= last - 1e-12);
            last = r.best_s;
        }
    }
}

#[test]
fn deterministic_results() {
    let sc = Scenario::star(3).unwrap();
    let cfg = signaling(0.9, 30);
    assert_eq!(max_s_given_md(&sc, &cfg).unwrap(), max_s_given_md(&sc, &cfg).unwrap());
}

#[test]
fn other_dependent_source() {
    let cfg = SearchConfig {
        dependent_source: 1,
        ..signaling(1.0, 100)
    };
    let r = max_s_given_md(&Scenario::bilocal(), &cfg).unwrap();
    assert!(((1.5f64).sqrt() - r.best_s).abs() < 1e-6);
    assert!(md_degree(&r.best_model, 0).unwrap() == 0.0);
}

/// Literal brute force: every skeleton and every gridded one-sided
/// distribution for two sources.
fn literal_md_max(m: f64, grid: usize) -> f64 {
    let sc = Scenario::bilocal();
    let conv = CentralSignConvention::standard(2).unwrap();
    let g: Vec<f64> = (0..=grid).map(|k| k as f64 / grid as f64).collect();
    let mut best = f64::NEG_INFINITY;
    for sk in enumerate_deterministic(&sc, &[2, 2]).unwrap() {
        let mut ij = [[[0.0; 4]; 4]; 2];
        for l1 in 0..2 {
            for l2 in 0..2 {
                let c = sk.central[l1 + 2 * l2];
                for x in 0..2 {
                    for z in 0..2 {
                        let a = sk.responses[0][l1][x] as f64;
                        let cc = sk.responses[1][l2][z] as f64;
                        let par = if x ^ z == 1 { -1.0 } else { 1.0 };
                        ij[0][x * 2 + z][l1 * 2 + l2] = 0.25 * a * cc * conv.sign(1, c);
                        ij[1][x * 2 + z][l1 * 2 + l2] = 0.25 * par * a * cc * conv.sign(2, c);
                    }
                }
            }
        }
        for &r0 in &g {
            for &r1 in &g {
                if 2.0 * (r0 - r1).abs() > m + 1e-12 {
                    continue;
                }
                for &q in &g {
                    let mut v = [0.0; 2];
                    for (k, comp) in ij.iter().enumerate() {
                        for (xz, row) in comp.iter().enumerate() {
                            let r = if xz >> 1 == 0 { r0 } else { r1 };
                            let w = [r * q, r * (1.0 - q), (1.0 - r) * q, (1.0 - r) * (1.0 - q)];
                            v[k] += w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    best = best.max(nth_root(v[0].abs(), 2) + nth_root(v[1].abs(), 2));
                }
            }
        }
    }
    best
}

#[test]
fn decomposed_search_matches_literal_enumeration() {
    for m in [0.0, 0.5, 1.0, 2.0] {
        let grid = 4;
        let literal = literal_md_max(m, grid);
        let cfg = SearchConfig {
            refine: false,
            ..signaling(m, grid)
        };
        let r = max_s_given_md(&Scenario::bilocal(), &cfg).unwrap();
        assert!((r.best_s - literal).abs() < 1e-12, "M = {m}: {} vs {literal}", r.best_s);
    }
}

#[test]
fn saturating_model_is_no_signaling() {
    for (n, m) in [(2, 0.0), (2, 2.0), (3, 0.142_135_623_730_950_5)] {
        let model = saturating_model(n, m).unwrap();
        let t = lhv_behavior(&model).unwrap();
        assert!(no_signaling_check(&t, 1e-10).passed);
        assert!(md_degree(&model, 0).unwrap() <= m + 1e-12);
    }
}
