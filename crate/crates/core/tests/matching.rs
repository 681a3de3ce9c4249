mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use kpfuse::evaluation::{
    area_under_curve, compare_modalities, equal_error_rate, report_from_scores, run_trials, score_trials, RocReport,
    TrialScores, TrialSet,
};
use kpfuse::matching::{correlation_verify, euclidean_distance, knn_verify, normalized_correlation, MatchMetric};
use kpfuse::{Error, Execution, FusedTemplate};

fn tpl(id: &str, values: Vec<f64>) -> FusedTemplate {
    FusedTemplate {
        subject_id: id.to_string(),
        k: 1,
        p: 1,
        values,
    }
}

fn random_tpl(r: &mut impl Rng, id: &str, len: usize) -> FusedTemplate {
    tpl(id, (0..len).map(|_| r.random_range(0.0..2.0)).collect())
}

fn gallery(r: &mut impl Rng, n: usize, len: usize) -> Vec<FusedTemplate> {
    (0..n).map(|i| random_tpl(r, &format!("g{i:02}"), len)).collect()
}

#[test]
fn euclidean_examples() {
    let mut a = vec![0.0; 10];
    let mut b = vec![0.0; 10];
    a[0] = 3.0;
    b[1] = 4.0;
    assert_eq!(euclidean_distance(&tpl("a", a.clone()), &tpl("b", b)).unwrap(), 5.0);
    assert_eq!(euclidean_distance(&tpl("a", a.clone()), &tpl("a", a)).unwrap(), 0.0);
    assert!(matches!(
        euclidean_distance(&tpl("a", vec![1.0]), &tpl("b", vec![1.0, 2.0])),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn correlation_examples() {
    let f = tpl("a", vec![1.0, 2.0, 0.0, 0.0]);
    assert!((normalized_correlation(&f, &f).unwrap().unwrap() - 1.0).abs() < 1e-12);
    let g = tpl("b", vec![0.0, 0.0, 3.0, 1.0]);
    assert_eq!(normalized_correlation(&f, &g).unwrap(), Some(0.0));
    let scaled = tpl("c", vec![2.5, 5.0, 0.0, 0.0]);
    assert!((normalized_correlation(&f, &scaled).unwrap().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(normalized_correlation(&f, &tpl("z", vec![0.0; 4])).unwrap(), None);
}

#[test]
fn verification_edge_cases() {
    let mut r = rng(1);
    let g = gallery(&mut r, 6, 32);
    let probe = g[3].clone();
    let d = knn_verify(&probe, &g, 1, 0.5).unwrap();
    assert!(d.accepted);
    assert_eq!(d.score, 0.0);
    assert_eq!(d.best_subject_id.as_deref(), Some("g03"));
    assert!(!knn_verify(&probe, &g, 3, -1.0).unwrap().accepted);
    let c = correlation_verify(&probe, &g, 1, 1.0).unwrap();
    assert!(c.accepted);
    assert!((c.score - 1.0).abs() < 1e-12);
    assert!(!correlation_verify(&probe, &g, 2, 1.1).unwrap().accepted);
    assert!(matches!(knn_verify(&probe, &[], 1, 0.0), Err(Error::EmptyGallery)));
    assert!(matches!(knn_verify(&probe, &g, 7, 0.0), Err(Error::BadK { .. })));
    assert!(matches!(knn_verify(&probe, &g, 0, 0.0), Err(Error::BadK { .. })));
    let zero = tpl("z", vec![0.0; 32]);
    let z = correlation_verify(&zero, &g, 1, -1.0).unwrap();
    assert!(!z.accepted);
    assert!(z.score.is_nan());
}

#[test]
fn ties_break_by_subject_id() {
    let same = vec![1.0, 1.0, 0.0];
    let g = vec![tpl("zed", same.clone()), tpl("amy", same.clone()), tpl("max", same.clone())];
    let d = knn_verify(&tpl("p", same.clone()), &g, 3, 0.0).unwrap();
    assert_eq!(d.best_subject_id.as_deref(), Some("amy"));
    let ids: Vec<&str> = d.neighbours.iter().map(|n| n.0.as_str()).collect();
    assert_eq!(ids, vec!["amy", "max", "zed"]);
}

/// Ten trials with distances chosen so every row of the table can be counted
/// by hand.
fn hand_trials() -> TrialSet {
    let origin = vec![0.0, 0.0];
    let probe = |d: f64| tpl("a", vec![d, 0.0]);
    TrialSet {
        gallery: vec![tpl("a", origin.clone()), tpl("b", origin)],
        genuine: [0.5, 1.0, 1.5, 2.0, 3.0].iter().map(|&d| (probe(d), "a".to_string())).collect(),
        impostor: [1.0, 2.5, 3.0, 4.0, 5.0].iter().map(|&d| (probe(d), "b".to_string())).collect(),
    }
}

#[test]
fn hand_counted_report() {
    let grid = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    let rep = run_trials(&hand_trials(), MatchMetric::KnnEuclidean, 1, Some(&grid)).unwrap();
    let table: Vec<(f64, f64, f64)> = rep.rows.iter().map(|r| (r.far, r.frr, r.recognition_rate)).collect();
    assert_eq!(
        table,
        vec![
            (0.0, 100.0, 0.0),
            (20.0, 60.0, 40.0),
            (20.0, 20.0, 80.0),
            (60.0, 0.0, 100.0),
            (80.0, 0.0, 100.0),
            (100.0, 0.0, 100.0),
        ]
    );
    assert_eq!(rep.eer, 20.0);
    // 20 of 25 genuine/impostor pairs ordered correctly, ties counted half.
    assert!((rep.auc - 0.8).abs() < 1e-12);
    assert_eq!((rep.genuine_trials, rep.impostor_trials), (5, 5));
}

#[test]
fn interpolated_crossing() {
    let grid = [1.0, 2.0];
    let rep = run_trials(&hand_trials(), MatchMetric::KnnEuclidean, 1, Some(&grid)).unwrap();
    assert_eq!(rep.eer, 20.0);
    let grid = [0.0, 1.0];
    // diff goes -100 -> -40: no crossing, closest grid point wins.
    let rep = run_trials(&hand_trials(), MatchMetric::KnnEuclidean, 1, Some(&grid)).unwrap();
    assert_eq!(rep.eer, 40.0);
}

#[test]
fn perfect_separation() {
    let s = TrialScores {
        genuine: vec![Some(0.9), Some(0.95), Some(0.99)],
        impostor: vec![Some(0.1), Some(0.2), Some(0.3), Some(0.4)],
    };
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let rep = report_from_scores(&s, MatchMetric::NormalizedCorrelation, &grid).unwrap();
    assert_eq!(rep.eer, 0.0);
    assert_eq!(rep.auc, 1.0);
}

#[test]
fn indistinguishable_scores_lie_on_the_diagonal() {
    let s = TrialScores {
        genuine: vec![Some(0.5); 4],
        impostor: vec![Some(0.5); 6],
    };
    let rep = report_from_scores(&s, MatchMetric::NormalizedCorrelation, &[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
    for r in &rep.rows {
        assert_eq!(r.far, r.recognition_rate);
    }
    assert!((rep.auc - 0.5).abs() < 1e-12);
}

#[test]
fn empty_trials_are_rejected() {
    let s = TrialScores {
        genuine: vec![],
        impostor: vec![Some(1.0)],
    };
    assert!(matches!(report_from_scores(&s, MatchMetric::KnnEuclidean, &[0.0]), Err(Error::EmptyTrials)));
    assert!(report_from_scores(
        &TrialScores {
            genuine: vec![Some(1.0)],
            impostor: vec![Some(1.0)]
        },
        MatchMetric::KnnEuclidean,
        &[1.0, 0.0]
    )
    .is_err());
}

fn report(metric: MatchMetric, gen: &[f64], imp: &[f64], grid: &[f64]) -> RocReport {
    let s = TrialScores {
        genuine: gen.iter().map(|&g| Some(g)).collect(),
        impostor: imp.iter().map(|&i| Some(i)).collect(),
    };
    report_from_scores(&s, metric, grid).unwrap()
}

#[test]
fn comparison_flags() {
    let m = MatchMetric::NormalizedCorrelation;
    let grid = [0.2, 0.5, 0.8];
    let face = report(m, &[0.6, 0.7], &[0.3, 0.65], &grid);
    let palm = report(m, &[0.4, 0.9], &[0.5, 0.1], &grid);
    let same = compare_modalities(&face, &palm, &face).unwrap();
    let vs_face = same.improvements.iter().find(|i| i.baseline == "face").unwrap();
    assert!(!vs_face.improved);
    let one = report(m, &[0.6, 0.7], &[0.3, 0.65], &[0.5]);
    let single = compare_modalities(&one, &one, &one).unwrap();
    assert_eq!(single.rows.len(), 3);
    assert!(matches!(compare_modalities(&face, &palm, &one), Err(Error::MismatchedGrids(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn euclidean_is_a_metric(seed in any::<u64>(), len in 1usize..64) {
        let mut r = rng(seed);
        let (a, b, c) = (random_tpl(&mut r, "a", len), random_tpl(&mut r, "b", len), random_tpl(&mut r, "c", len));
        let ab = euclidean_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, euclidean_distance(&b, &a).unwrap());
        prop_assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
        prop_assert!(ab > 0.0 || a.values == b.values);
        let ac = euclidean_distance(&a, &c).unwrap();
        let bc = euclidean_distance(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((ab - l2(&a.values, &b.values)).abs() <= 1e-9 * ab.max(1e-300));
    }

    #[test]
    fn correlation_bounds_and_scale(seed in any::<u64>(), len in 1usize..64, c in 1e-3f64..1e3) {
        let mut r = rng(seed);
        let a = random_tpl(&mut r, "a", len);
        let b = tpl("b", (0..len).map(|_| r.random_range(-1.0..1.0)).collect());
        if let Some(s) = normalized_correlation(&a, &b).unwrap() {
            prop_assert!(s.abs() <= 1.0 + 1e-12);
            prop_assert!((s - cosine(&a.values, &b.values).unwrap()).abs() < 1e-12);
            let scaled = tpl("a", a.values.iter().map(|v| v * c).collect());
            prop_assert!((normalized_correlation(&scaled, &b).unwrap().unwrap() - s).abs() < 1e-12);
        }
        let nonneg = random_tpl(&mut r, "n", len);
        if let Some(s) = normalized_correlation(&a, &nonneg).unwrap() {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn verification_matches_full_sort(seed in any::<u64>(), n in 1usize..21, k in 1usize..6, th in 0.0f64..8.0) {
        prop_assume!(k <= n);
        let mut r = rng(seed);
        let g = gallery(&mut r, n, 16);
        let probe = random_tpl(&mut r, "p", 16);

        let mut d: Vec<(f64, String)> = g.iter().map(|t| (l2(&probe.values, &t.values), t.subject_id.clone())).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let knn = knn_verify(&probe, &g, k, th).unwrap();
        prop_assert_eq!(knn.best_subject_id.as_deref(), Some(d[0].1.as_str()));
        prop_assert_eq!(knn.accepted, d[0].0 <= th);
        prop_assert_eq!(knn.neighbours.len(), k);

        let th = th / 8.0;
        let mut s: Vec<(f64, String)> =
            g.iter().map(|t| (cosine(&probe.values, &t.values).unwrap(), t.subject_id.clone())).collect();
        s.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let cor = correlation_verify(&probe, &g, k, th).unwrap();
        prop_assert_eq!(cor.best_subject_id.as_deref(), Some(s[0].1.as_str()));
        prop_assert!((cor.score - s[0].0).abs() < 1e-12);
        prop_assert_eq!(cor.accepted, cor.score >= th);
    }

    #[test]
    fn raising_threshold_is_monotone(seed in any::<u64>(), t1 in -1.0f64..4.0, dt in 0.0f64..2.0) {
        let mut r = rng(seed);
        let g = gallery(&mut r, 5, 8);
        let probe = random_tpl(&mut r, "p", 8);
        let t2 = t1 + dt;
        if knn_verify(&probe, &g, 2, t1).unwrap().accepted {
            prop_assert!(knn_verify(&probe, &g, 2, t2).unwrap().accepted);
        }
        if !correlation_verify(&probe, &g, 2, t1 / 4.0).unwrap().accepted {
            prop_assert!(!correlation_verify(&probe, &g, 2, t2 / 4.0).unwrap().accepted);
        }
    }

    #[test]
    fn sweep_counts_and_monotonicity(
        gen in prop::collection::vec(prop::option::weighted(0.95, 0.0f64..1.0), 1..30),
        imp in prop::collection::vec(prop::option::weighted(0.95, 0.0f64..1.0), 1..60),
        corr in any::<bool>(),
    ) {
        let metric = if corr { MatchMetric::NormalizedCorrelation } else { MatchMetric::KnnEuclidean };
        let grid: Vec<f64> = (0..=25).map(|i| i as f64 / 25.0).collect();
        let s = TrialScores { genuine: gen.clone(), impostor: imp.clone() };
        let rep = report_from_scores(&s, metric, &grid).unwrap();
        for (row, &t) in rep.rows.iter().zip(&grid) {
            let fa = row.far * imp.len() as f64 / 100.0;
            let fr = row.frr * gen.len() as f64 / 100.0;
            prop_assert!((fa - fa.round()).abs() < 1e-9 && (fr - fr.round()).abs() < 1e-9);
            let acc = |x: &Option<f64>| x.is_some_and(|v| if corr { v >= t } else { v <= t });
            prop_assert_eq!(fa.round() as usize, imp.iter().filter(|x| acc(x)).count());
            prop_assert_eq!(fr.round() as usize, gen.iter().filter(|x| !acc(x)).count());
            prop_assert!((row.recognition_rate - (100.0 - row.frr)).abs() < 1e-12);
        }
        for w in rep.rows.windows(2) {
            // Correlation tightens as the threshold rises, distance loosens.
            if corr {
                prop_assert!(w[1].far <= w[0].far && w[1].frr >= w[0].frr);
            } else {
                prop_assert!(w[1].far >= w[0].far && w[1].frr <= w[0].frr);
            }
        }
        prop_assert!((0.0..=1.0).contains(&rep.auc));
        prop_assert!((0.0..=100.0).contains(&rep.eer));
        prop_assert_eq!(rep.eer, equal_error_rate(&rep.rows));
        prop_assert_eq!(rep.auc, area_under_curve(&rep.rows));
    }

    #[test]
    fn trial_scoring_is_mode_independent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = gallery(&mut r, 6, 24);
        let probes: Vec<FusedTemplate> = g
            .iter()
            .map(|t| tpl(&t.subject_id, t.values.iter().map(|v| v + r.random_range(0.0..0.3)).collect()))
            .collect();
        let trials = TrialSet::all_pairs(g, &probes).unwrap();
        for metric in MatchMetric::ALL {
            let a = score_trials(&trials, metric, 1, Execution::Sequential).unwrap();
            let b = score_trials(&trials, metric, 1, Execution::Parallel).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
