use std::collections::BTreeMap;

use proptest::collection::vec;
use proptest::prelude::*;
use sepscore::cvi::{bezdek, calinski_harabasz, cvi_bundle, davies_bouldin_star, dunn, thornton, CviBundle};
use sepscore::datasets::{generate_swiss_roll, SwissRollSpec};
use sepscore::harness::{
    evaluate, select_best, tie_averaged_ranks, CandidateKey, CandidateRow, EmbeddingCandidate, Normalization,
    ScoreOptions,
};
use sepscore::io::{read_labeled_csv, write_labeled_csv};
use sepscore::psi::psi_all;
use sepscore::significance::{bh_adjust, permuted_grouping, summarize};
use sepscore::similarity::{pca_project, psi_triangle_contains};
use sepscore::stats::{auc_pr, auc_roc, mann_whitney_p};
use sepscore::{Better, CentroidMode, IndexId, IndexScore, LabeledPointCloud};

fn build(groups: &[Vec<Vec<f64>>]) -> LabeledPointCloud {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (g, pts) in groups.iter().enumerate() {
        for p in pts {
            rows.push(p.clone());
            labels.push(format!("g{g}"));
        }
    }
    LabeledPointCloud::new(rows, labels).unwrap()
}

fn arb_cloud(max_groups: usize, max_per_group: usize) -> impl Strategy<Value = LabeledPointCloud> {
    (1usize..=4, 2usize..=max_groups).prop_flat_map(move |(dims, k)| {
        vec(vec(vec(-50.0..50.0_f64, dims), 2..=max_per_group), k).prop_map(|g| build(&g))
    })
}

fn map_rows(c: &LabeledPointCloud, f: impl Fn(&[f64]) -> Vec<f64>) -> LabeledPointCloud {
    let coords = c.rows().flat_map(f).collect();
    c.with_coords(coords, c.n_dims()).unwrap()
}

/// Composition of plane rotations over every coordinate pair.
fn rotate(c: &LabeledPointCloud, angles: &[f64]) -> LabeledPointCloud {
    let d = c.n_dims();
    map_rows(c, |r| {
        let mut p = r.to_vec();
        let mut k = 0;
        for i in 0..d {
            for j in i + 1..d {
                let (s, co) = angles[k % angles.len()].sin_cos();
                let (a, b) = (p[i], p[j]);
                p[i] = co * a - s * b;
                p[j] = s * a + co * b;
                k += 1;
            }
        }
        p
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn psi_triple(c: &LabeledPointCloud, mode: CentroidMode) -> [f64; 3] {
    let r = psi_all(c, mode).unwrap();
    [r.psi_p, r.psi_roc, r.psi_pr]
}

fn cvis(b: &CviBundle) -> [f64; 6] {
    [b.sh, b.ch, b.dn, b.bz, b.db_star, b.th]
}

fn arb_mode() -> impl Strategy<Value = CentroidMode> {
    prop_oneof![Just(CentroidMode::Mean), Just(CentroidMode::Median), Just(CentroidMode::Mode)]
}

fn with_ties() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    let value = prop_oneof![ (-5i32..5).prop_map(f64::from), -5.0..5.0_f64 ];
    (vec(value.clone(), 1..30), vec(value, 1..30))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn auc_roc_is_pair_counting((pos, neg) in with_ties()) {
        let mut wins = 0.0;
        for p in &pos {
            for n in &neg {
                wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
            }
        }
        let auc = auc_roc(&pos, &neg).unwrap();
        prop_assert!((auc - wins / (pos.len() * neg.len()) as f64).abs() <= 1e-12);
    }

    #[test]
    fn auc_pr_is_average_precision((pos, neg) in with_ties()) {
        let mut sorted = pos.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let ap: f64 = sorted
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let hits = (k + 1) as f64;
                hits / (hits + neg.iter().filter(|&&n| n > s).count() as f64)
            })
            .sum::<f64>() / pos.len() as f64;
        let got = auc_pr(&pos, &neg).unwrap();
        prop_assert!((got - ap).abs() <= 1e-12, "{} vs {}", got, ap);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn mann_whitney_p_is_symmetric((xs, ys) in with_ties()) {
        let (a, b) = (mann_whitney_p(&xs, &ys).unwrap(), mann_whitney_p(&ys, &xs).unwrap());
        prop_assert!((a - b).abs() <= 1e-15, "{} vs {}", a, b);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn psi_bounded(c in arb_cloud(4, 12), mode in arb_mode()) {
        for v in psi_triple(&c, mode) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn psi_translation_and_scale_invariant(
        c in arb_cloud(3, 10),
        mode in arb_mode(),
        shift in vec(-100.0..100.0_f64, 4),
        scale in 0.01..100.0_f64,
    ) {
        let base = psi_triple(&c, mode);
        let moved = map_rows(&c, |r| r.iter().zip(&shift).map(|(x, s)| x + s).collect());
        let scaled = map_rows(&c, |r| r.iter().map(|x| x * scale).collect());
        for other in [psi_triple(&moved, mode), psi_triple(&scaled, mode)] {
            for (a, b) in base.iter().zip(other) {
                prop_assert!(close(*a, b, 1e-9), "{:?} vs {:?}", base, other);
            }
        }
    }

    #[test]
    fn psi_rotation_invariant_with_mean_centroids(c in arb_cloud(3, 10), angles in vec(0.0..6.3_f64, 6)) {
        let base = psi_triple(&c, CentroidMode::Mean);
        let turned = psi_triple(&rotate(&c, &angles), CentroidMode::Mean);
        for (a, b) in base.iter().zip(turned) {
            prop_assert!(close(*a, b, 1e-9), "{:?} vs {:?}", base, turned);
        }
    }

    #[test]
    fn cvis_rigid_invariant(c in arb_cloud(3, 10), angles in vec(0.0..6.3_f64, 6), shift in vec(-100.0..100.0_f64, 4)) {
        let base = cvis(&cvi_bundle(&c));
        let moved = map_rows(&rotate(&c, &angles), |r| r.iter().zip(&shift).map(|(x, s)| x + s).collect());
        let other = cvis(&cvi_bundle(&moved));
        for (a, b) in base.iter().zip(other) {
            prop_assert!(close(*a, b, 1e-9), "{:?} vs {:?}", base, other);
        }
    }

    #[test]
    fn cvis_scale_invariant_except_ch(c in arb_cloud(3, 10), scale in 0.01..100.0_f64) {
        let base = cvi_bundle(&c);
        let s = cvi_bundle(&map_rows(&c, |r| r.iter().map(|x| x * scale).collect()));
        for (a, b) in [(base.sh, s.sh), (base.dn, s.dn), (base.bz, s.bz), (base.db_star, s.db_star), (base.th, s.th)] {
            prop_assert!(close(a, b, 1e-9), "{} vs {}", a, b);
        }
    }

    #[test]
    fn cvi_ranges(c in arb_cloud(4, 12)) {
        let b = cvi_bundle(&c);
        prop_assert!((-1.0..=1.0).contains(&b.sh));
        prop_assert!((0.0..=1.0).contains(&b.th));
        prop_assert!(b.db_star > 0.0 && b.db_star <= 1.0);
        prop_assert!(b.ch >= 0.0 && b.dn >= 0.0 && b.bz >= 0.0);
    }

    #[test]
    fn db_star_from_db(c in arb_cloud(4, 12)) {
        let (db, star) = davies_bouldin_star(&c);
        if db.is_finite() {
            prop_assert!((star - 1.0 / (1.0 + db)).abs() <= 1e-15);
        }
    }

    #[test]
    fn thornton_matches_exhaustive_scan(c in arb_cloud(4, 15)) {
        let n = c.len();
        let dist = |i: usize, j: usize| c.row(i).iter().zip(c.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let mut agree = 0;
        for i in 0..n {
            let mut best = usize::MAX;
            for j in (0..n).filter(|&j| j != i) {
                if best == usize::MAX || dist(i, j) < dist(i, best) {
                    best = j;
                }
            }
            agree += usize::from(c.labels()[i] == c.labels()[best]);
        }
        prop_assert_eq!(thornton(&c), agree as f64 / n as f64);
    }

    #[test]
    fn zero_spread_diverges(centers in vec(vec(-50.0..50.0_f64, 2), 2..5), reps in 1usize..5) {
        let groups: Vec<Vec<Vec<f64>>> = centers.iter().map(|c| vec![c.clone(); reps + 1]).collect();
        let distinct = (0..centers.len()).all(|i| (i + 1..centers.len()).all(|j| centers[i] != centers[j]));
        prop_assume!(distinct);
        let c = build(&groups);
        prop_assert_eq!(dunn(&c), f64::INFINITY);
        prop_assert_eq!(bezdek(&c), f64::INFINITY);
        prop_assert_eq!(calinski_harabasz(&c), f64::INFINITY);
        let psi = psi_all(&c, CentroidMode::Median).unwrap();
        prop_assert_eq!((psi.psi_roc, psi.psi_pr), (1.0, 1.0));
    }

    #[test]
    fn bh_adjusted_is_monotone_and_capped(p in vec(0.0..=1.0_f64, 1..60)) {
        let adj = bh_adjust(&p).unwrap();
        for i in 0..p.len() {
            prop_assert!(adj[i] >= p[i] && adj[i] <= 1.0);
            for j in 0..p.len() {
                if p[i] <= p[j] {
                    prop_assert!(adj[i] <= adj[j]);
                }
            }
        }
    }

    #[test]
    fn p_value_follows_direction(obs in -5.0..5.0_f64, null in vec(-5.0..5.0_f64, 1..100)) {
        let up = summarize(obs, &null, Better::Higher, 0);
        let neg: Vec<f64> = null.iter().map(|v| -v).collect();
        let down = summarize(-obs, &neg, Better::Lower, 0);
        prop_assert_eq!(up.p_value, down.p_value);
    }

    #[test]
    fn permutations_preserve_group_sizes(c in arb_cloud(4, 12), seed in any::<u64>(), r in 0usize..50) {
        let g = c.grouping();
        let p = permuted_grouping(g, seed, r);
        prop_assert_eq!(p.sizes(), g.sizes());
        prop_assert_eq!(p.names(), g.names());
    }

    #[test]
    fn grouping_reconstructs_labels(c in arb_cloud(4, 12)) {
        prop_assert!(c.validate().is_ok() && c.validate().is_ok());
        let g = c.grouping();
        let mut rebuilt = vec![""; c.len()];
        for k in 0..g.n_groups() {
            let m = g.members(k);
            prop_assert!(m.windows(2).all(|w| w[0] < w[1]));
            for &i in m {
                rebuilt[i] = g.name(k);
            }
        }
        prop_assert!(rebuilt.iter().zip(c.labels()).all(|(a, b)| *a == b.as_str()));
    }

    #[test]
    fn select_best_survives_monotone_transform(values in vec(prop_oneof![(0i32..6).prop_map(f64::from), 0.0..6.0_f64], 1..20)) {
        let rows_of = |vals: &[f64]| -> Vec<CandidateRow> {
            vals.iter()
                .enumerate()
                .map(|(i, &v)| CandidateRow {
                    key: CandidateKey {
                        method: "m".into(),
                        params: BTreeMap::from([("i".to_string(), format!("{i:03}"))]),
                        normalization: Normalization::Non,
                    },
                    scores: BTreeMap::from([(IndexId::Ch, IndexScore::new(IndexId::Ch, v, None))]),
                    null: BTreeMap::new(),
                })
                .collect()
        };
        let transformed: Vec<f64> = values.iter().map(|v| v.powi(3) + 2.0 * v + 7.0).collect();
        prop_assert_eq!(select_best(&rows_of(&values), IndexId::Ch), select_best(&rows_of(&transformed), IndexId::Ch));
    }

    #[test]
    fn rank_sums(values in vec(prop_oneof![(0i32..4).prop_map(f64::from), -3.0..3.0_f64], 1..15), lower in any::<bool>()) {
        let better = if lower { Better::Lower } else { Better::Higher };
        let ranks = tie_averaged_ranks(&values, better);
        let m = values.len() as f64;
        prop_assert!((ranks.iter().sum::<f64>() - m * (m + 1.0) / 2.0).abs() < 1e-9);
        prop_assert!(ranks.iter().all(|&r| (1.0..=m).contains(&r)));
    }

    #[test]
    fn pca_row_order_invariant(
        (rows, cols, data) in (3usize..9, 2usize..10).prop_flat_map(|(r, c)| (Just(r), Just(c), vec(-10.0..10.0_f64, r * c))),
        shuffle in any::<u64>(),
    ) {
        let a = pca_project(&data, rows, cols, 2).unwrap();
        let mut perm: Vec<usize> = (0..rows).collect();
        perm.sort_by_key(|&i| (i as u64 + 1).wrapping_mul(shuffle | 1).rotate_left(17));
        let permuted: Vec<f64> = perm.iter().flat_map(|&i| data[i * cols..(i + 1) * cols].to_vec()).collect();
        let b = pca_project(&permuted, rows, cols, 2).unwrap();
        for j in 0..2 {
            let dot: f64 = perm.iter().enumerate().map(|(new, &old)| a.score(old, j) * b.score(new, j)).sum();
            let s = dot.signum();
            for (new, &old) in perm.iter().enumerate() {
                prop_assert!((a.score(old, j) - s * b.score(new, j)).abs() <= 1e-9);
            }
            let var: f64 = (0..rows).map(|i| a.score(i, j).powi(2)).sum::<f64>() / (rows - 1) as f64;
            prop_assert!((var - a.eigenvalues[j]).abs() <= 1e-9 * a.eigenvalues[j].max(1.0));
        }
    }

    #[test]
    fn triangle_matches_half_planes(tri in vec(-5.0..5.0_f64, 6), pt in vec(-5.0..5.0_f64, 2)) {
        let v = [[tri[0], tri[1]], [tri[2], tri[3]], [tri[4], tri[5]]];
        let side = |a: [f64; 2], b: [f64; 2], p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let p = [pt[0], pt[1]];
        if let Ok(inside) = psi_triangle_contains(p, v) {
            let oracle = (0..3).all(|k| side(v[k], v[(k + 1) % 3], p) * side(v[k], v[(k + 1) % 3], v[(k + 2) % 3]) >= 0.0);
            prop_assert_eq!(inside, oracle);
            for vertex in v {
                prop_assert!(psi_triangle_contains(vertex, v).unwrap());
            }
        }
    }

    #[test]
    fn csv_round_trip(c in arb_cloud(3, 8), raw in vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 2)) {
        let mut coords = c.coords().to_vec();
        coords[0] = raw[0];
        let last = coords.len() - 1;
        coords[last] = raw[1];
        let c = c.with_coords(coords, c.n_dims()).unwrap();
        let mut buf = Vec::new();
        write_labeled_csv(&c, &mut buf, None, "label").unwrap();
        let back = read_labeled_csv(buf.as_slice(), "label").unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn swiss_roll_arcs_balanced(n in 6usize..400, arcs in 2usize..6, seed in any::<u64>()) {
        prop_assume!(n >= 2 * arcs);
        let spec = SwissRollSpec { n_points: n, n_arcs: arcs, gap_fraction: 0.05, seed, ..Default::default() };
        let sizes = generate_swiss_roll(&spec).unwrap().cloud.grouping().sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn evaluation_ignores_candidate_order(clouds in vec(arb_cloud(3, 8), 3..5), rot in 0usize..5, seed in any::<u64>()) {
        let candidates: Vec<EmbeddingCandidate> = clouds
            .into_iter()
            .enumerate()
            .map(|(i, cloud)| EmbeddingCandidate {
                key: CandidateKey {
                    method: format!("m{}", i % 2),
                    params: BTreeMap::from([("k".to_string(), i.to_string())]),
                    normalization: Normalization::Non,
                },
                cloud,
            })
            .collect();
        let opts = ScoreOptions { mode: CentroidMode::Median, replicates: 5, seed };
        let a = evaluate("d", &candidates, &IndexId::ALL, &opts, 0.01).unwrap();
        let mut shuffled = candidates.clone();
        shuffled.rotate_left(rot % candidates.len());
        shuffled.reverse();
        let b = evaluate("d", &shuffled, &IndexId::ALL, &opts, 0.01).unwrap();
        prop_assert_eq!(a, b);
    }
}
