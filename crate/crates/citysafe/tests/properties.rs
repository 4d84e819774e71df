//! Property tests over the public API: invariants that must hold for any
//! input, not just the frozen fixtures.

use citysafe::cluster::{kmeans, silhouette, Label, Metric, PointSet};
use citysafe::geocode::{point_in_ring, GeoPoint};
use citysafe::ingest::{drop_duplicates, parse_table, TableSchema};
use citysafe::model::{chi_square_of_table, evaluate, pearson, train_test_split, Design};
use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;

fn paired_series() -> impl Strategy<Value = (Vec<Option<f64>>, Vec<Option<f64>>)> {
    (2usize..50).prop_flat_map(|n| {
        (
            vec(option::of(-1e3..1e3f64), n),
            vec(option::of(-1e3..1e3f64), n),
        )
    })
}

fn design(n: usize, p: usize) -> impl Strategy<Value = Design> {
    (
        vec(vec(-100.0..100.0f64, p), n),
        vec(-100.0..100.0f64, n),
    )
        .prop_map(move |(rows, y)| Design {
            feature_names: (0..p).map(|i| format!("x{i}")).collect(),
            target_name: "y".into(),
            row_ids: (0..rows.len()).map(|i| i.to_string()).collect(),
            rows,
            y,
        })
}

proptest! {
    #[test]
    fn pearson_is_symmetric_and_bounded((a, b) in paired_series()) {
        let fwd = pearson(&a, &b);
        let rev = pearson(&b, &a);
        prop_assert_eq!(fwd.is_some(), rev.is_some());
        if let (Some(f), Some(r)) = (fwd, rev) {
            prop_assert!((f - r).abs() <= 1e-12);
            prop_assert!(f.abs() <= 1.0 + 1e-12, "|r| = {}", f.abs());
        }
    }

    #[test]
    fn split_partitions_every_row(
        d in (2usize..40, 1usize..4).prop_flat_map(|(n, p)| design(n, p)),
        fraction in 0.05..0.95f64,
        seed in any::<u64>(),
    ) {
        let n = d.len();
        let (train, test) = train_test_split(&d, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), n);
        prop_assert_eq!(test.len(), (n as f64 * fraction).ceil() as usize);
        let mut ids: Vec<&String> = train.row_ids.iter().chain(&test.row_ids).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), n, "rows lost or duplicated by the split");
    }

    #[test]
    fn silhouette_stays_in_unit_interval(
        points in vec((-50.0..50.0f64, -50.0..50.0f64), 4..30),
        raw_labels in vec(option::of(0usize..3), 4..30),
    ) {
        let n = points.len().min(raw_labels.len());
        let ps = PointSet::from_points(
            points[..n].iter().map(|&(a, b)| [a, b]).collect(),
        ).unwrap();
        let mut labels: Vec<Label> = raw_labels[..n]
            .iter()
            .map(|l| l.map_or(Label::Noise, Label::Cluster))
            .collect();
        // Guarantee two occupied clusters so the score is defined.
        labels[0] = Label::Cluster(0);
        labels[1] = Label::Cluster(1);
        let s = silhouette(&ps, &labels, Metric::Euclidean).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s), "s = {s}");
    }

    #[test]
    fn metrics_are_symmetric_and_zero_on_self(
        a in (-89.0..89.0f64, -179.0..179.0f64),
        b in (-89.0..89.0f64, -179.0..179.0f64),
    ) {
        for metric in [Metric::Euclidean, Metric::Haversine] {
            let (pa, pb) = ([a.0, a.1], [b.0, b.1]);
            prop_assert!(metric.distance(pa, pb) >= 0.0);
            prop_assert!((metric.distance(pa, pb) - metric.distance(pb, pa)).abs() <= 1e-9);
            prop_assert!(metric.distance(pa, pa).abs() <= 1e-9);
        }
    }

    #[test]
    fn chi_square_statistic_is_nonnegative(
        table in (2usize..5, 2usize..5).prop_flat_map(|(r, c)| vec(vec(0.0..50.0f64, c), r)),
    ) {
        let total: f64 = table.iter().flatten().sum();
        prop_assume!(total > 0.0);
        let (chi2, df) = chi_square_of_table(&table).unwrap();
        prop_assert!(chi2 >= -1e-12 && chi2.is_finite(), "chi2 = {chi2}");
        prop_assert_eq!(df, (table.len() - 1) * (table[0].len() - 1));
    }

    #[test]
    fn evaluate_bounds_hold(
        pairs in vec((-100.0..100.0f64, -100.0..100.0f64), 2..50),
    ) {
        let y_true: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y_pred: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (mse, r2) = evaluate(&y_true, &y_pred).unwrap();
        prop_assert!(mse >= 0.0);
        prop_assert!(r2 <= 1.0 + 1e-12, "r2 = {r2}");
    }

    #[test]
    fn kmeans_respects_k_and_never_raises_sse(
        points in vec((-50.0..50.0f64, -50.0..50.0f64), 6..40),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let ps = PointSet::from_points(points.iter().map(|&(a, b)| [a, b]).collect()).unwrap();
        prop_assume!(k <= ps.n_distinct());
        let out = kmeans(&ps, k, 50, seed, Metric::Euclidean).unwrap();
        prop_assert!(out.clustering.n_clusters_found <= k);
        for l in &out.clustering.labels {
            match l {
                Label::Cluster(c) => prop_assert!(*c < k),
                Label::Noise => prop_assert!(false, "kmeans produced noise"),
            }
        }
        for w in out.sse_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "SSE rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn ring_vertices_are_inside_and_far_points_are_not(
        raw in vec((0.0..std::f64::consts::TAU, 0.5..3.0f64), 3..10),
    ) {
        // Star-shaped ring around the origin: angles sorted, one vertex per
        // sufficiently distinct angle.
        let mut polar = raw.clone();
        polar.sort_by(|x, y| x.0.total_cmp(&y.0));
        polar.dedup_by(|x, y| (x.0 - y.0).abs() < 1e-2);
        prop_assume!(polar.len() >= 3);
        let mut ring: Vec<GeoPoint> = polar
            .iter()
            .map(|&(t, r)| GeoPoint { lat: r * t.sin(), lon: r * t.cos() })
            .collect();
        ring.push(ring[0]);

        for v in &ring {
            prop_assert!(point_in_ring(*v, &ring), "vertex ({}, {}) not inside", v.lat, v.lon);
        }
        // Everything at radius > 3 is outside by construction.
        for &(t, r) in &polar {
            let far = GeoPoint { lat: (r + 5.0) * t.sin(), lon: (r + 5.0) * t.cos() };
            prop_assert!(!point_in_ring(far, &ring));
        }
    }

    #[test]
    fn dedup_is_idempotent(rows in vec((0i8..5, 0i8..5), 1..30)) {
        let mut csv_text = String::from("a,b\n");
        for (a, b) in &rows {
            csv_text.push_str(&format!("{a},{b}\n"));
        }
        let schema: TableSchema =
            serde_json::from_value(serde_json::json!({"a": "integer", "b": "integer"})).unwrap();
        let d = parse_table(csv_text.as_bytes(), "t", &schema).unwrap();
        let once = drop_duplicates(&d);
        let twice = drop_duplicates(&once);
        prop_assert_eq!(once.rows.len(), twice.rows.len());
        prop_assert_eq!(once.to_csv_string(), twice.to_csv_string());
        prop_assert!(once.rows.len() <= d.rows.len());
    }
}
