use proptest::prelude::*;

use vlp_core::channel::{gain_breakdown, los_gain, nlos_gain, Channel};
use vlp_core::database::{load_database, save_database, Database, Fingerprint, PowerVector};
use vlp_core::regression::{knn_location_estimate, knn_power_estimate, nearest_neighbors};
use vlp_core::scene::{Led, Scene};
use vlp_core::{load_scene, Vec3};

fn scene_strategy() -> impl Strategy<Value = Scene> {
    (
        (2.0..8.0f64, 2.0..8.0f64, 2.0..4.0f64),
        prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64, 0.0..50.0f64), 1..6),
        (1e-5..1e-3f64, 20.0..90.0f64, 1.0..2.0f64, 0.1..1.0f64, 0.0..1.0f64),
        (0.2..3.0f64, 0.0..=1.0f64, 0.05..0.5f64),
        (prop::option::of(1e-9..1e-5f64), 1..2000u32),
    )
        .prop_map(|(room, leds, pd, ch, noise)| {
            let mut s = Scene::reference(1.0);
            s.room.width = room.0;
            s.room.depth = room.1;
            s.room.height = room.2;
            s.leds = leds
                .iter()
                .enumerate()
                .map(|(i, &(fx, fy, p))| Led {
                    // offset by index so positions never coincide
                    position: Vec3::new(fx * room.0 * 0.9 + 1e-3 * i as f64, fy * room.1 * 0.9, room.2 / 2.0),
                    tx_power: p,
                })
                .collect();
            s.pd.area = pd.0;
            s.pd.fov_half_angle = pd.1.to_radians();
            s.pd.refractive_index = pd.2;
            s.pd.optical_filter_gain = pd.3;
            s.pd.height_above_floor = pd.4 * room.2 * 0.9;
            s.channel.lambertian_order = ch.0;
            s.channel.reflectance = ch.1;
            s.channel.wall_patch_size = ch.2;
            s.noise.variance_per_led = vec![noise.0.unwrap_or(0.0); s.leds.len()];
            s.noise.averaging_count = noise.1;
            s
        })
}

fn room_point() -> impl Strategy<Value = Vec3> {
    (-2.5..=2.5f64, -2.5..=2.5f64).prop_map(|(x, y)| Vec3::new(x, y, -0.65))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scene_toml_round_trip(scene in scene_strategy()) {
        prop_assert!(scene.validate().is_ok());
        let back = load_scene(&scene.to_toml()).unwrap();
        prop_assert_eq!(back, scene);
    }

    #[test]
    fn neighbors_match_full_sort(
        points in prop::collection::vec(prop::collection::vec(-3i32..3, 2), 1..40),
        query in prop::collection::vec(-3.0..3.0f64, 2),
        k_frac in 0.0..1.0f64,
    ) {
        // integer coordinates produce plenty of exact ties
        let points: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|&v| f64::from(v)).collect()).collect();
        let k = 1 + (k_frac * (points.len() - 1) as f64) as usize;
        let nn = nearest_neighbors(&query, &points, k).unwrap();

        let mut order: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expected: Vec<usize> = order[..k].iter().map(|&(_, i)| i).collect();
        prop_assert_eq!(&nn.indices, &expected);
        prop_assert!(nn.distances.windows(2).all(|w| w[0] <= w[1]));
        let cutoff = nn.distances[k - 1];
        for (i, p) in points.iter().enumerate() {
            if !nn.indices.contains(&i) {
                let d = p.iter().zip(&query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                prop_assert!(d >= cutoff);
            }
        }
    }

    #[test]
    fn weights_form_a_convex_combination(
        points in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 1..30),
        query in prop::collection::vec(-5.0..5.0f64, 3),
        k in 1usize..30,
    ) {
        let k = k.min(points.len());
        let w = nearest_neighbors(&query, &points, k).unwrap().weights();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 4.0 * f64::EPSILON * k as f64);
    }

    #[test]
    fn power_estimate_is_bounded_and_scale_invariant(
        cells in prop::collection::btree_set((0i32..12, 0i32..12), 2..40),
        powers in prop::collection::vec(prop::collection::vec(0.0..1e-3f64, 2), 40),
        query in (0.0..12.0f64, 0.0..12.0f64),
        k in 1usize..6,
        scale in 0.1..10.0f64,
    ) {
        let make = |s: f64| {
            let entries = cells
                .iter()
                .zip(&powers)
                .map(|(&(x, y), p)| Fingerprint {
                    location: Vec3::new(f64::from(x) * s, f64::from(y) * s, 0.0),
                    powers: PowerVector::new(p.clone()),
                })
                .collect();
            Database::new(entries, "prop").unwrap()
        };
        let k = k.min(cells.len());
        let db = make(1.0);
        let q = Vec3::new(query.0, query.1, 0.0);
        let est = knn_power_estimate(q, &db, k).unwrap();
        let nn = nearest_neighbors(&q.to_array(), db.entries().iter().map(|e| e.location.to_array()), k).unwrap();
        for led in 0..2 {
            let sel: Vec<f64> = nn.indices.iter().map(|&i| db.entries()[i].powers[led]).collect();
            let lo = sel.iter().cloned().fold(f64::MAX, f64::min);
            let hi = sel.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert!(est[led] >= lo * (1.0 - 1e-12) && est[led] <= hi * (1.0 + 1e-12));
        }

        let scaled = knn_power_estimate(q * scale, &make(scale), k).unwrap();
        for (a, b) in est.iter().zip(scaled.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12));
        }
    }

    #[test]
    fn location_estimate_inside_neighbor_box(
        entries in prop::collection::btree_map((0i32..10, 0i32..10), (0.0..1.0f64, 0.0..1.0f64), 1..30),
        measured in (0.0..1.0f64, 0.0..1.0f64),
        k in 1usize..5,
    ) {
        let db = Database::new(
            entries
                .iter()
                .map(|(&(x, y), &(p, q))| Fingerprint {
                    location: Vec3::new(f64::from(x), f64::from(y), 0.0),
                    powers: PowerVector::new(vec![p, q]),
                })
                .collect(),
            "prop",
        )
        .unwrap();
        let k = k.min(db.len());
        let l = knn_location_estimate(&PowerVector::new(vec![measured.0, measured.1]), &db, k).unwrap();
        prop_assert!((-1e-12..=9.0 + 1e-12).contains(&l.x) && (-1e-12..=9.0 + 1e-12).contains(&l.y));
    }

    #[test]
    fn database_text_round_trip(
        cells in prop::collection::btree_set((0i32..20, 0i32..20), 1..25),
        powers in prop::collection::vec(prop::collection::vec(-1e-4..1e-2f64, 3), 25),
    ) {
        let db = Database::new(
            cells
                .iter()
                .zip(&powers)
                .map(|(&(x, y), p)| Fingerprint {
                    location: Vec3::new(f64::from(x) * 0.1 - 1.0, f64::from(y) / 7.0, -0.65),
                    powers: PowerVector::new(p.clone()),
                })
                .collect(),
            "0123456789abcdef",
        )
        .unwrap();
        let mut buf = Vec::new();
        save_database(&db, &mut buf).unwrap();
        prop_assert_eq!(load_database(&buf[..]).unwrap(), db);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gains_nonnegative_and_kappa_at_least_one(p in room_point(), led in 0usize..4) {
        let s = Scene::reference(20.0);
        let los = los_gain(&s.leds[led], p, &s).unwrap();
        let nlos = nlos_gain(&s.leds[led], p, &s);
        prop_assert!(los >= 0.0 && nlos >= 0.0);
        if los > 0.0 {
            let b = gain_breakdown(&s.leds[led], p, &s).unwrap();
            prop_assert!(b.kappa >= 1.0);
            prop_assert_eq!(b.total, b.los + b.nlos);
        }
    }

    #[test]
    fn reflection_gain_is_linear_in_reflectance(p in room_point(), led in 0usize..4, rho in 0.0..=1.0f64) {
        let s = Scene::reference(20.0);
        let unit = Channel::new(&s.with_reflectance(1.0)).nlos_gain(led, p).unwrap();
        let g = Channel::new(&s.with_reflectance(rho)).nlos_gain(led, p).unwrap();
        prop_assert_eq!(g, rho * unit);
    }

    #[test]
    fn received_power_scales_with_tx(p in room_point(), tx in 0.0..100.0f64) {
        let a = Channel::new(&Scene::reference(1.0)).noiseless_vector(p).unwrap();
        let b = Channel::new(&Scene::reference(tx)).noiseless_vector(p).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x * tx - y).abs() <= 1e-15 * y.abs().max(1e-30));
        }
    }
}
