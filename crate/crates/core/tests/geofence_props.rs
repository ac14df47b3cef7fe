mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zooguide::geofence::{contains, nearest_hotspots, update, FenceEvent, FenceState, Geometry, DEFAULT_EXIT_BUFFER_M};
use zooguide::{GeoPoint, Hotspot};

use oracles::{offset, polygon_contains, star_polygon};

fn zoo() -> GeoPoint {
    GeoPoint::new(-37.7841, 144.9515)
}

proptest! {
    #[test]
    fn polygon_containment_matches_winding_number(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..12);
        let vertices = star_polygon(&mut rng, zoo(), n, 5.0, 80.0);
        let geometry = Geometry::Polygon { vertices: vertices.clone() };
        prop_assume!(geometry.validate().is_ok());
        let spot = Hotspot::polygon("p", vertices.clone(), "c");
        for _ in 0..20 {
            let p = offset(zoo(), rng.random_range(-90.0..90.0), rng.random_range(-90.0..90.0));
            prop_assert_eq!(contains(&spot, p), polygon_contains(&vertices, p), "point {:?}", p);
        }
    }

    #[test]
    fn circle_containment_is_distance(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = rng.random_range(1.0..100.0);
        let spot = Hotspot::circle("c", zoo(), radius, "c");
        let p = offset(zoo(), rng.random_range(-150.0..150.0), rng.random_range(-150.0..150.0));
        let d = oracles::chord_distance_m(zoo(), p);
        prop_assume!((d - radius).abs() > 1e-6);
        prop_assert_eq!(contains(&spot, p), d < radius);
    }

    /// Dither around a boundary point never produces a second event once
    /// inside, as long as the dither stays within the exit buffer.
    #[test]
    fn dither_inside_buffer_enters_once(seed in any::<u64>(), polygon in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (spot, edge) = if polygon {
            let half = rng.random_range(10.0..40.0);
            let corners = [(-half, -half), (half, -half), (half, half), (-half, half)]
                .map(|(e, n)| offset(zoo(), e, n));
            (Hotspot::polygon("spot", corners.to_vec(), "c"), offset(zoo(), half - 0.5, 0.0))
        } else {
            let radius = rng.random_range(10.0..40.0);
            (Hotspot::circle("spot", zoo(), radius, "c"), offset(zoo(), radius - 0.5, 0.0))
        };
        let hotspots = [spot];
        let amplitude = 0.45 * DEFAULT_EXIT_BUFFER_M;
        let mut state = FenceState::default();
        let mut entered = 0;
        let mut exited = 0;
        let (first, events) = update(&state, &hotspots, edge, DEFAULT_EXIT_BUFFER_M);
        state = first;
        for e in &events {
            match e {
                FenceEvent::Entered(_) => entered += 1,
                FenceEvent::Exited(_) => exited += 1,
            }
        }
        for _ in 0..200 {
            let p = offset(edge, rng.random_range(-amplitude..amplitude), rng.random_range(-amplitude..amplitude));
            let (next, events) = update(&state, &hotspots, p, DEFAULT_EXIT_BUFFER_M);
            state = next;
            for e in &events {
                match e {
                    FenceEvent::Entered(_) => entered += 1,
                    FenceEvent::Exited(_) => exited += 1,
                }
            }
        }
        prop_assert_eq!((entered, exited), (1, 0));
    }

    #[test]
    fn leaving_beyond_buffer_exits(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = rng.random_range(10.0..40.0);
        let hotspots = [Hotspot::circle("spot", zoo(), radius, "c")];
        let (inside, _) = update(&FenceState::default(), &hotspots, zoo(), DEFAULT_EXIT_BUFFER_M);
        let far = offset(zoo(), radius + DEFAULT_EXIT_BUFFER_M + rng.random_range(0.5..100.0), 0.0);
        let (after, events) = update(&inside, &hotspots, far, DEFAULT_EXIT_BUFFER_M);
        prop_assert_eq!(events, vec![FenceEvent::Exited("spot".into())]);
        prop_assert!(after.inside.is_empty());
    }

    #[test]
    fn events_sorted_by_id(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..8);
        let hotspots: Vec<Hotspot> = (0..n)
            .map(|i| Hotspot::circle(&format!("h{}", rng.random_range(0..1000) * 10 + i), zoo(), rng.random_range(5.0..50.0), "c"))
            .collect();
        let (_, events) = update(&FenceState::default(), &hotspots, zoo(), DEFAULT_EXIT_BUFFER_M);
        let ids: Vec<&str> = events.iter().map(|e| match e {
            FenceEvent::Entered(id) | FenceEvent::Exited(id) => id.as_str(),
        }).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        prop_assert_eq!(ids.len(), n);
        prop_assert_eq!(ids, sorted);
    }

    #[test]
    fn nearest_matches_brute_force(seed in any::<u64>(), k in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hotspots: Vec<Hotspot> = (0..rng.random_range(0..10))
            .map(|i| Hotspot::circle(&format!("h{i}"), offset(zoo(), rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0)), 20.0, "c"))
            .collect();
        let p = offset(zoo(), rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0));
        let mut oracle: Vec<(String, f64)> = hotspots
            .iter()
            .map(|h| {
                let Geometry::Circle { center, .. } = h.geometry else { unreachable!() };
                (h.id.clone(), oracles::chord_distance_m(center, p))
            })
            .collect();
        oracle.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        oracle.truncate(k);
        let got = nearest_hotspots(&hotspots, p, k);
        prop_assert_eq!(got.len(), oracle.len());
        for (g, o) in got.iter().zip(&oracle) {
            prop_assert_eq!(&g.0, &o.0);
            prop_assert!((g.1 - o.1).abs() < 1e-6);
        }
    }
}

#[test]
fn walk_through_circle_enters_and_exits_once() {
    let hotspots = [Hotspot::circle("tiger-spot", zoo(), 25.0, "tiger")];
    let mut state = FenceState::default();
    let mut log = Vec::new();
    for step in -100..=100 {
        let p = offset(zoo(), f64::from(step), 0.0);
        let (next, events) = update(&state, &hotspots, p, DEFAULT_EXIT_BUFFER_M);
        state = next;
        log.extend(events.into_iter().map(|e| (step, e)));
    }
    let distance = |step: i32| oracles::chord_distance_m(zoo(), offset(zoo(), f64::from(step), 0.0));
    let enter = (-100..=100).find(|&s| distance(s) <= 25.0).unwrap();
    let exit = (enter..=100).find(|&s| distance(s) > 30.0).unwrap();
    assert_eq!(
        log,
        vec![
            (enter, FenceEvent::Entered("tiger-spot".into())),
            (exit, FenceEvent::Exited("tiger-spot".into())),
        ]
    );
}
