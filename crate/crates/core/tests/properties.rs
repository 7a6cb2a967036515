use std::path::Path;

use proptest::prelude::*;
use rfgp::active::{partition_sections, select_indices};
use rfgp::eval::curve_lengths;
use rfgp::field::FieldGrid;
use rfgp::geometry::{Position, SceneBounds};
use rfgp::io::{grid_to_csv, observations_to_csv, parse_grid_csv, parse_observations_csv};
use rfgp::observation::{Observation, ObservationSet};

fn scene() -> impl Strategy<Value = (SceneBounds, f64)> {
    (
        1usize..8,
        1usize..8,
        prop::sample::select(vec![0.5, 1.0, 1.5, 2.0]),
    )
        .prop_map(|(w, h, s)| {
            (
                SceneBounds::sized(w as f64 * 0.5, h as f64 * 0.5).unwrap(),
                s,
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn selection_picks_each_sections_best_candidate_above_threshold(
        (bounds, size) in scene(),
        raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..10.0), 1..40),
        threshold in 0.0f64..5.0,
    ) {
        let grid = partition_sections(bounds, size).unwrap();
        let cands: Vec<(Position, f64)> = raw
            .iter()
            .map(|&(u, v, var)| (Position::new(u * bounds.width(), v * bounds.height()), var))
            .collect();
        let picks = select_indices(&cands, &grid, threshold);

        let mut tiles: Vec<usize> = picks.iter().map(|&i| grid.tile_of(cands[i].0).unwrap()).collect();
        let n = tiles.len();
        tiles.sort_unstable();
        tiles.dedup();
        prop_assert_eq!(tiles.len(), n);

        for &i in &picks {
            let tile = grid.tile_of(cands[i].0).unwrap();
            prop_assert!(cands[i].1 >= threshold);
            for c in &cands {
                if grid.tile_of(c.0) == Some(tile) {
                    prop_assert!(c.1 <= cands[i].1);
                }
            }
        }
        for (t, _) in grid.sections.iter().enumerate() {
            let best = cands.iter().filter(|c| grid.tile_of(c.0) == Some(t)).map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
            if best >= threshold && best.is_finite() {
                prop_assert!(tiles.contains(&t));
            }
        }
    }

    #[test]
    fn every_scene_point_has_exactly_one_section((bounds, size) in scene(), u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let grid = partition_sections(bounds, size).unwrap();
        let p = Position::new(u * bounds.width(), v * bounds.height());
        let t = grid.tile_of(p).unwrap();
        prop_assert!(grid.sections[t].expanded(1e-9).contains(p));
    }

    #[test]
    fn grid_csv_round_trips_bit_exactly(
        (bounds, _) in scene(),
        vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, 64),
    ) {
        let shape = FieldGrid::constant(bounds, 0.5, 0.0).unwrap();
        let n = shape.values().len();
        let values: Vec<f64> = (0..n).map(|i| vals[i % vals.len()]).collect();
        let g = FieldGrid::new(bounds, 0.5, values).unwrap();
        let back = parse_grid_csv(&grid_to_csv(&g), Path::new("g.csv")).unwrap();
        let bits = |g: &FieldGrid| g.values().iter().map(|v| (*v + 0.0).to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&g));
        prop_assert_eq!(back.bounds(), g.bounds());
    }

    #[test]
    fn observation_csv_round_trips(
        rows in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -200.0f64..50.0), 0..30),
        slot in 0u32..3,
    ) {
        let items = rows.iter().map(|&(x, y, v)| Observation::new(Position::new(x, y), v).at_slot(slot)).collect();
        let obs = ObservationSet::new(items).unwrap();
        let back = parse_observations_csv(&observations_to_csv(&obs, slot != 0), Path::new("o.csv")).unwrap();
        prop_assert_eq!(back, obs);
    }

    #[test]
    fn curve_lengths_step_by_stride_and_end_at_the_full_trace(len in 0usize..500, stride in 1usize..40) {
        let ns = curve_lengths(len, stride);
        prop_assert!(ns.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(ns.iter().rev().skip(1).all(|n| n % stride == 0));
        prop_assert_eq!(ns.last().copied(), (len > 0).then_some(len));
        prop_assert_eq!(ns.len(), len.div_ceil(stride));
    }
}
