use divfree_stokes::postproc::observed_orders;
use divfree_stokes::study::sci;
use divfree_stokes::Mesh;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn uniform_mesh_counts(n in 1usize..24) {
        let mesh = Mesh::uniform_unit_square(n).unwrap();
        prop_assert_eq!(mesh.num_vertices(), (n + 1) * (n + 1));
        prop_assert_eq!(mesh.num_cells(), 2 * n * n);
        prop_assert_eq!(mesh.num_edges(), 3 * n * n + 2 * n);
        prop_assert_eq!(mesh.num_boundary_edges(), 4 * n);
        let area: f64 = (0..mesh.num_cells()).map(|c| mesh.cell_area(c)).sum();
        prop_assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interior_edges_see_opposite_signs(n in 1usize..12) {
        let mesh = Mesh::uniform_unit_square(n).unwrap();
        for e in 0..mesh.num_edges() {
            let (a, b) = mesh.edge_cells(e);
            if let Some(b) = b {
                let sa = mesh.cell_edge_signs(a)[mesh.local_edge_index(a, e).unwrap()];
                let sb = mesh.cell_edge_signs(b)[mesh.local_edge_index(b, e).unwrap()];
                prop_assert_eq!(sa, -sb);
            }
        }
    }

    #[test]
    fn orders_of_power_laws(c in 1e-6f64..1e3, rate in 0.5f64..4.0, len in 2usize..8) {
        let errs: Vec<f64> = (0..len).map(|i| c * 2f64.powf(-rate * i as f64)).collect();
        let orders = observed_orders(&errs);
        prop_assert!(orders[0].is_none());
        for o in &orders[1..] {
            prop_assert!((o.unwrap() - rate).abs() < 1e-9);
        }
    }

    #[test]
    fn scientific_notation_round_trips(x in 1e-300f64..1e300) {
        let s = sci(x, 10);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-10 * x);
        let exponent = s.split_once('e').unwrap().1;
        prop_assert!(exponent.len() >= 3);
    }
}
