use horocoho::families::{member, tensor_member};
use horocoho::harness::{csv_string, sorted_records};
use horocoho::product::{tensor_l2_norm, translate_factor};
use horocoho::sharpness::exponent_fit;
use horocoho::solvers::{
    make_coboundary, make_twisted_annihilated, map_limit_nodes, solve_map, solve_twisted,
    twist_limit_nodes, MapParams, TwistParams,
};
use horocoho::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn small_grid() -> LogGrid {
    build_grid(Domain::FullLine, -5.0, 4.0, 513).unwrap()
}

fn rel_err_outside(a: &GridFunction, b: &GridFunction, skip: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (x, y)) in a.samples().iter().zip(b.samples()).enumerate() {
        if !skip.contains(&i) {
            num += (x - y).norm_sqr();
            den += y.norm_sqr();
        }
    }
    (num / den).sqrt()
}

fn opt() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![
        1 => Just(None),
        4 => any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(Some),
    ]
}

fn record() -> impl Strategy<Value = ExperimentRecord> {
    proptest::collection::vec(opt(), 11).prop_map(|v| ExperimentRecord {
        nu_abs: v[0],
        lambda: v[1],
        l: v[2],
        s: v[3],
        sigma: v[4],
        epsilon: v[5],
        norm_f: v[6],
        norm_g: v[7],
        norm_green: v[8],
        ratio: v[9],
        slope: v[10],
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_is_absolutely_homogeneous(k in 0usize..10, re in -5.0f64..5.0, im in -5.0f64..5.0) {
        let f = member(k).sample(&small_grid()).unwrap();
        let c = Complex64::new(re, im);
        let lhs = l2nu_norm(&f.scale(c));
        prop_assert!((lhs - c.norm() * l2nu_norm(&f)).abs() <= 1e-12 * lhs.max(1e-300));
    }

    #[test]
    fn interpolation_reproduces_nodes(k in 0usize..10, idx in 0usize..1026) {
        let grid = small_grid();
        let f = member(k).sample(&grid).unwrap();
        prop_assert_eq!(interpolate_at(&f, grid.xi(idx)).unwrap(), f.samples()[idx]);
    }

    #[test]
    fn series_round_trip(nu in 0.0f64..20.0, imaginary in any::<bool>()) {
        let mu = if imaginary { 1.0 + nu * nu } else { 1.0 - nu * nu };
        let p = classify_series(mu);
        let expected = if imaginary { Complex64::new(0.0, nu) } else { Complex64::new(nu, 0.0) };
        prop_assert!((p.nu - expected).norm() <= 1e-12 * nu.max(1.0));
    }

    #[test]
    fn twisted_solution_solves(k in 0usize..10, lambda in 0.05f64..20.0, negative in any::<bool>()) {
        let grid = small_grid();
        let lambda = if negative { -lambda } else { lambda };
        let p = ReprParams::principal(2.0);
        let tp = TwistParams::new(lambda).unwrap();
        let g = make_twisted_annihilated(&member(k).sample(&grid).unwrap(), &tp).unwrap();
        let f = solve_twisted(&g, &tp).unwrap();
        let lhs = &apply_field(&f, FieldTag::cal(Field::V), &p).unwrap()
            + &f.scale(Complex64::new(0.0, lambda));
        let skip = twist_limit_nodes(&grid, &tp);
        prop_assert!(rel_err_outside(&lhs, &g, &skip) <= 1e-12);
    }

    #[test]
    fn map_round_trip(k in 0usize..10, l in 0.05f64..12.0) {
        let grid = small_grid();
        let mp = MapParams::new(l).unwrap();
        let f0 = member(k).sample(&grid).unwrap();
        let f = solve_map(&make_coboundary(&f0, &mp), &mp).unwrap();
        let skip: Vec<usize> = map_limit_nodes(&grid, &mp).into_iter().map(|x| x.0).collect();
        prop_assert!(rel_err_outside(&f, &f0, &skip) <= 1e-10);
    }

    #[test]
    fn exponent_fit_recovers_power_laws(a in -3.0f64..6.0, c in 0.01f64..100.0) {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0, 64.0, 128.0]
            .iter()
            .map(|&x: &f64| (x, c * x.powf(a)))
            .collect();
        prop_assert!((exponent_fit(&pts).unwrap() - a).abs() <= 1e-9);
    }

    #[test]
    fn csv_numbers_reparse_exactly(rows in proptest::collection::vec(record(), 0..8)) {
        let text = csv_string(&rows);
        let sorted = sorted_records(&rows);
        prop_assert_eq!(text.lines().count(), rows.len() + 1);
        for (line, r) in text.lines().skip(1).zip(&sorted) {
            let cells: Vec<Option<f64>> = line
                .split(',')
                .map(|c| if c.is_empty() { None } else { Some(c.parse().unwrap()) })
                .collect();
            let expected: Vec<Option<f64>> = r.params().into_iter().chain(r.values()).collect();
            prop_assert_eq!(cells, expected);
        }
    }

    #[test]
    fn csv_ignores_input_order(rows in proptest::collection::vec(record(), 0..8)) {
        let mut reversed = rows.clone();
        reversed.reverse();
        // Rows with equal parameter tuples keep input order, so compare
        // only when tuples are distinct.
        let mut keys: Vec<String> = rows.iter().map(|r| format!("{:?}", r.params())).collect();
        keys.sort();
        keys.dedup();
        prop_assume!(keys.len() == rows.len());
        prop_assert_eq!(csv_string(&rows), csv_string(&reversed));
    }

    #[test]
    fn factor_translations_commute(k in 0usize..10, a in 0.1f64..8.0, b in 0.1f64..8.0) {
        let g = build_grid(Domain::PositiveHalf, -3.0, 3.0, 33).unwrap();
        let f = tensor_member(k, &g, &g).unwrap();
        let ab = translate_factor(&translate_factor(&f, 1, a).unwrap(), 2, b).unwrap();
        let ba = translate_factor(&translate_factor(&f, 2, b).unwrap(), 1, a).unwrap();
        prop_assert!(tensor_l2_norm(&ab.sub(&ba).unwrap()) <= 4.0 * f64::EPSILON * tensor_l2_norm(&f));
    }
}
