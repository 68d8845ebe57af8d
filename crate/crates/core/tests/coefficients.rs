mod common;

use std::sync::Arc;

use common::mat;
use proptest::prelude::*;
use riccati_kit::coefficients::{
    builtin_scenario, system_to_riccati, ScenarioParams, Source, SystemSpec, Table, BUILTIN_NAMES,
};
use riccati_kit::MatrixC;

fn quad(n: usize, blocks: &[Vec<f64>]) -> [MatrixC; 4] {
    [mat(n, &blocks[0]), mat(n, &blocks[1]), mat(n, &blocks[2]), mat(n, &blocks[3])]
}

fn sources() -> impl Strategy<Value = (usize, Source<f64>)> {
    (1usize..=3).prop_flat_map(|n| {
        let block = prop::collection::vec(-2.0f64..2.0, 2 * n * n);
        (
            Just(n),
            prop::collection::vec(block.clone(), 4),
            prop::collection::vec(block, 4),
            prop::collection::vec(0.0f64..2.0, 4),
            0u8..3,
        )
            .prop_map(|(n, b0, b1, rates, kind)| {
                let source = match kind {
                    0 => Source::Constant(quad(n, &b0)),
                    1 => Source::Exponential {
                        amplitudes: quad(n, &b0),
                        rates: [rates[0], rates[1], rates[2], rates[3]],
                    },
                    _ => Source::Tabulated(Table::new(vec![0.0, 1.5, 4.0], vec![quad(n, &b0), quad(n, &b1), quad(n, &b0)]).unwrap()),
                };
                (n, source)
            })
    })
}

proptest! {
    #[test]
    fn reduction_maps_blocks_exactly((n, source) in sources(), t in 0.0f64..4.0) {
        let sys = SystemSpec::new(n, 0.0, source).unwrap();
        let spec = system_to_riccati(&sys);
        let c = spec.eval(t).unwrap();
        let abcd = sys.eval(t).unwrap();
        prop_assert_eq!(c.p, abcd.b);
        prop_assert_eq!(c.q, -&abcd.d);
        prop_assert_eq!(c.r, abcd.a);
        prop_assert_eq!(c.s, -&abcd.c);
    }

    #[test]
    fn riccati_view_of_a_system_round_trips((n, source) in sources(), t in 0.0f64..4.0) {
        let sys = SystemSpec::new(n, 0.0, source).unwrap();
        let spec = Arc::new(system_to_riccati(&sys));
        let back = spec.as_system();
        let (x, y) = (back.eval(t).unwrap(), sys.eval(t).unwrap());
        prop_assert_eq!(x.a, y.a);
        prop_assert_eq!(x.b, y.b);
        prop_assert_eq!(x.c, y.c);
        prop_assert_eq!(x.d, y.d);
    }

    #[test]
    fn builtins_are_continuous(idx in 0usize..4, t in 0.0f64..5.0, a in 0.2f64..3.0, c in 0.2f64..3.0) {
        let params = ScenarioParams { a, c, cutoff: 2.5, ..Default::default() };
        let spec = builtin_scenario(BUILTIN_NAMES[idx], params).unwrap();
        let mut prev = f64::INFINITY;
        for h in [1e-3, 1e-5, 1e-7] {
            let (x, y) = (spec.eval(t).unwrap(), spec.eval(t + h).unwrap());
            let gap = [(&x.p - &y.p), (&x.q - &y.q), (&x.r - &y.r), (&x.s - &y.s)]
                .iter()
                .map(|m| m.max_abs())
                .fold(0.0, f64::max);
            prop_assert!(gap <= prev.max(1e-15));
            prev = gap;
        }
        prop_assert!(prev < 1e-5);
    }
}

#[test]
fn decay_scalar_at_ln2_is_one_half() {
    let spec = builtin_scenario("decay_scalar", ScenarioParams::default()).unwrap();
    let c = spec.eval(2f64.ln()).unwrap();
    assert!((c.p[(0, 0)].re - 0.5).abs() < 1e-15);
    assert!(c.q.is_zero() && c.r.is_zero() && c.s.is_zero());
    assert_eq!(spec.builtin().unwrap().total_weight(0.0), Some(1.0));
}

#[test]
fn bounded_support_vanishes_after_cutoff() {
    let params = ScenarioParams { cutoff: 1.0, ..Default::default() };
    let spec = builtin_scenario("bounded_support", params).unwrap();
    for t in [1.0, 1.5, 40.0] {
        assert!(spec.eval(t).unwrap().p.is_zero());
    }
    assert!(!spec.eval(0.5).unwrap().p.is_zero());
}
