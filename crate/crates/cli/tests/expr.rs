use genexp_cli::expr::Expr;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

#[test]
fn exp_matches_the_library() {
    let e = Expr::parse("exp(-x1)").unwrap();
    let mut r = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..1000 {
        let x: f64 = r.random_range(-20.0..20.0);
        let (v, want) = (e.eval(&[x]), (-x).exp());
        assert!((v - want).abs() <= 4.0 * f64::EPSILON * want, "{x}: {v} vs {want}");
    }
}

#[test]
fn documented_values() {
    let s = Expr::parse("sin(2*pi*x2)").unwrap();
    assert!((s.eval(&[0.0, 0.25]) - 1.0).abs() < 1e-15);
    assert_eq!(Expr::parse("x1+x2^2").unwrap().eval(&[1.0, 2.0]), 5.0);
}

proptest! {
    #[test]
    fn polynomials_agree_with_direct_evaluation(
        c in prop::collection::vec(-5.0f64..5.0, 4),
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
    ) {
        let text = format!("{} + {}*x1 - {}*x2^2 + {}*x1*x2", c[0], c[1], c[2], c[3]);
        let e = Expr::parse(&text).unwrap();
        let want = c[0] + c[1] * x - c[2] * y * y + c[3] * x * y;
        prop_assert!((e.eval(&[x, y]) - want).abs() <= 1e-12 * (1.0 + want.abs()));
        let (_, g) = e.eval_grad(&[x, y]);
        prop_assert!((g[0] - (c[1] + c[3] * y)).abs() <= 1e-12 * (1.0 + g[0].abs()));
        prop_assert!((g[1] - (-2.0 * c[2] * y + c[3] * x)).abs() <= 1e-12 * (1.0 + g[1].abs()));
    }

    #[test]
    fn garbage_never_panics(s in "[x0-9+*/^() .a-z-]{0,24}") {
        let _ = Expr::parse(&s).map(|e| e.eval(&[0.5; 8]));
    }
}
