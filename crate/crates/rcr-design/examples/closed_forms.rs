//! Check the general matrix path against independent closed forms.
//!
//! For two-group straight-line regression with a single random coefficient,
//! the criteria reduce to explicit rational functions of the endpoint weights
//! (w₁, w₂). These act as oracles: the general solver and evaluator know
//! nothing about them, so agreement to near machine precision is strong
//! evidence both are right.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcr_design::criteria::evaluate;
use rcr_design::model::Design;
use rcr_design::straightline::{
    phi_a_intercept, phi_d_intercept, phi_d_slope, LineCriterion, LineVariant, TwoGroupLineCase,
};

fn main() -> rcr_design::Result<()> {
    // hand-checkable anchor: equal groups, m = 5, d = 1, weights (1/2, 1/2)
    let anchor = TwoGroupLineCase::new(
        (1, 1),
        (5, 5),
        1.0,
        LineVariant::RandomIntercept,
        LineCriterion::D,
    )?;
    let v = phi_d_intercept(&anchor, 0.5, 0.5)?;
    println!("D-criterion at (0.5, 0.5): {v:.15} (exact: -ln(25/6) = {:.15})", -(25.0f64 / 6.0).ln());

    // sweep random weights and compare closed form vs matrix path
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (name, variant, criterion) in [
        ("random-intercept D", LineVariant::RandomIntercept, LineCriterion::D),
        ("random-intercept A", LineVariant::RandomIntercept, LineCriterion::A),
        ("random-slope D", LineVariant::RandomSlope, LineCriterion::D),
    ] {
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let case = TwoGroupLineCase::new(
                (rng.gen_range(1..=3), rng.gen_range(1..=3)),
                (rng.gen_range(2..=12), rng.gen_range(2..=12)),
                rng.gen_range(0.0..2.0),
                variant,
                criterion,
            )?;
            let (w1, w2) = (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
            let closed = match (variant, criterion) {
                (LineVariant::RandomIntercept, LineCriterion::D) => {
                    phi_d_intercept(&case, w1, w2)?
                }
                (LineVariant::RandomIntercept, LineCriterion::A) => {
                    phi_a_intercept(&case, w1, w2)?
                }
                _ => phi_d_slope(&case, w1, w2)?,
            };
            let prob = case.to_problem()?;
            let designs = vec![
                Design::new(vec![1.0 - w1, w1])?,
                Design::new(vec![1.0 - w2, w2])?,
            ];
            let matrix = evaluate(&prob, &designs)?.value();
            worst = worst.max((closed - matrix).abs() / (1.0 + closed.abs()));
        }
        println!("{name}: worst relative discrepancy over 200 draws = {worst:.2e}");
        assert!(worst <= 1e-10, "closed form and matrix path disagree");
    }
    Ok(())
}
