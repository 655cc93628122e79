use afm_core::clip::{clip, sgdc_step, ClipRegion, SgdcConfig};
use afm_core::optim::{step, AfmConfig, Scaling, ScalingMode, Variant};
use afm_core::{OptimizerState, Vector};
use proptest::prelude::*;

const DIM: usize = 3;

fn entry() -> impl Strategy<Value = f64> {
    (-1.0f64..1.0, -6i32..6).prop_map(|(s, e)| s * 10f64.powi(e))
}

fn vector() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(entry(), DIM)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[derive(Debug, Clone)]
struct Case {
    variant: Variant,
    tau1: f64,
    tau2: f64,
    m0: Vec<f64>,
    v0: Vec<f64>,
    steps: Vec<(Vec<f64>, f64)>,
    scaling: ScalingMode,
}

fn case() -> impl Strategy<Value = Case> {
    (
        prop::sample::select(Variant::ALL.to_vec()),
        0.1f64..10.0,
        0.1f64..40.0,
        vector(),
        vector(),
        prop::collection::vec((vector(), 0.0f64..1.0), 1..60),
        prop::bool::ANY,
    )
        .prop_map(|(variant, tau1, tau2, m0, v0, raw, bc)| {
            let cap = 1.0 / tau1.max(if variant.uses_tau2() { tau2 } else { 0.0 });
            Case {
                variant,
                tau1,
                tau2,
                m0,
                v0: v0.iter().map(|v| v.abs()).collect(),
                steps: raw.into_iter().map(|(g, u)| (g, u * cap)).collect(),
                scaling: if bc {
                    ScalingMode::BiasCorrection
                } else {
                    ScalingMode::None
                },
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn moment_estimates_stay_bounded(c in case()) {
        let cfg = AfmConfig::new(c.variant).with_taus(c.tau1, c.tau2);
        let mut scaling = Scaling::new(c.scaling, c.variant);
        let mut state = OptimizerState::with_moments(
            Vector::zeros(DIM),
            c.m0.clone().into(),
            c.v0.clone().into(),
        )
        .unwrap();
        let mut g_max = sup(&c.m0);
        let mut sq_max = sup(&c.v0);
        for (g, eta) in &c.steps {
            let next = match step(&state, g, *eta, &cfg, &mut scaling) {
                Ok(s) => s,
                // Tiny preconditioners can push x past f64 range.
                Err(afm_core::Error::NonFinite { .. }) => break,
                Err(e) => panic!("{e}"),
            };
            g_max = g_max.max(sup(g));
            prop_assert!(sup(&next.m) <= g_max);
            prop_assert!(next.v.iter().all(|&v| v >= 0.0));
            match c.variant {
                Variant::Adam | Variant::NAdam => {
                    sq_max = sq_max.max(sup(&g.iter().map(|a| a * a).collect::<Vec<_>>()));
                    prop_assert!(sup(&next.v) <= sq_max);
                }
                Variant::AdaBelief => {
                    let r: Vec<f64> = g
                        .iter()
                        .zip(next.m.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .collect();
                    sq_max = sq_max.max(sup(&r));
                    prop_assert!(sup(&next.v) <= sq_max);
                }
                Variant::AmsGrad => {
                    sq_max = sq_max.max(sup(&g.iter().map(|a| a * a).collect::<Vec<_>>()));
                    prop_assert!(sup(&next.v) <= sq_max);
                    for (a, b) in next.v.iter().zip(state.v.iter()) {
                        prop_assert!(a >= b);
                    }
                }
                Variant::Yogi => {
                    let g2 = sup(&g.iter().map(|a| a * a).collect::<Vec<_>>());
                    let w = c.tau2 * eta;
                    prop_assert!(sup(&next.v) <= sup(&state.v).max(g2 + w * g2));
                }
            }
            state = next;
        }
    }

    #[test]
    fn sgdc_displacement_is_bounded(
        tau1 in 0.1f64..10.0,
        alpha in 0.0f64..2.0,
        c in 0.01f64..100.0,
        ball in prop::bool::ANY,
        steps in prop::collection::vec((vector(), 0.0f64..1.0), 1..60),
    ) {
        let region = if ball { ClipRegion::Ball } else { ClipRegion::Box };
        let cfg = SgdcConfig { tau1, alpha };
        let bound = c * region.radius(DIM);
        let mut state = OptimizerState::new(Vector::zeros(DIM));
        let mut m_bound: f64 = 0.0;
        for (g, u) in &steps {
            let eta = u / tau1;
            let next = sgdc_step(&state, g, eta, c, &cfg, region).unwrap();
            // Each ĝ has norm at most C·radius, and m is a running convex
            // combination of them.
            let gh = clip(g, c, region).unwrap();
            prop_assert!(gh.norm2() <= bound * (1.0 + 1e-15));
            m_bound = m_bound.max(gh.norm2());
            prop_assert!(next.m.norm2() <= m_bound * (1.0 + 1e-12) + 1e-300);
            let dx = next.x.sub(&state.x).unwrap().norm2();
            let allowed = eta * (next.m.norm2() + alpha * bound);
            prop_assert!(dx <= allowed * (1.0 + 1e-12) + 1e-300, "{dx} > {allowed}");
            state = next;
        }
    }
}
