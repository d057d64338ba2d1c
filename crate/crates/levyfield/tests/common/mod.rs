//! Fixtures shared by the integration suites: a catalog of triplets that
//! covers every measure variant, plus the kernels and configs the
//! criteria run against.

#![allow(dead_code)]

use levyfield::basis::{
    CharacteristicTriplet, Jump, JumpComponent, JumpDensity, LevyMeasure1D, SpatialIntensity,
    Window,
};
use levyfield::kernels::{Kernel, KernelShape};
use levyfield::quad::QuadConfig;

pub fn quad() -> QuadConfig {
    QuadConfig::default()
}

pub fn window01() -> Window {
    Window::new(vec![0.0], vec![1.0]).unwrap()
}

/// Box kernel covering the whole unit window with amplitude 1.
pub fn whole_box() -> Kernel {
    Kernel::new(KernelShape::Box { halfwidth: vec![0.5], amplitude: 1.0, center: vec![] })
}

/// Box kernel covering one half of the unit window around its point.
pub fn half_box() -> Kernel {
    Kernel::new(KernelShape::Box { halfwidth: vec![0.25], amplitude: 1.0, center: vec![] })
}

pub fn gaussian_triplet() -> CharacteristicTriplet {
    CharacteristicTriplet::new(
        window01(),
        SpatialIntensity::constant(0.0),
        SpatialIntensity::constant(1.0),
        vec![],
    )
    .unwrap()
}

pub fn drift_gaussian_triplet() -> CharacteristicTriplet {
    CharacteristicTriplet::new(
        window01(),
        SpatialIntensity::Linear { intercept: 0.1, slope: vec![0.4] },
        SpatialIntensity::ExpDecay { amplitude: 1.0, rate: vec![0.5] },
        vec![],
    )
    .unwrap()
}

pub fn discrete_triplet() -> CharacteristicTriplet {
    CharacteristicTriplet::new(
        window01(),
        SpatialIntensity::constant(0.0),
        SpatialIntensity::constant(0.0),
        vec![JumpComponent {
            levy: LevyMeasure1D::discrete(vec![Jump { size: 2.0, rate: 1.0 }]),
            intensity: SpatialIntensity::constant(1.0),
        }],
    )
    .unwrap()
}

pub fn gamma_triplet() -> CharacteristicTriplet {
    CharacteristicTriplet::new(
        window01(),
        SpatialIntensity::constant(0.0),
        SpatialIntensity::constant(0.0),
        vec![JumpComponent {
            levy: LevyMeasure1D::GammaType { c: 1.0, beta: 1.0 },
            intensity: SpatialIntensity::constant(1.0),
        }],
    )
    .unwrap()
}

pub fn compound_triplet() -> CharacteristicTriplet {
    CharacteristicTriplet::new(
        window01(),
        SpatialIntensity::constant(0.0),
        SpatialIntensity::constant(0.0),
        vec![JumpComponent {
            levy: LevyMeasure1D::CompoundDensity {
                rate: 2.0,
                density: JumpDensity::Uniform { lo: 0.5, hi: 1.5 },
            },
            intensity: SpatialIntensity::Linear { intercept: 0.5, slope: vec![0.5] },
        }],
    )
    .unwrap()
}

pub fn mixed_triplet() -> CharacteristicTriplet {
    CharacteristicTriplet::new(
        window01(),
        SpatialIntensity::Linear { intercept: 0.1, slope: vec![0.2] },
        SpatialIntensity::constant(0.3),
        vec![
            JumpComponent {
                levy: LevyMeasure1D::GammaType { c: 0.8, beta: 1.5 },
                intensity: SpatialIntensity::ExpDecay { amplitude: 1.0, rate: vec![0.7] },
            },
            JumpComponent {
                levy: LevyMeasure1D::discrete(vec![
                    Jump { size: -1.5, rate: 0.4 },
                    Jump { size: 0.6, rate: 0.5 },
                ]),
                intensity: SpatialIntensity::constant(0.5),
            },
        ],
    )
    .unwrap()
}

/// One representative triplet per measure flavor, all on the unit window.
pub fn catalog() -> Vec<(&'static str, CharacteristicTriplet)> {
    vec![
        ("gaussian", gaussian_triplet()),
        ("drift_gaussian", drift_gaussian_triplet()),
        ("discrete", discrete_triplet()),
        ("gamma", gamma_triplet()),
        ("compound", compound_triplet()),
        ("mixed", mixed_triplet()),
    ]
}
