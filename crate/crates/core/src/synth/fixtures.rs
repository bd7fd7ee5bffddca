//! Ready-made scene specs used by tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{default_classes, CameraRing, GroundSpec, Primitive, SceneSpec};

/// Index of box B, the primitive hidden from camera 0, in
/// [`occlusion_fixture`].
pub const OCCLUDED_PRIMITIVE: usize = 1;

/// Box A (plywood, 1.5 × 3 × 3 m) stands between camera 0 and box B (a unit
/// metal-girder cube at the origin), hiding B completely from that camera.
/// Camera 5 sits on the opposite side of the ring and sees B unobstructed.
pub fn occlusion_fixture() -> SceneSpec {
    SceneSpec {
        seed: 11,
        density: 4000.0,
        jitter_sigma: 0.0,
        classes: default_classes(),
        ground: GroundSpec {
            extent: [-3.0, 6.0, -3.0, 3.0],
        },
        cameras: CameraRing {
            count: 10,
            radius: 10.0,
            height: 4.0,
            look_at: [0.0, 0.0, 0.0],
            start_angle_deg: 0.0,
            image: [640, 480],
            focal: 600.0,
        },
        primitives: vec![
            Primitive::Box {
                class: "plywood".into(),
                center: [4.0, 0.0],
                size: [1.5, 3.0, 3.0],
                base: 0.0,
            },
            Primitive::Box {
                class: "metal_girder".into(),
                center: [0.0, 0.0],
                size: [1.0, 1.0, 1.0],
                base: 0.0,
            },
        ],
    }
}

/// A 1 m plywood cube on a 4 × 4 m floor, 4000 points/m².
pub fn unit_box_fixture(seed: u64) -> SceneSpec {
    SceneSpec {
        seed,
        density: 4000.0,
        jitter_sigma: 0.0,
        classes: default_classes(),
        ground: GroundSpec {
            extent: [-2.0, 2.0, -2.0, 2.0],
        },
        cameras: CameraRing {
            count: 8,
            radius: 6.0,
            height: 4.0,
            look_at: [0.0, 0.0, 0.0],
            start_angle_deg: 0.0,
            image: [320, 240],
            focal: 300.0,
        },
        primitives: vec![Primitive::Box {
            class: "plywood".into(),
            center: [0.0, 0.0],
            size: [1.0, 1.0, 1.0],
            base: 0.0,
        }],
    }
}

/// Two to six non-overlapping primitives of random shape, class and size,
/// one per 2.5 m slot of a 3 × 3 layout on a 9 × 9 m floor.
pub fn random_fixture(seed: u64, density: f64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f1c7);
    let classes = default_classes();
    let mut slots: Vec<usize> = (0..9).collect();
    let count = rng.random_range(2..=6);
    let mut primitives = Vec::with_capacity(count);
    for _ in 0..count {
        let slot = slots.swap_remove(rng.random_range(0..slots.len()));
        let center = [
            (slot % 3) as f64 * 2.5 - 2.5 + rng.random_range(-0.3..0.3),
            (slot / 3) as f64 * 2.5 - 2.5 + rng.random_range(-0.3..0.3),
        ];
        let class = classes[rng.random_range(1..classes.len())].clone();
        let prim = match rng.random_range(0..3) {
            0 => Primitive::Box {
                class,
                center,
                size: [
                    rng.random_range(0.4..1.6),
                    rng.random_range(0.4..1.6),
                    rng.random_range(0.2..1.5),
                ],
                base: 0.0,
            },
            1 => Primitive::Cylinder {
                class,
                center,
                radius: rng.random_range(0.2..0.8),
                height: rng.random_range(0.3..1.5),
                base: 0.0,
            },
            _ => Primitive::Sheet {
                class,
                center,
                size: [rng.random_range(0.8..1.8), rng.random_range(0.5..1.2)],
                thickness: rng.random_range(0.1..0.25),
                base: 0.0,
            },
        };
        primitives.push(prim);
    }
    SceneSpec {
        seed,
        density,
        jitter_sigma: 0.0,
        classes,
        ground: GroundSpec {
            extent: [-4.5, 4.5, -4.5, 4.5],
        },
        cameras: CameraRing {
            count: 6,
            radius: 10.0,
            height: 6.0,
            look_at: [0.0, 0.0, 0.0],
            start_angle_deg: 15.0,
            image: [96, 72],
            focal: 80.0,
        },
        primitives,
    }
}
