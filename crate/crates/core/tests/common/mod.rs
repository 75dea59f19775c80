#![allow(dead_code)]

use surface_dimers::height::{height_field, height_one_form, reference_flow, HeightField, HeightOneForm};
use surface_dimers::temperley::{dual_forest, orient_dual_random, temperley_map, DimerConfig};
use surface_dimers::wilson::sample_rng;
use surface_dimers::{sample_crsf, LiftedFace, SuperpositionGraph, SurfaceGraph, TemperleyanPair, Vec2};

/// A Wilson sample with uniformly oriented dual cycles, its matching and heights.
pub struct Sample {
    pub pair: TemperleyanPair,
    pub dimer: DimerConfig,
    pub form: HeightOneForm,
    pub heights: HeightField,
}

pub fn sample(g: &SurfaceGraph, s: &SuperpositionGraph, seed: u64, index: u64) -> Sample {
    let mut rng = sample_rng(seed, index);
    let crsf = sample_crsf(g, &mut rng, None).unwrap();
    let dual = orient_dual_random(g, &dual_forest(g, &crsf).unwrap(), &mut rng).unwrap();
    let dimer = temperley_map(g, s, &crsf, &dual).unwrap();
    let form = height_one_form(s, &dimer, &reference_flow(s).unwrap()).unwrap();
    let heights = height_field(s, &form, 0).unwrap();
    Sample { pair: TemperleyanPair { crsf, dual }, dimer, form, heights }
}

/// Face path from `from` to `to` moving first along x, then along y, through
/// adjacent faces.
pub fn staircase(s: &SuperpositionGraph, from: LiftedFace, to: LiftedFace) -> Vec<LiftedFace> {
    let (a, b) = (s.face_mid(from), s.face_mid(to));
    let mut path = vec![from];
    let mut p = a;
    for (delta, steps) in [(Vec2::new(2 * (b.x - a.x).signum(), 0), (b.x - a.x).abs() / 2), (Vec2::new(0, 2 * (b.y - a.y).signum()), (b.y - a.y).abs() / 2)] {
        for _ in 0..steps {
            p = p + delta;
            path.push(s.locate_face(p).expect("face midpoints form a lattice"));
        }
    }
    assert_eq!(*path.last().unwrap(), to);
    path
}
