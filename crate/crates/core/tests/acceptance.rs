//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use surface_dimers::experiments::{
    loop_tail_report, perturbed_weights, render_svg, run_campaign, total_variation, ExperimentConfig, Law,
    RenderItem, Statistic, TestFunction,
};
use surface_dimers::height::{
    hodge_decompose, reference_flow, spine_increment_torus, straight_loop, winding_increment_adjacent,
    winding_increment_path, HodgeOptions, HeightOneForm,
};
use surface_dimers::oracle::{certify_bijection, chi_square_against, chi_square_sampler_test};
use surface_dimers::surface::TopologyKind;
use surface_dimers::temperley::dual_forest;
use surface_dimers::wilson::sample_rng;
use surface_dimers::{build_annulus, build_torus, sample_crsf, GraphSpec, LiftedFace, Topology, Weights};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn bijection_certification() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for g in [
        build_torus(2, 2, &Weights::Uniform).unwrap(),
        build_torus(3, 2, &Weights::Uniform).unwrap(),
        build_annulus(4, 2, &Weights::Uniform).unwrap(),
    ] {
        let r = certify_bijection(&g).map_err(|e| e.to_string())?;
        let (nx, ny) = g.topology.dims();
        if !r.certified || r.n_matchings != r.pair_count {
            return Err(format!("{nx}x{ny}: {:?}", r.counterexample));
        }
        parts.push(format!("{nx}x{ny}: {} matchings = {} pairs", r.n_matchings, r.pair_count));
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), format!("{}; {:.2?}", parts.join(", "), elapsed))
}

fn cycle_relation() -> Outcome {
    let mut parts = Vec::new();
    for g in [build_torus(32, 32, &Weights::Uniform).unwrap(), build_annulus(32, 32, &Weights::Uniform).unwrap()] {
        let want = g.genus() as i64 - 1;
        let mut bad = 0;
        for i in 0..10_000 {
            let t = sample_crsf(&g, &mut sample_rng(2, i), None).map_err(|e| e.to_string())?;
            let kd = dual_forest(&g, &t).map_err(|e| e.to_string())?.k_dagger();
            bad += (t.k() as i64 - kd as i64 != want) as usize;
        }
        parts.push(format!("{:?}: {bad} violations of k - k† = {want}", g.topology));
        if bad > 0 {
            return Err(parts.join("; "));
        }
    }
    Ok(parts.join("; "))
}

fn reference_flow_validity() -> Outcome {
    let mut n = 0;
    let topologies = (2..=64)
        .flat_map(|nx| (2..=64).map(move |ny| Topology::Torus { nx, ny }))
        .chain((3..=64).flat_map(|n_ang| (2..=64).map(move |n_rad| Topology::Annulus { n_ang, n_rad })));
    for t in topologies {
        let g = surface_dimers::SurfaceGraph::build(t, &Weights::Uniform).map_err(|e| e.to_string())?;
        let s = g.superpose().map_err(|e| e.to_string())?;
        let r = reference_flow(&s).map_err(|e| format!("{t:?}: {e}"))?;
        for v in 0..s.n_vertices() {
            // Out of every white and into every black: 8 units of 1/8.
            if r.divergence(&s, v) != 8 {
                return Err(format!("{t:?}: vertex {v} has flow {}/8", r.divergence(&s, v)));
            }
        }
        n += 1;
    }
    Ok(format!("{n} lattices (tori 2..=64 x 2..=64, annuli 3..=64 x 2..=64)"))
}

fn winding_equals_height() -> Outcome {
    let g = build_torus(32, 32, &Weights::Uniform).unwrap();
    let s = g.superpose().unwrap();
    let nf = s.faces.len();
    let (mut checked, mut bad) = ([0usize; 3], [0usize; 3]);
    for i in 0..100 {
        let smp = common::sample(&g, &s, 4, i);
        let h = &smp.heights;
        let mut rng = sample_rng(40, i);
        for _ in 0..1000 {
            let f = LiftedFace::new(rng.random_range(0..nf), [0, 0]);
            let steps = s.face_steps(f.face);
            let nb = steps[rng.random_range(0..steps.len())].to;
            let adj = winding_increment_adjacent(&g, &s, &smp.pair, f, nb).map_err(|e| e.to_string())?;
            checked[0] += 1;
            bad[0] += (adj != h.at(nb) - h.at(f)) as usize;

            let f2 = LiftedFace::new(rng.random_range(0..nf), [rng.random_range(-1..=1), rng.random_range(-1..=1)]);
            let want = h.at(f) - h.at(f2);
            let path = common::staircase(&s, f, f2);
            let p = winding_increment_path(&g, &s, &smp.pair, &path).map_err(|e| e.to_string())?;
            checked[1] += 1;
            bad[1] += (p != want) as usize;
            let sp = spine_increment_torus(&g, &s, &smp.pair, f, f2).map_err(|e| e.to_string())?;
            checked[2] += 1;
            bad[2] += (sp != want) as usize;
        }
    }
    check(
        bad == [0; 3],
        format!(
            "32x32 torus, 100 samples: adjacent {}/{} exact, path {}/{} exact, spine {}/{} exact",
            checked[0] - bad[0],
            checked[0],
            checked[1] - bad[1],
            checked[1],
            checked[2] - bad[2],
            checked[2]
        ),
    )
}

fn height_form_structure() -> Outcome {
    let mut reps = 0;
    let mut lifts = 0;
    for g in [build_torus(32, 32, &Weights::Uniform).unwrap(), build_annulus(32, 16, &Weights::Uniform).unwrap()] {
        let s = g.superpose().unwrap();
        let nf = s.faces.len();
        for i in 0..10 {
            let smp = common::sample(&g, &s, 5, i);
            smp.form.check_closed(&s).map_err(|e| e.to_string())?;
            let h = &smp.heights;
            let mut rng = sample_rng(50, i);
            let axes = if g.is_torus() { 2 } else { 1 };
            for axis in 0..axes {
                let want = if axis == 0 { h.a } else { h.b };
                for r in 0..10 {
                    let start = LiftedFace::new(rng.random_range(0..nf), [0, 0]);
                    let path = if r % 2 == 0 {
                        straight_loop(&s, start, axis).map_err(|e| e.to_string())?
                    } else {
                        wiggled_loop(&s, start, axis)
                    };
                    let got = smp.form.path_sum(&s, &path).map_err(|e| e.to_string())?;
                    if got != want {
                        return Err(format!("{:?}: loop sum {got} differs from instanton {want}", g.topology));
                    }
                    reps += 1;
                }
            }
            for _ in 0..100 {
                let shift = if g.is_torus() {
                    [rng.random_range(-2..=2), rng.random_range(-2..=2)]
                } else {
                    [rng.random_range(-2..=2), 0]
                };
                let to = LiftedFace::new(rng.random_range(0..nf), shift);
                let base = LiftedFace::new(h.base_face, [0, 0]);
                let integrated = smp.form.path_sum(&s, &common::staircase(&s, base, to)).map_err(|e| e.to_string())?;
                let expect = h.heights[to.face] + shift[0] * h.a + shift[1] * h.b;
                if integrated != expect {
                    return Err(format!("{:?}: lift {to:?} integrates to {integrated}, expected {expect}", g.topology));
                }
                lifts += 1;
            }
        }
    }
    Ok(format!("closed on all faces; {reps} homologous loop representatives agree; {lifts} lifts periodic"))
}

/// Loop along `axis` that zigzags one face sideways after every step.
fn wiggled_loop(s: &surface_dimers::SuperpositionGraph, start: LiftedFace, axis: usize) -> Vec<LiftedFace> {
    let period = s.topology.periods()[axis].unwrap();
    let (along, side) = if axis == 0 {
        (surface_dimers::Vec2::new(2, 0), surface_dimers::Vec2::new(0, 2))
    } else {
        (surface_dimers::Vec2::new(0, 2), surface_dimers::Vec2::new(2, 0))
    };
    let mut p = s.face_mid(start);
    // On the annulus, wiggle towards the interior.
    let side = if s.locate_face(p + side).is_some() { side } else { -side };
    let mut path = vec![start];
    for k in 0..period / 2 {
        p = p + along;
        path.push(s.locate_face(p).unwrap());
        p = if k % 2 == 0 { p + side } else { p - side };
        path.push(s.locate_face(p).unwrap());
    }
    path
}

fn hodge() -> Outcome {
    let g = build_torus(32, 32, &Weights::Uniform).unwrap();
    let s = g.superpose().unwrap();
    let opts = HodgeOptions::default();
    let (mut res, mut div, mut curl, mut hom, mut same) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut by_instanton: std::collections::HashMap<[i64; 2], Vec<f64>> = std::collections::HashMap::new();
    let mut rng = sample_rng(60, 0);
    for i in 0..8 {
        let smp = common::sample(&g, &s, 6, i);
        let parts = hodge_decompose(&s, &smp.form, &opts).map_err(|e| e.to_string())?;
        let mut d = vec![0.0; s.faces.len()];
        for (e, l, r) in s.dual_edges() {
            let w = smp.form.values[e] as f64;
            res = res.max((w - (parts.scalar[l.face] - parts.scalar[r.face]) - parts.harmonic[e]).abs());
            d[r.face] += parts.harmonic[e];
            d[l.face] -= parts.harmonic[e];
        }
        div = div.max(d.iter().fold(0.0, |m, v| m.max(v.abs())));
        for v in 0..s.n_vertices() {
            curl = curl.max(s.vertex_edges(v).iter().map(|&e| parts.harmonic[e]).sum::<f64>().abs());
        }
        let (a, b) = (smp.heights.a as f64, smp.heights.b as f64);
        hom = hom.max((parts.instanton[0] - a).abs()).max((parts.instanton[1] - b).abs());

        // Adding an exact form leaves the harmonic part unchanged.
        let pot: Vec<i64> = (0..s.faces.len()).map(|_| rng.random_range(-20..=20)).collect();
        let mut values = smp.form.values.clone();
        for (e, l, r) in s.dual_edges() {
            values[e] += pot[l.face] - pot[r.face];
        }
        let shifted = hodge_decompose(&s, &HeightOneForm { values }, &opts).map_err(|e| e.to_string())?;
        same = same.max(max_diff(&shifted.harmonic, &parts.harmonic));
        let key = [smp.heights.a, smp.heights.b];
        if let Some(prev) = by_instanton.get(&key) {
            same = same.max(max_diff(prev, &parts.harmonic));
        }
        by_instanton.insert(key, parts.harmonic);
    }
    let pairs = 8 - by_instanton.len();
    check(
        res <= 1e-10 && div <= 1e-10 && curl <= 1e-10 && hom <= 1e-9 && same <= 1e-9 && pairs > 0,
        format!(
            "residual {res:.1e}, divergence {div:.1e}, curl {curl:.1e}, homology {hom:.1e}, \
             equal-instanton spread {same:.1e} ({pairs} sample pairs plus 8 gradient shifts)"
        ),
    )
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn sampler_law() -> Outcome {
    let g = build_torus(2, 2, &Weights::Uniform).unwrap();
    let good = chi_square_sampler_test(&g, 100_000, 7).map_err(|e| e.to_string())?;
    let mut w = vec![[1.0, 1.0]; g.primal.n_edges()];
    w[0] = [2.0, 2.0];
    let biased = build_torus(2, 2, &Weights::Table(w)).unwrap();
    let bad = chi_square_against(&g, &biased, 100_000, 7).map_err(|e| e.to_string())?;
    check(
        good.p_value > 1e-3 && bad.p_value < 1e-6,
        format!("2x2 torus, 1e5 samples: p = {:.4}; doubled edge weight: p = {:.1e}", good.p_value, bad.p_value),
    )
}

fn campaign(n: usize, law: Law, samples: usize, seed: u64, weights: Option<Vec<[f64; 2]>>, stats: Vec<Statistic>) -> ExperimentConfig {
    ExperimentConfig {
        graph: GraphSpec { topology: TopologyKind::Torus, dims: [n, n], weights },
        law,
        n_samples: samples,
        seed,
        workers: 1,
        statistics: stats,
        test_function: TestFunction::default(),
    }
}

fn loop_tail() -> Outcome {
    let cfg = campaign(64, Law::Wilson, 10_000, 8, None, vec![Statistic::LoopCount]);
    let campaign = surface_dimers::experiments::Campaign::new(&cfg).map_err(|e| e.to_string())?;
    let ks: Vec<usize> = campaign.records().map_err(|e| e.to_string())?.iter().map(|r| r.k).collect();
    let table = loop_tail_report(&ks).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for w in table.windows(2) {
        let observed = w[0].at_least - w[1].at_least;
        if observed >= 100 {
            let ratio = w[1].probability / w[0].probability;
            ok &= ratio <= 0.5;
            parts.push(format!("k={} ({observed} obs): {ratio:.4}", w[0].k));
        }
    }
    check(ok && !parts.is_empty(), format!("64x64 torus, 1e4 samples: {}", parts.join(", ")))
}

fn universality() -> Outcome {
    let stats = vec![Statistic::Instanton, Statistic::SmoothedHeight];
    let imp = Law::TemperleyanImportance;
    let uniform = run_campaign(&campaign(64, imp, 10_000, 9, None, stats.clone())).map_err(|e| e.to_string())?;
    let w = perturbed_weights(Topology::Torus { nx: 64, ny: 64 }, 0.1, 90).map_err(|e| e.to_string())?;
    let perturbed = run_campaign(&campaign(64, imp, 10_000, 91, Some(w), stats.clone())).map_err(|e| e.to_string())?;
    let coarse = run_campaign(&campaign(32, imp, 10_000, 92, None, stats)).map_err(|e| e.to_string())?;
    let tv = total_variation(&uniform.instanton_histogram, &perturbed.instanton_histogram);
    let (m32, m64) = (coarse.smoothed_moments[1].value, uniform.smoothed_moments[1].value);
    let rel = (m32 - m64).abs() / m64;
    check(
        tv < 0.05 && rel < 0.05,
        format!("instanton TV {tv:.4}; smoothed second moment 32x32 {m32:.4} vs 64x64 {m64:.4} ({:.2}%)", 100.0 * rel),
    )
}

fn figure() -> Outcome {
    let start = Instant::now();
    let g = build_torus(1000, 1000, &Weights::Uniform).unwrap();
    let t = sample_crsf(&g, &mut sample_rng(10, 0), None).map_err(|e| e.to_string())?;
    let svg = render_svg(&g, &RenderItem::Crsf(&t)).map_err(|e| e.to_string())?;
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("torus_1000_crsf.svg");
    std::fs::write(&path, &svg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        t.k() > 0 && svg.contains("#d62728") && elapsed < Duration::from_secs(300),
        format!("{} noncontractible loops highlighted, {} bytes, {:.2?}, {}", t.k(), svg.len(), elapsed, path.display()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("bijection certification", bijection_certification),
        ("cycle relation", cycle_relation),
        ("reference flow", reference_flow_validity),
        ("winding equals height", winding_equals_height),
        ("height form structure", height_form_structure),
        ("hodge decomposition", hodge),
        ("sampler law", sampler_law),
        ("loop-count tail", loop_tail),
        ("universality proxy", universality),
        ("figure", figure),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:>2} {name}: PASS ({msg}) [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({msg}) [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
