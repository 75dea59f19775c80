//! Discrete Hodge decomposition of a closed one-form on the dual graph of `G`
//! with unit conductances: `omega = d(phi) + harmonic`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{straight_loop, HeightOneForm};
use crate::error::{Error, Result};
use crate::surface::{LiftedFace, SuperpositionGraph};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HodgeOptions {
    /// Target for `||r||_2 / ||b||_2` in the conjugate-gradient solve.
    pub tolerance: f64,
    /// Iteration budget as a multiple of the number of faces.
    pub budget_factor: usize,
}

impl Default for HodgeOptions {
    fn default() -> Self {
        Self { tolerance: 1e-13, budget_factor: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HodgeParts {
    /// Potential per face, mean zero.
    pub scalar: Vec<f64>,
    /// Harmonic part per `G` edge (zero on edges that lack a face on one side).
    pub harmonic: Vec<f64>,
    /// Final relative residual of the solve.
    pub residual: f64,
    pub iterations: usize,
    /// Largest divergence of the harmonic part, relative to `max |omega|`.
    pub divergence: f64,
    /// Largest sum of the harmonic part around a dual face, relative to `max |omega|`.
    pub curl: f64,
    /// Sums of the harmonic part along one period in x and y.
    pub instanton: [f64; 2],
}

impl HodgeParts {
    /// TSV of the scalar part: face midpoint in quarter units and potential.
    pub fn scalar_tsv(&self, s: &SuperpositionGraph) -> String {
        let mut out = format!("# residual\t{:e}\n# instanton\t{}\t{}\nface_x\tface_y\tscalar\n", self.residual, self.instanton[0], self.instanton[1]);
        for (f, v) in self.scalar.iter().enumerate() {
            let m = s.face_mid(LiftedFace::new(f, [0, 0]));
            out.push_str(&format!("{}\t{}\t{:e}\n", m.x, m.y, v));
        }
        out
    }

    /// TSV of the harmonic part, one row per edge of `G` (white and black positions).
    pub fn harmonic_tsv(&self, s: &SuperpositionGraph) -> String {
        let mut out = String::from("white_x\twhite_y\tblack_x\tblack_y\tharmonic\n");
        for (e, h) in self.harmonic.iter().enumerate() {
            let (w, b) = (s.positions[s.edges[e].white], s.positions[s.edges[e].black]);
            out.push_str(&format!("{}\t{}\t{}\t{}\t{:e}\n", w.x, w.y, b.x, b.y, h));
        }
        out
    }
}

struct FaceLaplacian {
    start: Vec<usize>,
    nbrs: Vec<usize>,
}

impl FaceLaplacian {
    fn new(s: &SuperpositionGraph) -> Self {
        let n = s.faces.len();
        let mut lists = vec![Vec::new(); n];
        for (_, l, r) in s.dual_edges() {
            if l.face != r.face {
                lists[l.face].push(r.face);
                lists[r.face].push(l.face);
            }
        }
        let mut start = vec![0];
        let mut nbrs = Vec::new();
        for l in lists {
            nbrs.extend(l);
            start.push(nbrs.len());
        }
        Self { start, nbrs }
    }

    fn degree(&self, f: usize) -> usize {
        self.start[f + 1] - self.start[f]
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(f, o)| {
            let nb = &self.nbrs[self.start[f]..self.start[f + 1]];
            *o = nb.len() as f64 * x[f] - nb.iter().map(|&g| x[g]).sum::<f64>();
        });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splits `form` into a gradient and a harmonic part.
pub fn hodge_decompose(s: &SuperpositionGraph, form: &HeightOneForm, opts: &HodgeOptions) -> Result<HodgeParts> {
    let n = s.faces.len();
    let lap = FaceLaplacian::new(s);
    let omega: Vec<f64> = form.values.iter().map(|&v| v as f64).collect();

    // Right-hand side: minus the outflow of omega (which runs right to left).
    let mut rhs = vec![0.0; n];
    for (e, l, r) in s.dual_edges() {
        if l.face != r.face {
            rhs[r.face] -= omega[e];
            rhs[l.face] += omega[e];
        }
    }
    let (phi, residual, iterations) = conjugate_gradient(&lap, &rhs, opts)?;

    let mut harmonic = vec![0.0; s.edges.len()];
    for (e, l, r) in s.dual_edges() {
        harmonic[e] = omega[e] - (phi[l.face] - phi[r.face]);
    }
    let scale = omega.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);

    let mut div = vec![0.0; n];
    for (e, l, r) in s.dual_edges() {
        div[r.face] += harmonic[e];
        div[l.face] -= harmonic[e];
    }
    let divergence = div.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
    let mut curl = 0.0f64;
    for v in 0..s.n_vertices() {
        let edges = s.vertex_edges(v);
        if edges.iter().all(|&e| s.edges[e].left.is_some() && s.edges[e].right.is_some()) {
            let c: f64 = edges.iter().map(|&e| harmonic[e]).sum();
            curl = curl.max(c.abs() / scale);
        }
    }

    let base = LiftedFace::new(0, [0, 0]);
    let mut instanton = [0.0; 2];
    for (axis, slot) in instanton.iter_mut().enumerate() {
        if s.topology.periods()[axis].is_some() {
            *slot = harmonic_path_sum(s, &harmonic, &straight_loop(s, base, axis)?)?;
        }
    }
    Ok(HodgeParts { scalar: phi, harmonic, residual, iterations, divergence, curl, instanton })
}

/// Sum of a real one-form along a path of adjacent lifted faces.
pub fn harmonic_path_sum(s: &SuperpositionGraph, values: &[f64], path: &[LiftedFace]) -> Result<f64> {
    let mut total = 0.0;
    for w in path.windows(2) {
        let st = s.step_between(w[0], w[1]).ok_or(Error::NotAdjacent(w[0].face, w[1].face))?;
        total += if st.from_left { -values[st.edge] } else { values[st.edge] };
    }
    Ok(total)
}

/// Jacobi-preconditioned conjugate gradients for the singular face Laplacian;
/// the solution is returned with mean zero.
fn conjugate_gradient(lap: &FaceLaplacian, b: &[f64], opts: &HodgeOptions) -> Result<(Vec<f64>, f64, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((x, 0.0, 0));
    }
    let inv_diag: Vec<f64> = (0..n).map(|f| 1.0 / lap.degree(f).max(1) as f64).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let budget = opts.budget_factor * n.max(1);
    let mut rel = 1.0;
    for it in 1..=budget {
        lap.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= opts.tolerance {
            let mean = x.iter().sum::<f64>() / n as f64;
            x.iter_mut().for_each(|v| *v -= mean);
            return Ok((x, rel, it));
        }
        z.par_iter_mut().zip(&r).zip(&inv_diag).for_each(|((z, r), d)| *z = r * d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::SolverDidNotConverge { iterations: budget, residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_torus, Weights};

    #[test]
    fn gradient_has_no_harmonic_part() {
        let g = build_torus(4, 3, &Weights::Uniform).unwrap();
        let s = g.superpose().unwrap();
        let f: Vec<i64> = (0..s.faces.len()).map(|i| ((i * 7919) % 13) as i64 - 6).collect();
        let values = s
            .edges
            .iter()
            .map(|e| match (e.left, e.right) {
                (Some(l), Some(r)) => f[l.face] - f[r.face],
                _ => 0,
            })
            .collect();
        let parts = hodge_decompose(&s, &HeightOneForm { values }, &HodgeOptions::default()).unwrap();
        assert!(parts.harmonic.iter().all(|h| h.abs() <= 1e-10));
        assert!(parts.instanton.iter().all(|h| h.abs() <= 1e-10));
    }
}
