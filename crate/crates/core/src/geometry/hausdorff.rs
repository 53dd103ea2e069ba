use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::surface::StarSurface;
use crate::special_functions::build_sphere_quadrature;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HausdorffConfig {
    /// Degree of the sphere rule whose nodes seed the outer search.
    pub sample_degree: usize,
    /// Extra seeded random start directions for the outer search.
    pub random_starts: usize,
    /// Number of best samples refined by local ascent.
    pub refine_candidates: usize,
    pub seed: u64,
}

impl Default for HausdorffConfig {
    fn default() -> Self {
        Self { sample_degree: 40, random_starts: 64, refine_candidates: 6, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffEstimate {
    pub distance: f64,
    /// Bound on the error left by the final refinement bracket.
    pub error_bound: f64,
    /// Point on the first surface attaining the sup (second surface if the
    /// symmetric maximum came from the reverse direction).
    pub witness: Vector3<f64>,
}

/// Orthonormal tangent frame at a unit vector: smallest-component pivot, then Gram–Schmidt.
pub fn tangent_frame(x: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let ax = x.iter().map(|v| v.abs()).collect::<Vec<_>>();
    let k = (0..3).min_by(|&a, &b| ax[a].total_cmp(&ax[b])).unwrap();
    let mut e = Vector3::zeros();
    e[k] = 1.0;
    let u = (e - x * x.dot(&e)).normalize();
    (u, x.cross(&u))
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coordinate golden-section search of `f` over directions near `start`;
/// returns the best direction, value and final half-width.
fn local_min_on_sphere<F: Fn(&Vector3<f64>) -> f64>(f: &F, start: Vector3<f64>, h0: f64) -> (Vector3<f64>, f64, f64) {
    let mut x = start;
    let mut fx = f(&x);
    let mut h = h0;
    for _ in 0..6 {
        for axis in 0..2 {
            let (e1, e2) = tangent_frame(&x);
            let dir = if axis == 0 { e1 } else { e2 };
            let along = |s: f64| f(&(x + dir * s).normalize());
            let (s, fs) = golden_min(along, -h, h, 28);
            if fs < fx {
                x = (x + dir * s).normalize();
                fx = fs;
            }
        }
        h *= 0.1;
    }
    (x, fx, h)
}

fn distance_to_surface(p: &Vector3<f64>, target: &StarSurface, seeds: &[(Vector3<f64>, Vector3<f64>)]) -> f64 {
    let f = |y: &Vector3<f64>| (p - y * target.radius_at(y)).norm();
    let mut start = p.normalize();
    let mut best = f(&start);
    for (dir, q) in seeds {
        let d = (p - q).norm();
        if d < best {
            best = d;
            start = *dir;
        }
    }
    let (_, d, _) = local_min_on_sphere(&f, start, 0.2);
    d.min(best)
}

/// `sup_{x ∈ Γ1} inf_{y ∈ Γ2} |x − y|`, or the max of both orders when `symmetric`.
pub fn hausdorff_distance(g1: &StarSurface, g2: &StarSurface, symmetric: bool, cfg: &HausdorffConfig) -> HausdorffEstimate {
    let forward = one_sided(g1, g2, cfg);
    if !symmetric {
        return forward;
    }
    let backward = one_sided(g2, g1, cfg);
    if backward.distance > forward.distance {
        backward
    } else {
        forward
    }
}

fn one_sided(g1: &StarSurface, g2: &StarSurface, cfg: &HausdorffConfig) -> HausdorffEstimate {
    let grid = build_sphere_quadrature(cfg.sample_degree.max(2)).expect("degree >= 2");
    let mut dirs = grid.nodes.clone();
    dirs.push(Vector3::z());
    dirs.push(-Vector3::z());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.random_starts {
        loop {
            let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                dirs.push(v / n);
                break;
            }
        }
    }
    let seeds: Vec<_> = grid.nodes.iter().map(|y| (*y, y * g2.radius_at(y))).collect();
    let dist_at = |x: &Vector3<f64>| distance_to_surface(&(x * g1.radius_at(x)), g2, &seeds);

    let mut sampled: Vec<(f64, Vector3<f64>)> = dirs.par_iter().map(|x| (dist_at(x), *x)).collect();
    sampled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let spacing = std::f64::consts::PI / (grid.n_theta as f64);
    let neg = |x: &Vector3<f64>| -dist_at(x);
    let refined: Vec<(f64, Vector3<f64>, f64)> = sampled
        .iter()
        .take(cfg.refine_candidates.max(1))
        .par_bridge()
        .map(|(_, x)| {
            let (y, v, h) = local_min_on_sphere(&neg, *x, spacing);
            (-v, y, h)
        })
        .collect();
    let (mut distance, mut dir, mut h) = (sampled[0].0, sampled[0].1, spacing);
    for (d, y, hh) in refined {
        if d >= distance {
            distance = d;
            dir = y;
            h = hh;
        }
    }
    // the outer function is Lipschitz with constant about the surface stretch
    let lip = 2.0 * g1.a1();
    HausdorffEstimate { distance, error_bound: lip * h + 1e-9, witness: dir * g1.radius_at(&dir) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn concentric_spheres_both_orders() {
        let cfg = HausdorffConfig::default();
        let (a, b) = (StarSurface::sphere(1.0), StarSurface::sphere(1.2));
        assert!((hausdorff_distance(&a, &b, false, &cfg).distance - 0.2).abs() < 1e-6);
        assert!((hausdorff_distance(&b, &a, false, &cfg).distance - 0.2).abs() < 1e-6);
        assert!((hausdorff_distance(&a, &b, true, &cfg).distance - 0.2).abs() < 1e-6);
    }

    #[test]
    fn identical_surfaces_are_at_distance_zero() {
        let s = StarSurface::perturbed_sphere(1.0, &[(2, 0, 0.05), (3, 1, 0.04)]).unwrap();
        let est = hausdorff_distance(&s, &s, true, &HausdorffConfig::default());
        assert!(est.distance < 1e-8, "{est:?}");
    }

    /// Meridian-plane brute force: both surfaces are axisymmetric, so nearest
    /// points share the azimuth.
    fn brute_force(r1: &dyn Fn(f64) -> f64, r2: &dyn Fn(f64) -> f64) -> f64 {
        let (n1, n2) = (2000, 40000);
        let curve = |r: &dyn Fn(f64) -> f64, n: usize| -> Vec<(f64, f64)> {
            (0..=n)
                .map(|k| {
                    let t = PI * k as f64 / n as f64;
                    (r(t) * t.sin(), r(t) * t.cos())
                })
                .collect()
        };
        let (c1, c2) = (curve(r1, n1), curve(r2, n2));
        c1.iter()
            .map(|p| c2.iter().map(|q| (p.0 - q.0).hypot(p.1 - q.1)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }

    #[test]
    fn sphere_vs_y20_matches_brute_force() {
        let amp = 0.05;
        let s1 = StarSurface::sphere(1.0);
        let s2 = StarSurface::perturbed_sphere(1.0, &[(2, 0, amp)]).unwrap();
        let r1 = |_: f64| 1.0;
        let r2 = |t: f64| 1.0 + amp * (5.0 / (4.0 * PI)).sqrt() * 0.5 * (3.0 * t.cos().powi(2) - 1.0);
        let cfg = HausdorffConfig::default();
        let fwd = hausdorff_distance(&s1, &s2, false, &cfg).distance;
        let bwd = hausdorff_distance(&s2, &s1, false, &cfg).distance;
        assert!((fwd - brute_force(&r1, &r2)).abs() < 1e-4, "fwd {fwd}");
        assert!((bwd - brute_force(&r2, &r1)).abs() < 1e-4, "bwd {bwd}");
    }

    #[test]
    fn symmetric_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = HausdorffConfig { sample_degree: 24, random_starts: 16, refine_candidates: 3, seed: 3 };
        for _ in 0..2 {
            let mk = |rng: &mut ChaCha8Rng| {
                let p: Vec<_> = (1..=3usize)
                    .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
                    .map(|(l, m)| (l, m, rng.gen_range(-0.04..0.04)))
                    .collect();
                StarSurface::perturbed_sphere(rng.gen_range(0.9..1.1), &p).unwrap()
            };
            let (a, b, c) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
            let ab = hausdorff_distance(&a, &b, true, &cfg);
            let bc = hausdorff_distance(&b, &c, true, &cfg);
            let ac = hausdorff_distance(&a, &c, true, &cfg);
            let tol = 2.0 * (ab.error_bound + bc.error_bound + ac.error_bound);
            assert!(ac.distance <= ab.distance + bc.distance + tol);
        }
    }

    #[test]
    fn seed_changes_nothing_material() {
        let s1 = StarSurface::sphere(1.0);
        let s2 = StarSurface::perturbed_sphere(1.0, &[(3, 2, 0.06)]).unwrap();
        let a = hausdorff_distance(&s1, &s2, true, &HausdorffConfig { seed: 1, ..Default::default() });
        let b = hausdorff_distance(&s1, &s2, true, &HausdorffConfig { seed: 2, ..Default::default() });
        assert!((a.distance - b.distance).abs() < 1e-7);
    }
}
