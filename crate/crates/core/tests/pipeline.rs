use nalgebra::Vector3;
use scatterlab::forward_solver::{DirectionGrid, ForwardConfig};
use scatterlab::geometry::{HausdorffConfig, StarSurface};
use scatterlab::reconstruction::{DataPath, OracleSetup, ReconstructionConfig};
use scatterlab::stability_lab::{run_pair_family, ExperimentSpec, GridSpec, Perturbation, Tolerances};

#[test]
fn y20_family_distance_decreases_with_amplitude() {
    let spec = ExperimentSpec {
        base_surface: StarSurface::sphere(1.0).to_file(),
        perturbation: Perturbation::Coefficients { coefficients: vec![(2, 0, 1.0)] },
        amplitudes: vec![1e-1, 3e-2, 1e-2, 3e-3],
        grids: GridSpec::default(),
        forward: ForwardConfig::with_degree(10),
        hausdorff: HausdorffConfig::default(),
        tolerances: Tolerances::default(),
    };
    let exp = run_pair_family(&spec).unwrap();
    let deltas: Vec<f64> = exp.records.iter().map(|r| r.delta.unwrap()).collect();
    let rhos: Vec<f64> = exp.records.iter().map(|r| r.rho_one_sided.unwrap()).collect();
    assert!(deltas.windows(2).all(|w| w[1] < w[0]), "{deltas:?}");
    assert!(rhos.windows(2).all(|w| w[1] < w[0]), "{rhos:?}");
    // first-order behaviour: δ and ρ scale linearly with the amplitude
    let ratio = deltas[0] / deltas[3];
    assert!((ratio / (1e-1 / 3e-3) - 1.0).abs() < 0.2, "{ratio}");
    for r in &exp.records {
        assert!(r.solver_tolerance < r.delta.unwrap(), "{r:?}");
    }
}

#[test]
fn data_path_agrees_with_oracle_on_perturbed_sphere() {
    let s = StarSurface::perturbed_sphere(1.0, &[(2, 0, 0.1), (3, -1, 0.05)]).unwrap();
    let cfg = ReconstructionConfig { forward: ForwardConfig::with_degree(12), in_degree: 16, l_trunc: 20, ..Default::default() };
    let setup = OracleSetup::new(&s, &cfg, DataPath::Synthesize).unwrap();
    assert!(setup.in_grid.len() > DirectionGrid::cube26().len());
    for lam in [Vector3::new(0.5, 0.0, 0.0), Vector3::new(0.8, -0.6, 1.2), Vector3::new(1.5, 1.0, -1.5)] {
        let e = setup.estimate(&lam, 1e-3).unwrap();
        let d = e.path_discrepancy.unwrap();
        assert!(d <= e.data_bound.unwrap().max(1e-9), "{lam:?}: {e:?}");
        assert!(e.oracle.im.abs() < 1e-2 * e.oracle.norm(), "{e:?}");
    }
}
