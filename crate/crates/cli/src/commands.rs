use anyhow::{Context, Result};
use confint::bea::{modified_field_coefficients, taylor_coefficients, OneStepMap};
use confint::measure::{
    cell600_vertices, evolve_cloud, sphere_points, weighted_hull_volumes, DensityKind, PointCloud, VolumeConfig,
};
use confint::series::{
    modified_altered_hamiltonian, modified_conformal_hamiltonian, proposed_integrator, TruncationOrder,
};
use confint::variational::{reference_step, reference_trajectory, symplectic_step};
use confint::{PhaseState, Result as CoreResult};
use serde::Serialize;

use crate::config::{ExperimentConfig, Shape};
use crate::output::{csv_document, num};

/// A named output file and its contents.
pub type Artifact = (String, Vec<u8>);

fn comment(command: &str, cfg: &ExperimentConfig) -> String {
    format!("confint {command} config={}", cfg.canonical())
}

/// Order used for the `Kmod` and `Emod` diagnostics regardless of `ell`.
fn diagnostic_order() -> TruncationOrder {
    TruncationOrder::new(2).expect("2 is a valid order")
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let table = cfg.table();
    let system = table.particle().system();
    let x0 = cfg.initial_state();
    let e0 = modified_conformal_hamiltonian(&table, cfg.order(), &x0, cfg.h)?;
    let h0 = system.hamiltonian(&x0)?;
    let traj = proposed_integrator(&table, cfg.order(), &x0, &cfg.stepper(), cfg.steps).context("integrator")?;
    let reference = reference_trajectory(system, &x0, cfg.h, cfg.steps, &cfg.reference()).context("reference flow")?;

    let two = diagnostic_order();
    let mut rows = Vec::with_capacity(traj.len());
    for (j, (s, r)) in traj.iter().zip(&reference).enumerate() {
        let [x, y, px, py] = s.as_planar();
        let row = vec![
            j.to_string(),
            num(j as f64 * cfg.h),
            num(x),
            num(y),
            num(px),
            num(py),
            num(system.hamiltonian(s)?),
            num(system.altered_hamiltonian(s, h0)?),
            num(modified_altered_hamiltonian(&table, two, s, cfg.h, e0)?),
            num(modified_conformal_hamiltonian(&table, two, s, cfg.h)?),
            num(s.distance(r)),
        ];
        rows.push(row);
    }
    let header = ["step", "t", "x", "y", "px", "py", "H", "K_E", "Kmod", "Emod", "err_norm"];
    Ok(vec![("simulate.csv".into(), csv_document(&comment("simulate", cfg), &header, &rows)?)])
}

pub fn compare(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let table = cfg.table();
    let system = table.particle().system();
    let x0 = cfg.initial_state();
    let h0 = system.hamiltonian(&x0)?;
    let run = |ell: u8| -> Result<Vec<PhaseState>> {
        let order = TruncationOrder::new(ell)?;
        proposed_integrator(&table, order, &x0, &cfg.stepper(), cfg.steps).with_context(|| format!("integrator with ell={ell}"))
    };
    let (zero, two) = (run(0)?, run(2)?);
    let reference = reference_trajectory(system, &x0, cfg.h, cfg.steps, &cfg.reference()).context("reference flow")?;

    let mut rows = Vec::with_capacity(reference.len());
    for j in 0..reference.len() {
        rows.push(vec![
            j.to_string(),
            num(j as f64 * cfg.h),
            num(system.hamiltonian(&zero[j])? - h0),
            num(system.hamiltonian(&two[j])? - h0),
            num(zero[j].distance(&reference[j])),
            num(two[j].distance(&reference[j])),
        ]);
    }
    let header = ["step", "t", "H_drift_ell0", "H_drift_ell2", "err_norm_ell0", "err_norm_ell2"];
    Ok(vec![("compare.csv".into(), csv_document(&comment("compare", cfg), &header, &rows)?)])
}

struct CloudRun {
    volumes: Vec<Vec<String>>,
    points: Vec<Vec<String>>,
}

/// Evolves the cloud and records both weighted volumes and the point
/// coordinates every `record_every` steps.
fn track_cloud<F>(cfg: &ExperimentConfig, cloud0: &PointCloud, densities: &[DensityKind], step: F) -> Result<CloudRun>
where
    F: Fn(usize, &PhaseState) -> CoreResult<PhaseState> + Sync,
{
    let vcfg = VolumeConfig {
        samples: cfg.mc_samples,
        seed: cfg.seed,
        ..VolumeConfig::default()
    };
    vcfg.validate()?;
    let mut cloud = cloud0.clone();
    let mut run = CloudRun {
        volumes: Vec::new(),
        points: Vec::new(),
    };
    for j in 0..=cfg.steps {
        if j > 0 {
            cloud = evolve_cloud(&cloud, &step).with_context(|| format!("step {} failed", j - 1))?;
        }
        if j % cfg.record_every != 0 {
            continue;
        }
        let t = num(j as f64 * cfg.h);
        let vols = weighted_hull_volumes(&cloud, densities, &vcfg).with_context(|| format!("volume at step {j}"))?;
        let mut row = vec![j.to_string(), t.clone()];
        for v in &vols {
            row.push(num(v.value));
            row.push(num(v.std_error));
        }
        run.volumes.push(row);
        for (i, p) in cloud.points().iter().enumerate() {
            let mut row = vec![j.to_string(), t.clone(), i.to_string()];
            row.extend(p.coords().iter().map(|&c| num(c)));
            run.points.push(row);
        }
    }
    Ok(run)
}

pub fn cloud(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let table = cfg.table();
    let system = table.particle().system().clone();
    let cc = cfg.cloud_or_default();
    let cloud0 = match cc.shape {
        Shape::Cell600 => cell600_vertices(cc.center, cc.radius)?,
        Shape::Sphere5000 => sphere_points(cc.center, cc.radius, 5000)?,
    };
    let densities = [
        DensityKind::Mu0(system.clone()),
        DensityKind::MuMod2 {
            table: table.clone(),
            h: cfg.h,
        },
    ];
    // each trajectory keeps the modified energy of its own starting point
    let energies = cloud0
        .points()
        .iter()
        .map(|p| modified_conformal_hamiltonian(&table, cfg.order(), p, cfg.h))
        .collect::<CoreResult<Vec<f64>>>()?;
    let stepper = cfg.stepper();
    let integ = track_cloud(cfg, &cloud0, &densities, |i, s| {
        symplectic_step(table.kind(), table.particle(), s, &stepper, energies[i])
    })
    .context("integrator")?;
    let rcfg = cfg.reference();
    let reference =
        track_cloud(cfg, &cloud0, &densities, |_, s| reference_step(&system, s, cfg.h, &rcfg)).context("reference flow")?;

    let header = ["step", "t", "vol_mu0", "se_mu0", "vol_mumod2", "se_mumod2"];
    let points_header = ["step", "t", "index", "x", "y", "px", "py"];
    let c = comment("cloud", cfg);
    Ok(vec![
        ("cloud.csv".into(), csv_document(&c, &header, &integ.volumes)?),
        ("cloud_reference.csv".into(), csv_document(&c, &header, &reference.volumes)?),
        ("cloud_points.csv".into(), csv_document(&c, &points_header, &integ.points)?),
        ("cloud_reference_points.csv".into(), csv_document(&c, &points_header, &reference.points)?),
    ])
}

/// Field order puts the config first for provenance.
#[derive(Serialize)]
struct BeaReport<'a> {
    config: &'a ExperimentConfig,
    state: [f64; 4],
    energy: f64,
    d1: &'a [f64],
    d2: &'a [f64],
    d3: &'a [f64],
    f0: &'a [f64],
    f1: &'a [f64],
    f2: &'a [f64],
    oracle_f2: [f64; 4],
}

/// Extraction at the initial state for `Psi_{h,E}` with `E = H(initial)`.
pub fn bea(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let table = cfg.table();
    let x0 = cfg.initial_state();
    let energy = table.particle().system().hamiltonian(&x0)?;
    let map = OneStepMap::variational(cfg.kind, table.particle().clone(), energy);
    let taylor = taylor_coefficients(&map, &x0, 3, cfg.bea.base_h, cfg.bea.levels)?;
    let field = modified_field_coefficients(&map, &x0, cfg.bea.base_h, cfg.bea.levels)?;
    let doc = BeaReport {
        config: cfg,
        state: cfg.initial,
        energy,
        d1: &taylor.d[0],
        d2: &taylor.d[1],
        d3: &taylor.d[2],
        f0: &field.f[0],
        f1: &field.f[1],
        f2: &field.f[2],
        oracle_f2: table.k2_vector_field(&x0, energy),
    };
    let mut text = serde_json::to_vec_pretty(&doc)?;
    text.push(b'\n');
    Ok(vec![("bea.json".into(), text)])
}
