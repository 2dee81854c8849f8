use pendula::experiments::*;
use pendula::model::{Apparatus, TlsParams};
use std::f64::consts::PI;

fn main() {
    // --- criterion 5 mismatch profile ---
    let app = Apparatus::paper_default();
    let delta = 2.0 * PI * 6.7e-3;
    let omega = 2.0 * PI * 2.27e-3;
    let v = PI * delta * delta / (2.0 * (1.0f64 / 0.4).ln());
    let drive = TlsParams { delta, eps0: 0.0, amplitude: v / omega, omega };
    let period = drive.period();
    let chain = ChainSettings::for_carrier(app.omega_mean());
    let init = init_out_of_phase(0.01, 0.0);
    let dt = 1e-3;
    let (n_p, _) = mode_population_run(&app, &drive, Engine::NewtonLinear, &init, period, dt, &chain).unwrap();
    let (s_p, _) = mode_population_run(&app, &drive, Engine::Schrodinger, &init, period, dt, &chain).unwrap();
    println!("len newton {} schr {}, t0 {} {}, dt {} {}", n_p.len(), s_p.len(), n_p.t0, s_p.t0, n_p.dt, s_p.dt);
    let n = n_p.len().min(s_p.len());
    for i in (0..n).step_by(n / 24) {
        let d = n_p.values[i] - s_p.values[i];
        if d.abs() > 0.02 {
            println!("t {:6.1}: newton {:.4} schr {:.4} diff {:+.4}", n_p.time(i), n_p.values[i], s_p.values[i], d);
        }
    }
    let worst = (0..n).map(|i| (n_p.values[i] - s_p.values[i]).abs()).fold(0.0f64, f64::max);
    let worst_i = (0..n).max_by(|a, b| (n_p.values[*a]-s_p.values[*a]).abs().total_cmp(&(n_p.values[*b]-s_p.values[*b]).abs())).unwrap();
    println!("worst {:.4} at t {:.1}", worst, n_p.time(worst_i));

    // --- criterion 6 agreement box ---
    let mut schr = FanConfig::defaults(Engine::Schrodinger);
    let mut newt = FanConfig::defaults(Engine::NewtonLinear);
    let box_grid: Vec<f64> = (0..6).map(|i| i as f64 * 2.0 / 59.0).collect();
    schr.eps0_grid = box_grid.clone(); schr.a_grid = box_grid.clone();
    newt.eps0_grid = box_grid.clone(); newt.a_grid = box_grid.clone();
    let fs = run_lzsm_fan(&schr).unwrap();
    let fnn = run_lzsm_fan(&newt).unwrap();
    println!("agreement box (rows eps0, cols a):");
    for ie in 0..6 {
        let row: Vec<String> = (0..6).map(|ia| format!("{:+.3}", fs.value(ie, ia) - fnn.value(ie, ia))).collect();
        println!("  eps0={:.3}: {}", box_grid[ie], row.join(" "));
    }
    println!("schr row0: {:?}", (0..6).map(|ia| fs.value(0, ia)).collect::<Vec<_>>());
    println!("newt row0: {:?}", (0..6).map(|ia| fnn.value(0, ia)).collect::<Vec<_>>());
}
