use qpde::design::gaussian_profile;
use qpde::diagenc::{diag_be_fourier, fit_fourier_2d};
use qpde::hamsim::{evolve_be, evolve_exact, plan_evolution};
use qpde::pdeops::{assemble_wave_a, prepare_initial, WaveLayout};

#[test]
fn probe_front_field() {
    let n = 3usize;
    let fit = fit_fourier_2d(&gaussian_profile(None), 3, 3, 64).unwrap();
    println!("fit residual {:.3e}", fit.sup_residual);
    let wl = WaveLayout::demo(n);
    let c_be = diag_be_fourier(&fit.series, &wl.diag_layout(), Some("u_c")).unwrap();
    let a = assemble_wave_a(&c_be, &wl).unwrap();
    println!(
        "alpha {:.6} ancillas {} total qubits {}",
        a.alpha,
        a.ancillas,
        a.total_qubits()
    );
    let plan = plan_evolution(a.alpha, 1.0, 1e-6).unwrap();
    println!("plan r {}", plan.r);
    let w0 = prepare_initial(&wl).unwrap();
    let t0 = std::time::Instant::now();
    let (wt, success) = evolve_be(&a, &w0, &plan).unwrap();
    println!("evolve_be took {:?} success {:.3e}", t0.elapsed(), success);
    let wx = evolve_exact(a.reference.as_ref().unwrap(), &w0, 1.0).unwrap();
    let l2: f64 = wt
        .amps()
        .iter()
        .zip(wx.amps())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    println!("be vs exact l2 {:.3e}", l2);

    let p = 1usize << n;
    // sector 0 of the exact state: index (ix << n) | iy
    let mut peak = 0.0f64;
    for ix in 0..p {
        for iy in 0..p {
            peak = peak.max(wx.amps()[(ix << n) | iy].norm());
        }
    }
    println!("w1 peak {:.4e}", peak);
    println!("w1 magnitude grid (rows = iy, cols = ix, in % of peak):");
    for iy in 0..p {
        let mut row = String::new();
        for ix in 0..p {
            let v = wx.amps()[(ix << n) | iy].norm() / peak;
            row.push_str(&format!("{:5.1} ", 100.0 * v));
        }
        println!("iy={iy}: {row}");
    }
    median_progress(&wx, n, "n=3 exact");
    median_progress(&wt, n, "n=3 blockenc");

    // Same at n=2 (the quick-test size).
    let n2 = 2usize;
    let wl2 = WaveLayout::demo(n2);
    let c2 = diag_be_fourier(&fit.series, &wl2.diag_layout(), Some("u_c")).unwrap();
    let a2 = assemble_wave_a(&c2, &wl2).unwrap();
    let plan2 = plan_evolution(a2.alpha, 1.0, 1e-6).unwrap();
    let w02 = prepare_initial(&wl2).unwrap();
    let wx2 = evolve_exact(a2.reference.as_ref().unwrap(), &w02, 1.0).unwrap();
    println!("n=2 alpha {:.4} r {}", a2.alpha, plan2.r);
    median_progress(&wx2, n2, "n=2 exact");
}

fn median_progress(state: &qpde::StateVector, n: usize, label: &str) {
    let p = 1usize << n;
    let mut progress = Vec::new();
    for iy in 0..p {
        let mass: Vec<f64> = (0..p)
            .map(|ix| state.amps()[(ix << n) | iy].norm_sqr())
            .collect();
        let total: f64 = mass.iter().sum();
        if total == 0.0 {
            progress.push(0.0);
            continue;
        }
        let half = 0.5 * total;
        let mut cum = 0.0;
        let mut x_med = 0.0;
        for (ix, &m) in mass.iter().enumerate() {
            if cum + m >= half {
                x_med = ix as f64 - 0.5 + (half - cum) / m;
                break;
            }
            cum += m;
        }
        progress.push((p - 1) as f64 - x_med);
    }
    let min = progress.iter().cloned().fold(f64::INFINITY, f64::min);
    let argmin: Vec<usize> = progress
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= min + 1e-12)
        .map(|(i, _)| i)
        .collect();
    println!(
        "{label}: progress {:?} argmin rows {:?} (middle third iy/(p-1) in [1/3,2/3])",
        progress.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
        argmin
    );
}
