//! Top-k selection over gradient row norms: a profile with a clear gap is
//! released, a flat profile is withheld by the release test.

use fkge_lab::dp::{private_selection, release_test, DpConfig};
use fkge_lab::rng::stream;

fn main() -> fkge_lab::Result<()> {
    let cfg = DpConfig {
        delta_t: 1e-4,
        ..DpConfig::default()
    };
    let b = 16;
    let mut rng = stream(3, &[]);

    // 20 rows with large norms, then a long tail of small ones
    let mut gapped = vec![0.05; 300];
    gapped[..20].iter_mut().for_each(|x| *x = 10.0);
    let flat = vec![1.0; 300];
    for (name, norms) in [("gapped", &gapped), ("flat", &flat)] {
        let trials = 1000;
        let mut released = 0;
        let mut ks = Vec::new();
        for _ in 0..trials {
            let s = private_selection(norms, b, &cfg, &mut rng)?;
            if s.released.is_some() {
                released += 1;
                ks.push(s.k);
            }
        }
        let k_range = ks.iter().min().zip(ks.iter().max());
        println!("{name:>6}: released {released}/{trials}, k range {k_range:?} (B = {b})");
    }

    for gap in [0.0, 2.0, 4.0, 6.0, 8.0] {
        let trials = 10_000;
        let passed = (0..trials).filter(|_| release_test(gap * cfg.c2, &cfg, &mut rng).1).count();
        println!("gap {gap} x C2: release rate {:.4}", passed as f64 / trials as f64);
    }
    Ok(())
}
