//! Composes selection and gradient events in an RDP ledger and converts the
//! curve into an (epsilon, delta) guarantee as iterations accumulate.

use fkge_lab::accountant::{rdp_gaussian_subsampled, rdp_selection_subsampled, EventRecord, PrivacyEvent, PrivacyLedger};

fn main() -> fkge_lab::Result<()> {
    println!("gaussian RDP at q=0.01, sigma=1, alpha=2: {:e}", rdp_gaussian_subsampled(0.01, 1.0, 2.0).0);
    println!("selection RDP at q=0.1, sigma_r=sigma_p=1, alpha=2: {:.10}", rdp_selection_subsampled(0.1, 1.0, 1.0, 2)?);

    let q = 0.02;
    let mut ledger = PrivacyLedger::with_default_grid();
    let mut iter = 0;
    for checkpoint in [1, 10, 100, 1000, 5000] {
        while iter < checkpoint {
            ledger.push(EventRecord {
                round: iter / 20 + 1,
                iter: iter % 20,
                event: PrivacyEvent::Selection {
                    q,
                    sigma_r: 1.0,
                    sigma_p: 1.0,
                    delta_t: 1e-6,
                },
            })?;
            // every tenth iteration passes the release test; at sigma = 1 a
            // released gradient is only bounded at small orders, so the
            // conversion term ln(1/delta)/(alpha - 1) dominates
            if iter % 10 == 0 {
                ledger.push(EventRecord {
                    round: iter / 20 + 1,
                    iter: iter % 20,
                    event: PrivacyEvent::Gradient { q, sigma: 1.0 },
                })?;
            }
            iter += 1;
        }
        let g = ledger.to_dp(1e-5)?;
        println!(
            "{checkpoint:>5} iterations: epsilon {:>8.3} at order {:>4}, total delta {:.2e}",
            g.epsilon, g.alpha, g.delta_total
        );
    }
    Ok(())
}
