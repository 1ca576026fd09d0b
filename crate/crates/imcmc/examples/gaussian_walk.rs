//! Smallest complete kernel: a symmetric random walk on one Gaussian site.
//!
//! Run with `cargo run -p imcmc --example gaussian_walk`.

use imcmc::dist::normal;
use imcmc::kernel::{step, KernelSpec};
use imcmc::model::{Auxiliary, Model};
use imcmc::rng::RandomSource;
use imcmc::transform::{In, Out, Transform};
use imcmc::Trace;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The target: a single latent x ~ Normal(0, 1), nothing observed.
    let model = Model::new("gaussian", |interp| {
        interp.sample("x", normal(0.0, 1.0)?)?;
        Ok(())
    });

    // Fresh randomness for each proposal: one step d ~ Normal(0, 0.5).
    let aux = Auxiliary::new("half-step", |_given, interp| {
        interp.sample("d", normal(0.0, 0.5)?)?;
        Ok(())
    });

    // The transform shifts x by d and negates d, so applying it twice is
    // the identity. The engine differentiates this map and folds its
    // Jacobian into the acceptance probability automatically.
    let transform = Transform::new("shift", |ctx| {
        let x = ctx.read(In::Model, "x")?;
        let d = ctx.read(In::Aux, "d")?;
        ctx.write(Out::Model, "x", &x + &d)?;
        ctx.write(Out::Aux, "d", -&d)?;
        Ok(())
    });

    let spec = KernelSpec::new(model, aux, transform, Trace::empty()).named("gaussian-walk");

    let mut rng = RandomSource::from_seed(7);
    let (mut state, _score) = spec.model.trace_and_score(&spec.observations, &mut rng)?;
    let mut accepted = 0u32;
    let n = 10_000;
    for _ in 0..n {
        let (next, diag) = step(&spec, &state, &mut rng)?;
        accepted += u32::from(diag.accepted);
        state = next;
    }
    println!(
        "final state {state}, acceptance rate {:.3}",
        f64::from(accepted) / f64::from(n)
    );
    Ok(())
}
