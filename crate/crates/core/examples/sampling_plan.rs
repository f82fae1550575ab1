//! Turning bin scores into quotas. `alpha` moves the plan from pure
//! bin-size proportionality (0) to pure importance (1).

use adq::sampling::{uniform_quotas, SamplingPlan, ScoreTable};

fn main() -> adq::Result<()> {
    let rep = vec![0.92, 0.88, 0.81, 0.77, 0.70, 0.66, 0.61, 0.58, 0.52, 0.50];
    let div = vec![-0.40, -0.37, -0.36, -0.30, -0.29, -0.25, -0.22, -0.21, -0.18, -0.15];
    let scores = ScoreTable::from_raw(rep, div)?;
    print!("{}", scores.to_csv());

    let masses = vec![100; 10];
    let rho = 0.2;
    println!("uniform  {:?}", uniform_quotas(&masses, rho)?);
    for alpha in [0.0, 0.25, 0.5, 0.65, 1.0] {
        let plan = SamplingPlan::build(&scores.importance, &masses, alpha, rho)?;
        println!("alpha {alpha:<4} {:?} total {}", plan.quotas, plan.total());
    }

    // A small bin saturates and the rest of the budget moves elsewhere.
    let masses = vec![10, 300, 300];
    let plan = SamplingPlan::build(&[2.0, 0.1, 0.1], &masses, 1.0, 0.15)?;
    println!("clipped {:?} budget {}", plan.quotas, plan.budget);
    Ok(())
}
