// Solves the one-dimensional background and prints density, velocity and field at a few stations.

use swirlsolve::background::{rho_critical, solve_background, BackgroundProfile, EntranceEnv};
use swirlsolve::thermo::GasParams;

pub fn run_example() -> BackgroundProfile {
    let env = EntranceEnv::default();
    let gas = GasParams::default();
    let bg = solve_background(&env, &gas, 257).expect("default entrance state is subsonic");
    println!("sonic density {:.6}, Bernoulli constant {:.6}", rho_critical(env.j0, env.s0, &gas), bg.b0);
    println!("{:>8} {:>12} {:>12} {:>12}", "x", "rho", "u", "E");
    for i in (0..bg.n()).step_by(32) {
        println!("{:8.4} {:12.8} {:12.8} {:12.8}", bg.x[i], bg.rho_bar[i], bg.u_bar[i], bg.e_bar[i]);
    }
    bg
}

#[allow(dead_code)]
fn main() {
    run_example();
}
