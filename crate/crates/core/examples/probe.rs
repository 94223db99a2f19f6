use corridor_core::fp::*;
use corridor_core::geometry::*;
fn main() {
    let pot = potential_for(DomainSpec::corridor(3.0, 0.25).unwrap(), 120, 10).unwrap();
    let g = pot.grid().clone();
    let p = ModelParams::new(1.5, 0.45, 0.4, 0.05, 0.05, pot.clone()).unwrap();
    let s = steady_state_1d(&p, 6001).unwrap();
    for t in [10.0, 50.0, 100.0] {
        let last = solve_fp(&p, t, 0.005).unwrap().last();
        let col = |i: usize| (0..g.ny).map(|j| last.rho[g.index(i, j)]).sum::<f64>() / g.ny as f64;
        println!("T={t}");
        for i in [
            0, 1, 2, 3, 4, 5, 6, 8, 10, 20, 40, 60, 80, 100, 115, 118, 119,
        ] {
            println!("{i} {:.4} {:.4}", col(i), s.at_x((i as f64 + 0.5) * g.dx));
        }
    }
}
