use std::time::Instant;
use wolffsolve::measure::{Measure, Point, RadialSegment};
use wolffsolve::potential::{wolff, BasePotential, PotentialParams};

fn main() {
    let m = Measure::new(3, vec![RadialSegment::power(1.0, 1.5, 0.0, 1.0)], vec![]).unwrap();
    let params = PotentialParams::new(3, 0.5, 2.0, 0.5, 0.0).unwrap();
    for rho in [0.37f64, 1e-3, 1e-6, 10.0] {
        let t0 = Instant::now();
        let v = wolff(&m, &params, &Point::radial(3, rho)).unwrap();
        println!("wolff({rho}) = {:.9}  rel_err {:.2e}  in {:?}", v.value, v.abs_error_bound / v.value, t0.elapsed());
    }
    let t0 = Instant::now();
    let table = BasePotential::build(&m, &params, 64, None).unwrap();
    println!("table build: {:?} fit_err {:.2e}", t0.elapsed(), table.fit_rel_err);
    for rho in [0.01f64, 1e-4, 3.0] {
        let t0 = Instant::now();
        let wv = table.weighted_wolff(&m, 1.0, &Point::radial(3, rho)).unwrap();
        println!("weighted_wolff({rho}) = {:.6} rel_err {:.2e} in {:?}", wv.value, wv.abs_error_bound / wv.value, t0.elapsed());
    }
}
