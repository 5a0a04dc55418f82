use nalgebra::DMatrix;
use num_complex::Complex64;
use std::time::Instant;

#[test]
#[ignore]
fn lu_and_solve_timing() {
    for n in [1024usize, 2048] {
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let v = ((i * 7 + j * 13) % 97) as f64 / 97.0;
                m[(i, j)] = Complex64::new(v, -0.3 * v);
            }
            m[(i, i)] += Complex64::new(n as f64, 0.0);
        }
        let t0 = Instant::now();
        let lu = m.clone().lu();
        let t_lu = t0.elapsed().as_secs_f64();
        let b = DMatrix::<Complex64>::identity(n, 1).column(0).clone_owned();
        let t1 = Instant::now();
        let _x = lu.solve(&b).unwrap();
        let t_solve = t1.elapsed().as_secs_f64();
        println!("n = {n}: LU {t_lu:.2} s, solve {t_solve:.4} s");
    }
}
