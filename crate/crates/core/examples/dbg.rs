use lrsim_core::gauss::{cell_mass_quadrature, Covariance2};

fn midpoint(cov: &Covariance2, x0: f64, y0: f64, x1: f64, y1: f64, n: usize) -> f64 {
    let det = cov.xx * cov.yy - cov.xy * cov.xy;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * det.sqrt());
    let hx = (x1 - x0) / n as f64;
    let hy = (y1 - y0) / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let x = x0 + (i as f64 + 0.5) * hx;
        let mut inner = 0.0;
        for j in 0..n {
            let y = y0 + (j as f64 + 0.5) * hy;
            let q = (cov.yy * x * x - 2.0 * cov.xy * x * y + cov.xx * y * y) / det;
            inner += (-0.5 * q).exp();
        }
        acc += inner;
    }
    acc * norm * hx * hy
}

fn main() {
    let cov = Covariance2::new(1.0, 0.5, 1.0).unwrap();
    let cell = (0.0, 0.0, 0.5, 0.5);
    let m1 = midpoint(&cov, cell.0, cell.1, cell.2, cell.3, 1024);
    let m2 = midpoint(&cov, cell.0, cell.1, cell.2, cell.3, 2048);
    let m4 = midpoint(&cov, cell.0, cell.1, cell.2, cell.3, 4096);
    let rich = m2 + (m2 - m1) / 3.0;
    let rich2 = m4 + (m4 - m2) / 3.0;
    let gl = cell_mass_quadrature(&cov, cell.0, cell.1, cell.2, cell.3);
    println!("mid1024  {m1:.15}");
    println!("mid2048  {m2:.15}");
    println!("mid4096  {m4:.15}");
    println!("rich(1k,2k) {rich:.15}");
    println!("rich(2k,4k) {rich2:.15}");
    println!("gauss-leg   {gl:.15}");
    println!("gl - rich2 = {:.3e}", gl - rich2);
    println!("gl - mid1024 = {:.3e}", gl - m1);
}
