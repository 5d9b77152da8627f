//! Small-time rate function `I(x0 + eps) = (int du / sigma(u))^2 / 2` by
//! quadrature, against closed forms.
//!
//! ```text
//! cargo run --release --example ldp
//! ```

use smalltime::clt::ldp_rate;

fn main() -> smalltime::Result<()> {
    for sigma in [0.2, 0.5, 1.0] {
        let i = ldp_rate(|_| sigma, 0.0, 0.3)?;
        println!("sigma = {sigma}: I = {i:.12}  closed form {:.12}", 0.09 / (2.0 * sigma * sigma));
    }
    for eps in [0.1, 0.5, 1.0, 2.0] {
        let i = ldp_rate(|u| u, 1.0, eps)?;
        let exact = 0.5 * (1.0f64 + eps).ln().powi(2);
        println!("sigma(u) = u, eps = {eps}: I = {i:.12}  closed form {exact:.12}");
    }
    let cev = ldp_rate(|u: f64| 0.3 * u.powf(0.7), 1.0, 0.5)?;
    println!("sigma(u) = 0.3 u^0.7, eps = 0.5: I = {cev:.10}");
    Ok(())
}
