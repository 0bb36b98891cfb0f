use pinn_osc::autodiff::Tape;
use pinn_osc::network::{forward_batch, JetOrder, MlpConfig, ParameterVector};
use std::time::Instant;

fn main() {
    let cfg = MlpConfig::default();
    let p = ParameterVector::init(&cfg, 0).unwrap();
    let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.6).collect();
    for order in [JetOrder::Zeroth, JetOrder::First, JetOrder::Second] {
        let start = Instant::now();
        let reps = 2000;
        let mut s = 0.0;
        for _ in 0..reps {
            let tape = Tape::new(p.as_slice());
            let jets = forward_batch(&tape, &cfg, &times, order).unwrap();
            let mut acc = jets[0].v0 * 0.0;
            for j in &jets {
                acc = acc + j.v0.square() + j.v1.square();
            }
            let g = tape.gradient(acc).unwrap();
            s += g[5];
        }
        println!("{order:?}: {:.1} us/epoch ({s})", start.elapsed().as_secs_f64() / reps as f64 * 1e6);
    }
}
