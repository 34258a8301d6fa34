// scratch probe, not part of the deliverable
use ni_core::lti::minimality;
use ni_core::modal::random_structure;

fn main() {
    for i in 0..100u64 {
        let model = random_structure(1000 + i, 1 + (i as usize) % 5, 1 + (i as usize) % 3);
        let plant = model.realize();
        let min_psi = model
            .modes()
            .iter()
            .map(|m| m.psi.iter().map(|p| p * p).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        match minimality(&plant) {
            Ok(rep) => {
                if !(rep.controllable && rep.observable) {
                    println!("model {i}: NOT minimal, min |psi| = {min_psi:.4}");
                }
            }
            Err(e) => println!("model {i}: minimality error {e}, min |psi| = {min_psi:.4}"),
        }
    }
    println!("scan done");
}
